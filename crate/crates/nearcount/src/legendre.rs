//! Numerical Legendre transform on a box.
//!
//! For a smooth map `F` whose Hessian determinant stays away from zero on a
//! closed box `U`, the gradient `∇F` is locally invertible and the Legendre
//! transform is the classical pointwise formula
//! `F*(y) = x·y − F(x)` at the unique `x ∈ U` with `∇F(x) = y`. The dual
//! identities `∇F* = (∇F)⁻¹`, `H_{F*}(y) = H_F(x)⁻¹`, and `F** = F` are
//! what downstream phase computations rely on, and each is exposed here as
//! a checkable operation.
//!
//! `F` need not be convex — indefinite Hessians are the typical case — so
//! this is *not* the global convex conjugate; it is the inverse-function
//! construction on a certified box.
//!
//! Inversion is damped Newton iteration: full steps while the residual
//! shrinks, geometric step halving otherwise, starting from the box center
//! (or an explicit warm start from the caller). No hidden mutable cache:
//! queries are pure, so concurrent use trivially matches sequential use.

use crate::curvature;
use crate::funcspace::{ManifoldChart, Smooth, SmoothMap};
use crate::linalg::Matrix;
use crate::numerics::SplitMix64;
use crate::{Error, Result};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

/// A smooth map together with the certified box on which its gradient is
/// inverted, and the sampled bounding box of the gradient image.
#[derive(Debug, Clone)]
pub struct LegendreChart {
    map: SmoothMap,
    center: Vec<f64>,
    radius: f64,
    image_lo: Vec<f64>,
    image_hi: Vec<f64>,
    tolerance: f64,
    max_iters: usize,
}

/// Condition-number ceiling for [`LegendreChart::dual_hessian`].
pub const HESSIAN_COND_LIMIT: f64 = 1e12;

impl LegendreChart {
    /// Certify `det H_F ≠ 0` on the box `[center ± radius]` (via the
    /// curvature sweep) and record the sampled image box of `∇F`.
    pub fn new(map: SmoothMap, center: Vec<f64>, radius: f64) -> Result<LegendreChart> {
        LegendreChart::with_tolerance(map, center, radius, 1e-10, 60)
    }

    pub fn with_tolerance(
        map: SmoothMap,
        center: Vec<f64>,
        radius: f64,
        tolerance: f64,
        max_iters: usize,
    ) -> Result<LegendreChart> {
        let n = map.arity();
        if center.len() != n {
            return Err(Error::Arity { expected: n, found: center.len() });
        }
        if !(radius > 0.0) {
            return Err(Error::Domain(format!("box radius must be positive, got {radius}")));
        }
        if !(tolerance > 0.0) {
            return Err(Error::Domain("inversion tolerance must be positive".into()));
        }
        // reuse the pencil sweep with a single map to bound |det H_F| below
        let x0 = center
            .iter()
            .map(|&c| {
                BigRational::from_float(c)
                    .ok_or_else(|| Error::Domain(format!("non-finite center coordinate {c}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let eps0 = BigRational::from_float(radius)
            .ok_or_else(|| Error::Domain("non-finite radius".into()))?;
        let probe = ManifoldChart::new(vec![map.clone()], x0, eps0, None)?;
        let report = curvature::verify_condition1(&probe, 16, radius)?;
        if !report.condition1_holds {
            return Err(Error::CurvatureRefused {
                c1: report.c1,
                tolerance: curvature::DET_TOLERANCE_REL * report.c2,
            });
        }

        // sampled bounding box of the gradient image
        let mut image_lo = vec![f64::INFINITY; n];
        let mut image_hi = vec![f64::NEG_INFINITY; n];
        let mut record = |g: &[f64]| {
            for i in 0..n {
                image_lo[i] = image_lo[i].min(g[i]);
                image_hi[i] = image_hi[i].max(g[i]);
            }
        };
        let per_axis = match n {
            0..=2 => 9,
            3 => 5,
            _ => 3,
        };
        let mut idx = vec![0usize; n];
        loop {
            let x: Vec<f64> = (0..n)
                .map(|i| center[i] - radius + 2.0 * radius * idx[i] as f64 / (per_axis - 1) as f64)
                .collect();
            record(&map.gradient(&x));
            // odometer over the grid
            let mut d = 0;
            loop {
                if d == n {
                    break;
                }
                idx[d] += 1;
                if idx[d] < per_axis {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == n {
                break;
            }
        }
        let mut rng = SplitMix64::new(0xD1CE);
        for _ in 0..200 {
            let x: Vec<f64> = center.iter().map(|&c| c + rng.next_range(-radius, radius)).collect();
            record(&map.gradient(&x));
        }

        Ok(LegendreChart { map, center, radius, image_lo, image_hi, tolerance, max_iters })
    }

    pub fn map(&self) -> &SmoothMap {
        &self.map
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Sampled bounding box of `∇F(U)`: `(lo, hi)` per axis.
    pub fn image_box(&self) -> (&[f64], &[f64]) {
        (&self.image_lo, &self.image_hi)
    }

    /// Half-width `L` of a symmetric box `[−L, L]^n` containing the image.
    pub fn image_half_width(&self) -> f64 {
        self.image_lo
            .iter()
            .chain(&self.image_hi)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    fn inside_strict(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.center)
            .all(|(xi, ci)| (xi - ci).abs() < self.radius)
    }

    fn image_margin(&self) -> f64 {
        let span = self
            .image_hi
            .iter()
            .zip(&self.image_lo)
            .fold(0.0f64, |m, (h, l)| m.max(h - l));
        1e-9 + 1e-6 * span
    }

    /// Solve `∇F(x) = y` by damped Newton from the box center.
    pub fn invert_gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        let start = self.center.clone();
        self.invert_gradient_from(y, &start)
    }

    /// Solve `∇F(x) = y` starting from an explicit point — callers walking
    /// a path of nearby targets warm-start with the previous preimage.
    pub fn invert_gradient_from(&self, y: &[f64], x_init: &[f64]) -> Result<Vec<f64>> {
        let n = self.map.arity();
        if y.len() != n {
            return Err(Error::Arity { expected: n, found: y.len() });
        }
        if x_init.len() != n {
            return Err(Error::Arity { expected: n, found: x_init.len() });
        }
        let margin = self.image_margin();
        for i in 0..n {
            if y[i] < self.image_lo[i] - margin || y[i] > self.image_hi[i] + margin {
                return Err(Error::Domain(format!(
                    "target lies outside the stored gradient image box on axis {i}"
                )));
            }
        }

        // iterates may roam slightly beyond U; the final answer may not
        let roam = self.radius * 1.5;
        let residual = |x: &[f64]| -> f64 {
            self.map
                .gradient(x)
                .iter()
                .zip(y)
                .map(|(g, yi)| (g - yi).abs())
                .fold(0.0, f64::max)
        };
        let mut x = x_init.to_vec();
        let mut r = residual(&x);
        let mut best = r;
        for _ in 0..self.max_iters {
            if r <= self.tolerance {
                if self.inside_strict(&x) {
                    return Ok(x);
                }
                return Err(Error::Domain(
                    "gradient preimage converged onto the box boundary; target outside image"
                        .into(),
                ));
            }
            let g = self.map.gradient(&x);
            let h = self.map.hessian(&x);
            let rhs: Vec<f64> = g.iter().zip(y).map(|(gi, yi)| yi - gi).collect();
            let step = h.solve(&rhs).map_err(|_| {
                Error::NotInvertible("Hessian became singular during Newton iteration".into())
            })?;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let cand: Vec<f64> = x
                    .iter()
                    .zip(&step)
                    .zip(&self.center)
                    .map(|((xi, si), ci)| (xi + lambda * si).clamp(ci - roam, ci + roam))
                    .collect();
                let rc = residual(&cand);
                if rc < r {
                    x = cand;
                    r = rc;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
            best = best.min(r);
        }
        if r <= self.tolerance {
            if self.inside_strict(&x) {
                return Ok(x);
            }
            return Err(Error::Domain(
                "gradient preimage converged onto the box boundary; target outside image".into(),
            ));
        }
        Err(Error::Domain(format!(
            "gradient inversion did not converge: best residual {best:.3e} (tolerance {:.1e})",
            self.tolerance
        )))
    }

    /// `F*(y) = x·y − F(x)` at the preimage `x`.
    pub fn dual_value(&self, y: &[f64]) -> Result<f64> {
        let x = self.invert_gradient(y)?;
        Ok(dot(&x, y) - self.map.value(&x))
    }

    /// `H_{F*}(y) = H_F(x)⁻¹` at the preimage `x`.
    pub fn dual_hessian(&self, y: &[f64]) -> Result<Matrix> {
        let x = self.invert_gradient(y)?;
        let h = self.map.hessian(&x);
        let cond = h.sym_cond();
        if !cond.is_finite() || cond > HESSIAN_COND_LIMIT {
            return Err(Error::IllConditioned { cond });
        }
        h.inverse()
            .map_err(|_| Error::NotInvertible("Hessian not invertible at preimage".into()))
    }

    /// `F**(x) = x·ŷ − F*(ŷ)` with `ŷ = ∇F(x)`; the inner transform runs
    /// through the numerical inversion, so this measures round-trip error.
    pub fn double_transform_value(&self, x: &[f64]) -> Result<f64> {
        let y = self.map.gradient(x);
        let dual = self.dual_value(&y)?;
        Ok(dot(x, &y) - dual)
    }

    /// Round-trip statistics over random interior points:
    /// `max |invert(∇F(x)) − x|_∞` and the worst gradient residual.
    pub fn round_trip_stats(&self, samples: usize, seed: u64) -> Result<RoundTripStats> {
        let mut rng = SplitMix64::new(seed);
        let n = self.map.arity();
        let mut max_x_err = 0.0f64;
        let mut max_residual = 0.0f64;
        for _ in 0..samples {
            // stay clearly interior so preimages cannot brush the boundary
            let x: Vec<f64> = self
                .center
                .iter()
                .map(|&c| c + 0.9 * rng.next_range(-self.radius, self.radius))
                .collect();
            let y = self.map.gradient(&x);
            let back = self.invert_gradient(&y)?;
            let err = x
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            max_x_err = max_x_err.max(err);
            let g = self.map.gradient(&back);
            let res = g.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            max_residual = max_residual.max(res);
            let _ = n;
        }
        Ok(RoundTripStats { samples, max_x_err, max_residual })
    }

    /// Extremes over random pairs of `|x − x'|_∞ / |∇F(x) − ∇F(x')|_∞`:
    /// both the ratio and its reciprocal stay bounded on a certified box.
    pub fn bilipschitz_ratios(&self, pairs: usize, seed: u64) -> BiLipschitzReport {
        let mut rng = SplitMix64::new(seed);
        let mut min_ratio = f64::INFINITY;
        let mut max_ratio = 0.0f64;
        let mut used = 0usize;
        while used < pairs {
            let a: Vec<f64> = self
                .center
                .iter()
                .map(|&c| c + rng.next_range(-self.radius, self.radius))
                .collect();
            let b: Vec<f64> = self
                .center
                .iter()
                .map(|&c| c + rng.next_range(-self.radius, self.radius))
                .collect();
            let dx = a
                .iter()
                .zip(&b)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max);
            if dx < 1e-9 * self.radius {
                continue;
            }
            let ga = self.map.gradient(&a);
            let gb = self.map.gradient(&b);
            let dg = ga
                .iter()
                .zip(&gb)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max);
            let ratio = dx / dg;
            min_ratio = min_ratio.min(ratio);
            max_ratio = max_ratio.max(ratio);
            used += 1;
        }
        BiLipschitzReport { pairs: used, min_ratio, max_ratio }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundTripStats {
    pub samples: usize,
    pub max_x_err: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiLipschitzReport {
    pub pairs: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart(src: &str, n: usize, radius: f64) -> LegendreChart {
        let map = SmoothMap::parse(src, n).unwrap();
        LegendreChart::new(map, vec![0.0; n], radius).unwrap()
    }

    #[test]
    fn identity_map_is_self_dual() {
        let c = chart("(x1^2 + x2^2)/2", 2, 1.0);
        let y = [0.3, -0.55];
        let x = c.invert_gradient(&y).unwrap();
        assert!((x[0] - 0.3).abs() < 1e-10);
        assert!((x[1] + 0.55).abs() < 1e-10);
        let dual = c.dual_value(&y).unwrap();
        assert!((dual - (y[0] * y[0] + y[1] * y[1]) / 2.0).abs() < 1e-10);
        let h = c.dual_hessian(&y).unwrap();
        assert!((h[(0, 0)] - 1.0).abs() < 1e-9);
        assert!((h[(1, 1)] - 1.0).abs() < 1e-9);
        assert!(h[(0, 1)].abs() < 1e-9);
    }

    #[test]
    fn quadratic_form_inverts_through_the_linear_solve() {
        // F = xᵀAx/2 with A = [[2,1],[1,3]]: ∇F = Ax, so x = A⁻¹y
        let c = chart("x1^2 + x1*x2 + 3*x2^2/2", 2, 1.0);
        let a = {
            let mut m = Matrix::zeros(2, 2);
            m[(0, 0)] = 2.0;
            m[(0, 1)] = 1.0;
            m[(1, 0)] = 1.0;
            m[(1, 1)] = 3.0;
            m
        };
        let y = vec![0.4, -0.2];
        let expect = a.solve(&y).unwrap();
        let x = c.invert_gradient(&y).unwrap();
        assert!((x[0] - expect[0]).abs() < 1e-10);
        assert!((x[1] - expect[1]).abs() < 1e-10);
        // F*(y) = yᵀA⁻¹y/2
        let dual = c.dual_value(&y).unwrap();
        assert!((dual - dot(&y, &expect) / 2.0).abs() < 1e-10);
        // H_{F*} = A⁻¹
        let h = c.dual_hessian(&y).unwrap();
        let ainv = a.inverse().unwrap();
        assert!(h.sub(&ainv).max_abs() < 1e-8);
    }

    #[test]
    fn indefinite_quadratics_are_supported() {
        // saddle F = (x1² − x2²)/2: ∇F = (x1, −x2), F* = (y1² − y2²)/2
        let c = chart("(x1^2 - x2^2)/2", 2, 1.0);
        let y = [0.25, 0.4];
        let x = c.invert_gradient(&y).unwrap();
        assert!((x[0] - 0.25).abs() < 1e-10);
        assert!((x[1] + 0.4).abs() < 1e-10);
        let dual = c.dual_value(&y).unwrap();
        assert!((dual - (0.25f64.powi(2) - 0.4f64.powi(2)) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn perturbed_saddle_converges_tightly() {
        let c = chart("(x1^2 - x2^2)/2 + 0.01*x1^4", 2, 0.5);
        let stats = c.round_trip_stats(300, 4).unwrap();
        assert!(stats.max_residual <= 1e-10, "residual {}", stats.max_residual);
        assert!(
            stats.max_x_err <= 1e-8 * 2.0 * c.radius(),
            "x error {}",
            stats.max_x_err
        );
    }

    #[test]
    fn double_transform_returns_the_original_values() {
        let mut rng = SplitMix64::new(21);
        for src in ["(x1^2 + x2^2)/2", "(x1^2 - x2^2)/2 + 0.01*x1^4", "x1*x2 + x1^2"] {
            let c = chart(src, 2, 0.5);
            for _ in 0..100 {
                let x = [rng.next_range(-0.4, 0.4), rng.next_range(-0.4, 0.4)];
                let f = c.map().value(&x);
                let ff = c.double_transform_value(&x).unwrap();
                assert!((ff - f).abs() <= 1e-8, "{src} at {x:?}: {ff} vs {f}");
            }
        }
    }

    #[test]
    fn gradient_differences_are_bilipschitz_on_the_box() {
        let c = chart("(x1^2 - x2^2)/2 + 0.01*x1^4", 2, 0.5);
        let report = c.bilipschitz_ratios(1000, 17);
        assert_eq!(report.pairs, 1000);
        assert!(report.min_ratio > 0.0 && report.min_ratio.is_finite());
        assert!(report.max_ratio.is_finite());
        // for this nearly-orthogonal gradient the ratios hug 1
        assert!(report.min_ratio > 0.3, "min {}", report.min_ratio);
        assert!(report.max_ratio < 3.0, "max {}", report.max_ratio);
    }

    #[test]
    fn degenerate_hessian_is_refused_at_construction() {
        let map = SmoothMap::parse("x1^2/2", 2).unwrap(); // det H ≡ 0
        let err = LegendreChart::new(map, vec![0.0, 0.0], 0.5);
        assert!(matches!(err, Err(Error::CurvatureRefused { .. })));
    }

    #[test]
    fn targets_outside_the_image_are_rejected() {
        let c = chart("(x1^2 + x2^2)/2", 2, 0.5);
        // image of the gradient is the box itself; 2.0 is far outside
        assert!(c.invert_gradient(&[2.0, 0.0]).is_err());
        // near-boundary target converges onto the box edge and is refused
        assert!(c.invert_gradient(&[0.5, 0.0]).is_err());
    }

    #[test]
    fn warm_start_reaches_the_same_preimage() {
        let c = chart("(x1^2 - x2^2)/2 + 0.01*x1^4", 2, 0.5);
        let y = [0.2, 0.1];
        let cold = c.invert_gradient(&y).unwrap();
        let warm = c.invert_gradient_from(&y, &[0.19, -0.11]).unwrap();
        for i in 0..2 {
            assert!((cold[i] - warm[i]).abs() < 1e-9);
        }
    }
}
