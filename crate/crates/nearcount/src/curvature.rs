//! Curvature certification for graph charts.
//!
//! The counting theory needs the *Hessian pencil* of a chart to be
//! nonsingular: writing `G_t = Σ_r t_r f_r`, the condition is
//! `det H_{G_t}(x) ≠ 0` for every `t ≠ 0` near the base point. Scaling `t`
//! only scales the determinant, so it suffices to check `t` on the boundary
//! of the unit `L∞` cube. [`verify_condition1`] sweeps a grid over that
//! boundary and a grid over the base box, refines the worst point by local
//! descent, and reports certified-by-sampling bounds `c1 ≤ |det| ≤ c2`
//! together with the minimizing witness.
//!
//! [`compute_localization`] then derives the radii the counting estimates
//! use: the largest box radius `tau` on which the determinant margin
//! persists, the inner radius `kappa = tau/2`, the gradient-image
//! separation `rho`, and the base separation `rho_prime = (tau − kappa)/2`.
//!
//! This is heuristic verification by dense sampling plus refinement — not a
//! proof. Degeneracy is never an `Err` from the verifier: it comes back as
//! `condition1_holds = false` with the witness attached.

use crate::funcspace::{ManifoldChart, Smooth};
use crate::linalg::Matrix;
use crate::numerics::{linspace, nelder_mead_box, SplitMix64};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Everything the certification sweep establishes about one chart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureReport {
    /// Did the sampled minimum of `|det|` stay above tolerance?
    pub condition1_holds: bool,
    /// Sampled-and-refined lower bound for `|det H_{G_t}|`.
    pub c1: f64,
    /// Sampled upper bound.
    pub c2: f64,
    /// Localization radius (0 until [`compute_localization`] runs).
    pub tau: f64,
    /// Inner radius, fixed at `tau/2`.
    pub kappa: f64,
    /// Half the minimal separation of gradient images of the two box
    /// boundaries (0 until localization runs).
    pub rho: f64,
    /// Half the `L∞` distance between the box boundaries: `(tau − kappa)/2`.
    pub rho_prime: f64,
    /// Per-face grid density used for `t`.
    pub t_grid_density: usize,
    /// Per-axis grid density used for `x`.
    pub x_grid_density: usize,
    /// `t` attaining the minimum `|det|`.
    pub min_witness_t: Vec<f64>,
    /// `x` attaining the minimum `|det|`.
    pub min_witness_x: Vec<f64>,
}

/// Relative tolerance deciding "nonzero": the minimum must exceed
/// `1e-8 · c2`.
pub const DET_TOLERANCE_REL: f64 = 1e-8;

/// `Σ_r t_r H_{f_r}(x)`.
pub fn pencil_hessian(chart: &ManifoldChart, t: &[f64], x: &[f64]) -> Result<Matrix> {
    if t.len() != chart.codim() {
        return Err(Error::Arity { expected: chart.codim(), found: t.len() });
    }
    if x.len() != chart.base_dim() {
        return Err(Error::Arity { expected: chart.base_dim(), found: x.len() });
    }
    let n = chart.base_dim();
    let mut acc = Matrix::zeros(n, n);
    for (tr, map) in t.iter().zip(chart.maps()) {
        if *tr != 0.0 {
            acc = acc.add(&map.hessian(x).scale(*tr));
        }
    }
    Ok(acc)
}

/// `det Σ_r t_r H_{f_r}(x)`.
pub fn pencil_hessian_det(chart: &ManifoldChart, t: &[f64], x: &[f64]) -> Result<f64> {
    Ok(pencil_hessian(chart, t, x)?.det())
}

/// Signature (positive minus negative eigenvalue count) of the pencil
/// Hessian.
pub fn pencil_signature(chart: &ManifoldChart, t: &[f64], x: &[f64]) -> Result<i32> {
    let h = pencil_hessian(chart, t, x)?;
    let scale = h.max_abs().max(1.0);
    Ok(h.sym_signature(1e-9 * scale))
}

/// Per-axis sampling density for the base box, shrinking with dimension to
/// keep the sweep bounded.
fn x_grid_density(n: usize) -> usize {
    match n {
        0..=3 => 5,
        4..=5 => 3,
        _ => 2,
    }
}

/// All points of the per-axis-grid over the box `[c − r, c + r]^n`.
fn box_grid(center: &[f64], radius: f64, density: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = center
        .iter()
        .map(|c| linspace(c - radius, c + radius, density))
        .collect();
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for &v in axis {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Grid over the boundary of the unit `L∞` cube in `R^r`: every face
/// (one coordinate pinned to ±1), remaining coordinates on a per-axis grid.
fn cube_boundary_grid(r: usize, density: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let free = linspace(-1.0, 1.0, density);
    for pin in 0..r {
        for sign in [-1.0, 1.0] {
            // cartesian product over the r-1 free coordinates
            let mut partial: Vec<Vec<f64>> = vec![Vec::new()];
            for _ in 0..r - 1 {
                let mut next = Vec::with_capacity(partial.len() * free.len());
                for p in &partial {
                    for &v in &free {
                        let mut q = p.clone();
                        q.push(v);
                        next.push(q);
                    }
                }
                partial = next;
            }
            for p in partial {
                let mut t = Vec::with_capacity(r);
                let mut it = p.into_iter();
                for d in 0..r {
                    if d == pin {
                        t.push(sign);
                    } else {
                        t.push(it.next().unwrap());
                    }
                }
                out.push(t);
            }
        }
    }
    out
}

/// Do all component maps have Hessians independent of `x`? Decided by
/// sampling; only used to collapse redundant sweep dimensions.
fn hessians_constant(chart: &ManifoldChart) -> bool {
    let x0 = chart.x0_f64();
    let r = chart.eps0_f64();
    let mut rng = SplitMix64::new(0x9c_u64);
    for map in chart.maps() {
        let h0 = map.hessian(x0);
        let scale = h0.max_abs().max(1.0);
        for _ in 0..2 {
            let x: Vec<f64> = x0.iter().map(|c| c + rng.next_range(-r, r)).collect();
            if map.hessian(&x).sub(&h0).max_abs() > 1e-12 * scale {
                return false;
            }
        }
    }
    true
}

/// Sweep `t` over the unit-cube boundary and `x` over the base box, then
/// refine the observed minimum of `|det|` by local descent. `c1` is the
/// refined minimum, `c2` the sampled maximum, and the condition holds when
/// `c1 > 1e-8·c2`.
pub fn verify_condition1(
    chart: &ManifoldChart,
    t_grid_density: usize,
    x_radius: f64,
) -> Result<CurvatureReport> {
    if t_grid_density < 8 {
        return Err(Error::Domain(format!(
            "t grid density must be at least 8, got {t_grid_density}"
        )));
    }
    if !(x_radius > 0.0) {
        return Err(Error::Domain(format!("x radius must be positive, got {x_radius}")));
    }
    let n = chart.base_dim();
    let r = chart.codim();
    let constant_hessians = hessians_constant(chart);
    let x_density = if constant_hessians { 1 } else { x_grid_density(n) };
    let x0 = chart.x0_f64().to_vec();
    let x_points = if constant_hessians {
        vec![x0.clone()]
    } else {
        box_grid(&x0, x_radius, x_density)
    };
    let t_points = cube_boundary_grid(r, t_grid_density);

    let total = x_points.len().saturating_mul(t_points.len());
    const SWEEP_BUDGET: usize = 50_000_000;
    if total > SWEEP_BUDGET {
        return Err(Error::BudgetExceeded { needed: total as u64, budget: SWEEP_BUDGET as u64 });
    }

    // per-x worker: Hessians once, then all t combinations
    struct Best {
        min: f64,
        max: f64,
        t_idx: usize,
        x_idx: usize,
    }
    let best = x_points
        .par_iter()
        .enumerate()
        .map(|(xi, x)| {
            let hessians: Vec<Matrix> = chart.maps().iter().map(|m| m.hessian(x)).collect();
            let mut local = Best { min: f64::INFINITY, max: 0.0, t_idx: 0, x_idx: xi };
            for (ti, t) in t_points.iter().enumerate() {
                let mut h = Matrix::zeros(n, n);
                for (tr, hr) in t.iter().zip(&hessians) {
                    if *tr != 0.0 {
                        h = h.add(&hr.scale(*tr));
                    }
                }
                let d = h.det().abs();
                if d > local.max {
                    local.max = d;
                }
                if d < local.min {
                    local.min = d;
                    local.t_idx = ti;
                }
            }
            local
        })
        .reduce(
            || Best { min: f64::INFINITY, max: 0.0, t_idx: 0, x_idx: 0 },
            |a, b| {
                let max = a.max.max(b.max);
                // deterministic under any scheduling: value, then index
                let (min, t_idx, x_idx) = if (b.min, b.x_idx, b.t_idx) < (a.min, a.x_idx, a.t_idx)
                {
                    (b.min, b.t_idx, b.x_idx)
                } else {
                    (a.min, a.t_idx, a.x_idx)
                };
                Best { min, max, t_idx, x_idx }
            },
        );

    let mut c1 = best.min;
    let c2 = best.max;
    let mut witness_t = t_points[best.t_idx].clone();
    let mut witness_x = x_points[best.x_idx].clone();

    // refine the minimum inside the face that produced it
    let pin = witness_t
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let pin_sign = witness_t[pin].signum();
    let free_dims = r - 1;
    let dims = free_dims + n;
    if dims > 0 {
        let mut start = Vec::with_capacity(dims);
        let mut lo = Vec::with_capacity(dims);
        let mut hi = Vec::with_capacity(dims);
        for d in 0..r {
            if d != pin {
                start.push(witness_t[d]);
                lo.push(-1.0);
                hi.push(1.0);
            }
        }
        for i in 0..n {
            start.push(witness_x[i]);
            lo.push(x0[i] - x_radius);
            hi.push(x0[i] + x_radius);
        }
        let objective = |p: &[f64]| -> f64 {
            let mut t = vec![0.0; r];
            let mut k = 0;
            for d in 0..r {
                if d == pin {
                    t[d] = pin_sign;
                } else {
                    t[d] = p[k];
                    k += 1;
                }
            }
            let x = &p[free_dims..];
            pencil_hessian_det(chart, &t, x).map(f64::abs).unwrap_or(f64::INFINITY)
        };
        let (arg, val) = nelder_mead_box(objective, &start, 0.05, &lo, &hi, 1e-13, 4000);
        if val < c1 {
            c1 = val;
            let mut t = vec![0.0; r];
            let mut k = 0;
            for d in 0..r {
                if d == pin {
                    t[d] = pin_sign;
                } else {
                    t[d] = arg[k];
                    k += 1;
                }
            }
            witness_t = t;
            witness_x = arg[free_dims..].to_vec();
        }
    }

    let condition1_holds = c2 > 0.0 && c1 > DET_TOLERANCE_REL * c2;
    Ok(CurvatureReport {
        condition1_holds,
        c1,
        c2,
        tau: 0.0,
        kappa: 0.0,
        rho: 0.0,
        rho_prime: 0.0,
        t_grid_density,
        x_grid_density: x_density,
        min_witness_t: witness_t,
        min_witness_x: witness_x,
    })
}

/// Sampling controls for [`compute_localization`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizationOptions {
    /// Random boundary `t` directions tried for the separation estimate.
    pub t_samples: usize,
    /// Random points per box boundary per `t`.
    pub boundary_samples: usize,
    pub seed: u64,
}

impl Default for LocalizationOptions {
    fn default() -> LocalizationOptions {
        LocalizationOptions { t_samples: 100, boundary_samples: 1000, seed: 0x5eed }
    }
}

/// Minimum of |det| over the t-boundary grid and an x-grid of radius `tau`.
fn min_det_on_radius(chart: &ManifoldChart, t_points: &[Vec<f64>], tau: f64) -> f64 {
    let n = chart.base_dim();
    let density = x_grid_density(n);
    let x_points = box_grid(chart.x0_f64(), tau, density);
    let mut min = f64::INFINITY;
    for x in &x_points {
        let hessians: Vec<Matrix> = chart.maps().iter().map(|m| m.hessian(x)).collect();
        for t in t_points {
            let mut h = Matrix::zeros(n, n);
            for (tr, hr) in t.iter().zip(&hessians) {
                if *tr != 0.0 {
                    h = h.add(&hr.scale(*tr));
                }
            }
            min = min.min(h.det().abs());
        }
    }
    min
}

/// Random point on the boundary of the `L∞` box of radius `r` around
/// `center`: pick a face, pin that coordinate, draw the rest uniformly.
fn random_boundary_point(center: &[f64], r: f64, rng: &mut SplitMix64) -> Vec<f64> {
    let n = center.len();
    let face = (rng.next_u64() % (2 * n as u64)) as usize;
    let pin = face / 2;
    let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
    (0..n)
        .map(|i| {
            if i == pin {
                center[i] + sign * r
            } else {
                center[i] + rng.next_range(-r, r)
            }
        })
        .collect()
}

/// Minimal `L∞` distance between two point clouds, with a sorted sweep on
/// the first coordinate to prune pairs.
fn cloud_min_distance(a: &mut Vec<Vec<f64>>, b: &mut Vec<Vec<f64>>) -> f64 {
    let key = |p: &Vec<f64>| p[0];
    a.sort_by(|u, v| key(u).partial_cmp(&key(v)).unwrap());
    b.sort_by(|u, v| key(u).partial_cmp(&key(v)).unwrap());
    let mut best = f64::INFINITY;
    let mut start = 0usize;
    for u in a.iter() {
        // advance the window: b[j] with b0 < u0 - best can never improve
        while start < b.len() && b[start][0] < u[0] - best {
            start += 1;
        }
        for v in b[start..].iter() {
            if v[0] > u[0] + best {
                break;
            }
            let d = u
                .iter()
                .zip(v)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            if d < best {
                best = d;
            }
        }
    }
    best
}

/// Gradient of `G_t = Σ t_r f_r` at `x`.
fn pencil_gradient(chart: &ManifoldChart, t: &[f64], x: &[f64]) -> Vec<f64> {
    let n = chart.base_dim();
    let mut g = vec![0.0; n];
    for (tr, map) in t.iter().zip(chart.maps()) {
        if *tr != 0.0 {
            for (gi, mi) in g.iter_mut().zip(map.gradient(x)) {
                *gi += tr * mi;
            }
        }
    }
    g
}

/// Derive the localization radii from a passing report: the largest
/// `tau ≤ eps0` keeping `min |det| ≥ c1/2`, `kappa = tau/2`, the sampled
/// gradient-image separation `rho`, and `rho_prime = (tau − kappa)/2`.
pub fn compute_localization(
    chart: &ManifoldChart,
    report: &CurvatureReport,
    opts: &LocalizationOptions,
) -> Result<CurvatureReport> {
    if !report.condition1_holds {
        return Err(Error::CurvatureRefused {
            c1: report.c1,
            tolerance: DET_TOLERANCE_REL * report.c2,
        });
    }
    let eps0 = chart.eps0_f64();
    let margin = report.c1 / 2.0;
    let t_points = cube_boundary_grid(chart.codim(), report.t_grid_density);

    // largest tau <= eps0 with min|det| >= margin; exact eps0 preferred
    let tau = if min_det_on_radius(chart, &t_points, eps0) >= margin {
        eps0
    } else {
        let mut lo = 0.0f64;
        let mut hi = eps0;
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if min_det_on_radius(chart, &t_points, mid) >= margin {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    if !(tau > 0.0) {
        return Err(Error::Domain(
            "no positive localization radius keeps the determinant margin".into(),
        ));
    }
    let kappa = tau / 2.0;

    // separation of gradient images of the two boundaries, sampled
    let mut rng = SplitMix64::new(opts.seed);
    let x0 = chart.x0_f64();
    let mut min_sep = f64::INFINITY;
    for _ in 0..opts.t_samples {
        let t = random_boundary_point(&vec![0.0; chart.codim()], 1.0, &mut rng);
        let mut outer: Vec<Vec<f64>> = (0..opts.boundary_samples)
            .map(|_| {
                let x = random_boundary_point(x0, tau, &mut rng);
                pencil_gradient(chart, &t, &x)
            })
            .collect();
        let mut inner: Vec<Vec<f64>> = (0..opts.boundary_samples)
            .map(|_| {
                let x = random_boundary_point(x0, kappa, &mut rng);
                pencil_gradient(chart, &t, &x)
            })
            .collect();
        let d = cloud_min_distance(&mut outer, &mut inner);
        if d < min_sep {
            min_sep = d;
        }
    }

    let mut out = report.clone();
    out.tau = tau;
    out.kappa = kappa;
    out.rho = 0.5 * min_sep;
    out.rho_prime = (tau - kappa) / 2.0;
    Ok(out)
}

/// Full default pipeline: verify at density 16 over the chart box, then
/// localize. Errors with the refusal variant when the condition fails.
pub fn certify_chart(chart: &ManifoldChart) -> Result<CurvatureReport> {
    let report = verify_condition1(chart, 16, chart.eps0_f64())?;
    compute_localization(chart, &report, &LocalizationOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{rational, ManifoldChart, SmoothMap};
    use crate::matfam::suslin_family;

    fn chart2(f1: &str, f2: &str, eps: (i64, i64)) -> ManifoldChart {
        let maps = vec![
            SmoothMap::parse(f1, 2).unwrap(),
            SmoothMap::parse(f2, 2).unwrap(),
        ];
        ManifoldChart::new(
            maps,
            vec![rational(0, 1), rational(0, 1)],
            rational(eps.0, eps.1),
            None,
        )
        .unwrap()
    }

    fn chart1(f1: &str, n: usize) -> ManifoldChart {
        let maps = vec![SmoothMap::parse(f1, n).unwrap()];
        ManifoldChart::new(maps, vec![rational(0, 1); n], rational(1, 4), None).unwrap()
    }

    #[test]
    fn pencil_determinant_of_the_standard_pair() {
        let chart = chart2("(x1^2 - x2^2)/2", "x1*x2", (1, 4));
        let x = [0.1, -0.2];
        assert!((pencil_hessian_det(&chart, &[1.0, 0.0], &x).unwrap() + 1.0).abs() < 1e-14);
        assert!((pencil_hessian_det(&chart, &[0.0, 1.0], &x).unwrap() + 1.0).abs() < 1e-14);
        assert!((pencil_hessian_det(&chart, &[3.0, 4.0], &x).unwrap() + 25.0).abs() < 1e-12);
    }

    #[test]
    fn determinant_scales_like_lambda_to_the_n() {
        let chart = chart2("(x1^2 - x2^2)/2", "x1*x2", (1, 4));
        let x = [0.05, 0.15];
        let base = pencil_hessian_det(&chart, &[0.4, -0.7], &x).unwrap();
        // powers of two scale exactly in floating point
        let doubled = pencil_hessian_det(&chart, &[0.8, -1.4], &x).unwrap();
        assert_eq!(doubled.to_bits(), (4.0 * base).to_bits());
        // a smooth non-quadratic chart scales to rounding accuracy
        let smooth = chart1("exp(x1) + x2^2", 2);
        let b = pencil_hessian_det(&smooth, &[1.0], &[0.1, 0.0]).unwrap();
        let s = pencil_hessian_det(&smooth, &[1.5], &[0.1, 0.0]).unwrap();
        assert!((s - 1.5 * 1.5 * b).abs() < 1e-9 * b.abs());
    }

    #[test]
    fn recursive_family_charts_match_the_determinant_formula() {
        let mut rng = SplitMix64::new(123);
        for r in 2..=5usize {
            let fam = suslin_family(r).unwrap();
            let chart = fam.chart(rational(1, 4)).unwrap();
            let n = chart.base_dim();
            let x = vec![0.0; n];
            for _ in 0..5 {
                let t: Vec<f64> = (0..r).map(|_| rng.next_range(-2.0, 2.0)).collect();
                let norm: f64 = t.iter().map(|v| v * v).sum();
                let expect = norm.powi((n / 2) as i32);
                let det = pencil_hessian_det(&chart, &t, &x).unwrap();
                assert!(
                    (det.abs() - expect).abs() < 1e-9 * expect.max(1.0),
                    "R={r} t={t:?}"
                );
            }
        }
    }

    #[test]
    fn condition_holds_for_the_recursive_chart_with_tight_constants() {
        let fam = suslin_family(2).unwrap();
        let chart = fam.chart(rational(1, 4)).unwrap();
        let report = verify_condition1(&chart, 16, chart.eps0_f64()).unwrap();
        assert!(report.condition1_holds);
        // |det| = t1²+t2² on the cube boundary: min 1 at face centers,
        // max 2 at corners
        assert!((report.c1 - 1.0).abs() < 1e-6, "c1 = {}", report.c1);
        assert!((report.c2 - 2.0).abs() < 1e-12, "c2 = {}", report.c2);
        // witness is a face center: one coordinate ±1, the other ~0
        let t = &report.min_witness_t;
        let big = t.iter().filter(|v| v.abs() > 0.99).count();
        let small = t.iter().filter(|v| v.abs() < 1e-3).count();
        assert_eq!((big, small), (1, 1), "witness {t:?}");
    }

    #[test]
    fn degenerate_pencil_is_rejected_with_a_diagonal_witness() {
        let chart = chart2("x1^2/2 + x2^2/2", "x1*x2", (1, 4));
        let report = verify_condition1(&chart, 16, chart.eps0_f64()).unwrap();
        assert!(!report.condition1_holds);
        assert!(report.c1 < 1e-9, "c1 = {}", report.c1);
        // det = t1² − t2² vanishes where |t1| = |t2|
        let t = &report.min_witness_t;
        assert!((t[0].abs() - t[1].abs()).abs() < 1e-3, "witness {t:?}");
    }

    #[test]
    fn single_map_charts_reduce_to_a_hessian_determinant_check() {
        let good = chart1("x1^2/2 + x2^2/2", 2);
        let report = verify_condition1(&good, 16, good.eps0_f64()).unwrap();
        assert!(report.condition1_holds);
        assert!((report.c1 - 1.0).abs() < 1e-9);
        assert!((report.c2 - 1.0).abs() < 1e-9);

        let flat = chart1("x1^2/2", 2); // Hessian diag(1, 0), det 0
        let report = verify_condition1(&flat, 16, flat.eps0_f64()).unwrap();
        assert!(!report.condition1_holds);
    }

    #[test]
    fn verdict_is_stable_under_map_permutation_and_negation() {
        let a = chart2("(x1^2 - x2^2)/2", "x1*x2", (1, 4));
        let b = chart2("x1*x2", "(x1^2 - x2^2)/2", (1, 4));
        let c = chart2("(x1^2 - x2^2)/2", "-(x1*x2)", (1, 4));
        let ra = verify_condition1(&a, 16, 0.25).unwrap();
        let rb = verify_condition1(&b, 16, 0.25).unwrap();
        let rc = verify_condition1(&c, 16, 0.25).unwrap();
        assert!(ra.condition1_holds && rb.condition1_holds && rc.condition1_holds);
        assert!((ra.c1 - rb.c1).abs() < 1e-8);
        assert!((ra.c1 - rc.c1).abs() < 1e-8);
        assert!((ra.c2 - rb.c2).abs() < 1e-12);
        assert!((ra.c2 - rc.c2).abs() < 1e-12);
    }

    #[test]
    fn signature_is_constant_along_a_face() {
        let fam = suslin_family(2).unwrap();
        let chart = fam.chart(rational(1, 4)).unwrap();
        let x = [0.0, 0.0];
        for s in linspace(-1.0, 1.0, 9) {
            assert_eq!(pencil_signature(&chart, &[1.0, s], &x).unwrap(), 0);
        }
        let elliptic = chart1("x1^2/2 + x2^2/2", 2);
        assert_eq!(pencil_signature(&elliptic, &[1.0], &[0.1, 0.1]).unwrap(), 2);
    }

    #[test]
    fn localization_keeps_the_whole_box_for_quadratics() {
        let fam = suslin_family(2).unwrap();
        let chart = fam.chart(rational(1, 4)).unwrap();
        let report = verify_condition1(&chart, 16, chart.eps0_f64()).unwrap();
        let opts = LocalizationOptions { t_samples: 40, boundary_samples: 400, seed: 7 };
        let loc = compute_localization(&chart, &report, &opts).unwrap();
        assert_eq!(loc.tau, 0.25);
        assert_eq!(loc.kappa, 0.125);
        assert!((loc.rho_prime - 0.0625).abs() < 1e-15);
        // gradient map is x ↦ A(t)x with A(t)ᵀA(t) = (t1²+t2²)I, so image
        // boundaries are rotated scaled squares separated on the order of
        // tau − kappa
        assert!(loc.rho > 0.03 && loc.rho < 0.09, "rho = {}", loc.rho);
        assert!(0.0 < loc.kappa && loc.kappa < loc.tau);
    }

    #[test]
    fn localization_refuses_a_failed_certificate() {
        let chart = chart2("x1^2/2 + x2^2/2", "x1*x2", (1, 4));
        let report = verify_condition1(&chart, 16, chart.eps0_f64()).unwrap();
        let err = compute_localization(&chart, &report, &LocalizationOptions::default());
        assert!(matches!(err, Err(Error::CurvatureRefused { .. })));
    }

    #[test]
    fn localization_shrinks_when_curvature_decays_away_from_center() {
        // f = (x1² + x2²)/2 + x1³ has H = diag(1 + 6 x1, 1), so det falls
        // off linearly to the left of the center. Certify on a small radius
        // (det ≥ 0.7 there), then localize over the full eps0 = 1/4 box:
        // the margin c1/2 = 0.35 caps tau at (1 − 0.35)/6 ≈ 0.1083.
        let chart = chart1("(x1^2 + x2^2)/2 + x1^3", 2);
        let report = verify_condition1(&chart, 16, 0.05).unwrap();
        assert!(report.condition1_holds);
        assert!((report.c1 - 0.7).abs() < 1e-9, "c1 = {}", report.c1);
        let opts = LocalizationOptions { t_samples: 10, boundary_samples: 100, seed: 3 };
        let loc = compute_localization(&chart, &report, &opts).unwrap();
        assert!(loc.tau > 0.09 && loc.tau < 0.12, "tau = {}", loc.tau);
        assert!(loc.tau < chart.eps0_f64());
        assert_eq!(loc.kappa, loc.tau / 2.0);
        assert!((loc.rho_prime - (loc.tau - loc.kappa) / 2.0).abs() < 1e-15);
        assert!(loc.rho > 0.0);
    }

    #[test]
    fn grid_density_precondition() {
        let chart = chart1("x1^2/2 + x2^2/2", 2);
        assert!(verify_condition1(&chart, 7, 0.25).is_err());
    }
}
