//! Extremal trigonometric kernels: the Selberg majorant/minorant pair for an
//! interval indicator, and the Fejér kernel.
//!
//! For `δ ∈ (0, 1/2]` let `χ_δ(θ) = 1` when the distance from `θ` to the
//! nearest integer is at most `δ`, else `0`. [`selberg_pair`] builds
//! degree-`J` trigonometric polynomials `S⁻ ≤ χ_δ ≤ S⁺` whose mean values
//! are exactly `2δ ± 1/(J+1)` — the sharp one-sided approximations the
//! counting argument sums over denominators. The construction follows the
//! classical interpolation approach: corrections to the indicator's Fourier
//! coefficients obtained from the periodized sawtooth extremal function; we
//! assert only the sandwich, mean, and coefficient-bound properties, never
//! optimality.
//!
//! The Fejér kernel `F_D(θ) = D⁻²|Σ_{d=1}^D e(dθ)|²` is the nonnegative
//! kernel used to majorize very short interval indicators:
//! `χ_{1/T} ≤ (π²/4)·F_{⌊T/2⌋}`.

use crate::numerics::dist_to_nearest_int;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Interval indicator `χ_δ` on the circle (closed interval).
#[inline]
pub fn interval_indicator(delta: f64, theta: f64) -> f64 {
    if dist_to_nearest_int(theta) <= delta {
        1.0
    } else {
        0.0
    }
}

/// `c[0] + 2 Σ_{j≥1} c[j] cos(2πjθ)` by the cosine three-term recurrence —
/// the hot path for evaluating an even real trigonometric polynomial.
fn eval_cos_series(c: &[f64], theta: f64) -> f64 {
    let phi = 2.0 * PI * theta;
    let step = phi.cos();
    let mut prev = 1.0; // cos(0·φ)
    let mut cur = step; // cos(1·φ)
    let mut acc = c[0];
    for cj in &c[1..] {
        acc += 2.0 * cj * cur;
        let next = 2.0 * step * cur - prev;
        prev = cur;
        cur = next;
    }
    acc
}

/// Majorant/minorant pair for `χ_δ` of degree `J`.
///
/// Both polynomials are even with real coefficients; `coeff(j)` exposes the
/// full conjugate-symmetric range `−J ≤ j ≤ J`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelbergPair {
    delta: f64,
    degree: usize,
    plus: Vec<f64>,  // indices 0..=J
    minus: Vec<f64>, // indices 0..=J
    bounds: Vec<f64>,
}

/// The sawtooth-interpolation correction kernel at `s ∈ (0, 1)`:
/// `B(s) = 1/(πs) − 1/π − (1−s)·cot(πs)`, with `B(0⁺) = 0` and
/// `B(1) = 1/π`.
fn correction_kernel(s: f64) -> f64 {
    1.0 / (PI * s) - 1.0 / PI - (1.0 - s) / (PI * s).tan()
}

/// Build the Selberg pair for the interval `[−δ, δ]` at degree `J ≥ 1`.
pub fn selberg_pair(delta: f64, degree: usize) -> Result<SelbergPair> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::Domain(format!(
            "interval half-width must lie in (0, 1/2], got {delta}"
        )));
    }
    if degree < 1 {
        return Err(Error::Domain("polynomial degree must be at least 1".into()));
    }
    let j_max = degree;
    let m = (j_max + 1) as f64;
    let mut plus = Vec::with_capacity(j_max + 1);
    let mut minus = Vec::with_capacity(j_max + 1);
    let mut bounds = Vec::with_capacity(j_max + 1);
    // the mean values are pinned exactly
    plus.push(2.0 * delta + 1.0 / m);
    minus.push(2.0 * delta - 1.0 / m);
    bounds.push(1.0 / m + 2.0 * delta);
    for j in 1..=j_max {
        let s = j as f64 / m;
        let angle = 2.0 * PI * j as f64 * delta;
        let (sn, cs) = angle.sin_cos();
        let chi_hat = sn / (PI * j as f64);
        let b = correction_kernel(s);
        plus.push(chi_hat + ((1.0 - s) * cs - b * sn) / m);
        minus.push(chi_hat - ((1.0 - s) * cs + b * sn) / m);
        bounds.push(1.0 / m + (2.0 * delta).min(1.0 / (PI * j as f64)));
    }
    Ok(SelbergPair { delta, degree: j_max, plus, minus, bounds })
}

impl SelbergPair {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Fourier coefficient of the majorant at frequency `j` (`|j| ≤ J`).
    pub fn plus_coeff(&self, j: i64) -> f64 {
        let a = j.unsigned_abs() as usize;
        if a <= self.degree {
            self.plus[a]
        } else {
            0.0
        }
    }

    /// Fourier coefficient of the minorant at frequency `j`.
    pub fn minus_coeff(&self, j: i64) -> f64 {
        let a = j.unsigned_abs() as usize;
        if a <= self.degree {
            self.minus[a]
        } else {
            0.0
        }
    }

    /// The coefficient envelope `b_j = 1/(J+1) + min(2δ, 1/(π|j|))`.
    pub fn bound(&self, j: i64) -> f64 {
        let a = j.unsigned_abs() as usize;
        if a <= self.degree {
            self.bounds[a]
        } else {
            0.0
        }
    }

    /// Majorant value `S⁺(θ)`.
    pub fn plus_value(&self, theta: f64) -> f64 {
        eval_cos_series(&self.plus, theta)
    }

    /// Minorant value `S⁻(θ)`.
    pub fn minus_value(&self, theta: f64) -> f64 {
        eval_cos_series(&self.minus, theta)
    }

    /// Full coefficient array `−J..J` (center index `J`) for the generic
    /// evaluator.
    pub fn full_coeffs_plus(&self) -> Vec<Complex64> {
        full_even_coeffs(&self.plus)
    }

    pub fn full_coeffs_minus(&self) -> Vec<Complex64> {
        full_even_coeffs(&self.minus)
    }

    /// Grid for inequality checks: `uniform` points over one period plus
    /// `clustered` points packed within `2/J` of each jump `±δ`, where the
    /// polynomials hug the indicator.
    pub fn check_grid(&self, uniform: usize, clustered: usize) -> Vec<f64> {
        let mut grid = Vec::with_capacity(uniform + 2 * clustered + 2);
        for i in 0..uniform {
            grid.push(-0.5 + i as f64 / uniform as f64);
        }
        let width = 2.0 / self.degree as f64;
        for i in 0..clustered {
            let off = width * (2.0 * (i as f64 + 0.5) / clustered as f64 - 1.0);
            grid.push(self.delta + off);
            grid.push(-self.delta + off);
        }
        grid.push(self.delta);
        grid.push(-self.delta);
        grid
    }
}

fn full_even_coeffs(half: &[f64]) -> Vec<Complex64> {
    let j = half.len() - 1;
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * j + 1];
    for (a, &c) in half.iter().enumerate() {
        out[j + a] = Complex64::new(c, 0.0);
        out[j - a] = Complex64::new(c, 0.0);
    }
    out
}

/// Evaluate `Σ_j c_j e(jθ)` for coefficients indexed `−J..J` (slice of
/// length `2J+1`, center at index `J`). The imaginary part must cancel to
/// `1e−12` of the coefficient scale — it is checked, then discarded.
pub fn eval_trig_poly(coeffs: &[Complex64], theta: f64) -> Result<f64> {
    if coeffs.len() % 2 == 0 {
        return Err(Error::Domain(
            "coefficient slice must have odd length (indices -J..J)".into(),
        ));
    }
    let j_max = (coeffs.len() / 2) as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut scale = 0.0f64;
    for (k, c) in coeffs.iter().enumerate() {
        let j = k as i64 - j_max;
        let phase = 2.0 * PI * j as f64 * theta;
        acc += c * Complex64::new(phase.cos(), phase.sin());
        scale += c.norm();
    }
    if acc.im.abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::Domain(format!(
            "trigonometric polynomial is not real at θ = {theta}: imag = {}",
            acc.im
        )));
    }
    Ok(acc.re)
}

/// The Fejér kernel of degree `D`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FejerKernel {
    d: usize,
}

impl FejerKernel {
    pub fn new(d: usize) -> Result<FejerKernel> {
        if d < 1 {
            return Err(Error::Domain("Fejér degree must be at least 1".into()));
        }
        Ok(FejerKernel { d })
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    /// Closed-form value `(sin(πDθ)/(D sin(πθ)))²`, with the removable
    /// singularity at integer `θ` giving `1`.
    pub fn value(&self, theta: f64) -> f64 {
        let u = theta - theta.round();
        let d = self.d as f64;
        if u.abs() < 1e-9 {
            // ratio → 1 − (D²−1)(πu)²/6 near the singularity
            let t = PI * u;
            let r = 1.0 - (d * d - 1.0) * t * t / 6.0;
            return r * r;
        }
        let r = (PI * d * u).sin() / (d * (PI * u).sin());
        r * r
    }

    /// Definitional form `D⁻²|Σ_{d=1}^D e(dθ)|²`.
    pub fn value_sum_form(&self, theta: f64) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 1..=self.d {
            let phase = 2.0 * PI * k as f64 * theta;
            acc += Complex64::new(phase.cos(), phase.sin());
        }
        acc.norm_sqr() / (self.d * self.d) as f64
    }

    /// Fourier coefficient `(D−|d|)/D²` for `|d| ≤ D`, else `0`.
    pub fn coeff(&self, k: i64) -> f64 {
        let a = k.unsigned_abs() as usize;
        if a <= self.d {
            (self.d - a) as f64 / (self.d * self.d) as f64
        } else {
            0.0
        }
    }

    /// Full coefficient array `−D..D` for the generic evaluator.
    pub fn coeffs(&self) -> Vec<Complex64> {
        (-(self.d as i64)..=self.d as i64)
            .map(|k| Complex64::new(self.coeff(k), 0.0))
            .collect()
    }
}

/// Convenience: `F_D(θ)`.
pub fn fejer_eval(d: usize, theta: f64) -> Result<f64> {
    Ok(FejerKernel::new(d)?.value(theta))
}

/// Outcome of checking `χ_{1/T}(θ) ≤ (π²/4)·F_D(θ)` on a dense grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MajorizationReport {
    pub t: u64,
    pub degree: usize,
    pub grid_points: usize,
    pub pass: bool,
    /// Minimum of `(π²/4)F_D(θ) − χ_{1/T}(θ)` over the grid.
    pub worst_margin: f64,
    pub worst_theta: f64,
}

/// Check the short-interval majorization at `D = ⌊T/2⌋` on a grid of
/// `grid_points` uniform points plus the jump point `θ = 1/T` itself.
pub fn fejer_majorizes_indicator(d: usize, t: u64, grid_points: usize) -> Result<MajorizationReport> {
    if t < 2 {
        return Err(Error::Domain(format!("need T ≥ 2, got {t}")));
    }
    if d != (t / 2) as usize {
        return Err(Error::Domain(format!(
            "degree must be ⌊T/2⌋ = {} for T = {t}, got {d}",
            t / 2
        )));
    }
    let kernel = FejerKernel::new(d)?;
    let delta = 1.0 / t as f64;
    let quarter_pi_sq = PI * PI / 4.0;
    let mut worst_margin = f64::INFINITY;
    let mut worst_theta = 0.0;
    // symmetric kernel and indicator: the half period [0, 1/2] suffices,
    // with the jump point appended
    let mut check = |theta: f64| {
        let margin = quarter_pi_sq * kernel.value(theta) - interval_indicator(delta, theta);
        if margin < worst_margin {
            worst_margin = margin;
            worst_theta = theta;
        }
    };
    for i in 0..=grid_points {
        check(0.5 * i as f64 / grid_points as f64);
    }
    check(delta);
    Ok(MajorizationReport {
        t,
        degree: d,
        grid_points: grid_points + 2,
        pass: worst_margin >= 0.0,
        worst_margin,
        worst_theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SplitMix64;

    #[test]
    fn mean_coefficients_are_pinned_exactly() {
        let pair = selberg_pair(0.25, 3).unwrap();
        assert_eq!(pair.plus_coeff(0), 0.75);
        assert_eq!(pair.minus_coeff(0), 0.25);
        let mut rng = SplitMix64::new(1);
        for _ in 0..25 {
            let delta = rng.next_range(1e-3, 0.5);
            let j = 1 + (rng.next_u64() % 200) as usize;
            let pair = selberg_pair(delta, j).unwrap();
            let gap = pair.plus_coeff(0) - pair.minus_coeff(0);
            assert!((gap - 2.0 / (j as f64 + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn coefficients_match_the_high_precision_oracle() {
        // quarter-interval, degree 3: several coefficients are exact
        // dyadics, the rest frozen from a 30-digit evaluation
        let p = selberg_pair(0.25, 3).unwrap();
        assert!((p.plus_coeff(1) - 0.26707747154594767).abs() < 1e-15);
        assert!((p.minus_coeff(1) - 0.26707747154594767).abs() < 1e-15);
        assert!((p.plus_coeff(2) - (-0.125)).abs() < 1e-15);
        assert!((p.minus_coeff(2) - 0.125).abs() < 1e-15);
        assert!((p.plus_coeff(3) - (-0.017077471545947668)).abs() < 1e-15);
        assert!((p.minus_coeff(3) - (-0.017077471545947668)).abs() < 1e-15);

        let q = selberg_pair(0.07, 25).unwrap();
        assert!((q.plus_coeff(0) - 0.17846153846153846).abs() < 1e-15);
        assert!((q.minus_coeff(0) - 0.10153846153846154).abs() < 1e-15);
        assert!((q.plus_coeff(1) - 0.16835746855535637).abs() < 1e-14);
        assert!((q.minus_coeff(1) - 0.10143239071023659).abs() < 1e-14);
        assert!((q.plus_coeff(3) - 0.10721394465515102).abs() < 1e-14);
        assert!((q.minus_coeff(3) - 0.090291260025589893).abs() < 1e-14);
        assert!((q.plus_coeff(7) - (-0.025718826244312925)).abs() < 1e-14);
        assert!((q.minus_coeff(7) - 0.030383267957276305).abs() < 1e-14);
        // symmetry of the exposed range
        assert_eq!(q.plus_coeff(-7), q.plus_coeff(7));
        assert_eq!(q.minus_coeff(-3), q.minus_coeff(3));
    }

    #[test]
    fn sandwich_holds_on_uniform_and_jump_clustered_grids() {
        let mut rng = SplitMix64::new(42);
        for _ in 0..10 {
            let delta = rng.next_range(5e-3, 0.5);
            let degree = 1 + (rng.next_u64() % 120) as usize;
            let pair = selberg_pair(delta, degree).unwrap();
            for theta in pair.check_grid(3000, 100) {
                let chi = interval_indicator(delta, theta);
                let plus = pair.plus_value(theta);
                let minus = pair.minus_value(theta);
                assert!(
                    minus <= chi + 1e-12,
                    "minorant exceeds indicator: δ={delta} J={degree} θ={theta}"
                );
                assert!(
                    chi <= plus + 1e-12,
                    "majorant dips under indicator: δ={delta} J={degree} θ={theta}"
                );
            }
        }
    }

    #[test]
    fn coefficient_envelope_bounds_hold() {
        let mut rng = SplitMix64::new(9);
        for _ in 0..20 {
            let delta = rng.next_range(1e-3, 0.5);
            let degree = 1 + (rng.next_u64() % 200) as usize;
            let pair = selberg_pair(delta, degree).unwrap();
            for j in 0..=degree as i64 {
                let b = pair.bound(j);
                assert!(pair.plus_coeff(j).abs() <= b + 1e-15, "j={j}");
                assert!(pair.minus_coeff(j).abs() <= b + 1e-15, "j={j}");
            }
        }
    }

    #[test]
    fn mean_value_equals_the_zeroth_coefficient() {
        // a uniform rectangle rule with more points than the degree
        // integrates trigonometric polynomials exactly
        for (delta, degree) in [(0.3, 8), (0.07, 25), (0.49, 5)] {
            let pair = selberg_pair(delta, degree).unwrap();
            let n = 4 * (degree + 1);
            let mut mean_plus = 0.0;
            let mut mean_minus = 0.0;
            for i in 0..n {
                let theta = i as f64 / n as f64;
                mean_plus += pair.plus_value(theta);
                mean_minus += pair.minus_value(theta);
            }
            mean_plus /= n as f64;
            mean_minus /= n as f64;
            assert!((mean_plus - pair.plus_coeff(0)).abs() < 1e-10);
            assert!((mean_minus - pair.minus_coeff(0)).abs() < 1e-10);
        }
    }

    #[test]
    fn evaluator_is_even_periodic_and_matches_the_generic_form() {
        let pair = selberg_pair(0.11, 17).unwrap();
        let coeffs = pair.full_coeffs_plus();
        let mut rng = SplitMix64::new(3);
        for _ in 0..50 {
            let theta = rng.next_range(-2.0, 2.0);
            let v = pair.plus_value(theta);
            assert!((v - pair.plus_value(-theta)).abs() < 1e-11);
            assert!((v - pair.plus_value(theta + 1.0)).abs() < 1e-9);
            let generic = eval_trig_poly(&coeffs, theta).unwrap();
            assert!((v - generic).abs() < 1e-10);
        }
    }

    #[test]
    fn generic_evaluator_basics() {
        let zero = vec![Complex64::new(0.0, 0.0); 7];
        assert_eq!(eval_trig_poly(&zero, 0.37).unwrap(), 0.0);
        let mut single = vec![Complex64::new(0.0, 0.0); 5];
        single[2] = Complex64::new(1.75, 0.0); // j = 0
        assert_eq!(eval_trig_poly(&single, 0.9).unwrap(), 1.75);
        // Fejér coefficients sum to 1 at θ = 0
        let f = FejerKernel::new(6).unwrap();
        let v = eval_trig_poly(&f.coeffs(), 0.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        // a non-symmetric coefficient set is rejected as non-real
        let mut bad = vec![Complex64::new(0.0, 0.0); 3];
        bad[2] = Complex64::new(1.0, 0.0); // j = 1 only
        assert!(eval_trig_poly(&bad, 0.2).is_err());
        // even-length slice has no center index
        assert!(eval_trig_poly(&zero[..4], 0.0).is_err());
    }

    #[test]
    fn fejer_values_and_forms_agree() {
        let f = FejerKernel::new(2).unwrap();
        assert!((f.value(0.0) - 1.0).abs() < 1e-15);
        assert!((f.value(0.25) - 0.5).abs() < 1e-14);
        assert!((f.value(3.0) - 1.0).abs() < 1e-15);
        let mut rng = SplitMix64::new(12);
        for d in [1, 2, 5, 50] {
            let f = FejerKernel::new(d).unwrap();
            let coeffs = f.coeffs();
            for _ in 0..40 {
                let theta = rng.next_range(-1.5, 1.5);
                let a = f.value(theta);
                let b = f.value_sum_form(theta);
                let c = eval_trig_poly(&coeffs, theta).unwrap();
                assert!(a >= 0.0);
                assert!((a - b).abs() < 1e-12, "D={d} θ={theta}");
                assert!((b - c).abs() < 1e-12, "D={d} θ={theta}");
            }
            // near-integer arguments stay on the removable-singularity branch
            let near = 1.0 - 1e-12;
            assert!((f.value(near) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fejer_stays_large_on_the_short_interval() {
        let floor = 4.0 / (PI * PI);
        for t in [2u64, 10, 100] {
            let f = FejerKernel::new((t / 2) as usize).unwrap();
            for i in 1..=200 {
                let theta = i as f64 / 200.0 / t as f64; // (0, 1/T]
                assert!(
                    f.value(theta) >= floor - 1e-12,
                    "T={t} θ={theta}: {}",
                    f.value(theta)
                );
            }
        }
    }

    #[test]
    fn majorization_reports_pass_with_nonnegative_margin() {
        for t in [2u64, 10, 100] {
            let report = fejer_majorizes_indicator((t / 2) as usize, t, 4000).unwrap();
            assert!(report.pass, "T={t}: worst {}", report.worst_margin);
            assert!(report.worst_margin >= 0.0);
        }
        // mismatched degree is a usage error
        assert!(fejer_majorizes_indicator(3, 10, 100).is_err());
        assert!(fejer_majorizes_indicator(0, 1, 100).is_err());
    }

    #[test]
    fn selberg_rejects_bad_parameters() {
        assert!(selberg_pair(0.0, 5).is_err());
        assert!(selberg_pair(0.51, 5).is_err());
        assert!(selberg_pair(-0.1, 5).is_err());
        assert!(selberg_pair(0.25, 0).is_err());
    }
}
