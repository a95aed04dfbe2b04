//! Oscillatory integrals `∫ w(x) e(q·Σ jᵣ fᵣ(x) − q·k·x) dx`.
//!
//! The three operations mirror the three regimes of such an integral:
//!
//! * [`quad_integral`] — direct tensor Gauss–Legendre quadrature, with the
//!   node count tied to the sampled oscillation rate (at least 20 nodes per
//!   oscillation per axis) so the result carries quadrature error well below
//!   the asymptotic effects under study.
//! * [`stationary_phase_leading`] — when the normalized phase
//!   `φ = F_j − (k/j₁)·x`, `F_j = f₁ + (j₂/j₁)f₂ + …`, has a stationary
//!   point `x₀` inside the weight's support, the integral is
//!   `w(x₀)·Δ^{−1/2}·λ^{−n/2}·e(λφ(x₀) + σ/8)·(1 + O(λ^{−1}))` with
//!   `λ = q·j₁`, `Δ = |det H_φ(x₀)|`, and `σ` the Hessian signature. The
//!   phase value at the stationary point is obtained through the Legendre
//!   dual: `φ(x₀) = −F*_j(k/j₁)`.
//! * [`nonstationary_decay`] — when `∇φ` stays away from zero on the
//!   support, `|I|` decays faster than any tested power of `λ`; the report
//!   fits the empirical exponent.
//!
//! Here `e(t) = exp(2πit)`, so "one oscillation" means a unit change of the
//! phase measured in cycles.

use crate::curvature::CurvatureReport;
use crate::expr::Expr;
use crate::funcspace::{Smooth, SmoothMap, WeightFunction};
use crate::legendre::LegendreChart;
use crate::numerics::{gauss_legendre, linear_fit, Kahan, SplitMix64};
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Largest `λ = q·j₁` accepted by the quadrature before the node budget
/// becomes unreasonable for interactive use.
pub const LAMBDA_BUDGET: u64 = 10_000;

/// Hard ceiling on total quadrature nodes per integral.
const QUAD_EVAL_BUDGET: u128 = 40_000_000;

/// Nodes per Gauss–Legendre panel.
const PANEL_NODES: usize = 16;

/// Minimum quadrature nodes per axis (low dimensions afford more). The
/// bump weight is flat at its support edge but has large derivatives just
/// inside it, so even the unoscillatory base case needs fine panels.
fn base_axis_nodes(n: usize) -> usize {
    match n {
        0..=2 => 256,
        3 => 64,
        _ => 16,
    }
}

/// `e(t) = exp(2πit)` with `t` in cycles.
fn cis_cycles(t: f64) -> Complex64 {
    let (s, c) = (TAU * t).sin_cos();
    Complex64::new(c, s)
}

/// One oscillatory integral: weight, phase components `f₁..f_R`, integer
/// frequency vector `j`, integer dual vector `k`, and modulus `q`.
///
/// Validation enforces the normalized cone `j₁ ≥ 1, 0 ≤ jᵣ ≤ j₁` (or the
/// fully degenerate `j = 0`); [`OscillatoryIntegralSpec::conjugated`]
/// produces the sign-flipped companion outside that cone for conjugation
/// checks.
#[derive(Debug, Clone)]
pub struct OscillatoryIntegralSpec {
    weight: WeightFunction,
    maps: Vec<SmoothMap>,
    j: Vec<i64>,
    k: Vec<i64>,
    q: u64,
}

impl OscillatoryIntegralSpec {
    pub fn new(
        weight: WeightFunction,
        maps: Vec<SmoothMap>,
        j: Vec<i64>,
        k: Vec<i64>,
        q: u64,
    ) -> Result<OscillatoryIntegralSpec> {
        if maps.is_empty() {
            return Err(Error::Domain("at least one phase component is required".into()));
        }
        let n = weight.center().len();
        for m in &maps {
            if m.arity() != n {
                return Err(Error::Arity { expected: n, found: m.arity() });
            }
        }
        if j.len() != maps.len() {
            return Err(Error::Arity { expected: maps.len(), found: j.len() });
        }
        if k.len() != n {
            return Err(Error::Arity { expected: n, found: k.len() });
        }
        if q == 0 {
            return Err(Error::Domain("modulus q must be positive".into()));
        }
        let j1 = j[0];
        if j1 < 0 {
            return Err(Error::Domain(format!("leading frequency must be nonnegative, got {j1}")));
        }
        for (r, &jr) in j.iter().enumerate().skip(1) {
            if jr < 0 || jr > j1 {
                return Err(Error::Domain(format!(
                    "frequency j_{} = {jr} outside the normalized cone [0, {j1}]",
                    r + 1
                )));
            }
        }
        Ok(OscillatoryIntegralSpec { weight, maps, j, k, q })
    }

    pub fn weight(&self) -> &WeightFunction {
        &self.weight
    }

    pub fn maps(&self) -> &[SmoothMap] {
        &self.maps
    }

    pub fn frequencies(&self) -> &[i64] {
        &self.j
    }

    pub fn dual_vector(&self) -> &[i64] {
        &self.k
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn arity(&self) -> usize {
        self.weight.center().len()
    }

    /// `λ = q·j₁` (signed; negative only for conjugated companions).
    pub fn lambda(&self) -> f64 {
        self.q as f64 * self.j[0] as f64
    }

    /// Same integral with a different modulus (used to walk `λ` ladders).
    pub fn with_modulus(&self, q: u64) -> Result<OscillatoryIntegralSpec> {
        if q == 0 {
            return Err(Error::Domain("modulus q must be positive".into()));
        }
        let mut s = self.clone();
        s.q = q;
        Ok(s)
    }

    /// Sign-flipped companion `(−j, −k)`, which integrates the complex
    /// conjugate of this spec's integrand. Skips cone validation.
    pub fn conjugated(&self) -> OscillatoryIntegralSpec {
        OscillatoryIntegralSpec {
            weight: self.weight.clone(),
            maps: self.maps.clone(),
            j: self.j.iter().map(|v| -v).collect(),
            k: self.k.iter().map(|v| -v).collect(),
            q: self.q,
        }
    }

    /// Phase in cycles: `q·Σ jᵣ fᵣ(x) − q·k·x`.
    pub fn phase_cycles(&self, x: &[f64]) -> f64 {
        let mut stack = Vec::new();
        let mut t = 0.0;
        for (m, &jr) in self.maps.iter().zip(&self.j) {
            if jr != 0 {
                t += jr as f64 * m.program().eval(x, &mut stack);
            }
        }
        for (&ki, xi) in self.k.iter().zip(x) {
            t -= ki as f64 * xi;
        }
        self.q as f64 * t
    }

    /// Gradient of [`Self::phase_cycles`].
    pub fn phase_cycles_gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.arity();
        let mut g = vec![0.0; n];
        for (m, &jr) in self.maps.iter().zip(&self.j) {
            if jr != 0 {
                let gm = m.gradient(x);
                for i in 0..n {
                    g[i] += jr as f64 * gm[i];
                }
            }
        }
        for i in 0..n {
            g[i] -= self.k[i] as f64;
        }
        for v in &mut g {
            *v *= self.q as f64;
        }
        g
    }

    /// Normalized phase `φ(x) = F_j(x) − (k/j₁)·x = phase_cycles(x)/λ`.
    pub fn normalized_phase_value(&self, x: &[f64]) -> Result<f64> {
        let lambda = self.lambda();
        if lambda == 0.0 {
            return Err(Error::Domain("normalized phase needs j₁ ≥ 1".into()));
        }
        Ok(self.phase_cycles(x) / lambda)
    }

    /// Gradient of the normalized phase (independent of `q`).
    pub fn normalized_phase_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let lambda = self.lambda();
        if lambda == 0.0 {
            return Err(Error::Domain("normalized phase needs j₁ ≥ 1".into()));
        }
        Ok(self.phase_cycles_gradient(x).iter().map(|v| v / lambda).collect())
    }

    /// The combined map `F_j = f₁ + (j₂/j₁)f₂ + … + (j_R/j₁)f_R`
    /// whose gradient equation `∇F_j(x) = k/j₁` locates stationary points.
    pub fn combined_map(&self) -> Result<SmoothMap> {
        let j1 = self.j[0];
        if j1 < 1 {
            return Err(Error::Domain("combined map needs j₁ ≥ 1".into()));
        }
        let mut e = self.maps[0].expr().clone();
        for (m, &jr) in self.maps.iter().zip(&self.j).skip(1) {
            if jr != 0 {
                e = Expr::add(e, Expr::mul(Expr::ratio(jr, j1), m.expr().clone()));
            }
        }
        SmoothMap::new(e, self.arity())
    }

    /// `k/j₁` as a float vector (the gradient-inversion target).
    pub fn normalized_dual_target(&self) -> Result<Vec<f64>> {
        let j1 = self.j[0];
        if j1 < 1 {
            return Err(Error::Domain("normalized target needs j₁ ≥ 1".into()));
        }
        Ok(self.k.iter().map(|&ki| ki as f64 / j1 as f64).collect())
    }
}

/// Per-axis quadrature grid: node positions and weights over the support.
fn axis_rules(spec: &OscillatoryIntegralSpec, density_mult: f64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let n = spec.arity();
    let (lo, hi) = spec.weight.support();

    // sample the phase gradient for per-axis oscillation rates
    let mut slope = vec![0.0f64; n];
    let record = |g: &[f64], slope: &mut Vec<f64>| {
        for i in 0..n {
            slope[i] = slope[i].max(g[i].abs());
        }
    };
    let center = spec.weight.center().to_vec();
    record(&spec.phase_cycles_gradient(&center), &mut slope);
    let mut rng = SplitMix64::new(0x05C1);
    for _ in 0..64 {
        let x: Vec<f64> = (0..n).map(|i| rng.next_range(lo[i], hi[i])).collect();
        record(&spec.phase_cycles_gradient(&x), &mut slope);
    }

    let base = base_axis_nodes(n);
    let mut rules = Vec::with_capacity(n);
    let (gl_nodes, gl_weights) = gauss_legendre(PANEL_NODES);
    let mut total: u128 = 1;
    for i in 0..n {
        let width = hi[i] - lo[i];
        // sampled max may undershoot the true oscillation rate: pad by 30%
        let cycles = 1.3 * slope[i] * width;
        let want = ((20.0 * cycles * density_mult).ceil() as usize).max((base as f64 * density_mult) as usize);
        let panels = want.div_ceil(PANEL_NODES).max(1);
        total = total.saturating_mul((panels * PANEL_NODES) as u128);
        if total > QUAD_EVAL_BUDGET {
            return Err(Error::BudgetExceeded {
                needed: u64::try_from(total.min(u64::MAX as u128)).unwrap_or(u64::MAX),
                budget: QUAD_EVAL_BUDGET as u64,
            });
        }
        let h = width / panels as f64;
        let mut xs = Vec::with_capacity(panels * PANEL_NODES);
        let mut ws = Vec::with_capacity(panels * PANEL_NODES);
        for p in 0..panels {
            let a = lo[i] + p as f64 * h;
            let mid = a + 0.5 * h;
            for (u, w) in gl_nodes.iter().zip(&gl_weights) {
                xs.push(mid + 0.5 * h * u);
                ws.push(0.5 * h * w);
            }
        }
        rules.push((xs, ws));
    }
    Ok(rules)
}

fn quad_impl(spec: &OscillatoryIntegralSpec, density_mult: f64) -> Result<Complex64> {
    let lambda = spec.lambda().abs();
    if lambda > LAMBDA_BUDGET as f64 {
        return Err(Error::BudgetExceeded { needed: lambda as u64, budget: LAMBDA_BUDGET });
    }
    let n = spec.arity();
    let rules = axis_rules(spec, density_mult)?;

    let mut re = Kahan::new();
    let mut im = Kahan::new();
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0f64; n];
    let mut stack: Vec<f64> = Vec::new();
    let q = spec.q as f64;
    loop {
        for i in 0..n {
            x[i] = rules[i].0[idx[i]];
        }
        let w = spec.weight.value(&x);
        if w != 0.0 {
            let mut wt = w;
            for i in 0..n {
                wt *= rules[i].1[idx[i]];
            }
            // phase in cycles, inlined with a reused evaluation stack
            let mut t = 0.0;
            for (m, &jr) in spec.maps.iter().zip(&spec.j) {
                if jr != 0 {
                    t += jr as f64 * m.program().eval(&x, &mut stack);
                }
            }
            for (&ki, xi) in spec.k.iter().zip(x.iter()) {
                t -= ki as f64 * xi;
            }
            let z = cis_cycles(q * t);
            re.add(wt * z.re);
            im.add(wt * z.im);
        }
        // odometer over the tensor grid
        let mut d = 0;
        loop {
            if d == n {
                return Ok(Complex64::new(re.value(), im.value()));
            }
            idx[d] += 1;
            if idx[d] < rules[d].0.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Tensor Gauss–Legendre quadrature of the integral.
pub fn quad_integral(spec: &OscillatoryIntegralSpec) -> Result<Complex64> {
    quad_impl(spec, 1.0)
}

/// Same quadrature at a node-density multiple — a doubled-density run is
/// the standard self-check oracle.
pub fn quad_integral_refined(spec: &OscillatoryIntegralSpec, density_mult: f64) -> Result<Complex64> {
    if !(density_mult >= 1.0) {
        return Err(Error::Domain("density multiplier must be ≥ 1".into()));
    }
    quad_impl(spec, density_mult)
}

/// Outcome of the leading-order stationary-phase evaluation.
#[derive(Debug, Clone)]
pub struct StationaryPhaseResult {
    pub quadrature: Complex64,
    /// `w(x₀)·Δ^{−1/2}·λ^{−n/2}·e(λφ(x₀) + σ/8)`; zero when no
    /// stationary point lies in the support.
    pub leading: Complex64,
    pub stationary_point: Option<Vec<f64>>,
    /// Hessian signature `σ` at the stationary point.
    pub signature: Option<i32>,
    /// `Δ = |det H_φ(x₀)|`.
    pub hessian_det: Option<f64>,
    /// `φ(x₀)`, computed through the Legendre dual as `−F*_j(k/j₁)`.
    pub phase_value: Option<f64>,
    pub lambda: f64,
    /// `|quadrature − leading| / |leading|` when the leading term is nonzero.
    pub relative_error: Option<f64>,
}

/// Locate the stationary point of the normalized phase by gradient
/// inversion, evaluate the leading term, and compare against quadrature.
///
/// `report` must certify the nonvanishing Hessian determinant (condition
/// holds); the stationary Hessian determinant is cross-checked against the
/// certified lower bound `c1`, which applies because the normalized
/// frequency vector `(1, j₂/j₁, …)` lies on the unit cube boundary.
pub fn stationary_phase_leading(
    spec: &OscillatoryIntegralSpec,
    report: &CurvatureReport,
) -> Result<StationaryPhaseResult> {
    if spec.frequencies()[0] < 1 {
        return Err(Error::Domain("stationary-phase analysis needs j₁ ≥ 1".into()));
    }
    if !report.condition1_holds {
        return Err(Error::CurvatureRefused {
            c1: report.c1,
            tolerance: crate::curvature::DET_TOLERANCE_REL * report.c2,
        });
    }
    let n = spec.arity();
    let lambda = spec.lambda();
    let quadrature = quad_integral(spec)?;

    let f_combined = spec.combined_map()?;
    let target = spec.normalized_dual_target()?;
    let chart = LegendreChart::new(
        f_combined.clone(),
        spec.weight.center().to_vec(),
        spec.weight.radius(),
    )?;

    let x0 = match chart.invert_gradient(&target) {
        Ok(x0) => x0,
        Err(Error::Domain(_)) => {
            // no stationary point inside the support box
            return Ok(StationaryPhaseResult {
                quadrature,
                leading: Complex64::new(0.0, 0.0),
                stationary_point: None,
                signature: None,
                hessian_det: None,
                phase_value: None,
                lambda,
                relative_error: None,
            });
        }
        Err(e) => return Err(e),
    };

    let h = f_combined.hessian(&x0);
    let eigs = h.sym_eigenvalues();
    let norm = eigs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let tie_tol = 1e-10 * norm;
    let mut signature = 0i32;
    for e in &eigs {
        if e.abs() <= tie_tol {
            return Err(Error::Domain(
                "near-zero Hessian eigenvalue at the stationary point contradicts the curvature certificate"
                    .into(),
            ));
        }
        signature += if *e > 0.0 { 1 } else { -1 };
    }
    let det: f64 = eigs.iter().product();
    let delta = det.abs();
    if delta < report.c1 * (1.0 - 1e-6) {
        return Err(Error::Domain(format!(
            "stationary Hessian determinant {delta:.6e} fell below the certified bound {:.6e}",
            report.c1
        )));
    }

    let phase0 = -chart.dual_value(&target)?;
    let w0 = spec.weight.value(&x0);
    let amplitude = w0 * delta.powf(-0.5) * lambda.powf(-(n as f64) / 2.0);
    let leading = amplitude * cis_cycles(lambda * phase0 + signature as f64 / 8.0);
    let relative_error = if leading.norm() > 0.0 {
        Some((quadrature - leading).norm() / leading.norm())
    } else {
        None
    };

    Ok(StationaryPhaseResult {
        quadrature,
        leading,
        stationary_point: Some(x0),
        signature: Some(signature),
        hessian_det: Some(delta),
        phase_value: Some(phase0),
        lambda,
        relative_error,
    })
}

/// Empirical decay of `|I|` along a ladder of `λ` values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub ell: u32,
    pub lambdas: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Least-squares slope of `log|I|` against `log λ` over the points
    /// above the quadrature noise floor; `−∞` when everything decayed
    /// below the floor already.
    pub fitted_exponent: f64,
    /// `max |I(λ)|·λ^{ℓ−1}` — the constant the decay bound would need.
    pub implied_constant: f64,
    /// Sampled minimum of `|∇φ|` over the support.
    pub gradient_lower_bound: f64,
    /// False when the sampled gradient minimum is (numerically) zero —
    /// a stationary point sits in the support and power decay saturates
    /// at the stationary-phase rate instead.
    pub non_stationary: bool,
    pub weight_integral: f64,
}

/// Quadrature magnitudes below `NOISE_FLOOR_REL · ∫w` are treated as
/// numerically zero when fitting the decay exponent.
pub const NOISE_FLOOR_REL: f64 = 1e-13;

/// Evaluate the integral across `lambdas` (each must be a multiple of
/// `j₁`; the modulus is adjusted so `q·j₁ = λ`) and fit the decay rate.
pub fn nonstationary_decay(
    spec: &OscillatoryIntegralSpec,
    ell: u32,
    lambdas: &[u64],
) -> Result<DecayReport> {
    if ell < 2 {
        return Err(Error::Domain("decay order ℓ must be at least 2".into()));
    }
    let j1 = spec.frequencies()[0];
    if j1 < 1 {
        return Err(Error::Domain("decay analysis needs j₁ ≥ 1".into()));
    }
    if lambdas.len() < 2 {
        return Err(Error::Domain("at least two λ values are needed to fit a slope".into()));
    }

    // lower bound for |∇φ| over the support box: random sampling followed
    // by local minimization from the best sample, so an interior stationary
    // point is actually found rather than merely approached
    let (lo, hi) = spec.weight.support();
    let n = spec.arity();
    let mut rng = SplitMix64::new(0xDECA);
    let grad_sq = |x: &[f64]| -> f64 {
        match spec.normalized_phase_gradient(x) {
            Ok(g) => g.iter().map(|v| v * v).sum(),
            Err(_) => f64::INFINITY,
        }
    };
    let mut best_x = spec.weight.center().to_vec();
    let mut best = grad_sq(&best_x);
    for _ in 0..400 {
        let x: Vec<f64> = (0..n).map(|i| rng.next_range(lo[i], hi[i])).collect();
        let v = grad_sq(&x);
        if v < best {
            best = v;
            best_x = x;
        }
    }
    let scale = (0..n).map(|i| hi[i] - lo[i]).fold(0.0f64, f64::max) * 0.1;
    let (_, refined) = crate::numerics::nelder_mead_box(
        |x| grad_sq(x),
        &best_x,
        scale,
        &lo,
        &hi,
        1e-18,
        2000,
    );
    let gradient_lower_bound = refined.min(best).max(0.0).sqrt();
    let non_stationary = gradient_lower_bound >= 1e-6;

    let weight_integral = spec.weight.integral();
    let floor = (NOISE_FLOOR_REL * weight_integral).max(1e-300);

    let mut mags = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if lambda == 0 || lambda % j1 as u64 != 0 {
            return Err(Error::Domain(format!(
                "λ = {lambda} is not a positive multiple of j₁ = {j1}"
            )));
        }
        let sub = spec.with_modulus(lambda / j1 as u64)?;
        mags.push(quad_integral(&sub)?.norm());
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut implied_constant = 0.0f64;
    for (&lambda, &mag) in lambdas.iter().zip(&mags) {
        if mag > floor {
            xs.push((lambda as f64).ln());
            ys.push(mag.ln());
            implied_constant = implied_constant.max(mag * (lambda as f64).powi(ell as i32 - 1));
        }
    }
    let fitted_exponent = if xs.len() >= 2 {
        linear_fit(&xs, &ys).0
    } else {
        f64::NEG_INFINITY
    };

    Ok(DecayReport {
        ell,
        lambdas: lambdas.iter().map(|&l| l as f64).collect(),
        magnitudes: mags,
        fitted_exponent,
        implied_constant,
        gradient_lower_bound,
        non_stationary,
        weight_integral,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature;
    use crate::funcspace::{rational, rational_int, ManifoldChart};

    fn bump(n: usize, radius: f64) -> WeightFunction {
        WeightFunction::bump(vec![0.0; n], radius).unwrap()
    }

    fn spec_1d(phase: &str, j1: i64, k: i64, q: u64, radius: f64) -> OscillatoryIntegralSpec {
        let map = SmoothMap::parse(phase, 1).unwrap();
        OscillatoryIntegralSpec::new(bump(1, radius), vec![map], vec![j1], vec![k], q).unwrap()
    }

    #[test]
    fn zero_frequency_integrates_the_weight() {
        let map = SmoothMap::parse("(x1^2 + x2^2)/2", 2).unwrap();
        let spec =
            OscillatoryIntegralSpec::new(bump(2, 0.3), vec![map], vec![0], vec![0, 0], 1).unwrap();
        let val = quad_integral(&spec).unwrap();
        let expect = spec.weight().integral();
        assert!(expect > 0.0);
        // two different Gauss–Legendre refinements of a flat-endpoint
        // integrand: agreement to ~1e−7 relative is what they deliver
        assert!((val.re - expect).abs() < 1e-6 * expect, "{} vs {expect}", val.re);
        assert!(val.im.abs() < 1e-14);
        // internal consistency of the quadrature itself is much tighter
        let refined = quad_integral_refined(&spec, 2.0).unwrap();
        assert!((val - refined).norm() < 1e-10 * expect);
    }

    #[test]
    fn doubling_node_density_leaves_the_value_fixed() {
        let spec = spec_1d("x1^2/2", 1, 0, 400, 0.2);
        let a = quad_integral(&spec).unwrap();
        let b = quad_integral_refined(&spec, 2.0).unwrap();
        assert!((a - b).norm() < 1e-10, "quadrature drift {}", (a - b).norm());
    }

    #[test]
    fn fresnel_model_matches_the_leading_term() {
        // n = 1 quadratic phase: leading term w(0)·λ^{−1/2}·e(1/8)
        let spec = spec_1d("x1^2/2", 1, 0, 400, 0.2);
        let probe = ManifoldChart::new(
            vec![SmoothMap::parse("x1^2/2", 1).unwrap()],
            vec![rational_int(0)],
            rational(1, 5),
            None,
        )
        .unwrap();
        let report = curvature::verify_condition1(&probe, 16, 0.2).unwrap();
        let res = stationary_phase_leading(&spec, &report).unwrap();
        let x0 = res.stationary_point.as_ref().unwrap();
        assert!(x0[0].abs() < 1e-9);
        assert_eq!(res.signature, Some(1));
        assert!((res.hessian_det.unwrap() - 1.0).abs() < 1e-9);
        assert!((res.phase_value.unwrap() - 0.0).abs() < 1e-12);
        let expect = spec.weight().value(&[0.0]) * 400f64.powf(-0.5);
        assert!((res.leading.norm() - expect).abs() < 1e-12);
        // one-term stationary phase is accurate to O(λ⁻¹) relative error
        assert!(res.relative_error.unwrap() < 10.0 / 400.0);
    }

    #[test]
    fn far_dual_vector_kills_the_integral() {
        // ∇(x²/2) over [−0.2, 0.2] misses k/j₁ = 1 by a wide margin
        let spec = spec_1d("x1^2/2", 1, 1, 1000, 0.2);
        let val = quad_integral(&spec).unwrap();
        let mass = spec.weight().integral();
        assert!(val.norm() <= 1e-6 * mass, "stray mass {}", val.norm() / mass);
        // and the decay is rapid: double λ crushes it further
        let half = spec.with_modulus(500).unwrap();
        let val_half = quad_integral(&half).unwrap();
        assert!(val.norm() < val_half.norm() * 0.5);
    }

    #[test]
    fn conjugated_spec_integrates_the_conjugate() {
        let maps = vec![
            SmoothMap::parse("(x1^2 + x2^2)/2", 2).unwrap(),
            SmoothMap::parse("x1*x2", 2).unwrap(),
        ];
        let spec =
            OscillatoryIntegralSpec::new(bump(2, 0.3), maps, vec![3, 1], vec![1, 0], 7).unwrap();
        let a = quad_integral(&spec).unwrap();
        let b = quad_integral(&spec.conjugated()).unwrap();
        assert!((a.conj() - b).norm() < 1e-12);
        // triangle inequality against the weight mass
        assert!(a.norm() <= spec.weight().integral() + 1e-12);
    }

    #[test]
    fn elliptic_model_halves_the_error_per_doubling() {
        let map = SmoothMap::parse("(x1^2 + x2^2)/2", 2).unwrap();
        let probe = ManifoldChart::new(
            vec![map.clone()],
            vec![rational_int(0), rational_int(0)],
            rational(1, 5),
            None,
        )
        .unwrap();
        let report = curvature::verify_condition1(&probe, 16, 0.2).unwrap();
        let mut errs = Vec::new();
        for q in [100u64, 200, 400] {
            let spec = OscillatoryIntegralSpec::new(
                bump(2, 0.2),
                vec![map.clone()],
                vec![1],
                vec![0, 0],
                q,
            )
            .unwrap();
            let res = stationary_phase_leading(&spec, &report).unwrap();
            assert_eq!(res.signature, Some(2));
            errs.push(res.relative_error.unwrap());
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(
                ratio > 1.4 && ratio < 2.8,
                "error ratio per doubling {ratio} from {errs:?}"
            );
        }
    }

    #[test]
    fn saddle_signature_is_zero() {
        let map = SmoothMap::parse("(x1^2 - x2^2)/2", 2).unwrap();
        let probe = ManifoldChart::new(
            vec![map.clone()],
            vec![rational_int(0), rational_int(0)],
            rational(1, 5),
            None,
        )
        .unwrap();
        let report = curvature::verify_condition1(&probe, 16, 0.2).unwrap();
        let spec =
            OscillatoryIntegralSpec::new(bump(2, 0.2), vec![map], vec![1], vec![0, 0], 200)
                .unwrap();
        let res = stationary_phase_leading(&spec, &report).unwrap();
        assert_eq!(res.signature, Some(0));
        assert!((res.hessian_det.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn direct_phase_agrees_with_the_legendre_dual() {
        // this pair passes the curvature certificate: the pencil
        // determinant is −(t₁² + t₂²), bounded below by 1 on the cube edge
        let maps = vec![
            SmoothMap::parse("x1*x2", 2).unwrap(),
            SmoothMap::parse("(x1^2 - x2^2)/2", 2).unwrap(),
        ];
        let spec = OscillatoryIntegralSpec::new(
            bump(2, 0.3),
            maps,
            vec![4, 1],
            vec![1, 0],
            50,
        )
        .unwrap();
        let probe = ManifoldChart::new(
            spec.maps().to_vec(),
            vec![rational_int(0), rational_int(0)],
            rational(3, 10),
            None,
        )
        .unwrap();
        let report = curvature::verify_condition1(&probe, 16, 0.3).unwrap();
        let res = stationary_phase_leading(&spec, &report).unwrap();
        let x0 = res.stationary_point.as_ref().unwrap();
        let direct = spec.normalized_phase_value(x0).unwrap();
        assert!(
            (direct - res.phase_value.unwrap()).abs() < 1e-8,
            "direct {direct} vs dual {}",
            res.phase_value.unwrap()
        );
    }

    #[test]
    fn missing_stationary_point_reports_none() {
        let spec = spec_1d("x1^2/2", 1, 1, 100, 0.2);
        let probe = ManifoldChart::new(
            vec![SmoothMap::parse("x1^2/2", 1).unwrap()],
            vec![rational_int(0)],
            rational(1, 5),
            None,
        )
        .unwrap();
        let report = curvature::verify_condition1(&probe, 16, 0.2).unwrap();
        let res = stationary_phase_leading(&spec, &report).unwrap();
        assert!(res.stationary_point.is_none());
        assert_eq!(res.leading, Complex64::new(0.0, 0.0));
        assert!(res.relative_error.is_none());
    }

    #[test]
    fn linear_phase_decays_faster_than_every_tested_power() {
        let spec = spec_1d("x1", 1, 0, 1, 0.2);
        let lambdas: Vec<u64> = (4..=9).map(|e| 1u64 << e).collect();
        for ell in 2..=6u32 {
            let report = nonstationary_decay(&spec, ell, &lambdas).unwrap();
            assert!(report.non_stationary, "|∇φ| = 1 everywhere");
            assert!((report.gradient_lower_bound - 1.0).abs() < 1e-9);
            assert!(
                report.fitted_exponent <= -((ell - 1) as f64),
                "ℓ = {ell}: fitted exponent {} too shallow; magnitudes {:?}",
                report.fitted_exponent,
                report.magnitudes
            );
            assert!(report.implied_constant.is_finite());
        }
    }

    #[test]
    fn stationary_control_is_flagged_and_decays_at_the_stationary_rate() {
        let map = SmoothMap::parse("(x1^2 + x2^2)/2", 2).unwrap();
        let spec = OscillatoryIntegralSpec::new(
            bump(2, 0.2),
            vec![map],
            vec![1],
            vec![0, 0],
            1,
        )
        .unwrap();
        let report = nonstationary_decay(&spec, 2, &[64, 128, 256, 512]).unwrap();
        assert!(!report.non_stationary, "gradient vanishes at the center");
        assert!(
            report.fitted_exponent > -1.3 && report.fitted_exponent < -0.7,
            "stationary decay exponent {} should sit near −n/2 = −1",
            report.fitted_exponent
        );
    }

    #[test]
    fn zero_weight_gives_the_zero_integral() {
        let map = SmoothMap::parse("x1^2/2", 1).unwrap();
        let weight = WeightFunction::new(vec![0.0], 0.2, 0.0).unwrap();
        for q in [1u64, 37, 512] {
            let spec =
                OscillatoryIntegralSpec::new(weight.clone(), vec![map.clone()], vec![1], vec![0], q)
                    .unwrap();
            let val = quad_integral(&spec).unwrap();
            assert_eq!(val, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn lambda_budget_is_enforced() {
        let spec = spec_1d("x1^2/2", 1, 0, 20_000, 0.2);
        assert!(matches!(
            quad_integral(&spec),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn cone_validation_rejects_stray_frequencies() {
        let maps = vec![
            SmoothMap::parse("x1^2/2", 1).unwrap(),
            SmoothMap::parse("x1^2", 1).unwrap(),
        ];
        let w = bump(1, 0.2);
        assert!(OscillatoryIntegralSpec::new(w.clone(), maps.clone(), vec![2, 3], vec![0], 1).is_err());
        assert!(OscillatoryIntegralSpec::new(w.clone(), maps.clone(), vec![2, -1], vec![0], 1).is_err());
        assert!(OscillatoryIntegralSpec::new(w.clone(), maps.clone(), vec![-1, 0], vec![0], 1).is_err());
        assert!(OscillatoryIntegralSpec::new(w, maps, vec![2, 1], vec![0], 1).is_ok());
    }
}
