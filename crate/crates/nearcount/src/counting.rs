//! Exact enumeration of rational points near and on a chart.
//!
//! A rational point is a pair `(a, q)` with `q ≤ Q` and base point
//! `a/q ∈ B̄_{ε₀}(x₀)`. It counts as *near* the chart at level `δ` when
//! every component map satisfies `‖q·fᵣ(a/q)‖ ≤ δ` with `‖·‖` distance to
//! the nearest integer — equivalently, the ambient vector
//! `(a, m₁, …, m_R)/q` with `mᵣ` the nearest integer lies within `δ/q` of
//! the chart in the L∞ metric. *On* the chart means `q·fᵣ(a/q) ∈ ℤ`
//! exactly, decided in rational arithmetic.
//!
//! Two enumerators are provided on purpose:
//!
//! * [`count_near_reference`] — a deliberately plain double loop in exact
//!   rational arithmetic, the correctness oracle;
//! * [`count_near`] / [`count_weighted`] — the fast path: compiled `f64`
//!   evaluation with a guard band around the threshold, falling back to
//!   exact rationals whenever a decision is too close to call.
//!
//! Height decisions inside the guard band on non-polynomial maps cannot be
//! resolved exactly; they are decided in `f64` and tallied in
//! `near_threshold_warnings`.

use crate::funcspace::{ManifoldChart, Smooth, WeightFunction};
use crate::numerics::{dist_to_nearest_int, Kahan};
use crate::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Half-width of the indeterminate zone around `‖·‖ = δ` inside which the
/// `f64` height test defers to exact rational arithmetic.
pub const GUARD_BAND: f64 = 1e-12;

/// Prefilter slack for the on-chart test: values farther than this from an
/// integer are rejected without exact confirmation.
pub const ON_CHART_PREFILTER: f64 = 1e-9;

/// A near-counting request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountQuery {
    /// Denominator bound `Q ≥ 1`.
    pub q_max: u64,
    /// Height threshold `δ ∈ [0, 1/2]`.
    pub delta: f64,
}

impl CountQuery {
    pub fn new(q_max: u64, delta: f64) -> Result<CountQuery> {
        if q_max == 0 {
            return Err(Error::Domain("denominator bound Q must be positive".into()));
        }
        if !(0.0..=0.5).contains(&delta) {
            return Err(Error::Domain(format!(
                "threshold δ must lie in [0, 1/2], got {delta}"
            )));
        }
        Ok(CountQuery { q_max, delta })
    }
}

/// Outcome of a counting sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountResult {
    pub q_max: u64,
    pub delta: f64,
    pub weighted: bool,
    /// Number of qualifying points (integer-valued when unweighted), or the
    /// weighted sum over qualifying points.
    pub count: f64,
    /// Base points enumerated across all `q`.
    pub points_scanned: u64,
    /// Weighted base count `N₀ = Σ w(a/q)` over every scanned point
    /// (weighted sweeps only).
    pub n0: Option<f64>,
    /// `(2δ)^R · N₀` (weighted sweeps only).
    pub main_term: Option<f64>,
    /// `count / main_term` when the main term is positive.
    pub ratio: Option<f64>,
    /// Height decisions that fell inside the guard band and could not be
    /// settled exactly (non-polynomial maps only).
    pub near_threshold_warnings: u64,
    pub wall_time_secs: f64,
}

/// Enumeration caps for a sweep.
#[derive(Debug, Clone, Copy)]
pub struct CountOptions {
    /// Upper bound on total base points scanned (the scan size is computed
    /// exactly up front and refused if it exceeds this).
    pub scan_budget: u64,
}

impl Default for CountOptions {
    fn default() -> CountOptions {
        CountOptions { scan_budget: 200_000_000 }
    }
}

/// Exact total number of base points `Σ_{q ≤ Q} #(lattice box at q)`.
pub fn scan_size(chart: &ManifoldChart, q_max: u64) -> u64 {
    let n = chart.base_dim();
    let mut total: u64 = 0;
    for q in 1..=q_max {
        let mut per_q: u64 = 1;
        for i in 0..n {
            let (lo, hi) = chart.lattice_axis_bounds(q, i);
            if hi < lo {
                per_q = 0;
                break;
            }
            per_q = per_q.saturating_mul((hi - lo + 1) as u64);
        }
        total = total.saturating_add(per_q);
    }
    total
}

fn check_budget(chart: &ManifoldChart, q_max: u64, opts: &CountOptions) -> Result<()> {
    let needed = scan_size(chart, q_max);
    if needed > opts.scan_budget {
        return Err(Error::BudgetExceeded { needed, budget: opts.scan_budget });
    }
    Ok(())
}

/// `q·fᵣ(a/q)` for every map, in exact rational arithmetic.
fn heights_exact(chart: &ManifoldChart, q: u64, a: &[i64]) -> Result<Vec<BigRational>> {
    let qr = BigRational::from_integer(BigInt::from(q));
    let x: Vec<BigRational> = a
        .iter()
        .map(|&ai| BigRational::new(BigInt::from(ai), BigInt::from(q)))
        .collect();
    chart
        .maps()
        .iter()
        .map(|m| Ok(&qr * m.value_rational(&x)?))
        .collect()
}

/// Distance from a rational to its nearest integer.
fn rational_dist_to_int(v: &BigRational) -> BigRational {
    let frac = v - v.floor();
    let complement = BigRational::one() - &frac;
    if frac <= complement {
        frac
    } else {
        complement
    }
}

/// Decide `max_r ‖q·fᵣ(a/q)‖ ≤ δ`. `f64` first; exact fallback inside the
/// guard band when the maps allow it, otherwise a warning is tallied.
fn height_condition(
    chart: &ManifoldChart,
    q: u64,
    a: &[i64],
    x: &[f64],
    delta: f64,
    delta_rat: &BigRational,
    exact_available: bool,
    stack: &mut Vec<f64>,
    warnings: &mut u64,
) -> bool {
    let qf = q as f64;
    let mut needs_exact = false;
    for m in chart.maps() {
        let v = qf * m.program().eval(x, stack);
        let dist = dist_to_nearest_int(v);
        if dist > delta + GUARD_BAND {
            return false; // clear rejection regardless of the other maps
        }
        if (dist - delta).abs() <= GUARD_BAND {
            needs_exact = true;
        }
    }
    if !needs_exact {
        return true; // every map is clearly within the threshold
    }
    if !exact_available {
        *warnings += 1;
        // best-effort f64 decision on the ambiguous map(s)
        return chart.maps().iter().all(|m| {
            dist_to_nearest_int(qf * m.program().eval(x, stack)) <= delta
        });
    }
    match heights_exact(chart, q, a) {
        Ok(vals) => vals.iter().all(|v| rational_dist_to_int(v) <= *delta_rat),
        Err(_) => {
            *warnings += 1;
            false
        }
    }
}

/// Per-`q` partial tallies, reduced in `q` order for determinism.
#[derive(Default, Clone)]
struct Partial {
    count: f64,
    n0: f64,
    scanned: u64,
    warnings: u64,
}

/// Iterate all base points for one `q`, applying `body(a, x)`.
fn for_each_base_point<F: FnMut(&[i64], &[f64])>(
    chart: &ManifoldChart,
    q: u64,
    mut body: F,
) -> u64 {
    let n = chart.base_dim();
    let bounds: Vec<(i64, i64)> = (0..n).map(|i| chart.lattice_axis_bounds(q, i)).collect();
    if bounds.iter().any(|(lo, hi)| hi < lo) {
        return 0;
    }
    let mut a: Vec<i64> = bounds.iter().map(|&(lo, _)| lo).collect();
    let mut x = vec![0.0f64; n];
    let qf = q as f64;
    let mut scanned: u64 = 0;
    loop {
        for i in 0..n {
            x[i] = a[i] as f64 / qf;
        }
        body(&a, &x);
        scanned += 1;
        let mut d = 0;
        loop {
            if d == n {
                return scanned;
            }
            a[d] += 1;
            if a[d] <= bounds[d].1 {
                break;
            }
            a[d] = bounds[d].0;
            d += 1;
        }
    }
}

fn sweep(
    chart: &ManifoldChart,
    query: &CountQuery,
    weight: Option<&WeightFunction>,
    opts: &CountOptions,
) -> Result<CountResult> {
    let started = Instant::now();
    check_budget(chart, query.q_max, opts)?;
    let delta = query.delta;
    let delta_rat = BigRational::from_float(delta)
        .ok_or_else(|| Error::Domain("threshold δ must be finite".into()))?;
    let exact_available = chart.is_polynomial();

    // parallel over q; partials land in a q-indexed vector and are folded
    // sequentially, so the result never depends on scheduling
    let partials: Vec<Partial> = (1..=query.q_max)
        .into_par_iter()
        .map(|q| {
            let mut p = Partial::default();
            let mut stack: Vec<f64> = Vec::new();
            let mut warnings = 0u64;
            p.scanned = for_each_base_point(chart, q, |a, x| {
                let wval = match weight {
                    Some(w) => w.value(x),
                    None => 1.0,
                };
                if let Some(_w) = weight {
                    p.n0 += wval; // per-q partial; compensated at the fold
                }
                if wval == 0.0 {
                    return;
                }
                if height_condition(
                    chart,
                    q,
                    a,
                    x,
                    delta,
                    &delta_rat,
                    exact_available,
                    &mut stack,
                    &mut warnings,
                ) {
                    p.count += wval;
                }
            });
            p.warnings = warnings;
            p
        })
        .collect();

    let mut count = Kahan::new();
    let mut n0 = Kahan::new();
    let mut scanned: u64 = 0;
    let mut warnings: u64 = 0;
    for p in &partials {
        count.add(p.count);
        n0.add(p.n0);
        scanned += p.scanned;
        warnings += p.warnings;
    }

    let weighted = weight.is_some();
    let (n0_out, main_term, ratio) = if weighted {
        let r = chart.codim() as i32;
        let main = (2.0 * delta).powi(r) * n0.value();
        let ratio = if main > 0.0 { Some(count.value() / main) } else { None };
        (Some(n0.value()), Some(main), ratio)
    } else {
        (None, None, None)
    };

    Ok(CountResult {
        q_max: query.q_max,
        delta,
        weighted,
        count: count.value(),
        points_scanned: scanned,
        n0: n0_out,
        main_term,
        ratio,
        near_threshold_warnings: warnings,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// Count rational points near the chart (unweighted).
pub fn count_near(chart: &ManifoldChart, query: &CountQuery) -> Result<CountResult> {
    count_near_with_options(chart, query, &CountOptions::default())
}

pub fn count_near_with_options(
    chart: &ManifoldChart,
    query: &CountQuery,
    opts: &CountOptions,
) -> Result<CountResult> {
    sweep(chart, query, None, opts)
}

/// Weighted near-count `N_w(Q, δ) = Σ w(a/q)` over qualifying points, with
/// the base count `N₀` accumulated in the same sweep.
///
/// The weight's support must sit inside the chart box; for asymptotic
/// claims it must additionally sit inside the localization radius `κ` from
/// the curvature report, which is the caller's (harness's) responsibility.
pub fn count_weighted(
    chart: &ManifoldChart,
    weight: &WeightFunction,
    query: &CountQuery,
) -> Result<CountResult> {
    count_weighted_with_options(chart, weight, query, &CountOptions::default())
}

pub fn count_weighted_with_options(
    chart: &ManifoldChart,
    weight: &WeightFunction,
    query: &CountQuery,
    opts: &CountOptions,
) -> Result<CountResult> {
    if weight.center().len() != chart.base_dim() {
        return Err(Error::Arity { expected: chart.base_dim(), found: weight.center().len() });
    }
    let (lo, hi) = weight.support();
    let (blo, bhi) = (chart.box_lo(), chart.box_hi());
    for i in 0..chart.base_dim() {
        if lo[i] < blo[i] - 1e-12 || hi[i] > bhi[i] + 1e-12 {
            return Err(Error::Domain(format!(
                "weight support [{}, {}] escapes the chart box [{}, {}] on axis {i}",
                lo[i], hi[i], blo[i], bhi[i]
            )));
        }
    }
    sweep(chart, query, Some(weight), opts)
}

/// Exact-rational reference enumerator: a plain double loop with no
/// prefilter, no guard band, and no shared code with the fast path.
/// Requires polynomial-rational maps.
pub fn count_near_reference(chart: &ManifoldChart, query: &CountQuery) -> Result<u64> {
    if !chart.is_polynomial() {
        return Err(Error::NotExact(
            "reference enumerator needs polynomial-rational maps".into(),
        ));
    }
    let delta_rat = BigRational::from_float(query.delta)
        .ok_or_else(|| Error::Domain("threshold δ must be finite".into()))?;
    let n = chart.base_dim();
    let mut total: u64 = 0;
    for q in 1..=query.q_max {
        let qr = BigRational::from_integer(BigInt::from(q));
        // per-axis numerator ranges, derived directly from the box algebra
        let mut ranges: Vec<Vec<i64>> = Vec::with_capacity(n);
        for i in 0..n {
            let lo = ((chart.x0()[i].clone() - chart.eps0()) * &qr).ceil().to_integer();
            let hi = ((chart.x0()[i].clone() + chart.eps0()) * &qr).floor().to_integer();
            let (lo, hi) = (
                lo.to_i64().ok_or_else(|| Error::NotExact("lattice bound overflow".into()))?,
                hi.to_i64().ok_or_else(|| Error::NotExact("lattice bound overflow".into()))?,
            );
            ranges.push((lo..=hi).collect());
        }
        let mut idx = vec![0usize; n];
        if ranges.iter().any(|r| r.is_empty()) {
            continue;
        }
        'points: loop {
            let x: Vec<BigRational> = (0..n)
                .map(|i| BigRational::new(BigInt::from(ranges[i][idx[i]]), BigInt::from(q)))
                .collect();
            let mut ok = true;
            for m in chart.maps() {
                let v = &qr * m.value_rational(&x)?;
                // ‖v‖ ≤ δ ⟺ the fractional part or its complement is ≤ δ
                let frac = &v - v.floor();
                let dist = if frac.clone() * BigInt::from(2) <= BigRational::one() {
                    frac
                } else {
                    BigRational::one() - frac
                };
                if dist > delta_rat {
                    ok = false;
                    break;
                }
            }
            if ok {
                total += 1;
            }
            let mut d = 0;
            loop {
                if d == n {
                    break 'points;
                }
                idx[d] += 1;
                if idx[d] < ranges[d].len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }
    Ok(total)
}

/// Count rational points exactly on the chart (`δ = 0` decided in rational
/// arithmetic, never by a floating-point threshold).
pub fn count_on(chart: &ManifoldChart, q_max: u64) -> Result<CountResult> {
    count_on_with_options(chart, q_max, &CountOptions::default())
}

pub fn count_on_with_options(
    chart: &ManifoldChart,
    q_max: u64,
    opts: &CountOptions,
) -> Result<CountResult> {
    if q_max == 0 {
        return Err(Error::Domain("denominator bound Q must be positive".into()));
    }
    if !chart.is_polynomial() {
        return Err(Error::NotExact(
            "on-chart membership needs polynomial-rational maps".into(),
        ));
    }
    let started = Instant::now();
    check_budget(chart, q_max, opts)?;

    let partials: Vec<Partial> = (1..=q_max)
        .into_par_iter()
        .map(|q| {
            let mut p = Partial::default();
            let mut stack: Vec<f64> = Vec::new();
            let qf = q as f64;
            p.scanned = for_each_base_point(chart, q, |a, x| {
                // cheap f64 prefilter, then exact confirmation
                let plausible = chart.maps().iter().all(|m| {
                    dist_to_nearest_int(qf * m.program().eval(x, &mut stack))
                        <= ON_CHART_PREFILTER
                });
                if !plausible {
                    return;
                }
                if let Ok(vals) = heights_exact(chart, q, a) {
                    if vals.iter().all(|v| v.is_integer()) {
                        p.count += 1.0;
                    }
                }
            });
            p
        })
        .collect();

    let mut count = 0u64;
    let mut scanned = 0u64;
    for p in &partials {
        count += p.count as u64;
        scanned += p.scanned;
    }
    Ok(CountResult {
        q_max,
        delta: 0.0,
        weighted: false,
        count: count as f64,
        points_scanned: scanned,
        n0: None,
        main_term: None,
        ratio: None,
        near_threshold_warnings: 0,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// Base count and density estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseCountReport {
    pub q_max: u64,
    /// `N₀ = Σ_{q ≤ Q, a} w(a/q)` over the weight's support lattice.
    pub n0: f64,
    /// `σ̂ = N₀ / Q^{n+1}`.
    pub sigma_hat: f64,
    /// The analytic prediction `∫w / (n+1)` by quadrature.
    pub sigma_analytic: f64,
    pub points_scanned: u64,
}

/// `N₀` and its density against the analytic prediction `∫w/(n+1)`.
pub fn base_count_sigma(weight: &WeightFunction, q_max: u64) -> Result<BaseCountReport> {
    if q_max == 0 {
        return Err(Error::Domain("denominator bound Q must be positive".into()));
    }
    let n = weight.center().len();
    let (lo, hi) = weight.support();
    let partials: Vec<(f64, u64)> = (1..=q_max)
        .into_par_iter()
        .map(|q| {
            let qf = q as f64;
            let bounds: Vec<(i64, i64)> = (0..n)
                .map(|i| ((qf * lo[i]).ceil() as i64, (qf * hi[i]).floor() as i64))
                .collect();
            if bounds.iter().any(|(l, h)| h < l) {
                return (0.0, 0);
            }
            let mut a: Vec<i64> = bounds.iter().map(|&(l, _)| l).collect();
            let mut x = vec![0.0f64; n];
            let mut acc = 0.0f64;
            let mut scanned = 0u64;
            loop {
                for i in 0..n {
                    x[i] = a[i] as f64 / qf;
                }
                acc += weight.value(&x);
                scanned += 1;
                let mut d = 0;
                loop {
                    if d == n {
                        return (acc, scanned);
                    }
                    a[d] += 1;
                    if a[d] <= bounds[d].1 {
                        break;
                    }
                    a[d] = bounds[d].0;
                    d += 1;
                }
            }
        })
        .collect();

    let mut n0 = Kahan::new();
    let mut scanned = 0u64;
    for (acc, s) in &partials {
        n0.add(*acc);
        scanned += s;
    }
    let qf = q_max as f64;
    Ok(BaseCountReport {
        q_max,
        n0: n0.value(),
        sigma_hat: n0.value() / qf.powi(n as i32 + 1),
        sigma_analytic: weight.integral() / (n as f64 + 1.0),
        points_scanned: scanned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{rational, rational_int, SmoothMap};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn chart_2d(maps: &[&str], eps_num: i64, eps_den: i64) -> ManifoldChart {
        let maps = maps
            .iter()
            .map(|s| SmoothMap::parse(s, 2).unwrap())
            .collect::<Vec<_>>();
        ManifoldChart::new(
            maps,
            vec![rational_int(0), rational_int(0)],
            rational(eps_num, eps_den),
            None,
        )
        .unwrap()
    }

    #[test]
    fn half_threshold_counts_every_scanned_point() {
        let chart = chart_2d(&["(x1^2 + x2^2)/2"], 1, 4);
        let query = CountQuery::new(20, 0.5).unwrap();
        let res = count_near(&chart, &query).unwrap();
        assert_eq!(res.count as u64, res.points_scanned);
        assert_eq!(res.points_scanned, scan_size(&chart, 20));
    }

    #[test]
    fn flat_chart_counts_every_scanned_point_at_zero_threshold() {
        let chart = chart_2d(&["0*x1"], 1, 4);
        let query = CountQuery::new(15, 0.0).unwrap();
        let res = count_near(&chart, &query).unwrap();
        assert_eq!(res.count as u64, res.points_scanned);
    }

    #[test]
    fn paraboloid_count_matches_the_frozen_reference() {
        // value pinned by the exact-rational double loop (run once, frozen)
        let chart = chart_2d(&["(x1^2 + x2^2)/2"], 1, 4);
        let query = CountQuery::new(50, 0.1).unwrap();
        let reference = count_near_reference(&chart, &query).unwrap();
        let fast = count_near(&chart, &query).unwrap();
        assert_eq!(fast.count as u64, reference);
        assert!(fast.count > 0.0);
    }

    #[test]
    fn optimized_and_reference_agree_on_randomized_charts() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..5 {
            let c: Vec<i64> = (0..5).map(|_| rng.gen_range(-2..=2i64)).collect();
            let src = format!(
                "({}*x1^2 + {}*x1*x2 + {}*x2^2 + {}*x1 + {}*x2)/2",
                c[0], c[1], c[2], c[3], c[4]
            );
            let chart = chart_2d(&[&src], 1, 3);
            for delta in [0.0, 0.1, 0.5] {
                let query = CountQuery::new(12, delta).unwrap();
                let fast = count_near(&chart, &query).unwrap();
                let slow = count_near_reference(&chart, &query).unwrap();
                assert_eq!(fast.count as u64, slow, "{src} at δ = {delta}");
            }
        }
    }

    #[test]
    fn counts_grow_with_threshold_and_denominator_bound() {
        let chart = chart_2d(&["(x1^2 - x2^2)/2", "x1*x2"], 1, 4);
        let mut prev = 0.0;
        for delta in [0.0, 0.05, 0.1, 0.25, 0.5] {
            let res = count_near(&chart, &CountQuery::new(15, delta).unwrap()).unwrap();
            assert!(res.count >= prev, "δ monotonicity broke at {delta}");
            prev = res.count;
        }
        let mut prev = 0.0;
        for q in [5, 10, 15, 20] {
            let res = count_near(&chart, &CountQuery::new(q, 0.1).unwrap()).unwrap();
            assert!(res.count >= prev, "Q monotonicity broke at {q}");
            prev = res.count;
        }
    }

    #[test]
    fn weighted_count_at_half_equals_the_base_count() {
        let chart = chart_2d(&["x1*x2"], 1, 4);
        let weight = WeightFunction::bump(vec![0.0, 0.0], 0.2).unwrap();
        let res =
            count_weighted(&chart, &weight, &CountQuery::new(40, 0.5).unwrap()).unwrap();
        assert_eq!(res.count, res.n0.unwrap());
        assert_eq!(res.main_term.unwrap(), res.n0.unwrap());
        assert!((res.ratio.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_count_is_linear_in_the_weight_scale() {
        let chart = chart_2d(&["x1*x2"], 1, 4);
        let w1 = WeightFunction::new(vec![0.0, 0.0], 0.2, 1.0).unwrap();
        let w3 = WeightFunction::new(vec![0.0, 0.0], 0.2, 3.0).unwrap();
        let q = CountQuery::new(30, 0.1).unwrap();
        let r1 = count_weighted(&chart, &w1, &q).unwrap();
        let r3 = count_weighted(&chart, &w3, &q).unwrap();
        assert!((r3.count - 3.0 * r1.count).abs() < 1e-9 * (1.0 + r1.count.abs()));
        assert!((r3.n0.unwrap() - 3.0 * r1.n0.unwrap()).abs() < 1e-9 * r1.n0.unwrap());
    }

    #[test]
    fn weight_escaping_the_chart_box_is_refused() {
        let chart = chart_2d(&["x1*x2"], 1, 4);
        let wide = WeightFunction::bump(vec![0.0, 0.0], 0.3).unwrap();
        assert!(matches!(
            count_weighted(&chart, &wide, &CountQuery::new(10, 0.1).unwrap()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn on_chart_decisions_are_exactly_rational() {
        let chart = chart_2d(&["(x1^2 - x2^2)/2", "x1*x2"], 1, 1);
        // q=5, a=(3,4): q·f1(3/5, 4/5) = 5·(9−16)/50 = −7/10 ∉ ℤ
        let vals = heights_exact(&chart, 5, &[3, 4]).unwrap();
        assert!(!vals[0].is_integer());
        // q=2, a=(2,2): q·f1(1,1) = 0 and q·f2(1,1) = 2, both integers
        let vals = heights_exact(&chart, 2, &[2, 2]).unwrap();
        assert!(vals.iter().all(|v| v.is_integer()));
    }

    #[test]
    fn on_chart_count_equals_zero_threshold_near_count() {
        let chart = chart_2d(&["(x1^2 - x2^2)/2", "x1*x2"], 1, 2);
        for q_max in [10u64, 20] {
            let on = count_on(&chart, q_max).unwrap();
            let near = count_near(&chart, &CountQuery::new(q_max, 0.0).unwrap()).unwrap();
            assert_eq!(on.count, near.count, "Q = {q_max}");
        }
    }

    #[test]
    fn flat_chart_lies_on_itself_everywhere() {
        let chart = chart_2d(&["0*x1"], 1, 4);
        let res = count_on(&chart, 12).unwrap();
        assert_eq!(res.count as u64, res.points_scanned);
    }

    #[test]
    fn on_chart_requires_polynomial_maps() {
        let map = SmoothMap::parse("sin(x1) + x2^2", 2).unwrap();
        let chart = ManifoldChart::new(
            vec![map],
            vec![rational_int(0), rational_int(0)],
            rational(1, 4),
            None,
        )
        .unwrap();
        assert!(matches!(count_on(&chart, 5), Err(Error::NotExact(_))));
    }

    #[test]
    fn base_count_density_approaches_the_integral_prediction() {
        let weight = WeightFunction::bump(vec![0.0, 0.0], 0.2).unwrap();
        let a = base_count_sigma(&weight, 100).unwrap();
        let b = base_count_sigma(&weight, 200).unwrap();
        let c = base_count_sigma(&weight, 400).unwrap();
        let target = a.sigma_analytic;
        assert!(target > 0.0);
        let (ea, eb, ec) = (
            (a.sigma_hat - target).abs(),
            (b.sigma_hat - target).abs(),
            (c.sigma_hat - target).abs(),
        );
        assert!(ec < ea, "density estimate did not tighten: {ea} → {eb} → {ec}");
        assert!(ec / target < 0.05, "relative gap {} at Q = 400", ec / target);
    }

    #[test]
    fn zero_weight_has_zero_base_count() {
        let weight = WeightFunction::new(vec![0.0, 0.0], 0.2, 0.0).unwrap();
        let report = base_count_sigma(&weight, 50).unwrap();
        assert_eq!(report.n0, 0.0);
        assert_eq!(report.sigma_hat, 0.0);
    }

    #[test]
    fn weighted_count_is_sandwiched_by_indicator_counts() {
        let chart = chart_2d(&["x1*x2"], 1, 4);
        let weight = WeightFunction::bump(vec![0.0, 0.0], 0.25).unwrap();
        let query = CountQuery::new(25, 0.1).unwrap();
        let weighted = count_weighted(&chart, &weight, &query).unwrap();
        let unweighted = count_near(&chart, &query).unwrap();
        // w ≤ w(0)·(indicator of the box): the weighted count is below the
        // scaled unweighted one, and trivially nonnegative
        let peak = weight.value(&[0.0, 0.0]);
        assert!(weighted.count <= peak * unweighted.count + 1e-12);
        assert!(weighted.count >= 0.0);
    }

    #[test]
    fn scan_budget_is_enforced() {
        let chart = chart_2d(&["x1*x2"], 1, 4);
        let query = CountQuery::new(100, 0.1).unwrap();
        let opts = CountOptions { scan_budget: 10 };
        assert!(matches!(
            count_near_with_options(&chart, &query, &opts),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn query_validation_rejects_bad_thresholds() {
        assert!(CountQuery::new(0, 0.1).is_err());
        assert!(CountQuery::new(10, -0.1).is_err());
        assert!(CountQuery::new(10, 0.6).is_err());
        assert!(CountQuery::new(10, 0.5).is_ok());
    }
}
