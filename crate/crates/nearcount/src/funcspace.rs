//! Charts, smooth maps, and weight functions.
//!
//! A [`ManifoldChart`] is the graph presentation used everywhere else in the
//! crate: a closed base box `B̄_ε0(x0) ⊂ R^n` (in the `L∞` metric) together
//! with `R` component maps `f_r` given as expression trees. The base point
//! and radius are kept as exact rationals alongside their `f64` mirrors so
//! lattice bounds such as `⌈q(x0_i − ε0)⌉` can be computed without rounding
//! ambiguity.
//!
//! [`WeightFunction`] is the standard compactly supported bump
//! `w(x) = scale · Π_i g((x_i − c_i)/radius)` with `g(u) = exp(-1/(1-u²))`
//! inside `|u| < 1` and `0` outside — smooth, nonnegative, and exactly zero
//! off its support box, which is what the counting sums assume.
//!
//! Both implement [`Smooth`], the trait the curvature, Legendre, and
//! oscillatory modules consume: values, gradients, and Hessians at a point.

use crate::expr::{rational_to_f64, Expr, Program};
use crate::linalg::Matrix;
use crate::numerics::gauss_legendre;
use crate::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A `C²`-evaluable scalar map on a box of `R^n`.
pub trait Smooth {
    /// Number of base coordinates.
    fn arity(&self) -> usize;
    /// Value at `x`.
    fn value(&self, x: &[f64]) -> f64;
    /// Gradient at `x`.
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Hessian at `x` (symmetric by construction).
    fn hessian(&self, x: &[f64]) -> Matrix;
}

/// An expression-backed smooth map with precompiled value, gradient, and
/// Hessian programs.
#[derive(Debug, Clone)]
pub struct SmoothMap {
    n: usize,
    expr: Expr,
    grad_exprs: Vec<Expr>,
    value_prog: Program,
    grad_progs: Vec<Program>,
    hess_progs: Vec<Program>, // packed upper triangle, row-major
    polynomial: bool,
}

impl SmoothMap {
    /// Build from an expression tree in `x1..x{n}`.
    pub fn new(expr: Expr, n: usize) -> Result<SmoothMap> {
        let used = expr.arity_floor();
        if used > n {
            return Err(Error::Arity { expected: n, found: used });
        }
        let grad_exprs: Vec<Expr> = (0..n).map(|i| expr.partial(i)).collect();
        let mut hess_progs = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                hess_progs.push(grad_exprs[i].partial(j).compile());
            }
        }
        let value_prog = expr.compile();
        let grad_progs = grad_exprs.iter().map(Expr::compile).collect();
        let polynomial = expr.is_polynomial();
        Ok(SmoothMap {
            n,
            expr,
            grad_exprs,
            value_prog,
            grad_progs,
            hess_progs,
            polynomial,
        })
    }

    /// Parse from the chart grammar.
    pub fn parse(src: &str, n: usize) -> Result<SmoothMap> {
        SmoothMap::new(Expr::parse(src)?, n)
    }

    /// The underlying expression.
    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Compiled value program, for hot loops that manage their own scratch.
    pub fn program(&self) -> &Program {
        &self.value_prog
    }

    /// Whether exact rational evaluation is available.
    pub fn is_polynomial(&self) -> bool {
        self.polynomial
    }

    /// Exact value at a rational point.
    pub fn value_rational(&self, x: &[BigRational]) -> Result<BigRational> {
        self.expr.eval_rational(x)
    }

    /// Symbolic partial derivative as a new map.
    pub fn partial_map(&self, i: usize) -> Result<SmoothMap> {
        SmoothMap::new(self.grad_exprs[i].clone(), self.n)
    }

    fn hess_index(&self, i: usize, j: usize) -> usize {
        // packed upper triangle of an n×n matrix
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * self.n - a * (a + 1) / 2 + b
    }
}

impl Smooth for SmoothMap {
    fn arity(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.value_prog.eval_alloc(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut stack = Vec::new();
        self.grad_progs.iter().map(|p| p.eval(x, &mut stack)).collect()
    }

    fn hessian(&self, x: &[f64]) -> Matrix {
        let mut stack = Vec::new();
        let mut h = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.hess_progs[self.hess_index(i, j)].eval(x, &mut stack);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }
}

/// The one-dimensional bump profile `g(u) = exp(-1/(1-u²))` on `|u| < 1`.
#[inline]
pub fn bump_profile(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// `g'(u)` (zero outside the open support, like `g`).
#[inline]
fn bump_profile_dlog(u: f64) -> f64 {
    // d/du [ -1/(1-u²) ] = -2u/(1-u²)²
    let d = 1.0 - u * u;
    -2.0 * u / (d * d)
}

#[inline]
fn bump_profile_d2log(u: f64) -> f64 {
    // second derivative of -1/(1-u²)
    let d = 1.0 - u * u;
    -(2.0 + 6.0 * u * u) / (d * d * d)
}

/// Compactly supported product bump weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightFunction {
    center: Vec<f64>,
    radius: f64,
    scale: f64,
}

impl WeightFunction {
    /// Bump centered at `center` with half-width `radius`, scaled by `scale`.
    pub fn new(center: Vec<f64>, radius: f64, scale: f64) -> Result<WeightFunction> {
        if !(radius > 0.0) {
            return Err(Error::Domain(format!("weight radius must be positive, got {radius}")));
        }
        if !(scale >= 0.0) {
            return Err(Error::Domain(format!("weight scale must be nonnegative, got {scale}")));
        }
        Ok(WeightFunction { center, radius, scale })
    }

    /// Unit-scale bump.
    pub fn bump(center: Vec<f64>, radius: f64) -> Result<WeightFunction> {
        WeightFunction::new(center, radius, 1.0)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Closed support box `[cᵢ − r, cᵢ + r]` per axis.
    pub fn support(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.center.iter().map(|c| c - self.radius).collect(),
            self.center.iter().map(|c| c + self.radius).collect(),
        )
    }

    /// `∫ w` over `R^n`, by per-axis Gauss–Legendre quadrature (the integrand
    /// is a product, so one high-order 1D rule suffices).
    pub fn integral(&self) -> f64 {
        let (nodes, weights) = gauss_legendre(96);
        let one_axis: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(u, w)| w * bump_profile(*u))
            .sum();
        self.scale * (self.radius * one_axis).powi(self.center.len() as i32)
    }
}

impl Smooth for WeightFunction {
    fn arity(&self) -> usize {
        self.center.len()
    }

    #[inline]
    fn value(&self, x: &[f64]) -> f64 {
        let mut prod = self.scale;
        for (xi, ci) in x.iter().zip(&self.center) {
            let u = (xi - ci) / self.radius;
            if u.abs() >= 1.0 {
                return 0.0;
            }
            prod *= bump_profile(u);
            if prod == 0.0 {
                return 0.0;
            }
        }
        prod
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.arity();
        let w = self.value(x);
        let mut g = vec![0.0; n];
        if w == 0.0 {
            return g;
        }
        for i in 0..n {
            let u = (x[i] - self.center[i]) / self.radius;
            g[i] = w * bump_profile_dlog(u) / self.radius;
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> Matrix {
        let n = self.arity();
        let mut h = Matrix::zeros(n, n);
        let w = self.value(x);
        if w == 0.0 {
            return h;
        }
        let l1: Vec<f64> = (0..n)
            .map(|i| bump_profile_dlog((x[i] - self.center[i]) / self.radius) / self.radius)
            .collect();
        let l2: Vec<f64> = (0..n)
            .map(|i| {
                bump_profile_d2log((x[i] - self.center[i]) / self.radius)
                    / (self.radius * self.radius)
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] = if i == j {
                    w * (l2[i] + l1[i] * l1[i])
                } else {
                    w * l1[i] * l1[j]
                };
            }
        }
        h
    }
}

/// Graph chart of a compact manifold piece: base box plus component maps.
#[derive(Debug, Clone)]
pub struct ManifoldChart {
    n: usize,
    maps: Vec<SmoothMap>,
    x0: Vec<BigRational>,
    x0_f: Vec<f64>,
    eps0: BigRational,
    eps0_f: f64,
    ell: Option<u32>,
}

impl ManifoldChart {
    /// Assemble a chart; `ell` is the declared smoothness class (`None` = C^∞).
    pub fn new(
        maps: Vec<SmoothMap>,
        x0: Vec<BigRational>,
        eps0: BigRational,
        ell: Option<u32>,
    ) -> Result<ManifoldChart> {
        if maps.is_empty() {
            return Err(Error::Domain("chart needs at least one component map".into()));
        }
        let n = maps[0].arity();
        if n == 0 {
            return Err(Error::Domain("chart base dimension must be at least 1".into()));
        }
        if x0.len() != n {
            return Err(Error::Domain(format!(
                "base point has {} coordinates, maps expect {n}",
                x0.len()
            )));
        }
        for m in &maps {
            if m.arity() != n {
                return Err(Error::Domain("component maps disagree on arity".into()));
            }
        }
        if !eps0.is_positive() {
            return Err(Error::Domain("box radius eps0 must be positive".into()));
        }
        let x0_f: Vec<f64> = x0.iter().map(rational_to_f64).collect();
        let eps0_f = rational_to_f64(&eps0);
        Ok(ManifoldChart { n, maps, x0, x0_f, eps0, eps0_f, ell })
    }

    pub fn base_dim(&self) -> usize {
        self.n
    }

    /// Codimension `R` (number of component maps).
    pub fn codim(&self) -> usize {
        self.maps.len()
    }

    /// Ambient dimension `n + R`.
    pub fn ambient_dim(&self) -> usize {
        self.n + self.maps.len()
    }

    pub fn maps(&self) -> &[SmoothMap] {
        &self.maps
    }

    pub fn x0(&self) -> &[BigRational] {
        &self.x0
    }

    pub fn x0_f64(&self) -> &[f64] {
        &self.x0_f
    }

    pub fn eps0(&self) -> &BigRational {
        &self.eps0
    }

    pub fn eps0_f64(&self) -> f64 {
        self.eps0_f
    }

    pub fn smoothness(&self) -> Option<u32> {
        self.ell
    }

    /// All component maps polynomial-rational (exact arithmetic available)?
    pub fn is_polynomial(&self) -> bool {
        self.maps.iter().all(SmoothMap::is_polynomial)
    }

    /// Box corners in `f64`.
    pub fn box_lo(&self) -> Vec<f64> {
        self.x0_f.iter().map(|c| c - self.eps0_f).collect()
    }

    pub fn box_hi(&self) -> Vec<f64> {
        self.x0_f.iter().map(|c| c + self.eps0_f).collect()
    }

    /// Closed-box membership test for a rational point.
    pub fn contains_rational(&self, x: &[BigRational]) -> bool {
        x.iter()
            .zip(&self.x0)
            .all(|(xi, ci)| (xi - ci).abs() <= self.eps0)
    }

    /// Integer range of numerators `a_i` with `a_i/q` in the closed box along
    /// axis `i`: `⌈q(x0_i − ε0)⌉ ..= ⌊q(x0_i + ε0)⌋`, computed exactly.
    pub fn lattice_axis_bounds(&self, q: u64, i: usize) -> (i64, i64) {
        let qr = BigRational::from_integer(BigInt::from(q));
        let lo = ((&self.x0[i] - &self.eps0) * &qr).ceil().to_integer();
        let hi = ((&self.x0[i] + &self.eps0) * &qr).floor().to_integer();
        (
            lo.to_i64().expect("lattice bound overflows i64"),
            hi.to_i64().expect("lattice bound overflows i64"),
        )
    }

    /// The smallest admissible smoothness class: the least integer strictly
    /// greater than `max(n+1, n/2+4)`.
    pub fn smoothness_requirement(&self) -> u32 {
        let m = ((self.n + 1) as f64).max(self.n as f64 / 2.0 + 4.0);
        if m.fract() == 0.0 {
            m as u32 + 1
        } else {
            m.ceil() as u32
        }
    }

    /// Warning when the declared smoothness is below the admissible class.
    pub fn smoothness_warning(&self) -> Option<String> {
        let req = self.smoothness_requirement();
        match self.ell {
            Some(ell) if ell < req => Some(format!(
                "declared smoothness C^{ell} is below the admissible class C^{req} \
                 for base dimension {}; asymptotic guarantees may not apply",
                self.n
            )),
            _ => None,
        }
    }
}

// ---- chart files -------------------------------------------------------

/// A number in a chart file: integer, float, or exact string like `"3/4"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumLit {
    Int(i64),
    Float(f64),
    Text(String),
}

impl NumLit {
    /// Exact rational value. Floats convert via their exact binary value.
    pub fn to_rational(&self) -> Result<BigRational> {
        match self {
            NumLit::Int(v) => Ok(BigRational::from_integer(BigInt::from(*v))),
            NumLit::Float(v) => BigRational::from_float(*v)
                .ok_or_else(|| Error::Config(format!("non-finite number {v}"))),
            NumLit::Text(s) => {
                let e = Expr::parse(s)?;
                e.const_value()
                    .ok_or_else(|| Error::Config(format!("expected a constant, got {s:?}")))
            }
        }
    }

    pub fn to_f64(&self) -> Result<f64> {
        Ok(rational_to_f64(&self.to_rational()?))
    }
}

fn rational_lit(r: &BigRational) -> NumLit {
    if r.is_integer() {
        match r.numer().to_i64() {
            Some(v) => NumLit::Int(v),
            None => NumLit::Text(r.to_string()),
        }
    } else {
        NumLit::Text(format!("{}/{}", r.numer(), r.denom()))
    }
}

/// Weight block of a chart file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightSpec {
    pub center: Vec<NumLit>,
    pub radius: NumLit,
    #[serde(default)]
    pub scale: Option<f64>,
}

impl WeightSpec {
    pub fn build(&self) -> Result<WeightFunction> {
        let center = self
            .center
            .iter()
            .map(|v| v.to_f64())
            .collect::<Result<Vec<f64>>>()?;
        WeightFunction::new(center, self.radius.to_f64()?, self.scale.unwrap_or(1.0))
    }

    pub fn from_weight(w: &WeightFunction) -> WeightSpec {
        WeightSpec {
            center: w.center().iter().map(|&c| NumLit::Float(c)).collect(),
            radius: NumLit::Float(w.radius()),
            scale: if w.scale() == 1.0 { None } else { Some(w.scale()) },
        }
    }
}

/// Serialized form of a chart (TOML or JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartSpec {
    pub n: usize,
    #[serde(default, alias = "R")]
    pub codim: Option<usize>,
    pub x0: Vec<NumLit>,
    pub eps0: NumLit,
    pub maps: Vec<String>,
    #[serde(default)]
    pub smoothness: Option<u32>,
    #[serde(default)]
    pub weight: Option<WeightSpec>,
}

impl ChartSpec {
    /// Validate and build the chart (and weight, when present).
    pub fn build(&self) -> Result<(ManifoldChart, Option<WeightFunction>)> {
        if let Some(r) = self.codim {
            if r != self.maps.len() {
                return Err(Error::Config(format!(
                    "codim = {r} but {} maps were given",
                    self.maps.len()
                )));
            }
        }
        let maps = self
            .maps
            .iter()
            .map(|src| SmoothMap::parse(src, self.n))
            .collect::<Result<Vec<_>>>()?;
        let x0 = self
            .x0
            .iter()
            .map(|v| v.to_rational())
            .collect::<Result<Vec<_>>>()?;
        let eps0 = self.eps0.to_rational()?;
        let chart = ManifoldChart::new(maps, x0, eps0, self.smoothness)?;
        let weight = match &self.weight {
            Some(ws) => {
                let w = ws.build()?;
                if w.arity() != chart.base_dim() {
                    return Err(Error::Config(format!(
                        "weight center has {} coordinates, chart base has {}",
                        w.arity(),
                        chart.base_dim()
                    )));
                }
                Some(w)
            }
            None => None,
        };
        Ok((chart, weight))
    }

    /// Spec describing an existing chart (for re-serialization).
    pub fn from_chart(chart: &ManifoldChart, weight: Option<&WeightFunction>) -> ChartSpec {
        ChartSpec {
            n: chart.base_dim(),
            codim: Some(chart.codim()),
            x0: chart.x0().iter().map(rational_lit).collect(),
            eps0: rational_lit(chart.eps0()),
            maps: chart.maps().iter().map(|m| m.expr().to_string()).collect(),
            smoothness: chart.smoothness(),
            weight: weight.map(WeightSpec::from_weight),
        }
    }

    /// Parse from TOML or JSON text (JSON when the body starts with `{`).
    pub fn from_str_auto(text: &str) -> Result<ChartSpec> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad JSON chart: {e}")))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(format!("bad TOML chart: {e}")))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("chart spec serializes")
    }
}

/// Load a chart file (TOML or JSON, detected by content).
pub fn load_chart(path: &Path) -> Result<(ManifoldChart, Option<WeightFunction>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ChartSpec::from_str_auto(&text)?.build()
}

/// Exact rational from integer pair, convenience for tests and generators.
pub fn rational(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// Exact rational from an integer.
pub fn rational_int(p: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(p))
}
