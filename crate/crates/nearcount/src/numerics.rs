//! Shared numerical utilities: Gauss–Legendre rules, a box-constrained
//! Nelder–Mead minimizer, compensated summation, and least-squares line fits.

/// Nodes and weights of the `k`-point Gauss–Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre polynomial from the
/// Chebyshev initial guess. Exact for polynomials of degree `2k-1`.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1);
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    let n = k as f64;
    for i in 0..(k + 1) / 2 {
        // initial guess: Chebyshev-like angle
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // evaluate P_k and its derivative by the three-term recurrence
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..k {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * x * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            let dx = p0 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[k - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[k - 1 - i] = w;
    }
    (nodes, weights)
}

/// Compensated (Kahan–Neumaier) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Kahan {
        Kahan::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Least-squares fit `y ≈ slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points to fit a line");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Minimize `f` over the box `lo[i] ≤ x[i] ≤ hi[i]` by Nelder–Mead with
/// projection onto the box. Deterministic; returns `(argmin, min)`.
///
/// `scale` sets the initial simplex edge; iteration stops when the simplex
/// has collapsed below `tol` in both value spread and diameter.
pub fn nelder_mead_box<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    scale: f64,
    lo: &[f64],
    hi: &[f64],
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let clamp = |x: &mut Vec<f64>| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    if n == 0 {
        let v = f(start);
        return (start.to_vec(), v);
    }
    // initial simplex: start plus one displaced vertex per axis
    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut vals: Vec<f64> = Vec::with_capacity(n + 1);
    let mut v0 = start.to_vec();
    clamp(&mut v0);
    verts.push(v0);
    for i in 0..n {
        let mut v = verts[0].clone();
        // displace toward the roomier side so the vertex stays distinct
        let step = if v[i] + scale <= hi[i] { scale } else { -scale };
        v[i] += step;
        clamp(&mut v);
        verts.push(v);
    }
    for v in &verts {
        vals.push(f(v));
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    for _ in 0..max_iter {
        // order
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        let reorder_v: Vec<Vec<f64>> = idx.iter().map(|&i| verts[i].clone()).collect();
        let reorder_f: Vec<f64> = idx.iter().map(|&i| vals[i]).collect();
        verts = reorder_v;
        vals = reorder_f;

        let diam = (1..=n)
            .map(|i| {
                (0..n)
                    .map(|d| (verts[i][d] - verts[0][d]).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if (vals[n] - vals[0]).abs() <= tol && diam <= tol {
            break;
        }

        // centroid of all but worst
        let mut cen = vec![0.0; n];
        for v in verts.iter().take(n) {
            for d in 0..n {
                cen[d] += v[d];
            }
        }
        for c in cen.iter_mut() {
            *c /= n as f64;
        }

        let mut refl: Vec<f64> = (0..n)
            .map(|d| cen[d] + alpha * (cen[d] - verts[n][d]))
            .collect();
        clamp(&mut refl);
        let f_refl = f(&refl);
        if f_refl < vals[0] {
            let mut expd: Vec<f64> = (0..n)
                .map(|d| cen[d] + gamma * (refl[d] - cen[d]))
                .collect();
            clamp(&mut expd);
            let f_exp = f(&expd);
            if f_exp < f_refl {
                verts[n] = expd;
                vals[n] = f_exp;
            } else {
                verts[n] = refl;
                vals[n] = f_refl;
            }
        } else if f_refl < vals[n - 1] {
            verts[n] = refl;
            vals[n] = f_refl;
        } else {
            let mut contr: Vec<f64> = (0..n)
                .map(|d| cen[d] + rho * (verts[n][d] - cen[d]))
                .collect();
            clamp(&mut contr);
            let f_con = f(&contr);
            if f_con < vals[n] {
                verts[n] = contr;
                vals[n] = f_con;
            } else {
                // shrink toward the best vertex
                for i in 1..=n {
                    let best = verts[0].clone();
                    for d in 0..n {
                        verts[i][d] = best[d] + sigma * (verts[i][d] - best[d]);
                    }
                    let vi = verts[i].clone();
                    vals[i] = f(&vi);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if vals[i] < vals[best] {
            best = i;
        }
    }
    (verts[best].clone(), vals[best])
}

/// Evenly spaced grid over `[lo, hi]`, endpoints included (`k ≥ 2`),
/// or the midpoint alone for `k = 1`.
pub fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    assert!(k >= 1);
    if k == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect()
}

/// Distance from `x` to the nearest integer, valued in `[0, 1/2]`.
#[inline]
pub fn dist_to_nearest_int(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Small deterministic generator (splitmix64) for reproducible sampling in
/// library code — certificates and Monte Carlo checks must not depend on an
/// external RNG or global state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> SplitMix64 {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn next_int(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        lo + (self.next_u64() % span) as i64
    }
}
