//! Symmetric integer matrix families with nonsingular pencils.
//!
//! A family `A_1, …, A_R` of symmetric `n×n` matrices has a *nonsingular
//! pencil* when `det(t_1 A_1 + ⋯ + t_R A_R) ≠ 0` for every `t ≠ 0`. Such
//! families induce quadratic charts `f_r(x) = ½ xᵀ A_r x` whose Hessian
//! pencils are constant in `x`, so the curvature certificate reduces to the
//! matrix condition — these are the standard sources of charts that the
//! counting machinery can certify.
//!
//! The module provides the recursive anticommuting construction
//! ([`suslin_family`]) with its exact square identity
//! `A(t)² = (Σ t_r²)·I`, realification of complex Hermitian families
//! ([`realify_hermitian`]), the Radon–Hurwitz bound on how many matrices a
//! dimension admits ([`radon_hurwitz`]), and the induced tangent vector
//! fields on the unit sphere. All constructed-family arithmetic is exact:
//! entries are 64-bit integers with overflow checks, and determinants are
//! computed fraction-free over big integers (or Gaussian integers for the
//! complex check).

use crate::expr::Expr;
use crate::funcspace::{ManifoldChart, SmoothMap};
use crate::linalg::Matrix;
use crate::numerics::SplitMix64;
use crate::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// How a family was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Suslin,
    Realified,
    User,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Suslin => write!(f, "suslin"),
            Provenance::Realified => write!(f, "realified"),
            Provenance::User => write!(f, "user"),
        }
    }
}

/// Dense integer matrix with exact arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> IntMatrix {
        IntMatrix { n_rows, n_cols, data: vec![0; n_rows * n_cols] }
    }

    pub fn identity(n: usize) -> IntMatrix {
        let mut m = IntMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<IntMatrix> {
        if rows.is_empty() {
            return Err(Error::Domain("matrix needs at least one row".into()));
        }
        let n_cols = rows[0].len();
        if n_cols == 0 || rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Domain("matrix rows must be nonempty and equal length".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(IntMatrix { n_rows: rows.len(), n_cols, data })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.n_rows)
                .all(|i| (i + 1..self.n_cols).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn is_antisymmetric(&self) -> bool {
        self.is_square()
            && (0..self.n_rows).all(|i| {
                self[(i, i)] == 0 && (i + 1..self.n_cols).all(|j| self[(i, j)] == -self[(j, i)])
            })
    }

    /// `self + k·other`, overflow-checked.
    pub fn add_scaled(&self, k: i64, other: &IntMatrix) -> Result<IntMatrix> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::Domain("matrix dimension mismatch".into()));
        }
        let mut out = self.clone();
        for (o, v) in out.data.iter_mut().zip(&other.data) {
            *o = k
                .checked_mul(*v)
                .and_then(|p| o.checked_add(p))
                .ok_or_else(|| Error::Domain("integer overflow in pencil entry".into()))?;
        }
        Ok(out)
    }

    /// Product in 128-bit arithmetic, narrowed back with overflow checks.
    pub fn matmul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::Domain("matrix dimension mismatch".into()));
        }
        let mut out = IntMatrix::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for j in 0..other.n_cols {
                let mut acc: i128 = 0;
                for k in 0..self.n_cols {
                    acc += self[(i, k)] as i128 * other[(k, j)] as i128;
                }
                out[(i, j)] = i64::try_from(acc)
                    .map_err(|_| Error::Domain("integer overflow in matrix product".into()))?;
            }
        }
        Ok(out)
    }

    /// Exact determinant (fraction-free Gaussian elimination over `BigInt`).
    pub fn det_exact(&self) -> Result<BigInt> {
        if !self.is_square() {
            return Err(Error::Domain("determinant of a non-square matrix".into()));
        }
        let n = self.n_rows;
        let m: Vec<BigInt> = self.data.iter().map(|&v| BigInt::from(v)).collect();
        Ok(bareiss_det(m, n))
    }

    pub fn to_f64(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                m[(i, j)] = self[(i, j)] as f64;
            }
        }
        m
    }

    /// Apply to an integer vector (128-bit accumulation).
    pub fn matvec_f64(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| (0..self.n_cols).map(|j| self[(i, j)] as f64 * x[j]).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = i64;
    fn index(&self, (i, j): (usize, usize)) -> &i64 {
        &self.data[i * self.n_cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut i64 {
        &mut self.data[i * self.n_cols + j]
    }
}

/// Entries a fraction-free elimination can run over: an integral domain
/// where the algorithm's divisions are exact.
trait EntryRing: Clone {
    fn ring_zero() -> Self;
    fn ring_one() -> Self;
    fn is_ring_zero(&self) -> bool;
    fn ring_mul(&self, other: &Self) -> Self;
    fn ring_sub(&self, other: &Self) -> Self;
    fn ring_neg(&self) -> Self;
    /// `self / other`, guaranteed exact by the caller.
    fn ring_exact_div(&self, other: &Self) -> Self;
}

impl EntryRing for BigInt {
    fn ring_zero() -> Self {
        BigInt::zero()
    }
    fn ring_one() -> Self {
        BigInt::one()
    }
    fn is_ring_zero(&self) -> bool {
        self.is_zero()
    }
    fn ring_mul(&self, other: &Self) -> Self {
        self * other
    }
    fn ring_sub(&self, other: &Self) -> Self {
        self - other
    }
    fn ring_neg(&self) -> Self {
        -self
    }
    fn ring_exact_div(&self, other: &Self) -> Self {
        self / other
    }
}

/// Gaussian integer `re + im·i`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct GaussInt {
    re: BigInt,
    im: BigInt,
}

impl EntryRing for GaussInt {
    fn ring_zero() -> Self {
        GaussInt { re: BigInt::zero(), im: BigInt::zero() }
    }
    fn ring_one() -> Self {
        GaussInt { re: BigInt::one(), im: BigInt::zero() }
    }
    fn is_ring_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn ring_mul(&self, other: &Self) -> Self {
        GaussInt {
            re: &self.re * &other.re - &self.im * &other.im,
            im: &self.re * &other.im + &self.im * &other.re,
        }
    }
    fn ring_sub(&self, other: &Self) -> Self {
        GaussInt { re: &self.re - &other.re, im: &self.im - &other.im }
    }
    fn ring_neg(&self) -> Self {
        GaussInt { re: -&self.re, im: -&self.im }
    }
    fn ring_exact_div(&self, other: &Self) -> Self {
        // multiply by the conjugate; the norm divides both components when
        // the quotient lies in the ring, which elimination guarantees
        let norm = &other.re * &other.re + &other.im * &other.im;
        let re = &self.re * &other.re + &self.im * &other.im;
        let im = &self.im * &other.re - &self.re * &other.im;
        GaussInt { re: re / &norm, im: im / &norm }
    }
}

/// Fraction-free (Bareiss) determinant; exact in any integral domain.
fn bareiss_det<T: EntryRing>(mut m: Vec<T>, n: usize) -> T {
    if n == 0 {
        return T::ring_one();
    }
    let mut sign_flip = false;
    let mut prev = T::ring_one();
    for k in 0..n - 1 {
        if m[k * n + k].is_ring_zero() {
            match (k + 1..n).find(|&i| !m[i * n + k].is_ring_zero()) {
                Some(i) => {
                    for j in 0..n {
                        m.swap(k * n + j, i * n + j);
                    }
                    sign_flip = !sign_flip;
                }
                None => return T::ring_zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t = m[k * n + k]
                    .ring_mul(&m[i * n + j])
                    .ring_sub(&m[i * n + k].ring_mul(&m[k * n + j]));
                m[i * n + j] = t.ring_exact_div(&prev);
            }
            m[i * n + k] = T::ring_zero();
        }
        prev = m[k * n + k].clone();
    }
    let det = m[(n - 1) * n + (n - 1)].clone();
    if sign_flip {
        det.ring_neg()
    } else {
        det
    }
}

/// Exact determinant of a complex integer matrix `re + i·im`, returned as
/// its real and imaginary parts.
pub fn complex_det_exact(re: &IntMatrix, im: &IntMatrix) -> Result<(BigInt, BigInt)> {
    if !re.is_square() || re.n_rows() != im.n_rows() || re.n_cols() != im.n_cols() {
        return Err(Error::Domain("complex determinant needs square matching parts".into()));
    }
    let n = re.n_rows();
    let mut m = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            m.push(GaussInt { re: BigInt::from(re[(i, j)]), im: BigInt::from(im[(i, j)]) });
        }
    }
    let d = bareiss_det(m, n);
    Ok((d.re, d.im))
}

/// A family of symmetric integer matrices sharing one dimension.
#[derive(Debug, Clone)]
pub struct MatrixFamily {
    dim: usize,
    mats: Vec<IntMatrix>,
    provenance: Provenance,
}

impl MatrixFamily {
    /// Wrap user-supplied matrices (symmetry and dimensions checked).
    pub fn from_matrices(mats: Vec<IntMatrix>) -> Result<MatrixFamily> {
        MatrixFamily::assemble(mats, Provenance::User)
    }

    fn assemble(mats: Vec<IntMatrix>, provenance: Provenance) -> Result<MatrixFamily> {
        if mats.is_empty() {
            return Err(Error::Domain("family needs at least one matrix".into()));
        }
        let dim = mats[0].n_rows();
        for m in &mats {
            if m.n_rows() != dim || m.n_cols() != dim {
                return Err(Error::Domain("family matrices must share one square size".into()));
            }
            if !m.is_symmetric() {
                return Err(Error::Domain("family matrices must be symmetric".into()));
            }
        }
        Ok(MatrixFamily { dim, mats, provenance })
    }

    /// Number of matrices `R`.
    pub fn count(&self) -> usize {
        self.mats.len()
    }

    /// Matrix dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn matrices(&self) -> &[IntMatrix] {
        &self.mats
    }

    /// `Σ t_r A_r` with integer coefficients, exact.
    pub fn pencil_int(&self, t: &[i64]) -> Result<IntMatrix> {
        if t.len() != self.mats.len() {
            return Err(Error::Arity { expected: self.mats.len(), found: t.len() });
        }
        let mut acc = IntMatrix::zeros(self.dim, self.dim);
        for (k, m) in t.iter().zip(&self.mats) {
            acc = acc.add_scaled(*k, m)?;
        }
        Ok(acc)
    }

    /// `Σ t_r A_r` with real coefficients.
    pub fn pencil_f64(&self, t: &[f64]) -> Result<Matrix> {
        if t.len() != self.mats.len() {
            return Err(Error::Arity { expected: self.mats.len(), found: t.len() });
        }
        let mut acc = Matrix::zeros(self.dim, self.dim);
        for (k, m) in t.iter().zip(&self.mats) {
            acc = acc.add(&m.to_f64().scale(*k));
        }
        Ok(acc)
    }

    /// Exact pencil determinant at integer `t`.
    pub fn pencil_det(&self, t: &[i64]) -> Result<BigInt> {
        self.pencil_int(t)?.det_exact()
    }

    /// Does `(Σ t_r A_r)² = (Σ t_r²)·I` hold exactly at this `t`?
    pub fn square_identity_holds(&self, t: &[i64]) -> Result<bool> {
        let p = self.pencil_int(t)?;
        let sq = p.matmul(&p)?;
        let norm: i128 = t.iter().map(|&v| v as i128 * v as i128).sum();
        let norm = i64::try_from(norm)
            .map_err(|_| Error::Domain("integer overflow in |t|²".into()))?;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let want = if i == j { norm } else { 0 };
                if sq[(i, j)] != want {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Sample integer `t ≠ 0` and require `det(pencil) ≠ 0` exactly at each;
    /// the error carries the first failing `t`.
    pub fn certify_pencil(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = SplitMix64::new(seed);
        let r = self.mats.len();
        let mut checked = 0usize;
        while checked < samples {
            let t: Vec<i64> = (0..r).map(|_| rng.next_int(-9, 9)).collect();
            if t.iter().all(|&v| v == 0) {
                continue;
            }
            if self.pencil_det(&t)?.is_zero() {
                return Err(Error::Domain(format!(
                    "pencil certificate failed: det vanishes at t = {t:?}"
                )));
            }
            checked += 1;
        }
        Ok(())
    }

    /// Rank of `[A_1 x | … | A_R x]` at a real point.
    pub fn pointwise_rank(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::Arity { expected: self.dim, found: x.len() });
        }
        let mut m = Matrix::zeros(self.dim, self.mats.len());
        for (r, a) in self.mats.iter().enumerate() {
            let col = a.matvec_f64(x);
            for i in 0..self.dim {
                m[(i, r)] = col[i];
            }
        }
        let scale = m.max_abs().max(1.0);
        Ok(m.rank(1e-10 * scale))
    }

    /// Tangent vector fields on the sphere through `x`:
    /// `v_r(x) = B_r x − (x·B_r x)x` with `B_r = A_r A_1⁻¹`, for `r ≥ 2`.
    /// Errors if `A_1` is singular or the fields are rank-deficient (which
    /// would contradict a valid pencil certificate).
    pub fn tangent_fields(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.dim {
            return Err(Error::Arity { expected: self.dim, found: x.len() });
        }
        let a1 = self.mats[0].to_f64();
        let a1_inv = a1
            .inverse()
            .map_err(|_| Error::NotInvertible("first family matrix is singular".into()))?;
        let xnorm2: f64 = x.iter().map(|v| v * v).sum();
        if xnorm2 == 0.0 {
            return Err(Error::Domain("tangent fields need a nonzero base point".into()));
        }
        let mut fields = Vec::with_capacity(self.mats.len().saturating_sub(1));
        for a in &self.mats[1..] {
            let b = a.to_f64().matmul(&a1_inv);
            let bx = b.matvec(x);
            let xbx: f64 = x.iter().zip(&bx).map(|(a, b)| a * b).sum();
            let v: Vec<f64> = bx
                .iter()
                .zip(x)
                .map(|(bxi, xi)| bxi - xbx / xnorm2 * xi)
                .collect();
            fields.push(v);
        }
        if !fields.is_empty() {
            let mut m = Matrix::zeros(fields.len(), self.dim);
            for (r, v) in fields.iter().enumerate() {
                for j in 0..self.dim {
                    m[(r, j)] = v[j];
                }
            }
            let scale = m.max_abs().max(1.0);
            if m.rank(1e-10 * scale) < fields.len() {
                return Err(Error::Domain(
                    "certificate failure: tangent fields are rank-deficient".into(),
                ));
            }
        }
        Ok(fields)
    }

    /// Quadratic chart `f_r(x) = ½ xᵀ A_r x` on the box `|x|_∞ ≤ eps0`
    /// centered at the origin.
    pub fn chart(&self, eps0: BigRational) -> Result<ManifoldChart> {
        let maps = self
            .mats
            .iter()
            .map(|a| SmoothMap::new(quadratic_form_expr(a), self.dim))
            .collect::<Result<Vec<_>>>()?;
        let x0 = vec![BigRational::zero(); self.dim];
        ManifoldChart::new(maps, x0, eps0, None)
    }
}

/// Expression tree for `½ xᵀ A x` (A symmetric, integer entries).
pub fn quadratic_form_expr(a: &IntMatrix) -> Expr {
    let n = a.n_rows();
    let mut acc = Expr::int(0);
    for i in 0..n {
        let aii = a[(i, i)];
        if aii != 0 {
            let term = Expr::mul(
                Expr::ratio(aii, 2),
                Expr::pow(Expr::var(i), BigRational::from_integer(BigInt::from(2))),
            );
            acc = Expr::add(acc, term);
        }
        for j in i + 1..n {
            let aij = a[(i, j)];
            if aij != 0 {
                let term = Expr::mul(
                    Expr::int(aij),
                    Expr::mul(Expr::var(i), Expr::var(j)),
                );
                acc = Expr::add(acc, term);
            }
        }
    }
    acc
}

/// Recursive anticommuting family: `R` symmetric matrices of dimension
/// `n = 2^{R−1}` whose pencil satisfies `A(t)² = (Σ t_r²)·I` exactly, hence
/// `det A(t) ≠ 0` for all real `t ≠ 0`.
pub fn suslin_family(r: usize) -> Result<MatrixFamily> {
    if r < 2 {
        return Err(Error::Domain("recursive family needs R ≥ 2".into()));
    }
    let n = 1usize << (r - 1);
    if n > 1024 {
        return Err(Error::Domain(format!(
            "dimension 2^{} = {n} exceeds the 1024 cap",
            r - 1
        )));
    }
    // base: one 1×1 matrix [1]; each step doubles the dimension, placing the
    // old matrices off-diagonal and the new coefficient on the diagonal
    let mut mats = vec![IntMatrix::identity(1)];
    for _ in 1..r {
        let m = mats[0].n_rows();
        let mut next: Vec<IntMatrix> = mats
            .iter()
            .map(|b| {
                let mut c = IntMatrix::zeros(2 * m, 2 * m);
                for i in 0..m {
                    for j in 0..m {
                        c[(i, m + j)] = b[(i, j)];
                        c[(m + i, j)] = b[(i, j)];
                    }
                }
                c
            })
            .collect();
        let mut diag = IntMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            diag[(i, i)] = 1;
            diag[(m + i, m + i)] = -1;
        }
        next.push(diag);
        mats = next;
    }
    MatrixFamily::assemble(mats, Provenance::Suslin)
}

/// Realify one complex Hermitian matrix `M = P + iK` (P symmetric, K
/// antisymmetric, both checked) into the real symmetric block matrix
/// `[[P, −K], [K, P]]`, which satisfies `det = |det M|²`.
pub fn realify_hermitian(re: &IntMatrix, im: &IntMatrix) -> Result<IntMatrix> {
    if !re.is_square() || re.n_rows() != im.n_rows() || re.n_cols() != im.n_cols() {
        return Err(Error::Domain("realification needs square matching parts".into()));
    }
    if !re.is_symmetric() || !im.is_antisymmetric() {
        return Err(Error::Domain(
            "realification needs a Hermitian input: symmetric real part, antisymmetric imaginary part"
                .into(),
        ));
    }
    let n = re.n_rows();
    let mut out = IntMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = re[(i, j)];
            out[(n + i, n + j)] = re[(i, j)];
            out[(i, n + j)] = -im[(i, j)];
            out[(n + i, j)] = im[(i, j)];
        }
    }
    Ok(out)
}

/// Realify a family of Hermitian matrices given as (real, imaginary) pairs.
pub fn realify_family(parts: &[(IntMatrix, IntMatrix)]) -> Result<MatrixFamily> {
    let mats = parts
        .iter()
        .map(|(re, im)| realify_hermitian(re, im))
        .collect::<Result<Vec<_>>>()?;
    MatrixFamily::assemble(mats, Provenance::Realified)
}

/// Radon–Hurwitz number `ϱ(n)`: the largest `R` for which an `R`-member
/// nonsingular-pencil family can exist in dimension `n`. Closed form: with
/// `n = m·2^{4a+b}`, `m` odd and `0 ≤ b ≤ 3`, `ϱ(n) = 8a + 2^b`.
pub fn radon_hurwitz(n: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    let e = n.trailing_zeros() as u64;
    let a = e / 4;
    let b = e % 4;
    Ok(8 * a + (1u64 << b))
}
