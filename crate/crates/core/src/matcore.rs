//! Dense complex matrices and the tolerance policy shared by every decision
//! made downstream (rank, equality, nilpotency, Hermitian-ness).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Comparison and rank thresholds.
///
/// `eq_tol` scales entrywise comparisons by `1 + max-abs-entry norm`.
/// `rank_rel` is multiplied by `max(rows, cols)` and by the largest singular
/// value to obtain the rank cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub eq_tol: f64,
    pub rank_rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            eq_tol: 1e-9,
            rank_rel: 1e-10,
        }
    }
}

impl Tolerance {
    pub fn new(eq_tol: f64, rank_rel: f64) -> Result<Self> {
        if !(eq_tol.is_finite() && eq_tol >= 0.0 && rank_rel.is_finite() && rank_rel >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerances must be finite and nonnegative (eq_tol={eq_tol}, rank_rel={rank_rel})"
            )));
        }
        Ok(Self { eq_tol, rank_rel })
    }

    /// True when `norm <= eq_tol * (1 + scale)`.
    pub fn negligible(&self, norm: f64, scale: f64) -> bool {
        norm <= self.eq_tol * (1.0 + scale)
    }
}

/// Dense complex matrix with at least one row and one column and finite entries.
#[derive(Clone, PartialEq)]
pub struct CMatrix(DMatrix<C64>);

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            write!(f, "  ")?;
            for j in 0..self.cols() {
                let z = self.0[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    /// Builds a matrix from row-major entries, validating the shape and finiteness.
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        if entries.len() != rows * cols {
            return Err(Error::EntryCount {
                rows,
                cols,
                found: entries.len(),
            });
        }
        if let Some(k) = entries.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    /// Real matrix from nested rows. Panics on ragged or empty input; intended for literals.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(r > 0 && c > 0, "empty matrix literal");
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix literal");
        let entries = rows
            .iter()
            .flat_map(|row| row.iter().map(|&x| C64::new(x, 0.0)))
            .collect();
        Self::new(r, c, entries).expect("finite literal")
    }

    pub fn from_complex_rows(rows: &[&[C64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(r > 0 && c > 0, "empty matrix literal");
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix literal");
        let entries = rows.iter().flat_map(|row| row.iter().copied()).collect();
        Self::new(r, c, entries).expect("finite literal")
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "empty matrix");
        Self(DMatrix::identity(n, n))
    }

    pub fn diag(values: &[C64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { C64::new(0.0, 0.0) })
    }

    pub fn real_diag(values: &[f64]) -> Self {
        let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diag(&v)
    }

    pub(crate) fn from_inner(m: DMatrix<C64>) -> Self {
        debug_assert!(m.nrows() > 0 && m.ncols() > 0);
        Self(m)
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    /// Row-major copy of the entries.
    pub fn entries(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn ensure_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows())
        } else {
            Err(Error::NotSquare {
                rows: self.rows(),
                cols: self.cols(),
            })
        }
    }

    pub fn ensure_same_shape(&self, other: &CMatrix) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                left: self.shape(),
                right: other.shape(),
            })
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        Self(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> CMatrix {
        self.scale(C64::new(s, 0.0))
    }

    /// Maximum absolute entry.
    pub fn norm_max(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Singular values in nonincreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        singular_values_of(&self.0)
    }

    /// Full singular value decomposition `a = U diag(s) V*`.
    pub fn svd(&self) -> Svd {
        svd_of(&self.0)
    }

    /// Largest singular value.
    pub fn norm2(&self) -> f64 {
        self.singular_values().first().copied().unwrap_or(0.0)
    }

    pub fn submatrix(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> CMatrix {
        Self(self.0.view((r0, c0), (nr, nc)).into_owned())
    }

    /// Assembles `[[a, b], [c, d]]`.
    pub fn block2x2(a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix) -> Result<CMatrix> {
        if a.rows() != b.rows() || c.rows() != d.rows() {
            return Err(Error::ShapeMismatch {
                left: a.shape(),
                right: b.shape(),
            });
        }
        if a.cols() != c.cols() || b.cols() != d.cols() {
            return Err(Error::ShapeMismatch {
                left: a.shape(),
                right: c.shape(),
            });
        }
        let (r1, c1) = a.shape();
        let (nr, nc) = (r1 + c.rows(), c1 + b.cols());
        let mut m = DMatrix::zeros(nr, nc);
        m.view_mut((0, 0), a.shape()).copy_from(&a.0);
        m.view_mut((0, c1), b.shape()).copy_from(&b.0);
        m.view_mut((r1, 0), c.shape()).copy_from(&c.0);
        m.view_mut((r1, c1), d.shape()).copy_from(&d.0);
        Ok(Self(m))
    }

    /// Block diagonal matrix of square blocks.
    pub fn direct_sum(blocks: &[&CMatrix]) -> CMatrix {
        let n: usize = blocks.iter().map(|b| b.rows()).sum();
        let m: usize = blocks.iter().map(|b| b.cols()).sum();
        let mut out = DMatrix::zeros(n, m);
        let (mut r, mut c) = (0, 0);
        for b in blocks {
            out.view_mut((r, c), b.shape()).copy_from(&b.0);
            r += b.rows();
            c += b.cols();
        }
        Self(out)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Zeroes the whole matrix when its spectral norm is below the rank
    /// cutoff taken relative to `scale`, i.e. when it is pure roundoff of a
    /// product whose factors have norm product `scale`.
    pub fn chop(self, scale: f64, tol: &Tolerance) -> CMatrix {
        let cutoff = tol.rank_rel * self.rows().max(self.cols()) as f64 * scale;
        if self.norm2() <= cutoff {
            CMatrix::zeros(self.rows(), self.cols())
        } else {
            self
        }
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in addition");
        CMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in subtraction");
        CMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols(), rhs.rows(), "shape mismatch in product");
        CMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix(-&self.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr for CMatrix {
            type Output = CMatrix;
            fn $f(self, rhs: CMatrix) -> CMatrix {
                (&self).$f(&rhs)
            }
        }
        impl $tr<&CMatrix> for CMatrix {
            type Output = CMatrix;
            fn $f(self, rhs: &CMatrix) -> CMatrix {
                (&self).$f(rhs)
            }
        }
        impl $tr<CMatrix> for &CMatrix {
            type Output = CMatrix;
            fn $f(self, rhs: CMatrix) -> CMatrix {
                self.$f(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// Row-major JSON form: `{"rows": n, "cols": m, "data": [[re, im], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            data: m.entries().into_iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl TryFrom<MatrixJson> for CMatrix {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<Self> {
        let entries = j.data.into_iter().map(|[re, im]| C64::new(re, im)).collect();
        CMatrix::new(j.rows, j.cols, entries)
    }
}

impl Serialize for CMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        CMatrix::try_from(j).map_err(serde::de::Error::custom)
    }
}

/// `U` (`m x m`) and `V` (`n x n`) unitary, `s` nonincreasing of length `min(m, n)`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<C64>,
    pub s: Vec<f64>,
    pub v: DMatrix<C64>,
}

// nalgebra's complex bidiagonal SVD can lose several digits on small dense
// inputs, so decompositions go through faer.
fn to_faer(m: &DMatrix<C64>) -> faer::Mat<faer::c64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let z = m[(i, j)];
        faer::c64::new(z.re, z.im)
    })
}

fn from_faer(m: faer::MatRef<'_, faer::c64>) -> DMatrix<C64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        let z = m[(i, j)];
        C64::new(z.re, z.im)
    })
}

pub(crate) fn singular_values_of(m: &DMatrix<C64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s = match to_faer(m).singular_values() {
        Ok(s) => s,
        Err(_) => svd_of(m).s,
    };
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub(crate) fn svd_of(m: &DMatrix<C64>) -> Svd {
    let (rows, cols) = m.shape();
    let f = to_faer(m);
    let svd = f.svd().unwrap_or_else(|_| panic!("SVD failed to converge on a finite {rows}x{cols} matrix"));
    let diag = svd.S().column_vector();
    let s_raw: Vec<f64> = (0..rows.min(cols)).map(|i| diag[i].re).collect();
    let mut order: Vec<usize> = (0..s_raw.len()).collect();
    order.sort_by(|&i, &j| s_raw[j].total_cmp(&s_raw[i]));
    let (u_raw, v_raw) = (from_faer(svd.U()), from_faer(svd.V()));
    let mut u = u_raw.clone();
    let mut v = v_raw.clone();
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &u_raw.column(src));
        v.set_column(dst, &v_raw.column(src));
    }
    Svd {
        u,
        s: order.iter().map(|&i| s_raw[i]).collect(),
        v,
    }
}

pub fn adjoint(a: &CMatrix) -> CMatrix {
    a.adjoint()
}

/// `a^k` with `a^0 = I`.
pub fn mat_pow(a: &CMatrix, k: usize) -> Result<CMatrix> {
    let n = a.ensure_square()?;
    let mut result = CMatrix::identity(n);
    let mut base = a.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    Ok(result)
}

/// Number of singular values above `rank_rel * max(rows, cols) * sigma_max`.
pub fn rank(a: &CMatrix, tol: &Tolerance) -> usize {
    rank_with_floor(a, 0.0, tol)
}

/// Like [`rank`], but the cutoff is taken relative to `max(sigma_max, floor)`.
///
/// Matrix powers whose true value is zero carry roundoff of size
/// `eps * ||a||^k`; passing that scale as `floor` keeps such noise from
/// being counted as rank.
pub fn rank_with_floor(a: &CMatrix, floor: f64, tol: &Tolerance) -> usize {
    let s = a.singular_values();
    let smax = s.first().copied().unwrap_or(0.0);
    let reference = smax.max(floor);
    if reference == 0.0 {
        return 0;
    }
    let cutoff = tol.rank_rel * a.rows().max(a.cols()) as f64 * reference;
    s.iter().filter(|&&x| x > cutoff).count()
}

pub fn inverse(a: &CMatrix, tol: &Tolerance) -> Result<CMatrix> {
    let n = a.ensure_square()?;
    if rank(a, tol) < n {
        return Err(Error::Singular);
    }
    a.0.clone()
        .try_inverse()
        .map(CMatrix)
        .ok_or(Error::Singular)
}

/// `max|a - b| <= eq_tol * (1 + max(||a||, ||b||))` in the max-abs-entry norm.
pub fn approx_eq(a: &CMatrix, b: &CMatrix, tol: &Tolerance) -> Result<bool> {
    a.ensure_same_shape(b)?;
    let diff = (a - b).norm_max();
    Ok(tol.negligible(diff, a.norm_max().max(b.norm_max())))
}

pub fn is_hermitian(a: &CMatrix, tol: &Tolerance) -> Result<bool> {
    a.ensure_square()?;
    approx_eq(a, &a.adjoint(), tol)
}

pub fn is_idempotent(a: &CMatrix, tol: &Tolerance) -> Result<bool> {
    a.ensure_square()?;
    approx_eq(&(a * a), a, tol)
}

/// `a^n` equal to zero at `n = dim`, with an allowance for the roundoff
/// `n * eps * ||a||_2^n` that forming the power itself introduces.
pub fn is_nilpotent(a: &CMatrix, tol: &Tolerance) -> Result<bool> {
    let n = a.ensure_square()?;
    let p = mat_pow(a, n)?;
    let roundoff = 16.0 * n as f64 * f64::EPSILON * a.norm2().powi(n as i32);
    Ok(p.norm_max() <= tol.eq_tol * (1.0 + p.norm_max()) + roundoff)
}
