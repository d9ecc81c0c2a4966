//! Generalized inverses (Moore–Penrose, group, Drazin, core, pseudo core) and
//! the projection / EP / *-DMP predicates.
//!
//! Every inverse comes with an [`InverseCertificate`] holding the residuals of
//! its defining equations, so callers never have to trust the algorithm that
//! produced it.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    approx_eq, inverse, is_hermitian, is_idempotent, is_nilpotent, mat_pow, rank,
    rank_with_floor, CMatrix, Tolerance, C64,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InverseKind {
    MoorePenrose,
    Group,
    Drazin,
    Core,
    PseudoCore,
}

/// Residuals of the defining equations of a computed inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseCertificate {
    pub kind: InverseKind,
    pub residuals: BTreeMap<String, f64>,
    pub max_residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl InverseCertificate {
    fn new(kind: InverseKind, residuals: BTreeMap<String, f64>, threshold: f64) -> Self {
        let max_residual = residuals.values().fold(0.0_f64, |m, &r| m.max(r));
        Self {
            kind,
            residuals,
            max_residual,
            threshold,
            pass: max_residual <= threshold,
        }
    }
}

/// Certification threshold `1e-7 * (1 + ||a||^max(2, k+1))`.
pub fn certification_threshold(a: &CMatrix, k: usize) -> f64 {
    1e-7 * (1.0 + a.norm_max().powi((k + 1).max(2) as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrazinResult {
    pub drazin: CMatrix,
    pub index: usize,
    /// `I - a a^D`
    pub spectral_idempotent: CMatrix,
}

/// Outcome of the three checked characterizations of *-DMP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarDMPReport {
    /// Drazin inverse exists and `a^π` is an orthogonal projection.
    pub char2: bool,
    /// Pseudo core inverse exists and equals the Drazin inverse.
    pub char3: bool,
    /// The orthogonal projection `e` onto `ker a^k` commutes with `a`,
    /// `a + e` is invertible and `a e` is nilpotent.
    pub char5: bool,
    pub verdict: bool,
    pub consistent: bool,
    pub index: usize,
}

fn residual(lhs: &CMatrix, rhs: &CMatrix) -> f64 {
    (lhs - rhs).norm_max()
}

/// Smallest `k` with `rank(a^k) = rank(a^{k+1})`, `a^0 = I`.
pub fn index(a: &CMatrix, tol: &Tolerance) -> Result<usize> {
    let n = a.ensure_square()?;
    let s = a.norm2();
    let mut power = CMatrix::identity(n);
    let mut prev = n;
    for k in 0..=n {
        let next_power = &power * a;
        let floor = s.powi(k as i32 + 1);
        let r = rank_with_floor(&next_power, floor, tol);
        if r == prev {
            return Ok(k);
        }
        prev = r;
        power = next_power;
    }
    Ok(n)
}

/// Rank of `a^k` measured against the roundoff floor `||a||_2^k`.
fn power_rank(a: &CMatrix, ak: &CMatrix, k: usize, tol: &Tolerance) -> usize {
    rank_with_floor(ak, a.norm2().powi(k as i32), tol)
}

/// Pseudoinverse keeping exactly the `r` largest singular values.
fn pinv_truncated(a: &CMatrix, r: usize) -> CMatrix {
    let svd = a.svd();
    let mut out = DMatrix::<C64>::zeros(a.cols(), a.rows());
    for (i, &s) in svd.s.iter().enumerate().take(r) {
        if s == 0.0 {
            continue;
        }
        out += (svd.v.column(i) * svd.u.column(i).adjoint()) * C64::new(1.0 / s, 0.0);
    }
    CMatrix::from_inner(out)
}

fn penrose_certificate(a: &CMatrix, x: &CMatrix) -> InverseCertificate {
    let ax = a * x;
    let xa = x * a;
    let mut res = BTreeMap::new();
    res.insert("axa=a".to_string(), residual(&(&ax * a), a));
    res.insert("xax=x".to_string(), residual(&(&xa * x), x));
    res.insert("(ax)*=ax".to_string(), residual(&ax.adjoint(), &ax));
    res.insert("(xa)*=xa".to_string(), residual(&xa.adjoint(), &xa));
    InverseCertificate::new(InverseKind::MoorePenrose, res, certification_threshold(a, 1))
}

/// Moore–Penrose inverse via the singular value decomposition, rank cut at [`rank`].
pub fn moore_penrose(a: &CMatrix, tol: &Tolerance) -> (CMatrix, InverseCertificate) {
    let r = rank(a, tol);
    let x = pinv_truncated(a, r);
    let cert = penrose_certificate(a, &x);
    (x, cert)
}

fn drazin_certificate(a: &CMatrix, x: &CMatrix, k: usize) -> Result<InverseCertificate> {
    let ak = mat_pow(a, k)?;
    let ak1 = &ak * a;
    let mut res = BTreeMap::new();
    res.insert("xa^(k+1)=a^k".to_string(), residual(&(x * &ak1), &ak));
    res.insert("ax^2=x".to_string(), residual(&(a * &(x * x)), x));
    res.insert("ax=xa".to_string(), residual(&(a * x), &(x * a)));
    Ok(InverseCertificate::new(
        InverseKind::Drazin,
        res,
        certification_threshold(a, k),
    ))
}

/// Certificate of the three Drazin equations for a candidate `x`, at `k = index(a)`.
pub fn certify_drazin(a: &CMatrix, x: &CMatrix, tol: &Tolerance) -> Result<InverseCertificate> {
    a.ensure_square()?;
    a.ensure_same_shape(x)?;
    let k = index(a, tol)?;
    drazin_certificate(a, x, k)
}

fn drazin_result(a: &CMatrix, x: CMatrix, k: usize) -> DrazinResult {
    let n = a.rows();
    let pi = if k == 0 {
        CMatrix::zeros(n, n)
    } else {
        &CMatrix::identity(n) - &(a * &x)
    };
    DrazinResult {
        drazin: x,
        index: k,
        spectral_idempotent: pi,
    }
}

/// `a^k (a^{2k+1})^† a^k`, with the pseudoinverse truncated at `rank(a^k)`.
pub fn drazin_cline(a: &CMatrix, tol: &Tolerance) -> Result<(DrazinResult, InverseCertificate)> {
    let n = a.ensure_square()?;
    let k = index(a, tol)?;
    if k == 0 {
        let x = inverse(a, tol)?;
        let cert = drazin_certificate(a, &x, 0)?;
        return Ok((drazin_result(a, x, 0), cert));
    }
    let ak = mat_pow(a, k)?;
    let r = power_rank(a, &ak, k, tol);
    let x = if r == 0 {
        CMatrix::zeros(n, n)
    } else {
        let big = mat_pow(a, 2 * k + 1)?;
        &(&ak * &pinv_truncated(&big, r)) * &ak
    };
    let cert = drazin_certificate(a, &x, k)?;
    Ok((drazin_result(a, x, k), cert))
}

/// Drazin inverse from a reordered complex Schur form `a = Q [[T11, T12], [0, T22]] Q*`
/// with the `rank(a^k)` largest eigenvalues in `T11` and `T22` nilpotent.
pub fn drazin_schur(a: &CMatrix, tol: &Tolerance) -> Result<(DrazinResult, InverseCertificate)> {
    let n = a.ensure_square()?;
    let k = index(a, tol)?;
    let ak = mat_pow(a, k)?;
    let r = if k == 0 { n } else { power_rank(a, &ak, k, tol) };
    let x = if r == 0 {
        CMatrix::zeros(n, n)
    } else if r == n {
        inverse(a, tol)?
    } else {
        let (q, t) = ordered_schur(a, r);
        let t11 = t.submatrix(0, 0, r, r);
        let t12 = t.submatrix(0, r, r, n - r);
        let t22 = t.submatrix(r, r, n - r, n - r);
        let t11_inv = inverse(&t11, tol).map_err(|_| {
            Error::NumericalFailure("leading Schur block is singular".to_string())
        })?;
        // Drazin inverse of [[T11, T12], [0, N]] with T11 invertible and N nilpotent
        let mut z = CMatrix::zeros(r, n - r);
        let mut left = &t11_inv * &t11_inv;
        let mut right = CMatrix::identity(n - r);
        for _ in 0..(n - r) {
            z = &z + &(&(&left * &t12) * &right);
            left = &left * &t11_inv;
            right = &right * &t22;
        }
        let zero_lower = CMatrix::zeros(n - r, r);
        let zero_corner = CMatrix::zeros(n - r, n - r);
        let inner = CMatrix::block2x2(&t11_inv, &z, &zero_lower, &zero_corner)?;
        &(&q * &inner) * &q.adjoint()
    };
    let cert = drazin_certificate(a, &x, k)?;
    Ok((drazin_result(a, x, k), cert))
}

/// Complex Schur form with the `r` eigenvalues of largest modulus moved to the
/// leading block by adjacent Givens swaps.
fn ordered_schur(a: &CMatrix, r: usize) -> (CMatrix, CMatrix) {
    let n = a.rows();
    let schur = a.inner().clone().schur();
    let (mut q, mut t) = schur.unpack();
    let mut moduli: Vec<(usize, f64)> = (0..n).map(|i| (i, t[(i, i)].norm())).collect();
    moduli.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let mut core = vec![false; n];
    for &(i, _) in moduli.iter().take(r) {
        core[i] = true;
    }
    // bubble core eigenvalues to the front
    loop {
        let mut swapped = false;
        for i in 0..n - 1 {
            if !core[i] && core[i + 1] {
                swap_adjacent(&mut q, &mut t, i);
                core.swap(i, i + 1);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    // clear roundoff below the diagonal
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    (CMatrix::from_inner(q), CMatrix::from_inner(t))
}

/// Exchanges the diagonal entries `t[i,i]` and `t[i+1,i+1]` of an upper
/// triangular `t`, updating `q` so that `q t q*` is unchanged.
fn swap_adjacent(q: &mut DMatrix<C64>, t: &mut DMatrix<C64>, i: usize) {
    let n = t.nrows();
    let t11 = t[(i, i)];
    let t12 = t[(i, i + 1)];
    let t22 = t[(i + 1, i + 1)];
    // eigenvector of the 2x2 block for t22
    let x = [t12, t22 - t11];
    let norm = (x[0].norm_sqr() + x[1].norm_sqr()).sqrt();
    if norm == 0.0 {
        return;
    }
    let c = x[0] / norm;
    let s = x[1] / norm;
    // G = [[c, -conj(s)], [s, conj(c)]], first column is the eigenvector
    let g = [[c, -s.conj()], [s, c.conj()]];
    // t <- G* t on rows i, i+1
    for j in 0..n {
        let a0 = t[(i, j)];
        let a1 = t[(i + 1, j)];
        t[(i, j)] = g[0][0].conj() * a0 + g[1][0].conj() * a1;
        t[(i + 1, j)] = g[0][1].conj() * a0 + g[1][1].conj() * a1;
    }
    // t <- t G, q <- q G on columns i, i+1
    for m in [&mut *t, &mut *q] {
        for row in 0..n {
            let a0 = m[(row, i)];
            let a1 = m[(row, i + 1)];
            m[(row, i)] = a0 * g[0][0] + a1 * g[1][0];
            m[(row, i + 1)] = a0 * g[0][1] + a1 * g[1][1];
        }
    }
    t[(i + 1, i)] = C64::new(0.0, 0.0);
}

/// Drazin inverse: the Cline formula, certified, with the Schur split as fallback.
pub fn drazin(a: &CMatrix, tol: &Tolerance) -> Result<(DrazinResult, InverseCertificate)> {
    let cline = drazin_cline(a, tol).ok().filter(|(_, c)| c.pass);
    if let Some((res, cert)) = &cline {
        // a^{2k+1} squares away small core eigenvalues; below the equality
        // tolerance the formula is as good as it gets
        let tight = tol.eq_tol * (1.0 + a.norm_max().powi((res.index + 1).max(2) as i32));
        if cert.max_residual <= tight {
            return Ok((res.clone(), cert.clone()));
        }
    }
    let schur = drazin_schur(a, tol).ok().filter(|(_, c)| c.pass);
    match (cline, schur) {
        (Some(c), Some(s)) => Ok(if s.1.max_residual < c.1.max_residual { s } else { c }),
        (Some(c), None) => Ok(c),
        (None, Some(s)) => Ok(s),
        (None, None) => {
            let detail = match drazin_schur(a, tol) {
                Ok((_, c)) => format!("schur max residual {:.3e}", c.max_residual),
                Err(e) => e.to_string(),
            };
            Err(Error::NumericalFailure(format!("Drazin certificate failed on both routes ({detail})")))
        }
    }
}

pub fn group_inverse(a: &CMatrix, tol: &Tolerance) -> Result<(CMatrix, InverseCertificate)> {
    a.ensure_square()?;
    let k = index(a, tol)?;
    if k > 1 {
        return Err(Error::NoGroupInverse { index: k });
    }
    let (res, mut cert) = drazin(a, tol)?;
    cert.kind = InverseKind::Group;
    Ok((res.drazin, cert))
}

fn stack_columns(x: &CMatrix, y: &CMatrix) -> CMatrix {
    let mut m = DMatrix::zeros(x.rows(), x.cols() + y.cols());
    m.view_mut((0, 0), x.shape()).copy_from(x.inner());
    m.view_mut((0, x.cols()), y.shape()).copy_from(y.inner());
    CMatrix::from_inner(m)
}

/// Core inverse `a^# a a^†`, defined for index at most one.
pub fn core_inverse(a: &CMatrix, tol: &Tolerance) -> Result<(CMatrix, InverseCertificate)> {
    a.ensure_square()?;
    let k = index(a, tol)?;
    if k > 1 {
        return Err(Error::NoCoreInverse { index: k });
    }
    let (g, _) = group_inverse(a, tol)?;
    let (mp, _) = moore_penrose(a, tol);
    let x = &(&g * a) * &mp;

    let ax = a * &x;
    let mut res = BTreeMap::new();
    res.insert("axa=a".to_string(), residual(&(&ax * a), a));
    res.insert("ax^2=x".to_string(), residual(&(a * &(&x * &x)), &x));
    res.insert("(ax)*=ax".to_string(), residual(&ax.adjoint(), &ax));
    res.insert("xa^2=a".to_string(), residual(&(&x * &(a * a)), a));
    // xA = aA and Ax = Aa* as rank equalities of column and row spaces
    let (rx, ra) = (rank(&x, tol), rank(a, tol));
    let col = rank(&stack_columns(&x, a), tol);
    let row = rank(&stack_columns(&x.adjoint(), a), tol);
    let col_gap = col.abs_diff(rx).max(rx.abs_diff(ra)) as f64;
    let row_gap = row.abs_diff(rx).max(rx.abs_diff(ra)) as f64;
    res.insert("range(x)=range(a)".to_string(), col_gap);
    res.insert("range(x*)=range(a)".to_string(), row_gap);
    let cert = InverseCertificate::new(InverseKind::Core, res, certification_threshold(a, k));
    Ok((x, cert))
}

fn pseudo_core_certificate(a: &CMatrix, x: &CMatrix, k: usize) -> Result<InverseCertificate> {
    let ak = mat_pow(a, k)?;
    let ax = a * x;
    let mut res = BTreeMap::new();
    res.insert("xa^(k+1)=a^k".to_string(), residual(&(x * &(&ak * a)), &ak));
    res.insert("ax^2=x".to_string(), residual(&(&ax * x), x));
    res.insert("(ax)*=ax".to_string(), residual(&ax.adjoint(), &ax));
    Ok(InverseCertificate::new(
        InverseKind::PseudoCore,
        res,
        certification_threshold(a, k),
    ))
}

fn pseudo_core_from(
    a: &CMatrix,
    dz: &DrazinResult,
    tol: &Tolerance,
) -> Result<(CMatrix, InverseCertificate)> {
    let m = dz.index;
    let am = mat_pow(a, m)?;
    let r = if m == 0 {
        a.rows()
    } else {
        power_rank(a, &am, m, tol)
    };
    let x = &(&dz.drazin * &am) * &pinv_truncated(&am, r);
    let cert = pseudo_core_certificate(a, &x, m)?;
    if !cert.pass {
        return Err(Error::NumericalFailure(format!(
            "pseudo core certificate failed (max residual {:.3e})",
            cert.max_residual
        )));
    }
    Ok((x, cert))
}

/// Pseudo core inverse `a^D a^m (a^m)^†` with `m` the index of `a`.
pub fn pseudo_core(a: &CMatrix, tol: &Tolerance) -> Result<(CMatrix, InverseCertificate)> {
    a.ensure_square()?;
    let (dz, _) = drazin(a, tol)?;
    pseudo_core_from(a, &dz, tol)
}

/// Hermitian idempotent.
pub fn is_projection(e: &CMatrix, tol: &Tolerance) -> Result<bool> {
    Ok(is_idempotent(e, tol)? && is_hermitian(e, tol)?)
}

/// Group invertible with `a a^#` Hermitian.
pub fn is_ep(a: &CMatrix, tol: &Tolerance) -> Result<bool> {
    match group_inverse(a, tol) {
        Ok((g, _)) => is_hermitian(&(a * &g), tol),
        Err(Error::NoGroupInverse { .. }) => Ok(false),
        Err(Error::NumericalFailure(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Orthogonal projection onto `ker a^k`, built from singular vectors only.
fn kernel_projection(a: &CMatrix, k: usize, tol: &Tolerance) -> Result<CMatrix> {
    let n = a.rows();
    let ak = mat_pow(a, k)?;
    let r = power_rank(a, &ak, k, tol);
    let svd = ak.svd();
    let mut e = DMatrix::<C64>::zeros(n, n);
    for i in r..n {
        let v = svd.v.column(i);
        e += v * v.adjoint();
    }
    Ok(CMatrix::from_inner(e))
}

fn char5(a: &CMatrix, k: usize, tol: &Tolerance) -> Result<bool> {
    let n = a.rows();
    let e = kernel_projection(a, k.max(1), tol)?;
    if !is_projection(&e, tol)? {
        return Ok(false);
    }
    let ae = a * &e;
    let ea = &e * a;
    if !approx_eq(&ae, &ea, tol)? {
        return Ok(false);
    }
    if rank(&(a + &e), tol) < n {
        return Ok(false);
    }
    is_nilpotent(&ae, tol)
}

/// Evaluates three independent characterizations of *-DMP and cross-checks them.
pub fn is_star_dmp(a: &CMatrix, tol: &Tolerance) -> Result<StarDMPReport> {
    a.ensure_square()?;
    let k = index(a, tol)?;
    let (char2, char3) = match drazin(a, tol) {
        Ok((dz, _)) => {
            let c2 = is_projection(&dz.spectral_idempotent, tol)?;
            let c3 = match pseudo_core_from(a, &dz, tol) {
                Ok((pc, _)) => approx_eq(&pc, &dz.drazin, tol)?,
                Err(Error::NumericalFailure(_)) => false,
                Err(e) => return Err(e),
            };
            (c2, c3)
        }
        Err(Error::NumericalFailure(_)) => (false, false),
        Err(e) => return Err(e),
    };
    let c5 = char5(a, k, tol)?;
    let consistent = char2 == char3 && char3 == c5;
    Ok(StarDMPReport {
        char2,
        char3,
        char5: c5,
        verdict: char2,
        consistent,
        index: k,
    })
}

/// Shorthand for the verdict of [`is_star_dmp`].
pub fn star_dmp(a: &CMatrix, tol: &Tolerance) -> Result<bool> {
    Ok(is_star_dmp(a, tol)?.verdict)
}
