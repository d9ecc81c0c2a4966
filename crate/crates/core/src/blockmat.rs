//! *-DMP decisions for 2x2 block matrices `M = [[A, B], [C, D]]` with square
//! blocks of equal size.
//!
//! Every check folds in the standing requirement that `A`, `D`, `BC` and
//! `CB` are *-DMP.

use serde::{Deserialize, Serialize};

use crate::additive::block_sum_search;
use crate::error::{Error, Result};
use crate::geninv::{drazin, star_dmp};
use crate::matcore::{is_nilpotent, rank, CMatrix, Tolerance};
use crate::verdict::{product_scale, Hypotheses, TheoremId, TheoremVerdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMatrix {
    #[serde(rename = "A")]
    pub a: CMatrix,
    #[serde(rename = "B")]
    pub b: CMatrix,
    #[serde(rename = "C")]
    pub c: CMatrix,
    #[serde(rename = "D")]
    pub d: CMatrix,
}

impl BlockMatrix {
    pub fn new(a: CMatrix, b: CMatrix, c: CMatrix, d: CMatrix) -> Result<Self> {
        let m = Self { a, b, c, d };
        m.block_size()?;
        Ok(m)
    }

    /// Common block dimension `n`.
    pub fn block_size(&self) -> Result<usize> {
        let n = self.a.ensure_square()?;
        for x in [&self.b, &self.c, &self.d] {
            self.a.ensure_same_shape(x)?;
        }
        Ok(n)
    }

    /// Splits a `2n x 2n` matrix into its four `n x n` blocks.
    pub fn split(x: &CMatrix) -> Result<Self> {
        let size = x.ensure_square()?;
        if size % 2 != 0 {
            return Err(Error::InvalidArgument(format!("{size}x{size} matrix has no n x n block split")));
        }
        let n = size / 2;
        Ok(Self {
            a: x.submatrix(0, 0, n, n),
            b: x.submatrix(0, n, n, n),
            c: x.submatrix(n, 0, n, n),
            d: x.submatrix(n, n, n, n),
        })
    }
}

pub fn assemble(m: &BlockMatrix) -> Result<CMatrix> {
    m.block_size()?;
    CMatrix::block2x2(&m.a, &m.b, &m.c, &m.d)
}

/// `(D, C, B, A)`: conjugation of `M` by the block swap `[[0, I], [I, 0]]`.
pub fn swap_conjugate(m: &BlockMatrix) -> BlockMatrix {
    BlockMatrix {
        a: m.d.clone(),
        b: m.c.clone(),
        c: m.b.clone(),
        d: m.a.clone(),
    }
}

fn preamble(m: &BlockMatrix, tol: &Tolerance) -> Result<Hypotheses> {
    m.block_size()?;
    let mut h = Hypotheses::new();
    h.star_dmp("A_star_dmp", &m.a, tol)?;
    h.star_dmp("D_star_dmp", &m.d, tol)?;
    h.star_dmp("BC_star_dmp", &(&m.b * &m.c).chop(product_scale(&[&m.b, &m.c]), tol), tol)?;
    h.star_dmp("CB_star_dmp", &(&m.c * &m.b).chop(product_scale(&[&m.b, &m.c]), tol), tol)?;
    Ok(h)
}

fn intertwine(h: &mut Hypotheses, label: &str, lhs: (&CMatrix, &CMatrix), rhs: (&CMatrix, &CMatrix), tol: &Tolerance) {
    let scale = product_scale(&[lhs.0, lhs.1]).max(product_scale(&[rhs.0, rhs.1]));
    h.equal(label, &(lhs.0 * lhs.1), &(rhs.0 * rhs.1), scale, tol);
}

fn nilpotent_product(h: &mut Hypotheses, m: &BlockMatrix, tol: &Tolerance) -> Result<()> {
    let (ad, _) = drazin(&m.a, tol)?;
    let (dd, _) = drazin(&m.d, tol)?;
    let x = &(&(&ad.drazin * &m.b) * &dd.drazin) * &m.c;
    let x = x.chop(product_scale(&[&ad.drazin, &m.b, &dd.drazin, &m.c]), tol);
    h.record("AdBDdC_norm", x.norm_max());
    h.flag("AdBDdC_nilpotent", is_nilpotent(&x, tol)?);
    Ok(())
}

fn conclude(theorem: TheoremId, h: Hypotheses, m: &BlockMatrix, tol: &Tolerance) -> Result<TheoremVerdict> {
    let side1 = star_dmp(&assemble(m)?, tol)?;
    Ok(TheoremVerdict::implication(theorem, h, side1))
}

/// `[[0, B], [C, 0]]` is *-DMP whenever `BC` and `CB` are.
pub fn lemma41_check(b: &CMatrix, c: &CMatrix, tol: &Tolerance) -> Result<TheoremVerdict> {
    let n = b.ensure_square()?;
    b.ensure_same_shape(c)?;
    let scale = product_scale(&[b, c]);
    let mut h = Hypotheses::new();
    h.star_dmp("BC_star_dmp", &(b * c).chop(scale, tol), tol)?;
    h.star_dmp("CB_star_dmp", &(c * b).chop(scale, tol), tol)?;
    let z = CMatrix::zeros(n, n);
    let q = CMatrix::block2x2(&z, b, c, &z)?;
    let conclusion = star_dmp(&q, tol)?;
    Ok(TheoremVerdict::implication(TheoremId::L41, h, conclusion))
}

fn thm42_hypotheses(m: &BlockMatrix, tol: &Tolerance) -> Result<Hypotheses> {
    let mut h = preamble(m, tol)?;
    let (a, b, c, d) = (&m.a, &m.b, &m.c, &m.d);
    let (ast, dst) = (a.adjoint(), d.adjoint());
    intertwine(&mut h, "AB=BD", (a, b), (b, d), tol);
    intertwine(&mut h, "DC=CA", (d, c), (c, a), tol);
    intertwine(&mut h, "A*B=BD*", (&ast, b), (b, &dst), tol);
    intertwine(&mut h, "D*C=CA*", (&dst, c), (c, &ast), tol);
    nilpotent_product(&mut h, m, tol)?;
    Ok(h)
}

pub fn thm42_check(m: &BlockMatrix, tol: &Tolerance) -> Result<TheoremVerdict> {
    let h = thm42_hypotheses(m, tol)?;
    conclude(TheoremId::T42, h, m, tol)
}

/// The `T4.2` check applied to `(D, C, B, A)`; the verdict is on `M` itself.
pub fn cor43_check(m: &BlockMatrix, tol: &Tolerance) -> Result<TheoremVerdict> {
    let h = thm42_hypotheses(&swap_conjugate(m), tol)?;
    conclude(TheoremId::C43, h, m, tol)
}

fn thm44_hypotheses(m: &BlockMatrix, tol: &Tolerance) -> Result<Hypotheses> {
    let mut h = preamble(m, tol)?;
    let (a, b, c, d) = (&m.a, &m.b, &m.c, &m.d);
    let bst = b.adjoint();
    intertwine(&mut h, "AB=BD", (a, b), (b, d), tol);
    intertwine(&mut h, "DC=CA", (d, c), (c, a), tol);
    intertwine(&mut h, "B*A=DB*", (&bst, a), (d, &bst), tol);
    nilpotent_product(&mut h, m, tol)?;
    // invertibility of I + Q^D P used by the argument, recorded as a rank gap
    let n = a.rows();
    let z = CMatrix::zeros(n, n);
    let p = CMatrix::block2x2(a, &z, &z, d)?;
    let q = CMatrix::block2x2(&z, b, c, &z)?;
    if let Ok((qd, _)) = drazin(&q, tol) {
        let inner = &CMatrix::identity(2 * n) + &(&qd.drazin * &p);
        h.record("I+QdP_rank_gap", (2 * n - rank(&inner, tol)) as f64);
    }
    Ok(h)
}

pub fn thm44_check(m: &BlockMatrix, tol: &Tolerance) -> Result<TheoremVerdict> {
    let h = thm44_hypotheses(m, tol)?;
    conclude(TheoremId::T44, h, m, tol)
}

/// The `T4.4` check applied to `(D, C, B, A)`; the verdict is on `M` itself.
pub fn cor45_check(m: &BlockMatrix, tol: &Tolerance) -> Result<TheoremVerdict> {
    let h = thm44_hypotheses(&swap_conjugate(m), tol)?;
    conclude(TheoremId::C45, h, m, tol)
}

fn thm46_hypotheses(m: &BlockMatrix, tol: &Tolerance) -> Result<(Hypotheses, Option<usize>)> {
    let n = m.block_size()?;
    let mut h = preamble(m, tol)?;
    let (a, b, c, d) = (&m.a, &m.b, &m.c, &m.d);
    let cst = c.adjoint();
    h.zero("BC_zero", &(b * c), product_scale(&[b, c]), tol);
    h.zero("CB_zero", &(c * b), product_scale(&[b, c]), tol);
    intertwine(&mut h, "CA=DC", (c, a), (d, c), tol);
    intertwine(&mut h, "AC*=C*D", (a, &cst), (&cst, d), tol);
    let (ad, _) = drazin(a, tol)?;
    let (dd, _) = drazin(d, tol)?;
    let lo = 1.max(ad.index).max(dd.index);
    let search = block_sum_search(a, b, d, &ad.spectral_idempotent, &dd.spectral_idempotent, lo, lo + n, tol);
    h.record("sum_residual", search.residual);
    h.flag("sums_vanish", search.witness.is_some());
    Ok((h, search.witness))
}

pub fn thm46_check(m: &BlockMatrix, tol: &Tolerance) -> Result<TheoremVerdict> {
    let (h, witness) = thm46_hypotheses(m, tol)?;
    let mut v = conclude(TheoremId::T46, h, m, tol)?;
    v.witness_m = witness;
    Ok(v)
}

/// The `T4.6` check applied to `(D, C, B, A)`; the verdict is on `M` itself.
pub fn cor47_check(m: &BlockMatrix, tol: &Tolerance) -> Result<TheoremVerdict> {
    let (h, witness) = thm46_hypotheses(&swap_conjugate(m), tol)?;
    let mut v = conclude(TheoremId::C47, h, m, tol)?;
    v.witness_m = witness;
    Ok(v)
}

/// Dispatches a block theorem by id.
pub fn check_block(theorem: TheoremId, m: &BlockMatrix, tol: &Tolerance) -> Result<TheoremVerdict> {
    match theorem {
        TheoremId::T42 => thm42_check(m, tol),
        TheoremId::C43 => cor43_check(m, tol),
        TheoremId::T44 => thm44_check(m, tol),
        TheoremId::C45 => cor45_check(m, tol),
        TheoremId::T46 => thm46_check(m, tol),
        TheoremId::C47 => cor47_check(m, tol),
        other => Err(Error::InvalidArgument(format!("{other} is not a block theorem"))),
    }
}
