//! Seeded generators for matrices and instances that satisfy each theorem's
//! hypotheses by construction, plus near-miss instances that break one.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64`. Attempt `j` of
//! a generator runs on [`derive_seed`]`(seed, j)`; attempt 0 uses the seed
//! itself. Every emitted instance has had its hypotheses re-checked.
//!
//! Most constructions work in a random unitary frame `U`: the structure is
//! laid out block by block and then conjugated by `U`.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::additive::{
    cor24_verify, cor34_verify, lemma21_verify, lemma22_check, lemma31_verify, thm23_verify, thm32_verify,
    thm33_verify,
};
use crate::verdict::TheoremVerdict;
use crate::blockmat::{check_block, lemma41_check, swap_conjugate, BlockMatrix};
use crate::error::{Error, Result};
use crate::geninv::{is_ep, star_dmp};
use crate::matcore::{singular_values_of, CMatrix, Tolerance, C64};
use crate::verdict::TheoremId;

type Dm = DMatrix<C64>;

const MAX_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub dim: usize,
    pub core_rank: usize,
    pub seed: u64,
    pub magnitude: f64,
}

impl GenSpec {
    pub fn new(dim: usize, core_rank: usize, seed: u64) -> Result<Self> {
        let spec = Self {
            dim,
            core_rank,
            seed,
            magnitude: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_magnitude(mut self, magnitude: f64) -> Result<Self> {
        self.magnitude = magnitude;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("dim must be positive".into()));
        }
        if self.core_rank > self.dim {
            return Err(Error::InvalidArgument(format!(
                "core_rank {} exceeds dim {}",
                self.core_rank, self.dim
            )));
        }
        if !(self.magnitude.is_finite() && self.magnitude > 0.0) {
            return Err(Error::InvalidArgument("magnitude must be positive and finite".into()));
        }
        Ok(())
    }

    fn reseed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }

    fn with_core_rank(mut self, r: usize) -> Self {
        self.core_rank = r.min(self.dim);
        self
    }
}

/// SplitMix64 step; used to derive per-instance and per-attempt seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `i`-th derived stream of `base`. Stream 0 is `base` itself.
pub fn derive_seed(base: u64, i: u64) -> u64 {
    if i == 0 {
        base
    } else {
        splitmix64(base ^ splitmix64(i))
    }
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs `build` on successive derived seeds until `accept` holds.
fn retry<T>(
    spec: &GenSpec,
    what: &str,
    mut build: impl FnMut(&mut ChaCha8Rng) -> Result<Option<T>>,
    mut accept: impl FnMut(&T) -> Result<bool>,
) -> Result<T> {
    spec.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = rng_for(derive_seed(spec.seed, attempt as u64));
        let Some(candidate) = build(&mut rng)? else {
            continue;
        };
        match accept(&candidate) {
            Ok(true) => return Ok(candidate),
            Ok(false) | Err(Error::NumericalFailure(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Err(Error::Generation {
        attempts: MAX_ATTEMPTS,
        reason: format!("{what}: no candidate passed hypothesis re-verification"),
    })
}

// ---------------------------------------------------------------------------
// building blocks on raw nalgebra matrices (zero-size blocks allowed)

fn entry(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn phase(rng: &mut ChaCha8Rng) -> C64 {
    C64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))
}

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize, mag: f64) -> Dm {
    Dm::from_fn(rows, cols, |_, _| entry(rng) * mag)
}

fn eye(n: usize) -> Dm {
    Dm::identity(n, n)
}

fn zeros(r: usize, c: usize) -> Dm {
    Dm::zeros(r, c)
}

fn sigma_min(m: &Dm) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    singular_values_of(m).last().copied().unwrap_or(0.0)
}

fn unitary(rng: &mut ChaCha8Rng, n: usize) -> Dm {
    if n == 0 {
        return zeros(0, 0);
    }
    loop {
        let g = random(rng, n, n, 1.0);
        if sigma_min(&g) > 1e-3 {
            return g.qr().q();
        }
    }
}

/// Well-conditioned invertible block: `sigma_min >= 0.1 * mag`.
fn invertible(rng: &mut ChaCha8Rng, n: usize, mag: f64) -> Dm {
    loop {
        let mut t = random(rng, n, n, 0.3 * mag);
        for i in 0..n {
            t[(i, i)] += phase(rng) * rng.gen_range(0.6..1.4) * mag;
        }
        if sigma_min(&t) >= 0.1 * mag {
            return t;
        }
    }
}

/// Strictly upper triangular with a full superdiagonal, nilpotent of index `n`.
fn nilpotent(rng: &mut ChaCha8Rng, n: usize, mag: f64) -> Dm {
    let mut m = zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            m[(i, j)] = if j == i + 1 {
                phase(rng) * rng.gen_range(0.5..1.0) * mag
            } else {
                entry(rng) * 0.5 * mag
            };
        }
    }
    m
}

/// Direct sum of nilpotent chains of length at most `max_chain`. Keeps the
/// index of block matrices built from it low enough to resolve numerically.
fn short_nilpotent(rng: &mut ChaCha8Rng, n: usize, mag: f64, max_chain: usize) -> Dm {
    let mut chains = Vec::new();
    let mut left = n;
    while left > 0 {
        let k = rng.gen_range(1..=left.min(max_chain));
        left -= k;
        chains.push(nilpotent(rng, k, mag));
    }
    block_diag(&chains.iter().collect::<Vec<_>>())
}

fn block_diag(blocks: &[&Dm]) -> Dm {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(n, n);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, at), (b.nrows(), b.ncols())).copy_from(b);
        at += b.nrows();
    }
    out
}

/// Places `block` at block position `(i, j)` of a matrix partitioned by `sizes`.
fn place(out: &mut Dm, sizes: &[usize], i: usize, j: usize, block: &Dm) {
    let r0: usize = sizes[..i].iter().sum();
    let c0: usize = sizes[..j].iter().sum();
    out.view_mut((r0, c0), (block.nrows(), block.ncols())).copy_from(block);
}

fn conj(u: &Dm, x: &Dm) -> Dm {
    u * x * u.adjoint()
}

/// Core-nilpotent *-DMP block `V diag(T, N) V*` with spectral data.
struct DmpBlock {
    m: Dm,
    /// `V diag(I, 0) V*`: the orthogonal projector onto the core part.
    core_proj: Dm,
}

fn star_dmp_block(rng: &mut ChaCha8Rng, n: usize, r: usize, mag: f64) -> DmpBlock {
    let v = unitary(rng, n);
    let t = invertible(rng, r, mag);
    let nil = nilpotent(rng, n - r, mag);
    DmpBlock {
        m: conj(&v, &block_diag(&[&t, &nil])),
        core_proj: conj(&v, &block_diag(&[&eye(r), &zeros(n - r, n - r)])),
    }
}

fn random_star_dmp_block(rng: &mut ChaCha8Rng, n: usize, mag: f64) -> DmpBlock {
    let r = rng.gen_range(0..=n);
    star_dmp_block(rng, n, r, mag)
}

fn ep_block(rng: &mut ChaCha8Rng, n: usize, r: usize, mag: f64) -> DmpBlock {
    let v = unitary(rng, n);
    let t = invertible(rng, r, mag);
    DmpBlock {
        m: conj(&v, &block_diag(&[&t, &zeros(n - r, n - r)])),
        core_proj: conj(&v, &block_diag(&[&eye(r), &zeros(n - r, n - r)])),
    }
}

/// `V [[T, X], [0, 0]] V*` with `X != 0`: index 1, oblique spectral idempotent.
/// Needs `n >= 2`; `coupling` scales `X`.
fn non_star_dmp_block(rng: &mut ChaCha8Rng, n: usize, mag: f64, coupling: f64) -> Dm {
    debug_assert!(n >= 2);
    let r = rng.gen_range(1..n);
    let v = unitary(rng, n);
    let mut m = zeros(n, n);
    let sizes = [r, n - r];
    place(&mut m, &sizes, 0, 0, &invertible(rng, r, mag));
    let mut x = random(rng, r, n - r, mag);
    x[(0, 0)] += phase(rng) * mag;
    place(&mut m, &sizes, 0, 1, &(x * C64::new(coupling, 0.0)));
    conj(&v, &m)
}

fn wrap(m: Dm) -> CMatrix {
    CMatrix::from_inner(m)
}

/// Random split of `n` into `parts` nonnegative sizes.
fn split(rng: &mut ChaCha8Rng, n: usize, parts: usize) -> Vec<usize> {
    let mut cuts: Vec<usize> = (0..parts - 1).map(|_| rng.gen_range(0..=n)).collect();
    cuts.sort_unstable();
    let mut sizes = Vec::with_capacity(parts);
    let mut prev = 0;
    for c in cuts {
        sizes.push(c - prev);
        prev = c;
    }
    sizes.push(n - prev);
    sizes
}

// ---------------------------------------------------------------------------
// single matrices

/// `U diag(T, N) U*` with `T` invertible of size `core_rank`, `N` nilpotent.
pub fn gen_star_dmp(spec: &GenSpec) -> Result<CMatrix> {
    let tol = Tolerance::default();
    retry(
        spec,
        "star-DMP matrix",
        |rng| Ok(Some(wrap(star_dmp_block(rng, spec.dim, spec.core_rank, spec.magnitude).m))),
        |a| star_dmp(a, &tol),
    )
}

/// `U diag(T, 0) U*` with `T` invertible of size `core_rank`.
pub fn gen_ep(spec: &GenSpec) -> Result<CMatrix> {
    let tol = Tolerance::default();
    retry(
        spec,
        "EP matrix",
        |rng| Ok(Some(wrap(ep_block(rng, spec.dim, spec.core_rank, spec.magnitude).m))),
        |a| is_ep(a, &tol),
    )
}

/// `S diag(T, N) S^{-1}` with a random (non-unitary) similarity `S`. Arbitrary
/// index, generally not *-DMP. With `nilpotent_part == false`, `N = 0` and the
/// result is a similarity of `diag(T, 0)`; with `T = I` as well, an idempotent.
pub fn gen_similar(spec: &GenSpec, nilpotent_part: bool, idempotent: bool) -> Result<CMatrix> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed);
    let (n, r, mag) = (spec.dim, spec.core_rank, spec.magnitude);
    let s = invertible(&mut rng, n, 1.0);
    let s_inv = s.clone().try_inverse().ok_or(Error::Singular)?;
    let t = if idempotent { eye(r) } else { invertible(&mut rng, r, mag) };
    let nil = if nilpotent_part {
        nilpotent(&mut rng, n - r, mag)
    } else {
        zeros(n - r, n - r)
    };
    Ok(wrap(&s * block_diag(&[&t, &nil]) * s_inv))
}

/// Unrestricted matrices for fuzzing: dense, low-rank products, small
/// integer patterns and scaled nilpotent-plus-core mixtures, chosen by seed.
pub fn gen_unrestricted(spec: &GenSpec) -> Result<CMatrix> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed);
    let (n, mag) = (spec.dim, spec.magnitude);
    let m = match rng.gen_range(0..4) {
        0 => random(&mut rng, n, n, mag),
        1 => {
            let k = rng.gen_range(1..=n);
            random(&mut rng, n, k, mag) * random(&mut rng, k, n, 1.0)
        }
        2 => Dm::from_fn(n, n, |_, _| C64::new(f64::from(rng.gen_range(-1i8..=1)) * mag, 0.0)),
        _ => {
            let s = spec.reseed(rng.gen());
            return gen_similar(&s.with_core_rank(rng.gen_range(0..=n)), rng.gen_bool(0.7), rng.gen_bool(0.2));
        }
    };
    Ok(wrap(m))
}

// ---------------------------------------------------------------------------
// pairs

/// `a = U diag(A1, 0, 0) U*`, `b = U diag(0, B2, 0) U*` on disjoint blocks.
pub fn gen_lemma21_pair(spec: &GenSpec) -> Result<(CMatrix, CMatrix)> {
    if spec.dim < 2 {
        return Err(Error::InvalidArgument("L2.1 pairs need dim >= 2".into()));
    }
    let tol = Tolerance::default();
    retry(
        spec,
        "L2.1 pair",
        |rng| Ok(Some(lemma21_raw(rng, spec, 0.0, None))),
        |(a, b)| Ok(lemma21_verify(a, b, &tol)?.hypotheses_hold),
    )
}

/// Random sizes summing to `n` with the given per-block minimums.
fn sizes_with_minimum(rng: &mut ChaCha8Rng, n: usize, min: &[usize]) -> Vec<usize> {
    let spare = n - min.iter().sum::<usize>();
    split(rng, spare, min.len()).iter().zip(min).map(|(s, m)| s + m).collect()
}

fn lemma21_raw(rng: &mut ChaCha8Rng, spec: &GenSpec, eps: f64, broken: Option<&str>) -> (CMatrix, CMatrix) {
    let (n, mag) = (spec.dim, spec.magnitude);
    let min = match broken {
        Some("ba_zero") => [1, 1, 1],
        Some("a_star_dmp") => [2, 1, 0],
        Some("b_star_dmp") => [1, 2, 0],
        _ => [1, 1, 0],
    };
    let sizes = sizes_with_minimum(rng, n, &min);
    let u = unitary(rng, n);
    let a1 = if broken == Some("a_star_dmp") {
        non_star_dmp_block(rng, sizes[0], mag, eps)
    } else if broken == Some("ba_zero") {
        // the coupling below must survive multiplication by a1
        invertible(rng, sizes[0], mag)
    } else {
        random_star_dmp_block(rng, sizes[0], mag).m
    };
    let b2 = if broken == Some("b_star_dmp") {
        non_star_dmp_block(rng, sizes[1], mag, eps)
    } else {
        random_star_dmp_block(rng, sizes[1], mag).m
    };
    let mut a = zeros(n, n);
    let mut b = zeros(n, n);
    place(&mut a, &sizes, 0, 0, &a1);
    place(&mut b, &sizes, 1, 1, &b2);
    if broken == Some("ba_zero") {
        place(&mut b, &sizes, 2, 0, &random(rng, sizes[2], sizes[0], mag * eps));
    }
    (wrap(conj(&u, &a)), wrap(conj(&u, &b)))
}

/// Commuting, *-commuting pair of *-DMP matrices. `a` is block diagonal in a
/// unitary frame with blocks `lambda I` (total size `core_rank`), `0` and a
/// nilpotent `N`; `b` carries an arbitrary block against each `lambda I`,
/// a *-DMP block against `0` and `mu I` against `N`.
pub fn gen_thm32_pair(spec: &GenSpec) -> Result<(CMatrix, CMatrix)> {
    let tol = Tolerance::default();
    retry(
        spec,
        "commuting pair",
        |rng| Ok(Some(thm32_raw(rng, spec, 0.0, None))),
        |(a, b)| Ok(thm32_verify(a, b, &tol)?.hypotheses_hold),
    )
}

fn thm32_raw(rng: &mut ChaCha8Rng, spec: &GenSpec, eps: f64, broken: Option<&str>) -> (CMatrix, CMatrix) {
    let (n, mag) = (spec.dim, spec.magnitude);
    let mut a_blocks = Vec::new();
    let mut b_blocks = Vec::new();
    // scalar blocks fill the core
    let mut left = spec.core_rank;
    while left > 0 {
        let k = rng.gen_range(1..=left.min(3));
        left -= k;
        let lambda = phase(rng) * rng.gen_range(0.5..1.5) * mag;
        let bj = match rng.gen_range(0..4) {
            0 if k >= 2 => {
                // a + b = X restricted here is not *-DMP; b = X - lambda I must stay invertible
                non_star_dmp_block(rng, k, mag, 1.0) - eye(k) * lambda
            }
            1 => -eye(k) * lambda,
            _ => random_star_dmp_block(rng, k, mag).m,
        };
        a_blocks.push(eye(k) * lambda);
        b_blocks.push(bj);
    }
    // the perturbed block needs size 2; callers keep core_rank <= dim - 2
    let min = match broken {
        Some("b_star_dmp") => [2, 0],
        Some("a_star_dmp") => [0, 2],
        _ => [0, 0],
    };
    let rest = sizes_with_minimum(rng, n - spec.core_rank, &min);
    let (z, l) = (rest[0], rest[1]);
    if z > 0 {
        a_blocks.push(zeros(z, z));
        b_blocks.push(if broken == Some("b_star_dmp") {
            non_star_dmp_block(rng, z, mag, eps)
        } else {
            random_star_dmp_block(rng, z, mag).m
        });
    }
    if l > 0 {
        let mu = if rng.gen_bool(0.25) && broken.is_none() {
            C64::new(0.0, 0.0)
        } else {
            phase(rng) * rng.gen_range(0.5..1.5) * mag
        };
        a_blocks.push(if broken == Some("a_star_dmp") {
            non_star_dmp_block(rng, l, mag, eps)
        } else {
            nilpotent(rng, l, mag)
        });
        b_blocks.push(eye(l) * mu);
    }
    let u = unitary(rng, n);
    let a = block_diag(&a_blocks.iter().collect::<Vec<_>>());
    let b = block_diag(&b_blocks.iter().collect::<Vec<_>>());
    (wrap(conj(&u, &a)), wrap(conj(&u, &b)))
}

/// Frame `a = diag(A1, N', 0)` with `A1` invertible of size `core_rank` and
/// `b = [[W - A1, B2a, B2b], [0, mu I, 0], [0, 0, B4]]`. The variant for the
/// orthogonal theorem uses `mu = 0`, `B2a = 0`; the EP variant drops `N'`.
struct PerturbFrame {
    commuting: bool,
    ep: bool,
}

fn w_block(rng: &mut ChaCha8Rng, r: usize, mag: f64, ep: bool) -> (Dm, Dm) {
    // returns W and a projector whose range the coupling should live in
    let mode = if r >= 2 { rng.gen_range(0..4) } else { rng.gen_range(0..3) };
    let full = eye(r);
    match mode {
        0 => (invertible(rng, r, mag), full),
        1 | 2 => {
            let k = rng.gen_range(0..r.max(1));
            let blk = if ep { ep_block(rng, r, k, mag) } else { star_dmp_block(rng, r, k, mag) };
            if mode == 1 {
                (blk.m, blk.core_proj)
            } else {
                (blk.m, full)
            }
        }
        _ => (non_star_dmp_block(rng, r, mag, 1.0), full),
    }
}

fn perturb_raw(
    rng: &mut ChaCha8Rng,
    spec: &GenSpec,
    frame: &PerturbFrame,
    eps: f64,
    broken: Option<&str>,
) -> Option<(CMatrix, CMatrix)> {
    let (n, mag) = (spec.dim, spec.magnitude);
    let r = spec.core_rank;
    let rest = split(rng, n - r, 2);
    let (mut l1, mut l2) = (rest[0], rest[1]);
    if frame.ep {
        l2 += l1;
        l1 = 0;
    }
    if broken.is_some() && (l1 == 0 || r == 0) {
        return None;
    }
    let sizes = [r, l1, l2];
    let a1 = invertible(rng, r, mag);
    let (w, range) = w_block(rng, r, mag, frame.ep);
    let b1 = &w - &a1;
    if sigma_min(&b1) < 0.05 * mag {
        return None;
    }
    let b4 = if frame.ep {
        let k = rng.gen_range(0..=l2);
        ep_block(rng, l2, k, mag)
    } else {
        random_star_dmp_block(rng, l2, mag)
    };
    let mut a = zeros(n, n);
    let mut b = zeros(n, n);
    place(&mut a, &sizes, 0, 0, &a1);
    place(&mut a, &sizes, 1, 1, &nilpotent(rng, l1, mag));
    place(&mut b, &sizes, 0, 0, &b1);
    let b2b = &range * random(rng, r, l2, mag) * &b4.core_proj;
    place(&mut b, &sizes, 0, 2, &b2b);
    place(&mut b, &sizes, 2, 2, &b4.m);
    let mu = if frame.commuting && rng.gen_bool(0.8) {
        Some(phase(rng) * rng.gen_range(0.5..1.5) * mag)
    } else {
        None
    };
    if let Some(mu) = mu {
        place(&mut b, &sizes, 1, 1, &(eye(l1) * mu));
        place(&mut b, &sizes, 0, 1, &random(rng, r, l1, mag));
    }
    if broken == Some("b_star_dmp") {
        place(&mut b, &sizes, 0, 1, &random(rng, r, l1, mag * eps));
    }
    let u = unitary(rng, n);
    Some((wrap(conj(&u, &a)), wrap(conj(&u, &b))))
}

/// Pair for the orthogonal-perturbation theorem (`a^π a b = a^π b a = a^π a* b = 0`).
pub fn gen_thm23_pair(spec: &GenSpec) -> Result<(CMatrix, CMatrix)> {
    let tol = Tolerance::default();
    let frame = PerturbFrame {
        commuting: false,
        ep: false,
    };
    retry(
        spec,
        "orthogonal perturbation pair",
        |rng| Ok(perturb_raw(rng, spec, &frame, 0.0, None)),
        |(a, b)| Ok(thm23_verify(a, b, &tol)?.hypotheses_hold),
    )
}

/// EP pair with `a^π b a = 0`.
pub fn gen_cor24_pair(spec: &GenSpec) -> Result<(CMatrix, CMatrix)> {
    let tol = Tolerance::default();
    let frame = PerturbFrame {
        commuting: false,
        ep: true,
    };
    retry(
        spec,
        "EP perturbation pair",
        |rng| Ok(perturb_raw(rng, spec, &frame, 0.0, None)),
        |(a, b)| Ok(cor24_verify(a, b, &tol)?.hypotheses_hold),
    )
}

/// Pair with `a^π a b = a^π b a` and `a^π a* b = a^π b a*`.
pub fn gen_thm33_pair(spec: &GenSpec) -> Result<(CMatrix, CMatrix)> {
    let tol = Tolerance::default();
    let frame = PerturbFrame {
        commuting: true,
        ep: false,
    };
    retry(
        spec,
        "commuting perturbation pair",
        |rng| Ok(perturb_raw(rng, spec, &frame, 0.0, None)),
        |(a, b)| Ok(thm33_verify(a, b, &tol)?.hypotheses_hold),
    )
}

/// Commuting pair with `a^π a* b = a^π b a*`: `a = diag(A1, N', 0)`,
/// `b = diag(B1, mu I, B4)` where `B1` commutes with `A1`.
pub fn gen_cor34_pair(spec: &GenSpec) -> Result<(CMatrix, CMatrix)> {
    let tol = Tolerance::default();
    retry(
        spec,
        "commuting pair",
        |rng| Ok(cor34_raw(rng, spec)),
        |(a, b)| Ok(cor34_verify(a, b, &tol)?.hypotheses_hold),
    )
}

fn cor34_raw(rng: &mut ChaCha8Rng, spec: &GenSpec) -> Option<(CMatrix, CMatrix)> {
    let (n, mag, r) = (spec.dim, spec.magnitude, spec.core_rank);
    let rest = split(rng, n - r, 2);
    let (l1, l2) = (rest[0], rest[1]);
    let (a1, b1) = if r >= 2 && rng.gen_bool(0.5) {
        // a + b restricted to the core is R, possibly not *-DMP
        let lambda = phase(rng) * rng.gen_range(0.5..1.5) * mag;
        let rr = if rng.gen_bool(0.5) {
            non_star_dmp_block(rng, r, mag, 1.0)
        } else {
            random_star_dmp_block(rng, r, mag).m
        };
        (&rr + eye(r) * lambda, eye(r) * (-lambda))
    } else {
        let a1 = invertible(rng, r, mag);
        let (c0, c1) = (entry(rng) * mag, entry(rng));
        let b1 = eye(r) * c0 + &a1 * c1;
        (a1, b1)
    };
    if sigma_min(&a1) < 0.05 * mag {
        return None;
    }
    let mu = if rng.gen_bool(0.25) {
        C64::new(0.0, 0.0)
    } else {
        phase(rng) * rng.gen_range(0.5..1.5) * mag
    };
    let a = block_diag(&[&a1, &nilpotent(rng, l1, mag), &zeros(l2, l2)]);
    let b = block_diag(&[&b1, &(eye(l1) * mu), &random_star_dmp_block(rng, l2, mag).m]);
    let u = unitary(rng, n);
    Some((wrap(conj(&u, &a)), wrap(conj(&u, &b))))
}

/// Triple `(a, b, d)` with *-DMP `a`, `d`. When `satisfying`, `[[a, b], [0, d]]`
/// is *-DMP by construction: `b = aY - Yd + a a^D X d d^D` with `Y` splitting
/// along the core/nilpotent parts. Otherwise a term `a a^D Z d^π` or
/// `a^π Z d d^D` is added, which makes the block matrix fail.
pub fn gen_lemma22_triple(spec: &GenSpec, satisfying: bool) -> Result<(CMatrix, CMatrix, CMatrix)> {
    if spec.dim < 2 {
        return Err(Error::InvalidArgument("triangular triples need dim >= 2".into()));
    }
    let tol = Tolerance::default();
    retry(
        spec,
        "triangular triple",
        |rng| Ok(lemma22_raw(rng, spec, satisfying)),
        |(a, _, d)| Ok(star_dmp(a, &tol)? && star_dmp(d, &tol)?),
    )
}

fn lemma22_raw(rng: &mut ChaCha8Rng, spec: &GenSpec, satisfying: bool) -> Option<(CMatrix, CMatrix, CMatrix)> {
    let (n, mag) = (spec.dim, spec.magnitude);
    let na = rng.gen_range(1..n);
    let nd = n - na;
    let (ra, rd) = if satisfying {
        (rng.gen_range(0..=na), rng.gen_range(0..=nd))
    } else if rng.gen_bool(0.5) {
        (rng.gen_range(1..=na), rng.gen_range(0..nd))
    } else {
        (rng.gen_range(0..na), rng.gen_range(1..=nd))
    };
    let a = star_dmp_block(rng, na, ra, mag);
    let d = star_dmp_block(rng, nd, rd, mag);
    let (pa, pd) = (&a.core_proj, &d.core_proj);
    let (qa, qd) = (eye(na) - pa, eye(nd) - pd);
    let y = pa * random(rng, na, nd, 1.0) * pd + &qa * random(rng, na, nd, 1.0) * &qd;
    let mut b = &a.m * &y - &y * &d.m + pa * random(rng, na, nd, mag) * pd;
    if !satisfying {
        let z = random(rng, na, nd, mag);
        let left_core = ra > 0 && rd < nd;
        let right_core = ra < na && rd > 0;
        let bad = if left_core && (!right_core || rng.gen_bool(0.5)) {
            pa * z * &qd
        } else {
            &qa * z * pd
        };
        if spectral_norm(&bad) < 1e-3 * mag {
            return None;
        }
        b += bad;
    }
    Some((wrap(a.m), wrap(b), wrap(d.m)))
}

fn spectral_norm(m: &Dm) -> f64 {
    singular_values_of(m).first().copied().unwrap_or(0.0)
}

// ---------------------------------------------------------------------------
// block instances

/// Block instance for `theorem` with `n = spec.dim` sized blocks. Corollary
/// ids return the swap-conjugate of the matching theorem's instance; for
/// `L4.1` the diagonal blocks are zero.
pub fn gen_block(theorem: TheoremId, spec: &GenSpec) -> Result<BlockMatrix> {
    let tol = Tolerance::default();
    let base = match theorem {
        TheoremId::C43 => TheoremId::T42,
        TheoremId::C45 => TheoremId::T44,
        TheoremId::C47 => TheoremId::T46,
        other => other,
    };
    let build = |rng: &mut ChaCha8Rng| -> Result<Option<BlockMatrix>> {
        Ok(Some(match base {
            TheoremId::L41 => block_l41(rng, spec),
            TheoremId::T42 => block_t42(rng, spec),
            TheoremId::T44 => block_t44(rng, spec),
            TheoremId::T46 => block_t46(rng, spec),
            other => return Err(Error::InvalidArgument(format!("{other} has no block generator"))),
        }))
    };
    let accept = |m: &BlockMatrix| -> Result<bool> {
        match base {
            TheoremId::L41 => Ok(lemma41_check(&m.b, &m.c, &tol)?.hypotheses_hold),
            t => Ok(check_block(t, m, &tol)?.hypotheses_hold),
        }
    };
    let m = retry(spec, "block instance", build, accept)?;
    Ok(if base != theorem { swap_conjugate(&m) } else { m })
}

fn block(a: Dm, b: Dm, c: Dm, d: Dm) -> BlockMatrix {
    BlockMatrix {
        a: wrap(a),
        b: wrap(b),
        c: wrap(c),
        d: wrap(d),
    }
}

fn block_l41(rng: &mut ChaCha8Rng, spec: &GenSpec) -> BlockMatrix {
    let (n, mag) = (spec.dim, spec.magnitude);
    let (b, c) = match rng.gen_range(0..3) {
        0 => {
            let b = random(rng, n, n, mag);
            let c = b.adjoint();
            (b, c)
        }
        1 => (invertible(rng, n, mag), invertible(rng, n, mag)),
        _ => {
            let r = rng.gen_range(0..=n);
            let (u, v) = (unitary(rng, n), unitary(rng, n));
            let t = block_diag(&[&invertible(rng, r, mag), &zeros(n - r, n - r)]);
            let s = block_diag(&[&invertible(rng, r, mag), &zeros(n - r, n - r)]);
            (&u * t * &v, v.adjoint() * s * u.adjoint())
        }
    };
    block(zeros(n, n), b, c, zeros(n, n))
}

/// `A = D` normal with eigenspaces `lambda_j I`; `B`, `C` block diagonal on
/// them with `B_j C_j` nilpotent where `lambda_j != 0`.
fn block_t42(rng: &mut ChaCha8Rng, spec: &GenSpec) -> BlockMatrix {
    let (n, mag) = (spec.dim, spec.magnitude);
    let mut a_blocks = Vec::new();
    let mut b_blocks = Vec::new();
    let mut c_blocks = Vec::new();
    let mut left = spec.core_rank;
    while left > 0 {
        let k = rng.gen_range(1..=left.min(3));
        left -= k;
        let lambda = phase(rng) * rng.gen_range(0.5..1.5) * mag;
        let g = invertible(rng, k, mag);
        let g_inv = g.clone().try_inverse().expect("well-conditioned block");
        let (bj, cj) = if rng.gen_bool(0.5) {
            (g, nilpotent(rng, k, mag) * g_inv)
        } else {
            (nilpotent(rng, k, mag), g)
        };
        a_blocks.push(eye(k) * lambda);
        b_blocks.push(bj);
        c_blocks.push(cj);
    }
    let z = n - spec.core_rank;
    if z > 0 {
        let r = rng.gen_range(0..=z);
        let (u0, v0) = (unitary(rng, z), unitary(rng, z));
        let t = block_diag(&[&invertible(rng, r, mag), &zeros(z - r, z - r)]);
        let s = block_diag(&[&invertible(rng, r, mag), &zeros(z - r, z - r)]);
        let (b0, c0) = if rng.gen_bool(0.5) {
            let b0 = random(rng, z, z, mag);
            let c0 = b0.adjoint();
            (b0, c0)
        } else {
            (&u0 * t * &v0, v0.adjoint() * s * u0.adjoint())
        };
        a_blocks.push(zeros(z, z));
        b_blocks.push(b0);
        c_blocks.push(c0);
    }
    let u = unitary(rng, n);
    let a = conj(&u, &block_diag(&a_blocks.iter().collect::<Vec<_>>()));
    let b = conj(&u, &block_diag(&b_blocks.iter().collect::<Vec<_>>()));
    let c = conj(&u, &block_diag(&c_blocks.iter().collect::<Vec<_>>()));
    block(a.clone(), b, c, a)
}

/// `A = D = U diag(T, N) U*`, `B = U diag(0, beta I) U*`, `C` a polynomial in `A`.
fn block_t44(rng: &mut ChaCha8Rng, spec: &GenSpec) -> BlockMatrix {
    let (n, mag, r) = (spec.dim, spec.magnitude, spec.core_rank);
    let u = unitary(rng, n);
    let a = conj(&u, &block_diag(&[&invertible(rng, r, mag), &short_nilpotent(rng, n - r, mag, 3)]));
    let beta = if rng.gen_bool(0.2) {
        C64::new(0.0, 0.0)
    } else {
        phase(rng) * rng.gen_range(0.5..1.5) * mag
    };
    let b = conj(&u, &block_diag(&[&zeros(r, r), &(eye(n - r) * beta)]));
    let coeffs = [entry(rng) * mag, entry(rng), entry(rng) / mag];
    let c0 = if rng.gen_bool(0.3) { C64::new(0.0, 0.0) } else { coeffs[0] };
    let c = eye(n) * c0 + &a * coeffs[1] + &a * &a * coeffs[2];
    block(a.clone(), b, c, a)
}

/// `A = D = U diag(A1, lambda I) U*`, `C = U diag(0, C2) U*`,
/// `B = U [[B1, 0], [0, 0]] U*` with `B1` satisfying the triangular sums.
fn block_t46(rng: &mut ChaCha8Rng, spec: &GenSpec) -> BlockMatrix {
    let (n, mag) = (spec.dim, spec.magnitude);
    let k = rng.gen_range(0..=n);
    let a1 = random_star_dmp_block(rng, k, mag);
    let p = &a1.core_proj;
    let q = eye(k) - p;
    let y = p * random(rng, k, k, 1.0) * p + &q * random(rng, k, k, 1.0) * &q;
    let b1 = &a1.m * &y - &y * &a1.m + p * random(rng, k, k, mag) * p;
    let lambda = if rng.gen_bool(0.3) {
        C64::new(0.0, 0.0)
    } else {
        phase(rng) * rng.gen_range(0.5..1.5) * mag
    };
    let u = unitary(rng, n);
    let a = conj(&u, &block_diag(&[&a1.m, &(eye(n - k) * lambda)]));
    let b = conj(&u, &block_diag(&[&b1, &zeros(n - k, n - k)]));
    let c = conj(&u, &block_diag(&[&zeros(k, k), &random(rng, n - k, n - k, mag)]));
    block(a.clone(), b, c, a)
}

// ---------------------------------------------------------------------------
// instances and near misses

/// A theorem instance in any of the shapes the checks consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Instance {
    Triple(TripleInstance),
    Pair(PairInstance),
    Block(BlockMatrix),
    OffDiagonal(OffDiagonalInstance),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairInstance {
    pub a: CMatrix,
    pub b: CMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleInstance {
    pub a: CMatrix,
    pub b: CMatrix,
    pub d: CMatrix,
}

/// Off-diagonal blocks of `[[0, B], [C, 0]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffDiagonalInstance {
    #[serde(rename = "B")]
    pub b: CMatrix,
    #[serde(rename = "C")]
    pub c: CMatrix,
}

fn pair(p: (CMatrix, CMatrix)) -> Instance {
    Instance::Pair(PairInstance { a: p.0, b: p.1 })
}

/// Hypothesis-satisfying instance for any theorem. Pair theorems use the
/// dimension as is; block theorems use it as the block size. `L2.2`
/// alternates between satisfying and violating triples by seed parity.
pub fn gen_instance(theorem: TheoremId, spec: &GenSpec) -> Result<Instance> {
    Ok(match theorem {
        TheoremId::L21 => pair(gen_lemma21_pair(spec)?),
        TheoremId::L22 => {
            let (a, b, d) = gen_lemma22_triple(spec, spec.seed.is_multiple_of(2))?;
            Instance::Triple(TripleInstance { a, b, d })
        }
        TheoremId::T23 => pair(gen_thm23_pair(spec)?),
        TheoremId::C24 => pair(gen_cor24_pair(spec)?),
        TheoremId::L31 | TheoremId::T32 => pair(gen_thm32_pair(spec)?),
        TheoremId::T33 => pair(gen_thm33_pair(spec)?),
        TheoremId::C34 => pair(gen_cor34_pair(spec)?),
        TheoremId::L41 => {
            let m = gen_block(theorem, spec)?;
            Instance::OffDiagonal(OffDiagonalInstance { b: m.b, c: m.c })
        }
        t => Instance::Block(gen_block(t, spec)?),
    })
}

/// Runs the check for `theorem` on an instance of the matching shape.
pub fn check_instance(theorem: TheoremId, instance: &Instance, tol: &Tolerance) -> Result<TheoremVerdict> {
    let shape = |want: &str| Error::InvalidArgument(format!("{theorem} expects a {want} instance"));
    match (theorem, instance) {
        (TheoremId::L22, Instance::Triple(t)) => lemma22_check(&t.a, &t.b, &t.d, tol),
        (TheoremId::L22, _) => Err(shape("triple {a, b, d}")),
        (TheoremId::L41, Instance::OffDiagonal(o)) => lemma41_check(&o.b, &o.c, tol),
        (TheoremId::L41, Instance::Block(m)) => lemma41_check(&m.b, &m.c, tol),
        (TheoremId::L41, _) => Err(shape("{B, C}")),
        (t, Instance::Block(m)) if t.is_block() => check_block(t, m, tol),
        (t, _) if t.is_block() => Err(shape("block {A, B, C, D}")),
        (t, Instance::Pair(p)) => match t {
            TheoremId::L21 => lemma21_verify(&p.a, &p.b, tol),
            TheoremId::T23 => thm23_verify(&p.a, &p.b, tol),
            TheoremId::C24 => cor24_verify(&p.a, &p.b, tol),
            TheoremId::L31 => lemma31_verify(&p.a, &p.b, tol),
            TheoremId::T32 => thm32_verify(&p.a, &p.b, tol),
            TheoremId::T33 => thm33_verify(&p.a, &p.b, tol),
            _ => cor34_verify(&p.a, &p.b, tol),
        },
        _ => Err(shape("pair {a, b}")),
    }
}

/// Near-miss instance with the label of the hypothesis it breaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearMiss {
    pub theorem: TheoremId,
    pub label: String,
    pub instance: Instance,
}

/// `(theorem, label)` combinations [`gen_near_miss`] supports.
pub const NEAR_MISS_KINDS: [(TheoremId, &str); 6] = [
    (TheoremId::L21, "ba_zero"),
    (TheoremId::L21, "a_star_dmp"),
    (TheoremId::L21, "b_star_dmp"),
    (TheoremId::T32, "a_star_dmp"),
    (TheoremId::T32, "b_star_dmp"),
    (TheoremId::T23, "b_star_dmp"),
];

/// Valid instance with one hypothesis perturbed by a coupling of size `eps`.
/// With `eps = 0` the instance satisfies every hypothesis.
pub fn gen_near_miss(theorem: TheoremId, label: &str, spec: &GenSpec, eps: f64) -> Result<NearMiss> {
    if !NEAR_MISS_KINDS.contains(&(theorem, label)) {
        return Err(Error::InvalidArgument(format!("no near-miss construction for {theorem}/{label}")));
    }
    let min_dim = if theorem == TheoremId::L21 { 3 } else { 2 };
    if spec.dim < min_dim {
        return Err(Error::InvalidArgument(format!("{theorem}/{label} near misses need dim >= {min_dim}")));
    }
    let broken = Some(label);
    let mut spec = *spec;
    let instance = match theorem {
        TheoremId::L21 => pair(lemma21_raw(&mut rng_for(spec.seed), &spec, eps, broken)),
        TheoremId::T32 => {
            spec.core_rank = spec.core_rank.min(spec.dim - 2);
            let mut rng = rng_for(spec.seed);
            pair(thm32_raw(&mut rng, &spec, eps, broken))
        }
        _ => {
            spec.core_rank = spec.core_rank.clamp(1, spec.dim - 1);
            let frame = PerturbFrame {
                commuting: false,
                ep: false,
            };
            let mut found = None;
            for attempt in 0..MAX_ATTEMPTS as u64 {
                let mut rng = rng_for(derive_seed(spec.seed, attempt));
                if let Some(p) = perturb_raw(&mut rng, &spec, &frame, eps, broken) {
                    found = Some(p);
                    break;
                }
            }
            pair(found.ok_or(Error::Generation {
                attempts: MAX_ATTEMPTS,
                reason: "orthogonal perturbation near miss".into(),
            })?)
        }
    };
    Ok(NearMiss {
        theorem,
        label: label.to_string(),
        instance,
    })
}
