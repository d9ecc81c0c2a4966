use proptest::prelude::*;

use stardmp_core::additive::{
    b_m_recurrence, b_m_sum, drazin_add_commuting, pierce, triangular_drazin,
};
use stardmp_core::blockmat::{assemble, check_block, lemma41_check, swap_conjugate};
use stardmp_core::gen::{
    check_instance, derive_seed, gen_block, gen_ep, gen_instance, gen_similar, gen_star_dmp, gen_thm32_pair,
    gen_unrestricted, GenSpec, Instance,
};
use stardmp_core::geninv::{
    core_inverse, drazin, drazin_cline, drazin_schur, group_inverse, index, is_ep, is_projection,
    is_star_dmp, moore_penrose, pseudo_core,
};
use stardmp_core::matcore::{adjoint, approx_eq, inverse, mat_pow, rank};
use stardmp_core::{CMatrix, Error, TheoremId, Tolerance, C64};

fn tol() -> Tolerance {
    Tolerance::default()
}

fn loose() -> Tolerance {
    Tolerance::new(1e-7, 1e-10).unwrap()
}

fn close(a: &CMatrix, b: &CMatrix, t: &Tolerance) -> bool {
    approx_eq(a, b, t).unwrap()
}

fn matrix(n: usize, m: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n * m).prop_map(move |v| {
        CMatrix::new(n, m, v.into_iter().map(|(re, im)| C64::new(re, im)).collect()).unwrap()
    })
}

fn square() -> impl Strategy<Value = CMatrix> {
    (1usize..=5).prop_flat_map(|n| matrix(n, n))
}

fn spec() -> impl Strategy<Value = GenSpec> {
    (2usize..=5, any::<u64>()).prop_flat_map(|(n, seed)| {
        (0..=n).prop_map(move |r| GenSpec::new(n, r, seed).unwrap())
    })
}

fn permutation(n: usize, shift: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| {
        if j == (i + shift) % n {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_is_an_anti_multiplicative_involution(
        (a, b) in (1usize..=4, 1usize..=4, 1usize..=4)
            .prop_flat_map(|(n, k, m)| (matrix(n, k), matrix(k, m)))
    ) {
        prop_assert_eq!(adjoint(&adjoint(&a)), a.clone());
        prop_assert!(close(&adjoint(&(&a * &b)), &(&adjoint(&b) * &adjoint(&a)), &tol()));
    }

    #[test]
    fn rank_is_adjoint_invariant(a in (1usize..=5, 1usize..=5).prop_flat_map(|(n, m)| matrix(n, m))) {
        prop_assert_eq!(rank(&a, &tol()), rank(&adjoint(&a), &tol()));
    }

    #[test]
    fn powers_add(a in square(), j in 0usize..4, k in 0usize..4) {
        let lhs = mat_pow(&a, j + k).unwrap();
        let rhs = &mat_pow(&a, j).unwrap() * &mat_pow(&a, k).unwrap();
        prop_assert!(close(&lhs, &rhs, &tol()));
    }

    #[test]
    fn inverse_is_two_sided_or_singular(a in square()) {
        let n = a.rows();
        match inverse(&a, &tol()) {
            Ok(x) => {
                prop_assert!(close(&(&a * &x), &CMatrix::identity(n), &loose()));
                prop_assert!(close(&(&x * &a), &CMatrix::identity(n), &loose()));
            }
            Err(e) => prop_assert_eq!(e, Error::Singular),
        }
    }

    #[test]
    fn moore_penrose_certificate_passes(
        a in (1usize..=5, 1usize..=5).prop_flat_map(|(n, m)| matrix(n, m))
    ) {
        let (_, cert) = moore_penrose(&a, &tol());
        prop_assert!(cert.pass, "{:?}", cert);
    }

    #[test]
    fn drazin_methods_agree_on_generated_matrices(s in spec()) {
        let a = gen_unrestricted(&s).unwrap();
        let (cline, c1) = drazin_cline(&a, &tol()).unwrap();
        let (schur, c2) = drazin_schur(&a, &tol()).unwrap();
        prop_assert!(c1.pass && c2.pass);
        prop_assert_eq!(cline.index, schur.index);
        prop_assert!((&cline.drazin - &schur.drazin).norm_max() <= 1e-7 * (1.0 + a.norm_max()));
    }

    #[test]
    fn drazin_is_group_inverse_at_index_one(s in spec()) {
        let a = gen_similar(&s, false, false).unwrap();
        let k = index(&a, &tol()).unwrap();
        prop_assert!(k <= 1);
        let (d, _) = drazin(&a, &tol()).unwrap();
        let (g, _) = group_inverse(&a, &tol()).unwrap();
        prop_assert!(close(&d.drazin, &g, &loose()));
        let (c, _) = core_inverse(&a, &tol()).unwrap();
        let (pc, _) = pseudo_core(&a, &tol()).unwrap();
        prop_assert!(close(&c, &pc, &loose()));
    }

    #[test]
    fn inverses_coincide_for_invertible(s in spec()) {
        let s = GenSpec::new(s.dim, s.dim, s.seed).unwrap();
        let a = gen_similar(&s, false, false).unwrap();
        let x = inverse(&a, &tol()).unwrap();
        let (mp, _) = moore_penrose(&a, &tol());
        let (g, _) = group_inverse(&a, &tol()).unwrap();
        let (d, _) = drazin(&a, &tol()).unwrap();
        let (c, _) = core_inverse(&a, &tol()).unwrap();
        let (pc, _) = pseudo_core(&a, &tol()).unwrap();
        for y in [&mp, &g, &d.drazin, &c, &pc] {
            prop_assert!(close(&x, y, &loose()));
        }
    }

    #[test]
    fn drazin_is_unique_under_permutation(s in spec(), shift in 1usize..5) {
        let a = gen_unrestricted(&s).unwrap();
        let p = permutation(a.rows(), shift);
        let pa = &(&p * &a) * &adjoint(&p);
        let (d, _) = drazin(&a, &tol()).unwrap();
        let (pd, _) = drazin(&pa, &tol()).unwrap();
        let back = &(&adjoint(&p) * &pd.drazin) * &p;
        prop_assert!(close(&back, &d.drazin, &loose()));
    }

    #[test]
    fn drazin_scales_inversely(s in spec(), re in 0.3f64..3.0, im in -2.0f64..2.0) {
        let a = gen_unrestricted(&s).unwrap();
        let lambda = C64::new(re, im);
        let (d, _) = drazin(&a, &tol()).unwrap();
        let (dl, _) = drazin(&a.scale(lambda), &tol()).unwrap();
        prop_assert_eq!(d.index, dl.index);
        prop_assert!(close(&dl.drazin, &d.drazin.scale(lambda.inv()), &loose()));
    }

    #[test]
    fn star_dmp_report_is_consistent(s in spec(), kind in 0usize..4) {
        let a = match kind {
            0 => gen_star_dmp(&s).unwrap(),
            1 => gen_ep(&s).unwrap(),
            2 => gen_similar(&s, true, false).unwrap(),
            _ => gen_unrestricted(&s).unwrap(),
        };
        let r = is_star_dmp(&a, &tol()).unwrap();
        prop_assert!(r.consistent, "{:?}", r);
        prop_assert_eq!(r.verdict, r.char2);
        if kind <= 1 {
            prop_assert!(r.verdict);
        }
    }

    #[test]
    fn star_dmp_pseudo_core_of_adjoint(s in spec()) {
        let a = gen_star_dmp(&s).unwrap();
        let (pc, _) = pseudo_core(&a, &tol()).unwrap();
        let (pc_star, _) = pseudo_core(&adjoint(&a), &tol()).unwrap();
        prop_assert!(close(&pc_star, &adjoint(&pc), &loose()));
    }

    #[test]
    fn ep_implies_star_dmp(s in spec()) {
        let a = gen_ep(&s).unwrap();
        prop_assert!(is_ep(&a, &tol()).unwrap());
        prop_assert!(is_star_dmp(&a, &tol()).unwrap().verdict);
    }

    #[test]
    fn star_dmp_is_unitarily_invariant(s in spec(), shift in 1usize..5) {
        let a = gen_star_dmp(&s).unwrap();
        let p = permutation(a.rows(), shift);
        let u = &p * &CMatrix::diag(
            &(0..a.rows()).map(|j| C64::from_polar(1.0, 0.7 * j as f64)).collect::<Vec<_>>(),
        );
        let ua = &(&u * &a) * &adjoint(&u);
        prop_assert!(is_star_dmp(&ua, &tol()).unwrap().verdict);
        prop_assert_eq!(index(&ua, &tol()).unwrap(), index(&a, &tol()).unwrap());
    }

    #[test]
    fn spectral_idempotent_is_projection_for_star_dmp(s in spec()) {
        let a = gen_star_dmp(&s).unwrap();
        let (d, _) = drazin(&a, &tol()).unwrap();
        prop_assert!(is_projection(&d.spectral_idempotent, &loose()).unwrap());
    }

    #[test]
    fn pierce_reconstructs(s in spec()) {
        let a = gen_star_dmp(&s).unwrap();
        let (d, _) = drazin(&a, &tol()).unwrap();
        let p = &a * &d.drazin;
        let x = gen_unrestricted(&GenSpec::new(s.dim, s.core_rank, s.seed ^ 1).unwrap()).unwrap();
        let dec = pierce(&x, &p, &loose()).unwrap();
        prop_assert!(close(&dec.reconstruct(), &x, &tol()));
    }

    #[test]
    fn b_m_closed_form_matches_recurrence(
        (a, b, d) in (1usize..=3).prop_flat_map(|n| (matrix(n, n), matrix(n, n), matrix(n, n))),
        m in 1usize..6,
    ) {
        let lhs = b_m_sum(&a, &b, &d, m).unwrap();
        let rhs = b_m_recurrence(&a, &b, &d, m).unwrap();
        let scale = 1.0 + (a.norm_max() + b.norm_max() + d.norm_max()).powi(m as i32);
        prop_assert!((&lhs - &rhs).norm_max() <= 1e-9 * scale);
    }

    #[test]
    fn triangular_drazin_has_diagonal_blocks(s in spec()) {
        let a = gen_unrestricted(&s).unwrap();
        let d = gen_unrestricted(&GenSpec::new(s.dim, s.core_rank, s.seed ^ 7).unwrap()).unwrap();
        let b = gen_unrestricted(&GenSpec::new(s.dim, s.dim, s.seed ^ 9).unwrap()).unwrap();
        let x = triangular_drazin(&a, &b, &d, &tol()).unwrap();
        let n = s.dim;
        let (ad, _) = drazin(&a, &tol()).unwrap();
        let (dd, _) = drazin(&d, &tol()).unwrap();
        prop_assert!(close(&x.submatrix(0, 0, n, n), &ad.drazin, &loose()));
        prop_assert!(close(&x.submatrix(n, n, n, n), &dd.drazin, &loose()));
        prop_assert!(x.submatrix(n, 0, n, n).norm_max() == 0.0);
    }

    #[test]
    fn commuting_drazin_sum_matches_direct(s in spec()) {
        let (a, b) = gen_thm32_pair(&s).unwrap();
        let sum = &a + &b;
        match drazin_add_commuting(&a, &b, &tol()) {
            Ok(x) => {
                let (d, _) = drazin(&sum, &tol()).unwrap();
                prop_assert!(close(&x, &d.drazin, &loose()));
            }
            Err(e) => prop_assert!(matches!(e, Error::NotCommuting | Error::Singular), "{e}"),
        }
    }

    #[test]
    fn generated_instances_satisfy_their_theorem(seed in any::<u64>(), n in 2usize..=4, t in 0usize..15) {
        let theorem = TheoremId::ALL[t];
        let s = GenSpec::new(n, n / 2, seed).unwrap();
        let inst = gen_instance(theorem, &s).unwrap();
        let v = check_instance(theorem, &inst, &tol()).unwrap();
        prop_assert!(v.equivalence_ok, "{:?}", v);
        if theorem != TheoremId::L22 {
            prop_assert!(v.hypotheses_hold, "{:?}", v);
        }
    }

    #[test]
    fn off_diagonal_square_is_block_diagonal(s in spec()) {
        let m = gen_block(TheoremId::L41, &s).unwrap();
        let v = lemma41_check(&m.b, &m.c, &tol()).unwrap();
        prop_assert!(v.equivalence_ok);
        let x = assemble(&m).unwrap();
        let x2 = &x * &x;
        let n = s.dim;
        prop_assert!(close(&x2.submatrix(0, 0, n, n), &(&m.b * &m.c), &tol()));
        prop_assert!(close(&x2.submatrix(n, n, n, n), &(&m.c * &m.b), &tol()));
    }

    #[test]
    fn swapped_block_satisfies_corollary(s in spec(), which in 0usize..3) {
        let (base, cor) = [
            (TheoremId::T42, TheoremId::C43),
            (TheoremId::T44, TheoremId::C45),
            (TheoremId::T46, TheoremId::C47),
        ][which];
        let m = gen_block(base, &s).unwrap();
        let swapped = swap_conjugate(&m);
        let v = check_block(cor, &swapped, &tol()).unwrap();
        prop_assert!(v.hypotheses_hold && v.equivalence_ok, "{:?}", v);
        let mm = assemble(&m).unwrap();
        let ms = assemble(&swapped).unwrap();
        prop_assert_eq!(
            is_star_dmp(&mm, &tol()).unwrap().verdict,
            is_star_dmp(&ms, &tol()).unwrap().verdict
        );
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>(), t in 0usize..15) {
        let theorem = TheoremId::ALL[t];
        let s = GenSpec::new(3, 1, seed).unwrap();
        let x: Instance = gen_instance(theorem, &s).unwrap();
        let y: Instance = gen_instance(theorem, &s).unwrap();
        prop_assert_eq!(x, y);
        prop_assert_eq!(derive_seed(seed, 0), seed);
    }
}

#[test]
fn identity_and_zero_are_star_dmp() {
    for n in 1..=4 {
        assert!(is_star_dmp(&CMatrix::identity(n), &tol()).unwrap().verdict);
        let r = is_star_dmp(&CMatrix::zeros(n, n), &tol()).unwrap();
        assert!(r.verdict && r.consistent);
    }
}

#[test]
fn pseudo_core_of_adjoint_is_not_the_same_matrix_in_general() {
    // diag(i) is EP, but its pseudo core inverse -i differs from that of its adjoint.
    let a = CMatrix::diag(&[C64::new(0.0, 1.0)]);
    let (x, _) = pseudo_core(&a, &tol()).unwrap();
    let (y, _) = pseudo_core(&adjoint(&a), &tol()).unwrap();
    assert!(!close(&x, &y, &tol()));
    assert!(close(&y, &adjoint(&x), &tol()));
}
