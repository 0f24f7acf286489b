//! Round-trip and flow properties of the nilpotent-field exponential and
//! the unipotent-map logarithm, over a hundred-plus random jets.

use holorealize_core::formalcalc::{NilpotentVF, UnipotentJet};
use holorealize_core::{DiffeoJet, Jet, Tolerances, VFieldJet, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Random coefficient with magnitude in [0.05, 0.5] and random phase.
fn coeff(rng: &mut ChaCha12Rng) -> C64 {
    let r = rng.gen_range(0.05..0.5);
    let th = rng.gen_range(0.0..std::f64::consts::TAU);
    c(r * th.cos(), r * th.sin())
}

/// Jet with random terms of degree 2..=ord only.
fn higher_order_jet(rng: &mut ChaCha12Rng, n: usize, ord: usize) -> Jet {
    let basis = holorealize_core::jets::Basis::get(n, ord);
    let mut j = Jet::zero(n, ord);
    for rank in basis.degree_start(2)..basis.dim() {
        if rng.gen_bool(0.6) {
            j.set_by_rank(rank, coeff(rng));
        }
    }
    j
}

/// Nilpotent field: strictly triangular linear part plus higher terms.
fn random_nilpotent(rng: &mut ChaCha12Rng, n: usize, ord: usize) -> VFieldJet {
    let mut comps: Vec<Jet> = (0..n).map(|_| higher_order_jet(rng, n, ord)).collect();
    for i in 0..n {
        for l in i + 1..n {
            if rng.gen_bool(0.5) {
                let mut e = vec![0usize; n];
                e[l] = 1;
                comps[i].add_term(&e, coeff(rng));
            }
        }
    }
    VFieldJet::new(comps).unwrap()
}

/// Unipotent map: identity plus strictly triangular linear plus higher.
fn random_unipotent(rng: &mut ChaCha12Rng, n: usize, ord: usize) -> DiffeoJet {
    let v = random_nilpotent(rng, n, ord);
    let comps = v
        .components()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut j = Jet::variable(n, ord, k);
            j.add_assign(p);
            j
        })
        .collect();
    DiffeoJet::new(comps).unwrap()
}

#[test]
fn exponential_and_logarithm_invert_each_other_both_ways() {
    let tol = Tolerances::default();
    let mut rng = ChaCha12Rng::seed_from_u64(0xF10A_7B0C);
    let mut trips = 0;
    for n in 1..=3usize {
        for ord in 2..=5usize {
            for _ in 0..9 {
                let v = random_nilpotent(&mut rng, n, ord);
                let nil = NilpotentVF::new(v.clone(), tol.mat).unwrap();
                let back = nil.exp(&tol).unwrap().log(&tol).unwrap();
                assert!(
                    back.field().max_diff(&v) <= 1e-9,
                    "exp then log drifted for n={n}, ord={ord}"
                );

                let f = random_unipotent(&mut rng, n, ord);
                let uni = UnipotentJet::new(f.clone(), tol.mat).unwrap();
                let back = uni.log(&tol).unwrap().exp(&tol).unwrap();
                assert!(
                    back.map().max_diff(&f) <= 1e-9,
                    "log then exp drifted for n={n}, ord={ord}"
                );
                trips += 1;
            }
        }
    }
    assert!(trips >= 100);
}

#[test]
fn time_one_flows_compose_like_a_semigroup() {
    let tol = Tolerances::default();
    let mut rng = ChaCha12Rng::seed_from_u64(0x5E61_0CA7);
    for n in 1..=3usize {
        for ord in [3usize, 5] {
            let v = random_nilpotent(&mut rng, n, ord);
            let part = |t: f64| {
                NilpotentVF::new(v.scale(c(t, 0.0)), tol.mat).unwrap().exp(&tol).unwrap()
            };
            let whole = part(1.0);
            let split = part(0.3).map().compose(part(0.7).map()).unwrap();
            assert!(split.max_diff(whole.map()) <= 1e-9);
        }
    }
}

#[test]
fn trivial_elements_map_to_each_other() {
    let tol = Tolerances::default();
    for n in 1..=3usize {
        let id = DiffeoJet::identity(n, 4);
        let logf = UnipotentJet::new(id.clone(), tol.mat).unwrap().log(&tol).unwrap();
        assert!(logf.field().max_abs() <= 1e-15);

        let zero = VFieldJet::zero(n, 4);
        let expf = NilpotentVF::new(zero, tol.mat).unwrap().exp(&tol).unwrap();
        assert!(expf.map().max_diff(&id) <= 1e-15);
    }
}

#[test]
fn semisimple_parts_are_rejected() {
    let tol = Tolerances::default();
    let two = holorealize_core::CMatrix::identity(2).scale(c(2.0, 0.0));
    let err = UnipotentJet::new(DiffeoJet::from_linear(&two, 3).unwrap(), tol.mat).unwrap_err();
    assert!(matches!(err, holorealize_core::Error::NonUnipotent));

    let err = NilpotentVF::new(VFieldJet::from_linear(&two, 3), tol.mat).unwrap_err();
    assert!(matches!(err, holorealize_core::Error::NonNilpotent));
}
