//! Shared fixtures for the pipeline benchmarks.

use holorealize_core::jets::Basis;
use holorealize_core::{CMatrix, DiffeoJet, Jet, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Fully dense jet with coefficients of magnitude below one.
pub fn dense_jet(seed: u64, nvars: usize, order: usize) -> Jet {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let basis = Basis::get(nvars, order);
    let mut j = Jet::zero(nvars, order);
    for rank in 0..basis.dim() {
        let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let r: f64 = rng.gen_range(0.1..0.9);
        j.set_by_rank(rank, c(r * th.cos(), r * th.sin()));
    }
    j
}

/// Invertible map: identity plus a damped dense perturbation without
/// constant term.
pub fn dense_diffeo(seed: u64, nvars: usize, order: usize) -> DiffeoJet {
    let comps = (0..nvars)
        .map(|k| {
            let mut p = dense_jet(seed + k as u64, nvars, order);
            p.set_by_rank(0, c(0.0, 0.0));
            let mut j = Jet::variable(nvars, order, k);
            j.add_assign(&p.scale(c(0.2, 0.0)));
            j
        })
        .collect();
    DiffeoJet::new(comps).expect("perturbed identity is a diffeo jet")
}

/// The canned realizable pair: diag(-5/2, -5/4) with (-y1 + y2^2, -i*y2).
pub fn canned_pair() -> (CMatrix, DiffeoJet) {
    let a = CMatrix::diag(&[c(-2.5, 0.0), c(-1.25, 0.0)]);
    let mut comp0 = Jet::monomial(2, 2, &[1, 0], c(-1.0, 0.0));
    comp0.add_term(&[0, 2], c(1.0, 0.0));
    let comp1 = Jet::monomial(2, 2, &[0, 1], c(0.0, -1.0));
    (a, DiffeoJet::new(vec![comp0, comp1]).expect("canned jet is well formed"))
}
