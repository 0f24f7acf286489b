//! Seeded random test corpus: diagonal negative-rational spectra paired
//! with resonant normal forms and a hidden conjugation, so that every case
//! is realizable by construction and the input jet is known exactly.
//!
//! Spectra are drawn with max(−μ) < 2·min(−μ) + 1, which rules out
//! negative resonances in every degree ≥ 2, and with pairwise non-integer
//! differences, which keeps linear resonances off the table entirely.

use crate::jets::{Basis, Jet};
use crate::linalg::CMatrix;
use crate::spectral::{exp_2pi_i_scalar, ResonanceClass};
use crate::{DiffeoJet, C64};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// One generated case: the data handed to the pipeline plus the ingredients
/// it was built from.
#[derive(Clone, Debug)]
pub struct CorpusCase {
    pub id: usize,
    pub n: usize,
    pub nu: usize,
    pub seed: u64,
    /// Diagonal matrix of the rational spectrum.
    pub a: CMatrix,
    /// The input jet h = χ∘f̃∘χ⁻¹.
    pub h: DiffeoJet,
    /// The resonant normal form f̃ the case was built around.
    pub normal_form: DiffeoJet,
    /// The hiding conjugation χ, tangent to the identity.
    pub chi: DiffeoJet,
}

fn draw_spectrum(rng: &mut ChaCha12Rng, n: usize) -> Vec<f64> {
    'outer: for _ in 0..10_000 {
        let mut mu = Vec::with_capacity(n);
        for _ in 0..n {
            let q = rng.gen_range(2..=8u32);
            let p = rng.gen_range(1..=2 * q);
            mu.push(-(p as f64) / q as f64);
        }
        let a = mu.iter().map(|m| -m).fold(f64::INFINITY, f64::min);
        let b = mu.iter().map(|m| -m).fold(0.0f64, f64::max);
        if b > 0.9 + 1.9 * a {
            continue;
        }
        for k in 0..n {
            for l in 0..n {
                if k != l {
                    let d = mu[k] - mu[l];
                    if (d - d.round()).abs() < 0.02 {
                        continue 'outer;
                    }
                }
            }
        }
        return mu;
    }
    unreachable!("spectrum sampling cannot exhaust: n=1 always succeeds immediately")
}

/// Positions (exponent, component) of degree 2..=nu whose resonance value
/// is a nonnegative integer.
fn resonant_positions(mu: &[f64], n: usize, nu: usize) -> Vec<(Vec<usize>, usize)> {
    let mu_c: Vec<C64> = mu.iter().map(|&m| C64::new(m, 0.0)).collect();
    let basis = Basis::get(n, nu);
    let mut out = Vec::new();
    for r in 1..basis.dim() {
        if basis.deg(r) < 2 {
            continue;
        }
        let j: Vec<usize> = basis.exp(r).iter().map(|&e| e as usize).collect();
        for k in 0..n {
            let v = crate::spectral::resonance_value(&mu_c, &j, k);
            let (class, _) = crate::spectral::classify_detailed(v, 1e-6);
            if matches!(class, ResonanceClass::Zero | ResonanceClass::PositiveInteger) {
                out.push((j.clone(), k));
            }
        }
    }
    out
}

fn random_coeff(rng: &mut ChaCha12Rng, lo: f64, hi: f64) -> C64 {
    let m = rng.gen_range(lo..hi);
    let th = rng.gen_range(0.0..std::f64::consts::TAU);
    C64::new(m * th.cos(), m * th.sin())
}

/// Builds one deterministic case for the given dimension, jet order, and
/// seed.
pub fn generate_case(id: usize, n: usize, nu: usize, seed: u64) -> CorpusCase {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mu = draw_spectrum(&mut rng, n);
    let a = CMatrix::diag(&mu.iter().map(|&m| C64::new(m, 0.0)).collect::<Vec<_>>());

    // Normal form: multipliers plus up to 10 resonant monomials.
    let mut comps: Vec<Jet> = (0..n)
        .map(|k| Jet::variable(n, nu, k).scale(exp_2pi_i_scalar(C64::new(mu[k], 0.0))))
        .collect();
    let mut positions = resonant_positions(&mu, n, nu);
    let want = positions.len().min(10);
    for _ in 0..positions.len().saturating_sub(want) {
        let drop = rng.gen_range(0..positions.len());
        positions.remove(drop);
    }
    for (j, k) in &positions {
        comps[*k].add_term(j, random_coeff(&mut rng, 0.3, 1.0));
    }
    let normal_form = DiffeoJet::new(comps).expect("multipliers are nonzero");

    // Hiding conjugation: identity plus up to 5 small nonlinear terms.
    let mut chi_comps: Vec<Jet> = (0..n).map(|k| Jet::variable(n, nu, k)).collect();
    let basis = Basis::get(n, nu);
    let nonlinear: Vec<usize> = (1..basis.dim()).filter(|&r| basis.deg(r) >= 2).collect();
    if !nonlinear.is_empty() {
        for _ in 0..rng.gen_range(1..=5usize) {
            let r = nonlinear[rng.gen_range(0..nonlinear.len())];
            let j: Vec<usize> = basis.exp(r).iter().map(|&e| e as usize).collect();
            let k = rng.gen_range(0..n);
            chi_comps[k].add_term(&j, random_coeff(&mut rng, 0.05, 0.5));
        }
    }
    let chi = DiffeoJet::new(chi_comps).expect("tangent to identity");

    let h = normal_form.conjugate(&chi).expect("conjugation by a tangent-to-identity map");
    CorpusCase { id, n, nu, seed, a, h, normal_form, chi }
}

/// The full corpus: five cases for every (n, ν) ∈ {1,2,3} × {3,…,6},
/// 60 in total, all derived deterministically from the master seed.
pub fn generate_corpus(master_seed: u64) -> Vec<CorpusCase> {
    let mut out = Vec::with_capacity(60);
    let mut id = 0;
    for n in 1..=3usize {
        for nu in 3..=6usize {
            for rep in 0..5usize {
                let seed = master_seed
                    ^ (id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
                    ^ ((n as u64) << 32)
                    ^ ((nu as u64) << 40)
                    ^ ((rep as u64) << 48);
                out.push(generate_case(id, n, nu, seed));
                id += 1;
            }
        }
    }
    out
}
