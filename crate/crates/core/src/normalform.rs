//! Order-by-order normal-form reduction.
//!
//! Two reductions live here. `diffeo_normal_form` conjugates a
//! diffeomorphism jet, degree by degree, until every monomial at a
//! non-integer resonance position is gone; what survives sits at integer
//! positions and decides realizability. `gauge_linearize_system` removes
//! chosen y-degrees from a saddle-form field by pushing it forward along
//! exponentials of monomial generators, one homological solve per degree.
//!
//! Both solves share one wrinkle: when the linear part carries a nilpotent
//! block, coefficients inside a degree couple. The coupling connects only
//! positions with the same divisor, so a short Neumann series in the
//! nilpotent correction finishes the job exactly.

use crate::error::{Error, Result};
use crate::jets::{Basis, Jet};
use crate::saddle::SaddleSystem;
use crate::spectral::{
    classify_detailed, resonance, resonance_value, Resonance, ResonanceClass, SpectralData,
};
use crate::{DiffeoJet, Tolerances, VFieldJet, C64};
use serde::{Deserialize, Serialize};

/// A monomial at a resonance position together with its coefficient.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResonantTerm {
    pub resonance: Resonance,
    #[serde(with = "crate::linalg::c64_pair")]
    pub coeff: C64,
}

/// Realizability verdict from the resonant part of a normal form.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Verdict {
    Realizable,
    Obstructed(Vec<ResonantTerm>),
}

/// Output of `diffeo_normal_form`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormalFormResult {
    /// The reduced map: linear part P⁻¹·df(0)·P, nonlinear terms only at
    /// integer resonance positions.
    pub normal: DiffeoJet,
    /// ψ with normal = ψ ∘ f ∘ ψ⁻¹; linear part P⁻¹.
    pub conjugator: DiffeoJet,
    /// Monomials removed, with the coefficient they had when killed.
    pub removed: Vec<ResonantTerm>,
    /// Integer-position monomials retained in `normal` above the
    /// coefficient floor.
    pub kept: Vec<ResonantTerm>,
    /// Audit value: max coefficient difference between conjugate(f, ψ) and
    /// `normal`.
    pub conjugacy_residual: f64,
}

/// One solved gauge coefficient: the generator entry α x^xdeg y^exp ∂_comp
/// with its divisor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolvedTerm {
    pub xdeg: usize,
    pub exp: Vec<u16>,
    pub comp: usize,
    #[serde(with = "crate::linalg::c64_pair")]
    pub divisor: C64,
    #[serde(with = "crate::linalg::c64_pair")]
    pub alpha: C64,
}

/// Output of `gauge_linearize_system`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaugeResult {
    /// The pushed-forward system; targeted coefficients are below τ_coeff
    /// for x-degree ≤ max_xdeg.
    pub transformed: SaddleSystem,
    /// Σ of the per-degree generators, an (n+1)-variable field.
    pub generator: VFieldJet,
    pub solved: Vec<SolvedTerm>,
    /// x-degree cutoff the removal was verified to.
    pub max_xdeg: usize,
    /// Max targeted coefficient magnitude left in `transformed`.
    pub residual: f64,
}

fn lambda_power(lambda: &[C64], exp: &[u16]) -> C64 {
    let mut v = C64::new(1.0, 0.0);
    for (l, &e) in lambda.iter().zip(exp) {
        if e > 0 {
            v *= l.powu(e as u32);
        }
    }
    v
}

/// Poincaré-Dulac reduction of a diffeomorphism jet relative to the saddle
/// spectrum in `sd`: kills every monomial whose resonance value is not an
/// integer, leaves integer positions untouched beyond the forced update, and
/// returns the conjugating jet. `order` caps the reduction degree; the input
/// must already have linear part e^{2πiA} up to the matrix tolerance.
pub fn diffeo_normal_form(
    f: &DiffeoJet,
    sd: &SpectralData,
    order: usize,
    tol: &Tolerances,
) -> Result<NormalFormResult> {
    let n = sd.n();
    if f.nvars() != n {
        return Err(Error::NvarsMismatch(f.nvars(), n));
    }
    if order < 2 {
        return Err(Error::InvalidInput("normal form needs order >= 2".into()));
    }
    let nu = order.min(f.order());

    // Work in the Jordan frame of A: conjugate by the linear map P.
    let p_map = DiffeoJet::from_linear(&sd.p, f.order())?;
    let mut g = f.conjugate_by(&p_map)?;
    let l_mat = g.linear_matrix();
    let expected = sd.exp_2pi_i_jordan();
    let mismatch = l_mat.sub(&expected).max_abs();
    if mismatch > tol.mat * expected.max_abs().max(1.0) {
        return Err(Error::LinearPartMismatch(mismatch));
    }
    let g0 = g.clone();

    let lambda = &sd.lambda;
    let basis = Basis::get(n, f.order());
    let lin_tuple: Vec<Jet> = crate::jets::apply_matrix_tuple(
        &l_mat,
        &(0..n).map(|j| Jet::variable(n, f.order(), j)).collect::<Vec<_>>(),
    );

    let mut conjugator = DiffeoJet::identity(n, f.order());
    let mut removed = Vec::new();

    for d in 2..=nu {
        let lo = basis.degree_start(d);
        let hi = basis.degree_start(d + 1);
        // Assemble the degree-d update u, nonresonant positions only.
        let mut u_comps = vec![Jet::zero(n, f.order()); n];
        let mut b_norm: f64 = 0.0;
        let mut divisors = vec![vec![C64::new(0.0, 0.0); n]; hi - lo];
        let mut res_flags = vec![vec![false; n]; hi - lo];
        for r in lo..hi {
            let exp = basis.exp(r);
            let j: Vec<usize> = exp.iter().map(|&e| e as usize).collect();
            let lp = lambda_power(lambda, exp);
            for k in 0..n {
                let div = lambda[k] - lp;
                divisors[r - lo][k] = div;
                let rv = resonance_value(&sd.mu, &j, k);
                let (class, _) = classify_detailed(rv, tol.int);
                let is_res = class != ResonanceClass::NonInteger;
                res_flags[r - lo][k] = is_res;
                let b = g.component(k).coeff_by_rank(r);
                b_norm = b_norm.max(b.norm());
                if is_res || b.norm() == 0.0 {
                    continue;
                }
                if div.norm() < 10.0 * tol.int {
                    log::warn!(
                        "small divisor {:.3e} at position ({:?}; {}); removing anyway",
                        div.norm(),
                        j,
                        k + 1
                    );
                }
                u_comps[k].set_by_rank(r, b / div);
            }
        }
        if b_norm == 0.0 {
            continue;
        }

        // Neumann correction for the nilpotent coupling of the linear part:
        // iterate u += (−L_S⁻¹ L_N)^m L_S⁻¹ b on the nonresonant positions.
        let apply_l = |u: &[Jet]| -> Result<Vec<Jet>> {
            let au = crate::jets::apply_matrix_tuple(&l_mat, u);
            let mut out = Vec::with_capacity(n);
            for (k, uk) in u.iter().enumerate() {
                out.push(au[k].sub(&uk.compose(&lin_tuple)?));
            }
            Ok(out)
        };
        let cap = n * (d + 1) + 4;
        let mut term = u_comps.clone();
        for _ in 0..cap {
            let lt = apply_l(&term)?;
            // L_N(term) = L(term) − divisor ⊙ term.
            let mut next = vec![Jet::zero(n, f.order()); n];
            let mut lead: f64 = 0.0;
            for r in lo..hi {
                for k in 0..n {
                    if res_flags[r - lo][k] {
                        continue;
                    }
                    let ln = lt[k].coeff_by_rank(r)
                        - divisors[r - lo][k] * term[k].coeff_by_rank(r);
                    if ln.norm() > 0.0 {
                        next[k].set_by_rank(r, -ln / divisors[r - lo][k]);
                        lead = lead.max(ln.norm());
                    }
                }
            }
            if lead <= 1e-15 * b_norm.max(1.0) {
                break;
            }
            for (uk, nk) in u_comps.iter_mut().zip(&next) {
                uk.add_assign(nk);
            }
            term = next;
        }
        // Residual audit of the homological solve.
        let lu = apply_l(&u_comps)?;
        let mut resid: f64 = 0.0;
        for r in lo..hi {
            for k in 0..n {
                if res_flags[r - lo][k] {
                    continue;
                }
                let want = g.component(k).coeff_by_rank(r);
                resid = resid.max((lu[k].coeff_by_rank(r) - want).norm());
            }
        }
        if resid > 1e-10 * b_norm.max(1.0) {
            return Err(Error::IllConditioned(format!(
                "homological solve at degree {d} has residual {resid:.3e}"
            )));
        }

        if u_comps.iter().all(Jet::is_zero) {
            continue;
        }
        for r in lo..hi {
            let j: Vec<usize> = basis.exp(r).iter().map(|&e| e as usize).collect();
            for k in 0..n {
                let b = g.component(k).coeff_by_rank(r);
                if !res_flags[r - lo][k] && b.norm() > 0.0 {
                    removed.push(ResonantTerm {
                        resonance: resonance(&sd.mu, &j, k, tol.int),
                        coeff: b,
                    });
                }
            }
        }
        let mut psi_comps = Vec::with_capacity(n);
        for (k, uk) in u_comps.iter().enumerate() {
            let mut c = Jet::variable(n, f.order(), k);
            c.add_assign(uk);
            psi_comps.push(c);
        }
        let psi = DiffeoJet::new(psi_comps)?;
        g = psi.compose(&g)?.compose(&psi.invert()?)?;
        conjugator = psi.compose(&conjugator)?;
    }

    // Postcondition scan: nothing above the floor at non-integer positions.
    let mut kept = Vec::new();
    for r in basis.degree_start(2)..basis.degree_start(nu + 1) {
        let j: Vec<usize> = basis.exp(r).iter().map(|&e| e as usize).collect();
        for k in 0..n {
            let cfs = g.component(k).coeff_by_rank(r);
            if cfs.norm() <= tol.coeff {
                continue;
            }
            let res = resonance(&sd.mu, &j, k, tol.int);
            if res.class == ResonanceClass::NonInteger {
                return Err(Error::IllConditioned(format!(
                    "coefficient {:.3e} survived at non-integer position ({:?}; {})",
                    cfs.norm(),
                    j,
                    k + 1
                )));
            }
            kept.push(ResonantTerm { resonance: res, coeff: cfs });
        }
    }

    let conjugacy_residual = conjugator.compose(&g0)?.compose(&conjugator.invert()?)?.max_diff(&g);
    let conjugator_full = conjugator.compose(&DiffeoJet::from_linear(&sd.p_inv, f.order())?)?;

    Ok(NormalFormResult { normal: g, conjugator: conjugator_full, removed, kept, conjugacy_residual })
}

/// Scans the kept resonances of a normal form: any negative-integer
/// position carrying weight above the coefficient floor obstructs
/// realization.
pub fn check_negative_resonances(nf: &NormalFormResult, tol: &Tolerances) -> Verdict {
    let bad: Vec<ResonantTerm> = nf
        .kept
        .iter()
        .filter(|t| {
            t.resonance.class == ResonanceClass::NegativeInteger && t.coeff.norm() > tol.coeff
        })
        .cloned()
        .collect();
    if bad.is_empty() {
        Verdict::Realizable
    } else {
        Verdict::Obstructed(bad)
    }
}

/// Removes every monomial of chosen y-degrees from a saddle system, up to a
/// finite x-degree, by transforming the field through the Lie series
/// X ↦ Σ adᵐ_W X / m!. One generator W per y-degree, ascending; each
/// coefficient α solves a + α·R = 0 with R = μ_m − k − Σ j_l μ_l the divisor
/// for x^k y^j ∂_m under the extended weight vector (1, μ).
///
/// Every position in the target grid must have |R| > τ_int, even where the
/// current coefficient vanishes; otherwise the degree is resonant at this
/// x-range and `ZeroDivisor` is returned.
pub fn gauge_linearize_system(
    z: &SaddleSystem,
    sd: &SpectralData,
    degrees: &[usize],
    max_xdeg: Option<usize>,
    tol: &Tolerances,
) -> Result<GaugeResult> {
    let n = z.n();
    if sd.n() != n {
        return Err(Error::DimensionMismatch(sd.n(), n));
    }
    let mut degs: Vec<usize> = degrees.to_vec();
    degs.sort_unstable();
    degs.dedup();
    if degs.iter().any(|&d| d < 2) {
        return Err(Error::InvalidInput("gauge removal targets y-degrees >= 2".into()));
    }
    let nu_work = degs.iter().copied().max().unwrap_or(2).max(z.max_ydeg());
    let k_max = max_xdeg.unwrap_or((sd.delta1.ceil() as usize) + nu_work + 2);
    let omega = k_max + nu_work;
    let nv = n + 1;
    let basis = Basis::get(nv, omega);

    // Divisor grid check over every targeted position.
    for d in &degs {
        for r in basis.degree_start(*d)..basis.degree_start(d + 1).min(basis.dim()) {
            let exp = basis.exp(r);
            let k = exp[0] as usize;
            let ydeg: usize = exp[1..].iter().map(|&e| e as usize).sum();
            if ydeg != *d || k > k_max {
                continue;
            }
            let j: Vec<usize> = exp[1..].iter().map(|&e| e as usize).collect();
            for m in 0..n {
                let rv = resonance_value(&sd.mu, &j, m) - C64::new(k as f64, 0.0);
                if rv.norm() <= tol.int {
                    return Err(Error::ZeroDivisor { xdeg: k, j, k: m });
                }
            }
        }
    }

    let mut field = z.suspended_field(omega);
    cap_field(&mut field, nu_work);
    let lin_field = SaddleSystem::linear(sd.a.clone())?.suspended_field(omega);
    let mut generator = VFieldJet::zero(nv, omega);
    let mut solved = Vec::new();

    for &d in &degs {
        let lo = basis.degree_start(d.min(omega));
        // Collect the homological solve for y-degree d over x-degrees ≤ K.
        let mut w = VFieldJet::zero(nv, omega);
        let sweeps = n + 2;
        for sweep in 0..=sweeps {
            // Residual: targeted part of [W, X_lin] + current coefficients.
            let commut = w.bracket(&lin_field);
            let mut lead: f64 = 0.0;
            let mut updates: Vec<(usize, usize, C64, C64)> = Vec::new();
            for r in lo..basis.dim() {
                let exp = basis.exp(r);
                let k = exp[0] as usize;
                let ydeg: usize = exp[1..].iter().map(|&e| e as usize).sum();
                if ydeg != d || k > k_max {
                    continue;
                }
                let j: Vec<usize> = exp[1..].iter().map(|&e| e as usize).collect();
                for m in 0..n {
                    let a = field.component(1 + m).coeff_by_rank(r);
                    let cw = commut.component(1 + m).coeff_by_rank(r);
                    let resid = a + cw;
                    if resid.norm() <= tol.coeff * 1e-3 {
                        continue;
                    }
                    lead = lead.max(resid.norm());
                    let rv = resonance_value(&sd.mu, &j, m) - C64::new(k as f64, 0.0);
                    updates.push((r, m, -(resid / rv), rv));
                }
            }
            if updates.is_empty() {
                break;
            }
            if sweep == sweeps {
                return Err(Error::IllConditioned(format!(
                    "gauge solve at y-degree {d} did not settle; residual {lead:.3e}"
                )));
            }
            for (r, m, delta, _) in &updates {
                let cur = w.component(1 + m).coeff_by_rank(*r);
                w.component_mut(1 + m).set_by_rank(*r, cur + delta);
            }
        }
        if w.max_abs() == 0.0 {
            continue;
        }
        for m in 0..n {
            for r in lo..basis.dim() {
                let alpha = w.component(1 + m).coeff_by_rank(r);
                if alpha.norm() == 0.0 {
                    continue;
                }
                let exp = basis.exp(r);
                let j: Vec<usize> = exp[1..].iter().map(|&e| e as usize).collect();
                let rv = resonance_value(&sd.mu, &j, m) - C64::new(exp[0] as f64, 0.0);
                solved.push(SolvedTerm {
                    xdeg: exp[0] as usize,
                    exp: exp[1..].to_vec(),
                    comp: m,
                    divisor: rv,
                    alpha,
                });
            }
        }

        // Push the field forward: X ← e^{ad_W} X, capped in y-degree.
        let mut acc = field.clone();
        let mut term = field.clone();
        for it in 1..=(nu_work + 2) {
            term = w.bracket(&term).scale(C64::new(1.0 / it as f64, 0.0));
            cap_field(&mut term, nu_work);
            if term.max_abs() <= 1e-16 {
                break;
            }
            acc = acc.add(&term);
        }
        field = acc;
        generator = generator.add(&w);
    }

    // Audit: targeted coefficients in the final field.
    let mut residual: f64 = 0.0;
    for &d in &degs {
        for r in basis.degree_start(d.min(omega))..basis.dim() {
            let exp = basis.exp(r);
            let k = exp[0] as usize;
            let ydeg: usize = exp[1..].iter().map(|&e| e as usize).sum();
            if ydeg != d || k > k_max {
                continue;
            }
            for m in 0..n {
                residual = residual.max(field.component(1 + m).coeff_by_rank(r).norm());
            }
        }
    }
    if residual > tol.coeff {
        return Err(Error::IllConditioned(format!(
            "gauge removal left residual {residual:.3e}"
        )));
    }

    let transformed = SaddleSystem::from_suspended(&field, crate::jets::JSON_COEFF_FLOOR)?;
    Ok(GaugeResult { transformed, generator, solved, max_xdeg: k_max, residual })
}

fn cap_field(f: &mut VFieldJet, nu: usize) {
    for k in 0..f.nvars() {
        f.component_mut(k).cap_degree_from(1, nu);
    }
}
