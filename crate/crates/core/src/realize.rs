//! The constructive realization pipeline: from a diffeomorphism jet h and a
//! matrix A with e^{2πiA} = dh(0), build a polynomial saddle system whose
//! holonomy jet on {x = 1} equals j^ν h.
//!
//! Chain: spectral analysis of A → normal form of h → negative-resonance
//! gate → resonant suspension F = (x, Σ c_{j;k} x^{R_{j;k}} y^j e_k) →
//! Z = X_s + log(F_u)/2πi → truncate → pull the system back to the input
//! coordinates. Every step's output is kept in the certificate so each link
//! can be audited independently.

use crate::error::{Error, Result};
use crate::formalcalc::suspended_unipotent_factor;
use crate::jets::{Basis, Jet};
use crate::linalg::CMatrix;
use crate::normalform::{check_negative_resonances, diffeo_normal_form, Verdict};
use crate::saddle::SaddleSystem;
use crate::spectral::{
    analyze_matrix_with, classify_detailed, enumerate_resonances, resonance_value, Resonance,
    ResonanceClass, SpectralData,
};
use crate::{DiffeoJet, Tolerances, VFieldJet, C64};
use serde::{Deserialize, Serialize};

/// Options for `realize`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RealizeOptions {
    /// Bypass the jet-order rule entirely. A warning is logged when the
    /// bypassed order violates δ₀(ν+1) − δ₁ ≥ 4; jet matching itself does
    /// not need that inequality.
    pub nu_override: Option<usize>,
    /// Requested superdiagonal size for the rescaled Jordan form.
    pub eps_request: f64,
    pub tol: Tolerances,
}

impl Default for RealizeOptions {
    fn default() -> Self {
        RealizeOptions { nu_override: None, eps_request: 0.01, tol: Tolerances::default() }
    }
}

/// Everything the pipeline produced, sufficient to audit the realization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RealizationCertificate {
    /// Saddle system in the input coordinates; its holonomy jet on {x = 1}
    /// equals `input_jet` directly.
    pub system: SaddleSystem,
    /// The same system in the Jordan frame of A, where its holonomy is the
    /// normal form.
    pub system_normalized: SaddleSystem,
    pub nu: usize,
    /// Map carrying the system's holonomy jet to the input jet; identity
    /// by construction, recorded for downstream consumers.
    pub conjugator_to_input: DiffeoJet,
    /// ψ with normal form = ψ ∘ h ∘ ψ⁻¹; linear part P⁻¹.
    pub conjugator: DiffeoJet,
    /// j^ν h, the realized jet.
    pub input_jet: DiffeoJet,
    /// The resonant suspension F in n+1 variables (variable 0 is x).
    pub f_suspended: DiffeoJet,
    /// Z at full working order in the Jordan frame, before truncation into
    /// `system_normalized`.
    pub z_full: VFieldJet,
    /// All resonances with 2 ≤ |j| ≤ ν.
    pub resonance_table: Vec<Resonance>,
    pub spectral: SpectralData,
    /// Max-norm gap between the final system's linear part and A.
    pub linear_residual: f64,
}

/// Jet order for the realization: max(requested or 2, ceil((4+δ₁)/δ₀) − 1,
/// largest degree that can carry a negative resonance). The middle term
/// enforces δ₀(ν+1) − δ₁ ≥ 4.
pub fn choose_nu(sd: &SpectralData, requested: Option<usize>) -> usize {
    let margin = (((4.0 + sd.delta1) / sd.delta0).ceil() as usize).saturating_sub(1);
    requested
        .unwrap_or(2)
        .max(2)
        .max(margin)
        .max(crate::spectral::negative_resonance_degree_bound(sd))
}

/// Largest integer resonance value over positions with |j| ≤ nu; bounds the
/// x-degree of everything the suspension and its logarithm can produce.
fn max_integer_resonance(sd: &SpectralData, nu: usize, tol_int: f64) -> usize {
    let n = sd.n();
    let basis = Basis::get(n, nu);
    let mut rmax = 0usize;
    for r in 1..basis.dim() {
        let j: Vec<usize> = basis.exp(r).iter().map(|&e| e as usize).collect();
        for k in 0..n {
            let v = resonance_value(&sd.mu, &j, k);
            let (class, _) = classify_detailed(v, tol_int);
            if matches!(class, ResonanceClass::Zero | ResonanceClass::PositiveInteger) {
                rmax = rmax.max(v.re.round() as usize);
            }
        }
    }
    rmax
}

/// Lifts an n-variable map tuple to n+1 variables with x prepended and
/// fixed.
fn suspend_map(psi: &DiffeoJet, order: usize) -> Result<DiffeoJet> {
    let n = psi.nvars();
    let nv = n + 1;
    let mut comps = Vec::with_capacity(nv);
    comps.push(Jet::variable(nv, order, 0));
    let mut exp = vec![0usize; nv];
    for k in 0..n {
        let mut c = Jet::zero(nv, order);
        for (_, e, v) in psi.component(k).iter_nonzero() {
            exp[0] = 0;
            for (i, &ei) in e.iter().enumerate() {
                exp[1 + i] = ei as usize;
            }
            c.add_term(&exp, v);
        }
        comps.push(c);
    }
    DiffeoJet::new(comps)
}

/// Builds the resonant suspension F = (x, …, Σ_j c_{j;k} x^{R_{j;k}} y^j, …)
/// from a map in normal form: every monomial of f_normal (linear part
/// included) is placed at x-degree equal to its resonance value, which must
/// round to a nonnegative integer.
///
/// Each included term satisfies the invariance dF·X_s = X_s∘F exactly up to
/// its rounding defect c·(round(R) − R); the max defect is required to stay
/// below τ_coeff.
pub fn build_resonant_suspension(
    f_normal: &DiffeoJet,
    sd: &SpectralData,
    nu: usize,
    tol: &Tolerances,
) -> Result<DiffeoJet> {
    let n = sd.n();
    if f_normal.nvars() != n {
        return Err(Error::NvarsMismatch(f_normal.nvars(), n));
    }
    let f = f_normal.truncated(nu);

    // First pass: classify, collect obstructions, find the working order.
    let mut negative: Vec<Resonance> = Vec::new();
    let mut placed: Vec<(usize, Vec<usize>, usize, C64)> = Vec::new(); // (R, y-exp, comp, coeff)
    let mut rounding_defect: f64 = 0.0;
    for k in 0..n {
        for (_, exp, c) in f.component(k).iter_nonzero() {
            let j: Vec<usize> = exp.iter().map(|&e| e as usize).collect();
            let value = resonance_value(&sd.mu, &j, k);
            let (class, _) = classify_detailed(value, tol.int);
            match class {
                ResonanceClass::NonInteger => {
                    if c.norm() > tol.coeff {
                        return Err(Error::NonIntegerExponent { j, k, value });
                    }
                }
                ResonanceClass::NegativeInteger => {
                    if c.norm() > tol.coeff {
                        negative.push(crate::spectral::resonance(&sd.mu, &j, k, tol.int));
                    }
                }
                ResonanceClass::Zero | ResonanceClass::PositiveInteger => {
                    let ri = value.re.round() as usize;
                    rounding_defect = rounding_defect
                        .max((c * (value - C64::new(ri as f64, 0.0))).norm());
                    placed.push((ri, j, k, c));
                }
            }
        }
    }
    if !negative.is_empty() {
        return Err(Error::NegativeResonancePresent(negative));
    }
    if rounding_defect > tol.coeff {
        return Err(Error::IllConditioned(format!(
            "resonant invariance defect {rounding_defect:.3e} exceeds the coefficient floor"
        )));
    }

    let order = max_integer_resonance(sd, nu, tol.int) + nu;
    let nv = n + 1;
    let mut comps = vec![Jet::zero(nv, order); nv];
    comps[0] = Jet::variable(nv, order, 0);
    let mut exp = vec![0usize; nv];
    for (ri, yexp, k, c) in placed {
        exp[0] = ri;
        exp[1..].copy_from_slice(&yexp);
        comps[1 + k].add_term(&exp, c);
    }
    DiffeoJet::new(comps)
}

/// From the suspension F to the polynomial system: factor F = F_s∘F_u,
/// take W = log F_u in the quotient capping y-degrees at nu, and set
/// Z = x∂x + Σ μ_l y_l ∂_l + W/2πi. Returns the truncated system (Jordan
/// frame) together with Z itself.
pub fn assemble_z(
    f: &DiffeoJet,
    sd: &SpectralData,
    nu: usize,
    tol: &Tolerances,
) -> Result<(SaddleSystem, VFieldJet)> {
    let nv = f.nvars();
    let n = nv - 1;
    if sd.n() != n {
        return Err(Error::DimensionMismatch(sd.n(), n));
    }
    let fu = suspended_unipotent_factor(f, &sd.lambda, tol)?;
    let w = fu.log_capped(Some((1, nu)), tol)?;
    let two_pi_i = C64::new(0.0, std::f64::consts::TAU);
    let mut z = w.into_field().scale(C64::new(1.0, 0.0) / two_pi_i);
    // F fixes x, so the x-component of the log vanishes; install x∂x
    // exactly.
    let order = f.order();
    if z.component(0).max_abs() > tol.coeff {
        return Err(Error::XNotFixed);
    }
    *z.component_mut(0) = Jet::variable(nv, order, 0);
    let mut exp = vec![0usize; nv];
    for l in 0..n {
        exp.iter_mut().for_each(|e| *e = 0);
        exp[1 + l] = 1;
        z.component_mut(1 + l).add_term(&exp, sd.mu[l]);
    }
    let sys = SaddleSystem::from_suspended(&z, tol.coeff).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::InvalidInput(format!(
            "{msg}; integer eigenvalue differences put resonant linear terms outside the saddle form"
        )),
        other => other,
    })?;
    // j¹Z must reproduce the Jordan form of A.
    let jmat = sd.jordan_matrix();
    let lin_gap = sys.a().sub(&jmat).max_abs();
    if lin_gap > 100.0 * tol.mat * jmat.max_abs().max(1.0) {
        return Err(Error::IllConditioned(format!(
            "assembled linear part misses the Jordan form of A by {lin_gap:.3e}"
        )));
    }
    Ok((sys, z))
}

/// Full pipeline. On success the certificate's `system` has holonomy jet
/// j^ν h on {x = 1}; obstructed inputs return the negative resonances that
/// block realization.
pub fn realize(
    h: &DiffeoJet,
    a: &CMatrix,
    opts: &RealizeOptions,
) -> Result<RealizationCertificate> {
    let tol = &opts.tol;
    let sd = analyze_matrix_with(a, opts.eps_request, tol)?;
    let nu = match opts.nu_override {
        Some(v) => {
            if v < 2 {
                return Err(Error::InvalidInput("jet order must be >= 2".into()));
            }
            let slack = sd.delta0 * (v as f64 + 1.0) - sd.delta1;
            if slack < 4.0 {
                log::warn!(
                    "jet order {v} leaves contraction margin {slack:.3} < 4; \
                     jet matching is unaffected"
                );
            }
            v
        }
        None => choose_nu(&sd, None),
    };
    let input_jet = h.truncated(nu);

    let nf = diffeo_normal_form(&input_jet, &sd, nu, tol)?;
    if let Verdict::Obstructed(terms) = check_negative_resonances(&nf, tol) {
        return Err(Error::Obstructed(terms.into_iter().map(|t| t.resonance).collect()));
    }

    let f_suspended = build_resonant_suspension(&nf.normal, &sd, nu, tol)?;
    let (system_normalized, z_full) = assemble_z(&f_suspended, &sd, nu, tol)?;

    // Pull Z back to the input coordinates: w with y = ψ(w) turns the
    // holonomy from the normal form into h itself.
    let phi = suspend_map(&nf.conjugator, z_full.order())?;
    let z_w = z_full.pullback_capped(&phi, 1, nu)?;
    let system = SaddleSystem::from_suspended(&z_w, tol.coeff)?;
    let linear_residual = system.a().sub(a).max_abs();
    if linear_residual > 100.0 * tol.mat * a.max_abs().max(1.0) {
        return Err(Error::IllConditioned(format!(
            "final linear part misses A by {linear_residual:.3e}"
        )));
    }

    let resonance_table = enumerate_resonances(&sd, nu.max(2), tol.int);
    Ok(RealizationCertificate {
        system,
        system_normalized,
        nu,
        conjugator_to_input: DiffeoJet::identity(sd.n(), nu),
        conjugator: nf.conjugator,
        input_jet,
        f_suspended,
        z_full,
        resonance_table,
        spectral: sd,
        linear_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::analyze_matrix;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn nu_rule_examples() {
        let sd = analyze_matrix(&CMatrix::diag(&[c(-1.5, 0.0), c(-0.25, 0.0)]), 0.01).unwrap();
        assert_eq!(choose_nu(&sd, None), 23);
        assert!(sd.delta0 * 24.0 - sd.delta1 >= 4.0);
        let sd1 = analyze_matrix(&CMatrix::diag(&[c(-1.0, 0.0)]), 0.01).unwrap();
        assert_eq!(choose_nu(&sd1, None), 5);
        assert_eq!(choose_nu(&sd1, Some(8)), 8);
        assert_eq!(choose_nu(&sd1, Some(3)), 5);
    }

    #[test]
    fn suspension_of_one_dim_quadratic() {
        let sd = analyze_matrix(&CMatrix::diag(&[c(-1.0, 0.0)]), 0.01).unwrap();
        let mut f = Jet::variable(1, 3, 0);
        f.add_term(&[2], c(1.0, 0.0));
        let f = DiffeoJet::new(vec![f]).unwrap();
        let sus = build_resonant_suspension(&f, &sd, 3, &tols()).unwrap();
        assert_eq!(sus.nvars(), 2);
        // λ = e^{−2πi} = 1: linear term y at x⁰; y² at x¹; no y³ term.
        assert!((sus.component(1).coeff(&[0, 1]) - c(1.0, 0.0)).norm() < 1e-9);
        assert!((sus.component(1).coeff(&[1, 2]) - c(1.0, 0.0)).norm() < 1e-9);
        assert!(sus.component(1).coeff(&[2, 3]).norm() < 1e-12);
    }

    #[test]
    fn suspension_of_linear_map_is_linear() {
        let sd = analyze_matrix(&CMatrix::diag(&[c(-0.3, 0.0), c(-0.7, 0.0)]), 0.01).unwrap();
        let f = DiffeoJet::from_linear(&sd.exp_2pi_i_jordan(), 3).unwrap();
        let sus = build_resonant_suspension(&f, &sd, 3, &tols()).unwrap();
        for k in 0..2 {
            let comp = sus.component(1 + k);
            let mut exp = [0usize, 0, 0];
            exp[1 + k] = 1;
            assert!((comp.coeff(&exp) - sd.lambda[k]).norm() < 1e-12);
            assert!(comp.max_abs_from_degree(2) < 1e-12);
        }
    }

    #[test]
    fn suspension_rejects_negative_resonances() {
        let sd = analyze_matrix(&CMatrix::diag(&[c(-1.5, 0.0), c(-0.25, 0.0)]), 0.01).unwrap();
        let mut f1 = Jet::variable(2, 3, 0).neg();
        f1.add_term(&[0, 2], c(1.0, 0.0));
        let f2 = Jet::variable(2, 3, 1).scale(c(0.0, -1.0));
        let f = DiffeoJet::new(vec![f1, f2]).unwrap();
        match build_resonant_suspension(&f, &sd, 3, &tols()) {
            Err(Error::NegativeResonancePresent(list)) => {
                assert_eq!(list.len(), 1);
                assert_eq!(list[0].j, vec![0, 2]);
                assert_eq!(list[0].k, 0);
            }
            other => panic!("expected negative resonance, got {other:?}"),
        }
    }

    #[test]
    fn assembled_z_of_quadratic_has_theta_series_coefficients() {
        let sd = analyze_matrix(&CMatrix::diag(&[c(-1.0, 0.0)]), 0.01).unwrap();
        let mut f = Jet::variable(1, 4, 0);
        f.add_term(&[2], c(1.0, 0.0));
        let f = DiffeoJet::new(vec![f]).unwrap();
        let sus = build_resonant_suspension(&f, &sd, 4, &tols()).unwrap();
        let (sys, z) = assemble_z(&sus, &sd, 4, &tols()).unwrap();
        let tpi = C64::new(0.0, std::f64::consts::TAU);
        // G = (x y² − x² y³ + …)/2πi.
        let g1 = sys
            .terms()
            .iter()
            .find(|t| t.xdeg == 1 && t.exp == vec![2])
            .expect("x y² term");
        assert!((g1.coeff - C64::new(1.0, 0.0) / tpi).norm() < 1e-10);
        let g2 = sys
            .terms()
            .iter()
            .find(|t| t.xdeg == 2 && t.exp == vec![3])
            .expect("x² y³ term");
        assert!((g2.coeff + C64::new(1.0, 0.0) / tpi).norm() < 1e-10);
        // Linear part equals A.
        assert!((sys.a().get(0, 0) - c(-1.0, 0.0)).norm() < 1e-10);
        // j¹Z = x∂x + A y∂y.
        assert!((z.component(0).coeff(&[1, 0]) - c(1.0, 0.0)).norm() < 1e-12);
        assert!((z.component(1).coeff(&[0, 1]) - c(-1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn assembled_z_commutes_with_the_diagonal_part() {
        let sd = analyze_matrix(&CMatrix::diag(&[c(-1.0, 0.0)]), 0.01).unwrap();
        let mut f = Jet::variable(1, 4, 0);
        f.add_term(&[2], c(1.0, 0.0));
        let f = DiffeoJet::new(vec![f]).unwrap();
        let sus = build_resonant_suspension(&f, &sd, 4, &tols()).unwrap();
        let (_, z) = assemble_z(&sus, &sd, 4, &tols()).unwrap();
        let order = z.order();
        let mut xs_comps = vec![Jet::zero(2, order); 2];
        xs_comps[0] = Jet::variable(2, order, 0);
        xs_comps[1] = Jet::variable(2, order, 1).scale(c(-1.0, 0.0));
        let xs = VFieldJet::new(xs_comps).unwrap();
        let diff = z.sub(&xs);
        let br = xs.bracket(&diff);
        // Commutation holds on the y-capped quotient the assembly ran in.
        let mut capped = br.clone();
        for k in 0..2 {
            capped.component_mut(k).cap_degree_from(1, 4);
        }
        assert!(capped.max_abs() < 1e-9);
    }

    #[test]
    fn realize_quadratic_produces_certificate() {
        let a = CMatrix::diag(&[c(-1.0, 0.0)]);
        let mut h = Jet::variable(1, 2, 0);
        h.add_term(&[2], c(1.0, 0.0));
        let h = DiffeoJet::new(vec![h]).unwrap();
        let cert = realize(&h, &a, &RealizeOptions::default()).unwrap();
        assert_eq!(cert.nu, 5);
        assert!(cert.linear_residual < 1e-9);
        // h is already normal here, so both frames coincide.
        assert!(cert.conjugator.max_diff(&DiffeoJet::identity(1, 5)) < 1e-9);
        let g1 = cert
            .system
            .terms()
            .iter()
            .find(|t| t.xdeg == 1 && t.exp == vec![2])
            .expect("x y² term");
        let tpi = C64::new(0.0, std::f64::consts::TAU);
        assert!((g1.coeff - C64::new(1.0, 0.0) / tpi).norm() < 1e-10);
        assert_eq!(cert.input_jet.component(0).coeff(&[2]), c(1.0, 0.0));
        // Resonance table covers degrees 2..=5.
        assert_eq!(cert.resonance_table.len(), 4);
    }

    #[test]
    fn realize_rejects_obstructed_input() {
        let a = CMatrix::diag(&[c(-1.5, 0.0), c(-0.25, 0.0)]);
        let mut f1 = Jet::variable(2, 3, 0).neg();
        f1.add_term(&[0, 2], c(1.0, 0.0));
        let f2 = Jet::variable(2, 3, 1).scale(c(0.0, -1.0));
        let h = DiffeoJet::new(vec![f1, f2]).unwrap();
        let opts = RealizeOptions { nu_override: Some(3), ..Default::default() };
        match realize(&h, &a, &opts) {
            Err(Error::Obstructed(list)) => {
                assert_eq!(list.len(), 1);
                assert_eq!(list[0].j, vec![0, 2]);
            }
            other => panic!("expected obstruction, got {:?}", other.map(|c| c.nu)),
        }
    }

    #[test]
    fn shifted_matrix_realizes_the_obstructed_map() {
        // Same h, A − I: resonances move up by the degree and clear.
        let a = CMatrix::diag(&[c(-2.5, 0.0), c(-1.25, 0.0)]);
        let mut f1 = Jet::variable(2, 3, 0).neg();
        f1.add_term(&[0, 2], c(1.0, 0.0));
        let f2 = Jet::variable(2, 3, 1).scale(c(0.0, -1.0));
        let h = DiffeoJet::new(vec![f1, f2]).unwrap();
        let cert = realize(&h, &a, &RealizeOptions::default()).unwrap();
        assert_eq!(cert.nu, 5);
        // R_{(0,2);1} = −5/2 + 5/2 = 0: the y₂² term sits at x⁰.
        assert!((cert.f_suspended.component(1).coeff(&[0, 0, 2]) - c(1.0, 0.0)).norm() < 1e-9);
        assert!(cert.linear_residual < 1e-8);
    }

    #[test]
    fn multipliers_must_match_the_matrix() {
        let a = CMatrix::diag(&[c(-1.0, 0.0)]);
        let h = DiffeoJet::from_linear(&CMatrix::diag(&[c(0.5, 0.0)]), 3).unwrap();
        assert!(matches!(
            realize(&h, &a, &RealizeOptions::default()),
            Err(Error::LinearPartMismatch(_))
        ));
    }
}
