//! Exponential and logarithm between jet diffeomorphisms and jet vector
//! fields in the unipotent/nilpotent regime, plus the multiplicative
//! semisimple × unipotent factorization of suspended maps.
//!
//! exp sends a nilpotent field X to its time-1 flow y ↦ y + Σ Xᵏ(y)/k!;
//! log inverts it through the finite-difference operator Θ(h) = h∘f − h via
//! log f = Σ (−1)^{k+1} Θᵏ(y)/k. Both series terminate exactly on nilpotent
//! input; floating-point dust is cut off once terms drop below a relative
//! floor, and a hard iteration cap converts genuine non-termination into an
//! error instead of a hang.
//!
//! Degree-capped variants run in the quotient by (y_first..y_last)^{maxdeg+1}.
//! That quotient arithmetic is exact provided every capped-variable
//! component of the input lies in the ideal generated by the capped
//! variables, which holds for every caller in this crate (suspended maps fix
//! x and move y within (y)).

use crate::error::{Error, Result};
use crate::jets::{check_component_tuple, Jet, PowerCache};
use crate::linalg::CMatrix;
use crate::{DiffeoJet, Tolerances, VFieldJet, C64};

/// Relative floor at which exp/log series terms count as converged.
pub const SERIES_STOP_TOL: f64 = 1e-15;

fn apply_cap(j: &mut Jet, cap: Option<(usize, usize)>) {
    if let Some((fv, md)) = cap {
        j.cap_degree_from(fv, md);
    }
}

/// Time-1 flow of the field with the given components: out_j = y_j +
/// Σ_{k≥1} Xᵏ(y_j)/k!. Errors with NonNilpotent when the series fails to
/// terminate.
pub(crate) fn exp_vf_core(
    x: &[Jet],
    cap: Option<(usize, usize)>,
    stop_tol: f64,
) -> Result<Vec<Jet>> {
    let (nvars, order) = check_component_tuple(x)?;
    let mut field_comps = x.to_vec();
    for c in &mut field_comps {
        apply_cap(c, cap);
    }
    let field = VFieldJet::new(field_comps)?;
    let itcap = crate::jets::Basis::get(nvars, order).dim() + 1;
    let mut out: Vec<Jet> = (0..nvars).map(|j| Jet::variable(nvars, order, j)).collect();
    let mut term = out.clone();
    let mut scale: f64 = 1.0_f64.max(x.iter().map(Jet::max_abs).fold(0.0, f64::max));
    for k in 1..=itcap {
        let inv_k = C64::new(1.0 / k as f64, 0.0);
        term = term
            .iter()
            .map(|t| {
                let mut next = field.apply_to(t).scale(inv_k);
                apply_cap(&mut next, cap);
                next
            })
            .collect();
        if term.iter().all(Jet::is_zero) {
            return Ok(out);
        }
        for (o, t) in out.iter_mut().zip(&term) {
            o.add_assign(t);
        }
        scale = scale.max(out.iter().map(Jet::max_abs).fold(0.0, f64::max));
        let tnorm = term.iter().map(Jet::max_abs).fold(0.0, f64::max);
        if tnorm <= stop_tol * scale {
            return Ok(out);
        }
    }
    Err(Error::NonNilpotent)
}

/// Logarithm of the diffeomorphism with the given components: out_j =
/// Σ_{k≥1} (−1)^{k+1} Θᵏ(y_j)/k with Θ(h) = h∘f − h. Errors with
/// NonUnipotent when the series fails to terminate.
pub(crate) fn log_diffeo_core(
    f: &[Jet],
    cap: Option<(usize, usize)>,
    stop_tol: f64,
) -> Result<Vec<Jet>> {
    let (nvars, order) = check_component_tuple(f)?;
    let mut cache = match cap {
        Some((fv, md)) => PowerCache::with_cap(f, fv, md)?,
        None => PowerCache::new(f)?,
    };
    let itcap = crate::jets::Basis::get(nvars, order).dim() + 1;
    let mut out = vec![Jet::zero(nvars, order); nvars];
    let mut term: Vec<Jet> = (0..nvars).map(|j| Jet::variable(nvars, order, j)).collect();
    let mut scale: f64 = 1.0_f64.max(f.iter().map(Jet::max_abs).fold(0.0, f64::max));
    for k in 1..=itcap {
        term = term
            .iter()
            .map(|t| Ok(cache.compose(t)?.sub(t)))
            .collect::<Result<Vec<Jet>>>()?;
        if term.iter().all(Jet::is_zero) {
            return Ok(out);
        }
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let factor = C64::new(sign / k as f64, 0.0);
        for (o, t) in out.iter_mut().zip(&term) {
            o.add_scaled(t, factor);
        }
        scale = scale.max(out.iter().map(Jet::max_abs).fold(0.0, f64::max));
        let tnorm = term.iter().map(Jet::max_abs).fold(0.0, f64::max) / k as f64;
        if tnorm <= stop_tol * scale {
            return Ok(out);
        }
    }
    Err(Error::NonUnipotent)
}

/// A jet diffeomorphism whose linear part L is unipotent:
/// ‖(L−I)ⁿ‖ ≤ tol·max(1, ‖L‖).
#[derive(Clone, Debug)]
pub struct UnipotentJet {
    map: DiffeoJet,
}

impl UnipotentJet {
    pub fn new(map: DiffeoJet, tol_mat: f64) -> Result<Self> {
        let n = map.nvars();
        let l = map.linear_matrix();
        let d = l.sub(&CMatrix::identity(n));
        if d.pow(n).max_abs() > tol_mat * l.max_abs().max(1.0) {
            return Err(Error::NonUnipotent);
        }
        Ok(UnipotentJet { map })
    }

    pub fn map(&self) -> &DiffeoJet {
        &self.map
    }

    pub fn into_map(self) -> DiffeoJet {
        self.map
    }

    /// log of the map as a nilpotent vector field.
    pub fn log(&self, tol: &Tolerances) -> Result<NilpotentVF> {
        self.log_capped(None, tol)
    }

    pub(crate) fn log_capped(
        &self,
        cap: Option<(usize, usize)>,
        tol: &Tolerances,
    ) -> Result<NilpotentVF> {
        let comps = log_diffeo_core(self.map.components(), cap, SERIES_STOP_TOL)?;
        NilpotentVF::new(VFieldJet::new(comps)?, tol.mat)
    }
}

/// A jet vector field whose linear part L is nilpotent: ‖Lⁿ‖ ≤ tol·max(1, ‖L‖).
#[derive(Clone, Debug)]
pub struct NilpotentVF {
    field: VFieldJet,
}

impl NilpotentVF {
    pub fn new(field: VFieldJet, tol_mat: f64) -> Result<Self> {
        let n = field.nvars();
        let l = field.linear_matrix();
        if l.pow(n).max_abs() > tol_mat * l.max_abs().max(1.0) {
            return Err(Error::NonNilpotent);
        }
        Ok(NilpotentVF { field })
    }

    pub fn field(&self) -> &VFieldJet {
        &self.field
    }

    pub fn into_field(self) -> VFieldJet {
        self.field
    }

    /// Time-1 flow of the field as a unipotent diffeomorphism.
    pub fn exp(&self, tol: &Tolerances) -> Result<UnipotentJet> {
        self.exp_capped(None, tol)
    }

    pub(crate) fn exp_capped(
        &self,
        cap: Option<(usize, usize)>,
        tol: &Tolerances,
    ) -> Result<UnipotentJet> {
        let comps = exp_vf_core(self.field.components(), cap, SERIES_STOP_TOL)?;
        UnipotentJet::new(DiffeoJet::new(comps)?, tol.mat)
    }
}

/// Splits a suspended map F = (x, F_1, …, F_n) multiplicatively as
/// F = diag(1, λ) ∘ F_u and returns the unipotent factor F_u.
///
/// Requires: the first component is exactly x (the map fixes the transverse
/// coordinate), and the linear part commutes with diag(1, λ) up to the
/// matrix tolerance, i.e. the map is already expressed in coordinates where
/// its semisimple linear factor is the given diagonal.
pub fn suspended_unipotent_factor(
    f: &DiffeoJet,
    lambda: &[C64],
    tol: &Tolerances,
) -> Result<UnipotentJet> {
    let nv = f.nvars();
    if lambda.len() + 1 != nv {
        return Err(Error::DimensionMismatch(lambda.len() + 1, nv));
    }
    let x_jet = Jet::variable(nv, f.order(), 0);
    if f.component(0).max_diff(&x_jet) > tol.coeff {
        return Err(Error::XNotFixed);
    }
    let mut lam_ext = Vec::with_capacity(nv);
    lam_ext.push(C64::new(1.0, 0.0));
    lam_ext.extend_from_slice(lambda);
    if lam_ext.iter().any(|l| l.norm() == 0.0) {
        return Err(Error::InvalidInput("zero multiplier".into()));
    }
    let l = f.linear_matrix();
    let d = CMatrix::diag(&lam_ext);
    let comm = l.commutator(&d).max_abs();
    if comm > tol.mat * l.max_abs().max(1.0) {
        return Err(Error::NotNormalized(comm));
    }
    let comps: Vec<Jet> = f
        .components()
        .iter()
        .zip(&lam_ext)
        .map(|(c, &lam)| c.scale(C64::new(1.0, 0.0) / lam))
        .collect();
    UnipotentJet::new(DiffeoJet::new(comps)?, tol.mat)
}
