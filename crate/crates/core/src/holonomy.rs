//! Numerical ground truth for saddle systems: the holonomy jet of the loop
//! x = x₀e^{2πit} computed by transporting the full jet of the return map,
//! point transport maps f_x onto the section {x = 1}, contraction-envelope
//! fits, and sampling of the gluing cocycle f_x⁻¹∘ξ∘f_x.
//!
//! Everything here integrates the system as an ODE and never touches the
//! constructive pipeline, so it serves as an independent oracle for it.

mod rk;

pub use rk::OdeStats;

use crate::error::{Error, Result};
use crate::jets::{apply_matrix_tuple, Basis, Jet, PowerCache};
use crate::saddle::SaddleSystem;
use crate::spectral::SpectralData;
use crate::{DiffeoJet, C64};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::sync::Arc;

/// Default relative tolerance for all integrations.
pub const DEFAULT_ODE_TOL: f64 = 1e-10;

/// Requested tolerances bound the global error, not the per-step one: the
/// integrator runs at tol/ODE_SAFETY so step-error accumulation over the
/// loop stays inside the caller's budget.
const ODE_SAFETY: f64 = 20.0;

/// The holonomy return map of the positively oriented loop through x₀,
/// as an order-ν jet, plus the integrator's accounting.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HolonomyJet {
    pub jet: DiffeoJet,
    #[serde(with = "crate::linalg::c64_pair")]
    pub basepoint: C64,
    pub steps: usize,
    pub rejected: usize,
    /// Worst accepted per-step error estimate, in absolute coefficient
    /// units.
    pub tolerance_achieved: f64,
}

/// Samples and fit of the transport contraction law
/// c₁|x|^{δ₁}|u−v| ≤ |f_x(u)−f_x(v)| ≤ c₀|x|^{δ₀}|u−v|.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransportBoundReport {
    /// (|x|, measured contraction ratio) pairs.
    pub samples: Vec<(f64, f64)>,
    /// Log-log least-squares slope of ratio against |x|.
    pub exponent: f64,
    /// Smallest upper-envelope constant: ratio ≤ c₀·|x|^{δ₀} on every
    /// sample.
    pub c0: f64,
    /// Largest lower-envelope constant: ratio ≥ c₁·|x|^{δ₁} on every
    /// sample.
    pub c1: f64,
    pub delta0: f64,
    pub delta1: f64,
    /// Whether the fitted exponent lies in [δ₀ − 0.1, δ₁ + 0.1].
    pub pass: bool,
}

fn flatten(comps: &[Jet]) -> Vec<C64> {
    comps.iter().flat_map(|c| c.coeffs().iter().copied()).collect()
}

fn unflatten(basis: &Arc<Basis>, n: usize, flat: &[C64]) -> Vec<Jet> {
    let dim = basis.dim();
    (0..n)
        .map(|k| Jet::from_raw(basis.clone(), flat[k * dim..(k + 1) * dim].to_vec()))
        .collect()
}

fn holonomy_jet_oriented(
    sys: &SaddleSystem,
    nu: usize,
    x0: C64,
    tol: f64,
    sign: f64,
) -> Result<HolonomyJet> {
    if nu < 1 {
        return Err(Error::InvalidInput("holonomy jet order must be >= 1".into()));
    }
    if (x0.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "basepoint must lie on the unit circle, |x0| = {}",
            x0.norm()
        )));
    }
    let n = sys.n();
    let basis = Basis::get(n, nu);
    let linear_only = sys.is_linear();
    let factor = C64::new(0.0, sign * TAU);
    let rhs = |t: f64, flat: &[C64]| -> Result<Vec<C64>> {
        let comps = unflatten(&basis, n, flat);
        let x = x0 * (C64::new(0.0, sign * TAU * t)).exp();
        let mut out = apply_matrix_tuple(sys.a(), &comps);
        if !linear_only {
            let g = sys.g_at_x(x, nu);
            let mut pc = PowerCache::new(&comps)?;
            let gy = pc.compose_all(&g)?;
            for (o, gk) in out.iter_mut().zip(&gy) {
                o.add_assign(gk);
            }
        }
        Ok(flatten(&out).into_iter().map(|v| v * factor).collect())
    };
    let y0 = flatten(DiffeoJet::identity(n, nu).components());
    let rtol = tol / ODE_SAFETY;
    let (yend, stats) = rk::integrate(rhs, y0, 0.0, 1.0, rtol, rtol * 1e-3)?;
    let jet = DiffeoJet::new(unflatten(&basis, n, &yend))?;
    Ok(HolonomyJet {
        jet,
        basepoint: x0,
        steps: stats.steps,
        rejected: stats.rejected,
        tolerance_achieved: stats.max_error * rtol,
    })
}

/// Integrates the jet transport dY/dt = 2πi·(A·Y + G(x₀e^{2πit})∘Y) over
/// one positively oriented loop, Y(0) = id.
pub fn holonomy_jet(sys: &SaddleSystem, nu: usize, x0: C64, tol: f64) -> Result<HolonomyJet> {
    holonomy_jet_oriented(sys, nu, x0, tol, 1.0)
}

/// Same loop traversed negatively; yields the jet of the inverse holonomy.
pub fn holonomy_jet_reversed(
    sys: &SaddleSystem,
    nu: usize,
    x0: C64,
    tol: f64,
) -> Result<HolonomyJet> {
    holonomy_jet_oriented(sys, nu, x0, tol, -1.0)
}

/// Radius of the working ball in y: 0.5·max(1, max|G coeff|)^{−1/(ν−1)}.
/// Qualitative, with the escape guard at twice this value.
pub fn working_radius(sys: &SaddleSystem) -> f64 {
    let nu = sys.max_ydeg().max(2);
    let cnorm = sys.terms().iter().map(|t| t.coeff.norm()).fold(0.0f64, f64::max);
    0.5 * cnorm.max(1.0).powf(-1.0 / (nu as f64 - 1.0))
}

fn on_slit(x: C64) -> bool {
    x.im == 0.0 && x.re <= 0.0
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// A·y + G(x, y) evaluated at a point.
fn eval_y_field(sys: &SaddleSystem, x: C64, y: &[C64]) -> Vec<C64> {
    let mut v = sys.a().apply(y);
    for term in sys.terms() {
        let mut m = term.coeff * x.powu(term.xdeg as u32);
        for (l, &e) in term.exp.iter().enumerate() {
            if e > 0 {
                m *= y[l].powu(e as u32);
            }
        }
        v[term.comp] += m;
    }
    v
}

/// Transports one point once around the positively oriented loop through
/// x₀: the pointwise counterpart of evaluating the holonomy jet.
pub fn holonomy_point(sys: &SaddleSystem, x0: C64, y0: &[C64], tol: f64) -> Result<Vec<C64>> {
    let n = sys.n();
    if y0.len() != n {
        return Err(Error::DimensionMismatch(y0.len(), n));
    }
    if (x0.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "basepoint must lie on the unit circle, |x0| = {}",
            x0.norm()
        )));
    }
    let guard = 2.0 * working_radius(sys);
    let factor = C64::new(0.0, TAU);
    let rhs = |t: f64, y: &[C64]| -> Result<Vec<C64>> {
        if norm2(y) > guard {
            return Err(Error::LeftDomain { t, radius: guard });
        }
        let x = x0 * (C64::new(0.0, TAU * t)).exp();
        Ok(eval_y_field(sys, x, y).into_iter().map(|v| v * factor).collect())
    };
    let rtol = tol / ODE_SAFETY;
    let (yend, _) = rk::integrate(rhs, y0.to_vec(), 0.0, 1.0, rtol, rtol * 1e-3)?;
    Ok(yend)
}

/// Follows the leaf through (xa, y0) to the fibre over xb along the
/// log-linear path x(t) = xa^{1−t}·xb^t, staying on the slit disc.
pub fn transport_between(
    sys: &SaddleSystem,
    xa: C64,
    xb: C64,
    y0: &[C64],
    tol: f64,
) -> Result<Vec<C64>> {
    let n = sys.n();
    if y0.len() != n {
        return Err(Error::DimensionMismatch(y0.len(), n));
    }
    if on_slit(xa) || on_slit(xb) {
        return Err(Error::OnSlit);
    }
    let guard = 2.0 * working_radius(sys);
    let dlog = xb.ln() - xa.ln();
    let rhs = |t: f64, w: &[C64]| -> Result<Vec<C64>> {
        let x = w[0];
        let y = &w[1..];
        if norm2(y) > guard {
            return Err(Error::LeftDomain { t, radius: guard });
        }
        let vy = eval_y_field(sys, x, y);
        let mut out = Vec::with_capacity(n + 1);
        out.push(dlog * x);
        out.extend(vy.into_iter().map(|v| dlog * v));
        Ok(out)
    };
    let mut w0 = Vec::with_capacity(n + 1);
    w0.push(xa);
    w0.extend_from_slice(y0);
    let rtol = tol / ODE_SAFETY;
    let (wend, _) = rk::integrate(rhs, w0, 0.0, 1.0, rtol, rtol * 1e-3)?;
    Ok(wend[1..].to_vec())
}

/// The transport map f_{x₀} of the section {x = 1}: the point where the
/// leaf through (x₀, y₀) meets it.
pub fn transport_map(sys: &SaddleSystem, x0: C64, y0: &[C64], tol: f64) -> Result<Vec<C64>> {
    let r = working_radius(sys);
    if norm2(y0) > r {
        return Err(Error::InvalidInput(format!(
            "start point norm {:.3e} exceeds the working radius {:.3e}",
            norm2(y0),
            r
        )));
    }
    transport_between(sys, x0, C64::new(1.0, 0.0), y0, tol)
}

/// Measures contraction ratios of f_x over the given |x| samples, `pairs`
/// random point pairs each, and fits the power law against the spectral
/// bounds [δ₀, δ₁].
pub fn contraction_report(
    sys: &SaddleSystem,
    sd: &SpectralData,
    xs: &[f64],
    pairs: usize,
    seed: u64,
    tol: f64,
) -> Result<TransportBoundReport> {
    let n = sys.n();
    if sd.n() != n {
        return Err(Error::DimensionMismatch(sd.n(), n));
    }
    for &x in xs {
        if !(0.01..=1.0).contains(&x) || x <= 0.01 {
            return Err(Error::InvalidInput(format!("sample |x| = {x} outside (0.01, 1]")));
        }
    }
    if xs.iter().filter(|&&x| x < 1.0).count() < 2 || pairs == 0 {
        return Err(Error::InsufficientSamples);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let s = 0.5 * working_radius(sys);
    let coord_scale = s / (2.0 * n as f64).sqrt();
    let draw = |rng: &mut ChaCha12Rng| -> Vec<C64> {
        (0..n)
            .map(|_| {
                C64::new(
                    coord_scale * rng.gen_range(-1.0..1.0),
                    coord_scale * rng.gen_range(-1.0..1.0),
                )
            })
            .collect()
    };
    let mut samples = Vec::with_capacity(xs.len() * pairs);
    for &ax in xs {
        let x = C64::new(ax, 0.0);
        for _ in 0..pairs {
            let u = draw(&mut rng);
            let mut v = draw(&mut rng);
            let mut sep = norm2(&u.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>());
            while sep < 0.05 * s {
                v = draw(&mut rng);
                sep = norm2(&u.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>());
            }
            let fu = transport_map(sys, x, &u, tol)?;
            let fv = transport_map(sys, x, &v, tol)?;
            let num = norm2(&fu.iter().zip(&fv).map(|(a, b)| a - b).collect::<Vec<_>>());
            samples.push((ax, num / sep));
        }
    }
    let exponent = log_log_slope(&samples)?;
    let mut c0 = 0.0f64;
    let mut c1 = f64::INFINITY;
    for &(ax, ratio) in &samples {
        c0 = c0.max(ratio / ax.powf(sd.delta0));
        c1 = c1.min(ratio / ax.powf(sd.delta1));
    }
    let pass = exponent >= sd.delta0 - 0.1 && exponent <= sd.delta1 + 0.1;
    Ok(TransportBoundReport {
        samples,
        exponent,
        c0,
        c1,
        delta0: sd.delta0,
        delta1: sd.delta1,
        pass,
    })
}

/// 20 log-spaced |x| samples covering [0.02, 1].
pub fn default_contraction_samples() -> Vec<f64> {
    let lo = 0.02f64.ln();
    let hi = 1.0f64.ln();
    (0..20)
        .map(|i| (lo + (hi - lo) * i as f64 / 19.0).exp().min(1.0))
        .collect()
}

fn log_log_slope(samples: &[(f64, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(x, r)| x > 0.0 && r > 0.0)
        .map(|&(x, r)| (x.ln(), r.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientSamples);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in &pts {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientSamples);
    }
    Ok(sxy / sxx)
}

/// The gluing cocycle φ(x, y) = f_x⁻¹(ξ(f_x(y))) sampled at one point.
/// ξ must agree with the identity through the system's y-degree.
pub fn surgery_cocycle(
    sys: &SaddleSystem,
    xi: &DiffeoJet,
    x: C64,
    y: &[C64],
    tol: f64,
) -> Result<Vec<C64>> {
    let n = sys.n();
    if xi.nvars() != n {
        return Err(Error::NvarsMismatch(xi.nvars(), n));
    }
    let guard_order = sys.max_ydeg().min(xi.order()).max(1);
    let id = DiffeoJet::identity(n, guard_order);
    if xi.truncated(guard_order).max_diff(&id) > 1e-9 {
        return Err(Error::InvalidInput(
            "gluing map must be tangent to the identity through the system's y-degree".into(),
        ));
    }
    let u = transport_map(sys, x, y, tol)?;
    let v = xi.eval(&u);
    transport_between(sys, C64::new(1.0, 0.0), x, &v, tol)
}

/// Fits the decay exponent of |φ(x, y) − y| in |x| over the sample points;
/// returns the slope and the (|x|, distance) samples.
pub fn cocycle_decay_fit(
    sys: &SaddleSystem,
    xi: &DiffeoJet,
    xs: &[f64],
    y: &[C64],
    tol: f64,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut samples = Vec::with_capacity(xs.len());
    for &ax in xs {
        let x = C64::new(ax, 0.0);
        let phi = surgery_cocycle(sys, xi, x, y, tol)?;
        let d = norm2(&phi.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>());
        samples.push((ax, d));
    }
    let slope = log_log_slope(&samples)?;
    Ok((slope, samples))
}
