//! Saddle-form holomorphic vector fields
//!
//! ```text
//! x' = x,    y' = A·y + G(x, y),
//! ```
//!
//! with y ∈ ℂⁿ, A a matrix whose spectrum lies in the open left half plane,
//! and G vanishing to second order in y. The x-axis is the invariant leaf
//! along which holonomy is computed; the y-directions are uniformly
//! contracted.

use crate::error::{Error, Result};
use crate::jets::{Basis, Jet};
use crate::linalg::CMatrix;
use crate::{VFieldJet, C64};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One monomial term of G: coeff · x^xdeg · y^exp on component `comp`
/// (0-based). |exp| ≥ 2 always; the linear-in-y part of the field lives in
/// the matrix A, never here.
#[derive(Clone, Debug, PartialEq)]
pub struct SaddleTerm {
    pub xdeg: usize,
    pub comp: usize,
    pub exp: Vec<u16>,
    pub coeff: C64,
}

/// A saddle-form field, stored as the matrix A plus the monomials of G.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    n: usize,
    a: CMatrix,
    terms: Vec<SaddleTerm>,
}

impl SaddleSystem {
    /// Validates shape: every term must target a component < n, carry an
    /// exponent of length n, and have y-degree ≥ 2.
    pub fn new(a: CMatrix, terms: Vec<SaddleTerm>) -> Result<Self> {
        let n = a.n;
        if n == 0 {
            return Err(Error::InvalidInput("saddle system needs n >= 1".into()));
        }
        for t in &terms {
            if t.comp >= n {
                return Err(Error::InvalidInput(format!(
                    "term targets component {} of {}",
                    t.comp + 1,
                    n
                )));
            }
            if t.exp.len() != n {
                return Err(Error::NvarsMismatch(t.exp.len(), n));
            }
            let ydeg: usize = t.exp.iter().map(|&e| e as usize).sum();
            if ydeg < 2 {
                return Err(Error::InvalidInput(format!(
                    "nonlinear term x^{} y^{:?} has y-degree {} < 2",
                    t.xdeg, t.exp, ydeg
                )));
            }
        }
        Ok(SaddleSystem { n, a, terms })
    }

    /// The linear system y' = A·y (G = 0).
    pub fn linear(a: CMatrix) -> Result<Self> {
        Self::new(a, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn terms(&self) -> &[SaddleTerm] {
        &self.terms
    }

    pub fn is_linear(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_xdeg(&self) -> usize {
        self.terms.iter().map(|t| t.xdeg).max().unwrap_or(0)
    }

    pub fn max_ydeg(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.exp.iter().map(|&e| e as usize).sum())
            .max()
            .unwrap_or(1)
    }

    /// G(x, ·) as n jets in the y-variables at the given order, for a fixed
    /// numeric x.
    pub fn g_at_x(&self, x: C64, order: usize) -> Vec<Jet> {
        let mut out = vec![Jet::zero(self.n, order); self.n];
        for t in &self.terms {
            let ydeg: usize = t.exp.iter().map(|&e| e as usize).sum();
            if ydeg > order {
                continue;
            }
            let c = t.coeff * x.powu(t.xdeg as u32);
            let exp: Vec<usize> = t.exp.iter().map(|&e| e as usize).collect();
            out[t.comp].add_term(&exp, c);
        }
        out
    }

    /// The full suspended field x∂ₓ + (A·y + G(x,y))·∂_y as an
    /// (n+1)-variable vector-field jet (variable 0 is x) of the given total
    /// order. Terms of total degree beyond the order are dropped.
    pub fn suspended_field(&self, order: usize) -> VFieldJet {
        let nv = self.n + 1;
        let mut comps = vec![Jet::zero(nv, order); nv];
        comps[0] = Jet::variable(nv, order, 0);
        let mut exp = vec![0usize; nv];
        for k in 0..self.n {
            for l in 0..self.n {
                let c = self.a.get(k, l);
                if c.norm() != 0.0 {
                    exp.iter_mut().for_each(|e| *e = 0);
                    exp[1 + l] = 1;
                    comps[1 + k].add_term(&exp, c);
                }
            }
        }
        for t in &self.terms {
            let ydeg: usize = t.exp.iter().map(|&e| e as usize).sum();
            if t.xdeg + ydeg > order {
                continue;
            }
            exp[0] = t.xdeg;
            for (e, te) in exp[1..].iter_mut().zip(&t.exp) {
                *e = *te as usize;
            }
            comps[1 + t.comp].add_term(&exp, t.coeff);
        }
        VFieldJet::new(comps).expect("suspended components share a signature")
    }

    /// Rebuilds a saddle system from an (n+1)-variable field jet whose first
    /// component is exactly x. Extracts A from the x-independent linear-in-y
    /// part; any x-dependent linear-in-y term or y-independent term would
    /// fall outside the saddle form and is rejected. Coefficients below
    /// `floor` are dropped.
    pub fn from_suspended(field: &VFieldJet, floor: f64) -> Result<Self> {
        let nv = field.nvars();
        if nv < 2 {
            return Err(Error::InvalidInput("suspended field needs >= 2 variables".into()));
        }
        let n = nv - 1;
        let order = field.order();
        let x_jet = Jet::variable(nv, order, 0);
        if field.component(0).max_diff(&x_jet) > floor {
            return Err(Error::XNotFixed);
        }
        let mut a = CMatrix::zeros(n);
        let mut terms = Vec::new();
        for k in 0..n {
            for (_, exp, c) in field.component(1 + k).iter_nonzero() {
                if c.norm() <= floor {
                    continue;
                }
                let xdeg = exp[0] as usize;
                let ydeg: usize = exp[1..].iter().map(|&e| e as usize).sum();
                match ydeg {
                    0 => {
                        return Err(Error::InvalidInput(format!(
                            "component {} carries the y-independent term x^{}",
                            k + 1,
                            xdeg
                        )))
                    }
                    1 => {
                        let l = exp[1..].iter().position(|&e| e == 1).unwrap();
                        if xdeg != 0 {
                            return Err(Error::InvalidInput(format!(
                                "component {} carries the x-dependent linear term x^{} y_{}",
                                k + 1,
                                xdeg,
                                l + 1
                            )));
                        }
                        a.set(k, l, c);
                    }
                    _ => terms.push(SaddleTerm {
                        xdeg,
                        comp: k,
                        exp: exp[1..].to_vec(),
                        coeff: c,
                    }),
                }
            }
        }
        SaddleSystem::new(a, terms)
    }

    /// Largest y-degree representable alongside max_xdeg within one jet
    /// order: the order needed for `suspended_field` to carry every stored
    /// term.
    pub fn full_order(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.xdeg + t.exp.iter().map(|&e| e as usize).sum::<usize>())
            .max()
            .unwrap_or(1)
    }
}

#[derive(Serialize, Deserialize)]
struct TermDto {
    xdeg: usize,
    comp: usize,
    exp: Vec<u16>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct SystemDto {
    n: usize,
    #[serde(rename = "A")]
    a: CMatrix,
    #[serde(rename = "G")]
    g: Vec<TermDto>,
}

impl Serialize for SaddleSystem {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        SystemDto {
            n: self.n,
            a: self.a.clone(),
            g: self
                .terms
                .iter()
                .map(|t| TermDto {
                    xdeg: t.xdeg,
                    comp: t.comp,
                    exp: t.exp.clone(),
                    re: t.coeff.re,
                    im: t.coeff.im,
                })
                .collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for SaddleSystem {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let dto = SystemDto::deserialize(de)?;
        if dto.a.n != dto.n {
            return Err(D::Error::custom(format!(
                "declared n = {} but A is {}x{}",
                dto.n, dto.a.n, dto.a.n
            )));
        }
        let terms = dto
            .g
            .into_iter()
            .map(|t| SaddleTerm {
                xdeg: t.xdeg,
                comp: t.comp,
                exp: t.exp,
                coeff: C64::new(t.re, t.im),
            })
            .collect();
        SaddleSystem::new(dto.a, terms).map_err(D::Error::custom)
    }
}

/// Scans a y-jet tuple for use as G components: every entry must vanish to
/// second order.
pub fn check_second_order(components: &[Jet]) -> Result<()> {
    for (k, c) in components.iter().enumerate() {
        let basis: &Basis = c.basis();
        for r in 0..basis.degree_start(2).min(c.dim()) {
            if c.coeff_by_rank(r).norm() != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "component {} has a term of degree < 2",
                    k + 1
                )));
            }
        }
    }
    Ok(())
}
