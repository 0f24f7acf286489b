//! Dense truncated multivariate power series (jets) over ℂ and the
//! diffeomorphism / vector-field wrappers built on them.
//!
//! A `Jet` is a scalar series truncated beyond a fixed total degree; maps
//! and fields are tuples of jets. All products and compositions truncate
//! back to the declared order, so every operation is exact arithmetic in
//! the quotient ring ℂ[[y]]/(y)^{order+1}.

mod basis;
mod map;

pub use basis::Basis;
pub use map::{DiffeoJet, PowerCache, VFieldJet};
pub(crate) use map::apply_matrix_tuple;

use crate::error::{Error, Result};
use crate::C64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::sync::Arc;

/// Coefficients below this modulus are dropped when serializing.
pub const JSON_COEFF_FLOOR: f64 = 1e-15;

#[derive(Clone)]
pub struct Jet {
    basis: Arc<Basis>,
    coeffs: Vec<C64>,
}

impl Jet {
    pub fn zero(nvars: usize, order: usize) -> Self {
        let basis = Basis::get(nvars, order);
        let coeffs = vec![C64::new(0.0, 0.0); basis.dim()];
        Jet { basis, coeffs }
    }

    pub fn constant(nvars: usize, order: usize, c: C64) -> Self {
        let mut j = Self::zero(nvars, order);
        j.coeffs[0] = c;
        j
    }

    /// The coordinate function y_l.
    pub fn variable(nvars: usize, order: usize, l: usize) -> Self {
        assert!(l < nvars && order >= 1);
        let mut j = Self::zero(nvars, order);
        let rank = 1 + l; // degree-1 block is ordered y_1, ..., y_n
        j.coeffs[rank] = C64::new(1.0, 0.0);
        j
    }

    pub fn monomial(nvars: usize, order: usize, exp: &[usize], c: C64) -> Self {
        let mut j = Self::zero(nvars, order);
        j.add_term(exp, c);
        j
    }

    #[inline]
    pub fn nvars(&self) -> usize {
        self.basis.nvars
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.basis.order
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    #[inline]
    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    /// Coefficient slice in rank order (graded lexicographic).
    #[inline]
    pub(crate) fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Rebuilds a jet from a full-length coefficient slice in rank order.
    pub(crate) fn from_raw(basis: Arc<Basis>, coeffs: Vec<C64>) -> Self {
        assert_eq!(coeffs.len(), basis.dim());
        Jet { basis, coeffs }
    }

    #[inline]
    pub fn coeff_by_rank(&self, r: usize) -> C64 {
        self.coeffs[r]
    }

    #[inline]
    pub fn set_by_rank(&mut self, r: usize, v: C64) {
        self.coeffs[r] = v;
    }

    pub fn coeff(&self, exp: &[usize]) -> C64 {
        let e: Vec<u16> = exp.iter().map(|&x| x as u16).collect();
        let d: usize = exp.iter().sum();
        if d > self.order() {
            return C64::new(0.0, 0.0);
        }
        self.coeffs[self.basis.rank(&e)]
    }

    pub fn add_term(&mut self, exp: &[usize], c: C64) {
        let e: Vec<u16> = exp.iter().map(|&x| x as u16).collect();
        let d: usize = exp.iter().sum();
        assert!(d <= self.order(), "monomial degree exceeds jet order");
        let r = self.basis.rank(&e);
        self.coeffs[r] += c;
    }

    pub fn constant_term(&self) -> C64 {
        self.coeffs[0]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm() == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest coefficient modulus among terms of degree ≥ `from_deg`.
    pub fn max_abs_from_degree(&self, from_deg: usize) -> f64 {
        if from_deg > self.order() {
            return 0.0;
        }
        let start = self.basis.degree_start(from_deg);
        self.coeffs[start..].iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_diff(&self, other: &Jet) -> f64 {
        assert!(self.same_signature(other));
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    #[inline]
    pub fn same_signature(&self, other: &Jet) -> bool {
        self.nvars() == other.nvars() && self.order() == other.order()
    }

    pub fn iter_nonzero(&self) -> impl Iterator<Item = (usize, &[u16], C64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() != 0.0)
            .map(move |(r, &c)| (r, self.basis.exp(r), c))
    }

    pub fn add(&self, other: &Jet) -> Jet {
        assert!(self.same_signature(other));
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Jet { basis: self.basis.clone(), coeffs }
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        assert!(self.same_signature(other));
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Jet { basis: self.basis.clone(), coeffs }
    }

    pub fn neg(&self) -> Jet {
        Jet { basis: self.basis.clone(), coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }

    pub fn scale(&self, s: C64) -> Jet {
        Jet { basis: self.basis.clone(), coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add_assign(&mut self, other: &Jet) {
        assert!(self.same_signature(other));
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    pub fn add_scaled(&mut self, other: &Jet, s: C64) {
        assert!(self.same_signature(other));
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
    }

    /// Truncated product; skips zero coefficients so cost tracks sparsity.
    pub fn mul(&self, other: &Jet) -> Jet {
        assert!(self.same_signature(other));
        let order = self.order();
        let b = &self.basis;
        let mut out = Jet::zero(self.nvars(), order);
        for (ra, ca) in self.coeffs.iter().enumerate() {
            if ca.norm() == 0.0 {
                continue;
            }
            let da = b.deg(ra);
            let limit = b.degree_start(order - da + 1);
            for rb in 0..limit {
                let cb = other.coeffs[rb];
                if cb.norm() == 0.0 {
                    continue;
                }
                let r = b.rank_sum(ra, rb);
                out.coeffs[r] += ca * cb;
            }
        }
        out
    }

    /// Partial derivative ∂/∂y_l. The declared order is kept; degree-`order`
    /// output coefficients are complete only when the result multiplies a
    /// zero-constant factor, which is how every caller in this crate uses it.
    pub fn derivative(&self, l: usize) -> Jet {
        assert!(l < self.nvars());
        let mut out = Jet::zero(self.nvars(), self.order());
        let mut buf = [0u16; 16];
        for (_, exp, c) in self.iter_nonzero() {
            let e = exp[l];
            if e == 0 {
                continue;
            }
            buf[..self.nvars()].copy_from_slice(exp);
            buf[l] -= 1;
            let rr = self.basis.rank(&buf[..self.nvars()]);
            out.coeffs[rr] += c * (e as f64);
        }
        out
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        assert_eq!(z.len(), self.nvars());
        let mut acc = C64::new(0.0, 0.0);
        for (_, exp, c) in self.iter_nonzero() {
            let mut m = c;
            for (l, &e) in exp.iter().enumerate() {
                for _ in 0..e {
                    m *= z[l];
                }
            }
            acc += m;
        }
        acc
    }

    /// Copy into a jet of a different order (truncating or zero-padding).
    pub fn with_order(&self, order: usize) -> Jet {
        let mut out = Jet::zero(self.nvars(), order);
        let keep = order.min(self.order());
        let upto = self.basis.degree_start(keep + 1);
        out.coeffs[..upto].copy_from_slice(&self.coeffs[..upto]);
        out
    }

    /// Zero every coefficient whose total degree in the variables
    /// `first_var..` exceeds `maxdeg`. Quotienting by that ideal commutes
    /// with products and with substitutions that fix the leading variables,
    /// which is what makes capped suspension arithmetic exact.
    pub fn cap_degree_from(&mut self, first_var: usize, maxdeg: usize) {
        let n = self.nvars();
        for r in 0..self.coeffs.len() {
            if self.coeffs[r].norm() == 0.0 {
                continue;
            }
            let exp = self.basis.exp(r);
            let d: usize = exp[first_var..n].iter().map(|&e| e as usize).sum();
            if d > maxdeg {
                self.coeffs[r] = C64::new(0.0, 0.0);
            }
        }
    }

    /// Composition self ∘ inner. The inner tuple must have zero constant
    /// terms; the result takes the inner signature.
    pub fn compose(&self, inner: &[Jet]) -> Result<Jet> {
        let mut cache = PowerCache::new(inner)?;
        cache.compose(self)
    }
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Jet({} vars, order {})[", self.nvars(), self.order())?;
        let mut first = true;
        for (_, exp, c) in self.iter_nonzero() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.4}{:+.4}i)y^{:?}", c.re, c.im, exp)?;
        }
        write!(f, "]")
    }
}

// JSON shape: {"nvars":n, "order":v, "terms":[{"exp":[...], "re":..., "im":...}]}
// with terms below JSON_COEFF_FLOOR omitted.

#[derive(Serialize, Deserialize)]
struct TermDto {
    exp: Vec<usize>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct JetDto {
    nvars: usize,
    order: usize,
    terms: Vec<TermDto>,
}

impl Serialize for Jet {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let terms = self
            .iter_nonzero()
            .filter(|(_, _, c)| c.norm() >= JSON_COEFF_FLOOR)
            .map(|(_, exp, c)| TermDto {
                exp: exp.iter().map(|&e| e as usize).collect(),
                re: c.re,
                im: c.im,
            })
            .collect();
        JetDto { nvars: self.nvars(), order: self.order(), terms }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Jet {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let dto = JetDto::deserialize(de)?;
        if dto.nvars == 0 || dto.nvars > 16 {
            return Err(D::Error::custom("unsupported nvars"));
        }
        let mut jet = Jet::zero(dto.nvars, dto.order);
        for t in &dto.terms {
            if t.exp.len() != dto.nvars {
                return Err(D::Error::custom("term exponent length mismatch"));
            }
            let d: usize = t.exp.iter().sum();
            if d > dto.order {
                return Err(D::Error::custom("term degree exceeds order"));
            }
            jet.add_term(&t.exp, C64::new(t.re, t.im));
        }
        Ok(jet)
    }
}

/// Validates that a tuple of jets shares one signature and has no constant
/// terms; returns the common (nvars, order).
pub(crate) fn check_tuple(components: &[Jet]) -> Result<(usize, usize)> {
    let first = components.first().ok_or_else(|| {
        Error::InvalidInput("empty component list".into())
    })?;
    let sig = (first.nvars(), first.order());
    for (k, c) in components.iter().enumerate() {
        if (c.nvars(), c.order()) != sig {
            return Err(Error::NvarsMismatch(c.nvars(), sig.0));
        }
        if c.constant_term().norm() != 0.0 {
            return Err(Error::NonzeroConstantTerm(k));
        }
    }
    Ok(sig)
}

pub(crate) use check_tuple as check_component_tuple;

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn one_var(order: usize, coeffs: &[f64]) -> Jet {
        // coeffs[k] multiplies y^(k+1)
        let mut j = Jet::zero(1, order);
        for (k, &v) in coeffs.iter().enumerate() {
            j.add_term(&[k + 1], c(v, 0.0));
        }
        j
    }

    #[test]
    fn product_of_variables() {
        let y1 = Jet::variable(2, 2, 0);
        let y2 = Jet::variable(2, 2, 1);
        let p = y1.mul(&y2);
        assert_eq!(p.coeff(&[1, 1]), c(1.0, 0.0));
        assert_eq!(p.iter_nonzero().count(), 1);
    }

    #[test]
    fn multiplication_by_one_is_identity() {
        let mut a = Jet::zero(2, 3);
        a.add_term(&[1, 0], c(2.0, -1.0));
        a.add_term(&[0, 2], c(0.5, 0.25));
        let one = Jet::constant(2, 3, c(1.0, 0.0));
        assert_eq!(a.mul(&one).max_diff(&a), 0.0);
    }

    #[test]
    fn product_truncates_beyond_order() {
        // (y + y^2)(y - y^2) = y^2 - y^4 -> y^2 at order 3
        let a = one_var(3, &[1.0, 1.0]);
        let b = one_var(3, &[1.0, -1.0]);
        let p = a.mul(&b);
        let expect = Jet::monomial(1, 3, &[2], c(1.0, 0.0));
        assert!(p.max_diff(&expect) < 1e-15);
    }

    #[test]
    fn compose_linear_shear() {
        // y1^2 composed with (y1 + y2, y2)
        let outer = Jet::monomial(2, 2, &[2, 0], c(1.0, 0.0));
        let inner = vec![
            Jet::variable(2, 2, 0).add(&Jet::variable(2, 2, 1)),
            Jet::variable(2, 2, 1),
        ];
        let r = outer.compose(&inner).unwrap();
        assert_eq!(r.coeff(&[2, 0]), c(1.0, 0.0));
        assert_eq!(r.coeff(&[1, 1]), c(2.0, 0.0));
        assert_eq!(r.coeff(&[0, 2]), c(1.0, 0.0));
    }

    #[test]
    fn compose_with_identity_tuple() {
        let mut outer = Jet::zero(2, 3);
        outer.add_term(&[1, 1], c(1.5, 0.5));
        outer.add_term(&[3, 0], c(-0.25, 0.0));
        let id = vec![Jet::variable(2, 3, 0), Jet::variable(2, 3, 1)];
        assert!(outer.compose(&id).unwrap().max_diff(&outer) < 1e-15);
    }

    #[test]
    fn compose_coordinate_with_map() {
        // y composed with y + y^2 gives y + y^2
        let outer = Jet::variable(1, 3, 0);
        let inner = vec![one_var(3, &[1.0, 1.0])];
        let r = outer.compose(&inner).unwrap();
        assert!(r.max_diff(&inner[0]) < 1e-15);
    }

    #[test]
    fn derivative_drops_degree() {
        let mut a = Jet::zero(2, 3);
        a.add_term(&[2, 1], c(3.0, 0.0));
        let d = a.derivative(0);
        assert_eq!(d.coeff(&[1, 1]), c(6.0, 0.0));
    }

    #[test]
    fn eval_matches_coefficients() {
        let a = one_var(3, &[1.0, 2.0, -0.5]);
        let z = c(0.3, 0.1);
        let expect = z + z * z * 2.0 - z * z * z * 0.5;
        assert!((a.eval(&[z]) - expect).norm() < 1e-15);
    }

    #[test]
    fn cap_degree_from_zeroes_tail() {
        let mut a = Jet::zero(2, 4);
        a.add_term(&[2, 1], c(1.0, 0.0));
        a.add_term(&[2, 2], c(1.0, 0.0));
        a.add_term(&[0, 3], c(1.0, 0.0));
        a.cap_degree_from(1, 1);
        assert_eq!(a.coeff(&[2, 1]), c(1.0, 0.0));
        assert_eq!(a.coeff(&[2, 2]), c(0.0, 0.0));
        assert_eq!(a.coeff(&[0, 3]), c(0.0, 0.0));
    }

    #[test]
    fn json_round_trip_drops_dust() {
        let mut a = Jet::zero(2, 3);
        a.add_term(&[1, 0], c(1.0, -2.0));
        a.add_term(&[0, 3], c(1e-16, 0.0)); // below the floor, dropped
        let s = serde_json::to_string(&a).unwrap();
        let b: Jet = serde_json::from_str(&s).unwrap();
        assert_eq!(b.coeff(&[1, 0]), c(1.0, -2.0));
        assert_eq!(b.coeff(&[0, 3]), c(0.0, 0.0));
        assert_eq!(b.order(), 3);
    }
}
