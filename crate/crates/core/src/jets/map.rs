//! Tuples of jets acting as maps and vector fields: composition with
//! memoized powers, functional inversion, conjugation, Lie bracket, and
//! pullback.

use super::{check_component_tuple, Jet};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::C64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Memoizes powers of a substitution tuple so repeated compositions against
/// the same inner map cost one truncated product per new power.
pub struct PowerCache {
    inner: Vec<Jet>,
    nvars: usize,
    order: usize,
    powers: Vec<Vec<Jet>>, // powers[l][e-1] = inner[l]^e
    cap: Option<(usize, usize)>,
}

impl PowerCache {
    pub fn new(inner: &[Jet]) -> Result<Self> {
        let (nvars, order) = check_component_tuple(inner)?;
        Ok(PowerCache {
            inner: inner.to_vec(),
            nvars,
            order,
            powers: vec![Vec::new(); inner.len()],
            cap: None,
        })
    }

    /// As `new`, but every intermediate product is reduced modulo the ideal
    /// generated by degree > `maxdeg` monomials in the variables
    /// `first_var..`. Exact whenever the caller works in that quotient.
    pub fn with_cap(inner: &[Jet], first_var: usize, maxdeg: usize) -> Result<Self> {
        let mut cache = Self::new(inner)?;
        cache.cap = Some((first_var, maxdeg));
        for j in &mut cache.inner {
            j.cap_degree_from(first_var, maxdeg);
        }
        Ok(cache)
    }

    fn apply_cap(&self, j: &mut Jet) {
        if let Some((fv, md)) = self.cap {
            j.cap_degree_from(fv, md);
        }
    }

    fn ensure_power(&mut self, l: usize, e: usize) {
        if self.powers[l].is_empty() {
            self.powers[l].push(self.inner[l].clone());
        }
        while self.powers[l].len() < e {
            let mut next = self.powers[l].last().unwrap().mul(&self.inner[l]);
            self.apply_cap(&mut next);
            self.powers[l].push(next);
        }
    }

    /// outer ∘ inner, truncated to the inner signature.
    pub fn compose(&mut self, outer: &Jet) -> Result<Jet> {
        if outer.nvars() != self.inner.len() {
            return Err(Error::NvarsMismatch(outer.nvars(), self.inner.len()));
        }
        let mut out = Jet::zero(self.nvars, self.order);
        let terms: Vec<(Vec<u16>, C64)> = outer
            .iter_nonzero()
            .map(|(_, exp, c)| (exp.to_vec(), c))
            .collect();
        for (exp, c) in terms {
            let deg: usize = exp.iter().map(|&e| e as usize).sum();
            if deg == 0 {
                out.set_by_rank(0, out.coeff_by_rank(0) + c);
                continue;
            }
            if deg > self.order {
                continue; // each factor vanishes at 0, so the product truncates away
            }
            let mut acc: Option<Jet> = None;
            for (l, &e) in exp.iter().enumerate() {
                let e = e as usize;
                if e == 0 {
                    continue;
                }
                self.ensure_power(l, e);
                let p = &self.powers[l][e - 1];
                acc = Some(match acc {
                    None => p.clone(),
                    Some(a) => {
                        let mut m = a.mul(p);
                        self.apply_cap(&mut m);
                        m
                    }
                });
                if acc.as_ref().unwrap().is_zero() {
                    break;
                }
            }
            if let Some(a) = acc {
                out.add_scaled(&a, c);
            }
        }
        Ok(out)
    }

    pub fn compose_all(&mut self, outer: &[Jet]) -> Result<Vec<Jet>> {
        outer.iter().map(|j| self.compose(j)).collect()
    }
}

/// Applies a constant matrix to a tuple of jets componentwise:
/// out_k = sum_l m[k][l] * comps[l].
pub(crate) fn apply_matrix_tuple(m: &CMatrix, comps: &[Jet]) -> Vec<Jet> {
    assert_eq!(m.n, comps.len());
    (0..m.n)
        .map(|k| {
            let mut acc = Jet::zero(comps[0].nvars(), comps[0].order());
            for (l, comp) in comps.iter().enumerate() {
                let c = m.get(k, l);
                if c.norm() != 0.0 {
                    acc.add_scaled(comp, c);
                }
            }
            acc
        })
        .collect()
}

/// Jet of a self-map of (ℂ^n, 0): one jet per coordinate, zero constant
/// terms, invertible linear part.
#[derive(Clone, Debug)]
pub struct DiffeoJet {
    components: Vec<Jet>,
}

impl DiffeoJet {
    pub fn new(components: Vec<Jet>) -> Result<Self> {
        let (nvars, order) = check_component_tuple(&components)?;
        if components.len() != nvars {
            return Err(Error::NvarsMismatch(components.len(), nvars));
        }
        if order == 0 {
            return Err(Error::InvalidInput("map jets need order >= 1".into()));
        }
        let map = DiffeoJet { components };
        map.linear_matrix()
            .inverse()
            .map_err(|_| Error::SingularLinearPart)?;
        Ok(map)
    }

    pub fn identity(nvars: usize, order: usize) -> Self {
        let components = (0..nvars).map(|l| Jet::variable(nvars, order, l)).collect();
        DiffeoJet { components }
    }

    pub fn from_linear(m: &CMatrix, order: usize) -> Result<Self> {
        let id = Self::identity(m.n, order);
        Self::new(apply_matrix_tuple(m, &id.components))
    }

    #[inline]
    pub fn nvars(&self) -> usize {
        self.components.len()
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.components[0].order()
    }

    #[inline]
    pub fn component(&self, k: usize) -> &Jet {
        &self.components[k]
    }

    #[inline]
    pub fn component_mut(&mut self, k: usize) -> &mut Jet {
        &mut self.components[k]
    }

    #[inline]
    pub fn components(&self) -> &[Jet] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Jet> {
        self.components
    }

    /// L with f_k = sum_l L[k][l] y_l + higher order.
    pub fn linear_matrix(&self) -> CMatrix {
        let n = self.nvars();
        let mut m = CMatrix::zeros(n);
        let mut exp = vec![0usize; n];
        for k in 0..n {
            for l in 0..n {
                exp[l] = 1;
                m.set(k, l, self.components[k].coeff(&exp));
                exp[l] = 0;
            }
        }
        m
    }

    /// self ∘ other.
    pub fn compose(&self, other: &DiffeoJet) -> Result<DiffeoJet> {
        let mut cache = PowerCache::new(&other.components)?;
        DiffeoJet::new(cache.compose_all(&self.components)?)
    }

    /// Two-sided compositional inverse, computed degree by degree and
    /// checked against the identity.
    pub fn invert(&self) -> Result<DiffeoJet> {
        let n = self.nvars();
        let order = self.order();
        let linv = self
            .linear_matrix()
            .inverse()
            .map_err(|_| Error::SingularLinearPart)?;
        let mut g = apply_matrix_tuple(&linv, &DiffeoJet::identity(n, order).components);
        let id = DiffeoJet::identity(n, order);
        for _ in 2..=order {
            let mut cache = PowerCache::new(&g)?;
            let fg = cache.compose_all(&self.components)?;
            let defect: Vec<Jet> = fg
                .iter()
                .zip(id.components.iter())
                .map(|(a, b)| a.sub(b))
                .collect();
            let correction = apply_matrix_tuple(&linv, &defect);
            for (gk, ck) in g.iter_mut().zip(&correction) {
                *gk = gk.sub(ck);
            }
        }
        let g = DiffeoJet::new(g)?;
        let residual = self.compose(&g)?.max_diff(&id).max(g.compose(self)?.max_diff(&id));
        let scale = self.max_abs().max(1.0);
        if residual > 1e-13 * scale {
            return Err(Error::IllConditioned(format!(
                "inversion residual {residual:.3e} exceeds tolerance"
            )));
        }
        Ok(g)
    }

    /// by⁻¹ ∘ self ∘ by.
    pub fn conjugate_by(&self, by: &DiffeoJet) -> Result<DiffeoJet> {
        by.invert()?.compose(self)?.compose(by)
    }

    /// psi ∘ self ∘ psi⁻¹: the same map expressed in the coordinates
    /// z = psi(y).
    pub fn conjugate(&self, psi: &DiffeoJet) -> Result<DiffeoJet> {
        psi.compose(self)?.compose(&psi.invert()?)
    }

    pub fn eval(&self, z: &[C64]) -> Vec<C64> {
        self.components.iter().map(|c| c.eval(z)).collect()
    }

    pub fn truncated(&self, order: usize) -> DiffeoJet {
        DiffeoJet { components: self.components.iter().map(|c| c.with_order(order)).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(Jet::max_abs).fold(0.0, f64::max)
    }

    pub fn max_diff(&self, other: &DiffeoJet) -> f64 {
        assert_eq!(self.nvars(), other.nvars());
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.max_diff(b))
            .fold(0.0, f64::max)
    }

    /// Max coefficient modulus over terms of degree >= 2, i.e. the distance
    /// to the map's own linear part.
    pub fn nonlinear_max_abs(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.max_abs_from_degree(2))
            .fold(0.0, f64::max)
    }
}

/// Jet of a vector field vanishing at the origin: one jet per ∂/∂y_k
/// coefficient.
#[derive(Clone, Debug)]
pub struct VFieldJet {
    components: Vec<Jet>,
}

impl VFieldJet {
    pub fn new(components: Vec<Jet>) -> Result<Self> {
        let (nvars, _) = check_component_tuple(&components)?;
        if components.len() != nvars {
            return Err(Error::NvarsMismatch(components.len(), nvars));
        }
        Ok(VFieldJet { components })
    }

    pub fn zero(nvars: usize, order: usize) -> Self {
        VFieldJet { components: vec![Jet::zero(nvars, order); nvars] }
    }

    pub fn from_linear(m: &CMatrix, order: usize) -> Self {
        let id = DiffeoJet::identity(m.n, order);
        VFieldJet { components: apply_matrix_tuple(m, id.components()) }
    }

    #[inline]
    pub fn nvars(&self) -> usize {
        self.components.len()
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.components[0].order()
    }

    #[inline]
    pub fn component(&self, k: usize) -> &Jet {
        &self.components[k]
    }

    #[inline]
    pub fn component_mut(&mut self, k: usize) -> &mut Jet {
        &mut self.components[k]
    }

    #[inline]
    pub fn components(&self) -> &[Jet] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Jet> {
        self.components
    }

    pub fn linear_matrix(&self) -> CMatrix {
        let n = self.nvars();
        let mut m = CMatrix::zeros(n);
        let mut exp = vec![0usize; n];
        for k in 0..n {
            for l in 0..n {
                exp[l] = 1;
                m.set(k, l, self.components[k].coeff(&exp));
                exp[l] = 0;
            }
        }
        m
    }

    /// Derivation applied to a scalar jet: sum_k X_k ∂h/∂y_k. Exact in the
    /// quotient ring because every X_k vanishes at the origin.
    pub fn apply_to(&self, h: &Jet) -> Jet {
        let mut acc = Jet::zero(h.nvars(), h.order());
        for (k, xk) in self.components.iter().enumerate() {
            if xk.is_zero() {
                continue;
            }
            acc.add_assign(&xk.mul(&h.derivative(k)));
        }
        acc
    }

    /// Lie bracket [self, other] = self·∇(other) − other·∇(self).
    pub fn bracket(&self, other: &VFieldJet) -> VFieldJet {
        assert_eq!(self.nvars(), other.nvars());
        let components = (0..self.nvars())
            .map(|k| self.apply_to(&other.components[k]).sub(&other.apply_to(&self.components[k])))
            .collect();
        VFieldJet { components }
    }

    pub fn add(&self, other: &VFieldJet) -> VFieldJet {
        VFieldJet {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &VFieldJet) -> VFieldJet {
        VFieldJet {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn scale(&self, s: C64) -> VFieldJet {
        VFieldJet { components: self.components.iter().map(|c| c.scale(s)).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(Jet::max_abs).fold(0.0, f64::max)
    }

    pub fn max_diff(&self, other: &VFieldJet) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.max_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn truncated(&self, order: usize) -> VFieldJet {
        VFieldJet { components: self.components.iter().map(|c| c.with_order(order)).collect() }
    }

    /// Pullback f*X: the field W with df·W = X ∘ f, solved by a Neumann
    /// series that terminates because the correction raises degree.
    pub fn pullback(&self, f: &DiffeoJet) -> Result<VFieldJet> {
        self.pullback_impl(f, None)
    }

    /// Pullback computed in the quotient ring that drops terms of degree
    /// greater than `maxdeg` in the variables from `first_var` on.
    pub(crate) fn pullback_capped(
        &self,
        f: &DiffeoJet,
        first_var: usize,
        maxdeg: usize,
    ) -> Result<VFieldJet> {
        self.pullback_impl(f, Some((first_var, maxdeg)))
    }

    fn pullback_impl(&self, f: &DiffeoJet, cap: Option<(usize, usize)>) -> Result<VFieldJet> {
        if self.nvars() != f.nvars() {
            return Err(Error::NvarsMismatch(self.nvars(), f.nvars()));
        }
        let n = self.nvars();
        let order = self.order();
        let capped = |mut j: Jet| {
            if let Some((fv, md)) = cap {
                j.cap_degree_from(fv, md);
            }
            j
        };
        let linv = f
            .linear_matrix()
            .inverse()
            .map_err(|_| Error::SingularLinearPart)?;
        let mut cache = match cap {
            Some((fv, md)) => PowerCache::with_cap(f.components(), fv, md)?,
            None => PowerCache::new(f.components())?,
        };
        let xf = cache.compose_all(&self.components)?;
        let b = apply_matrix_tuple(&linv, &xf);

        // m[k][l] = (L⁻¹ df)_{kl} − δ_{kl}; entries vanish at 0.
        let df: Vec<Vec<Jet>> = (0..n)
            .map(|k| (0..n).map(|l| f.component(k).derivative(l)).collect())
            .collect();
        let m: Vec<Vec<Jet>> = (0..n)
            .map(|k| {
                (0..n)
                    .map(|l| {
                        let mut acc = Jet::zero(n, order);
                        for (r, dfr) in df.iter().enumerate() {
                            let c = linv.get(k, r);
                            if c.norm() != 0.0 {
                                acc.add_scaled(&dfr[l], c);
                            }
                        }
                        if k == l {
                            acc = acc.sub(&Jet::constant(n, order, C64::new(1.0, 0.0)));
                        }
                        acc
                    })
                    .collect()
            })
            .collect();

        let mut w = b.clone();
        let mut term = b;
        for _ in 0..order {
            let next: Vec<Jet> = (0..n)
                .map(|k| {
                    let mut acc = Jet::zero(n, order);
                    for (l, tl) in term.iter().enumerate() {
                        acc.add_assign(&capped(m[k][l].mul(tl)));
                    }
                    acc.neg()
                })
                .collect();
            if next.iter().all(Jet::is_zero) {
                break;
            }
            for (wk, nk) in w.iter_mut().zip(&next) {
                wk.add_assign(nk);
            }
            term = next;
        }
        VFieldJet::new(w)
    }
}

#[derive(Serialize, Deserialize)]
struct TupleDto {
    components: Vec<Jet>,
}

impl Serialize for DiffeoJet {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        TupleDto { components: self.components.clone() }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for DiffeoJet {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let dto = TupleDto::deserialize(de)?;
        DiffeoJet::new(dto.components).map_err(D::Error::custom)
    }
}

impl Serialize for VFieldJet {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        TupleDto { components: self.components.clone() }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for VFieldJet {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let dto = TupleDto::deserialize(de)?;
        VFieldJet::new(dto.components).map_err(D::Error::custom)
    }
}
