//! Small dense complex matrices.
//!
//! Everything here targets the tiny systems of this crate (n ≤ 10 or so):
//! Gaussian elimination with partial pivoting is plenty, and owning the
//! pivot thresholds keeps rank decisions consistent with the crate-wide
//! tolerances instead of a foreign eigensolver's.

use crate::error::{Error, Result};
use crate::C64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub n: usize,
    pub data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix { n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.data[i * d.len() + i] = v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch(row.len(), n));
            }
            data.extend_from_slice(row);
        }
        Ok(CMatrix { n, data })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.n + j] = v;
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        CMatrix { n: self.n, data }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        CMatrix { n: self.n, data }
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix { n: self.n, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn pow(&self, k: usize) -> CMatrix {
        let mut out = CMatrix::identity(self.n);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn commutator(&self, other: &CMatrix) -> CMatrix {
        self.mul(other).sub(&other.mul(self))
    }

    /// Inverse by Gaussian elimination with partial pivoting.
    pub fn inverse(&self) -> Result<CMatrix> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut inv = CMatrix::identity(n);
        let scale = self.max_abs().max(1.0);
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&r, &s| {
                    a[r * n + col].norm().partial_cmp(&a[s * n + col].norm()).unwrap()
                })
                .unwrap();
            if a[pivot_row * n + col].norm() <= 1e-14 * scale {
                return Err(Error::SingularMatrix);
            }
            if pivot_row != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot_row * n + j);
                    inv.data.swap(col * n + j, pivot_row * n + j);
                }
            }
            let p = a[col * n + col];
            for j in 0..n {
                a[col * n + j] /= p;
                inv.data[col * n + j] /= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[r * n + col];
                if f == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    let t = a[col * n + j] * f;
                    a[r * n + j] -= t;
                    let t = inv.data[col * n + j] * f;
                    inv.data[r * n + j] -= t;
                }
            }
        }
        Ok(inv)
    }

    /// Basis of the null space, entries below `tol` treated as zero.
    pub fn null_space(&self, tol: f64) -> Vec<Vec<C64>> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut pivot_cols = Vec::new();
        let mut row = 0;
        for col in 0..n {
            let pivot_row = (row..n)
                .max_by(|&r, &s| {
                    a[r * n + col].norm().partial_cmp(&a[s * n + col].norm()).unwrap()
                })
                .unwrap_or(row);
            if row >= n || a[pivot_row * n + col].norm() <= tol {
                continue;
            }
            if pivot_row != row {
                for j in 0..n {
                    a.swap(row * n + j, pivot_row * n + j);
                }
            }
            let p = a[row * n + col];
            for j in 0..n {
                a[row * n + j] /= p;
            }
            for r in 0..n {
                if r == row {
                    continue;
                }
                let f = a[r * n + col];
                if f.norm() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let t = a[row * n + j] * f;
                    a[r * n + j] -= t;
                }
            }
            pivot_cols.push(col);
            row += 1;
        }
        let free_cols: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
        let mut basis = Vec::new();
        for &fc in &free_cols {
            let mut v = vec![C64::new(0.0, 0.0); n];
            v[fc] = C64::new(1.0, 0.0);
            for (r, &pc) in pivot_cols.iter().enumerate() {
                v[pc] = -a[r * n + fc];
            }
            basis.push(v);
        }
        basis
    }
}

/// Incremental rank test over a growing set of vectors.
///
/// Rows are kept in reduced form; `try_add` reports whether the candidate
/// enlarges the span.
#[derive(Clone)]
pub struct RankTracker {
    rows: Vec<Vec<C64>>,
    pivots: Vec<usize>,
    tol: f64,
}

impl RankTracker {
    pub fn new(tol: f64) -> Self {
        RankTracker { rows: Vec::new(), pivots: Vec::new(), tol }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn try_add(&mut self, v: &[C64]) -> bool {
        let mut w = v.to_vec();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let f = w[p];
            if f.norm() > 0.0 {
                for (wi, ri) in w.iter_mut().zip(row) {
                    *wi -= f * ri;
                }
            }
        }
        let (pivot, mag) = w
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if mag <= self.tol {
            return false;
        }
        let pv = w[pivot];
        for wi in w.iter_mut() {
            *wi /= pv;
        }
        self.rows.push(w);
        self.pivots.push(pivot);
        true
    }
}

// JSON shape: {"n": n, "rows": [[[re, im], ...], ...]}.

#[derive(Serialize, Deserialize)]
struct MatrixDto {
    n: usize,
    rows: Vec<Vec<[f64; 2]>>,
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = (0..self.n)
            .map(|i| (0..self.n).map(|j| [self.get(i, j).re, self.get(i, j).im]).collect())
            .collect();
        MatrixDto { n: self.n, rows }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let dto = MatrixDto::deserialize(de)?;
        if dto.rows.len() != dto.n || dto.rows.iter().any(|r| r.len() != dto.n) {
            return Err(D::Error::custom("matrix rows do not match declared size"));
        }
        let data = dto
            .rows
            .iter()
            .flat_map(|r| r.iter().map(|&[re, im]| C64::new(re, im)))
            .collect();
        Ok(CMatrix { n: dto.n, data })
    }
}


/// Serde adapters rendering complex scalars as [re, im] pairs.
pub(crate) mod c64_pair {
    use crate::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &C64, s: S) -> Result<S::Ok, S::Error> {
        [v.re, v.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(re, im))
    }
}

/// As `c64_pair`, for vectors.
pub(crate) mod c64_vec {
    use crate::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}
