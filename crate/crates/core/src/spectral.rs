//! Matrix spectral analysis for saddle linear parts: eigenvalues via the
//! characteristic polynomial, additive Jordan decomposition with a rescaled
//! nilpotent part, the exponential e^{2πiA}, contraction bounds, and
//! resonance enumeration/classification.
//!
//! Eigenvalues are found by simultaneous (Aberth) iteration on the
//! characteristic polynomial and clustered into Jordan structure by rank
//! tests; that keeps the dependency surface small and is accurate at the
//! intended scale (n of a handful).

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, RankTracker};
use crate::{Tolerances, C64};
use serde::{Deserialize, Serialize};

const TWO_PI: f64 = std::f64::consts::TAU;

/// e^{2πi z}.
pub fn exp_2pi_i_scalar(z: C64) -> C64 {
    let modulus = (-TWO_PI * z.im).exp();
    let angle = TWO_PI * z.re;
    C64::new(modulus * angle.cos(), modulus * angle.sin())
}

/// Integrality classification of a resonance value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResonanceClass {
    NonInteger,
    NegativeInteger,
    Zero,
    PositiveInteger,
}

/// One resonance: exponent vector j, target component k (0-based), the
/// value μ_k − Σ j_l μ_l, and its classification.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Resonance {
    pub j: Vec<usize>,
    pub k: usize,
    #[serde(with = "crate::linalg::c64_pair")]
    pub value: C64,
    pub class: ResonanceClass,
    /// Distance to the nearest integer fell in the warning band
    /// (tol, 10·tol): classified NonInteger but suspiciously close.
    pub borderline: bool,
}

impl std::fmt::Display for Resonance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "R_{{{:?};{}}} = {:.6}{:+.6}i ({:?})",
            self.j,
            self.k + 1,
            self.value.re,
            self.value.im,
            self.class
        )
    }
}

/// Residual norms of the additive Jordan decomposition, reported so callers
/// can audit the split quality.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SplitResiduals {
    pub reconstruction: f64,
    pub split: f64,
    pub commute: f64,
    pub nilpotent: f64,
}

/// Spectral decomposition of a saddle linear part: A = A_s + A_N with A_s
/// semisimple and A_N nilpotent, P conjugating A to a Jordan form whose
/// superdiagonal entries all equal `eps`, eigenvalues μ (ordered by real
/// part, then imaginary part, matching the conjugated diagonal), multipliers
/// λ_k = e^{2πiμ_k}, and bounds δ₀ < −Re μ_k < δ₁ for all k.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralData {
    pub a: CMatrix,
    pub a_s: CMatrix,
    pub a_n: CMatrix,
    pub p: CMatrix,
    pub p_inv: CMatrix,
    #[serde(with = "crate::linalg::c64_vec")]
    pub mu: Vec<C64>,
    #[serde(with = "crate::linalg::c64_vec")]
    pub lambda: Vec<C64>,
    /// Jordan blocks in the conjugated coordinates as (start, size).
    pub blocks: Vec<(usize, usize)>,
    pub delta0: f64,
    pub delta1: f64,
    pub eps: f64,
    pub residuals: SplitResiduals,
}

impl SpectralData {
    pub fn n(&self) -> usize {
        self.a.n
    }

    /// The conjugated matrix P⁻¹AP: diagonal μ plus `eps` on block
    /// superdiagonals.
    pub fn jordan_matrix(&self) -> CMatrix {
        let mut j = CMatrix::diag(&self.mu);
        let eps = C64::new(self.eps, 0.0);
        for &(start, size) in &self.blocks {
            for i in 1..size {
                j.set(start + i - 1, start + i, eps);
            }
        }
        j
    }

    /// e^{2πi·(jordan matrix)}: block-diagonal, computed from the finite
    /// nilpotent series within each block.
    pub fn exp_2pi_i_jordan(&self) -> CMatrix {
        let n = self.n();
        let mut out = CMatrix::zeros(n);
        let z = C64::new(0.0, TWO_PI) * C64::new(self.eps, 0.0);
        for &(start, size) in &self.blocks {
            let lam = exp_2pi_i_scalar(self.mu[start]);
            let mut factor = C64::new(1.0, 0.0); // z^m / m!
            for m in 0..size {
                if m > 0 {
                    factor = factor * z / C64::new(m as f64, 0.0);
                }
                for i in 0..size - m {
                    out.set(start + i, start + i + m, lam * factor);
                }
            }
        }
        out
    }

    /// e^{2πiA} in the original coordinates.
    pub fn exp_2pi_i(&self) -> CMatrix {
        self.p.mul(&self.exp_2pi_i_jordan()).mul(&self.p_inv)
    }

    pub fn is_diagonalizable(&self) -> bool {
        self.blocks.iter().all(|&(_, size)| size == 1)
    }
}

/// μ_k − Σ j_l μ_l (k 0-based).
pub fn resonance_value(mu: &[C64], j: &[usize], k: usize) -> C64 {
    assert_eq!(mu.len(), j.len());
    assert!(k < mu.len());
    let mut v = mu[k];
    for (jl, ml) in j.iter().zip(mu) {
        v -= ml * C64::new(*jl as f64, 0.0);
    }
    v
}

/// Classification with the borderline flag: integer classes require the
/// complex distance to the nearest integer (and |Im|) to be ≤ tol;
/// distances in (tol, 10·tol) are NonInteger but flagged.
pub fn classify_detailed(value: C64, tol: f64) -> (ResonanceClass, bool) {
    let nearest = value.re.round();
    let dist = (value - C64::new(nearest, 0.0)).norm();
    if dist <= tol && value.im.abs() <= tol {
        let class = if nearest == 0.0 {
            ResonanceClass::Zero
        } else if nearest < 0.0 {
            ResonanceClass::NegativeInteger
        } else {
            ResonanceClass::PositiveInteger
        };
        (class, false)
    } else {
        (ResonanceClass::NonInteger, dist < 10.0 * tol)
    }
}

/// As `classify_detailed`, logging a warning in the borderline band.
pub fn classify(value: C64, tol: f64) -> ResonanceClass {
    let (class, borderline) = classify_detailed(value, tol);
    if borderline {
        log::warn!(
            "resonance value {:.9}{:+.9}i is within 10x of the integer tolerance {:.1e}",
            value.re,
            value.im,
            tol
        );
    }
    class
}

/// Builds the resonance for (j; k) under tolerance tol.
pub fn resonance(mu: &[C64], j: &[usize], k: usize, tol: f64) -> Resonance {
    let value = resonance_value(mu, j, k);
    let (class, borderline) = classify_detailed(value, tol);
    Resonance { j: j.to_vec(), k, value, class, borderline }
}

/// All (j; k) with 2 ≤ |j| ≤ max_degree, in graded-lexicographic j order
/// with k innermost.
pub fn enumerate_resonances(sd: &SpectralData, max_degree: usize, tol: f64) -> Vec<Resonance> {
    assert!(max_degree >= 2);
    let n = sd.n();
    let basis = crate::jets::Basis::get(n, max_degree);
    let mut out = Vec::new();
    for r in basis.degree_start(2)..basis.dim() {
        let j: Vec<usize> = basis.exp(r).iter().map(|&e| e as usize).collect();
        for k in 0..n {
            out.push(resonance(&sd.mu, &j, k, tol));
        }
    }
    out
}

/// Largest degree that can carry a negative-integer resonance:
/// B = floor((δ₁−1)/δ₀). For |j| > B, Re R ≥ |j|δ₀ − δ₁ > −1.
pub fn negative_resonance_degree_bound(sd: &SpectralData) -> usize {
    if sd.delta1 <= 1.0 {
        return 0;
    }
    ((sd.delta1 - 1.0) / sd.delta0).floor() as usize
}

/// Full spectral analysis with default tolerances.
pub fn analyze_matrix(a: &CMatrix, eps_request: f64) -> Result<SpectralData> {
    analyze_matrix_with(a, eps_request, &Tolerances::default())
}

/// Full spectral analysis: eigenvalues, Jordan chains, ε-rescaled split,
/// bounds δ₀ = 0.95·min(−Re μ) and δ₁ = 1.05·max(−Re μ), and
/// ε = min(eps_request, margin/2) with margin = δ-gap = 0.05·min(−Re μ),
/// which keeps the quadratic-form bounds (−δ₁+ε)|y|² < Re⟨Ãy,y⟩ <
/// (−δ₀−ε)|y|² strict on the conjugated form.
pub fn analyze_matrix_with(a: &CMatrix, eps_request: f64, tol: &Tolerances) -> Result<SpectralData> {
    let n = a.n;
    if n == 0 {
        return Err(Error::InvalidInput("matrix must be nonempty".into()));
    }
    if eps_request <= 0.0 {
        return Err(Error::InvalidInput("eps_request must be positive".into()));
    }
    let coeffs = char_poly(a);
    let roots = poly_roots(&coeffs)?;
    let root_scale = roots.iter().map(|r| r.norm()).fold(1.0, f64::max);
    let clusters = cluster_roots(&roots, tol.eig, root_scale)?;

    for &(center, _) in &clusters {
        if center.re >= 0.0 {
            return Err(Error::NonNegativeSpectrum(center));
        }
    }

    // Jordan chains per cluster; one chain per block, longest first.
    let ntol = tol.eig * a.max_abs().max(1.0);
    let mut tracker = RankTracker::new(ntol);
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut mu = Vec::with_capacity(n);
    let mut blocks = Vec::new();
    let mut max_block = 1usize;

    // eps needs min(−Re μ) which is known from cluster centers.
    let a_min = clusters.iter().map(|&(c, _)| -c.re).fold(f64::INFINITY, f64::min);
    let b_max = clusters.iter().map(|&(c, _)| -c.re).fold(0.0, f64::max);
    // A multiplicity > 1 cluster may still be diagonalizable, so eps is
    // only committed once a genuine chain of length > 1 shows up.
    let eps_candidate = eps_request.min(0.05 * a_min / 2.0);

    for &(center, mult) in &clusters {
        let m_mat = a.sub(&CMatrix::diag(&vec![center; n]));
        let mut nulls: Vec<Vec<Vec<C64>>> = Vec::new();
        let mut mp = m_mat.clone();
        loop {
            let ns = mp.null_space(ntol);
            let dim = ns.len();
            let prev = nulls.last().map_or(0, Vec::len);
            nulls.push(ns);
            if dim >= mult {
                break;
            }
            if dim <= prev || nulls.len() > mult {
                return Err(Error::IllConditioned(format!(
                    "generalized eigenspace of {:.6}{:+.6}i reaches dimension {} of {}",
                    center.re, center.im, dim, mult
                )));
            }
            mp = mp.mul(&m_mat);
        }
        let pmax = nulls.len();
        let mut placed = 0usize;
        let mut chains: Vec<Vec<Vec<C64>>> = Vec::new();
        for p in (1..=pmax).rev() {
            for w in &nulls[p - 1] {
                if placed >= mult {
                    break;
                }
                let mut chain = vec![w.clone()];
                for _ in 1..p {
                    chain.push(m_mat.apply(chain.last().unwrap()));
                }
                let mut trial = tracker.clone();
                if chain.iter().all(|v| trial.try_add(v)) {
                    tracker = trial;
                    placed += p;
                    chains.push(chain);
                }
            }
        }
        if placed != mult {
            return Err(Error::IllConditioned(format!(
                "jordan chains for {:.6}{:+.6}i cover {} of {} dimensions",
                center.re, center.im, placed, mult
            )));
        }
        for chain in chains {
            let p = chain.len();
            max_block = max_block.max(p);
            let eps = if p > 1 { eps_candidate } else { 0.0 };
            // Deterministic normalization: unit eigenvector, real-positive
            // largest entry.
            let eig = &chain[p - 1];
            let norm: f64 = eig.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let lead = eig
                .iter()
                .cloned()
                .max_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap())
                .unwrap();
            let factor = lead.conj() / (lead.norm() * norm);
            blocks.push((columns.len(), p));
            let mut eps_pow = C64::new(1.0, 0.0);
            for i in 0..p {
                let src = &chain[p - 1 - i];
                columns.push(src.iter().map(|c| c * factor * eps_pow).collect());
                mu.push(center);
                eps_pow *= C64::new(eps, 0.0);
            }
        }
    }

    let eps = if max_block > 1 { eps_candidate } else { 0.0 };

    let mut p = CMatrix::zeros(n);
    for (c, col) in columns.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            p.set(r, c, *v);
        }
    }
    let p_inv = p
        .inverse()
        .map_err(|_| Error::IllConditioned("jordan chain basis is numerically singular".into()))?;

    let mut n_eps = CMatrix::zeros(n);
    for &(start, size) in &blocks {
        for i in 1..size {
            n_eps.set(start + i - 1, start + i, C64::new(eps, 0.0));
        }
    }
    let a_s = p.mul(&CMatrix::diag(&mu)).mul(&p_inv);
    let a_n = p.mul(&n_eps).mul(&p_inv);

    let lambda: Vec<C64> = mu.iter().map(|&m| exp_2pi_i_scalar(m)).collect();
    let jordan = CMatrix::diag(&mu).add(&n_eps);
    let residuals = SplitResiduals {
        reconstruction: p.mul(&jordan).mul(&p_inv).sub(a).max_abs(),
        split: a_s.add(&a_n).sub(a).max_abs(),
        commute: a_s.commutator(&a_n).max_abs(),
        nilpotent: a_n.pow(n).max_abs(),
    };

    let sd = SpectralData {
        a: a.clone(),
        a_s,
        a_n,
        p,
        p_inv,
        mu,
        lambda,
        blocks,
        delta0: 0.95 * a_min,
        delta1: 1.05 * b_max,
        eps,
        residuals,
    };
    let scale = a.max_abs().max(1.0);
    if sd.residuals.split > tol.mat * scale * 10.0 {
        return Err(Error::IllConditioned(format!(
            "jordan split residual {:.3e}",
            sd.residuals.split
        )));
    }
    Ok(sd)
}

/// Monic characteristic polynomial of A as coefficients c[0..=n],
/// p(z) = Σ c[k] z^k with c[n] = 1 (Faddeev-LeVerrier recursion).
fn char_poly(a: &CMatrix) -> Vec<C64> {
    let n = a.n;
    let mut coeffs = vec![C64::new(0.0, 0.0); n + 1];
    coeffs[n] = C64::new(1.0, 0.0);
    let mut m = CMatrix::identity(n);
    for k in 1..=n {
        m = a.mul(&m);
        let c = -m.trace() / C64::new(k as f64, 0.0);
        coeffs[n - k] = c;
        for i in 0..n {
            let v = m.get(i, i) + c;
            m.set(i, i, v);
        }
    }
    coeffs
}

fn horner(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Roots of a monic polynomial, multiplicity repeated. Closed forms for
/// degree ≤ 2, simultaneous Aberth iteration above.
fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let n = coeffs.len() - 1;
    match n {
        0 => Ok(Vec::new()),
        1 => Ok(vec![-coeffs[0]]),
        2 => {
            let b = coeffs[1];
            let c = coeffs[0];
            let mut s = (b * b - c * C64::new(4.0, 0.0)).sqrt();
            if (b.conj() * s).re < 0.0 {
                s = -s;
            }
            let q = -(b + s) / C64::new(2.0, 0.0);
            if q.norm() == 0.0 {
                Ok(vec![C64::new(0.0, 0.0), -b])
            } else {
                Ok(vec![q, c / q])
            }
        }
        _ => aberth(coeffs),
    }
}

fn aberth(coeffs: &[C64]) -> Result<Vec<C64>> {
    let n = coeffs.len() - 1;
    let radius = 1.0 + coeffs[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<C64> = (0..n)
        .map(|j| {
            let ang = TWO_PI * (j as f64) / (n as f64) + 0.4;
            C64::new(ang.cos(), ang.sin()) * (0.5 * radius)
        })
        .collect();
    for _ in 0..500 {
        let mut max_corr: f64 = 0.0;
        let snapshot = z.clone();
        for j in 0..n {
            let (p, dp) = horner(coeffs, snapshot[j]);
            if dp.norm() == 0.0 {
                z[j] += C64::new(1e-8 * radius, 1e-8 * radius);
                max_corr = f64::INFINITY;
                continue;
            }
            let w = p / dp;
            let mut sum = C64::new(0.0, 0.0);
            for (k, &zk) in snapshot.iter().enumerate() {
                if k != j {
                    sum += C64::new(1.0, 0.0) / (snapshot[j] - zk);
                }
            }
            let denom = C64::new(1.0, 0.0) - w * sum;
            let corr = if denom.norm() == 0.0 { w } else { w / denom };
            z[j] -= corr;
            max_corr = max_corr.max(corr.norm() / (1.0 + z[j].norm()));
        }
        if max_corr <= 1e-14 {
            return Ok(z);
        }
    }
    // Multiple roots converge only at a fractional rate; accept when the
    // residuals are at the attainable floor, else report failure.
    let tol = 1e-8 * (1.0 + radius.powi(n as i32));
    if z.iter().all(|&zj| horner(coeffs, zj).0.norm() <= tol) {
        Ok(z)
    } else {
        Err(Error::IllConditioned("polynomial root iteration stalled".into()))
    }
}

/// Groups roots into multiplicity clusters. The merge radius grows with the
/// candidate cluster size, matching the eps^{1/m} accuracy of multiplicity-m
/// roots; centers are member means (first-order errors cancel). Distinct
/// clusters closer than 10× the base tolerance are ambiguous.
fn cluster_roots(roots: &[C64], tol_eig: f64, scale: f64) -> Result<Vec<(C64, usize)>> {
    let n = roots.len();
    let mut groups: Vec<Vec<C64>> = roots.iter().map(|&r| vec![r]).collect();
    for m in 2..=n {
        let thresh = scale * tol_eig.max(1e-13f64.powf(1.0 / m as f64));
        loop {
            let mut merged = false;
            'outer: for i in 0..groups.len() {
                for j in (i + 1)..groups.len() {
                    if groups[i].len() + groups[j].len() > m {
                        continue;
                    }
                    let ci = mean(&groups[i]);
                    let cj = mean(&groups[j]);
                    if (ci - cj).norm() <= thresh {
                        let gj = groups.swap_remove(j);
                        groups[i].extend(gj);
                        merged = true;
                        break 'outer;
                    }
                }
            }
            if !merged {
                break;
            }
        }
    }
    let clusters: Vec<(C64, usize)> = groups.iter().map(|g| (mean(g), g.len())).collect();
    for i in 0..clusters.len() {
        for j in (i + 1)..clusters.len() {
            let d = (clusters[i].0 - clusters[j].0).norm();
            if d < 10.0 * tol_eig * scale {
                return Err(Error::IllConditioned(format!(
                    "eigenvalue clusters separated by only {d:.3e}"
                )));
            }
        }
    }
    let mut sorted = clusters;
    sorted.sort_by(|a, b| {
        (a.0.re, a.0.im)
            .partial_cmp(&(b.0.re, b.0.im))
            .unwrap()
    });
    Ok(sorted)
}

fn mean(v: &[C64]) -> C64 {
    v.iter().sum::<C64>() / C64::new(v.len() as f64, 0.0)
}
