//! Graded-lexicographic monomial basis shared by all jets of a given
//! (nvars, order) signature.
//!
//! Ranks enumerate degrees 0, 1, …, order; inside a degree the first
//! variable's exponent descends, then the second's, and so on. Bases are
//! interned globally so jets only carry an `Arc`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub struct Basis {
    pub nvars: usize,
    pub order: usize,
    /// offsets[d] = number of multi-indices of total degree < d.
    offsets: Vec<usize>,
    /// Flat exponent storage: rank r lives at exps[r*nvars .. (r+1)*nvars].
    exps: Vec<u16>,
    degs: Vec<u16>,
    /// binom[m][k] for m ≤ nvars + order + 1.
    binom: Vec<Vec<usize>>,
}

fn binomial_table(max: usize) -> Vec<Vec<usize>> {
    let mut b = vec![vec![0; max + 1]; max + 1];
    for m in 0..=max {
        b[m][0] = 1;
        for k in 1..=m {
            b[m][k] = b[m - 1][k - 1] + if k <= m - 1 { b[m - 1][k] } else { 0 };
        }
    }
    b
}

impl Basis {
    fn build(nvars: usize, order: usize) -> Basis {
        assert!(nvars >= 1 && nvars <= 16, "nvars out of supported range");
        let binom = binomial_table(nvars + order + 2);
        let mut offsets = Vec::with_capacity(order + 2);
        offsets.push(0);
        for d in 0..=order {
            // count of multi-indices of degree exactly d in nvars variables
            let cnt = binom[d + nvars - 1][nvars - 1];
            offsets.push(offsets[d] + cnt);
        }
        let dim = offsets[order + 1];
        let mut exps = Vec::with_capacity(dim * nvars);
        let mut degs = Vec::with_capacity(dim);
        let mut cur = vec![0u16; nvars];
        for d in 0..=order {
            gen_degree(&mut exps, &mut cur, 0, d, nvars);
            let start = degs.len();
            degs.resize(start + (offsets[d + 1] - offsets[d]), d as u16);
        }
        Basis { nvars, order, offsets, exps, degs, binom }
    }

    /// Interned basis for the signature.
    pub fn get(nvars: usize, order: usize) -> Arc<Basis> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Basis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap();
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(Basis::build(nvars, order)))
            .clone()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.offsets[self.order + 1]
    }

    #[inline]
    pub fn exp(&self, rank: usize) -> &[u16] {
        &self.exps[rank * self.nvars..(rank + 1) * self.nvars]
    }

    #[inline]
    pub fn deg(&self, rank: usize) -> usize {
        self.degs[rank] as usize
    }

    /// First rank of total degree d.
    #[inline]
    pub fn degree_start(&self, d: usize) -> usize {
        self.offsets[d]
    }

    /// Rank of a multi-index (must have total degree ≤ order).
    pub fn rank(&self, exp: &[u16]) -> usize {
        debug_assert_eq!(exp.len(), self.nvars);
        let d: usize = exp.iter().map(|&e| e as usize).sum();
        debug_assert!(d <= self.order);
        let mut r = self.offsets[d];
        let mut rem = d;
        for i in 0..self.nvars - 1 {
            let v = self.nvars - i - 1; // variables after position i
            let ji = exp[i] as usize;
            // indices with a larger exponent at position i come first
            if rem > ji {
                r += self.binom[rem - ji - 1 + v][v];
            }
            rem -= ji;
        }
        r
    }

    /// Rank of the product monomial of two ranks; caller guarantees the
    /// summed degree fits the order.
    pub fn rank_sum(&self, ra: usize, rb: usize) -> usize {
        let mut buf = [0u16; 16];
        let ea = self.exp(ra);
        let eb = self.exp(rb);
        for i in 0..self.nvars {
            buf[i] = ea[i] + eb[i];
        }
        self.rank(&buf[..self.nvars])
    }
}

fn gen_degree(out: &mut Vec<u16>, cur: &mut [u16], pos: usize, rem: usize, nvars: usize) {
    if pos == nvars - 1 {
        cur[pos] = rem as u16;
        out.extend_from_slice(cur);
        return;
    }
    for t in (0..=rem).rev() {
        cur[pos] = t as u16;
        gen_degree(out, cur, pos + 1, rem - t, nvars);
    }
}
