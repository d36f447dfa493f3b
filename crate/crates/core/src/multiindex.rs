//! Multi-indices `alpha = (alpha_1, alpha_2, ...)` with finite support.
//!
//! A [`MultiIndex`] is stored sparsely as sorted `(k, alpha_k)` pairs with
//! `alpha_k >= 1`. Indices are ordered by `|alpha|` first and then
//! lexicographically by their characteristic set, which is the order the
//! propagator sweeps them in and the order rows appear in output files.

use std::cmp::Ordering;
use std::fmt;
use std::iter;
use std::ops::Range;
use std::str::FromStr;

use crate::{Error, Result};

/// Sparse multi-index. The zero index `(0)` has empty support.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: Vec<(u32, u32)>,
}

impl MultiIndex {
    /// The zero multi-index `(0)`.
    pub fn zero() -> Self {
        Self::default()
    }

    /// The unit index `epsilon_k`.
    pub fn unit(k: u32) -> Self {
        assert!(k >= 1, "basis indices start at 1");
        Self {
            entries: vec![(k, 1)],
        }
    }

    /// Builds from `(k, alpha_k)` pairs in any order. Zero multiplicities are
    /// dropped and repeated `k` accumulate.
    pub fn from_pairs<I: IntoIterator<Item = (u32, u32)>>(pairs: I) -> Result<Self> {
        let mut entries: Vec<(u32, u32)> = Vec::new();
        for (k, m) in pairs {
            if k == 0 {
                return Err(Error::domain("basis index 0 in multi-index"));
            }
            if m == 0 {
                continue;
            }
            match entries.binary_search_by_key(&k, |e| e.0) {
                Ok(pos) => entries[pos].1 += m,
                Err(pos) => entries.insert(pos, (k, m)),
            }
        }
        Ok(Self { entries })
    }

    /// Builds from the dense form `(alpha_1, alpha_2, ...)`.
    pub fn from_dense(dense: &[u32]) -> Self {
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0)
            .map(|(i, &m)| (i as u32 + 1, m))
            .collect();
        Self { entries }
    }

    /// Rebuilds the index from a characteristic set (any order).
    pub fn from_characteristic_set(set: &[u32]) -> Result<Self> {
        Self::from_pairs(set.iter().map(|&k| (k, 1)))
    }

    /// `alpha_k`, zero outside the support.
    pub fn get(&self, k: u32) -> u32 {
        self.entries
            .binary_search_by_key(&k, |e| e.0)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0)
    }

    /// Sorted `(k, alpha_k)` pairs of the support.
    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// `|alpha| = sum_k alpha_k`.
    pub fn order(&self) -> u32 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Largest basis index in the support, 0 for `(0)`.
    pub fn max_index(&self) -> u32 {
        self.entries.last().map_or(0, |e| e.0)
    }

    /// `ln(alpha!) = sum_k ln(alpha_k!)`.
    pub fn log_factorial(&self) -> f64 {
        self.entries.iter().map(|e| ln_factorial(e.1)).sum()
    }

    /// `alpha!` as an exact integer; `None` on overflow.
    pub fn factorial_exact(&self) -> Option<u128> {
        self.entries.iter().try_fold(1u128, |acc, &(_, m)| {
            (1..=m as u128).try_fold(acc, |a, i| a.checked_mul(i))
        })
    }

    /// Iterates the characteristic set `i_1 <= ... <= i_n`.
    pub fn characteristic_iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries
            .iter()
            .flat_map(|&(k, m)| iter::repeat(k).take(m as usize))
    }

    /// The characteristic set: `k` appears `alpha_k` times, non-decreasing.
    pub fn characteristic_set(&self) -> Vec<u32> {
        self.characteristic_iter().collect()
    }

    /// `ln( 2^{p|alpha|} prod_k k^{2 q alpha_k} / |alpha|! )`.
    pub fn weight_log(&self, p: f64, q: f64) -> f64 {
        let n = self.order();
        let log_n_pow: f64 = self
            .entries
            .iter()
            .map(|&(k, m)| m as f64 * (k as f64).ln())
            .sum();
        p * n as f64 * std::f64::consts::LN_2 + 2.0 * q * log_n_pow - ln_factorial(n)
    }

    /// `h^alpha = prod_k h_k^{alpha_k}` with `h = (h_1, h_2, ...)`; missing
    /// coefficients are zero.
    pub fn monomial(&self, h: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(k, m)| h.get(k as usize - 1).copied().unwrap_or(0.0).powi(m as i32))
            .product()
    }

    /// `alpha + beta`.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() || j < other.entries.len() {
            let a = self.entries.get(i);
            let b = other.entries.get(j);
            match (a, b) {
                (Some(&(ka, ma)), Some(&(kb, mb))) if ka == kb => {
                    out.push((ka, ma + mb));
                    i += 1;
                    j += 1;
                }
                (Some(&(ka, ma)), Some(&(kb, _))) if ka < kb => {
                    out.push((ka, ma));
                    i += 1;
                }
                (Some(&e), None) => {
                    out.push(e);
                    i += 1;
                }
                (_, Some(&e)) => {
                    out.push(e);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        MultiIndex { entries: out }
    }

    /// `alpha - epsilon_k`, or `None` when `alpha_k = 0`.
    pub fn remove_unit(&self, k: u32) -> Option<MultiIndex> {
        let pos = self.entries.binary_search_by_key(&k, |e| e.0).ok()?;
        let mut entries = self.entries.clone();
        if entries[pos].1 == 1 {
            entries.remove(pos);
        } else {
            entries[pos].1 -= 1;
        }
        Some(MultiIndex { entries })
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.characteristic_iter().cmp(other.characteristic_iter()))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Comma-separated characteristic set; the zero index prints as the empty string.
impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for k in self.characteristic_iter() {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{k}")?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultiIndex[{self}]")
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::zero());
        }
        let set = s
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::domain(format!("bad multi-index entry {tok:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_characteristic_set(&set)
    }
}

/// `ln(m!)`.
pub fn ln_factorial(m: u32) -> f64 {
    if m <= 20 {
        let mut acc = 1.0f64;
        for i in 2..=m {
            acc *= i as f64;
        }
        acc.ln()
    } else {
        ln_factorial(20) + (21..=m).map(|i| (i as f64).ln()).sum::<f64>()
    }
}

/// Iterator over all multi-indices with `|alpha| <= N` and support in `1..=K`,
/// grouped by increasing order and lexicographic in the characteristic set
/// within each order.
#[derive(Debug, Clone)]
pub struct Enumerate {
    max_order: u32,
    basis: u32,
    // Current characteristic set; `None` once exhausted.
    current: Option<Vec<u32>>,
}

/// Enumerates the truncated index set `{alpha : |alpha| <= n, supp alpha in 1..=k}`.
pub fn enumerate(max_order: u32, basis: u32) -> Enumerate {
    assert!(basis >= 1, "basis size must be at least 1");
    Enumerate {
        max_order,
        basis,
        current: Some(Vec::new()),
    }
}

impl Iterator for Enumerate {
    type Item = MultiIndex;

    fn next(&mut self) -> Option<MultiIndex> {
        let cur = self.current.as_mut()?;
        let item = MultiIndex::from_characteristic_set(cur).expect("valid set");
        // Advance to the next non-decreasing sequence of the same length,
        // or to the first sequence of the next length.
        let k = self.basis;
        match cur.iter().rposition(|&i| i < k) {
            Some(pos) => {
                let v = cur[pos] + 1;
                for slot in &mut cur[pos..] {
                    *slot = v;
                }
            }
            None => {
                let n = cur.len() as u32 + 1;
                if n > self.max_order {
                    self.current = None;
                } else {
                    *cur = vec![1; n as usize];
                }
            }
        }
        Some(item)
    }
}

/// `binomial(n, k)` in u128; panics on overflow.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// One entry of the parent list of `alpha`: the index of `alpha - epsilon_k`,
/// the basis index `k`, and the coupling weight `sqrt(alpha_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parent {
    pub position: u32,
    pub basis: u32,
    pub weight: f64,
}

/// A truncated index set in sweep order, with level ranges and the parent
/// structure of the propagator recursion precomputed.
#[derive(Debug, Clone)]
pub struct IndexSet {
    max_order: u32,
    basis: u32,
    indices: Vec<MultiIndex>,
    level_starts: Vec<usize>,
    parent_offsets: Vec<usize>,
    parents: Vec<Parent>,
}

impl IndexSet {
    pub fn new(max_order: u32, basis: u32) -> Self {
        let indices: Vec<MultiIndex> = enumerate(max_order, basis).collect();
        let mut level_starts = vec![0usize; max_order as usize + 2];
        for (i, a) in indices.iter().enumerate() {
            level_starts[a.order() as usize + 1] = i + 1;
        }
        let mut parent_offsets = Vec::with_capacity(indices.len() + 1);
        let mut parents = Vec::new();
        parent_offsets.push(0);
        for a in &indices {
            for &(k, m) in a.entries() {
                let p = a.remove_unit(k).expect("k in support");
                let position = indices.binary_search(&p).expect("parent is in the set") as u32;
                parents.push(Parent {
                    position,
                    basis: k,
                    weight: (m as f64).sqrt(),
                });
            }
            parent_offsets.push(parents.len());
        }
        Self {
            max_order,
            basis,
            indices,
            level_starts,
            parent_offsets,
            parents,
        }
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn basis(&self) -> u32 {
        self.basis
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn get(&self, position: usize) -> &MultiIndex {
        &self.indices[position]
    }

    /// Position of `alpha` in sweep order.
    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.indices.binary_search(alpha).ok()
    }

    /// Positions of all indices with `|alpha| = n`.
    pub fn level(&self, n: u32) -> Range<usize> {
        if n > self.max_order {
            return self.indices.len()..self.indices.len();
        }
        self.level_starts[n as usize]..self.level_starts[n as usize + 1]
    }

    pub fn parents(&self, position: usize) -> &[Parent] {
        &self.parents[self.parent_offsets[position]..self.parent_offsets[position + 1]]
    }

    pub fn contains(&self, alpha: &MultiIndex) -> bool {
        alpha.order() <= self.max_order && alpha.max_index() <= self.basis
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_alpha() -> MultiIndex {
        MultiIndex::from_dense(&[1, 0, 2, 0, 0, 4])
    }

    #[test]
    fn order_examples() {
        assert_eq!(MultiIndex::zero().order(), 0);
        assert_eq!(MultiIndex::unit(3).order(), 1);
        assert_eq!(paper_alpha().order(), 7);
    }

    #[test]
    fn log_factorial_examples() {
        assert_eq!(MultiIndex::zero().log_factorial(), 0.0);
        for k in 1..10 {
            assert_eq!(MultiIndex::unit(k).log_factorial(), 0.0);
        }
        // 1! * 2! * 4! = 48
        let lf = paper_alpha().log_factorial();
        assert!((lf - 48f64.ln()).abs() <= 1e-12 * 48f64.ln());
        assert_eq!(paper_alpha().factorial_exact(), Some(48));
    }

    #[test]
    fn log_factorial_matches_exact_integers() {
        for m in 0..=20u32 {
            let exact: u128 = (1..=m as u128).product();
            let a = MultiIndex::from_pairs([(2, m)]).unwrap();
            let rel = (a.log_factorial() - (exact as f64).ln()).abs() / (exact as f64).ln().max(1.0);
            assert!(rel <= 1e-12, "m = {m}");
        }
    }

    #[test]
    fn characteristic_set_examples() {
        assert!(MultiIndex::zero().characteristic_set().is_empty());
        assert_eq!(paper_alpha().characteristic_set(), vec![1, 3, 3, 6, 6, 6, 6]);
        assert_eq!(MultiIndex::unit(5).characteristic_set(), vec![5]);
    }

    #[test]
    fn weight_log_examples() {
        assert_eq!(MultiIndex::zero().weight_log(1.7, -3.2), 0.0);
        let (p, q) = (-1.5, 0.75);
        for k in 1..6u32 {
            let w = MultiIndex::unit(k).weight_log(p, q);
            let expected = p * 2f64.ln() + 2.0 * q * (k as f64).ln();
            assert!((w - expected).abs() < 1e-14);
        }
        // 2^2 * 2^4 / 2! = 32
        let a = MultiIndex::from_pairs([(2, 2)]).unwrap();
        assert!((a.weight_log(1.0, 1.0) - 32f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn weight_log_zero_weights_is_minus_log_order_factorial() {
        for a in enumerate(6, 4) {
            let n = a.order();
            assert!((a.weight_log(0.0, 0.0) + ln_factorial(n)).abs() < 1e-12);
        }
    }

    #[test]
    fn enumerate_examples() {
        let v: Vec<_> = enumerate(1, 2).collect();
        assert_eq!(v, vec![MultiIndex::zero(), MultiIndex::unit(1), MultiIndex::unit(2)]);
        assert_eq!(enumerate(2, 2).count(), 6);
        let v: Vec<_> = enumerate(0, 10).collect();
        assert_eq!(v, vec![MultiIndex::zero()]);
    }

    fn brute_force(n: u32, k: u32) -> Vec<Vec<u32>> {
        // Nested loops over dense vectors with entries 0..=n.
        let mut out = Vec::new();
        let mut dense = vec![0u32; k as usize];
        loop {
            if dense.iter().sum::<u32>() <= n {
                out.push(dense.clone());
            }
            let mut i = 0;
            loop {
                if i == dense.len() {
                    return out;
                }
                dense[i] += 1;
                if dense[i] <= n {
                    break;
                }
                dense[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn enumerate_count_matches_brute_force_and_binomial() {
        for n in 0..=8u32 {
            for k in 1..=8u32 {
                let got: Vec<MultiIndex> = enumerate(n, k).collect();
                let brute = brute_force(n, k);
                assert_eq!(got.len(), brute.len(), "N={n} K={k}");
                assert_eq!(got.len() as u128, binomial((n + k) as u64, k as u64));
                let mut sorted: Vec<MultiIndex> =
                    brute.iter().map(|d| MultiIndex::from_dense(d)).collect();
                sorted.sort();
                assert_eq!(got, sorted, "N={n} K={k}");
            }
        }
    }

    #[test]
    fn enumerate_is_grouped_by_order_and_lexicographic() {
        let v: Vec<_> = enumerate(3, 3).collect();
        for w in v.windows(2) {
            assert!(w[0] < w[1]);
        }
        let level2: Vec<String> = v.iter().filter(|a| a.order() == 2).map(|a| a.to_string()).collect();
        assert_eq!(level2, ["1,1", "1,2", "1,3", "2,2", "2,3", "3,3"]);
    }

    #[test]
    fn display_and_parse() {
        assert_eq!(MultiIndex::zero().to_string(), "");
        assert_eq!(paper_alpha().to_string(), "1,3,3,6,6,6,6");
        assert_eq!("1,3,3,6,6,6,6".parse::<MultiIndex>().unwrap(), paper_alpha());
        assert_eq!("".parse::<MultiIndex>().unwrap(), MultiIndex::zero());
        assert!("1,x".parse::<MultiIndex>().is_err());
        assert!("0".parse::<MultiIndex>().is_err());
    }

    #[test]
    fn add_and_remove_unit() {
        let a = MultiIndex::from_dense(&[1, 0, 2]);
        let b = MultiIndex::from_dense(&[0, 1, 1, 3]);
        assert_eq!(a.add(&b), MultiIndex::from_dense(&[1, 1, 3, 3]));
        assert_eq!(a.remove_unit(3), Some(MultiIndex::from_dense(&[1, 0, 1])));
        assert_eq!(a.remove_unit(1), Some(MultiIndex::from_dense(&[0, 0, 2])));
        assert_eq!(a.remove_unit(2), None);
    }

    #[test]
    fn index_set_levels_and_parents() {
        let set = IndexSet::new(3, 3);
        assert_eq!(set.len(), 20);
        assert_eq!(set.level(0), 0..1);
        assert_eq!(set.level(1), 1..4);
        assert_eq!(set.level(3).len(), 10);
        for (pos, a) in set.indices().iter().enumerate() {
            assert_eq!(set.position(a), Some(pos));
            let parents = set.parents(pos);
            assert_eq!(parents.len(), a.entries().len());
            for p in parents {
                let parent = set.get(p.position as usize);
                assert_eq!(parent.add(&MultiIndex::unit(p.basis)), *a);
                assert_eq!(p.weight, (a.get(p.basis) as f64).sqrt());
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_index() -> impl Strategy<Value = MultiIndex> {
            proptest::collection::vec(0u32..5, 0..8).prop_map(|d| MultiIndex::from_dense(&d))
        }

        proptest! {
            #[test]
            fn characteristic_set_roundtrip(a in arb_index()) {
                let set = a.characteristic_set();
                prop_assert_eq!(set.len() as u32, a.order());
                prop_assert!(set.windows(2).all(|w| w[0] <= w[1]));
                prop_assert_eq!(MultiIndex::from_characteristic_set(&set).unwrap(), a.clone());
                prop_assert_eq!(a.to_string().parse::<MultiIndex>().unwrap(), a);
            }

            #[test]
            fn log_factorial_additive_on_disjoint_supports(
                d1 in proptest::collection::vec(0u32..6, 0..5),
                d2 in proptest::collection::vec(0u32..6, 0..5),
            ) {
                // Shift the second index past the support of the first.
                let a = MultiIndex::from_dense(&d1);
                let shift = d1.len() as u32;
                let b = MultiIndex::from_pairs(
                    d2.iter().enumerate().map(|(i, &m)| (shift + i as u32 + 1, m)),
                ).unwrap();
                let sum = a.add(&b);
                prop_assert!((sum.log_factorial() - a.log_factorial() - b.log_factorial()).abs() < 1e-12);
            }
        }
    }
}
