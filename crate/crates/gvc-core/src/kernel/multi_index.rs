use std::fmt;

/// Symmetric multi-index of base-coordinate indices, kept sorted; the sorted
/// sequence is the unique representative of the permutation class.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(Vec<u8>);

impl MultiIndex {
    pub fn empty() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn single(lam: u8) -> Self {
        MultiIndex(vec![lam])
    }

    pub fn new(indices: &[u8]) -> Self {
        let mut v = indices.to_vec();
        v.sort_unstable();
        MultiIndex(v)
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[u8] {
        &self.0
    }

    /// The multi-index `lam + self`.
    pub fn raised(&self, lam: u8) -> Self {
        let pos = self.0.partition_point(|&i| i <= lam);
        let mut v = self.0.clone();
        v.insert(pos, lam);
        MultiIndex(v)
    }

    /// Removes one occurrence of `lam`, if present.
    pub fn lowered(&self, lam: u8) -> Option<Self> {
        let pos = self.0.iter().position(|&i| i == lam)?;
        let mut v = self.0.clone();
        v.remove(pos);
        Some(MultiIndex(v))
    }

    /// Multiset union.
    pub fn merged(&self, other: &MultiIndex) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + other.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        v.sort_unstable();
        MultiIndex(v)
    }

    /// Multiset difference `self - other` when `other` is contained in `self`.
    pub fn subtracted(&self, other: &MultiIndex) -> Option<Self> {
        let mut v = self.0.clone();
        for &i in &other.0 {
            let pos = v.iter().position(|&j| j == i)?;
            v.remove(pos);
        }
        Some(MultiIndex(v))
    }

    pub fn contains_multiset(&self, other: &MultiIndex) -> bool {
        self.subtracted(other).is_some()
    }

    /// Distinct index values occurring in the multi-index.
    pub fn distinct(&self) -> Vec<u8> {
        let mut v = self.0.clone();
        v.dedup();
        v
    }

    pub fn multiplicity(&self, lam: u8) -> usize {
        self.0.iter().filter(|&&i| i == lam).count()
    }

    /// Number of distinct orderings of the multiset: |M|! / prod(mult_i!).
    pub fn orderings(&self) -> u64 {
        let mut result: u64 = 1;
        let mut taken = 0u64;
        for lam in self.distinct() {
            for k in 1..=self.multiplicity(lam) as u64 {
                taken += 1;
                result = result * taken / k;
            }
        }
        result
    }

    /// Number of ways to choose `sub` as a sub-multiset of `self`:
    /// product over index values of binomial(mult_self, mult_sub).
    pub fn choose(&self, sub: &MultiIndex) -> u64 {
        let mut result = 1u64;
        for lam in self.distinct() {
            let n = self.multiplicity(lam) as u64;
            let k = sub.multiplicity(lam) as u64;
            if k > n {
                return 0;
            }
            let mut b = 1u64;
            for j in 1..=k {
                b = b * (n + 1 - j) / j;
            }
            result *= b;
        }
        result
    }

    /// All multi-indices with entries in `0..n` of exactly the given order.
    pub fn all_of_order(n: usize, order: usize) -> Vec<MultiIndex> {
        if order == 0 {
            return vec![MultiIndex::empty()];
        }
        let mut out = Vec::new();
        let mut stack = vec![(Vec::<u8>::new(), 0u8)];
        while let Some((prefix, min)) = stack.pop() {
            if prefix.len() == order {
                out.push(MultiIndex(prefix));
                continue;
            }
            for lam in min..n as u8 {
                let mut p = prefix.clone();
                p.push(lam);
                stack.push((p, lam));
            }
        }
        out.sort();
        out
    }

    /// All multi-indices with entries in `0..n` of order at most `max_order`.
    pub fn all_up_to_order(n: usize, max_order: usize) -> Vec<MultiIndex> {
        (0..=max_order).flat_map(|k| Self::all_of_order(n, k)).collect()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raised_and_lowered_are_inverse() {
        let m = MultiIndex::new(&[2, 0, 1, 0]);
        assert_eq!(m.indices(), &[0, 0, 1, 2]);
        let r = m.raised(1);
        assert_eq!(r.indices(), &[0, 0, 1, 1, 2]);
        assert_eq!(r.lowered(1).unwrap(), m);
        assert_eq!(m.lowered(3), None);
    }

    #[test]
    fn orderings_and_choose() {
        assert_eq!(MultiIndex::new(&[0, 0]).orderings(), 1);
        assert_eq!(MultiIndex::new(&[0, 1]).orderings(), 2);
        assert_eq!(MultiIndex::new(&[0, 0, 1]).orderings(), 3);
        let m = MultiIndex::new(&[0, 0, 1]);
        assert_eq!(m.choose(&MultiIndex::new(&[0])), 2);
        assert_eq!(m.choose(&MultiIndex::new(&[0, 1])), 2);
        assert_eq!(m.choose(&MultiIndex::new(&[1, 1])), 0);
        assert_eq!(m.choose(&MultiIndex::empty()), 1);
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(MultiIndex::all_of_order(3, 2).len(), 6);
        assert_eq!(MultiIndex::all_up_to_order(2, 2).len(), 1 + 2 + 3);
    }
}
