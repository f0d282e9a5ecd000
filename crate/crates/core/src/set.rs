//! Winner sets as 64-bit masks.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Largest market the mask representation supports.
pub const MAX_AGENTS: usize = 64;

/// A subset of agents `[n]`, stored as a bit mask (bit `i` set iff agent `i` is a member).
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WinnerSet(u64);

impl WinnerSet {
    pub const EMPTY: WinnerSet = WinnerSet(0);

    pub const fn from_bits(bits: u64) -> Self {
        WinnerSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    /// All agents `0..n`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_AGENTS, "at most {MAX_AGENTS} agents supported, got {n}");
        if n == MAX_AGENTS {
            WinnerSet(u64::MAX)
        } else {
            WinnerSet((1u64 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        WinnerSet(1u64 << i)
    }

    pub fn from_agents<I: IntoIterator<Item = usize>>(agents: I) -> Self {
        agents.into_iter().fold(WinnerSet::EMPTY, |s, i| s.with(i))
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_AGENTS && self.0 >> i & 1 == 1
    }

    #[must_use]
    pub fn with(self, i: usize) -> Self {
        WinnerSet(self.0 | 1u64 << i)
    }

    #[must_use]
    pub fn without(self, i: usize) -> Self {
        WinnerSet(self.0 & !(1u64 << i))
    }

    #[must_use]
    pub fn union(self, other: Self) -> Self {
        WinnerSet(self.0 | other.0)
    }

    #[must_use]
    pub fn intersection(self, other: Self) -> Self {
        WinnerSet(self.0 & other.0)
    }

    #[must_use]
    pub fn difference(self, other: Self) -> Self {
        WinnerSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Members in increasing order.
    pub fn iter(self) -> Members {
        Members(self.0)
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Lexicographic comparison of the sorted member lists.
    pub fn lex_cmp(self, other: Self) -> std::cmp::Ordering {
        self.iter().cmp(other.iter())
    }

    /// Every subset of `self`, including the empty set and `self`.
    pub fn subsets(self) -> Subsets {
        Subsets { universe: self.0, next: Some(0) }
    }
}

impl fmt::Debug for WinnerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for WinnerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

pub struct Members(u64);

impl Iterator for Members {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let k = self.0.count_ones() as usize;
        (k, Some(k))
    }
}

impl ExactSizeIterator for Members {}

/// Submask enumeration in increasing numeric order.
pub struct Subsets {
    universe: u64,
    next: Option<u64>,
}

impl Iterator for Subsets {
    type Item = WinnerSet;

    fn next(&mut self) -> Option<WinnerSet> {
        let cur = self.next?;
        self.next = if cur == self.universe {
            None
        } else {
            // (cur - universe) & universe steps to the next submask
            Some(cur.wrapping_sub(self.universe) & self.universe)
        };
        Some(WinnerSet(cur))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn members_are_sorted() {
        let s = WinnerSet::from_agents([5, 0, 3]);
        assert_eq!(s.to_vec(), vec![0, 3, 5]);
        assert_eq!(s.len(), 3);
        assert_eq!(s.to_string(), "{0,3,5}");
    }

    #[test]
    fn subsets_cover_power_set() {
        let s = WinnerSet::from_agents([1, 4, 6]);
        let subs: Vec<_> = s.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|t| t.is_subset(s)));
        assert_eq!(subs[0], WinnerSet::EMPTY);
        assert_eq!(*subs.last().unwrap(), s);
        assert_eq!(WinnerSet::EMPTY.subsets().count(), 1);
    }

    #[test]
    fn lex_order_differs_from_numeric() {
        let a = WinnerSet::from_agents([0, 3]);
        let b = WinnerSet::from_agents([1, 2]);
        assert!(a.bits() > b.bits());
        assert_eq!(a.lex_cmp(b), std::cmp::Ordering::Less);
    }

    #[test]
    fn full_set_edges() {
        assert_eq!(WinnerSet::full(0), WinnerSet::EMPTY);
        assert_eq!(WinnerSet::full(64).len(), 64);
        assert_eq!(WinnerSet::full(3).bits(), 0b111);
    }
}
