use std::fmt;

use serde::{Deserialize, Serialize};

/// Set of open stations as a bitmask over station indices `0..R`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateKey(pub u64);

impl StateKey {
    pub const EMPTY: StateKey = StateKey(0);

    /// All `r` stations open.
    pub fn full(r: usize) -> Self {
        debug_assert!(r <= 64);
        if r == 64 {
            StateKey(u64::MAX)
        } else {
            StateKey((1u64 << r) - 1)
        }
    }

    pub fn from_stations<I: IntoIterator<Item = usize>>(stations: I) -> Self {
        StateKey(stations.into_iter().fold(0u64, |m, i| m | (1u64 << i)))
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn with(self, i: usize) -> Self {
        StateKey(self.0 | (1u64 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: StateKey) -> bool {
        self.0 & !other.0 == 0
    }

    /// Open stations in ascending order.
    pub fn stations(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }

    /// Closed stations among `0..r` in ascending order.
    pub fn closed(self, r: usize) -> impl Iterator<Item = usize> {
        StateKey(!self.0 & StateKey::full(r).0).stations()
    }

    /// Stations in `other` but not in `self`.
    pub fn added_in(self, other: StateKey) -> impl Iterator<Item = usize> {
        StateKey(other.0 & !self.0).stations()
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.stations().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_operations() {
        let s = StateKey::from_stations([0, 3, 5]);
        assert_eq!(s.len(), 3);
        assert!(s.contains(3) && !s.contains(4));
        assert_eq!(s.with(4).stations().collect::<Vec<_>>(), vec![0, 3, 4, 5]);
        assert_eq!(s.closed(7).collect::<Vec<_>>(), vec![1, 2, 4, 6]);
        assert!(s.is_subset_of(StateKey::full(6)));
        assert!(!StateKey::full(6).is_subset_of(s));
        assert_eq!(s.added_in(StateKey::full(6)).collect::<Vec<_>>(), vec![1, 2, 4]);
        assert_eq!(s.to_string(), "{0,3,5}");
        assert_eq!(StateKey::full(64).len(), 64);
    }
}
