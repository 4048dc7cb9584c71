use std::cmp::Ordering;
use std::fmt;

use crate::error::{EsvError, Result};

/// Order-preserving subset of element positions (0-based).
///
/// Positions below 64 are packed into a bitmask; any subsequence that touches
/// position 64 or beyond is stored as a sorted list. The representation is
/// canonical, so derived equality and hashing are set equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SubsequenceIndex(Repr);

#[derive(Clone, PartialEq, Eq, Hash)]
enum Repr {
    Mask(u64),
    Sorted(Box<[u32]>),
}

impl SubsequenceIndex {
    pub const fn empty() -> Self {
        SubsequenceIndex(Repr::Mask(0))
    }

    pub fn singleton(position: usize) -> Self {
        Self::empty().with(position)
    }

    /// Every position of a length-`n` sequence.
    pub fn full(n: usize) -> Self {
        if n <= 64 {
            let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
            SubsequenceIndex(Repr::Mask(mask))
        } else {
            SubsequenceIndex(Repr::Sorted((0..n as u32).collect()))
        }
    }

    pub const fn from_mask(mask: u64) -> Self {
        SubsequenceIndex(Repr::Mask(mask))
    }

    /// Builds from strictly increasing positions.
    pub fn from_positions(positions: &[usize]) -> Result<Self> {
        if let Some(w) = positions.windows(2).find(|w| w[0] >= w[1]) {
            return Err(EsvError::validation(
                "positions",
                format!("positions must be strictly increasing, got {} then {}", w[0], w[1]),
            ));
        }
        Ok(Self::from_sorted_unchecked(positions.iter().copied()))
    }

    fn from_sorted_unchecked<I: IntoIterator<Item = usize>>(positions: I) -> Self {
        let list: Vec<u32> = positions.into_iter().map(|p| p as u32).collect();
        match list.last() {
            Some(&last) if last >= 64 => SubsequenceIndex(Repr::Sorted(list.into_boxed_slice())),
            _ => SubsequenceIndex(Repr::Mask(list.iter().fold(0u64, |m, &p| m | (1u64 << p)))),
        }
    }

    /// The bitmask form, when every position is below 64.
    pub fn as_mask(&self) -> Option<u64> {
        match &self.0 {
            Repr::Mask(m) => Some(*m),
            Repr::Sorted(_) => None,
        }
    }

    pub fn len(&self) -> usize {
        match &self.0 {
            Repr::Mask(m) => m.count_ones() as usize,
            Repr::Sorted(list) => list.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, position: usize) -> bool {
        match &self.0 {
            Repr::Mask(m) => position < 64 && (m >> position) & 1 == 1,
            Repr::Sorted(list) => list.binary_search(&(position as u32)).is_ok(),
        }
    }

    /// Largest position, if any.
    pub fn last(&self) -> Option<usize> {
        match &self.0 {
            Repr::Mask(0) => None,
            Repr::Mask(m) => Some(63 - m.leading_zeros() as usize),
            Repr::Sorted(list) => list.last().map(|&p| p as usize),
        }
    }

    /// Copy with `position` added; insertion keeps sequence order.
    pub fn with(&self, position: usize) -> Self {
        match &self.0 {
            Repr::Mask(m) if position < 64 => SubsequenceIndex(Repr::Mask(m | (1u64 << position))),
            _ => {
                let mut list: Vec<usize> = self.positions().collect();
                if let Err(at) = list.binary_search(&position) {
                    list.insert(at, position);
                }
                Self::from_sorted_unchecked(list)
            }
        }
    }

    /// Copy with `position` removed.
    pub fn without(&self, position: usize) -> Self {
        match &self.0 {
            Repr::Mask(m) if position < 64 => SubsequenceIndex(Repr::Mask(m & !(1u64 << position))),
            Repr::Mask(_) => self.clone(),
            Repr::Sorted(list) => {
                Self::from_sorted_unchecked(list.iter().map(|&p| p as usize).filter(|&p| p != position))
            }
        }
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (Repr::Mask(a), Repr::Mask(b)) => a & !b == 0,
            _ => self.positions().all(|p| other.contains(p)),
        }
    }

    pub fn positions(&self) -> Positions<'_> {
        match &self.0 {
            Repr::Mask(m) => Positions::Mask(*m),
            Repr::Sorted(list) => Positions::List(list.iter()),
        }
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.positions().collect()
    }
}

impl Default for SubsequenceIndex {
    fn default() -> Self {
        Self::empty()
    }
}

/// Lexicographic order over the sorted position lists.
impl Ord for SubsequenceIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.positions().cmp(other.positions())
    }
}

impl PartialOrd for SubsequenceIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for SubsequenceIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.positions()).finish()
    }
}

impl fmt::Display for SubsequenceIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Ascending iterator over the positions of a [`SubsequenceIndex`].
pub enum Positions<'a> {
    Mask(u64),
    List(std::slice::Iter<'a, u32>),
}

impl Iterator for Positions<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        match self {
            Positions::Mask(m) => {
                if *m == 0 {
                    return None;
                }
                let p = m.trailing_zeros() as usize;
                *m &= *m - 1;
                Some(p)
            }
            Positions::List(it) => it.next().map(|&p| p as usize),
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = match self {
            Positions::Mask(m) => m.count_ones() as usize,
            Positions::List(it) => it.len(),
        };
        (n, Some(n))
    }
}

impl ExactSizeIterator for Positions<'_> {}
