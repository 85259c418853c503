//! Sets of goods and relabelings of the ground set.
//!
//! Goods are identified by `0..m` with `m <= 64`, so a bundle fits in a
//! single machine word. All set operations are plain bit arithmetic.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest ground set any valuation may range over.
pub const MAX_GOODS: usize = 64;

/// Identifier of a good.
pub type Good = usize;

/// A subset of the goods `[m]`, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct GoodSet(u64);

impl GoodSet {
    pub const EMPTY: GoodSet = GoodSet(0);

    pub const fn from_bits(bits: u64) -> Self {
        GoodSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    /// The full ground set `[m]`.
    pub fn full(m: usize) -> Self {
        debug_assert!(m <= MAX_GOODS);
        if m >= 64 {
            GoodSet(u64::MAX)
        } else {
            GoodSet((1u64 << m) - 1)
        }
    }

    pub fn singleton(g: Good) -> Self {
        debug_assert!(g < MAX_GOODS);
        GoodSet(1u64 << g)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, g: Good) -> bool {
        g < MAX_GOODS && self.0 & (1u64 << g) != 0
    }

    pub fn insert(&mut self, g: Good) {
        self.0 |= 1u64 << g;
    }

    pub fn remove(&mut self, g: Good) {
        self.0 &= !(1u64 << g);
    }

    /// `self + g`
    #[must_use]
    pub fn with(self, g: Good) -> Self {
        GoodSet(self.0 | (1u64 << g))
    }

    /// `self - g`
    #[must_use]
    pub fn without(self, g: Good) -> Self {
        GoodSet(self.0 & !(1u64 << g))
    }

    #[must_use]
    pub fn union(self, other: Self) -> Self {
        GoodSet(self.0 | other.0)
    }

    #[must_use]
    pub fn intersection(self, other: Self) -> Self {
        GoodSet(self.0 & other.0)
    }

    #[must_use]
    pub fn difference(self, other: Self) -> Self {
        GoodSet(self.0 & !other.0)
    }

    #[must_use]
    pub fn symmetric_difference(self, other: Self) -> Self {
        GoodSet(self.0 ^ other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    /// Smallest good in the set.
    pub fn first(self) -> Option<Good> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0.trailing_zeros() as usize)
        }
    }

    /// Largest good id plus one, or 0 for the empty set.
    pub fn bound(self) -> usize {
        64 - self.0.leading_zeros() as usize
    }

    /// Goods in ascending id order.
    pub fn iter(self) -> GoodIter {
        GoodIter(self.0)
    }

    /// All subsets of `self`, starting from the empty set.
    pub fn subsets(self) -> SubsetIter {
        SubsetIter {
            mask: self.0,
            next: Some(0),
        }
    }

    pub fn to_vec(self) -> Vec<Good> {
        self.iter().collect()
    }

    /// Builds a set from good ids, rejecting ids outside `[m]`.
    pub fn try_from_goods<I: IntoIterator<Item = Good>>(goods: I, m: usize) -> Result<Self> {
        let mut set = GoodSet::EMPTY;
        for g in goods {
            if g >= m {
                return Err(Error::Input(format!(
                    "good {g} is outside the ground set [0, {m})"
                )));
            }
            set.insert(g);
        }
        Ok(set)
    }
}

impl FromIterator<Good> for GoodSet {
    fn from_iter<I: IntoIterator<Item = Good>>(iter: I) -> Self {
        let mut set = GoodSet::EMPTY;
        for g in iter {
            set.insert(g);
        }
        set
    }
}

impl<const N: usize> From<[Good; N]> for GoodSet {
    fn from(goods: [Good; N]) -> Self {
        goods.into_iter().collect()
    }
}

impl IntoIterator for GoodSet {
    type Item = Good;
    type IntoIter = GoodIter;

    fn into_iter(self) -> GoodIter {
        self.iter()
    }
}

impl fmt::Debug for GoodSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for GoodSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, g) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{g}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for GoodSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for GoodSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let goods = Vec::<Good>::deserialize(deserializer)?;
        if let Some(&g) = goods.iter().find(|&&g| g >= MAX_GOODS) {
            return Err(serde::de::Error::custom(format!(
                "good {g} exceeds the supported maximum of {MAX_GOODS} goods"
            )));
        }
        Ok(goods.into_iter().collect())
    }
}

pub struct GoodIter(u64);

impl Iterator for GoodIter {
    type Item = Good;

    fn next(&mut self) -> Option<Good> {
        if self.0 == 0 {
            return None;
        }
        let g = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(g)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for GoodIter {}

/// Enumerates the submasks of a mask in increasing numeric order.
pub struct SubsetIter {
    mask: u64,
    next: Option<u64>,
}

impl Iterator for SubsetIter {
    type Item = GoodSet;

    fn next(&mut self) -> Option<GoodSet> {
        let cur = self.next?;
        self.next = if cur == self.mask {
            None
        } else {
            // next submask in increasing order
            Some(((cur | !self.mask).wrapping_add(1)) & self.mask)
        };
        Some(GoodSet(cur))
    }
}

/// A bijection `pi` on `[m]`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(try_from = "Vec<Good>", into = "Vec<Good>")]
pub struct Permutation {
    forward: Vec<Good>,
    inverse: Vec<Good>,
}

impl Permutation {
    pub fn identity(m: usize) -> Self {
        let forward: Vec<Good> = (0..m).collect();
        Permutation {
            inverse: forward.clone(),
            forward,
        }
    }

    /// Swaps goods `a` and `b`, fixing every other good.
    pub fn transposition(m: usize, a: Good, b: Good) -> Result<Self> {
        if a >= m || b >= m {
            return Err(Error::Input(format!(
                "transposition ({a} {b}) outside [0, {m})"
            )));
        }
        let mut forward: Vec<Good> = (0..m).collect();
        forward.swap(a, b);
        Permutation::new(forward)
    }

    pub fn new(forward: Vec<Good>) -> Result<Self> {
        let m = forward.len();
        if m > MAX_GOODS {
            return Err(Error::Input(format!(
                "permutation of {m} goods exceeds {MAX_GOODS}"
            )));
        }
        let mut inverse = vec![usize::MAX; m];
        for (g, &image) in forward.iter().enumerate() {
            if image >= m || inverse[image] != usize::MAX {
                return Err(Error::Input(format!(
                    "not a bijection on [0, {m}): {forward:?}"
                )));
            }
            inverse[image] = g;
        }
        Ok(Permutation { forward, inverse })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn apply(&self, g: Good) -> Good {
        self.forward[g]
    }

    pub fn apply_inverse(&self, g: Good) -> Good {
        self.inverse[g]
    }

    /// `pi(S)`
    pub fn image(&self, set: GoodSet) -> GoodSet {
        set.iter().map(|g| self.forward[g]).collect()
    }

    /// `pi^{-1}(S)`
    pub fn preimage(&self, set: GoodSet) -> GoodSet {
        set.iter().map(|g| self.inverse[g]).collect()
    }

    pub fn inverse(&self) -> Permutation {
        Permutation {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &Permutation) -> Result<Permutation> {
        if self.len() != first.len() {
            return Err(Error::Input(
                "composing permutations of different sizes".into(),
            ));
        }
        Permutation::new(first.forward.iter().map(|&g| self.forward[g]).collect())
    }

    pub fn as_slice(&self) -> &[Good] {
        &self.forward
    }

    pub fn is_identity(&self) -> bool {
        self.forward.iter().enumerate().all(|(g, &h)| g == h)
    }
}

impl TryFrom<Vec<Good>> for Permutation {
    type Error = Error;

    fn try_from(forward: Vec<Good>) -> Result<Self> {
        Permutation::new(forward)
    }
}

impl From<Permutation> for Vec<Good> {
    fn from(p: Permutation) -> Vec<Good> {
        p.forward
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_cover_every_submask_once() {
        let s = GoodSet::from([1, 3, 4]);
        let subs: Vec<GoodSet> = s.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert_eq!(subs[0], GoodSet::EMPTY);
        assert_eq!(*subs.last().unwrap(), s);
        assert!(subs.windows(2).all(|w| w[0].bits() < w[1].bits()));
        assert!(subs.iter().all(|x| x.is_subset(s)));
    }

    #[test]
    fn empty_mask_has_one_subset() {
        assert_eq!(GoodSet::EMPTY.subsets().count(), 1);
    }

    #[test]
    fn full_sets() {
        assert_eq!(GoodSet::full(0), GoodSet::EMPTY);
        assert_eq!(GoodSet::full(3).to_vec(), vec![0, 1, 2]);
        assert_eq!(GoodSet::full(64).len(), 64);
    }

    #[test]
    fn rejects_out_of_range_goods() {
        assert!(GoodSet::try_from_goods([0, 5], 5).is_err());
        assert_eq!(
            GoodSet::try_from_goods([0, 4], 5).unwrap(),
            GoodSet::from([0, 4])
        );
    }

    #[test]
    fn permutation_rejects_non_bijection() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
    }

    #[test]
    fn preimage_inverts_image() {
        let p = Permutation::new(vec![2, 0, 3, 1]).unwrap();
        for s in GoodSet::full(4).subsets() {
            assert_eq!(p.preimage(p.image(s)), s);
        }
        for g in 0..4 {
            assert_eq!(p.apply_inverse(p.apply(g)), g);
        }
    }

    #[test]
    fn goodset_json_is_sorted_list() {
        let s = GoodSet::from([3, 0, 2]);
        assert_eq!(serde_json::to_string(&s).unwrap(), "[0,2,3]");
        let back: GoodSet = serde_json::from_str("[3,2,0]").unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<GoodSet>("[64]").is_err());
    }
}
