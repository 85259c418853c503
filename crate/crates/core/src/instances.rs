//! Instances, allocations, value vectors and the welfare orders over them.

use std::cmp::Ordering;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goods::{Good, GoodSet};
use crate::matroid::Valuation;

/// Default cap on the number of assignments any enumeration may visit.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 10_000_000;

pub type Agent = usize;

/// `m` goods shared among `n >= 1` agents, one valuation per agent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRepr", into = "InstanceRepr")]
pub struct Instance {
    m: usize,
    valuations: Vec<Valuation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRepr {
    m: usize,
    n: usize,
    valuations: Vec<Valuation>,
}

impl TryFrom<InstanceRepr> for Instance {
    type Error = Error;

    fn try_from(repr: InstanceRepr) -> Result<Self> {
        if repr.valuations.len() != repr.n {
            return Err(Error::Input(format!(
                "instance declares n = {} but lists {} valuations",
                repr.n,
                repr.valuations.len()
            )));
        }
        Instance::new(repr.m, repr.valuations)
    }
}

impl From<Instance> for InstanceRepr {
    fn from(inst: Instance) -> Self {
        InstanceRepr {
            m: inst.m,
            n: inst.valuations.len(),
            valuations: inst.valuations,
        }
    }
}

impl Instance {
    pub fn new(m: usize, valuations: Vec<Valuation>) -> Result<Self> {
        if valuations.is_empty() {
            return Err(Error::Input("an instance needs at least one agent".into()));
        }
        if let Some((i, v)) = valuations.iter().enumerate().find(|(_, v)| v.m() != m) {
            return Err(Error::Input(format!(
                "agent {i}'s valuation ranges over {} goods, instance has {m}",
                v.m()
            )));
        }
        Ok(Instance { m, valuations })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.valuations.len()
    }

    pub fn goods(&self) -> GoodSet {
        GoodSet::full(self.m)
    }

    pub fn valuation(&self, i: Agent) -> &Valuation {
        &self.valuations[i]
    }

    pub fn valuations(&self) -> &[Valuation] {
        &self.valuations
    }

    /// `(v'_i, v_{-i})`
    pub fn with_valuation(&self, i: Agent, v: Valuation) -> Result<Instance> {
        if i >= self.n() {
            return Err(Error::Input(format!(
                "agent {i} does not exist (n = {})",
                self.n()
            )));
        }
        let mut valuations = self.valuations.clone();
        valuations[i] = v;
        Instance::new(self.m, valuations)
    }

    pub fn all_matroid_kind(&self) -> bool {
        self.valuations.iter().all(Valuation::is_matroid_kind)
    }

    /// `v_i(A_i)` for every agent.
    pub fn values(&self, a: &Allocation) -> Result<ValueVector> {
        a.check_for(self)?;
        Ok(self.values_unchecked(a))
    }

    pub(crate) fn values_unchecked(&self, a: &Allocation) -> ValueVector {
        ValueVector(
            self.valuations
                .iter()
                .zip(&a.bundles)
                .map(|(v, &b)| v.rank(b))
                .collect(),
        )
    }

    /// Every bundle is independent for its owner, i.e. `v_i(A_i) = |A_i|`.
    pub fn is_non_wasteful(&self, a: &Allocation) -> Result<bool> {
        a.check_for(self)?;
        Ok(self.is_non_wasteful_unchecked(a))
    }

    pub(crate) fn is_non_wasteful_unchecked(&self, a: &Allocation) -> bool {
        self.valuations
            .iter()
            .zip(&a.bundles)
            .all(|(v, &b)| v.is_independent(b))
    }

    /// `a` weakly improves every agent over `b` and strictly improves one.
    pub fn pareto_dominates(&self, a: &Allocation, b: &Allocation) -> Result<bool> {
        let (va, vb) = (self.values(a)?, self.values(b)?);
        Ok(va.pareto_dominates(&vb))
    }

    /// Enumerates allocations by a mixed-radix counter over goods, good 0
    /// being the least significant digit. Digit `i < n` gives the good to
    /// agent `i`; in partial mode digit `n` leaves it unallocated.
    pub fn enumerate_allocations(
        &self,
        complete_only: bool,
        budget: u128,
    ) -> Result<AllocationIter> {
        let radix = if complete_only {
            self.n()
        } else {
            self.n() + 1
        };
        let total = count_assignments(radix, self.m)
            .filter(|&t| t <= budget)
            .ok_or_else(|| Error::Capability {
                what: format!(
                    "enumerating {}^{} {} allocations",
                    radix,
                    self.m,
                    if complete_only { "complete" } else { "partial" }
                ),
                bound: budget,
            })?;
        Ok(AllocationIter {
            n: self.n(),
            radix,
            digits: vec![0; self.m],
            remaining: total,
        })
    }
}

/// `radix^m`, or `None` on overflow.
pub(crate) fn count_assignments(radix: usize, m: usize) -> Option<u128> {
    (radix as u128).checked_pow(m as u32)
}

pub struct AllocationIter {
    n: usize,
    radix: usize,
    digits: Vec<usize>,
    remaining: u128,
}

impl Iterator for AllocationIter {
    type Item = Allocation;

    fn next(&mut self) -> Option<Allocation> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let mut bundles = vec![GoodSet::EMPTY; self.n];
        for (g, &d) in self.digits.iter().enumerate() {
            if d < self.n {
                bundles[d].insert(g);
            }
        }
        for d in self.digits.iter_mut() {
            *d += 1;
            if *d < self.radix {
                break;
            }
            *d = 0;
        }
        Some(Allocation { bundles })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (r, usize::try_from(self.remaining).ok())
    }
}

/// `n` pairwise-disjoint bundles; goods in no bundle are unallocated.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Allocation {
    pub bundles: Vec<GoodSet>,
}

impl Allocation {
    pub fn empty(n: usize) -> Self {
        Allocation {
            bundles: vec![GoodSet::EMPTY; n],
        }
    }

    /// Rejects overlapping bundles.
    pub fn new(bundles: Vec<GoodSet>) -> Result<Self> {
        let mut seen = GoodSet::EMPTY;
        for (i, &b) in bundles.iter().enumerate() {
            if !b.is_disjoint(seen) {
                return Err(Error::Input(format!(
                    "bundle of agent {i} shares goods {} with an earlier bundle",
                    b.intersection(seen)
                )));
            }
            seen = seen.union(b);
        }
        Ok(Allocation { bundles })
    }

    pub fn n(&self) -> usize {
        self.bundles.len()
    }

    pub fn bundle(&self, i: Agent) -> GoodSet {
        self.bundles[i]
    }

    pub fn allocated(&self) -> GoodSet {
        self.bundles
            .iter()
            .fold(GoodSet::EMPTY, |acc, &b| acc.union(b))
    }

    pub fn unallocated(&self, m: usize) -> GoodSet {
        GoodSet::full(m).difference(self.allocated())
    }

    pub fn owner(&self, g: Good) -> Option<Agent> {
        self.bundles.iter().position(|b| b.contains(g))
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.bundles.iter().map(|b| b.len()).collect()
    }

    /// Checks dimensions, disjointness and range against `inst`.
    pub fn check_for(&self, inst: &Instance) -> Result<()> {
        if self.n() != inst.n() {
            return Err(Error::Input(format!(
                "allocation has {} bundles, instance has {} agents",
                self.n(),
                inst.n()
            )));
        }
        let full = inst.goods();
        let mut seen = GoodSet::EMPTY;
        for (i, &b) in self.bundles.iter().enumerate() {
            if !b.is_subset(full) {
                return Err(Error::Input(format!(
                    "bundle of agent {i} holds goods {} outside [0, {})",
                    b.difference(full),
                    inst.m()
                )));
            }
            if !b.is_disjoint(seen) {
                return Err(Error::Input(format!(
                    "bundle of agent {i} shares goods {} with an earlier bundle",
                    b.intersection(seen)
                )));
            }
            seen = seen.union(b);
        }
        Ok(())
    }
}

/// `(v_1(A_1), ..., v_n(A_n))`
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueVector(pub Vec<usize>);

impl ValueVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn sum(&self) -> usize {
        self.0.iter().sum()
    }

    /// Geometric mean of the values; any zero entry gives 0.
    pub fn nsw(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        if self.0.contains(&0) {
            return 0.0;
        }
        let mean_log = self.0.iter().map(|&x| (x as f64).ln()).sum::<f64>() / self.0.len() as f64;
        mean_log.exp()
    }

    /// Ascending order.
    pub fn sorted(&self) -> ValueVector {
        let mut v = self.0.clone();
        v.sort();
        ValueVector(v)
    }

    /// Every prefix sum of `sorted(self)` is at least that of `sorted(other)`.
    pub fn lorenz_dominates(&self, other: &ValueVector) -> Result<bool> {
        same_length(self, other)?;
        let (a, b) = (self.sorted(), other.sorted());
        let (mut sa, mut sb) = (0usize, 0usize);
        for (x, y) in a.0.iter().zip(&b.0) {
            sa += x;
            sb += y;
            if sa < sb {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Lexicographic comparison of the sorted vectors.
    pub fn leximin_cmp(&self, other: &ValueVector) -> Result<Ordering> {
        same_length(self, other)?;
        Ok(self.sorted().0.cmp(&other.sorted().0))
    }

    /// Nash welfare order: more agents with positive value first, then the
    /// exact product of the positive values. On vectors without zeros this is
    /// the order of the geometric mean.
    pub fn nash_cmp(&self, other: &ValueVector) -> Result<Ordering> {
        same_length(self, other)?;
        let positives = |v: &ValueVector| v.0.iter().filter(|&&x| x > 0).count();
        Ok(positives(self)
            .cmp(&positives(other))
            .then_with(|| exact_product(&self.0).cmp(&exact_product(&other.0))))
    }

    pub fn pareto_dominates(&self, other: &ValueVector) -> bool {
        self.len() == other.len()
            && self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
            && self.0.iter().zip(&other.0).any(|(a, b)| a > b)
    }
}

fn same_length(a: &ValueVector, b: &ValueVector) -> Result<()> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(Error::Input(format!(
            "value vectors of different lengths ({} and {})",
            a.len(),
            b.len()
        )))
    }
}

/// Exact product of the positive entries.
fn exact_product(values: &[usize]) -> BigUint {
    values
        .iter()
        .filter(|&&x| x > 0)
        .map(|&x| BigUint::from(x))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::presets;
    use proptest::prelude::*;

    fn vv(v: &[usize]) -> ValueVector {
        ValueVector(v.to_vec())
    }

    fn alloc(bundles: &[&[Good]]) -> Allocation {
        Allocation::new(
            bundles
                .iter()
                .map(|b| b.iter().copied().collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn values_examples() {
        let inst = presets::six_good_profile();
        assert_eq!(
            inst.values(&alloc(&[&[0], &[1, 2, 3]])).unwrap(),
            vv(&[1, 3])
        );
        assert_eq!(inst.values(&Allocation::empty(2)).unwrap(), vv(&[0, 0]));
        let single = Instance::new(6, vec![inst.valuation(1).clone()]).unwrap();
        assert_eq!(
            single.values(&alloc(&[&[0, 1, 2, 3, 4, 5]])).unwrap(),
            vv(&[3])
        );
        assert!(inst.values(&Allocation::empty(3)).is_err());
    }

    #[test]
    fn non_wasteful_examples() {
        let inst = presets::six_good_profile();
        assert!(inst.is_non_wasteful(&alloc(&[&[0], &[1, 2, 3]])).unwrap());
        assert!(!inst.is_non_wasteful(&alloc(&[&[], &[0, 1]])).unwrap());
        assert!(inst.is_non_wasteful(&Allocation::empty(2)).unwrap());
    }

    #[test]
    fn nsw_examples() {
        assert!((vv(&[1, 3]).nsw() - 3f64.sqrt()).abs() < 1e-9);
        assert_eq!(vv(&[0, 7]).nsw(), 0.0);
        assert!((vv(&[4, 4, 4]).nsw() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sorting_examples() {
        assert_eq!(vv(&[1, 3]).sorted(), vv(&[1, 3]));
        assert_eq!(vv(&[3, 1]).sorted(), vv(&[1, 3]));
        assert_eq!(vv(&[2, 2, 0]).sorted(), vv(&[0, 2, 2]));
    }

    #[test]
    fn lorenz_examples() {
        assert!(vv(&[2, 2]).lorenz_dominates(&vv(&[1, 3])).unwrap());
        assert!(!vv(&[1, 3]).lorenz_dominates(&vv(&[2, 2])).unwrap());
        assert!(vv(&[1, 3]).lorenz_dominates(&vv(&[1, 3])).unwrap());
        assert!(vv(&[1]).lorenz_dominates(&vv(&[1, 2])).is_err());
    }

    #[test]
    fn leximin_examples() {
        assert_eq!(
            vv(&[1, 3]).leximin_cmp(&vv(&[2, 2])).unwrap(),
            Ordering::Less
        );
        assert_eq!(
            vv(&[1, 3]).leximin_cmp(&vv(&[3, 1])).unwrap(),
            Ordering::Equal
        );
        assert_eq!(
            vv(&[2, 2]).leximin_cmp(&vv(&[1, 4])).unwrap(),
            Ordering::Greater
        );
    }

    #[test]
    fn pareto_examples() {
        let inst = presets::six_good_profile();
        assert!(inst
            .pareto_dominates(&alloc(&[&[0], &[1]]), &alloc(&[&[], &[1]]))
            .unwrap());
        let a = alloc(&[&[0], &[1]]);
        assert!(!inst.pareto_dominates(&a, &a).unwrap());
        assert!(!vv(&[1, 0]).pareto_dominates(&vv(&[0, 1])));
        assert!(!vv(&[0, 1]).pareto_dominates(&vv(&[1, 0])));
    }

    #[test]
    fn enumeration_counts() {
        let v = |m| Valuation::zero(m);
        let two = Instance::new(2, vec![v(2), v(2)]).unwrap();
        assert_eq!(two.enumerate_allocations(true, 100).unwrap().count(), 4);
        let empty = Instance::new(0, vec![v(0), v(0)]).unwrap();
        let all: Vec<_> = empty.enumerate_allocations(true, 100).unwrap().collect();
        assert_eq!(all, vec![Allocation::empty(2)]);
        let three = Instance::new(3, vec![v(3), v(3)]).unwrap();
        assert_eq!(three.enumerate_allocations(false, 100).unwrap().count(), 27);
        assert!(matches!(
            three.enumerate_allocations(false, 26),
            Err(Error::Capability { bound: 26, .. })
        ));
        let big = Instance::new(64, vec![v(64), v(64)]).unwrap();
        assert!(big
            .enumerate_allocations(true, DEFAULT_ENUMERATION_BUDGET)
            .is_err());
    }

    #[test]
    fn allocation_json_shape() {
        let a: Allocation = serde_json::from_str(r#"{"bundles": [[0],[1,2,3]]}"#).unwrap();
        assert_eq!(a, alloc(&[&[0], &[1, 2, 3]]));
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            r#"{"bundles":[[0],[1,2,3]]}"#
        );
        assert_eq!(a.unallocated(6), GoodSet::from([4, 5]));
    }

    #[test]
    fn instance_json_checks_agent_count() {
        let ok = r#"{"m":2,"n":1,"valuations":[{"kind":"zero","m":2}]}"#;
        assert!(serde_json::from_str::<Instance>(ok).is_ok());
        let bad_n = r#"{"m":2,"n":2,"valuations":[{"kind":"zero","m":2}]}"#;
        assert!(serde_json::from_str::<Instance>(bad_n).is_err());
        let bad_m = r#"{"m":3,"n":1,"valuations":[{"kind":"zero","m":2}]}"#;
        assert!(serde_json::from_str::<Instance>(bad_m).is_err());
    }

    fn vec_pair(
        max_n: usize,
        max_v: usize,
    ) -> impl Strategy<Value = (ValueVector, ValueVector, ValueVector)> {
        (1..=max_n).prop_flat_map(move |n| {
            let one = || proptest::collection::vec(0..=max_v, n).prop_map(ValueVector);
            (one(), one(), one())
        })
    }

    proptest! {
        #[test]
        fn lorenz_is_a_preorder((u, w, x) in vec_pair(6, 6)) {
            prop_assert!(u.lorenz_dominates(&u).unwrap());
            if u.lorenz_dominates(&w).unwrap() && w.lorenz_dominates(&x).unwrap() {
                prop_assert!(u.lorenz_dominates(&x).unwrap());
            }
        }

        #[test]
        fn strict_lorenz_implies_leximin_better((u, w, _x) in vec_pair(6, 6)) {
            if u.lorenz_dominates(&w).unwrap() && !w.lorenz_dominates(&u).unwrap() {
                prop_assert_eq!(u.leximin_cmp(&w).unwrap(), Ordering::Greater);
            }
        }

        #[test]
        fn nash_order_matches_integer_products((u, w, _x) in vec_pair(6, 20)) {
            // plain u64 products are exact at this size
            let prod = |v: &ValueVector| v.0.iter().map(|&x| x as u64).product::<u64>();
            let no_zero = |v: &ValueVector| !v.0.contains(&0);
            if no_zero(&u) && no_zero(&w) {
                prop_assert_eq!(u.nash_cmp(&w).unwrap(), prod(&u).cmp(&prod(&w)));
                let (fu, fw) = (u.nsw(), w.nsw());
                match prod(&u).cmp(&prod(&w)) {
                    Ordering::Greater => prop_assert!(fu > fw || (fu - fw).abs() < 1e-9),
                    Ordering::Less => prop_assert!(fu < fw || (fu - fw).abs() < 1e-9),
                    Ordering::Equal => prop_assert!((fu - fw).abs() < 1e-9),
                }
            }
        }

        #[test]
        fn enumeration_is_exact_and_distinct(m in 0usize..5, n in 1usize..4, partial in any::<bool>()) {
            let inst = Instance::new(m, vec![Valuation::zero(m); n]).unwrap();
            let all: Vec<Allocation> = inst.enumerate_allocations(!partial, 1 << 20).unwrap().collect();
            let radix = if partial { n + 1 } else { n };
            prop_assert_eq!(all.len() as u128, count_assignments(radix, m).unwrap());
            let distinct: std::collections::HashSet<_> = all.iter().cloned().collect();
            prop_assert_eq!(distinct.len(), all.len());
            for a in &all {
                prop_assert!(a.check_for(&inst).is_ok());
                if !partial {
                    prop_assert_eq!(a.allocated(), inst.goods());
                }
            }
        }
    }

    #[test]
    fn exact_product_handles_large_values() {
        let big = vv(&[60; 20]);
        let bigger = vv(&[
            60, 60, 60, 60, 60, 60, 60, 60, 60, 60, 60, 60, 60, 60, 60, 60, 60, 60, 60, 61,
        ]);
        assert_eq!(big.nash_cmp(&bigger).unwrap(), Ordering::Less);
        assert_eq!(vv(&[0, 5]).nash_cmp(&vv(&[1, 1])).unwrap(), Ordering::Less);
    }
}
