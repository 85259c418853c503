//! Fairness and efficiency auditors. Every failed verdict carries a witness
//! that can be re-checked with plain rank queries.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exchange::{augment_forward, growth_path, ExchangeGraph, Sink};
use crate::goods::{Good, GoodSet, Permutation};
use crate::instances::{count_assignments, Agent, Allocation, Instance, ValueVector};
use crate::mechanisms::cleanup_allocation;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessVerdict {
    pub property: String,
    pub holds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl FairnessVerdict {
    pub fn pass(property: &str) -> Self {
        FairnessVerdict {
            property: property.into(),
            holds: true,
            witness: None,
            note: None,
        }
    }

    pub fn fail(property: &str, witness: Witness) -> Self {
        FairnessVerdict {
            property: property.into(),
            holds: false,
            witness: Some(witness),
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Why a verdict failed. Serialized without a tag; variants are listed so
/// that no variant's fields are a subset of an earlier one's.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Witness {
    /// A size condition of gradualness broke for `agent` after restricting
    /// its report to `restricted_to`.
    Gradual {
        condition: String,
        agent: Agent,
        restricted_to: GoodSet,
        before: usize,
        after: usize,
    },
    /// Relabelling the goods by `permutation` changed `agent`'s value.
    Relabel {
        permutation: Permutation,
        agent: Agent,
        value: usize,
        permuted_value: usize,
    },
    /// `agent` gets `value` below its share.
    Share {
        agent: Agent,
        value: usize,
        share: usize,
    },
    /// `envier` envies `envied` even after removing any single good.
    Envy { envier: Agent, envied: Agent },
    /// Unallocated `good` would raise `agent`'s value.
    LocalGain { agent: Agent, good: Good },
    /// An allocation that Pareto-dominates the audited one.
    Dominated { dominating: Allocation },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MmsProfile {
    pub shares: Vec<usize>,
}

pub fn is_ef1(inst: &Instance, a: &Allocation) -> Result<FairnessVerdict> {
    a.check_for(inst)?;
    for i in 0..inst.n() {
        let v = inst.valuation(i);
        let own = v.rank(a.bundle(i));
        for j in (0..inst.n()).filter(|&j| j != i) {
            let other = a.bundle(j);
            if other.is_empty() {
                continue;
            }
            if !other.iter().any(|g| own >= v.rank(other.without(g))) {
                return Ok(FairnessVerdict::fail(
                    "EF1",
                    Witness::Envy {
                        envier: i,
                        envied: j,
                    },
                ));
            }
        }
    }
    Ok(FairnessVerdict::pass("EF1"))
}

/// `μ_i`: the best worst-bundle value over complete `n`-partitions of the
/// goods, all valued by agent `i`.
///
/// Partitions are generated with good 0 in slot 0 and each later good either
/// joining a used slot or opening the next one, since slots are
/// interchangeable. Branches whose bundles cannot beat the incumbent even
/// with every remaining good added are cut.
pub fn mms_share(inst: &Instance, i: Agent, budget: u128) -> Result<usize> {
    if i >= inst.n() {
        return Err(Error::Input(format!("agent {i} does not exist")));
    }
    check_budget(
        inst.n(),
        inst.m(),
        budget,
        "complete partitions for the maximin share",
    )?;
    let v = inst.valuation(i);
    let n = inst.n();
    let m = inst.m();
    if n == 1 {
        return Ok(v.rank(inst.goods()));
    }
    let mut slots = vec![GoodSet::EMPTY; n];
    let mut best = 0;
    share_search(v, m, 0, 0, &mut slots, &mut best);
    Ok(best)
}

fn share_search(
    v: &crate::matroid::Valuation,
    m: usize,
    g: Good,
    used: usize,
    slots: &mut [GoodSet],
    best: &mut usize,
) {
    let n = slots.len();
    if g == m {
        let low = slots.iter().map(|&s| v.rank(s)).min().unwrap_or(0);
        *best = (*best).max(low);
        return;
    }
    // too few goods left to fill the unopened slots
    if n - used > m - g {
        return;
    }
    let rest = GoodSet::full(m).difference(GoodSet::full(g));
    let ceiling = slots
        .iter()
        .map(|&s| v.rank(s.union(rest)))
        .min()
        .unwrap_or(0);
    if ceiling <= *best {
        return;
    }
    for k in 0..(used + 1).min(n) {
        slots[k].insert(g);
        share_search(v, m, g + 1, used.max(k + 1), slots, best);
        slots[k].remove(g);
    }
}

pub fn mms_profile(inst: &Instance, budget: u128) -> Result<MmsProfile> {
    let shares = (0..inst.n())
        .map(|i| mms_share(inst, i, budget))
        .collect::<Result<_>>()?;
    Ok(MmsProfile { shares })
}

pub fn is_mms(inst: &Instance, a: &Allocation, budget: u128) -> Result<FairnessVerdict> {
    a.check_for(inst)?;
    let profile = mms_profile(inst, budget)?;
    Ok(mms_verdict(inst, a, &profile))
}

pub(crate) fn mms_verdict(
    inst: &Instance,
    a: &Allocation,
    profile: &MmsProfile,
) -> FairnessVerdict {
    let values = inst.values_unchecked(a);
    match (0..inst.n()).find(|&i| values.0[i] < profile.shares[i]) {
        Some(agent) => FairnessVerdict::fail(
            "MMS",
            Witness::Share {
                agent,
                value: values.0[agent],
                share: profile.shares[agent],
            },
        ),
        None => FairnessVerdict::pass("MMS"),
    }
}

/// Scans all partial allocations for one that Pareto-dominates `a`.
pub fn is_pareto_optimal_oracle(
    inst: &Instance,
    a: &Allocation,
    budget: u128,
) -> Result<FairnessVerdict> {
    a.check_for(inst)?;
    let base = inst.values_unchecked(a);
    let found = inst
        .enumerate_allocations(false, budget)?
        .find(|b| inst.values_unchecked(b).pareto_dominates(&base));
    Ok(match found {
        Some(dominating) => FairnessVerdict::fail("PO", Witness::Dominated { dominating }),
        None => FairnessVerdict::pass("PO"),
    })
}

/// With binary marginals every Pareto improvement raises the total value,
/// so `a` is Pareto-optimal exactly when its non-wasteful cleanup admits no
/// growth path for any agent. The witness is the cleanup augmented once.
pub fn is_pareto_optimal_fast(inst: &Instance, a: &Allocation) -> Result<FairnessVerdict> {
    let clean = cleanup_allocation(inst, a)?;
    let graph = ExchangeGraph::build(inst, &clean)?;
    for i in 0..inst.n() {
        if let Some(q) = growth_path(inst, &clean, &graph, i) {
            let dominating = augment_forward(inst, &clean, &q, i, Sink::Unallocated)?;
            return Ok(FairnessVerdict::fail(
                "PO",
                Witness::Dominated { dominating },
            ));
        }
    }
    Ok(FairnessVerdict::pass("PO"))
}

/// No unallocated good raises any agent's value.
pub fn is_locally_efficient(inst: &Instance, a: &Allocation) -> Result<FairnessVerdict> {
    a.check_for(inst)?;
    for good in a.unallocated(inst.m()).iter() {
        for agent in 0..inst.n() {
            let (v, b) = (inst.valuation(agent), a.bundle(agent));
            if v.rank(b.with(good)) > v.rank(b) {
                return Ok(FairnessVerdict::fail(
                    "local-efficiency",
                    Witness::LocalGain { agent, good },
                ));
            }
        }
    }
    Ok(FairnessVerdict::pass("local-efficiency"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WelfareClass {
    pub is_nash_optimal: bool,
    pub is_leximin: bool,
    pub is_lorenz_dominating: bool,
}

/// Every distinct value vector reachable by some partial allocation.
#[derive(Clone, Debug)]
pub struct WelfareFrontier {
    vectors: Vec<ValueVector>,
}

impl WelfareFrontier {
    pub fn new(inst: &Instance, budget: u128) -> Result<Self> {
        let set: HashSet<ValueVector> = inst
            .enumerate_allocations(false, budget)?
            .map(|a| inst.values_unchecked(&a))
            .collect();
        let mut vectors: Vec<ValueVector> = set.into_iter().collect();
        vectors.sort();
        Ok(WelfareFrontier { vectors })
    }

    pub fn vectors(&self) -> &[ValueVector] {
        &self.vectors
    }

    /// Each flag is decided on its own: Nash by exact products, leximin by
    /// sorted-lexicographic comparison, Lorenz by prefix sums.
    pub fn classify(&self, v: &ValueVector) -> WelfareClass {
        let all = |f: &dyn Fn(&ValueVector) -> bool| self.vectors.iter().all(f);
        WelfareClass {
            is_nash_optimal: all(&|w| v.nash_cmp(w).is_ok_and(|o| o.is_ge())),
            is_leximin: all(&|w| v.leximin_cmp(w).is_ok_and(|o| o.is_ge())),
            is_lorenz_dominating: all(&|w| v.lorenz_dominates(w).unwrap_or(false)),
        }
    }
}

pub fn classify_welfare(inst: &Instance, a: &Allocation, budget: u128) -> Result<WelfareClass> {
    a.check_for(inst)?;
    let frontier = WelfareFrontier::new(inst, budget)?;
    Ok(frontier.classify(&inst.values_unchecked(a)))
}

pub(crate) fn check_budget(radix: usize, m: usize, budget: u128, what: &str) -> Result<()> {
    match count_assignments(radix, m) {
        Some(c) if c <= budget => Ok(()),
        _ => Err(Error::Capability {
            what: format!("{what}: {radix}^{m} assignments"),
            bound: budget,
        }),
    }
}
