//! Allocation mechanisms: Prioritized Egalitarian, a brute-force
//! Lorenz-dominating oracle, serial dictatorships, the non-wasteful cleanup
//! wrapper, and a few deliberately flawed mechanisms used as audit targets.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::exchange::{augment_forward, growth_path, ExchangeGraph, Sink};
use crate::goods::GoodSet;
use crate::instances::{Agent, Allocation, Instance, ValueVector};
use crate::matroid::{Valuation, DEFAULT_EXHAUSTIVE_LIMIT};

/// Default enumeration budget of the oracle: `5^8`, i.e. m ≤ 8 with n ≤ 4.
pub const DEFAULT_ORACLE_BUDGET: u128 = 390_625;

/// A deterministic map from reported profiles to (partial) allocations.
pub trait Mechanism: Send + Sync {
    fn name(&self) -> String;
    fn allocate(&self, inst: &Instance) -> Result<Allocation>;
}

impl<M: Mechanism + ?Sized> Mechanism for Box<M> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn allocate(&self, inst: &Instance) -> Result<Allocation> {
        (**self).allocate(inst)
    }
}

impl<M: Mechanism + ?Sized> Mechanism for &M {
    fn name(&self) -> String {
        (**self).name()
    }

    fn allocate(&self, inst: &Instance) -> Result<Allocation> {
        (**self).allocate(inst)
    }
}

impl fmt::Debug for dyn Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mechanism({})", self.name())
    }
}

/// Order in which ties between equally sized bundles are broken.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Priority {
    /// Lower index first.
    Index,
    /// An explicit ranking of all agents, highest priority first.
    Order(Vec<Agent>),
    /// Smaller reported `v([m])` first, then lower index. Because the order
    /// depends on the reports, agents can buy priority by under-reporting.
    ReportedRank,
}

impl Priority {
    /// Agents ranked from highest priority to lowest.
    pub fn ranking(&self, inst: &Instance) -> Result<Vec<Agent>> {
        let n = inst.n();
        match self {
            Priority::Index => Ok((0..n).collect()),
            Priority::Order(order) => {
                let mut seen = vec![false; n];
                if order.len() != n
                    || order
                        .iter()
                        .any(|&i| i >= n || std::mem::replace(&mut seen[i], true))
                {
                    return Err(Error::Input(format!(
                        "priority {order:?} is not an ordering of {n} agents"
                    )));
                }
                Ok(order.clone())
            }
            Priority::ReportedRank => {
                let mut order: Vec<Agent> = (0..n).collect();
                order.sort_by_key(|&i| (inst.valuation(i).rank(inst.goods()), i));
                Ok(order)
            }
        }
    }
}

/// Replaces every report that is not a certified matroid rank function by
/// the zero valuation.
pub fn sanitize_reports(inst: &Instance) -> Instance {
    let valuations = inst
        .valuations()
        .iter()
        .map(
            |v| match v.validate_matroid_rank(DEFAULT_EXHAUSTIVE_LIMIT) {
                Ok(true) => v.clone(),
                _ => Valuation::zero(inst.m()),
            },
        )
        .collect();
    Instance::new(inst.m(), valuations).expect("same shape as the input")
}

/// Trace of one PE run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeRun {
    pub allocation: Allocation,
    /// Agent served in each round, in order.
    pub rounds: Vec<Agent>,
    /// Set when a cross-check against the oracle disagreed and the oracle's
    /// allocation was returned instead.
    pub fell_back: bool,
}

/// Prioritized Egalitarian.
///
/// Starting from empty bundles, each round serves the agent with the
/// smallest bundle (ties by priority) among those that still have a growth
/// path from their free goods to an unallocated good, and augments along a
/// shortest such path. Agents without a path are retired for good: later
/// augmentations never make one appear.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrioritizedEgalitarian {
    pub priority: Priority,
    /// Compare against the oracle when it fits in this budget.
    pub cross_check: Option<u128>,
}

impl Default for PrioritizedEgalitarian {
    fn default() -> Self {
        Self::new()
    }
}

impl PrioritizedEgalitarian {
    pub fn new() -> Self {
        Self::with_priority(Priority::Index)
    }

    pub fn with_priority(priority: Priority) -> Self {
        PrioritizedEgalitarian {
            priority,
            cross_check: None,
        }
    }

    pub fn run(&self, inst: &Instance) -> Result<PeRun> {
        let reports = sanitize_reports(inst);
        let ranking = self.priority.ranking(&reports)?;
        let mut rank_of = vec![0; reports.n()];
        for (r, &i) in ranking.iter().enumerate() {
            rank_of[i] = r;
        }

        let mut a = Allocation::empty(reports.n());
        let mut active: Vec<Agent> = ranking.clone();
        let mut rounds = Vec::new();
        loop {
            active.sort_by_key(|&i| (a.bundle(i).len(), rank_of[i]));
            let graph = ExchangeGraph::build_unchecked(&reports, &a);
            let mut served = None;
            let mut retired = Vec::new();
            for &i in &active {
                match growth_path(&reports, &a, &graph, i) {
                    Some(q) => {
                        a = augment_forward(&reports, &a, &q, i, Sink::Unallocated)?;
                        served = Some(i);
                        break;
                    }
                    None => retired.push(i),
                }
            }
            active.retain(|i| !retired.contains(i));
            match served {
                Some(i) => rounds.push(i),
                None => break,
            }
            if rounds.len() > reports.m() {
                return Err(Error::Internal(
                    "more augmentation rounds than goods".into(),
                ));
            }
        }

        let mut run = PeRun {
            allocation: a,
            rounds,
            fell_back: false,
        };
        if let Some(budget) = self.cross_check {
            let oracle = LorenzOracle {
                priority: self.priority.clone(),
                budget,
            };
            match oracle.allocate(&reports) {
                Ok(best) => {
                    if reports.values_unchecked(&best) != reports.values_unchecked(&run.allocation)
                    {
                        run.allocation = best;
                        run.fell_back = true;
                    }
                }
                Err(e) if e.is_capability() => {}
                Err(e) => return Err(e),
            }
        }
        Ok(run)
    }
}

impl Mechanism for PrioritizedEgalitarian {
    fn name(&self) -> String {
        match &self.priority {
            Priority::Index => "pe".into(),
            Priority::Order(order) => format!("pe:{}", join(order)),
            Priority::ReportedRank => "pe-report-priority".into(),
        }
    }

    fn allocate(&self, inst: &Instance) -> Result<Allocation> {
        self.run(inst).map(|r| r.allocation)
    }
}

/// Brute force: among non-wasteful partial allocations whose sorted value
/// vector Lorenz-dominates every other, the one whose value vector, read in
/// priority order, is lexicographically largest. The first in enumeration
/// order wins exact ties.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LorenzOracle {
    pub priority: Priority,
    pub budget: u128,
}

impl Default for LorenzOracle {
    fn default() -> Self {
        LorenzOracle {
            priority: Priority::Index,
            budget: DEFAULT_ORACLE_BUDGET,
        }
    }
}

impl Mechanism for LorenzOracle {
    fn name(&self) -> String {
        match &self.priority {
            Priority::Index => "oracle".into(),
            Priority::Order(order) => format!("oracle:{}", join(order)),
            Priority::ReportedRank => "oracle-report-priority".into(),
        }
    }

    fn allocate(&self, inst: &Instance) -> Result<Allocation> {
        let reports = sanitize_reports(inst);
        let ranking = self.priority.ranking(&reports)?;
        let candidates: Vec<(Allocation, ValueVector)> = reports
            .enumerate_allocations(false, self.budget)?
            .filter(|a| reports.is_non_wasteful_unchecked(a))
            .map(|a| {
                let v = reports.values_unchecked(&a);
                (a, v)
            })
            .collect();
        let sorted: HashSet<ValueVector> = candidates.iter().map(|(_, v)| v.sorted()).collect();
        let dominating: HashSet<&ValueVector> = sorted
            .iter()
            .filter(|s| {
                sorted
                    .iter()
                    .all(|t| s.lorenz_dominates(t).unwrap_or(false))
            })
            .collect();
        if dominating.is_empty() {
            return Err(Error::Internal(
                "no Lorenz-dominating allocation exists".into(),
            ));
        }
        let key = |v: &ValueVector| ranking.iter().map(|&i| v.0[i]).collect::<Vec<_>>();
        let mut best: Option<(&Allocation, Vec<usize>)> = None;
        for (a, v) in &candidates {
            if !dominating.contains(&v.sorted()) {
                continue;
            }
            let k = key(v);
            if best.as_ref().is_none_or(|(_, bk)| k > *bk) {
                best = Some((a, k));
            }
        }
        Ok(best.expect("a dominating candidate exists").0.clone())
    }
}

/// Keeps the greedy maximum independent subset of each bundle, which
/// preserves every agent's value and makes the output non-wasteful.
#[derive(Clone, Debug)]
pub struct Cleanup<M>(pub M);

impl<M: Mechanism> Mechanism for Cleanup<M> {
    fn name(&self) -> String {
        format!("cleanup:{}", self.0.name())
    }

    fn allocate(&self, inst: &Instance) -> Result<Allocation> {
        let a = self.0.allocate(inst)?;
        cleanup_allocation(inst, &a)
    }
}

pub fn cleanup_allocation(inst: &Instance, a: &Allocation) -> Result<Allocation> {
    a.check_for(inst)?;
    let bundles = a
        .bundles
        .iter()
        .zip(inst.valuations())
        .map(|(&b, v)| v.max_independent_subset(b))
        .collect::<Result<Vec<GoodSet>>>()?;
    Ok(Allocation { bundles })
}

/// Agents in `order` each take a greedy maximum independent subset of the
/// goods still available. Agents missing from `order` get nothing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SerialDictatorship {
    pub order: Vec<Agent>,
    /// Per-position cap on how many goods the dictator may take.
    pub quota: Option<Vec<usize>>,
}

impl SerialDictatorship {
    pub fn new(order: Vec<Agent>) -> Self {
        SerialDictatorship { order, quota: None }
    }

    pub fn with_quota(order: Vec<Agent>, quota: Vec<usize>) -> Self {
        SerialDictatorship {
            order,
            quota: Some(quota),
        }
    }
}

impl Mechanism for SerialDictatorship {
    fn name(&self) -> String {
        match &self.quota {
            None => format!("dictator:{}", join(&self.order)),
            Some(q) => format!("dictator:{}/quota:{}", join(&self.order), join(q)),
        }
    }

    fn allocate(&self, inst: &Instance) -> Result<Allocation> {
        let n = inst.n();
        if self.order.iter().any(|&i| i >= n) {
            return Err(Error::Input(format!(
                "dictator order {:?} names a missing agent",
                self.order
            )));
        }
        if let Some(q) = &self.quota {
            if q.len() != self.order.len() {
                return Err(Error::Input("one quota per dictator is required".into()));
            }
        }
        let reports = sanitize_reports(inst);
        let mut a = Allocation::empty(n);
        let mut left = reports.goods();
        for (pos, &i) in self.order.iter().enumerate() {
            if !a.bundle(i).is_empty() {
                continue;
            }
            let cap = self.quota.as_ref().map_or(usize::MAX, |q| q[pos]);
            let v = reports.valuation(i);
            let mut take = GoodSet::EMPTY;
            for g in left.iter() {
                if take.len() < cap && v.is_independent(take.with(g)) {
                    take.insert(g);
                }
            }
            a.bundles[i] = take;
            left = left.difference(take);
        }
        Ok(a)
    }
}

/// Allocates nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct ConstantEmpty;

impl Mechanism for ConstantEmpty {
    fn name(&self) -> String {
        "empty".into()
    }

    fn allocate(&self, inst: &Instance) -> Result<Allocation> {
        Ok(Allocation::empty(inst.n()))
    }
}

/// Every good goes to the agent reporting the largest `v([m])`, lowest
/// index on ties. Over-reporting pays.
#[derive(Clone, Copy, Debug, Default)]
pub struct GiveAllToMaxReport;

impl Mechanism for GiveAllToMaxReport {
    fn name(&self) -> String {
        "give-all-max".into()
    }

    fn allocate(&self, inst: &Instance) -> Result<Allocation> {
        let reports = sanitize_reports(inst);
        let full = reports.goods();
        let winner = (0..reports.n())
            .max_by_key(|&i| (reports.valuation(i).rank(full), std::cmp::Reverse(i)))
            .expect("n >= 1");
        let mut a = Allocation::empty(reports.n());
        a.bundles[winner] = full;
        Ok(a)
    }
}

/// Largest total size among non-wasteful allocations, ties by the
/// lexicographically largest value vector.
#[derive(Clone, Copy, Debug, Default)]
pub struct UtilitarianLex;

impl Mechanism for UtilitarianLex {
    fn name(&self) -> String {
        "utilitarian-lex".into()
    }

    fn allocate(&self, inst: &Instance) -> Result<Allocation> {
        let reports = sanitize_reports(inst);
        let mut best: Option<(Allocation, (usize, ValueVector))> = None;
        for a in reports.enumerate_allocations(false, DEFAULT_ORACLE_BUDGET)? {
            if !reports.is_non_wasteful_unchecked(&a) {
                continue;
            }
            let v = reports.values_unchecked(&a);
            let key = (v.sum(), v);
            if best.as_ref().is_none_or(|(_, k)| key > *k) {
                best = Some((a, key));
            }
        }
        Ok(best.expect("the empty allocation is always a candidate").0)
    }
}

fn join(xs: &[usize]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Input(format!("bad number {t:?} in {s:?}")))
        })
        .collect()
}

/// Names accepted by [`by_name`], for help texts.
pub const MECHANISM_NAMES: &[&str] = &[
    "pe",
    "pe:<order>",
    "pe-rev",
    "pe-report-priority",
    "oracle",
    "dictator:<order>",
    "empty",
    "give-all-max",
    "utilitarian-lex",
    "cleanup:<name>",
];

/// Looks a mechanism up by its CLI name. `<order>` is a comma-separated list
/// of 0-indexed agents.
pub fn by_name(name: &str, n: usize) -> Result<Box<dyn Mechanism>> {
    if let Some(inner) = name.strip_prefix("cleanup:") {
        return Ok(Box::new(Cleanup(by_name(inner, n)?)));
    }
    if let Some(order) = name.strip_prefix("dictator:") {
        return Ok(Box::new(SerialDictatorship::new(parse_list(order)?)));
    }
    if let Some(order) = name.strip_prefix("pe:") {
        return Ok(Box::new(PrioritizedEgalitarian::with_priority(
            Priority::Order(parse_list(order)?),
        )));
    }
    Ok(match name {
        "pe" => Box::new(PrioritizedEgalitarian::new()),
        "pe-rev" => Box::new(PrioritizedEgalitarian::with_priority(Priority::Order(
            (0..n).rev().collect(),
        ))),
        "pe-report-priority" => Box::new(PrioritizedEgalitarian::with_priority(
            Priority::ReportedRank,
        )),
        "oracle" => Box::new(LorenzOracle::default()),
        "dictator" => Box::new(SerialDictatorship::new((0..n).collect())),
        "empty" => Box::new(ConstantEmpty),
        "give-all-max" => Box::new(GiveAllToMaxReport),
        "utilitarian-lex" => Box::new(UtilitarianLex),
        _ => {
            return Err(Error::Input(format!(
                "unknown mechanism {name:?}; expected one of {}",
                MECHANISM_NAMES.join(", ")
            )))
        }
    })
}
