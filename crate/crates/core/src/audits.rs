//! Strategic audits: unilateral and coalition deviation search, the
//! gradualness conditions, relabelling invariance, a replay of the
//! six-good impossibility argument against any mechanism, and a seeded fuzz
//! driver over all of these.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{
    is_locally_efficient, is_mms, mms_profile, mms_verdict, FairnessVerdict, Witness,
};
use crate::fixtures::{
    presets, random_instance, random_permutation, random_subset, random_valuation, KindMix,
};
use crate::goods::{Good, GoodSet, Permutation};
use crate::instances::{Agent, Allocation, Instance, DEFAULT_ENUMERATION_BUDGET};
use crate::matroid::Valuation;
use crate::mechanisms::{cleanup_allocation, Mechanism};

/// A misreport (or joint misreport) under which every member of
/// `coalition` is strictly better off by its true valuation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviationWitness {
    pub coalition: Vec<Agent>,
    pub true_profile: Instance,
    pub misreport_profile: Instance,
    /// Value gained by each coalition member, in coalition order.
    pub gains: Vec<usize>,
}

impl DeviationWitness {
    /// Re-runs `f` on both profiles and confirms the recorded gains.
    pub fn recheck(&self, f: &dyn Mechanism) -> Result<bool> {
        let a = f.allocate(&self.true_profile)?;
        let b = f.allocate(&self.misreport_profile)?;
        let outside_same = (0..self.true_profile.n())
            .filter(|i| !self.coalition.contains(i))
            .all(|i| self.true_profile.valuation(i) == self.misreport_profile.valuation(i));
        Ok(outside_same
            && Some(self.gains.clone())
                == coalition_gains(&self.true_profile, &self.coalition, &a, &b))
    }
}

/// Per-member gain when every member strictly gains, else `None`.
fn coalition_gains(
    truth: &Instance,
    coalition: &[Agent],
    a: &Allocation,
    b: &Allocation,
) -> Option<Vec<usize>> {
    coalition
        .iter()
        .map(|&i| {
            let v = truth.valuation(i);
            let (before, after) = (v.rank(a.bundle(i)), v.rank(b.bundle(i)));
            (after > before).then(|| after - before)
        })
        .collect()
}

/// Which misreports to try, and how many.
///
/// Candidates for an agent come in a fixed order: the zero valuation, every
/// single-good removal, seeded restrictions to random subsets, seeded
/// relabellings, fresh random valuations, and finally (for small ground
/// sets) every matroid rank function on the goods. At most `budget`
/// candidates are produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MisreportSpace {
    pub seed: u64,
    pub budget: usize,
    /// Include the structured and random families.
    pub sampled: bool,
    /// Append every matroid on `[m]` when `m` is at most this.
    pub exhaustive_upto: usize,
}

impl MisreportSpace {
    pub fn seeded(seed: u64, budget: usize) -> Self {
        MisreportSpace {
            seed,
            budget,
            sampled: true,
            exhaustive_upto: 4,
        }
    }

    /// Every matroid rank function on `[m]`, nothing else.
    pub fn exhaustive() -> Self {
        MisreportSpace {
            seed: 0,
            budget: usize::MAX,
            sampled: false,
            exhaustive_upto: 4,
        }
    }

    pub fn candidates(&self, inst: &Instance, i: Agent) -> Result<Vec<Valuation>> {
        let m = inst.m();
        let v = inst.valuation(i);
        let mut out = Vec::new();
        if self.sampled {
            let mut rng = agent_rng(self.seed, i as u64);
            out.push(Valuation::zero(m));
            out.extend((0..m).map(|g| v.without_good(g)));
            out.extend((0..8).map(|_| v.restrict(random_subset(&mut rng, m, 0.6))));
            for _ in 0..4 {
                out.push(v.permute(&random_permutation(&mut rng, m))?);
            }
            out.extend((0..8).map(|_| random_valuation(&mut rng, m, KindMix::Mixed)));
        }
        if m <= self.exhaustive_upto {
            out.extend(enumerate_matroids(m)?);
        }
        out.truncate(self.budget);
        Ok(out)
    }
}

fn agent_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Every matroid rank function on `[m]` for `m ≤ 4`, as explicit tables, in
/// order of the bitmask of their independent-set families.
pub fn enumerate_matroids(m: usize) -> Result<Vec<Valuation>> {
    if m > 4 {
        return Err(Error::Capability {
            what: format!("enumerating all matroids on {m} goods"),
            bound: 4,
        });
    }
    let subsets = 1usize << m;
    let mut out = Vec::new();
    for family in 0u64..(1u64 << subsets) {
        let has = |s: usize| family >> s & 1 == 1;
        if !has(0) {
            continue;
        }
        let members: Vec<usize> = (0..subsets).filter(|&s| has(s)).collect();
        let hereditary = members.iter().all(|&s| {
            (0..m)
                .filter(|g| s >> g & 1 == 1)
                .all(|g| has(s & !(1 << g)))
        });
        if !hereditary {
            continue;
        }
        let augments = members.iter().all(|&small| {
            members.iter().all(|&big| {
                small.count_ones() >= big.count_ones()
                    || (0..m)
                        .any(|g| big >> g & 1 == 1 && small >> g & 1 == 0 && has(small | 1 << g))
            })
        });
        if !augments {
            continue;
        }
        let table = (0..subsets)
            .map(|s| {
                members
                    .iter()
                    .filter(|&&i| i & s == i)
                    .map(|i| i.count_ones())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        out.push(Valuation::explicit(m, table)?);
    }
    Ok(out)
}

/// The first misreport in `space` that raises agent `i`'s true value.
/// Finding nothing is evidence, not proof.
pub fn find_profitable_deviation(
    f: &dyn Mechanism,
    inst: &Instance,
    i: Agent,
    space: &MisreportSpace,
) -> Result<Option<DeviationWitness>> {
    if i >= inst.n() {
        return Err(Error::Input(format!("agent {i} does not exist")));
    }
    let truthful = f.allocate(inst)?;
    let candidates = space.candidates(inst, i)?;
    candidates
        .par_iter()
        .map(|v| -> Result<Option<DeviationWitness>> {
            let lie = inst.with_valuation(i, v.clone())?;
            let b = f.allocate(&lie)?;
            Ok(
                coalition_gains(inst, &[i], &truthful, &b).map(|gains| DeviationWitness {
                    coalition: vec![i],
                    true_profile: inst.clone(),
                    misreport_profile: lie,
                    gains,
                }),
            )
        })
        .find_first(|r| !matches!(r, Ok(None)))
        .unwrap_or(Ok(None))
}

/// All coalitions of size `1..=max_size`, by size and then lexicographically.
pub fn coalitions(n: usize, max_size: usize) -> Vec<Vec<Agent>> {
    fn extend(n: usize, k: usize, start: usize, cur: &mut Vec<Agent>, out: &mut Vec<Vec<Agent>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            extend(n, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for k in 1..=max_size.min(n) {
        extend(n, k, 0, &mut Vec::new(), &mut out);
    }
    out
}

/// Searches coalitions up to `max_coalition` members for a joint misreport
/// that strictly helps every member. Singletons try every candidate; larger
/// coalitions try `space.budget` seeded joint draws.
pub fn find_coalition_deviation(
    f: &dyn Mechanism,
    inst: &Instance,
    max_coalition: usize,
    space: &MisreportSpace,
) -> Result<Option<DeviationWitness>> {
    if max_coalition > inst.n() {
        return Err(Error::Precondition(format!(
            "coalitions of {max_coalition} agents in an instance with {}",
            inst.n()
        )));
    }
    let truthful = f.allocate(inst)?;
    let pools: Vec<Vec<Valuation>> = (0..inst.n())
        .map(|i| space.candidates(inst, i))
        .collect::<Result<_>>()?;
    for (ci, coalition) in coalitions(inst.n(), max_coalition).into_iter().enumerate() {
        if coalition.iter().any(|&i| pools[i].is_empty()) {
            continue;
        }
        let joint: Vec<Vec<&Valuation>> = if coalition.len() == 1 {
            pools[coalition[0]].iter().map(|v| vec![v]).collect()
        } else {
            let mut rng = agent_rng(space.seed, 1 << 32 | ci as u64);
            (0..space.budget)
                .map(|_| {
                    coalition
                        .iter()
                        .map(|&i| pools[i].choose(&mut rng).expect("nonempty"))
                        .collect()
                })
                .collect()
        };
        let found = joint
            .par_iter()
            .map(|reports| -> Result<Option<DeviationWitness>> {
                let mut lie = inst.clone();
                for (&i, v) in coalition.iter().zip(reports) {
                    lie = lie.with_valuation(i, (*v).clone())?;
                }
                let b = f.allocate(&lie)?;
                Ok(
                    coalition_gains(inst, &coalition, &truthful, &b).map(|gains| {
                        DeviationWitness {
                            coalition: coalition.clone(),
                            true_profile: inst.clone(),
                            misreport_profile: lie,
                            gains,
                        }
                    }),
                )
            })
            .find_first(|r| !matches!(r, Ok(None)))
            .unwrap_or(Ok(None))?;
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

/// Runs `f`, replacing a wasteful output by its non-wasteful cleanup.
/// Returns the allocation and whether cleanup changed it.
fn run_non_wasteful(f: &dyn Mechanism, inst: &Instance) -> Result<(Allocation, bool)> {
    let a = f.allocate(inst)?;
    a.check_for(inst).map_err(|e| {
        Error::Input(format!(
            "mechanism {} returned a malformed allocation: {e}",
            f.name()
        ))
    })?;
    if inst.is_non_wasteful(&a)? {
        Ok((a, false))
    } else {
        Ok((cleanup_allocation(inst, &a)?, true))
    }
}

/// Checks the gradualness conditions at this one profile.
///
/// C1 covers every (agent, good) pair. C2 covers every superset of each
/// bundle when there are at most `superset_budget` of them, and a seeded
/// sample of that many otherwise. C1* tries a seeded sample of removed sets.
/// Wasteful outputs are replaced by their non-wasteful cleanup, which the
/// verdict notes.
pub fn check_gradual(
    f: &dyn Mechanism,
    inst: &Instance,
    superset_budget: u128,
    seed: u64,
) -> Result<FairnessVerdict> {
    const NAME: &str = "gradual";
    let m = inst.m();
    let full = inst.goods();
    let mut cleaned = false;
    let mut run = |p: &Instance| -> Result<Allocation> {
        let (a, c) = run_non_wasteful(f, p)?;
        cleaned |= c;
        Ok(a)
    };
    let a = run(inst)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut found = None;
    'search: for i in 0..inst.n() {
        let v = inst.valuation(i);
        let size = a.bundle(i).len();
        let size_after =
            |x: GoodSet, run: &mut dyn FnMut(&Instance) -> Result<Allocation>| -> Result<usize> {
                Ok(run(&inst.with_valuation(i, v.restrict(x))?)?
                    .bundle(i)
                    .len())
            };
        for g in 0..m {
            let x = full.without(g);
            let after = size_after(x, &mut run)?;
            if after > size || size - after > 1 {
                found = Some(("C1", i, x, size, after));
                break 'search;
            }
        }
        let free = full.difference(a.bundle(i));
        let supersets: Vec<GoodSet> = if (1u128 << free.len()) <= superset_budget {
            free.subsets().map(|s| s.union(a.bundle(i))).collect()
        } else {
            let mut xs = vec![a.bundle(i), full];
            xs.extend(
                (0..superset_budget).map(|_| random_subset(&mut rng, m, 0.5).union(a.bundle(i))),
            );
            xs
        };
        for x in supersets {
            let after = size_after(x, &mut run)?;
            if after != size {
                found = Some(("C2", i, x, size, after));
                break 'search;
            }
        }
    }
    if found.is_none() {
        'star: for i in 0..inst.n() {
            let v = inst.valuation(i);
            let size = a.bundle(i).len();
            for _ in 0..2 * m {
                let y = random_subset(&mut rng, m, 0.3);
                let after = run(&inst.with_valuation(i, v.restrict(full.difference(y)))?)?
                    .bundle(i)
                    .len();
                if after > size || size - after > y.len() {
                    found = Some(("C1*", i, full.difference(y), size, after));
                    break 'star;
                }
            }
        }
    }
    let verdict = match found {
        None => FairnessVerdict::pass(NAME),
        Some((condition, agent, restricted_to, before, after)) => FairnessVerdict::fail(
            NAME,
            Witness::Gradual {
                condition: condition.into(),
                agent,
                restricted_to,
                before,
                after,
            },
        ),
    };
    Ok(if cleaned {
        verdict.with_note(format!(
            "{} is wasteful here; audited its non-wasteful cleanup",
            f.name()
        ))
    } else {
        verdict
    })
}

fn permute_instance(inst: &Instance, p: &Permutation) -> Result<Instance> {
    Instance::new(
        inst.m(),
        inst.valuations()
            .iter()
            .map(|v| v.permute(p))
            .collect::<Result<_>>()?,
    )
}

/// Compares each agent's value under `f(v)` and `f(v^π)` for the identity,
/// every transposition when `m ≤ 6`, and `trials` seeded permutations.
pub fn check_index_oblivious(
    f: &dyn Mechanism,
    inst: &Instance,
    trials: usize,
    seed: u64,
) -> Result<FairnessVerdict> {
    const NAME: &str = "index-oblivious";
    let m = inst.m();
    let mut perms = vec![Permutation::identity(m)];
    if m <= 6 {
        for a in 0..m {
            for b in a + 1..m {
                perms.push(Permutation::transposition(m, a, b)?);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perms.extend((0..trials).map(|_| random_permutation(&mut rng, m)));

    let base = inst.values(&f.allocate(inst)?)?;
    let found = perms
        .par_iter()
        .map(|p| -> Result<Option<Witness>> {
            let permuted = permute_instance(inst, p)?;
            let values = permuted.values(&f.allocate(&permuted)?)?;
            Ok((0..inst.n())
                .find(|&i| values.0[i] != base.0[i])
                .map(|agent| Witness::Relabel {
                    permutation: p.clone(),
                    agent,
                    value: base.0[agent],
                    permuted_value: values.0[agent],
                }))
        })
        .find_first(|r| !matches!(r, Ok(None)))
        .unwrap_or(Ok(None))?;
    Ok(match found {
        None => FairnessVerdict::pass(NAME),
        Some(w) => FairnessVerdict::fail(NAME, w),
    })
}

/// Truthfulness and gradualness of `f` over every profile drawn from
/// `universe`, which should be closed under restriction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniverseAudit {
    pub truthful: bool,
    pub gradual: bool,
}

/// Exhaustive version of both audits over `universe^n`: truthfulness tries
/// every universe member as a misreport, gradualness every removed good and
/// every superset of every bundle.
pub fn audit_universe(
    f: &dyn Mechanism,
    universe: &[Valuation],
    n: usize,
) -> Result<UniverseAudit> {
    let Some(first) = universe.first() else {
        return Ok(UniverseAudit {
            truthful: true,
            gradual: true,
        });
    };
    let m = first.m();
    let u = universe.len();
    let count = u
        .checked_pow(n as u32)
        .filter(|&c| c <= 1 << 20)
        .ok_or_else(|| Error::Capability {
            what: format!("{u}^{n} profiles"),
            bound: 1 << 20,
        })?;
    let profile = |mut idx: usize| -> Vec<usize> {
        (0..n)
            .map(|_| {
                let d = idx % u;
                idx /= u;
                d
            })
            .collect()
    };
    let index_of = |digits: &[usize]| digits.iter().rev().fold(0, |acc, &d| acc * u + d);
    let outputs: Vec<Allocation> = (0..count)
        .into_par_iter()
        .map(|k| {
            let inst = Instance::new(m, profile(k).iter().map(|&d| universe[d].clone()).collect())?;
            run_non_wasteful(f, &inst).map(|(a, _)| a)
        })
        .collect::<Result<_>>()?;
    let find = |v: &Valuation| -> Result<usize> {
        for (d, w) in universe.iter().enumerate() {
            if w.same_function(v)? {
                return Ok(d);
            }
        }
        Err(Error::Precondition(
            "universe is not closed under restriction".into(),
        ))
    };
    // restriction of member d to X, memoised per (d, X)
    let mut restricted = vec![vec![usize::MAX; 1 << m]; u];
    for (d, v) in universe.iter().enumerate() {
        for x in GoodSet::full(m).subsets() {
            restricted[d][x.bits() as usize] = find(&v.restrict(x))?;
        }
    }

    let mut truthful = true;
    let mut gradual = true;
    for k in 0..count {
        let digits = profile(k);
        let a = &outputs[k];
        for i in 0..n {
            let v = &universe[digits[i]];
            let own = v.rank(a.bundle(i));
            let mut swapped = digits.clone();
            if truthful {
                for d in 0..u {
                    swapped[i] = d;
                    if v.rank(outputs[index_of(&swapped)].bundle(i)) > own {
                        truthful = false;
                        break;
                    }
                }
            }
            if gradual {
                let size = a.bundle(i).len();
                let size_at = |x: GoodSet, swapped: &mut Vec<usize>| {
                    swapped[i] = restricted[digits[i]][x.bits() as usize];
                    outputs[index_of(swapped)].bundle(i).len()
                };
                let full = GoodSet::full(m);
                let c1 = (0..m).all(|g| {
                    let after = size_at(full.without(g), &mut swapped);
                    after <= size && size - after <= 1
                });
                let c2 = full
                    .difference(a.bundle(i))
                    .subsets()
                    .all(|s| size_at(s.union(a.bundle(i)), &mut swapped) == size);
                gradual = c1 && c2;
            }
        }
        if !truthful && !gradual {
            break;
        }
    }
    Ok(UniverseAudit { truthful, gradual })
}

/// What the impossibility replay found wrong, with enough data to re-check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExecutorWitness {
    Deviation(DeviationWitness),
    Property {
        step: usize,
        profile: Instance,
        allocation: Allocation,
        detail: Witness,
    },
    Chain {
        step: usize,
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutorStep {
    pub label: String,
    pub profile: Instance,
    pub allocation: Allocation,
    pub checks: Vec<FairnessVerdict>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutorReport {
    pub mechanism: String,
    pub steps: Vec<ExecutorStep>,
    pub violated: String,
    pub witness: ExecutorWitness,
}

pub const CHAIN_BROKEN: &str = "precondition chain broken";

impl ExecutorReport {
    /// Re-runs `f` and the relevant auditor on the recorded witness.
    pub fn recheck(&self, f: &dyn Mechanism) -> Result<bool> {
        match &self.witness {
            ExecutorWitness::Deviation(w) => w.recheck(f),
            ExecutorWitness::Chain { .. } => Ok(false),
            ExecutorWitness::Property {
                profile,
                allocation,
                detail,
                ..
            } => {
                let (again, _) = run_non_wasteful(f, profile)?;
                if &again != allocation {
                    return Ok(false);
                }
                Ok(match detail {
                    Witness::Share { .. } => {
                        let v = is_mms(profile, allocation, DEFAULT_ENUMERATION_BUDGET)?;
                        !v.holds && v.witness.as_ref() == Some(detail)
                    }
                    Witness::LocalGain { agent, good } => {
                        let v = profile.valuation(*agent);
                        let b = allocation.bundle(*agent);
                        allocation.owner(*good).is_none() && v.rank(b.with(*good)) > v.rank(b)
                    }
                    Witness::Relabel {
                        permutation,
                        agent,
                        value,
                        permuted_value,
                    } => {
                        let permuted = permute_instance(profile, permutation)?;
                        let (b, _) = run_non_wasteful(f, &permuted)?;
                        let before = profile.valuation(*agent).rank(allocation.bundle(*agent));
                        let after = permuted.valuation(*agent).rank(b.bundle(*agent));
                        before == *value && after == *permuted_value && before != after
                    }
                    _ => false,
                })
            }
        }
    }
}

/// Replays the six-good impossibility argument against `f`.
///
/// The argument assumes `f` is truthful, index-oblivious, locally efficient
/// and maximin fair, and derives a profitable misreport. Each step checks the
/// property it relies on; the first that fails is reported with a witness.
/// If every property holds, the final step exhibits the misreport itself.
/// Wasteful outputs are replaced by their non-wasteful cleanup throughout,
/// which leaves every value unchanged.
pub fn run_impossibility_executor(f: &dyn Mechanism) -> Result<ExecutorReport> {
    Executor {
        f,
        steps: Vec::new(),
    }
    .run()
}

struct Executor<'a> {
    f: &'a dyn Mechanism,
    steps: Vec<ExecutorStep>,
}

enum Outcome {
    Violated(&'static str, ExecutorWitness),
    Continue,
}

impl Executor<'_> {
    fn report(self, violated: &str, witness: ExecutorWitness) -> ExecutorReport {
        ExecutorReport {
            mechanism: self.f.name(),
            steps: self.steps,
            violated: violated.into(),
            witness,
        }
    }

    fn chain(self, reason: impl Into<String>) -> ExecutorReport {
        let step = self.steps.len().saturating_sub(1);
        self.report(
            CHAIN_BROKEN,
            ExecutorWitness::Chain {
                step,
                reason: reason.into(),
            },
        )
    }

    /// Runs `f`, records the step with its non-wastefulness and MMS checks,
    /// and reports an MMS failure.
    fn step(&mut self, label: &str, profile: Instance) -> Result<(Allocation, Outcome)> {
        let (a, cleaned) = run_non_wasteful(self.f, &profile)?;
        let mut nw = FairnessVerdict::pass("non-wasteful");
        if cleaned {
            nw = nw.with_note("output was wasteful; replaced by its non-wasteful cleanup");
        }
        let mms = mms_verdict(
            &profile,
            &a,
            &mms_profile(&profile, DEFAULT_ENUMERATION_BUDGET)?,
        );
        let outcome = match &mms.witness {
            Some(detail) => Outcome::Violated(
                "MMS",
                ExecutorWitness::Property {
                    step: self.steps.len(),
                    profile: profile.clone(),
                    allocation: a.clone(),
                    detail: detail.clone(),
                },
            ),
            None => Outcome::Continue,
        };
        self.steps.push(ExecutorStep {
            label: label.into(),
            profile,
            allocation: a.clone(),
            checks: vec![nw, mms],
        });
        Ok((a, outcome))
    }

    fn run(mut self) -> Result<ExecutorReport> {
        let m = 6;
        let g_set = GoodSet::from([0, 1]);
        let base = presets::six_good_profile();
        let additive = |s: GoodSet| Valuation::additive(m, s).expect("goods within 6");

        // step 1: the original profile
        let (a, out) = self.step("f(v1, v2)", base.clone())?;
        if let Outcome::Violated(p, w) = out {
            return Ok(self.report(p, w));
        }
        let (a1, a2) = (a.bundle(0), a.bundle(1));
        if a1.len() != 1
            || !a1.is_subset(g_set)
            || a2.len() != 3
            || a2.intersection(g_set).len() != 1
        {
            return Ok(self.chain(format!(
                "expected bundles {{a}} and {{b, c, d}}, got {a1} and {a2}"
            )));
        }
        let ga = a1.first().expect("one good");
        let gb = a2.intersection(g_set).first().expect("one good");
        let rest: Vec<Good> = a2.difference(g_set).iter().collect();
        let (gc, gd) = (rest[0], rest[1]);
        let bcd = GoodSet::from([gb, gc, gd]);
        let w2 = additive(bcd);
        let w1 = |x: Good| additive(GoodSet::from([ga, x]));
        debug_assert!(base
            .valuation(1)
            .restrict(a2)
            .same_function(&w2)
            .unwrap_or(false));

        // claim 1: restricting agent 2's report to its own bundle changes nothing
        let wb = Instance::new(m, vec![base.valuation(0).clone(), w2.clone()])?;
        let (b, out) = self.step("f(v1, w2)", wb.clone())?;
        if b.bundle(1).len() < 3 {
            let gains = vec![3 - b.bundle(1).len()];
            return Ok(self.report(
                "truthfulness",
                ExecutorWitness::Deviation(DeviationWitness {
                    coalition: vec![1],
                    true_profile: wb,
                    misreport_profile: base,
                    gains,
                }),
            ));
        }
        if let Outcome::Violated(p, w) = out {
            return Ok(self.report(p, w));
        }
        if b != a {
            return Ok(self.chain("f(v1, w2) differs from f(v1, v2)"));
        }

        // claims 2 and 3: swapping b with c or d relabels w^b into w^c, w^d
        for x in [gc, gd] {
            let pi = Permutation::transposition(m, gb, x)?;
            let swapped = permute_instance(&wb, &pi)?;
            debug_assert!(swapped.valuation(0).same_function(&w1(x)).unwrap_or(false));
            debug_assert!(swapped.valuation(1).same_function(&w2).unwrap_or(false));
            let label = format!("f(w^{x}) as f((w^b)^π) with π = ({gb} {x})");
            let (c, out) = self.step(&label, swapped.clone())?;
            let before = wb.values(&b)?;
            let after = swapped.values(&c)?;
            if let Some(agent) = (0..2).find(|&i| before.0[i] != after.0[i]) {
                let step = self.steps.len() - 1;
                self.steps[step].checks.push(FairnessVerdict::fail(
                    "index-oblivious",
                    Witness::Relabel {
                        permutation: pi.clone(),
                        agent,
                        value: before.0[agent],
                        permuted_value: after.0[agent],
                    },
                ));
                return Ok(self.report(
                    "index-obliviousness",
                    ExecutorWitness::Property {
                        step: 1,
                        profile: wb,
                        allocation: b,
                        detail: Witness::Relabel {
                            permutation: pi,
                            agent,
                            value: before.0[agent],
                            permuted_value: after.0[agent],
                        },
                    },
                ));
            }
            let step = self.steps.len() - 1;
            self.steps[step]
                .checks
                .push(FairnessVerdict::pass("index-oblivious"));
            if let Outcome::Violated(p, w) = out {
                return Ok(self.report(p, w));
            }
            if c != a {
                return Ok(self.chain(format!("f(w^{x}) differs from f(v1, v2)")));
            }
        }

        // step 3: agent 1 reports w*_1 = |S ∩ {a, b, c, d}|
        let star = Instance::new(m, vec![additive(bcd.with(ga)), w2.clone()])?;
        let (s, out) = self.step("f(w*_1, w2)", star.clone())?;
        if let Outcome::Violated(p, w) = out {
            return Ok(self.report(p, w));
        }
        let step = self.steps.len() - 1;
        if !s.bundle(0).contains(ga) {
            let detail = Witness::LocalGain { agent: 0, good: ga };
            let le = is_locally_efficient(&star, &s)?;
            self.steps[step]
                .checks
                .push(FairnessVerdict::fail("local-efficiency", detail.clone()));
            if le.holds || s.owner(ga).is_some() {
                return Ok(self.chain(format!(
                    "good {ga} is held by agent 2, who does not value it"
                )));
            }
            return Ok(self.report(
                "local-efficiency",
                ExecutorWitness::Property {
                    step,
                    profile: star,
                    allocation: s,
                    detail,
                },
            ));
        }
        self.steps[step]
            .checks
            .push(FairnessVerdict::pass("local-efficiency"));
        let Some(y) = s.bundle(0).intersection(bcd).first() else {
            return Ok(self.chain("agent 1's bundle holds no good of {b, c, d}"));
        };

        // step 4: with true valuation w^y_1, reporting w*_1 pays
        let truth = Instance::new(m, vec![w1(y), w2])?;
        let (d, _) = self.step(&format!("f(w^{y})"), truth.clone())?;
        let (honest, lying) = (
            truth.valuation(0).rank(d.bundle(0)),
            truth.valuation(0).rank(s.bundle(0)),
        );
        if lying <= honest {
            return Ok(self.chain(format!(
                "reporting w*_1 gives {lying}, truth gives {honest}"
            )));
        }
        let misreport = truth.with_valuation(0, star.valuation(0).clone())?;
        Ok(self.report(
            "truthfulness",
            ExecutorWitness::Deviation(DeviationWitness {
                coalition: vec![0],
                true_profile: truth,
                misreport_profile: misreport,
                gains: vec![lying - honest],
            }),
        ))
    }
}

/// Settings for [`fuzz`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuzzConfig {
    pub trials: usize,
    pub seed: u64,
    pub max_coalition: usize,
    pub m_range: (usize, usize),
    pub n_range: (usize, usize),
    /// Misreport candidates per agent, and joint draws per coalition.
    pub draws: usize,
    /// Random relabellings per trial, on top of all transpositions.
    pub permutations: usize,
    pub superset_budget: u128,
    /// Which suites to run.
    pub suites: FuzzSuites,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FuzzSuites {
    pub deviation: bool,
    pub index_oblivious: bool,
    pub gradual: bool,
}

impl FuzzSuites {
    pub const ALL: FuzzSuites = FuzzSuites {
        deviation: true,
        index_oblivious: true,
        gradual: true,
    };
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            trials: 1000,
            seed: 0,
            max_coalition: 3,
            m_range: (0, 6),
            n_range: (1, 4),
            draws: 24,
            permutations: 4,
            superset_budget: 64,
            suites: FuzzSuites::ALL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzFinding {
    pub trial: usize,
    pub check: String,
    pub instance: Instance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation: Option<DeviationWitness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<FairnessVerdict>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub mechanism: String,
    pub trials: usize,
    pub seed: u64,
    pub finding: Option<FuzzFinding>,
}

/// The instance drawn for `trial`; the same for every mechanism.
pub fn fuzz_instance(cfg: &FuzzConfig, trial: usize) -> Instance {
    let mut rng = agent_rng(cfg.seed, trial as u64);
    random_instance(&mut rng, cfg.m_range, cfg.n_range, KindMix::Mixed)
}

/// Runs the enabled suites on `cfg.trials` seeded instances in parallel.
/// The finding with the lowest trial index is reported.
pub fn fuzz(f: &dyn Mechanism, cfg: &FuzzConfig) -> Result<FuzzReport> {
    let finding = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| fuzz_trial(f, cfg, trial))
        .find_first(|r| !matches!(r, Ok(None)))
        .unwrap_or(Ok(None))?;
    Ok(FuzzReport {
        mechanism: f.name(),
        trials: cfg.trials,
        seed: cfg.seed,
        finding,
    })
}

fn fuzz_trial(f: &dyn Mechanism, cfg: &FuzzConfig, trial: usize) -> Result<Option<FuzzFinding>> {
    let inst = fuzz_instance(cfg, trial);
    let sub_seed = agent_rng(cfg.seed, trial as u64).gen::<u64>();
    let finding = |check: &str, deviation, verdict| FuzzFinding {
        trial,
        check: check.into(),
        instance: inst.clone(),
        deviation,
        verdict,
    };
    if cfg.suites.deviation {
        let space = MisreportSpace {
            seed: sub_seed,
            budget: cfg.draws,
            sampled: true,
            exhaustive_upto: 0,
        };
        let k = cfg.max_coalition.min(inst.n());
        if let Some(w) = find_coalition_deviation(f, &inst, k, &space)? {
            let check = if w.coalition.len() == 1 {
                "truthfulness"
            } else {
                "group-strategyproofness"
            };
            return Ok(Some(finding(check, Some(w), None)));
        }
    }
    if cfg.suites.index_oblivious {
        let v = check_index_oblivious(f, &inst, cfg.permutations, sub_seed)?;
        if !v.holds {
            return Ok(Some(finding("index-obliviousness", None, Some(v))));
        }
    }
    if cfg.suites.gradual {
        let v = check_gradual(f, &inst, cfg.superset_budget, sub_seed)?;
        if !v.holds {
            return Ok(Some(finding("gradualness", None, Some(v))));
        }
    }
    Ok(None)
}
