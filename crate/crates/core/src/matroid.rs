//! Valuation oracles.
//!
//! Every agent values bundles through a [`Valuation`]: the rank function of a
//! matroid given in one of a few structured forms, an explicit rank table, or
//! a binary XOS function `v(S) = max_F |F ∩ S|`. Valuations are immutable and
//! every query is a pure function of the set it is asked about.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goods::{Good, GoodSet, Permutation, MAX_GOODS};

/// Largest ground set for an explicit rank table.
pub const MAX_EXPLICIT_GOODS: usize = 16;

/// Ground sets up to this size are certified exhaustively by default.
pub const DEFAULT_EXHAUSTIVE_LIMIT: usize = MAX_EXPLICIT_GOODS;

/// One block of a partition matroid: at most `cap` goods from `goods` count.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Part {
    pub goods: GoodSet,
    pub cap: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ValuationKind {
    /// `min(cap, |S ∩ ground|)`
    Uniform {
        ground: GoodSet,
        cap: usize,
    },
    /// Sum over pairwise-disjoint parts of `min(cap, |S ∩ part|)`.
    Partition {
        parts: Vec<Part>,
    },
    /// Cycle matroid: `edge_of_good[g]` is the edge that good `g` stands for.
    /// Goods without an edge never add value.
    Graphic {
        vertices: usize,
        edge_of_good: Vec<Option<(usize, usize)>>,
    },
    /// Full table indexed by subset bitmask.
    Explicit {
        table: Vec<u32>,
    },
    BinaryXos {
        family: Vec<GoodSet>,
    },
    Zero,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ValuationRepr", into = "ValuationRepr")]
pub struct Valuation {
    m: usize,
    kind: ValuationKind,
}

impl Valuation {
    pub fn zero(m: usize) -> Self {
        assert!(m <= MAX_GOODS, "at most {MAX_GOODS} goods are supported");
        Valuation {
            m,
            kind: ValuationKind::Zero,
        }
    }

    pub fn uniform(m: usize, ground: GoodSet, cap: usize) -> Result<Self> {
        check_ground(m)?;
        check_within(ground, m)?;
        Ok(Valuation {
            m,
            kind: ValuationKind::Uniform { ground, cap },
        })
    }

    /// `|S ∩ goods|`, the free matroid on `goods`.
    pub fn additive(m: usize, goods: GoodSet) -> Result<Self> {
        Valuation::uniform(m, goods, goods.len())
    }

    pub fn partition(m: usize, parts: Vec<(GoodSet, usize)>) -> Result<Self> {
        check_ground(m)?;
        let mut seen = GoodSet::EMPTY;
        let mut out = Vec::with_capacity(parts.len());
        for (goods, cap) in parts {
            check_within(goods, m)?;
            if !goods.is_disjoint(seen) {
                return Err(Error::Input(format!(
                    "partition parts overlap on goods {}",
                    goods.intersection(seen)
                )));
            }
            seen = seen.union(goods);
            out.push(Part { goods, cap });
        }
        Ok(Valuation {
            m,
            kind: ValuationKind::Partition { parts: out },
        })
    }

    /// Cycle matroid of a multigraph on `vertices` vertices. Each listed good
    /// is one edge; unlisted goods are worthless.
    pub fn graphic(m: usize, vertices: usize, edges: Vec<(Good, (usize, usize))>) -> Result<Self> {
        check_ground(m)?;
        let mut edge_of_good = vec![None; m];
        for (g, (u, w)) in edges {
            if g >= m {
                return Err(Error::Input(format!(
                    "good {g} is outside the ground set [0, {m})"
                )));
            }
            if u >= vertices || w >= vertices {
                return Err(Error::Input(format!(
                    "edge ({u}, {w}) of good {g} uses a vertex outside [0, {vertices})"
                )));
            }
            if edge_of_good[g].is_some() {
                return Err(Error::Input(format!("good {g} is assigned two edges")));
            }
            edge_of_good[g] = Some((u, w));
        }
        Ok(Valuation {
            m,
            kind: ValuationKind::Graphic {
                vertices,
                edge_of_good,
            },
        })
    }

    /// Explicit table, `table[S.bits()] = v(S)`. Values are not validated here;
    /// see [`Valuation::validate_matroid_rank`].
    pub fn explicit(m: usize, table: Vec<u32>) -> Result<Self> {
        if m > MAX_EXPLICIT_GOODS {
            return Err(Error::Capability {
                what: format!("explicit rank table over {m} goods"),
                bound: MAX_EXPLICIT_GOODS as u128,
            });
        }
        if table.len() != 1usize << m {
            return Err(Error::Input(format!(
                "explicit table for m = {m} needs {} entries, got {}",
                1usize << m,
                table.len()
            )));
        }
        Ok(Valuation {
            m,
            kind: ValuationKind::Explicit { table },
        })
    }

    pub fn binary_xos(m: usize, family: Vec<GoodSet>) -> Result<Self> {
        check_ground(m)?;
        for &f in &family {
            check_within(f, m)?;
        }
        Ok(Valuation {
            m,
            kind: ValuationKind::BinaryXos { family },
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> &ValuationKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ValuationKind::Uniform { .. } => "uniform",
            ValuationKind::Partition { .. } => "partition",
            ValuationKind::Graphic { .. } => "graphic",
            ValuationKind::Explicit { .. } => "explicit",
            ValuationKind::BinaryXos { .. } => "binary_xos",
            ValuationKind::Zero => "zero",
        }
    }

    /// Everything but binary XOS is (meant to be) a matroid rank function.
    pub fn is_matroid_kind(&self) -> bool {
        !matches!(self.kind, ValuationKind::BinaryXos { .. })
    }

    pub fn ground(&self) -> GoodSet {
        GoodSet::full(self.m)
    }

    /// `v(S)`. `S` must lie inside `[m]`; use [`Valuation::checked_rank`] on
    /// untrusted input.
    pub fn rank(&self, s: GoodSet) -> usize {
        debug_assert!(
            s.is_subset(self.ground()),
            "{s} is not inside [0, {})",
            self.m
        );
        match &self.kind {
            ValuationKind::Uniform { ground, cap } => s.intersection(*ground).len().min(*cap),
            ValuationKind::Partition { parts } => parts
                .iter()
                .map(|p| s.intersection(p.goods).len().min(p.cap))
                .sum(),
            ValuationKind::Graphic {
                vertices,
                edge_of_good,
            } => forest_size(*vertices, s.iter().filter_map(|g| edge_of_good[g])),
            ValuationKind::Explicit { table } => table[s.bits() as usize] as usize,
            ValuationKind::BinaryXos { family } => family
                .iter()
                .map(|f| f.intersection(s).len())
                .max()
                .unwrap_or(0),
            ValuationKind::Zero => 0,
        }
    }

    pub fn checked_rank(&self, s: GoodSet) -> Result<usize> {
        check_within(s, self.m)?;
        Ok(self.rank(s))
    }

    /// `v(S) = |S|`.
    pub fn is_independent(&self, s: GoodSet) -> bool {
        self.rank(s) == s.len()
    }

    pub fn checked_is_independent(&self, s: GoodSet) -> Result<bool> {
        check_within(s, self.m)?;
        Ok(self.is_independent(s))
    }

    /// Goods outside the independent set `x` that keep it independent.
    pub fn free_goods(&self, x: GoodSet) -> Result<GoodSet> {
        self.require_matroid("free_goods")?;
        check_within(x, self.m)?;
        if !self.is_independent(x) {
            return Err(Error::Precondition(format!("{x} is not independent")));
        }
        Ok(self.free_goods_unchecked(x))
    }

    pub(crate) fn free_goods_unchecked(&self, x: GoodSet) -> GoodSet {
        let base = x.len();
        self.ground()
            .difference(x)
            .iter()
            .filter(|&g| self.rank(x.with(g)) == base + 1)
            .collect()
    }

    /// Greedy basis of `s`, scanning goods in ascending id order.
    pub fn max_independent_subset(&self, s: GoodSet) -> Result<GoodSet> {
        self.require_matroid("max_independent_subset")?;
        check_within(s, self.m)?;
        Ok(self.greedy_basis(s))
    }

    pub(crate) fn greedy_basis(&self, s: GoodSet) -> GoodSet {
        let mut basis = GoodSet::EMPTY;
        for g in s.iter() {
            let grown = basis.with(g);
            if self.rank(grown) == grown.len() {
                basis = grown;
            }
        }
        basis
    }

    /// Certifies that `self` is a matroid rank function.
    ///
    /// Structured kinds hold by construction. Explicit tables are checked
    /// exhaustively for normalization, binary marginals and (local)
    /// submodularity when `m <= exhaustive_limit`. Binary XOS is rejected.
    pub fn validate_matroid_rank(&self, exhaustive_limit: usize) -> Result<bool> {
        match &self.kind {
            ValuationKind::Uniform { .. }
            | ValuationKind::Partition { .. }
            | ValuationKind::Graphic { .. }
            | ValuationKind::Zero => Ok(true),
            ValuationKind::BinaryXos { .. } => Ok(false),
            ValuationKind::Explicit { table } => {
                if self.m > exhaustive_limit {
                    return Err(Error::Capability {
                        what: format!(
                            "exhaustive certification of an explicit table over {} goods",
                            self.m
                        ),
                        bound: exhaustive_limit as u128,
                    });
                }
                Ok(table_is_matroid_rank(self.m, table))
            }
        }
    }

    /// `v^X(S) = v(S ∩ X)`, keeping the structured kind where there is one.
    pub fn restrict(&self, x: GoodSet) -> Valuation {
        let x = x.intersection(self.ground());
        if x.is_empty() {
            return Valuation::zero(self.m);
        }
        let kind = match &self.kind {
            ValuationKind::Uniform { ground, cap } => ValuationKind::Uniform {
                ground: ground.intersection(x),
                cap: *cap,
            },
            ValuationKind::Partition { parts } => ValuationKind::Partition {
                parts: parts
                    .iter()
                    .map(|p| Part {
                        goods: p.goods.intersection(x),
                        cap: p.cap,
                    })
                    .collect(),
            },
            ValuationKind::Graphic {
                vertices,
                edge_of_good,
            } => ValuationKind::Graphic {
                vertices: *vertices,
                edge_of_good: edge_of_good
                    .iter()
                    .enumerate()
                    .map(|(g, e)| if x.contains(g) { *e } else { None })
                    .collect(),
            },
            ValuationKind::Explicit { table } => ValuationKind::Explicit {
                table: (0..table.len())
                    .map(|s| table[s & x.bits() as usize])
                    .collect(),
            },
            ValuationKind::BinaryXos { family } => ValuationKind::BinaryXos {
                family: family.iter().map(|f| f.intersection(x)).collect(),
            },
            ValuationKind::Zero => ValuationKind::Zero,
        };
        Valuation { m: self.m, kind }
    }

    /// `v^{-g}`: good `g` removed from consideration.
    pub fn without_good(&self, g: Good) -> Valuation {
        self.restrict(self.ground().without(g))
    }

    /// `v^π(S) = v(π^{-1}(S))`.
    pub fn permute(&self, p: &Permutation) -> Result<Valuation> {
        if p.len() != self.m {
            return Err(Error::Input(format!(
                "permutation over {} goods applied to a valuation over {}",
                p.len(),
                self.m
            )));
        }
        let kind = match &self.kind {
            ValuationKind::Uniform { ground, cap } => ValuationKind::Uniform {
                ground: p.image(*ground),
                cap: *cap,
            },
            ValuationKind::Partition { parts } => ValuationKind::Partition {
                parts: parts
                    .iter()
                    .map(|part| Part {
                        goods: p.image(part.goods),
                        cap: part.cap,
                    })
                    .collect(),
            },
            ValuationKind::Graphic {
                vertices,
                edge_of_good,
            } => ValuationKind::Graphic {
                vertices: *vertices,
                edge_of_good: (0..self.m)
                    .map(|g| edge_of_good[p.apply_inverse(g)])
                    .collect(),
            },
            ValuationKind::Explicit { table } => ValuationKind::Explicit {
                table: (0..table.len())
                    .map(|s| table[p.preimage(GoodSet::from_bits(s as u64)).bits() as usize])
                    .collect(),
            },
            ValuationKind::BinaryXos { family } => ValuationKind::BinaryXos {
                family: family.iter().map(|&f| p.image(f)).collect(),
            },
            ValuationKind::Zero => ValuationKind::Zero,
        };
        Ok(Valuation { m: self.m, kind })
    }

    /// The same function as an explicit table.
    pub fn to_explicit(&self) -> Result<Valuation> {
        if self.m > MAX_EXPLICIT_GOODS {
            return Err(Error::Capability {
                what: format!("explicit rank table over {} goods", self.m),
                bound: MAX_EXPLICIT_GOODS as u128,
            });
        }
        let table = self
            .ground()
            .subsets()
            .map(|s| self.rank(s) as u32)
            .collect();
        Valuation::explicit(self.m, table)
    }

    /// Pointwise equality over all `2^m` subsets.
    pub fn same_function(&self, other: &Valuation) -> Result<bool> {
        if self.m != other.m {
            return Ok(false);
        }
        if self.m > 24 {
            return Err(Error::Capability {
                what: format!("pointwise comparison over {} goods", self.m),
                bound: 24,
            });
        }
        Ok(self
            .ground()
            .subsets()
            .all(|s| self.rank(s) == other.rank(s)))
    }

    fn require_matroid(&self, op: &str) -> Result<()> {
        if self.is_matroid_kind() {
            Ok(())
        } else {
            Err(Error::UnsupportedKind(format!(
                "{op} needs a matroid rank valuation, got {}",
                self.kind_name()
            )))
        }
    }
}

fn check_ground(m: usize) -> Result<()> {
    if m > MAX_GOODS {
        Err(Error::Capability {
            what: format!("ground set of {m} goods"),
            bound: MAX_GOODS as u128,
        })
    } else {
        Ok(())
    }
}

fn check_within(s: GoodSet, m: usize) -> Result<()> {
    if s.is_subset(GoodSet::full(m)) {
        Ok(())
    } else {
        Err(Error::Input(format!(
            "goods {} are outside the ground set [0, {m})",
            s.difference(GoodSet::full(m))
        )))
    }
}

/// Size of a spanning forest of the given edges.
fn forest_size(vertices: usize, edges: impl Iterator<Item = (usize, usize)>) -> usize {
    let mut parent: Vec<usize> = (0..vertices).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut size = 0;
    for (u, w) in edges {
        let (ru, rw) = (find(&mut parent, u), find(&mut parent, w));
        if ru != rw {
            parent[ru] = rw;
            size += 1;
        }
    }
    size
}

fn table_is_matroid_rank(m: usize, table: &[u32]) -> bool {
    if table[0] != 0 {
        return false;
    }
    let full = 1usize << m;
    for s in 0..full {
        for g in 0..m {
            let bg = 1usize << g;
            if s & bg != 0 {
                continue;
            }
            let gain = table[s | bg] as i64 - table[s] as i64;
            if !(0..=1).contains(&gain) {
                return false;
            }
            // local submodularity: r(S+g) + r(S+h) >= r(S+g+h) + r(S)
            for h in (g + 1)..m {
                let bh = 1usize << h;
                if s & bh != 0 {
                    continue;
                }
                if table[s | bg] + table[s | bh] < table[s | bg | bh] + table[s] {
                    return false;
                }
            }
        }
    }
    true
}

#[derive(Serialize, Deserialize)]
struct PartRepr {
    goods: GoodSet,
    cap: usize,
}

#[derive(Serialize, Deserialize)]
struct EdgeRepr {
    good: Good,
    ends: [usize; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ValuationRepr {
    Uniform {
        m: usize,
        ground: GoodSet,
        cap: usize,
    },
    Partition {
        m: usize,
        parts: Vec<PartRepr>,
    },
    Graphic {
        m: usize,
        vertices: usize,
        edges: Vec<EdgeRepr>,
    },
    Explicit {
        m: usize,
        table: Vec<u32>,
    },
    BinaryXos {
        m: usize,
        family: Vec<GoodSet>,
    },
    Zero {
        m: usize,
    },
}

impl TryFrom<ValuationRepr> for Valuation {
    type Error = Error;

    fn try_from(repr: ValuationRepr) -> Result<Self> {
        match repr {
            ValuationRepr::Uniform { m, ground, cap } => Valuation::uniform(m, ground, cap),
            ValuationRepr::Partition { m, parts } => {
                Valuation::partition(m, parts.into_iter().map(|p| (p.goods, p.cap)).collect())
            }
            ValuationRepr::Graphic { m, vertices, edges } => Valuation::graphic(
                m,
                vertices,
                edges
                    .into_iter()
                    .map(|e| (e.good, (e.ends[0], e.ends[1])))
                    .collect(),
            ),
            ValuationRepr::Explicit { m, table } => Valuation::explicit(m, table),
            ValuationRepr::BinaryXos { m, family } => Valuation::binary_xos(m, family),
            ValuationRepr::Zero { m } => {
                check_ground(m)?;
                Ok(Valuation::zero(m))
            }
        }
    }
}

impl From<Valuation> for ValuationRepr {
    fn from(v: Valuation) -> Self {
        let m = v.m;
        match v.kind {
            ValuationKind::Uniform { ground, cap } => ValuationRepr::Uniform { m, ground, cap },
            ValuationKind::Partition { parts } => ValuationRepr::Partition {
                m,
                parts: parts
                    .into_iter()
                    .map(|p| PartRepr {
                        goods: p.goods,
                        cap: p.cap,
                    })
                    .collect(),
            },
            ValuationKind::Graphic {
                vertices,
                edge_of_good,
            } => ValuationRepr::Graphic {
                m,
                vertices,
                edges: edge_of_good
                    .into_iter()
                    .enumerate()
                    .filter_map(|(good, e)| e.map(|(u, w)| EdgeRepr { good, ends: [u, w] }))
                    .collect(),
            },
            ValuationKind::Explicit { table } => ValuationRepr::Explicit { m, table },
            ValuationKind::BinaryXos { family } => ValuationRepr::BinaryXos { m, family },
            ValuationKind::Zero => ValuationRepr::Zero { m },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Goods g1..g6 of the six-good construction are ids 0..5, G = {0, 1}.
    fn v2_two_tier() -> Valuation {
        Valuation::partition(
            6,
            vec![(GoodSet::from([0, 1]), 1), (GoodSet::from([2, 3, 4, 5]), 2)],
        )
        .unwrap()
    }

    fn triangle() -> Valuation {
        Valuation::graphic(3, 3, vec![(0, (0, 1)), (1, (1, 2)), (2, (0, 2))]).unwrap()
    }

    /// Rank by enumerating forests. An edge set is a forest iff every
    /// nonempty subset of it touches more vertices than it has edges.
    fn brute_force_graphic_rank(edges: &[(usize, usize)], s: GoodSet) -> usize {
        let is_forest = |f: GoodSet| {
            f.subsets().skip(1).all(|sub| {
                let touched: GoodSet = sub.iter().flat_map(|g| [edges[g].0, edges[g].1]).collect();
                sub.len() < touched.len()
            })
        };
        s.subsets()
            .filter(|&f| is_forest(f))
            .map(GoodSet::len)
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn rank_of_two_tier_partition() {
        assert_eq!(v2_two_tier().rank(GoodSet::from([0, 2, 3])), 3);
        assert_eq!(v2_two_tier().rank(GoodSet::EMPTY), 0);
    }

    #[test]
    fn triangle_rank_matches_forest_enumeration() {
        let edges = [(0, 1), (1, 2), (0, 2)];
        let v = triangle();
        for s in GoodSet::full(3).subsets() {
            assert_eq!(v.rank(s), brute_force_graphic_rank(&edges, s), "S = {s}");
        }
        assert_eq!(v.rank(GoodSet::full(3)), 2);
    }

    #[test]
    fn checked_rank_rejects_out_of_range() {
        let v = Valuation::zero(3);
        assert!(matches!(
            v.checked_rank(GoodSet::from([3])),
            Err(Error::Input(_))
        ));
        assert_eq!(v.checked_rank(GoodSet::from([2])).unwrap(), 0);
    }

    #[test]
    fn independence_examples() {
        assert!(!v2_two_tier().is_independent(GoodSet::from([0, 1])));
        assert!(v2_two_tier().is_independent(GoodSet::EMPTY));
        let u = Valuation::uniform(4, GoodSet::from([1, 2, 3]), 2).unwrap();
        assert!(!u.is_independent(GoodSet::from([1, 2, 3])));
    }

    #[test]
    fn free_goods_examples() {
        let u = Valuation::uniform(4, GoodSet::from([1, 2, 3]), 2).unwrap();
        assert_eq!(
            u.free_goods(GoodSet::from([1])).unwrap(),
            GoodSet::from([2, 3])
        );
        assert_eq!(
            v2_two_tier().free_goods(GoodSet::from([0])).unwrap(),
            GoodSet::from([2, 3, 4, 5])
        );
        let basis = v2_two_tier()
            .max_independent_subset(GoodSet::full(6))
            .unwrap();
        assert_eq!(v2_two_tier().free_goods(basis).unwrap(), GoodSet::EMPTY);
        assert!(matches!(
            v2_two_tier().free_goods(GoodSet::from([0, 1])),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn greedy_basis_examples() {
        assert_eq!(
            v2_two_tier()
                .max_independent_subset(GoodSet::from([0, 1, 2]))
                .unwrap(),
            GoodSet::from([0, 2])
        );
        let s = GoodSet::from([0, 3]);
        assert_eq!(v2_two_tier().max_independent_subset(s).unwrap(), s);
        assert_eq!(
            Valuation::zero(5)
                .max_independent_subset(GoodSet::full(5))
                .unwrap(),
            GoodSet::EMPTY
        );
        let xos = Valuation::binary_xos(3, vec![GoodSet::from([0, 1])]).unwrap();
        assert!(matches!(
            xos.max_independent_subset(GoodSet::full(3)),
            Err(Error::UnsupportedKind(_))
        ));
    }

    #[test]
    fn validation_examples() {
        assert!(v2_two_tier().validate_matroid_rank(10).unwrap());
        // rank({0,1}) = 3 exceeds |S|
        let bad = Valuation::explicit(2, vec![0, 1, 1, 3]).unwrap();
        assert!(!bad.validate_matroid_rank(10).unwrap());
        let tri = triangle().to_explicit().unwrap();
        assert!(tri.validate_matroid_rank(10).unwrap());
        assert!(matches!(
            tri.validate_matroid_rank(2),
            Err(Error::Capability { .. })
        ));
        let xos = Valuation::binary_xos(3, vec![GoodSet::from([0, 1])]).unwrap();
        assert!(!xos.validate_matroid_rank(10).unwrap());
    }

    #[test]
    fn validation_rejects_supermodular_table() {
        // r = 0 on singletons, 1 on the pair: binary marginals but not submodular
        let t = Valuation::explicit(2, vec![0, 0, 0, 1]).unwrap();
        assert!(!t.validate_matroid_rank(4).unwrap());
        // r(∅) = 1
        let t = Valuation::explicit(1, vec![1, 1]).unwrap();
        assert!(!t.validate_matroid_rank(4).unwrap());
    }

    #[test]
    fn restriction_examples() {
        let v = v2_two_tier();
        assert!(v.restrict(GoodSet::full(6)).same_function(&v).unwrap());
        let w2 = Valuation::additive(6, GoodSet::from([1, 2, 3])).unwrap();
        assert!(v
            .restrict(GoodSet::from([1, 2, 3]))
            .same_function(&w2)
            .unwrap());
        let empty = v.restrict(GoodSet::EMPTY);
        assert_eq!(empty.kind(), &ValuationKind::Zero);
        assert_eq!(v.without_good(0).rank(GoodSet::from([0, 1])), 1);
        assert_eq!(v.without_good(0).rank(GoodSet::from([0])), 0);
    }

    #[test]
    fn permutation_examples() {
        let v = v2_two_tier();
        assert!(v
            .permute(&Permutation::identity(6))
            .unwrap()
            .same_function(&v)
            .unwrap());

        // π^{-1}({1,2}) = {1,3}: π maps 3 -> 2 and 2 -> 3
        let p = Permutation::transposition(4, 2, 3).unwrap();
        assert_eq!(p.preimage(GoodSet::from([1, 2])), GoodSet::from([1, 3]));
        let t = Valuation::explicit(4, (0..16u32).map(|s| (s * 7 + 3) % 5).collect()).unwrap();
        let tp = t.permute(&p).unwrap();
        assert_eq!(
            tp.rank(GoodSet::from([1, 2])),
            t.rank(GoodSet::from([1, 3]))
        );

        // swapping b and c turns |S ∩ {a,b}| into |S ∩ {a,c}|
        let (a, b, c) = (0, 1, 2);
        let wb = Valuation::additive(6, GoodSet::from([a, b])).unwrap();
        let wc = Valuation::additive(6, GoodSet::from([a, c])).unwrap();
        let swap = Permutation::transposition(6, b, c).unwrap();
        assert!(wb.permute(&swap).unwrap().same_function(&wc).unwrap());

        assert!(v.permute(&Permutation::identity(5)).is_err());
    }

    #[test]
    fn json_shapes() {
        let v: Valuation = serde_json::from_str(
            r#"{"kind": "partition", "m": 6, "parts": [{"goods":[0,1],"cap":1},{"goods":[2,3,4,5],"cap":2}]}"#,
        )
        .unwrap();
        assert_eq!(v, v2_two_tier());
        let text = serde_json::to_string(&triangle()).unwrap();
        assert_eq!(
            text,
            r#"{"kind":"graphic","m":3,"vertices":3,"edges":[{"good":0,"ends":[0,1]},{"good":1,"ends":[1,2]},{"good":2,"ends":[0,2]}]}"#
        );
        let back: Valuation = serde_json::from_str(&text).unwrap();
        assert_eq!(back, triangle());
        assert!(serde_json::from_str::<Valuation>(r#"{"kind":"zero","m":3}"#).is_ok());
        // overlapping parts are rejected at parse time
        assert!(serde_json::from_str::<Valuation>(
            r#"{"kind":"partition","m":3,"parts":[{"goods":[0,1],"cap":1},{"goods":[1,2],"cap":1}]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<Valuation>(
            r#"{"kind":"uniform","m":2,"ground":[0,2],"cap":1}"#
        )
        .is_err());
    }

    fn structured_valuation(m: usize) -> impl Strategy<Value = Valuation> {
        let uniform = (any::<u64>(), 0..=m).prop_map(move |(bits, cap)| {
            Valuation::uniform(
                m,
                GoodSet::from_bits(bits).intersection(GoodSet::full(m)),
                cap,
            )
            .unwrap()
        });
        let partition = (
            proptest::collection::vec(0..4usize, m),
            proptest::collection::vec(0..3usize, 4),
        )
            .prop_map(move |(labels, caps)| {
                let parts = (0..4)
                    .map(|p| {
                        let goods = (0..m).filter(|&g| labels[g] == p).collect::<GoodSet>();
                        (goods, caps[p])
                    })
                    .collect();
                Valuation::partition(m, parts).unwrap()
            });
        let graphic = proptest::collection::vec(proptest::option::of((0..4usize, 0..4usize)), m)
            .prop_map(move |edges| {
                let edges = edges
                    .into_iter()
                    .enumerate()
                    .filter_map(|(g, e)| e.map(|e| (g, e)))
                    .collect();
                Valuation::graphic(m, 4, edges).unwrap()
            });
        prop_oneof![uniform, partition, graphic, Just(Valuation::zero(m))]
    }

    fn sized_valuation(max_m: usize) -> impl Strategy<Value = Valuation> {
        (0..=max_m).prop_flat_map(structured_valuation)
    }

    proptest! {
        #[test]
        fn structured_kinds_are_matroid_ranks(v in sized_valuation(8)) {
            let table = v.to_explicit().unwrap();
            prop_assert!(table.validate_matroid_rank(10).unwrap());
            for s in v.ground().subsets() {
                prop_assert!(v.rank(s) <= s.len());
            }
        }

        #[test]
        fn augmentation_property_holds(v in sized_valuation(7)) {
            let indep: Vec<GoodSet> = v.ground().subsets().filter(|&s| v.is_independent(s)).collect();
            for &x in &indep {
                for &y in &indep {
                    if y.len() < x.len() {
                        prop_assert!(x.difference(y).iter().any(|g| v.is_independent(y.with(g))));
                    }
                }
            }
        }

        #[test]
        fn restrictions_compose(v in sized_valuation(8), x in any::<u64>(), y in any::<u64>()) {
            let full = v.ground();
            let (x, y) = (GoodSet::from_bits(x).intersection(full), GoodSet::from_bits(y).intersection(full));
            let lhs = v.restrict(x).restrict(y);
            let rhs = v.restrict(x.intersection(y));
            prop_assert!(lhs.same_function(&rhs).unwrap());
            for s in full.subsets() {
                prop_assert_eq!(v.restrict(x).rank(s), v.rank(s.intersection(x)));
            }
        }

        #[test]
        fn permutations_compose(
            v in sized_valuation(7),
            seeds in proptest::collection::vec(any::<u64>(), 2),
        ) {
            let m = v.m();
            let shuffle = |seed: u64| {
                let mut order: Vec<usize> = (0..m).collect();
                let mut state = seed | 1;
                for i in (1..m).rev() {
                    state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                    order.swap(i, (state % (i as u64 + 1)) as usize);
                }
                Permutation::new(order).unwrap()
            };
            let (p, q) = (shuffle(seeds[0]), shuffle(seeds[1]));
            let lhs = v.permute(&p).unwrap().permute(&q).unwrap();
            let rhs = v.permute(&q.after(&p).unwrap()).unwrap();
            prop_assert!(lhs.same_function(&rhs).unwrap());
            let vp = v.permute(&p).unwrap();
            for s in v.ground().subsets() {
                prop_assert_eq!(vp.rank(s), v.rank(p.preimage(s)));
            }
            // explicit tables permute the same way
            let ep = v.to_explicit().unwrap().permute(&p).unwrap();
            prop_assert!(ep.same_function(&vp).unwrap());
        }

        #[test]
        fn greedy_basis_is_maximal(v in sized_valuation(8)) {
            for s in v.ground().subsets() {
                let b = v.max_independent_subset(s).unwrap();
                prop_assert!(b.is_subset(s));
                prop_assert!(v.is_independent(b));
                prop_assert_eq!(b.len(), v.rank(s));
            }
        }
    }

    #[test]
    fn exhaustive_axioms_up_to_ten_goods() {
        // one representative per structured kind at m = 10
        let m = 10;
        let vals = [
            Valuation::uniform(m, GoodSet::from([0, 2, 4, 6, 8, 9]), 3).unwrap(),
            Valuation::partition(
                m,
                vec![
                    (GoodSet::from([0, 1, 2]), 1),
                    (GoodSet::from([3, 4, 5, 6]), 3),
                ],
            )
            .unwrap(),
            Valuation::graphic(
                m,
                5,
                (0..m).map(|g| (g, (g % 5, (g * 3 + 1) % 5))).collect(),
            )
            .unwrap(),
        ];
        for v in &vals {
            assert!(
                v.to_explicit().unwrap().validate_matroid_rank(m).unwrap(),
                "{}",
                v.kind_name()
            );
        }
    }

    #[test]
    fn binary_xos_value_is_best_overlap() {
        let v =
            Valuation::binary_xos(4, vec![GoodSet::from([0, 1]), GoodSet::from([2, 3])]).unwrap();
        assert_eq!(v.rank(GoodSet::from([0, 2])), 1);
        assert_eq!(v.rank(GoodSet::from([2, 3, 0])), 2);
        assert_eq!(v.restrict(GoodSet::from([0, 2])).rank(GoodSet::full(4)), 1);
    }
}
