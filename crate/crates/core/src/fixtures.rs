//! Named preset instances and seeded random instance generators.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::goods::{GoodSet, Permutation};
use crate::instances::{Allocation, Instance};
use crate::matroid::Valuation;

pub mod presets {
    use super::*;

    /// Names accepted by [`by_name`].
    pub const NAMES: &[&str] = &["thm4", "thm4-wstar", "triangle", "uniform-pair", "empty"];

    pub fn by_name(name: &str) -> Option<Instance> {
        match name {
            "thm4" => Some(six_good_profile()),
            "thm4-wstar" => Some(six_good_misreport_profile()),
            "triangle" => Some(triangle()),
            "uniform-pair" => Some(uniform_pair()),
            "empty" => Some(empty()),
            _ => None,
        }
    }

    /// Two agents, six goods, `G = {0, 1}`:
    /// `v1(S) = |S ∩ G|` and `v2(S) = min(1, |S ∩ G|) + min(2, |S \ G|)`.
    pub fn six_good_profile() -> Instance {
        let g = GoodSet::from([0, 1]);
        let rest = GoodSet::from([2, 3, 4, 5]);
        Instance::new(
            6,
            vec![
                Valuation::additive(6, g).expect("fixed preset"),
                Valuation::partition(6, vec![(g, 1), (rest, 2)]).expect("fixed preset"),
            ],
        )
        .expect("fixed preset")
    }

    /// The deviation profile with `a = 0, b = 1, c = 2, d = 3`:
    /// `w*_1(S) = |S ∩ {a,b,c,d}|` against `w_2(S) = |S ∩ {b,c,d}|`.
    pub fn six_good_misreport_profile() -> Instance {
        Instance::new(
            6,
            vec![
                Valuation::additive(6, GoodSet::from([0, 1, 2, 3])).expect("fixed preset"),
                Valuation::additive(6, GoodSet::from([1, 2, 3])).expect("fixed preset"),
            ],
        )
        .expect("fixed preset")
    }

    /// One agent whose goods are the three edges of a triangle.
    pub fn triangle() -> Instance {
        Instance::new(
            3,
            vec![
                Valuation::graphic(3, 3, vec![(0, (0, 1)), (1, (1, 2)), (2, (0, 2))])
                    .expect("fixed preset"),
            ],
        )
        .expect("fixed preset")
    }

    /// Two agents, each uniform with cap 2 over the same two goods.
    pub fn uniform_pair() -> Instance {
        let v = Valuation::uniform(2, GoodSet::full(2), 2).expect("fixed preset");
        Instance::new(2, vec![v.clone(), v]).expect("fixed preset")
    }

    /// No goods, one agent.
    pub fn empty() -> Instance {
        Instance::new(0, vec![Valuation::zero(0)]).expect("fixed preset")
    }
}

/// Which valuation families the generator may draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KindMix {
    /// uniform, partition, graphic, explicit (binary-representable) and zero
    Mixed,
    /// explicit tables only
    Explicit,
}

/// A random matroid rank valuation over `[m]`.
pub fn random_valuation<R: Rng + ?Sized>(rng: &mut R, m: usize, mix: KindMix) -> Valuation {
    let pick = match mix {
        KindMix::Mixed => rng.gen_range(0..20),
        KindMix::Explicit => 15,
    };
    match pick {
        0..=3 => {
            let ground = random_subset(rng, m, 0.7);
            let cap = rng.gen_range(0..=ground.len().max(1));
            Valuation::uniform(m, ground, cap).expect("generated in range")
        }
        4..=8 => {
            let blocks = rng.gen_range(1..=3);
            let mut parts = vec![(GoodSet::EMPTY, 0); blocks];
            for g in 0..m {
                // some goods stay outside every part
                if rng.gen_bool(0.85) {
                    parts[rng.gen_range(0..blocks)].0.insert(g);
                }
            }
            for p in parts.iter_mut() {
                p.1 = rng.gen_range(0..=p.0.len().max(1));
            }
            Valuation::partition(m, parts).expect("generated disjoint")
        }
        9..=13 => {
            let vertices = rng.gen_range(2..=4);
            let mut edges = Vec::new();
            for g in 0..m {
                if rng.gen_bool(0.85) {
                    edges.push((g, (rng.gen_range(0..vertices), rng.gen_range(0..vertices))));
                }
            }
            Valuation::graphic(m, vertices, edges).expect("generated in range")
        }
        14..=18 => binary_matroid(rng, m),
        _ => Valuation::zero(m),
    }
}

/// Rank table of random vectors over GF(2), one vector per good.
fn binary_matroid<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Valuation {
    let dim = rng.gen_range(1..=4u32);
    let vectors: Vec<u32> = (0..m).map(|_| rng.gen_range(0..(1u32 << dim))).collect();
    let table = GoodSet::full(m)
        .subsets()
        .map(|s| gf2_rank(s.iter().map(|g| vectors[g])))
        .collect();
    Valuation::explicit(m, table).expect("m within explicit bound")
}

fn gf2_rank(vectors: impl Iterator<Item = u32>) -> u32 {
    let mut basis: Vec<u32> = Vec::new();
    for mut v in vectors {
        for &b in &basis {
            v = v.min(v ^ b);
        }
        if v != 0 {
            basis.push(v);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    basis.len() as u32
}

pub fn random_subset<R: Rng + ?Sized>(rng: &mut R, m: usize, p: f64) -> GoodSet {
    (0..m).filter(|_| rng.gen_bool(p)).collect()
}

pub fn random_permutation<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Permutation {
    let mut forward: Vec<usize> = (0..m).collect();
    forward.shuffle(rng);
    Permutation::new(forward).expect("shuffle is a bijection")
}

/// Instance with `m` and `n` drawn uniformly from the inclusive ranges.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    m_range: (usize, usize),
    n_range: (usize, usize),
    mix: KindMix,
) -> Instance {
    let m = rng.gen_range(m_range.0..=m_range.1);
    let n = rng.gen_range(n_range.0.max(1)..=n_range.1.max(1));
    let valuations = (0..n).map(|_| random_valuation(rng, m, mix)).collect();
    Instance::new(m, valuations).expect("generated consistently")
}

/// A non-wasteful allocation built by offering the goods in random order to
/// random agents; each good is kept only if it raises the taker's value.
/// Roughly one good in five is left out.
pub fn random_non_wasteful_allocation<R: Rng + ?Sized>(rng: &mut R, inst: &Instance) -> Allocation {
    let mut order: Vec<usize> = (0..inst.m()).collect();
    order.shuffle(rng);
    let mut bundles = vec![GoodSet::EMPTY; inst.n()];
    for g in order {
        if rng.gen_bool(0.2) {
            continue;
        }
        let i = rng.gen_range(0..inst.n());
        if inst.valuation(i).is_independent(bundles[i].with(g)) {
            bundles[i].insert(g);
        }
    }
    Allocation::new(bundles).expect("each good offered once")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_valuations_are_matroid_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let m = rng.gen_range(0..=6);
            let v = random_valuation(&mut rng, m, KindMix::Mixed);
            assert!(
                v.to_explicit().unwrap().validate_matroid_rank(8).unwrap(),
                "{v:?}"
            );
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| random_instance(&mut rng, (0, 6), (1, 3), KindMix::Mixed))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    #[test]
    fn random_allocations_are_non_wasteful() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let inst = random_instance(&mut rng, (0, 6), (1, 3), KindMix::Mixed);
            let a = random_non_wasteful_allocation(&mut rng, &inst);
            assert!(inst.is_non_wasteful(&a).unwrap());
        }
    }

    #[test]
    fn gf2_rank_small_cases() {
        assert_eq!(gf2_rank([0b01, 0b10, 0b11].into_iter()), 2);
        assert_eq!(gf2_rank([0, 0].into_iter()), 0);
        assert_eq!(gf2_rank([0b111, 0b111].into_iter()), 1);
    }

    #[test]
    fn presets_resolve() {
        for name in presets::NAMES {
            assert!(presets::by_name(name).is_some(), "{name}");
        }
        assert!(presets::by_name("nope").is_none());
    }
}
