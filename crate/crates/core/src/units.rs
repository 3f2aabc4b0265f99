//! Unit-weight multisets over a subgraph's virtual edge fragments.
//!
//! Every edge is viewed as `w0` fragments, where `w0` is its frozen initial
//! integer weight, and each fragment carries a unit weight of
//! `current / w0`. The sum of the `phi` smallest unit weights across a
//! subgraph lower-bounds the cost of any path whose fragment count is `phi`,
//! because a path must pay for that many fragments and cannot beat the
//! cheapest ones. Sums are computed exactly in milli-space: a fully taken
//! edge contributes its current weight verbatim, and the one partially taken
//! edge contributes `floor(c * current / w0)`, which keeps the bound sound.

use crate::fixed::Milli;
use crate::graph::{EdgeId, Graph};
use crate::partition::Subgraph;

/// All fragments of one edge: `count` fragments of unit weight
/// `milli / count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Group {
    edge: EdgeId,
    count: u32,
    milli: Milli,
}

impl Group {
    /// Unit-weight order by cross-multiplication; ties by edge id. Equal-unit
    /// ties cannot change any prefix sum (identical rationals floor alike),
    /// the id tiebreak only pins iteration order.
    fn key_cmp(&self, other: &Group) -> std::cmp::Ordering {
        let lhs = self.milli as i128 * other.count as i128;
        let rhs = other.milli as i128 * self.count as i128;
        lhs.cmp(&rhs).then(self.edge.cmp(&other.edge))
    }
}

/// Fragments of a subgraph's edges, sorted by unit weight, with cumulative
/// counts and exact cumulative milli sums for O(log) prefix queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitMultiset {
    groups: Vec<Group>,
    cum_count: Vec<u64>,
    cum_milli: Vec<Milli>,
}

impl UnitMultiset {
    pub fn from_subgraph(g: &Graph, sg: &Subgraph) -> Self {
        Self::from_edges(g, &sg.edges)
    }

    pub fn from_edges(g: &Graph, edges: &[EdgeId]) -> Self {
        let mut groups: Vec<Group> = edges
            .iter()
            .map(|&e| {
                let edge = g.edge(e);
                Group {
                    edge: e,
                    count: edge.initial,
                    milli: edge.current,
                }
            })
            .collect();
        groups.sort_by(|a, b| a.key_cmp(b));
        let mut cum_count = Vec::with_capacity(groups.len() + 1);
        let mut cum_milli = Vec::with_capacity(groups.len() + 1);
        cum_count.push(0);
        cum_milli.push(0);
        for grp in &groups {
            cum_count.push(cum_count.last().unwrap() + grp.count as u64);
            cum_milli.push(cum_milli.last().unwrap() + grp.milli);
        }
        UnitMultiset {
            groups,
            cum_count,
            cum_milli,
        }
    }

    pub fn total_fragments(&self) -> u64 {
        *self.cum_count.last().unwrap()
    }

    /// Exact milli sum of the `phi` smallest unit weights (floored once on
    /// the partial edge). `phi` past the end clamps to the full sum.
    pub fn prefix_sum(&self, phi: u64) -> Milli {
        if phi >= self.total_fragments() {
            return *self.cum_milli.last().unwrap();
        }
        // Last group index whose fragments are all within the first `phi`.
        let idx = self.cum_count.partition_point(|&c| c <= phi) - 1;
        let full = self.cum_milli[idx];
        let taken = phi - self.cum_count[idx];
        if taken == 0 {
            return full;
        }
        let grp = &self.groups[idx];
        let partial = (taken as i128 * grp.milli as i128 / grp.count as i128) as Milli;
        full + partial
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed::from_int;
    use crate::graph::Graph;
    use crate::partition::partition;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn multiset(weights: &[(u32, i64)]) -> UnitMultiset {
        // Builds a star graph whose edges carry the given (initial, current)
        // pairs, then takes all edges.
        let n = weights.len() + 1;
        let edges: Vec<_> = weights
            .iter()
            .enumerate()
            .map(|(i, &(w0, _))| (0, (i + 1) as u32, w0))
            .collect();
        let mut g = Graph::from_edges(n, &edges).unwrap();
        for (i, &(_, cur)) in weights.iter().enumerate() {
            g.set_weight(i as u32, from_int(cur)).unwrap();
        }
        let all: Vec<u32> = (0..weights.len() as u32).collect();
        UnitMultiset::from_edges(&g, &all)
    }

    #[test]
    fn eight_cheapest_fragments_sum_to_four() {
        // Units: three of 1/3, four of 1/2, eight of 1, three of 2.
        let ms = multiset(&[(3, 1), (4, 2), (5, 5), (3, 3), (3, 6)]);
        assert_eq!(ms.total_fragments(), 18);
        assert_eq!(ms.prefix_sum(8), 4000);
        assert_eq!(ms.prefix_sum(18), from_int(1 + 2 + 5 + 3 + 6));
    }

    #[test]
    fn initial_state_units_are_all_one() {
        let ms = multiset(&[(3, 3), (4, 4), (5, 5), (3, 3), (3, 3)]);
        for phi in 0..=18 {
            assert_eq!(ms.prefix_sum(phi), from_int(phi as i64));
        }
    }

    #[test]
    fn zero_and_overlong_prefixes() {
        let ms = multiset(&[(2, 7), (5, 1)]);
        assert_eq!(ms.prefix_sum(0), 0);
        assert_eq!(ms.prefix_sum(7), from_int(8));
        assert_eq!(ms.prefix_sum(1000), from_int(8));
    }

    #[test]
    fn partial_group_is_floored() {
        // One edge: 3 fragments of unit 1/3 -> prefix 1 is floor(1000/3).
        let ms = multiset(&[(3, 1)]);
        assert_eq!(ms.prefix_sum(1), 333);
        assert_eq!(ms.prefix_sum(2), 666);
        assert_eq!(ms.prefix_sum(3), 1000);
    }

    #[test]
    fn equal_units_on_different_edges_do_not_disturb_sums() {
        let a = multiset(&[(5, 5), (3, 3), (4, 8)]);
        let b = multiset(&[(3, 3), (5, 5), (4, 8)]);
        for phi in 0..=12 {
            assert_eq!(a.prefix_sum(phi), b.prefix_sum(phi));
        }
    }

    /// Exact rational with i128 parts; denominators stay small enough here
    /// (initial weights <= 30) that reduced sums cannot overflow.
    #[derive(Clone, Copy)]
    struct Frac(i128, i128);

    impl Frac {
        fn add(self, num: i128, den: i128) -> Frac {
            let n = self.0 * den + num * self.1;
            let d = self.1 * den;
            let g = gcd(n.abs().max(1), d);
            Frac(n / g, d / g)
        }

        fn floor(self) -> i128 {
            self.0.div_euclid(self.1)
        }
    }

    fn gcd(a: i128, b: i128) -> i128 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }

    #[test]
    fn prefix_sums_match_rational_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..25 {
            let mut g = Graph::random_connected(30, 15, 30, &mut rng);
            for e in 0..g.edge_count() as u32 {
                let w = rng.gen_range(1..=30i64);
                g.set_weight(e, from_int(w)).unwrap();
            }
            let p = partition(&g, 8).unwrap();
            for sg in &p.subgraphs {
                let ms = UnitMultiset::from_subgraph(&g, sg);
                // Every fragment as (milli, w0), sorted by value.
                let mut frags: Vec<(i128, i128)> = Vec::new();
                for &e in &sg.edges {
                    let edge = g.edge(e);
                    for _ in 0..edge.initial {
                        frags.push((edge.current as i128, edge.initial as i128));
                    }
                }
                frags.sort_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)));
                for phi in 0..=frags.len() as u64 {
                    let mut sum = Frac(0, 1);
                    for &(num, den) in &frags[..phi as usize] {
                        sum = sum.add(num, den);
                    }
                    assert_eq!(
                        ms.prefix_sum(phi),
                        sum.floor() as Milli,
                        "phi={phi} edges={:?}",
                        sg.edges
                    );
                }
            }
        }
    }
}
