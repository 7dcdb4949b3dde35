//! Counting the disconnected invariant regions that barrier couplings carve
//! out of the N-torus.
//!
//! Each repulsive pair forbids the zero phase difference, so every region of
//! the complement induces a tournament-free choice: for each edge, which
//! endpoint is "ahead". Regions correspond to orientations of the graph;
//! acyclic ones are genuine (a cyclic orientation would force a strictly
//! increasing phase around a loop). Two acyclic orientations describe the
//! same region up to the 2π seam exactly when they are connected by flips at
//! sources and sinks, so the number of distinct regions `r0` is the number
//! of flip equivalence classes.

use crate::graph::{
    chromatic_polynomial_at, is_acyclic, GraphError, Orientation, UndirectedGraph,
    CHROMATIC_VERTEX_BOUND,
};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};

/// Edge bound for exhaustive orientation enumeration (2^M states).
pub const ENUMERATION_EDGE_BOUND: usize = 22;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegionError {
    #[error("{0}")]
    Graph(#[from] GraphError),
    #[error("enumeration needs 2^M states; M = {actual} exceeds the bound {limit}")]
    TooManyEdges { actual: usize, limit: usize },
    #[error("vertex {vertex} is neither a source nor a sink")]
    NotSourceOrSink { vertex: usize },
    #[error("count does not fit in the result type")]
    Overflow,
}

/// Region counts for one graph.
///
/// `class_sizes` and `class_representatives` carry the full equivalence
/// class structure; only the three counts go through serialisation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionReport {
    /// Number of source/sink flip classes of acyclic orientations.
    pub r0: u64,
    /// Number of acyclic orientations.
    pub n_acyclic: u64,
    /// Number of cyclic orientations, 2^M − n_acyclic.
    pub n_cyclic: u64,
    #[serde(skip)]
    pub class_sizes: Vec<u64>,
    #[serde(skip)]
    pub class_representatives: Vec<Orientation>,
}

/// Graph families with a known closed-form region count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphFamily {
    Tree,
    Cycle,
    Complete,
}

/// All acyclic orientations, in ascending bitmask order.
pub fn enumerate_acyclic_orientations(
    g: &UndirectedGraph,
) -> Result<Vec<Orientation>, RegionError> {
    let m = g.edge_count();
    if m > ENUMERATION_EDGE_BOUND {
        return Err(RegionError::TooManyEdges { actual: m, limit: ENUMERATION_EDGE_BOUND });
    }
    let mut out = Vec::new();
    for mask in 0..(1u64 << m) {
        let o = Orientation::from_bitmask(g.clone(), mask)?;
        if is_acyclic(&o) {
            out.push(o);
        }
    }
    Ok(out)
}

/// Reverse every edge at `v`, which must be a source or a sink (all arcs
/// out, or all arcs in; an isolated vertex flips vacuously).
pub fn source_sink_flip(o: &Orientation, v: usize) -> Result<Orientation, RegionError> {
    let (indeg, outdeg) = o.degrees(v);
    if indeg > 0 && outdeg > 0 {
        return Err(RegionError::NotSourceOrSink { vertex: v });
    }
    let mut flipped = o.clone();
    for (k, &(i, j)) in o.graph().edges().iter().enumerate() {
        if i == v || j == v {
            flipped.reverse_edge(k);
        }
    }
    Ok(flipped)
}

/// Partition the acyclic orientations into source/sink flip classes.
/// Classes are ordered by their smallest bitmask; members ascend within a
/// class.
pub fn orientation_classes(g: &UndirectedGraph) -> Result<Vec<Vec<Orientation>>, RegionError> {
    let acyclic = enumerate_acyclic_orientations(g)?;
    let mut index_of: HashMap<u64, usize> = HashMap::with_capacity(acyclic.len());
    for (i, o) in acyclic.iter().enumerate() {
        index_of.insert(o.bitmask(), i);
    }
    let n = g.vertex_count();
    let mut seen = vec![false; acyclic.len()];
    let mut classes = Vec::new();
    for start in 0..acyclic.len() {
        if seen[start] {
            continue;
        }
        let mut members = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            members.push(acyclic[i].bitmask());
            for v in 1..=n {
                let Ok(next) = source_sink_flip(&acyclic[i], v) else {
                    continue;
                };
                // A flip preserves acyclicity, so the lookup always hits.
                let j = index_of[&next.bitmask()];
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        members.sort_unstable();
        classes.push(members);
    }
    classes.sort_unstable_by_key(|c| c[0]);
    classes
        .into_iter()
        .map(|masks| {
            masks
                .into_iter()
                .map(|mask| Orientation::from_bitmask(g.clone(), mask).map_err(RegionError::from))
                .collect()
        })
        .collect()
}

/// Count regions for a graph whose every edge carries a repulsive coupling.
pub fn count_regions_repulsive(g: &UndirectedGraph) -> Result<RegionReport, RegionError> {
    let classes = orientation_classes(g)?;
    let enumerated: u64 = classes.iter().map(|c| c.len() as u64).sum();

    // The chromatic polynomial at −1 counts acyclic orientations up to sign;
    // prefer it when the graph is small enough, it doubles as a consistency
    // check on the enumeration.
    let n_acyclic = if g.vertex_count() <= CHROMATIC_VERTEX_BOUND {
        let via_chi = chromatic_polynomial_at(g, -1)?.unsigned_abs();
        let via_chi = u64::try_from(via_chi).map_err(|_| RegionError::Overflow)?;
        debug_assert_eq!(via_chi, enumerated);
        via_chi
    } else {
        enumerated
    };

    let total = 1u64
        .checked_shl(g.edge_count() as u32)
        .ok_or(RegionError::Overflow)?;
    Ok(RegionReport {
        r0: classes.len() as u64,
        n_acyclic,
        n_cyclic: total - n_acyclic,
        class_sizes: classes.iter().map(|c| c.len() as u64).collect(),
        class_representatives: classes.into_iter().map(|mut c| c.remove(0)).collect(),
    })
}

/// Region count from the closed form for a family: 1 for trees, n−1 for the
/// n-cycle, (n−1)! for the complete graph.
pub fn closed_form_regions(family: GraphFamily, n: usize) -> Result<u128, RegionError> {
    match family {
        GraphFamily::Tree => {
            if n == 0 {
                Err(RegionError::Graph(GraphError::Empty))
            } else {
                Ok(1)
            }
        }
        GraphFamily::Cycle => {
            if n < 3 {
                Err(RegionError::Graph(GraphError::InvalidEdge { i: n, j: 1, n }))
            } else {
                Ok((n - 1) as u128)
            }
        }
        GraphFamily::Complete => {
            if n == 0 {
                return Err(RegionError::Graph(GraphError::Empty));
            }
            let mut acc: u128 = 1;
            for k in 2..n {
                acc = acc.checked_mul(k as u128).ok_or(RegionError::Overflow)?;
            }
            Ok(acc)
        }
    }
}

/// Size of the flip class of the n-cycle whose orientations have exactly
/// `forward` arcs pointing the same way around the ring: binomial(n, forward).
pub fn cycle_class_size(n: usize, forward: usize) -> Result<u64, RegionError> {
    if forward == 0 || forward >= n {
        return Err(RegionError::Graph(GraphError::InvalidEdge { i: forward, j: 0, n }));
    }
    let k = forward.min(n - forward) as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul((n as u128) - i)
            .ok_or(RegionError::Overflow)?
            / (i + 1);
    }
    u64::try_from(acc).map_err(|_| RegionError::Overflow)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_has_two_classes_of_three() {
        let g = UndirectedGraph::cycle(3).unwrap();
        let report = count_regions_repulsive(&g).unwrap();
        assert_eq!(report.r0, 2);
        assert_eq!(report.n_acyclic, 6);
        assert_eq!(report.n_cyclic, 2);
        assert_eq!(report.class_sizes, vec![3, 3]);
    }

    #[test]
    fn four_cycle_counts() {
        let g = UndirectedGraph::cycle(4).unwrap();
        let report = count_regions_repulsive(&g).unwrap();
        assert_eq!(report.r0, 3);
        assert_eq!(report.n_acyclic, 14);
        assert_eq!(report.n_cyclic, 2);
        let mut sizes = report.class_sizes.clone();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![4, 4, 6]);
    }

    #[test]
    fn trees_collapse_to_one_class() {
        for edges in [
            vec![(1, 2), (2, 3), (3, 4)],
            vec![(1, 2), (1, 3), (1, 4)],
            vec![(1, 3), (2, 3), (3, 4), (4, 5), (3, 6), (6, 7)],
        ] {
            let n = edges.iter().map(|&(i, j)| i.max(j)).max().unwrap();
            let g = UndirectedGraph::new(n, &edges).unwrap();
            let report = count_regions_repulsive(&g).unwrap();
            assert_eq!(report.r0, 1, "tree on {n} vertices");
            assert_eq!(report.n_acyclic, 1 << edges.len());
            assert_eq!(report.n_cyclic, 0);
        }
    }

    #[test]
    fn complete_graph_classes_count_factorially() {
        let g = UndirectedGraph::complete(4).unwrap();
        let report = count_regions_repulsive(&g).unwrap();
        assert_eq!(report.r0, 6);
        assert_eq!(report.n_acyclic, 24);
        assert_eq!(report.n_cyclic, 64 - 24);
    }

    #[test]
    fn flip_requires_source_or_sink() {
        let g = UndirectedGraph::path(3).unwrap();
        // 1→2→3: vertex 2 has one arc in, one out
        let o = Orientation::from_bitmask(g.clone(), 0).unwrap();
        assert!(matches!(
            source_sink_flip(&o, 2),
            Err(RegionError::NotSourceOrSink { vertex: 2 })
        ));
        let flipped = source_sink_flip(&o, 1).unwrap();
        assert_eq!(flipped.arcs(), vec![(2, 1), (2, 3)]);
    }

    #[test]
    fn closed_forms_match_direct_counts() {
        assert_eq!(closed_form_regions(GraphFamily::Tree, 9).unwrap(), 1);
        assert_eq!(closed_form_regions(GraphFamily::Cycle, 6).unwrap(), 5);
        assert_eq!(closed_form_regions(GraphFamily::Complete, 5).unwrap(), 24);
        assert_eq!(closed_form_regions(GraphFamily::Complete, 1).unwrap(), 1);
    }

    #[test]
    fn cycle_class_sizes_are_binomial() {
        assert_eq!(cycle_class_size(5, 2).unwrap(), 10);
        assert_eq!(cycle_class_size(4, 1).unwrap(), 4);
        let total: u64 = (1..5).map(|p| cycle_class_size(5, p).unwrap()).sum();
        assert_eq!(total, (1 << 5) - 2);
    }

    #[test]
    fn enumeration_bound_is_enforced() {
        let g = UndirectedGraph::complete(8).unwrap(); // 28 edges
        assert!(matches!(
            enumerate_acyclic_orientations(&g),
            Err(RegionError::TooManyEdges { actual: 28, limit: 22 })
        ));
    }

    #[test]
    fn report_serialises_counts_only() {
        let g = UndirectedGraph::cycle(3).unwrap();
        let report = count_regions_repulsive(&g).unwrap();
        let v: serde_json::Value = serde_json::to_value(&report).unwrap();
        assert_eq!(v, serde_json::json!({"r0": 2, "n_acyclic": 6, "n_cyclic": 2}));
    }
}
