//! Edge sets of the precision-matrix topologies.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

pub const HUB_GROUP_SIZE: usize = 5;

/// Nodes split into consecutive groups of five; the first node of each group
/// is joined to the other four.
pub fn hub_edges(n_nodes: usize) -> Result<Vec<(usize, usize)>> {
    if n_nodes == 0 || !n_nodes.is_multiple_of(HUB_GROUP_SIZE) {
        return Err(Error::InvalidArgument(alloc::format!(
            "hub graph needs a positive multiple of {HUB_GROUP_SIZE} nodes, got {n_nodes}"
        )));
    }
    let mut edges = Vec::with_capacity(n_nodes / HUB_GROUP_SIZE * (HUB_GROUP_SIZE - 1));
    for start in (0..n_nodes).step_by(HUB_GROUP_SIZE) {
        for leaf in start + 1..start + HUB_GROUP_SIZE {
            edges.push((start, leaf));
        }
    }
    Ok(edges)
}

/// Watts–Strogatz graph on a ring where each node starts joined to its next
/// neighbor (a single cycle). Each ring edge `(i, i+1)` is rewired with
/// probability `rewire` to `(i, k)`, `k` uniform over nodes that would create
/// neither a self-loop nor a duplicate edge. Edges come back as `(min, max)`
/// in ascending order.
pub fn small_world_edges<R: Rng + ?Sized>(n_nodes: usize, rewire: f64, rng: &mut R) -> Result<Vec<(usize, usize)>> {
    if n_nodes < 3 {
        return Err(Error::InvalidArgument(alloc::format!(
            "small-world ring needs at least 3 nodes, got {n_nodes}"
        )));
    }
    let norm = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
    let mut edges: BTreeSet<(usize, usize)> = (0..n_nodes).map(|i| norm(i, (i + 1) % n_nodes)).collect();
    for i in 0..n_nodes {
        let j = (i + 1) % n_nodes;
        if !rng.random_bool(rewire) {
            continue;
        }
        let candidates: Vec<usize> = (0..n_nodes)
            .filter(|&k| k != i && !edges.contains(&norm(i, k)))
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let k = candidates[rng.random_range(0..candidates.len())];
        edges.remove(&norm(i, j));
        edges.insert(norm(i, k));
    }
    Ok(edges.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hub_single_group() {
        assert_eq!(hub_edges(5).unwrap(), alloc::vec![(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert_eq!(hub_edges(50).unwrap().len(), 40);
        assert!(hub_edges(12).is_err());
    }

    #[test]
    fn ring_without_rewiring() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = small_world_edges(6, 0.0, &mut rng).unwrap();
        assert_eq!(e, alloc::vec![(0, 1), (0, 5), (1, 2), (2, 3), (3, 4), (4, 5)]);
    }

    #[test]
    fn rewiring_preserves_edge_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let e = small_world_edges(50, 0.05, &mut rng).unwrap();
            assert_eq!(e.len(), 50);
            assert!(e.iter().all(|&(a, b)| a < b && b < 50));
        }
        let e = small_world_edges(50, 1.0, &mut rng).unwrap();
        assert_eq!(e.len(), 50);
        // full rewiring on a triangle has nowhere to go
        assert_eq!(small_world_edges(3, 1.0, &mut rng).unwrap().len(), 3);
    }
}
