use nalgebra::DMatrix;
use rand::seq::IndexedRandom;
use rand::Rng;

/// Undirected adjacency on `d` nodes, stored as a symmetric 0/1 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adj: DMatrix<u8>,
}

impl Graph {
    pub fn empty(d: usize) -> Self {
        Self { adj: DMatrix::zeros(d, d) }
    }

    pub fn nodes(&self) -> usize {
        self.adj.nrows()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[(i, j)] != 0
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        if i != j {
            self.adj[(i, j)] = 1;
            self.adj[(j, i)] = 1;
        }
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.adj[(i, j)] = 0;
        self.adj[(j, i)] = 0;
    }

    pub fn edge_count(&self) -> usize {
        let d = self.nodes();
        (0..d).map(|i| (i + 1..d).filter(|&j| self.has_edge(i, j)).count()).sum()
    }

    /// Fraction of the `d(d−1)/2` possible edges present.
    pub fn density(&self) -> f64 {
        let d = self.nodes();
        if d < 2 {
            return 0.0;
        }
        self.edge_count() as f64 / (d * (d - 1) / 2) as f64
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        self.adj.map(f64::from)
    }
}

/// Watts-Strogatz graph on a ring of `n` nodes.
///
/// Each node links to the `nei` nearest nodes on either side; each lattice
/// edge then has its far endpoint moved to a uniformly chosen node with
/// probability `rewire`, avoiding loops and duplicates.
pub fn watts_strogatz<R: Rng + ?Sized>(n: usize, nei: usize, rewire: f64, rng: &mut R) -> Graph {
    let mut g = Graph::empty(n);
    if n < 2 {
        return g;
    }
    let mut lattice = Vec::new();
    for i in 0..n {
        for k in 1..=nei.min(n / 2) {
            let j = (i + k) % n;
            if !g.has_edge(i, j) && i != j {
                g.add_edge(i, j);
                lattice.push((i, j));
            }
        }
    }
    let nodes: Vec<usize> = (0..n).collect();
    for (i, j) in lattice {
        if rng.random::<f64>() >= rewire {
            continue;
        }
        let free: Vec<usize> = nodes.iter().copied().filter(|&k| k != i && !g.has_edge(i, k)).collect();
        if let Some(&k) = free.choose(rng) {
            g.remove_edge(i, j);
            g.add_edge(i, k);
        }
    }
    g
}

/// Sizes of `blocks` near-equal consecutive node groups.
pub fn block_sizes(d: usize, blocks: usize) -> Vec<usize> {
    (0..blocks).map(|b| d / blocks + usize::from(b < d % blocks)).collect()
}

/// Three-block small-world graph with random cross-block links.
///
/// The uniforms for cross links are drawn for every pair regardless of `q`,
/// so graphs built from the same stream are nested in `q`.
pub fn small_world_blocks<R: Rng + ?Sized>(d: usize, nei: usize, q: f64, rewire: f64, rng: &mut R) -> Graph {
    let sizes = block_sizes(d, 3);
    let mut label = Vec::with_capacity(d);
    let mut g = Graph::empty(d);
    let mut offset = 0;
    for (b, &n) in sizes.iter().enumerate() {
        let sub = watts_strogatz(n, nei, rewire, rng);
        for i in 0..n {
            for j in i + 1..n {
                if sub.has_edge(i, j) {
                    g.add_edge(offset + i, offset + j);
                }
            }
        }
        label.extend(std::iter::repeat_n(b, n));
        offset += n;
    }
    for i in 0..d {
        for j in i + 1..d {
            let u: f64 = rng.random();
            if label[i] != label[j] && u < q {
                g.add_edge(i, j);
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ring_lattice_without_rewiring() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = watts_strogatz(8, 2, 0.0, &mut rng);
        assert_eq!(g.edge_count(), 16);
        assert!(g.has_edge(0, 7) && g.has_edge(0, 6) && !g.has_edge(0, 4));
    }

    #[test]
    fn large_neighbourhood_is_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(watts_strogatz(10, 5, 0.0, &mut rng).edge_count(), 45);
    }

    #[test]
    fn rewiring_keeps_edge_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = watts_strogatz(20, 2, 0.5, &mut rng);
        assert_eq!(g.edge_count(), 40);
    }

    #[test]
    fn blocks_and_cross_links() {
        assert_eq!(block_sizes(10, 3), vec![4, 3, 3]);
        let g0 = small_world_blocks(30, 1, 0.0, 0.0, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(g0.edge_count(), 30);
        let g1 = small_world_blocks(30, 1, 1.0, 0.0, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(g1.edge_count(), 30 + 300);
    }
}
