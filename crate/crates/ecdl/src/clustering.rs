//! Connectivity-constrained agglomerative Ward clustering and the
//! compress/expand maps between feature space and cluster space.
//!
//! Merges are restricted to clusters adjacent in a user-supplied graph
//! (lattice neighborhoods for image data), so every cluster stays spatially
//! connected. Candidate pairs live in a lazily-invalidated binary heap keyed
//! by Ward cost; merged clusters keep the smaller of the two slot ids, and
//! cost ties break lexicographically on (min id, max id).

use std::cmp::Reverse;
use std::collections::HashSet;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Undirected adjacency over p features. Edges are stored normalized
/// (a < b) and deduplicated; the clustering entry points require the graph
/// to be connected.
#[derive(Debug, Clone)]
pub struct ConnectivityGraph {
    pub p: usize,
    edges: Vec<(u32, u32)>,
}

impl ConnectivityGraph {
    pub fn new(p: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut normalized: Vec<(u32, u32)> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Dimension(format!("self-loop at node {a}")));
            }
            if a as usize >= p || b as usize >= p {
                return Err(Error::Dimension(format!(
                    "edge ({a}, {b}) out of range for p = {p}"
                )));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        normalized.dedup();
        Ok(Self { p, edges: normalized })
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.p];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        adj
    }

    /// BFS reachability from node 0.
    pub fn is_connected(&self) -> bool {
        if self.p == 0 {
            return false;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.p];
        let mut queue = std::collections::VecDeque::from([0u32]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v as usize] {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.p
    }
}

/// Lattice adjacency for a 1-, 2- or 3-dimensional grid: nodes at L1
/// distance one are connected (6-neighborhood in 3D). Sites are numbered
/// row-major.
pub fn grid_connectivity(shape: &[usize]) -> Result<ConnectivityGraph> {
    if shape.is_empty() || shape.len() > 3 {
        return Err(Error::Dimension(format!(
            "grid connectivity supports 1 to 3 dimensions, got {}",
            shape.len()
        )));
    }
    if shape.iter().any(|&e| e == 0) {
        return Err(Error::Dimension("grid extents must be >= 1".into()));
    }
    let p: usize = shape.iter().product();
    let strides: Vec<usize> = {
        let mut s = vec![1; shape.len()];
        for d in (0..shape.len() - 1).rev() {
            s[d] = s[d + 1] * shape[d + 1];
        }
        s
    };
    let mut edges = Vec::new();
    for idx in 0..p {
        let mut rem = idx;
        for d in 0..shape.len() {
            let coord = rem / strides[d];
            rem %= strides[d];
            if coord + 1 < shape[d] {
                edges.push((idx as u32, (idx + strides[d]) as u32));
            }
        }
    }
    ConnectivityGraph::new(p, edges)
}

/// Partition of the p features into connected clusters, with the subsample
/// and seed that produced it.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ClusterLabeling {
    /// Cluster id in [0, n_clusters) per feature.
    pub labels: Vec<u32>,
    pub n_clusters: usize,
    /// Row indices the clustering was computed on (empty when clustered on
    /// the full sample).
    pub subsample: Vec<u32>,
    pub seed: u64,
}

/// One executed merge: the surviving slot, the absorbed slot, and the Ward
/// cost paid.
#[derive(Debug, Clone, PartialEq)]
pub struct WardMerge {
    pub kept: u32,
    pub absorbed: u32,
    pub cost: f64,
}

struct Candidate {
    cost: f64,
    a: u32,
    b: u32,
    stamp_a: u32,
    stamp_b: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

/// Ward merge cost between two clusters given their member sums.
fn ward_cost(sums: &[f64], sizes: &[u32], m: usize, a: usize, b: usize) -> f64 {
    let (na, nb) = (sizes[a] as f64, sizes[b] as f64);
    let sa = &sums[a * m..(a + 1) * m];
    let sb = &sums[b * m..(b + 1) * m];
    let mut dist_sq = 0.0;
    for k in 0..m {
        let d = sa[k] / na - sb[k] / nb;
        dist_sq += d * d;
    }
    na * nb / (na + nb) * dist_sq
}

/// Agglomerate down to `target_clusters` clusters.
pub fn ward_cluster(
    design_rows: ArrayView2<'_, f64>,
    graph: &ConnectivityGraph,
    target_clusters: usize,
) -> Result<ClusterLabeling> {
    Ok(ward_cluster_with_trace(design_rows, graph, target_clusters)?.0)
}

/// Same as [`ward_cluster`], returning the merge sequence for inspection.
pub fn ward_cluster_with_trace(
    design_rows: ArrayView2<'_, f64>,
    graph: &ConnectivityGraph,
    target_clusters: usize,
) -> Result<(ClusterLabeling, Vec<WardMerge>)> {
    let (m, p) = design_rows.dim();
    if p != graph.p {
        return Err(Error::Dimension(format!(
            "design has {p} features but graph has {} nodes",
            graph.p
        )));
    }
    if m < 1 {
        return Err(Error::Dimension("clustering needs at least one row".into()));
    }
    if target_clusters < 1 || target_clusters > p {
        return Err(Error::InvalidC {
            c: target_clusters,
            p,
        });
    }
    if !graph.is_connected() {
        return Err(Error::DisconnectedGraph);
    }

    // Per-slot member sums (centroid * size), one slot per initial feature.
    let mut sums = vec![0.0f64; p * m];
    for (i, row) in design_rows.rows().into_iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            sums[j * m + i] = v;
        }
    }
    let mut sizes = vec![1u32; p];
    let mut active = vec![true; p];
    let mut stamps = vec![0u32; p];
    let mut members: Vec<Vec<u32>> = (0..p as u32).map(|j| vec![j]).collect();
    let mut neighbors: Vec<HashSet<u32>> = {
        let adj = graph.adjacency();
        adj.into_iter().map(|v| v.into_iter().collect()).collect()
    };

    let mut heap = std::collections::BinaryHeap::new();
    for &(a, b) in graph.edges() {
        let cost = ward_cost(&sums, &sizes, m, a as usize, b as usize);
        heap.push(Reverse(Candidate {
            cost,
            a,
            b,
            stamp_a: 0,
            stamp_b: 0,
        }));
    }

    let mut remaining = p;
    let mut trace = Vec::with_capacity(p - target_clusters);
    while remaining > target_clusters {
        let Reverse(cand) = heap.pop().ok_or(Error::DisconnectedGraph)?;
        let (a, b) = (cand.a as usize, cand.b as usize);
        if !active[a]
            || !active[b]
            || stamps[a] != cand.stamp_a
            || stamps[b] != cand.stamp_b
        {
            continue;
        }
        let keep = a.min(b);
        let gone = a.max(b);
        trace.push(WardMerge {
            kept: keep as u32,
            absorbed: gone as u32,
            cost: cand.cost,
        });

        for k in 0..m {
            sums[keep * m + k] += sums[gone * m + k];
        }
        sizes[keep] += sizes[gone];
        let moved = std::mem::take(&mut members[gone]);
        members[keep].extend(moved);
        active[gone] = false;
        stamps[keep] += 1;

        let gone_neighbors = std::mem::take(&mut neighbors[gone]);
        for &x in &gone_neighbors {
            neighbors[x as usize].remove(&(gone as u32));
            if x as usize != keep {
                neighbors[x as usize].insert(keep as u32);
                neighbors[keep].insert(x);
            }
        }
        neighbors[keep].remove(&(keep as u32));
        neighbors[keep].remove(&(gone as u32));

        let keep_neighbors: Vec<u32> = neighbors[keep].iter().copied().collect();
        for x in keep_neighbors {
            let xi = x as usize;
            let cost = ward_cost(&sums, &sizes, m, keep, xi);
            let (lo, hi) = (keep.min(xi), keep.max(xi));
            heap.push(Reverse(Candidate {
                cost,
                a: lo as u32,
                b: hi as u32,
                stamp_a: stamps[lo],
                stamp_b: stamps[hi],
            }));
        }
        remaining -= 1;
    }

    // Label clusters 0..C-1 ordered by their smallest member feature.
    let mut slots: Vec<usize> = (0..p).filter(|&s| active[s]).collect();
    slots.sort_by_key(|&s| members[s].iter().min().copied().unwrap_or(u32::MAX));
    let mut labels = vec![0u32; p];
    for (label, &slot) in slots.iter().enumerate() {
        for &j in &members[slot] {
            labels[j as usize] = label as u32;
        }
    }
    Ok((
        ClusterLabeling {
            labels,
            n_clusters: target_clusters,
            subsample: Vec::new(),
            seed: 0,
        },
        trace,
    ))
}

/// Check that every cluster induces a connected subgraph.
pub fn clusters_are_connected(graph: &ConnectivityGraph, labeling: &ClusterLabeling) -> bool {
    let adj = graph.adjacency();
    let p = graph.p;
    let mut seen = vec![false; p];
    for c in 0..labeling.n_clusters as u32 {
        let Some(start) = (0..p).find(|&j| labeling.labels[j] == c) else {
            return false; // empty cluster
        };
        let mut queue = std::collections::VecDeque::from([start as u32]);
        seen[start] = true;
        let mut visited = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v as usize] {
                if labeling.labels[w as usize] == c && !seen[w as usize] {
                    seen[w as usize] = true;
                    visited += 1;
                    queue.push_back(w);
                }
            }
        }
        let total = labeling.labels.iter().filter(|&&l| l == c).count();
        if visited != total {
            return false;
        }
    }
    true
}

/// Average the design columns within each cluster: an n x C matrix whose
/// column c is the mean of the member columns.
pub fn compress(design: ArrayView2<'_, f64>, labeling: &ClusterLabeling) -> Result<Array2<f64>> {
    let (n, p) = design.dim();
    if labeling.labels.len() != p {
        return Err(Error::Dimension(format!(
            "labeling covers {} features but design has {p}",
            labeling.labels.len()
        )));
    }
    let c = labeling.n_clusters;
    let mut counts = vec![0f64; c];
    for &l in &labeling.labels {
        counts[l as usize] += 1.0;
    }
    if counts.iter().any(|&v| v == 0.0) {
        return Err(Error::Dimension("labeling has an empty cluster".into()));
    }
    let mut out = Array2::<f64>::zeros((n, c));
    for (i, row) in design.rows().into_iter().enumerate() {
        let mut acc = out.row_mut(i);
        for (j, &v) in row.iter().enumerate() {
            acc[labeling.labels[j] as usize] += v;
        }
        for (k, a) in acc.iter_mut().enumerate() {
            *a /= counts[k];
        }
    }
    Ok(out)
}

/// Broadcast one value per cluster back to all member features.
pub fn expand(values: ArrayView1<'_, f64>, labeling: &ClusterLabeling) -> Result<Array1<f64>> {
    if values.len() != labeling.n_clusters {
        return Err(Error::Dimension(format!(
            "expected {} cluster values, got {}",
            labeling.n_clusters,
            values.len()
        )));
    }
    Ok(labeling
        .labels
        .iter()
        .map(|&l| values[l as usize])
        .collect())
}
