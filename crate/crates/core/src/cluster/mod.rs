//! Agglomerative clustering of channels over similarity-derived distances,
//! tree cutting, and partition scoring.

mod select;

pub use select::{select_by_cluster, select_random, ChannelSelection, SelectionMethod};

use serde_json::json;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::ssim::SimilarityMatrix;

/// Linkage rule used when two clusters merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    Single,
    Complete,
    Average,
}

impl Linkage {
    pub fn label(&self) -> &'static str {
        match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            other => Err(Error::validation(format!("unknown linkage '{other}'"))),
        }
    }
}

/// Dense symmetric pairwise distance matrix in analysis precision.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Wraps row-major values; only the shape is checked here, the
    /// distance-matrix properties are validated by `agglomerate`.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("distance matrix needs at least one point"));
        }
        if values.len() != n * n {
            return Err(Error::validation(format!(
                "distance matrix for {n} points needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        Ok(DistanceMatrix { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Maps similarity in [-1, 1] to distance 1 - s in [0, 2]. The diagonal
/// maps to exactly zero because the diagonal of every similarity matrix
/// is exactly one.
pub fn to_distance<S: Scalar>(m: &SimilarityMatrix<S>) -> DistanceMatrix {
    let n = m.n();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                values[i * n + j] = 1.0 - m.get(i, j).into_f64();
            }
        }
    }
    DistanceMatrix { n, values }
}

/// One agglomeration step. Node ids 0..n-1 are leaves; the i-th merge
/// creates node n+i. `left < right` always.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Full merge history of an agglomerative run.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n_leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn to_json(&self) -> String {
        let merges: Vec<serde_json::Value> = self
            .merges
            .iter()
            .map(|m| json!([m.left, m.right, m.height, m.size]))
            .collect();
        json!({ "n_leaves": self.n_leaves, "merges": merges }).to_string()
    }

    /// Renders the tree as Newick text with branch lengths derived from
    /// merge heights (leaves sit at height zero).
    pub fn to_newick(&self, names: &[String]) -> Result<String> {
        if names.len() != self.n_leaves {
            return Err(Error::validation(format!(
                "{} names for {} leaves",
                names.len(),
                self.n_leaves
            )));
        }
        if self.merges.is_empty() {
            return Ok(format!("{};", newick_name(&names[0])));
        }
        let root = self.n_leaves + self.merges.len() - 1;
        Ok(format!("{};", self.newick_node(root, names)))
    }

    fn node_height(&self, node: usize) -> f64 {
        if node < self.n_leaves {
            0.0
        } else {
            self.merges[node - self.n_leaves].height
        }
    }

    fn newick_node(&self, node: usize, names: &[String]) -> String {
        if node < self.n_leaves {
            return newick_name(&names[node]);
        }
        let m = &self.merges[node - self.n_leaves];
        let left_len = m.height - self.node_height(m.left);
        let right_len = m.height - self.node_height(m.right);
        format!(
            "({}:{},{}:{})",
            self.newick_node(m.left, names),
            left_len,
            self.newick_node(m.right, names),
            right_len
        )
    }
}

fn newick_name(name: &str) -> String {
    if name.contains(['(', ')', ',', ':', ';', '\'', ' ', '\t', '\n']) {
        format!("'{}'", name.replace('\'', "''"))
    } else {
        name.to_string()
    }
}

/// Flat clustering of channels; labels are contiguous 0..k-1 assigned by
/// ascending smallest member index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Member indices per cluster label, each list ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn to_json(&self, names: &[String]) -> Result<String> {
        if names.len() != self.labels.len() {
            return Err(Error::validation("name count does not match label count"));
        }
        let clusters: Vec<serde_json::Value> = self
            .clusters()
            .iter()
            .map(|members| {
                let member_names: Vec<&str> =
                    members.iter().map(|&i| names[i].as_str()).collect();
                json!({ "indices": members, "names": member_names })
            })
            .collect();
        Ok(json!({ "k": self.k, "labels": self.labels, "clusters": clusters }).to_string())
    }
}

fn validate_distances(d: &DistanceMatrix) -> Result<()> {
    let n = d.n;
    for i in 0..n {
        if d.get(i, i) != 0.0 {
            return Err(Error::validation(format!(
                "distance matrix diagonal must be zero, got {} at {i}",
                d.get(i, i)
            )));
        }
        for j in 0..n {
            let v = d.get(i, j);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::validation(format!(
                    "invalid distance {v} at ({i}, {j})"
                )));
            }
            if d.get(i, j) != d.get(j, i) {
                return Err(Error::validation(format!(
                    "distance matrix is asymmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Bottom-up clustering: repeatedly merges the closest active pair at its
/// linkage distance, breaking ties toward the smallest (left, right) id
/// pair. Runs in O(n^3), which is ample for channel counts.
pub fn agglomerate(d: &DistanceMatrix, linkage: Linkage) -> Result<Dendrogram> {
    validate_distances(d)?;
    let n = d.n;
    let total = 2 * n - 1;

    // Node id doubles as the slot index; merged nodes go inactive.
    let mut dist = vec![0.0_f64; total * total];
    for i in 0..n {
        for j in 0..n {
            dist[i * total + j] = d.get(i, j);
        }
    }
    let mut active: Vec<bool> = vec![false; total];
    let mut size = vec![0usize; total];
    for i in 0..n {
        active[i] = true;
        size[i] = 1;
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n + step {
            if !active[i] {
                continue;
            }
            for j in i + 1..n + step {
                if !active[j] {
                    continue;
                }
                let v = dist[i * total + j];
                if best.map_or(true, |(_, _, b)| v < b) {
                    best = Some((i, j, v));
                }
            }
        }
        let (a, b, height) = best.expect("at least two active clusters remain");

        let new = n + step;
        for k in 0..new {
            if !active[k] || k == a || k == b {
                continue;
            }
            let da = dist[a * total + k];
            let db = dist[b * total + k];
            let v = match linkage {
                Linkage::Single => da.min(db),
                Linkage::Complete => da.max(db),
                Linkage::Average => {
                    let sa = size[a] as f64;
                    let sb = size[b] as f64;
                    (sa * da + sb * db) / (sa + sb)
                }
            };
            dist[new * total + k] = v;
            dist[k * total + new] = v;
        }
        active[a] = false;
        active[b] = false;
        active[new] = true;
        size[new] = size[a] + size[b];
        merges.push(Merge { left: a, right: b, height, size: size[new] });
    }

    Ok(Dendrogram { n_leaves: n, merges })
}

/// Flattens the tree to exactly k clusters by replaying only the first
/// n-k merges.
pub fn cut(t: &Dendrogram, k: usize) -> Result<ClusterAssignment> {
    let n = t.n_leaves;
    if k == 0 || k > n {
        return Err(Error::validation(format!(
            "cannot cut a {n}-leaf tree into {k} clusters"
        )));
    }

    // members[id] holds the leaves under node id once that node exists.
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut consumed = vec![false; n + t.merges.len()];
    let applied = n - k;
    for (i, m) in t.merges[..applied].iter().enumerate() {
        let mut joined = std::mem::take(&mut members[m.left]);
        joined.append(&mut members[m.right]);
        joined.sort_unstable();
        members.push(joined);
        debug_assert_eq!(members.len() - 1, n + i);
        consumed[m.left] = true;
        consumed[m.right] = true;
    }

    let mut clusters: Vec<Vec<usize>> = (0..n + applied)
        .filter(|&id| !consumed[id])
        .map(|id| std::mem::take(&mut members[id]))
        .collect();
    clusters.sort_by_key(|c| c[0]);

    let mut labels = vec![0usize; n];
    for (label, cluster) in clusters.iter().enumerate() {
        for &leaf in cluster {
            labels[leaf] = label;
        }
    }
    Ok(ClusterAssignment { labels, k })
}

/// Mean silhouette score of a flat clustering under the given distances.
/// Singleton clusters contribute zero.
pub fn silhouette_mean(d: &DistanceMatrix, a: &ClusterAssignment) -> Result<f64> {
    if a.n() != d.n() {
        return Err(Error::validation("assignment does not match the distance matrix"));
    }
    let clusters = a.clusters();
    let n = d.n();
    let mut total = 0.0;
    for i in 0..n {
        let own = &clusters[a.labels[i]];
        if own.len() == 1 {
            continue;
        }
        let within: f64 = own.iter().filter(|&&j| j != i).map(|&j| d.get(i, j)).sum();
        let a_i = within / (own.len() - 1) as f64;
        let b_i = clusters
            .iter()
            .enumerate()
            .filter(|(l, _)| *l != a.labels[i])
            .map(|(_, c)| c.iter().map(|&j| d.get(i, j)).sum::<f64>() / c.len() as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a_i.max(b_i);
        if denom > 0.0 {
            total += (b_i - a_i) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Picks the cluster count maximizing mean silhouette over 2..=min(10, n-1),
/// preferring the smallest count on ties. Fewer than three points carry no
/// usable structure signal, so they collapse to a single cluster.
pub fn default_cluster_count(d: &DistanceMatrix, t: &Dendrogram) -> Result<usize> {
    if t.n_leaves() != d.n() {
        return Err(Error::validation("tree does not match the distance matrix"));
    }
    let n = d.n();
    if n < 3 {
        return Ok(1);
    }
    let mut best_k = 2;
    let mut best_score = f64::NEG_INFINITY;
    for k in 2..=10.min(n - 1) {
        let score = silhouette_mean(d, &cut(t, k)?)?;
        if score > best_score {
            best_score = score;
            best_k = k;
        }
    }
    Ok(best_k)
}

/// Chance-corrected agreement between two partitions of the same items;
/// 1 for identical partitions (up to relabeling), near 0 for independent
/// ones. The degenerate 0/0 case counts as perfect agreement.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::validation("partitions must be non-empty and equally sized"));
    }
    let n = a.len();
    let comb2 = |v: usize| (v * v.saturating_sub(1)) as f64 / 2.0;

    let mut joint: std::collections::BTreeMap<(usize, usize), usize> = Default::default();
    let mut rows: std::collections::BTreeMap<usize, usize> = Default::default();
    let mut cols: std::collections::BTreeMap<usize, usize> = Default::default();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }

    let sum_joint: f64 = joint.values().map(|&v| comb2(v)).sum();
    let sum_rows: f64 = rows.values().map(|&v| comb2(v)).sum();
    let sum_cols: f64 = cols.values().map(|&v| comb2(v)).sum();
    let expected = sum_rows * sum_cols / comb2(n);
    let max_index = (sum_rows + sum_cols) / 2.0;
    if max_index == expected {
        return Ok(1.0);
    }
    Ok((sum_joint - expected) / (max_index - expected))
}
