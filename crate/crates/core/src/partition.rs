//! Qubit interaction graphs, size-capped spectral partitioning and the
//! resulting network layout.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codes::{CheckKind, ScheduleTemplate};
use crate::{Error, Result};

const FIEDLER_TOL: f64 = 1e-8;
const FIEDLER_MAX_ITERS: usize = 100_000;

/// Weighted interaction graph over data and ancilla qubits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConnectivityGraph {
    pub vertices: usize,
    /// `(u, v, weight)` with `u < v`, sorted.
    pub edges: Vec<(usize, usize, u32)>,
}

impl ConnectivityGraph {
    pub fn new(vertices: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut w: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for (a, b) in pairs {
            assert!(a != b && a < vertices && b < vertices, "bad edge ({a}, {b})");
            *w.entry((a.min(b), a.max(b))).or_default() += 1;
        }
        ConnectivityGraph {
            vertices,
            edges: w.into_iter().map(|((a, b), w)| (a, b, w)).collect(),
        }
    }

    pub fn neighbors(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.vertices];
        for &(a, b, w) in &self.edges {
            adj[a].push((b, w as f64));
            adj[b].push((a, w as f64));
        }
        adj
    }

    /// Total weight of edges with endpoints in different clusters.
    pub fn cut_weight(&self, cluster_of: &[usize]) -> u64 {
        self.edges
            .iter()
            .filter(|&&(a, b, _)| cluster_of[a] != cluster_of[b])
            .map(|&(_, _, w)| w as u64)
            .sum()
    }
}

/// One vertex per qubit; each two-qubit interaction in one schedule period
/// adds one unit of weight to its pair.
pub fn build_connectivity_graph(schedule: &ScheduleTemplate) -> ConnectivityGraph {
    let mut pairs = Vec::new();
    for checks in &schedule.sub_rounds {
        for &c in checks {
            let check = &schedule.checks[c];
            match check.kind {
                CheckKind::Pair { .. } => pairs.push((check.paulis[0].qubit, check.paulis[1].qubit)),
                CheckKind::Stabilizer { ancilla, .. } => {
                    pairs.extend(check.data_qubits().map(|q| (q, ancilla)))
                }
            }
        }
    }
    ConnectivityGraph::new(schedule.total_qubits(), pairs)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub cluster_of: Vec<usize>,
    pub clusters: Vec<Vec<usize>>,
}

impl Partition {
    pub fn from_clusters(vertices: usize, clusters: Vec<Vec<usize>>) -> Result<Self> {
        let mut cluster_of = vec![usize::MAX; vertices];
        for (i, c) in clusters.iter().enumerate() {
            for &v in c {
                if v >= vertices || cluster_of[v] != usize::MAX {
                    return Err(Error::Partition(format!("vertex {v} is out of range or repeated")));
                }
                cluster_of[v] = i;
            }
        }
        if let Some(v) = cluster_of.iter().position(|&c| c == usize::MAX) {
            return Err(Error::Partition(format!("vertex {v} is in no cluster")));
        }
        Ok(Partition { cluster_of, clusters })
    }

    pub fn max_cluster_size(&self) -> usize {
        self.clusters.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Recursive spectral bisection until every cluster has at most `n_q`
/// vertices. Each split orders the cluster's vertices by their Fiedler vector
/// entry (ties by vertex id) and cuts at the median. Disconnected pieces are
/// split into their components first.
pub fn spectral_partition(graph: &ConnectivityGraph, n_q: usize, seed: u64) -> Result<Partition> {
    if n_q < 2 {
        return Err(Error::Partition(format!("cluster size bound must be at least 2, got {n_q}")));
    }
    let adj = graph.neighbors();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clusters = Vec::new();
    let mut stack: Vec<Vec<usize>> = vec![(0..graph.vertices).collect()];
    while let Some(set) = stack.pop() {
        if set.is_empty() {
            continue;
        }
        if set.len() <= n_q {
            clusters.push(set);
            continue;
        }
        let comps = components(&adj, &set);
        if comps.len() > 1 {
            stack.extend(comps.into_iter().rev());
            continue;
        }
        let (left, right) = bisect(&adj, &set, &mut rng);
        stack.push(right);
        stack.push(left);
    }
    Partition::from_clusters(graph.vertices, clusters)
}

fn components(adj: &[Vec<(usize, f64)>], set: &[usize]) -> Vec<Vec<usize>> {
    let inside: BTreeSet<usize> = set.iter().copied().collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &s in set {
        if !seen.insert(s) {
            continue;
        }
        let mut comp = vec![s];
        let mut i = 0;
        while i < comp.len() {
            for &(u, _) in &adj[comp[i]] {
                if inside.contains(&u) && seen.insert(u) {
                    comp.push(u);
                }
            }
            i += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn bisect(adj: &[Vec<(usize, f64)>], set: &[usize], rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let f = fiedler_vector(adj, set, rng);
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| f[a].total_cmp(&f[b]).then(set[a].cmp(&set[b])));
    let half = set.len() / 2;
    let mut left: Vec<usize> = order[..half].iter().map(|&i| set[i]).collect();
    let mut right: Vec<usize> = order[half..].iter().map(|&i| set[i]).collect();
    left.sort_unstable();
    right.sort_unstable();
    (left, right)
}

/// Eigenvector of the second-smallest eigenvalue of `L = D − W` restricted to
/// `set`, by power iteration on `σI − L` with the constant vector projected
/// out.
pub fn fiedler_vector(adj: &[Vec<(usize, f64)>], set: &[usize], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = set.len();
    let local: BTreeMap<usize, usize> = set.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let nbrs: Vec<Vec<(usize, f64)>> = set
        .iter()
        .map(|&v| {
            adj[v]
                .iter()
                .filter_map(|&(u, w)| local.get(&u).map(|&j| (j, w)))
                .collect()
        })
        .collect();
    let degree: Vec<f64> = nbrs.iter().map(|l| l.iter().map(|x| x.1).sum()).collect();
    let sigma = 2.0 * degree.iter().cloned().fold(0.0, f64::max) + 1.0;
    let laplacian = |v: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let mut acc = degree[i] * v[i];
            for &(j, w) in &nbrs[i] {
                acc -= w * v[j];
            }
            out[i] = acc;
        }
    };
    let normalize = |v: &mut [f64]| {
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
    };
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    normalize(&mut v);
    let mut lv = vec![0.0; n];
    for _ in 0..FIEDLER_MAX_ITERS {
        laplacian(&v, &mut lv);
        let lambda: f64 = v.iter().zip(&lv).map(|(a, b)| a * b).sum();
        let residual = v
            .iter()
            .zip(&lv)
            .map(|(a, b)| (b - lambda * a).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual < FIEDLER_TOL {
            break;
        }
        for i in 0..n {
            v[i] = sigma * v[i] - lv[i];
        }
        normalize(&mut v);
    }
    v
}

/// How a check spanning several clusters is implemented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mediation {
    Local,
    /// One Bell pair between the two participating clusters.
    Bell,
    /// A GHZ state over `N` clusters fused from `N − 1` Bell pairs.
    Ghz(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckPlacement {
    pub check: usize,
    /// Participating clusters, sorted.
    pub clusters: Vec<usize>,
    /// Cluster holding the most data qubits of the check (lowest id on ties);
    /// the hub of GHZ fusion.
    pub root: usize,
    pub mediation: Mediation,
}

impl CheckPlacement {
    /// Bell pairs `(root, other)` the check consumes.
    pub fn bell_pairs(&self) -> Vec<(usize, usize)> {
        match self.mediation {
            Mediation::Local => Vec::new(),
            _ => self
                .clusters
                .iter()
                .filter(|&&c| c != self.root)
                .map(|&c| (self.root, c))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NetworkLayout {
    pub n_q: usize,
    pub qpi_count: usize,
    pub cluster_of: Vec<usize>,
    pub clusters: Vec<Vec<usize>>,
    /// One entry per schedule check, indexed by check id.
    pub placements: Vec<CheckPlacement>,
    /// `bell_demand[s][c]`: Bell halves cluster `c` needs in sub-round `s`.
    pub bell_demand: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

impl NetworkLayout {
    pub fn nonlocal_checks(&self) -> impl Iterator<Item = &CheckPlacement> {
        self.placements.iter().filter(|p| p.mediation != Mediation::Local)
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }
}

pub fn qpi_count(n_q: usize) -> usize {
    let r = n_q.isqrt();
    if r * r == n_q { r } else { r + 1 }
}

/// Classifies every check as local, Bell- or GHZ-mediated and tallies Bell
/// demand. A stabilizer check's participants are the clusters of its data
/// qubits and of its ancilla.
pub fn make_layout(partition: &Partition, schedule: &ScheduleTemplate, n_q: usize) -> Result<NetworkLayout> {
    if partition.cluster_of.len() != schedule.total_qubits() {
        return Err(Error::Partition(format!(
            "partition covers {} qubits but the schedule has {}",
            partition.cluster_of.len(),
            schedule.total_qubits()
        )));
    }
    let k = partition.clusters.len();
    let mut placements = Vec::with_capacity(schedule.checks.len());
    for (id, check) in schedule.checks.iter().enumerate() {
        let mut data_count: BTreeMap<usize, usize> = BTreeMap::new();
        for q in check.data_qubits() {
            *data_count.entry(partition.cluster_of[q]).or_default() += 1;
        }
        let mut clusters: BTreeSet<usize> = data_count.keys().copied().collect();
        if let Some(a) = check.ancilla() {
            clusters.insert(partition.cluster_of[a]);
        }
        let root = clusters
            .iter()
            .copied()
            .max_by_key(|c| (data_count.get(c).copied().unwrap_or(0), std::cmp::Reverse(*c)))
            .unwrap();
        let mediation = match clusters.len() {
            1 => Mediation::Local,
            2 => Mediation::Bell,
            n => Mediation::Ghz(n),
        };
        placements.push(CheckPlacement {
            check: id,
            clusters: clusters.into_iter().collect(),
            root,
            mediation,
        });
    }
    let qpi = qpi_count(n_q);
    let mut warnings = Vec::new();
    let mut bell_demand = vec![vec![0; k]; schedule.period()];
    for (s, checks) in schedule.sub_rounds.iter().enumerate() {
        for &c in checks {
            for (a, b) in placements[c].bell_pairs() {
                bell_demand[s][a] += 1;
                bell_demand[s][b] += 1;
            }
        }
        for (c, &d) in bell_demand[s].iter().enumerate() {
            if d > qpi {
                warnings.push(format!(
                    "cluster {c} needs {d} Bell halves in sub-round {s} with {qpi} interfaces; generation is split into batches"
                ));
            }
        }
    }
    for (c, members) in partition.clusters.iter().enumerate() {
        if members.len() > n_q {
            warnings.push(format!("cluster {c} holds {} qubits, above n_q = {n_q}", members.len()));
        }
    }
    Ok(NetworkLayout {
        n_q,
        qpi_count: qpi,
        cluster_of: partition.cluster_of.clone(),
        clusters: partition.clusters.clone(),
        placements,
        bell_demand,
        warnings,
    })
}

/// Cluster with the most data qubits, lowest id on ties.
pub fn select_largest_node(partition: &Partition, schedule: &ScheduleTemplate) -> Result<usize> {
    if partition.clusters.is_empty() {
        return Err(Error::Partition("empty partition".into()));
    }
    let counts: Vec<usize> = partition
        .clusters
        .iter()
        .map(|c| c.iter().filter(|&&q| q < schedule.data_qubits).count())
        .collect();
    Ok(largest_index(&counts))
}

fn largest_index(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

#[derive(Serialize)]
struct ClusterSummary {
    id: usize,
    size: usize,
    data_qubits: usize,
    ancillas: usize,
}

#[derive(Serialize)]
struct PartitionExport<'a> {
    n_q: usize,
    cut_weight: u64,
    cluster_of: &'a [usize],
    clusters: Vec<ClusterSummary>,
}

/// Pretty JSON: `cluster_of` plus a per-cluster summary.
pub fn export_partition(
    partition: &Partition,
    schedule: &ScheduleTemplate,
    graph: &ConnectivityGraph,
    n_q: usize,
) -> Result<String> {
    let clusters = partition
        .clusters
        .iter()
        .enumerate()
        .map(|(id, c)| {
            let data_qubits = c.iter().filter(|&&q| q < schedule.data_qubits).count();
            ClusterSummary {
                id,
                size: c.len(),
                data_qubits,
                ancillas: c.len() - data_qubits,
            }
        })
        .collect();
    Ok(serde_json::to_string_pretty(&PartitionExport {
        n_q,
        cut_weight: graph.cut_weight(&partition.cluster_of),
        cluster_of: &partition.cluster_of,
        clusters,
    })?)
}
