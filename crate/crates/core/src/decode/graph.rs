use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use super::dem::{xor_probability, DetectorErrorModel};
use crate::{Error, Result};

/// Integer weight units per unit of log-likelihood ratio.
pub const WEIGHT_SCALE: f64 = 1000.0;

pub const DEFAULT_MAX_DROPPED_FRACTION: f64 = 1e-3;

/// `ln((1-p)/p)`, clamped to zero for `p >= 0.5`.
pub fn edge_weight(p: f64) -> f64 {
    if p >= 0.5 {
        0.0
    } else {
        ((1.0 - p) / p).ln()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchingEdge {
    pub u: usize,
    /// A detector, or a boundary node (index ≥ `num_detectors`).
    pub v: usize,
    pub p: f64,
    pub weight: f64,
    pub observables: u64,
}

impl MatchingEdge {
    pub fn int_weight(&self) -> u32 {
        (self.weight * WEIGHT_SCALE).round().clamp(0.0, 1e6) as u32
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchingGraph {
    pub num_detectors: usize,
    pub num_observables: usize,
    /// Detectors followed by one boundary node per sector that has one.
    pub num_nodes: usize,
    pub edges: Vec<MatchingEdge>,
    /// Sector id per node.
    pub sector: Vec<usize>,
    /// Boundary node of each sector, if any.
    pub boundary: Vec<Option<usize>>,
    /// Total probability of all mechanisms fed in.
    pub total_probability: f64,
    /// Probability of mechanisms that could not be decomposed.
    pub dropped_probability: f64,
    pub dropped_mechanisms: usize,
    /// Hyperedges that were decomposed into existing edges.
    pub decomposed_mechanisms: usize,
}

/// Search steps allowed per hyperedge before it is declared undecomposable.
const DECOMPOSE_BUDGET: usize = 4096;

/// Edge key: (u, v) with `v == None` for a boundary edge.
type Key = (u32, Option<u32>);

fn key_of(dets: &[u32]) -> Key {
    match dets {
        [a] => (*a, None),
        [a, b] => (*a, Some(*b)),
        _ => unreachable!(),
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// Greedy decomposition of `dets` into existing edges: the first edge in
/// detector order that splits off and leaves a decomposable remainder wins.
/// Candidates whose observable XOR matches `obs` are preferred.
fn decompose(
    dets: &[u32],
    obs: u64,
    edges: &BTreeMap<Key, (f64, u64)>,
    require_obs: bool,
    budget: &mut usize,
) -> Option<Vec<Key>> {
    if dets.is_empty() {
        return (!require_obs || obs == 0).then(Vec::new);
    }
    if *budget == 0 {
        return None;
    }
    *budget -= 1;
    for i in 0..dets.len() {
        for j in i + 1..dets.len() {
            let k = (dets[i], Some(dets[j]));
            if let Some(&(_, o)) = edges.get(&k) {
                let rest: Vec<u32> = dets
                    .iter()
                    .enumerate()
                    .filter(|&(t, _)| t != i && t != j)
                    .map(|(_, &d)| d)
                    .collect();
                if let Some(mut r) = decompose(&rest, obs ^ o, edges, require_obs, budget) {
                    r.push(k);
                    return Some(r);
                }
            }
        }
    }
    for i in 0..dets.len() {
        let k = (dets[i], None);
        if let Some(&(_, o)) = edges.get(&k) {
            let rest: Vec<u32> = dets
                .iter()
                .enumerate()
                .filter(|&(t, _)| t != i)
                .map(|(_, &d)| d)
                .collect();
            if let Some(mut r) = decompose(&rest, obs ^ o, edges, require_obs, budget) {
                r.push(k);
                return Some(r);
            }
        }
    }
    None
}

/// [`to_matching_graph_with`] with the default dropped-mass threshold.
pub fn to_matching_graph(dem: &DetectorErrorModel) -> Result<MatchingGraph> {
    to_matching_graph_with(dem, DEFAULT_MAX_DROPPED_FRACTION)
}

/// Reduces `dem` to a graph. Mechanisms with one or two detectors become
/// edges (parallel edges merged, keeping the observable mask of the likelier
/// one); larger mechanisms are split into existing edges. Fails when the
/// undecomposable share of total probability exceeds `max_dropped_fraction`.
pub fn to_matching_graph_with(dem: &DetectorErrorModel, max_dropped_fraction: f64) -> Result<MatchingGraph> {
    let nd = dem.num_detectors;
    let mut edges: BTreeMap<Key, (f64, u64)> = BTreeMap::new();
    let mut best_part: HashMap<Key, f64> = HashMap::new();
    let mut total = 0.0;
    let mut merge = |edges: &mut BTreeMap<Key, (f64, u64)>, k: Key, p: f64, obs: u64| {
        let e = edges.entry(k).or_insert((0.0, obs));
        let best = best_part.entry(k).or_insert(0.0);
        if p > *best {
            *best = p;
            e.1 = obs;
        }
        e.0 = xor_probability(e.0, p);
    };
    for m in &dem.mechanisms {
        if m.detectors.iter().any(|&d| d as usize >= nd) {
            return Err(Error::Decode(format!("mechanism references detector beyond {nd}")));
        }
        total += m.p;
        if (1..=2).contains(&m.detectors.len()) {
            merge(&mut edges, key_of(&m.detectors), m.p, m.observables);
        }
    }

    let mut hyper: Vec<usize> = (0..dem.mechanisms.len())
        .filter(|&i| dem.mechanisms[i].detectors.len() > 2)
        .collect();
    hyper.sort_by(|&a, &b| {
        let (ma, mb) = (&dem.mechanisms[a], &dem.mechanisms[b]);
        mb.detectors
            .len()
            .cmp(&ma.detectors.len())
            .then_with(|| ma.detectors.cmp(&mb.detectors))
            .then_with(|| ma.observables.cmp(&mb.observables))
    });
    let base = edges.clone();
    let mut dropped = 0.0;
    let mut dropped_n = 0;
    let mut decomposed = 0;
    for i in hyper {
        let m = &dem.mechanisms[i];
        let parts = decompose(&m.detectors, m.observables, &base, true, &mut DECOMPOSE_BUDGET.clone())
            .or_else(|| decompose(&m.detectors, m.observables, &base, false, &mut DECOMPOSE_BUDGET.clone()));
        match parts {
            Some(parts) => {
                decomposed += 1;
                for k in parts {
                    let obs = base[&k].1;
                    merge(&mut edges, k, m.p, obs);
                }
            }
            None => {
                dropped += m.p;
                dropped_n += 1;
            }
        }
    }
    if total > 0.0 && dropped / total > max_dropped_fraction {
        return Err(Error::Decode(format!(
            "{dropped_n} undecomposable mechanisms carry {:.3e} of total probability {:.3e} (limit {max_dropped_fraction:e})",
            dropped, total
        )));
    }

    // Sectors: connected components of detector-detector edges.
    let mut dsu = Dsu((0..nd).collect());
    for k in edges.keys() {
        if let (a, Some(b)) = *k {
            dsu.union(a as usize, b as usize);
        }
    }
    let mut sector_id: HashMap<usize, usize> = HashMap::new();
    let mut sector = Vec::with_capacity(nd);
    for d in 0..nd {
        let r = dsu.find(d);
        let n = sector_id.len();
        sector.push(*sector_id.entry(r).or_insert(n));
    }
    let mut boundary = vec![None; sector_id.len()];
    let mut num_nodes = nd;
    for k in edges.keys() {
        if let (a, None) = *k {
            let s = sector[a as usize];
            if boundary[s].is_none() {
                boundary[s] = Some(num_nodes);
                sector.push(s);
                num_nodes += 1;
            }
        }
    }

    let out_edges = edges
        .into_iter()
        .map(|((a, b), (p, obs))| {
            let v = match b {
                Some(b) => b as usize,
                None => boundary[sector[a as usize]].expect("assigned above"),
            };
            MatchingEdge {
                u: a as usize,
                v,
                p,
                weight: edge_weight(p),
                observables: obs,
            }
        })
        .collect();
    Ok(MatchingGraph {
        num_detectors: nd,
        num_observables: dem.num_observables,
        num_nodes,
        edges: out_edges,
        sector,
        boundary,
        total_probability: total,
        dropped_probability: dropped,
        dropped_mechanisms: dropped_n,
        decomposed_mechanisms: decomposed,
    })
}

impl MatchingGraph {
    /// Human-readable edge list for debugging.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "# nodes {} detectors {} sectors {} dropped {:e}",
            self.num_nodes,
            self.num_detectors,
            self.boundary.len(),
            self.dropped_probability
        )
        .unwrap();
        for e in &self.edges {
            let v = if e.v >= self.num_detectors {
                format!("B{}", self.sector[e.v])
            } else {
                e.v.to_string()
            };
            writeln!(s, "{} {} p={:e} w={:.4} obs={:#x}", e.u, v, e.p, e.weight, e.observables).unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::dem::Mechanism;

    fn mech(p: f64, d: &[u32], o: u64) -> Mechanism {
        Mechanism {
            p,
            detectors: d.to_vec(),
            observables: o,
        }
    }

    #[test]
    fn weight_of_one_percent() {
        let dem = DetectorErrorModel {
            mechanisms: vec![mech(0.01, &[0, 1], 0)],
            num_detectors: 2,
            num_observables: 0,
        };
        let g = to_matching_graph(&dem).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert!((g.edges[0].weight - 99f64.ln()).abs() < 1e-12);
        assert!((g.edges[0].weight - 4.595).abs() < 1e-3);
    }

    #[test]
    fn empty() {
        let g = to_matching_graph(&DetectorErrorModel::default()).unwrap();
        assert!(g.edges.is_empty());
        assert_eq!(g.num_nodes, 0);
    }

    #[test]
    fn hyperedge_split_and_boundaries() {
        let dem = DetectorErrorModel {
            mechanisms: vec![
                mech(0.01, &[0, 1], 0),
                mech(0.01, &[2, 3], 1),
                mech(0.02, &[4], 0),
                mech(0.001, &[0, 1, 2, 3], 1),
            ],
            num_detectors: 5,
            num_observables: 1,
        };
        let g = to_matching_graph(&dem).unwrap();
        assert_eq!(g.decomposed_mechanisms, 1);
        assert_eq!(g.dropped_mechanisms, 0);
        assert_eq!(g.boundary.iter().flatten().count(), 1);
        assert_eq!(g.num_nodes, 6);
        let e01 = g.edges.iter().find(|e| e.u == 0 && e.v == 1).unwrap();
        assert!((e01.p - xor_probability(0.01, 0.001)).abs() < 1e-15);
    }

    #[test]
    fn dropped_mass_limit() {
        let dem = DetectorErrorModel {
            mechanisms: vec![mech(0.01, &[0, 1], 0), mech(0.01, &[0, 1, 2], 0)],
            num_detectors: 3,
            num_observables: 0,
        };
        assert!(to_matching_graph(&dem).is_err());
        let g = to_matching_graph_with(&dem, 0.6).unwrap();
        assert_eq!(g.dropped_mechanisms, 1);
    }
}
