use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use rayon::prelude::*;

use super::blossom::{solve, solve_perfect};
use super::graph::MatchingGraph;
use crate::sim::ShotOutcomes;
use crate::{Error, Result};

const UNREACHABLE: u32 = u32::MAX;

/// Boundary cost of a defect that cannot reach the boundary; large enough
/// that pairing it is always preferred.
const NO_BOUNDARY: i64 = 1 << 40;

/// Nearest defects per defect offered to the first matching attempt.
const CANDIDATES: usize = 16;

/// Shortest-path distances and path observable masks from one node to every
/// node of its sector, indexed by position within the sector.
struct Row {
    dist: Vec<u32>,
    obs: Vec<u64>,
}

/// Minimum-weight perfect matching decoder over a [`MatchingGraph`].
/// Shortest-path rows are computed on first use and shared between threads.
pub struct Decoder {
    num_detectors: usize,
    sector: Vec<usize>,
    /// Position of each node inside its sector.
    local: Vec<usize>,
    members: Vec<Vec<usize>>,
    boundary: Vec<Option<usize>>,
    /// CSR adjacency: (neighbor, integer weight, observable mask).
    offsets: Vec<usize>,
    adj: Vec<(u32, u32, u64)>,
    rows: Vec<OnceLock<Row>>,
}

impl Decoder {
    pub fn new(graph: &MatchingGraph) -> Self {
        let n = graph.num_nodes;
        let nsec = graph.boundary.len();
        let mut members = vec![Vec::new(); nsec];
        let mut local = vec![0; n];
        for v in 0..n {
            let s = graph.sector[v];
            local[v] = members[s].len();
            members[s].push(v);
        }
        let mut deg = vec![0usize; n + 1];
        for e in &graph.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        let mut offsets = vec![0; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + deg[v];
        }
        let mut fill = offsets.clone();
        let mut adj = vec![(0, 0, 0); offsets[n]];
        for e in &graph.edges {
            let w = e.int_weight();
            adj[fill[e.u]] = (e.v as u32, w, e.observables);
            fill[e.u] += 1;
            adj[fill[e.v]] = (e.u as u32, w, e.observables);
            fill[e.v] += 1;
        }
        for v in 0..n {
            adj[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Decoder {
            num_detectors: graph.num_detectors,
            sector: graph.sector.clone(),
            local,
            members,
            boundary: graph.boundary.clone(),
            offsets,
            adj,
            rows: (0..n).map(|_| OnceLock::new()).collect(),
        }
    }

    fn row(&self, v: usize) -> &Row {
        self.rows[v].get_or_init(|| self.dijkstra(v))
    }

    /// Ties between equal-length paths go to the path reached through the
    /// smaller predecessor, since nodes are settled in (distance, id) order and
    /// only strict improvements relabel.
    fn dijkstra(&self, src: usize) -> Row {
        let sec = &self.members[self.sector[src]];
        let mut dist = vec![UNREACHABLE; sec.len()];
        let mut obs = vec![0u64; sec.len()];
        let mut heap = BinaryHeap::new();
        dist[self.local[src]] = 0;
        heap.push(Reverse((0u32, src as u32)));
        while let Some(Reverse((d, v))) = heap.pop() {
            let v = v as usize;
            let lv = self.local[v];
            if d > dist[lv] {
                continue;
            }
            // Boundary nodes terminate paths: two boundary edges never chain.
            if Some(v) == self.boundary[self.sector[v]] && v != src {
                continue;
            }
            for &(u, w, o) in &self.adj[self.offsets[v]..self.offsets[v + 1]] {
                let lu = self.local[u as usize];
                let nd = d.saturating_add(w);
                if nd < dist[lu] {
                    dist[lu] = nd;
                    obs[lu] = obs[lv] ^ o;
                    heap.push(Reverse((nd, u)));
                }
            }
        }
        Row { dist, obs }
    }

    fn pair(&self, a: usize, b: usize) -> (u32, u64) {
        let r = self.row(a);
        let l = self.local[b];
        (r.dist[l], r.obs[l])
    }

    /// Predicted observable flips for one shot given its fired detectors.
    pub fn decode(&self, defects: &[u32]) -> Result<u64> {
        self.decode_with_weight(defects).map(|r| r.0)
    }

    /// Like [`Decoder::decode`], also returning the total integer weight of
    /// the chosen matching.
    pub fn decode_with_weight(&self, defects: &[u32]) -> Result<(u64, u64)> {
        let mut by_sector: Vec<(usize, usize)> = defects
            .iter()
            .map(|&d| {
                let d = d as usize;
                if d >= self.num_detectors {
                    Err(Error::Decode(format!("detector {d} out of range")))
                } else {
                    Ok((self.sector[d], d))
                }
            })
            .collect::<Result<_>>()?;
        by_sector.sort_unstable();
        let mut mask = 0u64;
        let mut weight = 0u64;
        let mut i = 0;
        while i < by_sector.len() {
            let s = by_sector[i].0;
            let mut j = i;
            while j < by_sector.len() && by_sector[j].0 == s {
                j += 1;
            }
            let ds: Vec<usize> = by_sector[i..j].iter().map(|x| x.1).collect();
            let (m, w) = self.decode_sector(s, &ds)?;
            mask ^= m;
            weight += w;
            i = j;
        }
        Ok((mask, weight))
    }

    fn decode_sector(&self, s: usize, ds: &[usize]) -> Result<(u64, u64)> {
        let n = ds.len();
        let b = self.boundary[s];
        if b.is_none() && n % 2 == 1 {
            return Err(Error::Decode(format!(
                "odd number of defects ({n}) in sector {s} without boundary"
            )));
        }
        let to_b = |v: usize| -> (u32, u64) {
            match b {
                Some(b) => self.pair(v, b),
                None => (UNREACHABLE, 0),
            }
        };
        match (n, b) {
            (0, _) => return Ok((0, 0)),
            (1, Some(_)) => {
                let (d, o) = to_b(ds[0]);
                if d == UNREACHABLE {
                    return Err(Error::Decode(format!("detector {} cannot reach boundary", ds[0])));
                }
                return Ok((o, d as u64));
            }
            (2, _) => {
                let (d, o) = self.pair(ds[0], ds[1]);
                let (da, oa) = to_b(ds[0]);
                let (db, ob) = to_b(ds[1]);
                let viab = da as u64 + db as u64;
                if d != UNREACHABLE && (d as u64) <= viab {
                    return Ok((o, d as u64));
                }
                if da == UNREACHABLE || db == UNREACHABLE {
                    return Err(Error::Decode(format!("defects {:?} cannot be paired", ds)));
                }
                return Ok((oa ^ ob, viab));
            }
            _ => {}
        }

        // With a boundary, every defect left unmatched goes to it, so the
        // cheapest correction is a maximum-weight matching whose pair weights
        // are the savings bd(x) + bd(y) - d(x, y). Without one it is a
        // minimum-weight perfect matching. Pairs that save nothing are never
        // needed.
        let has_b = b.is_some();
        let cost_b: Vec<i64> = ds
            .iter()
            .map(|&v| match to_b(v).0 {
                UNREACHABLE => NO_BOUNDARY,
                d => d as i64,
            })
            .collect();
        let mut dist = Vec::with_capacity(n * n);
        for &x in ds {
            let r = self.row(x);
            dist.extend(ds.iter().map(|&y| (r.dist[self.local[y]], r.obs[self.local[y]])));
        }
        let gain = |x: usize, y: usize| -> Option<i64> {
            let d = dist[x * n + y].0;
            if d == UNREACHABLE {
                return None;
            }
            if has_b {
                let g = cost_b[x] + cost_b[y] - d as i64;
                (g > 0).then_some(g)
            } else {
                Some(d as i64)
            }
        };
        // Solve on the nearest candidates first, then add every omitted edge
        // with negative reduced cost until the dual certificate covers all
        // useful pairs.
        let mut included = vec![false; n * n];
        let mut near: Vec<(u32, usize)> = Vec::with_capacity(n);
        for x in 0..n {
            near.clear();
            near.extend(
                (0..n)
                    .filter(|&y| y != x && gain(x, y).is_some())
                    .map(|y| (dist[x * n + y].0, y)),
            );
            if near.len() > CANDIDATES {
                near.select_nth_unstable(CANDIDATES);
                near.truncate(CANDIDATES);
            }
            for &(_, y) in &near {
                included[x.min(y) * n + x.max(y)] = true;
            }
        }
        let mut dense = false;
        let sol = loop {
            let mut edges: Vec<(usize, usize, i64)> = Vec::new();
            for x in 0..n {
                for y in x + 1..n {
                    if included[x * n + y] {
                        edges.push((x, y, gain(x, y).expect("candidate")));
                    }
                }
            }
            // Perfect matching: maximize top - d over maximum-cardinality
            // matchings.
            let top = if has_b {
                0
            } else {
                edges.iter().map(|e| e.2).max().unwrap_or(0) + 1
            };
            let weight = |g: i64| if has_b { g } else { top - g };
            for e in edges.iter_mut() {
                e.2 = weight(e.2);
            }
            let sol = if has_b { solve(n, &edges, false) } else { solve_perfect(n, &edges) };
            if !has_b && !sol.is_perfect() {
                if dense {
                    return Err(Error::Decode(format!(
                        "no perfect matching for {n} defects in sector {s}"
                    )));
                }
                dense = true;
                for x in 0..n {
                    for y in x + 1..n {
                        included[x * n + y] = gain(x, y).is_some();
                    }
                }
                continue;
            }
            let mut added = false;
            for x in 0..n {
                for y in x + 1..n {
                    let i = x * n + y;
                    if included[i] {
                        continue;
                    }
                    if let Some(g) = gain(x, y) {
                        if sol.reduced_cost(x, y, weight(g)) < 0 {
                            included[i] = true;
                            added = true;
                        }
                    }
                }
            }
            if !added {
                break sol;
            }
        };
        let mut mask = 0;
        let mut weight = 0;
        for x in 0..n {
            match sol.mate[x] {
                None => {
                    if cost_b[x] == NO_BOUNDARY {
                        return Err(Error::Decode(format!("detector {} cannot be matched", ds[x])));
                    }
                    mask ^= to_b(ds[x]).1;
                    weight += cost_b[x] as u64;
                }
                Some(y) if x < y => {
                    mask ^= dist[x * n + y].1;
                    weight += dist[x * n + y].0 as u64;
                }
                Some(_) => {}
            }
        }
        Ok((mask, weight))
    }
}

/// Decodes every shot, in parallel over shots.
pub fn mwpm_decode(graph: &MatchingGraph, outcomes: &ShotOutcomes) -> Result<Vec<u64>> {
    let dec = Decoder::new(graph);
    decode_outcomes(&dec, outcomes)
}

pub fn decode_outcomes(dec: &Decoder, outcomes: &ShotOutcomes) -> Result<Vec<u64>> {
    if outcomes.num_detectors != dec.num_detectors {
        return Err(Error::Decode(format!(
            "outcomes have {} detectors, graph has {}",
            outcomes.num_detectors, dec.num_detectors
        )));
    }
    let fired = outcomes.fired_per_shot();
    fired.par_iter().map(|d| dec.decode(d)).collect()
}

/// Logical error tallies.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Score {
    pub per_observable: Vec<usize>,
    /// Shots where any observable was mispredicted.
    pub any: usize,
    pub shots: usize,
}

pub fn score_predictions(predictions: &[u64], outcomes: &ShotOutcomes) -> Result<Score> {
    if predictions.len() != outcomes.shots {
        return Err(Error::Decode(format!(
            "{} predictions for {} shots",
            predictions.len(),
            outcomes.shots
        )));
    }
    let actual = outcomes.observable_masks();
    let k = outcomes.num_observables;
    let mut score = Score {
        per_observable: vec![0; k],
        any: 0,
        shots: outcomes.shots,
    };
    for (p, a) in predictions.iter().zip(&actual) {
        let diff = p ^ a;
        if diff != 0 {
            score.any += 1;
        }
        for (i, c) in score.per_observable.iter_mut().enumerate() {
            *c += (diff >> i & 1) as usize;
        }
    }
    Ok(score)
}
