use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::gf2::{self, BitVec, EchelonBasis};
use crate::{Error, Result};

/// An edge `(u, v)` carrying a weight-two check of the given color.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, u8)", into = "(usize, usize, u8)")]
pub struct FloquetEdge {
    pub u: usize,
    pub v: usize,
    pub color: u8,
}

impl From<(usize, usize, u8)> for FloquetEdge {
    fn from((u, v, color): (usize, usize, u8)) -> Self {
        FloquetEdge { u, v, color }
    }
}

impl From<FloquetEdge> for (usize, usize, u8) {
    fn from(e: FloquetEdge) -> Self {
        (e.u, e.v, e.color)
    }
}

/// How one logical observable is tracked through the check schedule.
///
/// The logical starts as Z on the vertices of odd degree in `path_edges`.
/// Before the sub-round of color `c` it is multiplied by the checks on
/// `phase_updates[c]`, which were measured in the preceding sub-round. There
/// is no update before the very first sub-round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub path_edges: Vec<usize>,
    pub phase_updates: [Vec<usize>; 3],
    pub final_basis: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloquetLattice {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<usize>,
    pub genus: usize,
    pub vertices: usize,
    pub edges: Vec<FloquetEdge>,
    pub faces: Vec<Vec<usize>>,
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
}

impl FloquetLattice {
    /// Number of logical qubits of a Floquet code on a closed surface.
    pub fn k(&self) -> usize {
        2 * self.genus
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Lattice(m));
        let mut colors_at: Vec<Vec<u8>> = vec![Vec::new(); self.vertices];
        let mut seen = BTreeSet::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.u >= self.vertices || e.v >= self.vertices {
                return bad(format!("edge {i} references a missing vertex"));
            }
            if e.u == e.v {
                return bad(format!("edge {i} is a self-loop"));
            }
            if e.color > 2 {
                return bad(format!("edge {i} has color {} outside 0..3", e.color));
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return bad(format!("edge {i} duplicates another edge"));
            }
            colors_at[e.u].push(e.color);
            colors_at[e.v].push(e.color);
        }
        for (v, cs) in colors_at.iter().enumerate() {
            if cs.len() != 3 {
                return bad(format!("vertex {v} has degree {}, expected 3", cs.len()));
            }
            let distinct: BTreeSet<u8> = cs.iter().copied().collect();
            if distinct.len() != 3 {
                return bad(format!("improper coloring: vertex {v} has repeated edge color"));
            }
        }
        let mut uses = vec![0usize; self.edges.len()];
        for (fi, face) in self.faces.iter().enumerate() {
            self.face_vertices(fi)?;
            for &e in face {
                uses[e] += 1;
            }
        }
        if let Some(e) = uses.iter().position(|&u| u != 2) {
            return bad(format!("edge {e} borders {} face sides, expected 2", uses[e]));
        }
        let chi = self.euler_characteristic();
        if chi != 2 - 2 * self.genus as i64 {
            return bad(format!(
                "Euler characteristic {chi} inconsistent with genus {}",
                self.genus
            ));
        }
        if let (Some(base), Some(f)) = (self.base_n, self.f) {
            if self.vertices != base * f * f {
                return bad(format!(
                    "vertex count {} != base_n · f² = {}",
                    self.vertices,
                    base * f * f
                ));
            }
        }
        Ok(())
    }

    /// Vertices of a face in cycle order.
    pub fn face_vertices(&self, fi: usize) -> Result<Vec<usize>> {
        let face = &self.faces[fi];
        let bad = |m: &str| Err(Error::Lattice(format!("face {fi}: {m}")));
        if face.len() < 2 {
            return bad("fewer than two edges");
        }
        if face.iter().any(|&e| e >= self.edges.len()) {
            return bad("references a missing edge");
        }
        let first = self.edges[face[0]];
        let second = self.edges[face[1]];
        // Start at the endpoint of the first edge not shared with the second.
        let mut cur = if first.u == second.u || first.u == second.v {
            first.v
        } else {
            first.u
        };
        let start = cur;
        let mut out = Vec::with_capacity(face.len());
        for &e in face {
            let ed = self.edges[e];
            out.push(cur);
            cur = if ed.u == cur {
                ed.v
            } else if ed.v == cur {
                ed.u
            } else {
                return bad("edges do not form a path");
            };
        }
        if cur != start {
            return bad("cycle does not close");
        }
        Ok(out)
    }

    /// The color missing from a face's boundary, when the boundary uses
    /// exactly two colors.
    pub fn face_color(&self, fi: usize) -> Option<u8> {
        let cs: BTreeSet<u8> = self.faces[fi].iter().map(|&e| self.edges[e].color).collect();
        (cs.len() == 2).then(|| 3 - cs.iter().sum::<u8>())
    }

    pub fn edges_of_color(&self, c: u8) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| self.edges[e].color == c).collect()
    }
}

/// Honeycomb lattice on an `a × b` torus.
///
/// Vertices `A(i,j) = 2(i·b + j)` and `B(i,j) = A(i,j) + 1`; every `A` joins
/// `B(i,j)`, `B(i-1,j)` and `B(i,j-1)`. Faces are 3-colored by `(i - j) mod 3`
/// and each edge takes the color of the two faces it joins, so both `a` and
/// `b` must be multiples of 3.
pub fn build_honeycomb(a: usize, b: usize) -> Result<FloquetLattice> {
    if a < 2 || b < 2 {
        return Err(Error::CodeParams(format!(
            "honeycomb needs a, b >= 2 for non-degenerate faces, got ({a}, {b})"
        )));
    }
    if !a.is_multiple_of(3) || !b.is_multiple_of(3) {
        return Err(Error::CodeParams(format!(
            "honeycomb ({a}, {b}): a face 3-coloring on the torus needs a and b divisible by 3"
        )));
    }
    let av = |i: usize, j: usize| 2 * ((i % a) * b + (j % b));
    let bv = |i: usize, j: usize| av(i, j) + 1;
    let face_color = |i: usize, j: usize| ((i % a + 3 * a - j % b) % 3) as u8;

    let mut edges = Vec::new();
    let mut index = BTreeMap::new();
    for i in 0..a {
        for j in 0..b {
            let (im, jm) = (i + a - 1, j + b - 1);
            for (u, v) in [(av(i, j), bv(i, j)), (av(i, j), bv(im, j)), (av(i, j), bv(i, jm))] {
                index.insert((u.min(v), u.max(v)), edges.len());
                edges.push(FloquetEdge { u, v, color: 0 });
            }
        }
    }
    let mut faces: Vec<Vec<usize>> = Vec::new();
    let mut bordering: Vec<Vec<u8>> = vec![Vec::new(); edges.len()];
    for i in 0..a {
        for j in 0..b {
            let (ip, jm) = (i + 1, j + b - 1);
            let cyc = [av(i, j), bv(i, j), av(ip, j), bv(ip, jm), av(ip, jm), bv(i, jm)];
            let face: Vec<usize> = (0..6)
                .map(|k| {
                    let (x, y) = (cyc[k], cyc[(k + 1) % 6]);
                    index[&(x.min(y), x.max(y))]
                })
                .collect();
            for &e in &face {
                bordering[e].push(face_color(i, j));
            }
            faces.push(face);
        }
    }
    // An edge joins two faces of its own color, so it takes the color that
    // neither bordering face has.
    for (e, cs) in bordering.iter().enumerate() {
        debug_assert!(cs.len() == 2 && cs[0] != cs[1]);
        edges[e].color = 3 - cs[0] - cs[1];
    }
    let mut lattice = FloquetLattice {
        name: format!("honeycomb-{a}x{b}"),
        base_n: None,
        f: None,
        genus: 1,
        vertices: 2 * a * b,
        edges,
        faces,
        observables: Vec::new(),
    };
    lattice.validate()?;
    lattice.observables = derive_observables(&lattice)?;
    Ok(lattice)
}

/// Symplectic bits of the check Pauli for a color: 0 → X, 1 → Y, 2 → Z.
pub(crate) fn color_bits(c: u8) -> (bool, bool) {
    match c {
        0 => (true, false),
        1 => (true, true),
        _ => (false, true),
    }
}

fn check_vector(l: &FloquetLattice, e: usize) -> BitVec {
    let n = l.vertices;
    let ed = l.edges[e];
    let (x, z) = color_bits(ed.color);
    let mut v = BitVec::zeros(2 * n);
    for q in [ed.u, ed.v] {
        if x {
            v.toggle(q);
        }
        if z {
            v.toggle(n + q);
        }
    }
    v
}

fn anticommutes(n: usize, op: &BitVec, q: usize, c: u8) -> bool {
    let (sx, sz) = color_bits(c);
    (op.get(q) && sz) ^ (op.get(n + q) && sx)
}

/// Checks of the previous color to multiply into `op` so it commutes with
/// every check of color `c`.
fn transition(l: &FloquetLattice, op: &BitVec, c: u8) -> Result<Vec<usize>> {
    let n = l.vertices;
    let prev = (c + 2) % 3;
    let cur = l.edges_of_color(c);
    let pe = l.edges_of_color(prev);
    let pos: BTreeMap<usize, usize> = cur.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut at_vertex: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &e) in cur.iter().enumerate() {
        at_vertex[l.edges[e].u].push(i);
        at_vertex[l.edges[e].v].push(i);
    }
    let cols: Vec<BitVec> = pe
        .iter()
        .map(|&e| {
            let ed = l.edges[e];
            let mut col = BitVec::zeros(cur.len());
            for q in [ed.u, ed.v] {
                for &i in &at_vertex[q] {
                    col.toggle(i);
                }
            }
            col
        })
        .collect();
    let mut rhs = BitVec::zeros(cur.len());
    for (&e, &i) in &pos {
        let ed = l.edges[e];
        if anticommutes(n, op, ed.u, c) ^ anticommutes(n, op, ed.v, c) {
            rhs.toggle(i);
        }
    }
    let x = gf2::solve(&cols, &rhs).ok_or_else(|| {
        Error::Schedule(format!("logical cannot be made to commute with color-{c} checks"))
    })?;
    Ok(x.ones().map(|j| pe[j]).collect())
}

/// Derives Z-type logical observables and their per-phase update edges for a
/// lattice whose faces are 3-colorable, with sub-rounds ordered by color.
pub fn derive_observables(l: &FloquetLattice) -> Result<Vec<ObservableSpec>> {
    let n = l.vertices;
    let mut face_colors = Vec::with_capacity(l.faces.len());
    for fi in 0..l.faces.len() {
        face_colors.push(l.face_color(fi).ok_or_else(|| {
            Error::Schedule(format!("face {fi} boundary does not use exactly two colors"))
        })?);
    }
    let face_support = |fi: usize| -> Result<BitVec> {
        Ok(BitVec::from_indices(n, l.face_vertices(fi)?))
    };

    // Z strings commuting with the X- and Y-type plaquettes.
    let mut rows = Vec::new();
    for (fi, &c) in face_colors.iter().enumerate() {
        if c != 2 {
            rows.push(face_support(fi)?);
        }
    }
    let candidates = gf2::nullspace(&rows, n);
    // Modulo the Z-type stabilizers of the initial state.
    let mut span = EchelonBasis::new();
    for e in l.edges_of_color(2) {
        span.insert(&BitVec::from_indices(n, [l.edges[e].u, l.edges[e].v]));
    }
    for (fi, &c) in face_colors.iter().enumerate() {
        if c == 2 {
            span.insert(&face_support(fi)?);
        }
    }
    let mut supports = Vec::new();
    for cand in candidates {
        if span.insert(&cand) {
            supports.push(cand);
        }
    }

    let mut out = Vec::new();
    for support in supports {
        let mut op = BitVec::zeros(2 * n);
        for q in support.ones() {
            op.toggle(n + q);
        }
        // The update before the first sub-round only involves checks the
        // initial product state already satisfies, so it is folded into the
        // starting support. Later updates repeat with the schedule period.
        let mut history: Vec<Vec<usize>> = Vec::new();
        let mut start = None;
        for t in 0..10 {
            let c = (t % 3) as u8;
            let s = transition(l, &op, c)?;
            for &e in &s {
                op.xor_assign(&check_vector(l, e));
            }
            if t == 0 {
                start = Some(op.clone());
            }
            history.push(s);
        }
        for t in 4..history.len() {
            if history[t] != history[t - 3] {
                return Err(Error::Schedule(
                    "observable updates are not periodic in the schedule".into(),
                ));
            }
        }
        let start = start.unwrap();
        if (0..n).any(|q| start.get(q)) {
            return Err(Error::Schedule("initial logical is not Z-type".into()));
        }
        let support = BitVec::from_indices(n, (0..n).filter(|&q| start.get(n + q)));
        let path_edges = t_join(l, &support)?;
        out.push(ObservableSpec {
            path_edges,
            phase_updates: [history[3].clone(), history[1].clone(), history[2].clone()],
            final_basis: "Z".into(),
        });
    }
    if out.len() != l.k() {
        return Err(Error::Schedule(format!(
            "found {} Z-type logical observables, expected k = {}",
            out.len(),
            l.k()
        )));
    }
    Ok(out)
}

/// Edge set whose odd-degree vertices are exactly `t`, built on a BFS tree.
fn t_join(l: &FloquetLattice, t: &BitVec) -> Result<Vec<usize>> {
    let n = l.vertices;
    if t.count_ones() % 2 == 1 {
        return Err(Error::Schedule(
            "logical support has odd size; cannot encode as an edge path".into(),
        ));
    }
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (i, e) in l.edges.iter().enumerate() {
        adj[e.u].push((e.v, i));
        adj[e.v].push((e.u, i));
    }
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &(w, e) in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some((v, e));
                queue.push_back(w);
            }
        }
    }
    let mut odd: Vec<bool> = (0..n).map(|v| t.get(v)).collect();
    let mut edges = Vec::new();
    for &v in order.iter().rev() {
        if let Some((p, e)) = parent[v] {
            if odd[v] {
                edges.push(e);
                odd[p] ^= true;
            }
        }
    }
    edges.sort_unstable();
    Ok(edges)
}

/// Odd-degree vertices of an edge set.
pub(crate) fn path_support(l: &FloquetLattice, path: &[usize]) -> Vec<usize> {
    let mut deg = vec![false; l.vertices];
    for &e in path {
        deg[l.edges[e].u] ^= true;
        deg[l.edges[e].v] ^= true;
    }
    (0..l.vertices).filter(|&v| deg[v]).collect()
}

/// Parses and validates a lattice document (JSON).
pub fn load_floquet_lattice(text: &str) -> Result<FloquetLattice> {
    let l: FloquetLattice = serde_json::from_str(text)?;
    l.validate()?;
    for (i, o) in l.observables.iter().enumerate() {
        let all = o.path_edges.iter().chain(o.phase_updates.iter().flatten());
        if let Some(e) = all.into_iter().find(|&&e| e >= l.edges.len()) {
            return Err(Error::Lattice(format!("observable {i} references missing edge {e}")));
        }
        if o.final_basis != "Z" {
            return Err(Error::Lattice(format!(
                "observable {i}: final basis {:?} unsupported (Z only)",
                o.final_basis
            )));
        }
    }
    Ok(l)
}

pub fn export_lattice(l: &FloquetLattice) -> String {
    serde_json::to_string_pretty(l).expect("lattice serializes")
}
