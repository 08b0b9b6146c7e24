use std::collections::BTreeSet;

use serde::Serialize;

use super::floquet::{color_bits, path_support};
use super::{FloquetLattice, PauliString, StabilizerCode};
use crate::circuit::{Axis, PauliTerm};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub enum CodeDef {
    Stabilizer(StabilizerCode),
    Floquet(FloquetLattice),
}

impl CodeDef {
    pub fn name(&self) -> &str {
        match self {
            CodeDef::Stabilizer(c) => &c.name,
            CodeDef::Floquet(l) => &l.name,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum CheckKind {
    /// Weight-two product measured directly on two data qubits.
    Pair { edge: usize },
    /// Stabilizer measured through a dedicated ancilla qubit.
    Stabilizer { stabilizer: usize, ancilla: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub paulis: Vec<PauliTerm>,
    pub kind: CheckKind,
}

impl Check {
    pub fn data_qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.paulis.iter().map(|t| t.qubit)
    }

    pub fn ancilla(&self) -> Option<usize> {
        match self.kind {
            CheckKind::Stabilizer { ancilla, .. } => Some(ancilla),
            CheckKind::Pair { .. } => None,
        }
    }
}

/// Rounds at which a detector template is instantiated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RoundRange {
    From(usize),
    Exactly(usize),
}

impl RoundRange {
    pub fn contains(self, r: usize) -> bool {
        match self {
            RoundRange::From(k) => r >= k,
            RoundRange::Exactly(k) => r == k,
        }
    }
}

/// Parity of check outcomes `(check, round offset)`, offsets relative to the
/// round the detector is attached to (so never positive).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DetectorTemplate {
    pub terms: Vec<(usize, i64)>,
    pub rounds: RoundRange,
}

/// Detector closed by the final data readout: data qubits read in the final
/// basis plus check outcomes at offsets relative to the last round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FinalDetectorTemplate {
    pub data: Vec<usize>,
    pub terms: Vec<(usize, i64)>,
}

/// A logical tracked from the initial product state to the final readout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ObservableTemplate {
    /// Initial logical: `final_basis` on these data qubits.
    pub initial: Vec<usize>,
    /// `updates[s]`: checks from the sub-round before sub-round `s` that are
    /// multiplied into the logical before sub-round `s` is measured.
    pub updates: Vec<Vec<usize>>,
    /// Skip the update before the very first sub-round.
    pub skip_first_update: bool,
    pub final_basis: Axis,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScheduleTemplate {
    pub name: String,
    pub data_qubits: usize,
    pub ancillas: usize,
    pub checks: Vec<Check>,
    /// One code round: `sub_rounds[s]` lists the checks measured in order.
    pub sub_rounds: Vec<Vec<usize>>,
    pub detectors: Vec<DetectorTemplate>,
    pub final_detectors: Vec<FinalDetectorTemplate>,
    pub observables: Vec<ObservableTemplate>,
    /// Basis all data qubits are prepared in and finally read out in.
    pub basis: Axis,
    pub warnings: Vec<String>,
}

/// Resolved observable for a run of `rounds` rounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservablePlan {
    /// Check outcomes `(round, check)` included.
    pub checks: Vec<(usize, usize)>,
    /// Data qubits whose final readout is included.
    pub data: Vec<usize>,
}

impl ScheduleTemplate {
    pub fn period(&self) -> usize {
        self.sub_rounds.len()
    }

    pub fn total_qubits(&self) -> usize {
        self.data_qubits + self.ancillas
    }

    /// Qubit pairs that interact: ancilla–data for stabilizer checks and the
    /// two data qubits of a pair check.
    pub fn couplings(&self) -> Vec<(usize, usize)> {
        let mut out = BTreeSet::new();
        for c in &self.checks {
            match c.kind {
                CheckKind::Pair { .. } => {
                    let (a, b) = (c.paulis[0].qubit, c.paulis[1].qubit);
                    out.insert((a.min(b), a.max(b)));
                }
                CheckKind::Stabilizer { ancilla, .. } => {
                    for q in c.data_qubits() {
                        out.insert((q.min(ancilla), q.max(ancilla)));
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// Which sub-round of the period measures each check.
    pub fn sub_round_of(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.checks.len()];
        for (s, checks) in self.sub_rounds.iter().enumerate() {
            for &c in checks {
                out[c] = s;
            }
        }
        out
    }

    /// Tracks observable `k` through `rounds` rounds and returns the records
    /// it includes. Fails if the logical at readout is not diagonal in the
    /// readout basis.
    pub fn observable_plan(&self, k: usize, rounds: usize) -> Result<ObservablePlan> {
        let o = &self.observables[k];
        let mut op = PauliString::uniform(o.final_basis, o.initial.iter().copied());
        let mut checks = Vec::new();
        let period = self.period();
        for r in 0..rounds {
            for s in 0..period {
                if r == 0 && s == 0 {
                    if !o.skip_first_update && !o.updates[0].is_empty() {
                        return Err(Error::Schedule("first update needs earlier outcomes".into()));
                    }
                    continue;
                }
                let pr = if s == 0 { r - 1 } else { r };
                for &c in &o.updates[s] {
                    op.mul(&PauliString::new(self.checks[c].paulis.iter().copied()));
                    checks.push((pr, c));
                }
            }
        }
        if !op.is_uniform(o.final_basis) {
            return Err(Error::Schedule(format!(
                "observable {k} is not diagonal in the readout basis after {rounds} rounds"
            )));
        }
        Ok(ObservablePlan {
            checks,
            data: op.qubits().collect(),
        })
    }
}

/// Builds the periodic measurement schedule and its detector and observable
/// templates.
pub fn make_schedule(code: &CodeDef) -> Result<ScheduleTemplate> {
    match code {
        CodeDef::Stabilizer(c) => stabilizer_schedule(c),
        CodeDef::Floquet(l) => floquet_schedule(l),
    }
}

fn stabilizer_schedule(code: &StabilizerCode) -> Result<ScheduleTemplate> {
    let n = code.n;
    let mut checks = Vec::new();
    let mut types = Vec::new();
    for (s, st) in code.stabilizers.iter().enumerate() {
        let ty = if st.is_uniform(Axis::X) {
            Axis::X
        } else if st.is_uniform(Axis::Z) {
            Axis::Z
        } else {
            return Err(Error::Schedule(format!("stabilizer {s} is not CSS")));
        };
        types.push(ty);
        checks.push(Check {
            paulis: st.terms(),
            kind: CheckKind::Stabilizer {
                stabilizer: s,
                ancilla: n + s,
            },
        });
    }
    let mut order: Vec<usize> = (0..checks.len()).filter(|&c| types[c] == Axis::X).collect();
    order.extend((0..checks.len()).filter(|&c| types[c] == Axis::Z));

    let mut detectors = Vec::new();
    let mut final_detectors = Vec::new();
    for (c, &ty) in types.iter().enumerate() {
        if ty == Axis::Z {
            detectors.push(DetectorTemplate {
                terms: vec![(c, 0)],
                rounds: RoundRange::Exactly(0),
            });
            final_detectors.push(FinalDetectorTemplate {
                data: checks[c].data_qubits().collect(),
                terms: vec![(c, 0)],
            });
        }
        detectors.push(DetectorTemplate {
            terms: vec![(c, 0), (c, -1)],
            rounds: RoundRange::From(1),
        });
    }
    let mut warnings = Vec::new();
    let mut observables = Vec::new();
    for (i, l) in code.logical_z.iter().enumerate() {
        if !l.is_uniform(Axis::Z) {
            warnings.push(format!("logical Z{i} is not Z-type; omitted"));
            continue;
        }
        observables.push(ObservableTemplate {
            initial: l.qubits().collect(),
            updates: vec![Vec::new()],
            skip_first_update: false,
            final_basis: Axis::Z,
        });
    }
    Ok(ScheduleTemplate {
        name: code.name.clone(),
        data_qubits: n,
        ancillas: checks.len(),
        checks,
        sub_rounds: vec![order],
        detectors,
        final_detectors,
        observables,
        basis: Axis::Z,
        warnings,
    })
}

fn color_axis(c: u8) -> Axis {
    let (x, z) = color_bits(c);
    Axis::from_bits(x, z).unwrap()
}

fn floquet_schedule(l: &FloquetLattice) -> Result<ScheduleTemplate> {
    l.validate()?;
    let checks: Vec<Check> = l
        .edges
        .iter()
        .enumerate()
        .map(|(e, ed)| Check {
            paulis: vec![
                PauliTerm::new(ed.u, color_axis(ed.color)),
                PauliTerm::new(ed.v, color_axis(ed.color)),
            ],
            kind: CheckKind::Pair { edge: e },
        })
        .collect();
    let sub_rounds: Vec<Vec<usize>> = (0..3).map(|c| l.edges_of_color(c)).collect();

    let mut detectors = Vec::new();
    let mut final_detectors = Vec::new();
    for fi in 0..l.faces.len() {
        let c = l.face_color(fi).ok_or_else(|| {
            Error::Schedule(format!("face {fi} boundary does not use exactly two colors"))
        })?;
        // Reconstructed from color x then the next color y.
        let (x, y) = ((c + 1) % 3, (c + 2) % 3);
        let ox: i64 = if x < y { 0 } else { -1 };
        let xs: Vec<usize> = l.faces[fi].iter().copied().filter(|&e| l.edges[e].color == x).collect();
        let ys: Vec<usize> = l.faces[fi].iter().copied().filter(|&e| l.edges[e].color == y).collect();
        let recon = |shift: i64| -> Vec<(usize, i64)> {
            xs.iter()
                .map(|&e| (e, ox + shift))
                .chain(ys.iter().map(|&e| (e, shift)))
                .collect()
        };
        let earliest = if ox == 0 { 0 } else { 1 };
        let mut terms = recon(0);
        terms.extend(recon(-1));
        detectors.push(DetectorTemplate {
            terms,
            rounds: RoundRange::From(earliest + 1),
        });
        if c == 2 {
            // Z-type plaquettes are fixed by the |0…0> preparation and by the
            // final Z readout.
            detectors.push(DetectorTemplate {
                terms: recon(0),
                rounds: RoundRange::Exactly(earliest),
            });
            final_detectors.push(FinalDetectorTemplate {
                data: l.face_vertices(fi)?,
                terms: recon(0),
            });
        }
    }
    for &e in &sub_rounds[2] {
        final_detectors.push(FinalDetectorTemplate {
            data: vec![l.edges[e].u, l.edges[e].v],
            terms: vec![(e, 0)],
        });
    }

    let mut warnings = Vec::new();
    if l.observables.is_empty() {
        warnings.push(format!("lattice {} has no observable specs; no observables emitted", l.name));
    }
    let observables = l
        .observables
        .iter()
        .map(|o| ObservableTemplate {
            initial: path_support(l, &o.path_edges),
            updates: o.phase_updates.to_vec(),
            skip_first_update: true,
            final_basis: Axis::Z,
        })
        .collect();

    Ok(ScheduleTemplate {
        name: l.name.clone(),
        data_qubits: l.vertices,
        ancillas: 0,
        checks,
        sub_rounds,
        detectors,
        final_detectors,
        observables,
        basis: Axis::Z,
        warnings,
    })
}
