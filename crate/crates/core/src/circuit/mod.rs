//! Circuit intermediate representation.
//!
//! A [`CircuitProgram`] is a flat list of Clifford gates, measurements, Pauli
//! noise channels and annotations (detectors, observables). Every other part of
//! the crate either produces one (the code compilers) or consumes one (the
//! samplers and the detector error model builder).
//!
//! Measurement results are addressed with look-back references: `rec[-1]` is
//! the most recent measurement preceding the referencing instruction.

mod parse;
mod resources;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{parse_program, ParseError, ParseErrorKind};
pub use resources::{count_resources, ResourceSummary};
pub use validate::{validate_program, Violation};

/// Single-qubit Pauli axis. The identity is represented by leaving a qubit out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// (x, z) symplectic bits.
    pub fn bits(self) -> (bool, bool) {
        match self {
            Axis::X => (true, false),
            Axis::Y => (true, true),
            Axis::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Option<Axis> {
        match (x, z) {
            (true, false) => Some(Axis::X),
            (true, true) => Some(Axis::Y),
            (false, true) => Some(Axis::Z),
            (false, false) => None,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }

    pub fn from_letter(c: char) -> Option<Axis> {
        match c {
            'X' => Some(Axis::X),
            'Y' => Some(Axis::Y),
            'Z' => Some(Axis::Z),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliTerm {
    pub qubit: usize,
    pub axis: Axis,
}

impl PauliTerm {
    pub fn new(qubit: usize, axis: Axis) -> Self {
        PauliTerm { qubit, axis }
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.axis.letter(), self.qubit)
    }
}

/// Look-back reference into the measurement record; `offset` is negative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RecordRef {
    pub offset: i64,
}

impl RecordRef {
    /// `rec[-k]`.
    pub fn back(k: usize) -> Self {
        RecordRef { offset: -(k as i64) }
    }

    /// Absolute measurement index given the number of measurements that precede
    /// the referencing instruction, or `None` when out of range.
    pub fn resolve(self, measurements_before: usize) -> Option<usize> {
        if self.offset >= 0 {
            return None;
        }
        let back = self.offset.unsigned_abs() as usize;
        measurements_before.checked_sub(back)
    }
}

impl fmt::Display for RecordRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rec[{}]", self.offset)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Opcode {
    Rz,
    Rx,
    H,
    S,
    Sdag,
    X,
    Y,
    Z,
    Cx,
    Cz,
    M,
    Mx,
    Mpp,
    Depolarize1,
    Depolarize2,
    CorrelatedError,
    CondX,
    CondZ,
    Detector,
    Observable,
    Tick,
}

impl Opcode {
    pub const ALL: [Opcode; 21] = [
        Opcode::Rz,
        Opcode::Rx,
        Opcode::H,
        Opcode::S,
        Opcode::Sdag,
        Opcode::X,
        Opcode::Y,
        Opcode::Z,
        Opcode::Cx,
        Opcode::Cz,
        Opcode::M,
        Opcode::Mx,
        Opcode::Mpp,
        Opcode::Depolarize1,
        Opcode::Depolarize2,
        Opcode::CorrelatedError,
        Opcode::CondX,
        Opcode::CondZ,
        Opcode::Detector,
        Opcode::Observable,
        Opcode::Tick,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Opcode::Rz => "RZ",
            Opcode::Rx => "RX",
            Opcode::H => "H",
            Opcode::S => "S",
            Opcode::Sdag => "SDAG",
            Opcode::X => "X",
            Opcode::Y => "Y",
            Opcode::Z => "Z",
            Opcode::Cx => "CX",
            Opcode::Cz => "CZ",
            Opcode::M => "M",
            Opcode::Mx => "MX",
            Opcode::Mpp => "MPP",
            Opcode::Depolarize1 => "DEPOLARIZE1",
            Opcode::Depolarize2 => "DEPOLARIZE2",
            Opcode::CorrelatedError => "CORRELATED_ERROR",
            Opcode::CondX => "COND_X",
            Opcode::CondZ => "COND_Z",
            Opcode::Detector => "DETECTOR",
            Opcode::Observable => "OBSERVABLE",
            Opcode::Tick => "TICK",
        }
    }

    pub fn from_name(name: &str) -> Option<Opcode> {
        Opcode::ALL.iter().copied().find(|op| op.name() == name)
    }

    pub fn is_noise(self) -> bool {
        matches!(
            self,
            Opcode::Depolarize1 | Opcode::Depolarize2 | Opcode::CorrelatedError
        )
    }

    pub fn is_measurement(self) -> bool {
        matches!(self, Opcode::M | Opcode::Mx | Opcode::Mpp)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Qubit(usize),
    Product(Vec<PauliTerm>),
    Rec(RecordRef),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Qubit(q) => write!(f, "{q}"),
            Target::Rec(r) => write!(f, "{r}"),
            Target::Product(terms) => {
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    write!(f, "{t}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instruction {
    pub opcode: Opcode,
    pub targets: Vec<Target>,
    pub params: Vec<f64>,
}

impl Instruction {
    pub fn new(opcode: Opcode, targets: Vec<Target>, params: Vec<f64>) -> Self {
        Instruction {
            opcode,
            targets,
            params,
        }
    }

    pub fn on_qubits(opcode: Opcode, qubits: &[usize]) -> Self {
        Instruction::new(
            opcode,
            qubits.iter().map(|&q| Target::Qubit(q)).collect(),
            Vec::new(),
        )
    }

    pub fn noise(opcode: Opcode, p: f64, qubits: &[usize]) -> Self {
        Instruction::new(
            opcode,
            qubits.iter().map(|&q| Target::Qubit(q)).collect(),
            vec![p],
        )
    }

    pub fn correlated(p: f64, terms: Vec<PauliTerm>) -> Self {
        Instruction::new(Opcode::CorrelatedError, vec![Target::Product(terms)], vec![p])
    }

    pub fn mpp(products: Vec<Vec<PauliTerm>>) -> Self {
        Instruction::new(
            Opcode::Mpp,
            products.into_iter().map(Target::Product).collect(),
            Vec::new(),
        )
    }

    pub fn cond(opcode: Opcode, rec: RecordRef, qubit: usize) -> Self {
        Instruction::new(opcode, vec![Target::Rec(rec), Target::Qubit(qubit)], Vec::new())
    }

    pub fn detector(recs: impl IntoIterator<Item = RecordRef>) -> Self {
        Instruction::new(
            Opcode::Detector,
            recs.into_iter().map(Target::Rec).collect(),
            Vec::new(),
        )
    }

    pub fn observable(index: usize, recs: impl IntoIterator<Item = RecordRef>) -> Self {
        Instruction::new(
            Opcode::Observable,
            recs.into_iter().map(Target::Rec).collect(),
            vec![index as f64],
        )
    }

    pub fn tick() -> Self {
        Instruction::new(Opcode::Tick, Vec::new(), Vec::new())
    }

    /// Number of measurement results this instruction appends to the record.
    pub fn measurement_count(&self) -> usize {
        match self.opcode {
            Opcode::M | Opcode::Mx | Opcode::Mpp => self.targets.len(),
            _ => 0,
        }
    }

    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.targets.iter().flat_map(|t| -> Box<dyn Iterator<Item = usize> + '_> {
            match t {
                Target::Qubit(q) => Box::new(std::iter::once(*q)),
                Target::Product(terms) => Box::new(terms.iter().map(|t| t.qubit)),
                Target::Rec(_) => Box::new(std::iter::empty()),
            }
        })
    }

    pub fn records(&self) -> impl Iterator<Item = RecordRef> + '_ {
        self.targets.iter().filter_map(|t| match t {
            Target::Rec(r) => Some(*r),
            _ => None,
        })
    }

    pub fn qubit_targets(&self) -> Vec<usize> {
        self.targets
            .iter()
            .filter_map(|t| match t {
                Target::Qubit(q) => Some(*q),
                _ => None,
            })
            .collect()
    }

    /// Index carried by an `OBSERVABLE(k)` instruction.
    pub fn observable_index(&self) -> Option<usize> {
        if self.opcode != Opcode::Observable {
            return None;
        }
        let k = *self.params.first()?;
        (k >= 0.0 && k.fract() == 0.0 && k < u32::MAX as f64).then_some(k as usize)
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.opcode.name())?;
        if !self.params.is_empty() {
            f.write_str("(")?;
            for (i, p) in self.params.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                // Rust prints the shortest string that round-trips exactly.
                write!(f, "{p}")?;
            }
            f.write_str(")")?;
        }
        for t in &self.targets {
            write!(f, " {t}")?;
        }
        Ok(())
    }
}

/// An immutable-after-construction circuit with a tag side-table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CircuitProgram {
    pub qubit_count: usize,
    pub instructions: Vec<Instruction>,
    pub tags: BTreeMap<usize, BTreeSet<String>>,
}

impl CircuitProgram {
    pub fn new(qubit_count: usize) -> Self {
        CircuitProgram {
            qubit_count,
            instructions: Vec::new(),
            tags: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, inst: Instruction) -> usize {
        self.instructions.push(inst);
        self.instructions.len() - 1
    }

    pub fn push_tagged<I, S>(&mut self, inst: Instruction, tags: I) -> usize
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let idx = self.push(inst);
        let set: BTreeSet<String> = tags.into_iter().map(Into::into).collect();
        if !set.is_empty() {
            self.tags.insert(idx, set);
        }
        idx
    }

    pub fn has_tag(&self, index: usize, tag: &str) -> bool {
        self.tags.get(&index).is_some_and(|s| s.contains(tag))
    }

    pub fn num_measurements(&self) -> usize {
        self.instructions.iter().map(Instruction::measurement_count).sum()
    }

    pub fn num_detectors(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| i.opcode == Opcode::Detector)
            .count()
    }

    /// Observable count: one more than the largest observable index used.
    pub fn num_observables(&self) -> usize {
        self.instructions
            .iter()
            .filter_map(Instruction::observable_index)
            .map(|k| k + 1)
            .max()
            .unwrap_or(0)
    }

    /// Inserts instructions before position `at`, shifting the tag table.
    pub fn insert_many(&mut self, at: usize, items: Vec<(Instruction, BTreeSet<String>)>) {
        let n = items.len();
        if n == 0 {
            return;
        }
        let shifted: BTreeMap<usize, BTreeSet<String>> = std::mem::take(&mut self.tags)
            .into_iter()
            .map(|(k, v)| if k >= at { (k + n, v) } else { (k, v) })
            .collect();
        self.tags = shifted;
        let tail = self.instructions.split_off(at);
        for (i, (inst, tags)) in items.into_iter().enumerate() {
            self.instructions.push(inst);
            if !tags.is_empty() {
                self.tags.insert(at + i, tags);
            }
        }
        self.instructions.extend(tail);
    }

    /// Resolves record references of every annotation to absolute measurement
    /// indices. Returns (detectors, observables) where observables are indexed
    /// by observable id and accumulate across OBSERVABLE instructions.
    pub fn resolve_annotations(&self) -> crate::Result<(Vec<Vec<usize>>, Vec<Vec<usize>>)> {
        let mut detectors = Vec::new();
        let mut observables: Vec<Vec<usize>> = vec![Vec::new(); self.num_observables()];
        let mut measured = 0usize;
        for (idx, inst) in self.instructions.iter().enumerate() {
            match inst.opcode {
                Opcode::Detector | Opcode::Observable => {
                    let mut abs = Vec::with_capacity(inst.targets.len());
                    for r in inst.records() {
                        abs.push(r.resolve(measured).ok_or_else(|| {
                            crate::Error::InvalidProgram(format!(
                                "instruction {idx}: record {r} out of range"
                            ))
                        })?);
                    }
                    if inst.opcode == Opcode::Detector {
                        detectors.push(abs);
                    } else {
                        let k = inst.observable_index().ok_or_else(|| {
                            crate::Error::InvalidProgram(format!(
                                "instruction {idx}: bad observable index"
                            ))
                        })?;
                        observables[k].extend(abs);
                    }
                }
                _ => measured += inst.measurement_count(),
            }
        }
        Ok((detectors, observables))
    }

    /// The text form described in the crate README.
    pub fn serialize(&self) -> String {
        serialize_program(self)
    }

    /// Copy with every noise probability set to zero (channels kept).
    pub fn noiseless(&self) -> CircuitProgram {
        let mut out = self.clone();
        for inst in &mut out.instructions {
            if inst.opcode.is_noise() {
                for p in &mut inst.params {
                    *p = 0.0;
                }
            }
        }
        out
    }
}

/// Writes the line-oriented text form. Tags become trailing `# tag:` comments.
pub fn serialize_program(prog: &CircuitProgram) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "QUBITS {}", prog.qubit_count);
    for (i, inst) in prog.instructions.iter().enumerate() {
        let _ = write!(out, "{inst}");
        if let Some(tags) = prog.tags.get(&i) {
            if !tags.is_empty() {
                out.push_str(" # tag:");
                for t in tags {
                    out.push(' ');
                    out.push_str(t);
                }
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_program_serializes_to_header() {
        assert_eq!(serialize_program(&CircuitProgram::new(0)), "QUBITS 0\n");
    }

    #[test]
    fn depolarize2_line() {
        let mut p = CircuitProgram::new(2);
        p.push(Instruction::noise(Opcode::Depolarize2, 0.01, &[0, 1]));
        assert_eq!(serialize_program(&p), "QUBITS 2\nDEPOLARIZE2(0.01) 0 1\n");
    }

    #[test]
    fn tiny_probability_prints_exactly() {
        let inst = Instruction::correlated(
            1e-4 / 512.0,
            vec![PauliTerm::new(0, Axis::X), PauliTerm::new(3, Axis::Z)],
        );
        let text = inst.to_string();
        assert_eq!(text, "CORRELATED_ERROR(0.0000001953125) X0*Z3");
    }

    #[test]
    fn insert_shifts_tags() {
        let mut p = CircuitProgram::new(1);
        p.push(Instruction::on_qubits(Opcode::H, &[0]));
        p.push_tagged(Instruction::on_qubits(Opcode::M, &[0]), ["last"]);
        p.insert_many(
            1,
            vec![(
                Instruction::noise(Opcode::Depolarize1, 0.1, &[0]),
                ["dropout".to_string()].into_iter().collect(),
            )],
        );
        assert!(p.has_tag(1, "dropout"));
        assert!(p.has_tag(2, "last"));
        assert_eq!(p.instructions[2].opcode, Opcode::M);
    }

    #[test]
    fn record_resolution() {
        assert_eq!(RecordRef::back(1).resolve(3), Some(2));
        assert_eq!(RecordRef::back(4).resolve(3), None);
        assert_eq!(RecordRef { offset: 0 }.resolve(3), None);
    }
}
