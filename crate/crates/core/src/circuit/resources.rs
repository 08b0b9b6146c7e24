use std::collections::BTreeMap;

use serde::Serialize;

use super::{CircuitProgram, Instruction, Opcode};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ResourceSummary {
    /// Operation counts keyed by opcode name. Two-qubit opcodes count pairs,
    /// measurements count results, everything else counts instructions.
    pub ops: BTreeMap<String, usize>,
    pub measurements: usize,
    pub detectors: usize,
    pub observables: usize,
    /// Number of instructions carrying each tag.
    pub tags: BTreeMap<String, usize>,
}

impl ResourceSummary {
    pub fn op(&self, op: Opcode) -> usize {
        self.ops.get(op.name()).copied().unwrap_or(0)
    }

    pub fn tag(&self, tag: &str) -> usize {
        self.tags.get(tag).copied().unwrap_or(0)
    }
}

fn op_count(inst: &Instruction) -> usize {
    match inst.opcode {
        Opcode::Cx | Opcode::Cz | Opcode::Depolarize2 => inst.targets.len() / 2,
        Opcode::Rz
        | Opcode::Rx
        | Opcode::H
        | Opcode::S
        | Opcode::Sdag
        | Opcode::X
        | Opcode::Y
        | Opcode::Z
        | Opcode::M
        | Opcode::Mx
        | Opcode::Mpp
        | Opcode::Depolarize1 => inst.targets.len(),
        _ => 1,
    }
}

pub fn count_resources(prog: &CircuitProgram) -> ResourceSummary {
    let mut s = ResourceSummary::default();
    for inst in &prog.instructions {
        let n = op_count(inst);
        if n > 0 {
            *s.ops.entry(inst.opcode.name().to_string()).or_default() += n;
        }
        s.measurements += inst.measurement_count();
        if inst.opcode == Opcode::Detector {
            s.detectors += 1;
        }
    }
    s.observables = prog.num_observables();
    for tags in prog.tags.values() {
        for t in tags {
            *s.tags.entry(t.clone()).or_default() += 1;
        }
    }
    s
}
