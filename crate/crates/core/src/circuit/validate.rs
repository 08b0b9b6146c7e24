use std::collections::BTreeSet;
use std::fmt;

use super::{CircuitProgram, Instruction, Opcode, Target};

/// A broken structural rule, tied to the offending instruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// `None` for program-wide rules.
    pub instruction: Option<usize>,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.instruction {
            Some(i) => write!(f, "instruction {i}: {}", self.rule),
            None => write!(f, "program: {}", self.rule),
        }
    }
}

/// Checks every structural invariant. An empty list means the program is valid.
pub fn validate_program(prog: &CircuitProgram) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut measured = 0usize;
    let mut observables = BTreeSet::new();

    for (idx, inst) in prog.instructions.iter().enumerate() {
        let mut bad = |rule: String| {
            out.push(Violation {
                instruction: Some(idx),
                rule,
            })
        };
        check_instruction(prog.qubit_count, inst, measured, &mut bad);
        if let Some(k) = inst.observable_index() {
            observables.insert(k);
        }
        measured += inst.measurement_count();
    }

    for (i, k) in observables.iter().enumerate() {
        if *k != i {
            out.push(Violation {
                instruction: None,
                rule: format!("observable indices must be contiguous from 0; missing {i}"),
            });
            break;
        }
    }
    for &idx in prog.tags.keys() {
        if idx >= prog.instructions.len() {
            out.push(Violation {
                instruction: None,
                rule: format!("tag attached to nonexistent instruction {idx}"),
            });
        }
    }
    out
}

fn check_instruction(n: usize, inst: &Instruction, measured: usize, bad: &mut impl FnMut(String)) {
    let op = inst.opcode;
    let name = op.name();
    let (mut qubits, mut products, mut recs) = (0usize, 0usize, 0usize);
    for t in &inst.targets {
        match t {
            Target::Qubit(q) => {
                qubits += 1;
                if *q >= n {
                    bad(format!("qubit {q} out of range (qubit count {n})"));
                }
            }
            Target::Product(terms) => {
                products += 1;
                for term in terms {
                    if term.qubit >= n {
                        bad(format!("qubit {} out of range (qubit count {n})", term.qubit));
                    }
                }
            }
            Target::Rec(r) => {
                recs += 1;
                if r.resolve(measured).is_none() {
                    bad(format!(
                        "record {r} out of range ({measured} preceding measurements)"
                    ));
                }
            }
        }
    }

    let expected_params = match op {
        Opcode::Depolarize1 | Opcode::Depolarize2 | Opcode::CorrelatedError => 1,
        Opcode::Observable => 1,
        _ => 0,
    };
    if inst.params.len() != expected_params {
        bad(format!("{name} takes {expected_params} parameter(s), got {}", inst.params.len()));
    }
    if op.is_noise() {
        for &p in &inst.params {
            if !(0.0..=1.0).contains(&p) {
                bad(format!("probability {p} outside [0, 1]"));
            }
        }
    }
    if op == Opcode::Observable && inst.params.len() == 1 && inst.observable_index().is_none() {
        bad("observable index must be a non-negative integer".into());
    }

    match op {
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
        | Opcode::Depolarize1 => {
            if products + recs > 0 {
                bad(format!("{name} takes qubit targets only"));
            }
        }
        Opcode::Cx | Opcode::Cz | Opcode::Depolarize2 => {
            if products + recs > 0 {
                bad(format!("{name} takes qubit targets only"));
            }
            if qubits % 2 != 0 {
                bad(format!("{name} needs an even number of qubit targets"));
            }
            let qs = inst.qubit_targets();
            for pair in qs.chunks(2) {
                if pair.len() == 2 && pair[0] == pair[1] {
                    bad(format!("{name} pair qubits must be distinct"));
                }
            }
        }
        Opcode::Mpp => {
            if qubits + recs > 0 {
                bad("MPP takes Pauli product targets only".into());
            }
            for t in &inst.targets {
                if let Target::Product(terms) = t {
                    if terms.len() != 2 {
                        bad("MPP products must have exactly two terms".into());
                    } else if terms[0].qubit == terms[1].qubit {
                        bad("MPP qubits must be distinct".into());
                    }
                }
            }
        }
        Opcode::CorrelatedError => {
            if qubits + recs > 0 || products != 1 {
                bad("CORRELATED_ERROR takes exactly one Pauli product".into());
            }
            for t in &inst.targets {
                if let Target::Product(terms) = t {
                    if terms.is_empty() {
                        bad("CORRELATED_ERROR product must be nonempty".into());
                    }
                    let distinct: BTreeSet<usize> = terms.iter().map(|t| t.qubit).collect();
                    if distinct.len() != terms.len() {
                        bad("CORRELATED_ERROR qubits must be distinct".into());
                    }
                }
            }
        }
        Opcode::CondX | Opcode::CondZ => {
            let shape_ok = inst.targets.len() == 2
                && matches!(inst.targets[0], Target::Rec(_))
                && matches!(inst.targets[1], Target::Qubit(_));
            if !shape_ok {
                bad(format!("{name} takes one record reference then one qubit"));
            }
        }
        Opcode::Detector | Opcode::Observable => {
            if qubits + products > 0 {
                bad(format!("{name} takes record references only"));
            }
        }
        Opcode::Tick => {
            if !inst.targets.is_empty() {
                bad("TICK takes no targets".into());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{parse_program, Axis, PauliTerm, RecordRef};

    fn msgs(p: &CircuitProgram) -> Vec<String> {
        validate_program(p).iter().map(|v| v.to_string()).collect()
    }

    #[test]
    fn bell_program_valid() {
        let p = parse_program("QUBITS 2\nH 0\nCX 0 1\nM 0 1\nDETECTOR rec[-1] rec[-2]").unwrap();
        assert!(validate_program(&p).is_empty());
    }

    #[test]
    fn mpp_same_qubit() {
        let mut p = CircuitProgram::new(1);
        p.push(Instruction::mpp(vec![vec![
            PauliTerm::new(0, Axis::X),
            PauliTerm::new(0, Axis::X),
        ]]));
        assert_eq!(msgs(&p), vec!["instruction 0: MPP qubits must be distinct"]);
    }

    #[test]
    fn detector_out_of_range() {
        let mut p = CircuitProgram::new(2);
        p.push(Instruction::on_qubits(Opcode::M, &[0, 1]));
        p.push(Instruction::detector([RecordRef::back(5)]));
        let v = msgs(&p);
        assert_eq!(v.len(), 1);
        assert!(v[0].starts_with("instruction 1: record rec[-5] out of range"));
    }

    #[test]
    fn odd_cx_and_gap_in_observables() {
        let mut p = CircuitProgram::new(3);
        p.push(Instruction::on_qubits(Opcode::Cx, &[0, 1, 2]));
        p.push(Instruction::on_qubits(Opcode::M, &[0]));
        p.push(Instruction::observable(1, [RecordRef::back(1)]));
        let v = msgs(&p);
        assert!(v.iter().any(|m| m.contains("even number")));
        assert!(v.iter().any(|m| m.contains("contiguous")));
    }
}
