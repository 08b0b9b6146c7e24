use crate::circuit::{CircuitProgram, Opcode, PauliTerm, Target};
use crate::{Error, Result};

/// Detectors and observables flipped by an error.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symptom {
    /// Ascending detector indices.
    pub detectors: Vec<usize>,
    /// Bit `k` set when observable `k` flips.
    pub observables: u64,
}

impl Symptom {
    pub fn is_empty(&self) -> bool {
        self.detectors.is_empty() && self.observables == 0
    }

    /// Symmetric difference.
    pub fn xor(&self, other: &Symptom) -> Symptom {
        let mut d: Vec<usize> = Vec::with_capacity(self.detectors.len() + other.detectors.len());
        let (a, b) = (&self.detectors, &other.detectors);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i] < b[j]) {
                d.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j] < a[i] {
                d.push(b[j]);
                j += 1;
            } else {
                i += 1;
                j += 1;
            }
        }
        Symptom {
            detectors: d,
            observables: self.observables ^ other.observables,
        }
    }
}

/// Pushes `paulis`, applied right after the error channel at
/// `instruction_index`, through the rest of the noiseless circuit.
pub fn propagate_pauli(
    prog: &CircuitProgram,
    instruction_index: usize,
    paulis: &[PauliTerm],
) -> Result<Symptom> {
    let inst = prog
        .instructions
        .get(instruction_index)
        .ok_or_else(|| Error::Sim(format!("no instruction {instruction_index}")))?;
    if !inst.opcode.is_noise() {
        return Err(Error::Sim(format!(
            "instruction {instruction_index} ({}) is not an error channel",
            inst.opcode
        )));
    }
    let (dets, obs) = prog.resolve_annotations()?;
    let n = prog.qubit_count;
    let mut x = vec![false; n];
    let mut z = vec![false; n];
    for p in paulis {
        if p.qubit >= n {
            return Err(Error::Sim(format!("qubit {} out of range", p.qubit)));
        }
        let (px, pz) = p.axis.bits();
        x[p.qubit] ^= px;
        z[p.qubit] ^= pz;
    }

    let total = prog.num_measurements();
    let mut flips = vec![false; total];
    let mut m: usize = prog.instructions[..=instruction_index]
        .iter()
        .map(|i| i.measurement_count())
        .sum();

    for inst in &prog.instructions[instruction_index + 1..] {
        let qs = inst.qubit_targets();
        match inst.opcode {
            Opcode::H => qs.iter().for_each(|&q| std::mem::swap(&mut x[q], &mut z[q])),
            Opcode::S | Opcode::Sdag => qs.iter().for_each(|&q| z[q] ^= x[q]),
            Opcode::Cx => {
                for c in qs.chunks(2) {
                    x[c[1]] ^= x[c[0]];
                    z[c[0]] ^= z[c[1]];
                }
            }
            Opcode::Cz => {
                for c in qs.chunks(2) {
                    z[c[0]] ^= x[c[1]];
                    z[c[1]] ^= x[c[0]];
                }
            }
            Opcode::Rz | Opcode::Rx => {
                for &q in &qs {
                    x[q] = false;
                    z[q] = false;
                }
            }
            Opcode::M => {
                for &q in &qs {
                    flips[m] = x[q];
                    m += 1;
                }
            }
            Opcode::Mx => {
                for &q in &qs {
                    flips[m] = z[q];
                    m += 1;
                }
            }
            Opcode::Mpp => {
                for t in &inst.targets {
                    if let Target::Product(terms) = t {
                        let mut f = false;
                        for term in terms {
                            let (px, pz) = term.axis.bits();
                            f ^= (px && z[term.qubit]) ^ (pz && x[term.qubit]);
                        }
                        flips[m] = f;
                        m += 1;
                    }
                }
            }
            Opcode::CondX | Opcode::CondZ => {
                let r = inst.records().next().expect("validated");
                let idx = r.resolve(m).expect("validated");
                if flips[idx] {
                    if inst.opcode == Opcode::CondX {
                        x[qs[0]] ^= true;
                    } else {
                        z[qs[0]] ^= true;
                    }
                }
            }
            _ => {}
        }
    }

    let detectors = dets
        .iter()
        .enumerate()
        .filter(|(_, recs)| recs.iter().fold(false, |a, &r| a ^ flips[r]))
        .map(|(d, _)| d)
        .collect();
    let mut observables = 0u64;
    for (k, recs) in obs.iter().enumerate() {
        if recs.iter().fold(false, |a, &r| a ^ flips[r]) {
            observables |= 1 << k;
        }
    }
    Ok(Symptom {
        detectors,
        observables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{parse_program, Axis};

    fn prog() -> CircuitProgram {
        parse_program(
            "QUBITS 2\nDEPOLARIZE1(0.1) 0\nCX 0 1\nM 0 1\nDETECTOR rec[-2]\nDETECTOR rec[-1]\nOBSERVABLE(0) rec[-1]",
        )
        .unwrap()
    }

    #[test]
    fn x_before_measurement() {
        let p = parse_program("QUBITS 1\nDEPOLARIZE1(0.1) 0\nM 0\nDETECTOR rec[-1]").unwrap();
        let s = propagate_pauli(&p, 0, &[PauliTerm::new(0, Axis::X)]).unwrap();
        assert_eq!(s.detectors, vec![0]);
        let s = propagate_pauli(&p, 0, &[PauliTerm::new(0, Axis::Z)]).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn cx_spreads_x() {
        let s = propagate_pauli(&prog(), 0, &[PauliTerm::new(0, Axis::X)]).unwrap();
        assert_eq!(s.detectors, vec![0, 1]);
        assert_eq!(s.observables, 1);
    }

    #[test]
    fn non_channel_rejected() {
        assert!(propagate_pauli(&prog(), 1, &[PauliTerm::new(0, Axis::X)]).is_err());
    }
}
