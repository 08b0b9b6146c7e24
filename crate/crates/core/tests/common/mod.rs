#![allow(dead_code)]

use dqec::circuit::{Axis, CircuitProgram, Instruction, Opcode, PauliTerm, RecordRef};
use dqec::decode::{DetectorErrorModel, Mechanism};
use dqec::sim::tableau::{symbolic_record, SignExpr};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random noisy Clifford circuit whose detectors and observables are chosen
/// among the record combinations that are deterministic without noise.
pub fn random_checked_circuit(seed: u64, max_qubits: usize, max_len: usize) -> CircuitProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_qubits);
    let len = rng.gen_range(1..=max_len);
    let mut prog = CircuitProgram::new(n);
    let qubits: Vec<usize> = (0..n).collect();
    let mut measured = 0usize;
    let p = [0.0, 0.05, 0.2, 0.5, 1.0][rng.gen_range(0..5)];
    let rand_p = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { p } else { rng.gen::<f64>() * 0.3 };

    for _ in 0..len {
        let inst = match rng.gen_range(0..20) {
            0..=2 => {
                let op = [Opcode::H, Opcode::S, Opcode::Sdag, Opcode::X, Opcode::Y, Opcode::Z][rng.gen_range(0..6)];
                let k = rng.gen_range(1..=n.min(3));
                Instruction::on_qubits(op, &qubits.choose_multiple(&mut rng, k).copied().collect::<Vec<_>>())
            }
            3..=5 => {
                let op = [Opcode::Cx, Opcode::Cz][rng.gen_range(0..2)];
                let pair: Vec<usize> = qubits.choose_multiple(&mut rng, 2).copied().collect();
                Instruction::on_qubits(op, &pair)
            }
            6 => {
                let op = [Opcode::Rz, Opcode::Rx][rng.gen_range(0..2)];
                Instruction::on_qubits(op, &[rng.gen_range(0..n)])
            }
            7 | 8 => {
                let op = [Opcode::M, Opcode::Mx][rng.gen_range(0..2)];
                let k = rng.gen_range(1..=n.min(2));
                Instruction::on_qubits(op, &qubits.choose_multiple(&mut rng, k).copied().collect::<Vec<_>>())
            }
            9 | 10 => {
                let pair: Vec<usize> = qubits.choose_multiple(&mut rng, 2).copied().collect();
                Instruction::mpp(vec![vec![
                    PauliTerm::new(pair[0], Axis::ALL[rng.gen_range(0..3)]),
                    PauliTerm::new(pair[1], Axis::ALL[rng.gen_range(0..3)]),
                ]])
            }
            11 | 12 if measured > 0 => {
                let op = [Opcode::CondX, Opcode::CondZ][rng.gen_range(0..2)];
                let back = rng.gen_range(1..=measured.min(4));
                Instruction::cond(op, RecordRef::back(back), rng.gen_range(0..n))
            }
            13 | 14 => {
                let q = rng.gen_range(0..n);
                Instruction::noise(Opcode::Depolarize1, rand_p(&mut rng), &[q])
            }
            15 | 16 => {
                let pair: Vec<usize> = qubits.choose_multiple(&mut rng, 2).copied().collect();
                Instruction::noise(Opcode::Depolarize2, rand_p(&mut rng), &pair)
            }
            17 => {
                let k = rng.gen_range(1..=n.min(4));
                let terms = qubits
                    .choose_multiple(&mut rng, k)
                    .map(|&q| PauliTerm::new(q, Axis::ALL[rng.gen_range(0..3)]))
                    .collect();
                Instruction::correlated(rand_p(&mut rng), terms)
            }
            _ => Instruction::tick(),
        };
        measured += inst.measurement_count();
        prog.push(inst);
    }
    // Final readout so there is always something to check.
    prog.push(Instruction::on_qubits(Opcode::M, &qubits));
    measured += n;

    let combos = deterministic_combinations(&prog);
    let mut chosen: Vec<Vec<usize>> = Vec::new();
    for c in &combos {
        if rng.gen_bool(0.7) {
            chosen.push(c.clone());
        }
    }
    if combos.len() >= 2 {
        for _ in 0..3 {
            let a = &combos[rng.gen_range(0..combos.len())];
            let b = &combos[rng.gen_range(0..combos.len())];
            chosen.push(sym_diff(a, b));
        }
    }
    chosen.retain(|c| !c.is_empty());
    let n_obs = chosen.len().min(rng.gen_range(0..3));
    for (i, c) in chosen.iter().enumerate() {
        let recs = c.iter().map(|&m| RecordRef::back(measured - m));
        if i < n_obs {
            prog.push(Instruction::observable(i, recs));
        } else {
            prog.push(Instruction::detector(recs));
        }
    }
    prog
}

fn sym_diff(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().filter(|x| !b.contains(x)).copied().collect();
    out.extend(b.iter().filter(|x| !a.contains(x)));
    out.sort_unstable();
    out
}

/// Basis of record subsets whose noiseless parity is fixed.
pub fn deterministic_combinations(prog: &CircuitProgram) -> Vec<Vec<usize>> {
    let record = symbolic_record(prog).unwrap();
    // Gaussian elimination over the variable parts, tracking which records
    // were combined.
    let mut pivots: Vec<(u32, Vec<u32>, Vec<usize>)> = Vec::new();
    let mut out = Vec::new();
    for (i, e) in record.iter().enumerate() {
        let mut vars = e.vars.clone();
        let mut combo = vec![i];
        loop {
            let Some(&lead) = vars.first() else { break };
            match pivots.iter().find(|(p, _, _)| *p == lead) {
                Some((_, pv, pc)) => {
                    vars = xor_sorted(&vars, pv);
                    combo = sym_diff(&combo, pc);
                }
                None => break,
            }
        }
        if vars.is_empty() {
            out.push(combo);
        } else {
            pivots.push((vars[0], vars, combo));
        }
    }
    out
}

fn xor_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut e = SignExpr {
        constant: false,
        vars: a.to_vec(),
    };
    dqec::sim::tableau::Sign::xor_assign(
        &mut e,
        &SignExpr {
            constant: false,
            vars: b.to_vec(),
        },
    );
    e.vars
}

/// Distance-3 repetition code over three rounds: data flips (the first data
/// qubit carries the observable) and measurement errors, with random rates.
pub fn repetition_dem() -> DetectorErrorModel {
    let mut m = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for t in 0..3u32 {
        for q in 0..3u32 {
            let p = rng.gen_range(0.01..0.1);
            let d: Vec<u32> = match q {
                0 => vec![2 * t],
                1 => vec![2 * t, 2 * t + 1],
                _ => vec![2 * t + 1],
            };
            m.push(Mechanism {
                p,
                detectors: d,
                observables: (q == 0) as u64,
            });
        }
    }
    for t in 0..2u32 {
        for c in 0..2u32 {
            let p = rng.gen_range(0.01..0.1);
            m.push(Mechanism {
                p,
                detectors: vec![2 * t + c, 2 * t + 2 + c],
                observables: 0,
            });
        }
    }
    DetectorErrorModel {
        mechanisms: m,
        num_detectors: 6,
        num_observables: 1,
    }
}

/// Minimum total weight over perfect matchings by exhaustive search.
pub fn brute_matching(n: usize, w: &[Vec<Option<i64>>], used: &mut Vec<bool>) -> Option<i64> {
    let Some(a) = (0..n).find(|&i| !used[i]) else {
        return Some(0);
    };
    used[a] = true;
    let mut best = None;
    for b in a + 1..n {
        if used[b] {
            continue;
        }
        if let Some(wab) = w[a][b] {
            used[b] = true;
            if let Some(rest) = brute_matching(n, w, used) {
                let t = wab + rest;
                if best.is_none_or(|x| t < x) {
                    best = Some(t);
                }
            }
            used[b] = false;
        }
    }
    used[a] = false;
    best
}
