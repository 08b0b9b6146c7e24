use dqec::circuit::{
    parse_program, serialize_program, validate_program, Axis, CircuitProgram, Instruction, Opcode,
    PauliTerm, RecordRef, Target,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_axis(rng: &mut impl Rng) -> Axis {
    Axis::ALL[rng.gen_range(0..3)]
}

fn random_prob(rng: &mut impl Rng) -> f64 {
    match rng.gen_range(0..4) {
        0 => 0.0,
        1 => rng.gen::<f64>(),
        2 => 1e-4 / 512.0 * rng.gen_range(1..100) as f64,
        _ => 10f64.powf(-rng.gen_range(0.0..9.0)),
    }
}

/// Random structurally valid program.
fn random_program(seed: u64) -> CircuitProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..8);
    let mut prog = CircuitProgram::new(n);
    let mut measured = 0usize;
    let mut next_obs = 0usize;
    let len = rng.gen_range(0..30);
    for _ in 0..len {
        let qubits: Vec<usize> = (0..n).collect();
        let inst = match rng.gen_range(0..14) {
            0 => {
                let op = [Opcode::Rz, Opcode::Rx, Opcode::H, Opcode::S, Opcode::Sdag, Opcode::X, Opcode::Y, Opcode::Z]
                    [rng.gen_range(0..8)];
                let k = rng.gen_range(1..=n);
                Instruction::on_qubits(op, &qubits.choose_multiple(&mut rng, k).copied().collect::<Vec<_>>())
            }
            1 | 2 => {
                let op = [Opcode::Cx, Opcode::Cz, Opcode::Depolarize2][rng.gen_range(0..3)];
                let pair: Vec<usize> = qubits.choose_multiple(&mut rng, 2).copied().collect();
                let mut inst = Instruction::on_qubits(op, &pair);
                if op == Opcode::Depolarize2 {
                    inst.params = vec![random_prob(&mut rng)];
                }
                inst
            }
            3 | 4 => {
                let op = [Opcode::M, Opcode::Mx][rng.gen_range(0..2)];
                let k = rng.gen_range(1..=n);
                Instruction::on_qubits(op, &qubits.choose_multiple(&mut rng, k).copied().collect::<Vec<_>>())
            }
            5 => {
                let pair: Vec<usize> = qubits.choose_multiple(&mut rng, 2).copied().collect();
                Instruction::mpp(vec![vec![
                    PauliTerm::new(pair[0], random_axis(&mut rng)),
                    PauliTerm::new(pair[1], random_axis(&mut rng)),
                ]])
            }
            6 => Instruction::noise(Opcode::Depolarize1, random_prob(&mut rng), &[rng.gen_range(0..n)]),
            7 => {
                let k = rng.gen_range(1..=n);
                let terms = qubits
                    .choose_multiple(&mut rng, k)
                    .map(|&q| PauliTerm::new(q, random_axis(&mut rng)))
                    .collect();
                Instruction::correlated(random_prob(&mut rng), terms)
            }
            8 | 9 if measured > 0 => {
                let op = [Opcode::CondX, Opcode::CondZ][rng.gen_range(0..2)];
                Instruction::cond(op, RecordRef::back(rng.gen_range(1..=measured)), rng.gen_range(0..n))
            }
            10 | 11 if measured > 0 => {
                let k = rng.gen_range(0..4);
                Instruction::detector((0..k).map(|_| RecordRef::back(rng.gen_range(1..=measured))))
            }
            12 if measured > 0 => {
                let idx = if next_obs > 0 && rng.gen_bool(0.5) {
                    rng.gen_range(0..next_obs)
                } else {
                    next_obs += 1;
                    next_obs - 1
                };
                Instruction::observable(idx, [RecordRef::back(rng.gen_range(1..=measured))])
            }
            _ => Instruction::tick(),
        };
        measured += inst.measurement_count();
        if rng.gen_bool(0.2) {
            let tags = ["dropout", "nonlocal", "round=3", "idle"];
            let k = rng.gen_range(1..3);
            let chosen: Vec<&str> = tags.choose_multiple(&mut rng, k).copied().collect();
            prog.push_tagged(inst, chosen);
        } else {
            prog.push(inst);
        }
    }
    prog
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn round_trip_identity(seed in any::<u64>()) {
        let prog = random_program(seed);
        prop_assert!(validate_program(&prog).is_empty(), "{:?}", validate_program(&prog));
        let text = serialize_program(&prog);
        let back = parse_program(&text).unwrap();
        prop_assert_eq!(&back, &prog);
        prop_assert_eq!(serialize_program(&back), text);
    }

    #[test]
    fn resolved_records_in_range(seed in any::<u64>()) {
        let prog = random_program(seed);
        let total = prog.num_measurements();
        let (dets, obs) = prog.resolve_annotations().unwrap();
        for m in dets.iter().chain(obs.iter()).flatten() {
            prop_assert!(*m < total);
        }
    }

    #[test]
    fn parser_and_validator_are_total(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
        let text = String::from_utf8_lossy(&bytes);
        if let Ok(p) = parse_program(&text) {
            let _ = validate_program(&p);
            let _ = serialize_program(&p);
        }
    }

    #[test]
    fn parser_total_on_near_miss_text(
        lines in proptest::collection::vec(
            prop_oneof![
                Just("QUBITS 3".to_string()),
                Just("M 0 1".to_string()),
                Just("MPP X0*Z1 Y1*Y2".to_string()),
                Just("DETECTOR rec[-1]".to_string()),
                Just("COND_X rec[-2] 1".to_string()),
                Just("OBSERVABLE(0) rec[-1]".to_string()),
                Just("CORRELATED_ERROR(0.5) X0*X0".to_string()),
                Just("DEPOLARIZE2(2) 0".to_string()),
                Just("CX(0.1 0 1".to_string()),
                Just("MPP X0*".to_string()),
                Just("rec[-1]".to_string()),
                "[A-Z_]{1,8}( [0-9]{1,3}){0,3}",
            ],
            0..12,
        )
    ) {
        let text = lines.join("\n");
        if let Ok(p) = parse_program(&text) {
            let _ = validate_program(&p);
        }
    }
}

#[test]
fn validator_flags_bad_parse_results() {
    let p = parse_program("QUBITS 2\nMPP X0*X0\nCORRELATED_ERROR(0.5) X0*Z0\nDEPOLARIZE2(0.1) 0").unwrap();
    let v: Vec<String> = validate_program(&p).iter().map(|v| v.to_string()).collect();
    assert!(v.contains(&"instruction 0: MPP qubits must be distinct".to_string()));
    assert!(v.iter().any(|m| m.starts_with("instruction 1:")));
    assert!(v.iter().any(|m| m.starts_with("instruction 2:")));
}

#[test]
fn product_targets_survive() {
    let p = parse_program("QUBITS 8\nCORRELATED_ERROR(0.0000001953125) X3*Y7").unwrap();
    assert_eq!(
        p.instructions[0].targets,
        vec![Target::Product(vec![PauliTerm::new(3, Axis::X), PauliTerm::new(7, Axis::Y)])]
    );
}
