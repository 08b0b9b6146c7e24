mod common;

use dqec::circuit::{parse_program, Axis, CircuitProgram, Instruction, Opcode, PauliTerm, RecordRef};
use dqec::sim::{
    check_determinism, propagate_pauli, sample_frames, stabilizer_oracle_sample, FrameSimulator,
};

#[test]
fn frame_matches_oracle_on_shared_patterns() {
    let mut compared = 0;
    for seed in 0..1000u64 {
        let prog = common::random_checked_circuit(seed, 16, 300);
        check_determinism(&prog).expect("generator yields deterministic annotations");
        let sim = FrameSimulator::new(&prog).unwrap();
        let (frames, pattern) = sim.sample_with_pattern(24, seed ^ 0xabc);
        let oracle = stabilizer_oracle_sample(&prog, 0, seed, Some(&pattern)).unwrap();
        assert_eq!(frames, oracle, "circuit seed {seed}\n{}", prog.serialize());
        let replay = sim.run_pattern(&pattern).unwrap();
        assert_eq!(frames, replay, "replay mismatch for seed {seed}");
        compared += frames.num_detectors + frames.num_observables;
    }
    assert!(compared > 1000, "too few annotations compared: {compared}");
}

#[test]
fn zero_noise_is_silent() {
    let prog = common::random_checked_circuit(7, 10, 200).noiseless();
    let o = sample_frames(&prog, 100, 1).unwrap();
    assert!(o.detectors.iter().all(|&w| w == 0));
    assert!(o.observables.iter().all(|&w| w == 0));
}

#[test]
fn certain_error_flips_every_shot() {
    let p = parse_program("QUBITS 1\nCORRELATED_ERROR(1) X0\nM 0\nDETECTOR rec[-1]").unwrap();
    let o = sample_frames(&p, 1000, 5).unwrap();
    assert_eq!(o.detector_fire_count(0), 1000);
}

#[test]
fn zero_shots_rejected() {
    let p = parse_program("QUBITS 1\nM 0\nDETECTOR rec[-1]").unwrap();
    assert!(sample_frames(&p, 0, 1).is_err());
}

#[test]
fn nondeterministic_reference_rejected() {
    let p = parse_program("QUBITS 1\nH 0\nM 0\nDETECTOR rec[-1]").unwrap();
    assert!(sample_frames(&p, 10, 1).is_err());
}

#[test]
fn independent_of_thread_count_and_chunking() {
    let prog = common::random_checked_circuit(11, 12, 250);
    let sim = FrameSimulator::new(&prog).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| sim.sample(5000, 99));
    let multi = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| sim.sample(5000, 99));
    assert_eq!(single, multi);
    let mut chunked = sim.sample_blocks(0, 2, 99);
    chunked.append(&sim.sample_blocks(2, 3, 99));
    chunked.truncate(5000);
    assert_eq!(single, chunked);
}

/// Each channel kind fires at its probability within 5 sigma over 10^6 shots.
#[test]
fn channel_statistics() {
    let shots = 1_000_000usize;
    for (text, p, frac) in [
        ("QUBITS 1\nDEPOLARIZE1(0.03) 0\nM 0\nDETECTOR rec[-1]", 0.03, 2.0 / 3.0),
        ("QUBITS 1\nRX 0\nDEPOLARIZE1(0.03) 0\nMX 0\nDETECTOR rec[-1]", 0.03, 2.0 / 3.0),
        ("QUBITS 2\nDEPOLARIZE2(0.05) 0 1\nM 0\nDETECTOR rec[-1]", 0.05, 8.0 / 15.0),
        ("QUBITS 2\nDEPOLARIZE2(0.05) 0 1\nM 0 1\nDETECTOR rec[-1] rec[-2]", 0.05, 8.0 / 15.0),
        ("QUBITS 3\nCORRELATED_ERROR(0.001) X0*Y2\nM 2\nDETECTOR rec[-1]", 0.001, 1.0),
        ("QUBITS 1\nCORRELATED_ERROR(0.0000001953125) X0\nM 0\nDETECTOR rec[-1]", 1e-4 / 512.0, 1.0),
    ] {
        let prog = parse_program(text).unwrap();
        let o = sample_frames(&prog, shots, 2024).unwrap();
        let q = p * frac;
        let mean = shots as f64 * q;
        let sigma = (shots as f64 * q * (1.0 - q)).sqrt();
        let got = o.detector_fire_count(0) as f64;
        assert!(
            (got - mean).abs() <= 5.0 * sigma.max(1.0),
            "{text}: got {got}, want {mean} ± {}",
            5.0 * sigma
        );
    }
}

/// Many equal-probability channels merged into one geometric sequence still
/// fire independently per channel.
#[test]
fn merged_channels_statistics() {
    let mut prog = CircuitProgram::new(4);
    for q in 0..4 {
        for _ in 0..50 {
            prog.push(Instruction::correlated(0.002, vec![PauliTerm::new(q, Axis::X)]));
        }
    }
    prog.push(Instruction::on_qubits(Opcode::M, &[0, 1, 2, 3]));
    for k in 1..=4 {
        prog.push(Instruction::detector([RecordRef::back(k)]));
    }
    let shots = 200_000;
    let o = sample_frames(&prog, shots, 8).unwrap();
    // Odd number of firings among 50 channels.
    let q = (1.0 - (1.0 - 2.0 * 0.002f64).powi(50)) / 2.0;
    for d in 0..4 {
        let got = o.detector_fire_count(d) as f64;
        let mean = shots as f64 * q;
        let sigma = (shots as f64 * q * (1.0 - q)).sqrt();
        assert!((got - mean).abs() <= 5.0 * sigma, "detector {d}: {got} vs {mean}");
    }
}

#[test]
fn teleportation_preserves_all_stabilizer_states() {
    // Preparations of |0>,|1>,|+>,|->,|+i>,|-i> and their inverses.
    let preps: [(&str, &str); 6] = [
        ("", ""),
        ("X 0", "X 2"),
        ("H 0", "H 2"),
        ("X 0\nH 0", "H 2\nX 2"),
        ("H 0\nS 0", "SDAG 2\nH 2"),
        ("H 0\nSDAG 0", "S 2\nH 2"),
    ];
    for (prep, undo) in preps {
        let text = format!(
            "QUBITS 3\n{prep}\nH 1\nCX 1 2\nCX 0 1\nH 0\nM 0 1\nCOND_X rec[-1] 2\nCOND_Z rec[-2] 2\n{undo}\nM 2\nDETECTOR rec[-1]"
        );
        let prog = parse_program(&text).unwrap();
        let r = check_determinism(&prog).unwrap();
        assert_eq!(r.detectors, vec![false], "state prep {prep:?}");
        let o = stabilizer_oracle_sample(&prog, 64, 3, None).unwrap();
        assert_eq!(o.detector_fire_count(0), 0);
    }
}

#[test]
fn propagation_is_linear() {
    for seed in 0..200u64 {
        let prog = common::random_checked_circuit(seed + 5000, 8, 120);
        let channels: Vec<usize> = prog
            .instructions
            .iter()
            .enumerate()
            .filter(|(_, i)| i.opcode.is_noise())
            .map(|(i, _)| i)
            .collect();
        let Some(&idx) = channels.first() else { continue };
        let n = prog.qubit_count;
        let a = [PauliTerm::new(seed as usize % n, Axis::X)];
        let b = [PauliTerm::new((seed as usize + 1) % n, Axis::Z)];
        let ab = [a[0], b[0]];
        let sa = propagate_pauli(&prog, idx, &a).unwrap();
        let sb = propagate_pauli(&prog, idx, &b).unwrap();
        let sab = propagate_pauli(&prog, idx, &ab).unwrap();
        assert_eq!(sab, sa.xor(&sb), "seed {seed}");
    }
}

/// A single injected Pauli produces exactly the symptom `propagate_pauli`
/// predicts.
#[test]
fn propagation_matches_frame_injection() {
    use dqec::sim::{ErrorEvent, ErrorPattern};
    for seed in 0..300u64 {
        let prog = common::random_checked_circuit(seed + 9000, 10, 150);
        let sim = FrameSimulator::new(&prog).unwrap();
        let mut shots = Vec::new();
        let mut expected = Vec::new();
        for (idx, inst) in prog.instructions.iter().enumerate() {
            if !inst.opcode.is_noise() || inst.params[0] <= 0.0 {
                continue;
            }
            for q in inst.qubits().collect::<Vec<_>>() {
                for axis in Axis::ALL {
                    let paulis = vec![PauliTerm::new(q, axis)];
                    expected.push(propagate_pauli(&prog, idx, &paulis).unwrap());
                    shots.push(vec![ErrorEvent { instruction: idx, paulis }]);
                }
            }
        }
        if shots.is_empty() {
            continue;
        }
        let out = sim.run_pattern(&ErrorPattern { shots }).unwrap();
        let fired = out.fired_per_shot();
        let masks = out.observable_masks();
        for (s, want) in expected.iter().enumerate() {
            let got: Vec<usize> = fired[s].iter().map(|&d| d as usize).collect();
            assert_eq!(got, want.detectors, "seed {seed} shot {s}");
            assert_eq!(masks[s], want.observables);
        }
    }
}
