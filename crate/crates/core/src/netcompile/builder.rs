use crate::circuit::{Axis, CircuitProgram, Instruction, Opcode, RecordRef};

/// Appends instructions while tracking measurement indices and per-qubit
/// timing for the current timing window (a round or a swap-out block).
pub(crate) struct Builder {
    pub prog: CircuitProgram,
    pub measurements: usize,
    /// Local error rate applied after gates; zero in noiseless rounds.
    pub p_l: f64,
    pub p_nl: f64,
    pub tau_gate: u64,
    pub tau_bell: u64,
    clock: Vec<u64>,
    busy: Vec<u64>,
    /// Start of the current Bell half's life, for comm-qubit waiting time.
    born: Vec<u64>,
}

pub(crate) fn idle_probability(p: f64, ticks: u64) -> f64 {
    1.0 - (1.0 - p).powi(ticks as i32)
}

impl Builder {
    pub fn new(tau_gate: u64, tau_bell: u64) -> Self {
        Builder {
            prog: CircuitProgram::new(0),
            measurements: 0,
            p_l: 0.0,
            p_nl: 0.0,
            tau_gate,
            tau_bell,
            clock: Vec::new(),
            busy: Vec::new(),
            born: Vec::new(),
        }
    }

    fn touch(&mut self, q: usize) {
        if q >= self.clock.len() {
            self.clock.resize(q + 1, 0);
            self.busy.resize(q + 1, 0);
            self.born.resize(q + 1, 0);
        }
        self.prog.qubit_count = self.prog.qubit_count.max(q + 1);
    }

    fn schedule(&mut self, qs: &[usize], dur: u64) {
        for &q in qs {
            self.touch(q);
        }
        let start = qs.iter().map(|&q| self.clock[q]).max().unwrap_or(0);
        for &q in qs {
            self.clock[q] = start + dur;
            self.busy[q] += dur;
        }
    }

    /// Starts a new timing window.
    pub fn reset_window(&mut self) {
        self.clock.iter_mut().for_each(|c| *c = 0);
        self.busy.iter_mut().for_each(|c| *c = 0);
        self.born.iter_mut().for_each(|c| *c = 0);
    }

    pub fn window_duration(&self) -> u64 {
        self.clock.iter().copied().max().unwrap_or(0)
    }

    pub fn busy(&self, q: usize) -> u64 {
        self.busy.get(q).copied().unwrap_or(0)
    }

    /// Makes qubit `q` wait until `t`.
    pub fn sync_to(&mut self, q: usize, t: u64) {
        self.touch(q);
        self.clock[q] = self.clock[q].max(t);
    }

    pub fn push(&mut self, inst: Instruction) {
        self.measurements += inst.measurement_count();
        for q in inst.qubits() {
            self.touch(q);
        }
        self.prog.push(inst);
    }

    pub fn push_tagged(&mut self, inst: Instruction, tag: &str) {
        for q in inst.qubits() {
            self.touch(q);
        }
        self.prog.push_tagged(inst, [tag]);
    }

    pub fn noise1(&mut self, p: f64, qs: &[usize]) {
        if p > 0.0 && !qs.is_empty() {
            self.push(Instruction::noise(Opcode::Depolarize1, p, qs));
        }
    }

    pub fn noise2(&mut self, p: f64, a: usize, b: usize) {
        if p > 0.0 {
            self.push(Instruction::noise(Opcode::Depolarize2, p, &[a, b]));
        }
    }

    /// Single-qubit gate or reset followed by local noise.
    pub fn gate1(&mut self, op: Opcode, q: usize) {
        self.push(Instruction::on_qubits(op, &[q]));
        self.schedule(&[q], self.tau_gate);
        self.noise1(self.p_l, &[q]);
    }

    pub fn gate2(&mut self, op: Opcode, a: usize, b: usize) {
        self.push(Instruction::on_qubits(op, &[a, b]));
        self.schedule(&[a, b], self.tau_gate);
        self.noise2(self.p_l, a, b);
    }

    /// `P` on `target` controlled by `control`.
    pub fn controlled_pauli(&mut self, control: usize, target: usize, axis: Axis) {
        match axis {
            Axis::X => self.gate2(Opcode::Cx, control, target),
            Axis::Z => self.gate2(Opcode::Cz, control, target),
            Axis::Y => {
                self.gate1(Opcode::Sdag, target);
                self.gate2(Opcode::Cx, control, target);
                self.gate1(Opcode::S, target);
            }
        }
    }

    /// Single-qubit measurement with local noise before it; returns the
    /// absolute record index.
    pub fn measure(&mut self, op: Opcode, q: usize) -> usize {
        self.noise1(self.p_l, &[q]);
        self.push(Instruction::on_qubits(op, &[q]));
        self.schedule(&[q], self.tau_gate);
        self.measurements - 1
    }

    /// Measures a communication qubit, first applying idle noise for the time
    /// it waited since its Bell pair was made.
    pub fn measure_comm(&mut self, op: Opcode, q: usize) -> usize {
        self.touch(q);
        let waited = self.clock[q] - self.born[q] - self.busy[q];
        self.noise1(idle_probability(self.p_l, waited), &[q]);
        self.measure(op, q)
    }

    pub fn mpp(&mut self, a: (usize, Axis), b: (usize, Axis)) -> usize {
        self.noise2(self.p_l, a.0, b.0);
        self.push(Instruction::mpp(vec![vec![
            crate::circuit::PauliTerm::new(a.0, a.1),
            crate::circuit::PauliTerm::new(b.0, b.1),
        ]]));
        self.schedule(&[a.0, b.0], self.tau_gate);
        self.measurements - 1
    }

    /// Pauli on `q` conditioned on record `rec`, followed by local noise.
    pub fn cond(&mut self, axis: Axis, rec: usize, q: usize) {
        let op = match axis {
            Axis::X => Opcode::CondX,
            Axis::Z => Opcode::CondZ,
            Axis::Y => unreachable!("no conditional Y"),
        };
        self.push(Instruction::cond(op, self.rec(rec), q));
        self.schedule(&[q], self.tau_gate);
        self.noise1(self.p_l, &[q]);
    }

    /// Ideal |Φ+> on `(a, b)` followed by two-qubit depolarizing noise.
    pub fn bell(&mut self, a: usize, b: usize, p: f64) {
        self.push(Instruction::on_qubits(Opcode::Rz, &[a, b]));
        self.push(Instruction::on_qubits(Opcode::H, &[a]));
        self.push(Instruction::on_qubits(Opcode::Cx, &[a, b]));
        self.noise2(p, a, b);
        self.touch(a.max(b));
        let start = self.clock[a].max(self.clock[b]);
        for q in [a, b] {
            self.clock[q] = start + self.tau_bell;
            self.born[q] = start;
            self.busy[q] = self.tau_bell;
        }
    }

    pub fn rec(&self, abs: usize) -> RecordRef {
        RecordRef::back(self.measurements - abs)
    }

    /// Parity annotation over absolute record indices; repeated indices cancel.
    pub fn parity_refs(&self, indices: &[usize]) -> Vec<RecordRef> {
        let mut v = indices.to_vec();
        v.sort_unstable();
        let mut out = Vec::with_capacity(v.len());
        let mut i = 0;
        while i < v.len() {
            let mut j = i;
            while j < v.len() && v[j] == v[i] {
                j += 1;
            }
            if (j - i) % 2 == 1 {
                out.push(self.rec(v[i]));
            }
            i = j;
        }
        out
    }
}
