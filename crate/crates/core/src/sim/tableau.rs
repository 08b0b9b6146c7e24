//! Aaronson–Gottesman stabilizer tableau.
//!
//! Signs of stabilizer rows are generic: [`bool`] for ordinary simulation and
//! [`SignExpr`] for symbolic simulation, where each random measurement outcome
//! becomes a fresh variable and every sign is an affine GF(2) expression in
//! those variables. A measurement record whose expression has no variables is
//! deterministic. Destabilizer signs never influence outcomes and are not
//! tracked.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::frame::ErrorPattern;
use super::outcomes::ShotOutcomes;
use crate::circuit::{Axis, CircuitProgram, Instruction, Opcode, PauliTerm, Target};
use crate::{Error, Result};

pub trait Sign: Clone + Default {
    fn xor_assign(&mut self, other: &Self);
    fn flip(&mut self);
    fn one() -> Self {
        let mut s = Self::default();
        s.flip();
        s
    }
}

impl Sign for bool {
    fn xor_assign(&mut self, other: &Self) {
        *self ^= *other;
    }
    fn flip(&mut self) {
        *self = !*self;
    }
}

/// `constant ⊕ (⊕ vars)`, with `vars` sorted and free of duplicates.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SignExpr {
    pub constant: bool,
    pub vars: Vec<u32>,
}

impl SignExpr {
    pub fn var(v: u32) -> Self {
        SignExpr {
            constant: false,
            vars: vec![v],
        }
    }

    pub fn as_const(&self) -> Option<bool> {
        self.vars.is_empty().then_some(self.constant)
    }
}

impl Sign for SignExpr {
    fn xor_assign(&mut self, other: &Self) {
        self.constant ^= other.constant;
        if other.vars.is_empty() {
            return;
        }
        let (a, b) = (&self.vars, &other.vars);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        self.vars = out;
    }

    fn flip(&mut self) {
        self.constant = !self.constant;
    }
}

#[derive(Clone, Debug)]
pub struct Tableau<S: Sign> {
    n: usize,
    words: usize,
    xs: Vec<u64>,
    zs: Vec<u64>,
    /// Signs of the stabilizer rows `n..2n`.
    signs: Vec<S>,
}

/// Whether the product `row_i * row_h` picks up a factor of -1 relative to
/// the product of their signs (the i^2 contributions of the AG rowsum).
fn rowsum_flips(x1: &[u64], z1: &[u64], x2: &[u64], z2: &[u64]) -> bool {
    let mut pos = 0u32;
    let mut neg = 0u32;
    for w in 0..x1.len() {
        let (a, b, c, d) = (x1[w], z1[w], x2[w], z2[w]);
        let p = (a & b & d & !c) | (a & !b & d & c) | (!a & b & c & !d);
        let m = (a & b & c & !d) | (a & !b & !c & d) | (!a & b & c & d);
        pos += p.count_ones();
        neg += m.count_ones();
    }
    let total = (pos as i64 - neg as i64).rem_euclid(4);
    debug_assert!(total % 2 == 0, "rowsum of anticommuting rows");
    total == 2
}

impl<S: Sign> Tableau<S> {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        let mut t = Tableau {
            n,
            words,
            xs: vec![0; 2 * n * words],
            zs: vec![0; 2 * n * words],
            signs: vec![S::default(); n],
        };
        for q in 0..n {
            t.set_x(q, q, true);
            t.set_z(n + q, q, true);
        }
        t
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    #[inline]
    fn x(&self, row: usize, q: usize) -> bool {
        self.xs[row * self.words + q / 64] >> (q % 64) & 1 == 1
    }

    #[inline]
    fn z(&self, row: usize, q: usize) -> bool {
        self.zs[row * self.words + q / 64] >> (q % 64) & 1 == 1
    }

    #[inline]
    fn set_x(&mut self, row: usize, q: usize, v: bool) {
        let i = row * self.words + q / 64;
        let bit = 1u64 << (q % 64);
        if v {
            self.xs[i] |= bit
        } else {
            self.xs[i] &= !bit
        }
    }

    #[inline]
    fn set_z(&mut self, row: usize, q: usize, v: bool) {
        let i = row * self.words + q / 64;
        let bit = 1u64 << (q % 64);
        if v {
            self.zs[i] |= bit
        } else {
            self.zs[i] &= !bit
        }
    }

    fn row(&self, r: usize) -> (Vec<u64>, Vec<u64>) {
        let w = self.words;
        (
            self.xs[r * w..(r + 1) * w].to_vec(),
            self.zs[r * w..(r + 1) * w].to_vec(),
        )
    }

    pub fn h(&mut self, q: usize) {
        for r in 0..2 * self.n {
            let (x, z) = (self.x(r, q), self.z(r, q));
            if r >= self.n && x && z {
                self.signs[r - self.n].flip();
            }
            self.set_x(r, q, z);
            self.set_z(r, q, x);
        }
    }

    pub fn s(&mut self, q: usize) {
        for r in 0..2 * self.n {
            let (x, z) = (self.x(r, q), self.z(r, q));
            if r >= self.n && x && z {
                self.signs[r - self.n].flip();
            }
            self.set_z(r, q, z ^ x);
        }
    }

    pub fn sdag(&mut self, q: usize) {
        for r in 0..2 * self.n {
            let (x, z) = (self.x(r, q), self.z(r, q));
            if r >= self.n && x && !z {
                self.signs[r - self.n].flip();
            }
            self.set_z(r, q, z ^ x);
        }
    }

    pub fn cx(&mut self, c: usize, t: usize) {
        for r in 0..2 * self.n {
            let (xc, zc, xt, zt) = (self.x(r, c), self.z(r, c), self.x(r, t), self.z(r, t));
            if r >= self.n && xc && zt && (xt == zc) {
                self.signs[r - self.n].flip();
            }
            self.set_x(r, t, xt ^ xc);
            self.set_z(r, c, zc ^ zt);
        }
    }

    pub fn cz(&mut self, a: usize, b: usize) {
        self.h(b);
        self.cx(a, b);
        self.h(b);
    }

    /// Multiplies the state by the Pauli `axis` on `q` when `cond` is one.
    pub fn pauli_if(&mut self, q: usize, axis: Axis, cond: &S) {
        let (px, pz) = axis.bits();
        for r in self.n..2 * self.n {
            let anti = (px && self.z(r, q)) ^ (pz && self.x(r, q));
            if anti {
                self.signs[r - self.n].xor_assign(cond);
            }
        }
    }

    pub fn pauli(&mut self, q: usize, axis: Axis) {
        self.pauli_if(q, axis, &S::one());
    }

    /// Rowsum of stabilizer or destabilizer row `h` with stabilizer row `p`.
    fn rowsum(&mut self, h: usize, p: usize) {
        let w = self.words;
        if h >= self.n {
            let (px, pz) = self.row(p);
            let flip = rowsum_flips(
                &px,
                &pz,
                &self.xs[h * w..(h + 1) * w],
                &self.zs[h * w..(h + 1) * w],
            );
            let ps = self.signs[p - self.n].clone();
            let hs = &mut self.signs[h - self.n];
            hs.xor_assign(&ps);
            if flip {
                hs.flip();
            }
        }
        for i in 0..w {
            self.xs[h * w + i] ^= self.xs[p * w + i];
            self.zs[h * w + i] ^= self.zs[p * w + i];
        }
    }

    /// Measures Z on `q`. `random` supplies the outcome when it is not
    /// determined by the state. Returns (outcome, was_random).
    pub fn measure_z(&mut self, q: usize, random: impl FnOnce() -> S) -> (S, bool) {
        let n = self.n;
        let w = self.words;
        if let Some(p) = (n..2 * n).find(|&r| self.x(r, q)) {
            for i in 0..2 * n {
                if i != p && self.x(i, q) {
                    self.rowsum(i, p);
                }
            }
            let d = p - n;
            for i in 0..w {
                self.xs[d * w + i] = self.xs[p * w + i];
                self.zs[d * w + i] = self.zs[p * w + i];
                self.xs[p * w + i] = 0;
                self.zs[p * w + i] = 0;
            }
            self.set_z(p, q, true);
            let out = random();
            self.signs[d] = out.clone();
            (out, true)
        } else {
            let mut sx = vec![0u64; w];
            let mut sz = vec![0u64; w];
            let mut sign = S::default();
            for i in 0..n {
                if self.x(i, q) {
                    let r = i + n;
                    let (rx, rz) = (&self.xs[r * w..(r + 1) * w], &self.zs[r * w..(r + 1) * w]);
                    if rowsum_flips(rx, rz, &sx, &sz) {
                        sign.flip();
                    }
                    sign.xor_assign(&self.signs[i]);
                    for k in 0..w {
                        sx[k] ^= rx[k];
                        sz[k] ^= rz[k];
                    }
                }
            }
            (sign, false)
        }
    }

    pub fn measure_x(&mut self, q: usize, random: impl FnOnce() -> S) -> (S, bool) {
        self.h(q);
        let out = self.measure_z(q, random);
        self.h(q);
        out
    }

    pub fn reset_z(&mut self, q: usize, random: impl FnOnce() -> S) {
        let (m, _) = self.measure_z(q, random);
        self.pauli_if(q, Axis::X, &m);
    }

    pub fn reset_x(&mut self, q: usize, random: impl FnOnce() -> S) {
        self.h(q);
        self.reset_z(q, random);
        self.h(q);
    }

    fn to_z(&mut self, t: PauliTerm) {
        match t.axis {
            Axis::X => self.h(t.qubit),
            Axis::Y => {
                self.sdag(t.qubit);
                self.h(t.qubit);
            }
            Axis::Z => {}
        }
    }

    fn from_z(&mut self, t: PauliTerm) {
        match t.axis {
            Axis::X => self.h(t.qubit),
            Axis::Y => {
                self.h(t.qubit);
                self.s(t.qubit);
            }
            Axis::Z => {}
        }
    }

    /// Measures a two-qubit Pauli product on distinct qubits.
    pub fn measure_pair(&mut self, a: PauliTerm, b: PauliTerm, random: impl FnOnce() -> S) -> (S, bool) {
        self.to_z(a);
        self.to_z(b);
        self.cx(a.qubit, b.qubit);
        let out = self.measure_z(b.qubit, random);
        self.cx(a.qubit, b.qubit);
        self.from_z(b);
        self.from_z(a);
        out
    }
}

/// Runs the Clifford part of `inst` on `t`, appending outcomes to `record`.
/// Noise instructions and annotations are ignored.
fn apply_instruction<S: Sign>(
    t: &mut Tableau<S>,
    inst: &Instruction,
    record: &mut Vec<S>,
    random: &mut impl FnMut() -> S,
) {
    let qs = inst.qubit_targets();
    match inst.opcode {
        Opcode::H => qs.iter().for_each(|&q| t.h(q)),
        Opcode::S => qs.iter().for_each(|&q| t.s(q)),
        Opcode::Sdag => qs.iter().for_each(|&q| t.sdag(q)),
        Opcode::X => qs.iter().for_each(|&q| t.pauli(q, Axis::X)),
        Opcode::Y => qs.iter().for_each(|&q| t.pauli(q, Axis::Y)),
        Opcode::Z => qs.iter().for_each(|&q| t.pauli(q, Axis::Z)),
        Opcode::Cx => qs.chunks(2).for_each(|c| t.cx(c[0], c[1])),
        Opcode::Cz => qs.chunks(2).for_each(|c| t.cz(c[0], c[1])),
        Opcode::Rz => qs.iter().for_each(|&q| t.reset_z(q, &mut *random)),
        Opcode::Rx => qs.iter().for_each(|&q| t.reset_x(q, &mut *random)),
        Opcode::M => {
            for &q in &qs {
                let (m, _) = t.measure_z(q, &mut *random);
                record.push(m);
            }
        }
        Opcode::Mx => {
            for &q in &qs {
                let (m, _) = t.measure_x(q, &mut *random);
                record.push(m);
            }
        }
        Opcode::Mpp => {
            for target in &inst.targets {
                if let Target::Product(terms) = target {
                    let (m, _) = t.measure_pair(terms[0], terms[1], &mut *random);
                    record.push(m);
                }
            }
        }
        Opcode::CondX | Opcode::CondZ => {
            let r = inst.records().next().expect("validated");
            let m = r.resolve(record.len()).expect("validated");
            let cond = record[m].clone();
            let axis = if inst.opcode == Opcode::CondX { Axis::X } else { Axis::Z };
            t.pauli_if(qs[0], axis, &cond);
        }
        _ => {}
    }
}

/// Noiseless values of every detector and observable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reference {
    pub measurements: usize,
    pub detectors: Vec<bool>,
    pub observables: Vec<bool>,
}

/// Simulates the noiseless circuit symbolically and returns the measurement
/// record as sign expressions.
pub fn symbolic_record(prog: &CircuitProgram) -> Result<Vec<SignExpr>> {
    let violations = crate::circuit::validate_program(prog);
    if let Some(v) = violations.first() {
        return Err(Error::InvalidProgram(v.to_string()));
    }
    let mut t = Tableau::<SignExpr>::new(prog.qubit_count);
    let mut record = Vec::with_capacity(prog.num_measurements());
    let mut next = 0u32;
    let mut fresh = || {
        next += 1;
        SignExpr::var(next - 1)
    };
    for inst in &prog.instructions {
        apply_instruction(&mut t, inst, &mut record, &mut fresh);
    }
    Ok(record)
}

/// Confirms every detector and observable has a fixed value in the noiseless
/// circuit and returns those values.
pub fn check_determinism(prog: &CircuitProgram) -> Result<Reference> {
    let record = symbolic_record(prog)?;
    let (dets, obs) = prog.resolve_annotations()?;
    let eval = |what: &str, i: usize, recs: &[usize]| -> Result<bool> {
        let mut acc = SignExpr::default();
        for &m in recs {
            acc.xor_assign(&record[m]);
        }
        acc.as_const().ok_or_else(|| {
            Error::Sim(format!("{what} {i} is not deterministic in the noiseless circuit"))
        })
    };
    let detectors = dets
        .iter()
        .enumerate()
        .map(|(i, r)| eval("detector", i, r))
        .collect::<Result<Vec<_>>>()?;
    let observables = obs
        .iter()
        .enumerate()
        .map(|(i, r)| eval("observable", i, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(Reference {
        measurements: record.len(),
        detectors,
        observables,
    })
}

/// Largest circuit the oracle accepts.
pub const ORACLE_MAX_QUBITS: usize = 32;

/// Full tableau simulation of every shot with real random measurement
/// outcomes. With `injected`, its errors replace sampled noise; otherwise each
/// channel fires independently with the same semantics as the frame sampler.
/// Outputs are flips relative to the noiseless reference values.
pub fn stabilizer_oracle_sample(
    prog: &CircuitProgram,
    shots: usize,
    seed: u64,
    injected: Option<&ErrorPattern>,
) -> Result<ShotOutcomes> {
    if prog.qubit_count > ORACLE_MAX_QUBITS {
        return Err(Error::Sim(format!(
            "oracle limited to {ORACLE_MAX_QUBITS} qubits, circuit has {}",
            prog.qubit_count
        )));
    }
    let shots = injected.map_or(shots, |p| p.shots.len());
    let reference = check_determinism(prog)?;
    let (dets, obs) = prog.resolve_annotations()?;
    let mut out = ShotOutcomes::zeros(shots, dets.len(), obs.len());

    for shot in 0..shots {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shot as u64);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        noise_rng.set_stream(shot as u64);
        let events = injected.map(|p| &p.shots[shot]);
        let mut ev = 0usize;

        let mut t = Tableau::<bool>::new(prog.qubit_count);
        let mut record = Vec::with_capacity(reference.measurements);
        for (idx, inst) in prog.instructions.iter().enumerate() {
            if inst.opcode.is_noise() {
                if injected.is_none() {
                    sample_channel(&mut t, inst, &mut noise_rng);
                }
            } else {
                apply_instruction(&mut t, inst, &mut record, &mut || rng.gen::<bool>());
            }
            if let Some(events) = events {
                while ev < events.len() && events[ev].instruction == idx {
                    for p in &events[ev].paulis {
                        t.pauli(p.qubit, p.axis);
                    }
                    ev += 1;
                }
            }
        }
        for (d, recs) in dets.iter().enumerate() {
            let v = recs.iter().fold(false, |a, &m| a ^ record[m]);
            out.set_detector(d, shot, v ^ reference.detectors[d]);
        }
        for (k, recs) in obs.iter().enumerate() {
            let v = recs.iter().fold(false, |a, &m| a ^ record[m]);
            out.set_observable(k, shot, v ^ reference.observables[k]);
        }
    }
    Ok(out)
}

fn sample_channel(t: &mut Tableau<bool>, inst: &Instruction, rng: &mut ChaCha8Rng) {
    let p = inst.params[0];
    let qs = inst.qubit_targets();
    match inst.opcode {
        Opcode::Depolarize1 => {
            for &q in &qs {
                if rng.gen_bool(p) {
                    t.pauli(q, Axis::ALL[rng.gen_range(0..3)]);
                }
            }
        }
        Opcode::Depolarize2 => {
            for pair in qs.chunks(2) {
                if rng.gen_bool(p) {
                    let code = rng.gen_range(1..16usize);
                    for (q, c) in [(pair[0], code & 3), (pair[1], code >> 2)] {
                        if let Some(a) = Axis::from_bits(c & 1 == 1, c & 2 == 2) {
                            t.pauli(q, a);
                        }
                    }
                }
            }
        }
        Opcode::CorrelatedError => {
            if rng.gen_bool(p) {
                for target in &inst.targets {
                    if let Target::Product(terms) = target {
                        for term in terms {
                            t.pauli(term.qubit, term.axis);
                        }
                    }
                }
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_program;

    #[test]
    fn bell_pair_correlated() {
        let p = parse_program("QUBITS 2\nH 0\nCX 0 1\nM 0 1\nDETECTOR rec[-1] rec[-2]").unwrap();
        let r = symbolic_record(&p).unwrap();
        assert_eq!(r[0].vars.len(), 1);
        assert_eq!(r[0], r[1]);
        let reference = check_determinism(&p).unwrap();
        assert_eq!(reference.detectors, vec![false]);
        let o = stabilizer_oracle_sample(&p, 50, 3, None).unwrap();
        assert_eq!(o.detector_fire_count(0), 0);
    }

    #[test]
    fn random_detector_rejected() {
        let p = parse_program("QUBITS 1\nH 0\nM 0\nDETECTOR rec[-1]").unwrap();
        assert!(check_determinism(&p).is_err());
    }

    #[test]
    fn sign_conventions() {
        // X|0> measured in Z gives 1; S maps |+> to |+i>, measured in Y gives 0.
        let p = parse_program(
            "QUBITS 3\nX 0\nM 0\nH 1\nS 1\nMPP Y1*Z2\nH 2\nSDAG 2\nMPP Z0*Y2\nDETECTOR rec[-3]\nDETECTOR rec[-2]\nDETECTOR rec[-1]",
        )
        .unwrap();
        let r = check_determinism(&p).unwrap();
        // |0>_0 after X is |1>, so Z0 = -1; |-i>_2 so Y2 = -1 and Z0*Y2 = +1.
        assert_eq!(r.detectors, vec![true, false, false]);
    }

    #[test]
    fn ghz_parity() {
        let p = parse_program(
            "QUBITS 3\nH 0\nCX 0 1 1 2\nMPP X0*X1\nMX 2\nDETECTOR rec[-1] rec[-2]\nMPP Z0*Z1\nDETECTOR rec[-1]",
        )
        .unwrap();
        let r = check_determinism(&p).unwrap();
        assert_eq!(r.detectors, vec![false, false]);
    }
}
