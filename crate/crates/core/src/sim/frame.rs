use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::outcomes::ShotOutcomes;
use crate::circuit::{Axis, CircuitProgram, Opcode, PauliTerm, Target};
use crate::{Error, Result};

/// Shots simulated together. Shot `s` always lands in block `s / BLOCK_SHOTS`
/// and draws randomness only from that block's stream, so outcomes depend on
/// the seed and shot index alone.
pub const BLOCK_SHOTS: usize = 1024;
const W: usize = BLOCK_SHOTS / 64;

#[derive(Clone, Debug)]
enum Op {
    H(Vec<u32>),
    S(Vec<u32>),
    Cx(Vec<(u32, u32)>),
    Cz(Vec<(u32, u32)>),
    Reset(Vec<u32>),
    Mz(Vec<u32>),
    Mx(Vec<u32>),
    Mpp(Vec<[(u32, bool, bool); 2]>),
    CondX(u32, u32),
    CondZ(u32, u32),
    Noise(u32),
}

#[derive(Clone, Debug)]
enum Site {
    Dep1(u32),
    Dep2(u32, u32),
    Fixed(Vec<(u32, bool, bool)>),
}

#[derive(Clone, Debug)]
struct Channel {
    instruction: u32,
    site: Site,
}

#[derive(Clone, Debug)]
struct NoiseGroup {
    p: f64,
    channels: Vec<Channel>,
}

/// One injected error: `paulis` are applied right after instruction
/// `instruction` in a single shot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorEvent {
    pub instruction: usize,
    pub paulis: Vec<PauliTerm>,
}

/// Errors for every shot of a run, in instruction order within each shot.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ErrorPattern {
    pub shots: Vec<Vec<ErrorEvent>>,
}

/// A circuit lowered for word-parallel frame propagation.
#[derive(Clone, Debug)]
pub struct FrameSimulator {
    qubits: usize,
    measurements: usize,
    ops: Vec<Op>,
    groups: Vec<NoiseGroup>,
    /// Group index for every noise instruction index.
    group_of: Vec<Option<u32>>,
    detectors: Vec<Vec<u32>>,
    observables: Vec<Vec<u32>>,
}

fn pauli_bits(a: Axis) -> (bool, bool) {
    a.bits()
}

/// Pauli code 1..=3 to (x, z): 1 = X, 2 = Z, 3 = Y.
fn code_bits(c: u32) -> (bool, bool) {
    (c & 1 == 1, c & 2 == 2)
}

fn code_axis(c: u32) -> Option<Axis> {
    let (x, z) = code_bits(c);
    Axis::from_bits(x, z)
}

impl FrameSimulator {
    /// Lowers `prog`. The program must be structurally valid.
    pub fn new(prog: &CircuitProgram) -> Result<Self> {
        let violations = crate::circuit::validate_program(prog);
        if let Some(v) = violations.first() {
            return Err(Error::InvalidProgram(v.to_string()));
        }
        let (dets, obs) = prog.resolve_annotations()?;
        let to32 = |v: Vec<Vec<usize>>| -> Vec<Vec<u32>> {
            v.into_iter()
                .map(|r| r.into_iter().map(|m| m as u32).collect())
                .collect()
        };

        let mut ops = Vec::new();
        let mut groups: Vec<NoiseGroup> = Vec::new();
        let mut group_of = vec![None; prog.instructions.len()];
        let mut measured = 0usize;
        let mut open_group: Option<usize> = None;

        for (idx, inst) in prog.instructions.iter().enumerate() {
            let qs = || inst.qubit_targets().into_iter().map(|q| q as u32).collect::<Vec<_>>();
            let pairs = || {
                inst.qubit_targets()
                    .chunks(2)
                    .map(|c| (c[0] as u32, c[1] as u32))
                    .collect::<Vec<_>>()
            };
            if inst.opcode.is_noise() {
                let p = inst.params[0];
                let channels: Vec<Channel> = match inst.opcode {
                    Opcode::Depolarize1 => qs()
                        .into_iter()
                        .map(Site::Dep1)
                        .collect::<Vec<_>>(),
                    Opcode::Depolarize2 => pairs().into_iter().map(|(a, b)| Site::Dep2(a, b)).collect(),
                    _ => inst
                        .targets
                        .iter()
                        .filter_map(|t| match t {
                            Target::Product(terms) => Some(Site::Fixed(
                                terms
                                    .iter()
                                    .map(|t| {
                                        let (x, z) = pauli_bits(t.axis);
                                        (t.qubit as u32, x, z)
                                    })
                                    .collect(),
                            )),
                            _ => None,
                        })
                        .collect(),
                }
                .into_iter()
                .map(|site| Channel {
                    instruction: idx as u32,
                    site,
                })
                .collect();
                if p <= 0.0 || channels.is_empty() {
                    continue;
                }
                // Adjacent noise with equal probability shares one geometric
                // sequence; noise instructions commute with each other.
                match open_group {
                    Some(g) if groups[g].p == p => {
                        groups[g].channels.extend(channels);
                        group_of[idx] = Some(g as u32);
                    }
                    _ => {
                        groups.push(NoiseGroup { p, channels });
                        let g = groups.len() - 1;
                        ops.push(Op::Noise(g as u32));
                        open_group = Some(g);
                        group_of[idx] = Some(g as u32);
                    }
                }
                continue;
            }
            if !matches!(
                inst.opcode,
                Opcode::X | Opcode::Y | Opcode::Z | Opcode::Tick | Opcode::Detector | Opcode::Observable
            ) {
                open_group = None;
            }
            match inst.opcode {
                Opcode::H => ops.push(Op::H(qs())),
                Opcode::S | Opcode::Sdag => ops.push(Op::S(qs())),
                Opcode::Cx => ops.push(Op::Cx(pairs())),
                Opcode::Cz => ops.push(Op::Cz(pairs())),
                Opcode::Rz | Opcode::Rx => ops.push(Op::Reset(qs())),
                Opcode::M => ops.push(Op::Mz(qs())),
                Opcode::Mx => ops.push(Op::Mx(qs())),
                Opcode::Mpp => ops.push(Op::Mpp(
                    inst.targets
                        .iter()
                        .filter_map(|t| match t {
                            Target::Product(terms) => {
                                let f = |t: &PauliTerm| {
                                    let (x, z) = pauli_bits(t.axis);
                                    (t.qubit as u32, x, z)
                                };
                                Some([f(&terms[0]), f(&terms[1])])
                            }
                            _ => None,
                        })
                        .collect(),
                )),
                Opcode::CondX | Opcode::CondZ => {
                    let rec = inst.records().next().expect("validated");
                    let m = rec.resolve(measured).expect("validated") as u32;
                    let q = inst.qubit_targets()[0] as u32;
                    ops.push(if inst.opcode == Opcode::CondX {
                        Op::CondX(m, q)
                    } else {
                        Op::CondZ(m, q)
                    });
                }
                _ => {}
            }
            measured += inst.measurement_count();
        }

        Ok(FrameSimulator {
            qubits: prog.qubit_count,
            measurements: measured,
            ops,
            groups,
            group_of,
            detectors: to32(dets),
            observables: to32(obs),
        })
    }

    pub fn num_detectors(&self) -> usize {
        self.detectors.len()
    }

    pub fn num_observables(&self) -> usize {
        self.observables.len()
    }

    pub fn num_measurements(&self) -> usize {
        self.measurements
    }

    /// Samples shots `[first_block * BLOCK_SHOTS, ...)` covering `blocks`
    /// whole blocks.
    pub fn sample_blocks(&self, first_block: u64, blocks: u64, seed: u64) -> ShotOutcomes {
        let parts: Vec<ShotOutcomes> = (first_block..first_block + blocks)
            .into_par_iter()
            .map(|b| {
                let mut src = Sampled {
                    rng: block_rng(seed, b),
                    log: None,
                };
                self.run_block(&mut src)
            })
            .collect();
        concat(parts, self.num_detectors(), self.num_observables())
    }

    /// Samples exactly `shots` shots.
    pub fn sample(&self, shots: usize, seed: u64) -> ShotOutcomes {
        let blocks = shots.div_ceil(BLOCK_SHOTS) as u64;
        let mut out = self.sample_blocks(0, blocks, seed);
        out.truncate(shots);
        out
    }

    /// Samples like [`sample`](Self::sample) and also returns every error that
    /// fired, for replay in another simulator.
    pub fn sample_with_pattern(&self, shots: usize, seed: u64) -> (ShotOutcomes, ErrorPattern) {
        let blocks = shots.div_ceil(BLOCK_SHOTS) as u64;
        let mut parts = Vec::new();
        let mut pattern = ErrorPattern::default();
        for b in 0..blocks {
            let mut src = Sampled {
                rng: block_rng(seed, b),
                log: Some(vec![Vec::new(); BLOCK_SHOTS]),
            };
            parts.push(self.run_block(&mut src));
            let log = src.log.take().unwrap();
            for shot_events in log {
                let mut events: Vec<ErrorEvent> = shot_events
                    .into_iter()
                    .map(|(g, c, code)| self.event(g, c, code))
                    .collect();
                events.sort_by_key(|e| e.instruction);
                pattern.shots.push(events);
            }
        }
        pattern.shots.truncate(shots);
        let mut out = concat(parts, self.num_detectors(), self.num_observables());
        out.truncate(shots);
        (out, pattern)
    }

    /// Runs with a fixed error pattern instead of sampled noise.
    pub fn run_pattern(&self, pattern: &ErrorPattern) -> Result<ShotOutcomes> {
        let shots = pattern.shots.len();
        let mut parts = Vec::new();
        for chunk in pattern.shots.chunks(BLOCK_SHOTS) {
            let mut per_group: Vec<Vec<(usize, Vec<PauliTerm>)>> = vec![Vec::new(); self.groups.len()];
            for (s, events) in chunk.iter().enumerate() {
                for e in events {
                    let g = self
                        .group_of
                        .get(e.instruction)
                        .copied()
                        .flatten()
                        .ok_or_else(|| {
                            Error::Sim(format!(
                                "instruction {} is not an active error channel",
                                e.instruction
                            ))
                        })?;
                    per_group[g as usize].push((s, e.paulis.clone()));
                }
            }
            let mut src = Injected { per_group };
            parts.push(self.run_block(&mut src));
        }
        let mut out = concat(parts, self.num_detectors(), self.num_observables());
        out.truncate(shots);
        Ok(out)
    }

    fn event(&self, g: u32, c: u32, code: u32) -> ErrorEvent {
        let ch = &self.groups[g as usize].channels[c as usize];
        let paulis = match &ch.site {
            Site::Dep1(q) => vec![PauliTerm::new(*q as usize, code_axis(code).unwrap())],
            Site::Dep2(a, b) => {
                let mut v = Vec::new();
                if let Some(ax) = code_axis(code & 3) {
                    v.push(PauliTerm::new(*a as usize, ax));
                }
                if let Some(ax) = code_axis(code >> 2) {
                    v.push(PauliTerm::new(*b as usize, ax));
                }
                v
            }
            Site::Fixed(terms) => terms
                .iter()
                .map(|&(q, x, z)| PauliTerm::new(q as usize, Axis::from_bits(x, z).unwrap()))
                .collect(),
        };
        ErrorEvent {
            instruction: ch.instruction as usize,
            paulis,
        }
    }

    fn run_block(&self, noise: &mut impl NoiseSource) -> ShotOutcomes {
        let n = self.qubits;
        let mut f = Frame {
            x: vec![0u64; n * W],
            z: vec![0u64; n * W],
            rec: vec![0u64; self.measurements * W],
        };
        let mut m = 0usize;
        for op in &self.ops {
            match op {
                Op::H(qs) => {
                    for &q in qs {
                        let r = q as usize * W..(q as usize + 1) * W;
                        let (x, z) = (&mut f.x[r.clone()], &mut f.z[r]);
                        x.swap_with_slice(z);
                    }
                }
                Op::S(qs) => {
                    for &q in qs {
                        let b = q as usize * W;
                        for w in 0..W {
                            f.z[b + w] ^= f.x[b + w];
                        }
                    }
                }
                Op::Cx(pairs) => {
                    for &(c, t) in pairs {
                        let (c, t) = (c as usize * W, t as usize * W);
                        for w in 0..W {
                            f.x[t + w] ^= f.x[c + w];
                            f.z[c + w] ^= f.z[t + w];
                        }
                    }
                }
                Op::Cz(pairs) => {
                    for &(a, b) in pairs {
                        let (a, b) = (a as usize * W, b as usize * W);
                        for w in 0..W {
                            f.z[a + w] ^= f.x[b + w];
                            f.z[b + w] ^= f.x[a + w];
                        }
                    }
                }
                Op::Reset(qs) => {
                    for &q in qs {
                        let b = q as usize * W;
                        f.x[b..b + W].fill(0);
                        f.z[b..b + W].fill(0);
                    }
                }
                Op::Mz(qs) => {
                    for &q in qs {
                        let b = q as usize * W;
                        for w in 0..W {
                            f.rec[m * W + w] = f.x[b + w];
                        }
                        m += 1;
                    }
                }
                Op::Mx(qs) => {
                    for &q in qs {
                        let b = q as usize * W;
                        for w in 0..W {
                            f.rec[m * W + w] = f.z[b + w];
                        }
                        m += 1;
                    }
                }
                Op::Mpp(prods) => {
                    for prod in prods {
                        let mut acc = [0u64; W];
                        for &(q, px, pz) in prod {
                            let b = q as usize * W;
                            for (w, a) in acc.iter_mut().enumerate() {
                                // anticommutes iff px*z + pz*x is odd
                                let mut v = 0;
                                if px {
                                    v ^= f.z[b + w];
                                }
                                if pz {
                                    v ^= f.x[b + w];
                                }
                                *a ^= v;
                            }
                        }
                        f.rec[m * W..(m + 1) * W].copy_from_slice(&acc);
                        m += 1;
                    }
                }
                Op::CondX(r, q) => {
                    let (r, b) = (*r as usize * W, *q as usize * W);
                    for w in 0..W {
                        f.x[b + w] ^= f.rec[r + w];
                    }
                }
                Op::CondZ(r, q) => {
                    let (r, b) = (*r as usize * W, *q as usize * W);
                    for w in 0..W {
                        f.z[b + w] ^= f.rec[r + w];
                    }
                }
                Op::Noise(g) => noise.apply(*g, &self.groups[*g as usize], &mut f),
            }
        }

        let mut out = ShotOutcomes::zeros(BLOCK_SHOTS, self.detectors.len(), self.observables.len());
        let fold = |recs: &[u32], dst: &mut [u64]| {
            for &r in recs {
                let r = r as usize * W;
                for w in 0..W {
                    dst[w] ^= f.rec[r + w];
                }
            }
        };
        for (d, recs) in self.detectors.iter().enumerate() {
            fold(recs, &mut out.detectors[d * W..(d + 1) * W]);
        }
        for (k, recs) in self.observables.iter().enumerate() {
            fold(recs, &mut out.observables[k * W..(k + 1) * W]);
        }
        out
    }
}

struct Frame {
    x: Vec<u64>,
    z: Vec<u64>,
    rec: Vec<u64>,
}

impl Frame {
    #[inline]
    fn flip(&mut self, q: u32, x: bool, z: bool, shot: usize) {
        let i = q as usize * W + shot / 64;
        let bit = 1u64 << (shot % 64);
        if x {
            self.x[i] ^= bit;
        }
        if z {
            self.z[i] ^= bit;
        }
    }
}

trait NoiseSource {
    fn apply(&mut self, g: u32, group: &NoiseGroup, f: &mut Frame);
}

struct Sampled {
    rng: ChaCha8Rng,
    /// Per shot: (group, channel, pauli code) of every firing, when recording.
    log: Option<Vec<Vec<(u32, u32, u32)>>>,
}

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

impl NoiseSource for Sampled {
    fn apply(&mut self, g: u32, group: &NoiseGroup, f: &mut Frame) {
        let total = group.channels.len() * BLOCK_SHOTS;
        let p = group.p;
        let ln_q = (-p).ln_1p();
        let mut pos = 0usize;
        loop {
            if p < 1.0 {
                let u: f64 = 1.0 - self.rng.gen::<f64>();
                let gap = (u.ln() / ln_q).floor();
                if gap >= (total - pos) as f64 {
                    break;
                }
                pos += gap as usize;
            } else if pos >= total {
                break;
            }
            let (c, shot) = (pos / BLOCK_SHOTS, pos % BLOCK_SHOTS);
            let code = match &group.channels[c].site {
                Site::Dep1(q) => {
                    let code = self.rng.gen_range(1..4u32);
                    let (x, z) = code_bits(code);
                    f.flip(*q, x, z, shot);
                    code
                }
                Site::Dep2(a, b) => {
                    let code = self.rng.gen_range(1..16u32);
                    let (x, z) = code_bits(code & 3);
                    f.flip(*a, x, z, shot);
                    let (x, z) = code_bits(code >> 2);
                    f.flip(*b, x, z, shot);
                    code
                }
                Site::Fixed(terms) => {
                    for &(q, x, z) in terms {
                        f.flip(q, x, z, shot);
                    }
                    0
                }
            };
            if let Some(log) = &mut self.log {
                log[shot].push((g, c as u32, code));
            }
            pos += 1;
        }
    }
}

struct Injected {
    per_group: Vec<Vec<(usize, Vec<PauliTerm>)>>,
}

impl NoiseSource for Injected {
    fn apply(&mut self, g: u32, _group: &NoiseGroup, f: &mut Frame) {
        for (shot, paulis) in &self.per_group[g as usize] {
            for t in paulis {
                let (x, z) = t.axis.bits();
                f.flip(t.qubit as u32, x, z, *shot);
            }
        }
    }
}

fn concat(parts: Vec<ShotOutcomes>, dets: usize, obs: usize) -> ShotOutcomes {
    let mut it = parts.into_iter();
    let mut out = it.next().unwrap_or_else(|| ShotOutcomes::zeros(0, dets, obs));
    for p in it {
        out.append(&p);
    }
    out
}

/// Samples `shots` shots from `prog` after checking that its detectors and
/// observables are deterministic in the noiseless circuit.
pub fn sample_frames(prog: &CircuitProgram, shots: usize, seed: u64) -> Result<ShotOutcomes> {
    if shots == 0 {
        return Err(Error::Sim("shots must be positive".into()));
    }
    super::tableau::check_determinism(prog)?;
    Ok(FrameSimulator::new(prog)?.sample(shots, seed))
}
