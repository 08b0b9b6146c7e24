use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::circuit::{Axis, CircuitProgram, Opcode, PauliTerm, Target};
use crate::netcompile::{DROPOUT_TAG, FAILURE_TAG};
use crate::{Error, Result};

/// One elementary error: with probability `p`, flips `detectors` and the
/// observables in `observables`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mechanism {
    pub p: f64,
    /// Sorted, deduplicated.
    pub detectors: Vec<u32>,
    pub observables: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DetectorErrorModel {
    pub mechanisms: Vec<Mechanism>,
    pub num_detectors: usize,
    pub num_observables: usize,
}

/// Probability that exactly one of two independent events fires.
pub fn xor_probability(p1: f64, p2: f64) -> f64 {
    p1 * (1.0 - p2) + p2 * (1.0 - p1)
}

/// Channels carrying any of these tags are left out of the model. Dropout and
/// whole-device failure are sampled but never shown to the decoder.
pub const EXCLUDED_TAGS: [&str; 2] = [DROPOUT_TAG, FAILURE_TAG];

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Sens {
    dets: Vec<u32>,
    obs: u64,
}

impl Sens {
    fn xor_with(&mut self, other: &Sens) {
        if other.dets.is_empty() {
            self.obs ^= other.obs;
            return;
        }
        let (a, b) = (&self.dets, &other.dets);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i] < b[j]) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j] < a[i] {
                out.push(b[j]);
                j += 1;
            } else {
                i += 1;
                j += 1;
            }
        }
        self.dets = out;
        self.obs ^= other.obs;
    }

    fn is_empty(&self) -> bool {
        self.dets.is_empty() && self.obs == 0
    }
}

fn xor_into(target: &mut [Sens], dst: usize, src: &Sens) {
    let mut t = std::mem::take(&mut target[dst]);
    t.xor_with(src);
    target[dst] = t;
}

/// Extracts the detector error model of `prog`, skipping channels tagged
/// with any of [`EXCLUDED_TAGS`].
///
/// Symptoms come from one backward sweep that tracks, for every qubit, which
/// detectors and observables an X or Z error at the current point would flip.
/// This agrees with forward [`crate::sim::propagate_pauli`] on every
/// alternative but costs one pass instead of one pass per alternative.
pub fn build_dem(prog: &CircuitProgram) -> Result<DetectorErrorModel> {
    build_dem_excluding(prog, &EXCLUDED_TAGS)
}

pub fn build_dem_excluding(prog: &CircuitProgram, excluded: &[&str]) -> Result<DetectorErrorModel> {
    let (dets, obs) = prog.resolve_annotations()?;
    if obs.len() > 64 {
        return Err(Error::Decode(format!("{} observables exceed 64", obs.len())));
    }
    let total = prog.num_measurements();
    let mut meas: Vec<Sens> = vec![Sens::default(); total];
    for (d, recs) in dets.iter().enumerate() {
        for &m in recs {
            let s = Sens {
                dets: vec![d as u32],
                obs: 0,
            };
            xor_into(&mut meas, m, &s);
        }
    }
    for (k, recs) in obs.iter().enumerate() {
        for &m in recs {
            meas[m].obs ^= 1 << k;
        }
    }

    let n = prog.qubit_count;
    let mut sx: Vec<Sens> = vec![Sens::default(); n];
    let mut sz: Vec<Sens> = vec![Sens::default(); n];
    let mut m = total;
    let mut merged: BTreeMap<(Vec<u32>, u64), f64> = BTreeMap::new();

    for (idx, inst) in prog.instructions.iter().enumerate().rev() {
        let qs = inst.qubit_targets();
        match inst.opcode {
            Opcode::H => qs.iter().for_each(|&q| std::mem::swap(&mut sx[q], &mut sz[q])),
            Opcode::S | Opcode::Sdag => {
                for &q in &qs {
                    let z = sz[q].clone();
                    sx[q].xor_with(&z);
                }
            }
            Opcode::Cx => {
                for c in qs.chunks(2) {
                    let (a, b) = (c[0], c[1]);
                    let xb = sx[b].clone();
                    sx[a].xor_with(&xb);
                    let za = sz[a].clone();
                    sz[b].xor_with(&za);
                }
            }
            Opcode::Cz => {
                for c in qs.chunks(2) {
                    let (a, b) = (c[0], c[1]);
                    let zb = sz[b].clone();
                    sx[a].xor_with(&zb);
                    let za = sz[a].clone();
                    sx[b].xor_with(&za);
                }
            }
            Opcode::Rz | Opcode::Rx => {
                for &q in &qs {
                    sx[q] = Sens::default();
                    sz[q] = Sens::default();
                }
            }
            Opcode::M | Opcode::Mx => {
                m -= qs.len();
                for (i, &q) in qs.iter().enumerate() {
                    let s = &meas[m + i];
                    if inst.opcode == Opcode::M {
                        sx[q].xor_with(s);
                    } else {
                        sz[q].xor_with(s);
                    }
                }
            }
            Opcode::Mpp => {
                let count = inst.measurement_count();
                m -= count;
                let mut i = 0;
                for t in &inst.targets {
                    if let Target::Product(terms) = t {
                        let s = &meas[m + i];
                        for term in terms {
                            let (px, pz) = term.axis.bits();
                            if px {
                                sz[term.qubit].xor_with(s);
                            }
                            if pz {
                                sx[term.qubit].xor_with(s);
                            }
                        }
                        i += 1;
                    }
                }
            }
            Opcode::CondX | Opcode::CondZ => {
                let r = inst.records().next().expect("validated");
                let mbefore = m;
                let rec = r
                    .resolve(mbefore)
                    .ok_or_else(|| Error::Decode(format!("instruction {idx}: bad record")))?;
                let s = if inst.opcode == Opcode::CondX {
                    sx[qs[0]].clone()
                } else {
                    sz[qs[0]].clone()
                };
                xor_into(&mut meas, rec, &s);
            }
            Opcode::Depolarize1 | Opcode::Depolarize2 | Opcode::CorrelatedError => {
                if excluded.iter().any(|t| prog.has_tag(idx, t)) {
                    continue;
                }
                let p = inst.params.first().copied().unwrap_or(0.0);
                if p <= 0.0 {
                    continue;
                }
                let sym = |t: &PauliTerm| -> Sens {
                    let mut s = Sens::default();
                    let (px, pz) = t.axis.bits();
                    if px {
                        s.xor_with(&sx[t.qubit]);
                    }
                    if pz {
                        s.xor_with(&sz[t.qubit]);
                    }
                    s
                };
                let mut add_channel = |alts: Vec<(Sens, f64)>| {
                    let mut local: BTreeMap<(Vec<u32>, u64), f64> = BTreeMap::new();
                    for (s, q) in alts {
                        if !s.is_empty() {
                            *local.entry((s.dets, s.obs)).or_insert(0.0) += q;
                        }
                    }
                    for (key, q) in local {
                        let e = merged.entry(key).or_insert(0.0);
                        *e = xor_probability(*e, q);
                    }
                };
                match inst.opcode {
                    Opcode::Depolarize1 => {
                        for &q in &qs {
                            let alts = [Axis::X, Axis::Y, Axis::Z]
                                .into_iter()
                                .map(|a| (sym(&PauliTerm::new(q, a)), p / 3.0))
                                .collect();
                            add_channel(alts);
                        }
                    }
                    Opcode::Depolarize2 => {
                        for c in qs.chunks(2) {
                            let mut alts = Vec::with_capacity(15);
                            for code in 1..16usize {
                                let mut s = Sens::default();
                                for (q, bits) in [(c[0], code & 3), (c[1], code >> 2)] {
                                    if let Some(a) = Axis::from_bits(bits & 1 == 1, bits & 2 == 2) {
                                        s.xor_with(&sym(&PauliTerm::new(q, a)));
                                    }
                                }
                                alts.push((s, p / 15.0));
                            }
                            add_channel(alts);
                        }
                    }
                    _ => {
                        for t in &inst.targets {
                            if let Target::Product(terms) = t {
                                let mut s = Sens::default();
                                for term in terms {
                                    s.xor_with(&sym(term));
                                }
                                add_channel(vec![(s, p)]);
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }

    // Two certain flips with the same symptom cancel to p = 0.
    let mechanisms = merged
        .into_iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|((detectors, observables), p)| Mechanism {
            p,
            detectors,
            observables,
        })
        .collect();
    Ok(DetectorErrorModel {
        mechanisms,
        num_detectors: dets.len(),
        num_observables: obs.len(),
    })
}

impl DetectorErrorModel {
    /// One `error(p) D.. L..` line per mechanism.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for mech in &self.mechanisms {
            write!(s, "error({})", mech.p).unwrap();
            for d in &mech.detectors {
                write!(s, " D{d}").unwrap();
            }
            for k in 0..64 {
                if mech.observables >> k & 1 == 1 {
                    write!(s, " L{k}").unwrap();
                }
            }
            s.push('\n');
        }
        s
    }

    /// Parses the output of [`DetectorErrorModel::to_text`]. Counts are taken
    /// as the larger of the given values and what the lines reference.
    pub fn parse(text: &str, num_detectors: usize, num_observables: usize) -> Result<Self> {
        let mut dem = DetectorErrorModel {
            mechanisms: Vec::new(),
            num_detectors,
            num_observables,
        };
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Decode(format!("DEM line {}: {line}", ln + 1));
            let mut parts = line.split_whitespace();
            let head = parts.next().ok_or_else(bad)?;
            let p: f64 = head
                .strip_prefix("error(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|v| v.parse().ok())
                .ok_or_else(bad)?;
            let mut mech = Mechanism {
                p,
                detectors: Vec::new(),
                observables: 0,
            };
            for tok in parts {
                if let Some(d) = tok.strip_prefix('D') {
                    let d: u32 = d.parse().map_err(|_| bad())?;
                    dem.num_detectors = dem.num_detectors.max(d as usize + 1);
                    mech.detectors.push(d);
                } else if let Some(k) = tok.strip_prefix('L') {
                    let k: usize = k.parse().map_err(|_| bad())?;
                    if k >= 64 {
                        return Err(bad());
                    }
                    dem.num_observables = dem.num_observables.max(k + 1);
                    mech.observables ^= 1 << k;
                } else {
                    return Err(bad());
                }
            }
            mech.detectors.sort_unstable();
            mech.detectors.dedup();
            dem.mechanisms.push(mech);
        }
        Ok(dem)
    }
}
