use std::io::{self, BufRead, Write};

/// Detector and observable bits, one row per detector/observable, bit-packed
/// across shots (bit `s % 64` of word `s / 64` is shot `s`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotOutcomes {
    pub shots: usize,
    pub num_detectors: usize,
    pub num_observables: usize,
    pub detectors: Vec<u64>,
    pub observables: Vec<u64>,
}

impl ShotOutcomes {
    pub fn zeros(shots: usize, num_detectors: usize, num_observables: usize) -> Self {
        let w = shots.div_ceil(64);
        ShotOutcomes {
            shots,
            num_detectors,
            num_observables,
            detectors: vec![0; w * num_detectors],
            observables: vec![0; w * num_observables],
        }
    }

    pub fn words(&self) -> usize {
        self.shots.div_ceil(64)
    }

    pub fn detector(&self, d: usize, shot: usize) -> bool {
        let w = self.words();
        self.detectors[d * w + shot / 64] >> (shot % 64) & 1 == 1
    }

    pub fn observable(&self, k: usize, shot: usize) -> bool {
        let w = self.words();
        self.observables[k * w + shot / 64] >> (shot % 64) & 1 == 1
    }

    pub fn set_detector(&mut self, d: usize, shot: usize, v: bool) {
        let w = self.words();
        set_bit(&mut self.detectors[d * w + shot / 64], shot % 64, v);
    }

    pub fn set_observable(&mut self, k: usize, shot: usize, v: bool) {
        let w = self.words();
        set_bit(&mut self.observables[k * w + shot / 64], shot % 64, v);
    }

    /// Fired detector indices for every shot, ascending.
    pub fn fired_per_shot(&self) -> Vec<Vec<u32>> {
        let w = self.words();
        let mut out = vec![Vec::new(); self.shots];
        for d in 0..self.num_detectors {
            for (wi, &word) in self.detectors[d * w..(d + 1) * w].iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    out[wi * 64 + b].push(d as u32);
                }
            }
        }
        out
    }

    /// Observable flips per shot as a bit mask (observable k is bit k).
    /// Panics if there are more than 64 observables.
    pub fn observable_masks(&self) -> Vec<u64> {
        assert!(self.num_observables <= 64, "at most 64 observables supported");
        let w = self.words();
        let mut out = vec![0u64; self.shots];
        for k in 0..self.num_observables {
            for (wi, &word) in self.observables[k * w..(k + 1) * w].iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    out[wi * 64 + b] |= 1 << k;
                }
            }
        }
        out
    }

    /// Keeps only the first `shots` shots.
    pub fn truncate(&mut self, shots: usize) {
        if shots >= self.shots {
            return;
        }
        let old_w = self.words();
        let new_w = shots.div_ceil(64);
        let tail_mask = if shots.is_multiple_of(64) { !0 } else { (1u64 << (shots % 64)) - 1 };
        let shrink = |rows: usize, data: &mut Vec<u64>| {
            let mut out = Vec::with_capacity(rows * new_w);
            for r in 0..rows {
                out.extend_from_slice(&data[r * old_w..r * old_w + new_w]);
                if new_w > 0 {
                    *out.last_mut().unwrap() &= tail_mask;
                }
            }
            *data = out;
        };
        shrink(self.num_detectors, &mut self.detectors);
        shrink(self.num_observables, &mut self.observables);
        self.shots = shots;
    }

    /// Appends the shots of `other` after the shots of `self`.
    pub fn append(&mut self, other: &ShotOutcomes) {
        assert_eq!(self.num_detectors, other.num_detectors);
        assert_eq!(self.num_observables, other.num_observables);
        let total = self.shots + other.shots;
        let new_w = total.div_ceil(64);
        let (a_w, b_w) = (self.words(), other.words());
        let offset = self.shots;
        let merge = |rows: usize, a: &[u64], b: &[u64]| {
            let mut out = vec![0u64; rows * new_w];
            for r in 0..rows {
                let dst = &mut out[r * new_w..(r + 1) * new_w];
                dst[..a_w].copy_from_slice(&a[r * a_w..(r + 1) * a_w]);
                let src = &b[r * b_w..(r + 1) * b_w];
                let (ws, bs) = (offset / 64, offset % 64);
                for (i, &word) in src.iter().enumerate() {
                    if bs == 0 {
                        dst[ws + i] |= word;
                    } else {
                        dst[ws + i] |= word << bs;
                        if ws + i + 1 < new_w {
                            dst[ws + i + 1] |= word >> (64 - bs);
                        }
                    }
                }
            }
            out
        };
        self.detectors = merge(self.num_detectors, &self.detectors, &other.detectors);
        self.observables = merge(self.num_observables, &self.observables, &other.observables);
        self.shots = total;
    }

    pub fn detector_fire_count(&self, d: usize) -> usize {
        let w = self.words();
        self.detectors[d * w..(d + 1) * w]
            .iter()
            .map(|x| x.count_ones() as usize)
            .sum()
    }
}

fn set_bit(word: &mut u64, bit: usize, v: bool) {
    if v {
        *word |= 1 << bit;
    } else {
        *word &= !(1 << bit);
    }
}

/// Writes the raw outcome dump: one text header line
/// `DQEC-OUTCOMES shots=S detectors=D observables=K`, then `S` rows of
/// `ceil((D+K)/8)` bytes each. Row bit `i` (byte `i/8`, bit `i%8`, least
/// significant first) is detector `i` for `i < D` and observable `i-D` after.
pub fn write_outcomes<W: Write>(mut w: W, o: &ShotOutcomes) -> io::Result<()> {
    writeln!(
        w,
        "DQEC-OUTCOMES shots={} detectors={} observables={}",
        o.shots, o.num_detectors, o.num_observables
    )?;
    let width = o.num_detectors + o.num_observables;
    let mut row = vec![0u8; width.div_ceil(8)];
    for s in 0..o.shots {
        row.iter_mut().for_each(|b| *b = 0);
        for d in 0..o.num_detectors {
            if o.detector(d, s) {
                row[d / 8] |= 1 << (d % 8);
            }
        }
        for k in 0..o.num_observables {
            if o.observable(k, s) {
                let i = o.num_detectors + k;
                row[i / 8] |= 1 << (i % 8);
            }
        }
        w.write_all(&row)?;
    }
    Ok(())
}

pub fn read_outcomes<R: BufRead>(mut r: R) -> io::Result<ShotOutcomes> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut header = String::new();
    r.read_line(&mut header)?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("DQEC-OUTCOMES") {
        return Err(bad("missing DQEC-OUTCOMES header"));
    }
    let mut get = |key: &str| -> io::Result<usize> {
        fields
            .next()
            .and_then(|f| f.strip_prefix(key))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(&format!("bad header field {key}")))
    };
    let shots = get("shots=")?;
    let dets = get("detectors=")?;
    let obs = get("observables=")?;
    let mut out = ShotOutcomes::zeros(shots, dets, obs);
    let mut row = vec![0u8; (dets + obs).div_ceil(8)];
    for s in 0..shots {
        r.read_exact(&mut row)?;
        for i in 0..dets + obs {
            if row[i / 8] >> (i % 8) & 1 == 1 {
                if i < dets {
                    out.set_detector(i, s, true);
                } else {
                    out.set_observable(i - dets, s, true);
                }
            }
        }
    }
    Ok(out)
}
