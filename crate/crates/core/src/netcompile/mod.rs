//! Compiles a code schedule plus a network layout into a noisy circuit:
//! Bell and GHZ mediation of nonlocal checks, timing and idle noise, node
//! dropout channels, swap-out teleportation and monolithic baselines.

mod builder;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::circuit::{Axis, CircuitProgram, Instruction, Opcode, PauliTerm};
use crate::codes::{CheckKind, ScheduleTemplate};
use crate::partition::{Mediation, NetworkLayout};
use crate::{Error, Result};
use builder::{idle_probability, Builder};

pub const DROPOUT_TAG: &str = "dropout";
pub const FAILURE_TAG: &str = "failure";

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseParams {
    pub p: f64,
    /// `p_nl = nl_ratio · p`.
    pub nl_ratio: f64,
    pub p_dropout: f64,
    /// Pauli supports sampled per dropout channel.
    pub e: usize,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            p: 0.0,
            nl_ratio: 10.0,
            p_dropout: 0.0,
            e: 512,
        }
    }
}

impl NoiseParams {
    pub fn new(p: f64, p_dropout: f64) -> Self {
        NoiseParams {
            p,
            p_dropout,
            ..Default::default()
        }
    }

    pub fn p_l(&self) -> f64 {
        self.p
    }

    pub fn p_nl(&self) -> f64 {
        self.nl_ratio * self.p
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Compile(format!("{name} = {v} is not a probability")))
            }
        };
        prob("p", self.p)?;
        prob("p_nl", self.p_nl())?;
        prob("p_dropout", self.p_dropout)?;
        if self.e < 1 {
            return Err(Error::Compile("dropout sample count e must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TimingModel {
    pub tau_gate: u64,
    pub tau_bell: u64,
}

impl Default for TimingModel {
    fn default() -> Self {
        TimingModel {
            tau_gate: 1,
            tau_bell: 5,
        }
    }
}

/// One code round of a compiled circuit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundInfo {
    pub noisy: bool,
    /// Instruction index one past the round (annotations included).
    pub end: usize,
    pub duration: u64,
    /// Busy timesteps of every data and ancilla qubit, indexed by code qubit.
    pub busy: Vec<u64>,
    /// Idle timesteps charged at round end, indexed by code qubit.
    pub idle: Vec<u64>,
    /// Physical data and ancilla qubits of each cluster during this round.
    pub cluster_qubits: Vec<Vec<usize>>,
    /// Communication qubits of each cluster during this round.
    pub comm_qubits: Vec<Vec<usize>>,
    pub bell_pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwapInfo {
    pub after_round: usize,
    pub target: usize,
    pub batches: usize,
    pub duration: u64,
    /// Code qubit → physical qubit after the swap, for the target's qubits.
    pub relabel: BTreeMap<usize, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metadata {
    pub code: String,
    pub n_q: Option<usize>,
    pub clusters: usize,
    pub seed: u64,
    pub noise: NoiseParams,
    pub timing: TimingModel,
    pub noisy_rounds: usize,
    pub pad: usize,
    /// Noiseless rounds appended so the logicals end readable.
    pub extra_rounds: usize,
    pub failure_round: Option<usize>,
    pub swap: Option<SwapInfo>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompiledExperiment {
    #[serde(skip)]
    pub program: CircuitProgram,
    pub k: usize,
    pub rounds: Vec<RoundInfo>,
    pub metadata: Metadata,
}

impl CompiledExperiment {
    /// Instruction indices tagged as dropout channels.
    pub fn dropout_channels(&self) -> Vec<usize> {
        self.program
            .tags
            .iter()
            .filter(|(_, t)| t.contains(DROPOUT_TAG))
            .map(|(&i, _)| i)
            .collect()
    }

    pub fn noisy_round_indices(&self) -> Vec<usize> {
        (0..self.rounds.len()).filter(|&r| self.rounds[r].noisy).collect()
    }

    /// Sidecar document: metadata, round table and dropout channel indices.
    pub fn sidecar_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Round {
            noisy: bool,
            end: usize,
            duration: u64,
            bell_pairs: usize,
        }
        #[derive(Serialize)]
        struct Sidecar<'a> {
            metadata: &'a Metadata,
            qubits: usize,
            measurements: usize,
            detectors: usize,
            observables: usize,
            rounds: Vec<Round>,
            dropout_channels: Vec<usize>,
        }
        let s = Sidecar {
            metadata: &self.metadata,
            qubits: self.program.qubit_count,
            measurements: self.program.num_measurements(),
            detectors: self.program.num_detectors(),
            observables: self.k,
            rounds: self
                .rounds
                .iter()
                .map(|r| Round {
                    noisy: r.noisy,
                    end: r.end,
                    duration: r.duration,
                    bell_pairs: r.bell_pairs,
                })
                .collect(),
            dropout_channels: self.dropout_channels(),
        };
        Ok(serde_json::to_string_pretty(&s)?)
    }
}

/// Options shared by every compiler entry point.
#[derive(Clone, Copy, Debug)]
struct Plan<'a> {
    schedule: &'a ScheduleTemplate,
    /// `None` compiles every check locally on a single device.
    layout: Option<&'a NetworkLayout>,
    noise: NoiseParams,
    timing: TimingModel,
    rounds: usize,
    pad: usize,
    seed: u64,
    swap: Option<(usize, usize)>,
    failure_round: Option<usize>,
}

/// Memory experiment: `pad` noiseless rounds, `rounds` noisy rounds, `pad`
/// noiseless rounds, then a transversal Z readout of the data.
pub fn compile_memory(
    schedule: &ScheduleTemplate,
    layout: &NetworkLayout,
    noise: &NoiseParams,
    timing: &TimingModel,
    rounds: usize,
    pad: usize,
    seed: u64,
) -> Result<CompiledExperiment> {
    compile(&Plan {
        schedule,
        layout: Some(layout),
        noise: *noise,
        timing: *timing,
        rounds,
        pad,
        seed,
        swap: None,
        failure_round: None,
    })
}

/// Memory experiment with the `target` cluster's data teleported to a fresh
/// cluster after noisy round `swap_after_round`.
#[allow(clippy::too_many_arguments)]
pub fn compile_swapout(
    schedule: &ScheduleTemplate,
    layout: &NetworkLayout,
    noise: &NoiseParams,
    timing: &TimingModel,
    rounds: usize,
    pad: usize,
    swap_after_round: usize,
    target: usize,
    seed: u64,
) -> Result<CompiledExperiment> {
    if target >= layout.num_clusters() {
        return Err(Error::Compile(format!(
            "swap-out target {target} is not one of the {} clusters",
            layout.num_clusters()
        )));
    }
    if swap_after_round == 0 || swap_after_round >= rounds {
        return Err(Error::Compile(format!(
            "swap-out after round {swap_after_round} is outside the noisy rounds 1..{rounds}"
        )));
    }
    compile(&Plan {
        schedule,
        layout: Some(layout),
        noise: *noise,
        timing: *timing,
        rounds,
        pad,
        seed,
        swap: Some((swap_after_round, target)),
        failure_round: None,
    })
}

/// Single-device memory circuit. With `failure_round = Some(i)`, every data
/// and ancilla qubit is fully depolarized after noisy round `i`.
pub fn compile_monolithic(
    schedule: &ScheduleTemplate,
    noise: &NoiseParams,
    timing: &TimingModel,
    rounds: usize,
    pad: usize,
    failure_round: Option<usize>,
) -> Result<CompiledExperiment> {
    if let Some(i) = failure_round {
        if i == 0 || i > rounds {
            return Err(Error::Compile(format!("failure round {i} is outside 1..={rounds}")));
        }
    }
    compile(&Plan {
        schedule,
        layout: None,
        noise: *noise,
        timing: *timing,
        rounds,
        pad,
        seed: 0,
        swap: None,
        failure_round,
    })
}

/// The no-failure circuit plus one circuit per failure round, weighted by the
/// probability that the first device failure happens in that round.
pub fn compile_monolithic_ensemble(
    schedule: &ScheduleTemplate,
    noise: &NoiseParams,
    timing: &TimingModel,
    rounds: usize,
    pad: usize,
) -> Result<Vec<(f64, CompiledExperiment)>> {
    let weights = ensemble_weights(noise.p_dropout, rounds);
    let mut out = Vec::with_capacity(rounds + 1);
    for (i, w) in weights.into_iter().enumerate() {
        let failure = if i == 0 { None } else { Some(i) };
        out.push((w, compile_monolithic(schedule, noise, timing, rounds, pad, failure)?));
    }
    Ok(out)
}

/// `[(1−q)^r, q, q(1−q), …, q(1−q)^{r−1}]`.
pub fn ensemble_weights(p_dropout: f64, rounds: usize) -> Vec<f64> {
    let mut w = vec![(1.0 - p_dropout).powi(rounds as i32)];
    w.extend((1..=rounds).map(|i| p_dropout * (1.0 - p_dropout).powi(i as i32 - 1)));
    w
}

/// Probability of two or more failures in `rounds` rounds, which the
/// single-failure ensemble does not represent.
pub fn ensemble_residual(p_dropout: f64, rounds: usize) -> f64 {
    let q = 1.0 - p_dropout;
    let r = rounds as i32;
    (1.0 - q.powi(r) - rounds as f64 * p_dropout * q.powi(r - 1)).max(0.0)
}

/// Physical qubit ids for the code and communication qubits in use.
struct QubitMap {
    code: Vec<usize>,
    /// `comm[cluster][slot]`.
    comm: Vec<Vec<usize>>,
}

fn bell_batches(schedule: &ScheduleTemplate, layout: &NetworkLayout) -> Result<Vec<Vec<Vec<usize>>>> {
    let qpi = layout.qpi_count;
    let k = layout.num_clusters();
    let mut out = Vec::new();
    for checks in &schedule.sub_rounds {
        let mut batches: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for &c in checks {
            let pairs = layout.placements[c].bell_pairs();
            if pairs.is_empty() {
                continue;
            }
            let mut need = vec![0usize; k];
            for (a, b) in pairs {
                need[a] += 1;
                need[b] += 1;
            }
            if let Some(cl) = (0..k).find(|&cl| need[cl] > qpi) {
                return Err(Error::Compile(format!(
                    "check {c} needs {} Bell halves at cluster {cl}, which has {qpi} interfaces",
                    need[cl]
                )));
            }
            match batches
                .iter_mut()
                .find(|(_, used)| (0..k).all(|cl| used[cl] + need[cl] <= qpi))
            {
                Some((members, used)) => {
                    members.push(c);
                    (0..k).for_each(|cl| used[cl] += need[cl]);
                }
                None => batches.push((vec![c], need)),
            }
        }
        out.push(batches.into_iter().map(|(m, _)| m).collect());
    }
    Ok(out)
}

fn compile(plan: &Plan) -> Result<CompiledExperiment> {
    let s = plan.schedule;
    plan.noise.validate()?;
    if plan.rounds == 0 {
        return Err(Error::Compile("at least one noisy round is required".into()));
    }
    let n_code = s.total_qubits();
    let layout = match plan.layout {
        Some(l) => {
            if l.cluster_of.len() != n_code || l.placements.len() != s.checks.len() {
                return Err(Error::Compile("layout does not match the schedule".into()));
            }
            Some(l)
        }
        None => None,
    };
    let n_clusters = layout.map_or(1, |l| l.num_clusters());
    let cluster_of = |q: usize| layout.map_or(0, |l| l.cluster_of[q]);
    let local_all = || Mediation::Local;
    let mediation = |c: usize| layout.map_or_else(local_all, |l| l.placements[c].mediation);
    let batches = match layout {
        Some(l) => bell_batches(s, l)?,
        None => vec![Vec::new(); s.period()],
    };

    // Total round count, padded by one when the logicals would end in a
    // basis the final readout cannot see.
    let mut total = plan.rounds + 2 * plan.pad;
    let mut warnings = layout.map_or_else(Vec::new, |l| l.warnings.clone());
    warnings.extend(s.warnings.iter().cloned());
    let all_plans = |total: usize| -> Result<Vec<_>> {
        (0..s.observables.len()).map(|k| s.observable_plan(k, total)).collect()
    };
    let mut extra = 0;
    let plans = match all_plans(total) {
        Ok(p) => p,
        Err(e) => match all_plans(total + 1) {
            Ok(p) => {
                extra = 1;
                total += 1;
                warnings.push("one noiseless round appended so the logicals end Z-diagonal".into());
                p
            }
            Err(_) => return Err(e),
        },
    };
    let first_noisy = plan.pad;
    let noisy = |r: usize| r >= first_noisy && r < first_noisy + plan.rounds;

    let qpi = layout.map_or(0, |l| l.qpi_count);
    let mut next_qubit = n_code;
    let mut map = QubitMap {
        code: (0..n_code).collect(),
        comm: (0..n_clusters)
            .map(|_| {
                let v: Vec<usize> = (next_qubit..next_qubit + qpi).collect();
                next_qubit += qpi;
                v
            })
            .collect(),
    };

    let mut b = Builder::new(plan.timing.tau_gate, plan.timing.tau_bell);
    let data: Vec<usize> = (0..s.data_qubits).collect();
    let init = match s.basis {
        Axis::Z => Opcode::Rz,
        Axis::X => Opcode::Rx,
        Axis::Y => return Err(Error::Compile("Y-basis memory is not supported".into())),
    };
    b.push(Instruction::on_qubits(init, &data));
    b.push(Instruction::tick());

    let mut outcomes: Vec<Vec<Vec<usize>>> = Vec::with_capacity(total);
    let mut round_info = Vec::with_capacity(total);
    let mut swap_info = None;
    for r in 0..total {
        let is_noisy = noisy(r);
        b.p_l = if is_noisy { plan.noise.p_l() } else { 0.0 };
        b.p_nl = if is_noisy { plan.noise.p_nl() } else { 0.0 };
        b.reset_window();
        let mut out_r: Vec<Vec<usize>> = vec![Vec::new(); s.checks.len()];
        let mut pending: Vec<(usize, usize)> = Vec::new();
        let mut bell_pairs = 0;
        for (sr, checks) in s.sub_rounds.iter().enumerate() {
            for batch in &batches[sr] {
                let l = layout.expect("batches only exist with a layout");
                let mut slot = vec![0usize; n_clusters];
                let mut members: Vec<Vec<(usize, usize)>> = Vec::new();
                for &c in batch {
                    let pl = &l.placements[c];
                    let mut ghz = Vec::new();
                    let mut root_halves = Vec::new();
                    for (ra, rb) in pl.bell_pairs() {
                        let qa = map.comm[ra][slot[ra]];
                        let qb = map.comm[rb][slot[rb]];
                        slot[ra] += 1;
                        slot[rb] += 1;
                        b.bell(qa, qb, b.p_nl);
                        bell_pairs += 1;
                        root_halves.push(qa);
                        ghz.push((rb, qb));
                    }
                    // Star fusion at the root: keep the first half, fold the
                    // others in and correct their partners.
                    let keep = root_halves[0];
                    for (i, &h) in root_halves.iter().enumerate().skip(1) {
                        b.gate2(Opcode::Cx, keep, h);
                        let m = b.measure_comm(Opcode::M, h);
                        b.cond(Axis::X, m, ghz[i].1);
                    }
                    ghz.insert(0, (pl.root, keep));
                    members.push(ghz);
                }
                for (&c, ghz) in batch.iter().zip(&members) {
                    for t in &s.checks[c].paulis {
                        let cl = cluster_of(t.qubit);
                        let &(_, anc) = ghz.iter().find(|(g, _)| *g == cl).expect("participant");
                        b.controlled_pauli(anc, map.code[t.qubit], t.axis);
                    }
                    for &(_, q) in ghz {
                        let m = b.measure_comm(Opcode::Mx, q);
                        out_r[c].push(m);
                    }
                }
            }
            for &c in checks {
                if mediation(c) != Mediation::Local {
                    continue;
                }
                let check = &s.checks[c];
                match check.kind {
                    CheckKind::Pair { .. } => {
                        let (p, q) = (check.paulis[0], check.paulis[1]);
                        let m = b.mpp((map.code[p.qubit], p.axis), (map.code[q.qubit], q.axis));
                        out_r[c].push(m);
                    }
                    CheckKind::Stabilizer { ancilla, .. } => {
                        let a = map.code[ancilla];
                        b.gate1(Opcode::Rx, a);
                        for t in &check.paulis {
                            b.controlled_pauli(a, map.code[t.qubit], t.axis);
                        }
                        pending.push((c, a));
                    }
                }
            }
        }
        // Round end: idle noise, then the deferred ancilla readouts.
        let gates_end = b.window_duration();
        let duration = gates_end + if pending.is_empty() { 0 } else { plan.timing.tau_gate };
        let pending_q: BTreeSet<usize> = pending.iter().map(|p| p.1).collect();
        let mut busy = vec![0u64; n_code];
        let mut idle = vec![0u64; n_code];
        let mut by_p: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for q in 0..n_code {
            let pq = map.code[q];
            let readout = if pending_q.contains(&pq) { plan.timing.tau_gate } else { 0 };
            busy[q] = b.busy(pq) + readout;
            idle[q] = duration - busy[q];
            if idle[q] > 0 {
                by_p.entry(idle[q]).or_default().push(pq);
            }
        }
        for (t, qs) in by_p {
            b.noise1(idle_probability(b.p_l, t), &qs);
        }
        for &(c, a) in &pending {
            b.sync_to(a, gates_end);
            let m = b.measure(Opcode::Mx, a);
            out_r[c].push(m);
        }
        outcomes.push(out_r);
        for d in &s.detectors {
            if !d.rounds.contains(r) {
                continue;
            }
            let mut idx = Vec::new();
            for &(c, off) in &d.terms {
                let rr = r as i64 + off;
                if rr < 0 {
                    return Err(Error::Compile("detector template reaches before round 0".into()));
                }
                idx.extend(&outcomes[rr as usize][c]);
            }
            b.push(Instruction::detector(b.parity_refs(&idx)));
        }
        b.push(Instruction::tick());
        let cluster_qubits = (0..n_clusters)
            .map(|cl| (0..n_code).filter(|&q| cluster_of(q) == cl).map(|q| map.code[q]).collect())
            .collect();
        round_info.push(RoundInfo {
            noisy: is_noisy,
            end: b.prog.instructions.len(),
            duration,
            busy,
            idle,
            cluster_qubits,
            comm_qubits: map.comm.clone(),
            bell_pairs,
        });

        if is_noisy && plan.failure_round == Some(r + 1 - first_noisy) {
            let all: Vec<usize> = (0..n_code).map(|q| map.code[q]).collect();
            b.push_tagged(Instruction::noise(Opcode::Depolarize1, 0.75, &all), FAILURE_TAG);
        }
        if let Some((after, target)) = plan.swap {
            if is_noisy && r + 1 - first_noisy == after {
                let l = layout.expect("swap-out needs a layout");
                swap_info = Some(swap_block(&mut b, s, l, &mut map, &mut next_qubit, target, after)?);
            }
        }
    }

    // Final transversal readout.
    b.p_l = 0.0;
    let readout = match s.basis {
        Axis::Z => Opcode::M,
        _ => Opcode::Mx,
    };
    let phys_data: Vec<usize> = data.iter().map(|&q| map.code[q]).collect();
    b.push(Instruction::on_qubits(readout, &phys_data));
    let first_final = b.measurements - phys_data.len();
    let final_rec = |q: usize| first_final + q;
    let last = total - 1;
    for fd in &s.final_detectors {
        let mut idx: Vec<usize> = fd.data.iter().map(|&q| final_rec(q)).collect();
        for &(c, off) in &fd.terms {
            idx.extend(&outcomes[(last as i64 + off) as usize][c]);
        }
        b.push(Instruction::detector(b.parity_refs(&idx)));
    }
    for (k, op) in plans.iter().enumerate() {
        let mut idx: Vec<usize> = op.data.iter().map(|&q| final_rec(q)).collect();
        for &(rr, c) in &op.checks {
            idx.extend(&outcomes[rr][c]);
        }
        b.push(Instruction::observable(k, b.parity_refs(&idx)));
    }
    b.prog.qubit_count = b.prog.qubit_count.max(next_qubit);

    Ok(CompiledExperiment {
        program: b.prog,
        k: plans.len(),
        rounds: round_info,
        metadata: Metadata {
            code: s.name.clone(),
            n_q: layout.map(|l| l.n_q),
            clusters: n_clusters,
            seed: plan.seed,
            noise: plan.noise,
            timing: plan.timing,
            noisy_rounds: plan.rounds,
            pad: plan.pad,
            extra_rounds: extra,
            failure_round: plan.failure_round,
            swap: swap_info,
            warnings,
        },
    })
}

/// Teleports the target cluster's data qubits onto fresh qubits and moves
/// the cluster's ancilla and communication roles there too.
fn swap_block(
    b: &mut Builder,
    s: &ScheduleTemplate,
    layout: &NetworkLayout,
    map: &mut QubitMap,
    next_qubit: &mut usize,
    target: usize,
    after: usize,
) -> Result<SwapInfo> {
    let qpi = layout.qpi_count;
    b.reset_window();
    let members = &layout.clusters[target];
    let mut relabel = BTreeMap::new();
    for &q in members {
        relabel.insert(q, *next_qubit);
        *next_qubit += 1;
    }
    let data: Vec<usize> = members.iter().copied().filter(|&q| q < s.data_qubits).collect();
    let batches = data.len().div_ceil(qpi);
    for chunk in data.chunks(qpi) {
        for (slot, &q) in chunk.iter().enumerate() {
            let old = map.code[q];
            let new = relabel[&q];
            teleport(b, old, map.comm[target][slot], new);
        }
    }
    let duration = b.window_duration();
    let mut by_p: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    let moved: BTreeSet<usize> = data.iter().copied().collect();
    for q in 0..s.data_qubits {
        // The teleported originals are discarded; everything else waits.
        let pq = if moved.contains(&q) { relabel[&q] } else { map.code[q] };
        let t = duration.saturating_sub(b.busy(pq));
        if t > 0 {
            by_p.entry(t).or_default().push(pq);
        }
    }
    for (t, qs) in by_p {
        b.noise1(idle_probability(b.p_l, t), &qs);
    }
    b.push(Instruction::tick());
    for (&q, &p) in &relabel {
        map.code[q] = p;
    }
    let fresh_comm: Vec<usize> = (0..qpi).map(|i| *next_qubit + i).collect();
    *next_qubit += qpi;
    map.comm[target] = fresh_comm;
    Ok(SwapInfo {
        after_round: after,
        target,
        batches,
        duration,
        relabel,
    })
}

/// Moves the state of `old` onto `new` through a Bell pair on `(comm, new)`.
fn teleport(b: &mut Builder, old: usize, comm: usize, new: usize) {
    b.bell(comm, new, b.p_nl);
    b.gate2(Opcode::Cx, old, comm);
    b.gate1(Opcode::H, old);
    let m_old = b.measure(Opcode::M, old);
    let m_comm = b.measure_comm(Opcode::M, comm);
    b.cond(Axis::X, m_comm, new);
    b.cond(Axis::Z, m_old, new);
}

/// Appends `e` correlated channels per cluster per noisy round, each a
/// uniformly random non-identity Pauli on that cluster's qubits with
/// probability `p_dropout / e`, tagged as dropout.
pub fn attach_node_dropout(exp: &CompiledExperiment, noise: &NoiseParams, seed: u64) -> Result<CompiledExperiment> {
    if noise.e < 1 {
        return Err(Error::Compile("dropout sample count e must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&noise.p_dropout) {
        return Err(Error::Compile(format!("p_dropout = {} is not a probability", noise.p_dropout)));
    }
    let mut out = exp.clone();
    out.metadata.noise.p_dropout = noise.p_dropout;
    out.metadata.noise.e = noise.e;
    if noise.p_dropout == 0.0 {
        return Ok(out);
    }
    let p_eff = noise.p_dropout / noise.e as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut added = 0;
    for info in out.rounds.iter_mut() {
        info.end += added;
        if !info.noisy {
            continue;
        }
        let mut items = Vec::new();
        for qubits in info.cluster_qubits.iter().filter(|q| !q.is_empty()) {
            for _ in 0..noise.e {
                let terms = sample_nonidentity(&mut rng, qubits);
                items.push((Instruction::correlated(p_eff, terms), BTreeSet::from([DROPOUT_TAG.to_string()])));
            }
        }
        let n = items.len();
        out.program.insert_many(info.end, items);
        info.end += n;
        added += n;
    }
    Ok(out)
}

/// Uniform over the non-identity Paulis on `qubits`.
pub fn sample_nonidentity(rng: &mut impl Rng, qubits: &[usize]) -> Vec<PauliTerm> {
    loop {
        let terms: Vec<PauliTerm> = qubits
            .iter()
            .filter_map(|&q| match rng.gen_range(0..4u8) {
                0 => None,
                1 => Some(PauliTerm::new(q, Axis::X)),
                2 => Some(PauliTerm::new(q, Axis::Y)),
                _ => Some(PauliTerm::new(q, Axis::Z)),
            })
            .collect();
        if !terms.is_empty() {
            return terms;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::check_determinism;

    /// Prepares each of the six axis eigenstates, teleports it and measures
    /// the result in the preparation basis.
    #[test]
    fn teleport_gadget_preserves_states() {
        for (axis, minus) in [(Axis::X, false), (Axis::X, true), (Axis::Y, false), (Axis::Y, true), (Axis::Z, false), (Axis::Z, true)] {
            let mut b = Builder::new(1, 5);
            b.push(Instruction::on_qubits(Opcode::Rz, &[0]));
            if minus {
                b.push(Instruction::on_qubits(Opcode::X, &[0]));
            }
            match axis {
                Axis::X => b.push(Instruction::on_qubits(Opcode::H, &[0])),
                Axis::Y => {
                    b.push(Instruction::on_qubits(Opcode::H, &[0]));
                    b.push(Instruction::on_qubits(Opcode::S, &[0]));
                }
                Axis::Z => {}
            }
            teleport(&mut b, 0, 1, 2);
            match axis {
                Axis::X => b.push(Instruction::on_qubits(Opcode::H, &[2])),
                Axis::Y => {
                    b.push(Instruction::on_qubits(Opcode::Sdag, &[2]));
                    b.push(Instruction::on_qubits(Opcode::H, &[2]));
                }
                Axis::Z => {}
            }
            b.push(Instruction::on_qubits(Opcode::M, &[2]));
            let refs = b.parity_refs(&[b.measurements - 1]);
            b.push(Instruction::observable(0, refs));
            let r = check_determinism(&b.prog).unwrap();
            assert_eq!(r.observables, vec![minus], "{axis:?} minus={minus}");
        }
    }

    #[test]
    fn ensemble_weights_sum() {
        let w = ensemble_weights(1e-4, 32);
        assert_eq!(w.len(), 33);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(ensemble_residual(1e-4, 32) < 6e-6);
    }
}
