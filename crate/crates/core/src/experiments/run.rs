use std::io::Write;
use std::time::Instant;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{CodeFamily, ExperimentConfig, Mode};
use super::stats::{bootstrap_weighted, DEFAULT_LEVEL, DEFAULT_RESAMPLES};
use crate::codes::{build_honeycomb, build_toric, load_floquet_lattice, make_schedule, CodeDef, ScheduleTemplate};
use crate::decode::{build_dem, decode_outcomes, score_predictions, to_matching_graph, Decoder};
use crate::netcompile::{
    attach_node_dropout, compile_memory, compile_monolithic, compile_monolithic_ensemble, compile_swapout,
    ensemble_residual, CompiledExperiment, NoiseParams, TimingModel,
};
use crate::partition::{build_connectivity_graph, make_layout, select_largest_node, spectral_partition, NetworkLayout};
use crate::sim::{FrameSimulator, BLOCK_SHOTS};
use crate::{Error, Result};

/// Largest sampling batch, in blocks.
const MAX_BATCH_BLOCKS: u64 = 64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub mode: String,
    pub code: String,
    pub d_or_lattice: String,
    pub n_q: Option<usize>,
    pub p: f64,
    pub p_dropout: f64,
    pub rounds: usize,
    pub shots: usize,
    pub errors_any: usize,
    pub errors_per_obs: Vec<usize>,
    pub p_l: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub shots: usize,
    pub errors_any: usize,
    pub errors_per_obs: Vec<usize>,
}

/// A grid point that could not be evaluated.
#[derive(Debug)]
pub struct PointFailure {
    pub p: f64,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct RunReport {
    /// Successful points in grid order.
    pub rows: Vec<ResultRow>,
    pub failures: Vec<PointFailure>,
    pub notes: Vec<String>,
}

/// Code schedule plus, for distributed modes, the network layout.
pub struct Prepared {
    pub schedule: ScheduleTemplate,
    pub layout: Option<NetworkLayout>,
    /// Swap-out target node.
    pub target: usize,
}

pub fn build_code(family: &CodeFamily) -> Result<CodeDef> {
    Ok(match family {
        CodeFamily::Toric { d } => CodeDef::Stabilizer(build_toric(*d)?),
        CodeFamily::Honeycomb { a, b } => CodeDef::Floquet(build_honeycomb(*a, *b)?),
        CodeFamily::LatticeFile { path } => CodeDef::Floquet(load_floquet_lattice(&std::fs::read_to_string(path)?)?),
    })
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let schedule = make_schedule(&build_code(&cfg.code)?)?;
    if !cfg.mode.is_distributed() {
        return Ok(Prepared {
            schedule,
            layout: None,
            target: 0,
        });
    }
    let n_q = cfg.n_q.expect("validated");
    let partition = spectral_partition(&build_connectivity_graph(&schedule), n_q, cfg.seed)?;
    let layout = make_layout(&partition, &schedule, n_q)?;
    let target = select_largest_node(&partition, &schedule)?;
    Ok(Prepared {
        schedule,
        layout: Some(layout),
        target,
    })
}

/// Samples in doubling batches of whole blocks until the policy is met.
/// Batches are drawn from one block stream, so the result depends only on
/// `seed` and the policy.
pub fn sample_until(
    sim: &FrameSimulator,
    decoder: &Decoder,
    max_shots: usize,
    target_errors: usize,
    seed: u64,
) -> Result<Tally> {
    let mut t = Tally {
        shots: 0,
        errors_any: 0,
        errors_per_obs: vec![0; sim.num_observables()],
    };
    let mut next_block = 0u64;
    let mut batch = 1u64;
    while t.shots < max_shots && t.errors_any < target_errors {
        let remaining = max_shots - t.shots;
        let blocks = batch.min(remaining.div_ceil(BLOCK_SHOTS) as u64);
        let mut out = sim.sample_blocks(next_block, blocks, seed);
        next_block += blocks;
        out.truncate(out.shots.min(remaining));
        let score = score_predictions(&decode_outcomes(decoder, &out)?, &out)?;
        t.shots += score.shots;
        t.errors_any += score.any;
        for (a, b) in t.errors_per_obs.iter_mut().zip(&score.per_observable) {
            *a += b;
        }
        batch = (batch * 2).min(MAX_BATCH_BLOCKS);
    }
    Ok(t)
}

pub fn decoder_for(exp: &CompiledExperiment) -> Result<Decoder> {
    let graph = to_matching_graph(&build_dem(&exp.program)?)?;
    Ok(Decoder::new(&graph))
}

/// Independent seeds of one grid point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PointSeeds {
    pub compile: u64,
    pub dropout: u64,
    pub sample: u64,
    pub bootstrap: u64,
}

/// Seeds for `count` grid points, drawn in grid order from `seed`.
pub fn point_seeds(seed: u64, count: usize) -> Vec<PointSeeds> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| PointSeeds {
            compile: rng.gen(),
            dropout: rng.gen(),
            sample: rng.gen(),
            bootstrap: rng.gen(),
        })
        .collect()
}

fn noise_for(cfg: &ExperimentConfig, p: f64, p_dropout: f64) -> NoiseParams {
    NoiseParams {
        p,
        nl_ratio: cfg.nl_ratio,
        p_dropout,
        e: cfg.dropout_samples,
    }
}

fn compile_mode(cfg: &ExperimentConfig, prep: &Prepared, noise: &NoiseParams, seed: u64) -> Result<CompiledExperiment> {
    let timing = TimingModel::default();
    match cfg.mode {
        Mode::Memory => compile_memory(
            &prep.schedule,
            prep.layout.as_ref().expect("distributed"),
            noise,
            &timing,
            cfg.rounds,
            cfg.pad,
            seed,
        ),
        Mode::Swapout => compile_swapout(
            &prep.schedule,
            prep.layout.as_ref().expect("distributed"),
            noise,
            &timing,
            cfg.rounds,
            cfg.pad,
            cfg.swap_round(),
            prep.target,
            seed,
        ),
        Mode::Monolithic | Mode::MonolithicEnsemble => {
            compile_monolithic(&prep.schedule, noise, &timing, cfg.rounds, cfg.pad, cfg.failure_round)
        }
    }
}

fn row(cfg: &ExperimentConfig, p: f64, p_dropout: f64, t: &Tally, ci: (f64, f64), started: Instant) -> ResultRow {
    let (code, d_or_lattice) = cfg.code.labels();
    ResultRow {
        mode: cfg.mode.name().into(),
        code,
        d_or_lattice,
        n_q: if cfg.mode.is_distributed() { cfg.n_q } else { None },
        p,
        p_dropout,
        rounds: cfg.rounds,
        shots: t.shots,
        errors_any: t.errors_any,
        errors_per_obs: t.errors_per_obs.clone(),
        p_l: t.errors_any as f64 / t.shots as f64,
        ci_low: ci.0,
        ci_high: ci.1,
        seed: cfg.seed,
        wall_ms: started.elapsed().as_millis() as u64,
    }
}

/// One grid point. The decoder prior is the circuit-noise model at `p`
/// without dropout or failures, whatever noise is actually sampled.
pub fn run_point(cfg: &ExperimentConfig, prep: &Prepared, p: f64, seeds: &PointSeeds) -> Result<(ResultRow, Vec<String>)> {
    let started = Instant::now();
    let p_dropout = cfg.dropout.at(p);
    let prior_noise = noise_for(cfg, p, 0.0);
    let sim_noise = noise_for(cfg, if cfg.circuit_noise { p } else { 0.0 }, p_dropout);
    let mut notes = Vec::new();

    if cfg.mode == Mode::MonolithicEnsemble {
        let prior = compile_monolithic(&prep.schedule, &prior_noise, &TimingModel::default(), cfg.rounds, cfg.pad, None)?;
        let decoder = decoder_for(&prior)?;
        let ensemble =
            compile_monolithic_ensemble(&prep.schedule, &sim_noise, &TimingModel::default(), cfg.rounds, cfg.pad)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seeds.sample);
        let mut members = Vec::new();
        for (w, exp) in &ensemble {
            let member_seed: u64 = rng.gen();
            if *w == 0.0 {
                continue;
            }
            let sim = FrameSimulator::new(&exp.program)?;
            let t = sample_until(&sim, &decoder, cfg.shots.max_shots, cfg.shots.target_errors, member_seed)?;
            let ci = bootstrap_weighted(&[(1.0, t.errors_any, t.shots)], DEFAULT_LEVEL, DEFAULT_RESAMPLES, member_seed)?;
            members.push((*w, row(cfg, p, p_dropout, &t, ci, started)));
        }
        let combined = combine_ensemble(&members, seeds.bootstrap)?;
        notes.extend(combined.warning);
        let residual = ensemble_residual(p_dropout, cfg.rounds);
        if residual > 0.0 {
            notes.push(format!("p = {p}: two or more failures (not simulated) have probability {residual:.3e}"));
        }
        let mut out = combined.row;
        out.wall_ms = started.elapsed().as_millis() as u64;
        return Ok((out, notes));
    }

    let prior = compile_mode(cfg, prep, &prior_noise, seeds.compile)?;
    let decoder = decoder_for(&prior)?;
    let base = if cfg.circuit_noise {
        prior
    } else {
        compile_mode(cfg, prep, &sim_noise, seeds.compile)?
    };
    let sim_exp = if cfg.mode.is_distributed() && p_dropout > 0.0 {
        attach_node_dropout(&base, &sim_noise, seeds.dropout)?
    } else {
        if p_dropout > 0.0 {
            notes.push(format!("p = {p}: dropout is not applied in {} mode", cfg.mode.name()));
        }
        base
    };
    let sim = FrameSimulator::new(&sim_exp.program)?;
    let t = sample_until(&sim, &decoder, cfg.shots.max_shots, cfg.shots.target_errors, seeds.sample)?;
    let ci = bootstrap_weighted(&[(1.0, t.errors_any, t.shots)], DEFAULT_LEVEL, DEFAULT_RESAMPLES, seeds.bootstrap)?;
    Ok((row(cfg, p, p_dropout, &t, ci, started), notes))
}

/// Runs every grid point (concurrently). Rows come back in grid order; a
/// failing point is reported with its `p` and does not stop the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let prep = prepare(cfg)?;
    let seeds = point_seeds(cfg.seed, cfg.p.len());
    let results: Vec<Result<(ResultRow, Vec<String>)>> = cfg
        .p
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(&p, s)| run_point(cfg, &prep, p, s))
        .collect();
    let mut report = RunReport::default();
    for (&p, r) in cfg.p.iter().zip(results) {
        match r {
            Ok((row, notes)) => {
                info!(
                    "{} p={} P_L={:.3e} ({}/{})",
                    row.mode, row.p, row.p_l, row.errors_any, row.shots
                );
                report.rows.push(row);
                report.notes.extend(notes);
            }
            Err(e) => {
                warn!("p = {p}: {e}");
                report.failures.push(PointFailure {
                    p,
                    error: Error::Experiment(format!("p = {p}: {e}")),
                });
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub row: ResultRow,
    /// Sum of the weights as given.
    pub weight_sum: f64,
    pub warning: Option<String>,
}

/// `P_L = Σ wᵢ·P_Lᵢ` over normalized weights, with a bootstrap interval that
/// resamples every member's shots. Shot and error counts are summed.
pub fn combine_ensemble(members: &[(f64, ResultRow)], seed: u64) -> Result<Ensemble> {
    let Some((_, first)) = members.first() else {
        return Err(Error::Experiment("empty ensemble".into()));
    };
    if let Some((w, _)) = members.iter().find(|(w, _)| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::Experiment(format!("ensemble weight {w} is negative or not finite")));
    }
    let weight_sum: f64 = members.iter().map(|(w, _)| w).sum();
    if weight_sum <= 0.0 {
        return Err(Error::Experiment("ensemble weights sum to zero".into()));
    }
    let warning = ((weight_sum - 1.0).abs() > 1e-9).then(|| {
        let m = format!("ensemble weights sum to {weight_sum}; normalized");
        warn!("{m}");
        m
    });
    let parts: Vec<(f64, usize, usize)> = members
        .iter()
        .map(|(w, r)| (w / weight_sum, r.errors_any, r.shots))
        .collect();
    let p_l: f64 = parts.iter().map(|&(w, e, s)| w * e as f64 / s as f64).sum();
    let (ci_low, ci_high) = bootstrap_weighted(&parts, DEFAULT_LEVEL, DEFAULT_RESAMPLES, seed)?;
    let mut per_obs = vec![0; first.errors_per_obs.len()];
    for (_, r) in members {
        for (a, b) in per_obs.iter_mut().zip(&r.errors_per_obs) {
            *a += b;
        }
    }
    let row = ResultRow {
        shots: members.iter().map(|(_, r)| r.shots).sum(),
        errors_any: members.iter().map(|(_, r)| r.errors_any).sum(),
        errors_per_obs: per_obs,
        p_l,
        ci_low,
        ci_high,
        wall_ms: members.iter().map(|(_, r)| r.wall_ms).sum(),
        ..first.clone()
    };
    Ok(Ensemble {
        row,
        weight_sum,
        warning,
    })
}

pub const CSV_HEADER: [&str; 15] = [
    "mode",
    "code",
    "d_or_lattice",
    "n_q",
    "p",
    "p_dropout",
    "rounds",
    "shots",
    "errors_any",
    "errors_per_obs",
    "P_L",
    "ci_low",
    "ci_high",
    "seed",
    "wall_ms",
];

/// Writes rows as CSV. Wall time is written only with `wall_time`, and as 0
/// otherwise, so that reruns with the same seed are byte-identical.
pub fn write_csv<W: Write>(w: W, rows: &[ResultRow], wall_time: bool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| Error::Experiment(format!("csv: {e}"));
    out.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        let per_obs: Vec<String> = r.errors_per_obs.iter().map(|e| e.to_string()).collect();
        out.write_record([
            r.mode.clone(),
            r.code.clone(),
            r.d_or_lattice.clone(),
            r.n_q.map(|n| n.to_string()).unwrap_or_default(),
            format!("{:e}", r.p),
            format!("{:e}", r.p_dropout),
            r.rounds.to_string(),
            r.shots.to_string(),
            r.errors_any.to_string(),
            per_obs.join(";"),
            format!("{:.6e}", r.p_l),
            format!("{:.6e}", r.ci_low),
            format!("{:.6e}", r.ci_high),
            r.seed.to_string(),
            (if wall_time { r.wall_ms } else { 0 }).to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}
