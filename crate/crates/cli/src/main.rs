use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dqec::circuit::{parse_program, serialize_program};
use dqec::codes::{export_lattice, make_schedule, CodeDef};
use dqec::decode::{build_dem, mwpm_decode, score_predictions, to_matching_graph};
use dqec::experiments::{
    analytic_floor, bootstrap_ci, build_code, plot_svg, run_experiment, write_csv, CodeFamily, ExperimentConfig, Mode,
    Series, DEFAULT_LEVEL, DEFAULT_RESAMPLES,
};
use dqec::netcompile::{
    attach_node_dropout, compile_memory, compile_monolithic, compile_swapout, NoiseParams, TimingModel,
};
use dqec::partition::{build_connectivity_graph, export_partition, make_layout, select_largest_node, spectral_partition};
use dqec::sim::{read_outcomes, write_outcomes, FrameSimulator};

#[derive(Parser)]
#[command(name = "dqec", version, about = "Distributed QEC circuit compiler, sampler and decoder")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct CodeArg {
    /// `toric:D`, `honeycomb:AxB` or `lattice:PATH`; plain `toric` takes `--d`.
    #[arg(long)]
    code: String,
    /// Toric distance when `--code toric` has no size.
    #[arg(long)]
    d: Option<usize>,
}

impl CodeArg {
    fn family(&self) -> Result<CodeFamily> {
        match (self.code.as_str(), self.d) {
            ("toric", Some(d)) => Ok(CodeFamily::Toric { d }),
            (_, Some(_)) => bail!("--d only applies to --code toric"),
            (code, None) => parse_code(code),
        }
    }
}

fn parse_code(s: &str) -> Result<CodeFamily> {
    let (kind, arg) = s.split_once(':').context("code must look like toric:6, honeycomb:3x3 or lattice:FILE")?;
    Ok(match kind {
        "toric" => CodeFamily::Toric { d: arg.parse()? },
        "honeycomb" => {
            let (a, b) = arg.split_once('x').context("honeycomb size must be AxB")?;
            CodeFamily::Honeycomb {
                a: a.parse()?,
                b: b.parse()?,
            }
        }
        "lattice" => CodeFamily::LatticeFile { path: arg.into() },
        _ => bail!("unknown code family {kind}"),
    })
}

#[derive(Clone, Copy, ValueEnum)]
enum CompileMode {
    Memory,
    Swapout,
    Monolithic,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a code and print it (JSON for stabilizer codes, lattice text for Floquet codes).
    BuildCode {
        #[command(flatten)]
        code: CodeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partition a code's qubits into nodes of at most `n_q` qubits.
    Partition {
        #[command(flatten)]
        code: CodeArg,
        #[arg(long, alias = "nq")]
        n_q: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile a memory experiment to a circuit.
    Compile {
        #[command(flatten)]
        code: CodeArg,
        /// Defaults to memory, or swapout when a swap round is given.
        #[arg(long, value_enum)]
        mode: Option<CompileMode>,
        /// Same as `--mode monolithic`.
        #[arg(long, conflicts_with = "mode")]
        monolithic: bool,
        #[arg(long, alias = "nq")]
        n_q: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        p: f64,
        #[arg(long, alias = "pdropout", default_value_t = 0.0)]
        p_dropout: f64,
        #[arg(long, default_value_t = 10.0)]
        nl_ratio: f64,
        #[arg(long, default_value_t = 32)]
        rounds: usize,
        #[arg(long, default_value_t = 2)]
        pad: usize,
        /// Swap-out round (default rounds / 2).
        #[arg(long, alias = "swapout")]
        swap_after: Option<usize>,
        #[arg(long)]
        failure_round: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Circuit output (stdout if absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Compiler metadata as JSON.
        #[arg(long)]
        meta: Option<PathBuf>,
    },
    /// Sample detector and observable flips from a circuit.
    Sample {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode sampled outcomes with minimum-weight matching and report logical errors.
    Decode {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        outcomes: PathBuf,
        /// Also write the detector error model text.
        #[arg(long)]
        dem: Option<PathBuf>,
    },
    /// Run an experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Record wall time (makes the CSV run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Monolithic failure floor `1 - (1 - p_dropout)^r`.
    Floor {
        #[arg(long)]
        p_dropout: f64,
        #[arg(long, default_value_t = 32)]
        rounds: u32,
        /// Logical qubits; scales the floor by `1 - 2^-k`.
        #[arg(long)]
        k: Option<u32>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().cmd {
        Cmd::BuildCode { code, out } => {
            let text = match build_code(&code.family()?)? {
                CodeDef::Stabilizer(c) => serde_json::to_string_pretty(&c)? + "\n",
                CodeDef::Floquet(l) => export_lattice(&l),
            };
            output(out.as_deref())?.write_all(text.as_bytes())?;
        }
        Cmd::Partition { code, n_q, seed, out } => {
            let schedule = make_schedule(&build_code(&code.family()?)?)?;
            let graph = build_connectivity_graph(&schedule);
            let partition = spectral_partition(&graph, n_q, seed)?;
            let text = export_partition(&partition, &schedule, &graph, n_q)?;
            output(out.as_deref())?.write_all(text.as_bytes())?;
        }
        Cmd::Compile {
            code,
            mode,
            monolithic,
            n_q,
            p,
            p_dropout,
            nl_ratio,
            rounds,
            pad,
            swap_after,
            failure_round,
            seed,
            out,
            meta,
        } => {
            let schedule = make_schedule(&build_code(&code.family()?)?)?;
            let noise = NoiseParams {
                p,
                nl_ratio,
                p_dropout,
                ..NoiseParams::default()
            };
            noise.validate()?;
            let timing = TimingModel::default();
            let mode = match (mode, monolithic, swap_after) {
                (Some(m), ..) => m,
                (None, true, _) => CompileMode::Monolithic,
                (None, false, Some(_)) => CompileMode::Swapout,
                (None, false, None) => CompileMode::Memory,
            };
            let exp = match mode {
                CompileMode::Monolithic => compile_monolithic(&schedule, &noise, &timing, rounds, pad, failure_round)?,
                CompileMode::Memory | CompileMode::Swapout => {
                    let n_q = n_q.context("--n-q is required for distributed modes")?;
                    let partition = spectral_partition(&build_connectivity_graph(&schedule), n_q, seed)?;
                    let layout = make_layout(&partition, &schedule, n_q)?;
                    let exp = if matches!(mode, CompileMode::Memory) {
                        compile_memory(&schedule, &layout, &noise, &timing, rounds, pad, seed)?
                    } else {
                        let target = select_largest_node(&partition, &schedule)?;
                        let after = swap_after.unwrap_or(rounds / 2);
                        compile_swapout(&schedule, &layout, &noise, &timing, rounds, pad, after, target, seed)?
                    };
                    attach_node_dropout(&exp, &noise, seed)?
                }
            };
            output(out.as_deref())?.write_all(serialize_program(&exp.program).as_bytes())?;
            if let Some(m) = meta {
                fs::write(&m, serde_json::to_string_pretty(&exp.metadata)? + "\n")?;
            }
        }
        Cmd::Sample {
            circuit,
            shots,
            seed,
            out,
        } => {
            let prog = parse_program(&fs::read_to_string(&circuit)?)?;
            let outcomes = FrameSimulator::new(&prog)?.sample(shots, seed);
            let mut w = BufWriter::new(File::create(&out)?);
            write_outcomes(&mut w, &outcomes)?;
            w.flush()?;
        }
        Cmd::Decode { circuit, outcomes, dem } => {
            let prog = parse_program(&fs::read_to_string(&circuit)?)?;
            let model = build_dem(&prog)?;
            if let Some(path) = dem {
                fs::write(path, model.to_text())?;
            }
            let graph = to_matching_graph(&model)?;
            let outcomes = read_outcomes(BufReader::new(File::open(&outcomes)?))?;
            let preds = mwpm_decode(&graph, &outcomes)?;
            let score = score_predictions(&preds, &outcomes)?;
            let (lo, hi) = bootstrap_ci(score.any, score.shots.max(1), DEFAULT_LEVEL, DEFAULT_RESAMPLES, 0)?;
            println!("shots {}", score.shots);
            println!("errors_any {}", score.any);
            for (k, e) in score.per_observable.iter().enumerate() {
                println!("errors_L{k} {e}");
            }
            println!(
                "P_L {:.6e} ci99.9 [{lo:.6e}, {hi:.6e}]",
                score.any as f64 / score.shots.max(1) as f64
            );
        }
        Cmd::Run { config, csv, svg, timing } => {
            let cfg = ExperimentConfig::from_toml(&fs::read_to_string(&config)?)?;
            let report = run_experiment(&cfg)?;
            write_csv(File::create(&csv)?, &report.rows, timing)?;
            for n in &report.notes {
                log::warn!("{n}");
            }
            if let Some(path) = svg {
                let (code, size) = cfg.code.labels();
                let label = match cfg.mode {
                    Mode::Memory | Mode::Swapout => format!("{} n_q={}", cfg.mode.name(), cfg.n_q.unwrap_or(0)),
                    _ => cfg.mode.name().to_string(),
                };
                fs::write(path, plot_svg(&format!("{code} {size}"), &[Series::from_rows(&label, &report.rows)]))?;
            }
            for f in &report.failures {
                log::error!("{}", f.error);
            }
            if !report.failures.is_empty() {
                bail!("{} of {} grid points failed", report.failures.len(), cfg.p.len());
            }
        }
        Cmd::Floor { p_dropout, rounds, k } => {
            println!("{:.6e}", analytic_floor(p_dropout, rounds, k));
        }
    }
    Ok(())
}
