use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CodeFamily {
    Toric { d: usize },
    Honeycomb { a: usize, b: usize },
    /// Floquet lattice in the text format read by `load_floquet_lattice`.
    LatticeFile { path: PathBuf },
}

impl CodeFamily {
    /// `(code, d_or_lattice)` columns of the CSV.
    pub fn labels(&self) -> (String, String) {
        match self {
            CodeFamily::Toric { d } => ("toric".into(), d.to_string()),
            CodeFamily::Honeycomb { a, b } => ("honeycomb".into(), format!("{a}x{b}")),
            CodeFamily::LatticeFile { path } => (
                "lattice".into(),
                path.file_name()
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropoutRule {
    #[default]
    None,
    /// `p_dropout = p / 100` at each grid point.
    POver100,
    Fixed(f64),
}

impl DropoutRule {
    pub fn at(&self, p: f64) -> f64 {
        match *self {
            DropoutRule::None => 0.0,
            DropoutRule::POver100 => p / 100.0,
            DropoutRule::Fixed(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Memory,
    Swapout,
    Monolithic,
    MonolithicEnsemble,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Memory => "memory",
            Mode::Swapout => "swapout",
            Mode::Monolithic => "monolithic",
            Mode::MonolithicEnsemble => "monolithic-ensemble",
        }
    }

    pub fn is_distributed(&self) -> bool {
        matches!(self, Mode::Memory | Mode::Swapout)
    }
}

/// Sampling stops once `target_errors` logical errors are seen or
/// `max_shots` shots are taken, whichever comes first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShotPolicy {
    pub max_shots: usize,
    pub target_errors: usize,
}

impl Default for ShotPolicy {
    fn default() -> Self {
        ShotPolicy {
            max_shots: 100_000,
            target_errors: 100,
        }
    }
}

impl ShotPolicy {
    pub fn fixed(shots: usize) -> Self {
        ShotPolicy {
            max_shots: shots,
            target_errors: usize::MAX,
        }
    }
}

fn default_rounds() -> usize {
    32
}

fn default_pad() -> usize {
    2
}

fn default_true() -> bool {
    true
}

fn default_nl_ratio() -> f64 {
    10.0
}

fn default_dropout_samples() -> usize {
    512
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub code: CodeFamily,
    /// Qubits per node; ignored by the monolithic modes.
    #[serde(default)]
    pub n_q: Option<usize>,
    pub p: Vec<f64>,
    /// When false the circuit is noiseless apart from dropout; the decoder
    /// prior still uses circuit noise at the grid value of `p`.
    #[serde(default = "default_true")]
    pub circuit_noise: bool,
    #[serde(default)]
    pub dropout: DropoutRule,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_pad")]
    pub pad: usize,
    #[serde(default)]
    pub mode: Mode,
    /// Swap-out: noisy round after which the largest node is replaced.
    /// Defaults to `rounds / 2`.
    #[serde(default)]
    pub swap_after: Option<usize>,
    /// Monolithic: round after which every qubit is depolarized.
    #[serde(default)]
    pub failure_round: Option<usize>,
    #[serde(default)]
    pub shots: ShotPolicy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_nl_ratio")]
    pub nl_ratio: f64,
    /// Pauli supports sampled per node per round for dropout.
    #[serde(default = "default_dropout_samples")]
    pub dropout_samples: usize,
}

impl ExperimentConfig {
    pub fn new(code: CodeFamily, n_q: Option<usize>, p: Vec<f64>, mode: Mode) -> Self {
        ExperimentConfig {
            code,
            n_q,
            p,
            circuit_noise: true,
            dropout: DropoutRule::None,
            rounds: default_rounds(),
            pad: default_pad(),
            mode,
            swap_after: None,
            failure_round: None,
            shots: ShotPolicy::default(),
            seed: 0,
            nl_ratio: default_nl_ratio(),
            dropout_samples: default_dropout_samples(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Experiment(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn swap_round(&self) -> usize {
        self.swap_after.unwrap_or(self.rounds / 2)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Experiment(m));
        if self.p.is_empty() {
            return bad("noise grid is empty".into());
        }
        if let Some(p) = self.p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("grid value {p} is not a probability"));
        }
        if let DropoutRule::Fixed(v) = self.dropout {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("p_dropout {v} is not a probability"));
            }
        }
        if self.rounds < 1 {
            return bad("rounds must be at least 1".into());
        }
        if self.mode.is_distributed() && self.n_q.is_none_or(|n| n < 2) {
            return bad(format!("{} mode needs n_q >= 2", self.mode.name()));
        }
        if self.shots.max_shots < 1 {
            return bad("max_shots must be at least 1".into());
        }
        if self.mode == Mode::Swapout && !(1..self.rounds).contains(&self.swap_round()) {
            return bad(format!("swap after round {} is outside 1..{}", self.swap_round(), self.rounds));
        }
        Ok(())
    }
}
