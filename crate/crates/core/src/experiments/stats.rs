use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::{Error, Result};

pub const DEFAULT_LEVEL: f64 = 0.999;
pub const DEFAULT_RESAMPLES: usize = 10_000;

/// `1 − (1 − p_dropout)^r`, times `1 − 2^−k` when `k` is given.
pub fn analytic_floor(p_dropout: f64, rounds: u32, k: Option<u32>) -> f64 {
    let f = 1.0 - (1.0 - p_dropout).powi(rounds as i32);
    match k {
        Some(k) => f * (1.0 - 0.5f64.powi(k as i32)),
        None => f,
    }
}

/// Upper bound for zero observed events in `shots` trials: `−ln(1 − level) / shots`.
pub fn rule_of_three(level: f64, shots: usize) -> f64 {
    (-(1.0 - level).ln() / shots as f64).min(1.0)
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::Experiment(format!("confidence level {level} is outside (0, 1)")))
    }
}

fn percentiles(mut v: Vec<f64>, level: f64) -> (f64, f64) {
    v.sort_by(|a, b| a.total_cmp(b));
    let alpha = (1.0 - level) / 2.0;
    let at = |q: f64| v[((q * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
    (at(alpha), at(1.0 - alpha))
}

/// One binomial resample per member, weighted.
struct Member {
    weight: f64,
    shots: usize,
    draw: Option<Binomial>,
}

fn members(parts: &[(f64, usize, usize)]) -> Result<Vec<Member>> {
    parts
        .iter()
        .map(|&(weight, errors, shots)| {
            if shots == 0 || errors > shots {
                return Err(Error::Experiment(format!("{errors} errors in {shots} shots")));
            }
            let q = errors as f64 / shots as f64;
            let draw = (q > 0.0 && q < 1.0).then(|| Binomial::new(shots as u64, q).expect("q in (0,1)"));
            Ok(Member { weight, shots, draw })
        })
        .collect()
}

/// Percentile bootstrap of `Σ wᵢ·qᵢ` where member `i` has `errors` out of
/// `shots`. Resampling shots with replacement is a binomial draw at the
/// observed rate. Members with no errors (or all errors) get a rule-of-three
/// widening of their contribution.
pub fn bootstrap_weighted(parts: &[(f64, usize, usize)], level: f64, resamples: usize, seed: u64) -> Result<(f64, f64)> {
    check_level(level)?;
    if parts.is_empty() {
        return Err(Error::Experiment("nothing to resample".into()));
    }
    let ms = members(parts)?;
    let point: f64 = parts.iter().map(|&(w, e, s)| w * e as f64 / s as f64).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<f64> = (0..resamples.max(1))
        .map(|_| {
            ms.iter()
                .map(|m| {
                    let k = match &m.draw {
                        Some(b) => b.sample(&mut rng) as f64,
                        None => 0.0,
                    };
                    m.weight * k / m.shots as f64
                })
                .sum::<f64>()
        })
        .collect();
    // Degenerate members contribute a constant; add it back.
    let fixed: f64 = parts
        .iter()
        .filter(|&&(_, e, s)| e == s)
        .map(|&(w, _, _)| w)
        .sum();
    let (mut lo, mut hi) = percentiles(draws, level);
    lo += fixed;
    hi += fixed;
    for (&(w, e, s), _) in parts.iter().zip(&ms) {
        if e == 0 {
            hi += w * rule_of_three(level, s);
        } else if e == s {
            lo -= w * rule_of_three(level, s);
        }
    }
    Ok((lo.max(0.0).min(point), hi.max(point)))
}

/// 99.9% (by default) percentile bootstrap interval for `errors / shots`.
pub fn bootstrap_ci(errors: usize, shots: usize, level: f64, resamples: usize, seed: u64) -> Result<(f64, f64)> {
    let (lo, hi) = bootstrap_weighted(&[(1.0, errors, shots)], level, resamples, seed)?;
    Ok((lo, hi.min(1.0)))
}

/// [`bootstrap_ci`] for a per-shot failure vector.
pub fn bootstrap_ci_bits(failed: &[bool], level: f64, resamples: usize, seed: u64) -> Result<(f64, f64)> {
    bootstrap_ci(failed.iter().filter(|&&f| f).count(), failed.len(), level, resamples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_values() {
        assert!((analytic_floor(1e-4, 32, None) - 3.1950e-3).abs() < 5e-8);
        // 0.75 × 3.19504e-3 = 2.39628e-3.
    assert!((analytic_floor(1e-4, 32, Some(2)) - 2.3963e-3).abs() < 5e-8);
        assert_eq!(analytic_floor(0.3, 0, None), 0.0);
        assert_eq!(analytic_floor(0.0, 32, Some(1)), 0.0);
    }

    #[test]
    fn zero_errors() {
        let (lo, hi) = bootstrap_ci(0, 10_000, DEFAULT_LEVEL, DEFAULT_RESAMPLES, 1).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi <= 1000f64.ln() / 1e4 + 1e-12);
    }

    #[test]
    fn all_errors() {
        let (lo, hi) = bootstrap_ci(50, 50, DEFAULT_LEVEL, 1000, 1).unwrap();
        assert_eq!(hi, 1.0);
        assert!(lo < 1.0 && lo > 0.8);
    }

    #[test]
    fn bad_input() {
        assert!(bootstrap_ci(1, 10, 1.0, 10, 0).is_err());
        assert!(bootstrap_ci(1, 10, 0.0, 10, 0).is_err());
        assert!(bootstrap_ci(11, 10, 0.9, 10, 0).is_err());
        assert!(bootstrap_ci(0, 0, 0.9, 10, 0).is_err());
    }
}
