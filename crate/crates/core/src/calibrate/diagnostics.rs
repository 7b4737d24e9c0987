//! Split-R̂ and effective sample size for scalar chain summaries.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, mean, sample_variance};

/// R̂ above this value flags a statistic as unconverged.
pub const RHAT_THRESHOLD: f64 = 1.1;

const MIN_CHAINS: usize = 2;
const MIN_DRAWS: usize = 10;

/// Scalar statistics recorded at every retained draw of one chain.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainTrace {
    /// `statistics[s][draw]`
    pub statistics: Vec<Vec<f64>>,
}

impl ChainTrace {
    pub fn with_statistics(n_stats: usize, capacity: usize) -> Self {
        Self {
            statistics: (0..n_stats).map(|_| Vec::with_capacity(capacity)).collect(),
        }
    }

    pub fn push(&mut self, values: &[f64]) {
        for (s, &v) in self.statistics.iter_mut().zip(values) {
            s.push(v);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatisticDiagnostic {
    pub name: String,
    pub rhat: f64,
    pub ess: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub statistics: Vec<StatisticDiagnostic>,
}

impl DiagnosticsReport {
    pub fn any_flagged(&self) -> bool {
        self.statistics.iter().any(|s| s.flagged)
    }

    pub fn max_rhat(&self) -> f64 {
        self.statistics.iter().map(|s| s.rhat).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Split-R̂ and ESS for every monitored statistic.
pub fn diagnostics(chains: &[ChainTrace], names: &[String]) -> Result<DiagnosticsReport> {
    if chains.len() < MIN_CHAINS {
        return Err(Error::DiagnosticUnavailable("need at least two chains"));
    }
    let n_stats = chains[0].statistics.len();
    if chains.iter().any(|c| c.statistics.len() != n_stats) || names.len() != n_stats {
        return Err(Error::DiagnosticUnavailable("chains monitor different statistics"));
    }
    let mut out = Vec::with_capacity(n_stats);
    for (s, name) in names.iter().enumerate() {
        let draws: Vec<&[f64]> = chains.iter().map(|c| c.statistics[s].as_slice()).collect();
        let rhat = split_rhat(&draws)?;
        let ess = effective_sample_size(&draws)?;
        out.push(StatisticDiagnostic {
            name: name.clone(),
            rhat,
            ess,
            flagged: !(rhat <= RHAT_THRESHOLD),
        });
    }
    Ok(DiagnosticsReport { statistics: out })
}

fn check_draws(chains: &[&[f64]]) -> Result<usize> {
    if chains.len() < MIN_CHAINS {
        return Err(Error::DiagnosticUnavailable("need at least two chains"));
    }
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if n < MIN_DRAWS {
        return Err(Error::DiagnosticUnavailable("need at least ten draws per chain"));
    }
    Ok(n)
}

/// Between- and within-chain variance for equal-length chains.
fn variance_components(chains: &[&[f64]]) -> (f64, f64) {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let within = mean(&chains.iter().map(|c| sample_variance(c)).collect::<Vec<_>>());
    let between = n * sample_variance(&means);
    (between, within)
}

/// Potential scale reduction on chains split in half. Chains are trimmed
/// to the shortest; an odd middle draw is dropped. Zero within-chain
/// variance gives 1 when the chains also agree, +inf otherwise.
pub fn split_rhat(chains: &[&[f64]]) -> Result<f64> {
    let n = check_draws(chains)?;
    let half = n / 2;
    let mut halves: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        halves.push(&c[..half]);
        halves.push(&c[n - half..n]);
    }
    let (between, within) = variance_components(&halves);
    if within == 0.0 {
        return Ok(if between == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let nh = half as f64;
    let var_plus = (nh - 1.0) / nh * within + between / nh;
    Ok(math::sqrt(var_plus / within))
}

/// Multi-chain effective sample size with Geyer's initial monotone
/// sequence estimator.
pub fn effective_sample_size(chains: &[&[f64]]) -> Result<f64> {
    let n = check_draws(chains)?;
    let trimmed: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let m = trimmed.len() as f64;
    let total = m * n as f64;
    let (between, within) = variance_components(&trimmed);
    if within == 0.0 {
        return Ok(total);
    }
    let nf = n as f64;
    let var_plus = (nf - 1.0) / nf * within + between / nf;

    let acov: Vec<Vec<f64>> = trimmed.iter().map(|c| autocovariance(c)).collect();
    let rho = |lag: usize| -> f64 {
        let mean_acov = acov.iter().map(|a| a[lag]).sum::<f64>() / m;
        1.0 - (within - mean_acov) / var_plus
    };

    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let mut pair = rho(lag) + rho(lag + 1);
        if pair < 0.0 {
            break;
        }
        pair = pair.min(prev_pair);
        sum_pairs += pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = (-1.0 + 2.0 * sum_pairs).max(1.0 / libm::log10(total));
    Ok(total / tau)
}

/// Autocovariance at every lag, normalized by `n` and scaled so that lag 0
/// equals the unbiased variance.
fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mu = mean(x);
    let scale = n as f64 / (n as f64 - 1.0);
    (0..n)
        .map(|lag| {
            let s: f64 = (0..n - lag).map(|i| (x[i] - mu) * (x[i + lag] - mu)).sum();
            s / n as f64 * scale
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_constant_chains_have_unit_rhat() {
        let a = [3.0; 20];
        assert_eq!(split_rhat(&[&a, &a]).unwrap(), 1.0);
    }

    #[test]
    fn disagreeing_constant_chains_diverge() {
        let a = [1.0; 20];
        let b = [2.0; 20];
        let r = split_rhat(&[&a, &b]).unwrap();
        assert!(r.is_infinite());
        let trace = |v: &[f64]| ChainTrace {
            statistics: vec![v.to_vec()],
        };
        let report = diagnostics(&[trace(&a), trace(&b)], &["x".into()]).unwrap();
        assert!(report.any_flagged());
    }

    #[test]
    fn too_few_draws_or_chains() {
        let a = [1.0; 9];
        assert!(matches!(split_rhat(&[&a, &a]), Err(Error::DiagnosticUnavailable(_))));
        let b = [1.0; 20];
        assert!(matches!(split_rhat(&[&b]), Err(Error::DiagnosticUnavailable(_))));
    }

    #[test]
    fn independent_draws_mix_well() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..500).map(|_| rng.random::<f64>()).collect())
            .collect();
        let refs: Vec<&[f64]> = chains.iter().map(|c| c.as_slice()).collect();
        let r = split_rhat(&refs).unwrap();
        assert!(r < 1.02, "{r}");
        let ess = effective_sample_size(&refs).unwrap();
        assert!(ess > 1500.0 && ess < 2600.0, "{ess}");
    }

    #[test]
    fn autocorrelated_draws_have_small_ess() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..1000)
                    .map(|_| {
                        x = 0.95 * x + (rng.random::<f64>() - 0.5);
                        x
                    })
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = chains.iter().map(|c| c.as_slice()).collect();
        let ess = effective_sample_size(&refs).unwrap();
        // AR(1) with φ = 0.95: ESS ≈ N (1 − φ)/(1 + φ) ≈ 103.
        assert!(ess > 40.0 && ess < 250.0, "{ess}");
    }

    #[test]
    fn shifted_chains_are_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..200).map(|_| rng.random::<f64>() + 1.0).collect();
        assert!(split_rhat(&[&a, &b]).unwrap() > RHAT_THRESHOLD);
    }
}
