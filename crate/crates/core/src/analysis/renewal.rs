use rayon::prelude::*;
use serde::Serialize;

use crate::model::ContextTreeModel;
use crate::random::IndexedUniformSource;

use super::dprocess::DProcess;
use super::trace::{ellbar_inv, RescaledTrace};
use super::AnalysisError;

/// Monte Carlo estimates of u_k = P(D^{(0)}_k = 0) and f_k = P(ζ = k), with
/// the residual of u_k = Σ_{i≤k} f_i u_{k−i}.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RenewalStatistics {
    pub runs: u64,
    /// Index k = 0..=horizon; u[0] = 1 and f[0] = 0.
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    pub u_stderr: Vec<f64>,
    pub f_stderr: Vec<f64>,
    pub residual: Vec<f64>,
    /// Batch-means standard error of each residual.
    pub residual_stderr: Vec<f64>,
}

impl RenewalStatistics {
    /// max_k |residual_k| / stderr_k, skipping k where both are zero.
    pub fn max_standardized_residual(&self) -> f64 {
        self.residual
            .iter()
            .zip(&self.residual_stderr)
            .skip(1)
            .map(|(&r, &se)| {
                if r == 0.0 {
                    0.0
                } else if se == 0.0 {
                    f64::INFINITY
                } else {
                    r.abs() / se
                }
            })
            .fold(0.0, f64::max)
    }
}

fn residuals(u: &[f64], f: &[f64]) -> Vec<f64> {
    (0..u.len())
        .map(|k| {
            if k == 0 {
                return 0.0;
            }
            let conv: f64 = (1..=k).map(|i| f[i] * u[k - i]).sum();
            u[k] - conv
        })
        .collect()
}

#[derive(Clone)]
struct Counts {
    runs: u64,
    zeros: Vec<u64>,
    returns: Vec<u64>,
}

impl Counts {
    fn new(horizon: usize) -> Self {
        Counts { runs: 0, zeros: vec![0; horizon + 1], returns: vec![0; horizon + 1] }
    }

    fn estimates(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.runs as f64;
        let mut u: Vec<f64> = self.zeros.iter().map(|&c| c as f64 / n).collect();
        u[0] = 1.0;
        let f = self.returns.iter().map(|&c| c as f64 / n).collect();
        (u, f)
    }
}

/// Runs D^{(0)} on blocks 1..=horizon for `runs` independent sources seeded
/// `base_seed`, `base_seed + 1`, …
pub fn u_f_statistics(model: &ContextTreeModel, runs: u64, horizon: usize, base_seed: u64) -> Result<RenewalStatistics, AnalysisError> {
    const BATCHES: u64 = 100;
    let batches = BATCHES.min(runs.max(1));
    let per = runs / batches;
    let extra = runs % batches;
    let counts: Vec<Counts> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let first = b * per + b.min(extra);
            let size = per + u64::from(b < extra);
            let mut c = Counts::new(horizon);
            for s in first..first + size {
                let source = IndexedUniformSource::counter(base_seed.wrapping_add(s));
                let trace = RescaledTrace::new(&source, model, 1, horizon as i64)?;
                let d = DProcess::from_trace(&trace, 0, horizon as i64);
                c.runs += 1;
                for k in 1..=horizon {
                    if d.values[k] == 0 {
                        c.zeros[k] += 1;
                    }
                }
                if let Some(z) = d.first_return() {
                    c.returns[z as usize] += 1;
                }
            }
            Ok(c)
        })
        .collect::<Result<_, AnalysisError>>()?;

    let mut total = Counts::new(horizon);
    for c in &counts {
        total.runs += c.runs;
        for k in 0..=horizon {
            total.zeros[k] += c.zeros[k];
            total.returns[k] += c.returns[k];
        }
    }
    let (u, f) = total.estimates();
    let residual = residuals(&u, &f);
    let n = total.runs as f64;
    let se = |p: f64| (p * (1.0 - p) / n).sqrt();

    let batch_residuals: Vec<Vec<f64>> = counts
        .iter()
        .filter(|c| c.runs > 0)
        .map(|c| {
            let (u, f) = c.estimates();
            residuals(&u, &f)
        })
        .collect();
    let nb = batch_residuals.len() as f64;
    let residual_stderr = (0..=horizon)
        .map(|k| {
            if nb < 2.0 {
                return f64::NAN;
            }
            let mean = batch_residuals.iter().map(|r| r[k]).sum::<f64>() / nb;
            let var = batch_residuals.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / (nb - 1.0);
            (var / nb).sqrt()
        })
        .collect();

    Ok(RenewalStatistics {
        runs: total.runs,
        u_stderr: u.iter().map(|&p| se(p)).collect(),
        f_stderr: f.iter().map(|&p| se(p)).collect(),
        u,
        f,
        residual,
        residual_stderr,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummabilityReport {
    /// (1 − ε^{|w|})^{ℓ̄⁻¹(i)} for i = 0..terms.
    pub terms: Vec<f64>,
    pub partial_sum: f64,
    /// Ratio of the last two non-zero terms; below 1 suggests geometric decay.
    pub tail_ratio: Option<f64>,
}

/// Partial sums of Σ_i (1 − ε^{|w|})^{ℓ̄⁻¹(i)}.
pub fn summability_diagnostic(model: &ContextTreeModel, terms: usize) -> SummabilityReport {
    let q = 1.0 - model.epsilon().powi(model.reference().len() as i32);
    let t: Vec<f64> = (0..terms as u64)
        .map(|i| match ellbar_inv(model, i) {
            Some(k) => q.powf(k as f64),
            None => 0.0,
        })
        .collect();
    let nonzero: Vec<f64> = t.iter().copied().filter(|&x| x > 0.0).collect();
    let tail_ratio = (nonzero.len() >= 2).then(|| nonzero[nonzero.len() - 1] / nonzero[nonzero.len() - 2]);
    SummabilityReport { partial_sum: t.iter().sum(), terms: t, tail_ratio }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Alphabet, LengthFunction, Rule, RuleKey, TransitionRules};

    fn identity(eps: f64) -> ContextTreeModel {
        let a = Alphabet::new(vec!['2', '1'], 1);
        let rules = TransitionRules::new(eps, vec![Rule { key: RuleKey::Default, probs: vec![eps, 1.0 - eps] }]);
        ContextTreeModel::new(a.clone(), a.parse_time_order("2").unwrap(), LengthFunction::Identity, rules).unwrap()
    }

    #[test]
    fn residual_of_exact_renewal_sequence_vanishes() {
        // Bernoulli(p) renewals: f_k = p(1-p)^{k-1} and u_k = p
        let p: f64 = 0.3;
        let f: Vec<f64> = (0..6).map(|k| if k == 0 { 0.0 } else { p * (1.0 - p).powi(k - 1) }).collect();
        let mut u = vec![p; 6];
        u[0] = 1.0;
        assert!(residuals(&u, &f).iter().all(|r| r.abs() < 1e-15));
    }

    #[test]
    fn epsilon_one_never_returns() {
        let s = u_f_statistics(&identity(1.0), 200, 10, 0).unwrap();
        assert!(s.u[1..].iter().all(|&u| u == 0.0));
        assert!(s.f.iter().all(|&f| f == 0.0));
        assert_eq!(s.max_standardized_residual(), 0.0);
    }

    #[test]
    fn summability_identity() {
        let r = summability_diagnostic(&identity(0.2), 60);
        assert!((r.terms[0] - 0.8).abs() < 1e-15);
        assert!((r.partial_sum - 4.0).abs() < 1e-4);
        assert!((r.tail_ratio.unwrap() - 0.8).abs() < 1e-12);
    }
}
