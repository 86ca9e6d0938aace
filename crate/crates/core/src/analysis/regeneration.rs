use serde::Serialize;

use crate::cftp::PerfectSampler;
use crate::model::{ContextTreeModel, Symbol};
use crate::random::IndexedUniformSource;

use super::trace::{sigma, RescaledTrace, SpontaneousTrace};
use super::AnalysisError;

/// max{j ≤ 0, j ≥ -max_back : L_i ≤ i − j for i = j, …, n}, evaluated literally.
/// `None` lengths never satisfy a bound.
pub fn theta_from_lengths(n: i64, max_back: u64, lengths: impl Fn(i64) -> Option<u64>) -> Option<i64> {
    let lowest = -(max_back.min(i64::MAX as u64) as i64);
    (lowest..=0.min(n))
        .rev()
        .find(|&j| (j..=n).all(|i| lengths(i).is_some_and(|l| l as i128 <= (i - j) as i128)))
}

/// Suffix minima of i − L_i over [lo, n]; an unknown L counts as −∞.
fn suffix_reach(lo: i64, n: i64, lengths: impl Fn(i64) -> Option<u64>) -> Vec<i128> {
    let len = (n - lo + 1) as usize;
    let mut out = vec![i128::MAX; len + 1];
    for j in (0..len).rev() {
        let i = lo + j as i64;
        let reach = lengths(i).map_or(i128::MIN, |l| i as i128 - l as i128);
        out[j] = out[j + 1].min(reach);
    }
    out
}

/// Doubles the searched past until `probe(lo)` reports a hit or `max_back` is exhausted.
fn search_back<F>(max_back: u64, first: u64, mut probe: F) -> Result<i64, AnalysisError>
where
    F: FnMut(i64) -> Result<Option<i64>, AnalysisError>,
{
    let mut depth = first.min(max_back);
    loop {
        if let Some(hit) = probe(-(depth as i64))? {
            return Ok(hit);
        }
        if depth >= max_back {
            return Err(AnalysisError::Aborted { max_back });
        }
        depth = depth.saturating_mul(2).min(max_back);
    }
}

/// θ̄[0,n] in block units.
pub fn theta_bar(source: &IndexedUniformSource, n: i64, model: &ContextTreeModel, max_back: u64) -> Result<i64, AnalysisError> {
    search_back(max_back, 64, |lo| {
        let trace = RescaledTrace::new(source, model, lo, n.max(0))?;
        Ok(theta_bar_in(&trace, n))
    })
}

/// θ̄[0,n] restricted to candidates inside the trace.
pub fn theta_bar_in(trace: &RescaledTrace, n: i64) -> Option<i64> {
    let lo = trace.start;
    let reach = suffix_reach(lo, n, |b| trace.lbar_at(b));
    (lo..=0.min(n))
        .rev()
        .find(|&j| trace.zbar_at(j) && j as i128 <= reach[(j - lo) as usize])
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum BlockBoundOutcome {
    Holds { theta: i64, theta_bar: i64, bound: i64 },
    Violated { theta: i64, theta_bar: i64, bound: i64 },
    /// θ̄ was not found within the search limit.
    Undecided,
}

/// Compares θ[0, n|w|] with |w|(θ̄[0,n] − 1) + 1 on one realization.
pub fn block_bound_check(
    source: &IndexedUniformSource,
    n: i64,
    model: &ContextTreeModel,
    max_back: u64,
) -> Result<BlockBoundOutcome, AnalysisError> {
    let theta_bar = match theta_bar(source, n, model, max_back) {
        Ok(t) => t,
        Err(AnalysisError::Aborted { .. }) => return Ok(BlockBoundOutcome::Undecided),
        Err(e) => return Err(e),
    };
    let w = model.reference().len() as i64;
    let bound = w * (theta_bar - 1) + 1;
    let sampler = PerfectSampler::new(model)?.with_max_back(max_back.saturating_mul(w as u64));
    let theta = sampler.algorithm2(source, 0, n * w)?.theta;
    Ok(if theta >= bound {
        BlockBoundOutcome::Holds { theta, theta_bar, bound }
    } else {
        BlockBoundOutcome::Violated { theta, theta_bar, bound }
    })
}

fn starts_with_power(z: impl Fn(i64) -> Option<Symbol>, k: i64, w: &[Symbol], sigma: u64) -> bool {
    (0..sigma as usize * w.len()).all(|r| z(k + r as i64) == Some(w[r % w.len()]))
}

/// θ′[0,n]: the latest k ≤ 0 where the spontaneous trace shows w^σ at k and
/// every later L′_i stays within [k, i).
pub fn theta_prime(source: &IndexedUniformSource, n: i64, model: &ContextTreeModel, max_back: u64) -> Result<i64, AnalysisError> {
    let s = sigma(model);
    let span = (s * model.reference().len() as u64) as i64;
    search_back(max_back, 64, |lo| {
        let trace = SpontaneousTrace::new(source, model, lo, n.max(span - 1))?;
        Ok(theta_prime_in(&trace, n, model))
    })
}

/// θ′[0,n] restricted to candidates whose w^σ block lies inside the trace.
pub fn theta_prime_in(trace: &SpontaneousTrace, n: i64, model: &ContextTreeModel) -> Option<i64> {
    let w = model.reference();
    let s = sigma(model);
    let span = (s * w.len() as u64) as i64;
    let lo = trace.start;
    let reach = suffix_reach(lo, n, |i| trace.l_prime_at(model, i));
    let top = 0.min(trace.end() - span + 1);
    (lo..=top).rev().find(|&k| {
        let from = k + span;
        let ok_reach = from > n || k as i128 <= reach[(from - lo) as usize];
        ok_reach && starts_with_power(|i| trace.z_at(i), k, w, s)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HiddenRegeneration {
    pub horizon: u64,
    /// j with θ[j, j+H] = j.
    pub times: Vec<i64>,
    pub gaps: Vec<i64>,
}

/// Flags every j in [a,b] with θ[j, j+H] = j. These over-approximate the
/// times j = θ[j, +∞] and shrink as H grows.
pub fn hidden_regeneration(
    source: &IndexedUniformSource,
    a: i64,
    b: i64,
    horizon: u64,
    model: &ContextTreeModel,
) -> Result<HiddenRegeneration, AnalysisError> {
    let sampler = PerfectSampler::new(model)?;
    let h = horizon as i64;
    let us = (a..=b + h).map(|i| source.u_at(i)).collect::<Result<Vec<_>, _>>()?;
    let mut times = Vec::new();
    for j in a..=b {
        let off = (j - a) as usize;
        if sampler.greedy_ok(&us[off..=off + horizon as usize])? {
            times.push(j);
        }
    }
    let gaps = times.windows(2).map(|p| p[1] - p[0]).collect();
    Ok(HiddenRegeneration { horizon, times, gaps })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Block {
    pub start: i64,
    pub symbols: Vec<Symbol>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VisibleRegeneration {
    pub sigma: u64,
    /// Latest anchor ≤ m.
    pub theta_x: Option<i64>,
    /// Every k in the sample passing the anchor test against the sample end.
    pub anchors: Vec<i64>,
    /// The sample split at anchors; the first block may precede the first anchor.
    pub blocks: Vec<Block>,
}

/// Visible regeneration anchors of a sample X_start, …, X_n, computed from
/// the symbols alone.
pub fn visible_regeneration(
    sample: &[Symbol],
    start: i64,
    m: i64,
    model: &ContextTreeModel,
) -> Result<VisibleRegeneration, AnalysisError> {
    let w = model.reference();
    let s = sigma(model);
    let span = s as usize * w.len();
    let len = sample.len();
    // L^X_i measured on the whole available past, as i − |c|
    let mut reach = vec![i128::MAX; len + 1];
    for j in (1..len).rev() {
        let r = match model.context_of(&sample[..j])? {
            Some(c) => j as i128 - c.len() as i128,
            None => i128::MIN,
        };
        reach[j] = reach[j + 1].min(r);
    }
    let mut anchors = Vec::new();
    for k in 0..len.saturating_sub(span - 1) {
        if (0..span).all(|r| sample[k + r] == w[r % w.len()]) && k as i128 <= reach[(k + span).min(len)] {
            anchors.push(start + k as i64);
        }
    }
    let theta_x = anchors.iter().copied().filter(|&k| k <= m).max();
    let mut cuts: Vec<usize> = anchors.iter().map(|&k| (k - start) as usize).collect();
    if cuts.first() != Some(&0) {
        cuts.insert(0, 0);
    }
    cuts.push(len);
    let blocks = cuts
        .windows(2)
        .filter(|p| p[0] < p[1])
        .map(|p| Block { start: start + p[0] as i64, symbols: sample[p[0]..p[1]].to_vec() })
        .collect();
    Ok(VisibleRegeneration { sigma: s, theta_x, anchors, blocks })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::model::{Alphabet, LengthFunction, Rule, RuleKey, TableTail, TransitionRules};

    fn table_model() -> ContextTreeModel {
        let a = Alphabet::new(vec!['a', 'b', 'c'], 3);
        let rules = TransitionRules::new(0.2, vec![Rule { key: RuleKey::Default, probs: vec![1.0 / 3.0; 3] }]);
        let ell = LengthFunction::Table { values: vec![0, 0, 2, 2, 3, 4, 7, 8, 12], tail: TableTail::Hold };
        ContextTreeModel::new(a.clone(), a.parse_time_order("abc").unwrap(), ell, rules).unwrap()
    }

    fn renewal() -> ContextTreeModel {
        let a = Alphabet::new(vec!['2', '1'], 1);
        let rules = TransitionRules::new(0.2, vec![Rule { key: RuleKey::Default, probs: vec![0.4, 0.6] }]);
        ContextTreeModel::new(a.clone(), a.parse_time_order("2").unwrap(), LengthFunction::Zero, rules).unwrap()
    }

    #[test]
    fn literal_theta_example() {
        let l = |i: i64| Some(if i == 5 { 9 } else { 0 });
        assert_eq!(theta_from_lengths(9, 100, l), Some(-4));
        assert_eq!(theta_from_lengths(9, 3, l), None);
        assert_eq!(theta_from_lengths(4, 100, |_| Some(0)), Some(0));
    }

    #[test]
    fn worked_block_pattern() {
        // Z̄ on blocks −12..2
        let pattern = "11*1**11***1***";
        let zbar: Vec<bool> = pattern.chars().map(|c| c == '1').collect();
        let m = table_model();
        let t = RescaledTrace::from_zbar(&m, -12, zbar);
        assert_eq!(theta_bar_in(&t, 2), Some(-12));
        assert_eq!(theta_from_lengths(2, 12, |b| t.lbar_at(b)), Some(-12));
    }

    #[test]
    fn all_ones_gives_zero() {
        let m = table_model();
        let t = RescaledTrace::from_zbar(&m, -5, vec![true; 10]);
        assert_eq!(theta_bar_in(&t, 4), Some(0));
    }

    #[test]
    fn theta_prime_trivial() {
        let m = renewal();
        // Z_0 = 2 spontaneous, nothing else; σ|w| = 1
        let mut z = vec![None; 6];
        z[3] = Some(Symbol(0));
        let t = SpontaneousTrace::from_z(&m, -3, z);
        assert_eq!(theta_prime_in(&t, 2, &m), Some(0));
    }

    #[test]
    fn renewal_anchors_are_twos() {
        let m = renewal();
        let x = m.alphabet().parse_time_order("1121112").unwrap();
        let v = visible_regeneration(&x, 10, 14, &m).unwrap();
        assert_eq!(v.anchors, vec![12, 16]);
        assert_eq!(v.theta_x, Some(12));
        assert_eq!(v.blocks.len(), 3);
        let none = visible_regeneration(&m.alphabet().parse_time_order("111").unwrap(), 0, 0, &m).unwrap();
        assert!(none.anchors.is_empty() && none.theta_x.is_none());
    }

    #[test]
    fn hidden_times_epsilon_one() {
        let a = Alphabet::new(vec!['2', '1'], 1);
        let rules = TransitionRules::new(1.0, vec![Rule { key: RuleKey::Default, probs: vec![1.0, 0.0] }]);
        let m = ContextTreeModel::new(a.clone(), a.parse_time_order("2").unwrap(), LengthFunction::Identity, rules).unwrap();
        let h = hidden_regeneration(&IndexedUniformSource::counter(3), 0, 9, 5, &m).unwrap();
        assert_eq!(h.times, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn theta_bar_aborts_on_empty_trace() {
        let m = renewal();
        let src = IndexedUniformSource::fixed_trace((-40..=3).map(|i| (i, 0.9)).collect::<BTreeMap<_, _>>()).unwrap();
        assert!(matches!(theta_bar(&src, 3, &m, 30), Err(AnalysisError::Aborted { .. })));
    }
}
