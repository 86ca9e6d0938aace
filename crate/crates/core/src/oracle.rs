//! Independent reference computations: renewal stationary laws, chi-square
//! goodness of fit, and an exact enumeration of the window law produced by
//! the explicit algorithm on a discretized uniform grid.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::cftp::{CftpError, PerfectSampler};
use crate::model::{ContextTreeModel, LengthFunction, ModelError, RuleKey, Symbol};
use crate::partition::{PartitionError, UpdateFunction};
use crate::random::IndexedUniformSource;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("return probabilities are not bounded away from zero in the tail")]
    UnboundedTail,
    #[error("renewal oracle needs a two-letter alphabet, |w| = 1 and ell = zero")]
    NotRenewal,
    #[error("no grid resolution up to {0} refines every partition endpoint")]
    NoGrid(u64),
    #[error("grid of resolution {r} over {sites} sites overflows exact arithmetic")]
    GridTooFine { r: u64, sites: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("bad argument: {0}")]
    BadArgument(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Cftp(#[from] CftpError),
}

/// How return probabilities continue past the explicit table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RenewalTail {
    /// The last value repeats.
    Hold,
    /// The last `period` values repeat cyclically.
    Periodic(usize),
}

/// Return probabilities p_i = p(2 | 1^i 2) of a renewal chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RenewalSpec {
    pub p: Vec<f64>,
    pub tail: RenewalTail,
}

impl RenewalSpec {
    pub fn constant(p: f64) -> Self {
        RenewalSpec { p: vec![p], tail: RenewalTail::Hold }
    }

    /// p_i = `odd` for odd i and `even` for even i.
    pub fn alternating(odd: f64, even: f64) -> Self {
        RenewalSpec { p: vec![even, odd], tail: RenewalTail::Periodic(2) }
    }

    pub fn p_at(&self, i: usize) -> f64 {
        let n = self.p.len();
        if i < n {
            return self.p[i];
        }
        match self.tail {
            RenewalTail::Hold => self.p[n - 1],
            RenewalTail::Periodic(period) => {
                let period = period.clamp(1, n);
                self.p[n - period + (i - n) % period]
            }
        }
    }

    fn tail_min(&self) -> f64 {
        let n = self.p.len();
        match self.tail {
            RenewalTail::Hold => self.p[n - 1],
            RenewalTail::Periodic(period) => self.p[n - period.clamp(1, n)..].iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Reads p_i off a model with a two-letter alphabet, |w| = 1 and ℓ ≡ 0,
    /// whose context at distance i is w followed by i copies of the other symbol.
    pub fn from_model(model: &ContextTreeModel) -> Result<Self, OracleError> {
        if model.alphabet().len() != 2 || model.reference().len() != 1 || *model.ell() != LengthFunction::Zero {
            return Err(OracleError::NotRenewal);
        }
        let w = model.reference()[0];
        let other = Symbol(1 - w.0);
        let mut reach = 0usize;
        for r in model.rules().rules() {
            match &r.key {
                RuleKey::Context(k) => reach = reach.max(k.len()),
                RuleKey::Distance(crate::model::DistanceClass::Exact(d) | crate::model::DistanceClass::AtLeast(d)) => {
                    reach = reach.max(*d as usize + 1)
                }
                _ => {}
            }
        }
        let len = (reach + 2).next_multiple_of(2);
        let mut context = vec![w];
        let mut p = Vec::with_capacity(len);
        for i in 0..len {
            let c = crate::model::Context { symbols: &context, distance: i as u64 };
            p.push(model.transition_vector(c)?[w.index()]);
            context.push(other);
        }
        Ok(RenewalSpec { p, tail: RenewalTail::Periodic(2) })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RenewalMarginal {
    /// 1/E[T] with E[T] truncated at K terms.
    pub value: f64,
    /// Value with the worst-case tail of E[T] added back.
    pub lower: f64,
    pub remainder_bound: f64,
}

/// Stationary P(X_0 = 2) = 1/E[T] for the renewal chain with return
/// probabilities `spec`, where P(T > k) = Π_{i<k} (1 − p_i).
pub fn renewal_stationary_marginal(spec: &RenewalSpec, truncation: usize) -> Result<RenewalMarginal, OracleError> {
    let p_min = spec.tail_min();
    if p_min.is_nan() || p_min <= 0.0 {
        return Err(OracleError::UnboundedTail);
    }
    let mut survive = 1.0;
    let mut mean = 0.0;
    for i in 0..truncation.max(spec.p.len()) {
        mean += survive;
        survive *= 1.0 - spec.p_at(i);
        if survive == 0.0 {
            break;
        }
    }
    let remainder_bound = survive / p_min;
    Ok(RenewalMarginal { value: 1.0 / mean, lower: 1.0 / (mean + remainder_bound), remainder_bound })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
    pub p_value: f64,
    pub level: f64,
    pub pass: bool,
    pub observed: Vec<u64>,
    pub expected: Vec<f64>,
}

/// Pearson goodness of fit of bin counts against bin probabilities at the
/// given confidence level (e.g. 0.99).
pub fn chi_square_test(observed: &[u64], probs: &[f64], level: f64) -> Result<ChiSquareReport, OracleError> {
    if observed.len() != probs.len() {
        return Err(OracleError::BadArgument("observed and expected bins differ in length".into()));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(OracleError::EmptySample);
    }
    let expected: Vec<f64> = probs.iter().map(|&p| p * n as f64).collect();
    let mut statistic = 0.0;
    for (&o, &e) in observed.iter().zip(&expected) {
        if e > 0.0 {
            statistic += (o as f64 - e).powi(2) / e;
        } else if o > 0 {
            statistic = f64::INFINITY;
        }
    }
    let dof = expected.iter().filter(|&&e| e > 0.0).count().saturating_sub(1);
    let (critical, p_value) = if dof == 0 {
        (0.0, if statistic == 0.0 { 1.0 } else { 0.0 })
    } else {
        let dist = ChiSquared::new(dof as f64).map_err(|e| OracleError::BadArgument(e.to_string()))?;
        (dist.inverse_cdf(level), 1.0 - dist.cdf(statistic))
    };
    Ok(ChiSquareReport {
        statistic,
        dof,
        critical,
        p_value,
        level,
        pass: statistic <= critical,
        observed: observed.to_vec(),
        expected,
    })
}

/// Chi-square test of samples against Geometric(p) on {0, 1, 2, …}, with
/// the tail pooled so every bin expects at least five counts.
pub fn geometric_test(samples: &[u64], p: f64, level: f64) -> Result<ChiSquareReport, OracleError> {
    if samples.is_empty() {
        return Err(OracleError::EmptySample);
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(OracleError::BadArgument(format!("geometric parameter {p}")));
    }
    let n = samples.len() as f64;
    let q = 1.0 - p;
    let mut probs = Vec::new();
    let mut tail = 1.0;
    loop {
        let pk = p * q.powi(probs.len() as i32);
        let rest = tail - pk;
        if pk * n < 5.0 || rest * n < 5.0 {
            break;
        }
        probs.push(pk);
        tail = rest;
    }
    probs.push(tail.max(0.0));
    let last = probs.len() - 1;
    let mut observed = vec![0u64; probs.len()];
    for &s in samples {
        observed[(s as usize).min(last)] += 1;
    }
    chi_square_test(&observed, &probs, level)
}

/// Exact law of X_0 … X_{L−1} on a uniform grid, truncated in depth.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowLaw {
    pub resolution: u64,
    /// All masses are numerators over resolution^(len + depth).
    pub exponent: u32,
    pub len: usize,
    pub depth: usize,
    pub law: BTreeMap<Vec<Symbol>, u128>,
    pub unresolved: u128,
}

impl WindowLaw {
    pub fn denominator(&self) -> u128 {
        (self.resolution as u128).pow(self.exponent)
    }

    pub fn probability(&self, word: &[Symbol]) -> f64 {
        self.law.get(word).map_or(0.0, |&c| c as f64 / self.denominator() as f64)
    }

    pub fn unresolved_mass(&self) -> f64 {
        self.unresolved as f64 / self.denominator() as f64
    }

    /// Resolved mass plus unresolved mass, as an exact numerator.
    pub fn total_numerator(&self) -> u128 {
        self.law.values().sum::<u128>() + self.unresolved
    }
}

/// Smallest r ≤ `max` such that every partition endpoint is a multiple of 1/r.
fn grid_resolution(update: &UpdateFunction<'_>, max: u64) -> Result<u64, OracleError> {
    let model = update.model();
    let mut ends: Vec<f64> = (1..=model.alphabet().regular_count()).map(|a| a as f64 * model.epsilon()).collect();
    for i in 0..model.rules().rules().len() {
        ends.extend_from_slice(update.rule_endpoints(i));
    }
    (1..=max)
        .find(|&r| ends.iter().all(|&e| ((e * r as f64) - (e * r as f64).round()).abs() < 1e-9))
        .ok_or(OracleError::NoGrid(max))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Site {
    Unknown,
    Pending,
    Built(Symbol),
}

#[derive(Clone)]
struct State {
    sites: Vec<Site>,
    lo: usize,
    weight: u128,
    built: u32,
    pending: u32,
}

struct Enumerator<'a> {
    model: &'a ContextTreeModel,
    regular: usize,
    spont: u128,
    pend: u128,
    cells: Vec<Vec<u128>>,
    pow: Vec<u128>,
    exponent: u32,
    depth: usize,
    min_numerator: u128,
    law: BTreeMap<Vec<Symbol>, u128>,
    unresolved: u128,
}

impl Enumerator<'_> {
    fn bound(&self, st: &State) -> u128 {
        let rest = self.exponent - st.built - st.pending;
        st.weight * self.pend.pow(st.pending) * self.pow[rest as usize]
    }

    fn cells_for(&self, st: &State, t: usize) -> Result<Option<&[u128]>, OracleError> {
        let past: Vec<Symbol> = st.sites[st.lo..t]
            .iter()
            .map(|s| match s {
                Site::Built(a) => *a,
                _ => unreachable!("past of the first pending site is built"),
            })
            .collect();
        Ok(match self.model.context_of(&past)? {
            Some(c) => Some(&self.cells[self.model.rule_for(c)?]),
            None => None,
        })
    }

    fn resolve(&mut self, mut st: State) -> Result<(), OracleError> {
        let mass = self.bound(&st);
        if mass < self.min_numerator {
            self.unresolved += mass;
            return Ok(());
        }
        let Some(t) = (st.lo..st.sites.len()).find(|&i| !matches!(st.sites[i], Site::Built(_))) else {
            let word = st.sites[self.depth..]
                .iter()
                .map(|s| match s {
                    Site::Built(a) => *a,
                    _ => unreachable!(),
                })
                .collect();
            *self.law.entry(word).or_insert(0) += mass;
            return Ok(());
        };
        let unknown = st.sites[t] == Site::Unknown;
        if unknown {
            for a in 0..self.regular {
                let mut child = st.clone();
                child.sites[t] = Site::Built(Symbol(a as u8));
                child.weight *= self.spont;
                child.built += 1;
                self.resolve(child)?;
            }
            if self.pend == 0 {
                return Ok(());
            }
        }
        match self.cells_for(&st, t)? {
            Some(cells) => {
                let cells = cells.to_vec();
                for (a, &c) in cells.iter().enumerate() {
                    if c == 0 {
                        continue;
                    }
                    let mut child = st.clone();
                    child.sites[t] = Site::Built(Symbol(a as u8));
                    child.weight *= c;
                    child.built += 1;
                    if !unknown {
                        child.pending -= 1;
                    }
                    self.resolve(child)?;
                }
                Ok(())
            }
            None => {
                if unknown {
                    st.sites[t] = Site::Pending;
                    st.pending += 1;
                }
                self.backward(st)
            }
        }
    }

    fn backward(&mut self, mut st: State) -> Result<(), OracleError> {
        let mass = self.bound(&st);
        if st.lo == 0 || mass < self.min_numerator {
            self.unresolved += mass;
            return Ok(());
        }
        st.lo -= 1;
        let lo = st.lo;
        for a in 0..self.regular {
            let mut child = st.clone();
            child.sites[lo] = Site::Built(Symbol(a as u8));
            child.weight *= self.spont;
            child.built += 1;
            self.resolve(child)?;
        }
        if self.pend > 0 {
            st.sites[lo] = Site::Pending;
            st.pending += 1;
            self.backward(st)?;
        }
        Ok(())
    }
}

/// Enumerates every outcome of the explicit algorithm for the window
/// X_0 … X_{len−1} over a grid of uniforms that refines all partition
/// endpoints. Paths that need more than `depth` past sites, or whose mass
/// falls below `min_mass`, are counted as unresolved.
pub fn brute_force_window_law(model: &ContextTreeModel, len: usize, depth: usize, min_mass: f64) -> Result<WindowLaw, OracleError> {
    if len == 0 {
        return Err(OracleError::BadArgument("window length must be positive".into()));
    }
    let update = UpdateFunction::new(model)?;
    let r = grid_resolution(&update, 100_000)?;
    let sites = len + depth;
    if (sites as f64) * (r as f64).log2() >= 126.0 {
        return Err(OracleError::GridTooFine { r, sites });
    }
    let scale = |x: f64| (x * r as f64).round() as u128;
    let regular = model.alphabet().regular_count();
    let spont = scale(model.epsilon());
    let pend = r as u128 - spont * regular as u128;
    let base = scale(model.spontaneous_mass());
    let cells = (0..model.rules().rules().len())
        .map(|i| {
            let mut prev = base;
            update
                .rule_endpoints(i)
                .iter()
                .map(|&e| {
                    let cur = scale(e);
                    let c = cur - prev;
                    prev = cur;
                    c
                })
                .collect()
        })
        .collect();
    let pow: Vec<u128> = (0..=sites as u32).map(|k| (r as u128).pow(k)).collect();
    let total = pow[sites];
    let mut e = Enumerator {
        model,
        regular,
        spont,
        pend,
        cells,
        pow,
        exponent: sites as u32,
        depth,
        min_numerator: (min_mass.max(0.0) * total as f64) as u128,
        law: BTreeMap::new(),
        unresolved: 0,
    };
    let start = State { sites: vec![Site::Unknown; sites], lo: depth, weight: 1, built: 0, pending: 0 };
    e.resolve(start)?;
    Ok(WindowLaw { resolution: r, exponent: sites as u32, len, depth, law: e.law, unresolved: e.unresolved })
}

/// Frequencies of X_0 … X_{len−1} over independent runs of the sampler.
pub fn empirical_window_law(
    model: &ContextTreeModel,
    len: usize,
    runs: u64,
    base_seed: u64,
    max_back: u64,
) -> Result<BTreeMap<Vec<Symbol>, u64>, OracleError> {
    let sampler = PerfectSampler::new(model)?.with_max_back(max_back);
    let words = (0..runs)
        .into_par_iter()
        .map(|s| {
            let src = IndexedUniformSource::counter(base_seed.wrapping_add(s));
            Ok(sampler.sample_stationary(&src, 0, len as i64 - 1)?.window().to_vec())
        })
        .collect::<Result<Vec<_>, OracleError>>()?;
    let mut counts = BTreeMap::new();
    for w in words {
        *counts.entry(w).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Stationary law of X_0 … X_{len−1} for a model whose transitions depend
/// on at most `order` past symbols: no distance rules and no context key
/// longer than `order`. Solved by power iteration on A^order.
pub fn finite_memory_window_law(model: &ContextTreeModel, order: usize, len: usize) -> Result<BTreeMap<Vec<Symbol>, f64>, OracleError> {
    if order == 0 || len == 0 || len > order {
        return Err(OracleError::BadArgument("need 0 < len <= order".into()));
    }
    let rules = model.rules().rules();
    let default = rules.iter().position(|r| r.key == RuleKey::Default);
    for r in rules {
        match &r.key {
            RuleKey::Distance(_) => return Err(OracleError::BadArgument("distance rules have unbounded memory".into())),
            RuleKey::Context(k) if k.len() > order => {
                return Err(OracleError::BadArgument(format!("context key longer than order {order}")))
            }
            _ => {}
        }
    }
    let d = model.alphabet().len();
    let states = d.checked_pow(order as u32).filter(|&s| s <= 1 << 22).ok_or_else(|| OracleError::BadArgument("state space too large".into()))?;
    let decode = |mut s: usize| {
        let mut v = vec![Symbol(0); order];
        for slot in v.iter_mut().rev() {
            *slot = Symbol((s % d) as u8);
            s /= d;
        }
        v
    };
    let mut probs = Vec::with_capacity(states);
    for s in 0..states {
        let v = decode(s);
        let rule = match model.context_of(&v)? {
            Some(c) => model.rule_for(c)?,
            None => default.ok_or_else(|| ModelError::NoRule(model.alphabet().render_display(&v)))?,
        };
        probs.push(&rules[rule].probs);
    }
    let mut pi = vec![1.0 / states as f64; states];
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; states];
        for (s, &mass) in pi.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let shifted = (s * d) % states;
            for (a, &p) in probs[s].iter().enumerate() {
                next[shifted + a] += mass * p;
            }
        }
        let diff: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < 1e-15 {
            break;
        }
    }
    let mut law = BTreeMap::new();
    for (s, &mass) in pi.iter().enumerate() {
        let v = decode(s);
        *law.entry(v[order - len..].to_vec()).or_insert(0.0) += mass;
    }
    Ok(law)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TvReport {
    pub distance: f64,
    /// ½ Σ sqrt(q(1−q)/N) over the reference law q.
    pub stderr: f64,
    pub unresolved: f64,
    pub runs: u64,
}

impl TvReport {
    pub fn within(&self, k: f64) -> bool {
        self.distance <= k * self.stderr + self.unresolved
    }
}

/// Total variation between empirical counts and the enumerated law.
pub fn total_variation(counts: &BTreeMap<Vec<Symbol>, u64>, law: &WindowLaw) -> TvReport {
    let runs: u64 = counts.values().sum();
    let n = runs as f64;
    let mut keys: Vec<&Vec<Symbol>> = counts.keys().chain(law.law.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut distance = 0.0;
    let mut stderr = 0.0;
    for k in keys {
        let emp = counts.get(k).copied().unwrap_or(0) as f64 / n;
        let q = law.probability(k);
        distance += (emp - q).abs();
        stderr += (q * (1.0 - q) / n).sqrt();
    }
    TvReport { distance: distance / 2.0, stderr: stderr / 2.0, unresolved: law.unresolved_mass(), runs }
}
