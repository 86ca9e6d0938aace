//! Coupling from the past: constructibility, θ[m,n], and the two perfect
//! simulation algorithms.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ContextTreeModel, ModelError, Symbol};
use crate::partition::{PartitionError, UpdateFunction, UpdateOutcome};
use crate::random::{IndexedUniformSource, RandomError};

pub const DEFAULT_MAX_BACK: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum CftpError {
    #[error("no regeneration found within {max_back} steps before {m}")]
    Aborted { m: i64, max_back: u64 },
    #[error("window start {m} is after window end {n}")]
    EmptyWindow { m: i64, n: i64 },
    #[error(transparent)]
    Source(#[from] RandomError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Spontaneous,
    /// Built from a context of the given length.
    Context(usize),
}

impl Provenance {
    fn of(outcome: UpdateOutcome) -> Option<(Symbol, Provenance)> {
        match outcome {
            UpdateOutcome::Spontaneous(s) => Some((s, Provenance::Spontaneous)),
            UpdateOutcome::Context { symbol, context_len } => Some((symbol, Provenance::Context(context_len))),
            UpdateOutcome::Star => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub m: i64,
    pub n: i64,
    pub theta: i64,
    /// X_θ, …, X_n.
    pub sample: Vec<Symbol>,
    pub steps: u64,
    pub provenance: Vec<Provenance>,
}

impl SimulationResult {
    pub fn symbol_at(&self, i: i64) -> Option<Symbol> {
        if i < self.theta || i > self.n {
            return None;
        }
        Some(self.sample[(i - self.theta) as usize])
    }

    /// X_m, …, X_n.
    pub fn window(&self) -> &[Symbol] {
        &self.sample[(self.m - self.theta) as usize..]
    }
}

/// Result of one greedy construction attempt over [k, n].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConstructibilityWitness {
    Success { k: i64, n: i64, string: Vec<Symbol> },
    Fail { k: i64, n: i64, at: i64 },
}

impl ConstructibilityWitness {
    pub fn is_success(&self) -> bool {
        matches!(self, ConstructibilityWitness::Success { .. })
    }
}

/// Values indexed by time, growable toward the past without moving the
/// logical origin.
#[derive(Clone, Debug)]
pub(crate) struct BackBuffer<T> {
    data: Vec<T>,
    start: usize,
    lo: i64,
}

impl<T: Copy> BackBuffer<T> {
    pub(crate) fn new(lo: i64, values: Vec<T>) -> Self {
        BackBuffer { data: values, start: 0, lo }
    }

    pub(crate) fn push_front(&mut self, v: T) {
        if self.start == 0 {
            let extra = self.data.len().max(16);
            let mut grown = Vec::with_capacity(self.data.len() + extra);
            grown.extend(std::iter::repeat_n(v, extra));
            grown.extend_from_slice(&self.data);
            self.data = grown;
            self.start = extra;
        }
        self.start -= 1;
        self.data[self.start] = v;
        self.lo -= 1;
    }

    pub(crate) fn get(&self, i: i64) -> T {
        self.data[self.start + (i - self.lo) as usize]
    }

    pub(crate) fn set(&mut self, i: i64, v: T) {
        let at = self.start + (i - self.lo) as usize;
        self.data[at] = v;
    }

    /// Values at indices a..b (exclusive).
    pub(crate) fn slice(&self, a: i64, b: i64) -> &[T] {
        let base = self.start as i64 - self.lo;
        &self.data[(base + a) as usize..(base + b) as usize]
    }
}

/// Perfect sampler bound to one model. Holds the cached update function.
#[derive(Clone, Debug)]
pub struct PerfectSampler<'m> {
    update: UpdateFunction<'m>,
    max_back: u64,
}

impl<'m> PerfectSampler<'m> {
    pub fn new(model: &'m ContextTreeModel) -> Result<Self, CftpError> {
        Ok(PerfectSampler { update: UpdateFunction::new(model)?, max_back: DEFAULT_MAX_BACK })
    }

    pub fn with_max_back(mut self, max_back: u64) -> Self {
        self.max_back = max_back;
        self
    }

    pub fn max_back(&self) -> u64 {
        self.max_back
    }

    pub fn model(&self) -> &'m ContextTreeModel {
        self.update.model()
    }

    pub fn update(&self) -> &UpdateFunction<'m> {
        &self.update
    }

    fn check_window(m: i64, n: i64) -> Result<(), CftpError> {
        if m > n {
            return Err(CftpError::EmptyWindow { m, n });
        }
        Ok(())
    }

    fn fetch(source: &IndexedUniformSource, m: i64, n: i64) -> Result<BackBuffer<f64>, CftpError> {
        let us = (m..=n).map(|i| source.u_at(i)).collect::<Result<Vec<_>, _>>()?;
        Ok(BackBuffer::new(m, us))
    }

    /// Greedy pass from an empty past over `us`; returns the string or the
    /// offset of the first ⋆.
    fn greedy(&self, us: &[f64]) -> Result<Result<Vec<Symbol>, usize>, CftpError> {
        let mut built = Vec::with_capacity(us.len());
        for (j, &u) in us.iter().enumerate() {
            match self.update.apply(u, &built)?.symbol() {
                Some(s) => built.push(s),
                None => return Ok(Err(j)),
            }
        }
        Ok(Ok(built))
    }

    pub(crate) fn greedy_ok(&self, us: &[f64]) -> Result<bool, CftpError> {
        Ok(self.greedy(us)?.is_ok())
    }

    /// 𝓛(U_k^n): whether [k,n] can be built from U_k..U_n alone.
    pub fn constructible(&self, source: &IndexedUniformSource, k: i64, n: i64) -> Result<ConstructibilityWitness, CftpError> {
        Self::check_window(k, n)?;
        let us = Self::fetch(source, k, n)?;
        Ok(match self.greedy(us.slice(k, n + 1))? {
            Ok(string) => ConstructibilityWitness::Success { k, n, string },
            Err(j) => ConstructibilityWitness::Fail { k, n, at: k + j as i64 },
        })
    }

    fn search_theta(&self, source: &IndexedUniformSource, m: i64, n: i64) -> Result<(i64, BackBuffer<f64>), CftpError> {
        Self::check_window(m, n)?;
        let mut us = Self::fetch(source, m, n)?;
        let mut i = m;
        while self.greedy(us.slice(i, n + 1))?.is_err() {
            if (m - i) as u64 >= self.max_back {
                return Err(CftpError::Aborted { m, max_back: self.max_back });
            }
            i -= 1;
            us.push_front(source.u_at(i)?);
        }
        Ok((i, us))
    }

    /// θ[m,n] by the literal backward search.
    pub fn theta(&self, source: &IndexedUniformSource, m: i64, n: i64) -> Result<i64, CftpError> {
        Ok(self.search_theta(source, m, n)?.0)
    }

    /// Decrements k until 𝓛(U_k^n) = 1, then replays F forward from θ.
    pub fn algorithm1(&self, source: &IndexedUniformSource, m: i64, n: i64) -> Result<SimulationResult, CftpError> {
        let (theta, us) = self.search_theta(source, m, n)?;
        let mut sample = Vec::with_capacity((n - theta + 1) as usize);
        let mut provenance = Vec::with_capacity(sample.capacity());
        for i in theta..=n {
            let (s, p) = Provenance::of(self.update.apply(us.get(i), &sample)?)
                .expect("window was checked constructible");
            sample.push(s);
            provenance.push(p);
        }
        // Same count as the explicit algorithm makes: one per constructed site
        // and one per index added in the past.
        let steps = (n - theta + 1) as u64 + (m - theta) as u64;
        Ok(SimulationResult { m, n, theta, sample, steps, provenance })
    }

    /// The explicit backward-forward algorithm with pending set B.
    pub fn algorithm2(&self, source: &IndexedUniformSource, m: i64, n: i64) -> Result<SimulationResult, CftpError> {
        Self::check_window(m, n)?;
        let width = (n - m + 1) as usize;
        let mut us = Self::fetch(source, m, n)?;
        let mut x = BackBuffer::new(m, vec![Symbol(0); width]);
        let mut prov = BackBuffer::new(m, vec![Provenance::Spontaneous; width]);
        let mut b: BTreeSet<i64> = (m..=n).collect();
        let mut steps = 0u64;

        let mut i = m;
        while let Some(&t) = b.first() {
            if t != i {
                break;
            }
            match Provenance::of(self.update.apply(us.get(i), x.slice(m, i))?) {
                Some((s, p)) => {
                    x.set(i, s);
                    prov.set(i, p);
                    b.remove(&i);
                    steps += 1;
                    i += 1;
                }
                None => break,
            }
        }

        i = m;
        while !b.is_empty() {
            loop {
                if (m - i) as u64 >= self.max_back {
                    return Err(CftpError::Aborted { m, max_back: self.max_back });
                }
                i -= 1;
                b.insert(i);
                us.push_front(source.u_at(i)?);
                x.push_front(Symbol(0));
                prov.push_front(Provenance::Spontaneous);
                steps += 1;
                if self.update.is_spontaneous(us.get(i)) {
                    break;
                }
            }
            let s = self.update.spontaneous_symbol(us.get(i)).expect("spontaneous region");
            x.set(i, s);
            b.remove(&i);
            steps += 1;
            while let Some(&t) = b.first() {
                match Provenance::of(self.update.apply(us.get(t), x.slice(i, t))?) {
                    Some((s, p)) => {
                        x.set(t, s);
                        prov.set(t, p);
                        b.remove(&t);
                        steps += 1;
                    }
                    None => break,
                }
            }
        }

        Ok(SimulationResult {
            m,
            n,
            theta: i,
            sample: x.slice(i, n + 1).to_vec(),
            steps,
            provenance: prov.slice(i, n + 1).to_vec(),
        })
    }

    /// A sample of the stationary chain on [m,n].
    pub fn sample_stationary(&self, source: &IndexedUniformSource, m: i64, n: i64) -> Result<SimulationResult, CftpError> {
        self.algorithm2(source, m, n)
    }
}

pub fn constructible(
    source: &IndexedUniformSource,
    k: i64,
    n: i64,
    model: &ContextTreeModel,
) -> Result<ConstructibilityWitness, CftpError> {
    PerfectSampler::new(model)?.constructible(source, k, n)
}

pub fn theta(source: &IndexedUniformSource, m: i64, n: i64, model: &ContextTreeModel, max_back: u64) -> Result<i64, CftpError> {
    PerfectSampler::new(model)?.with_max_back(max_back).theta(source, m, n)
}

pub fn algorithm1(
    source: &IndexedUniformSource,
    m: i64,
    n: i64,
    model: &ContextTreeModel,
    max_back: u64,
) -> Result<SimulationResult, CftpError> {
    PerfectSampler::new(model)?.with_max_back(max_back).algorithm1(source, m, n)
}

pub fn algorithm2(
    source: &IndexedUniformSource,
    m: i64,
    n: i64,
    model: &ContextTreeModel,
    max_back: u64,
) -> Result<SimulationResult, CftpError> {
    PerfectSampler::new(model)?.with_max_back(max_back).algorithm2(source, m, n)
}

pub fn sample_stationary(
    source: &IndexedUniformSource,
    m: i64,
    n: i64,
    model: &ContextTreeModel,
    max_back: u64,
) -> Result<SimulationResult, CftpError> {
    algorithm2(source, m, n, model, max_back)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::model::{Alphabet, LengthFunction, Rule, RuleKey, TransitionRules};

    fn renewal(eps: f64, p: f64) -> ContextTreeModel {
        let a = Alphabet::new(vec!['2', '1'], 1);
        let rules = TransitionRules::new(eps, vec![Rule { key: RuleKey::Default, probs: vec![p, 1.0 - p] }]);
        ContextTreeModel::new(a.clone(), a.parse_time_order("2").unwrap(), LengthFunction::Zero, rules).unwrap()
    }

    fn trace(start: i64, values: &[f64]) -> IndexedUniformSource {
        let map: BTreeMap<i64, f64> = values.iter().enumerate().map(|(j, &u)| (start + j as i64, u)).collect();
        IndexedUniformSource::fixed_trace(map).unwrap()
    }

    #[test]
    fn back_buffer_grows() {
        let mut b = BackBuffer::new(0, vec![1, 2, 3]);
        for v in (-40..0).rev() {
            b.push_front(v);
        }
        assert_eq!(b.get(-40), -40);
        assert_eq!(b.slice(-2, 2), &[-2, -1, 1, 2]);
    }

    #[test]
    fn all_spontaneous_window() {
        let m = renewal(0.2, 0.4);
        let s = PerfectSampler::new(&m).unwrap();
        let src = trace(0, &[0.1, 0.05, 0.15]);
        assert!(s.constructible(&src, 0, 2).unwrap().is_success());
        assert_eq!(s.theta(&src, 0, 2).unwrap(), 0);
        let r = s.algorithm2(&src, 0, 2).unwrap();
        assert_eq!(r.steps, 3);
        assert_eq!(r.sample, vec![Symbol(0); 3]);
    }

    #[test]
    fn renewal_after_spontaneous_two() {
        let m = renewal(0.2, 0.4);
        let s = PerfectSampler::new(&m).unwrap();
        let src = trace(-3, &[0.1, 0.9, 0.3, 0.7, 0.5]);
        assert_eq!(s.constructible(&src, -2, 1).unwrap(), ConstructibilityWitness::Fail { k: -2, n: 1, at: -2 });
        assert!(s.constructible(&src, -3, 1).unwrap().is_success());
        let r1 = s.algorithm1(&src, 0, 1).unwrap();
        let r2 = s.algorithm2(&src, 0, 1).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r2.theta, -3);
        assert_eq!(r2.steps, 2 + 2 * 3);
        // J(2|v) = [0.2, 0.4) so 0.3 gives 2 and everything above gives 1
        let word: String = m.alphabet().render(&r2.sample);
        assert_eq!(word, "21211");
    }

    #[test]
    fn aborts_without_spontaneous_symbols() {
        let m = renewal(0.2, 0.4);
        let s = PerfectSampler::new(&m).unwrap().with_max_back(5);
        let src = trace(-10, &[0.9; 11]);
        assert!(matches!(s.algorithm2(&src, 0, 0), Err(CftpError::Aborted { .. })));
        assert!(matches!(s.algorithm1(&src, 0, 0), Err(CftpError::Aborted { .. })));
    }

    #[test]
    fn trace_too_short_is_an_error() {
        let m = renewal(0.2, 0.4);
        let s = PerfectSampler::new(&m).unwrap();
        let src = trace(0, &[0.9]);
        assert!(matches!(s.algorithm2(&src, 0, 0), Err(CftpError::Source(_))));
    }

    #[test]
    fn epsilon_one_is_immediate() {
        let a = Alphabet::new(vec!['2', '1'], 1);
        let rules = TransitionRules::new(1.0, vec![Rule { key: RuleKey::Default, probs: vec![1.0, 0.0] }]);
        let m = ContextTreeModel::new(a.clone(), a.parse_time_order("2").unwrap(), LengthFunction::Identity, rules).unwrap();
        let s = PerfectSampler::new(&m).unwrap();
        for seed in 0..20 {
            let r = s.algorithm2(&IndexedUniformSource::counter(seed), -3, 4).unwrap();
            assert_eq!(r.theta, -3);
            assert_eq!(r.steps, 8);
        }
    }
}
