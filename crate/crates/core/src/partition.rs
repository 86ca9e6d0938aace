//! Partition of [0,1) into spontaneous and context-driven intervals, and the
//! update function built on it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Context, ContextTreeModel, ModelError, Symbol, PROBABILITY_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("p({symbol}|{context}) = {prob} is below epsilon = {epsilon}")]
    NegativeWidth { symbol: char, context: String, prob: f64, epsilon: f64 },
    #[error("context intervals of {context} do not tile [0,1): last endpoint {end}")]
    NotTiling { context: String, end: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Half-open interval [lo, hi).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, u: f64) -> bool {
        self.lo <= u && u < self.hi
    }
}

/// One row of the partition: J(a|∅) for regular a, and J(a|v) for every a
/// when a context is known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalPartition {
    pub spontaneous: Vec<Interval>,
    pub context: Option<Vec<Interval>>,
}

impl IntervalPartition {
    /// λ(K(a|v)), the total length assigned to symbol `a`.
    pub fn k_length(&self, a: Symbol) -> f64 {
        let s = self.spontaneous.get(a.index()).map_or(0.0, Interval::len);
        let c = self.context.as_ref().map_or(0.0, |row| row[a.index()].len());
        s + c
    }

    /// All non-empty intervals sorted by left endpoint.
    pub fn intervals(&self) -> Vec<(Symbol, Interval)> {
        let mut out: Vec<(Symbol, Interval)> = self
            .spontaneous
            .iter()
            .enumerate()
            .map(|(i, &iv)| (Symbol(i as u8), iv))
            .collect();
        if let Some(row) = &self.context {
            out.extend(row.iter().enumerate().map(|(i, &iv)| (Symbol(i as u8), iv)));
        }
        out.retain(|(_, iv)| !iv.is_empty());
        out.sort_by(|a, b| a.1.lo.total_cmp(&b.1.lo));
        out
    }

    /// True when the non-empty intervals are contiguous from 0 to 1 within `tol`.
    pub fn tiles_unit_interval(&self, tol: f64) -> bool {
        let ivs = self.intervals();
        let mut at = 0.0;
        for (_, iv) in &ivs {
            if (iv.lo - at).abs() > tol {
                return false;
            }
            at = iv.hi;
        }
        (at - 1.0).abs() <= tol
    }
}

/// Outcome of one application of the update function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateOutcome {
    Spontaneous(Symbol),
    Context { symbol: Symbol, context_len: usize },
    Star,
}

impl UpdateOutcome {
    pub fn symbol(self) -> Option<Symbol> {
        match self {
            UpdateOutcome::Spontaneous(s) | UpdateOutcome::Context { symbol: s, .. } => Some(s),
            UpdateOutcome::Star => None,
        }
    }

    pub fn is_star(self) -> bool {
        matches!(self, UpdateOutcome::Star)
    }
}

fn spontaneous_row(model: &ContextTreeModel) -> Vec<Interval> {
    let eps = model.epsilon();
    (0..model.alphabet().regular_count())
        .map(|a| Interval { lo: a as f64 * eps, hi: (a + 1) as f64 * eps })
        .collect()
}

/// Upper endpoints of J(a|v), a in alphabet order, starting from #𝓔ε.
fn context_endpoints(model: &ContextTreeModel, probs: &[f64], label: &dyn Fn() -> String) -> Result<Vec<f64>, PartitionError> {
    let eps = model.epsilon();
    let alphabet = model.alphabet();
    let mut at = model.spontaneous_mass();
    let mut ends = Vec::with_capacity(probs.len());
    for (i, &p) in probs.iter().enumerate() {
        let s = Symbol(i as u8);
        let width = if alphabet.is_regular(s) { p - eps } else { p };
        if width < -PROBABILITY_TOLERANCE {
            return Err(PartitionError::NegativeWidth {
                symbol: alphabet.char_of(s),
                context: label(),
                prob: p,
                epsilon: eps,
            });
        }
        at += width.max(0.0);
        ends.push(at);
    }
    let end = ends.last().copied().unwrap_or(at);
    if (end - 1.0).abs() > 1e-9 {
        return Err(PartitionError::NotTiling { context: label(), end });
    }
    // Pin the last non-empty interval to 1 so that every u < 1 is covered.
    for e in ends.iter_mut().rev() {
        if *e >= 1.0 - 1e-9 {
            *e = 1.0;
        } else {
            break;
        }
    }
    Ok(ends)
}

/// Builds the partition row for `context`, or the spontaneous row only when it is `None`.
pub fn build_partition(model: &ContextTreeModel, context: Option<Context<'_>>) -> Result<IntervalPartition, PartitionError> {
    let spontaneous = spontaneous_row(model);
    let context = match context {
        None => None,
        Some(c) => {
            let probs = model.transition_vector(c)?;
            let ends = context_endpoints(model, probs, &|| model.alphabet().render_display(c.symbols))?;
            let mut lo = model.spontaneous_mass();
            Some(
                ends.iter()
                    .map(|&hi| {
                        let iv = Interval { lo, hi };
                        lo = hi;
                        iv
                    })
                    .collect(),
            )
        }
    };
    Ok(IntervalPartition { spontaneous, context })
}

/// The update function F with per-rule interval endpoints computed once.
#[derive(Clone, Debug)]
pub struct UpdateFunction<'m> {
    model: &'m ContextTreeModel,
    spontaneous_ends: Vec<f64>,
    rule_ends: Vec<Vec<f64>>,
}

impl<'m> UpdateFunction<'m> {
    pub fn new(model: &'m ContextTreeModel) -> Result<Self, PartitionError> {
        let eps = model.epsilon();
        let spontaneous_ends = (1..=model.alphabet().regular_count()).map(|a| a as f64 * eps).collect();
        let rule_ends = model
            .rules()
            .rules()
            .iter()
            .enumerate()
            .map(|(i, r)| context_endpoints(model, &r.probs, &|| format!("rule #{i}")))
            .collect::<Result<_, _>>()?;
        Ok(UpdateFunction { model, spontaneous_ends, rule_ends })
    }

    pub fn model(&self) -> &'m ContextTreeModel {
        self.model
    }

    /// Upper end of the spontaneous region.
    pub fn spontaneous_mass(&self) -> f64 {
        self.spontaneous_ends.last().copied().unwrap_or(0.0)
    }

    pub fn is_spontaneous(&self, u: f64) -> bool {
        u < self.spontaneous_mass()
    }

    /// The regular symbol a with u ∈ J(a|∅), if any.
    pub fn spontaneous_symbol(&self, u: f64) -> Option<Symbol> {
        self.spontaneous_ends.iter().position(|&hi| u < hi).map(|i| Symbol(i as u8))
    }

    /// The symbol a with u ∈ J(a|v) for the context governed by rule `rule`.
    /// Only meaningful for u outside the spontaneous region.
    pub fn context_symbol(&self, rule: usize, u: f64) -> Symbol {
        let ends = &self.rule_ends[rule];
        let i = ends.iter().position(|&hi| u < hi).unwrap_or(ends.len() - 1);
        Symbol(i as u8)
    }

    /// Upper endpoints of J(·|v) for rule `rule`.
    pub fn rule_endpoints(&self, rule: usize) -> &[f64] {
        &self.rule_ends[rule]
    }

    /// F(u, past).
    pub fn apply(&self, u: f64, past: &[Symbol]) -> Result<UpdateOutcome, ModelError> {
        if let Some(s) = self.spontaneous_symbol(u) {
            return Ok(UpdateOutcome::Spontaneous(s));
        }
        match self.model.context_of(past)? {
            None => Ok(UpdateOutcome::Star),
            Some(c) => {
                let rule = self.model.rule_for(c)?;
                Ok(UpdateOutcome::Context { symbol: self.context_symbol(rule, u), context_len: c.len() })
            }
        }
    }
}

/// F(u, past) without a cached update function.
pub fn update_f(model: &ContextTreeModel, u: f64, past: &[Symbol]) -> Result<UpdateOutcome, PartitionError> {
    Ok(UpdateFunction::new(model)?.apply(u, past)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Alphabet, LengthFunction, Rule, RuleKey, TransitionRules};

    fn binary_tree() -> ContextTreeModel {
        let a = Alphabet::new(vec!['1', '2'], 2);
        let key = |s: &str| a.parse_display_key(s).unwrap();
        let rules = TransitionRules::new(
            0.2,
            vec![
                Rule { key: RuleKey::Context(key("2")), probs: vec![0.3, 0.7] },
                Rule { key: RuleKey::Context(key("121")), probs: vec![0.7, 0.3] },
                Rule { key: RuleKey::Default, probs: vec![0.5, 0.5] },
            ],
        );
        let w = a.parse_time_order("2").unwrap();
        ContextTreeModel::new(a, w, LengthFunction::Identity, rules).unwrap()
    }

    #[test]
    fn spontaneous_intervals() {
        let m = binary_tree();
        let p = build_partition(&m, None).unwrap();
        assert_eq!(p.spontaneous, vec![Interval { lo: 0.0, hi: 0.2 }, Interval { lo: 0.2, hi: 0.4 }]);
        assert!(p.context.is_none());
    }

    #[test]
    fn context_intervals_for_two() {
        let m = binary_tree();
        let past = m.alphabet().parse_time_order("2").unwrap();
        let c = m.context_of(&past).unwrap();
        let p = build_partition(&m, c).unwrap();
        let row = p.context.clone().unwrap();
        assert!((row[0].lo - 0.4).abs() < 1e-15 && (row[0].hi - 0.5).abs() < 1e-15);
        assert!((row[1].lo - 0.5).abs() < 1e-15 && row[1].hi == 1.0);
        assert!((p.k_length(Symbol(1)) - 0.7).abs() < 1e-12);
        assert!(p.tiles_unit_interval(1e-12));
    }

    #[test]
    fn update_examples() {
        let m = binary_tree();
        let f = UpdateFunction::new(&m).unwrap();
        let past = m.alphabet().parse_time_order("12").unwrap();
        assert_eq!(f.apply(0.1, &past).unwrap(), UpdateOutcome::Spontaneous(Symbol(0)));
        assert_eq!(f.apply(0.1, &[]).unwrap(), UpdateOutcome::Spontaneous(Symbol(0)));
        assert_eq!(f.apply(0.55, &past).unwrap(), UpdateOutcome::Context { symbol: Symbol(1), context_len: 1 });
        assert_eq!(f.apply(0.55, &[]).unwrap(), UpdateOutcome::Star);
        // boundaries belong to the right-hand interval
        assert_eq!(f.apply(0.2, &[]).unwrap(), UpdateOutcome::Spontaneous(Symbol(1)));
        assert_eq!(f.apply(0.5, &past).unwrap().symbol(), Some(Symbol(1)));
    }

    #[test]
    fn symmetric_half_model_has_empty_context_blocks() {
        let a = Alphabet::new(vec!['1', '2'], 2);
        let rules = TransitionRules::new(0.5, vec![Rule { key: RuleKey::Default, probs: vec![0.5, 0.5] }]);
        let m = ContextTreeModel::new(a.clone(), a.parse_time_order("2").unwrap(), LengthFunction::Zero, rules).unwrap();
        let past = a.parse_time_order("2").unwrap();
        let p = build_partition(&m, m.context_of(&past).unwrap()).unwrap();
        assert_eq!(p.spontaneous[1], Interval { lo: 0.5, hi: 1.0 });
        assert!(p.context.unwrap().iter().all(|iv| iv.is_empty()));
    }

    #[test]
    fn negative_width_is_reported() {
        let a = Alphabet::new(vec!['1', '2'], 2);
        let rules = TransitionRules::new(0.2, vec![Rule { key: RuleKey::Default, probs: vec![0.9, 0.1] }]);
        let m = ContextTreeModel::from_parts(a.clone(), a.parse_time_order("2").unwrap(), LengthFunction::Zero, rules);
        assert!(matches!(UpdateFunction::new(&m), Err(PartitionError::NegativeWidth { .. })));
        let past = a.parse_time_order("2").unwrap();
        assert!(matches!(
            build_partition(&m, m.context_of(&past).unwrap()),
            Err(PartitionError::NegativeWidth { .. })
        ));
    }
}
