//! Finite representation of a probabilistic context tree whose context
//! lengths are driven by the last occurrence of a reference string.
//!
//! Strings are stored in time order throughout: index 0 is the oldest symbol
//! and the last element is the most recent one. Rule keys written in display
//! order (most recent symbol first) are reversed on the way in.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used for every probability-vector check.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// A symbol, addressed by its position in the [`Alphabet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Symbol(pub u8);

impl Symbol {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown symbol '{0}'")]
    UnknownSymbol(char),
    #[error("explicit rule key {key} is a suffix of the past but is not the structural context")]
    Inconsistent { key: String },
    #[error("no transition rule matches context {0} and no default rule is declared")]
    NoRule(String),
    #[error("model failed validation: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// Ordered finite alphabet. The first `regular` symbols form the ε-regular set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alphabet {
    symbols: Vec<char>,
    regular: usize,
}

impl Alphabet {
    pub fn new(symbols: Vec<char>, regular: usize) -> Self {
        Alphabet { symbols, regular }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.symbols
    }

    /// Cardinality of the ε-regular set.
    pub fn regular_count(&self) -> usize {
        self.regular
    }

    pub fn is_regular(&self, s: Symbol) -> bool {
        s.index() < self.regular
    }

    pub fn symbol(&self, c: char) -> Result<Symbol, ModelError> {
        self.symbols
            .iter()
            .position(|&x| x == c)
            .map(|i| Symbol(i as u8))
            .ok_or(ModelError::UnknownSymbol(c))
    }

    pub fn char_of(&self, s: Symbol) -> char {
        self.symbols[s.index()]
    }

    /// Parses a string written in time order.
    pub fn parse_time_order(&self, text: &str) -> Result<Vec<Symbol>, ModelError> {
        text.chars().map(|c| self.symbol(c)).collect()
    }

    /// Parses a key written in display order (most recent symbol first) into time order.
    pub fn parse_display_key(&self, text: &str) -> Result<Vec<Symbol>, ModelError> {
        let mut v = self.parse_time_order(text)?;
        v.reverse();
        Ok(v)
    }

    pub fn render(&self, s: &[Symbol]) -> String {
        s.iter().map(|&x| self.char_of(x)).collect()
    }

    pub fn render_display(&self, s: &[Symbol]) -> String {
        s.iter().rev().map(|&x| self.char_of(x)).collect()
    }
}

/// Tail behaviour of a tabulated length function beyond its last entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableTail {
    /// Nothing declared: lookups repeat the last value, but growth is unknown.
    Unspecified,
    Hold,
    /// Continue with the slope of the last two entries (floored at zero).
    Linear,
    /// ℓ(k) = k beyond the table.
    Identity,
}

/// The function ℓ^w giving how far beyond the last occurrence of `w` a context reaches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LengthFunction {
    Zero,
    Identity,
    /// ℓ(k) = slope·k + intercept.
    Affine { slope: u64, intercept: u64 },
    /// ℓ(k) = ⌈coef·k^exponent⌉.
    Power { coef: f64, exponent: f64 },
    /// ℓ(k) = ⌈exp(rate·k)⌉.
    Exponential { rate: f64 },
    Table { values: Vec<u64>, tail: TableTail },
}

fn ceil_to_u64(x: f64) -> u64 {
    if !x.is_finite() || x >= u64::MAX as f64 {
        u64::MAX
    } else if x <= 0.0 {
        0
    } else {
        x.ceil() as u64
    }
}

impl LengthFunction {
    /// Raw value ℓ^w(k), saturating at `u64::MAX`.
    pub fn eval(&self, k: u64) -> u64 {
        match self {
            LengthFunction::Zero => 0,
            LengthFunction::Identity => k,
            LengthFunction::Affine { slope, intercept } => {
                slope.saturating_mul(k).saturating_add(*intercept)
            }
            LengthFunction::Power { coef, exponent } => {
                if k == 0 && *exponent > 0.0 {
                    0
                } else {
                    ceil_to_u64(coef * (k as f64).powf(*exponent))
                }
            }
            LengthFunction::Exponential { rate } => ceil_to_u64((rate * k as f64).exp()),
            LengthFunction::Table { values, tail } => {
                let len = values.len() as u64;
                if k < len {
                    return values[k as usize];
                }
                let last = values.last().copied().unwrap_or(0);
                match tail {
                    TableTail::Unspecified | TableTail::Hold => last,
                    TableTail::Identity => k,
                    TableTail::Linear => {
                        let prev = if values.len() >= 2 { values[values.len() - 2] } else { last };
                        let steps = k - (len - 1);
                        let step = last as i128 - prev as i128;
                        let v = last as i128 + step * steps as i128;
                        v.clamp(0, u64::MAX as i128) as u64
                    }
                }
            }
        }
    }

    /// Monotone envelope k ↦ max_{j≤k} ℓ^w(j).
    pub fn envelope(&self, k: u64) -> u64 {
        match self {
            LengthFunction::Table { values, .. } => {
                let len = values.len() as u64;
                if k < len {
                    values[..=k as usize].iter().copied().max().unwrap_or(0)
                } else {
                    let table_max = values.iter().copied().max().unwrap_or(0);
                    table_max.max(self.eval(k))
                }
            }
            // Closed forms with non-negative parameters are already non-decreasing.
            _ => self.eval(k),
        }
    }

    /// Least upper bound of the envelope, or `None` when it grows without bound.
    pub fn supremum(&self) -> Option<u64> {
        match self {
            LengthFunction::Zero => Some(0),
            LengthFunction::Identity => None,
            LengthFunction::Affine { slope, intercept } => (*slope == 0).then_some(*intercept),
            LengthFunction::Power { coef, exponent } => {
                if *coef <= 0.0 {
                    Some(0)
                } else if *exponent == 0.0 {
                    Some(ceil_to_u64(*coef))
                } else {
                    None
                }
            }
            LengthFunction::Exponential { rate } => (*rate == 0.0).then_some(1),
            LengthFunction::Table { values, tail } => {
                let max = values.iter().copied().max().unwrap_or(0);
                match tail {
                    TableTail::Unspecified | TableTail::Hold => Some(max),
                    TableTail::Identity => None,
                    TableTail::Linear => {
                        let n = values.len();
                        if n >= 2 && values[n - 1] > values[n - 2] {
                            None
                        } else {
                            Some(max)
                        }
                    }
                }
            }
        }
    }

    fn check(&self) -> Option<String> {
        match self {
            LengthFunction::Power { coef, exponent } => {
                if !(coef.is_finite() && exponent.is_finite() && *coef >= 0.0 && *exponent >= 0.0) {
                    return Some(format!("power parameters must be finite and non-negative, got c={coef} alpha={exponent}"));
                }
            }
            LengthFunction::Exponential { rate } => {
                if !(rate.is_finite() && *rate >= 0.0) {
                    return Some(format!("exponential rate must be finite and non-negative, got {rate}"));
                }
            }
            LengthFunction::Table { values, .. } if values.is_empty() => {
                return Some("length table is empty".into());
            }
            _ => {}
        }
        None
    }
}

/// Distance classes for rules keyed on m^w of the context rather than on the full string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceClass {
    Exact(u64),
    AtLeast(u64),
    Even,
    Odd,
}

impl DistanceClass {
    pub fn matches(self, k: u64) -> bool {
        match self {
            DistanceClass::Exact(d) => k == d,
            DistanceClass::AtLeast(d) => k >= d,
            DistanceClass::Even => k.is_multiple_of(2),
            DistanceClass::Odd => k % 2 == 1,
        }
    }
}

impl fmt::Display for DistanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceClass::Exact(d) => write!(f, "@{d}"),
            DistanceClass::AtLeast(d) => write!(f, "@{d}+"),
            DistanceClass::Even => write!(f, "@even"),
            DistanceClass::Odd => write!(f, "@odd"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RuleKey {
    /// Explicit context, time order.
    Context(Vec<Symbol>),
    Distance(DistanceClass),
    Default,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub key: RuleKey,
    pub probs: Vec<f64>,
}

/// Transition probabilities. Rules are stored in a flat list so that other
/// modules can cache per-rule data by index.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionRules {
    epsilon: f64,
    rules: Vec<Rule>,
    by_context: HashMap<Vec<Symbol>, usize>,
    distance_rules: Vec<usize>,
    default_rule: Option<usize>,
}

impl TransitionRules {
    pub fn new(epsilon: f64, rules: Vec<Rule>) -> Self {
        let mut by_context = HashMap::new();
        let mut distance_rules = Vec::new();
        let mut default_rule = None;
        for (i, r) in rules.iter().enumerate() {
            match &r.key {
                RuleKey::Context(k) => {
                    by_context.entry(k.clone()).or_insert(i);
                }
                RuleKey::Distance(_) => distance_rules.push(i),
                RuleKey::Default => default_rule = default_rule.or(Some(i)),
            }
        }
        // Exact distance classes take precedence over the broader ones.
        distance_rules.sort_by_key(|&i| match rules[i].key {
            RuleKey::Distance(DistanceClass::Exact(_)) => 0,
            _ => 1,
        });
        TransitionRules { epsilon, rules, by_context, distance_rules, default_rule }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Index of the rule governing `context` whose m^w equals `distance`.
    pub fn lookup(&self, context: &[Symbol], distance: u64) -> Option<usize> {
        if let Some(&i) = self.by_context.get(context) {
            return Some(i);
        }
        self.distance_rules
            .iter()
            .copied()
            .find(|&i| matches!(self.rules[i].key, RuleKey::Distance(c) if c.matches(distance)))
            .or(self.default_rule)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    EmptyAlphabet,
    DuplicateSymbol,
    TooManySymbols,
    RegularSet,
    EpsilonRange,
    EpsilonMass,
    EmptyReference,
    IrregularReference,
    LengthFunction,
    Arity,
    ProbabilitySum,
    NegativeProbability,
    EpsilonRegularity,
    SuffixViolation,
    StructuralLaw,
    DuplicateKey,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub key: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.kind, self.key, self.detail)
    }
}

/// A resolved context: a suffix of some past together with its m^w.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Context<'a> {
    pub symbols: &'a [Symbol],
    pub distance: u64,
}

impl Context<'_> {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Verdict of the growth-rate condition guaranteeing almost-sure termination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub verdict: Verdict,
    pub c_epsilon: f64,
    /// Analytic limsup of log ℓ(k) / (C_ε k), when known.
    pub limsup: Option<f64>,
    /// (k, log ℓ(k) / (C_ε k)) up to the horizon, for k with ℓ(k) > 0.
    pub trend: Vec<(u64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContextTreeModel {
    alphabet: Alphabet,
    reference: Vec<Symbol>,
    ell: LengthFunction,
    rules: TransitionRules,
    consistent: bool,
}

/// First occurrence of `w` counted from the right end of `v`: the least j such
/// that the |w| symbols standing just before the last j symbols of `v` equal `w`.
pub fn m_w(v: &[Symbol], w: &[Symbol]) -> Option<u64> {
    if w.is_empty() || v.len() < w.len() {
        return None;
    }
    let max_j = v.len() - w.len();
    (0..=max_j)
        .find(|&j| {
            let end = v.len() - j;
            &v[end - w.len()..end] == w
        })
        .map(|j| j as u64)
}

impl ContextTreeModel {
    /// Builds a model without checking it; see [`ContextTreeModel::validate`].
    pub fn from_parts(
        alphabet: Alphabet,
        reference: Vec<Symbol>,
        ell: LengthFunction,
        rules: TransitionRules,
    ) -> Self {
        let mut m = ContextTreeModel { alphabet, reference, ell, rules, consistent: false };
        m.consistent = m.structural_violations().is_empty();
        m
    }

    /// Builds a model and rejects it if any invariant fails.
    pub fn new(
        alphabet: Alphabet,
        reference: Vec<Symbol>,
        ell: LengthFunction,
        rules: TransitionRules,
    ) -> Result<Self, ModelError> {
        let m = Self::from_parts(alphabet, reference, ell, rules);
        let v = m.validate();
        if v.is_empty() {
            Ok(m)
        } else {
            Err(ModelError::Invalid(v))
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn reference(&self) -> &[Symbol] {
        &self.reference
    }

    pub fn ell(&self) -> &LengthFunction {
        &self.ell
    }

    pub fn rules(&self) -> &TransitionRules {
        &self.rules
    }

    pub fn epsilon(&self) -> f64 {
        self.rules.epsilon
    }

    /// Upper end #𝓔·ε of the spontaneous region of [0,1).
    pub fn spontaneous_mass(&self) -> f64 {
        self.alphabet.regular_count() as f64 * self.rules.epsilon
    }

    /// Length a context must have when the last occurrence of `w` is at distance `k`.
    pub fn context_length(&self, k: u64) -> u64 {
        k.saturating_add(self.reference.len() as u64).saturating_add(self.ell.eval(k))
    }

    /// Same as [`Self::context_length`] but using the monotone envelope of ℓ^w.
    pub fn context_length_bound(&self, k: u64) -> u64 {
        k.saturating_add(self.reference.len() as u64).saturating_add(self.ell.envelope(k))
    }

    pub fn m_w(&self, v: &[Symbol]) -> Option<u64> {
        m_w(v, &self.reference)
    }

    /// The context of a finite past, or `None` when the past is too short to
    /// determine one.
    pub fn context_of<'a>(&self, past: &'a [Symbol]) -> Result<Option<Context<'a>>, ModelError> {
        let resolved = self.m_w(past).and_then(|k| {
            let need = self.context_length(k);
            (past.len() as u64 >= need).then(|| Context {
                symbols: &past[past.len() - need as usize..],
                distance: k,
            })
        });
        if !self.consistent {
            self.check_explicit_keys(past, resolved)?;
        }
        Ok(resolved)
    }

    fn check_explicit_keys(&self, past: &[Symbol], resolved: Option<Context<'_>>) -> Result<(), ModelError> {
        for r in &self.rules.rules {
            if let RuleKey::Context(key) = &r.key {
                if past.ends_with(key) && resolved.is_none_or(|c| c.symbols != key.as_slice()) {
                    return Err(ModelError::Inconsistent { key: self.alphabet.render_display(key) });
                }
            }
        }
        Ok(())
    }

    /// Rule index for a resolved context.
    pub fn rule_for(&self, context: Context<'_>) -> Result<usize, ModelError> {
        self.rules
            .lookup(context.symbols, context.distance)
            .ok_or_else(|| ModelError::NoRule(self.alphabet.render_display(context.symbols)))
    }

    /// Transition vector p(·|v) for a non-empty context.
    pub fn transition_vector(&self, context: Context<'_>) -> Result<&[f64], ModelError> {
        let i = self.rule_for(context)?;
        Ok(&self.rules.rules[i].probs)
    }

    /// C_ε = −log(1 − ε^{|w|}) / |w|.
    pub fn c_epsilon(&self) -> f64 {
        c_epsilon(self.rules.epsilon, self.reference.len())
    }

    /// Decides the growth condition limsup log ℓ(k) / (C_ε k) < 1.
    pub fn check_growth_condition(&self, horizon: u64) -> GrowthReport {
        let c = self.c_epsilon();
        let trend: Vec<(u64, f64)> = (1..=horizon.max(1))
            .filter_map(|k| {
                let l = self.ell.eval(k);
                (l > 0).then(|| (k, (l as f64).ln() / (c * k as f64)))
            })
            .collect();
        let (verdict, limsup) = match &self.ell {
            LengthFunction::Zero
            | LengthFunction::Identity
            | LengthFunction::Affine { .. }
            | LengthFunction::Power { .. } => (Verdict::Pass, Some(0.0)),
            LengthFunction::Exponential { rate } => {
                let ratio = if c.is_infinite() { 0.0 } else { rate / c };
                (if ratio < 1.0 { Verdict::Pass } else { Verdict::Fail }, Some(ratio))
            }
            LengthFunction::Table { tail, .. } => match tail {
                TableTail::Unspecified => (Verdict::Inconclusive, None),
                _ => (Verdict::Pass, Some(0.0)),
            },
        };
        GrowthReport { verdict, c_epsilon: c, limsup, trend }
    }

    fn structural_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let keys: Vec<&Vec<Symbol>> = self
            .rules
            .rules
            .iter()
            .filter_map(|r| match &r.key {
                RuleKey::Context(k) => Some(k),
                _ => None,
            })
            .collect();
        for (i, a) in keys.iter().enumerate() {
            let shown = self.alphabet.render_display(a);
            for (j, b) in keys.iter().enumerate() {
                if i == j {
                    continue;
                }
                if a == b {
                    if i < j {
                        out.push(Violation {
                            kind: ViolationKind::DuplicateKey,
                            key: shown.clone(),
                            detail: "context key declared twice".into(),
                        });
                    }
                } else if b.ends_with(a) {
                    out.push(Violation {
                        kind: ViolationKind::SuffixViolation,
                        key: shown.clone(),
                        detail: format!("is a suffix of {}", self.alphabet.render_display(b)),
                    });
                }
            }
            match self.m_w(a) {
                None => out.push(Violation {
                    kind: ViolationKind::StructuralLaw,
                    key: shown,
                    detail: "reference string does not occur in the context".into(),
                }),
                Some(k) => {
                    let need = self.context_length(k);
                    if a.len() as u64 != need {
                        out.push(Violation {
                            kind: ViolationKind::StructuralLaw,
                            key: shown,
                            detail: format!("length {} but m^w={k} requires {need}", a.len()),
                        });
                    }
                }
            }
        }
        out
    }

    /// Every invariant violation; empty iff the model is usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |kind, key: &str, detail: String| out.push(Violation { kind, key: key.to_string(), detail });
        let a = &self.alphabet;
        if a.is_empty() {
            push(ViolationKind::EmptyAlphabet, "alphabet", "alphabet has no symbols".into());
        }
        if a.len() > u8::MAX as usize + 1 {
            push(ViolationKind::TooManySymbols, "alphabet", format!("{} symbols", a.len()));
        }
        for (i, c) in a.symbols.iter().enumerate() {
            if a.symbols[..i].contains(c) {
                push(ViolationKind::DuplicateSymbol, "alphabet", format!("symbol '{c}' repeated"));
            }
        }
        if a.regular == 0 || a.regular > a.len() {
            push(ViolationKind::RegularSet, "regular", format!("{} regular symbols of {}", a.regular, a.len()));
        }
        let eps = self.rules.epsilon;
        if !(eps > 0.0 && eps <= 1.0) {
            push(ViolationKind::EpsilonRange, "epsilon", format!("epsilon {eps} not in (0,1]"));
        } else if self.spontaneous_mass() > 1.0 + PROBABILITY_TOLERANCE {
            push(ViolationKind::EpsilonMass, "epsilon", format!("#E*epsilon = {} exceeds 1", self.spontaneous_mass()));
        }
        if self.reference.is_empty() {
            push(ViolationKind::EmptyReference, "w", "reference string is empty".into());
        }
        for &s in &self.reference {
            if !a.is_regular(s) {
                push(ViolationKind::IrregularReference, "w", format!("symbol '{}' is not epsilon-regular", a.char_of(s)));
            }
        }
        if let Some(msg) = self.ell.check() {
            push(ViolationKind::LengthFunction, "ell", msg);
        }
        for r in &self.rules.rules {
            let key = match &r.key {
                RuleKey::Context(k) => format!("\"{}\"", a.render_display(k)),
                RuleKey::Distance(c) => c.to_string(),
                RuleKey::Default => "default".into(),
            };
            if r.probs.len() != a.len() {
                push(ViolationKind::Arity, &key, format!("{} probabilities for {} symbols", r.probs.len(), a.len()));
                continue;
            }
            if r.probs.iter().any(|p| p.is_nan() || *p < 0.0) {
                push(ViolationKind::NegativeProbability, &key, format!("{:?}", r.probs));
            }
            let sum: f64 = r.probs.iter().sum();
            if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                push(ViolationKind::ProbabilitySum, &key, format!("probabilities sum to {sum}"));
            }
            for (i, &p) in r.probs.iter().enumerate().take(a.regular) {
                if p < eps - PROBABILITY_TOLERANCE {
                    push(
                        ViolationKind::EpsilonRegularity,
                        &key,
                        format!("p({}|.) = {p} < epsilon = {eps}", a.symbols[i]),
                    );
                }
            }
        }
        out.extend(self.structural_violations());
        out
    }

    /// Copy of this model with every rule replaced by a single default rule
    /// giving the reference symbol probability `eps` and sharing the rest
    /// evenly among the other symbols. Used by the ε-sweep experiment.
    pub fn with_reference_probability(&self, eps: f64) -> Result<Self, ModelError> {
        let n = self.alphabet.len();
        let target = self.reference.first().copied().unwrap_or(Symbol(0));
        let others = (n - 1).max(1) as f64;
        let probs: Vec<f64> = (0..n)
            .map(|i| if i == target.index() { eps } else { (1.0 - eps) / others })
            .collect();
        let rules = TransitionRules::new(eps, vec![Rule { key: RuleKey::Default, probs }]);
        let alphabet = Alphabet::new(self.alphabet.symbols.clone(), 1);
        ContextTreeModel::new(alphabet, self.reference.clone(), self.ell.clone(), rules)
    }
}

/// C_ε = −log(1 − ε^{|w|}) / |w|; infinite when ε = 1.
pub fn c_epsilon(epsilon: f64, w_len: usize) -> f64 {
    let base = 1.0 - epsilon.powi(w_len as i32);
    if base <= 0.0 {
        f64::INFINITY
    } else {
        -base.ln() / w_len as f64
    }
}
