use serde::Serialize;

use super::trace::RescaledTrace;

/// One trajectory of D^{(n)} on [n, end]; D_i = 0 for every i ≤ n.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DProcess {
    pub origin: i64,
    /// D_origin, …, D_end.
    pub values: Vec<u64>,
}

impl DProcess {
    /// Runs the recursion D_i = (i − i^{(n)} − L̄_i) ∨ 0 over L̄_{n+1}, L̄_{n+2}, …
    /// An unknown L̄ counts as larger than any bound.
    pub fn from_lbar<I>(origin: i64, lbar: I) -> Self
    where
        I: IntoIterator<Item = Option<u64>>,
    {
        let mut values = vec![0u64];
        let mut last_zero = origin;
        for (j, l) in lbar.into_iter().enumerate() {
            let i = origin + 1 + j as i64;
            let gap = (i - last_zero) as u64;
            let d = match l {
                Some(l) => gap.saturating_sub(l),
                None => 0,
            };
            if d == 0 {
                last_zero = i;
            }
            values.push(d);
        }
        DProcess { origin, values }
    }

    /// D^{(origin)} on [origin, end] from a rescaled trace covering (origin, end].
    pub fn from_trace(trace: &RescaledTrace, origin: i64, end: i64) -> Self {
        Self::from_lbar(origin, (origin + 1..=end).map(|b| trace.lbar_at(b)))
    }

    pub fn end(&self) -> i64 {
        self.origin + self.values.len() as i64 - 1
    }

    pub fn at(&self, i: i64) -> u64 {
        if i <= self.origin {
            0
        } else {
            self.values[(i - self.origin) as usize]
        }
    }

    /// First i > origin with D_i = 0.
    pub fn first_return(&self) -> Option<i64> {
        self.values.iter().skip(1).position(|&d| d == 0).map(|j| self.origin + 1 + j as i64)
    }
}

/// Sites where D^{(n1)}_i < D^{(n2)}_i although n1 ≤ n2.
pub fn monotonicity_violations(earlier: &DProcess, later: &DProcess) -> Vec<i64> {
    assert!(earlier.origin <= later.origin);
    let end = earlier.end().min(later.end());
    (earlier.origin..=end).filter(|&i| earlier.at(i) < later.at(i)).collect()
}

/// Sites k where coalescence fails: D^{(n)}_i = 0 for some i ≥ m but D^{(n)}_k ≠ D^{(m)}_k
/// for a later k.
pub fn coalescence_violations(earlier: &DProcess, later: &DProcess) -> Vec<i64> {
    assert!(earlier.origin <= later.origin);
    let end = earlier.end().min(later.end());
    let Some(first_zero) = (later.origin..=end).find(|&i| earlier.at(i) == 0) else {
        return Vec::new();
    };
    (first_zero..=end).filter(|&k| earlier.at(k) != later.at(k)).collect()
}
