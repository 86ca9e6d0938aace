use serde::Serialize;

use crate::model::{ContextTreeModel, Symbol};
use crate::partition::UpdateFunction;
use crate::random::IndexedUniformSource;

use super::AnalysisError;

/// Z, m and L over a finite window of sites.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpontaneousTrace {
    pub start: i64,
    /// Z_i: the spontaneous symbol, or `None` for ⋆.
    pub z: Vec<Option<Symbol>>,
    /// m_i: distance to the last spontaneous w, `None` while no such w is in the window.
    pub m: Vec<Option<u64>>,
    /// L_i, `None` when m_i is unknown.
    pub l: Vec<Option<u64>>,
}

impl SpontaneousTrace {
    pub fn new(source: &IndexedUniformSource, model: &ContextTreeModel, start: i64, end: i64) -> Result<Self, AnalysisError> {
        let update = UpdateFunction::new(model)?;
        let z = (start..=end)
            .map(|i| Ok(update.spontaneous_symbol(source.u_at(i)?)))
            .collect::<Result<Vec<_>, AnalysisError>>()?;
        Ok(Self::from_z(model, start, z))
    }

    pub fn from_z(model: &ContextTreeModel, start: i64, z: Vec<Option<Symbol>>) -> Self {
        let w = model.reference();
        let mut m = Vec::with_capacity(z.len());
        let mut l = Vec::with_capacity(z.len());
        // offset (in the window) of the last site ending a spontaneous w
        let mut last_end: Option<usize> = None;
        for j in 0..z.len() {
            let mj = last_end.map(|e| (j - 1 - e) as u64);
            m.push(mj);
            l.push(if z[j].is_some() { Some(0) } else { mj.map(|k| model.context_length_bound(k)) });
            if j + 1 >= w.len() && z[j + 1 - w.len()..=j].iter().zip(w).all(|(zi, &wi)| *zi == Some(wi)) {
                last_end = Some(j);
            }
        }
        SpontaneousTrace { start, z, m, l }
    }

    pub fn end(&self) -> i64 {
        self.start + self.z.len() as i64 - 1
    }

    fn offset(&self, i: i64) -> usize {
        assert!(i >= self.start && i <= self.end(), "site {i} outside trace");
        (i - self.start) as usize
    }

    pub fn z_at(&self, i: i64) -> Option<Symbol> {
        self.z[self.offset(i)]
    }

    pub fn m_at(&self, i: i64) -> Option<u64> {
        self.m[self.offset(i)]
    }

    pub fn l_at(&self, i: i64) -> Option<u64> {
        self.l[self.offset(i)]
    }

    /// L′_i = m_i + |w| + ℓ(m_i), defined even where Z_i is spontaneous.
    pub fn l_prime_at(&self, model: &ContextTreeModel, i: i64) -> Option<u64> {
        self.m_at(i).map(|k| model.context_length_bound(k))
    }
}

/// ℓ̄(i) = ⌈ℓ((i+1)|w| − 1) / |w|⌉, on the monotone envelope of ℓ.
pub fn ellbar(model: &ContextTreeModel, i: u64) -> u64 {
    let w = model.reference().len() as u64;
    let arg = (i.saturating_add(1)).saturating_mul(w) - 1;
    model.ell().envelope(arg).div_ceil(w)
}

/// ℓ̄⁻¹(i) = inf{k ≥ 1 : ℓ̄(k) > i}; `None` when ℓ̄ never exceeds i.
pub fn ellbar_inv(model: &ContextTreeModel, i: u64) -> Option<u64> {
    let w = model.reference().len() as u64;
    if let Some(sup) = model.ell().supremum() {
        if sup.div_ceil(w) <= i {
            return None;
        }
    }
    let mut hi = 1u64;
    while ellbar(model, hi) <= i {
        if hi >= 1 << 62 {
            return None;
        }
        hi *= 2;
    }
    let mut lo = hi / 2; // ℓ̄(lo) ≤ i, or lo = 0 which is outside the domain
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ellbar(model, mid) > i {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// σ = ⌈ℓ(|w| − 1) / |w|⌉ + 1.
pub fn sigma(model: &ContextTreeModel) -> u64 {
    let w = model.reference().len() as u64;
    model.ell().envelope(w - 1).div_ceil(w) + 1
}

/// The |w|-block rescaling Z̄ with m̄ and L̄. Block b covers sites
/// (b−1)|w|+1, …, b|w|.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RescaledTrace {
    pub start: i64,
    /// Z̄_b = 1.
    pub zbar: Vec<bool>,
    /// m̄_b, `None` while no 1 is in the window before b.
    pub mbar: Vec<Option<u64>>,
    /// L̄_b, `None` when m̄_b is unknown.
    pub lbar: Vec<Option<u64>>,
}

impl RescaledTrace {
    pub fn new(source: &IndexedUniformSource, model: &ContextTreeModel, start: i64, end: i64) -> Result<Self, AnalysisError> {
        let update = UpdateFunction::new(model)?;
        let w = model.reference();
        let wl = w.len() as i64;
        let mut zbar = Vec::with_capacity((end - start + 1).max(0) as usize);
        for b in start..=end {
            let first = (b - 1) * wl + 1;
            let mut one = true;
            for (r, &sym) in w.iter().enumerate() {
                if update.spontaneous_symbol(source.u_at(first + r as i64)?) != Some(sym) {
                    one = false;
                    break;
                }
            }
            zbar.push(one);
        }
        Ok(Self::from_zbar(model, start, zbar))
    }

    pub fn from_zbar(model: &ContextTreeModel, start: i64, zbar: Vec<bool>) -> Self {
        let mut mbar = Vec::with_capacity(zbar.len());
        let mut lbar = Vec::with_capacity(zbar.len());
        let mut last_one: Option<usize> = None;
        for (j, &one) in zbar.iter().enumerate() {
            let mj = last_one.map(|p| (j - 1 - p) as u64);
            mbar.push(mj);
            lbar.push(if one { Some(0) } else { mj.map(|k| k + 1 + ellbar(model, k)) });
            if one {
                last_one = Some(j);
            }
        }
        RescaledTrace { start, zbar, mbar, lbar }
    }

    pub fn end(&self) -> i64 {
        self.start + self.zbar.len() as i64 - 1
    }

    fn offset(&self, b: i64) -> usize {
        assert!(b >= self.start && b <= self.end(), "block {b} outside trace");
        (b - self.start) as usize
    }

    pub fn zbar_at(&self, b: i64) -> bool {
        self.zbar[self.offset(b)]
    }

    pub fn mbar_at(&self, b: i64) -> Option<u64> {
        self.mbar[self.offset(b)]
    }

    pub fn lbar_at(&self, b: i64) -> Option<u64> {
        self.lbar[self.offset(b)]
    }
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

    fn binary(ell: LengthFunction) -> ContextTreeModel {
        let a = Alphabet::new(vec!['2', '1'], 1);
        let rules = TransitionRules::new(0.3, vec![Rule { key: RuleKey::Default, probs: vec![0.3, 0.7] }]);
        ContextTreeModel::new(a.clone(), a.parse_time_order("2").unwrap(), ell, rules).unwrap()
    }

    #[test]
    fn ellbar_table_values() {
        let m = table_model();
        assert_eq!((0..3).map(|i| ellbar(&m, i)).collect::<Vec<_>>(), vec![1, 2, 4]);
        assert_eq!(sigma(&m), 2);
        assert_eq!(ellbar_inv(&m, 0), Some(1));
        assert_eq!(ellbar_inv(&m, 2), Some(2));
        assert_eq!(ellbar_inv(&m, 4), None);
    }

    #[test]
    fn ellbar_closed_forms() {
        let zero = binary(LengthFunction::Zero);
        assert!((0..20).all(|i| ellbar(&zero, i) == 0));
        assert_eq!(ellbar_inv(&zero, 0), None);
        assert_eq!(sigma(&zero), 1);
        let id = binary(LengthFunction::Identity);
        assert!((0..20).all(|i| ellbar(&id, i) == i));
        assert!((0..20).all(|i| ellbar_inv(&id, i) == Some(i + 1)));
        assert_eq!(sigma(&id), 1);
    }

    #[test]
    fn spontaneous_trace_distance() {
        let m = binary(LengthFunction::Identity);
        // only U_{-3} is spontaneous (a 2)
        let src = IndexedUniformSource::fixed_trace(BTreeMap::from([(-3, 0.1), (-2, 0.9), (-1, 0.9), (0, 0.9)])).unwrap();
        let t = SpontaneousTrace::new(&src, &m, -3, 0).unwrap();
        assert_eq!(t.z_at(-3), Some(Symbol(0)));
        assert_eq!(t.m_at(-3), None);
        assert_eq!(t.l_at(-3), Some(0));
        assert_eq!(t.m_at(0), Some(2));
        assert_eq!(t.l_at(0), Some(2 + 1 + 2));
        assert_eq!(t.l_prime_at(&m, -2), Some(1));
    }

    #[test]
    fn all_star_trace() {
        let m = binary(LengthFunction::Identity);
        let t = SpontaneousTrace::from_z(&m, 0, vec![None; 5]);
        assert!(t.m.iter().all(Option::is_none));
        assert!(t.l.iter().all(Option::is_none));
    }

    #[test]
    fn rescaled_trace_from_blocks() {
        let m = table_model();
        let t = RescaledTrace::from_zbar(&m, -2, vec![true, false, false, false]);
        assert_eq!(t.mbar, vec![None, Some(0), Some(1), Some(2)]);
        assert_eq!(t.lbar, vec![Some(0), Some(2), Some(4), Some(7)]);
    }
}
