//! Index-addressable uniforms: U_i is a pure function of (seed, i) for every
//! integer i, so any process can be driven by the same realization.

use std::collections::BTreeMap;
use std::io::Read;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RandomError {
    #[error("trace has no value at index {0}")]
    IndexNotCovered(i64),
    #[error("trace value {value} at index {index} is outside [0,1)")]
    OutOfRange { index: i64, value: f64 },
    #[error("malformed trace CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug)]
enum Backing {
    Counter { seed: u64, key: [u8; 32] },
    Trace(BTreeMap<i64, f64>),
}

/// Uniform source over ℤ. Cheap to clone; queries never mutate it, so it can
/// be shared across threads freely.
#[derive(Clone, Debug)]
pub struct IndexedUniformSource {
    backing: Backing,
}

const SCALE: f64 = 1.0 / (1u64 << 53) as f64;

impl IndexedUniformSource {
    /// Counter-mode source: each U_i comes from its own position in a ChaCha8 keystream.
    pub fn counter(seed: u64) -> Self {
        let mut key = [0u8; 32];
        ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut key);
        IndexedUniformSource { backing: Backing::Counter { seed, key } }
    }

    /// Source returning fixed values; queries outside the map fail.
    pub fn fixed_trace(values: BTreeMap<i64, f64>) -> Result<Self, RandomError> {
        for (&index, &value) in &values {
            if !(0.0..1.0).contains(&value) {
                return Err(RandomError::OutOfRange { index, value });
            }
        }
        Ok(IndexedUniformSource { backing: Backing::Trace(values) })
    }

    /// Reads `index,value` rows (a header row is allowed).
    pub fn trace_from_csv<R: Read>(reader: R) -> Result<Self, RandomError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut values = BTreeMap::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parsed = (rec.get(0).and_then(|s| s.parse::<i64>().ok()), rec.get(1).and_then(|s| s.parse::<f64>().ok()));
            match parsed {
                (Some(i), Some(v)) => {
                    values.insert(i, v);
                }
                _ if row == 0 => continue,
                _ => {
                    return Err(RandomError::Csv(csv::Error::from(std::io::Error::new(
                        std::io::ErrorKind::InvalidData,
                        format!("row {}: expected index,value", row + 1),
                    ))))
                }
            }
        }
        Self::fixed_trace(values)
    }

    pub fn seed(&self) -> Option<u64> {
        match self.backing {
            Backing::Counter { seed, .. } => Some(seed),
            Backing::Trace(_) => None,
        }
    }

    /// U_i.
    pub fn u_at(&self, i: i64) -> Result<f64, RandomError> {
        match &self.backing {
            Backing::Counter { key, .. } => {
                let mut rng = ChaCha8Rng::from_seed(*key);
                let pos = (i as u64) ^ (1 << 63);
                rng.set_word_pos(pos as u128 * 2);
                Ok((rng.next_u64() >> 11) as f64 * SCALE)
            }
            Backing::Trace(map) => map.get(&i).copied().ok_or(RandomError::IndexNotCovered(i)),
        }
    }

    /// Smallest covered index of a trace source.
    pub fn trace_range(&self) -> Option<(i64, i64)> {
        match &self.backing {
            Backing::Counter { .. } => None,
            Backing::Trace(map) => Some((*map.keys().next()?, *map.keys().next_back()?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_order_free() {
        let s = IndexedUniformSource::counter(42);
        let forward: Vec<f64> = (-50..50).map(|i| s.u_at(i).unwrap()).collect();
        let backward: Vec<f64> = (-50..50).rev().map(|i| s.u_at(i).unwrap()).collect();
        let mut b = backward.clone();
        b.reverse();
        assert_eq!(forward, b);
        assert_eq!(s.u_at(5).unwrap(), IndexedUniformSource::counter(42).u_at(5).unwrap());
        assert!(forward.iter().all(|&u| (0.0..1.0).contains(&u)));
    }

    #[test]
    fn seeds_differ() {
        let a = IndexedUniformSource::counter(1);
        let b = IndexedUniformSource::counter(2);
        let same = (0..10_000).filter(|&i| a.u_at(i).unwrap() == b.u_at(i).unwrap()).count();
        assert!(same < 100);
    }

    #[test]
    fn adjacent_indices_are_distinct() {
        let s = IndexedUniformSource::counter(7);
        let v: Vec<f64> = (-3..3).map(|i| s.u_at(i).unwrap()).collect();
        for i in 0..v.len() {
            for j in 0..i {
                assert_ne!(v[i], v[j]);
            }
        }
    }

    #[test]
    fn trace_lookup() {
        let t = IndexedUniformSource::fixed_trace(BTreeMap::from([(0, 0.1)])).unwrap();
        assert_eq!(t.u_at(0).unwrap(), 0.1);
        assert!(matches!(t.u_at(1), Err(RandomError::IndexNotCovered(1))));
        assert!(IndexedUniformSource::fixed_trace(BTreeMap::from([(0, 1.0)])).is_err());
    }

    #[test]
    fn trace_csv() {
        let t = IndexedUniformSource::trace_from_csv("index,value\n-1, 0.25\n0,0.5\n".as_bytes()).unwrap();
        assert_eq!(t.u_at(-1).unwrap(), 0.25);
        assert_eq!(t.trace_range(), Some((-1, 0)));
        assert!(IndexedUniformSource::trace_from_csv("0,0.5\nx,y\n".as_bytes()).is_err());
    }
}
