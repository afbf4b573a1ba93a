//! Oracle results keyed by a digest of their inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub oracle: String,
    pub digest: String,
    pub values: Vec<f64>,
    pub method: String,
    pub tolerance: f64,
}

/// SHA-256 over the oracle name and the little-endian bytes of its inputs.
pub fn input_digest(oracle: &str, inputs: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update(oracle.as_bytes());
    h.update([0u8]);
    for v in inputs {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Default)]
pub struct OracleCache {
    entries: BTreeMap<String, OracleResult>,
    hits: usize,
}

impl OracleCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the cached result for these inputs, computing it on a miss.
    pub fn get_or_compute<F>(&mut self, oracle: &str, inputs: &[f64], method: &str, tolerance: f64, compute: F) -> OracleResult
    where
        F: FnOnce() -> Vec<f64>,
    {
        let digest = input_digest(oracle, inputs);
        if let Some(hit) = self.entries.get(&digest) {
            self.hits += 1;
            return hit.clone();
        }
        let result = OracleResult {
            oracle: oracle.to_string(),
            digest: digest.clone(),
            values: compute(),
            method: method.to_string(),
            tolerance,
        };
        self.entries.insert(digest, result.clone());
        result
    }

    pub fn hits(&self) -> usize {
        self.hits
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One row per value: `oracle,digest,index,value,method,tolerance`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("oracle,digest,index,value,method,tolerance\n");
        for r in self.entries.values() {
            for (i, v) in r.values.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{},{},{}", r.oracle, r.digest, i, v, r.method, r.tolerance);
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hits_are_identical() {
        let mut cache = OracleCache::new();
        let a = cache.get_or_compute("sq", &[3.0], "square", 0.0, || vec![9.0]);
        let b = cache.get_or_compute("sq", &[3.0], "square", 0.0, || unreachable!());
        assert_eq!(a, b);
        assert_eq!(cache.hits(), 1);
        assert_ne!(input_digest("sq", &[3.0]), input_digest("sq", &[3.0000000001]));
        assert!(cache.to_csv().lines().nth(1).unwrap().starts_with("sq,"));
    }
}
