//! Walker alias method for O(1) draws from a fixed discrete distribution.

use crate::error::{Error, Result};
use rand::Rng;

/// Alias table over indices `0..n` with the given (normalized) probabilities.
#[derive(Debug, Clone)]
pub struct AliasTable {
    accept: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// Builds the table in O(n). Probabilities must be non-negative and sum
    /// to 1 within 1e-9 (exact Gibbs tables satisfy this by construction).
    pub fn new(probabilities: &[f64]) -> Result<Self> {
        let n = probabilities.len();
        if n == 0 {
            return Err(Error::invalid("alias table needs at least one outcome"));
        }
        let total: f64 = probabilities.iter().sum();
        if !(total.is_finite() && (total - 1.0).abs() <= 1e-9) {
            return Err(Error::invalid(format!(
                "alias probabilities must sum to 1, got {total}"
            )));
        }
        let mut accept: Vec<f64> = probabilities.iter().map(|&p| p * n as f64).collect();
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let mut small: Vec<u32> = Vec::new();
        let mut large: Vec<u32> = Vec::new();
        for (i, &u) in accept.iter().enumerate() {
            if u < 1.0 {
                small.push(i as u32);
            } else {
                large.push(i as u32);
            }
        }
        while let (Some(s), Some(l)) = (small.pop(), large.pop()) {
            alias[s as usize] = l;
            accept[l as usize] -= 1.0 - accept[s as usize];
            if accept[l as usize] < 1.0 {
                small.push(l);
            } else {
                large.push(l);
            }
        }
        // Leftovers are at weight 1 up to rounding.
        for i in small.into_iter().chain(large) {
            accept[i as usize] = 1.0;
        }
        Ok(AliasTable { accept, alias })
    }

    pub fn len(&self) -> usize {
        self.accept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accept.is_empty()
    }

    /// Draws one index.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let i = rng.random_range(0..self.accept.len());
        if rng.random::<f64>() < self.accept[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }
}
