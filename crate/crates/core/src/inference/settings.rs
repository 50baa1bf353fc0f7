use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrbError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSettings {
    pub n_chains: usize,
    pub n_iterations: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub adapt_window: usize,
    /// Target acceptance for scalar random-walk updates.
    pub target_accept: f64,
    /// Target acceptance for the joint transition-parameter update.
    pub block_target_accept: f64,
}

impl Default for McmcSettings {
    fn default() -> Self {
        McmcSettings {
            n_chains: 4,
            n_iterations: 20_000,
            n_burnin: 10_000,
            thin: 5,
            seed: 0,
            adapt_window: 50,
            target_accept: 0.44,
            block_target_accept: 0.234,
        }
    }
}

impl McmcSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SrbError::Config(m.to_string()));
        if self.n_chains == 0 {
            return bad("n_chains must be positive");
        }
        if self.n_iterations == 0 || self.n_burnin >= self.n_iterations {
            return bad("need 0 <= n_burnin < n_iterations");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if self.adapt_window == 0 {
            return bad("adapt_window must be positive");
        }
        for t in [self.target_accept, self.block_target_accept] {
            if !(t > 0.0 && t < 1.0) {
                return bad("acceptance targets must lie in (0, 1)");
            }
        }
        if self.retained_per_chain() == 0 {
            return bad("no draws retained: increase n_iterations or lower thin");
        }
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.n_iterations - self.n_burnin) / self.thin
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: McmcSettings =
            serde_json::from_str(text).map_err(|e| SrbError::json("MCMC settings", e))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SrbError::io(path, e))?;
        Self::from_json(&text)
    }
}
