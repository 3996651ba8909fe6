use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: Option<String>,
    pub seeds: SeedSpec,
    pub eta: usize,
    /// Attempt step limit rule; only "2d" (twice the policy depth).
    pub alpha: String,
    pub node_budget: usize,
    pub walk_limit: usize,
    /// Baseline steps; defaults to the matching learner run's final count.
    pub step_budget: Option<u64>,
    pub out: PathBuf,
    pub snapshot_every: u64,
    pub test_samples: usize,
    pub time_limit_s: f64,
    /// Add a wall_time_s column to the CSVs (breaks byte-identity).
    pub wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: None,
            seeds: SeedSpec::List(vec![1]),
            eta: 5,
            alpha: "2d".into(),
            node_budget: 1_000_000,
            walk_limit: 500,
            step_budget: None,
            out: PathBuf::from("results"),
            snapshot_every: 1000,
            test_samples: 3500,
            time_limit_s: 600.0,
            wall_time: false,
        }
    }
}

/// Seeds from "1..30" (inclusive), "1..=30", "4" or comma lists of those.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let b = b.strip_prefix('=').unwrap_or(b);
            let lo: u64 = a.trim().parse().map_err(|_| format!("bad seed range `{part}`"))?;
            let hi: u64 = b.trim().parse().map_err(|_| format!("bad seed range `{part}`"))?;
            if hi < lo {
                return Err(format!("empty seed range `{part}`"));
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().map_err(|_| format!("bad seed `{part}`"))?);
        }
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn seed_list(&self) -> Result<Vec<u64>, String> {
        match &self.seeds {
            SeedSpec::List(v) => Ok(v.clone()),
            SeedSpec::Text(t) => parse_seeds(t),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.domain.is_none() {
            return Err("no domain given".into());
        }
        if self.eta < 1 {
            return Err("eta must be at least 1".into());
        }
        if self.seed_list()?.is_empty() {
            return Err("at least one seed is required".into());
        }
        if self.alpha != "2d" {
            return Err(format!("unsupported alpha rule `{}`", self.alpha));
        }
        if self.node_budget == 0 {
            return Err("node budget must be positive".into());
        }
        if self.snapshot_every == 0 {
            return Err("snapshot interval must be positive".into());
        }
        if self.time_limit_s <= 0.0 {
            return Err("time limit must be positive".into());
        }
        Ok(())
    }
}
