//! Engine configuration: every tunable the memory lifecycle depends on.

use serde::{Deserialize, Serialize};
use std::fmt;

/// All engine hyperparameters. Defaults are the standard operating point;
/// [`EngineConfig::longmemeval`] is the wider-retrieval preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Hebbian learning rate applied per co-activation.
    pub eta: f64,
    /// Per-step edge retention factor in [0,1]; per-step decay is 1 - this.
    pub lambda_retention: f64,
    /// Spreading activation strength.
    pub beta: f64,
    /// Base-score threshold a node must reach to act as a spreading source.
    pub theta_spread: f64,
    /// Temporal decay constant in days.
    pub tau_days: f64,
    /// Keyword-match bonus weight.
    pub alpha_keyword: f64,
    /// Episodic top-k for the base retrieval path.
    pub k_episodic: usize,
    /// Semantic top-k.
    pub k_semantic: usize,
    /// Maximum number of flip-path promotions.
    pub m_flip: usize,
    /// Associative-strength threshold for hub detection.
    pub delta_hub: f64,
    /// Associative-strength floor below which a node is prunable.
    pub delta_prune: f64,
    /// Dormancy threshold in days for adaptive forgetting.
    pub delta_age_days: f64,
    /// Seed weight for consecutive-turn adjacency edges.
    pub w_initial: f64,
    /// Steps a consolidated hub is exempt from re-distillation.
    pub cooldown_steps: u64,
    pub enable_spreading: bool,
    pub enable_forgetting: bool,
    pub enable_reflective: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            eta: 0.02,
            lambda_retention: 0.995,
            beta: 0.1,
            theta_spread: 0.6,
            tau_days: 60.0,
            alpha_keyword: 0.7,
            k_episodic: 10,
            k_semantic: 5,
            m_flip: 3,
            delta_hub: 5.0,
            delta_prune: 0.05,
            delta_age_days: 30.0,
            w_initial: 0.1,
            cooldown_steps: 100,
            enable_spreading: true,
            enable_forgetting: true,
            enable_reflective: true,
        }
    }
}

/// One failed configuration invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigViolation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Validation failure carrying every violated invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub violations: Vec<ConfigViolation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: ")?;
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl EngineConfig {
    /// Wider-retrieval preset: top-15 episodic, top-5 semantic, spreading
    /// threshold 0.4, keyword weight 0.7, up to 3 flips.
    pub fn longmemeval() -> Self {
        EngineConfig {
            k_episodic: 15,
            k_semantic: 5,
            theta_spread: 0.4,
            alpha_keyword: 0.7,
            m_flip: 3,
            ..EngineConfig::default()
        }
    }

    /// Collect every violated invariant. Total: never panics.
    pub fn violations(&self) -> Vec<ConfigViolation> {
        fn positive(x: f64) -> bool {
            x.is_finite() && x > 0.0
        }
        fn nonnegative(x: f64) -> bool {
            x.is_finite() && x >= 0.0
        }
        let mut out = Vec::new();
        let mut fail = |field: &'static str, message: &str| {
            out.push(ConfigViolation { field, message: message.to_string() });
        };
        if !positive(self.eta) {
            fail("eta", "eta must be positive");
        }
        if !(0.0..=1.0).contains(&self.lambda_retention) {
            fail("lambda_retention", "retention outside [0,1]");
        }
        if !nonnegative(self.beta) {
            fail("beta", "beta must be nonnegative");
        }
        if !nonnegative(self.theta_spread) {
            fail("theta_spread", "spreading threshold must be nonnegative");
        }
        if !positive(self.tau_days) {
            fail("tau_days", "temporal decay constant must be positive");
        }
        if !nonnegative(self.alpha_keyword) {
            fail("alpha_keyword", "keyword weight must be nonnegative");
        }
        if self.k_episodic < 1 {
            fail("k_episodic", "episodic top-k must be at least 1");
        }
        if !nonnegative(self.delta_hub) {
            fail("delta_hub", "hub threshold must be nonnegative");
        }
        if !nonnegative(self.delta_prune) {
            fail("delta_prune", "prune threshold must be nonnegative");
        }
        if !nonnegative(self.delta_age_days) {
            fail("delta_age_days", "dormancy threshold must be nonnegative");
        }
        if !nonnegative(self.w_initial) {
            fail("w_initial", "adjacency seed weight must be nonnegative");
        }
        out
    }

    /// Ok iff every invariant holds.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { violations })
        }
    }
}
