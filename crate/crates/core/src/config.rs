//! Tolerances and run configuration shared by every command.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Numerical tolerances. The criterion conditions are exact equalities and
/// rank facts; these make them decidable in floating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative Frobenius residual below which a linear system counts as solved.
    pub solve: f64,
    /// A matrix is Hurwitz when its spectral abscissa is below `-hurwitz`.
    pub hurwitz: f64,
    /// Multiplier on the default singular-value cutoff `max(rows, cols)·ε·σ_max`.
    pub rank_scale: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solve: 1e-8,
            hurwitz: 1e-9,
            rank_scale: 1.0,
        }
    }
}

impl Tolerances {
    /// Singular values above this count toward the rank of a `rows × cols` matrix.
    pub fn rank_cutoff(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        self.rank_scale * rows.max(cols) as f64 * f64::EPSILON * sigma_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeOptions {
    /// Fraction of the horizon (taken from the end) used for the decay-rate regression.
    pub late_fraction: f64,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self { late_fraction: 0.5 }
    }
}

/// Everything a CLI invocation can be configured with. Loaded from the same
/// JSON encoding as formation specs; command-line flags override it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tolerances: Tolerances,
    /// Integration step; `None` picks `min(1e-2, 0.1 / (1 + max ‖Ã_i‖_F))`.
    pub dt: Option<f64>,
    /// Simulation horizon.
    #[serde(rename = "T")]
    pub horizon: f64,
    pub envelope: EnvelopeOptions,
    /// Padé degree used by the matrix exponential.
    pub pade_order: usize,
    pub out_dir: String,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            dt: None,
            horizon: 20.0,
            envelope: EnvelopeOptions::default(),
            pade_order: 8,
            out_dir: "formation-out".to_string(),
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("tolerance `{0}` must be positive and finite")]
    Tolerance(&'static str),
    #[error("horizon T = {horizon} must exceed step dt = {dt} > 0")]
    Horizon { horizon: f64, dt: f64 },
    #[error("late_fraction must lie in (0, 1], got {0}")]
    LateFraction(f64),
    #[error("pade_order must be between 1 and 20, got {0}")]
    PadeOrder(usize),
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.tolerances.solve) {
            return Err(ConfigError::Tolerance("solve"));
        }
        if !pos(self.tolerances.hurwitz) {
            return Err(ConfigError::Tolerance("hurwitz"));
        }
        if !pos(self.tolerances.rank_scale) {
            return Err(ConfigError::Tolerance("rank_scale"));
        }
        let dt = self.dt.unwrap_or(f64::MIN_POSITIVE);
        if !(pos(dt) && self.horizon.is_finite() && self.horizon > dt) {
            return Err(ConfigError::Horizon {
                horizon: self.horizon,
                dt,
            });
        }
        let f = self.envelope.late_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(ConfigError::LateFraction(f));
        }
        if self.pade_order == 0 || self.pade_order > 20 {
            return Err(ConfigError::PadeOrder(self.pade_order));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert_eq!(RunConfig::default().validate(), Ok(()));
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = RunConfig::default();
        c.tolerances.solve = 0.0;
        assert_eq!(c.validate(), Err(ConfigError::Tolerance("solve")));
        let c = RunConfig {
            dt: Some(1.0),
            horizon: 0.5,
            ..RunConfig::default()
        };
        assert!(matches!(c.validate(), Err(ConfigError::Horizon { .. })));
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"T": 5.0, "tolerances": {"solve": 1e-6}}"#).unwrap();
        assert_eq!(c.horizon, 5.0);
        assert_eq!(c.tolerances.solve, 1e-6);
        assert_eq!(c.tolerances.hurwitz, 1e-9);
    }
}
