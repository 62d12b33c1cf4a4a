//! Sweep configuration, loaded from and saved to JSON.

use std::fs;
use std::path::{Path, PathBuf};

use qls_core::qwalk::EncodingMode;
use qls_core::randomized::{GapModel, PdfKind};
use qls_core::Kind;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Discrete quantum walk.
    Qw,
    /// Randomized evolution.
    Rm,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Qw => "qw",
            Method::Rm => "rm",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Each instance gets its own minimal resource.
    Incremental,
    /// One resource per cell, tuned on the pooled RMS error.
    FixedSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub dims: Vec<usize>,
    pub kappas: Vec<f64>,
    pub kinds: Vec<Kind>,
    pub methods: Vec<Method>,
    /// Instances per (dim, κ, kind) cell.
    pub instances: usize,
    /// Target two-norm error Δ.
    pub target_error: f64,
    pub rm_repetitions: usize,
    /// Schedule exponent.
    pub p: f64,
    pub mode: SweepMode,
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
    pub workers: usize,
    pub encoding: EncodingMode,
    pub pdf: PdfKind,
    /// Gap that scales RM evolution times on general instances.
    pub gap_model: GapModel,
    /// First walk length tried and the spacing of the step grid.
    pub step_start: usize,
    pub step_increment: usize,
    pub step_cap: usize,
    pub q_cap: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            dims: vec![4, 8, 16],
            kappas: vec![10.0, 20.0, 30.0, 40.0, 50.0],
            kinds: vec![Kind::Pd, Kind::General],
            methods: vec![Method::Qw, Method::Rm],
            instances: 100,
            target_error: 0.4,
            rm_repetitions: 200,
            p: qls_core::hamiltonian::DEFAULT_P,
            mode: SweepMode::Incremental,
            master_seed: 2024,
            output_dir: None,
            workers: 1,
            encoding: EncodingMode::Circuit,
            pdf: PdfKind::Jlpss,
            gap_model: GapModel::Reduced,
            step_start: 4,
            step_increment: 4,
            step_cap: 100_000,
            q_cap: qls_core::randomized::evolve::DEFAULT_Q_CAP,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.dims.is_empty() || self.kappas.is_empty() || self.kinds.is_empty() {
            return bad("dims, kappas and kinds must be non-empty".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if let Some(d) = self.dims.iter().find(|d| **d < 2 || !d.is_power_of_two()) {
            return bad(format!("dimension {d} is not a power of two >= 2"));
        }
        if let Some(k) = self.kappas.iter().find(|k| !(**k >= 1.0 && k.is_finite())) {
            return bad(format!("kappa {k} must be finite and >= 1"));
        }
        let counts = [
            ("instances", self.instances),
            ("rm_repetitions", self.rm_repetitions),
            ("workers", self.workers),
            ("step_start", self.step_start),
            ("step_increment", self.step_increment),
            ("step_cap", self.step_cap),
            ("q_cap", self.q_cap),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be >= 1"));
        }
        if !(self.target_error > 0.0 && self.target_error < std::f64::consts::SQRT_2) {
            return bad(format!("target_error {} outside (0, sqrt 2)", self.target_error));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return bad(format!("schedule exponent {} must exceed 1", self.p));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_are_valid() {
        let c = SweepConfig::default();
        c.validate().unwrap();
        assert_eq!(c.dims, [4, 8, 16]);
        assert_eq!(c.instances, 100);
        assert_eq!(c.rm_repetitions, 200);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = SweepConfig::from_json(r#"{"dims": [8], "mode": "fixed-steps"}"#).unwrap();
        assert_eq!(c.dims, [8]);
        assert_eq!(c.mode, SweepMode::FixedSteps);
        assert_eq!(c.kappas.len(), 5);
    }

    #[test]
    fn rejects_invalid() {
        for text in [
            r#"{"dims": [6]}"#,
            r#"{"instances": 0}"#,
            r#"{"target_error": 1.5}"#,
            r#"{"kappas": [0.5]}"#,
            r#"{"methods": []}"#,
            r#"{"unknown": 1}"#,
        ] {
            assert!(SweepConfig::from_json(text).is_err(), "{text}");
        }
    }

    proptest! {
        #[test]
        fn json_round_trip(
            seed in any::<u64>(),
            instances in 1usize..500,
            target in 0.01f64..1.4,
            kappas in proptest::collection::vec(1.0f64..1e4, 1..6),
            workers in 1usize..64,
        ) {
            let c = SweepConfig {
                master_seed: seed,
                instances,
                target_error: target,
                kappas,
                workers,
                output_dir: Some(PathBuf::from("out/x")),
                ..SweepConfig::default()
            };
            prop_assert_eq!(SweepConfig::from_json(&c.to_json()).unwrap(), c);
        }
    }
}
