//! Run configuration: one TOML file per experiment.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, ZkError};
use crate::evolution::{Integrator, Scheme};
use crate::lab::{Branch, Direction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    /// Half width X of the x box [-X, X).
    pub half_width: f64,
    /// y period is 2 pi L.
    pub period: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            nx: 256,
            ny: 8,
            half_width: 30.0,
            period: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub c_star: f64,
    pub kappa: f64,
    pub delta: f64,
    pub eps_tube: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            c_star: 1.0,
            kappa: 1.0,
            delta: 0.05,
            eps_tube: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    /// Steps between stored snapshots (0: endpoints only).
    pub snapshot_every: usize,
    pub dealias: bool,
    pub blowup_bound: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Ifrk4,
            dt: 0.01,
            t_end: 1.0,
            snapshot_every: 0,
            dealias: true,
            blowup_bound: 1e3,
        }
    }
}

/// Initial datum of `simulate`, `decompose` and `track`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    /// `tau_shift Q_speed`.
    Soliton,
    /// `Q_{c*} + eps F` along `direction`.
    Mode,
    /// `Q_{c*} + eps g` for a smooth random `g` of unit H^1 norm drawn from `seed`.
    Noise,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub initial: Initial,
    /// Speed of the initial soliton (defaults to `c_star`).
    pub speed: Option<f64>,
    pub shift: f64,
    pub eps: f64,
    pub k: usize,
    pub j: usize,
    pub branch: Branch,
    /// Family amplitudes for `bifurcate` and `quartic`.
    pub amplitudes: Vec<f64>,
    /// Speeds for the gradient-term check of `quartic`.
    pub speeds: Vec<f64>,
    /// Survival target of `shoot`; defaults to 30 / lambda_1.
    pub t_target: Option<f64>,
    pub bracket: f64,
    pub tol: f64,
    pub max_trials: usize,
    pub check_every: usize,
    /// Perturbation sizes of the Hölder probe (`shoot` runs it when set).
    pub eps_list: Vec<f64>,
    /// Tiny amplitude whose shot measures the linear part removed by the probe.
    pub eps_reference: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            initial: Initial::Soliton,
            speed: None,
            shift: 0.0,
            eps: 1e-3,
            k: 1,
            j: 0,
            branch: Branch::Plus,
            amplitudes: vec![0.02, 0.04, 0.06, 0.08],
            speeds: Vec::new(),
            t_target: None,
            bracket: 1e-2,
            tol: 1e-6,
            max_trials: 80,
            check_every: 5,
            eps_list: Vec::new(),
            eps_reference: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub grid: GridConfig,
    pub physics: PhysicsConfig,
    pub integrator: IntegratorConfig,
    pub experiment: ExperimentConfig,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ZkError::param(name, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ZkError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| ZkError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(ZkError::param("seed", "must fit in a TOML integer (at most 2^63 - 1)"));
        }
        let g = &self.grid;
        if g.nx < 8 || g.nx % 2 != 0 {
            return Err(ZkError::param("nx", "must be even and at least 8"));
        }
        if g.ny < 8 || g.ny % 2 != 0 {
            return Err(ZkError::param("ny", "must be even and at least 8"));
        }
        positive("half_width", g.half_width)?;
        positive("period", g.period)?;
        let p = &self.physics;
        positive("c_star", p.c_star)?;
        positive("kappa", p.kappa)?;
        positive("delta", p.delta)?;
        positive("eps_tube", p.eps_tube)?;
        let i = &self.integrator;
        positive("dt", i.dt)?;
        if !(i.t_end >= 0.0 && i.t_end.is_finite()) {
            return Err(ZkError::param("t_end", "must be nonnegative"));
        }
        positive("blowup_bound", i.blowup_bound)?;
        let e = &self.experiment;
        if let Some(s) = e.speed {
            positive("speed", s)?;
        }
        if !e.shift.is_finite() {
            return Err(ZkError::param("shift", "must be finite"));
        }
        if !(e.eps >= 0.0 && e.eps.is_finite()) {
            return Err(ZkError::param("eps", "must be nonnegative"));
        }
        if e.k == 0 {
            return Err(ZkError::param("k", "mode index starts at 1"));
        }
        if e.j > 1 {
            return Err(ZkError::param("j", "must be 0 or 1"));
        }
        for a in &e.amplitudes {
            positive("amplitudes", *a)?;
        }
        for s in &e.speeds {
            positive("speeds", *s)?;
        }
        if let Some(t) = e.t_target {
            positive("t_target", t)?;
        }
        positive("bracket", e.bracket)?;
        positive("tol", e.tol)?;
        if e.max_trials == 0 {
            return Err(ZkError::param("max_trials", "must be at least 1"));
        }
        for s in &e.eps_list {
            positive("eps_list", *s)?;
        }
        if let Some(s) = e.eps_reference {
            positive("eps_reference", s)?;
        }
        Ok(())
    }

    pub fn integrator(&self) -> Integrator {
        let i = &self.integrator;
        let mut out = Integrator::new(i.dt, i.t_end);
        out.scheme = i.scheme;
        out.dealias = i.dealias;
        out.blowup_bound = i.blowup_bound;
        out.snapshot_every = i.snapshot_every;
        out.action_speed = self.physics.c_star;
        out
    }

    pub fn direction(&self) -> Direction {
        Direction::new(self.experiment.k, self.experiment.j, self.experiment.branch)
    }

    /// SHA-256 of the canonical JSON form of the resolved config, tagged
    /// with the subcommand.
    pub fn hash(&self, subcommand: &str) -> String {
        let body = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::json!({ "subcommand": subcommand, "config": body });
        let mut h = Sha256::new();
        h.update(canonical.to_string().as_bytes());
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.experiment.speeds = vec![3.04];
        c.experiment.t_target = Some(12.5);
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash("simulate"), c.hash("simulate"));
        assert_ne!(c.hash("simulate"), c.hash("spectrum"));
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = RunConfig::from_toml("seed = 3\n[physics]\nc_star = 1.5\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.physics.c_star, 1.5);
        assert_eq!(c.grid, GridConfig::default());
    }

    #[test]
    fn validation_names_field() {
        let mut c = RunConfig::default();
        c.physics.c_star = -1.0;
        let e = c.validate().unwrap_err();
        assert!(e.is_validation());
        assert!(e.to_string().contains("c_star"));
        assert!(RunConfig::from_toml("[grid]\nnx = 8\nbogus = 1\n").is_err());
    }
}
