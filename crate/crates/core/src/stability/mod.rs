//! Simulated placement trials and the stable set.
//!
//! Each candidate point is simulated for a fixed number of steps with small
//! tilts injected part-way through. The scalar part of the orientation is
//! recorded every step; a point is stable when that trace never strays more
//! than a tolerance from its first sample.

mod backend;
mod quasi_static;

pub use backend::{BackendError, PhysicsBackend};
pub use quasi_static::{QuasiStaticBackend, QuasiStaticParams, QuasiStaticState};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::scene::{CandidateGrid, Scene};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("backend failure at point {point:?}: {source}")]
    Backend { point: [f64; 3], source: BackendError },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// `sigma` is `stability_tolerance`.
    #[default]
    FixedTolerance,
    /// `sigma^2` is the sample variance of the trace itself.
    SeriesVariance,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSense {
    /// `100 * (max - min)` over the trace.
    #[default]
    Swing,
    /// `100 * (1 - (max - min))`, favouring quiet traces.
    Inverted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tilt {
    /// Horizontal rotation axis.
    pub axis: [f64; 3],
    /// Radians.
    pub angle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub steps: usize,
    pub dt: f64,
    pub stability_tolerance: f64,
    pub sigma_mode: SigmaMode,
    pub reward_sense: RewardSense,
    pub perturbation_tilts: Vec<Tilt>,
    /// Step at which tilts are applied; `None` means half-way.
    pub perturbation_step: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        let tilt = |axis: [f64; 3]| Tilt { axis, angle: 0.05 };
        SimConfig {
            steps: 200,
            dt: 0.005,
            stability_tolerance: 0.05,
            sigma_mode: SigmaMode::FixedTolerance,
            reward_sense: RewardSense::Swing,
            perturbation_tilts: vec![
                tilt([1.0, 0.0, 0.0]),
                tilt([-1.0, 0.0, 0.0]),
                tilt([0.0, 1.0, 0.0]),
                tilt([0.0, -1.0, 0.0]),
            ],
            perturbation_step: None,
        }
    }
}

impl SimConfig {
    pub fn tilt_step(&self) -> usize {
        self.perturbation_step.unwrap_or(self.steps / 2)
    }

    pub fn validate(&self) -> Result<(), StabilityError> {
        let bad = |m: String| Err(StabilityError::Config(m));
        if self.steps < 2 {
            return bad(format!("steps must be at least 2, got {}", self.steps));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.stability_tolerance.is_finite() && self.stability_tolerance >= 0.0) {
            return bad(format!("stability_tolerance must be non-negative, got {}", self.stability_tolerance));
        }
        let k = self.tilt_step();
        if !self.perturbation_tilts.is_empty() && !(2..=self.steps).contains(&k) {
            return bad(format!("perturbation_step {k} outside [2, {}]", self.steps));
        }
        for (i, t) in self.perturbation_tilts.iter().enumerate() {
            let a = Vec3::from(t.axis);
            if !(a.norm() > 1e-12 && a.iter().all(|c| c.is_finite())) || a.z.abs() > 1e-9 * a.norm() {
                return bad(format!("perturbation_tilts[{i}] axis must be horizontal and nonzero"));
            }
            if !t.angle.is_finite() {
                return bad(format!("perturbation_tilts[{i}] angle is not finite"));
            }
        }
        Ok(())
    }
}

/// Scalar part of the orientation at every step of one placement trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationTrace {
    pub point: Vec3,
    pub samples: Vec<f64>,
    pub settled: bool,
    pub penetrated: bool,
}

impl OrientationTrace {
    pub fn max_deviation(&self) -> f64 {
        let first = self.samples.first().copied().unwrap_or(0.0);
        self.samples.iter().map(|q| (q - first).abs()).fold(0.0, f64::max)
    }

    /// `max - min` over the samples.
    pub fn swing(&self) -> f64 {
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &q| (lo.min(q), hi.max(q)));
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }

    /// Sample variance (n - 1 denominator); zero for a single sample.
    pub fn variance(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.samples.iter().sum::<f64>() / n as f64;
        self.samples.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    }
}

pub fn sigma_squared(trace: &OrientationTrace, cfg: &SimConfig) -> f64 {
    match cfg.sigma_mode {
        SigmaMode::FixedTolerance => cfg.stability_tolerance * cfg.stability_tolerance,
        SigmaMode::SeriesVariance => trace.variance(),
    }
}

pub fn is_stable(trace: &OrientationTrace, cfg: &SimConfig) -> bool {
    if trace.penetrated || !trace.settled || trace.samples.is_empty() {
        return false;
    }
    let s2 = sigma_squared(trace, cfg);
    let first = trace.samples[0];
    trace.samples.iter().all(|q| (q - first).powi(2) <= s2)
}

pub fn stability_reward(trace: &OrientationTrace, sense: RewardSense) -> f64 {
    match sense {
        RewardSense::Swing => 100.0 * trace.swing(),
        RewardSense::Inverted => 100.0 * (1.0 - trace.swing()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableEntry {
    pub point: Vec3,
    pub reward_raw: f64,
    /// Min-max normalized over the set, in `[0, 1]`.
    pub reward_norm: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StableSet {
    pub entries: Vec<StableEntry>,
}

impl StableSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &Vec3> {
        self.entries.iter().map(|e| &e.point)
    }
}

fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values.iter().map(|v| if span > 0.0 { (v - lo) / span } else { 1.0 }).collect()
}

/// Filters traces down to stable points and attaches normalized rewards.
pub fn stable_set(traces: &[OrientationTrace], cfg: &SimConfig) -> Result<StableSet, StabilityError> {
    let Some(first) = traces.first() else {
        return Err(StabilityError::ContractViolation("no traces".into()));
    };
    let len = first.samples.len();
    if len == 0 {
        return Err(StabilityError::ContractViolation("empty trace".into()));
    }
    if let Some(i) = traces.iter().position(|t| t.samples.len() != len) {
        return Err(StabilityError::ContractViolation(format!(
            "trace {i} has {} samples, expected {len}",
            traces[i].samples.len()
        )));
    }
    let kept: Vec<&OrientationTrace> = traces.iter().filter(|t| is_stable(t, cfg)).collect();
    let raw: Vec<f64> = kept.iter().map(|t| stability_reward(t, cfg.reward_sense)).collect();
    let norm = min_max_normalize(&raw);
    let entries = kept
        .iter()
        .zip(raw.iter().zip(norm))
        .map(|(t, (&reward_raw, reward_norm))| StableEntry { point: t.point, reward_raw, reward_norm })
        .collect();
    Ok(StableSet { entries })
}

fn backend_err(point: &Vec3) -> impl Fn(BackendError) -> StabilityError + '_ {
    move |source| StabilityError::Backend { point: [point.x, point.y, point.z], source }
}

/// Runs one placement trial. Samples start with the placed state; the tilt
/// runs share the unperturbed prefix and the returned trace is the run with
/// the largest deviation from the first sample.
pub fn simulate_placement<B: PhysicsBackend>(
    backend: &B,
    scene: &Scene,
    point: &Vec3,
    cfg: &SimConfig,
) -> Result<OrientationTrace, StabilityError> {
    cfg.validate()?;
    let err = backend_err(point);
    let s0 = backend.place(scene, &scene.placement_object, point).map_err(&err)?;
    let q1 = backend.orientation(&s0).w();
    if backend.penetrating(&s0) {
        return Ok(OrientationTrace { point: *point, samples: vec![q1; cfg.steps], settled: false, penetrated: true });
    }
    let run = |mut s: B::State, mut samples: Vec<f64>| -> Result<(Vec<f64>, bool), StabilityError> {
        while samples.len() < cfg.steps {
            s = backend.step(&s, cfg.dt).map_err(&err)?;
            samples.push(backend.orientation(&s).w());
        }
        Ok((samples, backend.at_rest(&s)))
    };
    if cfg.perturbation_tilts.is_empty() {
        let (samples, settled) = run(s0, vec![q1])?;
        return Ok(OrientationTrace { point: *point, samples, settled, penetrated: false });
    }
    let k = cfg.tilt_step();
    let mut prefix = vec![q1];
    let mut s = s0;
    while prefix.len() < k - 1 {
        s = backend.step(&s, cfg.dt).map_err(&err)?;
        prefix.push(backend.orientation(&s).w());
    }
    let mut worst: Option<Vec<f64>> = None;
    let mut worst_dev = f64::NEG_INFINITY;
    let mut settled = true;
    for t in &cfg.perturbation_tilts {
        let tilted = backend.tilt(&s, &Vec3::from(t.axis), t.angle).map_err(&err)?;
        let (samples, rest) = run(tilted, prefix.clone())?;
        settled &= rest;
        let dev = samples.iter().map(|q| (q - q1).abs()).fold(0.0, f64::max);
        if dev > worst_dev {
            worst_dev = dev;
            worst = Some(samples);
        }
    }
    Ok(OrientationTrace { point: *point, samples: worst.expect("at least one tilt"), settled, penetrated: false })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostics {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub included: bool,
    pub penetrated: bool,
    pub settled: bool,
    pub max_deviation: f64,
    pub reward_raw: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepDiagnostics {
    pub rows: Vec<PointDiagnostics>,
}

impl SweepDiagnostics {
    pub fn stable_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.included).count() as f64 / self.rows.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub stable: StableSet,
    pub traces: Vec<OrientationTrace>,
    pub diagnostics: SweepDiagnostics,
}

/// Simulates every grid point in parallel and filters to the stable set.
/// Results are in grid order regardless of scheduling.
pub fn sweep_stability<B: PhysicsBackend>(
    backend: &B,
    scene: &Scene,
    grid: &CandidateGrid,
    cfg: &SimConfig,
) -> Result<SweepOutcome, StabilityError> {
    if grid.is_empty() {
        return Err(StabilityError::ContractViolation("candidate grid is empty".into()));
    }
    cfg.validate()?;
    let traces = grid
        .points
        .par_iter()
        .map(|p| simulate_placement(backend, scene, p, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let stable = stable_set(&traces, cfg)?;
    let rows = traces
        .iter()
        .map(|t| PointDiagnostics {
            x: t.point.x,
            y: t.point.y,
            z: t.point.z,
            included: is_stable(t, cfg),
            penetrated: t.penetrated,
            settled: t.settled,
            max_deviation: t.max_deviation(),
            reward_raw: stability_reward(t, cfg.reward_sense),
        })
        .collect();
    Ok(SweepOutcome { stable, traces, diagnostics: SweepDiagnostics { rows } })
}

pub fn builtin_backend() -> QuasiStaticBackend {
    QuasiStaticBackend::default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(samples: Vec<f64>) -> OrientationTrace {
        OrientationTrace { point: Vec3::zeros(), samples, settled: true, penetrated: false }
    }

    #[test]
    fn constant_trace_is_stable_with_full_reward() {
        let set = stable_set(&[trace(vec![0.9; 10])], &SimConfig::default()).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.entries[0].reward_raw, 0.0);
        assert_eq!(set.entries[0].reward_norm, 1.0);
    }

    #[test]
    fn deviation_beyond_tolerance_is_excluded() {
        let set = stable_set(&[trace(vec![1.0, 0.9])], &SimConfig::default()).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn mixed_lengths_violate_contract() {
        let err = stable_set(&[trace(vec![1.0; 3]), trace(vec![1.0; 4])], &SimConfig::default()).unwrap_err();
        assert!(matches!(err, StabilityError::ContractViolation(_)));
        assert!(stable_set(&[], &SimConfig::default()).is_err());
    }

    #[test]
    fn unsettled_or_penetrated_is_excluded() {
        let mut a = trace(vec![1.0; 4]);
        a.settled = false;
        let mut b = trace(vec![1.0; 4]);
        b.penetrated = true;
        assert!(stable_set(&[a, b], &SimConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn series_variance_mode_uses_trace_variance() {
        let cfg = SimConfig { sigma_mode: SigmaMode::SeriesVariance, ..SimConfig::default() };
        // Variance of [1, 1, 1, 0.99] is 2.5e-5; first sample deviation 1e-4 exceeds it.
        assert!(!is_stable(&trace(vec![1.0, 1.0, 1.0, 0.99]), &cfg));
        assert!(is_stable(&trace(vec![0.9; 5]), &cfg));
    }

    #[test]
    fn rewards_normalize_and_invert() {
        let traces = [trace(vec![1.0, 0.99]), trace(vec![1.0, 0.97]), trace(vec![1.0, 1.0])];
        let set = stable_set(&traces, &SimConfig::default()).unwrap();
        let norm: Vec<f64> = set.entries.iter().map(|e| e.reward_norm).collect();
        assert!((set.entries[1].reward_raw - 3.0).abs() < 1e-9);
        assert!((norm[0] - 1.0 / 3.0).abs() < 1e-9 && norm[1] == 1.0 && norm[2] == 0.0);
        let cfg = SimConfig { reward_sense: RewardSense::Inverted, ..SimConfig::default() };
        let inv = stable_set(&traces, &cfg).unwrap();
        assert!((inv.entries[2].reward_raw - 100.0).abs() < 1e-9);
        assert_eq!(inv.entries[2].reward_norm, 1.0);
    }

    #[test]
    fn config_rejects_bad_tilt_step() {
        let cfg = SimConfig { perturbation_step: Some(1), ..SimConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = SimConfig { perturbation_step: Some(200), ..SimConfig::default() };
        assert!(cfg.validate().is_ok());
    }
}
