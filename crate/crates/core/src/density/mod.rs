//! Reward-weighted kernel density over the stable points and seeded sampling
//! of ranked placement candidates.

mod grid;

pub use grid::{DensityGrid, GridSpec, GRID_HEADER_BYTES};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::reasoning::ReceptacleSet;
use crate::stability::StableSet;

pub const DEFAULT_BANDWIDTH: f64 = 0.05;
pub const DEFAULT_BETA: f64 = 0.1;
pub const DEFAULT_MIN_SEPARATION: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid density config: {0}")]
    Config(String),
    #[error("density is zero everywhere; no placement candidates")]
    NoCandidates,
    #[error("density grid: {0}")]
    Grid(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `exp(-|u|^2 / 2)`, unnormalized.
    #[default]
    GaussianRbf,
}

impl Kernel {
    fn eval(self, u2: f64) -> f64 {
        match self {
            Kernel::GaussianRbf => (-0.5 * u2).exp(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KdeConfig {
    pub bandwidth: f64,
    pub kernel: Kernel,
}

impl Default for KdeConfig {
    fn default() -> Self {
        KdeConfig { bandwidth: DEFAULT_BANDWIDTH, kernel: Kernel::GaussianRbf }
    }
}

impl KdeConfig {
    pub fn validate(&self) -> Result<(), DensityError> {
        if self.bandwidth.is_finite() && self.bandwidth > 0.0 {
            Ok(())
        } else {
            Err(DensityError::Config(format!("bandwidth must be positive, got {}", self.bandwidth)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendConfig {
    pub beta: f64,
}

impl Default for BlendConfig {
    fn default() -> Self {
        BlendConfig { beta: DEFAULT_BETA }
    }
}

impl BlendConfig {
    pub fn validate(&self) -> Result<(), DensityError> {
        if (0.0..=1.0).contains(&self.beta) {
            Ok(())
        } else {
            Err(DensityError::Config(format!("beta must be in [0, 1], got {}", self.beta)))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoints {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl WeightedPoints {
    pub fn new(points: Vec<Vec3>, weights: Vec<f64>) -> Result<Self, DensityError> {
        if points.len() != weights.len() {
            return Err(DensityError::Contract(format!("{} points but {} weights", points.len(), weights.len())));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(DensityError::Contract(format!("weight {i} is {}", weights[i])));
        }
        Ok(WeightedPoints { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `beta * r_s_norm + (1 - beta) * r_r` for every stable point.
pub fn blend_weights(
    stable: &StableSet,
    receptacle: &ReceptacleSet,
    blend: &BlendConfig,
) -> Result<WeightedPoints, DensityError> {
    blend.validate()?;
    if stable.entries.len() != receptacle.entries.len() {
        return Err(DensityError::Contract(format!(
            "{} stable points but {} receptacle entries",
            stable.entries.len(),
            receptacle.entries.len()
        )));
    }
    let beta = blend.beta;
    let mut points = Vec::with_capacity(stable.len());
    let mut weights = Vec::with_capacity(stable.len());
    for (i, (s, r)) in stable.entries.iter().zip(&receptacle.entries).enumerate() {
        if s.point != r.point {
            return Err(DensityError::Contract(format!("point {i} differs between stable and receptacle sets")));
        }
        points.push(s.point);
        weights.push(beta * s.reward_norm + (1.0 - beta) * r.reward);
    }
    WeightedPoints::new(points, weights)
}

fn kde_sum(support: &WeightedPoints, cfg: &KdeConfig, q: &Vec3) -> f64 {
    let h = cfg.bandwidth;
    let mut acc = 0.0;
    for (p, w) in support.points.iter().zip(&support.weights) {
        if *w != 0.0 {
            acc += w * cfg.kernel.eval(((q - p) / h).norm_squared());
        }
    }
    acc / (support.len() as f64 * h)
}

/// `(1 / (N h)) * sum_i w_i K((q - p_i) / h)`.
pub fn kde_evaluate(support: &WeightedPoints, cfg: &KdeConfig, query: &Vec3) -> Result<f64, DensityError> {
    cfg.validate()?;
    if support.is_empty() {
        return Err(DensityError::Contract("empty support".into()));
    }
    Ok(kde_sum(support, cfg, query))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub support: WeightedPoints,
    pub config: KdeConfig,
    pub grid: Option<DensityGrid>,
}

impl DensityField {
    pub fn new(support: WeightedPoints, config: KdeConfig) -> Result<Self, DensityError> {
        config.validate()?;
        if support.is_empty() {
            return Err(DensityError::Contract("empty support".into()));
        }
        Ok(DensityField { support, config, grid: None })
    }

    pub fn evaluate(&self, q: &Vec3) -> f64 {
        kde_sum(&self.support, &self.config, q)
    }

    /// Evaluates every lattice node in parallel; values are independent of scheduling.
    pub fn with_grid(mut self, spec: GridSpec) -> Result<Self, DensityError> {
        spec.validate()?;
        let values = (0..spec.len()).into_par_iter().map(|i| self.evaluate(&spec.point(i))).collect();
        self.grid = Some(DensityGrid { spec, values });
        Ok(self)
    }

    /// Highest-density grid node, first in index order on ties.
    pub fn grid_argmax(&self) -> Option<(Vec3, f64)> {
        let g = self.grid.as_ref()?;
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in g.values.iter().enumerate() {
            if best.is_none_or(|(_, b)| *v > b) {
                best = Some((i, *v));
            }
        }
        best.map(|(i, v)| (g.spec.point(i), v))
    }

    /// Support point with the highest density, first on ties.
    pub fn support_argmax(&self) -> (Vec3, f64) {
        let mut best = (self.support.points[0], f64::NEG_INFINITY);
        for p in &self.support.points {
            let v = self.evaluate(p);
            if v > best.1 {
                best = (*p, v);
            }
        }
        best
    }
}

pub fn build_density(
    stable: &StableSet,
    receptacle: &ReceptacleSet,
    blend: &BlendConfig,
    kde: &KdeConfig,
    grid: Option<GridSpec>,
) -> Result<DensityField, DensityError> {
    let support = blend_weights(stable, receptacle, blend)?;
    let field = DensityField::new(support, *kde)?;
    match grid {
        Some(spec) => field.with_grid(spec),
        None => Ok(field),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub point: Vec3,
    pub density: f64,
    /// 1 is best.
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub candidates: Vec<Candidate>,
    pub seed: u64,
    pub min_separation: f64,
    /// Fewer than the requested number could be placed apart.
    pub short: bool,
}

/// Weighted draws without replacement over the support, probability
/// proportional to density, skipping draws closer than `min_separation` to an
/// accepted one. Sorted by density, best first.
pub fn sample_candidates(
    field: &DensityField,
    k: usize,
    min_separation: f64,
    seed: u64,
) -> Result<CandidateList, DensityError> {
    if k == 0 {
        return Err(DensityError::Contract("k must be at least 1".into()));
    }
    if !(min_separation.is_finite() && min_separation >= 0.0) {
        return Err(DensityError::Config(format!("min_separation must be non-negative, got {min_separation}")));
    }
    let densities: Vec<f64> = field.support.points.par_iter().map(|p| field.evaluate(p)).collect();
    let mut pool: Vec<usize> = (0..densities.len()).filter(|&i| densities[i] > 0.0).collect();
    if pool.is_empty() {
        return Err(DensityError::NoCandidates);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted: Vec<usize> = Vec::new();
    while accepted.len() < k && !pool.is_empty() {
        let total: f64 = pool.iter().map(|&i| densities[i]).sum();
        let mut r = rng.gen::<f64>() * total;
        let mut pick = pool.len() - 1;
        for (slot, &i) in pool.iter().enumerate() {
            if r < densities[i] {
                pick = slot;
                break;
            }
            r -= densities[i];
        }
        let i = pool.remove(pick);
        let p = field.support.points[i];
        if accepted.iter().all(|&j| (field.support.points[j] - p).norm() >= min_separation) {
            accepted.push(i);
        }
    }
    accepted.sort_by(|a, b| densities[*b].total_cmp(&densities[*a]).then(a.cmp(b)));
    let short = accepted.len() < k;
    let candidates = accepted
        .iter()
        .enumerate()
        .map(|(r, &i)| Candidate { point: field.support.points[i], density: densities[i], rank: r + 1 })
        .collect();
    Ok(CandidateList { candidates, seed, min_separation, short })
}
