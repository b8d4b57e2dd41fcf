//! Coupled-run stability study: many neighbor pairs, constants estimated over
//! the observed trajectories, path-wise growth checks with a negative control,
//! encounter statistics and finite-sample stability estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::synthetic::{make_synthetic, SyntheticSpec};
use crate::bounds::{ConstantEstimates, RegionSampler, DEFAULT_PSI_FLOOR};
use crate::error::{Error, Result};
use crate::models::{LabeledSample, ParamVector, SmoothModel};
use crate::numcore::SeededRng;
use crate::stability::{
    self, coupled_run, make_neighbor, GrowthConstants, GrowthReport, StabilityEstimate,
    StabilityTrace, DEFAULT_SLACK,
};
use crate::threat::AttackConfig;
use crate::trainers::{Algorithm, TrainConfig};

const NEIGHBOR_STREAM: u64 = 30;
const ESTIMATE_STREAM: u64 = 31;
const STABILITY_STREAM: u64 = 32;

fn default_slack() -> f64 {
    DEFAULT_SLACK
}

fn default_control() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityStudyConfig {
    pub model: SmoothModel,
    pub data: SyntheticSpec,
    pub train: TrainConfig,
    /// Coupled runs; run `i` uses train seed `train.seed + i`.
    pub runs: usize,
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Deflation factor of the negative control.
    #[serde(default = "default_control")]
    pub control_factor: f64,
    pub probes: usize,
    pub pair_scale: f64,
    /// Gaussian margin around the trajectory segments.
    pub margin: f64,
    #[serde(default)]
    pub encounter_t0: Vec<usize>,
    /// Test points per finite-sample stability estimate; 0 skips it.
    #[serde(default)]
    pub stability_points: usize,
    #[serde(default)]
    pub stability_attack: Option<AttackConfig>,
}

impl StabilityStudyConfig {
    pub fn new(model: SmoothModel, data: SyntheticSpec, train: TrainConfig, runs: usize) -> Self {
        Self {
            model,
            data,
            train,
            runs,
            slack: DEFAULT_SLACK,
            control_factor: default_control(),
            probes: 200,
            pair_scale: 1e-4,
            margin: 0.05,
            encounter_t0: Vec::new(),
            stability_points: 0,
            stability_attack: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.data.validate()?;
        self.train.validate()?;
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be >= 1".into()));
        }
        if self.train.algorithm == Algorithm::Trades || self.train.algorithm == Algorithm::FreeTrades {
            return Err(Error::InvalidConfig(
                "growth checks cover vanilla, free and fast training".into(),
            ));
        }
        if !(self.slack >= 1.0) || !(self.control_factor > 0.0 && self.control_factor < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need slack >= 1 and control factor in (0, 1), got {} and {}",
                self.slack, self.control_factor
            )));
        }
        if self.probes == 0 || !(self.pair_scale > 0.0) {
            return Err(Error::InvalidConfig("probes and pair scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncounterRow {
    pub t0: usize,
    pub fraction: f64,
    pub std_error: f64,
    /// `b t0 / n`.
    pub union_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCheck {
    pub estimate: StabilityEstimate,
    /// `L_w ||w - w'||`.
    pub cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityStudyReport {
    pub config: StabilityStudyConfig,
    pub estimated: ConstantEstimates,
    /// Estimated constants times the slack, as fed to the checks.
    pub checked_with: GrowthConstants,
    pub growth: GrowthReport,
    pub control_constants: GrowthConstants,
    pub control: GrowthReport,
    pub encounter: Vec<EncounterRow>,
    /// Mean weight distance after each update across runs.
    pub mean_distance: Vec<f64>,
    pub stability: Vec<StabilityCheck>,
    pub traces: Vec<StabilityTrace>,
}

fn verify(trace: &StabilityTrace, c: &GrowthConstants) -> Result<GrowthReport> {
    match trace.algorithm {
        Algorithm::Vanilla => stability::verify_growth_vanilla(trace, c),
        Algorithm::Free => stability::verify_growth_free(trace, c),
        Algorithm::Fast => stability::verify_growth_fast(trace, c),
        other => Err(Error::InvalidConfig(format!("no growth check for {}", other.name()))),
    }
}

fn verify_all(traces: &[StabilityTrace], c: &GrowthConstants) -> Result<GrowthReport> {
    let mut total = GrowthReport::default();
    for t in traces {
        total.merge(&verify(t, c)?);
    }
    Ok(total)
}

pub fn run_stability_study(cfg: &StabilityStudyConfig) -> Result<StabilityStudyReport> {
    cfg.validate()?;
    let (train, test) = make_synthetic(&cfg.data)?;
    let replacements = cfg.data.extra_samples(cfg.runs)?;
    let mut pick = SeededRng::new(cfg.data.seed, NEIGHBOR_STREAM);
    let indices: Vec<usize> = (0..cfg.runs).map(|_| pick.index(train.len())).collect();
    let traces: Vec<StabilityTrace> = (0..cfg.runs)
        .into_par_iter()
        .map(|i| {
            let pair = make_neighbor(&train, indices[i], replacements[i].clone())?;
            let mut tcfg = cfg.train;
            tcfg.seed = tcfg.seed.wrapping_add(i as u64);
            coupled_run(&cfg.model, &pair, &tcfg)
        })
        .collect::<Result<_>>()?;

    let mut segments: Vec<(ParamVector, ParamVector)> = Vec::new();
    for t in &traces {
        for pair in t.anchors.windows(2) {
            segments.push((pair[0].0.clone(), pair[1].0.clone()));
            segments.push((pair[0].1.clone(), pair[1].1.clone()));
        }
    }
    let mut points: Vec<LabeledSample> = train.samples().to_vec();
    points.extend(replacements.iter().cloned());
    let region = RegionSampler::new(segments, points, cfg.train.set, cfg.margin)?;
    let min_norm = traces
        .iter()
        .map(|t| t.min_grad_delta_norm())
        .fold(f64::INFINITY, f64::min);
    let psi = 1.0 / min_norm.max(DEFAULT_PSI_FLOOR);
    let mut rng = SeededRng::new(cfg.train.seed, ESTIMATE_STREAM);
    let estimated = ConstantEstimates::estimate(&cfg.model, &region, cfg.probes, cfg.pair_scale, psi, &mut rng)?;
    let base = GrowthConstants {
        beta: estimated.beta,
        lipschitz: estimated.lipschitz,
        psi,
    };
    let checked_with = base.scaled(cfg.slack);
    let control_constants = base.scaled(cfg.control_factor);
    let growth = verify_all(&traces, &checked_with)?;
    let control = verify_all(&traces, &control_constants)?;

    let n = train.len() as f64;
    let encounter = cfg
        .encounter_t0
        .iter()
        .map(|&t0| {
            let (fraction, std_error) = stability::encounter_fraction(&traces, t0);
            EncounterRow {
                t0,
                fraction,
                std_error,
                union_bound: cfg.train.batch_size as f64 * t0 as f64 / n,
            }
        })
        .collect();

    let len = traces[0].records.len();
    let mean_distance = (0..len)
        .map(|k| traces.iter().map(|t| t.records[k].d_w_after).sum::<f64>() / traces.len() as f64)
        .collect();

    let mut stability = Vec::new();
    if cfg.stability_points > 0 {
        let attack = cfg
            .stability_attack
            .unwrap_or_else(|| AttackConfig::evaluation_default(cfg.train.set.radius));
        let points = &test.samples()[..cfg.stability_points.min(test.len())];
        let mut rng = SeededRng::new(cfg.data.seed, STABILITY_STREAM);
        for t in &traces {
            let estimate = stability::estimate_uniform_stability(
                &t.final_w,
                &t.final_w_prime,
                &cfg.model,
                points,
                &cfg.train.set,
                &attack,
                &mut rng,
            )?;
            stability.push(StabilityCheck {
                cap: estimated.lipschitz_w * estimate.weight_distance,
                estimate,
            });
        }
    }
    tracing::info!(
        algorithm = cfg.train.algorithm.name(),
        runs = cfg.runs,
        violations = growth.outside.violations,
        control_violations = control.outside.violations,
        "stability study finished"
    );
    Ok(StabilityStudyReport {
        config: cfg.clone(),
        estimated,
        checked_with,
        growth,
        control_constants,
        control,
        encounter,
        mean_distance,
        stability,
        traces,
    })
}
