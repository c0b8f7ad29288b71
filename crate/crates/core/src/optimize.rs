//! End-to-end pipeline, gradient routing and the Adam training loop.
//!
//! Forward: latent (circuit expectations or a free Gaussian vector) ->
//! affine projection -> Fourier-feature decoder -> sharpening (or filter and
//! Heaviside projection) -> FEM compliance and penalties. The backward pass
//! retraces the same chain: the FEM adjoint gives `dC/drho`, penalties add
//! their own field gradients, and the sum flows through the density map,
//! the decoder and the projection into either the circuit angles
//! (parameter shift) or the classical latent.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::config::{Encoding, RunConfig};
use crate::error::{Error, Result};
use crate::fem::{FemProblem, FemSolution, Material, Mesh};
use crate::filtering::{filter_chain, filter_chain_backward, heaviside_beta, FilterChain, FilterKernel, HeavisideParams};
use crate::grid::DensityField;
use crate::latent::{init_classical, ProjectionLayer};
use crate::loss::{penalties, total_loss, Coefficients, LossBreakdown, PenaltySet, ScheduleConfig};
use crate::metrics::{design_diversity, run_stats, RunStats};
use crate::neuralfield::{sharpen_slope, sigmoid, CoordinateGrid, DecoderCache, DecoderWeights, FrequencyMatrix};
use crate::quantum::{latent_from_theta, param_shift_grad, QuantumConfig, ThetaParams};
use crate::rng::{stream_rng, Stream};

/// Iteration at which sweep statistics are reported.
pub const CHECKPOINT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupId {
    Theta,
    ZC,
    Projection,
    Decoder,
}

impl GroupId {
    pub fn name(&self) -> &'static str {
        match self {
            GroupId::Theta => "theta",
            GroupId::ZC => "z_c",
            GroupId::Projection => "projection",
            GroupId::Decoder => "decoder",
        }
    }
}

/// A flat block of trainable values with its own learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup {
    pub id: GroupId,
    pub values: Vec<f64>,
    pub lr: f64,
}

/// Bias-corrected Adam moments for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, group: &mut ParamGroup, grad: &[f64]) -> Result<()> {
        let n = group.values.len();
        if grad.len() != n || self.m.len() != n {
            return Err(Error::Dimension {
                context: "adam step",
                expected: n,
                actual: grad.len(),
            });
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..n {
            let g = grad[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            group.values[k] -= group.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Gradients of the loss for every parameter group present in a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub theta: Option<Vec<f64>>,
    pub z_c: Option<Vec<f64>>,
    /// Weights row-major, then bias.
    pub projection: Vec<f64>,
    pub decoder: Vec<f64>,
}

impl Gradients {
    pub fn group(&self, id: GroupId) -> Option<&[f64]> {
        match id {
            GroupId::Theta => self.theta.as_deref(),
            GroupId::ZC => self.z_c.as_deref(),
            GroupId::Projection => Some(&self.projection),
            GroupId::Decoder => Some(&self.decoder),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum LatentSource {
    Quantum { cfg: QuantumConfig, theta: ThetaParams },
    Classical { z: Vec<f64> },
}

/// Everything computed by one forward pass that the backward pass reuses.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub latent: Vec<f64>,
    pub z_p: Vec<f64>,
    cache: DecoderCache,
    pub raw: DensityField,
    /// Field handed to FEM and penalties.
    pub physical: DensityField,
    chain: Option<FilterChain>,
    pub beta: f64,
    pub solution: FemSolution,
}

impl ForwardPass {
    pub fn compliance(&self) -> f64 {
        self.solution.compliance
    }
}

/// Loss, breakdown and gradients at one iteration.
#[derive(Debug, Clone)]
pub struct Step {
    pub forward: ForwardPass,
    pub loss: LossBreakdown,
    pub grads: Gradients,
}

/// Trainable model plus the fixed problem data of one run.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: RunConfig,
    schedule: ScheduleConfig,
    source: LatentSource,
    projection: ProjectionLayer,
    decoder: DecoderWeights,
    features: DMatrix<f64>,
    problem: FemProblem,
    kernel: Option<FilterKernel>,
}

impl Pipeline {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        let latent_dim = 3 * config.n_qubits;
        let source = match config.encoding {
            Encoding::Quantum => {
                let cfg = QuantumConfig::new(config.n_qubits, config.n_layers)?;
                let mut rng = stream_rng(seed, Stream::Theta);
                let angles = (0..cfg.n_params())
                    .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                    .collect();
                LatentSource::Quantum {
                    cfg,
                    theta: ThetaParams::from_flat(cfg, angles)?,
                }
            }
            Encoding::Classical => LatentSource::Classical {
                z: init_classical(config.n_qubits, seed),
            },
        };
        let projection = ProjectionLayer::init(config.d_z, latent_dim, seed)?;
        let freqs = FrequencyMatrix::sample(config.fourier_m, config.f_min, config.f_max, seed)?;
        let grid = CoordinateGrid::element_centres(config.nx, config.ny);
        let features = grid.features(&freqs);
        let decoder = DecoderWeights::init(config.d_z, features.nrows(), seed);
        let mesh = Mesh::new(config.nx, config.ny)?;
        let problem = FemProblem::build(config.problem, mesh, Material::default())?;
        let kernel = if config.filtering {
            Some(FilterKernel::new(config.nx, config.ny, config.r_min)?)
        } else {
            None
        };
        let schedule = ScheduleConfig {
            iterations: config.iterations,
            target_volume: config.target_volume,
            sym_max: if config.symmetry { config.sym_max } else { 0.0 },
            ..ScheduleConfig::default()
        };
        Ok(Self {
            config: config.clone(),
            schedule,
            source,
            projection,
            decoder,
            features,
            problem,
            kernel,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn schedule(&self) -> &ScheduleConfig {
        &self.schedule
    }

    pub fn problem(&self) -> &FemProblem {
        &self.problem
    }

    /// Coefficients at iteration `t`, with smoothing penalties switched off
    /// in filtering mode.
    pub fn coefficients(&self, t: usize) -> Result<Coefficients> {
        let mut c = self.schedule.at(t)?;
        if self.kernel.is_some() {
            c.bin = 0.0;
            c.tv = 0.0;
            c.h1 = 0.0;
            c.beta = heaviside_beta(t, self.config.heaviside_period, self.config.heaviside_cap);
        }
        Ok(c)
    }

    fn penalty_set(&self) -> PenaltySet {
        PenaltySet {
            smoothing: self.kernel.is_none(),
            symmetry: self.config.symmetry,
            target_volume: self.config.target_volume,
            domain_area: self.config.domain_area,
        }
    }

    pub fn groups(&self) -> Vec<GroupId> {
        let mut ids = match self.source {
            LatentSource::Quantum { .. } => vec![GroupId::Theta],
            LatentSource::Classical { .. } => vec![GroupId::ZC],
        };
        ids.extend([GroupId::Projection, GroupId::Decoder]);
        ids
    }

    pub fn learning_rate(&self, id: GroupId) -> f64 {
        match id {
            GroupId::Theta => self.config.lr_theta,
            GroupId::ZC => self.config.lr_latent,
            GroupId::Projection => self.config.lr_projection,
            GroupId::Decoder => self.config.lr_decoder,
        }
    }

    pub fn group_values(&self, id: GroupId) -> Option<Vec<f64>> {
        match (id, &self.source) {
            (GroupId::Theta, LatentSource::Quantum { theta, .. }) => Some(theta.as_slice().to_vec()),
            (GroupId::ZC, LatentSource::Classical { z }) => Some(z.clone()),
            (GroupId::Projection, _) => {
                let mut v = self.projection.weight.clone();
                v.extend_from_slice(&self.projection.bias);
                Some(v)
            }
            (GroupId::Decoder, _) => Some(self.decoder.flatten()),
            _ => None,
        }
    }

    pub fn set_group_values(&mut self, id: GroupId, values: &[f64]) -> Result<()> {
        let expected = self
            .group_values(id)
            .ok_or_else(|| Error::arg(format!("group {} is not part of this run", id.name())))?
            .len();
        if values.len() != expected {
            return Err(Error::Dimension {
                context: "parameter group",
                expected,
                actual: values.len(),
            });
        }
        match (id, &mut self.source) {
            (GroupId::Theta, LatentSource::Quantum { theta, .. }) => {
                theta.as_mut_slice().copy_from_slice(values)
            }
            (GroupId::ZC, LatentSource::Classical { z }) => z.copy_from_slice(values),
            (GroupId::Projection, _) => {
                let nw = self.projection.weight.len();
                self.projection.weight.copy_from_slice(&values[..nw]);
                self.projection.bias.copy_from_slice(&values[nw..]);
            }
            (GroupId::Decoder, _) => self.decoder.assign_flat(values)?,
            _ => unreachable!("checked by group_values"),
        }
        Ok(())
    }

    pub fn forward(&self, coeffs: &Coefficients) -> Result<ForwardPass> {
        let latent = match &self.source {
            LatentSource::Quantum { cfg, theta } => latent_from_theta(*cfg, theta)?,
            LatentSource::Classical { z } => z.clone(),
        };
        let z_p = self.projection.project(&latent)?;
        let cache = self.decoder.forward(&z_p, &self.features)?;
        let (nx, ny) = (self.config.nx, self.config.ny);
        let raw = DensityField::from_vec(nx, ny, cache.output.clone())?;
        let (physical, chain) = match &self.kernel {
            Some(kernel) => {
                let chain = filter_chain(&raw, kernel, HeavisideParams::new(coeffs.beta))?;
                (chain.projected.map(|v| v.clamp(0.0, 1.0)), Some(chain))
            }
            None => (raw.map(|r| sigmoid(coeffs.beta * (r - 0.5))), None),
        };
        let solution = self.problem.solve(&physical)?;
        Ok(ForwardPass {
            latent,
            z_p,
            cache,
            raw,
            physical,
            chain,
            beta: coeffs.beta,
            solution,
        })
    }

    /// Loss of a completed forward pass, with the penalty field gradient.
    pub fn loss(
        &self,
        fwd: &ForwardPass,
        coeffs: &Coefficients,
        c0: f64,
    ) -> Result<(LossBreakdown, DensityField)> {
        let (values, grad) = penalties(&fwd.physical, coeffs, self.penalty_set());
        Ok((total_loss(fwd.compliance(), c0, values, *coeffs)?, grad))
    }

    /// Routes `(1/C0) dC/drho + penalty gradients` back to every group.
    pub fn backward_full(
        &self,
        fwd: &ForwardPass,
        compliance_grad: &DensityField,
        penalty_grad: &DensityField,
        c0: f64,
    ) -> Result<Gradients> {
        let field_cot = DensityField::from_vec(
            compliance_grad.nx(),
            compliance_grad.ny(),
            compliance_grad
                .as_slice()
                .iter()
                .zip(penalty_grad.as_slice())
                .map(|(c, p)| c / c0 + p)
                .collect(),
        )?;
        let raw_cot: Vec<f64> = match (&self.kernel, &fwd.chain) {
            (Some(kernel), Some(chain)) => filter_chain_backward(chain, kernel, &field_cot)?.into_vec(),
            _ => field_cot
                .as_slice()
                .iter()
                .zip(fwd.physical.as_slice())
                .map(|(&c, &s)| c * sharpen_slope(s, fwd.beta))
                .collect(),
        };
        let (dec, dz_p) = self.decoder.backward(&fwd.cache, &self.features, &raw_cot)?;
        let proj = self.projection.backward(&fwd.latent, &dz_p)?;
        let mut projection = proj.weight;
        projection.extend_from_slice(&proj.bias);
        let (theta, z_c) = match &self.source {
            LatentSource::Quantum { cfg, theta } => {
                (Some(param_shift_grad(*cfg, theta, &proj.input)?), None)
            }
            LatentSource::Classical { .. } => (None, Some(proj.input)),
        };
        Ok(Gradients {
            theta,
            z_c,
            projection,
            decoder: dec.flatten(),
        })
    }

    /// Forward, loss and backward at iteration `t`. `c0 = None` takes the
    /// reference compliance from this very pass.
    pub fn step(&self, t: usize, c0: Option<f64>) -> Result<Step> {
        let coeffs = self.coefficients(t)?;
        self.step_with(&coeffs, c0)
    }

    pub fn step_with(&self, coeffs: &Coefficients, c0: Option<f64>) -> Result<Step> {
        let forward = self.forward(coeffs)?;
        let c0 = c0.unwrap_or(forward.compliance());
        let (loss, penalty_grad) = self.loss(&forward, coeffs, c0)?;
        let sens = self
            .problem
            .compliance_sensitivity(&forward.physical, &forward.solution.u)?;
        let grads = self.backward_full(&forward, &sens, &penalty_grad, c0)?;
        Ok(Step {
            forward,
            loss,
            grads,
        })
    }

    /// Loss only, for finite-difference checks.
    pub fn loss_at(&self, coeffs: &Coefficients, c0: f64) -> Result<f64> {
        let fwd = self.forward(coeffs)?;
        Ok(self.loss(&fwd, coeffs, c0)?.0.total)
    }
}

/// Histories and final state of one training run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: RunConfig,
    pub seed: u64,
    pub compliance_history: Vec<f64>,
    pub volume_history: Vec<f64>,
    pub loss_history: Vec<LossBreakdown>,
    pub final_field: DensityField,
    pub final_params: Vec<ParamGroup>,
    pub wallclock_s: f64,
}

impl RunResult {
    pub fn final_compliance(&self) -> f64 {
        *self.compliance_history.last().expect("non-empty history")
    }

    pub fn final_volume(&self) -> f64 {
        *self.volume_history.last().expect("non-empty history")
    }

    /// Compliance at 1-based iteration `iter`, clamped to the run length.
    pub fn compliance_at(&self, iter: usize) -> f64 {
        let idx = iter.clamp(1, self.compliance_history.len()) - 1;
        self.compliance_history[idx]
    }
}

/// A run that stopped early, with everything recorded before the failure.
#[derive(Debug)]
pub struct TrainError {
    pub error: Error,
    pub iteration: usize,
    pub partial: Option<RunResult>,
}

impl std::fmt::Display for TrainError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "training failed at iteration {}: {}", self.iteration, self.error)
    }
}

impl std::error::Error for TrainError {}

pub fn train(config: &RunConfig) -> std::result::Result<RunResult, TrainError> {
    let started = Instant::now();
    let fail = |error, iteration, partial| TrainError {
        error,
        iteration,
        partial,
    };
    let mut pipeline = Pipeline::new(config).map_err(|e| fail(e, 0, None))?;
    let mut groups: Vec<ParamGroup> = pipeline
        .groups()
        .into_iter()
        .map(|id| ParamGroup {
            id,
            values: pipeline.group_values(id).expect("listed group"),
            lr: pipeline.learning_rate(id),
        })
        .collect();
    let mut states: Vec<AdamState> = groups.iter().map(|g| AdamState::new(g.values.len())).collect();

    let t_total = config.iterations;
    let mut result = RunResult {
        config: config.clone(),
        seed: config.seed,
        compliance_history: Vec::with_capacity(t_total),
        volume_history: Vec::with_capacity(t_total),
        loss_history: Vec::with_capacity(t_total),
        final_field: DensityField::filled(config.nx, config.ny, 0.0),
        final_params: Vec::new(),
        wallclock_s: 0.0,
    };
    let mut c0 = None;
    for t in 0..t_total {
        let step = match pipeline.step(t, c0) {
            Ok(s) => s,
            Err(e) => {
                result.final_params = groups.clone();
                result.wallclock_s = started.elapsed().as_secs_f64();
                let partial = (!result.compliance_history.is_empty()).then_some(result);
                return Err(fail(e, t, partial));
            }
        };
        c0.get_or_insert(step.forward.compliance());
        result.compliance_history.push(step.forward.compliance());
        result.volume_history.push(step.forward.physical.mean());
        result.loss_history.push(step.loss);
        result.final_field = step.forward.physical;
        if t + 1 == t_total {
            break;
        }
        for (group, state) in groups.iter_mut().zip(&mut states) {
            let grad = step.grads.group(group.id).expect("group has a gradient");
            state.step(group, grad).map_err(|e| fail(e, t, None))?;
            pipeline
                .set_group_values(group.id, &group.values)
                .map_err(|e| fail(e, t, None))?;
        }
    }
    result.final_params = groups;
    result.wallclock_s = started.elapsed().as_secs_f64();
    Ok(result)
}

/// Independent runs and their summary statistics.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub runs: Vec<RunResult>,
    /// 1-based iteration the compliance statistics refer to.
    pub checkpoint: usize,
    pub compliance: RunStats,
    pub diversity: f64,
}

/// Runs seeds `seed, seed + 1, ..., seed + n_runs - 1`.
pub fn sweep(config: &RunConfig, n_runs: usize) -> std::result::Result<SweepResult, TrainError> {
    let seeds: Vec<u64> = (0..n_runs as u64).map(|k| config.seed + k).collect();
    sweep_seeds(config, &seeds)
}

/// Runs one training per listed seed, in parallel.
pub fn sweep_seeds(config: &RunConfig, seeds: &[u64]) -> std::result::Result<SweepResult, TrainError> {
    if seeds.len() < 2 {
        return Err(TrainError {
            error: Error::arg("a sweep needs at least two runs"),
            iteration: 0,
            partial: None,
        });
    }
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = config.clone();
            cfg.seed = seed;
            train(&cfg)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    summarize(runs).map_err(|error| TrainError {
        error,
        iteration: 0,
        partial: None,
    })
}

pub fn summarize(runs: Vec<RunResult>) -> Result<SweepResult> {
    let checkpoint = CHECKPOINT.min(runs.iter().map(|r| r.compliance_history.len()).min().unwrap_or(0));
    let values: Vec<f64> = runs.iter().map(|r| r.compliance_at(checkpoint)).collect();
    let compliance = run_stats(&values)?;
    let fields: Vec<&[f64]> = runs.iter().map(|r| r.final_field.as_slice()).collect();
    let diversity = design_diversity(&fields)?;
    Ok(SweepResult {
        runs,
        checkpoint,
        compliance,
        diversity,
    })
}
