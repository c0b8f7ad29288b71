//! Self-checks exposed through the CLI: the worked two-qubit circuit example
//! and finite-difference comparisons for every analytic gradient.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Encoding, RunConfig};
use crate::error::Result;
use crate::fem::{Benchmark, FemProblem, Material, Mesh};
use crate::grid::DensityField;
use crate::loss::{bin_penalty, h1_penalty, sym_penalty, tv_penalty, vol_penalty};
use crate::optimize::{GroupId, Pipeline};
use crate::quantum::{latent_from_theta, measure_latent, param_shift_grad, run_circuit, QuantumConfig, StateVector, ThetaParams};

/// Published four-decimal values of the worked example.
pub const REFERENCE_LAYER1: [f64; 4] = [0.8001, 0.3308, 0.4619, 0.1913];
pub const REFERENCE_CNOT: [f64; 4] = [0.8001, 0.3308, 0.1913, 0.4619];
pub const REFERENCE_FINAL: [f64; 4] = [0.6259, 0.4143, 0.2083, 0.6270];
/// `[z0, z1, x0, x1, y0, y1]`
pub const REFERENCE_EXPECTATIONS: [f64; 6] = [0.3914, -0.0773, 0.7799, 0.7802, 0.0, 0.0];
pub const REFERENCE_TOL: f64 = 5e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub computed: f64,
    pub expected: f64,
    pub tol: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        (self.computed - self.expected).abs() <= self.tol
    }
}

pub fn worked_example_theta() -> ThetaParams {
    ThetaParams::from_rows(&[vec![PI / 3.0, PI / 4.0], vec![PI / 6.0, PI / 5.0]])
        .expect("static shape")
}

/// Every intermediate amplitude and expectation of the two-qubit example.
pub fn verify_worked_example() -> Result<Vec<Check>> {
    let theta = worked_example_theta();
    let mut state = StateVector::zero(2);
    state.apply_ry(0, theta.get(0, 0))?;
    state.apply_ry(1, theta.get(0, 1))?;
    let layer1 = state.clone();
    state.apply_cnot(0, 1)?;
    let after_cnot = state.clone();
    let cfg = QuantumConfig::new(2, 1)?;
    let fin = run_circuit(cfg, &theta)?;
    let latent = measure_latent(&fin);

    let mut checks = Vec::new();
    let mut push = |stage: &str, computed: &[f64], expected: &[f64], labels: &[&str]| {
        for ((c, e), l) in computed.iter().zip(expected).zip(labels) {
            checks.push(Check {
                name: format!("{stage} {l}"),
                computed: *c,
                expected: *e,
                tol: REFERENCE_TOL,
            });
        }
    };
    let amps = ["|00>", "|01>", "|10>", "|11>"];
    push("layer1", layer1.amplitudes(), &REFERENCE_LAYER1, &amps);
    push("cnot", after_cnot.amplitudes(), &REFERENCE_CNOT, &amps);
    push("final", fin.amplitudes(), &REFERENCE_FINAL, &amps);
    push(
        "expectation",
        &latent,
        &REFERENCE_EXPECTATIONS,
        &["z0", "z1", "x0", "x1", "y0", "y1"],
    );
    Ok(checks)
}

/// Largest finite-difference discrepancy of one gradient suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub checked: usize,
    pub max_error: f64,
    pub tol: f64,
    pub all_nonpositive: Option<bool>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tol && self.all_nonpositive != Some(false)
    }
}

fn central<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// `|a - b| / max(|b|, floor)`.
fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

/// Parameter shift against central differences (h = 1e-5), absolute error.
pub fn check_param_shift(n_circuits: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_error: f64 = 0.0;
    let mut checked = 0;
    let h = 1e-5;
    for _ in 0..n_circuits {
        let cfg = QuantumConfig::new(rng.random_range(1..=5), rng.random_range(0..=5))?;
        let angles = (0..cfg.n_params()).map(|_| rng.random_range(-PI..PI) * 2.0).collect();
        let theta = ThetaParams::from_flat(cfg, angles)?;
        let cot: Vec<f64> = (0..cfg.latent_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grad = param_shift_grad(cfg, &theta, &cot)?;
        for (j, g) in grad.iter().enumerate() {
            let fd = central(
                |x| {
                    let mut t = theta.clone();
                    t.as_mut_slice()[j] = x;
                    let z = latent_from_theta(cfg, &t).expect("valid circuit");
                    z.iter().zip(&cot).map(|(a, b)| a * b).sum()
                },
                theta.as_slice()[j],
                h,
            );
            max_error = max_error.max((g - fd).abs());
            checked += 1;
        }
    }
    Ok(SuiteReport {
        name: "parameter shift vs finite differences".into(),
        checked,
        max_error,
        tol: 1e-6,
        all_nonpositive: None,
    })
}

/// Adjoint compliance sensitivity on a 4x2 tip cantilever (h = 1e-6).
pub fn check_fem_sensitivity(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mesh = Mesh::new(4, 2)?;
    let problem = FemProblem::build(Benchmark::TipCantilever, mesh, Material::default())?;
    let rho = DensityField::from_vec(4, 2, (0..8).map(|_| rng.random_range(0.2..=1.0)).collect())?;
    let sol = problem.solve(&rho)?;
    let sens = problem.compliance_sensitivity(&rho, &sol.u)?;
    let h = 1e-6;
    let mut max_error: f64 = 0.0;
    for e in 0..rho.len() {
        let fd = central(
            |x| {
                let mut r = rho.clone();
                r.as_mut_slice()[e] = x;
                problem.solve(&r).expect("solvable").compliance
            },
            rho.as_slice()[e],
            h,
        );
        max_error = max_error.max(rel_err(sens.as_slice()[e], fd, 1e-12));
    }
    Ok(SuiteReport {
        name: "FEM adjoint sensitivity vs finite differences".into(),
        checked: rho.len(),
        max_error,
        tol: 1e-4,
        all_nonpositive: Some(sens.as_slice().iter().all(|&s| s <= 0.0)),
    })
}

type Penalty = fn(&DensityField) -> (f64, DensityField);

/// Each penalty gradient on a random 5x4 field (h = 1e-6), relative error.
pub fn check_penalties(seed: u64) -> Result<Vec<SuiteReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = DensityField::from_vec(5, 4, (0..20).map(|_| rng.random_range(0.05..0.95)).collect())?;
    let suites: [(&str, Penalty); 5] = [
        ("volume", |r| vol_penalty(r, 0.4, 3.0)),
        ("binarization", |r| bin_penalty(r, 2.0, 20.0)),
        ("total variation", |r| tv_penalty(r, 0.7, 1.0, 1.0)),
        ("H1", |r| h1_penalty(r, 0.3, 1.0, 1.0)),
        ("symmetry", |r| sym_penalty(r, 0.2)),
    ];
    let h = 1e-6;
    let mut reports = Vec::new();
    for (name, f) in suites {
        let (_, grad) = f(&rho);
        let scale = grad.as_slice().iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let mut max_error: f64 = 0.0;
        for e in 0..rho.len() {
            let fd = central(
                |x| {
                    let mut r = rho.clone();
                    r.as_mut_slice()[e] = x;
                    f(&r).0
                },
                rho.as_slice()[e],
                h,
            );
            max_error = max_error.max(rel_err(grad.as_slice()[e], fd, 1e-3 * scale + 1e-12));
        }
        reports.push(SuiteReport {
            name: format!("{name} penalty gradient"),
            checked: rho.len(),
            max_error,
            tol: 1e-6,
            all_nonpositive: None,
        });
    }
    Ok(reports)
}

/// Small end-to-end configuration: 6x3 mesh, 2 qubits.
pub fn small_pipeline_config(encoding: Encoding, seed: u64) -> RunConfig {
    RunConfig {
        encoding,
        n_qubits: 2,
        n_layers: 2,
        nx: 6,
        ny: 3,
        iterations: 100,
        seed,
        ..RunConfig::default()
    }
}

/// Whole-pipeline gradients at `t / T` for the latent group and a strided
/// subset of decoder parameters. Relative error with a floor of 1e-2 times
/// the group's largest finite-difference magnitude.
pub fn check_pipeline(config: &RunConfig, fractions: &[f64], decoder_samples: usize) -> Result<Vec<SuiteReport>> {
    let mut pipeline = Pipeline::new(config)?;
    let c0 = pipeline.forward(&pipeline.coefficients(0)?)?.compliance();
    let latent_group = match config.encoding {
        Encoding::Quantum => GroupId::Theta,
        Encoding::Classical => GroupId::ZC,
    };
    let mut reports = Vec::new();
    for &frac in fractions {
        let t = ((frac * config.iterations as f64).round() as usize).min(config.iterations - 1);
        let coeffs = pipeline.coefficients(t)?;
        let step = pipeline.step_with(&coeffs, Some(c0))?;
        for (id, h) in [(latent_group, 1e-5), (GroupId::Decoder, 1e-6)] {
            let analytic = step.grads.group(id).expect("group present").to_vec();
            let base = pipeline.group_values(id).expect("group present");
            let stride = match id {
                GroupId::Decoder => (base.len() / decoder_samples.max(1)).max(1),
                _ => 1,
            };
            let mut pairs = Vec::new();
            for k in (0..base.len()).step_by(stride) {
                let mut v = base.clone();
                v[k] = base[k] + h;
                pipeline.set_group_values(id, &v)?;
                let up = pipeline.loss_at(&coeffs, c0)?;
                v[k] = base[k] - h;
                pipeline.set_group_values(id, &v)?;
                let dn = pipeline.loss_at(&coeffs, c0)?;
                pairs.push((analytic[k], (up - dn) / (2.0 * h)));
            }
            pipeline.set_group_values(id, &base)?;
            let scale = pairs.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
            let max_error = pairs
                .iter()
                .map(|&(a, fd)| rel_err(a, fd, 1e-2 * scale + 1e-12))
                .fold(0.0, f64::max);
            reports.push(SuiteReport {
                name: format!("pipeline d loss / d {} at t/T = {frac}", id.name()),
                checked: pairs.len(),
                max_error,
                tol: 1e-3,
                all_nonpositive: None,
            });
        }
    }
    Ok(reports)
}

/// Every finite-difference suite with its default size.
pub fn gradcheck_all(seed: u64) -> Result<Vec<SuiteReport>> {
    let mut out = vec![check_param_shift(100, seed)?, check_fem_sensitivity(seed)?];
    out.extend(check_penalties(seed)?);
    for enc in [Encoding::Quantum, Encoding::Classical] {
        out.extend(check_pipeline(&small_pipeline_config(enc, seed), &[0.0, 0.5, 0.9], usize::MAX)?);
    }
    Ok(out)
}
