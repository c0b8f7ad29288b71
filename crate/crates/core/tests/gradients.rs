//! Finite-difference checks of every analytic gradient in the chain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qtopo::config::Encoding;
use qtopo::diagnostics::{check_fem_sensitivity, check_param_shift, check_penalties, check_pipeline, small_pipeline_config};
use qtopo::grid::DensityField;
use qtopo::latent::ProjectionLayer;
use qtopo::neuralfield::{decode, decode_backward, sharpen, CoordinateGrid, DecoderWeights, FrequencyMatrix};

fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

#[test]
fn decoder_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = CoordinateGrid::element_centres(4, 2);
    let h = 1e-5;
    for instance in 0..20 {
        let freqs = FrequencyMatrix::sample(3, 0.5, 4.0, instance).unwrap();
        let latent_dim = 5;
        let mut weights = DecoderWeights::init(latent_dim, 2 * freqs.m(), instance);
        let mut flat = weights.flatten();
        for v in flat.iter_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
        weights.assign_flat(&flat).unwrap();
        let z_p: Vec<f64> = (0..latent_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let beta = rng.random_range(1.0..10.0);
        let cot = DensityField::from_vec(4, 2, (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let objective = |w: &DecoderWeights, z: &[f64]| -> f64 {
            let rho = sharpen(&decode(w, z, &grid, &freqs).unwrap(), beta);
            rho.as_slice().iter().zip(cot.as_slice()).map(|(a, b)| a * b).sum()
        };
        let (dw, dz) = decode_backward(&weights, &z_p, &grid, &freqs, beta, &cot).unwrap();

        let analytic = dw.flatten();
        let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        for k in (instance as usize..flat.len()).step_by(17) {
            let mut w = weights.clone();
            let mut f = flat.clone();
            f[k] = flat[k] + h;
            w.assign_flat(&f).unwrap();
            let up = objective(&w, &z_p);
            f[k] = flat[k] - h;
            w.assign_flat(&f).unwrap();
            let dn = objective(&w, &z_p);
            let fd = (up - dn) / (2.0 * h);
            let err = rel(analytic[k], fd, 1e-3 * scale);
            assert!(err < 1e-5, "instance {instance}, param {k}: {} vs {fd}", analytic[k]);
        }
        for k in 0..latent_dim {
            let mut z = z_p.clone();
            z[k] = z_p[k] + h;
            let up = objective(&weights, &z);
            z[k] = z_p[k] - h;
            let dn = objective(&weights, &z);
            let fd = (up - dn) / (2.0 * h);
            assert!(rel(dz[k], fd, 1e-8) < 1e-5, "instance {instance}, z_p[{k}]: {} vs {fd}", dz[k]);
        }

        let doubled = cot.map(|c| 2.0 * c);
        let (dw2, dz2) = decode_backward(&weights, &z_p, &grid, &freqs, beta, &doubled).unwrap();
        for (a, b) in dw2.flatten().iter().zip(&analytic) {
            assert!((a - 2.0 * b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        for (a, b) in dz2.iter().zip(&dz) {
            assert!((a - 2.0 * b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}

#[test]
fn projection_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..10 {
        let layer = ProjectionLayer::init(12, 4, seed).unwrap();
        let mut layer = ProjectionLayer::from_parts(
            12,
            4,
            layer.weight.clone(),
            (0..12).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let z: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cot: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = layer.backward(&z, &cot).unwrap();
        let objective = |l: &ProjectionLayer, z: &[f64]| -> f64 {
            l.project(z).unwrap().iter().zip(&cot).map(|(a, b)| a * b).sum()
        };
        let h = 1e-6;
        for k in 0..4 {
            let mut zp = z.clone();
            zp[k] += h;
            let mut zm = z.clone();
            zm[k] -= h;
            let fd = (objective(&layer, &zp) - objective(&layer, &zm)) / (2.0 * h);
            assert!((g.input[k] - fd).abs() < 1e-8);
        }
        for k in 0..layer.weight.len() {
            let w0 = layer.weight[k];
            layer.weight[k] = w0 + h;
            let up = objective(&layer, &z);
            layer.weight[k] = w0 - h;
            let dn = objective(&layer, &z);
            layer.weight[k] = w0;
            assert!((g.weight[k] - (up - dn) / (2.0 * h)).abs() < 1e-8);
        }
        assert_eq!(g.bias, cot);
    }
}

#[test]
fn parameter_shift_over_random_circuits() {
    let r = check_param_shift(100, 3).unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn fem_sensitivity_several_seeds() {
    for seed in 0..5 {
        let r = check_fem_sensitivity(seed).unwrap();
        assert!(r.passed(), "{r:?}");
    }
}

#[test]
fn penalty_gradients() {
    for r in check_penalties(8).unwrap() {
        assert!(r.passed(), "{r:?}");
    }
}

#[test]
fn pipeline_gradients_quantum_and_classical() {
    for enc in [Encoding::Quantum, Encoding::Classical] {
        for r in check_pipeline(&small_pipeline_config(enc, 1), &[0.0, 0.5, 0.9], 300).unwrap() {
            assert!(r.passed(), "{r:?}");
        }
    }
}

#[test]
fn pipeline_gradients_filtering_and_symmetry() {
    let mut cfg = small_pipeline_config(Encoding::Quantum, 2);
    cfg.filtering = true;
    cfg.iterations = 300;
    for r in check_pipeline(&cfg, &[0.0, 0.5, 0.9], 300).unwrap() {
        assert!(r.passed(), "filtering: {r:?}");
    }
    let mut cfg = small_pipeline_config(Encoding::Classical, 2);
    cfg.symmetry = true;
    for r in check_pipeline(&cfg, &[0.0, 0.5, 0.9], 300).unwrap() {
        assert!(r.passed(), "symmetry: {r:?}");
    }
}
