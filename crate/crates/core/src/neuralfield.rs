//! Coordinate-based density decoder.
//!
//! Element centres are lifted with a fixed random Fourier basis, concatenated
//! with the broadcast latent code and pushed through a 4-layer MLP
//! (`in -> 64 -> 128 -> 64 -> 1`, ReLU hidden units, sigmoid output). All
//! grid points are evaluated as one batch with points stored as columns.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::DensityField;
use crate::rng::{stream_rng, Stream};

pub const HIDDEN_SIZES: [usize; 3] = [64, 128, 64];

/// Fixed `m x 2` frequency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMatrix {
    rows: Vec<[f64; 2]>,
}

impl FrequencyMatrix {
    /// Magnitudes uniform in `[f_min, f_max]` with independent random signs.
    pub fn sample(m: usize, f_min: f64, f_max: f64, seed: u64) -> Result<Self> {
        if !(f_min > 0.0 && f_min <= f_max && f_max.is_finite()) {
            return Err(Error::arg(format!(
                "frequency bounds must satisfy 0 < f_min <= f_max, got [{f_min}, {f_max}]"
            )));
        }
        let mut rng = stream_rng(seed, Stream::Frequencies);
        let mut draw = || {
            let mag = if f_min == f_max {
                f_min
            } else {
                rng.random_range(f_min..=f_max)
            };
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        };
        let rows = (0..m).map(|_| [draw(), draw()]).collect();
        Ok(Self { rows })
    }

    pub fn from_rows(rows: Vec<[f64; 2]>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// `[sin(2 pi B x), cos(2 pi B x)]`, length `2m`.
    pub fn fourier_map(&self, x: [f64; 2]) -> Vec<f64> {
        let m = self.rows.len();
        let mut out = vec![0.0; 2 * m];
        for (k, b) in self.rows.iter().enumerate() {
            let (s, c) = (TAU * (b[0] * x[0] + b[1] * x[1])).sin_cos();
            out[k] = s;
            out[m + k] = c;
        }
        out
    }
}

/// Normalized element-centre coordinates in the [`DensityField`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateGrid {
    pub nx: usize,
    pub ny: usize,
    pub coords: Vec<[f64; 2]>,
}

impl CoordinateGrid {
    pub fn element_centres(nx: usize, ny: usize) -> Self {
        let mut coords = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                coords.push([(i as f64 + 0.5) / nx as f64, (j as f64 + 0.5) / ny as f64]);
            }
        }
        Self { nx, ny, coords }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Fourier features of every point as a `2m x N` matrix.
    pub fn features(&self, freqs: &FrequencyMatrix) -> DMatrix<f64> {
        let d = 2 * freqs.m();
        let mut out = DMatrix::zeros(d, self.coords.len());
        for (p, &x) in self.coords.iter().enumerate() {
            for (r, v) in freqs.fourier_map(x).into_iter().enumerate() {
                out[(r, p)] = v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out x in`
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: DMatrix::zeros(fan_out, fan_in),
            bias: DVector::zeros(fan_out),
        }
    }
}

/// MLP parameters. The same type carries gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderWeights {
    pub latent_dim: usize,
    pub feature_dim: usize,
    pub layers: Vec<Dense>,
}

fn layer_sizes(input: usize) -> [usize; 5] {
    [input, HIDDEN_SIZES[0], HIDDEN_SIZES[1], HIDDEN_SIZES[2], 1]
}

impl DecoderWeights {
    pub fn zeros(latent_dim: usize, feature_dim: usize) -> Self {
        let sizes = layer_sizes(latent_dim + feature_dim);
        Self {
            latent_dim,
            feature_dim,
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
    pub fn init(latent_dim: usize, feature_dim: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, Stream::Decoder);
        let mut out = Self::zeros(latent_dim, feature_dim);
        for layer in &mut out.layers {
            let bound = 1.0 / (layer.weight.ncols() as f64).sqrt();
            for w in layer.weight.iter_mut() {
                *w = rng.random_range(-bound..=bound);
            }
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(l.bias.as_slice());
        }
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Dimension {
                context: "decoder parameters",
                expected: self.n_params(),
                actual: flat.len(),
            });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let n = l.weight.len();
            l.weight.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
            let n = l.bias.len();
            l.bias.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Runs the MLP on every column of `features`, keeping activations for
    /// the backward pass.
    pub fn forward(&self, z_p: &[f64], features: &DMatrix<f64>) -> Result<DecoderCache> {
        if z_p.len() != self.latent_dim {
            return Err(Error::Dimension {
                context: "decoder latent",
                expected: self.latent_dim,
                actual: z_p.len(),
            });
        }
        if features.nrows() != self.feature_dim {
            return Err(Error::Dimension {
                context: "decoder features",
                expected: self.feature_dim,
                actual: features.nrows(),
            });
        }
        let first = &self.layers[0];
        let w_latent = first.weight.columns(0, self.latent_dim);
        let w_feat = first.weight.columns(self.latent_dim, self.feature_dim);
        // The latent is shared by every point, so its contribution is a bias.
        let shared = w_latent * DVector::from_column_slice(z_p) + &first.bias;
        let mut pre = w_feat * features;
        add_column(&mut pre, &shared);
        let mut hidden = Vec::with_capacity(3);
        relu_in_place(&mut pre);
        hidden.push(pre);
        for layer in &self.layers[1..3] {
            let mut h = &layer.weight * hidden.last().unwrap();
            add_column(&mut h, &layer.bias);
            relu_in_place(&mut h);
            hidden.push(h);
        }
        let last = &self.layers[3];
        let mut logits = &last.weight * hidden.last().unwrap();
        add_column(&mut logits, &last.bias);
        let output = logits.iter().map(|&a| sigmoid(a)).collect();
        Ok(DecoderCache {
            z_p: z_p.to_vec(),
            hidden,
            output,
        })
    }

    /// Reverse pass given `dL/d rho` for the raw sigmoid output.
    pub fn backward(
        &self,
        cache: &DecoderCache,
        features: &DMatrix<f64>,
        cotangent: &[f64],
    ) -> Result<(DecoderWeights, Vec<f64>)> {
        let n = cache.output.len();
        if cotangent.len() != n {
            return Err(Error::Dimension {
                context: "decoder cotangent",
                expected: n,
                actual: cotangent.len(),
            });
        }
        let mut grads = DecoderWeights::zeros(self.latent_dim, self.feature_dim);
        // sigmoid'
        let mut delta = DMatrix::from_iterator(
            1,
            n,
            cache
                .output
                .iter()
                .zip(cotangent)
                .map(|(&r, &c)| c * r * (1.0 - r)),
        );
        for k in (1..4).rev() {
            let input = &cache.hidden[k - 1];
            grads.layers[k].weight = &delta * input.transpose();
            grads.layers[k].bias = row_sums(&delta);
            let mut back = self.layers[k].weight.transpose() * &delta;
            for (d, &h) in back.iter_mut().zip(input.iter()) {
                if h <= 0.0 {
                    *d = 0.0;
                }
            }
            delta = back;
        }
        let summed = row_sums(&delta);
        let mut w0 = DMatrix::zeros(HIDDEN_SIZES[0], self.latent_dim + self.feature_dim);
        w0.columns_mut(0, self.latent_dim)
            .copy_from(&(&summed * DVector::from_column_slice(&cache.z_p).transpose()));
        w0.columns_mut(self.latent_dim, self.feature_dim)
            .copy_from(&(&delta * features.transpose()));
        grads.layers[0].weight = w0;
        grads.layers[0].bias = summed.clone();
        let dz = self.layers[0].weight.columns(0, self.latent_dim).transpose() * summed;
        Ok((grads, dz.as_slice().to_vec()))
    }
}

/// Activations retained from a forward pass.
#[derive(Debug, Clone)]
pub struct DecoderCache {
    z_p: Vec<f64>,
    hidden: Vec<DMatrix<f64>>,
    /// Raw densities in (0, 1), one per point.
    pub output: Vec<f64>,
}

fn add_column(m: &mut DMatrix<f64>, v: &DVector<f64>) {
    for mut col in m.column_iter_mut() {
        col += v;
    }
}

fn relu_in_place(m: &mut DMatrix<f64>) {
    m.iter_mut().for_each(|v| *v = v.max(0.0));
}

fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(m.nrows());
    for col in m.column_iter() {
        out += col;
    }
    out
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `1 / (1 + exp(-beta (rho - 0.5)))`, entrywise.
pub fn sharpen(rho: &DensityField, beta: f64) -> DensityField {
    rho.map(|r| sigmoid(beta * (r - 0.5)))
}

/// Entrywise derivative of [`sharpen`] evaluated from its output.
pub fn sharpen_slope(sharpened: f64, beta: f64) -> f64 {
    beta * sharpened * (1.0 - sharpened)
}

/// Raw decoder field on `grid`.
pub fn decode(
    weights: &DecoderWeights,
    z_p: &[f64],
    grid: &CoordinateGrid,
    freqs: &FrequencyMatrix,
) -> Result<DensityField> {
    let cache = weights.forward(z_p, &grid.features(freqs))?;
    DensityField::from_vec(grid.nx, grid.ny, cache.output)
}

/// Gradients of `sharpen(decode(..), beta)` given `dL/d rho_beta`.
pub fn decode_backward(
    weights: &DecoderWeights,
    z_p: &[f64],
    grid: &CoordinateGrid,
    freqs: &FrequencyMatrix,
    beta: f64,
    cotangent: &DensityField,
) -> Result<(DecoderWeights, Vec<f64>)> {
    let features = grid.features(freqs);
    let cache = weights.forward(z_p, &features)?;
    let raw_cot: Vec<f64> = cache
        .output
        .iter()
        .zip(cotangent.as_slice())
        .map(|(&r, &c)| c * sharpen_slope(sigmoid(beta * (r - 0.5)), beta))
        .collect();
    weights.backward(&cache, &features, &raw_cot)
}
