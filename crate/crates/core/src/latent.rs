//! Classical latent baseline and the affine projection into decoder space.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Trainable Gaussian latent of length `3 * n_qubits`.
pub fn init_classical(n_qubits: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, Stream::Classical);
    (0..3 * n_qubits)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect()
}

/// `z_p = W z + b` with `W` stored row-major, `d_out x d_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionLayer {
    pub d_out: usize,
    pub d_in: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients of a projection with respect to its input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionGrad {
    pub input: Vec<f64>,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ProjectionLayer {
    /// Uniform(-1/sqrt(d_in), 1/sqrt(d_in)) weights and zero bias.
    pub fn init(d_out: usize, d_in: usize, seed: u64) -> Result<Self> {
        if d_in == 0 || d_out <= d_in {
            return Err(Error::arg(format!(
                "projection must expand: d_out = {d_out}, d_in = {d_in}"
            )));
        }
        let mut rng = stream_rng(seed, Stream::Projection);
        let bound = 1.0 / (d_in as f64).sqrt();
        let weight = (0..d_out * d_in)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Ok(Self {
            d_out,
            d_in,
            weight,
            bias: vec![0.0; d_out],
        })
    }

    pub fn from_parts(d_out: usize, d_in: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weight.len() != d_out * d_in {
            return Err(Error::Dimension {
                context: "projection weight",
                expected: d_out * d_in,
                actual: weight.len(),
            });
        }
        if bias.len() != d_out {
            return Err(Error::Dimension {
                context: "projection bias",
                expected: d_out,
                actual: bias.len(),
            });
        }
        Ok(Self {
            d_out,
            d_in,
            weight,
            bias,
        })
    }

    fn check_input(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.d_in {
            return Err(Error::Dimension {
                context: "projection input",
                expected: self.d_in,
                actual: z.len(),
            });
        }
        Ok(())
    }

    pub fn project(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_input(z)?;
        Ok(self
            .weight
            .chunks_exact(self.d_in)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>())
            .collect())
    }

    pub fn backward(&self, z: &[f64], cotangent: &[f64]) -> Result<ProjectionGrad> {
        self.check_input(z)?;
        if cotangent.len() != self.d_out {
            return Err(Error::Dimension {
                context: "projection cotangent",
                expected: self.d_out,
                actual: cotangent.len(),
            });
        }
        let mut input = vec![0.0; self.d_in];
        let mut weight = vec![0.0; self.weight.len()];
        for ((row, grow), &c) in self
            .weight
            .chunks_exact(self.d_in)
            .zip(weight.chunks_exact_mut(self.d_in))
            .zip(cotangent)
        {
            for k in 0..self.d_in {
                input[k] += row[k] * c;
                grow[k] = c * z[k];
            }
        }
        Ok(ProjectionGrad {
            input,
            weight,
            bias: cotangent.to_vec(),
        })
    }
}
