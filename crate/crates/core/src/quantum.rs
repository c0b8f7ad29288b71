//! Real-amplitude statevector simulation of the RY/CNOT variational circuit.
//!
//! Only RY rotations and CNOTs are supported, so every amplitude stays real and
//! the state is stored as `Vec<f64>`. Qubit 0 is the most-significant bit of
//! the basis index: on two qubits, `CNOT(0 -> 1)` swaps indices 2 and 3.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Register size and number of entangling repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantumConfig {
    pub n_qubits: usize,
    pub n_layers: usize,
}

impl QuantumConfig {
    pub fn new(n_qubits: usize, n_layers: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::arg("n_qubits must be at least 1"));
        }
        if n_qubits > 20 {
            return Err(Error::arg("n_qubits above 20 is not supported"));
        }
        Ok(Self { n_qubits, n_layers })
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Number of rotation angles, `(n_layers + 1) * n_qubits`.
    pub fn n_params(&self) -> usize {
        (self.n_layers + 1) * self.n_qubits
    }

    /// Length of the measured latent vector (Z, X and Y per qubit).
    pub fn latent_dim(&self) -> usize {
        3 * self.n_qubits
    }
}

/// Circuit angles, stored row-major: row `k` is the RY layer applied after
/// the `k`-th entangler (row 0 is the initial layer).
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaParams {
    rows: usize,
    cols: usize,
    angles: Vec<f64>,
}

impl ThetaParams {
    pub fn zeros(cfg: QuantumConfig) -> Self {
        Self {
            rows: cfg.n_layers + 1,
            cols: cfg.n_qubits,
            angles: vec![0.0; cfg.n_params()],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(Error::arg("theta needs at least one non-empty row"));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::Dimension {
                context: "theta row",
                expected: cols,
                actual: bad.len(),
            });
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            angles: rows.concat(),
        })
    }

    pub fn from_flat(cfg: QuantumConfig, angles: Vec<f64>) -> Result<Self> {
        if angles.len() != cfg.n_params() {
            return Err(Error::Dimension {
                context: "theta",
                expected: cfg.n_params(),
                actual: angles.len(),
            });
        }
        Ok(Self {
            rows: cfg.n_layers + 1,
            cols: cfg.n_qubits,
            angles,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, layer: usize, qubit: usize) -> f64 {
        self.angles[layer * self.cols + qubit]
    }

    pub fn row(&self, layer: usize) -> &[f64] {
        &self.angles[layer * self.cols..(layer + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.angles
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.angles
    }

    fn check(&self, cfg: QuantumConfig) -> Result<()> {
        if self.rows != cfg.n_layers + 1 || self.cols != cfg.n_qubits {
            return Err(Error::arg(format!(
                "theta is {}x{}, circuit expects {}x{}",
                self.rows,
                self.cols,
                cfg.n_layers + 1,
                cfg.n_qubits
            )));
        }
        Ok(())
    }
}

/// `R_Y(theta)` as a row-major 2x2 matrix.
pub fn ry_matrix(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    [[c, -s], [s, c]]
}

/// Pauli measurement axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<f64>,
}

impl StateVector {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![0.0; 1 << n_qubits];
        amps[0] = 1.0;
        Self { n_qubits, amps }
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1 << n_qubits;
        if index >= dim {
            return Err(Error::Index {
                what: "basis state",
                index,
                len: dim,
            });
        }
        let mut amps = vec![0.0; dim];
        amps[index] = 1.0;
        Ok(Self { n_qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<f64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::arg(format!(
                "amplitude count {len} is not a power of two"
            )));
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a * a).sum()
    }

    fn mask(&self, qubit: usize) -> Result<usize> {
        if qubit >= self.n_qubits {
            return Err(Error::Index {
                what: "qubit",
                index: qubit,
                len: self.n_qubits,
            });
        }
        Ok(1 << (self.n_qubits - 1 - qubit))
    }

    pub fn apply_ry(&mut self, qubit: usize, theta: f64) -> Result<()> {
        let mask = self.mask(qubit)?;
        let [[c, ms], [s, _]] = ry_matrix(theta);
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let j = i | mask;
                let (a0, a1) = (self.amps[i], self.amps[j]);
                self.amps[i] = c * a0 + ms * a1;
                self.amps[j] = s * a0 + c * a1;
            }
        }
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        if control == target {
            return Err(Error::arg(format!(
                "CNOT control and target are both qubit {control}"
            )));
        }
        let cmask = self.mask(control)?;
        let tmask = self.mask(target)?;
        for i in 0..self.amps.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amps.swap(i, i | tmask);
            }
        }
        Ok(())
    }

    /// CNOT(i -> i+1) for i = 0..n-2, in ascending order.
    pub fn entangle_layer(&mut self) {
        for q in 0..self.n_qubits.saturating_sub(1) {
            self.apply_cnot(q, q + 1)
                .expect("adjacent qubits are in range and distinct");
        }
    }

    fn apply_ry_layer(&mut self, angles: &[f64]) {
        for (q, &theta) in angles.iter().enumerate() {
            self.apply_ry(q, theta).expect("layer width matches register");
        }
    }

    /// `<psi| P_qubit |psi>`. Y is identically zero for real amplitudes.
    pub fn expectation(&self, axis: Axis, qubit: usize) -> Result<f64> {
        let mask = self.mask(qubit)?;
        let value = match axis {
            Axis::Z => self
                .amps
                .iter()
                .enumerate()
                .map(|(i, a)| if i & mask == 0 { a * a } else { -a * a })
                .sum(),
            Axis::X => {
                2.0 * (0..self.amps.len())
                    .filter(|i| i & mask == 0)
                    .map(|i| self.amps[i] * self.amps[i | mask])
                    .sum::<f64>()
            }
            Axis::Y => 0.0,
        };
        Ok(value)
    }
}

/// Prepares `U(theta)|0...0>`: RY layer from row 0, then `n_layers`
/// repetitions of an entangling layer followed by the next RY row.
pub fn run_circuit(cfg: QuantumConfig, theta: &ThetaParams) -> Result<StateVector> {
    theta.check(cfg)?;
    let mut state = StateVector::zero(cfg.n_qubits);
    state.apply_ry_layer(theta.row(0));
    for layer in 1..=cfg.n_layers {
        state.entangle_layer();
        state.apply_ry_layer(theta.row(layer));
    }
    Ok(state)
}

/// Concatenated expectations `[<Z_0>.., <X_0>.., <Y_0>..]`, length `3n`.
pub fn measure_latent(state: &StateVector) -> Vec<f64> {
    let n = state.n_qubits();
    let mut out = Vec::with_capacity(3 * n);
    for axis in [Axis::Z, Axis::X, Axis::Y] {
        for q in 0..n {
            out.push(state.expectation(axis, q).expect("qubit in range"));
        }
    }
    out
}

/// Circuit followed by measurement.
pub fn latent_from_theta(cfg: QuantumConfig, theta: &ThetaParams) -> Result<Vec<f64>> {
    Ok(measure_latent(&run_circuit(cfg, theta)?))
}

/// Vector-Jacobian product of the latent with respect to every angle, by the
/// two-term parameter-shift rule. Returns a flat gradient in `theta` layout.
pub fn param_shift_grad(
    cfg: QuantumConfig,
    theta: &ThetaParams,
    cotangent: &[f64],
) -> Result<Vec<f64>> {
    theta.check(cfg)?;
    if cotangent.len() != cfg.latent_dim() {
        return Err(Error::Dimension {
            context: "latent cotangent",
            expected: cfg.latent_dim(),
            actual: cotangent.len(),
        });
    }
    let mut grad = vec![0.0; cfg.n_params()];
    if cotangent.iter().all(|&c| c == 0.0) {
        return Ok(grad);
    }
    let contract = |th: &ThetaParams| -> Result<f64> {
        let z = latent_from_theta(cfg, th)?;
        Ok(z.iter().zip(cotangent).map(|(a, b)| a * b).sum())
    };
    let mut shifted = theta.clone();
    for (j, g) in grad.iter_mut().enumerate() {
        let base = theta.angles[j];
        shifted.angles[j] = base + FRAC_PI_2;
        let plus = contract(&shifted)?;
        shifted.angles[j] = base - FRAC_PI_2;
        let minus = contract(&shifted)?;
        shifted.angles[j] = base;
        *g = 0.5 * (plus - minus);
    }
    Ok(grad)
}
