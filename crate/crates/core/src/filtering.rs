//! Conic density filter followed by a tanh Heaviside projection.

use crate::error::{Error, Result};
use crate::grid::DensityField;

/// Projection threshold.
pub const ETA: f64 = 0.5;

/// Normalized cone weights `max(0, r_min - dist)` for every element.
#[derive(Debug, Clone)]
pub struct FilterKernel {
    nx: usize,
    ny: usize,
    r_min: f64,
    /// `(neighbour, weight)` per element, weights summing to one.
    rows: Vec<Vec<(usize, f64)>>,
}

impl FilterKernel {
    pub fn new(nx: usize, ny: usize, r_min: f64) -> Result<Self> {
        if !(r_min > 0.0) {
            return Err(Error::arg(format!("filter radius must be positive, got {r_min}")));
        }
        let reach = r_min.ceil() as isize;
        let mut rows = Vec::with_capacity(nx * ny);
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                let mut row = Vec::new();
                for dj in -reach..=reach {
                    for di in -reach..=reach {
                        let (ii, jj) = (i + di, j + dj);
                        if ii < 0 || jj < 0 || ii >= nx as isize || jj >= ny as isize {
                            continue;
                        }
                        let w = r_min - ((di * di + dj * dj) as f64).sqrt();
                        if w > 0.0 {
                            row.push((jj as usize * nx + ii as usize, w));
                        }
                    }
                }
                let total: f64 = row.iter().map(|(_, w)| w).sum();
                row.iter_mut().for_each(|(_, w)| *w /= total);
                rows.push(row);
            }
        }
        Ok(Self { nx, ny, r_min, rows })
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn weights(&self, element: usize) -> &[(usize, f64)] {
        &self.rows[element]
    }

    fn check(&self, rho: &DensityField) -> Result<()> {
        if rho.nx() != self.nx || rho.ny() != self.ny {
            return Err(Error::arg(format!(
                "field is {}x{}, kernel was built for {}x{}",
                rho.nx(),
                rho.ny(),
                self.nx,
                self.ny
            )));
        }
        Ok(())
    }

    pub fn apply(&self, rho: &DensityField) -> Result<DensityField> {
        self.check(rho)?;
        let r = rho.as_slice();
        let out = self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(k, w)| w * r[k]).sum())
            .collect();
        DensityField::from_vec(self.nx, self.ny, out)
    }

    /// `W^T v`.
    pub fn apply_transpose(&self, v: &DensityField) -> Result<DensityField> {
        self.check(v)?;
        let mut out = DensityField::filled(self.nx, self.ny, 0.0);
        let o = out.as_mut_slice();
        for (e, row) in self.rows.iter().enumerate() {
            let ve = v.as_slice()[e];
            for &(k, w) in row {
                o[k] += w * ve;
            }
        }
        Ok(out)
    }
}

/// Sharpness of the projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavisideParams {
    pub beta: f64,
    pub eta: f64,
}

impl HeavisideParams {
    pub fn new(beta: f64) -> Self {
        Self { beta, eta: ETA }
    }

    fn denom(&self) -> f64 {
        (self.beta * self.eta).tanh() + (self.beta * (1.0 - self.eta)).tanh()
    }

    pub fn project(&self, x: f64) -> f64 {
        ((self.beta * self.eta).tanh() + (self.beta * (x - self.eta)).tanh()) / self.denom()
    }

    pub fn slope(&self, x: f64) -> f64 {
        let t = (self.beta * (x - self.eta)).tanh();
        self.beta * (1.0 - t * t) / self.denom()
    }
}

/// `beta_H` doubles every `period` iterations from 1 up to `cap`.
pub fn heaviside_beta(t: usize, period: usize, cap: f64) -> f64 {
    let doublings = (t / period.max(1)).min(63) as i32;
    2f64.powi(doublings).min(cap)
}

pub fn heaviside_project(rho: &DensityField, params: HeavisideParams) -> DensityField {
    rho.map(|x| params.project(x))
}

/// Filtered and projected field with what the backward pass needs.
#[derive(Debug, Clone)]
pub struct FilterChain {
    pub filtered: DensityField,
    pub projected: DensityField,
    params: HeavisideParams,
}

pub fn filter_chain(
    rho: &DensityField,
    kernel: &FilterKernel,
    params: HeavisideParams,
) -> Result<FilterChain> {
    let filtered = kernel.apply(rho)?;
    let projected = heaviside_project(&filtered, params);
    Ok(FilterChain {
        filtered,
        projected,
        params,
    })
}

/// `W^T (dproj/dfiltered * cotangent)`.
pub fn filter_chain_backward(
    chain: &FilterChain,
    kernel: &FilterKernel,
    cotangent: &DensityField,
) -> Result<DensityField> {
    if !chain.filtered.same_shape(cotangent) {
        return Err(Error::arg("cotangent shape does not match filter chain"));
    }
    let scaled = DensityField::from_vec(
        cotangent.nx(),
        cotangent.ny(),
        chain
            .filtered
            .as_slice()
            .iter()
            .zip(cotangent.as_slice())
            .map(|(&x, &c)| c * chain.params.slope(x))
            .collect(),
    )?;
    kernel.apply_transpose(&scaled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_are_normalized() {
        let k = FilterKernel::new(6, 4, 1.5).unwrap();
        for e in 0..24 {
            let s: f64 = k.weights(e).iter().map(|(_, w)| w).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-15);
            assert!(k.weights(e).iter().all(|&(_, w)| w >= 0.0));
        }
        assert!(FilterKernel::new(2, 2, 0.0).is_err());
    }

    #[test]
    fn constant_field_unchanged() {
        let k = FilterKernel::new(7, 5, 2.5).unwrap();
        let f = DensityField::filled(7, 5, 0.42);
        for v in k.apply(&f).unwrap().as_slice() {
            assert_abs_diff_eq!(*v, 0.42, epsilon = 1e-15);
        }
    }

    #[test]
    fn small_radius_is_identity() {
        let k = FilterKernel::new(4, 3, 1.0).unwrap();
        let f = DensityField::from_vec(4, 3, (0..12).map(|v| v as f64 / 11.0).collect()).unwrap();
        assert_eq!(k.apply(&f).unwrap(), f);
    }

    #[test]
    fn impulse_response() {
        // r = 1.5 on 5x5: self weight 1.5, edge neighbours 0.5,
        // diagonal neighbours 1.5 - sqrt(2); interior total 1.5 + 4 * 0.5 + 4 * d.
        let k = FilterKernel::new(5, 5, 1.5).unwrap();
        let mut f = DensityField::filled(5, 5, 0.0);
        f.as_mut_slice()[12] = 1.0;
        let out = k.apply(&f).unwrap();
        let d = 1.5 - 2f64.sqrt();
        let total = 1.5 + 2.0 + 4.0 * d;
        assert_abs_diff_eq!(out.get(2, 2), 1.5 / total, epsilon = 1e-15);
        assert_abs_diff_eq!(out.get(1, 2), 0.5 / total, epsilon = 1e-15);
        assert_abs_diff_eq!(out.get(3, 3), d / total, epsilon = 1e-15);
        assert_eq!(out.get(0, 2), 0.0);
        assert_abs_diff_eq!(out.as_slice().iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn interior_mass_is_preserved() {
        let k = FilterKernel::new(8, 7, 1.5).unwrap();
        let mut f = DensityField::filled(8, 7, 0.0);
        for (i, j, v) in [(2, 2, 0.3), (3, 4, 0.9), (5, 3, 0.5), (4, 4, 0.1)] {
            let idx = f.index(i, j);
            f.as_mut_slice()[idx] = v;
        }
        let out = k.apply(&f).unwrap();
        assert_abs_diff_eq!(out.mean(), f.mean(), epsilon = 1e-12);
    }

    #[test]
    fn heaviside_examples() {
        for beta in [0.5, 1.0, 8.0, 64.0] {
            let p = HeavisideParams::new(beta);
            assert_abs_diff_eq!(p.project(0.5), 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(p.project(0.0), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(p.project(1.0), 1.0, epsilon = 1e-15);
        }
        let soft = HeavisideParams::new(0.01);
        for k in 0..=10 {
            let x = k as f64 / 10.0;
            assert_abs_diff_eq!(soft.project(x), x, epsilon = 1e-3);
        }
        let p = HeavisideParams::new(8.0);
        let mut prev = -1.0;
        for k in 0..=100 {
            let y = p.project(k as f64 / 100.0);
            assert!(y > prev);
            prev = y;
        }
    }

    #[test]
    fn beta_continuation() {
        assert_eq!(heaviside_beta(0, 50, 64.0), 1.0);
        assert_eq!(heaviside_beta(49, 50, 64.0), 1.0);
        assert_eq!(heaviside_beta(50, 50, 64.0), 2.0);
        assert_eq!(heaviside_beta(300, 50, 64.0), 64.0);
        assert_eq!(heaviside_beta(499, 50, 64.0), 64.0);
    }

    #[test]
    fn backward_edge_cases() {
        let k = FilterKernel::new(5, 4, 1.5).unwrap();
        let rho = DensityField::from_vec(5, 4, (0..20).map(|v| 0.05 + v as f64 * 0.045).collect())
            .unwrap();
        let chain = filter_chain(&rho, &k, HeavisideParams::new(4.0)).unwrap();
        let zero = filter_chain_backward(&chain, &k, &DensityField::filled(5, 4, 0.0)).unwrap();
        assert!(zero.as_slice().iter().all(|&v| v == 0.0));

        let id = FilterKernel::new(5, 4, 1.0).unwrap();
        let params = HeavisideParams::new(4.0);
        let chain = filter_chain(&rho, &id, params).unwrap();
        let cot = DensityField::filled(5, 4, 1.0);
        let g = filter_chain_backward(&chain, &id, &cot).unwrap();
        for (gv, &x) in g.as_slice().iter().zip(rho.as_slice()) {
            assert_abs_diff_eq!(*gv, params.slope(x), epsilon = 1e-15);
        }
    }
}
