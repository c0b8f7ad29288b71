//! Regularization penalties on the density grid, their gradients, and the
//! continuation schedules for every coefficient.
//!
//! Each penalty returns its value and `d value / d rho` as a field of the same
//! shape. Differences along x run over `i`, along y over `j`.

use crate::error::{Error, Result};
use crate::grid::DensityField;

/// Smoothing used for `|d|` in the TV gradient.
pub const TV_EPS: f64 = 1e-8;

/// Endpoints of the piecewise-linear coefficient schedules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    pub iterations: usize,
    pub vol_min: f64,
    pub vol_max: f64,
    /// Fraction of training over which `lambda_vf` ramps up.
    pub vol_ramp: f64,
    pub bin_max: f64,
    /// Fraction of training after which `lambda_bin` switches on.
    pub bin_start: f64,
    pub tv_max: f64,
    pub h1_start: f64,
    pub h1_end: f64,
    pub sym_max: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub target_volume: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            vol_min: 1.0,
            vol_max: 50.0,
            vol_ramp: 0.25,
            bin_max: 5.0,
            bin_start: 0.75,
            tv_max: 0.015,
            h1_start: 0.05,
            h1_end: 0.005,
            sym_max: 0.0,
            beta_start: 1.0,
            beta_end: 10.0,
            target_volume: 0.4,
        }
    }
}

/// Coefficient values at one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Coefficients {
    pub vol: f64,
    pub bin: f64,
    pub tv: f64,
    pub h1: f64,
    pub sym: f64,
    pub beta: f64,
}

impl ScheduleConfig {
    /// Coefficients at iteration `t`; progress `s = t / (T - 1)` reaches 1
    /// on the last iteration.
    pub fn at(&self, t: usize) -> Result<Coefficients> {
        if t >= self.iterations {
            return Err(Error::arg(format!(
                "iteration {t} outside schedule of length {}",
                self.iterations
            )));
        }
        let s = if self.iterations > 1 {
            t as f64 / (self.iterations - 1) as f64
        } else {
            0.0
        };
        let lerp = |a: f64, b: f64, x: f64| a + (b - a) * x.clamp(0.0, 1.0);
        let vol = if self.vol_ramp > 0.0 {
            lerp(self.vol_min, self.vol_max, s / self.vol_ramp)
        } else {
            self.vol_max
        };
        let bin = if s < self.bin_start {
            0.0
        } else {
            lerp(0.0, self.bin_max, (s - self.bin_start) / (1.0 - self.bin_start))
        };
        Ok(Coefficients {
            vol,
            bin,
            tv: lerp(0.0, self.tv_max, s),
            h1: lerp(self.h1_start, self.h1_end, s),
            sym: lerp(0.0, self.sym_max, s),
            beta: lerp(self.beta_start, self.beta_end, s),
        })
    }
}

/// `lam (mean(rho) - V*)^2`.
pub fn vol_penalty(rho: &DensityField, target: f64, lam: f64) -> (f64, DensityField) {
    let n = rho.len() as f64;
    let gap = rho.mean() - target;
    let g = 2.0 * lam * gap / n;
    (lam * gap * gap, rho.map(|_| g))
}

/// `lam |Omega| / N sum rho (1 - rho)`.
pub fn bin_penalty(rho: &DensityField, lam: f64, domain_area: f64) -> (f64, DensityField) {
    let scale = lam * domain_area / rho.len() as f64;
    let value = scale * rho.as_slice().iter().map(|r| r * (1.0 - r)).sum::<f64>();
    (value, rho.map(|r| scale * (1.0 - 2.0 * r)))
}

/// Visits every forward difference as `(from, to, weight)`, where the
/// difference is `(rho[to] - rho[from]) / h` and `weight` is the transverse
/// cell width.
fn for_each_edge(rho: &DensityField, dx: f64, dy: f64, mut f: impl FnMut(usize, usize, f64, f64)) {
    let (nx, ny) = (rho.nx(), rho.ny());
    for j in 0..ny {
        for i in 0..nx.saturating_sub(1) {
            f(rho.index(i, j), rho.index(i + 1, j), dx, dy);
        }
    }
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx {
            f(rho.index(i, j), rho.index(i, j + 1), dy, dx);
        }
    }
}

/// Anisotropic forward-difference total variation. The gradient uses
/// `sqrt(d^2 + eps^2)` in place of `|d|`.
pub fn tv_penalty(rho: &DensityField, lam: f64, dx: f64, dy: f64) -> (f64, DensityField) {
    let r = rho.as_slice();
    let mut value = 0.0;
    let mut grad = DensityField::filled(rho.nx(), rho.ny(), 0.0);
    let g = grad.as_mut_slice();
    for_each_edge(rho, dx, dy, |a, b, h, w| {
        let d = (r[b] - r[a]) / h;
        value += w * d.abs();
        let slope = lam * w * d / (d * d + TV_EPS * TV_EPS).sqrt() / h;
        g[b] += slope;
        g[a] -= slope;
    });
    (lam * value, grad)
}

/// Forward-difference H1 seminorm (squared gradient magnitude).
pub fn h1_penalty(rho: &DensityField, lam: f64, dx: f64, dy: f64) -> (f64, DensityField) {
    let r = rho.as_slice();
    let mut value = 0.0;
    let mut grad = DensityField::filled(rho.nx(), rho.ny(), 0.0);
    let g = grad.as_mut_slice();
    for_each_edge(rho, dx, dy, |a, b, h, w| {
        let d = (r[b] - r[a]) / h;
        value += w * d * d;
        let slope = 2.0 * lam * w * d / h;
        g[b] += slope;
        g[a] -= slope;
    });
    (lam * value, grad)
}

/// `lam sum (rho - mirror(rho))^2` over all cells; each mirrored pair is
/// counted twice, hence the factor 4 in the gradient.
pub fn sym_penalty(rho: &DensityField, lam: f64) -> (f64, DensityField) {
    let mirror = rho.mirrored();
    let diff: Vec<f64> = rho
        .as_slice()
        .iter()
        .zip(mirror.as_slice())
        .map(|(a, b)| a - b)
        .collect();
    let value = lam * diff.iter().map(|d| d * d).sum::<f64>();
    let grad = DensityField::from_vec(rho.nx(), rho.ny(), diff.iter().map(|d| 4.0 * lam * d).collect())
        .expect("same shape");
    (value, grad)
}

/// Per-term values of the regularizers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PenaltyValues {
    pub vol: f64,
    pub bin: f64,
    pub tv: f64,
    pub h1: f64,
    pub sym: f64,
}

/// Which penalties are active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySet {
    pub smoothing: bool,
    pub symmetry: bool,
    pub target_volume: f64,
    /// `|Omega|`. Binarization uses it directly; TV and H1 sums are weighted
    /// by the same per-cell area `|Omega| / N`.
    pub domain_area: f64,
}

/// Evaluates every active penalty and the summed gradient.
pub fn penalties(
    rho: &DensityField,
    coeffs: &Coefficients,
    set: PenaltySet,
) -> (PenaltyValues, DensityField) {
    let mut values = PenaltyValues::default();
    let (v, mut grad) = vol_penalty(rho, set.target_volume, coeffs.vol);
    values.vol = v;
    let mut accumulate = |g: DensityField| {
        for (a, b) in grad.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *a += b;
        }
    };
    if set.smoothing {
        let cell = set.domain_area / rho.len() as f64;
        let (v, g) = bin_penalty(rho, coeffs.bin, set.domain_area);
        values.bin = v;
        accumulate(g);
        let (v, g) = tv_penalty(rho, coeffs.tv * cell, 1.0, 1.0);
        values.tv = v;
        accumulate(g);
        let (v, g) = h1_penalty(rho, coeffs.h1 * cell, 1.0, 1.0);
        values.h1 = v;
        accumulate(g);
    }
    if set.symmetry {
        let (v, g) = sym_penalty(rho, coeffs.sym);
        values.sym = v;
        accumulate(g);
    }
    (values, grad)
}

/// Loss terms at one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub c_norm: f64,
    pub vol: f64,
    pub bin: f64,
    pub tv: f64,
    pub h1: f64,
    pub sym: f64,
    pub total: f64,
    pub coefficients: Coefficients,
}

/// `C / C0` plus all penalty values.
pub fn total_loss(
    compliance: f64,
    c0: f64,
    p: PenaltyValues,
    coefficients: Coefficients,
) -> Result<LossBreakdown> {
    if !(c0 > 0.0) {
        return Err(Error::arg(format!("reference compliance must be positive, got {c0}")));
    }
    let c_norm = compliance / c0;
    Ok(LossBreakdown {
        c_norm,
        vol: p.vol,
        bin: p.bin,
        tv: p.tv,
        h1: p.h1,
        sym: p.sym,
        total: c_norm + p.vol + p.bin + p.tv + p.h1 + p.sym,
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn schedule_endpoints() {
        let cfg = ScheduleConfig::default();
        let c = cfg.at(0).unwrap();
        assert_eq!((c.vol, c.bin, c.tv, c.h1, c.beta), (1.0, 0.0, 0.0, 0.05, 1.0));
        assert_eq!(cfg.at(50).unwrap().vol, 50.0);
        assert_eq!(cfg.at(120).unwrap().vol, 50.0);
        assert_eq!(cfg.at(149).unwrap().bin, 0.0);
        let end = cfg.at(199).unwrap();
        assert_abs_diff_eq!(end.bin, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(end.tv, 0.015, epsilon = 1e-12);
        assert_abs_diff_eq!(end.h1, 0.005, epsilon = 1e-12);
        assert_abs_diff_eq!(end.beta, 10.0, epsilon = 1e-12);
        assert!(cfg.at(200).is_err());
    }

    #[test]
    fn schedule_is_continuous_and_nonnegative() {
        let cfg = ScheduleConfig {
            sym_max: 0.1,
            ..Default::default()
        };
        let all: Vec<Coefficients> = (0..cfg.iterations).map(|t| cfg.at(t).unwrap()).collect();
        for w in all.windows(2) {
            let (a, b) = (w[0], w[1]);
            assert!(a.vol >= 0.0 && a.bin >= 0.0 && a.tv >= 0.0 && a.h1 >= 0.0 && a.sym >= 0.0);
            assert!(a.beta >= 1.0);
            // largest single step is lambda_vf's ramp of 49 over ~50 iterations
            assert!((b.vol - a.vol).abs() <= 1.0);
            assert!((b.bin - a.bin).abs() <= 0.11);
            assert!((b.beta - a.beta).abs() <= 0.05);
        }
    }

    #[test]
    fn vol_examples() {
        let f = DensityField::from_vec(2, 2, vec![0.2, 0.6, 0.4, 0.4]).unwrap();
        let (v, g) = vol_penalty(&f, 0.4, 3.0);
        assert_eq!(v, 0.0);
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
        let (v, _) = vol_penalty(&DensityField::filled(3, 2, 1.0), 0.4, 1.0);
        assert_abs_diff_eq!(v, 0.36, epsilon = 1e-15);
    }

    #[test]
    fn bin_examples() {
        let f = DensityField::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(bin_penalty(&f, 5.0, 4.0).0, 0.0);
        let half = DensityField::filled(3, 2, 0.5);
        assert_eq!(bin_penalty(&half, 2.0, 6.0).0, 2.0 * 6.0 * 0.25);
        let f = DensityField::from_vec(2, 1, vec![0.3, 0.7]).unwrap();
        let (_, g) = bin_penalty(&f, 1.0, 2.0);
        assert!(g.as_slice()[0] > 0.0 && g.as_slice()[1] < 0.0);
    }

    #[test]
    fn tv_h1_examples() {
        let flat = DensityField::filled(4, 3, 0.37);
        assert_eq!(tv_penalty(&flat, 1.0, 1.0, 1.0).0, 0.0);
        assert_eq!(h1_penalty(&flat, 1.0, 1.0, 1.0).0, 0.0);
        let step = DensityField::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(tv_penalty(&step, 0.7, 1.0, 1.0).0, 0.7);
        assert_eq!(h1_penalty(&step, 0.7, 1.0, 1.0).0, 0.7);
    }

    #[test]
    fn sym_examples() {
        let sym = DensityField::from_rows(&[vec![0.1, 0.9], vec![0.5, 0.5], vec![0.1, 0.9]]).unwrap();
        assert_eq!(sym_penalty(&sym, 1.0).0, 0.0);
        let col = DensityField::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        assert_eq!(sym_penalty(&col, 0.3).0, 2.0 * 0.3);
    }

    #[test]
    fn total_is_sum_of_terms() {
        let p = PenaltyValues::default();
        let b = total_loss(5.0, 5.0, p, Coefficients::default()).unwrap();
        assert_eq!(b.total, 1.0);
        let p = PenaltyValues {
            vol: 0.25,
            bin: 0.125,
            tv: 0.0625,
            h1: 0.5,
            sym: 0.03125,
        };
        let b = total_loss(3.0, 2.0, p, Coefficients::default()).unwrap();
        assert_eq!(b.total, b.c_norm + b.vol + b.bin + b.tv + b.h1 + b.sym);
        assert_eq!(b.total, 1.5 + 0.25 + 0.125 + 0.0625 + 0.5 + 0.03125);
        assert!(total_loss(1.0, 0.0, p, Coefficients::default()).is_err());
    }
}
