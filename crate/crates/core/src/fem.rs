//! Plane-stress Q4 finite elements on a structured grid of unit squares.
//!
//! Nodes are numbered column by column, `node(i, j) = i * (ny + 1) + j`, with
//! `i` along x and `j` along y (bottom to top), and carry DOFs
//! `[2 node, 2 node + 1] = [u_x, u_y]`. Numbering along the short side keeps
//! the stiffness bandwidth at about `2 (ny + 2)`, which the banded Cholesky
//! factorization relies on.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::DensityField;

/// Element stiffness of a fully solid element (E = 1).
pub type ElementMatrix = [[f64; 8]; 8];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
}

impl Mesh {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::arg(format!("mesh must be non-empty, got {nx}x{ny}")));
        }
        Ok(Self { nx, ny })
    }

    pub fn n_elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }

    /// DOFs of element `(i, j)`, nodes counter-clockwise from bottom-left.
    pub fn element_dofs(&self, i: usize, j: usize) -> [usize; 8] {
        let n = [
            self.node(i, j),
            self.node(i + 1, j),
            self.node(i + 1, j + 1),
            self.node(i, j + 1),
        ];
        [
            2 * n[0],
            2 * n[0] + 1,
            2 * n[1],
            2 * n[1] + 1,
            2 * n[2],
            2 * n[2] + 1,
            2 * n[3],
            2 * n[3] + 1,
        ]
    }

    /// Element DOFs in [`DensityField`] order.
    fn elements(&self) -> impl Iterator<Item = [usize; 8]> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| self.element_dofs(i, j)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub e0: f64,
    pub e_min: f64,
    pub nu: f64,
    pub penal: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            e0: 1.0,
            e_min: 1e-9,
            nu: 0.3,
            penal: 3.0,
        }
    }
}

/// `E_min + rho^p (E_0 - E_min)`.
pub fn simp_modulus(rho: f64, mat: &Material) -> f64 {
    mat.e_min + rho.powf(mat.penal) * (mat.e0 - mat.e_min)
}

fn simp_slope(rho: f64, mat: &Material) -> f64 {
    mat.penal * rho.powf(mat.penal - 1.0) * (mat.e0 - mat.e_min)
}

/// Unit-square plane-stress element, unit thickness and modulus, integrated
/// with 2x2 Gauss points.
pub fn element_stiffness(nu: f64) -> ElementMatrix {
    let d = {
        let s = 1.0 / (1.0 - nu * nu);
        [[s, s * nu, 0.0], [s * nu, s, 0.0], [0.0, 0.0, s * (1.0 - nu) / 2.0]]
    };
    let g = 1.0 / 3f64.sqrt();
    let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let mut k = [[0.0; 8]; 8];
    for &xi in &[-g, g] {
        for &eta in &[-g, g] {
            // d/dx = 2 d/dxi on a unit square; detJ = 1/4, unit Gauss weights
            let mut b = [[0.0; 8]; 3];
            for (a, &(xa, ya)) in corners.iter().enumerate() {
                let dx = 2.0 * 0.25 * xa * (1.0 + ya * eta);
                let dy = 2.0 * 0.25 * ya * (1.0 + xa * xi);
                b[0][2 * a] = dx;
                b[1][2 * a + 1] = dy;
                b[2][2 * a] = dy;
                b[2][2 * a + 1] = dx;
            }
            let mut db = [[0.0; 8]; 3];
            for r in 0..3 {
                for c in 0..8 {
                    db[r][c] = (0..3).map(|s| d[r][s] * b[s][c]).sum();
                }
            }
            for r in 0..8 {
                for c in 0..8 {
                    k[r][c] += 0.25 * (0..3).map(|s| b[s][r] * db[s][c]).sum::<f64>();
                }
            }
        }
    }
    for r in 0..8 {
        for c in 0..r {
            let avg = 0.5 * (k[r][c] + k[c][r]);
            k[r][c] = avg;
            k[c][r] = avg;
        }
    }
    k
}

/// The three load cases used in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    /// Clamped left edge, unit downward load at the bottom-right corner.
    TipCantilever,
    /// Roller at bottom-left, pin at bottom-right, unit downward load on
    /// every bottom node.
    SsBottom,
    /// Clamped left edge, unit downward load at mid-height of the right edge.
    MidCantilever,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [
        Benchmark::TipCantilever,
        Benchmark::SsBottom,
        Benchmark::MidCantilever,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Benchmark::TipCantilever => "tip_cantilever",
            Benchmark::SsBottom => "ss_bottom",
            Benchmark::MidCantilever => "mid_cantilever",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown benchmark `{s}`")))
    }
}

/// Mesh, material, supports and loads of one static problem.
#[derive(Debug, Clone)]
pub struct FemProblem {
    pub mesh: Mesh,
    pub material: Material,
    fixed: Vec<bool>,
    load: Vec<f64>,
    /// Position of each DOF in the reduced system, `None` when fixed.
    reduced: Vec<Option<usize>>,
    n_free: usize,
    bandwidth: usize,
    ke: ElementMatrix,
}

#[derive(Debug, Clone)]
pub struct FemSolution {
    /// Full displacement vector, zero on fixed DOFs.
    pub u: Vec<f64>,
    pub compliance: f64,
}

impl FemProblem {
    /// Loads on fixed DOFs are carried by the supports and do no work.
    pub fn new(mesh: Mesh, material: Material, fixed_dofs: &[usize], load: Vec<f64>) -> Result<Self> {
        let n = mesh.n_dofs();
        if load.len() != n {
            return Err(Error::Dimension {
                context: "load vector",
                expected: n,
                actual: load.len(),
            });
        }
        if fixed_dofs.is_empty() {
            return Err(Error::arg("at least one DOF must be fixed"));
        }
        if load.iter().any(|f| !f.is_finite()) {
            return Err(Error::arg("load vector must be finite"));
        }
        let mut fixed = vec![false; n];
        for &d in fixed_dofs {
            if d >= n {
                return Err(Error::Index {
                    what: "fixed DOF",
                    index: d,
                    len: n,
                });
            }
            fixed[d] = true;
        }
        let mut reduced = vec![None; n];
        let mut n_free = 0;
        for (d, slot) in reduced.iter_mut().enumerate() {
            if !fixed[d] {
                *slot = Some(n_free);
                n_free += 1;
            }
        }
        let bandwidth = mesh
            .elements()
            .map(|dofs| {
                let free: Vec<usize> = dofs.iter().filter_map(|&d| reduced[d]).collect();
                match (free.iter().min(), free.iter().max()) {
                    (Some(lo), Some(hi)) => hi - lo,
                    _ => 0,
                }
            })
            .max()
            .unwrap_or(0);
        Ok(Self {
            mesh,
            material,
            fixed,
            load,
            reduced,
            n_free,
            bandwidth,
            ke: element_stiffness(material.nu),
        })
    }

    pub fn build(benchmark: Benchmark, mesh: Mesh, material: Material) -> Result<Self> {
        let mut fixed = Vec::new();
        let mut load = vec![0.0; mesh.n_dofs()];
        let (nx, ny) = (mesh.nx, mesh.ny);
        match benchmark {
            Benchmark::TipCantilever | Benchmark::MidCantilever => {
                for j in 0..=ny {
                    let n = mesh.node(0, j);
                    fixed.extend([2 * n, 2 * n + 1]);
                }
                let j = match benchmark {
                    Benchmark::TipCantilever => 0,
                    _ => ny / 2,
                };
                load[2 * mesh.node(nx, j) + 1] = -1.0;
            }
            Benchmark::SsBottom => {
                let left = mesh.node(0, 0);
                let right = mesh.node(nx, 0);
                fixed.extend([2 * left + 1, 2 * right, 2 * right + 1]);
                for i in 0..=nx {
                    load[2 * mesh.node(i, 0) + 1] = -1.0;
                }
            }
        }
        Self::new(mesh, material, &fixed, load)
    }

    pub fn fixed_dofs(&self) -> Vec<usize> {
        (0..self.fixed.len()).filter(|&d| self.fixed[d]).collect()
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn element_matrix(&self) -> &ElementMatrix {
        &self.ke
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    fn check_field(&self, rho: &DensityField) -> Result<()> {
        if rho.nx() != self.mesh.nx || rho.ny() != self.mesh.ny {
            return Err(Error::arg(format!(
                "density field is {}x{}, mesh is {}x{}",
                rho.nx(),
                rho.ny(),
                self.mesh.nx,
                self.mesh.ny
            )));
        }
        if let Some(bad) = rho.as_slice().iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::arg(format!("density {bad} outside [0, 1]")));
        }
        Ok(())
    }

    /// Solves `K(rho) u = f` on the free DOFs and returns `u` with `C = f^T u`.
    pub fn solve(&self, rho: &DensityField) -> Result<FemSolution> {
        self.check_field(rho)?;
        let moduli: Vec<f64> = rho
            .as_slice()
            .iter()
            .map(|&r| simp_modulus(r, &self.material))
            .collect();

        let mut k = BandMatrix::zeros(self.n_free, self.bandwidth);
        for (dofs, &e) in self.mesh.elements().zip(&moduli) {
            for (a, &da) in dofs.iter().enumerate() {
                let Some(ra) = self.reduced[da] else { continue };
                for (b, &db) in dofs.iter().enumerate() {
                    if let Some(rb) = self.reduced[db] {
                        if rb <= ra {
                            k.add(ra, rb, e * self.ke[a][b]);
                        }
                    }
                }
            }
        }
        let rhs: Vec<f64> = (0..self.load.len())
            .filter(|&d| !self.fixed[d])
            .map(|d| self.load[d])
            .collect();
        let free_u = k.cholesky()?.solve(&rhs);

        let mut u = vec![0.0; self.load.len()];
        for (d, slot) in self.reduced.iter().enumerate() {
            if let Some(r) = slot {
                u[d] = free_u[*r];
            }
        }

        let residual = self.residual_norm(&moduli, &u);
        let f_norm = rhs.iter().map(|f| f * f).sum::<f64>().sqrt();
        if residual > 1e-8 * f_norm.max(f64::MIN_POSITIVE) {
            return Err(Error::Solver(format!(
                "residual {residual:.3e} exceeds 1e-8 * |f| = {:.3e}",
                1e-8 * f_norm
            )));
        }
        let compliance = rhs.iter().zip(&free_u).map(|(f, u)| f * u).sum();
        Ok(FemSolution { u, compliance })
    }

    fn residual_norm(&self, moduli: &[f64], u: &[f64]) -> f64 {
        let mut ku = vec![0.0; u.len()];
        for (dofs, &e) in self.mesh.elements().zip(moduli) {
            for (a, &da) in dofs.iter().enumerate() {
                ku[da] += e * (0..8).map(|b| self.ke[a][b] * u[dofs[b]]).sum::<f64>();
            }
        }
        (0..u.len())
            .filter(|&d| !self.fixed[d])
            .map(|d| (ku[d] - self.load[d]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `u_e^T K_e^0 u_e` per element (unit modulus).
    pub fn element_energies(&self, u: &[f64]) -> Vec<f64> {
        self.mesh
            .elements()
            .map(|dofs| {
                let ue: [f64; 8] = dofs.map(|d| u[d]);
                (0..8)
                    .map(|a| ue[a] * (0..8).map(|b| self.ke[a][b] * ue[b]).sum::<f64>())
                    .sum()
            })
            .collect()
    }

    /// `dC/d rho_e = -p rho_e^(p-1) (E_0 - E_min) u_e^T K_e^0 u_e`.
    pub fn compliance_sensitivity(&self, rho: &DensityField, u: &[f64]) -> Result<DensityField> {
        self.check_field(rho)?;
        let sens = self
            .element_energies(u)
            .into_iter()
            .zip(rho.as_slice())
            .map(|(energy, &r)| -simp_slope(r, &self.material) * energy)
            .collect();
        DensityField::from_vec(self.mesh.nx, self.mesh.ny, sens)
    }
}

/// Symmetric band matrix; only the lower band is stored.
struct BandMatrix {
    n: usize,
    bw: usize,
    /// Row `i` holds columns `i - bw ..= i`.
    data: Vec<f64>,
}

impl BandMatrix {
    fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + (j + self.bw - i)
    }

    #[inline]
    fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// In-place `L L^T` factorization.
    fn cholesky(mut self) -> Result<Self> {
        let w = self.bw + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let start = lo.max(j.saturating_sub(self.bw));
                let original = self.data[self.slot(i, j)];
                let mut sum = original;
                let (ri, rj) = (i * w + self.bw - i, j * w + self.bw - j);
                for k in start..j {
                    sum -= self.data[ri + k] * self.data[rj + k];
                }
                if i == j {
                    // a pivot lost to cancellation marks a mechanism, not a soft element
                    if !(sum > 1e-13 * original) || !sum.is_finite() {
                        return Err(Error::Solver(format!(
                            "stiffness matrix is not positive definite at reduced DOF {i} (pivot {sum:.3e})"
                        )));
                    }
                    self.data[ri + i] = sum.sqrt();
                } else {
                    self.data[ri + j] = sum / self.data[rj + j];
                }
            }
        }
        Ok(self)
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let w = self.bw + 1;
        let mut x = rhs.to_vec();
        for i in 0..self.n {
            let r = i * w + self.bw - i;
            let lo = i.saturating_sub(self.bw);
            let s: f64 = (lo..i).map(|k| self.data[r + k] * x[k]).sum();
            x[i] = (x[i] - s) / self.data[r + i];
        }
        for i in (0..self.n).rev() {
            let r = i * w + self.bw - i;
            x[i] /= self.data[r + i];
            let xi = x[i];
            let lo = i.saturating_sub(self.bw);
            for k in lo..i {
                x[k] -= self.data[r + k] * xi;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent 4x4 Gauss integration in physical coordinates.
    fn reference_stiffness(nu: f64) -> ElementMatrix {
        let pts = [
            (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
            (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
        ];
        let nodes = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let c = 1.0 / (1.0 - nu * nu);
        let mut k = [[0.0; 8]; 8];
        for &(gx, wx) in &pts {
            for &(gy, wy) in &pts {
                let (x, y) = (0.5 * (gx + 1.0), 0.5 * (gy + 1.0));
                let w = 0.25 * wx * wy;
                // N_a = (1 - |x - xa|)(1 - |y - ya|) on the unit square
                let grads: Vec<(f64, f64)> = nodes
                    .iter()
                    .map(|&(xa, ya)| {
                        let sx = if xa == 0.0 { -1.0 } else { 1.0 };
                        let sy = if ya == 0.0 { -1.0 } else { 1.0 };
                        let nx = if xa == 0.0 { 1.0 - x } else { x };
                        let ny = if ya == 0.0 { 1.0 - y } else { y };
                        (sx * ny, sy * nx)
                    })
                    .collect();
                for a in 0..4 {
                    for b in 0..4 {
                        let (ax, ay) = grads[a];
                        let (bx, by) = grads[b];
                        let g = c * (1.0 - nu) / 2.0;
                        k[2 * a][2 * b] += w * (c * ax * bx + g * ay * by);
                        k[2 * a][2 * b + 1] += w * (c * nu * ax * by + g * ay * bx);
                        k[2 * a + 1][2 * b] += w * (c * nu * ay * bx + g * ax * by);
                        k[2 * a + 1][2 * b + 1] += w * (c * ay * by + g * ax * bx);
                    }
                }
            }
        }
        k
    }

    #[test]
    fn element_stiffness_properties() {
        let k = element_stiffness(0.3);
        for a in 0..8 {
            for b in 0..8 {
                assert_eq!(k[a][b], k[b][a]);
            }
        }
        let reference = reference_stiffness(0.3);
        for a in 0..8 {
            for b in 0..8 {
                assert!((k[a][b] - reference[a][b]).abs() < 1e-12);
            }
        }
        let closed_form = (0.5 - 0.3 / 6.0) / (1.0 - 0.09);
        assert!((k[0][0] - closed_form).abs() < 1e-12);

        let rigid = [
            [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
            // small rotation about the origin: (u, v) = (-y, x)
            [0.0, 0.0, 0.0, 1.0, -1.0, 1.0, -1.0, 0.0],
        ];
        for v in rigid {
            for row in &k {
                let kv: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
                assert!(kv.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn simp_interpolation() {
        let m = Material::default();
        assert_eq!(simp_modulus(1.0, &m), 1.0);
        assert_eq!(simp_modulus(0.0, &m), 1e-9);
        assert_relative_eq!(simp_modulus(0.5, &m), 1e-9 + 0.125 * (1.0 - 1e-9), max_relative = 1e-15);
        assert!(simp_modulus(0.3, &m) < simp_modulus(0.31, &m));
    }

    /// Dense Gaussian elimination on the fully assembled system.
    fn dense_compliance(problem: &FemProblem, rho: &DensityField) -> f64 {
        let n = problem.mesh.n_dofs();
        let mut k = vec![vec![0.0; n]; n];
        let mesh = problem.mesh;
        for j in 0..mesh.ny {
            for i in 0..mesh.nx {
                let e = simp_modulus(rho.get(i, j), &problem.material);
                let dofs = mesh.element_dofs(i, j);
                for a in 0..8 {
                    for b in 0..8 {
                        k[dofs[a]][dofs[b]] += e * problem.ke[a][b];
                    }
                }
            }
        }
        let free: Vec<usize> = (0..n).filter(|&d| !problem.fixed[d]).collect();
        let m = free.len();
        let mut a: Vec<Vec<f64>> = free
            .iter()
            .map(|&r| {
                let mut row: Vec<f64> = free.iter().map(|&c| k[r][c]).collect();
                row.push(problem.load[r]);
                row
            })
            .collect();
        for p in 0..m {
            let piv = (p..m)
                .max_by(|&x, &y| a[x][p].abs().total_cmp(&a[y][p].abs()))
                .unwrap();
            a.swap(p, piv);
            for r in p + 1..m {
                let f = a[r][p] / a[p][p];
                for c in p..=m {
                    a[r][c] -= f * a[p][c];
                }
            }
        }
        let mut x = vec![0.0; m];
        for r in (0..m).rev() {
            let s: f64 = (r + 1..m).map(|c| a[r][c] * x[c]).sum();
            x[r] = (a[r][m] - s) / a[r][r];
        }
        free.iter().zip(&x).map(|(&d, u)| problem.load[d] * u).sum()
    }

    #[test]
    fn single_element_matches_dense_solve() {
        let mesh = Mesh::new(1, 1).unwrap();
        let p = FemProblem::build(Benchmark::TipCantilever, mesh, Material::default()).unwrap();
        let rho = DensityField::filled(1, 1, 1.0);
        let sol = p.solve(&rho).unwrap();
        assert_relative_eq!(sol.compliance, dense_compliance(&p, &rho), max_relative = 1e-12);
        assert!(sol.compliance > 0.0);
    }

    #[test]
    fn small_meshes_match_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for b in Benchmark::ALL {
            let mesh = Mesh::new(5, 3).unwrap();
            let p = FemProblem::build(b, mesh, Material::default()).unwrap();
            let rho = DensityField::from_vec(5, 3, (0..15).map(|_| rng.random_range(0.1..1.0)).collect())
                .unwrap();
            let c = p.solve(&rho).unwrap().compliance;
            assert_relative_eq!(c, dense_compliance(&p, &rho), max_relative = 1e-9);
        }
    }

    #[test]
    fn compliance_scales_quadratically() {
        let mesh = Mesh::new(4, 2).unwrap();
        let p = FemProblem::build(Benchmark::TipCantilever, mesh, Material::default()).unwrap();
        let scaled_load: Vec<f64> = p.load().iter().map(|f| 3.0 * f).collect();
        let q = FemProblem::new(mesh, Material::default(), &p.fixed_dofs(), scaled_load).unwrap();
        let rho = DensityField::filled(4, 2, 0.7);
        let c1 = p.solve(&rho).unwrap().compliance;
        let c3 = q.solve(&rho).unwrap().compliance;
        assert_relative_eq!(c3, 9.0 * c1, max_relative = 1e-12);
    }

    #[test]
    fn more_material_is_stiffer() {
        let mesh = Mesh::new(12, 6).unwrap();
        let p = FemProblem::build(Benchmark::TipCantilever, mesh, Material::default()).unwrap();
        let lo = p.solve(&DensityField::filled(12, 6, 0.4)).unwrap().compliance;
        let hi = p.solve(&DensityField::filled(12, 6, 0.6)).unwrap().compliance;
        assert!(hi < lo);
    }

    #[test]
    fn sensitivity_matches_finite_differences() {
        let mesh = Mesh::new(4, 2).unwrap();
        let p = FemProblem::build(Benchmark::TipCantilever, mesh, Material::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = DensityField::from_vec(4, 2, (0..8).map(|_| rng.random_range(0.2..1.0)).collect())
            .unwrap();
        let sol = p.solve(&rho).unwrap();
        let sens = p.compliance_sensitivity(&rho, &sol.u).unwrap();
        let h = 1e-6;
        for e in 0..8 {
            assert!(sens.as_slice()[e] <= 0.0);
            let mut up = rho.clone();
            up.as_mut_slice()[e] += h;
            let mut dn = rho.clone();
            dn.as_mut_slice()[e] -= h;
            let fd = (p.solve(&up).unwrap().compliance - p.solve(&dn).unwrap().compliance) / (2.0 * h);
            assert_relative_eq!(sens.as_slice()[e], fd, max_relative = 1e-4);
        }
    }

    #[test]
    fn unloaded_region_has_zero_sensitivity() {
        let mesh = Mesh::new(2, 1).unwrap();
        let p = FemProblem::build(Benchmark::TipCantilever, mesh, Material::default()).unwrap();
        let rho = DensityField::filled(2, 1, 1.0);
        let sens = p.compliance_sensitivity(&rho, &vec![0.0; mesh.n_dofs()]).unwrap();
        assert!(sens.as_slice().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn benchmark_construction() {
        let mesh = Mesh::new(60, 30).unwrap();
        let m = Material::default();
        let tip = FemProblem::build(Benchmark::TipCantilever, mesh, m).unwrap();
        assert_eq!(tip.fixed_dofs().len(), 62);
        assert_eq!(tip.load().iter().filter(|&&f| f != 0.0).count(), 1);
        assert_eq!(tip.load()[2 * mesh.node(60, 0) + 1], -1.0);

        let ss = FemProblem::build(Benchmark::SsBottom, mesh, m).unwrap();
        assert_eq!(ss.fixed_dofs().len(), 3);
        assert_eq!(ss.load().iter().filter(|&&f| f != 0.0).count(), 61);

        let mid = FemProblem::build(Benchmark::MidCantilever, mesh, m).unwrap();
        assert_eq!(mid.load()[2 * mesh.node(60, 15) + 1], -1.0);
        assert_eq!(mid.load().iter().filter(|&&f| f != 0.0).count(), 1);

        assert!("cantilever".parse::<Benchmark>().is_err());
        assert_eq!("ss_bottom".parse::<Benchmark>().unwrap(), Benchmark::SsBottom);
    }

    #[test]
    fn rejects_bad_fields() {
        let mesh = Mesh::new(3, 2).unwrap();
        let p = FemProblem::build(Benchmark::TipCantilever, mesh, Material::default()).unwrap();
        assert!(p.solve(&DensityField::filled(2, 3, 0.5)).is_err());
        assert!(p.solve(&DensityField::filled(3, 2, 1.5)).is_err());
    }

    #[test]
    fn unsupported_structure_is_reported() {
        // Only one vertical DOF fixed: rigid-body modes remain.
        let mesh = Mesh::new(2, 2).unwrap();
        let mut load = vec![0.0; mesh.n_dofs()];
        load[3] = -1.0;
        let p = FemProblem::new(mesh, Material::default(), &[1], load).unwrap();
        let err = p.solve(&DensityField::filled(2, 2, 1.0)).unwrap_err();
        assert!(matches!(err, Error::Solver(_)), "{err}");
    }
}
