use crate::error::{Error, Result};

/// Scalar field over an `nx x ny` element grid.
///
/// Cell `(i, j)` has `i` along x (left to right) and `j` along y (bottom to
/// top) and lives at flat index `j * nx + i`. Decoder outputs, FEM element
/// densities and penalties all share this numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    nx: usize,
    ny: usize,
    data: Vec<f64>,
}

impl DensityField {
    pub fn filled(nx: usize, ny: usize, value: f64) -> Self {
        Self {
            nx,
            ny,
            data: vec![value; nx * ny],
        }
    }

    pub fn from_vec(nx: usize, ny: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nx * ny {
            return Err(Error::Dimension {
                context: "density field",
                expected: nx * ny,
                actual: data.len(),
            });
        }
        Ok(Self { nx, ny, data })
    }

    /// Builds a field from rows listed bottom to top.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nx = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nx) {
            return Err(Error::arg("ragged rows"));
        }
        Ok(Self {
            nx,
            ny: rows.len(),
            data: rows.concat(),
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nx + i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Field reflected about the horizontal mid-line (`j -> ny - 1 - j`).
    pub fn mirrored(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in (0..self.ny).rev() {
            data.extend_from_slice(&self.data[j * self.nx..(j + 1) * self.nx]);
        }
        Self {
            nx: self.nx,
            ny: self.ny,
            data,
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }
}
