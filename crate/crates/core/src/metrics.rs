use crate::error::{Error, Result};

/// Mean Euclidean distance over all unordered pairs of flattened fields.
pub fn design_diversity(fields: &[&[f64]]) -> Result<f64> {
    let n = fields.len();
    if n < 2 {
        return Err(Error::arg(format!("diversity needs at least two designs, got {n}")));
    }
    let m = fields[0].len();
    if let Some(bad) = fields.iter().find(|f| f.len() != m) {
        return Err(Error::Dimension {
            context: "design set",
            expected: m,
            actual: bad.len(),
        });
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += fields[i]
                .iter()
                .zip(fields[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
        }
    }
    Ok(2.0 * total / (n * (n - 1)) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    /// False when there were too few values for a sample deviation.
    pub std_defined: bool,
}

pub fn run_stats(values: &[f64]) -> Result<RunStats> {
    if values.is_empty() {
        return Err(Error::arg("statistics of an empty list"));
    }
    let n = values.len() as f64;
    let shift = values[0];
    let mean = shift + values.iter().map(|v| v - shift).sum::<f64>() / n;
    if values.len() == 1 {
        return Ok(RunStats {
            mean,
            std: 0.0,
            std_defined: false,
        });
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(RunStats {
        mean,
        std: var.sqrt(),
        std_defined: true,
    })
}
