//! Plain-text result files. All writers emit LF line endings and `.` decimal
//! separators; rows of density files run from the top of the domain down.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::grid::DensityField;
use crate::optimize::{RunResult, SweepResult};

pub const HISTORY_HEADER: &str = "iter,compliance,volume,c_norm,vol,bin,tv,h1,sym,total";

fn top_down_rows(field: &DensityField) -> impl Iterator<Item = &[f64]> {
    let nx = field.nx();
    (0..field.ny())
        .rev()
        .map(move |j| &field.as_slice()[j * nx..(j + 1) * nx])
}

pub fn density_csv(field: &DensityField) -> String {
    let mut out = String::new();
    for row in top_down_rows(field) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// ASCII greymap (P2); white is solid.
pub fn density_pgm(field: &DensityField) -> String {
    let mut out = format!("P2\n{} {}\n255\n", field.nx(), field.ny());
    for row in top_down_rows(field) {
        let cells: Vec<String> = row
            .iter()
            .map(|v| ((255.0 * v.clamp(0.0, 1.0)).round() as u8).to_string())
            .collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn history_csv(run: &RunResult) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for (k, l) in run.loss_history.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            k + 1,
            run.compliance_history[k],
            run.volume_history[k],
            l.c_norm,
            l.vol,
            l.bin,
            l.tv,
            l.h1,
            l.sym,
            l.total
        );
    }
    out
}

pub fn summary_txt(run: &RunResult) -> String {
    format!(
        "final_compliance = {}\nfinal_volume = {}\nseed = {}\nwallclock_s = {:.3}\n",
        run.final_compliance(),
        run.final_volume(),
        run.seed,
        run.wallclock_s
    )
}

/// `density.csv`, `density.pgm`, `history.csv` and `summary.txt`.
pub fn write_run(dir: &Path, run: &RunResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("density.csv"), density_csv(&run.final_field))?;
    fs::write(dir.join("density.pgm"), density_pgm(&run.final_field))?;
    fs::write(dir.join("history.csv"), history_csv(run))?;
    fs::write(dir.join("summary.txt"), summary_txt(run))?;
    Ok(())
}

pub fn run_dir_name(index: usize) -> String {
    format!("run_{index:02}")
}

pub fn sweep_summary_txt(sweep: &SweepResult) -> String {
    let mut out = format!(
        "runs = {}\ncheckpoint = {}\ncompliance_mean = {}\ncompliance_std = {}\ndiversity = {}\n",
        sweep.runs.len(),
        sweep.checkpoint,
        sweep.compliance.mean,
        sweep.compliance.std,
        sweep.diversity
    );
    let seeds: Vec<String> = sweep.runs.iter().map(|r| r.seed.to_string()).collect();
    let _ = writeln!(out, "seeds = {}", seeds.join(","));
    let finals: Vec<String> = sweep
        .runs
        .iter()
        .map(|r| r.compliance_at(sweep.checkpoint).to_string())
        .collect();
    let _ = writeln!(out, "compliances = {}", finals.join(","));
    out
}

/// One subdirectory per run plus `sweep_summary.txt`.
pub fn write_sweep(dir: &Path, sweep: &SweepResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (k, run) in sweep.runs.iter().enumerate() {
        write_run(&dir.join(run_dir_name(k)), run)?;
    }
    fs::write(dir.join("sweep_summary.txt"), sweep_summary_txt(sweep))?;
    Ok(())
}
