//! The `landscape` command: PCA of a recorded trajectory and the CNA grid
//! around it.

use std::path::{Path, PathBuf};

use cna_core::analysis::{cna_landscape, pca2, Grid, Landscape, Pca2Basis, Trajectory, DEFAULT_MARGIN};
use serde::Serialize;

use crate::csvio::{write_csv, LandscapeRow, TrajectoryRow, LANDSCAPE_SCHEMA, TRAJECTORY_SCHEMA};
use crate::error::{CliError, Result};
use crate::experiment::TRAJECTORY_FILE;
use crate::fsutil::{write_atomic, write_json};
use crate::svg;

pub const LANDSCAPE_DIR: &str = "landscape";

#[derive(Debug, Clone, Serialize)]
pub struct LandscapeSummary {
    pub samples: usize,
    pub state_dim: usize,
    pub rank: usize,
    pub explained_variance: [f64; 2],
    pub explained_ratio: [f64; 2],
    pub grid: Grid,
    pub undefined_cells: usize,
    pub output_dir: PathBuf,
}

pub fn run_landscape(run_dir: &Path, resolution: usize) -> Result<LandscapeSummary> {
    let path = run_dir.join(TRAJECTORY_FILE);
    if !path.exists() {
        return Err(CliError::Data(format!(
            "{} not found; train with --record-trajectory first",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let trajectory: Trajectory =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let pca = pca2(&trajectory.states())?;
    let grid = Grid::around_path(&pca.path, DEFAULT_MARGIN, resolution);
    let land = cna_landscape(&pca.basis, &trajectory.layout, &grid, &trajectory.probe_alphas)?;
    let out = run_dir.join(LANDSCAPE_DIR);
    write_outputs(&out, &trajectory, &pca.path, &land)?;
    let summary = LandscapeSummary {
        samples: trajectory.samples.len(),
        state_dim: trajectory.layout.dim(),
        rank: pca.basis.rank,
        explained_variance: pca.basis.explained_variance,
        explained_ratio: pca.basis.explained_ratio(),
        grid,
        undefined_cells: land.values.iter().filter(|v| v.is_none()).count(),
        output_dir: out.clone(),
    };
    write_json(&out.join("pca.json"), &PcaFile { summary: &summary, basis: &pca.basis })?;
    Ok(summary)
}

#[derive(Serialize)]
struct PcaFile<'a> {
    summary: &'a LandscapeSummary,
    basis: &'a Pca2Basis,
}

pub fn write_outputs(out: &Path, trajectory: &Trajectory, path: &[[f64; 2]], land: &Landscape) -> Result<()> {
    let rows: Vec<TrajectoryRow> = trajectory
        .samples
        .iter()
        .zip(path)
        .map(|(s, p)| TrajectoryRow {
            step: s.step,
            loss: s.loss,
            x: p[0],
            y: p[1],
        })
        .collect();
    write_csv(&out.join("trajectory.csv"), TRAJECTORY_SCHEMA, &rows)?;
    let mut cells = Vec::with_capacity(land.values.len());
    for (j, &y) in land.ys.iter().enumerate() {
        for (i, &x) in land.xs.iter().enumerate() {
            cells.push(LandscapeRow { x, y, cna: land.get(i, j) });
        }
    }
    write_csv(&out.join("landscape.csv"), LANDSCAPE_SCHEMA, &cells)?;
    let svg = svg::landscape(land, path, "CNA over the trajectory's principal plane");
    write_atomic(&out.join("landscape.svg"), svg.as_bytes())
}
