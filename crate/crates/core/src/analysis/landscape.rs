use serde::{Deserialize, Serialize};

use super::pca::Pca2Basis;
use super::trajectory::StateLayout;
use crate::metrics::{cna_from_vectors, ALPHA_NAME};
use crate::{Error, Result};

pub const DEFAULT_RESOLUTION: usize = 41;
/// Fraction of the path's extent added on each side by [`Grid::around_path`].
pub const DEFAULT_MARGIN: f64 = 0.25;

/// Rectangular grid of PCA coordinates, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(x: (f64, f64), y: (f64, f64), resolution: usize) -> Self {
        Self {
            x,
            y,
            nx: resolution,
            ny: resolution,
        }
    }

    /// Bounding box of `path` widened by `margin` times its extent on every side.
    pub fn around_path(path: &[[f64; 2]], margin: f64, resolution: usize) -> Self {
        let range = |k: usize| {
            let lo = path.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            let hi = path.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
            let pad = if hi > lo { (hi - lo) * margin } else { 1.0 };
            (lo - pad, hi + pad)
        };
        Self::new(range(0), range(1), resolution)
    }

    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x, self.nx)
    }

    pub fn ys(&self) -> Vec<f64> {
        linspace(self.y, self.ny)
    }

    fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64), n: usize| lo.is_finite() && hi.is_finite() && lo <= hi && n >= 2;
        if !ok(self.x, self.nx) || !ok(self.y, self.ny) {
            return Err(Error::Config(format!("invalid landscape grid {self:?}")));
        }
        Ok(())
    }
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// CNA at `(xs[i], ys[j])` stored at `j * xs.len() + i`; `None` where the
    /// reconstructed slopes are constant.
    pub values: Vec<Option<f64>>,
}

impl Landscape {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[j * self.xs.len() + i]
    }
}

/// CNA of the state reconstructed at every grid point.
///
/// With a rank-1 basis the grid collapses to the single row `y = 0`.
pub fn cna_landscape(basis: &Pca2Basis, layout: &StateLayout, grid: &Grid, alphas: &[f64]) -> Result<Landscape> {
    grid.validate()?;
    if basis.dim() != layout.dim() || basis.components.iter().any(|c| c.len() != basis.dim()) {
        return Err(Error::Shape(format!(
            "basis of dimension {} for a state layout of {}",
            basis.dim(),
            layout.dim()
        )));
    }
    if alphas.len() != layout.probe() {
        return Err(Error::Shape(format!(
            "{} entropies for a probe of {}",
            alphas.len(),
            layout.probe()
        )));
    }
    if alphas.iter().all(|&a| a == alphas[0]) {
        return Err(Error::UndefinedCorrelation(ALPHA_NAME.into()));
    }
    let xs = grid.xs();
    let ys = if basis.rank < 2 { vec![0.0] } else { grid.ys() };
    let mut values = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            values.push(cna_at(basis, layout, [x, y], alphas)?);
        }
    }
    Ok(Landscape { xs, ys, values })
}

/// CNA of the state reconstructed at `coords`; `None` when undefined.
pub fn cna_at(basis: &Pca2Basis, layout: &StateLayout, coords: [f64; 2], alphas: &[f64]) -> Result<Option<f64>> {
    let betas = layout.betas(&basis.reconstruct(coords))?;
    match cna_from_vectors(alphas, &betas) {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedCorrelation(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Aggregation;

    fn basis() -> (Pca2Basis, StateLayout) {
        let layout = StateLayout::Aggregated {
            probe: 3,
            layers: 2,
            aggregation: Aggregation::Mean,
        };
        let s = 0.5f64.sqrt();
        let basis = Pca2Basis {
            mean: vec![0.0, 1.0, 0.0, 2.0, 0.0, 3.0],
            components: [vec![s, 0.0, 0.0, 0.0, 0.0, s], vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]],
            explained_variance: [2.0, 1.0],
            total_variance: 3.0,
            rank: 2,
        };
        (basis, layout)
    }

    #[test]
    fn origin_is_mean_state() {
        let (b, l) = basis();
        let grid = Grid::new((-1.0, 1.0), (-1.0, 1.0), 3);
        let alphas = [0.1, 0.5, 0.2];
        let land = cna_landscape(&b, &l, &grid, &alphas).unwrap();
        let expected = cna_from_vectors(&alphas, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(land.get(1, 1), Some(expected));
        assert_eq!(land.values.len(), 9);
    }

    #[test]
    fn undefined_cells_are_none() {
        let (mut b, l) = basis();
        b.mean = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let grid = Grid::new((0.0, 0.0), (0.0, 0.0), 2);
        let land = cna_landscape(&b, &l, &grid, &[0.1, 0.5, 0.2]).unwrap();
        assert_eq!(land.values, vec![None; 4]);
    }

    #[test]
    fn rank_one_collapses_rows() {
        let (mut b, l) = basis();
        b.rank = 1;
        let land = cna_landscape(&b, &l, &Grid::new((-1.0, 1.0), (-5.0, 5.0), 7), &[0.1, 0.5, 0.2]).unwrap();
        assert_eq!(land.ys, vec![0.0]);
        assert_eq!(land.values.len(), 7);
    }

    #[test]
    fn errors() {
        let (b, l) = basis();
        let g = Grid::new((-1.0, 1.0), (-1.0, 1.0), 3);
        assert!(matches!(cna_landscape(&b, &l, &g, &[0.3; 3]), Err(Error::UndefinedCorrelation(_))));
        assert!(matches!(cna_landscape(&b, &l, &g, &[0.3; 2]), Err(Error::Shape(_))));
        for bad in [Grid::new((1.0, -1.0), (-1.0, 1.0), 3), Grid::new((-1.0, 1.0), (-1.0, 1.0), 1)] {
            assert!(matches!(cna_landscape(&b, &l, &bad, &[0.1, 0.2, 0.3]), Err(Error::Config(_))));
        }
    }

    #[test]
    fn default_grid_pads_path() {
        let g = Grid::around_path(&[[0.0, 0.0], [4.0, 2.0]], DEFAULT_MARGIN, DEFAULT_RESOLUTION);
        assert_eq!(g.x, (-1.0, 5.0));
        assert_eq!(g.y, (-0.5, 2.5));
        assert_eq!(g.xs().len(), 41);
    }
}
