use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{self, Purpose};
use crate::{Error, Result};

const BLOCK: usize = 6;
const TOL: f64 = 1e-10;
const MAX_ITER: usize = 20_000;
/// Second eigenvalue at or below this fraction of the first counts as zero.
const RANK_TOL: f64 = 1e-12;

/// Top-two principal directions of a set of states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca2Basis {
    pub mean: Vec<f64>,
    /// Orthonormal. Each is signed so that its largest-magnitude entry is positive.
    pub components: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
    /// Sum of the variances along every direction.
    pub total_variance: f64,
    /// 2, or 1 when the states lie on a line (the second component is then an
    /// arbitrary orthonormal complement and carries zero variance).
    pub rank: usize,
}

impl Pca2Basis {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn project(&self, state: &[f64]) -> Result<[f64; 2]> {
        if state.len() != self.dim() {
            return Err(Error::Shape(format!(
                "state of {} entries projected on a basis of dimension {}",
                state.len(),
                self.dim()
            )));
        }
        let mut out = [0.0; 2];
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = state.iter().zip(&self.mean).zip(c).map(|((s, m), v)| (s - m) * v).sum();
        }
        Ok(out)
    }

    /// `mean + x * u1 + y * u2`.
    pub fn reconstruct(&self, coords: [f64; 2]) -> Vec<f64> {
        let [u, v] = &self.components;
        self.mean
            .iter()
            .zip(u.iter().zip(v))
            .map(|(m, (a, b))| m + coords[0] * a + coords[1] * b)
            .collect()
    }

    pub fn explained_ratio(&self) -> [f64; 2] {
        self.explained_variance.map(|v| v / self.total_variance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca2 {
    pub basis: Pca2Basis,
    /// Projected coordinates of every input state, in order.
    pub path: Vec<[f64; 2]>,
}

/// Two-component PCA of `states` (at least 3, equal length, dimension >= 2).
pub fn pca2(states: &[&[f64]]) -> Result<Pca2> {
    let s = states.len();
    if s < 3 {
        return Err(Error::Degenerate(format!("PCA needs at least 3 states, got {s}")));
    }
    let d = states[0].len();
    if d < 2 {
        return Err(Error::Degenerate(format!("PCA needs states of dimension >= 2, got {d}")));
    }
    if let Some(bad) = states.iter().find(|x| x.len() != d) {
        return Err(Error::Shape(format!("state of {} entries among states of {d}", bad.len())));
    }
    if states.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("trajectory state".into()));
    }

    let mut mean = vec![0.0; d];
    for x in states {
        for (m, v) in mean.iter_mut().zip(x.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= s as f64);
    let centered = DMatrix::from_fn(s, d, |i, j| states[i][j] - mean[j]);
    let total_variance = centered.norm_squared() / (s - 1) as f64;
    if total_variance == 0.0 {
        return Err(Error::Degenerate("trajectory states have zero variance".into()));
    }

    let cov = |q: &DMatrix<f64>| -> DMatrix<f64> { centered.tr_mul(&(&centered * q)) / (s - 1) as f64 };

    let p = BLOCK.min(d);
    let mut r = rng::stream(0, Purpose::PowerIteration);
    let start = DMatrix::from_fn(d, p, |_, _| StandardNormal.sample(&mut r));
    let mut q = orthonormalize(start);
    let mut cq = cov(&q);
    let mut values = [0.0; 2];
    let mut converged = false;
    for _ in 0..MAX_ITER {
        q = orthonormalize(cq);
        let cq_raw = cov(&q);
        let h = q.tr_mul(&cq_raw);
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let v = DMatrix::from_fn(p, p, |i, j| eig.eigenvectors[(i, order[j])]);
        q = &q * &v;
        cq = cq_raw * v;
        values = [eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]];
        let scale = values[0].abs().max(f64::MIN_POSITIVE);
        converged = (0..2).all(|k| (cq.column(k) - q.column(k) * values[k]).norm() <= TOL * scale);
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: MAX_ITER,
            last: values[0],
        });
    }

    let rank = if values[1] <= RANK_TOL * values[0] { 1 } else { 2 };
    let mut components = [q.column(0).iter().copied().collect::<Vec<_>>(), Vec::new()];
    components[1] = if rank == 2 {
        q.column(1).iter().copied().collect()
    } else {
        complement(&components[0])
    };
    for c in components.iter_mut() {
        orient(c);
    }
    let explained_variance = if rank == 2 { values } else { [values[0], 0.0] };
    let basis = Pca2Basis {
        mean,
        components,
        explained_variance,
        total_variance,
        rank,
    };
    let path = states.iter().map(|x| basis.project(x)).collect::<Result<_>>()?;
    Ok(Pca2 { basis, path })
}

fn orthonormalize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    // Modified Gram-Schmidt, applied twice. A column that collapses is
    // replaced by the unit axis with the largest part outside the span of
    // the earlier columns.
    for j in 0..m.ncols() {
        let before = m.column(j).norm();
        let mut n = project_out(&mut m, j);
        if n <= 1e-8 * before || n == 0.0 {
            let axis = (0..m.nrows())
                .map(|a| (a, 1.0 - (0..j).map(|k| m[(a, k)] * m[(a, k)]).sum::<f64>()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .map_or(0, |(a, _)| a);
            m.column_mut(j).fill(0.0);
            m[(axis, j)] = 1.0;
            n = project_out(&mut m, j);
        }
        m.column_mut(j).scale_mut(1.0 / n);
    }
    m
}

/// Removes from column `j` its components along columns `0..j` (twice) and
/// returns the remaining norm.
fn project_out(m: &mut DMatrix<f64>, j: usize) -> f64 {
    for _ in 0..2 {
        for k in 0..j {
            let proj = m.column(j).dot(&m.column(k));
            let ck = m.column(k).clone_owned();
            m.column_mut(j).axpy(-proj, &ck, 1.0);
        }
    }
    m.column(j).norm()
}

/// A unit vector orthogonal to the unit vector `u`.
fn complement(u: &[f64]) -> Vec<f64> {
    let j = u
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(j, _)| j)
        .unwrap_or(0);
    let mut v: Vec<f64> = u.iter().map(|a| -a * u[j]).collect();
    v[j] += 1.0;
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= n);
    v
}

fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, a) in v.iter().enumerate() {
        if a.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|a| *a = -*a);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn axis_aligned_variances() {
        let states: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64 / 39.0 * std::f64::consts::TAU;
                vec![3.0 * t.cos(), 1.0, 0.5 * t.sin(), 2.0]
            })
            .collect();
        let refs: Vec<&[f64]> = states.iter().map(Vec::as_slice).collect();
        let pca = pca2(&refs).unwrap();
        let [u, v] = &pca.basis.components;
        assert!((u[0] - 1.0).abs() < 1e-9, "{u:?}");
        assert!((v[2] - 1.0).abs() < 1e-9, "{v:?}");
        assert!(dot(u, v).abs() < 1e-12);
        assert_eq!(pca.basis.rank, 2);
        let ratio = pca.basis.explained_ratio();
        assert!((ratio[0] + ratio[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_states_are_rank_one() {
        let states: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64, 0.0]).collect();
        let refs: Vec<&[f64]> = states.iter().map(Vec::as_slice).collect();
        let pca = pca2(&refs).unwrap();
        assert_eq!(pca.basis.rank, 1);
        assert_eq!(pca.basis.explained_variance[1], 0.0);
        let [u, v] = &pca.basis.components;
        assert!(dot(u, v).abs() < 1e-12);
        assert!((dot(v, v) - 1.0).abs() < 1e-12);
        for (p, s) in pca.path.iter().zip(&states) {
            let back = pca.basis.reconstruct(*p);
            for (a, b) in back.iter().zip(s) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_inputs() {
        let a = [1.0, 2.0];
        assert!(matches!(pca2(&[&a, &a]), Err(Error::Degenerate(_))));
        assert!(matches!(pca2(&[&a, &a, &a]), Err(Error::Degenerate(_))));
        let b = [1.0];
        assert!(matches!(pca2(&[&b, &b, &b]), Err(Error::Degenerate(_))));
        let c = [1.0, 2.0, 3.0];
        assert!(matches!(pca2(&[&a, &a, &c]), Err(Error::Shape(_))));
    }
}
