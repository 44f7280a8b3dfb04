use crate::{Error, Result};

/// Least-squares slope of the points `(ℓ, z[ℓ-1])` for `ℓ = 1..=L`.
pub fn slope(z: &[f64]) -> Result<f64> {
    let l = z.len();
    if l < 2 {
        return Err(Error::Shape(format!("a slope needs at least 2 layers, got {l}")));
    }
    let center = (l as f64 + 1.0) / 2.0;
    let z_mean = z.iter().sum::<f64>() / l as f64;
    let mut sxz = 0.0;
    let mut sxx = 0.0;
    for (i, &v) in z.iter().enumerate() {
        let dx = (i + 1) as f64 - center;
        sxz += dx * (v - z_mean);
        sxx += dx * dx;
    }
    Ok(sxz / sxx)
}
