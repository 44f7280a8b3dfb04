use crate::{Error, Result};

/// Pearson correlation with sample (`n - 1`) moments, named arguments for errors.
///
/// A constant argument is an [`Error::UndefinedCorrelation`], never 0 or NaN.
pub fn pearson_named(a: &[f64], a_name: &str, b: &[f64], b_name: &str) -> Result<f64> {
    let n = a.len();
    if n != b.len() {
        return Err(Error::Shape(format!(
            "`{a_name}` has {n} entries, `{b_name}` has {}",
            b.len()
        )));
    }
    if n < 2 {
        return Err(Error::Shape(format!("correlation needs n >= 2, got {n}")));
    }
    for (v, name) in [(a, a_name), (b, b_name)] {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("`{name}`")));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    for (v, s, name) in [(a, saa, a_name), (b, sbb, b_name)] {
        if s <= 0.0 || v.iter().all(|&x| x == v[0]) {
            return Err(Error::UndefinedCorrelation(name.to_string()));
        }
    }
    // the (n - 1) factors of covariance and both deviations cancel
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    pearson_named(a, "a", b, "b")
}
