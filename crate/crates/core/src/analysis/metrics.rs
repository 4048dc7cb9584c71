use crate::error::{EsvError, Result};
use crate::scalar::{compensated_sum, Scalar};

fn check_pair<T>(a: &[T], b: &[T], min_len: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(EsvError::validation(
            "phi_hat",
            format!("length {} differs from reference length {}", a.len(), b.len()),
        ));
    }
    if a.len() < min_len {
        return Err(EsvError::UndefinedMetric(format!(
            "need at least {min_len} elements, got {}",
            a.len()
        )));
    }
    Ok(())
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

/// Mean of `|phi_hat_i - phi_i| / A` with `A` the mean of `|phi_j|`.
pub fn relative_error<T: Scalar>(phi_hat: &[T], phi: &[T]) -> Result<T> {
    check_pair(phi_hat, phi, 1)?;
    let scale = compensated_sum(phi.iter().map(|v| v.abs()));
    if scale == T::zero() {
        return Err(EsvError::UndefinedMetric(
            "reference attribution is identically zero".into(),
        ));
    }
    let err = compensated_sum(phi_hat.iter().zip(phi).map(|(a, b)| (*a - *b).abs()));
    // the 1/n factors of both means cancel
    Ok(err / scale)
}

/// Product-moment correlation.
pub fn pearson_r<T: Scalar>(phi_hat: &[T], phi: &[T]) -> Result<T> {
    check_pair(phi_hat, phi, 2)?;
    let (a, b) = (to_f64(phi_hat), to_f64(phi));
    let n = a.len() as f64;
    let ma = compensated_sum(a.iter().copied()) / n;
    let mb = compensated_sum(b.iter().copied()) / n;
    let cov = compensated_sum(a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)));
    let va = compensated_sum(a.iter().map(|x| (x - ma) * (x - ma)));
    let vb = compensated_sum(b.iter().map(|y| (y - mb) * (y - mb)));
    if va <= 0.0 || vb <= 0.0 {
        return Err(EsvError::UndefinedMetric(
            "correlation needs nonzero variance in both vectors".into(),
        ));
    }
    Ok(T::lit((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0)))
}

/// Least-absolute-deviation line `phi_hat ≈ intercept + slope * phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadFit<T> {
    pub intercept: T,
    pub slope: T,
    pub iterations: usize,
}

const LAD_TOLERANCE: f64 = 1e-10;
const LAD_MAX_ITERATIONS: usize = 10_000;

/// LAD regression of `phi_hat` on `phi` by iteratively reweighted least
/// squares, carried out in `f64`.
///
/// Starts from the ordinary least-squares line and reweights by
/// `1 / max(|residual|, floor)` until intercept and slope move by less than
/// `1e-10` (relative to their magnitude). When the optimum is not unique the
/// solver returns the optimal line nearest its least-squares start, which is
/// deterministic for a given input.
pub fn lad_fit<T: Scalar>(phi_hat: &[T], phi: &[T]) -> Result<LadFit<T>> {
    check_pair(phi_hat, phi, 2)?;
    let (y, x) = (to_f64(phi_hat), to_f64(phi));
    let x0 = x[0];
    if x.iter().all(|v| *v == x0) {
        return Err(EsvError::UndefinedMetric(
            "LAD slope needs at least two distinct reference values".into(),
        ));
    }
    let spread = y
        .iter()
        .chain(&x)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let floor = 1e-13 * spread;

    let mut weights = vec![1.0; x.len()];
    let (mut a, mut b) = weighted_line(&x, &y, &weights).expect("x has spread");
    let mut iterations = 0;
    while iterations < LAD_MAX_ITERATIONS {
        iterations += 1;
        for ((w, xi), yi) in weights.iter_mut().zip(&x).zip(&y) {
            *w = 1.0 / (yi - a - b * xi).abs().max(floor);
        }
        let Some((na, nb)) = weighted_line(&x, &y, &weights) else {
            break;
        };
        let moved = (na - a).abs() + (nb - b).abs();
        a = na;
        b = nb;
        if moved <= LAD_TOLERANCE * (1.0 + a.abs() + b.abs()) {
            break;
        }
    }
    Ok(LadFit {
        intercept: T::lit(a),
        slope: T::lit(b),
        iterations,
    })
}

pub fn lad_slope<T: Scalar>(phi_hat: &[T], phi: &[T]) -> Result<T> {
    lad_fit(phi_hat, phi).map(|f| f.slope)
}

fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let sw = compensated_sum(w.iter().copied());
    let mx = compensated_sum(w.iter().zip(x).map(|(w, v)| w * v)) / sw;
    let my = compensated_sum(w.iter().zip(y).map(|(w, v)| w * v)) / sw;
    let sxx = compensated_sum(w.iter().zip(x).map(|(w, v)| w * (v - mx) * (v - mx)));
    let sxy = compensated_sum(w.iter().zip(x).zip(y).map(|((w, u), v)| w * (u - mx) * (v - my)));
    if sxx <= 0.0 || !sxx.is_finite() {
        return None;
    }
    let b = sxy / sxx;
    Some((my - b * mx, b))
}
