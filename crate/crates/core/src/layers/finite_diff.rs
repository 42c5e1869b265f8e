use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central differences `(f(+h) − f(−h)) / 2h` for `n` coordinates.
///
/// `eval(i, delta)` must return the objective with coordinate `i` shifted by
/// `delta`. Coordinates are evaluated in parallel and assembled in index
/// order, so the result does not depend on scheduling.
pub fn finite_diff_partials<F>(n: usize, h: f64, eval: F) -> Result<Vec<f64>>
where
    F: Fn(usize, f64) -> Result<f64> + Sync,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::param("h", format!("{h} must be positive")));
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let plus = eval(i, h)?;
            let minus = eval(i, -h)?;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite("finite-difference evaluation"));
            }
            Ok((plus - minus) / (2.0 * h))
        })
        .collect()
}

/// Central-difference gradient of `f` at `params`.
pub fn finite_diff_grad<F>(f: F, params: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    finite_diff_partials(params.len(), h, |i, delta| {
        let mut p = params.to_vec();
        p[i] += delta;
        f(&p)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_slope() {
        let g = finite_diff_grad(|t| Ok(t[0] * t[0]), &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-7);
    }

    #[test]
    fn linear_is_exact() {
        let a = [2.5, -0.75, 4.0];
        let f = |t: &[f64]| Ok(t.iter().zip(&a).map(|(x, y)| x * y).sum::<f64>() + 1.0);
        let g = finite_diff_grad(f, &[0.3, 1.7, -2.0], 1e-5).unwrap();
        for (gi, ai) in g.iter().zip(&a) {
            assert!((gi - ai).abs() < 1e-9);
        }
    }

    #[test]
    fn non_finite_reported() {
        let r = finite_diff_grad(|t| Ok(1.0 / t[0]), &[0.0], 1e-5);
        assert!(r.is_ok());
        let r = finite_diff_grad(|t| Ok(t[0].ln()), &[0.0], 1e-5);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn bad_step_rejected() {
        assert!(finite_diff_grad(|t| Ok(t[0]), &[0.0], 0.0).is_err());
    }
}
