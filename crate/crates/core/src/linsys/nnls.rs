//! Lawson-Hanson active-set non-negative least squares.

use nalgebra::{DMatrix, DVector};

/// Outcome of one NNLS solve.
#[derive(Clone, Debug)]
pub struct NnlsResult {
    pub x: DVector<f64>,
    /// False when the iteration cap stopped the outer loop.
    pub converged: bool,
}

/// Minimizes ‖Ax − b‖² + λ‖x‖² over x ≥ 0.
/// The ridge term is applied implicitly as extra rows √λ·I, so it only touches passive columns.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64, max_iter: usize) -> NnlsResult {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-10 * (1.0 + a.abs().max()) * (a.nrows().max(n) as f64).sqrt();
    let mut iter = 0;
    loop {
        let r = b - a * &x;
        let mut w = a.transpose() * r;
        for j in 0..n {
            w[j] -= lambda * x[j];
        }
        // Entering column: largest positive gradient among the zero set, first index on ties.
        let mut best: Option<usize> = None;
        for j in 0..n {
            if !passive[j] && w[j] > tol && best.is_none_or(|k| w[j] > w[k]) {
                best = Some(j);
            }
        }
        let Some(t) = best else {
            return NnlsResult { x, converged: true };
        };
        if iter >= max_iter {
            return NnlsResult { x, converged: false };
        }
        passive[t] = true;
        loop {
            iter += 1;
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z = solve_passive(a, b, lambda, &cols);
            if z.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &j) in cols.iter().enumerate() {
                    x[j] = z[k];
                }
                break;
            }
            // Step back towards the feasible region until the first passive variable hits zero.
            let mut alpha = f64::INFINITY;
            for (k, &j) in cols.iter().enumerate() {
                if z[k] <= 0.0 {
                    let denom = x[j] - z[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &j) in cols.iter().enumerate() {
                x[j] += alpha * (z[k] - x[j]);
            }
            for &j in &cols {
                if x[j] <= tol {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if iter >= max_iter {
                return NnlsResult { x, converged: false };
            }
        }
    }
}

/// Minimum-norm least-squares solution over all columns, if it is nonnegative up to `tol`.
/// Negative noise within `tol` is clipped to zero.
pub fn min_norm_nonneg(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let x = svd.solve(b, 1e-12).ok()?;
    x.iter().all(|&v| v >= -tol).then(|| x.map(|v| v.max(0.0)))
}

/// Unconstrained least squares restricted to the given columns.
fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64, cols: &[usize]) -> DVector<f64> {
    let m = a.nrows();
    let k = cols.len();
    let extra = if lambda > 0.0 { k } else { 0 };
    let mut ap = DMatrix::zeros(m + extra, k);
    for (c, &j) in cols.iter().enumerate() {
        ap.view_mut((0, c), (m, 1)).copy_from(&a.column(j));
        if extra > 0 {
            ap[(m + c, c)] = lambda.sqrt();
        }
    }
    let mut bp = DVector::zeros(m + extra);
    bp.rows_mut(0, m).copy_from(b);
    let svd = ap.svd(true, true);
    svd.solve(&bp, 1e-12).unwrap_or_else(|_| DVector::zeros(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_nonnegative_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![0.3, 0.7, 1.0]);
        let r = nnls(&a, &b, 0.0, 1000);
        assert!(r.converged);
        assert!((r.x[0] - 0.3).abs() < 1e-12 && (r.x[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn min_norm_spreads_mass_evenly() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0]);
        let x = min_norm_nonneg(&a, &b, 1e-12).unwrap();
        assert!(x.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        assert!(min_norm_nonneg(&a, &b, 1e-12).is_none());
    }

    #[test]
    fn clamps_negative_direction() {
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        let b = DVector::from_vec(vec![-2.0]);
        let r = nnls(&a, &b, 0.0, 100);
        assert_eq!(r.x[0], 0.0);
    }
}
