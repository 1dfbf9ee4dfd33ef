//! Second stage of the estimator: regress the field on its own lags and on
//! the lagged noise proxy from the long-AR stage, then solve least squares
//! for the packed coefficient vector.
//!
//! With margins `L = K1 + q1` and `M = K2 + q2`, one regression row is
//! written per site `(n, m)` with `n in [L+1 .. N1)`, `m in [M+1 .. N2)`,
//! scanned row-major (`n` outer). The least-squares minimizer is invariant
//! to the row order.

use nalgebra::{DMatrix, DVector};

use crate::ar_yw::fit_ar;
use crate::error::{Error, Result};
use crate::field::{theta_unpack, ArmaParams, Field, ModelOrder};
use crate::linalg;

/// A fitted ARMA model plus the intermediate fields needed to reuse the fit
/// (block reconstruction, whiteness checks).
#[derive(Debug, Clone)]
pub struct ArmaFit {
    pub order: ModelOrder,
    pub params: ArmaParams,
    /// Packed coefficients, AR block then MA block in lag order.
    pub theta: Vec<f64>,
    /// Number of rows in the regression.
    pub regression_rows: usize,
    /// True if either stage needed the ridge fallback.
    pub regularized: bool,
    /// Sample variance of the final regression residual.
    pub sigma2_hat: f64,
    /// Stage-1 noise proxy; entry `(r, c)` sits at absolute `(r+k1, c+k2)`.
    pub noise: Field,
    /// Final residual on the regression grid; entry `(r, c)` sits at
    /// absolute `(r+L+1, c+M+1)`.
    pub residual: Field,
}

/// Builds the regression matrix and target vector. `noise` must be the
/// stage-1 residual, whose origin is offset by `(k1, k2)` from the field.
/// Each row holds the field at the AR lags followed by the negated noise at
/// the MA lags; the target holds the field value at the row's site.
pub fn build_phi(
    field: &Field,
    noise: &Field,
    order: &ModelOrder,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (n1, n2) = (field.height(), field.width());
    let (l, m) = order.margins();
    if noise.height() != n1 - order.k1 || noise.width() != n2 - order.k2 {
        return Err(Error::DimensionMismatch(format!(
            "noise field is {}x{}, expected {}x{} for k=({},{})",
            noise.height(),
            noise.width(),
            n1 - order.k1,
            n2 - order.k2,
            order.k1,
            order.k2
        )));
    }
    if n1 < l + 2 || n2 < m + 2 {
        return Err(Error::FieldTooSmall {
            n1,
            n2,
            need1: l + 2,
            need2: m + 2,
        });
    }
    let ar_lags = order.ar_lags();
    let ma_lags = order.ma_lags();
    let rows = (n1 - 1 - l) * (n2 - 1 - m);
    let cols = order.theta_len();
    let mut phi = DMatrix::<f64>::zeros(rows, cols);
    let mut target = DVector::<f64>::zeros(rows);
    let mut row = 0;
    for n in l + 1..n1 {
        for mm in m + 1..n2 {
            let mut col = 0;
            for &(i, j) in &ar_lags {
                phi[(row, col)] = field.get(n - i, mm - j);
                col += 1;
            }
            for &(i, j) in &ma_lags {
                phi[(row, col)] = -noise.get(n - i - order.k1, mm - j - order.k2);
                col += 1;
            }
            target[row] = field.get(n, mm);
            row += 1;
        }
    }
    debug_assert_eq!(row, rows);
    Ok((phi, target))
}

/// Least-squares solve for the packed coefficients: minimizes
/// `||x + Phi theta||` through an orthogonal factorization, with a ridge
/// fallback on the normal equations past condition `1e10`.
pub fn solve_theta(phi: &DMatrix<f64>, x: &DVector<f64>) -> Result<(Vec<f64>, bool)> {
    if phi.nrows() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "phi has {} rows but x has {} entries",
            phi.nrows(),
            x.len()
        )));
    }
    let solved = linalg::solve_least_squares(phi.clone(), &(-x))?;
    Ok((
        solved.solution.iter().copied().collect(),
        solved.regularized,
    ))
}

/// Runs both stages on a zero-mean field and returns the fitted model.
///
/// The reported `sigma2_hat` is the sample variance of the final regression
/// residual `x + Phi theta`, not the long-AR stage's variance.
pub fn estimate(field: &Field, order: &ModelOrder) -> Result<ArmaFit> {
    if order.theta_len() == 0 {
        return Err(Error::InvalidOrder(
            "estimation requires at least one AR or MA coefficient".into(),
        ));
    }
    let (n1, n2) = (field.height(), field.width());
    let need1 = order.k1 + order.q1 + order.p1 + 2;
    let need2 = order.k2 + order.q2 + order.p2 + 2;
    if n1 < need1 || n2 < need2 {
        return Err(Error::FieldTooSmall {
            n1,
            n2,
            need1,
            need2,
        });
    }
    if field.variance() < 1e-24 {
        return Err(Error::DegenerateField(
            "field is constant or nearly constant".into(),
        ));
    }

    let ar_fit = fit_ar(field, order.k1, order.k2)?;
    let (phi, x) = build_phi(field, &ar_fit.residual, order)?;
    let (theta, ls_regularized) = solve_theta(&phi, &x)?;

    let fitted = &x + &phi * DVector::from_column_slice(&theta);
    let rows = fitted.len();
    let mean = fitted.sum() / rows as f64;
    let sigma2_hat = fitted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / rows as f64;
    if sigma2_hat <= 0.0 || !sigma2_hat.is_finite() {
        return Err(Error::DegenerateField(
            "final residual has zero variance".into(),
        ));
    }

    let (l, m) = order.margins();
    let residual = Field::new(n1 - 1 - l, n2 - 1 - m, fitted.iter().copied().collect())?;
    let params = theta_unpack(&theta, order, sigma2_hat)?;
    Ok(ArmaFit {
        order: *order,
        params,
        theta,
        regression_rows: rows,
        regularized: ar_fit.regularized || ls_regularized,
        sigma2_hat,
        noise: ar_fit.residual,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::zero_mean;
    use crate::synthesis::{synthesize, SynthesisConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn random_field(n1: usize, n2: usize, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::new(
            n1,
            n2,
            (0..n1 * n2).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn phi_rows_hold_ar_lags() {
        let order = ModelOrder::new(1, 1, 0, 0, 2, 2).unwrap();
        let field = random_field(8, 8, 1);
        let noise = Field::new(6, 6, vec![0.0; 36]).unwrap();
        let (phi, x) = build_phi(&field, &noise, &order).unwrap();
        let (l, m) = order.margins();
        assert_eq!((l, m), (2, 2));
        assert_eq!(phi.nrows(), 25);
        // First row is site (3, 3): [x[3,2], x[2,3], x[2,2]].
        assert_eq!(phi[(0, 0)], field.get(3, 2));
        assert_eq!(phi[(0, 1)], field.get(2, 3));
        assert_eq!(phi[(0, 2)], field.get(2, 2));
        assert_eq!(x[0], field.get(3, 3));
    }

    #[test]
    fn phi_rows_hold_negated_noise_lags() {
        let order = ModelOrder::new(0, 0, 1, 1, 2, 2).unwrap();
        let field = random_field(8, 8, 2);
        let noise = random_field(6, 6, 3);
        let (phi, _) = build_phi(&field, &noise, &order).unwrap();
        let (l, m) = order.margins();
        assert_eq!((l, m), (3, 3));
        // First row is site (4, 4); w[n,m] lives at noise[n-2, m-2].
        assert_eq!(phi[(0, 0)], -noise.get(2, 1)); // -w[4, 3]
        assert_eq!(phi[(0, 1)], -noise.get(1, 2)); // -w[3, 4]
        assert_eq!(phi[(0, 2)], -noise.get(1, 1)); // -w[3, 3]
    }

    #[test]
    fn regression_row_count() {
        let order = ModelOrder::new(1, 1, 1, 1, 6, 6).unwrap();
        let field = random_field(256, 256, 4);
        let noise = Field::new(250, 250, vec![0.0; 250 * 250]).unwrap();
        let (phi, _) = build_phi(&field, &noise, &order).unwrap();
        assert_eq!(phi.nrows(), 248 * 248);
        assert_eq!(phi.nrows(), 61504);
    }

    #[test]
    fn solve_theta_orthonormal_columns() {
        // Phi with orthonormal columns: theta = -Phi^t x.
        let phi = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let x = DVector::from_vec(vec![0.7, -0.2, 5.0, 1.0]);
        let (theta, reg) = solve_theta(&phi, &x).unwrap();
        assert!(!reg);
        assert!((theta[0] - -0.7).abs() < 1e-12);
        assert!((theta[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn solve_theta_zero_target() {
        let phi = DMatrix::from_fn(10, 3, |i, j| ((i * 3 + j) as f64).sin());
        let x = DVector::zeros(10);
        let (theta, _) = solve_theta(&phi, &x).unwrap();
        assert!(theta.iter().all(|t| t.abs() < 1e-12));
    }

    #[test]
    fn solve_theta_matches_normal_equations_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let phi = DMatrix::<f64>::from_fn(100, 5, |_, _| rng.random_range(-1.0..1.0));
            let x = DVector::<f64>::from_fn(100, |_, _| rng.random_range(-1.0..1.0));
            let (theta, reg) = solve_theta(&phi, &x).unwrap();
            assert!(!reg);
            // Independent route: explicit normal-equations inverse.
            let gram = phi.transpose() * &phi;
            let oracle = -(gram.try_inverse().unwrap() * phi.transpose() * &x);
            for (t, o) in theta.iter().zip(oracle.iter()) {
                assert!((t - o).abs() <= 1e-8 * o.abs().max(1.0), "{t} vs {o}");
            }
        }
    }

    #[test]
    fn estimate_recovers_separable_ar() {
        let order = ModelOrder::new(1, 1, 0, 0, 4, 4).unwrap();
        let a: BTreeMap<_, _> = [((0, 1), -0.5), ((1, 0), -0.5), ((1, 1), 0.25)]
            .into_iter()
            .collect();
        let params = ArmaParams::new(&order, a, BTreeMap::new(), 1.0).unwrap();
        let config = SynthesisConfig::new(order, params, 256, 256, 64, 0).unwrap();
        let field = synthesize(&config).unwrap();
        let (field, _) = zero_mean(&field);
        let fit = estimate(&field, &order).unwrap();
        let truth = [-0.5, -0.5, 0.25];
        for (got, want) in fit.theta.iter().zip(truth) {
            assert!((got - want).abs() < 0.05, "theta {got} vs {want}");
        }
        assert!((fit.sigma2_hat - 1.0).abs() < 0.1);
        assert_eq!(fit.regression_rows, (256 - 5) * (256 - 5));
    }

    #[test]
    fn estimate_rejects_constant_and_tiny_fields() {
        let order = ModelOrder::new(1, 1, 0, 0, 2, 2).unwrap();
        let flat = Field::new(32, 32, vec![3.0; 1024]).unwrap();
        let (flat, _) = zero_mean(&flat);
        assert!(matches!(
            estimate(&flat, &order),
            Err(Error::DegenerateField(_))
        ));

        let small = random_field(4, 4, 5);
        assert!(matches!(
            estimate(&small, &order),
            Err(Error::FieldTooSmall { .. })
        ));
    }
}
