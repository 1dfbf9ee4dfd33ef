//! Long-AR stage of the estimator: solve the 2D Yule-Walker equations for a
//! high-order AR(K1,K2) approximation and inverse-filter the field into an
//! estimate of the driving noise.
//!
//! One equation is written per lag `(k,l)` in the quarter-plane box
//! `[0..K1] x [0..K2]` without the origin, which makes the system square in
//! the unknowns ordered by `lag_order(K1, K2)`:
//!
//! ```text
//! sum_ij alpha_ij r[k-i, l-j] = -r[k, l]
//! ```

use nalgebra::{DMatrix, DVector};

use crate::autocorr::{estimate_lags, LagGrid};
use crate::error::{Error, Result};
use crate::field::{lag_order, Field};
use crate::linalg;

/// Result of the long-AR stage.
#[derive(Debug, Clone)]
pub struct ArFit {
    pub k1: usize,
    pub k2: usize,
    /// Coefficients in `lag_order(k1, k2)` sequence.
    pub alpha: Vec<f64>,
    pub sigma2_hat: f64,
    /// Inverse-filter output on the valid region, size `(N1-k1) x (N2-k2)`;
    /// entry `(r, c)` sits at absolute coordinates `(r+k1, c+k2)`.
    pub residual: Field,
    pub regularized: bool,
}

/// Coefficient matrix, right-hand-side lags, and the shared lag layout.
pub type YwSystem = (DMatrix<f64>, DVector<f64>, Vec<(usize, usize)>);

/// Assembles the Yule-Walker system. Returns the coefficient matrix, the
/// right-hand-side lags `r[k,l]` (the solver negates them), and the lag
/// layout shared by rows and unknowns.
pub fn build_yw_system(lags: &LagGrid, k1: usize, k2: usize) -> Result<YwSystem> {
    if lags.kmax() < k1 || lags.lmax() < k2 {
        return Err(Error::InsufficientLagCoverage {
            have_k: lags.kmax(),
            have_l: lags.lmax(),
            need_k: k1,
            need_l: k2,
        });
    }
    let layout = lag_order(k1, k2);
    let dim = layout.len();
    let mut matrix = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for (row, &(k, l)) in layout.iter().enumerate() {
        rhs[row] = lags.get(k as isize, l as isize);
        for (col, &(i, j)) in layout.iter().enumerate() {
            matrix[(row, col)] = lags.get(k as isize - i as isize, l as isize - j as isize);
        }
    }
    Ok((matrix, rhs, layout))
}

/// Solves `R alpha = -r0`, falling back to a ridge-augmented solve when the
/// condition estimate exceeds `1e10`. The flag reports whether the ridge was
/// needed.
pub fn solve_yw(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<(Vec<f64>, bool)> {
    if matrix.nrows() != matrix.ncols() || matrix.nrows() != rhs.len() {
        return Err(Error::DimensionMismatch(format!(
            "Yule-Walker system is {}x{} with rhs length {}",
            matrix.nrows(),
            matrix.ncols(),
            rhs.len()
        )));
    }
    let solved = linalg::solve_square(matrix, &(-rhs))?;
    Ok((
        solved.solution.iter().copied().collect(),
        solved.regularized,
    ))
}

/// Innovation variance implied by the solved coefficients:
/// `r[0,0] + sum_ij alpha_ij r[-i,-j]`.
pub fn noise_variance(lags: &LagGrid, alpha: &[f64], k1: usize, k2: usize) -> Result<f64> {
    let layout = lag_order(k1, k2);
    if alpha.len() != layout.len() {
        return Err(Error::DimensionMismatch(format!(
            "alpha has {} entries, lag box needs {}",
            alpha.len(),
            layout.len()
        )));
    }
    let mut sigma2 = lags.r0();
    for (&(i, j), &a) in layout.iter().zip(alpha) {
        sigma2 += a * lags.get(-(i as isize), -(j as isize));
    }
    if !sigma2.is_finite() || sigma2 <= 0.0 {
        return Err(Error::DegenerateField(format!(
            "implied innovation variance {sigma2} is not positive"
        )));
    }
    Ok(sigma2)
}

/// Applies the inverse filter `w[n,m] = x[n,m] + sum alpha_ij x[n-i,m-j]`
/// over the fully-overlapping region `n in [k1..N1)`, `m in [k2..N2)`.
pub fn filter_residual(field: &Field, alpha: &[f64], k1: usize, k2: usize) -> Result<Field> {
    let (n1, n2) = (field.height(), field.width());
    if n1 <= k1 || n2 <= k2 {
        return Err(Error::FieldTooSmall {
            n1,
            n2,
            need1: k1 + 1,
            need2: k2 + 1,
        });
    }
    let layout = lag_order(k1, k2);
    if alpha.len() != layout.len() {
        return Err(Error::DimensionMismatch(format!(
            "alpha has {} entries, lag box needs {}",
            alpha.len(),
            layout.len()
        )));
    }
    let (h, w) = (n1 - k1, n2 - k2);
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        let n = r + k1;
        for c in 0..w {
            let m = c + k2;
            let mut acc = field.get(n, m);
            for (&(i, j), &a) in layout.iter().zip(alpha) {
                acc += a * field.get(n - i, m - j);
            }
            out[r * w + c] = acc;
        }
    }
    Field::new(h, w, out)
}

/// Runs the whole stage: lag estimation, Yule-Walker solve, variance, and
/// residual filtering. Lags are estimated out to `min(2K, N-1)` per axis.
pub fn fit_ar(field: &Field, k1: usize, k2: usize) -> Result<ArFit> {
    let (n1, n2) = (field.height(), field.width());
    if n1 <= k1 || n2 <= k2 {
        return Err(Error::FieldTooSmall {
            n1,
            n2,
            need1: k1 + 1,
            need2: k2 + 1,
        });
    }
    let kmax = (2 * k1).min(n1 - 1);
    let lmax = (2 * k2).min(n2 - 1);
    let lags = estimate_lags(field, kmax, lmax)?;
    let (matrix, rhs, _) = build_yw_system(&lags, k1, k2)?;
    let (alpha, regularized) = solve_yw(&matrix, &rhs)?;
    let sigma2_hat = noise_variance(&lags, &alpha, k1, k2)?;
    let residual = filter_residual(field, &alpha, k1, k2)?;
    Ok(ArFit {
        k1,
        k2,
        alpha,
        sigma2_hat,
        residual,
        regularized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{zero_mean, ArmaParams, ModelOrder};
    use crate::synthesis::{innovation_grid, synthesize, SynthesisConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Analytic autocorrelation of the separable AR(1,1) field with both
    /// poles at `rho` and unit innovation variance.
    fn separable_lags(rho: f64, kmax: usize, lmax: usize) -> LagGrid {
        let r00 = 1.0 / ((1.0 - rho * rho) * (1.0 - rho * rho));
        LagGrid::from_fn(kmax, lmax, |k, l| {
            r00 * rho.powi(k.unsigned_abs() as i32) * rho.powi(l.unsigned_abs() as i32)
        })
    }

    #[test]
    fn system_layout_k1() {
        let lags = separable_lags(0.5, 2, 2);
        let (matrix, rhs, layout) = build_yw_system(&lags, 1, 1).unwrap();
        assert_eq!(layout, vec![(0, 1), (1, 0), (1, 1)]);
        assert_eq!(matrix.shape(), (3, 3));
        // Row for lag (0,1), unknown (1,1): entry is r[-1, 0].
        assert_eq!(matrix[(0, 2)], lags.get(-1, 0));
        assert_eq!(rhs[0], lags.get(0, 1));
    }

    #[test]
    fn white_noise_lags_give_zero_alpha() {
        let lags = LagGrid::from_fn(2, 2, |k, l| if (k, l) == (0, 0) { 2.5 } else { 0.0 });
        let (matrix, rhs, _) = build_yw_system(&lags, 1, 1).unwrap();
        assert_eq!(matrix, DMatrix::identity(3, 3) * 2.5);
        let (alpha, reg) = solve_yw(&matrix, &rhs).unwrap();
        assert!(!reg);
        assert!(alpha.iter().all(|a| a.abs() < 1e-14));
    }

    #[test]
    fn separable_analytic_lags_recover_coefficients() {
        // The separable AR(1,1) autocorrelation satisfies the quarter-plane
        // recursion exactly, so the solve is exact up to rounding.
        let lags = separable_lags(0.5, 4, 4);
        let (matrix, rhs, layout) = build_yw_system(&lags, 1, 1).unwrap();
        let (alpha, _) = solve_yw(&matrix, &rhs).unwrap();
        let expect = [(0usize, 1usize, -0.5), (1, 0, -0.5), (1, 1, 0.25)];
        for ((i, j, want), got) in expect.iter().zip(&alpha) {
            assert!(
                (got - want).abs() < 1e-10,
                "alpha[{i},{j}] = {got}, want {want}"
            );
        }
        assert_eq!(layout.len(), 3);

        // Truncating at a higher order pads with zeros.
        let (matrix2, rhs2, layout2) = build_yw_system(&lags, 2, 2).unwrap();
        let (alpha2, _) = solve_yw(&matrix2, &rhs2).unwrap();
        for (&(i, j), a) in layout2.iter().zip(&alpha2) {
            let want = match (i, j) {
                (0, 1) | (1, 0) => -0.5,
                (1, 1) => 0.25,
                _ => 0.0,
            };
            assert!((a - want).abs() < 1e-9, "alpha[{i},{j}] = {a}");
        }

        // sigma2 = r00 (1 - rho^2)^2 = 1 for these lags.
        let sigma2 = noise_variance(&lags, &alpha, 1, 1).unwrap();
        assert!((sigma2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn solve_yw_identity_and_failure_cases() {
        let eye = DMatrix::<f64>::identity(3, 3);
        let rhs = DVector::from_vec(vec![0.5, 0.3, 0.1]);
        let (alpha, reg) = solve_yw(&eye, &rhs).unwrap();
        assert!(!reg);
        assert_eq!(alpha, vec![-0.5, -0.3, -0.1]);

        let zero = DMatrix::<f64>::zeros(3, 3);
        assert!(matches!(solve_yw(&zero, &rhs), Err(Error::SingularSystem)));
    }

    #[test]
    fn solve_matches_pseudo_inverse_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let dim = 8;
            let mut m = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
            for i in 0..dim {
                m[(i, i)] += 4.0; // keep it well conditioned
            }
            let rhs = DVector::<f64>::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
            let (alpha, reg) = solve_yw(&m, &rhs).unwrap();
            assert!(!reg);
            // Independent route: explicit inverse.
            let inv = m.clone().try_inverse().unwrap();
            let oracle = inv * (-&rhs);
            for (a, o) in alpha.iter().zip(oracle.iter()) {
                assert!((a - o).abs() <= 1e-8 * o.abs().max(1.0));
            }
        }
    }

    #[test]
    fn noise_variance_scales_with_lags() {
        let lags = separable_lags(0.5, 2, 2);
        let scaled = LagGrid::from_fn(2, 2, |k, l| 4.0 * lags.get(k, l));
        let alpha = vec![-0.5, -0.5, 0.25];
        let base = noise_variance(&lags, &alpha, 1, 1).unwrap();
        let big = noise_variance(&scaled, &alpha, 1, 1).unwrap();
        assert!((big - 4.0 * base).abs() < 1e-12 * big.abs());
    }

    #[test]
    fn noise_variance_rejects_inconsistent_lags() {
        let lags = LagGrid::from_fn(1, 1, |k, l| if (k, l) == (0, 0) { 1.0 } else { 2.0 });
        let alpha = vec![-1.0, -1.0, 0.0];
        assert!(noise_variance(&lags, &alpha, 1, 1).is_err());
    }

    #[test]
    fn zero_alpha_filter_is_identity_on_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let values: Vec<f64> = (0..48).map(|_| rng.random_range(-1.0..1.0)).collect();
        let field = Field::new(6, 8, values).unwrap();
        let filtered = filter_residual(&field, &[0.0; 8], 2, 2).unwrap();
        assert_eq!(filtered.height(), 4);
        assert_eq!(filtered.width(), 6);
        for r in 0..4 {
            for c in 0..6 {
                assert_eq!(filtered.get(r, c), field.get(r + 2, c + 2));
            }
        }
    }

    #[test]
    fn true_alpha_recovers_generating_noise() {
        let order = ModelOrder::new(1, 1, 0, 0, 2, 2).unwrap();
        let a = [((0, 1), -0.5), ((1, 0), -0.5), ((1, 1), 0.25)]
            .into_iter()
            .collect();
        let params = ArmaParams::new(&order, a, Default::default(), 1.0).unwrap();
        let config = SynthesisConfig::new(order, params, 64, 64, 16, 8).unwrap();
        let field = synthesize(&config).unwrap();
        let noise = innovation_grid(&config);

        // Filtering with the true coefficients must return the generating
        // noise on the valid region (up to floating-point roundoff).
        let alpha = vec![-0.5, -0.5, 0.25];
        let resid = filter_residual(&field, &alpha, 1, 1).unwrap();
        for r in 0..resid.height() {
            for c in 0..resid.width() {
                let w = noise.get(16 + 1 + r, 16 + 1 + c);
                assert!((resid.get(r, c) - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn estimated_alpha_on_white_noise_keeps_variance() {
        let order = ModelOrder::new(0, 0, 0, 0, 1, 1).unwrap();
        let params = ArmaParams::zeros(&order, 1.0).unwrap();
        let config = SynthesisConfig::new(order, params, 128, 128, 16, 21).unwrap();
        let field = synthesize(&config).unwrap();
        let (field, _) = zero_mean(&field);
        let fit = fit_ar(&field, 2, 2).unwrap();
        let ratio = fit.residual.variance() / field.variance();
        assert!((ratio - 1.0).abs() < 0.1, "variance ratio {ratio}");
        assert!((fit.sigma2_hat - 1.0).abs() < 0.1);
    }
}
