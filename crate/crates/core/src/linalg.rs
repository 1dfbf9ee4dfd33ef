//! Internal solvers shared by the two estimation stages: SVD-backed square
//! solve and QR-backed least squares, each with a condition estimate and a
//! ridge fallback on near-singular systems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition estimates beyond this trigger the ridge fallback.
pub(crate) const CONDITION_LIMIT: f64 = 1e10;
/// Ridge term is `RIDGE_SCALE * trace / dim`.
pub(crate) const RIDGE_SCALE: f64 = 1e-8;

pub(crate) struct Solved {
    pub solution: DVector<f64>,
    pub regularized: bool,
}

fn singular_extrema(values: &[f64]) -> (f64, f64) {
    let mut max = 0.0f64;
    let mut min = f64::INFINITY;
    for &s in values {
        max = max.max(s);
        min = min.min(s);
    }
    (max, min)
}

fn svd_solve(m: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let dim = m.nrows().max(m.ncols());
    let svd = m.svd(true, true);
    let (smax, _) = singular_extrema(svd.singular_values.as_slice());
    if smax <= 0.0 {
        return None;
    }
    // Pseudo-inverse with the usual numerical-rank cutoff.
    let cutoff = smax * f64::EPSILON * dim as f64;
    let u = svd.u.as_ref()?;
    let v_t = svd.v_t.as_ref()?;
    let mut projected = u.transpose() * rhs;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            projected[i] /= s;
        } else {
            return None;
        }
    }
    Some(v_t.transpose() * projected)
}

/// Solves the square system `a x = b`. If the condition estimate of `a`
/// exceeds [`CONDITION_LIMIT`], re-solves with `trace(a)/dim * 1e-8` added
/// to the diagonal and flags the result.
pub(crate) fn solve_square(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Solved> {
    assert_eq!(a.nrows(), a.ncols(), "square system expected");
    let svd = a.clone().svd(true, true);
    let (smax, smin) = singular_extrema(svd.singular_values.as_slice());
    if smax > 0.0 && smin > 0.0 && smax / smin <= CONDITION_LIMIT {
        let u = svd.u.as_ref().expect("u requested");
        let v_t = svd.v_t.as_ref().expect("v_t requested");
        let mut projected = u.transpose() * b;
        for (i, &s) in svd.singular_values.iter().enumerate() {
            projected[i] /= s;
        }
        return Ok(Solved {
            solution: v_t.transpose() * projected,
            regularized: false,
        });
    }
    let dim = a.nrows();
    let lambda = RIDGE_SCALE * a.trace() / dim as f64;
    let mut ridged = a.clone();
    for i in 0..dim {
        ridged[(i, i)] += lambda;
    }
    match svd_solve(ridged, b) {
        Some(solution) => Ok(Solved {
            solution,
            regularized: true,
        }),
        None => Err(Error::SingularSystem),
    }
}

/// Minimizes `||a x - b||` for `rows >= cols` via a thin QR factorization.
/// The condition of the normal-equations matrix (the squared condition of
/// `a`) decides the ridge fallback, keeping the threshold comparable with
/// [`solve_square`].
pub(crate) fn solve_least_squares(a: DMatrix<f64>, b: &DVector<f64>) -> Result<Solved> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(Error::DimensionMismatch(format!(
            "least-squares system has {rows} rows but {cols} unknowns"
        )));
    }
    let qr = a.qr();
    let q = qr.q();
    let r = qr.r();
    let z = q.transpose() * b;

    let svd = r.clone().svd(false, false);
    let (smax, smin) = singular_extrema(svd.singular_values.as_slice());
    if smax <= 0.0 {
        return Err(Error::SingularSystem);
    }
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if cond * cond <= CONDITION_LIMIT {
        // Back-substitution through the SVD of R (R is tiny).
        let solution = svd_solve(r, &z).ok_or(Error::SingularSystem)?;
        return Ok(Solved {
            solution,
            regularized: false,
        });
    }

    // Ridge on the normal equations; trace(a^t a) = ||R||_F^2.
    let trace: f64 = r.iter().map(|v| v * v).sum();
    let lambda = RIDGE_SCALE * trace / cols as f64;
    let mut gram = r.transpose() * &r;
    for i in 0..cols {
        gram[(i, i)] += lambda;
    }
    let rhs = r.transpose() * z;
    let solution = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => svd_solve(gram, &rhs).ok_or(Error::SingularSystem)?,
    };
    Ok(Solved {
        solution,
        regularized: true,
    })
}
