//! Sample autocorrelation of a zero-mean field over a signed lag window.
//!
//! The estimator divides each lag sum by the number of overlapping samples
//! `(N1-k)(N2-l)`, which is unbiased but can yield lag sets that are not
//! positive definite on small grids; the Yule-Walker solver downstream
//! carries a ridge fallback for exactly that case.

use crate::error::{Error, Result};
use crate::field::Field;

/// Autocorrelation values `r[k,l]` for `|k| <= kmax`, `|l| <= lmax`.
///
/// Only the half-plane `k >= 0` is stored; reads at `k < 0` (and at
/// `k == 0, l < 0`) mirror through the point symmetry `r[-k,-l] = r[k,l]`,
/// which therefore holds exactly.
#[derive(Debug, Clone)]
pub struct LagGrid {
    kmax: usize,
    lmax: usize,
    /// Row-major `(kmax+1) x (2*lmax+1)`; column index is `l + lmax`.
    values: Vec<f64>,
}

impl LagGrid {
    /// Builds a grid from a closed-form lag function, sampling the stored
    /// half-plane. Useful for analytic autocorrelations in oracles.
    pub fn from_fn(kmax: usize, lmax: usize, f: impl Fn(isize, isize) -> f64) -> Self {
        let width = 2 * lmax + 1;
        let mut values = vec![0.0; (kmax + 1) * width];
        for k in 0..=kmax {
            for l in -(lmax as isize)..=lmax as isize {
                let v = if k == 0 && l < 0 {
                    f(0, -l)
                } else {
                    f(k as isize, l)
                };
                values[k * width + (l + lmax as isize) as usize] = v;
            }
        }
        Self { kmax, lmax, values }
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    /// `r[k,l]`, mirroring negative-`k` reads. Panics if the lag is outside
    /// the stored window.
    #[inline]
    pub fn get(&self, k: isize, l: isize) -> f64 {
        let (k, l) = if k < 0 || (k == 0 && l < 0) {
            (-k, -l)
        } else {
            (k, l)
        };
        assert!(
            k as usize <= self.kmax && l.unsigned_abs() <= self.lmax,
            "lag ({k},{l}) outside stored window ({},{})",
            self.kmax,
            self.lmax
        );
        self.values[k as usize * (2 * self.lmax + 1) + (l + self.lmax as isize) as usize]
    }

    /// Zero-lag value `r[0,0]`.
    pub fn r0(&self) -> f64 {
        self.get(0, 0)
    }
}

/// Estimates `r[k,l]` from a zero-mean field for all `|k| <= kmax`,
/// `|l| <= lmax`.
///
/// For `k, l >= 0` the estimate is the lagged product sum divided by
/// `(N1-k)(N2-l)`. The cross-quadrant lags `r[k,-l]` (`k,l >= 1`) are
/// estimated directly from the data with the shifted product
/// `sum x[i,j+l] x[i+k,j] / ((N1-k)(N2-l))`; the remaining quadrants follow
/// from point symmetry.
pub fn estimate_lags(field: &Field, kmax: usize, lmax: usize) -> Result<LagGrid> {
    let (n1, n2) = (field.height(), field.width());
    if kmax >= n1 || lmax >= n2 {
        return Err(Error::LagBounds { kmax, lmax, n1, n2 });
    }
    let width = 2 * lmax + 1;
    let mut values = vec![0.0; (kmax + 1) * width];
    for k in 0..=kmax {
        for l in 0..=lmax {
            let norm = ((n1 - k) * (n2 - l)) as f64;
            let mut sum = 0.0;
            for i in 0..n1 - k {
                let top = &field.row(i)[..n2 - l];
                let bot = &field.row(i + k)[l..];
                for (x, y) in top.iter().zip(bot) {
                    sum += x * y;
                }
            }
            values[k * width + lmax + l] = sum / norm;
        }
        for l in 1..=lmax {
            if k == 0 {
                // r[0,-l] = r[0,l] by point symmetry.
                values[lmax - l] = values[lmax + l];
            } else {
                let norm = ((n1 - k) * (n2 - l)) as f64;
                let mut sum = 0.0;
                for i in 0..n1 - k {
                    let top = &field.row(i)[l..];
                    let bot = &field.row(i + k)[..n2 - l];
                    for (x, y) in top.iter().zip(bot) {
                        sum += x * y;
                    }
                }
                values[k * width + lmax - l] = sum / norm;
            }
        }
    }
    Ok(LagGrid { kmax, lmax, values })
}
