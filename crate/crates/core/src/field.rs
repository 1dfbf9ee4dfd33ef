//! Core grid and parameter types: the 2D field, model orders with a
//! quarter-plane lag convention, and the packed coefficient vector used by
//! the estimator.
//!
//! Lags are enumerated row-major over `[0..p1] x [0..p2]` with `(0,0)`
//! excluded; that single canonical order is used for every coefficient
//! layout in the crate (Yule-Walker unknowns, regression columns, packed
//! theta vectors).

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// A real-valued 2D grid, stored row-major. Values are validated finite at
/// construction and the type exposes no mutation, so instances can be shared
/// freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    n1: usize,
    n2: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn new(n1: usize, n2: usize, values: Vec<f64>) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidDimensions {
                height: n1,
                width: n2,
                reason: "both dimensions must be at least 1",
            });
        }
        if values.len() != n1 * n2 {
            return Err(Error::InvalidDimensions {
                height: n1,
                width: n2,
                reason: "value count does not equal height*width",
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Self { n1, n2, values })
    }

    /// Height (first index bound).
    pub fn height(&self) -> usize {
        self.n1
    }

    /// Width (second index bound).
    pub fn width(&self) -> usize {
        self.n2
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> f64 {
        debug_assert!(n < self.n1 && m < self.n2);
        self.values[n * self.n2 + m]
    }

    /// Row `n` as a slice.
    #[inline]
    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.n2..(n + 1) * self.n2]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population variance (divisor `N`).
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / self.values.len() as f64
    }

    /// Copy of the `h x w` sub-grid whose top-left corner is `(r0, c0)`.
    pub fn crop(&self, r0: usize, c0: usize, h: usize, w: usize) -> Result<Field> {
        if r0 + h > self.n1 || c0 + w > self.n2 || h == 0 || w == 0 {
            return Err(Error::InvalidDimensions {
                height: h,
                width: w,
                reason: "crop window exceeds field bounds",
            });
        }
        let mut values = Vec::with_capacity(h * w);
        for r in r0..r0 + h {
            values.extend_from_slice(&self.row(r)[c0..c0 + w]);
        }
        Ok(Field {
            n1: h,
            n2: w,
            values,
        })
    }
}

/// Subtracts the sample mean, returning the centered field and the mean that
/// was removed (kept so callers can reconstruct the original level).
pub fn zero_mean(field: &Field) -> (Field, f64) {
    let mu = field.mean();
    let values = field.values().iter().map(|v| v - mu).collect();
    (
        Field {
            n1: field.n1,
            n2: field.n2,
            values,
        },
        mu,
    )
}

/// All lags `(i, j)` in `[0..p1] x [0..p2]` except `(0,0)`, enumerated
/// row-major: `(0,1), .., (0,p2), (1,0), .., (p1,p2)`.
pub fn lag_order(p1: usize, p2: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity((p1 + 1) * (p2 + 1) - 1);
    for i in 0..=p1 {
        for j in 0..=p2 {
            if (i, j) != (0, 0) {
                out.push((i, j));
            }
        }
    }
    out
}

/// AR and MA support sizes plus the truncation order of the long-AR stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelOrder {
    pub p1: usize,
    pub p2: usize,
    pub q1: usize,
    pub q2: usize,
    pub k1: usize,
    pub k2: usize,
}

impl ModelOrder {
    /// Builds an order, checking `k1 > max(p1,q1)` and `k2 > max(p2,q2)` so
    /// the regression margins `L = k1+q1`, `M = k2+q2` exist.
    pub fn new(p1: usize, p2: usize, q1: usize, q2: usize, k1: usize, k2: usize) -> Result<Self> {
        if k1 == 0 || k2 == 0 {
            return Err(Error::InvalidOrder(
                "AR-approximation orders k1, k2 must be positive".into(),
            ));
        }
        if k1 <= p1.max(q1) || k2 <= p2.max(q2) {
            return Err(Error::InvalidOrder(format!(
                "k1={k1}, k2={k2} must exceed max(p1,q1)={} and max(p2,q2)={}",
                p1.max(q1),
                p2.max(q2)
            )));
        }
        Ok(Self {
            p1,
            p2,
            q1,
            q2,
            k1,
            k2,
        })
    }

    /// Builds an order with the default long-AR truncation
    /// `k1 = k2 = 2*max(p1+q1, p2+q2) + 2`.
    pub fn with_default_approx(p1: usize, p2: usize, q1: usize, q2: usize) -> Self {
        let k = 2 * (p1 + q1).max(p2 + q2) + 2;
        Self {
            p1,
            p2,
            q1,
            q2,
            k1: k,
            k2: k,
        }
    }

    pub fn ar_lags(&self) -> Vec<(usize, usize)> {
        lag_order(self.p1, self.p2)
    }

    pub fn ma_lags(&self) -> Vec<(usize, usize)> {
        lag_order(self.q1, self.q2)
    }

    pub fn ar_len(&self) -> usize {
        (self.p1 + 1) * (self.p2 + 1) - 1
    }

    pub fn ma_len(&self) -> usize {
        (self.q1 + 1) * (self.q2 + 1) - 1
    }

    /// Length of the packed coefficient vector (AR block plus MA block).
    pub fn theta_len(&self) -> usize {
        self.ar_len() + self.ma_len()
    }

    /// Regression margins `(L, M) = (k1 + q1, k2 + q2)`.
    pub fn margins(&self) -> (usize, usize) {
        (self.k1 + self.q1, self.k2 + self.q2)
    }
}

/// ARMA coefficient sets and the innovation variance. The leading
/// coefficients `a00 = b00 = 1` are implicit and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmaParams {
    a: BTreeMap<(usize, usize), f64>,
    b: BTreeMap<(usize, usize), f64>,
    pub sigma2: f64,
}

impl ArmaParams {
    /// Validates that the coefficient maps cover exactly the lag boxes of
    /// `order` and that all values are finite.
    pub fn new(
        order: &ModelOrder,
        a: BTreeMap<(usize, usize), f64>,
        b: BTreeMap<(usize, usize), f64>,
        sigma2: f64,
    ) -> Result<Self> {
        check_lag_keys("a", &a, order.p1, order.p2)?;
        check_lag_keys("b", &b, order.q1, order.q2)?;
        if sigma2 <= 0.0 || !sigma2.is_finite() {
            return Err(Error::DimensionMismatch(format!(
                "innovation variance must be positive and finite, got {sigma2}"
            )));
        }
        Ok(Self { a, b, sigma2 })
    }

    /// All-zero coefficients for `order`.
    pub fn zeros(order: &ModelOrder, sigma2: f64) -> Result<Self> {
        let a = order.ar_lags().into_iter().map(|l| (l, 0.0)).collect();
        let b = order.ma_lags().into_iter().map(|l| (l, 0.0)).collect();
        Self::new(order, a, b, sigma2)
    }

    pub fn a(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.a
    }

    pub fn b(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.b
    }
}

fn check_lag_keys(
    name: &str,
    map: &BTreeMap<(usize, usize), f64>,
    p1: usize,
    p2: usize,
) -> Result<()> {
    let expected = (p1 + 1) * (p2 + 1) - 1;
    if map.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "{name} has {} coefficients, order requires {expected}",
            map.len()
        )));
    }
    for (&(i, j), v) in map {
        if (i, j) == (0, 0) || i > p1 || j > p2 {
            return Err(Error::DimensionMismatch(format!(
                "{name} contains lag ({i},{j}) outside [0..{p1}]x[0..{p2}] \\ (0,0)"
            )));
        }
        if !v.is_finite() {
            return Err(Error::DimensionMismatch(format!(
                "{name}[{i},{j}] is not finite"
            )));
        }
    }
    Ok(())
}

/// Packs coefficients into one vector: the AR block first, then the MA
/// block, each in `lag_order` sequence.
pub fn theta_pack(params: &ArmaParams, order: &ModelOrder) -> Result<Vec<f64>> {
    check_lag_keys("a", params.a(), order.p1, order.p2)?;
    check_lag_keys("b", params.b(), order.q1, order.q2)?;
    let mut theta = Vec::with_capacity(order.theta_len());
    for lag in order.ar_lags() {
        theta.push(params.a[&lag]);
    }
    for lag in order.ma_lags() {
        theta.push(params.b[&lag]);
    }
    Ok(theta)
}

/// Inverse of [`theta_pack`]. The innovation variance is not part of the
/// packed vector and must be supplied separately.
pub fn theta_unpack(theta: &[f64], order: &ModelOrder, sigma2: f64) -> Result<ArmaParams> {
    if theta.len() != order.theta_len() {
        return Err(Error::DimensionMismatch(format!(
            "theta has length {}, order requires {}",
            theta.len(),
            order.theta_len()
        )));
    }
    let ar_len = order.ar_len();
    let a = order
        .ar_lags()
        .into_iter()
        .zip(&theta[..ar_len])
        .map(|(lag, &v)| (lag, v))
        .collect();
    let b = order
        .ma_lags()
        .into_iter()
        .zip(&theta[ar_len..])
        .map(|(lag, &v)| (lag, v))
        .collect();
    ArmaParams::new(order, a, b, sigma2)
}
