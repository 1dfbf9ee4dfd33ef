//! JSON and CSV document formats shared by the subcommands.
//!
//! Coefficient maps are keyed by `"i,j"` strings. All documents serialize
//! with fixed key sets so outputs stay schema-stable across configurations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use armafield_core::{ArmaParams, ModelOrder};

use crate::CliError;

pub fn lag_key(i: usize, j: usize) -> String {
    format!("{i},{j}")
}

pub fn parse_lag_key(key: &str) -> Result<(usize, usize), CliError> {
    let mut parts = key.split(',');
    let bad = || {
        CliError::Usage(format!(
            "coefficient key {key:?} is not of the form \"i,j\""
        ))
    };
    let i = parts
        .next()
        .ok_or_else(bad)?
        .trim()
        .parse()
        .map_err(|_| bad())?;
    let j = parts
        .next()
        .ok_or_else(bad)?
        .trim()
        .parse()
        .map_err(|_| bad())?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((i, j))
}

pub fn coef_map(map: &BTreeMap<(usize, usize), f64>) -> BTreeMap<String, f64> {
    map.iter().map(|(&(i, j), &v)| (lag_key(i, j), v)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderDoc {
    pub p1: usize,
    pub p2: usize,
    pub q1: usize,
    pub q2: usize,
    pub k1: usize,
    pub k2: usize,
}

impl From<ModelOrder> for OrderDoc {
    fn from(o: ModelOrder) -> Self {
        Self {
            p1: o.p1,
            p2: o.p2,
            q1: o.q1,
            q2: o.q2,
            k1: o.k1,
            k2: o.k2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamsDoc {
    pub order: OrderDoc,
    pub a: BTreeMap<String, f64>,
    pub b: BTreeMap<String, f64>,
    pub sigma2: f64,
}

impl ParamsDoc {
    pub fn new(order: ModelOrder, params: &ArmaParams) -> Self {
        Self {
            order: order.into(),
            a: coef_map(params.a()),
            b: coef_map(params.b()),
            sigma2: params.sigma2,
        }
    }
}

/// Input file for `synth`: orders, coefficients (missing lags default to
/// zero), innovation variance, and generation settings.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParamsFile {
    pub order: SynthOrderDoc,
    #[serde(default)]
    pub a: BTreeMap<String, f64>,
    #[serde(default)]
    pub b: BTreeMap<String, f64>,
    pub sigma2: f64,
    #[serde(default = "default_size")]
    pub size: [usize; 2],
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthOrderDoc {
    pub p1: usize,
    pub p2: usize,
    pub q1: usize,
    pub q2: usize,
    #[serde(default)]
    pub k1: Option<usize>,
    #[serde(default)]
    pub k2: Option<usize>,
}

fn default_size() -> [usize; 2] {
    [256, 256]
}

fn default_burn_in() -> usize {
    64
}

impl SynthParamsFile {
    pub fn model(&self) -> Result<(ModelOrder, ArmaParams), CliError> {
        let o = &self.order;
        let default = ModelOrder::with_default_approx(o.p1, o.p2, o.q1, o.q2);
        let order = ModelOrder::new(
            o.p1,
            o.p2,
            o.q1,
            o.q2,
            o.k1.unwrap_or(default.k1),
            o.k2.unwrap_or(default.k2),
        )?;
        let a = full_coef_map(&self.a, order.p1, order.p2, "a")?;
        let b = full_coef_map(&self.b, order.q1, order.q2, "b")?;
        let params = ArmaParams::new(&order, a, b, self.sigma2)?;
        Ok((order, params))
    }
}

/// Expands a sparse `"i,j"` map over the full lag box, defaulting missing
/// lags to zero and rejecting keys outside the box.
fn full_coef_map(
    sparse: &BTreeMap<String, f64>,
    p1: usize,
    p2: usize,
    name: &str,
) -> Result<BTreeMap<(usize, usize), f64>, CliError> {
    let mut full: BTreeMap<(usize, usize), f64> = armafield_core::lag_order(p1, p2)
        .into_iter()
        .map(|l| (l, 0.0))
        .collect();
    for (key, &v) in sparse {
        let (i, j) = parse_lag_key(key)?;
        match full.get_mut(&(i, j)) {
            Some(slot) => *slot = v,
            None => {
                return Err(CliError::Usage(format!(
                    "{name}[{i},{j}] lies outside the order's lag box [0..{p1}]x[0..{p2}] \\ (0,0)"
                )))
            }
        }
    }
    Ok(full)
}

/// Sidecar written next to a synthesized PGM. The raster encodes
/// `value ~= mean + scale * sample`.
#[derive(Debug, Serialize)]
pub struct SynthSidecar {
    pub params: ParamsDoc,
    pub seed: u64,
    pub rng: &'static str,
    pub mean: f64,
    pub scale: f64,
    pub size: [usize; 2],
    pub burn_in: usize,
    pub depth: u8,
}

/// Output of `estimate`.
#[derive(Debug, Serialize)]
pub struct FitDoc {
    pub order: OrderDoc,
    pub theta: Vec<f64>,
    pub a: BTreeMap<String, f64>,
    pub b: BTreeMap<String, f64>,
    pub sigma2: f64,
    pub regularized: bool,
    pub regression_rows: usize,
}

/// Output of `segment`.
#[derive(Debug, Serialize)]
pub struct SegmentSummary {
    pub k: usize,
    pub inertia: f64,
    pub iterations: usize,
    pub centroids: Vec<Vec<f64>>,
    pub class_block_counts: Vec<usize>,
    pub invalid_blocks: usize,
    pub feature_dim: usize,
    pub block_size: usize,
    pub grid: [usize; 2],
}

/// Output of `evaluate`.
#[derive(Debug, Serialize)]
pub struct EvaluateReport {
    pub accuracy: f64,
    pub permutation: Vec<usize>,
    pub confusion_matrix: Vec<Vec<usize>>,
}

/// Sidecar for `make-composite`.
#[derive(Debug, Serialize)]
pub struct CompositeSidecar {
    pub bands: Vec<BandDoc>,
    pub band_blocks: [usize; 3],
    pub block_size: usize,
    pub grid: [usize; 2],
    pub seed: u64,
    pub rng: &'static str,
    pub mean: f64,
    pub scale: f64,
    pub depth: u8,
}

#[derive(Debug, Serialize)]
pub struct BandDoc {
    pub name: &'static str,
    pub params: ParamsDoc,
}

/// Serializes a block-label grid as integer CSV rows.
pub fn labels_to_csv(labels: &[usize], grid_w: usize) -> String {
    let mut out = String::new();
    for row in labels.chunks(grid_w) {
        let line: Vec<String> = row.iter().map(|l| l.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Parses an integer CSV grid, enforcing rectangular shape.
pub fn labels_from_csv(text: &str) -> Result<(Vec<usize>, usize, usize), CliError> {
    let mut labels = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<usize>, _> = line.split(',').map(|t| t.trim().parse()).collect();
        let row = row.map_err(|_| {
            CliError::Usage(format!("CSV line {} is not a row of integers", lineno + 1))
        })?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(CliError::Usage(format!(
                    "CSV line {} has {} columns, expected {w}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        labels.extend(row);
        height += 1;
    }
    let width = width.ok_or_else(|| CliError::Usage("CSV grid is empty".into()))?;
    Ok((labels, height, width))
}
