//! Synthetic multi-texture test images with bundled block-level ground
//! truth, used by the segmentation evaluation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::field::{ArmaParams, Field, ModelOrder};
use crate::synthesis::{synthesize, SynthesisConfig};

/// Per-band seeds are derived from the base seed with this odd constant so
/// the three textures use unrelated noise streams.
const BAND_SEED_STEP: u64 = 0x9e37_79b9_7f4a_7c15;

/// The three reference textures: white noise, a separable AR(1,1) with
/// poles at 0.5, and an ARMA(1,1,1,1) with a genuine MA part.
pub fn band_textures() -> Vec<(&'static str, ModelOrder, ArmaParams)> {
    let wn_order = ModelOrder::new(0, 0, 0, 0, 1, 1).expect("static order");
    let wn = ArmaParams::zeros(&wn_order, 1.0).expect("static params");

    let ar_order = ModelOrder::with_default_approx(1, 1, 0, 0);
    let ar_a: BTreeMap<_, _> = [((0, 1), -0.5), ((1, 0), -0.5), ((1, 1), 0.25)]
        .into_iter()
        .collect();
    let ar = ArmaParams::new(&ar_order, ar_a, BTreeMap::new(), 1.0).expect("static params");

    let arma_order = ModelOrder::with_default_approx(1, 1, 1, 1);
    let arma_a: BTreeMap<_, _> = [((0, 1), -0.4), ((1, 0), -0.5), ((1, 1), 0.2)]
        .into_iter()
        .collect();
    let arma_b: BTreeMap<_, _> = [((0, 1), 0.3), ((1, 0), 0.3), ((1, 1), 0.09)]
        .into_iter()
        .collect();
    let arma = ArmaParams::new(&arma_order, arma_a, arma_b, 1.0).expect("static params");

    vec![
        ("white-noise", wn_order, wn),
        ("ar", ar_order, ar),
        ("arma", arma_order, arma),
    ]
}

/// A three-texture image in vertical bands, with per-block truth labels.
#[derive(Debug, Clone)]
pub struct Composite {
    pub field: Field,
    pub grid_h: usize,
    pub grid_w: usize,
    pub block_size: usize,
    /// Truth label per block, row-major over the block grid.
    pub truth: Vec<usize>,
    /// Band widths in whole blocks, left to right.
    pub band_blocks: [usize; 3],
}

/// Builds the composite: three vertical bands (white noise, AR, ARMA), each
/// synthesized from its own seeded stream, with band boundaries aligned to
/// the block grid so every block has a single texture.
pub fn make_composite(n1: usize, n2: usize, block_size: usize, seed: u64) -> Result<Composite> {
    if block_size == 0 || n1 < block_size || n2 < 3 * block_size {
        return Err(Error::InvalidConfig(format!(
            "composite needs at least 1x3 blocks of {block_size}, got {n1}x{n2}"
        )));
    }
    let grid_h = n1 / block_size;
    let grid_w = n2 / block_size;
    let side = grid_w / 3;
    let band_blocks = [side, grid_w - 2 * side, side];
    let c1 = band_blocks[0] * block_size;
    let c2 = (band_blocks[0] + band_blocks[1]) * block_size;

    let mut bands = Vec::with_capacity(3);
    for (i, (_, order, params)) in band_textures().into_iter().enumerate() {
        let band_seed = seed.wrapping_add(BAND_SEED_STEP.wrapping_mul(i as u64 + 1));
        let config = SynthesisConfig::new(order, params, n1, n2, 64, band_seed)?;
        bands.push(synthesize(&config)?);
    }

    let mut values = Vec::with_capacity(n1 * n2);
    for r in 0..n1 {
        values.extend_from_slice(&bands[0].row(r)[..c1]);
        values.extend_from_slice(&bands[1].row(r)[c1..c2]);
        values.extend_from_slice(&bands[2].row(r)[c2..]);
    }
    let field = Field::new(n1, n2, values)?;

    let mut truth = Vec::with_capacity(grid_h * grid_w);
    for _ in 0..grid_h {
        for c in 0..grid_w {
            let label = if c < band_blocks[0] {
                0
            } else if c < band_blocks[0] + band_blocks[1] {
                1
            } else {
                2
            };
            truth.push(label);
        }
    }

    Ok(Composite {
        field,
        grid_h,
        grid_w,
        block_size,
        truth,
        band_blocks,
    })
}
