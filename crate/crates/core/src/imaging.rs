//! Grayscale raster I/O (binary PGM) and the renderers for model
//! reconstructions and label maps.

use crate::error::{Error, Result};
use crate::field::{Field, ModelOrder};
use crate::segmenter::{BlockFit, SegmentationMap};

/// Sample depth of a grayscale image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> u16 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }

    pub fn bits(self) -> u8 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }
}

/// An integer grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    depth: BitDepth,
    samples: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, depth: BitDepth, samples: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 || samples.len() != width * height {
            return Err(Error::InvalidDimensions {
                height,
                width,
                reason: "sample count must equal width*height and dims be positive",
            });
        }
        let max = depth.max_value();
        if samples.iter().any(|&s| s > max) {
            return Err(Error::PgmFormat(format!(
                "sample exceeds the {max} range of the declared depth"
            )));
        }
        Ok(Self {
            width,
            height,
            depth,
            samples,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn depth(&self) -> BitDepth {
        self.depth
    }

    pub fn samples(&self) -> &[u16] {
        &self.samples
    }
}

/// Parses a binary (`P5`) PGM. Header comments are allowed; 16-bit samples
/// are big-endian per the format.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 {
        return Err(Error::PgmFormat("input shorter than a magic number".into()));
    }
    match &bytes[..2] {
        b"P5" => {}
        b"P2" => {
            return Err(Error::PgmFormat(
                "ASCII PGM (P2) is not supported; use binary P5".into(),
            ))
        }
        other => {
            return Err(Error::PgmFormat(format!(
                "unrecognized magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    }
    let mut pos = 2;
    let width = read_header_number(bytes, &mut pos)?;
    let height = read_header_number(bytes, &mut pos)?;
    let maxval = read_header_number(bytes, &mut pos)?;
    // Exactly one whitespace byte separates the header from the payload.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::PgmFormat("missing whitespace after maxval".into())),
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::PgmFormat(format!("maxval {maxval} out of range")));
    }
    let depth = if maxval <= 255 {
        BitDepth::Eight
    } else {
        BitDepth::Sixteen
    };
    let per_sample = if maxval <= 255 { 1 } else { 2 };
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(per_sample))
        .ok_or_else(|| Error::PgmFormat("image dimensions overflow".into()))?;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::PgmFormat(format!(
            "payload truncated: {} of {expected} bytes",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(Error::PgmFormat(format!(
            "trailing data: {} extra bytes",
            payload.len() - expected
        )));
    }
    let samples: Vec<u16> = if per_sample == 1 {
        payload.iter().map(|&b| b as u16).collect()
    } else {
        payload
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    if let Some(bad) = samples.iter().find(|&&s| s as usize > maxval) {
        return Err(Error::PgmFormat(format!(
            "sample {bad} exceeds declared maxval {maxval}"
        )));
    }
    GrayImage::new(width, height, depth, samples)
}

fn read_header_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    // Skip whitespace and '#' comments.
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => return Err(Error::PgmFormat("header ended early".into())),
        }
    }
    let start = *pos;
    while let Some(b) = bytes.get(*pos) {
        if b.is_ascii_digit() {
            *pos += 1;
        } else {
            break;
        }
    }
    if *pos == start {
        return Err(Error::PgmFormat("expected a number in the header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::PgmFormat("unparseable header number".into()))
}

/// Serializes with the canonical header `P5\n<w> <h>\n<maxval>\n`.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let maxval = img.depth.max_value();
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, maxval).into_bytes();
    match img.depth {
        BitDepth::Eight => out.extend(img.samples.iter().map(|&s| s as u8)),
        BitDepth::Sixteen => {
            for &s in &img.samples {
                out.extend_from_slice(&s.to_be_bytes());
            }
        }
    }
    out
}

/// Casts the samples to a real field, removes the mean, and returns the
/// removed mean for later reconstruction.
pub fn to_field(img: &GrayImage) -> (Field, f64) {
    let values: Vec<f64> = img.samples.iter().map(|&s| s as f64).collect();
    let field = Field::new(img.height, img.width, values).expect("integer samples are finite");
    let (centered, mean) = crate::field::zero_mean(&field);
    (centered, mean)
}

/// Linearly maps a real field onto the sample range of `depth`. Returns the
/// image together with `(offset, scale)` such that
/// `value ~= offset + scale * sample`.
pub fn field_to_image(field: &Field, depth: BitDepth) -> (GrayImage, f64, f64) {
    let lo = field.values().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = field
        .values()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let max = depth.max_value();
    let scale = if hi > lo { (hi - lo) / max as f64 } else { 1.0 };
    let samples = field
        .values()
        .iter()
        .map(|&v| (((v - lo) / scale).round() as i64).clamp(0, max as i64) as u16)
        .collect();
    let img = GrayImage::new(field.width(), field.height(), depth, samples)
        .expect("clamped samples fit the depth");
    (img, lo, scale)
}

/// How the per-block model output is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructionVariant {
    /// Full model output reusing the estimated innovations, current one
    /// included: reproduces the texture.
    Innovation,
    /// One-step prediction with the current innovation set to zero: the
    /// denoised output, whose error floor is the innovation variance.
    Zero,
}

/// Renders the per-block model output. `samples` must hold the raw sample
/// values the blocks were fit on (means still present); block margins where
/// the model has no full lag history keep the original pixels.
pub fn render_reconstruction(
    samples: &Field,
    fits: &[BlockFit],
    block_size: usize,
    variant: ReconstructionVariant,
    depth: BitDepth,
) -> Result<GrayImage> {
    let (n1, n2) = (samples.height(), samples.width());
    if block_size == 0 || block_size > n1 || block_size > n2 {
        return Err(Error::BlockTooSmall {
            block_size,
            reason: format!("field is {n1}x{n2}"),
        });
    }
    let grid_h = n1 / block_size;
    let grid_w = n2 / block_size;
    if fits.len() != grid_h * grid_w {
        return Err(Error::MissingBlockFit {
            row: fits.len() / grid_w.max(1),
            col: fits.len() % grid_w.max(1),
        });
    }
    let max = depth.max_value();
    let quantize = |v: f64| -> u16 { (v.round() as i64).clamp(0, max as i64) as u16 };
    let mut out: Vec<u16> = samples.values().iter().map(|&v| quantize(v)).collect();

    for bf in fits {
        let Some(fit) = &bf.fit else { continue };
        let order: &ModelOrder = &fit.order;
        let (l, m) = order.margins();
        let ar: Vec<(usize, usize, f64)> = fit
            .params
            .a()
            .iter()
            .map(|(&(i, j), &v)| (i, j, v))
            .collect();
        let ma: Vec<(usize, usize, f64)> = fit
            .params
            .b()
            .iter()
            .map(|(&(i, j), &v)| (i, j, v))
            .collect();
        for n in l + 1..block_size {
            for mm in m + 1..block_size {
                let mut acc = 0.0;
                for &(i, j, aij) in &ar {
                    let z = samples.get(bf.y0 + n - i, bf.x0 + mm - j) - bf.mean;
                    acc -= aij * z;
                }
                for &(i, j, bij) in &ma {
                    acc += bij * fit.noise.get(n - i - order.k1, mm - j - order.k2);
                }
                if variant == ReconstructionVariant::Innovation {
                    acc += fit.noise.get(n - order.k1, mm - order.k2);
                }
                out[(bf.y0 + n) * n2 + (bf.x0 + mm)] = quantize(acc + bf.mean);
            }
        }
    }
    GrayImage::new(n2, n1, depth, out)
}

/// Renders the pixel-level label map with `k+1` evenly spaced gray levels;
/// class `c` maps to `round(255 (c+1) / k)` and invalid blocks to 0.
pub fn render_labels(map: &SegmentationMap) -> GrayImage {
    let k = map.k;
    let samples = map
        .pixel_labels
        .iter()
        .map(|&l| {
            if l >= k {
                0
            } else {
                ((l + 1) as f64 * 255.0 / k as f64).round() as u16
            }
        })
        .collect();
    GrayImage::new(map.n2, map.n1, BitDepth::Eight, samples).expect("labels fit 8 bits")
}
