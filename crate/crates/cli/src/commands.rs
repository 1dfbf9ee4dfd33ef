//! Subcommand implementations: wiring between files and the core library.

use std::fs;
use std::path::Path;

use armafield_core::composite::{band_textures, make_composite as build_composite};
use armafield_core::imaging::{
    field_to_image, read_pgm, render_labels, render_reconstruction, to_field, write_pgm,
};
use armafield_core::segmenter::{
    features_from_fits, fit_blocks, kmeans, label_accuracy, SegmentConfig,
};
use armafield_core::synthesis::{stability_check, synthesize, SynthesisConfig, RNG_ALGORITHM};
use armafield_core::{estimate as estimate_field, Field, ModelOrder};

use crate::schema::{
    coef_map, labels_from_csv, labels_to_csv, BandDoc, CompositeSidecar, EvaluateReport, FitDoc,
    ParamsDoc, SegmentSummary, SynthParamsFile, SynthSidecar,
};
use crate::{
    CliError, EstimateArgs, EvaluateArgs, MakeCompositeArgs, Pair, Quad, SegmentArgs, SynthArgs,
};

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn to_json(value: &impl serde::Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("documents serialize");
    out.push(b'\n');
    out
}

fn order_from_args(order: Quad, ar_approx: Option<Pair>) -> Result<ModelOrder, CliError> {
    let Quad(p1, p2, q1, q2) = order;
    let default = ModelOrder::with_default_approx(p1, p2, q1, q2);
    let (k1, k2) = match ar_approx {
        Some(Pair(k1, k2)) => (k1, k2),
        None => (default.k1, default.k2),
    };
    Ok(ModelOrder::new(p1, p2, q1, q2, k1, k2)?)
}

fn load_pgm_field(path: &Path) -> Result<armafield_core::imaging::GrayImage, CliError> {
    let bytes = read_file(path)?;
    Ok(read_pgm(&bytes)?)
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    let text = read_file(&args.params)?;
    let file: SynthParamsFile = serde_json::from_slice(&text)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.params.display())))?;
    let (order, params) = file.model()?;
    let seed = args.seed.unwrap_or(file.seed);
    let [n1, n2] = file.size;

    if !stability_check(&order, &params) {
        return Err(CliError::Numeric(
            "unstable parameters: impulse response does not decay".into(),
        ));
    }
    let config = SynthesisConfig::new(order, params.clone(), n1, n2, file.burn_in, seed)?;
    let field = synthesize(&config)?;

    let depth = args.depth.bit_depth();
    let (img, mean, scale) = field_to_image(&field, depth);
    let sidecar = SynthSidecar {
        params: ParamsDoc::new(order, &params),
        seed,
        rng: RNG_ALGORITHM,
        mean,
        scale,
        size: [n1, n2],
        burn_in: file.burn_in,
        depth: depth.bits(),
    };
    ensure_out_dir(&args.out)?;
    write_file(&args.out.join("field.pgm"), &write_pgm(&img))?;
    write_file(&args.out.join("field.json"), &to_json(&sidecar))?;
    Ok(())
}

pub fn estimate(args: EstimateArgs) -> Result<(), CliError> {
    let order = order_from_args(args.order, args.ar_approx)?;
    let img = load_pgm_field(&args.input)?;
    let (field, _mean) = to_field(&img);
    let fit = estimate_field(&field, &order)?;

    let doc = FitDoc {
        order: order.into(),
        theta: fit.theta.clone(),
        a: coef_map(fit.params.a()),
        b: coef_map(fit.params.b()),
        sigma2: fit.sigma2_hat,
        regularized: fit.regularized,
        regression_rows: fit.regression_rows,
    };
    ensure_out_dir(&args.out)?;
    write_file(&args.out.join("fit.json"), &to_json(&doc))?;
    Ok(())
}

pub fn segment(args: SegmentArgs) -> Result<(), CliError> {
    if args.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
        pool.install(|| segment_inner(&args))
    } else {
        segment_inner(&args)
    }
}

fn segment_inner(args: &SegmentArgs) -> Result<(), CliError> {
    let order = order_from_args(args.order, Some(args.ar_approx))?;
    let mut config = SegmentConfig::new(order, args.block);
    if let Some(stride) = args.stride {
        config = config.with_stride(stride);
    }
    if args.no_sigma_feature {
        config = config.without_sigma_feature();
    }

    let img = load_pgm_field(&args.input)?;
    let samples = Field::new(
        img.height(),
        img.width(),
        img.samples().iter().map(|&s| s as f64).collect(),
    )?;
    if img.height() < 2 * args.block || img.width() < 2 * args.block {
        return Err(CliError::Usage(format!(
            "input must cover at least 2x2 blocks of {}",
            args.block
        )));
    }

    let fits = fit_blocks(&samples, &config)?;
    let features = features_from_fits(&fits, &config, samples.height(), samples.width())?;
    let map = kmeans(&features, args.classes, args.seed)?;

    let mut class_block_counts = vec![0usize; args.classes];
    let mut invalid_blocks = 0;
    for &label in &map.block_labels {
        if label < args.classes {
            class_block_counts[label] += 1;
        } else {
            invalid_blocks += 1;
        }
    }
    let summary = SegmentSummary {
        k: args.classes,
        inertia: map.inertia,
        iterations: map.iterations,
        centroids: map.centroids.clone(),
        class_block_counts,
        invalid_blocks,
        feature_dim: features.dim(),
        block_size: args.block,
        grid: [map.grid_h, map.grid_w],
    };

    ensure_out_dir(&args.out)?;
    write_file(
        &args.out.join("labels.pgm"),
        &write_pgm(&render_labels(&map)),
    )?;
    write_file(
        &args.out.join("blocks.csv"),
        labels_to_csv(&map.block_labels, map.grid_w).as_bytes(),
    )?;
    write_file(&args.out.join("summary.json"), &to_json(&summary))?;

    // Reconstruction needs a non-overlapping tiling.
    if config.stride == config.block_size {
        let rec = render_reconstruction(
            &samples,
            &fits,
            args.block,
            args.reconstruction.variant(),
            img.depth(),
        )?;
        write_file(&args.out.join("reconstruction.pgm"), &write_pgm(&rec))?;
    }
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let pred_text = String::from_utf8(read_file(&args.pred)?)
        .map_err(|_| CliError::Io(format!("{}: not UTF-8", args.pred.display())))?;
    let truth_text = String::from_utf8(read_file(&args.truth)?)
        .map_err(|_| CliError::Io(format!("{}: not UTF-8", args.truth.display())))?;
    let (pred, ph, pw) = labels_from_csv(&pred_text)?;
    let (truth, th, tw) = labels_from_csv(&truth_text)?;
    if (ph, pw) != (th, tw) {
        return Err(CliError::Usage(format!(
            "prediction grid is {ph}x{pw} but truth grid is {th}x{tw}"
        )));
    }
    let matched = label_accuracy(&pred, &truth, args.classes)?;
    let report = EvaluateReport {
        accuracy: matched.accuracy,
        permutation: matched.permutation,
        confusion_matrix: matched.confusion,
    };
    let json = to_json(&report);
    print!("{}", String::from_utf8(json).expect("json is utf-8"));
    Ok(())
}

pub fn make_composite(args: MakeCompositeArgs) -> Result<(), CliError> {
    let composite = build_composite(args.size, args.size, args.block, args.seed)?;
    let depth = args.depth.bit_depth();
    let (img, mean, scale) = field_to_image(&composite.field, depth);
    let bands = band_textures()
        .into_iter()
        .map(|(name, order, params)| BandDoc {
            name,
            params: ParamsDoc::new(order, &params),
        })
        .collect();
    let sidecar = CompositeSidecar {
        bands,
        band_blocks: composite.band_blocks,
        block_size: composite.block_size,
        grid: [composite.grid_h, composite.grid_w],
        seed: args.seed,
        rng: RNG_ALGORITHM,
        mean,
        scale,
        depth: depth.bits(),
    };
    ensure_out_dir(&args.out)?;
    write_file(&args.out.join("composite.pgm"), &write_pgm(&img))?;
    write_file(
        &args.out.join("truth.csv"),
        labels_to_csv(&composite.truth, composite.grid_w).as_bytes(),
    )?;
    write_file(&args.out.join("composite.json"), &to_json(&sidecar))?;
    Ok(())
}
