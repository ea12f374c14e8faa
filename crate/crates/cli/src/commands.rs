//! The four verbs: train, eval, render, budget. Each takes a resolved
//! [`RunConfig`] and writes its artifacts under the configured output
//! directory.

use std::fs;
use std::path::{Path, PathBuf};

use nflab_core::fields::{iou, FieldTask};
use nflab_core::io::{load_checkpoint, save_checkpoint, write_image};
use nflab_core::metrics::{psnr, ssim, SsimConfig};
use nflab_core::model::FieldModel;
use nflab_core::numerics::Pcg32;
use nflab_core::optim::{self, AdamState};
use nflab_core::render::{default_matcap, render};
use nflab_core::{Error, Result};

use crate::config::{RunConfig, TaskKind};

/// Generator stream used for evaluation sampling. Training owns
/// streams 0 (init) and 1+step, so evaluation draws from the far end
/// of the stream space and never collides with them.
const EVAL_STREAM: u64 = u64::MAX;

/// Monte Carlo sample count for distance-field evaluation.
const SDF_EVAL_SAMPLES: usize = 1 << 20;

/// Fits the configured model and writes `model.ckpt`, `loss.csv`
/// (columns: iteration, loss, wall_clock_ms), and the resolved
/// `config.json` into the output directory. With a nonzero
/// `checkpoint_every`, intermediate `checkpoint-NNNNNNN.ckpt` files
/// appear alongside.
pub fn train(cfg: &RunConfig) -> Result<()> {
    let task = cfg.load_task()?;
    let train_cfg = cfg.train_config()?;
    let encoding = cfg.encoding_config()?;

    let mut rng = Pcg32::new(train_cfg.seed, 0);
    let mut model = FieldModel::<f32>::init(
        encoding,
        &cfg.hidden_layers(),
        task.output_dim(),
        cfg.leaky_slope(),
        cfg.output_activation(),
        &mut rng,
    )?;
    let mut opt = AdamState::for_groups(&model.param_slices());

    let out = cfg.out_dir();
    fs::create_dir_all(&out)?;
    fs::write(out.join("config.json"), cfg.to_pretty_json()? + "\n")?;

    let history = optim::train(&mut model, &task, &train_cfg, &mut opt, |step, m, o| {
        save_checkpoint(&out.join(format!("checkpoint-{step:07}.ckpt")), m, o)
    })?;
    save_checkpoint(&out.join("model.ckpt"), &model, &opt)?;

    let mut csv = String::from("iteration,loss,wall_clock_ms\n");
    for r in &history {
        csv.push_str(&format!("{},{},{:.3}\n", r.iteration, r.loss, r.wall_clock_ms));
    }
    fs::write(out.join("loss.csv"), csv)?;

    let total_ms: f64 = history.iter().map(|r| r.wall_clock_ms).sum();
    let final_loss = history.last().map(|r| r.loss).unwrap_or(f64::NAN);
    println!(
        "trained {} iterations in {:.1} s; final loss {final_loss}",
        history.len(),
        total_ms / 1000.0
    );
    println!("artifacts in {}", out.display());
    Ok(())
}

/// Scores a checkpoint against the configured task: PSNR and SSIM of
/// the full reconstruction for images (the reconstruction itself is
/// saved next to the metrics), IoU and mean |distance error| over
/// 2^20 cube samples for distance fields. Writes `metrics.csv` and
/// prints one line per metric.
pub fn eval(cfg: &RunConfig, checkpoint: Option<PathBuf>) -> Result<()> {
    let out = cfg.out_dir();
    let path = checkpoint.unwrap_or_else(|| out.join("model.ckpt"));
    let (model, _opt) = load_checkpoint(&path)?;
    let task = cfg.load_task()?;
    if model.input_dim() != task.input_dim() || model.output_dim() != task.output_dim() {
        return Err(Error::config(format!(
            "checkpoint {} maps {}D -> {} values but the task needs {}D -> {}",
            path.display(),
            model.input_dim(),
            model.output_dim(),
            task.input_dim(),
            task.output_dim()
        )));
    }
    fs::create_dir_all(&out)?;

    let mut rows: Vec<(&str, f64)> = Vec::new();
    match &task {
        FieldTask::Image(reference) => {
            let recon = model.predict_image(reference.width(), reference.height())?;
            rows.push(("psnr_db", psnr(&recon, reference)?));
            rows.push(("ssim", ssim(&recon, reference, &SsimConfig::default())?));
            let img = out.join(format!("reconstruction.{}", cfg.image_format().extension()));
            write_image(&img, &recon)?;
        }
        FieldTask::Sdf(target) => {
            let oracle = model.sdf_oracle()?;
            let reference = |p: [f64; 3]| target.eval(p);
            let seed = cfg.training.seed.unwrap_or(0);
            let mut rng = Pcg32::new(seed, EVAL_STREAM);
            rows.push(("iou", iou(&oracle, &reference, SDF_EVAL_SAMPLES, &mut rng)?));
            let mut abs_sum = 0.0;
            for _ in 0..SDF_EVAL_SAMPLES {
                let p = [
                    rng.uniform(0.0, 1.0),
                    rng.uniform(0.0, 1.0),
                    rng.uniform(0.0, 1.0),
                ];
                abs_sum += (oracle(p) - reference(p)).abs();
            }
            rows.push(("mean_abs_sdf_error", abs_sum / SDF_EVAL_SAMPLES as f64));
        }
    }

    let mut csv = String::from("metric,value\n");
    for (name, value) in &rows {
        println!("{name:<20} {value}");
        csv.push_str(&format!("{name},{value}\n"));
    }
    fs::write(out.join("metrics.csv"), csv)?;
    Ok(())
}

/// Sphere-traces either a checkpointed distance-field model or the
/// configured analytic task into `render.<format>`. A configured but
/// missing matcap file falls back to the procedural lit sphere with a
/// warning; an image-task checkpoint is rejected.
pub fn render_cmd(cfg: &RunConfig, checkpoint: Option<PathBuf>, threads: usize) -> Result<()> {
    let camera = cfg.camera();
    let trace = cfg.trace_config();
    let matcap = load_matcap(cfg)?;
    // --threads 0 is "no declared parallelism": the deterministic
    // single-threaded path (which any thread count matches bit for
    // bit anyway).
    let threads = threads.max(1);

    let image = match checkpoint {
        Some(path) => {
            let (model, _opt) = load_checkpoint(&path)?;
            if model.input_dim() != 3 || model.output_dim() != 1 {
                return Err(Error::config(format!(
                    "checkpoint {} maps {}D -> {} values; rendering needs a 3D distance field",
                    path.display(),
                    model.input_dim(),
                    model.output_dim()
                )));
            }
            let oracle = model.sdf_oracle()?;
            render(&oracle, &camera, &matcap, &trace, threads)?
        }
        None => {
            let task = cfg.load_task()?;
            let FieldTask::Sdf(target) = task else {
                return Err(Error::config(
                    "rendering without --checkpoint needs an sdf task (a scene or a .sdfg grid)",
                ));
            };
            let field = move |p: [f64; 3]| target.eval(p);
            render(&field, &camera, &matcap, &trace, threads)?
        }
    };

    let out = cfg.out_dir();
    fs::create_dir_all(&out)?;
    let path = out.join(format!("render.{}", cfg.image_format().extension()));
    write_image(&path, &image)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn load_matcap(cfg: &RunConfig) -> Result<nflab_core::fields::ImageField> {
    match &cfg.render.matcap {
        Some(path) if path.exists() => nflab_core::io::read_image(path),
        Some(path) => {
            eprintln!(
                "warning: matcap {} not found; using the built-in lit sphere",
                path.display()
            );
            default_matcap(256)
        }
        None => default_matcap(256),
    }
}

/// Prints the trainable-parameter split between the encoder and the
/// decoder network. Lattice encoders store values on cell *vertices*,
/// so a grid with N cells per axis holds (N+1)^dims vectors.
pub fn budget(cfg: &RunConfig) -> Result<()> {
    let encoding = cfg.encoding_config()?;
    let encoder_params = encoding.param_count();

    let output_dim = match cfg.task.kind {
        TaskKind::Image => 3,
        TaskKind::Sdf => 1,
    };
    let mut dims = vec![encoding.output_dim()];
    dims.extend(cfg.hidden_layers());
    dims.push(output_dim);
    let network_params: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();

    println!("encoding parameters {encoder_params:>12}");
    println!("network parameters  {network_params:>12}");
    println!("total               {:>12}", encoder_params + network_params);
    Ok(())
}

/// Loads a config and resolves it with the shared command-line
/// overrides applied.
pub fn load_resolved(
    config: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(config)?;
    cfg.resolve(seed, out)?;
    Ok(cfg)
}
