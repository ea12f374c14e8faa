//! The JSON run configuration.
//!
//! One document describes a whole run: what to fit (`task`), how
//! coordinates are encoded (`encoding`), the decoder network
//! (`network`), the optimization schedule (`training`), where
//! artifacts go (`output`), and how renders are shot (`render`).
//! Unknown keys are rejected so typos fail loudly. Absent fields take
//! the defaults documented on each section, and [`RunConfig::resolve`]
//! fills them in, so the copy echoed into the output directory is
//! complete and re-runs to the same results.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nflab_core::encoding::EncodingConfig;
use nflab_core::fields::{make_demo_scene, FieldTask, ImageField, SdfTarget};
use nflab_core::io::{load_sdf_grid, read_image};
use nflab_core::network::OutputActivation;
use nflab_core::optim::{LossKind, TrainConfig};
use nflab_core::render::{Camera, TraceConfig};
use nflab_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskSection,
    pub encoding: EncodingSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub render: RenderSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Image,
    Sdf,
}

/// What the model is fitted to. Image sources are a `.ppm`/`.png`
/// path or `builtin:test-pattern` (the bundled 256x256 multi-frequency
/// pattern). Distance-field sources are `scene:sphere`,
/// `scene:csg-demo`, or a path to a `.sdfg` dense grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub kind: TaskKind,
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncodingKind {
    Positional,
    Grid,
    Local,
    MultiGrid,
    MultiHash,
}

impl EncodingKind {
    fn name(self) -> &'static str {
        match self {
            EncodingKind::Positional => "positional",
            EncodingKind::Grid => "grid",
            EncodingKind::Local => "local",
            EncodingKind::MultiGrid => "multi-grid",
            EncodingKind::MultiHash => "multi-hash",
        }
    }
}

/// Flat union of every encoder's knobs; `kind` decides which apply.
/// `dims` defaults to the task's input dimension (2 for images, 3 for
/// distance fields). Per kind: `positional` takes `frequencies` and
/// `offset` (default 0); `grid` takes `cells` and `features`; `local`
/// takes `cells`, `frequencies`, and `shared_sin_cos` (default false);
/// `multi-grid` takes `levels` and `features`; `multi-hash` adds
/// `table_size`. Setting a field the kind does not use is an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingSection {
    pub kind: EncodingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_sin_cos: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationName {
    Identity,
    Sigmoid,
}

/// Decoder shape. Defaults: `hidden` [64, 64, 64], `leaky_slope` 0.01,
/// `output_activation` sigmoid for images and identity for distance
/// fields.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leaky_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_activation: Option<ActivationName>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossName {
    L2,
    Mape,
}

/// Optimization schedule. Defaults: `loss` l2 for images and mape for
/// distance fields, `learning_rate` 0.02 for l2 and 1e-4 for mape,
/// `batch_size` 16384, `iterations` 1000, `seed` 0, `mape_epsilon`
/// 0.01, `checkpoint_every` 0 (final checkpoint only). The rate must
/// be strictly positive here: a run that cannot move its parameters
/// is a misconfiguration at this level.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mape_epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormatName {
    Ppm,
    Png,
}

impl ImageFormatName {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormatName::Ppm => "ppm",
            ImageFormatName::Png => "png",
        }
    }
}

/// Where artifacts land. Defaults: `directory` "out", `image_format`
/// ppm.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_format: Option<ImageFormatName>,
}

/// Camera for `render`. Defaults look at the cube center from just
/// outside the front face: `position` [0.5, 0.5, -0.8], `look_at`
/// [0.5, 0.5, 0.5], `up` [0, 1, 0], `fov_degrees` 45, 256x256 pixels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub look_at: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub up: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fov_degrees: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
}

/// Sphere-tracing settings for `render`. Defaults: `tolerance` 1e-3,
/// `max_steps` 256, `max_ray_length` 4.0, `normal_step` 1e-3,
/// `background` [0.12, 0.12, 0.14]. `matcap` is an optional path to a
/// square shading-sphere image; when absent (or the file is missing,
/// with a warning) the procedural default is used.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSection {
    #[serde(default)]
    pub camera: CameraSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matcap: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_ray_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub background: Option<[f32; 3]>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// Applies command-line overrides, then fills every absent field
    /// with its default and validates the result. After this the
    /// config serializes to a complete document.
    pub fn resolve(&mut self, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
        if let Some(seed) = seed {
            self.training.seed = Some(seed);
        }
        if let Some(out) = out {
            self.output.directory = Some(out);
        }

        let input_dim = match self.task.kind {
            TaskKind::Image => 2,
            TaskKind::Sdf => 3,
        };
        let enc = &mut self.encoding;
        let dims = *enc.dims.get_or_insert(input_dim);
        if dims != input_dim {
            return Err(Error::config(format!(
                "encoding.dims {} does not match the task's {}-dimensional input",
                dims, input_dim
            )));
        }
        match enc.kind {
            EncodingKind::Positional => {
                enc.offset.get_or_insert(0);
            }
            EncodingKind::Local => {
                enc.shared_sin_cos.get_or_insert(false);
            }
            _ => {}
        }
        // Reject knobs the chosen kind ignores; a silently unused
        // field usually means the author thought it was doing
        // something.
        let unused: &[(&str, bool)] = &[
            (
                "frequencies",
                enc.frequencies.is_some()
                    && !matches!(enc.kind, EncodingKind::Positional | EncodingKind::Local),
            ),
            (
                "offset",
                enc.offset.is_some() && enc.kind != EncodingKind::Positional,
            ),
            (
                "cells",
                enc.cells.is_some()
                    && !matches!(enc.kind, EncodingKind::Grid | EncodingKind::Local),
            ),
            (
                "features",
                enc.features.is_some()
                    && !matches!(
                        enc.kind,
                        EncodingKind::Grid | EncodingKind::MultiGrid | EncodingKind::MultiHash
                    ),
            ),
            (
                "levels",
                enc.levels.is_some()
                    && !matches!(enc.kind, EncodingKind::MultiGrid | EncodingKind::MultiHash),
            ),
            (
                "table_size",
                enc.table_size.is_some() && enc.kind != EncodingKind::MultiHash,
            ),
            (
                "shared_sin_cos",
                enc.shared_sin_cos.is_some() && enc.kind != EncodingKind::Local,
            ),
        ];
        for (field, bad) in unused {
            if *bad {
                return Err(Error::config(format!(
                    "encoding.{field} does not apply to kind \"{}\"",
                    enc.kind.name()
                )));
            }
        }

        let net = &mut self.network;
        net.hidden.get_or_insert(vec![64, 64, 64]);
        net.leaky_slope.get_or_insert(0.01);
        net.output_activation.get_or_insert(match self.task.kind {
            TaskKind::Image => ActivationName::Sigmoid,
            TaskKind::Sdf => ActivationName::Identity,
        });

        let tr = &mut self.training;
        let loss = *tr.loss.get_or_insert(match self.task.kind {
            TaskKind::Image => LossName::L2,
            TaskKind::Sdf => LossName::Mape,
        });
        let rate = *tr.learning_rate.get_or_insert(match loss {
            LossName::L2 => 0.02,
            LossName::Mape => 1e-4,
        });
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::config(format!(
                "training.learning_rate {rate} must be positive"
            )));
        }
        tr.batch_size.get_or_insert(16_384);
        tr.iterations.get_or_insert(1000);
        tr.seed.get_or_insert(0);
        tr.mape_epsilon.get_or_insert(0.01);
        tr.checkpoint_every.get_or_insert(0);

        self.output.directory.get_or_insert_with(|| PathBuf::from("out"));
        self.output.image_format.get_or_insert(ImageFormatName::Ppm);

        let cam = &mut self.render.camera;
        cam.position.get_or_insert([0.5, 0.5, -0.8]);
        cam.look_at.get_or_insert([0.5, 0.5, 0.5]);
        cam.up.get_or_insert([0.0, 1.0, 0.0]);
        cam.fov_degrees.get_or_insert(45.0);
        cam.width.get_or_insert(256);
        cam.height.get_or_insert(256);
        let r = &mut self.render;
        r.tolerance.get_or_insert(1e-3);
        r.max_steps.get_or_insert(256);
        r.max_ray_length.get_or_insert(4.0);
        r.normal_step.get_or_insert(1e-3);
        r.background.get_or_insert([0.12, 0.12, 0.14]);

        // Fail on impossible encodings and schedules now rather than
        // halfway into a run.
        self.encoding_config()?.validate()?;
        self.train_config()?.validate()
    }

    fn require<T: Copy>(v: Option<T>, field: &str, kind: EncodingKind) -> Result<T> {
        v.ok_or_else(|| {
            Error::config(format!(
                "encoding.{field} is required for kind \"{}\"",
                kind.name()
            ))
        })
    }

    /// The core encoder description; call after [`RunConfig::resolve`].
    pub fn encoding_config(&self) -> Result<EncodingConfig> {
        let e = &self.encoding;
        let kind = e.kind;
        let dims = Self::require(e.dims, "dims", kind)?;
        Ok(match kind {
            EncodingKind::Positional => EncodingConfig::Positional {
                dims,
                frequencies: Self::require(e.frequencies, "frequencies", kind)?,
                offset: Self::require(e.offset, "offset", kind)?,
            },
            EncodingKind::Grid => EncodingConfig::Grid {
                dims,
                cells: Self::require(e.cells, "cells", kind)?,
                features: Self::require(e.features, "features", kind)?,
            },
            EncodingKind::Local => EncodingConfig::Local {
                dims,
                cells: Self::require(e.cells, "cells", kind)?,
                frequencies: Self::require(e.frequencies, "frequencies", kind)?,
                shared_sin_cos: Self::require(e.shared_sin_cos, "shared_sin_cos", kind)?,
            },
            EncodingKind::MultiGrid => EncodingConfig::MultiGrid {
                dims,
                levels: self
                    .encoding
                    .levels
                    .clone()
                    .ok_or_else(|| Error::config("encoding.levels is required for kind \"multi-grid\""))?,
                features: Self::require(e.features, "features", kind)?,
            },
            EncodingKind::MultiHash => EncodingConfig::MultiHash {
                dims,
                levels: self
                    .encoding
                    .levels
                    .clone()
                    .ok_or_else(|| Error::config("encoding.levels is required for kind \"multi-hash\""))?,
                features: Self::require(e.features, "features", kind)?,
                table_size: Self::require(e.table_size, "table_size", kind)?,
            },
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.training;
        let loss = match t.loss.ok_or_else(|| Error::config("training.loss unresolved"))? {
            LossName::L2 => LossKind::L2,
            LossName::Mape => LossKind::Mape,
        };
        Ok(TrainConfig {
            loss,
            learning_rate: t.learning_rate.unwrap_or(0.0),
            batch_size: t.batch_size.unwrap_or(0),
            iterations: t.iterations.unwrap_or(0),
            seed: t.seed.unwrap_or(0),
            mape_epsilon: t.mape_epsilon.unwrap_or(0.0),
            checkpoint_every: t.checkpoint_every.unwrap_or(0),
        })
    }

    pub fn hidden_layers(&self) -> Vec<usize> {
        self.network.hidden.clone().unwrap_or_else(|| vec![64, 64, 64])
    }

    pub fn leaky_slope(&self) -> f64 {
        self.network.leaky_slope.unwrap_or(0.01)
    }

    pub fn output_activation(&self) -> OutputActivation {
        match self.network.output_activation {
            Some(ActivationName::Identity) => OutputActivation::Identity,
            Some(ActivationName::Sigmoid) | None => OutputActivation::Sigmoid,
        }
    }

    /// Loads or constructs the fitting target named by the task
    /// section.
    pub fn load_task(&self) -> Result<FieldTask> {
        match self.task.kind {
            TaskKind::Image => {
                let src = self.task.source.as_str();
                if src == "builtin:test-pattern" {
                    return Ok(FieldTask::Image(ImageField::test_pattern(256, 256)?));
                }
                if let Some(rest) = src.strip_prefix("builtin:") {
                    return Err(Error::config(format!(
                        "unknown builtin image \"{rest}\"; available: test-pattern"
                    )));
                }
                Ok(FieldTask::Image(read_image(Path::new(src))?))
            }
            TaskKind::Sdf => {
                let src = self.task.source.as_str();
                if let Some(name) = src.strip_prefix("scene:") {
                    return Ok(FieldTask::Sdf(SdfTarget::Scene(make_demo_scene(name)?)));
                }
                let path = Path::new(src);
                if path.extension().and_then(|e| e.to_str()) == Some("sdfg") {
                    return Ok(FieldTask::Sdf(SdfTarget::Grid(load_sdf_grid(path)?)));
                }
                Err(Error::config(format!(
                    "sdf source \"{src}\" must be scene:<name> or a .sdfg file"
                )))
            }
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output
            .directory
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn image_format(&self) -> ImageFormatName {
        self.output.image_format.unwrap_or(ImageFormatName::Ppm)
    }

    pub fn camera(&self) -> Camera {
        let c = &self.render.camera;
        Camera {
            position: c.position.unwrap_or([0.5, 0.5, -0.8]),
            look_at: c.look_at.unwrap_or([0.5, 0.5, 0.5]),
            up: c.up.unwrap_or([0.0, 1.0, 0.0]),
            fov_degrees: c.fov_degrees.unwrap_or(45.0),
            width: c.width.unwrap_or(256),
            height: c.height.unwrap_or(256),
        }
    }

    pub fn trace_config(&self) -> TraceConfig {
        let d = TraceConfig::default();
        let r = &self.render;
        TraceConfig {
            tolerance: r.tolerance.unwrap_or(d.tolerance),
            max_steps: r.max_steps.unwrap_or(d.max_steps),
            max_ray_length: r.max_ray_length.unwrap_or(d.max_ray_length),
            normal_step: r.normal_step.unwrap_or(d.normal_step),
            background: r.background.unwrap_or(d.background),
        }
    }

    pub fn to_pretty_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::config(format!("cannot serialize config: {e}")))
    }
}
