//! End-to-end runs: decomposition, cartoon segmentation of the cartoon part,
//! curvelet features and clustering of the texture part, plus the files a run
//! leaves behind.

mod config;
pub mod io;
pub mod metrics;
mod presets;
pub mod synth;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{ClusterMethod, ClusteringConfig, OutputConfig, PipelineConfig, RunMode};
pub use presets::{preset, preset_names, Preset, PresetParams};

use crate::cartoon_segmentation::{segment, CartoonSegmentation};
use crate::clustering::{kmeans, multiclass_mbo, ClusterResult};
use crate::decomposition::{decompose, Decomposition};
use crate::empirical_curvelet::{
    build_filter_bank, ect_forward, fit_partition_to_grid, write_subbands, CoefficientSet,
    CurveletFilterBank,
};
use crate::error::{Error, Result};
use crate::imagecore::{Image, LabelMap};
use crate::spectral_partition::{analyze_spectrum, PartitionDocument, SpectrumAnalysis};
use crate::texture_features::{feature_matrix, FeatureMatrix};

use io::Rescale;

/// Everything the texture branch produces.
#[derive(Clone, Debug)]
pub struct TextureOutcome {
    pub analysis: SpectrumAnalysis,
    pub bank: CurveletFilterBank,
    pub coeffs: CoefficientSet,
    pub features: FeatureMatrix,
    pub kmeans: ClusterResult,
    pub mbo: Option<ClusterResult>,
    pub labels: LabelMap,
}

impl TextureOutcome {
    /// The result the labels come from.
    pub fn chosen(&self) -> &ClusterResult {
        self.mbo.as_ref().unwrap_or(&self.kmeans)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CartoonSummary {
    pub iterations: usize,
    pub converged: bool,
    pub region_means: [f64; 4],
    pub local_means: [f64; 4],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TextureSummary {
    pub tau: f64,
    pub partition: Option<PartitionDocument>,
    pub detected_subbands: usize,
    pub merged_subbands: usize,
    /// Boundaries dropped so the filter bank resolves on the grid.
    pub boundaries_removed: usize,
    pub n_subbands: usize,
    pub gamma: f64,
    pub delta_theta: f64,
    pub kmeans_objective: f64,
    pub kmeans_iterations: usize,
    pub mbo_iterations: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: String,
    pub message: String,
}

/// JSON record of a run; carries the full configuration so the run can be
/// repeated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub status: String,
    pub failure: Option<Failure>,
    pub config: PipelineConfig,
    pub width: usize,
    pub height: usize,
    pub input_bit_depth: Option<u8>,
    pub input_rescale: Option<Rescale>,
    pub cartoon: Option<CartoonSummary>,
    pub texture: Option<TextureSummary>,
    pub timings: Vec<StageTiming>,
    pub outputs: Vec<PathBuf>,
}

impl RunReport {
    pub fn new(config: &PipelineConfig, width: usize, height: usize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            status: "running".into(),
            failure: None,
            config: config.clone(),
            width,
            height,
            input_bit_depth: None,
            input_rescale: None,
            cartoon: None,
            texture: None,
            timings: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn fail(&mut self, err: &Error) {
        self.status = "failed".into();
        let stage = match err {
            Error::Stage { stage, .. } => stage.to_string(),
            _ => "setup".into(),
        };
        self.failure = Some(Failure {
            stage,
            message: err.to_string(),
        });
    }
}

fn timed<T>(
    report: &mut RunReport,
    stage: &'static str,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage));
    report.timings.push(StageTiming {
        stage: stage.into(),
        millis: start.elapsed().as_secs_f64() * 1e3,
    });
    out
}

/// Decomposition stage.
pub fn run_decomposition(
    cfg: &PipelineConfig,
    image: &Image,
    report: &mut RunReport,
) -> Result<Decomposition> {
    timed(report, "decomposition", || {
        decompose(image, &cfg.decomposition)
    })
}

/// Cartoon segmentation of an already decomposed image.
pub fn run_cartoon(
    cfg: &PipelineConfig,
    cartoon: &Image,
    report: &mut RunReport,
) -> Result<CartoonSegmentation> {
    let seg = timed(report, "cartoon", || segment(cartoon, &cfg.cartoon))?;
    report.cartoon = Some(CartoonSummary {
        iterations: seg.iterations,
        converged: seg.converged,
        region_means: seg.stats.c,
        local_means: seg.stats.d,
    });
    Ok(seg)
}

/// Curvelet analysis, features and clustering of a texture component.
pub fn run_texture(
    cfg: &PipelineConfig,
    texture: &Image,
    report: &mut RunReport,
) -> Result<TextureOutcome> {
    let analysis = timed(report, "partition", || {
        analyze_spectrum(texture, &cfg.detection)
    })?;
    let (w, h) = (texture.width(), texture.height());
    let (partition, removed) = if cfg.fit_partition {
        timed(report, "filter_bank", || {
            fit_partition_to_grid(&analysis.merged, w, h)
        })?
    } else {
        (analysis.merged.clone(), 0)
    };
    let bank = timed(report, "filter_bank", || {
        build_filter_bank(&partition, None, w, h)
    })?;
    let coeffs = timed(report, "curvelet", || ect_forward(texture, &bank))?;
    let features = timed(report, "features", || {
        feature_matrix(&coeffs, &partition, cfg.clustering.include_approx)
    })?;
    let km = timed(report, "kmeans", || {
        kmeans(&features, &cfg.clustering.kmeans_params(cfg.seed))
    })?;
    let mbo = match cfg.clustering.method {
        ClusterMethod::Kmeans => None,
        ClusterMethod::Mbo => Some(timed(report, "mbo", || {
            multiclass_mbo(
                &features,
                &km.labels,
                cfg.clustering.k,
                &cfg.clustering.mbo_params(cfg.seed),
            )
        })?),
    };
    let chosen = mbo.as_ref().unwrap_or(&km);
    let labels = chosen.to_label_map(w, h)?;
    let tr = bank.transition();
    report.texture = Some(TextureSummary {
        tau: analysis.tau,
        partition: Some(partition.to_document(analysis.tau, cfg.detection.eta)),
        detected_subbands: analysis.detected.n_subbands(),
        merged_subbands: analysis.merged.n_subbands(),
        boundaries_removed: removed,
        n_subbands: partition.n_subbands(),
        gamma: tr.gamma,
        delta_theta: tr.delta_theta,
        kmeans_objective: km.objective,
        kmeans_iterations: km.iterations,
        mbo_iterations: mbo.as_ref().map(|r| r.iterations),
    });
    Ok(TextureOutcome {
        analysis,
        bank,
        coeffs,
        features,
        kmeans: km,
        mbo,
        labels,
    })
}

/// Products of a full run.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub decomposition: Decomposition,
    pub cartoon: CartoonSegmentation,
    pub texture: TextureOutcome,
    pub report: RunReport,
}

/// Runs every stage on `image`. Errors carry the name of the failing stage.
pub fn run_pipeline(cfg: &PipelineConfig, image: &Image) -> Result<PipelineOutput> {
    cfg.validate()?;
    let mut report = RunReport::new(cfg, image.width(), image.height());
    let decomposition = run_decomposition(cfg, image, &mut report)?;
    let cartoon = run_cartoon(cfg, &decomposition.cartoon, &mut report)?;
    let texture = run_texture(cfg, &decomposition.texture, &mut report)?;
    report.status = "ok".into();
    Ok(PipelineOutput {
        decomposition,
        cartoon,
        texture,
        report,
    })
}

/// Products of a run restricted to `cfg.mode`.
#[derive(Clone, Debug)]
pub struct RunProducts {
    pub decomposition: Option<Decomposition>,
    pub cartoon: Option<CartoonSegmentation>,
    pub texture: Option<TextureOutcome>,
    pub report: RunReport,
}

/// Runs the stages selected by `cfg.mode`. With `cfg.decompose` off the
/// segmentations see `image` itself.
pub fn run_selected(cfg: &PipelineConfig, image: &Image) -> Result<RunProducts> {
    cfg.validate()?;
    let mut report = RunReport::new(cfg, image.width(), image.height());
    let want_cartoon = matches!(cfg.mode, RunMode::Full | RunMode::Cartoon);
    let want_texture = matches!(cfg.mode, RunMode::Full | RunMode::Texture);
    let decomposition = if cfg.decompose || cfg.mode == RunMode::Decompose {
        Some(run_decomposition(cfg, image, &mut report)?)
    } else {
        None
    };
    let (u, v) = match &decomposition {
        Some(d) => (&d.cartoon, &d.texture),
        None => (image, image),
    };
    let cartoon = if want_cartoon {
        Some(run_cartoon(cfg, u, &mut report)?)
    } else {
        None
    };
    let texture = if want_texture {
        Some(run_texture(cfg, v, &mut report)?)
    } else {
        None
    };
    report.status = "ok".into();
    Ok(RunProducts {
        decomposition,
        cartoon,
        texture,
        report,
    })
}

fn write_raw(path: &Path, img: &Image) -> Result<()> {
    let bytes: Vec<u8> = img.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// `<stem>.u.png` / `<stem>.v.png` previews (the texture shifted by 128) and
/// the exact parts as little-endian f64 grids `<stem>.u.f64` / `<stem>.v.f64`.
pub fn write_decomposition_outputs(
    cfg: &PipelineConfig,
    d: &Decomposition,
    report: &mut RunReport,
) -> Result<()> {
    let dir = &cfg.output.dir;
    let stem = cfg.stem();
    for (name, img) in [("u", &d.cartoon), ("v", &d.texture)] {
        let preview = if name == "v" {
            img.map(|x| x + 128.0)
        } else {
            img.clone()
        };
        let path = dir.join(format!("{stem}.{name}.png"));
        io::save_gray(&path, &preview)?;
        report.outputs.push(path);
        let path = dir.join(format!("{stem}.{name}.f64"));
        write_raw(&path, img)?;
        report.outputs.push(path);
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Label map as `<stem>.<name>.png`, plus a colour rendering when enabled.
pub fn write_label_outputs(
    cfg: &PipelineConfig,
    name: &str,
    labels: &LabelMap,
    report: &mut RunReport,
) -> Result<()> {
    let dir = &cfg.output.dir;
    let stem = cfg.stem();
    let path = dir.join(format!("{stem}.{name}.png"));
    io::save_label_map(&path, labels)?;
    report.outputs.push(path);
    if cfg.output.colorized {
        let path = dir.join(format!("{stem}.{name}.color.png"));
        io::save_colorized(&path, labels)?;
        report.outputs.push(path);
    }
    Ok(())
}

/// Sidecar describing a clustering result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSidecar {
    pub method: ClusterMethod,
    pub k: usize,
    pub objective: f64,
    pub iterations: usize,
    pub kmeans: crate::clustering::KMeansParams,
    pub mbo: Option<crate::clustering::MboClusterParams>,
    pub seed: u64,
    pub labels: String,
}

/// Texture products: label map, its JSON sidecar, the partition and the
/// optional subband dump and feature export.
pub fn write_texture_outputs(
    cfg: &PipelineConfig,
    tex: &TextureOutcome,
    report: &mut RunReport,
) -> Result<()> {
    let dir = &cfg.output.dir;
    let stem = cfg.stem();
    write_label_outputs(cfg, "texture", &tex.labels, report)?;
    let chosen = tex.chosen();
    let sidecar = ClusterSidecar {
        method: cfg.clustering.method,
        k: chosen.k,
        objective: chosen.objective,
        iterations: chosen.iterations,
        kmeans: cfg.clustering.kmeans_params(cfg.seed),
        mbo: tex
            .mbo
            .as_ref()
            .map(|_| cfg.clustering.mbo_params(cfg.seed)),
        seed: cfg.seed,
        labels: format!("{stem}.texture.png"),
    };
    let path = dir.join(format!("{stem}.texture.json"));
    write_text(&path, &serde_json::to_string_pretty(&sidecar)?)?;
    report.outputs.push(path);
    let path = dir.join(format!("{stem}.partition.json"));
    write_text(
        &path,
        &tex.bank
            .partition()
            .to_document(tex.analysis.tau, cfg.detection.eta)
            .to_json()?,
    )?;
    report.outputs.push(path);
    if cfg.output.dump_subbands {
        let sub = dir.join(format!("{stem}.subbands"));
        write_subbands(&sub, &tex.coeffs, &tex.bank)?;
        report.outputs.push(sub);
    }
    if cfg.output.export_features {
        tex.features.export(dir, &format!("{stem}.features"))?;
        report
            .outputs
            .push(dir.join(format!("{stem}.features.json")));
    }
    Ok(())
}

pub fn write_report(cfg: &PipelineConfig, report: &mut RunReport) -> Result<PathBuf> {
    let path = cfg.output.dir.join(format!("{}.report.json", cfg.stem()));
    report.outputs.push(path.clone());
    write_text(&path, &report.to_json()?)?;
    Ok(path)
}

/// Loads `cfg.input`, runs the stages of `cfg.mode` and writes their outputs. On
/// failure only the report is written, with `status = "failed"`.
pub fn run_and_write(cfg: &PipelineConfig) -> Result<RunReport> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::param("no input image configured"))?;
    fs::create_dir_all(&cfg.output.dir).map_err(|e| Error::io(&cfg.output.dir, e))?;
    let loaded = io::load_image(input).map_err(|e| e.in_stage("load"));
    let loaded = match loaded {
        Ok(l) => l,
        Err(e) => {
            let mut report = RunReport::new(cfg, 0, 0);
            report.fail(&e);
            write_report(cfg, &mut report)?;
            return Err(e);
        }
    };
    match run_selected(cfg, &loaded.image) {
        Ok(mut out) => {
            let report = &mut out.report;
            report.input_bit_depth = Some(loaded.bit_depth);
            report.input_rescale = loaded.rescale;
            if cfg.mode == RunMode::Decompose {
                if let Some(d) = &out.decomposition {
                    write_decomposition_outputs(cfg, d, report)?;
                }
            }
            if let Some(c) = &out.cartoon {
                write_label_outputs(cfg, "cartoon", &c.labels, report)?;
            }
            if let Some(t) = &out.texture {
                write_texture_outputs(cfg, t, report)?;
            }
            write_report(cfg, report)?;
            Ok(out.report)
        }
        Err(e) => {
            let mut report = RunReport::new(cfg, loaded.image.width(), loaded.image.height());
            report.input_bit_depth = Some(loaded.bit_depth);
            report.input_rescale = loaded.rescale;
            report.fail(&e);
            write_report(cfg, &mut report)?;
            Err(e)
        }
    }
}
