use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{distance_log_error, orientation_similarity, reprojection_error_metric, scale_error, GeoMetrics};
use super::synth::{gen_synthetic_scene, masked, object_silhouette, Difficulty, ObjectTarget, SyntheticScene};
use crate::geom::{Camera, MeshLibrary, ObjectState};
use crate::optim::{fit_object, select_mesh_exhaustive, AblationFlags, FitConfig, FreeVariable};
use crate::raster::SoftRasterConfig;
use crate::{Error, Result};

pub const FULL_LABEL: &str = "full";

/// A fitting configuration under a report label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub label: String,
    pub fit: FitConfig,
}

/// The full model and its three ablations, all at `iterations` Adam steps.
pub fn table2_configs(iterations: u32) -> Vec<BenchConfig> {
    let base = FitConfig { iterations, ..FitConfig::default() };
    let with = |label: &str, flags: AblationFlags| BenchConfig {
        label: label.into(),
        fit: FitConfig { ablation_flags: flags, ..base.clone() },
    };
    let full = AblationFlags::default();
    vec![
        with(FULL_LABEL, full),
        with("w/o quaternion constraint", AblationFlags { yaw_constraint: false, ..full }),
        with("w/o normalized distance tau", AblationFlags { normalized_distance: false, ..full }),
        with("w/o MultiCAD and FFD", AblationFlags { multicad_ffd: false, ..full }),
    ]
}

/// Short per-candidate fits used to rank library meshes: a sharper raster
/// and a frozen lattice, so candidates compete on their rest shapes rather
/// than on how far deformation can bend them toward the target.
pub fn selection_config() -> FitConfig {
    FitConfig {
        iterations: 16,
        free_variables: [FreeVariable::Scale, FreeVariable::Yaw, FreeVariable::OffsetE, FreeVariable::LogTau].into(),
        raster: SoftRasterConfig::with_gamma(0.5),
        ..FitConfig::default()
    }
}

/// One scored object under one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectOutcome {
    pub seed: u64,
    pub object_id: u32,
    pub config: String,
    pub truth_mesh: usize,
    pub selected_mesh: Option<usize>,
    pub initial: GeoMetrics,
    pub metrics: Option<GeoMetrics>,
    pub final_loss: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config: String,
    /// Objects with metrics.
    pub count: usize,
    pub failures: usize,
    pub mean: GeoMetrics,
    pub median: GeoMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub difficulty: Difficulty,
    pub seeds: Vec<u64>,
    pub summaries: Vec<ConfigSummary>,
    pub objects: Vec<ObjectOutcome>,
}

/// Metrics of `state` against the ground truth, comparing visible
/// silhouettes only.
pub fn evaluate(lib: &MeshLibrary, camera: &Camera, state: &ObjectState, truth: &ObjectState, target: &ObjectTarget) -> Result<GeoMetrics> {
    let pred = masked(&object_silhouette(lib, state, camera)?, &target.mask);
    Ok(GeoMetrics {
        orientation_similarity: orientation_similarity(&state.rotation(), &truth.rotation()),
        distance_log_error: distance_log_error(state.ray_distance, truth.ray_distance)?,
        scale_error: scale_error(&state.scale, &truth.scale),
        reprojection_error: reprojection_error_metric(&pred, &target.visible())?,
    })
}

/// Fits every scored object of one scene under every configuration.
pub fn run_scene(scene: &SyntheticScene, configs: &[BenchConfig]) -> Result<Vec<ObjectOutcome>> {
    let camera = &scene.truth.camera;
    let lib = &scene.truth.mesh_lib;
    let mut out = Vec::new();
    for (i, target) in scene.targets.iter().enumerate().filter(|(_, t)| t.scored) {
        let truth = &scene.truth.objects[i];
        let init = &scene.init.objects[i].state;
        let initial = evaluate(lib, camera, init, &truth.state, target)?;
        for cfg in configs {
            let fitted = if cfg.fit.ablation_flags.multicad_ffd {
                select_mesh_exhaustive(&target.silhouette, &target.mask, init, lib, camera, &cfg.fit)
            } else {
                fit_object(&target.silhouette, &target.mask, init, lib, camera, &cfg.fit)
            };
            let mut outcome = ObjectOutcome {
                seed: scene.seed,
                object_id: truth.id,
                config: cfg.label.clone(),
                truth_mesh: truth.state.mesh_index,
                selected_mesh: None,
                initial,
                metrics: None,
                final_loss: None,
                error: None,
            };
            match fitted.and_then(|r| Ok((evaluate(lib, camera, &r.state, &truth.state, target)?, r))) {
                Ok((m, r)) => {
                    outcome.metrics = Some(m);
                    outcome.selected_mesh = Some(r.selected_mesh);
                    outcome.final_loss = Some(r.final_loss);
                }
                Err(e) => {
                    log::warn!("seed {} object {} ({}): {e}", scene.seed, truth.id, cfg.label);
                    outcome.error = Some(e.to_string());
                }
            }
            out.push(outcome);
        }
    }
    Ok(out)
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn summarize(label: &str, outcomes: &[ObjectOutcome]) -> ConfigSummary {
    let rows: Vec<&ObjectOutcome> = outcomes.iter().filter(|o| o.config == label).collect();
    let ms: Vec<GeoMetrics> = rows.iter().filter_map(|o| o.metrics).collect();
    let column = |f: fn(&GeoMetrics) -> f64| -> Vec<f64> { ms.iter().map(f).collect() };
    let stat = |f: fn(&GeoMetrics) -> f64, agg: &dyn Fn(&mut [f64]) -> f64| agg(&mut column(f));
    let mean = |v: &mut [f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    let pick = |agg: &dyn Fn(&mut [f64]) -> f64| GeoMetrics {
        orientation_similarity: stat(|m| m.orientation_similarity, agg),
        distance_log_error: stat(|m| m.distance_log_error, agg),
        scale_error: stat(|m| m.scale_error, agg),
        reprojection_error: stat(|m| m.reprojection_error, agg),
    };
    ConfigSummary {
        config: label.to_string(),
        count: ms.len(),
        failures: rows.len() - ms.len(),
        mean: pick(&mean),
        median: pick(&median),
    }
}

/// Runs every configuration on the synthetic scenes of `seeds`. Scenes are
/// evaluated in parallel; results are ordered by seed, object and config.
pub fn run_benchmark(configs: &[BenchConfig], seeds: &[u64], difficulty: Difficulty) -> Result<BenchReport> {
    if !configs.iter().any(|c| c.label == FULL_LABEL) {
        return Err(Error::InvalidArgument(format!("configs must include `{FULL_LABEL}`")));
    }
    for c in configs {
        c.fit.validate()?;
    }
    let per_scene = seeds
        .par_iter()
        .map(|&seed| run_scene(&gen_synthetic_scene(seed, difficulty)?, configs))
        .collect::<Result<Vec<_>>>()?;
    let objects: Vec<ObjectOutcome> = per_scene.into_iter().flatten().collect();
    let summaries = configs.iter().map(|c| summarize(&c.label, &objects)).collect();
    Ok(BenchReport {
        difficulty,
        seeds: seeds.to_vec(),
        summaries,
        objects,
    })
}

impl BenchReport {
    pub fn summary(&self, label: &str) -> Option<&ConfigSummary> {
        self.summaries.iter().find(|s| s.config == label)
    }

    /// One row of means per configuration; distance error ×1e2 and reprojection ×1e3.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("config,orientation_similarity,distance_x1e2,scale,reproj_x1e3\n");
        for s in &self.summaries {
            let m = &s.mean;
            let _ = writeln!(
                out,
                "{},{:.4},{:.3},{:.4},{:.3}",
                s.config,
                m.orientation_similarity,
                m.distance_log_error * 1e2,
                m.scale_error,
                m.reprojection_error * 1e3
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
