//! End-to-end inference and evaluation: run both stages over LR/HR scene
//! pairs, collect quality metrics per scene, and aggregate a report.
//!
//! Reports merge by scene name, so the aggregate is independent of
//! evaluation order. Infinite PSNR values (identical images) are excluded
//! from every mean; the report records how many were dropped so callers can
//! surface a warning. Runtimes are compute-only (no model loading) and are
//! the only non-deterministic report fields.

use crate::ato::{forward_all_views, AtoModel};
use crate::error::{Error, Result};
use crate::lightfield::LightField;
use crate::metrics::{
    db_serde, mean_finite, parallax_pr_curve, per_view_psnr_grid, ssim, PrPoint, ViewPsnrGrid,
};
use crate::regnet::{regularize, RegModel};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Descending edge-strength cutoffs used when the caller does not supply a
/// threshold sweep.
pub const DEFAULT_PR_THRESHOLDS: [f64; 10] =
    [0.8, 0.6, 0.5, 0.4, 0.3, 0.25, 0.2, 0.15, 0.1, 0.05];

/// Two-stage super-resolution of one light field. Without a regularizer the
/// intermediate (stage-1) result is returned exactly.
pub fn super_resolve<T: crate::tensor::Real>(
    lf_lr: &LightField<T>,
    ato: &AtoModel<T>,
    reg: Option<&RegModel<T>>,
) -> Result<LightField<T>> {
    let intermediate = forward_all_views(lf_lr, ato)?;
    match reg {
        Some(model) => regularize(&intermediate, model),
        None => Ok(intermediate),
    }
}

/// Metrics of one scene. `psnr_mean`/`ssim_mean` average the per-view
/// values; infinite PSNRs are excluded and counted.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneEval {
    pub name: String,
    #[serde(with = "db_serde")]
    pub psnr_mean: f64,
    pub ssim_mean: f64,
    pub per_view_psnr: ViewPsnrGrid,
    pub pr_points: Vec<PrPoint>,
    pub runtime_s: f64,
    pub excluded_infinite_psnr: usize,
}

/// Aggregate over scenes: arithmetic means of the per-scene values, a
/// cell-wise mean PSNR grid, and the mean PR point per threshold.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(with = "db_serde")]
    pub psnr_mean: f64,
    pub ssim_mean: f64,
    pub per_view_psnr: ViewPsnrGrid,
    pub pr_points: Vec<PrPoint>,
    /// Mean compute-only seconds per scene.
    pub runtime_s: f64,
    pub excluded_infinite_psnr: usize,
    pub scenes: Vec<SceneEval>,
}

impl EvalReport {
    /// Copy with every runtime zeroed — the deterministic part of a report,
    /// suitable for bit-exact comparison between runs.
    pub fn without_runtime(&self) -> EvalReport {
        let mut out = self.clone();
        out.runtime_s = 0.0;
        for s in &mut out.scenes {
            s.runtime_s = 0.0;
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("encoding report", e))
    }

    pub fn from_json(text: &str) -> Result<EvalReport> {
        serde_json::from_str(text).map_err(|e| Error::json("decoding report", e))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    /// PR points as CSV, one block per scene plus the aggregate.
    pub fn pr_csv(&self) -> String {
        let mut out = String::from("scene,threshold,recall,precision\n");
        for s in &self.scenes {
            for p in &s.pr_points {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    s.name, p.threshold, p.recall, p.precision
                ));
            }
        }
        for p in &self.pr_points {
            out.push_str(&format!(
                "(mean),{},{},{}\n",
                p.threshold, p.recall, p.precision
            ));
        }
        out
    }
}

/// Pair two name-keyed collections; every name must appear in both.
pub fn pair_by_name<X, Y>(
    mut lr: Vec<(String, X)>,
    mut hr: Vec<(String, Y)>,
) -> Result<Vec<(String, X, Y)>> {
    lr.sort_by(|a, b| a.0.cmp(&b.0));
    hr.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = Vec::with_capacity(lr.len());
    let mut hr_iter = hr.into_iter().peekable();
    for (name, x) in lr {
        match hr_iter.peek() {
            Some((hname, _)) if *hname == name => {
                let (_, y) = hr_iter.next().unwrap();
                out.push((name, x, y));
            }
            Some((hname, _)) if *hname < name => {
                return Err(Error::UnpairedScene {
                    name: hr_iter.next().unwrap().0,
                });
            }
            _ => return Err(Error::UnpairedScene { name }),
        }
    }
    if let Some((name, _)) = hr_iter.next() {
        return Err(Error::UnpairedScene { name });
    }
    Ok(out)
}

/// Evaluate one super-resolved field against its ground truth.
pub fn evaluate_scene(
    name: &str,
    sr: &LightField<f32>,
    hr: &LightField<f32>,
    thresholds: &[f64],
    runtime_s: f64,
) -> Result<SceneEval> {
    let grid = per_view_psnr_grid(sr, hr)?;
    let (psnr_mean, excluded) = mean_finite(&grid.grid);
    let (m, n) = sr.angular_res();
    let mut ssim_sum = 0.0;
    for mi in 0..m {
        for ni in 0..n {
            ssim_sum += ssim(&sr.view(mi, ni)?, &hr.view(mi, ni)?)?;
        }
    }
    let pr_points = parallax_pr_curve(sr, hr, thresholds)?;
    Ok(SceneEval {
        name: name.into(),
        psnr_mean,
        ssim_mean: ssim_sum / (m * n) as f64,
        per_view_psnr: grid,
        pr_points,
        runtime_s,
        excluded_infinite_psnr: excluded,
    })
}

/// Run `super_resolve` over (name, LR, HR) triples and aggregate. Scenes are
/// merged by name, so input order does not affect the report.
pub fn evaluate(
    pairs: &[(String, LightField<f32>, LightField<f32>)],
    ato: &AtoModel<f32>,
    reg: Option<&RegModel<f32>>,
    thresholds: &[f64],
) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::Other("evaluation needs at least one scene".into()));
    }
    let mut scenes = Vec::with_capacity(pairs.len());
    for (name, lr, hr) in pairs {
        let started = std::time::Instant::now();
        let sr = super_resolve(lr, ato, reg)?;
        let runtime_s = started.elapsed().as_secs_f64();
        scenes.push(evaluate_scene(name, &sr, hr, thresholds, runtime_s)?);
    }
    aggregate(scenes)
}

/// Merge per-scene results into a report (scenes sorted by name).
pub fn aggregate(mut scenes: Vec<SceneEval>) -> Result<EvalReport> {
    if scenes.is_empty() {
        return Err(Error::Other("no scenes to aggregate".into()));
    }
    scenes.sort_by(|a, b| a.name.cmp(&b.name));
    let angular = scenes[0].per_view_psnr.angular_res;
    for s in &scenes {
        if s.per_view_psnr.angular_res != angular {
            return Err(Error::ConfigMismatch {
                field: "angular_res".into(),
                model: format!("{angular:?}"),
                input: format!("{:?}", s.per_view_psnr.angular_res),
            });
        }
    }

    let scene_psnrs: Vec<f64> = scenes.iter().map(|s| s.psnr_mean).collect();
    let (psnr_mean, _) = mean_finite(&scene_psnrs);
    let ssim_mean =
        scenes.iter().map(|s| s.ssim_mean).sum::<f64>() / scenes.len() as f64;
    let runtime_s =
        scenes.iter().map(|s| s.runtime_s).sum::<f64>() / scenes.len() as f64;
    let excluded = scenes.iter().map(|s| s.excluded_infinite_psnr).sum();

    // Cell-wise mean over scenes, keeping the sentinel where all are ∞.
    let cells = angular.0 * angular.1;
    let mut grid = Vec::with_capacity(cells);
    for c in 0..cells {
        let vals: Vec<f64> = scenes.iter().map(|s| s.per_view_psnr.grid[c]).collect();
        grid.push(mean_finite(&vals).0);
    }
    let min = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let per_view_psnr = ViewPsnrGrid {
        angular_res: angular,
        center_corner_gap: grid_gap(&grid, angular.0, angular.1),
        grid,
        min,
        max,
    };

    // Mean PR point per threshold; thresholds must agree across scenes.
    let count = scenes[0].pr_points.len();
    for s in &scenes {
        if s.pr_points.len() != count {
            return Err(Error::ConfigMismatch {
                field: "pr thresholds".into(),
                model: format!("{count}"),
                input: format!("{}", s.pr_points.len()),
            });
        }
    }
    let mut pr_points = Vec::with_capacity(count);
    for i in 0..count {
        let t = scenes[0].pr_points[i].threshold;
        let recall =
            scenes.iter().map(|s| s.pr_points[i].recall).sum::<f64>() / scenes.len() as f64;
        let precision = scenes.iter().map(|s| s.pr_points[i].precision).sum::<f64>()
            / scenes.len() as f64;
        pr_points.push(PrPoint {
            threshold: t,
            recall,
            precision,
        });
    }

    Ok(EvalReport {
        psnr_mean,
        ssim_mean,
        per_view_psnr,
        pr_points,
        runtime_s,
        excluded_infinite_psnr: excluded,
        scenes,
    })
}

// Same center/corner contrast as the per-scene grid, over aggregated cells.
fn grid_gap(grid: &[f64], m: usize, n: usize) -> f64 {
    let (cm, cn) = ((m - 1) / 2, (n - 1) / 2);
    let mut center = Vec::new();
    for mi in cm.saturating_sub(1)..=(cm + 1).min(m - 1) {
        for ni in cn.saturating_sub(1)..=(cn + 1).min(n - 1) {
            center.push(grid[mi * n + ni]);
        }
    }
    let corners = [
        grid[0],
        grid[n - 1],
        grid[(m - 1) * n],
        grid[(m - 1) * n + n - 1],
    ];
    center.iter().sum::<f64>() / center.len() as f64
        - corners.iter().sum::<f64>() / corners.len() as f64
}
