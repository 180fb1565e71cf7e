//! Evaluation metrics: PSNR, single-scale SSIM, the per-view PSNR grid with
//! its center-versus-corner gap, and an EPI edge precision/recall curve.
//!
//! All statistics are accumulated in f64 regardless of the sample type.
//! Identical inputs produce an infinite PSNR; callers that average PSNRs
//! must exclude the infinite sentinel (see [`mean_finite`]).

use crate::error::{Error, Result};
use crate::lightfield::{EpiOrientation, LightField};
use crate::tensor::{Real, Tensor};
use serde::{Deserialize, Serialize};

/// Peak-signal-to-noise ratio in dB. Returns `f64::INFINITY` when the inputs
/// are identical.
pub fn psnr<T: Real>(a: &Tensor<T>, b: &Tensor<T>, peak: f64) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            context: "psnr".into(),
            expected: a.shape().to_vec(),
            got: b.shape().to_vec(),
        });
    }
    let mut sq = 0.0f64;
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = x.as_f64() - y.as_f64();
        sq += d * d;
    }
    let mse = sq / a.numel() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Mean of the finite entries; returns the mean and how many non-finite
/// entries were excluded. An all-infinite input yields (INFINITY, n).
pub fn mean_finite(values: &[f64]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut kept = 0usize;
    for &v in values {
        if v.is_finite() {
            sum += v;
            kept += 1;
        }
    }
    if kept == 0 {
        return (f64::INFINITY, values.len());
    }
    (sum / kept as f64, values.len() - kept)
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable valid-mode Gaussian blur: (h, w) → (h−10, w−10).
fn blur_valid(img: &[f64], h: usize, w: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let wv = w - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; h * wv];
    for y in 0..h {
        for x in 0..wv {
            let mut acc = 0.0;
            for (t, &kv) in k.iter().enumerate() {
                acc += kv * img[y * w + x + t];
            }
            rows[y * wv + x] = acc;
        }
    }
    let hv = h - SSIM_WINDOW + 1;
    let mut out = vec![0.0; hv * wv];
    for y in 0..hv {
        for x in 0..wv {
            let mut acc = 0.0;
            for (t, &kv) in k.iter().enumerate() {
                acc += kv * rows[(y + t) * wv + x];
            }
            out[y * wv + x] = acc;
        }
    }
    out
}

/// Single-scale SSIM over an 11×11 Gaussian window (σ = 1.5), peak 1,
/// averaged over valid window positions only.
pub fn ssim<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            context: "ssim".into(),
            expected: a.shape().to_vec(),
            got: b.shape().to_vec(),
        });
    }
    if a.shape().len() != 2 {
        return Err(Error::ShapeMismatch {
            context: "ssim expects a single-channel image".into(),
            expected: vec![0, 0],
            got: a.shape().to_vec(),
        });
    }
    let (h, w) = (a.shape()[0], a.shape()[1]);
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            h,
            w,
            win: SSIM_WINDOW,
        });
    }
    let x: Vec<f64> = a.data().iter().map(|v| v.as_f64()).collect();
    let y: Vec<f64> = b.data().iter().map(|v| v.as_f64()).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();

    let k = gaussian_window();
    let mu_x = blur_valid(&x, h, w, &k);
    let mu_y = blur_valid(&y, h, w, &k);
    let m_xx = blur_valid(&xx, h, w, &k);
    let m_yy = blur_valid(&yy, h, w, &k);
    let m_xy = blur_valid(&xy, h, w, &k);

    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = m_xx[i] - mx * mx;
        let vy = m_yy[i] - my * my;
        let cov = m_xy[i] - mx * my;
        let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
        let den = (mx * mx + my * my + c1) * (vx + vy + c2);
        total += num / den;
    }
    Ok(total / mu_x.len() as f64)
}

/// JSON encoding for dB values: JSON numbers cannot represent ±∞ or NaN, so
/// non-finite values round-trip as the strings "inf", "-inf", and "nan".
pub mod db_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Tag(String),
    }

    fn pack(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else if v.is_nan() {
            Repr::Tag("nan".into())
        } else if v > 0.0 {
            Repr::Tag("inf".into())
        } else {
            Repr::Tag("-inf".into())
        }
    }

    fn unpack<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Tag(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("unknown dB tag {other:?}"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        pack(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        unpack(Repr::deserialize(d)?)
    }

    pub mod vec {
        use super::{pack, unpack, Repr};
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|&x| pack(x)).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?
                .into_iter()
                .map(unpack)
                .collect()
        }
    }
}

/// Per-view PSNR grid plus its summary statistics. The gap contrasts the
/// mean over the central 3×3 views (clipped to the grid) against the mean
/// over the four corner views; it is NaN when those means are not finite.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ViewPsnrGrid {
    pub angular_res: (usize, usize),
    /// Row-major (M, N) PSNR values in dB.
    #[serde(with = "db_serde::vec")]
    pub grid: Vec<f64>,
    #[serde(with = "db_serde")]
    pub min: f64,
    #[serde(with = "db_serde")]
    pub max: f64,
    #[serde(with = "db_serde")]
    pub center_corner_gap: f64,
}

pub fn per_view_psnr_grid<T: Real>(
    pred: &LightField<T>,
    gt: &LightField<T>,
) -> Result<ViewPsnrGrid> {
    if pred.data().shape() != gt.data().shape() {
        return Err(Error::ShapeMismatch {
            context: "per-view psnr".into(),
            expected: gt.data().shape().to_vec(),
            got: pred.data().shape().to_vec(),
        });
    }
    let (m, n) = pred.angular_res();
    let mut grid = Vec::with_capacity(m * n);
    for mi in 0..m {
        for ni in 0..n {
            let p = pred.view(mi, ni)?;
            let g = gt.view(mi, ni)?;
            grid.push(psnr(&p, &g, 1.0)?);
        }
    }
    let min = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let center_corner_gap = center_corner_gap(&grid, m, n);
    Ok(ViewPsnrGrid {
        angular_res: (m, n),
        grid,
        min,
        max,
        center_corner_gap,
    })
}

fn center_corner_gap(grid: &[f64], m: usize, n: usize) -> f64 {
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
    let c_mean: f64 = center.iter().sum::<f64>() / center.len() as f64;
    let k_mean: f64 = corners.iter().sum::<f64>() / corners.len() as f64;
    c_mean - k_mean
}

/// Reference edge-strength cutoff defining the ground-truth edge set.
pub const EDGE_REFERENCE_THRESHOLD: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

/// Sobel gradient magnitude of an (h, w) image with replicated borders.
fn sobel_magnitude(img: &[f64], h: usize, w: usize) -> Vec<f64> {
    let at = |y: isize, x: isize| -> f64 {
        let yc = y.clamp(0, h as isize - 1) as usize;
        let xc = x.clamp(0, w as isize - 1) as usize;
        img[yc * w + xc]
    };
    let mut out = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = -at(y - 1, x - 1) + at(y - 1, x + 1) - 2.0 * at(y, x - 1)
                + 2.0 * at(y, x + 1)
                - at(y + 1, x - 1)
                + at(y + 1, x + 1);
            let gy = -at(y - 1, x - 1) - 2.0 * at(y - 1, x) - at(y - 1, x + 1)
                + at(y + 1, x - 1)
                + 2.0 * at(y + 1, x)
                + at(y + 1, x + 1);
            out[y as usize * w + x as usize] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}

/// Boolean edge mask over every horizontal and vertical EPI of the field:
/// Sobel gradient magnitude above `threshold`. The mask concatenates the
/// horizontal EPI stack followed by the vertical stack.
fn epi_edge_mask<T: Real>(lf: &LightField<T>, threshold: f64) -> Result<Vec<bool>> {
    let (m, n) = lf.angular_res();
    let (h, w) = lf.spatial_res();
    let mut mask = Vec::with_capacity(2 * m * n * h * w);
    for mi in 0..m {
        for y in 0..h {
            let epi = lf.epi(EpiOrientation::Horizontal, (y, mi))?;
            let img: Vec<f64> = epi.data.data().iter().map(|v| v.as_f64()).collect();
            let mag = sobel_magnitude(&img, n, w);
            mask.extend(mag.iter().map(|&g| g > threshold));
        }
    }
    for ni in 0..n {
        for x in 0..w {
            let epi = lf.epi(EpiOrientation::Vertical, (x, ni))?;
            let img: Vec<f64> = epi.data.data().iter().map(|v| v.as_f64()).collect();
            let mag = sobel_magnitude(&img, m, h);
            mask.extend(mag.iter().map(|&g| g > threshold));
        }
    }
    Ok(mask)
}

/// EPI edge precision/recall: the ground-truth edge set is thresholded at
/// [`EDGE_REFERENCE_THRESHOLD`] on the reference field's EPIs; each cutoff
/// in `thresholds` (descending) produces one point from the prediction's
/// EPIs. An empty predicted set scores precision 1.0 by convention. This is
/// a stand-in diagnostic for relative comparisons, not a published metric.
pub fn parallax_pr_curve<T: Real>(
    pred: &LightField<T>,
    gt: &LightField<T>,
    thresholds: &[f64],
) -> Result<Vec<PrPoint>> {
    if pred.data().shape() != gt.data().shape() {
        return Err(Error::ShapeMismatch {
            context: "pr curve".into(),
            expected: gt.data().shape().to_vec(),
            got: pred.data().shape().to_vec(),
        });
    }
    if thresholds.windows(2).any(|p| p[1] > p[0]) {
        return Err(Error::BadConfig {
            key: "thresholds".into(),
            reason: "must be non-increasing".into(),
        });
    }
    let gt_mask = epi_edge_mask(gt, EDGE_REFERENCE_THRESHOLD)?;
    let gt_count = gt_mask.iter().filter(|&&b| b).count();
    let mut points = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let pred_mask = epi_edge_mask(pred, t)?;
        let pred_count = pred_mask.iter().filter(|&&b| b).count();
        let hit = pred_mask
            .iter()
            .zip(&gt_mask)
            .filter(|&(&p, &g)| p && g)
            .count();
        let precision = if pred_count == 0 {
            1.0
        } else {
            hit as f64 / pred_count as f64
        };
        let recall = if gt_count == 0 {
            1.0
        } else {
            hit as f64 / gt_count as f64
        };
        points.push(PrPoint {
            threshold: t,
            recall,
            precision,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
        Tensor::from_fn(shape, |_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) % 10000) as f64 / 10000.0
        })
    }

    #[test]
    fn psnr_closed_form_and_sentinel() {
        let a = Tensor::<f64>::full(&[8, 8], 0.4);
        let b = Tensor::<f64>::full(&[8, 8], 0.5);
        // MSE = 0.01 → 10·log10(1/0.01) = 20 dB.
        let got = psnr(&a, &b, 1.0).unwrap();
        assert!((got - 20.0).abs() < 1e-9, "got {got}");
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_is_scale_invariant_with_matching_peak() {
        let a = pseudo(&[6, 6], 1);
        let b = pseudo(&[6, 6], 2);
        let a255 = a.map(|v| v * 255.0);
        let b255 = b.map(|v| v * 255.0);
        let lo = psnr(&a, &b, 1.0).unwrap();
        let hi = psnr(&a255, &b255, 255.0).unwrap();
        assert!((lo - hi).abs() < 1e-9);
    }

    #[test]
    fn psnr_decreases_as_mse_grows() {
        let a = Tensor::<f64>::full(&[4, 4], 0.5);
        let mut last = f64::INFINITY;
        for off in [0.01, 0.02, 0.05, 0.1] {
            let b = a.map(|v| v + off);
            let p = psnr(&a, &b, 1.0).unwrap();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn mean_finite_excludes_sentinels() {
        let (m, dropped) = mean_finite(&[30.0, f64::INFINITY, 34.0]);
        assert_eq!(m, 32.0);
        assert_eq!(dropped, 1);
        let (m, dropped) = mean_finite(&[f64::INFINITY; 2]);
        assert_eq!(m, f64::INFINITY);
        assert_eq!(dropped, 2);
    }

    #[test]
    fn ssim_identity_and_range() {
        let a = pseudo(&[16, 16], 3);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        // Inverted binary image: strongly anti-correlated, but bounded.
        let bin = Tensor::from_fn(&[16, 16], |i| (((i / 4) + (i % 4)) % 2) as f64);
        let inv = bin.map(|v| 1.0 - v);
        let s = ssim(&bin, &inv).unwrap();
        assert!((-1.0..=1.0).contains(&s), "ssim {s} out of range");
        assert!(s < 0.5, "anti-correlated images should score low, got {s}");
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = pseudo(&[10, 16], 4);
        assert!(matches!(
            ssim(&a, &a),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    /// Independent oracle: direct per-window evaluation with an explicitly
    /// materialized 2D Gaussian, no separable shortcut.
    #[test]
    fn ssim_matches_direct_window_oracle() {
        let a = pseudo(&[16, 16], 5);
        let b = pseudo(&[16, 16], 6).map(|v| 0.7 * v + 0.15);
        let k1 = gaussian_window();
        let mut k2 = [[0.0f64; 11]; 11];
        for y in 0..11 {
            for x in 0..11 {
                k2[y][x] = k1[y] * k1[x];
            }
        }
        let (c1, c2) = (1e-4, 9e-4);
        let mut total = 0.0;
        let mut count = 0;
        for wy in 0..6 {
            for wx in 0..6 {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for y in 0..11 {
                    for x in 0..11 {
                        let p = a.get(&[wy + y, wx + x]);
                        let q = b.get(&[wy + y, wx + x]);
                        mx += k2[y][x] * p;
                        my += k2[y][x] * q;
                        sxx += k2[y][x] * p * p;
                        syy += k2[y][x] * q * q;
                        sxy += k2[y][x] * p * q;
                    }
                }
                let (vx, vy, cov) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
                total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        let oracle = total / count as f64;
        let got = ssim(&a, &b).unwrap();
        assert!((got - oracle).abs() < 1e-6, "got {got} want {oracle}");
    }

    #[test]
    fn view_grid_localizes_degradation_and_gap_matches_brute_force() {
        let gt = LightField::new(pseudo(&[3, 3, 12, 12], 7)).unwrap();
        let mut pred = gt.clone();
        let degraded = gt.view(0, 0).unwrap().map(|v| (v * 0.5 + 0.25).min(1.0));
        pred.set_view(0, 0, &degraded).unwrap();
        // Make every view differ slightly so all PSNRs are finite.
        let jitter = pred.data().map(|v| (v + 0.003).min(1.0));
        let pred = LightField::new(jitter).unwrap();

        let report = per_view_psnr_grid(&pred, &gt).unwrap();
        assert_eq!(report.grid.len(), 9);
        let worst = report
            .grid
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(worst, 0, "degradation must localize to view (0,0)");

        // Brute-force gap: center 3×3 of a 3×3 grid is the whole grid.
        let center: f64 = report.grid.iter().sum::<f64>() / 9.0;
        let corners =
            (report.grid[0] + report.grid[2] + report.grid[6] + report.grid[8]) / 4.0;
        assert!((report.center_corner_gap - (center - corners)).abs() < 1e-12);
        assert!(report.min <= report.max);
    }

    #[test]
    fn identical_fields_give_all_infinite_grid() {
        let gt = LightField::new(pseudo(&[2, 2, 8, 8], 8)).unwrap();
        let report = per_view_psnr_grid(&gt, &gt).unwrap();
        assert!(report.grid.iter().all(|p| *p == f64::INFINITY));
    }

    #[test]
    fn pr_perfect_prediction_hits_top_right_corner() {
        // A field with real edges: vertical step in every view.
        let gt = LightField::new(Tensor::from_fn(&[3, 3, 8, 8], |i| {
            if i % 8 >= 4 {
                0.9
            } else {
                0.1
            }
        }))
        .unwrap();
        let pts =
            parallax_pr_curve(&gt, &gt, &[EDGE_REFERENCE_THRESHOLD]).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].recall, 1.0);
        assert_eq!(pts[0].precision, 1.0);
    }

    #[test]
    fn pr_constant_prediction_has_zero_recall() {
        let gt = LightField::new(Tensor::from_fn(&[2, 2, 8, 8], |i| {
            if i % 8 >= 4 {
                0.9
            } else {
                0.1
            }
        }))
        .unwrap();
        let flat = LightField::new(Tensor::full(&[2, 2, 8, 8], 0.5)).unwrap();
        let pts = parallax_pr_curve(&flat, &gt, &[0.5, 0.25, 0.1]).unwrap();
        for p in &pts {
            assert_eq!(p.recall, 0.0);
            assert_eq!(p.precision, 1.0, "empty prediction convention");
        }
    }

    #[test]
    fn pr_rejects_increasing_thresholds() {
        let gt = LightField::new(pseudo(&[2, 2, 8, 8], 9)).unwrap();
        assert!(parallax_pr_curve(&gt, &gt, &[0.1, 0.2]).is_err());
    }

    /// Exhaustive oracle on a hand-placed step edge: recompute both edge
    /// sets with independent loops and compare raw counts.
    #[test]
    fn pr_counts_match_exhaustive_enumeration() {
        let gt = LightField::new(Tensor::from_fn(&[3, 3, 8, 8], |i| {
            let x = i % 8;
            if x >= 4 {
                0.85
            } else {
                0.15
            }
        }))
        .unwrap();
        // Prediction: edge shifted by one column in every view.
        let pred = LightField::new(Tensor::from_fn(&[3, 3, 8, 8], |i| {
            let x = i % 8;
            if x >= 5 {
                0.85
            } else {
                0.15
            }
        }))
        .unwrap();
        let t = 0.3;
        let pts = parallax_pr_curve(&pred, &gt, &[t]).unwrap();

        // Oracle: enumerate every EPI of both fields, Sobel by hand.
        let collect = |lf: &LightField<f64>, cut: f64| -> Vec<bool> {
            let (m, n) = lf.angular_res();
            let (h, w) = lf.spatial_res();
            let mut out = Vec::new();
            let mut push_epi = |img: &[f64], rows: usize, cols: usize| {
                let at = |y: isize, x: isize| {
                    let yc = y.clamp(0, rows as isize - 1) as usize;
                    let xc = x.clamp(0, cols as isize - 1) as usize;
                    img[yc * cols + xc]
                };
                for y in 0..rows as isize {
                    for x in 0..cols as isize {
                        let gx = -at(y - 1, x - 1) + at(y - 1, x + 1)
                            - 2.0 * at(y, x - 1)
                            + 2.0 * at(y, x + 1)
                            - at(y + 1, x - 1)
                            + at(y + 1, x + 1);
                        let gy = -at(y - 1, x - 1) - 2.0 * at(y - 1, x) - at(y - 1, x + 1)
                            + at(y + 1, x - 1)
                            + 2.0 * at(y + 1, x)
                            + at(y + 1, x + 1);
                        out.push((gx * gx + gy * gy).sqrt() > cut);
                    }
                }
            };
            for mi in 0..m {
                for y in 0..h {
                    let mut img = vec![0.0; n * w];
                    for ni in 0..n {
                        for x in 0..w {
                            img[ni * w + x] = lf.data().get(&[mi, ni, y, x]);
                        }
                    }
                    push_epi(&img, n, w);
                }
            }
            for ni in 0..n {
                for x in 0..w {
                    let mut img = vec![0.0; m * h];
                    for mi in 0..m {
                        for y in 0..h {
                            img[mi * h + y] = lf.data().get(&[mi, ni, y, x]);
                        }
                    }
                    push_epi(&img, m, h);
                }
            }
            out
        };
        let gm = collect(&gt, EDGE_REFERENCE_THRESHOLD);
        let pm = collect(&pred, t);
        let gt_count = gm.iter().filter(|&&b| b).count();
        let pred_count = pm.iter().filter(|&&b| b).count();
        let hit = gm.iter().zip(&pm).filter(|&(&g, &p)| g && p).count();
        assert!(gt_count > 0 && pred_count > 0, "test needs real edges");
        let want_p = hit as f64 / pred_count as f64;
        let want_r = hit as f64 / gt_count as f64;
        assert_eq!(pts[0].precision, want_p);
        assert_eq!(pts[0].recall, want_r);
        // Shifted edge overlaps partially: strictly between 0 and 1.
        assert!(pts[0].precision > 0.0 && pts[0].precision < 1.0);
    }
}
