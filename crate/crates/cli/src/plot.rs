//! Minimal self-contained PNG renderers for reports and EPI inspection.

use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};
use lfsr_core::metrics::{PrPoint, ViewPsnrGrid};
use lfsr_core::{EpiSlice, Error, Result};

/// Five-stop blue-to-yellow gradient, `t` in [0, 1].
fn colormap(t: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let mut rgb = [0u8; 3];
    for (c, v) in rgb.iter_mut().enumerate() {
        *v = (STOPS[i][c] + f * (STOPS[i + 1][c] - STOPS[i][c])).round() as u8;
    }
    rgb
}

fn save_rgb(img: &RgbImage, path: &Path, context: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(context.to_string(), e))?;
        }
    }
    img.save(path)
        .map_err(|e| Error::image(context.to_string(), e))
}

/// Renders a per-view score grid as a cell heatmap.
///
/// Finite cells are normalized over the finite range; infinite cells render
/// as the top gradient stop. Cells are 48x48 px with a 2 px dark gap.
pub fn heatmap_png(grid: &ViewPsnrGrid, path: &Path) -> Result<()> {
    let (m, n) = grid.angular_res;
    let cell = 48u32;
    let gap = 2u32;
    let width = n as u32 * (cell + gap) + gap;
    let height = m as u32 * (cell + gap) + gap;
    let mut img = RgbImage::from_pixel(width, height, Rgb([24, 24, 28]));

    let finite: Vec<f64> = grid.grid.iter().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;

    for v in 0..m {
        for u in 0..n {
            let value = grid.grid[v * n + u];
            let t = if !value.is_finite() {
                1.0
            } else if span <= 0.0 {
                0.5
            } else {
                (value - lo) / span
            };
            let rgb = Rgb(colormap(t));
            let x0 = gap + u as u32 * (cell + gap);
            let y0 = gap + v as u32 * (cell + gap);
            for dy in 0..cell {
                for dx in 0..cell {
                    img.put_pixel(x0 + dx, y0 + dy, rgb);
                }
            }
        }
    }
    save_rgb(&img, path, "write psnr heatmap")
}

fn draw_line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), color: Rgb<u8>) {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let steps = (dx.abs().max(dy.abs()).ceil() as usize).max(1);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let x = (a.0 + t * dx).round() as i64;
        let y = (a.1 + t * dy).round() as i64;
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

fn draw_marker(img: &mut RgbImage, center: (f64, f64), color: Rgb<u8>) {
    for dy in -2i64..=2 {
        for dx in -2i64..=2 {
            let x = center.0.round() as i64 + dx;
            let y = center.1.round() as i64 + dy;
            if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
                img.put_pixel(x as u32, y as u32, color);
            }
        }
    }
}

/// Renders precision (y) against recall (x) on a unit-square plot.
///
/// Points are drawn in the given order and joined by straight segments;
/// gridlines sit at multiples of 0.25.
pub fn pr_png(points: &[PrPoint], path: &Path) -> Result<()> {
    let size = 560u32;
    let margin = 48.0;
    let inner = size as f64 - 2.0 * margin;
    let mut img = RgbImage::from_pixel(size, size, Rgb([255, 255, 255]));

    let to_px = |recall: f64, precision: f64| {
        (
            margin + recall.clamp(0.0, 1.0) * inner,
            margin + (1.0 - precision.clamp(0.0, 1.0)) * inner,
        )
    };

    let grid_color = Rgb([224, 224, 224]);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        draw_line(&mut img, to_px(f, 0.0), to_px(f, 1.0), grid_color);
        draw_line(&mut img, to_px(0.0, f), to_px(1.0, f), grid_color);
    }
    let axis_color = Rgb([40, 40, 40]);
    draw_line(&mut img, to_px(0.0, 0.0), to_px(1.0, 0.0), axis_color);
    draw_line(&mut img, to_px(0.0, 0.0), to_px(0.0, 1.0), axis_color);

    let curve_color = Rgb([31, 119, 180]);
    for pair in points.windows(2) {
        draw_line(
            &mut img,
            to_px(pair[0].recall, pair[0].precision),
            to_px(pair[1].recall, pair[1].precision),
            curve_color,
        );
    }
    for p in points {
        draw_marker(&mut img, to_px(p.recall, p.precision), Rgb([214, 39, 40]));
    }
    save_rgb(&img, path, "write pr curve")
}

/// Writes one EPI as a grayscale strip, rows upscaled for visibility.
///
/// EPI rows index the angular axis and are only a handful of pixels tall,
/// so each row is repeated `row_scale` times (nearest neighbor).
pub fn epi_strip_png(epi: &EpiSlice<f32>, row_scale: usize, path: &Path) -> Result<()> {
    let shape = epi.data.shape();
    let (rows, cols) = (shape[0], shape[1]);
    let mut img = GrayImage::new(cols as u32, (rows * row_scale) as u32);
    for r in 0..rows {
        for c in 0..cols {
            let v = epi.data.get(&[r, c]).clamp(0.0, 1.0);
            let g = Luma([(v * 255.0).round() as u8]);
            for k in 0..row_scale {
                img.put_pixel(c as u32, (r * row_scale + k) as u32, g);
            }
        }
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io("write epi strip", e))?;
        }
    }
    img.save(path)
        .map_err(|e| Error::image("write epi strip", e))
}
