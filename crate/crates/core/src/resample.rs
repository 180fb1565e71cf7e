//! Bicubic resampling: Keys cubic kernel (a = -0.5), replicate borders,
//! align-centers coordinate mapping, antialiased when shrinking.
//!
//! Weights are computed and accumulated in f64 regardless of the tensor
//! scalar so results are identical across the f32 and f64 paths up to the
//! final rounding, which keeps golden values stable.

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Keys cubic interpolation kernel with a = -0.5.
pub fn cubic_kernel(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        (1.5 * t - 2.5) * t * t + 1.0
    } else if t < 2.0 {
        ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0
    } else {
        0.0
    }
}

/// Per-output-index taps for one axis: first source index plus normalized
/// weights. `scale` = out_len / in_len; the kernel is stretched by 1/scale
/// when shrinking so the pass low-pass filters before decimating.
fn axis_weights(in_len: usize, out_len: usize) -> Vec<(isize, Vec<f64>)> {
    assert!(in_len >= 1 && out_len >= 1);
    let scale = out_len as f64 / in_len as f64;
    // Kernel scale: identity when enlarging, stretched when shrinking.
    let ks = if scale < 1.0 { scale } else { 1.0 };
    let radius = 2.0 / ks;

    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let center = (i as f64 + 0.5) / scale - 0.5;
        let first = (center - radius).ceil() as isize;
        let last = (center + radius).floor() as isize;
        let mut weights: Vec<f64> = (first..=last)
            .map(|j| cubic_kernel((center - j as f64) * ks) * ks)
            .collect();
        let sum: f64 = weights.iter().sum();
        debug_assert!(sum > 0.0, "bicubic tap weights must not vanish");
        for w in &mut weights {
            *w /= sum;
        }
        out.push((first, weights));
    }
    out
}

#[inline]
fn clamp_index(j: isize, len: usize) -> usize {
    j.clamp(0, len as isize - 1) as usize
}

/// Resample the second (fastest-varying) axis of a (rows, cols) tensor.
fn resample_cols<T: Real>(img: &Tensor<T>, out_cols: usize) -> Tensor<T> {
    let (rows, cols) = (img.shape()[0], img.shape()[1]);
    let taps = axis_weights(cols, out_cols);
    let src = img.data();
    let mut data = Vec::with_capacity(rows * out_cols);
    for r in 0..rows {
        let row = &src[r * cols..(r + 1) * cols];
        for (first, weights) in &taps {
            let mut acc = 0.0f64;
            for (k, w) in weights.iter().enumerate() {
                acc += w * row[clamp_index(first + k as isize, cols)].as_f64();
            }
            data.push(T::from_f64(acc));
        }
    }
    Tensor::from_vec(&[rows, out_cols], data)
}

fn transpose<T: Real>(img: &Tensor<T>) -> Tensor<T> {
    let (rows, cols) = (img.shape()[0], img.shape()[1]);
    let src = img.data();
    let mut data = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            data[c * rows + r] = src[r * cols + c];
        }
    }
    Tensor::from_vec(&[cols, rows], data)
}

/// Separable bicubic resize of a 2D tensor to an arbitrary size. Not clamped.
fn resize_core<T: Real>(img: &Tensor<T>, out_h: usize, out_w: usize) -> Tensor<T> {
    assert_eq!(img.shape().len(), 2, "resize expects a 2D tensor");
    let cols_done = resample_cols(img, out_w);
    transpose(&resample_cols(&transpose(&cols_done), out_h))
}

/// Bicubic enlargement by an integer factor; output clamped to [0, 1].
pub fn bicubic_upsample<T: Real>(img: &Tensor<T>, alpha: usize) -> Result<Tensor<T>> {
    if alpha != 2 && alpha != 4 {
        return Err(Error::BadAlpha { alpha });
    }
    let (h, w) = (img.shape()[0], img.shape()[1]);
    Ok(resize_core(img, h * alpha, w * alpha).clamp01())
}

/// Antialiased bicubic reduction by an integer factor; output clamped to
/// [0, 1]. Dimensions must divide evenly.
pub fn bicubic_downsample<T: Real>(img: &Tensor<T>, alpha: usize) -> Result<Tensor<T>> {
    if alpha != 2 && alpha != 4 {
        return Err(Error::BadAlpha { alpha });
    }
    let (h, w) = (img.shape()[0], img.shape()[1]);
    if h % alpha != 0 || w % alpha != 0 {
        return Err(Error::NotDivisible { h, w, alpha });
    }
    Ok(resize_core(img, h / alpha, w / alpha).clamp01())
}

/// Sub-pixel translation: output[y, x] = input sampled at (y + dy, x + dx),
/// bicubic with replicate borders, clamped to [0, 1]. Separable.
pub fn translate_bicubic<T: Real>(img: &Tensor<T>, dy: f64, dx: f64) -> Tensor<T> {
    let (h, w) = (img.shape()[0], img.shape()[1]);
    let shifted_cols = shift_axis_cols(img, dx);
    let t = transpose(&shifted_cols);
    let shifted_rows = shift_axis_cols(&t, dy);
    let out = transpose(&shifted_rows);
    debug_assert_eq!(out.shape(), &[h, w]);
    out.clamp01()
}

/// Shift along the column axis by `delta` pixels (sampling at x + delta).
fn shift_axis_cols<T: Real>(img: &Tensor<T>, delta: f64) -> Tensor<T> {
    let (rows, cols) = (img.shape()[0], img.shape()[1]);
    // Integer shifts resolve to a single unit tap: handle exactly.
    let base = delta.floor();
    let frac = delta - base;
    let taps: Vec<(isize, f64)> = if frac == 0.0 {
        vec![(base as isize, 1.0)]
    } else {
        let raw: Vec<(isize, f64)> = (-1..=2)
            .map(|k| (base as isize + k, cubic_kernel(frac - k as f64)))
            .collect();
        let sum: f64 = raw.iter().map(|(_, w)| w).sum();
        raw.into_iter().map(|(j, w)| (j, w / sum)).collect()
    };

    let src = img.data();
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let row = &src[r * cols..(r + 1) * cols];
        for x in 0..cols {
            let mut acc = 0.0f64;
            for &(j, wgt) in &taps {
                acc += wgt * row[clamp_index(x as isize + j, cols)].as_f64();
            }
            data.push(T::from_f64(acc));
        }
    }
    Tensor::from_vec(&[rows, cols], data)
}

/// Bicubic sample of a single point with replicate borders; used by the
/// per-pixel-disparity warp where a uniform translation does not apply.
pub fn sample_bicubic<T: Real>(img: &Tensor<T>, y: f64, x: f64) -> f64 {
    let (h, w) = (img.shape()[0], img.shape()[1]);
    let (by, bx) = (y.floor(), x.floor());
    let (fy, fx) = (y - by, x - bx);
    let wy: Vec<f64> = (-1..=2).map(|k| cubic_kernel(fy - k as f64)).collect();
    let wx: Vec<f64> = (-1..=2).map(|k| cubic_kernel(fx - k as f64)).collect();
    let sy: f64 = wy.iter().sum();
    let sx: f64 = wx.iter().sum();
    let src = img.data();
    let mut acc = 0.0f64;
    for (ky, wyv) in wy.iter().enumerate() {
        let yy = clamp_index(by as isize + ky as isize - 1, h);
        let mut row_acc = 0.0f64;
        for (kx, wxv) in wx.iter().enumerate() {
            let xx = clamp_index(bx as isize + kx as isize - 1, w);
            row_acc += wxv * src[yy * w + xx].as_f64();
        }
        acc += wyv * row_acc;
    }
    acc / (sy * sx)
}
