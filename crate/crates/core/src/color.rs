//! BT.601 full-range luma/chroma conversion.
//!
//! The networks see only the Y channel; Cb/Cr are carried through and
//! upsampled separately when color output is requested.

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;
const CB_SCALE: f64 = 1.772; // 2 * (1 - KB)
const CR_SCALE: f64 = 1.402; // 2 * (1 - KR)

/// Luma from an interleaved (H, W, 3) tensor in [0, 1].
pub fn rgb_to_y<T: Real>(rgb: &Tensor<T>) -> Result<Tensor<T>> {
    let shape = rgb.shape();
    if shape.len() != 3 || shape[2] != 3 {
        return Err(Error::ShapeMismatch {
            context: "rgb_to_y".into(),
            expected: vec![0, 0, 3],
            got: shape.to_vec(),
        });
    }
    let (h, w) = (shape[0], shape[1]);
    let src = rgb.data();
    let data = (0..h * w)
        .map(|i| {
            let r = src[3 * i].as_f64();
            let g = src[3 * i + 1].as_f64();
            let b = src[3 * i + 2].as_f64();
            T::from_f64(KR * r + KG * g + KB * b)
        })
        .collect();
    Ok(Tensor::from_vec(&[h, w], data))
}

/// Split (H, W, 3) RGB into full-range (Y, Cb, Cr) planes, each (H, W).
/// Cb/Cr are offset by +0.5 so all planes live in [0, 1].
pub fn ycbcr_split<T: Real>(rgb: &Tensor<T>) -> Result<[Tensor<T>; 3]> {
    let y = rgb_to_y(rgb)?;
    let shape = rgb.shape();
    let (h, w) = (shape[0], shape[1]);
    let src = rgb.data();
    let mut cb = Vec::with_capacity(h * w);
    let mut cr = Vec::with_capacity(h * w);
    for i in 0..h * w {
        let r = src[3 * i].as_f64();
        let b = src[3 * i + 2].as_f64();
        let yv = y.data()[i].as_f64();
        cb.push(T::from_f64((b - yv) / CB_SCALE + 0.5));
        cr.push(T::from_f64((r - yv) / CR_SCALE + 0.5));
    }
    Ok([
        y,
        Tensor::from_vec(&[h, w], cb),
        Tensor::from_vec(&[h, w], cr),
    ])
}

/// Inverse of [`ycbcr_split`]; output clamped to [0, 1].
pub fn ycbcr_merge<T: Real>(y: &Tensor<T>, cb: &Tensor<T>, cr: &Tensor<T>) -> Result<Tensor<T>> {
    if y.shape() != cb.shape() || y.shape() != cr.shape() {
        return Err(Error::ShapeMismatch {
            context: "ycbcr_merge".into(),
            expected: y.shape().to_vec(),
            got: cb.shape().to_vec(),
        });
    }
    let (h, w) = (y.shape()[0], y.shape()[1]);
    let mut data = Vec::with_capacity(h * w * 3);
    for i in 0..h * w {
        let yv = y.data()[i].as_f64();
        let cbv = cb.data()[i].as_f64() - 0.5;
        let crv = cr.data()[i].as_f64() - 0.5;
        let r = yv + CR_SCALE * crv;
        let b = yv + CB_SCALE * cbv;
        let g = (yv - KR * r - KB * b) / KG;
        data.push(T::from_f64(r.clamp(0.0, 1.0)));
        data.push(T::from_f64(g.clamp(0.0, 1.0)));
        data.push(T::from_f64(b.clamp(0.0, 1.0)));
    }
    Ok(Tensor::from_vec(&[h, w, 3], data))
}
