//! Scene-directory and golden-array I/O.
//!
//! A scene is a directory of `view_{m:02}_{n:02}.png` files plus a
//! `meta.json` carrying the shape. Views may be 8- or 16-bit, grayscale or
//! RGB; ingestion normalizes to [0, 1] and keeps only luma for the network
//! path, carrying chroma planes separately when present.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::color::{ycbcr_merge, ycbcr_split};
use crate::error::{Error, Result};
use crate::lightfield::LightField;
use crate::resample::bicubic_upsample;
use crate::tensor::Tensor;

/// Sidecar metadata for a scene directory.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SceneMeta {
    pub m: usize,
    pub n: usize,
    pub h: usize,
    pub w: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disparity: Option<f64>,
    pub name: String,
}

/// Per-view chroma planes retained from a color scene.
#[derive(Clone, Debug)]
pub struct ChromaPlanes {
    /// Raster-ordered (M·N) Cb planes at the scene's spatial resolution.
    pub cb: Vec<Tensor<f32>>,
    pub cr: Vec<Tensor<f32>>,
}

/// A scene as loaded from disk: luma light field plus optional chroma.
#[derive(Clone, Debug)]
pub struct LoadedScene {
    pub lf: LightField<f32>,
    pub chroma: Option<ChromaPlanes>,
    pub meta: SceneMeta,
}

pub fn view_file_name(m: usize, n: usize) -> String {
    format!("view_{m:02}_{n:02}.png")
}

fn decode_view(path: &Path) -> Result<DecodedView> {
    let img = image::open(path).map_err(|e| Error::image(path.display().to_string(), e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let to01_u8 = |v: u8| v as f32 / 255.0;
    let to01_u16 = |v: u16| v as f32 / 65535.0;
    Ok(match img {
        DynamicImage::ImageLuma8(buf) => DecodedView {
            gray: Tensor::from_vec(&[h, w], buf.pixels().map(|p| to01_u8(p.0[0])).collect()),
            rgb: None,
        },
        DynamicImage::ImageLuma16(buf) => DecodedView {
            gray: Tensor::from_vec(&[h, w], buf.pixels().map(|p| to01_u16(p.0[0])).collect()),
            rgb: None,
        },
        other => {
            // Any color variant: normalize through an RGB view, drop alpha.
            let rgbf = other.to_rgb32f();
            let data: Vec<f32> = rgbf.pixels().flat_map(|p| p.0).collect();
            let rgb = Tensor::from_vec(&[h, w, 3], data).clamp01();
            let [y, cb, cr] = ycbcr_split(&rgb)?;
            DecodedView {
                gray: y,
                rgb: Some((cb, cr)),
            }
        }
    })
}

struct DecodedView {
    gray: Tensor<f32>,
    rgb: Option<(Tensor<f32>, Tensor<f32>)>,
}

/// Load a scene directory into a luma light field (+ chroma when color).
pub fn load_scene(dir: &Path) -> Result<LoadedScene> {
    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path)
        .map_err(|e| Error::io(meta_path.display().to_string(), e))?;
    let meta: SceneMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::json(meta_path.display().to_string(), e))?;

    let mut views = Vec::with_capacity(meta.m * meta.n);
    let mut cb_planes = Vec::new();
    let mut cr_planes = Vec::new();
    let mut any_color = false;

    for m in 0..meta.m {
        for n in 0..meta.n {
            let path = dir.join(view_file_name(m, n));
            if !path.exists() {
                return Err(Error::IncompleteLightField { m, n });
            }
            let decoded = decode_view(&path)?;
            let got = decoded.gray.shape().to_vec();
            if got != [meta.h, meta.w] {
                return Err(Error::ViewDimensionMismatch {
                    file: path,
                    expected_w: meta.w,
                    expected_h: meta.h,
                    got_w: got[1],
                    got_h: got[0],
                });
            }
            if let Some((cb, cr)) = decoded.rgb {
                any_color = true;
                cb_planes.push(cb);
                cr_planes.push(cr);
            } else {
                cb_planes.push(Tensor::full(&[meta.h, meta.w], 0.5));
                cr_planes.push(Tensor::full(&[meta.h, meta.w], 0.5));
            }
            views.push(decoded.gray);
        }
    }

    let lf = LightField::from_views(meta.m, meta.n, &views)?;
    let chroma = if any_color {
        Some(ChromaPlanes {
            cb: cb_planes,
            cr: cr_planes,
        })
    } else {
        None
    };
    Ok(LoadedScene { lf, chroma, meta })
}

/// Write a luma light field as 16-bit grayscale PNGs plus meta.json.
///
/// 16-bit output keeps quantization error (~8e-6) far below the tolerances
/// used by round-trip tests and synthetic training data.
pub fn save_scene_gray(dir: &Path, lf: &LightField<f32>, meta: &SceneMeta) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let (m, n) = lf.angular_res();
    let (h, w) = lf.spatial_res();
    for mi in 0..m {
        for ni in 0..n {
            let view = lf.view(mi, ni)?;
            let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(
                w as u32,
                h as u32,
                |x, y| {
                    let v = view.get(&[y as usize, x as usize]).clamp(0.0, 1.0);
                    Luma([(v * 65535.0).round() as u16])
                },
            );
            let path = dir.join(view_file_name(mi, ni));
            buf.save(&path)
                .map_err(|e| Error::image(path.display().to_string(), e))?;
        }
    }
    write_meta(dir, meta)
}

/// Write a color scene: per-view luma plus chroma planes merged to RGB
/// (8-bit). Chroma planes must match the luma resolution; upscale them
/// with [`upsample_chroma`] first when the luma was super-resolved.
pub fn save_scene_color(
    dir: &Path,
    lf: &LightField<f32>,
    chroma: &ChromaPlanes,
    meta: &SceneMeta,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let (m, n) = lf.angular_res();
    let (h, w) = lf.spatial_res();
    for mi in 0..m {
        for ni in 0..n {
            let idx = mi * n + ni;
            let y = lf.view(mi, ni)?;
            let rgb = ycbcr_merge(&y, &chroma.cb[idx], &chroma.cr[idx])?;
            let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
                ImageBuffer::from_fn(w as u32, h as u32, |x, yy| {
                    let px = |c: usize| {
                        (rgb.get(&[yy as usize, x as usize, c]).clamp(0.0, 1.0) * 255.0).round()
                            as u8
                    };
                    Rgb([px(0), px(1), px(2)])
                });
            let path = dir.join(view_file_name(mi, ni));
            buf.save(&path)
                .map_err(|e| Error::image(path.display().to_string(), e))?;
        }
    }
    write_meta(dir, meta)
}

fn write_meta(dir: &Path, meta: &SceneMeta) -> Result<()> {
    let path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(meta)
        .map_err(|e| Error::json(path.display().to_string(), e))?;
    fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Bicubic-upsample chroma planes by `alpha` (used at the CLI boundary
/// when emitting color output for a super-resolved luma field).
pub fn upsample_chroma(chroma: &ChromaPlanes, alpha: usize) -> Result<ChromaPlanes> {
    let up = |planes: &[Tensor<f32>]| -> Result<Vec<Tensor<f32>>> {
        planes.iter().map(|p| bicubic_upsample(p, alpha)).collect()
    };
    Ok(ChromaPlanes {
        cb: up(&chroma.cb)?,
        cr: up(&chroma.cr)?,
    })
}

/// Serialize a tensor as a one-line JSON shape header followed by
/// little-endian f32 payload.
pub fn write_golden(path: &Path, tensor: &Tensor<f32>) -> Result<()> {
    let mut file =
        fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let header = serde_json::json!({ "shape": tensor.shape() });
    let mut text = header.to_string();
    text.push('\n');
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut bytes = Vec::with_capacity(tensor.numel() * 4);
    for &v in tensor.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&bytes)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Inverse of [`write_golden`].
pub fn read_golden(path: &Path) -> Result<Tensor<f32>> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Other(format!("{}: missing header line", path.display())))?;
    #[derive(Deserialize)]
    struct Header {
        shape: Vec<usize>,
    }
    let header: Header = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::json(path.display().to_string(), e))?;
    let payload = &bytes[newline + 1..];
    let expected: usize = header.shape.iter().product::<usize>() * 4;
    if payload.len() != expected {
        return Err(Error::ContainerTruncated {
            needed: expected as u64,
            actual: payload.len() as u64,
        });
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Tensor::from_vec(&header.shape, data))
}

/// List scene subdirectories of a root (any directory holding meta.json),
/// sorted by name for deterministic iteration order.
pub fn list_scenes(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if root.join("meta.json").exists() {
        out.push(root.to_path_buf());
        return Ok(out);
    }
    let entries = fs::read_dir(root).map_err(|e| Error::io(root.display().to_string(), e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root.display().to_string(), e))?;
        let path = entry.path();
        if path.is_dir() && path.join("meta.json").exists() {
            out.push(path);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::Other(format!(
            "{}: no scene directories found (need meta.json)",
            root.display()
        )));
    }
    Ok(out)
}
