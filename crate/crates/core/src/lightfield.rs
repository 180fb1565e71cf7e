//! 4D light-field container, view/EPI slicing, synthetic generation by
//! disparity warping, and the spatial/angular reshape.
//!
//! Index convention, fixed once and used everywhere: `data[m, n, y, x]`
//! where m indexes angular rows (v), n angular columns (u), then spatial
//! row y and column x.

use crate::error::{Error, Result};
use crate::resample::{bicubic_downsample, sample_bicubic, translate_bicubic};
use crate::tensor::{Real, Tensor};

/// 4D light field: (M, N) angular by (H, W) spatial, values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct LightField<T = f32> {
    data: Tensor<T>,
}

impl<T: Real> LightField<T> {
    /// Wrap a (M, N, H, W) tensor, clamping values into [0, 1].
    pub fn new(data: Tensor<T>) -> Result<Self> {
        let shape = data.shape();
        if shape.len() != 4 || shape.iter().any(|&d| d == 0) {
            return Err(Error::ShapeMismatch {
                context: "LightField::new".into(),
                expected: vec![1, 1, 1, 1],
                got: shape.to_vec(),
            });
        }
        Ok(LightField {
            data: data.clamp01(),
        })
    }

    pub fn zeros(m: usize, n: usize, h: usize, w: usize) -> Self {
        LightField {
            data: Tensor::zeros(&[m, n, h, w]),
        }
    }

    pub fn angular_res(&self) -> (usize, usize) {
        (self.data.shape()[0], self.data.shape()[1])
    }

    pub fn spatial_res(&self) -> (usize, usize) {
        (self.data.shape()[2], self.data.shape()[3])
    }

    pub fn data(&self) -> &Tensor<T> {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.data
    }

    /// Owned copy of the (m, n) sub-aperture view as an (H, W) tensor.
    pub fn view(&self, m: usize, n: usize) -> Result<Tensor<T>> {
        let (mm, nn) = self.angular_res();
        let (h, w) = self.spatial_res();
        if m >= mm || n >= nn {
            return Err(Error::IndexOutOfRange {
                context: "extract_view".into(),
                index: vec![m, n],
                bounds: vec![mm, nn],
            });
        }
        let start = (m * nn + n) * h * w;
        Ok(Tensor::from_vec(
            &[h, w],
            self.data.data()[start..start + h * w].to_vec(),
        ))
    }

    /// Overwrite the (m, n) view.
    pub fn set_view(&mut self, m: usize, n: usize, view: &Tensor<T>) -> Result<()> {
        let (mm, nn) = self.angular_res();
        let (h, w) = self.spatial_res();
        if m >= mm || n >= nn {
            return Err(Error::IndexOutOfRange {
                context: "set_view".into(),
                index: vec![m, n],
                bounds: vec![mm, nn],
            });
        }
        if view.shape() != [h, w] {
            return Err(Error::ShapeMismatch {
                context: "set_view".into(),
                expected: vec![h, w],
                got: view.shape().to_vec(),
            });
        }
        let start = (m * nn + n) * h * w;
        self.data.data_mut()[start..start + h * w].copy_from_slice(view.data());
        Ok(())
    }

    /// Assemble a light field from per-view tensors in raster order.
    pub fn from_views(m: usize, n: usize, views: &[Tensor<T>]) -> Result<Self> {
        assert_eq!(views.len(), m * n, "from_views expects M*N views");
        let (h, w) = (views[0].shape()[0], views[0].shape()[1]);
        let mut lf = LightField::zeros(m, n, h, w);
        for (i, v) in views.iter().enumerate() {
            lf.set_view(i / n, i % n, v)?;
        }
        Ok(lf)
    }

    /// Bicubic-downsample every view by `alpha`.
    pub fn downsample(&self, alpha: usize) -> Result<Self> {
        let (m, n) = self.angular_res();
        let mut views = Vec::with_capacity(m * n);
        for mi in 0..m {
            for ni in 0..n {
                views.push(bicubic_downsample(&self.view(mi, ni)?, alpha)?);
            }
        }
        LightField::from_views(m, n, &views)
    }

    pub fn epi(&self, orientation: EpiOrientation, fixed: (usize, usize)) -> Result<EpiSlice<T>> {
        epi_slice(self, orientation, fixed)
    }

    pub fn cast<U: Real>(&self) -> LightField<U> {
        LightField {
            data: self.data.cast(),
        }
    }
}

/// Orientation of an epipolar-plane slice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpiOrientation {
    /// Fix (y, v): rows are angular columns n, columns are spatial x.
    Horizontal,
    /// Fix (x, u): rows are angular rows m, columns are spatial y.
    Vertical,
}

/// 2D epipolar-plane image cut from a light field.
#[derive(Clone, Debug, PartialEq)]
pub struct EpiSlice<T = f32> {
    pub data: Tensor<T>,
    pub orientation: EpiOrientation,
    /// (y, v) for horizontal slices, (x, u) for vertical ones.
    pub fixed_coords: (usize, usize),
}

/// Cut an EPI from the field. v indexes angular rows m, u angular columns n.
///
/// Horizontal, fixing (y0, v0): data[n, x] = lf[v0, n, y0, x], shape (N, W).
/// Vertical, fixing (x0, u0): data[m, y] = lf[m, u0, y, x0], shape (M, H).
pub fn epi_slice<T: Real>(
    lf: &LightField<T>,
    orientation: EpiOrientation,
    fixed: (usize, usize),
) -> Result<EpiSlice<T>> {
    let (m, n) = lf.angular_res();
    let (h, w) = lf.spatial_res();
    let src = lf.data();
    let data = match orientation {
        EpiOrientation::Horizontal => {
            let (y0, v0) = fixed;
            if y0 >= h || v0 >= m {
                return Err(Error::IndexOutOfRange {
                    context: "epi_slice horizontal".into(),
                    index: vec![y0, v0],
                    bounds: vec![h, m],
                });
            }
            Tensor::from_fn(&[n, w], |i| {
                let (ni, x) = (i / w, i % w);
                src.get(&[v0, ni, y0, x])
            })
        }
        EpiOrientation::Vertical => {
            let (x0, u0) = fixed;
            if x0 >= w || u0 >= n {
                return Err(Error::IndexOutOfRange {
                    context: "epi_slice vertical".into(),
                    index: vec![x0, u0],
                    bounds: vec![w, n],
                });
            }
            Tensor::from_fn(&[m, h], |i| {
                let (mi, y) = (i / h, i % h);
                src.get(&[mi, u0, y, x0])
            })
        }
    };
    Ok(EpiSlice {
        data,
        orientation,
        fixed_coords: fixed,
    })
}

/// Disparity model for synthetic generation.
#[derive(Clone, Debug)]
pub enum Disparity<T = f32> {
    Constant(f64),
    /// Per-pixel map with the texture's (H, W) shape, in px per angular step.
    Map(Tensor<T>),
}

impl<T: Real> Disparity<T> {
    fn max_abs(&self) -> f64 {
        match self {
            Disparity::Constant(d) => d.abs(),
            Disparity::Map(m) => m
                .data()
                .iter()
                .map(|v| v.as_f64().abs())
                .fold(0.0, f64::max),
        }
    }
}

/// Recipe for a synthetic light field: a texture warped per view.
#[derive(Clone, Debug)]
pub struct SynthSpec<T = f32> {
    pub texture: Tensor<T>,
    pub disparity: Disparity<T>,
    pub angular_res: (usize, usize),
}

/// Render a light field by warping a flat texture.
///
/// The view at angular position (m, n) samples the texture at
/// (y + d·(m_c − m), x + d·(n_c − n)) with m_c = (M−1)/2, n_c = (N−1)/2:
/// content shifts by d pixels per angular step away from the center view.
/// All views are cropped to the region where every sample (including the
/// cubic kernel's 2-pixel support) stays inside the texture, so no
/// extrapolated pixels remain.
pub fn synth_lightfield<T: Real>(spec: &SynthSpec<T>) -> Result<LightField<T>> {
    let (m, n) = spec.angular_res;
    assert!(m >= 1 && n >= 1, "angular resolution must be positive");
    let (h, w) = (spec.texture.shape()[0], spec.texture.shape()[1]);
    let dmax = spec.disparity.max_abs();

    let lhs = dmax * m.max(n) as f64;
    let rhs = h.min(w) as f64 / 4.0;
    if lhs >= rhs {
        return Err(Error::DisparityTooLarge { lhs, rhs });
    }

    let m_c = (m as f64 - 1.0) / 2.0;
    let n_c = (n as f64 - 1.0) / 2.0;
    // Margin: worst-case warp offset plus the kernel's 2-px reach.
    let margin_y = (dmax * m_c).ceil() as usize + 2;
    let margin_x = (dmax * n_c).ceil() as usize + 2;
    assert!(h > 2 * margin_y && w > 2 * margin_x, "texture too small after crop");
    let (ch, cw) = (h - 2 * margin_y, w - 2 * margin_x);

    let mut views = Vec::with_capacity(m * n);
    for mi in 0..m {
        for ni in 0..n {
            let dy_steps = m_c - mi as f64;
            let dx_steps = n_c - ni as f64;
            let full = match &spec.disparity {
                Disparity::Constant(d) => {
                    translate_bicubic(&spec.texture, d * dy_steps, d * dx_steps)
                }
                Disparity::Map(dm) => Tensor::from_fn(&[h, w], |i| {
                    let (y, x) = (i / w, i % w);
                    let d = dm.get(&[y, x]).as_f64();
                    let v = sample_bicubic(
                        &spec.texture,
                        y as f64 + d * dy_steps,
                        x as f64 + d * dx_steps,
                    );
                    T::from_f64(v.clamp(0.0, 1.0))
                }),
            };
            let cropped = Tensor::from_fn(&[ch, cw], |i| {
                let (y, x) = (i / cw, i % cw);
                full.get(&[y + margin_y, x + margin_x])
            });
            views.push(cropped);
        }
    }
    LightField::from_views(m, n, &views)
}

/// Reshape a spatial view stack (S_h, S_w, c, M·N) into angular patch
/// stacks (M, N, c, S_h·S_w): F_a[m, n, k, y·S_w + x] = F_s[y, x, k, m·N + n].
pub fn reshape_spatial_to_angular<T: Real>(
    f_s: &Tensor<T>,
    m: usize,
    n: usize,
) -> Result<Tensor<T>> {
    let shape = f_s.shape();
    if shape.len() != 4 || shape[3] != m * n {
        return Err(Error::ShapeMismatch {
            context: "reshape_spatial_to_angular".into(),
            expected: vec![shape[0], shape[1], shape.get(2).copied().unwrap_or(0), m * n],
            got: shape.to_vec(),
        });
    }
    let (s_h, s_w, c) = (shape[0], shape[1], shape[2]);
    let mut out = Tensor::zeros(&[m, n, c, s_h * s_w]);
    for y in 0..s_h {
        for x in 0..s_w {
            for k in 0..c {
                for mi in 0..m {
                    for ni in 0..n {
                        let v = f_s.get(&[y, x, k, mi * n + ni]);
                        out.set(&[mi, ni, k, y * s_w + x], v);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Exact inverse of [`reshape_spatial_to_angular`].
pub fn reshape_angular_to_spatial<T: Real>(
    f_a: &Tensor<T>,
    s_h: usize,
    s_w: usize,
) -> Result<Tensor<T>> {
    let shape = f_a.shape();
    if shape.len() != 4 || shape[3] != s_h * s_w {
        return Err(Error::ShapeMismatch {
            context: "reshape_angular_to_spatial".into(),
            expected: vec![shape[0], shape[1], shape.get(2).copied().unwrap_or(0), s_h * s_w],
            got: shape.to_vec(),
        });
    }
    let (m, n, c) = (shape[0], shape[1], shape[2]);
    let mut out = Tensor::zeros(&[s_h, s_w, c, m * n]);
    for mi in 0..m {
        for ni in 0..n {
            for k in 0..c {
                for y in 0..s_h {
                    for x in 0..s_w {
                        let v = f_a.get(&[mi, ni, k, y * s_w + x]);
                        out.set(&[y, x, k, mi * n + ni], v);
                    }
                }
            }
        }
    }
    Ok(out)
}
