//! Procedural texture generation for synthetic scenes.

use lfsr_core::{Real, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Renders a deterministic grayscale texture in [0.05, 0.95].
///
/// The texture mixes band-limited sinusoidal plane waves with a few soft
/// step edges so that downstream edge-based metrics have structure to find.
/// All randomness comes from `rng`; equal seeds give bit-identical output.
pub fn procedural_texture<T: Real>(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let n_waves = 6;
    let n_edges = 3;

    struct Wave {
        kx: f64,
        ky: f64,
        phase: f64,
        amp: f64,
    }
    struct EdgeLine {
        nx: f64,
        ny: f64,
        offset: f64,
        amp: f64,
    }

    let min_dim = h.min(w).max(8) as f64;
    let waves: Vec<Wave> = (0..n_waves)
        .map(|_| {
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            // Wavelengths between ~6 px and ~min_dim/2 px keep the texture
            // band-limited enough for sub-pixel shears to stay well sampled.
            let wavelength: f64 = rng.gen_range(6.0..(min_dim / 2.0).max(7.0));
            let k = 2.0 * std::f64::consts::PI / wavelength;
            Wave {
                kx: k * theta.cos(),
                ky: k * theta.sin(),
                phase: rng.gen_range(0.0..2.0 * std::f64::consts::PI),
                amp: rng.gen_range(0.05..0.12),
            }
        })
        .collect();
    let edges: Vec<EdgeLine> = (0..n_edges)
        .map(|_| {
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            EdgeLine {
                nx: theta.cos(),
                ny: theta.sin(),
                offset: rng.gen_range(0.25..0.75),
                amp: rng.gen_range(0.10..0.18),
            }
        })
        .collect();

    let mut out = Tensor::<T>::zeros(&[h, w]);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut raw = vec![0.0f64; h * w];
    for y in 0..h {
        for x in 0..w {
            let (xf, yf) = (x as f64, y as f64);
            let mut v = 0.5;
            for wv in &waves {
                v += wv.amp * (wv.kx * xf + wv.ky * yf + wv.phase).sin();
            }
            for e in &edges {
                let proj = (e.nx * xf / w as f64) + (e.ny * yf / h as f64);
                v += e.amp * ((proj - e.offset) * 40.0).tanh();
            }
            raw[y * w + x] = v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let span = (hi - lo).max(1e-12);
    for (dst, &v) in out.data_mut().iter_mut().zip(raw.iter()) {
        *dst = T::from_f64(0.05 + 0.90 * (v - lo) / span);
    }
    out
}
