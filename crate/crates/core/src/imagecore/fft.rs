use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

use super::Image;
use crate::error::{Error, Result};
use crate::par;

/// Complex 2D spectrum, row-major, DC at index `(0, 0)`.
///
/// Forward transforms are unnormalized; the inverse carries the `1/(w*h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub width: usize,
    pub height: usize,
    pub data: Vec<Complex64>,
}

impl Spectrum {
    #[inline]
    pub fn get(&self, kx: usize, ky: usize) -> Complex64 {
        self.data[ky * self.width + kx]
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm()).collect()
    }
}

/// Signed frequency of bin `k` on an `n`-point axis, in cycles per sample,
/// wrapped to `(-1/2, 1/2]`.
#[inline]
pub fn signed_frequency(k: usize, n: usize) -> f64 {
    if 2 * k <= n {
        k as f64 / n as f64
    } else {
        k as f64 / n as f64 - 1.0
    }
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft(n, direction)
}

fn transpose(width: usize, height: usize, data: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for y in 0..height {
        for x in 0..width {
            out[x * height + y] = data[y * width + x];
        }
    }
    out
}

fn rows_per_chunk(width: usize) -> usize {
    (4096 / width.max(1)).max(1)
}

fn transform_rows(width: usize, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
    par::for_each_chunk_mut(data, width * rows_per_chunk(width), |_, chunk| {
        fft.process(chunk);
    });
}

fn transform_in_place(width: usize, height: usize, data: &mut Vec<Complex64>, dir: FftDirection) {
    transform_rows(width, data, &plan(width, dir));
    let mut t = transpose(width, height, data);
    transform_rows(height, &mut t, &plan(height, dir));
    *data = transpose(height, width, &t);
}

/// Unnormalized forward 2D DFT of a complex grid.
pub fn fft2_complex(width: usize, height: usize, data: &[Complex64]) -> Result<Spectrum> {
    if width == 0 || height == 0 || data.len() != width * height {
        return Err(Error::input(format!(
            "fft2 needs a non-empty {width}x{height} grid, got {} samples",
            data.len()
        )));
    }
    let mut buf = data.to_vec();
    transform_in_place(width, height, &mut buf, FftDirection::Forward);
    Ok(Spectrum {
        width,
        height,
        data: buf,
    })
}

/// Inverse 2D DFT (scaled by `1/(w*h)`), keeping the complex result.
pub fn ifft2_complex(spec: &Spectrum) -> Result<Vec<Complex64>> {
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 || spec.data.len() != w * h {
        return Err(Error::input("ifft2 needs a non-empty spectrum"));
    }
    let mut buf = spec.data.clone();
    transform_in_place(w, h, &mut buf, FftDirection::Inverse);
    let scale = 1.0 / (w * h) as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    Ok(buf)
}

pub fn fft2(img: &Image) -> Result<Spectrum> {
    let data: Vec<Complex64> = img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_complex(img.width(), img.height(), &data)
}

/// Inverse transform returning the real part; the imaginary residue of a
/// Hermitian spectrum is discarded.
pub fn ifft2(spec: &Spectrum) -> Result<Image> {
    let buf = ifft2_complex(spec)?;
    Image::new(
        spec.width,
        spec.height,
        buf.into_iter().map(|c| c.re).collect(),
    )
}

/// How [`fourier_filter`] treats the image border.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FourierBoundary {
    /// The grid is taken as one period.
    Periodic,
    /// The grid is mirrored to twice its size, filtered, then cropped.
    Symmetric,
}

/// Multiplies the spectrum of `img` by a real, even multiplier `m(xi_x, xi_y)`
/// given in cycles per pixel, and returns the real filtered image.
pub fn fourier_filter<F>(img: &Image, boundary: FourierBoundary, multiplier: F) -> Result<Image>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let work = match boundary {
        FourierBoundary::Periodic => img.clone(),
        FourierBoundary::Symmetric => img.mirror_extend(),
    };
    let (w, h) = (work.width(), work.height());
    let mut spec = fft2(&work)?;
    let fx: Vec<f64> = (0..w).map(|k| signed_frequency(k, w)).collect();
    par::for_each_chunk_mut(&mut spec.data, w, |ky, row| {
        let fy = signed_frequency(ky, h);
        for (kx, c) in row.iter_mut().enumerate() {
            *c *= multiplier(fx[kx], fy);
        }
    });
    let out = ifft2(&spec)?;
    match boundary {
        FourierBoundary::Periodic => Ok(out),
        FourierBoundary::Symmetric => out.crop(img.width(), img.height()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(w, h, |_, _| rng.random_range(0.0..255.0)).unwrap()
    }

    #[test]
    fn constant_image_has_only_dc() {
        let img = Image::filled(6, 4, 3.5).unwrap();
        let spec = fft2(&img).unwrap();
        assert!((spec.get(0, 0).re - 3.5 * 24.0).abs() < 1e-10);
        for (i, c) in spec.data.iter().enumerate().skip(1) {
            assert!(c.norm() < 1e-10, "bin {i} = {c}");
        }
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut data = vec![0.0; 35];
        data[0] = 1.0;
        let spec = fft2(&Image::new(7, 5, data).unwrap()).unwrap();
        for c in &spec.data {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_random_16x16() {
        let img = random_image(16, 16, 7);
        let back = ifft2(&fft2(&img).unwrap()).unwrap();
        let err = img
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "err {err}");
    }

    #[test]
    fn real_input_spectrum_is_hermitian() {
        let img = random_image(9, 6, 3);
        let s = fft2(&img).unwrap();
        for ky in 0..6 {
            for kx in 0..9 {
                let a = s.get(kx, ky);
                let b = s.get((9 - kx) % 9, (6 - ky) % 6).conj();
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(fft2_complex(0, 3, &[]).is_err());
    }

    #[test]
    fn signed_frequency_wraps() {
        assert_eq!(signed_frequency(0, 8), 0.0);
        assert_eq!(signed_frequency(4, 8), 0.5);
        assert_eq!(signed_frequency(5, 8), -0.375);
        assert_eq!(signed_frequency(2, 5), 0.4);
        assert_eq!(signed_frequency(3, 5), -0.4);
    }

    #[test]
    fn identity_multiplier_is_identity_both_boundaries() {
        let img = random_image(10, 7, 11);
        for b in [FourierBoundary::Periodic, FourierBoundary::Symmetric] {
            let out = fourier_filter(&img, b, |_, _| 1.0).unwrap();
            for (a, c) in img.data().iter().zip(out.data()) {
                assert!((a - c).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linearity() {
        let a = random_image(8, 8, 1);
        let b = random_image(8, 8, 2);
        let mix = a.zip_map(&b, |x, y| 2.0 * x - 0.5 * y).unwrap();
        let (sa, sb, sm) = (fft2(&a).unwrap(), fft2(&b).unwrap(), fft2(&mix).unwrap());
        for i in 0..64 {
            let expect = sa.data[i] * 2.0 - sb.data[i] * 0.5;
            assert!((sm.data[i] - expect).norm() < 1e-9);
        }
    }
}
