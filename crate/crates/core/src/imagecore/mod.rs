//! Shared numerical substrate: pixel grids, the 2D Fourier transform, Gaussian
//! kernels, gradients, symmetric padding and percentile statistics.

mod fft;
mod filter;
mod stats;

pub use fft::{
    fft2, fft2_complex, fourier_filter, ifft2, ifft2_complex, signed_frequency, FourierBoundary,
    Spectrum,
};
pub use filter::{convolve, gaussian_kernel, gradient_magnitude, Boundary, Kernel};
pub use stats::percentile_value;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real-valued 2D grid stored row-major. Gray levels are nominally in `[0, 255]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::input(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image without validation. Callers guarantee the invariants.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, 0.0)
    }

    /// Evaluates `f(x, y)` at every pixel, `x` being the column index.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn ensure_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::input(format!(
                "{what}: shape {}x{} does not match {}x{}",
                other.width, other.height, self.width, self.height
            )))
        }
    }

    /// Pointwise map into a new image of the same shape.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image::from_raw(
            self.width,
            self.height,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Pointwise combination of two same-shaped images.
    pub fn zip_map(&self, other: &Image, f: impl Fn(f64, f64) -> f64) -> Result<Image> {
        self.ensure_same_shape(other, "zip_map")?;
        Ok(Image::from_raw(
            self.width,
            self.height,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    /// Sum of squares.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Extends the image to `2w x 2h` by mirroring about its right and bottom
    /// edges, so that the result is periodic and continuous at the seams.
    pub fn mirror_extend(&self) -> Image {
        let (w, h) = (self.width, self.height);
        let (ew, eh) = (2 * w, 2 * h);
        let mut data = Vec::with_capacity(ew * eh);
        for y in 0..eh {
            let sy = if y < h { y } else { eh - 1 - y };
            for x in 0..ew {
                let sx = if x < w { x } else { ew - 1 - x };
                data.push(self.data[sy * w + sx]);
            }
        }
        Image::from_raw(ew, eh, data)
    }

    /// Copies the `width x height` block anchored at the origin.
    pub fn crop(&self, width: usize, height: usize) -> Result<Image> {
        if width == 0 || height == 0 || width > self.width || height > self.height {
            return Err(Error::input(format!(
                "cannot crop {}x{} to {width}x{height}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            data.extend_from_slice(&self.data[y * self.width..y * self.width + width]);
        }
        Ok(Image::from_raw(width, height, data))
    }
}

/// Symmetric (half-sample mirror) index into `0..n`; `-1 -> 0`, `n -> n - 1`.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut r = i.rem_euclid(period);
    if r >= n {
        r = period - 1 - r;
    }
    r as usize
}

/// Integer label per pixel, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(Error::input(format!(
                "label map of {} entries does not fit {width}x{height}",
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Largest label plus one; 0 for an empty map.
    pub fn n_labels(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m as usize + 1)
    }

    /// Sorted list of labels that occur at least once.
    pub fn used_labels(&self) -> Vec<u32> {
        let mut seen: Vec<u32> = self.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen
    }
}
