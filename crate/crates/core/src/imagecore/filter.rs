use super::{reflect_index, Image};
use crate::error::{Error, Result};
use crate::par;

/// Padding policy for spatial filters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Boundary {
    /// Half-sample mirror: `f(-1) = f(0)`.
    #[default]
    Symmetric,
}

/// Separable, normalized, symmetric 2D kernel. The 2D weight at `(dx, dy)` is
/// `profile[dx] * profile[dy]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    radius: usize,
    profile: Vec<f64>,
}

impl Kernel {
    /// Builds a kernel from an odd-length symmetric 1D profile, normalizing it.
    pub fn from_profile(profile: Vec<f64>) -> Result<Self> {
        if profile.len().is_multiple_of(2) {
            return Err(Error::param("kernel profile must have odd length"));
        }
        let s: f64 = profile.iter().sum();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::param("kernel profile must have a positive sum"));
        }
        Ok(Self {
            radius: profile.len() / 2,
            profile: profile.into_iter().map(|v| v / s).collect(),
        })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Normalized 1D profile of length `2 * radius + 1`.
    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    /// 2D weight at offset `(dx, dy)` from the centre.
    pub fn weight(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius as isize;
        if dx.abs() > r || dy.abs() > r {
            return 0.0;
        }
        self.profile[(dx + r) as usize] * self.profile[(dy + r) as usize]
    }

    /// Full `(2r+1)^2` weight table, row-major.
    pub fn weights_2d(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.profile.len().pow(2));
        for wy in &self.profile {
            for wx in &self.profile {
                out.push(wx * wy);
            }
        }
        out
    }
}

/// Sampled Gaussian truncated at `ceil(truncation * std)` and renormalized.
pub fn gaussian_kernel(std: f64, truncation: f64) -> Result<Kernel> {
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::param(format!("gaussian std must be > 0, got {std}")));
    }
    if !(truncation >= 1.0 && truncation.is_finite()) {
        return Err(Error::param(format!(
            "gaussian truncation must be >= 1, got {truncation}"
        )));
    }
    let radius = (truncation * std).ceil() as isize;
    let profile = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * std * std)).exp())
        .collect();
    Kernel::from_profile(profile)
}

fn convolve_rows(src: &[f64], width: usize, profile: &[f64]) -> Vec<f64> {
    let r = (profile.len() / 2) as isize;
    let mut out = vec![0.0; src.len()];
    par::for_each_chunk_mut(&mut out, width, |y, row| {
        let line = &src[y * width..(y + 1) * width];
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, w) in profile.iter().enumerate() {
                let sx = reflect_index(x as isize + j as isize - r, width);
                acc += w * line[sx];
            }
            *o = acc;
        }
    });
    out
}

fn transpose(src: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width {
            out[x * height + y] = src[y * width + x];
        }
    }
    out
}

/// Correlates `img` with the (symmetric) kernel under the given padding.
pub fn convolve(img: &Image, ker: &Kernel, boundary: Boundary) -> Image {
    let Boundary::Symmetric = boundary;
    let (w, h) = (img.width(), img.height());
    let horiz = convolve_rows(img.data(), w, ker.profile());
    let t = transpose(&horiz, w, h);
    let vert = convolve_rows(&t, h, ker.profile());
    Image::from_raw(w, h, transpose(&vert, h, w))
}

/// Gradient magnitude. Inside, each partial derivative is the mean of the
/// absolute forward and backward differences. On linear data this equals the
/// central difference; it does not vanish on a one-pixel checkerboard, and a
/// step of height `h` spreads as `h/2` over the two pixels beside it. Border
/// rows and columns use one-sided differences.
pub fn gradient_magnitude(img: &Image) -> Result<Image> {
    let (w, h) = (img.width(), img.height());
    if w < 2 || h < 2 {
        return Err(Error::input(format!(
            "gradient needs at least 2x2 pixels, got {w}x{h}"
        )));
    }
    let d = img.data();
    let at = |x: usize, y: usize| d[y * w + x];
    // derivative along one axis: mean of the absolute forward and backward
    // differences inside, the one-sided difference at the ends
    let diff = |n: usize, i: usize, f: &dyn Fn(usize) -> f64| -> f64 {
        if i == 0 {
            (f(1) - f(0)).abs()
        } else if i == n - 1 {
            (f(n - 1) - f(n - 2)).abs()
        } else {
            0.5 * ((f(i + 1) - f(i)).abs() + (f(i) - f(i - 1)).abs())
        }
    };
    let mut out = vec![0.0; w * h];
    par::for_each_chunk_mut(&mut out, w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            let dx = diff(w, x, &|i| at(i, y));
            let dy = diff(h, y, &|j| at(x, j));
            *o = dx.hypot(dy);
        }
    });
    Ok(Image::from_raw(w, h, out))
}
