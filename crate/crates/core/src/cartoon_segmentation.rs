//! Four-phase segmentation of the cartoon image: a multiphase Chan-Vese
//! energy with an additional local term on `g_k * u0 - u0`, minimized by
//! MBO threshold dynamics on two binary phase fields. `beta = 0` gives the
//! plain multiphase model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{
    convolve, fourier_filter, gaussian_kernel, Boundary, FourierBoundary, Image, LabelMap,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartoonSegParams {
    /// Fidelity weight.
    pub lambda: f64,
    /// Perimeter weight.
    pub mu: f64,
    /// Weight of the local term; 0 disables it.
    pub beta: f64,
    /// Artificial time step shared by the forcing and diffusion steps.
    pub dt: f64,
    /// Standard deviation of the Gaussian `g_k` in pixels.
    pub kernel_std: f64,
    pub max_iter: usize,
    /// Interface width used only by [`energy`].
    pub epsilon: f64,
    /// Recompute the region means between the `u1` and `u2` updates. When
    /// off, both updates of a sweep use the means taken at its start.
    pub refresh_stats: bool,
}

impl Default for CartoonSegParams {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            mu: 1e-3 * 255.0 * 255.0,
            beta: 10.0,
            dt: 0.75,
            kernel_std: 10.0,
            max_iter: 200,
            epsilon: 1.0,
            refresh_stats: true,
        }
    }
}

impl CartoonSegParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [("lambda", self.lambda), ("mu", self.mu), ("dt", self.dt)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::param(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        if !(self.kernel_std > 0.0) {
            return Err(Error::param("kernel_std must be > 0"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::param("epsilon must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// Indicator fields `(u1, u2)`; phase `u1 + 2 u2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseFields {
    pub u1: Image,
    pub u2: Image,
}

impl PhaseFields {
    pub fn is_binary(&self) -> bool {
        self.u1
            .data()
            .iter()
            .chain(self.u2.data())
            .all(|&v| v == 0.0 || v == 1.0)
    }

    /// `u1 + 2 u2` per pixel, rounding relaxed values at 1/2.
    pub fn labels(&self) -> LabelMap {
        let labels = self
            .u1
            .data()
            .iter()
            .zip(self.u2.data())
            .map(|(&a, &b)| u32::from(a > 0.5) + 2 * u32::from(b > 0.5))
            .collect();
        LabelMap::new(self.u1.width(), self.u1.height(), labels).expect("shape checked")
    }
}

/// Region means of the image (`c`) and of the local residual (`d`), ordered
/// as the masks `u1 u2`, `u1 (1-u2)`, `(1-u1) u2`, `(1-u1)(1-u2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub c: [f64; 4],
    pub d: [f64; 4],
}

/// Swaps the middle entries, turning the `u1`-equation constants into the
/// `u2`-equation ones.
pub fn swap_middle(c: [f64; 4]) -> [f64; 4] {
    [c[0], c[2], c[1], c[3]]
}

/// Sign of `sin(pi i / p)` on the integer grid. The sine's interior zeros at
/// multiples of `p` are attributed to the half-wave they close, which is what
/// a rounded evaluation gives for small `i` and keeps the pattern periodic.
fn half_wave_sign(i: usize, p: usize) -> i32 {
    if i == 0 {
        0
    } else if i.div_ceil(p) % 2 == 1 {
        1
    } else {
        -1
    }
}

/// Checkerboard initialization: `u1 = 1` where `sin(pi x / 3) sin(pi y / 3) > 0`,
/// `u2` likewise with 10.
pub fn checkerboard_init(width: usize, height: usize) -> Result<PhaseFields> {
    if width < 2 || height < 2 {
        return Err(Error::input(format!(
            "phase fields need at least 2x2 pixels, got {width}x{height}"
        )));
    }
    let board = |p: usize| {
        Image::from_fn(width, height, |x, y| {
            f64::from((half_wave_sign(x, p) * half_wave_sign(y, p) > 0) as u8)
        })
    };
    Ok(PhaseFields {
        u1: board(3)?,
        u2: board(10)?,
    })
}

/// `sum(w m1 m2) / sum(m1 m2)`, or the mean of `w` when the region is empty.
pub fn region_average(w: &Image, m1: &Image, m2: &Image) -> Result<f64> {
    w.ensure_same_shape(m1, "region_average")?;
    w.ensure_same_shape(m2, "region_average")?;
    let (mut num, mut den) = (0.0, 0.0);
    for ((&a, &b), &c) in w.data().iter().zip(m1.data()).zip(m2.data()) {
        let m = b * c;
        num += a * m;
        den += m;
    }
    Ok(if den > 0.0 { num / den } else { w.mean() })
}

fn region_means(w: &Image, fields: &PhaseFields) -> [f64; 4] {
    // one pass over the four masks; same arithmetic as region_average
    let mut num = [0.0; 4];
    let mut den = [0.0; 4];
    for ((&v, &a), &b) in w.data().iter().zip(fields.u1.data()).zip(fields.u2.data()) {
        let masks = [a * b, a * (1.0 - b), (1.0 - a) * b, (1.0 - a) * (1.0 - b)];
        for i in 0..4 {
            num[i] += v * masks[i];
            den[i] += masks[i];
        }
    }
    let fallback = w.mean();
    std::array::from_fn(|i| {
        if den[i] > 0.0 {
            num[i] / den[i]
        } else {
            fallback
        }
    })
}

/// `g_k * u0 - u0` with a Gaussian of the given standard deviation.
pub fn local_residual(u0: &Image, kernel_std: f64) -> Result<Image> {
    let k = gaussian_kernel(kernel_std, 3.0)?;
    convolve(u0, &k, Boundary::Symmetric).zip_map(u0, |g, f| g - f)
}

pub fn update_stats(u0: &Image, residual: &Image, fields: &PhaseFields) -> Result<RegionStats> {
    u0.ensure_same_shape(residual, "update_stats residual")?;
    u0.ensure_same_shape(&fields.u1, "update_stats u1")?;
    u0.ensure_same_shape(&fields.u2, "update_stats u2")?;
    Ok(RegionStats {
        c: region_means(u0, fields),
        d: region_means(residual, fields),
    })
}

/// Pointwise `(c1-w)^2 o + (c2-w)^2 (1-o) - (c3-w)^2 o - (c4-w)^2 (1-o)`,
/// where `o` is the other phase field.
pub fn coupling_field(w0: &Image, c: [f64; 4], other: &Image) -> Result<Image> {
    w0.zip_map(other, |w, o| coupling_at(w, c, o))
}

#[inline]
fn coupling_at(w: f64, c: [f64; 4], o: f64) -> f64 {
    let sq = |ci: f64| (ci - w) * (ci - w);
    (sq(c[0]) - sq(c[2])) * o + (sq(c[1]) - sq(c[3])) * (1.0 - o)
}

/// Fourier multiplier of one implicit heat step.
#[inline]
pub fn heat_multiplier(mu: f64, dt: f64, xi_sq: f64) -> f64 {
    1.0 / (1.0 + 2.0 * mu * dt * xi_sq)
}

/// Implicit diffusion step solved in the Fourier domain on the mirrored grid.
pub fn heat_step(v: &Image, mu: f64, dt: f64) -> Result<Image> {
    fourier_filter(v, FourierBoundary::Symmetric, |fx, fy| {
        heat_multiplier(mu, dt, fx * fx + fy * fy)
    })
}

/// 1 strictly above one half, 0 otherwise.
#[inline]
pub fn threshold_half(w: f64) -> f64 {
    if w > 0.5 {
        1.0
    } else {
        0.0
    }
}

fn update_field(
    own: &Image,
    other: &Image,
    u0: &Image,
    residual: &Image,
    c: [f64; 4],
    d: [f64; 4],
    params: &CartoonSegParams,
) -> Result<Image> {
    let (lambda, beta, dt) = (params.lambda, params.beta, params.dt);
    let data = own
        .data()
        .iter()
        .zip(other.data())
        .zip(u0.data().iter().zip(residual.data()))
        .map(|((&u, &o), (&f, &r))| {
            let mut force = lambda * coupling_at(f, c, o);
            if beta != 0.0 {
                force += beta * coupling_at(r, d, o);
            }
            u - dt * force
        })
        .collect();
    let v = Image::from_raw(own.width(), own.height(), data);
    Ok(heat_step(&v, params.mu, params.dt)?.map(threshold_half))
}

/// One sweep: forcing, diffusion and thresholding for `u1`, then for `u2`
/// against the updated `u1` with the swapped constants.
pub fn mbo_iteration(
    u0: &Image,
    residual: &Image,
    fields: &PhaseFields,
    stats: &RegionStats,
    params: &CartoonSegParams,
) -> Result<PhaseFields> {
    let u1 = update_field(
        &fields.u1, &fields.u2, u0, residual, stats.c, stats.d, params,
    )?;
    let refreshed;
    let stats = if params.refresh_stats {
        let mid = PhaseFields {
            u1: u1.clone(),
            u2: fields.u2.clone(),
        };
        refreshed = update_stats(u0, residual, &mid)?;
        &refreshed
    } else {
        stats
    };
    let u2 = update_field(
        &fields.u2,
        &u1,
        u0,
        residual,
        swap_middle(stats.c),
        swap_middle(stats.d),
        params,
    )?;
    Ok(PhaseFields { u1, u2 })
}

/// Terms of the diffuse-interface energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub fidelity: f64,
    pub ginzburg_landau: f64,
    pub local: f64,
    pub total: f64,
}

fn four_phase_fit(w: &Image, c: [f64; 4], fields: &PhaseFields) -> f64 {
    w.data()
        .iter()
        .zip(fields.u1.data())
        .zip(fields.u2.data())
        .map(|((&v, &a), &b)| {
            let sq = |ci: f64| (ci - v) * (ci - v);
            sq(c[0]) * a * b
                + sq(c[1]) * a * (1.0 - b)
                + sq(c[2]) * (1.0 - a) * b
                + sq(c[3]) * (1.0 - a) * (1.0 - b)
        })
        .sum()
}

/// Squared forward differences summed over the grid (zero across the last
/// row and column).
fn dirichlet_sum(u: &Image) -> f64 {
    let (w, h) = (u.width(), u.height());
    let mut s = 0.0;
    for y in 0..h {
        for x in 0..w {
            let v = u.get(x, y);
            if x + 1 < w {
                s += (u.get(x + 1, y) - v).powi(2);
            }
            if y + 1 < h {
                s += (u.get(x, y + 1) - v).powi(2);
            }
        }
    }
    s
}

fn double_well(u: f64) -> f64 {
    u * u * (1.0 - u) * (1.0 - u)
}

/// Fidelity of `u0` to the four-phase constants.
pub fn fidelity_energy(u0: &Image, c: [f64; 4], fields: &PhaseFields) -> f64 {
    four_phase_fit(u0, c, fields)
}

/// `lambda E_fid + mu E_GL + beta E_loc`. Diagnostic only.
pub fn energy(
    u0: &Image,
    residual: &Image,
    fields: &PhaseFields,
    stats: &RegionStats,
    params: &CartoonSegParams,
) -> EnergyTerms {
    let fidelity = four_phase_fit(u0, stats.c, fields);
    let local = four_phase_fit(residual, stats.d, fields);
    let eps = params.epsilon;
    let grad = dirichlet_sum(&fields.u1) + dirichlet_sum(&fields.u2);
    let well: f64 = fields
        .u1
        .data()
        .iter()
        .chain(fields.u2.data())
        .map(|&u| double_well(u))
        .sum();
    let ginzburg_landau = eps * grad + well / eps;
    EnergyTerms {
        fidelity,
        ginzburg_landau,
        local,
        total: params.lambda * fidelity + params.mu * ginzburg_landau + params.beta * local,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CartoonSegmentation {
    pub labels: LabelMap,
    pub stats: RegionStats,
    pub fields: PhaseFields,
    pub iterations: usize,
    /// Whether the fields stopped changing before `max_iter`.
    pub converged: bool,
}

/// Runs the MBO scheme from the checkerboard initialization until neither
/// phase field changes or `max_iter` sweeps have been made.
pub fn segment(u0: &Image, params: &CartoonSegParams) -> Result<CartoonSegmentation> {
    params.validate()?;
    let residual = local_residual(u0, params.kernel_std)?;
    let mut fields = checkerboard_init(u0.width(), u0.height())?;
    let mut stats = update_stats(u0, &residual, &fields)?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        let next = mbo_iteration(u0, &residual, &fields, &stats, params)?;
        iterations += 1;
        let unchanged = next == fields;
        fields = next;
        stats = update_stats(u0, &residual, &fields)?;
        if unchanged {
            converged = true;
            break;
        }
    }
    Ok(CartoonSegmentation {
        labels: fields.labels(),
        stats,
        fields,
        iterations,
        converged,
    })
}

/// Named parameter grids used for cartoon segmentation experiments.
pub mod presets {
    /// Fidelity weights in use.
    pub const LAMBDAS: [f64; 3] = [5.0, 7.0, 10.0];

    /// Perimeter weights, for images on a 255-level scale.
    pub fn mus() -> [f64; 4] {
        let s = 255.0 * 255.0;
        [1e-4 * s, 1e-3 * s, 1e-2 * s, 1e-1 * s]
    }
}
