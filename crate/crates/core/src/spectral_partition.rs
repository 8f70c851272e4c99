//! Data-driven partition of the Fourier plane into polar wedges: the texture
//! spectrum is resampled on a polar grid, hard-thresholded at a percentile of
//! its magnitudes, cut into angular sectors and per-sector scale rings by
//! scale-space minima detection, and finally thinned by merging low-density
//! wedges.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{fft2, gaussian_kernel, percentile_value, reflect_index, Image};
use crate::par;

/// Spectrum magnitude sampled on a `(theta, r)` grid, `theta` in `[0, pi)`
/// and `r` in `[0, pi]` (radians per sample, Nyquist at `pi`).
#[derive(Clone, Debug, PartialEq)]
pub struct PolarSpectrum {
    n_theta: usize,
    n_radius: usize,
    /// Row-major by angle: `data[i * n_radius + j]`.
    data: Vec<f64>,
}

impl PolarSpectrum {
    pub fn new(n_theta: usize, n_radius: usize, data: Vec<f64>) -> Result<Self> {
        if n_theta == 0 || n_radius < 2 || data.len() != n_theta * n_radius {
            return Err(Error::input(format!(
                "polar grid {n_theta}x{n_radius} does not hold {} samples",
                data.len()
            )));
        }
        if data.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::input(
                "polar magnitudes must be finite and non-negative",
            ));
        }
        Ok(Self {
            n_theta,
            n_radius,
            data,
        })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_radius(&self) -> usize {
        self.n_radius
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i_theta: usize, j_radius: usize) -> f64 {
        self.data[i_theta * self.n_radius + j_radius]
    }

    #[inline]
    pub fn theta(&self, i: usize) -> f64 {
        i as f64 * PI / self.n_theta as f64
    }

    #[inline]
    pub fn radius(&self, j: usize) -> f64 {
        j as f64 * PI / (self.n_radius - 1) as f64
    }

    pub fn theta_axis(&self) -> Vec<f64> {
        (0..self.n_theta).map(|i| self.theta(i)).collect()
    }

    pub fn radius_axis(&self) -> Vec<f64> {
        (0..self.n_radius).map(|j| self.radius(j)).collect()
    }
}

/// Polar resampling of `|fft2(v)|` by bilinear interpolation on the periodic
/// spectrum. With `S = max(width, height)` the grid has `2S` angles and `S`
/// radii; the axes are scaled separately so that `r = pi` reaches Nyquist on
/// both.
pub fn pseudo_polar(v: &Image) -> Result<PolarSpectrum> {
    let (w, h) = (v.width(), v.height());
    let s = w.max(h);
    let n_theta = 2 * s;
    let n_radius = s.max(2);
    let mags = fft2(v)?.magnitudes();
    let at = |kx: isize, ky: isize| {
        let x = kx.rem_euclid(w as isize) as usize;
        let y = ky.rem_euclid(h as isize) as usize;
        mags[y * w + x]
    };
    let sx = w as f64 / (2.0 * PI);
    let sy = h as f64 / (2.0 * PI);
    let rows = par::map_range(n_theta, |i| {
        let theta = i as f64 * PI / n_theta as f64;
        let (sin, cos) = theta.sin_cos();
        (0..n_radius)
            .map(|j| {
                let r = j as f64 * PI / (n_radius - 1) as f64;
                let kx = r * cos * sx;
                let ky = r * sin * sy;
                let (x0, y0) = (kx.floor(), ky.floor());
                let (fx, fy) = (kx - x0, ky - y0);
                let (x0, y0) = (x0 as isize, y0 as isize);
                (1.0 - fy) * ((1.0 - fx) * at(x0, y0) + fx * at(x0 + 1, y0))
                    + fy * ((1.0 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1))
            })
            .collect::<Vec<f64>>()
    });
    PolarSpectrum::new(n_theta, n_radius, rows.concat())
}

/// Zeroes every magnitude `<= tau`; survivors are unchanged.
pub fn hard_threshold(spec: &PolarSpectrum, tau: f64) -> Result<PolarSpectrum> {
    if !(tau >= 0.0) {
        return Err(Error::param(format!("threshold must be >= 0, got {tau}")));
    }
    let data = spec
        .data
        .iter()
        .map(|&a| if a > tau { a } else { 0.0 })
        .collect();
    Ok(PolarSpectrum { data, ..*spec })
}

/// Which axis a [`marginal_profile`] keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileAxis {
    /// One value per angle, averaged over radii.
    ByAngle,
    /// One value per radius, averaged over angles.
    ByRadius,
}

/// Mean magnitude along the collapsed axis, optionally restricted to the
/// given indices of that axis.
pub fn marginal_profile(
    spec: &PolarSpectrum,
    axis: ProfileAxis,
    collapse: Option<&[usize]>,
) -> Result<Vec<f64>> {
    let (kept, collapsed_len) = match axis {
        ProfileAxis::ByAngle => (spec.n_theta, spec.n_radius),
        ProfileAxis::ByRadius => (spec.n_radius, spec.n_theta),
    };
    let all: Vec<usize>;
    let idx = match collapse {
        Some(idx) => {
            if idx.is_empty() {
                return Err(Error::input("empty profile restriction"));
            }
            if let Some(&bad) = idx.iter().find(|&&i| i >= collapsed_len) {
                return Err(Error::input(format!(
                    "profile index {bad} outside 0..{collapsed_len}"
                )));
            }
            idx
        }
        None => {
            all = (0..collapsed_len).collect();
            &all
        }
    };
    let n = idx.len() as f64;
    Ok((0..kept)
        .map(|k| {
            let s: f64 = match axis {
                ProfileAxis::ByAngle => idx.iter().map(|&j| spec.get(k, j)).sum(),
                ProfileAxis::ByRadius => idx.iter().map(|&i| spec.get(i, k)).sum(),
            };
            s / n
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    /// Percentile of the polar magnitudes used as hard threshold.
    pub percentile: f64,
    /// Wedges with density below `eta` times the largest are merged.
    pub eta: f64,
    /// Variance added per scale-space level, in samples squared.
    pub scale_space_step: f64,
    /// Upper bound on the number of smoothing levels.
    pub max_scale_space_levels: usize,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            percentile: 0.92,
            eta: 0.1,
            scale_space_step: 1.0,
            max_scale_space_levels: 256,
        }
    }
}

impl DetectionParams {
    pub fn with_percentile(percentile: f64) -> Self {
        Self {
            percentile,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.percentile > 0.0 && self.percentile < 1.0) {
            return Err(Error::param(format!(
                "percentile must lie in (0, 1), got {}",
                self.percentile
            )));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::param(format!(
                "eta must lie in (0, 1), got {}",
                self.eta
            )));
        }
        if !(self.scale_space_step > 0.0 && self.scale_space_step.is_finite()) {
            return Err(Error::param("scale_space_step must be > 0"));
        }
        if self.max_scale_space_levels == 0 {
            return Err(Error::param("max_scale_space_levels must be at least 1"));
        }
        Ok(())
    }
}

fn smooth(profile: &[f64], variance: f64, cyclic: bool) -> Vec<f64> {
    if variance <= 0.0 {
        return profile.to_vec();
    }
    let ker = gaussian_kernel(variance.sqrt(), 3.0).expect("positive std");
    let w = ker.profile();
    let r = ker.radius() as isize;
    let n = profile.len();
    (0..n as isize)
        .map(|i| {
            (-r..=r)
                .map(|d| {
                    let k = if cyclic {
                        (i + d).rem_euclid(n as isize) as usize
                    } else {
                        reflect_index(i + d, n)
                    };
                    w[(d + r) as usize] * profile[k]
                })
                .sum()
        })
        .collect()
}

/// Strict local minima; a flat run counts when both neighbours are higher
/// and is reported at its centre. Ends of an open profile never count.
/// Values are compared after rounding to `1e-12` of the largest magnitude,
/// which keeps round-off ripple out and treats every sample alike.
fn local_minima(p: &[f64], cyclic: bool) -> Vec<f64> {
    let n = p.len();
    let scale = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if n < 3 || scale == 0.0 {
        return Vec::new();
    }
    let q: Vec<i64> = p
        .iter()
        .map(|v| (v / (1e-12 * scale)).round() as i64)
        .collect();
    let mut out = Vec::new();
    if cyclic {
        // start at the beginning of a run so runs never straddle the seam
        let Some(start) = (0..n).find(|&i| q[i] != q[(i + n - 1) % n]) else {
            return out;
        };
        let at = |k: usize| q[(start + k) % n];
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && at(j + 1) == at(i) {
                j += 1;
            }
            if at((i + n - 1) % n) > at(i) && at((j + 1) % n) > at(i) {
                let c = start as f64 + (i + j) as f64 / 2.0;
                out.push(c % n as f64);
            }
            i = j + 1;
        }
        out.sort_by(f64::total_cmp);
    } else {
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && q[j + 1] == q[i] {
                j += 1;
            }
            if i > 0 && j + 1 < n && q[i - 1] > q[i] && q[j + 1] > q[i] {
                out.push((i + j) as f64 / 2.0);
            }
            i = j + 1;
        }
    }
    out
}

/// Threshold on a 256-bin histogram maximising the between-class variance;
/// returns the bin index of the last bin of the lower class.
fn otsu_bin(hist: &[f64]) -> usize {
    let total: f64 = hist.iter().sum();
    let sum_all: f64 = hist.iter().enumerate().map(|(i, h)| i as f64 * h).sum();
    let (mut w0, mut s0) = (0.0, 0.0);
    let (mut best, mut best_k) = (-1.0, 0);
    for (k, &h) in hist.iter().enumerate() {
        w0 += h;
        s0 += k as f64 * h;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = s0 / w0;
        let m1 = (sum_all - s0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_k = k;
        }
    }
    best_k
}

struct Track {
    pos: f64,
    lifetime: usize,
    alive: bool,
}

/// Persistent minima of a 1D profile. The profile is smoothed with Gaussians
/// of variance `l * step` for `l = 0..=L`, `L = ceil(len / 8)`; minima of the
/// raw profile are followed from level to level by nearest matching within
/// two samples. Lifetimes are split into two classes by Otsu's method and the
/// long-lived minima are returned, at their position on the last level they
/// reached. `cyclic` treats the profile as periodic.
pub fn detect_boundaries_1d(
    profile: &[f64],
    params: &DetectionParams,
    cyclic: bool,
) -> Result<Vec<f64>> {
    params.validate()?;
    let n = profile.len();
    if n < 3 {
        return Err(Error::input(format!(
            "boundary detection needs at least 3 samples, got {n}"
        )));
    }
    if profile.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("profile contains non-finite values"));
    }
    let levels = n.div_ceil(8).min(params.max_scale_space_levels);
    let mut tracks: Vec<Track> = local_minima(profile, cyclic)
        .into_iter()
        .map(|pos| Track {
            pos,
            lifetime: 1,
            alive: true,
        })
        .collect();
    if tracks.is_empty() {
        return Ok(Vec::new());
    }
    let dist = |a: f64, b: f64| {
        let d = (a - b).abs();
        if cyclic {
            d.min(n as f64 - d)
        } else {
            d
        }
    };
    for level in 1..=levels {
        if !tracks.iter().any(|t| t.alive) {
            break;
        }
        let mins = local_minima(
            &smooth(profile, level as f64 * params.scale_space_step, cyclic),
            cyclic,
        );
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, t) in tracks.iter().enumerate().filter(|(_, t)| t.alive) {
            for (mi, &m) in mins.iter().enumerate() {
                let d = dist(t.pos, m);
                if d <= 2.0 {
                    pairs.push((d, ti, mi));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut track_taken = vec![false; tracks.len()];
        let mut min_taken = vec![false; mins.len()];
        for (_, ti, mi) in pairs {
            if track_taken[ti] || min_taken[mi] {
                continue;
            }
            track_taken[ti] = true;
            min_taken[mi] = true;
            tracks[ti].pos = mins[mi];
            tracks[ti].lifetime += 1;
        }
        for (t, taken) in tracks.iter_mut().zip(track_taken) {
            if t.alive && !taken {
                t.alive = false;
            }
        }
    }
    let lo = tracks.iter().map(|t| t.lifetime).min().unwrap_or(0);
    let hi = tracks.iter().map(|t| t.lifetime).max().unwrap_or(0);
    let keep: Vec<bool> = if lo == hi {
        // a single lifetime class: keep it if it outlived half the levels
        let total = (levels + 1) as f64;
        tracks
            .iter()
            .map(|t| t.lifetime as f64 >= total / 2.0)
            .collect()
    } else {
        let bin = |l: usize| ((l - lo) as f64 / (hi - lo) as f64 * 255.0).floor() as usize;
        let mut hist = vec![0.0; 256];
        for t in &tracks {
            hist[bin(t.lifetime)] += 1.0;
        }
        let k = otsu_bin(&hist);
        tracks.iter().map(|t| bin(t.lifetime) > k).collect()
    };
    let mut out: Vec<f64> = tracks
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(t, _)| t.pos)
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// Angular sectors `[theta_m, theta_{m+1})`, the last one wrapping to
/// `theta_1 + pi`, each cut into rings by its scales. Sector `m` holds the
/// radii `omega_1 < ... < omega_K`; its wedges are `[omega_n, omega_{n+1}]`
/// with the outermost running up to `pi`. `omega_1` is shared by all sectors
/// and bounds the central low-pass disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPartition {
    pub thetas: Vec<f64>,
    pub scales: Vec<Vec<f64>>,
}

impl SpectrumPartition {
    pub fn new(thetas: Vec<f64>, scales: Vec<Vec<f64>>) -> Result<Self> {
        let p = Self { thetas, scales };
        p.validate()?;
        Ok(p)
    }

    /// A single sector holding only the low-pass radius.
    pub fn trivial(omega1: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![vec![omega1]])
    }

    pub fn validate(&self) -> Result<()> {
        if self.thetas.is_empty() {
            return Err(Error::param("partition needs at least one angle"));
        }
        if self.thetas.len() != self.scales.len() {
            return Err(Error::param(format!(
                "{} angles but {} scale lists",
                self.thetas.len(),
                self.scales.len()
            )));
        }
        if self.thetas.iter().any(|t| !(0.0..PI).contains(t))
            || self.thetas.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::param(format!(
                "angles must be strictly increasing in [0, pi): {:?}",
                self.thetas
            )));
        }
        let omega1 = self.scales[0].first().copied();
        for (m, s) in self.scales.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::param(format!("sector {m} has no scales")));
            }
            if s.iter().any(|w| !(*w > 0.0 && *w < PI)) || s.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::param(format!(
                    "scales of sector {m} must be strictly increasing in (0, pi): {s:?}"
                )));
            }
            if s.first().copied() != omega1 {
                return Err(Error::param("all sectors must share their first scale"));
            }
        }
        Ok(())
    }

    pub fn n_sectors(&self) -> usize {
        self.thetas.len()
    }

    pub fn omega1(&self) -> f64 {
        self.scales[0][0]
    }

    /// Number of detail subbands, one per wedge.
    pub fn n_subbands(&self) -> usize {
        self.scales.iter().map(Vec::len).sum()
    }

    /// `(sector, wedge)` pairs in subband order.
    pub fn subband_indices(&self) -> Vec<(usize, usize)> {
        self.scales
            .iter()
            .enumerate()
            .flat_map(|(m, s)| (0..s.len()).map(move |n| (m, n)))
            .collect()
    }

    pub fn sector_start(&self, m: usize) -> f64 {
        self.thetas[m]
    }

    /// Angular width of sector `m`; `pi` for a single sector.
    pub fn sector_width(&self, m: usize) -> f64 {
        let k = self.thetas.len();
        if m + 1 < k {
            self.thetas[m + 1] - self.thetas[m]
        } else {
            self.thetas[0] + PI - self.thetas[m]
        }
    }

    /// Whether the orientation `theta` (taken modulo `pi`) lies in sector `m`.
    pub fn sector_contains(&self, m: usize, theta: f64) -> bool {
        (theta - self.thetas[m]).rem_euclid(PI) < self.sector_width(m)
    }

    /// Radial extent of wedge `n` of sector `m`.
    pub fn wedge_radii(&self, m: usize, n: usize) -> (f64, f64) {
        let s = &self.scales[m];
        (s[n], s.get(n + 1).copied().unwrap_or(PI))
    }

    pub fn to_document(&self, tau: f64, eta: f64) -> PartitionDocument {
        PartitionDocument {
            thetas: self.thetas.clone(),
            scales: self.scales.clone(),
            tau,
            eta,
        }
    }
}

/// Serialized form of a partition with the detection threshold and merge
/// fraction that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionDocument {
    pub thetas: Vec<f64>,
    pub scales: Vec<Vec<f64>>,
    pub tau: f64,
    pub eta: f64,
}

impl PartitionDocument {
    pub fn partition(&self) -> Result<SpectrumPartition> {
        SpectrumPartition::new(self.thetas.clone(), self.scales.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Angle samples of `spec` falling in each sector.
fn sector_samples(spec: &PolarSpectrum, part: &SpectrumPartition) -> Vec<Vec<usize>> {
    (0..part.n_sectors())
        .map(|m| {
            (0..spec.n_theta)
                .filter(|&i| part.sector_contains(m, spec.theta(i)))
                .collect()
        })
        .collect()
}

/// Midpoint of the first run of floor values, provided the profile rises
/// again after it.
fn floor_plateau_midpoint(p: &[f64]) -> Option<f64> {
    let floor = p.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale;
    let a = p.iter().position(|&v| v <= floor + tol)?;
    let mut b = a;
    while b + 1 < p.len() && p[b + 1] <= floor + tol {
        b += 1;
    }
    let rises = p[b + 1..].iter().any(|&v| v > floor + tol);
    let mid = (a + b) as f64 / 2.0;
    (rises && mid > 0.0).then_some(mid)
}

/// Angles first, then radii per sector; the innermost radius is replaced by
/// the smallest one found so that all sectors share the low-pass disk.
///
/// A sector without persistent radial minima falls back to the middle of the
/// floor before its first spectral peak. If no sector yields a radius the
/// disk radius defaults to `pi / 2`.
pub fn detect_partition(
    spec: &PolarSpectrum,
    params: &DetectionParams,
) -> Result<SpectrumPartition> {
    params.validate()?;
    // samples interpolated from the DC bin carry no orientation
    let bin = 2.0 * 2f64.sqrt() * PI / spec.n_radius as f64;
    let off_dc: Vec<usize> = (0..spec.n_radius)
        .filter(|&j| spec.radius(j) >= bin)
        .collect();
    let by_angle = marginal_profile(spec, ProfileAxis::ByAngle, Some(&off_dc))?;
    let mut thetas: Vec<f64> = detect_boundaries_1d(&by_angle, params, true)?
        .into_iter()
        .map(|b| b * PI / spec.n_theta as f64)
        .collect();
    thetas.dedup();
    if thetas.len() <= 1 {
        thetas = vec![thetas.first().copied().unwrap_or(0.0)];
    }
    let probe = SpectrumPartition {
        thetas: thetas.clone(),
        scales: vec![vec![]; thetas.len()],
    };
    let samples = sector_samples(spec, &probe);
    let to_radius = |b: f64| b * PI / (spec.n_radius - 1) as f64;
    let per_sector: Vec<Result<Vec<f64>>> = par::map(&samples, |idx| {
        if idx.is_empty() {
            return Ok(Vec::new());
        }
        let prof = marginal_profile(spec, ProfileAxis::ByRadius, Some(idx))?;
        let mut radii: Vec<f64> = detect_boundaries_1d(&prof, params, false)?
            .into_iter()
            .map(to_radius)
            .collect();
        if radii.is_empty() {
            radii.extend(floor_plateau_midpoint(&prof).map(to_radius));
        }
        Ok(radii)
    });
    let mut scales = per_sector.into_iter().collect::<Result<Vec<_>>>()?;
    let omega1 = scales
        .iter()
        .filter_map(|s| s.first().copied())
        .fold(None, |m: Option<f64>, w| Some(m.map_or(w, |m| m.min(w))))
        .unwrap_or(PI / 2.0);
    for s in &mut scales {
        if s.is_empty() {
            s.push(omega1);
        } else {
            s[0] = omega1;
        }
    }
    SpectrumPartition::new(thetas, scales)
}

/// `L1` mass of each wedge divided by its `(radial span) x (angular span)`
/// area, indexed `[sector][wedge]`.
pub fn wedge_density(spec: &PolarSpectrum, part: &SpectrumPartition) -> Result<Vec<Vec<f64>>> {
    part.validate()?;
    let samples = sector_samples(spec, part);
    Ok((0..part.n_sectors())
        .map(|m| {
            let k = part.scales[m].len();
            (0..k)
                .map(|n| {
                    let (lo, hi) = part.wedge_radii(m, n);
                    let last = n + 1 == k;
                    let mut mass = 0.0;
                    for j in 0..spec.n_radius {
                        let r = spec.radius(j);
                        if r >= lo && (r < hi || (last && r <= hi)) {
                            mass += samples[m].iter().map(|&i| spec.get(i, j)).sum::<f64>();
                        }
                    }
                    mass / ((hi - lo) * part.sector_width(m))
                })
                .collect()
        })
        .collect())
}

/// Walks each sector from the outermost wedge inwards and removes the inner
/// radius of every wedge `n >= 2` whose density is below `eta` times the
/// largest density. The innermost wedge and the angles are left alone.
pub fn merge_partition(
    part: &SpectrumPartition,
    densities: &[Vec<f64>],
    eta: f64,
) -> Result<SpectrumPartition> {
    part.validate()?;
    if densities.len() != part.n_sectors()
        || densities
            .iter()
            .zip(&part.scales)
            .any(|(d, s)| d.len() != s.len())
    {
        return Err(Error::input("densities do not match the partition"));
    }
    let max = densities
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let cut = eta * max;
    let scales = part
        .scales
        .iter()
        .zip(densities)
        .map(|(s, d)| {
            let mut s = s.clone();
            for n in (1..s.len()).rev() {
                if d[n] < cut {
                    s.remove(n);
                }
            }
            s
        })
        .collect();
    SpectrumPartition::new(part.thetas.clone(), scales)
}

/// Intermediate products of the partition detection.
#[derive(Clone, Debug)]
pub struct SpectrumAnalysis {
    /// Thresholded polar spectrum.
    pub polar: PolarSpectrum,
    pub tau: f64,
    pub detected: SpectrumPartition,
    pub densities: Vec<Vec<f64>>,
    pub merged: SpectrumPartition,
}

/// Polar resampling, percentile threshold, detection and merging.
pub fn analyze_spectrum(v: &Image, params: &DetectionParams) -> Result<SpectrumAnalysis> {
    params.validate()?;
    let raw = pseudo_polar(v)?;
    let tau = percentile_value(raw.data(), params.percentile)?;
    let polar = hard_threshold(&raw, tau)?;
    let detected = detect_partition(&polar, params)?;
    let densities = wedge_density(&polar, &detected)?;
    let merged = merge_partition(&detected, &densities, params.eta)?;
    Ok(SpectrumAnalysis {
        polar,
        tau,
        detected,
        densities,
        merged,
    })
}
