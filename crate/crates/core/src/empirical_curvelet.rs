//! Empirical curvelet filter bank built on a detected [`SpectrumPartition`]:
//! a radial low-pass window plus one polar wedge window per
//! `(sector, scale)` pair, with Meyer-type transitions chosen so the squared
//! windows sum to one at every frequency. Also hosts the 1D empirical wavelet
//! windows the 2D construction is modelled on.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{fft2, ifft2, signed_frequency, Image, Spectrum};
use crate::par;
use crate::spectral_partition::{
    analyze_spectrum, DetectionParams, SpectrumAnalysis, SpectrumPartition,
};

/// `0` below 0, `1` above 1, and `35t^4 - 84t^5 + 70t^6 - 20t^7` in between.
pub fn transition_b(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t.powi(4) * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t * t * t)
    }
}

/// Rising edge centred on `w` with half-width `gamma * w`.
#[inline]
fn rise(r: f64, w: f64, gamma: f64) -> f64 {
    (FRAC_PI_2 * transition_b((r - (1.0 - gamma) * w) / (2.0 * gamma * w))).sin()
}

/// Falling edge centred on `w` with half-width `gamma * w`.
#[inline]
fn fall(r: f64, w: f64, gamma: f64) -> f64 {
    (FRAC_PI_2 * transition_b((r - (1.0 - gamma) * w) / (2.0 * gamma * w))).cos()
}

/// Radial low-pass window: flat up to `(1 - gamma) omega1`, zero beyond
/// `(1 + gamma) omega1`.
pub fn lowpass_window(r: f64, omega1: f64, gamma: f64) -> f64 {
    if r <= (1.0 - gamma) * omega1 {
        1.0
    } else if r <= (1.0 + gamma) * omega1 {
        fall(r, omega1, gamma)
    } else {
        0.0
    }
}

/// Band window rising at `lower` and falling at `upper`; `upper = None`
/// leaves it open towards high frequencies.
pub fn band_window(r: f64, lower: f64, upper: Option<f64>, gamma: f64) -> f64 {
    if r < (1.0 - gamma) * lower {
        return 0.0;
    }
    if r <= (1.0 + gamma) * lower {
        // the two edges never overlap for admissible gamma
        return rise(r, lower, gamma);
    }
    match upper {
        Some(u) if r > (1.0 + gamma) * u => 0.0,
        Some(u) if r >= (1.0 - gamma) * u => fall(r, u, gamma),
        _ => 1.0,
    }
}

/// Largest `gamma` for which consecutive transitions of `boundaries` do not
/// overlap; 1 when there is a single boundary.
pub fn gamma_bound(boundaries: &[f64]) -> f64 {
    boundaries
        .windows(2)
        .map(|w| (w[1] - w[0]) / (w[1] + w[0]))
        .fold(1.0, f64::min)
}

/// 1D empirical wavelet windows on `[0, pi]` for boundaries
/// `0 < omega_1 < ... < omega_{N-1} <= pi`: a scaling window below
/// `omega_1` and one band per pair of consecutive boundaries, the last band
/// extending to `pi`.
#[derive(Clone, Debug, PartialEq)]
pub struct EwtFilterBank1d {
    boundaries: Vec<f64>,
    gamma: f64,
}

impl EwtFilterBank1d {
    pub fn new(boundaries: Vec<f64>, gamma: f64) -> Result<Self> {
        if boundaries.is_empty()
            || boundaries.iter().any(|w| !(*w > 0.0 && *w <= PI))
            || boundaries.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::param(format!(
                "boundaries must be strictly increasing in (0, pi]: {boundaries:?}"
            )));
        }
        let bound = gamma_bound(&boundaries);
        if !(gamma > 0.0 && gamma < 1.0 && gamma <= bound) {
            return Err(Error::param(format!(
                "gamma {gamma} is not admissible (needs 0 < gamma < 1 and <= {bound})"
            )));
        }
        Ok(Self { boundaries, gamma })
    }

    pub fn n_wavelets(&self) -> usize {
        self.boundaries.len()
    }

    pub fn scaling(&self, omega: f64) -> f64 {
        lowpass_window(omega.abs(), self.boundaries[0], self.gamma)
    }

    /// Band `n` (0-based) between `omega_{n+1}` and `omega_{n+2}`.
    pub fn wavelet(&self, n: usize, omega: f64) -> f64 {
        let upper = self.boundaries.get(n + 1).copied();
        band_window(omega.abs(), self.boundaries[n], upper, self.gamma)
    }

    /// Every window sampled at `n_points` uniform frequencies on `[0, pi]`;
    /// the scaling window comes first.
    pub fn sample(&self, n_points: usize) -> Vec<Vec<f64>> {
        let grid: Vec<f64> = (0..n_points)
            .map(|i| i as f64 * PI / (n_points.max(2) - 1) as f64)
            .collect();
        std::iter::once(grid.iter().map(|&w| self.scaling(w)).collect())
            .chain(
                (0..self.n_wavelets()).map(|n| grid.iter().map(|&w| self.wavelet(n, w)).collect()),
            )
            .collect()
    }
}

/// Radial and angular transition half-widths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionSpec {
    pub gamma: f64,
    pub delta_theta: f64,
}

impl TransitionSpec {
    /// `gamma` at 0.9 of its bound over all sectors, `delta_theta` at 0.45 of
    /// the narrowest sector.
    pub fn derive(part: &SpectrumPartition) -> Self {
        let gamma = 0.9
            * part
                .scales
                .iter()
                .map(|s| gamma_bound(s))
                .fold(1.0, f64::min);
        let min_width = (0..part.n_sectors())
            .map(|m| part.sector_width(m))
            .fold(PI, f64::min);
        Self {
            gamma,
            delta_theta: 0.45 * min_width,
        }
    }

    pub fn validate(&self, part: &SpectrumPartition) -> Result<()> {
        let bound = part
            .scales
            .iter()
            .map(|s| gamma_bound(s))
            .fold(1.0, f64::min);
        if !(self.gamma > 0.0 && self.gamma < 1.0 && self.gamma <= bound) {
            return Err(Error::param(format!(
                "gamma {} is not admissible (needs 0 < gamma < 1 and <= {bound})",
                self.gamma
            )));
        }
        if part.n_sectors() > 1 {
            let min_width = (0..part.n_sectors())
                .map(|m| part.sector_width(m))
                .fold(PI, f64::min);
            if !(self.delta_theta > 0.0 && self.delta_theta <= 0.5 * min_width) {
                return Err(Error::param(format!(
                    "delta_theta {} must lie in (0, {}]",
                    self.delta_theta,
                    0.5 * min_width
                )));
            }
        }
        Ok(())
    }
}

/// Radial window of wedge `n` (0-based) in sector `m`.
pub fn radial_window(r: f64, m: usize, n: usize, part: &SpectrumPartition, gamma: f64) -> f64 {
    let s = &part.scales[m];
    band_window(r, s[n], s.get(n + 1).copied(), gamma)
}

/// Angular window of sector `m`, evaluated modulo `pi`. A single sector
/// covers every orientation.
pub fn angular_window(theta: f64, m: usize, part: &SpectrumPartition, delta_theta: f64) -> f64 {
    if part.n_sectors() == 1 {
        return 1.0;
    }
    let width = part.sector_width(m);
    let phi = (theta - part.sector_start(m) + delta_theta).rem_euclid(PI) - delta_theta;
    let edge = |t: f64| FRAC_PI_2 * transition_b(t);
    if phi <= delta_theta {
        edge((phi + delta_theta) / (2.0 * delta_theta)).sin()
    } else if phi <= width - delta_theta {
        1.0
    } else if phi <= width + delta_theta {
        edge((phi - width + delta_theta) / (2.0 * delta_theta)).cos()
    } else {
        0.0
    }
}

/// Windows sampled on the Cartesian DFT grid of one image shape.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveletFilterBank {
    width: usize,
    height: usize,
    partition: SpectrumPartition,
    transition: TransitionSpec,
    lowpass: Vec<f64>,
    /// Sector-major: all wedges of sector 0, then sector 1, ...
    wedges: Vec<Vec<f64>>,
}

/// `(|omega|, theta mod pi)` of DFT bin `(kx, ky)`, `|omega| = pi` at Nyquist.
#[inline]
pub fn bin_polar(kx: usize, ky: usize, width: usize, height: usize) -> (f64, f64) {
    let wx = 2.0 * PI * signed_frequency(kx, width);
    let wy = 2.0 * PI * signed_frequency(ky, height);
    (wx.hypot(wy), wy.atan2(wx).rem_euclid(PI))
}

/// Makes a window even under `k -> -k` while keeping the sum of squares
/// across the bank: the two values are replaced by their root mean square.
/// Only Nyquist bins, whose mirror is evaluated at a different orientation,
/// change noticeably.
fn hermitian_rms(win: &mut [f64], width: usize, height: usize) {
    let orig = win.to_vec();
    for ky in 0..height {
        for kx in 0..width {
            let mx = (width - kx) % width;
            let my = (height - ky) % height;
            let a = orig[ky * width + kx];
            let b = orig[my * width + mx];
            if a != b {
                win[ky * width + kx] = ((a * a + b * b) / 2.0).sqrt();
            }
        }
    }
}

fn check_resolution(
    part: &SpectrumPartition,
    tr: &TransitionSpec,
    width: usize,
    height: usize,
) -> Result<()> {
    let n = width.max(height) as f64;
    let narrowest = 2.0 * tr.gamma * part.omega1();
    if narrowest < 2.0 * PI / n {
        return Err(Error::param(format!(
            "radial transition of width {narrowest:.4} around omega1 = {:.4} is narrower than one \
             frequency bin ({:.4}) on a {width}x{height} grid; the partition is too fine",
            part.omega1(),
            2.0 * PI / n
        )));
    }
    if part.n_sectors() > 1 && tr.delta_theta < 1.0 / n {
        return Err(Error::param(format!(
            "angular transition {:.4} is narrower than the angular resolution {:.4} of a \
             {width}x{height} grid",
            tr.delta_theta,
            1.0 / n
        )));
    }
    Ok(())
}

/// Coarsens `part` until its derived transitions fit a `width x height` grid.
/// A low-pass radius below one bin is raised to one bin. Then the
/// outer boundary of the tightest radial pair goes first; once the radii fit,
/// the narrowest sector is merged into its successor. Returns the coarsened
/// partition and the number of boundaries removed or moved.
pub fn fit_partition_to_grid(
    part: &SpectrumPartition,
    width: usize,
    height: usize,
) -> Result<(SpectrumPartition, usize)> {
    part.validate()?;
    let n = width.max(height) as f64;
    let mut p = part.clone();
    let mut removed = 0;
    // a low-pass radius of one bin leaves room for gamma down to 1/2
    let floor = 2.0 * PI / n;
    loop {
        let tr = TransitionSpec::derive(&p);
        if p.omega1() < floor {
            for s in &mut p.scales {
                s.retain(|&r| r > floor);
                s.insert(0, floor);
            }
        } else if 2.0 * tr.gamma * p.omega1() < 2.0 * PI / n {
            let tightest = p
                .scales
                .iter()
                .enumerate()
                .flat_map(|(m, s)| {
                    s.windows(2)
                        .enumerate()
                        .map(move |(j, w)| ((w[1] - w[0]) / (w[1] + w[0]), m, j + 1))
                })
                .min_by(|a, b| a.0.total_cmp(&b.0));
            let Some((_, m, j)) = tightest else {
                break;
            };
            p.scales[m].remove(j);
        } else if p.n_sectors() > 1 && tr.delta_theta < 1.0 / n {
            let m = (0..p.n_sectors())
                .min_by(|&a, &b| p.sector_width(a).total_cmp(&p.sector_width(b)))
                .expect("at least two sectors");
            // sector m absorbs its successor; the last one absorbs sector 0
            let next = (m + 1) % p.n_sectors();
            p.thetas.remove(next);
            let absorbed = p.scales.remove(next);
            let keep = if next == 0 { m - 1 } else { m };
            if absorbed.len() > p.scales[keep].len() {
                p.scales[keep] = absorbed;
            }
        } else {
            break;
        }
        removed += 1;
    }
    check_resolution(&p, &TransitionSpec::derive(&p), width, height)?;
    p.validate()?;
    Ok((p, removed))
}

pub fn build_filter_bank(
    part: &SpectrumPartition,
    transition: Option<TransitionSpec>,
    width: usize,
    height: usize,
) -> Result<CurveletFilterBank> {
    part.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::input("filter bank needs a non-empty grid"));
    }
    let tr = transition.unwrap_or_else(|| TransitionSpec::derive(part));
    tr.validate(part)?;
    check_resolution(part, &tr, width, height)?;
    let polar: Vec<(f64, f64)> = (0..height)
        .flat_map(|ky| (0..width).map(move |kx| bin_polar(kx, ky, width, height)))
        .collect();
    let mut lowpass: Vec<f64> = polar
        .iter()
        .map(|&(r, _)| lowpass_window(r, part.omega1(), tr.gamma))
        .collect();
    hermitian_rms(&mut lowpass, width, height);
    let wedges = par::map(&part.subband_indices(), |&(m, k)| {
        let mut w: Vec<f64> = polar
            .iter()
            .map(|&(r, t)| {
                radial_window(r, m, k, part, tr.gamma) * angular_window(t, m, part, tr.delta_theta)
            })
            .collect();
        hermitian_rms(&mut w, width, height);
        w
    });
    Ok(CurveletFilterBank {
        width,
        height,
        partition: part.clone(),
        transition: tr,
        lowpass,
        wedges,
    })
}

impl CurveletFilterBank {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn partition(&self) -> &SpectrumPartition {
        &self.partition
    }

    pub fn transition(&self) -> TransitionSpec {
        self.transition
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn wedges(&self) -> &[Vec<f64>] {
        &self.wedges
    }

    pub fn n_subbands(&self) -> usize {
        self.wedges.len()
    }

    /// `phi^2 + sum psi^2` per frequency bin.
    pub fn squared_sum(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.lowpass.iter().map(|v| v * v).collect();
        for w in &self.wedges {
            for (a, v) in s.iter_mut().zip(w) {
                *a += v * v;
            }
        }
        s
    }
}

/// Approximation and detail subbands, details in the bank's order.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    pub approx: Image,
    pub details: Vec<Image>,
}

impl CoefficientSet {
    /// Sum of squared coefficients over all subbands.
    pub fn energy(&self) -> f64 {
        self.approx.energy() + self.details.iter().map(Image::energy).sum::<f64>()
    }
}

fn filtered(spec: &Spectrum, window: &[f64]) -> Result<Image> {
    let data: Vec<Complex64> = spec.data.iter().zip(window).map(|(c, w)| c * w).collect();
    ifft2(&Spectrum {
        width: spec.width,
        height: spec.height,
        data,
    })
}

fn check_shape(bank: &CurveletFilterBank, img: &Image) -> Result<()> {
    if img.width() != bank.width || img.height() != bank.height {
        return Err(Error::input(format!(
            "image is {}x{} but the filter bank was built for {}x{}",
            img.width(),
            img.height(),
            bank.width,
            bank.height
        )));
    }
    Ok(())
}

/// Filters `v` with every window of the bank.
pub fn ect_forward(v: &Image, bank: &CurveletFilterBank) -> Result<CoefficientSet> {
    check_shape(bank, v)?;
    let spec = fft2(v)?;
    let approx = filtered(&spec, &bank.lowpass)?;
    let details = par::map(&bank.wedges, |w| filtered(&spec, w))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(CoefficientSet { approx, details })
}

/// Synthesis with the same windows; the inverse of [`ect_forward`] because
/// the squared windows sum to one.
pub fn ect_inverse(coeffs: &CoefficientSet, bank: &CurveletFilterBank) -> Result<Image> {
    if coeffs.details.len() != bank.wedges.len() {
        return Err(Error::input(format!(
            "{} detail subbands for a bank of {}",
            coeffs.details.len(),
            bank.wedges.len()
        )));
    }
    check_shape(bank, &coeffs.approx)?;
    for d in &coeffs.details {
        check_shape(bank, d)?;
    }
    let weighted = |img: &Image, w: &[f64]| -> Result<Vec<Complex64>> {
        Ok(fft2(img)?.data.iter().zip(w).map(|(c, w)| c * w).collect())
    };
    let mut acc = weighted(&coeffs.approx, &bank.lowpass)?;
    let parts = par::map_range(bank.wedges.len(), |i| {
        weighted(&coeffs.details[i], &bank.wedges[i])
    });
    for p in parts {
        for (a, b) in acc.iter_mut().zip(p?) {
            *a += b;
        }
    }
    ifft2(&Spectrum {
        width: bank.width,
        height: bank.height,
        data: acc,
    })
}

/// Detection, merging, bank construction and analysis in one call.
#[derive(Clone, Debug)]
pub struct ModifiedEct {
    pub analysis: SpectrumAnalysis,
    pub bank: CurveletFilterBank,
    pub coeffs: CoefficientSet,
}

pub fn modified_ect(v: &Image, params: &DetectionParams) -> Result<ModifiedEct> {
    let analysis = analyze_spectrum(v, params)?;
    let bank = build_filter_bank(&analysis.merged, None, v.width(), v.height())?;
    let coeffs = ect_forward(v, &bank)?;
    Ok(ModifiedEct {
        analysis,
        bank,
        coeffs,
    })
}

/// One detail entry of a subband dump manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubbandEntry {
    pub file: String,
    pub sector: usize,
    pub wedge: usize,
    pub inner_radius: f64,
    pub outer_radius: f64,
}

/// `manifest.json` of a subband dump; every grid is stored as raw
/// little-endian `f64`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubbandManifest {
    pub width: usize,
    pub height: usize,
    pub dtype: String,
    pub thetas: Vec<f64>,
    pub scales: Vec<Vec<f64>>,
    pub gamma: f64,
    pub delta_theta: f64,
    pub approx: String,
    pub subbands: Vec<SubbandEntry>,
}

const DTYPE: &str = "f64le";

fn write_grid(path: &Path, img: &Image) -> Result<()> {
    let bytes: Vec<u8> = img.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_grid(path: &Path, width: usize, height: usize) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != 8 * width * height {
        return Err(Error::input(format!(
            "{} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            8 * width * height
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Image::new(width, height, data)
}

/// Writes every subband to `dir` plus a `manifest.json` describing them.
pub fn write_subbands(
    dir: &Path,
    coeffs: &CoefficientSet,
    bank: &CurveletFilterBank,
) -> Result<SubbandManifest> {
    if coeffs.details.len() != bank.n_subbands() {
        return Err(Error::input("coefficients do not match the filter bank"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let part = bank.partition();
    let approx = "approx.f64".to_string();
    write_grid(&dir.join(&approx), &coeffs.approx)?;
    let mut subbands = Vec::new();
    for ((m, n), img) in part.subband_indices().into_iter().zip(&coeffs.details) {
        let file = format!("detail_{m}_{n}.f64");
        write_grid(&dir.join(&file), img)?;
        let (inner_radius, outer_radius) = part.wedge_radii(m, n);
        subbands.push(SubbandEntry {
            file,
            sector: m,
            wedge: n,
            inner_radius,
            outer_radius,
        });
    }
    let manifest = SubbandManifest {
        width: bank.width(),
        height: bank.height(),
        dtype: DTYPE.into(),
        thetas: part.thetas.clone(),
        scales: part.scales.clone(),
        gamma: bank.transition().gamma,
        delta_theta: bank.transition().delta_theta,
        approx,
        subbands,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Reads a dump written by [`write_subbands`].
pub fn read_subbands(dir: &Path) -> Result<(SubbandManifest, CoefficientSet)> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: SubbandManifest = serde_json::from_str(&text)?;
    if manifest.dtype != DTYPE {
        return Err(Error::input(format!(
            "unsupported dtype {}",
            manifest.dtype
        )));
    }
    let (w, h) = (manifest.width, manifest.height);
    let approx = read_grid(&dir.join(&manifest.approx), w, h)?;
    let details = manifest
        .subbands
        .iter()
        .map(|s| read_grid(&dir.join(&s.file), w, h))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, CoefficientSet { approx, details }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(w, h, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn two_sector() -> SpectrumPartition {
        SpectrumPartition::new(vec![0.3, 1.9], vec![vec![0.5, 1.2, 2.2], vec![0.5, 1.6]]).unwrap()
    }

    #[test]
    fn transition_polynomial() {
        assert_eq!(transition_b(0.0), 0.0);
        assert_eq!(transition_b(1.0), 1.0);
        assert_eq!(transition_b(-3.0), 0.0);
        assert_eq!(transition_b(4.0), 1.0);
        assert!((transition_b(0.5) - 0.5).abs() < 1e-15);
        for i in 1..10 {
            let t = i as f64 / 10.0;
            assert!((transition_b(t) + transition_b(1.0 - t) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ewt_1d_windows() {
        let bank = EwtFilterBank1d::new(vec![0.6, 1.4, 2.5], 0.2).unwrap();
        assert_eq!(bank.scaling(0.0), 1.0);
        // flat band of wavelet 0 is [(1+g) 0.6, (1-g) 1.4] = [0.72, 1.12]
        assert_eq!(bank.wavelet(0, 0.9), 1.0);
        // the last band has no upper taper
        assert_eq!(bank.wavelet(2, PI), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let w = rng.random_range(-PI..PI);
            let s = bank.scaling(w).powi(2)
                + (0..bank.n_wavelets())
                    .map(|n| bank.wavelet(n, w).powi(2))
                    .sum::<f64>();
            assert!((s - 1.0).abs() < 1e-10);
        }
        let sampled = bank.sample(11);
        assert_eq!(sampled.len(), 4);
        assert!(sampled.iter().all(|v| v.len() == 11));
        assert!(EwtFilterBank1d::new(vec![1.0, 1.2], 0.5).is_err());
        assert!(EwtFilterBank1d::new(vec![1.2, 1.0], 0.05).is_err());
    }

    #[test]
    fn radial_window_shape() {
        let part = two_sector();
        let g = 0.2;
        // wedge 0 of sector 0 is flat on [0.6, 0.96]
        assert_eq!(radial_window(0.8, 0, 0, &part, g), 1.0);
        assert_eq!(radial_window((1.0 - g) * 0.5, 0, 0, &part, g), 0.0);
        // the outermost wedge stays open
        assert_eq!(radial_window(4.0, 0, 2, &part, g), 1.0);
        // neighbours share the transition around 1.2
        for i in 0..=20 {
            let r = (1.0 - g) * 1.2 + i as f64 * 2.0 * g * 1.2 / 20.0;
            let s =
                radial_window(r, 0, 0, &part, g).powi(2) + radial_window(r, 0, 1, &part, g).powi(2);
            assert!((s - 1.0).abs() < 1e-12);
        }
        // midpoint of a transition
        assert!((radial_window(1.2, 0, 1, &part, g) - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn angular_window_shape() {
        let part = two_sector();
        let dt = 0.3;
        assert_eq!(angular_window(1.1, 0, &part, dt), 1.0);
        assert!((angular_window(0.3, 0, &part, dt) - 0.5f64.sqrt()).abs() < 1e-12);
        for i in 0..=20 {
            let t = 1.9 - dt + i as f64 * 2.0 * dt / 20.0;
            let s =
                angular_window(t, 0, &part, dt).powi(2) + angular_window(t, 1, &part, dt).powi(2);
            assert!((s - 1.0).abs() < 1e-12);
        }
        // wrap-around boundary at 0.3 + pi
        for i in 0..=20 {
            let t = 0.3 - dt + i as f64 * 2.0 * dt / 20.0;
            let s =
                angular_window(t, 0, &part, dt).powi(2) + angular_window(t, 1, &part, dt).powi(2);
            assert!((s - 1.0).abs() < 1e-12);
            assert!(
                (angular_window(t, 0, &part, dt) - angular_window(t + PI, 0, &part, dt)).abs()
                    < 1e-12
            );
        }
        let one = SpectrumPartition::trivial(0.4).unwrap();
        assert_eq!(angular_window(2.0, 0, &one, 0.1), 1.0);
    }

    #[test]
    fn derived_transitions_are_admissible() {
        let part = two_sector();
        let t = TransitionSpec::derive(&part);
        let bound: f64 = [(0.5, 1.2), (1.2, 2.2), (0.5, 1.6)]
            .iter()
            .map(|(a, b)| (b - a) / (b + a))
            .fold(1.0, f64::min);
        assert!((t.gamma - 0.9 * bound).abs() < 1e-15);
        // the wrap-around sector [1.9, 0.3 + pi] is the narrower one
        assert!((t.delta_theta - 0.45 * (PI - 1.6)).abs() < 1e-12);
        assert!(t.validate(&part).is_ok());
        let bad = TransitionSpec {
            gamma: bound * 1.01,
            ..t
        };
        assert!(bad.validate(&part).is_err());
    }

    #[test]
    fn bank_is_a_tight_frame() {
        for (part, w, h) in [
            (two_sector(), 64, 48),
            (SpectrumPartition::trivial(0.9).unwrap(), 32, 32),
            (
                SpectrumPartition::new(
                    vec![0.0, 0.7, 1.5, 2.6],
                    vec![
                        vec![0.6, 1.5],
                        vec![0.6],
                        vec![0.6, 1.0, 2.0],
                        vec![0.6, 2.4],
                    ],
                )
                .unwrap(),
                65,
                64,
            ),
        ] {
            let bank = build_filter_bank(&part, None, w, h).unwrap();
            let dev = bank
                .squared_sum()
                .iter()
                .map(|s| (s - 1.0).abs())
                .fold(0.0, f64::max);
            assert!(dev < 1e-12, "deviation {dev}");
            let all =
                std::iter::once(bank.lowpass()).chain(bank.wedges().iter().map(Vec::as_slice));
            for win in all {
                assert!(win.iter().all(|v| (0.0..=1.0 + 1e-15).contains(v)));
            }
            assert_eq!(bank.lowpass()[0], 1.0);
        }
    }

    #[test]
    fn minimal_partition_bank() {
        let bank =
            build_filter_bank(&SpectrumPartition::trivial(1.0).unwrap(), None, 16, 16).unwrap();
        assert_eq!(bank.n_subbands(), 1);
    }

    #[test]
    fn too_fine_partition_is_rejected() {
        let part = SpectrumPartition::new(vec![0.0], vec![vec![0.05, 0.06]]).unwrap();
        let err = build_filter_bank(&part, None, 32, 32).unwrap_err();
        assert!(err.to_string().contains("narrower than one"));
    }

    #[test]
    fn round_trip_and_parseval() {
        let part = two_sector();
        let bank = build_filter_bank(&part, None, 64, 64).unwrap();
        for seed in 0..5 {
            let v = random_image(64, 64, seed);
            let c = ect_forward(&v, &bank).unwrap();
            let back = ect_inverse(&c, &bank).unwrap();
            let err = v
                .data()
                .iter()
                .zip(back.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "{err}");
            assert!((c.energy() - v.energy()).abs() <= 1e-8 * v.energy());
            assert!((back.mean() - v.mean()).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_goes_to_the_approximation() {
        let bank = build_filter_bank(&two_sector(), None, 32, 32).unwrap();
        let v = Image::filled(32, 32, 4.0).unwrap();
        let c = ect_forward(&v, &bank).unwrap();
        assert!(c.approx.data().iter().all(|x| (x - 4.0).abs() < 1e-10));
        assert!(c
            .details
            .iter()
            .all(|d| d.data().iter().all(|x| x.abs() < 1e-10)));
    }

    #[test]
    fn sinusoid_in_a_flat_band_lands_in_one_subband() {
        let part = two_sector();
        let bank = build_filter_bank(&part, None, 64, 64).unwrap();
        let gamma = bank.transition().gamma;
        let (kx, ky) = (4.0, 7.0);
        let v = Image::from_fn(64, 64, |x, y| {
            (2.0 * PI * (kx * x as f64 + ky * y as f64) / 64.0).cos()
        })
        .unwrap();
        let r = 2.0 * PI * (kx * kx + ky * ky).sqrt() / 64.0;
        let theta = ky.atan2(kx);
        let dt = bank.transition().delta_theta;
        assert!(0.3 + dt < theta && theta < 1.9 - dt);
        assert!((1.0 + gamma) * 0.5 < r && r < (1.0 - gamma) * 1.2);
        let c = ect_forward(&v, &bank).unwrap();
        for (i, d) in c.details.iter().enumerate() {
            let err = if i == 0 {
                d.data()
                    .iter()
                    .zip(v.data())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            } else {
                d.data().iter().map(|a| a.abs()).fold(0.0, f64::max)
            };
            assert!(err < 1e-8, "subband {i}: {err}");
        }
    }

    #[test]
    fn forward_is_linear_and_inverse_of_zero_is_zero() {
        let bank = build_filter_bank(&two_sector(), None, 32, 32).unwrap();
        let (a, b) = (random_image(32, 32, 1), random_image(32, 32, 2));
        let mix = a.zip_map(&b, |x, y| 2.0 * x - 0.5 * y).unwrap();
        let (ca, cb, cm) = (
            ect_forward(&a, &bank).unwrap(),
            ect_forward(&b, &bank).unwrap(),
            ect_forward(&mix, &bank).unwrap(),
        );
        for k in 0..bank.n_subbands() {
            for ((x, y), z) in ca.details[k]
                .data()
                .iter()
                .zip(cb.details[k].data())
                .zip(cm.details[k].data())
            {
                assert!((2.0 * x - 0.5 * y - z).abs() < 1e-10);
            }
        }
        let zero = CoefficientSet {
            approx: Image::zeros(32, 32).unwrap(),
            details: vec![Image::zeros(32, 32).unwrap(); bank.n_subbands()],
        };
        assert!(ect_inverse(&zero, &bank)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn coefficients_of_the_range_are_reproduced() {
        let bank = build_filter_bank(&two_sector(), None, 32, 32).unwrap();
        let c = ect_forward(&random_image(32, 32, 9), &bank).unwrap();
        let again = ect_forward(&ect_inverse(&c, &bank).unwrap(), &bank).unwrap();
        for (x, y) in c.details.iter().zip(&again.details) {
            for (a, b) in x.data().iter().zip(y.data()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let bank = build_filter_bank(&two_sector(), None, 32, 32).unwrap();
        assert!(ect_forward(&random_image(16, 32, 0), &bank).is_err());
        let c = ect_forward(&random_image(32, 32, 0), &bank).unwrap();
        let short = CoefficientSet {
            approx: c.approx.clone(),
            details: c.details[..1].to_vec(),
        };
        assert!(ect_inverse(&short, &bank).is_err());
    }

    #[test]
    fn subband_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let bank = build_filter_bank(&two_sector(), None, 24, 20).unwrap();
        let c = ect_forward(&random_image(24, 20, 4), &bank).unwrap();
        let m = write_subbands(dir.path(), &c, &bank).unwrap();
        assert_eq!(m.subbands.len(), 5);
        assert_eq!(m.subbands[2].file, "detail_0_2.f64");
        assert_eq!(m.subbands[2].outer_radius, PI);
        let (m2, c2) = read_subbands(dir.path()).unwrap();
        assert_eq!(m, m2);
        assert_eq!(c, c2);
        let raw = std::fs::read(dir.path().join("approx.f64")).unwrap();
        assert_eq!(raw.len(), 24 * 20 * 8);
    }

    #[test]
    fn crowded_partition_is_coarsened_to_the_grid() {
        let part = SpectrumPartition::new(
            vec![0.0, 0.02, 1.5],
            vec![
                vec![0.32, 0.37, 1.2],
                vec![0.32, 2.0],
                vec![0.32, 0.8, 0.85, 2.5],
            ],
        )
        .unwrap();
        assert!(build_filter_bank(&part, None, 128, 128).is_err());
        let (fit, removed) = fit_partition_to_grid(&part, 128, 128).unwrap();
        assert!(removed >= 2);
        let bank = build_filter_bank(&fit, None, 128, 128).unwrap();
        assert!(bank.squared_sum().iter().all(|v| (v - 1.0).abs() < 1e-9));
        for t in &fit.thetas {
            assert!(part.thetas.contains(t));
        }
        for s in &fit.scales {
            assert!(s
                .iter()
                .all(|r| part.scales.iter().flatten().any(|q| q == r)));
        }
        // a partition that already fits is returned unchanged
        let (same, none) = fit_partition_to_grid(&two_sector(), 128, 128).unwrap();
        assert_eq!((same, none), (two_sector(), 0));
    }

    #[test]
    fn sub_bin_lowpass_radius_is_raised() {
        let part = SpectrumPartition::new(vec![0.3, 1.9], vec![vec![0.02, 0.025, 1.0], vec![0.02]])
            .unwrap();
        let (fit, _) = fit_partition_to_grid(&part, 128, 128).unwrap();
        assert_eq!(fit.omega1(), 2.0 * PI / 128.0);
        assert_eq!(fit.scales[0], vec![2.0 * PI / 128.0, 1.0]);
        assert_eq!(fit.scales[1], vec![2.0 * PI / 128.0]);
        assert!(build_filter_bank(&fit, None, 128, 128).is_ok());
    }
}
