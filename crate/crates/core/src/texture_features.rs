//! Per-pixel local energy of every curvelet detail subband, stacked into a
//! feature matrix with one row per pixel.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::empirical_curvelet::CoefficientSet;
use crate::error::{Error, Result};
use crate::imagecore::{reflect_index, Image};
use crate::par;
use crate::spectral_partition::SpectrumPartition;

/// Half-width of the energy window for a subband starting at radius `omega`:
/// `ceil(pi / omega)`, at least 1.
pub fn window_radius(omega: f64) -> Result<usize> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::param(format!(
            "window frequency must be positive, got {omega}"
        )));
    }
    // the tolerance keeps exact divisors such as pi/4 from rounding up
    Ok(((PI / omega) - 1e-9).ceil().max(1.0) as usize)
}

/// Sums of `values` over `2r+1` consecutive entries along one axis, with
/// half-sample mirroring at the ends.
fn box_sum_1d(values: &[f64], r: usize, out: &mut [f64]) {
    let n = values.len();
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for d in -(r as isize)..=(r as isize) {
            s += values[reflect_index(i as isize + d, n)];
        }
        *o = s;
    }
}

/// `sqrt(sum of squares over the (2r+1)^2 window) / (2r+1)^2`, symmetric
/// padding at the borders.
pub fn local_energy(subband: &Image, r: usize) -> Result<Image> {
    if r == 0 {
        return Err(Error::param("energy window radius must be at least 1"));
    }
    let (w, h) = (subband.width(), subband.height());
    let sq: Vec<f64> = subband.data().iter().map(|v| v * v).collect();
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        box_sum_1d(&sq[y * w..(y + 1) * w], r, &mut rows[y * w..(y + 1) * w]);
    }
    let area = ((2 * r + 1) * (2 * r + 1)) as f64;
    let mut out = vec![0.0; w * h];
    let mut col = vec![0.0; h];
    let mut summed = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = rows[y * w + x];
        }
        box_sum_1d(&col, r, &mut summed);
        for y in 0..h {
            out[y * w + x] = summed[y].sqrt() / area;
        }
    }
    Image::new(w, h, out)
}

/// Pixel-by-subband energy matrix, row-major: row `y * width + x`, one column
/// per detail subband in sector-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    /// `(sector, wedge)` of each column; `None` marks an appended
    /// approximation column.
    labels: Vec<Option<(usize, usize)>>,
    radii: Vec<usize>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::input(format!(
                "{} entries do not form a {rows}x{cols} feature matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("feature matrix has non-finite entries"));
        }
        Ok(Self {
            rows,
            cols,
            data,
            labels: vec![None; cols],
            radii: vec![0; cols],
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols + j])
            .collect()
    }

    pub fn column_labels(&self) -> &[Option<(usize, usize)>] {
        &self.labels
    }

    pub fn radii(&self) -> &[usize] {
        &self.radii
    }

    /// Writes `<stem>.f64` (row-major little-endian) and `<stem>.json`.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<FeatureManifest> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let file = format!("{stem}.f64");
        let path = dir.join(&file);
        let bytes: Vec<u8> = self.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        let manifest = FeatureManifest {
            rows: self.rows,
            cols: self.cols,
            dtype: "f64le".into(),
            file,
            columns: self
                .labels
                .iter()
                .zip(&self.radii)
                .map(|(l, &radius)| FeatureColumn {
                    sector: l.map(|(m, _)| m),
                    wedge: l.map(|(_, n)| n),
                    radius,
                })
                .collect(),
        };
        let path = dir.join(format!("{stem}.json"));
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }

    /// Reads a matrix written by [`FeatureMatrix::export`].
    pub fn import(dir: &Path, stem: &str) -> Result<Self> {
        let path = dir.join(format!("{stem}.json"));
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: FeatureManifest = serde_json::from_str(&text)?;
        if m.dtype != "f64le" || m.columns.len() != m.cols {
            return Err(Error::input(format!(
                "{} is not a feature manifest",
                path.display()
            )));
        }
        let path = dir.join(&m.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if bytes.len() != 8 * m.rows * m.cols {
            return Err(Error::input(format!(
                "{} has the wrong size",
                path.display()
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let mut out = Self::new(m.rows, m.cols, data)?;
        for (j, c) in m.columns.iter().enumerate() {
            out.labels[j] = c.sector.zip(c.wedge);
            out.radii[j] = c.radius;
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub sector: Option<usize>,
    pub wedge: Option<usize>,
    pub radius: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub file: String,
    pub columns: Vec<FeatureColumn>,
}

/// Sector and scale index of a wedge.
type Wedge = (usize, usize);

/// Energy of every detail subband with radius `window_radius(omega_n^m)`,
/// `omega_n^m` being the inner radius of wedge `(m, n)`. With
/// `include_approx`, the approximation is appended as a last column using the
/// radius of `omega1`.
pub fn feature_matrix(
    coeffs: &CoefficientSet,
    part: &SpectrumPartition,
    include_approx: bool,
) -> Result<FeatureMatrix> {
    part.validate()?;
    let idx = part.subband_indices();
    if idx.len() != coeffs.details.len() {
        return Err(Error::input(format!(
            "{} detail subbands for a partition with {}",
            coeffs.details.len(),
            idx.len()
        )));
    }
    let (w, h) = (coeffs.approx.width(), coeffs.approx.height());
    for d in &coeffs.details {
        coeffs.approx.ensure_same_shape(d, "feature_matrix")?;
    }
    // (subband, wedge index or None for the approximation, window radius)
    let mut jobs: Vec<(&Image, Option<Wedge>, usize)> = Vec::with_capacity(idx.len() + 1);
    for (&(m, n), img) in idx.iter().zip(&coeffs.details) {
        jobs.push((img, Some((m, n)), window_radius(part.scales[m][n])?));
    }
    if include_approx {
        jobs.push((&coeffs.approx, None, window_radius(part.omega1())?));
    }
    let maps = par::map(&jobs, |&(img, _, r)| local_energy(img, r))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let cols = jobs.len();
    let rows = w * h;
    let mut data = vec![0.0; rows * cols];
    for (j, map) in maps.iter().enumerate() {
        for (i, &v) in map.data().iter().enumerate() {
            data[i * cols + j] = v;
        }
    }
    let mut out = FeatureMatrix::new(rows, cols, data)?;
    out.labels = jobs.iter().map(|j| j.1).collect();
    out.radii = jobs.iter().map(|j| j.2).collect();
    Ok(out)
}
