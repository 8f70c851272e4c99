//! Synthetic scenes with known cartoon and texture labels.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{Image, LabelMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneKind {
    FourQuadrant,
    RampBias,
    Stripes,
    Composite,
}

impl std::fmt::Display for SceneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FourQuadrant => "four-quadrant",
            Self::RampBias => "ramp-bias",
            Self::Stripes => "stripes",
            Self::Composite => "composite",
        })
    }
}

impl std::str::FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "four-quadrant" => Ok(Self::FourQuadrant),
            "ramp-bias" => Ok(Self::RampBias),
            "stripes" => Ok(Self::Stripes),
            "composite" => Ok(Self::Composite),
            other => Err(Error::input(format!("unknown scene kind '{other}'"))),
        }
    }
}

/// One oriented sinusoid: `amplitude * cos(2 pi (x cos a + y sin a) / period)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripeField {
    pub angle_deg: f64,
    pub period: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    /// Quadrant intensities: top-left, top-right, bottom-left, bottom-right.
    pub quadrant_values: [f64; 4],
    /// Peak-to-peak size of the left-to-right illumination ramp.
    pub ramp_amplitude: f64,
    /// Texture fields, laid out as equal vertical bands from left to right.
    pub stripes: Vec<StripeField>,
    /// Mean level of the stripes scene.
    pub stripe_offset: f64,
    pub noise_std: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            quadrant_values: [10.0, 80.0, 160.0, 240.0],
            ramp_amplitude: 40.0,
            stripes: vec![
                StripeField {
                    angle_deg: 0.0,
                    period: 6.0,
                    amplitude: 40.0,
                },
                StripeField {
                    angle_deg: 60.0,
                    period: 10.0,
                    amplitude: 40.0,
                },
            ],
            stripe_offset: 128.0,
            noise_std: 0.0,
        }
    }
}

impl SceneParams {
    /// Defaults for one kind of scene. The composite's quadrant levels leave
    /// room for the stripes inside the 8-bit range.
    pub fn for_kind(kind: SceneKind) -> Self {
        let mut p = Self::default();
        if kind == SceneKind::Composite {
            p.quadrant_values = [50.0, 100.0, 150.0, 200.0];
        }
        p
    }
}

/// Image with its ground-truth label maps.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub image: Image,
    pub cartoon_truth: LabelMap,
    pub texture_truth: LabelMap,
}

fn quadrant(x: usize, y: usize, w: usize, h: usize) -> usize {
    usize::from(x >= w / 2) + 2 * usize::from(y >= h / 2)
}

fn band(x: usize, w: usize, n: usize) -> usize {
    (x * n / w).min(n - 1)
}

fn stripe(f: &StripeField, x: usize, y: usize) -> f64 {
    let a = f.angle_deg.to_radians();
    f.amplitude * (2.0 * PI * (x as f64 * a.cos() + y as f64 * a.sin()) / f.period).cos()
}

/// Integer gray levels, so a scene inside `[0, 255]` survives an 8-bit file.
fn quantize(v: f64) -> f64 {
    v.round()
}

pub fn synth_generate(kind: SceneKind, params: &SceneParams, seed: u64) -> Result<SyntheticScene> {
    let (w, h) = (params.width, params.height);
    if w < 2 || h < 2 {
        return Err(Error::input(format!(
            "scene must be at least 2x2, got {w}x{h}"
        )));
    }
    if !(params.noise_std >= 0.0 && params.noise_std.is_finite()) {
        return Err(Error::input(format!(
            "noise std must be >= 0, got {}",
            params.noise_std
        )));
    }
    let uses_stripes = matches!(kind, SceneKind::Stripes | SceneKind::Composite);
    if uses_stripes {
        if params.stripes.is_empty() || params.stripes.len() > w {
            return Err(Error::input(format!(
                "need between 1 and {w} stripe fields, got {}",
                params.stripes.len()
            )));
        }
        if params
            .stripes
            .iter()
            .any(|s| !(s.period > 0.0 && s.period.is_finite()))
        {
            return Err(Error::input("stripe periods must be positive"));
        }
    }
    let n_bands = params.stripes.len().max(1);
    let ramp = |x: usize| params.ramp_amplitude * x as f64 / (w - 1) as f64;
    let base = |x: usize, y: usize| -> f64 {
        match kind {
            SceneKind::FourQuadrant => params.quadrant_values[quadrant(x, y, w, h)],
            SceneKind::RampBias => params.quadrant_values[quadrant(x, y, w, h)] + ramp(x),
            SceneKind::Stripes => {
                params.stripe_offset + stripe(&params.stripes[band(x, w, n_bands)], x, y)
            }
            SceneKind::Composite => {
                params.quadrant_values[quadrant(x, y, w, h)]
                    + stripe(&params.stripes[band(x, w, n_bands)], x, y)
            }
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if params.noise_std > 0.0 {
        Some(Normal::new(0.0, params.noise_std).map_err(|e| Error::input(e.to_string()))?)
    } else {
        None
    };
    let image = Image::from_fn(w, h, |x, y| {
        let n = noise.as_ref().map_or(0.0, |d| d.sample(&mut rng));
        quantize(base(x, y) + n)
    })?;
    let cartoon: Vec<u32> = (0..h)
        .flat_map(|y| (0..w).map(move |x| quadrant(x, y, w, h) as u32))
        .collect();
    let texture: Vec<u32> = (0..h)
        .flat_map(|_| {
            (0..w).map(|x| {
                if uses_stripes {
                    band(x, w, n_bands) as u32
                } else {
                    0
                }
            })
        })
        .collect();
    let cartoon = if uses_stripes && kind == SceneKind::Stripes {
        vec![0; w * h]
    } else {
        cartoon
    };
    Ok(SyntheticScene {
        image,
        cartoon_truth: LabelMap::new(w, h, cartoon)?,
        texture_truth: LabelMap::new(w, h, texture)?,
    })
}
