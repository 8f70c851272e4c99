//! Cartoon + texture split. The nonlinear mode blends the image with its
//! Meyer-type low-pass version according to how much local total variation
//! the low-pass removes; the linear mode is the plain low-pass/high-pass pair.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::imagecore::{fourier_filter, gradient_magnitude, FourierBoundary, Image};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionParams {
    /// Scale of the low-pass filter in pixels.
    pub sigma: f64,
    /// Lower knot of the soft threshold.
    pub a1: f64,
    /// Upper knot of the soft threshold.
    pub a2: f64,
    /// Local total variation below this is treated as flat (reduction rate 0).
    pub ltv_floor: f64,
}

impl Default for DecompositionParams {
    fn default() -> Self {
        Self {
            sigma: 3.0,
            a1: 0.25,
            a2: 0.50,
            ltv_floor: 1e-8,
        }
    }
}

impl DecompositionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::param(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if !(0.0 < self.a1 && self.a1 < self.a2 && self.a2 < 1.0) {
            return Err(Error::param(format!(
                "soft-threshold knots need 0 < a1 < a2 < 1, got a1={} a2={}",
                self.a1, self.a2
            )));
        }
        if !(self.ltv_floor > 0.0) {
            return Err(Error::param("ltv_floor must be positive"));
        }
        Ok(())
    }
}

/// `f = cartoon + texture`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub cartoon: Image,
    pub texture: Image,
}

/// Fourier response of the low-pass filter at `|xi|` cycles per pixel.
#[inline]
pub fn meyer_lowpass_gain(sigma: f64, xi_norm: f64) -> f64 {
    1.0 / (1.0 + (2.0 * PI * sigma * xi_norm).powi(4))
}

/// `L_sigma * f`, evaluated on the mirror-extended image.
pub fn lowpass_meyer(f: &Image, sigma: f64) -> Result<Image> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("sigma must be > 0, got {sigma}")));
    }
    fourier_filter(f, FourierBoundary::Symmetric, |fx, fy| {
        meyer_lowpass_gain(sigma, fx.hypot(fy))
    })
}

/// `L_sigma * |grad f|`.
pub fn local_total_variation(f: &Image, sigma: f64) -> Result<Image> {
    lowpass_meyer(&gradient_magnitude(f)?, sigma)
}

fn ltv_reduction_with(f: &Image, lowpassed: &Image, params: &DecompositionParams) -> Result<Image> {
    let ltv_f = local_total_variation(f, params.sigma)?;
    let ltv_low = local_total_variation(lowpassed, params.sigma)?;
    let floor = params.ltv_floor;
    ltv_f.zip_map(&ltv_low, |a, b| {
        if a < floor {
            0.0
        } else {
            ((a - b) / a).clamp(0.0, 1.0)
        }
    })
}

/// Relative reduction of local total variation under the low-pass, clamped
/// to `[0, 1]`; flat neighbourhoods map to 0.
pub fn ltv_reduction(f: &Image, params: &DecompositionParams) -> Result<Image> {
    params.validate()?;
    let low = lowpass_meyer(f, params.sigma)?;
    ltv_reduction_with(f, &low, params)
}

/// Piecewise-linear ramp: 0 below `a1`, 1 above `a2`.
pub fn soft_threshold_weight(x: f64, a1: f64, a2: f64) -> f64 {
    if x < a1 {
        0.0
    } else if x > a2 {
        1.0
    } else {
        (x - a1) / (a2 - a1)
    }
}

/// Splits `f` into `(u', f - u')` with `u'` as close to `u` as possible such
/// that `u' + (f - u') == f` holds in floating point.
///
/// `u` is snapped to the power-of-two grid of the pair's largest magnitude.
/// This makes the split exact whenever `f` lies on that grid, which covers
/// integer and dyadic gray levels. Otherwise the plain difference is kept.
pub fn exact_split(f: f64, u: f64) -> (f64, f64) {
    let v = f - u;
    if u + v == f {
        return (u, v);
    }
    let m = f.abs().max(u.abs()).max(v.abs());
    let exp = ((m.to_bits() >> 52) & 0x7ff) as i32 - 1023;
    let grid = 2f64.powi(exp + 1 - 52);
    let snapped = (u / grid).round() * grid;
    let sv = f - snapped;
    if snapped + sv == f {
        (snapped, sv)
    } else {
        (u, v)
    }
}

fn assemble(f: &Image, cartoon: Vec<f64>) -> Decomposition {
    let (mut u, mut v) = (Vec::with_capacity(f.len()), Vec::with_capacity(f.len()));
    for (&fv, &uv) in f.data().iter().zip(&cartoon) {
        let (a, b) = exact_split(fv, uv);
        u.push(a);
        v.push(b);
    }
    Decomposition {
        cartoon: Image::from_raw(f.width(), f.height(), u),
        texture: Image::from_raw(f.width(), f.height(), v),
    }
}

/// Nonlinear decomposition with an arbitrary blending weight applied to the
/// reduction rate. [`decompose`] uses the soft threshold.
pub fn decompose_weighted(
    f: &Image,
    params: &DecompositionParams,
    weight: impl Fn(f64) -> f64,
) -> Result<Decomposition> {
    params.validate()?;
    let low = lowpass_meyer(f, params.sigma)?;
    let rate = ltv_reduction_with(f, &low, params)?;
    let cartoon = rate
        .data()
        .iter()
        .zip(low.data())
        .zip(f.data())
        .map(|((&l, &lf), &fv)| {
            let w = weight(l);
            w * lf + (1.0 - w) * fv
        })
        .collect();
    Ok(assemble(f, cartoon))
}

pub fn decompose(f: &Image, params: &DecompositionParams) -> Result<Decomposition> {
    let (a1, a2) = (params.a1, params.a2);
    decompose_weighted(f, params, |l| soft_threshold_weight(l, a1, a2))
}

/// `(L_sigma * f, f - L_sigma * f)`.
pub fn decompose_linear(f: &Image, sigma: f64) -> Result<Decomposition> {
    let low = lowpass_meyer(f, sigma)?;
    Ok(assemble(f, low.into_data()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cell_parity(x: usize, y: usize) -> bool {
        (x + y).is_multiple_of(2)
    }

    fn ramp_plus_checker(n: usize, checker_amp: f64) -> (Image, Image, Image) {
        let ramp = Image::from_fn(n, n, |x, _| 40.0 + 2.0 * x as f64).unwrap();
        let checker = Image::from_fn(n, n, |x, y| {
            if cell_parity(x, y) {
                checker_amp
            } else {
                -checker_amp
            }
        })
        .unwrap();
        let f = ramp.zip_map(&checker, |a, b| a + b).unwrap();
        (f, ramp, checker)
    }

    #[test]
    fn weight_branches() {
        assert_eq!(soft_threshold_weight(0.1, 0.25, 0.5), 0.0);
        assert_eq!(soft_threshold_weight(0.375, 0.25, 0.5), 0.5);
        assert_eq!(soft_threshold_weight(0.6, 0.25, 0.5), 1.0);
    }

    #[test]
    fn params_validation() {
        assert!(DecompositionParams::default().validate().is_ok());
        let bad = DecompositionParams {
            a1: 0.6,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = DecompositionParams {
            sigma: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn lowpass_keeps_constants() {
        let f = Image::filled(12, 9, 42.0).unwrap();
        let u = lowpass_meyer(&f, 3.0).unwrap();
        assert!(u.data().iter().all(|v| (v - 42.0).abs() < 1e-10));
    }

    #[test]
    fn lowpass_halves_the_knee_frequency() {
        // half-sample-shifted cosine: its mirror extension is a pure tone
        let (n, k) = (32usize, 4usize);
        let f = Image::from_fn(n, n, |x, _| {
            (2.0 * PI * k as f64 * (x as f64 + 0.5) / n as f64).cos()
        })
        .unwrap();
        let sigma = n as f64 / (2.0 * PI * k as f64);
        let u = lowpass_meyer(&f, sigma).unwrap();
        for (a, b) in f.data().iter().zip(u.data()) {
            assert!((0.5 * a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn lowpass_never_adds_energy() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let f = Image::from_fn(32, 32, |_, _| rng.random_range(0.0..255.0)).unwrap();
        let u = lowpass_meyer(&f, 2.0).unwrap();
        assert!(u.energy() <= f.energy());
    }

    #[test]
    fn constant_image_is_pure_cartoon() {
        let f = Image::filled(16, 16, 100.0).unwrap();
        let rate = ltv_reduction(&f, &DecompositionParams::default()).unwrap();
        assert!(rate.data().iter().all(|&v| v == 0.0));
        let d = decompose(&f, &DecompositionParams::default()).unwrap();
        assert_eq!(d.cartoon, f);
        assert!(d.texture.data().iter().all(|&v| v == 0.0));
        let lin = decompose_linear(&f, 3.0).unwrap();
        assert!(lin.texture.data().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn checkerboard_reduction_is_high_and_ramp_reduction_low() {
        let p = DecompositionParams::default();
        let checker =
            Image::from_fn(48, 48, |x, y| if cell_parity(x, y) { 200.0 } else { 50.0 }).unwrap();
        let rate = ltv_reduction(&checker, &p).unwrap();
        for y in 4..44 {
            for x in 4..44 {
                assert!(rate.get(x, y) >= 0.9, "({x},{y}) {}", rate.get(x, y));
            }
        }
        let ramp = Image::from_fn(48, 48, |x, y| x as f64 + 0.5 * y as f64).unwrap();
        let rate = ltv_reduction(&ramp, &p).unwrap();
        for y in 8..40 {
            for x in 8..40 {
                assert!(rate.get(x, y) <= 0.1, "({x},{y}) {}", rate.get(x, y));
            }
        }
    }

    #[test]
    fn rate_is_in_unit_interval() {
        let (f, _, _) = ramp_plus_checker(40, 20.0);
        let rate = ltv_reduction(&f, &DecompositionParams::default()).unwrap();
        assert!(rate.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn ramp_plus_checker_separates() {
        let (f, ramp, checker) = ramp_plus_checker(64, 20.0);
        let d = decompose(&f, &DecompositionParams::default()).unwrap();
        let captured: f64 = d
            .texture
            .data()
            .iter()
            .zip(checker.data())
            .map(|(t, c)| t * c)
            .sum::<f64>()
            / checker.energy();
        assert!(captured >= 0.9, "captured {captured}");
        let err = d
            .cartoon
            .zip_map(&ramp, |a, b| a - b)
            .unwrap()
            .energy()
            .sqrt()
            / ramp.energy().sqrt();
        assert!(err <= 0.1, "cartoon error {err}");
        // re-decomposing the cartoon finds little texture left
        let again = decompose(&d.cartoon, &DecompositionParams::default()).unwrap();
        assert!(again.texture.energy().sqrt() <= 0.2 * d.texture.energy().sqrt());
    }

    #[test]
    fn additivity_is_bit_exact() {
        let (f, _, _) = ramp_plus_checker(40, 17.0);
        for d in [
            decompose(&f, &DecompositionParams::default()).unwrap(),
            decompose_linear(&f, 3.0).unwrap(),
        ] {
            for ((u, v), x) in d.cartoon.data().iter().zip(d.texture.data()).zip(f.data()) {
                assert_eq!(u + v, *x);
            }
        }
    }

    #[test]
    fn unit_weight_reproduces_linear_mode() {
        let (f, _, _) = ramp_plus_checker(32, 10.0);
        let p = DecompositionParams::default();
        let forced = decompose_weighted(&f, &p, |_| 1.0).unwrap();
        let lin = decompose_linear(&f, p.sigma).unwrap();
        assert_eq!(forced, lin);
    }

    #[test]
    fn nonlinear_cartoon_keeps_step_edges_sharper() {
        let f = Image::from_fn(64, 64, |x, _| if x < 32 { 40.0 } else { 200.0 }).unwrap();
        let p = DecompositionParams::default();
        let nl = decompose(&f, &p).unwrap();
        let lin = decompose_linear(&f, p.sigma).unwrap();
        let max_grad = |img: &Image| {
            gradient_magnitude(img)
                .unwrap()
                .data()
                .iter()
                .cloned()
                .fold(0.0, f64::max)
        };
        assert!(max_grad(&nl.cartoon) > max_grad(&lin.cartoon));
    }

    proptest! {
        #[test]
        fn split_is_exact_for_integer_levels(f in 0u32..65536, u in -300.0f64..70000.0) {
            let (a, b) = exact_split(f as f64, u);
            prop_assert_eq!(a + b, f as f64);
            prop_assert!((a - u).abs() <= 1e-9 * u.abs().max(1.0));
        }

        #[test]
        fn split_is_exact_for_dyadic_levels(q in 0i64..(255 * 1024), u in -300.0f64..600.0) {
            let f = q as f64 / 1024.0;
            let (a, b) = exact_split(f, u);
            prop_assert_eq!(a + b, f);
        }
    }
}
