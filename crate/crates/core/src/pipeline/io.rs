//! Raster input and label-map output.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{Image, LabelMap};

/// Min-max rescale applied to a 16-bit input: `out = (raw - min) * factor`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rescale {
    pub min: f64,
    pub max: f64,
    pub factor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedImage {
    pub image: Image,
    pub bit_depth: u8,
    /// Set for 16-bit inputs.
    pub rescale: Option<Rescale>,
}

fn codec_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Step of the grid rescaled 16-bit values are rounded to. Keeping inputs on
/// a dyadic grid lets the cartoon/texture split add up exactly.
pub const RESCALE_STEP: f64 = 1.0 / 1024.0;

/// Reads an 8- or 16-bit single-channel raster (PNG or PGM). 16-bit data are
/// mapped linearly onto `[0, 255]` and rounded to [`RESCALE_STEP`]; a
/// constant 16-bit image maps to 0.
pub fn load_image(path: &Path) -> Result<LoadedImage> {
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| codec_error(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => Ok(LoadedImage {
            image: Image::new(w, h, buf.into_raw().into_iter().map(f64::from).collect())?,
            bit_depth: 8,
            rescale: None,
        }),
        DynamicImage::ImageLuma16(buf) => {
            let raw: Vec<f64> = buf.into_raw().into_iter().map(f64::from).collect();
            let (min, max) = raw
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                });
            let factor = if max > min { 255.0 / (max - min) } else { 0.0 };
            Ok(LoadedImage {
                image: Image::new(
                    w,
                    h,
                    raw.iter()
                        .map(|v| ((v - min) * factor / RESCALE_STEP).round() * RESCALE_STEP)
                        .collect(),
                )?,
                bit_depth: 16,
                rescale: Some(Rescale { min, max, factor }),
            })
        }
        other => Err(codec_error(
            path,
            format!("expected a single-channel image, found {:?}", other.color()),
        )),
    }
}

/// Writes an image clamped and rounded to 8 bits.
pub fn save_gray(path: &Path, img: &Image) -> Result<()> {
    let buf = GrayImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        Luma([img.get(x as usize, y as usize).round().clamp(0.0, 255.0) as u8])
    });
    buf.save(path).map_err(|e| codec_error(path, e))
}

/// Writes the raw label values: 8-bit when they fit, 16-bit otherwise.
pub fn save_label_map(path: &Path, labels: &LabelMap) -> Result<()> {
    let (w, h) = (labels.width() as u32, labels.height() as u32);
    let max = labels.labels().iter().copied().max().unwrap_or(0);
    if max <= u8::MAX as u32 {
        GrayImage::from_fn(w, h, |x, y| {
            Luma([labels.get(x as usize, y as usize) as u8])
        })
        .save(path)
        .map_err(|e| codec_error(path, e))
    } else if max <= u16::MAX as u32 {
        ImageBuffer::<Luma<u16>, Vec<u16>>::from_fn(w, h, |x, y| {
            Luma([labels.get(x as usize, y as usize) as u16])
        })
        .save(path)
        .map_err(|e| codec_error(path, e))
    } else {
        Err(Error::input(format!("label {max} does not fit in 16 bits")))
    }
}

/// Reads a map written by [`save_label_map`].
pub fn load_label_map(path: &Path) -> Result<LabelMap> {
    let img = image::open(path).map_err(|e| codec_error(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let labels: Vec<u32> = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u32::from).collect(),
        DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(u32::from).collect(),
        other => {
            return Err(codec_error(
                path,
                format!("label maps are single-channel, found {:?}", other.color()),
            ))
        }
    };
    LabelMap::new(w, h, labels)
}

const PALETTE: [[u8; 3]; 10] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
];

/// Writes a colour rendering of a label map.
pub fn save_colorized(path: &Path, labels: &LabelMap) -> Result<()> {
    RgbImage::from_fn(labels.width() as u32, labels.height() as u32, |x, y| {
        Rgb(PALETTE[labels.get(x as usize, y as usize) as usize % PALETTE.len()])
    })
    .save(path)
    .map_err(|e| codec_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let labels = LabelMap::new(5, 3, (0..15).map(|i| i % 4).collect()).unwrap();
        let p = dir.path().join("l.png");
        save_label_map(&p, &labels).unwrap();
        assert_eq!(load_label_map(&p).unwrap(), labels);
        let wide = LabelMap::new(2, 2, vec![0, 300, 7, 65535]).unwrap();
        save_label_map(&p, &wide).unwrap();
        assert_eq!(load_label_map(&p).unwrap(), wide);
        save_colorized(&dir.path().join("c.png"), &labels).unwrap();
        assert!(load_label_map(&dir.path().join("c.png")).is_err());
    }

    #[test]
    fn constant_image_loads_uniform() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        GrayImage::from_pixel(4, 3, Luma([77])).save(&p).unwrap();
        let l = load_image(&p).unwrap();
        assert_eq!(l.bit_depth, 8);
        assert!(l.image.data().iter().all(|&v| v == 77.0));
        assert_eq!(l.rescale, None);
    }

    #[test]
    fn sixteen_bit_is_rescaled() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.png");
        let raw: Vec<u16> = vec![1000, 2000, 3000, 5000, 1000, 4000];
        ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(3, 2, raw.clone())
            .unwrap()
            .save(&p)
            .unwrap();
        let l = load_image(&p).unwrap();
        assert_eq!(l.bit_depth, 16);
        let r = l.rescale.unwrap();
        assert_eq!((r.min, r.max), (1000.0, 5000.0));
        for (v, &q) in l.image.data().iter().zip(&raw) {
            let direct = (q as f64 - 1000.0) / 4000.0 * 255.0;
            assert!((v - direct).abs() <= 0.5 * RESCALE_STEP);
            assert_eq!((v / RESCALE_STEP).fract(), 0.0);
        }
        assert_eq!(l.image.min_max(), (0.0, 255.0));
    }

    #[test]
    fn pgm_and_bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        std::fs::write(&p, b"P2\n2 2\n255\n0 10\n20 255\n").unwrap();
        assert_eq!(
            load_image(&p).unwrap().image.data(),
            &[0.0, 10.0, 20.0, 255.0]
        );
        let rgb = dir.path().join("rgb.png");
        RgbImage::new(2, 2).save(&rgb).unwrap();
        let err = load_image(&rgb).unwrap_err().to_string();
        assert!(err.contains("single-channel"), "{err}");
        assert!(matches!(
            load_image(&dir.path().join("missing.png")),
            Err(Error::Io { .. })
        ));
        std::fs::write(dir.path().join("junk.png"), b"not an image").unwrap();
        assert!(load_image(&dir.path().join("junk.png")).is_err());
    }
}
