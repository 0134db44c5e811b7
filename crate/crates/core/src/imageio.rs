//! 8-bit image files to and from `c × h × w` tensors with values in `[0, 255]`.

use std::path::Path;

use image::{GrayImage, ImageReader, RgbImage};

use crate::error::{Error, Result};
use crate::netgraph::SaliencyMap;
use crate::tensor::Tensor;

/// Loads an image as 1 (luma) or 3 (RGB) channels.
pub fn load_image(path: impl AsRef<Path>, channels: usize) -> Result<Tensor> {
    let path = path.as_ref();
    let img = ImageReader::open(path)
        .map_err(|e| Error::File {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?
        .with_guessed_format()?
        .decode()
        .map_err(|e| Error::File {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    match channels {
        1 => {
            let g = img.to_luma8();
            let (w, h) = g.dimensions();
            Tensor::from_fn3(1, h as usize, w as usize, |_, y, x| {
                g.get_pixel(x as u32, y as u32)[0] as f64
            })
        }
        3 => {
            let rgb = img.to_rgb8();
            let (w, h) = rgb.dimensions();
            Tensor::from_fn3(3, h as usize, w as usize, |c, y, x| {
                rgb.get_pixel(x as u32, y as u32)[c] as f64
            })
        }
        n => Err(Error::Shape(format!(
            "cannot load an image as {n} channels"
        ))),
    }
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Writes a 1- or 3-channel tensor as PNG, rounding and clamping to `0..=255`.
pub fn save_png(image: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let (c, h, w) = image.chw()?;
    match c {
        1 => {
            let g = GrayImage::from_fn(w as u32, h as u32, |x, y| {
                image::Luma([to_u8(image.at3(0, y as usize, x as usize))])
            });
            g.save(path)?;
        }
        3 => {
            let rgb = RgbImage::from_fn(w as u32, h as u32, |x, y| {
                let p = |ci| to_u8(image.at3(ci, y as usize, x as usize));
                image::Rgb([p(0), p(1), p(2)])
            });
            rgb.save(path)?;
        }
        n => return Err(Error::Shape(format!("cannot save {n} channels as PNG"))),
    }
    Ok(())
}

/// Writes a saliency map min-max stretched to `0..=255`.
pub fn save_saliency_png(map: &SaliencyMap, path: impl AsRef<Path>) -> Result<()> {
    let gray = crate::detector::normalize_to_gray(map)
        .unwrap_or_else(|| Tensor::zeros(map.values().dims().to_vec()).expect("valid dims"));
    save_png(&gray, path)
}
