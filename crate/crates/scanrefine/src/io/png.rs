//! 8-bit PNG I/O for color images, textures, and silhouettes.

use super::IoError;
use crate::scene::{ImageGray, ImageRgb, Texture};
use std::path::Path;

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_color_png(path: &Path, img: &ImageRgb) -> Result<(), IoError> {
    let buf: Vec<u8> = img.data.iter().map(|&v| to_u8(v)).collect();
    let out = image::RgbImage::from_raw(img.width as u32, img.height as u32, buf)
        .expect("buffer size matches dimensions");
    out.save(path).map_err(|e| IoError::image(path, e))
}

pub fn read_color_png(path: &Path) -> Result<ImageRgb, IoError> {
    let img = image::open(path).map_err(|e| IoError::image(path, e))?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.into_raw().iter().map(|&b| b as f64 / 255.0).collect();
    Ok(ImageRgb {
        width: w,
        height: h,
        data,
    })
}

pub fn write_texture_png(path: &Path, tex: &Texture) -> Result<(), IoError> {
    let buf: Vec<u8> = tex.texels.iter().map(|&v| to_u8(v)).collect();
    let out = image::RgbImage::from_raw(tex.width as u32, tex.height as u32, buf)
        .expect("buffer size matches dimensions");
    out.save(path).map_err(|e| IoError::image(path, e))
}

pub fn read_texture_png(path: &Path) -> Result<Texture, IoError> {
    let img = read_color_png(path)?;
    Ok(Texture {
        width: img.width,
        height: img.height,
        texels: img.data,
    })
}

/// Values in [0, 1] scaled to 8 bits (soft silhouettes, debug dumps).
pub fn write_gray_png(path: &Path, img: &ImageGray) -> Result<(), IoError> {
    let buf: Vec<u8> = img.data.iter().map(|&v| to_u8(v)).collect();
    let out = image::GrayImage::from_raw(img.width as u32, img.height as u32, buf)
        .expect("buffer size matches dimensions");
    out.save(path).map_err(|e| IoError::image(path, e))
}

pub fn write_silhouette_png(path: &Path, img: &ImageGray) -> Result<(), IoError> {
    write_gray_png(path, img)
}

/// Silhouettes load as strict binary: >= 128 maps to 1.
pub fn read_silhouette_png(path: &Path) -> Result<ImageGray, IoError> {
    let img = image::open(path)
        .map_err(|e| IoError::image(path, e))?
        .to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .into_raw()
        .iter()
        .map(|&b| if b >= 128 { 1.0 } else { 0.0 })
        .collect();
    Ok(ImageGray {
        width: w,
        height: h,
        data,
    })
}
