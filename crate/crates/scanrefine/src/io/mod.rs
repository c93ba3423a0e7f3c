//! File formats: Wavefront OBJ meshes, PFM depth maps, PNG images, and JSON
//! pose / intrinsics / metrics records.

mod obj;
mod pfm;
mod png;
mod poses;

pub use obj::{read_obj, write_obj};
pub use pfm::{read_pfm, write_pfm};
pub use png::{
    read_color_png, read_silhouette_png, read_texture_png, write_color_png, write_gray_png,
    write_silhouette_png, write_texture_png,
};
pub use poses::{
    read_intrinsics_json, read_poses_json, write_intrinsics_json, write_poses_json, PoseRecord,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error on {path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("image error on {path}: {source}")]
    Image {
        path: String,
        source: image::ImageError,
    },
}

impl IoError {
    pub(crate) fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        IoError::File {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(path: &std::path::Path, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.display().to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn image(path: &std::path::Path, source: image::ImageError) -> Self {
        IoError::Image {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Format a float with 6 significant digits (OBJ writer precision).
pub(crate) fn fmt_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // trim trailing zeros but keep at least one digit after the point
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0');
        let trimmed = trimmed.strip_suffix('.').unwrap_or(trimmed);
        trimmed.to_string()
    } else {
        s
    }
}
