//! PFM depth maps: grayscale `Pf`, 32-bit little-endian floats, rows stored
//! bottom-up per the format's convention (negative scale marks little-endian).

use super::IoError;
use crate::scene::ImageGray;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub fn write_pfm(path: &Path, img: &ImageGray) -> Result<(), IoError> {
    let file = std::fs::File::create(path).map_err(|e| IoError::file(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        write!(w, "Pf\n{} {}\n-1.0\n", img.width, img.height)?;
        for y in (0..img.height).rev() {
            for x in 0..img.width {
                w.write_all(&(img.get(x, y) as f32).to_le_bytes())?;
            }
        }
        w.flush()
    };
    emit().map_err(|e| IoError::file(path, e))
}

pub fn read_pfm(path: &Path) -> Result<ImageGray, IoError> {
    let file = std::fs::File::open(path).map_err(|e| IoError::file(path, e))?;
    let mut r = BufReader::new(file);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| IoError::file(path, e))?;

    // Header: three whitespace-separated tokens, then binary data.
    let mut pos = 0usize;
    let mut next_token = |bytes: &[u8]| -> Result<String, IoError> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(IoError::parse(path, "truncated PFM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = next_token(&bytes)?;
    if magic != "Pf" {
        return Err(IoError::parse(path, format!("expected Pf magic, got {magic}")));
    }
    let width: usize = next_token(&bytes)?
        .parse()
        .map_err(|_| IoError::parse(path, "bad width"))?;
    let height: usize = next_token(&bytes)?
        .parse()
        .map_err(|_| IoError::parse(path, "bad height"))?;
    let scale: f64 = next_token(&bytes)?
        .parse()
        .map_err(|_| IoError::parse(path, "bad scale"))?;
    // exactly one whitespace byte separates header from data
    pos += 1;
    let little_endian = scale < 0.0;
    let needed = width * height * 4;
    if bytes.len() < pos + needed {
        return Err(IoError::parse(path, "truncated PFM data"));
    }
    let mut img = ImageGray::new(width, height);
    for row in 0..height {
        let y = height - 1 - row; // bottom-up storage
        for x in 0..width {
            let o = pos + (row * width + x) * 4;
            let raw: [u8; 4] = bytes[o..o + 4].try_into().unwrap();
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            img.set(x, y, v as f64);
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn pfm_round_trip() {
        let mut img = ImageGray::new(3, 2);
        img.set(0, 0, 1.25);
        img.set(2, 0, 0.0);
        img.set(1, 1, 3.5);
        let dir = tempdir().unwrap();
        let path = dir.path().join("depth.pfm");
        write_pfm(&path, &img).unwrap();
        let back = read_pfm(&path).unwrap();
        assert_eq!(back.width, 3);
        assert_eq!(back.height, 2);
        assert_eq!(back.data, img.data);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.pfm");
        std::fs::write(&path, b"PF\n1 1\n-1.0\n\x00\x00\x00\x00").unwrap();
        assert!(matches!(read_pfm(&path), Err(IoError::Parse { .. })));
    }
}
