//! Dense float images in scanline (row-major) order, origin at the top-left.
//!
//! Pixel centers sit at integer + 0.5 offsets; every sampling routine in the
//! crate follows that convention.

/// H x W x 3 image with channels in [0, 1] for color data.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    pub width: usize,
    pub height: usize,
    /// Row-major, 3 floats per pixel.
    pub data: Vec<f64>,
}

impl ImageRgb {
    pub fn new(width: usize, height: usize) -> Self {
        ImageRgb {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        ImageRgb {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * 3
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        let i = self.idx(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = self.idx(x, y);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    /// Quantize to 8 bits and back, matching a PNG write/read round trip.
    pub fn quantized(&self) -> ImageRgb {
        let data = self
            .data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
            .collect();
        ImageRgb {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn same_size(&self, other: &ImageRgb) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// H x W single-channel image (depth in meters, silhouettes, masks).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGray {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ImageGray {
    pub fn new(width: usize, height: usize) -> Self {
        ImageGray {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        ImageGray {
            width,
            height,
            data: vec![v; width * height],
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[self.idx(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        let i = self.idx(x, y);
        self.data[i] = v;
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn same_size(&self, other: &ImageGray) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// True where the value is strictly positive (valid-depth convention).
    pub fn is_valid_depth(&self, x: usize, y: usize) -> bool {
        self.get(x, y) > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trip() {
        let mut img = ImageRgb::new(4, 3);
        img.set(2, 1, [0.1, 0.5, 0.9]);
        assert_eq!(img.get(2, 1), [0.1, 0.5, 0.9]);
        assert_eq!(img.get(0, 0), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn quantization_is_idempotent() {
        let mut img = ImageRgb::new(2, 1);
        img.set(0, 0, [0.123456, 0.5, 0.999]);
        img.set(1, 0, [1.2, -0.3, 0.0]); // out of range clamps
        let q1 = img.quantized();
        let q2 = q1.quantized();
        assert_eq!(q1, q2);
        assert!(q1.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
