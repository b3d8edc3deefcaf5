//! Image containers and pixel arithmetic.
//!
//! Pixels are `f64` in [0, 1] internally; 16-bit unsigned integers exist
//! only at the file boundary. Layout is row-major with the origin at the
//! top left. All types are immutable after construction.

use crate::error::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;

pub const U16_MAX: f64 = 65535.0;

/// Single-channel floating-point image, unit-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                got: pixels.len(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn in_unit_range(&self) -> bool {
        self.pixels.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    /// Mirror left-right. Involution: `hflip(hflip(x)) == x`.
    pub fn hflip(&self) -> GrayImage {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks_exact(self.width) {
            pixels.extend(row.iter().rev().copied());
        }
        GrayImage {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// Quantize to uint16 with round-half-away-from-zero.
    /// Pixels must already be in [0, 1]; callers clip beforehand.
    pub fn to_u16(&self) -> Result<Vec<u16>> {
        let mut out = Vec::with_capacity(self.pixels.len());
        for &v in &self.pixels {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::PixelOutOfRange);
            }
            out.push(libm::round(v * U16_MAX) as u16);
        }
        Ok(out)
    }

    /// Inverse of `to_u16`: stored / 65535.
    pub fn from_u16(width: usize, height: usize, stored: &[u16]) -> Result<Self> {
        if stored.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                got: stored.len(),
            });
        }
        let pixels = stored.iter().map(|&v| v as f64 / U16_MAX).collect();
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Per-pixel |a − b|. Symmetric, exact in floating point.
pub fn abs_diff(a: &GrayImage, b: &GrayImage) -> Result<GrayImage> {
    if a.dims() != b.dims() {
        return Err(Error::ShapeMismatch {
            expected: a.dims(),
            got: b.dims(),
        });
    }
    let pixels = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&x, &y)| (x - y).abs())
        .collect();
    Ok(GrayImage {
        width: a.width,
        height: a.height,
        pixels,
    })
}

/// Three-plane image: red = CC, green = MLO, blue = |CC − MLO|.
///
/// The difference invariant holds at encode time only; triples coming out
/// of the sampler carry whatever the model produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTriple {
    width: usize,
    height: usize,
    planes: [Vec<f64>; 3],
}

impl EncodedTriple {
    pub fn from_planes(r: GrayImage, g: GrayImage, b: GrayImage) -> Result<Self> {
        if r.dims() != g.dims() {
            return Err(Error::ShapeMismatch {
                expected: r.dims(),
                got: g.dims(),
            });
        }
        if r.dims() != b.dims() {
            return Err(Error::ShapeMismatch {
                expected: r.dims(),
                got: b.dims(),
            });
        }
        Ok(EncodedTriple {
            width: r.width,
            height: r.height,
            planes: [r.pixels, g.pixels, b.pixels],
        })
    }

    pub fn from_raw(width: usize, height: usize, planes: [Vec<f64>; 3]) -> Result<Self> {
        for p in &planes {
            if p.len() != width * height {
                return Err(Error::LengthMismatch {
                    expected: width * height,
                    got: p.len(),
                });
            }
        }
        Ok(EncodedTriple {
            width,
            height,
            planes,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Plane 0 = R (CC), 1 = G (MLO), 2 = B (difference).
    #[inline]
    pub fn plane(&self, idx: usize) -> &[f64] {
        &self.planes[idx]
    }

    pub fn plane_image(&self, idx: usize) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.planes[idx].clone(),
        }
    }
}

/// One boolean per pixel; produced by thresholding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                got: bits.len(),
            });
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    pub fn all_false(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_true(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_image(rng: &mut Rng, w: usize, h: usize) -> GrayImage {
        let pixels = (0..w * h).map(|_| rng.next_f64()).collect();
        GrayImage::new(w, h, pixels).unwrap()
    }

    #[test]
    fn u16_round_trip_bounds() {
        // max and zero of the uint16 range
        assert_eq!(GrayImage::from_u16(1, 1, &[65535]).unwrap().get(0, 0), 1.0);
        assert_eq!(GrayImage::from_u16(1, 1, &[0]).unwrap().get(0, 0), 0.0);
        // direct division oracle for the midpoint
        let v = GrayImage::from_u16(1, 1, &[32768]).unwrap().get(0, 0);
        assert!((v - 32768.0 / 65535.0).abs() < 1e-15);
        assert!((v - 0.500008).abs() < 1e-5);
    }

    #[test]
    fn u16_quantization() {
        let img = GrayImage::new(3, 1, vec![0.0, 1.0, 0.25]).unwrap();
        assert_eq!(img.to_u16().unwrap(), vec![0, 65535, 16384]);
        let bad = GrayImage::new(1, 1, vec![1.5]).unwrap();
        assert_eq!(bad.to_u16(), Err(Error::PixelOutOfRange));
    }

    #[test]
    fn u16_round_trip_error_bound() {
        let mut rng = Rng::new(11);
        let img = random_image(&mut rng, 16, 16);
        let stored = img.to_u16().unwrap();
        let back = GrayImage::from_u16(16, 16, &stored).unwrap();
        for (&a, &b) in img.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() <= 0.5 / U16_MAX + 1e-12);
        }
    }

    #[test]
    fn hflip_small_and_involution() {
        let img = GrayImage::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(img.hflip().pixels(), &[3.0, 2.0, 1.0]);

        let single = GrayImage::new(1, 4, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(single.hflip(), single);

        let mut rng = Rng::new(3);
        let img = random_image(&mut rng, 7, 5);
        assert_eq!(img.hflip().hflip(), img);
    }

    #[test]
    fn abs_diff_cases() {
        let a = GrayImage::constant(4, 4, 0.5);
        let b = GrayImage::constant(4, 4, 0.2);
        let d = abs_diff(&a, &b).unwrap();
        assert!(d.pixels().iter().all(|&v| (v - 0.3).abs() < 1e-15));

        let same = abs_diff(&a, &a).unwrap();
        assert!(same.pixels().iter().all(|&v| v == 0.0));

        // elementwise oracle on a random pair
        let mut rng = Rng::new(8);
        let x = random_image(&mut rng, 4, 4);
        let y = random_image(&mut rng, 4, 4);
        let d = abs_diff(&x, &y).unwrap();
        for i in 0..16 {
            let expect = (x.pixels()[i] - y.pixels()[i]).abs();
            assert_eq!(d.pixels()[i], expect);
        }
        // exact symmetry
        assert_eq!(abs_diff(&x, &y).unwrap(), abs_diff(&y, &x).unwrap());

        let tall = GrayImage::constant(4, 5, 0.0);
        assert!(matches!(
            abs_diff(&a, &tall),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn triple_requires_matching_planes() {
        let r = GrayImage::constant(2, 2, 0.1);
        let g = GrayImage::constant(2, 2, 0.2);
        let b = GrayImage::constant(2, 3, 0.0);
        assert!(EncodedTriple::from_planes(r.clone(), g.clone(), b).is_err());
        let t = EncodedTriple::from_planes(r, g, GrayImage::constant(2, 2, 0.0)).unwrap();
        assert_eq!(t.dims(), (2, 2));
    }
}
