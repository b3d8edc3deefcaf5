//! PNG readers and writers: 16-bit grayscale for views, 8-bit grayscale
//! for masks, 8-bit RGB for lossy preview images.

use dualview_core::image::{BinaryMask, EncodedTriple, GrayImage};
use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use std::fmt;
use std::path::Path;

/// Loading failures, reported distinctly per the file contract.
#[derive(Debug)]
pub enum LoadError {
    /// File missing, unreadable or not decodable as an image.
    Unreadable(String),
    /// Single-channel image with the wrong sample depth.
    WrongBitDepth { bits: u32 },
    /// Not a single-channel image.
    WrongChannelCount { channels: u32 },
    /// Decoded buffer disagrees with its own header.
    Malformed(String),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Unreadable(why) => write!(f, "unreadable image: {why}"),
            LoadError::WrongBitDepth { bits } => {
                write!(f, "expected 16-bit samples, found {bits}-bit")
            }
            LoadError::WrongChannelCount { channels } => {
                write!(f, "expected a single channel, found {channels}")
            }
            LoadError::Malformed(why) => write!(f, "malformed image: {why}"),
        }
    }
}

impl std::error::Error for LoadError {}

/// Load a 16-bit single-channel PNG as a unit-normalized image
/// (stored / 65535).
pub fn load_gray16(path: &Path) -> Result<GrayImage, LoadError> {
    let img = image::ImageReader::open(path)
        .map_err(|e| LoadError::Unreadable(format!("{}: {e}", path.display())))?
        .decode()
        .map_err(|e| LoadError::Unreadable(format!("{}: {e}", path.display())))?;
    match img {
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            GrayImage::from_u16(w, h, buf.as_raw())
                .map_err(|e| LoadError::Malformed(e.to_string()))
        }
        DynamicImage::ImageLuma8(_) => Err(LoadError::WrongBitDepth { bits: 8 }),
        other => Err(LoadError::WrongChannelCount {
            channels: other.color().channel_count() as u32,
        }),
    }
}

/// Save a unit-range image as 16-bit grayscale PNG
/// (stored = round(pixel × 65535)). Pixels outside [0, 1] are an error;
/// callers clip first.
pub fn save_gray16(img: &GrayImage, path: &Path) -> anyhow::Result<()> {
    let stored = img
        .to_u16()
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, stored)
            .expect("buffer length matches dimensions");
    buf.save(path)?;
    Ok(())
}

/// Save a mask as 8-bit PNG with values 0/255.
pub fn save_mask(mask: &BinaryMask, path: &Path) -> anyhow::Result<()> {
    let bytes: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, bytes)
            .expect("buffer length matches dimensions");
    buf.save(path)?;
    Ok(())
}

/// Lossy 8-bit RGB preview of a triple for human inspection. Values are
/// clamped; this is never an interchange format.
pub fn save_preview_rgb(triple: &EncodedTriple, path: &Path) -> anyhow::Result<()> {
    let (w, h) = (triple.width(), triple.height());
    let mut bytes = Vec::with_capacity(3 * w * h);
    for i in 0..w * h {
        for c in 0..3 {
            let v = triple.plane(c)[i].clamp(0.0, 1.0);
            bytes.push((v * 255.0).round() as u8);
        }
    }
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(w as u32, h as u32, bytes).expect("length matches");
    buf.save(path)?;
    Ok(())
}
