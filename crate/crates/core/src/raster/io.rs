//! Raster encodings: grayscale PNG/PGM for silhouettes, instance and pose
//! maps, RGB PNG for normals, and the planar float `D3DR` container for
//! depth and normals.

use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma, Rgb};

use super::hard::RenderLayers;
use super::soft::SilhouetteImage;
use crate::{Error, Result};

pub const D3DR_MAGIC: &[u8; 4] = b"D3DR";

/// Little-endian `f32` planes behind a 16-byte header
/// (`"D3DR"`, width, height, channels as `u32`).
#[derive(Debug, Clone, PartialEq)]
pub struct FloatRaster {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    /// Channel-major planes.
    pub data: Vec<f32>,
}

impl FloatRaster {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.data.len());
        out.extend_from_slice(D3DR_MAGIC);
        for v in [self.width, self.height, self.channels] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != D3DR_MAGIC {
            return Err(Error::Parse("missing D3DR header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let (width, height, channels) = (word(4), word(8), word(12));
        let n = width as usize * height as usize * channels as usize;
        if bytes.len() != 16 + 4 * n {
            return Err(Error::Parse(format!("D3DR payload holds {} bytes, expected {}", bytes.len() - 16, 4 * n)));
        }
        let data = bytes[16..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { width, height, channels, data })
    }
}

pub fn depth_raster(layers: &RenderLayers) -> FloatRaster {
    FloatRaster {
        width: layers.width as u32,
        height: layers.height as u32,
        channels: 1,
        data: layers.depth.iter().map(|&d| d as f32).collect(),
    }
}

pub fn normal_raster(layers: &RenderLayers) -> FloatRaster {
    let data = (0..3)
        .flat_map(|c| layers.normal.iter().map(move |n| n[c] as f32))
        .collect();
    FloatRaster {
        width: layers.width as u32,
        height: layers.height as u32,
        channels: 3,
        data,
    }
}

fn png_bytes<P, C>(img: &ImageBuffer<P, C>) -> Result<Vec<u8>>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

fn gray8(width: usize, height: usize, data: Vec<u8>) -> ImageBuffer<Luma<u8>, Vec<u8>> {
    ImageBuffer::from_raw(width as u32, height as u32, data).expect("buffer sized to image")
}

/// Coverage scaled to 0..=255.
pub fn silhouette_png(s: &SilhouetteImage) -> Result<Vec<u8>> {
    let data = s.values.iter().map(|&v| (v * 255.0).round() as u8).collect();
    png_bytes(&gray8(s.width, s.height, data))
}

/// Raw object ids as 16-bit gray.
pub fn instance_png(layers: &RenderLayers) -> Result<Vec<u8>> {
    let data: Vec<u16> = layers.instance.iter().map(|&i| i.min(u16::MAX as u32) as u16).collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(layers.width as u32, layers.height as u32, data).expect("buffer sized to image");
    png_bytes(&img)
}

/// Pose bin + 1 as 8-bit gray; 0 is background.
pub fn pose_png(layers: &RenderLayers) -> Result<Vec<u8>> {
    let data = layers.pose_bins.iter().map(|&b| (b + 1) as u8).collect();
    png_bytes(&gray8(layers.width, layers.height, data))
}

/// Normals tone-mapped to RGB via `n · 0.5 + 0.5`; background is black.
pub fn normal_png(layers: &RenderLayers) -> Result<Vec<u8>> {
    let mut data = Vec::with_capacity(3 * layers.normal.len());
    for (n, &id) in layers.normal.iter().zip(&layers.instance) {
        if id == 0 {
            data.extend_from_slice(&[0, 0, 0]);
        } else {
            data.extend(n.iter().map(|c| ((c * 0.5 + 0.5) * 255.0).round().clamp(0.0, 255.0) as u8));
        }
    }
    let img: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(layers.width as u32, layers.height as u32, data).expect("buffer sized to image");
    png_bytes(&img)
}

/// Binary PGM (`P5`) with 8-bit coverage.
pub fn silhouette_pgm(s: &SilhouetteImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", s.width, s.height).into_bytes();
    out.extend(s.values.iter().map(|&v| (v * 255.0).round() as u8));
    out
}

/// Reads a grayscale mask image; pixels above mid-gray are foreground.
pub fn read_mask(path: &Path) -> Result<SilhouetteImage> {
    let img = image::open(path)?.into_luma16();
    let (w, h) = img.dimensions();
    let values = img.pixels().map(|p| if p.0[0] > u16::MAX / 2 { 1.0 } else { 0.0 }).collect();
    SilhouetteImage::from_values(w as usize, h as usize, values)
}

/// Decodes a 16-bit instance PNG back into ids.
pub fn decode_instance_png(bytes: &[u8]) -> Result<(usize, usize, Vec<u32>)> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.into_luma16();
    let (w, h) = img.dimensions();
    Ok((w as usize, h as usize, img.pixels().map(|p| p.0[0] as u32).collect()))
}
