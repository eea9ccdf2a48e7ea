use std::io::{Read, Write};

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::RasterError;

/// Row-major RGBA8 pixels with premultiplied alpha. Frames composited over
/// the white background are fully opaque, where premultiplied and straight
/// alpha coincide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new_filled(width: u32, height: u32, rgba: [u8; 4]) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 4);
        for _ in 0..width as usize * height as usize {
            pixels.extend_from_slice(&rgba);
        }
        Self { width, height, pixels }
    }

    pub fn white(width: u32, height: u32) -> Self {
        Self::new_filled(width, height, [255; 4])
    }

    pub fn transparent(width: u32, height: u32) -> Self {
        Self { width, height, pixels: vec![0; width as usize * height as usize * 4] }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        self.pixels[i..i + 4].try_into().expect("four channels")
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgba: [u8; 4]) {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        self.pixels[i..i + 4].copy_from_slice(&rgba);
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, RasterError> {
        let mut out = Vec::new();
        self.write_png(&mut out)?;
        Ok(out)
    }

    pub fn write_png(&self, w: impl Write) -> Result<(), RasterError> {
        let mut enc = png::Encoder::new(w, self.width, self.height);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| RasterError::Png(e.to_string()))?;
        writer.write_image_data(&self.pixels).map_err(|e| RasterError::Png(e.to_string()))?;
        writer.finish().map_err(|e| RasterError::Png(e.to_string()))
    }

    /// Decodes an 8-bit RGB or RGBA PNG.
    pub fn decode_png(r: impl Read + std::io::BufRead + std::io::Seek) -> Result<Self, RasterError> {
        let dec = png::Decoder::new(r);
        let mut reader = dec.read_info().map_err(|e| RasterError::Png(e.to_string()))?;
        let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| RasterError::Png("image too large".into()))?];
        let info = reader.next_frame(&mut buf).map_err(|e| RasterError::Png(e.to_string()))?;
        buf.truncate(info.buffer_size());
        if info.bit_depth != png::BitDepth::Eight {
            return Err(RasterError::Png(format!("unsupported bit depth {:?}", info.bit_depth)));
        }
        let pixels = match info.color_type {
            png::ColorType::Rgba => buf,
            png::ColorType::Rgb => buf.chunks_exact(3).flat_map(|c| [c[0], c[1], c[2], 255]).collect(),
            other => return Err(RasterError::Png(format!("unsupported color type {other:?}"))),
        };
        Ok(Self { width: info.width, height: info.height, pixels })
    }

    pub fn to_data_url(&self) -> Result<String, RasterError> {
        let png = self.encode_png()?;
        Ok(format!("data:image/png;base64,{}", base64::engine::general_purpose::STANDARD.encode(png)))
    }
}

/// Set of canvas pixels, stored as a bit per pixel inside a bounding
/// rectangle.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoverageMask {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
    bits: Vec<u64>,
}

impl CoverageMask {
    pub fn new(x: u32, y: u32, width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self { x, y, width, height, bits: vec![0; n.div_ceil(64)] }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    fn index(&self, x: u32, y: u32) -> Option<usize> {
        let inside = x >= self.x && y >= self.y && x < self.x + self.width && y < self.y + self.height;
        inside.then(|| (y - self.y) as usize * self.width as usize + (x - self.x) as usize)
    }

    pub fn set(&mut self, x: u32, y: u32) {
        let i = self.index(x, y).expect("pixel inside mask bounds");
        self.bits[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.index(x, y).is_some_and(|i| self.bits[i / 64] >> (i % 64) & 1 == 1)
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Bits packed row-major, least significant bit first within each byte.
    pub fn packed_bytes(&self) -> Vec<u8> {
        let n = self.width as usize * self.height as usize;
        let mut out = vec![0u8; n.div_ceil(8)];
        for i in 0..n {
            if self.bits[i / 64] >> (i % 64) & 1 == 1 {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }

    pub fn from_packed(x: u32, y: u32, width: u32, height: u32, bytes: &[u8]) -> Option<Self> {
        let n = width as usize * height as usize;
        if bytes.len() != n.div_ceil(8) {
            return None;
        }
        let mut m = Self::new(x, y, width, height);
        for i in 0..n {
            if bytes[i / 8] >> (i % 8) & 1 == 1 {
                m.bits[i / 64] |= 1 << (i % 64);
            }
        }
        Some(m)
    }

    /// Pixel-space image of the mask: black where set, white elsewhere.
    pub fn to_image(&self, canvas_w: u32, canvas_h: u32) -> RasterImage {
        let mut img = RasterImage::white(canvas_w, canvas_h);
        for y in self.y..(self.y + self.height).min(canvas_h) {
            for x in self.x..(self.x + self.width).min(canvas_w) {
                if self.contains(x, y) {
                    img.set_pixel(x, y, [0, 0, 0, 255]);
                }
            }
        }
        img
    }
}

#[derive(Serialize, Deserialize)]
struct MaskRepr {
    x: u32,
    y: u32,
    width: u32,
    height: u32,
    bits: String,
}

impl Serialize for CoverageMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MaskRepr {
            x: self.x,
            y: self.y,
            width: self.width,
            height: self.height,
            bits: base64::engine::general_purpose::STANDARD.encode(self.packed_bytes()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoverageMask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = MaskRepr::deserialize(d)?;
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(r.bits)
            .map_err(serde::de::Error::custom)?;
        CoverageMask::from_packed(r.x, r.y, r.width, r.height, &bytes)
            .ok_or_else(|| serde::de::Error::custom("mask bit count does not match its bounds"))
    }
}
