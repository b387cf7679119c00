use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::body::ImageSize;
use crate::error::{Error, Result};

/// An 8-bit RGB frame, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub size: ImageSize,
    pub rgb: Vec<u8>,
}

impl Image {
    pub fn new(size: ImageSize, rgb: Vec<u8>) -> Result<Self> {
        if rgb.len() != 3 * size.pixels() {
            return Err(Error::Length {
                expected: 3 * size.pixels(),
                actual: rgb.len(),
            });
        }
        Ok(Self { size, rgb })
    }

    pub fn from_unit(size: ImageSize, values: &[f32]) -> Result<Self> {
        Self::new(size, values.iter().map(|&c| (c.clamp(0.0, 1.0) * 255.0).round() as u8).collect())
    }

    /// Channel values scaled to [0, 1].
    pub fn to_unit(&self) -> Vec<f32> {
        self.rgb.iter().map(|&c| c as f32 / 255.0).collect()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = BufWriter::new(File::create(path)?);
        let mut enc = png::Encoder::new(file, self.size.width as u32, self.size.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::format("png", e.to_string()))?;
        writer
            .write_image_data(&self.rgb)
            .map_err(|e| Error::format("png", e.to_string()))
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let dec = png::Decoder::new(BufReader::new(File::open(path)?));
        let mut reader = dec.read_info().map_err(|e| Error::format("png", e.to_string()))?;
        let info = reader.info();
        if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
            return Err(Error::format("png", "expected 8-bit RGB"));
        }
        let size = ImageSize::new(info.height as usize, info.width as usize);
        let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| Error::format("png", "image too large"))?];
        let frame = reader.next_frame(&mut buf).map_err(|e| Error::format("png", e.to_string()))?;
        buf.truncate(frame.buffer_size());
        Self::new(size, buf)
    }
}
