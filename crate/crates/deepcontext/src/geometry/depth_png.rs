//! Depth image I/O: 16-bit single-channel PNG, value = millimeters, 0 = missing.

use super::DepthImage;
use crate::error::{Error, Result};
use std::path::Path;

pub fn save_depth_png(depth: &DepthImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(
        std::io::BufWriter::new(file),
        depth.width as u32,
        depth.height as u32,
    );
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Sixteen);
    let mut writer = encoder.write_header().map_err(|e| Error::Png {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let mut buf = Vec::with_capacity(depth.width * depth.height * 2);
    for v in depth.values() {
        let mm = (*v as f64 * 1000.0).round().clamp(0.0, u16::MAX as f64) as u16;
        buf.extend_from_slice(&mm.to_be_bytes());
    }
    writer.write_image_data(&buf).map_err(|e| Error::Png {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

pub fn load_depth_png(path: impl AsRef<Path>) -> Result<DepthImage> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let png_err = |detail: String| Error::Png {
        path: path.display().to_string(),
        detail,
    };
    let mut reader = decoder.read_info().map_err(|e| png_err(e.to_string()))?;
    let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| png_err("image too large".into()))?];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| png_err(e.to_string()))?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(png_err(format!(
            "expected 16-bit grayscale, got {:?}/{:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut values = Vec::with_capacity(w * h);
    for px in buf[..w * h * 2].chunks_exact(2) {
        let mm = u16::from_be_bytes([px[0], px[1]]);
        values.push(mm as f32 / 1000.0);
    }
    DepthImage::from_values(w, h, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_roundtrip_is_millimeter_exact() {
        let mut depth = DepthImage::new(8, 6);
        depth.set(0, 0, 1.234);
        depth.set(7, 5, 5.0);
        depth.set(3, 2, 0.001);
        let dir = std::env::temp_dir().join("deepcontext_png_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("d.png");
        save_depth_png(&depth, &path).unwrap();
        let back = load_depth_png(&path).unwrap();
        assert_eq!(back.width, 8);
        assert_eq!(back.height, 6);
        for (a, b) in back.values().iter().zip(depth.values()) {
            assert!((a - b).abs() < 0.5e-3 + 1e-9, "{a} vs {b}");
        }
        // missing stays exactly missing
        assert_eq!(back.get(1, 1), 0.0);
    }
}
