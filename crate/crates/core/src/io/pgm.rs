//! Grayscale PGM images. Pixels are read into `[0, 255]` as f64 and
//! quantized only when written.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};

use crate::error::{CscError, Result};
use crate::plane::Plane;

fn image_err(e: image::ImageError) -> CscError {
    CscError::Format {
        what: "PGM image",
        reason: e.to_string(),
    }
}

/// Decodes an 8- or 16-bit graymap; 16-bit samples are rescaled to `[0, 255]`.
pub fn decode_pgm(bytes: &[u8]) -> Result<Plane> {
    let img = ImageReader::with_format(Cursor::new(bytes), ImageFormat::Pnm)
        .decode()
        .map_err(image_err)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let plane = match img {
        DynamicImage::ImageLuma8(buf) => {
            Plane::from_shape_vec((h, w), buf.into_raw().into_iter().map(f64::from).collect())
        }
        DynamicImage::ImageLuma16(buf) => Plane::from_shape_vec(
            (h, w),
            buf.into_raw()
                .into_iter()
                .map(|v| f64::from(v) * 255.0 / 65535.0)
                .collect(),
        ),
        other => {
            return Err(CscError::Format {
                what: "PGM image",
                reason: format!("expected a graymap, got {:?}", other.color()),
            })
        }
    };
    plane.map_err(|e| CscError::Dimension(e.to_string()))
}

/// Rounds to the nearest integer and clamps to `[0, 255]`.
pub fn encode_pgm(plane: &Plane) -> Result<Vec<u8>> {
    if plane.iter().any(|v| v.is_nan()) {
        return Err(CscError::Numeric("image"));
    }
    let (h, w) = plane.dim();
    let pixels: Vec<u8> = plane
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    let mut out = Vec::new();
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&pixels, w as u32, h as u32, ExtendedColorType::L8)
        .map_err(image_err)?;
    Ok(out)
}

pub fn read_pgm(path: &Path) -> Result<Plane> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_pgm(path: &Path, plane: &Plane) -> Result<()> {
    fs::write(path, encode_pgm(plane)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_quantizes() {
        let p = Plane::from_shape_fn((3, 5), |(i, j)| (i * 60 + j * 13) as f64 + 0.4);
        let bytes = encode_pgm(&p).unwrap();
        assert!(bytes.starts_with(b"P5"));
        let back = decode_pgm(&bytes).unwrap();
        assert_eq!(back.dim(), (3, 5));
        assert!(back.iter().zip(p.iter()).all(|(a, b)| (a - b).abs() <= 0.5));
        assert_eq!(encode_pgm(&back).unwrap(), bytes);
    }

    #[test]
    fn clamps_out_of_range() {
        let p = Plane::from_shape_vec((1, 2), vec![-7.0, 300.0]).unwrap();
        let back = decode_pgm(&encode_pgm(&p).unwrap()).unwrap();
        assert_eq!(back.into_raw_vec_and_offset().0, vec![0.0, 255.0]);
    }

    #[test]
    fn reads_ascii_graymap() {
        let back = decode_pgm(b"P2\n2 1\n255\n10 200\n").unwrap();
        assert_eq!(back[[0, 1]], 200.0);
    }
}
