//! Raster files: page images in, label rasters and overlays out.

use std::fs;
use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};
use textline_core::{BinaryDocument, LineModel, Raster};

use crate::IoError;

/// Reads a grayscale raster from a PNG (any colour type, converted to luma)
/// or a binary PGM (`P5`, 8-bit).
pub fn read_gray(path: &Path) -> Result<Raster<u8>, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::Read(path.to_path_buf(), e))?;
    if bytes.starts_with(b"P5") {
        return parse_pgm(&bytes).map_err(|msg| IoError::Decode(path.to_path_buf(), msg));
    }
    let img = image::load_from_memory(&bytes).map_err(|e| IoError::Decode(path.to_path_buf(), e.to_string()))?;
    let gray = img.to_luma8();
    let (w, h) = gray.dimensions();
    Ok(Raster::from_vec(w as usize, h as usize, gray.into_raw()))
}

/// Loads and binarizes a page. Dark pixels are ink; `threshold` fixes the
/// binarization level, otherwise Otsu is used.
pub fn load_document(path: &Path, threshold: Option<u8>) -> Result<BinaryDocument, IoError> {
    let gray = read_gray(path)?;
    BinaryDocument::from_gray(&gray, threshold).map_err(|e| IoError::Decode(path.to_path_buf(), e.to_string()))
}

fn parse_pgm(bytes: &[u8]) -> Result<Raster<u8>, String> {
    // Header: magic, width, height, maxval, separated by whitespace and
    // `#` comments, then exactly one whitespace byte before the samples.
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err("truncated PGM header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| "malformed PGM header".to_string())?;
    }
    let [w, h, maxval] = fields;
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("malformed PGM header".into());
    }
    pos += 1;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported PGM maxval {maxval}"));
    }
    let data = bytes.get(pos..pos + w * h).ok_or("truncated PGM data")?;
    let scale = |v: u8| ((v as usize * 255 + maxval / 2) / maxval).min(255) as u8;
    Ok(Raster::from_vec(w, h, data.iter().map(|&v| scale(v)).collect()))
}

/// Writes a line-id raster: 8-bit grayscale when every id fits, else 16-bit.
pub fn write_labels(path: &Path, labels: &Raster<u32>) -> Result<(), IoError> {
    let (w, h) = (labels.width() as u32, labels.height() as u32);
    let max = labels.as_slice().iter().copied().max().unwrap_or(0);
    let result = if max <= u8::MAX as u32 {
        GrayImage::from_raw(w, h, labels.as_slice().iter().map(|&v| v as u8).collect()).expect("buffer size").save(path)
    } else if max <= u16::MAX as u32 {
        ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(w, h, labels.as_slice().iter().map(|&v| v as u16).collect())
            .expect("buffer size")
            .save(path)
    } else {
        return Err(IoError::TooManyLabels(max));
    };
    result.map_err(|e| IoError::Write(path.to_path_buf(), e.to_string()))
}

/// Reads a line-id raster written by [`write_labels`] (8- or 16-bit gray).
pub fn read_labels(path: &Path) -> Result<Raster<u32>, IoError> {
    let img = image::open(path).map_err(|e| IoError::Decode(path.to_path_buf(), e.to_string()))?;
    let gray = img.to_luma16();
    let (w, h) = gray.dimensions();
    let wide = matches!(img.color(), image::ColorType::L16 | image::ColorType::La16);
    let data = gray.into_raw().into_iter().map(|v| if wide { v as u32 } else { (v / 257) as u32 }).collect();
    Ok(Raster::from_vec(w as usize, h as usize, data))
}

/// Writes a page as a bilevel PNG (ink black on white).
pub fn write_page(path: &Path, doc: &BinaryDocument) -> Result<(), IoError> {
    let data = doc.mask().as_slice().iter().map(|&ink| if ink { 0 } else { 255 }).collect();
    GrayImage::from_raw(doc.width() as u32, doc.height() as u32, data)
        .expect("buffer size")
        .save(path)
        .map_err(|e| IoError::Write(path.to_path_buf(), e.to_string()))
}

/// Distinct, saturated colour for line `id` (golden-angle hue walk).
fn line_colour(id: u32) -> Rgb<u8> {
    let hue = (id as f64 * 137.507_764) % 360.0;
    let (s, v) = (0.85, 0.85);
    let c = v * s;
    let x = c * (1.0 - ((hue / 60.0) % 2.0 - 1.0).abs());
    let (r, g, b) = match (hue / 60.0) as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let to_u8 = |t: f64| ((t + m) * 255.0).round() as u8;
    Rgb([to_u8(r), to_u8(g), to_u8(b)])
}

/// Ink coloured by line id on white, with each fitted line drawn in black
/// over its extent `c ± 2σ_s`.
pub fn write_overlay(path: &Path, labels: &Raster<u32>, lines: &[LineModel]) -> Result<(), IoError> {
    let (w, h) = (labels.width() as u32, labels.height() as u32);
    let mut img = RgbImage::from_pixel(w, h, Rgb([255, 255, 255]));
    for (x, y, &id) in labels.iter_xy() {
        if id != 0 {
            img.put_pixel(x as u32, y as u32, line_colour(id));
        }
    }
    for line in lines {
        let (x0, x1) = line.segment();
        let (x0, x1) = (x0.max(0.0), x1.min(w as f64 - 1.0));
        let steps = ((x1 - x0).abs() * 2.0).ceil() as usize;
        for k in 0..=steps {
            let x = x0 + (x1 - x0) * k as f64 / steps.max(1) as f64;
            let y = line.y_at(x);
            let (xi, yi) = (x.round() as i64, y.round() as i64);
            if xi >= 0 && yi >= 0 && (xi as u32) < w && (yi as u32) < h {
                img.put_pixel(xi as u32, yi as u32, Rgb([0, 0, 0]));
            }
        }
    }
    img.save(path).map_err(|e| IoError::Write(path.to_path_buf(), e.to_string()))
}
