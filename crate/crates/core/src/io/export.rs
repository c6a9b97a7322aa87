use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use ndarray::Array2;

/// Write a 16-bit grayscale PNG, mapping `[lo, hi]` linearly onto `[0, 65535]`.
pub fn write_png_gray16(path: &Path, image: &Array2<f64>, lo: f64, hi: f64) -> std::io::Result<()> {
    let (h, w) = image.dim();
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, w as u32, h as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Sixteen);
    let mut writer = enc.write_header().map_err(std::io::Error::other)?;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let bytes: Vec<u8> = image
        .iter()
        .flat_map(|&v| {
            let q = (((v - lo) / span).clamp(0.0, 1.0) * 65535.0).round() as u16;
            q.to_be_bytes()
        })
        .collect();
    writer.write_image_data(&bytes).map_err(std::io::Error::other)?;
    writer.finish().map_err(std::io::Error::other)
}

/// Gallery export of a slice, scaled by its own min/max.
pub fn write_slice_png(path: &Path, image: &Array2<f64>) -> std::io::Result<()> {
    let (lo, hi) = image
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    write_png_gray16(path, image, lo, hi)
}
