//! Raster and point-cloud file I/O.
//!
//! Disparities use the KITTI 16-bit encoding: stored value = round(d x 256),
//! stored 0 = invalid. A valid disparity that rounds to 0 therefore reads
//! back as invalid.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Luma, Rgb};

use crate::error::{Error, Result};
use crate::raster::{is_valid, DisparityMap, GrayImage, LabelMap, INVALID_DISPARITY};
use crate::road::PointCloud;

/// Fixed overlay palette; label `k` uses entry `k % 12`.
pub const PALETTE: [[u8; 3]; 12] = [
    [128, 0, 128],
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
];

const DISPARITY_SCALE: f64 = 256.0;

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "pnm"))
        .unwrap_or(false)
}

fn codec_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Codec {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| codec_err(path, e))?;
    if img.width() < 2 || img.height() < 2 {
        return Err(Error::ImageTooSmall {
            width: img.width() as usize,
            height: img.height() as usize,
        });
    }
    Ok(img)
}

fn luminance(r: u8, g: u8, b: u8) -> f32 {
    (0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)) as f32
}

/// Loads an 8-bit grayscale or RGB PNG/PGM. Color is reduced with the
/// 0.299/0.587/0.114 luminance weights; alpha is ignored.
pub fn load_gray_image(path: &Path) -> Result<GrayImage> {
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels: Vec<f32> = match &img {
        DynamicImage::ImageLuma8(b) => b.as_raw().iter().map(|&p| f32::from(p)).collect(),
        DynamicImage::ImageLumaA8(b) => b.pixels().map(|p| f32::from(p.0[0])).collect(),
        DynamicImage::ImageRgb8(b) => b.pixels().map(|p| luminance(p[0], p[1], p[2])).collect(),
        DynamicImage::ImageRgba8(b) => b.pixels().map(|p| luminance(p[0], p[1], p[2])).collect(),
        other => {
            return Err(Error::UnsupportedDepth(format!(
                "{}: expected 8-bit gray or RGB, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    GrayImage::new(w, h, pixels)
}

/// Saves as 8-bit gray, PGM (P5) for `.pgm` paths and PNG otherwise.
/// Intensities are rounded and clamped to `[0, 255]`.
pub fn save_gray_image(img: &GrayImage, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = img
        .pixels()
        .iter()
        .map(|&p| p.round().clamp(0.0, 255.0) as u8)
        .collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, bytes)
            .expect("sized buffer");
    if is_pgm(path) {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let enc = PnmEncoder::new(BufWriter::new(file))
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
        buf.write_with_encoder(enc).map_err(|e| codec_err(path, e))
    } else {
        buf.save_with_format(path, ImageFormat::Png)
            .map_err(|e| codec_err(path, e))
    }
}

/// Loads a KITTI-encoded 16-bit disparity map.
pub fn load_disparity(path: &Path) -> Result<DisparityMap> {
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = match img {
        DynamicImage::ImageLuma16(b) => b.into_raw(),
        DynamicImage::ImageLuma8(_) => {
            return Err(Error::UnsupportedDepth(format!(
                "{}: 8-bit disparity maps are rejected, expected 16-bit single channel",
                path.display()
            )))
        }
        other => {
            return Err(Error::UnsupportedDepth(format!(
                "{}: expected 16-bit single channel disparity, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let values = raw
        .into_iter()
        .map(|s| {
            if s == 0 {
                INVALID_DISPARITY
            } else {
                f64::from(s) / DISPARITY_SCALE
            }
        })
        .collect();
    DisparityMap::new(w, h, values)
}

/// Encodes a disparity map as stored 16-bit samples.
pub fn encode_disparity(map: &DisparityMap) -> Result<Vec<u16>> {
    map.values()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if !is_valid(d) {
                return Ok(0);
            }
            let scaled = (d * DISPARITY_SCALE).round();
            if scaled > f64::from(u16::MAX) {
                return Err(Error::DisparityOverflow(d, i));
            }
            Ok(scaled as u16)
        })
        .collect()
}

fn save_u16(path: &Path, w: usize, h: usize, data: Vec<u16>) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(w as u32, h as u32, data).expect("sized buffer");
    if is_pgm(path) {
        // The PNM encoder only writes 8-bit samples; 16-bit P5 is big-endian.
        let mut bytes = format!("P5\n{w} {h}\n65535\n").into_bytes();
        bytes.extend(buf.as_raw().iter().flat_map(|s| s.to_be_bytes()));
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    } else {
        buf.save_with_format(path, ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => codec_err(path, other),
            })
    }
}

/// Saves a disparity map with the KITTI x256 encoding (16-bit PNG, or PGM
/// for `.pgm` paths). Fails if any value exceeds 65535/256.
pub fn save_disparity(map: &DisparityMap, path: &Path) -> Result<()> {
    let data = encode_disparity(map)?;
    save_u16(path, map.width(), map.height(), data)
}

/// Saves a label map as a 16-bit PNG, label value = stored value.
pub fn save_labels(labels: &LabelMap, path: &Path) -> Result<()> {
    let data = labels
        .labels()
        .iter()
        .map(|&l| {
            u16::try_from(l)
                .map_err(|_| Error::InvalidParameter(format!("label {l} exceeds 16 bits")))
        })
        .collect::<Result<Vec<_>>>()?;
    save_u16(path, labels.width(), labels.height(), data)
}

/// Loads an 8- or 16-bit single-channel label image.
pub fn load_labels(path: &Path) -> Result<LabelMap> {
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let labels = match img {
        DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(u32::from).collect(),
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u32::from).collect(),
        other => {
            return Err(Error::UnsupportedDepth(format!(
                "{}: label maps must be single channel, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    LabelMap::new(w, h, labels)
}

/// Renders labels over a grayscale image. Background keeps its gray value;
/// label `k` is blended half-and-half with `PALETTE[k % 12]`.
pub fn overlay_rgb(image: &GrayImage, labels: &LabelMap) -> Result<Vec<[u8; 3]>> {
    crate::raster::ensure_same_dims(image.dims(), labels.dims())?;
    Ok(image
        .pixels()
        .iter()
        .zip(labels.labels())
        .map(|(&g, &l)| {
            let g = g.round().clamp(0.0, 255.0) as u8;
            if l == 0 {
                [g, g, g]
            } else {
                let c = PALETTE[(l % 12) as usize];
                let mix = |ch: u8| (u16::from(g) + u16::from(ch)).div_ceil(2) as u8;
                [mix(c[0]), mix(c[1]), mix(c[2])]
            }
        })
        .collect())
}

pub fn save_overlay(image: &GrayImage, labels: &LabelMap, path: &Path) -> Result<()> {
    let rgb = overlay_rgb(image, labels)?;
    let flat: Vec<u8> = rgb.into_iter().flatten().collect();
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(image.width() as u32, image.height() as u32, flat).expect("sized");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| codec_err(path, e))
}

/// Writes an ASCII PLY with `x y z` float vertices.
pub fn write_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "ply")?;
        writeln!(out, "format ascii 1.0")?;
        writeln!(out, "element vertex {}", cloud.points.len())?;
        writeln!(out, "property float x")?;
        writeln!(out, "property float y")?;
        writeln!(out, "property float z")?;
        writeln!(out, "end_header")?;
        for p in &cloud.points {
            writeln!(out, "{} {} {}", p[0] as f32, p[1] as f32, p[2] as f32)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// Reads back the vertices of an ASCII PLY written by [`write_ply`].
pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let mut count = None;
    for line in lines.by_ref() {
        if let Some(n) = line.strip_prefix("element vertex ") {
            count = n.trim().parse::<usize>().ok();
        }
        if line.trim() == "end_header" {
            break;
        }
    }
    let count = count.ok_or_else(|| codec_err(path, "missing vertex count"))?;
    let mut points = Vec::with_capacity(count);
    for line in lines.take(count) {
        let xyz: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| codec_err(path, e)))
            .collect::<Result<_>>()?;
        if xyz.len() < 3 {
            return Err(codec_err(path, "short vertex line"));
        }
        points.push([xyz[0], xyz[1], xyz[2]]);
    }
    Ok(PointCloud { points })
}
