//! On-disk formats: 8-bit RGB PNG frames, little-endian `f32` raw grids with
//! a JSON sidecar, and the LUT blob (magic, JSON header, packed cells).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::lut::LutCell;
use super::{CalibrationLUT, DepthMap, GradientField, TactileFrame};
use crate::error::{Error, Result};
use crate::grid::Grid;

pub const LUT_MAGIC: &[u8; 8] = b"TAXELLUT";
pub const LUT_VERSION: &str = "taxel-lut/1";
pub const RAW_VERSION: &str = "taxel-raw/1";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub fn write_frame_png(frame: &TactileFrame, path: &Path) -> Result<()> {
    let mut encoder = png::Encoder::new(create(path)?, frame.width() as u32, frame.height() as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let bytes: Vec<u8> = frame.pixels().iter().map(|v| (v * 255.0).round() as u8).collect();
    let mut writer = encoder.write_header().map_err(|e| Error::format(path, e.to_string()))?;
    writer.write_image_data(&bytes).map_err(|e| Error::format(path, e.to_string()))?;
    writer.finish().map_err(|e| Error::format(path, e.to_string()))
}

/// Reads an 8-bit RGB PNG; the pixel pitch is not stored in the image.
pub fn read_frame_png(path: &Path, pitch: f64) -> Result<TactileFrame> {
    let decoder = png::Decoder::new(open(path)?);
    let mut reader = decoder.read_info().map_err(|e| Error::format(path, e.to_string()))?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::format(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::format(path, e.to_string()))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format(path, "expected 8-bit RGB"));
    }
    let pixels = buf[..info.buffer_size()].iter().map(|b| *b as f64 / 255.0).collect();
    TactileFrame::new(info.width as usize, info.height as usize, pitch, pixels)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Round-trips a frame through 8-bit quantization.
pub fn quantize_frame(frame: &TactileFrame) -> TactileFrame {
    let pixels = frame.pixels().iter().map(|v| (v * 255.0).round() / 255.0).collect();
    TactileFrame::new(frame.width(), frame.height(), frame.pitch(), pixels).expect("same geometry")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSidecar {
    pub version: String,
    pub width: usize,
    pub height: usize,
    pub pitch: f64,
    /// Planes stored back to back, in this order.
    pub channels: Vec<String>,
}

pub fn sidecar_path(raw: &Path) -> PathBuf {
    raw.with_extension("json")
}

fn write_raw(path: &Path, sidecar: &RawSidecar, planes: &[&[f64]]) -> Result<()> {
    let mut out = create(path)?;
    for plane in planes {
        for v in *plane {
            out.write_all(&(*v as f32).to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    std::fs::write(&side, json + "\n").map_err(|e| Error::io(side, e))
}

fn read_raw(path: &Path, expect: &[&str]) -> Result<(RawSidecar, Vec<Vec<f64>>)> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: RawSidecar = serde_json::from_str(&text).map_err(|e| Error::format(&side, e.to_string()))?;
    if sidecar.version != RAW_VERSION {
        return Err(Error::format(&side, format!("unsupported version {}", sidecar.version)));
    }
    if sidecar.channels.iter().map(String::as_str).ne(expect.iter().copied()) {
        return Err(Error::format(&side, format!("expected channels {expect:?}, found {:?}", sidecar.channels)));
    }
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let plane = sidecar.width * sidecar.height;
    if bytes.len() != plane * expect.len() * 4 {
        return Err(Error::format(path, format!("expected {} bytes, found {}", plane * expect.len() * 4, bytes.len())));
    }
    let values: Vec<f64> = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64).collect();
    let planes = values.chunks_exact(plane.max(1)).map(<[f64]>::to_vec).collect();
    Ok((sidecar, planes))
}

pub fn write_depth_raw(d: &DepthMap, path: &Path) -> Result<()> {
    let sidecar = RawSidecar {
        version: RAW_VERSION.into(),
        width: d.width(),
        height: d.height(),
        pitch: d.pitch,
        channels: vec!["depth".into()],
    };
    write_raw(path, &sidecar, &[d.depth.as_slice()])
}

pub fn read_depth_raw(path: &Path) -> Result<DepthMap> {
    let (side, mut planes) = read_raw(path, &["depth"])?;
    let depth = Grid::from_vec(side.width, side.height, planes.remove(0));
    DepthMap::new(depth, side.pitch).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_gradient_raw(g: &GradientField, path: &Path) -> Result<()> {
    let sidecar = RawSidecar {
        version: RAW_VERSION.into(),
        width: g.width(),
        height: g.height(),
        pitch: g.pitch,
        channels: vec!["gx".into(), "gy".into(), "mask".into()],
    };
    let mask: Vec<f64> = g.mask.iter().map(|m| if *m { 1.0 } else { 0.0 }).collect();
    write_raw(path, &sidecar, &[g.gx.as_slice(), g.gy.as_slice(), &mask])
}

pub fn read_gradient_raw(path: &Path) -> Result<GradientField> {
    let (side, planes) = read_raw(path, &["gx", "gy", "mask"])?;
    let mut planes = planes.into_iter();
    let mut next = || Grid::from_vec(side.width, side.height, planes.next().expect("three planes"));
    let (gx, gy, mask) = (next(), next(), next());
    Ok(GradientField { gx, gy, mask: mask.as_slice().iter().map(|v| *v != 0.0).collect(), pitch: side.pitch })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LutHeader {
    pub version: String,
    pub bins: usize,
    pub lower: [f64; 3],
    pub bin_width: [f64; 3],
    pub mask_threshold: f64,
    pub filled_cells: usize,
    pub fill_fraction: f64,
}

/// Layout: `TAXELLUT`, `u32` header length, JSON header, then per cell
/// `f64 gx, f64 gy, u64 count` (little endian) in `(r, g, b)` row-major order.
pub fn write_lut(lut: &CalibrationLUT, path: &Path) -> Result<()> {
    let header = LutHeader {
        version: LUT_VERSION.into(),
        bins: lut.bins(),
        lower: lut.lower(),
        bin_width: lut.bin_width(),
        mask_threshold: lut.mask_threshold(),
        filled_cells: lut.filled_cells(),
        fill_fraction: lut.fill_fraction(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    out.write_all(LUT_MAGIC).map_err(io)?;
    out.write_all(&(json.len() as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&json).map_err(io)?;
    for cell in lut.cells() {
        out.write_all(&cell.gx.to_le_bytes()).map_err(io)?;
        out.write_all(&cell.gy.to_le_bytes()).map_err(io)?;
        out.write_all(&cell.count.to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_lut(path: &Path) -> Result<CalibrationLUT> {
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::format(path, msg.to_string());
    if bytes.len() < 12 || &bytes[..8] != LUT_MAGIC {
        return Err(bad("missing LUT magic"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = 12 + hlen;
    if bytes.len() < body {
        return Err(bad("truncated LUT header"));
    }
    let header: LutHeader = serde_json::from_slice(&bytes[12..body]).map_err(|e| Error::format(path, e.to_string()))?;
    if header.version != LUT_VERSION {
        return Err(Error::format(path, format!("unsupported LUT version {}", header.version)));
    }
    let n = header.bins.pow(3);
    if bytes.len() != body + n * 24 {
        return Err(bad("LUT cell block has the wrong length"));
    }
    let cells = bytes[body..]
        .chunks_exact(24)
        .map(|c| LutCell {
            gx: f64::from_le_bytes(c[0..8].try_into().expect("8 bytes")),
            gy: f64::from_le_bytes(c[8..16].try_into().expect("8 bytes")),
            count: u64::from_le_bytes(c[16..24].try_into().expect("8 bytes")),
        })
        .collect();
    Ok(CalibrationLUT::from_parts(header.bins, header.lower, header.bin_width, header.mask_threshold, cells))
}
