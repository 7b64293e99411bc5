use std::path::Path;

use super::{read_bytes, write_bytes, IoError};
use crate::raster::{DepthMap, FlowField, Image, Mask};

const FLO_MAGIC: f32 = 202021.25;
const MAX_SIDE: u64 = 100_000;

/// Splits a Netpbm-style header into `n` whitespace separated tokens,
/// skipping `#` comments. Returns the tokens and the offset of the payload,
/// which starts after exactly one whitespace byte following the last token.
fn header_tokens(bytes: &[u8], n: usize) -> Result<(Vec<&str>, usize), IoError> {
    let mut tokens = Vec::with_capacity(n);
    let mut i = 0;
    while tokens.len() < n {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(IoError::BadHeader("header ended early".into()));
        }
        let tok = std::str::from_utf8(&bytes[start..i])
            .map_err(|_| IoError::BadHeader("non-ASCII header".into()))?;
        tokens.push(tok);
    }
    if i >= bytes.len() || !bytes[i].is_ascii_whitespace() {
        return Err(IoError::BadHeader("missing separator before payload".into()));
    }
    Ok((tokens, i + 1))
}

fn parse_dim(tok: &str) -> Result<usize, IoError> {
    let v: u64 = tok
        .parse()
        .map_err(|_| IoError::BadHeader(format!("bad dimension `{tok}`")))?;
    if v > MAX_SIDE {
        return Err(IoError::DimensionOverflow { width: v, height: v });
    }
    Ok(v as usize)
}

fn check_len(payload: &[u8], expected: usize) -> Result<&[u8], IoError> {
    if payload.len() < expected {
        return Err(IoError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    Ok(&payload[..expected])
}

/// Encodes a 1- or 3-channel image as little-endian PFM.
pub fn encode_pfm(img: &Image) -> Result<Vec<u8>, IoError> {
    let magic = match img.channels() {
        1 => "Pf",
        3 => "PF",
        c => return Err(crate::raster::RasterError::BadChannelCount(c).into()),
    };
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let mut out = format!("{magic}\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * c * 4);
    for y in (0..h).rev() {
        for v in &img.data()[y * w * c..(y + 1) * w * c] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Image, IoError> {
    let channels = match bytes.get(..2) {
        Some(b"Pf") => 1,
        Some(b"PF") => 3,
        _ => return Err(IoError::BadMagic("expected `Pf` or `PF`".into())),
    };
    let (tok, off) = header_tokens(bytes, 4)?;
    if tok[0].len() != 2 {
        return Err(IoError::BadMagic(format!("`{}`", tok[0])));
    }
    let (w, h) = (parse_dim(tok[1])?, parse_dim(tok[2])?);
    let scale: f64 = tok[3]
        .parse()
        .map_err(|_| IoError::BadHeader(format!("bad scale `{}`", tok[3])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(IoError::BadHeader("scale must be non-zero".into()));
    }
    let little = scale < 0.0;
    let row = w * channels;
    let payload = check_len(&bytes[off..], w * h * channels * 4)?;
    let mut data = vec![0f32; w * h * channels];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (file_row, col) = (i / row.max(1), i % row.max(1));
        data[(h - 1 - file_row) * row + col] = v;
    }
    Ok(Image::new(w, h, channels, data)?)
}

pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + flow.data().len() * 4);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as u32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as u32).to_le_bytes());
    for v in flow.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField, IoError> {
    let word = |i: usize| -> Result<[u8; 4], IoError> {
        bytes
            .get(i..i + 4)
            .map(|s| [s[0], s[1], s[2], s[3]])
            .ok_or(IoError::TruncatedPayload {
                expected: 12,
                found: bytes.len(),
            })
    };
    if f32::from_le_bytes(word(0)?) != FLO_MAGIC {
        return Err(IoError::BadMagic("expected 202021.25".into()));
    }
    let w = i32::from_le_bytes(word(4)?);
    let h = i32::from_le_bytes(word(8)?);
    if w < 0 || h < 0 {
        return Err(IoError::BadHeader(format!("negative size {w}x{h}")));
    }
    let (w, h) = (w as u64, h as u64);
    if w > MAX_SIDE || h > MAX_SIDE {
        return Err(IoError::DimensionOverflow {
            width: w,
            height: h,
        });
    }
    let expected = 12 + 8 * (w * h) as usize;
    if bytes.len() != expected {
        return Err(IoError::TruncatedPayload {
            expected,
            found: bytes.len(),
        });
    }
    let data = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(FlowField::new(w as usize, h as usize, data)?)
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary PPM; values are clamped to `[0, 1]` and rounded to 8 bits.
pub fn encode_ppm(img: &Image) -> Result<Vec<u8>, IoError> {
    if img.channels() != 3 {
        return Err(crate::raster::RasterError::BadChannelCount(img.channels()).into());
    }
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| quantize(v)));
    Ok(out)
}

fn decode_netpbm(bytes: &[u8], magic: &[u8; 2], channels: usize) -> Result<Image, IoError> {
    if bytes.get(..2) != Some(&magic[..]) {
        return Err(IoError::BadMagic(format!(
            "expected `{}`",
            String::from_utf8_lossy(magic)
        )));
    }
    let (tok, off) = header_tokens(bytes, 4)?;
    if tok[0].len() != 2 {
        return Err(IoError::BadMagic(format!("`{}`", tok[0])));
    }
    let (w, h) = (parse_dim(tok[1])?, parse_dim(tok[2])?);
    let maxval: u32 = tok[3]
        .parse()
        .map_err(|_| IoError::BadHeader(format!("bad maxval `{}`", tok[3])))?;
    if maxval == 0 || maxval > 255 {
        return Err(IoError::BadHeader(format!("unsupported maxval {maxval}")));
    }
    let payload = check_len(&bytes[off..], w * h * channels)?;
    let data = payload
        .iter()
        .map(|&b| b.min(maxval as u8) as f32 / maxval as f32)
        .collect();
    Ok(Image::new(w, h, channels, data)?)
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Image, IoError> {
    decode_netpbm(bytes, b"P6", 3)
}

/// Binary PGM with masked pixels stored as 255.
pub fn encode_pgm(mask: &Mask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.data().iter().map(|&m| if m { 255u8 } else { 0 }));
    out
}

/// Reads a binary PGM as a mask; values at or above half of maxval are set.
pub fn decode_pgm(bytes: &[u8]) -> Result<Mask, IoError> {
    let img = decode_netpbm(bytes, b"P5", 1)?;
    Ok(Mask::new(
        img.width(),
        img.height(),
        img.data().iter().map(|&v| v >= 0.5).collect(),
    )?)
}

pub fn read_pfm(path: &Path) -> Result<Image, IoError> {
    decode_pfm(&read_bytes(path)?)
}

pub fn write_pfm(path: &Path, img: &Image) -> Result<(), IoError> {
    write_bytes(path, &encode_pfm(img)?)
}

/// Reads a single-channel PFM as depth. Non-positive or non-finite samples
/// are invalid.
pub fn read_depth_pfm(path: &Path) -> Result<DepthMap, IoError> {
    Ok(DepthMap::from_image(&read_pfm(path)?)?)
}

pub fn write_depth_pfm(path: &Path, depth: &DepthMap) -> Result<(), IoError> {
    write_pfm(path, &depth.to_image())
}

pub fn read_flo(path: &Path) -> Result<FlowField, IoError> {
    decode_flo(&read_bytes(path)?)
}

pub fn write_flo(path: &Path, flow: &FlowField) -> Result<(), IoError> {
    write_bytes(path, &encode_flo(flow))
}

pub fn read_ppm(path: &Path) -> Result<Image, IoError> {
    decode_ppm(&read_bytes(path)?)
}

pub fn write_ppm(path: &Path, img: &Image) -> Result<(), IoError> {
    write_bytes(path, &encode_ppm(img)?)
}

pub fn read_pgm(path: &Path) -> Result<Mask, IoError> {
    decode_pgm(&read_bytes(path)?)
}

pub fn write_pgm(path: &Path, mask: &Mask) -> Result<(), IoError> {
    write_bytes(path, &encode_pgm(mask))
}
