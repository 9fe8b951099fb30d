//! PFM depth maps and PGM label masks.

use std::path::Path;

use super::{read_bytes, widen_f32, write_bytes, FormatError};
use crate::image::{DepthImage, LabelImage};

/// Reads `n` whitespace-separated header tokens (skipping `#` comments) and
/// the single whitespace byte that ends the header. Returns the tokens and
/// the payload offset.
fn header_tokens(bytes: &[u8], n: usize) -> Result<(Vec<String>, usize), FormatError> {
    let mut tokens = Vec::with_capacity(n);
    let mut i = 0;
    while tokens.len() < n {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i || start > 64 * n + 1024 {
            return Err(FormatError::Header(format!("expected {n} header fields, found {}", tokens.len())));
        }
        let tok = std::str::from_utf8(&bytes[start..i]).map_err(|_| FormatError::Header("non-ASCII header".into()))?;
        tokens.push(tok.to_string());
    }
    if i >= bytes.len() {
        return Err(FormatError::Truncated { expected: i as u64 + 1, found: bytes.len() as u64 });
    }
    Ok((tokens, i + 1))
}

fn parse_dim(tok: &str) -> Result<usize, FormatError> {
    match tok.parse::<usize>() {
        Ok(v) if v > 0 && v <= 1 << 20 => Ok(v),
        _ => Err(FormatError::Header(format!("bad image dimension {tok:?}"))),
    }
}

fn exact_payload(bytes: &[u8], offset: usize, need: usize) -> Result<&[u8], FormatError> {
    let have = bytes.len() - offset;
    if have < need {
        return Err(FormatError::Truncated { expected: (offset + need) as u64, found: bytes.len() as u64 });
    }
    if have > need {
        return Err(FormatError::TrailingBytes((have - need) as u64));
    }
    Ok(&bytes[offset..])
}

/// Grayscale little-endian PFM; rows are stored bottom to top. Depth values
/// are narrowed to `f32`.
pub fn encode_pfm(img: &DepthImage) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    out.reserve(img.data.len() * 4);
    for row in img.data.chunks(img.width).rev() {
        for &v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8]) -> Result<DepthImage, FormatError> {
    if bytes.len() < 2 || &bytes[..2] != b"Pf" {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(FormatError::BadMagic { expected: "Pf", found });
    }
    let (tok, offset) = header_tokens(bytes, 4)?;
    if tok[0] != "Pf" {
        return Err(FormatError::BadMagic { expected: "Pf", found: tok[0].clone() });
    }
    let (w, h) = (parse_dim(&tok[1])?, parse_dim(&tok[2])?);
    let scale: f64 = tok[3].parse().map_err(|_| FormatError::Header(format!("bad scale {:?}", tok[3])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(FormatError::Header(format!("bad scale {scale}")));
    }
    let little = scale < 0.0;
    let payload = exact_payload(bytes, offset, w * h * 4)?;
    let mut data = vec![0.0; w * h];
    for (r, src) in payload.chunks_exact(w * 4).enumerate() {
        let row = h - 1 - r;
        for (c, b) in src.chunks_exact(4).enumerate() {
            let b: [u8; 4] = b.try_into().unwrap();
            let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
            data[row * w + c] = widen_f32(v);
        }
    }
    DepthImage::from_data(w, h, data).map_err(|e| FormatError::Value(e.to_string()))
}

/// Binary 16-bit PGM (big-endian samples).
pub fn encode_pgm(img: &LabelImage) -> Result<Vec<u8>, FormatError> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width, img.height).into_bytes();
    out.reserve(img.data.len() * 2);
    for &v in &img.data {
        let v = u16::try_from(v).map_err(|_| FormatError::Value(format!("label {v} does not fit 16 bits")))?;
        out.extend_from_slice(&v.to_be_bytes());
    }
    Ok(out)
}

/// Reads 8- or 16-bit binary PGM.
pub fn decode_pgm(bytes: &[u8]) -> Result<LabelImage, FormatError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(FormatError::BadMagic { expected: "P5", found });
    }
    let (tok, offset) = header_tokens(bytes, 4)?;
    if tok[0] != "P5" {
        return Err(FormatError::BadMagic { expected: "P5", found: tok[0].clone() });
    }
    let (w, h) = (parse_dim(&tok[1])?, parse_dim(&tok[2])?);
    let maxval: u32 = match tok[3].parse() {
        Ok(v) if (1..=65535).contains(&v) => v,
        _ => return Err(FormatError::Header(format!("bad maxval {:?}", tok[3]))),
    };
    let data: Vec<u32> = if maxval < 256 {
        exact_payload(bytes, offset, w * h)?.iter().map(|&b| u32::from(b)).collect()
    } else {
        exact_payload(bytes, offset, w * h * 2)?.chunks_exact(2).map(|b| u32::from(u16::from_be_bytes([b[0], b[1]]))).collect()
    };
    if let Some(v) = data.iter().find(|&&v| v > maxval) {
        return Err(FormatError::Value(format!("sample {v} above maxval {maxval}")));
    }
    LabelImage::from_data(w, h, data).map_err(|e| FormatError::Value(e.to_string()))
}

pub fn save_pfm(img: &DepthImage, path: &Path) -> Result<(), FormatError> {
    write_bytes(path, &encode_pfm(img))
}

pub fn load_pfm(path: &Path) -> Result<DepthImage, FormatError> {
    decode_pfm(&read_bytes(path)?)
}

pub fn save_pgm(img: &LabelImage, path: &Path) -> Result<(), FormatError> {
    write_bytes(path, &encode_pgm(img)?)
}

pub fn load_pgm(path: &Path) -> Result<LabelImage, FormatError> {
    decode_pgm(&read_bytes(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_round_trip_and_orientation() {
        let img = DepthImage::from_data(3, 2, vec![1.5, f64::INFINITY, 0.25, 4.0, 5.0, 6.0]).unwrap();
        let bytes = encode_pfm(&img);
        assert!(bytes.starts_with(b"Pf\n3 2\n-1.0\n"));
        // first stored row is the bottom one
        assert_eq!(&bytes[12..16], &4.0f32.to_le_bytes());
        assert_eq!(decode_pfm(&bytes).unwrap(), img);
        assert!(matches!(decode_pfm(&bytes[..bytes.len() - 2]), Err(FormatError::Truncated { .. })));
        assert!(matches!(decode_pfm(b"PF\n1 1\n-1\n"), Err(FormatError::BadMagic { .. })));
    }

    #[test]
    fn pgm_round_trip() {
        let img = LabelImage::from_data(2, 2, vec![0, 1, 1003, 65535]).unwrap();
        let bytes = encode_pgm(&img).unwrap();
        assert_eq!(decode_pgm(&bytes).unwrap(), img);
        assert!(encode_pgm(&LabelImage::from_data(1, 1, vec![70000]).unwrap()).is_err());
        let eight = b"P5\n# comment\n2 1\n255\n\x03\x04";
        assert_eq!(decode_pgm(eight).unwrap().data, vec![3, 4]);
        assert!(matches!(decode_pgm(b"P5\n2 1\n3\n\x03\x04"), Err(FormatError::Value(_))));
        assert!(matches!(decode_pgm(b"P5\n2 1"), Err(FormatError::Header(_))));
    }
}
