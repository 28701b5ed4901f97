//! Netpbm greymaps: binary (P5, 8 or 16 bit) and plain (P2).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::RawImage;

fn bad(path: &Path, reason: impl Into<String>) -> Error {
    Error::TruncatedFile { path: path.to_path_buf(), reason: reason.into() }
}

/// Splits the header into whitespace separated tokens, skipping comments.
/// Returns the tokens and the offset just past the single whitespace byte
/// that follows the last one.
fn header_tokens(data: &[u8], count: usize) -> Option<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < data.len() && (data[i].is_ascii_whitespace() || data[i] == b'#') {
            if data[i] == b'#' {
                while i < data.len() && data[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < data.len() && !data[i].is_ascii_whitespace() && data[i] != b'#' {
            i += 1;
        }
        if start == i {
            return None;
        }
        tokens.push(String::from_utf8_lossy(&data[start..i]).into_owned());
    }
    Some((tokens, i + 1))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<RawImage> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| bad(path, e.to_string()))?;
    let (tokens, body) = header_tokens(&data, 4).ok_or_else(|| bad(path, "incomplete PGM header"))?;
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad(path, format!("bad header field {s:?}")));
    let (width, height, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(bad(path, "bad PGM dimensions"));
    }
    let n = width * height;
    let values: Vec<f64> = match tokens[0].as_str() {
        "P5" => {
            let bytes = if maxval < 256 { 1 } else { 2 };
            let payload = data.get(body..body + n * bytes).ok_or_else(|| bad(path, "PGM raster ends early"))?;
            if bytes == 1 {
                payload.iter().map(|&b| b as f64).collect()
            } else {
                payload.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64).collect()
            }
        }
        "P2" => {
            let rest = data.get(body.min(data.len())..).unwrap_or(&[]);
            let (vals, _) = header_tokens(rest, n).ok_or_else(|| bad(path, "PGM raster ends early"))?;
            vals.iter().map(|s| num(s).map(|v| v as f64)).collect::<Result<_>>()?
        }
        other => return Err(bad(path, format!("unsupported PGM magic {other:?}"))),
    };
    RawImage::new(height, width, values)
}

/// Writes an 8-bit binary greymap, scaling the image maximum to 255.
pub fn write_pgm(image: &RawImage, path: impl AsRef<Path>) -> Result<()> {
    let max = image.data().iter().fold(0.0f64, |m, &v| m.max(v));
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|&v| (v.max(0.0) * scale).round().min(255.0) as u8));
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let img = RawImage::from_fn(3, 4, |i, j| (i * 4 + j) as f64 * 255.0 / 11.0);
        write_pgm(&img, &p).unwrap();
        let back = read_pgm(&p).unwrap();
        assert_eq!((back.height(), back.width()), (3, 4));
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).abs() <= 0.5);
        }
    }

    #[test]
    fn plain_with_comment() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.pgm");
        fs::write(&p, "P2\n# note\n2 2\n15\n0 1\n2 15\n").unwrap();
        assert_eq!(read_pgm(&p).unwrap().data(), &[0.0, 1.0, 2.0, 15.0]);
    }

    #[test]
    fn truncated_raster() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.pgm");
        fs::write(&p, b"P5 4 4 255\n\x01\x02").unwrap();
        assert!(matches!(read_pgm(&p), Err(Error::TruncatedFile { .. })));
    }
}
