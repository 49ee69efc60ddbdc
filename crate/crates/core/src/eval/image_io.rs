//! Binary 8-bit PGM (P5) and PPM (P6) images.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn decode_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Decode {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Reads whitespace-separated header tokens, skipping `#` comments.
struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn token(&mut self) -> Option<&'a [u8]> {
        loop {
            match self.bytes.get(self.pos)? {
                b'#' => {
                    while *self.bytes.get(self.pos)? != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|c| !c.is_ascii_whitespace())
        {
            self.pos += 1;
        }
        Some(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> std::result::Result<usize, String> {
        let tok = self.token().ok_or_else(|| format!("header ends before {what}"))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("invalid {what} '{}'", String::from_utf8_lossy(tok)))
    }
}

/// Decodes P5/P6 bytes to a `[1|3, H, W]` tensor scaled to `[0, 1]`.
pub fn decode_netpbm(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let mut r = HeaderReader { bytes, pos: 0 };
    let channels = match r.token() {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        Some(other) => {
            return Err(decode_err(
                path,
                format!(
                    "unsupported magic number '{}' (expected P5 or P6)",
                    String::from_utf8_lossy(other)
                ),
            ))
        }
        None => return Err(decode_err(path, "empty file")),
    };
    let width = r.number("width").map_err(|e| decode_err(path, e))?;
    let height = r.number("height").map_err(|e| decode_err(path, e))?;
    let maxval = r.number("maxval").map_err(|e| decode_err(path, e))?;
    if maxval != 255 {
        return Err(decode_err(
            path,
            format!("maxval {maxval} is not supported (only 8-bit, maxval 255)"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(decode_err(path, "zero image dimension"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let start = r.pos + 1;
    let need = width * height * channels;
    let raster = bytes.get(start..).unwrap_or(&[]);
    if raster.len() < need {
        return Err(decode_err(
            path,
            format!("truncated payload: {} of {need} bytes", raster.len()),
        ));
    }
    let plane = width * height;
    let mut data = vec![0.0f32; need];
    for (i, &b) in raster[..need].iter().enumerate() {
        let (pixel, c) = (i / channels, i % channels);
        data[c * plane + pixel] = b as f32 / 255.0;
    }
    Tensor::new(vec![channels, height, width], data)
}

pub fn decode_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| decode_err(path, e.to_string()))?;
    decode_netpbm(&bytes, path)
}

/// Encodes a `[1|3, H, W]` tensor as P5/P6, rounding values clamped to `[0, 1]`.
pub fn encode_netpbm(image: &Tensor) -> Result<Vec<u8>> {
    let (c, h, w) = image.dims3()?;
    let magic = match c {
        1 => "P5",
        3 => "P6",
        _ => {
            return Err(Error::Shape(format!(
                "netpbm images need 1 or 3 channels, got {c}"
            )))
        }
    };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    let plane = h * w;
    out.reserve(plane * c);
    for p in 0..plane {
        for ch in 0..c {
            let v = image.data()[ch * plane + p].clamp(0.0, 1.0);
            out.push((v * 255.0).round() as u8);
        }
    }
    Ok(out)
}

pub fn write_image(path: impl AsRef<Path>, image: &Tensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_netpbm(image)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(bytes: &[u8]) -> Result<Tensor> {
        decode_netpbm(bytes, Path::new("t.pgm"))
    }

    #[test]
    fn p5_scaling() {
        let mut b = b"P5\n2 2\n255\n".to_vec();
        b.extend_from_slice(&[0, 255, 128, 64]);
        let t = p(&b).unwrap();
        assert_eq!(t.shape(), &[1, 2, 2]);
        assert_eq!(t.data(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn p6_matches_replicated_p5() {
        let gray = [10u8, 200, 33, 97, 0, 255];
        let mut p5 = b"P5 3 2 255\n".to_vec();
        p5.extend_from_slice(&gray);
        let mut p6 = b"P6\n# a comment\n3 2\n255\n".to_vec();
        for g in gray {
            p6.extend_from_slice(&[g, g, g]);
        }
        let a = p(&p5).unwrap().conform_channels(3).unwrap();
        let b = p(&p6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_diagnostics() {
        let bad_magic = p(b"P2\n1 1\n255\n0").unwrap_err().to_string();
        assert!(bad_magic.contains("magic"), "{bad_magic}");
        let truncated = p(b"P5\n2 2\n255\n\x00\x01\x02").unwrap_err().to_string();
        assert!(truncated.contains("truncated"), "{truncated}");
        let maxval = p(b"P5\n1 1\n65535\n\x00\x00").unwrap_err().to_string();
        assert!(maxval.contains("maxval"), "{maxval}");
    }

    proptest! {
        #[test]
        fn write_read_round_trip(
            (c, h, w, raw) in (prop::sample::select(vec![1usize, 3]), 1usize..9, 1usize..9)
                .prop_flat_map(|(c, h, w)| (Just(c), Just(h), Just(w), prop::collection::vec(any::<u8>(), c * h * w)))
        ) {
            let data: Vec<f32> = raw.iter().map(|&b| b as f32 / 255.0).collect();
            let t = Tensor::new(vec![c, h, w], data).unwrap();
            let back = p(&encode_netpbm(&t).unwrap()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
