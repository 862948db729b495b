//! Binary PGM (P5) and PPM (P6) with a max value of 255.

use std::fs;
use std::path::Path;

use super::Image;
use crate::error::{Error, Result};

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
    read_pnm(&bytes)
}

pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_pnm(img)).map_err(|source| Error::Write { path: path.to_path_buf(), source })
}

/// Encodes as P5 (one band) or P6 (three bands).
pub fn write_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.bands() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.samples());
    out
}

pub fn read_pnm(bytes: &[u8]) -> Result<Image> {
    let mut cursor = Header { bytes, pos: 0 };
    let magic = cursor.token().ok_or_else(|| Error::MalformedHeader("missing magic number".into()))?;
    let bands = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        _ => return Err(Error::UnsupportedFormat(magic)),
    };
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("max value")?;
    if maxval != 255 {
        return Err(Error::UnsupportedMaxValue(maxval as u32));
    }
    // exactly one whitespace byte separates the header from the payload
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(Error::MalformedHeader("missing whitespace after max value".into())),
    }
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!("empty {width}x{height} frame")));
    }
    let expected = width * height * bands;
    let payload = &bytes[cursor.pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload { expected, found: payload.len() });
    }
    Image::new(width, height, bands, payload[..expected].to_vec())
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<String> {
        self.skip_space();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        (self.pos > start).then(|| String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token().ok_or_else(|| Error::MalformedHeader(format!("missing {what}")))?;
        tok.parse().map_err(|_| Error::MalformedHeader(format!("bad {what} {tok:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reads_p5() {
        let mut bytes = b"P5 2 2 255\n".to_vec();
        bytes.extend([0, 255, 0, 255]);
        let img = read_pnm(&bytes).unwrap();
        assert_eq!((img.width(), img.height(), img.bands()), (2, 2, 1));
        assert_eq!(img.samples(), &[0, 255, 0, 255]);
    }

    #[test]
    fn reads_p6() {
        let mut bytes = b"P6 1 1 255\n".to_vec();
        bytes.extend([10, 20, 30]);
        let img = read_pnm(&bytes).unwrap();
        assert_eq!(img.bands(), 3);
        assert_eq!(img.samples(), &[10, 20, 30]);
    }

    #[test]
    fn skips_comments() {
        let mut bytes = b"P5\n# made by hand\n1 1\n255\n".to_vec();
        bytes.push(42);
        assert_eq!(read_pnm(&bytes).unwrap().samples(), &[42]);
    }

    #[test]
    fn rejects_p4() {
        let err = read_pnm(b"P4 1 1\n\x00").unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat(ref m) if m == "P4"));
    }

    #[test]
    fn rejects_16_bit() {
        let err = read_pnm(b"P5 1 1 65535\n\x00\x00").unwrap_err();
        assert!(matches!(err, Error::UnsupportedMaxValue(65535)));
    }

    #[test]
    fn rejects_truncated() {
        let err = read_pnm(b"P6 2 1 255\n\x01\x02\x03").unwrap_err();
        assert!(matches!(err, Error::TruncatedPayload { expected: 6, found: 3 }));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_image("/nonexistent/x.pgm").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.pgm"));
    }

    #[test]
    fn one_pixel_gray_file_layout() {
        let img = Image::new(1, 1, 1, vec![0]).unwrap();
        let bytes = write_pnm(&img);
        assert_eq!(bytes, b"P5\n1 1\n255\n\x00");
        assert_eq!(bytes.len(), 12);
    }

    #[test]
    fn rgb_payload_size() {
        let img = Image::filled(2, 2, 3, 9).unwrap();
        let bytes = write_pnm(&img);
        assert!(bytes.starts_with(b"P6\n"));
        assert_eq!(bytes.len() - b"P6\n2 2\n255\n".len(), 12);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.ppm");
        let img = Image::from_fn(5, 3, 3, |x, y, b| (x * 40 + y * 7 + b) as u8).unwrap();
        save_image(&img, &path).unwrap();
        assert_eq!(load_image(&path).unwrap(), img);
    }

    proptest! {
        #[test]
        fn encode_decode_identity(
            w in 1usize..12,
            h in 1usize..12,
            rgb in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let bands = if rgb { 3 } else { 1 };
            let mut state = seed;
            let img = Image::from_fn(w, h, bands, |_, _, _| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 56) as u8
            }).unwrap();
            prop_assert_eq!(read_pnm(&write_pnm(&img)).unwrap(), img);
        }
    }
}
