//! PGM (P2/P5) reading and PBM (P4) writing.

use super::{BinaryImage, GrayImage, ImageError};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    /// Skips whitespace and `#` comments (which run to end of line).
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Result<&'a [u8], ImageError> {
        self.skip_separators();
        if self.pos >= self.bytes.len() {
            return Err(ImageError::MalformedHeader("unexpected end of file".into()));
        }
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn next_number(&mut self, what: &str) -> Result<u32, ImageError> {
        let tok = self.next_token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| {
                ImageError::MalformedHeader(format!(
                    "{what}: expected a number, got {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

/// Parses a PGM file, binary (P5) or ASCII (P2). Comments in the header are
/// skipped; the payload must carry exactly width×height samples.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let mut cur = Cursor::new(bytes);
    let magic = cur.next_token()?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(ImageError::MalformedHeader(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = cur.next_number("width")? as usize;
    let height = cur.next_number("height")? as usize;
    let maxval = cur.next_number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(ImageError::MaxvalOutOfRange(maxval));
    }
    let maxval = maxval as u16;
    let expected = width * height;

    let samples = if binary {
        // exactly one whitespace byte separates the header from the payload
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(ImageError::MalformedHeader(
                "missing separator before binary payload".into(),
            ));
        }
        cur.pos += 1;
        let payload = &bytes[cur.pos..];
        let wide = maxval > 255;
        let bytes_per = if wide { 2 } else { 1 };
        if payload.len() < expected * bytes_per {
            return Err(ImageError::TruncatedPayload {
                expected,
                found: payload.len() / bytes_per,
            });
        }
        (0..expected)
            .map(|i| {
                if wide {
                    u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]])
                } else {
                    payload[i] as u16
                }
            })
            .collect::<Vec<u16>>()
    } else {
        let mut out = Vec::with_capacity(expected);
        for _ in 0..expected {
            let v = cur.next_number("sample").map_err(|e| match e {
                ImageError::MalformedHeader(msg) if msg.contains("end of file") => {
                    ImageError::TruncatedPayload {
                        expected,
                        found: out.len(),
                    }
                }
                other => other,
            })?;
            out.push(v.min(u32::from(u16::MAX)) as u16);
            if v > u32::from(maxval) {
                return Err(ImageError::SampleOutOfRange {
                    index: out.len() - 1,
                    value: v,
                    maxval,
                });
            }
        }
        out
    };
    GrayImage::new(width, height, maxval, samples)
}

/// Serializes a binary image as bit-packed PBM (P4): bit 1 = black = spin +1,
/// rows padded to whole bytes, most significant bit first.
pub fn write_pbm(img: &BinaryImage) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", img.width(), img.height()).into_bytes();
    let row_bytes = img.width().div_ceil(8);
    for y in 0..img.height() {
        let mut row = vec![0u8; row_bytes];
        for x in 0..img.width() {
            if img.spin_at(x, y) == 1 {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    out
}

/// Parses a bit-packed PBM (P4) back into a ±1 spin field.
pub fn read_pbm(bytes: &[u8]) -> Result<BinaryImage, ImageError> {
    let mut cur = Cursor::new(bytes);
    let magic = cur.next_token()?;
    if magic != b"P4" {
        return Err(ImageError::MalformedHeader(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = cur.next_number("width")? as usize;
    let height = cur.next_number("height")? as usize;
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(ImageError::MalformedHeader(
            "missing separator before binary payload".into(),
        ));
    }
    cur.pos += 1;
    let payload = &bytes[cur.pos..];
    let row_bytes = width.div_ceil(8);
    if payload.len() < row_bytes * height {
        return Err(ImageError::TruncatedPayload {
            expected: row_bytes * height,
            found: payload.len(),
        });
    }
    let mut spins = Vec::with_capacity(width * height);
    for y in 0..height {
        let row = &payload[y * row_bytes..(y + 1) * row_bytes];
        for x in 0..width {
            let bit = (row[x / 8] >> (7 - x % 8)) & 1;
            spins.push(if bit == 1 { 1 } else { -1 });
        }
    }
    BinaryImage::new(width, height, spins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageio::{binarize, Dither};

    #[test]
    fn minimal_ascii_pgm() {
        let img = read_pgm(b"P2 2 1 255 \n 0 255").unwrap();
        assert_eq!((img.width(), img.height(), img.maxval()), (2, 1, 255));
        assert_eq!(img.samples(), &[0, 255]);
    }

    #[test]
    fn binary_pgm_size_bookkeeping() {
        let mut data = b"P5 3 2 255\n".to_vec();
        data.extend_from_slice(&[0, 50, 100, 150, 200, 250]);
        let img = read_pgm(&data).unwrap();
        assert_eq!((img.width(), img.height()), (3, 2));
        assert_eq!(img.samples(), &[0, 50, 100, 150, 200, 250]);
    }

    #[test]
    fn truncated_binary_payload() {
        let mut data = b"P5 2 2 255\n".to_vec();
        data.extend_from_slice(&[0, 1, 2]);
        assert!(matches!(
            read_pgm(&data),
            Err(ImageError::TruncatedPayload {
                expected: 4,
                found: 3
            })
        ));
    }

    #[test]
    fn comments_are_skipped() {
        let img = read_pgm(b"P2 # a comment\n2 1 # another\n255\n7 9").unwrap();
        assert_eq!(img.samples(), &[7, 9]);
    }

    #[test]
    fn sixteen_bit_samples() {
        let mut data = b"P5 2 1 65535\n".to_vec();
        data.extend_from_slice(&[0x01, 0x00, 0xff, 0xff]);
        let img = read_pgm(&data).unwrap();
        assert_eq!(img.samples(), &[256, 65535]);
    }

    #[test]
    fn maxval_zero_rejected() {
        assert!(matches!(
            read_pgm(b"P2 1 1 0 \n 0"),
            Err(ImageError::MaxvalOutOfRange(0))
        ));
    }

    #[test]
    fn ascii_sample_above_maxval_rejected() {
        assert!(matches!(
            read_pgm(b"P2 2 1 100 \n 5 200"),
            Err(ImageError::SampleOutOfRange { .. })
        ));
    }

    #[test]
    fn pbm_round_trip() {
        let samples: Vec<u16> = (0..11 * 5u32).map(|i| ((i * 37) % 256) as u16).collect();
        let gray = GrayImage::new(11, 5, 255, samples).unwrap();
        let img = binarize(&gray, Dither::Floyd, 0.5).unwrap();
        let encoded = write_pbm(&img);
        let decoded = read_pbm(&encoded).unwrap();
        assert_eq!(img, decoded);
    }

    #[test]
    fn pbm_bit_layout() {
        // single row: + - - - - - - - +  packs to 0b1000_0000, 0b1000_0000
        let img = BinaryImage::new(9, 1, vec![1, -1, -1, -1, -1, -1, -1, -1, 1]).unwrap();
        let encoded = write_pbm(&img);
        let header_len = b"P4\n9 1\n".len();
        assert_eq!(&encoded[header_len..], &[0b1000_0000, 0b1000_0000]);
    }

    #[test]
    fn pbm_bad_magic() {
        assert!(matches!(
            read_pbm(b"P6 2 2\n\x00"),
            Err(ImageError::MalformedHeader(_))
        ));
    }
}
