//! Binary PGM (P5) and PPM (P6) reading and writing, 8- and 16-bit.
//! 16-bit samples are big-endian per the Netpbm convention.

use crate::error::{Error, Result};
use crate::frame::Frame;
use std::io::{BufRead, Write};

/// Parses a binary PGM/PPM into a normalized frame.
pub fn read_pnm<R: BufRead>(mut source: R) -> Result<Frame> {
    let mut magic = [0u8; 2];
    source
        .read_exact(&mut magic)
        .map_err(|_| Error::Truncated("pnm magic".into()))?;
    let channels = match &magic {
        b"P5" => 1,
        b"P6" => 3,
        _ => {
            return Err(Error::BadMagic {
                expected: "P5 or P6".into(),
                found: String::from_utf8_lossy(&magic).into_owned(),
            })
        }
    };
    let width = read_header_number(&mut source)?;
    let height = read_header_number(&mut source)?;
    let maxval = read_header_number(&mut source)?;
    if width == 0 || height == 0 {
        return Err(Error::UnsupportedFormat("pnm with zero dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::UnsupportedFormat(format!("pnm maxval {maxval}")));
    }

    let samples = width * height * channels;
    let bytes_per = if maxval > 255 { 2 } else { 1 };
    let mut raw = vec![0u8; samples * bytes_per];
    source
        .read_exact(&mut raw)
        .map_err(|_| Error::Truncated(format!("pnm payload, expected {} bytes", raw.len())))?;

    let scale = 1.0 / maxval as f32;
    let data: Vec<f32> = if bytes_per == 2 {
        raw.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 * scale)
            .collect()
    } else {
        raw.iter().map(|b| *b as f32 * scale).collect()
    };
    if data.iter().any(|v| *v > 1.0) {
        return Err(Error::InvalidValue("pnm sample above maxval".into()));
    }
    Frame::new(width, height, channels, data)
}

/// One whitespace-separated header token, skipping `#` comments.
fn read_header_number<R: BufRead>(source: &mut R) -> Result<usize> {
    let mut value: Option<usize> = None;
    let mut in_comment = false;
    loop {
        let mut byte = [0u8; 1];
        source
            .read_exact(&mut byte)
            .map_err(|_| Error::Truncated("pnm header".into()))?;
        let b = byte[0];
        if in_comment {
            if b == b'\n' {
                in_comment = false;
            }
            continue;
        }
        match b {
            b'#' => in_comment = true,
            b'0'..=b'9' => {
                value = Some(value.unwrap_or(0) * 10 + (b - b'0') as usize);
                if value.unwrap() > 1 << 30 {
                    return Err(Error::UnsupportedFormat("pnm header value too large".into()));
                }
            }
            b' ' | b'\t' | b'\r' | b'\n' => {
                if let Some(v) = value {
                    return Ok(v);
                }
            }
            other => {
                return Err(Error::UnsupportedFormat(format!(
                    "unexpected byte 0x{other:02x} in pnm header"
                )))
            }
        }
    }
}

/// Writes a frame as binary PGM (1 channel) or PPM (3 channels) with 16-bit
/// samples.
pub fn write_frame_pnm<W: Write>(frame: &Frame, mut sink: W) -> Result<()> {
    let magic = if frame.channels() == 1 { "P5" } else { "P6" };
    write!(sink, "{magic}\n{} {}\n65535\n", frame.width(), frame.height())?;
    let mut buf = Vec::with_capacity(frame.data().len() * 2);
    for v in frame.data() {
        let q = (v * 65535.0).round() as u16;
        buf.extend_from_slice(&q.to_be_bytes());
    }
    sink.write_all(&buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_16bit_ppm() {
        let mut data = Vec::new();
        for i in 0..4 * 3 * 3 {
            data.push((i as f32) / 40.0);
        }
        let f = Frame::new(4, 3, 3, data).unwrap();
        let mut buf = Vec::new();
        write_frame_pnm(&f, &mut buf).unwrap();
        let back = read_pnm(buf.as_slice()).unwrap();
        assert_eq!(back.width(), 4);
        assert_eq!(back.channels(), 3);
        for (a, b) in f.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-7);
        }
    }

    #[test]
    fn reads_8bit_pgm_with_comment() {
        let mut buf = Vec::new();
        buf.extend_from_slice(b"P5\n# a comment\n2 2\n255\n");
        buf.extend_from_slice(&[0u8, 128, 255, 64]);
        let f = read_pnm(buf.as_slice()).unwrap();
        assert_eq!(f.channels(), 1);
        assert_eq!(f.get(0, 0, 0), 0.0);
        assert!((f.get(0, 1, 0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let buf = b"P2\n2 2\n255\n....".to_vec();
        assert!(matches!(read_pnm(buf.as_slice()), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let mut buf = Vec::new();
        buf.extend_from_slice(b"P5\n4 4\n255\n");
        buf.extend_from_slice(&[0u8; 7]);
        assert!(matches!(read_pnm(buf.as_slice()), Err(Error::Truncated(_))));
    }
}
