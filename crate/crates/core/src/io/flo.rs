//! Middlebury `.flo` flow files: little-endian, a 4-byte sanity tag equal to
//! the float 202021.25 (the bytes spell "PIEH"), int32 width and height,
//! then width*height (u,v) float32 pairs in row-major order.

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::plane::Plane;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const TAG: f32 = 202021.25;

pub fn write_flow<W: Write>(flow: &FlowField, mut sink: W) -> Result<()> {
    sink.write_all(&TAG.to_le_bytes())?;
    sink.write_all(&(flow.width() as i32).to_le_bytes())?;
    sink.write_all(&(flow.height() as i32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(flow.width() * flow.height() * 8);
    for y in 0..flow.height() {
        for x in 0..flow.width() {
            let (u, v) = flow.at(x, y);
            buf.extend_from_slice(&u.to_le_bytes());
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    sink.write_all(&buf)?;
    Ok(())
}

pub fn read_flow<R: Read>(mut source: R) -> Result<FlowField> {
    let mut tag = [0u8; 4];
    source.read_exact(&mut tag).map_err(|_| Error::Truncated("flo tag".into()))?;
    if f32::from_le_bytes(tag).to_bits() != TAG.to_bits() {
        return Err(Error::BadMagic {
            expected: "PIEH (202021.25)".into(),
            found: format!("{tag:?}"),
        });
    }
    let width = read_i32(&mut source)?;
    let height = read_i32(&mut source)?;
    if width <= 0 || height <= 0 || width > 1 << 20 || height > 1 << 20 {
        return Err(Error::UnsupportedFormat(format!("flo dimensions {width}x{height}")));
    }
    let (width, height) = (width as usize, height as usize);
    let mut raw = vec![0u8; width * height * 8];
    source
        .read_exact(&mut raw)
        .map_err(|_| Error::Truncated(format!("flo payload, expected {} bytes", raw.len())))?;
    let mut u = Plane::zeros(width, height);
    let mut v = Plane::zeros(width, height);
    for (i, chunk) in raw.chunks_exact(8).enumerate() {
        u.data_mut()[i] = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        v.data_mut()[i] = f32::from_le_bytes([chunk[4], chunk[5], chunk[6], chunk[7]]);
    }
    FlowField::new(u, v)
}

pub fn write_flow_file(flow: &FlowField, path: &Path) -> Result<()> {
    write_flow(flow, BufWriter::new(File::create(path)?))
}

pub fn read_flow_file(path: &Path) -> Result<FlowField> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    read_flow(BufReader::new(File::open(path)?))
}

fn read_i32<R: Read>(source: &mut R) -> Result<i32> {
    let mut b = [0u8; 4];
    source.read_exact(&mut b).map_err(|_| Error::Truncated("flo header".into()))?;
    Ok(i32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_bytes_spell_pieh() {
        assert_eq!(&TAG.to_le_bytes(), b"PIEH");
    }

    #[test]
    fn zero_flow_round_trips() {
        let flow = FlowField::zeros(4, 4);
        let mut buf = Vec::new();
        write_flow(&flow, &mut buf).unwrap();
        assert_eq!(read_flow(buf.as_slice()).unwrap(), flow);
    }

    #[test]
    fn constant_flow_round_trips_bit_exact() {
        let flow = FlowField::constant(5, 3, 2.0, -1.5);
        let mut buf = Vec::new();
        write_flow(&flow, &mut buf).unwrap();
        let back = read_flow(buf.as_slice()).unwrap();
        for y in 0..3 {
            for x in 0..5 {
                let (u, v) = back.at(x, y);
                assert_eq!(u.to_bits(), 2.0f32.to_bits());
                assert_eq!(v.to_bits(), (-1.5f32).to_bits());
            }
        }
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let flow = FlowField::zeros(2, 2);
        let mut buf = Vec::new();
        write_flow(&flow, &mut buf).unwrap();
        buf[0] ^= 0xFF;
        assert!(matches!(read_flow(buf.as_slice()), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let flow = FlowField::zeros(4, 4);
        let mut buf = Vec::new();
        write_flow(&flow, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_flow(buf.as_slice()), Err(Error::Truncated(_))));
    }
}
