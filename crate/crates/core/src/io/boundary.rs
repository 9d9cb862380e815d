//! Boundary maps on disk: 16-bit binary PGM ("P5", maxval 65535), so soft
//! responses survive with per-pixel error at most 1/65535.

use super::pnm;
use crate::error::{Error, Result};
use crate::forest::BoundaryMap;
use crate::frame::Frame;
use crate::plane::Plane;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub fn write_boundary_map<W: Write>(map: &BoundaryMap, mut sink: W) -> Result<()> {
    write!(sink, "P5\n{} {}\n65535\n", map.width(), map.height())?;
    let mut buf = Vec::with_capacity(map.width() * map.height() * 2);
    for v in map.plane().data() {
        let q = (v * 65535.0).round() as u16;
        buf.extend_from_slice(&q.to_be_bytes());
    }
    sink.write_all(&buf)?;
    Ok(())
}

pub fn read_boundary_map<R: BufRead>(source: R) -> Result<BoundaryMap> {
    let frame: Frame = pnm::read_pnm(source)?;
    if frame.channels() != 1 {
        return Err(Error::UnsupportedFormat("boundary map must be single-channel PGM".into()));
    }
    let plane = Plane::new(frame.width(), frame.height(), frame.data().to_vec())?;
    BoundaryMap::new(plane)
}

pub fn write_boundary_map_file(map: &BoundaryMap, path: &Path) -> Result<()> {
    write_boundary_map(map, BufWriter::new(File::create(path)?))
}

pub fn read_boundary_map_file(path: &Path) -> Result<BoundaryMap> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    read_boundary_map(BufReader::new(File::open(path)?))
}
