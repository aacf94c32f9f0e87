//! Binary flow dump format, used as cross-implementation regression
//! fixtures.
//!
//! Layout: 8-byte header (height, width as little-endian u32), then
//! row-major f32 `du`, row-major f32 `dv`, row-major u8 validity
//! (1 = valid).

use std::io::{self, Read, Write};

use super::FlowField;
use crate::grid::Grid;

pub fn write_flow(w: &mut impl Write, flow: &FlowField) -> io::Result<()> {
    w.write_all(&(flow.height() as u32).to_le_bytes())?;
    w.write_all(&(flow.width() as u32).to_le_bytes())?;
    for d in flow.du.as_slice() {
        w.write_all(&(*d as f32).to_le_bytes())?;
    }
    for d in flow.dv.as_slice() {
        w.write_all(&(*d as f32).to_le_bytes())?;
    }
    for &v in flow.valid.as_slice() {
        w.write_all(&[u8::from(v)])?;
    }
    Ok(())
}

pub fn read_flow(r: &mut impl Read) -> io::Result<FlowField> {
    let mut header = [0u8; 8];
    r.read_exact(&mut header)?;
    let height = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let n = width * height;

    let mut read_plane = |out: &mut Grid<f64>| -> io::Result<()> {
        let mut buf = vec![0u8; 4 * n];
        r.read_exact(&mut buf)?;
        for (i, chunk) in buf.chunks_exact(4).enumerate() {
            out.as_mut_slice()[i] = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        }
        Ok(())
    };
    let mut du = Grid::filled(width, height, 0.0);
    let mut dv = Grid::filled(width, height, 0.0);
    read_plane(&mut du)?;
    read_plane(&mut dv)?;

    let mut vbuf = vec![0u8; n];
    r.read_exact(&mut vbuf)?;
    let mut valid = Grid::filled(width, height, false);
    for (i, &b) in vbuf.iter().enumerate() {
        valid.as_mut_slice()[i] = b != 0;
    }
    Ok(FlowField { du, dv, valid })
}
