//! Little-endian primitives shared by the binary model containers.

use std::io::{Read, Write};

use crate::data::NormStats;

pub(crate) fn put_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn put_f64<W: Write>(w: &mut W, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn get_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn get_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    Ok(f64::from_bits(get_u64(r)?))
}

pub(crate) fn put_norm<W: Write>(w: &mut W, s: &NormStats) -> std::io::Result<()> {
    for v in s.min.iter().chain(&s.max) {
        put_f64(w, *v)?;
    }
    put_f64(w, s.capacity_mw)
}

pub(crate) fn get_norm<R: Read>(r: &mut R) -> std::io::Result<NormStats> {
    let mut min = [0.0; 7];
    let mut max = [0.0; 7];
    for v in min.iter_mut().chain(max.iter_mut()) {
        *v = get_f64(r)?;
    }
    Ok(NormStats {
        min,
        max,
        capacity_mw: get_f64(r)?,
    })
}
