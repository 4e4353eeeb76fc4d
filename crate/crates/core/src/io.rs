//! Binary field dumps and CSV slices.
//!
//! Layout: little-endian `u32 d`, `u32 N`, `f64 L`, `u32 domain` (0 space,
//! 1 frequency), then `N^d` interleaved `(re, im)` pairs of `f64`.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Domain, GridSpec, SampledField};

pub const HEADER_BYTES: usize = 4 + 4 + 8 + 4;

pub fn write_field<W: Write>(mut w: W, field: &SampledField) -> Result<()> {
    let g = field.grid();
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(g.points_per_axis() as u32).to_le_bytes())?;
    w.write_all(&g.extent().to_le_bytes())?;
    let tag: u32 = match field.domain() {
        Domain::Space => 0,
        Domain::Frequency => 1,
    };
    w.write_all(&tag.to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * field.values().len());
    for v in field.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<SampledField> {
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let d = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8)?;
    let l = f64::from_le_bytes(b8);
    r.read_exact(&mut b4)?;
    let domain = match u32::from_le_bytes(b4) {
        0 => Domain::Space,
        1 => Domain::Frequency,
        other => return Err(Error::Structural(format!("unknown domain tag {other}"))),
    };
    let grid = GridSpec::new(d, n, l)?;
    let mut raw = vec![0u8; 16 * grid.len()];
    r.read_exact(&mut raw)
        .map_err(|e| Error::Structural(format!("truncated field payload: {e}")))?;
    let values = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    SampledField::new(grid, values, domain)
}

/// Writes the line through `anchor` along `axis` as `coord,re,im,abs` rows.
/// `anchor` holds per-axis indices; the entry for `axis` is ignored.
pub fn write_slice_csv<W: Write>(mut w: W, field: &SampledField, axis: usize, anchor: &[usize]) -> Result<()> {
    let g = field.grid();
    if axis >= g.dim() || anchor.len() < g.dim() {
        return Err(Error::Structural("slice axis or anchor does not match the grid".into()));
    }
    let label = match field.domain() {
        Domain::Space => "x",
        Domain::Frequency => "xi",
    };
    writeln!(w, "{label},re,im,abs")?;
    let mut idx = [0usize; 3];
    idx[..g.dim()].copy_from_slice(&anchor[..g.dim()]);
    for i in 0..g.points_per_axis() {
        idx[axis] = i;
        let v = field.values()[g.ravel(&idx)];
        let c = match field.domain() {
            Domain::Space => g.coordinate(i),
            Domain::Frequency => g.frequency(i),
        };
        writeln!(w, "{c:.12e},{:.12e},{:.12e},{:.12e}", v.re, v.im, v.norm())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let g = GridSpec::new(2, 8, 3.5).unwrap();
        let f = SampledField::from_fn(g, |x| Complex64::new(x[0], -x[1] * 2.0));
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), HEADER_BYTES + 16 * 64);
        assert_eq!(&buf[..4], &2u32.to_le_bytes());
        let back = read_field(buf.as_slice()).unwrap();
        assert_eq!(back, f);
        assert!(read_field(&buf[..buf.len() - 3]).is_err());
    }

    #[test]
    fn csv_slice_has_header_and_rows() {
        let g = GridSpec::new(1, 4, 2.0).unwrap();
        let f = SampledField::from_fn(g, |x| Complex64::new(x[0], 0.0));
        let mut buf = Vec::new();
        write_slice_csv(&mut buf, &f, 0, &[0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "x,re,im,abs");
        assert!(lines[1].starts_with("-1.0"));
    }
}
