//! Binary container for TT tensors and TT operators.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size      | field                                        |
//! |--------|-----------|----------------------------------------------|
//! | 0      | 8         | magic `TTIGA-TT`                             |
//! | 8      | 4 (u32)   | format version, currently 1                  |
//! | 12     | 4 (u32)   | kind: 0 tensor, 1 operator                   |
//! | 16     | 8 (u64)   | number of dimensions `d`                     |
//! | 24     | 8·d       | row mode sizes                               |
//! |        | 8·d       | column mode sizes (operators only)           |
//! |        | 8·(d+1)   | ranks `r_0 .. r_d`                           |
//! |        | 8·Σ|G_k|  | cores `k = 0..d`, f64 LE, left rank fastest, |
//! |        |           | then row index, column index, right rank     |

use std::io::{Read, Write};

use crate::core3::Core3;
use crate::error::{Result, TtError};
use crate::matrix::TtMatrix;
use crate::tensor::TtTensor;

pub const MAGIC: &[u8; 8] = b"TTIGA-TT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub enum Stored {
    Tensor(TtTensor),
    Operator(TtMatrix),
}

fn write_u64<W: Write>(w: &mut W, v: usize) -> Result<()> {
    w.write_all(&(v as u64).to_le_bytes())?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    usize::try_from(u64::from_le_bytes(b)).map_err(|_| TtError::Format("size overflows usize".into()))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn write_impl<W: Write>(w: &mut W, kind: u32, rows: &[usize], cols: Option<&[usize]>, tt: &TtTensor) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&kind.to_le_bytes())?;
    write_u64(w, rows.len())?;
    for &n in rows {
        write_u64(w, n)?;
    }
    if let Some(cols) = cols {
        for &m in cols {
            write_u64(w, m)?;
        }
    }
    for r in tt.ranks() {
        write_u64(w, r)?;
    }
    let mut buf = Vec::new();
    for core in tt.cores() {
        buf.clear();
        buf.reserve(core.len() * 8);
        for v in core.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn write_tensor<W: Write>(w: &mut W, t: &TtTensor) -> Result<()> {
    write_impl(w, 0, &t.modes(), None, t)
}

pub fn write_matrix<W: Write>(w: &mut W, a: &TtMatrix) -> Result<()> {
    write_impl(w, 1, a.row_modes(), Some(a.col_modes()), a.as_tt())
}

pub fn read_any<R: Read>(r: &mut R) -> Result<Stored> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(TtError::Format("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(TtError::Format(format!("unsupported version {version}")));
    }
    let kind = read_u32(r)?;
    if kind > 1 {
        return Err(TtError::Format(format!("unknown kind {kind}")));
    }
    let d = read_u64(r)?;
    if d == 0 || d > 64 {
        return Err(TtError::Format(format!("implausible dimension count {d}")));
    }
    let rows = (0..d).map(|_| read_u64(r)).collect::<Result<Vec<_>>>()?;
    let cols = if kind == 1 { Some((0..d).map(|_| read_u64(r)).collect::<Result<Vec<_>>>()?) } else { None };
    let ranks = (0..=d).map(|_| read_u64(r)).collect::<Result<Vec<_>>>()?;
    let mut cores = Vec::with_capacity(d);
    for k in 0..d {
        let mode = match &cols {
            Some(c) => rows[k].checked_mul(c[k]),
            None => Some(rows[k]),
        }
        .ok_or_else(|| TtError::Format("mode size overflow".into()))?;
        let len = ranks[k]
            .checked_mul(mode)
            .and_then(|x| x.checked_mul(ranks[k + 1]))
            .and_then(|x| x.checked_mul(8))
            .ok_or_else(|| TtError::Format("core size overflow".into()))?;
        let mut bytes = vec![0u8; len];
        r.read_exact(&mut bytes)?;
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        cores.push(Core3::from_vec(ranks[k], mode, ranks[k + 1], data)?);
    }
    let tt = TtTensor::new(cores)?;
    Ok(match cols {
        Some(cols) => Stored::Operator(TtMatrix::from_tt(tt, rows, cols)?),
        None => Stored::Tensor(tt),
    })
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<TtTensor> {
    match read_any(r)? {
        Stored::Tensor(t) => Ok(t),
        Stored::Operator(_) => Err(TtError::Format("expected a tensor, found an operator".into())),
    }
}

pub fn read_matrix<R: Read>(r: &mut R) -> Result<TtMatrix> {
    match read_any(r)? {
        Stored::Operator(a) => Ok(a),
        Stored::Tensor(_) => Err(TtError::Format("expected an operator, found a tensor".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tensor_round_trip_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = TtTensor::random(&[3, 4, 5], 3, &mut rng);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        let back = read_tensor(&mut buf.as_slice()).unwrap();
        assert_eq!(back.ranks(), t.ranks());
        for (a, b) in back.cores().iter().zip(t.cores()) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn header_layout() {
        let t = TtTensor::ones(&[2, 3]);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 0);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 2);
        assert_eq!(buf.len(), 24 + 16 + 24 + 8 * (2 + 3));
    }

    #[test]
    fn operator_and_kind_checks() {
        let a = TtMatrix::identity(&[2, 3]);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &a).unwrap();
        assert!(read_tensor(&mut buf.as_slice()).is_err());
        let back = read_matrix(&mut buf.as_slice()).unwrap();
        assert_eq!(back.full(), a.full());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_any(&mut bad.as_slice()).is_err());
        assert!(read_any(&mut &buf[..buf.len() - 3]).is_err());
    }
}
