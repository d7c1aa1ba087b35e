//! Binary cache format for assembled matrices.
//!
//! Layout: 16-byte header (`b"NPSY"`, version, N, matrix id; u32 little-endian)
//! followed by N² row-major little-endian f64 values.

use std::io::{self, Read, Write};

use nalgebra::DMatrix;

const MAGIC: &[u8; 4] = b"NPSY";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixId {
    Kstar = 1,
    Slayer = 2,
}

impl MatrixId {
    fn from_u32(v: u32) -> Option<Self> {
        match v {
            1 => Some(MatrixId::Kstar),
            2 => Some(MatrixId::Slayer),
            _ => None,
        }
    }
}

pub fn write_matrix<W: Write>(out: &mut W, id: MatrixId, m: &DMatrix<f64>) -> io::Result<()> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "matrix must be square"));
    }
    let n32 = u32::try_from(n).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "matrix too large"))?;
    let mut buf = Vec::with_capacity(16 + 8 * n * n);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&n32.to_le_bytes());
    buf.extend_from_slice(&(id as u32).to_le_bytes());
    for i in 0..n {
        for j in 0..n {
            buf.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out.write_all(&buf)
}

pub fn read_matrix<R: Read>(input: &mut R) -> io::Result<(MatrixId, DMatrix<f64>)> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if &header[0..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let word = |k: usize| u32::from_le_bytes(header[k..k + 4].try_into().unwrap());
    if word(4) != VERSION {
        return Err(bad("unsupported version"));
    }
    let n = word(8) as usize;
    let id = MatrixId::from_u32(word(12)).ok_or_else(|| bad("unknown matrix id"))?;
    let mut body = vec![0u8; 8 * n * n];
    input.read_exact(&mut body)?;
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((id, DMatrix::from_row_slice(n, n, &values)))
}
