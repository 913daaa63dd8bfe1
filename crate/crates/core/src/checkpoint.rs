//! Binary weight checkpoints.
//!
//! Layout (little endian): magic `SNNW`, `u32 n`, `u32 m`, then the f64
//! entries of `phi` (N x M), `phi_in` (M x N), `phi_fb` (N x M) and
//! `w_tilde` (M x M), each row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::network::NetworkWeights;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SNNW";

pub fn write_weights<W: Write>(w: &NetworkWeights, mut out: W) -> Result<()> {
    let (n, m) = (w.n(), w.m());
    w.check_dims(n, m)?;
    let to_u32 = |v: usize| u32::try_from(v).map_err(|_| Error::param(format!("dimension {v} exceeds u32")));
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&to_u32(n)?.to_le_bytes())?;
    out.write_all(&to_u32(m)?.to_le_bytes())?;
    for (_, mat) in w.named() {
        for r in 0..mat.nrows() {
            for c in 0..mat.ncols() {
                out.write_all(&mat[(r, c)].to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_weights<R: Read>(mut input: R) -> Result<NetworkWeights> {
    let mut head = [0u8; 12];
    input
        .read_exact(&mut head)
        .map_err(|_| Error::Checkpoint("file shorter than the 12-byte header".into()))?;
    if &head[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {:?}", &head[..4])));
    }
    let n = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes")) as usize;
    let m = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes")) as usize;
    if n == 0 || m == 0 {
        return Err(Error::Checkpoint(format!("empty dimensions {n}x{m}")));
    }
    let mut read_matrix = |rows: usize, cols: usize, name: &str| -> Result<DMatrix<f64>> {
        let mut buf = vec![0u8; rows * cols * 8];
        input
            .read_exact(&mut buf)
            .map_err(|_| Error::Checkpoint(format!("truncated while reading {name}")))?;
        let vals = buf
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")));
        Ok(DMatrix::from_row_iterator(rows, cols, vals))
    };
    let phi = read_matrix(n, m, "phi")?;
    let phi_in = read_matrix(m, n, "phi_in")?;
    let phi_fb = read_matrix(n, m, "phi_fb")?;
    let w_tilde = read_matrix(m, m, "w_tilde")?;
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after w_tilde".into()));
    }
    Ok(NetworkWeights {
        phi,
        phi_in,
        phi_fb,
        w_tilde,
    })
}

pub fn save_weights(path: impl AsRef<Path>, w: &NetworkWeights) -> Result<()> {
    write_weights(w, BufWriter::new(File::create(path)?))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<NetworkWeights> {
    read_weights(BufReader::new(File::open(path)?))
}
