//! Versioned little-endian binary formats.
//!
//! Every file starts with an 8-byte magic followed by a `u32` version.
//! Readers reject unknown magics and any version other than the current one.

mod checkpoint;
mod embedding;
mod graph;
mod probs;

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

pub use checkpoint::{
    read_checkpoint, read_checkpoint_from, write_checkpoint, write_checkpoint_to, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use embedding::{
    load_text_tables, save_text_tables, EmbeddingKind, TextEmbeddingFile, EMBEDDING_MAGIC,
    EMBEDDING_VERSION,
};
pub use graph::{
    read_graph, read_graph_from, write_graph, write_graph_to, GRAPH_MAGIC, GRAPH_VERSION,
};
pub use probs::{ProbStorage, ProbabilityTable, PROB_MAGIC, PROB_VERSION};

pub(crate) fn write_header<W: Write>(w: &mut W, magic: &[u8; 8], version: u32) -> Result<()> {
    w.write_all(magic)?;
    w.write_u32::<LittleEndian>(version)?;
    Ok(())
}

pub(crate) fn read_header<R: Read>(
    r: &mut R,
    magic: &[u8; 8],
    version: u32,
    path: &str,
) -> Result<()> {
    let mut found = [0u8; 8];
    r.read_exact(&mut found).map_err(|e| format_err(path, e))?;
    if &found != magic {
        return Err(Error::Format {
            path: path.to_owned(),
            message: format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&found),
                String::from_utf8_lossy(magic)
            ),
        });
    }
    let v = r
        .read_u32::<LittleEndian>()
        .map_err(|e| format_err(path, e))?;
    if v != version {
        return Err(Error::Version {
            path: path.to_owned(),
            expected: version,
            found: v,
        });
    }
    Ok(())
}

pub(crate) fn format_err(path: &str, e: std::io::Error) -> Error {
    Error::Format {
        path: path.to_owned(),
        message: e.to_string(),
    }
}

pub(crate) fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for &v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_f32s<R: Read>(r: &mut R, n: usize, path: &str) -> Result<Vec<f32>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf).map_err(|e| format_err(path, e))?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub(crate) fn read_matrix<R: Read>(
    r: &mut R,
    rows: usize,
    cols: usize,
    path: &str,
) -> Result<DenseMatrix<f32>> {
    DenseMatrix::from_vec(rows, cols, read_f32s(r, rows * cols, path)?)
}

pub(crate) fn read_u32<R: Read>(r: &mut R, path: &str) -> Result<u32> {
    r.read_u32::<LittleEndian>()
        .map_err(|e| format_err(path, e))
}

pub(crate) fn read_u64<R: Read>(r: &mut R, path: &str) -> Result<u64> {
    r.read_u64::<LittleEndian>()
        .map_err(|e| format_err(path, e))
}

pub(crate) fn read_f64<R: Read>(r: &mut R, path: &str) -> Result<f64> {
    r.read_f64::<LittleEndian>()
        .map_err(|e| format_err(path, e))
}

pub(crate) fn read_u8<R: Read>(r: &mut R, path: &str) -> Result<u8> {
    r.read_u8().map_err(|e| format_err(path, e))
}

/// Fail unless the reader is exhausted.
pub(crate) fn expect_eof<R: Read>(r: &mut R, path: &str) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::Format {
            path: path.to_owned(),
            message: "trailing bytes after payload".into(),
        }),
    }
}
