//! Training checkpoint.
//!
//! ```text
//! magic "SSETCKPT" | version u32
//! text_dim u32 (0 = structural only) | struct_dim u32 | dim u32
//! entities u32 | relations u32 | types u32 | hops u32 | heads u32
//! temps f32 x heads | norm_eps f64 | epoch u64
//! text tables (entity, relation, type) when text_dim > 0
//! parameter tensors in SkaParams::tensors order, raw f32
//! adam u8 (0/1); when 1: step u64 | lr f64 | beta1 f64 | beta2 f64 | eps f64
//!                        first moments, then second moments, same order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};

use crate::error::{Error, Result};
use crate::model::{Mlp, SkaModel, SkaParams, TextTables, TrainState};
use crate::numerics::{AdamConfig, AdamState, DenseMatrix};

use super::{
    expect_eof, read_f32s, read_f64, read_header, read_matrix, read_u32, read_u64, read_u8,
    write_f32s, write_header,
};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SSETCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(state: &TrainState, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint_to(state, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_checkpoint_to<W: Write>(state: &TrainState, w: &mut W) -> Result<()> {
    let m = &state.model;
    let p = &m.params;
    write_header(w, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let text_dim = m.text.as_ref().map_or(0, TextTables::dim);
    for v in [
        text_dim,
        p.mlp_struct.input_dim(),
        m.dim(),
        p.entity_struct.rows(),
        p.relation_struct.rows(),
        p.type_struct.rows(),
        m.hops,
        m.temps.len(),
    ] {
        w.write_u32::<LittleEndian>(v as u32)?;
    }
    write_f32s(w, &m.temps)?;
    w.write_f64::<LittleEndian>(m.norm_eps as f64)?;
    w.write_u64::<LittleEndian>(state.epoch as u64)?;
    if let Some(t) = &m.text {
        for table in [&t.entity, &t.relation, &t.type_] {
            write_f32s(w, table.as_slice())?;
        }
    }
    for t in p.tensors() {
        write_f32s(w, t.as_slice())?;
    }
    w.write_u8(1)?;
    let a = &state.adam;
    w.write_u64::<LittleEndian>(a.step)?;
    for v in [a.config.lr, a.config.beta1, a.config.beta2, a.config.eps] {
        w.write_f64::<LittleEndian>(v)?;
    }
    for t in a.first.iter().chain(&a.second) {
        write_f32s(w, t.as_slice())?;
    }
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<TrainState> {
    let mut r = BufReader::new(File::open(path)?);
    read_checkpoint_from(&mut r, &path.display().to_string())
}

pub fn read_checkpoint_from<R: Read>(r: &mut R, path: &str) -> Result<TrainState> {
    read_header(r, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, path)?;
    let mut dims = [0usize; 8];
    for d in &mut dims {
        *d = read_u32(r, path)? as usize;
    }
    let [text_dim, struct_dim, dim, n_ent, n_rel, n_typ, hops, heads] = dims;
    if struct_dim == 0 || dim == 0 || hops == 0 || heads == 0 {
        return Err(Error::Format {
            path: path.to_owned(),
            message: "zero dimension in checkpoint header".into(),
        });
    }
    let temps = read_f32s(r, heads, path)?;
    let norm_eps = read_f64(r, path)? as f32;
    let epoch = read_u64(r, path)? as usize;

    let text = if text_dim > 0 {
        Some(TextTables {
            entity: read_matrix(r, n_ent, text_dim, path)?,
            relation: read_matrix(r, n_rel, text_dim, path)?,
            type_: read_matrix(r, n_typ, text_dim, path)?,
        })
    } else {
        None
    };

    let mut params = SkaParams {
        entity_struct: DenseMatrix::zeros(n_ent, struct_dim),
        relation_struct: DenseMatrix::zeros(n_rel, struct_dim),
        type_struct: DenseMatrix::zeros(n_typ, struct_dim),
        mlp_text: (text_dim > 0).then(|| Mlp::zeros(text_dim, dim, dim)),
        mlp_struct: Mlp::zeros(struct_dim, dim, dim),
        cls_weight: DenseMatrix::zeros(n_typ, dim),
        cls_bias: DenseMatrix::zeros(1, n_typ),
    };
    for t in params.tensors_mut() {
        let (rows, cols) = t.shape();
        *t = read_matrix(r, rows, cols, path)?;
    }
    let shapes = params.shapes();

    let adam = match read_u8(r, path)? {
        0 => AdamState::new(&shapes, AdamConfig::default()),
        1 => {
            let step = read_u64(r, path)?;
            let config = AdamConfig {
                lr: read_f64(r, path)?,
                beta1: read_f64(r, path)?,
                beta2: read_f64(r, path)?,
                eps: read_f64(r, path)?,
            };
            let read_all = |r: &mut R| -> Result<Vec<DenseMatrix<f32>>> {
                shapes
                    .iter()
                    .map(|&(rows, cols)| read_matrix(r, rows, cols, path))
                    .collect()
            };
            let first = read_all(r)?;
            let second = read_all(r)?;
            AdamState {
                config,
                step,
                first,
                second,
            }
        }
        other => {
            return Err(Error::Format {
                path: path.to_owned(),
                message: format!("bad optimizer flag {other}"),
            })
        }
    };
    expect_eof(r, path)?;

    let model = SkaModel {
        text,
        params,
        temps,
        hops,
        norm_eps,
    };
    if !model.params.is_finite() {
        return Err(Error::NonFinite(format!("{path}: parameters")));
    }
    Ok(TrainState { model, adam, epoch })
}
