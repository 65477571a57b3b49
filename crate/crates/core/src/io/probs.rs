//! Probability file shared with the semantic encoder.
//!
//! ```text
//! magic "SSETPROB" | version u32 | entities u32 | types u32 | mode u8
//! mode 0 (dense):  entities x types f32, row-major
//! mode 1 (sparse): until EOF, per record:
//!                  entity u32 | count u32 | (type u32, prob f32) x count
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};

use crate::error::{Error, Result};
use crate::kg::{EntityId, TypeId};
use crate::model::ProbabilityRow;

use super::{format_err, read_f32s, read_header, read_u32, read_u8, write_f32s, write_header};

pub const PROB_MAGIC: &[u8; 8] = b"SSETPROB";
pub const PROB_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum ProbStorage {
    Dense(Vec<f32>),
    Sparse(BTreeMap<EntityId, Vec<(TypeId, f32)>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    num_entities: usize,
    num_types: usize,
    storage: ProbStorage,
}

fn check_prob(v: f32) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::OutOfRange(v as f64))
    }
}

impl ProbabilityTable {
    pub fn dense(num_entities: usize, num_types: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != num_entities * num_types {
            return Err(Error::Shape(format!(
                "{} values for {num_entities}x{num_types} dense probabilities",
                data.len()
            )));
        }
        data.iter().try_for_each(|&v| check_prob(v))?;
        Ok(ProbabilityTable {
            num_entities,
            num_types,
            storage: ProbStorage::Dense(data),
        })
    }

    /// Dense table from one row per entity, in any order. Every entity
    /// must be covered exactly once.
    pub fn dense_from_rows(
        num_entities: usize,
        num_types: usize,
        rows: &[ProbabilityRow],
    ) -> Result<Self> {
        let mut data = vec![f32::NAN; num_entities * num_types];
        let mut seen = vec![false; num_entities];
        for row in rows {
            let e = row.entity.index();
            if e >= num_entities || row.values.len() != num_types {
                return Err(Error::Shape(format!(
                    "row for entity {e} with {} values does not fit {num_entities}x{num_types}",
                    row.values.len()
                )));
            }
            seen[e] = true;
            data[e * num_types..(e + 1) * num_types].copy_from_slice(&row.values);
        }
        if let Some(e) = seen.iter().position(|s| !s) {
            return Err(Error::MissingRow(e));
        }
        Self::dense(num_entities, num_types, data)
    }

    /// Sparse table keeping the `topk` largest entries per row (ties to the
    /// lower type id), or every entry when `topk` is `None`.
    pub fn sparse_from_rows(
        num_entities: usize,
        num_types: usize,
        rows: &[ProbabilityRow],
        topk: Option<usize>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for row in rows {
            if row.entity.index() >= num_entities || row.values.len() != num_types {
                return Err(Error::Shape(format!(
                    "row for entity {} does not fit {num_entities}x{num_types}",
                    row.entity
                )));
            }
            row.values.iter().try_for_each(|&v| check_prob(v))?;
            let mut entries: Vec<(TypeId, f32)> = row
                .values
                .iter()
                .enumerate()
                .map(|(j, &v)| (TypeId::from(j), v))
                .collect();
            if let Some(k) = topk {
                entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                entries.truncate(k);
                entries.sort_by_key(|&(t, _)| t);
            }
            map.insert(row.entity, entries);
        }
        Ok(ProbabilityTable {
            num_entities,
            num_types,
            storage: ProbStorage::Sparse(map),
        })
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_types(&self) -> usize {
        self.num_types
    }

    pub fn storage(&self) -> &ProbStorage {
        &self.storage
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, ProbStorage::Dense(_))
    }

    pub fn check_dims(&self, num_entities: usize, num_types: usize) -> Result<()> {
        if self.num_entities != num_entities || self.num_types != num_types {
            return Err(Error::Shape(format!(
                "probability file is {}x{}, graph has {num_entities} entities and {num_types} types",
                self.num_entities, self.num_types
            )));
        }
        Ok(())
    }

    pub fn has_row(&self, e: EntityId) -> bool {
        match &self.storage {
            ProbStorage::Dense(_) => e.index() < self.num_entities,
            ProbStorage::Sparse(m) => m.contains_key(&e),
        }
    }

    /// Full row for `e`; entries missing from a sparse record take `floor`.
    /// `None` when a sparse table has no record for `e`.
    pub fn row(&self, e: EntityId, floor: f32) -> Option<Vec<f32>> {
        match &self.storage {
            ProbStorage::Dense(d) => {
                let i = e.index();
                (i < self.num_entities)
                    .then(|| d[i * self.num_types..(i + 1) * self.num_types].to_vec())
            }
            ProbStorage::Sparse(m) => m.get(&e).map(|entries| {
                let mut row = vec![floor; self.num_types];
                for &(t, v) in entries {
                    row[t.index()] = v;
                }
                row
            }),
        }
    }

    /// Entities that have a row, ascending.
    pub fn entities(&self) -> Vec<EntityId> {
        match &self.storage {
            ProbStorage::Dense(_) => (0..self.num_entities).map(EntityId::from).collect(),
            ProbStorage::Sparse(m) => m.keys().copied().collect(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        write_header(w, PROB_MAGIC, PROB_VERSION)?;
        w.write_u32::<LittleEndian>(self.num_entities as u32)?;
        w.write_u32::<LittleEndian>(self.num_types as u32)?;
        match &self.storage {
            ProbStorage::Dense(d) => {
                w.write_u8(0)?;
                write_f32s(w, d)?;
            }
            ProbStorage::Sparse(m) => {
                w.write_u8(1)?;
                for (e, entries) in m {
                    w.write_u32::<LittleEndian>(e.0)?;
                    w.write_u32::<LittleEndian>(entries.len() as u32)?;
                    for &(t, v) in entries {
                        w.write_u32::<LittleEndian>(t.0)?;
                        w.write_f32::<LittleEndian>(v)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Read and validate: ids in range, probabilities in `[0, 1]`, no
    /// duplicate records or entries, no trailing bytes.
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r, &path.display().to_string())
    }

    pub fn read_from<R: Read>(r: &mut R, path: &str) -> Result<Self> {
        read_header(r, PROB_MAGIC, PROB_VERSION, path)?;
        let num_entities = read_u32(r, path)? as usize;
        let num_types = read_u32(r, path)? as usize;
        let bad = |message: String| Error::Format {
            path: path.to_owned(),
            message,
        };
        match read_u8(r, path)? {
            0 => {
                let data = read_f32s(r, num_entities * num_types, path)?;
                super::expect_eof(r, path)?;
                Self::dense(num_entities, num_types, data).map_err(|e| bad(e.to_string()))
            }
            1 => {
                let mut map = BTreeMap::new();
                loop {
                    let mut first = [0u8; 4];
                    let n = r.read(&mut first)?;
                    if n == 0 {
                        break;
                    }
                    if n < 4 {
                        r.read_exact(&mut first[n..])
                            .map_err(|e| format_err(path, e))?;
                    }
                    let e = u32::from_le_bytes(first) as usize;
                    if e >= num_entities {
                        return Err(bad(format!("entity {e} out of range")));
                    }
                    let count = read_u32(r, path)? as usize;
                    if count > num_types {
                        return Err(bad(format!("entity {e} has {count} entries")));
                    }
                    let mut entries = Vec::with_capacity(count);
                    for _ in 0..count {
                        let t = read_u32(r, path)? as usize;
                        let v = read_f32s(r, 1, path)?[0];
                        if t >= num_types {
                            return Err(bad(format!("type {t} out of range")));
                        }
                        check_prob(v).map_err(|e| bad(e.to_string()))?;
                        entries.push((TypeId::from(t), v));
                    }
                    let mut ids: Vec<TypeId> = entries.iter().map(|p| p.0).collect();
                    ids.sort_unstable();
                    ids.dedup();
                    if ids.len() != entries.len() {
                        return Err(bad(format!("entity {e} repeats a type")));
                    }
                    if map.insert(EntityId::from(e), entries).is_some() {
                        return Err(bad(format!("entity {e} appears twice")));
                    }
                }
                Ok(ProbabilityTable {
                    num_entities,
                    num_types,
                    storage: ProbStorage::Sparse(map),
                })
            }
            m => Err(bad(format!("unknown mode {m}"))),
        }
    }
}
