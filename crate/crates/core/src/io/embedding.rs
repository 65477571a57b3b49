//! Textual embedding file: one file per vocabulary kind.
//!
//! ```text
//! magic "SSETTEMB" | version u32 | kind u8 (0 entity, 1 relation, 2 type)
//! count u32 | dim u32 | count x dim f32 in vocabulary order
//! ```

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};

use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;
use crate::model::TextTables;
use crate::numerics::DenseMatrix;

use super::{expect_eof, read_header, read_matrix, read_u32, read_u8, write_f32s, write_header};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"SSETTEMB";
pub const EMBEDDING_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    Entity,
    Relation,
    Type,
}

impl EmbeddingKind {
    pub const ALL: [EmbeddingKind; 3] = [
        EmbeddingKind::Entity,
        EmbeddingKind::Relation,
        EmbeddingKind::Type,
    ];

    fn code(self) -> u8 {
        match self {
            EmbeddingKind::Entity => 0,
            EmbeddingKind::Relation => 1,
            EmbeddingKind::Type => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == c)
    }

    /// File name inside a text-embedding directory.
    pub fn file_name(self) -> &'static str {
        match self {
            EmbeddingKind::Entity => "entity.emb",
            EmbeddingKind::Relation => "relation.emb",
            EmbeddingKind::Type => "type.emb",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbeddingFile {
    pub kind: EmbeddingKind,
    pub matrix: DenseMatrix<f32>,
}

impl TextEmbeddingFile {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        write_header(w, EMBEDDING_MAGIC, EMBEDDING_VERSION)?;
        w.write_u8(self.kind.code())?;
        w.write_u32::<LittleEndian>(self.matrix.rows() as u32)?;
        w.write_u32::<LittleEndian>(self.matrix.cols() as u32)?;
        write_f32s(w, self.matrix.as_slice())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r, &path.display().to_string())
    }

    pub fn read_from<R: Read>(r: &mut R, path: &str) -> Result<Self> {
        read_header(r, EMBEDDING_MAGIC, EMBEDDING_VERSION, path)?;
        let code = read_u8(r, path)?;
        let kind = EmbeddingKind::from_code(code).ok_or_else(|| Error::Format {
            path: path.to_owned(),
            message: format!("unknown embedding kind {code}"),
        })?;
        let count = read_u32(r, path)? as usize;
        let dim = read_u32(r, path)? as usize;
        let matrix = read_matrix(r, count, dim, path)?;
        expect_eof(r, path)?;
        if !matrix.is_finite() {
            return Err(Error::NonFinite(format!("{path}: embedding values")));
        }
        Ok(TextEmbeddingFile { kind, matrix })
    }
}

/// Read `entity.emb`, `relation.emb` and `type.emb` from `dir` and check
/// them against the graph vocabularies.
pub fn load_text_tables(dir: &Path, graph: &KnowledgeGraph) -> Result<TextTables<f32>> {
    let mut tables = Vec::with_capacity(3);
    for kind in EmbeddingKind::ALL {
        let path = dir.join(kind.file_name());
        let file = TextEmbeddingFile::read(&path)?;
        if file.kind != kind {
            return Err(Error::Format {
                path: path.display().to_string(),
                message: format!("holds {:?} embeddings, expected {kind:?}", file.kind),
            });
        }
        tables.push(file.matrix);
    }
    let type_ = tables.pop().unwrap();
    let relation = tables.pop().unwrap();
    let entity = tables.pop().unwrap();
    let t = TextTables {
        entity,
        relation,
        type_,
    };
    t.validate(graph)?;
    Ok(t)
}

pub fn save_text_tables(tables: &TextTables<f32>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (kind, m) in
        EmbeddingKind::ALL
            .into_iter()
            .zip([&tables.entity, &tables.relation, &tables.type_])
    {
        TextEmbeddingFile {
            kind,
            matrix: m.clone(),
        }
        .write(&dir.join(kind.file_name()))?;
    }
    Ok(())
}
