//! Prepared graph artifact: vocabularies, text, triples and assertions in
//! one file so later commands skip TSV parsing.
//!
//! ```text
//! magic "SSETGRPH" | version u32
//! entities u32, then per entity: name, label, description (u32 len + UTF-8)
//! relations u32, then per relation: name, label
//! types u32, then per type: name, label
//! triples u64, then (subject u32, relation u32, object u32) each
//! per split (train, valid, test): count u64, then (entity u32, type u32) each
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, KnowledgeGraphBuilder, RelationId, Split, TypeId};

use super::{expect_eof, format_err, read_header, read_u32, read_u64, write_header};

pub const GRAPH_MAGIC: &[u8; 8] = b"SSETGRPH";
pub const GRAPH_VERSION: u32 = 1;

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R, path: &str) -> Result<String> {
    let n = read_u32(r, path)? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf).map_err(|e| format_err(path, e))?;
    String::from_utf8(buf).map_err(|e| Error::Format {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

pub fn write_graph(graph: &KnowledgeGraph, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_graph_to(graph, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_graph_to<W: Write>(g: &KnowledgeGraph, w: &mut W) -> Result<()> {
    write_header(w, GRAPH_MAGIC, GRAPH_VERSION)?;
    w.write_u32::<LittleEndian>(g.num_entities() as u32)?;
    for (i, name) in g.entity_names().iter().enumerate() {
        let t = g.entity_text(EntityId::from(i));
        write_str(w, name)?;
        write_str(w, &t.label)?;
        write_str(w, &t.description)?;
    }
    w.write_u32::<LittleEndian>(g.num_relations() as u32)?;
    for (i, name) in g.relation_names().iter().enumerate() {
        write_str(w, name)?;
        write_str(w, &g.relation_text(RelationId::from(i)).label)?;
    }
    w.write_u32::<LittleEndian>(g.num_types() as u32)?;
    for (i, name) in g.type_names().iter().enumerate() {
        write_str(w, name)?;
        write_str(w, &g.type_text(TypeId::from(i)).label)?;
    }
    w.write_u64::<LittleEndian>(g.triples().len() as u64)?;
    for t in g.triples() {
        w.write_u32::<LittleEndian>(t.subject.0)?;
        w.write_u32::<LittleEndian>(t.relation.0)?;
        w.write_u32::<LittleEndian>(t.object.0)?;
    }
    for split in Split::ALL {
        let a = g.assertions(split);
        w.write_u64::<LittleEndian>(a.len() as u64)?;
        for x in a {
            w.write_u32::<LittleEndian>(x.entity.0)?;
            w.write_u32::<LittleEndian>(x.type_.0)?;
        }
    }
    Ok(())
}

pub fn read_graph(path: &Path) -> Result<KnowledgeGraph> {
    let mut r = BufReader::new(File::open(path)?);
    read_graph_from(&mut r, &path.display().to_string())
}

pub fn read_graph_from<R: Read>(r: &mut R, path: &str) -> Result<KnowledgeGraph> {
    read_header(r, GRAPH_MAGIC, GRAPH_VERSION, path)?;
    let bad = |m: String| Error::Format {
        path: path.to_owned(),
        message: m,
    };
    let mut b = KnowledgeGraphBuilder::new();
    for _ in 0..read_u32(r, path)? {
        let name = read_str(r, path)?;
        let label = read_str(r, path)?;
        let desc = read_str(r, path)?;
        b.add_entity(&name, &label, &desc)
            .map_err(|e| bad(e.to_string()))?;
    }
    for _ in 0..read_u32(r, path)? {
        let name = read_str(r, path)?;
        let label = read_str(r, path)?;
        b.add_relation(&name, &label)
            .map_err(|e| bad(e.to_string()))?;
    }
    for _ in 0..read_u32(r, path)? {
        let name = read_str(r, path)?;
        let label = read_str(r, path)?;
        b.add_type(&name, &label).map_err(|e| bad(e.to_string()))?;
    }
    for _ in 0..read_u64(r, path)? {
        let s = EntityId(read_u32(r, path)?);
        let rel = RelationId(read_u32(r, path)?);
        let o = EntityId(read_u32(r, path)?);
        b.add_triple(s, rel, o).map_err(|e| bad(e.to_string()))?;
    }
    for split in Split::ALL {
        for _ in 0..read_u64(r, path)? {
            let e = EntityId(read_u32(r, path)?);
            let t = TypeId(read_u32(r, path)?);
            b.add_assertion(e, t, split)
                .map_err(|e| bad(e.to_string()))?;
        }
    }
    expect_eof(r, path)?;
    Ok(b.build())
}
