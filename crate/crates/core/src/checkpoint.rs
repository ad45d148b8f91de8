//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   b"TLCKPT\0\0"
//! version u32            (currently 1)
//! kind    str            ("embed" | "superposition")
//! count   u32            number of sections
//! section*:
//!   tag   u8             0 = tensor, 1 = string list, 2 = triples
//!   name  str
//!   tensor:  rows u64, cols u64, rows*cols f64 (row-major)
//!   strings: n u64, n × str
//!   triples: n u64, n × (head u32, rel u32, tail u32)
//! str = len u32, UTF-8 bytes
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::embed::EmbedModel;
use crate::error::{Error, Result};
use crate::kg::{Triple, TripleStore, Vocabulary};
use crate::superposition::SuperpositionModel;
use crate::tensor::DenseMatrix;

pub const MAGIC: &[u8; 8] = b"TLCKPT\0\0";
pub const VERSION: u32 = 1;

pub const KIND_EMBED: &str = "embed";
pub const KIND_SUPERPOSITION: &str = "superposition";

#[derive(Debug, Clone, PartialEq)]
pub enum Section {
    Tensor(String, DenseMatrix),
    Strings(String, Vec<String>),
    Triples(String, Vec<Triple>),
}

impl Section {
    pub fn name(&self) -> &str {
        match self {
            Section::Tensor(n, _) | Section::Strings(n, _) | Section::Triples(n, _) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub sections: Vec<Section>,
}

fn put_str(w: &mut impl Write, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn get_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_str(r: &mut impl Read) -> Result<String> {
    let n = get_u32(r).map_err(truncated)? as usize;
    let mut buf = vec![0; n];
    r.read_exact(&mut buf).map_err(truncated)?;
    String::from_utf8(buf).map_err(|_| Error::Checkpoint("invalid UTF-8 in string".into()))
}

fn truncated(e: io::Error) -> Error {
    Error::Checkpoint(format!("truncated or unreadable file: {e}"))
}

impl Checkpoint {
    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        put_str(w, &self.kind)?;
        w.write_all(&(self.sections.len() as u32).to_le_bytes())?;
        for s in &self.sections {
            match s {
                Section::Tensor(name, m) => {
                    w.write_all(&[0])?;
                    put_str(w, name)?;
                    w.write_all(&(m.rows() as u64).to_le_bytes())?;
                    w.write_all(&(m.cols() as u64).to_le_bytes())?;
                    for x in m.as_slice() {
                        w.write_all(&x.to_le_bytes())?;
                    }
                }
                Section::Strings(name, v) => {
                    w.write_all(&[1])?;
                    put_str(w, name)?;
                    w.write_all(&(v.len() as u64).to_le_bytes())?;
                    for s in v {
                        put_str(w, s)?;
                    }
                }
                Section::Triples(name, v) => {
                    w.write_all(&[2])?;
                    put_str(w, name)?;
                    w.write_all(&(v.len() as u64).to_le_bytes())?;
                    for t in v {
                        for x in [t.head, t.rel, t.tail] {
                            w.write_all(&x.to_le_bytes())?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0; 8];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a model checkpoint (bad magic)".into()));
        }
        let version = get_u32(r).map_err(truncated)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let kind = get_str(r)?;
        let count = get_u32(r).map_err(truncated)?;
        let mut sections = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let mut tag = [0; 1];
            r.read_exact(&mut tag).map_err(truncated)?;
            let name = get_str(r)?;
            let section = match tag[0] {
                0 => {
                    let rows = get_u64(r).map_err(truncated)? as usize;
                    let cols = get_u64(r).map_err(truncated)? as usize;
                    let len = rows
                        .checked_mul(cols)
                        .ok_or_else(|| Error::Checkpoint(format!("tensor `{name}` too large")))?;
                    let mut bytes = vec![0; len * 8];
                    r.read_exact(&mut bytes).map_err(truncated)?;
                    let data = bytes
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect();
                    Section::Tensor(name, DenseMatrix::from_vec(rows, cols, data)?)
                }
                1 => {
                    let n = get_u64(r).map_err(truncated)?;
                    let v = (0..n).map(|_| get_str(r)).collect::<Result<_>>()?;
                    Section::Strings(name, v)
                }
                2 => {
                    let n = get_u64(r).map_err(truncated)?;
                    let mut v = Vec::new();
                    for _ in 0..n {
                        let h = get_u32(r).map_err(truncated)?;
                        let rel = get_u32(r).map_err(truncated)?;
                        let t = get_u32(r).map_err(truncated)?;
                        v.push(Triple::new(h as usize, rel as usize, t as usize));
                    }
                    Section::Triples(name, v)
                }
                other => return Err(Error::Checkpoint(format!("unknown section tag {other}"))),
            };
            sections.push(section);
        }
        Ok(Checkpoint { kind, sections })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut bytes.as_slice())
    }

    fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Checkpoint(format!(
                "expected a `{kind}` checkpoint, found `{}`",
                self.kind
            )));
        }
        Ok(())
    }

    fn tensor(&self, name: &str) -> Result<&DenseMatrix> {
        self.sections
            .iter()
            .find_map(|s| match s {
                Section::Tensor(n, m) if n == name => Some(m),
                _ => None,
            })
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))
    }

    fn strings(&self, name: &str) -> Result<Vocabulary> {
        self.sections
            .iter()
            .find_map(|s| match s {
                Section::Strings(n, v) if n == name => Some(Vocabulary::from(v.clone())),
                _ => None,
            })
            .ok_or_else(|| Error::Checkpoint(format!("missing string list `{name}`")))
    }

    fn triples(&self, name: &str) -> Result<&[Triple]> {
        self.sections
            .iter()
            .find_map(|s| match s {
                Section::Triples(n, v) if n == name => Some(v.as_slice()),
                _ => None,
            })
            .ok_or_else(|| Error::Checkpoint(format!("missing triples `{name}`")))
    }
}

impl From<&EmbedModel> for Checkpoint {
    fn from(m: &EmbedModel) -> Self {
        let mut sections = vec![
            Section::Strings("entities".into(), m.entities.names().to_vec()),
            Section::Strings("relations".into(), m.relations.names().to_vec()),
            Section::Tensor("E".into(), m.e.clone()),
        ];
        for (i, mr) in m.m.iter().enumerate() {
            sections.push(Section::Tensor(format!("M/{i}"), mr.clone()));
        }
        Checkpoint {
            kind: KIND_EMBED.into(),
            sections,
        }
    }
}

impl TryFrom<&Checkpoint> for EmbedModel {
    type Error = Error;

    fn try_from(c: &Checkpoint) -> Result<Self> {
        c.expect_kind(KIND_EMBED)?;
        let entities = c.strings("entities")?;
        let relations = c.strings("relations")?;
        let e = c.tensor("E")?.clone();
        if e.rows() != entities.len() {
            return Err(Error::Checkpoint(format!(
                "E has {} rows for {} entities",
                e.rows(),
                entities.len()
            )));
        }
        let m = (0..relations.len())
            .map(|i| {
                let t = c.tensor(&format!("M/{i}"))?;
                if t.shape() != (e.cols(), e.cols()) {
                    return Err(Error::Checkpoint(format!("M/{i} has shape {:?}", t.shape())));
                }
                Ok(t.clone())
            })
            .collect::<Result<_>>()?;
        Ok(EmbedModel {
            entities: Arc::new(entities),
            relations: Arc::new(relations),
            e,
            m,
        })
    }
}

impl From<&SuperpositionModel> for Checkpoint {
    fn from(m: &SuperpositionModel) -> Self {
        Checkpoint {
            kind: KIND_SUPERPOSITION.into(),
            sections: vec![
                Section::Strings("entities".into(), m.entities.names().to_vec()),
                Section::Strings("relations".into(), m.relations.names().to_vec()),
                Section::Tensor("E".into(), m.e.clone()),
                Section::Triples("train".into(), m.facts().to_vec()),
            ],
        }
    }
}

impl TryFrom<&Checkpoint> for SuperpositionModel {
    type Error = Error;

    fn try_from(c: &Checkpoint) -> Result<Self> {
        c.expect_kind(KIND_SUPERPOSITION)?;
        let entities = Arc::new(c.strings("entities")?);
        let relations = Arc::new(c.strings("relations")?);
        let train = TripleStore::from_triples(entities, relations, c.triples("train")?.iter().copied())
            .map_err(|e| Error::Checkpoint(format!("bad training facts: {e}")))?;
        SuperpositionModel::with_embeddings(&train, c.tensor("E")?.clone())
    }
}

pub fn save_embed(model: &EmbedModel, path: impl AsRef<Path>) -> Result<()> {
    Checkpoint::from(model).save(path)
}

pub fn load_embed(path: impl AsRef<Path>) -> Result<EmbedModel> {
    EmbedModel::try_from(&Checkpoint::load(path)?)
}

pub fn save_superposition(model: &SuperpositionModel, path: impl AsRef<Path>) -> Result<()> {
    Checkpoint::from(model).save(path)
}

pub fn load_superposition(path: impl AsRef<Path>) -> Result<SuperpositionModel> {
    SuperpositionModel::try_from(&Checkpoint::load(path)?)
}
