//! In-memory vector index with an append-only record file.
//!
//! File layout: a header line `{"format":"stforge-index","version":1,"dimension":D}`
//! followed by one record per line, either `{"op":"add","doc":{...}}` or
//! `{"op":"remove","id":"..."}`. Replaying the records in order rebuilds the
//! index. `compact` rewrites the file with only live documents through a
//! temporary file and a rename, so a crash leaves either the old or the new
//! file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::catalog::FunctionBlockEntry;
use super::embed::{dot, Embedder};
use super::upload::{chunk_text, screen_upload, CHUNK_OVERLAP, CHUNK_SIZE};
use super::{doc_id, KnowledgeDoc, KnowledgeError, Segment};

pub const INDEX_FORMAT: &str = "stforge-index";
pub const INDEX_VERSION: u32 = 1;
pub const CATALOG_SOURCE: &str = "catalog";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    dimension: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Record {
    Add { doc: KnowledgeDoc },
    Remove { id: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchHit {
    pub doc: KnowledgeDoc,
    pub score: f64,
}

pub struct KnowledgeIndex {
    docs: RwLock<BTreeMap<String, KnowledgeDoc>>,
    embedder: Box<dyn Embedder>,
    path: Option<PathBuf>,
    /// Serializes writers so file order matches map order.
    write_guard: Mutex<()>,
}

impl KnowledgeIndex {
    pub fn in_memory(embedder: Box<dyn Embedder>) -> Self {
        Self {
            docs: RwLock::new(BTreeMap::new()),
            embedder,
            path: None,
            write_guard: Mutex::new(()),
        }
    }

    /// Opens or creates a persisted index.
    pub fn open(path: &Path, embedder: Box<dyn Embedder>) -> Result<Self, KnowledgeError> {
        let mut docs = BTreeMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            let mut lines = reader.lines();
            let header: Header = match lines.next() {
                Some(l) => serde_json::from_str(&l?).map_err(|e| corrupt(1, e))?,
                None => return Err(KnowledgeError::CorruptIndex("missing header".into())),
            };
            if header.format != INDEX_FORMAT || header.version != INDEX_VERSION {
                return Err(KnowledgeError::CorruptIndex(format!(
                    "unsupported index {} v{}",
                    header.format, header.version
                )));
            }
            if header.dimension != embedder.dimension() {
                return Err(KnowledgeError::CorruptIndex(format!(
                    "index dimension {} does not match embedder dimension {}",
                    header.dimension,
                    embedder.dimension()
                )));
            }
            for (i, line) in lines.enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Record>(&line).map_err(|e| corrupt(i + 2, e))? {
                    Record::Add { doc } => {
                        docs.insert(doc.id.clone(), doc);
                    }
                    Record::Remove { id } => {
                        docs.remove(&id);
                    }
                }
            }
        } else {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            let mut f = File::create(path)?;
            writeln!(f, "{}", header_line(embedder.dimension()))?;
        }
        Ok(Self {
            docs: RwLock::new(docs),
            embedder,
            path: Some(path.to_path_buf()),
            write_guard: Mutex::new(()),
        })
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    pub fn len(&self) -> usize {
        self.docs.read().expect("index lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count(&self, segment: Segment) -> usize {
        self.docs
            .read()
            .expect("index lock")
            .values()
            .filter(|d| d.segment == segment)
            .count()
    }

    pub fn get(&self, id: &str) -> Option<KnowledgeDoc> {
        self.docs.read().expect("index lock").get(id).cloned()
    }

    pub fn docs(&self) -> Vec<KnowledgeDoc> {
        self.docs.read().expect("index lock").values().cloned().collect()
    }

    pub fn make_doc(
        &self,
        segment: Segment,
        source: &str,
        text: &str,
        mut metadata: BTreeMap<String, String>,
    ) -> KnowledgeDoc {
        metadata.insert("source".into(), source.to_string());
        KnowledgeDoc {
            id: doc_id(segment, source, text),
            segment,
            text: text.to_string(),
            metadata,
            vector: self.embedder.embed(text),
        }
    }

    /// Applies removals then additions as one step. Readers see either the
    /// state before or after.
    fn commit(&self, remove: Vec<String>, add: Vec<KnowledgeDoc>) -> Result<(), KnowledgeError> {
        if remove.is_empty() && add.is_empty() {
            return Ok(());
        }
        let _w = self.write_guard.lock().expect("writer lock");
        if let Some(path) = &self.path {
            let mut buf = String::new();
            for id in &remove {
                buf.push_str(&serde_json::to_string(&Record::Remove { id: id.clone() }).expect("record"));
                buf.push('\n');
            }
            for doc in &add {
                buf.push_str(&serde_json::to_string(&Record::Add { doc: doc.clone() }).expect("record"));
                buf.push('\n');
            }
            let mut f = OpenOptions::new().append(true).open(path)?;
            f.write_all(buf.as_bytes())?;
            f.sync_data()?;
        }
        let mut docs = self.docs.write().expect("index lock");
        for id in remove {
            docs.remove(&id);
        }
        for doc in add {
            docs.insert(doc.id.clone(), doc);
        }
        Ok(())
    }

    /// One document per entry in the FunctionBlocks segment. Re-ingesting an
    /// unchanged entry creates nothing; a changed entry replaces its old doc.
    pub fn ingest_catalog(&self, entries: &[FunctionBlockEntry]) -> Result<usize, KnowledgeError> {
        let mut names = BTreeSet::new();
        for e in entries {
            if !names.insert(e.name.to_ascii_uppercase()) {
                return Err(KnowledgeError::DuplicateEntryName(e.name.clone()));
            }
        }
        let existing = self.docs();
        let mut remove = Vec::new();
        let mut add = Vec::new();
        for e in entries {
            let mut meta = BTreeMap::new();
            meta.insert("fb_name".into(), e.name.clone());
            meta.insert("base_name".into(), e.base_name.clone());
            meta.insert("variant_tags".into(), e.tag_list());
            let doc = self.make_doc(Segment::FunctionBlocks, CATALOG_SOURCE, &e.doc_text(), meta);
            if existing.iter().any(|d| d.id == doc.id) {
                continue;
            }
            remove.extend(
                existing
                    .iter()
                    .filter(|d| d.segment == Segment::FunctionBlocks && d.fb_name() == Some(e.name.as_str()))
                    .map(|d| d.id.clone()),
            );
            add.push(doc);
        }
        let n = add.len();
        self.commit(remove, add)?;
        Ok(n)
    }

    /// Chunks text into one segment under a source name. Returns the ids of
    /// all chunks, whether new or already present.
    pub fn ingest_text(&self, segment: Segment, source: &str, text: &str) -> Result<Vec<String>, KnowledgeError> {
        let chunks = chunk_text(text, CHUNK_SIZE, CHUNK_OVERLAP);
        let existing: BTreeSet<String> = self.docs.read().expect("index lock").keys().cloned().collect();
        let mut ids = Vec::new();
        let mut add = Vec::new();
        for (i, chunk) in chunks.iter().enumerate() {
            let mut meta = BTreeMap::new();
            meta.insert("chunk".into(), i.to_string());
            let doc = self.make_doc(segment, source, chunk, meta);
            ids.push(doc.id.clone());
            if !existing.contains(&doc.id) && !add.iter().any(|d: &KnowledgeDoc| d.id == doc.id) {
                add.push(doc);
            }
        }
        self.commit(Vec::new(), add)?;
        Ok(ids)
    }

    /// Screens an uploaded file and indexes it in the Auxiliary segment.
    pub fn ingest_upload(&self, filename: &str, bytes: &[u8]) -> Result<Vec<String>, KnowledgeError> {
        let text = screen_upload(bytes)?;
        self.ingest_text(Segment::Auxiliary, filename, text)
    }

    /// Removes every document whose `source` metadata equals `source`.
    pub fn remove_source(&self, source: &str) -> Result<usize, KnowledgeError> {
        let ids: Vec<String> = self
            .docs
            .read()
            .expect("index lock")
            .values()
            .filter(|d| d.source() == Some(source))
            .map(|d| d.id.clone())
            .collect();
        let n = ids.len();
        self.commit(ids, Vec::new())?;
        Ok(n)
    }

    /// Top-k documents by cosine similarity, best first, ties by id.
    pub fn search(&self, query: &str, segment: Option<Segment>, k: usize) -> Result<Vec<SearchHit>, KnowledgeError> {
        if k == 0 {
            return Err(KnowledgeError::InvalidK);
        }
        let q = self.embedder.embed(query);
        let docs = self.docs.read().expect("index lock");
        let mut hits: Vec<SearchHit> = docs
            .values()
            .filter(|d| segment.is_none_or(|s| d.segment == s))
            .map(|d| SearchHit {
                score: dot(&q, &d.vector).clamp(-1.0, 1.0),
                doc: d.clone(),
            })
            .collect();
        if hits.is_empty() {
            return Err(KnowledgeError::EmptyIndex);
        }
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc.id.cmp(&b.doc.id)));
        hits.truncate(k);
        Ok(hits)
    }

    /// Rewrites the record file with only the live documents.
    pub fn compact(&self) -> Result<(), KnowledgeError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let _w = self.write_guard.lock().expect("writer lock");
        let docs = self.docs.read().expect("index lock");
        let tmp = path.with_extension("compact.tmp");
        {
            let mut f = File::create(&tmp)?;
            writeln!(f, "{}", header_line(self.embedder.dimension()))?;
            for doc in docs.values() {
                writeln!(
                    f,
                    "{}",
                    serde_json::to_string(&Record::Add { doc: doc.clone() }).expect("record")
                )?;
            }
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

fn header_line(dimension: usize) -> String {
    serde_json::to_string(&Header {
        format: INDEX_FORMAT.into(),
        version: INDEX_VERSION,
        dimension,
    })
    .expect("header")
}

fn corrupt(line: usize, e: serde_json::Error) -> KnowledgeError {
    KnowledgeError::CorruptIndex(format!("line {line}: {e}"))
}
