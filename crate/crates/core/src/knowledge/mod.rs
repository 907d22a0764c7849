//! Segmented knowledge base: function-block catalog, dialect excerpts, and
//! user uploads, embedded and searchable by cosine similarity.

pub mod augment;
pub mod catalog;
pub mod embed;
pub mod index;
pub mod upload;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use augment::{augment_catalog, augment_description};
pub use catalog::{
    bundled_catalog, parse_catalog, suffix_semantics, variant_tags, FbSignature, FunctionBlockEntry, VariantTag,
};
pub use embed::{Embedder, HashingEmbedder, DEFAULT_DIMENSION};
pub use index::{KnowledgeIndex, SearchHit};
pub use upload::{chunk_text, screen_upload, CHUNK_OVERLAP, CHUNK_SIZE};

/// Bundled dialect excerpts: `(source name, text)`.
pub const BUNDLED_SPECS: &[(&str, &str)] = &[
    ("declarations.txt", include_str!("../../assets/specs/declarations.txt")),
    ("datatypes.txt", include_str!("../../assets/specs/datatypes.txt")),
    (
        "program_structure.txt",
        include_str!("../../assets/specs/program_structure.txt"),
    ),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Segment {
    FunctionBlocks,
    Specs,
    Auxiliary,
}

impl Segment {
    pub const ALL: [Segment; 3] = [Segment::FunctionBlocks, Segment::Specs, Segment::Auxiliary];

    pub fn name(self) -> &'static str {
        match self {
            Segment::FunctionBlocks => "FunctionBlocks",
            Segment::Specs => "Specs",
            Segment::Auxiliary => "Auxiliary",
        }
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeDoc {
    pub id: String,
    pub segment: Segment,
    pub text: String,
    pub metadata: BTreeMap<String, String>,
    pub vector: Vec<f32>,
}

impl KnowledgeDoc {
    pub fn source(&self) -> Option<&str> {
        self.metadata.get("source").map(String::as_str)
    }

    pub fn fb_name(&self) -> Option<&str> {
        self.metadata.get("fb_name").map(String::as_str)
    }
}

/// Hex SHA-256 over segment, source, and text separated by NUL.
pub fn doc_id(segment: Segment, source: &str, text: &str) -> String {
    let mut h = Sha256::new();
    h.update(segment.name().as_bytes());
    h.update([0]);
    h.update(source.as_bytes());
    h.update([0]);
    h.update(text.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("duplicate catalog entry `{0}`")]
    DuplicateEntryName(String),
    #[error("invalid catalog entry `{name}`: {reason}")]
    InvalidEntry { name: String, reason: String },
    #[error("catalog record {line}: {message}")]
    Record { line: usize, message: String },
    #[error("binary content rejected: {0}")]
    BinaryContentRejected(String),
    #[error("encoding rejected: {0}")]
    EncodingRejected(String),
    #[error("no documents indexed for this query")]
    EmptyIndex,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("index file is corrupt: {0}")]
    CorruptIndex(String),
    #[error("index I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Loads the bundled catalog and dialect excerpts into an index.
pub fn seed_index(index: &KnowledgeIndex) -> Result<(), KnowledgeError> {
    index.ingest_catalog(&bundled_catalog())?;
    for (source, text) in BUNDLED_SPECS {
        index.ingest_text(Segment::Specs, source, text)?;
    }
    Ok(())
}
