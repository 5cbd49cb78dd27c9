//! Binary index layout, version 1. All integers are little-endian `u32`;
//! strings are a `u32` byte length followed by UTF-8 bytes.
//!
//! ```text
//! magic       4 bytes  "TTIX"
//! version     u32      1
//! flags       u32      bit 0: entity names were indexed
//! provenance  string
//! n_docs      u32
//!   n_docs ×  { entity_id: string, doc_len: u32 }
//! n_terms     u32
//!   n_terms × { term: string, n_postings: u32, n_postings × { doc: u32, tf: u32 } }
//! ```
//!
//! Terms are stored in ascending byte order and postings in ascending
//! document order, so encoding is deterministic. The decoder rejects any
//! input that would break the index invariants.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use super::{EntityIndex, Posting, TermEntry};
use crate::error::{Error, Result};
use crate::kb::EntityIdx;

pub const INDEX_MAGIC: &[u8; 4] = b"TTIX";
pub const INDEX_VERSION: u32 = 1;

const FLAG_NAMES: u32 = 1;

pub fn encode_index(index: &EntityIndex, provenance: &str) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(INDEX_MAGIC);
    put_u32(&mut out, INDEX_VERSION);
    put_u32(&mut out, if index.include_names { FLAG_NAMES } else { 0 });
    put_str(&mut out, provenance);
    put_u32(&mut out, index.doc_ids.len() as u32);
    for (id, len) in index.doc_ids.iter().zip(&index.doc_len) {
        put_str(&mut out, id);
        put_u32(&mut out, *len);
    }
    let terms = index.sorted_terms();
    put_u32(&mut out, terms.len() as u32);
    for (term, entry) in terms {
        put_str(&mut out, term);
        put_u32(&mut out, entry.postings.len() as u32);
        for p in &entry.postings {
            put_u32(&mut out, p.doc.0);
            put_u32(&mut out, p.tf);
        }
    }
    out
}

/// Decodes an index, returning it with its provenance string.
pub fn decode_index(bytes: &[u8]) -> Result<(EntityIndex, String)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != INDEX_MAGIC {
        return Err(bad("bad magic bytes"));
    }
    let version = r.u32()?;
    if version != INDEX_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let flags = r.u32()?;
    if flags & !FLAG_NAMES != 0 {
        return Err(bad(format!("unknown flags {flags:#x}")));
    }
    let provenance = r.string()?;

    let n_docs = r.count(8)?;
    let mut doc_ids = Vec::with_capacity(n_docs);
    let mut doc_len = Vec::with_capacity(n_docs);
    let mut seen = HashSet::with_capacity(n_docs);
    for _ in 0..n_docs {
        let id = r.string()?;
        if id.is_empty() || !seen.insert(id.clone()) {
            return Err(bad(format!("empty or duplicate entity id `{id}`")));
        }
        doc_ids.push(id);
        doc_len.push(r.u32()?);
    }

    let n_terms = r.count(8)?;
    let mut terms: HashMap<String, TermEntry> = HashMap::with_capacity(n_terms);
    let mut len_check = vec![0u64; n_docs];
    let mut prev_term: Option<String> = None;
    for _ in 0..n_terms {
        let term = r.string()?;
        if term.is_empty() || prev_term.as_deref().is_some_and(|p| p >= term.as_str()) {
            return Err(bad(format!("term `{term}` is empty or out of order")));
        }
        let n_postings = r.count(8)?;
        if n_postings == 0 {
            return Err(bad(format!("term `{term}` has no postings")));
        }
        let mut postings = Vec::with_capacity(n_postings);
        let mut cf = 0u64;
        for _ in 0..n_postings {
            let doc = r.u32()?;
            let tf = r.u32()?;
            if doc as usize >= n_docs || tf == 0 {
                return Err(bad(format!("bad posting ({doc}, {tf}) for `{term}`")));
            }
            if postings.last().is_some_and(|p: &Posting| p.doc.0 >= doc) {
                return Err(bad(format!("postings of `{term}` not strictly increasing")));
            }
            len_check[doc as usize] += u64::from(tf);
            cf += u64::from(tf);
            postings.push(Posting {
                doc: EntityIdx(doc),
                tf,
            });
        }
        prev_term = Some(term.clone());
        terms.insert(term, TermEntry { postings, cf });
    }
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    if let Some(d) = (0..n_docs).find(|&d| len_check[d] != u64::from(doc_len[d])) {
        return Err(bad(format!(
            "document `{}` length {} disagrees with its postings",
            doc_ids[d], doc_len[d]
        )));
    }
    let index = EntityIndex::from_parts(doc_ids, doc_len, terms, flags & FLAG_NAMES != 0);
    Ok((index, provenance))
}

pub fn save_index(index: &EntityIndex, provenance: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_index(index, provenance)).map_err(|e| Error::io(path, e))
}

pub fn load_index(path: impl AsRef<Path>) -> Result<(EntityIndex, String)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_index(&bytes)
}

fn bad(message: impl Into<String>) -> Error {
    Error::decode("index", message)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| bad(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Reads an element count and rejects counts the remaining input cannot
    /// hold, so a hostile header cannot trigger a huge allocation.
    fn count(&mut self, min_record: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        let remaining = self.bytes.len() - self.pos;
        if n.saturating_mul(min_record) > remaining {
            return Err(bad(format!("count {n} exceeds remaining input")));
        }
        Ok(n)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| bad("invalid UTF-8 string"))
    }
}
