//! Inverted index construction and a sectioned, checksummed on-disk format.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analyzer::{Analyzer, AnalyzerConfig};
use crate::error::{Error, Result};
use crate::scoring::quantize_len;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
}

/// Corpus-level statistics consumed by the scoring formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub num_docs: u64,
    pub total_tokens: u64,
    pub avgdl: f64,
    pub df: HashMap<String, u64>,
}

impl CorpusStats {
    pub fn df(&self, term: &str) -> u64 {
        self.df.get(term).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    pub stats: CorpusStats,
    /// term -> postings sorted by internal doc id.
    pub postings: HashMap<String, Vec<Posting>>,
    pub doc_len_exact: Vec<u32>,
    pub doc_len_quantized: Vec<u8>,
    /// internal doc id -> external doc id (insertion order).
    pub doc_ids: Vec<String>,
    pub analyzer_config: AnalyzerConfig,
}

impl Index {
    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn analyzer(&self) -> Analyzer {
        Analyzer::new(self.analyzer_config.clone())
    }
}

/// Builds an index over the corpus stream. Internal ids follow stream order;
/// empty documents get length 0 and no postings.
pub fn build_index<I>(corpus: I, config: &AnalyzerConfig) -> Result<Index>
where
    I: IntoIterator<Item = Document>,
{
    let analyzer = Analyzer::new(config.clone());
    let mut doc_ids = Vec::new();
    let mut seen: HashMap<String, u32> = HashMap::new();
    let mut doc_len_exact = Vec::new();
    let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
    let mut df: HashMap<String, u64> = HashMap::new();
    let mut total_tokens: u64 = 0;

    for document in corpus {
        if document.doc_id.is_empty() {
            return Err(Error::data("empty doc_id in corpus"));
        }
        let internal = doc_ids.len() as u32;
        match seen.entry(document.doc_id.clone()) {
            Entry::Occupied(_) => {
                return Err(Error::data(format!("duplicate doc_id: {}", document.doc_id)));
            }
            Entry::Vacant(v) => {
                v.insert(internal);
            }
        }
        let terms = analyzer.analyze(&document.text);
        doc_len_exact.push(terms.len() as u32);
        total_tokens += terms.len() as u64;
        let mut tf: HashMap<&str, u32> = HashMap::new();
        for t in &terms.terms {
            *tf.entry(t.as_str()).or_insert(0) += 1;
        }
        for (term, count) in tf {
            postings
                .entry(term.to_string())
                .or_default()
                .push(Posting { doc: internal, tf: count });
            *df.entry(term.to_string()).or_insert(0) += 1;
        }
        doc_ids.push(document.doc_id);
    }

    if doc_ids.is_empty() {
        return Err(Error::data("empty corpus"));
    }
    // Postings were appended in stream order, so they are already sorted by
    // internal doc id.
    let num_docs = doc_ids.len() as u64;
    let doc_len_quantized = doc_len_exact.iter().map(|&l| quantize_len(l)).collect();
    Ok(Index {
        stats: CorpusStats {
            num_docs,
            total_tokens,
            avgdl: total_tokens as f64 / num_docs as f64,
            df,
        },
        postings,
        doc_len_exact,
        doc_len_quantized,
        doc_ids,
        analyzer_config: config.clone(),
    })
}

/// Reads a JSON-lines corpus: one object per line with "id" and "contents".
/// Lines that are not valid UTF-8 JSON are reported and skipped.
pub fn read_jsonl_corpus(path: &Path) -> Result<Vec<Document>> {
    #[derive(Deserialize)]
    struct Line {
        id: String,
        contents: String,
    }
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut docs = Vec::new();
    let mut buf = Vec::new();
    let mut lineno = 0usize;
    let mut reader = reader;
    loop {
        buf.clear();
        let n = read_line_bytes(&mut reader, &mut buf)?;
        if n == 0 {
            break;
        }
        lineno += 1;
        if buf.iter().all(|b| b.is_ascii_whitespace()) {
            continue;
        }
        let text = match std::str::from_utf8(&buf) {
            Ok(t) => t,
            Err(_) => {
                log::warn!("{}:{lineno}: invalid UTF-8, document skipped", path.display());
                continue;
            }
        };
        let line: Line = serde_json::from_str(text).map_err(|e| Error::DataAt {
            path: path.display().to_string(),
            line: lineno,
            msg: format!("bad corpus line: {e}"),
        })?;
        docs.push(Document { doc_id: line.id, text: line.contents });
    }
    Ok(docs)
}

fn read_line_bytes<R: std::io::BufRead>(reader: &mut R, buf: &mut Vec<u8>) -> Result<usize> {
    Ok(reader.read_until(b'\n', buf)?)
}

const MAGIC: &[u8; 4] = b"LXIX";
const FORMAT_VERSION: u32 = 1;

/// Writes the sectioned little-endian format: header (with the build-time
/// analyzer config), id map, lengths, postings, trailing checksum.
pub fn save_index(index: &Index, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = HashingWriter { inner: BufWriter::new(file), hasher: Sha256::new() };

    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    let config = serde_json::to_vec(&index.analyzer_config)
        .map_err(|e| Error::data(format!("cannot encode analyzer config: {e}")))?;
    write_bytes(&mut w, &config)?;

    // id map
    w.write_u64::<LittleEndian>(index.doc_ids.len() as u64)?;
    for id in &index.doc_ids {
        write_bytes(&mut w, id.as_bytes())?;
    }

    // lengths
    for &l in &index.doc_len_exact {
        w.write_u32::<LittleEndian>(l)?;
    }
    w.write_all(&index.doc_len_quantized)?;

    // stats
    w.write_u64::<LittleEndian>(index.stats.total_tokens)?;

    // postings, sorted by term for deterministic bytes
    let mut terms: Vec<&String> = index.postings.keys().collect();
    terms.sort_unstable();
    w.write_u64::<LittleEndian>(terms.len() as u64)?;
    for term in terms {
        write_bytes(&mut w, term.as_bytes())?;
        let list = &index.postings[term];
        w.write_u64::<LittleEndian>(list.len() as u64)?;
        for p in list {
            w.write_u32::<LittleEndian>(p.doc)?;
            w.write_u32::<LittleEndian>(p.tf)?;
        }
    }

    let digest = w.hasher.clone().finalize();
    w.inner.write_all(&digest[..8])?;
    w.inner.flush()?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<Index> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 16 {
        return Err(Error::data(format!("{}: truncated index file", path.display())));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 8);
    let digest = Sha256::digest(body);
    if &digest[..8] != trailer {
        return Err(Error::data(format!("{}: checksum mismatch (truncated or corrupt)", path.display())));
    }
    let mut r = body;
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::data(format!("{}: not an index file", path.display())));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(Error::data(format!(
            "{}: index format version mismatch: file has {version}, this build reads {FORMAT_VERSION}",
            path.display()
        )));
    }
    let config_bytes = read_bytes(&mut r)?;
    let analyzer_config: AnalyzerConfig = serde_json::from_slice(&config_bytes)
        .map_err(|e| Error::data(format!("bad analyzer config in index: {e}")))?;

    let num_docs = r.read_u64::<LittleEndian>()? as usize;
    let mut doc_ids = Vec::with_capacity(num_docs);
    for _ in 0..num_docs {
        let id = read_bytes(&mut r)?;
        doc_ids.push(String::from_utf8(id).map_err(|_| Error::data("bad doc id encoding"))?);
    }
    let mut doc_len_exact = Vec::with_capacity(num_docs);
    for _ in 0..num_docs {
        doc_len_exact.push(r.read_u32::<LittleEndian>()?);
    }
    let mut doc_len_quantized = vec![0u8; num_docs];
    r.read_exact(&mut doc_len_quantized)?;
    let total_tokens = r.read_u64::<LittleEndian>()?;

    let num_terms = r.read_u64::<LittleEndian>()? as usize;
    let mut postings = HashMap::with_capacity(num_terms);
    let mut df = HashMap::with_capacity(num_terms);
    for _ in 0..num_terms {
        let term = String::from_utf8(read_bytes(&mut r)?)
            .map_err(|_| Error::data("bad term encoding"))?;
        let len = r.read_u64::<LittleEndian>()? as usize;
        let mut list = Vec::with_capacity(len);
        for _ in 0..len {
            let doc = r.read_u32::<LittleEndian>()?;
            let tf = r.read_u32::<LittleEndian>()?;
            list.push(Posting { doc, tf });
        }
        df.insert(term.clone(), len as u64);
        postings.insert(term, list);
    }

    Ok(Index {
        stats: CorpusStats {
            num_docs: num_docs as u64,
            total_tokens,
            avgdl: if num_docs == 0 { 0.0 } else { total_tokens as f64 / num_docs as f64 },
            df,
        },
        postings,
        doc_len_exact,
        doc_len_quantized,
        doc_ids,
        analyzer_config,
    })
}

struct HashingWriter<W: Write> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

fn write_bytes<W: Write>(w: &mut W, bytes: &[u8]) -> Result<()> {
    w.write_u32::<LittleEndian>(bytes.len() as u32)?;
    w.write_all(bytes)?;
    Ok(())
}

fn read_bytes(r: &mut &[u8]) -> Result<Vec<u8>> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    if r.len() < len {
        return Err(Error::data("truncated index section"));
    }
    let (head, tail) = r.split_at(len);
    let out = head.to_vec();
    *r = tail;
    Ok(out)
}
