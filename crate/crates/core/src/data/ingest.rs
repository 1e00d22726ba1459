//! Ingestion of the four retrieval file formats, plus matching writers.
//!
//! Formats (one record per line, UTF-8):
//!
//! * `queries.tsv` — `qid<TAB>text`
//! * `corpus.tsv` — `did<TAB>url<TAB>title<TAB>body` (url and title may be
//!   empty; the body keeps any further tabs)
//! * `candidates.tsv` — `qid<TAB>did<TAB>rank`
//! * `qrels` — `qid 0 did rel`, space- or tab-separated
//!
//! Parsing is strict: a malformed line fails loading with the path and
//! 1-based line number, and duplicate ids report the first collision.
//! Identical bytes always parse to identical tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::Qrels;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn ingest_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

// ----- queries -----

/// `query_id → text`, preserving file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryTable {
    rows: Vec<(String, String)>,
    index: BTreeMap<String, usize>,
}

impl QueryTable {
    pub fn from_rows(rows: Vec<(String, String)>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, (query_id, _)) in rows.iter().enumerate() {
            if index.insert(query_id.clone(), i).is_some() {
                return Err(Error::Ingest {
                    path: "<memory>".into(),
                    line: i + 1,
                    msg: format!("duplicate query id '{query_id}'"),
                });
            }
        }
        Ok(QueryTable { rows, index })
    }

    pub fn rows(&self) -> &[(String, String)] {
        &self.rows
    }

    pub fn get(&self, query_id: &str) -> Option<&str> {
        self.index
            .get(query_id)
            .map(|&i| self.rows[i].1.as_str())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn load_queries(path: &Path) -> Result<QueryTable> {
    let text = read(path)?;
    let mut rows = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let mut parts = line.splitn(2, '\t');
        let query_id = parts.next().unwrap_or("");
        let query_text = parts
            .next()
            .ok_or_else(|| ingest_err(path, lineno, "expected 'qid<TAB>text'"))?;
        if query_id.is_empty() {
            return Err(ingest_err(path, lineno, "empty query id"));
        }
        if let Some(&first) = index.get(query_id) {
            return Err(ingest_err(
                path,
                lineno,
                format!("duplicate query id '{query_id}' (first seen on line {})", first + 1),
            ));
        }
        index.insert(query_id.to_string(), lineno - 1);
        rows.push((query_id.to_string(), query_text.to_string()));
    }
    let index = rows
        .iter()
        .enumerate()
        .map(|(i, (q, _))| (q.clone(), i))
        .collect();
    Ok(QueryTable { rows, index })
}

pub fn write_queries(table: &QueryTable, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (query_id, text) in &table.rows {
        out.push_str(query_id);
        out.push('\t');
        out.push_str(text);
        out.push('\n');
    }
    write_file(path, &out)
}

// ----- corpus -----

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusDoc {
    pub doc_id: String,
    pub url: String,
    pub title: String,
    pub body: String,
}

impl CorpusDoc {
    /// The text a scorer sees: title and body (URLs carry no token signal
    /// for a bag-of-words scorer).
    pub fn text(&self) -> String {
        if self.title.is_empty() {
            self.body.clone()
        } else {
            format!("{} {}", self.title, self.body)
        }
    }
}

/// `doc_id → document`, preserving file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusTable {
    rows: Vec<CorpusDoc>,
    index: BTreeMap<String, usize>,
}

impl CorpusTable {
    pub fn from_rows(rows: Vec<CorpusDoc>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, doc) in rows.iter().enumerate() {
            if index.insert(doc.doc_id.clone(), i).is_some() {
                return Err(Error::Ingest {
                    path: "<memory>".into(),
                    line: i + 1,
                    msg: format!("duplicate doc id '{}'", doc.doc_id),
                });
            }
        }
        Ok(CorpusTable { rows, index })
    }

    pub fn rows(&self) -> &[CorpusDoc] {
        &self.rows
    }

    pub fn get(&self, doc_id: &str) -> Option<&CorpusDoc> {
        self.index.get(doc_id).map(|&i| &self.rows[i])
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn load_corpus(path: &Path) -> Result<CorpusTable> {
    let text = read(path)?;
    let mut rows = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let mut parts = line.splitn(4, '\t');
        let (doc_id, url, title, body) = match (parts.next(), parts.next(), parts.next(), parts.next())
        {
            (Some(d), Some(u), Some(t), Some(b)) => (d, u, t, b),
            _ => {
                return Err(ingest_err(
                    path,
                    lineno,
                    "expected 'did<TAB>url<TAB>title<TAB>body'",
                ))
            }
        };
        if doc_id.is_empty() {
            return Err(ingest_err(path, lineno, "empty doc id"));
        }
        if let Some(&first) = index.get(doc_id) {
            return Err(ingest_err(
                path,
                lineno,
                format!("duplicate doc id '{doc_id}' (first seen on line {})", first + 1),
            ));
        }
        index.insert(doc_id.to_string(), rows.len());
        rows.push(CorpusDoc {
            doc_id: doc_id.to_string(),
            url: url.to_string(),
            title: title.to_string(),
            body: body.to_string(),
        });
    }
    Ok(CorpusTable { rows, index })
}

pub fn write_corpus(table: &CorpusTable, path: &Path) -> Result<()> {
    let mut out = String::new();
    for doc in &table.rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            doc.doc_id, doc.url, doc.title, doc.body
        ));
    }
    write_file(path, &out)
}

// ----- candidates -----

/// `query_id → candidates ordered by retrieval rank` (rank ascending; the
/// ingested "top 100" lists). Queries keep first-appearance order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateTable {
    rows: Vec<(String, Vec<(String, u32)>)>,
    index: BTreeMap<String, usize>,
}

impl CandidateTable {
    pub fn from_rows(rows: Vec<(String, Vec<(String, u32)>)>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, (query_id, cands)) in rows.iter().enumerate() {
            if index.insert(query_id.clone(), i).is_some() {
                return Err(Error::Ingest {
                    path: "<memory>".into(),
                    line: i + 1,
                    msg: format!("duplicate candidate list for query '{query_id}'"),
                });
            }
            let mut seen = BTreeMap::new();
            for (doc_id, _) in cands {
                if seen.insert(doc_id.clone(), ()).is_some() {
                    return Err(Error::Ingest {
                        path: "<memory>".into(),
                        line: i + 1,
                        msg: format!(
                            "duplicate candidate doc '{doc_id}' for query '{query_id}'"
                        ),
                    });
                }
            }
        }
        Ok(CandidateTable { rows, index })
    }

    pub fn rows(&self) -> &[(String, Vec<(String, u32)>)] {
        &self.rows
    }

    /// Candidates for a query, ordered by rank ascending.
    pub fn get(&self, query_id: &str) -> Option<&[(String, u32)]> {
        self.index
            .get(query_id)
            .map(|&i| self.rows[i].1.as_slice())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn load_candidates(path: &Path) -> Result<CandidateTable> {
    let text = read(path)?;
    let mut rows: Vec<(String, Vec<(String, u32)>)> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut seen_docs: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(ingest_err(
                path,
                lineno,
                format!("expected 'qid<TAB>did<TAB>rank', got {} fields", fields.len()),
            ));
        }
        let (query_id, doc_id, rank_text) = (fields[0], fields[1], fields[2]);
        if query_id.is_empty() || doc_id.is_empty() {
            return Err(ingest_err(path, lineno, "empty query or doc id"));
        }
        let rank: u32 = rank_text.parse().map_err(|_| {
            ingest_err(path, lineno, format!("rank '{rank_text}' is not an unsigned integer"))
        })?;
        if let Some(&first) =
            seen_docs.get(&(query_id.to_string(), doc_id.to_string()))
        {
            return Err(ingest_err(
                path,
                lineno,
                format!(
                    "duplicate candidate doc '{doc_id}' for query '{query_id}' \
                     (first seen on line {first})"
                ),
            ));
        }
        seen_docs.insert((query_id.to_string(), doc_id.to_string()), lineno);
        let entry = match index.get(query_id) {
            Some(&i) => &mut rows[i].1,
            None => {
                index.insert(query_id.to_string(), rows.len());
                rows.push((query_id.to_string(), Vec::new()));
                &mut rows.last_mut().unwrap().1
            }
        };
        entry.push((doc_id.to_string(), rank));
    }
    for (_, cands) in &mut rows {
        cands.sort_by(|a, b| a.1.cmp(&b.1));
    }
    Ok(CandidateTable { rows, index })
}

pub fn write_candidates(table: &CandidateTable, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (query_id, cands) in &table.rows {
        for (doc_id, rank) in cands {
            out.push_str(&format!("{query_id}\t{doc_id}\t{rank}\n"));
        }
    }
    write_file(path, &out)
}

// ----- qrels -----

#[derive(Debug, Clone, PartialEq)]
pub struct QrelsRow {
    pub query_id: String,
    /// The conventional second column, usually "0"; preserved verbatim.
    pub iteration: String,
    pub doc_id: String,
    pub relevance: u32,
}

/// Raw qrels rows in file order, plus conversion to binary [`Qrels`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QrelsTable {
    rows: Vec<QrelsRow>,
}

impl QrelsTable {
    pub fn from_rows(rows: Vec<QrelsRow>) -> Result<Self> {
        let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
        for (i, row) in rows.iter().enumerate() {
            if let Some(&first) =
                seen.get(&(row.query_id.clone(), row.doc_id.clone()))
            {
                return Err(Error::Ingest {
                    path: "<memory>".into(),
                    line: i + 1,
                    msg: format!(
                        "duplicate judgment for query '{}' doc '{}' (first seen on line {})",
                        row.query_id,
                        row.doc_id,
                        first + 1
                    ),
                });
            }
            seen.insert((row.query_id.clone(), row.doc_id.clone()), i);
        }
        Ok(QrelsTable { rows })
    }

    pub fn rows(&self) -> &[QrelsRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Binary relevance: rows with relevance > 0.
    pub fn to_qrels(&self) -> Qrels {
        let mut qrels = Qrels::new();
        for row in &self.rows {
            if row.relevance > 0 {
                qrels.add(row.query_id.clone(), row.doc_id.clone());
            }
        }
        qrels
    }
}

pub fn load_qrels(path: &Path) -> Result<QrelsTable> {
    let text = read(path)?;
    let mut rows = Vec::new();
    let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(ingest_err(
                path,
                lineno,
                format!("expected 'qid 0 did rel', got {} fields", fields.len()),
            ));
        }
        let relevance: u32 = fields[3].parse().map_err(|_| {
            ingest_err(
                path,
                lineno,
                format!("relevance '{}' is not an unsigned integer", fields[3]),
            )
        })?;
        let key = (fields[0].to_string(), fields[2].to_string());
        if let Some(&first) = seen.get(&key) {
            return Err(ingest_err(
                path,
                lineno,
                format!(
                    "duplicate judgment for query '{}' doc '{}' (first seen on line {first})",
                    fields[0], fields[2]
                ),
            ));
        }
        seen.insert(key, lineno);
        rows.push(QrelsRow {
            query_id: fields[0].to_string(),
            iteration: fields[1].to_string(),
            doc_id: fields[2].to_string(),
            relevance,
        });
    }
    Ok(QrelsTable { rows })
}

pub fn write_qrels(table: &QrelsTable, path: &Path) -> Result<()> {
    let mut out = String::new();
    for row in &table.rows {
        out.push_str(&format!(
            "{} {} {} {}\n",
            row.query_id, row.iteration, row.doc_id, row.relevance
        ));
    }
    write_file(path, &out)
}
