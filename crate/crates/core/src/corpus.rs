//! Labeled embedding corpora and taxonomy metadata.
//!
//! Record `i` of a [`Corpus`] is node `i` of every matrix built from it:
//! records keep file order and are never sorted.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::f64_17;

/// One embedded paragraph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    /// Taxonomy label, `1..=T`.
    pub label: u32,
    pub vector: Vec<f64>,
}

/// Label ids `1..=T` and their names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    names: Vec<String>,
}

/// Tactic numbering used for the MITRE ATT&CK corpus.
pub const MITRE_TACTICS: [&str; 14] = [
    "Persistence",
    "Command and Control",
    "Impact",
    "Initial Access",
    "Resource Development",
    "Collection",
    "Exfiltration",
    "Credential Access",
    "Privilege Escalation",
    "Execution",
    "Defense Evasion",
    "Reconnaissance",
    "Lateral Movement",
    "Discovery",
];

impl Taxonomy {
    /// Builds a taxonomy from `(id, name)` entries in any order.
    pub fn new(mut entries: Vec<(u32, String)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Taxonomy("no entries".into()));
        }
        entries.sort_by_key(|(id, _)| *id);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Taxonomy(format!("duplicate id {}", w[0].0)));
            }
        }
        let mut seen = HashSet::new();
        for (pos, (id, name)) in entries.iter().enumerate() {
            if *id as usize != pos + 1 {
                return Err(Error::Taxonomy(format!(
                    "ids must be consecutive from 1; expected {} but found {id}",
                    pos + 1
                )));
            }
            if name.trim().is_empty() {
                return Err(Error::Taxonomy(format!("empty name for id {id}")));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Taxonomy(format!("duplicate name {name:?}")));
            }
        }
        Ok(Self {
            names: entries.into_iter().map(|(_, n)| n).collect(),
        })
    }

    /// The 14 ATT&CK tactics.
    pub fn mitre() -> Self {
        Self {
            names: MITRE_TACTICS.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Placeholder names `label 1 .. label T`.
    pub fn numbered(count: u32) -> Self {
        Self {
            names: (1..=count).map(|j| format!("label {j}")).collect(),
        }
    }

    pub fn len(&self) -> u32 {
        self.names.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, label: u32) -> Option<&str> {
        label
            .checked_sub(1)
            .and_then(|i| self.names.get(i as usize))
            .map(String::as_str)
    }

    pub fn contains(&self, label: u32) -> bool {
        label >= 1 && label <= self.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.names.iter().enumerate().map(|(i, n)| (i as u32 + 1, n.as_str()))
    }
}

/// An ordered, validated set of records sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    records: Vec<DocumentRecord>,
    dimension: usize,
    taxonomy: Taxonomy,
}

impl Corpus {
    /// Validates `records` against `taxonomy`. Labels without any record are
    /// logged, not rejected.
    pub fn new(records: Vec<DocumentRecord>, taxonomy: Taxonomy) -> Result<Self> {
        let Some(first) = records.first() else {
            return Err(Error::Parse {
                row: 0,
                message: "corpus has no records".into(),
            });
        };
        let dimension = first.vector.len();
        if dimension == 0 {
            return Err(Error::DimensionMismatch {
                row: 1,
                expected: 1,
                found: 0,
            });
        }
        let mut ids = HashSet::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let row = i + 1;
            if r.vector.len() != dimension {
                return Err(Error::DimensionMismatch {
                    row,
                    expected: dimension,
                    found: r.vector.len(),
                });
            }
            if r.vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::Parse {
                    row,
                    message: "vector has a non-finite component".into(),
                });
            }
            if r.vector.iter().all(|&x| x == 0.0) {
                return Err(Error::ZeroNorm { row });
            }
            if !taxonomy.contains(r.label) {
                return Err(Error::UnknownLabel { row, label: r.label });
            }
            if !ids.insert(r.id.as_str()) {
                return Err(Error::DuplicateId { row, id: r.id.clone() });
            }
        }
        let corpus = Self {
            records,
            dimension,
            taxonomy,
        };
        for label in corpus.empty_labels() {
            log::warn!("taxonomy label {label} has no records");
        }
        Ok(corpus)
    }

    pub fn records(&self) -> &[DocumentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    /// Per-node taxonomy labels in node order.
    pub fn labels(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Taxonomy labels that no record carries.
    pub fn empty_labels(&self) -> Vec<u32> {
        let mut present = vec![false; self.taxonomy.len() as usize + 1];
        for r in &self.records {
            present[r.label as usize] = true;
        }
        (1..=self.taxonomy.len()).filter(|&j| !present[j as usize]).collect()
    }
}

/// On-disk corpus encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// Header `id,label,v0,...,v{d-1}`.
    Csv,
    /// One `{"id": .., "label": .., "vector": [..]}` object per line.
    Jsonl,
}

impl CorpusFormat {
    /// Guesses the format from the file extension; anything but `.jsonl` /
    /// `.ndjson` is read as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("jsonl") || e.eq_ignore_ascii_case("ndjson") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Csv,
        }
    }
}

/// Loads and validates a corpus.
///
/// Without a taxonomy, labels `1..=max` are accepted with placeholder names.
/// Error rows are 1-based data rows (the CSV header is not counted).
pub fn load_corpus(path: &Path, format: CorpusFormat, taxonomy: Option<Taxonomy>) -> Result<Corpus> {
    let records = match format {
        CorpusFormat::Csv => read_csv_records(path)?,
        CorpusFormat::Jsonl => read_jsonl_records(path)?,
    };
    let taxonomy = match taxonomy {
        Some(t) => t,
        None => {
            if let Some(row) = records.iter().position(|r| r.label == 0) {
                return Err(Error::UnknownLabel { row: row + 1, label: 0 });
            }
            let max = records.iter().map(|r| r.label).max().unwrap_or(1);
            Taxonomy::numbered(max)
        }
    };
    Corpus::new(records, taxonomy)
}

fn read_csv_records(path: &Path) -> Result<Vec<DocumentRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e, 0))?;
    let header = reader.headers().map_err(|e| csv_error(path, e, 0))?.clone();
    check_corpus_header(&header)?;
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| csv_error(path, e, row_no))?;
        if row.len() < 3 {
            return Err(Error::Parse {
                row: row_no,
                message: format!(
                    "expected id, label and at least one component, found {} fields",
                    row.len()
                ),
            });
        }
        let label = parse_label(&row[1], row_no)?;
        let vector = row
            .iter()
            .skip(2)
            .map(|s| parse_f64(s, row_no))
            .collect::<Result<Vec<_>>>()?;
        records.push(DocumentRecord {
            id: row[0].to_string(),
            label,
            vector,
        });
    }
    Ok(records)
}

fn check_corpus_header(header: &csv::StringRecord) -> Result<()> {
    let bad = |message: String| Error::Parse { row: 0, message };
    if header.len() < 3 || &header[0] != "id" || &header[1] != "label" {
        return Err(bad("header must be id,label,v0,...".into()));
    }
    for (k, h) in header.iter().skip(2).enumerate() {
        if h != format!("v{k}") {
            return Err(bad(format!("column {} should be v{k}, found {h:?}", k + 2)));
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct JsonRecord {
    id: String,
    label: i64,
    vector: Vec<f64>,
}

fn read_jsonl_records(path: &Path) -> Result<Vec<DocumentRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let row_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            row: row_no,
            message: e.to_string(),
        })?;
        let label = u32::try_from(rec.label).map_err(|_| Error::UnknownLabel { row: row_no, label: 0 })?;
        records.push(DocumentRecord {
            id: rec.id,
            label,
            vector: rec.vector,
        });
    }
    Ok(records)
}

/// Writes a corpus in the given format; reloading yields identical records.
pub fn write_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    match format {
        CorpusFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(out);
            let mut header = vec!["id".to_string(), "label".to_string()];
            header.extend((0..corpus.dimension).map(|k| format!("v{k}")));
            wtr.write_record(&header).map_err(|e| csv_error(path, e, 0))?;
            for r in &corpus.records {
                let mut row = vec![r.id.clone(), r.label.to_string()];
                row.extend(r.vector.iter().map(|&x| f64_17(x)));
                wtr.write_record(&row).map_err(|e| csv_error(path, e, 0))?;
            }
            wtr.flush().map_err(io)?;
        }
        CorpusFormat::Jsonl => {
            for r in &corpus.records {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n").map_err(io)?;
            }
            out.flush().map_err(io)?;
        }
    }
    Ok(())
}

/// Loads a taxonomy CSV with header `label,name`.
pub fn load_taxonomy(path: &Path) -> Result<Taxonomy> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e, 0))?;
    let header = reader.headers().map_err(|e| csv_error(path, e, 0))?.clone();
    if header.len() != 2 || &header[0] != "label" || &header[1] != "name" {
        return Err(Error::Parse {
            row: 0,
            message: "taxonomy header must be label,name".into(),
        });
    }
    let mut entries = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e, i + 1))?;
        entries.push((parse_label(&row[0], i + 1)?, row[1].to_string()));
    }
    Taxonomy::new(entries)
}

/// Writes a taxonomy CSV readable by [`load_taxonomy`].
pub fn write_taxonomy(taxonomy: &Taxonomy, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_error(path, e, 0))?;
    wtr.write_record(["label", "name"]).map_err(|e| csv_error(path, e, 0))?;
    for (id, name) in taxonomy.iter() {
        wtr.write_record([id.to_string(), name.to_string()])
            .map_err(|e| csv_error(path, e, 0))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

/// Reads per-node labels from a corpus file or a two-column `id,label` CSV.
pub fn load_labels(path: &Path) -> Result<Vec<u32>> {
    if CorpusFormat::from_path(path) == CorpusFormat::Jsonl {
        return Ok(read_jsonl_records(path)?.iter().map(|r| r.label).collect());
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e, 0))?;
    let header = reader.headers().map_err(|e| csv_error(path, e, 0))?.clone();
    if header.len() < 2 || &header[1] != "label" {
        return Err(Error::Parse {
            row: 0,
            message: "labels file needs `label` as its second column".into(),
        });
    }
    reader
        .records()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| csv_error(path, e, i + 1))?;
            parse_label(&row[1], i + 1)
        })
        .collect()
}

fn parse_label(s: &str, row: usize) -> Result<u32> {
    s.parse::<u32>().map_err(|_| Error::Parse {
        row,
        message: format!("label {s:?} is not a non-negative integer"),
    })
}

fn parse_f64(s: &str, row: usize) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse {
        row,
        message: format!("{s:?} is not a number"),
    })
}

pub(crate) fn csv_error(path: &Path, e: csv::Error, row: usize) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            row,
            message: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn minimal_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "c.csv", "id,label,v0,v1,v2\na,1,1,0,0\n");
        let c = load_corpus(&p, CorpusFormat::Csv, None).unwrap();
        assert_eq!((c.len(), c.dimension(), c.taxonomy().len()), (1, 3, 1));
    }

    #[test]
    fn zero_vector_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "c.csv", "id,label,v0,v1\na,1,1,0\nb,1,0,0\n");
        match load_corpus(&p, CorpusFormat::Csv, None) {
            Err(Error::ZeroNorm { row }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_and_unknown_label() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "c.jsonl",
            concat!(
                "{\"id\":\"a\",\"label\":1,\"vector\":[1,2]}\n",
                "{\"id\":\"b\",\"label\":1,\"vector\":[1,2,3]}\n"
            ),
        );
        assert!(matches!(
            load_corpus(&p, CorpusFormat::Jsonl, None),
            Err(Error::DimensionMismatch {
                row: 2,
                expected: 2,
                found: 3
            })
        ));
        let p = write(&dir, "d.csv", "id,label,v0\na,1,1\nb,3,1\n");
        let tax = Taxonomy::new(vec![(1, "A".into()), (2, "B".into())]).unwrap();
        assert!(matches!(
            load_corpus(&p, CorpusFormat::Csv, Some(tax)),
            Err(Error::UnknownLabel { row: 2, label: 3 })
        ));
    }

    #[test]
    fn parse_error_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "c.csv", "id,label,v0\na,1,1\nb,1,oops\n");
        assert!(matches!(
            load_corpus(&p, CorpusFormat::Csv, None),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn taxonomy_validation() {
        assert_eq!(Taxonomy::new(vec![(1, "A".into())]).unwrap().len(), 1);
        assert!(Taxonomy::new(vec![(1, "A".into()), (3, "B".into())]).is_err());
        assert!(Taxonomy::new(vec![(1, "A".into()), (1, "B".into())]).is_err());
        assert!(Taxonomy::new(vec![(1, " ".into())]).is_err());
        let m = Taxonomy::mitre();
        assert_eq!(m.len(), 14);
        assert_eq!(m.name(1), Some("Persistence"));
        assert_eq!(m.name(2), Some("Command and Control"));
        assert_eq!(m.name(14), Some("Discovery"));
        assert_eq!(m.name(15), None);
    }

    #[test]
    fn taxonomy_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_taxonomy(&Taxonomy::mitre(), &p).unwrap();
        assert_eq!(load_taxonomy(&p).unwrap(), Taxonomy::mitre());
        let p = write(&dir, "bad.csv", "label,name\n1,A\n3,B\n");
        assert!(matches!(load_taxonomy(&p), Err(Error::Taxonomy(_))));
    }

    #[test]
    fn labels_from_either_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "c.csv", "id,label,v0\na,2,1\nb,1,1\n");
        assert_eq!(load_labels(&p).unwrap(), vec![2, 1]);
        let p = write(&dir, "l.csv", "id,label\nx,3\ny,1\n");
        assert_eq!(load_labels(&p).unwrap(), vec![3, 1]);
    }

    #[test]
    fn empty_labels_warn_only() {
        let tax = Taxonomy::numbered(3);
        let recs = vec![DocumentRecord {
            id: "a".into(),
            label: 2,
            vector: vec![1.0],
        }];
        let c = Corpus::new(recs, tax).unwrap();
        assert_eq!(c.empty_labels(), vec![1, 3]);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let recs = vec![
            DocumentRecord {
                id: "a".into(),
                label: 1,
                vector: vec![1.0],
            },
            DocumentRecord {
                id: "a".into(),
                label: 1,
                vector: vec![2.0],
            },
        ];
        assert!(matches!(
            Corpus::new(recs, Taxonomy::numbered(1)),
            Err(Error::DuplicateId { row: 2, .. })
        ));
    }
}
