use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::TimeSeriesEpoch;

const HEADER: [&str; 4] = ["epoch_id", "group", "t", "value"];

/// Epochs plus the names of the groups their indices refer to.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub epochs: Vec<TimeSeriesEpoch>,
    pub group_names: Vec<String>,
}

impl Corpus {
    pub fn new(epochs: Vec<TimeSeriesEpoch>, group_names: Vec<String>) -> Result<Self> {
        if let Some(e) = epochs.iter().find(|e| e.group.is_some_and(|g| g >= group_names.len())) {
            return Err(Error::invalid(format!(
                "epoch '{}' has group index {} but only {} group names",
                e.id,
                e.group.unwrap_or_default(),
                group_names.len()
            )));
        }
        if let Some(name) = group_names.iter().find(|n| n.is_empty()) {
            return Err(Error::invalid(format!("group name {name:?} is empty")));
        }
        Ok(Self { epochs, group_names })
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Common series length, `None` for an empty corpus.
    pub fn series_len(&self) -> Option<usize> {
        self.epochs.first().map(|e| e.len())
    }

    /// True when every epoch carries a group.
    pub fn is_labeled(&self) -> bool {
        !self.epochs.is_empty() && self.epochs.iter().all(|e| e.group.is_some())
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.group_names.iter().position(|n| n == name)
    }
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let file = fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_corpus_from(file)
}

struct Pending {
    id: String,
    group: String,
    line: u64,
    values: Vec<f64>,
}

/// Parses the long-format corpus table. Group indices follow the order in
/// which group names first appear.
pub fn read_corpus_from(reader: impl Read) -> Result<Corpus> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        None => return Ok(Corpus::default()),
        Some(r) => r.map_err(csv_error)?,
    };
    if header.iter().ne(HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header {}, found {:?}",
                HEADER.join(","),
                header.iter().collect::<Vec<_>>()
            ),
        });
    }

    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    let mut epochs = Vec::new();
    let mut current: Option<Pending> = None;

    let mut finish = |p: Pending, epochs: &mut Vec<TimeSeriesEpoch>| -> Result<()> {
        let group = if p.group.is_empty() {
            None
        } else {
            let next = names.len();
            let g = *index.entry(p.group.clone()).or_insert(next);
            if g == next {
                names.push(p.group.clone());
            }
            Some(g)
        };
        let epoch = TimeSeriesEpoch::new(p.id.clone(), group, p.values)
            .map_err(|e| Error::Schema(format!("epoch '{}' (starting line {}): {e}", p.id, p.line)))?;
        if let Some(first) = epochs.first() {
            let first: &TimeSeriesEpoch = first;
            if epoch.len() != first.len() {
                return Err(Error::Schema(format!(
                    "epoch '{}' has N={}, epoch '{}' has N={}",
                    epoch.id,
                    epoch.len(),
                    first.id,
                    first.len()
                )));
            }
        }
        epochs.push(epoch);
        Ok(())
    };

    for record in records {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 4 {
            return Err(parse_error(line, format!("expected 4 fields, found {}", record.len())));
        }
        let (id, group) = (&record[0], &record[1]);
        if id.is_empty() {
            return Err(parse_error(line, "empty epoch_id".into()));
        }
        let t: usize = record[2]
            .parse()
            .map_err(|_| parse_error(line, format!("t {:?} is not a positive integer", &record[2])))?;
        let value: f64 = record[3]
            .parse()
            .map_err(|_| parse_error(line, format!("value {:?} is not a number", &record[3])))?;
        if !value.is_finite() {
            return Err(parse_error(line, format!("value {value} is not finite")));
        }

        let continues = current.as_ref().is_some_and(|p| p.id == id);
        if !continues {
            if let Some(p) = current.take() {
                finish(p, &mut epochs)?;
            }
            if let Some(first) = seen.insert(id.to_string(), line) {
                return Err(Error::Schema(format!(
                    "epoch '{id}' reappears at line {line} after its rows ended (first seen at line {first})"
                )));
            }
            current = Some(Pending {
                id: id.to_string(),
                group: group.to_string(),
                line,
                values: Vec::new(),
            });
        }
        let p = current.as_mut().expect("pending epoch");
        if p.group != group {
            return Err(Error::Schema(format!(
                "epoch '{id}' changes group from {:?} to {group:?} at line {line}",
                p.group
            )));
        }
        let expected = p.values.len() + 1;
        if t != expected {
            return Err(Error::Schema(format!(
                "epoch '{id}': t={t} at line {line}, expected t={expected} (t must run 1..N without gaps)"
            )));
        }
        p.values.push(value);
    }
    if let Some(p) = current.take() {
        finish(p, &mut epochs)?;
    }
    Corpus::new(epochs, names)
}

fn parse_error(line: u64, message: String) -> Error {
    Error::Parse {
        line: line as usize,
        message,
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => parse_error(line, format!("{kind:?}")),
    }
}

pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_corpus_to(corpus, &mut buf)?;
    super::write_atomic(path, &buf)
}

/// Writes the long-format table. Values use the shortest decimal form that
/// parses back to the same `f64`.
pub fn write_corpus_to(corpus: &Corpus, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Schema(format!("{kind:?}")),
    };
    let mut ids = std::collections::HashSet::new();
    if let Some(e) = corpus.epochs.iter().find(|e| !ids.insert(e.id.as_str())) {
        return Err(Error::invalid(format!("duplicate epoch id '{}'", e.id)));
    }
    w.write_record(HEADER).map_err(io)?;
    for e in &corpus.epochs {
        let group = match e.group {
            Some(g) => corpus
                .group_names
                .get(g)
                .ok_or_else(|| Error::invalid(format!("epoch '{}' has unnamed group {g}", e.id)))?
                .as_str(),
            None => "",
        };
        for (t, v) in e.values().iter().enumerate() {
            w.write_record([e.id.as_str(), group, &(t + 1).to_string(), &v.to_string()])
                .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}
