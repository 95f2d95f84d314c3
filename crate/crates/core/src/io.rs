//! Dataset files.
//!
//! JSONL (canonical): one `{"bag_id": ..., "y": ..., "x": [...]}` object per
//! line. CSV long form: header `bag_id,y,x`, one x-observation per row, rows of
//! a bag contiguous and sharing `y`. Both accept `#` comment lines, which the
//! writers use for a provenance header. Floats are written in shortest
//! round-trip form, so write-then-read is bit-exact.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist_reg::Bag;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Jsonl,
    Csv,
}

impl DataFormat {
    /// `.csv` means CSV; anything else is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DataFormat::Csv,
            _ => DataFormat::Jsonl,
        }
    }
}

impl FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(DataFormat::Jsonl),
            "csv" => Ok(DataFormat::Csv),
            other => Err(format!("unknown format `{other}` (expected jsonl or csv)")),
        }
    }
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataFormat::Jsonl => "jsonl",
            DataFormat::Csv => "csv",
        })
    }
}

/// Wire form of one bag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BagRecord {
    pub bag_id: String,
    pub y: f64,
    pub x: Vec<f64>,
}

impl From<&Bag> for BagRecord {
    fn from(b: &Bag) -> Self {
        BagRecord {
            bag_id: b.id.clone(),
            y: b.y,
            x: b.xs.clone(),
        }
    }
}

impl From<BagRecord> for Bag {
    fn from(r: BagRecord) -> Self {
        Bag::new(r.bag_id, r.x, r.y)
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn check_record(rec: &BagRecord, line: usize) -> Result<()> {
    if rec.x.is_empty() {
        return Err(parse_err(line, format!("bag `{}` has no x values", rec.bag_id)));
    }
    if !rec.y.is_finite() {
        return Err(parse_err(line, "y is not finite"));
    }
    if rec.x.iter().any(|v| !v.is_finite()) {
        return Err(parse_err(line, "x contains a non-finite value"));
    }
    Ok(())
}

pub fn read_jsonl(reader: impl Read) -> Result<Vec<Bag>> {
    let mut bags = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rec: BagRecord =
            serde_json::from_str(trimmed).map_err(|e| parse_err(lineno, e.to_string()))?;
        check_record(&rec, lineno)?;
        bags.push(rec.into());
    }
    if bags.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(bags)
}

pub fn read_csv(reader: impl Read) -> Result<Vec<Bag>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["bag_id", "y", "x"] {
        let line = rdr.position().line().max(1) as usize;
        return Err(parse_err(line, "expected header `bag_id,y,x`"));
    }
    let mut recs: Vec<(BagRecord, usize)> = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let num = |field: &str, name: &str| -> Result<f64> {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("bad {name} value `{field}`")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("{name} is not finite")));
            }
            Ok(v)
        };
        let id = &row[0];
        let y = num(&row[1], "y")?;
        let x = num(&row[2], "x")?;
        match recs.last_mut() {
            Some((last, _)) if last.bag_id == id => {
                if last.y.to_bits() != y.to_bits() {
                    return Err(parse_err(
                        line,
                        format!("bag `{id}` has conflicting y values"),
                    ));
                }
                last.x.push(x);
            }
            _ => {
                if recs.iter().any(|(r, _)| r.bag_id == id) {
                    return Err(parse_err(line, format!("rows of bag `{id}` are not contiguous")));
                }
                recs.push((
                    BagRecord {
                        bag_id: id.to_string(),
                        y,
                        x: vec![x],
                    },
                    line,
                ));
            }
        }
    }
    if recs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(recs.into_iter().map(|(r, _)| r.into()).collect())
}

pub fn read_bags(reader: impl Read, format: DataFormat) -> Result<Vec<Bag>> {
    match format {
        DataFormat::Jsonl => read_jsonl(reader),
        DataFormat::Csv => read_csv(reader),
    }
}

/// Reads a dataset file; bag order is file order.
pub fn load_bags(path: &Path, format: DataFormat) -> Result<Vec<Bag>> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_bags(file, format)
}

/// Writes bags, preceded by `# header` when a header is given.
pub fn write_bags(
    writer: impl Write,
    bags: &[Bag],
    format: DataFormat,
    header: Option<&str>,
) -> Result<()> {
    let mut w = BufWriter::new(writer);
    if let Some(h) = header {
        for line in h.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    match format {
        DataFormat::Jsonl => {
            for bag in bags {
                let line = serde_json::to_string(&BagRecord::from(bag))
                    .map_err(|e| Error::Io(e.to_string()))?;
                writeln!(w, "{line}")?;
            }
        }
        DataFormat::Csv => {
            writeln!(w, "bag_id,y,x")?;
            for bag in bags {
                let id = csv_field(&bag.id);
                for x in &bag.xs {
                    writeln!(w, "{id},{},{x}", bag.y)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) || s.starts_with('#') || s != s.trim() {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn save_bags(path: &Path, bags: &[Bag], format: DataFormat, header: Option<&str>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_bags(file, bags, format, header)
}
