use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{ClassHierarchy, Dataset};

/// Optional facts about a dataset file that the file itself does not carry.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSchema {
    /// Number of classes; inferred from the largest label when absent.
    pub n_classes: Option<usize>,
    /// Source blocks as 1-based inclusive column ranges `[first, last]`.
    pub sources: Option<Vec<[usize; 2]>>,
    pub hierarchy: Option<PathBuf>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Reads delimited text: one case per line, the 1-based class label first
/// and the covariates after it, separated by commas or whitespace. A first
/// line whose label field is not an integer is taken as a header. Blank
/// lines and lines starting with `#` are skipped.
pub fn parse_dataset<R: BufRead>(input: R, schema: &DataSchema) -> Result<Dataset<f64>> {
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut p: Option<usize> = None;
    let mut seen_content = false;
    for (k, line) in input.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields = split_fields(trimmed);
        let first_content = !seen_content;
        seen_content = true;
        let label: usize = match fields[0].parse::<usize>() {
            Ok(v) => v,
            Err(_) if first_content => continue,
            Err(_) => return Err(parse_err(line_no, format!("label {:?} is not a positive integer", fields[0]))),
        };
        if label == 0 {
            return Err(parse_err(line_no, "labels start at 1"));
        }
        if let Some(j) = schema.n_classes {
            if label > j {
                return Err(parse_err(line_no, format!("label {label} outside 1..={j}")));
            }
        }
        let width = fields.len() - 1;
        match p {
            None => p = Some(width),
            Some(expected) if expected != width => {
                return Err(parse_err(
                    line_no,
                    format!("{width} covariates, earlier rows have {expected}"),
                ));
            }
            _ => {}
        }
        for (c, f) in fields[1..].iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(line_no, format!("column {} value {f:?} is not a number", c + 2)))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, format!("column {} is not finite", c + 2)));
            }
            values.push(v);
        }
        labels.push(label - 1);
    }
    let p = p.unwrap_or(0);
    let n_classes = schema
        .n_classes
        .unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    let x = Matrix::from_vec(labels.len(), p, values)?;
    let mut data = Dataset::new(x, labels, n_classes)?;
    if let Some(blocks) = &schema.sources {
        let ranges: Vec<Range<usize>> = blocks
            .iter()
            .map(|&[a, b]| {
                if a == 0 || b < a {
                    Err(Error::Config(format!("source block [{a}, {b}] is not a 1-based range")))
                } else {
                    Ok(a - 1..b)
                }
            })
            .collect::<Result<_>>()?;
        data = data.with_sources(ranges)?;
    }
    Ok(data)
}

/// Loads a dataset file and, if the schema names one, its hierarchy file.
pub fn load_dataset(path: &Path, schema: &DataSchema) -> Result<Dataset<f64>> {
    let file = File::open(path)
        .map_err(|e| Error::MissingInput(format!("cannot open dataset {}: {e}", path.display())))?;
    let data = parse_dataset(BufReader::new(file), schema)?;
    match &schema.hierarchy {
        Some(h) => {
            let tree = load_hierarchy(h, data.n_classes())?;
            data.with_hierarchy(tree)
        }
        None => Ok(data),
    }
}

/// Writes the format [`parse_dataset`] reads, with a header. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_dataset<W: Write>(mut out: W, data: &Dataset<f64>) -> Result<()> {
    let mut header = String::from("label");
    for l in 1..=data.p() {
        header.push_str(&format!(",x{l}"));
    }
    writeln!(out, "{header}")?;
    for i in 0..data.n() {
        let mut line = (data.label(i) + 1).to_string();
        for v in data.row(i) {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_dataset(path: &Path, data: &Dataset<f64>) -> Result<()> {
    write_dataset(BufWriter::new(File::create(path)?), data)
}

/// Reads one line per class: the 1-based leaf id, a tab, and the internal
/// nodes from the root down separated by `/`. An empty path (or `/`) puts
/// the leaf directly under the root. Leaf lines may come in any order.
pub fn parse_hierarchy<R: BufRead>(input: R, n_classes: usize) -> Result<ClassHierarchy> {
    let mut paths: Vec<Option<Vec<String>>> = vec![None; n_classes];
    for (k, line) in input.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let trimmed = line.trim_end();
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let (id, path) = match trimmed.split_once('\t') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (trimmed.trim(), ""),
        };
        let leaf: usize = id
            .parse()
            .map_err(|_| parse_err(line_no, format!("leaf id {id:?} is not a positive integer")))?;
        if leaf == 0 || leaf > n_classes {
            return Err(parse_err(line_no, format!("leaf {leaf} outside 1..={n_classes}")));
        }
        if paths[leaf - 1].is_some() {
            return Err(parse_err(line_no, format!("leaf {leaf} listed twice")));
        }
        let nodes: Vec<String> = path
            .split('/')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        paths[leaf - 1] = Some(nodes);
    }
    let missing: Vec<String> = paths
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_none())
        .map(|(j, _)| (j + 1).to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Hierarchy(format!(
            "{} of {n_classes} leaves missing: {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    let paths: Vec<Vec<String>> = paths.into_iter().map(Option::unwrap).collect();
    ClassHierarchy::from_leaf_paths(n_classes, &paths)
}

pub fn load_hierarchy(path: &Path, n_classes: usize) -> Result<ClassHierarchy> {
    let file = File::open(path)
        .map_err(|e| Error::MissingInput(format!("cannot open hierarchy {}: {e}", path.display())))?;
    parse_hierarchy(BufReader::new(file), n_classes)
}
