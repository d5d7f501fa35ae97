//! Tab-separated text formats for every pipeline artifact.
//!
//! Floats are written with Rust's shortest round-trip representation (`{:?}`),
//! so parsing a serialized artifact and serializing it again reproduces the
//! same bytes.
//!
//! | artifact          | header                  | rows                                  |
//! |-------------------|-------------------------|---------------------------------------|
//! | feature bank      | `#dim=<n_v>`            | `class_id<TAB>image_id<TAB>f1,..,fn`  |
//! | class embeddings  | none (`#` lines ignored)| `class_id<TAB>d_w<TAB>e1,..,ed`       |
//! | importance matrix | `#rows=<m> cols=<n_v>`  | `a1,..,an` per episode                |
//! | facet partition   | `#nv=<n_v> f=<F>`       | `facet_id<TAB>i1,i2,..`               |
//! | gate parameters   | `#f=<F> dw=<d_w>`       | F rows of weights, then the bias row  |
//! | eval results      | `#episodes=<E> seed=<s>`| `episode_index<TAB>accuracy`          |

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use facetproto_core::eval::EvalReport;
use facetproto_core::gate::GateParams;
use facetproto_core::{ClassEmbeddings, FacetPartition, FeatureBank, ImportanceMatrix, Record};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate {what} `{key}`")]
    Duplicate {
        line: usize,
        what: &'static str,
        key: String,
    },
    #[error(transparent)]
    Validation(#[from] facetproto_core::Error),
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        message: message.into(),
    }
}

/// Numbered lines of `text`, 1-based.
fn numbered(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l))
}

fn parse_floats(line: usize, field: &str) -> Result<Vec<f64>> {
    field
        .split(',')
        .map(|tok| {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("`{tok}` is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(line, format!("`{tok}` is not finite")))
            }
        })
        .collect()
}

fn parse_usize(line: usize, what: &str, tok: &str) -> Result<usize> {
    tok.trim().parse().map_err(|_| {
        parse_err(
            line,
            format!("{what} `{tok}` is not a non-negative integer"),
        )
    })
}

fn push_floats(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{v:?}").unwrap();
    }
}

fn push_indices(out: &mut String, values: &[usize]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{v}").unwrap();
    }
}

/// Parses `key=value` pairs of a `#` header line, in the given key order.
fn parse_header(line: usize, text: Option<&str>, keys: &[&str]) -> Result<Vec<usize>> {
    let text = text.ok_or_else(|| parse_err(line, "missing header"))?;
    let body = text
        .strip_prefix('#')
        .ok_or_else(|| parse_err(line, format!("header must start with `#`, got `{text}`")))?;
    let fields: Vec<&str> = body.split_whitespace().collect();
    if fields.len() != keys.len() {
        return Err(parse_err(
            line,
            format!("expected header fields {keys:?}, got `{text}`"),
        ));
    }
    fields
        .iter()
        .zip(keys)
        .map(|(field, key)| {
            let value = field
                .strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .ok_or_else(|| parse_err(line, format!("expected `{key}=<n>`, got `{field}`")))?;
            parse_usize(line, key, value)
        })
        .collect()
}

fn split_fields(line: usize, text: &str, expected: usize) -> Result<Vec<&str>> {
    let fields: Vec<&str> = text.split('\t').collect();
    if fields.len() != expected {
        return Err(parse_err(
            line,
            format!(
                "expected {expected} tab-separated fields, got {}",
                fields.len()
            ),
        ));
    }
    Ok(fields)
}

fn check_id(line: usize, what: &str, id: &str) -> Result<()> {
    if id.is_empty() {
        return Err(parse_err(line, format!("empty {what}")));
    }
    Ok(())
}

pub fn parse_feature_bank(text: &str) -> Result<FeatureBank> {
    let mut lines = numbered(text);
    let dim = parse_header(1, lines.next().map(|(_, l)| l), &["dim"])?[0];
    if dim == 0 {
        return Err(parse_err(1, "dim must be positive"));
    }
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (no, line) in lines {
        let fields = split_fields(no, line, 3)?;
        check_id(no, "class_id", fields[0])?;
        check_id(no, "image_id", fields[1])?;
        let features = parse_floats(no, fields[2])?;
        if features.len() != dim {
            return Err(parse_err(
                no,
                format!("expected {dim} features, got {}", features.len()),
            ));
        }
        if !seen.insert((fields[0], fields[1])) {
            return Err(FormatError::Duplicate {
                line: no,
                what: "record",
                key: format!("{}/{}", fields[0], fields[1]),
            });
        }
        records.push(Record {
            class_id: fields[0].to_string(),
            image_id: fields[1].to_string(),
            features,
        });
    }
    Ok(FeatureBank::new(dim, records)?)
}

pub fn serialize_feature_bank(bank: &FeatureBank) -> String {
    let mut out = format!("#dim={}\n", bank.dim());
    for rec in bank.records() {
        write!(out, "{}\t{}\t", rec.class_id, rec.image_id).unwrap();
        push_floats(&mut out, &rec.features);
        out.push('\n');
    }
    out
}

/// Lines starting with `#` are comments.
pub fn parse_class_embeddings(text: &str) -> Result<ClassEmbeddings> {
    let mut embeddings: Option<ClassEmbeddings> = None;
    for (no, line) in numbered(text) {
        if line.starts_with('#') {
            continue;
        }
        let fields = split_fields(no, line, 3)?;
        check_id(no, "class_id", fields[0])?;
        let dw = parse_usize(no, "d_w", fields[1])?;
        let vector = parse_floats(no, fields[2])?;
        if vector.len() != dw {
            return Err(parse_err(
                no,
                format!("row declares d_w={dw} but holds {} values", vector.len()),
            ));
        }
        let table = embeddings.get_or_insert_with(|| ClassEmbeddings::new(dw));
        if table.dim() != dw {
            return Err(parse_err(
                no,
                format!("d_w={dw} differs from d_w={} of earlier rows", table.dim()),
            ));
        }
        if table.get(fields[0]).is_some() {
            return Err(FormatError::Duplicate {
                line: no,
                what: "class embedding",
                key: fields[0].to_string(),
            });
        }
        table.insert(fields[0], vector)?;
    }
    embeddings.ok_or_else(|| parse_err(1, "no class embeddings"))
}

/// Rows sorted by class id.
pub fn serialize_class_embeddings(embeddings: &ClassEmbeddings) -> String {
    let mut out = String::new();
    for (class_id, vector) in embeddings.iter() {
        write!(out, "{class_id}\t{}\t", vector.len()).unwrap();
        push_floats(&mut out, vector);
        out.push('\n');
    }
    out
}

pub fn parse_importance_matrix(text: &str) -> Result<ImportanceMatrix> {
    let mut lines = numbered(text);
    let header = parse_header(1, lines.next().map(|(_, l)| l), &["rows", "cols"])?;
    let (rows, cols) = (header[0], header[1]);
    let mut data = Vec::with_capacity(rows * cols);
    let mut count = 0;
    for (no, line) in lines {
        let row = parse_floats(no, line)?;
        if row.len() != cols {
            return Err(parse_err(
                no,
                format!("expected {cols} columns, got {}", row.len()),
            ));
        }
        if let Some(v) = row.iter().find(|v| **v < 0.0) {
            return Err(parse_err(no, format!("importance {v} is negative")));
        }
        data.extend(row);
        count += 1;
    }
    if count != rows {
        return Err(parse_err(
            count + 1,
            format!("header declares {rows} rows, found {count}"),
        ));
    }
    Ok(ImportanceMatrix::new(rows, cols, data)?)
}

pub fn serialize_importance_matrix(matrix: &ImportanceMatrix) -> String {
    let mut out = format!("#rows={} cols={}\n", matrix.rows(), matrix.cols());
    for r in 0..matrix.rows() {
        push_floats(&mut out, matrix.row(r));
        out.push('\n');
    }
    out
}

/// Facet ids must be `0..F`, each exactly once; facets keep id order.
pub fn parse_facet_partition(text: &str) -> Result<FacetPartition> {
    let mut lines = numbered(text);
    let header = parse_header(1, lines.next().map(|(_, l)| l), &["nv", "f"])?;
    let (nv, f) = (header[0], header[1]);
    let mut facets: Vec<Option<Vec<usize>>> = vec![None; f];
    for (no, line) in lines {
        let fields = split_fields(no, line, 2)?;
        let id = parse_usize(no, "facet_id", fields[0])?;
        if id >= f {
            return Err(parse_err(
                no,
                format!("facet_id {id} out of range for f={f}"),
            ));
        }
        if facets[id].is_some() {
            return Err(FormatError::Duplicate {
                line: no,
                what: "facet",
                key: id.to_string(),
            });
        }
        let indices = fields[1]
            .split(',')
            .map(|tok| parse_usize(no, "index", tok))
            .collect::<Result<Vec<_>>>()?;
        facets[id] = Some(indices);
    }
    let facets = facets
        .into_iter()
        .enumerate()
        .map(|(id, facet)| {
            facet.ok_or_else(|| {
                parse_err(text.lines().count() + 1, format!("facet {id} is missing"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FacetPartition::new(nv, facets)?)
}

pub fn serialize_facet_partition(partition: &FacetPartition) -> String {
    let mut out = format!("#nv={} f={}\n", partition.dim(), partition.num_facets());
    for (id, facet) in partition.facets().iter().enumerate() {
        write!(out, "{id}\t").unwrap();
        push_indices(&mut out, facet);
        out.push('\n');
    }
    out
}

pub fn parse_gate_params(text: &str) -> Result<GateParams> {
    let mut lines = numbered(text);
    let header = parse_header(1, lines.next().map(|(_, l)| l), &["f", "dw"])?;
    let (f, dw) = (header[0], header[1]);
    let rows = lines
        .map(|(no, line)| parse_floats(no, line).map(|r| (no, r)))
        .collect::<Result<Vec<_>>>()?;
    if rows.len() != f + 1 {
        return Err(parse_err(
            rows.len() + 1,
            format!(
                "expected {f} weight rows and one bias row, found {} rows",
                rows.len()
            ),
        ));
    }
    let mut weights = Vec::with_capacity(f * dw);
    for (no, row) in &rows[..f] {
        if row.len() != dw {
            return Err(parse_err(
                *no,
                format!("expected {dw} weights, got {}", row.len()),
            ));
        }
        weights.extend_from_slice(row);
    }
    let (no, bias) = &rows[f];
    if bias.len() != f {
        return Err(parse_err(
            *no,
            format!("expected {f} bias entries, got {}", bias.len()),
        ));
    }
    Ok(GateParams::new(f, dw, weights, bias.clone())?)
}

pub fn serialize_gate_params(params: &GateParams) -> String {
    let mut out = format!("#f={} dw={}\n", params.num_facets(), params.dim());
    for k in 0..params.num_facets() {
        push_floats(&mut out, params.weight_row(k));
        out.push('\n');
    }
    push_floats(&mut out, params.bias());
    out.push('\n');
    out
}

/// Per-episode accuracies with the seed needed to pair runs.
pub fn serialize_eval_results(report: &EvalReport) -> String {
    let mut out = format!("#episodes={} seed={}\n", report.episodes, report.seed);
    for (j, acc) in report.per_episode_accuracies.iter().enumerate() {
        writeln!(out, "{j}\t{acc:?}").unwrap();
    }
    out
}

pub fn parse_eval_results(text: &str) -> Result<EvalReport> {
    let mut lines = numbered(text);
    let (_, head) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let (episodes, seed) = head
        .strip_prefix("#episodes=")
        .and_then(|rest| rest.split_once(" seed="))
        .ok_or_else(|| parse_err(1, "expected `#episodes=<E> seed=<s>`"))?;
    let episodes = parse_usize(1, "episodes", episodes)?;
    let seed: u64 = seed
        .parse()
        .map_err(|_| parse_err(1, format!("seed `{seed}` is not an unsigned integer")))?;
    let mut accuracies = Vec::with_capacity(episodes);
    for (no, line) in lines {
        let fields = split_fields(no, line, 2)?;
        let j = parse_usize(no, "episode_index", fields[0])?;
        if j != accuracies.len() {
            return Err(parse_err(
                no,
                format!("expected episode {}, got {j}", accuracies.len()),
            ));
        }
        let acc = parse_floats(no, fields[1])?;
        if acc.len() != 1 || !(0.0..=1.0).contains(&acc[0]) {
            return Err(parse_err(no, "accuracy must be one number in [0, 1]"));
        }
        accuracies.push(acc[0]);
    }
    if accuracies.len() != episodes {
        return Err(parse_err(
            accuracies.len() + 2,
            format!(
                "header declares {episodes} episodes, found {}",
                accuracies.len()
            ),
        ));
    }
    Ok(EvalReport::from_accuracies(seed, accuracies))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_feature_bank(path: &Path) -> Result<FeatureBank> {
    parse_feature_bank(&read_text(path)?)
}

pub fn read_class_embeddings(path: &Path) -> Result<ClassEmbeddings> {
    parse_class_embeddings(&read_text(path)?)
}

pub fn read_importance_matrix(path: &Path) -> Result<ImportanceMatrix> {
    parse_importance_matrix(&read_text(path)?)
}

pub fn read_facet_partition(path: &Path) -> Result<FacetPartition> {
    parse_facet_partition(&read_text(path)?)
}

pub fn read_gate_params(path: &Path) -> Result<GateParams> {
    parse_gate_params(&read_text(path)?)
}

pub fn read_eval_results(path: &Path) -> Result<EvalReport> {
    parse_eval_results(&read_text(path)?)
}
