//! Feature streams as text: a header line `<modality> <dim>`, then one
//! whitespace-separated vector per line (one line per frame at 2 fps).

use std::path::Path;

use pitchgraph_core::ingest::{FeatureStream, Modality};

use crate::error::{PipelineError, Result};
use crate::fsutil;

pub fn parse_feature_stream(text: &str, path: &Path) -> Result<FeatureStream> {
    let parse_err = |line: usize, msg: String| PipelineError::Parse { path: path.into(), line, msg };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header line".into()))?;
    let mut parts = header.split_whitespace();
    let modality = parts
        .next()
        .and_then(Modality::parse)
        .ok_or_else(|| parse_err(1, format!("header {header:?} must start with rgb or audio")))?;
    let dim: usize = parts.next().and_then(|d| d.parse().ok()).ok_or_else(|| parse_err(1, "header lacks a dimension".into()))?;
    let mut vectors = Vec::new();
    for (i, line) in lines {
        let v: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        let v = v.map_err(|e| parse_err(i + 1, e.to_string()))?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(parse_err(i + 1, "non-finite component".into()));
        }
        vectors.push(v);
    }
    let stream = FeatureStream { modality, dim, vectors };
    stream.validate()?;
    Ok(stream)
}

pub fn load_feature_stream(path: &Path) -> Result<FeatureStream> {
    parse_feature_stream(&fsutil::read_string(path)?, path)
}

pub fn write_feature_stream(path: &Path, s: &FeatureStream) -> Result<()> {
    let mut text = format!("{} {}\n", s.modality.name(), s.dim);
    for v in &s.vectors {
        let row: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    fsutil::write_atomic(path, text.as_bytes())
}
