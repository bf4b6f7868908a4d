//! CSV tables: annotations, predictions and ground-truth player labels.

use std::collections::BTreeMap;
use std::path::Path;

use pitchgraph_core::actions::{Action, Annotation, Visibility};
use pitchgraph_core::spotting::Spot;
use pitchgraph_core::teamcluster::{PlayerClass, SampleId};

use crate::error::{PipelineError, Result};
use crate::fsutil;

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes())
}

/// Reads rows of exactly `columns` named fields; `f` turns one row into a value.
fn read_rows<T>(path: &Path, columns: &[&str], mut f: impl FnMut(&csv::StringRecord) -> std::result::Result<T, String>) -> Result<Vec<T>> {
    let text = fsutil::read_string(path)?;
    let mut rdr = reader(&text);
    let headers = rdr.headers().map_err(|e| PipelineError::Parse { path: path.into(), line: 1, msg: e.to_string() })?.clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != columns {
        return Err(PipelineError::Parse { path: path.into(), line: 1, msg: format!("expected columns {columns:?}, found {got:?}") });
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| PipelineError::Parse {
            path: path.into(),
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        out.push(f(&row).map_err(|msg| PipelineError::Parse { path: path.into(), line, msg })?);
    }
    Ok(out)
}

fn write_rows(path: &Path, columns: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| PipelineError::format(path, e.to_string());
    w.write_record(columns).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| PipelineError::format(path, e.to_string()))?;
    fsutil::write_atomic(path, &bytes)
}

fn num(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    v.is_finite().then_some(v).ok_or_else(|| format!("{s:?} is not finite"))
}

const ANNOTATION_COLUMNS: [&str; 3] = ["time_s", "action", "visibility"];
const PREDICTION_COLUMNS: [&str; 3] = ["time_s", "action", "confidence"];
const LABEL_COLUMNS: [&str; 3] = ["frame_index", "detection_id", "class"];

pub fn load_annotations(path: &Path) -> Result<Vec<Annotation>> {
    read_rows(path, &ANNOTATION_COLUMNS, |r| {
        Ok(Annotation {
            time_s: num(&r[0])?,
            action: Action::parse(&r[1]).map_err(|e| e.to_string())?,
            visibility: Visibility::parse(&r[2]).map_err(|e| e.to_string())?,
        })
    })
}

pub fn write_annotations(path: &Path, anns: &[Annotation]) -> Result<()> {
    write_rows(
        path,
        &ANNOTATION_COLUMNS,
        anns.iter().map(|a| vec![format!("{}", a.time_s), a.action.name().into(), a.visibility.name().into()]),
    )
}

pub fn load_predictions(path: &Path) -> Result<Vec<Spot>> {
    read_rows(path, &PREDICTION_COLUMNS, |r| {
        let confidence = num(&r[2])?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(format!("confidence {confidence} outside [0,1]"));
        }
        Ok(Spot { time_s: num(&r[0])?, action: Action::parse(&r[1]).map_err(|e| e.to_string())?, confidence })
    })
}

pub fn write_predictions(path: &Path, spots: &[Spot]) -> Result<()> {
    write_rows(
        path,
        &PREDICTION_COLUMNS,
        spots.iter().map(|s| vec![format!("{}", s.time_s), s.action.name().into(), format!("{:?}", s.confidence)]),
    )
}

pub fn load_labels(path: &Path) -> Result<BTreeMap<SampleId, PlayerClass>> {
    let rows = read_rows(path, &LABEL_COLUMNS, |r| {
        let frame: u32 = r[0].parse().map_err(|_| format!("bad frame index {:?}", &r[0]))?;
        let det: u32 = r[1].parse().map_err(|_| format!("bad detection id {:?}", &r[1]))?;
        let class = PlayerClass::parse(&r[2]).ok_or_else(|| format!("unknown class {:?}", &r[2]))?;
        Ok((SampleId::new(frame, det), class))
    })?;
    Ok(rows.into_iter().collect())
}

pub fn write_labels(path: &Path, labels: &BTreeMap<SampleId, PlayerClass>) -> Result<()> {
    write_rows(
        path,
        &LABEL_COLUMNS,
        labels.iter().map(|(id, c)| vec![id.frame_index().to_string(), id.detection_id().to_string(), c.name().into()]),
    )
}
