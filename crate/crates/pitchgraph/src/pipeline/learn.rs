//! Graph construction, training, inference and evaluation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use pitchgraph_core::actions::{class_name, Action, Annotation, NUM_CLASSES};
use pitchgraph_core::gnn::{self, Dataset};
use pitchgraph_core::graph::{build_node, window_centers, PlayerGraph, Timeline, WINDOW_SPAN_S};
use pitchgraph_core::ingest::FeatureStream;
use pitchgraph_core::spotting::{evaluate, infer_spots, EvalReport, MapReport};
use pitchgraph_core::teamcluster::PlayerModel;

use super::artifacts::{MotionArtifact, PeopleArtifact, TeamsArtifact, TrainArtifact};
use super::Stage;
use crate::config::PipelineConfig;
use crate::error::{PipelineError, Result};
use crate::formats::{checkpoint, features, pgw, tables};
use crate::fsutil;

const HALF_SPAN_S: f64 = WINDOW_SPAN_S / 2.0;

pub(super) fn graphs(cfg: &PipelineConfig) -> Result<String> {
    let cache = &cfg.paths.cache_dir;
    let people: PeopleArtifact = fsutil::read_json(&Stage::Ingest.artifact(cache))?;
    let teams: TeamsArtifact = fsutil::read_json(&Stage::Teams.artifact(cache))?;
    let motion: MotionArtifact = fsutil::read_json(&Stage::Motion.artifact(cache))?;
    let moves: BTreeMap<u32, &_> = motion.frames.iter().map(|m| (m.frame_index, m)).collect();

    let mut graphs = Vec::with_capacity(people.frames.len());
    for f in &people.frames {
        let mut nodes = Vec::with_capacity(f.people.len());
        if let (true, Some(center)) = (f.kept, f.frame_center) {
            let m = moves.get(&f.frame_index).filter(|m| m.people.len() == f.people.len()).ok_or_else(|| {
                PipelineError::format(Stage::Motion.artifact(cache), format!("no motion for frame {}; re-run `motion`", f.frame_index))
            })?;
            for (p, mv) in f.people.iter().zip(&m.people) {
                let probs = teams.classifier.predict(&p.hist);
                nodes.push(build_node(probs, *mv, p.area_norm, p.position, center, f.calib_confidence)?);
            }
        }
        graphs.push(PlayerGraph::from_nodes(f.timestamp_s, nodes, &cfg.graph));
    }
    let timeline = Timeline::new(graphs);
    let centers = window_centers(&timeline, cfg.windows.stride_s);
    let annotations = tables::load_annotations(&cfg.paths.annotations)?;
    let mut ds = Dataset::from_timeline(&timeline, &centers, &annotations);

    let streams: Vec<FeatureStream> = cfg.paths.features.iter().map(|p| features::load_feature_stream(p)).collect::<Result<_>>()?;
    for (s, path) in streams.iter().zip(&cfg.paths.features) {
        s.check_alignment(people.frames.len()).map_err(|e| PipelineError::format(path, e.to_string()))?;
    }
    let fusion_dims: Vec<usize> = streams.iter().map(|s| s.dim).collect();
    for w in &mut ds.windows {
        let (lo, hi) = (w.center_time_s - HALF_SPAN_S, w.center_time_s + HALF_SPAN_S);
        w.fusion = streams.iter().map(|s| s.mean_over(lo, hi)).collect();
    }
    pgw::write_dataset(&Stage::Graphs.artifact(cache), &ds, &fusion_dims)?;
    let labeled = ds.windows.iter().filter(|w| w.label != pitchgraph_core::actions::BACKGROUND).count();
    Ok(format!("graphs: {} frame graphs, {} windows ({} labeled with an action)", ds.frames.len(), ds.len(), labeled))
}

/// Windows selected by `keep`, sharing the full frame table.
fn subset(ds: &Dataset, keep: impl Fn(usize, f64) -> bool) -> Dataset {
    let windows = ds.windows.iter().enumerate().filter(|(i, w)| keep(*i, w.center_time_s)).map(|(_, w)| w.clone()).collect();
    Dataset { frames: ds.frames.clone(), windows }
}

pub(super) fn train(cfg: &PipelineConfig) -> Result<String> {
    let cache = &cfg.paths.cache_dir;
    let (ds, fusion_dims) = pgw::load_dataset(&Stage::Graphs.artifact(cache))?;
    let step = ((cfg.windows.train_stride_s / cfg.windows.stride_s).round() as usize).max(1);
    let limit = cfg.split.test_from_s;
    // A training window must end before the test period starts.
    let train_set = subset(&ds, |i, c| i % step == 0 && limit.map_or(true, |t| c + HALF_SPAN_S <= t));
    if train_set.is_empty() {
        return Err(PipelineError::Config("no training windows before split.test_from_s".into()));
    }
    let model = gnn::ModelConfig { fusion_dims, ..cfg.model.clone() };
    let (params, report) = gnn::train(&train_set, model, &cfg.train, cfg.seed)?;
    let mut class_counts = vec![0usize; NUM_CLASSES];
    train_set.windows.iter().for_each(|w| class_counts[w.label] += 1);
    checkpoint::write_checkpoint(&cache.join(Stage::Train.outputs()[0]), &params)?;
    let summary = format!(
        "train: {} windows, {} parameters, {} epochs, final loss {:.4}, training accuracy {:.2}%",
        train_set.len(),
        params.num_parameters(),
        report.epochs,
        report.loss.last().copied().unwrap_or(f64::NAN),
        report.train_accuracy
    );
    let artifact = TrainArtifact { train_windows: train_set.len(), parameters: params.num_parameters(), class_counts, report };
    fsutil::write_json(&cache.join(Stage::Train.outputs()[1]), &artifact)?;
    Ok(summary)
}

pub(super) fn spot(cfg: &PipelineConfig) -> Result<String> {
    let cache = &cfg.paths.cache_dir;
    let (ds, fusion_dims) = pgw::load_dataset(&Stage::Graphs.artifact(cache))?;
    let model_path = Stage::Train.artifact(cache);
    let params = checkpoint::load_checkpoint(&model_path)?;
    if params.config.fusion_dims != fusion_dims {
        return Err(PipelineError::format(
            &model_path,
            format!("model fuses streams of widths {:?}, graphs carry {:?}; re-run `train`", params.config.fusion_dims, fusion_dims),
        ));
    }
    let test = subset(&ds, |_, c| cfg.split.test_from_s.map_or(true, |t| c >= t));
    let spots = infer_spots(&params, &test, cfg.spotting.nms_window_s)?;
    tables::write_predictions(&Stage::Spot.artifact(cache), &spots)?;
    Ok(format!("spot: {} windows, {} spots after {} s NMS", test.len(), spots.len(), cfg.spotting.nms_window_s))
}

fn scalar(r: &MapReport) -> String {
    if r.n_gt == 0 {
        "n/a".into()
    } else {
        format!("{:.3}", r.average)
    }
}

/// Plain-text report: per-action AP at each tolerance plus the subset scalars.
pub fn render_report(r: &EvalReport) -> String {
    let mut s = String::new();
    let all = &r.all;
    let _ = write!(s, "{:<20}", "action");
    for t in &all.tolerances {
        let _ = write!(s, " {:>6}", format!("{t}s"));
    }
    let _ = writeln!(s, " {:>7}", "avg");
    for a in Action::ALL {
        if all.per_class.iter().all(|row| row[a.index()].is_none()) {
            continue;
        }
        let _ = write!(s, "{:<20}", class_name(a.index()));
        let mut sum = 0.0;
        for row in &all.per_class {
            let ap = row[a.index()].unwrap_or(0.0);
            sum += ap;
            let _ = write!(s, " {ap:>6.3}");
        }
        let _ = writeln!(s, " {:>7.3}", sum / all.per_class.len() as f64);
    }
    let _ = write!(s, "{:<20}", "mAP");
    all.map.iter().for_each(|m| {
        let _ = write!(s, " {m:>6.3}");
    });
    let _ = writeln!(s, " {:>7.3}", all.average);
    let _ = writeln!(s);
    let _ = writeln!(s, "average-mAP all      {} ({} annotations)", scalar(&r.all), r.all.n_gt);
    let _ = writeln!(s, "average-mAP visible  {} ({} annotations)", scalar(&r.visible), r.visible.n_gt);
    let _ = writeln!(s, "average-mAP unshown  {} ({} annotations)", scalar(&r.unshown), r.unshown.n_gt);
    let _ = writeln!(s, "mAP at 60 s          {:.3}", r.single_map_60);
    s
}

pub(super) fn eval(cfg: &PipelineConfig) -> Result<String> {
    let cache = &cfg.paths.cache_dir;
    let preds = tables::load_predictions(&Stage::Spot.artifact(cache))?;
    let gt: Vec<Annotation> = tables::load_annotations(&cfg.paths.annotations)?
        .into_iter()
        .filter(|a| cfg.split.test_from_s.map_or(true, |t| a.time_s >= t))
        .collect();
    let report = evaluate(&preds, &gt, &cfg.spotting.tolerances)?;
    fsutil::write_json(&Stage::Eval.artifact(cache), &report)?;
    fsutil::write_atomic(&cache.join(Stage::Eval.outputs()[1]), render_report(&report).as_bytes())?;
    Ok(format!(
        "eval: average-mAP {} (visible {}, unshown {}), mAP@60 {:.3}, {} predictions vs {} annotations",
        scalar(&report.all),
        scalar(&report.visible),
        scalar(&report.unshown),
        report.single_map_60,
        preds.len(),
        gt.len()
    ))
}
