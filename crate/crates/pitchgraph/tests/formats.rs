use std::collections::BTreeMap;
use std::path::Path;

use pitchgraph::core::actions::{Action, Annotation, Visibility};
use pitchgraph::core::gnn::{separable_windows, ModelConfig, ModelParams};
use pitchgraph::core::image::RgbImage;
use pitchgraph::core::ingest::{FeatureStream, FlowField, Modality};
use pitchgraph::core::spotting::Spot;
use pitchgraph::core::teamcluster::{PlayerClass, SampleId};
use pitchgraph::formats::flow::{decode_flow, encode_flow, load_flow_field, write_flow_field, FlowError};
use pitchgraph::formats::{checkpoint, features, frames, pgw, records, tables};
use pitchgraph::PipelineError;
use proptest::prelude::*;

const IDENTITY: &str = "[[1,0,0],[0,1,0],[0,0,1]]";

fn record_json(frame: u32, homography: &str) -> String {
    format!(
        r#"{{"frame_index":{frame},"timestamp_s":{t},"detections":[{{"id":0,"bbox":{{"x_min":2.0,"y_min":3.0,"x_max":4.0,"y_max":6.0}},"score":0.9,"mask":[1,4,1]}}],"homography":{homography},"calib_confidence":0.9,"frame_size":[64,36]}}"#,
        t = frame as f64 * 0.5
    )
}

fn parse(text: &str) -> pitchgraph::Result<Vec<pitchgraph::core::ingest::FrameRecord>> {
    records::parse_frame_records(text, Path::new("records.jsonl"))
}

#[test]
fn empty_records_file_is_an_empty_sequence() {
    assert!(parse("").unwrap().is_empty());
    assert!(parse("\n  \n").unwrap().is_empty());
}

#[test]
fn one_record_keeps_its_fields() {
    let recs = parse(&record_json(4, IDENTITY)).unwrap();
    assert_eq!(recs.len(), 1);
    let r = &recs[0];
    assert_eq!((r.frame_index, r.timestamp_s, r.calib_confidence, r.frame_size), (4, 2.0, 0.9, (64, 36)));
    assert_eq!(r.detections[0].mask.0, vec![1, 4, 1]);
    assert_eq!(parse(&records::record_line(r)).unwrap(), recs);
}

#[test]
fn records_are_sorted_by_frame_index() {
    let text = format!("{}\n{}\n", record_json(3, IDENTITY), record_json(1, IDENTITY));
    let idx: Vec<u32> = parse(&text).unwrap().iter().map(|r| r.frame_index).collect();
    assert_eq!(idx, vec![1, 3]);
}

#[test]
fn four_by_four_homography_is_a_validation_error() {
    let h = "[[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]";
    let err = parse(&record_json(0, h)).unwrap_err();
    assert!(matches!(err, PipelineError::Core(pitchgraph::core::Error::Validation(_))), "{err}");
}

#[test]
fn malformed_line_names_its_number() {
    let text = format!("{}\nnot json\n", record_json(0, IDENTITY));
    match parse(&text).unwrap_err() {
        PipelineError::Parse { line, .. } => assert_eq!(line, 2),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn mask_that_misses_the_bbox_area_is_rejected() {
    let text = record_json(0, IDENTITY).replace("[1,4,1]", "[1,4]");
    assert!(matches!(parse(&text), Err(PipelineError::Core(pitchgraph::core::Error::Validation(_)))));
}

#[test]
fn minimal_flow_payload() {
    let mut bytes = b"PGF1".to_vec();
    bytes.extend_from_slice(&1u32.to_le_bytes());
    bytes.extend_from_slice(&1u32.to_le_bytes());
    bytes.extend_from_slice(&0.5f32.to_le_bytes());
    bytes.extend_from_slice(&(-1.0f32).to_le_bytes());
    let f = decode_flow(&bytes).unwrap();
    assert_eq!((f.width, f.height, f.values.clone()), (1, 1, vec![[0.5, -1.0]]));
    assert_eq!(encode_flow(&f), bytes);
}

#[test]
fn bad_flow_magic_and_truncation() {
    let f = FlowField::new(2, 2, vec![[1.0, 2.0]; 4]).unwrap();
    let mut bytes = encode_flow(&f);
    bytes[..4].copy_from_slice(b"XXXX");
    assert_eq!(decode_flow(&bytes), Err(FlowError::Magic(*b"XXXX")));
    let good = encode_flow(&f);
    assert!(matches!(decode_flow(&good[..good.len() - 3]), Err(FlowError::Length { .. })));
    assert!(matches!(decode_flow(&good[..2]), Err(FlowError::Length { .. })));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.pgf");
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_flow_field(&path), Err(PipelineError::Format { .. })));
}

#[test]
fn non_finite_flow_is_rejected() {
    let mut bytes = encode_flow(&FlowField::new(1, 1, vec![[0.0, 0.0]]).unwrap());
    bytes[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(matches!(decode_flow(&bytes), Err(FlowError::Invalid(_))));
}

proptest! {
    #[test]
    fn flow_round_trip_is_bit_exact(w in 1u32..12, h in 1u32..10, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<[f32; 2]> = (0..w * h).map(|_| [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)]).collect();
        let f = FlowField::new(w, h, values).unwrap();
        let bytes = encode_flow(&f);
        let back = decode_flow(&bytes).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(encode_flow(&back), bytes);
    }
}

#[test]
fn flow_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let f = FlowField::new(8, 6, (0..48).map(|i| [i as f32 * 0.25, -(i as f32)]).collect()).unwrap();
    let path = frames::flow_path(dir.path(), 12);
    assert!(path.ends_with("000012.pgf"));
    write_flow_field(&path, &f).unwrap();
    assert_eq!(load_flow_field(&path).unwrap(), f);
}

#[test]
fn png_round_trip_is_lossless() {
    let pixels: Vec<[u8; 3]> = (0..35u32).map(|i| [(i * 7) as u8, (255 - i) as u8, (i * i) as u8]).collect();
    let img = RgbImage::new(7, 5, pixels).unwrap();
    assert_eq!(frames::decode_png(&frames::encode_png(&img)).unwrap(), img);
    assert!(frames::decode_png(b"not a png").is_err());
}

#[test]
fn checkpoint_round_trip_and_corruption() {
    let cfg = ModelConfig { hidden: 6, blocks: 2, vlad_clusters: 3, fusion_dims: vec![4], ..Default::default() };
    let p = ModelParams::init(cfg, 9).unwrap();
    let bytes = checkpoint::encode_checkpoint(&p);
    assert_eq!(checkpoint::decode_checkpoint(&bytes).unwrap(), p);
    assert!(checkpoint::decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(checkpoint::decode_checkpoint(&extra).is_err());
    let mut magic = bytes;
    magic[0] = b'X';
    assert!(checkpoint::decode_checkpoint(&magic).is_err());
}

#[test]
fn graph_cache_round_trip_at_single_precision() {
    let mut ds = separable_windows(10, 3, 4);
    for w in &mut ds.windows {
        w.fusion = vec![vec![0.1, -2.0], vec![3.5]];
    }
    ds.windows[2].slots[5] = None;
    let bytes = pgw::encode_dataset(&ds, &[2, 1]);
    let (back, dims) = pgw::decode_dataset(&bytes).unwrap();
    assert_eq!(dims, vec![2, 1]);
    assert_eq!(back.windows.len(), ds.windows.len());
    for (a, b) in back.windows.iter().zip(&ds.windows) {
        assert_eq!((a.label, &a.slots), (b.label, &b.slots));
    }
    for (a, b) in back.frames.iter().zip(&ds.frames) {
        assert_eq!(a.edges, b.edges);
        for (x, y) in a.nodes.iter().zip(&b.nodes) {
            for (u, v) in x.0.iter().zip(&y.0) {
                assert_eq!(*u, *v as f32 as f64);
            }
        }
    }
    // A second pass is lossless.
    assert_eq!(pgw::encode_dataset(&back, &dims), bytes);
    assert!(pgw::decode_dataset(&bytes[..bytes.len() - 2]).is_err());
    let mut version = bytes.clone();
    version[0] = 9;
    assert!(pgw::decode_dataset(&version).is_err());
}

#[test]
fn graph_cache_rejects_dangling_slots() {
    let mut ds = separable_windows(2, 2, 1);
    ds.windows[0].slots[0] = Some(10_000);
    assert!(pgw::decode_dataset(&pgw::encode_dataset(&ds, &[])).is_err());
}

#[test]
fn tables_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let anns = vec![
        Annotation { time_s: 12.5, action: Action::Goal, visibility: Visibility::Visible },
        Annotation { time_s: 40.0, action: Action::ThrowIn, visibility: Visibility::Unshown },
    ];
    let p = dir.path().join("annotations.csv");
    tables::write_annotations(&p, &anns).unwrap();
    assert_eq!(tables::load_annotations(&p).unwrap(), anns);

    let spots = vec![Spot { time_s: 3.0, action: Action::Corner, confidence: 0.123456789 }];
    let p = dir.path().join("predictions.csv");
    tables::write_predictions(&p, &spots).unwrap();
    assert_eq!(tables::load_predictions(&p).unwrap(), spots);

    let labels: BTreeMap<SampleId, PlayerClass> =
        [(SampleId::new(3, 1), PlayerClass::Referee), (SampleId::new(0, 7), PlayerClass::GoalkeeperB)].into_iter().collect();
    let p = dir.path().join("labels.csv");
    tables::write_labels(&p, &labels).unwrap();
    assert_eq!(tables::load_labels(&p).unwrap(), labels);
}

#[test]
fn bad_table_rows_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("predictions.csv");
    std::fs::write(&p, "time_s,action,confidence\n3.0,Corner,1.5\n").unwrap();
    assert!(tables::load_predictions(&p).is_err());
    std::fs::write(&p, "time_s,action,confidence\n3.0,Dance,0.5\n").unwrap();
    assert!(tables::load_predictions(&p).is_err());
    std::fs::write(&p, "when,what,how\n").unwrap();
    assert!(tables::load_predictions(&p).is_err());
}

#[test]
fn feature_stream_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = FeatureStream { modality: Modality::Audio, dim: 3, vectors: vec![vec![0.1, 0.2, 0.3], vec![-1.0, 0.0, 1e-9]] };
    let p = dir.path().join("audio.txt");
    features::write_feature_stream(&p, &s).unwrap();
    assert_eq!(features::load_feature_stream(&p).unwrap(), s);
    assert!(features::parse_feature_stream("audio 2\n1 2 3\n", &p).is_err());
    assert!(features::parse_feature_stream("video 2\n1 2\n", &p).is_err());
}
