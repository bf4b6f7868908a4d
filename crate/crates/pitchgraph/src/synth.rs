//! A deterministic synthetic match in the ingest formats.
//!
//! The camera sees a 36 m × 20 m patch of the pitch in 128×72 frames with a
//! static scoreboard in the top-left corner. Every 30 s segment is background
//! play (the camera pans along the halfway band) followed by one scripted
//! action scene centered on the annotation: a goal at goal B, a corner at
//! goal A, a foul in midfield or a throw-in on the near touchline, in that
//! rotation. People are single-chroma 5×12 patches; the goal and corner
//! scenes put exactly one keeper next to the goal with everybody else clear of
//! it. Flow fields follow the scripted camera and player motion exactly.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use pitchgraph_core::actions::{Action, Annotation, Visibility};
use pitchgraph_core::geometry::Homography;
use pitchgraph_core::image::RgbImage;
use pitchgraph_core::ingest::{BBox, Detection, FlowField, FrameRecord, RleMask, FRAME_STEP_S};
use pitchgraph_core::teamcluster::{PlayerClass, SampleId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Paths, PipelineConfig, SplitConfig, WindowConfig};
use crate::error::Result;
use crate::formats::{flow, frames, records, tables};
use crate::fsutil;

pub const WIDTH: usize = 128;
pub const HEIGHT: usize = 72;
/// Meters per pixel.
pub const SCALE: f64 = 36.0 / WIDTH as f64;
const PERSON_W: usize = 5;
const PERSON_H: usize = 12;
/// Scoreboard rectangle `(x1, y1)`; it starts at the origin.
const BOARD: (usize, usize) = (32, 10);
const SEGMENT_S: f64 = 30.0;
/// Annotation offset inside a segment.
const ACTION_AT_S: f64 = 20.0;
/// Half length of an action scene.
const SCENE_HALF_S: f64 = 7.0;
const PAN_SPEED: f64 = 2.0;
const ROTATION: [Action; 4] = [Action::Goal, Action::Corner, Action::Foul, Action::ThrowIn];

const FIELD_A: [u8; 3] = [40, 140, 50];
const FIELD_B: [u8; 3] = [48, 152, 58];
const STANDS: [u8; 3] = [100, 100, 110];

fn jersey(class: PlayerClass) -> [u8; 3] {
    match class {
        PlayerClass::Team1 => [200, 30, 30],
        PlayerClass::Team2 => [30, 60, 200],
        PlayerClass::Referee => [230, 230, 40],
        PlayerClass::GoalkeeperA => [230, 120, 200],
        PlayerClass::GoalkeeperB => [40, 200, 200],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthConfig {
    pub duration_s: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { duration_s: 720.0, seed: 7 }
    }
}

impl SynthConfig {
    /// Start of the held-out period: the last third of the match.
    pub fn test_from_s(&self) -> f64 {
        (self.duration_s * 2.0 / 3.0 / SEGMENT_S).floor() * SEGMENT_S
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub frames: usize,
    pub detections: usize,
    pub annotations: Vec<Annotation>,
    pub config_path: PathBuf,
}

/// A scripted moment: camera center, people on the pitch, and an id that
/// changes across cuts.
struct Scene {
    id: u64,
    camera: (f64, f64),
    people: Vec<(PlayerClass, (f64, f64))>,
}

/// One background player: lane, offset and class. Lanes are far enough apart
/// vertically and players within a lane far enough apart horizontally that
/// nobody overlaps.
struct Runner {
    class: PlayerClass,
    lane: usize,
    offset_x: f64,
}

struct Script {
    duration_s: f64,
    runners: Vec<Runner>,
    lane_phase: Vec<f64>,
}

const LANES: [f64; 4] = [-5.0, -1.4, 2.4, 6.2];

impl Script {
    fn new(cfg: &SynthConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        use PlayerClass::*;
        let layout: [(PlayerClass, usize, f64); 9] = [
            (Team1, 0, -8.0),
            (Team2, 0, 2.0),
            (Team2, 1, -4.0),
            (Team1, 1, 6.0),
            (Referee, 2, -9.0),
            (Team1, 2, 1.0),
            (Team2, 3, -6.0),
            (Team1, 3, 3.0),
            (Team2, 2, 8.5),
        ];
        let runners = layout
            .iter()
            .map(|&(class, lane, x)| Runner { class, lane, offset_x: x + rng.gen_range(-0.8..0.8) })
            .collect();
        let lane_phase = (0..LANES.len()).map(|_| rng.gen_range(0.0..TAU)).collect();
        Self { duration_s: cfg.duration_s, runners, lane_phase }
    }

    /// Segment `k` carries an action only when its whole scene fits.
    fn has_scene(&self, k: usize) -> bool {
        k as f64 * SEGMENT_S + ACTION_AT_S + SCENE_HALF_S <= self.duration_s
    }

    fn annotations(&self) -> Vec<Annotation> {
        (0..)
            .take_while(|&k| self.has_scene(k))
            .map(|k| Annotation {
                time_s: k as f64 * SEGMENT_S + ACTION_AT_S,
                action: ROTATION[k % 4],
                visibility: if k % 8 == 6 { Visibility::Unshown } else { Visibility::Visible },
            })
            .collect()
    }

    fn scene(&self, t: f64) -> Scene {
        let k = (t / SEGMENT_S).floor() as usize;
        let u = t - (k as f64 * SEGMENT_S + ACTION_AT_S);
        if u.abs() <= SCENE_HALF_S && self.has_scene(k) {
            let mut s = action_scene(ROTATION[k % 4], u);
            s.id = 2 * k as u64 + 1;
            return s;
        }
        // Background runs from the end of the previous scene (or the start).
        let (start, id) = if u > SCENE_HALF_S {
            (k as f64 * SEGMENT_S + ACTION_AT_S + SCENE_HALF_S, 2 * k as u64 + 2)
        } else if k == 0 {
            (0.0, 0)
        } else {
            ((k - 1) as f64 * SEGMENT_S + ACTION_AT_S + SCENE_HALF_S, 2 * k as u64)
        };
        let cx = -16.0 + PAN_SPEED * (t - start);
        let people = self
            .runners
            .iter()
            .map(|r| {
                // Lanes sway in x independently but in y together, so they never touch.
                let sway = 3.0 * (TAU * t / 8.0 + self.lane_phase[r.lane]).sin();
                (r.class, (0.5 * cx + r.offset_x + sway, LANES[r.lane] + 0.6 * (TAU * t / 11.0).sin()))
            })
            .collect();
        Scene { id, camera: (cx, 0.0), people }
    }
}

/// The scripted people of an action scene at offset `u` from its annotation.
fn action_scene(action: Action, u: f64) -> Scene {
    use PlayerClass::*;
    let before = u.min(0.0);
    let after = u.max(0.0);
    let mut people = Vec::new();
    let camera;
    match action {
        Action::Goal => {
            camera = (-34.5, 0.0);
            people.push((GoalkeeperB, (-51.5, 0.4 * (TAU * u / 6.0).sin())));
            for (i, &(x0, y0)) in [(-44.0, -3.0), (-42.0, 4.0), (-37.5, -1.0), (-38.5, 8.0)].iter().enumerate() {
                // Attack toward the goal, then run back together to celebrate.
                let x = x0 - 2.5 * before + 2.5 * after;
                let y = y0 * (1.0 - 0.1 * after) + 0.2 * i as f64;
                people.push((Team1, (x, y)));
            }
            for &(x, y) in &[(-46.5, -1.5), (-47.0, 7.5), (-34.0, 3.0)] {
                people.push((Team2, (x + 0.2 * (TAU * u / 5.0).sin(), y)));
            }
            people.push((Referee, (-29.0 + 0.5 * u, 5.0)));
        }
        Action::Corner => {
            camera = (34.5, 7.0);
            people.push((GoalkeeperA, (51.5, 1.0 + 0.3 * (TAU * u / 6.0).sin())));
            // The taker walks to the flag and stays there.
            people.push((Team1, (51.0 + 0.4 * before, 15.5 + 0.2 * before)));
            let box_players = [(Team1, 44.0, 3.5), (Team2, 45.5, 7.5), (Team1, 42.0, 11.0), (Team2, 40.0, 4.5), (Team1, 38.0, 8.0), (Team2, 46.5, 13.5)];
            for (i, &(class, x0, y0)) in box_players.iter().enumerate() {
                let jostle = 0.5 * (TAU * u / 3.0 + i as f64).sin() * (u < 0.0) as u8 as f64;
                people.push((class, (x0 + jostle + 1.2 * after, y0 - 0.3 * after)));
            }
            people.push((Referee, (33.0, 12.0)));
        }
        Action::Foul => {
            camera = (0.0, 0.0);
            let formation = [(Team1, -10.0, -4.5), (Team2, -6.0, -0.5), (Team1, -2.0, 3.5), (Team2, 2.0, 7.5), (Team1, 5.0, -4.5), (Team2, 9.0, -0.5), (Team1, 12.0, 3.5), (Team2, 15.0, 7.5)];
            for &(class, x0, y0) in &formation {
                // Everybody runs with play, then stops dead at the whistle.
                people.push((class, (x0 + 1.5 * before, y0)));
            }
            people.push((Referee, (-13.0 + 1.5 * before + 3.0 * after.min(3.0), 1.5)));
        }
        _ => {
            camera = (10.0, -28.0);
            // The thrower steps to the line; at the throw everybody moves away from it.
            people.push((Team1, (6.0 + 4.0 * (1.0 + before / SCENE_HALF_S), -30.0 - 3.8 * (1.0 + before / SCENE_HALF_S) + 0.5 * after)));
            let others = [(Team2, 4.0, -29.0), (Team1, 14.0, -29.5), (Team2, 0.0, -25.0), (Team1, 8.0, -24.5), (Team2, 17.0, -25.0), (Team1, 3.0, -22.5), (Team2, 12.0, -23.0)];
            for &(class, x, y0) in &others {
                people.push((class, (x, y0 - 0.15 * before + 0.6 * after)));
            }
            people.push((Referee, (20.0, -22.0 + 0.2 * u)));
        }
    }
    Scene { id: 0, camera, people }
}

fn homography(camera: (f64, f64)) -> Homography {
    let (cx, cy) = camera;
    Homography::from_rows([
        [SCALE, 0.0, cx - WIDTH as f64 / 2.0 * SCALE],
        [0.0, SCALE, cy - HEIGHT as f64 / 2.0 * SCALE],
        [0.0, 0.0, 1.0],
    ])
}

fn to_pixel(camera: (f64, f64), p: (f64, f64)) -> (f64, f64) {
    ((p.0 - camera.0) / SCALE + WIDTH as f64 / 2.0, (p.1 - camera.1) / SCALE + HEIGHT as f64 / 2.0)
}

fn field_color(camera: (f64, f64), x: usize, y: usize) -> [u8; 3] {
    let px = camera.0 + (x as f64 + 0.5 - WIDTH as f64 / 2.0) * SCALE;
    let py = camera.1 + (y as f64 + 0.5 - HEIGHT as f64 / 2.0) * SCALE;
    if px.abs() > 52.5 || py.abs() > 34.0 {
        return STANDS;
    }
    if (px / 5.0).floor().rem_euclid(2.0) == 0.0 {
        FIELD_A
    } else {
        FIELD_B
    }
}

fn board_color(x: usize, y: usize) -> [u8; 3] {
    if y == 0 || y == BOARD.1 - 1 || (2..8).contains(&y) && (x / 3 + y / 2) % 3 == 0 {
        [235, 235, 235]
    } else {
        [25, 25, 30]
    }
}

/// Pixel rectangle `(x0, y0)` of a person standing at pitch point `p`, if the
/// whole box is in frame.
fn person_rect(camera: (f64, f64), p: (f64, f64)) -> Option<(usize, usize)> {
    let (fx, fy) = to_pixel(camera, p);
    let x0 = fx.round() as i64 - (PERSON_W as i64) / 2;
    let y1 = fy.round() as i64;
    let y0 = y1 - PERSON_H as i64;
    let inside = x0 >= 0 && y0 >= 0 && x0 + PERSON_W as i64 <= WIDTH as i64 && y1 <= HEIGHT as i64;
    inside.then_some((x0 as usize, y0 as usize))
}

fn person_mask_bit(lx: usize, ly: usize) -> bool {
    let corner_x = lx == 0 || lx == PERSON_W - 1;
    let corner_y = ly == 0 || ly == PERSON_H - 1;
    !(corner_x && corner_y)
}

fn overlaps(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 < b.0 + PERSON_W && b.0 < a.0 + PERSON_W && a.1 < b.1 + PERSON_H && b.1 < a.1 + PERSON_H
}

struct Placed {
    class: PlayerClass,
    rect: (usize, usize),
    /// Index into the scene's people.
    index: usize,
}

/// People that are fully in frame, clear of the scoreboard and of everybody
/// placed before them.
fn place(scene: &Scene) -> Vec<Placed> {
    let mut out: Vec<Placed> = Vec::new();
    for (index, &(class, p)) in scene.people.iter().enumerate() {
        let Some(rect) = person_rect(scene.camera, p) else { continue };
        let on_board = rect.0 < BOARD.0 && rect.1 < BOARD.1;
        if on_board || out.iter().any(|o| overlaps(o.rect, rect)) {
            continue;
        }
        out.push(Placed { class, rect, index });
    }
    out
}

fn frame_seed(seed: u64, frame: u32) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ frame as u64
}

fn render(scene: &Scene, placed: &[Placed], seed: u64, frame: u32) -> RgbImage {
    let mut img = RgbImage::filled(WIDTH, HEIGHT, FIELD_A);
    for y in 0..HEIGHT {
        for x in 0..WIDTH {
            let c = if x < BOARD.0 && y < BOARD.1 { board_color(x, y) } else { field_color(scene.camera, x, y) };
            img.set(x, y, c);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(seed, frame));
    for p in placed {
        let base = jersey(p.class);
        for ly in 0..PERSON_H {
            for lx in 0..PERSON_W {
                if person_mask_bit(lx, ly) {
                    let c = base.map(|v| (v as i32 + rng.gen_range(-10..=10)).clamp(0, 255) as u8);
                    img.set(p.rect.0 + lx, p.rect.1 + ly, c);
                }
            }
        }
    }
    img
}

/// Flow from this frame to the next: the field moves against the camera, each
/// person by their own displacement minus the camera's; nothing moves across
/// a cut.
fn flow_field(scene: &Scene, next: &Scene, placed: &[Placed]) -> FlowField {
    let same = scene.id == next.id;
    let cam = if same { ((next.camera.0 - scene.camera.0) / SCALE, (next.camera.1 - scene.camera.1) / SCALE) } else { (0.0, 0.0) };
    let mut values = vec![[-cam.0 as f32, -cam.1 as f32]; WIDTH * HEIGHT];
    for y in 0..BOARD.1 {
        for x in 0..BOARD.0 {
            values[y * WIDTH + x] = [0.0, 0.0];
        }
    }
    for p in placed {
        let uv = if same {
            let (a, b) = (scene.people[p.index].1, next.people[p.index].1);
            ((b.0 - a.0) / SCALE - cam.0, (b.1 - a.1) / SCALE - cam.1)
        } else {
            (0.0, 0.0)
        };
        for ly in 0..PERSON_H {
            for lx in 0..PERSON_W {
                if person_mask_bit(lx, ly) {
                    values[(p.rect.1 + ly) * WIDTH + p.rect.0 + lx] = [uv.0 as f32, uv.1 as f32];
                }
            }
        }
    }
    FlowField::new(WIDTH as u32, HEIGHT as u32, values).expect("flow matches the frame size")
}

/// Frames with a deliberately poor calibration, to exercise the frame filter.
fn poor_calibration(t: f64) -> bool {
    let tau = t.rem_euclid(SEGMENT_S);
    (5.0..6.0).contains(&tau)
}

/// The pipeline configuration that goes with a generated match.
pub fn pipeline_config(cfg: &SynthConfig) -> PipelineConfig {
    let mut c = PipelineConfig {
        seed: cfg.seed,
        paths: Paths {
            records: "records.jsonl".into(),
            frames_dir: "frames".into(),
            flows_dir: "flows".into(),
            annotations: "annotations.csv".into(),
            labels: Some("labels.csv".into()),
            features: Vec::new(),
            cache_dir: "cache".into(),
        },
        pitch: Default::default(),
        filter: Default::default(),
        colorfeat: Default::default(),
        teamcluster: Default::default(),
        classifier: Default::default(),
        motion: Default::default(),
        graph: Default::default(),
        windows: WindowConfig { stride_s: 0.5, train_stride_s: 1.0 },
        model: Default::default(),
        train: Default::default(),
        split: SplitConfig { test_from_s: Some(cfg.test_from_s()) },
        spotting: Default::default(),
    };
    // Synthetic people are 60 px patches.
    c.filter.min_area_px = 30.0;
    c.model.hidden = 16;
    c.model.blocks = 2;
    c.model.k_dyn = 4;
    c.model.vlad_clusters = 8;
    c.train.adam.lr = 3e-3;
    c.train.batch_size = 32;
    c.train.max_epochs = 40;
    c.train.patience = 4;
    c
}

/// Writes records, frames, flows, annotations, player labels and a pipeline
/// config into `out`.
pub fn synth_match(out: &Path, cfg: &SynthConfig) -> Result<SynthSummary> {
    let script = Script::new(cfg);
    let n = ((cfg.duration_s / FRAME_STEP_S).floor() as u32).max(1);
    let frames_dir = out.join("frames");
    let flows_dir = out.join("flows");
    let mut recs = Vec::with_capacity(n as usize);
    let mut labels: BTreeMap<SampleId, PlayerClass> = BTreeMap::new();
    let mut detections = 0;
    for i in 0..n {
        let t = i as f64 * FRAME_STEP_S;
        let scene = script.scene(t);
        let next = script.scene(t + FRAME_STEP_S);
        let placed = place(&scene);
        frames::write_frame(&frames::frame_path(&frames_dir, i), &render(&scene, &placed, cfg.seed, i))?;
        flow::write_flow_field(&frames::flow_path(&flows_dir, i), &flow_field(&scene, &next, &placed))?;
        let mut dets = Vec::with_capacity(placed.len());
        for (id, p) in placed.iter().enumerate() {
            let bits: Vec<bool> = (0..PERSON_H).flat_map(|ly| (0..PERSON_W).map(move |lx| person_mask_bit(lx, ly))).collect();
            let (x0, y0) = (p.rect.0 as f64, p.rect.1 as f64);
            dets.push(Detection {
                id: id as u32,
                bbox: BBox::new(x0, y0, x0 + PERSON_W as f64, y0 + PERSON_H as f64),
                score: 0.95,
                mask: RleMask::encode(&bits),
            });
            labels.insert(SampleId::new(i, id as u32), p.class);
        }
        detections += dets.len();
        recs.push(FrameRecord {
            frame_index: i,
            timestamp_s: t,
            detections: dets,
            homography: homography(scene.camera),
            calib_confidence: if poor_calibration(t) { 0.5 } else { 0.95 },
            frame_size: (WIDTH as u32, HEIGHT as u32),
        });
    }
    records::write_frame_records(&out.join("records.jsonl"), &recs)?;
    let annotations = script.annotations();
    tables::write_annotations(&out.join("annotations.csv"), &annotations)?;
    tables::write_labels(&out.join("labels.csv"), &labels)?;
    let config_path = out.join("pitchgraph.toml");
    fsutil::write_atomic(&config_path, pipeline_config(cfg).to_toml().as_bytes())?;
    Ok(SynthSummary { frames: n as usize, detections, annotations, config_path })
}
