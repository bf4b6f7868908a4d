use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, WindowSample};
use crate::geometry::PitchPoint;
use crate::graph::{build_node, GraphConfig, PlayerGraph, WINDOW_SLOTS};
use crate::motion::MotionVector;

const FRAMES_PER_WINDOW: usize = 6;

/// `n` windows over `classes` labels (action indices `0..classes`) whose
/// frames carry a label-specific pattern: players move in a class-dependent
/// direction and crowd around a class-dependent spot. Small random jitter
/// keeps windows distinct.
pub fn separable_windows(n: usize, classes: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = classes.clamp(1, crate::actions::NUM_CLASSES);
    let mut frames = Vec::new();
    let mut windows = Vec::with_capacity(n);
    for w in 0..n {
        let label = w % classes;
        let angle = core::f64::consts::TAU * label as f64 / classes as f64;
        let (cx, cy) = (20.0 * crate::fmath::cos(angle), 15.0 * crate::fmath::sin(angle));
        let first = frames.len() as u32;
        for f in 0..FRAMES_PER_WINDOW {
            let t = (w * FRAMES_PER_WINDOW + f) as f64 * 0.5;
            let players = rng.gen_range(3..7);
            let nodes = (0..players)
                .map(|p| {
                    let mut probs = [0.0; 5];
                    probs[(p + label) % 5] = 1.0;
                    let speed = 2.0 + rng.gen_range(-0.3..0.3);
                    let motion = MotionVector::new(speed * crate::fmath::cos(angle), speed * crate::fmath::sin(angle));
                    let pos = PitchPoint::new(cx + rng.gen_range(-4.0..4.0), cy + rng.gen_range(-4.0..4.0));
                    build_node(probs, motion, rng.gen_range(0.002..0.01), pos, PitchPoint::new(cx, cy), 1.0).expect("generator nodes are valid")
                })
                .collect();
            frames.push(PlayerGraph::from_nodes(t, nodes, &GraphConfig::default()));
        }
        let slots = (0..WINDOW_SLOTS).map(|k| Some(first + (k % FRAMES_PER_WINDOW) as u32)).collect();
        windows.push(WindowSample { center_time_s: (w * FRAMES_PER_WINDOW) as f64 * 0.5, slots, label, fusion: Vec::new() });
    }
    Dataset { frames, windows }
}
