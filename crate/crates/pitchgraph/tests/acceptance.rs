//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed. Built with `harness = false` so the lines are
//! never captured.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use pitchgraph::config::PipelineConfig;
use pitchgraph::core::actions::{Action, Annotation, Visibility};
use pitchgraph::core::cluster::DiagGmm;
use pitchgraph::core::colorfeat::{self, Histogram64, HIST_BINS};
use pitchgraph::core::geometry::PitchPoint;
use pitchgraph::core::gnn::{forward_logits, loss_and_grad, separable_windows, train, Dataset, ModelConfig, ModelParams, TrainConfig, WindowSample};
use pitchgraph::core::graph::{build_edges, build_node, GraphConfig, PlayerGraph, WINDOW_SLOTS};
use pitchgraph::core::image::BinaryMask;
use pitchgraph::core::ingest::FlowField;
use pitchgraph::core::motion::{dominant_flow, MotionVector};
use pitchgraph::core::optim::AdamConfig;
use pitchgraph::core::spotting::{average_map, average_precision, default_tolerances, EvalReport, Spot};
use pitchgraph::core::teamcluster::{select_triplet, PlayerClass, Prototype, SampleId};
use pitchgraph::formats::tables;
use pitchgraph::fsutil;
use pitchgraph::pipeline::{run_stage, Stage, TeamsArtifact};
use pitchgraph::synth::{synth_match, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn synth_config(dir: &Path, duration_s: f64) -> PipelineConfig {
    let summary = synth_match(dir, &SynthConfig { duration_s, ..Default::default() }).expect("synthetic match");
    PipelineConfig::load(&summary.config_path).expect("generated config loads")
}

fn c1_clustering() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_config(dir.path(), 180.0);
    let start = Instant::now();
    run_stage(Stage::Ingest, &cfg).map_err(|e| e.to_string())?;
    run_stage(Stage::Teams, &cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let teams: TeamsArtifact = fsutil::read_json(&Stage::Teams.artifact(&cfg.paths.cache_dir)).map_err(|e| e.to_string())?;
    let labels = tables::load_labels(cfg.paths.labels.as_ref().unwrap()).map_err(|e| e.to_string())?;
    let clusters: BTreeMap<PlayerClass, Vec<SampleId>> =
        PlayerClass::ALL.iter().map(|&c| (c, teams.clusters.get(c).iter().map(|s| s.id).collect())).collect();
    let mut worst: f64 = 100.0;
    let mut patches = 0;
    for (class, ids) in &clusters {
        if ids.is_empty() {
            return Err(format!("class {} is empty", class.name()));
        }
        let hits = ids.iter().filter(|id| labels.get(id) == Some(class)).count();
        worst = worst.min(100.0 * hits as f64 / ids.len() as f64);
        patches += ids.len();
    }
    let acc = teams.report.validation_accuracy.unwrap_or(0.0);
    check(
        worst == 100.0 && acc >= 99.0 && elapsed < Duration::from_secs(60),
        format!("{patches} patches, min per-class purity {worst:.2}%, validation accuracy {acc:.2}%, {:.1} s (need 100%, >= 99%, < 60 s)", elapsed.as_secs_f64()),
    )
}

fn random_histogram(rng: &mut ChaCha8Rng) -> Histogram64 {
    loop {
        let sparsity = rng.gen_range(0.0..0.9);
        let counts: [f64; HIST_BINS] = std::array::from_fn(|_| if rng.gen_bool(sparsity) { 0.0 } else { rng.gen_range(0.0..100.0f64).floor() });
        if let Some(h) = Histogram64::from_counts(&counts, 1) {
            return h;
        }
    }
}

fn c2_triplet() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for set in 0..100 {
        let n = 4 + set % 5;
        let protos: Vec<Prototype> = (0..n)
            .map(|_| {
                let centroid = random_histogram(&mut rng);
                let gmm = DiagGmm { dim: HIST_BINS, weights: vec![1.0], means: vec![centroid.bins().to_vec()], variances: vec![vec![1e-3; HIST_BINS]] };
                Prototype { members: Vec::new(), centroid, gmm }
            })
            .collect();
        // Squared area from the side lengths, 16 A² = 4a²b² − (a² + b² − c²)².
        let d = |i: usize, j: usize| colorfeat::bhattacharyya(&protos[i].centroid, &protos[j].centroid).unwrap();
        let mut best = (f64::NEG_INFINITY, [0; 3]);
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let (a, b, c) = (d(i, j), d(i, k), d(j, k));
                    let area2 = 4.0 * a * a * b * b - (a * a + b * b - c * c).powi(2);
                    if area2 > best.0 {
                        best = (area2, [i, j, k]);
                    }
                }
            }
        }
        let got = select_triplet(&protos).map_err(|e| e.to_string())?;
        if got != best.1 {
            return Err(format!("set {set} (n={n}): got {got:?}, enumeration says {:?}", best.1));
        }
    }
    Ok("100/100 sets, n in 4..=8, identical index sets".into())
}

fn c3_bhattacharyya() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..1000 {
        let (p, q) = if i % 10 == 0 {
            (Histogram64::one_hot(rng.gen_range(0..HIST_BINS)), Histogram64::one_hot(rng.gen_range(0..HIST_BINS)))
        } else {
            (random_histogram(&mut rng), random_histogram(&mut rng))
        };
        let pq = colorfeat::bhattacharyya(&p, &q).map_err(|e| e.to_string())?;
        let qp = colorfeat::bhattacharyya(&q, &p).map_err(|e| e.to_string())?;
        let pp = colorfeat::bhattacharyya(&p, &p).map_err(|e| e.to_string())?;
        if pq.to_bits() != qp.to_bits() || pp != 0.0 || !(0.0..=1.0).contains(&pq) {
            return Err(format!("pair {i}: d(p,q)={pq:e}, d(q,p)={qp:e}, d(p,p)={pp:e}"));
        }
    }
    Ok("1000 pairs: symmetric bit-for-bit, d(h,h) = 0, range [0,1]".into())
}

fn c4_dominant_flow() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (w, h) = (rng.gen_range(1..40u32), rng.gen_range(1..40u32));
        let (u, v) = loop {
            let (u, v) = (rng.gen_range(-8.0..8.0f32), rng.gen_range(-8.0..8.0f32));
            if u.hypot(v) > 0.05 {
                break (u, v);
            }
        };
        let n = (w * h) as usize;
        let field = FlowField::new(w, h, vec![[u, v]; n]).unwrap();
        let negated = FlowField::new(w, h, vec![[-u, -v]; n]).unwrap();
        let mut bits: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
        bits[rng.gen_range(0..n)] = true;
        let mask = BinaryMask::new(w as usize, h as usize, bits).unwrap();
        let m = dominant_flow(&field, &mask).map_err(|e| e.to_string())?;
        let neg = dominant_flow(&negated, &mask).map_err(|e| e.to_string())?;
        let err = (m.u - u as f64).abs().max((m.v - v as f64).abs());
        worst = worst.max(err);
        if err > 1e-9 || m.magnitude != neg.magnitude {
            return Err(format!("field {i}: planted ({u}, {v}), got ({}, {}), |neg| {} vs {}", m.u, m.v, neg.magnitude, m.magnitude));
        }
    }
    Ok(format!("100 fields, max error {worst:.1e} (need <= 1e-9), negated magnitudes equal"))
}

fn small_model() -> ModelConfig {
    ModelConfig { hidden: 8, blocks: 2, k_dyn: 3, vlad_clusters: 4, ..Default::default() }
}

fn c5_gradient() -> Outcome {
    let start = Instant::now();
    let ds = separable_windows(3, 3, 5);
    let params = ModelParams::init(small_model(), 11).unwrap();
    let idx = [0, 1, 2];
    let (_, grads) = loss_and_grad(&params, &ds, &idx).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for probe in 0..200 {
        let t = rng.gen_range(0..grads.len());
        let j = rng.gen_range(0..grads[t].data.len());
        let mut plus = params.clone();
        plus.tensors[t].data[j] += h;
        let mut minus = params.clone();
        minus.tensors[t].data[j] -= h;
        let lp = loss_and_grad(&plus, &ds, &idx).map_err(|e| e.to_string())?.0;
        let lm = loss_and_grad(&minus, &ds, &idx).map_err(|e| e.to_string())?.0;
        let fd = (lp - lm) / (2.0 * h);
        let g = grads[t].data[j];
        let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
        worst = worst.max(rel);
        if rel >= 1e-4 {
            return Err(format!("probe {probe}: {}[{j}] analytic {g:e}, numeric {fd:e}, rel {rel:e}", params.names()[t]));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 120.0, format!("200 coordinates, max relative error {worst:.1e} (need < 1e-4, floor 1e-6), {secs:.1} s (need < 120 s)"))
}

fn c6_overfit() -> Outcome {
    let ds = separable_windows(20, 4, 3);
    let cfg = TrainConfig { adam: AdamConfig { lr: 1e-2, ..Default::default() }, max_epochs: 200, target_accuracy: Some(100.0), ..Default::default() };
    let a = train(&ds, small_model(), &cfg, 1).map_err(|e| e.to_string())?;
    let b = train(&ds, small_model(), &cfg, 1).map_err(|e| e.to_string())?;
    let identical = a.0.tensors.iter().zip(&b.0.tensors).all(|(x, y)| x.data.iter().zip(&y.data).all(|(p, q)| p.to_bits() == q.to_bits())) && a.1 == b.1;
    check(
        a.1.train_accuracy >= 95.0 && a.1.epochs <= 200 && identical,
        format!("training accuracy {:.1}% after {} epochs (need >= 95% within 200), runs bit-identical: {identical}", a.1.train_accuracy, a.1.epochs),
    )
}

fn random_frame(rng: &mut ChaCha8Rng, t: f64) -> PlayerGraph {
    let n = rng.gen_range(1..9);
    let nodes = (0..n)
        .map(|_| {
            let mut probs = [0.0; 5];
            probs[rng.gen_range(0..5)] = 1.0;
            let motion = MotionVector::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let pos = PitchPoint::new(rng.gen_range(-20.0..20.0), rng.gen_range(-12.0..12.0));
            build_node(probs, motion, rng.gen_range(0.001..0.02), pos, PitchPoint::new(0.0, 0.0), rng.gen_range(0.5..1.0)).unwrap()
        })
        .collect();
    PlayerGraph::from_nodes(t, nodes, &GraphConfig::default())
}

fn c7_permutation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = ModelParams::init(small_model(), 70).unwrap();
    for w in 0..50 {
        let frames: Vec<PlayerGraph> = (0..6).map(|f| random_frame(&mut rng, f as f64 * 0.5)).collect();
        let shuffled: Vec<PlayerGraph> = frames
            .iter()
            .map(|g| {
                let mut perm: Vec<usize> = (0..g.nodes.len()).collect();
                for i in (1..perm.len()).rev() {
                    perm.swap(i, rng.gen_range(0..=i));
                }
                PlayerGraph::from_nodes(g.timestamp_s, perm.iter().map(|&i| g.nodes[i]).collect(), &GraphConfig::default())
            })
            .collect();
        let slots: Vec<Option<u32>> = (0..WINDOW_SLOTS).map(|k| (k % 5 != 4).then_some((k % 6) as u32)).collect();
        let window = WindowSample { center_time_s: 0.0, slots, label: 0, fusion: Vec::new() };
        let a = forward_logits(&params, &Dataset { frames, windows: vec![window.clone()] }, &[0]).map_err(|e| e.to_string())?;
        let b = forward_logits(&params, &Dataset { frames: shuffled, windows: vec![window] }, &[0]).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("window {w}: logits differ after permuting nodes"));
        }
    }
    Ok("50 windows, logits bit-identical under node permutation".into())
}

/// Reference scorer: sorts each class's predictions, matches each one to the
/// closest free annotation, then integrates the precision envelope directly.
fn oracle_average_map(preds: &[Spot], gt: &[Annotation], tolerances: &[f64]) -> f64 {
    let mut per_tol = Vec::new();
    for &tol in tolerances {
        let mut aps = Vec::new();
        for action in Action::ALL {
            let truth: Vec<f64> = gt.iter().filter(|g| g.action == action).map(|g| g.time_s).collect();
            if truth.is_empty() {
                continue;
            }
            let mut ranked: Vec<(usize, &Spot)> = preds.iter().enumerate().filter(|(_, p)| p.action == action).collect();
            ranked.sort_by(|(i, a), (j, b)| b.confidence.total_cmp(&a.confidence).then(a.time_s.total_cmp(&b.time_s)).then(i.cmp(j)));
            let mut free = vec![true; truth.len()];
            let mut flags = Vec::new();
            for (_, p) in &ranked {
                let mut options: Vec<usize> = (0..truth.len()).filter(|&g| free[g] && (truth[g] - p.time_s).abs() <= tol).collect();
                options.sort_by(|&x, &y| (truth[x] - p.time_s).abs().total_cmp(&(truth[y] - p.time_s).abs()).then(truth[x].total_cmp(&truth[y])));
                if let Some(&g) = options.first() {
                    free[g] = false;
                }
                flags.push(!options.is_empty());
            }
            let precision: Vec<f64> = (0..flags.len()).map(|k| flags[..=k].iter().filter(|&&f| f).count() as f64 / (k + 1) as f64).collect();
            let mut ap = 0.0;
            for k in (0..flags.len()).filter(|&k| flags[k]) {
                ap += precision[k..].iter().cloned().fold(0.0, f64::max);
            }
            aps.push(ap / truth.len() as f64);
        }
        per_tol.push(if aps.is_empty() { 0.0 } else { aps.iter().sum::<f64>() / aps.len() as f64 });
    }
    per_tol.iter().sum::<f64>() / per_tol.len() as f64
}

fn c8_average_map() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let classes = [Action::Goal, Action::Corner, Action::Foul];
    let tolerances = default_tolerances();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let gt: Vec<Annotation> = (0..rng.gen_range(0..=10))
            .map(|_| Annotation { time_s: rng.gen_range(0..300) as f64, action: classes[rng.gen_range(0..3)], visibility: Visibility::Visible })
            .collect();
        let preds: Vec<Spot> = (0..rng.gen_range(0..=20))
            .map(|_| Spot { time_s: rng.gen_range(0..300) as f64, action: classes[rng.gen_range(0..3)], confidence: rng.gen_range(0..10) as f64 / 10.0 })
            .collect();
        let got = average_map(&preds, &gt, &tolerances).map_err(|e| e.to_string())?.average;
        let want = oracle_average_map(&preds, &gt, &tolerances);
        worst = worst.max((got - want).abs());
        if (got - want).abs() >= 1e-12 {
            return Err(format!("instance {i}: {got} vs oracle {want}"));
        }
    }
    let hand = average_precision(&[(0.9, true), (0.8, false), (0.7, true)], 2);
    check(hand == 5.0 / 6.0, format!("100 instances, max |diff| {worst:.1e} (need < 1e-12); [TP,FP,TP] of 2 gives {hand} (need 5/6 exactly)"))
}

fn c9_edges() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut boundary = 0;
    for set in 0..1000 {
        // Quarter-meter grid keeps squared distances exact.
        let mut pts: Vec<PitchPoint> =
            (0..rng.gen_range(0..20)).map(|_| PitchPoint::new(rng.gen_range(-60..60) as f64 / 4.0, rng.gen_range(-40..40) as f64 / 4.0)).collect();
        let anchor = PitchPoint::new(rng.gen_range(-40..40) as f64 / 4.0, rng.gen_range(-20..20) as f64 / 4.0);
        pts.push(anchor);
        pts.push(PitchPoint::new(anchor.x + 3.0, anchor.y + 4.0));
        let got = build_edges(&pts, 5.0);
        let mut want = Vec::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let (dx, dy) = (pts[i].x - pts[j].x, pts[i].y - pts[j].y);
                let d2 = dx * dx + dy * dy;
                boundary += (d2 == 25.0) as usize;
                if d2 <= 25.0 {
                    want.push((i as u32, j as u32));
                }
            }
        }
        if got != want {
            return Err(format!("set {set}: {} edges vs oracle {}", got.len(), want.len()));
        }
    }
    Ok(format!("1000 sets agree exactly, {boundary} pairs at exactly 5 m"))
}

fn c10_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_config(dir.path(), SynthConfig::default().duration_s);
    let start = Instant::now();
    for stage in Stage::ALL {
        run_stage(stage, &cfg).map_err(|e| e.to_string())?;
    }
    let secs = start.elapsed().as_secs_f64();
    let report: EvalReport = fsutil::read_json(&Stage::Eval.artifact(&cfg.paths.cache_dir)).map_err(|e| e.to_string())?;
    check(
        report.all.average >= 0.9 && report.all.n_gt > 0 && secs < 600.0,
        format!("average-mAP {:.3} over {} held-out actions (need >= 0.9), {secs:.1} s (need < 600 s)", report.all.average, report.all.n_gt),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("clustering purity and classifier accuracy", c1_clustering),
        ("triplet selection vs enumeration", c2_triplet),
        ("Bhattacharyya metric axioms", c3_bhattacharyya),
        ("dominant flow recovery", c4_dominant_flow),
        ("gradient check", c5_gradient),
        ("overfit and determinism", c6_overfit),
        ("node permutation invariance", c7_permutation),
        ("average-mAP vs reference matcher", c8_average_map),
        ("edge rule conformance", c9_edges),
        ("end-to-end synthetic match", c10_end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
