//! Sliding-window inference, per-class non-maximum suppression, and the
//! tolerance-windowed mAP used to score spotting.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use crate::actions::Annotation;
use crate::actions::{Action, Visibility, NUM_ACTIONS};
use crate::gnn::{predict_probs, Dataset, ModelParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spot {
    pub time_s: f64,
    pub action: Action,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpottingConfig {
    pub nms_window_s: f64,
    /// Matching tolerances for average-mAP, seconds.
    pub tolerances: Vec<f64>,
}

impl Default for SpottingConfig {
    fn default() -> Self {
        Self { nms_window_s: 20.0, tolerances: default_tolerances() }
    }
}

impl SpottingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nms_window_s >= 0.0) {
            return Err(Error::Validation("nms window must be non-negative".into()));
        }
        if self.tolerances.is_empty() || self.tolerances.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::Validation("tolerances must be a non-empty list of non-negative seconds".into()));
        }
        Ok(())
    }
}

/// 5, 10, …, 60 s.
pub fn default_tolerances() -> Vec<f64> {
    (1..=12).map(|k| 5.0 * k as f64).collect()
}

/// One candidate per window and action, at the window center.
pub fn candidates(centers: &[f64], probs: &[Vec<f64>]) -> Vec<Spot> {
    let mut out = Vec::with_capacity(centers.len() * NUM_ACTIONS);
    for (&t, p) in centers.iter().zip(probs) {
        for a in Action::ALL {
            out.push(Spot { time_s: t, action: a, confidence: p[a.index()] });
        }
    }
    out
}

/// Ranking used everywhere: higher confidence first, then earlier time.
fn outranks(a: &Spot, b: &Spot) -> bool {
    a.confidence > b.confidence || (a.confidence == b.confidence && a.time_s < b.time_s)
}

/// Keeps a candidate iff no higher-ranked candidate of the same action lies
/// within `window_s` of it. Output is ordered by action, then time.
pub fn nms(cands: &[Spot], window_s: f64) -> Vec<Spot> {
    let mut out = Vec::new();
    for a in Action::ALL {
        let mut c: Vec<Spot> = cands.iter().filter(|s| s.action == a).copied().collect();
        c.sort_by(|x, y| x.time_s.total_cmp(&y.time_s));
        for i in 0..c.len() {
            let s = &c[i];
            let left = c[..i].iter().rev().take_while(|o| s.time_s - o.time_s <= window_s);
            let right = c[i + 1..].iter().take_while(|o| o.time_s - s.time_s <= window_s);
            if !left.chain(right).any(|o| outranks(o, s)) {
                out.push(*s);
            }
        }
    }
    out
}

/// Model probabilities for every window, then candidates and NMS.
pub fn infer_spots(params: &ModelParams, ds: &Dataset, nms_window_s: f64) -> Result<Vec<Spot>> {
    let idx: Vec<usize> = (0..ds.len()).collect();
    let mut probs = Vec::with_capacity(ds.len());
    for chunk in idx.chunks(96) {
        probs.extend(predict_probs(params, ds, chunk)?);
    }
    let centers: Vec<f64> = ds.windows.iter().map(|w| w.center_time_s).collect();
    Ok(nms(&candidates(&centers, &probs), nms_window_s))
}

/// Greedy matching: predictions in rank order each take the nearest unused
/// annotation of the same action within `tolerance_s` (earlier one on a tie).
/// Returns one flag per prediction, in input order.
pub fn match_spots(preds: &[Spot], gt: &[Annotation], tolerance_s: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| rank_cmp(&preds[i], &preds[j]).then(i.cmp(&j)));
    let mut used = vec![false; gt.len()];
    let mut tp = vec![false; preds.len()];
    for i in order {
        let p = &preds[i];
        let mut best: Option<(f64, usize)> = None;
        for (g, a) in gt.iter().enumerate() {
            if used[g] || a.action != p.action {
                continue;
            }
            let d = (a.time_s - p.time_s).abs();
            if d <= tolerance_s && best.map_or(true, |(bd, bg)| d < bd || (d == bd && a.time_s < gt[bg].time_s)) {
                best = Some((d, g));
            }
        }
        if let Some((_, g)) = best {
            used[g] = true;
            tp[i] = true;
        }
    }
    tp
}

fn rank_cmp(a: &Spot, b: &Spot) -> core::cmp::Ordering {
    b.confidence.total_cmp(&a.confidence).then(a.time_s.total_cmp(&b.time_s))
}

/// All-point interpolated AP of `(confidence, is_tp)` pairs against `n_gt`
/// ground-truth items. Pairs are ranked by confidence; ties keep input order.
pub fn average_precision(scored: &[(f64, bool)], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&i, &j| scored[j].0.total_cmp(&scored[i].0).then(i.cmp(&j)));
    // (hits, rank) at each position, then the precision envelope from the
    // right, compared without rounding.
    let mut frac: Vec<(u64, u64)> = Vec::with_capacity(order.len());
    let mut is_tp = Vec::with_capacity(order.len());
    let mut hits = 0u64;
    for (k, &i) in order.iter().enumerate() {
        hits += scored[i].1 as u64;
        frac.push((hits, k as u64 + 1));
        is_tp.push(scored[i].1);
    }
    for k in (0..frac.len().saturating_sub(1)).rev() {
        let (a, b) = (frac[k], frac[k + 1]);
        if (b.0 as u128) * (a.1 as u128) > (a.0 as u128) * (b.1 as u128) {
            frac[k] = b;
        }
    }
    let terms: Vec<(u64, u64)> = frac.iter().zip(&is_tp).filter(|(_, t)| **t).map(|(f, _)| *f).collect();
    exact_mean(&terms, n_gt as u64).unwrap_or_else(|| terms.iter().map(|&(h, r)| h as f64 / r as f64).sum::<f64>() / n_gt as f64)
}

/// `Σ h/r / n` as one correctly rounded division when the common-denominator
/// form fits in 53 bits.
fn exact_mean(terms: &[(u64, u64)], n: u64) -> Option<f64> {
    fn gcd(mut a: u128, mut b: u128) -> u128 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }
    let (mut num, mut den) = (0u128, 1u128);
    for &(h, r) in terms {
        let (h, r) = (h as u128, r as u128);
        let l = den / gcd(den, r) * r;
        num = num.checked_mul(l / den)?.checked_add(h.checked_mul(l / r)?)?;
        den = l;
        let g = gcd(num, den);
        (num, den) = (num / g, den / g);
    }
    let den = den.checked_mul(n as u128)?;
    let g = gcd(num, den).max(1);
    let (num, den) = (num / g, den / g);
    const LIMIT: u128 = 1 << 53;
    (num < LIMIT && den < LIMIT).then(|| num as f64 / den as f64)
}

/// Which ground-truth annotations a score is computed against. Predictions
/// are never filtered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    All,
    Visible,
    Unshown,
}

impl Subset {
    pub fn keeps(self, a: &Annotation) -> bool {
        match self {
            Subset::All => true,
            Subset::Visible => a.visibility == Visibility::Visible,
            Subset::Unshown => a.visibility == Visibility::Unshown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub tolerances: Vec<f64>,
    /// `per_class[t][a]`: AP of action `a` at tolerance `t`, `None` when the
    /// action has no annotation.
    pub per_class: Vec<Vec<Option<f64>>>,
    /// Mean over annotated actions, per tolerance.
    pub map: Vec<f64>,
    /// Mean of `map` over tolerances.
    pub average: f64,
    pub n_gt: usize,
}

impl MapReport {
    /// mAP at the given tolerance, if it was evaluated.
    pub fn at(&self, tolerance_s: f64) -> Option<f64> {
        self.tolerances.iter().position(|&t| t == tolerance_s).map(|i| self.map[i])
    }
}

/// mAP at one tolerance and the per-action APs behind it.
pub fn map_at(preds: &[Spot], gt: &[Annotation], tolerance_s: f64) -> (f64, Vec<Option<f64>>) {
    let mut per_class = vec![None; NUM_ACTIONS];
    let mut sum = 0.0;
    let mut counted = 0;
    for a in Action::ALL {
        let p: Vec<Spot> = preds.iter().filter(|s| s.action == a).copied().collect();
        let g: Vec<Annotation> = gt.iter().filter(|x| x.action == a).copied().collect();
        if g.is_empty() {
            continue;
        }
        let flags = match_spots(&p, &g, tolerance_s);
        // Feed the pairs in matching rank so confidence ties are resolved the
        // same way in both places.
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&i, &j| rank_cmp(&p[i], &p[j]).then(i.cmp(&j)));
        let scored: Vec<(f64, bool)> = order.iter().map(|&i| (p[i].confidence, flags[i])).collect();
        let ap = average_precision(&scored, g.len());
        per_class[a.index()] = Some(ap);
        sum += ap;
        counted += 1;
    }
    (if counted == 0 { 0.0 } else { sum / counted as f64 }, per_class)
}

pub fn average_map(preds: &[Spot], gt: &[Annotation], tolerances: &[f64]) -> Result<MapReport> {
    if tolerances.is_empty() {
        return Err(Error::Validation("no tolerances".into()));
    }
    let mut per_class = Vec::with_capacity(tolerances.len());
    let mut map = Vec::with_capacity(tolerances.len());
    for &t in tolerances {
        let (m, pc) = map_at(preds, gt, t);
        map.push(m);
        per_class.push(pc);
    }
    let average = map.iter().sum::<f64>() / map.len() as f64;
    Ok(MapReport { tolerances: tolerances.to_vec(), per_class, map, average, n_gt: gt.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub all: MapReport,
    pub visible: MapReport,
    pub unshown: MapReport,
    /// mAP of the full annotation set at a single 60 s tolerance.
    pub single_map_60: f64,
}

pub fn evaluate(preds: &[Spot], gt: &[Annotation], tolerances: &[f64]) -> Result<EvalReport> {
    let subset = |s: Subset| -> Result<MapReport> {
        let g: Vec<Annotation> = gt.iter().filter(|a| s.keeps(a)).copied().collect();
        average_map(preds, &g, tolerances)
    };
    Ok(EvalReport {
        all: subset(Subset::All)?,
        visible: subset(Subset::Visible)?,
        unshown: subset(Subset::Unshown)?,
        single_map_60: map_at(preds, gt, 60.0).0,
    })
}
