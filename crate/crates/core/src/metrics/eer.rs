use serde::Serialize;

use crate::pooling::PhoneTrial;

use super::confusion::TargetRow;

/// Equal error rate of a two-class score set, with support counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairwiseEer {
    pub eer: f64,
    pub n_target: usize,
    pub n_nontarget: usize,
    /// Set when either side was empty and `eer` is the 0.5 placeholder.
    pub degenerate: bool,
}

/// Equal error rate from the convex hull of the ROC.
///
/// Scores are sorted and tied scores grouped, so every distinct score is one
/// ROC vertex in (false-alarm, miss) space. The EER is the point where the
/// lower convex hull of those vertices crosses the line miss = false-alarm,
/// linearly interpolated on the hull segment that straddles it. Higher scores
/// favour the target class. The result always lies in [0, 0.5]; an empty side
/// yields 0.5.
pub fn eer(target: &[f64], nontarget: &[f64]) -> f64 {
    if target.is_empty() || nontarget.is_empty() {
        return 0.5;
    }
    let nt = target.len() as i128;
    let nn = nontarget.len() as i128;

    let mut scores: Vec<(f64, bool)> = target
        .iter()
        .map(|&s| (s, true))
        .chain(nontarget.iter().map(|&s| (s, false)))
        .collect();
    scores.sort_by(|a, b| a.0.total_cmp(&b.0));

    // (false alarms, misses) as counts, threshold sweeping upwards
    let mut vertices = Vec::with_capacity(scores.len() + 1);
    let (mut fa, mut miss) = (nn, 0i128);
    vertices.push((fa, miss));
    let mut i = 0;
    while i < scores.len() {
        let score = scores[i].0;
        while i < scores.len() && scores[i].0 == score {
            if scores[i].1 {
                miss += 1;
            } else {
                fa -= 1;
            }
            i += 1;
        }
        vertices.push((fa, miss));
    }
    vertices.reverse();

    // Lower hull with exact arithmetic; axis scaling by (nt, nn) keeps convexity.
    let scaled = |&(fa, miss): &(i128, i128)| (fa * nt, miss * nn);
    let mut hull: Vec<(i128, i128)> = Vec::with_capacity(vertices.len());
    for v in &vertices {
        while hull.len() >= 2 {
            let o = scaled(&hull[hull.len() - 2]);
            let a = scaled(&hull[hull.len() - 1]);
            let b = scaled(v);
            let cross = (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
            if cross <= 0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(*v);
    }

    let to_rates = |&(fa, miss): &(i128, i128)| (fa as f64 / nn as f64, miss as f64 / nt as f64);
    for k in 0..hull.len() {
        let (fa, miss) = hull[k];
        // miss/nt - fa/nn, sign only
        let diff = miss * nn - fa * nt;
        if diff == 0 {
            return to_rates(&hull[k]).0;
        }
        if diff < 0 {
            let (x0, y0) = to_rates(&hull[k - 1]);
            let (x1, y1) = to_rates(&hull[k]);
            let d0 = y0 - x0;
            let d1 = y1 - x1;
            let t = d0 / (d0 - d1);
            return x0 + t * (x1 - x0);
        }
    }
    unreachable!("the hull always ends at (1, 0)")
}

/// EER between a target phone (optionally one stress variant) and a single
/// alternative phone, scored by `λ_target - λ_hypothesis`.
///
/// # Panics
///
/// If the target and hypothesis phones are the same.
pub fn pairwise_eer(trials: &[PhoneTrial], target: &TargetRow, hypothesis: usize) -> PairwiseEer {
    assert_ne!(
        target.phone, hypothesis,
        "target and hypothesis phone must differ"
    );
    let score = |t: &PhoneTrial| t.llk.as_slice()[target.phone] - t.llk.as_slice()[hypothesis];
    let tar: Vec<f64> = trials
        .iter()
        .filter(|t| target.matches(t))
        .map(score)
        .collect();
    let non: Vec<f64> = trials
        .iter()
        .filter(|t| t.true_phone == hypothesis)
        .map(score)
        .collect();
    PairwiseEer {
        eer: eer(&tar, &non),
        n_target: tar.len(),
        n_nontarget: non.len(),
        degenerate: tar.is_empty() || non.is_empty(),
    }
}
