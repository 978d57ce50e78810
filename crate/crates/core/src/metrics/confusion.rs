use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::likelihood::PhoneSet;
use crate::pooling::{PhoneTrial, Stress};

use super::eer::pairwise_eer;

/// Which stress variants of the target phone a row covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StressFilter {
    Any,
    /// Only tokens with exactly this tag; `None` selects untagged tokens.
    Only(Option<Stress>),
}

/// Confusion-matrix row: a target phone, optionally split by stress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TargetRow {
    pub phone: usize,
    pub stress: StressFilter,
}

impl TargetRow {
    pub fn new(phone: usize, stress: StressFilter) -> Self {
        Self { phone, stress }
    }

    pub fn matches(&self, trial: &PhoneTrial) -> bool {
        trial.true_phone == self.phone
            && match self.stress {
                StressFilter::Any => true,
                StressFilter::Only(s) => trial.stress == s,
            }
    }

    /// Phone label with the stress digit appended, CMU style (`AH0`).
    pub fn label(&self, phones: &PhoneSet) -> String {
        match self.stress {
            StressFilter::Only(Some(s)) => format!("{}{}", phones.label(self.phone), s),
            _ => phones.label(self.phone).to_string(),
        }
    }
}

/// Phones to analyse, and whether target rows are split by stress.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetFilter {
    pub phones: Vec<usize>,
    pub stress_split: bool,
}

impl TargetFilter {
    pub fn all(phones: &PhoneSet) -> Self {
        Self {
            phones: (0..phones.len()).collect(),
            stress_split: false,
        }
    }
}

/// Pairwise EERs of target rows against hypothesis phones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub targets: Vec<TargetRow>,
    pub hypotheses: Vec<usize>,
    /// `None` on cells where target and hypothesis are the same phone.
    pub eer: Vec<Vec<Option<f64>>>,
    /// `(n_target, n_nontarget)` per cell.
    pub support: Vec<Vec<(usize, usize)>>,
}

type Cell = (Option<f64>, (usize, usize));

/// EER for every (target row, hypothesis phone) pair of the subset.
///
/// Hypothesis columns are never split by stress: the likelihood vector has
/// one entry per base phone.
pub fn confusion_matrix(
    trials: &[PhoneTrial],
    phones: &PhoneSet,
    filter: &TargetFilter,
) -> ConfusionMatrix {
    debug_assert!(filter.phones.iter().all(|&p| p < phones.len()));
    let mut targets = Vec::new();
    for &phone in &filter.phones {
        if filter.stress_split {
            let tags: BTreeSet<Option<Stress>> = trials
                .iter()
                .filter(|t| t.true_phone == phone)
                .map(|t| t.stress)
                .collect();
            if tags.is_empty() {
                targets.push(TargetRow::new(phone, StressFilter::Any));
            }
            targets.extend(
                tags.into_iter()
                    .map(|s| TargetRow::new(phone, StressFilter::Only(s))),
            );
        } else {
            targets.push(TargetRow::new(phone, StressFilter::Any));
        }
    }
    let hypotheses = filter.phones.clone();

    let cells: Vec<Vec<Cell>> = targets
        .par_iter()
        .map(|row| {
            hypotheses
                .iter()
                .map(|&hyp| {
                    if hyp == row.phone {
                        (None, (0, 0))
                    } else {
                        let r = pairwise_eer(trials, row, hyp);
                        (Some(r.eer), (r.n_target, r.n_nontarget))
                    }
                })
                .collect()
        })
        .collect();

    let (eer, support) = cells.into_iter().map(|row| row.into_iter().unzip()).unzip();
    ConfusionMatrix {
        targets,
        hypotheses,
        eer,
        support,
    }
}
