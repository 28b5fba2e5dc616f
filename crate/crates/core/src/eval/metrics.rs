//! QAC and QAR metrics.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::hash::Hash;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("instance {instance}: accepted entity is neither a correct nor a wrong candidate")]
    Coverage { instance: usize },
}

/// Labels and predictions for one QAC instance.
#[derive(Clone, Debug)]
pub struct QacOutcome<E> {
    pub correct: Vec<E>,
    pub wrong: Vec<E>,
    /// Subset of `correct` that is not entailed by the observable graph.
    pub hard: Vec<E>,
    /// Candidates the solver classified positive.
    pub accepted: Vec<E>,
    pub timeouts: usize,
}

/// One QAR instance after its prediction was verified.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QarOutcome {
    pub arity: usize,
    pub has_trivial: bool,
    pub predicted: bool,
    /// Prediction is a true answer.
    pub correct: bool,
    pub timed_out: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ArityMetrics {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub instances: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub easy_recall: Option<f64>,
    pub hard_recall: Option<f64>,
    pub instances: usize,
    pub predicted: usize,
    pub correct: usize,
    /// Instances (QAR) or candidates (QAC) cut short by the timeout.
    pub timeouts: usize,
    pub per_arity: BTreeMap<usize, ArityMetrics>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p == 0.0 || r == 0.0 {
        0.0
    } else {
        2.0 / (1.0 / p + 1.0 / r)
    }
}

/// Per-instance `2TP / (2TP + FP + FN)`; 1 when there is nothing to find
/// and nothing was accepted.
pub fn qac_instance_f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let den = 2 * tp + fp + fn_;
    if den == 0 {
        1.0
    } else {
        2.0 * tp as f64 / den as f64
    }
}

/// Macro-averaged F1 over instances. Precision and recall are pooled over
/// all candidates; easy/hard recall split correct candidates by `hard`.
pub fn f1_qac<E: Eq + Hash>(outcomes: &[QacOutcome<E>]) -> Result<MetricsReport, MetricsError> {
    let mut report = MetricsReport {
        instances: outcomes.len(),
        ..Default::default()
    };
    let (mut sum_f1, mut tp_all, mut fp_all, mut pos_all) = (0.0, 0, 0, 0);
    let (mut easy, mut easy_hit, mut hard, mut hard_hit) = (0, 0, 0, 0);
    for (i, o) in outcomes.iter().enumerate() {
        let correct: HashSet<&E> = o.correct.iter().collect();
        let wrong: HashSet<&E> = o.wrong.iter().collect();
        let hard_set: HashSet<&E> = o.hard.iter().collect();
        let accepted: HashSet<&E> = o.accepted.iter().collect();
        if accepted.iter().any(|a| !correct.contains(a) && !wrong.contains(a)) {
            return Err(MetricsError::Coverage { instance: i });
        }
        let tp = accepted.iter().filter(|a| correct.contains(*a)).count();
        let fp = accepted.len() - tp;
        let fn_ = correct.len() - tp;
        sum_f1 += qac_instance_f1(tp, fp, fn_);
        tp_all += tp;
        fp_all += fp;
        pos_all += correct.len();
        for c in &correct {
            let hit = accepted.contains(c);
            if hard_set.contains(c) {
                hard += 1;
                hard_hit += hit as usize;
            } else {
                easy += 1;
                easy_hit += hit as usize;
            }
        }
        report.timeouts += o.timeouts;
    }
    report.f1 = if outcomes.is_empty() { 0.0 } else { sum_f1 / outcomes.len() as f64 };
    report.precision = ratio(tp_all, tp_all + fp_all).unwrap_or(0.0);
    report.recall = ratio(tp_all, pos_all).unwrap_or(0.0);
    report.predicted = tp_all + fp_all;
    report.correct = tp_all;
    report.easy_recall = ratio(easy_hit, easy);
    report.hard_recall = ratio(hard_hit, hard);
    report.per_arity.insert(
        1,
        ArityMetrics {
            f1: report.f1,
            precision: report.precision,
            recall: report.recall,
            instances: outcomes.len(),
        },
    );
    Ok(report)
}

fn qar_totals(outcomes: &[&QarOutcome]) -> ArityMetrics {
    let predicted = outcomes.iter().filter(|o| o.predicted).count();
    let correct = outcomes.iter().filter(|o| o.predicted && o.correct).count();
    let precision = ratio(correct, predicted).unwrap_or(0.0);
    let recall = ratio(correct, outcomes.len()).unwrap_or(0.0);
    ArityMetrics {
        f1: harmonic(precision, recall),
        precision,
        recall,
        instances: outcomes.len(),
    }
}

/// `Prec = correct / predicted`, `Rec = correct / instances`, F1 their
/// harmonic mean (0 if either is 0).
pub fn f1_qar(outcomes: &[QarOutcome]) -> MetricsReport {
    let all: Vec<&QarOutcome> = outcomes.iter().collect();
    let t = qar_totals(&all);
    let split = |trivial: bool| {
        let sel: Vec<&&QarOutcome> = all.iter().filter(|o| o.has_trivial == trivial).collect();
        ratio(sel.iter().filter(|o| o.predicted && o.correct).count(), sel.len())
    };
    let mut per_arity = BTreeMap::new();
    let arities: std::collections::BTreeSet<usize> = outcomes.iter().map(|o| o.arity).collect();
    for k in arities {
        let sel: Vec<&QarOutcome> = outcomes.iter().filter(|o| o.arity == k).collect();
        per_arity.insert(k, qar_totals(&sel));
    }
    MetricsReport {
        f1: t.f1,
        precision: t.precision,
        recall: t.recall,
        easy_recall: split(true),
        hard_recall: split(false),
        instances: outcomes.len(),
        predicted: outcomes.iter().filter(|o| o.predicted).count(),
        correct: outcomes.iter().filter(|o| o.predicted && o.correct).count(),
        timeouts: outcomes.iter().filter(|o| o.timed_out).count(),
        per_arity,
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{:.1}", 100.0 * x))
}

impl MetricsReport {
    /// Aligned table: one row per arity plus a total row.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<8} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6}",
            "split", "F1", "prec", "rec", "easy", "hard", "n"
        );
        for (k, m) in &self.per_arity {
            let _ = writeln!(
                s,
                "{:<8} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6}",
                format!("k={k}"),
                pct(Some(m.f1)),
                pct(Some(m.precision)),
                pct(Some(m.recall)),
                "",
                "",
                m.instances
            );
        }
        let _ = writeln!(
            s,
            "{:<8} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6}",
            "total",
            pct(Some(self.f1)),
            pct(Some(self.precision)),
            pct(Some(self.recall)),
            pct(self.easy_recall),
            pct(self.hard_recall),
            self.instances
        );
        if self.timeouts > 0 {
            let _ = writeln!(s, "timeouts: {}", self.timeouts);
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qac(correct: &[u32], wrong: &[u32], accepted: &[u32]) -> QacOutcome<u32> {
        QacOutcome {
            correct: correct.to_vec(),
            wrong: wrong.to_vec(),
            hard: Vec::new(),
            accepted: accepted.to_vec(),
            timeouts: 0,
        }
    }

    #[test]
    fn qac_examples() {
        let perfect = f1_qac(&[qac(&[1, 2], &[3, 4], &[1, 2])]).unwrap();
        assert_eq!(perfect.f1, 1.0);
        let worked = f1_qac(&[qac(&[1, 2, 3, 4, 5], &[6, 7, 8, 9, 10], &[1, 2, 3, 4, 6])]).unwrap();
        assert!((worked.f1 - 0.8).abs() < 1e-12);
        let none = f1_qac(&[qac(&[1], &[2], &[])]).unwrap();
        assert_eq!(none.f1, 0.0);
        assert_eq!(
            f1_qac(&[qac(&[1], &[2], &[7])]).unwrap_err(),
            MetricsError::Coverage { instance: 0 }
        );
    }

    fn qar(predicted: bool, correct: bool, trivial: bool) -> QarOutcome {
        QarOutcome {
            arity: 1,
            has_trivial: trivial,
            predicted,
            correct,
            timed_out: false,
        }
    }

    #[test]
    fn qar_examples() {
        let r = f1_qar(&[qar(true, true, true), qar(true, false, false)]);
        assert_eq!((r.precision, r.recall, r.f1), (0.5, 0.5, 0.5));
        assert_eq!(r.easy_recall, Some(1.0));
        assert_eq!(r.hard_recall, Some(0.0));
        let r = f1_qar(&[qar(false, false, true)]);
        assert_eq!((r.recall, r.f1), (0.0, 0.0));
        assert!(r.to_table().contains("total"));
    }
}
