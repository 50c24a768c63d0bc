//! Confusion matrices and the five-metric evaluation protocol: accuracy,
//! support-weighted precision/recall/F1 and Cohen's kappa, plus per-class
//! values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{fmt3, fmt_full, Table};

/// Entry `(i, j)` counts items of true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
    class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>, class_names: Vec<String>) -> Result<Self> {
        let k = class_names.len();
        if k == 0 {
            return Err(Error::Empty("confusion matrix needs at least one class".into()));
        }
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: counts.len(),
            });
        }
        Ok(Self {
            counts,
            class_names,
        })
    }

    pub fn k(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    /// Merge classes: `mapping[c]` is the new index of class `c`.
    pub fn collapse(&self, mapping: &[usize], new_names: Vec<String>) -> Result<Self> {
        if mapping.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                got: mapping.len(),
            });
        }
        let k = new_names.len();
        if mapping.iter().any(|&m| m >= k) {
            return Err(Error::InvalidArgument("class mapping out of range".into()));
        }
        let mut counts = vec![vec![0; k]; k];
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                counts[mapping[i]][mapping[j]] += c;
            }
        }
        Self::from_counts(counts, new_names)
    }

    /// CSV with a header row and a leading column of class names
    /// (rows = true class, columns = predicted class).
    pub fn to_csv(&self) -> String {
        let mut t = Table::new(
            std::iter::once("true\\predicted".to_string()).chain(self.class_names.iter().cloned()),
        );
        for (name, row) in self.class_names.iter().zip(&self.counts) {
            t.push(std::iter::once(name.clone()).chain(row.iter().map(u64::to_string)));
        }
        t.to_csv()
    }
}

/// Count `(truth, predicted)` pairs.
pub fn confusion(truth: &[usize], predicted: &[usize], class_names: &[String]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("no labels to compare".into()));
    }
    let k = class_names.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= k || p >= k {
            return Err(Error::InvalidArgument(format!(
                "label {} out of range for {k} classes",
                t.max(p)
            )));
        }
        counts[t][p] += 1;
    }
    ConfusionMatrix::from_counts(counts, class_names.to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    /// Support-weighted precision.
    pub precision: f64,
    /// Support-weighted recall; always identical to `accuracy`.
    pub recall: f64,
    /// Support-weighted F1.
    pub weighted_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub kappa: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn report(cm: &ConfusionMatrix) -> Result<ClassificationReport> {
    let n = cm.total();
    if n == 0 {
        return Err(Error::Empty("confusion matrix has no items".into()));
    }
    let k = cm.k();
    let nf = n as f64;

    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.get(c, c);
            let precision = ratio(tp, cm.col_sum(c));
            let recall = ratio(tp, cm.row_sum(c));
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support: cm.row_sum(c),
            }
        })
        .collect();

    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|m| m.support as f64 * f(m))
            .sum::<f64>()
            / nf
    };
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;

    let accuracy = cm.trace() as f64 / nf;
    // sum_c (support_c / n) * (tp_c / support_c) reduces to trace / n
    let recall = accuracy;

    let p_e: f64 = (0..k)
        .map(|c| (cm.row_sum(c) as f64 / nf) * (cm.col_sum(c) as f64 / nf))
        .sum();
    let kappa = if p_e >= 1.0 {
        1.0
    } else {
        (accuracy - p_e) / (1.0 - p_e)
    };

    Ok(ClassificationReport {
        accuracy,
        precision: weighted(|m| m.precision),
        recall,
        weighted_f1: weighted(|m| m.f1),
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        kappa,
        per_class,
        confusion: cm.clone(),
    })
}

/// Model-comparison layout: Precision, Recall, Accuracy, Weighted F1,
/// Cohen's Kappa, three decimals.
pub fn comparison_table(rows: &[(String, &ClassificationReport)]) -> Table {
    let mut t = Table::new(["Model", "Precision", "Recall", "Accuracy", "Weighted F1", "Cohen's Kappa"]);
    for (name, r) in rows {
        t.push([
            name.clone(),
            fmt3(r.precision),
            fmt3(r.recall),
            fmt3(r.accuracy),
            fmt3(r.weighted_f1),
            fmt3(r.kappa),
        ]);
    }
    t
}

/// Machine-readable metrics, one column per metric at full precision.
pub fn metrics_csv(rows: &[(String, &ClassificationReport)]) -> String {
    let mut t = Table::new(["model", "precision", "recall", "accuracy", "weighted_f1", "kappa"]);
    for (name, r) in rows {
        t.push([
            name.clone(),
            fmt_full(r.precision),
            fmt_full(r.recall),
            fmt_full(r.accuracy),
            fmt_full(r.weighted_f1),
            fmt_full(r.kappa),
        ]);
    }
    t.to_csv()
}

/// Rows = models, columns = `<title> 1 .. <title> K` per-class F1.
pub fn per_class_f1_table(
    reports: &[(String, &ClassificationReport)],
    title: &str,
) -> Result<Table> {
    let Some((_, first)) = reports.first() else {
        return Ok(Table::new(["Model"]));
    };
    let names = first.confusion.class_names();
    for (model, r) in reports {
        if r.confusion.class_names() != names {
            return Err(Error::Incompatible(format!(
                "report for `{model}` has different class names"
            )));
        }
    }
    let mut t = Table::new(
        std::iter::once("Model".to_string()).chain((1..=names.len()).map(|i| format!("{title} {i}"))),
    );
    for (model, r) in reports {
        t.push(std::iter::once(model.clone()).chain(r.per_class.iter().map(|m| fmt3(m.f1))));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    fn cm(rows: Vec<Vec<u64>>) -> ConfusionMatrix {
        let k = rows.len();
        ConfusionMatrix::from_counts(rows, names(k)).unwrap()
    }

    #[test]
    fn confusion_examples() {
        let m = confusion(&[0, 1], &[0, 1], &names(2)).unwrap();
        assert_eq!(m.counts(), &[vec![1, 0], vec![0, 1]]);
        let m = confusion(&[0, 0, 1, 1], &[0, 1, 0, 1], &names(2)).unwrap();
        assert_eq!(m.counts(), &[vec![1, 1], vec![1, 1]]);
        assert!(confusion(&[], &[], &names(2)).is_err());
        assert!(confusion(&[0], &[0, 1], &names(2)).is_err());
        assert!(confusion(&[0], &[2], &names(2)).is_err());
    }

    #[test]
    fn perfect_report() {
        let r = report(&cm(vec![vec![50, 0], vec![0, 50]])).unwrap();
        assert_eq!((r.accuracy, r.weighted_f1, r.kappa), (1.0, 1.0, 1.0));
    }

    #[test]
    fn kappa_hand_example() {
        let r = report(&cm(vec![vec![45, 5], vec![10, 40]])).unwrap();
        assert!((r.accuracy - 0.85).abs() < 1e-15);
        assert!((r.kappa - 0.70).abs() < 1e-12);
        let r = report(&cm(vec![vec![25, 25], vec![25, 25]])).unwrap();
        assert!(r.kappa.abs() < 1e-12);
    }

    #[test]
    fn degenerate_single_class_kappa_is_one() {
        let r = report(&cm(vec![vec![7, 0], vec![0, 0]])).unwrap();
        assert_eq!(r.kappa, 1.0);
        // empty class contributes zeros
        assert_eq!(r.per_class[1].f1, 0.0);
    }

    #[test]
    fn per_class_hand_example() {
        let r = report(&cm(vec![vec![2, 0], vec![1, 1]])).unwrap();
        assert!((r.per_class[0].f1 - 0.8).abs() < 1e-12);
        assert!((r.per_class[1].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.weighted_f1 - 0.733_333_333_333_333_3).abs() < 1e-12);
        assert_eq!(r.accuracy, 0.75);
        assert_eq!(r.recall, r.accuracy);
    }

    #[test]
    fn per_class_table_layout() {
        let perfect = report(&cm((0..10).map(|i| {
            let mut row = vec![0; 10];
            row[i] = 3;
            row
        }).collect())).unwrap();
        let mut rows: Vec<Vec<u64>> = perfect.confusion.counts().to_vec();
        rows[3] = vec![0, 0, 0, 0, 0, 0, 0, 3, 0, 0];
        let broken = report(&cm(rows)).unwrap();
        let t = per_class_f1_table(
            &[("A".into(), &perfect), ("B".into(), &broken)],
            "Skill",
        )
        .unwrap();
        assert_eq!(t.header.len(), 11);
        assert_eq!(t.header[4], "Skill 4");
        assert!(t.rows[0][1..].iter().all(|v| v == "1.000"));
        assert_eq!(t.rows[1][4], "0.000");
        let other = report(&ConfusionMatrix::from_counts(vec![vec![1]], vec!["x".into()]).unwrap()).unwrap();
        assert!(per_class_f1_table(&[("A".into(), &perfect), ("C".into(), &other)], "Skill").is_err());
    }

    #[test]
    fn collapse_merges_classes() {
        let m = cm(vec![vec![3, 1, 0], vec![2, 4, 1], vec![0, 0, 5]]);
        let c = m.collapse(&[0, 0, 1], vec!["x".into(), "y".into()]).unwrap();
        assert_eq!(c.counts(), &[vec![10, 1], vec![0, 5]]);
        assert_eq!(c.total(), m.total());
    }

    #[test]
    fn confusion_csv_has_name_headers() {
        let m = cm(vec![vec![1, 2], vec![3, 4]]);
        assert_eq!(m.to_csv(), "true\\predicted,c0,c1\nc0,1,2\nc1,3,4\n");
    }
}
