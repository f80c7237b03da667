//! Accuracy statistics from a confusion matrix: per-class accuracy, OA, AA
//! and Cohen's kappa, plus aggregation over repeated random trials.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::ClassMap;
use crate::data::LabelMap;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("test pixel ({row}, {col}) is unlabeled")]
    UnlabeledTestPixel { row: usize, col: usize },
    #[error("test pixel ({row}, {col}) has prediction {predicted} outside 1..={classes}")]
    BadPrediction {
        row: usize,
        col: usize,
        predicted: u16,
        classes: usize,
    },
    #[error("prediction map {0} does not match the label map {1}")]
    DimensionMismatch(String, String),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("no reports to aggregate")]
    NoReports,
    #[error("reports disagree on class count ({0} vs {1})")]
    InconsistentClassCount(usize, usize),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// `counts[t][p]`: test pixels of true class `t + 1` predicted as `p + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    /// From a row-major `classes × classes` table.
    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Self {
        assert_eq!(counts.len(), classes * classes);
        Self { classes, counts }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// 1-based class indices.
    pub fn add(&mut self, truth: u16, predicted: u16) {
        self.counts[(truth as usize - 1) * self.classes + predicted as usize - 1] += 1;
    }

    /// 1-based class indices.
    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[(truth - 1) * self.classes + predicted - 1]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn row_sum(&self, t: usize) -> u64 {
        self.counts[t * self.classes..(t + 1) * self.classes].iter().sum()
    }

    fn col_sum(&self, p: usize) -> u64 {
        (0..self.classes).map(|t| self.counts[t * self.classes + p]).sum()
    }
}

/// Accumulates predictions over `test_pixels` only.
pub fn confusion(
    pred: &ClassMap,
    truth: &LabelMap,
    test_pixels: &[(usize, usize)],
) -> Result<ConfusionMatrix, MetricsError> {
    if pred.height() != truth.height() || pred.width() != truth.width() {
        return Err(MetricsError::DimensionMismatch(
            format!("{}x{}", pred.height(), pred.width()),
            format!("{}x{}", truth.height(), truth.width()),
        ));
    }
    let classes = truth.class_count() as usize;
    let mut cm = ConfusionMatrix::new(classes);
    for &(row, col) in test_pixels {
        let t = truth.get(row, col);
        if t == 0 {
            return Err(MetricsError::UnlabeledTestPixel { row, col });
        }
        let p = pred.get(row, col);
        if p == 0 || p as usize > classes {
            return Err(MetricsError::BadPrediction {
                row,
                col,
                predicted: p,
                classes,
            });
        }
        cm.add(t, p);
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// `None` for classes without test pixels.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub overall_accuracy: f64,
    pub average_accuracy: f64,
    pub kappa: f64,
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let c = cm.classes;
    let total_f = total as f64;
    let per_class_accuracy: Vec<Option<f64>> = (0..c)
        .map(|t| {
            let row = cm.row_sum(t);
            (row > 0).then(|| cm.counts[t * c + t] as f64 / row as f64)
        })
        .collect();
    let trace: u64 = (0..c).map(|t| cm.counts[t * c + t]).sum();
    let oa = trace as f64 / total_f;
    let present: Vec<f64> = per_class_accuracy.iter().flatten().copied().collect();
    let aa = present.iter().sum::<f64>() / present.len() as f64;
    // κ = (N·trace − Σ row·col) / (N² − Σ row·col), exact in integers
    let chance: u128 = (0..c)
        .map(|t| u128::from(cm.row_sum(t)) * u128::from(cm.col_sum(t)))
        .sum();
    let n = u128::from(total);
    let kappa = if n * n == chance {
        1.0
    } else {
        (n as f64 * trace as f64 - chance as f64) / ((n * n - chance) as f64)
    };
    Ok(MetricsReport {
        per_class_accuracy,
        overall_accuracy: oa,
        average_accuracy: aa,
        kappa,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialAggregate {
    pub mean_report: MetricsReport,
    pub std_oa: f64,
    pub trial_count: usize,
    /// OA of each trial, in order.
    pub trial_oa: Vec<f64>,
}

/// Elementwise mean of the reports and the sample standard deviation of OA.
///
/// A class's mean accuracy only averages the trials in which it had test pixels.
pub fn aggregate_trials(reports: &[MetricsReport]) -> Result<TrialAggregate, MetricsError> {
    let first = reports.first().ok_or(MetricsError::NoReports)?;
    let c = first.per_class_accuracy.len();
    if let Some(r) = reports.iter().find(|r| r.per_class_accuracy.len() != c) {
        return Err(MetricsError::InconsistentClassCount(c, r.per_class_accuracy.len()));
    }
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let per_class_accuracy = (0..c)
        .map(|i| {
            let vals: Vec<f64> = reports.iter().filter_map(|r| r.per_class_accuracy[i]).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect();
    let oa_mean = mean(&|r| r.overall_accuracy);
    let std_oa = if reports.len() > 1 {
        (reports
            .iter()
            .map(|r| (r.overall_accuracy - oa_mean).powi(2))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt()
    } else {
        0.0
    };
    Ok(TrialAggregate {
        mean_report: MetricsReport {
            per_class_accuracy,
            overall_accuracy: oa_mean,
            average_accuracy: mean(&|r| r.average_accuracy),
            kappa: mean(&|r| r.kappa),
        },
        std_oa,
        trial_count: reports.len(),
        trial_oa: reports.iter().map(|r| r.overall_accuracy).collect(),
    })
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

#[derive(Serialize)]
struct ClassRow {
    class: usize,
    accuracy: Option<f64>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    classes: Vec<ClassRow>,
    oa: f64,
    aa: f64,
    kappa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    std_oa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trial_oa: Option<&'a [f64]>,
}

impl MetricsReport {
    fn json_value(&self) -> ReportJson<'_> {
        ReportJson {
            classes: self
                .per_class_accuracy
                .iter()
                .enumerate()
                .map(|(i, a)| ClassRow { class: i + 1, accuracy: *a })
                .collect(),
            oa: self.overall_accuracy,
            aa: self.average_accuracy,
            kappa: self.kappa,
            std_oa: None,
            trials: None,
            trial_oa: None,
        }
    }

    /// JSON laid out like a results table: one entry per class, then OA, AA, κ.
    pub fn to_json(&self) -> Result<String, MetricsError> {
        Ok(serde_json::to_string_pretty(&self.json_value())?)
    }

    /// CSV with one row per class followed by OA, AA and kappa rows.
    /// Accuracies are percentages with two decimals; kappa keeps three.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), MetricsError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["class", "accuracy"])?;
        for (i, a) in self.per_class_accuracy.iter().enumerate() {
            let cell = a.map(pct).unwrap_or_default();
            w.write_record([(i + 1).to_string(), cell])?;
        }
        w.write_record(["OA".to_string(), pct(self.overall_accuracy)])?;
        w.write_record(["AA".to_string(), pct(self.average_accuracy)])?;
        w.write_record(["kappa".to_string(), format!("{:.3}", self.kappa)])?;
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, json_path: &Path, csv_path: &Path) -> Result<(), MetricsError> {
        std::fs::write(json_path, self.to_json()?)?;
        self.write_csv(std::fs::File::create(csv_path)?)
    }
}

impl TrialAggregate {
    pub fn to_json(&self) -> Result<String, MetricsError> {
        let mut v = self.mean_report.json_value();
        v.std_oa = Some(self.std_oa);
        v.trials = Some(self.trial_count);
        v.trial_oa = Some(&self.trial_oa);
        Ok(serde_json::to_string_pretty(&v)?)
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), MetricsError> {
        let mut buf = Vec::new();
        self.mean_report.write_csv(&mut buf)?;
        let mut out = out;
        out.write_all(&buf)?;
        writeln!(out, "std_OA,{}", pct(self.std_oa))?;
        writeln!(out, "trials,{}", self.trial_count)?;
        Ok(())
    }

    pub fn save(&self, json_path: &Path, csv_path: &Path) -> Result<(), MetricsError> {
        std::fs::write(json_path, self.to_json()?)?;
        self.write_csv(std::fs::File::create(csv_path)?)
    }
}
