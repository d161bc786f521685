use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(probabilities: &[f64], labels: &[f64], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (&p, &y) in probabilities.iter().zip(labels) {
            match (p >= threshold, y >= 0.5) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
    pub threshold: f64,
    /// Mean binary cross-entropy, when known.
    pub loss: Option<f64>,
    /// Per-epoch training loss of the model being reported.
    #[serde(default)]
    pub loss_history: Vec<f64>,
}

impl MetricsReport {
    pub fn from_confusion(confusion: Confusion, threshold: f64) -> Self {
        let c = confusion;
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            accuracy: ratio(c.tp + c.tn, c.total()),
            precision,
            recall,
            f1,
            confusion,
            threshold,
            loss: None,
            loss_history: Vec::new(),
        }
    }

    pub fn from_predictions(probabilities: &[f64], labels: &[f64], threshold: f64) -> Self {
        Self::from_confusion(Confusion::from_predictions(probabilities, labels, threshold), threshold)
    }
}

/// Plain-text table with one row group per model and one column per
/// vulnerability class; cells are left blank where a pair is missing.
pub fn render_table(entries: &[(&str, &str, &MetricsReport)]) -> String {
    let mut models: Vec<&str> = Vec::new();
    let mut classes: Vec<&str> = Vec::new();
    for &(m, c, _) in entries {
        if !models.contains(&m) {
            models.push(m);
        }
        if !classes.contains(&c) {
            classes.push(c);
        }
    }
    let first = models.iter().map(|m| m.len()).max().unwrap_or(0).max(5);
    let widths: Vec<usize> = classes.iter().map(|c| c.len().max(6)).collect();
    let rule_len = first + 2 + 9 + widths.iter().map(|w| w + 2).sum::<usize>();
    let rule = "-".repeat(rule_len);

    let mut out = String::new();
    out += &format!("{:<first$}  {:<9}", "Model", "Metric");
    for (c, w) in classes.iter().zip(&widths) {
        out += &format!("  {c:>w$}");
    }
    out += &format!("\n{rule}\n");
    type Getter = fn(&MetricsReport) -> f64;
    let metrics: [(&str, Getter); 4] = [
        ("Accuracy", |r| r.accuracy),
        ("Precision", |r| r.precision),
        ("Recall", |r| r.recall),
        ("F1-Score", |r| r.f1),
    ];
    for m in &models {
        for (i, (metric, get)) in metrics.iter().enumerate() {
            let label = if i == 0 { *m } else { "" };
            out += &format!("{label:<first$}  {metric:<9}");
            for (c, w) in classes.iter().zip(&widths) {
                let cell = entries
                    .iter()
                    .find(|(em, ec, _)| em == m && ec == c)
                    .map(|(_, _, r)| format!("{:.4}", get(r)))
                    .unwrap_or_default();
                out += &format!("  {cell:>w$}");
            }
            out.push('\n');
        }
        out += &format!("{rule}\n");
    }
    out
}
