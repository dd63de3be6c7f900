use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionScore {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Ground-truth points of this region.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionReport {
    pub accuracy: f64,
    pub points: usize,
    pub regions: Vec<RegionScore>,
}

/// Scores predicted label indices against truth. A region that is never
/// predicted has precision 0; F1 is 0 when precision and recall both are.
pub fn region_report(labels: &[String], truth: &[usize], predicted: &[usize]) -> RegionReport {
    assert_eq!(truth.len(), predicted.len());
    let k = labels.len();
    let mut tp = vec![0usize; k];
    let mut pred_n = vec![0usize; k];
    let mut true_n = vec![0usize; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        true_n[t] += 1;
        pred_n[p] += 1;
        if t == p {
            tp[t] += 1;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let regions = (0..k)
        .map(|i| {
            let precision = ratio(tp[i], pred_n[i]);
            let recall = ratio(tp[i], true_n[i]);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            RegionScore {
                label: labels[i].clone(),
                precision,
                recall,
                f1,
                support: true_n[i],
            }
        })
        .collect();
    RegionReport {
        accuracy: ratio(tp.iter().sum(), truth.len()),
        points: truth.len(),
        regions,
    }
}

impl RegionReport {
    pub fn table(&self) -> String {
        let mut s = format!(
            "region accuracy {:.4} on {} points\n",
            self.accuracy, self.points
        );
        s.push_str(&format!(
            "{:<20} {:>9} {:>9} {:>9} {:>8}\n",
            "region", "precision", "recall", "f1", "support"
        ));
        for r in &self.regions {
            s.push_str(&format!(
                "{:<20} {:>9.4} {:>9.4} {:>9.4} {:>8}\n",
                r.label, r.precision, r.recall, r.f1, r.support
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_confusion() {
        let labels = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        // truth a a a b b c, predicted a a b b a b
        let r = region_report(&labels, &[0, 0, 0, 1, 1, 2], &[0, 0, 1, 1, 0, 1]);
        assert!((r.accuracy - 3.0 / 6.0).abs() < 1e-12);
        let a = &r.regions[0];
        assert!((a.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((a.recall - 2.0 / 3.0).abs() < 1e-12);
        let b = &r.regions[1];
        assert!((b.precision - 1.0 / 3.0).abs() < 1e-12);
        assert!((b.recall - 0.5).abs() < 1e-12);
        assert!((b.f1 - 0.4).abs() < 1e-12);
        let c = &r.regions[2];
        assert_eq!((c.precision, c.recall, c.f1, c.support), (0.0, 0.0, 0.0, 1));
    }
}
