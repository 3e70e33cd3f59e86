//! Strict per-edge segmentation metrics.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// `counts[gt][pred]` over the masked-in edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes).map(|c| self.get(c, c)).sum()
    }

    /// Adds one evaluated edge.
    pub fn record(&mut self, gt: usize, pred: usize) -> Result<()> {
        for l in [gt, pred] {
            if l >= self.num_classes {
                return Err(Error::LabelOutOfRange {
                    label: l,
                    num_classes: self.num_classes,
                });
            }
        }
        self.counts[gt * self.num_classes + pred] += 1;
        Ok(())
    }

    /// Accumulates another matrix of the same size.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::LengthMismatch(self.num_classes, other.num_classes));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

/// Tallies `pred` against `gt` over edges whose mask is set.
pub fn confusion(
    pred: &[usize],
    gt: &[usize],
    mask: &[bool],
    num_classes: usize,
) -> Result<ConfusionMatrix> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch(pred.len(), gt.len()));
    }
    if mask.len() != gt.len() {
        return Err(Error::LengthMismatch(mask.len(), gt.len()));
    }
    let mut cm = ConfusionMatrix::new(num_classes);
    for ((&p, &g), &m) in pred.iter().zip(gt).zip(mask) {
        if m {
            cm.record(g, p)?;
        }
    }
    Ok(cm)
}

/// Per-class IoU (`None` where the class is absent from both prediction and
/// ground truth) and the unweighted mean over defined classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IouReport {
    pub per_class: Vec<Option<f64>>,
    pub mean: f64,
}

pub fn iou(cm: &ConfusionMatrix) -> Result<IouReport> {
    if cm.total() == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let n = cm.num_classes;
    let per_class: Vec<Option<f64>> = (0..n)
        .map(|c| {
            let tp = cm.get(c, c);
            let fn_: u64 = (0..n).filter(|&p| p != c).map(|p| cm.get(c, p)).sum();
            let fp: u64 = (0..n).filter(|&g| g != c).map(|g| cm.get(g, c)).sum();
            let denom = tp + fp + fn_;
            (denom > 0).then(|| tp as f64 / denom as f64)
        })
        .collect();
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(IouReport { per_class, mean })
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyEvaluation);
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// Plain-text metrics block followed by `key=value` lines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub iou: IouReport,
    pub accuracy: f64,
    pub edges: u64,
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        Ok(Self {
            iou: iou(cm)?,
            accuracy: accuracy(cm)?,
            edges: cm.total(),
        })
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (c, v) in self.iou.per_class.iter().enumerate() {
            match v {
                Some(v) => writeln!(f, "iou_c{c}={v}")?,
                None => writeln!(f, "iou_c{c}=undefined")?,
            }
        }
        writeln!(f, "mean_iou={}", self.iou.mean)?;
        writeln!(f, "accuracy={}", self.accuracy)?;
        write!(f, "edges={}", self.edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let gt = [0, 1, 2, 2, 1];
        let cm = confusion(&gt, &gt, &[true; 5], 4).unwrap();
        for c in 0..4 {
            for p in 0..4 {
                if c != p {
                    assert_eq!(cm.get(c, p), 0);
                }
            }
        }
        let r = iou(&cm).unwrap();
        assert_eq!(r.per_class, vec![Some(1.0), Some(1.0), Some(1.0), None]);
        assert_eq!(r.mean, 1.0);
        assert_eq!(accuracy(&cm).unwrap(), 1.0);
    }

    #[test]
    fn half_half_case() {
        let cm = confusion(&[0, 0, 0, 0], &[0, 0, 1, 1], &[true; 4], 2).unwrap();
        let r = iou(&cm).unwrap();
        assert_eq!(r.per_class, vec![Some(0.5), Some(0.0)]);
        assert_eq!(r.mean, 0.25);
        assert_eq!(accuracy(&cm).unwrap(), 0.5);
    }

    #[test]
    fn hand_tally() {
        // gt 0,1,1,2 / pred 0,2,1,2
        let cm = confusion(&[0, 2, 1, 2], &[0, 1, 1, 2], &[true; 4], 3).unwrap();
        assert_eq!(
            (cm.get(0, 0), cm.get(1, 2), cm.get(1, 1), cm.get(2, 2)),
            (1, 1, 1, 1)
        );
        assert_eq!(cm.total(), 4);
        let r = iou(&cm).unwrap();
        assert_eq!(r.per_class, vec![Some(1.0), Some(0.5), Some(0.5)]);
    }

    #[test]
    fn masked_out_is_empty() {
        let cm = confusion(&[0, 1], &[1, 0], &[false, false], 2).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(matches!(iou(&cm), Err(Error::EmptyEvaluation)));
        assert!(matches!(accuracy(&cm), Err(Error::EmptyEvaluation)));
    }

    #[test]
    fn input_errors() {
        assert!(matches!(
            confusion(&[0], &[0, 1], &[true, true], 2),
            Err(Error::LengthMismatch(1, 2))
        ));
        assert!(matches!(
            confusion(&[3], &[0], &[true], 2),
            Err(Error::LabelOutOfRange { label: 3, .. })
        ));
    }

    #[test]
    fn paper_gap_direction_on_consistent_matrix() {
        // Rows: gt, cols: pred. Chosen so the large vessel class dominates accuracy
        // while the small junction class drags mean IoU down.
        let mut cm = ConfusionMatrix::new(4);
        let rows = [
            [820, 40, 60, 80],
            [30, 830, 60, 80],
            [60, 60, 380, 300],
            [20, 60, 200, 4000],
        ];
        for (g, row) in rows.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                for _ in 0..n {
                    cm.record(g, p).unwrap();
                }
            }
        }
        let r = iou(&cm).unwrap();
        let acc = accuracy(&cm).unwrap();
        assert!(acc > r.mean, "acc {acc} mean {}", r.mean);
    }
}
