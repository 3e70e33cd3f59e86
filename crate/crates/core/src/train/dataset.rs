//! Labeled samples and the `train/ val/ test/` directory layout.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mesh::{load_obj, read_eseg_for, write_eseg, write_obj, Mesh};

/// A mesh with one class label per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub mesh: Mesh,
    pub labels: Vec<usize>,
    /// `false` marks edges excluded from loss and metrics.
    pub valid_mask: Vec<bool>,
}

impl LabeledSample {
    pub fn new(mesh: Mesh, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.len() != mesh.edge_count() {
            return Err(Error::LabelCountMismatch {
                labels: labels.len(),
                edges: mesh.edge_count(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange { label, num_classes });
        }
        let valid_mask = vec![true; labels.len()];
        Ok(Self {
            mesh,
            labels,
            valid_mask,
        })
    }
}

/// Dataset split directory names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// Lists `*.obj` files of a split directory, sorted by file name.
pub fn list_split(root: &Path, split: Split) -> Result<Vec<PathBuf>> {
    let dir = root.join(split.dir_name());
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir));
    }
    let mut objs: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "obj"))
        .collect();
    objs.sort();
    Ok(objs)
}

/// Loads every `stem.obj` + `stem.eseg` pair of a split.
pub fn load_split(root: &Path, split: Split, num_classes: usize) -> Result<Vec<LabeledSample>> {
    list_split(root, split)?
        .into_iter()
        .map(|obj| {
            let mesh = load_obj(&obj)?;
            let labels = read_eseg_for(&mesh, obj.with_extension("eseg"))?;
            LabeledSample::new(mesh, labels, num_classes)
        })
        .collect()
}

/// Writes samples as `<prefix><index>.obj/.eseg` into `root/<split>/`.
pub fn write_split(
    root: &Path,
    split: Split,
    prefix: &str,
    samples: &[LabeledSample],
) -> Result<Vec<PathBuf>> {
    let dir = root.join(split.dir_name());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut written = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let obj = dir.join(format!("{prefix}{i:03}.obj"));
        write_obj(&s.mesh, &obj)?;
        write_eseg(&s.labels, obj.with_extension("eseg"))?;
        written.push(obj);
    }
    Ok(written)
}

/// Median-frequency class weights over the masked labels of `samples`,
/// normalized to sum to one.
pub fn median_frequency_weights(samples: &[LabeledSample], num_classes: usize) -> Result<Vec<f64>> {
    let mut counts = vec![0usize; num_classes];
    for s in samples {
        for (&l, _) in s.labels.iter().zip(&s.valid_mask).filter(|(_, &m)| m) {
            counts[l] += 1;
        }
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Config(format!(
            "class {c} never occurs; cannot derive its weight"
        )));
    }
    let total: usize = counts.iter().sum();
    let freq: Vec<f64> = counts.iter().map(|&n| n as f64 / total as f64).collect();
    let mut sorted = freq.clone();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let median = if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    };
    let raw: Vec<f64> = freq.iter().map(|f| median / f).collect();
    let sum: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / sum).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::icosphere;

    fn sample(labels: impl Fn(usize) -> usize) -> LabeledSample {
        let mesh = icosphere(1);
        let labels = (0..mesh.edge_count()).map(labels).collect();
        LabeledSample::new(mesh, labels, 4).unwrap()
    }

    #[test]
    fn median_frequency_favors_rare_classes() {
        // 120 edges: class 0 ×10, 1 ×50, 2 ×20, 3 ×40
        let s = sample(|e| match e {
            0..10 => 0,
            10..60 => 1,
            60..80 => 2,
            _ => 3,
        });
        let w = median_frequency_weights(&[s], 4).unwrap();
        // median frequency 0.25; raw weights 3, 0.6, 1.5, 0.75
        let raw = [3.0, 0.6, 1.5, 0.75];
        let sum: f64 = raw.iter().sum();
        for (a, b) in w.iter().zip(raw) {
            assert!((a - b / sum).abs() < 1e-12);
        }
    }

    #[test]
    fn absent_class_is_rejected() {
        let s = sample(|e| e % 3);
        assert!(matches!(
            median_frequency_weights(&[s], 4),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn split_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = sample(|e| e % 4);
        write_split(dir.path(), Split::Val, "m", &[s.clone(), s.clone()]).unwrap();
        let back = load_split(dir.path(), Split::Val, 4).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].labels, s.labels);
        assert_eq!(back[0].mesh.edge_count(), s.mesh.edge_count());
        assert!(matches!(
            load_split(dir.path(), Split::Test, 4),
            Err(Error::MissingFile(_))
        ));
    }
}
