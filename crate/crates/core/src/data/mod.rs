//! Labelled image datasets: IDX and CSV readers plus synthetic generators.

mod idx;
mod synth;

pub use idx::{load_idx, parse_idx_images, parse_idx_labels};
pub use synth::{synth_dataset, SynthKind, SynthSpec};

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Images stacked along a leading sample axis, with integer class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    images: Tensor<f32>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl Dataset {
    pub fn new(images: Tensor<f32>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if images.shape().len() < 2 {
            return Err(Error::dim(format!(
                "dataset images need a sample axis, got shape {:?}",
                images.shape()
            )));
        }
        if images.shape()[0] != labels.len() {
            return Err(Error::data(format!(
                "{} images but {} labels",
                images.shape()[0],
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::data(format!("label {bad} out of range for {n_classes} classes")));
        }
        Ok(Dataset {
            images,
            labels,
            n_classes,
        })
    }

    /// Build a dataset whose class count is one more than the largest label.
    pub fn with_inferred_classes(images: Tensor<f32>, labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().max().map_or(1, |&m| m + 1);
        Self::new(images, labels, n_classes)
    }

    pub fn images(&self) -> &Tensor<f32> {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Shape of one sample (no batch axis).
    pub fn sample_shape(&self) -> &[usize] {
        &self.images.shape()[1..]
    }

    /// Widen the class count, e.g. when a subset happens to miss the top class.
    pub fn with_classes(mut self, n_classes: usize) -> Result<Self> {
        if n_classes < self.n_classes {
            return Err(Error::data(format!(
                "cannot shrink class count from {} to {n_classes}",
                self.n_classes
            )));
        }
        self.n_classes = n_classes;
        Ok(self)
    }

    /// Samples `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Dataset> {
        Ok(Dataset {
            images: self.images.slice_outer(start, end)?,
            labels: self.labels[start..end].to_vec(),
            n_classes: self.n_classes,
        })
    }

    /// The first `n` samples (or all of them if there are fewer).
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        if n == self.len() {
            return self.clone();
        }
        self.slice(0, n).expect("in-range slice")
    }

    /// Samples at `indices`, in that order.
    pub fn gather(&self, indices: &[usize]) -> Result<(Tensor<f32>, Vec<usize>)> {
        let images = self.images.gather_outer(indices)?;
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Ok((images, labels))
    }

    /// Replace the images, keeping labels and classes.
    pub fn map_images(&self, images: Tensor<f32>) -> Result<Dataset> {
        Dataset::new(images, self.labels.clone(), self.n_classes)
    }
}

/// Read a CSV file with header `label,p0,p1,...`. Pixel values are taken as
/// written. `sample_shape` defaults to `[1, s, s]` when the pixel count is a
/// perfect square and `[pixels]` otherwise.
pub fn load_csv(path: impl AsRef<Path>, sample_shape: Option<&[usize]>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.get(0) != Some("label") {
        return Err(Error::data(format!(
            "{}: first CSV column must be `label`",
            path.display()
        )));
    }
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("p{i}") {
            return Err(Error::data(format!(
                "{}: expected column p{i}, found `{name}`",
                path.display()
            )));
        }
    }
    let pixels = header.len() - 1;
    if pixels == 0 {
        return Err(Error::data(format!("{}: no pixel columns", path.display())));
    }
    let mut labels = vec![];
    let mut data = vec![];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = row + 2;
        let label = record[0].trim().parse::<usize>().map_err(|_| {
            Error::data(format!("{}:{line}: bad label `{}`", path.display(), &record[0]))
        })?;
        labels.push(label);
        for field in record.iter().skip(1) {
            let v = field.trim().parse::<f32>().map_err(|_| {
                Error::data(format!("{}:{line}: bad pixel `{field}`", path.display()))
            })?;
            data.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::data(format!("{}: no rows", path.display())));
    }
    let shape: Vec<usize> = match sample_shape {
        Some(s) => s.to_vec(),
        None => {
            let side = (pixels as f64).sqrt().round() as usize;
            if side * side == pixels {
                vec![1, side, side]
            } else {
                vec![pixels]
            }
        }
    };
    if shape.iter().product::<usize>() != pixels {
        return Err(Error::data(format!(
            "sample shape {shape:?} does not hold {pixels} pixels"
        )));
    }
    let mut full = vec![labels.len()];
    full.extend(shape);
    let images = Tensor::new(full, data).map_err(|e| Error::data(e.to_string()))?;
    Dataset::with_inferred_classes(images, labels)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::data(format!("{}: {kind:?}", path.display())),
    }
}
