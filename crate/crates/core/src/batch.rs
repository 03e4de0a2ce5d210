//! Per-split slices of path features in the working precision.

use ndarray::{Array2, ArrayView2, NdFloat};

use crate::aggregate::PathFeatureSet;
use crate::hin::{Labels, Split};
use crate::neural::{cst, LossTarget};

/// The rows of one split, with feature slices converted on first use. A
/// path that is never touched costs nothing.
pub struct SplitData<'a, F> {
    feats: &'a PathFeatureSet,
    nodes: Vec<usize>,
    target: LossTarget,
    slices: Vec<Option<Array2<F>>>,
}

impl<'a, F: NdFloat> SplitData<'a, F> {
    pub fn new(feats: &'a PathFeatureSet, labels: &Labels, nodes: Vec<usize>) -> Self {
        let target = LossTarget::from_labels(labels, &nodes);
        Self { feats, nodes, target, slices: vec![None; feats.len()] }
    }

    pub fn for_split(feats: &'a PathFeatureSet, labels: &Labels, splits: &[Split], split: Split) -> Self {
        let nodes = splits.iter().enumerate().filter(|(_, s)| **s == split).map(|(i, _)| i).collect();
        Self::new(feats, labels, nodes)
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn target(&self) -> &LossTarget {
        &self.target
    }

    pub fn ensure(&mut self, paths: &[usize]) {
        for &k in paths {
            if self.slices[k].is_none() {
                let m = self.feats.matrix(k).view();
                let mut out = Array2::zeros((self.nodes.len(), m.ncols()));
                for (mut row, &n) in out.rows_mut().into_iter().zip(&self.nodes) {
                    row.zip_mut_with(&m.row(n), |o, &v| *o = cst::<F>(v));
                }
                self.slices[k] = Some(out);
            }
        }
    }

    /// Views for `paths`, which must have been passed to [`Self::ensure`].
    pub fn views(&self, paths: &[usize]) -> Vec<ArrayView2<'_, F>> {
        paths
            .iter()
            .map(|&k| self.slices[k].as_ref().expect("feature slice prepared").view())
            .collect()
    }

    /// Bytes currently held by converted slices.
    pub fn bytes(&self) -> usize {
        self.slices.iter().flatten().map(|m| m.len() * std::mem::size_of::<F>()).sum()
    }
}
