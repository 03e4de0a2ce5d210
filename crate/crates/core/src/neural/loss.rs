use ndarray::{Array2, ArrayView2, NdFloat};

use super::cst;
use crate::error::{Error, Result};
use crate::hin::Labels;

/// Numerically stable softmax of a vector.
pub fn softmax<F: NdFloat>(v: &[F]) -> Vec<F> {
    let max = v.iter().copied().fold(F::neg_infinity(), F::max);
    let e: Vec<F> = v.iter().map(|x| (*x - max).exp()).collect();
    let s = e.iter().copied().fold(F::zero(), |a, b| a + b);
    e.into_iter().map(|x| x / s).collect()
}

pub fn softmax_rows<F: NdFloat>(logits: ArrayView2<'_, F>) -> Array2<F> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        row.mapv_inplace(|x| (x - max).exp());
        let s = row.sum();
        row.mapv_inplace(|x| x / s);
    }
    out
}

/// Mean softmax cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy<F: NdFloat>(logits: ArrayView2<'_, F>, targets: &[usize]) -> Result<(F, Array2<F>)> {
    let (n, c) = logits.dim();
    if targets.len() != n {
        return Err(Error::Shape(format!("{n} logit rows for {} targets", targets.len())));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
        return Err(Error::Shape(format!("class {bad} out of range for {c} logits")));
    }
    if n == 0 {
        return Ok((F::zero(), Array2::zeros((0, c))));
    }
    let inv_n = cst::<F>(1.0 / n as f64);
    let mut loss = F::zero();
    let mut grad = softmax_rows(logits);
    for (i, (&t, row)) in targets.iter().zip(logits.rows()).enumerate() {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let lse = max + row.iter().map(|x| (*x - max).exp()).fold(F::zero(), |a, b| a + b).ln();
        loss = loss + lse - row[t];
        grad[[i, t]] -= F::one();
    }
    grad.mapv_inplace(|g| g * inv_n);
    Ok((loss * inv_n, grad))
}

/// Mean binary cross-entropy over all elements, taken on logits.
pub fn bce_with_logits<F: NdFloat>(logits: ArrayView2<'_, F>, targets: ArrayView2<'_, F>) -> Result<(F, Array2<F>)> {
    if logits.dim() != targets.dim() {
        return Err(Error::Shape(format!("logits {:?} vs targets {:?}", logits.dim(), targets.dim())));
    }
    if logits.is_empty() {
        return Ok((F::zero(), Array2::zeros(logits.raw_dim())));
    }
    let inv = cst::<F>(1.0 / logits.len() as f64);
    let mut loss = F::zero();
    let mut grad = Array2::zeros(logits.raw_dim());
    ndarray::Zip::from(&mut grad).and(logits).and(targets).for_each(|g, &x, &y| {
        loss = loss + x.max(F::zero()) - x * y + (-x.abs()).exp().ln_1p();
        let sig = F::one() / (F::one() + (-x).exp());
        *g = (sig - y) * inv;
    });
    Ok((loss * inv, grad))
}

/// Training targets for a set of target nodes.
#[derive(Clone, Debug, PartialEq)]
pub enum LossTarget {
    Classes { classes: Vec<usize>, num_classes: usize },
    MultiHot(Array2<f64>),
}

impl LossTarget {
    /// Targets for `nodes`, in that order.
    pub fn from_labels(labels: &Labels, nodes: &[usize]) -> Self {
        match labels {
            Labels::Single { classes, num_classes } => LossTarget::Classes {
                classes: nodes.iter().map(|&i| classes[i]).collect(),
                num_classes: *num_classes,
            },
            Labels::Multi { bits, num_classes } => LossTarget::MultiHot(Array2::from_shape_fn(
                (nodes.len(), *num_classes),
                |(r, c)| if bits[nodes[r]][c] { 1.0 } else { 0.0 },
            )),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            LossTarget::Classes { classes, .. } => classes.len(),
            LossTarget::MultiHot(m) => m.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_classes(&self) -> usize {
        match self {
            LossTarget::Classes { num_classes, .. } => *num_classes,
            LossTarget::MultiHot(m) => m.ncols(),
        }
    }

    pub fn is_multi(&self) -> bool {
        matches!(self, LossTarget::MultiHot(_))
    }

    /// Cross-entropy for single-label targets, BCE for multi-label ones.
    pub fn loss<F: NdFloat>(&self, logits: ArrayView2<'_, F>) -> Result<(F, Array2<F>)> {
        let (loss, grad) = match self {
            LossTarget::Classes { classes, .. } => cross_entropy(logits, classes)?,
            LossTarget::MultiHot(m) => bce_with_logits(logits, m.mapv(cst::<F>).view())?,
        };
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss is not finite".into()));
        }
        Ok((loss, grad))
    }

    /// Per-row hard predictions from logits: class index, or thresholded bits.
    pub fn predict<F: NdFloat>(&self, logits: ArrayView2<'_, F>) -> Prediction {
        match self {
            LossTarget::Classes { .. } => Prediction::Classes(
                logits
                    .rows()
                    .into_iter()
                    .map(|r| {
                        let mut best = 0;
                        for (j, v) in r.iter().enumerate() {
                            if *v > r[best] {
                                best = j;
                            }
                        }
                        best
                    })
                    .collect(),
            ),
            LossTarget::MultiHot(_) => Prediction::Bits(logits.mapv(|x| x > F::zero())),
        }
    }
}

/// Hard predictions. A logit above zero is a probability above one half.
#[derive(Clone, Debug, PartialEq)]
pub enum Prediction {
    Classes(Vec<usize>),
    Bits(Array2<bool>),
}
