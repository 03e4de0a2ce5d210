use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::SliceRandom;

use super::{FeatureMatrix, Hin, SparseAdjacency};
use crate::error::{Error, Result};
use crate::rng::{str_key, Purpose, RngStream};

/// Caps the in-degree of every destination node, per edge type, at `cap`.
///
/// A destination with more than `cap` in-edges keeps the sources that come
/// first in a permutation drawn from a stream keyed by `(seed, edge type,
/// destination id)`. Nodes are never removed.
pub fn sparsify_by_in_degree_cap(h: &Hin, cap: usize, seed: u64) -> Result<Hin> {
    if cap == 0 {
        return Err(Error::InvalidArgument("in-degree cap must be at least 1".into()));
    }
    let root = RngStream::new(seed, Purpose::Sample);
    let mut out = BTreeMap::new();
    for (name, a) in h.adjacencies() {
        let stream = root.derive(str_key(name));
        // Rows of the transpose list each destination's sources.
        let by_dst = a.transpose();
        let mut triplets = Vec::with_capacity(by_dst.nnz().min(by_dst.rows() * cap));
        for dst in 0..by_dst.rows() {
            let (srcs, vals) = by_dst.row(dst);
            if srcs.len() <= cap {
                triplets.extend(srcs.iter().zip(vals).map(|(&s, &v)| (s, dst, v)));
                continue;
            }
            let mut order: Vec<usize> = (0..srcs.len()).collect();
            order.shuffle(&mut stream.derive(dst as u64));
            triplets.extend(order[..cap].iter().map(|&i| (srcs[i], dst, vals[i])));
        }
        out.insert(name.clone(), SparseAdjacency::from_triplets(a.rows(), a.cols(), triplets)?);
    }
    h.with_adjacency(out)
}

/// Deterministic uniform(-1, 1) features for a node type that has none.
///
/// Row `i` is drawn from a stream keyed by `(seed, node type, i)`, so the
/// matrix does not depend on evaluation order. Values are single precision.
pub fn synth_features_for_featureless(h: &Hin, node_type: &str, dim: usize, seed: u64) -> Result<FeatureMatrix> {
    let t = h.schema().node_type(node_type).ok_or_else(|| Error::UnknownNodeType(node_type.into()))?;
    if h.features(node_type).is_some() {
        return Err(Error::FeaturesPresent(node_type.into()));
    }
    let stream = RngStream::new(seed, Purpose::Synth).derive(str_key(node_type));
    let mut m = Array2::zeros((t.count, dim));
    for (i, mut row) in m.rows_mut().into_iter().enumerate() {
        let mut r = stream.derive(i as u64);
        for v in row.iter_mut() {
            *v = f64::from((r.unit_f64() * 2.0 - 1.0) as f32);
        }
    }
    FeatureMatrix::new(m)
}
