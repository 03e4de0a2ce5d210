//! Per-epoch cost of search and target training as the maximum hop grows.
//!
//! Precomputation is timed on its own and kept out of the per-epoch figures.
//! Memory is accounted from the shapes of live matrices, not measured.

use std::time::Instant;

use ndarray::NdFloat;

use crate::aggregate::{precompute_all, PathFeatureSet};
use crate::error::{Error, Result};
use crate::hin::{Hin, Split};
use crate::metapath::enumerate_metapaths;
use crate::metrics::mean_std;
use crate::neural::{Activation, AdamConfig};
use crate::search::{derive_top_m, train_supernet, Phase, SearchConfig};
use crate::target::{train_target_observed, TargetConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub hops: Vec<usize>,
    /// Paths per search epoch and paths kept for training; `None` uses every
    /// candidate.
    pub m: Option<usize>,
    pub repeats: usize,
    pub search_epochs: usize,
    pub train_epochs: usize,
    pub hidden: usize,
    pub adam: AdamConfig,
    pub dropout: f64,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            hops: vec![1, 2, 3, 4, 5, 6, 7, 8],
            m: Some(20),
            repeats: 3,
            search_epochs: 10,
            train_epochs: 10,
            hidden: 512,
            adam: AdamConfig::default(),
            dropout: 0.5,
            activation: Activation::Relu,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub hop: usize,
    pub candidates: usize,
    /// Paths sampled per search epoch and trained on afterwards.
    pub m: usize,
    pub precompute_secs: f64,
    /// Mean and sample std of one search epoch, in seconds.
    pub search_epoch: (f64, f64),
    pub train_epoch: (f64, f64),
    pub feature_bytes: usize,
    pub search_bytes: usize,
    pub train_bytes: usize,
}

impl BenchRow {
    /// Largest accounted footprint of either stage.
    pub fn peak_bytes(&self) -> usize {
        self.feature_bytes + self.search_bytes.max(self.train_bytes)
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
            self.hop,
            self.candidates,
            self.m,
            self.precompute_secs,
            self.search_epoch.0,
            self.search_epoch.1,
            self.train_epoch.0,
            self.train_epoch.1,
            self.feature_bytes,
            self.search_bytes,
            self.train_bytes,
            self.peak_bytes()
        )
    }
}

pub const BENCH_HEADER: &str = "hop,candidates,m,precompute_secs,search_epoch_mean,search_epoch_std,\
train_epoch_mean,train_epoch_std,feature_bytes,search_bytes,train_bytes,peak_bytes";

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = format!("{BENCH_HEADER}\n");
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Bytes cached by one two-layer MLP forward over `rows` inputs, plus its
/// output.
fn mlp_bytes(rows: usize, in_dim: usize, hidden: usize, out: usize, dropout: bool, sz: usize) -> usize {
    let per_row = in_dim + 3 * hidden + if dropout { hidden } else { 0 } + out;
    rows * per_row * sz
}

fn adam_param_bytes(num_params: usize, sz: usize) -> usize {
    // Parameters plus both moment tensors.
    3 * num_params * sz
}

fn mlp_params(in_dim: usize, hidden: usize, out: usize) -> usize {
    in_dim * hidden + hidden + hidden * out + out
}

fn split_len(splits: &[Split], s: Split) -> usize {
    splits.iter().filter(|&&x| x == s).count()
}

/// Working set of one target-net epoch over `dims` paths.
fn target_bytes(dims: &[usize], n_train: usize, n_all: usize, hidden: usize, classes: usize, dropout: bool, sz: usize) -> usize {
    let fused = dims.len() * hidden;
    let params = dims.iter().map(|&d| mlp_params(d, hidden, hidden)).sum::<usize>() + mlp_params(fused, hidden, classes);
    let slices = n_all * dims.iter().sum::<usize>() * sz;
    let acts = dims.iter().map(|&d| mlp_bytes(n_train, d, hidden, hidden, dropout, sz)).sum::<usize>()
        + n_train * fused * sz
        + mlp_bytes(n_train, fused, hidden, classes, dropout, sz);
    adam_param_bytes(params, sz) + slices + acts
}

/// Runs fixed-epoch search and target training at every hop of `cfg.hops`.
pub fn bench_epoch_time_vs_hop<F: NdFloat>(h: &Hin, cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.hops.is_empty() {
        return Err(Error::InvalidArgument("hop list is empty".into()));
    }
    if cfg.repeats == 0 || cfg.search_epochs == 0 || cfg.train_epochs == 0 {
        return Err(Error::InvalidArgument("repeats and epoch counts must be positive".into()));
    }
    let sz = std::mem::size_of::<F>();
    let labels = h.labels();
    let splits = h.splits();
    let n_train = split_len(splits, Split::Train);
    let n_val = split_len(splits, Split::Val);
    let classes = labels.num_classes();
    let mut rows = Vec::with_capacity(cfg.hops.len());
    for &hop in &cfg.hops {
        let paths = enumerate_metapaths(h.schema(), hop, &[])?;
        let t0 = Instant::now();
        let (feats, _) = precompute_all(h, &paths, None)?;
        let precompute_secs = t0.elapsed().as_secs_f64();
        let k = feats.len();
        let m = cfg.m.unwrap_or(k).min(k);

        let search_cfg = SearchConfig {
            m,
            hidden: cfg.hidden,
            epochs: cfg.search_epochs,
            omega: cfg.adam,
            alpha: cfg.adam,
            dropout: cfg.dropout,
            activation: cfg.activation,
        };
        let target_cfg = TargetConfig {
            hidden: cfg.hidden,
            adam: cfg.adam,
            dropout: cfg.dropout,
            activation: cfg.activation,
            patience: usize::MAX,
            max_epochs: cfg.train_epochs,
        };
        let mut search_times = Vec::new();
        let mut train_times = Vec::new();
        let mut search_bytes = 0;
        let mut train_bytes = 0;
        for r in 0..cfg.repeats {
            let seed = cfg.seed.wrapping_add(r as u64);
            let mut start = Instant::now();
            let mut peak = 0usize;
            let mut observe = |_: usize, phase: Phase, net: &crate::search::SuperNet<F>| match phase {
                Phase::EpochStart => start = Instant::now(),
                Phase::AfterAlpha => {
                    search_times.push(start.elapsed().as_secs_f64());
                    peak = peak.max(net.param_bytes());
                }
                _ => {}
            };
            let report = train_supernet::<F>(&feats, labels, splits, &search_cfg, seed, Some(&mut observe))?;
            let sample_dims = largest_dims(&feats, m);
            let acts = sample_dims.iter().map(|&d| mlp_bytes(n_train, d, cfg.hidden, cfg.hidden, cfg.dropout > 0.0, sz)).sum::<usize>()
                + mlp_bytes(n_train, cfg.hidden, cfg.hidden, classes, cfg.dropout > 0.0, sz);
            let slices = (n_train + n_val) * sample_dims.iter().sum::<usize>() * sz;
            search_bytes = search_bytes.max(peak + acts + slices);

            let chosen = feats.indices_of(&derive_top_m(&report, m))?;
            let sub: PathFeatureSet = feats.subset(&chosen);
            let dims: Vec<usize> = (0..sub.len()).map(|i| sub.matrix(i).cols()).collect();
            train_bytes = train_bytes.max(target_bytes(&dims, n_train, splits.len(), cfg.hidden, classes, cfg.dropout > 0.0, sz));
            let mut last = Instant::now();
            let mut on_epoch = |_: usize| {
                train_times.push(last.elapsed().as_secs_f64());
                last = Instant::now();
            };
            train_target_observed::<F>(&sub, labels, splits, &target_cfg, seed, Some(&mut on_epoch))?;
        }
        rows.push(BenchRow {
            hop,
            candidates: k,
            m,
            precompute_secs,
            search_epoch: mean_std(&search_times),
            train_epoch: mean_std(&train_times),
            feature_bytes: feats.feature_bytes(),
            search_bytes,
            train_bytes,
        });
    }
    Ok(rows)
}

/// Input widths of the `m` widest candidates, bounding any sample's slices.
fn largest_dims(feats: &PathFeatureSet, m: usize) -> Vec<usize> {
    let mut dims: Vec<usize> = (0..feats.len()).map(|k| feats.matrix(k).cols()).collect();
    dims.sort_unstable_by(|a, b| b.cmp(a));
    dims.truncate(m);
    dims
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_planted_hin, SynthConfig};

    fn small() -> Hin {
        generate_planted_hin(&SynthConfig::default().with_targets(200)).unwrap().hin
    }

    fn quick(hops: Vec<usize>, m: Option<usize>, repeats: usize) -> BenchConfig {
        BenchConfig { hops, m, repeats, search_epochs: 2, train_epochs: 3, hidden: 8, ..BenchConfig::default() }
    }

    #[test]
    fn empty_hop_list_rejected() {
        assert!(bench_epoch_time_vs_hop::<f32>(&small(), &quick(vec![], Some(2), 1)).is_err());
    }

    #[test]
    fn one_row_per_hop_with_counts() {
        let h = small();
        let rows = bench_epoch_time_vs_hop::<f32>(&h, &quick(vec![1, 3], Some(4), 2)).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].hop, rows[0].candidates, rows[0].m), (1, 3, 3));
        assert_eq!(rows[1].candidates, enumerate_metapaths(h.schema(), 3, &[]).unwrap().len());
        assert_eq!(rows[1].m, 4);
        for r in &rows {
            assert!(r.search_epoch.0 > 0.0 && r.train_epoch.0 > 0.0);
            assert!(r.search_epoch.1 >= 0.0 && r.train_epoch.1 >= 0.0);
            assert!(r.peak_bytes() >= r.feature_bytes);
        }
        let csv = bench_csv(&rows);
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), rows[0].csv_row().split(',').count());
    }

    #[test]
    fn accounting_is_deterministic_and_grows_with_m() {
        let h = small();
        let a = bench_epoch_time_vs_hop::<f32>(&h, &quick(vec![3], Some(2), 1)).unwrap();
        let b = bench_epoch_time_vs_hop::<f32>(&h, &quick(vec![3], Some(2), 1)).unwrap();
        assert_eq!((a[0].search_bytes, a[0].train_bytes), (b[0].search_bytes, b[0].train_bytes));
        let all = bench_epoch_time_vs_hop::<f32>(&h, &quick(vec![3], None, 1)).unwrap();
        assert_eq!(all[0].m, all[0].candidates);
        assert!(all[0].train_bytes > a[0].train_bytes);
    }

    #[test]
    fn analytic_mlp_bytes() {
        // 10 rows of 4 inputs, hidden 3, 2 outputs, no dropout: 10 * (4 + 9 + 2) floats.
        assert_eq!(mlp_bytes(10, 4, 3, 2, false, 4), 600);
        assert_eq!(mlp_params(4, 3, 2), 12 + 3 + 6 + 2);
    }
}
