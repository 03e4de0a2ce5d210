//! The search super-net.
//!
//! Every candidate path `k` owns an architecture parameter `α_k` and a
//! projector MLP. Each epoch draws a uniform subset `S` of `M` paths, fuses
//! their projections with weights `softmax(α_S)` and classifies the sum.
//! The weights `ω` (projectors and classifier) take one step on the
//! training loss, then `α` takes one step on the validation loss.

use ndarray::{Array1, Array2, ArrayD, ArrayView2, NdFloat};

use crate::aggregate::PathFeatureSet;
use crate::batch::SplitData;
use crate::error::{Error, Result};
use crate::hin::{Labels, Split};
use crate::metrics::evaluate;
use crate::neural::{
    mlp_backward, mlp_forward, softmax, Activation, AdamConfig, AdamState, LossTarget, MlpCache, MlpGrads,
    MlpParams, Mode,
};
use crate::rng::{str_key, Purpose, RngStream};

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub m: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub omega: AdamConfig,
    pub alpha: AdamConfig,
    pub dropout: f64,
    pub activation: Activation,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            m: 20,
            hidden: 512,
            epochs: 50,
            omega: AdamConfig::default(),
            alpha: AdamConfig::default(),
            dropout: 0.5,
            activation: Activation::Relu,
        }
    }
}

/// Uniform subset of `min(m, k)` indices out of `0..k`, in ascending order.
pub fn sample_paths(k: usize, m: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("no candidate paths to sample from".into()));
    }
    let mut s = rand::seq::index::sample(rng, k, m.min(k)).into_vec();
    s.sort_unstable();
    Ok(s)
}

/// Softmax of `alpha` in double precision.
pub fn path_strengths(alpha: &[f64]) -> Vec<f64> {
    softmax(alpha)
}

/// Indices of the `m` largest entries of `alpha`, largest first; ties go to
/// the lexicographically smaller label.
pub fn top_m_indices<S: AsRef<str>>(alpha: &[f64], labels: &[S], m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..alpha.len()).collect();
    order.sort_by(|&a, &b| alpha[b].total_cmp(&alpha[a]).then_with(|| labels[a].as_ref().cmp(labels[b].as_ref())));
    order.truncate(m);
    order
}

/// Forward state retained for the backward pass.
pub struct SuperForward<F> {
    sampled: Vec<usize>,
    weights: Vec<F>,
    projected: Vec<Array2<F>>,
    proj_caches: Vec<MlpCache<F>>,
    cls_cache: MlpCache<F>,
    pub logits: Array2<F>,
}

impl<F: NdFloat> SuperForward<F> {
    /// Fusion weights over the sampled set, aligned with it.
    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn bytes(&self) -> usize {
        let mats = self.projected.iter().map(|m| m.len()).sum::<usize>() + self.logits.len();
        mats * std::mem::size_of::<F>()
            + self.proj_caches.iter().map(MlpCache::bytes).sum::<usize>()
            + self.cls_cache.bytes()
    }
}

pub struct SuperGrads<F> {
    pub classifier: MlpGrads<F>,
    /// Aligned with the sampled set; empty when not requested.
    pub projectors: Vec<MlpGrads<F>>,
    /// Length K, zero outside the sampled set.
    pub alpha: Array1<F>,
}

/// Observation points inside a search epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Before the epoch's sample is drawn.
    EpochStart,
    BeforeOmega,
    AfterOmega,
    AfterAlpha,
}

pub struct SuperNet<F> {
    cfg: SearchConfig,
    seed: u64,
    in_dims: Vec<usize>,
    alpha: Array1<F>,
    projectors: Vec<Option<MlpParams<F>>>,
    proj_adam: Vec<Option<AdamState<F>>>,
    classifier: MlpParams<F>,
    cls_adam: AdamState<F>,
    alpha_adam: AdamState<F>,
}

impl<F: NdFloat> SuperNet<F> {
    /// `in_dims[k]` is the feature width of candidate `k`. Projector `k` is
    /// drawn from its own stream on first use, so initial values do not
    /// depend on sampling order.
    pub fn new(in_dims: Vec<usize>, num_classes: usize, cfg: &SearchConfig, seed: u64) -> Result<Self> {
        if cfg.hidden == 0 || num_classes == 0 {
            return Err(Error::InvalidArgument("hidden size and class count must be positive".into()));
        }
        let k = in_dims.len();
        let mut init = RngStream::new(seed, Purpose::Init).derive(str_key("classifier"));
        let classifier = MlpParams::xavier(cfg.hidden, cfg.hidden, num_classes, &mut init);
        let cls_adam = AdamState::new(cfg.omega, &classifier.shapes());
        Ok(Self {
            cfg: cfg.clone(),
            seed,
            in_dims,
            alpha: Array1::zeros(k),
            projectors: vec![None; k],
            proj_adam: vec![None; k],
            classifier,
            cls_adam,
            alpha_adam: AdamState::new(cfg.alpha, &[[k]]),
        })
    }

    pub fn num_paths(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &Array1<F> {
        &self.alpha
    }

    pub fn alpha_mut(&mut self) -> &mut Array1<F> {
        &mut self.alpha
    }

    pub fn projector(&self, k: usize) -> Option<&MlpParams<F>> {
        self.projectors[k].as_ref()
    }

    pub fn projector_mut(&mut self, k: usize) -> Option<&mut MlpParams<F>> {
        self.projectors[k].as_mut()
    }

    pub fn classifier(&self) -> &MlpParams<F> {
        &self.classifier
    }

    pub fn classifier_mut(&mut self) -> &mut MlpParams<F> {
        &mut self.classifier
    }

    /// Number of projectors allocated so far.
    pub fn allocated(&self) -> usize {
        self.projectors.iter().flatten().count()
    }

    /// Copies of every `ω` tensor: the classifier, then allocated projectors.
    pub fn omega_snapshot(&self) -> Vec<ArrayD<F>> {
        let mut out: Vec<ArrayD<F>> = self.classifier.views().iter().map(|v| v.to_owned()).collect();
        for p in self.projectors.iter().flatten() {
            out.extend(p.views().iter().map(|v| v.to_owned()));
        }
        out
    }

    /// Bytes of parameters and optimizer state currently allocated.
    pub fn param_bytes(&self) -> usize {
        let sz = std::mem::size_of::<F>();
        let params = self.classifier.num_params() + self.projectors.iter().flatten().map(MlpParams::num_params).sum::<usize>();
        params * sz
            + self.cls_adam.bytes()
            + self.proj_adam.iter().flatten().map(AdamState::bytes).sum::<usize>()
            + (self.alpha.len() * sz)
            + self.alpha_adam.bytes()
    }

    pub fn ensure_projectors(&mut self, sampled: &[usize]) {
        for &k in sampled {
            if self.projectors[k].is_none() {
                let mut r = RngStream::new(self.seed, Purpose::Init).derive(k as u64);
                let p = MlpParams::xavier(self.in_dims[k], self.cfg.hidden, self.cfg.hidden, &mut r);
                self.proj_adam[k] = Some(AdamState::new(self.cfg.omega, &p.shapes()));
                self.projectors[k] = Some(p);
            }
        }
    }

    /// `MLP(Σ_{k∈S} softmax(α_S)_k · MLP_k(X_k))`; `xs` is aligned with `sampled`.
    pub fn forward(&mut self, xs: &[ArrayView2<'_, F>], sampled: &[usize], mut mode: Mode<'_>) -> Result<SuperForward<F>> {
        if sampled.is_empty() {
            return Err(Error::InvalidArgument("sampled path set is empty".into()));
        }
        if xs.len() != sampled.len() {
            return Err(Error::Shape(format!("{} feature matrices for {} sampled paths", xs.len(), sampled.len())));
        }
        self.ensure_projectors(sampled);
        let alpha_s: Vec<F> = sampled.iter().map(|&k| self.alpha[k]).collect();
        let weights = softmax(&alpha_s);
        let n = xs[0].nrows();
        let mut fused = Array2::zeros((n, self.cfg.hidden));
        let mut projected = Vec::with_capacity(sampled.len());
        let mut proj_caches = Vec::with_capacity(sampled.len());
        for ((&k, x), &w) in sampled.iter().zip(xs).zip(&weights) {
            let p = self.projectors[k].as_ref().expect("projector allocated");
            let (out, cache) = mlp_forward(p, x.view(), self.cfg.activation, mode.reborrow())?;
            if out.nrows() != n {
                return Err(Error::Shape("feature matrices disagree on row count".into()));
            }
            fused.scaled_add(w, &out);
            projected.push(out);
            proj_caches.push(cache);
        }
        let (logits, cls_cache) = mlp_forward(&self.classifier, fused.view(), self.cfg.activation, mode)?;
        Ok(SuperForward { sampled: sampled.to_vec(), weights, projected, proj_caches, cls_cache, logits })
    }

    /// Gradients of the loss whose logit gradient is `dlogits`. Projector
    /// gradients are only formed when `with_projectors` is set.
    pub fn backward(&self, fw: &SuperForward<F>, dlogits: ArrayView2<'_, F>, with_projectors: bool) -> Result<SuperGrads<F>> {
        let (classifier, dfused) = mlp_backward(&self.classifier, &fw.cls_cache, dlogits, true)?;
        let dfused = dfused.expect("input gradient requested");
        let dw: Vec<F> = fw.projected.iter().map(|x| (&dfused * x).sum()).collect();
        let mean = fw.weights.iter().zip(&dw).fold(F::zero(), |a, (&w, &d)| a + w * d);
        let mut alpha = Array1::zeros(self.alpha.len());
        for ((&k, &w), &d) in fw.sampled.iter().zip(&fw.weights).zip(&dw) {
            alpha[k] = w * (d - mean);
        }
        let mut projectors = Vec::new();
        if with_projectors {
            for ((&k, cache), &w) in fw.sampled.iter().zip(&fw.proj_caches).zip(&fw.weights) {
                let p = self.projectors[k].as_ref().expect("projector allocated");
                let up = dfused.mapv(|v| v * w);
                projectors.push(mlp_backward(p, cache, up.view(), false)?.0);
            }
        }
        Ok(SuperGrads { classifier, projectors, alpha })
    }

    /// One `ω` update on `target`; `α` is left untouched. Returns the loss.
    pub fn omega_step(
        &mut self,
        xs: &[ArrayView2<'_, F>],
        sampled: &[usize],
        target: &LossTarget,
        dropout: &mut RngStream,
    ) -> Result<f64> {
        let rate = self.cfg.dropout;
        let fw = self.forward(xs, sampled, Mode::Train { dropout: rate, rng: dropout })?;
        let (loss, dlogits) = target.loss(fw.logits.view())?;
        let g = self.backward(&fw, dlogits.view(), true)?;
        let finite = |p: &MlpGrads<F>| p.views().iter().all(|v| v.iter().all(|x| x.is_finite()));
        if !finite(&g.classifier) || !g.projectors.iter().all(finite) {
            return Err(Error::NonFinite("non-finite weight gradient during search".into()));
        }
        self.cls_adam.step(&mut self.classifier.views_mut(), &g.classifier.views())?;
        for (&k, pg) in sampled.iter().zip(&g.projectors) {
            let p = self.projectors[k].as_mut().expect("projector allocated");
            let st = self.proj_adam[k].as_mut().expect("optimizer state allocated");
            st.step(&mut p.views_mut(), &pg.views())?;
        }
        Ok(loss.to_f64().unwrap())
    }

    /// One `α` update on `target`; `ω` is left untouched. Returns the loss.
    pub fn alpha_step(
        &mut self,
        xs: &[ArrayView2<'_, F>],
        sampled: &[usize],
        target: &LossTarget,
        dropout: &mut RngStream,
    ) -> Result<f64> {
        let rate = self.cfg.dropout;
        let fw = self.forward(xs, sampled, Mode::Train { dropout: rate, rng: dropout })?;
        let (loss, dlogits) = target.loss(fw.logits.view())?;
        let g = self.backward(&fw, dlogits.view(), false)?;
        self.alpha_adam.step(&mut [self.alpha.view_mut().into_dyn()], &[g.alpha.view().into_dyn()])?;
        Ok(loss.to_f64().unwrap())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub val: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchReport {
    pub seed: u64,
    /// Candidate labels in candidate order.
    pub paths: Vec<String>,
    pub alpha: Vec<f64>,
    pub strength: Vec<f64>,
    /// 1-based rank of each candidate by `α`.
    pub rank: Vec<usize>,
    pub trace: Vec<EpochLoss>,
    /// Selection metric on the validation split after the last epoch.
    pub val_metric: f64,
}

impl SearchReport {
    pub fn new(seed: u64, paths: Vec<String>, alpha: Vec<f64>, trace: Vec<EpochLoss>, val_metric: f64) -> Self {
        let strength = path_strengths(&alpha);
        let order = top_m_indices(&alpha, &paths, alpha.len());
        let mut rank = vec![0; alpha.len()];
        for (r, &k) in order.iter().enumerate() {
            rank[k] = r + 1;
        }
        Self { seed, paths, alpha, strength, rank, trace, val_metric }
    }

    /// Candidate indices in rank order.
    pub fn ranked(&self) -> Vec<usize> {
        top_m_indices(&self.alpha, &self.paths, self.alpha.len())
    }

    /// `path, alpha, strength, rank` rows in rank order.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("# path\talpha\tstrength\trank\n");
        for k in self.ranked() {
            s.push_str(&format!("{}\t{}\t{}\t{}\n", self.paths[k], self.alpha[k], self.strength[k], self.rank[k]));
        }
        s
    }

    pub fn trace_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for e in &self.trace {
            s.push_str(&format!("{},{},{}\n", e.epoch, e.train, e.val));
        }
        s
    }
}

/// Labels of the `m` paths with the largest `α`, best first.
pub fn derive_top_m(report: &SearchReport, m: usize) -> Vec<String> {
    top_m_indices(&report.alpha, &report.paths, m).into_iter().map(|k| report.paths[k].clone()).collect()
}

/// Callback receiving the epoch, the phase just reached and the net.
pub type Observer<'a, F> = &'a mut dyn FnMut(usize, Phase, &SuperNet<F>);

/// Runs one search. `observer` sees the net around each phase of each epoch.
pub fn train_supernet<F: NdFloat>(
    feats: &PathFeatureSet,
    labels: &Labels,
    splits: &[Split],
    cfg: &SearchConfig,
    seed: u64,
    mut observer: Option<Observer<'_, F>>,
) -> Result<SearchReport> {
    if feats.is_empty() {
        return Err(Error::InvalidArgument("no candidate paths".into()));
    }
    let mut train = SplitData::<F>::for_split(feats, labels, splits, Split::Train);
    let mut val = SplitData::<F>::for_split(feats, labels, splits, Split::Val);
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument("search needs nonempty train and val splits".into()));
    }
    let in_dims = (0..feats.len()).map(|k| feats.matrix(k).cols()).collect();
    let mut net = SuperNet::<F>::new(in_dims, labels.num_classes(), cfg, seed)?;
    let mut sampler = RngStream::new(seed, Purpose::Sample);
    let mut dropout = RngStream::new(seed, Purpose::Dropout);
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut last = Vec::new();
    for epoch in 0..cfg.epochs {
        if let Some(f) = observer.as_mut() {
            f(epoch, Phase::EpochStart, &net);
        }
        let s = sample_paths(feats.len(), cfg.m, &mut sampler)?;
        train.ensure(&s);
        val.ensure(&s);
        if let Some(f) = observer.as_mut() {
            f(epoch, Phase::BeforeOmega, &net);
        }
        let tl = net.omega_step(&train.views(&s), &s, train.target(), &mut dropout)?;
        if let Some(f) = observer.as_mut() {
            f(epoch, Phase::AfterOmega, &net);
        }
        let vl = net.alpha_step(&val.views(&s), &s, val.target(), &mut dropout)?;
        if let Some(f) = observer.as_mut() {
            f(epoch, Phase::AfterAlpha, &net);
        }
        trace.push(EpochLoss { epoch, train: tl, val: vl });
        last = s;
    }
    let val_metric = if last.is_empty() {
        0.0
    } else {
        let fw = net.forward(&val.views(&last), &last, Mode::Eval)?;
        evaluate(&val.target().predict(fw.logits.view()), val.target())?.selection_metric()
    };
    let alpha = net.alpha.iter().map(|a| a.to_f64().unwrap()).collect();
    let paths = feats.paths().iter().map(|p| p.label().to_string()).collect();
    Ok(SearchReport::new(seed, paths, alpha, trace, val_metric))
}

/// Index of the largest metric; the earliest wins ties.
pub fn select_best(metrics: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &m) in metrics.iter().enumerate() {
        if best.is_none_or(|b| m > metrics[b]) {
            best = Some(i);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiSeedOutcome {
    pub reports: Vec<SearchReport>,
    pub best: usize,
}

impl MultiSeedOutcome {
    pub fn chosen(&self) -> &SearchReport {
        &self.reports[self.best]
    }
}

/// Runs one search per seed, `threads` at a time, and keeps the run with the
/// best validation metric. Results do not depend on `threads`.
pub fn multi_seed_search<F: NdFloat>(
    feats: &PathFeatureSet,
    labels: &Labels,
    splits: &[Split],
    cfg: &SearchConfig,
    seeds: &[u64],
    threads: usize,
) -> Result<MultiSeedOutcome> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    let run = |&seed: &u64| train_supernet::<F>(feats, labels, splits, cfg, seed, None);
    let reports = crate::parallel::map_ordered(seeds, threads, run)?;
    let metrics: Vec<f64> = reports.iter().map(|r| r.val_metric).collect();
    let best = select_best(&metrics).expect("nonempty");
    Ok(MultiSeedOutcome { reports, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::Provenance;
    use crate::hin::{fixtures, FeatureMatrix};
    use crate::metapath::enumerate_metapaths;
    use ndarray::Array2;

    fn rand_matrix(r: usize, c: usize, rng: &mut RngStream) -> Array2<f64> {
        Array2::from_shape_simple_fn((r, c), || rng.unit_f64() * 2.0 - 1.0)
    }

    #[test]
    fn full_sample_is_everything() {
        let mut r = RngStream::new(0, Purpose::Sample);
        assert_eq!(sample_paths(6, 6, &mut r).unwrap(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(sample_paths(3, 9, &mut r).unwrap(), vec![0, 1, 2]);
        assert!(sample_paths(3, 0, &mut r).is_err());
    }

    #[test]
    fn sampling_advances_and_replays() {
        let mut a = RngStream::new(7, Purpose::Sample);
        let draws: Vec<_> = (0..10).map(|_| sample_paths(20, 4, &mut a).unwrap()).collect();
        assert!(draws.windows(2).any(|w| w[0] != w[1]));
        let mut b = RngStream::new(7, Purpose::Sample);
        let again: Vec<_> = (0..10).map(|_| sample_paths(20, 4, &mut b).unwrap()).collect();
        assert_eq!(draws, again);
        assert!(draws.iter().all(|s| s.len() == 4 && s.windows(2).all(|w| w[0] < w[1])));
    }

    #[test]
    fn top_m_sorts_and_breaks_ties_by_label() {
        assert_eq!(top_m_indices(&[3.0, 1.0, 2.0], &["a", "b", "c"], 2), vec![0, 2]);
        assert_eq!(top_m_indices(&[1.0, 1.0, 0.0], &["APV", "APA", "A"], 1), vec![1]);
        assert_eq!(top_m_indices(&[0.0; 3], &["c", "b", "a"], 3), vec![2, 1, 0]);
    }

    #[test]
    fn report_ranks_and_strengths() {
        let r = SearchReport::new(1, vec!["A".into(), "AP".into(), "APV".into()], vec![3.0, 1.0, 2.0], vec![], 0.0);
        assert_eq!(r.rank, vec![1, 3, 2]);
        assert!((r.strength.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(derive_top_m(&r, 2), vec!["A", "APV"]);
        assert_eq!(derive_top_m(&r, 3).len(), 3);
        let shifted = SearchReport::new(1, r.paths.clone(), r.alpha.iter().map(|a| a + 100.0).collect(), vec![], 0.0);
        assert_eq!(shifted.rank, r.rank);
    }

    #[test]
    fn select_best_is_argmax() {
        assert_eq!(select_best(&[0.5, 0.9, 0.7]), Some(1));
        assert_eq!(select_best(&[0.5, 0.5]), Some(0));
        assert_eq!(select_best(&[]), None);
    }

    fn net(k: usize, in_dim: usize, hidden: usize, classes: usize) -> SuperNet<f64> {
        let cfg = SearchConfig { hidden, ..SearchConfig::default() };
        SuperNet::new(vec![in_dim; k], classes, &cfg, 3).unwrap()
    }

    #[test]
    fn single_sampled_path_has_unit_weight() {
        let mut n = net(4, 3, 5, 2);
        n.alpha_mut()[2] = 7.5;
        let mut r = RngStream::new(1, Purpose::Synth);
        let x = rand_matrix(6, 3, &mut r);
        let fw = n.forward(&[x.view()], &[2], Mode::Eval).unwrap();
        assert_eq!(fw.weights(), &[1.0]);
        let (h, _) = mlp_forward(n.projector(2).unwrap(), x.view(), Activation::Relu, Mode::Eval).unwrap();
        let (y, _) = mlp_forward(n.classifier(), h.view(), Activation::Relu, Mode::Eval).unwrap();
        assert_eq!(fw.logits, y);
    }

    #[test]
    fn equal_alpha_gives_equal_weights() {
        let mut n = net(5, 2, 3, 2);
        let mut r = RngStream::new(2, Purpose::Synth);
        let xs: Vec<_> = (0..3).map(|_| rand_matrix(4, 2, &mut r)).collect();
        let views: Vec<_> = xs.iter().map(|x| x.view()).collect();
        let fw = n.forward(&views, &[0, 2, 4], Mode::Eval).unwrap();
        for w in fw.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-9);
        }
        assert_eq!(n.allocated(), 3);
    }

    #[test]
    fn empty_sample_rejected() {
        let mut n = net(2, 2, 3, 2);
        assert!(n.forward(&[], &[], Mode::Eval).is_err());
    }

    fn tiny_features(k: usize, n: usize, f: usize, seed: u64) -> PathFeatureSet {
        let schema = fixtures::dblp();
        let paths = enumerate_metapaths(&schema, 3, &[]).unwrap().into_iter().take(k).collect();
        let mut r = RngStream::new(seed, Purpose::Synth);
        let mats = (0..k).map(|_| FeatureMatrix::new(rand_matrix(n, f, &mut r)).unwrap()).collect();
        let prov = Provenance { dataset_hash: "x".into(), max_hop: 3, normalization: "row".into() };
        PathFeatureSet::new(paths, mats, prov).unwrap()
    }

    fn toy_split(n: usize) -> (Labels, Vec<Split>) {
        let labels = Labels::single((0..n).map(|i| i % 3).collect());
        let splits = (0..n).map(|i| if i % 3 == 0 { Split::Val } else { Split::Train }).collect();
        (labels, splits)
    }

    #[test]
    fn search_is_deterministic_and_locality_holds() {
        let feats = tiny_features(8, 30, 4, 1);
        let (labels, splits) = toy_split(30);
        let cfg = SearchConfig { m: 2, hidden: 8, epochs: 3, ..SearchConfig::default() };
        let mut seen = [false; 8];
        let mut obs = |_: usize, _: Phase, n: &SuperNet<f64>| {
            for (k, s) in seen.iter_mut().enumerate() {
                *s |= n.projector(k).is_some();
            }
        };
        let a = train_supernet::<f64>(&feats, &labels, &splits, &cfg, 5, Some(&mut obs)).unwrap();
        let b = train_supernet::<f64>(&feats, &labels, &splits, &cfg, 5, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trace.len(), 3);
        for (k, s) in seen.iter().enumerate() {
            if !s {
                assert_eq!(a.alpha[k], 0.0);
            }
        }
        assert!(seen.iter().any(|s| !s));
    }

    #[test]
    fn one_seed_equals_single_run_and_threads_do_not_matter() {
        let feats = tiny_features(6, 30, 4, 2);
        let (labels, splits) = toy_split(30);
        let cfg = SearchConfig { m: 3, hidden: 8, epochs: 4, ..SearchConfig::default() };
        let single = train_supernet::<f64>(&feats, &labels, &splits, &cfg, 11, None).unwrap();
        let multi = multi_seed_search::<f64>(&feats, &labels, &splits, &cfg, &[11], 1).unwrap();
        assert_eq!(multi.chosen(), &single);
        let seq = multi_seed_search::<f32>(&feats, &labels, &splits, &cfg, &[1, 2, 3], 1).unwrap();
        let par = multi_seed_search::<f32>(&feats, &labels, &splits, &cfg, &[1, 2, 3], 3).unwrap();
        assert_eq!(seq, par);
    }
}
