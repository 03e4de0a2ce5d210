//! The final classifier over the derived paths.
//!
//! Each selected path gets its own projector; projections are concatenated
//! in derived order and fed to a classifier MLP. Training keeps the
//! checkpoint with the best validation metric and stops after `patience`
//! epochs without strict improvement.

use ndarray::{concatenate, s, Array2, ArrayD, ArrayView2, Axis, NdFloat};

use crate::aggregate::PathFeatureSet;
use crate::batch::SplitData;
use crate::binfmt::encode_params;
use crate::error::{Error, Result};
use crate::hin::{Labels, Split};
use crate::metrics::{evaluate, mean_std, EvalResult};
use crate::neural::{mlp_backward, mlp_forward, Activation, AdamConfig, AdamState, MlpCache, MlpGrads, MlpParams, Mode};
use crate::rng::{str_key, Purpose, RngStream};

#[derive(Clone, Debug, PartialEq)]
pub struct TargetConfig {
    pub hidden: usize,
    pub adam: AdamConfig,
    pub dropout: f64,
    pub activation: Activation,
    pub patience: usize,
    pub max_epochs: usize,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            hidden: 512,
            adam: AdamConfig::default(),
            dropout: 0.5,
            activation: Activation::Relu,
            patience: 30,
            max_epochs: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetNet<F> {
    pub projectors: Vec<MlpParams<F>>,
    pub classifier: MlpParams<F>,
    activation: Activation,
}

pub struct TargetForward<F> {
    proj_caches: Vec<MlpCache<F>>,
    cls_cache: MlpCache<F>,
    pub logits: Array2<F>,
}

pub struct TargetGrads<F> {
    pub projectors: Vec<MlpGrads<F>>,
    pub classifier: MlpGrads<F>,
}

impl<F: NdFloat> TargetNet<F> {
    pub fn new(in_dims: &[usize], hidden: usize, num_classes: usize, activation: Activation, seed: u64) -> Result<Self> {
        if in_dims.is_empty() {
            return Err(Error::InvalidArgument("target net needs at least one path".into()));
        }
        if hidden == 0 || num_classes == 0 {
            return Err(Error::InvalidArgument("hidden size and class count must be positive".into()));
        }
        let root = RngStream::new(seed, Purpose::Init);
        let proj_root = root.derive(str_key("target-projector"));
        let projectors = in_dims
            .iter()
            .enumerate()
            .map(|(i, &d)| MlpParams::xavier(d, hidden, hidden, &mut proj_root.derive(i as u64)))
            .collect();
        let mut cls_rng = root.derive(str_key("target-classifier"));
        let classifier = MlpParams::xavier(in_dims.len() * hidden, hidden, num_classes, &mut cls_rng);
        Ok(Self { projectors, classifier, activation })
    }

    pub fn hidden(&self) -> usize {
        self.classifier.hidden()
    }

    pub fn num_params(&self) -> usize {
        self.classifier.num_params() + self.projectors.iter().map(MlpParams::num_params).sum::<usize>()
    }

    /// `MLP(‖_k MLP_k(X_k))` with `xs` in projector order.
    pub fn forward(&self, xs: &[ArrayView2<'_, F>], mut mode: Mode<'_>) -> Result<TargetForward<F>> {
        if xs.len() != self.projectors.len() {
            return Err(Error::Shape(format!("{} feature matrices for {} paths", xs.len(), self.projectors.len())));
        }
        let mut outs = Vec::with_capacity(xs.len());
        let mut proj_caches = Vec::with_capacity(xs.len());
        for (p, x) in self.projectors.iter().zip(xs) {
            let (o, c) = mlp_forward(p, x.view(), self.activation, mode.reborrow())?;
            outs.push(o);
            proj_caches.push(c);
        }
        let views: Vec<_> = outs.iter().map(|o| o.view()).collect();
        let fused = concatenate(Axis(1), &views).map_err(|e| Error::Shape(e.to_string()))?;
        let (logits, cls_cache) = mlp_forward(&self.classifier, fused.view(), self.activation, mode)?;
        Ok(TargetForward { proj_caches, cls_cache, logits })
    }

    pub fn backward(&self, fw: &TargetForward<F>, dlogits: ArrayView2<'_, F>) -> Result<TargetGrads<F>> {
        let (classifier, dfused) = mlp_backward(&self.classifier, &fw.cls_cache, dlogits, true)?;
        let dfused = dfused.expect("input gradient requested");
        let h = self.hidden();
        let mut projectors = Vec::with_capacity(self.projectors.len());
        for (i, (p, c)) in self.projectors.iter().zip(&fw.proj_caches).enumerate() {
            let up = dfused.slice(s![.., i * h..(i + 1) * h]);
            projectors.push(mlp_backward(p, c, up, false)?.0);
        }
        Ok(TargetGrads { projectors, classifier })
    }

    /// Tensors named `projector.<i>.<w1|b1|w2|b2>` and `classifier.<...>`.
    pub fn named_tensors(&self) -> Vec<(String, ArrayD<f64>)> {
        let mut out: Vec<_> =
            self.projectors.iter().enumerate().flat_map(|(i, p)| p.named_tensors(&format!("projector.{i}"))).collect();
        out.extend(self.classifier.named_tensors("classifier"));
        out
    }

    /// The checkpoint in parameter-file form.
    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        encode_params(&self.named_tensors())
    }
}

/// Tracks the best metric and decides when to stop.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::NEG_INFINITY, best_epoch: None, since_best: 0 }
    }

    /// Records the metric of `epoch`; returns (improved, stop).
    pub fn observe(&mut self, epoch: usize, metric: f64) -> (bool, bool) {
        let improved = metric > self.best;
        if improved {
            self.best = metric;
            self.best_epoch = Some(epoch);
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        (improved, self.since_best >= self.patience)
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<F> {
    /// Parameters at the best validation epoch.
    pub net: TargetNet<F>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub val: EvalResult,
    pub test: EvalResult,
    pub trace: Vec<EpochRecord>,
}

impl<F> TrainOutcome<F> {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_metric\n");
        for r in &self.trace {
            s.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_metric));
        }
        s
    }
}

fn all_finite<F: NdFloat>(g: &TargetGrads<F>) -> bool {
    g.projectors.iter().chain(std::iter::once(&g.classifier)).all(|p| p.views().iter().all(|v| v.iter().all(|x| x.is_finite())))
}

/// Optimizer state for every tensor of a target net.
struct TargetOptimizer<F> {
    projectors: Vec<AdamState<F>>,
    classifier: AdamState<F>,
}

impl<F: NdFloat> TargetOptimizer<F> {
    fn new(net: &TargetNet<F>, cfg: AdamConfig) -> Self {
        Self {
            projectors: net.projectors.iter().map(|p| AdamState::new(cfg, &p.shapes())).collect(),
            classifier: AdamState::new(cfg, &net.classifier.shapes()),
        }
    }

    fn step(&mut self, net: &mut TargetNet<F>, g: &TargetGrads<F>) -> Result<()> {
        if !all_finite(g) {
            return Err(Error::NonFinite("non-finite gradient while training the target net".into()));
        }
        for ((st, p), pg) in self.projectors.iter_mut().zip(&mut net.projectors).zip(&g.projectors) {
            st.step(&mut p.views_mut(), &pg.views())?;
        }
        self.classifier.step(&mut net.classifier.views_mut(), &g.classifier.views())
    }
}

fn eval_split<F: NdFloat>(net: &TargetNet<F>, data: &SplitData<'_, F>, all: &[usize]) -> Result<EvalResult> {
    let fw = net.forward(&data.views(all), Mode::Eval)?;
    evaluate(&data.target().predict(fw.logits.view()), data.target())
}

/// Trains on every path of `feats`, in order, with early stopping on the
/// validation split. Test metrics come from the best checkpoint.
pub fn train_target<F: NdFloat>(
    feats: &PathFeatureSet,
    labels: &Labels,
    splits: &[Split],
    cfg: &TargetConfig,
    seed: u64,
) -> Result<TrainOutcome<F>> {
    train_target_observed(feats, labels, splits, cfg, seed, None)
}

/// [`train_target`] with a callback after every epoch.
pub fn train_target_observed<F: NdFloat>(
    feats: &PathFeatureSet,
    labels: &Labels,
    splits: &[Split],
    cfg: &TargetConfig,
    seed: u64,
    mut on_epoch: Option<&mut dyn FnMut(usize)>,
) -> Result<TrainOutcome<F>> {
    let all: Vec<usize> = (0..feats.len()).collect();
    let mut train = SplitData::<F>::for_split(feats, labels, splits, Split::Train);
    let mut val = SplitData::<F>::for_split(feats, labels, splits, Split::Val);
    let mut test = SplitData::<F>::for_split(feats, labels, splits, Split::Test);
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument("training needs nonempty train and val splits".into()));
    }
    for d in [&mut train, &mut val, &mut test] {
        d.ensure(&all);
    }
    let in_dims: Vec<usize> = all.iter().map(|&k| feats.matrix(k).cols()).collect();
    let mut net = TargetNet::<F>::new(&in_dims, cfg.hidden, labels.num_classes(), cfg.activation, seed)?;
    let mut opt = TargetOptimizer::new(&net, cfg.adam);
    let mut dropout = RngStream::new(seed, Purpose::Dropout);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = net.clone();
    let mut trace = Vec::new();
    for epoch in 0..cfg.max_epochs {
        let fw = net.forward(&train.views(&all), Mode::Train { dropout: cfg.dropout, rng: &mut dropout })?;
        let (loss, dlogits) = train.target().loss(fw.logits.view())?;
        let g = net.backward(&fw, dlogits.view())?;
        opt.step(&mut net, &g)?;
        let metric = eval_split(&net, &val, &all)?.selection_metric();
        trace.push(EpochRecord { epoch, train_loss: loss.to_f64().unwrap(), val_metric: metric });
        let (improved, stop) = stopper.observe(epoch, metric);
        if improved {
            best = net.clone();
        }
        if let Some(f) = on_epoch.as_mut() {
            f(epoch);
        }
        if stop {
            break;
        }
    }
    let val_result = eval_split(&best, &val, &all)?;
    let test_result = eval_split(&best, &test, &all)?;
    Ok(TrainOutcome {
        net: best,
        best_epoch: stopper.best_epoch().unwrap_or(0),
        epochs_run: trace.len(),
        val: val_result,
        test: test_result,
        trace,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum AblationMode {
    /// Every candidate except the named ones.
    Drop(Vec<String>),
    /// Only the named candidates, in the given order.
    Keep(Vec<String>),
}

impl AblationMode {
    pub fn name(&self) -> &'static str {
        match self {
            AblationMode::Drop(_) => "drop",
            AblationMode::Keep(_) => "keep",
        }
    }

    pub fn named(&self) -> &[String] {
        match self {
            AblationMode::Drop(p) | AblationMode::Keep(p) => p,
        }
    }

    /// Candidate indices the mode leaves in play.
    pub fn select(&self, feats: &PathFeatureSet) -> Result<Vec<usize>> {
        let named = feats.indices_of(self.named())?;
        let chosen = match self {
            AblationMode::Drop(_) => (0..feats.len()).filter(|k| !named.contains(k)).collect(),
            AblationMode::Keep(_) => named,
        };
        if chosen.is_empty() {
            return Err(Error::InvalidArgument("ablation leaves no paths".into()));
        }
        Ok(chosen)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub mode: AblationMode,
    /// Paths actually trained on.
    pub used: Vec<String>,
    pub accuracy: (f64, f64),
    pub macro_f1: (f64, f64),
    pub micro_f1: (f64, f64),
    pub runs: Vec<EvalResult>,
}

impl AblationRow {
    /// `mode, named paths, macro, micro, accuracy`, each metric `mean±std`.
    pub fn tsv_row(&self) -> String {
        let f = |(m, s): (f64, f64)| format!("{m:.4}±{s:.4}");
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.mode.name(),
            self.mode.named().join(","),
            f(self.macro_f1),
            f(self.micro_f1),
            f(self.accuracy)
        )
    }
}

pub const ABLATION_HEADER: &str = "# mode\tpaths\tmacro_f1\tmicro_f1\taccuracy";

/// Trains `repeats` target nets (seeds `seed`, `seed + 1`, ...) on the paths
/// `mode` selects and summarizes their test metrics.
#[allow(clippy::too_many_arguments)]
pub fn ablate_run<F: NdFloat>(
    feats: &PathFeatureSet,
    labels: &Labels,
    splits: &[Split],
    mode: AblationMode,
    repeats: usize,
    cfg: &TargetConfig,
    seed: u64,
    threads: usize,
) -> Result<AblationRow> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    let chosen = mode.select(feats)?;
    let sub = feats.subset(&chosen);
    let seeds: Vec<u64> = (0..repeats as u64).map(|r| seed.wrapping_add(r)).collect();
    let runs = crate::parallel::map_ordered(&seeds, threads, |&s| {
        train_target::<F>(&sub, labels, splits, cfg, s).map(|o| o.test)
    })?;
    let col = |f: fn(&EvalResult) -> f64| mean_std(&runs.iter().map(f).collect::<Vec<_>>());
    Ok(AblationRow {
        used: sub.paths().iter().map(|p| p.label().to_string()).collect(),
        accuracy: col(|r| r.accuracy),
        macro_f1: col(|r| r.macro_f1),
        micro_f1: col(|r| r.micro_f1),
        mode,
        runs,
    })
}
