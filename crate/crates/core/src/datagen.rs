//! Synthetic HINs with a planted predictive meta-path.
//!
//! End-type nodes of the planted path get a latent vector `u_v`: the one-hot
//! code of a random class plus a tiny jitter that breaks ties. Their
//! features are `s · (u_v · C) + (1 - s) · ε_v`, where `C` holds one random
//! centroid per class, `s` is the signal strength and `ε_v` is standard
//! Gaussian noise. A target's label is the argmax of its planted-path
//! aggregate of `u`. Every other feature matrix is pure noise, so the label
//! can only be read off the planted path (or another path ending at the same
//! type, which validation rules out for the declared noise paths).
//!
//! Every node receives at least one edge in both directions of every
//! relation, so each target has at least one instance of every path.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::aggregate::compute_path_features;
use crate::error::{Error, Result};
use crate::hin::{save_dataset, EdgeType, FeatureMatrix, Hin, Labels, NodeType, SchemaGraph, Split, SparseAdjacency};
use crate::metapath::{parse_path, MetaPath};
use crate::rng::{str_key, Purpose, RngStream};

/// An undirected relation, materialized as edge types `S-D` and `D-S`.
#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    pub src: String,
    pub dst: String,
    /// Mean number of `dst` neighbours per `src` node (at least one each).
    pub mean_degree: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    /// Node types by name with their counts. Letters are first characters.
    pub node_types: Vec<(String, usize)>,
    pub target: String,
    pub relations: Vec<Relation>,
    pub planted_path: String,
    pub noise_paths: Vec<String>,
    pub num_classes: usize,
    pub signal_strength: f64,
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// Targets `T` reach `C` only through `T <- A <- B <- C` within four hops;
    /// `D` hangs off `T` as a distractor.
    fn default() -> Self {
        let rel = |s: &str, d: &str| Relation { src: s.into(), dst: d.into(), mean_degree: 1.0 };
        Self {
            node_types: [("T", 2000), ("A", 1000), ("B", 500), ("C", 250), ("D", 500)]
                .iter()
                .map(|(t, n)| (t.to_string(), *n))
                .collect(),
            target: "T".into(),
            relations: vec![rel("T", "A"), rel("A", "B"), rel("B", "C"), rel("T", "D")],
            planted_path: "TABC".into(),
            noise_paths: vec!["TA".into(), "TAB".into(), "TD".into()],
            num_classes: 4,
            signal_strength: 0.9,
            feature_dim: 16,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn with_targets(mut self, n: usize) -> Self {
        if let Some(t) = self.node_types.iter_mut().find(|(name, _)| *name == self.target) {
            t.1 = n;
        }
        self
    }

    /// Line-oriented form; see [`SynthConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (name, count) in &self.node_types {
            let _ = writeln!(s, "type {name} {count}");
        }
        for r in &self.relations {
            let _ = writeln!(s, "relation {} {} {}", r.src, r.dst, r.mean_degree);
        }
        let _ = writeln!(s, "target {}", self.target);
        let _ = writeln!(s, "planted {}", self.planted_path);
        let _ = writeln!(s, "noise {}", self.noise_paths.join(","));
        let _ = writeln!(s, "classes {}", self.num_classes);
        let _ = writeln!(s, "strength {}", self.signal_strength);
        let _ = writeln!(s, "feature_dim {}", self.feature_dim);
        let _ = writeln!(s, "seed {}", self.seed);
        s
    }

    /// Reads `type <name> <count>`, `relation <src> <dst> <mean degree>`,
    /// `target`, `planted`, `noise <p1,p2,...>`, `classes`, `strength`,
    /// `feature_dim` and `seed` lines. `#` starts a comment. Keys not given
    /// keep their defaults; `type` and `relation` lines replace the default
    /// schema as a whole.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut types = Vec::new();
        let mut relations = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| Error::parse(origin, i + 1, msg);
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("not a number: {s}")));
            let int = |s: &str| s.parse::<u64>().map_err(|_| bad(&format!("not an integer: {s}")));
            match (f[0], f.len()) {
                ("type", 3) => types.push((f[1].to_string(), int(f[2])? as usize)),
                ("relation", 4) => relations.push(Relation { src: f[1].into(), dst: f[2].into(), mean_degree: num(f[3])? }),
                ("target", 2) => cfg.target = f[1].into(),
                ("planted", 2) => cfg.planted_path = f[1].into(),
                ("noise", 1) => cfg.noise_paths.clear(),
                ("noise", 2) => cfg.noise_paths = f[1].split(',').filter(|s| !s.is_empty()).map(String::from).collect(),
                ("classes", 2) => cfg.num_classes = int(f[1])? as usize,
                ("strength", 2) => cfg.signal_strength = num(f[1])?,
                ("feature_dim", 2) => cfg.feature_dim = int(f[1])? as usize,
                ("seed", 2) => cfg.seed = int(f[1])?,
                _ => return Err(bad(&format!("unrecognized line: {line}"))),
            }
        }
        if !types.is_empty() {
            cfg.node_types = types;
        }
        if !relations.is_empty() {
            cfg.relations = relations;
        }
        Ok(cfg)
    }

    pub fn schema(&self) -> Result<SchemaGraph> {
        let types = self.node_types.iter().map(|(n, c)| NodeType::new(n.clone(), *c, self.feature_dim)).collect();
        let mut edges = Vec::new();
        for r in &self.relations {
            edges.push(EdgeType::new(format!("{}-{}", r.src, r.dst), r.src.clone(), r.dst.clone()));
            edges.push(EdgeType::new(format!("{}-{}", r.dst, r.src), r.dst.clone(), r.src.clone()));
        }
        SchemaGraph::new(types, edges, self.target.clone())
    }

    fn validate(&self, schema: &SchemaGraph) -> Result<(MetaPath, Vec<MetaPath>)> {
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return Err(Error::InvalidArgument(format!("signal strength {} outside [0, 1]", self.signal_strength)));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidArgument("at least two classes are required".into()));
        }
        if self.feature_dim < self.num_classes {
            return Err(Error::InvalidArgument("feature_dim must be at least the class count".into()));
        }
        if let Some(r) = self.relations.iter().find(|r| r.src == r.dst) {
            return Err(Error::InvalidArgument(format!("relation {}-{} must join two distinct types", r.src, r.dst)));
        }
        if let Some(r) = self.relations.iter().find(|r| !(r.mean_degree >= 1.0 && r.mean_degree.is_finite())) {
            return Err(Error::InvalidArgument(format!("mean degree of {}-{} must be at least 1", r.src, r.dst)));
        }
        let planted = parse_path(&self.planted_path, schema)?;
        if planted.hop() == 0 {
            return Err(Error::invalid_path(&self.planted_path, "planted path needs at least one hop"));
        }
        let noise = self
            .noise_paths
            .iter()
            .map(|p| {
                let m = parse_path(p, schema)?;
                if m.end_type() == planted.end_type() {
                    return Err(Error::invalid_path(p, "a noise path may not end at the planted end type"));
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((planted, noise))
    }
}

/// A generated dataset with its ground truth.
#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub hin: Hin,
    pub planted: MetaPath,
    pub noise: Vec<MetaPath>,
    pub config: SynthConfig,
    /// Latent codes of the planted end type, one row per node.
    pub latent: Array2<f64>,
}

impl SynthDataset {
    /// `key\tvalue` lines recording the planted structure.
    pub fn ground_truth_tsv(&self) -> String {
        let c = &self.config;
        let noise: Vec<&str> = self.noise.iter().map(MetaPath::label).collect();
        format!(
            "planted_path\t{}\nplanted_edges\t{}\nnoise_paths\t{}\nnum_classes\t{}\nsignal_strength\t{}\nfeature_dim\t{}\nseed\t{}\n",
            self.planted.label(),
            self.planted.edge_types().join(","),
            noise.join(","),
            c.num_classes,
            c.signal_strength,
            c.feature_dim,
            c.seed
        )
    }

    /// Writes the dataset layout plus `ground_truth.tsv` and `synth.cfg`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        save_dataset(&self.hin, dir)?;
        crate::binfmt::write_atomic(&dir.join("ground_truth.tsv"), self.ground_truth_tsv().as_bytes())?;
        crate::binfmt::write_atomic(&dir.join("synth.cfg"), self.config.to_text().as_bytes())
    }
}

/// Width of the uniform jitter added to each latent one-hot code.
const JITTER: f64 = 0.25;

fn random_relation(ns: usize, nd: usize, mean_degree: f64, rng: &mut RngStream) -> Vec<(usize, usize, f64)> {
    let extra = Poisson::new(mean_degree - 1.0).ok();
    let mut edges = BTreeSet::new();
    for s in 0..ns {
        let k = 1 + extra.as_ref().map_or(0, |p| p.sample(rng) as usize);
        for d in sample(rng, nd, k.min(nd)) {
            edges.insert((s, d));
        }
    }
    let mut covered = vec![false; nd];
    for &(_, d) in &edges {
        covered[d] = true;
    }
    for (d, c) in covered.iter().enumerate() {
        if !c {
            edges.insert((rng.random_range(0..ns), d));
        }
    }
    edges.into_iter().map(|(s, d)| (s, d, 1.0)).collect()
}

fn gaussian(rows: usize, cols: usize, rng: &mut RngStream) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

/// Class centroids, redrawn until every pair is at least two noise scales apart.
fn centroids(classes: usize, dim: usize, rng: &mut RngStream) -> Array2<f64> {
    loop {
        let c = gaussian(classes, dim, rng);
        let separated = (0..classes).all(|i| {
            (i + 1..classes).all(|j| (&c.row(i) - &c.row(j)).mapv(|v| v * v).sum().sqrt() >= 2.0)
        });
        if separated {
            return c;
        }
    }
}

fn to_f32(m: Array2<f64>) -> Array2<f64> {
    m.mapv(|v| f64::from(v as f32))
}

pub fn generate_planted_hin(cfg: &SynthConfig) -> Result<SynthDataset> {
    let schema = cfg.schema()?;
    let (planted, noise) = cfg.validate(&schema)?;
    let root = RngStream::new(cfg.seed, Purpose::Synth);
    let count = |t: &str| schema.node_type(t).expect("validated").count;

    let mut adjacency = BTreeMap::new();
    for (i, r) in cfg.relations.iter().enumerate() {
        let (ns, nd) = (count(&r.src), count(&r.dst));
        if ns == 0 || nd == 0 {
            return Err(Error::InvalidArgument(format!("relation {}-{} joins an empty type", r.src, r.dst)));
        }
        let mut rng = root.derive(str_key("edges")).derive(i as u64);
        let fwd = SparseAdjacency::from_triplets(ns, nd, random_relation(ns, nd, r.mean_degree, &mut rng))?;
        adjacency.insert(format!("{}-{}", r.dst, r.src), fwd.transpose());
        adjacency.insert(format!("{}-{}", r.src, r.dst), fwd);
    }

    let end = planted.end_type().to_string();
    let n_end = count(&end);
    let mut latent_rng = root.derive(str_key("latent"));
    let mut latent = Array2::zeros((n_end, cfg.num_classes));
    for mut row in latent.rows_mut() {
        let z = latent_rng.random_range(0..cfg.num_classes);
        for (k, v) in row.iter_mut().enumerate() {
            *v = if k == z { 1.0 } else { 0.0 } + JITTER * latent_rng.unit_f64();
        }
    }

    // Labels come from the latent code aggregated along the planted path.
    let n_targets = count(&cfg.target);
    let latent_schema = {
        let types = cfg
            .node_types
            .iter()
            .map(|(n, c)| NodeType::new(n.clone(), *c, if *n == end { cfg.num_classes } else { 0 }))
            .collect();
        SchemaGraph::new(types, schema.edge_types().to_vec(), cfg.target.clone())?
    };
    let latent_hin = Hin::new(
        latent_schema,
        adjacency.clone(),
        BTreeMap::from([(end.clone(), FeatureMatrix::new(latent.clone())?)]),
        Labels::Single { classes: vec![0; n_targets], num_classes: cfg.num_classes },
        vec![Split::Train; n_targets],
    )?;
    let agg = compute_path_features(&latent_hin, &planted)?;
    let classes: Vec<usize> = agg
        .as_array()
        .axis_iter(Axis(0))
        .map(|r| r.iter().enumerate().fold(0, |b, (k, v)| if *v > r[b] { k } else { b }))
        .collect();

    let s = cfg.signal_strength;
    let mut features = BTreeMap::new();
    let cent = centroids(cfg.num_classes, cfg.feature_dim, &mut root.derive(str_key("centroids")));
    for (name, c) in &cfg.node_types {
        let mut rng = root.derive(str_key("features")).derive(str_key(name));
        let eps = gaussian(*c, cfg.feature_dim, &mut rng);
        let x = if *name == end { latent.dot(&cent) * s + eps * (1.0 - s) } else { eps };
        features.insert(name.clone(), FeatureMatrix::new(to_f32(x))?);
    }

    let mut order: Vec<usize> = (0..n_targets).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut root.derive(str_key("splits")));
    let n_train = (n_targets as f64 * 0.24).round() as usize;
    let n_val = (n_targets as f64 * 0.06).round() as usize;
    let mut splits = vec![Split::Test; n_targets];
    for (pos, &node) in order.iter().enumerate() {
        if pos < n_train {
            splits[node] = Split::Train;
        } else if pos < n_train + n_val {
            splits[node] = Split::Val;
        }
    }

    let hin = Hin::new(
        schema,
        adjacency,
        features,
        Labels::Single { classes, num_classes: cfg.num_classes },
        splits,
    )?;
    Ok(SynthDataset { hin, planted, noise, config: cfg.clone(), latent })
}
