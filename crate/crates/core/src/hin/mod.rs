//! Typed heterogeneous graph: schema, per-edge-type adjacency, per-node-type
//! features, labels and splits.

mod io;
mod sparse;
mod transform;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ndarray::{Array2, ArrayView2};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use io::{load_dataset, load_schema, save_dataset};
pub use sparse::{reverse_adjacency, row_normalize, SparseAdjacency};
pub use transform::{sparsify_by_in_degree_cap, synth_features_for_featureless};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeType {
    pub name: String,
    pub count: usize,
    pub feature_dim: usize,
    /// Single-letter alias used in meta-path strings.
    pub letter: char,
}

impl NodeType {
    pub fn new(name: impl Into<String>, count: usize, feature_dim: usize) -> Self {
        let name = name.into();
        let letter = name.chars().next().map(|c| c.to_ascii_uppercase()).unwrap_or('?');
        Self { name, count, feature_dim, letter }
    }

    pub fn with_letter(mut self, letter: char) -> Self {
        self.letter = letter;
        self
    }
}

/// A directed relation. Messages flow from `src` nodes to `dst` nodes, so a
/// meta-path step `dst <- src` uses this edge type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeType {
    pub name: String,
    pub src: String,
    pub dst: String,
}

impl EdgeType {
    pub fn new(name: impl Into<String>, src: impl Into<String>, dst: impl Into<String>) -> Self {
        Self { name: name.into(), src: src.into(), dst: dst.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemaGraph {
    node_types: Vec<NodeType>,
    edge_types: Vec<EdgeType>,
    target: String,
    /// Edge types that win letter-pair ambiguities when parsing path strings.
    preferred: Vec<String>,
    multi_label: bool,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || matches!(c, '/' | '\\' | ',' | '[' | ']'))
}

impl SchemaGraph {
    pub fn new(node_types: Vec<NodeType>, edge_types: Vec<EdgeType>, target: impl Into<String>) -> Result<Self> {
        let schema =
            Self { node_types, edge_types, target: target.into(), preferred: Vec::new(), multi_label: false };
        schema.validate()?;
        Ok(schema)
    }

    pub fn with_preferred(mut self, edge: impl Into<String>) -> Result<Self> {
        self.preferred.push(edge.into());
        self.validate()?;
        Ok(self)
    }

    pub fn with_multi_label(mut self, multi: bool) -> Self {
        self.multi_label = multi;
        self
    }

    fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        let mut letters = BTreeSet::new();
        for t in &self.node_types {
            if !valid_name(&t.name) {
                return Err(Error::Schema(format!("invalid node type name {:?}", t.name)));
            }
            if !names.insert(t.name.as_str()) {
                return Err(Error::Schema(format!("duplicate node type {}", t.name)));
            }
            if !t.letter.is_alphanumeric() || !letters.insert(t.letter) {
                return Err(Error::Schema(format!("letter {:?} of node type {} is invalid or reused", t.letter, t.name)));
            }
        }
        let mut edges = BTreeSet::new();
        for e in &self.edge_types {
            if !valid_name(&e.name) {
                return Err(Error::Schema(format!("invalid edge type name {:?}", e.name)));
            }
            if !edges.insert(e.name.as_str()) {
                return Err(Error::Schema(format!("duplicate edge type {}", e.name)));
            }
            for end in [&e.src, &e.dst] {
                if !names.contains(end.as_str()) {
                    return Err(Error::Schema(format!("edge type {} references undeclared node type {end}", e.name)));
                }
            }
        }
        if !names.contains(self.target.as_str()) {
            return Err(Error::Schema(format!("target type {} is not declared", self.target)));
        }
        let mut pairs = BTreeSet::new();
        for p in &self.preferred {
            let e = self
                .edge_type(p)
                .ok_or_else(|| Error::Schema(format!("preferred edge type {p} is not declared")))?;
            if !pairs.insert((e.dst.as_str(), e.src.as_str())) {
                return Err(Error::Schema(format!("two preferred edge types for {} <- {}", e.dst, e.src)));
            }
        }
        Ok(())
    }

    pub fn node_types(&self) -> &[NodeType] {
        &self.node_types
    }

    pub fn edge_types(&self) -> &[EdgeType] {
        &self.edge_types
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn target_type(&self) -> &NodeType {
        self.node_type(&self.target).expect("validated")
    }

    pub fn multi_label(&self) -> bool {
        self.multi_label
    }

    pub fn preferred(&self) -> &[String] {
        &self.preferred
    }

    pub fn node_type(&self, name: &str) -> Option<&NodeType> {
        self.node_types.iter().find(|t| t.name == name)
    }

    pub fn node_type_by_letter(&self, letter: char) -> Option<&NodeType> {
        self.node_types.iter().find(|t| t.letter == letter)
    }

    pub fn edge_type(&self, name: &str) -> Option<&EdgeType> {
        self.edge_types.iter().find(|e| e.name == name)
    }

    /// Edge types usable for the step `dst <- src`, in declaration order.
    pub fn edges_between<'a>(&'a self, dst: &'a str, src: &'a str) -> impl Iterator<Item = &'a EdgeType> + 'a {
        self.edge_types.iter().filter(move |e| e.dst == dst && e.src == src)
    }

    /// Edge types whose destination is `dst`, i.e. every step out of `dst`.
    pub fn edges_into<'a>(&'a self, dst: &'a str) -> impl Iterator<Item = &'a EdgeType> + 'a {
        self.edge_types.iter().filter(move |e| e.dst == dst)
    }

    pub(crate) fn set_feature_dim(&mut self, name: &str, dim: usize) {
        if let Some(t) = self.node_types.iter_mut().find(|t| t.name == name) {
            t.feature_dim = dim;
        }
    }

    /// The `schema.tsv` rendering.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for t in &self.node_types {
            s.push_str(&format!("nodetype\t{}\t{}\t{}\t{}\n", t.name, t.count, t.feature_dim, t.letter));
        }
        for e in &self.edge_types {
            s.push_str(&format!("edgetype\t{}\t{}\t{}\n", e.name, e.src, e.dst));
        }
        s.push_str(&format!("target\t{}\n", self.target));
        for p in &self.preferred {
            s.push_str(&format!("prefer\t{p}\n"));
        }
        if self.multi_label {
            s.push_str("labels\tmulti\n");
        }
        s
    }
}

/// Dense row-major feature matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix(Array2<f64>);

impl FeatureMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if let Some(offset) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature matrix entry {offset}")));
        }
        Ok(Self(data))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(Array2::zeros((rows, cols)))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    /// Rounds every entry through `f32`, the on-disk precision.
    pub fn round_to_f32(&self) -> Self {
        Self(self.0.mapv(|v| f64::from(v as f32)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Labels {
    Single { classes: Vec<usize>, num_classes: usize },
    Multi { bits: Vec<Vec<bool>>, num_classes: usize },
}

impl Labels {
    pub fn single(classes: Vec<usize>) -> Self {
        let num_classes = classes.iter().max().map_or(0, |m| m + 1);
        Labels::Single { classes, num_classes }
    }

    pub fn len(&self) -> usize {
        match self {
            Labels::Single { classes, .. } => classes.len(),
            Labels::Multi { bits, .. } => bits.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Labels::Single { num_classes, .. } | Labels::Multi { num_classes, .. } => *num_classes,
        }
    }

    pub fn is_multi(&self) -> bool {
        matches!(self, Labels::Multi { .. })
    }

    pub fn class_of(&self, node: usize) -> Option<usize> {
        match self {
            Labels::Single { classes, .. } => classes.get(node).copied(),
            Labels::Multi { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" | "valid" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A validated heterogeneous information network. Immutable after
/// construction; transformations return new values.
#[derive(Clone, Debug, PartialEq)]
pub struct Hin {
    schema: SchemaGraph,
    adjacency: BTreeMap<String, SparseAdjacency>,
    features: BTreeMap<String, FeatureMatrix>,
    labels: Labels,
    splits: Vec<Split>,
}

impl Hin {
    pub fn new(
        schema: SchemaGraph,
        adjacency: BTreeMap<String, SparseAdjacency>,
        features: BTreeMap<String, FeatureMatrix>,
        labels: Labels,
        splits: Vec<Split>,
    ) -> Result<Self> {
        for e in schema.edge_types() {
            let a = adjacency
                .get(&e.name)
                .ok_or_else(|| Error::Shape(format!("no adjacency for edge type {}", e.name)))?;
            let rows = schema.node_type(&e.src).expect("validated").count;
            let cols = schema.node_type(&e.dst).expect("validated").count;
            if (a.rows(), a.cols()) != (rows, cols) {
                return Err(Error::Shape(format!(
                    "edge type {} is {}x{}, schema says {rows}x{cols}",
                    e.name,
                    a.rows(),
                    a.cols()
                )));
            }
        }
        if let Some(extra) = adjacency.keys().find(|k| schema.edge_type(k).is_none()) {
            return Err(Error::Shape(format!("adjacency for undeclared edge type {extra}")));
        }
        for (name, f) in &features {
            let t = schema.node_type(name).ok_or_else(|| Error::UnknownNodeType(name.clone()))?;
            if (f.rows(), f.cols()) != (t.count, t.feature_dim) {
                return Err(Error::Shape(format!(
                    "features of {name} are {}x{}, schema says {}x{}",
                    f.rows(),
                    f.cols(),
                    t.count,
                    t.feature_dim
                )));
            }
        }
        let n = schema.target_type().count;
        if labels.len() != n {
            return Err(Error::Shape(format!("{} labels for {n} target nodes", labels.len())));
        }
        if let Labels::Single { classes, num_classes } = &labels {
            if classes.iter().any(|c| c >= num_classes) {
                return Err(Error::Shape("class index out of range".into()));
            }
        }
        if let Labels::Multi { bits, num_classes } = &labels {
            if bits.iter().any(|b| b.len() != *num_classes) {
                return Err(Error::Shape("multi-label rows of unequal width".into()));
            }
        }
        if splits.len() != n {
            return Err(Error::Shape(format!("{} split assignments for {n} target nodes", splits.len())));
        }
        let schema = schema.with_multi_label(labels.is_multi());
        Ok(Self { schema, adjacency, features, labels, splits })
    }

    pub fn schema(&self) -> &SchemaGraph {
        &self.schema
    }

    pub fn adjacency(&self, edge: &str) -> Option<&SparseAdjacency> {
        self.adjacency.get(edge)
    }

    pub fn adjacencies(&self) -> &BTreeMap<String, SparseAdjacency> {
        &self.adjacency
    }

    pub fn features(&self, node_type: &str) -> Option<&FeatureMatrix> {
        self.features.get(node_type)
    }

    pub fn all_features(&self) -> &BTreeMap<String, FeatureMatrix> {
        &self.features
    }

    /// Node types without stored features.
    pub fn featureless_types(&self) -> Vec<&str> {
        self.schema
            .node_types()
            .iter()
            .filter(|t| !self.features.contains_key(&t.name))
            .map(|t| t.name.as_str())
            .collect()
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn num_targets(&self) -> usize {
        self.splits.len()
    }

    /// Target node ids assigned to `split`, ascending.
    pub fn split_nodes(&self, split: Split) -> Vec<usize> {
        self.splits.iter().enumerate().filter(|(_, s)| **s == split).map(|(i, _)| i).collect()
    }

    /// Row-normalized operator for the step `dst <- src` along `edge`
    /// (rows index `dst` nodes).
    pub fn propagator(&self, edge: &str) -> Result<SparseAdjacency> {
        let a = self
            .adjacency
            .get(edge)
            .ok_or_else(|| Error::Shape(format!("no adjacency for edge type {edge}")))?;
        a.transpose().row_normalize()
    }

    /// Returns a copy with `features` attached to `node_type`; the schema's
    /// feature dimension follows the matrix.
    pub fn with_features(&self, node_type: &str, features: FeatureMatrix) -> Result<Self> {
        let t = self.schema.node_type(node_type).ok_or_else(|| Error::UnknownNodeType(node_type.into()))?;
        if features.rows() != t.count {
            return Err(Error::Shape(format!("{} feature rows for {} nodes of {node_type}", features.rows(), t.count)));
        }
        let mut out = self.clone();
        out.schema.set_feature_dim(node_type, features.cols());
        out.features.insert(node_type.to_string(), features);
        Ok(out)
    }

    pub(crate) fn with_adjacency(&self, adjacency: BTreeMap<String, SparseAdjacency>) -> Result<Self> {
        Hin::new(self.schema.clone(), adjacency, self.features.clone(), self.labels.clone(), self.splits.clone())
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.values().map(SparseAdjacency::nnz).sum()
    }

    /// SHA-256 over a canonical encoding of the whole graph.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.schema.to_tsv().as_bytes());
        for (name, a) in &self.adjacency {
            h.update(b"adj\0");
            h.update(name.as_bytes());
            for &o in a.row_offsets() {
                h.update((o as u64).to_le_bytes());
            }
            for &c in a.col_indices() {
                h.update((c as u64).to_le_bytes());
            }
            for v in a.values() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        for (name, f) in &self.features {
            h.update(b"feat\0");
            h.update(name.as_bytes());
            h.update((f.rows() as u64).to_le_bytes());
            h.update((f.cols() as u64).to_le_bytes());
            for v in f.as_array().iter() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.update(b"labels\0");
        match &self.labels {
            Labels::Single { classes, .. } => classes.iter().for_each(|c| h.update((*c as u64).to_le_bytes())),
            Labels::Multi { bits, .. } => bits.iter().flatten().for_each(|b| h.update([u8::from(*b)])),
        }
        h.update(b"splits\0");
        for s in &self.splits {
            h.update(s.as_str().as_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Schemas of the benchmark datasets as directed edge-type lists, used for
/// enumeration fixtures. Node counts are placeholders.
pub mod fixtures {
    use super::{EdgeType, NodeType, SchemaGraph};

    fn both_ways(a: &str, b: &str) -> [EdgeType; 2] {
        [EdgeType::new(format!("{a}-{b}"), a, b), EdgeType::new(format!("{b}-{a}"), b, a)]
    }

    /// Author, paper, term, venue; the three relations stored both ways.
    pub fn dblp() -> SchemaGraph {
        let nodes = ["A", "P", "T", "V"].map(|n| NodeType::new(n, 1, 1)).to_vec();
        let edges = [both_ways("A", "P"), both_ways("P", "T"), both_ways("P", "V")].concat();
        SchemaGraph::new(nodes, edges, "A").expect("valid fixture")
    }

    /// Movie, director, actor, keyword.
    pub fn imdb() -> SchemaGraph {
        let nodes = ["M", "D", "A", "K"].map(|n| NodeType::new(n, 1, 1)).to_vec();
        let edges = [both_ways("M", "D"), both_ways("M", "A"), both_ways("M", "K")].concat();
        SchemaGraph::new(nodes, edges, "M").expect("valid fixture")
    }

    /// Paper, author, subject with citing and cited-by as two P-P edge types.
    pub fn acm() -> SchemaGraph {
        let nodes = ["P", "A", "C"].map(|n| NodeType::new(n, 1, 1)).to_vec();
        let mut edges = [both_ways("P", "A"), both_ways("P", "C")].concat();
        edges.push(EdgeType::new("cite", "P", "P"));
        edges.push(EdgeType::new("ref", "P", "P"));
        SchemaGraph::new(nodes, edges, "P").expect("valid fixture")
    }

    /// Paper, author, institution, field. `cites` is a single P-P edge type;
    /// the other three relations are stored with their reverses.
    pub fn ogbn_mag() -> SchemaGraph {
        let nodes = vec![
            NodeType::new("paper", 1, 1),
            NodeType::new("author", 1, 1),
            NodeType::new("institution", 1, 1),
            NodeType::new("field", 1, 1),
        ];
        let edges = vec![
            EdgeType::new("writes", "author", "paper"),
            EdgeType::new("written_by", "paper", "author"),
            EdgeType::new("affiliated_with", "author", "institution"),
            EdgeType::new("employs", "institution", "author"),
            EdgeType::new("cites", "paper", "paper"),
            EdgeType::new("has_topic", "paper", "field"),
            EdgeType::new("topic_of", "field", "paper"),
        ];
        SchemaGraph::new(nodes, edges, "paper").expect("valid fixture")
    }
}
