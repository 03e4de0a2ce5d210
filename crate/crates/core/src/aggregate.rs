//! One-shot neighbor aggregation along meta-paths.
//!
//! For a path `c <- c1 <- ... <- cl` the feature matrix is
//! `Â(c,c1) · Â(c1,c2) · ... · Â(c(l-1),cl) · X(cl)`, with every `Â`
//! row-normalized. It is evaluated right to left, one sparse × dense product
//! per hop, so every intermediate stays `n × F`. Paths that share a suffix
//! share the partial product.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::binfmt;
use crate::error::{Error, Result};
use crate::hin::{FeatureMatrix, Hin, SparseAdjacency};
use crate::metapath::MetaPath;

pub const NORMALIZATION: &str = "row";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub dataset_hash: String,
    pub max_hop: usize,
    pub normalization: String,
}

/// Aggregated features for an ordered list of paths; one `n_targets × F`
/// matrix per path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathFeatureSet {
    paths: Vec<MetaPath>,
    matrices: Vec<FeatureMatrix>,
    provenance: Provenance,
}

impl PathFeatureSet {
    pub fn new(paths: Vec<MetaPath>, matrices: Vec<FeatureMatrix>, provenance: Provenance) -> Result<Self> {
        if paths.len() != matrices.len() {
            return Err(Error::Shape(format!("{} paths but {} matrices", paths.len(), matrices.len())));
        }
        if let Some(first) = matrices.first() {
            if let Some(bad) = matrices.iter().position(|m| m.rows() != first.rows()) {
                return Err(Error::Shape(format!("matrix for {} has a different row count", paths[bad])));
            }
        }
        Ok(Self { paths, matrices, provenance })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[MetaPath] {
        &self.paths
    }

    pub fn matrix(&self, k: usize) -> &FeatureMatrix {
        &self.matrices[k]
    }

    pub fn matrices(&self) -> &[FeatureMatrix] {
        &self.matrices
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn num_rows(&self) -> usize {
        self.matrices.first().map_or(0, FeatureMatrix::rows)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.paths.iter().position(|p| p.label() == label)
    }

    /// The paths at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            paths: indices.iter().map(|&i| self.paths[i].clone()).collect(),
            matrices: indices.iter().map(|&i| self.matrices[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Resolves path labels to indices; unknown labels are an error.
    pub fn indices_of<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| self.index_of(l.as_ref()).ok_or_else(|| Error::UnknownPath(l.as_ref().to_string())))
            .collect()
    }

    /// Bytes held by the stored matrices at 8 bytes per entry.
    pub fn feature_bytes(&self) -> usize {
        self.matrices.iter().map(|m| m.rows() * m.cols() * 8).sum()
    }
}

/// Counters describing the work done by [`precompute_all`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PrecomputeStats {
    pub spmm_products: usize,
    pub cache_hits: usize,
    pub cache_writes: usize,
}

/// Suffix-memoizing evaluator over one graph.
pub struct Aggregator<'a> {
    hin: &'a Hin,
    propagators: HashMap<String, SparseAdjacency>,
    memo: HashMap<Vec<String>, Array2<f64>>,
    memoize: bool,
    products: usize,
}

impl<'a> Aggregator<'a> {
    pub fn new(hin: &'a Hin) -> Self {
        Self { hin, propagators: HashMap::new(), memo: HashMap::new(), memoize: true, products: 0 }
    }

    pub fn without_memo(hin: &'a Hin) -> Self {
        Self { memoize: false, ..Self::new(hin) }
    }

    /// Sparse × dense products performed so far.
    pub fn products(&self) -> usize {
        self.products
    }

    fn propagator(&mut self, edge: &str) -> Result<&SparseAdjacency> {
        if !self.propagators.contains_key(edge) {
            let p = self.hin.propagator(edge)?;
            self.propagators.insert(edge.to_string(), p);
        }
        Ok(&self.propagators[edge])
    }

    pub fn compute(&mut self, path: &MetaPath) -> Result<FeatureMatrix> {
        let end = path.end_type();
        let x = self.hin.features(end).ok_or_else(|| Error::MissingFeatures(end.to_string()))?;
        let edges = path.edge_types();
        // Longest already-computed suffix.
        let mut start = edges.len();
        if self.memoize {
            if let Some(j) = (0..edges.len()).find(|&j| self.memo.contains_key(&edges[j..])) {
                start = j;
            }
        }
        let mut acc: Array2<f64> =
            if start == edges.len() { x.as_array().clone() } else { self.memo[&edges[start..]].clone() };
        for j in (0..start).rev() {
            let p = self.propagator(&edges[j])?;
            if p.cols() != acc.nrows() {
                return Err(Error::Shape(format!("{}: operator {} has {} columns, input has {} rows", path, edges[j], p.cols(), acc.nrows())));
            }
            acc = p.spmm(acc.view())?;
            self.products += 1;
            if self.memoize {
                self.memo.insert(edges[j..].to_vec(), acc.clone());
            }
        }
        FeatureMatrix::new(acc)
    }
}

/// Aggregated features of a single path, in full double precision.
pub fn compute_path_features(h: &Hin, p: &MetaPath) -> Result<FeatureMatrix> {
    Aggregator::without_memo(h).compute(p)
}

fn dataset_hash(h: &Hin) -> String {
    let mut s = Sha256::new();
    s.update(h.content_hash().as_bytes());
    s.update(b"\0normalization=");
    s.update(NORMALIZATION.as_bytes());
    hex::encode(s.finalize())
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct ManifestEntry {
    rows: usize,
    cols: usize,
    hash: String,
}

struct Manifest {
    path: PathBuf,
    max_hop: usize,
    entries: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    fn load(dir: &Path, dataset: &str) -> Result<Self> {
        let path = dir.join("manifest.tsv");
        let mut m = Manifest { path: path.clone(), max_hop: 0, entries: BTreeMap::new() };
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(m),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let stale = |reason: String| Error::StaleCache { path: path.clone(), reason };
        let mut saw_dataset = false;
        for (ln, line) in text.lines().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            match f.as_slice() {
                ["# dataset", h] => {
                    if *h != dataset {
                        return Err(stale(format!("manifest is for dataset {h}, expected {dataset}")));
                    }
                    saw_dataset = true;
                }
                ["# normalization", n] => {
                    if *n != NORMALIZATION {
                        return Err(stale(format!("normalization {n}, expected {NORMALIZATION}")));
                    }
                }
                ["# max_hop", h] => m.max_hop = h.parse().map_err(|_| Error::parse(&path, ln + 1, "bad max_hop"))?,
                [label, rows, cols, hash] => {
                    let rows = rows.parse().map_err(|_| Error::parse(&path, ln + 1, "bad row count"))?;
                    let cols = cols.parse().map_err(|_| Error::parse(&path, ln + 1, "bad column count"))?;
                    m.entries.insert(label.to_string(), ManifestEntry { rows, cols, hash: hash.to_string() });
                }
                [""] => {}
                _ => return Err(Error::parse(&path, ln + 1, "unrecognized manifest line")),
            }
        }
        if !saw_dataset {
            return Err(stale("manifest has no dataset line".into()));
        }
        Ok(m)
    }

    fn save(&self, dataset: &str) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "# dataset\t{dataset}").unwrap();
        writeln!(s, "# normalization\t{NORMALIZATION}").unwrap();
        writeln!(s, "# max_hop\t{}", self.max_hop).unwrap();
        for (label, e) in &self.entries {
            writeln!(s, "{label}\t{}\t{}\t{}", e.rows, e.cols, e.hash).unwrap();
        }
        binfmt::write_atomic(&self.path, s.as_bytes())
    }
}

/// Directory holding cached matrices for `h` under `cache_root`.
pub fn cache_dir_for(h: &Hin, cache_root: &Path) -> PathBuf {
    cache_root.join(&dataset_hash(h)[..16])
}

/// Aggregates every path, sharing suffix products. Results are rounded to
/// single precision so that fresh and cached runs are identical.
///
/// With a cache directory, matrices are read from
/// `<cache>/<dataset hash>/<path>.hinf` when the manifest vouches for them
/// and written there otherwise. A manifest that disagrees with the dataset,
/// or a file whose content hash does not match its manifest row, is reported
/// as a stale cache.
pub fn precompute_all(
    h: &Hin,
    paths: &[MetaPath],
    cache_root: Option<&Path>,
) -> Result<(PathFeatureSet, PrecomputeStats)> {
    let dataset = dataset_hash(h);
    let max_hop = paths.iter().map(MetaPath::hop).max().unwrap_or(0);
    let provenance = Provenance { dataset_hash: dataset.clone(), max_hop, normalization: NORMALIZATION.into() };
    let mut stats = PrecomputeStats::default();
    let mut agg = Aggregator::new(h);

    let Some(root) = cache_root else {
        let matrices = paths.iter().map(|p| agg.compute(p).map(|m| m.round_to_f32())).collect::<Result<Vec<_>>>()?;
        stats.spmm_products = agg.products();
        return Ok((PathFeatureSet::new(paths.to_vec(), matrices, provenance)?, stats));
    };

    let dir = cache_dir_for(h, root);
    let mut manifest = Manifest::load(&dir, &dataset)?;
    let mut matrices = Vec::with_capacity(paths.len());
    for p in paths {
        let file = dir.join(format!("{}.hinf", p.label()));
        if let Some(entry) = manifest.entries.get(p.label()) {
            let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
            if sha_hex(&bytes) != entry.hash {
                return Err(Error::StaleCache { path: file, reason: "content hash differs from manifest".into() });
            }
            let m = binfmt::decode_matrix(&bytes, &file)?;
            if m.dim() != (entry.rows, entry.cols) {
                return Err(Error::StaleCache { path: file, reason: "shape differs from manifest".into() });
            }
            stats.cache_hits += 1;
            matrices.push(FeatureMatrix::new(m)?);
        } else {
            let m = agg.compute(p)?.round_to_f32();
            let bytes = binfmt::encode_matrix(m.as_array());
            binfmt::write_atomic(&file, &bytes)?;
            manifest
                .entries
                .insert(p.label().to_string(), ManifestEntry { rows: m.rows(), cols: m.cols(), hash: sha_hex(&bytes) });
            stats.cache_writes += 1;
            matrices.push(m);
        }
    }
    manifest.max_hop = manifest.max_hop.max(max_hop);
    if stats.cache_writes > 0 || !manifest.path.exists() {
        manifest.save(&dataset)?;
    }
    stats.spmm_products = agg.products();
    Ok((PathFeatureSet::new(paths.to_vec(), matrices, provenance)?, stats))
}
