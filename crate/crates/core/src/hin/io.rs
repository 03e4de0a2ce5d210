//! Dataset directory layout:
//!
//! ```text
//! schema.tsv            nodetype <name> <count> <feat_dim> [letter]
//!                       edgetype <name> <src_type> <dst_type>
//!                       target <name>
//!                       prefer <edgetype>          (optional, repeatable)
//!                       labels multi               (optional)
//! edges/<edgetype>.tsv  <src_id>\t<dst_id>[\t<weight>]
//! features/<type>.bin   HINF matrix (or features/<type>.tsv, one row per line)
//! labels.tsv            <node_id>\t<class>   or   <node_id>\t<bitstring>
//! splits.tsv            <node_id>\t{train|val|test}
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{EdgeType, FeatureMatrix, Hin, Labels, NodeType, SchemaGraph, SparseAdjacency, Split};
use crate::binfmt;
use crate::error::{Error, Result};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_num<T: std::str::FromStr>(tok: &str, file: &Path, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::parse(file, line, format!("invalid {what} {tok:?}")))
}

fn parse_schema(path: &Path) -> Result<SchemaGraph> {
    let text = read_text(path)?;
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut target = None;
    let mut preferred = Vec::new();
    let mut multi = false;
    for (ln, line) in data_lines(&text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["nodetype", name, count, dim, rest @ ..] if rest.len() <= 1 => {
                let mut t = NodeType::new(*name, parse_num(count, path, ln, "count")?, parse_num(dim, path, ln, "feature dim")?);
                if let Some(letter) = rest.first() {
                    let mut chars = letter.chars();
                    match (chars.next(), chars.next()) {
                        (Some(c), None) => t = t.with_letter(c),
                        _ => return Err(Error::parse(path, ln, format!("letter must be one character, got {letter:?}"))),
                    }
                }
                nodes.push(t);
            }
            ["edgetype", name, src, dst] => edges.push(EdgeType::new(*name, *src, *dst)),
            ["target", name] => {
                if target.replace(name.to_string()).is_some() {
                    return Err(Error::parse(path, ln, "second target line"));
                }
            }
            ["prefer", edge] => preferred.push(edge.to_string()),
            ["labels", "multi"] => multi = true,
            ["labels", "single"] => multi = false,
            _ => return Err(Error::parse(path, ln, format!("unrecognized schema line {line:?}"))),
        }
    }
    let target = target.ok_or_else(|| Error::parse(path, 0, "missing target line"))?;
    let mut schema = SchemaGraph::new(nodes, edges, target)?;
    for p in preferred {
        schema = schema.with_preferred(p)?;
    }
    Ok(schema.with_multi_label(multi))
}

fn parse_edges(path: &Path, e: &EdgeType, rows: usize, cols: usize) -> Result<SparseAdjacency> {
    let text = read_text(path)?;
    let mut triplets = Vec::new();
    for (ln, line) in data_lines(&text) {
        let toks: Vec<&str> = line.split('\t').map(str::trim).collect();
        if !(2..=3).contains(&toks.len()) {
            return Err(Error::parse(path, ln, "expected <src>\\t<dst>[\\t<weight>]"));
        }
        let src: usize = parse_num(toks[0], path, ln, "source id")?;
        let dst: usize = parse_num(toks[1], path, ln, "destination id")?;
        let w: f64 = match toks.get(2) {
            Some(t) => parse_num(t, path, ln, "weight")?,
            None => 1.0,
        };
        if src >= rows {
            return Err(Error::DanglingEndpoint {
                file: path.to_path_buf(),
                line: ln,
                msg: format!("source {src} >= {rows} nodes of type {}", e.src),
            });
        }
        if dst >= cols {
            return Err(Error::DanglingEndpoint {
                file: path.to_path_buf(),
                line: ln,
                msg: format!("destination {dst} >= {cols} nodes of type {}", e.dst),
            });
        }
        if !w.is_finite() || w < 0.0 {
            return Err(Error::parse(path, ln, format!("weight {w} must be finite and non-negative")));
        }
        triplets.push((src, dst, w));
    }
    SparseAdjacency::from_triplets(rows, cols, triplets)
}

fn parse_feature_tsv(path: &Path) -> Result<Array2<f64>> {
    let text = read_text(path)?;
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    let mut offset = 0;
    for (ln, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches(['\r', '\n']))) {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<&str> = line.split('\t').collect();
        if *cols.get_or_insert(vals.len()) != vals.len() {
            return Err(Error::parse(path, ln, "ragged feature row"));
        }
        for v in vals {
            let x: f64 = parse_num(v.trim(), path, ln, "feature value")?;
            if !x.is_finite() {
                return Err(Error::NonFiniteFeature { file: path.to_path_buf(), offset });
            }
            data.push(f64::from(x as f32));
            offset += 1;
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols.unwrap_or(0)), data).map_err(|e| Error::Shape(e.to_string()))
}

fn load_features(dir: &Path, t: &NodeType) -> Result<Option<FeatureMatrix>> {
    let bin = dir.join("features").join(format!("{}.bin", t.name));
    let tsv = dir.join("features").join(format!("{}.tsv", t.name));
    let (m, file) = if bin.exists() {
        (binfmt::read_matrix(&bin)?, bin)
    } else if tsv.exists() {
        (parse_feature_tsv(&tsv)?, tsv)
    } else if t.feature_dim > 0 {
        return Err(Error::MissingFile(bin));
    } else {
        return Ok(None);
    };
    if m.dim() != (t.count, t.feature_dim) {
        return Err(Error::Shape(format!(
            "{}: matrix is {}x{}, schema says {}x{}",
            file.display(),
            m.nrows(),
            m.ncols(),
            t.count,
            t.feature_dim
        )));
    }
    Ok(Some(FeatureMatrix::new(m)?))
}

fn parse_node_id(tok: &str, n: usize, path: &Path, ln: usize) -> Result<usize> {
    let id: usize = parse_num(tok, path, ln, "node id")?;
    if id >= n {
        return Err(Error::parse(path, ln, format!("node id {id} >= {n} target nodes")));
    }
    Ok(id)
}

fn two_fields<'a>(line: &'a str, path: &Path, ln: usize) -> Result<(&'a str, &'a str)> {
    let mut it = line.split('\t').map(str::trim);
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) => Ok((a, b)),
        _ => Err(Error::parse(path, ln, "expected two tab-separated fields")),
    }
}

fn parse_labels(path: &Path, n: usize, multi: bool) -> Result<Labels> {
    let text = read_text(path)?;
    let mut seen = vec![false; n];
    if multi {
        let mut bits: Vec<Vec<bool>> = vec![Vec::new(); n];
        let mut width = None;
        for (ln, line) in data_lines(&text) {
            let (id, s) = two_fields(line, path, ln)?;
            let id = parse_node_id(id, n, path, ln)?;
            if !s.chars().all(|c| c == '0' || c == '1') || s.is_empty() {
                return Err(Error::parse(path, ln, format!("invalid bitstring {s:?}")));
            }
            if *width.get_or_insert(s.len()) != s.len() {
                return Err(Error::parse(path, ln, "bitstrings of unequal length"));
            }
            if std::mem::replace(&mut seen[id], true) {
                return Err(Error::parse(path, ln, format!("duplicate label for node {id}")));
            }
            bits[id] = s.chars().map(|c| c == '1').collect();
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::parse(path, 0, format!("no label for target node {missing}")));
        }
        Ok(Labels::Multi { bits, num_classes: width.unwrap_or(0) })
    } else {
        let mut classes = vec![0usize; n];
        for (ln, line) in data_lines(&text) {
            let (id, c) = two_fields(line, path, ln)?;
            let id = parse_node_id(id, n, path, ln)?;
            if std::mem::replace(&mut seen[id], true) {
                return Err(Error::parse(path, ln, format!("duplicate label for node {id}")));
            }
            classes[id] = parse_num(c, path, ln, "class index")?;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::parse(path, 0, format!("no label for target node {missing}")));
        }
        Ok(Labels::single(classes))
    }
}

fn parse_splits(path: &Path, n: usize) -> Result<Vec<Split>> {
    let text = read_text(path)?;
    let mut splits: Vec<Option<Split>> = vec![None; n];
    for (ln, line) in data_lines(&text) {
        let (id, s) = two_fields(line, path, ln)?;
        let id = parse_node_id(id, n, path, ln)?;
        let split = Split::parse(s).ok_or_else(|| Error::parse(path, ln, format!("unknown split {s:?}")))?;
        if splits[id].replace(split).is_some() {
            return Err(Error::DuplicateSplit { file: path.to_path_buf(), line: ln, node: id });
        }
    }
    splits
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::parse(path, 0, format!("no split for target node {i}"))))
        .collect()
}

/// Reads only `schema.tsv` of a dataset directory.
pub fn load_schema(dir: &Path) -> Result<SchemaGraph> {
    parse_schema(&dir.join("schema.tsv"))
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<Hin> {
    let schema = parse_schema(&dir.join("schema.tsv"))?;
    let mut adjacency = BTreeMap::new();
    for e in schema.edge_types() {
        let rows = schema.node_type(&e.src).expect("validated").count;
        let cols = schema.node_type(&e.dst).expect("validated").count;
        let path = dir.join("edges").join(format!("{}.tsv", e.name));
        adjacency.insert(e.name.clone(), parse_edges(&path, e, rows, cols)?);
    }
    let mut features = BTreeMap::new();
    for t in schema.node_types() {
        if let Some(f) = load_features(dir, t)? {
            features.insert(t.name.clone(), f);
        }
    }
    let n = schema.target_type().count;
    let labels = parse_labels(&dir.join("labels.tsv"), n, schema.multi_label())?;
    let splits = parse_splits(&dir.join("splits.tsv"), n)?;
    Hin::new(schema, adjacency, features, labels, splits)
}

fn write_text(path: PathBuf, text: &str) -> Result<()> {
    binfmt::write_atomic(&path, text.as_bytes())
}

/// Writes `h` in the dataset layout. Features go out as `HINF` binaries.
pub fn save_dataset(h: &Hin, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("edges")).map_err(|e| Error::io(dir, e))?;
    fs::create_dir_all(dir.join("features")).map_err(|e| Error::io(dir, e))?;
    write_text(dir.join("schema.tsv"), &h.schema().to_tsv())?;
    for (name, a) in h.adjacencies() {
        let mut s = String::new();
        for (r, c, v) in a.iter() {
            if v == 1.0 {
                writeln!(s, "{r}\t{c}").unwrap();
            } else {
                writeln!(s, "{r}\t{c}\t{v}").unwrap();
            }
        }
        write_text(dir.join("edges").join(format!("{name}.tsv")), &s)?;
    }
    for (name, f) in h.all_features() {
        binfmt::write_matrix(&dir.join("features").join(format!("{name}.bin")), f.as_array())?;
    }
    let mut s = String::new();
    match h.labels() {
        Labels::Single { classes, .. } => classes.iter().enumerate().for_each(|(i, c)| writeln!(s, "{i}\t{c}").unwrap()),
        Labels::Multi { bits, .. } => bits.iter().enumerate().for_each(|(i, b)| {
            let bs: String = b.iter().map(|x| if *x { '1' } else { '0' }).collect();
            writeln!(s, "{i}\t{bs}").unwrap();
        }),
    }
    write_text(dir.join("labels.tsv"), &s)?;
    let mut s = String::new();
    for (i, sp) in h.splits().iter().enumerate() {
        writeln!(s, "{i}\t{sp}").unwrap();
    }
    write_text(dir.join("splits.tsv"), &s)
}
