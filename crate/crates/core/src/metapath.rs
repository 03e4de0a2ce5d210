//! Meta-paths rooted at the target node type.
//!
//! A path reads left to right as `target <- c1 <- ... <- cl`: step `i` uses
//! an edge type whose destination is `node_types[i]` and whose source is
//! `node_types[i + 1]`. That is the order in which the row-normalized
//! operators are chained during aggregation.
//!
//! The string form concatenates node-type letters (`APV`). When two edge
//! types connect the same pair of types and no preferred one is declared,
//! the letters alone are ambiguous and the rendering carries the full edge
//! sequence as a suffix: `PP[cite]`.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::hin::{EdgeType, SchemaGraph};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MetaPath {
    node_types: Vec<String>,
    edge_types: Vec<String>,
    label: String,
}

impl MetaPath {
    /// The hop-0 path consisting of the target type alone.
    pub fn root(schema: &SchemaGraph) -> Self {
        Self::from_edges(schema, &[] as &[&str]).expect("root path is always valid")
    }

    /// Builds a path from its edge-type sequence, starting at the target.
    pub fn from_edges<S: AsRef<str>>(schema: &SchemaGraph, edges: &[S]) -> Result<Self> {
        let mut node_types = vec![schema.target().to_string()];
        let mut edge_types = Vec::with_capacity(edges.len());
        for name in edges {
            let name = name.as_ref();
            let e = schema
                .edge_type(name)
                .ok_or_else(|| Error::invalid_path(name, format!("unknown edge type {name}")))?;
            let here = node_types.last().unwrap();
            if &e.dst != here {
                return Err(Error::invalid_path(
                    edges.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(","),
                    format!("edge type {} does not end at {here}", e.name),
                ));
            }
            node_types.push(e.src.clone());
            edge_types.push(e.name.clone());
        }
        let label = render(schema, &node_types, &edge_types);
        Ok(Self { node_types, edge_types, label })
    }

    fn extend(&self, schema: &SchemaGraph, e: &EdgeType) -> Self {
        let mut node_types = self.node_types.clone();
        let mut edge_types = self.edge_types.clone();
        node_types.push(e.src.clone());
        edge_types.push(e.name.clone());
        let label = render(schema, &node_types, &edge_types);
        Self { node_types, edge_types, label }
    }

    pub fn hop(&self) -> usize {
        self.edge_types.len()
    }

    pub fn node_types(&self) -> &[String] {
        &self.node_types
    }

    pub fn edge_types(&self) -> &[String] {
        &self.edge_types
    }

    /// The node type whose features this path aggregates.
    pub fn end_type(&self) -> &str {
        self.node_types.last().expect("paths are never empty")
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `<string>\t<hop>\t<edge types comma-joined>`
    pub fn tsv_row(&self) -> String {
        format!("{}\t{}\t{}", self.label, self.hop(), self.edge_types.join(","))
    }
}

impl fmt::Display for MetaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl Ord for MetaPath {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.hop(), &self.label, &self.edge_types).cmp(&(other.hop(), &other.label, &other.edge_types))
    }
}

impl PartialOrd for MetaPath {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The edge type the letters alone select for `dst <- src`, if unique.
fn letter_choice<'a>(schema: &'a SchemaGraph, dst: &'a str, src: &'a str) -> std::result::Result<&'a EdgeType, usize> {
    let candidates: Vec<&EdgeType> = schema.edges_between(dst, src).collect();
    match candidates.as_slice() {
        [only] => Ok(only),
        _ => candidates
            .iter()
            .find(|e| schema.preferred().contains(&e.name))
            .copied()
            .ok_or(candidates.len()),
    }
}

fn render(schema: &SchemaGraph, node_types: &[String], edge_types: &[String]) -> String {
    let letters: String = node_types
        .iter()
        .map(|n| schema.node_type(n).map_or('?', |t| t.letter))
        .collect();
    let plain = edge_types.iter().enumerate().all(|(i, e)| {
        letter_choice(schema, &node_types[i], &node_types[i + 1]).is_ok_and(|chosen| &chosen.name == e)
    });
    if plain {
        letters
    } else {
        format!("{letters}[{}]", edge_types.join(","))
    }
}

/// Parses a path string such as `APV` or `PP[cite]`.
pub fn parse_path(s: &str, schema: &SchemaGraph) -> Result<MetaPath> {
    let s = s.trim();
    let (letters, suffix) = match s.find('[') {
        Some(i) if s.ends_with(']') => (&s[..i], Some(&s[i + 1..s.len() - 1])),
        Some(_) => return Err(Error::invalid_path(s, "unterminated edge suffix")),
        None => (s, None),
    };
    let mut types = Vec::new();
    for c in letters.chars() {
        let t = schema
            .node_type_by_letter(c)
            .ok_or_else(|| Error::invalid_path(s, format!("unknown letter {c:?}")))?;
        types.push(t.name.as_str());
    }
    if types.first() != Some(&schema.target()) {
        return Err(Error::invalid_path(s, format!("path must start at target type {}", schema.target())));
    }
    let hops = types.len() - 1;
    let edges: Vec<String> = match suffix {
        Some(list) => {
            let edges: Vec<String> = if list.is_empty() {
                Vec::new()
            } else {
                list.split(',').map(|e| e.trim().to_string()).collect()
            };
            if edges.len() != hops {
                return Err(Error::invalid_path(s, format!("{} edge types for {hops} hops", edges.len())));
            }
            edges
        }
        None => {
            let mut edges = Vec::with_capacity(hops);
            for w in types.windows(2) {
                match letter_choice(schema, w[0], w[1]) {
                    Ok(e) => edges.push(e.name.clone()),
                    Err(0) => {
                        return Err(Error::invalid_path(s, format!("no edge type connects {} <- {}", w[0], w[1])))
                    }
                    Err(_) => {
                        return Err(Error::invalid_path(
                            s,
                            format!("ambiguous step {} <- {}; add an edge suffix or a preferred edge type", w[0], w[1]),
                        ))
                    }
                }
            }
            edges
        }
    };
    let p = MetaPath::from_edges(schema, &edges)?;
    if p.node_types.iter().map(String::as_str).ne(types.iter().copied()) {
        return Err(Error::invalid_path(s, "edge suffix does not match the letters"));
    }
    Ok(p)
}

/// All target-rooted meta-paths with at most `max_hop` hops, sorted by
/// (hop, string). Immediate backtracking is allowed; paths that visit a
/// type in `exclude` are pruned.
pub fn enumerate_metapaths(schema: &SchemaGraph, max_hop: usize, exclude: &[&str]) -> Result<Vec<MetaPath>> {
    let excluded: BTreeSet<&str> = exclude.iter().copied().collect();
    if let Some(bad) = excluded.iter().find(|t| schema.node_type(t).is_none()) {
        return Err(Error::UnknownNodeType(bad.to_string()));
    }
    if excluded.contains(schema.target()) {
        return Ok(Vec::new());
    }
    let mut all = vec![MetaPath::root(schema)];
    let mut frontier = all.clone();
    for _ in 0..max_hop {
        let mut next = Vec::new();
        for p in &frontier {
            for e in schema.edges_into(p.end_type()) {
                if !excluded.contains(e.src.as_str()) {
                    next.push(p.extend(schema, e));
                }
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all.sort();
    Ok(all)
}

/// Renders paths as the path-list TSV.
pub fn paths_to_tsv(paths: &[MetaPath]) -> String {
    paths.iter().map(|p| p.tsv_row() + "\n").collect()
}

/// Reads a path list: one path per line, first tab-separated field used.
/// Blank lines and `#` comments are skipped.
pub fn parse_path_list(text: &str, schema: &SchemaGraph) -> Result<Vec<MetaPath>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| parse_path(l.split('\t').next().unwrap_or(l), schema))
        .collect()
}
