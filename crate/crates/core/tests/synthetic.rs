mod common;

use common::dense_propagator;
use hinsearch::aggregate::compute_path_features;
use hinsearch::datagen::{generate_planted_hin, SynthConfig, SynthDataset};
use hinsearch::hin::{Hin, Split};
use hinsearch::metapath::{parse_path, MetaPath};
use ndarray::{s, Array2, Axis};

/// Dense brute-force aggregation of `x` (rows indexed by the end type).
fn dense_aggregate(h: &Hin, p: &MetaPath, x: &Array2<f64>) -> Array2<f64> {
    p.edge_types().iter().rev().fold(x.clone(), |acc, e| dense_propagator(h, e).dot(&acc))
}

fn solve(mut a: Array2<f64>, mut b: Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[[i, c]].abs().total_cmp(&a[[j, c]].abs())).unwrap();
        for k in 0..n {
            a.swap([c, k], [piv, k]);
        }
        for k in 0..b.ncols() {
            b.swap([c, k], [piv, k]);
        }
        for r in 0..n {
            if r != c {
                let f = a[[r, c]] / a[[c, c]];
                for k in 0..n {
                    a[[r, k]] -= f * a[[c, k]];
                }
                for k in 0..b.ncols() {
                    b[[r, k]] -= f * b[[c, k]];
                }
            }
        }
    }
    for r in 0..n {
        let d = a[[r, r]];
        b.row_mut(r).mapv_inplace(|v| v / d);
    }
    b
}

fn with_bias(x: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::ones((x.nrows(), x.ncols() + 1));
    out.slice_mut(s![.., ..x.ncols()]).assign(x);
    out
}

/// Ridge-regularized least squares from `x` to `y` over `rows`.
fn fit(x: &Array2<f64>, y: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let xb = with_bias(&x.select(Axis(0), rows));
    let yt = y.select(Axis(0), rows);
    let mut gram = xb.t().dot(&xb);
    for i in 0..gram.nrows() {
        gram[[i, i]] += 1e-9;
    }
    solve(gram, xb.t().dot(&yt))
}

fn argmax_rows(m: &Array2<f64>) -> Vec<usize> {
    m.rows().into_iter().map(|r| (0..r.len()).fold(0, |b, k| if r[k] > r[b] { k } else { b })).collect()
}

fn accuracy(pred: &[usize], truth: &[usize], rows: &[usize]) -> f64 {
    rows.iter().filter(|&&i| pred[i] == truth[i]).count() as f64 / rows.len() as f64
}

fn classes(d: &SynthDataset) -> Vec<usize> {
    (0..d.hin.num_targets()).map(|i| d.hin.labels().class_of(i).unwrap()).collect()
}

fn one_hot(c: &[usize], k: usize) -> Array2<f64> {
    let mut y = Array2::zeros((c.len(), k));
    for (i, &v) in c.iter().enumerate() {
        y[[i, v]] = 1.0;
    }
    y
}

/// Logistic probe on a path's aggregated features:
/// fit on train, accuracy on test.
fn probe(d: &SynthDataset, path: &MetaPath) -> f64 {
    let h = &d.hin;
    probe_on(d, dense_aggregate(h, path, h.features(path.end_type()).unwrap().as_array()))
}

fn probe_on(d: &SynthDataset, x: Array2<f64>) -> f64 {
    let h = &d.hin;
    let y = classes(d);
    let w = fit_logistic(&x, &y, d.config.num_classes, &h.split_nodes(Split::Train));
    accuracy(&argmax_rows(&with_bias(&standardize(&x)).dot(&w)), &y, &h.split_nodes(Split::Test))
}

fn standardize(x: &Array2<f64>) -> Array2<f64> {
    let mean = x.mean_axis(Axis(0)).unwrap();
    let sd = x.std_axis(Axis(0), 0.0).mapv(|v| v.max(1e-12));
    (x - &mean) / &sd
}

/// Multinomial logistic regression by full-batch gradient descent.
fn fit_logistic(x: &Array2<f64>, y: &[usize], k: usize, rows: &[usize]) -> Array2<f64> {
    let xb = with_bias(&standardize(x).select(Axis(0), rows));
    let t = one_hot(&rows.iter().map(|&i| y[i]).collect::<Vec<_>>(), k);
    let mut w = Array2::<f64>::zeros((xb.ncols(), k));
    for _ in 0..2000 {
        let mut p = xb.dot(&w);
        for mut r in p.rows_mut() {
            let m = r.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            r.mapv_inplace(|v| (v - m).exp());
            let z = r.sum();
            r /= z;
        }
        w -= &(xb.t().dot(&(p - &t)) * (0.5 / rows.len() as f64));
    }
    w
}

fn majority_rate(c: &[usize], rows: &[usize], k: usize) -> f64 {
    let mut counts = vec![0usize; k];
    for &i in rows {
        counts[c[i]] += 1;
    }
    *counts.iter().max().unwrap() as f64 / rows.len() as f64
}

#[test]
fn full_strength_planted_features_fit_training_labels_exactly() {
    let d = generate_planted_hin(&SynthConfig { signal_strength: 1.0, ..SynthConfig::default() }).unwrap();
    let h = &d.hin;
    let x = dense_aggregate(h, &d.planted, h.features("C").unwrap().as_array());
    // Labels are the argmax of the aggregated latent code, which is a linear
    // image of the planted features when nothing else is mixed in.
    let z = dense_aggregate(h, &d.planted, &d.latent);
    let train = h.split_nodes(Split::Train);
    let w = fit(&x, &z, &train);
    let y = classes(&d);
    assert_eq!(argmax_rows(&z), y);
    assert_eq!(accuracy(&argmax_rows(&with_bias(&x).dot(&w)), &y, &train), 1.0);
}

#[test]
fn zero_strength_labels_are_unpredictable() {
    // Many end nodes per target, so train and test targets rarely share a
    // neighbourhood whose identity alone would carry the label.
    let cfg = SynthConfig {
        signal_strength: 0.0,
        node_types: [("T", 2000), ("A", 20000), ("B", 20000), ("C", 20000), ("D", 20000)]
            .iter()
            .map(|(t, n)| (t.to_string(), *n))
            .collect(),
        ..SynthConfig::default()
    };
    let d = generate_planted_hin(&cfg).unwrap();
    let y = classes(&d);
    let chance = majority_rate(&y, &d.hin.split_nodes(Split::Test), 4);
    for label in ["T", "TA", "TAB", "TABC", "TD"] {
        let x = compute_path_features(&d.hin, &parse_path(label, d.hin.schema()).unwrap()).unwrap();
        let acc = probe_on(&d, x.into_inner());
        assert!(acc <= chance + 0.05, "{label}: {acc} vs chance {chance}");
    }
}

#[test]
fn planted_path_separates_classes_and_beats_noise_paths() {
    let d = generate_planted_hin(&SynthConfig::default()).unwrap();
    let planted = probe(&d, &d.planted);
    assert!(planted >= 0.95, "planted probe {planted}");
    assert!(d.noise.len() >= 3);
    for n in &d.noise {
        let acc = probe(&d, n);
        assert!(planted - acc >= 0.20, "{}: {acc} vs planted {planted}", n.label());
    }
}

#[test]
fn three_type_planted_path() {
    let rel = |s: &str, t: &str| hinsearch::datagen::Relation { src: s.into(), dst: t.into(), mean_degree: 1.0 };
    let cfg = SynthConfig {
        node_types: [("T", 2000), ("A", 250), ("B", 125)].iter().map(|(t, n)| (t.to_string(), *n)).collect(),
        relations: vec![rel("T", "A"), rel("A", "B")],
        planted_path: "TABA".into(),
        noise_paths: vec!["TAB".into()],
        ..SynthConfig::default()
    };
    let d = generate_planted_hin(&cfg).unwrap();
    assert_eq!(d.planted.hop(), 3);
    let acc = probe(&d, &d.planted);
    assert!(acc >= 0.95, "planted probe {acc}");
}

#[test]
fn same_config_writes_identical_directories() {
    let cfg = SynthConfig { seed: 11, ..SynthConfig::default().with_targets(300) };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        generate_planted_hin(&cfg).unwrap().write(dir.path()).unwrap();
    }
    let (a, b) = (files(dirs[0].path()), files(dirs[1].path()));
    assert!(a.len() >= 4);
    assert_eq!(a, b);
}

/// Every file under `root` as (relative path, bytes), sorted.
fn files(root: &std::path::Path) -> Vec<(std::path::PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
