//! Shared oracles: finite differences, straight-line forward passes and a
//! dense aggregation reference.
#![allow(dead_code)]

use std::collections::BTreeMap;

use hinsearch::hin::{EdgeType, FeatureMatrix, Hin, Labels, NodeType, SchemaGraph, SparseAdjacency, Split};
use hinsearch::metapath::MetaPath;
use hinsearch::neural::MlpParams;
use hinsearch::rng::{Purpose, RngStream};
use ndarray::Array2;

pub fn rand_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.unit_f64() * 2.0 - 1.0)
}

/// Central differences of `f` around each of `n` coordinates; `f(i, h)`
/// evaluates the loss with coordinate `i` shifted by `h`.
pub fn numeric_grad(n: usize, step: f64, mut f: impl FnMut(usize, f64) -> f64) -> Vec<f64> {
    (0..n).map(|i| (f(i, step) - f(i, -step)) / (2.0 * step)).collect()
}

/// Largest `|a - b| / max(|a|, |b|, 1e-6)`.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6)).fold(0.0, f64::max)
}

pub fn flat(p: &MlpParams<f64>) -> Vec<f64> {
    p.views().iter().flat_map(|v| v.iter().copied().collect::<Vec<_>>()).collect()
}

/// Copy of `p` with flat coordinate `i` shifted by `h`.
pub fn shifted(p: &MlpParams<f64>, mut i: usize, h: f64) -> MlpParams<f64> {
    let mut q = p.clone();
    for mut v in q.views_mut() {
        if i < v.len() {
            *v.iter_mut().nth(i).unwrap() += h;
            break;
        }
        i -= v.len();
    }
    q
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// `relu(x w1 + b1) w2 + b2` with explicit loops.
pub fn mlp_loops(p: &MlpParams<f64>, x: &Array2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let h = p.hidden();
    let o = p.out_dim();
    let mut out = Array2::zeros((n, o));
    for r in 0..n {
        let mut hid = vec![0.0; h];
        for (j, hj) in hid.iter_mut().enumerate() {
            let mut s = p.b1[j];
            for i in 0..d {
                s += x[[r, i]] * p.w1[[i, j]];
            }
            *hj = relu(s);
        }
        for k in 0..o {
            let mut s = p.b2[k];
            for (j, hj) in hid.iter().enumerate() {
                s += hj * p.w2[[j, k]];
            }
            out[[r, k]] = s;
        }
    }
    out
}

/// Mean softmax cross-entropy with explicit max subtraction.
pub fn ce_loops(logits: &Array2<f64>, classes: &[usize]) -> f64 {
    let mut total = 0.0;
    for (r, &c) in classes.iter().enumerate() {
        let row = logits.row(r);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
        total += -(row[c] - m - z.ln());
    }
    total / classes.len() as f64
}

/// Dense row-stochastic propagator for traversing `edge` backwards: rows
/// are the edge's destination type, columns its source type.
pub fn dense_propagator(h: &Hin, edge: &str) -> Array2<f64> {
    let a: &SparseAdjacency = h.adjacency(edge).unwrap();
    let mut t = Array2::<f64>::zeros((a.cols(), a.rows()));
    for (s, d, v) in a.iter() {
        t[[d, s]] += v;
    }
    for mut row in t.rows_mut() {
        let sum: f64 = row.sum();
        if sum > 0.0 {
            row.mapv_inplace(|v| v / sum);
        }
    }
    t
}

/// `Â_1 Â_2 ... Â_l X` multiplied left to right as dense matrices.
pub fn dense_chain(h: &Hin, p: &MetaPath) -> Array2<f64> {
    let mut acc: Option<Array2<f64>> = None;
    for e in p.edge_types() {
        let a = dense_propagator(h, e);
        acc = Some(match acc {
            None => a,
            Some(m) => m.dot(&a),
        });
    }
    let x = h.features(p.end_type()).unwrap().as_array().clone();
    match acc {
        None => x,
        Some(m) => m.dot(&x),
    }
}

/// A random HIN with at most `max_nodes` nodes over 2-4 types, every type
/// featured, every type reached by at least one edge type.
pub fn random_hin(seed: u64, max_nodes: usize) -> Hin {
    let mut r = RngStream::new(seed, Purpose::Synth);
    let mut pick = |n: usize| ((r.unit_f64() * n as f64) as usize).min(n - 1);
    let names = ["A", "B", "C", "D"];
    let k = 2 + pick(3);
    let budget = max_nodes / k;
    let nodes: Vec<NodeType> = (0..k).map(|i| NodeType::new(names[i], 1 + pick(budget), 1 + pick(3))).collect();
    let mut edges = Vec::new();
    // A chain through every type keeps the schema connected.
    for i in 0..k - 1 {
        edges.push(EdgeType::new(format!("{}{}", names[i + 1], names[i]), names[i + 1], names[i]));
        edges.push(EdgeType::new(format!("{}{}", names[i], names[i + 1]), names[i], names[i + 1]));
    }
    let extra = pick(3);
    for j in 0..extra {
        let (s, d) = (pick(k), pick(k));
        edges.push(EdgeType::new(format!("x{j}{}{}", names[s], names[d]), names[s], names[d]));
    }
    let mut adjacency = BTreeMap::new();
    for e in &edges {
        let rows = nodes.iter().find(|n| n.name == e.src).unwrap().count;
        let cols = nodes.iter().find(|n| n.name == e.dst).unwrap().count;
        let mut trip = Vec::new();
        for s in 0..rows {
            for d in 0..cols {
                if pick(3) == 0 {
                    trip.push((s, d, 0.5 + pick(4) as f64));
                }
            }
        }
        adjacency.insert(e.name.clone(), SparseAdjacency::from_triplets(rows, cols, trip).unwrap());
    }
    let mut fr = RngStream::new(seed, Purpose::Init);
    let features = nodes
        .iter()
        .map(|n| (n.name.clone(), FeatureMatrix::new(rand_matrix(n.count, n.feature_dim, &mut fr)).unwrap()))
        .collect();
    let n = nodes[0].count;
    let schema = SchemaGraph::new(nodes, edges, "A").unwrap();
    Hin::new(schema, adjacency, features, Labels::single(vec![0; n]), vec![Split::Train; n]).unwrap()
}

pub const FD_STEP: f64 = 1e-5;

use hinsearch::neural::{bce_with_logits, cross_entropy, mlp_backward, mlp_forward, Activation, LossTarget, Mode};
use hinsearch::search::{SearchConfig, SuperNet};
use hinsearch::target::TargetNet;

/// A stream for dropout masks that every evaluation replays from the start.
fn mode<'a>(dropout: f64, base: &RngStream, slot: &'a mut RngStream) -> Mode<'a> {
    if dropout == 0.0 {
        return Mode::Eval;
    }
    *slot = base.clone();
    Mode::Train { dropout, rng: slot }
}

fn random_mlp(in_dim: usize, hidden: usize, out: usize, rng: &mut RngStream) -> MlpParams<f64> {
    let mut p = MlpParams::xavier(in_dim, hidden, out, rng);
    p.b1 = rand_matrix(1, hidden, rng).row(0).to_owned();
    p.b2 = rand_matrix(1, out, rng).row(0).to_owned();
    p
}

/// Largest relative error of the MLP's parameter and input gradients for
/// `L = Σ out ⊙ G` on a random batch of 5 rows through an 8×16×4 net.
pub fn mlp_fd_error(activation: Activation, dropout: f64, seed: u64) -> f64 {
    let mut r = RngStream::new(seed, Purpose::Init);
    let p = random_mlp(8, 16, 4, &mut r);
    let x = rand_matrix(5, 8, &mut r);
    let g = rand_matrix(5, 4, &mut r);
    let base = RngStream::new(seed, Purpose::Dropout);
    let mut slot = base.clone();
    let loss = |q: &MlpParams<f64>, x: &Array2<f64>, slot: &mut RngStream| {
        let (out, _) = mlp_forward(q, x.view(), activation, mode(dropout, &base, slot)).unwrap();
        (&out * &g).sum()
    };
    let (_, cache) = mlp_forward(&p, x.view(), activation, mode(dropout, &base, &mut slot)).unwrap();
    let (grads, dx) = mlp_backward(&p, &cache, g.view(), true).unwrap();
    let num = numeric_grad(p.num_params(), FD_STEP, |i, h| loss(&shifted(&p, i, h), &x, &mut slot));
    let num_x = numeric_grad(x.len(), FD_STEP, |i, h| {
        let mut y = x.clone();
        *y.iter_mut().nth(i).unwrap() += h;
        loss(&p, &y, &mut slot)
    });
    let dx: Vec<f64> = dx.unwrap().iter().copied().collect();
    max_rel_err(&flat(&grads), &num).max(max_rel_err(&dx, &num_x))
}

/// Largest relative error of the cross-entropy and BCE logit gradients.
pub fn loss_fd_error(seed: u64) -> f64 {
    let mut r = RngStream::new(seed, Purpose::Init);
    let logits = rand_matrix(6, 4, &mut r).mapv(|v| 3.0 * v);
    let classes: Vec<usize> = (0..6).map(|i| (i * 7 + seed as usize) % 4).collect();
    let bits = Array2::from_shape_fn((6, 4), |(i, j)| if (i + j + seed as usize).is_multiple_of(3) { 1.0 } else { 0.0 });
    let bump = |i: usize, h: f64| {
        let mut l = logits.clone();
        *l.iter_mut().nth(i).unwrap() += h;
        l
    };
    let (_, g_ce) = cross_entropy(logits.view(), &classes).unwrap();
    let n_ce = numeric_grad(logits.len(), FD_STEP, |i, h| cross_entropy(bump(i, h).view(), &classes).unwrap().0);
    let (_, g_bce) = bce_with_logits(logits.view(), bits.view()).unwrap();
    let n_bce = numeric_grad(logits.len(), FD_STEP, |i, h| bce_with_logits(bump(i, h).view(), bits.view()).unwrap().0);
    let flat2 = |a: &Array2<f64>| a.iter().copied().collect::<Vec<_>>();
    max_rel_err(&flat2(&g_ce), &n_ce).max(max_rel_err(&flat2(&g_bce), &n_bce))
}

/// Relative errors of the super-net gradients `(ω, α)` for the training
/// loss on a random instance with 5 candidates, 3 of them sampled.
pub fn supernet_fd_error(dropout: f64, multi_label: bool, seed: u64) -> (f64, f64) {
    let mut r = RngStream::new(seed, Purpose::Init);
    let in_dims = vec![3, 5, 4, 2, 6];
    let cfg = SearchConfig { m: 3, hidden: 6, dropout, activation: Activation::Tanh, ..SearchConfig::default() };
    let mut net = SuperNet::<f64>::new(in_dims.clone(), 3, &cfg, seed).unwrap();
    let sampled = vec![0, 2, 4];
    net.ensure_projectors(&sampled);
    for (k, a) in net.alpha_mut().iter_mut().enumerate() {
        *a = 0.3 * k as f64 - 0.5;
    }
    let n = 7;
    let xs: Vec<Array2<f64>> = sampled.iter().map(|&k| rand_matrix(n, in_dims[k], &mut r)).collect();
    let target = if multi_label {
        LossTarget::MultiHot(Array2::from_shape_fn((n, 3), |(i, j)| if (i + 2 * j) % 3 == 0 { 1.0 } else { 0.0 }))
    } else {
        LossTarget::Classes { classes: (0..n).map(|i| i % 3).collect(), num_classes: 3 }
    };
    let base = RngStream::new(seed, Purpose::Dropout);
    let mut slot = base.clone();
    let eval = |net: &mut SuperNet<f64>, slot: &mut RngStream| {
        let views: Vec<_> = xs.iter().map(|x| x.view()).collect();
        let fw = net.forward(&views, &sampled, mode(dropout, &base, slot)).unwrap();
        target.loss(fw.logits.view()).unwrap().0
    };
    let views: Vec<_> = xs.iter().map(|x| x.view()).collect();
    let fw = net.forward(&views, &sampled, mode(dropout, &base, &mut slot)).unwrap();
    let (_, dlogits) = target.loss(fw.logits.view()).unwrap();
    let g = net.backward(&fw, dlogits.view(), true).unwrap();

    let mut omega = 0.0f64;
    let cls = net.classifier().clone();
    let num = numeric_grad(cls.num_params(), FD_STEP, |i, h| {
        *net.classifier_mut() = shifted(&cls, i, h);
        let l = eval(&mut net, &mut slot);
        *net.classifier_mut() = cls.clone();
        l
    });
    omega = omega.max(max_rel_err(&flat(&g.classifier), &num));
    for (j, &k) in sampled.iter().enumerate() {
        let p = net.projector(k).unwrap().clone();
        let num = numeric_grad(p.num_params(), FD_STEP, |i, h| {
            *net.projector_mut(k).unwrap() = shifted(&p, i, h);
            let l = eval(&mut net, &mut slot);
            *net.projector_mut(k).unwrap() = p.clone();
            l
        });
        omega = omega.max(max_rel_err(&flat(&g.projectors[j]), &num));
    }
    let num = numeric_grad(in_dims.len(), FD_STEP, |i, h| {
        net.alpha_mut()[i] += h;
        let l = eval(&mut net, &mut slot);
        net.alpha_mut()[i] -= h;
        l
    });
    let alpha = max_rel_err(&g.alpha.to_vec(), &num);
    (omega, alpha)
}

/// Relative error of the target-net gradients on a random 3-path instance.
pub fn target_fd_error(dropout: f64, seed: u64) -> f64 {
    let mut r = RngStream::new(seed, Purpose::Init);
    let dims = [4, 2, 5];
    let mut net = TargetNet::<f64>::new(&dims, 5, 3, Activation::Tanh, seed).unwrap();
    for p in net.projectors.iter_mut().chain(std::iter::once(&mut net.classifier)) {
        p.b1 = rand_matrix(1, p.hidden(), &mut r).row(0).to_owned();
        p.b2 = rand_matrix(1, p.out_dim(), &mut r).row(0).to_owned();
    }
    let n = 6;
    let xs: Vec<Array2<f64>> = dims.iter().map(|&d| rand_matrix(n, d, &mut r)).collect();
    let target = LossTarget::Classes { classes: (0..n).map(|i| (i * 5) % 3).collect(), num_classes: 3 };
    let base = RngStream::new(seed, Purpose::Dropout);
    let mut slot = base.clone();
    let eval = |net: &TargetNet<f64>, slot: &mut RngStream| {
        let views: Vec<_> = xs.iter().map(|x| x.view()).collect();
        let fw = net.forward(&views, mode(dropout, &base, slot)).unwrap();
        target.loss(fw.logits.view()).unwrap().0
    };
    let views: Vec<_> = xs.iter().map(|x| x.view()).collect();
    let fw = net.forward(&views, mode(dropout, &base, &mut slot)).unwrap();
    let (_, dlogits) = target.loss(fw.logits.view()).unwrap();
    let g = net.backward(&fw, dlogits.view()).unwrap();
    let mut worst = 0.0f64;
    let cls = net.classifier.clone();
    let num = numeric_grad(cls.num_params(), FD_STEP, |i, h| {
        let mut m = net.clone();
        m.classifier = shifted(&cls, i, h);
        eval(&m, &mut slot)
    });
    worst = worst.max(max_rel_err(&flat(&g.classifier), &num));
    for j in 0..dims.len() {
        let p = net.projectors[j].clone();
        let num = numeric_grad(p.num_params(), FD_STEP, |i, h| {
            let mut m = net.clone();
            m.projectors[j] = shifted(&p, i, h);
            eval(&m, &mut slot)
        });
        worst = worst.max(max_rel_err(&flat(&g.projectors[j]), &num));
    }
    worst
}
