mod common;

use common::*;
use hinsearch::aggregate::{compute_path_features, precompute_all, Aggregator};
use hinsearch::metapath::enumerate_metapaths;
use hinsearch::neural::{cross_entropy, Activation, Mode};
use hinsearch::rng::{Purpose, RngStream};
use hinsearch::search::{SearchConfig, SuperNet};
use hinsearch::target::TargetNet;
use ndarray::{concatenate, Array2, Axis};

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn supernet_forward_matches_loops() {
    for seed in 0..5u64 {
        let mut r = RngStream::new(seed, Purpose::Init);
        let in_dims = vec![3, 4, 2, 5];
        let cfg = SearchConfig { hidden: 6, ..SearchConfig::default() };
        let mut net = SuperNet::<f64>::new(in_dims.clone(), 3, &cfg, seed).unwrap();
        for a in net.alpha_mut().iter_mut() {
            *a = r.unit_f64() * 4.0 - 2.0;
        }
        let sampled = vec![1, 2, 3];
        let xs: Vec<Array2<f64>> = sampled.iter().map(|&k| rand_matrix(9, in_dims[k], &mut r)).collect();
        let views: Vec<_> = xs.iter().map(|x| x.view()).collect();
        let fw = net.forward(&views, &sampled, Mode::Eval).unwrap();

        let e: Vec<f64> = sampled.iter().map(|&k| net.alpha()[k].exp()).collect();
        let z: f64 = e.iter().sum();
        let mut fused = Array2::<f64>::zeros((9, 6));
        for (j, &k) in sampled.iter().enumerate() {
            fused = fused + mlp_loops(net.projector(k).unwrap(), &xs[j]) * (e[j] / z);
        }
        let want = mlp_loops(net.classifier(), &fused);
        assert!(max_abs_diff(&fw.logits, &want) < 1e-6);
        assert!((fw.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn target_forward_matches_loops() {
    for seed in 0..5u64 {
        let mut r = RngStream::new(seed, Purpose::Init);
        let dims = [4, 1, 3];
        let net = TargetNet::<f64>::new(&dims, 5, 4, Activation::Relu, seed).unwrap();
        let xs: Vec<Array2<f64>> = dims.iter().map(|&d| rand_matrix(7, d, &mut r)).collect();
        let views: Vec<_> = xs.iter().map(|x| x.view()).collect();
        let fw = net.forward(&views, Mode::Eval).unwrap();
        let parts: Vec<Array2<f64>> = net.projectors.iter().zip(&xs).map(|(p, x)| mlp_loops(p, x)).collect();
        let pv: Vec<_> = parts.iter().map(|p| p.view()).collect();
        let want = mlp_loops(&net.classifier, &concatenate(Axis(1), &pv).unwrap());
        assert_eq!(fw.logits.dim(), (7, 4));
        assert!(max_abs_diff(&fw.logits, &want) < 1e-6);
    }
}

#[test]
fn single_path_target_reduces_to_single_path_supernet() {
    let mut r = RngStream::new(3, Purpose::Init);
    let cfg = SearchConfig { hidden: 5, ..SearchConfig::default() };
    let mut sn = SuperNet::<f64>::new(vec![4, 6], 3, &cfg, 3).unwrap();
    sn.ensure_projectors(&[1]);
    let mut tn = TargetNet::<f64>::new(&[6], 5, 3, Activation::Relu, 9).unwrap();
    tn.projectors[0] = sn.projector(1).unwrap().clone();
    tn.classifier = sn.classifier().clone();
    let x = rand_matrix(8, 6, &mut r);
    let a = sn.forward(&[x.view()], &[1], Mode::Eval).unwrap();
    let b = tn.forward(&[x.view()], Mode::Eval).unwrap();
    assert_eq!(a.weights(), &[1.0]);
    assert_eq!(a.logits, b.logits);
}

#[test]
fn cross_entropy_matches_explicit_formula() {
    for seed in 0..5u64 {
        let mut r = RngStream::new(seed, Purpose::Init);
        let logits = rand_matrix(10, 5, &mut r).mapv(|v| v * 50.0);
        let classes: Vec<usize> = (0..10).map(|i| (i * 3 + seed as usize) % 5).collect();
        let (l, _) = cross_entropy(logits.view(), &classes).unwrap();
        assert!((l - ce_loops(&logits, &classes)).abs() < 1e-9);
    }
}

#[test]
fn sparse_chain_matches_dense_chain() {
    for seed in 0..40 {
        let h = random_hin(seed, 40);
        for p in enumerate_metapaths(h.schema(), 3, &[]).unwrap() {
            let got = compute_path_features(&h, &p).unwrap();
            assert!(max_abs_diff(got.as_array(), &dense_chain(&h, &p)) < 1e-9, "seed {seed} path {p}");
        }
    }
}

#[test]
fn memoized_and_plain_aggregation_agree_bitwise() {
    for seed in 0..10 {
        let h = random_hin(seed, 50);
        let paths = enumerate_metapaths(h.schema(), 4, &[]).unwrap();
        let mut memo = Aggregator::new(&h);
        let mut plain = Aggregator::without_memo(&h);
        for p in &paths {
            assert_eq!(memo.compute(p).unwrap(), plain.compute(p).unwrap(), "{p}");
        }
        assert!(memo.products() <= plain.products());
        let (a, _) = precompute_all(&h, &paths, None).unwrap();
        let (b, _) = precompute_all(&h, &paths, None).unwrap();
        assert_eq!(a.matrices(), b.matrices());
    }
}
