mod common;

use common::*;
use hinsearch::neural::Activation;

const TOL: f64 = 1e-4;

#[test]
fn mlp_gradients_match_central_differences() {
    for seed in 0..5 {
        for act in [Activation::Relu, Activation::Tanh, Activation::Identity] {
            for dropout in [0.0, 0.3] {
                let e = mlp_fd_error(act, dropout, seed);
                assert!(e < TOL, "{act:?} dropout {dropout} seed {seed}: {e}");
            }
        }
    }
}

#[test]
fn loss_gradients_match_central_differences() {
    for seed in 0..5 {
        let e = loss_fd_error(seed);
        assert!(e < TOL, "seed {seed}: {e}");
    }
}

#[test]
fn supernet_gradients_match_central_differences() {
    for seed in 0..3 {
        for dropout in [0.0, 0.25] {
            for multi in [false, true] {
                let (w, a) = supernet_fd_error(dropout, multi, seed);
                assert!(w < TOL && a < TOL, "seed {seed} dropout {dropout} multi {multi}: omega {w} alpha {a}");
            }
        }
    }
}

#[test]
fn target_gradients_match_central_differences() {
    for seed in 0..3 {
        for dropout in [0.0, 0.25] {
            let e = target_fd_error(dropout, seed);
            assert!(e < TOL, "seed {seed} dropout {dropout}: {e}");
        }
    }
}
