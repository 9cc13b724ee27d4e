use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::diffusion::Topology;
use crate::scene::{complex_gaussian, AtfMatrix, DesiredField, TargetMode};
use crate::C64;

pub fn random_vec(rng: &mut ChaCha20Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| complex_gaussian(rng, 1.0)).collect()
}

pub fn random_atf(rng: &mut ChaCha20Rng, m: usize, l: usize) -> AtfMatrix {
    let rows = (0..m).map(|_| random_vec(rng, l)).collect();
    AtfMatrix::from_rows(0.0, m / 2, rows).unwrap()
}

pub fn desired(values: Vec<C64>) -> DesiredField {
    DesiredField {
        freq: 0.0,
        n_bright: values.len() / 2,
        values,
        mode: TargetMode::Oracle,
    }
}

/// Random spanning tree plus a sprinkling of extra edges.
pub fn random_connected(rng: &mut ChaCha20Rng, n: usize) -> Topology {
    let mut edges = Vec::new();
    for k in 1..n {
        edges.push((k, rng.random_range(0..k)));
    }
    for _ in 0..rng.random_range(0..=n) {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        edges.push((a, b));
    }
    Topology::from_edges(n, &edges).unwrap()
}
