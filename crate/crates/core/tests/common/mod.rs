//! Shared fixtures and reference implementations for the integration tests.
#![allow(dead_code)]

use morphogen::{Mesh, Vertex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight transcription of the neuron rule, one neuron at a time, read
/// directly off the flat parameter list:
///
/// ```text
/// for each layer l ≥ 1, for each neuron j:
///     a = -threshold
///     for each neuron k of layer l-1: a += (value_k - 0.5) * weight_jk
///     value_j = 1 / (1 + exp(-a))
/// ```
pub fn naive_evaluate(layer_sizes: &[usize], params: &[f64], input: &[f64]) -> Vec<f64> {
    let mut prev = input.to_vec();
    let mut p = 0;
    for l in 1..layer_sizes.len() {
        let mut next = Vec::new();
        for _ in 0..layer_sizes[l] {
            let mut a = -params[p];
            p += 1;
            for k in 0..layer_sizes[l - 1] {
                a += (prev[k] - 0.5) * params[p];
                p += 1;
            }
            next.push(1.0 / (1.0 + (-a).exp()));
        }
        prev = next;
    }
    assert_eq!(p, params.len());
    prev
}

/// Inputs shaped like real ones: outputs and statistics in [0, 1], then a
/// unit direction and a height.
pub fn realistic_input(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| rng.random()).collect();
    let d: [f64; 3] = [
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(0.1..1.0),
    ];
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    v[len - 4] = d[0] / n;
    v[len - 3] = d[1] / n;
    v[len - 2] = d[2] / n;
    v[len - 1] = rng.random_range(0.0..25.0);
    v
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Axis-aligned square `[-s/2, s/2]²` at height `z`, split into `n × n`
/// quads of two triangles each.
pub fn platform(side: f64, z: f64, n: usize) -> Mesh {
    let h = side / n as f64;
    let mut verts = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            verts.push(Vertex {
                position: [-side / 2.0 + i as f64 * h, -side / 2.0 + j as f64 * h, z],
                growth_dir: [0.0, 0.0, 1.0],
            });
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = Vec::new();
    for j in 0..n {
        for i in 0..n {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::from_parts(verts, faces).unwrap()
}

/// Exact integral of the canopy weight over a flat square of area `area`
/// at height `z`.
pub fn platform_integral(area: f64, z: f64) -> f64 {
    area / (1.0 + (10.0 - z).exp())
}
