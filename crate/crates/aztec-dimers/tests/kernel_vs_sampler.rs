//! Shuffling marginals against edge probabilities from the inverse Kasteleyn matrix.

use aztec_dimers::kasteleyn::build_k;
use aztec_dimers::lattice::{Coord, DIRS};
use aztec_dimers::sampler::{sample, RandomSeed};
use rand::seq::IndexedRandom;

#[test]
fn sampler_marginals_match_kernel() {
    let (n, a) = (8, 0.5);
    let mut k = build_k(n, a).unwrap();
    k.invert().unwrap();
    let mut rng = RandomSeed::new(5, 0).rng();
    let mut edges: Vec<(Coord, Coord)> = Vec::new();
    while edges.len() < 20 {
        let w = *k.whites.choose(&mut rng).unwrap();
        let b = w + *DIRS.choose(&mut rng).unwrap();
        if k.black_pos(b).is_some() && !edges.contains(&(w, b)) {
            edges.push((w, b));
        }
    }
    let total = 100_000usize;
    let mut hits = vec![0usize; edges.len()];
    for s in 0..total {
        let d = sample(n, a, RandomSeed::new(6, s as u64)).unwrap();
        for (i, &(w, b)) in edges.iter().enumerate() {
            hits[i] += d.has_edge(w, b) as usize;
        }
    }
    for (&(w, b), &h) in edges.iter().zip(&hits) {
        let p = k.edge_probability(&[(w, b)]).unwrap();
        let hat = h as f64 / total as f64;
        let sigma = (p * (1.0 - p) / total as f64).sqrt().max(1e-9);
        assert!((hat - p).abs() < 4.0 * sigma, "{w}-{b}: {hat} vs {p}");
    }
}
