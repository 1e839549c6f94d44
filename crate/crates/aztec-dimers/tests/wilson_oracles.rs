//! Wilson-based samplers checked against laws computed another way.

use std::collections::HashMap;

use aztec_dimers::kasteleyn::fullplane_edge_probability;
use aztec_dimers::lattice::{Coord, Direction, DIRS};
use aztec_dimers::sampler::{enumerate_tilings, RandomSeed};
use aztec_dimers::temperley::{inverse_temperley, south_forest};
use aztec_dimers::wilson::{
    backbone_subforest, lerw_first_step, sample_smooth_phase, wilson_forest, BiasedWalkParams, SmoothWindow,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi_square_p(counts: &[u64], probs: &[f64], total: u64) -> f64 {
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&k, &p)| {
            let e = p * total as f64;
            (k as f64 - e).powi(2) / e
        })
        .sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn completion_matches_conditional_enumeration() {
    let (n, a) = (4, 0.5);
    let tilings = enumerate_tilings(n, a).unwrap();
    let mut groups: HashMap<Vec<u8>, Vec<(Vec<u8>, f64)>> = HashMap::new();
    for (d, w) in &tilings {
        let bb = backbone_subforest(&south_forest(d)).unwrap();
        groups.entry(bb.parents().to_vec()).or_default().push((d.dirs().to_vec(), *w));
    }
    let (key, members) = groups.iter().max_by_key(|(k, v)| (v.len(), (*k).clone())).unwrap();
    assert!(members.len() >= 4, "largest backbone class has {} tilings", members.len());
    let fixed = {
        let (d, _) = tilings.iter().find(|(d, _)| backbone_subforest(&south_forest(d)).unwrap().parents() == key.as_slice()).unwrap();
        backbone_subforest(&south_forest(d)).unwrap()
    };
    let z: f64 = members.iter().map(|m| m.1).sum();
    let probs: Vec<f64> = members.iter().map(|m| m.1 / z).collect();
    let index: HashMap<&[u8], usize> = members.iter().enumerate().map(|(i, m)| (m.0.as_slice(), i)).collect();

    let g = fixed.graph();
    let total = 40_000u64;
    let mut counts = vec![0u64; members.len()];
    for k in 0..total {
        let f = wilson_forest(&g, Some(&fixed), RandomSeed::new(31, k)).unwrap();
        let d = inverse_temperley(&f).unwrap();
        let i = index.get(d.dirs()).expect("completion left the backbone class");
        counts[*i] += 1;
    }
    let p = chi_square_p(&counts, &probs, total);
    assert!(p > 1e-3, "{} tilings, p = {p}", members.len());
}

#[test]
fn lerw_first_step_matches_fullplane_dimer() {
    let a = 0.5;
    let params = BiasedWalkParams { direction: Direction::S, a };
    let w = Coord::new(1, 0);
    let total = 40_000usize;
    let mut rng = RandomSeed::new(77, 0).rng();
    let mut counts = [0usize; 4];
    for _ in 0..total {
        counts[lerw_first_step(params, 60, &mut rng) as usize] += 1;
    }
    for (d, &c) in counts.iter().enumerate() {
        let p = fullplane_edge_probability(a, w, w + DIRS[d]).unwrap();
        let hat = c as f64 / total as f64;
        let sigma = (p * (1.0 - p) / total as f64).sqrt();
        assert!((hat - p).abs() < 4.0 * sigma, "step {d}: {hat} vs {p} ({:.1} sigma)", (hat - p).abs() / sigma);
    }
}

#[test]
fn smooth_phase_insensitive_to_margin() {
    let a = 0.5;
    let total = 20_000usize;
    let w = Coord::new(1, 0);
    let marginals = |margin: i32, stream: u64| {
        let win = SmoothWindow::with_margin(2, a, margin).unwrap();
        let mut counts = [0usize; 4];
        for k in 0..total {
            let s = sample_smooth_phase(win, RandomSeed::new(stream, k as u64));
            for d in 0..4u8 {
                counts[d as usize] += s.has_dimer(w, d) as usize;
            }
        }
        counts.map(|c| c as f64 / total as f64)
    };
    let (p1, p2) = (marginals(16, 1), marginals(32, 2));
    for d in 0..4 {
        let p = 0.5 * (p1[d] + p2[d]);
        let sigma = (2.0 * p * (1.0 - p) / total as f64).sqrt();
        assert!((p1[d] - p2[d]).abs() < 4.0 * sigma, "step {d}: {} vs {}", p1[d], p2[d]);
    }
}
