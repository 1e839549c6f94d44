//! Exact sampling of weighted Aztec diamond tilings by domino shuffling, plus an
//! exhaustive enumeration oracle for tiny sizes.
//!
//! Shuffling works in the rotated frame directly. The order-`k` diamond has vertex set
//! `[-k, k]^2`; its edges split into `k^2` cells, one per face `f` with both coordinates
//! congruent to `k + 1 mod 2` and `|f|_inf <= k - 1`. Growing from order `k - 1` to `k`,
//! each cell is handled independently: two old dimers annihilate, a single old dimer
//! slides to the opposite side of the cell, and an empty cell receives one of its two
//! dimer pairs with probability proportional to the pair weights. Weights for the
//! smaller orders come from the cell-by-cell urban renewal reduction.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lattice::{
    build_aztec, dir_of, opposite, vertex_color, AztecGraph, BoxIndex, Color, Coord, Gauge, DIRS, NO_DIR,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct RandomSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RandomSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        RandomSeed { seed, stream }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// A perfect matching of the size-`n` diamond, stored as one direction code per
/// vertex over the box `[-n, n]^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DimerConfig {
    pub n: i32,
    pub a: f64,
    pub seed: Option<RandomSeed>,
    mate: Vec<u8>,
}

impl DimerConfig {
    /// Builds a configuration from a direction array, validating the matching.
    pub fn from_dirs(n: i32, a: f64, mate: Vec<u8>, seed: Option<RandomSeed>) -> Result<Self> {
        let cfg = DimerConfig { n, a, seed, mate };
        if cfg.mate.len() != cfg.boxed().len() {
            return domain("direction array has the wrong length");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_pairs(n: i32, a: f64, pairs: &[(Coord, Coord)], seed: Option<RandomSeed>) -> Result<Self> {
        let bx = BoxIndex { r: n };
        let mut mate = vec![NO_DIR; bx.len()];
        for &(u, v) in pairs {
            if !(u.is_vertex() && v.is_vertex() && bx.contains(u) && bx.contains(v)) {
                return domain(format!("pair {u}-{v} leaves the diamond"));
            }
            let d = dir_of(v - u).ok_or_else(|| Error::Domain(format!("{u}-{v} is not an edge")))?;
            for (p, dp) in [(u, d), (v, opposite(d))] {
                let i = bx.index(p);
                if mate[i] != NO_DIR {
                    return domain(format!("vertex {p} matched twice"));
                }
                mate[i] = dp;
            }
        }
        Self::from_dirs(n, a, mate, seed)
    }

    pub fn boxed(&self) -> BoxIndex {
        BoxIndex { r: self.n }
    }

    pub fn dirs(&self) -> &[u8] {
        &self.mate
    }

    /// Direction code of the dimer at `v`.
    pub fn dir(&self, v: Coord) -> Option<u8> {
        if !self.boxed().contains(v) {
            return None;
        }
        let d = self.mate[self.boxed().index(v)];
        (d != NO_DIR).then_some(d)
    }

    pub fn partner(&self, v: Coord) -> Option<Coord> {
        self.dir(v).map(|d| v + DIRS[d as usize])
    }

    pub fn has_edge(&self, u: Coord, v: Coord) -> bool {
        self.partner(u) == Some(v)
    }

    /// Matched pairs as `(white, black)`, ordered by the white vertex.
    pub fn pairs(&self) -> Vec<(Coord, Coord)> {
        let bx = self.boxed();
        (0..bx.len())
            .filter(|&i| self.mate[i] != NO_DIR)
            .map(|i| bx.coord(i))
            .filter(|&v| vertex_color(v) == Color::White)
            .map(|w| (w, w + DIRS[self.mate[bx.index(w)] as usize]))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bx = self.boxed();
        for i in 0..bx.len() {
            let c = bx.coord(i);
            let d = self.mate[i];
            if !c.is_vertex() {
                if d != NO_DIR {
                    return domain(format!("face {c} carries a dimer"));
                }
                continue;
            }
            if d == NO_DIR || d > 3 {
                return domain(format!("vertex {c} is unmatched"));
            }
            let p = c + DIRS[d as usize];
            if !bx.contains(p) || self.mate[bx.index(p)] != opposite(d) {
                return domain(format!("dimer at {c} is not symmetric"));
            }
        }
        Ok(())
    }

    /// Product of two-periodic edge weights.
    pub fn weight(&self) -> f64 {
        let g = AztecGraph { n: self.n, a: self.a, gauge: Gauge::TwoPeriodic };
        self.weight_in(&g)
    }

    pub fn weight_in(&self, g: &AztecGraph) -> f64 {
        self.pairs().iter().map(|&(w, b)| g.edge_weight(w, b).expect("dimer is an edge")).product()
    }

    /// Compact key identifying the configuration (used for frequency tables).
    pub fn key(&self) -> Vec<u8> {
        self.pairs().iter().map(|&(w, b)| dir_of(b - w).unwrap()).collect()
    }
}

pub fn config_weight(d: &DimerConfig) -> f64 {
    d.weight()
}

/// Calls `visit` on every perfect matching of the size-`n` diamond in a fixed order.
/// Works for any `n >= 1`.
pub fn for_each_tiling(n: i32, mut visit: impl FnMut(&[u8])) {
    let bx = BoxIndex { r: n };
    let order: Vec<usize> = (0..bx.len()).filter(|&i| bx.coord(i).is_vertex()).collect();
    let mut mate = vec![NO_DIR; bx.len()];
    fn rec(bx: BoxIndex, order: &[usize], pos: usize, mate: &mut [u8], visit: &mut dyn FnMut(&[u8])) {
        let mut p = pos;
        while p < order.len() && mate[order[p]] != NO_DIR {
            p += 1;
        }
        if p == order.len() {
            visit(mate);
            return;
        }
        let i = order[p];
        let v = bx.coord(i);
        for d in 0..4u8 {
            let w = v + DIRS[d as usize];
            if !bx.contains(w) {
                continue;
            }
            let j = bx.index(w);
            if mate[j] != NO_DIR {
                continue;
            }
            mate[i] = d;
            mate[j] = opposite(d);
            rec(bx, order, p + 1, mate, visit);
            mate[i] = NO_DIR;
            mate[j] = NO_DIR;
        }
    }
    rec(bx, &order, 0, &mut mate, &mut visit);
}

/// All tilings of the size-`n` diamond with their two-periodic weights.
pub fn enumerate_tilings(n: i32, a: f64) -> Result<Vec<(DimerConfig, f64)>> {
    if n > 6 {
        return Err(Error::Resource(format!("enumeration at n = {n} exceeds the n <= 6 cap")));
    }
    if n < 1 {
        return domain("size must be positive");
    }
    let mut out = Vec::new();
    for_each_tiling(n, |m| {
        let cfg = DimerConfig { n, a, seed: None, mate: m.to_vec() };
        let w = cfg.weight();
        out.push((cfg, w));
    });
    Ok(out)
}

/// Creation probabilities `P(α γ)` for every cell of every order, produced by the
/// urban renewal reduction of an edge-weight function.
pub trait CellBias {
    /// Probability of creating the pair {W–N, E–S} in the order-`k` cell centred at `f`.
    fn prob(&self, k: i32, f: Coord) -> f64;
}

/// Doubled midpoint `2v + d` of the edge `{v, v + d}`; it identifies the edge.
fn mid2(v: Coord, d: u8) -> Coord {
    2 * v + DIRS[d as usize]
}

/// Doubled midpoints of the cell edges α = W–N, β = N–E, γ = E–S, δ = S–W.
fn cell_mids(f: Coord) -> [Coord; 4] {
    let c = 2 * f;
    [c + Coord::new(-1, 1), c + Coord::new(1, 1), c + Coord::new(1, -1), c + Coord::new(-1, -1)]
}

/// Centre of the order-`k` cell containing the edge with doubled midpoint `m`.
fn cell_of(k: i32, m: Coord) -> Coord {
    let pick = |t: i32| {
        // 2f = t ± 1 with f ≡ k + 1 (mod 2).
        let lo = t - 1;
        if (lo / 2 - (k + 1)).rem_euclid(2) == 0 {
            lo / 2
        } else {
            (t + 1) / 2
        }
    };
    Coord::new(pick(m.x), pick(m.y))
}

/// Bias for two-periodic weights. Derived weights stay periodic under the translations
/// `(2,2)` and `(2,-2)`, so each order needs only a table over doubled midpoints mod 8.
#[derive(Clone, Debug)]
pub struct PeriodicBias {
    /// `tables[k]` holds order-`k` weights keyed by doubled midpoint mod 8.
    tables: Vec<[f64; 64]>,
    /// `probs[k]` keyed by cell centre mod 4.
    probs: Vec<[f64; 16]>,
    /// Natural log of the partition function of the order-`n` diamond.
    pub log_z: f64,
}

fn key8(m: Coord) -> usize {
    (m.x.rem_euclid(8) * 8 + m.y.rem_euclid(8)) as usize
}

fn key4(f: Coord) -> usize {
    (f.x.rem_euclid(4) * 4 + f.y.rem_euclid(4)) as usize
}

impl PeriodicBias {
    pub fn new(n: i32, a: f64) -> Self {
        let mut top = [0.0; 64];
        for mx in 0..8 {
            for my in 0..8 {
                let m = Coord::new(mx, my);
                if mx % 2 == 1 && my % 2 == 1 {
                    // The edge with this doubled midpoint runs along e1 or e2.
                    let along_e1 = Coord::new((mx - 1) / 2, (my - 1) / 2);
                    let (v, d) = if along_e1.is_vertex() {
                        (along_e1, 0)
                    } else {
                        (Coord::new((mx + 1) / 2, (my - 1) / 2), 1)
                    };
                    let g = AztecGraph { n: 4, a, gauge: Gauge::TwoPeriodic };
                    top[key8(m)] = g.edge_weight_dir(v, d);
                }
            }
        }
        let nu = n as usize;
        let mut tables = vec![[0.0; 64]; nu + 1];
        let mut probs = vec![[0.0; 16]; nu + 1];
        tables[nu] = top;
        let mut log_z = 0.0;
        for k in (1..=n).rev() {
            let w = tables[k as usize];
            let ncells = (k * k) as f64;
            // Two classes of cells per order; each appears k^2/2 times for even k.
            let mut cls_log = [0.0; 16];
            let mut cls_count = [0.0; 16];
            let mut next = [0.0; 64];
            for fx in 0..4 {
                for fy in 0..4 {
                    let f = Coord::new(fx, fy);
                    if (fx - (k + 1)).rem_euclid(2) != 0 || (fy - (k + 1)).rem_euclid(2) != 0 {
                        continue;
                    }
                    let [al, be, ga, de] = cell_mids(f).map(|m| w[key8(m)]);
                    let delta = al * ga + be * de;
                    probs[k as usize][key4(f)] = al * ga / delta;
                    cls_log[key4(f)] = delta.ln();
                    for (i, m) in cell_mids(f).iter().enumerate() {
                        let opp = cell_mids(f)[(i + 2) % 4];
                        next[key8(*m)] = w[key8(opp)] / delta;
                    }
                }
            }
            // Count cells of order k by class mod 4.
            for fx in (-(k - 1)..=(k - 1)).step_by(2) {
                for fy in (-(k - 1)..=(k - 1)).step_by(2) {
                    cls_count[key4(Coord::new(fx, fy))] += 1.0;
                }
            }
            debug_assert_eq!(cls_count.iter().sum::<f64>(), ncells);
            log_z += (0..16).map(|i| cls_log[i] * cls_count[i]).sum::<f64>();
            if k > 1 {
                let scale = next.iter().cloned().fold(0.0, f64::max);
                for x in next.iter_mut() {
                    *x /= scale;
                }
                // Z_{k-1}(w) = scale^{|V_{k-1}|/2} Z_{k-1}(w / scale).
                let half_v = ((k - 1) * k) as f64;
                log_z += half_v * scale.ln();
                tables[(k - 1) as usize] = next;
            }
        }
        PeriodicBias { tables, probs, log_z }
    }

    /// Order-`k` weight of the edge with doubled midpoint `m` (normalised per order).
    pub fn weight(&self, k: i32, m: Coord) -> f64 {
        self.tables[k as usize][key8(m)]
    }
}

impl CellBias for PeriodicBias {
    fn prob(&self, k: i32, f: Coord) -> f64 {
        self.probs[k as usize][key4(f)]
    }
}

/// Bias for arbitrary positive edge weights, stored per order in hash maps keyed by
/// doubled midpoints. Intended for validation at small sizes.
#[derive(Clone, Debug)]
pub struct DenseBias {
    probs: Vec<HashMap<Coord, f64>>,
    pub log_z: f64,
}

impl DenseBias {
    /// `weight(v, d)` gives the weight of edge `{v, v + DIRS[d]}` in the order-`n` diamond.
    pub fn new(n: i32, weight: impl Fn(Coord, u8) -> f64) -> Self {
        let mut w: HashMap<Coord, f64> = HashMap::new();
        let bx = BoxIndex { r: n };
        for i in 0..bx.len() {
            let v = bx.coord(i);
            if !v.is_vertex() {
                continue;
            }
            for d in 0..4u8 {
                if bx.contains(v + DIRS[d as usize]) {
                    w.insert(mid2(v, d), weight(v, d));
                }
            }
        }
        let mut probs = vec![HashMap::new(); n as usize + 1];
        let mut log_z = 0.0;
        for k in (1..=n).rev() {
            let mut next = HashMap::new();
            for fx in (-(k - 1)..=(k - 1)).step_by(2) {
                for fy in (-(k - 1)..=(k - 1)).step_by(2) {
                    let f = Coord::new(fx, fy);
                    let ms = cell_mids(f);
                    let [al, be, ga, de] = ms.map(|m| w[&m]);
                    let delta = al * ga + be * de;
                    log_z += delta.ln();
                    probs[k as usize].insert(f, al * ga / delta);
                    for i in 0..4 {
                        let m = ms[i];
                        if m.x.abs() < 2 * (k - 1) + 1 && m.y.abs() < 2 * (k - 1) + 1 {
                            next.insert(m, w[&ms[(i + 2) % 4]] / delta);
                        }
                    }
                }
            }
            debug_assert!(k == 1 || next.keys().all(|&m| cell_of(k, m).linf() <= k - 1));
            w = next;
        }
        DenseBias { probs, log_z }
    }
}

impl CellBias for DenseBias {
    fn prob(&self, k: i32, f: Coord) -> f64 {
        self.probs[k as usize][&f]
    }
}

/// Runs the shuffling chain up to order `n` and returns the direction array over
/// `[-n, n]^2`.
pub fn shuffle<B: CellBias, R: Rng>(n: i32, bias: &B, rng: &mut R) -> Vec<u8> {
    let bx = BoxIndex { r: n };
    let stride = bx.side();
    let mut old = vec![NO_DIR; bx.len()];
    let mut new = vec![NO_DIR; bx.len()];
    for k in 1..=n {
        for x in new.iter_mut() {
            *x = NO_DIR;
        }
        let lo = -(k - 1);
        for fy in (lo..=k - 1).step_by(2) {
            for fx in (lo..=k - 1).step_by(2) {
                let f = Coord::new(fx, fy);
                let c = bx.index(f);
                let (wi, ei, ni, si) = (c - 1, c + 1, c + stride, c - stride);
                let alpha = old[wi] == 0;
                let beta = old[ni] == 3;
                let gamma = old[ei] == 2;
                let delta = old[si] == 1;
                let count = alpha as u8 + beta as u8 + gamma as u8 + delta as u8;
                let place_ac = |new: &mut Vec<u8>| {
                    new[wi] = 0;
                    new[ni] = 2;
                    new[ei] = 2;
                    new[si] = 0;
                };
                let place_bd = |new: &mut Vec<u8>| {
                    new[ni] = 3;
                    new[ei] = 1;
                    new[si] = 1;
                    new[wi] = 3;
                };
                match count {
                    0 => {
                        if rng.random::<f64>() < bias.prob(k, f) {
                            place_ac(&mut new);
                        } else {
                            place_bd(&mut new);
                        }
                    }
                    1 => {
                        if alpha {
                            new[ei] = 2;
                            new[si] = 0;
                        } else if beta {
                            new[si] = 1;
                            new[wi] = 3;
                        } else if gamma {
                            new[wi] = 0;
                            new[ni] = 2;
                        } else {
                            new[ni] = 3;
                            new[ei] = 1;
                        }
                    }
                    _ => {}
                }
            }
        }
        std::mem::swap(&mut old, &mut new);
        #[cfg(debug_assertions)]
        if n <= 32 {
            debug_check_order(&old, bx, k);
        }
    }
    old
}

#[cfg(debug_assertions)]
fn debug_check_order(mate: &[u8], bx: BoxIndex, k: i32) {
    for i in 0..bx.len() {
        let c = bx.coord(i);
        let inside = c.is_vertex() && c.linf() <= k;
        if inside {
            let d = mate[i];
            assert!(d < 4, "vertex {c} unmatched at order {k}");
            let p = c + DIRS[d as usize];
            assert!(p.linf() <= k && mate[bx.index(p)] == opposite(d), "asymmetric dimer at {c}");
        } else {
            assert_eq!(mate[i], NO_DIR, "stray dimer at {c}, order {k}");
        }
    }
}

/// Exact sample from the two-periodic measure of size `n`.
pub fn sample(n: i32, a: f64, seed: RandomSeed) -> Result<DimerConfig> {
    build_aztec(n, a, Gauge::TwoPeriodic)?;
    let bias = PeriodicBias::new(n, a);
    Ok(sample_with(n, a, &bias, seed))
}

/// Sampling with a precomputed bias; reuse it across many samples of the same `(n, a)`.
pub fn sample_with(n: i32, a: f64, bias: &PeriodicBias, seed: RandomSeed) -> DimerConfig {
    let mut rng = seed.rng();
    let mate = shuffle(n, bias, &mut rng);
    DimerConfig { n, a, seed: Some(seed), mate }
}
