//! Biased random walks, loop erasure and Wilson's algorithm.
//!
//! Covers finite forests `Forest(G | H)` on Temperley graphs, the full-plane smooth phase
//! on a finite window (Wilson rooted at infinity, truncated by a drift margin), and
//! the parabolic confinement event for forest paths.

use std::collections::{HashMap, VecDeque};

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lattice::{classify_vertex, opposite, BoxIndex, Coord, Direction, TemperleyGraph, DIRS, NO_DIR};
use crate::sampler::RandomSeed;
use crate::temperley::{backbone, winding, OrientedForest};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasedWalkParams {
    pub direction: Direction,
    pub a: f64,
}

impl BiasedWalkParams {
    /// Step probabilities indexed like `DIRS`.
    pub fn probabilities(&self) -> [f64; 4] {
        let a2 = self.a * self.a;
        let heavy = a2 / (2.0 + 2.0 * a2);
        let light = 1.0 / (2.0 + 2.0 * a2);
        let mut p = [0.0; 4];
        for (d, e) in DIRS.iter().enumerate() {
            let north = e.y > 0;
            let is_heavy = match self.direction {
                Direction::S => north,
                Direction::N => !north,
            };
            p[d] = if is_heavy { heavy } else { light };
        }
        p
    }

    /// Mean vertical displacement per step, in units of one diagonal step.
    pub fn drift(&self) -> f64 {
        let a2 = self.a * self.a;
        let s = (a2 - 1.0) / (1.0 + a2);
        match self.direction {
            Direction::S => s,
            Direction::N => -s,
        }
    }

    pub fn sampler(&self) -> StepSampler {
        StepSampler { alias: WeightedAliasIndex::new(self.probabilities().to_vec()).expect("positive weights") }
    }
}

/// O(1) draws of step codes.
#[derive(Clone, Debug)]
pub struct StepSampler {
    alias: WeightedAliasIndex<f64>,
}

impl StepSampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        self.alias.sample(rng) as u8
    }
}

/// Chronological loop erasure.
pub fn loop_erase(walk: &[Coord]) -> Result<Vec<Coord>> {
    if walk.is_empty() {
        return domain("cannot loop-erase an empty walk");
    }
    let mut out: Vec<Coord> = Vec::with_capacity(walk.len());
    let mut pos: HashMap<Coord, usize> = HashMap::new();
    for &v in walk {
        if let Some(&i) = pos.get(&v) {
            for u in out.drain(i + 1..) {
                pos.remove(&u);
            }
        } else {
            pos.insert(v, out.len());
            out.push(v);
        }
    }
    Ok(out)
}

/// Left-to-right rows from the bottom, alternating direction each row.
pub fn boustrophedon(g: &TemperleyGraph) -> Vec<Coord> {
    let mut rows: Vec<Vec<Coord>> = Vec::new();
    let mut last_y = None;
    for v in g.vertices() {
        if last_y != Some(v.y) {
            rows.push(Vec::new());
            last_y = Some(v.y);
        }
        rows.last_mut().unwrap().push(v);
    }
    rows.into_iter()
        .enumerate()
        .flat_map(|(k, mut r)| {
            if k % 2 == 1 {
                r.reverse();
            }
            r
        })
        .collect()
}

/// Samples `Forest(G | H)` with `H = fixed` (or the sinks alone).
pub fn wilson_forest(g: &TemperleyGraph, fixed: Option<&OrientedForest>, seed: RandomSeed) -> Result<OrientedForest> {
    let order = boustrophedon(g);
    wilson_forest_ordered(g, fixed, &order, &mut seed.rng())
}

pub fn wilson_forest_ordered<R: Rng + ?Sized>(
    g: &TemperleyGraph,
    fixed: Option<&OrientedForest>,
    order: &[Coord],
    rng: &mut R,
) -> Result<OrientedForest> {
    let len = g.index_len();
    let mut in_tree = vec![false; len];
    let mut parent = vec![NO_DIR; len];
    for s in g.sinks() {
        in_tree[g.index(s)] = true;
    }
    if let Some(h) = fixed {
        if h.direction != g.direction || h.n != g.n {
            return Err(Error::Config("fixed subforest lives on a different graph".into()));
        }
        for (v, p) in h.edges() {
            if !g.contains(v) || !g.contains(p) {
                return domain(format!("fixed edge {v}->{p} leaves the graph"));
            }
            parent[g.index(v)] = h.parent_dir(v).unwrap();
            in_tree[g.index(v)] = true;
            in_tree[g.index(p)] = true;
        }
    }
    // Every vertex must reach the absorbing set.
    let mut reach = in_tree.clone();
    let mut queue: VecDeque<Coord> = (0..len).filter(|&i| reach[i]).map(|i| g.coord(i)).collect();
    while let Some(u) = queue.pop_front() {
        for d in 0..4u8 {
            if let Some(w) = g.step(u, d) {
                let wi = g.index(w);
                if !reach[wi] {
                    reach[wi] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    if let Some(v) = g.vertices().find(|&v| !reach[g.index(v)]) {
        return domain(format!("vertex {v} cannot reach a sink or the fixed subforest"));
    }
    let steps = BiasedWalkParams { direction: g.direction, a: g.a }.sampler();
    let mut next = vec![NO_DIR; len];
    for &v in order.iter().chain(g.vertices().collect::<Vec<_>>().iter()) {
        if in_tree[g.index(v)] {
            continue;
        }
        let mut u = v;
        while !in_tree[g.index(u)] {
            let (d, w) = loop {
                let d = steps.draw(rng);
                if let Some(w) = g.step(u, d) {
                    break (d, w);
                }
            };
            next[g.index(u)] = d;
            u = w;
        }
        let mut u = v;
        while !in_tree[g.index(u)] {
            let i = g.index(u);
            in_tree[i] = true;
            parent[i] = next[i];
            u = u + 2 * DIRS[next[i] as usize];
        }
    }
    OrientedForest::from_parents(g.direction, g.n, g.a, parent)
}

/// The subforest made of the backbone paths of a DCF.
pub fn backbone_subforest(f: &OrientedForest) -> Result<OrientedForest> {
    let b = backbone(f)?;
    let mut out = OrientedForest::empty(f.direction, f.n, f.a)?;
    for p in &b.paths {
        for &v in &p.vertices[..p.vertices.len() - 1] {
            out.set_parent(v, f.parent_dir(v))?;
        }
    }
    Ok(out)
}

/// A finite window of the full-plane smooth phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothWindow {
    pub half_width: i32,
    pub margin: i32,
    pub a: f64,
}

impl SmoothWindow {
    /// Margin `8 ceil(log(half_width / accuracy))`.
    pub fn new(half_width: i32, a: f64, accuracy: f64) -> Result<Self> {
        if half_width < 1 {
            return Err(Error::Config("window half width must be at least 1".into()));
        }
        if !(accuracy > 0.0 && accuracy < 1.0) {
            return Err(Error::Config("accuracy must lie in (0, 1)".into()));
        }
        let margin = 8 * ((half_width as f64 / accuracy).ln().ceil() as i32).max(1);
        Self::with_margin(half_width, a, margin)
    }

    pub fn with_margin(half_width: i32, a: f64, margin: i32) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::Config(format!("smooth phase needs a in (0, 1), got {a}")));
        }
        if margin < 1 || half_width < 1 {
            return Err(Error::Config("margin and half width must be positive".into()));
        }
        Ok(SmoothWindow { half_width, margin, a })
    }

    fn outer(&self) -> BoxIndex {
        BoxIndex { r: self.half_width + self.margin }
    }
}

/// South tree and dual north forest on the enlarged window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothSample {
    pub window: SmoothWindow,
    /// Step codes for `S` vertices (towards infinity) and `N` vertices (towards the
    /// highest vertex of their component), over the enlarged box.
    parent: Vec<u8>,
}

fn is_class(v: Coord, direction: Direction) -> bool {
    v.is_vertex() && classify_vertex(v).map(|c| c == direction.class()).unwrap_or(false)
}

pub fn sample_smooth_phase(w: SmoothWindow, seed: RandomSeed) -> SmoothSample {
    let mut rng = seed.rng();
    let bx = w.outer();
    let len = bx.len();
    let mut parent = vec![NO_DIR; len];
    let mut in_tree = vec![false; len];
    let steps = BiasedWalkParams { direction: Direction::S, a: w.a }.sampler();
    let mut next = vec![NO_DIR; len];
    let south: Vec<Coord> = (0..len).map(|i| bx.coord(i)).filter(|&v| is_class(v, Direction::S)).collect();
    for &v in &south {
        if in_tree[bx.index(v)] {
            continue;
        }
        let mut u = v;
        while bx.contains(u) && !in_tree[bx.index(u)] {
            let d = steps.draw(&mut rng);
            next[bx.index(u)] = d;
            u = u + 2 * DIRS[d as usize];
        }
        let mut u = v;
        while bx.contains(u) && !in_tree[bx.index(u)] {
            let i = bx.index(u);
            in_tree[i] = true;
            parent[i] = next[i];
            u = u + 2 * DIRS[next[i] as usize];
        }
    }
    // Dual edges: a north edge survives when the south edge through its midpoint is absent.
    let south_uses = |b: Coord, parent: &[u8]| -> bool {
        (0..4u8).any(|d| {
            let v = b - DIRS[d as usize];
            is_class(v, Direction::S) && bx.contains(v) && parent[bx.index(v)] == d
        })
    };
    let north: Vec<Coord> = (0..len).map(|i| bx.coord(i)).filter(|&v| is_class(v, Direction::N)).collect();
    let mut adj: HashMap<Coord, Vec<u8>> = HashMap::new();
    for &u in &north {
        for d in 0..4u8 {
            let t = u + 2 * DIRS[d as usize];
            if bx.contains(t) && !south_uses(u + DIRS[d as usize], &parent) {
                adj.entry(u).or_default().push(d);
            }
        }
    }
    // Root each dual component at its highest vertex (smallest x on ties).
    let mut seen = vec![false; len];
    let mut by_height = north.clone();
    by_height.sort_by_key(|v| (-v.y, v.x));
    for &r in &by_height {
        if seen[bx.index(r)] {
            continue;
        }
        seen[bx.index(r)] = true;
        let mut queue = VecDeque::from([r]);
        while let Some(u) = queue.pop_front() {
            for &d in adj.get(&u).map(|v| v.as_slice()).unwrap_or(&[]) {
                let t = u + 2 * DIRS[d as usize];
                let ti = bx.index(t);
                if !seen[ti] {
                    seen[ti] = true;
                    parent[ti] = opposite(d);
                    queue.push_back(t);
                }
            }
        }
    }
    SmoothSample { window: w, parent }
}

impl SmoothSample {
    /// Tree step out of a white vertex of the enlarged window.
    pub fn parent_dir(&self, v: Coord) -> Option<u8> {
        let bx = self.window.outer();
        if !bx.contains(v) {
            return None;
        }
        let d = self.parent[bx.index(v)];
        (d != NO_DIR).then_some(d)
    }

    /// Dimer partner of a white vertex inside the inner window.
    pub fn partner(&self, v: Coord) -> Option<Coord> {
        self.parent_dir(v).map(|d| v + DIRS[d as usize])
    }

    /// Whether the dimer `{w, w + DIRS[d]}` is present, `w` white.
    pub fn has_dimer(&self, w: Coord, d: u8) -> bool {
        self.parent_dir(w) == Some(d)
    }

    /// South tree path from `v` until it leaves the enlarged window.
    pub fn south_path(&self, v: Coord) -> Vec<Coord> {
        let bx = self.window.outer();
        let mut out = vec![v];
        let mut u = v;
        while let Some(d) = self.parent_dir(u) {
            u = u + 2 * DIRS[d as usize];
            out.push(u);
            if !bx.contains(u) {
                break;
            }
        }
        out
    }
}

/// Height at an a-face, anchored at infinity: `-4` times the winding of the south path
/// started just below the face.
pub fn smooth_height(s: &SmoothSample, f: Coord) -> Result<i32> {
    if !f.is_face() || crate::lattice::classify_face(f)? != crate::lattice::FaceClass::A {
        return domain(format!("{f} is not an a-face"));
    }
    let path = s.south_path(f - Coord::new(0, 1));
    let end = *path.last().unwrap();
    let r = s.window.half_width + s.window.margin;
    if end.y >= -r {
        return Err(Error::Resource(format!(
            "south path from {f} left the window at {end} instead of the bottom; enlarge the margin"
        )));
    }
    Ok(-4 * winding(&path, f) as i32)
}

/// First step of the loop-erased biased walk from the origin vertex `(1, 0)`: the step
/// taken at the last visit to the start before the walk falls `depth` rows below it.
pub fn lerw_first_step<R: Rng + ?Sized>(params: BiasedWalkParams, depth: i32, rng: &mut R) -> u8 {
    let steps = params.sampler();
    let start = Coord::new(1, 0);
    let sign = match params.direction {
        Direction::S => 1,
        Direction::N => -1,
    };
    let mut u = start;
    let mut first = NO_DIR;
    loop {
        let d = steps.draw(rng);
        if u == start {
            first = d;
        }
        u = u + 2 * DIRS[d as usize];
        if sign * (start.y - u.y) > depth {
            return first;
        }
    }
}

/// `P^α_S`, or its rotation by `π` for north paths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicRegion {
    pub alpha: f64,
    pub direction: Direction,
}

impl ParabolicRegion {
    pub fn contains(&self, p: (f64, f64)) -> bool {
        let (x, y) = match self.direction {
            Direction::S => p,
            Direction::N => (-p.0, -p.1),
        };
        let ym = (-y).max(0.0);
        y <= self.alpha && x.abs() <= (self.alpha + (ym + 1.0).ln()) * (ym + 1.0).sqrt()
    }
}

pub fn parabola_event(path: &[Coord], region: ParabolicRegion, origin: Coord) -> bool {
    path.iter().all(|&v| region.contains(((v.x - origin.x) as f64, (v.y - origin.y) as f64)))
}

/// Whether every forest path started off the backbone stays in its parabola until it
/// meets the backbone.
pub fn off_backbone_parabola_event(f: &OrientedForest, alpha: f64) -> Result<bool> {
    let g = f.graph();
    let bb = backbone_subforest(f)?;
    let on_backbone = |v: Coord| g.is_sink(v) || bb.parent_dir(v).is_some();
    let region = ParabolicRegion { alpha, direction: f.direction };
    for v in g.vertices().filter(|&v| !on_backbone(v)) {
        let mut path = vec![v];
        let mut u = v;
        while !on_backbone(u) {
            u = f.parent(u).ok_or_else(|| Error::Domain(format!("{u} has no parent")))?;
            path.push(u);
        }
        if !parabola_event(&path, region, v) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_temperley_graph;
    use crate::sampler::sample;
    use crate::temperley::{is_dcf, south_forest, validate_dcf};

    #[test]
    fn loop_erase_examples() {
        let a = Coord::new(1, 0);
        let b = Coord::new(3, 2);
        let c = Coord::new(-1, 2);
        assert_eq!(loop_erase(&[a, b, a, c]).unwrap(), vec![a, c]);
        assert_eq!(loop_erase(&[a, b, c]).unwrap(), vec![a, b, c]);
        assert!(loop_erase(&[]).is_err());
        let once = loop_erase(&[a, b, c, b, a, c, b]).unwrap();
        assert_eq!(loop_erase(&once).unwrap(), once);
    }

    #[test]
    fn probabilities_and_drift() {
        let p = BiasedWalkParams { direction: Direction::S, a: 0.5 };
        let pr = p.probabilities();
        assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((pr[0] - 0.25 / 2.5).abs() < 1e-12);
        assert!((pr[2] - 1.0 / 2.5).abs() < 1e-12);
        let s = p.sampler();
        let mut rng = RandomSeed::new(4, 0).rng();
        let n = 400_000;
        let mean = (0..n).map(|_| DIRS[s.draw(&mut rng) as usize].y as f64).sum::<f64>() / n as f64;
        let sd = (1.0 - p.drift().powi(2)).sqrt() / (n as f64).sqrt();
        assert!((mean - p.drift()).abs() < 3.0 * sd, "mean {mean} drift {}", p.drift());
    }

    #[test]
    fn wilson_outputs_forests() {
        let g = build_temperley_graph(Direction::S, 16, 0.5).unwrap();
        for seed in 0..5 {
            let f = wilson_forest(&g, None, RandomSeed::new(seed, 0)).unwrap();
            let r = validate_dcf(&f);
            // Only the cross rule may fail without a fixed backbone.
            assert!(r.violations.iter().all(|v| v.item == crate::temperley::DcfItem::III));
        }
    }

    #[test]
    fn completing_a_backbone_gives_a_dcf() {
        for seed in 0..5 {
            let d = sample(16, 0.5, RandomSeed::new(seed, 1)).unwrap();
            let f = south_forest(&d);
            let bb = backbone_subforest(&f).unwrap();
            let g = f.graph();
            let out = wilson_forest(&g, Some(&bb), RandomSeed::new(seed, 2)).unwrap();
            assert!(is_dcf(&out));
            for (v, _) in bb.edges() {
                assert_eq!(out.parent_dir(v), bb.parent_dir(v));
            }
        }
    }

    #[test]
    fn unreachable_vertices_are_rejected() {
        // A fixed edge on a different graph is a configuration error.
        let g = build_temperley_graph(Direction::S, 8, 0.5).unwrap();
        let other = OrientedForest::empty(Direction::N, 8, 0.5).unwrap();
        assert!(wilson_forest(&g, Some(&other), RandomSeed::new(0, 0)).is_err());
    }

    #[test]
    fn smooth_heights_are_centered() {
        let w = SmoothWindow::new(4, 0.5, 0.01).unwrap();
        let f = Coord::new(1, 1);
        let mut sum = 0i64;
        let mut sq = 0i64;
        let n = 400;
        for k in 0..n {
            let s = sample_smooth_phase(w, RandomSeed::new(k, 11));
            let h = smooth_height(&s, f).unwrap() as i64;
            sum += h;
            sq += h * h;
        }
        let mean = sum as f64 / n as f64;
        let sd = ((sq as f64 / n as f64 - mean * mean).max(1.0) / n as f64).sqrt();
        assert!(mean.abs() < 4.0 * sd, "mean {mean}");
    }

    #[test]
    fn smooth_dimers_form_a_matching() {
        let w = SmoothWindow::with_margin(6, 0.5, 30).unwrap();
        let s = sample_smooth_phase(w, RandomSeed::new(3, 0));
        let mut used = std::collections::HashSet::new();
        for x in -6..=6 {
            for y in -6..=6 {
                let v = Coord::new(x, y);
                if v.is_vertex() && crate::lattice::vertex_color(v) == crate::lattice::Color::White {
                    let p = s.partner(v).unwrap();
                    assert!(used.insert(p), "black {p} matched twice");
                }
            }
        }
    }

    #[test]
    fn lerw_first_step_is_biased_south() {
        let p = BiasedWalkParams { direction: Direction::S, a: 0.5 };
        let mut rng = RandomSeed::new(9, 0).rng();
        let mut counts = [0usize; 4];
        for _ in 0..20_000 {
            counts[lerw_first_step(p, 40, &mut rng) as usize] += 1;
        }
        assert!(counts[2] + counts[3] > counts[0] + counts[1]);
        // Reflection across a vertical line swaps the two south steps.
        let diff = (counts[2] as f64 - counts[3] as f64).abs();
        assert!(diff < 4.0 * ((counts[2] + counts[3]) as f64).sqrt());
    }

    #[test]
    fn parabola_examples() {
        let r = ParabolicRegion { alpha: 2.0, direction: Direction::S };
        let o = Coord::new(1, 0);
        assert!(parabola_event(&[o], r, o));
        let y: i32 = 8;
        let bound = (2.0 + ((y + 1) as f64).ln()) * ((y + 1) as f64).sqrt();
        let x = bound.floor() as i32 + 2;
        assert!(!parabola_event(&[o, o + Coord::new(x, -y)], r, o));
        assert!(!parabola_event(&[o, o + Coord::new(0, 4)], r, o));
        let rn = ParabolicRegion { alpha: 2.0, direction: Direction::N };
        assert!(parabola_event(&[o, o + Coord::new(0, 6)], rn, o));
    }
}
