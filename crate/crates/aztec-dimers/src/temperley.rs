//! Temperley's bijection between tilings and dimer-compatible forests (DCFs).
//!
//! For `C ∈ {S, N}` every `C`-vertex `w` matched to `w + e` contributes the directed edge
//! `(w, w + 2e)` to a forest on the extended graph `G(C)`. The dual forest on the opposite
//! graph consists of the edges not crossing the forest, and together the two forests
//! give back the tiling.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::heights::{boundary_height, faces_around, HeightField};
use crate::lattice::{
    build_temperley_graph, classify_vertex, dir_of, edge_midpoint, opposite, BoundaryLabel, BoxIndex, Coord,
    Direction, LabelLetter, Side, TemperleyGraph, DIRS, NO_DIR,
};
use crate::sampler::DimerConfig;

/// Parent map on a Temperley graph, stored as one step code per vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedForest {
    pub direction: Direction,
    pub n: i32,
    pub a: f64,
    parent: Vec<u8>,
}

impl OrientedForest {
    pub fn empty(direction: Direction, n: i32, a: f64) -> Result<Self> {
        let g = build_temperley_graph(direction, n, a)?;
        Ok(OrientedForest { direction, n, a, parent: vec![NO_DIR; g.index_len()] })
    }

    pub fn graph(&self) -> TemperleyGraph {
        TemperleyGraph { direction: self.direction, n: self.n, a: self.a }
    }

    pub fn parent_dir(&self, v: Coord) -> Option<u8> {
        let g = self.graph();
        if !g.contains(v) {
            return None;
        }
        let d = self.parent[g.index(v)];
        (d != NO_DIR).then_some(d)
    }

    pub fn parent(&self, v: Coord) -> Option<Coord> {
        self.parent_dir(v).map(|d| v + 2 * DIRS[d as usize])
    }

    pub fn set_parent(&mut self, v: Coord, d: Option<u8>) -> Result<()> {
        let g = self.graph();
        if !g.contains(v) {
            return domain(format!("{v} is not a vertex of the graph"));
        }
        let i = g.index(v);
        self.parent[i] = d.unwrap_or(NO_DIR);
        Ok(())
    }

    pub fn parents(&self) -> &[u8] {
        &self.parent
    }

    pub fn from_parents(direction: Direction, n: i32, a: f64, parent: Vec<u8>) -> Result<Self> {
        let g = build_temperley_graph(direction, n, a)?;
        if parent.len() != g.index_len() {
            return domain("parent array has the wrong length");
        }
        Ok(OrientedForest { direction, n, a, parent })
    }

    /// Directed edges `(child, parent)` in index order.
    pub fn edges(&self) -> Vec<(Coord, Coord)> {
        let g = self.graph();
        (0..self.parent.len())
            .filter(|&i| self.parent[i] != NO_DIR)
            .map(|i| {
                let v = g.coord(i);
                (v, v + 2 * DIRS[self.parent[i] as usize])
            })
            .collect()
    }

    pub fn num_edges(&self) -> usize {
        self.parent.iter().filter(|&&d| d != NO_DIR).count()
    }

    /// The path from `v` following parents until a vertex without parent. Stops early
    /// (returning the partial path) if it revisits a vertex.
    pub fn path_from(&self, v: Coord) -> Vec<Coord> {
        let g = self.graph();
        let mut out = vec![v];
        let mut cur = v;
        let limit = g.index_len() + 1;
        while let Some(p) = self.parent(cur) {
            if out.len() > limit || !g.contains(p) {
                break;
            }
            out.push(p);
            cur = p;
        }
        out
    }
}

/// Items of the dimer-compatible forest definition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DcfItem {
    /// Spanning and acyclic.
    I,
    /// Exactly one sink per component.
    II,
    /// Source-to-sink endpoints lie on the cross through the source.
    III,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcfViolation {
    pub item: DcfItem,
    pub vertex: Coord,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DcfReport {
    pub violations: Vec<DcfViolation>,
}

impl DcfReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn cites(&self, item: DcfItem) -> bool {
        self.violations.iter().any(|v| v.item == item)
    }
}

/// Root reached from each vertex (`None` when the walk cycles or leaves the graph).
fn roots(f: &OrientedForest) -> Vec<Option<usize>> {
    let g = f.graph();
    let len = g.index_len();
    const UNSEEN: u8 = 0;
    const ACTIVE: u8 = 1;
    const DONE: u8 = 2;
    let mut state = vec![UNSEEN; len];
    let mut root: Vec<Option<usize>> = vec![None; len];
    let mut stack = Vec::new();
    for start in 0..len {
        if state[start] != UNSEEN || !g.contains(g.coord(start)) {
            continue;
        }
        let mut i = start;
        let result;
        loop {
            if state[i] == DONE {
                result = root[i];
                break;
            }
            if state[i] == ACTIVE {
                result = None;
                break;
            }
            state[i] = ACTIVE;
            stack.push(i);
            let d = f.parent[i];
            if d == NO_DIR {
                result = Some(i);
                break;
            }
            let p = g.coord(i) + 2 * DIRS[d as usize];
            if !g.contains(p) {
                result = None;
                break;
            }
            i = g.index(p);
        }
        for j in stack.drain(..) {
            state[j] = DONE;
            root[j] = result;
        }
    }
    root
}

pub fn validate_dcf(f: &OrientedForest) -> DcfReport {
    let g = f.graph();
    let mut report = DcfReport::default();
    let mut push = |item, vertex, message: String| report.violations.push(DcfViolation { item, vertex, message });
    for v in g.vertices() {
        let d = f.parent[g.index(v)];
        if g.is_sink(v) {
            if d != NO_DIR {
                push(DcfItem::II, v, format!("sink {v} has an outgoing edge, joining two sink components"));
            }
        } else if d == NO_DIR {
            push(DcfItem::I, v, format!("vertex {v} has no parent"));
        } else if g.step(v, d).is_none() {
            push(DcfItem::I, v, format!("edge from {v} leaves the graph"));
        }
    }
    for i in 0..f.parent.len() {
        let v = g.coord(i);
        if !g.contains(v) && f.parent[i] != NO_DIR {
            push(DcfItem::I, v, format!("{v} is not a vertex but has a parent"));
        }
    }
    let rt = roots(f);
    for v in g.vertices() {
        match rt[g.index(v)] {
            None => push(DcfItem::I, v, format!("walk from {v} enters a cycle")),
            Some(r) if !g.is_sink(g.coord(r)) && !g.is_sink(v) => {
                push(DcfItem::II, v, format!("component of {v} has no sink"))
            }
            _ => {}
        }
    }
    for v in g.vertices().filter(|&v| g.is_source(v)) {
        if let Some(r) = rt[g.index(v)] {
            let s = g.coord(r);
            let dlt = s - v;
            if g.is_sink(s) && dlt.x.abs() != dlt.y.abs() {
                push(DcfItem::III, v, format!("source {v} drains to {s}, off the cross through the source"));
            }
        }
    }
    report
}

pub fn is_dcf(f: &OrientedForest) -> bool {
    validate_dcf(f).is_valid()
}

/// `F_C(D)`.
pub fn temperley_forest(d: &DimerConfig, direction: Direction) -> OrientedForest {
    let g = TemperleyGraph { direction, n: d.n, a: d.a };
    let mut parent = vec![NO_DIR; g.index_len()];
    for v in g.vertices() {
        if !g.is_sink(v) {
            parent[g.index(v)] = d.dir(v).expect("non-sink Temperley vertices lie in the diamond");
        }
    }
    OrientedForest { direction, n: d.n, a: d.a, parent }
}

pub fn south_forest(d: &DimerConfig) -> OrientedForest {
    temperley_forest(d, Direction::S)
}

pub fn north_forest(d: &DimerConfig) -> OrientedForest {
    temperley_forest(d, Direction::N)
}

/// Whether the edge through the black vertex `b` of the graph of `f` is in `f`.
fn forest_uses_midpoint(f: &OrientedForest, g: &TemperleyGraph, b: Coord) -> bool {
    (0..4u8).any(|d| {
        let v = b - DIRS[d as usize];
        g.contains(v) && f.parent_dir(v) == Some(d)
    })
}

/// The dual forest on the opposite graph, oriented towards its sinks.
pub fn dual_forest(f: &OrientedForest) -> Result<OrientedForest> {
    let report = validate_dcf(f);
    if !report.is_valid() {
        return Err(Error::Domain(format!("input is not a DCF: {}", report.violations[0].message)));
    }
    let g = f.graph();
    let h = TemperleyGraph { direction: f.direction.opposite(), n: f.n, a: f.a };
    let mut parent = vec![NO_DIR; h.index_len()];
    let mut seen = vec![false; h.index_len()];
    let mut queue = VecDeque::new();
    for s in h.sinks() {
        seen[h.index(s)] = true;
        queue.push_back(s);
    }
    let mut kept = 0usize;
    while let Some(u) = queue.pop_front() {
        for d in 0..4u8 {
            let Some(w) = h.step(u, d) else { continue };
            if forest_uses_midpoint(f, &g, edge_midpoint(u, d)) {
                continue;
            }
            let wi = h.index(w);
            if seen[wi] {
                // Edge already used as the tree edge u <- w or w <- u is fine; others close a cycle.
                if parent[wi] == opposite(d) || parent[h.index(u)] == d {
                    continue;
                }
                return Err(Error::Domain(format!("dual edge {u}-{w} closes a cycle")));
            }
            seen[wi] = true;
            parent[wi] = opposite(d);
            kept += 1;
            queue.push_back(w);
        }
    }
    let out = OrientedForest { direction: h.direction, n: f.n, a: f.a, parent };
    if kept + h.sinks().len() != h.vertices().count() {
        return Err(Error::Domain("dual forest does not span".into()));
    }
    Ok(out)
}

/// `D_C(F)`: the tiling whose `C`-forest is `f`.
pub fn inverse_temperley(f: &OrientedForest) -> Result<DimerConfig> {
    let dual = dual_forest(f)?;
    let n = f.n;
    let bx = BoxIndex { r: n };
    let mut mate = vec![NO_DIR; bx.len()];
    for forest in [f, &dual] {
        for (v, _) in forest.edges() {
            let d = forest.parent_dir(v).unwrap();
            let w = v + DIRS[d as usize];
            for (p, dp) in [(v, d), (w, opposite(d))] {
                if !bx.contains(p) {
                    return domain(format!("dimer at {p} leaves the diamond"));
                }
                let i = bx.index(p);
                if mate[i] != NO_DIR {
                    return domain(format!("vertex {p} receives two dimers"));
                }
                mate[i] = dp;
            }
        }
    }
    DimerConfig::from_dirs(n, f.a, mate, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathKind {
    SMinus,
    SPlus,
    NMinus,
    NPlus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackbonePath {
    pub kind: PathKind,
    pub index: i32,
    pub vertices: Vec<Coord>,
    pub endpoint: BoundaryLabel,
}

impl BackbonePath {
    pub fn ends_west(&self) -> bool {
        self.endpoint.side == Side::W
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPoint {
    pub i: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Backbone {
    /// South-boundary paths in left-to-right order, then north-boundary paths.
    pub paths: Vec<BackbonePath>,
    /// Number of south-boundary paths ending on the west side.
    pub split: SplitPoint,
    /// For a south forest with `I > 0`: whether the free endpoint `θ(v_I^N)` is west.
    /// For a north forest: whether `θ(w_I^S)` is west, with `I` its west count.
    pub free_endpoint_west: Option<bool>,
    /// Whether the endpoint table matches the tree-path lemma for this split point.
    pub table_ok: bool,
}

impl Backbone {
    pub fn path(&self, kind: PathKind, index: i32) -> Option<&BackbonePath> {
        self.paths.iter().find(|p| p.kind == kind && p.index == index)
    }
}

pub fn backbone(f: &OrientedForest) -> Result<Backbone> {
    let report = validate_dcf(f);
    if !report.is_valid() {
        return Err(Error::Domain(format!("input is not a DCF: {}", report.violations[0].message)));
    }
    let g = f.graph();
    let half = f.n / 2;
    let (lower, upper) = match f.direction {
        Direction::S => (PathKind::SMinus, PathKind::SPlus),
        Direction::N => (PathKind::NMinus, PathKind::NPlus),
    };
    let mut paths = Vec::new();
    for (side, kind) in [(Side::S, lower), (Side::N, upper)] {
        for j in 1..=half {
            let v = g.labelled_vertex(side, j)?;
            let vertices = f.path_from(v);
            let end = *vertices.last().unwrap();
            let endpoint = g.boundary_label(end)?;
            paths.push(BackbonePath { kind, index: j, vertices, endpoint });
        }
    }
    let theta = |side: Side, j: i32| -> (Side, i32) {
        let p = paths.iter().find(|p| p.endpoint.letter == letter_of(f.direction) && p.index == j && start_side(p) == side).unwrap();
        (p.endpoint.side, p.endpoint.index)
    };
    let split = (1..=half).filter(|&j| theta(Side::S, j).0 == Side::W).count() as i32;
    let mut ok = true;
    let free;
    match f.direction {
        Direction::S => {
            for j in 1..=half {
                let want = if j > split { (Side::E, j) } else { (Side::W, j) };
                ok &= theta(Side::S, j) == want;
                let got = theta(Side::N, j);
                if j < split {
                    ok &= got == (Side::E, j + 1);
                } else if j > split {
                    ok &= got == (Side::W, j);
                } else {
                    ok &= got == (Side::W, j) || got == (Side::E, j + 1);
                }
            }
            free = (split > 0).then(|| theta(Side::N, split).0 == Side::W);
        }
        Direction::N => {
            // Planarity alone: lower paths j <= split end west, the rest east.
            for j in 1..=half {
                let got = theta(Side::S, j);
                ok &= if j <= split { got.0 == Side::W } else { got == (Side::E, j) };
            }
            free = (split > 0).then_some(true);
        }
    }
    Ok(Backbone { paths, split: SplitPoint { i: split }, free_endpoint_west: free, table_ok: ok })
}

fn letter_of(direction: Direction) -> LabelLetter {
    match direction {
        Direction::S => LabelLetter::V,
        Direction::N => LabelLetter::W,
    }
}

fn start_side(p: &BackbonePath) -> Side {
    match p.kind {
        PathKind::SMinus | PathKind::NMinus => Side::S,
        PathKind::SPlus | PathKind::NPlus => Side::N,
    }
}

/// Checks the dual endpoint table given the south split point `i` and whether
/// `θ_F(v_I^N)` is west.
pub fn dual_table_holds(dual: &Backbone, i: i32, free_west: Option<bool>, n: i32) -> bool {
    let half = n / 2;
    let end = |kind: PathKind, j: i32| dual.path(kind, j).map(|p| (p.endpoint.side, p.endpoint.index));
    (1..=half).all(|j| {
        let s = end(PathKind::NMinus, j);
        let s_ok = if j > i {
            s == Some((Side::E, j))
        } else if j < i {
            s == Some((Side::W, j + 1))
        } else if free_west == Some(true) {
            s == Some((Side::E, j))
        } else {
            s == Some((Side::W, j + 1))
        };
        let nn = end(PathKind::NPlus, j);
        let n_ok = if j <= i { nn == Some((Side::E, j)) } else { nn == Some((Side::W, j)) };
        s_ok && n_ok
    })
}

/// Signed number of crossings of the open vertical ray above `anchor`: right-to-left
/// counts `+1`, left-to-right `-1`. The ray is nudged infinitesimally to the left so
/// lattice points on the ray's line count as right of it.
pub fn winding(path: &[Coord], anchor: Coord) -> i64 {
    let mut total = 0i64;
    for w in path.windows(2) {
        let (p, q) = (w[0], w[1]);
        let p_left = p.x < anchor.x;
        let q_left = q.x < anchor.x;
        if p_left == q_left {
            continue;
        }
        let dx = (q.x - p.x) as i64;
        let dy = (q.y - p.y) as i64;
        // (y(anchor.x) - anchor.y) * dx
        let num = (p.y - anchor.y) as i64 * dx + dy * (anchor.x - p.x) as i64;
        let above = match (num * dx.signum()).signum() {
            1 => true,
            -1 => false,
            _ => dx * dy < 0,
        };
        if above {
            total += if p_left { -1 } else { 1 };
        }
    }
    total
}

/// Height of an a-face `f` whose south-forest path `path` (from `f - (0, 1)`) ends at
/// `v_j^W`. The sign of the winding term matches the height-at-infinity convention.
pub fn face_height_west(n: i32, path: &[Coord], f: Coord, j: i32) -> i32 {
    4 * j - n - 1 - 4 * winding(path, f) as i32
}

/// Left turns minus right turns along a path.
pub fn turn_count(path: &[Coord]) -> i64 {
    path.windows(3)
        .map(|w| {
            let (u, t) = (w[1] - w[0], w[2] - w[1]);
            (u.x as i64 * t.y as i64 - u.y as i64 * t.x as i64).signum()
        })
        .sum()
}

/// Heights rebuilt from a south or north forest alone: vertex heights propagate from
/// the sinks by turn counts, faces then follow from each vertex and its outgoing edge.
pub fn reconstruct_height(f: &OrientedForest) -> Result<HeightField> {
    let report = validate_dcf(f);
    if !report.is_valid() {
        return Err(Error::Domain(format!("input is not a DCF: {}", report.violations[0].message)));
    }
    let g = f.graph();
    let n = f.n;
    const UNKNOWN: i32 = i32::MIN;
    // Doubled vertex heights.
    let mut h2 = vec![UNKNOWN; g.index_len()];
    let mut stack = Vec::new();
    for v in g.vertices() {
        if g.is_sink(v) || h2[g.index(v)] != UNKNOWN {
            continue;
        }
        let mut cur = v;
        loop {
            let p = f.parent(cur).unwrap();
            if g.is_sink(p) {
                h2[g.index(cur)] = last_step_height2(n, cur, f.parent_dir(cur).unwrap())?;
                break;
            }
            if h2[g.index(p)] != UNKNOWN {
                stack.push(cur);
                break;
            }
            stack.push(cur);
            cur = p;
        }
        while let Some(c) = stack.pop() {
            let p = f.parent(c).unwrap();
            let q = f.parent(p).unwrap();
            let turn = turn_count(&[c, p, q]) as i32;
            h2[g.index(c)] = h2[g.index(p)] - 2 * turn;
        }
    }
    let mut out = HeightField::from_fn(n, |_| 0);
    for (face, _) in out.clone().faces() {
        let value = match boundary_height(n, face) {
            Some(b) => b,
            None => {
                let v = [Coord::new(0, -1), Coord::new(0, 1), Coord::new(1, 0), Coord::new(-1, 0)]
                    .iter()
                    .map(|&o| face + o)
                    .find(|&v| g.contains(v) && !g.is_sink(v))
                    .ok_or_else(|| Error::Domain(format!("face {face} touches no forest vertex")))?;
                let d = f.parent_dir(v).unwrap();
                let k = faces_around(v).iter().position(|&x| x == face).unwrap();
                face_from_vertex(h2[g.index(v)], d, k)
            }
        };
        out.set(face, value)?;
    }
    Ok(out)
}

/// Height of face `k` (E, N, W, S order) around a white vertex with doubled height `h2`
/// and dimer direction `d`. The face just after the dimer (ccw) sits `3/2` below the mean.
fn face_from_vertex(h2: i32, d: u8, k: usize) -> i32 {
    let after = (d as usize + 1) % 4;
    let h0 = (h2 - 3) / 2;
    h0 + ((k + 4 - after) % 4) as i32
}

/// Doubled height of a vertex whose parent is a sink, from the adjacent boundary face.
fn last_step_height2(n: i32, v: Coord, d: u8) -> Result<i32> {
    let faces = faces_around(v);
    let (k, hb) = faces
        .iter()
        .enumerate()
        .find_map(|(k, &fc)| boundary_height(n, fc).map(|b| (k, b)))
        .ok_or_else(|| Error::Domain(format!("{v} has no boundary face")))?;
    let after = (d as usize + 1) % 4;
    let h0 = hb - ((k + 4 - after) % 4) as i32;
    Ok(2 * h0 + 3)
}

/// The dimer direction of a white vertex in a forest graph, for callers that need it.
pub fn forest_dimer(f: &OrientedForest, v: Coord) -> Option<Coord> {
    f.parent_dir(v).map(|d| v + DIRS[d as usize])
}

/// Step codes for a forest path, mostly for serialisation.
pub fn path_dirs(path: &[Coord]) -> Result<Vec<u8>> {
    path.windows(2)
        .map(|w| {
            let s = w[1] - w[0];
            if s.x % 2 != 0 || s.y % 2 != 0 {
                return domain(format!("step {s} is not a forest step"));
            }
            dir_of(Coord::new(s.x / 2, s.y / 2)).ok_or_else(|| Error::Domain(format!("step {s} is not a forest step")))
        })
        .collect()
}

/// Sanity helper: the class of every non-sink vertex of a forest.
pub fn vertex_class_ok(f: &OrientedForest) -> bool {
    let g = f.graph();
    let ok = g.vertices().all(|v| classify_vertex(v).map(|c| c == f.direction.class()).unwrap_or(false));
    ok
}
