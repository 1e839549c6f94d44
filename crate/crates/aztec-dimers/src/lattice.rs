//! Lattice geometry of the two-periodic Aztec diamond.
//!
//! Vertices are points of `Z^2` with odd coordinate sum, faces those with even sum.
//! The diamond of size `n` has vertex set `[-n, n]^2` restricted to vertices; edges
//! join vertices differing by `±e1 = ±(1,1)` or `±e2 = ±(-1,1)`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct Coord {
    pub x: i32,
    pub y: i32,
}

impl Coord {
    pub const fn new(x: i32, y: i32) -> Self {
        Coord { x, y }
    }

    pub fn is_vertex(self) -> bool {
        (self.x + self.y).rem_euclid(2) == 1
    }

    pub fn is_face(self) -> bool {
        !self.is_vertex()
    }

    pub fn linf(self) -> i32 {
        self.x.abs().max(self.y.abs())
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

impl Add for Coord {
    type Output = Coord;
    fn add(self, o: Coord) -> Coord {
        Coord::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Coord {
    type Output = Coord;
    fn sub(self, o: Coord) -> Coord {
        Coord::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Coord {
    type Output = Coord;
    fn neg(self) -> Coord {
        Coord::new(-self.x, -self.y)
    }
}

impl Mul<Coord> for i32 {
    type Output = Coord;
    fn mul(self, c: Coord) -> Coord {
        Coord::new(self * c.x, self * c.y)
    }
}

pub const E1: Coord = Coord::new(1, 1);
pub const E2: Coord = Coord::new(-1, 1);

/// The four edge directions. `dir ^ 2` is the opposite direction and `dir ^ 1`
/// is the perpendicular one obtained by swapping `e1` and `e2`.
pub const DIRS: [Coord; 4] = [E1, E2, Coord::new(-1, -1), Coord::new(1, -1)];

/// Marker for "no direction" in compact `u8` direction arrays.
pub const NO_DIR: u8 = u8::MAX;

pub fn dir_of(step: Coord) -> Option<u8> {
    DIRS.iter().position(|&d| d == step).map(|i| i as u8)
}

pub fn opposite(d: u8) -> u8 {
    d ^ 2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Color {
    White,
    Black,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VertexClass {
    N,
    S,
    E,
    W,
}

impl VertexClass {
    pub fn color(self) -> Color {
        match self {
            VertexClass::N | VertexClass::S => Color::White,
            VertexClass::E | VertexClass::W => Color::Black,
        }
    }

    /// Offset from the vertex to its unique adjacent a-face.
    pub fn a_face_offset(self) -> Coord {
        match self {
            VertexClass::N => Coord::new(0, -1),
            VertexClass::S => Coord::new(0, 1),
            VertexClass::E => Coord::new(-1, 0),
            VertexClass::W => Coord::new(1, 0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaceClass {
    A,
    B,
    C,
    /// Even-even faces with coordinate sum `2 mod 4`. Never used for weights.
    Other,
}

pub fn classify_face(f: Coord) -> Result<FaceClass> {
    if !f.is_face() {
        return domain(format!("{f} is not a face"));
    }
    let odd = f.x.rem_euclid(2) == 1;
    let s = (f.x + f.y).rem_euclid(4);
    Ok(match (odd, s) {
        (true, 2) => FaceClass::A,
        (true, _) => FaceClass::B,
        (false, 0) => FaceClass::C,
        (false, _) => FaceClass::Other,
    })
}

/// Class of a vertex, read off from where its adjacent a-face sits.
pub fn classify_vertex(v: Coord) -> Result<VertexClass> {
    if !v.is_vertex() {
        return domain(format!("{v} is not a vertex"));
    }
    let xodd = v.x.rem_euclid(2) == 1;
    let s = (v.x + v.y).rem_euclid(4);
    Ok(match (xodd, s) {
        (true, 1) => VertexClass::S,
        (true, _) => VertexClass::N,
        (false, 1) => VertexClass::W,
        (false, _) => VertexClass::E,
    })
}

pub fn vertex_color(v: Coord) -> Color {
    if v.x.rem_euclid(2) == 1 {
        Color::White
    } else {
        Color::Black
    }
}

pub fn adjacent_a_face(v: Coord) -> Result<Coord> {
    Ok(v + classify_vertex(v)?.a_face_offset())
}

/// Whether the edge `{v, v + DIRS[d]}` borders an a-face.
pub fn edge_touches_a_face(v: Coord, d: u8) -> bool {
    let step = DIRS[d as usize];
    let f1 = v + Coord::new(step.x, 0);
    let f2 = v + Coord::new(0, step.y);
    let odd = if f1.x.rem_euclid(2) == 1 { f1 } else { f2 };
    (odd.x + odd.y).rem_euclid(4) == 2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Gauge {
    #[default]
    TwoPeriodic,
    NWeights,
    SWeights,
}

/// Row-major index over the square box `[-r, r]^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoxIndex {
    pub r: i32,
}

impl BoxIndex {
    pub fn side(self) -> usize {
        (2 * self.r + 1) as usize
    }

    pub fn len(self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn contains(self, c: Coord) -> bool {
        c.x.abs() <= self.r && c.y.abs() <= self.r
    }

    pub fn index(self, c: Coord) -> usize {
        debug_assert!(self.contains(c));
        ((c.y + self.r) as usize) * self.side() + (c.x + self.r) as usize
    }

    pub fn coord(self, i: usize) -> Coord {
        let s = self.side();
        Coord::new((i % s) as i32 - self.r, (i / s) as i32 - self.r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AztecGraph {
    pub n: i32,
    pub a: f64,
    pub gauge: Gauge,
}

/// Builds the size-`n` diamond with bias `a`, enforcing `n ∈ 4N` and `a ∈ (0,1]`.
pub fn build_aztec(n: i32, a: f64, gauge: Gauge) -> Result<AztecGraph> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::Config(format!("weight a = {a} outside (0,1]")));
    }
    AztecGraph::with_weight(n, a, gauge)
}

impl AztecGraph {
    /// Like [`build_aztec`] but accepts any positive weight, as needed for the
    /// reciprocal `1/a` model.
    pub fn with_weight(n: i32, a: f64, gauge: Gauge) -> Result<Self> {
        if n <= 0 || n % 4 != 0 {
            return Err(Error::Config(format!("size n = {n} must be a positive multiple of 4")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Config(format!("weight a = {a} must be positive")));
        }
        Ok(AztecGraph { n, a, gauge })
    }

    pub fn boxed(&self) -> BoxIndex {
        BoxIndex { r: self.n }
    }

    pub fn contains(&self, v: Coord) -> bool {
        v.is_vertex() && self.boxed().contains(v)
    }

    pub fn num_vertices(&self) -> usize {
        (2 * self.n * (self.n + 1)) as usize
    }

    /// Vertices in row-major order.
    pub fn vertices(&self) -> impl Iterator<Item = Coord> + '_ {
        let n = self.n;
        (-n..=n).flat_map(move |y| (-n..=n).map(move |x| Coord::new(x, y))).filter(|c| c.is_vertex())
    }

    pub fn whites(&self) -> impl Iterator<Item = Coord> + '_ {
        self.vertices().filter(|&v| vertex_color(v) == Color::White)
    }

    pub fn blacks(&self) -> impl Iterator<Item = Coord> + '_ {
        self.vertices().filter(|&v| vertex_color(v) == Color::Black)
    }

    pub fn neighbor(&self, v: Coord, d: u8) -> Option<Coord> {
        let w = v + DIRS[d as usize];
        self.contains(w).then_some(w)
    }

    /// All edges as `(white, black)` pairs, ordered by white vertex then direction.
    pub fn edges(&self) -> Vec<(Coord, Coord)> {
        let mut out = Vec::new();
        for w in self.whites() {
            for d in 0..4u8 {
                if let Some(b) = self.neighbor(w, d) {
                    out.push((w, b));
                }
            }
        }
        out
    }

    /// Weight of the edge `{v, v + DIRS[d]}` under this graph's gauge.
    pub fn edge_weight_dir(&self, v: Coord, d: u8) -> f64 {
        let a = self.a;
        match self.gauge {
            Gauge::TwoPeriodic => {
                if edge_touches_a_face(v, d) {
                    a
                } else {
                    1.0
                }
            }
            Gauge::SWeights | Gauge::NWeights => {
                let target = if self.gauge == Gauge::SWeights { VertexClass::S } else { VertexClass::N };
                // The white endpoint decides; north steps for S, south steps for N.
                let (white, step) = if vertex_color(v) == Color::White {
                    (v, DIRS[d as usize])
                } else {
                    (v + DIRS[d as usize], -DIRS[d as usize])
                };
                let class = classify_vertex(white).expect("white endpoint is a vertex");
                let north = step.y > 0;
                match (class == target, target) {
                    (true, VertexClass::S) if north => a * a,
                    (true, VertexClass::N) if !north => a * a,
                    _ => 1.0,
                }
            }
        }
    }

    pub fn edge_weight(&self, v: Coord, w: Coord) -> Result<f64> {
        if !self.contains(v) || !self.contains(w) {
            return domain(format!("edge {v}-{w} leaves the diamond"));
        }
        match dir_of(w - v) {
            Some(d) => Ok(self.edge_weight_dir(v, d)),
            None => domain(format!("{v} and {w} are not adjacent")),
        }
    }

    /// Alternating product `αγ/(βδ)` around a bounded face, where α, β, γ, δ are the
    /// edges W–N, N–E, E–S, S–W. `None` if the face is not bounded by four edges.
    pub fn face_weight(&self, f: Coord) -> Option<f64> {
        if !f.is_face() {
            return None;
        }
        let w = f - Coord::new(1, 0);
        let s = f - Coord::new(0, 1);
        let e = f + Coord::new(1, 0);
        let nn = f + Coord::new(0, 1);
        if ![w, s, e, nn].iter().all(|&c| self.contains(c)) {
            return None;
        }
        let alpha = self.edge_weight_dir(w, 0);
        let beta = self.edge_weight_dir(nn, 3);
        let gamma = self.edge_weight_dir(e, 2);
        let delta = self.edge_weight_dir(s, 1);
        Some(alpha * gamma / (beta * delta))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    S,
    N,
}

impl Direction {
    pub fn class(self) -> VertexClass {
        match self {
            Direction::S => VertexClass::S,
            Direction::N => VertexClass::N,
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::S => Direction::N,
            Direction::N => Direction::S,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    E,
    S,
    W,
    N,
}

/// `V` labels belong to the south graph, `W` labels to the north graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelLetter {
    V,
    W,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundaryLabel {
    pub letter: LabelLetter,
    pub side: Side,
    pub index: i32,
}

/// One of the two Temperley graphs `G(S)` or `G(N)` on the extended vertex sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperleyGraph {
    pub direction: Direction,
    pub n: i32,
    pub a: f64,
}

pub fn build_temperley_graph(direction: Direction, n: i32, a: f64) -> Result<TemperleyGraph> {
    if n <= 0 || n % 4 != 0 {
        return Err(Error::Config(format!("size n = {n} must be a positive multiple of 4")));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Config(format!("weight a = {a} must be positive")));
    }
    Ok(TemperleyGraph { direction, n, a })
}

impl TemperleyGraph {
    fn width(&self) -> usize {
        (2 * self.n + 3) as usize
    }

    /// Size of the flat index space (bounding box `[-n-1, n+1] x [-n, n]`).
    pub fn index_len(&self) -> usize {
        self.width() * (2 * self.n + 1) as usize
    }

    pub fn index(&self, v: Coord) -> usize {
        ((v.y + self.n) as usize) * self.width() + (v.x + self.n + 1) as usize
    }

    pub fn coord(&self, i: usize) -> Coord {
        let w = self.width();
        Coord::new((i % w) as i32 - self.n - 1, (i / w) as i32 - self.n)
    }

    pub fn contains(&self, v: Coord) -> bool {
        v.x.abs() <= self.n + 1
            && v.y.abs() <= self.n
            && v.is_vertex()
            && classify_vertex(v).map(|c| c == self.direction.class()).unwrap_or(false)
    }

    pub fn vertices(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.index_len()).map(|i| self.coord(i)).filter(|&v| self.contains(v))
    }

    pub fn is_sink(&self, v: Coord) -> bool {
        self.contains(v) && v.x.abs() == self.n + 1
    }

    pub fn is_source(&self, v: Coord) -> bool {
        self.contains(v) && v.x.abs() <= self.n && v.y.abs() == self.n
    }

    pub fn side(&self, v: Coord) -> Option<Side> {
        if !self.contains(v) {
            return None;
        }
        let n = self.n;
        if v.x == n + 1 {
            Some(Side::E)
        } else if v.x == -n - 1 {
            Some(Side::W)
        } else if v.y == -n {
            Some(Side::S)
        } else if v.y == n {
            Some(Side::N)
        } else {
            None
        }
    }

    /// Target of the step `v -> v + 2 DIRS[d]` if it stays in the graph.
    pub fn step(&self, v: Coord, d: u8) -> Option<Coord> {
        let w = v + 2 * DIRS[d as usize];
        self.contains(w).then_some(w)
    }

    /// Directed weight of a step: north steps carry `a^2` in the south graph and
    /// south steps carry `a^2` in the north graph.
    pub fn step_weight(&self, d: u8) -> f64 {
        let north = DIRS[d as usize].y > 0;
        let heavy = match self.direction {
            Direction::S => north,
            Direction::N => !north,
        };
        if heavy {
            self.a * self.a
        } else {
            1.0
        }
    }

    pub fn num_edges(&self) -> usize {
        self.vertices().map(|v| (0..4).filter(|&d| self.step(v, d).is_some()).count()).sum::<usize>() / 2
    }

    pub fn sinks(&self) -> Vec<Coord> {
        self.vertices().filter(|&v| self.is_sink(v)).collect()
    }

    pub fn boundary_label(&self, v: Coord) -> Result<BoundaryLabel> {
        let side = match self.side(v) {
            Some(s) => s,
            None => return domain(format!("{v} is not on the boundary of the graph")),
        };
        let n = self.n;
        let (letter, index) = match (self.direction, side) {
            (Direction::S, Side::E) => (LabelLetter::V, (n - v.y) / 4 + 1),
            (Direction::S, Side::S) => (LabelLetter::V, (v.x + n + 3) / 4),
            (Direction::S, Side::W) => (LabelLetter::V, (v.y + n + 2) / 4),
            (Direction::S, Side::N) => (LabelLetter::V, (n + 1 - v.x) / 4),
            (Direction::N, Side::E) => (LabelLetter::W, (n + 2 - v.y) / 4),
            (Direction::N, Side::S) => (LabelLetter::W, (v.x + n + 1) / 4),
            (Direction::N, Side::W) => (LabelLetter::W, (v.y + n) / 4 + 1),
            (Direction::N, Side::N) => (LabelLetter::W, (n + 3 - v.x) / 4),
        };
        Ok(BoundaryLabel { letter, side, index })
    }

    /// Inverse of [`Self::boundary_label`].
    pub fn labelled_vertex(&self, side: Side, index: i32) -> Result<Coord> {
        let n = self.n;
        let count = match (self.direction, side) {
            (Direction::S, Side::E) | (Direction::N, Side::W) => n / 2 + 1,
            _ => n / 2,
        };
        if index < 1 || index > count {
            return domain(format!("label index {index} out of range 1..={count}"));
        }
        let j = index;
        Ok(match (self.direction, side) {
            (Direction::S, Side::E) => Coord::new(n + 1, n - 4 * (j - 1)),
            (Direction::S, Side::S) => Coord::new(-n + 4 * j - 3, -n),
            (Direction::S, Side::W) => Coord::new(-n - 1, -n + 4 * j - 2),
            (Direction::S, Side::N) => Coord::new(n + 1 - 4 * j, n),
            (Direction::N, Side::E) => Coord::new(n + 1, n + 2 - 4 * j),
            (Direction::N, Side::S) => Coord::new(-n + 4 * j - 1, -n),
            (Direction::N, Side::W) => Coord::new(-n - 1, -n + 4 * (j - 1)),
            (Direction::N, Side::N) => Coord::new(n + 3 - 4 * j, n),
        })
    }
}

/// The Aztec-diamond vertex through which the edge `{v, v + 2 DIRS[d]}` of a Temperley
/// graph passes.
pub fn edge_midpoint(v: Coord, d: u8) -> Coord {
    v + DIRS[d as usize]
}
