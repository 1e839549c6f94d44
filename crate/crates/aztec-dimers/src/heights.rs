//! Height functions on the faces of the Aztec diamond.
//!
//! Moving counterclockwise around a white vertex the height rises by 1 across an empty
//! edge and falls by 3 across the dimer; around a black vertex the same holds clockwise.
//! Faces live on `F̄`, the faces of `[-n-1, n+1]^2` touching at least one vertex, with
//! the anchor `h(-n, -n) = -n`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lattice::{vertex_color, BoxIndex, Color, Coord, NO_DIR};
use crate::sampler::DimerConfig;

const ABSENT: i32 = i32::MIN;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightField {
    pub n: i32,
    /// Row-major over `[-n-1, n+1]^2`; `i32::MIN` off `F̄`.
    values: Vec<i32>,
}

pub fn in_fbar(n: i32, f: Coord) -> bool {
    f.is_face() && f.x.abs() <= n + 1 && f.y.abs() <= n + 1 && !(f.x.abs() == n + 1 && f.y.abs() == n + 1)
}

fn in_diamond(n: i32, v: Coord) -> bool {
    v.is_vertex() && v.x.abs() <= n && v.y.abs() <= n
}

/// Deterministic height of a boundary face (one with `|x| >= n` or `|y| >= n`).
pub fn boundary_height(n: i32, f: Coord) -> Option<i32> {
    if !in_fbar(n, f) {
        return None;
    }
    if f.y <= -n {
        Some(f.x)
    } else if f.x <= -n {
        Some(f.y)
    } else if f.y >= n {
        Some(-f.x)
    } else if f.x >= n {
        Some(-f.y)
    } else {
        None
    }
}

/// The four faces around a vertex in counterclockwise order E, N, W, S.
pub fn faces_around(v: Coord) -> [Coord; 4] {
    [v + Coord::new(1, 0), v + Coord::new(0, 1), v - Coord::new(1, 0), v - Coord::new(0, 1)]
}

/// Height increment from face `f` to the diagonally adjacent face `g`, given whether the
/// separating edge carries a dimer.
fn increment(f: Coord, g: Coord, dimer: bool) -> i32 {
    let s = g - f;
    let p = f + Coord::new(s.x, 0);
    let q = f + Coord::new(0, s.y);
    let w = if vertex_color(p) == Color::White { p } else { q };
    let (u, t) = (f - w, g - w);
    let ccw = u.x * t.y - u.y * t.x > 0;
    match (ccw, dimer) {
        (true, false) => 1,
        (true, true) => -3,
        (false, false) => -1,
        (false, true) => 3,
    }
}

/// Endpoints of the edge separating diagonal neighbours `f` and `f + s`.
fn separating_edge(f: Coord, s: Coord) -> (Coord, Coord) {
    (f + Coord::new(s.x, 0), f + Coord::new(0, s.y))
}

const DIAG: [Coord; 4] = [Coord::new(1, 1), Coord::new(-1, 1), Coord::new(-1, -1), Coord::new(1, -1)];

impl HeightField {
    fn bx(&self) -> BoxIndex {
        BoxIndex { r: self.n + 1 }
    }

    fn empty(n: i32) -> Self {
        HeightField { n, values: vec![ABSENT; BoxIndex { r: n + 1 }.len()] }
    }

    pub fn get(&self, f: Coord) -> Option<i32> {
        if !in_fbar(self.n, f) {
            return None;
        }
        let v = self.values[self.bx().index(f)];
        (v != ABSENT).then_some(v)
    }

    /// Overwrites one face value (used to build perturbed fields in tests and tools).
    pub fn set(&mut self, f: Coord, h: i32) -> Result<()> {
        if !in_fbar(self.n, f) {
            return domain(format!("{f} is not a face of the diamond"));
        }
        let i = self.bx().index(f);
        self.values[i] = h;
        Ok(())
    }

    /// Builds a field from a complete face → height assignment.
    pub fn from_fn(n: i32, h: impl Fn(Coord) -> i32) -> Self {
        let mut out = Self::empty(n);
        let bx = out.bx();
        for i in 0..bx.len() {
            let f = bx.coord(i);
            if in_fbar(n, f) {
                out.values[i] = h(f);
            }
        }
        out
    }

    /// All `(face, height)` pairs in row-major order.
    pub fn faces(&self) -> impl Iterator<Item = (Coord, i32)> + '_ {
        let bx = self.bx();
        (0..bx.len()).filter(|&i| self.values[i] != ABSENT).map(move |i| (bx.coord(i), self.values[i]))
    }
}

/// The unique height function of a configuration.
pub fn height_field(d: &DimerConfig) -> HeightField {
    let n = d.n;
    let mut h = HeightField::empty(n);
    let bx = h.bx();
    let start = Coord::new(-n, -n);
    h.values[bx.index(start)] = -n;
    let mut queue = VecDeque::from([start]);
    while let Some(f) = queue.pop_front() {
        let hf = h.values[bx.index(f)];
        for s in DIAG {
            let g = f + s;
            if !in_fbar(n, g) || h.values[bx.index(g)] != ABSENT {
                continue;
            }
            let (p, q) = separating_edge(f, s);
            if !in_diamond(n, p) && !in_diamond(n, q) {
                continue;
            }
            let dimer = in_diamond(n, p) && in_diamond(n, q) && d.has_edge(p, q);
            h.values[bx.index(g)] = hf + increment(f, g, dimer);
            queue.push_back(g);
        }
    }
    h
}

/// Checks the boundary values and that the increments encode a perfect matching.
pub fn validate_height(h: &HeightField) -> bool {
    dimers_from_heights(h, 1.0).is_ok()
}

/// Recovers the configuration encoded by a height field, failing if the field is not
/// allowable.
pub fn dimers_from_heights(h: &HeightField, a: f64) -> Result<DimerConfig> {
    let n = h.n;
    let bad = |m: String| Err(Error::Domain(m));
    let bx = h.bx();
    for i in 0..bx.len() {
        let f = bx.coord(i);
        if !in_fbar(n, f) {
            continue;
        }
        let Some(hf) = h.get(f) else { return bad(format!("face {f} has no height")) };
        if let Some(b) = boundary_height(n, f) {
            if b != hf {
                return bad(format!("boundary face {f} has height {hf}, expected {b}"));
            }
        }
    }
    if h.get(Coord::new(-n, -n)) != Some(-n) {
        return bad("anchor height is wrong".into());
    }
    let dbx = BoxIndex { r: n };
    let mut mate = vec![NO_DIR; dbx.len()];
    for i in 0..bx.len() {
        let f = bx.coord(i);
        if !in_fbar(n, f) {
            continue;
        }
        for s in [Coord::new(1, 1), Coord::new(1, -1)] {
            let g = f + s;
            if !in_fbar(n, g) {
                continue;
            }
            let (p, q) = separating_edge(f, s);
            if !in_diamond(n, p) && !in_diamond(n, q) {
                continue;
            }
            let delta = h.get(g).unwrap() - h.get(f).unwrap();
            let dimer = if delta == increment(f, g, false) {
                false
            } else if delta == increment(f, g, true) {
                true
            } else {
                return bad(format!("illegal increment {delta} from {f} to {g}"));
            };
            if dimer {
                if !(in_diamond(n, p) && in_diamond(n, q)) {
                    return bad(format!("dimer across boundary edge {p}-{q}"));
                }
                for (u, v) in [(p, q), (q, p)] {
                    let k = dbx.index(u);
                    if mate[k] != NO_DIR {
                        return bad(format!("vertex {u} carries two dimers"));
                    }
                    mate[k] = crate::lattice::dir_of(v - u).unwrap();
                }
            }
        }
    }
    DimerConfig::from_dirs(n, a, mate, None)
}

/// Mean of the four face heights around a vertex.
pub fn vertex_height(h: &HeightField, v: Coord) -> Result<f64> {
    if !v.is_vertex() {
        return domain(format!("{v} is not a vertex"));
    }
    let mut s = 0i64;
    for f in faces_around(v) {
        match h.get(f) {
            Some(x) => s += x as i64,
            None => return domain(format!("vertex {v} is missing face {f}")),
        }
    }
    Ok(s as f64 / 4.0)
}

pub fn height_at_vertex(d: &DimerConfig, v: Coord) -> Result<f64> {
    if !in_diamond(d.n, v) {
        return domain(format!("{v} is not a vertex of the diamond"));
    }
    vertex_height(&height_field(d), v)
}

/// Heights modulo 4 are the same for every configuration; this returns them.
pub fn face_residues(n: i32) -> HeightField {
    let mut h = HeightField::empty(n);
    let bx = h.bx();
    let start = Coord::new(-n, -n);
    h.values[bx.index(start)] = (-n).rem_euclid(4);
    let mut queue = VecDeque::from([start]);
    while let Some(f) = queue.pop_front() {
        let hf = h.values[bx.index(f)];
        for s in DIAG {
            let g = f + s;
            if !in_fbar(n, g) || h.values[bx.index(g)] != ABSENT {
                continue;
            }
            let (p, q) = separating_edge(f, s);
            if !in_diamond(n, p) && !in_diamond(n, q) {
                continue;
            }
            h.values[bx.index(g)] = (hf + increment(f, g, false)).rem_euclid(4);
            queue.push_back(g);
        }
    }
    h
}

/// Rebuilds the tiling from white-vertex heights alone: the face residues mod 4 pin
/// down which of the four faces sits just after the dimer.
pub fn dimers_from_vertex_heights(n: i32, a: f64, vh: impl Fn(Coord) -> f64) -> Result<DimerConfig> {
    let res = face_residues(n);
    let bx = BoxIndex { r: n };
    let mut pairs = Vec::new();
    for i in 0..bx.len() {
        let v = bx.coord(i);
        if !v.is_vertex() || vertex_color(v) != Color::White {
            continue;
        }
        let h0 = vh(v) - 1.5;
        if (h0 - h0.round()).abs() > 1e-9 {
            return domain(format!("vertex height at {v} is not a half-integer"));
        }
        let target = (h0.round() as i64).rem_euclid(4) as i32;
        let faces = faces_around(v);
        // Face k (E, N, W, S) following the dimer means the dimer points in direction k - 1.
        let k = (0..4).find(|&k| res.get(faces[k]) == Some(target));
        let Some(k) = k else { return domain(format!("no face matches residue at {v}")) };
        let d = ((k + 3) % 4) as u8;
        pairs.push((v, v + crate::lattice::DIRS[d as usize]));
    }
    DimerConfig::from_pairs(n, a, &pairs, None)
}

/// Integer central height: the unique integer in `(H' - 1/2, H' + 1/2]` where `H'` is the
/// mean height over faces with `|f|_inf <= radius` (default `floor(n^{3/4})`).
pub fn central_height(h: &HeightField, radius: Option<i32>) -> Result<i32> {
    let r = radius.unwrap_or_else(|| (h.n as f64).powf(0.75).floor() as i32);
    if r < 1 || r > h.n {
        return domain(format!("radius {r} outside 1..={}", h.n));
    }
    let mut sum = 0i64;
    let mut count = 0i64;
    for y in -r..=r {
        for x in -r..=r {
            if let Some(v) = h.get(Coord::new(x, y)) {
                sum += v as i64;
                count += 1;
            }
        }
    }
    if count == 0 {
        return domain("empty window");
    }
    Ok(window_integer(sum, count))
}

/// `floor(sum/count + 1/2)` in exact arithmetic.
pub fn window_integer(sum: i64, count: i64) -> i32 {
    (2 * sum + count).div_euclid(2 * count) as i32
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mollifier {
    offsets: Vec<Coord>,
}

impl Mollifier {
    pub fn new(mut offsets: Vec<Coord>) -> Result<Self> {
        if offsets.is_empty() {
            return domain("mollifier needs at least one offset");
        }
        if let Some(u) = offsets.iter().find(|u| u.x.rem_euclid(2) != 0 || u.y.rem_euclid(2) != 0) {
            return domain(format!("offset {u} is not in (2Z)^2"));
        }
        offsets.sort();
        offsets.dedup();
        Ok(Mollifier { offsets })
    }

    /// Column mollifier `{2 floor(l log^2 n) e2 : 0 <= l <= a_n}`.
    pub fn column(n: i32, a_n: u32) -> Self {
        let l2 = (n as f64).ln().powi(2);
        let offs = (0..=a_n)
            .map(|l| {
                let m = (l as f64 * l2).floor() as i32;
                Coord::new(-2 * m, 2 * m)
            })
            .collect();
        Mollifier::new(offs).expect("column offsets are even")
    }

    pub fn offsets(&self) -> &[Coord] {
        &self.offsets
    }
}

pub fn mollified_height(h: &HeightField, phi: &Mollifier, v: Coord) -> Result<f64> {
    let mut s = 0i64;
    for &u in phi.offsets() {
        match h.get(v + u) {
            Some(x) => s += x as i64,
            None => return domain(format!("mollifier window leaves the diamond at {}", v + u)),
        }
    }
    Ok(s as f64 / phi.offsets().len() as f64)
}

/// Nearest face to a real point, ties broken by the lexicographically smallest face.
pub fn nearest_face(p: (f64, f64)) -> Coord {
    nearest_matching(p, 2, |c| c.is_face())
}

pub(crate) fn nearest_matching(p: (f64, f64), reach: i32, ok: impl Fn(Coord) -> bool) -> Coord {
    let (bx, by) = (p.0.floor() as i32, p.1.floor() as i32);
    let mut best: Option<(f64, Coord)> = None;
    for x in bx - reach..=bx + reach + 1 {
        for y in by - reach..=by + reach + 1 {
            let c = Coord::new(x, y);
            if !ok(c) {
                continue;
            }
            let d2 = (x as f64 - p.0).powi(2) + (y as f64 - p.1).powi(2);
            best = match best {
                Some((bd, bc)) if bd < d2 || (bd == d2 && bc < c) => Some((bd, bc)),
                _ => Some((d2, c)),
            };
        }
    }
    best.expect("search window contains a match").1
}

/// Height extended to the plane via the nearest face.
pub fn height_at_point(h: &HeightField, p: (f64, f64)) -> Result<i32> {
    let f = nearest_face(p);
    h.get(f).ok_or_else(|| Error::Domain(format!("point {p:?} rounds to {f}, outside the diamond")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::DIRS;
    use crate::sampler::{enumerate_tilings, sample, RandomSeed};

    #[test]
    fn boundary_rules_on_every_n4_tiling() {
        for (d, _) in enumerate_tilings(4, 0.5).unwrap() {
            let h = height_field(&d);
            assert_eq!(h.faces().count(), (11 * 11 + 1) / 2 - 4);
            for (f, v) in h.faces() {
                if let Some(b) = boundary_height(4, f) {
                    assert_eq!(v, b, "face {f}");
                }
            }
            assert!(validate_height(&h));
            assert_eq!(dimers_from_heights(&h, 0.5).unwrap().pairs(), d.pairs());
        }
    }

    #[test]
    fn south_and_north_boundary_examples() {
        let d = sample(8, 0.5, RandomSeed::new(3, 0)).unwrap();
        let h = height_field(&d);
        for i in -8..=8 {
            if (i + 8) % 2 == 0 {
                assert_eq!(h.get(Coord::new(i, -8)), Some(i));
                assert_eq!(h.get(Coord::new(i, 8)), Some(-i));
            }
        }
    }

    #[test]
    fn adjacent_faces_differ_by_one_or_three() {
        let d = sample(16, 0.5, RandomSeed::new(4, 0)).unwrap();
        let h = height_field(&d);
        for (f, v) in h.faces() {
            for s in DIAG {
                if let Some(w) = h.get(f + s) {
                    let diff = (w - v).abs();
                    assert!(diff == 1 || diff == 3, "{f} -> {}", f + s);
                }
            }
        }
    }

    #[test]
    fn vertex_height_remark() {
        // S vertex with its a-face (north) at height 1; walk ccw N -> W -> S -> E, where
        // the edge crossed leaving face k (E, N, W, S) has direction index k.
        for (d, want) in [(0usize, 2.5), (3, 1.5), (2, 0.5), (1, -0.5)] {
            let mut hs = [0i32; 4];
            hs[1] = 1;
            for k in [2usize, 3, 0] {
                let prev = (k + 3) % 4;
                hs[k] = hs[prev] + if prev == d { -3 } else { 1 };
            }
            assert_eq!(hs[1], hs[0] + if d == 0 { -3 } else { 1 });
            assert_eq!(hs.iter().sum::<i32>() as f64 / 4.0, want, "dimer dir {d}");
        }
    }

    #[test]
    fn vertex_heights_recover_tiling() {
        for seed in 0..5 {
            let d = sample(12, 0.5, RandomSeed::new(seed, 0)).unwrap();
            let h = height_field(&d);
            let back = dimers_from_vertex_heights(12, 0.5, |v| vertex_height(&h, v).unwrap()).unwrap();
            assert_eq!(back.pairs(), d.pairs());
        }
    }

    #[test]
    fn vertex_height_matches_direct_rule() {
        let d = sample(8, 0.5, RandomSeed::new(11, 0)).unwrap();
        let h = height_field(&d);
        for (w, b) in d.pairs() {
            let hv = vertex_height(&h, w).unwrap();
            // The face after the dimer edge in ccw order has height hv - 3/2.
            let k = (0..4).find(|&k| w + DIRS[k] == b).unwrap();
            let after = faces_around(w)[(k + 1) % 4];
            assert_eq!(h.get(after).unwrap() as f64, hv - 1.5);
        }
        assert!(height_at_vertex(&d, Coord::new(0, 0)).is_err());
    }

    #[test]
    fn perturbation_is_rejected() {
        let d = sample(8, 0.5, RandomSeed::new(2, 0)).unwrap();
        let mut h = height_field(&d);
        let f = Coord::new(0, 0);
        let v = h.get(f).unwrap();
        h.set(f, v + 1).unwrap();
        assert!(!validate_height(&h));
        let zero = HeightField::from_fn(8, |f| boundary_height(8, f).unwrap_or(0));
        assert!(!validate_height(&zero));
        let all_zero = HeightField::from_fn(8, |_| 0);
        assert!(!validate_height(&all_zero));
    }

    #[test]
    fn central_height_rounding() {
        let h = HeightField::from_fn(8, |_| 0);
        assert_eq!(central_height(&h, Some(3)).unwrap(), 0);
        assert_eq!(window_integer(1, 2), 1);
        assert_eq!(window_integer(-1, 2), 0);
        assert_eq!(window_integer(3, 2), 2);
        assert!(central_height(&h, Some(0)).is_err());
    }

    #[test]
    fn mollifier_basics() {
        let d = sample(16, 0.5, RandomSeed::new(9, 0)).unwrap();
        let h = height_field(&d);
        let one = Mollifier::new(vec![Coord::new(0, 0)]).unwrap();
        assert_eq!(mollified_height(&h, &one, Coord::new(2, 0)).unwrap(), h.get(Coord::new(2, 0)).unwrap() as f64);
        let c = HeightField::from_fn(16, |_| 5);
        let col = Mollifier::column(16, 1);
        assert!(col.offsets().iter().all(|u| u.x % 2 == 0 && u.y % 2 == 0));
        assert_eq!(mollified_height(&c, &col, Coord::new(0, -8)).unwrap(), 5.0);
        assert!(Mollifier::new(vec![Coord::new(1, 1)]).is_err());
        assert!(mollified_height(&h, &col, Coord::new(-16, 16)).is_err());
    }

    #[test]
    fn nearest_face_ties_are_lexicographic() {
        assert_eq!(nearest_face((0.5, 0.5)), Coord::new(0, 0));
        assert_eq!(nearest_face((1.0, 0.0)), Coord::new(0, 0));
        assert_eq!(nearest_face((2.9, 1.1)), Coord::new(3, 1));
    }
}
