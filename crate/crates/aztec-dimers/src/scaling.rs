//! Rough-smooth boundary geometry and backbone-path statistics.
//!
//! Coordinates `ξ` are macroscopic: the diamond of order `n` is `n·[-1, 1]²`. The limit
//! curve is the zero set of an even polynomial in `(ξ₁, ξ₂)`; its inner component is the
//! rough-smooth boundary, parametrized in the third quadrant by `t = ξ·e₂`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::heights::{central_height, height_field};
use crate::lattice::Coord;
use crate::sampler::DimerConfig;
use crate::temperley::{backbone, south_forest, Backbone, PathKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFrame {
    pub a: f64,
    pub c: f64,
    pub xi_c: f64,
    pub c0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

pub fn scaling_frame(a: f64) -> Result<ScalingFrame> {
    if !(a > 0.0 && a < 1.0) {
        return domain(format!("scaling constants need a in (0, 1), got {a}"));
    }
    let c = a / (1.0 + a * a);
    let d = 1.0 - 2.0 * c;
    let c0 = d.powf(2.0 / 3.0) / (2.0 * c * (1.0 + c)).cbrt();
    Ok(ScalingFrame {
        a,
        c,
        xi_c: -0.5 * d.sqrt(),
        c0,
        lambda1: d.sqrt() / (2.0 * c0),
        lambda2: d.powf(1.5) / (2.0 * c * c0 * c0),
    })
}

impl ScalingFrame {
    /// Horizontal unit of the Airy scale, `2^{5/3} λ₁ n^{1/3}`.
    pub fn space_unit(&self, n: i32) -> f64 {
        2f64.powf(5.0 / 3.0) * self.lambda1 * (n as f64).cbrt()
    }

    /// Time unit along the curve, `2^{1/3} λ₂ n^{2/3}`.
    pub fn time_unit(&self, n: i32) -> f64 {
        2f64.cbrt() * self.lambda2 * (n as f64).powf(2.0 / 3.0)
    }
}

/// Value of the limit-curve polynomial at `(ξ₁, ξ₂)` for weight `a`.
pub fn limit_curve_residual(xi1: f64, xi2: f64, a: f64) -> f64 {
    let c = a / (1.0 + a * a);
    curve_poly(xi1, xi2, c)
}

fn curve_poly(x: f64, y: f64, c: f64) -> f64 {
    let (x2, y2) = (x * x, y * y);
    let c2 = c * c;
    let c4 = c2 * c2;
    let c6 = c4 * c2;
    let q = x2 * x2 + (y2 - 1.0).powi(2) - 2.0 * x2 * (1.0 + y2);
    64.0 * c6 * (x2 - 1.0) * (y2 - 1.0)
        - q * q
        - 16.0 * c4
            * (3.0 * (y2 - 1.0).powi(2) + x2 * (-6.0 + 27.0 * y2 - 20.0 * y2 * y2) + x2 * x2 * (3.0 - 20.0 * y2 + 16.0 * y2 * y2))
        - 4.0 * c2
            * (3.0 * (y2 - 1.0).powi(3)
                + x2 * x2 * x2 * (3.0 + 8.0 * y2)
                + x2 * x2 * (-9.0 + 13.0 * y2 - 16.0 * y2 * y2)
                + x2 * (9.0 - 30.0 * y2 + 13.0 * y2 * y2 + 8.0 * y2 * y2 * y2))
}

const SCAN_STEPS: usize = 4000;

fn check_curve_weight(a: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) || (a - 1.0).abs() < 1e-12 {
        return domain(format!("no smooth region for a = {a}"));
    }
    Ok(a / (1.0 + a * a))
}

/// Sign-change brackets of `g` on `[lo, hi]` (scanned from `hi` down to `lo`).
fn brackets(g: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let h = (hi - lo) / SCAN_STEPS as f64;
    let mut s1 = hi;
    let mut v1 = g(s1);
    for k in 1..=SCAN_STEPS {
        let s0 = hi - h * k as f64;
        let v0 = g(s0);
        if v0 == 0.0 || v0.signum() != v1.signum() && v1 != 0.0 {
            out.push((s0, s1));
        }
        s1 = s0;
        v1 = v0;
    }
    out
}

fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let glo = g(lo);
    if glo == 0.0 {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if gm.signum() == glo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let mut s = 0.5 * (lo + hi);
    // Newton polish, kept inside the bracket.
    for _ in 0..3 {
        let e = 1e-7;
        let d = (g(s + e) - g(s - e)) / (2.0 * e);
        if d == 0.0 {
            break;
        }
        let next = s - g(s) / d;
        if next < lo || next > hi {
            break;
        }
        s = next;
    }
    s
}

/// `α = √(1 − 4c²)`: the point `(-α, 0)` where the rough-smooth curve meets the axis.
/// The polynomial has a triple root there, so the closed form is used rather than a solve.
pub fn curve_extent(a: f64) -> Result<f64> {
    let c = check_curve_weight(a)?;
    Ok((1.0 - 4.0 * c * c).sqrt())
}

/// Bracketed estimate of `α` from the first sign change of the polynomial on the axis.
pub fn curve_extent_scan(a: f64) -> Result<f64> {
    let c = check_curve_weight(a)?;
    let g = |x: f64| curve_poly(x, 0.0, c);
    // The outer curve touches the axis at -1; the first sign change from 0 is the inner one.
    let br = brackets(&g, -1.0 + 1e-9, 0.0);
    let Some(&(lo, hi)) = br.first() else {
        return domain("rough-smooth curve does not meet the axis");
    };
    Ok(-bisect(&g, lo, hi))
}

/// Point `ξ₀(t)` of the rough-smooth curve in the third quadrant with `ξ₀(t)·e₂ = t`.
pub fn limit_curve_point(t: f64, a: f64) -> Result<(f64, f64)> {
    let c = check_curve_weight(a)?;
    if !t.is_finite() || t.abs() >= 1.0 {
        return domain(format!("t = {t} outside the curve's range"));
    }
    let point = |s: f64| (s - t / 2.0, s + t / 2.0);
    let g = |s: f64| {
        let (x, y) = point(s);
        curve_poly(x, y, c)
    };
    let lo = -1.0 + t.abs() / 2.0;
    let br = brackets(&g, lo, 0.0);
    if br.len() < 2 {
        return domain(format!("no rough-smooth crossing on the line v·e2 = {t}"));
    }
    // Drop the outermost crossing (frozen-rough curve); keep the outermost inner crossing
    // that lies in the closed third quadrant.
    let tol = 1e-12;
    for &(l, h) in br[..br.len() - 1].iter().rev() {
        let s = bisect(&g, l, h);
        let (x, y) = point(s);
        if x <= tol && y <= tol {
            return Ok((x, y));
        }
    }
    domain(format!("no third-quadrant rough-smooth crossing at t = {t}"))
}

/// Curve geometry at fixed `n`: caches `α` and evaluates `n ξ₀(t/n)`.
#[derive(Clone, Copy, Debug)]
pub struct CurveFrame {
    pub n: i32,
    pub a: f64,
    pub alpha: f64,
}

impl CurveFrame {
    pub fn new(n: i32, a: f64) -> Result<Self> {
        if n <= 0 {
            return domain(format!("n = {n} must be positive"));
        }
        Ok(CurveFrame { n, a, alpha: curve_extent(a)? })
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `n ξ₀(t/n)`.
    pub fn curve(&self, t: f64) -> Result<(f64, f64)> {
        if t.abs() > self.alpha * self.nf() {
            return domain(format!("|t| = {} exceeds alpha n = {}", t.abs(), self.alpha * self.nf()));
        }
        let (x, y) = limit_curve_point(t / self.nf(), self.a)?;
        Ok((self.nf() * x, self.nf() * y))
    }

    /// `β_n(t, x) = n ξ₀(t/n) + x e₁`.
    pub fn beta(&self, t: f64, x: f64) -> Result<(f64, f64)> {
        let (p, q) = self.curve(t)?;
        Ok((p + x, q + x))
    }

    /// Inverse of `β_n`: `t = p·e₂` exactly, then `x` from the first coordinate.
    pub fn beta_inverse(&self, p: (f64, f64)) -> Result<(f64, f64)> {
        let t = p.1 - p.0;
        let (c1, _) = self.curve(t)?;
        Ok((t, p.0 - c1))
    }

    /// `γ_n(t, x) = n ξ₀(t/n) + (x, 0)`.
    pub fn gamma(&self, t: f64, x: f64) -> Result<(f64, f64)> {
        let (p, q) = self.curve(t)?;
        Ok((p + x, q))
    }
}

/// `β_n(t, x)` in lattice units.
pub fn beta_map(n: i32, a: f64, t: f64, x: f64) -> Result<(f64, f64)> {
    CurveFrame::new(n, a)?.beta(t, x)
}

/// Nearest a-face (odd coordinates, `x + y ≡ 2 mod 4`); ties go to the lexicographically
/// smallest face.
pub fn nearest_a_face(p: (f64, f64)) -> Coord {
    let (bx, by) = (p.0.floor() as i32, p.1.floor() as i32);
    let mut best: Option<(f64, Coord)> = None;
    for x in bx - 3..=bx + 4 {
        for y in by - 3..=by + 4 {
            if x.rem_euclid(2) != 1 || y.rem_euclid(2) != 1 || (x + y).rem_euclid(4) != 2 {
                continue;
            }
            let d = (x as f64 - p.0).powi(2) + (y as f64 - p.1).powi(2);
            let c = Coord::new(x, y);
            let better = match best {
                None => true,
                Some((bd, bc)) => d < bd - 1e-12 || ((d - bd).abs() <= 1e-12 && (c.x, c.y) < (bc.x, bc.y)),
            };
            if better {
                best = Some((d, c));
            }
        }
    }
    best.expect("a-faces have spacing 2").1
}

/// `γ̂_n(t, x) = [γ_n(2^{1/3}λ₂n^{2/3} t, 2^{5/3}λ₁n^{1/3} x)]_a − (1, 1)`.
pub fn gamma_hat(n: i32, frame: &ScalingFrame, t: f64, x: f64) -> Result<Coord> {
    let cf = CurveFrame::new(n, frame.a)?;
    let p = cf.gamma(frame.time_unit(n) * t, frame.space_unit(n) * x)?;
    Ok(nearest_a_face(p) - Coord::new(1, 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionName {
    Rs,
    RsStar,
    PrsStar,
    Meso,
    Cap,
    Cross,
}

/// A named region at size `n`. `β`-regions are boxes in `(t, x)` coordinates with bounds
/// rounded outward to integers; `Meso` is a rotated box around `n(ξ_c, ξ_c)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionSpec {
    pub name: RegionName,
    pub n: i32,
    pub a: f64,
    pub t_range: (f64, f64),
    pub x_range: (f64, f64),
    /// Free constant in the upper `x` bound of `Cross`; zero unless set.
    pub gamma_a: f64,
    #[serde(skip)]
    frame: Option<CurveFrame>,
    /// First coordinate of `n ξ₀(t/n)` at integer `t`, offset by `t_offset`.
    #[serde(skip)]
    curve_x: Vec<f64>,
    #[serde(skip)]
    t_offset: i64,
}

impl RegionSpec {
    pub fn new(name: RegionName, n: i32, a: f64) -> Result<Self> {
        Self::with_gamma(name, n, a, 0.0)
    }

    pub fn with_gamma(name: RegionName, n: i32, a: f64, gamma_a: f64) -> Result<Self> {
        let frame = CurveFrame::new(n, a)?;
        let nf = n as f64;
        let ln = nf.ln();
        let p34 = nf.powf(0.75);
        let p56 = nf.powf(5.0 / 6.0);
        let (t, x) = match name {
            RegionName::Rs => ((-p34, p34), (-nf.sqrt() * ln.powf(1.5), 2.0 * nf.cbrt() * ln * ln)),
            RegionName::RsStar => ((-2.0 * p34, 2.0 * p34), (-nf.sqrt() * ln.powf(1.5), 2.0 * nf.cbrt() * ln * ln)),
            RegionName::PrsStar => ((-2.0 * p34, 2.0 * p34), (-nf.sqrt() * ln * ln, p34)),
            RegionName::Cap => ((-p56, p56), (-nf.sqrt() * ln * ln, 2.0 * nf.cbrt() * ln * ln)),
            RegionName::Meso => ((-p34, p34), (-nf.sqrt(), nf.sqrt())),
            RegionName::Cross => {
                let xi0 = frame.curve(0.0)?;
                let norm = (xi0.0 * xi0.0 + xi0.1 * xi0.1).sqrt() / nf;
                ((-p56, p56), (nf.cbrt() * ln * ln, nf * (norm + gamma_a)))
            }
        };
        let round = |(lo, hi): (f64, f64)| (lo.floor(), hi.ceil());
        let t_range = round(t);
        let reach = (frame.alpha * nf).floor();
        let (tlo, thi) = (t_range.0.max(-reach) as i64, t_range.1.min(reach) as i64);
        let curve_x = if name == RegionName::Meso {
            Vec::new()
        } else {
            (tlo..=thi).map(|t| frame.curve(t as f64).map(|p| p.0).unwrap_or(f64::NAN)).collect()
        };
        Ok(RegionSpec {
            name,
            n,
            a,
            t_range,
            x_range: round(x),
            gamma_a,
            frame: Some(frame),
            curve_x,
            t_offset: tlo,
        })
    }

    fn curve_frame(&self) -> CurveFrame {
        self.frame.unwrap_or(CurveFrame { n: self.n, a: self.a, alpha: curve_extent(self.a).unwrap_or(0.0) })
    }

    fn in_beta_box(&self, p: (f64, f64)) -> bool {
        let t = p.1 - p.0;
        if t.fract() == 0.0 {
            let k = t as i64 - self.t_offset;
            if k >= 0 && (k as usize) < self.curve_x.len() {
                let x = p.0 - self.curve_x[k as usize];
                return x >= self.x_range.0 && x <= self.x_range.1;
            }
        }
        if t < self.t_range.0 || t > self.t_range.1 {
            return false;
        }
        let Ok((t, x)) = self.curve_frame().beta_inverse(p) else { return false };
        t >= self.t_range.0 && t <= self.t_range.1 && x >= self.x_range.0 && x <= self.x_range.1
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        match self.name {
            RegionName::Meso => {
                let nf = self.n as f64;
                let xc = nf * scaling_frame(self.a.min(1.0 / self.a)).map(|f| f.xi_c).unwrap_or(0.0);
                let (dx, dy) = (p.0 - xc, p.1 - xc);
                // Undo R_{-π/4}.
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let (u, v) = (s * (dx - dy), s * (dx + dy));
                u >= self.t_range.0 && u <= self.t_range.1 && v >= self.x_range.0 && v <= self.x_range.1
            }
            RegionName::Cross => {
                let mut q = p;
                for _ in 0..4 {
                    if self.in_beta_box(q) {
                        return true;
                    }
                    q = (q.1, -q.0);
                }
                false
            }
            _ => self.in_beta_box(p),
        }
    }

    pub fn contains_coord(&self, v: Coord) -> bool {
        self.contains((v.x as f64, v.y as f64))
    }

    /// Boundary polygons for drawing, `per_side` points per edge of the defining box.
    pub fn outlines(&self, per_side: usize) -> Result<Vec<Vec<(f64, f64)>>> {
        let m = per_side.max(2);
        let box_edge = |lo: (f64, f64), hi: (f64, f64)| -> Vec<(f64, f64)> {
            let mut pts = Vec::with_capacity(4 * m);
            let lerp = |a: f64, b: f64, k: usize| a + (b - a) * k as f64 / m as f64;
            for k in 0..m {
                pts.push((lerp(lo.0, hi.0, k), lo.1));
            }
            for k in 0..m {
                pts.push((hi.0, lerp(lo.1, hi.1, k)));
            }
            for k in 0..m {
                pts.push((lerp(hi.0, lo.0, k), hi.1));
            }
            for k in 0..m {
                pts.push((lo.0, lerp(hi.1, lo.1, k)));
            }
            pts
        };
        let (x0, x1) = self.x_range;
        if self.name == RegionName::Meso {
            let xc = self.n as f64 * scaling_frame(self.a.min(1.0 / self.a))?.xi_c;
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let poly = box_edge((self.t_range.0, x0), (self.t_range.1, x1))
                .into_iter()
                .map(|(u, v)| (xc + s * (u + v), xc + s * (v - u)))
                .collect();
            return Ok(vec![poly]);
        }
        let cf = self.curve_frame();
        let reach = cf.alpha * self.n as f64;
        let (t0, t1) = (self.t_range.0.max(-reach), self.t_range.1.min(reach));
        let base: Vec<(f64, f64)> =
            box_edge((t0, x0), (t1, x1)).into_iter().map(|(t, x)| cf.beta(t, x)).collect::<Result<_>>()?;
        if self.name != RegionName::Cross {
            return Ok(vec![base]);
        }
        // `contains` tests the box against p rotated by (x, y) -> (y, -x) up to three times.
        let mut out = vec![base.clone()];
        let mut cur = base;
        for _ in 0..3 {
            cur = cur.into_iter().map(|(x, y)| (-y, x)).collect();
            out.push(cur.clone());
        }
        Ok(out)
    }
}

/// Whether the central height equals `4I - n - 1` for the south forest split point `I`.
pub fn height_match_check(d: &DimerConfig) -> Result<bool> {
    let h = height_field(d);
    let hc = central_height(&h, None)?;
    let bb = backbone(&south_forest(d))?;
    Ok(hc == 4 * bb.split.i - d.n - 1)
}

/// Largest eastward overhang `w₁ − v₁` over pairs `v` before `w` on the path, both in the
/// region. `-∞` when fewer than two path vertices lie in the region.
pub fn backtrack_stat(path: &[Coord], region: &RegionSpec) -> f64 {
    backtrack_stat_by(path, |v| region.contains_coord(v))
}

pub fn backtrack_stat_by(path: &[Coord], mut inside: impl FnMut(Coord) -> bool) -> f64 {
    let mut min_seen: Option<i32> = None;
    let mut best = f64::NEG_INFINITY;
    for &w in path {
        if !inside(w) {
            continue;
        }
        if let Some(m) = min_seen {
            best = best.max((w.x - m) as f64);
        }
        min_seen = Some(min_seen.map_or(w.x, |m| m.min(w.x)));
    }
    best
}

/// `(2k + 1) n^{1/4} log² n`.
pub fn backtrack_bound(n: i32, k: i32) -> f64 {
    let nf = n as f64;
    (2 * k + 1) as f64 * nf.powf(0.25) * nf.ln().powi(2)
}

/// `A_i^{n,±}` sampled on a time grid; entries are `±∞` where the path misses the line.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AiryPaths {
    pub n: i32,
    pub split: i32,
    pub times: Vec<f64>,
    /// `upper[i-1][k] = A_i^{n,+}(times[k])`.
    pub upper: Vec<Vec<f64>>,
    pub lower: Vec<Vec<f64>>,
}

/// Horizontal crossings of a lattice path with the line `y = y0`.
fn line_crossings(path: &[Coord], y0: f64) -> Vec<f64> {
    let mut xs = Vec::new();
    for (k, v) in path.iter().enumerate() {
        if v.y as f64 == y0 {
            xs.push(v.x as f64);
        }
        if let Some(w) = path.get(k + 1) {
            let (a, b) = (v.y as f64 - y0, w.y as f64 - y0);
            if a * b < 0.0 {
                let s = a / (a - b);
                xs.push(v.x as f64 + s * (w.x - v.x) as f64);
            }
        }
    }
    xs
}

/// Scaled extremal crossings of the top `count` south paths `S_{I+1-i}` with the horizontal
/// lines through `γ_n(2^{1/3}λ₂n^{2/3} t, ·)`, restricted to `region`.
pub fn extract_airy_paths(
    bb: &Backbone,
    n: i32,
    frame: &ScalingFrame,
    times: &[f64],
    count: usize,
    region: &RegionSpec,
) -> Result<AiryPaths> {
    let cf = CurveFrame::new(n, frame.a)?;
    let unit = frame.space_unit(n);
    let i_split = bb.split.i;
    let mut upper = vec![vec![f64::NEG_INFINITY; times.len()]; count];
    let mut lower = vec![vec![f64::INFINITY; times.len()]; count];
    for (k, &t) in times.iter().enumerate() {
        let base = cf.gamma(frame.time_unit(n) * t, 0.0)?;
        for i in 0..count {
            let idx = i_split - i as i32;
            let Some(path) = bb.path(PathKind::SMinus, idx) else { continue };
            for x in line_crossings(&path.vertices, base.1) {
                if !region.contains((x, base.1)) {
                    continue;
                }
                let s = (x - base.0) / unit;
                upper[i][k] = upper[i][k].max(s);
                lower[i][k] = lower[i][k].min(s);
            }
        }
    }
    Ok(AiryPaths { n, split: i_split, times: times.to_vec(), upper, lower })
}

/// Top-path value `A_1^{n,+}(0)` of a tiling, with the crossing restricted to `RS_n`.
pub fn top_path_at_zero(d: &DimerConfig, frame: &ScalingFrame) -> Result<f64> {
    let bb = backbone(&south_forest(d))?;
    let region = RegionSpec::new(RegionName::Rs, d.n, frame.a)?;
    let ap = extract_airy_paths(&bb, d.n, frame, &[0.0], 1, &region)?;
    Ok(ap.upper[0][0])
}

/// A full crossing of the box by a path segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Crossing {
    start: usize,
    end: usize,
    eastward: bool,
}

fn box_crossings(path: &[Coord], center: (f64, f64), r1: f64, r2: f64) -> Vec<Crossing> {
    let inside = |v: Coord| (v.x as f64 - center.0).abs() <= r1 && (v.y as f64 - center.1).abs() <= r2;
    let side = |v: Coord| {
        let dx = v.x as f64 - center.0;
        if dx <= -r1 {
            Some(false)
        } else if dx >= r1 {
            Some(true)
        } else {
            None
        }
    };
    let mut out = Vec::new();
    // Last boundary touch within the current in-box run: (index, east side?).
    let mut last: Option<(usize, bool)> = None;
    for (k, &v) in path.iter().enumerate() {
        if !inside(v) {
            last = None;
            continue;
        }
        if let Some(east) = side(v) {
            if let Some((s, prev)) = last {
                if prev != east {
                    out.push(Crossing { start: s, end: k, eastward: east });
                }
            }
            last = Some((k, east));
        }
    }
    out
}

/// Result of scanning a box for onions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnionReport {
    pub onions: usize,
    /// Fewest paths entering the enclosed region over the onions found.
    pub min_layers: Option<usize>,
}

/// Detects pairs of opposite full crossings of `B_{r₁,r₂}(center)` by a single path and
/// counts the paths entering the region between the two crossings.
pub fn onion_detect(paths: &[Vec<Coord>], r1: f64, r2: f64, center: (f64, f64)) -> Result<OnionReport> {
    if !(r1 >= 1.0 && r2 >= 1.0) {
        return domain("onion box needs r1, r2 >= 1");
    }
    let mut report = OnionReport::default();
    for path in paths {
        let cr = box_crossings(path, center, r1, r2);
        for (i, c1) in cr.iter().enumerate() {
            let Some(c2) = cr[i + 1..].iter().find(|c| c.eastward != c1.eastward && c.start >= c1.end) else {
                continue;
            };
            report.onions += 1;
            let layers = enclosed_path_count(paths, &path[c1.start..=c1.end], &path[c2.start..=c2.end]);
            report.min_layers = Some(report.min_layers.map_or(layers, |m| m.min(layers)));
        }
    }
    Ok(report)
}

/// Paths with a vertex between the two crossing segments, column by column.
fn enclosed_path_count(paths: &[Vec<Coord>], s1: &[Coord], s2: &[Coord]) -> usize {
    use std::collections::HashMap;
    let mut span: HashMap<i32, (i32, i32)> = HashMap::new();
    for v in s1.iter().chain(s2) {
        let e = span.entry(v.x).or_insert((v.y, v.y));
        e.0 = e.0.min(v.y);
        e.1 = e.1.max(v.y);
    }
    paths
        .iter()
        .filter(|p| p.iter().any(|v| span.get(&v.x).is_some_and(|&(lo, hi)| v.y >= lo && v.y <= hi)))
        .count()
}

/// The onion width threshold `10 ℓ √r₂ log² n`.
pub fn onion_threshold(n: i32, layers: usize, r2: f64) -> f64 {
    10.0 * layers as f64 * r2.sqrt() * (n as f64).ln().powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample, RandomSeed};

    #[test]
    fn frame_constants() {
        let f = scaling_frame(0.5).unwrap();
        assert!((f.c - 0.4).abs() < 1e-15);
        assert!((f.xi_c + 0.2f64.sqrt() / 2.0).abs() < 1e-15);
        // Second coding: substitute c₀ into λ₁, λ₂ symbolically.
        let d: f64 = 1.0 - 2.0 * f.c;
        let k = 2.0 * f.c * (1.0 + f.c);
        let l1 = 0.5 * d.powf(1.0 / 2.0 - 2.0 / 3.0) * k.powf(1.0 / 3.0);
        let l2 = d.powf(1.5 - 4.0 / 3.0) * k.powf(2.0 / 3.0) / (2.0 * f.c);
        assert!((f.lambda1 - l1).abs() < 1e-13 && (f.lambda2 - l2).abs() < 1e-13);
        assert!(scaling_frame(1.0).is_err() && scaling_frame(0.0).is_err() && scaling_frame(2.0).is_err());
        let near = scaling_frame(0.999).unwrap();
        assert!(near.xi_c.abs() < 1e-3);
    }

    #[test]
    fn curve_passes_through_diagonal_point() {
        for a in [0.2, 0.5, 0.8] {
            let f = scaling_frame(a).unwrap();
            assert!(limit_curve_residual(f.xi_c, f.xi_c, a).abs() < 1e-10);
            let (x, y) = limit_curve_point(0.0, a).unwrap();
            assert!((x - f.xi_c).abs() < 1e-10 && (y - f.xi_c).abs() < 1e-10);
        }
    }

    #[test]
    fn curve_point_is_inner_root() {
        let a = 0.5;
        let c = 0.4;
        for t in [-0.5, -0.3, 0.1, 0.4, 0.55] {
            let (x, y) = limit_curve_point(t, a).unwrap();
            assert!((y - x - t).abs() < 1e-12);
            assert!(limit_curve_residual(x, y, a).abs() < 1e-10);
            // Dense sign scan along the same line: exactly one further root lies outside.
            let s0 = (x + y) / 2.0;
            let lo = -1.0 + t.abs() / 2.0;
            let mut outer = 0;
            let m = 20000;
            let g = |s: f64| curve_poly(s - t / 2.0, s + t / 2.0, c);
            for k in 0..m {
                let s1 = s0 - 1e-6 - (s0 - 1e-6 - lo) * k as f64 / m as f64;
                let s2 = s0 - 1e-6 - (s0 - 1e-6 - lo) * (k + 1) as f64 / m as f64;
                if g(s1) * g(s2) < 0.0 {
                    outer += 1;
                }
            }
            assert_eq!(outer, 1, "t = {t}");
            // Mirror symmetry.
            let (mx, my) = limit_curve_point(-t, a).unwrap();
            assert!((mx - y).abs() < 1e-9 && (my - x).abs() < 1e-9);
        }
        assert!(limit_curve_point(0.9, a).is_err());
    }

    #[test]
    fn extent_is_on_curve() {
        for a in [0.3, 0.5, 0.8, 2.0] {
            let al = curve_extent(a).unwrap();
            assert!(limit_curve_residual(-al, 0.0, a).abs() < 1e-12);
            assert!(limit_curve_residual(0.0, -al, a).abs() < 1e-12);
            let scan = curve_extent_scan(a).unwrap();
            assert!((al - scan).abs() < 1e-4, "{a}: {al} vs {scan}");
        }
        assert!((curve_extent(0.5).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn beta_round_trip() {
        let cf = CurveFrame::new(100, 0.5).unwrap();
        let p = cf.beta(0.0, 0.0).unwrap();
        assert!((p.0 - 100.0 * scaling_frame(0.5).unwrap().xi_c).abs() < 1e-8);
        for (t, x) in [(3.0, -2.0), (-10.0, 5.5), (25.0, 0.0)] {
            let q = cf.beta(t, x).unwrap();
            let (t2, x2) = cf.beta_inverse(q).unwrap();
            assert!((t - t2).abs() < 1e-9 && (x - x2).abs() < 1e-9);
        }
        assert!(cf.beta(70.0, 0.0).is_err());
    }

    #[test]
    fn a_face_rounding() {
        use crate::lattice::{classify_face, FaceClass};
        for p in [(0.3, 0.1), (-5.5, 7.2), (2.0, 2.0), (10.0, -3.0), (1.0, 1.0)] {
            let f = nearest_a_face(p);
            assert_eq!(classify_face(f).unwrap(), FaceClass::A, "{p:?}");
            assert!((f.x as f64 - p.0).abs() <= 2.0 && (f.y as f64 - p.1).abs() <= 2.0);
        }
        // Equidistant from (1,1) and (-1,-1): the smaller wins.
        assert_eq!(nearest_a_face((0.0, 0.0)), Coord::new(-1, -1));
        let fr = scaling_frame(0.5).unwrap();
        let g = gamma_hat(64, &fr, 0.0, 0.0).unwrap();
        let xc = 64.0 * fr.xi_c;
        assert!((g.x as f64 + 1.0 - xc).abs() <= 2.0 && (g.y as f64 + 1.0 - xc).abs() <= 2.0);
    }

    #[test]
    fn regions() {
        let rs = RegionSpec::new(RegionName::Rs, 256, 0.5).unwrap();
        let cf = CurveFrame::new(256, 0.5).unwrap();
        assert!(rs.contains(cf.beta(0.0, 0.0).unwrap()));
        assert!(!rs.contains(cf.beta(0.0, rs.x_range.1 + 2.0).unwrap()));
        let meso = RegionSpec::new(RegionName::Meso, 256, 0.5).unwrap();
        let xc = 256.0 * scaling_frame(0.5).unwrap().xi_c;
        assert!(meso.contains((xc, xc)));
        assert!(meso.contains((xc + 40.0, xc - 40.0)));
        assert!(!meso.contains((xc + 20.0, xc + 20.0)));
        let cross = RegionSpec::new(RegionName::Cross, 4096, 0.5).unwrap();
        let p = cf.beta(0.0, 0.0).unwrap();
        assert_eq!(cross.contains(p), cross.contains((-p.1, p.0)));
    }

    #[test]
    fn outlines_trace_the_box() {
        let rs = RegionSpec::new(RegionName::Rs, 256, 0.5).unwrap();
        let cf = CurveFrame::new(256, 0.5).unwrap();
        let polys = rs.outlines(8).unwrap();
        assert_eq!(polys.len(), 1);
        for &p in &polys[0] {
            let (t, x) = cf.beta_inverse(p).unwrap();
            let on_t = (t - rs.t_range.0).abs() < 1e-6 || (t - rs.t_range.1).abs() < 1e-6;
            let on_x = (x - rs.x_range.0).abs() < 1e-6 || (x - rs.x_range.1).abs() < 1e-6;
            assert!(on_t || on_x, "({t}, {x})");
        }
        let meso = RegionSpec::new(RegionName::Meso, 256, 0.5).unwrap();
        let poly = &meso.outlines(4).unwrap()[0];
        let centroid = poly.iter().fold((0.0, 0.0), |s, p| (s.0 + p.0 / 16.0, s.1 + p.1 / 16.0));
        for &(x, y) in poly {
            assert!(meso.contains((x + 0.01 * (centroid.0 - x), y + 0.01 * (centroid.1 - y))));
        }
        assert_eq!(RegionSpec::new(RegionName::Cross, 4096, 0.5).unwrap().outlines(4).unwrap().len(), 4);
    }

    #[test]
    fn backtrack_constructed() {
        let c = |x, y| Coord::new(x, y);
        let all = |_| true;
        let mono = vec![c(10, 1), c(9, 2), c(8, 1), c(7, 2), c(6, 3)];
        assert!(backtrack_stat_by(&mono, all) <= 0.0);
        let mut p = vec![c(10, 0)];
        let mut cur = c(10, 0);
        for _ in 0..3 {
            cur = cur + c(-1, 1);
            p.push(cur);
        }
        for _ in 0..7 {
            cur = cur + c(1, 1);
            p.push(cur);
        }
        for _ in 0..20 {
            cur = cur + c(-1, 1);
            p.push(cur);
        }
        assert_eq!(backtrack_stat_by(&p, all), 7.0);
        assert_eq!(backtrack_stat_by(&p, |_| false), f64::NEG_INFINITY);
    }

    fn zigzag(from: Coord, dx: i32, steps: usize) -> Vec<Coord> {
        let mut v = vec![from];
        for k in 0..steps {
            let last = *v.last().unwrap();
            v.push(last + Coord::new(dx, if k % 2 == 0 { 1 } else { -1 }));
        }
        v
    }

    #[test]
    fn onions() {
        // Parallel horizontal paths: single crossings only.
        let paths: Vec<Vec<Coord>> = (0..3).map(|k| zigzag(Coord::new(-20, 4 * k), 1, 40)).collect();
        let r = onion_detect(&paths, 10.0, 10.0, (0.0, 4.0)).unwrap();
        assert_eq!(r.onions, 0);
        // S-shape: east along y≈0, up, back west along y≈6.
        let mut s = zigzag(Coord::new(-12, 0), 1, 24);
        let mut cur = *s.last().unwrap();
        for _ in 0..3 {
            cur = cur + Coord::new(1, 1);
            s.push(cur);
        }
        for _ in 0..3 {
            cur = cur + Coord::new(-1, 1);
            s.push(cur);
        }
        s.extend(zigzag(cur, -1, 24).into_iter().skip(1));
        let r = onion_detect(&[s], 10.0, 10.0, (0.0, 3.0)).unwrap();
        assert_eq!(r.onions, 1);
        assert_eq!(r.min_layers, Some(1));
    }

    #[test]
    fn height_match_on_samples() {
        let mut hits = 0;
        for s in 0..10 {
            let d = sample(64, 0.5, RandomSeed::new(s, 3)).unwrap();
            hits += height_match_check(&d).unwrap() as usize;
        }
        assert!(hits >= 8, "{hits}");
    }

    #[test]
    fn airy_paths_ordered() {
        let fr = scaling_frame(0.5).unwrap();
        let times: Vec<f64> = (-4..=4).map(|k| k as f64 * 0.25).collect();
        for s in 0..3 {
            let d = sample(128, 0.5, RandomSeed::new(s, 9)).unwrap();
            let bb = backbone(&south_forest(&d)).unwrap();
            let region = RegionSpec::new(RegionName::Rs, 128, 0.5).unwrap();
            let ap = extract_airy_paths(&bb, 128, &fr, &times, 3, &region).unwrap();
            for i in 0..3 {
                for k in 0..times.len() {
                    let (u, l) = (ap.upper[i][k], ap.lower[i][k]);
                    if u.is_finite() {
                        assert!(u >= l);
                    }
                    if i + 1 < 3 && l.is_finite() && ap.upper[i + 1][k].is_finite() {
                        assert!(l >= ap.upper[i + 1][k], "interlacing at i={i} t={}", times[k]);
                    }
                }
            }
            // Re-running on a sub-grid reproduces the common entries.
            let sub: Vec<f64> = times.iter().step_by(2).copied().collect();
            let ap2 = extract_airy_paths(&bb, 128, &fr, &sub, 3, &region).unwrap();
            for i in 0..3 {
                for k in 0..sub.len() {
                    assert_eq!(ap2.upper[i][k], ap.upper[i][2 * k]);
                }
            }
        }
    }
}
