//! Kasteleyn matrix of the two-periodic Aztec diamond and its inverse.
//!
//! Two routes to `K⁻¹`: a dense LU solve for small `n`, and the explicit double contour
//! integral representation (full-plane kernel minus four boundary terms `B`), evaluated
//! with the periodic trapezoid rule on circles.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::heights::{boundary_height, in_fbar};
use crate::lattice::{classify_vertex, vertex_color, Color, Coord, VertexClass, E1, E2};

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn check_size(n: i32) -> Result<()> {
    if n <= 0 || n % 4 != 0 {
        return Err(Error::Config(format!("size n = {n} must be a positive multiple of 4")));
    }
    Ok(())
}

fn check_weight(a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Config(format!("weight a = {a} must be positive")));
    }
    Ok(())
}

/// `K(b, w)` for a black vertex `b` (class E or W) and white `w`; zero off the edges.
pub fn kasteleyn_entry(a: f64, b: Coord, w: Coord) -> C64 {
    let Ok(class) = classify_vertex(b) else { return C64::new(0.0, 0.0) };
    for j in 0..2 {
        for k in 0..2 {
            let e = if k == 0 { E1 } else { E2 };
            let step = if j == 0 { e } else { -e };
            if b + step != w {
                continue;
            }
            let (jf, kf) = (j as f64, k as f64);
            let first = (1.0 - jf) + a * jf;
            let second = jf + a * (1.0 - jf);
            return match class {
                VertexClass::E => I * (first * (1.0 - kf)) + second * kf,
                VertexClass::W => C64::new(first * kf, 0.0) + I * (second * (1.0 - kf)),
                _ => C64::new(0.0, 0.0),
            };
        }
    }
    C64::new(0.0, 0.0)
}

/// Dense Kasteleyn system with rows indexed by black and columns by white vertices.
#[derive(Clone, Debug)]
pub struct KasteleynSystem {
    pub n: i32,
    pub a: f64,
    pub whites: Vec<Coord>,
    pub blacks: Vec<Coord>,
    white_index: HashMap<Coord, usize>,
    black_index: HashMap<Coord, usize>,
    pub k: DMatrix<C64>,
    inverse: Option<DMatrix<C64>>,
}

/// Largest size for which the dense inverse is computed.
pub const DENSE_MAX_N: i32 = 24;

pub fn build_k(n: i32, a: f64) -> Result<KasteleynSystem> {
    check_size(n)?;
    check_weight(a)?;
    let mut whites = Vec::new();
    let mut blacks = Vec::new();
    for x in -n..=n {
        for y in -n..=n {
            let v = Coord::new(x, y);
            if v.is_vertex() {
                match vertex_color(v) {
                    Color::White => whites.push(v),
                    Color::Black => blacks.push(v),
                }
            }
        }
    }
    let white_index: HashMap<Coord, usize> = whites.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let black_index: HashMap<Coord, usize> = blacks.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut k = DMatrix::from_element(blacks.len(), whites.len(), C64::new(0.0, 0.0));
    for (bi, &b) in blacks.iter().enumerate() {
        for e in [E1, E2, -E1, -E2] {
            if let Some(&wi) = white_index.get(&(b + e)) {
                k[(bi, wi)] = kasteleyn_entry(a, b, b + e);
            }
        }
    }
    Ok(KasteleynSystem { n, a, whites, blacks, white_index, black_index, k, inverse: None })
}

impl KasteleynSystem {
    pub fn determinant(&self) -> C64 {
        self.k.clone().lu().determinant()
    }

    /// `|det K|`, the weighted number of tilings.
    pub fn partition_function(&self) -> f64 {
        self.determinant().norm()
    }

    pub fn entry(&self, b: Coord, w: Coord) -> C64 {
        kasteleyn_entry(self.a, b, w)
    }

    pub fn white_pos(&self, w: Coord) -> Option<usize> {
        self.white_index.get(&w).copied()
    }

    pub fn black_pos(&self, b: Coord) -> Option<usize> {
        self.black_index.get(&b).copied()
    }

    /// Computes and stores the dense inverse (rows white, columns black).
    pub fn invert(&mut self) -> Result<&DMatrix<C64>> {
        if self.n > DENSE_MAX_N {
            return Err(Error::Resource(format!(
                "dense inverse is limited to n <= {DENSE_MAX_N}; use the explicit formula"
            )));
        }
        if self.inverse.is_none() {
            let inv = self
                .k
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Numeric("Kasteleyn matrix is singular".into()))?;
            self.inverse = Some(inv);
        }
        Ok(self.inverse.as_ref().unwrap())
    }

    pub fn inverse(&self) -> Option<&DMatrix<C64>> {
        self.inverse.as_ref()
    }

    /// `K⁻¹(w, b)` from the dense inverse.
    pub fn inverse_entry(&self, w: Coord, b: Coord) -> Result<C64> {
        let inv = self.inverse.as_ref().ok_or_else(|| Error::Config("call invert() first".into()))?;
        let wi = self.white_pos(w).ok_or_else(|| Error::Domain(format!("{w} is not a white vertex")))?;
        let bi = self.black_pos(b).ok_or_else(|| Error::Domain(format!("{b} is not a black vertex")))?;
        Ok(inv[(wi, bi)])
    }

    /// `‖K K⁻¹ − I‖_∞`.
    pub fn residual(&self) -> Option<f64> {
        let inv = self.inverse.as_ref()?;
        let prod = &self.k * inv;
        let mut worst: f64 = 0.0;
        for i in 0..prod.nrows() {
            for j in 0..prod.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - target).norm());
            }
        }
        Some(worst)
    }

    /// Joint probability of a set of edges `(white, black)` from the dense inverse.
    pub fn edge_probability(&self, edges: &[(Coord, Coord)]) -> Result<f64> {
        edge_probability_with(self.a, edges, |w, b| self.inverse_entry(w, b))
    }
}

/// Joint dimer probability `det[K(b_i, w_i) K⁻¹(w_j, b_i)]` with a supplied inverse.
pub fn edge_probability_with(
    a: f64,
    edges: &[(Coord, Coord)],
    mut kinv: impl FnMut(Coord, Coord) -> Result<C64>,
) -> Result<f64> {
    for (i, e) in edges.iter().enumerate() {
        if kasteleyn_entry(a, e.1, e.0) == C64::new(0.0, 0.0) {
            return domain(format!("{} - {} is not an edge", e.0, e.1));
        }
        for f in &edges[i + 1..] {
            if e == f {
                return domain("edges must be distinct");
            }
            if e.0 == f.0 || e.1 == f.1 {
                return Ok(0.0);
            }
        }
    }
    let r = edges.len();
    let mut l = DMatrix::from_element(r, r, C64::new(0.0, 0.0));
    for i in 0..r {
        let (wi, bi) = edges[i];
        let kb = kasteleyn_entry(a, bi, wi);
        for j in 0..r {
            l[(i, j)] = kb * kinv(edges[j].0, bi)?;
        }
    }
    Ok(l.lu().determinant().re)
}

pub fn partition_function(n: i32, a: f64) -> Result<f64> {
    Ok(build_k(n, a)?.partition_function())
}

/// Expected height at a face from edge probabilities, telescoping from the boundary
/// along south-west diagonal steps. `prob(white, black)` gives single-edge probabilities.
pub fn expected_height_with(n: i32, f: Coord, mut prob: impl FnMut(Coord, Coord) -> Result<f64>) -> Result<f64> {
    if !in_fbar(n, f) {
        return domain(format!("{f} is not a face of the diamond"));
    }
    let mut total = 0.0;
    let mut cur = f;
    let step = Coord::new(-1, -1);
    let inside = |v: Coord| v.x.abs() <= n && v.y.abs() <= n;
    while boundary_height(n, cur).is_none() {
        let next = cur + step;
        // Height increment from next to cur: ccw around the white endpoint is +1 without a
        // dimer and -3 with one.
        let p = next + Coord::new(0, 1);
        let q = next + Coord::new(1, 0);
        let (w, b) = if vertex_color(p) == Color::White { (p, q) } else { (q, p) };
        let (u, t) = (next - w, cur - w);
        let ccw = u.x * t.y - u.y * t.x > 0;
        let sign = if ccw { 1.0 } else { -1.0 };
        let pr = if inside(w) && inside(b) { prob(w, b)? } else { 0.0 };
        total += sign * (1.0 - 4.0 * pr);
        cur = next;
    }
    Ok(boundary_height(n, cur).unwrap() as f64 + total)
}

impl KasteleynSystem {
    pub fn expected_height(&mut self, f: Coord) -> Result<f64> {
        self.invert()?;
        let n = self.n;
        expected_height_with(n, f, |w, b| self.edge_probability(&[(w, b)]))
    }
}

/// `c = a / (1 + a²)`.
pub fn c_of(a: f64) -> f64 {
    a / (1.0 + a * a)
}

/// `√(ω² + 2c)` with both logarithms taking arguments in `(−π/2, 3π/2)`.
pub fn sqrt_branch(a: f64, omega: C64) -> Result<C64> {
    let r = (2.0 * c_of(a)).sqrt();
    if omega.re == 0.0 && omega.im.abs() <= r {
        return domain(format!("{omega} lies on the branch cut"));
    }
    let log = |z: C64| {
        let mut arg = z.arg();
        if arg <= -PI / 2.0 {
            arg += 2.0 * PI;
        }
        C64::new(z.norm().ln(), arg)
    };
    Ok((0.5 * log(omega + I * r) + 0.5 * log(omega - I * r)).exp())
}

/// `G(ω) = (ω − √(ω² + 2c)) / √(2c)`.
pub fn g_func(a: f64, omega: C64) -> Result<C64> {
    let r = (2.0 * c_of(a)).sqrt();
    Ok((omega - sqrt_branch(a, omega)?) / r)
}

/// `θ(t) = t / √(t² − 2c)` for `t ∈ (√(2c), 1/√(2c))`.
pub fn theta(a: f64, t: f64) -> Result<f64> {
    let c2 = 2.0 * c_of(a);
    if !(t > c2.sqrt() && t < 1.0 / c2.sqrt()) {
        return domain(format!("t = {t} outside (sqrt(2c), 1/sqrt(2c))"));
    }
    Ok(t / (t * t - c2).sqrt())
}

/// `c̃(u₁, u₂)`.
pub fn c_tilde(a: f64, u1: C64, u2: C64) -> C64 {
    2.0 * (1.0 + a * a) + a * (u1 + u1.inv()) * (u2 + u2.inv())
}

/// `h(ε₁, ε₂)`.
pub fn h_parity(e1: u8, e2: u8) -> u8 {
    (e1 ^ e2) & 1
}

/// `ν(u) = (u + u⁻¹)/2`.
pub fn nu(u: C64) -> C64 {
    (u + u.inv()) / 2.0
}

/// `s(−iu)`, the branch of `√(1 − c²(u + u⁻¹)²)` analytic on `α < |u| < 1/α` with
/// `α = min(a, 1/a)` and positive at `u = 1`.
pub fn s_of(a: f64, u: C64) -> C64 {
    let al = a.min(1.0 / a);
    let al2 = al * al;
    (1.0 - al2 / (u * u)).sqrt() * (1.0 - al2 * u * u).sqrt() / (1.0 + al2)
}

/// `μ(−iu) = 1 − s(−iu)`.
pub fn mu_of(a: f64, u: C64) -> C64 {
    1.0 - s_of(a, u)
}

/// `F_s(w)` by residues: the single pole inside the unit circle.
pub fn f_s(a: f64, s: i32, w: C64) -> Result<C64> {
    let s = s.unsigned_abs() as i32;
    if w.norm() < 1e-300 {
        return Ok(if s == 0 { C64::new(1.0 / (1.0 + a * a), 0.0) } else { C64::new(0.0, 0.0) });
    }
    let b = (1.0 + a * a) / (a * w);
    let d = (b * b - 4.0).sqrt();
    let (r1, r2) = ((-b + d) / 2.0, (-b - d) / 2.0);
    let inner = if r1.norm() < r2.norm() { r1 } else { r2 };
    let outer = inner.inv();
    if (inner.norm() - 1.0).abs() < 1e-12 {
        return Err(Error::Numeric(format!("F_s: pole on the unit circle at w = {w}")));
    }
    Ok(inner.powi(s) / (a * w * (inner - outer)))
}

/// `F_s(w)` by the trapezoid rule on `M` nodes of the unit circle.
pub fn f_s_quadrature(a: f64, s: i32, w: C64, m: usize) -> Result<C64> {
    let mut total = C64::new(0.0, 0.0);
    for k in 0..m {
        let u = C64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64);
        let den = 1.0 + a * a + a * w * (u + u.inv());
        if den.norm() < 1e-13 {
            return Err(Error::Numeric(format!("F_s integrand has a pole on the contour at w = {w}; use another radius")));
        }
        total += u.powi(s) / den;
    }
    Ok(total / m as f64)
}

/// Closed form `F_s(iω/√(2c)) = i^{|s|} G(1/ω)^{|s|} / ((1+a²) ω √(ω⁻² + 2c))`.
pub fn f_s_closed(a: f64, s: i32, w: C64) -> Result<C64> {
    let r = (2.0 * c_of(a)).sqrt();
    let omega = -I * r * w;
    let inv = omega.inv();
    let s = s.unsigned_abs() as i32;
    Ok(I.powi(s) * g_func(a, inv)?.powi(s) / ((1.0 + a * a) * omega * sqrt_branch(a, inv)?))
}

/// The rational blocks `y^{0,0}_{i,j}(a, b, u, v)` as `[y00, y01, y10, y11]`.
pub fn y00_blocks(a: f64, b: f64, u: C64, v: C64) -> [C64; 4] {
    let (u2, v2) = (u * u, v * v);
    let one = C64::new(1.0, 0.0);
    let core = 2.0 * a * a * u * v + 2.0 * b * b * u * v;
    let cross = a * b * (u2 - one) * (v2 - one);
    let f = (core - cross) * (core + cross);
    let s2 = a * a + b * b;
    let r00 = (2.0 * a.powi(7) * u2 * v2
        - a.powi(5) * b * b * (one + u2 * u2 + u2 * v2 - u2 * u2 * v2 + v2 * v2 - u2 * v2 * v2)
        - a.powi(3) * b.powi(4) * (one + 3.0 * u2 + 3.0 * v2 + 2.0 * u2 * v2 + u2 * u2 * v2 + u2 * v2 * v2 - u2 * u2 * v2 * v2)
        - a * b.powi(6) * (one + v2 + u2 + 3.0 * u2 * v2))
        / (4.0 * s2 * s2 * f);
    let r01 = a * (b * b + a * a * u2) * (2.0 * a * a * v2 + b * b * (one + v2 - u2 + u2 * v2)) / (4.0 * s2 * f);
    let r10 = a * (b * b + a * a * v2) * (2.0 * a * a * u2 + b * b * (one - v2 + u2 + u2 * v2)) / (4.0 * s2 * f);
    let r11 = a * (2.0 * a * a * u2 * v2 + b * b * (-one + v2 + u2 + u2 * v2)) / (4.0 * f);
    [r00, r01, r10, r11]
}

/// `y^{ε₁,ε₂}_{γ₁,γ₂}(u, v)` with `b = 1`, via the index flips of the `(0,0)` family.
pub fn y_block(a: f64, e1: u8, e2: u8, g1: u8, g2: u8, u: C64, v: C64) -> C64 {
    let idx = (2 * g1 + g2) as usize;
    match (e1, e2) {
        (0, 0) => y00_blocks(a, 1.0, u, v)[idx],
        (0, 1) => y00_blocks(1.0, a, u, v.inv())[idx] / (v * v),
        (1, 0) => y00_blocks(1.0, a, u.inv(), v)[idx] / (u * u),
        _ => y00_blocks(a, 1.0, u.inv(), v.inv())[idx] / (u * u * v * v),
    }
}

/// `Y^{ε₁,ε₂}_{γ₁,γ₂}(u₁, u₂)`.
pub fn y_func(a: f64, e1: u8, e2: u8, g1: u8, g2: u8, u1: C64, u2: C64) -> C64 {
    let sign_exp = e1 * e2 + g1 * (1 + e2) + g2 * (1 + e1);
    let sign = if sign_exp % 2 == 0 { 1.0 } else { -1.0 };
    let s1 = if g1 == 1 { s_of(a, u1) } else { C64::new(1.0, 0.0) };
    let s2 = if g2 == 1 { s_of(a, u2) } else { C64::new(1.0, 0.0) };
    let y = y_block(a, e1, e2, g1, g2, -I * u1, -I * u2);
    (1.0 + a * a).powi(2) * sign * s1 * s2 * y * u1.powi(e1 as i32) * u2.powi(e2 as i32)
}

/// The four coefficient blocks (of `s⁰s⁰`, `s¹s¹`, `s¹s⁰`, `s⁰s¹`) in the `a ↦ 1/a`
/// invariance of the expected-height sums, with consistent signs.
pub fn coefficient_blocks(a: f64, u1: C64, u2: C64) -> [C64; 4] {
    let c = c_of(a);
    let y = |e: u8, g1: u8, g2: u8| y_block(a, e, e, g1, g2, -I * u1, -I * u2);
    let p = c * c * (u1 + u1.inv()) * (u2 + u2.inv());
    let q1 = 1.0 - c * c * (u1 + u1.inv()).powi(2);
    let q2 = 1.0 - c * c * (u2 + u2.inv()).powi(2);
    let uu = u1 * u2;
    let c00 = p * y(0, 0, 0) - uu * (y(1, 0, 0) - q1 * y(1, 1, 0) - q2 * y(1, 0, 1) + q1 * q2 * y(1, 1, 1));
    let c11 = p * y(0, 1, 1) - uu * (y(1, 1, 1) - y(1, 0, 1) - y(1, 1, 0) + y(1, 0, 0));
    let c10 = -p * y(0, 1, 0) - uu * (y(1, 1, 0) - y(1, 0, 0) - q2 * y(1, 1, 1) + q2 * y(1, 0, 1));
    let c01 = -p * y(0, 0, 1) - uu * (y(1, 0, 1) - y(1, 0, 0) - q1 * y(1, 1, 1) + q1 * y(1, 1, 0));
    [a * c00, a * c11, a * c10, a * c01]
}

/// Trapezoid parameters for the contour integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Nodes per circle; a power of two.
    pub nodes: usize,
    /// Radius of the `B` contours; `None` picks one inside `(a, 1/a)`.
    pub radius: Option<f64>,
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { nodes: 128, radius: None, tolerance: 1e-9 }
    }
}

impl QuadratureSpec {
    fn check(&self) -> Result<()> {
        if !self.nodes.is_power_of_two() || self.nodes < 8 {
            return Err(Error::Config(format!("node count {} must be a power of two >= 8", self.nodes)));
        }
        Ok(())
    }

    /// Contour radius for weight `a`.
    pub fn radius_for(&self, a: f64) -> Result<f64> {
        let al = a.min(1.0 / a);
        let r = self.radius.unwrap_or(if al < 0.85 { 0.9 } else { (1.0 + al) / 2.0 });
        if !(r > al && r < 1.0 / al) {
            return domain(format!("radius {r} must lie in ({al}, {})", 1.0 / al));
        }
        Ok(r)
    }
}

fn circle(r: f64, m: usize) -> Vec<C64> {
    (0..m).map(|k| C64::from_polar(r, 2.0 * PI * k as f64 / m as f64)).collect()
}

pub fn eps_white(x: Coord) -> Result<u8> {
    match classify_vertex(x)? {
        VertexClass::S => Ok(0),
        VertexClass::N => Ok(1),
        _ => domain(format!("{x} is not a white vertex")),
    }
}

pub fn eps_black(y: Coord) -> Result<u8> {
    match classify_vertex(y)? {
        VertexClass::W => Ok(0),
        VertexClass::E => Ok(1),
        _ => domain(format!("{y} is not a black vertex")),
    }
}

/// Full-plane smooth-phase kernel `𝕂⁻¹_{1,1}(x, y)` on `M × M` nodes of the unit torus.
pub fn fullplane_kernel_m(a: f64, x: Coord, y: Coord, m: usize) -> Result<C64> {
    let ex = eps_white(x)?;
    let ey = eps_black(y)?;
    let h = h_parity(ex, ey) as i32;
    let p1 = (x.x - y.x + 1).div_euclid(2);
    let p2 = (x.y - y.y + 1).div_euclid(2);
    let t = circle(1.0, m);
    let mut total = C64::new(0.0, 0.0);
    for &u1 in &t {
        for &u2 in &t {
            let num = a.powi(ey as i32) * u2.powi(1 - h) + a.powi(1 - ey as i32) * u1 * u2.powi(h);
            total += num / (c_tilde(a, u1, u2) * u1.powi(p1) * u2.powi(p2));
        }
    }
    Ok(-I.powi(1 + h) * total / (m * m) as f64)
}

pub fn fullplane_kernel(a: f64, x: Coord, y: Coord) -> Result<C64> {
    fullplane_kernel_m(a, x, y, 256)
}

/// `B_{ε₁,ε₂}(a, x₁, x₂, y₁, y₂)` for a diamond of size `n = 4m`.
#[allow(clippy::too_many_arguments)]
pub fn b_integral(n: i32, e1: u8, e2: u8, a: f64, x: (i32, i32), y: (i32, i32), quad: &QuadratureSpec) -> Result<C64> {
    quad.check()?;
    let r = quad.radius_for(a)?;
    b_integral_raw(n, e1, e2, a, x, y, r, quad.nodes)
}

#[allow(clippy::too_many_arguments)]
fn b_integral_raw(n: i32, e1: u8, e2: u8, a: f64, x: (i32, i32), y: (i32, i32), r: f64, m_nodes: usize) -> Result<C64> {
    let m = n / 4;
    let c = c_of(a);
    let t = circle(r, m_nodes);
    let px = (x.0 - 1).div_euclid(2);
    let py = (y.1 - 1).div_euclid(2);
    // Per-node factors in each variable.
    let mut f1 = Vec::with_capacity(m_nodes);
    let mut f2 = Vec::with_capacity(m_nodes);
    for &u in &t {
        let w = (1.0 + s_of(a, u)).powi(2) * u * u;
        f1.push((f_s(a, x.1 / 2, nu(u))? / u.powi(px), w));
        f2.push((f_s(a, y.0 / 2, nu(u))? / u.powi(py), w));
    }
    let mut total = C64::new(0.0, 0.0);
    for (i, &u1) in t.iter().enumerate() {
        for (j, &u2) in t.iter().enumerate() {
            let pw = (f1[i].1 * f2[j].1 / (4.0 * c * c)).powi(m);
            let mut sy = C64::new(0.0, 0.0);
            for g1 in 0..2 {
                for g2 in 0..2 {
                    sy += y_func(a, e1, e2, g1, g2, u1, u2);
                }
            }
            total += f1[i].0 * f2[j].0 * pw * sy;
        }
    }
    Ok(-I.powi((e1 + e2 + 1) as i32) * total / (m_nodes * m_nodes) as f64)
}

/// `B` evaluated at `M` and `2M` nodes; errors if the two differ by more than the tolerance.
#[allow(clippy::too_many_arguments)]
pub fn b_integral_checked(n: i32, e1: u8, e2: u8, a: f64, x: (i32, i32), y: (i32, i32), quad: &QuadratureSpec) -> Result<C64> {
    let coarse = b_integral(n, e1, e2, a, x, y, quad)?;
    let fine = b_integral(n, e1, e2, a, x, y, &QuadratureSpec { nodes: 2 * quad.nodes, ..*quad })?;
    if (coarse - fine).norm() > quad.tolerance {
        return Err(Error::Numeric(format!(
            "B quadrature did not converge: |B_M - B_2M| = {:e}",
            (coarse - fine).norm()
        )));
    }
    Ok(fine)
}

/// `K⁻¹(x, y)` from the explicit integral formula, normalised to invert [`build_k`].
///
/// The contour representation is a factor `i(−1)^{h(ε₁,ε₂)}` away from the inverse of
/// the matrix with the stated entries; the factor is applied here.
pub fn k_inverse_formula(n: i32, a: f64, x: Coord, y: Coord, quad: &QuadratureSpec) -> Result<C64> {
    check_size(n)?;
    check_weight(a)?;
    if vertex_color(x) != Color::White || vertex_color(y) != Color::Black {
        return domain("expected a white and a black vertex");
    }
    if x.x.abs() > n || x.y.abs() > n || y.x.abs() > n || y.y.abs() > n {
        return domain("vertices must lie in the diamond");
    }
    let e1 = eps_white(x)?;
    let e2 = eps_black(y)?;
    let (x1, x2, y1, y2) = (x.x, x.y, y.x, y.y);
    let b = |f1: u8, f2: u8, aa: f64, xx: (i32, i32), yy: (i32, i32)| b_integral(n, f1, f2, aa, xx, yy, quad);
    let sign = if (e1 + e2) % 2 == 0 { 1.0 } else { -1.0 };
    let boundary = b(e1, e2, a, (n + x1, n + x2), (n + y1, n + y2))?
        - I / a
            * sign
            * (b(1 - e1, e2, 1.0 / a, (n - x1, n + x2), (n - y1, n + y2))?
                + b(e1, 1 - e2, 1.0 / a, (n + x1, n - x2), (n + y1, n - y2))?)
        + b(1 - e1, 1 - e2, a, (n - x1, n - x2), (n - y1, n - y2))?;
    let full = fullplane_kernel_m(a, x, y, quad.nodes.max(128))?;
    let gauge = if h_parity(e1, e2) == 0 { I } else { -I };
    Ok(gauge * (full - boundary))
}

/// Full-plane single-edge probability `K(b, w) 𝕂⁻¹(w, b)` with the same normalisation.
pub fn fullplane_edge_probability(a: f64, w: Coord, b: Coord) -> Result<f64> {
    let e1 = eps_white(w)?;
    let e2 = eps_black(b)?;
    let gauge = if h_parity(e1, e2) == 0 { I } else { -I };
    Ok((kasteleyn_entry(a, b, w) * gauge * fullplane_kernel(a, w, b)?).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::enumerate_tilings;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn entries_and_degrees() {
        let sys = build_k(4, 0.5).unwrap();
        for (wi, _) in sys.whites.iter().enumerate() {
            let deg = (0..sys.blacks.len()).filter(|&bi| sys.k[(bi, wi)].norm() > 0.0).count();
            assert!((2..=4).contains(&deg));
        }
        // x in E, y = x + e1: j = 0, k = 0 gives i.
        let x = Coord::new(0, 3);
        assert_eq!(classify_vertex(x).unwrap(), VertexClass::E);
        assert_eq!(kasteleyn_entry(0.5, x, x + E1), I);
        assert_eq!(kasteleyn_entry(0.5, x, x - E1), I * 0.5);
        assert_eq!(kasteleyn_entry(0.5, x, x + E2), C64::new(0.5, 0.0));
        assert_eq!(kasteleyn_entry(0.5, x, x + Coord::new(3, 0)), C64::new(0.0, 0.0));
        assert!(build_k(6, 0.5).is_err());
    }

    #[test]
    fn partition_function_matches_enumeration() {
        for a in [0.3, 0.5, 1.0] {
            let z: f64 = enumerate_tilings(4, a).unwrap().iter().map(|(_, w)| w).sum();
            let k = partition_function(4, a).unwrap();
            assert!((k - z).abs() / z < 1e-10, "a = {a}: {k} vs {z}");
        }
        assert!((partition_function(4, 1.0).unwrap() - 1024.0).abs() < 1e-8);
        let mut last = 0.0;
        for k in 1..=10 {
            let z = partition_function(4, k as f64 / 10.0).unwrap();
            assert!(z > last);
            last = z;
        }
    }

    #[test]
    fn dense_inverse_and_edge_probabilities() {
        let mut sys = build_k(8, 0.5).unwrap();
        sys.invert().unwrap();
        assert!(sys.residual().unwrap() < 1e-10);
        for &w in &sys.whites.clone() {
            let mut total = 0.0;
            for e in [E1, E2, -E1, -E2] {
                let b = w + e;
                if sys.black_pos(b).is_some() {
                    let p = sys.edge_probability(&[(w, b)]).unwrap();
                    assert!((-1e-12..=1.0 + 1e-12).contains(&p));
                    let raw = sys.entry(b, w) * sys.inverse_entry(w, b).unwrap();
                    assert!(raw.im.abs() < 1e-12);
                    total += p;
                }
            }
            assert!((total - 1.0).abs() < 1e-10);
        }
        let w = Coord::new(1, 0);
        assert_eq!(sys.edge_probability(&[(w, w + E1), (w, w + E2)]).unwrap(), 0.0);
    }

    #[test]
    fn edge_probabilities_match_enumeration() {
        let a = 0.4;
        let tilings = enumerate_tilings(4, a).unwrap();
        let z: f64 = tilings.iter().map(|(_, w)| w).sum();
        let mut sys = build_k(4, a).unwrap();
        sys.invert().unwrap();
        for &w in &sys.whites.clone() {
            for e in [E1, E2, -E1, -E2] {
                let b = w + e;
                if sys.black_pos(b).is_none() {
                    continue;
                }
                let freq: f64 = tilings.iter().filter(|(d, _)| d.has_edge(w, b)).map(|(_, wt)| wt).sum::<f64>() / z;
                assert!((sys.edge_probability(&[(w, b)]).unwrap() - freq).abs() < 1e-10);
            }
        }
        // A pair of edges.
        let (e, f) = ((Coord::new(1, 0), Coord::new(2, 1)), (Coord::new(-1, 0), Coord::new(-2, -1)));
        let joint: f64 =
            tilings.iter().filter(|(d, _)| d.has_edge(e.0, e.1) && d.has_edge(f.0, f.1)).map(|(_, wt)| wt).sum::<f64>() / z;
        assert!((sys.edge_probability(&[e, f]).unwrap() - joint).abs() < 1e-10);
    }

    #[test]
    fn expected_heights() {
        for n in [4, 8] {
            let mut sys = build_k(n, 0.5).unwrap();
            assert!(sys.expected_height(Coord::new(0, 0)).unwrap().abs() < 1e-8);
            // Antisymmetry at c-faces.
            for f in [Coord::new(2, 2), Coord::new(2, -2), Coord::new(4, 0), Coord::new(0, 4)] {
                let l = sys.expected_height(f).unwrap();
                let r = sys.expected_height(Coord::new(-f.x, f.y)).unwrap();
                assert!((l + r).abs() < 1e-8, "{f}: {l} vs {r}");
                let b = sys.expected_height(Coord::new(f.x, -f.y)).unwrap();
                assert!((l + b).abs() < 1e-8);
            }
            // Even faces with x + y = 2 mod 4 are mirror symmetric instead, and nonzero.
            let l = sys.expected_height(Coord::new(2, 0)).unwrap();
            assert!((l - sys.expected_height(Coord::new(-2, 0)).unwrap()).abs() < 1e-8);
            assert!(l < -1.0);
            assert_eq!(sys.expected_height(Coord::new(n, 0)).unwrap(), 0.0);
            assert_eq!(sys.expected_height(Coord::new(2, -n)).unwrap(), 2.0);
        }
    }

    #[test]
    fn branch_and_g() {
        let a = 0.5;
        let c2 = 2.0 * c_of(a);
        for t in [c2.sqrt() + 0.05, 1.0, 1.0 / c2.sqrt() - 0.05] {
            let v = sqrt_branch(a, I * t).unwrap();
            assert!(close(v, I * (t * t - c2).sqrt(), 1e-12));
        }
        for re in [-1.3, -0.4, 0.2, 0.9] {
            for im in [-1.1, -0.3, 0.5, 2.0] {
                let w = C64::new(re, im);
                assert!(close(g_func(a, -w).unwrap(), -g_func(a, w).unwrap(), 1e-12));
            }
        }
        assert!(g_func(a, I).unwrap().norm() < 1.0);
        assert!(sqrt_branch(a, I * 0.1).is_err());
    }

    #[test]
    fn f_s_routes_agree() {
        let a = 0.5;
        assert!(close(f_s_quadrature(a, 0, C64::new(0.0, 0.0), 16).unwrap(), C64::new(0.8, 0.0), 1e-14));
        for w in [C64::new(0.3, 0.1), C64::new(-0.7, 0.2), C64::new(0.1, -0.5), C64::new(0.95, 0.0)] {
            for s in [0, 1, -1, 3, -3] {
                let q = f_s_quadrature(a, s, w, 512).unwrap();
                assert!(close(f_s(a, s, w).unwrap(), q, 1e-10));
                assert!(close(f_s_closed(a, s, w).unwrap(), q, 1e-10), "w {w} s {s}");
                assert!(close(f_s_quadrature(a, -s, w, 512).unwrap(), q, 1e-12));
            }
        }
    }

    #[test]
    fn y_flip_identity() {
        let a = 0.6;
        for (u, v) in [(C64::new(0.7, 0.2), C64::new(-0.3, 1.1)), (C64::new(1.4, -0.5), C64::new(0.2, 0.6))] {
            for g in 0..4usize {
                let (g1, g2) = ((g / 2) as u8, (g % 2) as u8);
                let lhs = y_block(a, 1, 1, g1, g2, u, v);
                let rhs = y00_blocks(a, 1.0, u.inv(), v.inv())[g] / (u * u * v * v);
                assert!(close(lhs, rhs, 1e-12));
            }
        }
    }

    #[test]
    fn coefficient_blocks_are_invariant() {
        for (u1, u2) in [(C64::new(0.7, 0.3), C64::new(1.1, -0.2)), (C64::new(0.1, 0.9), C64::new(-0.8, 0.5))] {
            let p = coefficient_blocks(0.5, u1, u2);
            let q = coefficient_blocks(2.0, u1, u2);
            for k in 0..4 {
                assert!(close(p[k], q[k], 1e-10 * (1.0 + p[k].norm())), "block {k}: {} vs {}", p[k], q[k]);
            }
        }
    }

    #[test]
    fn fullplane_partition_of_unity_and_translation() {
        let a = 0.5;
        for w in [Coord::new(1, 0), Coord::new(1, 2), Coord::new(-1, 0)] {
            let total: f64 = [E1, E2, -E1, -E2].iter().map(|&e| fullplane_edge_probability(a, w, w + e).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-8);
        }
        let (x, y) = (Coord::new(1, 0), Coord::new(4, 1));
        let shift = Coord::new(4, 0);
        let k0 = fullplane_kernel_m(a, x, y, 64).unwrap();
        let k1 = fullplane_kernel_m(a, x + shift, y + shift, 64).unwrap();
        assert!(close(k0, k1, 1e-12));
    }

    #[test]
    fn formula_matches_dense_inverse() {
        let n = 8;
        let a = 0.5;
        let mut sys = build_k(n, a).unwrap();
        sys.invert().unwrap();
        let quad = QuadratureSpec::default();
        let mut seen = std::collections::HashSet::new();
        let pairs = [
            (Coord::new(1, 0), Coord::new(0, 1)),
            (Coord::new(-3, 2), Coord::new(-2, 3)),
            (Coord::new(5, -2), Coord::new(4, -1)),
            (Coord::new(1, 2), Coord::new(6, -1)),
            (Coord::new(-5, 0), Coord::new(-4, 1)),
            (Coord::new(3, 0), Coord::new(2, -1)),
            (Coord::new(-1, -4), Coord::new(0, -3)),
            (Coord::new(-7, 0), Coord::new(-6, 1)),
            (Coord::new(1, 6), Coord::new(2, 7)),
            (Coord::new(3, 4), Coord::new(-2, 3)),
            (Coord::new(-1, 2), Coord::new(0, 3)),
            (Coord::new(3, -4), Coord::new(4, -3)),
        ];
        for (x, y) in pairs {
            seen.insert((eps_white(x).unwrap(), eps_black(y).unwrap()));
            let f = k_inverse_formula(n, a, x, y, &quad).unwrap();
            let d = sys.inverse_entry(x, y).unwrap();
            assert!(close(f, d, 1e-6), "{x} {y}: {f} vs {d}");
        }
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn b_radius_independence_and_convergence() {
        let n = 8;
        let a = 0.5;
        let q1 = QuadratureSpec { radius: Some(0.8), ..Default::default() };
        let q2 = QuadratureSpec { radius: Some(1.1), ..Default::default() };
        let (x, y) = ((n + 1, n + 2), (n + 2, n + 1));
        for (e1, e2) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let b1 = b_integral_checked(n, e1, e2, a, x, y, &q1).unwrap();
            let b2 = b_integral(n, e1, e2, a, x, y, &q2).unwrap();
            assert!(close(b1, b2, 1e-8));
        }
        assert!(b_integral(n, 0, 0, a, x, y, &QuadratureSpec { radius: Some(0.3), ..Default::default() }).is_err());
    }
}
