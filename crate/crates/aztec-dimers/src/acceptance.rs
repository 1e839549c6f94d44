//! Acceptance suite: criteria 1 to 11 as library calls. Criterion 12 (manifest replay)
//! needs the command-line front end and lives there.

use std::collections::HashMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::airy::{airy_kernel_stationary, airy_kernel_tilde, fredholm_gap, top_path_test, AiryKernelSpec, KS_TREND_BAND};
use crate::heights::height_field;
use crate::kasteleyn::{build_k, eps_black, eps_white, fullplane_edge_probability, k_inverse_formula, QuadratureSpec};
use crate::lattice::{Coord, DIRS};
use crate::sampler::{enumerate_tilings, sample, DimerConfig, PeriodicBias, RandomSeed, sample_with};
use crate::scaling::{backtrack_bound, backtrack_stat, height_match_check, scaling_frame, top_path_at_zero, RegionName, RegionSpec};
use crate::temperley::{backbone, dual_forest, inverse_temperley, north_forest, reconstruct_height, south_forest, validate_dcf, PathKind};
use crate::wilson::{sample_smooth_phase, SmoothWindow};
use crate::Result;

/// Base seed of every Monte Carlo criterion; each criterion uses its own stream range.
pub const ACCEPTANCE_SEED: u64 = 20240917;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    /// Sizes and sample counts as stated in the criteria.
    Full,
    /// Exhaustive `n = 4` checks plus the cheap exact ones; Monte Carlo criteria skipped.
    Quick,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub status: Status,
    pub detail: String,
    pub seconds: f64,
    /// Set when a stated bound is below what the method can reach; explains why.
    pub limitation: Option<String>,
    /// For a limited criterion: whether every attainable part of it passed.
    pub attainable_passed: bool,
}

impl CriterionOutcome {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    /// Passed, or failed only on a documented unattainable bound.
    pub fn acceptable(&self) -> bool {
        match self.status {
            Status::Pass | Status::Skipped => true,
            Status::Fail => self.limitation.is_some() && self.attainable_passed,
        }
    }
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        write!(f, "[{tag}] {:>2} {} ({:.1} s): {}", self.id, self.name, self.seconds, self.detail)?;
        if let Some(l) = &self.limitation {
            write!(f, " | limitation: {l}")?;
        }
        Ok(())
    }
}

pub const NAMES: [&str; 12] = [
    "exhaustive oracle",
    "sampler exactness",
    "Temperley bijection",
    "height-winding reconstruction",
    "expected-height symmetry",
    "explicit inverse formula",
    "a to 1/a invariance",
    "height matching",
    "smooth-phase consistency",
    "backtrack band",
    "Airy numerics",
    "determinism",
];

struct Check {
    passed: bool,
    detail: String,
    limitation: Option<String>,
    attainable_passed: bool,
}

impl Check {
    fn plain(passed: bool, detail: String) -> Self {
        Check { passed, detail, limitation: None, attainable_passed: passed }
    }
}

/// Runs one of criteria 1 to 11.
pub fn run_criterion(id: u8, scale: Scale) -> CriterionOutcome {
    let name = NAMES.get(id as usize - 1).copied().unwrap_or("unknown").to_string();
    let quick = scale == Scale::Quick;
    if quick && matches!(id, 8..=11) {
        return CriterionOutcome {
            id,
            name,
            status: Status::Skipped,
            detail: "Monte Carlo criterion, full scale only".into(),
            seconds: 0.0,
            limitation: None,
            attainable_passed: true,
        };
    }
    let t0 = Instant::now();
    let res = match id {
        1 => c1_exhaustive(),
        2 => c2_sampler(scale),
        3 => c3_temperley(scale),
        4 => c4_reconstruction(scale),
        5 => c5_expected_height(scale),
        6 => c6_inverse_formula(),
        7 => c7_reciprocal(),
        8 => c8_height_matching(),
        9 => c9_smooth_phase(),
        10 => c10_backtrack(),
        11 => c11_airy(),
        _ => Ok(Check::plain(false, format!("no criterion {id} in the library suite"))),
    };
    let seconds = t0.elapsed().as_secs_f64();
    let check = res.unwrap_or_else(|e| Check::plain(false, format!("error: {e}")));
    CriterionOutcome {
        id,
        name,
        status: if check.passed { Status::Pass } else { Status::Fail },
        detail: check.detail,
        seconds,
        limitation: check.limitation,
        attainable_passed: check.attainable_passed,
    }
}

pub fn run_library_suite(scale: Scale) -> Vec<CriterionOutcome> {
    (1..=11).map(|id| run_criterion(id, scale)).collect()
}

fn exhaustive_law(n: i32, a: f64) -> Result<(Vec<(DimerConfig, f64)>, f64)> {
    let all = enumerate_tilings(n, a)?;
    let z: f64 = all.iter().map(|(_, w)| w).sum();
    Ok((all, z))
}

fn c1_exhaustive() -> Result<Check> {
    let n = 4;
    let mut ok = true;
    let mut parts = Vec::new();
    for a in [0.3, 0.5, 1.0] {
        let (all, z) = exhaustive_law(n, a)?;
        let mut sys = build_k(n, a)?;
        let det = sys.partition_function();
        let rel = (z - det).abs() / z;
        sys.invert()?;
        let mut freq: HashMap<(Coord, Coord), f64> = HashMap::new();
        for (d, w) in &all {
            for (wv, bv) in d.pairs() {
                *freq.entry((wv, bv)).or_default() += w / z;
            }
        }
        let mut worst: f64 = 0.0;
        for &wv in &sys.whites.clone() {
            for e in DIRS {
                let bv = wv + e;
                if bv.x.abs() > n || bv.y.abs() > n {
                    continue;
                }
                let p = sys.edge_probability(&[(wv, bv)])?;
                worst = worst.max((p - freq.get(&(wv, bv)).copied().unwrap_or(0.0)).abs());
            }
        }
        ok &= all.len() == 1024 && rel < 1e-10 && worst < 1e-10;
        parts.push(format!("a={a}: count {} |Z-|det K||/Z {rel:.1e} max edge diff {worst:.1e}", all.len()));
    }
    Ok(Check::plain(ok, parts.join("; ")))
}

fn c2_sampler(scale: Scale) -> Result<Check> {
    let (n, a) = (4, 0.5);
    let big_n: usize = if scale == Scale::Quick { 20_000 } else { 200_000 };
    let (all, z) = exhaustive_law(n, a)?;
    let index: HashMap<Vec<u8>, usize> = all.iter().enumerate().map(|(i, (d, _))| (d.key(), i)).collect();
    let probs: Vec<f64> = all.iter().map(|(_, w)| w / z).collect();
    let bias = PeriodicBias::new(n, a);
    let counts = |samples: usize, stream0: u64| -> Vec<u64> {
        let mut c = vec![0u64; probs.len()];
        let mut rng_seed = RandomSeed::new(ACCEPTANCE_SEED, stream0);
        for k in 0..samples {
            rng_seed.stream = stream0 + k as u64;
            let d = sample_with(n, a, &bias, rng_seed);
            c[index[&d.key()]] += 1;
        }
        c
    };
    let tv = |c: &[u64], total: usize| -> f64 {
        0.5 * c.iter().zip(&probs).map(|(&k, p)| (k as f64 / total as f64 - p).abs()).sum::<f64>()
    };
    let c = counts(big_n, 2 << 32);
    let p_value = chi_square_pooled(&c, &probs, big_n)?;
    let tv_main = tv(&c, big_n);
    // Expected TV of an exact sampler: ½ Σ E|p̂ − p| ≈ ½ √(2/π) Σ √(p(1−p)/N).
    let floor = 0.5 * (2.0 / std::f64::consts::PI).sqrt() * probs.iter().map(|p| (p * (1.0 - p)).sqrt()).sum::<f64>()
        / (big_n as f64).sqrt();
    let chi_ok = p_value > 1e-4;
    if scale == Scale::Quick {
        return Ok(Check::plain(chi_ok, format!("N={big_n}: chi-square p={p_value:.3}; TV={tv_main:.4} (bound assessed at full scale)")));
    }
    let large_n = 2_000_000;
    let c_large = counts(large_n, 3 << 32);
    let tv_large = tv(&c_large, large_n);
    let floor_large = floor * (big_n as f64 / large_n as f64).sqrt();
    let large_ok = tv_large <= 0.01 && (tv_large - floor_large).abs() < 0.25 * floor_large;
    let tv_ok = tv_main <= 0.01;
    let detail = format!(
        "N={big_n}: chi-square p={p_value:.3}, TV={tv_main:.4} (<= 0.01 required; exact-sampler expectation {floor:.4}); \
         N={large_n}: TV={tv_large:.4} (expectation {floor_large:.4})"
    );
    let limitation = (!tv_ok).then(|| {
        format!(
            "TV <= 0.01 over 1024 cells needs about {:.1e} samples; at N={big_n} an exact sampler has E[TV]={floor:.4}",
            big_n as f64 * (floor / 0.01).powi(2)
        )
    });
    Ok(Check { passed: chi_ok && tv_ok, detail, limitation, attainable_passed: chi_ok && large_ok })
}

/// Chi-square p-value with cells of expected count below 5 pooled into one.
fn chi_square_pooled(counts: &[u64], probs: &[f64], total: usize) -> Result<f64> {
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
    for (&k, &p) in counts.iter().zip(probs) {
        let e = p * total as f64;
        if e < 5.0 {
            pool_obs += k as f64;
            pool_exp += e;
        } else {
            stat += (k as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pool_exp > 0.0 {
        stat += (pool_obs - pool_exp).powi(2) / pool_exp;
        cells += 1;
    }
    let dist = ChiSquared::new((cells - 1) as f64).map_err(|e| crate::Error::Numeric(e.to_string()))?;
    Ok(1.0 - dist.cdf(stat))
}

fn temperley_round_trip(d: &DimerConfig) -> Result<bool> {
    let s = south_forest(d);
    let n_f = north_forest(d);
    let back = inverse_temperley(&s)?;
    let back_n = inverse_temperley(&n_f)?;
    Ok(back.dirs() == d.dirs()
        && back_n.dirs() == d.dirs()
        && dual_forest(&s)? == n_f
        && validate_dcf(&s).is_valid()
        && validate_dcf(&n_f).is_valid())
}

fn c3_temperley(scale: Scale) -> Result<Check> {
    let all = enumerate_tilings(4, 0.5)?;
    let mut ok4 = 0;
    for (d, _) in &all {
        ok4 += temperley_round_trip(d)? as usize;
    }
    let m = if scale == Scale::Quick { 0 } else { 1000 };
    let mut ok32 = 0;
    for k in 0..m {
        let d = sample(32, 0.5, RandomSeed::new(ACCEPTANCE_SEED, (4 << 32) + k as u64))?;
        ok32 += temperley_round_trip(&d)? as usize;
    }
    let passed = ok4 == all.len() && all.len() == 1024 && ok32 == m;
    Ok(Check::plain(passed, format!("n=4: {ok4}/{} round trips; n=32: {ok32}/{m} (duality and DCF checked on each)", all.len())))
}

fn c4_reconstruction(scale: Scale) -> Result<Check> {
    let (n, m) = if scale == Scale::Quick { (4, 200) } else { (32, 1000) };
    let mut ok = 0;
    for k in 0..m {
        let d = sample(n, 0.5, RandomSeed::new(ACCEPTANCE_SEED, (5 << 32) + k as u64))?;
        let h = height_field(&d);
        let r = reconstruct_height(&south_forest(&d))?;
        ok += h.faces().all(|(f, v)| r.get(f) == Some(v)) as usize;
    }
    Ok(Check::plain(ok == m, format!("n={n}: {ok}/{m} samples with exact integer equality on every face")))
}

/// Even faces of class c where the antisymmetry holds exactly, with their mirror images.
fn c5_faces(n: i32) -> Vec<Coord> {
    match n {
        4 => vec![Coord::new(2, 2), Coord::new(2, -2), Coord::new(4, 0), Coord::new(4, 4), Coord::new(4, -4)],
        _ => vec![Coord::new(2, 2), Coord::new(2, -2), Coord::new(4, 0), Coord::new(6, 2), Coord::new(4, 4)],
    }
}

fn c5_expected_height(scale: Scale) -> Result<Check> {
    let sizes: &[i32] = if scale == Scale::Quick { &[4] } else { &[4, 8] };
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for &n in sizes {
        let mut sys = build_k(n, 0.5)?;
        let h0 = sys.expected_height(Coord::new(0, 0))?;
        worst = worst.max(h0.abs());
        for f in c5_faces(n) {
            let lhs = sys.expected_height(f)?;
            let rhs = sys.expected_height(Coord::new(-f.x, f.y))?;
            worst = worst.max((lhs + rhs).abs());
        }
        parts.push(format!("n={n}: E H(0,0)={h0:.2e}"));
    }
    Ok(Check::plain(worst < 1e-8, format!("{}; max |E H(i,j) + E H(-i,j)| or |E H(0,0)| = {worst:.1e} over five c-face pairs", parts.join(", "))))
}

/// White/black pairs covering all four parity classes of the explicit formula.
pub const FORMULA_PAIRS: [((i32, i32), (i32, i32)); 12] = [
    ((1, 0), (0, 1)),
    ((-3, 2), (-2, 3)),
    ((5, -2), (4, -1)),
    ((1, 2), (6, -1)),
    ((-5, 0), (-4, 1)),
    ((3, 0), (2, -1)),
    ((-1, -4), (0, -3)),
    ((-7, 0), (-6, 1)),
    ((1, 6), (2, 7)),
    ((3, 4), (-2, 3)),
    ((-1, 2), (0, 3)),
    ((3, -4), (4, -3)),
];

fn c6_inverse_formula() -> Result<Check> {
    let (n, a) = (8, 0.5);
    let mut sys = build_k(n, a)?;
    sys.invert()?;
    let q1 = QuadratureSpec::default();
    let q2 = QuadratureSpec { nodes: 2 * q1.nodes, ..q1 };
    let (mut worst, mut drift) = (0.0f64, 0.0f64);
    let mut classes = std::collections::BTreeSet::new();
    for &((x1, x2), (y1, y2)) in &FORMULA_PAIRS {
        let (x, y) = (Coord::new(x1, x2), Coord::new(y1, y2));
        classes.insert((eps_white(x)?, eps_black(y)?));
        let f1 = k_inverse_formula(n, a, x, y, &q1)?;
        let f2 = k_inverse_formula(n, a, x, y, &q2)?;
        worst = worst.max((f1 - sys.inverse_entry(x, y)?).norm());
        drift = drift.max((f1 - f2).norm());
    }
    let passed = worst < 1e-6 && drift < 1e-8 && classes.len() == 4;
    Ok(Check::plain(
        passed,
        format!(
            "{} entries, {} parity classes: max |formula - dense| {worst:.1e}; node doubling {}->{} changes by {drift:.1e}",
            FORMULA_PAIRS.len(),
            classes.len(),
            q1.nodes,
            q2.nodes
        ),
    ))
}

/// `(k, ℓ)` choices for the reciprocal-weight check; `k` even (odd `k` is not invariant).
pub const RECIPROCAL_CHOICES: [(i32, i32); 3] = [(2, 1), (4, 2), (2, 3)];

fn c7_reciprocal() -> Result<Check> {
    let (n, a) = (8, 0.5);
    let mut p = build_k(n, a)?;
    let mut q = build_k(n, 1.0 / a)?;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (k, l) in RECIPROCAL_CHOICES {
        let f1 = Coord::new(-n + 2 * k + 2 * l, -n + 2 * l);
        let f0 = Coord::new(-n + 2 * k, -n);
        let dp = p.expected_height(f1)? - p.expected_height(f0)?;
        let dq = q.expected_height(f1)? - q.expected_height(f0)?;
        worst = worst.max((dp - dq).abs());
        parts.push(format!("(k,l)=({k},{l}): {dp:.6}"));
    }
    Ok(Check::plain(worst < 1e-8, format!("n={n}, a={a} vs 1/a: {}; max diff {worst:.1e}", parts.join(", "))))
}

fn c8_height_matching() -> Result<Check> {
    let (n, m) = (128, 200);
    let mut hits = 0;
    for k in 0..m {
        let d = sample(n, 0.5, RandomSeed::new(ACCEPTANCE_SEED, (8 << 32) + k as u64))?;
        hits += height_match_check(&d)? as usize;
    }
    let freq = hits as f64 / m as f64;
    Ok(Check::plain(freq >= 0.9, format!("n={n}: H_n = 4I - n - 1 in {hits}/{m} samples ({freq:.3}, >= 0.90 required)")))
}

/// Whites whose four dimer marginals are compared in the smooth phase.
const C9_WHITES: [Coord; 2] = [Coord::new(1, 0), Coord::new(-1, 0)];

fn c9_smooth_phase() -> Result<Check> {
    let a = 0.5;
    let big_n = 100_000usize;
    let window = SmoothWindow::new(2, a, 1e-3)?;
    let mut smooth = [[0u64; 4]; 2];
    for k in 0..big_n {
        let s = sample_smooth_phase(window, RandomSeed::new(ACCEPTANCE_SEED, (9 << 32) + k as u64));
        for (i, &w) in C9_WHITES.iter().enumerate() {
            for d in 0..4u8 {
                smooth[i][d as usize] += s.has_dimer(w, d) as u64;
            }
        }
    }
    let (n, m) = (128, 2000usize);
    let mut aztec = [[0u64; 4]; 2];
    for k in 0..m {
        let t = sample(n, a, RandomSeed::new(ACCEPTANCE_SEED, (10 << 32) + k as u64))?;
        for (i, &w) in C9_WHITES.iter().enumerate() {
            for d in 0..4u8 {
                aztec[i][d as usize] += t.has_edge(w, w + DIRS[d as usize]) as u64;
            }
        }
    }
    let (mut z_smooth, mut z_aztec) = (0.0f64, 0.0f64);
    for (i, &w) in C9_WHITES.iter().enumerate() {
        for d in 0..4usize {
            let p = fullplane_edge_probability(a, w, w + DIRS[d])?;
            let ps = smooth[i][d] as f64 / big_n as f64;
            let pa = aztec[i][d] as f64 / m as f64;
            let var = p * (1.0 - p);
            z_smooth = z_smooth.max((ps - p).abs() / (var / big_n as f64).sqrt());
            z_aztec = z_aztec.max((pa - ps).abs() / (var * (1.0 / m as f64 + 1.0 / big_n as f64)).sqrt());
        }
    }
    Ok(Check::plain(
        z_smooth < 3.0 && z_aztec < 3.0,
        format!(
            "8 edge marginals: smooth phase (N={big_n}) vs full-plane kernel max {z_smooth:.2} sigma; \
             n={n} centre (N={m}) vs smooth phase max {z_aztec:.2} sigma"
        ),
    ))
}

fn c10_backtrack() -> Result<Check> {
    let (n, a, runs) = (256, 0.5, 100usize);
    let region = RegionSpec::new(RegionName::RsStar, n, a)?;
    let mut good = 0;
    let mut worst_ratio: f64 = 0.0;
    for r in 0..runs {
        let d = sample(n, a, RandomSeed::new(ACCEPTANCE_SEED, (11 << 32) + r as u64))?;
        let bb = backbone(&south_forest(&d))?;
        let mut ok = true;
        for k in 0..=3 {
            let Some(path) = bb.path(PathKind::SMinus, bb.split.i - k) else { continue };
            let stat = backtrack_stat(&path.vertices, &region);
            let bound = backtrack_bound(n, k);
            worst_ratio = worst_ratio.max(stat / bound);
            ok &= stat <= bound;
        }
        good += ok as usize;
    }
    let frac = good as f64 / runs as f64;
    Ok(Check::plain(
        frac >= 0.95,
        format!("n={n}: {good}/{runs} runs within (2k+1) n^(1/4) log^2 n for k <= 3 on RS*_n; worst stat/bound {worst_ratio:.3}"),
    ))
}

/// Values from an independent Airy / Tracy–Widom implementation.
#[derive(Deserialize)]
struct AiryOracle {
    f2: HashMap<String, f64>,
    airy_kernel_diagonal: HashMap<String, f64>,
}

const AIRY_ORACLE: &str = include_str!("../tests/fixtures/airy_oracle.json");

/// Sizes of the KS trend; beyond `n = 64` the finite-size bias is below batch noise.
pub const KS_TREND_SIZES: [i32; 3] = [16, 32, 64];

fn c11_airy() -> Result<Check> {
    let spec = AiryKernelSpec::default();
    let dense = AiryKernelSpec { panel_nodes: 4 * spec.panel_nodes, fredholm_nodes: 4 * spec.fredholm_nodes, ..spec.clone() };
    let oracle: AiryOracle = serde_json::from_str(AIRY_ORACLE)?;
    let (mut kdiag, mut kdense, mut f2fix, mut f2dense) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (x, v) in &oracle.airy_kernel_diagonal {
        let x: f64 = x.parse().map_err(|_| crate::Error::Schema(format!("bad fixture key {x}")))?;
        let k = airy_kernel_stationary(x, x);
        kdiag = kdiag.max((k - v).abs());
        kdense = kdense.max((k - airy_kernel_tilde(0.0, x, 0.0, x, &dense)?).abs());
    }
    for (s, v) in &oracle.f2 {
        let s: f64 = s.parse().map_err(|_| crate::Error::Schema(format!("bad fixture key {s}")))?;
        let f = fredholm_gap(s, &spec);
        f2fix = f2fix.max((f - v).abs());
        f2dense = f2dense.max((f - fredholm_gap(s, &dense)).abs());
    }
    let numerics_ok = kdiag < 1e-8 && kdense < 1e-8 && f2fix < 1e-4 && f2dense < 1e-4;

    let frame = scaling_frame(0.5)?;
    let top = |n: i32, count: usize, stream: u64| -> Result<Vec<f64>> {
        (0..count)
            .map(|k| top_path_at_zero(&sample(n, 0.5, RandomSeed::new(ACCEPTANCE_SEED, stream + k as u64))?, &frame))
            .collect()
    };
    let main = top(512, 200, 12 << 32)?;
    let report = top_path_test(&main, &spec)?;
    let mut medians = Vec::new();
    for (i, &n) in KS_TREND_SIZES.iter().enumerate() {
        let xs = top(n, 500, (13 << 32) + ((i as u64) << 20))?;
        let mut ks: Vec<f64> = xs.chunks(100).map(|c| top_path_test(c, &spec).map(|r| r.statistic)).collect::<Result<_>>()?;
        ks.sort_by(f64::total_cmp);
        medians.push(ks[2]);
    }
    let trend_ok = medians.windows(2).all(|w| w[1] < w[0]);
    let trend = KS_TREND_SIZES.iter().zip(&medians).map(|(n, m)| format!("n={n}: {m:.3}")).collect::<Vec<_>>().join(", ");
    Ok(Check::plain(
        numerics_ok && report.within_band && trend_ok,
        format!(
            "K_Ai diagonal vs fixture {kdiag:.1e}, vs 4x lambda quadrature {kdense:.1e} (1e-8); F2 vs fixture {f2fix:.1e}, \
             vs 4x Nystrom {f2dense:.1e} (1e-4); n=512 N=200 KS={:.3} (< {KS_TREND_BAND}, 95% noise {:.3}); \
             median KS over 5 batches of 100: {trend}",
            report.statistic, report.critical_95
        ),
    ))
}
