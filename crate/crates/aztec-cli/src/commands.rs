//! One function per subcommand. Each returns a [`Report`] and never prints directly.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use aztec_dimers::acceptance::FORMULA_PAIRS;
use aztec_dimers::airy::{airy_kernel_stationary, fredholm_gap, top_path_test, tw2_moments};
use aztec_dimers::io::{load_tiling, render_svg, to_json, ForestFile, Overlays, SvgStyle, TilingFile};
use aztec_dimers::kasteleyn::{build_k, k_inverse_formula};
use aztec_dimers::lattice::{Coord, Direction};
use aztec_dimers::sampler::{sample, RandomSeed};
use aztec_dimers::scaling::{
    backtrack_bound, backtrack_stat, extract_airy_paths, height_match_check, onion_detect, onion_threshold, scaling_frame,
    CurveFrame, RegionName, RegionSpec,
};
use aztec_dimers::temperley::{backbone, south_forest, temperley_forest, validate_dcf, PathKind};
use aztec_dimers::wilson::{backbone_subforest, wilson_forest};
use rayon::prelude::*;

use crate::{
    AiryArgs, Command, DirectionArg, ForestArgs, ForestChoice, KernelArgs, KernelMethod, RegionArg, RenderArgs, Report,
    RunContext, SampleArgs, StatsArgs, StatsCheck,
};

pub fn dispatch(cmd: &Command, ctx: &RunContext) -> Result<Report> {
    match cmd {
        Command::Sample(a) => sample_cmd(a, ctx),
        Command::Render(a) => render_cmd(a, ctx),
        Command::Forest(a) => forest_cmd(a, ctx),
        Command::Kernel(a) => kernel_cmd(a, ctx),
        Command::Stats(a) => stats_cmd(a, ctx),
        Command::Airy(a) => airy_cmd(a, ctx),
        Command::Verify(a) => crate::verify::verify_cmd(a, ctx),
    }
}

fn stable() -> Report {
    Report { stdout_stable: true, ..Default::default() }
}

/// Writes `content` to `out` if given, otherwise appends it to stdout.
fn emit(report: &mut Report, ctx: &RunContext, out: Option<&PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(p) => {
            let p = ctx.path(p);
            if let Some(dir) = p.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&p, content).with_context(|| format!("writing {}", p.display()))?;
            report.outputs.push(p);
        }
        None => report.stdout.push_str(content),
    }
    Ok(())
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?)
}

fn sample_cmd(args: &SampleArgs, ctx: &RunContext) -> Result<Report> {
    let d = sample(args.n, args.a, RandomSeed::new(args.seed, 0))?;
    let mut r = Report { n: Some(args.n), a: Some(args.a), seed: Some(args.seed), ..stable() };
    emit(&mut r, ctx, args.out.as_ref(), &to_json(&TilingFile::from_config(&d))?)?;
    if args.out.is_some() {
        r.stdout.push_str(&format!("sampled n={} a={} seed={}: {} dominoes\n", args.n, args.a, args.seed, d.pairs().len()));
    }
    Ok(r)
}

fn region_name(r: RegionArg) -> RegionName {
    match r {
        RegionArg::Rs => RegionName::Rs,
        RegionArg::RsStar => RegionName::RsStar,
        RegionArg::PrsStar => RegionName::PrsStar,
        RegionArg::Meso => RegionName::Meso,
        RegionArg::Cap => RegionName::Cap,
        RegionArg::Cross => RegionName::Cross,
    }
}

fn directions(c: Option<ForestChoice>) -> Vec<Direction> {
    match c {
        None => vec![],
        Some(ForestChoice::South) => vec![Direction::S],
        Some(ForestChoice::North) => vec![Direction::N],
        Some(ForestChoice::Both) => vec![Direction::S, Direction::N],
    }
}

fn render_cmd(args: &RenderArgs, ctx: &RunContext) -> Result<Report> {
    let input = ctx.path(&args.input);
    let d = load_tiling(&input)?;
    let mut r = Report { n: Some(d.n), a: Some(d.a), inputs: vec![input], ..stable() };
    let forests: Vec<_> = directions(args.forest).into_iter().map(|dir| temperley_forest(&d, dir)).collect();
    let backbones = directions(args.backbone)
        .into_iter()
        .map(|dir| backbone(&temperley_forest(&d, dir)))
        .collect::<aztec_dimers::Result<Vec<_>>>()?;
    let mut regions = Vec::new();
    for &reg in &args.region {
        regions.extend(RegionSpec::new(region_name(reg), d.n, d.a)?.outlines(64)?);
    }
    let overlays = Overlays { forests: forests.iter().collect(), backbones: backbones.iter().collect(), regions };
    let style = SvgStyle { scale: args.scale, ..Default::default() };
    emit(&mut r, ctx, args.out.as_ref(), &render_svg(&d, &overlays, &style)?)?;
    Ok(r)
}

fn forest_cmd(args: &ForestArgs, ctx: &RunContext) -> Result<Report> {
    let input = ctx.path(&args.input);
    let d = load_tiling(&input)?;
    let dir = match args.direction {
        DirectionArg::South => Direction::S,
        DirectionArg::North => Direction::N,
    };
    let mut f = temperley_forest(&d, dir);
    if let Some(seed) = args.resample {
        let fixed = backbone_subforest(&f)?;
        f = wilson_forest(&f.graph(), Some(&fixed), RandomSeed::new(seed, 0))?;
        let rep = validate_dcf(&f);
        if !rep.is_valid() {
            bail!("resampled forest is not dimer-compatible: {}", rep.violations[0].message);
        }
    }
    let bb = backbone(&f)?;
    let mut r = Report { n: Some(d.n), a: Some(d.a), seed: args.resample, inputs: vec![input], ..stable() };
    emit(&mut r, ctx, args.out.as_ref(), &to_json(&ForestFile::from_forest(&f))?)?;
    if args.out.is_some() {
        r.stdout.push_str(&format!("{:?} forest: {} edges, split point I = {}\n", dir, f.num_edges(), bb.split.i));
    }
    Ok(r)
}

fn parse_entry(s: &str) -> Result<(Coord, Coord)> {
    let v: Vec<i32> = s.split(',').map(|t| t.trim().parse::<i32>()).collect::<std::result::Result<_, _>>()
        .with_context(|| format!("entry {s:?} is not x1,x2,y1,y2"))?;
    match v[..] {
        [x1, x2, y1, y2] => Ok((Coord::new(x1, x2), Coord::new(y1, y2))),
        _ => bail!("entry {s:?} needs four integers"),
    }
}

fn kernel_cmd(args: &KernelArgs, ctx: &RunContext) -> Result<Report> {
    let (n, a) = (args.n, args.a);
    let mut r = Report { n: Some(n), a: Some(a), ..stable() };
    let mut sys = build_k(n, a)?;
    if let Some(row) = args.profile_row {
        let mut rows = Vec::new();
        for x in -n..=n {
            let f = Coord::new(x, row);
            if f.is_face() && row.abs() <= n {
                rows.push(vec![x.to_string(), row.to_string(), sys.expected_height(f)?.to_string()]);
            }
        }
        emit(&mut r, ctx, args.out.as_ref(), &csv_text(&["x", "y", "expected_height"], rows)?)?;
        return Ok(r);
    }
    let entries: Vec<(Coord, Coord)> = if args.entry.is_empty() {
        FORMULA_PAIRS
            .iter()
            .map(|&((x1, x2), (y1, y2))| (Coord::new(x1, x2), Coord::new(y1, y2)))
            .filter(|(x, y)| x.linf() <= n && y.linf() <= n)
            .collect()
    } else {
        args.entry.iter().map(|s| parse_entry(s)).collect::<Result<_>>()?
    };
    let direct = args.method != KernelMethod::Formula;
    let formula = args.method != KernelMethod::Direct;
    if direct {
        sys.invert()?;
    }
    let quad = ctx.config.quadrature();
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for (x, y) in entries {
        let dv = if direct { Some(sys.inverse_entry(x, y)?) } else { None };
        let fv = if formula { Some(k_inverse_formula(n, a, x, y, &quad)?) } else { None };
        let diff = match (dv, fv) {
            (Some(p), Some(q)) => (p - q).norm(),
            _ => f64::NAN,
        };
        if diff.is_finite() {
            worst = worst.max(diff);
        }
        let part = |v: Option<(f64, f64)>| match v {
            Some((re, im)) => [re.to_string(), im.to_string()],
            None => [String::new(), String::new()],
        };
        let [dr, di] = part(dv.map(|c| (c.re, c.im)));
        let [fr, fi] = part(fv.map(|c| (c.re, c.im)));
        rows.push(vec![x.x.to_string(), x.y.to_string(), y.x.to_string(), y.y.to_string(), dr, di, fr, fi, if diff.is_finite() { diff.to_string() } else { String::new() }]);
    }
    let header = ["x1", "x2", "y1", "y2", "direct_re", "direct_im", "formula_re", "formula_im", "abs_diff"];
    emit(&mut r, ctx, args.out.as_ref(), &csv_text(&header, rows)?)?;
    if direct && formula {
        r.stdout.push_str(&format!("max abs diff direct vs formula: {worst:e}\n"));
    }
    Ok(r)
}

fn fmt_f(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else if x > 0.0 {
        "inf".into()
    } else if x < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

fn stats_cmd(args: &StatsArgs, ctx: &RunContext) -> Result<Report> {
    let (n, a) = (args.n, args.a);
    let mut r = Report { n: Some(n), a: Some(a), seed: Some(args.seed), ..stable() };
    let seed = |k: usize| RandomSeed::new(args.seed, k as u64);
    let summary;
    let text = match args.check {
        StatsCheck::Heightmatch => {
            let rows: Vec<(usize, i32, bool)> = (0..args.samples)
                .into_par_iter()
                .map(|k| -> Result<_> {
                    let d = sample(n, a, seed(k))?;
                    let i = backbone(&south_forest(&d))?.split.i;
                    Ok((k, i, height_match_check(&d)?))
                })
                .collect::<Result<_>>()?;
            let hits = rows.iter().filter(|t| t.2).count();
            summary = format!("heightmatch n={n} a={a}: {hits}/{} samples with H_n = 4I - n - 1\n", args.samples);
            csv_text(
                &["sample", "split", "predicted_height", "matched"],
                rows.iter().map(|&(k, i, m)| vec![k.to_string(), i.to_string(), (4 * i - n - 1).to_string(), m.to_string()]),
            )?
        }
        StatsCheck::Backtrack => {
            let region = RegionSpec::new(RegionName::RsStar, n, a)?;
            let rows: Vec<Vec<(i32, f64)>> = (0..args.samples)
                .into_par_iter()
                .map(|k| -> Result<_> {
                    let bb = backbone(&south_forest(&sample(n, a, seed(k))?))?;
                    Ok((0..=3)
                        .filter_map(|j| bb.path(PathKind::SMinus, bb.split.i - j).map(|p| (j, backtrack_stat(&p.vertices, &region))))
                        .collect())
                })
                .collect::<Result<_>>()?;
            let good = rows.iter().filter(|v| v.iter().all(|&(j, s)| s <= backtrack_bound(n, j))).count();
            summary = format!("backtrack n={n} a={a}: {good}/{} runs within the bound for k <= 3\n", args.samples);
            let flat = rows.iter().enumerate().flat_map(|(k, v)| {
                v.iter().map(move |&(j, s)| {
                    let b = backtrack_bound(n, j);
                    vec![k.to_string(), j.to_string(), fmt_f(s), b.to_string(), (s <= b).to_string()]
                })
            });
            csv_text(&["sample", "k", "stat", "bound", "within"], flat)?
        }
        StatsCheck::Airy => {
            let frame = scaling_frame(a)?;
            let region = RegionSpec::new(RegionName::Rs, n, a)?;
            let all = (0..args.samples)
                .into_par_iter()
                .map(|k| -> Result<_> {
                    let bb = backbone(&south_forest(&sample(n, a, seed(k))?))?;
                    Ok(extract_airy_paths(&bb, n, &frame, &args.times, args.paths, &region)?)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut rows = Vec::new();
            for (k, ap) in all.iter().enumerate() {
                for (ti, t) in ap.times.iter().enumerate() {
                    for i in 0..args.paths {
                        rows.push(vec![k.to_string(), t.to_string(), (i + 1).to_string(), fmt_f(ap.upper[i][ti]), fmt_f(ap.lower[i][ti])]);
                    }
                }
            }
            summary = match args.times.iter().position(|&t| t == 0.0) {
                Some(ti) if args.samples >= 2 => {
                    let top: Vec<f64> = all.iter().map(|ap| ap.upper[0][ti]).collect();
                    let rep = top_path_test(&top, &ctx.config.airy())?;
                    format!("{}\n", serde_json::to_string(&rep)?)
                }
                _ => String::new(),
            };
            csv_text(&["sample", "t", "i", "upper", "lower"], rows)?
        }
        StatsCheck::Onion => {
            let r2 = args.r2.unwrap_or((n as f64).cbrt());
            let r1 = args.r1.unwrap_or_else(|| onion_threshold(n, 1, r2));
            let center = CurveFrame::new(n, a)?.curve(0.0)?;
            let rows: Vec<(usize, Option<usize>)> = (0..args.samples)
                .into_par_iter()
                .map(|k| -> Result<_> {
                    let bb = backbone(&south_forest(&sample(n, a, seed(k))?))?;
                    let paths: Vec<_> = bb.paths.into_iter().map(|p| p.vertices).collect();
                    let rep = onion_detect(&paths, r1, r2, center)?;
                    Ok((rep.onions, rep.min_layers))
                })
                .collect::<Result<_>>()?;
            let hit = rows.iter().filter(|t| t.0 > 0).count();
            summary = format!("onion n={n} a={a} r1={r1} r2={r2}: onions in {hit}/{} samples\n", args.samples);
            csv_text(
                &["sample", "onions", "min_layers"],
                rows.iter().enumerate().map(|(k, &(o, m))| vec![k.to_string(), o.to_string(), m.map(|x| x.to_string()).unwrap_or_default()]),
            )?
        }
    };
    emit(&mut r, ctx, args.out.as_ref(), &text)?;
    r.stdout.push_str(&summary);
    Ok(r)
}

fn airy_cmd(args: &AiryArgs, ctx: &RunContext) -> Result<Report> {
    if !(args.step > 0.0 && args.to >= args.from) {
        bail!("need step > 0 and to >= from");
    }
    let spec = ctx.config.airy();
    let mut r = stable();
    let count = ((args.to - args.from) / args.step + 1e-9).floor() as usize + 1;
    let mut header = vec!["s", "F2"];
    if args.kernel {
        header.push("K_Ai");
    }
    let rows = (0..count).map(|k| {
        let s = args.from + k as f64 * args.step;
        let mut row = vec![s.to_string(), fredholm_gap(s, &spec).to_string()];
        if args.kernel {
            row.push(airy_kernel_stationary(s, s).to_string());
        }
        row
    });
    emit(&mut r, ctx, args.out.as_ref(), &csv_text(&header, rows)?)?;
    if args.moments {
        let (mean, var) = tw2_moments(&spec);
        r.stdout.push_str(&format!("mean {mean}\nvariance {var}\n"));
    }
    Ok(r)
}
