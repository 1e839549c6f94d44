//! `verify`: the acceptance suite, manifest replay, and the determinism criterion.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Result};
use aztec_dimers::acceptance::{run_criterion, CriterionOutcome, Scale, Status, NAMES};
use aztec_dimers::io::{sha256_hex, RunManifest};
use clap::Parser;

use crate::{execute, run_in, Cli, Command, Report, RunContext, VerifyArgs, STDOUT_LABEL};

/// Result of re-running a manifest.
#[derive(Debug)]
pub struct Replay {
    pub command: String,
    pub checked: usize,
    /// Outputs (or `<stdout>`) whose bytes differ from the recorded hash.
    pub mismatches: Vec<String>,
}

/// Re-executes a manifest in its recorded working directory and compares every output.
pub fn replay(path: &Path) -> Result<Replay> {
    let m = RunManifest::load(path)?;
    let changed = m.changed_inputs();
    if !changed.is_empty() {
        bail!("inputs changed since the recorded run: {}", changed.join(", "));
    }
    let argv = std::iter::once("aztec".to_string()).chain(m.args.iter().cloned());
    let cli = Cli::try_parse_from(argv)?;
    if matches!(cli.command, Command::Verify(_)) {
        bail!("verify runs are not replayable");
    }
    let report = execute(&cli, Path::new(&m.cwd))?;
    let mut mismatches = Vec::new();
    for o in &m.outputs {
        let now = if o.path == STDOUT_LABEL {
            Some(sha256_hex(report.stdout.as_bytes()))
        } else {
            std::fs::read(&o.path).ok().map(|b| sha256_hex(&b))
        };
        if now.as_deref() != Some(o.sha256.as_str()) {
            mismatches.push(o.path.clone());
        }
    }
    Ok(Replay { command: m.command, checked: m.outputs.len(), mismatches })
}

/// Invocations exercised by the determinism criterion, relative to a scratch directory.
fn determinism_runs(scale: Scale) -> Vec<Vec<&'static str>> {
    let mut runs = vec![
        vec!["sample", "--n", "16", "--a", "0.5", "--seed", "7", "--out", "t.json"],
        vec!["render", "t.json", "--backbone", "both", "--region", "rs", "--out", "t.svg"],
        vec!["forest", "t.json", "--direction", "north", "--out", "north.json"],
        vec!["forest", "t.json", "--resample", "3", "--out", "resampled.json"],
        vec!["kernel", "--n", "8", "--a", "0.5", "--method", "both", "--manifest-out", "kernel.manifest.json"],
        vec!["stats", "--check", "heightmatch", "--n", "32", "--samples", "16", "--seed", "1", "--out", "hm.csv"],
        vec!["airy", "--from", "-3", "--to", "1", "--step", "1", "--kernel", "--out", "f2.csv"],
    ];
    if scale == Scale::Full {
        runs.push(vec!["stats", "--check", "airy", "--n", "64", "--samples", "24", "--seed", "2", "--times", "-0.5,0,0.5", "--out", "airy.csv"]);
        runs.push(vec!["stats", "--check", "backtrack", "--n", "64", "--samples", "12", "--seed", "4", "--out", "bt.csv"]);
        runs.push(vec!["stats", "--check", "onion", "--n", "64", "--samples", "8", "--seed", "5", "--r1", "8", "--r2", "4", "--out", "onion.csv"]);
    }
    runs
}

fn manifest_of(run: &[&str], dir: &Path) -> PathBuf {
    let flag = |name: &str| run.iter().position(|a| *a == name).map(|i| run[i + 1]);
    match (flag("--manifest-out"), flag("--out")) {
        (Some(m), _) => dir.join(m),
        (None, Some(o)) => dir.join(format!("{o}.manifest.json")),
        (None, None) => unreachable!("every determinism run names an output"),
    }
}

/// Criterion 12: every run replays bit for bit, and sample statistics do not depend on the
/// worker count.
pub fn criterion12(scale: Scale) -> CriterionOutcome {
    let t0 = Instant::now();
    let res = (|| -> Result<(bool, String)> {
        let dir = tempfile::tempdir()?;
        let base = dir.path();
        let mut sink = Vec::new();
        let mut errs = Vec::new();
        let runs = determinism_runs(scale);
        for run in &runs {
            let code = run_in(std::iter::once("aztec").chain(run.iter().copied()), base, &mut sink, &mut errs);
            if code != 0 {
                bail!("`aztec {}` exited {code}: {}", run.join(" "), String::from_utf8_lossy(&errs));
            }
        }
        let mut reproduced = 0;
        let mut outputs = 0;
        let mut bad = Vec::new();
        for run in &runs {
            let r = replay(&manifest_of(run, base))?;
            outputs += r.checked;
            if r.mismatches.is_empty() {
                reproduced += 1;
            } else {
                bad.push(format!("{}: {}", r.command, r.mismatches.join(", ")));
            }
        }
        let mut thread_csv = Vec::new();
        for t in ["1", "3"] {
            let out = format!("threads{t}.csv");
            let argv = ["aztec", "--threads", t, "stats", "--check", "heightmatch", "--n", "16", "--samples", "24", "--out", &out];
            if run_in(argv, base, &mut sink, &mut errs) != 0 {
                bail!("thread-count run failed: {}", String::from_utf8_lossy(&errs));
            }
            thread_csv.push(std::fs::read(base.join(&out))?);
        }
        let threads_ok = thread_csv[0] == thread_csv[1];
        let ok = bad.is_empty() && threads_ok;
        let mut detail = format!(
            "{reproduced}/{} runs replayed from their manifests with identical bytes ({outputs} outputs); \
             1 vs 3 worker threads identical: {threads_ok}",
            runs.len()
        );
        if !bad.is_empty() {
            detail.push_str(&format!("; mismatches: {}", bad.join("; ")));
        }
        Ok((ok, detail))
    })();
    let (passed, detail) = res.unwrap_or_else(|e| (false, format!("error: {e:#}")));
    CriterionOutcome {
        id: 12,
        name: NAMES[11].into(),
        status: if passed { Status::Pass } else { Status::Fail },
        detail,
        seconds: t0.elapsed().as_secs_f64(),
        limitation: None,
        attainable_passed: passed,
    }
}

/// All twelve criteria, calling `each` as every outcome becomes available.
pub fn run_suite(scale: Scale, mut each: impl FnMut(&CriterionOutcome)) -> Vec<CriterionOutcome> {
    let mut out = Vec::new();
    for id in 1..=11 {
        let o = run_criterion(id, scale);
        each(&o);
        out.push(o);
    }
    let o = criterion12(scale);
    each(&o);
    out.push(o);
    out
}

pub fn summary(outcomes: &[CriterionOutcome]) -> String {
    let count = |s: Status| outcomes.iter().filter(|o| o.status == s).count();
    let limited = outcomes.iter().filter(|o| o.status == Status::Fail && o.acceptable()).count();
    format!(
        "{} criteria: {} passed, {} failed ({} on a documented unattainable bound), {} skipped\n",
        outcomes.len(),
        count(Status::Pass),
        count(Status::Fail),
        limited,
        count(Status::Skipped)
    )
}

pub fn verify_cmd(args: &VerifyArgs, ctx: &RunContext) -> Result<Report> {
    let mut r = Report::default();
    if let Some(m) = &args.manifest {
        let path = ctx.path(m);
        r.inputs.push(path.clone());
        let rep = replay(&path)?;
        if rep.mismatches.is_empty() {
            r.stdout = format!("replayed {}: {} outputs identical\n", rep.command, rep.checked);
        } else {
            r.stdout = format!("replayed {}: {} of {} outputs differ: {}\n", rep.command, rep.mismatches.len(), rep.checked, rep.mismatches.join(", "));
            r.exit = 1;
        }
        r.stdout_stable = true;
        return Ok(r);
    }
    let scale = if args.quick { Scale::Quick } else { Scale::Full };
    let outcomes = run_suite(scale, |o| eprintln!("criterion {} finished in {:.1} s", o.id, o.seconds));
    for o in &outcomes {
        r.stdout.push_str(&format!("{o}\n"));
    }
    r.stdout.push_str(&summary(&outcomes));
    if outcomes.iter().any(|o| o.status == Status::Fail) {
        r.exit = 1;
    }
    Ok(r)
}
