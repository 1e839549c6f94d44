//! Versioned JSON files, run manifests and SVG rendering.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::lattice::{dir_of, edge_touches_a_face, Direction, NO_DIR};
use crate::sampler::{DimerConfig, RandomSeed};
use crate::temperley::{Backbone, OrientedForest, PathKind};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Version tag carried by every file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    pub version: u32,
}

fn header(schema: &str) -> Header {
    Header { schema: schema.into(), version: SCHEMA_VERSION }
}

fn check_header(h: &Header, schema: &str) -> Result<()> {
    if h.schema != schema {
        return Err(Error::Schema(format!("expected schema {schema}, found {}", h.schema)));
    }
    if h.version != SCHEMA_VERSION {
        return Err(Error::Schema(format!("unsupported {schema} version {} (this build reads {SCHEMA_VERSION})", h.version)));
    }
    Ok(())
}

/// One character per box cell: `0`..`3` for a direction code, `.` for none.
pub fn encode_dirs(dirs: &[u8]) -> String {
    dirs.iter().map(|&d| if d == NO_DIR { '.' } else { (b'0' + d) as char }).collect()
}

pub fn decode_dirs(s: &str) -> Result<Vec<u8>> {
    s.bytes()
        .map(|c| match c {
            b'.' => Ok(NO_DIR),
            b'0'..=b'3' => Ok(c - b'0'),
            _ => Err(Error::Schema(format!("bad direction character {:?}", c as char))),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TilingFile {
    #[serde(flatten)]
    pub header: Header,
    pub n: i32,
    pub a: f64,
    pub seed: Option<RandomSeed>,
    pub dirs: String,
}

pub const TILING_SCHEMA: &str = "aztec.tiling";
pub const FOREST_SCHEMA: &str = "aztec.forest";
pub const MANIFEST_SCHEMA: &str = "aztec.manifest";

impl TilingFile {
    pub fn from_config(d: &DimerConfig) -> Self {
        TilingFile { header: header(TILING_SCHEMA), n: d.n, a: d.a, seed: d.seed, dirs: encode_dirs(d.dirs()) }
    }

    pub fn to_config(&self) -> Result<DimerConfig> {
        check_header(&self.header, TILING_SCHEMA)?;
        DimerConfig::from_dirs(self.n, self.a, decode_dirs(&self.dirs)?, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestFile {
    #[serde(flatten)]
    pub header: Header,
    pub direction: Direction,
    pub n: i32,
    pub a: f64,
    pub parents: String,
}

impl ForestFile {
    pub fn from_forest(f: &OrientedForest) -> Self {
        ForestFile { header: header(FOREST_SCHEMA), direction: f.direction, n: f.n, a: f.a, parents: encode_dirs(f.parents()) }
    }

    pub fn to_forest(&self) -> Result<OrientedForest> {
        check_header(&self.header, FOREST_SCHEMA)?;
        OrientedForest::from_parents(self.direction, self.n, self.a, decode_dirs(&self.parents)?)
    }
}

/// Pretty JSON with a trailing newline; stable for fixed input.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Parses a versioned file after checking its header.
pub fn from_json<T: DeserializeOwned>(text: &str, schema: &str) -> Result<T> {
    let h: Header = serde_json::from_str(text)?;
    check_header(&h, schema)?;
    Ok(serde_json::from_str(text)?)
}

pub fn load_tiling(path: &Path) -> Result<DimerConfig> {
    let text = std::fs::read_to_string(path)?;
    from_json::<TilingFile>(&text, TILING_SCHEMA)?.to_config()
}

pub fn load_forest(path: &Path) -> Result<OrientedForest> {
    let text = std::fs::read_to_string(path)?;
    from_json::<ForestFile>(&text, FOREST_SCHEMA)?.to_forest()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to re-run a command and check its outputs byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub header: Header,
    pub command: String,
    /// Full argument vector after the program name.
    pub args: Vec<String>,
    /// Directory relative paths in `args` are resolved against.
    pub cwd: String,
    pub n: Option<i32>,
    pub a: Option<f64>,
    pub seed: Option<u64>,
    /// `(crate, version)` pairs.
    pub versions: Vec<(String, String)>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    /// Files read by the run; replay refuses to proceed if they changed.
    pub inputs: Vec<OutputRecord>,
    pub outputs: Vec<OutputRecord>,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, cwd: &Path) -> Self {
        RunManifest {
            header: header(MANIFEST_SCHEMA),
            command: command.into(),
            args,
            cwd: cwd.display().to_string(),
            n: None,
            a: None,
            seed: None,
            versions: vec![("aztec-dimers".into(), env!("CARGO_PKG_VERSION").into())],
            started_unix_ms: unix_ms(),
            finished_unix_ms: 0,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Records an output file with the hash of its current contents.
    pub fn record(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(hash_file(path)?);
        Ok(())
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(hash_file(path)?);
        Ok(())
    }

    pub fn finish(&mut self) {
        self.finished_unix_ms = unix_ms();
    }

    pub fn load(path: &Path) -> Result<Self> {
        from_json(&std::fs::read_to_string(path)?, MANIFEST_SCHEMA)
    }

    /// Outputs whose current contents no longer match the recorded hash.
    pub fn mismatches(&self) -> Vec<String> {
        changed(&self.outputs)
    }

    pub fn changed_inputs(&self) -> Vec<String> {
        changed(&self.inputs)
    }
}

fn hash_file(path: &Path) -> Result<OutputRecord> {
    let bytes = std::fs::read(path)?;
    Ok(OutputRecord { path: path.display().to_string(), sha256: sha256_hex(&bytes) })
}

fn changed(records: &[OutputRecord]) -> Vec<String> {
    records
        .iter()
        .filter(|o| !matches!(std::fs::read(&o.path), Ok(bytes) if sha256_hex(&bytes) == o.sha256))
        .map(|o| o.path.clone())
        .collect()
}

fn unix_ms() -> u128 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Extra layers drawn over the tiling.
#[derive(Clone, Debug, Default)]
pub struct Overlays<'a> {
    pub forests: Vec<&'a OrientedForest>,
    pub backbones: Vec<&'a Backbone>,
    /// Closed polygons in lattice coordinates.
    pub regions: Vec<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvgStyle {
    /// Pixels per lattice unit.
    pub scale: f64,
    pub a_fill: String,
    pub b_fill: String,
    pub stroke: String,
    pub south_path: String,
    pub north_path: String,
    pub region_fill: String,
    pub region_opacity: f64,
    pub max_elements: usize,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            scale: 4.0,
            a_fill: "#3c3c3c".into(),
            b_fill: "#d8d8d8".into(),
            stroke: "#ffffff".into(),
            south_path: "#1f4fd1".into(),
            north_path: "#d12a1f".into(),
            region_fill: "#f2b705".into(),
            region_opacity: 0.3,
            max_elements: 4_000_000,
        }
    }
}

/// Fixed-precision number formatting so output bytes do not depend on float printing.
fn num(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn points(pts: impl IntoIterator<Item = (f64, f64)>, scale: f64) -> String {
    pts.into_iter().map(|(x, y)| format!("{},{}", num(x * scale), num(-y * scale))).collect::<Vec<_>>().join(" ")
}

fn path_color(kind: PathKind, style: &SvgStyle) -> &str {
    match kind {
        PathKind::SMinus | PathKind::SPlus => &style.south_path,
        PathKind::NMinus | PathKind::NPlus => &style.north_path,
    }
}

/// Renders dominoes as rectangles, forests and backbone paths as polylines and regions as
/// translucent polygons. The `y` axis points up.
pub fn render_svg(d: &DimerConfig, overlays: &Overlays<'_>, style: &SvgStyle) -> Result<String> {
    let forest_edges: usize = overlays.forests.iter().map(|f| f.num_edges()).sum();
    let backbone_paths: usize = overlays.backbones.iter().map(|b| b.paths.len()).sum();
    let dominoes = d.pairs().len();
    let total = dominoes + forest_edges + backbone_paths + overlays.regions.len();
    if total > style.max_elements {
        return Err(Error::Resource(format!("{total} SVG elements exceed the cap of {}", style.max_elements)));
    }
    let n = d.n as f64;
    let s = style.scale;
    let half = (n + 1.0) * s;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="{}" height="{}">"#,
        num(-half),
        num(-half),
        num(2.0 * half),
        num(2.0 * half),
        num(2.0 * half),
        num(2.0 * half)
    );
    let _ = writeln!(out, r#"<g id="dominoes" stroke="{}" stroke-width="{}">"#, style.stroke, num(0.1 * s));
    for (w, b) in d.pairs() {
        let e = b - w;
        let dir = dir_of(e).ok_or_else(|| Error::Domain(format!("{w}-{b} is not an edge")))?;
        let (ex, ey) = (e.x as f64, e.y as f64);
        let (wx, wy, bx, by) = (w.x as f64, w.y as f64, b.x as f64, b.y as f64);
        let corners = [(wx - ex, wy), (wx, wy - ey), (bx + ex, by), (bx, by + ey)];
        let fill = if edge_touches_a_face(w, dir) { &style.a_fill } else { &style.b_fill };
        let _ = writeln!(out, r#"<polygon class="domino" fill="{fill}" points="{}"/>"#, points(corners, s));
    }
    out.push_str("</g>\n");
    if !overlays.regions.is_empty() {
        let _ = writeln!(out, r#"<g id="regions" fill="{}" fill-opacity="{}" stroke="none">"#, style.region_fill, num(style.region_opacity));
        for poly in &overlays.regions {
            let _ = writeln!(out, r#"<polygon class="region" points="{}"/>"#, points(poly.iter().copied(), s));
        }
        out.push_str("</g>\n");
    }
    for f in &overlays.forests {
        let color = match f.direction {
            Direction::S => &style.south_path,
            Direction::N => &style.north_path,
        };
        let _ = writeln!(out, r#"<g class="forest" stroke="{color}" stroke-width="{}" fill="none">"#, num(0.25 * s));
        for (c, p) in f.edges() {
            let seg = [(c.x as f64, c.y as f64), (p.x as f64, p.y as f64)];
            let _ = writeln!(out, r#"<polyline points="{}"/>"#, points(seg, s));
        }
        out.push_str("</g>\n");
    }
    for bb in &overlays.backbones {
        let _ = writeln!(out, r#"<g class="backbone" stroke-width="{}" fill="none">"#, num(0.4 * s));
        for p in &bb.paths {
            let pts = p.vertices.iter().map(|v| (v.x as f64, v.y as f64));
            let _ = writeln!(out, r#"<polyline class="path" stroke="{}" points="{}"/>"#, path_color(p.kind, style), points(pts, s));
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::sample;
    use crate::temperley::{backbone, south_forest};

    #[test]
    fn tiling_round_trip_and_version_check() {
        let d = sample(8, 0.5, RandomSeed::new(3, 0)).unwrap();
        let text = to_json(&TilingFile::from_config(&d)).unwrap();
        let back = from_json::<TilingFile>(&text, TILING_SCHEMA).unwrap().to_config().unwrap();
        assert_eq!(back, d);
        let bumped = text.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(from_json::<TilingFile>(&bumped, TILING_SCHEMA), Err(Error::Schema(_))));
        assert!(matches!(from_json::<TilingFile>(&text, FOREST_SCHEMA), Err(Error::Schema(_))));
    }

    #[test]
    fn forest_round_trip() {
        let d = sample(8, 0.5, RandomSeed::new(4, 0)).unwrap();
        let f = south_forest(&d);
        let text = to_json(&ForestFile::from_forest(&f)).unwrap();
        assert_eq!(from_json::<ForestFile>(&text, FOREST_SCHEMA).unwrap().to_forest().unwrap(), f);
    }

    #[test]
    fn svg_counts_and_determinism() {
        let n = 4;
        let d = sample(n, 0.5, RandomSeed::new(5, 0)).unwrap();
        let svg = render_svg(&d, &Overlays::default(), &SvgStyle::default()).unwrap();
        let vertices = d.dirs().iter().filter(|&&c| c != NO_DIR).count();
        assert_eq!(svg.matches(r#"class="domino""#).count(), vertices / 2);
        let bb = backbone(&south_forest(&d)).unwrap();
        let ov = Overlays { backbones: vec![&bb], ..Default::default() };
        let svg2 = render_svg(&d, &ov, &SvgStyle::default()).unwrap();
        assert_eq!(svg2.matches(r#"class="path""#).count(), n as usize);
        assert_eq!(svg2, render_svg(&sample(n, 0.5, RandomSeed::new(5, 0)).unwrap(), &ov, &SvgStyle::default()).unwrap());
        let tiny = SvgStyle { max_elements: 3, ..Default::default() };
        assert!(matches!(render_svg(&d, &Overlays::default(), &tiny), Err(Error::Resource(_))));
    }

    #[test]
    fn number_format_is_stable() {
        assert_eq!(num(1.0), "1");
        assert_eq!(num(-0.0001), "0");
        assert_eq!(num(2.5), "2.5");
        assert_eq!(num(1.0 / 3.0), "0.333");
    }

    #[test]
    fn manifest_detects_changed_output() {
        let dir = std::env::temp_dir().join(format!("aztec-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("out.txt");
        std::fs::write(&p, "abc").unwrap();
        let mut m = RunManifest::new("sample", vec![], &dir);
        m.record(&p).unwrap();
        assert_eq!(m.outputs[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert!(m.mismatches().is_empty());
        std::fs::write(&p, "abd").unwrap();
        assert_eq!(m.mismatches().len(), 1);
        let text = to_json(&m).unwrap();
        assert_eq!(from_json::<RunManifest>(&text, MANIFEST_SCHEMA).unwrap(), m);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
