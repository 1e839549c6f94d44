use aztec_dimers::airy::{fredholm_gap, AiryKernelSpec};
use aztec_dimers::heights::{dimers_from_heights, faces_around, height_field, vertex_height};
use aztec_dimers::io::{from_json, to_json, TilingFile, TILING_SCHEMA};
use aztec_dimers::kasteleyn::{build_k, fullplane_edge_probability, KasteleynSystem};
use aztec_dimers::lattice::{
    adjacent_a_face, build_temperley_graph, classify_vertex, AztecGraph, Coord, Direction, Gauge, VertexClass, DIRS,
};
use aztec_dimers::sampler::{sample, RandomSeed};
use aztec_dimers::scaling::{
    curve_extent, curve_extent_scan, extract_airy_paths, limit_curve_point, scaling_frame, RegionName, RegionSpec,
};
use aztec_dimers::temperley::{backbone, dual_forest, north_forest, south_forest, turn_count};
use aztec_dimers::wilson::{loop_erase, wilson_forest};
use proptest::prelude::*;
use std::sync::OnceLock;

fn vertex() -> impl Strategy<Value = Coord> {
    (-200i32..200, -200i32..200).prop_map(|(x, y)| if (x + y).rem_euclid(2) == 1 { Coord::new(x, y) } else { Coord::new(x + 1, y) })
}

fn kasteleyn8() -> &'static KasteleynSystem {
    static K: OnceLock<KasteleynSystem> = OnceLock::new();
    K.get_or_init(|| {
        let mut k = build_k(8, 0.5).unwrap();
        k.invert().unwrap();
        k
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn one_adjacent_a_face(v in vertex()) {
        let a = adjacent_a_face(v).unwrap();
        let count = faces_around(v).iter().filter(|&&f| f == a).count();
        prop_assert_eq!(count, 1);
        // Exactly one of the four surrounding faces is an a-face.
        let a_faces = faces_around(v)
            .iter()
            .filter(|&&f| f.x.rem_euclid(2) == 1 && (f.x + f.y).rem_euclid(4) == 2)
            .count();
        prop_assert_eq!(a_faces, 1);
    }

    #[test]
    fn colour_classes_partition(v in vertex()) {
        let c = classify_vertex(v).unwrap();
        let white = v.x.rem_euclid(2) == 1;
        prop_assert_eq!(white, matches!(c, VertexClass::N | VertexClass::S));
    }

    #[test]
    fn gauges_agree_on_face_weights(x in -7i32..=7, y in -7i32..=7, a in 0.05f64..1.0) {
        prop_assume!((x + y).rem_euclid(2) == 0);
        let f = Coord::new(x, y);
        let ws: Vec<Option<f64>> = [Gauge::TwoPeriodic, Gauge::NWeights, Gauge::SWeights]
            .iter()
            .map(|&g| AztecGraph::with_weight(8, a, g).unwrap().face_weight(f))
            .collect();
        if let Some(w0) = ws[0] {
            for w in &ws[1..] {
                prop_assert!((w.unwrap() - w0).abs() <= 1e-12 * w0.abs());
            }
        }
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), stream in any::<u64>()) {
        let s = RandomSeed::new(seed, stream);
        prop_assert_eq!(sample(12, 0.5, s).unwrap(), sample(12, 0.5, s).unwrap());
    }

    #[test]
    fn heights_determine_the_tiling(seed in any::<u64>(), a in 0.1f64..1.0) {
        let d = sample(12, a, RandomSeed::new(seed, 0)).unwrap();
        let h = height_field(&d);
        let back = dimers_from_heights(&h, a).unwrap();
        prop_assert_eq!(back.dirs(), d.dirs());
        for (f, v) in h.faces() {
            for e in DIRS {
                if let Some(w) = h.get(f + e) {
                    let diff = (v - w).abs();
                    prop_assert!(diff == 1 || diff == 3, "{} -> {}: {}", f, f + e, diff);
                }
            }
        }
    }

    #[test]
    fn forests_are_dual_and_never_cross(seed in any::<u64>()) {
        let d = sample(12, 0.4, RandomSeed::new(seed, 1)).unwrap();
        let s = south_forest(&d);
        let n = north_forest(&d);
        prop_assert_eq!(dual_forest(&s).unwrap(), n.clone());
        let mid = |(v, p): (Coord, Coord)| Coord::new((v.x + p.x) / 2, (v.y + p.y) / 2);
        let mut mids: Vec<Coord> = s.edges().into_iter().map(mid).chain(n.edges().into_iter().map(mid)).collect();
        let before = mids.len();
        mids.sort();
        mids.dedup();
        prop_assert_eq!(mids.len(), before);
    }

    #[test]
    fn backbone_heights_change_only_at_turns(seed in any::<u64>()) {
        let d = sample(16, 0.5, RandomSeed::new(seed, 2)).unwrap();
        let h = height_field(&d);
        for p in &backbone(&south_forest(&d)).unwrap().paths {
            let inner = p.vertices.len() - 1;
            for w in p.vertices.windows(3).take(inner.saturating_sub(1)) {
                let dh = vertex_height(&h, w[1]).unwrap() - vertex_height(&h, w[0]).unwrap();
                prop_assert_eq!(dh, turn_count(w) as f64);
                prop_assert!(dh.abs() <= 1.0);
            }
        }
    }

    #[test]
    fn loop_erasure_is_idempotent(steps in proptest::collection::vec(0u8..4, 1..200)) {
        let mut walk = vec![Coord::new(1, 0)];
        for d in steps {
            let last = *walk.last().unwrap();
            walk.push(last + 2 * DIRS[d as usize]);
        }
        let once = loop_erase(&walk).unwrap();
        prop_assert_eq!(loop_erase(&once).unwrap(), once.clone());
        prop_assert_eq!(once.first(), walk.first());
        prop_assert_eq!(once.last(), walk.last());
    }

    #[test]
    fn wilson_gives_sink_rooted_forests(seed in any::<u64>(), north in any::<bool>()) {
        let dir = if north { Direction::N } else { Direction::S };
        let g = build_temperley_graph(dir, 8, 0.5).unwrap();
        let f = wilson_forest(&g, None, RandomSeed::new(seed, 0)).unwrap();
        for v in g.vertices() {
            let path = f.path_from(v);
            prop_assert!(path.len() <= g.index_len());
            prop_assert!(g.is_sink(*path.last().unwrap()));
        }
    }

    #[test]
    fn tiling_files_round_trip(seed in any::<u64>(), version in 2u32..100) {
        let d = sample(8, 0.5, RandomSeed::new(seed, 0)).unwrap();
        let text = to_json(&TilingFile::from_config(&d)).unwrap();
        prop_assert_eq!(from_json::<TilingFile>(&text, TILING_SCHEMA).unwrap().to_config().unwrap(), d);
        let other = text.replace("\"version\": 1", &format!("\"version\": {version}"));
        prop_assert!(from_json::<TilingFile>(&other, TILING_SCHEMA).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn finite_kernel_partition_of_unity(i in 0usize..1000) {
        let k = kasteleyn8();
        let w = k.whites[i % k.whites.len()];
        let total: f64 = DIRS
            .iter()
            .map(|&e| w + e)
            .filter(|b| b.linf() <= 8)
            .map(|b| k.edge_probability(&[(w, b)]).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fullplane_partition_of_unity(x in -6i32..6, y in -6i32..6, a in 0.2f64..0.9) {
        let w = Coord::new(2 * x + 1, 2 * y);
        let total: f64 = DIRS.iter().map(|&e| fullplane_edge_probability(a, w, w + e).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn limit_curve_is_symmetric(u in -0.95f64..0.95, a in 0.2f64..0.8) {
        let t = u * curve_extent(a).unwrap();
        let p = limit_curve_point(t, a).unwrap();
        let q = limit_curve_point(-t, a).unwrap();
        prop_assert!((p.0 - q.1).abs() < 1e-7 && (p.1 - q.0).abs() < 1e-7, "{:?} {:?}", p, q);
    }

    #[test]
    fn scaling_frame_two_codings(a in 0.2f64..0.95) {
        let f = scaling_frame(a).unwrap();
        // Direct coding from a, independent of the c-based one in the library.
        let c = a / (1.0 + a * a);
        prop_assert!((f.c - c).abs() < 1e-15);
        prop_assert!((f.xi_c + 0.5 * (1.0 - 2.0 * c).sqrt()).abs() < 1e-14);
        prop_assert!((curve_extent(a).unwrap() - (1.0 - a * a) / (1.0 + a * a)).abs() < 1e-12);
        prop_assert!((curve_extent(a).unwrap() - curve_extent_scan(a).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn fredholm_stable_under_doubling(s in -5.0f64..3.0) {
        let spec = AiryKernelSpec::default();
        let fine = AiryKernelSpec { fredholm_nodes: 2 * spec.fredholm_nodes, ..spec.clone() };
        prop_assert!((fredholm_gap(s, &spec) - fredholm_gap(s, &fine)).abs() < 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn airy_paths_agree_on_common_times(seed in any::<u64>()) {
        let n = 64;
        let frame = scaling_frame(0.5).unwrap();
        let region = RegionSpec::new(RegionName::Rs, n, 0.5).unwrap();
        let bb = backbone(&south_forest(&sample(n, 0.5, RandomSeed::new(seed, 3)).unwrap())).unwrap();
        let coarse = [-0.5, 0.0, 0.5];
        let fine = [-0.5, -0.25, 0.0, 0.25, 0.5];
        let pc = extract_airy_paths(&bb, n, &frame, &coarse, 3, &region).unwrap();
        let pf = extract_airy_paths(&bb, n, &frame, &fine, 3, &region).unwrap();
        for i in 0..3 {
            for (k, j) in [(0, 0), (1, 2), (2, 4)] {
                prop_assert_eq!(pc.upper[i][k].to_bits(), pf.upper[i][j].to_bits());
                prop_assert_eq!(pc.lower[i][k].to_bits(), pf.lower[i][j].to_bits());
            }
        }
    }
}
