use std::fs;
use std::path::PathBuf;

use motionlab_core::cache::PreimageRecords;
use motionlab_core::motion::{Family, MotionGraph, WebMeasure};
use motionlab_core::thermo::EquilibriumData;
use motionlab_core::{RationalMap, Weight};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn corpus_seeds_decode() {
    for (name, s) in seeds("rational_map_json") {
        let f = RationalMap::from_json(text(&s));
        // the degree-one seed exercises the rejection path
        assert_eq!(f.is_ok(), name != "degree_one.json", "{name}");
    }
    for (name, s) in seeds("weight_json") {
        Weight::from_json(text(&s)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, s) in seeds("family_json") {
        Family::from_json(text(&s)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, s) in seeds("motion_graph_json") {
        let g = MotionGraph::from_json(text(&s)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(g.is_persistent());
    }
    for (name, s) in seeds("web_measure_json") {
        let w = WebMeasure::from_json(text(&s)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(WebMeasure::from_json(&w.to_json()).unwrap().to_json(), w.to_json());
    }
    for (name, s) in seeds("equilibrium_json") {
        let e = EquilibriumData::from_json(text(&s)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!((e.mu.total_mass() - 1.0).abs() < 1e-9);
    }
    for (name, s) in seeds("preimage_cache_decode") {
        let r = PreimageRecords::decode(&s).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(r.encode(), s);
    }
}

#[test]
fn malformed_documents_are_rejected() {
    assert!(RationalMap::from_json("{\"num\": [], \"den\": []}").is_err());
    assert!(Weight::from_json("[{\"center\": [0, 0], \"a\": 1, \"b\": 0}]").is_err());
    assert!(Weight::from_json("{\"a\": 1}").is_err());
    assert!(Family::from_json("{\"num\": [], \"den\": [[[1, 0]]]}").is_err());
    assert!(MotionGraph::from_json("{\"n\": 1}").is_err());
    let oversized = r#"{"pressure":0.0,"pressure_tree":0.0,"pressure_gap":0.0,"resolution":1000000000000,"rho":[],"m_atoms":[],"mu_atoms":[],"residuals":[],"pressures":[],"base_points":[],"depth":1,"critical_hits":0}"#;
    assert!(EquilibriumData::from_json(oversized).is_err());
    assert!(PreimageRecords::decode(b"").is_err());
}
