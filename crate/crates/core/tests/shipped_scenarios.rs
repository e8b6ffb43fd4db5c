use std::path::Path;

use govsim_core::scenario::{preset, ScenarioConfig, PRESETS};

fn scenarios() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios"))
}

#[test]
fn shipped_preset_files_match_the_builtin_presets() {
    for name in PRESETS {
        let text = std::fs::read_to_string(scenarios().join(format!("{name}.json"))).unwrap();
        let shipped = ScenarioConfig::from_json(&text).unwrap();
        assert_eq!(shipped, preset(name).unwrap(), "{name}");
    }
}

#[test]
fn every_shipped_scenario_validates_and_has_a_report() {
    for entry in std::fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|x| x == "json") {
            let config = ScenarioConfig::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
            config.validate().unwrap();
            let stem = path.file_stem().unwrap().to_string_lossy().to_string();
            assert!(scenarios().join("reports").join(format!("{stem}.json")).exists(), "{stem}");
        }
    }
}
