//! Command-line behavior: exit codes, output hygiene, and the
//! quantization-floor scoring oracle.

use std::process::Command;

use qdest::data::{generate_synthetic_city, SyntheticSpec};
use qdest::geo::{assign_cell, haversine_distance};
use qdest::GeoPoint;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qdest"))
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = bin().args(["synth", "--bogus-flag", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "preprocess",
        "synth",
        "train",
        "evaluate",
        "ablate",
        "gradcheck",
        "circuit-dump",
    ] {
        assert!(text.contains(sub), "help must list {sub}");
    }
}

#[test]
fn preprocess_missing_input_fails_without_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let city = dir.path().join("city");
    let status = bin()
        .args([
            "synth",
            "--seed",
            "5",
            "--rows",
            "3",
            "--cols",
            "3",
            "--taxis",
            "4",
            "--trips",
            "12",
            "--categories",
            "3",
            "--out",
        ])
        .arg(&city)
        .status()
        .unwrap();
    assert!(status.success());

    let out_dir = dir.path().join("prep");
    let result = bin()
        .args(["preprocess", "--config"])
        .arg(city.join("config.json"))
        .arg("--trips")
        .arg(dir.path().join("no_such_file.csv"))
        .arg("--pois")
        .arg(city.join("pois.csv"))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(
        result.status.code(),
        Some(2),
        "missing input is a data error"
    );
    assert!(
        !out_dir.exists() || std::fs::read_dir(&out_dir).unwrap().next().is_none(),
        "no partial outputs may be written"
    );
}

#[test]
fn evaluate_incompatible_checkpoint_is_a_version_error() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("checkpoint.json");
    std::fs::write(&ckpt, r#"{"version": 99}"#).unwrap();
    let out = bin()
        .args(["evaluate", "--checkpoint"])
        .arg(&ckpt)
        .arg("--data")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scoring_a_perfect_oracle_dump_yields_the_quantization_floor() {
    // A dump that predicts the exact center of every true cell scores an
    // EDS equal to the mean center displacement of the true points.
    let spec = SyntheticSpec {
        n_rows: 4,
        n_cols: 4,
        n_taxis: 4,
        trips_per_taxi: 20,
        seed: 3,
        k_poi: 3,
    };
    let (grid, _, trips) = generate_synthetic_city(&spec).unwrap();
    let truths: Vec<GeoPoint> = trips.iter().map(|t| t.dropoff).collect();

    let mut floor = 0.0;
    let mut dump = String::from("sample_id,argmax_grid,pred_lon,pred_lat,true_lon,true_lat\n");
    for (i, truth) in truths.iter().enumerate() {
        let cell = assign_cell(&grid, truth).unwrap();
        let center = grid.center(cell).unwrap();
        floor += haversine_distance(&center, truth);
        dump.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i, cell.0, center.lon, center.lat, truth.lon, truth.lat
        ));
    }
    floor /= truths.len() as f64;

    let dir = tempfile::tempdir().unwrap();
    let dump_path = dir.path().join("dump.csv");
    std::fs::write(&dump_path, dump).unwrap();
    let out = bin()
        .args(["evaluate", "--score-dump"])
        .arg(&dump_path)
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let parsed: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    let eds = parsed["eds_km"].as_f64().unwrap();
    assert!(
        (eds - floor).abs() < 1e-9,
        "scored EDS {eds} must equal the quantization floor {floor}"
    );
}

#[test]
fn gradcheck_reports_every_component_and_exits_zero() {
    let out = bin().args(["gradcheck", "--draws", "2"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for component in [
        "matmul",
        "cross_entropy",
        "conv1d_d2",
        "circuit_parameter_shift",
        "end_to_end_model",
    ] {
        assert!(
            text.contains(component),
            "gradcheck must report {component}"
        );
    }
    assert!(
        text.lines().all(|l| l.starts_with("PASS")),
        "all components must pass"
    );
}

#[test]
fn gradcheck_negative_control_exits_three() {
    let out = bin()
        .args(["gradcheck", "--draws", "2", "--break-gradient"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
