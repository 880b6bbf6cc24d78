//! End-to-end runs of the CLI pipeline: artifacts, caching, reproducibility
//! and the error contract.

use std::path::{Path, PathBuf};

use morseflow::cli::{run, CliError, Subcommand};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn temp_out(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "morseflow-test-{}-{tag}",
        std::process::id()
    ));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn report_without_timings(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value.as_object_mut().unwrap().remove("timings_ms");
    serde_json::to_string_pretty(&value).unwrap()
}

#[test]
fn circle_report_is_reproducible_and_cache_stable() {
    let config = configs_dir().join("circle-cos.toml");
    let out_cold = temp_out("cold");
    let out_again = temp_out("again");

    let first = run(&config, &out_cold, Subcommand::All, true, false).unwrap();
    assert!(first.verification_failures.is_empty());
    let second = run(&config, &out_again, Subcommand::All, true, false).unwrap();
    assert!(second.verification_failures.is_empty());
    // Two cold runs agree byte-for-byte outside the timing fields.
    assert_eq!(
        report_without_timings(&first.report_path),
        report_without_timings(&second.report_path)
    );

    // A warm rerun in the same directory reuses the cache and reproduces the
    // identical report.
    let warm = run(&config, &out_cold, Subcommand::All, false, false).unwrap();
    assert_eq!(
        report_without_timings(&first.report_path),
        report_without_timings(&warm.report_path)
    );
}

#[test]
fn cache_keys_follow_the_function() {
    // Same output directory, different field: the hash must miss and the
    // recomputed critical points must move.
    let out = temp_out("invalidate");
    let base = std::fs::read_to_string(configs_dir().join("circle-cos.toml")).unwrap();
    let rotated = base.replace("f = \"x\"", "f = \"y\"");
    let dir = temp_out("cfg");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg_a = dir.join("a.toml");
    let cfg_b = dir.join("b.toml");
    std::fs::write(&cfg_a, &base).unwrap();
    std::fs::write(&cfg_b, &rotated).unwrap();

    let ra = run(&cfg_a, &out, Subcommand::CriticalPoints, false, false).unwrap();
    let report_a = std::fs::read_to_string(&ra.report_path).unwrap();
    let rb = run(&cfg_b, &out, Subcommand::CriticalPoints, false, false).unwrap();
    let report_b = std::fs::read_to_string(&rb.report_path).unwrap();
    let pa: serde_json::Value = serde_json::from_str(&report_a).unwrap();
    let pb: serde_json::Value = serde_json::from_str(&report_b).unwrap();
    let loc = |v: &serde_json::Value| {
        v["critical_points"][0]["location"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect::<Vec<f64>>()
    };
    // Max of f = x sits at (1, 0); max of f = y at (0, 1).
    assert!((loc(&pa)[0].abs() - 1.0).abs() < 1e-6);
    assert!((loc(&pb)[1].abs() - 1.0).abs() < 1e-6);
}

#[test]
fn unknown_config_key_is_reported_by_name() {
    let dir = temp_out("badcfg");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.toml");
    let text = std::fs::read_to_string(configs_dir().join("circle-cos.toml"))
        .unwrap()
        .replace("[analysis]", "[tolerances]\nint_tol_typo = 1e-4\n\n[analysis]");
    std::fs::write(&cfg, text).unwrap();
    let err = run(&cfg, &dir.join("out"), Subcommand::VerifyFme, true, false).unwrap_err();
    match err {
        CliError::Config(msg) => {
            assert!(
                msg.contains("int_tol_typo"),
                "message should name the unknown key: {msg}"
            );
        }
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn degenerate_field_is_a_config_level_failure() {
    let dir = temp_out("degenerate");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("deg.toml");
    let text = std::fs::read_to_string(configs_dir().join("sphere-height.toml"))
        .unwrap()
        .replace("f = \"z\"", "f = \"z^2\"");
    std::fs::write(&cfg, text).unwrap();
    let err = run(&cfg, &dir.join("out"), Subcommand::CriticalPoints, true, false).unwrap_err();
    assert!(
        err.to_string().contains("degenerate"),
        "expected the degeneracy diagnostic, got: {err}"
    );
}

#[test]
fn flow_line_csv_has_the_documented_block_format() {
    let config = configs_dir().join("circle-cos.toml");
    let out = temp_out("csv");
    run(&config, &out, Subcommand::Connections, true, false).unwrap();
    let csv = std::fs::read_to_string(out.join("flow_lines.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with('#'));
    // First block header: from,to,sign with sign ±1.
    let block = lines.next().unwrap();
    let parts: Vec<&str> = block.split(',').collect();
    assert_eq!(parts.len(), 3);
    let sign: i64 = parts[2].parse().unwrap();
    assert_eq!(sign.abs(), 1);
    // Following rows: t,x,y with t starting at 0.
    let row = lines.next().unwrap();
    let cols: Vec<&str> = row.split(',').collect();
    assert_eq!(cols.len(), 3);
    assert_eq!(cols[0].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn sphere17_runs_fme_without_a_scalar_field() {
    let config = configs_dir().join("sphere17-fme.toml");
    let out = temp_out("s17");
    let outcome = run(&config, &out, Subcommand::VerifyFme, true, false).unwrap();
    assert!(outcome.verification_failures.is_empty());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&outcome.report_path).unwrap()).unwrap();
    assert!(report["fme"][0]["passed"].as_bool().unwrap());
    // Stages needing a scalar field refuse cleanly.
    let err = run(&config, &out, Subcommand::Homology, true, false).unwrap_err();
    assert!(matches!(err, CliError::Config(_)));
}

#[test]
fn homology_subcommand_reports_all_seven_catalog_configs() {
    for (name, betti, torsion0) in [
        ("circle-cos", vec![1, 1], Vec::<u64>::new()),
        ("sphere-height", vec![1, 0, 1], vec![]),
        ("sphere-perturbed", vec![1, 0, 1], vec![]),
        ("torus-separable", vec![1, 2, 1], vec![]),
        ("klein-mod2", vec![1, 2, 1], vec![]),
        ("torus-twisted", vec![0, 0, 0], vec![2]),
    ] {
        let config = configs_dir().join(format!("{name}.toml"));
        let out = temp_out(name);
        let outcome = run(&config, &out, Subcommand::Homology, true, false).unwrap();
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&outcome.report_path).unwrap())
                .unwrap();
        let got: Vec<u64> = report["homology"]["betti"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .collect();
        assert_eq!(got, betti.iter().map(|&b| b as u64).collect::<Vec<u64>>(), "{name}");
        let tor0: Vec<u64> = report["homology"]["torsion"][0]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .collect();
        assert_eq!(tor0, torsion0, "{name} torsion");
    }
}
