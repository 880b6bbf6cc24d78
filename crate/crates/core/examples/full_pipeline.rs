//! Drive the whole pipeline from a bundled TOML config, exactly as the
//! `morseflow` binary does, and pick values out of the JSON report.
//!
//! ```text
//! cargo run --example full_pipeline
//! ```

use std::path::Path;

use morseflow::cli::{run, Subcommand};

fn main() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/sphere-height.toml");
    let out = std::env::temp_dir().join("morseflow-example-run");
    let outcome = run(&config, &out, Subcommand::All, false, true).unwrap();
    println!("report: {}", outcome.report_path.display());
    println!(
        "verification failures: {}",
        outcome.verification_failures.len()
    );

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&outcome.report_path).unwrap()).unwrap();
    println!("betti numbers: {}", report["homology"]["betti"]);
    println!("duality holds: {}", report["duality"]["holds"]);
    println!(
        "residue of the normalized area form: {}",
        report["residues"][0]["residues"][0]["value"]
    );
    println!(
        "FME max residual: {:e}",
        report["fme"][0]["max_residual"].as_f64().unwrap()
    );
}
