//! Driving an analysis and the invariant suite from a JSON run configuration, the same
//! way `bifkit analyze` and `bifkit verify` do.
//!
//!     cargo run --release --example run_config

use bifurcate_kit::cli::{analyze_to_dir, run_verify, RunConfig};
use bifurcate_kit::Result;

const CONFIG: &str = r#"{
  "schema": "bifurcate-kit/1",
  "model": {"name": "harmonic_forced", "params": {"lambda": 0.75}},
  "chart": {"grid_resolution": 11},
  "eps_ladder": [1e-2, 1e-3, 1e-4]
}"#;

fn main() -> Result<()> {
    let cfg = RunConfig::from_json(CONFIG)?;
    let dir = std::env::temp_dir().join("bifkit-run-config-example");
    let analysis = analyze_to_dir(&cfg, &dir)?;
    let r = &analysis.report;
    println!("config hash {}", r.config_hash);
    println!("verdict {:?}, zeros {:?}", r.verdict, r.zeros.iter().map(|z| &z.h_star).collect::<Vec<_>>());
    println!("wrote {}", dir.display());

    print!("{}", run_verify(&cfg)?.table());

    match RunConfig::from_json(r#"{"schema": "bifurcate-kit/1", "model": {"name": "harmonic_forced"}, "eps_ladder": [1e-3, 1e-2]}"#) {
        Ok(_) => unreachable!("an increasing ladder is rejected"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
