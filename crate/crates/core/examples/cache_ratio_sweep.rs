//! Delay reduction against the cache ratio at a fixed Zipf exponent.

use coop_cache::harness::{run_cache_ratio_sweep, ExperimentConfig};
use coop_cache::sim::PolicyKind;

fn main() -> anyhow::Result<()> {
    let cfg = ExperimentConfig::desk();
    let result = run_cache_ratio_sweep(&cfg, 0, &PolicyKind::ALL)?;
    for s in result.summary() {
        println!(
            "sigma {:<5} {:<5} {:>6.2} +/- {:.2}",
            s.axis, s.policy, s.mean, s.half_width
        );
    }
    let svg = std::env::temp_dir().join("coop-cache-sigma.svg");
    std::fs::write(&svg, result.to_svg("delay reduction vs cache ratio"))?;
    println!("chart in {}", svg.display());
    Ok(())
}
