//! Delay reduction against the Zipf exponent for all four policies.

use coop_cache::harness::{run_beta_sweep, ExperimentConfig};
use coop_cache::sim::PolicyKind;

fn main() -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::desk();
    cfg.beta_values = vec![0.5, 0.9, 1.3];
    let result = run_beta_sweep(&cfg, 0, &PolicyKind::ALL)?;
    for s in result.summary() {
        println!(
            "beta {:<4} {:<5} {:>6.2} +/- {:.2}",
            s.axis, s.policy, s.mean, s.half_width
        );
    }
    result.write_csv(std::io::stdout().lock())?;
    Ok(())
}
