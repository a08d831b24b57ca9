//! Popularity that changes every few thousand cycles: LFU keeps stale
//! counts while the learned agents keep adapting.

use coop_cache::harness::{run_drift_experiment, ExperimentConfig};
use coop_cache::sim::PolicyKind;

fn main() -> anyhow::Result<()> {
    let cfg = ExperimentConfig::desk();
    let result = run_drift_experiment(&cfg, 0, &PolicyKind::ALL)?;

    for (seed, epochs) in &result.epochs {
        let desc: Vec<String> = epochs
            .iter()
            .map(|e| format!("{}@{} beta={:.2}", e.index, e.start_cycle, e.beta))
            .collect();
        println!("seed {seed}: {}", desc.join(", "));
    }
    let quarter = (cfg.drift.period / 2) as usize;
    for (policy, s) in &result.series {
        let marks: Vec<String> = s
            .iter()
            .skip(quarter - 1)
            .step_by(quarter)
            .map(|v| format!("{v:5.1}"))
            .collect();
        println!("{policy:<5} {}", marks.join(" "));
    }
    Ok(())
}
