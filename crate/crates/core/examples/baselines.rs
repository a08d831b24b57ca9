//! LRU, LFU and FIFO on the same request stream.

use coop_cache::harness::{run_point, ExperimentConfig};
use coop_cache::sim::PolicyKind;

fn main() -> anyhow::Result<()> {
    let cfg = ExperimentConfig::desk();
    for policy in [PolicyKind::Lru, PolicyKind::Lfu, PolicyKind::Fifo] {
        let run = run_point(&cfg, 0, policy)?;
        let hits: usize = run.log.iter().map(|r| r.hits).sum();
        let caches: Vec<Vec<usize>> = run
            .simulation
            .caches()
            .iter()
            .map(|c| c.files().collect())
            .collect();
        println!(
            "{policy:<4} eta {:>6.2}%  hit ratio {:.3}  final caches {caches:?}",
            run.eta,
            hits as f64 / (run.log.len() * cfg.topology.n_users) as f64
        );
    }
    Ok(())
}
