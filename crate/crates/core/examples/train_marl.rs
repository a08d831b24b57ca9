//! Train the actors and critic at desk scale, then evaluate greedily and
//! save a checkpoint.

use coop_cache::harness::ExperimentConfig;
use coop_cache::sim::{Mode, PolicyKind, Simulation};

fn main() -> anyhow::Result<()> {
    let cfg = ExperimentConfig::desk();
    let mut sim = cfg.simulation(0, PolicyKind::Marl)?;

    let chunk = 250;
    for _ in 0..cfg.train_cycles() / chunk {
        let log = sim.run(chunk, Mode::Train)?;
        let eta = log.iter().map(|r| r.eta).sum::<f64>() / log.len() as f64;
        let td = log
            .iter()
            .filter_map(|r| r.td_error)
            .map(f64::abs)
            .sum::<f64>()
            / log.len() as f64;
        println!(
            "cycles {:>5}: mean eta {eta:>6.2}%  mean |td| {td:.3}",
            sim.cycle()
        );
    }

    let eval = sim.run(cfg.eval_cycles(), Mode::Eval)?;
    let eta = eval.iter().map(|r| r.eta).sum::<f64>() / eval.len() as f64;
    println!("greedy evaluation over {} cycles: {eta:.2}%", eval.len());

    let dir = std::env::temp_dir().join("coop-cache-marl");
    sim.save_checkpoint(&dir)?;
    let restored = Simulation::load_checkpoint(&dir)?;
    assert_eq!(restored.cycle(), sim.cycle());
    println!("checkpoint in {}", dir.display());
    Ok(())
}
