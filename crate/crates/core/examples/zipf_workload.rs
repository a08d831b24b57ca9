//! Group-correlated Zipf requests: the popularity table, per-user
//! preferences, and a recorded trace.

use coop_cache::workload::{zipf_table, RequestTrace, Workload, WorkloadConfig, ZipfParams};

fn main() -> anyhow::Result<()> {
    let cfg = WorkloadConfig::default();
    let table = zipf_table(ZipfParams {
        exponent: cfg.beta,
        catalog_size: cfg.catalog_size,
    });
    println!(
        "beta {} over {} files; top five ranks:",
        cfg.beta, cfg.catalog_size
    );
    for (k, p) in table.iter().take(5).enumerate() {
        println!("  rank {k}: {p:.4}");
    }

    let n_users = 12;
    let mut workload = Workload::new(3, n_users, &cfg)?;
    for (user, profile) in workload.epoch().profiles.iter().enumerate().take(4) {
        println!(
            "user {user} (group {}): favourites {:?}",
            profile.group,
            &profile.rank[..5]
        );
    }

    let cycles = 2000;
    let trace = RequestTrace::record(&mut workload, cycles)?;
    let mut counts = vec![0usize; cfg.catalog_size];
    for row in &trace.cycles {
        for &f in row {
            counts[f] += 1;
        }
    }
    let mut order: Vec<usize> = (0..cfg.catalog_size).collect();
    order.sort_by_key(|&f| std::cmp::Reverse(counts[f]));
    println!("most requested files over {cycles} cycles:");
    for &f in order.iter().take(5) {
        println!(
            "  file {f:>2}: {:.3}",
            counts[f] as f64 / (cycles as usize * n_users) as f64
        );
    }

    let path = std::env::temp_dir().join("coop-cache-trace.csv");
    trace.save(&path)?;
    println!("trace written to {}", path.display());
    Ok(())
}
