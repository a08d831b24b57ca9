//! Generate a seeded topology and print its coverage.
//!
//! ```text
//! cargo run --example topology -- 7
//! ```

use coop_cache::topology::{generate_topology, TopologyConfig};

fn main() -> anyhow::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(7);
    let topo = generate_topology(seed, &TopologyConfig::default())?;

    for s in &topo.stations {
        println!(
            "station {} at ({:.0}, {:.0}) m, radius {:.0} m, serves users {:?}",
            s.id,
            s.position.x,
            s.position.y,
            s.radius,
            topo.connectable_users(s.id)
        );
    }
    for u in &topo.users {
        println!(
            "user {:>2} at ({:>6.0}, {:>6.0}) m, covered by {:?}, relay {}",
            u.id,
            u.position.x,
            u.position.y,
            topo.covering_stations(u.id),
            topo.nearest_covering_station(u.id)
        );
    }

    let path = std::env::temp_dir().join(format!("coop-cache-topology-{seed}.json"));
    topo.save(&path)?;
    println!("saved to {}", path.display());
    Ok(())
}
