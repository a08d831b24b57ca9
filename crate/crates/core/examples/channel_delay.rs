//! Frame-counted delivery delay over Rayleigh fading, for a station hop and
//! for the cloud-relayed path of a miss.

use coop_cache::channel::{miss_delay, transmission_delay, ChannelParams, Link, Rayleigh};
use coop_cache::rng::{stream, Stream};
use coop_cache::topology::{db_to_watts, generate_topology, TopologyConfig};

fn main() -> anyhow::Result<()> {
    let params = ChannelParams::default();
    let file = params.file();
    let mut rng = stream(1, Stream::Channel(0));
    let trials = 10_000;

    println!(
        "file size {:.0} bits, frame {} s",
        file.bits, params.frame_duration_s
    );
    println!("{:>10} {:>12} {:>10}", "distance", "mean frames", "max");
    for d in [100.0, 500.0, 1000.0, 1500.0, 2200.0] {
        let link = Link {
            tx_power: db_to_watts(16.9),
            distance: d,
        };
        let mut sum = 0u64;
        let mut max = 0u64;
        for _ in 0..trials {
            let f = transmission_delay(file, &link, &params, &mut Rayleigh(&mut rng)).frames;
            sum += f;
            max = max.max(f);
        }
        println!("{d:>10.0} {:>12.2} {max:>10}", sum as f64 / trials as f64);
    }

    let topo = generate_topology(1, &TopologyConfig::default())?;
    let mut cloud = 0u64;
    let mut total = 0u64;
    for _ in 0..trials {
        let m = miss_delay(&topo, 0, &params, &mut Rayleigh(&mut rng));
        cloud += m.cloud_hop.frames;
        total += m.frames();
    }
    println!(
        "user 0 miss via station {}: cloud hop {:.2} frames, total {:.2} frames",
        topo.nearest_covering_station(0),
        cloud as f64 / trials as f64,
        total as f64 / trials as f64
    );
    Ok(())
}
