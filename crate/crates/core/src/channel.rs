//! Block-fading wireless links and frame-counted delivery delay.
//!
//! Every frame sees a fresh Rayleigh power gain `z` with mean `d^-4`; the
//! frame carries `T0 * B * log2(1 + P z / (B sigma^2))` bits and a file is
//! delivered in the first frame at which the accumulated bits reach its size.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::topology::{db_to_watts, Topology};
use crate::{Error, Result, StationId, UserId};

/// Size of one content unit in bits.
pub const UNIT_BITS: f64 = 96.13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Bandwidth `B` in Hz.
    pub bandwidth_hz: f64,
    /// Noise power spectral density in W/Hz.
    pub noise_psd: f64,
    /// Frame duration `T0` in seconds.
    pub frame_duration_s: f64,
    pub pathloss_exponent: f64,
    /// Units per content file; every file has the same size.
    pub units_per_file: f64,
    pub unit_bits: f64,
    /// Delivery gives up (and flags truncation) after this many frames.
    pub max_frames: u64,
    /// Links shorter than this are evaluated at this distance.
    pub min_distance_m: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        let bandwidth_hz = 1e6;
        // 10 dB SNR on a 1 km link from a 16.9 dB transmitter.
        let noise_psd = db_to_watts(16.9) * 1e-12 / (bandwidth_hz * 10.0);
        ChannelParams {
            bandwidth_hz,
            noise_psd,
            frame_duration_s: 1e-3,
            pathloss_exponent: 4.0,
            units_per_file: 100.0,
            unit_bits: UNIT_BITS,
            max_frames: 1_000_000,
            min_distance_m: 1.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.bandwidth_hz,
            self.noise_psd,
            self.frame_duration_s,
            self.pathloss_exponent,
            self.units_per_file,
            self.unit_bits,
            self.min_distance_m,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.max_frames == 0 {
            return Err(Error::config(
                "channel parameters must be strictly positive",
            ));
        }
        Ok(())
    }

    pub fn file(&self) -> FileSize {
        FileSize {
            bits: self.units_per_file * self.unit_bits,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Link {
    /// Transmit power in watts.
    pub tx_power: f64,
    /// Transmitter to receiver distance in meters.
    pub distance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FileSize {
    pub bits: f64,
}

/// Source of per-frame power gains.
pub trait Fading {
    fn gain(&mut self, link: &Link, params: &ChannelParams) -> f64;
}

/// I.i.d. Rayleigh block fading driven by a caller-owned RNG.
pub struct Rayleigh<'a, R: Rng + ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> Fading for Rayleigh<'_, R> {
    fn gain(&mut self, link: &Link, params: &ChannelParams) -> f64 {
        sample_fading(link, params, self.0)
    }
}

/// Any closure from a link to a gain works as a deterministic channel.
impl<F: FnMut(&Link) -> f64> Fading for F {
    fn gain(&mut self, link: &Link, _params: &ChannelParams) -> f64 {
        self(link)
    }
}

/// Draws one power gain: exponential with mean `d^-pathloss_exponent`.
pub fn sample_fading<R: Rng + ?Sized>(link: &Link, params: &ChannelParams, rng: &mut R) -> f64 {
    let unit: f64 = Exp1.sample(rng);
    unit * link.distance.powf(-params.pathloss_exponent)
}

/// Instantaneous capacity in bits per second for power gain `z`.
pub fn capacity(z: f64, link: &Link, params: &ChannelParams) -> f64 {
    let snr = link.tx_power * z / (params.bandwidth_hz * params.noise_psd);
    params.bandwidth_hz * (1.0 + snr).log2()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub frames: u64,
    /// The frame cap was hit before the file got through.
    pub truncated: bool,
}

/// Number of frames needed to push `file` over `link`, one fading draw per
/// frame.
pub fn transmission_delay<F: Fading + ?Sized>(
    file: FileSize,
    link: &Link,
    params: &ChannelParams,
    fading: &mut F,
) -> Delivery {
    let mut sent = 0.0;
    for frame in 1..=params.max_frames {
        let z = fading.gain(link, params);
        sent += params.frame_duration_s * capacity(z, link, params);
        if file.bits <= sent {
            return Delivery {
                frames: frame,
                truncated: false,
            };
        }
    }
    Delivery {
        frames: params.max_frames,
        truncated: true,
    }
}

pub fn station_link(
    topology: &Topology,
    station: StationId,
    user: UserId,
    params: &ChannelParams,
) -> Link {
    Link {
        tx_power: topology.stations[station].tx_power,
        distance: topology.distance(station, user).max(params.min_distance_m),
    }
}

pub fn cloud_link(topology: &Topology, params: &ChannelParams) -> Link {
    Link {
        tx_power: topology.cloud.tx_power,
        distance: topology.cloud.backhaul_distance.max(params.min_distance_m),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MissDelivery {
    /// Station that relays the file from the cloud (closest covering station).
    pub relay: StationId,
    pub cloud_hop: Delivery,
    pub station_hop: Delivery,
}

impl MissDelivery {
    pub fn frames(&self) -> u64 {
        self.cloud_hop.frames + self.station_hop.frames
    }

    pub fn truncated(&self) -> bool {
        self.cloud_hop.truncated || self.station_hop.truncated
    }
}

/// Delay when no covering station holds the file: cloud to the closest
/// covering station, then station to user, with independent fading per hop.
pub fn miss_delay<F: Fading + ?Sized>(
    topology: &Topology,
    user: UserId,
    params: &ChannelParams,
    fading: &mut F,
) -> MissDelivery {
    let file = params.file();
    let relay = topology.nearest_covering_station(user);
    let cloud_hop = transmission_delay(file, &cloud_link(topology, params), params, fading);
    let station_hop = transmission_delay(
        file,
        &station_link(topology, relay, user, params),
        params,
        fading,
    );
    MissDelivery {
        relay,
        cloud_hop,
        station_hop,
    }
}

/// Delay when `station` holds the file and covers `user`.
pub fn hit_delay<F: Fading + ?Sized>(
    topology: &Topology,
    user: UserId,
    station: StationId,
    params: &ChannelParams,
    fading: &mut F,
) -> Result<Delivery> {
    if station >= topology.n_stations() || user >= topology.n_users() {
        return Err(Error::contract(format!(
            "no such station {station} or user {user}"
        )));
    }
    if !topology.covered(station, user) {
        return Err(Error::contract(format!(
            "station {station} does not cover user {user}"
        )));
    }
    let link = station_link(topology, station, user, params);
    Ok(transmission_delay(params.file(), &link, params, fading))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{BaseStation, CloudDataCenter, Point, User};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// B = 1 kHz, sigma^2 = 1e-3 W/Hz, T0 = 1 s: with P = 1 W a gain of `z`
    /// gives SNR `z`, and SNR 1 moves exactly 1000 bits per frame.
    fn unit_params(file_bits: f64) -> ChannelParams {
        ChannelParams {
            bandwidth_hz: 1000.0,
            noise_psd: 1e-3,
            frame_duration_s: 1.0,
            pathloss_exponent: 4.0,
            units_per_file: file_bits,
            unit_bits: 1.0,
            max_frames: 1000,
            min_distance_m: 1.0,
        }
    }

    const UNIT_LINK: Link = Link {
        tx_power: 1.0,
        distance: 1.0,
    };

    fn line_topology(user_x: &[f64]) -> Topology {
        Topology::new(
            vec![
                BaseStation {
                    id: 0,
                    position: Point::new(0.0, 0.0),
                    radius: 1000.0,
                    tx_power: 1.0,
                },
                BaseStation {
                    id: 1,
                    position: Point::new(1500.0, 0.0),
                    radius: 1000.0,
                    tx_power: 1.0,
                },
            ],
            user_x
                .iter()
                .enumerate()
                .map(|(id, &x)| User {
                    id,
                    position: Point::new(x, 0.0),
                })
                .collect(),
            CloudDataCenter {
                tx_power: 100.0,
                backhaul_distance: 3000.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn fading_mean_matches_pathloss() {
        let params = ChannelParams::default();
        for (d, expected) in [(1.0, 1.0), (10.0, 1e-4)] {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let link = Link {
                tx_power: 1.0,
                distance: d,
            };
            let n = 1_000_000;
            let mut sum = 0.0;
            for _ in 0..n {
                let z = sample_fading(&link, &params, &mut rng);
                assert!(z >= 0.0);
                sum += z;
            }
            let mean = sum / n as f64;
            assert!((mean / expected - 1.0).abs() < 0.01, "d={d} mean={mean}");
        }
    }

    #[test]
    fn capacity_examples() {
        let p = unit_params(1.0);
        assert_eq!(capacity(1.0, &UNIT_LINK, &p), 1000.0);
        assert_eq!(capacity(0.0, &UNIT_LINK, &p), 0.0);
        let mega = ChannelParams {
            bandwidth_hz: 1e6,
            noise_psd: 1e-6,
            ..p
        };
        assert!((capacity(3.0, &UNIT_LINK, &mega) - 2e6).abs() < 1e-6);
    }

    #[test]
    fn stub_delays() {
        let p = unit_params(1000.0);
        let one = transmission_delay(p.file(), &UNIT_LINK, &p, &mut |_: &Link| 1.0);
        assert_eq!(
            one,
            Delivery {
                frames: 1,
                truncated: false
            }
        );
        let p3 = unit_params(3000.0);
        let three = transmission_delay(p3.file(), &UNIT_LINK, &p3, &mut |_: &Link| 1.0);
        assert_eq!(three.frames, 3);
    }

    #[test]
    fn dead_link_truncates() {
        let p = unit_params(1000.0);
        let d = transmission_delay(p.file(), &UNIT_LINK, &p, &mut |_: &Link| 0.0);
        assert_eq!(
            d,
            Delivery {
                frames: 1000,
                truncated: true
            }
        );
    }

    #[test]
    fn seeded_delay_matches_replay() {
        let p = ChannelParams::default();
        let link = Link {
            tx_power: db_to_watts(16.9),
            distance: 1000.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let got = transmission_delay(p.file(), &link, &p, &mut Rayleigh(&mut rng));

        let mut replay = ChaCha8Rng::seed_from_u64(42);
        let file = 100.0 * 96.13;
        let mut sent = 0.0;
        let mut frames = 0;
        while sent < file {
            let e: f64 = Exp1.sample(&mut replay);
            let z = e / 1000f64.powi(4);
            let snr = link.tx_power * z / (p.bandwidth_hz * p.noise_psd);
            sent += p.frame_duration_s * p.bandwidth_hz * (1.0 + snr).log2();
            frames += 1;
        }
        assert_eq!(got.frames, frames);
        assert!(!got.truncated);
    }

    #[test]
    fn miss_picks_nearest_and_adds_hops() {
        let topo = line_topology(&[100.0, 900.0]);
        let p = unit_params(2000.0);
        // Station hop: SNR 1 moves 1000 bits/frame, so 2 frames. Cloud hop
        // (P = 100 W): SNR 2^0.45 - 1 moves 450 bits/frame, so 5 frames.
        let cloud_z = (2f64.powf(0.45) - 1.0) / 100.0;
        let mut stub = |l: &Link| if l.tx_power > 10.0 { cloud_z } else { 1.0 };
        let m = miss_delay(&topo, 0, &p, &mut stub);
        assert_eq!(m.relay, 0);
        assert_eq!(m.cloud_hop.frames, 5);
        assert_eq!(m.station_hop.frames, 2);
        assert_eq!(m.frames(), 7);
        assert_eq!(miss_delay(&topo, 1, &p, &mut stub).relay, 1);
    }

    #[test]
    fn zero_distance_user_with_stub() {
        let topo = line_topology(&[0.0]);
        let p = unit_params(1000.0);
        // Station hop carries the whole file in one frame; the cloud hop a fifth.
        let mut stub = |l: &Link| if l.tx_power > 10.0 { 0.002 } else { 1.0 };
        let m = miss_delay(&topo, 0, &p, &mut stub);
        assert_eq!(m.station_hop.frames, 1);
        assert_eq!(m.frames(), m.cloud_hop.frames + 1);
    }

    #[test]
    fn seeded_miss_is_two_independent_hops() {
        let topo = line_topology(&[400.0, 1200.0]);
        let p = ChannelParams {
            units_per_file: 10.0,
            ..ChannelParams::default()
        };
        for user in 0..2 {
            let mut rng = ChaCha8Rng::seed_from_u64(9 + user as u64);
            let m = miss_delay(&topo, user, &p, &mut Rayleigh(&mut rng));
            let mut replay = ChaCha8Rng::seed_from_u64(9 + user as u64);
            let relay = topo.nearest_covering_station(user);
            let a = transmission_delay(
                p.file(),
                &cloud_link(&topo, &p),
                &p,
                &mut Rayleigh(&mut replay),
            );
            let b = transmission_delay(
                p.file(),
                &station_link(&topo, relay, user, &p),
                &p,
                &mut Rayleigh(&mut replay),
            );
            assert_eq!(m.relay, relay);
            assert_eq!(m.frames(), a.frames + b.frames);
        }
        assert_eq!(topo.nearest_covering_station(1), 1);
    }

    #[test]
    fn hit_requires_coverage() {
        let topo = line_topology(&[100.0]);
        let p = unit_params(1000.0);
        let ok = hit_delay(&topo, 0, 0, &p, &mut |_: &Link| 1.0).unwrap();
        assert_eq!(ok.frames, 1);
        assert!(matches!(
            hit_delay(&topo, 0, 1, &p, &mut |_: &Link| 1.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn hit_beats_miss_on_average() {
        let topo = line_topology(&[700.0]);
        let p = ChannelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mut hits, mut misses) = (0u64, 0u64);
        for _ in 0..10_000 {
            hits += hit_delay(&topo, 0, 0, &p, &mut Rayleigh(&mut rng))
                .unwrap()
                .frames;
            misses += miss_delay(&topo, 0, &p, &mut Rayleigh(&mut rng)).frames();
        }
        assert!(hits < misses);
    }
}
