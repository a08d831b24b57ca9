//! Geometric layout of base stations, users and the cloud data center.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Stream};
use crate::{Error, Result, StationId, UserId};

/// Converts a power level in dB (relative to 1 W) to linear watts.
pub fn db_to_watts(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: StationId,
    pub position: Point,
    /// Cell radius in meters.
    pub radius: f64,
    /// Transmit power in watts.
    pub tx_power: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudDataCenter {
    /// Transmit power in watts.
    pub tx_power: f64,
    /// Length of every cloud to base station link, in meters.
    pub backhaul_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    pub position: Point,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
}

/// Parameters for [`generate_topology`]. Powers are given in dB and converted
/// to watts once, when the topology is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub n_stations: usize,
    pub n_users: usize,
    pub radius_m: f64,
    pub arena: Arena,
    /// Station jitter as a fraction of the grid cell size.
    pub jitter: f64,
    pub station_power_db: f64,
    pub cloud_power_db: f64,
    pub backhaul_distance_m: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            n_stations: 3,
            n_users: 12,
            radius_m: 2200.0,
            arena: Arena {
                width: 6000.0,
                height: 6000.0,
            },
            jitter: 0.2,
            station_power_db: 16.9,
            cloud_power_db: 20.0,
            backhaul_distance_m: 3000.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyData")]
pub struct Topology {
    pub stations: Vec<BaseStation>,
    pub users: Vec<User>,
    pub cloud: CloudDataCenter,
    /// `coverage[i][j]` is true when user `j` lies within the cell of station `i`.
    #[serde(skip)]
    coverage: Vec<Vec<bool>>,
}

#[derive(Deserialize)]
struct TopologyData {
    stations: Vec<BaseStation>,
    users: Vec<User>,
    cloud: CloudDataCenter,
}

impl TryFrom<TopologyData> for Topology {
    type Error = Error;

    fn try_from(d: TopologyData) -> Result<Self> {
        Topology::new(d.stations, d.users, d.cloud)
    }
}

/// Builds a topology: stations on a jittered grid inside the arena, users
/// uniform over the union of the station disks.
pub fn generate_topology(seed: u64, cfg: &TopologyConfig) -> Result<Topology> {
    if cfg.n_stations == 0 || cfg.n_users == 0 {
        return Err(Error::config("need at least one station and one user"));
    }
    if !(cfg.radius_m > 0.0 && cfg.radius_m.is_finite()) {
        return Err(Error::config("cell radius must be positive"));
    }
    if !(cfg.backhaul_distance_m > 0.0) {
        return Err(Error::config("backhaul distance must be positive"));
    }
    if !(0.0..=1.0).contains(&cfg.jitter) {
        return Err(Error::config("jitter must lie in [0, 1]"));
    }
    let cols = (cfg.n_stations as f64).sqrt().ceil() as usize;
    let rows = cfg.n_stations.div_ceil(cols);
    let cell_w = cfg.arena.width / cols as f64;
    let cell_h = cfg.arena.height / rows as f64;
    if !(cell_w >= 1.0 && cell_h >= 1.0 && cell_w.is_finite() && cell_h.is_finite()) {
        return Err(Error::config(format!(
            "arena {}x{} m is too small for {} stations",
            cfg.arena.width, cfg.arena.height, cfg.n_stations
        )));
    }

    let mut rng = rng::stream(seed, Stream::Topology);
    let tx_power = db_to_watts(cfg.station_power_db);
    let stations: Vec<BaseStation> = (0..cfg.n_stations)
        .map(|id| {
            let (col, row) = (id % cols, id / cols);
            let jx = cfg.jitter * cell_w * (rng.random::<f64>() - 0.5);
            let jy = cfg.jitter * cell_h * (rng.random::<f64>() - 0.5);
            BaseStation {
                id,
                position: Point::new(
                    (col as f64 + 0.5) * cell_w + jx,
                    (row as f64 + 0.5) * cell_h + jy,
                ),
                radius: cfg.radius_m,
                tx_power,
            }
        })
        .collect();

    let min_x = stations
        .iter()
        .map(|s| s.position.x - s.radius)
        .fold(f64::INFINITY, f64::min);
    let max_x = stations
        .iter()
        .map(|s| s.position.x + s.radius)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_y = stations
        .iter()
        .map(|s| s.position.y - s.radius)
        .fold(f64::INFINITY, f64::min);
    let max_y = stations
        .iter()
        .map(|s| s.position.y + s.radius)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut users = Vec::with_capacity(cfg.n_users);
    while users.len() < cfg.n_users {
        let p = Point::new(
            rng.random_range(min_x..max_x),
            rng.random_range(min_y..max_y),
        );
        if stations.iter().any(|s| s.position.distance(&p) <= s.radius) {
            users.push(User {
                id: users.len(),
                position: p,
            });
        }
    }

    let cloud = CloudDataCenter {
        tx_power: db_to_watts(cfg.cloud_power_db),
        backhaul_distance: cfg.backhaul_distance_m,
    };
    Topology::new(stations, users, cloud)
}

impl Topology {
    /// Assembles a topology from explicit parts, computing coverage and
    /// checking that every user is covered.
    pub fn new(
        stations: Vec<BaseStation>,
        users: Vec<User>,
        cloud: CloudDataCenter,
    ) -> Result<Self> {
        let mut topo = Topology {
            stations,
            users,
            cloud,
            coverage: Vec::new(),
        };
        topo.validate()?;
        Ok(topo)
    }

    fn validate(&mut self) -> Result<()> {
        if self.stations.is_empty() || self.users.is_empty() {
            return Err(Error::config("topology needs stations and users"));
        }
        for (i, s) in self.stations.iter().enumerate() {
            if s.id != i || !(s.radius > 0.0) || !(s.tx_power > 0.0) {
                return Err(Error::config(format!("invalid base station {i}")));
            }
            if !(s.position.x.is_finite() && s.position.y.is_finite()) {
                return Err(Error::config(format!("station {i} position is not finite")));
            }
        }
        for (j, u) in self.users.iter().enumerate() {
            if u.id != j || !(u.position.x.is_finite() && u.position.y.is_finite()) {
                return Err(Error::config(format!("invalid user {j}")));
            }
        }
        if !(self.cloud.tx_power > 0.0 && self.cloud.backhaul_distance > 0.0) {
            return Err(Error::config(
                "cloud power and backhaul distance must be positive",
            ));
        }
        self.coverage = self
            .stations
            .iter()
            .map(|s| {
                self.users
                    .iter()
                    .map(|u| s.position.distance(&u.position) <= s.radius)
                    .collect()
            })
            .collect();
        for j in 0..self.users.len() {
            if !self.coverage.iter().any(|row| row[j]) {
                return Err(Error::config(format!(
                    "user {j} is not covered by any station"
                )));
            }
        }
        Ok(())
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn distance(&self, station: StationId, user: UserId) -> f64 {
        self.stations[station]
            .position
            .distance(&self.users[user].position)
    }

    /// Coverage indicator; a user exactly on the cell edge is covered.
    pub fn covered(&self, station: StationId, user: UserId) -> bool {
        self.coverage[station][user]
    }

    /// Users that can connect to `station`, ascending.
    pub fn connectable_users(&self, station: StationId) -> Vec<UserId> {
        (0..self.users.len())
            .filter(|&j| self.coverage[station][j])
            .collect()
    }

    /// Stations covering `user`, ascending.
    pub fn covering_stations(&self, user: UserId) -> Vec<StationId> {
        (0..self.stations.len())
            .filter(|&i| self.coverage[i][user])
            .collect()
    }

    /// The covering station closest to `user`; ties go to the lower id.
    pub fn nearest_covering_station(&self, user: UserId) -> StationId {
        let mut best = None;
        for i in 0..self.stations.len() {
            if !self.coverage[i][user] {
                continue;
            }
            let d = self.distance(i, user);
            match best {
                Some((_, bd)) if bd <= d => {}
                _ => best = Some((i, d)),
            }
        }
        best.expect("every user is covered").0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a topology and recomputes its coverage matrix.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
