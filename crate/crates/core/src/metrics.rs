//! Per-cycle delay accounting and the delay-reduction percentage.

use serde::Serialize;

use crate::cache::{lookup, CacheState, Lookup};
use crate::channel::{hit_delay, miss_delay, ChannelParams, Fading};
use crate::topology::Topology;
use crate::{Error, FileId, Result, StationId, UserId};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UserDelivery {
    pub user: UserId,
    pub file: FileId,
    /// Serving station on a hit, `None` on a miss.
    pub server: Option<StationId>,
    /// Realized delay in frames.
    pub delay: u64,
    /// Delay the same request would have had through the cloud.
    pub miss_delay: u64,
    /// `max(miss_delay - delay, 0)`; zero on a miss.
    pub reduction: f64,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleOutcome {
    pub cycle: u64,
    pub deliveries: Vec<UserDelivery>,
    /// Mean reduction over users.
    pub delta_d: f64,
    /// Mean cloud-path delay over users.
    pub mean_miss_delay: f64,
}

impl CycleOutcome {
    /// Builds the aggregates from per-user records.
    pub fn from_deliveries(cycle: u64, deliveries: Vec<UserDelivery>) -> Self {
        let n = deliveries.len().max(1) as f64;
        let delta_d = deliveries.iter().map(|d| d.reduction).sum::<f64>() / n;
        let mean_miss_delay = deliveries.iter().map(|d| d.miss_delay as f64).sum::<f64>() / n;
        CycleOutcome {
            cycle,
            deliveries,
            delta_d,
            mean_miss_delay,
        }
    }

    pub fn hits(&self) -> usize {
        self.deliveries
            .iter()
            .filter(|d| d.server.is_some())
            .count()
    }

    pub fn truncated(&self) -> bool {
        self.deliveries.iter().any(|d| d.truncated)
    }

    pub fn eta(&self) -> Result<f64> {
        eta(self)
    }
}

/// Serves every user's request and records realized and cloud-path delays.
///
/// On a hit the cloud-path delay is a separate draw over the two hops the
/// file would have taken; on a miss both delays are the one realized value.
pub fn cycle_delay_accounting<F: Fading + ?Sized>(
    topology: &Topology,
    caches: &[CacheState],
    requests: &[FileId],
    params: &ChannelParams,
    cycle: u64,
    fading: &mut F,
) -> Result<CycleOutcome> {
    if requests.len() != topology.n_users() {
        return Err(Error::contract(format!(
            "{} requests for {} users",
            requests.len(),
            topology.n_users()
        )));
    }
    let mut deliveries = Vec::with_capacity(requests.len());
    for (user, &file) in requests.iter().enumerate() {
        let d = match lookup(caches, topology, user, file) {
            Lookup::Hit(station) => {
                let hit = hit_delay(topology, user, station, params, fading)?;
                let miss = miss_delay(topology, user, params, fading);
                UserDelivery {
                    user,
                    file,
                    server: Some(station),
                    delay: hit.frames,
                    miss_delay: miss.frames(),
                    reduction: miss.frames().saturating_sub(hit.frames) as f64,
                    truncated: hit.truncated || miss.truncated(),
                }
            }
            Lookup::Miss => {
                let miss = miss_delay(topology, user, params, fading);
                UserDelivery {
                    user,
                    file,
                    server: None,
                    delay: miss.frames(),
                    miss_delay: miss.frames(),
                    reduction: 0.0,
                    truncated: miss.truncated(),
                }
            }
        };
        deliveries.push(d);
    }
    Ok(CycleOutcome::from_deliveries(cycle, deliveries))
}

/// Delay reduction as a percentage of the mean cloud-path delay.
pub fn eta(outcome: &CycleOutcome) -> Result<f64> {
    if !(outcome.mean_miss_delay > 0.0) {
        return Err(Error::UndefinedEta);
    }
    Ok(outcome.delta_d / outcome.mean_miss_delay * 100.0)
}

/// Prefix means: `out[t] = mean(series[..=t])`.
pub fn running_average(series: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    series
        .iter()
        .enumerate()
        .map(|(t, v)| {
            sum += v;
            sum / (t + 1) as f64
        })
        .collect()
}
