//! Experiment configuration, the three sweeps, and their output files.
//!
//! Every sweep point owns its topology, workload, caches and networks, all
//! derived from the point's seed. Points run in parallel and results are
//! collected in axis order, so outputs do not depend on thread scheduling.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::running_average;
use crate::sim::{CycleRecord, Mode, PolicyKind, RequestSource, SimConfig, Simulation};
use crate::topology::{generate_topology, Arena, TopologyConfig};
use crate::workload::{EpochInfo, RequestTrace, Workload, WorkloadConfig};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(Error::config(format!("unknown scale {other:?}"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftExperiment {
    /// Cycles between popularity changes.
    pub period: u64,
    pub epochs: u64,
    pub beta_min: f64,
    pub beta_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologyConfig,
    pub workload: WorkloadConfig,
    pub sim: SimConfig,
    /// Cycles per static run, training plus evaluation.
    pub n_cycles: u64,
    /// Trailing share of `n_cycles` measured with greedy, frozen actors.
    pub eval_fraction: f64,
    /// Replicas per point; seeds are `seed, seed + 1, ...`.
    pub n_seeds: u64,
    pub beta_values: Vec<f64>,
    pub cache_ratios: Vec<f64>,
    pub drift: DriftExperiment,
}

impl ExperimentConfig {
    pub fn desk() -> Self {
        ExperimentConfig {
            topology: TopologyConfig::default(),
            workload: WorkloadConfig::default(),
            sim: SimConfig::default(),
            n_cycles: 2500,
            eval_fraction: 0.2,
            n_seeds: 3,
            beta_values: vec![0.5, 0.7, 0.9, 1.1, 1.3, 1.5],
            cache_ratios: vec![0.04, 0.1, 0.2, 0.4, 1.0],
            drift: DriftExperiment {
                period: 2000,
                epochs: 4,
                beta_min: 1.1,
                beta_max: 1.5,
            },
        }
    }

    pub fn paper() -> Self {
        let mut cfg = Self::desk();
        cfg.topology.n_stations = 5;
        cfg.topology.n_users = 30;
        cfg.topology.arena = Arena {
            width: 9000.0,
            height: 6000.0,
        };
        cfg.workload.catalog_size = 500;
        cfg.sim.capacity = 40;
        cfg.n_cycles = 40_000;
        cfg.drift.period = 10_000;
        cfg.cache_ratios = vec![0.02, 0.04, 0.08, 0.1, 0.2, 0.4, 1.0];
        cfg
    }

    pub fn preset(scale: Scale) -> Self {
        match scale {
            Scale::Desk => Self::desk(),
            Scale::Paper => Self::paper(),
        }
    }

    /// Overlays a TOML document on the preset: keys present in `text`
    /// replace the preset's values, the rest are kept.
    pub fn from_toml_over(scale: Scale, text: &str) -> Result<Self> {
        let overlay: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Toml(e.to_string()))?;
        let base =
            toml::Table::try_from(Self::preset(scale)).map_err(|e| Error::Toml(e.to_string()))?;
        let mut merged = toml::Value::Table(base);
        merge(&mut merged, toml::Value::Table(overlay));
        let cfg: ExperimentConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::Toml(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Toml(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.eval_fraction) {
            return Err(Error::config("eval_fraction must lie in [0, 1)"));
        }
        if self.n_seeds == 0 {
            return Err(Error::config("n_seeds must be positive"));
        }
        if self.sim.capacity == 0 || self.sim.capacity > self.workload.catalog_size {
            return Err(Error::config("capacity must lie in 1..=catalog_size"));
        }
        self.sim.channel.validate()?;
        self.sim.hyperparams.validate()
    }

    pub fn eval_cycles(&self) -> u64 {
        (self.n_cycles as f64 * self.eval_fraction).round() as u64
    }

    pub fn train_cycles(&self) -> u64 {
        self.n_cycles - self.eval_cycles()
    }

    pub fn seeds(&self, base: u64) -> Vec<u64> {
        (0..self.n_seeds).map(|k| base.wrapping_add(k)).collect()
    }

    /// Capacity for a cache ratio; the ratio must select a whole number of files.
    pub fn capacity_for_ratio(&self, ratio: f64) -> Result<usize> {
        let exact = ratio * self.workload.catalog_size as f64;
        let c = exact.round();
        if (exact - c).abs() > 1e-9 || c < 1.0 {
            return Err(Error::config(format!(
                "cache ratio {ratio} gives {exact} files for catalog {}",
                self.workload.catalog_size
            )));
        }
        Ok(c as usize)
    }

    /// A simulation of this configuration for one seed and policy.
    pub fn simulation(&self, seed: u64, policy: PolicyKind) -> Result<Simulation> {
        let topo = generate_topology(seed, &self.topology)?;
        let workload = Workload::new(seed, topo.n_users(), &self.workload)?;
        Simulation::new(
            seed,
            topo,
            RequestSource::Workload(workload),
            policy,
            &self.sim,
        )
    }
}

fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// One training-then-evaluation run.
#[derive(Clone, Debug)]
pub struct PointRun {
    pub seed: u64,
    pub policy: PolicyKind,
    /// Mean per-cycle η over the evaluation window.
    pub eta: f64,
    pub log: Vec<CycleRecord>,
    pub simulation: Simulation,
}

/// Trains for `train_cycles`, then measures mean η over the evaluation
/// window. Baselines simply keep running; there is nothing to freeze.
pub fn run_point(cfg: &ExperimentConfig, seed: u64, policy: PolicyKind) -> Result<PointRun> {
    let mut sim = cfg.simulation(seed, policy)?;
    let mut log = sim.run(cfg.train_cycles(), Mode::Train)?;
    let eval = sim.run(cfg.eval_cycles(), Mode::Eval)?;
    let window = if eval.is_empty() { &log[..] } else { &eval[..] };
    let eta = window.iter().map(|r| r.eta).sum::<f64>() / window.len().max(1) as f64;
    log.extend(eval);
    Ok(PointRun {
        seed,
        policy,
        eta,
        log,
        simulation: sim,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: f64,
    pub policy: PolicyKind,
    pub seed: u64,
    pub eta: f64,
}

/// Per-(axis, policy) mean η with a normal-approximation 95% half-width.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub axis: f64,
    pub policy: PolicyKind,
    pub mean: f64,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub axis_name: String,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn mean(&self, axis: f64, policy: PolicyKind) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.axis == axis && r.policy == policy)
            .map(|r| r.eta)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn axis_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !v.contains(&r.axis) {
                v.push(r.axis);
            }
        }
        v
    }

    pub fn policies(&self) -> Vec<PolicyKind> {
        let mut v: Vec<PolicyKind> = self.rows.iter().map(|r| r.policy).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn summary(&self) -> Vec<SweepSummary> {
        let mut out = Vec::new();
        for axis in self.axis_values() {
            for policy in self.policies() {
                let v: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.axis == axis && r.policy == policy)
                    .map(|r| r.eta)
                    .collect();
                if v.is_empty() {
                    continue;
                }
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let var = if v.len() > 1 {
                    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                out.push(SweepSummary {
                    axis,
                    policy,
                    mean,
                    half_width: 1.96 * (var / n).sqrt(),
                });
            }
        }
        out
    }

    /// `axis,policy,seed,eta`, one row per point.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>> {
        csv::Reader::from_reader(input)
            .deserialize()
            .map(|r| r.map_err(Error::from))
            .collect()
    }

    pub fn to_svg(&self, title: &str) -> String {
        let series: Vec<Series> = self
            .policies()
            .into_iter()
            .map(|p| Series {
                name: p.to_string(),
                points: self
                    .axis_values()
                    .into_iter()
                    .filter_map(|a| self.mean(a, p).map(|m| (a, m)))
                    .collect(),
            })
            .collect();
        line_chart_svg(title, &self.axis_name, "eta (%)", &series)
    }
}

fn sweep<F>(
    axis_name: &str,
    axes: &[f64],
    seeds: &[u64],
    policies: &[PolicyKind],
    point: F,
) -> Result<SweepResult>
where
    F: Fn(f64, u64, PolicyKind) -> Result<f64> + Sync,
{
    let jobs: Vec<(f64, PolicyKind, u64)> = axes
        .iter()
        .flat_map(|&a| {
            policies
                .iter()
                .flat_map(move |&p| seeds.iter().map(move |&s| (a, p, s)))
        })
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(axis, policy, seed)| {
            Ok(SweepRow {
                axis,
                policy,
                seed,
                eta: point(axis, seed, policy)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        axis_name: axis_name.to_string(),
        rows,
    })
}

/// η against the Zipf exponent at fixed capacity.
pub fn run_beta_sweep(
    cfg: &ExperimentConfig,
    base_seed: u64,
    policies: &[PolicyKind],
) -> Result<SweepResult> {
    cfg.validate()?;
    sweep(
        "beta",
        &cfg.beta_values,
        &cfg.seeds(base_seed),
        policies,
        |beta, seed, policy| {
            let mut c = cfg.clone();
            c.workload.beta = beta;
            c.workload.drift.enabled = false;
            Ok(run_point(&c, seed, policy)?.eta)
        },
    )
}

/// η against the cache ratio `capacity / catalog_size`.
pub fn run_cache_ratio_sweep(
    cfg: &ExperimentConfig,
    base_seed: u64,
    policies: &[PolicyKind],
) -> Result<SweepResult> {
    cfg.validate()?;
    for &r in &cfg.cache_ratios {
        cfg.capacity_for_ratio(r)?;
    }
    sweep(
        "sigma",
        &cfg.cache_ratios,
        &cfg.seeds(base_seed),
        policies,
        |ratio, seed, policy| {
            let mut c = cfg.clone();
            c.sim.capacity = c.capacity_for_ratio(ratio)?;
            c.workload.drift.enabled = false;
            Ok(run_point(&c, seed, policy)?.eta)
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub cycle: u64,
    pub policy: PolicyKind,
    pub eta_bar: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftResult {
    /// Running mean of η, averaged over seeds, per policy in policy order.
    pub series: Vec<(PolicyKind, Vec<f64>)>,
    /// Per-cycle η averaged over seeds.
    pub instantaneous: Vec<(PolicyKind, Vec<f64>)>,
    /// Change points of each seed (identical across policies).
    pub epochs: Vec<(u64, Vec<EpochInfo>)>,
}

impl DriftResult {
    pub fn eta_bar(&self, policy: PolicyKind) -> Option<&[f64]> {
        self.series
            .iter()
            .find(|(p, _)| *p == policy)
            .map(|(_, s)| &s[..])
    }

    pub fn eta(&self, policy: PolicyKind) -> Option<&[f64]> {
        self.instantaneous
            .iter()
            .find(|(p, _)| *p == policy)
            .map(|(_, s)| &s[..])
    }

    /// Every `stride`-th cycle plus the last, as `cycle,policy,eta_bar`.
    pub fn rows(&self, stride: u64) -> Vec<DriftRow> {
        let stride = stride.max(1);
        let mut rows = Vec::new();
        for (policy, s) in &self.series {
            for (t, &v) in s.iter().enumerate() {
                let t = t as u64;
                if (t + 1).is_multiple_of(stride) || t + 1 == s.len() as u64 {
                    rows.push(DriftRow {
                        cycle: t,
                        policy: *policy,
                        eta_bar: v,
                    });
                }
            }
        }
        rows
    }

    pub fn write_csv<W: Write>(&self, out: W, stride: u64) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in self.rows(stride) {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_svg(&self, title: &str, stride: u64) -> String {
        let series: Vec<Series> = self
            .series
            .iter()
            .map(|(p, s)| Series {
                name: p.to_string(),
                points: s
                    .iter()
                    .enumerate()
                    .filter(|(t, _)| (*t as u64 + 1).is_multiple_of(stride.max(1)))
                    .map(|(t, &v)| (t as f64, v))
                    .collect(),
            })
            .collect();
        line_chart_svg(title, "cycle", "running mean eta (%)", &series)
    }
}

/// Popularity changes every `drift.period` cycles; every policy, the learned
/// one included, keeps adapting online for the whole run.
pub fn run_drift_experiment(
    cfg: &ExperimentConfig,
    base_seed: u64,
    policies: &[PolicyKind],
) -> Result<DriftResult> {
    cfg.validate()?;
    let mut c = cfg.clone();
    c.workload.drift.enabled = true;
    c.workload.drift.period = cfg.drift.period;
    c.workload.drift.beta_min = cfg.drift.beta_min;
    c.workload.drift.beta_max = cfg.drift.beta_max;
    let n = cfg.drift.period * cfg.drift.epochs;
    let seeds = cfg.seeds(base_seed);
    let jobs: Vec<(PolicyKind, u64)> = policies
        .iter()
        .flat_map(|&p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(policy, seed)| {
            let mut sim = c.simulation(seed, policy)?;
            let log = sim.run(n, Mode::Train)?;
            Ok((
                log.iter().map(|r| r.eta).collect::<Vec<f64>>(),
                sim.epochs().to_vec(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut series = Vec::new();
    let mut instantaneous = Vec::new();
    for (k, &policy) in policies.iter().enumerate() {
        let group = &runs[k * seeds.len()..(k + 1) * seeds.len()];
        let mean: Vec<f64> = (0..n as usize)
            .map(|t| group.iter().map(|(eta, _)| eta[t]).sum::<f64>() / seeds.len() as f64)
            .collect();
        series.push((policy, running_average(&mean)));
        instantaneous.push((policy, mean));
    }
    let epochs = seeds
        .iter()
        .zip(&runs)
        .map(|(&s, (_, e))| (s, e.clone()))
        .collect();
    Ok(DriftResult {
        series,
        instantaneous,
        epochs,
    })
}

/// Records the request stream of one seed, for later replay.
pub fn record_trace(cfg: &ExperimentConfig, seed: u64, n_cycles: u64) -> Result<RequestTrace> {
    let topo = generate_topology(seed, &cfg.topology)?;
    let mut workload = Workload::new(seed, topo.n_users(), &cfg.workload)?;
    RequestTrace::record(&mut workload, n_cycles)
}

/// `cycle,reward,td_error,eta,hits`; the learning columns are empty for baselines.
pub fn write_training_log<W: Write>(log: &[CycleRecord], out: W) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        cycle: u64,
        reward: Option<f64>,
        td_error: Option<f64>,
        eta: f64,
        hits: usize,
    }
    let mut w = csv::Writer::from_writer(out);
    for r in log {
        w.serialize(Row {
            cycle: r.cycle,
            reward: r.reward,
            td_error: r.td_error,
            eta: r.eta,
            hits: r.hits,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

/// A plain SVG line chart with linear axes and a legend.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 400.0, 60.0, 120.0, 40.0, 50.0);
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    y0 = y0.min(0.0);
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    svg += &format!(
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        escape(title)
    );
    svg += &format!(
        "<line x1=\"{left}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{0}\" stroke=\"black\"/>\n",
        h - bottom,
        w - right
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        svg += &format!(
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            px(fx),
            h - bottom + 16.0,
            tick(fx)
        );
        svg += &format!(
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            left - 6.0,
            py(fy) + 4.0,
            tick(fy)
        );
    }
    svg += &format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (left + w - right) / 2.0,
        h - 12.0,
        escape(x_label)
    );
    svg += &format!(
        "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
        (top + h - bottom) / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        svg += &format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            path.join(" ")
        );
        let ly = top + 16.0 * i as f64;
        svg += &format!(
            "<line x1=\"{0}\" y1=\"{ly}\" x2=\"{1}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{2}\" y=\"{3}\">{4}</text>\n",
            w - right + 10.0,
            w - right + 30.0,
            w - right + 36.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg += "</svg>\n";
    svg
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::desk();
        cfg.n_cycles = 60;
        cfg.n_seeds = 2;
        cfg.beta_values = vec![0.5, 1.5];
        cfg.cache_ratios = vec![0.1, 1.0];
        cfg.drift.period = 30;
        cfg.drift.epochs = 2;
        cfg
    }

    #[test]
    fn toml_overlay_keeps_unset_fields() {
        let cfg = ExperimentConfig::from_toml_over(
            Scale::Desk,
            "n_cycles = 77\n[workload]\nbeta = 0.7\n[sim.hyperparams]\nactor_rate = 0.01\n",
        )
        .unwrap();
        let desk = ExperimentConfig::desk();
        assert_eq!(cfg.n_cycles, 77);
        assert_eq!(cfg.workload.beta, 0.7);
        assert_eq!(cfg.workload.catalog_size, desk.workload.catalog_size);
        assert_eq!(cfg.sim.hyperparams.actor_rate, 0.01);
        assert_eq!(cfg.sim.hyperparams.gamma, desk.sim.hyperparams.gamma);
        assert!(ExperimentConfig::from_toml_over(Scale::Desk, "bogus = 1").is_err());
    }

    #[test]
    fn presets_round_trip_through_toml() {
        for scale in [Scale::Desk, Scale::Paper] {
            let cfg = ExperimentConfig::preset(scale);
            let text = cfg.to_toml().unwrap();
            assert_eq!(
                ExperimentConfig::from_toml_over(Scale::Desk, &text).unwrap(),
                cfg
            );
        }
    }

    #[test]
    fn cache_ratio_must_be_integral() {
        let cfg = ExperimentConfig::desk();
        assert_eq!(cfg.capacity_for_ratio(0.1).unwrap(), 5);
        assert_eq!(cfg.capacity_for_ratio(1.0).unwrap(), 50);
        assert!(cfg.capacity_for_ratio(0.03).is_err());
    }

    #[test]
    fn beta_sweep_has_one_row_per_point() {
        let cfg = tiny();
        let r = run_beta_sweep(&cfg, 10, &PolicyKind::ALL).unwrap();
        assert_eq!(r.rows.len(), 2 * 4 * 2);
        assert_eq!(r.axis_values(), vec![0.5, 1.5]);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("axis,policy,seed,eta\n"));
        assert_eq!(SweepResult::read_csv(&buf[..]).unwrap(), r.rows);
        assert!(r.to_svg("t").contains("<polyline"));
    }

    #[test]
    fn sweeps_are_deterministic() {
        let cfg = tiny();
        let a = run_cache_ratio_sweep(&cfg, 3, &[PolicyKind::Marl, PolicyKind::Lfu]).unwrap();
        let b = run_cache_ratio_sweep(&cfg, 3, &[PolicyKind::Marl, PolicyKind::Lfu]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn drift_rows_and_epochs() {
        let cfg = tiny();
        let r = run_drift_experiment(&cfg, 1, &[PolicyKind::Lru, PolicyKind::Lfu]).unwrap();
        assert_eq!(r.eta_bar(PolicyKind::Lru).unwrap().len(), 60);
        for (_, epochs) in &r.epochs {
            assert_eq!(epochs.len(), 2);
            assert_eq!(epochs[1].start_cycle, 30);
        }
        let rows = r.rows(10);
        assert_eq!(rows.len(), 2 * 6);
        assert_eq!(rows[5].cycle, 59);
    }
}
