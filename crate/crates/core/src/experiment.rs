//! Parameter sweeps, per-run metrics CSV, per-cell aggregates and
//! cross-algorithm comparison.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config_io::{self, LoadError};
use crate::engine::run_simulation;
use crate::model::{Algorithm, ConfigError, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SweepAxis {
    NUavs,
    MaxSpeed,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::NUavs => "N_UAVS",
            SweepAxis::MaxSpeed => "MAX_SPEED",
        }
    }
}

/// A resolved sweep: every row's config is `cell_config(base_config, axis, value, seed, algorithm)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub base_config: SimConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    axis: SweepAxis,
    values: Vec<f64>,
    seeds: Vec<u64>,
    algorithms: Vec<Algorithm>,
    base: Option<String>,
    base_config: Option<SimConfig>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), LoadError> {
        let bad = |m: &str| Err(LoadError::InvalidSweep(m.to_string()));
        if self.values.is_empty() {
            return bad("values must be nonempty");
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("values must be strictly increasing");
        }
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty");
        }
        if self.algorithms.is_empty() {
            return bad("algorithms must be nonempty");
        }
        for v in &self.values {
            let ok = match self.axis {
                SweepAxis::NUavs => *v >= 1.0 && v.fract() == 0.0 && *v <= u32::MAX as f64,
                SweepAxis::MaxSpeed => v.is_finite() && *v > 0.0,
            };
            if !ok {
                return Err(LoadError::InvalidSweep(format!("value {v} is not valid for axis {}", self.axis.as_str())));
            }
        }
        self.base_config.validate()?;
        for v in &self.values {
            cell_config(&self.base_config, self.axis, *v, self.seeds[0], self.algorithms[0]).validate()?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("SweepSpec always serializes")
    }

    pub fn runs(&self) -> usize {
        self.values.len() * self.seeds.len() * self.algorithms.len()
    }
}

/// Parses a sweep file. A `base = "path"` key is resolved against `base_dir`
/// (the sweep file's directory); an inline `[base_config]` table is the
/// alternative; with neither, the default config is the base.
pub fn parse_sweep(text: &str, base_dir: Option<&Path>) -> Result<SweepSpec, LoadError> {
    let raw: SweepFile = toml::from_str(text).map_err(|e| LoadError::Parse(e.to_string()))?;
    let base_config = match (raw.base, raw.base_config) {
        (Some(_), Some(_)) => return Err(LoadError::InvalidSweep("give either `base` or `[base_config]`, not both".into())),
        (Some(p), None) => {
            let dir = base_dir.ok_or_else(|| LoadError::InvalidSweep("`base` needs a sweep file location".into()))?;
            config_io::load_config(&dir.join(p))?
        }
        (None, Some(c)) => c,
        (None, None) => SimConfig::default(),
    };
    let spec = SweepSpec { axis: raw.axis, values: raw.values, seeds: raw.seeds, algorithms: raw.algorithms, base_config };
    spec.validate()?;
    Ok(spec)
}

pub fn load_sweep(path: &Path) -> Result<SweepSpec, LoadError> {
    let text = config_io::read_file(path)?;
    parse_sweep(&text, Some(path.parent().unwrap_or(Path::new("."))))
}

/// The configuration of one sweep cell. Along `MAX_SPEED`, the mean speed,
/// speed noise and acceleration cap scale with the maximum speed.
pub fn cell_config(base: &SimConfig, axis: SweepAxis, value: f64, seed: u64, algorithm: Algorithm) -> SimConfig {
    let mut c = base.clone();
    match axis {
        SweepAxis::NUavs => c.n_uavs = value as u32,
        SweepAxis::MaxSpeed => {
            let k = value / base.mobility.max_speed;
            c.mobility.max_speed = value;
            c.mobility.gm_mean_speed *= k;
            c.mobility.gm_sigma *= k;
            c.mobility.max_accel *= k;
        }
    }
    c.seed = seed;
    c.algorithm = algorithm;
    c
}

/// Named sweeps along the two experiment axes: `fig2`/`fig3` vary the fleet
/// size 40..140 at 60 m/s, `fig4`/`fig5` fix 100 UAVs and vary the maximum
/// speed 10..60 m/s. 20 seeds, all three algorithms.
pub fn preset(name: &str) -> Option<SweepSpec> {
    let seeds: Vec<u64> = (1..=20).collect();
    let base = SimConfig::default();
    match name {
        "fig2" | "fig3" => Some(SweepSpec {
            axis: SweepAxis::NUavs,
            values: vec![40.0, 60.0, 80.0, 100.0, 120.0, 140.0],
            seeds,
            algorithms: Algorithm::ALL.to_vec(),
            base_config: SimConfig { mobility: crate::model::MobilitySpec { max_speed: 60.0, ..base.mobility }, ..base },
        }),
        "fig4" | "fig5" => Some(SweepSpec {
            axis: SweepAxis::MaxSpeed,
            values: vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
            seeds,
            algorithms: Algorithm::ALL.to_vec(),
            base_config: SimConfig { n_uavs: 100, ..base },
        }),
        _ => None,
    }
}

pub const PRESETS: [&str; 4] = ["fig2", "fig3", "fig4", "fig5"];

/// One `metrics.csv` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub n_uavs: u32,
    pub max_speed: f64,
    pub avg_delay_s: Option<f64>,
    pub delivery_ratio: Option<f64>,
    pub avg_energy_j: Option<f64>,
    pub avg_ch_duration_s: Option<f64>,
    pub avg_cm_switches: Option<f64>,
}

pub const METRICS_HEADER: &str =
    "algorithm,seed,n_uavs,max_speed,avg_delay_s,delivery_ratio,avg_energy_j,avg_ch_duration_s,avg_cm_switches";

impl MetricsRow {
    pub fn from_run(cfg: &SimConfig, s: &crate::metrics::MetricsSummary) -> Self {
        MetricsRow {
            algorithm: cfg.algorithm,
            seed: cfg.seed,
            n_uavs: cfg.n_uavs,
            max_speed: cfg.mobility.max_speed,
            avg_delay_s: s.avg_delay,
            delivery_ratio: s.delivery_ratio,
            avg_energy_j: s.avg_energy,
            avg_ch_duration_s: s.avg_ch_duration,
            avg_cm_switches: s.avg_cm_switches,
        }
    }

    pub fn axis_value(&self, axis: SweepAxis) -> f64 {
        match axis {
            SweepAxis::NUavs => self.n_uavs as f64,
            SweepAxis::MaxSpeed => self.max_speed,
        }
    }

    pub fn metric(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Delay => self.avg_delay_s,
            Metric::DeliveryRatio => self.delivery_ratio,
            Metric::Energy => self.avg_energy_j,
            Metric::ChDuration => self.avg_ch_duration_s,
            Metric::CmSwitches => self.avg_cm_switches,
        }
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("run {algorithm} seed {seed} at {axis} = {value}: {source}")]
    Run { algorithm: Algorithm, seed: u64, axis: &'static str, value: f64, source: ConfigError },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Runs every (value, seed, algorithm) cell on `workers` threads. Rows come
/// back sorted by (algorithm, axis value, seed) regardless of completion order.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<Vec<MetricsRow>, SweepError> {
    spec.validate()?;
    let mut jobs = Vec::with_capacity(spec.runs());
    for a in &spec.algorithms {
        for v in &spec.values {
            for s in &spec.seeds {
                jobs.push((*a, *v, *s));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let mut rows: Vec<(usize, f64, u64, MetricsRow)> = pool.install(|| {
        jobs.par_iter()
            .map(|(a, v, s)| {
                let cfg = cell_config(&spec.base_config, spec.axis, *v, *s, *a);
                let art = run_simulation(&cfg).map_err(|source| SweepError::Run {
                    algorithm: *a,
                    seed: *s,
                    axis: spec.axis.as_str(),
                    value: *v,
                    source,
                })?;
                let alg_idx = spec.algorithms.iter().position(|x| x == a).unwrap_or(0);
                Ok((alg_idx, *v, *s, MetricsRow::from_run(&cfg, &art.summary)))
            })
            .collect::<Result<Vec<_>, SweepError>>()
    })?;
    rows.sort_by(|x, y| x.3.algorithm.cmp(&y.3.algorithm).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2)).then(x.0.cmp(&y.0)));
    Ok(rows.into_iter().map(|r| r.3).collect())
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(METRICS_HEADER.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn metrics_csv_string(rows: &[MetricsRow]) -> String {
    let mut buf = Vec::new();
    write_metrics_csv(rows, &mut buf).expect("in-memory CSV");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Delay,
    DeliveryRatio,
    Energy,
    ChDuration,
    CmSwitches,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Delay, Metric::DeliveryRatio, Metric::Energy, Metric::ChDuration, Metric::CmSwitches];
    /// The four headline metrics compared across algorithms.
    pub const COMPARED: [Metric; 4] = [Metric::Delay, Metric::Energy, Metric::ChDuration, Metric::CmSwitches];

    /// True when smaller is better.
    pub fn lower_is_better(self) -> bool {
        !matches!(self, Metric::ChDuration | Metric::DeliveryRatio)
    }
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (Some(mean), Some(std))
}

/// Mean and sample standard deviation of every metric for one (algorithm,
/// axis value) cell; absent metric values are skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: Algorithm,
    pub axis: SweepAxis,
    pub axis_value: f64,
    pub runs: usize,
    pub avg_delay_s_mean: Option<f64>,
    pub avg_delay_s_std: Option<f64>,
    pub delivery_ratio_mean: Option<f64>,
    pub delivery_ratio_std: Option<f64>,
    pub avg_energy_j_mean: Option<f64>,
    pub avg_energy_j_std: Option<f64>,
    pub avg_ch_duration_s_mean: Option<f64>,
    pub avg_ch_duration_s_std: Option<f64>,
    pub avg_cm_switches_mean: Option<f64>,
    pub avg_cm_switches_std: Option<f64>,
}

impl AggregateRow {
    pub fn mean(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Delay => self.avg_delay_s_mean,
            Metric::DeliveryRatio => self.delivery_ratio_mean,
            Metric::Energy => self.avg_energy_j_mean,
            Metric::ChDuration => self.avg_ch_duration_s_mean,
            Metric::CmSwitches => self.avg_cm_switches_mean,
        }
    }
}

pub fn aggregate(rows: &[MetricsRow], axis: SweepAxis) -> Vec<AggregateRow> {
    let mut cells: BTreeMap<(Algorithm, u64), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        // f64 order-preserving key for non-negative axis values
        cells.entry((r.algorithm, r.axis_value(axis).to_bits())).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((algorithm, bits), rs)| {
            let col = |m: Metric| mean_std(&rs.iter().filter_map(|r| r.metric(m)).collect::<Vec<_>>());
            let (d, ds) = col(Metric::Delay);
            let (p, ps) = col(Metric::DeliveryRatio);
            let (e, es) = col(Metric::Energy);
            let (c, cs) = col(Metric::ChDuration);
            let (w, ws) = col(Metric::CmSwitches);
            AggregateRow {
                algorithm,
                axis,
                axis_value: f64::from_bits(bits),
                runs: rs.len(),
                avg_delay_s_mean: d,
                avg_delay_s_std: ds,
                delivery_ratio_mean: p,
                delivery_ratio_std: ps,
                avg_energy_j_mean: e,
                avg_energy_j_std: es,
                avg_ch_duration_s_mean: c,
                avg_ch_duration_s_std: cs,
                avg_cm_switches_mean: w,
                avg_cm_switches_std: ws,
            }
        })
        .collect()
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Percent advantage of SEFC over one baseline for one metric in one cell.
/// Positive means SEFC is better: a reduction for delay, energy and
/// switches, an increase for CH duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n_uavs: u32,
    pub max_speed: f64,
    pub baseline: Algorithm,
    pub metric: Metric,
    pub sefc_mean: Option<f64>,
    pub baseline_mean: Option<f64>,
    pub percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompareError {
    #[error("no {0} rows in the metrics file")]
    MissingAlgorithm(Algorithm),
    #[error("no baseline rows to compare SEFC against")]
    NoBaseline,
}

pub fn percent_advantage(metric: Metric, sefc: f64, baseline: f64) -> Option<f64> {
    if baseline == 0.0 {
        return if sefc == 0.0 { Some(0.0) } else { None };
    }
    let p = if metric.lower_is_better() { (baseline - sefc) / baseline } else { (sefc - baseline) / baseline };
    Some(p * 100.0)
}

pub fn compare(rows: &[MetricsRow]) -> Result<Vec<ComparisonRow>, CompareError> {
    type Cell = (u32, u64);
    let mut means: BTreeMap<(Cell, Algorithm), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        means.entry(((r.n_uavs, r.max_speed.to_bits()), r.algorithm)).or_default().push(r);
    }
    if !rows.iter().any(|r| r.algorithm == Algorithm::Sefc) {
        return Err(CompareError::MissingAlgorithm(Algorithm::Sefc));
    }
    if !rows.iter().any(|r| r.algorithm != Algorithm::Sefc) {
        return Err(CompareError::NoBaseline);
    }
    let mean = |rs: &[&MetricsRow], m: Metric| mean_std(&rs.iter().filter_map(|r| r.metric(m)).collect::<Vec<_>>()).0;
    let mut out = Vec::new();
    let cells: Vec<Cell> = {
        let mut c: Vec<Cell> = means.keys().map(|(c, _)| *c).collect();
        c.sort_by(|a, b| a.0.cmp(&b.0).then(f64::from_bits(a.1).total_cmp(&f64::from_bits(b.1))));
        c.dedup();
        c
    };
    for cell in cells {
        let Some(sefc) = means.get(&(cell, Algorithm::Sefc)) else { continue };
        for baseline in [Algorithm::PicaLite, Algorithm::OscaLite] {
            let Some(base) = means.get(&(cell, baseline)) else { continue };
            for metric in Metric::COMPARED {
                let (s, b) = (mean(sefc, metric), mean(base, metric));
                let percent = match (s, b) {
                    (Some(s), Some(b)) => percent_advantage(metric, s, b),
                    _ => None,
                };
                out.push(ComparisonRow {
                    n_uavs: cell.0,
                    max_speed: f64::from_bits(cell.1),
                    baseline,
                    metric,
                    sefc_mean: s,
                    baseline_mean: b,
                    percent,
                });
            }
        }
    }
    Ok(out)
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// side has zero rank variance.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}
