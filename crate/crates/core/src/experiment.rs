//! Experiment harness: run configuration, the closed perception-action loop,
//! batches, sweeps and CSV export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{aggregate, epistemic_map, Aggregate, MapPoint, RunStats, SimTrace, TickRecord};
use crate::belief::{effective_sample_size, filter_step, kish_effective_sample_size, BeliefEnsemble, ResampleTrigger};
use crate::error::{Error, Result};
use crate::model::ActionVector;
use crate::planner::{plan, PlannerConfig};
use crate::rng::{label, run_seed, Stream};
use crate::scenario::{OcclusionModel, OcclusionScene, Scenario, TimeshareModel, TimeshareScene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Occlusion,
    Timeshare,
}

/// Ego-pose grid for the epistemic map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub x_step: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub y_step: f64,
    /// Belief rows drawn per grid point.
    pub rows: usize,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig { x_min: 0.0, x_max: 44.0, x_step: 1.0, y_min: -1.5, y_max: 1.5, y_step: 0.25, rows: 100 }
    }
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

impl MapConfig {
    pub fn xs(&self) -> Vec<f64> {
        grid(self.x_min, self.x_max, self.x_step)
    }

    pub fn ys(&self) -> Vec<f64> {
        grid(self.y_min, self.y_max, self.y_step)
    }
}

fn one() -> usize {
    1
}

fn default_particles() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    pub scenario: ScenarioKind,
    pub seed: u64,
    #[serde(default = "one")]
    pub runs: usize,
    /// Belief particle count N.
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default)]
    pub resample: ResampleTrigger,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub occlusion: OcclusionScene,
    #[serde(default)]
    pub timeshare: TimeshareScene,
    /// Dotted parameter path to the values it takes in a sweep.
    #[serde(default)]
    pub sweep: BTreeMap<String, Vec<toml::Value>>,
    #[serde(default)]
    pub map: MapConfig,
}

/// Embedded presets, one per simulation.
pub const PRESETS: [(&str, &str); 8] = [
    ("1a", include_str!("../presets/1a.toml")),
    ("1b", include_str!("../presets/1b.toml")),
    ("1c", include_str!("../presets/1c.toml")),
    ("1d", include_str!("../presets/1d.toml")),
    ("2a-baseline", include_str!("../presets/2a-baseline.toml")),
    ("2a-vts", include_str!("../presets/2a-vts.toml")),
    ("2b-narrow", include_str!("../presets/2b-narrow.toml")),
    ("2b-sweep", include_str!("../presets/2b-sweep.toml")),
];

pub fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

/// Parse `text` and apply a `key=value` override.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Set `path` (dot separated) in `table`, creating intermediate tables.
pub fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Config(format!("empty key `{path}`")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| Error::Config(format!("`{p}` in `{path}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_table(toml::from_str(text)?)
    }

    /// Parse with `key=value` overrides applied on top of `text`.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text)?;
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            set_path(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: RunConfig = toml::Value::Table(table.clone()).try_into()?;
        let foreign = match cfg.scenario {
            ScenarioKind::Occlusion => "timeshare",
            ScenarioKind::Timeshare => "occlusion",
        };
        if table.contains_key(foreign) {
            return Err(Error::Config(format!("`{foreign}` parameters do not apply to a {:?} run", cfg.scenario)));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Result<Self> {
        Self::from_toml(preset_text(name)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.particles < 2 {
            return Err(Error::Config("particles must be at least 2".into()));
        }
        match self.scenario {
            ScenarioKind::Occlusion => self.occlusion.validate(),
            ScenarioKind::Timeshare => self.timeshare.validate(),
        }
    }

    /// The configuration as TOML, without scene parameters of the other
    /// scenario.
    pub fn to_toml(&self) -> Result<String> {
        let mut v = toml::Table::try_from(self)?;
        v.remove(match self.scenario {
            ScenarioKind::Occlusion => "timeshare",
            ScenarioKind::Timeshare => "occlusion",
        });
        if self.sweep.is_empty() {
            v.remove("sweep");
        }
        Ok(toml::to_string(&v)?)
    }

    /// Configuration of one sweep cell: `assignments` applied, axes cleared.
    pub fn with_assignments(&self, assignments: &[(String, toml::Value)]) -> Result<Self> {
        let mut table = toml::Table::try_from(self)?;
        table.remove(match self.scenario {
            ScenarioKind::Occlusion => "timeshare",
            ScenarioKind::Timeshare => "occlusion",
        });
        table.remove("sweep");
        for (k, v) in assignments {
            set_path(&mut table, k, v.clone())?;
        }
        Self::from_table(table)
    }
}

fn record<M: Scenario<f64>>(
    model: &M,
    tick: usize,
    state: &crate::model::StateVector<f64>,
    obs: &crate::model::Observation<f64>,
    action: &ActionVector<f64>,
    belief: &BeliefEnsemble<f64>,
    efe: Option<crate::efe::EfeBreakdown<f64>>,
) -> TickRecord {
    TickRecord {
        tick,
        time: tick as f64 * model.dt(),
        state: state.values().to_vec(),
        observation: obs.slots.clone(),
        action: action.continuous.clone(),
        gaze_action: action.gaze,
        belief: belief.summary(model.state_schema()),
        efe,
    }
}

/// Algorithm loop for one episode: plan, act on the environment, observe,
/// update the belief.
pub fn simulate<M: Scenario<f64>>(model: &M, cfg: &RunConfig, seed: u64, name: &str) -> Result<SimTrace> {
    let root = Stream::new(seed);
    let mut env_rng = root.child(label::ENVIRONMENT).rng();
    let mut belief_rng = root.child(label::BELIEF).rng();

    let mut state = model.initial_state();
    let mut obs = model.sample_observation(&state, &mut env_rng);
    let mut belief = model.initial_belief(cfg.particles).reweight(&obs, model, 0)?;
    if resample_due(&belief, cfg.resample) {
        belief = belief.systematic_resample(&mut belief_rng);
    }
    let idle = ActionVector::new(vec![0.0; model.action_spec().dims()], None);
    let mut ticks = vec![record(model, 0, &state, &obs, &idle, &belief, None)];

    let mut previous = None;
    for t in 1..=model.ticks() {
        let outcome = plan(&belief, model, &cfg.planner, root.path(&[label::PLANNER, t as u64]), previous.as_ref())?;
        let action = outcome.action.clone();
        state = model.transition(&state, &action, &mut env_rng);
        obs = model.sample_observation(&state, &mut env_rng);
        belief = filter_step(&belief, &action, &obs, model, &mut belief_rng, cfg.resample, t)?;
        ticks.push(record(model, t, &state, &obs, &action, &belief, Some(outcome.breakdown)));
        previous = Some(outcome.distribution);
    }

    let names = |s: &crate::model::Schema| s.names().map(String::from).collect();
    Ok(SimTrace {
        scenario: name.to_string(),
        dt: model.dt(),
        lane_width: model.lane_width(),
        state_names: names(model.state_schema()),
        observation_names: names(model.observation_schema()),
        action_names: model.action_spec().names.clone(),
        probes: model.probes(),
        ticks,
    })
}

fn resample_due(b: &BeliefEnsemble<f64>, trigger: ResampleTrigger) -> bool {
    let ess = match trigger {
        ResampleTrigger::Kish => kish_effective_sample_size(&b.weights),
        ResampleTrigger::Literal => effective_sample_size(&b.weights),
    };
    ess <= b.len() as f64 / 2.0
}

/// Run one episode of `cfg` with the given per-run seed.
pub fn run_episode(cfg: &RunConfig, seed: u64) -> Result<SimTrace> {
    cfg.validate()?;
    let name = if cfg.name.is_empty() { format!("{:?}", cfg.scenario).to_lowercase() } else { cfg.name.clone() };
    match cfg.scenario {
        ScenarioKind::Occlusion => simulate(&OcclusionModel::new(cfg.occlusion.clone())?, cfg, seed, &name),
        ScenarioKind::Timeshare => simulate(&TimeshareModel::new(cfg.timeshare.clone())?, cfg, seed, &name),
    }
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub seeds: Vec<u64>,
    pub traces: Vec<SimTrace>,
    pub stats: Vec<RunStats>,
    pub aggregate: Vec<Aggregate>,
}

impl BatchResult {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.aggregate.iter().find(|a| a.metric == name).map(|a| a.mean)
    }
}

/// `cfg.runs` episodes with seeds derived from `cfg.seed`, run concurrently.
pub fn run_batch(cfg: &RunConfig) -> Result<BatchResult> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.runs).map(|r| run_seed(cfg.seed, r)).collect();
    let results: Vec<Result<SimTrace>> = seeds.par_iter().map(|&s| run_episode(cfg, s)).collect();
    let mut traces = Vec::with_capacity(results.len());
    for (run, r) in results.into_iter().enumerate() {
        traces.push(r.map_err(|e| Error::Episode { run, source: Box::new(e) })?);
    }
    let stats: Vec<RunStats> = traces.iter().map(RunStats::from_trace).collect();
    let aggregate = aggregate(&stats, Stream::new(cfg.seed).child(label::ANALYSIS));
    Ok(BatchResult { seeds, traces, stats, aggregate })
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub assignments: Vec<(String, toml::Value)>,
    pub batch: BatchResult,
}

/// Cartesian product of the sweep axes in `cfg`, one batch per cell.
pub fn sweep_cells(cfg: &RunConfig) -> Result<Vec<Vec<(String, toml::Value)>>> {
    if cfg.sweep.is_empty() {
        return Err(Error::Config("sweep needs at least one axis".into()));
    }
    let mut cells: Vec<Vec<(String, toml::Value)>> = vec![Vec::new()];
    for (k, values) in &cfg.sweep {
        if values.is_empty() {
            return Err(Error::Config(format!("sweep axis `{k}` has no values")));
        }
        cells = cells
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((k.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    Ok(cells)
}

pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<SweepCell>> {
    sweep_cells(cfg)?
        .into_iter()
        .map(|assignments| {
            let cell = cfg.with_assignments(&assignments)?;
            Ok(SweepCell { assignments, batch: run_batch(&cell)? })
        })
        .collect()
}

/// Epistemic value over the configured ego-pose grid, from the scenario's
/// initial belief. Occlusion scenario only.
pub fn run_map(cfg: &RunConfig) -> Result<Vec<MapPoint>> {
    if cfg.scenario != ScenarioKind::Occlusion {
        return Err(Error::Config("map is defined for the occlusion scenario".into()));
    }
    let model = OcclusionModel::new(cfg.occlusion.clone())?;
    let belief = model.initial_belief(cfg.particles);
    Ok(epistemic_map(
        &model,
        &belief,
        |s, x, y| model.with_ego_pose(s, x, y),
        &cfg.map.xs(),
        &cfg.map.ys(),
        cfg.map.rows,
        Stream::new(cfg.seed).child(label::ANALYSIS),
    ))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Trace as CSV with a fixed column layout.
pub fn trace_csv(trace: &SimTrace) -> String {
    let mut header: Vec<String> = vec!["tick".into(), "time".into()];
    header.extend(trace.state_names.iter().cloned());
    header.extend(trace.observation_names.iter().cloned());
    header.extend(trace.action_names.iter().map(|n| format!("act_{n}")));
    header.push("act_gaze".into());
    for (i, n) in trace.state_names.iter().enumerate() {
        header.push(format!("belief_mean_{n}"));
        header.push(format!("belief_sd_{n}"));
        if let Some(t) = trace.ticks.first() {
            for (code, _) in &t.belief.slots[i].masses {
                header.push(format!("belief_mass_{n}_{code}"));
            }
        }
    }
    header.extend(["ess", "efe_total", "pragmatic", "epistemic", "pragmatic_display"].map(String::from));

    let mut out = header.join(",");
    out.push('\n');
    for t in &trace.ticks {
        let mut row: Vec<String> = vec![t.tick.to_string(), t.time.to_string()];
        row.extend(t.state.iter().map(|v| v.to_string()));
        row.extend(t.observation.iter().map(|v| cell(*v)));
        row.extend(t.action.iter().map(|v| v.to_string()));
        row.push(t.gaze_action.map(|g| g.code().to_string()).unwrap_or_default());
        for s in &t.belief.slots {
            row.push(s.mean.to_string());
            row.push(s.sd.to_string());
            row.extend(s.masses.iter().map(|(_, m)| m.to_string()));
        }
        row.push(t.belief.ess.to_string());
        match &t.efe {
            Some(e) => {
                row.push(e.total.to_string());
                row.push(e.pragmatic_sum().to_string());
                row.push(e.epistemic_sum().to_string());
                row.push(e.pragmatic_display_sum().to_string());
            }
            None => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn stats_csv(seeds: &[u64], stats: &[RunStats]) -> String {
    let mut out = format!("run,seed,{}\n", RunStats::COLUMNS.join(","));
    for (i, (seed, s)) in seeds.iter().zip(stats).enumerate() {
        let vals: Vec<String> = s.values().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{i},{seed},{}", vals.join(","));
    }
    out
}

pub fn aggregate_csv(agg: &[Aggregate]) -> String {
    let mut out = String::from("metric,n,mean,ci_low,ci_high\n");
    for a in agg {
        let _ = writeln!(out, "{},{},{},{},{}", a.metric, a.n, a.mean, a.ci_low, a.ci_high);
    }
    out
}

fn value_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Long format: one row per cell and metric.
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let axes: Vec<String> =
        cells.first().map(|c| c.assignments.iter().map(|(k, _)| k.clone()).collect()).unwrap_or_default();
    let mut out = format!("{},metric,n,mean,ci_low,ci_high\n", axes.join(","));
    for c in cells {
        let keys: Vec<String> = c.assignments.iter().map(|(_, v)| value_text(v)).collect();
        for a in &c.batch.aggregate {
            let _ = writeln!(out, "{},{},{},{},{},{}", keys.join(","), a.metric, a.n, a.mean, a.ci_low, a.ci_high);
        }
    }
    out
}

pub fn map_csv(points: &[MapPoint]) -> String {
    let mut out = String::from("x,y,value\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.x, p.y, p.value);
    }
    out
}

fn meta_toml(cfg: &RunConfig, run: usize, seed: u64) -> Result<String> {
    let mut meta = toml::Table::new();
    meta.insert("run".into(), toml::Value::Integer(run as i64));
    // seeds are full 64-bit values; keep them exact as strings
    meta.insert("seed".into(), toml::Value::String(seed.to_string()));
    meta.insert("master_seed".into(), toml::Value::String(cfg.seed.to_string()));
    meta.insert("version".into(), toml::Value::String(env!("CARGO_PKG_VERSION").into()));
    meta.insert("config".into(), toml::Value::Table(toml::from_str(&cfg.to_toml()?)?));
    Ok(toml::to_string(&meta)?)
}

/// Write traces, metadata sidecars, per-run stats and the aggregate table.
pub fn write_batch(dir: &Path, cfg: &RunConfig, batch: &BatchResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (run, (trace, &seed)) in batch.traces.iter().zip(&batch.seeds).enumerate() {
        fs::write(dir.join(format!("run_{run:03}.csv")), trace_csv(trace))?;
        fs::write(dir.join(format!("run_{run:03}.meta.toml")), meta_toml(cfg, run, seed)?)?;
    }
    fs::write(dir.join("stats.csv"), stats_csv(&batch.seeds, &batch.stats))?;
    fs::write(dir.join("aggregate.csv"), aggregate_csv(&batch.aggregate))?;
    Ok(())
}

pub fn write_sweep(dir: &Path, cfg: &RunConfig, cells: &[SweepCell]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("sweep.csv"), sweep_csv(cells))?;
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    Ok(())
}
