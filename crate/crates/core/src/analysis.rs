//! Trace records and the summary statistics computed from them.

use rand::Rng;

use crate::belief::{BeliefEnsemble, BeliefSummary};
use crate::efe::{evaluate_policy, EfeBreakdown, Policy};
use crate::entropy::predictive_entropy;
use crate::model::{ActionVector, Gaze, GenerativeModel, StateVector};
use crate::rng::{standard_normal, SimRng, Stream};
use crate::scenario::{Probes, TimeshareModel};

/// Default `|δ|` threshold of the steering exceedance count (rad).
pub const STEERING_THRESHOLD: f64 = 0.0025;

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: usize,
    pub time: f64,
    pub state: Vec<f64>,
    pub observation: Vec<Option<f64>>,
    /// Continuous action applied on the way into this tick; zeros at tick 0.
    pub action: Vec<f64>,
    pub gaze_action: Option<Gaze>,
    pub belief: BeliefSummary<f64>,
    /// Breakdown of the selected policy; absent at tick 0.
    pub efe: Option<EfeBreakdown<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub scenario: String,
    pub dt: f64,
    pub lane_width: f64,
    pub state_names: Vec<String>,
    pub observation_names: Vec<String>,
    pub action_names: Vec<String>,
    pub probes: Probes,
    pub ticks: Vec<TickRecord>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn series(&self, slot: usize) -> Vec<f64> {
        self.ticks.iter().map(|t| t.state[slot]).collect()
    }

    pub fn speed(&self) -> Vec<f64> {
        self.series(self.probes.speed)
    }

    pub fn lateral(&self) -> Vec<f64> {
        self.series(self.probes.lateral)
    }

    pub fn steering(&self) -> Option<Vec<f64>> {
        self.probes.steering.map(|s| self.series(s))
    }

    /// On-road flag per tick.
    pub fn gaze_on_road(&self) -> Option<Vec<bool>> {
        self.probes.gaze.map(|g| self.ticks.iter().map(|t| t.state[g] > 0.5).collect())
    }

    /// Belief mass of `code` in the context slot, per tick.
    pub fn context_mass(&self, code: i64) -> Option<Vec<f64>> {
        self.probes.context.map(|c| self.ticks.iter().map(|t| t.belief.mass(c, code)).collect())
    }

    pub fn belief_sd(&self, slot: usize) -> Vec<f64> {
        self.ticks.iter().map(|t| t.belief.slots[slot].sd).collect()
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Population standard deviation.
pub fn population_sd(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Standard deviation of lane position over all ticks (population form).
pub fn sdlp(trace: &SimTrace) -> f64 {
    population_sd(&trace.lateral())
}

/// Number of ticks with `|δ| > threshold`.
pub fn exceedance_count(steer: &[f64], threshold: f64) -> usize {
    steer.iter().filter(|d| d.abs() > threshold).count()
}

/// Steering "reversal" count as a threshold exceedance count on the front
/// wheel angle. Zero for scenarios without a steering angle.
pub fn steering_reversals(trace: &SimTrace, threshold: f64) -> usize {
    trace.steering().map_or(0, |s| exceedance_count(&s, threshold))
}

/// Conventional reversal count: direction changes of the steering angle
/// whose swing between successive extrema is at least `gap`.
pub fn sign_change_reversals(steer: &[f64], gap: f64) -> usize {
    let Some(&first) = steer.first() else { return 0 };
    let (mut lo, mut hi) = (first, first);
    let mut dir = 0i8;
    let mut count = 0;
    for &d in &steer[1..] {
        match dir {
            0 => {
                lo = lo.min(d);
                hi = hi.max(d);
                if hi - lo >= gap {
                    dir = if d == hi { 1 } else { -1 };
                    (lo, hi) = (d, d);
                }
            }
            1 => {
                if d > hi {
                    hi = d;
                } else if hi - d >= gap {
                    count += 1;
                    dir = -1;
                    lo = d;
                }
            }
            _ => {
                if d < lo {
                    lo = d;
                } else if d - lo >= gap {
                    count += 1;
                    dir = 1;
                    hi = d;
                }
            }
        }
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GlanceStats {
    pub count: usize,
    /// Mean off-road run length in seconds; 0 with no glances.
    pub mean_duration: f64,
    pub total_off: f64,
}

/// Maximal runs of off-road ticks.
pub fn glance_stats(on_road: &[bool], dt: f64) -> GlanceStats {
    let mut runs = Vec::new();
    let mut cur = 0usize;
    for &on in on_road {
        if on {
            if cur > 0 {
                runs.push(cur);
            }
            cur = 0;
        } else {
            cur += 1;
        }
    }
    if cur > 0 {
        runs.push(cur);
    }
    let total: usize = runs.iter().sum();
    GlanceStats {
        count: runs.len(),
        mean_duration: if runs.is_empty() { 0.0 } else { total as f64 * dt / runs.len() as f64 },
        total_off: total as f64 * dt,
    }
}

/// Entries into `|y| > lane_width / 2`.
pub fn lane_exits(lateral: &[f64], lane_width: f64) -> usize {
    let half = lane_width / 2.0;
    let mut outside = false;
    let mut n = 0;
    for &y in lateral {
        let now = y.abs() > half;
        if now && !outside {
            n += 1;
        }
        outside = now;
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunStats {
    pub mean_speed: f64,
    pub min_speed: f64,
    pub sdlp: f64,
    pub steering_reversals: usize,
    pub glance_count: usize,
    pub mean_glance_duration: f64,
    pub lane_exits: usize,
}

impl RunStats {
    pub const COLUMNS: [&'static str; 7] =
        ["mean_speed", "min_speed", "sdlp", "steering_reversals", "glance_count", "mean_glance_duration", "lane_exits"];

    pub fn from_trace(trace: &SimTrace) -> Self {
        let speed = trace.speed();
        let glances = trace.gaze_on_road().map(|g| glance_stats(&g, trace.dt)).unwrap_or_default();
        RunStats {
            mean_speed: mean(&speed),
            min_speed: speed.iter().copied().fold(f64::INFINITY, f64::min),
            sdlp: sdlp(trace),
            steering_reversals: steering_reversals(trace, STEERING_THRESHOLD),
            glance_count: glances.count,
            mean_glance_duration: glances.mean_duration,
            lane_exits: lane_exits(&trace.lateral(), trace.lane_width),
        }
    }

    pub fn values(&self) -> [f64; 7] {
        [
            self.mean_speed,
            self.min_speed,
            self.sdlp,
            self.steering_reversals as f64,
            self.glance_count as f64,
            self.mean_glance_duration,
            self.lane_exits as f64,
        ]
    }
}

/// Batch summary of one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Mean with a percentile bootstrap 95% interval.
pub fn bootstrap_mean(metric: &str, xs: &[f64], resamples: usize, rng: &mut SimRng) -> Aggregate {
    let n = xs.len();
    let m = mean(xs);
    if n < 2 {
        return Aggregate { metric: metric.to_string(), n, mean: m, ci_low: m, ci_high: m };
    }
    let mut means: Vec<f64> =
        (0..resamples).map(|_| (0..n).map(|_| xs[rng.random_range(0..n)]).sum::<f64>() / n as f64).collect();
    means.sort_by(|a, b| a.total_cmp(b));
    let at = |q: f64| means[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Aggregate { metric: metric.to_string(), n, mean: m, ci_low: at(0.025), ci_high: at(0.975) }
}

/// Aggregate every [`RunStats`] column over a batch.
pub fn aggregate(stats: &[RunStats], stream: Stream) -> Vec<Aggregate> {
    let mut rng = stream.rng();
    RunStats::COLUMNS
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let xs: Vec<f64> = stats.iter().map(|s| s.values()[k]).collect();
            bootstrap_mean(name, &xs, 2000, &mut rng)
        })
        .collect()
}

/// Selected-policy value per tick, pragmatic truncated for display.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValuePoint {
    pub tick: usize,
    pub pragmatic: f64,
    pub epistemic: f64,
}

pub fn value_decomposition(trace: &SimTrace) -> Vec<ValuePoint> {
    trace
        .ticks
        .iter()
        .filter_map(|t| {
            t.efe.as_ref().map(|e| ValuePoint {
                tick: t.tick,
                pragmatic: e.pragmatic_display_sum(),
                epistemic: e.epistemic_sum(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// One-step epistemic value of observing from each ego pose of a grid.
///
/// `place` moves a belief particle's ego to `(x, y)`. The value is the
/// posterior predictive entropy of the observations made from that pose by
/// `rows` particles drawn from the belief, minus the expected ambiguity.
pub fn epistemic_map<M, F>(
    model: &M,
    belief: &BeliefEnsemble<f64>,
    place: F,
    xs: &[f64],
    ys: &[f64],
    rows: usize,
    stream: Stream,
) -> Vec<MapPoint>
where
    M: GenerativeModel<f64> + ?Sized,
    F: Fn(&StateVector<f64>, f64, f64) -> StateVector<f64>,
{
    let particles = belief.multinomial_resample(rows, &mut stream.rng());
    let schema = model.observation_schema();
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for &y in ys {
        for &x in xs {
            let mut obs_rng = stream.child(1).rng();
            let states: Vec<_> = particles.iter().map(|p| place(p, x, y)).collect();
            let obs: Vec<_> = states.iter().map(|s| model.sample_observation(s, &mut obs_rng)).collect();
            let ambiguity = crate::efe::expected_ambiguity(&states, model);
            out.push(MapPoint { x, y, value: predictive_entropy(&obs, schema) - ambiguity });
        }
    }
    out
}

/// Per-step value of one gaze choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeValue {
    pub pragmatic: f64,
    pub epistemic: f64,
    /// Pragmatic value with the display floor.
    pub pragmatic_display: f64,
}

impl GazeValue {
    pub fn total(&self) -> f64 {
        self.pragmatic + self.epistemic
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffPoint {
    pub dispersion: f64,
    pub on_road: GazeValue,
    pub off_road: GazeValue,
}

/// One-step value of an on-road versus an off-road glance when the belief
/// about lateral position is spread with standard deviation `dispersion`
/// around the lane centre. Both glances are scored on the same particles
/// and the same random stream.
pub fn gaze_tradeoff(
    model: &TimeshareModel<f64>,
    dispersions: &[f64],
    rows: usize,
    stream: Stream,
) -> Vec<TradeoffPoint> {
    let start = model.start_state();
    let mut z_rng = stream.child(0).rng();
    let z: Vec<f64> = (0..rows).map(|_| standard_normal(&mut z_rng)).collect();
    dispersions
        .iter()
        .map(|&sd| {
            let particles: Vec<_> = z.iter().map(|&k| model.with_lateral(&start, sd * k)).collect();
            let value = |gaze| {
                let action = ActionVector::new(vec![0.0, 0.0], Some(gaze));
                let e = evaluate_policy(&Policy::new(vec![action]), &particles, model, &mut stream.child(1).rng());
                GazeValue {
                    pragmatic: e.pragmatic_sum(),
                    epistemic: e.epistemic_sum(),
                    pragmatic_display: e.pragmatic_display_sum(),
                }
            };
            TradeoffPoint { dispersion: sd, on_road: value(Gaze::OnRoad), off_road: value(Gaze::OffRoad) }
        })
        .collect()
}

/// Smallest dispersion at which the on-road glance has the higher total
/// value.
pub fn crossover(points: &[TradeoffPoint]) -> Option<f64> {
    points.iter().find(|p| p.on_road.total() > p.off_road.total()).map(|p| p.dispersion)
}
