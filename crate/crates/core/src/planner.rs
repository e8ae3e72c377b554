//! Cross-entropy-method model predictive control over mixed action
//! sequences: Gaussian per continuous dimension and step, Bernoulli per gaze
//! step, refit separately to the elite policies of each iteration.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::BeliefEnsemble;
use crate::efe::{evaluate_policy, EfeBreakdown, Policy};
use crate::error::{Error, Result};
use crate::model::{ActionSpec, ActionVector, Gaze, GenerativeModel};
use crate::rng::{label, normal, SimRng, Stream};
use crate::scalar::Real;

pub const GAZE_P_MIN: f64 = 0.02;
pub const GAZE_P_MAX: f64 = 0.98;
/// Standard deviation floor as a fraction of each action range.
pub const SD_FLOOR_FRACTION: f64 = 1e-3;

const SAMPLE: u64 = 1;
const EVAL: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Candidate policies per iteration (M).
    pub policies: usize,
    /// Fraction of candidates kept as elites (x).
    pub elite_fraction: f64,
    /// CEM iterations per tick (K).
    pub iterations: usize,
    /// Rollout rows drawn from the belief each tick (Ñ).
    pub planning_particles: usize,
    /// Lookahead steps (H).
    pub horizon: usize,
    /// Start each tick from the previous tick's distribution shifted by one.
    pub warm_start: bool,
    /// Evaluate all candidates of an iteration on the same rollout noise.
    pub common_random_numbers: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            policies: 64,
            elite_fraction: 0.1,
            iterations: 5,
            planning_particles: 100,
            horizon: 20,
            warm_start: false,
            common_random_numbers: true,
        }
    }
}

impl PlannerConfig {
    pub fn elite_count(&self) -> usize {
        (self.policies as f64 * self.elite_fraction + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.elite_count() < 2 {
            return Err(Error::Config(format!(
                "policies × elite_fraction must keep at least 2 elites (got {})",
                self.elite_count()
            )));
        }
        if self.iterations == 0 || self.horizon == 0 || self.planning_particles < 2 {
            return Err(Error::Config("iterations and horizon must be ≥ 1, planning_particles ≥ 2".into()));
        }
        Ok(())
    }
}

/// Per-step sampling distribution over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDistribution<T> {
    /// `[step][dim]`
    pub mean: Vec<Vec<T>>,
    pub sd: Vec<Vec<T>>,
    /// On-road probability per step, when the action has a gaze bit.
    pub gaze_p: Option<Vec<T>>,
}

fn clip_p<T: Real>(p: T) -> T {
    p.max(T::lit(GAZE_P_MIN)).min(T::lit(GAZE_P_MAX))
}

fn sd_floor<T: Real>(spec: &ActionSpec<T>, d: usize) -> T {
    T::lit(SD_FLOOR_FRACTION) * spec.range(d)
}

impl<T: Real> PolicyDistribution<T> {
    /// Zero-mean Gaussians with sd equal to half the actuator bound, gaze
    /// probability from the preference prior.
    pub fn initial(spec: &ActionSpec<T>, horizon: usize, gaze_prior: Option<T>) -> Self {
        let step_mean: Vec<T> = (0..spec.dims()).map(|d| spec.clamp_dim(d, T::zero())).collect();
        let step_sd: Vec<T> = (0..spec.dims()).map(|d| (spec.range(d) / T::lit(4.0)).max(sd_floor(spec, d))).collect();
        let gaze_p = spec.gaze.then(|| vec![clip_p(gaze_prior.unwrap_or(T::lit(0.5))); horizon]);
        PolicyDistribution { mean: vec![step_mean; horizon], sd: vec![step_sd; horizon], gaze_p }
    }

    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    /// Drop the first step and append a fresh initial step.
    pub fn shifted(&self, spec: &ActionSpec<T>, gaze_prior: Option<T>) -> Self {
        let fresh = Self::initial(spec, 1, gaze_prior);
        let mut out = self.clone();
        out.mean.remove(0);
        out.sd.remove(0);
        out.mean.push(fresh.mean[0].clone());
        out.sd.push(fresh.sd[0].clone());
        if let (Some(p), Some(fp)) = (out.gaze_p.as_mut(), fresh.gaze_p) {
            p.remove(0);
            p.push(fp[0]);
        }
        out
    }

    /// Draw `m` policies: Gaussian continuous dims clamped to the bounds,
    /// Bernoulli gaze bits.
    pub fn sample(&self, spec: &ActionSpec<T>, m: usize, rng: &mut SimRng) -> Vec<Policy<T>> {
        (0..m)
            .map(|_| {
                let actions = (0..self.horizon())
                    .map(|tau| {
                        let continuous = (0..spec.dims())
                            .map(|d| spec.clamp_dim(d, normal(rng, self.mean[tau][d], self.sd[tau][d])))
                            .collect();
                        let gaze = self
                            .gaze_p
                            .as_ref()
                            .map(|p| Gaze::from_on_road(rng.random::<f64>() < p[tau].to_f64_lossy()));
                        ActionVector::new(continuous, gaze)
                    })
                    .collect();
                Policy::new(actions)
            })
            .collect()
    }

    /// Refit to elites: per-step sample mean and sample sd (n - 1, floored),
    /// per-step on-road frequency (clipped).
    pub fn refit(&self, spec: &ActionSpec<T>, elites: &[&Policy<T>]) -> Result<Self> {
        let n = elites.len();
        if n < 2 {
            return Err(Error::TooFewElites(n));
        }
        let nf = T::from_usize_lossy(n);
        let h = self.horizon();
        let mut mean = vec![vec![T::zero(); spec.dims()]; h];
        let mut sd = vec![vec![T::zero(); spec.dims()]; h];
        for tau in 0..h {
            for d in 0..spec.dims() {
                let m = elites.iter().map(|p| p.actions[tau].continuous[d]).sum::<T>() / nf;
                let ss: T = elites
                    .iter()
                    .map(|p| {
                        let e = p.actions[tau].continuous[d] - m;
                        e * e
                    })
                    .sum();
                mean[tau][d] = m;
                sd[tau][d] = (ss / (nf - T::one())).sqrt().max(sd_floor(spec, d));
            }
        }
        let gaze_p = self.gaze_p.as_ref().map(|_| {
            (0..h)
                .map(|tau| {
                    let on = elites.iter().filter(|p| p.actions[tau].gaze == Some(Gaze::OnRoad)).count();
                    clip_p(T::from_usize_lossy(on) / nf)
                })
                .collect()
        });
        Ok(PolicyDistribution { mean, sd, gaze_p })
    }

    /// Per-dimension mean of the first step (clamped); gaze by mode.
    pub fn first_action(&self, spec: &ActionSpec<T>) -> ActionVector<T> {
        let continuous = (0..spec.dims()).map(|d| spec.clamp_dim(d, self.mean[0][d])).collect();
        let gaze = self.gaze_p.as_ref().map(|p| Gaze::from_on_road(p[0] >= T::lit(0.5)));
        ActionVector::new(continuous, gaze)
    }
}

#[derive(Debug, Clone)]
pub struct PlanOutcome<T> {
    pub action: ActionVector<T>,
    /// Breakdown of the best policy of the final iteration.
    pub breakdown: EfeBreakdown<T>,
    pub best_policy: Policy<T>,
    pub distribution: PolicyDistribution<T>,
    /// Mean elite EFE per iteration.
    pub elite_scores: Vec<T>,
}

/// Run CEM from `initial` with an arbitrary policy scorer. The scorer gets a
/// dedicated RNG per candidate (shared across the iteration when common
/// random numbers are enabled), so results do not depend on thread count.
pub fn optimize<T, F>(
    initial: PolicyDistribution<T>,
    spec: &ActionSpec<T>,
    cfg: &PlannerConfig,
    stream: Stream,
    evaluate: F,
) -> Result<PlanOutcome<T>>
where
    T: Real,
    F: Fn(&Policy<T>, &mut SimRng) -> EfeBreakdown<T> + Sync,
{
    cfg.validate()?;
    let n_elite = cfg.elite_count();
    let mut dist = initial;
    let mut elite_scores = Vec::with_capacity(cfg.iterations);
    let mut best: Option<(Policy<T>, EfeBreakdown<T>)> = None;
    for k in 0..cfg.iterations {
        let iter_stream = stream.child(k as u64);
        let policies = dist.sample(spec, cfg.policies, &mut iter_stream.child(SAMPLE).rng());
        let eval_stream = iter_stream.child(EVAL);
        let scores: Vec<EfeBreakdown<T>> = policies
            .par_iter()
            .enumerate()
            .map(|(m, p)| {
                let mut rng =
                    if cfg.common_random_numbers { eval_stream.rng() } else { eval_stream.child(m as u64).rng() };
                evaluate(p, &mut rng)
            })
            .collect();
        let mut order: Vec<usize> = (0..policies.len()).collect();
        order.sort_by(|&a, &b| {
            scores[a].total.partial_cmp(&scores[b].total).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        let elites: Vec<&Policy<T>> = order[..n_elite].iter().map(|&i| &policies[i]).collect();
        elite_scores.push(order[..n_elite].iter().map(|&i| scores[i].total).sum::<T>() / T::from_usize_lossy(n_elite));
        dist = dist.refit(spec, &elites)?;
        if k + 1 == cfg.iterations {
            best = Some((policies[order[0]].clone(), scores[order[0]].clone()));
        }
    }
    let (best_policy, breakdown) = best.expect("at least one iteration");
    Ok(PlanOutcome { action: dist.first_action(spec), breakdown, best_policy, distribution: dist, elite_scores })
}

/// Plan one action for `belief`: draw planning particles by multinomial
/// resampling, then run CEM on expected free energy.
pub fn plan<T: Real, M: GenerativeModel<T> + ?Sized>(
    belief: &BeliefEnsemble<T>,
    model: &M,
    cfg: &PlannerConfig,
    stream: Stream,
    previous: Option<&PolicyDistribution<T>>,
) -> Result<PlanOutcome<T>> {
    cfg.validate()?;
    let spec = model.action_spec();
    let particles = belief.multinomial_resample(cfg.planning_particles, &mut stream.child(label::INIT).rng());
    let initial = match previous {
        Some(prev) if cfg.warm_start && prev.horizon() == cfg.horizon => prev.shifted(spec, model.gaze_prior()),
        _ => PolicyDistribution::initial(spec, cfg.horizon, model.gaze_prior()),
    };
    optimize(initial, spec, cfg, stream, |p, rng| evaluate_policy(p, &particles, model, rng))
}
