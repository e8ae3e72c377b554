//! Sequential importance resampling (SIR) particle filter over the mixed
//! discrete/continuous scenario state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{discrete_code, ActionVector, GenerativeModel, Observation, Schema, SlotKind, StateVector};
use crate::rng::{unit, SimRng};
use crate::scalar::Real;

/// Rule deciding when [`filter_step`] resamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleTrigger {
    /// Resample when `1 / Σ w²` (equivalently `N / (1 + CV²)`) drops to N/2.
    #[default]
    Kish,
    /// Resample when `N / (1 + Σ w²)` drops to N/2, taken literally. With
    /// normalized weights this only fires once a single particle holds all
    /// the mass.
    Literal,
}

/// Weighted particle approximation of the belief `Q(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefEnsemble<T> {
    pub particles: Vec<StateVector<T>>,
    pub weights: Vec<T>,
}

/// `N / (1 + Σ w²)` for normalized weights.
pub fn effective_sample_size<T: Real>(weights: &[T]) -> T {
    let n = T::from_usize_lossy(weights.len());
    let sq: T = weights.iter().map(|&w| w * w).sum();
    n / (T::one() + sq)
}

/// Kish effective sample size `1 / Σ w²` for normalized weights.
pub fn kish_effective_sample_size<T: Real>(weights: &[T]) -> T {
    let sq: T = weights.iter().map(|&w| w * w).sum();
    T::one() / sq
}

impl<T: Real> BeliefEnsemble<T> {
    /// Equal-weight ensemble.
    pub fn uniform(particles: Vec<StateVector<T>>) -> Self {
        assert!(!particles.is_empty(), "belief ensemble needs at least one particle");
        let w = T::one() / T::from_usize_lossy(particles.len());
        let weights = vec![w; particles.len()];
        BeliefEnsemble { particles, weights }
    }

    /// Point belief: `n` copies of one state.
    pub fn point(state: StateVector<T>, n: usize) -> Self {
        Self::uniform(vec![state; n])
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weight_sum(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn effective_sample_size(&self) -> T {
        effective_sample_size(&self.weights)
    }

    /// Advance every particle through the transition sampler. Weights are
    /// untouched.
    pub fn propagate<M: GenerativeModel<T> + ?Sized>(
        &self,
        action: &ActionVector<T>,
        model: &M,
        rng: &mut SimRng,
    ) -> Self {
        let particles = self.particles.iter().map(|p| model.transition(p, action, rng)).collect();
        BeliefEnsemble { particles, weights: self.weights.clone() }
    }

    /// Multiply weights by `P(o | δ_n)` and renormalize. Works in log space;
    /// fails only if every particle is impossible under `o`.
    pub fn reweight<M: GenerativeModel<T> + ?Sized>(
        &self,
        observation: &Observation<T>,
        model: &M,
        tick: usize,
    ) -> Result<Self> {
        model.observation_schema().check_len(observation.len())?;
        let logw: Vec<T> = self
            .particles
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| w.ln() + model.observation_log_likelihood(observation, p))
            .collect();
        let max = logw.iter().copied().fold(T::neg_infinity(), T::max);
        if !max.is_finite() {
            return Err(Error::FilterDivergence { tick, observation: observation.to_string() });
        }
        let unnorm: Vec<T> = logw.iter().map(|&l| (l - max).exp()).collect();
        let total: T = unnorm.iter().copied().sum();
        let weights = unnorm.into_iter().map(|w| w / total).collect();
        Ok(BeliefEnsemble { particles: self.particles.clone(), weights })
    }

    /// Systematic resampling with an explicit offset `u ∈ [0, 1/N)`.
    pub fn systematic_resample_with_offset(&self, offset: T) -> Self {
        let n = self.len();
        let step = T::one() / T::from_usize_lossy(n);
        let mut out = Vec::with_capacity(n);
        let mut cum = self.weights[0];
        let mut j = 0;
        for k in 0..n {
            let pos = offset + T::from_usize_lossy(k) * step;
            while pos >= cum && j + 1 < n {
                j += 1;
                cum = cum + self.weights[j];
            }
            out.push(self.particles[j].clone());
        }
        Self::uniform(out)
    }

    /// Systematic resampling: one uniform offset, N equidistant strata.
    pub fn systematic_resample(&self, rng: &mut SimRng) -> Self {
        let step = T::one() / T::from_usize_lossy(self.len());
        let u = unit::<T, _>(rng) * step;
        self.systematic_resample_with_offset(u)
    }

    /// `count` independent draws proportional to weight.
    pub fn multinomial_resample(&self, count: usize, rng: &mut SimRng) -> Vec<StateVector<T>> {
        let mut cdf = Vec::with_capacity(self.len());
        let mut acc = T::zero();
        for &w in &self.weights {
            acc = acc + w;
            cdf.push(acc);
        }
        (0..count)
            .map(|_| {
                let u = unit::<T, _>(rng) * acc;
                let idx = cdf.partition_point(|&c| c <= u).min(self.len() - 1);
                self.particles[idx].clone()
            })
            .collect()
    }

    /// Total weight of particles satisfying `pred`.
    pub fn mass_where(&self, pred: impl Fn(&StateVector<T>) -> bool) -> T {
        self.particles.iter().zip(&self.weights).filter(|(p, _)| pred(p)).map(|(_, &w)| w).sum()
    }

    pub fn weighted_mean(&self, slot: usize) -> T {
        self.particles.iter().zip(&self.weights).map(|(p, &w)| w * p[slot]).sum()
    }

    /// Weighted population standard deviation of one slot.
    pub fn weighted_sd(&self, slot: usize) -> T {
        let m = self.weighted_mean(slot);
        let var: T = self
            .particles
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| {
                let d = p[slot] - m;
                w * d * d
            })
            .sum();
        var.max(T::zero()).sqrt()
    }

    pub fn summary(&self, schema: &Schema) -> BeliefSummary<T> {
        let slots = (0..schema.len())
            .map(|i| {
                let masses = match &schema.slots[i].kind {
                    SlotKind::Discrete { values } => {
                        values.iter().map(|&v| (v, self.mass_where(|p| discrete_code(p[i]) == v))).collect()
                    }
                    SlotKind::Continuous => Vec::new(),
                };
                SlotSummary { mean: self.weighted_mean(i), sd: self.weighted_sd(i), masses }
            })
            .collect();
        BeliefSummary { slots, ess: self.effective_sample_size() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotSummary<T> {
    pub mean: T,
    pub sd: T,
    /// Mass per discrete code; empty for continuous slots.
    pub masses: Vec<(i64, T)>,
}

/// Per-slot weighted moments and discrete masses, exported each tick.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefSummary<T> {
    pub slots: Vec<SlotSummary<T>>,
    pub ess: T,
}

impl<T: Real> BeliefSummary<T> {
    pub fn mass(&self, slot: usize, code: i64) -> T {
        self.slots[slot].masses.iter().find(|(c, _)| *c == code).map(|&(_, m)| m).unwrap_or(T::zero())
    }
}

/// One filter update: propagate, reweight, and resample when the effective
/// sample size falls to N/2 under `trigger`.
pub fn filter_step<T: Real, M: GenerativeModel<T> + ?Sized>(
    belief: &BeliefEnsemble<T>,
    action: &ActionVector<T>,
    observation: &Observation<T>,
    model: &M,
    rng: &mut SimRng,
    trigger: ResampleTrigger,
    tick: usize,
) -> Result<BeliefEnsemble<T>> {
    let propagated = belief.propagate(action, model, rng);
    let updated = propagated.reweight(observation, model, tick)?;
    let half = T::from_usize_lossy(updated.len()) / T::lit(2.0);
    let ess = match trigger {
        ResampleTrigger::Kish => kish_effective_sample_size(&updated.weights),
        ResampleTrigger::Literal => effective_sample_size(&updated.weights),
    };
    if ess <= half {
        Ok(updated.systematic_resample(rng))
    } else {
        Ok(updated)
    }
}
