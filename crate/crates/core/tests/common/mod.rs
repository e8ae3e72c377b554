#![allow(dead_code)]

use aidrive::belief::BeliefEnsemble;
use aidrive::model::{ActionVector, Observation, StateVector};
use aidrive::preference::PreferenceModel;
use aidrive::rng::normal;
use aidrive::{ActionSpec, GenerativeModel, Schema, SimRng, SlotSpec};

/// `x' = a x + b + N(0, q)`, `o = x + N(0, r)`.
pub struct LinearGaussian {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub r: f64,
    schema: Schema,
    actions: ActionSpec<f64>,
    prefs: PreferenceModel<f64>,
}

impl LinearGaussian {
    pub fn new(a: f64, b: f64, q: f64, r: f64) -> Self {
        LinearGaussian {
            a,
            b,
            q,
            r,
            schema: Schema::new(vec![SlotSpec::continuous("x", r)]),
            actions: ActionSpec::symmetric(&[], &[], false),
            prefs: PreferenceModel::new(1),
        }
    }

    pub fn idle() -> ActionVector<f64> {
        ActionVector::new(Vec::new(), None)
    }

    pub fn prior(&self, mean: f64, sd: f64, n: usize, rng: &mut SimRng) -> BeliefEnsemble<f64> {
        BeliefEnsemble::uniform((0..n).map(|_| StateVector::new(vec![normal(rng, mean, sd)])).collect())
    }
}

impl GenerativeModel<f64> for LinearGaussian {
    fn state_schema(&self) -> &Schema {
        &self.schema
    }

    fn observation_schema(&self) -> &Schema {
        &self.schema
    }

    fn action_spec(&self) -> &ActionSpec<f64> {
        &self.actions
    }

    fn preferences(&self) -> &PreferenceModel<f64> {
        &self.prefs
    }

    fn transition(&self, s: &StateVector<f64>, _a: &ActionVector<f64>, rng: &mut SimRng) -> StateVector<f64> {
        StateVector::new(vec![normal(rng, self.a * s[0] + self.b, self.q.sqrt())])
    }

    fn sample_observation(&self, s: &StateVector<f64>, rng: &mut SimRng) -> Observation<f64> {
        Observation::new(vec![Some(normal(rng, s[0], self.r.sqrt()))])
    }

    fn observation_log_likelihood(&self, o: &Observation<f64>, s: &StateVector<f64>) -> f64 {
        match o.slots[0] {
            Some(v) => -0.5 * (v - s[0]) * (v - s[0]) / self.r,
            None => 0.0,
        }
    }

    fn observation_entropy(&self, _s: &StateVector<f64>) -> f64 {
        0.5 * (std::f64::consts::TAU * std::f64::consts::E * self.r).ln()
    }
}

/// Exact posterior moments, one pair per observation.
pub fn kalman(model: &LinearGaussian, mean: f64, var: f64, obs: &[f64]) -> Vec<(f64, f64)> {
    let (mut m, mut p) = (mean, var);
    obs.iter()
        .map(|&y| {
            m = model.a * m + model.b;
            p = model.a * model.a * p + model.q;
            let k = p / (p + model.r);
            m += k * (y - m);
            p *= 1.0 - k;
            (m, p)
        })
        .collect()
}
