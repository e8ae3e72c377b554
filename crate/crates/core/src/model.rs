//! POMDP building blocks shared by both driving scenarios and the planner:
//! slot schemas, state/observation/action vectors and the generative model
//! interface.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preference::PreferenceModel;
use crate::rng::SimRng;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    /// Finite set of admissible integer codes.
    Discrete {
        values: Vec<i64>,
    },
    Continuous,
}

/// One slot of a state or observation schema.
///
/// `resolution` is the precision at which a continuous slot is perceived and
/// sets the quantization scale of the predictive entropy. `tolerance` is the
/// width of the particle-filter matching kernel; it equals the resolution
/// unless set apart. Both are ignored for discrete slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub kind: SlotKind,
    pub resolution: f64,
    pub tolerance: f64,
}

impl SlotSpec {
    pub fn discrete(name: &str, values: &[i64]) -> Self {
        SlotSpec {
            name: name.to_string(),
            kind: SlotKind::Discrete { values: values.to_vec() },
            resolution: 1.0,
            tolerance: 1.0,
        }
    }

    pub fn continuous(name: &str, resolution: f64) -> Self {
        SlotSpec { name: name.to_string(), kind: SlotKind::Continuous, resolution, tolerance: resolution }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, SlotKind::Discrete { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub slots: Vec<SlotSpec>,
}

impl Schema {
    pub fn new(slots: Vec<SlotSpec>) -> Self {
        Schema { slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|s| s.name.as_str())
    }

    pub fn check_len(&self, got: usize) -> Result<()> {
        if got == self.len() {
            Ok(())
        } else {
            Err(Error::SchemaMismatch { expected: self.len(), got })
        }
    }

    /// Length check plus discrete-domain membership.
    pub fn validate_state<T: Real>(&self, s: &StateVector<T>) -> Result<()> {
        self.check_len(s.len())?;
        for (spec, &v) in self.slots.iter().zip(s.values()) {
            if let SlotKind::Discrete { values } = &spec.kind {
                let code = discrete_code(v);
                if !values.contains(&code) || T::from_i64(code) != Some(v) {
                    return Err(Error::Config(format!(
                        "slot `{}` holds {} outside its domain {:?}",
                        spec.name, v, values
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Integer code of a discrete slot value stored as a scalar.
pub fn discrete_code<T: Real>(v: T) -> i64 {
    v.round().to_i64().unwrap_or(i64::MIN)
}

/// One realization of all scenario state variables.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T>(pub Vec<T>);

impl<T: Real> StateVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        StateVector(values)
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<T> Index<usize> for StateVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for StateVector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

/// Observation with null-able slots. `None` means the slot was not observed.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T> {
    pub slots: Vec<Option<T>>,
}

impl<T: Real> Observation<T> {
    pub fn new(slots: Vec<Option<T>>) -> Self {
        Observation { slots }
    }

    pub fn all_null(len: usize) -> Self {
        Observation { slots: vec![None; len] }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<T> {
        self.slots[i]
    }

    pub fn is_null(&self, i: usize) -> bool {
        self.slots[i].is_none()
    }

    /// Copy with slot `i` nulled out.
    pub fn without(mut self, i: usize) -> Self {
        self.slots[i] = None;
        self
    }
}

impl<T: Real> std::fmt::Display for Observation<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, s) in self.slots.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            match s {
                Some(v) => write!(f, "{v}")?,
                None => write!(f, "null")?,
            }
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gaze {
    OffRoad = 0,
    OnRoad = 1,
}

impl Gaze {
    pub fn code(self) -> i64 {
        self as i64
    }

    pub fn from_on_road(on: bool) -> Self {
        if on {
            Gaze::OnRoad
        } else {
            Gaze::OffRoad
        }
    }

    pub fn is_on_road(self) -> bool {
        self == Gaze::OnRoad
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionVector<T> {
    pub continuous: Vec<T>,
    pub gaze: Option<Gaze>,
}

impl<T: Real> ActionVector<T> {
    pub fn new(continuous: Vec<T>, gaze: Option<Gaze>) -> Self {
        ActionVector { continuous, gaze }
    }

    pub fn zeros(spec: &ActionSpec<T>) -> Self {
        ActionVector { continuous: vec![T::zero(); spec.dims()], gaze: spec.gaze.then_some(Gaze::OnRoad) }
    }
}

/// Continuous action dimensions with actuator bounds, plus the optional
/// discrete gaze bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpec<T> {
    pub names: Vec<String>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub gaze: bool,
}

impl<T: Real> ActionSpec<T> {
    pub fn symmetric(names: &[&str], bounds: &[T], gaze: bool) -> Self {
        ActionSpec {
            names: names.iter().map(|s| s.to_string()).collect(),
            lower: bounds.iter().map(|&b| -b).collect(),
            upper: bounds.to_vec(),
            gaze,
        }
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn range(&self, d: usize) -> T {
        self.upper[d] - self.lower[d]
    }

    pub fn clamp_dim(&self, d: usize, v: T) -> T {
        v.max(self.lower[d]).min(self.upper[d])
    }

    pub fn clamp(&self, a: &mut ActionVector<T>) {
        for (d, v) in a.continuous.iter_mut().enumerate() {
            *v = self.clamp_dim(d, *v);
        }
        if !self.gaze {
            a.gaze = None;
        }
    }

    pub fn contains(&self, a: &ActionVector<T>) -> bool {
        a.continuous.len() == self.dims()
            && a.continuous.iter().enumerate().all(|(d, &v)| v >= self.lower[d] && v <= self.upper[d])
            && a.gaze.is_some() == self.gaze
    }
}

/// Agent-side generative model: transition sampler, observation model and
/// preferences over observations.
///
/// Implementations must be pure: the transition is a function of
/// `(state, action, rng stream)` only, so many policies can be evaluated
/// concurrently against one shared model.
pub trait GenerativeModel<T: Real>: Sync {
    fn state_schema(&self) -> &Schema;

    fn observation_schema(&self) -> &Schema;

    fn action_spec(&self) -> &ActionSpec<T>;

    fn preferences(&self) -> &PreferenceModel<T>;

    /// Sample `s' ~ P(s' | s, a)`.
    fn transition(&self, s: &StateVector<T>, a: &ActionVector<T>, rng: &mut SimRng) -> StateVector<T>;

    /// Sample `o ~ P(o | s)`.
    fn sample_observation(&self, s: &StateVector<T>, rng: &mut SimRng) -> Observation<T>;

    /// `log P(o | s)` up to an additive constant shared by all states. Null
    /// slots of `o` contribute nothing, so an all-null observation scores 0.
    fn observation_log_likelihood(&self, o: &Observation<T>, s: &StateVector<T>) -> T;

    /// Entropy of `P(o | s)`; zero for deterministic observation mappings.
    fn observation_entropy(&self, _s: &StateVector<T>) -> T {
        T::zero()
    }

    /// Prior probability of an on-road gaze, if the model has a gaze action.
    fn gaze_prior(&self) -> Option<T> {
        None
    }
}

/// Log-likelihood of `observed` given the noise-free prediction `predicted`.
///
/// Discrete slots must match exactly. Continuous slots are scored with an
/// unnormalized Gaussian matching kernel whose width is the slot resolution,
/// so an exact match scores 0.
pub fn matching_log_likelihood<T: Real>(schema: &Schema, observed: &Observation<T>, predicted: &Observation<T>) -> T {
    let mut total = T::zero();
    for (i, spec) in schema.slots.iter().enumerate() {
        let Some(o) = observed.slots[i] else { continue };
        let Some(p) = predicted.slots[i] else {
            return T::neg_infinity();
        };
        if spec.is_discrete() {
            if discrete_code(o) != discrete_code(p) {
                return T::neg_infinity();
            }
        } else {
            let z = (o - p) / T::lit(spec.tolerance);
            total = total - T::lit(0.5) * z * z;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::new(vec![SlotSpec::discrete("i", &[0, 1]), SlotSpec::continuous("x", 0.5)])
    }

    #[test]
    fn validate_rejects_out_of_domain_discrete() {
        let s = schema();
        assert!(s.validate_state(&StateVector::new(vec![1.0, 3.0])).is_ok());
        assert!(s.validate_state(&StateVector::new(vec![2.0, 3.0])).is_err());
        assert!(s.validate_state(&StateVector::new(vec![0.5, 3.0])).is_err());
        assert!(matches!(
            s.validate_state(&StateVector::new(vec![0.0])),
            Err(Error::SchemaMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn matching_likelihood_rules() {
        let s = schema();
        let pred = Observation::new(vec![Some(1.0), Some(2.0)]);
        assert_eq!(matching_log_likelihood(&s, &Observation::all_null(2), &pred), 0.0);
        assert_eq!(matching_log_likelihood(&s, &pred, &pred), 0.0);
        let off = Observation::new(vec![Some(1.0), Some(2.5)]);
        assert!((matching_log_likelihood::<f64>(&s, &off, &pred) + 0.5).abs() < 1e-12);
        let wrong = Observation::new(vec![Some(0.0), None]);
        assert_eq!(matching_log_likelihood(&s, &wrong, &pred), f64::NEG_INFINITY);
        let null_pred = Observation::new(vec![Some(1.0), None]);
        assert_eq!(matching_log_likelihood(&s, &pred, &null_pred), f64::NEG_INFINITY);

        let wide = Schema::new(vec![SlotSpec::continuous("x", 0.5).with_tolerance(1.0)]);
        let a = Observation::new(vec![Some(1.0)]);
        let b = Observation::new(vec![Some(2.0)]);
        assert!((matching_log_likelihood::<f64>(&wide, &a, &b) + 0.5).abs() < 1e-12);
        assert_eq!(wide.slots[0].resolution, 0.5);
    }

    #[test]
    fn action_clamping() {
        let spec = ActionSpec::symmetric(&["a", "w"], &[4.0, 0.5], true);
        let mut a = ActionVector::new(vec![10.0, -1.0], Some(Gaze::OffRoad));
        spec.clamp(&mut a);
        assert_eq!(a.continuous, vec![4.0, -0.5]);
        assert!(spec.contains(&a));
        let no_gaze = ActionSpec::symmetric(&["a"], &[4.0], false);
        let mut b = ActionVector::new(vec![1.0], Some(Gaze::OnRoad));
        no_gaze.clamp(&mut b);
        assert_eq!(b.gaze, None);
    }
}
