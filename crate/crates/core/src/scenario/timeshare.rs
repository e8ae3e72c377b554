//! Scenario 2: lane keeping on a straight road with a kinematic bicycle and a
//! gaze that alternates between the road and a secondary task. Looking away
//! hides the vehicle pose; lane-crossing flags stay observable.

use serde::{Deserialize, Serialize};

use crate::belief::BeliefEnsemble;
use crate::error::{Error, Result};
use crate::model::{
    matching_log_likelihood, ActionSpec, ActionVector, Gaze, GenerativeModel, Observation, Schema, SlotSpec,
    StateVector,
};
use crate::preference::{PreferenceForm, PreferenceModel, LOG_DENSITY_FLOOR};
use crate::rng::{normal, SimRng};
use crate::scalar::Real;

use super::{Probes, Scenario};

pub mod slot {
    pub const GAZE: usize = 0;
    pub const CROSS_LEFT: usize = 1;
    pub const CROSS_RIGHT: usize = 2;
    pub const X: usize = 3;
    pub const Y: usize = 4;
    pub const HEADING: usize = 5;
    pub const STEER: usize = 6;
    pub const SPEED: usize = 7;
    pub const ACCEL: usize = 8;
    pub const STEER_RATE: usize = 9;
    pub const COUNT: usize = 10;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimesharePreferences {
    pub speed_mean: Option<f64>,
    pub speed_sd: f64,
    pub accel_sd: f64,
    pub steer_rate_sd: f64,
    /// `log P(o^I = on-road)`; the off-road probability is its complement.
    pub gaze_log_pref: f64,
}

impl Default for TimesharePreferences {
    fn default() -> Self {
        TimesharePreferences {
            speed_mean: None,
            speed_sd: 1.0,
            accel_sd: 0.5,
            steer_rate_sd: 0.005,
            gaze_log_pref: -7.0,
        }
    }
}

/// Per-slot widths of the continuous observation slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeshareResolution {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub steer: f64,
    pub speed: f64,
    pub accel: f64,
    pub steer_rate: f64,
}

impl Default for TimeshareResolution {
    fn default() -> Self {
        TimeshareResolution { x: 0.1, y: 1e-5, heading: 1e-4, steer: 1e-3, speed: 0.01, accel: 0.01, steer_rate: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeshareScene {
    pub lane_width: f64,
    /// A boundary counts as crossed once the vehicle's side, half this width
    /// from its centre line, passes it.
    pub vehicle_width: f64,
    pub speed_limit: f64,
    /// Standard deviation of the steering-rate disturbance (rad/s).
    pub steering_noise: f64,
    pub wheelbase: f64,
    pub dt: f64,
    pub duration: f64,
    pub max_accel: f64,
    pub max_steer_rate: f64,
    /// Perceptual resolution, the quantization scale of predicted observations.
    pub resolution: TimeshareResolution,
    /// Matching-kernel widths of the belief update.
    pub tolerance: TimeshareResolution,
    pub preferences: TimesharePreferences,
}

impl Default for TimeshareScene {
    fn default() -> Self {
        TimeshareScene {
            lane_width: 3.0,
            vehicle_width: 0.0,
            speed_limit: 10.0,
            steering_noise: 0.001,
            wheelbase: 2.7,
            dt: 0.2,
            duration: 30.0,
            max_accel: 2.0,
            max_steer_rate: 0.02,
            resolution: TimeshareResolution::default(),
            tolerance: TimeshareResolution { y: 1e-3, ..Default::default() },
            preferences: TimesharePreferences::default(),
        }
    }
}

impl TimeshareScene {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("timeshare scene: {m}")));
        if self.steering_noise < 0.0 {
            return bad("steering_noise must be non-negative");
        }
        if self.lane_width <= 0.0 || self.wheelbase <= 0.0 || self.dt <= 0.0 || self.duration <= 0.0 {
            return bad("lane_width, wheelbase, dt and duration must be positive");
        }
        if self.vehicle_width < 0.0 || self.vehicle_width >= self.lane_width {
            return bad("vehicle_width must be non-negative and narrower than the lane");
        }
        if self.max_accel < 0.0 || self.max_steer_rate < 0.0 {
            return bad("action bounds must be non-negative");
        }
        let p = &self.preferences;
        if p.speed_sd <= 0.0 || p.accel_sd <= 0.0 || p.steer_rate_sd <= 0.0 {
            return bad("preference standard deviations must be positive");
        }
        if p.gaze_log_pref > 0.0 {
            return bad("gaze_log_pref is a log probability and must be <= 0");
        }
        for r in [&self.resolution, &self.tolerance] {
            if [r.x, r.y, r.heading, r.steer, r.speed, r.accel, r.steer_rate].iter().any(|&v| v <= 0.0) {
                return bad("resolutions and tolerances must be positive");
            }
        }
        Ok(())
    }
}

/// Ego kinematics `[x, y, θ, δ, v, a, w]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ego<T> {
    pub x: T,
    pub y: T,
    pub heading: T,
    pub steer: T,
    pub speed: T,
    pub accel: T,
    pub steer_rate: T,
}

/// One explicit-Euler step of the kinematic bicycle. Position and heading use
/// the pre-step heading, steering angle and speed.
pub fn bicycle_step<T: Real>(
    ego: Ego<T>,
    accel: T,
    steer_rate: T,
    dt: T,
    wheelbase: T,
    noise: T,
    rng: &mut SimRng,
) -> Ego<T> {
    let eta = if noise > T::zero() { normal(rng, T::zero(), noise) } else { T::zero() };
    Ego {
        x: ego.x + ego.speed * ego.heading.cos() * dt,
        y: ego.y + ego.speed * ego.heading.sin() * dt,
        heading: ego.heading + ego.speed * ego.steer.tan() / wheelbase * dt,
        steer: ego.steer + (steer_rate + eta) * dt,
        speed: ego.speed + accel * dt,
        accel,
        steer_rate,
    }
}

/// Deterministic gaze transition: the new gaze state is the gaze action.
pub fn apply_gaze<T: Real>(s: &StateVector<T>, gaze: Gaze) -> StateVector<T> {
    let mut out = s.clone();
    out[slot::GAZE] = T::lit(gaze.code() as f64);
    out
}

#[derive(Debug, Clone)]
pub struct TimeshareModel<T> {
    scene: TimeshareScene,
    state_schema: Schema,
    observation_schema: Schema,
    actions: ActionSpec<T>,
    prefs: PreferenceModel<T>,
}

impl<T: Real> TimeshareModel<T> {
    pub fn new(scene: TimeshareScene) -> Result<Self> {
        scene.validate()?;
        let (r, t) = (&scene.resolution, &scene.tolerance);
        let slots = |suffix: &str| {
            let n = |s: &str| format!("{s}{suffix}");
            let c = |s: &str, r: f64, t: f64| SlotSpec::continuous(&n(s), r).with_tolerance(t);
            vec![
                SlotSpec::discrete(&n("gaze"), &[0, 1]),
                SlotSpec::discrete(&n("cross_left"), &[0, 1]),
                SlotSpec::discrete(&n("cross_right"), &[0, 1]),
                c("x", r.x, t.x),
                c("y", r.y, t.y),
                c("heading", r.heading, t.heading),
                c("steer", r.steer, t.steer),
                c("speed", r.speed, t.speed),
                c("accel", r.accel, t.accel),
                c("steer_rate", r.steer_rate, t.steer_rate),
            ]
        };
        let actions = ActionSpec::symmetric(
            &["accel", "steer_rate"],
            &[T::lit(scene.max_accel), T::lit(scene.max_steer_rate)],
            true,
        );

        let p = &scene.preferences;
        let half = T::lit(scene.lane_width / 2.0);
        let crossed = || PreferenceForm::Categorical { table: vec![(0, T::zero()), (1, T::lit(LOG_DENSITY_FLOOR))] };
        let prefs = PreferenceModel::new(slot::COUNT)
            .with(
                "speed",
                slot::SPEED,
                PreferenceForm::Gaussian {
                    mean: T::lit(p.speed_mean.unwrap_or(scene.speed_limit)),
                    sd: T::lit(p.speed_sd),
                },
            )
            .with("lane", slot::Y, PreferenceForm::Triangular { center: T::zero(), lower: -half, upper: half })
            .with("accel", slot::ACCEL, PreferenceForm::Gaussian { mean: T::zero(), sd: T::lit(p.accel_sd) })
            .with(
                "steer_rate",
                slot::STEER_RATE,
                PreferenceForm::Gaussian { mean: T::zero(), sd: T::lit(p.steer_rate_sd) },
            )
            .with("gaze", slot::GAZE, PreferenceForm::Bernoulli { log_p_on: T::lit(p.gaze_log_pref) })
            .with("cross_left", slot::CROSS_LEFT, crossed())
            .with("cross_right", slot::CROSS_RIGHT, crossed());

        let state_schema = Schema::new(slots(""));
        let observation_schema = Schema::new(slots("_obs"));
        Ok(TimeshareModel { scene, state_schema, observation_schema, actions, prefs })
    }

    pub fn scene(&self) -> &TimeshareScene {
        &self.scene
    }

    /// Steering disturbance used by both the environment and the agent's
    /// counterfactual rollouts.
    pub fn steering_noise(&self) -> f64 {
        self.scene.steering_noise
    }

    pub fn ego(s: &StateVector<T>) -> Ego<T> {
        Ego {
            x: s[slot::X],
            y: s[slot::Y],
            heading: s[slot::HEADING],
            steer: s[slot::STEER],
            speed: s[slot::SPEED],
            accel: s[slot::ACCEL],
            steer_rate: s[slot::STEER_RATE],
        }
    }

    fn set_ego(&self, s: &mut StateVector<T>, e: Ego<T>) {
        s[slot::X] = e.x;
        s[slot::Y] = e.y;
        s[slot::HEADING] = e.heading;
        s[slot::STEER] = e.steer;
        s[slot::SPEED] = e.speed;
        s[slot::ACCEL] = e.accel;
        s[slot::STEER_RATE] = e.steer_rate;
        let half = T::lit((self.scene.lane_width - self.scene.vehicle_width) / 2.0);
        s[slot::CROSS_LEFT] = if e.y > half { T::one() } else { T::zero() };
        s[slot::CROSS_RIGHT] = if e.y < -half { T::one() } else { T::zero() };
    }

    pub fn observe(&self, s: &StateVector<T>) -> Observation<T> {
        let mut o: Vec<Option<T>> = s.values().iter().map(|&v| Some(v)).collect();
        if s[slot::GAZE] < T::lit(0.5) {
            o[slot::X] = None;
            o[slot::Y] = None;
            o[slot::HEADING] = None;
        }
        Observation::new(o)
    }

    /// Straight-ahead start at the speed limit, centred, looking at the road.
    pub fn start_state(&self) -> StateVector<T> {
        let mut s = StateVector::new(vec![T::zero(); slot::COUNT]);
        s[slot::GAZE] = T::one();
        let e = Ego {
            x: T::zero(),
            y: T::zero(),
            heading: T::zero(),
            steer: T::zero(),
            speed: T::lit(self.scene.speed_limit),
            accel: T::zero(),
            steer_rate: T::zero(),
        };
        self.set_ego(&mut s, e);
        s
    }

    /// Copy of `s` with lateral position `y`; crossing flags recomputed.
    pub fn with_lateral(&self, s: &StateVector<T>, y: T) -> StateVector<T> {
        let mut out = s.clone();
        let mut e = Self::ego(s);
        e.y = y;
        self.set_ego(&mut out, e);
        out
    }
}

impl<T: Real> GenerativeModel<T> for TimeshareModel<T> {
    fn state_schema(&self) -> &Schema {
        &self.state_schema
    }

    fn observation_schema(&self) -> &Schema {
        &self.observation_schema
    }

    fn action_spec(&self) -> &ActionSpec<T> {
        &self.actions
    }

    fn preferences(&self) -> &PreferenceModel<T> {
        &self.prefs
    }

    fn transition(&self, s: &StateVector<T>, a: &ActionVector<T>, rng: &mut SimRng) -> StateVector<T> {
        let accel = self.actions.clamp_dim(0, a.continuous[0]);
        let rate = self.actions.clamp_dim(1, a.continuous[1]);
        let e = bicycle_step(
            Self::ego(s),
            accel,
            rate,
            T::lit(self.scene.dt),
            T::lit(self.scene.wheelbase),
            T::lit(self.scene.steering_noise),
            rng,
        );
        let mut out = match a.gaze {
            Some(g) => apply_gaze(s, g),
            None => s.clone(),
        };
        self.set_ego(&mut out, e);
        out
    }

    fn sample_observation(&self, s: &StateVector<T>, _rng: &mut SimRng) -> Observation<T> {
        self.observe(s)
    }

    fn observation_log_likelihood(&self, o: &Observation<T>, s: &StateVector<T>) -> T {
        matching_log_likelihood(&self.observation_schema, o, &self.observe(s))
    }

    /// Preference-implied on-road probability.
    fn gaze_prior(&self) -> Option<T> {
        Some(T::lit(self.scene.preferences.gaze_log_pref.exp()))
    }
}

impl<T: Real> Scenario<T> for TimeshareModel<T> {
    fn dt(&self) -> T {
        T::lit(self.scene.dt)
    }

    fn duration(&self) -> T {
        T::lit(self.scene.duration)
    }

    fn lane_width(&self) -> T {
        T::lit(self.scene.lane_width)
    }

    fn initial_state(&self) -> StateVector<T> {
        self.start_state()
    }

    fn initial_belief(&self, n: usize) -> BeliefEnsemble<T> {
        BeliefEnsemble::point(self.start_state(), n)
    }

    fn probes(&self) -> Probes {
        Probes {
            speed: slot::SPEED,
            lateral: slot::Y,
            steering: Some(slot::STEER),
            gaze: Some(slot::GAZE),
            context: None,
        }
    }
}
