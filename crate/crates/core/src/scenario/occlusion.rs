//! Scenario 1: a point-mass ego vehicle approaches a parked occluder behind
//! which a pedestrian may be standing. The pedestrian site becomes visible
//! once the ego crosses the line of sight through the occluder tip.

use serde::{Deserialize, Serialize};

use crate::belief::BeliefEnsemble;
use crate::error::{Error, Result};
use crate::model::{
    matching_log_likelihood, ActionSpec, ActionVector, GenerativeModel, Observation, Schema, SlotSpec, StateVector,
};
use crate::preference::{PreferenceForm, PreferenceModel, LOG_DENSITY_FLOOR};
use crate::rng::{normal, SimRng};
use crate::scalar::Real;

use super::{Probes, Scenario};

/// State (and observation) slot layout.
pub mod slot {
    pub const CONTEXT: usize = 0;
    pub const CONFLICT: usize = 1;
    pub const PED_X: usize = 2;
    pub const PED_Y: usize = 3;
    pub const X: usize = 4;
    pub const VX: usize = 5;
    pub const AX: usize = 6;
    pub const Y: usize = 7;
    pub const VY: usize = 8;
    pub const AY: usize = 9;
    pub const COUNT: usize = 10;
}

/// Codes of the context observation `o^I`.
pub const NOT_OBSERVED: i64 = 1;
pub const OBSERVED: i64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcclusionPreferences {
    /// Preferred speed; defaults to the speed limit.
    pub speed_mean: Option<f64>,
    pub speed_sd: f64,
    pub accel_sd: f64,
}

impl Default for OcclusionPreferences {
    fn default() -> Self {
        OcclusionPreferences { speed_mean: None, speed_sd: 1.0, accel_sd: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcclusionScene {
    pub lane_width: f64,
    pub speed_limit: f64,
    /// Corner of the occluder nearest the lane, `[x, y]`.
    pub occluder_tip: [f64; 2],
    /// Where a pedestrian would stand, `[x, y]`.
    pub pedestrian_site: [f64; 2],
    /// Whether a pedestrian is actually there.
    pub pedestrian_present: bool,
    /// Agent's prior probability that a pedestrian is present.
    pub prior_presence: f64,
    pub safe_distance: f64,
    pub dt: f64,
    pub duration: f64,
    pub lateral_mobility: bool,
    pub max_accel: f64,
    /// Lateral acceleration bound when lateral mobility is on.
    pub max_lateral_accel: f64,
    /// Standard deviation of additive acceleration noise (m/s²).
    pub process_noise: f64,
    /// Coordinate stored for an absent pedestrian.
    pub null_position: f64,
    pub ego_resolution: f64,
    pub pedestrian_resolution: f64,
    pub preferences: OcclusionPreferences,
}

impl Default for OcclusionScene {
    fn default() -> Self {
        OcclusionScene {
            lane_width: 3.0,
            speed_limit: 10.0,
            occluder_tip: [35.0, -2.0],
            pedestrian_site: [41.0, -3.0],
            pedestrian_present: false,
            prior_presence: 0.2,
            safe_distance: 2.0,
            dt: 0.2,
            duration: 10.0,
            lateral_mobility: false,
            max_accel: 4.0,
            max_lateral_accel: 4.0,
            process_noise: 0.0,
            null_position: -1000.0,
            ego_resolution: 0.01,
            pedestrian_resolution: 1.0,
            preferences: OcclusionPreferences::default(),
        }
    }
}

impl OcclusionScene {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("occlusion scene: {m}")));
        if self.safe_distance <= 0.0 {
            return bad("safe_distance must be positive");
        }
        if self.pedestrian_site[0] <= self.occluder_tip[0] {
            return bad("pedestrian site must lie beyond the occluder tip in x");
        }
        if !(0.0..=1.0).contains(&self.prior_presence) {
            return bad("prior_presence must be a probability");
        }
        if self.dt <= 0.0 || self.duration <= 0.0 || self.lane_width <= 0.0 {
            return bad("dt, duration and lane_width must be positive");
        }
        if self.max_accel < 0.0 || self.max_lateral_accel < 0.0 {
            return bad("action bounds must be non-negative");
        }
        if self.preferences.speed_sd <= 0.0 || self.preferences.accel_sd <= 0.0 {
            return bad("preference standard deviations must be positive");
        }
        Ok(())
    }
}

/// Whether the pedestrian site is visible from `ego`.
///
/// The site is hidden while it lies behind the ray from the ego through the
/// occluder tip, judged by the sign of `(tip - ego) × (site - ego)` oriented
/// by which side of the lane the occluder is on. Collinear counts as
/// visible, and so does any ego at or past the site in x.
pub fn los_visible<T: Real>(ego: (T, T), tip: (T, T), site: (T, T)) -> bool {
    if ego.0 >= site.0 {
        return true;
    }
    let (tx, ty) = (tip.0 - ego.0, tip.1 - ego.1);
    let (sx, sy) = (site.0 - ego.0, site.1 - ego.1);
    let cross = tx * sy - ty * sx;
    // occluder on the right (y < 0) of the lane centre: visible when the
    // site turns counter-clockwise from the tip ray
    if tip.1 <= T::zero() {
        cross >= T::zero()
    } else {
        cross <= T::zero()
    }
}

#[derive(Debug, Clone)]
pub struct OcclusionModel<T> {
    scene: OcclusionScene,
    state_schema: Schema,
    observation_schema: Schema,
    actions: ActionSpec<T>,
    prefs: PreferenceModel<T>,
}

impl<T: Real> OcclusionModel<T> {
    pub fn new(scene: OcclusionScene) -> Result<Self> {
        scene.validate()?;
        let r = scene.ego_resolution;
        let rp = scene.pedestrian_resolution;
        let ego_slots = |v: &mut Vec<SlotSpec>| {
            v.extend([
                SlotSpec::continuous("x", r),
                SlotSpec::continuous("vx", r),
                SlotSpec::continuous("ax", r),
                SlotSpec::continuous("y", r),
                SlotSpec::continuous("vy", r),
                SlotSpec::continuous("ay", r),
            ])
        };
        let mut state = vec![
            SlotSpec::discrete("ped_present", &[0, 1]),
            SlotSpec::discrete("conflict", &[0, 1]),
            SlotSpec::continuous("ped_x", rp),
            SlotSpec::continuous("ped_y", rp),
        ];
        ego_slots(&mut state);
        let mut obs = vec![
            SlotSpec::discrete("ped_context_obs", &[NOT_OBSERVED, OBSERVED]),
            SlotSpec::discrete("conflict_obs", &[0, 1]),
            SlotSpec::continuous("ped_x_obs", rp),
            SlotSpec::continuous("ped_y_obs", rp),
        ];
        ego_slots(&mut obs);
        for s in obs.iter_mut().skip(4) {
            s.name.push_str("_obs");
        }

        let amax = T::lit(scene.max_accel);
        let lateral_bound = if scene.lateral_mobility { T::lit(scene.max_lateral_accel) } else { T::zero() };
        let actions = ActionSpec {
            names: vec!["ax".into(), "ay".into()],
            lower: vec![-amax, -lateral_bound],
            upper: vec![amax, lateral_bound],
            gaze: false,
        };

        let p = &scene.preferences;
        let speed_mean = p.speed_mean.unwrap_or(scene.speed_limit);
        let mut prefs = PreferenceModel::new(slot::COUNT)
            .with("speed", slot::VX, PreferenceForm::Gaussian { mean: T::lit(speed_mean), sd: T::lit(p.speed_sd) })
            .with("accel_x", slot::AX, PreferenceForm::Gaussian { mean: T::zero(), sd: T::lit(p.accel_sd) })
            .with(
                "conflict",
                slot::CONFLICT,
                PreferenceForm::Categorical { table: vec![(0, T::zero()), (1, T::lit(LOG_DENSITY_FLOOR))] },
            );
        if scene.lateral_mobility {
            let half = T::lit(scene.lane_width / 2.0);
            prefs = prefs
                .with("accel_y", slot::AY, PreferenceForm::Gaussian { mean: T::zero(), sd: T::lit(p.accel_sd) })
                .with("lane", slot::Y, PreferenceForm::Triangular { center: T::zero(), lower: -half, upper: half });
        }

        Ok(OcclusionModel {
            scene,
            state_schema: Schema::new(state),
            observation_schema: Schema::new(obs),
            actions,
            prefs,
        })
    }

    pub fn scene(&self) -> &OcclusionScene {
        &self.scene
    }

    fn tip(&self) -> (T, T) {
        (T::lit(self.scene.occluder_tip[0]), T::lit(self.scene.occluder_tip[1]))
    }

    fn site(&self) -> (T, T) {
        (T::lit(self.scene.pedestrian_site[0]), T::lit(self.scene.pedestrian_site[1]))
    }

    pub fn visible_from(&self, x: T, y: T) -> bool {
        los_visible((x, y), self.tip(), self.site())
    }

    /// Conflict flag: pedestrian present and the longitudinal gap ahead of
    /// the ego below the safe distance (a passed pedestrian leaves a negative
    /// gap), or (with lateral mobility) the ego outside the lane.
    pub fn conflict(&self, s: &StateVector<T>) -> bool {
        let ped = s[slot::CONTEXT] > T::lit(0.5) && s[slot::PED_X] - s[slot::X] < T::lit(self.scene.safe_distance);
        let lane = self.scene.lateral_mobility && s[slot::Y].abs() > T::lit(self.scene.lane_width / 2.0);
        ped || lane
    }

    /// Deterministic observation of `s`.
    pub fn observe(&self, s: &StateVector<T>) -> Observation<T> {
        let visible = self.visible_from(s[slot::X], s[slot::Y]);
        let mut o: Vec<Option<T>> = s.values().iter().map(|&v| Some(v)).collect();
        o[slot::CONTEXT] = Some(T::lit(if visible { OBSERVED } else { NOT_OBSERVED } as f64));
        if !visible {
            o[slot::PED_X] = None;
            o[slot::PED_Y] = None;
        }
        Observation::new(o)
    }

    fn state_with_context(&self, present: bool) -> StateVector<T> {
        let mut v = vec![T::zero(); slot::COUNT];
        let null = T::lit(self.scene.null_position);
        v[slot::CONTEXT] = if present { T::one() } else { T::zero() };
        v[slot::PED_X] = if present { T::lit(self.scene.pedestrian_site[0]) } else { null };
        v[slot::PED_Y] = if present { T::lit(self.scene.pedestrian_site[1]) } else { null };
        v[slot::VX] = T::lit(self.scene.speed_limit);
        let mut s = StateVector::new(v);
        s[slot::CONFLICT] = if self.conflict(&s) { T::one() } else { T::zero() };
        s
    }

    /// Belief with `round(prior · n)` pedestrian-present particles.
    pub fn belief_with_prior(&self, prior: f64, n: usize) -> BeliefEnsemble<T> {
        let present = (prior.clamp(0.0, 1.0) * n as f64).round() as usize;
        let particles = (0..n).map(|i| self.state_with_context(i < present)).collect();
        BeliefEnsemble::uniform(particles)
    }

    /// Copy of `s` with the ego moved to `(x, y)`; conflict recomputed.
    pub fn with_ego_pose(&self, s: &StateVector<T>, x: T, y: T) -> StateVector<T> {
        let mut out = s.clone();
        out[slot::X] = x;
        out[slot::Y] = y;
        out[slot::CONFLICT] = if self.conflict(&out) { T::one() } else { T::zero() };
        out
    }
}

impl<T: Real> GenerativeModel<T> for OcclusionModel<T> {
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

    /// Constant-acceleration double integrator per axis. Longitudinal speed
    /// stops at zero instead of reversing.
    fn transition(&self, s: &StateVector<T>, a: &ActionVector<T>, rng: &mut SimRng) -> StateVector<T> {
        let dt = T::lit(self.scene.dt);
        let half = T::lit(0.5);
        let noise = T::lit(self.scene.process_noise);
        let mut ax = self.actions.clamp_dim(0, a.continuous[0]);
        let mut ay = self.actions.clamp_dim(1, a.continuous.get(1).copied().unwrap_or(T::zero()));
        if noise > T::zero() {
            ax = ax + normal(rng, T::zero(), noise);
            if self.scene.lateral_mobility {
                ay = ay + normal(rng, T::zero(), noise);
            }
        }

        let mut n = s.clone();
        let (x, vx) = (s[slot::X], s[slot::VX]);
        let v_next = vx + ax * dt;
        if v_next < T::zero() {
            let t_stop = if ax < T::zero() { (vx / -ax).min(dt) } else { T::zero() };
            n[slot::X] = x + half * vx * t_stop;
            n[slot::VX] = T::zero();
        } else {
            n[slot::X] = x + vx * dt + half * ax * dt * dt;
            n[slot::VX] = v_next;
        }
        n[slot::AX] = ax;
        if self.scene.lateral_mobility {
            let (y, vy) = (s[slot::Y], s[slot::VY]);
            n[slot::Y] = y + vy * dt + half * ay * dt * dt;
            n[slot::VY] = vy + ay * dt;
            n[slot::AY] = ay;
        }
        n[slot::CONFLICT] = if self.conflict(&n) { T::one() } else { T::zero() };
        n
    }

    fn sample_observation(&self, s: &StateVector<T>, _rng: &mut SimRng) -> Observation<T> {
        self.observe(s)
    }

    fn observation_log_likelihood(&self, o: &Observation<T>, s: &StateVector<T>) -> T {
        matching_log_likelihood(&self.observation_schema, o, &self.observe(s))
    }
}

impl<T: Real> Scenario<T> for OcclusionModel<T> {
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
        self.state_with_context(self.scene.pedestrian_present)
    }

    fn initial_belief(&self, n: usize) -> BeliefEnsemble<T> {
        self.belief_with_prior(self.scene.prior_presence, n)
    }

    fn probes(&self) -> Probes {
        Probes { speed: slot::VX, lateral: slot::Y, steering: None, gaze: None, context: Some(slot::CONTEXT) }
    }
}
