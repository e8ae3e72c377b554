//! Expected free energy of a policy under a particle belief.
//!
//! A policy is scored by rolling planning particles forward through the
//! agent's generative model and, at every lookahead step, adding the
//! pragmatic value (mean log-preference of the predicted observations) and
//! the epistemic value (posterior predictive entropy minus expected
//! ambiguity). `G(π) = -Σ_τ (pragmatic_τ + epistemic_τ)`; lower is better.

use crate::belief::BeliefEnsemble;
use crate::entropy::predictive_entropy;
use crate::model::{ActionVector, GenerativeModel, Observation, StateVector};
use crate::preference::{PreferenceModel, DISPLAY_FLOOR, LOG_DENSITY_FLOOR};
use crate::rng::SimRng;
use crate::scalar::Real;

/// Open-loop action sequence `a_{1:H}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy<T> {
    pub actions: Vec<ActionVector<T>>,
}

impl<T: Real> Policy<T> {
    pub fn new(actions: Vec<ActionVector<T>>) -> Self {
        Policy { actions }
    }

    pub fn constant(action: ActionVector<T>, horizon: usize) -> Self {
        Policy { actions: vec![action; horizon] }
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }
}

/// Sampled state and observation trajectories, indexed `[step][row]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutEnsemble<T> {
    pub states: Vec<Vec<StateVector<T>>>,
    pub observations: Vec<Vec<Observation<T>>>,
}

impl<T> RolloutEnsemble<T> {
    pub fn horizon(&self) -> usize {
        self.states.len()
    }

    pub fn rows(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }
}

/// Per-step value decomposition of one policy.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EfeBreakdown<T> {
    pub pragmatic: Vec<T>,
    pub epistemic: Vec<T>,
    /// Pragmatic value recomputed with log-preferences truncated at -100,
    /// for plotting only.
    pub pragmatic_display: Vec<T>,
    pub total: T,
}

impl<T: Real> EfeBreakdown<T> {
    pub fn from_steps(pragmatic: Vec<T>, epistemic: Vec<T>, pragmatic_display: Vec<T>) -> Self {
        let total = -(pragmatic.iter().copied().sum::<T>() + epistemic.iter().copied().sum::<T>());
        EfeBreakdown { pragmatic, epistemic, pragmatic_display, total }
    }

    pub fn pragmatic_sum(&self) -> T {
        self.pragmatic.iter().copied().sum()
    }

    pub fn epistemic_sum(&self) -> T {
        self.epistemic.iter().copied().sum()
    }

    pub fn pragmatic_display_sum(&self) -> T {
        self.pragmatic_display.iter().copied().sum()
    }
}

/// Forward-sample `Q(o_τ, s_τ | π)` row by row from the planning particles.
pub fn rollout<T: Real, M: GenerativeModel<T> + ?Sized>(
    particles: &[StateVector<T>],
    policy: &Policy<T>,
    model: &M,
    rng: &mut SimRng,
) -> RolloutEnsemble<T> {
    let h = policy.horizon();
    let mut states: Vec<Vec<StateVector<T>>> = (0..h).map(|_| Vec::with_capacity(particles.len())).collect();
    let mut observations: Vec<Vec<Observation<T>>> = (0..h).map(|_| Vec::with_capacity(particles.len())).collect();
    for p in particles {
        let mut s = p.clone();
        for (tau, a) in policy.actions.iter().enumerate() {
            s = model.transition(&s, a, rng);
            observations[tau].push(model.sample_observation(&s, rng));
            states[tau].push(s.clone());
        }
    }
    RolloutEnsemble { states, observations }
}

/// Mean log-preference of each step's observation rows under the planning
/// floor and the display floor.
pub fn pragmatic_value<T: Real>(ens: &RolloutEnsemble<T>, prefs: &PreferenceModel<T>) -> (Vec<T>, Vec<T>) {
    let floor = T::lit(LOG_DENSITY_FLOOR);
    let display = T::lit(DISPLAY_FLOOR);
    ens.observations
        .iter()
        .map(|rows| {
            let n = T::from_usize_lossy(rows.len());
            let (a, b) = rows.iter().fold((T::zero(), T::zero()), |(a, b), o| {
                (a + prefs.sum_unchecked(o, floor), b + prefs.sum_unchecked(o, display))
            });
            (a / n, b / n)
        })
        .unzip()
}

/// Mean entropy of the observation model over `states`; 0 for an empty set.
pub fn expected_ambiguity<T: Real, M: GenerativeModel<T> + ?Sized>(states: &[StateVector<T>], model: &M) -> T {
    if states.is_empty() {
        return T::zero();
    }
    states.iter().map(|s| model.observation_entropy(s)).sum::<T>() / T::from_usize_lossy(states.len())
}

/// EFE of `policy` given already-drawn planning particles.
pub fn evaluate_policy<T: Real, M: GenerativeModel<T> + ?Sized>(
    policy: &Policy<T>,
    particles: &[StateVector<T>],
    model: &M,
    rng: &mut SimRng,
) -> EfeBreakdown<T> {
    let ens = rollout(particles, policy, model, rng);
    let (pragmatic, display) = pragmatic_value(&ens, model.preferences());
    let schema = model.observation_schema();
    let epistemic = ens
        .observations
        .iter()
        .zip(&ens.states)
        .map(|(obs, states)| predictive_entropy(obs, schema) - expected_ambiguity(states, model))
        .collect();
    EfeBreakdown::from_steps(pragmatic, epistemic, display)
}

/// EFE of `policy` under `belief`, drawing `planning_particles` rows by
/// multinomial resampling first.
pub fn expected_free_energy<T: Real, M: GenerativeModel<T> + ?Sized>(
    policy: &Policy<T>,
    belief: &BeliefEnsemble<T>,
    model: &M,
    planning_particles: usize,
    rng: &mut SimRng,
) -> EfeBreakdown<T> {
    let particles = belief.multinomial_resample(planning_particles, rng);
    evaluate_policy(policy, &particles, model, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Gaze, Schema, SlotSpec};
    use crate::preference::PreferenceForm;
    use crate::rng::{normal, Stream};
    use crate::scenario::occlusion::{slot, OBSERVED};
    use crate::scenario::timeshare::slot as ts;
    use crate::scenario::{OcclusionModel, OcclusionScene, Scenario, TimeshareModel, TimeshareScene};
    use approx::assert_abs_diff_eq;

    fn occlusion(mobile: bool) -> OcclusionModel<f64> {
        OcclusionModel::new(OcclusionScene { lateral_mobility: mobile, ..Default::default() }).unwrap()
    }

    fn cruise(h: usize) -> Policy<f64> {
        Policy::constant(ActionVector::new(vec![0.0, 0.0], None), h)
    }

    #[test]
    fn deterministic_rollout_matches_kinematics() {
        let m = occlusion(false);
        let start = m.initial_state();
        let a = 1.0;
        let policy = Policy::constant(ActionVector::new(vec![a, 0.0], None), 20);
        let ens = rollout(&vec![start.clone(); 5], &policy, &m, &mut Stream::new(3).rng());
        for tau in 0..20 {
            let t = 0.2 * (tau + 1) as f64;
            for s in &ens.states[tau] {
                assert_abs_diff_eq!(s[slot::X], 10.0 * t + 0.5 * a * t * t, epsilon = 1e-9);
                assert_abs_diff_eq!(s[slot::VX], 10.0 + a * t, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn context_mixing_after_line_of_sight() {
        let m = occlusion(false);
        let belief = m.initial_belief(1000);
        let n = 400;
        let rows = belief.multinomial_resample(n, &mut Stream::new(4).rng());
        let ens = rollout(&rows, &cruise(20), &m, &mut Stream::new(5).rng());
        // centre-lane line of sight is x = 23, reached at tau index 11 (x = 24)
        for tau in 0..20 {
            let obs = &ens.observations[tau];
            let seen = obs.iter().filter(|o| o.get(slot::CONTEXT) == Some(OBSERVED as f64)).count();
            if tau < 11 {
                assert_eq!(seen, 0);
                continue;
            }
            assert_eq!(seen, n);
            let present = obs.iter().filter(|o| o.get(slot::PED_X) == Some(41.0)).count() as f64;
            let sd = (n as f64 * 0.2 * 0.8).sqrt();
            assert!((present - 0.2 * n as f64).abs() < 3.0 * sd, "tau {tau}: {present}");
        }
    }

    #[test]
    fn off_road_rows_mask_pose() {
        let m = TimeshareModel::<f64>::new(TimeshareScene::default()).unwrap();
        let policy = Policy::constant(ActionVector::new(vec![0.0, 0.0], Some(Gaze::OffRoad)), 10);
        let ens = rollout(&vec![m.initial_state(); 8], &policy, &m, &mut Stream::new(6).rng());
        for obs in &ens.observations {
            for o in obs {
                assert!(o.is_null(ts::X) && o.is_null(ts::Y) && o.is_null(ts::HEADING));
                assert!(!o.is_null(ts::STEER));
            }
        }
    }

    #[test]
    fn pragmatic_at_preferred_observations() {
        let m = occlusion(true);
        let ens = rollout(&vec![m.initial_state(); 4], &cruise(3), &m, &mut Stream::new(7).rng());
        let (p, display) = pragmatic_value(&ens, m.preferences());
        let expected = -0.918_938_533 + (2.0f64 / 3.0).ln() + 2.0 * -(0.5 * std::f64::consts::TAU.sqrt()).ln();
        assert_abs_diff_eq!(expected, -1.776, epsilon = 1e-3);
        for (a, b) in p.iter().zip(&display) {
            assert_abs_diff_eq!(*a, expected, epsilon = 1e-6);
            assert_abs_diff_eq!(*b, expected, epsilon = 1e-6);
        }
    }

    #[test]
    fn conflict_rows_hit_the_floor() {
        let m = occlusion(false);
        let mut s = m.belief_with_prior(1.0, 1).particles[0].clone();
        s[slot::X] = 39.5;
        let ens = rollout(&[s], &cruise(1), &m, &mut Stream::new(8).rng());
        let (p, display) = pragmatic_value(&ens, m.preferences());
        assert!(p[0] < -1000.0 && p[0] > -1002.0);
        assert!(display[0] < -100.0 && display[0] > -102.0);
    }

    #[test]
    fn gaze_split_pragmatic() {
        let m = TimeshareModel::<f64>::new(TimeshareScene::default()).unwrap();
        let gaze_only = m.preferences().subset(|n| n == "gaze");
        let on = rollout(&[m.initial_state()], &cruise_gaze(Gaze::OnRoad), &m, &mut Stream::new(1).rng());
        let off = rollout(&[m.initial_state()], &cruise_gaze(Gaze::OffRoad), &m, &mut Stream::new(1).rng());
        let ens = RolloutEnsemble {
            states: vec![[on.states[0].clone(), off.states[0].clone()].concat()],
            observations: vec![[on.observations[0].clone(), off.observations[0].clone()].concat()],
        };
        let (p, _) = pragmatic_value(&ens, &gaze_only);
        assert_abs_diff_eq!(p[0], 0.5 * -7.0 + 0.5 * (-(-7.0f64).exp()).ln_1p(), epsilon = 1e-12);
        assert_abs_diff_eq!(p[0], -3.5005, epsilon = 1e-4);
    }

    fn cruise_gaze(g: Gaze) -> Policy<f64> {
        Policy::constant(ActionVector::new(vec![0.0, 0.0], Some(g)), 1)
    }

    /// One continuous slot observed with Gaussian noise of unit sd.
    struct NoisyModel {
        schema: Schema,
        actions: ActionSpec<f64>,
        prefs: PreferenceModel<f64>,
    }

    use crate::model::ActionSpec;

    impl NoisyModel {
        fn new() -> Self {
            NoisyModel {
                schema: Schema::new(vec![SlotSpec::continuous("z", 1e-3)]),
                actions: ActionSpec::symmetric(&["u"], &[1.0], false),
                prefs: PreferenceModel::new(1).with("z", 0, PreferenceForm::Gaussian { mean: 0.0, sd: 1.0 }),
            }
        }
    }

    impl GenerativeModel<f64> for NoisyModel {
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
        fn transition(&self, s: &StateVector<f64>, _a: &ActionVector<f64>, _rng: &mut SimRng) -> StateVector<f64> {
            s.clone()
        }
        fn sample_observation(&self, s: &StateVector<f64>, rng: &mut SimRng) -> Observation<f64> {
            Observation::new(vec![Some(normal(rng, s[0], 1.0))])
        }
        fn observation_log_likelihood(&self, o: &Observation<f64>, s: &StateVector<f64>) -> f64 {
            o.get(0).map_or(0.0, |z| -0.5 * (z - s[0]).powi(2))
        }
        fn observation_entropy(&self, _s: &StateVector<f64>) -> f64 {
            0.5 * (std::f64::consts::TAU * std::f64::consts::E).ln()
        }
    }

    #[test]
    fn ambiguity_closed_form_and_empty() {
        let m = NoisyModel::new();
        let rows = vec![StateVector::new(vec![0.0]); 5];
        assert_abs_diff_eq!(expected_ambiguity(&rows, &m), 1.418_938_533, epsilon = 1e-9);
        assert_eq!(expected_ambiguity(&[], &m), 0.0);
        let occ = occlusion(false);
        assert_eq!(expected_ambiguity(&[occ.initial_state()], &occ), 0.0);
    }

    #[test]
    fn certain_belief_has_no_epistemic_value() {
        let m = occlusion(false);
        let rows = vec![m.initial_state(); 50];
        let e = evaluate_policy(&cruise(20), &rows, &m, &mut Stream::new(9).rng());
        assert!(e.epistemic.iter().all(|&v| v == 0.0));
        assert_abs_diff_eq!(e.total, -e.pragmatic_sum(), epsilon = 1e-12);
    }

    #[test]
    fn earlier_line_of_sight_scores_more_epistemic_value() {
        let m = occlusion(false);
        let rows = m.initial_belief(1000).multinomial_resample(100, &mut Stream::new(10).rng());
        let fast = evaluate_policy(&cruise(20), &rows, &m, &mut Stream::new(11).rng());
        let stop = Policy::constant(ActionVector::new(vec![-4.0, 0.0], None), 20);
        let slow = evaluate_policy(&stop, &rows, &m, &mut Stream::new(11).rng());
        assert!(slow.epistemic_sum() == 0.0);
        assert!(fast.epistemic_sum() > 0.0);
    }

    #[test]
    fn reproducible_and_decomposed() {
        let m = TimeshareModel::<f64>::new(TimeshareScene::default()).unwrap();
        let rows = vec![m.initial_state(); 30];
        let p = Policy::constant(ActionVector::new(vec![0.1, 0.01], Some(Gaze::OffRoad)), 8);
        let a = evaluate_policy(&p, &rows, &m, &mut Stream::new(12).rng());
        let b = evaluate_policy(&p, &rows, &m, &mut Stream::new(12).rng());
        assert_eq!(a, b);
        assert_eq!(a.total, -(a.pragmatic_sum() + a.epistemic_sum()));
    }

    #[test]
    fn speed_ranking_under_sharp_preference() {
        let scene = OcclusionScene {
            preferences: crate::scenario::occlusion::OcclusionPreferences { speed_sd: 0.01, ..Default::default() },
            ..Default::default()
        };
        let m = OcclusionModel::<f64>::new(scene).unwrap();
        let speeds = [9.7, 9.9, 10.0, 10.05, 10.3];
        let mut scored: Vec<(f64, f64)> = speeds
            .iter()
            .map(|&v| {
                let mut s = m.initial_state();
                s[slot::VX] = v;
                let e = evaluate_policy(&cruise(5), &[s], &m, &mut Stream::new(13).rng());
                (e.total, (v - 10.0f64).abs())
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(scored.windows(2).all(|w| w[0].1 <= w[1].1));
    }
}
