use aidrive::planner::{optimize, plan, PolicyDistribution};
use aidrive::rng::standard_normal;
use aidrive::scenario::timeshare::{TimesharePreferences, TimeshareScene};
use aidrive::{
    ActionSpec, Belief, EfeBreakdown, Gaze, GenerativeModel, OcclusionModel, OcclusionScene, PlannerConfig, Scenario,
    Stream, TimeshareModel,
};
use proptest::prelude::*;

fn quadratic(target: f64) -> impl Fn(&aidrive::Policy, &mut aidrive::SimRng) -> EfeBreakdown<f64> + Sync {
    move |p, _| {
        let prag: Vec<f64> = p.actions.iter().map(|a| -(a.continuous[0] - target).powi(2)).collect();
        let n = prag.len();
        EfeBreakdown::from_steps(prag.clone(), vec![0.0; n], prag)
    }
}

#[test]
fn elite_scores_decrease_on_quadratic() {
    let spec = ActionSpec::symmetric(&["a"], &[4.0], false);
    let cfg = PlannerConfig::default();
    let mut violations = 0;
    for seed in 0..20 {
        let out = optimize(
            PolicyDistribution::initial(&spec, cfg.horizon, None),
            &spec,
            &cfg,
            Stream::new(seed),
            quadratic(3.0),
        )
        .unwrap();
        assert_eq!(out.elite_scores.len(), cfg.iterations);
        violations += out.elite_scores.windows(2).filter(|w| w[1] > w[0]).count();
    }
    assert!(violations <= 2, "{violations} increases of the mean elite score");
}

#[test]
fn plan_is_deterministic() {
    let model = OcclusionModel::new(OcclusionScene::default()).unwrap();
    let belief = model.initial_belief(200);
    let cfg = PlannerConfig { policies: 20, iterations: 2, planning_particles: 20, ..PlannerConfig::default() };
    let a = plan(&belief, &model, &cfg, Stream::new(9), None).unwrap();
    let b = plan(&belief, &model, &cfg, Stream::new(9), None).unwrap();
    assert_eq!(a.action, b.action);
    assert_eq!(a.breakdown, b.breakdown);
    assert_eq!(a.elite_scores, b.elite_scores);
    let c = plan(&belief, &model, &cfg, Stream::new(10), None).unwrap();
    assert_ne!(a.elite_scores, c.elite_scores);
}

#[test]
fn dispersed_lateral_belief_looks_on_road() {
    let scene = TimeshareScene {
        preferences: TimesharePreferences { gaze_log_pref: -7.0, ..Default::default() },
        ..Default::default()
    };
    let model = TimeshareModel::new(scene).unwrap();
    let start = model.start_state();
    let mut rng = Stream::new(3).rng();
    let particles = (0..300).map(|_| model.with_lateral(&start, 0.3 * standard_normal::<f64, _>(&mut rng))).collect();
    let belief = Belief::uniform(particles);
    // one-step lookahead: the value of this glance alone
    let cfg = PlannerConfig { horizon: 1, ..PlannerConfig::default() };
    for seed in 0..5 {
        let out = plan(&belief, &model, &cfg, Stream::new(seed), None).unwrap();
        assert_eq!(out.action.gaze, Some(Gaze::OnRoad), "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn actions_stay_within_bounds(seed in 0u64..1_000_000, target in -50.0f64..50.0, bound in 0.1f64..5.0) {
        let spec = ActionSpec::symmetric(&["a"], &[bound], false);
        let cfg = PlannerConfig { policies: 20, iterations: 3, horizon: 4, ..PlannerConfig::default() };
        let out = optimize(
            PolicyDistribution::initial(&spec, cfg.horizon, None),
            &spec,
            &cfg,
            Stream::new(seed),
            quadratic(target),
        )
        .unwrap();
        let a = out.action.continuous[0];
        prop_assert!(a.abs() <= bound, "{a} outside ±{bound}");
        for step in &out.best_policy.actions {
            prop_assert!(step.continuous[0].abs() <= bound);
        }
    }

    #[test]
    fn occlusion_actions_within_bounds(seed in 0u64..1_000_000) {
        let model = OcclusionModel::new(OcclusionScene { lateral_mobility: true, ..Default::default() }).unwrap();
        let belief = model.initial_belief(50);
        let cfg = PlannerConfig { policies: 20, iterations: 2, planning_particles: 10, horizon: 5, ..PlannerConfig::default() };
        let out = plan(&belief, &model, &cfg, Stream::new(seed), None).unwrap();
        let spec = model.action_spec();
        for (a, (lo, hi)) in out.action.continuous.iter().zip(spec.lower.iter().zip(&spec.upper)) {
            prop_assert!(lo <= a && a <= hi);
        }
    }
}
