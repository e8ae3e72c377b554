use aidrive::analysis::glance_stats;
use aidrive::experiment::{run_map, trace_csv};
use aidrive::{run_episode, RunConfig, RunStats};
use proptest::prelude::*;

fn short(preset: &str, seconds: f64) -> RunConfig {
    let mut cfg = RunConfig::preset(preset).unwrap();
    cfg.planner.policies = 20;
    cfg.planner.iterations = 2;
    cfg.planner.planning_particles = 20;
    cfg.particles = 100;
    cfg.occlusion.duration = seconds;
    cfg.timeshare.duration = seconds;
    cfg
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn traces_identical_across_thread_counts() {
    for preset in ["1c", "2a-vts"] {
        let cfg = short(preset, 2.0);
        let one = in_pool(1, || trace_csv(&run_episode(&cfg, 77).unwrap()));
        let three = in_pool(3, || trace_csv(&run_episode(&cfg, 77).unwrap()));
        assert_eq!(one, three, "{preset}");
        let other = trace_csv(&run_episode(&cfg, 78).unwrap());
        assert_ne!(one, other, "{preset}");
    }
}

#[test]
fn metrics_are_functions_of_the_trace() {
    let cfg = short("2a-vts", 3.0);
    let trace = run_episode(&cfg, 5).unwrap();
    let copy = trace.clone();
    assert_eq!(RunStats::from_trace(&trace), RunStats::from_trace(&copy));
}

#[test]
fn epistemic_map_ignores_preferences() {
    let mut a = RunConfig::preset("1c").unwrap();
    a.particles = 200;
    a.map.rows = 60;
    let mut b = a.clone();
    b.occlusion.preferences.speed_sd = 0.3;
    b.occlusion.preferences.accel_sd = 2.0;
    b.occlusion.preferences.speed_mean = Some(6.0);
    let ma = run_map(&a).unwrap();
    let mb = run_map(&b).unwrap();
    assert_eq!(ma, mb);
    assert!(ma.iter().any(|p| p.value > 0.0));
}

proptest! {
    #[test]
    fn glance_totals_bound_count_times_mean(gaze in prop::collection::vec(any::<bool>(), 0..200)) {
        let g = glance_stats(&gaze, 0.2);
        let off = gaze.iter().filter(|&&on| !on).count() as f64 * 0.2;
        prop_assert!(g.count as f64 * g.mean_duration <= g.total_off + 1e-9);
        prop_assert!(g.total_off <= off + 1e-9);
    }
}
