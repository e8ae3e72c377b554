//! Active inference driver models: a particle-filter belief, expected free
//! energy evaluated by Monte Carlo rollouts, and a cross-entropy planner,
//! applied to an occluded-pedestrian scenario and a visual time-sharing
//! scenario.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the experiment harness uses.

pub mod analysis;
pub mod belief;
pub mod efe;
pub mod entropy;
pub mod error;
pub mod experiment;
pub mod model;
pub mod planner;
pub mod preference;
pub mod rng;
pub mod scalar;
pub mod scenario;

pub use analysis::{RunStats, SimTrace};
pub use belief::{filter_step, BeliefSummary, ResampleTrigger};
pub use efe::EfeBreakdown;
pub use error::{Error, Result};
pub use experiment::{run_batch, run_episode, run_sweep, RunConfig, ScenarioKind};
pub use model::{ActionSpec, Gaze, GenerativeModel, Schema, SlotKind, SlotSpec};
pub use planner::{PlanOutcome, PlannerConfig};
pub use rng::{run_seed, SimRng, Stream};
pub use scalar::Real;
pub use scenario::{OcclusionScene, Scenario, TimeshareScene};

pub type Belief = belief::BeliefEnsemble<f64>;
pub type State = model::StateVector<f64>;
pub type Obs = model::Observation<f64>;
pub type Action = model::ActionVector<f64>;
pub type Policy = efe::Policy<f64>;
pub type Preferences = preference::PreferenceModel<f64>;
pub type OcclusionModel = scenario::OcclusionModel<f64>;
pub type TimeshareModel = scenario::TimeshareModel<f64>;
