//! The two driving scenarios: passing an occluding object and visual time
//! sharing. Both implement [`Scenario`], which adds episode setup and trace
//! probes on top of the agent's generative model.

pub mod occlusion;
pub mod timeshare;

use crate::belief::BeliefEnsemble;
use crate::model::{GenerativeModel, StateVector};
use crate::scalar::Real;

pub use occlusion::{los_visible, OcclusionModel, OcclusionScene};
pub use timeshare::{apply_gaze, bicycle_step, TimeshareModel, TimeshareScene};

/// State slots the analysis layer reads from a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probes {
    pub speed: usize,
    pub lateral: usize,
    pub steering: Option<usize>,
    pub gaze: Option<usize>,
    /// Discrete context slot whose belief mass is tracked (pedestrian present).
    pub context: Option<usize>,
}

pub trait Scenario<T: Real>: GenerativeModel<T> {
    fn dt(&self) -> T;

    fn duration(&self) -> T;

    fn lane_width(&self) -> T;

    /// True initial state of the generative process.
    fn initial_state(&self) -> StateVector<T>;

    /// Agent's prior belief with `n` particles.
    fn initial_belief(&self, n: usize) -> BeliefEnsemble<T>;

    fn probes(&self) -> Probes;

    fn ticks(&self) -> usize {
        (self.duration() / self.dt()).round().to_usize().unwrap_or(0)
    }
}
