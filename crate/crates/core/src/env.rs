//! Interface between episodic environments and the training loop.

use rand_chacha::ChaCha8Rng;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub success: bool,
}

/// Summary of the current (or just finished) episode.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EpisodeStats {
    pub success: bool,
    pub steps: usize,
    pub count2q: usize,
    pub depth2q: usize,
    pub reward: f64,
}

pub trait Environment: Send {
    fn n_actions(&self) -> usize;

    fn obs_shape(&self) -> [usize; 3];

    /// Start a new episode at the given curriculum difficulty.
    fn reset(&mut self, difficulty: usize, rng: &mut ChaCha8Rng) -> Result<()>;

    fn encode_into(&self, out: &mut [f32]);

    /// Mark legal actions. Environments without invalid actions keep the default.
    fn action_mask(&self, mask: &mut [bool]) {
        mask.fill(true);
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome>;

    fn episode_stats(&self) -> EpisodeStats;
}
