//! Desk-scale sun tracking: a simulated six-joint arm carrying a solar panel,
//! an objectness-regularized point tracker that finds the sun in sky frames,
//! and a deep Q-network that learns to keep the panel pointed at it.
//!
//! The modules build on each other bottom-up:
//!
//! - [`ephemeris`]: sun azimuth/elevation for any instant and place.
//! - [`kinematics`]: Denavit-Hartenberg arm model, panel normal, alignment solver.
//! - [`neural`]: small dense networks with exact backprop and a gradient checker.
//! - [`tracker`]: synthetic sky frames, tracking losses, iterative point tracker.
//! - [`agent`]: replay buffer, TD targets, DQN training loop.
//! - [`environment`]: the episodic energy world plus static and oracle baselines.
//! - [`harness`]: configuration files, checkpoints, metrics and the CLI pipeline.

pub mod agent;
pub mod environment;
pub mod ephemeris;
pub mod harness;
pub mod kinematics;
pub mod neural;
pub mod seeding;
pub mod tracker;

/// East-North-Up vector.
pub type Vec3 = nalgebra::Vector3<f64>;

#[cfg(doctest)]
mod book;
