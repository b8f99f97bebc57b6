//! Planning and simulation engine for language-guided aerial grasping in
//! cluttered scenes.

pub mod collision;
pub mod error;
pub mod geometry;
pub mod grasp;
pub mod guidance;
pub mod kinematics;
pub mod mission;
pub mod scene;

pub use error::{Error, Result};
