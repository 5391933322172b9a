//! Kinematic simulation, handcrafted control and imitation learning for a
//! three-finger grasper whose fingertips are steerable spherical rollers.

pub mod config;
pub mod geometry;
pub mod kinematics;
pub mod rng;
pub mod sim;
pub mod controller;
pub mod episode;
pub mod eval;
pub mod learner;
