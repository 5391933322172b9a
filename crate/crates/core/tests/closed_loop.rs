//! Closed-loop properties of the handcrafted controller in the world model.

use std::f64::consts::FRAC_PI_2;

use rollergrasp_core::config::{GrasperConfig, ObjectModel};
use rollergrasp_core::controller::TargetSpec;
use rollergrasp_core::episode::{rollout, EpisodeOptions, HandcraftedPolicy, Termination, Trajectory, STOP_THRESHOLD};
use rollergrasp_core::eval::{default_axes, SuiteName, GRASP_CENTER};
use rollergrasp_core::geometry::{Pose, UnitQuat, Vec3};
use rollergrasp_core::sim::{Sim, SimParams};

const OPTS: EpisodeOptions = EpisodeOptions { max_steps: 3000, stop_threshold: Some(STOP_THRESHOLD) };

fn quarter_turn(axis: Vec3) -> TargetSpec {
    let start = Pose::from_position(GRASP_CENTER);
    TargetSpec { start, target: Pose::new(GRASP_CENTER, UnitQuat::from_axis_angle(axis, FRAC_PI_2).unwrap()) }
}

fn run(object: ObjectModel, axis: Vec3, params: SimParams, seed: u64) -> Trajectory {
    let sim = Sim::new(GrasperConfig::default(), params).unwrap();
    let mut expert = HandcraftedPolicy::new(sim.config.clone());
    rollout(&sim, object, &quarter_turn(axis), seed, &mut expert, None, &OPTS).unwrap()
}

/// Fraction of steps on which every contact slips less than 1e-6 mm.
fn rolling_fraction(t: &Trajectory) -> f64 {
    let ok = t.steps.iter().filter(|s| s.residuals.iter().all(|r| *r < 1e-6)).count();
    ok as f64 / t.steps.len() as f64
}

#[test]
fn sphere_yaw_rolls_without_slipping() {
    let t = run(ObjectModel::sphere(30.0), Vec3::Z, SimParams::noiseless(), 3);
    assert_eq!(t.termination, Termination::Converged);
    assert!(rolling_fraction(&t) >= 0.99, "{}", rolling_fraction(&t));
}

// The controller leaves the component of each contact motion along the
// pivot axis to the compliant base joints, which the rolling fit does not
// see; only vertical-axis yaw makes that component vanish at every contact.
#[test]
#[ignore = "tilted axes slip ~1e-3 mm/step: base motion is left to grip compliance"]
fn sphere_s_suite_rolls_without_slipping() {
    for axis in default_axes(SuiteName::S) {
        let t = run(ObjectModel::sphere(30.0), axis, SimParams::noiseless(), 3);
        assert!(rolling_fraction(&t) >= 0.99, "{axis:?}: {}", rolling_fraction(&t));
    }
}

#[test]
fn sphere_converges_on_every_s_and_d_axis() {
    for name in [SuiteName::S, SuiteName::D] {
        for axis in default_axes(name) {
            let t = run(ObjectModel::sphere(30.0), axis, SimParams::noiseless(), 3);
            assert_eq!(t.termination, Termination::Converged, "{axis:?}: e {}", t.final_e_omega);
        }
    }
}

#[test]
fn cube_s_suite_converges_with_noise() {
    for (i, axis) in default_axes(SuiteName::S).into_iter().enumerate() {
        let t = run(ObjectModel::cube60(), axis, SimParams::default(), 40 + i as u64);
        assert_ne!(t.termination, Termination::Dropped, "{axis:?}");
        assert!(t.final_e_omega < 10.0, "{axis:?}: e {}", t.final_e_omega);
    }
}

#[test]
fn episodes_depend_only_on_seed() {
    let axis = default_axes(SuiteName::S)[3];
    let a = run(ObjectModel::cube60(), axis, SimParams::default(), 8);
    assert_eq!(a, run(ObjectModel::cube60(), axis, SimParams::default(), 8));
    assert_ne!(a, run(ObjectModel::cube60(), axis, SimParams::default(), 9));
}
