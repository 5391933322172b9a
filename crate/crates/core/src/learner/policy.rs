//! The policy network with its input/output encoding.

use serde::{Deserialize, Serialize};

use super::net::{Mlp, POLICY_ARCH};
use super::state::{slots, StateVec35, ACTION_DIM, STATE_DIM};
use crate::config::{JointVector, NUM_FINGERS};
use crate::controller::ControlError;
use crate::episode::{Observation, Policy};

/// Multiplier applied to millimetre slots before they enter the network.
pub const POSITION_INPUT_SCALE: f64 = 0.01;

/// How raw network outputs map to a joint target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// `target = output · scale + offset`
    Absolute,
    /// `target = measured joint + output · scale + offset`
    JointDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetMetadata {
    pub arch: Vec<usize>,
    pub leaky_slope: f64,
    pub input_scaling: Vec<f64>,
    /// Subtracted from each (already scaled) input.
    pub input_offset: Vec<f64>,
    /// One mode per joint.
    pub output_mode: Vec<OutputMode>,
    pub output_scaling: Vec<f64>,
    pub output_offset: Vec<f64>,
    pub seed: u64,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub initial_loss: Option<f64>,
    pub loss_curve: Vec<f64>,
}

pub fn default_input_scaling() -> Vec<f64> {
    let mut s = vec![1.0; STATE_DIM];
    for r in slots::POSITIONS {
        for v in &mut s[r] {
            *v = POSITION_INPUT_SCALE;
        }
    }
    s
}

/// Base joints are commanded absolutely (their target follows the object),
/// pivot and roller joints as increments on the measured angle.
pub fn default_output_mode() -> Vec<OutputMode> {
    (0..ACTION_DIM).map(|i| if i % 3 == 0 { OutputMode::Absolute } else { OutputMode::JointDelta }).collect()
}

/// Per-joint output units: roughly one step's worth of motion per joint kind.
pub fn default_output_scaling() -> Vec<f64> {
    let mut s = vec![0.0; ACTION_DIM];
    for f in 0..NUM_FINGERS {
        s[3 * f] = 0.01;
        s[3 * f + 1] = 0.05;
        s[3 * f + 2] = 0.2;
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub mlp: Mlp,
    pub meta: NetMetadata,
}

impl PolicyNet {
    pub fn new(leaky_slope: f64, seed: u64) -> Self {
        Self {
            mlp: Mlp::init(&POLICY_ARCH, leaky_slope, seed),
            meta: NetMetadata {
                arch: POLICY_ARCH.to_vec(),
                leaky_slope,
                input_scaling: default_input_scaling(),
                input_offset: vec![0.0; STATE_DIM],
                output_mode: default_output_mode(),
                output_scaling: default_output_scaling(),
                output_offset: vec![0.0; ACTION_DIM],
                seed,
                epochs: 0,
                batch: 0,
                lr: 0.0,
                initial_loss: None,
                loss_curve: Vec::new(),
            },
        }
    }

    pub fn encode_input(&self, s: &StateVec35) -> [f64; STATE_DIM] {
        std::array::from_fn(|i| s.0[i] * self.meta.input_scaling[i] - self.meta.input_offset[i])
    }

    /// Rescales inputs and outputs to zero mean, unit variance over `states`
    /// / `actions`. Constant inputs keep their default scaling.
    pub fn standardize(&mut self, states: &[StateVec35], actions: &[[f64; ACTION_DIM]]) {
        let n = states.len().max(1) as f64;
        let mut mean = [0.0; STATE_DIM];
        let mut sq = [0.0; STATE_DIM];
        for s in states {
            for i in 0..STATE_DIM {
                mean[i] += s.0[i] / n;
            }
        }
        for s in states {
            for i in 0..STATE_DIM {
                sq[i] += (s.0[i] - mean[i]).powi(2) / n;
            }
        }
        for i in 0..STATE_DIM {
            let std = sq[i].sqrt();
            if std > 1e-9 {
                self.meta.input_scaling[i] = 1.0 / std;
                self.meta.input_offset[i] = mean[i] / std;
            }
        }
        let mut omean = [0.0; ACTION_DIM];
        let mut osq = [0.0; ACTION_DIM];
        for (s, a) in states.iter().zip(actions) {
            for i in 0..ACTION_DIM {
                omean[i] += (a[i] - self.reference(s, i)) / n;
            }
        }
        for (s, a) in states.iter().zip(actions) {
            for i in 0..ACTION_DIM {
                osq[i] += (a[i] - self.reference(s, i) - omean[i]).powi(2) / n;
            }
        }
        for i in 0..ACTION_DIM {
            let std = osq[i].sqrt();
            if std > 1e-9 {
                self.meta.output_scaling[i] = std;
            }
            self.meta.output_offset[i] = omean[i];
        }
    }

    fn reference(&self, s: &StateVec35, i: usize) -> f64 {
        match self.meta.output_mode[i] {
            OutputMode::Absolute => 0.0,
            OutputMode::JointDelta => s.0[slots::JOINTS][i],
        }
    }

    /// Network-space regression target for `action` taken in state `s`.
    pub fn encode_target(&self, s: &StateVec35, action: &[f64; ACTION_DIM]) -> [f64; ACTION_DIM] {
        std::array::from_fn(|i| {
            (action[i] - self.reference(s, i) - self.meta.output_offset[i]) / self.meta.output_scaling[i]
        })
    }

    pub fn decode_output(&self, s: &StateVec35, out: &[f64]) -> [f64; ACTION_DIM] {
        std::array::from_fn(|i| {
            self.reference(s, i) + self.meta.output_offset[i] + out[i] * self.meta.output_scaling[i]
        })
    }

    /// Joint targets for state `s`.
    pub fn forward(&self, s: &StateVec35) -> [f64; ACTION_DIM] {
        let out = self.mlp.forward(&self.encode_input(s));
        self.decode_output(s, &out)
    }
}

/// A trained network acting as a closed-loop policy.
#[derive(Debug, Clone)]
pub struct LearnedPolicy {
    pub net: PolicyNet,
}

impl LearnedPolicy {
    pub fn new(net: PolicyNet) -> Self {
        Self { net }
    }
}

impl Policy for LearnedPolicy {
    fn act(&mut self, obs: &Observation<'_>) -> Result<JointVector, ControlError> {
        let a = self.net.forward(&obs.state());
        Ok(JointVector::clamped(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_round_trips_through_encoding() {
        let net = PolicyNet::new(0.01, 1);
        let mut s = StateVec35([0.0; STATE_DIM]);
        for (i, v) in s.0.iter_mut().enumerate() {
            *v = 0.1 * i as f64;
        }
        let a: [f64; ACTION_DIM] = std::array::from_fn(|i| 0.3 - 0.07 * i as f64);
        let t = net.encode_target(&s, &a);
        let back = net.decode_output(&s, &t);
        for i in 0..ACTION_DIM {
            assert!((back[i] - a[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn positions_are_scaled_on_input() {
        let net = PolicyNet::new(0.01, 1);
        let mut s = StateVec35([1.0; STATE_DIM]);
        s.0[9] = 170.0;
        let x = net.encode_input(&s);
        assert!((x[9] - 1.7).abs() < 1e-15);
        assert_eq!(x[0], 1.0);
        assert_eq!(x[12], 1.0);
    }
}
