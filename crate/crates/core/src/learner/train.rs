//! Behaviour cloning by mini-batch gradient descent.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::net::Mlp;
use super::policy::PolicyNet;
use super::state::{StateVec35, ACTION_DIM, STATE_DIM};
use crate::episode::Trajectory;
use crate::rng::{rng_for, stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
    #[error("no path between the requested poses")]
    NoPath,
    #[error("beta must lie in [0, 1], got {0}")]
    InvalidBeta(f64),
    #[error(transparent)]
    Episode(#[from] crate::episode::EpisodeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self { epochs: 200, batch: 64, lr: 1e-3, seed: 0 }
    }
}

/// Aggregated state-action pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub states: Vec<StateVec35>,
    pub actions: Vec<[f64; ACTION_DIM]>,
}

impl Dataset {
    pub fn from_trajectories<'a>(trajs: impl IntoIterator<Item = &'a Trajectory>) -> Self {
        let mut d = Self::default();
        for t in trajs {
            d.extend_from(t);
        }
        d
    }

    pub fn extend_from(&mut self, t: &Trajectory) {
        for s in &t.steps {
            self.states.push(s.state);
            self.actions.push(s.action);
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Mean loss over the whole set, evaluated in chunks.
pub fn full_loss(net: &Mlp, x: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    const CHUNK: usize = 4096;
    let n = x.ncols();
    let mut total = 0.0;
    let mut start = 0;
    while start < n {
        let len = CHUNK.min(n - start);
        total += net.loss(&x.columns(start, len).into_owned(), &t.columns(start, len).into_owned()) * len as f64;
        start += len;
    }
    total / n.max(1) as f64
}

/// Trains `net` in place on columns of `x` / `t`. Returns the loss before
/// training and after every epoch.
pub fn fit(net: &mut Mlp, x: &DMatrix<f64>, t: &DMatrix<f64>, hyper: &TrainHyper) -> Result<(f64, Vec<f64>), LearnError> {
    let n = x.ncols();
    if n == 0 {
        return Err(LearnError::EmptyDataset);
    }
    let batch = hyper.batch.max(1);
    let initial = full_loss(net, x, t);
    let mut curve = Vec::with_capacity(hyper.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..hyper.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_for(hyper.seed, stream::SHUFFLE, epoch as u64));
        for chunk in order.chunks(batch) {
            let xb = x.select_columns(chunk);
            let tb = t.select_columns(chunk);
            let (_, grad) = net.loss_and_grad(&xb, &tb);
            net.apply_gradient(&grad, hyper.lr);
        }
        let loss = full_loss(net, x, t);
        if !loss.is_finite() {
            return Err(LearnError::Diverged(epoch));
        }
        curve.push(loss);
    }
    Ok((initial, curve))
}

/// Encodes `data` for `net` as column matrices.
pub fn encode(net: &PolicyNet, data: &Dataset) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = data.len();
    let mut x = DMatrix::zeros(STATE_DIM, n);
    let mut t = DMatrix::zeros(ACTION_DIM, n);
    for (j, (s, a)) in data.states.iter().zip(&data.actions).enumerate() {
        x.column_mut(j).copy_from_slice(&net.encode_input(s));
        t.column_mut(j).copy_from_slice(&net.encode_target(s, a));
    }
    (x, t)
}

/// Fits a freshly initialised policy network to `data`, with input and
/// output scaling fitted to the same data.
pub fn train_bc(data: &Dataset, leaky_slope: f64, hyper: &TrainHyper) -> Result<PolicyNet, LearnError> {
    let mut net = PolicyNet::new(leaky_slope, hyper.seed);
    net.standardize(&data.states, &data.actions);
    continue_training(net, data, hyper)
}

/// Further trains `net` on `data`, appending to its loss curve.
pub fn continue_training(mut net: PolicyNet, data: &Dataset, hyper: &TrainHyper) -> Result<PolicyNet, LearnError> {
    if data.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let (x, t) = encode(&net, data);
    let (initial, curve) = fit(&mut net.mlp, &x, &t, hyper)?;
    let m = &mut net.meta;
    m.initial_loss.get_or_insert(initial);
    m.epochs += hyper.epochs;
    m.batch = hyper.batch;
    m.lr = hyper.lr;
    m.loss_curve.extend(curve);
    Ok(net)
}
