use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Observation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Tabular,
    Linear,
    Network,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Tabular => "tabular",
            Backend::Linear => "linear",
            Backend::Network => "network",
        })
    }
}

/// Per-output action-value estimates with single-output updates.
pub trait QFunction: Clone + Send {
    fn backend(&self) -> Backend;

    fn output_arity(&self) -> usize;

    /// Exactly `output_arity` values.
    fn predict(&self, obs: &Observation) -> Vec<f64>;

    /// Moves output `index` towards `target` with step size `alpha`. Only that
    /// output's error contributes.
    fn update(&mut self, obs: &Observation, index: usize, target: f64, alpha: f64) -> Result<()>;

    /// All parameters, flattened.
    fn params(&self) -> Vec<f64>;

    fn shape(&self) -> Vec<usize>;

    /// Whether bootstrap targets should come from a frozen copy.
    fn uses_target_copy(&self) -> bool {
        self.backend() != Backend::Tabular
    }

    fn dump(&self, slot_version: u64) -> QDump {
        QDump {
            backend: self.backend(),
            output_arity: self.output_arity(),
            slot_version,
            shape: self.shape(),
            params: self.params(),
        }
    }
}

/// Parameter dump: a small header followed by the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QDump {
    pub backend: Backend,
    pub output_arity: usize,
    pub slot_version: u64,
    pub shape: Vec<usize>,
    pub params: Vec<f64>,
}

fn check_finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} = {v}")))
    }
}

fn check_index(index: usize, arity: usize) -> Result<()> {
    if index < arity {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { index, arity })
    }
}

/// One row of values per discrete state id, initialised to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    states: usize,
    arity: usize,
    values: Vec<f64>,
}

impl TabularQ {
    pub fn new(states: usize, arity: usize) -> Self {
        Self {
            states,
            arity,
            values: vec![0.0; states * arity],
        }
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.arity..(state + 1) * self.arity]
    }

    pub fn set(&mut self, state: usize, index: usize, value: f64) {
        self.values[state * self.arity + index] = value;
    }
}

impl QFunction for TabularQ {
    fn backend(&self) -> Backend {
        Backend::Tabular
    }

    fn output_arity(&self) -> usize {
        self.arity
    }

    fn predict(&self, obs: &Observation) -> Vec<f64> {
        self.row(obs.state).to_vec()
    }

    fn update(&mut self, obs: &Observation, index: usize, target: f64, alpha: f64) -> Result<()> {
        check_index(index, self.arity)?;
        check_finite("target", target)?;
        let cell = &mut self.values[obs.state * self.arity + index];
        let next = *cell + alpha * (target - *cell);
        check_finite("tabular value", next)?;
        *cell = next;
        Ok(())
    }

    fn params(&self) -> Vec<f64> {
        self.values.clone()
    }

    fn shape(&self) -> Vec<usize> {
        vec![self.states, self.arity]
    }
}

/// `Q(s, i) = w_i · φ(s) + b_i`, zero-initialised.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearQ {
    input: usize,
    arity: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearQ {
    pub fn new(input: usize, arity: usize) -> Self {
        Self {
            input,
            arity,
            weights: vec![0.0; input * arity],
            bias: vec![0.0; arity],
        }
    }

    fn output(&self, x: &[f64], i: usize) -> f64 {
        let w = &self.weights[i * self.input..(i + 1) * self.input];
        self.bias[i] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

impl QFunction for LinearQ {
    fn backend(&self) -> Backend {
        Backend::Linear
    }

    fn output_arity(&self) -> usize {
        self.arity
    }

    fn predict(&self, obs: &Observation) -> Vec<f64> {
        (0..self.arity).map(|i| self.output(&obs.features, i)).collect()
    }

    fn update(&mut self, obs: &Observation, index: usize, target: f64, alpha: f64) -> Result<()> {
        check_index(index, self.arity)?;
        check_finite("target", target)?;
        let error = target - self.output(&obs.features, index);
        check_finite("td error", error)?;
        let step = alpha * error;
        let w = &mut self.weights[index * self.input..(index + 1) * self.input];
        for (wj, xj) in w.iter_mut().zip(&obs.features) {
            *wj += step * xj;
        }
        self.bias[index] += step;
        check_finite("bias", self.bias[index])
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.extend_from_slice(&self.bias);
        p
    }

    fn shape(&self) -> Vec<usize> {
        vec![self.input, self.arity]
    }
}

pub const DEFAULT_HIDDEN: usize = 64;

/// One hidden ReLU layer followed by `arity` linear heads.
///
/// Parameter layout (flat): `w1[hidden][input]`, `b1[hidden]`,
/// `w2[arity][hidden]`, `b2[arity]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkQ {
    input: usize,
    hidden: usize,
    arity: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl NetworkQ {
    /// Hidden weights use a seeded uniform fan-in initialisation; the heads are
    /// drawn from `[-0.01, 0.01]` so initial Q-values are near zero.
    pub fn new(input: usize, hidden: usize, arity: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = (6.0 / input.max(1) as f64).sqrt();
        let w1 = (0..hidden * input)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        let w2 = (0..arity * hidden)
            .map(|_| rng.gen_range(-0.01..=0.01))
            .collect();
        Self {
            input,
            hidden,
            arity,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: (0..arity).map(|_| rng.gen_range(-0.01..=0.01)).collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let (w1, rest) = params.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2.copy_from_slice(b2);
        Ok(())
    }

    /// Hidden pre-activations.
    fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.b1.clone();
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (k, zk) in z.iter_mut().enumerate() {
                *zk += self.w1[k * self.input + j] * xj;
            }
        }
        z
    }

    fn head(&self, h: &[f64], i: usize) -> f64 {
        let w = &self.w2[i * self.hidden..(i + 1) * self.hidden];
        self.b2[i] + w.iter().zip(h).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Gradient of `½ (target − Q(s, index))²` with respect to every parameter,
    /// in the flat layout.
    pub fn loss_gradient(&self, obs: &Observation, index: usize, target: f64) -> Vec<f64> {
        let x = &obs.features;
        let z = self.hidden_pre(x);
        let h: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
        let delta = self.head(&h, index) - target;

        let mut grad = vec![0.0; self.param_count()];
        let (gw1, rest) = grad.split_at_mut(self.w1.len());
        let (gb1, rest) = rest.split_at_mut(self.b1.len());
        let (gw2, gb2) = rest.split_at_mut(self.w2.len());

        let w2_row = &self.w2[index * self.hidden..(index + 1) * self.hidden];
        for k in 0..self.hidden {
            gw2[index * self.hidden + k] = delta * h[k];
            if z[k] > 0.0 {
                let dz = delta * w2_row[k];
                gb1[k] = dz;
                for (j, &xj) in x.iter().enumerate() {
                    gw1[k * self.input + j] = dz * xj;
                }
            }
        }
        gb2[index] = delta;
        grad
    }
}

impl QFunction for NetworkQ {
    fn backend(&self) -> Backend {
        Backend::Network
    }

    fn output_arity(&self) -> usize {
        self.arity
    }

    fn predict(&self, obs: &Observation) -> Vec<f64> {
        let h: Vec<f64> = self
            .hidden_pre(&obs.features)
            .into_iter()
            .map(|v| v.max(0.0))
            .collect();
        (0..self.arity).map(|i| self.head(&h, i)).collect()
    }

    fn update(&mut self, obs: &Observation, index: usize, target: f64, alpha: f64) -> Result<()> {
        check_index(index, self.arity)?;
        check_finite("target", target)?;
        let x = &obs.features;
        let z = self.hidden_pre(x);
        let h: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
        let delta = self.head(&h, index) - target;
        check_finite("td error", delta)?;
        let step = alpha * delta;

        let row = index * self.hidden;
        for k in 0..self.hidden {
            if z[k] > 0.0 {
                let dz = step * self.w2[row + k];
                self.b1[k] -= dz;
                for (j, &xj) in x.iter().enumerate() {
                    if xj != 0.0 {
                        self.w1[k * self.input + j] -= dz * xj;
                    }
                }
            }
            self.w2[row + k] -= step * h[k];
        }
        self.b2[index] -= step;
        check_finite("output bias", self.b2[index])
    }

    fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.extend_from_slice(&self.b2);
        p
    }

    fn shape(&self) -> Vec<usize> {
        vec![self.input, self.hidden, self.arity]
    }
}

/// Runtime-selected backend.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyQ {
    Tabular(TabularQ),
    Linear(LinearQ),
    Network(NetworkQ),
}

impl AnyQ {
    pub fn build(
        backend: Backend,
        state_count: usize,
        feature_len: usize,
        hidden: usize,
        arity: usize,
        seed: u64,
    ) -> Self {
        match backend {
            Backend::Tabular => AnyQ::Tabular(TabularQ::new(state_count, arity)),
            Backend::Linear => AnyQ::Linear(LinearQ::new(feature_len, arity)),
            Backend::Network => AnyQ::Network(NetworkQ::new(feature_len, hidden, arity, seed)),
        }
    }

    pub fn from_dump(dump: &QDump) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("malformed {} dump", dump.backend));
        let q = match (dump.backend, dump.shape.as_slice()) {
            (Backend::Tabular, &[states, arity]) => {
                let mut q = TabularQ::new(states, arity);
                if dump.params.len() != q.values.len() {
                    return Err(bad());
                }
                q.values.copy_from_slice(&dump.params);
                AnyQ::Tabular(q)
            }
            (Backend::Linear, &[input, arity]) => {
                let mut q = LinearQ::new(input, arity);
                if dump.params.len() != input * arity + arity {
                    return Err(bad());
                }
                let (w, b) = dump.params.split_at(input * arity);
                q.weights.copy_from_slice(w);
                q.bias.copy_from_slice(b);
                AnyQ::Linear(q)
            }
            (Backend::Network, &[input, hidden, arity]) => {
                let mut q = NetworkQ::new(input, hidden, arity, 0);
                q.set_params(&dump.params)?;
                AnyQ::Network(q)
            }
            _ => return Err(bad()),
        };
        if q.output_arity() != dump.output_arity {
            return Err(bad());
        }
        Ok(q)
    }
}

macro_rules! dispatch_q {
    ($self:ident, $q:ident => $body:expr) => {
        match $self {
            AnyQ::Tabular($q) => $body,
            AnyQ::Linear($q) => $body,
            AnyQ::Network($q) => $body,
        }
    };
}

impl QFunction for AnyQ {
    fn backend(&self) -> Backend {
        dispatch_q!(self, q => q.backend())
    }
    fn output_arity(&self) -> usize {
        dispatch_q!(self, q => q.output_arity())
    }
    fn predict(&self, obs: &Observation) -> Vec<f64> {
        dispatch_q!(self, q => q.predict(obs))
    }
    fn update(&mut self, obs: &Observation, index: usize, target: f64, alpha: f64) -> Result<()> {
        dispatch_q!(self, q => q.update(obs, index, target, alpha))
    }
    fn params(&self) -> Vec<f64> {
        dispatch_q!(self, q => q.params())
    }
    fn shape(&self) -> Vec<usize> {
        dispatch_q!(self, q => q.shape())
    }
}
