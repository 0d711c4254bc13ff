//! Policy/value function approximators.
//!
//! Both families keep every trainable scalar in one flat vector described by
//! a list of named [`ParamSegment`]s, so the optimizer, checkpoints and the
//! Fisher-information code can treat them uniformly.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuits::{
    benchmark_circuit, embedding_circuit, CircuitTemplate, NUM_QUBITS, NUM_STATES,
};
use crate::error::{Error, Result};
use crate::lake::NUM_ACTIONS;
use crate::qsim::{circuit_gradient, run_circuit, z_expectations, StateVector};

/// Which approximator a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelSpec {
    /// Hybrid model on benchmark circuit `id`.
    Pqc(usize),
    /// Two-hidden-layer tanh MLP of the given width.
    Nn(usize),
}

pub const MLP_WIDTHS: [usize; 4] = [2, 4, 8, 16];

/// Published classical weight counts, which exceed [`mlp_param_count`] by
/// `24 + 3h`.
pub const PUBLISHED_NN_WEIGHTS: [(usize, usize); 4] = [(2, 125), (4, 237), (8, 509), (16, 1245)];

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Pqc(id) => write!(f, "PQC-{id}"),
            ModelSpec::Nn(h) => write!(f, "NN-{h}"),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    /// Accepts `pqc6`, `PQC-6`, `nn4`, `NN-4`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        let parse = |digits: &str| {
            digits
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad model spec {s:?}")))
        };
        if let Some(d) = lower.strip_prefix("pqc") {
            let id = parse(d)?;
            benchmark_circuit(id)?;
            Ok(ModelSpec::Pqc(id))
        } else if let Some(d) = lower.strip_prefix("nn") {
            let h = parse(d)?;
            if h == 0 {
                return Err(Error::Config("hidden width must be positive".into()));
            }
            Ok(ModelSpec::Nn(h))
        } else {
            Err(Error::Config(format!("bad model spec {s:?}")))
        }
    }
}

impl ModelSpec {
    /// File-system friendly label, e.g. `pqc6`.
    pub fn slug(&self) -> String {
        match self {
            ModelSpec::Pqc(id) => format!("pqc{id}"),
            ModelSpec::Nn(h) => format!("nn{h}"),
        }
    }

    /// The paper-scale grid: circuits 1..=19 then widths 2, 4, 8, 16.
    pub fn full_grid() -> Vec<ModelSpec> {
        (1..=crate::circuits::NUM_CIRCUITS)
            .map(ModelSpec::Pqc)
            .chain(MLP_WIDTHS.iter().map(|&h| ModelSpec::Nn(h)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Policy,
    Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    /// Rotation angles, natural range `[0, 2pi)`.
    Circuit,
    Weight,
    Bias,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSegment {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub role: Role,
    pub kind: SegmentKind,
}

impl ParamSegment {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    /// Fan-in of a weight matrix stored as `[out, in]`.
    fn fan_in(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }
}

struct LayoutBuilder {
    segments: Vec<ParamSegment>,
    next: usize,
}

impl LayoutBuilder {
    fn new() -> Self {
        Self {
            segments: Vec::new(),
            next: 0,
        }
    }

    fn push(&mut self, name: &str, shape: &[usize], role: Role, kind: SegmentKind) -> usize {
        let offset = self.next;
        let seg = ParamSegment {
            name: name.to_string(),
            shape: shape.to_vec(),
            offset,
            role,
            kind,
        };
        self.next += seg.len();
        self.segments.push(seg);
        offset
    }
}

/// Result of one forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOutput {
    pub logits: [f64; NUM_ACTIONS],
    pub action_probs: [f64; NUM_ACTIONS],
    pub value: f64,
}

impl ModelOutput {
    fn new(logits: [f64; NUM_ACTIONS], value: f64) -> Self {
        Self {
            logits,
            action_probs: softmax(&logits),
            value,
        }
    }

    pub fn log_prob(&self, action: usize) -> f64 {
        log_softmax(&self.logits)[action]
    }

    pub fn entropy(&self) -> f64 {
        let lp = log_softmax(&self.logits);
        -self
            .action_probs
            .iter()
            .zip(lp)
            .map(|(p, l)| p * l)
            .sum::<f64>()
    }
}

pub fn softmax(logits: &[f64; NUM_ACTIONS]) -> [f64; NUM_ACTIONS] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.map(|l| (l - max).exp());
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

pub fn log_softmax(logits: &[f64; NUM_ACTIONS]) -> [f64; NUM_ACTIONS] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.map(|l| l - lse)
}

/// Differentiable policy/value approximator over the 16 lake states.
pub trait PolicyValueModel {
    fn spec(&self) -> ModelSpec;

    fn layout(&self) -> &[ParamSegment];

    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    fn forward(&self, state: usize) -> Result<ModelOutput>;

    /// Gradient of a scalar loss with respect to every trainable scalar,
    /// given the loss gradient at the logits and at the value output.
    fn backward(&self, state: usize, dlogits: &[f64; NUM_ACTIONS], dvalue: f64)
        -> Result<Vec<f64>>;

    fn num_params(&self) -> usize {
        self.params().len()
    }

    /// Forward pass for every state, indexed by state.
    fn forward_all(&self) -> Result<Vec<ModelOutput>> {
        (0..NUM_STATES).map(|s| self.forward(s)).collect()
    }
}

fn check_state(state: usize) -> Result<()> {
    if state >= NUM_STATES {
        Err(Error::StateOutOfRange(state))
    } else {
        Ok(())
    }
}

/// Number of trainable scalars in a 16->h->h->4 policy stack plus a
/// 16->h->h->1 value stack.
pub fn mlp_param_count(h: usize) -> usize {
    2 * (16 * h + h + h * h + h) + (4 * h + 4) + (h + 1)
}

/// Embedding -> policy/value circuit -> `<Z>` -> linear heads.
#[derive(Debug, Clone)]
pub struct HybridModel {
    circuit: CircuitTemplate,
    circuit_id: usize,
    embedded: Vec<StateVector>,
    layout: Vec<ParamSegment>,
    params: Vec<f64>,
    policy_circuit: usize,
    policy_w: usize,
    policy_b: usize,
    value_circuit: usize,
    value_w: usize,
    value_b: usize,
}

impl HybridModel {
    /// All parameters zero.
    pub fn zeros(circuit_id: usize) -> Result<Self> {
        let circuit = benchmark_circuit(circuit_id)?;
        let p = circuit.param_count;
        let embedded = (0..NUM_STATES)
            .map(|s| run_circuit(&embedding_circuit(s)?, &[], &StateVector::zero(NUM_QUBITS)))
            .collect::<Result<Vec<_>>>()?;
        let mut b = LayoutBuilder::new();
        let policy_circuit = b.push("policy_circuit", &[p], Role::Policy, SegmentKind::Circuit);
        let policy_w = b.push("policy_head.weight", &[NUM_ACTIONS, NUM_QUBITS], Role::Policy, SegmentKind::Weight);
        let policy_b = b.push("policy_head.bias", &[NUM_ACTIONS], Role::Policy, SegmentKind::Bias);
        let value_circuit = b.push("value_circuit", &[p], Role::Value, SegmentKind::Circuit);
        let value_w = b.push("value_head.weight", &[1, NUM_QUBITS], Role::Value, SegmentKind::Weight);
        let value_b = b.push("value_head.bias", &[1], Role::Value, SegmentKind::Bias);
        Ok(Self {
            circuit,
            circuit_id,
            embedded,
            params: vec![0.0; b.next],
            layout: b.segments,
            policy_circuit,
            policy_w,
            policy_b,
            value_circuit,
            value_w,
            value_b,
        })
    }

    pub fn circuit(&self) -> &CircuitTemplate {
        &self.circuit
    }

    pub fn circuit_params(&self, role: Role) -> &[f64] {
        let p = self.circuit.param_count;
        let off = match role {
            Role::Policy => self.policy_circuit,
            Role::Value => self.value_circuit,
        };
        &self.params[off..off + p]
    }

    /// `<Z_i>` of the policy or value circuit on the embedded state.
    pub fn expectations(&self, role: Role, state: usize) -> Result<Vec<f64>> {
        check_state(state)?;
        let out = run_circuit(&self.circuit, self.circuit_params(role), &self.embedded[state])?;
        Ok(z_expectations(&out))
    }

    pub fn set_policy_head(&mut self, weight: &[[f64; NUM_QUBITS]; NUM_ACTIONS], bias: &[f64; NUM_ACTIONS]) {
        for (a, row) in weight.iter().enumerate() {
            self.params[self.policy_w + a * NUM_QUBITS..][..NUM_QUBITS].copy_from_slice(row);
        }
        self.params[self.policy_b..self.policy_b + NUM_ACTIONS].copy_from_slice(bias);
    }

    pub fn set_value_head(&mut self, weight: &[f64; NUM_QUBITS], bias: f64) {
        self.params[self.value_w..self.value_w + NUM_QUBITS].copy_from_slice(weight);
        self.params[self.value_b] = bias;
    }
}

impl PolicyValueModel for HybridModel {
    fn spec(&self) -> ModelSpec {
        ModelSpec::Pqc(self.circuit_id)
    }

    fn layout(&self) -> &[ParamSegment] {
        &self.layout
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&self, state: usize) -> Result<ModelOutput> {
        let zp = self.expectations(Role::Policy, state)?;
        let zv = self.expectations(Role::Value, state)?;
        let mut logits = [0.0; NUM_ACTIONS];
        for (a, l) in logits.iter_mut().enumerate() {
            let row = &self.params[self.policy_w + a * NUM_QUBITS..][..NUM_QUBITS];
            *l = self.params[self.policy_b + a] + row.iter().zip(&zp).map(|(w, z)| w * z).sum::<f64>();
        }
        let vw = &self.params[self.value_w..self.value_w + NUM_QUBITS];
        let value = self.params[self.value_b] + vw.iter().zip(&zv).map(|(w, z)| w * z).sum::<f64>();
        Ok(ModelOutput::new(logits, value))
    }

    fn backward(
        &self,
        state: usize,
        dlogits: &[f64; NUM_ACTIONS],
        dvalue: f64,
    ) -> Result<Vec<f64>> {
        check_state(state)?;
        let p = self.circuit.param_count;
        let mut grad = vec![0.0; self.params.len()];
        let input = &self.embedded[state];

        if dlogits.iter().any(|&d| d != 0.0) {
            let zp = self.expectations(Role::Policy, state)?;
            let mut dz = [0.0; NUM_QUBITS];
            for (a, &da) in dlogits.iter().enumerate() {
                grad[self.policy_b + a] = da;
                for i in 0..NUM_QUBITS {
                    grad[self.policy_w + a * NUM_QUBITS + i] = da * zp[i];
                    dz[i] += self.params[self.policy_w + a * NUM_QUBITS + i] * da;
                }
            }
            let g = circuit_gradient(&self.circuit, self.circuit_params(Role::Policy), input, &dz)?;
            grad[self.policy_circuit..self.policy_circuit + p].copy_from_slice(&g);
        }

        if dvalue != 0.0 {
            let zv = self.expectations(Role::Value, state)?;
            grad[self.value_b] = dvalue;
            let mut dz = [0.0; NUM_QUBITS];
            for i in 0..NUM_QUBITS {
                grad[self.value_w + i] = dvalue * zv[i];
                dz[i] = self.params[self.value_w + i] * dvalue;
            }
            let g = circuit_gradient(&self.circuit, self.circuit_params(Role::Value), input, &dz)?;
            grad[self.value_circuit..self.value_circuit + p].copy_from_slice(&g);
        }
        Ok(grad)
    }
}

#[derive(Debug, Clone, Copy)]
struct Stack {
    l1_w: usize,
    l1_b: usize,
    l2_w: usize,
    l2_b: usize,
    out_w: usize,
    out_b: usize,
    outputs: usize,
}

struct StackActivations {
    h1: Vec<f64>,
    h2: Vec<f64>,
    out: Vec<f64>,
}

/// One-hot input, two tanh hidden layers per head, separate policy and value
/// stacks.
#[derive(Debug, Clone)]
pub struct MlpModel {
    hidden: usize,
    layout: Vec<ParamSegment>,
    params: Vec<f64>,
    policy: Stack,
    value: Stack,
}

impl MlpModel {
    pub fn zeros(hidden: usize) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        let h = hidden;
        let mut b = LayoutBuilder::new();
        let mut stack = |prefix: &str, role: Role, outputs: usize| Stack {
            l1_w: b.push(&format!("{prefix}.l1.weight"), &[h, NUM_STATES], role, SegmentKind::Weight),
            l1_b: b.push(&format!("{prefix}.l1.bias"), &[h], role, SegmentKind::Bias),
            l2_w: b.push(&format!("{prefix}.l2.weight"), &[h, h], role, SegmentKind::Weight),
            l2_b: b.push(&format!("{prefix}.l2.bias"), &[h], role, SegmentKind::Bias),
            out_w: b.push(&format!("{prefix}.out.weight"), &[outputs, h], role, SegmentKind::Weight),
            out_b: b.push(&format!("{prefix}.out.bias"), &[outputs], role, SegmentKind::Bias),
            outputs,
        };
        let policy = stack("policy", Role::Policy, NUM_ACTIONS);
        let value = stack("value", Role::Value, 1);
        Ok(Self {
            hidden,
            params: vec![0.0; b.next],
            layout: b.segments,
            policy,
            value,
        })
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden
    }

    fn run_stack(&self, st: &Stack, state: usize) -> StackActivations {
        let h = self.hidden;
        let p = &self.params;
        let h1: Vec<f64> = (0..h)
            .map(|j| (p[st.l1_w + j * NUM_STATES + state] + p[st.l1_b + j]).tanh())
            .collect();
        let h2: Vec<f64> = (0..h)
            .map(|j| {
                let row = &p[st.l2_w + j * h..][..h];
                (p[st.l2_b + j] + row.iter().zip(&h1).map(|(w, x)| w * x).sum::<f64>()).tanh()
            })
            .collect();
        let out = (0..st.outputs)
            .map(|o| {
                let row = &p[st.out_w + o * h..][..h];
                p[st.out_b + o] + row.iter().zip(&h2).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect();
        StackActivations { h1, h2, out }
    }

    fn backprop_stack(&self, st: &Stack, state: usize, dout: &[f64], grad: &mut [f64]) {
        let h = self.hidden;
        let p = &self.params;
        let act = self.run_stack(st, state);
        let mut dh2 = vec![0.0; h];
        for (o, &d) in dout.iter().enumerate() {
            grad[st.out_b + o] += d;
            for j in 0..h {
                grad[st.out_w + o * h + j] += d * act.h2[j];
                dh2[j] += p[st.out_w + o * h + j] * d;
            }
        }
        let dpre2: Vec<f64> = dh2.iter().zip(&act.h2).map(|(d, y)| d * (1.0 - y * y)).collect();
        let mut dh1 = vec![0.0; h];
        for (j, &d) in dpre2.iter().enumerate() {
            grad[st.l2_b + j] += d;
            for k in 0..h {
                grad[st.l2_w + j * h + k] += d * act.h1[k];
                dh1[k] += p[st.l2_w + j * h + k] * d;
            }
        }
        for (j, (d, y)) in dh1.iter().zip(&act.h1).enumerate() {
            let dpre1 = d * (1.0 - y * y);
            grad[st.l1_b + j] += dpre1;
            grad[st.l1_w + j * NUM_STATES + state] += dpre1;
        }
    }
}

impl PolicyValueModel for MlpModel {
    fn spec(&self) -> ModelSpec {
        ModelSpec::Nn(self.hidden)
    }

    fn layout(&self) -> &[ParamSegment] {
        &self.layout
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&self, state: usize) -> Result<ModelOutput> {
        check_state(state)?;
        let pol = self.run_stack(&self.policy, state);
        let val = self.run_stack(&self.value, state);
        let logits: [f64; NUM_ACTIONS] = pol.out.try_into().expect("policy stack has 4 outputs");
        Ok(ModelOutput::new(logits, val.out[0]))
    }

    fn backward(
        &self,
        state: usize,
        dlogits: &[f64; NUM_ACTIONS],
        dvalue: f64,
    ) -> Result<Vec<f64>> {
        check_state(state)?;
        let mut grad = vec![0.0; self.params.len()];
        if dlogits.iter().any(|&d| d != 0.0) {
            self.backprop_stack(&self.policy, state, dlogits, &mut grad);
        }
        if dvalue != 0.0 {
            self.backprop_stack(&self.value, state, &[dvalue], &mut grad);
        }
        Ok(grad)
    }
}

/// Either model family behind one type.
#[derive(Debug, Clone)]
pub enum Model {
    Hybrid(HybridModel),
    Mlp(MlpModel),
}

impl Model {
    /// Zero-initialised model of the given spec.
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        Ok(match spec {
            ModelSpec::Pqc(id) => Model::Hybrid(HybridModel::zeros(id)?),
            ModelSpec::Nn(h) => Model::Mlp(MlpModel::zeros(h)?),
        })
    }

    /// Circuit angles ~ U[0, 2pi); weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)];
    /// biases 0. Fully determined by `seed`.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = model.layout().to_vec();
        let params = model.params_mut();
        for seg in &layout {
            let slice = &mut params[seg.range()];
            match seg.kind {
                SegmentKind::Circuit => slice.iter_mut().for_each(|x| *x = rng.gen_range(0.0..TAU)),
                SegmentKind::Weight => {
                    let bound = 1.0 / (seg.fan_in() as f64).sqrt();
                    slice.iter_mut().for_each(|x| *x = rng.gen_range(-bound..bound));
                }
                SegmentKind::Bias => slice.iter_mut().for_each(|x| *x = 0.0),
            }
        }
        Ok(model)
    }

    fn inner(&self) -> &dyn PolicyValueModel {
        match self {
            Model::Hybrid(m) => m,
            Model::Mlp(m) => m,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn PolicyValueModel {
        match self {
            Model::Hybrid(m) => m,
            Model::Mlp(m) => m,
        }
    }

    /// Indices of the parameters that shape the action distribution.
    pub fn policy_indices(&self) -> Vec<usize> {
        self.layout()
            .iter()
            .filter(|s| s.role == Role::Policy)
            .flat_map(|s| s.range())
            .collect()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.spec().to_string(),
            tensors: self
                .layout()
                .iter()
                .map(|seg| Tensor {
                    name: seg.name.clone(),
                    shape: seg.shape.clone(),
                    values: self.params()[seg.range()].to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let spec: ModelSpec = ckpt.model.parse()?;
        let mut model = Self::zeros(spec)?;
        let layout = model.layout().to_vec();
        if layout.len() != ckpt.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                layout.len(),
                ckpt.tensors.len()
            )));
        }
        for (seg, t) in layout.iter().zip(&ckpt.tensors) {
            if seg.name != t.name || seg.shape != t.shape || t.values.len() != seg.len() {
                return Err(Error::Checkpoint(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    t.name, t.shape, seg.name, seg.shape
                )));
            }
            model.params_mut()[seg.range()].copy_from_slice(&t.values);
        }
        Ok(model)
    }
}

impl PolicyValueModel for Model {
    fn spec(&self) -> ModelSpec {
        self.inner().spec()
    }

    fn layout(&self) -> &[ParamSegment] {
        self.inner().layout()
    }

    fn params(&self) -> &[f64] {
        self.inner().params()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.inner_mut().params_mut()
    }

    fn forward(&self, state: usize) -> Result<ModelOutput> {
        self.inner().forward(state)
    }

    fn backward(
        &self,
        state: usize,
        dlogits: &[f64; NUM_ACTIONS],
        dvalue: f64,
    ) -> Result<Vec<f64>> {
        self.inner().backward(state, dlogits, dvalue)
    }
}

/// Named tensor of a checkpoint; `values` are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// JSON checkpoint: `{"model": "PQC-6", "tensors": [{name, shape, values}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model: String,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::PUBLISHED_WEIGHTS;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spec_parsing() {
        assert_eq!("pqc6".parse::<ModelSpec>().unwrap(), ModelSpec::Pqc(6));
        assert_eq!("PQC-19".parse::<ModelSpec>().unwrap(), ModelSpec::Pqc(19));
        assert_eq!("NN-4".parse::<ModelSpec>().unwrap(), ModelSpec::Nn(4));
        assert!("pqc20".parse::<ModelSpec>().is_err());
        assert!("nn0".parse::<ModelSpec>().is_err());
        assert!("cnn3".parse::<ModelSpec>().is_err());
        assert_eq!(ModelSpec::Pqc(6).to_string(), "PQC-6");
        assert_eq!(ModelSpec::full_grid().len(), 23);
    }

    #[test]
    fn hybrid_counts_match_published_weights() {
        for id in 1..=19 {
            let m = Model::init(ModelSpec::Pqc(id), 0).unwrap();
            assert_eq!(m.num_params(), PUBLISHED_WEIGHTS[id - 1], "circuit {id}");
        }
        let m9 = HybridModel::zeros(9).unwrap();
        assert_eq!(m9.circuit_params(Role::Policy).len(), 4);
        assert_eq!(m9.num_params(), 33);
    }

    #[test]
    fn mlp_counts_are_naive_stack_sizes() {
        assert_eq!(MlpModel::zeros(4).unwrap().num_params(), 201);
        assert_eq!(MlpModel::zeros(16).unwrap().num_params(), 1173);
        for (h, published) in PUBLISHED_NN_WEIGHTS {
            assert_eq!(mlp_param_count(h), MlpModel::zeros(h).unwrap().num_params());
            assert_eq!(published - mlp_param_count(h), 24 + 3 * h);
        }
    }

    #[test]
    fn identity_head_on_circuit_one_is_uniform() {
        let mut m = HybridModel::zeros(1).unwrap();
        let eye = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        m.set_policy_head(&eye, &[0.0; 4]);
        let out = m.forward(0).unwrap();
        for (l, p) in out.logits.iter().zip(out.action_probs) {
            assert_abs_diff_eq!(*l, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_value_head() {
        let Model::Hybrid(mut m) = Model::init(ModelSpec::Pqc(7), 3).unwrap() else {
            unreachable!()
        };
        m.set_value_head(&[0.0; 4], -0.37);
        for s in 0..16 {
            assert_eq!(m.forward(s).unwrap().value, -0.37);
        }
    }

    #[test]
    fn init_is_deterministic_and_in_range() {
        let a = Model::init(ModelSpec::Pqc(5), 42).unwrap();
        let b = Model::init(ModelSpec::Pqc(5), 42).unwrap();
        let c = Model::init(ModelSpec::Pqc(5), 43).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
        for seg in a.layout() {
            let vals = &a.params()[seg.range()];
            match seg.kind {
                SegmentKind::Circuit => assert!(vals.iter().all(|&x| (0.0..TAU).contains(&x))),
                SegmentKind::Weight => assert!(vals.iter().all(|&x| x.abs() <= 0.5)),
                SegmentKind::Bias => assert!(vals.iter().all(|&x| x == 0.0)),
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        for spec in [ModelSpec::Pqc(4), ModelSpec::Nn(4)] {
            let m = Model::init(spec, 1).unwrap();
            let g = m.backward(3, &[0.0; 4], 0.0).unwrap();
            assert!(g.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn value_bias_gradient_is_upstream() {
        for spec in [ModelSpec::Pqc(4), ModelSpec::Nn(8)] {
            let m = Model::init(spec, 1).unwrap();
            let g = m.backward(6, &[0.0; 4], 0.731).unwrap();
            let bias = m
                .layout()
                .iter()
                .find(|s| s.name.ends_with("bias") && s.role == Role::Value && s.shape == [1])
                .unwrap();
            assert_eq!(g[bias.offset], 0.731);
        }
    }

    #[test]
    fn probabilities_form_a_simplex() {
        for spec in [ModelSpec::Pqc(6), ModelSpec::Nn(2)] {
            let m = Model::init(spec, 9).unwrap();
            for out in m.forward_all().unwrap() {
                assert!((out.action_probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(out.action_probs.iter().all(|&p| p > 0.0));
            }
        }
        assert!(Model::init(ModelSpec::Nn(2), 0).unwrap().forward(16).is_err());
    }

    #[test]
    fn checkpoint_reload_is_exact() {
        for spec in [ModelSpec::Pqc(13), ModelSpec::Nn(4)] {
            let m = Model::init(spec, 77).unwrap();
            let json = m.to_checkpoint().to_json();
            let back = Model::from_checkpoint(&Checkpoint::from_json(&json).unwrap()).unwrap();
            assert_eq!(m.params(), back.params());
            assert_eq!(m.spec(), back.spec());
        }
        let mut ckpt = Model::init(ModelSpec::Nn(2), 0).unwrap().to_checkpoint();
        ckpt.tensors[0].shape = vec![3, 16];
        assert!(Model::from_checkpoint(&ckpt).is_err());
    }
}
