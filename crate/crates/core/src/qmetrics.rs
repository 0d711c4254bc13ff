//! Circuit characterization: expressibility, Meyer-Wallach entanglement
//! capability and effective dimension.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuits::{benchmark_circuit, CircuitTemplate, NUM_STATES};
use crate::error::{Error, Result};
use crate::lake::NUM_ACTIONS;
use crate::models::{Model, ModelSpec, PolicyValueModel, Role, SegmentKind};
use crate::qsim::{fidelity, reduced_single_qubit_purity, run_circuit, StateVector};

/// Density of state fidelities between Haar-random states of dimension `dim`:
/// `(N - 1)(1 - F)^(N - 2)`.
pub fn haar_pdf(f: f64, dim: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) || dim < 2 {
        return Err(Error::Domain(format!("haar_pdf(F={f}, N={dim})")));
    }
    let n = dim as f64;
    Ok((n - 1.0) * (1.0 - f).powi(dim as i32 - 2))
}

/// Exact Haar probability of `lo <= F < hi`.
pub fn haar_bin_mass(lo: f64, hi: f64, dim: usize) -> f64 {
    let e = dim as i32 - 1;
    (1.0 - lo).powi(e) - (1.0 - hi).powi(e)
}

/// Fidelity histogram of circuit outputs against the Haar reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityHistogram {
    pub bin_count: usize,
    pub sample_count: usize,
    pub empirical: Vec<f64>,
    pub haar: Vec<f64>,
}

impl FidelityHistogram {
    pub fn from_fidelities(fidelities: &[f64], bins: usize, dim: usize) -> Result<Self> {
        if bins == 0 || fidelities.is_empty() {
            return Err(Error::Domain("histogram needs bins and samples".into()));
        }
        let mut counts = vec![0usize; bins];
        for &f in fidelities {
            let b = ((f * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let total = fidelities.len() as f64;
        let edges = |i: usize| i as f64 / bins as f64;
        Ok(Self {
            bin_count: bins,
            sample_count: fidelities.len(),
            empirical: counts.iter().map(|&c| c as f64 / total).collect(),
            haar: (0..bins).map(|i| haar_bin_mass(edges(i), edges(i + 1), dim)).collect(),
        })
    }

    /// `D_KL(P_PQC || P_Haar)` in nats with `0 log 0 = 0`.
    pub fn kl_divergence(&self) -> Result<f64> {
        kl_divergence(&self.empirical, &self.haar)
    }
}

pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::Domain("reference bin with zero mass".into()));
            }
            kl += pi * (pi / qi).ln();
        }
    }
    Ok(kl.max(0.0))
}

fn uniform_angles<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..TAU)).collect()
}

/// Fidelities of `pairs` pairs of outputs on `|0...0>` with independently
/// drawn angles.
pub fn sample_fidelities(template: &CircuitTemplate, pairs: usize, seed: u64) -> Result<Vec<f64>> {
    if template.param_count == 0 {
        return Err(Error::InvalidCircuit("expressibility needs parameters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = StateVector::zero(template.num_qubits);
    (0..pairs)
        .map(|_| {
            let a = run_circuit(template, &uniform_angles(template.param_count, &mut rng), &zero)?;
            let b = run_circuit(template, &uniform_angles(template.param_count, &mut rng), &zero)?;
            fidelity(&a, &b)
        })
        .collect()
}

pub fn expressibility(template: &CircuitTemplate, pairs: usize, bins: usize, seed: u64) -> Result<f64> {
    let f = sample_fidelities(template, pairs, seed)?;
    FidelityHistogram::from_fidelities(&f, bins, 1 << template.num_qubits)?.kl_divergence()
}

/// Meyer-Wallach `Q = (4/n) sum_j D(iota_j(0) psi, iota_j(1) psi)` with
/// `D(u, v) = 1/2 sum_{i,k} |u_i v_k - u_k v_i|^2`.
pub fn meyer_wallach_q(state: &StateVector) -> f64 {
    let n = state.num_qubits();
    let amps = state.amplitudes();
    let mut total = 0.0;
    for j in 0..n {
        let mask = state.qubit_mask(j);
        let (u, v): (Vec<_>, Vec<_>) = (0..amps.len())
            .filter(|i| i & mask == 0)
            .map(|i| (amps[i], amps[i | mask]))
            .unzip();
        let mut d = 0.0;
        for a in 0..u.len() {
            for b in a + 1..u.len() {
                d += (u[a] * v[b] - u[b] * v[a]).norm_sqr();
            }
        }
        total += d;
    }
    4.0 * total / n as f64
}

/// `2 (1 - (1/n) sum_j tr rho_j^2)`.
pub fn meyer_wallach_purity(state: &StateVector) -> Result<f64> {
    let n = state.num_qubits();
    let mut sum = 0.0;
    for j in 0..n {
        sum += reduced_single_qubit_purity(state, j)?;
    }
    Ok(2.0 * (1.0 - sum / n as f64))
}

/// Mean Meyer-Wallach Q over uniformly drawn angles on `|0...0>`. Circuits
/// without two-qubit gates only produce product states and score exactly 0.
pub fn entanglement_capability(template: &CircuitTemplate, samples: usize, seed: u64) -> Result<f64> {
    if template.two_qubit_gate_count() == 0 || samples == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = StateVector::zero(template.num_qubits);
    let mut sum = 0.0;
    for _ in 0..samples {
        let psi = run_circuit(template, &uniform_angles(template.param_count, &mut rng), &zero)?;
        sum += meyer_wallach_q(&psi);
    }
    Ok(sum / samples as f64)
}

/// Conditional model `p(y | x; theta)` with its score function.
pub trait ScoreModel {
    fn num_params(&self) -> usize;
    fn num_inputs(&self) -> usize;
    fn probs(&self, x: usize) -> Vec<f64>;
    /// `grad_theta log p(y | x; theta)`.
    fn score(&self, x: usize, y: usize) -> Vec<f64>;
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// `k x d` matrix of score vectors for `x` uniform and `y ~ p(. | x)`.
pub fn sample_scores<R: Rng + ?Sized>(model: &dyn ScoreModel, k: usize, rng: &mut R) -> DMatrix<f64> {
    let d = model.num_params();
    let mut g = DMatrix::zeros(k, d);
    for j in 0..k {
        let x = rng.gen_range(0..model.num_inputs());
        let y = sample_index(&model.probs(x), rng);
        for (c, v) in model.score(x, y).into_iter().enumerate() {
            g[(j, c)] = v;
        }
    }
    g
}

/// `(1/k) sum_j g_j g_j^T`.
pub fn empirical_fim<R: Rng + ?Sized>(model: &dyn ScoreModel, k: usize, rng: &mut R) -> DMatrix<f64> {
    let g = sample_scores(model, k, rng);
    g.tr_mul(&g) / k as f64
}

/// Policy head of a [`Model`] as a conditional over actions, restricted to
/// the policy parameters.
pub struct PolicyScores {
    probs: Vec<[f64; NUM_ACTIONS]>,
    scores: Vec<Vec<Vec<f64>>>,
    dim: usize,
}

impl PolicyScores {
    pub fn new(model: &Model) -> Result<Self> {
        let idx = model.policy_indices();
        let outputs = model.forward_all()?;
        let mut scores = Vec::with_capacity(NUM_STATES);
        for (x, out) in outputs.iter().enumerate() {
            let mut per_y = Vec::with_capacity(NUM_ACTIONS);
            for y in 0..NUM_ACTIONS {
                let mut d = [0.0; NUM_ACTIONS];
                for (a, v) in d.iter_mut().enumerate() {
                    *v = if a == y { 1.0 } else { 0.0 } - out.action_probs[a];
                }
                let full = model.backward(x, &d, 0.0)?;
                per_y.push(idx.iter().map(|&i| full[i]).collect());
            }
            scores.push(per_y);
        }
        Ok(Self {
            probs: outputs.iter().map(|o| o.action_probs).collect(),
            scores,
            dim: idx.len(),
        })
    }
}

impl ScoreModel for PolicyScores {
    fn num_params(&self) -> usize {
        self.dim
    }

    fn num_inputs(&self) -> usize {
        NUM_STATES
    }

    fn probs(&self, x: usize) -> Vec<f64> {
        self.probs[x].to_vec()
    }

    fn score(&self, x: usize, y: usize) -> Vec<f64> {
        self.scores[x][y].clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdConfig {
    pub gamma: f64,
    pub n: f64,
    pub theta_samples: usize,
    /// `(x, y)` draws per parameter sample.
    pub k: usize,
    pub seed: u64,
}

impl Default for EdConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            n: 1e5,
            theta_samples: 100,
            k: 100,
            seed: 0,
        }
    }
}

impl EdConfig {
    /// `gamma n / (2 pi ln n)`.
    pub fn kappa(&self) -> Result<f64> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.n > 1.0) {
            return Err(Error::Domain(format!("gamma {} / n {} out of range", self.gamma, self.n)));
        }
        let kappa = self.gamma * self.n / (2.0 * PI * self.n.ln());
        if kappa <= 1.0 {
            return Err(Error::Domain(format!("kappa {kappa} <= 1; increase n")));
        }
        Ok(kappa)
    }
}

fn log_det_spd(m: DMatrix<f64>) -> Result<f64> {
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Domain("matrix is not positive definite".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>())
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `2 (logsumexp_i(1/2 logdet_i) - ln S) / ln kappa`.
fn ed_from_logdets(logdets: &[f64], kappa: f64) -> f64 {
    let halves: Vec<f64> = logdets.iter().map(|l| 0.5 * l).collect();
    2.0 * (log_sum_exp(&halves) - (logdets.len() as f64).ln()) / kappa.ln()
}

/// Effective dimension of a set of Fisher matrices sampled over parameter
/// space, normalized by their mean trace.
pub fn effective_dimension_from_fims(fims: &[DMatrix<f64>], config: &EdConfig) -> Result<f64> {
    let kappa = config.kappa()?;
    let d = fims.first().map(|f| f.nrows()).unwrap_or(0);
    if d == 0 {
        return Err(Error::Domain("no Fisher matrices".into()));
    }
    let mean_trace = fims.iter().map(|f| f.trace()).sum::<f64>() / fims.len() as f64;
    if !(mean_trace > 0.0) {
        return Err(Error::Domain("Fisher information vanishes".into()));
    }
    let scale = kappa * d as f64 / mean_trace;
    let logdets = fims
        .iter()
        .map(|f| log_det_spd(DMatrix::identity(d, d) + f * scale))
        .collect::<Result<Vec<_>>>()?;
    Ok(ed_from_logdets(&logdets, kappa))
}

/// Model with policy circuit angles ~ U[0, 2pi) and policy weights and
/// biases ~ U[-1, 1]. Value parameters stay zero.
pub fn sample_policy_params<R: Rng + ?Sized>(spec: ModelSpec, rng: &mut R) -> Result<Model> {
    let mut model = Model::zeros(spec)?;
    let layout = model.layout().to_vec();
    let params = model.params_mut();
    for seg in layout.iter().filter(|s| s.role == Role::Policy) {
        for p in &mut params[seg.range()] {
            *p = match seg.kind {
                SegmentKind::Circuit => rng.gen_range(0.0..TAU),
                SegmentKind::Weight | SegmentKind::Bias => rng.gen_range(-1.0..1.0),
            };
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdEstimate {
    pub value: f64,
    /// Number of policy parameters.
    pub dim: usize,
}

/// Monte Carlo effective dimension of the policy map of `spec`.
pub fn effective_dimension(spec: ModelSpec, config: &EdConfig) -> Result<EdEstimate> {
    let kappa = config.kappa()?;
    if config.theta_samples == 0 || config.k == 0 {
        return Err(Error::Domain("ED needs theta samples and draws".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut grams = Vec::with_capacity(config.theta_samples);
    for _ in 0..config.theta_samples {
        let model = sample_policy_params(spec, &mut rng)?;
        grams.push(sample_scores(&PolicyScores::new(&model)?, config.k, &mut rng));
    }
    let d = grams[0].ncols();
    let k = config.k as f64;
    // tr F = |G|_F^2 / k
    let mean_trace = grams.iter().map(|g| g.norm_squared() / k).sum::<f64>() / grams.len() as f64;
    if !(mean_trace > 0.0) {
        return Err(Error::Domain("Fisher information vanishes".into()));
    }
    let alpha = kappa * d as f64 / (mean_trace * k);
    // det(I_d + a G^T G) = det(I_k + a G G^T); factor the smaller one.
    let logdets = grams
        .iter()
        .map(|g| {
            if g.nrows() < d {
                log_det_spd(DMatrix::identity(g.nrows(), g.nrows()) + (g * g.transpose()) * alpha)
            } else {
                log_det_spd(DMatrix::identity(d, d) + g.tr_mul(g) * alpha)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EdEstimate {
        value: ed_from_logdets(&logdets, kappa),
        dim: d,
    })
}

/// Sampling settings for [`solution_metrics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub fidelity_pairs: usize,
    pub bins: usize,
    pub mw_samples: usize,
    pub seed: u64,
    pub gamma: f64,
    pub n: f64,
    pub theta_samples: usize,
    pub k: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        let ed = EdConfig::default();
        Self {
            fidelity_pairs: 5000,
            bins: 75,
            mw_samples: 5000,
            seed: 0,
            gamma: ed.gamma,
            n: ed.n,
            theta_samples: ed.theta_samples,
            k: ed.k,
        }
    }
}

impl MetricsConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.ed_config(0).kappa()?;
        Ok(cfg)
    }

    pub fn ed_config(&self, seed: u64) -> EdConfig {
        EdConfig {
            gamma: self.gamma,
            n: self.n,
            theta_samples: self.theta_samples,
            k: self.k,
            seed,
        }
    }

    fn stream_seed(&self, spec: ModelSpec, metric: u64) -> u64 {
        let tag = match spec {
            ModelSpec::Pqc(id) => id as u64,
            ModelSpec::Nn(h) => 1000 + h as u64,
        };
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(tag << 8 | metric)
    }
}

/// Metrics of one solution; Ent and Exp only exist for circuits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub solution: ModelSpec,
    pub ent: Option<f64>,
    pub exp: Option<f64>,
    pub ed: f64,
    pub ed_dim: usize,
    pub seed: u64,
    pub fidelity_pairs: usize,
    pub bins: usize,
    pub mw_samples: usize,
    pub gamma: f64,
    pub n: f64,
    pub theta_samples: usize,
    pub k: usize,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(field: &str) -> Result<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        field
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("bad number {field:?}")))
    }
}

impl MetricRecord {
    pub const CSV_HEADER: &'static str =
        "solution,ent,exp,ed,ed_dim,seed,fidelity_pairs,bins,mw_samples,gamma,n,theta_samples,k";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.solution,
            opt(self.ent),
            opt(self.exp),
            self.ed,
            self.ed_dim,
            self.seed,
            self.fidelity_pairs,
            self.bins,
            self.mw_samples,
            self.gamma,
            self.n,
            self.theta_samples,
            self.k
        )
    }

    pub fn parse_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return Err(Error::Config(format!("metrics row has {} fields: {line:?}", f.len())));
        }
        let int = |s: &str| s.trim().parse::<u64>().map_err(|_| Error::Config(format!("bad integer {s:?}")));
        let num = |s: &str| parse_opt(s)?.ok_or_else(|| Error::Config(format!("missing value in {line:?}")));
        Ok(Self {
            solution: f[0].parse()?,
            ent: parse_opt(f[1])?,
            exp: parse_opt(f[2])?,
            ed: num(f[3])?,
            ed_dim: int(f[4])? as usize,
            seed: int(f[5])?,
            fidelity_pairs: int(f[6])? as usize,
            bins: int(f[7])? as usize,
            mw_samples: int(f[8])? as usize,
            gamma: num(f[9])?,
            n: num(f[10])?,
            theta_samples: int(f[11])? as usize,
            k: int(f[12])? as usize,
        })
    }
}

pub fn metrics_csv(records: &[MetricRecord]) -> String {
    let mut out = format!("{}\n", MetricRecord::CSV_HEADER);
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(MetricRecord::CSV_HEADER) {
        return Err(Error::Config("unexpected metrics.csv header".into()));
    }
    lines.filter(|l| !l.trim().is_empty()).map(MetricRecord::parse_csv_row).collect()
}

/// Ent, Exp and ED of a circuit, or ED alone for an MLP. Each metric draws
/// from its own seeded stream.
pub fn solution_metrics(spec: ModelSpec, config: &MetricsConfig) -> Result<MetricRecord> {
    let (ent, exp) = match spec {
        ModelSpec::Pqc(id) => {
            let template = benchmark_circuit(id)?;
            let ent = entanglement_capability(&template, config.mw_samples, config.stream_seed(spec, 1))?;
            let exp = expressibility(
                &template,
                config.fidelity_pairs,
                config.bins,
                config.stream_seed(spec, 2),
            )?;
            (Some(ent), Some(exp))
        }
        ModelSpec::Nn(_) => (None, None),
    };
    let ed = effective_dimension(spec, &config.ed_config(config.stream_seed(spec, 3)))?;
    Ok(MetricRecord {
        solution: spec,
        ent,
        exp,
        ed: ed.value,
        ed_dim: ed.dim,
        seed: config.seed,
        fidelity_pairs: config.fidelity_pairs,
        bins: config.bins,
        mw_samples: config.mw_samples,
        gamma: config.gamma,
        n: config.n,
        theta_samples: config.theta_samples,
        k: config.k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn state(amps: &[(f64, f64)]) -> StateVector {
        StateVector::from_amplitudes(amps.iter().map(|&(re, im)| Complex64::new(re, im)).collect())
            .unwrap()
    }

    #[test]
    fn haar_pdf_endpoints_and_normalization() {
        assert_eq!(haar_pdf(0.0, 16).unwrap(), 15.0);
        assert_eq!(haar_pdf(1.0, 16).unwrap(), 0.0);
        assert!(haar_pdf(1.5, 16).is_err());
        assert!(haar_pdf(0.5, 1).is_err());
        // Composite Simpson on a degree-14 polynomial.
        let m = 2000;
        let h = 1.0 / m as f64;
        let mut s = haar_pdf(0.0, 16).unwrap() + haar_pdf(1.0, 16).unwrap();
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * haar_pdf(i as f64 * h, 16).unwrap();
        }
        assert!((s * h / 3.0 - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn haar_bins_sum_to_one() {
        let h = FidelityHistogram::from_fidelities(&[0.1, 0.2], 75, 16).unwrap();
        assert_abs_diff_eq!(h.haar.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.empirical.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(h.haar.iter().all(|&q| q > 0.0));
    }

    #[test]
    fn kl_conventions() {
        assert_eq!(kl_divergence(&[0.0, 1.0], &[0.5, 0.5]).unwrap(), 2f64.ln());
        assert_eq!(kl_divergence(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert!(kl_divergence(&[1.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn mw_reference_states() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(meyer_wallach_q(&StateVector::zero(4)), 0.0);
        let mut ghz = vec![(0.0, 0.0); 16];
        ghz[0] = (h, 0.0);
        ghz[15] = (h, 0.0);
        assert_abs_diff_eq!(meyer_wallach_q(&state(&ghz)), 1.0, epsilon = 1e-14);
        // Bell pair on qubits 0, 1 with qubits 2, 3 in |0>.
        let mut bell = vec![(0.0, 0.0); 16];
        bell[0b0000] = (h, 0.0);
        bell[0b1100] = (h, 0.0);
        let q = meyer_wallach_q(&state(&bell));
        assert_abs_diff_eq!(q, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(meyer_wallach_purity(&state(&bell)).unwrap(), q, epsilon = 1e-14);
    }

    #[test]
    fn product_circuit_has_zero_entanglement() {
        let c1 = benchmark_circuit(1).unwrap();
        assert_eq!(entanglement_capability(&c1, 100, 0).unwrap(), 0.0);
    }

    #[test]
    fn identity_fisher_closed_form() {
        let cfg = EdConfig {
            gamma: 1.0,
            n: 1e5,
            ..Default::default()
        };
        let kappa = cfg.kappa().unwrap();
        let d = 4;
        let fims = vec![DMatrix::<f64>::identity(d, d); 3];
        let ed = effective_dimension_from_fims(&fims, &cfg).unwrap();
        let closed = d as f64 * (1.0 + kappa).ln() / kappa.ln();
        assert!((ed - closed).abs() <= 1e-6, "{ed} vs {closed}");
    }

    #[test]
    fn small_n_is_rejected() {
        let cfg = EdConfig {
            n: 10.0,
            ..Default::default()
        };
        assert!(cfg.kappa().is_err());
    }

    struct Bernoulli(f64);

    impl ScoreModel for Bernoulli {
        fn num_params(&self) -> usize {
            1
        }
        fn num_inputs(&self) -> usize {
            1
        }
        fn probs(&self, _: usize) -> Vec<f64> {
            let p = 1.0 / (1.0 + (-self.0).exp());
            vec![1.0 - p, p]
        }
        fn score(&self, x: usize, y: usize) -> Vec<f64> {
            vec![y as f64 - self.probs(x)[1]]
        }
    }

    #[test]
    fn bernoulli_fisher() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = empirical_fim(&Bernoulli(0.0), 100_000, &mut rng);
        assert_abs_diff_eq!(f[(0, 0)], 0.25, epsilon = 0.01);
    }

    /// Output distribution that does not depend on its parameters.
    struct Constant;

    impl ScoreModel for Constant {
        fn num_params(&self) -> usize {
            3
        }
        fn num_inputs(&self) -> usize {
            16
        }
        fn probs(&self, _: usize) -> Vec<f64> {
            vec![0.25; 4]
        }
        fn score(&self, _: usize, _: usize) -> Vec<f64> {
            vec![0.0; 3]
        }
    }

    #[test]
    fn constant_model_has_zero_fisher() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = empirical_fim(&Constant, 50, &mut rng);
        assert_eq!(f, DMatrix::zeros(3, 3));
    }

    #[test]
    fn fim_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for spec in [ModelSpec::Pqc(4), ModelSpec::Nn(2)] {
            let model = sample_policy_params(spec, &mut rng).unwrap();
            let f = empirical_fim(&PolicyScores::new(&model).unwrap(), 40, &mut rng);
            let min = f.symmetric_eigenvalues().min();
            assert!(min >= -1e-10, "{spec}: {min}");
            assert_abs_diff_eq!((&f - f.transpose()).amax(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn metrics_csv_round_trip() {
        let cfg = MetricsConfig {
            fidelity_pairs: 50,
            mw_samples: 20,
            theta_samples: 3,
            k: 10,
            ..Default::default()
        };
        let recs = vec![
            solution_metrics(ModelSpec::Pqc(2), &cfg).unwrap(),
            solution_metrics(ModelSpec::Nn(2), &cfg).unwrap(),
        ];
        assert!(recs[1].ent.is_none());
        assert_eq!(parse_metrics_csv(&metrics_csv(&recs)).unwrap(), recs);
        let parsed = MetricsConfig::from_toml_str("bins = 10\nn = 1e6\n").unwrap();
        assert_eq!((parsed.bins, parsed.n), (10, 1e6));
        assert!(MetricsConfig::from_toml_str("n = 5.0").is_err());
    }

    #[test]
    fn ed_is_bounded_and_deterministic() {
        let cfg = EdConfig {
            theta_samples: 10,
            k: 20,
            ..Default::default()
        };
        let a = effective_dimension(ModelSpec::Pqc(9), &cfg).unwrap();
        assert_eq!(a, effective_dimension(ModelSpec::Pqc(9), &cfg).unwrap());
        assert_eq!(a.dim, 4 + 20);
        assert!(a.value > 0.0 && a.value <= a.dim as f64);
    }
}
