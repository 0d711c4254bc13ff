//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rayon::prelude::*;

use qrl_lake::bench::{
    correlate, max_reward, published_row, published_summary, smooth, spearman, time_to_convergence,
    Metric, Target, TTC_TOLERANCE,
};
use qrl_lake::circuits::{benchmark_circuit, NUM_CIRCUITS, PUBLISHED_WEIGHTS};
use qrl_lake::lake::{reward_threshold, value_iteration, LakeModel};
use qrl_lake::models::{Model, ModelSpec, PolicyValueModel};
use qrl_lake::ppo::{rewards_csv, train, PpoConfig, RewardPoint};
use qrl_lake::qmetrics::{
    effective_dimension, effective_dimension_from_fims, empirical_fim, entanglement_capability,
    expressibility, haar_pdf, kl_divergence, meyer_wallach_purity, meyer_wallach_q, EdConfig,
    ScoreModel,
};
use qrl_lake::qsim::StateVector;

/// Outcome of one criterion: `Err` carries the failed clauses.
type Verdict = Result<String, String>;

type Criterion = (&'static str, fn() -> Verdict);

fn check(failures: &mut Vec<String>, ok: bool, clause: String) {
    if !ok {
        failures.push(clause);
    }
}

fn verdict(failures: Vec<String>, summary: String) -> Verdict {
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", failures.join("; ")))
    }
}

fn pqc_ids() -> std::ops::RangeInclusive<usize> {
    1..=NUM_CIRCUITS
}

fn published_column(pick: impl Fn(ModelSpec) -> Option<f64>) -> Vec<f64> {
    pqc_ids().map(|id| pick(ModelSpec::Pqc(id)).unwrap()).collect()
}

fn oracle_fidelity() -> Verdict {
    let t = Instant::now();
    let lake = LakeModel::standard(0.2).unwrap();
    let v = value_iteration(&lake, 1.0, 1e-12).unwrap().values[lake.start()];
    let threshold = reward_threshold(&lake).unwrap().threshold;
    let elapsed = t.elapsed();
    let mut f = Vec::new();
    check(&mut f, (0.83..=0.87).contains(&v), format!("V[start] = {v:.4} outside [0.83, 0.87]"));
    check(&mut f, (threshold - 0.81).abs() <= 0.01, format!("threshold {threshold:.4} not 0.81 +- 0.01"));
    check(&mut f, elapsed < Duration::from_secs(1), format!("took {elapsed:?}"));
    verdict(f, format!("V[start] {v:.4}, threshold {threshold:.4}, {elapsed:.2?}"))
}

fn parameter_counts() -> Verdict {
    let mut f = Vec::new();
    for id in pqc_ids() {
        let w = Model::zeros(ModelSpec::Pqc(id)).unwrap().num_params();
        let want = PUBLISHED_WEIGHTS[id - 1];
        check(&mut f, w == want, format!("circuit {id}: W {w} != {want}"));
    }
    verdict(f, "W matches for all 19 circuits".into())
}

fn gradient_oracle() -> Verdict {
    let t = Instant::now();
    let worst = pqc_ids()
        .map(|id| common::worst_fd_error(ModelSpec::Pqc(id), 10, 1e-5))
        .fold(0.0, f64::max);
    let elapsed = t.elapsed();
    let mut f = Vec::new();
    check(&mut f, worst <= 1e-4, format!("relative error {worst:.2e} > 1e-4"));
    check(&mut f, elapsed < Duration::from_secs(60), format!("took {elapsed:?}"));
    verdict(f, format!("worst relative error {worst:.2e} over 19 x 10 draws, {elapsed:.2?}"))
}

fn entanglement() -> Verdict {
    let t = Instant::now();
    let ent: Vec<f64> = pqc_ids()
        .into_par_iter()
        .map(|id| entanglement_capability(&benchmark_circuit(id).unwrap(), 5000, id as u64).unwrap())
        .collect();
    let elapsed = t.elapsed();
    let table = published_column(|s| published_row(s).and_then(|r| r.ent));
    let mut f = Vec::new();
    check(&mut f, ent[0] == 0.0, format!("circuit 1 Ent {}", ent[0]));
    check(&mut f, (ent[8] - 1.0).abs() <= 0.02, format!("circuit 9 Ent {:.3}", ent[8]));
    let off: Vec<String> = pqc_ids()
        .filter(|&id| (ent[id - 1] - table[id - 1]).abs() > 0.07)
        .map(|id| format!("{id}: {:.3} vs {:.2}", ent[id - 1], table[id - 1]))
        .collect();
    check(&mut f, off.is_empty(), format!("{} circuits off by > 0.07 ({})", off.len(), off.join(", ")));
    let rho = spearman(&ent, &table).unwrap();
    check(&mut f, rho >= 0.95, format!("Spearman {rho:.3} < 0.95"));
    check(&mut f, elapsed < Duration::from_secs(300), format!("took {elapsed:?}"));
    verdict(f, format!("Spearman {rho:.3}, {elapsed:.2?}"))
}

fn expressibility_reproduction() -> Verdict {
    let t = Instant::now();
    let exp: Vec<f64> = pqc_ids()
        .into_par_iter()
        .map(|id| expressibility(&benchmark_circuit(id).unwrap(), 5000, 75, id as u64).unwrap())
        .collect();
    let elapsed = t.elapsed();
    let table = published_column(|s| published_row(s).and_then(|r| r.exp));
    let mut f = Vec::new();
    check(&mut f, exp[5] <= 0.05, format!("circuit 6 Exp {:.3}", exp[5]));
    check(&mut f, (exp[8] - 0.67).abs() <= 0.12, format!("circuit 9 Exp {:.3}", exp[8]));
    let rho = spearman(&exp, &table).unwrap();
    check(&mut f, rho >= 0.9, format!("Spearman {rho:.3} < 0.9"));
    check(&mut f, elapsed < Duration::from_secs(600), format!("took {elapsed:?}"));
    verdict(f, format!("circuit 6 {:.3}, circuit 9 {:.3}, Spearman {rho:.3}, {elapsed:.2?}", exp[5], exp[8]))
}

struct Bernoulli;

impl ScoreModel for Bernoulli {
    fn num_params(&self) -> usize {
        1
    }
    fn num_inputs(&self) -> usize {
        1
    }
    fn probs(&self, _: usize) -> Vec<f64> {
        vec![0.5, 0.5]
    }
    fn score(&self, _: usize, y: usize) -> Vec<f64> {
        vec![y as f64 - 0.5]
    }
}

fn effective_dimension_properties() -> Verdict {
    use rand::SeedableRng;
    let cfg = EdConfig::default();
    let mut f = Vec::new();
    let mut ed = [0.0; NUM_CIRCUITS + 1];
    for id in pqc_ids() {
        let e = effective_dimension(ModelSpec::Pqc(id), &cfg).unwrap();
        check(&mut f, e.value <= e.dim as f64, format!("PQC-{id}: ED {:.3} > d {}", e.value, e.dim));
        ed[id] = e.value;
    }
    for h in [2, 4, 8, 16] {
        let e = effective_dimension(ModelSpec::Nn(h), &cfg).unwrap();
        check(&mut f, e.value <= e.dim as f64, format!("NN-{h}: ED {:.3} > d {}", e.value, e.dim));
    }

    let d = 4;
    let kappa = cfg.kappa().unwrap();
    let closed = d as f64 * (1.0 + kappa).ln() / kappa.ln();
    let identity = effective_dimension_from_fims(&vec![DMatrix::identity(d, d); 10], &cfg).unwrap();
    check(&mut f, (identity - closed).abs() <= 1e-6, format!("identity ED {identity} vs {closed}"));

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let fisher = empirical_fim(&Bernoulli, 100_000, &mut rng)[(0, 0)];
    check(&mut f, (fisher - 0.25).abs() <= 0.01, format!("Bernoulli Fisher {fisher:.4}"));
    check(&mut f, ed[6] > ed[1], format!("ED(6) {:.2} <= ED(1) {:.2}", ed[6], ed[1]));
    check(&mut f, ed[14] > ed[9], format!("ED(14) {:.2} <= ED(9) {:.2}", ed[14], ed[9]));
    verdict(
        f,
        format!(
            "ED(6) {:.2} > ED(1) {:.2}, ED(14) {:.2} > ED(9) {:.2}, Bernoulli {fisher:.4}",
            ed[6], ed[1], ed[14], ed[9]
        ),
    )
}

fn metric_invariants() -> Verdict {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut f = Vec::new();
    let mut worst_mw: f64 = 0.0;
    for _ in 0..100 {
        let amps: Vec<num_complex::Complex64> = (0..16)
            .map(|_| num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let state = StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap();
        worst_mw = worst_mw.max((meyer_wallach_q(&state) - meyer_wallach_purity(&state).unwrap()).abs());
    }
    check(&mut f, worst_mw <= 1e-10, format!("MW forms differ by {worst_mw:.2e}"));

    let m = 2000;
    let h = 1.0 / m as f64;
    let mut s = haar_pdf(0.0, 16).unwrap() + haar_pdf(1.0, 16).unwrap();
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * haar_pdf(i as f64 * h, 16).unwrap();
    }
    let norm_err = (s * h / 3.0 - 1.0).abs();
    check(&mut f, norm_err <= 1e-9, format!("Haar normalization off by {norm_err:.2e}"));

    let mut min_kl = f64::INFINITY;
    for _ in 0..200 {
        let mut p: Vec<f64> = (0..75).map(|_| rng.gen_range(0.0..1.0f64).powi(3)).collect();
        let mut q: Vec<f64> = (0..75).map(|_| rng.gen_range(0.01..1.0)).collect();
        let (sp, sq) = (p.iter().sum::<f64>(), q.iter().sum::<f64>());
        p.iter_mut().for_each(|x| *x /= sp);
        q.iter_mut().for_each(|x| *x /= sq);
        min_kl = min_kl.min(kl_divergence(&p, &q).unwrap());
    }
    for id in pqc_ids() {
        min_kl = min_kl.min(expressibility(&benchmark_circuit(id).unwrap(), 500, 75, 3).unwrap());
    }
    check(&mut f, min_kl >= 0.0, format!("KL {min_kl} < 0"));
    verdict(f, format!("MW gap {worst_mw:.1e}, Haar norm error {norm_err:.1e}, min KL {min_kl:.3}"))
}

fn training() -> Verdict {
    let t = Instant::now();
    let runs: Vec<(ModelSpec, f64, usize)> = vec![
        (ModelSpec::Pqc(2), 0.0, 20_000),
        (ModelSpec::Pqc(6), 0.2, 50_000),
        (ModelSpec::Nn(4), 0.2, 50_000),
    ];
    let jobs: Vec<(usize, u64)> = (0..runs.len()).flat_map(|r| [1, 2, 3].map(|s| (r, s))).collect();
    let mrs: Vec<f64> = jobs
        .par_iter()
        .map(|&(r, seed)| {
            let (spec, slip_prob, total_timesteps) = runs[r];
            let cfg = PpoConfig { slip_prob, total_timesteps, seed, ..Default::default() };
            max_reward(&train(spec, &cfg).unwrap().series)
        })
        .collect();
    let elapsed = t.elapsed();
    let per = |r: usize| &mrs[3 * r..3 * r + 3];
    let fmt = |r: usize| per(r).iter().map(|m| format!("{m:.2}")).collect::<Vec<_>>().join("/");
    let mut f = Vec::new();
    let bars = [0.95, 0.6, 0.7];
    let names = ["PQC-2 slip 0 at 20k", "PQC-6 at 50k", "NN-4 at 50k"];
    for r in 0..3 {
        let hits = per(r).iter().filter(|&&m| m >= bars[r]).count();
        check(&mut f, hits >= 2, format!("{} MR {} (< 2 seeds >= {})", names[r], fmt(r), bars[r]));
    }
    verdict(
        f,
        format!("MR per seed: PQC-2/slip 0 {}, PQC-6 {}, NN-4 {}, {elapsed:.1?}", fmt(0), fmt(1), fmt(2)),
    )
}

fn series(values: &[f64]) -> Vec<RewardPoint> {
    values
        .iter()
        .enumerate()
        .map(|(i, &reward)| RewardPoint { step: 1000 * (i + 1), reward })
        .collect()
}

fn ttc_and_fixture() -> Verdict {
    let mut f = Vec::new();
    let worked = time_to_convergence(&series(&[0.0, 0.5, 0.6, 0.7, 0.65]), TTC_TOLERANCE);
    check(&mut f, worked == Some(2000), format!("worked TTC example gave {worked:?}"));
    let constant = time_to_convergence(&series(&[0.4; 6]), TTC_TOLERANCE);
    check(&mut f, constant == Some(1000), format!("constant TTC gave {constant:?}"));
    let rising: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let ttc = time_to_convergence(&series(&rising), TTC_TOLERANCE);
    check(&mut f, ttc == Some(9000), format!("rising TTC gave {ttc:?}"));

    check(&mut f, smooth(&[0.3; 15], 10) == vec![0.3; 15], "constant smoothing".into());
    let mut impulse = vec![0.0; 15];
    impulse[0] = 1.0;
    let mut want: Vec<f64> = (1..=10).map(|k| 1.0 / k as f64).collect();
    want.extend([0.0; 5]);
    check(&mut f, smooth(&impulse, 10) == want, "impulse smoothing".into());
    check(&mut f, smooth(&rising, 1) == rising, "window-1 smoothing".into());

    let first = correlate(&published_summary());
    let again = correlate(&published_summary());
    let ent_mr = first.iter().find(|r| r.metric == Metric::Ent && r.target == Target::Mr).unwrap();
    check(&mut f, first == again, "fixture correlations differ across runs".into());
    check(
        &mut f,
        ent_mr.spearman == Some(0.11887705710323249) && ent_mr.pearson == Some(0.211650070844647),
        format!("Ent-MR fixture moved: {:?} {:?}", ent_mr.spearman, ent_mr.pearson),
    );
    verdict(f, format!("TTC and smoothing examples exact, Ent-MR Spearman {:?}", ent_mr.spearman.unwrap()))
}

fn determinism() -> Verdict {
    let mut f = Vec::new();
    for spec in [ModelSpec::Pqc(6), ModelSpec::Nn(4)] {
        let cfg = PpoConfig { total_timesteps: 6144, seed: 3, ..Default::default() };
        let a = rewards_csv(&train(spec, &cfg).unwrap().series);
        let b = rewards_csv(&train(spec, &cfg).unwrap().series);
        check(&mut f, a.as_bytes() == b.as_bytes(), format!("{spec} rewards.csv differs"));
    }
    verdict(f, "rewards.csv byte-identical on repeat for PQC-6 and NN-4".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("oracle fidelity", oracle_fidelity),
        ("parameter counts", parameter_counts),
        ("gradient oracle", gradient_oracle),
        ("entanglement capability", entanglement),
        ("expressibility", expressibility_reproduction),
        ("effective dimension", effective_dimension_properties),
        ("metric invariants", metric_invariants),
        ("training bands", training),
        ("TTC/MR and fixture", ttc_and_fixture),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
