use qrl_lake::circuits::{benchmark_circuit, NUM_CIRCUITS};
use qrl_lake::models::ModelSpec;
use qrl_lake::qmetrics::{effective_dimension, expressibility, EdConfig};

#[test]
fn effective_dimension_grows_with_n() {
    let mut specs: Vec<ModelSpec> = (1..=NUM_CIRCUITS).map(ModelSpec::Pqc).collect();
    specs.extend([2, 4, 8, 16].map(ModelSpec::Nn));
    let violations: Vec<String> = specs
        .into_iter()
        .filter_map(|spec| {
            let at = |n: f64| {
                let cfg = EdConfig { n, seed: 1, ..Default::default() };
                effective_dimension(spec, &cfg).unwrap().value
            };
            let (small, large) = (at(1e4), at(1e6));
            (small > large + 0.1).then(|| format!("{spec}: {small:.3} > {large:.3}"))
        })
        .collect();
    assert!(violations.is_empty(), "ED(1e4) exceeds ED(1e6) + 0.1 for {violations:?}");
}

#[test]
fn expressibility_is_seed_stable_for_expressive_circuits() {
    for id in 1..=NUM_CIRCUITS {
        let c = benchmark_circuit(id).unwrap();
        let a = expressibility(&c, 5000, 75, 1).unwrap();
        if a > 0.3 {
            continue;
        }
        let b = expressibility(&c, 5000, 75, 2).unwrap();
        assert!((a - b).abs() <= 0.05, "circuit {id}: {a} vs {b}");
    }
}

#[test]
fn effective_dimension_never_exceeds_parameter_count() {
    let cfg = EdConfig {
        theta_samples: 20,
        k: 50,
        ..Default::default()
    };
    for id in 1..=NUM_CIRCUITS {
        let ed = effective_dimension(ModelSpec::Pqc(id), &cfg).unwrap();
        assert!(ed.value > 0.0 && ed.value <= ed.dim as f64, "circuit {id}: {ed:?}");
    }
}
