use std::time::Instant;

use mpa_core::experiment::lemmas::{run_instance, LemmaInstance, VerdictStatus};
use mpa_core::experiment::{
    run_correlation_experiment, task_pairs, verify_lemma1, verify_lemma2, SuiteSpec, SyntheticTaskSuite,
};
use mpa_core::transfer::{derive_seed, Setting};
use mpa_core::{compute_mpa, Error};

fn alpha_grid_suite() -> SuiteSpec {
    let alphas = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .flat_map(|&a| std::iter::repeat_n(a, 4))
        .collect();
    SuiteSpec {
        alphas,
        seeds: vec![0],
        ..SuiteSpec::default()
    }
}

#[test]
fn five_level_alpha_suite_correlates() {
    let spec = alpha_grid_suite();
    let suite = SyntheticTaskSuite::generate(&spec, 0).unwrap();
    let t = Instant::now();
    let res = run_correlation_experiment(&suite, &spec.train.with_seed(derive_seed(spec.train.seed, 0))).unwrap();
    eprintln!(
        "suite seed 0: r = {:.4}, p = {:.3e}, {:?}",
        res.r,
        res.p_value,
        t.elapsed()
    );
    assert!(res.r > 0.6, "r = {}", res.r);
    assert!(res.p_value < 0.05, "p = {}", res.p_value);
    assert_eq!(res.tasks.len(), 20);
    assert!(res.tasks.iter().enumerate().all(|(i, t)| t.task == i));
    // MPA column recomputed from the label pairs
    for t in &res.tasks {
        assert_eq!(t.mpa, compute_mpa(&task_pairs(&suite, t.task).unwrap()));
    }
}

#[test]
fn fully_aligned_suite_is_degenerate() {
    let spec = SuiteSpec {
        alphas: vec![1.0; 10],
        n_train: 300,
        n_heldout: 100,
        train: mpa_core::TrainConfig {
            epochs: 2,
            ..Default::default()
        },
        ..SuiteSpec::default()
    };
    let suite = SyntheticTaskSuite::generate(&spec, 0).unwrap();
    let err = run_correlation_experiment(&suite, &spec.train).unwrap_err();
    assert!(matches!(err, Error::DegenerateInput(_)), "{err}");
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for k in i..=j {
            r[idx[k]] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

#[test]
fn mean_mpa_rises_with_alignment() {
    let spec = SuiteSpec::default();
    let mut mean = vec![0.0; spec.alphas.len()];
    for &seed in &spec.seeds {
        let suite = SyntheticTaskSuite::generate(&spec, seed).unwrap();
        for (i, m) in mean.iter_mut().enumerate() {
            *m += compute_mpa(&task_pairs(&suite, i).unwrap()) / spec.seeds.len() as f64;
        }
    }
    let rho = mpa_core::experiment::pearson_r(&ranks(&spec.alphas), &ranks(&mean)).unwrap();
    assert!(rho > 0.0, "spearman {rho}");
}

#[test]
fn fully_aligned_shared_instance() {
    let instance = LemmaInstance {
        alpha: 1.0,
        ..LemmaInstance::random(11)
    };
    let t = Instant::now();
    let verdict = verify_lemma1(&instance).unwrap();
    eprintln!("one shared-input instance: {:?}", t.elapsed());
    assert_eq!(verdict.mpa, 1.0);
    assert_ne!(verdict.status, VerdictStatus::Violated);
    for p in &verdict.points {
        assert_eq!(p.rhs_errors, verdict.source_errors.errors);
        assert!(p.lhs.errors <= p.rhs_errors);
    }
}

#[test]
fn well_separated_different_inputs_instance() {
    let instance = LemmaInstance {
        alpha: 1.0,
        separation: 12.0,
        ..LemmaInstance::random(5)
    };
    let outcome = run_instance(&instance, Setting::DifferentInputs).unwrap();
    assert_eq!(outcome.source_errors.errors, 0);
    assert_eq!(outcome.mpa.value, 1.0);
    let verdict = verify_lemma2(&instance).unwrap();
    assert_ne!(verdict.status, VerdictStatus::Violated);
    for p in &verdict.points {
        assert_eq!((p.lhs.errors, p.rhs_errors), (0, 0));
    }
}

#[test]
fn infeasible_check_gives_vacuous_verdict() {
    // The only scanned margin is one no trained head reaches, while the baseline is error-free.
    let instance = LemmaInstance {
        alpha: 1.0,
        separation: 12.0,
        gamma_grid: vec![1e12],
        n_source: 400,
        n_target: 400,
        ..LemmaInstance::random(2)
    };
    let verdict = verify_lemma1(&instance).unwrap();
    assert_eq!(verdict.status, VerdictStatus::Vacuous);
    assert!(verdict.points.is_empty());
}

#[test]
fn lemma_instances_are_deterministic() {
    let instance = LemmaInstance {
        n_source: 300,
        n_target: 300,
        ..LemmaInstance::random(4)
    };
    assert_eq!(verify_lemma2(&instance).unwrap(), verify_lemma2(&instance).unwrap());
}

#[test]
fn seed_zero_instance_is_feasible() {
    // frozen from a run of this harness
    let outcome = run_instance(&LemmaInstance::random(0), Setting::SharedInputs).unwrap();
    assert!(outcome.assumption.feasible);
    assert_eq!(outcome.assumption.gamma_bar, 1.0);
    assert_eq!(outcome.assumption.rhs.errors, 943);
    assert!(outcome.assumption.gamma_bar >= outcome.gamma_grid[0]);
}
