//! Fitted-nuisance behavior on generated data: probability normalization,
//! the treatment-propensity complement identity, misspecified covariate
//! omission, and determinism.

use mste_core::data::TargetSpec;
use mste_core::estimators::cross_fit;
use mste_core::nuisance::{fit_nuisances, NuisanceSpec, OutcomeModelKind};
use mste_core::sim::{DgpMainConfig, MainDgp};

fn dgp() -> MainDgp {
    MainDgp::new(DgpMainConfig::new(3000, 900)).unwrap()
}

#[test]
fn eta_complement_and_q_normalization() {
    let dgp = dgp();
    let d = dgp.generate(11);
    let target = TargetSpec::Internal { source: 0 };
    let train = d.estimation_indices(target);
    let ns = fit_nuisances(&d, &NuisanceSpec::default(), target, &train, 0).unwrap();
    for i in (0..d.len()).step_by(97) {
        let x = d.x(i);
        let sum_eta = ns.eta_raw(0, x) + ns.eta_raw(1, x);
        assert!((sum_eta - 1.0).abs() < 1e-10, "eta sum {sum_eta}");
        let sum_q: f64 = (0..3).map(|s| ns.q_raw(s, x)).sum();
        assert!((sum_q - 1.0).abs() < 1e-10, "q sum {sum_q}");
        for s in 0..3 {
            let q = ns.q(s, x);
            assert!((0.01..=0.99).contains(&q));
        }
        let eta = ns.eta(1, x);
        assert!((0.01..=0.99).contains(&eta));
    }
}

#[test]
fn misspecified_outcome_has_no_dropped_covariate_terms() {
    let dgp = dgp();
    let d = dgp.generate(13);
    let target = TargetSpec::Internal { source: 0 };
    let train = d.estimation_indices(target);
    let spec = NuisanceSpec::misspecified_outcome(vec![0, 1, 2, 3]);
    let ns = fit_nuisances(&d, &spec, target, &train, 0).unwrap();
    let outcome_terms: Vec<&String> = ns
        .coefficient_report
        .iter()
        .filter(|(model, _, _)| model.starts_with("outcome"))
        .map(|(_, term, _)| term)
        .collect();
    assert!(!outcome_terms.is_empty());
    for dropped in ["x5", "x6", "x7", "x8", "x9", "x10"] {
        assert!(
            outcome_terms.iter().all(|t| !t.contains(dropped)),
            "dropped covariate {dropped} appears in {outcome_terms:?}"
        );
    }
    // kept covariates are present
    assert!(outcome_terms.iter().any(|t| t.contains("x2")));
}

#[test]
fn oracle_kinds_are_rejected_by_the_fitter() {
    let dgp = dgp();
    let d = dgp.generate(17);
    let target = TargetSpec::Internal { source: 0 };
    let train = d.estimation_indices(target);
    let spec = NuisanceSpec {
        outcome_model: OutcomeModelKind::Oracle,
        ..NuisanceSpec::default()
    };
    assert!(fit_nuisances(&d, &spec, target, &train, 0).is_err());
}

#[test]
fn external_target_fits_participation_model() {
    let dgp = dgp();
    let d = dgp.generate(19);
    let target = TargetSpec::External;
    let train = d.estimation_indices(target);
    let ns = fit_nuisances(&d, &NuisanceSpec::default(), target, &train, 0).unwrap();
    let mut avg_p = 0.0;
    let mut count = 0;
    for i in (0..d.len()).step_by(13) {
        let p = ns.p(d.x(i)).expect("p fitted for external target");
        assert!((0.01..=0.99).contains(&p));
        avg_p += p;
        count += 1;
    }
    avg_p /= count as f64;
    // calibrated multi-source share is 900/3000
    assert!((avg_p - 0.3).abs() < 0.05, "avg p {avg_p}");

    let internal =
        fit_nuisances(&d, &NuisanceSpec::default(), TargetSpec::Internal { source: 0 }, &train, 0)
            .unwrap();
    assert!(internal.p(d.x(0)).is_none());
}

#[test]
fn cross_fit_is_deterministic() {
    let dgp = dgp();
    let d = dgp.generate(23);
    let target = TargetSpec::Internal { source: 0 };
    let spec = NuisanceSpec {
        outcome_model: OutcomeModelKind::Linear,
        ..NuisanceSpec::default()
    };
    let cf1 = cross_fit(&d, &spec, target, 2, 7).unwrap();
    let cf2 = cross_fit(&d, &spec, target, 2, 7).unwrap();
    assert_eq!(cf1.fold_of, cf2.fold_of);
    for i in (0..d.len()).step_by(101) {
        let x = d.x(i);
        for fold in 0..2 {
            assert_eq!(
                cf1.nuisances[fold].mu(1, x),
                cf2.nuisances[fold].mu(1, x)
            );
            assert_eq!(
                cf1.nuisances[fold].eta(1, x),
                cf2.nuisances[fold].eta(1, x)
            );
        }
    }
}

#[test]
fn oracle_set_matches_generating_formulas() {
    let dgp = dgp();
    let ns = dgp.oracle(0.01);
    let x = [3.0, 0.2, -0.1, 0.0, 0.15, 0.1, 0.05, 0.3, -0.2, 0.1];
    let mu1 = ns.mu(1, &x);
    assert_eq!(mu1, mste_core::sim::potential_mean(&dgp.cfg, &x, 1));
    let p = ns.p(&x).unwrap();
    assert!((p - dgp.participation_prob(&x)).abs() < 1e-12);
    let q0 = ns.q_raw(0, &x);
    assert!((q0 - dgp.source_probs(&x)[0]).abs() < 1e-12);
}
