use boostvi::density::{AtomFamilyConfig, SupportBox};
use boostvi::lmo::{GridSpec, LmoConfig};
use boostvi::objective::TargetPosterior;
use boostvi::solvers::{run, Algorithm, EventKind, LmoChoice, SolverConfig, TRACE_HEADER};
use boostvi::targets::{GaussComponent, GaussMixTarget};

fn two_gaussian() -> (AtomFamilyConfig, TargetPosterior) {
    let support = SupportBox::interval(-3.0, 3.0).unwrap();
    let family = AtomFamilyConfig::new(support.clone(), 0.4, 1.0, 1e-4).unwrap();
    let comps = vec![
        GaussComponent {
            weight: 0.4,
            mean: vec![-1.5],
            sigma: 0.4,
        },
        GaussComponent {
            weight: 0.6,
            mean: vec![1.2],
            sigma: 0.4,
        },
    ];
    (family, GaussMixTarget::new(comps, support).unwrap().into_target())
}

fn grid_config(algorithm: Algorithm, t: usize) -> SolverConfig {
    let mut cfg = SolverConfig::new(
        algorithm,
        t,
        LmoChoice::Grid(GridSpec {
            means_per_dim: 31,
            sigmas: 2,
        }),
    );
    cfg.curvature = Some(15.0);
    cfg
}

#[test]
fn every_algorithm_improves_on_the_initial_atom() {
    let (family, target) = two_gaussian();
    for alg in Algorithm::ALL {
        let out = run(&grid_config(alg, 8), &family, &target).unwrap();
        let obj = out.trace.objectives();
        assert!(obj.last().unwrap() < &obj[0], "{alg}: {obj:?}");
        assert_eq!(out.trace.records[0].t, 0);
        let w = out.mixture.weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn fully_corrective_never_increases() {
    let (family, target) = two_gaussian();
    let out = run(&grid_config(Algorithm::FullyCorrective, 12), &family, &target).unwrap();
    for pair in out.trace.objectives().windows(2) {
        assert!(pair[1] <= pair[0] + 1e-10, "{pair:?}");
    }
    assert!(*out.trace.objectives().last().unwrap() < 1e-3);
}

#[test]
fn fixed_step_follows_the_schedule() {
    let (family, target) = two_gaussian();
    let out = run(&grid_config(Algorithm::FwFixed, 6), &family, &target).unwrap();
    for r in &out.trace.records[1..] {
        let t = r.t - 1;
        assert!((r.gamma.unwrap() - 2.0 / (t as f64 + 2.0)).abs() < 1e-15);
    }
}

#[test]
fn runs_are_deterministic() {
    let (family, target) = two_gaussian();
    let mut cfg = SolverConfig::new(Algorithm::NormCorrective, 4, LmoChoice::Stochastic(LmoConfig::default()));
    cfg.seed = 9;
    let a = run(&cfg, &family, &target).unwrap();
    let b = run(&cfg, &family, &target).unwrap();
    assert_eq!(a.trace.to_csv(false), b.trace.to_csv(false));
}

#[test]
fn trace_csv_has_one_row_per_record() {
    let (family, target) = two_gaussian();
    let out = run(&grid_config(Algorithm::FwLinesearch, 5), &family, &target).unwrap();
    let csv = out.trace.to_csv(false);
    assert_eq!(csv.lines().next().unwrap(), TRACE_HEADER);
    assert_eq!(csv.lines().count(), out.trace.records.len() + 1);
}

#[test]
fn converged_target_stops_early() {
    // the target is a single family atom, so the first oracle answer is exact
    let support = SupportBox::interval(-3.0, 3.0).unwrap();
    let family = AtomFamilyConfig::new(support.clone(), 0.4, 1.0, 1e-4).unwrap();
    let target = TargetPosterior::analytic(boostvi::density::MixtureDensity::single(family.atom(&[0.0], 1.0).unwrap()));
    let out = run(&grid_config(Algorithm::FullyCorrective, 20), &family, &target).unwrap();
    assert!(out.trace.converged);
    assert!(out.trace.records.len() < 21);
    assert!(out.trace.events.iter().any(|e| e.kind == EventKind::Converged));
}

#[test]
fn dimension_mismatch_is_rejected_with_an_empty_trace() {
    let (_, target) = two_gaussian();
    let family = AtomFamilyConfig::new(SupportBox::cube(2, -3.0, 3.0).unwrap(), 0.4, 1.0, 1e-4).unwrap();
    let err = run(&grid_config(Algorithm::FwFixed, 3), &family, &target).unwrap_err();
    assert!(err.trace.records.is_empty());
}
