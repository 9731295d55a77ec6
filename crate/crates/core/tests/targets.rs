use std::f64::consts::PI;

use boostvi::density::{MixtureDensity, SupportBox};
use boostvi::integrate::{integrate_interval, QuadratureSpec};
use boostvi::targets::{load_dataset, predictive_auc, CauchyTarget, Dataset, GaussComponent, GaussMixTarget, LogisticRegressionModel};

#[test]
fn cauchy_is_normalised_on_its_box() {
    let support = SupportBox::interval(-5.0, 5.0).unwrap();
    let c = CauchyTarget::new(0.0, 1.0, support).unwrap();
    assert!((c.box_mass() - 2.0 / PI * 5f64.atan()).abs() < 1e-14);
    let t = c.into_target();
    let mass = integrate_interval(|z| t.log_target(&[z]).exp(), -5.0, 5.0, &QuadratureSpec::default()).unwrap();
    assert!((mass.value - 1.0).abs() < 1e-9);
}

#[test]
fn gauss_mix_is_normalised_on_its_box() {
    let support = SupportBox::interval(-3.0, 3.0).unwrap();
    let comps = vec![
        GaussComponent {
            weight: 0.4,
            mean: vec![-1.5],
            sigma: 0.4,
        },
        GaussComponent {
            weight: 0.6,
            mean: vec![2.8],
            sigma: 0.4,
        },
    ];
    let g = GaussMixTarget::new(comps, support).unwrap();
    assert!(g.box_mass() < 1.0);
    let t = g.into_target();
    let mass = integrate_interval(|z| t.log_target(&[z]).exp(), -3.0, 3.0, &QuadratureSpec::default()).unwrap();
    assert!((mass.value - 1.0).abs() < 1e-9);
}

#[test]
fn logreg_gradient_matches_finite_differences() {
    let data = Dataset::synthetic(60, 5, 3).unwrap();
    let model = LogisticRegressionModel::new(data, 1.5).unwrap();
    let w = [0.3, -0.2, 0.1, 0.5, -0.4];
    let grad = model.gradient(&w).unwrap();
    let h = 1e-6;
    for k in 0..5 {
        let (mut up, mut down) = (w, w);
        up[k] += h;
        down[k] -= h;
        let fd = (model.log_joint(&up).unwrap() - model.log_joint(&down).unwrap()) / (2.0 * h);
        assert!((fd - grad[k]).abs() < 1e-5 * (1.0 + fd.abs()), "{k}: {fd} vs {}", grad[k]);
    }
}

#[test]
fn dataset_round_trips_through_csv() {
    let data = Dataset::synthetic(20, 4, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, data.to_csv()).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back, data);
}

#[test]
fn malformed_dataset_is_rejected() {
    assert!(Dataset::parse_csv("1,0.5,0.2\n0,0.1\n").is_err());
    assert!(Dataset::parse_csv("2,0.5,0.2\n").is_err());
    assert!(Dataset::parse_csv("1,abc,0.2\n").is_err());
}

#[test]
fn split_preserves_rows() {
    let data = Dataset::synthetic(30, 3, 2).unwrap();
    let (train, test) = data.split(20).unwrap();
    assert_eq!((train.len(), test.len()), (20, 10));
    assert_eq!(test.row(0), data.row(20));
}

#[test]
fn predictive_auc_beats_chance_near_the_truth() {
    let data = Dataset::synthetic(400, 4, 5).unwrap();
    let (train, test) = data.split(300).unwrap();
    let support = SupportBox::cube(4, -4.0, 4.0).unwrap();
    // a crude fit: one gradient-ascent path on the log joint
    let model = LogisticRegressionModel::new(train, 1.0).unwrap();
    let mut w = vec![0.0; 4];
    for _ in 0..200 {
        let g = model.gradient(&w).unwrap();
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi += 0.005 * gi;
        }
    }
    let atom = boostvi::density::TruncatedGaussianAtom::new(support.clamp(&w), 0.05, support).unwrap();
    let a = predictive_auc(&MixtureDensity::single(atom), &test, 50, 1).unwrap();
    assert!(a > 0.7, "{a}");
}
