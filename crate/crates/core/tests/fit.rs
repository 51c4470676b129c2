use std::io::Write;

use vapor_switch::cavity::{BiasPolicy, RingCavity};
use vapor_switch::doppler::DopplerSettings;
use vapor_switch::fit::*;
use vapor_switch::medium::{FieldConfig, Geometry, LadderAtom, VaporCell};
use vapor_switch::sweep::AxisRange;
use vapor_switch::units::ghz_to_rad_s;
use vapor_switch::Error;

fn model() -> ContrastModel {
    let d = ghz_to_rad_s(-0.65);
    ContrastModel {
        atom: LadderAtom::rb87(),
        cell: VaporCell::new(0.05, 332.0, 0.0).unwrap(),
        field: FieldConfig::new(d, d, 0.5, 100e-6, Geometry::CounterPropagating).unwrap(),
        cavity: RingCavity::default(),
        doppler: DopplerSettings::default(),
        bias: BiasPolicy::default(),
    }
}

fn problem(data: Vec<(f64, f64)>) -> FitProblem {
    FitProblem {
        data,
        initial: FitParams::new(333.15, 0.45),
        bounds: Bounds::default(),
        model: model(),
    }
}

fn axis() -> Vec<f64> {
    AxisRange::new(-3.0, 3.0, 121).values()
}

fn truth() -> FitParams {
    FitParams::new(332.0, 0.5)
}

#[test]
fn objective_vanishes_on_self_generated_data() {
    let data = synthetic_data(&model(), truth(), &axis(), 0.0, 0).unwrap();
    let p = problem(data);
    assert_eq!(p.objective(truth()).unwrap(), 0.0);
    assert!(p.objective(FitParams::new(340.0, 0.4)).unwrap() > 0.0);
}

#[test]
fn noise_free_data_is_recovered_by_both_methods() {
    let p = problem(synthetic_data(&model(), truth(), &axis(), 0.0, 0).unwrap());
    for method in [FitMethod::NelderMead, FitMethod::GridRefine] {
        let r = fit_least_squares(&p, method).unwrap();
        assert!(r.converged);
        assert!(r.residual_norm >= 0.0);
        let dt = (r.best_params.temperature - 332.0).abs() / 332.0;
        let dp = (r.best_params.intracavity_power - 0.5).abs() / 0.5;
        assert!(dt < 1e-3 && dp < 1e-3, "{method:?}: {:?}", r.best_params);
    }
}

#[test]
fn noisy_data_recovery_and_oracle_agreement() {
    for seed in [1, 2, 3] {
        let p = problem(synthetic_data(&model(), truth(), &axis(), 0.02, seed).unwrap());
        let nm = fit_least_squares(&p, FitMethod::NelderMead).unwrap();
        let grid = fit_least_squares(&p, FitMethod::GridRefine).unwrap();
        let cell = grid.fine_cell.unwrap();
        assert!(
            (nm.best_params.temperature - 332.0).abs() <= 2.0,
            "{seed}: {:?}",
            nm.best_params
        );
        assert!(
            (nm.best_params.intracavity_power - 0.5).abs() <= 0.05,
            "{seed}: {:?}",
            nm.best_params
        );
        assert!(nm.residual_norm <= grid.residual_norm + 1e-6);
        assert!((nm.best_params.temperature - grid.best_params.temperature).abs() <= cell[0]);
        assert!((nm.best_params.intracavity_power - grid.best_params.intracavity_power).abs() <= cell[1]);
    }
}

#[test]
fn synthetic_noise_is_seeded() {
    let a = synthetic_data(&model(), truth(), &axis()[..10], 0.02, 7).unwrap();
    let b = synthetic_data(&model(), truth(), &axis()[..10], 0.02, 7).unwrap();
    let c = synthetic_data(&model(), truth(), &axis()[..10], 0.02, 8).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn iteration_cap_reports_best_so_far() {
    let p = problem(synthetic_data(&model(), truth(), &axis(), 0.0, 0).unwrap());
    let options = NelderMeadOptions {
        max_iterations: 3,
        ..NelderMeadOptions::default()
    };
    let r = nelder_mead(&p, &options).unwrap();
    assert!(!r.converged);
    assert_eq!(r.iterations, 3);
    assert!(p.bounds.contains(r.best_params));
    assert!(r.residual_norm <= p.objective(p.initial).unwrap());
}

#[test]
fn problem_validation() {
    let short = problem(vec![(0.0, 0.5); 4]);
    match fit_least_squares(&short, FitMethod::NelderMead) {
        Err(Error::Config { key, .. }) => assert_eq!(key, "fit.data"),
        other => panic!("{other:?}"),
    }
    let mut outside = problem(vec![(0.0, 0.5); 6]);
    outside.initial = FitParams::new(450.0, 0.5);
    assert!(matches!(
        fit_least_squares(&outside, FitMethod::GridRefine),
        Err(Error::Config { .. })
    ));
}

#[test]
fn csv_loader_checks_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    let mut f = std::fs::File::create(&good).unwrap();
    writeln!(f, "detuning_ghz,contrast\n-1.0,0.8\n-0.5, 0.9").unwrap();
    assert_eq!(load_fit_data(&good).unwrap(), vec![(-1.0, 0.8), (-0.5, 0.9)]);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,y\n1,2\n").unwrap();
    assert!(matches!(load_fit_data(&bad), Err(Error::Data { .. })));
    std::fs::write(&bad, "detuning_ghz,contrast\n1,abc\n").unwrap();
    assert!(matches!(load_fit_data(&bad), Err(Error::Data { .. })));
    assert!(matches!(
        load_fit_data(&dir.path().join("missing.csv")),
        Err(Error::Io { .. })
    ));
}
