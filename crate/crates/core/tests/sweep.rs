use vapor_switch::cavity::{BiasPolicy, RingCavity};
use vapor_switch::doppler::DopplerSettings;
use vapor_switch::medium::{AtomicMedium, FieldConfig, Geometry, LadderAtom, VaporCell};
use vapor_switch::sweep::*;
use vapor_switch::units::ghz_to_rad_s;

fn medium() -> AtomicMedium {
    AtomicMedium::new(
        LadderAtom::rb87(),
        VaporCell::new(0.05, 332.0, 0.0).unwrap(),
        DopplerSettings::default(),
    )
    .unwrap()
}

fn field(power: f64) -> FieldConfig {
    let d = ghz_to_rad_s(-0.65);
    FieldConfig::new(d, d, power, 100e-6, Geometry::CounterPropagating).unwrap()
}

fn axis() -> AxisRange {
    AxisRange::new(-3.0, 3.0, 41)
}

#[test]
fn zero_control_power_gives_zero_phase_everywhere() {
    let g = sweep_2d(&axis(), &axis(), &field(0.0), &medium(), &RingCavity::default()).unwrap();
    assert!(g.values_phase.iter().flatten().all(|&p| p == 0.0));
}

#[test]
fn far_detuned_corner_is_transparent() {
    let range = AxisRange::new(-12.0, 12.0, 5);
    let g = sweep_2d(&range, &range, &field(0.5), &medium(), &RingCavity::default()).unwrap();
    assert!(g.values_transmission[0][0] > 0.99);
    assert!(g.values_transmission[4][4] > 0.99);
}

#[test]
fn matrices_follow_axes() {
    let xs = AxisRange::new(-2.0, 1.0, 7);
    let ys = AxisRange::new(-1.0, 2.0, 4);
    let g = sweep_2d(&xs, &ys, &field(0.5), &medium(), &RingCavity::default()).unwrap();
    assert_eq!(g.values_phase.len(), 4);
    assert!(g.values_phase.iter().all(|r| r.len() == 7));
    assert!(g.delta_s_axis.windows(2).all(|w| w[1] > w[0]));
    for (i, row) in g.values_transmission.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            assert_eq!(v, g.transmission_on[i][j].min(g.transmission_off[i][j]));
        }
    }
}

#[test]
fn detuned_quadrant_has_transparent_switching_region() {
    let g = sweep_2d(&axis(), &axis(), &field(0.5), &medium(), &RingCavity::default()).unwrap();
    let mut mask = g.mask(0.95);
    for (i, row) in mask.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell &= g.delta_s_axis[j] < 0.0 && g.delta_c_axis[i] < 0.0 && g.values_phase[i][j].abs() > 0.1;
        }
    }
    assert!(connected_regions(&mask).iter().any(|r| r.len() >= 4));
    let centre = axis().points / 2;
    assert!(g.values_transmission[centre][centre] < 0.5);
    let contours = g.contours();
    assert_eq!(contours.iter().map(|c| c.level).collect::<Vec<_>>(), CONTOUR_LEVELS);
    for pair in contours.windows(2) {
        for (a, b) in pair[0].mask.iter().flatten().zip(pair[1].mask.iter().flatten()) {
            assert!(!*b || *a);
        }
    }
    assert!(contours.iter().all(|c| !c.polylines.is_empty()));
}

#[test]
fn sweep_output_is_deterministic() {
    let a = sweep_2d(&axis(), &axis(), &field(0.5), &medium(), &RingCavity::default()).unwrap();
    let b = sweep_2d(&axis(), &axis(), &field(0.5), &medium(), &RingCavity::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.contours(), b.contours());
}

#[test]
fn operating_point_contrast_is_near_measured_value() {
    let pts = sweep_contrast_diagonal(
        &[-0.65],
        &field(0.5),
        &medium(),
        &RingCavity::default(),
        BiasPolicy::default(),
    )
    .unwrap();
    assert!((pts[0].contrast - 0.89).abs() <= 0.1, "{}", pts[0].contrast);
    assert!(
        (2.0..=5.0).contains(&pts[0].insertion_loss_db),
        "{}",
        pts[0].insertion_loss_db
    );
}

#[test]
fn contrast_tails_off_far_from_resonance() {
    let axis: Vec<f64> = (0..=12).map(|i| -0.6 - 0.2 * i as f64).collect();
    let pts = sweep_contrast_diagonal(
        &axis,
        &field(0.5),
        &medium(),
        &RingCavity::default(),
        BiasPolicy::default(),
    )
    .unwrap();
    let peak = pts.iter().map(|p| p.contrast).fold(f64::MIN, f64::max);
    let last = pts.last().unwrap().contrast;
    assert!(last < peak - 0.2, "peak {peak}, far {last}");
}

#[test]
fn far_detuned_contrast_grows_with_power_until_pi_shift() {
    let m = medium();
    let cavity = RingCavity::default();
    for detuning in [-4.0, -6.0] {
        let mut prev = f64::MIN;
        for k in 1..=40 {
            let power = 0.05 * k as f64;
            let p =
                &sweep_contrast_diagonal(&[detuning], &field(power), &m, &cavity, BiasPolicy::default()).unwrap()[0];
            if p.phase_shift.abs() >= std::f64::consts::PI {
                break;
            }
            assert!(p.contrast >= prev, "{detuning} GHz, {power} W: {} < {prev}", p.contrast);
            prev = p.contrast;
        }
        assert!(prev > 0.0);
    }
}

#[test]
fn diagonal_runs_in_axis_order() {
    let axis = AxisRange::new(-3.0, 3.0, 121).values();
    let pts = sweep_contrast_diagonal(
        &axis,
        &field(0.5),
        &medium(),
        &RingCavity::default(),
        BiasPolicy::default(),
    )
    .unwrap();
    assert_eq!(pts.len(), 121);
    assert!(pts.iter().zip(&axis).all(|(p, d)| p.detuning_ghz == *d));
}
