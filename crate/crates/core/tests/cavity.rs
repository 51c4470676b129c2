use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use vapor_switch::cavity::*;

const T_AIRY_PI: f64 = 0.01234567901234568;
const T_AIRY_ZERO_ETA083: f64 = 0.16338582677165353;
const R_PI_ETA083: f64 = 0.9775165818169818;
const FINESSE_08: f64 = 14.049629462081452;
const TAU_18_03331: f64 = 1.99998360198908e-08;
const L_FOR_20NS: f64 = 0.33310273111111116;
const BANDWIDTH_18_0416: f64 = 40036385.950854704;

fn lossless() -> RingCavity {
    RingCavity::symmetric(0.8, 1.0, 0.3331).unwrap()
}

#[test]
fn symmetric_lossless_cavity_is_fully_transmitting_on_resonance() {
    for mode in [FormulaMode::Airy, FormulaMode::SelfConsistent] {
        assert_relative_eq!(transmission(0.0, &lossless(), mode).value, 1.0, max_relative = 1e-14);
    }
    assert!(reflection(0.0, &lossless()) < 1e-28);
}

#[test]
fn transmission_reference_values() {
    let t = transmission(PI, &lossless(), FormulaMode::Airy);
    assert!(!t.capped);
    assert_relative_eq!(t.value, T_AIRY_PI, max_relative = 1e-12);
    let lossy = RingCavity::symmetric(0.8, 0.83, 0.3331).unwrap();
    assert_relative_eq!(
        transmission(0.0, &lossy, FormulaMode::Airy).value,
        T_AIRY_ZERO_ETA083,
        max_relative = 1e-12
    );
    assert_relative_eq!(reflection(PI, &lossy), R_PI_ETA083, max_relative = 1e-12);
}

#[test]
fn finesse_reference_and_limits() {
    assert_relative_eq!(finesse(&lossless()).unwrap(), FINESSE_08, max_relative = 1e-12);
    let nearly_open = RingCavity::symmetric(1e-12, 1.0, 0.3).unwrap();
    assert!(finesse(&nearly_open).unwrap() < 1e-5);
    let mut prev = 0.0;
    for i in 1..=20 {
        let c = RingCavity::symmetric(0.8, 0.05 * i as f64, 0.3).unwrap();
        let f = finesse(&c).unwrap();
        assert!(f > prev);
        prev = f;
    }
}

#[test]
fn ring_up_time_reference_values() {
    assert_relative_eq!(ring_up_time(18.0, 0.3331).unwrap(), TAU_18_03331, max_relative = 1e-12);
    assert_relative_eq!(ring_up_time(18.0, L_FOR_20NS).unwrap(), 20e-9, max_relative = 1e-12);
    assert_relative_eq!(ring_up_time(1.0, 0.299792458).unwrap(), 1e-9, max_relative = 1e-12);
    assert_relative_eq!(
        ring_up_time(36.0, 0.3331).unwrap(),
        2.0 * ring_up_time(18.0, 0.3331).unwrap(),
        max_relative = 1e-14
    );
}

#[test]
fn bandwidth_reference_values() {
    assert_relative_eq!(
        bandwidth_for(18.0, 0.416).unwrap(),
        BANDWIDTH_18_0416,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        bandwidth_for(18.0, 0.208).unwrap(),
        2.0 * bandwidth_for(18.0, 0.416).unwrap(),
        max_relative = 1e-14
    );
    assert!(bandwidth_for(1e12, 0.3).unwrap() < 1e-3);
    let c = RingCavity::symmetric_for_finesse(18.0, 0.416).unwrap();
    assert_relative_eq!(bandwidth(&c).unwrap(), BANDWIDTH_18_0416, max_relative = 1e-10);
}

#[test]
fn contrast_grows_with_round_trip_factor() {
    let mut prev = -1.0;
    for i in 1..=40 {
        let c = RingCavity::symmetric(0.8, 0.025 * i as f64, 0.3).unwrap();
        let hi = transmission(0.0, &c, FormulaMode::SelfConsistent).value;
        let lo = transmission(PI, &c, FormulaMode::SelfConsistent).value;
        let contrast = (hi - lo) / (hi + lo);
        assert!(contrast > prev);
        prev = contrast;
    }
}

fn cavity_strategy() -> impl Strategy<Value = RingCavity> {
    (0.05f64..0.99, 0.05f64..0.99, 0.0f64..1.0, 0.0f64..1.0, 0.05f64..1.0).prop_map(|(r1_sq, r2_sq, l1, l2, eta)| {
        RingCavity::from_power_coefficients(
            r1_sq,
            r2_sq,
            (1.0 - r1_sq) * (1.0 - 0.2 * l1),
            (1.0 - r2_sq) * (1.0 - 0.2 * l2),
            eta,
            0.3331,
            0.0,
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn transmission_is_even_and_periodic(c in cavity_strategy(), phi in -10.0f64..10.0) {
        for mode in [FormulaMode::Airy, FormulaMode::SelfConsistent] {
            let t = transmission(phi, &c, mode).value;
            prop_assert!((t - transmission(-phi, &c, mode).value).abs() < 1e-12);
            prop_assert!((t - transmission(phi + 2.0 * PI, &c, mode).value).abs() < 1e-12);
            prop_assert!(t <= transmission(0.0, &c, mode).value + 1e-15);
            prop_assert!(t >= transmission(PI, &c, mode).value - 1e-15);
        }
    }

    #[test]
    fn ports_never_exceed_input(c in cavity_strategy(), phi in -PI..PI) {
        let t = transmission(phi, &c, FormulaMode::SelfConsistent);
        prop_assert!(!t.capped);
        let r = reflection(phi, &c);
        prop_assert!(r >= 0.0);
        prop_assert!(t.value + r <= 1.0 + 1e-12);
        if !c.is_lossless() {
            prop_assert!(t.value + r < 1.0);
        }
    }

    #[test]
    fn lossless_cavity_conserves_energy(r_sq in 0.01f64..0.99, phi in -PI..PI) {
        let c = RingCavity::symmetric(r_sq, 1.0, 0.3).unwrap();
        let t = transmission(phi, &c, FormulaMode::SelfConsistent).value;
        prop_assert!((t + reflection(phi, &c) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn modes_agree_without_round_trip_loss(
        r1_sq in 0.05f64..0.99, r2_sq in 0.05f64..0.99, phi in -PI..PI,
    ) {
        let c = RingCavity::from_power_coefficients(r1_sq, r2_sq, 1.0 - r1_sq, 1.0 - r2_sq, 1.0, 0.3, 0.0)
            .unwrap();
        let p = transmission(phi, &c, FormulaMode::Airy).value;
        let s = transmission(phi, &c, FormulaMode::SelfConsistent).value;
        prop_assert!((p - s).abs() < 1e-12);
    }
}
