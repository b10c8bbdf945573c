use intrep_core::numerics::ks_uniform;
use intrep_core::pairs::{mult_u, PairData};
use intrep_core::two_group::*;
use intrep_core::RngStream;
use proptest::prelude::*;

fn spec(family: Family, psi: f64, m: usize) -> StratumGenSpec {
    StratumGenSpec { family, psi, tau: 1.3, m, r_min: 1, r_max: 4, gamma_lo: 0.5, gamma_hi: 1.5 }
}

#[test]
fn null_constructions_are_uniform() {
    let mut rng = RngStream::new(51, 0);
    let normal = gen_strata(&spec(Family::Normal, 0.4, 5000), &mut rng).unwrap();
    let u = normal_u(&normal, 0.4, 1.3).unwrap();
    assert!(ks_uniform(u.values()).p_value > 0.01);

    let pois = gen_strata(&spec(Family::Poisson, 2.0, 5000), &mut rng).unwrap();
    let u = poisson_u(&pois, 2.0, &mut rng).unwrap();
    assert!(ks_uniform(u.values()).p_value > 0.01);

    let gamma = gen_strata(&spec(Family::Gamma, 0.7, 5000), &mut rng).unwrap();
    let u = gamma_f_u(&gamma, 0.7).unwrap();
    assert!(ks_uniform(u.values()).p_value > 0.01);
}

#[test]
fn estimates_recover_the_effect() {
    let mut rng = RngStream::new(52, 0);
    let normal = gen_strata(&spec(Family::Normal, 0.4, 4000), &mut rng).unwrap();
    let (psi, tau) = normal_estimate(&normal).unwrap();
    assert!((psi - 0.4).abs() < 0.1 && (tau - 1.3).abs() < 0.15, "{psi} {tau}");
    let pois = gen_strata(&spec(Family::Poisson, 2.0, 4000), &mut rng).unwrap();
    assert!((poisson_mle(&pois).unwrap() - 2.0).abs() < 0.15);
    let gamma = gen_strata(&spec(Family::Gamma, 0.7, 4000), &mut rng).unwrap();
    assert!((gamma_mle(&gamma).unwrap() - 0.7).abs() < 0.05);
}

#[test]
fn poisson_u_is_deterministic_given_the_stream() {
    let mut rng = RngStream::new(53, 0);
    let pois = gen_strata(&spec(Family::Poisson, 1.0, 300), &mut rng).unwrap();
    let a = poisson_u(&pois, 1.0, &mut RngStream::new(9, 9)).unwrap();
    let b = poisson_u(&pois, 1.0, &mut RngStream::new(9, 9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn plug_in_assessments_hold_their_level() {
    for family in [Family::Normal, Family::Poisson, Family::Gamma] {
        let reps = 300;
        let mut rej = 0;
        for r in 0..reps {
            let mut rng = RngStream::new(54, r);
            let data = gen_strata(&spec(family, 1.2, 60), &mut rng).unwrap();
            let res = assess_strata(&data, 0.05, &mut rng).unwrap();
            rej += (res.reject_left || res.reject_right) as usize;
        }
        assert!((rej as f64 / reps as f64) < 0.15, "{family:?}: {rej}");
    }
}

proptest! {
    #[test]
    fn unit_gamma_strata_match_pairs(
        y1 in prop::collection::vec(0.01f64..50.0, 1..30),
        psi in 0.05f64..20.0,
    ) {
        let y0: Vec<f64> = y1.iter().map(|v| 1.0 / v + 0.1).collect();
        let m = y1.len();
        let strata = StratumData::new(y1.clone(), y0.clone(), vec![1; m], vec![1; m], Family::Gamma).unwrap();
        let g = gamma_f_u(&strata, psi).unwrap();
        let p = mult_u(&PairData::new(y1, y0).unwrap(), psi).unwrap();
        for (a, b) in g.values().iter().zip(p.values()) {
            prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
        }
    }
}
