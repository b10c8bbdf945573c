use intrep_core::numerics::special::chi2_sf;
use intrep_core::replication::{confidence_set_scan, fisher_statistic};
use intrep_core::{assess, Direction, RngStream, USample};
use proptest::prelude::*;

fn uniform_sample(m: usize, rng: &mut RngStream) -> USample {
    USample::new((0..m).map(|_| rng.uniform01()).collect(), 0.0).unwrap()
}

#[test]
fn null_statistics_are_chi_square() {
    let n = 5000;
    for m in [16usize, 64, 400] {
        let mut rng = RngStream::new(31, m as u64);
        let (mut ru, mut rc) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let r = assess(&uniform_sample(m, &mut rng), 0.05).unwrap();
            ru.push(r.r_u);
            rc.push(r.r_comp);
        }
        let mf = m as f64;
        for r in [ru, rc] {
            let mean = r.iter().sum::<f64>() / n as f64;
            let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((mean - 2.0 * mf).abs() <= 3.0 * (4.0 * mf / n as f64).sqrt(), "m {m}: mean {mean}");
            assert!((var / (4.0 * mf) - 1.0).abs() <= 0.1, "m {m}: var {var}");
        }
    }
}

#[test]
fn two_sided_rejection_rate_is_alpha() {
    let mut rng = RngStream::new(32, 0);
    let n = 4000;
    let (mut l, mut r) = (0, 0);
    for _ in 0..n {
        let res = assess(&uniform_sample(30, &mut rng), 0.05).unwrap();
        l += res.rejects(Direction::Left) as usize;
        r += res.rejects(Direction::Right) as usize;
    }
    for c in [l, r] {
        let p = c as f64 / n as f64;
        assert!((p - 0.05).abs() < 4.0 * (0.05 * 0.95 / n as f64).sqrt(), "{p}");
    }
}

#[test]
fn scan_recovers_a_location_parameter() {
    // U_j(psi0) = Phi(x_j - psi0) with x_j ~ N(1, 1)
    let mut rng = RngStream::new(33, 0);
    let x: Vec<f64> = (0..200).map(|_| 1.0 + rng.std_normal()).collect();
    let grid: Vec<f64> = (0..81).map(|i| -1.0 + 0.05 * i as f64).collect();
    let set = confidence_set_scan(
        |psi0| USample::new(x.iter().map(|v| intrep_core::numerics::normal_cdf(v - psi0)).collect(), psi0),
        &grid,
        0.05,
    )
    .unwrap();
    let acc = set.accepted_values();
    assert!(!acc.is_empty());
    assert!(acc.iter().any(|v| (v - 1.0).abs() < 0.2));
    assert!(acc.iter().all(|v| (v - 1.0).abs() < 0.6), "{acc:?}");
}

proptest! {
    #[test]
    fn complement_gives_r_comp(u in prop::collection::vec(1e-6f64..(1.0 - 1e-6), 1..50)) {
        let s = USample::new(u, 0.0).unwrap();
        let r = assess(&s, 0.05).unwrap();
        prop_assert_eq!(fisher_statistic(&s.complement()).unwrap(), r.r_comp);
        prop_assert_eq!(fisher_statistic(&s).unwrap(), r.r_u);
    }

    #[test]
    fn p_values_and_flags_are_consistent(u in prop::collection::vec(0.0f64..=1.0, 1..60), alpha in 0.001f64..0.5) {
        let s = USample::new(u, 0.0).unwrap();
        let r = assess(&s, alpha).unwrap();
        for p in [r.p_right_u, r.p_right_comp, r.p_two_u, r.p_two_comp] {
            prop_assert!((0.0..=1.0).contains(&p));
        }
        prop_assert_eq!(r.reject_u, r.p_right_u < alpha);
        prop_assert_eq!(r.reject_comp, r.p_right_comp < alpha);
        prop_assert_eq!(r.reject_left, r.p_two_u < alpha);
        prop_assert_eq!(r.reject_right, r.p_two_comp < alpha);
        let expect = chi2_sf(r.r_u, 2.0 * r.m as f64).unwrap();
        prop_assert!((r.p_right_u - expect).abs() < 1e-15);
        prop_assert_eq!(assess(&s, alpha).unwrap(), r);
    }
}
