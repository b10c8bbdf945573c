use intrep_core::numerics::special::chi2_quantile;
use intrep_core::power::*;
use intrep_core::{Execution, RngStream};
use proptest::prelude::*;

#[test]
fn quadrature_moments_match_closed_form() {
    for theta in [0.0, 0.2, 0.5, 0.8] {
        let fam = ThetaFamily::constant(theta, 1).unwrap();
        let (e, v) = moments_from_cdf(|u| fam.cdf(0, u)).unwrap();
        let (pe, pv) = para_moments(&fam);
        // para_moments is for R = 2 Σ R_j
        assert!((2.0 * e - pe).abs() < 1e-6 && (4.0 * v - pv).abs() < 1e-6, "theta {theta}: {e} {v}");
    }
}

#[test]
fn null_family_moments_are_exact() {
    for m in [1usize, 7, 250] {
        assert_eq!(para_moments(&ThetaFamily::constant(0.0, m).unwrap()), (2.0 * m as f64, 4.0 * m as f64));
    }
}

fn mc_rejection(theta: f64, m: usize, alpha: f64, reps: usize, seed: u64) -> f64 {
    let k = chi2_quantile(1.0 - alpha, 2.0 * m as f64).unwrap();
    let hits = Execution::Parallel.map(reps, |r| {
        let mut rng = RngStream::new(seed, r as u64);
        // U = V^{1/(1-θ)} has distribution function u^{1-θ}
        let stat: f64 = (0..m).map(|_| -2.0 * rng.uniform01().ln() / (1.0 - theta)).sum();
        (stat >= k) as usize
    });
    hits.iter().sum::<usize>() as f64 / reps as f64
}

#[test]
fn markov_bound_is_valid() {
    for theta in [0.1, 0.3, 0.5] {
        for m in [10usize, 50, 100] {
            let bound = markov_bound(&ThetaFamily::constant(theta, m).unwrap(), 0.05).unwrap();
            let mc = mc_rejection(theta, m, 0.05, 5000, 71);
            let se = (mc * (1.0 - mc) / 5000.0).sqrt().max(1e-3);
            assert!(bound <= mc + 3.0 * se, "theta {theta}, m {m}: bound {bound} vs mc {mc}");
        }
    }
}

#[test]
fn normal_power_tracks_simulation() {
    let (theta, m) = (0.3, 100);
    let fam = ThetaFamily::constant(theta, m).unwrap();
    let (e, v) = para_moments(&fam);
    // moments of Σ R_j are half and a quarter of those of R
    let approx = normal_power(e / 2.0, (v / 4.0).sqrt(), m, 0.05).unwrap();
    let mc = mc_rejection(theta, m, 0.05, 5000, 72);
    assert!((approx - mc).abs() < 0.05, "{approx} vs {mc}");
}

#[test]
fn weibull_u_cdf_is_identity_at_the_model() {
    for psi in [0.3, 1.0, 4.0] {
        for i in 0..=100 {
            let u = i as f64 / 100.0;
            assert!((weibull_u_cdf(u, 1.0, psi, psi).unwrap() - u).abs() <= 1e-15);
        }
    }
}

#[test]
fn mean_decreases_in_psi0() {
    for (shape, psi) in [(0.5, 1.0), (1.0, 2.0), (2.0, 0.5)] {
        let grid: Vec<f64> = (0..20).map(|i| 0.2 * 1.25f64.powi(i)).collect();
        let e: Vec<f64> = grid
            .iter()
            .map(|&p0| moments_from_cdf(|u| weibull_u_cdf(u, shape, psi, p0).unwrap()).unwrap().0)
            .collect();
        assert!(e.windows(2).all(|w| w[1] < w[0]), "({shape}, {psi}): {e:?}");
    }
}

#[test]
fn zero_contour_crosses_unit_shape() {
    let psi = [0.25, 0.5, 1.0, 2.0, 4.0];
    let grid = heatmap_grid(&[0.9, 1.0, 1.1], &psi, PlugInRule::FirstOrder, Execution::Parallel).unwrap();
    for j in 0..psi.len() {
        assert!(grid.log_e[1][j].abs() < 1e-8, "{:?}", grid.log_e[1]);
        // a second branch of the zero contour runs near ψ* = 0.4
        if psi[j] >= 1.0 {
            assert!(grid.log_e[0][j] > 0.0 && grid.log_e[2][j] < 0.0);
        }
    }
}

#[test]
fn exact_plug_in_solves_the_mean_equation() {
    assert!((limit_psi0(1.0, 2.0).unwrap() - 2.0).abs() < 1e-8);
    for (shape, psi) in [(0.5, 2.0), (2.0, 0.5), (1.5, 3.0)] {
        let p0 = limit_psi0(shape, psi).unwrap();
        // E U(ψ0) = ∫ (1 - F) = 1/2
        let (e_u, _) = mean_of_u(shape, psi, p0);
        assert!((e_u - 0.5).abs() < 1e-7, "({shape}, {psi}): {e_u}");
    }
}

fn mean_of_u(shape: f64, psi: f64, p0: f64) -> (f64, f64) {
    let spec = intrep_core::numerics::QuadratureSpec::default();
    let m = intrep_core::numerics::adaptive_quad(|u| 1.0 - weibull_u_cdf(u, shape, psi, p0).unwrap(), 0.0, 1.0, spec).unwrap();
    (m, 0.0)
}

#[test]
fn additive_mean_matches_quadrature() {
    for (g, d, p0) in [(1.0, 0.5, 1.0), (0.5, 1.0, 2.0), (2.0, -0.5, 0.7)] {
        let (e, _) = moments_from_cdf(|u| additive_u_cdf(u, g, d, p0)).unwrap();
        assert!((e - additive_er(g, d, p0).unwrap()).abs() < 1e-7, "{g} {d} {p0}");
    }
}

#[test]
fn intersection_at_zero_is_one() {
    assert_eq!(solve_intersection_x(0.0).unwrap(), 1.0);
}

proptest! {
    #[test]
    fn intersection_root_solves_its_equation(eps in -0.45f64..0.45) {
        prop_assume!(eps.abs() > 1e-6);
        let x = solve_intersection_x(eps).unwrap();
        let lhs = (x - 1.0) * (x - 1.0);
        let rhs = 2.0 * (1.0 + eps) * x * (x.ln() + 1.0 / x - 1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1e-12).max(1.0));
        prop_assert!((x > 1.0) == (eps > 0.0));
    }

    #[test]
    fn markov_bound_grows_with_departure(theta in 0.05f64..0.6, m in 5usize..200) {
        let lo = markov_bound(&ThetaFamily::constant(theta, m).unwrap(), 0.05).unwrap();
        let hi = markov_bound(&ThetaFamily::constant(theta + 0.2, m).unwrap(), 0.05).unwrap();
        prop_assert!((0.0..=1.0).contains(&lo) && lo <= hi + 1e-12);
    }
}
