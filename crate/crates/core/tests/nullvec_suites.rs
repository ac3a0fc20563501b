mod common;

use common::random_configurations;
use sle0::loewner::{calogero_moser_rhs, rhs};
use sle0::nullvec::{
    compute_u, compute_u_n2_closed_form, compute_z, log_z_gradient_fd, null_vector_solution,
    z_n2_crossratio,
};
use sle0::poles::{solve_all, solve_pattern, Sign, SolveOptions};
use sle0::{Configuration, LinkPattern};

fn sign_of(p: &LinkPattern) -> Sign {
    if *p == LinkPattern::neighbor(2) {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

#[test]
fn null_vector_and_ward_identities_hold_for_every_solution() {
    let mut worst = [0.0f64; 2];
    for n in 1..=3 {
        for cfg in random_configurations(100 + n as u64, n, 50) {
            for sol in solve_all(&cfg, &SolveOptions::default()).unwrap() {
                let nv = null_vector_solution(&cfg, &sol);
                worst[0] = nv.nv_residual.iter().fold(worst[0], |m, v| m.max(v.abs()));
                worst[1] = nv.cwi_residual.iter().fold(worst[1], |m, v| m.max(v.abs()));
            }
        }
    }
    assert!(worst[0] < 1e-9 && worst[1] < 1e-9, "{worst:?}");
}

#[test]
fn u_is_the_gradient_of_log_z() {
    let mut worst = 0.0f64;
    for cfg in random_configurations(7, 2, 20) {
        for sol in solve_all(&cfg, &SolveOptions::default()).unwrap() {
            let u = compute_u(&cfg, &sol.poles.zeta).unwrap();
            let g = log_z_gradient_fd(&cfg, &sol.coeffs, 1e-5).unwrap();
            for (a, b) in u.iter().zip(&g) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    assert!(worst < 2e-6, "{worst}");
}

#[test]
fn u_matches_the_n2_closed_forms() {
    let mut worst = 0.0f64;
    for cfg in random_configurations(11, 2, 100) {
        for sol in solve_all(&cfg, &SolveOptions::default()).unwrap() {
            let u = compute_u(&cfg, &sol.poles.zeta).unwrap();
            let closed = compute_u_n2_closed_form(&cfg, sign_of(&sol.pattern)).unwrap();
            for (a, b) in u.iter().zip(&closed) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    assert!(worst < 1e-9, "{worst}");

    let cfg = Configuration::new(vec![-3.0, 0.0, 1.0, 2.0]).unwrap();
    let sol = solve_pattern(&cfg, &LinkPattern::neighbor(2), &SolveOptions::default()).unwrap();
    let u = compute_u(&cfg, &sol.poles.zeta).unwrap();
    assert!((u[0] - 61.0 / 30.0).abs() < 1e-9);
    let closed = compute_u_n2_closed_form(&cfg, Sign::Plus).unwrap();
    assert!((closed[0] - 61.0 / 30.0).abs() < 1e-12);
}

#[test]
fn z_is_proportional_to_its_cross_ratio_form() {
    for p in [LinkPattern::neighbor(2), LinkPattern::rainbow(2)] {
        let logs: Vec<f64> = random_configurations(13, 2, 30)
            .iter()
            .map(|cfg| {
                let sol = solve_pattern(cfg, &p, &SolveOptions::default()).unwrap();
                let z = compute_z(cfg, &sol.poles.zeta).unwrap();
                (z / z_n2_crossratio(cfg, sign_of(&p)).unwrap()).ln()
            })
            .collect();
        let spread = logs.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
            - logs.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        assert!(spread < 1e-8, "{p}: {spread}");
    }
}

#[test]
fn quarter_speed_flow_is_calogero_moser() {
    let mut states = Vec::new();
    for (n, count) in [(1, 100), (2, 200), (3, 100)] {
        for cfg in random_configurations(17 + n as u64, n, count) {
            for sol in solve_all(&cfg, &SolveOptions::default()).unwrap() {
                states.push((cfg.x().to_vec(), sol.poles.zeta));
            }
        }
    }
    assert!(states.len() >= 1000, "{}", states.len());
    let mut worst = 0.0f64;
    for (x, zeta) in states.iter().take(1000) {
        let nu = vec![0.25; x.len()];
        let d = rhs(x, zeta, &[], &nu);
        let (dx, dz) = calogero_moser_rhs(x, zeta).unwrap();
        for (a, b) in d.x.iter().zip(&dx) {
            worst = worst.max((a - b).abs());
        }
        for (a, b) in d.xi.iter().zip(&dz) {
            worst = worst.max((a - b).norm());
        }
    }
    assert!(worst < 1e-12, "{worst}");
}
