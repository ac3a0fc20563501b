//! Interaction terms `U_j`, partition functions `Z` and the algebraic
//! identities they satisfy.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poles::{continue_solution, n2_discriminant, Sign, Solution};
use crate::poly::{ComplexPoint, Polynomial};
use crate::rational::{genericity, Configuration};

/// Perturbation sizes for evaluating `U` at non-generic configurations.
pub const RICHARDSON_STEPS: [f64; 3] = [1e-3, 5e-4, 2.5e-4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullVectorSolution {
    #[serde(rename = "U")]
    pub u: Vec<f64>,
    #[serde(rename = "Z_log")]
    pub z_log: f64,
    pub nv_residual: Vec<f64>,
    pub cwi_residual: [f64; 3],
}

fn pair_sum(x: &[f64], j: usize) -> f64 {
    x.iter()
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, &xk)| 2.0 / (x[j] - xk))
        .sum()
}

fn require_generic(x: &[f64], zeta: &[ComplexPoint]) -> Result<()> {
    let g = genericity(x, zeta);
    if g.generic {
        Ok(())
    } else {
        Err(Error::NonGeneric {
            distance: g.min_distance,
        })
    }
}

/// `U_j = sum_{k != j} 2/(x_j - x_k) + sum_k 4/(zeta_k - x_j)` for a generic
/// pole set.
pub fn compute_u(cfg: &Configuration, zeta: &[ComplexPoint]) -> Result<Vec<f64>> {
    let x = cfg.x();
    require_generic(x, zeta)?;
    Ok((0..x.len())
        .map(|j| {
            let poles: Complex64 = zeta.iter().map(|&z| 4.0 * (z - x[j]).inv()).sum();
            pair_sum(x, j) + poles.re
        })
        .collect())
}

/// `U_j` from the polynomials of a canonical map.
///
/// Uses `U_j = R'''(x_j) / R''(x_j)`, which is invariant under Möbius
/// post-composition. With `D` the denominator of `R` or of `-1/R`,
/// whichever does not vanish at `x_j`, this is
/// `sum_{k != j} 2/(x_j - x_k) - 4 D'(x_j)/D(x_j)`. Regular at
/// non-generic configurations.
pub fn u_from_map(x: &[f64], p: &Polynomial, q: &Polynomial) -> Vec<f64> {
    let dp = p.derivative();
    let dq = q.derivative();
    let rel = |poly: &Polynomial, v: f64| {
        let s = poly.max_abs_coeff() * v.abs().max(1.0).powi(poly.degree() as i32);
        poly.eval_real(v).abs() / s
    };
    (0..x.len())
        .map(|j| {
            let xj = x[j];
            let log_deriv = if rel(q, xj) >= rel(p, xj) {
                dq.eval_real(xj) / q.eval_real(xj)
            } else {
                dp.eval_real(xj) / p.eval_real(xj)
            };
            pair_sum(x, j) - 4.0 * log_deriv
        })
        .collect()
}

/// `U^±_j = -sum_{k != j} 2/(x_j - x_k) -+ 4 sqrt(S) / prod_{k != j}(x_j - x_k)`.
/// `+` is the neighbor pattern.
pub fn compute_u_n2_closed_form(cfg: &Configuration, sign: Sign) -> Result<Vec<f64>> {
    if cfg.n() != 2 {
        return Err(Error::InvalidInput(
            "closed form needs four critical points".to_string(),
        ));
    }
    let x = cfg.x();
    let root_s = n2_discriminant(x).sqrt();
    Ok((0..4)
        .map(|j| {
            let prod: f64 = (0..4).filter(|&k| k != j).map(|k| x[j] - x[k]).product();
            -pair_sum(x, j) - sign.value() * 4.0 * root_s / prod
        })
        .collect())
}

/// `U` at a possibly non-generic solution by Richardson extrapolation along
/// perturbations of the critical point that meets a pole.
pub fn compute_u_richardson(cfg: &Configuration, solution: &Solution) -> Result<Vec<f64>> {
    let x = cfg.x();
    let g = genericity(x, &solution.poles.zeta);
    if g.generic {
        return compute_u(cfg, &solution.poles.zeta);
    }
    let m = (0..x.len())
        .min_by(|&a, &b| {
            let da = solution
                .poles
                .zeta
                .iter()
                .map(|z| (z - x[a]).norm())
                .fold(f64::INFINITY, f64::min);
            let db = solution
                .poles
                .zeta
                .iter()
                .map(|z| (z - x[b]).norm())
                .fold(f64::INFINITY, f64::min);
            da.total_cmp(&db)
        })
        .unwrap();
    let mut values = Vec::with_capacity(RICHARDSON_STEPS.len());
    let mut coeffs = solution.coeffs.clone();
    for &h in &RICHARDSON_STEPS {
        let shifted = cfg.perturbed(m, h)?;
        let (v, ps) = continue_solution(&shifted, &coeffs)?;
        values.push(compute_u(&shifted, &ps.zeta)?);
        coeffs = v;
    }
    Ok((0..x.len())
        .map(|j| {
            let r1a = 2.0 * values[1][j] - values[0][j];
            let r1b = 2.0 * values[2][j] - values[1][j];
            (4.0 * r1b - r1a) / 3.0
        })
        .collect())
}

/// `log Z = sum_{j<k} 2 log|x_j - x_k| + sum_{l<m} 8 log|zeta_l - zeta_m|
/// - sum_{k,l} 4 log|x_k - zeta_l|`.
pub fn compute_log_z(cfg: &Configuration, zeta: &[ComplexPoint]) -> Result<f64> {
    let x = cfg.x();
    require_generic(x, zeta)?;
    let mut s = 0.0;
    for j in 0..x.len() {
        for k in j + 1..x.len() {
            s += 2.0 * (x[j] - x[k]).abs().ln();
        }
    }
    for l in 0..zeta.len() {
        for m in l + 1..zeta.len() {
            s += 8.0 * (zeta[l] - zeta[m]).norm().ln();
        }
    }
    for &xk in x {
        for z in zeta {
            s -= 4.0 * (z - xk).norm().ln();
        }
    }
    Ok(s)
}

pub fn compute_z(cfg: &Configuration, zeta: &[ComplexPoint]) -> Result<f64> {
    compute_log_z(cfg, zeta).map(f64::exp)
}

/// Homogeneity degree of `Z`: `2 C(2n,2) + 8 C(n,2) - 8 n^2`.
pub fn z_homogeneity(n: usize) -> f64 {
    let m = 2 * n;
    (m * (m - 1) + 4 * n * n.saturating_sub(1)) as f64 - 8.0 * (n * n) as f64
}

/// `1/2 U_j^2 + sum_{k != j} 2 U_k/(x_k - x_j) - sum_{k != j} 6/(x_k - x_j)^2`
pub fn nv_residual(x: &[f64], u: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut r = 0.5 * u[j] * u[j];
            for k in 0..x.len() {
                if k != j {
                    let d = x[k] - x[j];
                    r += 2.0 * u[k] / d - 6.0 / (d * d);
                }
            }
            r
        })
        .collect()
}

/// `(sum U_j, sum x_j U_j + 6n, sum x_j^2 U_j + 6 sum x_j)`
pub fn cwi_residual(x: &[f64], u: &[f64]) -> [f64; 3] {
    let n = x.len() as f64 / 2.0;
    let s0: f64 = u.iter().sum();
    let s1: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
    let s2: f64 = x.iter().zip(u).map(|(a, b)| a * a * b).sum();
    let sx: f64 = x.iter().sum();
    [s0, s1 + 6.0 * n, s2 + 6.0 * sx]
}

/// Full null-vector report for a solution. `U` falls back to the map-based
/// form at non-generic solutions, where `log Z` is undefined (`NaN`).
pub fn null_vector_solution(cfg: &Configuration, solution: &Solution) -> NullVectorSolution {
    let x = cfg.x();
    let u = compute_u(cfg, &solution.poles.zeta)
        .unwrap_or_else(|_| u_from_map(x, solution.map.p(), solution.map.q()));
    let z_log = compute_log_z(cfg, &solution.poles.zeta).unwrap_or(f64::NAN);
    NullVectorSolution {
        nv_residual: nv_residual(x, &u),
        cwi_residual: cwi_residual(x, &u),
        u,
        z_log,
    }
}

/// Central differences of `log Z` with poles re-solved from `coeffs` at each
/// perturbed configuration.
pub fn log_z_gradient_fd(cfg: &Configuration, coeffs: &[f64], h: f64) -> Result<Vec<f64>> {
    (0..cfg.x().len())
        .map(|j| {
            let mut f = [0.0; 2];
            for (slot, s) in [(0, h), (1, -h)] {
                let shifted = cfg.perturbed(j, s)?;
                let (_, ps) = continue_solution(&shifted, coeffs)?;
                f[slot] = compute_log_z(&shifted, &ps.zeta)?;
            }
            Ok((f[0] - f[1]) / (2.0 * h))
        })
        .collect()
}

/// Finite-difference Jacobian `J[j][k] = d U_k / d x_j`.
pub fn u_jacobian_fd(cfg: &Configuration, coeffs: &[f64], h: f64) -> Result<Vec<Vec<f64>>> {
    (0..cfg.x().len())
        .map(|j| {
            let mut u = Vec::with_capacity(2);
            for s in [h, -h] {
                let shifted = cfg.perturbed(j, s)?;
                let (v, _) = continue_solution(&shifted, coeffs)?;
                let sys = crate::poles::WronskianSystem::new(&shifted);
                let (p, q) = sys.polys(&v);
                u.push(u_from_map(shifted.x(), &p, &q));
            }
            Ok(u[0]
                .iter()
                .zip(&u[1])
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect())
        })
        .collect()
}

/// `F_0(z) = (1-z)^8 / ((z+1)(z-1/2)(z-2) + (1-z+z^2)^{3/2})^4`
pub fn f0(z: f64) -> f64 {
    let w = 1.0 - z + z * z;
    let den = (z + 1.0) * (z - 0.5) * (z - 2.0) + w * w.sqrt();
    (1.0 - z).powi(8) / den.powi(4)
}

/// `(x_2 - x_1)(x_4 - x_3) / ((x_4 - x_2)(x_3 - x_1))`
pub fn cross_ratio(x: &[f64]) -> f64 {
    (x[1] - x[0]) * (x[3] - x[2]) / ((x[3] - x[1]) * (x[2] - x[0]))
}

/// Cross-ratio form of `Z^±`, equal to [`compute_z`] up to a constant
/// factor per pattern.
pub fn z_n2_crossratio(cfg: &Configuration, sign: Sign) -> Result<f64> {
    if cfg.n() != 2 {
        return Err(Error::InvalidInput(
            "cross-ratio form needs four critical points".to_string(),
        ));
    }
    let x = cfg.x();
    let z = cross_ratio(x);
    Ok(match sign {
        Sign::Plus => {
            (1.0 - z).powi(2) / ((x[0] - x[1]).powi(6) * (x[2] - x[3]).powi(6)) * f0(1.0 - z)
        }
        Sign::Minus => z * z / ((x[0] - x[3]).powi(6) * (x[1] - x[2]).powi(6)) * f0(z),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poles::{poles_n2_closed_form, solve_all, SolveOptions};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn circle_u() {
        let cfg = Configuration::new(vec![-1.0, 1.0]).unwrap();
        assert_eq!(compute_u(&cfg, &[c(0.0, 0.0)]).unwrap(), vec![3.0, -3.0]);
        let cfg = Configuration::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(compute_u(&cfg, &[c(0.5, 0.0)]).unwrap(), vec![6.0, -6.0]);
    }

    #[test]
    fn table_u_pinned() {
        let cfg = Configuration::new(vec![-3.0, 0.0, 1.0, 2.0]).unwrap();
        let s = (7.0f64 / 3.0).sqrt();
        let u = compute_u(&cfg, &[c(-s, 0.0), c(s, 0.0)]).unwrap();
        assert!((u[0] - 61.0 / 30.0).abs() < 1e-12);
        let plus = compute_u_n2_closed_form(&cfg, Sign::Plus).unwrap();
        assert!((plus[0] - 61.0 / 30.0).abs() < 1e-12);
        let minus = compute_u_n2_closed_form(&cfg, Sign::Minus).unwrap();
        assert!((minus[0] - 11.0 / 10.0).abs() < 1e-12);
        assert!(compute_u(&cfg, &[c(0.0, 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn map_based_u_at_the_double_pole() {
        let cfg = Configuration::new(vec![-3.0, 0.0, 1.0, 2.0]).unwrap();
        let p = Polynomial::new(vec![-3.0, 7.0, 0.0, 1.0]);
        let q = Polynomial::new(vec![0.0, 0.0, 1.0]);
        let u = u_from_map(cfg.x(), &p, &q);
        let closed = compute_u_n2_closed_form(&cfg, Sign::Minus).unwrap();
        for (a, b) in u.iter().zip(&closed) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn richardson_at_the_double_pole() {
        let cfg = Configuration::new(vec![-3.0, 0.0, 1.0, 2.0]).unwrap();
        let sols = solve_all(&cfg, &SolveOptions::default()).unwrap();
        let rainbow = &sols[1];
        let u = compute_u_richardson(&cfg, rainbow).unwrap();
        let closed = compute_u_n2_closed_form(&cfg, Sign::Minus).unwrap();
        for (a, b) in u.iter().zip(&closed) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn residual_examples() {
        let x = [-1.0, 1.0];
        assert_eq!(nv_residual(&x, &[3.0, -3.0]), vec![0.0, 0.0]);
        assert_eq!(nv_residual(&x, &[0.0, 0.0]), vec![-1.5, -1.5]);
        assert_eq!(cwi_residual(&x, &[3.0, -3.0]), [0.0, 0.0, 0.0]);
        let x4 = [-3.0, 0.0, 1.0, 2.0];
        assert_eq!(cwi_residual(&x4, &[0.0; 4]), [0.0, 12.0, 0.0]);
        for sign in [Sign::Plus, Sign::Minus] {
            let cfg = Configuration::new(x4.to_vec()).unwrap();
            let u = compute_u_n2_closed_form(&cfg, sign).unwrap();
            assert!(nv_residual(&x4, &u).iter().all(|r| r.abs() < 1e-9));
            assert!(cwi_residual(&x4, &u).iter().all(|r| r.abs() < 1e-9));
        }
    }

    #[test]
    fn z_examples() {
        let cfg = Configuration::new(vec![-1.0, 1.0]).unwrap();
        assert!((compute_z(&cfg, &[c(0.0, 0.0)]).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(z_homogeneity(1), -6.0);
        assert_eq!(z_homogeneity(2), -12.0);

        let cfg = Configuration::new(vec![-3.0, 0.0, 1.0, 2.0]).unwrap();
        let plus = poles_n2_closed_form(&cfg, Sign::Plus).unwrap();
        let z = compute_z(&cfg, &plus.zeta).unwrap();
        // (3*4*5*1*2*1)^2 * (2 sqrt(7/3))^8 / prod |x - zeta|^4, evaluated independently
        let s = (7.0f64 / 3.0).sqrt();
        let mut expected = (3.0f64 * 4.0 * 5.0 * 1.0 * 2.0 * 1.0).powi(2) * (2.0 * s).powi(8);
        for xk in [-3.0, 0.0, 1.0, 2.0] {
            expected /= ((xk - s) * (xk + s)).powi(4);
        }
        assert!((z / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn z_scaling() {
        let cfg = Configuration::new(vec![-3.0, 0.0, 1.0, 2.0]).unwrap();
        let r = 1.7;
        let scaled = cfg.scaled(r).unwrap();
        let a = poles_n2_closed_form(&cfg, Sign::Plus).unwrap();
        let b = poles_n2_closed_form(&scaled, Sign::Plus).unwrap();
        let la = compute_log_z(&cfg, &a.zeta).unwrap();
        let lb = compute_log_z(&scaled, &b.zeta).unwrap();
        assert!((lb - la - z_homogeneity(2) * r.ln()).abs() < 1e-10);
    }

    #[test]
    fn f0_and_cross_ratio() {
        assert_eq!(cross_ratio(&[-3.0, 0.0, 1.0, 2.0]), 3.0 / 8.0);
        assert!((f0(0.0) - 1.0 / 16.0).abs() < 1e-15);
    }
}
