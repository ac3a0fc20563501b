//! Dense real polynomials in ascending coefficient order, with complex
//! evaluation and an Aberth-Ehrlich root finder.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trailing coefficients below this fraction of the largest one are trimmed.
const TRIM_REL: f64 = 1e-14;
/// Roots closer than this are reported as one multiple root.
pub const CLUSTER_RADIUS: f64 = 1e-7;
/// Pairing tolerance for conjugation-closed root sets.
const CONJ_TOL: f64 = 1e-12;
const ABERTH_MAX_ITER: usize = 800;

pub type ComplexPoint = Complex64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl From<Vec<f64>> for Polynomial {
    fn from(coeffs: Vec<f64>) -> Self {
        Polynomial::new(coeffs)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    /// Builds a polynomial from ascending coefficients, trimming negligible
    /// leading terms.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        while let Some(&last) = coeffs.last() {
            if coeffs.len() > 1 && last.abs() <= TRIM_REL * max {
                coeffs.pop();
            } else {
                break;
            }
        }
        if coeffs.is_empty() || max == 0.0 {
            coeffs = vec![0.0];
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// `z^k`
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Polynomial { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Coefficient of `z^k`, zero beyond the degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, z: ComplexPoint) -> ComplexPoint {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| k as f64 * c)
            .collect();
        Polynomial::new(coeffs)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn monic(&self) -> Polynomial {
        self.scale(1.0 / self.leading())
    }

    /// Monic real polynomial with the given roots.
    ///
    /// Fails with [`Error::NonRealCoefficients`] unless the roots pair up
    /// under conjugation.
    pub fn from_roots(roots: &[ComplexPoint]) -> Result<Polynomial> {
        if !is_conjugation_closed(roots, CONJ_TOL) {
            return Err(Error::NonRealCoefficients);
        }
        Ok(Polynomial::from_roots_real_part(roots))
    }

    /// Expands `prod (z - r)` and keeps the real part of each coefficient.
    /// Callers are responsible for conjugate symmetry.
    pub(crate) fn from_roots_real_part(roots: &[ComplexPoint]) -> Polynomial {
        let c = complex_coeffs_from_roots(roots);
        Polynomial::new(c.iter().map(|z| z.re).collect())
    }

    /// All complex roots with multiplicity. Clustered roots are returned as
    /// repeated copies of the cluster mean.
    pub fn roots(&self) -> Result<Vec<ComplexPoint>> {
        if self.degree() == 0 {
            return Err(Error::DegreeZero);
        }
        Ok(find_roots(&self.coeffs))
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..len).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..len).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::new(mul_coeffs(&self.coeffs, &rhs.coeffs))
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

pub(crate) fn mul_coeffs(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![0.0];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

pub(crate) fn complex_coeffs_from_roots(roots: &[ComplexPoint]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (k, &ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= ck * r;
        }
        c = next;
    }
    c
}

/// True when every root has a conjugate partner (real roots pair with
/// themselves) within `tol * max(1, |root|)`.
pub fn is_conjugation_closed(roots: &[ComplexPoint], tol: f64) -> bool {
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let z = roots[i];
        let scale = tol * z.norm().max(1.0);
        if z.im.abs() <= scale {
            used[i] = true;
            continue;
        }
        let partner = (0..roots.len())
            .filter(|&j| j != i && !used[j])
            .min_by(|&a, &b| {
                let da = (roots[a] - z.conj()).norm();
                let db = (roots[b] - z.conj()).norm();
                da.total_cmp(&db)
            });
        match partner {
            Some(j) if (roots[j] - z.conj()).norm() <= scale => {
                used[i] = true;
                used[j] = true;
            }
            _ => return false,
        }
    }
    true
}

/// Sorts points by real part, then imaginary part.
pub fn sort_points(points: &mut [ComplexPoint]) {
    points.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

fn eval_with_derivative(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn find_roots(coeffs: &[f64]) -> Vec<Complex64> {
    // Exact zero roots first; they would otherwise slow Aberth down.
    let zeros = coeffs.iter().take_while(|&&c| c == 0.0).count();
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    let lead = *coeffs.last().unwrap();
    let rest: Vec<f64> = coeffs[zeros..].iter().map(|c| c / lead).collect();
    let deg = rest.len() - 1;
    match deg {
        0 => {}
        1 => roots.push(Complex64::new(-rest[0], 0.0)),
        _ => roots.extend(aberth(&rest)),
    }
    let mut roots = cluster(roots);
    symmetrize(&mut roots);
    sort_points(&mut roots);
    roots
}

fn aberth(monic: &[f64]) -> Vec<Complex64> {
    let deg = monic.len() - 1;
    // Fujiwara-style radius for the starting circle.
    let radius = (1..=deg)
        .map(|k| monic[deg - k].abs().powf(1.0 / k as f64))
        .fold(0.0f64, f64::max)
        .max(1e-3);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / deg as f64 + 0.4;
            Complex64::from_polar(radius, theta)
        })
        .collect();
    let mut done = vec![false; deg];
    for _ in 0..ABERTH_MAX_ITER {
        let mut all_done = true;
        for i in 0..deg {
            if done[i] {
                continue;
            }
            let (p, dp) = eval_with_derivative(monic, z[i]);
            if p == Complex64::new(0.0, 0.0) {
                done[i] = true;
                continue;
            }
            let ratio = p / dp;
            let sum: Complex64 = (0..deg)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = z[i] - z[j];
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let w = ratio / (Complex64::new(1.0, 0.0) - ratio * sum);
            if !w.is_finite() {
                continue;
            }
            z[i] -= w;
            if w.norm() <= 4.0 * f64::EPSILON * z[i].norm().max(1e-300) {
                done[i] = true;
            } else {
                all_done = false;
            }
        }
        if all_done {
            break;
        }
    }
    polish(monic, &mut z);
    z
}

/// Newton steps on isolated roots, kept only when they reduce |p|.
fn polish(coeffs: &[f64], roots: &mut [Complex64]) {
    let isolated: Vec<bool> = (0..roots.len())
        .map(|i| {
            (0..roots.len())
                .filter(|&j| j != i)
                .all(|j| (roots[i] - roots[j]).norm() > CLUSTER_RADIUS)
        })
        .collect();
    for (r, iso) in roots.iter_mut().zip(isolated) {
        if !iso {
            continue;
        }
        for _ in 0..3 {
            let (p, dp) = eval_with_derivative(coeffs, *r);
            if dp.norm() == 0.0 {
                break;
            }
            let cand = *r - p / dp;
            let (pc, _) = eval_with_derivative(coeffs, cand);
            if pc.norm() < p.norm() {
                *r = cand;
            } else {
                break;
            }
        }
    }
}

/// Replaces clusters of nearby roots by copies of their mean.
fn cluster(roots: Vec<Complex64>) -> Vec<Complex64> {
    let n = roots.len();
    let mut group: Vec<usize> = (0..n).collect();
    fn find(g: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while g[r] != r {
            r = g[r];
        }
        g[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (roots[i] - roots[j]).norm() <= CLUSTER_RADIUS {
                let (a, b) = (find(&mut group, i), find(&mut group, j));
                if a != b {
                    group[b] = a;
                }
            }
        }
    }
    let mut out = roots.clone();
    for (i, slot) in out.iter_mut().enumerate() {
        let gi = find(&mut group, i);
        let members: Vec<usize> = (0..n).filter(|&j| find(&mut group, j) == gi).collect();
        if members.len() > 1 {
            *slot = members.iter().map(|&j| roots[j]).sum::<Complex64>() / members.len() as f64;
        }
    }
    out
}

/// Makes a root set of a real polynomial exactly conjugation-closed.
fn symmetrize(roots: &mut [Complex64]) {
    let tol = 1e-6;
    let n = roots.len();
    let mut paired = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| roots[b].im.abs().total_cmp(&roots[a].im.abs()));
    for &i in &order {
        if paired[i] || roots[i].im <= 0.0 {
            continue;
        }
        let z = roots[i];
        let best = (0..n)
            .filter(|&j| j != i && !paired[j] && roots[j].im < 0.0)
            .min_by(|&a, &b| {
                (roots[a] - z.conj())
                    .norm()
                    .total_cmp(&(roots[b] - z.conj()).norm())
            });
        if let Some(j) = best {
            let d = (roots[j] - z.conj()).norm();
            if d <= tol * z.norm().max(1.0) && d < z.im {
                let mid = (z + roots[j].conj()) / 2.0;
                roots[i] = mid;
                roots[j] = mid.conj();
                paired[i] = true;
                paired[j] = true;
            }
        }
    }
    for i in 0..n {
        if !paired[i] && roots[i].im.abs() <= tol * roots[i].norm().max(1.0) {
            roots[i].im = 0.0;
        }
    }
}

/// Elementary symmetric functions e_1..e_m of the given values.
pub fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let mut e = vec![1.0];
    for &v in values {
        let mut next = vec![0.0; e.len() + 1];
        for (k, &ek) in e.iter().enumerate() {
            next[k] += ek;
            next[k + 1] += ek * v;
        }
        e = next;
    }
    e.remove(0);
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn residual_ok(p: &Polynomial, r: Complex64) -> bool {
        let bound = 1e-12 * p.max_abs_coeff() * r.norm().max(1.0).powi(p.degree() as i32);
        p.eval(r).norm() <= bound
    }

    #[test]
    fn eval_examples() {
        let p = Polynomial::new(vec![1.0, 0.0, 1.0]);
        assert_eq!(p.eval(c(0.0, 1.0)), c(0.0, 0.0));
        let cubic = Polynomial::new(vec![0.0, -3.0, 0.0, 1.0]);
        assert_eq!(cubic.eval(c(2.0, 0.0)), c(2.0, 0.0));
        assert_eq!(Polynomial::constant(1.0).eval(c(5.0, 5.0)), c(1.0, 0.0));
    }

    #[test]
    fn derivative_examples() {
        let p = Polynomial::new(vec![1.0, 0.0, 1.0]);
        assert_eq!(p.derivative().coeffs(), &[0.0, 2.0]);
        let cubic = Polynomial::new(vec![0.0, -3.0, 0.0, 1.0]);
        assert_eq!(cubic.derivative().coeffs(), &[-3.0, 0.0, 3.0]);
        assert!(Polynomial::constant(7.0).derivative().is_zero());
    }

    #[test]
    fn from_roots_examples() {
        let p = Polynomial::from_roots(&[c(-1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(p.coeffs(), &[-1.0, 0.0, 1.0]);
        let p = Polynomial::from_roots(&[c(0.0, 1.0), c(0.0, -1.0)]).unwrap();
        assert_eq!(p.coeffs(), &[1.0, 0.0, 1.0]);
        // (z+3) z (z-1)(z-2) expanded by hand: z^4 - 7 z^2 + 6 z
        let p =
            Polynomial::from_roots(&[c(-3.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        assert_eq!(p.coeffs(), &[0.0, 6.0, -7.0, 0.0, 1.0]);
    }

    #[test]
    fn from_roots_rejects_unpaired() {
        assert_eq!(
            Polynomial::from_roots(&[c(0.0, 1.0)]),
            Err(Error::NonRealCoefficients)
        );
        assert_eq!(
            Polynomial::from_roots(&[c(1.0, 1.0), c(1.0, -0.9)]),
            Err(Error::NonRealCoefficients)
        );
    }

    #[test]
    fn roots_examples() {
        let r = Polynomial::new(vec![-1.0, 0.0, 1.0]).roots().unwrap();
        assert!((r[0] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!((r[1] - c(1.0, 0.0)).norm() < 1e-14);

        let r = Polynomial::new(vec![1.0, 0.0, 1.0]).roots().unwrap();
        assert!((r[0] - c(0.0, -1.0)).norm() < 1e-14);
        assert!((r[1] - c(0.0, 1.0)).norm() < 1e-14);

        let p = Polynomial::new(vec![0.0, 6.0, -7.0, 0.0, 1.0]);
        let r = p.roots().unwrap();
        for (got, want) in r.iter().zip([-3.0, 0.0, 1.0, 2.0]) {
            assert!((got - c(want, 0.0)).norm() < 1e-12, "{got} vs {want}");
            assert!(residual_ok(&p, *got));
        }
    }

    #[test]
    fn roots_of_constant_fail() {
        assert_eq!(Polynomial::constant(3.0).roots(), Err(Error::DegreeZero));
    }

    #[test]
    fn double_root_is_clustered() {
        // z^2 (z - 1): the double root at 0 must come back as two copies.
        let p = Polynomial::new(vec![0.0, 0.0, -1.0, 1.0]);
        let r = p.roots().unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[0], r[1]);
        // (z - 0.5)^2 (z^2 + 1): not exactly representable zeros
        let q = &Polynomial::new(vec![0.25, -1.0, 1.0]) * &Polynomial::new(vec![1.0, 0.0, 1.0]);
        let r = q.roots().unwrap();
        let near_half: Vec<_> = r
            .iter()
            .filter(|z| (*z - c(0.5, 0.0)).norm() < 1e-6)
            .collect();
        assert_eq!(near_half.len(), 2);
        assert_eq!(near_half[0], near_half[1]);
        assert!((near_half[0] - c(0.5, 0.0)).norm() < 1e-7);
    }

    #[test]
    fn trailing_zero_trimming() {
        let p = Polynomial::new(vec![1.0, 2.0, 1e-17]);
        assert_eq!(p.degree(), 1);
        let p = Polynomial::new(vec![1.0, 2.0, 1e-10]);
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn elementary_symmetric_matches_expansion() {
        let e = elementary_symmetric(&[-3.0, 0.0, 1.0, 2.0]);
        assert_eq!(e, vec![0.0, -7.0, -6.0, 0.0]);
    }
}
