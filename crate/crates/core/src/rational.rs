//! Real rational maps `R = P/Q` in canonical form and configurations of
//! critical points.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{is_conjugation_closed, sort_points, ComplexPoint, Polynomial, CLUSTER_RADIUS};

/// Pole/critical distance below which a map is treated as non-generic.
pub const GENERIC_EPS: f64 = 1e-6;
/// Tolerance on the stationary residual accepted by [`build_from_poles`].
pub const STATIONARY_TOL: f64 = 1e-8;

/// Sorted, strictly increasing critical points `x_1 < .. < x_{2n}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Configuration {
    x: Vec<f64>,
}

impl Configuration {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() || !x.len().is_multiple_of(2) {
            return Err(Error::InvalidInput(
                "x must have a positive even number of entries".to_string(),
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("x must be finite".to_string()));
        }
        if x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "x must be strictly increasing".to_string(),
            ));
        }
        Ok(Configuration { x })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Number of curves, i.e. half the number of critical points.
    pub fn n(&self) -> usize {
        self.x.len() / 2
    }

    pub fn mean(&self) -> f64 {
        self.x.iter().sum::<f64>() / self.x.len() as f64
    }

    pub fn diameter(&self) -> f64 {
        self.x[self.x.len() - 1] - self.x[0]
    }

    pub fn min_gap(&self) -> f64 {
        self.x
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn translated(&self, h: f64) -> Result<Self> {
        Self::new(self.x.iter().map(|v| v + h).collect())
    }

    pub fn scaled(&self, r: f64) -> Result<Self> {
        if r <= 0.0 {
            return Err(Error::InvalidInput(
                "scale factor must be positive".to_string(),
            ));
        }
        Self::new(self.x.iter().map(|v| v * r).collect())
    }

    /// Moves `x_j` by `h`.
    pub fn perturbed(&self, j: usize, h: f64) -> Result<Self> {
        let mut x = self.x.clone();
        x[j] += h;
        Self::new(x)
    }

    /// `prod (z - x_j)`
    pub fn critical_polynomial(&self) -> Polynomial {
        let roots: Vec<Complex64> = self.x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Polynomial::from_roots_real_part(&roots)
    }
}

impl<'de> Deserialize<'de> for Configuration {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            x: Vec<f64>,
        }
        let raw = Raw::deserialize(d)?;
        Configuration::new(raw.x).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genericity {
    pub generic: bool,
    /// Smallest pole/critical distance.
    pub min_distance: f64,
    /// No two poles within the clustering radius.
    pub all_simple: bool,
}

pub fn genericity(criticals: &[f64], poles: &[ComplexPoint]) -> Genericity {
    let min_distance = criticals
        .iter()
        .flat_map(|&x| poles.iter().map(move |z| (z - x).norm()))
        .fold(f64::INFINITY, f64::min);
    let all_simple = poles.iter().enumerate().all(|(i, a)| {
        poles[i + 1..]
            .iter()
            .all(|b| (a - b).norm() > CLUSTER_RADIUS)
    });
    Genericity {
        generic: min_distance > GENERIC_EPS,
        min_distance,
        all_simple,
    }
}

/// A real rational map. Unless pole-deficient, `Q` is monic of degree `n`,
/// `P` is monic of degree `n + 1` and `R(z) = z + o(1)` at infinity, so that
/// `R' = prod (z - x_j) / prod (z - zeta_k)^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalMap {
    p: Polynomial,
    q: Polynomial,
    criticals: Vec<f64>,
    poles: Vec<ComplexPoint>,
    pole_deficient: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RationalMapJson {
    #[serde(rename = "P")]
    p: Vec<f64>,
    #[serde(rename = "Q")]
    q: Vec<f64>,
}

impl Serialize for RationalMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RationalMapJson {
            p: self.p.coeffs().to_vec(),
            q: self.q.coeffs().to_vec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RationalMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RationalMapJson::deserialize(d)?;
        RationalMap::new(Polynomial::new(raw.p), Polynomial::new(raw.q))
            .map_err(serde::de::Error::custom)
    }
}

impl RationalMap {
    /// Canonicalizes `P/Q` and reads the critical points off the Wronskian.
    /// A constant `Q` yields a pole-deficient (polynomial) map.
    pub fn new(p: Polynomial, q: Polynomial) -> Result<Self> {
        if q.is_zero() {
            return Err(Error::InvalidInput("Q must be nonzero".to_string()));
        }
        if q.degree() == 0 {
            let p = p.scale(1.0 / q.leading());
            return Self::polynomial(p);
        }
        let (p, q) = canonicalize(&p, &q);
        if p.degree() != q.degree() + 1 {
            return Err(Error::InvalidInput(format!(
                "expected deg P = deg Q + 1, got {} and {}",
                p.degree(),
                q.degree()
            )));
        }
        let criticals = real_distinct_roots(&wronskian(&p, &q))?;
        Self::from_parts(p, q, criticals)
    }

    /// Polynomial map `P` (so `Q = 1`), admitted for locus tracing only.
    pub fn polynomial(p: Polynomial) -> Result<Self> {
        if p.degree() < 2 {
            return Err(Error::InvalidInput(
                "polynomial map needs degree at least 2".to_string(),
            ));
        }
        let criticals = real_distinct_roots(&p.derivative())?;
        Ok(RationalMap {
            p,
            q: Polynomial::constant(1.0),
            criticals,
            poles: Vec::new(),
            pole_deficient: true,
        })
    }

    /// Trusted constructor: `P/Q` already canonical with the given criticals.
    pub(crate) fn from_parts(p: Polynomial, q: Polynomial, criticals: Vec<f64>) -> Result<Self> {
        let poles = q.roots()?;
        Ok(RationalMap {
            p,
            q,
            criticals,
            poles,
            pole_deficient: false,
        })
    }

    /// Canonical map from solver coefficients, with critical points known.
    pub(crate) fn from_solver(p: &Polynomial, q: &Polynomial, criticals: &[f64]) -> Result<Self> {
        let (p, q) = canonicalize(p, q);
        Self::from_parts(p, q, criticals.to_vec())
    }

    pub fn p(&self) -> &Polynomial {
        &self.p
    }

    pub fn q(&self) -> &Polynomial {
        &self.q
    }

    /// Number of poles counted with multiplicity.
    pub fn n(&self) -> usize {
        self.q.degree()
    }

    pub fn criticals(&self) -> &[f64] {
        &self.criticals
    }

    pub fn poles(&self) -> &[ComplexPoint] {
        &self.poles
    }

    pub fn is_pole_deficient(&self) -> bool {
        self.pole_deficient
    }

    pub fn eval(&self, z: ComplexPoint) -> ComplexPoint {
        self.p.eval(z) / self.q.eval(z)
    }

    /// `R'(z) = W(z) / Q(z)^2`
    pub fn derivative_at(&self, z: ComplexPoint) -> ComplexPoint {
        let q = self.q.eval(z);
        self.wronskian().eval(z) / (q * q)
    }

    pub fn wronskian(&self) -> Polynomial {
        wronskian(&self.p, &self.q)
    }

    pub fn genericity(&self) -> Genericity {
        genericity(&self.criticals, &self.poles)
    }

    /// Diameter of the critical set, used as the length scale.
    pub fn length_scale(&self) -> f64 {
        let d = self.criticals[self.criticals.len() - 1] - self.criticals[0];
        if d > 0.0 {
            d
        } else {
            1.0
        }
    }

    /// `h(x, y) = Im(P(z) conj(Q(z)))`, vanishing exactly on the real locus.
    pub fn locus(&self, x: f64, y: f64) -> f64 {
        let z = Complex64::new(x, y);
        (self.p.eval(z) * self.q.eval(z).conj()).im
    }

    /// `(h, dh/dx, dh/dy)`
    pub fn locus_with_gradient(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let z = Complex64::new(x, y);
        let p = self.p.eval(z);
        let q = self.q.eval(z);
        let dp = self.p.derivative().eval(z);
        let dq = self.q.derivative().eval(z);
        let f = p * q.conj();
        let fx = dp * q.conj() + p * dq.conj();
        let i = Complex64::new(0.0, 1.0);
        let fy = i * dp * q.conj() - i * p * dq.conj();
        (f.im, fx.im, fy.im)
    }

    /// Magnitude proxy `|P(z)| |Q(z)|` for relative locus residuals.
    pub fn locus_scale(&self, z: ComplexPoint) -> f64 {
        self.p.eval(z).norm() * self.q.eval(z).norm()
    }

    /// Same equivalence class: equal critical points and pole multisets.
    pub fn same_class(&self, other: &RationalMap, tol: f64) -> bool {
        if self.criticals.len() != other.criticals.len() || self.poles.len() != other.poles.len() {
            return false;
        }
        let crit = self
            .criticals
            .iter()
            .zip(&other.criticals)
            .all(|(a, b)| (a - b).abs() <= tol);
        crit && same_multiset(&self.poles, &other.poles, tol)
    }
}

/// True when the two multisets match point by point within `tol`.
pub fn same_multiset(a: &[ComplexPoint], b: &[ComplexPoint], tol: f64) -> bool {
    multiset_distance(a, b) <= tol
}

/// Largest distance between matched points of two multisets of equal size,
/// matching greedily by nearest neighbour.
pub fn multiset_distance(a: &[ComplexPoint], b: &[ComplexPoint]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for u in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, v)| (j, (u - v).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// `P'Q - PQ'`
pub fn wronskian(p: &Polynomial, q: &Polynomial) -> Polynomial {
    &(&p.derivative() * q) - &(p * &q.derivative())
}

/// Makes `Q` and `P` monic and fixes the additive constant by
/// `R(z) = z + o(1)`.
fn canonicalize(p: &Polynomial, q: &Polynomial) -> (Polynomial, Polynomial) {
    let q_lead = q.leading();
    let q = q.scale(1.0 / q_lead);
    let p = p.scale(1.0 / q_lead);
    let p = p.scale(1.0 / p.leading());
    let n = q.degree();
    if p.degree() != n + 1 {
        return (p, q);
    }
    let c = p.coeff(n) - q.coeff(n - 1);
    let mut coeffs = p.coeffs().to_vec();
    for (k, qk) in q.coeffs().iter().enumerate() {
        coeffs[k] -= c * qk;
    }
    coeffs[n + 1] = 1.0;
    (Polynomial::new(coeffs), q)
}

fn real_distinct_roots(w: &Polynomial) -> Result<Vec<f64>> {
    let roots = w.roots()?;
    let scale = roots.iter().fold(1.0f64, |m, r| m.max(r.norm()));
    if roots.iter().any(|r| r.im.abs() > 1e-8 * scale) {
        return Err(Error::InvalidInput(
            "critical points must be real".to_string(),
        ));
    }
    let mut xs: Vec<f64> = roots.iter().map(|r| r.re).collect();
    xs.sort_by(f64::total_cmp);
    if xs.windows(2).any(|w| w[1] - w[0] <= CLUSTER_RADIUS) {
        return Err(Error::InvalidInput(
            "critical points must be distinct".to_string(),
        ));
    }
    Ok(xs)
}

/// Stationary residuals `F_k = sum_j 1/(zeta_k - x_j) - sum_{l != k} 2/(zeta_k - zeta_l)`.
pub fn stationary_residual(
    cfg: &Configuration,
    zeta: &[ComplexPoint],
) -> Result<Vec<ComplexPoint>> {
    let x = cfg.x();
    let mut min_d = f64::INFINITY;
    for (k, zk) in zeta.iter().enumerate() {
        for &xj in x {
            min_d = min_d.min((zk - xj).norm());
        }
        for zl in &zeta[k + 1..] {
            min_d = min_d.min((zk - zl).norm());
        }
    }
    if min_d < 1e-10 {
        return Err(Error::CoincidentPoints { distance: min_d });
    }
    Ok(zeta
        .iter()
        .enumerate()
        .map(|(k, &zk)| {
            let a: Complex64 = x.iter().map(|&xj| (zk - xj).inv()).sum();
            let b: Complex64 = zeta
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != k)
                .map(|(_, &zl)| 2.0 * (zk - zl).inv())
                .sum();
            a - b
        })
        .collect())
}

pub fn max_norm(v: &[ComplexPoint]) -> f64 {
    v.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Residues `A_k = prod_j (zeta_k - x_j) / prod_{l != k} (zeta_k - zeta_l)^2`
/// of `R(z) = z - sum A_k / (z - zeta_k)`.
pub fn residue_coefficients(x: &[f64], zeta: &[ComplexPoint]) -> Vec<ComplexPoint> {
    zeta.iter()
        .enumerate()
        .map(|(k, &zk)| {
            let num: Complex64 = x.iter().map(|&xj| zk - xj).product();
            let den: Complex64 = zeta
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != k)
                .map(|(_, &zl)| (zk - zl) * (zk - zl))
                .product();
            num / den
        })
        .collect()
}

/// Builds the canonical map `R(z) = z - sum A_k / (z - zeta_k)` from a
/// generic stationary pole set.
pub fn build_from_poles(cfg: &Configuration, poles: &[ComplexPoint]) -> Result<RationalMap> {
    if poles.len() != cfg.n() {
        return Err(Error::InvalidInput(format!(
            "expected {} poles, got {}",
            cfg.n(),
            poles.len()
        )));
    }
    let g = genericity(cfg.x(), poles);
    if !g.generic {
        return Err(Error::NonGeneric {
            distance: g.min_distance,
        });
    }
    let residual = max_norm(&stationary_residual(cfg, poles)?);
    if residual >= STATIONARY_TOL {
        return Err(Error::StationaryViolated { residual });
    }
    if !is_conjugation_closed(poles, 1e-9) {
        return Err(Error::NonRealCoefficients);
    }
    let a = residue_coefficients(cfg.x(), poles);
    let q_c = crate::poly::complex_coeffs_from_roots(poles);
    // P = z Q - sum_k A_k prod_{l != k} (z - zeta_l)
    let n = poles.len();
    let mut p_c = vec![Complex64::new(0.0, 0.0); n + 2];
    for (k, &qk) in q_c.iter().enumerate() {
        p_c[k + 1] += qk;
    }
    for (k, &ak) in a.iter().enumerate() {
        let others: Vec<Complex64> = poles
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != k)
            .map(|(_, &z)| z)
            .collect();
        for (i, c) in crate::poly::complex_coeffs_from_roots(&others)
            .iter()
            .enumerate()
        {
            p_c[i] -= ak * c;
        }
    }
    let p = Polynomial::new(p_c.iter().map(|c| c.re).collect());
    let q = Polynomial::new(q_c.iter().map(|c| c.re).collect());
    let mut map = RationalMap::from_parts(p, q, cfg.x().to_vec())?;
    map.poles = poles.to_vec();
    sort_points(&mut map.poles);
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn table_cfg() -> Configuration {
        Configuration::new(vec![-3.0, 0.0, 1.0, 2.0]).unwrap()
    }

    #[test]
    fn configuration_validation() {
        assert!(Configuration::new(vec![1.0, 1.0]).is_err());
        assert!(Configuration::new(vec![2.0, 1.0]).is_err());
        assert!(Configuration::new(vec![1.0, 2.0, 3.0]).is_err());
        let err = Configuration::new(vec![1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("x must be strictly increasing"));
    }

    #[test]
    fn circle_from_poles() {
        let cfg = Configuration::new(vec![-1.0, 1.0]).unwrap();
        let r = build_from_poles(&cfg, &[c(0.0, 0.0)]).unwrap();
        assert_eq!(r.p().coeffs(), &[1.0, 0.0, 1.0]);
        assert_eq!(r.q().coeffs(), &[0.0, 1.0]);
    }

    #[test]
    fn neighbor_from_poles_matches_printed_map() {
        let s = (7.0f64 / 3.0).sqrt();
        let r = build_from_poles(&table_cfg(), &[c(-s, 0.0), c(s, 0.0)]).unwrap();
        let printed = RationalMap::new(
            Polynomial::new(vec![-3.0, 0.0, 0.0, 1.0]),
            Polynomial::new(vec![-7.0, 0.0, 3.0]),
        )
        .unwrap();
        assert!(r.same_class(&printed, 1e-9));
        for (a, b) in r.p().coeffs().iter().zip(printed.p().coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn translated_circle() {
        let h = 0.37;
        let cfg = Configuration::new(vec![-1.0 + h, 1.0 + h]).unwrap();
        let r = build_from_poles(&cfg, &[c(h, 0.0)]).unwrap();
        for z in [c(0.3, 0.7), c(-2.0, 1.5)] {
            let w = z - h;
            let expected = w + w.inv();
            let diff = r.eval(z) - expected;
            // equal up to a real additive constant
            assert!(diff.im.abs() < 1e-12);
            let diff2 = r.eval(c(5.0, 1.0)) - ((c(5.0, 1.0) - h) + (c(5.0, 1.0) - h).inv());
            assert!((diff - diff2).norm() < 1e-12);
        }
    }

    #[test]
    fn build_rejects_bad_input() {
        let cfg = Configuration::new(vec![-1.0, 1.0]).unwrap();
        assert!(matches!(
            build_from_poles(&cfg, &[c(0.5, 0.0)]),
            Err(Error::StationaryViolated { .. })
        ));
        assert!(matches!(
            build_from_poles(&cfg, &[c(1.0, 0.0)]),
            Err(Error::NonGeneric { .. })
        ));
    }

    #[test]
    fn wronskian_examples() {
        let circle = RationalMap::new(
            Polynomial::new(vec![1.0, 0.0, 1.0]),
            Polynomial::new(vec![0.0, 1.0]),
        )
        .unwrap();
        assert_eq!(circle.wronskian().coeffs(), &[-1.0, 0.0, 1.0]);
        assert_eq!(circle.criticals(), &[-1.0, 1.0]);

        let neighbor = RationalMap::new(
            Polynomial::new(vec![-3.0, 0.0, 0.0, 1.0]),
            Polynomial::new(vec![-7.0, 0.0, 3.0]),
        )
        .unwrap();
        let w = neighbor.wronskian();
        let target = table_cfg().critical_polynomial();
        for k in 0..=4 {
            assert!((w.coeff(k) - target.coeff(k)).abs() < 1e-12);
        }
        for (a, b) in neighbor.criticals().iter().zip([-3.0, 0.0, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-10);
        }

        let cubic = RationalMap::polynomial(Polynomial::new(vec![0.0, -3.0, 0.0, 1.0])).unwrap();
        assert_eq!(cubic.wronskian().coeffs(), &[-3.0, 0.0, 3.0]);
        assert!(cubic.is_pole_deficient());
    }

    #[test]
    fn genericity_examples() {
        let g = genericity(&[-1.0, 1.0], &[c(0.0, 0.0)]);
        assert!(g.generic && g.all_simple);
        assert_eq!(g.min_distance, 1.0);

        let g = genericity(&[-3.0, 0.0, 1.0, 2.0], &[c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(!g.generic && !g.all_simple);

        let g = genericity(&[-1.0, 1.0], &[c(1e-9, 0.0)]);
        assert!(g.generic);
        assert!((g.min_distance - (1.0 - 1e-9)).abs() < 1e-15);
    }

    #[test]
    fn locus_examples() {
        let circle = RationalMap::new(
            Polynomial::new(vec![1.0, 0.0, 1.0]),
            Polynomial::new(vec![0.0, 1.0]),
        )
        .unwrap();
        assert!(circle.locus(0.6, 0.8).abs() < 1e-12);
        assert_eq!(circle.locus(0.3, 0.0), 0.0);
        let cubic = RationalMap::polynomial(Polynomial::new(vec![0.0, -3.0, 0.0, 1.0])).unwrap();
        assert!(cubic.locus(2.0, 3.0).abs() < 1e-9);
    }

    #[test]
    fn locus_gradient_matches_finite_differences() {
        let r = RationalMap::new(
            Polynomial::new(vec![-3.0, 7.0, 0.0, 1.0]),
            Polynomial::new(vec![0.0, 0.0, 1.0]),
        )
        .unwrap();
        let (x, y, h) = (0.4, 0.9, 1e-6);
        let (_, hx, hy) = r.locus_with_gradient(x, y);
        let fx = (r.locus(x + h, y) - r.locus(x - h, y)) / (2.0 * h);
        let fy = (r.locus(x, y + h) - r.locus(x, y - h)) / (2.0 * h);
        assert!((hx - fx).abs() < 1e-6 * hx.abs().max(1.0));
        assert!((hy - fy).abs() < 1e-6 * hy.abs().max(1.0));
    }

    #[test]
    fn stationary_residual_examples() {
        let cfg = Configuration::new(vec![-1.0, 1.0]).unwrap();
        assert_eq!(
            stationary_residual(&cfg, &[c(0.0, 0.0)]).unwrap(),
            vec![c(0.0, 0.0)]
        );
        let f = stationary_residual(&cfg, &[c(0.5, 0.0)]).unwrap();
        assert!((f[0] - c(-4.0 / 3.0, 0.0)).norm() < 1e-15);
        let s = (7.0f64 / 3.0).sqrt();
        let f = stationary_residual(&table_cfg(), &[c(-s, 0.0), c(s, 0.0)]).unwrap();
        assert!(max_norm(&f) < 1e-12);
        assert!(matches!(
            stationary_residual(&cfg, &[c(1.0, 0.0)]),
            Err(Error::CoincidentPoints { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let cfg = Configuration::new(vec![-1.0, 1.0]).unwrap();
        let r = build_from_poles(&cfg, &[c(0.0, 0.0)]).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"P":[1.0,0.0,1.0],"Q":[0.0,1.0]}"#);
        let back: RationalMap = serde_json::from_str(&s).unwrap();
        assert!(back.same_class(&r, 1e-12));
    }
}
