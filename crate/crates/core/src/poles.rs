//! Pole configurations of canonical maps with prescribed critical points.
//!
//! The stationary relation is solved in the coefficient space of `(P, Q)`:
//! `Q` is monic of degree `n`, `P` is monic of degree `n + 1` with vanishing
//! `z^n` coefficient, and the `2n` lower coefficients of `P'Q - PQ'` are
//! matched to `prod (z - x_j)`. Double poles are regular points of this
//! system, unlike in pole coordinates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::locus;
use crate::pattern::{catalan, LinkPattern};
use crate::poly::{mul_coeffs, sort_points, ComplexPoint, Polynomial};
use crate::rational::{
    genericity, max_norm, same_multiset, stationary_residual, Configuration, RationalMap,
};

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 100;
/// Pole multisets closer than this are the same solution.
pub const DEDUP_TOL: f64 = 1e-6;
const CHUNK: usize = 16;

/// A conjugation-closed multiset of poles.
///
/// `residual` is the stationary residual `max |F_k|` for generic sets; for
/// non-generic sets, where that form is undefined, it is the relative
/// coefficient residual of the Wronskian system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleSet {
    pub zeta: Vec<ComplexPoint>,
    pub residual: f64,
    pub generic: bool,
}

/// A solved configuration: poles, the canonical map and its link pattern.
#[derive(Clone, Debug)]
pub struct Solution {
    pub poles: PoleSet,
    pub pattern: LinkPattern,
    pub map: RationalMap,
    /// Solver coefficients, usable as a warm start at nearby configurations.
    pub coeffs: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub seed: u64,
    /// Random starts tried after the pattern seeds.
    pub budget: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            seed: 0,
            budget: 400,
        }
    }
}

/// The polynomial system `W(P, Q) = prod (z - x_j)` in coefficient space.
#[derive(Clone, Debug)]
pub struct WronskianSystem {
    n: usize,
    target: Vec<f64>,
    scale: f64,
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub coeffs: Vec<f64>,
    /// Max coefficient residual relative to the target's largest coefficient.
    pub residual: f64,
    pub iterations: usize,
}

fn deriv(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, v)| k as f64 * v)
        .collect()
}

fn sub_into(a: &mut Vec<f64>, b: &[f64]) {
    if a.len() < b.len() {
        a.resize(b.len(), 0.0);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x -= y;
    }
}

impl WronskianSystem {
    pub fn new(cfg: &Configuration) -> Self {
        Self::from_criticals(cfg.x())
    }

    pub fn from_criticals(x: &[f64]) -> Self {
        let roots: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let target = Polynomial::from_roots_real_part(&roots).coeffs().to_vec();
        let scale = target.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        WronskianSystem {
            n: x.len() / 2,
            target,
            scale,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Full ascending coefficients of `P` and `Q`.
    pub fn split(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut q = v[..n].to_vec();
        q.push(1.0);
        let mut p = v[n..].to_vec();
        p.push(0.0);
        p.push(1.0);
        (p, q)
    }

    pub fn polys(&self, v: &[f64]) -> (Polynomial, Polynomial) {
        let (p, q) = self.split(v);
        (Polynomial::new(p), Polynomial::new(q))
    }

    fn wronskian_coeffs(p: &[f64], q: &[f64]) -> Vec<f64> {
        let mut w = mul_coeffs(&deriv(p), q);
        sub_into(&mut w, &mul_coeffs(p, &deriv(q)));
        w
    }

    pub fn residual(&self, v: &[f64]) -> Vec<f64> {
        let (p, q) = self.split(v);
        let w = Self::wronskian_coeffs(&p, &q);
        (0..2 * self.n)
            .map(|i| w.get(i).copied().unwrap_or(0.0) - self.target[i])
            .collect()
    }

    pub fn relative_residual(&self, v: &[f64]) -> f64 {
        self.residual(v).iter().fold(0.0f64, |m, r| m.max(r.abs())) / self.scale
    }

    pub fn jacobian(&self, v: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let (p, q) = self.split(v);
        let dp = deriv(&p);
        let dq = deriv(&q);
        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            // dQ = z^i: dW = P' z^i - P (z^i)'
            let mut col = vec![0.0; 2 * n + 2];
            for (k, &c) in dp.iter().enumerate() {
                col[k + i] += c;
            }
            if i > 0 {
                for (k, &c) in p.iter().enumerate() {
                    col[k + i - 1] -= i as f64 * c;
                }
            }
            for r in 0..2 * n {
                jac[(r, i)] = col[r];
            }
            // dP = z^i: dW = (z^i)' Q - z^i Q'
            let mut col = vec![0.0; 2 * n + 2];
            if i > 0 {
                for (k, &c) in q.iter().enumerate() {
                    col[k + i - 1] += i as f64 * c;
                }
            }
            for (k, &c) in dq.iter().enumerate() {
                col[k + i] -= c;
            }
            for r in 0..2 * n {
                jac[(r, n + i)] = col[r];
            }
        }
        jac
    }

    /// Damped Newton from `v0`. Returns `None` when the iteration fails to
    /// reach the tolerance.
    pub fn newton(&self, v0: &[f64]) -> Option<NewtonOutcome> {
        let mut v = v0.to_vec();
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut r = self.residual(&v);
        let mut rn = norm(&r);
        for it in 0..NEWTON_MAX_ITER {
            if rn <= NEWTON_TOL * self.scale {
                self.polish(&mut v, &mut rn);
                return Some(NewtonOutcome {
                    coeffs: v,
                    residual: rn / self.scale,
                    iterations: it,
                });
            }
            let jac = self.jacobian(&v);
            let rhs = DVector::from_iterator(r.len(), r.iter().map(|x| -x));
            let step = jac.lu().solve(&rhs)?;
            if step.iter().any(|s| !s.is_finite()) {
                return None;
            }
            let mut lambda = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let cand: Vec<f64> = v
                    .iter()
                    .zip(step.iter())
                    .map(|(a, b)| a + lambda * b)
                    .collect();
                let rc = self.residual(&cand);
                let rcn = norm(&rc);
                if rcn.is_finite() && rcn < rn {
                    v = cand;
                    r = rc;
                    rn = rcn;
                    improved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !improved {
                break;
            }
            if v.iter().any(|c| c.abs() > 1e12 * self.scale) {
                return None;
            }
        }
        // Stagnation at round-off level still counts as converged.
        (rn <= 1e3 * NEWTON_TOL * self.scale).then(|| NewtonOutcome {
            coeffs: v,
            residual: rn / self.scale,
            iterations: NEWTON_MAX_ITER,
        })
    }

    /// Extra full Newton steps past the tolerance, kept while the residual
    /// does not grow. Drives near-double poles into the clustering radius.
    fn polish(&self, v: &mut Vec<f64>, rn: &mut f64) {
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for _ in 0..3 {
            let r = self.residual(v);
            let rhs = DVector::from_iterator(r.len(), r.iter().map(|x| -x));
            let Some(step) = self.jacobian(v).lu().solve(&rhs) else {
                return;
            };
            let cand: Vec<f64> = v.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rc = norm(&self.residual(&cand));
            if rc <= *rn {
                *v = cand;
                *rn = rc;
            } else {
                return;
            }
        }
    }

    /// Coefficients with `Q` fixed by `poles` and `P` fitted by least squares.
    pub fn seed_from_poles(&self, poles: &[ComplexPoint]) -> Vec<f64> {
        let n = self.n;
        let q = Polynomial::from_roots_real_part(poles);
        let mut v: Vec<f64> = (0..n).map(|k| q.coeff(k)).collect();
        v.extend(std::iter::repeat_n(0.0, n));
        let jac = self.jacobian(&v);
        let p_cols = jac.columns(n, n).into_owned();
        let r = self.residual(&v);
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|x| -x));
        if let Ok(p) = p_cols.svd(true, true).solve(&rhs, 1e-14) {
            for i in 0..n {
                v[n + i] = p[i];
            }
        }
        v
    }

    /// Poles and canonical map for converged coefficients.
    pub fn map(&self, v: &[f64], criticals: &[f64]) -> Result<RationalMap> {
        let (p, q) = self.polys(v);
        RationalMap::from_solver(&p, &q, criticals)
    }
}

/// Complex Newton on the stationary relation, used to polish generic
/// solutions. Only accepted when it lowers the residual.
fn polish_poles(cfg: &Configuration, zeta: &mut [ComplexPoint]) {
    let x = cfg.x();
    let n = zeta.len();
    let Ok(f0) = stationary_residual(cfg, zeta) else {
        return;
    };
    let mut best = max_norm(&f0);
    for _ in 0..4 {
        let f = match stationary_residual(cfg, zeta) {
            Ok(f) => f,
            Err(_) => return,
        };
        let mut jac = DMatrix::<Complex64>::zeros(n, n);
        for k in 0..n {
            let mut diag: Complex64 = x.iter().map(|&xj| -(zeta[k] - xj).powi(-2)).sum();
            for l in 0..n {
                if l != k {
                    let d2 = (zeta[k] - zeta[l]).powi(-2);
                    diag += 2.0 * d2;
                    jac[(k, l)] = -2.0 * d2;
                }
            }
            jac[(k, k)] = diag;
        }
        let rhs = DVector::from_iterator(n, f.iter().map(|v| -v));
        let Some(step) = jac.lu().solve(&rhs) else {
            return;
        };
        let cand: Vec<Complex64> = zeta.iter().zip(step.iter()).map(|(z, s)| z + s).collect();
        if step.iter().any(|s| s.norm() > 1e-6 * cfg.diameter()) {
            return;
        }
        let Ok(fc) = stationary_residual(cfg, &cand) else {
            return;
        };
        let rc = max_norm(&fc);
        if rc < best {
            best = rc;
            zeta.copy_from_slice(&cand);
        } else {
            return;
        }
    }
}

/// Makes a pole multiset exactly conjugation-closed by averaging partners.
fn symmetrize_conjugates(zeta: &mut [ComplexPoint], tol: f64) {
    let n = zeta.len();
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] {
            continue;
        }
        let z = zeta[i];
        if z.im.abs() <= tol {
            zeta[i].im = 0.0;
            used[i] = true;
            continue;
        }
        let partner = (0..n).filter(|&j| j != i && !used[j]).min_by(|&a, &b| {
            (zeta[a] - z.conj())
                .norm()
                .total_cmp(&(zeta[b] - z.conj()).norm())
        });
        if let Some(j) = partner {
            if (zeta[j] - z.conj()).norm() <= 1e-6 * z.norm().max(1.0) {
                let mid = (z + zeta[j].conj()) / 2.0;
                zeta[i] = mid;
                zeta[j] = mid.conj();
                used[j] = true;
            }
        }
        used[i] = true;
    }
}

/// Builds the pole set for converged solver coefficients.
pub fn pole_set(cfg: &Configuration, system: &WronskianSystem, v: &[f64]) -> Result<PoleSet> {
    let (_, q) = system.polys(v);
    let mut zeta = q.roots()?;
    let d = cfg.diameter();
    symmetrize_conjugates(&mut zeta, 1e-12 * d);
    let g = genericity(cfg.x(), &zeta);
    let residual = if g.generic && g.all_simple {
        polish_poles(cfg, &mut zeta);
        symmetrize_conjugates(&mut zeta, 1e-12 * d);
        max_norm(&stationary_residual(cfg, &zeta)?)
    } else {
        system.relative_residual(v)
    };
    sort_points(&mut zeta);
    Ok(PoleSet {
        zeta,
        residual,
        generic: g.generic,
    })
}

/// Seeds for one start: pattern midpoints first, then random pole sets.
fn start_poles(
    cfg: &Configuration,
    patterns: &[LinkPattern],
    seed: u64,
    index: usize,
) -> Vec<ComplexPoint> {
    let x = cfg.x();
    if index < patterns.len() {
        return patterns[index]
            .pairs()
            .iter()
            .map(|&(a, b)| Complex64::new(0.5 * (x[a] + x[b]), 0.0))
            .collect();
    }
    let n = cfg.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((index - patterns.len()) as u64);
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let d = hi - lo;
    let pairs = rng.gen_range(0..=n / 2);
    let mut zeta = Vec::with_capacity(n);
    for _ in 0..pairs {
        let re = rng.gen_range(lo..hi);
        let im = rng.gen_range(0.0..0.5 * d) + 1e-3 * d;
        zeta.push(Complex64::new(re, im));
        zeta.push(Complex64::new(re, -im));
    }
    while zeta.len() < n {
        zeta.push(Complex64::new(rng.gen_range(lo..hi), 0.0));
    }
    zeta
}

/// Result of a multi-start search, possibly incomplete.
#[derive(Clone, Debug)]
pub struct Enumeration {
    pub solutions: Vec<Solution>,
    pub expected: usize,
    pub starts: usize,
}

impl Enumeration {
    pub fn is_complete(&self) -> bool {
        self.solutions.len() == self.expected
    }
}

/// Multi-start search for all `C_n` pole configurations. Solutions are
/// classified by tracing their real loci and returned in pattern order.
/// Deterministic for a given seed, independent of the thread count.
pub fn enumerate(cfg: &Configuration, opts: &SolveOptions) -> Result<Enumeration> {
    let n = cfg.n();
    let expected = catalan(n);
    let system = WronskianSystem::new(cfg);
    let patterns = LinkPattern::all(n);
    let total = patterns.len() + opts.budget;
    let mut found: Vec<(Vec<f64>, PoleSet)> = Vec::new();
    let mut next = 0;
    while next < total && found.len() < expected {
        let end = (next + CHUNK).min(total);
        let batch: Vec<Option<Vec<f64>>> = (next..end)
            .into_par_iter()
            .map(|i| {
                let zeta = start_poles(cfg, &patterns, opts.seed, i);
                let v0 = system.seed_from_poles(&zeta);
                system.newton(&v0).map(|o| o.coeffs)
            })
            .collect();
        for v in batch.into_iter().flatten() {
            let Ok(ps) = pole_set(cfg, &system, &v) else {
                continue;
            };
            if ps.zeta.iter().any(|z| !z.is_finite()) {
                continue;
            }
            if found
                .iter()
                .all(|(_, f)| !same_multiset(&f.zeta, &ps.zeta, DEDUP_TOL))
            {
                found.push((v, ps));
            }
        }
        next = end;
    }
    let classified: Vec<Result<Solution>> = found
        .into_par_iter()
        .map(|(v, ps)| {
            let map = system.map(&v, cfg.x())?;
            let (_, pattern) = locus::trace_pattern(&map)?;
            Ok(Solution {
                poles: ps,
                pattern,
                map,
                coeffs: v,
            })
        })
        .collect();
    let mut solutions: Vec<Solution> = classified.into_iter().collect::<Result<_>>()?;
    solutions.sort_by(|a, b| a.pattern.cmp(&b.pattern));
    for w in solutions.windows(2) {
        if w[0].pattern == w[1].pattern {
            return Err(Error::PatternConflict(w[0].pattern.to_string()));
        }
    }
    Ok(Enumeration {
        solutions,
        expected,
        starts: next,
    })
}

/// All `C_n` solutions, or [`Error::IncompleteEnumeration`].
pub fn solve_all(cfg: &Configuration, opts: &SolveOptions) -> Result<Vec<Solution>> {
    let e = enumerate(cfg, opts)?;
    if !e.is_complete() {
        return Err(Error::IncompleteEnumeration {
            found: e.solutions.len(),
            expected: e.expected,
        });
    }
    Ok(e.solutions)
}

/// The solution realizing link pattern `alpha`.
pub fn solve_pattern(
    cfg: &Configuration,
    alpha: &LinkPattern,
    opts: &SolveOptions,
) -> Result<Solution> {
    if alpha.n() != cfg.n() {
        return Err(Error::InvalidInput(format!(
            "pattern {alpha} does not match {} critical points",
            cfg.x().len()
        )));
    }
    let e = enumerate(cfg, opts)?;
    if let Some(s) = e.solutions.iter().find(|s| &s.pattern == alpha) {
        return Ok(s.clone());
    }
    if !e.is_complete() {
        return Err(Error::IncompleteEnumeration {
            found: e.solutions.len(),
            expected: e.expected,
        });
    }
    Err(Error::PatternNotFound(alpha.to_string()))
}

/// Re-solves at `cfg` starting from coefficients of a nearby configuration.
pub fn continue_solution(cfg: &Configuration, coeffs: &[f64]) -> Result<(Vec<f64>, PoleSet)> {
    let system = WronskianSystem::new(cfg);
    let out = system
        .newton(coeffs)
        .ok_or_else(|| Error::InvalidInput("warm-started Newton did not converge".to_string()))?;
    let ps = pole_set(cfg, &system, &out.coeffs)?;
    Ok((out.coeffs, ps))
}

/// Canonical map with the given poles, fitted in coefficient space so that
/// non-generic (double-pole) sets are handled too.
pub fn map_from_poles(cfg: &Configuration, zeta: &[ComplexPoint]) -> Result<RationalMap> {
    let system = WronskianSystem::new(cfg);
    let v = system.seed_from_poles(zeta);
    let v = system.newton(&v).map(|o| o.coeffs).unwrap_or(v);
    let map = system.map(&v, cfg.x())?;
    if !same_multiset(map.poles(), zeta, 1e-6 * cfg.diameter().max(1.0)) {
        return Err(Error::StationaryViolated {
            residual: system.relative_residual(&v),
        });
    }
    Ok(map)
}

/// Link pattern of a pole set, read off the traced locus.
pub fn classify_pattern(cfg: &Configuration, zeta: &[ComplexPoint]) -> Result<LinkPattern> {
    let map = map_from_poles(cfg, zeta)?;
    Ok(locus::trace_pattern(&map)?.1)
}

/// Branch of the `n = 2` closed forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// `+` is the neighbor pattern, `-` the rainbow pattern.
    pub fn pattern(self) -> LinkPattern {
        match self {
            Sign::Plus => LinkPattern::neighbor(2),
            Sign::Minus => LinkPattern::rainbow(2),
        }
    }
}

/// `S = s_2^2 - 3 s_1 s_3 + 12 s_4` in the elementary symmetric functions
/// of the four critical points.
pub fn n2_discriminant(x: &[f64]) -> f64 {
    let s = crate::poly::elementary_symmetric(x);
    s[1] * s[1] - 3.0 * s[0] * s[2] + 12.0 * s[3]
}

/// Closed-form poles for `n = 2`:
/// `zeta = (s_1 -+ sqrt(s_1^2 - 8/3 s_2 +- 8/3 sqrt(S))) / 4`.
pub fn poles_n2_closed_form(cfg: &Configuration, sign: Sign) -> Result<PoleSet> {
    if cfg.n() != 2 {
        return Err(Error::InvalidInput(
            "closed form needs four critical points".to_string(),
        ));
    }
    let x = cfg.x();
    let s = crate::poly::elementary_symmetric(x);
    let big_s = n2_discriminant(x);
    let inner = s[0] * s[0] - 8.0 / 3.0 * s[1] + sign.value() * 8.0 / 3.0 * big_s.sqrt();
    let r = Complex64::new(inner, 0.0).sqrt();
    let mut zeta = vec![(s[0] - r) / 4.0, (s[0] + r) / 4.0];
    if r.norm() < 1e-7 * cfg.diameter() {
        let m = Complex64::new(s[0] / 4.0, 0.0);
        zeta = vec![m, m];
    }
    sort_points(&mut zeta);
    let g = genericity(x, &zeta);
    let residual = if g.generic && g.all_simple {
        max_norm(&stationary_residual(cfg, &zeta)?)
    } else {
        0.0
    };
    Ok(PoleSet {
        zeta,
        residual,
        generic: g.generic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let cfg = Configuration::new(vec![-2.0, -0.5, 0.3, 1.1, 2.0, 3.5]).unwrap();
        let sys = WronskianSystem::new(&cfg);
        let v = vec![0.3, -1.2, 0.7, 2.0, -0.4, 1.5];
        let jac = sys.jacobian(&v);
        let h = 1e-6;
        for col in 0..v.len() {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[col] += h;
            vm[col] -= h;
            let rp = sys.residual(&vp);
            let rm = sys.residual(&vm);
            for row in 0..v.len() {
                let fd = (rp[row] - rm[row]) / (2.0 * h);
                assert!((fd - jac[(row, col)]).abs() < 1e-6, "({row},{col})");
            }
        }
    }

    #[test]
    fn circle_pole() {
        let cfg = Configuration::new(vec![-1.0, 1.0]).unwrap();
        let sols = solve_all(&cfg, &SolveOptions::default()).unwrap();
        assert_eq!(sols.len(), 1);
        assert!(sols[0].poles.zeta[0].norm() < 1e-10);
        assert_eq!(sols[0].pattern, LinkPattern::neighbor(1));
    }

    #[test]
    fn table_configuration() {
        let cfg = Configuration::new(vec![-3.0, 0.0, 1.0, 2.0]).unwrap();
        let sols = solve_all(&cfg, &SolveOptions::default()).unwrap();
        assert_eq!(sols.len(), 2);
        let s = (7.0f64 / 3.0).sqrt();
        assert_eq!(sols[0].pattern, LinkPattern::neighbor(2));
        assert!((sols[0].poles.zeta[0] - c(-s, 0.0)).norm() < 1e-8);
        assert!((sols[0].poles.zeta[1] - c(s, 0.0)).norm() < 1e-8);
        assert!(sols[0].poles.generic);
        assert_eq!(sols[1].pattern, LinkPattern::rainbow(2));
        assert!(!sols[1].poles.generic);
        assert_eq!(sols[1].poles.zeta[0], sols[1].poles.zeta[1]);
        assert!(sols[1].poles.zeta[0].norm() < 1e-7);
    }

    #[test]
    fn solve_pattern_picks_requested() {
        let cfg = Configuration::new(vec![-3.0, 0.0, 1.0, 2.0]).unwrap();
        let s = solve_pattern(&cfg, &LinkPattern::rainbow(2), &SolveOptions::default()).unwrap();
        assert!(s.poles.zeta.iter().all(|z| z.norm() < 1e-7));
        let s = solve_pattern(&cfg, &LinkPattern::neighbor(2), &SolveOptions::default()).unwrap();
        assert!((s.poles.zeta[1].re - 1.5275252).abs() < 1e-7);
    }

    #[test]
    fn closed_form_n2() {
        let cfg = Configuration::new(vec![-3.0, 0.0, 1.0, 2.0]).unwrap();
        assert_eq!(n2_discriminant(cfg.x()), 49.0);
        let plus = poles_n2_closed_form(&cfg, Sign::Plus).unwrap();
        let s = (7.0f64 / 3.0).sqrt();
        assert!((plus.zeta[1] - c(s, 0.0)).norm() < 1e-14);
        let minus = poles_n2_closed_form(&cfg, Sign::Minus).unwrap();
        assert_eq!(minus.zeta, vec![c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(!minus.generic);

        let cfg = Configuration::new(vec![-2.0, -1.0, 1.0, 2.0]).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            let ps = poles_n2_closed_form(&cfg, sign).unwrap();
            assert!(crate::poly::is_conjugation_closed(&ps.zeta, 1e-12));
            assert!(ps.residual < 1e-10);
        }
    }

    #[test]
    fn classify_examples() {
        let cfg = Configuration::new(vec![-3.0, 0.0, 1.0, 2.0]).unwrap();
        let s = (7.0f64 / 3.0).sqrt();
        assert_eq!(
            classify_pattern(&cfg, &[c(-s, 0.0), c(s, 0.0)]).unwrap(),
            LinkPattern::neighbor(2)
        );
        assert_eq!(
            classify_pattern(&cfg, &[c(0.0, 0.0), c(0.0, 0.0)]).unwrap(),
            LinkPattern::rainbow(2)
        );
        let cfg = Configuration::new(vec![-1.0, 1.0]).unwrap();
        assert_eq!(
            classify_pattern(&cfg, &[c(0.0, 0.0)]).unwrap(),
            LinkPattern::neighbor(1)
        );
    }

    #[test]
    fn n3_symmetric_configuration() {
        let cfg = Configuration::new(vec![-5.0, -3.0, -1.0, 1.0, 3.0, 5.0]).unwrap();
        let e = enumerate(&cfg, &SolveOptions::default()).unwrap();
        assert!(e.is_complete(), "found {}", e.solutions.len());
        let patterns: Vec<_> = e.solutions.iter().map(|s| s.pattern.clone()).collect();
        assert_eq!(patterns, LinkPattern::all(3));
        for s in &e.solutions {
            if s.poles.generic {
                assert!(s.poles.residual < 1e-8);
            }
        }
    }
}
