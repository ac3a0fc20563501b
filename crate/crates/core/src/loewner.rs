//! The Loewner flow of a multiple SLE(0) system.
//!
//! Driving points `x_j(t)`, pushed poles `xi_k(t) = g_t(zeta_k)` and tracked
//! interior points are integrated with classical RK4. Away from
//! driving-point/pole encounters the pole images are integrated directly
//! ("pushforward"). Near such encounters, where the pole form of the
//! drift is singular, the drift is computed from the canonical map at
//! `x(t)`, re-solved in coefficient space at every RK stage ("resolve"),
//! and the poles are read off as roots of `Q_t`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nullvec::u_from_map;
use crate::pattern::LinkPattern;
use crate::poles::{Solution, SolveOptions, WronskianSystem};
use crate::poly::{elementary_symmetric, ComplexPoint};
use crate::rational::{
    max_norm, residue_coefficients, stationary_residual, Configuration, RationalMap,
};

pub const DEFAULT_DT: f64 = 1e-4;
pub const MIN_DT: f64 = 1e-12;
/// Driving points closer than this have collided.
pub const COLLISION_EPS: f64 = 1e-6;
/// Pole/driving-point distances, relative to the diameter, at which the
/// integrator enters and leaves resolve mode.
const RESOLVE_ENTER: f64 = 1e-3;
const RESOLVE_EXIT: f64 = 2e-2;
/// Tracked points this close to a driving point (relative) are absorbed.
const ABSORB_EPS: f64 = 1e-6;
const TIP_IM_FLOOR: f64 = -1e-8;

/// Growth speeds `nu_j(t) >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedSchedule {
    Constant(Vec<f64>),
    /// `speeds[i]` applies on `[starts[i], starts[i + 1])`; `starts[0] = 0`.
    Piecewise {
        starts: Vec<f64>,
        speeds: Vec<Vec<f64>>,
    },
}

impl SpeedSchedule {
    pub fn uniform(points: usize, nu: f64) -> Result<Self> {
        Self::constant(vec![nu; points])
    }

    pub fn constant(nu: Vec<f64>) -> Result<Self> {
        let s = SpeedSchedule::Constant(nu);
        s.validate(None)?;
        Ok(s)
    }

    pub fn piecewise(starts: Vec<f64>, speeds: Vec<Vec<f64>>) -> Result<Self> {
        let s = SpeedSchedule::Piecewise { starts, speeds };
        s.validate(None)?;
        Ok(s)
    }

    /// Checks non-negativity, consistent lengths and (when given) the
    /// number of driving points.
    pub fn validate(&self, points: Option<usize>) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("nu: {m}")));
        let rows: Vec<&Vec<f64>> = match self {
            SpeedSchedule::Constant(v) => vec![v],
            SpeedSchedule::Piecewise { starts, speeds } => {
                if starts.is_empty() || starts.len() != speeds.len() {
                    return bad("piecewise schedule needs one speed vector per start time");
                }
                if starts[0] != 0.0 {
                    return bad("first piece must start at t = 0");
                }
                if starts.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("start times must be strictly increasing");
                }
                speeds.iter().collect()
            }
        };
        let len = rows[0].len();
        if rows.iter().any(|r| r.len() != len) {
            return bad("all speed vectors must have the same length");
        }
        if let Some(m) = points {
            if len != m {
                return bad(&format!("expected {m} speeds, got {len}"));
            }
        }
        if rows
            .iter()
            .flat_map(|r| r.iter())
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return bad("speeds must be finite and non-negative");
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> &[f64] {
        match self {
            SpeedSchedule::Constant(v) => v,
            SpeedSchedule::Piecewise { starts, speeds } => {
                let i = starts.iter().rposition(|&s| s <= t).unwrap_or(0);
                &speeds[i]
            }
        }
    }

    /// First breakpoint strictly after `t`.
    pub fn next_break(&self, t: f64) -> Option<f64> {
        match self {
            SpeedSchedule::Constant(_) => None,
            SpeedSchedule::Piecewise { starts, .. } => starts.iter().copied().find(|&s| s > t),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackedPoint {
    pub z0: ComplexPoint,
    pub gz: ComplexPoint,
    pub gprime: ComplexPoint,
    pub alive: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowStatus {
    Running,
    StoppedTau,
    PassedTau0(u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoewnerState {
    pub t: f64,
    pub x: Vec<f64>,
    pub xi: Vec<ComplexPoint>,
    pub tracked: Vec<TrackedPoint>,
    pub tips: Vec<ComplexPoint>,
    /// Tips kept from the previous sample because the new root was rejected.
    pub stale: Vec<bool>,
    pub status: FlowStatus,
    /// Solver coefficients of the canonical map at `x(t)`, present while the
    /// integrator is in resolve mode.
    #[serde(skip)]
    pub frame: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleDiagnostics {
    pub t: f64,
    /// Largest `|M_t - M_0| / |M_0|` over live tracked points.
    pub n_drift: f64,
    /// Elementary symmetric functions `s_1, .., s_{2n}` of `x(t)`.
    pub s: Vec<f64>,
    /// Stationary residual of `(x(t), xi(t))` when generic.
    pub stationary: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct LoewnerTrajectory {
    pub samples: Vec<LoewnerState>,
    pub diagnostics: Vec<SampleDiagnostics>,
    pub pattern: LinkPattern,
    pub initial: RationalMap,
    pub initial_coeffs: Vec<f64>,
    pub tau0_events: u32,
    pub stopped_at_tau: bool,
}

impl LoewnerTrajectory {
    pub fn last(&self) -> &LoewnerState {
        self.samples.last().unwrap()
    }

    pub fn max_n_drift(&self) -> f64 {
        self.diagnostics
            .iter()
            .fold(0.0f64, |m, d| m.max(d.n_drift))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriftMode {
    /// Pushforward away from pole encounters, resolve near them.
    Hybrid,
    /// Drift from the re-solved map at every stage.
    Resolve,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowOptions {
    pub t_end: f64,
    pub dt: f64,
    pub tracked: Vec<ComplexPoint>,
    pub mode: DriftMode,
    pub min_dt: f64,
}

impl FlowOptions {
    pub fn new(t_end: f64, dt: f64, tracked: Vec<ComplexPoint>) -> Self {
        FlowOptions {
            t_end,
            dt,
            tracked,
            mode: DriftMode::Hybrid,
            min_dt: MIN_DT,
        }
    }
}

/// Time derivatives of the flow variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivatives {
    pub x: Vec<f64>,
    pub xi: Vec<ComplexPoint>,
    pub gz: Vec<ComplexPoint>,
    pub gprime: Vec<ComplexPoint>,
}

fn interaction(x: &[f64], nu: &[f64], j: usize) -> f64 {
    (0..x.len())
        .filter(|&k| k != j)
        .map(|k| 2.0 * nu[k] / (x[j] - x[k]))
        .sum()
}

fn g_rates(
    x: &[f64],
    nu: &[f64],
    g: ComplexPoint,
    gp: ComplexPoint,
) -> (ComplexPoint, ComplexPoint) {
    let mut dg = Complex64::new(0.0, 0.0);
    let mut s = Complex64::new(0.0, 0.0);
    for (&xj, &nj) in x.iter().zip(nu) {
        let w = (g - xj).inv();
        dg += 2.0 * nj * w;
        s += 2.0 * nj * w * w;
    }
    (dg, -gp * s)
}

/// Loewner system in pole form:
/// `x_j' = V_j nu_j + sum_{k != j} 2 nu_k / (x_j - x_k)` with
/// `V_j = sum_{k != j} 2/(x_j - x_k) + sum_k 4/(xi_k - x_j)`,
/// `xi_k' = sum_j 2 nu_j / (xi_k - x_j)`, `g' = sum_j 2 nu_j / (g - x_j)`.
pub fn rhs(
    x: &[f64],
    xi: &[ComplexPoint],
    tracked: &[(ComplexPoint, ComplexPoint)],
    nu: &[f64],
) -> Derivatives {
    let dx = (0..x.len())
        .map(|j| {
            let pair: f64 = (0..x.len())
                .filter(|&k| k != j)
                .map(|k| 2.0 / (x[j] - x[k]))
                .sum();
            let poles: Complex64 = xi.iter().map(|&z| 4.0 * (z - x[j]).inv()).sum();
            (pair + poles.re) * nu[j] + interaction(x, nu, j)
        })
        .collect();
    let dxi = xi
        .iter()
        .map(|&z| {
            x.iter()
                .zip(nu)
                .map(|(&xj, &nj)| 2.0 * nj * (z - xj).inv())
                .sum()
        })
        .collect();
    let (gz, gprime) = tracked.iter().map(|&(g, gp)| g_rates(x, nu, g, gp)).unzip();
    Derivatives {
        x: dx,
        xi: dxi,
        gz,
        gprime,
    }
}

/// Calogero-Moser form of the `nu = 1/4` flow:
/// `x_j' = sum_{k != j} 1/(x_j - x_k) - sum_k 1/(x_j - zeta_k)`,
/// `zeta_k' = -sum_{l != k} 1/(zeta_k - zeta_l) + sum_j 1/(zeta_k - x_j)`.
pub fn calogero_moser_rhs(
    x: &[f64],
    zeta: &[ComplexPoint],
) -> Result<(Vec<f64>, Vec<ComplexPoint>)> {
    let mut min_d = f64::INFINITY;
    for (j, &a) in x.iter().enumerate() {
        for &b in &x[j + 1..] {
            min_d = min_d.min((a - b).abs());
        }
        for z in zeta {
            min_d = min_d.min((z - a).norm());
        }
    }
    for (k, a) in zeta.iter().enumerate() {
        for b in &zeta[k + 1..] {
            min_d = min_d.min((a - b).norm());
        }
    }
    if min_d < 1e-10 {
        return Err(Error::CoincidentPoints { distance: min_d });
    }
    let dx = (0..x.len())
        .map(|j| {
            let a: f64 = (0..x.len())
                .filter(|&k| k != j)
                .map(|k| 1.0 / (x[j] - x[k]))
                .sum();
            let b: Complex64 = zeta.iter().map(|&z| (x[j] - z).inv()).sum();
            a - b.re
        })
        .collect();
    let dz = zeta
        .iter()
        .enumerate()
        .map(|(k, &zk)| {
            let a: Complex64 = zeta
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != k)
                .map(|(_, &zl)| (zk - zl).inv())
                .sum();
            let b: Complex64 = x.iter().map(|&xj| (zk - xj).inv()).sum();
            -a + b
        })
        .collect();
    Ok((dx, dz))
}

/// `M_t(z) = g_t'(z) prod (g_t(z) - x_j) / prod (g_t(z) - xi_k)^2`, which
/// stays equal to `R'(z)` along the flow.
pub fn integral_of_motion(state: &LoewnerState, index: usize) -> Result<ComplexPoint> {
    let p = state
        .tracked
        .get(index)
        .ok_or_else(|| Error::InvalidInput(format!("no tracked point {index}")))?;
    if !p.alive {
        return Err(Error::DeadPoint(index));
    }
    Ok(m_value(&state.x, &state.xi, p.gz, p.gprime))
}

fn m_value(x: &[f64], xi: &[ComplexPoint], g: ComplexPoint, gp: ComplexPoint) -> ComplexPoint {
    let num: Complex64 = x.iter().map(|&xj| g - xj).product();
    let den: Complex64 = xi.iter().map(|&z| (g - z) * (g - z)).product();
    gp * num / den
}

/// Flow variables advanced by the integrator.
#[derive(Clone, Debug)]
struct Vars {
    x: Vec<f64>,
    xi: Vec<ComplexPoint>,
    g: Vec<ComplexPoint>,
    gp: Vec<ComplexPoint>,
}

impl Vars {
    fn axpy(&self, d: &Derivatives, h: f64) -> Vars {
        Vars {
            x: self.x.iter().zip(&d.x).map(|(a, b)| a + h * b).collect(),
            xi: self.xi.iter().zip(&d.xi).map(|(a, b)| a + h * b).collect(),
            g: self.g.iter().zip(&d.gz).map(|(a, b)| a + h * b).collect(),
            gp: self
                .gp
                .iter()
                .zip(&d.gprime)
                .map(|(a, b)| a + h * b)
                .collect(),
        }
    }

    fn finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
            && self
                .xi
                .iter()
                .chain(&self.g)
                .chain(&self.gp)
                .all(|z| z.is_finite())
    }
}

fn combine(k: &[Derivatives; 4]) -> Derivatives {
    let mix_r = |a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..a.len())
            .map(|i| (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]) / 6.0)
            .collect()
    };
    let mix_c =
        |a: &[Complex64], b: &[Complex64], c: &[Complex64], d: &[Complex64]| -> Vec<Complex64> {
            (0..a.len())
                .map(|i| (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]) / 6.0)
                .collect()
        };
    Derivatives {
        x: mix_r(&k[0].x, &k[1].x, &k[2].x, &k[3].x),
        xi: mix_c(&k[0].xi, &k[1].xi, &k[2].xi, &k[3].xi),
        gz: mix_c(&k[0].gz, &k[1].gz, &k[2].gz, &k[3].gz),
        gprime: mix_c(&k[0].gprime, &k[1].gprime, &k[2].gprime, &k[3].gprime),
    }
}

/// Reorders `new` to follow `old` by nearest-neighbour matching.
fn match_order(old: &[ComplexPoint], new: Vec<ComplexPoint>) -> Vec<ComplexPoint> {
    let mut pool = new;
    let mut out = Vec::with_capacity(old.len());
    for o in old {
        let (i, _) = pool
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - o).norm().total_cmp(&(b.1 - o).norm()))
            .unwrap();
        out.push(pool.swap_remove(i));
    }
    out
}

struct Integrator<'a> {
    map0: &'a RationalMap,
    min_dt: f64,
    diameter: f64,
    n: usize,
}

impl Integrator<'_> {
    fn resolve_derivatives(
        &self,
        vars: &Vars,
        v: &[f64],
        nu: &[f64],
        alive: &[bool],
    ) -> Derivatives {
        let sys = WronskianSystem::from_criticals(&vars.x);
        let (p, q) = sys.polys(v);
        let u = u_from_map(&vars.x, &p, &q);
        let dx = (0..vars.x.len())
            .map(|j| u[j] * nu[j] + interaction(&vars.x, nu, j))
            .collect();
        let (gz, gprime) = self.tracked_rates(vars, nu, alive);
        Derivatives {
            x: dx,
            xi: vec![Complex64::new(0.0, 0.0); vars.xi.len()],
            gz,
            gprime,
        }
    }

    fn tracked_rates(
        &self,
        vars: &Vars,
        nu: &[f64],
        alive: &[bool],
    ) -> (Vec<ComplexPoint>, Vec<ComplexPoint>) {
        vars.g
            .iter()
            .zip(&vars.gp)
            .zip(alive)
            .map(|((&g, &gp), &a)| {
                if a {
                    g_rates(&vars.x, nu, g, gp)
                } else {
                    (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
                }
            })
            .unzip()
    }

    fn push_derivatives(&self, vars: &Vars, nu: &[f64], alive: &[bool]) -> Derivatives {
        let mut d = rhs(&vars.x, &vars.xi, &[], nu);
        let (gz, gprime) = self.tracked_rates(vars, nu, alive);
        d.gz = gz;
        d.gprime = gprime;
        d
    }

    /// Largest step allowed by the monitored gaps; also reports whether the
    /// binding constraint is a driving-point pair, and which tracked points
    /// force a step below the floor.
    fn step_limit(
        &self,
        vars: &Vars,
        d: &Derivatives,
        resolve: bool,
        alive: &[bool],
    ) -> (f64, bool, Vec<usize>) {
        let mut limit = f64::INFINITY;
        let mut by_x = false;
        let m = vars.x.len();
        for j in 0..m {
            for k in j + 1..m {
                let v = (d.x[j] - d.x[k]).abs();
                if v > 0.0 {
                    let h = (vars.x[j] - vars.x[k]).abs() / (10.0 * v);
                    if h < limit {
                        limit = h;
                        by_x = true;
                    }
                }
            }
            if !resolve {
                for (k, &z) in vars.xi.iter().enumerate() {
                    let v = (d.x[j] - d.xi[k]).norm();
                    if v > 0.0 {
                        let h = (z - vars.x[j]).norm() / (10.0 * v);
                        if h < limit {
                            limit = h;
                            by_x = false;
                        }
                    }
                }
            }
        }
        let mut absorbed = Vec::new();
        for (i, &g) in vars.g.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            let mut own = f64::INFINITY;
            for j in 0..m {
                let v = (d.gz[i] - d.x[j]).norm();
                if v > 0.0 {
                    own = own.min((g - vars.x[j]).norm() / (10.0 * v));
                }
            }
            if own < self.min_dt {
                absorbed.push(i);
            } else if own < limit {
                limit = own;
                by_x = false;
            }
        }
        (limit, by_x, absorbed)
    }

    fn tip(
        &self,
        x: &[f64],
        xi: &[ComplexPoint],
        frame: Option<&[f64]>,
        j: usize,
        prev: ComplexPoint,
    ) -> Result<Option<ComplexPoint>> {
        let xj = x[j];
        let (num, den) = match frame {
            Some(v) => {
                let sys = WronskianSystem::from_criticals(x);
                let (p, q) = sys.polys(v);
                let shift = q.coeff(self.n - 1);
                let qv = q.eval_real(xj);
                (p.eval_real(xj) + shift * qv, qv)
            }
            None => {
                let a = residue_coefficients(x, xi);
                let qv: Complex64 = xi.iter().map(|&z| xj - z).product();
                let mut num = qv * xj;
                for (k, &ak) in a.iter().enumerate() {
                    let others: Complex64 = xi
                        .iter()
                        .enumerate()
                        .filter(|&(l, _)| l != k)
                        .map(|(_, &z)| xj - z)
                        .product();
                    num -= ak * others;
                }
                (num.re, qv.re)
            }
        };
        let p0 = self.map0.p();
        let q0 = self.map0.q();
        let poly = &p0.scale(den) - &q0.scale(num);
        if poly.degree() == 0 {
            return Ok(None);
        }
        let roots = poly.roots()?;
        let floor = TIP_IM_FLOOR * self.diameter.max(1.0);
        let best = roots
            .iter()
            .filter(|r| r.im >= floor)
            .min_by(|a, b| (*a - prev).norm().total_cmp(&(*b - prev).norm()))
            .copied()
            .ok_or(Error::NoHalfPlaneRoot)?;
        Ok(Some(Complex64::new(best.re, best.im.max(0.0))))
    }
}

/// Tip `gamma_j(t)` at a state, solving `R_0(gamma) = R_t(x_j(t))` in
/// projective form and taking the root in the closed upper half-plane
/// nearest `previous`. Returns `(tip, stale)`; a stale tip is `previous`
/// unchanged.
pub fn tip_solve(
    initial: &RationalMap,
    state: &LoewnerState,
    j: usize,
    previous: ComplexPoint,
) -> Result<(ComplexPoint, bool)> {
    let integ = Integrator {
        map0: initial,
        min_dt: MIN_DT,
        diameter: initial.length_scale(),
        n: initial.n(),
    };
    let generic = state
        .x
        .iter()
        .all(|&x| state.xi.iter().all(|z| (z - x).norm() > 1e-6));
    if state.frame.is_none() && !generic {
        return Ok((previous, true));
    }
    match integ.tip(&state.x, &state.xi, state.frame.as_deref(), j, previous)? {
        Some(t) => Ok((t, false)),
        None => Ok((previous, true)),
    }
}

/// Integrates the flow of a solved configuration.
pub fn evolve_solution(
    solution: &Solution,
    schedule: &SpeedSchedule,
    opts: &FlowOptions,
) -> Result<LoewnerTrajectory> {
    let x0 = solution.map.criticals().to_vec();
    let m = x0.len();
    let n = m / 2;
    schedule.validate(Some(m))?;
    if !(opts.t_end > 0.0 && opts.dt > 0.0) {
        return Err(Error::InvalidInput("T and dt must be positive".to_string()));
    }
    if let Some(z) = opts.tracked.iter().find(|z| !(z.im > 0.0 && z.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "tracked point {z} is not in the upper half-plane"
        )));
    }
    let map0 = &solution.map;
    let diameter = x0[m - 1] - x0[0];
    let integ = Integrator {
        map0,
        min_dt: opts.min_dt,
        diameter,
        n,
    };
    let m0: Vec<ComplexPoint> = opts
        .tracked
        .iter()
        .map(|&z| map0.derivative_at(z))
        .collect();

    let mut vars = Vars {
        x: x0.clone(),
        xi: solution.poles.zeta.clone(),
        g: opts.tracked.clone(),
        gp: vec![Complex64::new(1.0, 0.0); opts.tracked.len()],
    };
    let mut alive = vec![true; opts.tracked.len()];
    let pole_gap = |x: &[f64], xi: &[ComplexPoint]| {
        x.iter()
            .flat_map(|&a| xi.iter().map(move |z| (z - a).norm()))
            .fold(f64::INFINITY, f64::min)
    };
    let real_poles =
        |xi: &[ComplexPoint]| xi.iter().filter(|z| z.im.abs() <= 1e-9 * diameter).count();

    let initially_generic = solution.poles.generic;
    let mut resolve =
        opts.mode == DriftMode::Resolve || pole_gap(&vars.x, &vars.xi) < RESOLVE_ENTER * diameter;
    let mut frame: Vec<f64> = solution.coeffs.clone();
    let mut tau0_events: u32 = if initially_generic { 0 } else { 1 };
    let mut window_real = real_poles(&vars.xi);
    let mut window_changed = false;

    let mut t = 0.0;
    let mut tips: Vec<ComplexPoint> = x0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut prev_tips = tips.clone();
    let mut prev_dt = opts.dt;
    let status_of = |c: u32| {
        if c == 0 {
            FlowStatus::Running
        } else {
            FlowStatus::PassedTau0(c)
        }
    };

    let mut samples = Vec::new();
    let mut diagnostics = Vec::new();
    let record = |t: f64,
                  vars: &Vars,
                  tips: &[ComplexPoint],
                  stale: Vec<bool>,
                  alive: &[bool],
                  frame: Option<Vec<f64>>,
                  status: FlowStatus,
                  samples: &mut Vec<LoewnerState>,
                  diagnostics: &mut Vec<SampleDiagnostics>| {
        let tracked: Vec<TrackedPoint> = (0..vars.g.len())
            .map(|i| TrackedPoint {
                z0: opts.tracked[i],
                gz: vars.g[i],
                gprime: vars.gp[i],
                alive: alive[i],
            })
            .collect();
        let n_drift = (0..vars.g.len())
            .filter(|&i| alive[i])
            .map(|i| {
                (m_value(&vars.x, &vars.xi, vars.g[i], vars.gp[i]) - m0[i]).norm() / m0[i].norm()
            })
            .fold(0.0f64, f64::max);
        let stationary = Configuration::new(vars.x.clone())
            .ok()
            .and_then(|c| stationary_residual(&c, &vars.xi).ok())
            .filter(|_| pole_gap(&vars.x, &vars.xi) > 1e-6)
            .map(|f| max_norm(&f));
        diagnostics.push(SampleDiagnostics {
            t,
            n_drift,
            s: elementary_symmetric(&vars.x),
            stationary,
        });
        samples.push(LoewnerState {
            t,
            x: vars.x.clone(),
            xi: vars.xi.clone(),
            tracked,
            tips: tips.to_vec(),
            stale,
            status,
            frame,
        });
    };
    record(
        t,
        &vars,
        &tips,
        vec![false; m],
        &alive,
        resolve.then(|| frame.clone()),
        status_of(tau0_events),
        &mut samples,
        &mut diagnostics,
    );

    let mut stopped_at_tau = false;
    while t < opts.t_end * (1.0 - 1e-14) {
        let nu = schedule.at(t).to_vec();
        let mut horizon = opts.t_end - t;
        if let Some(b) = schedule.next_break(t) {
            horizon = horizon.min(b - t);
        }
        let k1 = if resolve {
            integ.resolve_derivatives(&vars, &frame, &nu, &alive)
        } else {
            integ.push_derivatives(&vars, &nu, &alive)
        };
        let (limit, by_x, absorbed) = integ.step_limit(&vars, &k1, resolve, &alive);
        for i in absorbed {
            alive[i] = false;
        }
        let mut h = opts.dt;
        while h > limit && h >= opts.min_dt {
            h *= 0.5;
        }
        if h < opts.min_dt {
            if by_x {
                stopped_at_tau = true;
                break;
            }
            return Err(Error::StepSizeUnderflow { t });
        }
        let h = h.min(horizon);

        let step = (|| -> Option<(Vars, Option<Vec<f64>>)> {
            if resolve {
                let mut v = frame.clone();
                let mut solve_at = |vs: &Vars| -> Option<Vec<f64>> {
                    let sys = WronskianSystem::from_criticals(&vs.x);
                    let out = sys.newton(&v)?;
                    v = out.coeffs.clone();
                    Some(out.coeffs)
                };
                let y2 = vars.axpy(&k1, h / 2.0);
                let v2 = solve_at(&y2)?;
                let k2 = integ.resolve_derivatives(&y2, &v2, &nu, &alive);
                let y3 = vars.axpy(&k2, h / 2.0);
                let v3 = solve_at(&y3)?;
                let k3 = integ.resolve_derivatives(&y3, &v3, &nu, &alive);
                let y4 = vars.axpy(&k3, h);
                let v4 = solve_at(&y4)?;
                let k4 = integ.resolve_derivatives(&y4, &v4, &nu, &alive);
                let mut next = vars.axpy(&combine(&[k1.clone(), k2, k3, k4]), h);
                if next.x.windows(2).any(|w| w[0] >= w[1]) {
                    return None;
                }
                let vn = solve_at(&next)?;
                let sys = WronskianSystem::from_criticals(&next.x);
                let (_, q) = sys.polys(&vn);
                let roots = q.roots().ok()?;
                next.xi = match_order(&vars.xi, roots);
                Some((next, Some(vn)))
            } else {
                let y2 = vars.axpy(&k1, h / 2.0);
                let k2 = integ.push_derivatives(&y2, &nu, &alive);
                let y3 = vars.axpy(&k2, h / 2.0);
                let k3 = integ.push_derivatives(&y3, &nu, &alive);
                let y4 = vars.axpy(&k3, h);
                let k4 = integ.push_derivatives(&y4, &nu, &alive);
                let next = vars.axpy(&combine(&[k1.clone(), k2, k3, k4]), h);
                if next.x.windows(2).any(|w| w[0] >= w[1]) {
                    return None;
                }
                Some((next, None))
            }
        })();
        let Some((next, new_frame)) = step.filter(|(v, _)| v.finite()) else {
            return Err(Error::StepSizeUnderflow { t });
        };
        vars = next;
        t += h;
        if let Some(f) = new_frame {
            frame = f;
        }

        for (i, &g) in vars.g.iter().enumerate() {
            if alive[i]
                && vars
                    .x
                    .iter()
                    .any(|&xj| (g - xj).norm() < ABSORB_EPS * diameter)
            {
                alive[i] = false;
            }
        }

        // Mode switching and event bookkeeping.
        let gap = pole_gap(&vars.x, &vars.xi);
        if resolve {
            let real_now = real_poles(&vars.xi);
            if real_now != window_real {
                window_changed = true;
            }
            if opts.mode == DriftMode::Hybrid && gap > RESOLVE_EXIT * diameter {
                resolve = false;
                if window_changed {
                    tau0_events += 1;
                }
                window_changed = false;
            }
        } else if gap < RESOLVE_ENTER * diameter {
            let sys = WronskianSystem::from_criticals(&vars.x);
            let seed = sys.seed_from_poles(&vars.xi);
            frame = sys
                .newton(&seed)
                .map(|o| o.coeffs)
                .ok_or(Error::StepSizeUnderflow { t })?;
            resolve = true;
            window_real = real_poles(&vars.xi);
            window_changed = false;
        }

        let mut stale = vec![false; m];
        let frame_ref = resolve.then_some(frame.as_slice());
        let limit_base = (opts.dt.sqrt() * diameter).max(1e-12);
        for j in 0..m {
            let prev = tips[j];
            let speed = (prev - prev_tips[j]).norm() / prev_dt;
            let max_jump = (10.0 * speed * h).max(limit_base);
            match integ.tip(&vars.x, &vars.xi, frame_ref, j, prev)? {
                Some(tip) if (tip - prev).norm() <= max_jump => {
                    prev_tips[j] = prev;
                    tips[j] = tip;
                }
                _ => stale[j] = true,
            }
        }
        prev_dt = h;

        let min_x_gap = vars
            .x
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let done = min_x_gap < COLLISION_EPS;
        let status = if done {
            FlowStatus::StoppedTau
        } else {
            status_of(tau0_events)
        };
        record(
            t,
            &vars,
            &tips,
            stale,
            &alive,
            resolve.then(|| frame.clone()),
            status,
            &mut samples,
            &mut diagnostics,
        );
        if done {
            stopped_at_tau = true;
            break;
        }
    }
    if stopped_at_tau {
        if let Some(last) = samples.last_mut() {
            last.status = FlowStatus::StoppedTau;
        }
    }
    Ok(LoewnerTrajectory {
        samples,
        diagnostics,
        pattern: solution.pattern.clone(),
        initial: map0.clone(),
        initial_coeffs: solution.coeffs.clone(),
        tau0_events,
        stopped_at_tau,
    })
}

/// Solves for the pattern `alpha` at `cfg` and integrates its flow.
pub fn evolve(
    cfg: &Configuration,
    alpha: &LinkPattern,
    schedule: &SpeedSchedule,
    opts: &FlowOptions,
    solve: &SolveOptions,
) -> Result<LoewnerTrajectory> {
    let solution = crate::poles::solve_pattern(cfg, alpha, solve)?;
    evolve_solution(&solution, schedule, opts)
}

/// Re-solves the pole functions along the sampled driving points, warm
/// starting each sample from the previous one. Returns, per sample, the
/// largest distance between the re-solved poles and the pushed poles.
pub fn pushforward_deviation(traj: &LoewnerTrajectory) -> Result<Vec<(f64, f64)>> {
    let mut v = traj.initial_coeffs.clone();
    let mut out = Vec::with_capacity(traj.samples.len());
    for s in &traj.samples {
        let sys = WronskianSystem::from_criticals(&s.x);
        let o = sys
            .newton(&v)
            .ok_or_else(|| Error::InvalidInput(format!("re-solve failed at t = {}", s.t)))?;
        v = o.coeffs;
        let (_, q) = sys.polys(&v);
        let roots = q.roots()?;
        out.push((s.t, crate::rational::multiset_distance(&roots, &s.xi)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poles::{solve_pattern, SolveOptions};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn circle_rhs_at_start() {
        let d = rhs(&[-1.0, 1.0], &[c(0.0, 0.0)], &[], &[0.25, 0.25]);
        assert!((d.x[0] - 0.5).abs() < 1e-15);
        assert!(d.xi[0].norm() < 1e-15);
        let d = rhs(
            &[-1.0, 1.0],
            &[c(0.0, 0.0)],
            &[(c(0.0, 2.0), c(1.0, 0.0))],
            &[0.0, 0.0],
        );
        assert!(d.x.iter().all(|v| *v == 0.0));
        assert!(d.gz[0].norm() == 0.0 && d.gprime[0].norm() == 0.0);
    }

    #[test]
    fn calogero_moser_examples() {
        let (dx, dz) = calogero_moser_rhs(&[-1.0, 1.0], &[c(0.0, 0.0)]).unwrap();
        assert!((dx[0] - 0.5).abs() < 1e-15);
        assert!(dz[0].norm() < 1e-15);
        let s = (7.0f64 / 3.0).sqrt();
        let (_, dz) = calogero_moser_rhs(&[-3.0, 0.0, 1.0, 2.0], &[c(-s, 0.0), c(s, 0.0)]).unwrap();
        assert!(
            (dz[1] - c(-1.0 / (2.0 * s), 0.0)).norm() < 1e-12
                || (dz[1] - c(1.0 / (2.0 * s), 0.0)).norm() < 1e-12
        );
        assert!(calogero_moser_rhs(&[-1.0, 1.0], &[c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn circle_flow() {
        let cfg = Configuration::new(vec![-1.0, 1.0]).unwrap();
        let sol = solve_pattern(&cfg, &LinkPattern::neighbor(1), &SolveOptions::default()).unwrap();
        let schedule = SpeedSchedule::uniform(2, 0.25).unwrap();
        let opts = FlowOptions::new(0.99, 1e-3, vec![c(0.0, 2.0)]);
        let traj = evolve_solution(&sol, &schedule, &opts).unwrap();
        let last = traj.last();
        assert!((last.t - 0.99).abs() < 1e-12);
        let worst = traj
            .samples
            .iter()
            .map(|s| (s.x[0] + (1.0 - s.t).sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
        for s in &traj.samples {
            let expected = c(-(1.0 - s.t).sqrt(), s.t.sqrt());
            assert!(
                (s.tips[0] - expected).norm() < 1e-5,
                "t={} {}",
                s.t,
                s.tips[0]
            );
            let mt = integral_of_motion(s, 0).unwrap();
            assert!((mt - c(1.25, 0.0)).norm() < 1e-7);
        }
        assert_eq!(traj.tau0_events, 0);
    }

    #[test]
    fn piecewise_schedule_lookup() {
        let s =
            SpeedSchedule::piecewise(vec![0.0, 0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(s.at(0.2), &[1.0, 0.0]);
        assert_eq!(s.at(0.5), &[0.0, 1.0]);
        assert_eq!(s.next_break(0.1), Some(0.5));
        assert_eq!(s.next_break(0.5), None);
        assert!(SpeedSchedule::constant(vec![-1.0]).is_err());
    }
}
