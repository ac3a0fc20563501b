//! Tracing the real locus of a rational map in the upper half-plane.
//!
//! Each branch leaves a critical point vertically and follows the zero set of
//! `h = Im(P conj Q)` with a predictor-corrector scheme until it returns to
//! the real axis at another critical point or leaves the bounding box.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::LinkPattern;
use crate::poly::ComplexPoint;
use crate::rational::RationalMap;

const MAX_TURN: f64 = 0.35;
const MAX_CORRECTOR_ITERS: usize = 10;
const MIN_STEP_FRACTION: f64 = 1e-5;
const MAX_STEPS: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl BBox {
    pub fn contains(&self, z: ComplexPoint) -> bool {
        z.re >= self.xmin && z.re <= self.xmax && z.im >= self.ymin && z.im <= self.ymax
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceOptions {
    pub step: f64,
    pub bbox: BBox,
}

impl TraceOptions {
    /// Step `1e-3` of the critical diameter and a box reaching five
    /// diameters beyond the critical points.
    pub fn for_map(map: &RationalMap) -> Self {
        let d = map.length_scale();
        let x = map.criticals();
        TraceOptions {
            step: 1e-3 * d,
            bbox: BBox {
                xmin: x[0] - 5.0 * d,
                xmax: x[x.len() - 1] + 5.0 * d,
                ymin: 0.0,
                ymax: 5.0 * d,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endpoint {
    Critical(usize),
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub points: Vec<ComplexPoint>,
    pub start_index: usize,
    pub end: Endpoint,
}

impl Curve {
    /// Ordinates of the curve above abscissa `x`, refined on the locus.
    pub fn ordinates_at(&self, map: &RationalMap, x: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            let crosses = (a.re - x) * (b.re - x) <= 0.0 && a.re != b.re;
            if !crosses {
                continue;
            }
            let s = (x - a.re) / (b.re - a.re);
            let mut y = a.im + s * (b.im - a.im);
            for _ in 0..20 {
                let (h, _, hy) = map.locus_with_gradient(x, y);
                if hy == 0.0 {
                    break;
                }
                let dy = h / hy;
                y -= dy;
                if dy.abs() <= 1e-15 * y.abs().max(1.0) {
                    break;
                }
            }
            if out.iter().all(|&o: &f64| (o - y).abs() > 1e-9) {
                out.push(y);
            }
        }
        out
    }

    /// Distance from `z` to the curve, measured to the locus itself rather
    /// than to the polyline chords.
    pub fn distance_to(&self, map: &RationalMap, z: ComplexPoint) -> f64 {
        let (mut foot, chord) = nearest_on_polyline(&self.points, z);
        if chord == 0.0 {
            return 0.0;
        }
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        for _ in 0..8 {
            let Some(on) = project(map, foot, 1e-14 * map.length_scale()) else {
                return chord;
            };
            let (_, hx, hy) = map.locus_with_gradient(on.re, on.im);
            let g = (hx * hx + hy * hy).sqrt();
            if g == 0.0 {
                foot = on;
                break;
            }
            let t = Complex64::new(-hy / g, hx / g);
            let d = z - on;
            let along = d.re * t.re + d.im * t.im;
            foot = on + t * along;
            if along.abs() < 1e-15 * map.length_scale() {
                foot = on;
                break;
            }
        }
        let refined = (z - foot).norm();
        // Stay on this curve: endpoints bound the admissible foot points.
        refined
            .min(chord)
            .min((z - first).norm())
            .min((z - last).norm())
    }

    /// Polyline distance (no refinement).
    pub fn polyline_distance(&self, z: ComplexPoint) -> f64 {
        nearest_on_polyline(&self.points, z).1
    }
}

fn nearest_on_polyline(points: &[ComplexPoint], z: ComplexPoint) -> (ComplexPoint, f64) {
    let mut best = (points[0], (z - points[0]).norm());
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ab = b - a;
        let len2 = ab.norm_sqr();
        let s = if len2 == 0.0 {
            0.0
        } else {
            (((z - a) * ab.conj()).re / len2).clamp(0.0, 1.0)
        };
        let p = a + ab * s;
        let d = (z - p).norm();
        if d < best.1 {
            best = (p, d);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocusGraph {
    pub curves: Vec<Curve>,
    pub criticals: Vec<f64>,
}

impl LocusGraph {
    pub fn is_bounded(&self) -> bool {
        self.curves
            .iter()
            .all(|c| matches!(c.end, Endpoint::Critical(_)))
    }

    /// Curve with `j` as one of its endpoints.
    pub fn curve_at(&self, j: usize) -> Option<&Curve> {
        self.curves
            .iter()
            .find(|c| c.start_index == j || c.end == Endpoint::Critical(j))
    }
}

/// Newton projection onto `h = 0` along the gradient.
fn project(map: &RationalMap, z: ComplexPoint, tol: f64) -> Option<ComplexPoint> {
    let mut q = z;
    for _ in 0..MAX_CORRECTOR_ITERS {
        let (h, hx, hy) = map.locus_with_gradient(q.re, q.im);
        let g2 = hx * hx + hy * hy;
        if g2 == 0.0 || !g2.is_finite() {
            return None;
        }
        let delta = Complex64::new(hx, hy) * (h / g2);
        q -= delta;
        if delta.norm() <= tol {
            return Some(q);
        }
    }
    let (h, hx, hy) = map.locus_with_gradient(q.re, q.im);
    let dist = h.abs() / (hx * hx + hy * hy).sqrt();
    (dist <= 1e3 * tol).then_some(q)
}

fn unit_tangent(map: &RationalMap, z: ComplexPoint) -> Option<ComplexPoint> {
    let (_, hx, hy) = map.locus_with_gradient(z.re, z.im);
    let g = (hx * hx + hy * hy).sqrt();
    (g > 0.0 && g.is_finite()).then(|| Complex64::new(-hy / g, hx / g))
}

fn dot(a: ComplexPoint, b: ComplexPoint) -> f64 {
    a.re * b.re + a.im * b.im
}

/// Follows the branch leaving critical point `j` upwards.
fn trace_from(map: &RationalMap, j: usize, opts: &TraceOptions) -> Result<Curve> {
    let crit = map.criticals();
    let d = map.length_scale();
    let s0 = opts.step;
    let tol = 1e-12 * d;
    let start = Complex64::new(crit[j], 0.0);
    let first = project(map, start + Complex64::new(0.0, s0), tol)
        .ok_or_else(|| Error::TraceFailed(format!("cannot leave critical point {}", j + 1)))?;
    let mut points = vec![start, first];
    let mut tangent = Complex64::new(0.0, 1.0);
    let mut s = s0;
    for _ in 0..MAX_STEPS {
        let p = *points.last().unwrap();
        let mut t = unit_tangent(map, p)
            .ok_or_else(|| Error::TraceFailed(format!("degenerate gradient at {p}")))?;
        if dot(t, tangent) < 0.0 {
            t = -t;
        }
        let accepted = project(map, p + t * s, tol).and_then(|q| {
            let chord = q - p;
            let len = chord.norm();
            if len == 0.0 || (q - (p + t * s)).norm() > 0.5 * s {
                return None;
            }
            let c = chord / len;
            let turn = dot(c, t).clamp(-1.0, 1.0).acos();
            let t_new = unit_tangent(map, q)?;
            let t_new = if dot(t_new, t) < 0.0 { -t_new } else { t_new };
            let bend = dot(t_new, t).clamp(-1.0, 1.0).acos();
            (turn <= MAX_TURN && bend <= MAX_TURN).then_some((q, t_new))
        });
        let Some((q, t_new)) = accepted else {
            s *= 0.5;
            if s < MIN_STEP_FRACTION * s0 {
                return Err(Error::TraceFailed(format!(
                    "step underflow near {p} on branch from {}",
                    j + 1
                )));
            }
            continue;
        };
        tangent = t_new;
        s = (s * 1.5).min(s0);
        if !opts.bbox.contains(q) {
            points.push(q);
            return Ok(Curve {
                points,
                start_index: j,
                end: Endpoint::Unbounded,
            });
        }
        if q.im < s0 && points.len() > 3 {
            let (k, dist) = crit
                .iter()
                .enumerate()
                .map(|(k, &x)| (k, (q - x).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if dist <= 10.0 * s0 && k != j {
                points.push(q);
                points.push(Complex64::new(crit[k], 0.0));
                return Ok(Curve {
                    points,
                    start_index: j,
                    end: Endpoint::Critical(k),
                });
            }
            if q.im <= 0.0 {
                return Err(Error::TraceFailed(format!(
                    "branch from {} reached the real axis away from critical points at {}",
                    j + 1,
                    q.re
                )));
            }
        }
        points.push(q);
    }
    Err(Error::TraceFailed(format!(
        "branch from {} did not terminate",
        j + 1
    )))
}

/// Traces every branch of the real locus in the upper half-plane.
pub fn trace(map: &RationalMap, opts: &TraceOptions) -> Result<LocusGraph> {
    if opts.step <= 0.0 {
        return Err(Error::InvalidInput("step must be positive".to_string()));
    }
    let m = map.criticals().len();
    let branches: Vec<Result<Curve>> = (0..m)
        .into_par_iter()
        .map(|j| trace_from(map, j, opts))
        .collect();
    let branches: Vec<Curve> = branches.into_iter().collect::<Result<_>>()?;
    for c in &branches {
        if let Endpoint::Critical(k) = c.end {
            if branches[k].end != Endpoint::Critical(c.start_index) {
                return Err(Error::TraceFailed(format!(
                    "branches from {} and {} disagree",
                    c.start_index + 1,
                    k + 1
                )));
            }
        }
    }
    let curves: Vec<Curve> = branches
        .into_iter()
        .filter(|c| match c.end {
            Endpoint::Critical(k) => k > c.start_index,
            Endpoint::Unbounded => true,
        })
        .collect();
    Ok(LocusGraph {
        curves,
        criticals: map.criticals().to_vec(),
    })
}

/// Reads the link pattern off a traced graph.
pub fn classify(graph: &LocusGraph) -> Result<LinkPattern> {
    if !graph.is_bounded() {
        return Err(Error::UnboundedBranch);
    }
    let m = graph.criticals.len();
    let mut used = vec![false; m];
    let mut pairs = Vec::new();
    for c in &graph.curves {
        let Endpoint::Critical(k) = c.end else {
            unreachable!()
        };
        if used[c.start_index] || used[k] {
            return Err(Error::TraceFailed(format!(
                "critical point reached twice ({} - {})",
                c.start_index + 1,
                k + 1
            )));
        }
        used[c.start_index] = true;
        used[k] = true;
        pairs.push((c.start_index, k));
    }
    if used.iter().any(|u| !u) {
        return Err(Error::TraceFailed(
            "some critical point is not an endpoint".to_string(),
        ));
    }
    let pattern = LinkPattern::unchecked(pairs);
    if !pattern.is_non_crossing() {
        return Err(Error::CrossingPattern);
    }
    Ok(pattern)
}

/// Traces and classifies with default options.
pub fn trace_pattern(map: &RationalMap) -> Result<(LocusGraph, LinkPattern)> {
    let graph = trace(map, &TraceOptions::for_map(map))?;
    let pattern = classify(&graph)?;
    Ok((graph, pattern))
}

/// True when two polylines come closer than `tol`.
pub fn curves_cross(a: &Curve, b: &Curve, tol: f64) -> bool {
    const CHUNK: usize = 64;
    let boxes = |pts: &[ComplexPoint]| -> Vec<(usize, usize, [f64; 4])> {
        let last = pts.len().saturating_sub(1);
        (0..last)
            .step_by(CHUNK)
            .map(|s| {
                let e = (s + CHUNK).min(last);
                let mut bb = [
                    f64::INFINITY,
                    f64::NEG_INFINITY,
                    f64::INFINITY,
                    f64::NEG_INFINITY,
                ];
                for p in &pts[s..=e] {
                    bb = [
                        bb[0].min(p.re),
                        bb[1].max(p.re),
                        bb[2].min(p.im),
                        bb[3].max(p.im),
                    ];
                }
                (s, e, bb)
            })
            .collect()
    };
    let (ba, bb) = (boxes(&a.points), boxes(&b.points));
    for &(sa, ea, ra) in &ba {
        for &(sb, eb, rb) in &bb {
            if ra[0] - tol > rb[1]
                || rb[0] - tol > ra[1]
                || ra[2] - tol > rb[3]
                || rb[2] - tol > ra[3]
            {
                continue;
            }
            for wa in a.points[sa..=ea].windows(2) {
                for wb in b.points[sb..=eb].windows(2) {
                    if segment_distance(wa[0], wa[1], wb[0], wb[1]) < tol {
                        return true;
                    }
                }
            }
        }
    }
    false
}

fn segment_distance(a: ComplexPoint, b: ComplexPoint, c: ComplexPoint, d: ComplexPoint) -> f64 {
    let cross = |o: ComplexPoint, p: ComplexPoint, q: ComplexPoint| ((p - o) * (q - o).conj()).im;
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    let pd =
        |p: ComplexPoint, s0: ComplexPoint, s1: ComplexPoint| nearest_on_polyline(&[s0, s1], p).1;
    pd(a, c, d)
        .min(pd(b, c, d))
        .min(pd(c, a, b))
        .min(pd(d, a, b))
}

/// Ordinates of the closed-form loci at the configuration `(-3, 0, 1, 2)`.
pub mod closed_form {
    use crate::error::{Error, Result};

    /// Neighbor locus over `[-3, 0]` and `[1, 2]`.
    pub fn neighbor(x: f64) -> Result<f64> {
        if !((-3.0..=0.0).contains(&x) || (1.0..=2.0).contains(&x)) {
            return Err(Error::OutOfRange(format!(
                "abscissa {x} outside [-3,0] and [1,2]"
            )));
        }
        let inner = 49.0 + 24.0 * x * (-9.0 + 14.0 * x);
        let v = (-7.0 - 6.0 * x * x + inner.sqrt()) / 6.0;
        Ok(v.max(0.0).sqrt())
    }

    /// Outer rainbow curve over `[-3, 2]`.
    pub fn rainbow_outer(x: f64) -> Result<f64> {
        if !(-3.0..=2.0).contains(&x) {
            return Err(Error::OutOfRange(format!("abscissa {x} outside [-3,2]")));
        }
        let v = -x * x + 0.5 * (7.0 + (49.0 - 24.0 * x).sqrt());
        Ok(v.max(0.0).sqrt())
    }

    /// Inner rainbow curve over `[0, 1]`.
    pub fn rainbow_inner(x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfRange(format!("abscissa {x} outside [0,1]")));
        }
        let v = -x * x + 0.5 * (7.0 - (49.0 - 24.0 * x).sqrt());
        Ok(v.max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;

    fn circle() -> RationalMap {
        RationalMap::new(
            Polynomial::new(vec![1.0, 0.0, 1.0]),
            Polynomial::new(vec![0.0, 1.0]),
        )
        .unwrap()
    }

    fn neighbor() -> RationalMap {
        RationalMap::new(
            Polynomial::new(vec![-3.0, 0.0, 0.0, 1.0]),
            Polynomial::new(vec![-7.0, 0.0, 3.0]),
        )
        .unwrap()
    }

    fn rainbow() -> RationalMap {
        RationalMap::new(
            Polynomial::new(vec![-3.0, 7.0, 0.0, 1.0]),
            Polynomial::new(vec![0.0, 0.0, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn circle_is_the_unit_semicircle() {
        let map = circle();
        let (graph, pattern) = trace_pattern(&map).unwrap();
        assert_eq!(pattern, LinkPattern::neighbor(1));
        assert_eq!(graph.curves.len(), 1);
        let worst = graph.curves[0]
            .points
            .iter()
            .map(|z| (z.norm() - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn hyperbola_branches_are_unbounded() {
        let map = RationalMap::polynomial(Polynomial::new(vec![0.0, -3.0, 0.0, 1.0])).unwrap();
        let opts = TraceOptions {
            step: 2e-3,
            bbox: BBox {
                xmin: -5.0,
                xmax: 5.0,
                ymin: 0.0,
                ymax: 5.0,
            },
        };
        let graph = trace(&map, &opts).unwrap();
        assert_eq!(graph.curves.len(), 2);
        assert!(!graph.is_bounded());
        assert_eq!(classify(&graph), Err(Error::UnboundedBranch));
        for c in &graph.curves {
            for z in &c.points[1..] {
                let (x, y) = (z.re, z.im);
                let grad = (36.0 * x * x + 4.0 * y * y).sqrt();
                assert!((y * y - 3.0 * (x * x - 1.0)).abs() / grad < 1e-6);
            }
        }
    }

    #[test]
    fn n2_patterns_and_closed_forms() {
        let map = neighbor();
        let (graph, pattern) = trace_pattern(&map).unwrap();
        assert_eq!(pattern, LinkPattern::neighbor(2));
        for x in [-2.5, -1.0, -0.2, 1.5] {
            let c = graph.curve_at(if x < 0.5 { 0 } else { 2 }).unwrap();
            let y = c.ordinates_at(&map, x);
            assert_eq!(y.len(), 1);
            assert!((y[0] - closed_form::neighbor(x).unwrap()).abs() < 1e-9);
        }

        let map = rainbow();
        let (graph, pattern) = trace_pattern(&map).unwrap();
        assert_eq!(pattern, LinkPattern::rainbow(2));
        let outer = graph.curve_at(0).unwrap();
        let y = outer.ordinates_at(&map, 0.0);
        assert!((y[0] - 7f64.sqrt()).abs() < 1e-9);
        let inner = graph.curve_at(1).unwrap();
        let y = inner.ordinates_at(&map, 0.5);
        assert!((y[0] - closed_form::rainbow_inner(0.5).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(closed_form::neighbor(-3.0).unwrap(), 0.0);
        assert!((closed_form::rainbow_outer(0.0).unwrap() - 7f64.sqrt()).abs() < 1e-15);
        assert!(closed_form::neighbor(0.5).is_err());
        // y^2 = (-7 - 13.5 + sqrt(49 + 36 * 12)) / 6 at x = 1.5
        let y = closed_form::neighbor(1.5).unwrap();
        assert!((y * y - (-20.5 + 481f64.sqrt()) / 6.0).abs() < 1e-14);
    }

    #[test]
    fn distance_is_measured_to_the_locus() {
        let map = circle();
        let graph = trace(&map, &TraceOptions::for_map(&map)).unwrap();
        let c = &graph.curves[0];
        let z = Complex64::from_polar(1.0 + 1e-7, 1.0);
        let d = c.distance_to(&map, z);
        assert!((d - 1e-7).abs() < 1e-10, "{d}");
    }
}
