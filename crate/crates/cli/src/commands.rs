use std::path::Path;

use rayon::prelude::*;
use sle0::locus::{trace, Endpoint, LocusGraph, TraceOptions};
use sle0::loewner::{evolve_solution, FlowOptions, LoewnerTrajectory};
use sle0::nullvec::null_vector_solution;
use sle0::poles::{enumerate, solve_pattern, Enumeration, Solution};
use sle0::verify::VerifyOptions;
use sle0::{Configuration, LinkPattern};

use crate::config::{JobConfig, NuSpec};
use crate::output::{
    validated_json, CurveEntry, EvolveDoc, LocusDoc, LocusEntry, NullVecDoc, NullVecEntry,
    PoleEntry, PolesDoc, Series,
};
use crate::svg::Scene;
use crate::{write_file, CliError};

/// Default final time of the flow checks run by `verify`.
const VERIFY_T: f64 = 0.05;

fn emit(json: &str, out: Option<&Path>, job: &JobConfig, name: &str) -> Result<(), CliError> {
    println!("{json}");
    if let Some(dir) = out {
        if job.outputs().json {
            write_file(dir, name, &format!("{json}\n"))?;
        }
    }
    Ok(())
}

/// Enumerated solutions restricted to the requested patterns.
fn selected(
    job: &JobConfig,
    cfg: &Configuration,
) -> Result<(Enumeration, Vec<Solution>), CliError> {
    let en = enumerate(cfg, &job.solve_options())?;
    let wanted = job.patterns(cfg.n())?;
    let mut chosen: Vec<Solution> = en.solutions.clone();
    if let Some(w) = &wanted {
        chosen.retain(|s| w.contains(&s.pattern));
        if let Some(missing) = w.iter().find(|p| !chosen.iter().any(|s| &s.pattern == *p)) {
            return Err(CliError::Incomplete(format!("pattern {missing} not found")));
        }
    }
    Ok((en, chosen))
}

fn require_complete(en: &Enumeration) -> Result<(), CliError> {
    if en.is_complete() {
        Ok(())
    } else {
        Err(CliError::Incomplete(format!(
            "found {} of {} solutions",
            en.solutions.len(),
            en.expected
        )))
    }
}

pub fn poles(job: &JobConfig, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = job.configuration()?;
    let (en, chosen) = selected(job, &cfg)?;
    let doc = PolesDoc {
        x: cfg.x().to_vec(),
        complete: en.is_complete(),
        expected: en.expected,
        solutions: chosen
            .iter()
            .map(|s| PoleEntry {
                zeta: s.poles.zeta.clone(),
                pattern: s.pattern.clone(),
                residual: s.poles.residual,
                generic: s.poles.generic,
            })
            .collect(),
    };
    emit(&validated_json(&doc)?, out, job, "poles.json")?;
    require_complete(&en)
}

pub fn nullvec(job: &JobConfig, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = job.configuration()?;
    let (en, chosen) = selected(job, &cfg)?;
    let doc = NullVecDoc {
        x: cfg.x().to_vec(),
        solutions: chosen
            .iter()
            .map(|s| {
                let nv = null_vector_solution(&cfg, s);
                NullVecEntry {
                    pattern: s.pattern.clone(),
                    u: nv.u,
                    z_log: nv.z_log.is_finite().then_some(nv.z_log),
                    nv_residual: nv.nv_residual,
                    cwi_residual: nv.cwi_residual,
                }
            })
            .collect(),
    };
    emit(&validated_json(&doc)?, out, job, "nullvec.json")?;
    require_complete(&en)
}

fn curve_rows(graphs: &[LocusGraph]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Internal(e.to_string());
    w.write_record(["curve_id", "re", "im"]).map_err(err)?;
    let mut id = 0;
    for g in graphs {
        for c in &g.curves {
            for p in &c.points {
                w.write_record([id.to_string(), p.re.to_string(), p.im.to_string()])
                    .map_err(err)?;
            }
            id += 1;
        }
    }
    String::from_utf8(
        w.into_inner()
            .map_err(|e| CliError::Internal(e.to_string()))?,
    )
    .map_err(|e| CliError::Internal(e.to_string()))
}

fn scene(sol: &Solution, graph: &LocusGraph) -> Scene {
    Scene {
        curves: graph.curves.iter().map(|c| c.points.clone()).collect(),
        overlays: Vec::new(),
        criticals: graph.criticals.clone(),
        poles: sol
            .poles
            .zeta
            .iter()
            .filter(|z| z.im >= 0.0)
            .copied()
            .collect(),
    }
}

pub fn locus(job: &JobConfig, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = job.configuration()?;
    let (en, chosen) = selected(job, &cfg)?;
    let graphs: Vec<LocusGraph> = chosen
        .par_iter()
        .map(|s| trace(&s.map, &TraceOptions::for_map(&s.map)))
        .collect::<Result<_, _>>()?;
    let mut id = 0;
    let doc = LocusDoc {
        x: cfg.x().to_vec(),
        solutions: chosen
            .iter()
            .zip(&graphs)
            .map(|(s, g)| LocusEntry {
                pattern: s.pattern.clone(),
                curves: g
                    .curves
                    .iter()
                    .map(|c| {
                        id += 1;
                        CurveEntry {
                            curve_id: id - 1,
                            start: c.start_index + 1,
                            end: match c.end {
                                Endpoint::Critical(e) => Some(e + 1),
                                Endpoint::Unbounded => None,
                            },
                            points: c.points.len(),
                        }
                    })
                    .collect(),
            })
            .collect(),
    };
    emit(&validated_json(&doc)?, out, job, "locus.json")?;
    if let Some(dir) = out {
        let o = job.outputs();
        if o.csv {
            write_file(dir, "locus.csv", &curve_rows(&graphs)?)?;
        }
        if o.svg {
            for (k, (s, g)) in chosen.iter().zip(&graphs).enumerate() {
                write_file(dir, &format!("locus-{}.svg", k + 1), &scene(s, g).render())?;
            }
        }
    }
    require_complete(&en)
}

fn trajectory_rows(traj: &LoewnerTrajectory) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Internal(e.to_string());
    w.write_record(["t", "kind", "index", "re", "im"])
        .map_err(err)?;
    for s in &traj.samples {
        let t = s.t.to_string();
        let mut row = |kind: &str, i: usize, re: f64, im: f64| {
            w.write_record([
                t.as_str(),
                kind,
                &i.to_string(),
                &re.to_string(),
                &im.to_string(),
            ])
        };
        for (i, &x) in s.x.iter().enumerate() {
            row("x", i + 1, x, 0.0).map_err(err)?;
        }
        for (i, z) in s.xi.iter().enumerate() {
            row("xi", i + 1, z.re, z.im).map_err(err)?;
        }
        for (i, z) in s.tips.iter().enumerate() {
            row("tip", i + 1, z.re, z.im).map_err(err)?;
        }
        for (i, p) in s.tracked.iter().enumerate().filter(|(_, p)| p.alive) {
            row("tracked", i + 1, p.gz.re, p.gz.im).map_err(err)?;
        }
    }
    String::from_utf8(
        w.into_inner()
            .map_err(|e| CliError::Internal(e.to_string()))?,
    )
    .map_err(|e| CliError::Internal(e.to_string()))
}

pub fn evolve(job: &JobConfig, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = job.configuration()?;
    let alpha: LinkPattern = job.single_pattern(cfg.n())?;
    let schedule = job.schedule(cfg.x().len())?;
    let t_end = job.t_end(1.0)?;
    let dt = job.dt()?;
    let sol = solve_pattern(&cfg, &alpha, &job.solve_options())?;
    let traj = evolve_solution(
        &sol,
        &schedule,
        &FlowOptions::new(t_end, dt, job.tracked()?),
    )
    .map_err(|e| match e {
        sle0::Error::StepSizeUnderflow { t } => CliError::Integration(format!(
            "step size fell below the floor; last good time t = {t}"
        )),
        other => other.into(),
    })?;
    let last = traj.last();
    let doc = EvolveDoc {
        x0: cfg.x().to_vec(),
        pattern: alpha,
        t_end,
        dt,
        final_t: last.t,
        status: last.status,
        tau0_events: traj.tau0_events,
        stopped_at_tau: traj.stopped_at_tau,
        max_n_drift: traj.max_n_drift(),
        stale_tips: traj
            .samples
            .iter()
            .map(|s| s.stale.iter().filter(|b| **b).count())
            .sum(),
        samples: traj.samples.len(),
        series: Series {
            t: traj.diagnostics.iter().map(|d| d.t).collect(),
            n_drift: traj.diagnostics.iter().map(|d| d.n_drift).collect(),
            s: traj
                .diagnostics
                .iter()
                .map(|d| d.s.iter().take(4).copied().collect())
                .collect(),
        },
    };
    emit(&validated_json(&doc)?, out, job, "evolve.json")?;
    if let Some(dir) = out {
        let o = job.outputs();
        if o.csv {
            write_file(dir, "evolve.csv", &trajectory_rows(&traj)?)?;
        }
        if o.svg {
            let graph = trace(&sol.map, &TraceOptions::for_map(&sol.map))?;
            let mut sc = scene(&sol, &graph);
            sc.overlays = (0..cfg.x().len())
                .map(|j| traj.samples.iter().map(|s| s.tips[j]).collect())
                .collect();
            write_file(dir, "evolve.svg", &sc.render())?;
        }
    }
    Ok(())
}

pub fn verify(job: &JobConfig, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = job.configuration()?;
    let nu = match &job.nu {
        None => 0.25,
        Some(NuSpec::Constant(v)) if v.is_finite() && *v >= 0.0 => *v,
        Some(_) => {
            return Err(CliError::Input(
                "nu: verify takes one non-negative constant speed".to_string(),
            ))
        }
    };
    let opts = VerifyOptions {
        solve: job.solve_options(),
        patterns: job.patterns(cfg.n())?,
        nu,
        t_end: job.t_end(VERIFY_T)?,
        dt: job.dt()?,
        tracked: job.tracked()?,
    };
    let report = sle0::verify::verify(&cfg, &opts)?;
    emit(&validated_json(&report)?, out, job, "verify.json")?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::VerifyFailed)
    }
}
