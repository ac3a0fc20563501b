use std::path::Path;

use serde::{Deserialize, Serialize};
use sle0::loewner::SpeedSchedule;
use sle0::verify::default_tracked;
use sle0::{Complex64, Configuration, LinkPattern};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternSpec {
    Named(String),
    Pairs(Vec<[usize; 2]>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NuSpec {
    Constant(f64),
    PerIndex(Vec<f64>),
    Piecewise {
        starts: Vec<f64>,
        speeds: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            csv: true,
            json: true,
            svg: false,
        }
    }
}

/// Job description as read from `--config`; every field is optional so
/// that flags can fill in or override it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub x: Option<Vec<f64>>,
    pub pattern: Option<PatternSpec>,
    pub nu: Option<NuSpec>,
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub tracked: Option<Vec<[f64; 2]>>,
    pub outputs: Option<Outputs>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

impl JobConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| input(format!("config: {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| input(format!("config: {e}")))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overridden_by(self, other: JobConfig) -> JobConfig {
        JobConfig {
            x: other.x.or(self.x),
            pattern: other.pattern.or(self.pattern),
            nu: other.nu.or(self.nu),
            t_end: other.t_end.or(self.t_end),
            dt: other.dt.or(self.dt),
            tracked: other.tracked.or(self.tracked),
            outputs: other.outputs.or(self.outputs),
            seed: other.seed.or(self.seed),
            budget: other.budget.or(self.budget),
        }
    }

    pub fn configuration(&self) -> Result<Configuration, CliError> {
        let x = self
            .x
            .clone()
            .ok_or_else(|| input("x: missing (use --x or a config file)"))?;
        Configuration::new(x).map_err(|e| input(e.to_string()))
    }

    /// `None` selects every pattern.
    pub fn patterns(&self, n: usize) -> Result<Option<Vec<LinkPattern>>, CliError> {
        match &self.pattern {
            None => Ok(None),
            Some(PatternSpec::Named(s)) => match s.as_str() {
                "all" => Ok(None),
                "neighbor" => Ok(Some(vec![LinkPattern::neighbor(n)])),
                "rainbow" => Ok(Some(vec![LinkPattern::rainbow(n)])),
                other => Err(input(format!("pattern: unknown name {other:?}"))),
            },
            Some(PatternSpec::Pairs(pairs)) => {
                let p = LinkPattern::from_one_based(pairs)
                    .map_err(|e| input(format!("pattern: {e}")))?;
                if p.n() != n {
                    return Err(input(format!(
                        "pattern: has {} pairs but x has {} points",
                        p.n(),
                        2 * n
                    )));
                }
                Ok(Some(vec![p]))
            }
        }
    }

    pub fn single_pattern(&self, n: usize) -> Result<LinkPattern, CliError> {
        match self.patterns(n)? {
            Some(mut v) if v.len() == 1 => Ok(v.remove(0)),
            _ => Err(input("pattern: evolve needs an explicit pattern")),
        }
    }

    pub fn schedule(&self, points: usize) -> Result<SpeedSchedule, CliError> {
        let s = match self.nu.clone().unwrap_or(NuSpec::Constant(0.25)) {
            NuSpec::Constant(v) => SpeedSchedule::Constant(vec![v; points]),
            NuSpec::PerIndex(v) => SpeedSchedule::Constant(v),
            NuSpec::Piecewise { starts, speeds } => SpeedSchedule::Piecewise { starts, speeds },
        };
        s.validate(Some(points)).map_err(|e| input(e.to_string()))?;
        Ok(s)
    }

    pub fn t_end(&self, default: f64) -> Result<f64, CliError> {
        positive("T", self.t_end.unwrap_or(default))
    }

    pub fn dt(&self) -> Result<f64, CliError> {
        positive("dt", self.dt.unwrap_or(sle0::loewner::DEFAULT_DT))
    }

    pub fn tracked(&self) -> Result<Vec<Complex64>, CliError> {
        let Some(t) = &self.tracked else {
            return Ok(default_tracked());
        };
        t.iter()
            .map(|&[re, im]| {
                if im > 0.0 && re.is_finite() && im.is_finite() {
                    Ok(Complex64::new(re, im))
                } else {
                    Err(input(format!(
                        "tracked: ({re}, {im}) is not in the upper half-plane"
                    )))
                }
            })
            .collect()
    }

    pub fn outputs(&self) -> Outputs {
        self.outputs.unwrap_or_default()
    }

    pub fn solve_options(&self) -> sle0::poles::SolveOptions {
        let d = sle0::poles::SolveOptions::default();
        sle0::poles::SolveOptions {
            seed: self.seed.unwrap_or(d.seed),
            budget: self.budget.unwrap_or(d.budget),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(input(format!("{name}: must be positive, got {v}")))
    }
}

pub fn parse_list(field: &str, s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| input(format!("{field}: cannot parse {t:?} as a number")))
        })
        .collect()
}

pub fn parse_pattern(s: &str) -> Result<PatternSpec, CliError> {
    if s.trim_start().starts_with('[') {
        serde_json::from_str::<Vec<[usize; 2]>>(s)
            .map(PatternSpec::Pairs)
            .map_err(|e| input(format!("pattern: {e}")))
    } else {
        Ok(PatternSpec::Named(s.trim().to_string()))
    }
}

pub fn parse_nu(s: &str) -> Result<NuSpec, CliError> {
    if s.trim_start().starts_with('{') {
        return serde_json::from_str(s).map_err(|e| input(format!("nu: {e}")));
    }
    let v = parse_list("nu", s)?;
    Ok(if v.len() == 1 {
        NuSpec::Constant(v[0])
    } else {
        NuSpec::PerIndex(v)
    })
}

pub fn parse_tracked(s: &str) -> Result<Vec<[f64; 2]>, CliError> {
    serde_json::from_str(s).map_err(|e| input(format!("tracked: {e}")))
}

pub fn parse_outputs(s: &str) -> Result<Outputs, CliError> {
    let mut o = Outputs {
        csv: false,
        json: false,
        svg: false,
    };
    for t in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match t {
            "csv" => o.csv = true,
            "json" => o.json = true,
            "svg" => o.svg = true,
            other => return Err(input(format!("outputs: unknown format {other:?}"))),
        }
    }
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_shape() {
        let c: JobConfig = serde_json::from_str(
            r#"{"x": [-3, 0, 1, 2], "pattern": [[1, 2], [3, 4]], "nu": 0.25, "T": 1.0, "dt": 1e-4,
                "tracked": [[1, 2], [0, 3]], "outputs": {"csv": true, "svg": true}, "seed": 3}"#,
        )
        .unwrap();
        assert_eq!(c.single_pattern(2).unwrap(), LinkPattern::neighbor(2));
        assert_eq!(c.schedule(4).unwrap().at(0.0), &[0.25; 4]);
        assert_eq!(c.tracked().unwrap().len(), 2);
        assert!(c.outputs().json);
        let p: JobConfig =
            serde_json::from_str(r#"{"nu": {"starts": [0, 0.5], "speeds": [[1, 0], [0, 1]]}}"#)
                .unwrap();
        assert!(matches!(p.nu, Some(NuSpec::Piecewise { .. })));
        assert!(serde_json::from_str::<JobConfig>(r#"{"y": 1}"#).is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = JobConfig {
            x: Some(vec![-1.0, 1.0]),
            seed: Some(4),
            ..Default::default()
        };
        let flags = JobConfig {
            x: Some(vec![0.0, 2.0]),
            ..Default::default()
        };
        let merged = file.overridden_by(flags);
        assert_eq!(merged.x, Some(vec![0.0, 2.0]));
        assert_eq!(merged.seed, Some(4));
    }

    #[test]
    fn validation_names_the_field() {
        let c = JobConfig {
            x: Some(vec![1.0, 1.0]),
            ..Default::default()
        };
        let CliError::Input(msg) = c.configuration().unwrap_err() else {
            panic!()
        };
        assert!(msg.contains("x must be strictly increasing"), "{msg}");
        let CliError::Input(msg) = parse_pattern("[[1,3],[2,4]]")
            .and_then(|p| {
                JobConfig {
                    pattern: Some(p),
                    ..Default::default()
                }
                .patterns(2)
            })
            .unwrap_err()
        else {
            panic!()
        };
        assert!(msg.starts_with("pattern:"), "{msg}");
    }
}
