//! Resolution of a `plan` invocation into loaded, validated inputs.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::benchmark::Method;
use crate::cdf::{load_field_for_scene, CdfField};
use crate::error::{Error, Result};
use crate::io::plot::PlotOptions;
use crate::params::Hyperparameters;
use crate::robot::{Configuration, Scene};

/// Contact-grid settings used when no field file is given.
pub const DEFAULT_GRID: usize = 200;
pub const DEFAULT_REFINE_TOL: f64 = 1e-4;

/// Raw `plan` arguments as typed on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRequest {
    /// `None` selects the built-in two-link scene.
    pub scene: Option<PathBuf>,
    /// `None` builds the field from the scene.
    pub field: Option<PathBuf>,
    pub method: String,
    pub params: Option<PathBuf>,
    pub seed: u64,
    pub start: String,
    pub goal: String,
    pub out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    pub plot_resolution: Option<usize>,
    pub value_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scene: Scene,
    pub field: CdfField,
    pub method: Method,
    pub params: Hyperparameters,
    pub seed: u64,
    pub start: Configuration,
    pub goal: Configuration,
    pub out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    pub plot_options: PlotOptions,
}

#[derive(Serialize)]
struct Echo<'a> {
    method: Method,
    seed: u64,
    start: &'a [f64],
    goal: &'a [f64],
    params: &'a Hyperparameters,
}

/// Comma-separated floats, e.g. `"2.1,-0.9"`.
pub fn parse_vector(text: &str) -> std::result::Result<Vec<f64>, String> {
    if text.trim().is_empty() {
        return Err("empty vector".into());
    }
    text.split(',')
        .map(|s| {
            let s = s.trim();
            match s.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(format!("{s:?} is not a finite number")),
            }
        })
        .collect()
}

pub fn load_params(path: Option<&Path>) -> Result<Hyperparameters> {
    match path {
        None => Ok(Hyperparameters::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Hyperparameters::from_json(&text)
        }
    }
}

pub fn load_scene(path: Option<&Path>) -> Result<Scene> {
    match path {
        None => Ok(Scene::two_link_benchmark()),
        Some(p) => Scene::load(p),
    }
}

/// Loads the field from `path`, or builds one for `scene` with the default grid.
pub fn load_or_build_field(path: Option<&Path>, scene: &Scene) -> Result<CdfField> {
    match path {
        Some(p) => load_field_for_scene(p, scene),
        None => {
            log::info!(
                "building field with grid {DEFAULT_GRID} and tolerance {DEFAULT_REFINE_TOL:e}"
            );
            CdfField::build(scene, DEFAULT_GRID, DEFAULT_REFINE_TOL)
        }
    }
}

fn note(problems: &mut Vec<String>, what: &str, e: &dyn std::fmt::Display) {
    problems.push(format!("{what}: {e}"));
}

impl RunConfig {
    /// Every problem in `req` is collected into one [`Error::Config`].
    pub fn resolve(req: &RunRequest) -> Result<RunConfig> {
        let mut problems = Vec::new();

        let method = req
            .method
            .parse::<Method>()
            .map_err(|e| note(&mut problems, "method", &e))
            .ok();
        let scene = load_scene(req.scene.as_deref())
            .map_err(|e| note(&mut problems, "scene", &e))
            .ok();
        let params = load_params(req.params.as_deref())
            .map_err(|e| note(&mut problems, "params", &e))
            .ok();
        let start = parse_vector(&req.start)
            .map_err(|e| note(&mut problems, "start", &e))
            .ok();
        let goal = parse_vector(&req.goal)
            .map_err(|e| note(&mut problems, "goal", &e))
            .ok();

        if let Some(scene) = &scene {
            for (name, v) in [("start", &start), ("goal", &goal)] {
                if let Some(v) = v {
                    if v.len() != scene.dim() {
                        note(
                            &mut problems,
                            name,
                            &Error::DimensionMismatch {
                                expected: scene.dim(),
                                actual: v.len(),
                            },
                        );
                    }
                }
            }
            if let Some(params) = &params {
                for p in params.problems(Some(scene.dim())) {
                    note(&mut problems, "params", &p);
                }
            }
        }
        if req.plot_resolution == Some(0) {
            note(&mut problems, "plot resolution", &"must be positive");
        }
        if let Some((lo, hi)) = req.value_range {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                note(
                    &mut problems,
                    "value range",
                    &format!("[{lo}, {hi}] is not an interval"),
                );
            }
        }
        if let Some(p) = &req.field {
            if !p.exists() {
                note(
                    &mut problems,
                    "field",
                    &format!("{} does not exist", p.display()),
                );
            }
        }
        let field = match (&scene, problems.is_empty()) {
            (Some(scene), true) => load_or_build_field(req.field.as_deref(), scene)
                .map_err(|e| note(&mut problems, "field", &e))
                .ok(),
            _ => None,
        };

        match (method, scene, params, start, goal, field) {
            (Some(method), Some(scene), Some(params), Some(start), Some(goal), Some(field))
                if problems.is_empty() =>
            {
                Ok(RunConfig {
                    scene,
                    field,
                    method,
                    params,
                    seed: req.seed,
                    start: Configuration::from_vec(start),
                    goal: Configuration::from_vec(goal),
                    out: req.out.clone(),
                    plot: req.plot.clone(),
                    plot_options: PlotOptions {
                        resolution: req
                            .plot_resolution
                            .unwrap_or(PlotOptions::default().resolution),
                        value_range: req.value_range,
                    },
                })
            }
            _ => Err(Error::Config(problems)),
        }
    }

    /// Resolved settings, including every default that was filled in.
    pub fn echo(&self) -> String {
        serde_json::to_string_pretty(&Echo {
            method: self.method,
            seed: self.seed,
            start: self.start.as_slice(),
            goal: self.goal.as_slice(),
            params: &self.params,
        })
        .expect("echo serializes")
    }

    /// Integration step of the selected method.
    pub fn dt(&self) -> f64 {
        match self.method {
            Method::Ours | Method::Random => self.params.ours.dt,
            Method::Mppi => self.params.mppi.dt,
            Method::Qp => self.params.qp.dt,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req() -> RunRequest {
        RunRequest {
            method: "ours".into(),
            start: "2.1,1.2".into(),
            goal: "-2.1,-0.9".into(),
            ..RunRequest::default()
        }
    }

    fn problems(r: &RunRequest) -> Vec<String> {
        match RunConfig::resolve(r) {
            Err(Error::Config(list)) => list,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn vectors() {
        assert_eq!(parse_vector(" 1.5, -2 ").unwrap(), vec![1.5, -2.0]);
        assert!(parse_vector("").is_err());
        assert!(parse_vector("1,,2").is_err());
        assert!(parse_vector("1,nan").is_err());
    }

    #[test]
    fn misspelled_method_lists_valid_ones() {
        let list = problems(&RunRequest {
            method: "our".into(),
            ..req()
        });
        assert_eq!(list.len(), 1, "{list:?}");
        assert!(list[0].contains("ours, mppi, qp, random"), "{}", list[0]);
    }

    #[test]
    fn start_dimension_must_match_scene() {
        let list = problems(&RunRequest {
            start: "1,2,3".into(),
            ..req()
        });
        assert!(
            list.iter()
                .any(|p| p.starts_with("start") && p.contains("expected 2, got 3")),
            "{list:?}"
        );
    }

    #[test]
    fn all_problems_are_reported_together() {
        let list = problems(&RunRequest {
            method: "nope".into(),
            start: "x".into(),
            goal: "1".into(),
            params: Some("/nonexistent/params.json".into()),
            field: Some("/nonexistent/field.cdf".into()),
            plot_resolution: Some(0),
            ..req()
        });
        for key in [
            "method",
            "start",
            "goal",
            "params",
            "field",
            "plot resolution",
        ] {
            assert!(
                list.iter().any(|p| p.starts_with(key)),
                "{key} missing from {list:?}"
            );
        }
    }
}
