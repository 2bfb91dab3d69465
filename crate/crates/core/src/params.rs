//! Hyperparameter document shared by the CLI and the benchmark.
//!
//! Field names follow the usual notation (`N`, `H`, `H_diag`, ...). Every
//! field is optional and defaults to the two-link settings; unknown fields
//! are rejected.

use serde::{Deserialize, Serialize};

use crate::baselines::horizon::{HorizonMppiParams, StageWeights};
use crate::baselines::qp::QpParams;
use crate::error::{Error, Result};
use crate::planner::{AngleCostParams, MppiParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OneStepConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub d_act: f64,
    #[serde(rename = "N")]
    pub num_samples: usize,
    pub beta: f64,
    pub alpha_mu: f64,
    pub alpha_sigma: f64,
    pub dt: f64,
    pub max_steps: usize,
    pub allow_range: f64,
    pub sigma_floor: f64,
    pub sigma_init: f64,
    pub u_max: f64,
}

impl Default for OneStepConfig {
    fn default() -> Self {
        let c = AngleCostParams::default();
        let p = MppiParams::default();
        OneStepConfig {
            alpha1: c.alpha1,
            alpha2: c.alpha2,
            d_act: c.d_act,
            num_samples: p.num_samples,
            beta: p.beta,
            alpha_mu: p.alpha_mu,
            alpha_sigma: p.alpha_sigma,
            dt: p.dt,
            max_steps: p.max_steps,
            allow_range: p.allow_range,
            sigma_floor: p.sigma_floor,
            sigma_init: p.sigma_init,
            u_max: p.u_max,
        }
    }
}

impl OneStepConfig {
    pub fn cost(&self) -> AngleCostParams {
        AngleCostParams {
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            d_act: self.d_act,
        }
    }

    pub fn params(&self) -> MppiParams {
        MppiParams {
            num_samples: self.num_samples,
            beta: self.beta,
            alpha_mu: self.alpha_mu,
            alpha_sigma: self.alpha_sigma,
            dt: self.dt,
            max_steps: self.max_steps,
            allow_range: self.allow_range,
            sigma_floor: self.sigma_floor,
            sigma_init: self.sigma_init,
            u_max: self.u_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HorizonConfig {
    pub alpha_g: f64,
    pub alpha_c: f64,
    pub alpha_j: f64,
    pub alpha_s: f64,
    #[serde(rename = "N")]
    pub num_samples: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    pub beta: f64,
    pub gamma: f64,
    pub alpha_mu: f64,
    pub alpha_sigma: f64,
    pub dt: f64,
    pub max_steps: usize,
    pub allow_range: f64,
    pub epsilon: f64,
    pub sigma_floor: f64,
    pub sigma_init: f64,
    pub u_max: f64,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        let p = HorizonMppiParams::default();
        HorizonConfig {
            alpha_g: p.weights.alpha_g,
            alpha_c: p.weights.alpha_c,
            alpha_j: p.weights.alpha_j,
            alpha_s: p.weights.alpha_s,
            num_samples: p.num_samples,
            horizon: p.horizon,
            beta: p.beta,
            gamma: p.gamma,
            alpha_mu: p.alpha_mu,
            alpha_sigma: p.alpha_sigma,
            dt: p.dt,
            max_steps: p.max_steps,
            allow_range: p.allow_range,
            epsilon: p.epsilon,
            sigma_floor: p.sigma_floor,
            sigma_init: p.sigma_init,
            u_max: p.u_max,
        }
    }
}

impl HorizonConfig {
    pub fn params(&self) -> HorizonMppiParams {
        HorizonMppiParams {
            num_samples: self.num_samples,
            horizon: self.horizon,
            beta: self.beta,
            gamma: self.gamma,
            alpha_mu: self.alpha_mu,
            alpha_sigma: self.alpha_sigma,
            weights: StageWeights {
                alpha_g: self.alpha_g,
                alpha_c: self.alpha_c,
                alpha_j: self.alpha_j,
                alpha_s: self.alpha_s,
            },
            dt: self.dt,
            max_steps: self.max_steps,
            allow_range: self.allow_range,
            epsilon: self.epsilon,
            sigma_floor: self.sigma_floor,
            sigma_init: self.sigma_init,
            u_max: self.u_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QpConfig {
    #[serde(rename = "H_diag")]
    pub h_diag: Vec<f64>,
    #[serde(rename = "R_diag")]
    pub r_diag: Vec<f64>,
    #[serde(rename = "U")]
    pub u_bounds: [f64; 2],
    pub gamma_qp: f64,
    pub dt: f64,
    pub max_steps: usize,
    pub allow_range: f64,
}

impl Default for QpConfig {
    fn default() -> Self {
        let p = QpParams::default();
        QpConfig {
            h_diag: p.h_matrix.diagonal().iter().copied().collect(),
            r_diag: p.r_matrix.diagonal().iter().copied().collect(),
            u_bounds: p.u_bounds,
            gamma_qp: p.gamma_qp,
            dt: p.dt,
            max_steps: p.max_steps,
            allow_range: p.allow_range,
        }
    }
}

impl QpConfig {
    pub fn params(&self) -> QpParams {
        QpParams {
            u_bounds: self.u_bounds,
            gamma_qp: self.gamma_qp,
            dt: self.dt,
            max_steps: self.max_steps,
            allow_range: self.allow_range,
            ..QpParams::diagonal(&self.h_diag, &self.r_diag)
        }
    }
}

/// Settings for every planner. The random-sampling baseline reuses `ours`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparameters {
    pub ours: OneStepConfig,
    pub mppi: HorizonConfig,
    pub qp: QpConfig,
}

impl Hyperparameters {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Hyperparameters = serde_json::from_str(text)?;
        let problems = doc.problems(None);
        if problems.is_empty() {
            Ok(doc)
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("hyperparameters serialize")
    }

    /// Every validation failure, prefixed with its section. `dim`, when
    /// given, is checked against the QP matrices.
    pub fn problems(&self, dim: Option<usize>) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |section: &str, r: Result<()>| {
            if let Err(e) = r {
                out.push(format!("{section}: {e}"));
            }
        };
        push("ours", self.ours.cost().validate());
        push("ours", self.ours.params().validate());
        push("mppi", self.mppi.params().validate());
        let qp_dim = dim.unwrap_or(self.qp.h_diag.len());
        if self.qp.h_diag.len() != self.qp.r_diag.len() {
            push(
                "qp",
                Err(Error::InvalidParameter(format!(
                    "H_diag has {} entries but R_diag has {}",
                    self.qp.h_diag.len(),
                    self.qp.r_diag.len()
                ))),
            );
        } else {
            push("qp", self.qp.params().validate(qp_dim));
        }
        out
    }
}
