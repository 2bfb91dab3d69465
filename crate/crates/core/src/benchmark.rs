//! Trial generation and success/path/timing metrics across planners.
//!
//! Every trial carries its own planner seed, so a method's report does not
//! depend on which other methods ran or in what order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::baselines::horizon::{
    AngleTerminalCost, EngineSettings, HorizonMppi, HorizonMppiParams,
};
use crate::baselines::{horizon_mppi_plan, linear_path_collides, qp_plan, random_sampling_plan};
use crate::cdf::CdfField;
use crate::episode::{Episode, PlanResult, PlannerRng, StepPlanner};
use crate::error::{Error, Result};
use crate::params::Hyperparameters;
use crate::planner::{self, configuration, AngleCostParams, MppiParams, OneStepPlanner};
use crate::robot::{in_collision, Configuration, Scene};

/// Sum of joint-space step lengths.
pub fn path_length(trajectory: &[Configuration]) -> f64 {
    trajectory.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ours,
    Mppi,
    Qp,
    Random,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ours, Method::Mppi, Method::Qp, Method::Random];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Mppi => "mppi",
            Method::Qp => "qp",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected one of ours, mppi, qp, random)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub index: usize,
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    /// Planner seed for this trial.
    pub seed: u64,
    pub scene_id: String,
    pub linear_path_collides: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialProtocol {
    pub n_trials: usize,
    pub master_seed: u64,
    pub require_linear_collision: bool,
    /// Minimum CDF value of the start configuration, radians.
    pub min_start_clearance: f64,
    /// Samples used by the straight-line collision test.
    pub linear_steps: usize,
    pub max_attempts: u64,
}

impl Default for TrialProtocol {
    fn default() -> Self {
        TrialProtocol {
            n_trials: 500,
            master_seed: 7,
            require_linear_collision: false,
            min_start_clearance: 0.1,
            linear_steps: 1000,
            max_attempts: 1_000_000,
        }
    }
}

/// Rejection-samples start/goal pairs uniformly over the joint box.
///
/// Pairs come from stream 0 of a ChaCha generator keyed by `master_seed`,
/// planner seeds from stream 1, so trial `i` always gets the `i`-th seed.
pub fn generate_trials(
    scene: &Scene,
    field: &CdfField,
    scene_id: &str,
    protocol: &TrialProtocol,
) -> Result<Vec<TrialSpec>> {
    if protocol.n_trials == 0 {
        return Err(Error::InvalidParameter(
            "at least one trial is required".into(),
        ));
    }
    field.ensure_compatible(scene)?;
    let limits = scene.limits();
    let mut pairs = rand_chacha::ChaCha8Rng::seed_from_u64(protocol.master_seed);
    pairs.set_stream(0);
    let mut seeds = rand_chacha::ChaCha8Rng::seed_from_u64(protocol.master_seed);
    seeds.set_stream(1);

    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..limits.dim())
            .map(|k| rng.random_range(limits.min[k]..=limits.max[k]))
            .collect()
    };
    let mut rejections: BTreeMap<&'static str, u64> = BTreeMap::new();
    let mut attempts = 0u64;
    let mut trials = Vec::with_capacity(protocol.n_trials);
    while trials.len() < protocol.n_trials {
        if attempts >= protocol.max_attempts {
            let predicate = rejections
                .iter()
                .max_by_key(|(_, &n)| n)
                .map(|(p, _)| p.to_string())
                .unwrap_or_default();
            return Err(Error::RejectionBudget {
                attempts,
                predicate,
            });
        }
        attempts += 1;
        let start = draw(&mut pairs);
        let goal = draw(&mut pairs);
        let verdict = if in_collision(scene, &start) {
            Err("start collision-free")
        } else if in_collision(scene, &goal) {
            Err("goal collision-free")
        } else if !(field.value(&start) >= protocol.min_start_clearance
            && field.value(&start) > field.refine_tol())
        {
            Err("start clearance")
        } else {
            let collides = linear_path_collides(&start, &goal, scene, protocol.linear_steps);
            if protocol.require_linear_collision && !collides {
                Err("linear path collides")
            } else {
                Ok(collides)
            }
        };
        match verdict {
            Ok(collides) => trials.push(TrialSpec {
                index: trials.len(),
                start,
                goal,
                seed: seeds.random(),
                scene_id: scene_id.to_string(),
                linear_path_collides: collides,
            }),
            Err(p) => *rejections.entry(p).or_default() += 1,
        }
    }
    Ok(trials)
}

/// Runs one method on one trial with the trial's own seed.
pub fn run_trial(
    method: Method,
    trial: &TrialSpec,
    scene: &Scene,
    field: &CdfField,
    params: &Hyperparameters,
) -> Result<PlanResult> {
    let start = configuration(&trial.start);
    let goal = configuration(&trial.goal);
    let mut rng = PlannerRng::seed_from_u64(trial.seed);
    match method {
        Method::Ours => planner::plan(
            &start,
            &goal,
            field,
            scene,
            &params.ours.cost(),
            &params.ours.params(),
            &mut rng,
        ),
        Method::Random => random_sampling_plan(
            &start,
            &goal,
            field,
            scene,
            &params.ours.cost(),
            &params.ours.params(),
            &mut rng,
        ),
        Method::Mppi => {
            horizon_mppi_plan(&start, &goal, field, scene, &params.mppi.params(), &mut rng)
        }
        Method::Qp => qp_plan(&start, &goal, field, scene, &params.qp.params(), &mut rng),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub mean: f64,
    pub p99: f64,
    pub samples: usize,
}

impl TimingStats {
    /// Microsecond statistics; p99 is the nearest-rank percentile.
    pub fn from_durations(times: &[Duration]) -> Self {
        if times.is_empty() {
            return TimingStats {
                mean: 0.0,
                p99: 0.0,
                samples: 0,
            };
        }
        let mut us: Vec<f64> = times.iter().map(|d| d.as_secs_f64() * 1e6).collect();
        let mean = us.iter().sum::<f64>() / us.len() as f64;
        us.sort_by(f64::total_cmp);
        let rank = ((0.99 * us.len() as f64).ceil() as usize).clamp(1, us.len());
        TimingStats {
            mean,
            p99: us[rank - 1],
            samples: us.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    /// Failure cause, or `None` on success.
    pub failure: Option<String>,
    pub steps: usize,
    pub path_length: f64,
    #[serde(skip)]
    pub trajectory: Vec<Configuration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: Method,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Over successful trials; `None` without successes.
    pub mean_path_length: Option<f64>,
    pub mean_steps: Option<f64>,
    pub failures: BTreeMap<String, usize>,
    /// Omitted when timings are disabled, keeping reports reproducible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_time_us: Option<TimingStats>,
    pub outcomes: Vec<TrialOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchmarkOptions {
    pub record_timing: bool,
    pub keep_trajectories: bool,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            record_timing: true,
            keep_trajectories: false,
        }
    }
}

/// Runs every method over the shared trial list, trials in index order.
pub fn run_benchmark(
    methods: &[Method],
    trials: &[TrialSpec],
    scene: &Scene,
    field: &CdfField,
    params: &Hyperparameters,
    options: BenchmarkOptions,
) -> Vec<MetricsReport> {
    methods
        .iter()
        .map(|&method| {
            let mut outcomes = Vec::with_capacity(trials.len());
            let mut times = Vec::new();
            for trial in trials {
                let outcome = match run_trial(method, trial, scene, field, params) {
                    Ok(res) => {
                        times.extend_from_slice(&res.decision_times);
                        TrialOutcome {
                            index: trial.index,
                            failure: res.status.failure_cause().map(str::to_string),
                            steps: res.steps,
                            path_length: res.path_length,
                            trajectory: if options.keep_trajectories {
                                res.trajectory
                            } else {
                                Vec::new()
                            },
                        }
                    }
                    Err(e) => {
                        log::warn!("{method} trial {}: {e}", trial.index);
                        TrialOutcome {
                            index: trial.index,
                            failure: Some("error".into()),
                            steps: 0,
                            path_length: 0.0,
                            trajectory: Vec::new(),
                        }
                    }
                };
                outcomes.push(outcome);
            }
            summarize(
                method,
                outcomes,
                options
                    .record_timing
                    .then(|| TimingStats::from_durations(&times)),
            )
        })
        .collect()
}

fn summarize(
    method: Method,
    outcomes: Vec<TrialOutcome>,
    step_time_us: Option<TimingStats>,
) -> MetricsReport {
    let mut failures = BTreeMap::new();
    let (mut successes, mut len_sum, mut step_sum) = (0usize, 0.0, 0usize);
    for o in &outcomes {
        match &o.failure {
            None => {
                successes += 1;
                len_sum += o.path_length;
                step_sum += o.steps;
            }
            Some(cause) => *failures.entry(cause.clone()).or_insert(0) += 1,
        }
    }
    let trials = outcomes.len();
    let mean = |sum: f64| (successes > 0).then(|| sum / successes as f64);
    MetricsReport {
        method,
        trials,
        successes,
        success_rate: if trials == 0 {
            0.0
        } else {
            successes as f64 / trials as f64
        },
        mean_path_length: mean(len_sum),
        mean_steps: mean(step_sum as f64),
        failures,
        step_time_us,
        outcomes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedComparison {
    /// Mean horizon decision time over mean one-step decision time.
    pub ratio: f64,
    pub one_step: TimingStats,
    pub horizon: TimingStats,
}

/// Decision times of `make`'s planners over the first `steps_per_trial`
/// steps of every trial.
pub fn time_decisions<'p>(
    trials: &[TrialSpec],
    scene: &Scene,
    field: &CdfField,
    dt: f64,
    steps_per_trial: usize,
    mut make: impl FnMut(&TrialSpec) -> Result<Box<dyn StepPlanner + 'p>>,
) -> Result<Vec<Duration>> {
    let mut times = Vec::new();
    for trial in trials {
        let mut planner = make(trial)?;
        let episode = Episode {
            scene,
            field,
            start: configuration(&trial.start),
            goal: configuration(&trial.goal),
            dt,
            max_steps: steps_per_trial,
            allow_range: 0.0,
            stall: None,
        };
        let res = episode.run(planner.as_mut(), &mut PlannerRng::seed_from_u64(trial.seed))?;
        times.extend(res.decision_times);
    }
    Ok(times)
}

/// Per-decision cost of long-horizon MPPI relative to the one-step planner
/// on the same trials and sample count.
pub fn speed_comparison(
    trials: &[TrialSpec],
    scene: &Scene,
    field: &CdfField,
    one_step: (&AngleCostParams, &MppiParams),
    horizon: &HorizonMppiParams,
    steps_per_trial: usize,
) -> Result<SpeedComparison> {
    let (cost, params) = one_step;
    if params.num_samples != horizon.num_samples {
        return Err(Error::InvalidParameter(format!(
            "speed comparison needs equal N (one-step {}, horizon {})",
            params.num_samples, horizon.num_samples
        )));
    }
    horizon.validate()?;
    let fast = time_decisions(trials, scene, field, params.dt, steps_per_trial, |t| {
        Ok(Box::new(OneStepPlanner::new(
            field,
            scene.limits(),
            configuration(&t.goal),
            *cost,
            *params,
        )?))
    })?;
    let slow = time_decisions(trials, scene, field, horizon.dt, steps_per_trial, |t| {
        let cost = crate::baselines::horizon::CompositeCost {
            scene,
            field,
            goal: configuration(&t.goal),
            weights: horizon.weights,
            gamma: horizon.gamma,
            epsilon: horizon.epsilon,
        };
        Ok(Box::new(HorizonMppi::new(
            scene.limits(),
            cost,
            horizon.engine(),
        )?))
    })?;
    let one_step = TimingStats::from_durations(&fast);
    let horizon = TimingStats::from_durations(&slow);
    Ok(SpeedComparison {
        ratio: horizon.mean / one_step.mean,
        one_step,
        horizon,
    })
}

/// Engine settings that make [`HorizonMppi`] a one-step planner: `H = 1`
/// with the angle cost on the single predicted state.
pub fn one_step_engine<'a>(
    field: &'a CdfField,
    scene: &'a Scene,
    goal: Configuration,
    cost: &AngleCostParams,
    params: &MppiParams,
) -> Result<HorizonMppi<'a, AngleTerminalCost<'a>>> {
    let settings = EngineSettings {
        num_samples: params.num_samples,
        horizon: 1,
        beta: params.beta,
        alpha_mu: params.alpha_mu,
        alpha_sigma: params.alpha_sigma,
        dt: params.dt,
        sigma_floor: params.sigma_floor,
        sigma_init: params.sigma_init,
        u_max: params.u_max,
    };
    HorizonMppi::new(
        scene.limits(),
        AngleTerminalCost::new(field, goal, *cost),
        settings,
    )
}
