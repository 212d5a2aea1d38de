//! Policy-update algorithms.
//!
//! Four updates share one state container: quantile-criterion QPO and QPPO,
//! and mean-criterion REINFORCE and PPO used as baselines. QPO and QPPO
//! couple a fast quantile tracker with a slow projected ascent on the policy
//! parameters; the proximal variants (PPO, QPPO) hold a behavior policy that
//! generated the current batch and take several clipped surrogate steps per
//! batch.
//!
//! Timescales: the policy step `gamma_k` must be asymptotically negligible
//! against the tracker step `beta_k`. The proof-faithful pairing is
//! `gamma_k = g0 / k` against the power-decay beta schedule; the stepwise
//! decays trade that guarantee for speed, as in the experiments.

mod baseline;
mod surrogate;
mod updates;

use serde::{Deserialize, Serialize};

use crate::autodiff::Gradient;
use crate::env::Trajectory;
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::quantile::{BetaDecay, BetaSchedule, DensityEstimate, QuantileTracker};

pub use baseline::BaselineNet;
pub use surrogate::{clipped_surrogate, clipped_term, importance_ratio};

/// Stored log-probs must match the claimed sampling policy this tightly.
pub const ON_POLICY_TOL: f64 = 1e-6;

/// Parameter-space constraint applied after every policy step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ProjectionSpec {
    /// Coordinatewise clamp to `[-bound, bound]`.
    Box { bound: f64 },
    /// Euclidean projection onto the ball of the given radius.
    L2Ball { radius: f64 },
}

impl ProjectionSpec {
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            ProjectionSpec::Box { bound } => bound,
            ProjectionSpec::L2Ball { radius } => radius,
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::config("projection bound must be positive and finite"));
        }
        Ok(())
    }
}

impl Default for ProjectionSpec {
    fn default() -> Self {
        ProjectionSpec::Box { bound: 10.0 }
    }
}

/// Projects `values` onto the feasible set in place. Idempotent; interior
/// points are untouched.
pub fn project(values: &mut [f64], spec: &ProjectionSpec) {
    match *spec {
        ProjectionSpec::Box { bound } => {
            for v in values {
                *v = v.clamp(-bound, bound);
            }
        }
        ProjectionSpec::L2Ball { radius } => {
            let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                let s = radius / norm;
                for v in values {
                    *v *= s;
                }
            }
        }
    }
}

/// Decay mode for the policy step size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GammaDecay {
    /// `gamma_k = g0 / k`: the proof-faithful choice.
    Power,
    /// `gamma = g0 * factor^floor(episodes / period)`: constant-rate decay on
    /// an episode clock, as used in the experiments.
    Stepwise { factor: f64, period: u64 },
}

/// Policy step-size schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaSchedule {
    pub g0: f64,
    #[serde(flatten)]
    pub decay: GammaDecay,
}

impl GammaSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.g0 > 0.0) || !self.g0.is_finite() {
            return Err(Error::config("gamma g0 must be positive and finite"));
        }
        if let GammaDecay::Stepwise { factor, period } = self.decay {
            if !(factor > 0.0 && factor <= 1.0) {
                return Err(Error::config("gamma stepwise factor must lie in (0, 1]"));
            }
            if period == 0 {
                return Err(Error::config("gamma stepwise period must be positive"));
            }
        }
        Ok(())
    }

    /// Step size for slow-iteration `k >= 1` after `episodes` episodes.
    pub fn gamma(&self, k: u64, episodes: u64) -> f64 {
        match self.decay {
            GammaDecay::Power => self.g0 / k as f64,
            GammaDecay::Stepwise { factor, period } => {
                self.g0 * factor.powi((episodes / period) as i32)
            }
        }
    }
}

impl Default for GammaSchedule {
    fn default() -> Self {
        GammaSchedule {
            g0: 5e-4,
            decay: GammaDecay::Stepwise {
                factor: 0.7,
                period: 400,
            },
        }
    }
}

/// Density estimator used to rescale the QPO direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    /// No rescaling: the proof-faithful default.
    Off,
    /// Sigmoid-kernel estimate matching the smoothed-indicator derivation.
    Sigmoid,
    /// Gaussian KDE with Silverman bandwidth.
    Kde,
}

/// Which update rule drives training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Reinforce,
    Ppo,
    Qpo,
    Qppo,
}

impl Algorithm {
    pub fn is_quantile(self) -> bool {
        matches!(self, Algorithm::Qpo | Algorithm::Qppo)
    }

    pub fn is_proximal(self) -> bool {
        matches!(self, Algorithm::Ppo | Algorithm::Qppo)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Reinforce => "reinforce",
            Algorithm::Ppo => "ppo",
            Algorithm::Qpo => "qpo",
            Algorithm::Qppo => "qppo",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Hyperparameters shared by all algorithms; fields irrelevant to a given
/// algorithm are ignored by it (and validated only where relevant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    /// Quantile level being optimized (also the reporting level).
    pub alpha: f64,
    /// Episodes per update batch.
    pub batch: usize,
    /// Clip half-width `eps` for the proximal surrogate.
    pub clip: f64,
    /// Inner epochs per batch for the proximal algorithms.
    pub epochs: usize,
    /// Density rescaling of the QPO direction.
    pub density: DensityMode,
    /// Bandwidth `h` of the sigmoid density estimator.
    pub density_bandwidth: f64,
    /// Lower bound applied to density estimates used as divisors.
    pub density_floor: f64,
    /// For PPO/QPPO: train a state-value baseline net. For REINFORCE: subtract
    /// the batch mean return.
    pub baseline: bool,
    /// SGD rate for the baseline net.
    pub baseline_lr: f64,
    /// Importance-ratio clip in the tracker's weighted recursion.
    pub max_ratio: f64,
    pub gamma: GammaSchedule,
    pub beta: BetaSchedule,
    pub projection: ProjectionSpec,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        AlgoConfig {
            alpha: 0.1,
            batch: 25,
            clip: 0.2,
            epochs: 4,
            density: DensityMode::Off,
            density_bandwidth: 1.0,
            density_floor: crate::quantile::DEFAULT_DENSITY_FLOOR,
            baseline: false,
            baseline_lr: 5e-4,
            max_ratio: 10.0,
            gamma: GammaSchedule::default(),
            beta: BetaSchedule::default(),
            projection: ProjectionSpec::default(),
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self, algo: Algorithm) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.batch == 0 {
            return Err(Error::config("batch must be positive"));
        }
        self.gamma.validate()?;
        self.beta.validate()?;
        self.projection.validate()?;
        if algo.is_proximal() {
            if !(self.clip > 0.0 && self.clip < 1.0) {
                return Err(Error::config(format!(
                    "clip must lie in (0, 1), got {}",
                    self.clip
                )));
            }
            if self.epochs == 0 {
                return Err(Error::config("epochs must be positive"));
            }
        }
        if algo.is_quantile() {
            if !(self.max_ratio >= 1.0) || !self.max_ratio.is_finite() {
                return Err(Error::config("max_ratio must be >= 1 and finite"));
            }
            match self.density {
                DensityMode::Off => {}
                DensityMode::Sigmoid => {
                    if !(self.density_bandwidth > 0.0) || !self.density_bandwidth.is_finite() {
                        return Err(Error::config("density_bandwidth must be positive"));
                    }
                }
                DensityMode::Kde => {
                    if self.batch < 2 {
                        return Err(Error::config("kde density needs batch >= 2"));
                    }
                }
            }
            if !(self.density_floor > 0.0) || !self.density_floor.is_finite() {
                return Err(Error::config("density_floor must be positive"));
            }
            self.check_timescales()?;
        }
        if self.baseline && !(self.baseline_lr > 0.0 && self.baseline_lr.is_finite()) {
            return Err(Error::config("baseline_lr must be positive and finite"));
        }
        Ok(())
    }

    /// For the proof-faithful power/power pairing, checks numerically that
    /// `gamma_k / beta_k` decays toward zero. The stepwise schedules opt out
    /// of the guarantee by construction and are accepted as-is.
    fn check_timescales(&self) -> Result<()> {
        let (GammaDecay::Power, BetaDecay::Power { .. }) = (self.gamma.decay, self.beta.decay)
        else {
            return Ok(());
        };
        // beta's magnitude clip is bounded below by c0 * c1 * k^-lambda.
        let ratio = |k: u64| self.gamma.gamma(k, 0) / self.beta.beta(k, 0.0);
        let mut prev = f64::INFINITY;
        let mut k = 1u64;
        while k <= 1_000_000 {
            let r = ratio(k);
            if r > prev + 1e-15 {
                return Err(Error::config(
                    "timescale check failed: gamma_k / beta_k is not decreasing",
                ));
            }
            prev = r;
            k *= 10;
        }
        if ratio(1_000_000) > 0.01 * ratio(1) {
            return Err(Error::config(
                "timescale check failed: gamma_k / beta_k does not vanish",
            ));
        }
        Ok(())
    }
}

/// Per-update diagnostics surfaced to the harness.
#[derive(Clone, Copy, Debug)]
pub struct UpdateReport {
    /// Policy step size used.
    pub gamma: f64,
    /// Tracker step size used (quantile algorithms).
    pub beta: Option<f64>,
    /// Tracker estimate after the update.
    pub q: Option<f64>,
    /// Density estimate that rescaled the direction, if any.
    pub density: Option<DensityEstimate>,
    /// Last inner-epoch surrogate objective (proximal algorithms).
    pub surrogate: Option<f64>,
    /// Last inner-epoch baseline loss, if a baseline net is attached.
    pub baseline_loss: Option<f64>,
    /// Inf-norm of the final applied direction before scaling by gamma.
    pub direction_norm: f64,
    /// Cumulative tracker importance-ratio clip events.
    pub clip_events: u64,
}

/// Mutable training state for one replication.
#[derive(Clone, Debug)]
pub struct AlgoState<P: Policy + Clone> {
    pub algo: Algorithm,
    pub config: AlgoConfig,
    /// Target policy `theta`.
    pub policy: P,
    /// Behavior policy `theta~` for the proximal algorithms; synced to the
    /// target after every update.
    pub behavior: Option<P>,
    pub tracker: Option<QuantileTracker>,
    pub baseline: Option<BaselineNet>,
    /// Completed slow-timescale updates.
    pub iter: u64,
    /// Episodes consumed so far.
    pub episodes: u64,
}

impl<P: Policy + Clone> AlgoState<P> {
    pub fn new(algo: Algorithm, config: AlgoConfig, policy: P) -> Result<Self> {
        config.validate(algo)?;
        let tracker = if algo.is_quantile() {
            Some(QuantileTracker::new(
                config.alpha,
                config.beta,
                config.max_ratio,
            )?)
        } else {
            None
        };
        let behavior = algo.is_proximal().then(|| policy.clone());
        Ok(AlgoState {
            algo,
            config,
            policy,
            behavior,
            tracker,
            baseline: None,
            iter: 0,
            episodes: 0,
        })
    }

    /// Attaches a state-value baseline net (proximal algorithms only).
    pub fn with_baseline(mut self, net: BaselineNet) -> Result<Self> {
        if !self.algo.is_proximal() {
            return Err(Error::config(format!(
                "{} does not use a baseline net",
                self.algo
            )));
        }
        self.baseline = Some(net);
        Ok(self)
    }

    /// The policy that should generate the next batch: the behavior policy
    /// for proximal algorithms, the target policy otherwise.
    pub fn rollout_policy(&self) -> &P {
        self.behavior.as_ref().unwrap_or(&self.policy)
    }

    /// Applies one batch of episodes collected under
    /// [`AlgoState::rollout_policy`].
    pub fn update(&mut self, batch: &[Trajectory]) -> Result<UpdateReport> {
        match self.algo {
            Algorithm::Reinforce => self.reinforce_update(batch),
            Algorithm::Ppo => self.ppo_update(batch),
            Algorithm::Qpo => self.qpo_update(batch),
            Algorithm::Qppo => self.qppo_update(batch),
        }
    }
}

/// Collects returns, rejecting empty batches and non-finite values.
pub(crate) fn batch_returns(batch: &[Trajectory]) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let returns: Vec<f64> = batch.iter().map(|t| t.discounted_return).collect();
    if let Some(i) = returns.iter().position(|u| !u.is_finite()) {
        return Err(Error::non_finite(format!("return of episode {i}")));
    }
    Ok(returns)
}

/// Verifies the batch was generated by `policy`: every stored log-prob must
/// match a recomputation to within [`ON_POLICY_TOL`].
pub(crate) fn check_on_policy<P>(policy: &P, batch: &[Trajectory]) -> Result<()>
where
    P: Policy + ?Sized,
{
    for (e, traj) in batch.iter().enumerate() {
        for (t, step) in traj.steps.iter().enumerate() {
            let lp = policy
                .log_prob(&step.state, &step.action)
                .map_err(|err| Error::at_step(t, err))?;
            let delta = (lp - step.log_prob).abs();
            if !(delta <= ON_POLICY_TOL) {
                return Err(Error::OffPolicy {
                    episode: e,
                    step: t,
                    delta,
                });
            }
        }
    }
    Ok(())
}

/// Sum of `grad log pi` over a trajectory's steps.
pub(crate) fn score_sum<P>(policy: &P, traj: &Trajectory) -> Result<Gradient>
where
    P: Policy + ?Sized,
{
    let mut acc = Gradient::zeros(policy.params().len());
    for (t, step) in traj.steps.iter().enumerate() {
        let g = policy
            .grad_log_prob(&step.state, &step.action)
            .map_err(|e| Error::at_step(t, e))?;
        acc.add_scaled(&g, 1.0)?;
    }
    Ok(acc)
}

/// `theta += scale * direction`, followed by projection and a finiteness check.
pub(crate) fn apply_direction<P>(
    policy: &mut P,
    direction: &Gradient,
    scale: f64,
    projection: &ProjectionSpec,
) -> Result<()>
where
    P: Policy + ?Sized,
{
    if !direction.is_finite() || !scale.is_finite() {
        return Err(Error::non_finite("policy update direction"));
    }
    let params = policy.params_mut();
    if params.len() != direction.len() {
        return Err(Error::ShapeMismatch {
            what: "update direction",
            expected: params.len(),
            got: direction.len(),
        });
    }
    for (p, d) in params.iter_mut().zip(direction.values()) {
        *p += scale * d;
    }
    project(params, projection);
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::non_finite("policy parameters after update"));
    }
    Ok(())
}
