//! Closed-loop episode engine: per-step exchange between the central
//! controller and the local controllers, measurement noise, persistent
//! prediction timing, and full logging for regret analysis.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::devices::{
    battery_advertise, battery_soc_update, hvac_advertise, hvac_implement, hvac_realized_power,
    pv_advertise, Advertisement, BatteryDevice, DeviceError, HvacDevice, PvDevice,
};
use crate::geometry::{sample_uniform_ball, FeasibleSet, GeometryError};
use crate::grid::{
    build_feasible_set, build_objective, substation_power, voltages, DecisionLayout,
    DeviceCoupling, GridError, GridModel,
};
use crate::linalg::norm;
use crate::oco::{
    accumulate_regret, cc_update, check_bibs, comparator_step, comparator_step_from,
    evaluate_bound_finite,
    lc_implement, BoundConstants, CostFunction, OcoError, RegretAccount,
};
use crate::scalar::{lit, two, Real};

/// A time-indexed value: either constant over the horizon or one value per
/// step.
#[derive(Debug, Clone, PartialEq)]
pub enum Series<V> {
    Constant(V),
    PerStep(Vec<V>),
}

impl<V: Clone> Series<V> {
    pub fn get(&self, step: usize) -> Option<V> {
        match self {
            Series::Constant(v) => Some(v.clone()),
            Series::PerStep(vs) => vs.get(step).cloned(),
        }
    }

    /// True when values exist for every step in `0..steps`.
    pub fn covers(&self, steps: usize) -> bool {
        match self {
            Series::Constant(_) => true,
            Series::PerStep(vs) => vs.len() >= steps,
        }
    }

    pub fn iter_over(&self, steps: usize) -> impl Iterator<Item = V> + '_ {
        (0..steps).filter_map(move |i| self.get(i))
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SimError {
    #[error("step {step}: {source}")]
    Step { step: usize, source: Box<SimError> },
    #[error("projection onto the system feasible set failed: {0}")]
    InfeasibleStep(GeometryError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Oco(#[from] OcoError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

fn at_step<E: Into<SimError>>(step: usize) -> impl FnOnce(E) -> SimError {
    move |e| SimError::Step {
        step,
        source: Box::new(e.into()),
    }
}

/// One local-controller device in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum DeviceSpec<T> {
    Pv(PvDevice<T>),
    Battery(BatteryDevice<T>),
    Hvac(HvacDevice<T>),
}

/// Optional overrides for the bound constants derived from the scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConstantsOverride<T> {
    pub grad_bound: Option<T>,
    pub lipschitz: Option<T>,
    pub diameter: Option<T>,
    pub norm_bound: Option<T>,
}

/// A complete time-indexed problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub horizon: usize,
    pub step_size_alpha: T,
    pub meas_epsilon: T,
    pub rng_seed: u64,
    pub comparator_tol: T,
    pub devices: Vec<DeviceSpec<T>>,
    pub grid: GridModel<T>,
    pub constants_override: Option<ConstantsOverride<T>>,
}

impl<T: Real> Scenario<T> {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon == 0 {
            return Err(SimError::InvalidScenario("horizon must be at least 1".into()));
        }
        if !(self.step_size_alpha > T::zero()) {
            return Err(SimError::InvalidScenario("alpha must be positive".into()));
        }
        if self.meas_epsilon < T::zero() {
            return Err(SimError::InvalidScenario("epsilon must be nonnegative".into()));
        }
        if self.devices.is_empty() {
            return Err(SimError::InvalidScenario("at least one device required".into()));
        }
        if self.grid.device_weights.len() != self.devices.len() {
            return Err(SimError::InvalidScenario(format!(
                "device_weights has {} entries for {} devices",
                self.grid.device_weights.len(),
                self.devices.len()
            )));
        }
        if self.grid.v_min >= self.grid.v_max {
            return Err(SimError::InvalidScenario("v_min must be below v_max".into()));
        }
        let steps = self.horizon + 1;
        let covered = self.grid.voltage_matrix.covers(steps)
            && self.grid.voltage_offset.covers(steps)
            && self.grid.substation_weights.covers(steps)
            && self.grid.substation_offset.covers(steps)
            && self.grid.tracking_signal.covers(steps)
            && self.devices.iter().all(|d| match d {
                DeviceSpec::Pv(p) => p.available_power.covers(steps),
                DeviceSpec::Battery(_) => true,
                DeviceSpec::Hvac(h) => h.cost_on.covers(steps) && h.cost_off.covers(steps),
            });
        if !covered {
            return Err(SimError::InvalidScenario(format!(
                "a time series does not cover steps 0..={}",
                self.horizon
            )));
        }
        Ok(())
    }

    pub fn layout(&self) -> DecisionLayout<T> {
        DecisionLayout::new(
            self.devices
                .iter()
                .map(|d| match d {
                    DeviceSpec::Pv(_) | DeviceSpec::Battery(_) => DeviceCoupling::InverterPq,
                    DeviceSpec::Hvac(h) => DeviceCoupling::HvacProbability { p_max: h.p_max },
                })
                .collect(),
        )
    }

    /// Uniform bound constants for the scenario, from the maximal device
    /// sets and worst-case cost parameters over the horizon, with any
    /// explicit overrides applied.
    pub fn derive_constants(&self) -> Result<BoundConstants<T>, SimError> {
        let layout = self.layout();
        let steps = self.horizon + 1;

        // Uniform envelope of the per-step product sets.
        let envelope = FeasibleSet::product(
            self.devices
                .iter()
                .map(|d| match d {
                    DeviceSpec::Pv(p) => {
                        FeasibleSet::inverter_disk(T::zero(), p.s_rated, p.s_rated)
                    }
                    DeviceSpec::Battery(b) => {
                        FeasibleSet::inverter_disk(-b.s_rated, b.s_rated, b.s_rated)
                    }
                    DeviceSpec::Hvac(_) => FeasibleSet::interval(T::zero(), T::one()),
                })
                .collect::<Result<Vec<_>, _>>()?,
        )?;
        let bounds = envelope.bounds()?;

        // Per-device gradient and curvature bounds, weighted.
        let mut dev_grad_sq = T::zero();
        let mut dev_lip = T::zero();
        for (i, d) in self.devices.iter().enumerate() {
            let w = self.grid.device_weights[i];
            let (g, lip) = match d {
                DeviceSpec::Pv(p) => {
                    let gq = two::<T>() * p.c2 * p.s_rated;
                    ((p.c1 * p.c1 + gq * gq).sqrt(), two::<T>() * p.c2)
                }
                DeviceSpec::Battery(b) => {
                    let gq = two::<T>() * b.c2 * b.s_rated;
                    ((b.c1 * b.c1 + gq * gq).sqrt(), two::<T>() * b.c2)
                }
                DeviceSpec::Hvac(h) => {
                    let mut worst = T::zero();
                    for k in 0..steps {
                        let on = h.cost_on.get(k).unwrap_or(T::zero());
                        let off = h.cost_off.get(k).unwrap_or(T::zero());
                        worst = worst.max((on - off).abs());
                    }
                    (worst, T::zero())
                }
            };
            dev_grad_sq = dev_grad_sq + w * g * w * g;
            dev_lip = dev_lip.max(w * lip);
        }

        // Tracking term: residual bounded by |w_d| B + max |b - target|.
        let mut w_norm_max = T::zero();
        let mut offset_max = T::zero();
        for k in 0..steps {
            let w = self
                .grid
                .substation_weights
                .get(k)
                .ok_or(SimError::InvalidScenario("substation weights series".into()))?;
            let wd = layout.to_decision_weights(&w)?;
            w_norm_max = w_norm_max.max(norm(&wd));
            let b = self
                .grid
                .substation_offset
                .get(k)
                .ok_or(SimError::InvalidScenario("substation offset series".into()))?;
            let t = self
                .grid
                .tracking_signal
                .get(k)
                .ok_or(SimError::InvalidScenario("tracking series".into()))?;
            offset_max = offset_max.max((b - t).abs());
        }
        let track_grad = w_norm_max * (w_norm_max * bounds.norm_bound + offset_max);
        let track_lip = w_norm_max * w_norm_max;

        let mut grad_bound = dev_grad_sq.sqrt() + track_grad;
        let mut lipschitz = dev_lip + track_lip;
        let mut diameter = bounds.diameter;
        let mut norm_bound = bounds.norm_bound;
        if let Some(o) = &self.constants_override {
            grad_bound = o.grad_bound.unwrap_or(grad_bound);
            lipschitz = o.lipschitz.unwrap_or(lipschitz);
            diameter = o.diameter.unwrap_or(diameter);
            norm_bound = o.norm_bound.unwrap_or(norm_bound);
        }
        Ok(BoundConstants::new(
            grad_bound,
            lipschitz,
            diameter,
            norm_bound,
            self.step_size_alpha,
            self.meas_epsilon,
        ))
    }
}

/// One logged step of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<T> {
    /// 1-based step index.
    pub step: usize,
    pub requested: Vec<T>,
    /// Implemented decision (simplex points for HVAC coordinates).
    pub implemented: Vec<T>,
    /// Realized (P, Q) per device, concatenated.
    pub realized_power: Vec<T>,
    pub measured: Vec<T>,
    /// System objective at the implemented decision (expected costs for
    /// discrete devices).
    pub objective_at_implemented: T,
    /// Objective with realized costs substituted for discrete devices.
    pub realized_objective: T,
    pub comparator: Vec<T>,
    pub objective_at_comparator: T,
    pub instantaneous_regret: T,
    pub average_regret: T,
    pub average_variability: T,
    /// Finite-horizon bound evaluated at this step count.
    pub bound_value: T,
    pub voltages: Vec<T>,
    pub substation_power: T,
    pub tracking_target: T,
    pub hvac_on: Vec<bool>,
    pub hvac_locked: Vec<bool>,
    pub battery_soc: Vec<T>,
    pub bibs_ok: bool,
}

/// Full record of one closed-loop run.
#[derive(Debug, Clone)]
pub struct EpisodeLog<T> {
    pub rows: Vec<StepRecord<T>>,
    pub account: RegretAccount<T>,
    pub constants: BoundConstants<T>,
    /// Finite-horizon bound at the full horizon.
    pub bound_value: T,
    pub bibs_ok: bool,
    pub seed: u64,
}

/// Adds uniform-ball measurement noise of radius `epsilon`.
pub fn measure<T: Real, R: rand::Rng + ?Sized>(
    implemented: &[T],
    epsilon: T,
    rng: &mut R,
) -> Vec<T> {
    let noise = sample_uniform_ball(implemented.len(), epsilon, rng);
    implemented
        .iter()
        .zip(&noise)
        .map(|(&y, &n)| y + n)
        .collect()
}

/// Runs one closed-loop episode. Deterministic given the scenario seed.
pub fn run_episode<T: Real>(scenario: &Scenario<T>) -> Result<EpisodeLog<T>, SimError> {
    scenario.validate()?;
    let layout = scenario.layout();
    let constants = scenario.derive_constants()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
    let mut devices = scenario.devices.clone();
    let alpha = scenario.step_size_alpha;

    // Initial advertisement round (step 0 state) and the first setpoint:
    // the projection of the origin onto the initial system feasible set.
    let ads = advertise_all(&devices, 0)?;
    let u0 = build_feasible_set(&scenario.grid, &layout, &ads, 0)?;
    let mut requested = u0
        .project(&vec![T::zero(); layout.decision_dim()])
        .map_err(SimError::InfeasibleStep)?;

    let mut account = RegretAccount::new();
    let mut rows = Vec::with_capacity(scenario.horizon);
    let mut bibs_all = true;
    let mut comparator_cache: Option<(CostFunction<T>, FeasibleSet<T>, Vec<T>, T)> = None;
    let mut z_prev: Option<Vec<T>> = None;

    for step in 1..=scenario.horizon {
        // Advertisements reflect the step-`step` device state, before any
        // state transition caused by implementing this step's setpoint.
        let ads = advertise_all(&devices, step).map_err(at_step(step))?;

        // Local controllers implement; device states advance.
        let mut implemented = vec![T::zero(); layout.decision_dim()];
        let mut realized_power = vec![T::zero(); layout.power_dim()];
        let mut hvac_on = Vec::new();
        let mut hvac_locked = Vec::new();
        let mut battery_soc = Vec::new();
        for (i, device) in devices.iter_mut().enumerate() {
            let slice = layout.slice(i);
            match device {
                DeviceSpec::Pv(p) => {
                    let set = p.feasible_set(step).map_err(at_step(step))?;
                    let y = lc_implement(&requested[slice.clone()], &set).map_err(at_step(step))?;
                    realized_power[2 * i] = y[0];
                    realized_power[2 * i + 1] = y[1];
                    implemented[slice].copy_from_slice(&y);
                }
                DeviceSpec::Battery(b) => {
                    let set = b.feasible_set().map_err(at_step(step))?;
                    let y = lc_implement(&requested[slice.clone()], &set).map_err(at_step(step))?;
                    realized_power[2 * i] = y[0];
                    realized_power[2 * i + 1] = y[1];
                    *b = battery_soc_update(b, y[0]);
                    battery_soc.push(b.soc);
                    implemented[slice].copy_from_slice(&y);
                }
                DeviceSpec::Hvac(h) => {
                    let (on, y, next) = hvac_implement(h, requested[slice.start], &mut rng);
                    let (p, q) = hvac_realized_power(h, on);
                    realized_power[2 * i] = p;
                    realized_power[2 * i + 1] = q;
                    hvac_on.push(on);
                    hvac_locked.push(h.locked);
                    *h = next;
                    implemented[slice.start] = y;
                }
            }
        }

        // Measurement of the implemented decision.
        let measured = measure(&implemented, scenario.meas_epsilon, &mut rng);

        // Central controller: objective and feasible set from the fresh
        // advertisements and step-`step` grid data.
        let objective =
            build_objective(&scenario.grid, &layout, &ads, step).map_err(at_step(step))?;
        let feasible =
            build_feasible_set(&scenario.grid, &layout, &ads, step).map_err(at_step(step))?;

        // Per-step comparator (cached across identical steps).
        let comparator = match &comparator_cache {
            Some((f, u, z, _)) if *f == objective && *u == feasible => z.clone(),
            _ => {
                // Consecutive steps pose nearly identical problems, so the
                // previous comparator is a good warm start.
                let z = match &comparator_cache {
                    Some((_, _, z0, _)) => {
                        comparator_step_from(&objective, &feasible, z0, scenario.comparator_tol)
                    }
                    None => comparator_step(&objective, &feasible, scenario.comparator_tol),
                }
                .map_err(at_step(step))?;
                let fz = objective.value(&z).map_err(at_step(step))?;
                comparator_cache = Some((objective.clone(), feasible.clone(), z.clone(), fz));
                z
            }
        };
        let f_at_z = comparator_cache.as_ref().expect("cache populated").3;

        let f_at_y = objective.value(&implemented).map_err(at_step(step))?;
        let realized_objective = f_at_y
            + realized_correction(scenario, &ads, &implemented, &hvac_on, &layout, step)
                .map_err(at_step(step))?;

        let prev = z_prev.clone().unwrap_or_else(|| comparator.clone());
        account = accumulate_regret(account, realized_objective, f_at_z, &prev, &comparator);
        z_prev = Some(comparator.clone());

        let v = voltages(&scenario.grid, &layout, &implemented, step).map_err(at_step(step))?;
        let p0 =
            substation_power(&scenario.grid, &layout, &implemented, step).map_err(at_step(step))?;
        let target = scenario
            .grid
            .tracking_signal
            .get(step)
            .ok_or(SimError::InvalidScenario("tracking series".into()))?;

        let bibs_ok = check_bibs(&implemented, constants.norm_bound);
        bibs_all &= bibs_ok;

        let bound_value =
            evaluate_bound_finite(&constants, account.average_variability(), account.step_count);
        rows.push(StepRecord {
            step,
            requested: requested.clone(),
            implemented: implemented.clone(),
            realized_power,
            measured: measured.clone(),
            objective_at_implemented: f_at_y,
            realized_objective,
            comparator: comparator.clone(),
            objective_at_comparator: f_at_z,
            instantaneous_regret: realized_objective - f_at_z,
            average_regret: account.average_regret(),
            average_variability: account.average_variability(),
            bound_value,
            voltages: v,
            substation_power: p0,
            tracking_target: target,
            hvac_on,
            hvac_locked,
            battery_soc,
            bibs_ok,
        });

        // Next setpoint from the measured state (never the requested or
        // noiseless implemented one).
        requested = cc_update(&measured, &objective, &feasible, alpha).map_err(|e| {
            match e {
                OcoError::Geometry(g) => SimError::Step {
                    step,
                    source: Box::new(SimError::InfeasibleStep(g)),
                },
                other => at_step(step)(other),
            }
        })?;
    }

    let bound_value =
        evaluate_bound_finite(&constants, account.average_variability(), account.step_count);
    Ok(EpisodeLog {
        rows,
        account,
        constants,
        bound_value,
        bibs_ok: bibs_all,
        seed: scenario.rng_seed,
    })
}

// The expected objective already prices discrete devices by their
// advertised linear cost at the simplex point; swap in the realized cost.
fn realized_correction<T: Real>(
    scenario: &Scenario<T>,
    ads: &[Advertisement<T>],
    implemented: &[T],
    hvac_on: &[bool],
    layout: &DecisionLayout<T>,
    step: usize,
) -> Result<T, SimError> {
    let mut corr = T::zero();
    let mut hvac_idx = 0;
    for (i, d) in scenario.devices.iter().enumerate() {
        if let DeviceSpec::Hvac(h) = d {
            let w = scenario.grid.device_weights[i];
            let c_on = h
                .cost_on
                .get(step)
                .ok_or(DeviceError::SeriesOutOfRange { step })?;
            let c_off = h
                .cost_off
                .get(step)
                .ok_or(DeviceError::SeriesOutOfRange { step })?;
            let realized = if hvac_on[hvac_idx] { c_on } else { c_off };
            let expected = ads[i]
                .cost
                .value(&implemented[layout.slice(i)])
                .map_err(SimError::Oco)?;
            corr = corr + w * (realized - expected);
            hvac_idx += 1;
        }
    }
    Ok(corr)
}

fn advertise_all<T: Real>(
    devices: &[DeviceSpec<T>],
    step: usize,
) -> Result<Vec<Advertisement<T>>, SimError> {
    devices
        .iter()
        .map(|d| {
            Ok(match d {
                DeviceSpec::Pv(p) => pv_advertise(p, step)?,
                DeviceSpec::Battery(b) => battery_advertise(b, step)?,
                DeviceSpec::Hvac(h) => hvac_advertise(h, step)?,
            })
        })
        .collect()
}

/// Aggregate statistics over independent episodes.
#[derive(Debug, Clone)]
pub struct MonteCarloSummary<T> {
    pub mean_average_regret: T,
    pub std_error: T,
    pub bound_value: T,
    pub per_seed_average_regret: Vec<T>,
    pub episodes: Vec<EpisodeLog<T>>,
}

/// Runs independent episodes (concurrently) and aggregates the average
/// dynamic regret across seeds.
pub fn run_monte_carlo<T: Real>(
    scenario: &Scenario<T>,
    seeds: &[u64],
) -> Result<MonteCarloSummary<T>, SimError> {
    if seeds.is_empty() {
        return Err(SimError::InvalidScenario("at least one seed required".into()));
    }
    let episodes: Result<Vec<EpisodeLog<T>>, SimError> = seeds
        .par_iter()
        .map(|&seed| {
            let mut sc = scenario.clone();
            sc.rng_seed = seed;
            run_episode(&sc)
        })
        .collect();
    let episodes = episodes?;
    let per_seed: Vec<T> = episodes.iter().map(|e| e.account.average_regret()).collect();
    let n = lit::<T>(per_seed.len() as f64);
    let mean = per_seed.iter().copied().sum::<T>() / n;
    let var = if per_seed.len() > 1 {
        per_seed
            .iter()
            .map(|&r| (r - mean) * (r - mean))
            .sum::<T>()
            / lit::<T>((per_seed.len() - 1) as f64)
    } else {
        T::zero()
    };
    let std_error = (var / n).sqrt();
    let bound_value = episodes[0].bound_value;
    Ok(MonteCarloSummary {
        mean_average_regret: mean,
        std_error,
        bound_value,
        per_seed_average_regret: per_seed,
        episodes,
    })
}
