//! Local-controller device models: PV, battery (convex) and HVAC
//! (discrete with randomized control), plus the advertisement each device
//! sends the central controller under the persistent predictor.

use rand::Rng;

use crate::geometry::{FeasibleSet, GeometryError};
use crate::oco::CostFunction;
use crate::scalar::Real;
use crate::sim::Series;

#[derive(Debug, Clone, thiserror::Error)]
pub enum DeviceError {
    #[error("time series has no value for step {step}")]
    SeriesOutOfRange { step: usize },
    #[error("battery power limits miss [-s_rated, s_rated] at soc {soc}")]
    InfeasibleLimits { soc: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A (feasible set, cost) pair advertised by a local controller for a
/// future step. For convex devices this is the current step's set and cost
/// (the persistent predictor); for HVAC it is the simplex relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct Advertisement<T> {
    pub feasible: FeasibleSet<T>,
    pub cost: CostFunction<T>,
    pub device_id: usize,
    pub valid_for_step: usize,
}

/// Photovoltaic inverter: feasible region is the inverter disk clipped by
/// the available power, cost rewards production and penalizes reactive power.
#[derive(Debug, Clone, PartialEq)]
pub struct PvDevice<T> {
    pub id: usize,
    pub s_rated: T,
    pub available_power: Series<T>,
    pub c1: T,
    pub c2: T,
}

impl<T: Real> PvDevice<T> {
    /// Feasible set in effect at `step`.
    pub fn feasible_set(&self, step: usize) -> Result<FeasibleSet<T>, DeviceError> {
        let p_av = self
            .available_power
            .get(step)
            .ok_or(DeviceError::SeriesOutOfRange { step })?;
        Ok(FeasibleSet::inverter_disk_pv(p_av, self.s_rated)?)
    }

    pub fn cost(&self) -> CostFunction<T> {
        CostFunction::LinearQuadraticPQ {
            c1: self.c1,
            c2: self.c2,
            sign: -T::one(),
        }
    }
}

/// Persistent-predictor advertisement: the step-`step` set and cost,
/// valid for `step + 1`.
pub fn pv_advertise<T: Real>(
    device: &PvDevice<T>,
    step: usize,
) -> Result<Advertisement<T>, DeviceError> {
    Ok(Advertisement {
        feasible: device.feasible_set(step)?,
        cost: device.cost(),
        device_id: device.id,
        valid_for_step: step + 1,
    })
}

/// Battery with a state-of-charge-dependent power interval and a cost whose
/// linear term flips sign around the state-of-charge target.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryDevice<T> {
    pub id: usize,
    pub s_rated: T,
    pub soc: T,
    pub soc_target: T,
    /// Usable energy in per-unit-hours.
    pub capacity_energy: T,
    /// Step duration in hours.
    pub step_duration: T,
    /// Fraction of the soc range over which the power limits taper to zero
    /// near the relevant bound.
    pub taper_fraction: T,
    pub c1: T,
    pub c2: T,
}

impl<T: Real> BatteryDevice<T> {
    /// Discharge (production) limit at the current state of charge: tapers
    /// to zero as the battery approaches empty.
    pub fn p_max(&self) -> T {
        self.s_rated * taper(self.soc, self.taper_fraction)
    }

    /// Charge (consumption) limit: tapers to zero as the battery fills.
    pub fn p_min(&self) -> T {
        -self.s_rated * taper(T::one() - self.soc, self.taper_fraction)
    }

    pub fn feasible_set(&self) -> Result<FeasibleSet<T>, DeviceError> {
        FeasibleSet::inverter_disk(self.p_min(), self.p_max(), self.s_rated).map_err(|_| {
            DeviceError::InfeasibleLimits {
                soc: self.soc.to_f64().unwrap_or(f64::NAN),
            }
        })
    }

    /// Cost in effect at the current state of charge: encourage production
    /// above the target, consumption below it, and only the reactive
    /// penalty exactly at the target.
    pub fn cost(&self) -> CostFunction<T> {
        let (c1, sign) = if self.soc > self.soc_target {
            (self.c1, -T::one())
        } else if self.soc < self.soc_target {
            (self.c1, T::one())
        } else {
            (T::zero(), T::one())
        };
        CostFunction::LinearQuadraticPQ {
            c1,
            c2: self.c2,
            sign,
        }
    }
}

/// Linear taper from 1 down to 0 over the last `fraction` of the soc range.
fn taper<T: Real>(headroom: T, fraction: T) -> T {
    if fraction <= T::zero() {
        return T::one();
    }
    (headroom / fraction).min(T::one()).max(T::zero())
}

pub fn battery_advertise<T: Real>(
    device: &BatteryDevice<T>,
    step: usize,
) -> Result<Advertisement<T>, DeviceError> {
    Ok(Advertisement {
        feasible: device.feasible_set()?,
        cost: device.cost(),
        device_id: device.id,
        valid_for_step: step + 1,
    })
}

/// Advances the state of charge after implementing active power `p`
/// (positive power is production, i.e. discharge). Clamped to [0, 1].
pub fn battery_soc_update<T: Real>(device: &BatteryDevice<T>, implemented_p: T) -> BatteryDevice<T> {
    let mut next = device.clone();
    let soc = device.soc - implemented_p * device.step_duration / device.capacity_energy;
    next.soc = soc.max(T::zero()).min(T::one());
    next
}

/// Two-state HVAC load with a minimum-dwell lock machine. The feasible set
/// is `{0, -p_max}` when unlocked and the singleton matching the current
/// state while locked.
#[derive(Debug, Clone, PartialEq)]
pub struct HvacDevice<T> {
    pub id: usize,
    pub p_max: T,
    pub locked: bool,
    pub last_on: bool,
    pub min_on_steps: usize,
    pub min_off_steps: usize,
    pub dwell_counter: usize,
    pub cost_on: Series<T>,
    pub cost_off: Series<T>,
}

impl<T: Real> HvacDevice<T> {
    pub fn new(
        id: usize,
        p_max: T,
        min_on_steps: usize,
        min_off_steps: usize,
        cost_on: Series<T>,
        cost_off: Series<T>,
    ) -> Self {
        HvacDevice {
            id,
            p_max,
            locked: false,
            last_on: false,
            min_on_steps,
            min_off_steps,
            dwell_counter: 0,
            cost_on,
            cost_off,
        }
    }

    /// Simplex advertisement set: the ON-probability interval, collapsed to
    /// a singleton while locked.
    pub fn advertised_interval(&self) -> FeasibleSet<T> {
        let set = if !self.locked {
            FeasibleSet::interval(T::zero(), T::one())
        } else if self.last_on {
            FeasibleSet::interval(T::one(), T::one())
        } else {
            FeasibleSet::interval(T::zero(), T::zero())
        };
        set.expect("interval bounds are ordered by construction")
    }

    /// Native discrete feasible set at the current lock state.
    pub fn native_set(&self) -> FeasibleSet<T> {
        let points = if !self.locked {
            vec![vec![T::zero()], vec![-self.p_max]]
        } else if self.last_on {
            vec![vec![-self.p_max]]
        } else {
            vec![vec![T::zero()]]
        };
        FeasibleSet::finite_points(points).expect("point list is nonempty")
    }
}

/// Expected-cost advertisement over the ON probability:
/// `(1 - y) C(0) + y C(-p_max)`.
pub fn hvac_advertise<T: Real>(
    device: &HvacDevice<T>,
    step: usize,
) -> Result<Advertisement<T>, DeviceError> {
    let c_on = device
        .cost_on
        .get(step)
        .ok_or(DeviceError::SeriesOutOfRange { step })?;
    let c_off = device
        .cost_off
        .get(step)
        .ok_or(DeviceError::SeriesOutOfRange { step })?;
    Ok(Advertisement {
        feasible: device.advertised_interval(),
        cost: CostFunction::ExpectedFinite {
            values: vec![c_off, c_on],
        },
        device_id: device.id,
        valid_for_step: step + 1,
    })
}

/// Projects the requested ON probability onto the advertised interval,
/// draws the realized state, and advances the lock machine.
///
/// Turning ON starts a `min_on_steps` lock, turning OFF a `min_off_steps`
/// lock; the dwell counter decrements each step and unlocks at zero.
pub fn hvac_implement<T: Real, R: Rng + ?Sized>(
    device: &HvacDevice<T>,
    requested_y: T,
    rng: &mut R,
) -> (bool, T, HvacDevice<T>) {
    let interval = device.advertised_interval();
    let simplex_point = interval
        .project(&[requested_y])
        .expect("interval projection cannot fail")[0];

    let realized_on = if device.locked {
        device.last_on
    } else {
        let p = simplex_point.to_f64().unwrap_or(0.0).clamp(0.0, 1.0);
        rng.gen::<f64>() < p
    };

    let mut next = device.clone();
    let switched = realized_on != device.last_on;
    if !device.locked && switched {
        let dwell = if realized_on {
            device.min_on_steps
        } else {
            device.min_off_steps
        };
        if dwell > 0 {
            next.locked = true;
            next.dwell_counter = dwell;
        }
    }
    next.last_on = realized_on;
    if next.locked {
        next.dwell_counter = next.dwell_counter.saturating_sub(1);
        if next.dwell_counter == 0 {
            next.locked = false;
        }
    }
    (realized_on, simplex_point, next)
}

/// Maps a realized control to the (P, Q) power it injects: identity for
/// inverter devices, `(-p_max, 0)` / `(0, 0)` for HVAC ON / OFF.
pub fn hvac_realized_power<T: Real>(device: &HvacDevice<T>, realized_on: bool) -> (T, T) {
    if realized_on {
        (-device.p_max, T::zero())
    } else {
        (T::zero(), T::zero())
    }
}
