//! The core online algorithm: central-controller gradient update,
//! local-controller projection, regret and variability accounting, the
//! dynamic-regret bound evaluator, and a per-step comparator solver.

use crate::geometry::{FeasibleSet, GeometryError};
use crate::linalg::{dist, dot, norm, sub};
use crate::scalar::{half, lit, two, Real};

#[derive(Debug, Clone, thiserror::Error)]
pub enum OcoError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("gradient has non-finite entries at the evaluation point")]
    GradientNotFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("comparator did not converge after {iterations} iterations (pg norm {pg_norm:e})")]
    NoConvergence { iterations: usize, pg_norm: f64 },
}

/// Convex per-device or system-wide cost, evaluable and differentiable.
#[derive(Debug, Clone, PartialEq)]
pub enum CostFunction<T> {
    /// `sign * c1 * P + c2 * Q^2` on a (P, Q) pair. `sign = -1` encourages
    /// active-power production, `+1` consumption; `c2 >= 0` keeps it convex.
    LinearQuadraticPQ { c1: T, c2: T, sign: T },
    /// Linear cost over a simplex point: expected value of per-element costs.
    ExpectedFinite { values: Vec<T> },
    /// `0.5 * (w.x + b - target)^2`.
    QuadraticTracking {
        weights: Vec<T>,
        offset: T,
        target: T,
    },
    /// Weighted sum of terms, each applied to a coordinate slice
    /// `[start, start + len)` of the full decision vector.
    WeightedSum {
        terms: Vec<(T, CostFunction<T>, std::ops::Range<usize>)>,
    },
}

impl<T: Real> CostFunction<T> {
    /// Input dimension the cost expects. `WeightedSum` reports the largest
    /// slice end among its terms.
    pub fn dim(&self) -> usize {
        match self {
            CostFunction::LinearQuadraticPQ { .. } => 2,
            CostFunction::ExpectedFinite { values } => {
                // A two-element finite set is advertised as the scalar
                // probability of the second element.
                if values.len() == 2 {
                    1
                } else {
                    values.len()
                }
            }
            CostFunction::QuadraticTracking { weights, .. } => weights.len(),
            CostFunction::WeightedSum { terms } => {
                terms.iter().map(|(_, _, s)| s.end).max().unwrap_or(0)
            }
        }
    }

    pub fn value(&self, point: &[T]) -> Result<T, OcoError> {
        self.check_dim(point)?;
        Ok(match self {
            CostFunction::LinearQuadraticPQ { c1, c2, sign } => {
                *sign * *c1 * point[0] + *c2 * point[1] * point[1]
            }
            CostFunction::ExpectedFinite { values } => {
                if values.len() == 2 {
                    let y = point[0];
                    (T::one() - y) * values[0] + y * values[1]
                } else {
                    dot(values, point)
                }
            }
            CostFunction::QuadraticTracking {
                weights,
                offset,
                target,
            } => {
                let r = dot(weights, point) + *offset - *target;
                half::<T>() * r * r
            }
            CostFunction::WeightedSum { terms } => {
                let mut acc = T::zero();
                for (w, cost, slice) in terms {
                    acc = acc + *w * cost.value(&point[slice.clone()])?;
                }
                acc
            }
        })
    }

    /// Exact analytic gradient.
    pub fn gradient(&self, point: &[T]) -> Result<Vec<T>, OcoError> {
        self.check_dim(point)?;
        Ok(match self {
            CostFunction::LinearQuadraticPQ { c1, c2, sign } => {
                vec![*sign * *c1, two::<T>() * *c2 * point[1]]
            }
            CostFunction::ExpectedFinite { values } => {
                if values.len() == 2 {
                    vec![values[1] - values[0]]
                } else {
                    values.clone()
                }
            }
            CostFunction::QuadraticTracking {
                weights,
                offset,
                target,
            } => {
                let r = dot(weights, point) + *offset - *target;
                weights.iter().map(|&w| r * w).collect()
            }
            CostFunction::WeightedSum { terms } => {
                let mut grad = vec![T::zero(); point.len()];
                for (w, cost, slice) in terms {
                    let g = cost.gradient(&point[slice.clone()])?;
                    for (slot, gi) in grad[slice.clone()].iter_mut().zip(g) {
                        *slot = *slot + *w * gi;
                    }
                }
                grad
            }
        })
    }

    fn check_dim(&self, point: &[T]) -> Result<(), OcoError> {
        let expected = self.dim();
        if point.len() < expected {
            return Err(OcoError::DimensionMismatch {
                expected,
                got: point.len(),
            });
        }
        Ok(())
    }
}

/// Running dynamic-regret and comparator-variability totals.
#[derive(Debug, Clone, Default)]
pub struct RegretAccount<T> {
    pub cumulative_regret: T,
    pub cumulative_variability: T,
    pub step_count: usize,
    /// Per-step `(F_k(y_k), F_k(z_k))` rows.
    pub per_step_rows: Vec<(T, T)>,
}

impl<T: Real> RegretAccount<T> {
    pub fn new() -> Self {
        RegretAccount {
            cumulative_regret: T::zero(),
            cumulative_variability: T::zero(),
            step_count: 0,
            per_step_rows: Vec::new(),
        }
    }

    pub fn average_regret(&self) -> T {
        if self.step_count == 0 {
            T::zero()
        } else {
            self.cumulative_regret / lit(self.step_count as f64)
        }
    }

    pub fn average_variability(&self) -> T {
        if self.step_count == 0 {
            T::zero()
        } else {
            self.cumulative_variability / lit(self.step_count as f64)
        }
    }
}

/// Appends one step to the account: regret increment `f_at_y - f_at_z` and
/// comparator path length `|z_now - z_prev|`.
pub fn accumulate_regret<T: Real>(
    mut account: RegretAccount<T>,
    f_at_y: T,
    f_at_z: T,
    z_prev: &[T],
    z_now: &[T],
) -> RegretAccount<T> {
    account.cumulative_regret = account.cumulative_regret + (f_at_y - f_at_z);
    account.cumulative_variability = account.cumulative_variability + dist(z_now, z_prev);
    account.step_count += 1;
    account.per_step_rows.push((f_at_y, f_at_z));
    account
}

/// Constants of the dynamic-regret bound and its three coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants<T> {
    pub grad_bound: T,
    pub lipschitz: T,
    pub diameter: T,
    pub norm_bound: T,
    pub step_size: T,
    pub meas_error: T,
    pub k1: T,
    pub k2: T,
    pub k3: T,
}

impl<T: Real> BoundConstants<T> {
    pub fn new(
        grad_bound: T,
        lipschitz: T,
        diameter: T,
        norm_bound: T,
        step_size: T,
        meas_error: T,
    ) -> Self {
        assert!(step_size > T::zero(), "step size must be positive");
        let k1 = grad_bound * grad_bound * half();
        let k2 = (two::<T>() * (diameter + step_size * grad_bound)
            + (T::one() + step_size * lipschitz) * meas_error)
            * half();
        let k3 = diameter + norm_bound;
        BoundConstants {
            grad_bound,
            lipschitz,
            diameter,
            norm_bound,
            step_size,
            meas_error,
            k1,
            k2,
            k3,
        }
    }
}

/// Evaluates the asymptotic dynamic-regret bound
/// `K1 a + K2 (1 + a L) e / a + K3 V / a` at the given average variability.
pub fn evaluate_bound<T: Real>(constants: &BoundConstants<T>, avg_variability: T) -> T {
    let a = constants.step_size;
    constants.k1 * a
        + constants.k2 * (T::one() + a * constants.lipschitz) * constants.meas_error / a
        + constants.k3 * avg_variability / a
}

/// Finite-horizon form: the asymptotic bound plus the transient term
/// `D^2 / (2 a n)` covering the initial distance to the comparator.
pub fn evaluate_bound_finite<T: Real>(
    constants: &BoundConstants<T>,
    avg_variability: T,
    steps: usize,
) -> T {
    let transient = constants.diameter * constants.diameter
        / (two::<T>() * constants.step_size * lit(steps.max(1) as f64));
    evaluate_bound(constants, avg_variability) + transient
}

/// Central-controller update: projected gradient step from the measured
/// setpoint onto the system feasible set.
pub fn cc_update<T: Real>(
    measured: &[T],
    objective: &CostFunction<T>,
    feasible: &FeasibleSet<T>,
    step_size: T,
) -> Result<Vec<T>, OcoError> {
    assert!(step_size > T::zero(), "step size must be positive");
    let grad = objective.gradient(measured)?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(OcoError::GradientNotFinite);
    }
    let stepped: Vec<T> = measured
        .iter()
        .zip(&grad)
        .map(|(&y, &g)| y - step_size * g)
        .collect();
    Ok(feasible.project(&stepped)?)
}

/// Local-controller implementation: projection of the requested setpoint
/// onto the local feasible set.
pub fn lc_implement<T: Real>(
    requested: &[T],
    local_set: &FeasibleSet<T>,
) -> Result<Vec<T>, OcoError> {
    Ok(local_set.project(requested)?)
}

/// True iff the implemented setpoint respects the uniform norm bound.
pub fn check_bibs<T: Real>(implemented: &[T], norm_bound: T) -> bool {
    norm(implemented) <= norm_bound + lit(1e-9)
}

/// Per-step comparator: approximate minimizer of the objective over the
/// feasible set, by projected gradient descent with backtracking from the
/// projection of the origin. Stops when the projected-gradient norm (at
/// reference step 1) falls below `tol`.
pub fn comparator_step<T: Real>(
    objective: &CostFunction<T>,
    feasible: &FeasibleSet<T>,
    tol: T,
) -> Result<Vec<T>, OcoError> {
    let dim = feasible.ambient_dim();
    let init = feasible.project(&vec![T::zero(); dim])?;
    comparator_step_from(objective, feasible, &init, tol)
}

/// [`comparator_step`] with an explicit starting point, for warm starts
/// across consecutive similar problems.
pub fn comparator_step_from<T: Real>(
    objective: &CostFunction<T>,
    feasible: &FeasibleSet<T>,
    init: &[T],
    tol: T,
) -> Result<Vec<T>, OcoError> {
    // Accelerated projected gradient (FISTA) with backtracking on the
    // smoothness constant and function-value restart. Plain projected
    // gradient stalls on the flat directions these tracking objectives
    // tend to have.
    let mut z = feasible.project(init)?;
    let mut fz = objective.value(&z)?;
    let mut y = z.clone();
    let mut t = T::one();
    let max_iter = 20_000;
    let mut step = T::one();
    let mut pg_norm = T::infinity();
    for _ in 0..max_iter {
        let grad_z = objective.gradient(&z)?;
        if grad_z.iter().any(|g| !g.is_finite()) {
            return Err(OcoError::GradientNotFinite);
        }
        // Projected-gradient stationarity at a fixed reference step size.
        let reference: Vec<T> = z.iter().zip(&grad_z).map(|(&a, &g)| a - g).collect();
        let ref_proj = feasible.project(&reference)?;
        pg_norm = dist(&ref_proj, &z);
        if pg_norm <= tol {
            return Ok(z);
        }

        let grad_y = objective.gradient(&y)?;
        let fy = objective.value(&y)?;
        // Backtrack until the quadratic upper model at `y` holds.
        let mut next = z.clone();
        let mut f_next = fz;
        for _ in 0..60 {
            let trial_pt: Vec<T> = y
                .iter()
                .zip(&grad_y)
                .map(|(&a, &g)| a - step * g)
                .collect();
            let trial = feasible.project(&trial_pt)?;
            let ft = objective.value(&trial)?;
            let d = sub(&trial, &y);
            let model = fy + dot(&grad_y, &d) + norm(&d) * norm(&d) / (two::<T>() * step);
            if ft <= model + lit(1e-15) {
                next = trial;
                f_next = ft;
                break;
            }
            step = step * half();
        }

        if f_next > fz {
            // Momentum overshot: restart from the best point.
            y = z.clone();
            t = T::one();
            continue;
        }
        let t_next = (T::one() + (T::one() + lit::<T>(4.0) * t * t).sqrt()) * half();
        let beta = (t - T::one()) / t_next;
        y = next
            .iter()
            .zip(&z)
            .map(|(&a, &b)| a + beta * (a - b))
            .collect();
        t = t_next;
        z = next;
        fz = f_next;
        step = (step * lit(1.2)).min(T::one());
    }
    Err(OcoError::NoConvergence {
        iterations: max_iter,
        pg_norm: pg_norm.to_f64().unwrap_or(f64::NAN),
    })
}
