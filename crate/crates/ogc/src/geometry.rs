//! Feasible-set descriptions and Euclidean projection operators.
//!
//! Every set shape used by the controller has either a closed-form
//! projection (box, ball, simplex, interval, inverter disk, finite point
//! lists, products of those) or an iterative one (intersections and
//! half-space bands, via Dykstra's alternating projections).

use rand::Rng;

use crate::linalg::{dist, dot, norm, norm_sq};
use crate::scalar::{lit, two, Real};

/// Default stopping tolerance for Dykstra iterations.
pub const DEFAULT_PROJECTION_TOL: f64 = 1e-9;
/// Default iteration cap for Dykstra.
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, thiserror::Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty feasible set: {0}")]
    EmptySet(String),
    #[error("invalid set description: {0}")]
    InvalidSet(String),
    #[error("set description is not certifiably bounded")]
    Unbounded,
    #[error(
        "projection did not converge after {iterations} iterations \
         (max member violation {max_violation:e})"
    )]
    NoConvergence {
        iterations: usize,
        max_violation: f64,
        last_iterate: Vec<f64>,
    },
}

/// Uniform bounds of a feasible set: the largest point norm and the
/// largest pairwise distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetBounds<T> {
    pub norm_bound: T,
    pub diameter: T,
}

/// A closed, bounded feasible region with a Euclidean projection.
///
/// Convex variants admit the unique nearest-point projection;
/// `FinitePoints` is the one non-convex shape (nearest member, lowest
/// index on ties). Construct through the validating constructors; the
/// variants are public for pattern matching.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet<T> {
    /// Axis-aligned box `{x : lower <= x <= upper}`.
    Box { lower: Vec<T>, upper: Vec<T> },
    /// Euclidean ball `{x : |x - center| <= radius}`.
    Ball { center: Vec<T>, radius: T },
    /// Probability simplex: coordinates nonnegative, summing to one.
    Simplex { dimension: usize },
    /// One-dimensional box.
    Interval { lower: T, upper: T },
    /// Inverter operating region: `p_min <= P <= p_max`, `P^2 + Q^2 <= s_rated^2`.
    InverterDisk { p_min: T, p_max: T, s_rated: T },
    /// Affine band `{x : lower <= A x + offset <= upper}`, row-wise.
    HalfspaceBand {
        matrix: Vec<Vec<T>>,
        offset: Vec<T>,
        lower: Vec<T>,
        upper: Vec<T>,
    },
    /// Cartesian product of factors, concatenating coordinates.
    Product { factors: Vec<FeasibleSet<T>> },
    /// Intersection of convex members in a shared ambient space.
    Intersection { members: Vec<FeasibleSet<T>> },
    /// Finite point list (discrete device native sets).
    FinitePoints { points: Vec<Vec<T>> },
}

impl<T: Real> FeasibleSet<T> {
    pub fn box_set(lower: Vec<T>, upper: Vec<T>) -> Result<Self, GeometryError> {
        if lower.len() != upper.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(GeometryError::InvalidSet("empty box description".into()));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !l.is_finite() || !u.is_finite() {
                return Err(GeometryError::Unbounded);
            }
            if *l > *u {
                return Err(GeometryError::EmptySet("box lower > upper".into()));
            }
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    pub fn ball(center: Vec<T>, radius: T) -> Result<Self, GeometryError> {
        if center.is_empty() {
            return Err(GeometryError::InvalidSet("empty ball center".into()));
        }
        if !radius.is_finite() || center.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::Unbounded);
        }
        if radius < T::zero() {
            return Err(GeometryError::EmptySet("negative ball radius".into()));
        }
        Ok(FeasibleSet::Ball { center, radius })
    }

    pub fn simplex(dimension: usize) -> Result<Self, GeometryError> {
        if dimension == 0 {
            return Err(GeometryError::InvalidSet("simplex dimension 0".into()));
        }
        Ok(FeasibleSet::Simplex { dimension })
    }

    pub fn interval(lower: T, upper: T) -> Result<Self, GeometryError> {
        if !lower.is_finite() || !upper.is_finite() {
            return Err(GeometryError::Unbounded);
        }
        if lower > upper {
            return Err(GeometryError::EmptySet("interval lower > upper".into()));
        }
        Ok(FeasibleSet::Interval { lower, upper })
    }

    /// General inverter disk with a signed power interval (battery form).
    pub fn inverter_disk(p_min: T, p_max: T, s_rated: T) -> Result<Self, GeometryError> {
        if !(s_rated > T::zero()) || !s_rated.is_finite() {
            return Err(GeometryError::InvalidSet(
                "inverter rated power must be positive and finite".into(),
            ));
        }
        if p_min > p_max || p_min > s_rated || p_max < -s_rated {
            return Err(GeometryError::EmptySet(
                "inverter power interval misses [-s_rated, s_rated]".into(),
            ));
        }
        Ok(FeasibleSet::InverterDisk {
            p_min,
            p_max,
            s_rated,
        })
    }

    /// PV form of the inverter disk: nonnegative power up to availability,
    /// clipped at the rated power so the disk stays well-formed.
    pub fn inverter_disk_pv(p_available: T, s_rated: T) -> Result<Self, GeometryError> {
        if p_available < T::zero() {
            return Err(GeometryError::InvalidSet(
                "available power must be nonnegative".into(),
            ));
        }
        Self::inverter_disk(T::zero(), p_available.min(s_rated), s_rated)
    }

    pub fn halfspace_band(
        matrix: Vec<Vec<T>>,
        offset: Vec<T>,
        lower: Vec<T>,
        upper: Vec<T>,
    ) -> Result<Self, GeometryError> {
        if matrix.is_empty() || matrix[0].is_empty() {
            return Err(GeometryError::InvalidSet("empty band matrix".into()));
        }
        let rows = matrix.len();
        let cols = matrix[0].len();
        if matrix.iter().any(|r| r.len() != cols) {
            return Err(GeometryError::InvalidSet("ragged band matrix".into()));
        }
        if offset.len() != rows || lower.len() != rows || upper.len() != rows {
            return Err(GeometryError::DimensionMismatch {
                expected: rows,
                got: offset.len().max(lower.len()).max(upper.len()),
            });
        }
        for i in 0..rows {
            if lower[i] > upper[i] {
                return Err(GeometryError::EmptySet("band lower > upper".into()));
            }
            if norm_sq(&matrix[i]) == T::zero() && (offset[i] < lower[i] || offset[i] > upper[i]) {
                return Err(GeometryError::EmptySet("zero band row outside limits".into()));
            }
        }
        Ok(FeasibleSet::HalfspaceBand {
            matrix,
            offset,
            lower,
            upper,
        })
    }

    pub fn product(factors: Vec<FeasibleSet<T>>) -> Result<Self, GeometryError> {
        if factors.is_empty() {
            return Err(GeometryError::InvalidSet("empty product".into()));
        }
        Ok(FeasibleSet::Product { factors })
    }

    pub fn intersection(members: Vec<FeasibleSet<T>>) -> Result<Self, GeometryError> {
        if members.is_empty() {
            return Err(GeometryError::InvalidSet("empty intersection".into()));
        }
        let dim = members[0].ambient_dim();
        for m in &members {
            if m.ambient_dim() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: m.ambient_dim(),
                });
            }
            if matches!(m, FeasibleSet::FinitePoints { .. }) {
                return Err(GeometryError::InvalidSet(
                    "intersection members must be convex".into(),
                ));
            }
        }
        Ok(FeasibleSet::Intersection { members })
    }

    pub fn finite_points(points: Vec<Vec<T>>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptySet("no points".into()));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(GeometryError::InvalidSet("inconsistent point dimensions".into()));
        }
        Ok(FeasibleSet::FinitePoints { points })
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            FeasibleSet::Box { lower, .. } => lower.len(),
            FeasibleSet::Ball { center, .. } => center.len(),
            FeasibleSet::Simplex { dimension } => *dimension,
            FeasibleSet::Interval { .. } => 1,
            FeasibleSet::InverterDisk { .. } => 2,
            FeasibleSet::HalfspaceBand { matrix, .. } => matrix[0].len(),
            FeasibleSet::Product { factors } => factors.iter().map(|f| f.ambient_dim()).sum(),
            FeasibleSet::Intersection { members } => members[0].ambient_dim(),
            FeasibleSet::FinitePoints { points } => points[0].len(),
        }
    }

    fn check_dim(&self, point: &[T]) -> Result<(), GeometryError> {
        if point.len() != self.ambient_dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.ambient_dim(),
                got: point.len(),
            });
        }
        Ok(())
    }

    /// Euclidean projection onto the set.
    ///
    /// Intersections and half-space bands use Dykstra with the default
    /// tolerance and iteration cap; see [`FeasibleSet::project_with`].
    pub fn project(&self, point: &[T]) -> Result<Vec<T>, GeometryError> {
        self.project_with(point, lit(DEFAULT_PROJECTION_TOL), DEFAULT_MAX_ITER)
    }

    /// Projection with explicit Dykstra parameters for the iterative variants.
    pub fn project_with(
        &self,
        point: &[T],
        tol: T,
        max_iter: usize,
    ) -> Result<Vec<T>, GeometryError> {
        self.check_dim(point)?;
        match self {
            FeasibleSet::Box { lower, upper } => Ok(point
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&x, (&l, &u))| x.max(l).min(u))
                .collect()),
            FeasibleSet::Ball { center, radius } => {
                let d: Vec<T> = point.iter().zip(center).map(|(&x, &c)| x - c).collect();
                let n = norm(&d);
                if n <= *radius {
                    Ok(point.to_vec())
                } else {
                    let s = *radius / n;
                    Ok(center.iter().zip(&d).map(|(&c, &v)| c + s * v).collect())
                }
            }
            FeasibleSet::Simplex { .. } => Ok(project_simplex(point)),
            FeasibleSet::Interval { lower, upper } => Ok(vec![point[0].max(*lower).min(*upper)]),
            FeasibleSet::InverterDisk {
                p_min,
                p_max,
                s_rated,
            } => project_inverter_disk(point, *p_min, *p_max, *s_rated),
            FeasibleSet::HalfspaceBand { .. } => {
                let members = std::slice::from_ref(self);
                project_intersection(members, point, tol, max_iter)
            }
            FeasibleSet::Product { factors } => {
                let mut out = Vec::with_capacity(point.len());
                let mut at = 0;
                for f in factors {
                    let d = f.ambient_dim();
                    out.extend(f.project_with(&point[at..at + d], tol, max_iter)?);
                    at += d;
                }
                Ok(out)
            }
            FeasibleSet::Intersection { members } => {
                project_intersection(members, point, tol, max_iter)
            }
            FeasibleSet::FinitePoints { points } => {
                let mut best = 0;
                let mut best_d = dist(&points[0], point);
                for (i, p) in points.iter().enumerate().skip(1) {
                    let d = dist(p, point);
                    if d < best_d {
                        best = i;
                        best_d = d;
                    }
                }
                Ok(points[best].clone())
            }
        }
    }

    /// Worst constraint residual of `point` against the set
    /// (0 means feasible; for `FinitePoints`, distance to the nearest member).
    pub fn violation(&self, point: &[T]) -> T {
        let zero = T::zero();
        match self {
            FeasibleSet::Box { lower, upper } => point
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&x, (&l, &u))| (l - x).max(x - u).max(zero))
                .fold(zero, T::max),
            FeasibleSet::Ball { center, radius } => (dist(point, center) - *radius).max(zero),
            FeasibleSet::Simplex { .. } => {
                let neg = point.iter().map(|&x| (-x).max(zero)).fold(zero, T::max);
                let sum: T = point.iter().copied().sum();
                neg.max((sum - T::one()).abs())
            }
            FeasibleSet::Interval { lower, upper } => {
                (*lower - point[0]).max(point[0] - *upper).max(zero)
            }
            FeasibleSet::InverterDisk {
                p_min,
                p_max,
                s_rated,
            } => {
                let pl = (*p_min).max(-*s_rated);
                let pu = (*p_max).min(*s_rated);
                (pl - point[0])
                    .max(point[0] - pu)
                    .max(norm(point) - *s_rated)
                    .max(zero)
            }
            FeasibleSet::HalfspaceBand {
                matrix,
                offset,
                lower,
                upper,
            } => {
                let mut worst = zero;
                for i in 0..matrix.len() {
                    let v = dot(&matrix[i], point) + offset[i];
                    worst = worst.max(lower[i] - v).max(v - upper[i]);
                }
                worst
            }
            FeasibleSet::Product { factors } => {
                let mut worst = zero;
                let mut at = 0;
                for f in factors {
                    let d = f.ambient_dim();
                    worst = worst.max(f.violation(&point[at..at + d]));
                    at += d;
                }
                worst
            }
            FeasibleSet::Intersection { members } => members
                .iter()
                .map(|m| m.violation(point))
                .fold(zero, T::max),
            FeasibleSet::FinitePoints { points } => points
                .iter()
                .map(|p| dist(p, point))
                .fold(T::infinity(), T::min),
        }
    }

    pub fn contains(&self, point: &[T], tol: T) -> bool {
        point.len() == self.ambient_dim() && self.violation(point) <= tol
    }

    /// Uniform norm bound and diameter of the set.
    ///
    /// Exact for the closed-form variants; conservative for products
    /// (root-sum-square) and intersections (minimum over bounded members).
    /// A bare half-space band is not certifiably bounded and errors.
    pub fn bounds(&self) -> Result<SetBounds<T>, GeometryError> {
        match self {
            FeasibleSet::Box { lower, upper } => {
                let norm_bound = lower
                    .iter()
                    .zip(upper)
                    .map(|(&l, &u)| (l * l).max(u * u))
                    .sum::<T>()
                    .sqrt();
                Ok(SetBounds {
                    norm_bound,
                    diameter: dist(upper, lower),
                })
            }
            FeasibleSet::Ball { center, radius } => Ok(SetBounds {
                norm_bound: norm(center) + *radius,
                diameter: two::<T>() * *radius,
            }),
            FeasibleSet::Simplex { dimension } => Ok(SetBounds {
                norm_bound: T::one(),
                diameter: if *dimension == 1 {
                    T::zero()
                } else {
                    two::<T>().sqrt()
                },
            }),
            FeasibleSet::Interval { lower, upper } => Ok(SetBounds {
                norm_bound: lower.abs().max(upper.abs()),
                diameter: *upper - *lower,
            }),
            FeasibleSet::InverterDisk {
                p_min,
                p_max,
                s_rated,
            } => {
                let s = *s_rated;
                let pl = (*p_min).max(-s);
                let pu = (*p_max).min(s);
                let wl = (s * s - pl * pl).max(T::zero()).sqrt();
                let wu = (s * s - pu * pu).max(T::zero()).sqrt();
                // Extreme points are the four strip-circle corners, plus the
                // antipodal pair (0, +-s) when the strip straddles zero.
                let corners = [[pl, wl], [pl, -wl], [pu, wu], [pu, -wu]];
                let mut diameter = T::zero();
                for i in 0..4 {
                    for j in (i + 1)..4 {
                        diameter = diameter.max(dist(&corners[i], &corners[j]));
                    }
                }
                if pl <= T::zero() && pu >= T::zero() {
                    diameter = diameter.max(two::<T>() * s);
                }
                Ok(SetBounds {
                    norm_bound: s,
                    diameter,
                })
            }
            FeasibleSet::HalfspaceBand { .. } => Err(GeometryError::Unbounded),
            FeasibleSet::Product { factors } => {
                let mut b2 = T::zero();
                let mut d2 = T::zero();
                for f in factors {
                    let b = f.bounds()?;
                    b2 = b2 + b.norm_bound * b.norm_bound;
                    d2 = d2 + b.diameter * b.diameter;
                }
                Ok(SetBounds {
                    norm_bound: b2.sqrt(),
                    diameter: d2.sqrt(),
                })
            }
            FeasibleSet::Intersection { members } => {
                let mut best: Option<SetBounds<T>> = None;
                for m in members {
                    if let Ok(b) = m.bounds() {
                        best = Some(match best {
                            None => b,
                            Some(prev) => SetBounds {
                                norm_bound: prev.norm_bound.min(b.norm_bound),
                                diameter: prev.diameter.min(b.diameter),
                            },
                        });
                    }
                }
                best.ok_or(GeometryError::Unbounded)
            }
            FeasibleSet::FinitePoints { points } => {
                let norm_bound = points.iter().map(|p| norm(p)).fold(T::zero(), T::max);
                let mut diameter = T::zero();
                for i in 0..points.len() {
                    for j in (i + 1)..points.len() {
                        diameter = diameter.max(dist(&points[i], &points[j]));
                    }
                }
                Ok(SetBounds {
                    norm_bound,
                    diameter,
                })
            }
        }
    }
}

/// Sort-based threshold projection onto the probability simplex.
fn project_simplex<T: Real>(point: &[T]) -> Vec<T> {
    let mut sorted = point.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("non-finite simplex input"));
    let mut cumsum = T::zero();
    let mut tau = T::zero();
    let mut k = T::zero();
    for (i, &u) in sorted.iter().enumerate() {
        cumsum = cumsum + u;
        let j = lit::<T>((i + 1) as f64);
        let cand = (cumsum - T::one()) / j;
        if u - cand > T::zero() {
            tau = cand;
            k = j;
        }
    }
    debug_assert!(k > T::zero());
    point.iter().map(|&x| (x - tau).max(T::zero())).collect()
}

/// Closed-form projection onto the inverter disk (power strip ∩ rated disk).
fn project_inverter_disk<T: Real>(
    point: &[T],
    p_min: T,
    p_max: T,
    s_rated: T,
) -> Result<Vec<T>, GeometryError> {
    let s = s_rated;
    let pl = p_min.max(-s);
    let pu = p_max.min(s);
    if pl > pu {
        return Err(GeometryError::EmptySet(
            "inverter power interval misses [-s_rated, s_rated]".into(),
        ));
    }
    let (p, q) = (point[0], point[1]);
    let pc = p.max(pl).min(pu);
    if pc * pc + q * q <= s * s {
        return Ok(vec![pc, q]);
    }
    // The projection lies on the rated circle arc with P in [pl, pu].
    // Radial for exterior points; otherwise the nearer corner of the arc.
    let r = norm(point);
    let p_dir = if r >= s { s * p / r } else { p };
    if r >= s && p_dir >= pl && p_dir <= pu {
        return Ok(vec![p_dir, s * q / r]);
    }
    let pb = p_dir.max(pl).min(pu);
    let w = (s * s - pb * pb).max(T::zero()).sqrt();
    let qb = if q < T::zero() { -w } else { w };
    Ok(vec![pb, qb])
}

/// Dykstra's alternating projections onto the intersection of convex members.
///
/// Half-space bands are split row-wise into individual half-spaces so every
/// member projection is closed-form. Stops when the correction terms settle
/// to within `tol` and the iterate is feasible; failure to converge is
/// reported with diagnostics and usually indicates an empty or
/// ill-conditioned intersection.
pub fn project_intersection<T: Real>(
    members: &[FeasibleSet<T>],
    point: &[T],
    tol: T,
    max_iter: usize,
) -> Result<Vec<T>, GeometryError> {
    if tol <= T::zero() {
        return Err(GeometryError::InvalidSet("tolerance must be positive".into()));
    }
    let mut projectors: Vec<Projector<'_, T>> = Vec::new();
    collect_projectors(members, &mut projectors)?;
    for p in &projectors {
        if let Projector::Set(s) = p {
            if s.ambient_dim() != point.len() {
                return Err(GeometryError::DimensionMismatch {
                    expected: s.ambient_dim(),
                    got: point.len(),
                });
            }
        }
    }

    if members.iter().all(|m| m.violation(point) <= T::zero()) {
        return Ok(point.to_vec());
    }
    // If the projection onto a single member already satisfies every
    // other member, it is the exact intersection projection (the
    // intersection is a subset of that member, so no feasible point can
    // be closer). This covers the common case of a constraint that is
    // inactive at the solution. Bands are skipped: their lone projection
    // goes through this routine.
    for (i, m) in members.iter().enumerate() {
        if matches!(
            m,
            FeasibleSet::HalfspaceBand { .. } | FeasibleSet::Intersection { .. }
        ) {
            continue;
        }
        let y = m.project_with(point, tol, max_iter)?;
        let feasible = members
            .iter()
            .enumerate()
            .all(|(j, other)| j == i || other.violation(&y) <= T::zero());
        if feasible {
            return Ok(y);
        }
    }

    let mut x = point.to_vec();
    let mut corrections = vec![vec![T::zero(); x.len()]; projectors.len()];
    for iter in 0..max_iter {
        // Convergence is measured on the correction terms, not on the
        // iterate: the iterate can plateau for many sweeps (or settle
        // permanently when the intersection is empty) while the
        // corrections still drift, so small movement alone proves
        // nothing.
        let mut corr_shift_sq = T::zero();
        for (proj, corr) in projectors.iter().zip(corrections.iter_mut()) {
            let shifted: Vec<T> = x.iter().zip(corr.iter()).map(|(&a, &b)| a + b).collect();
            let y = proj.project(&shifted, tol, max_iter)?;
            for i in 0..x.len() {
                let next = shifted[i] - y[i];
                let d = next - corr[i];
                corr_shift_sq = corr_shift_sq + d * d;
                corr[i] = next;
            }
            x = y;
        }
        if corr_shift_sq.sqrt() < tol && iter > 0 {
            let worst = members
                .iter()
                .map(|m| m.violation(&x))
                .fold(T::zero(), T::max);
            if worst <= tol.sqrt() * lit(1e-3) {
                return Ok(x);
            }
        }
    }
    let max_violation = members
        .iter()
        .map(|m| m.violation(&x))
        .fold(T::zero(), T::max)
        .to_f64()
        .unwrap_or(f64::NAN);
    Err(GeometryError::NoConvergence {
        iterations: max_iter,
        max_violation,
        last_iterate: x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
    })
}

enum Projector<'a, T> {
    Set(&'a FeasibleSet<T>),
    /// Single half-space `normal . x <= rhs`.
    Halfspace { normal: Vec<T>, rhs: T },
}

impl<T: Real> Projector<'_, T> {
    fn project(&self, point: &[T], tol: T, max_iter: usize) -> Result<Vec<T>, GeometryError> {
        match self {
            Projector::Set(s) => s.project_with(point, tol, max_iter),
            Projector::Halfspace { normal, rhs } => {
                let v = dot(normal, point) - *rhs;
                if v <= T::zero() {
                    Ok(point.to_vec())
                } else {
                    let s = v / norm_sq(normal);
                    Ok(point
                        .iter()
                        .zip(normal)
                        .map(|(&x, &n)| x - s * n)
                        .collect())
                }
            }
        }
    }
}

fn collect_projectors<'a, T: Real>(
    members: &'a [FeasibleSet<T>],
    out: &mut Vec<Projector<'a, T>>,
) -> Result<(), GeometryError> {
    for m in members {
        match m {
            FeasibleSet::Intersection { members } => collect_projectors(members, out)?,
            FeasibleSet::HalfspaceBand {
                matrix,
                offset,
                lower,
                upper,
            } => {
                for i in 0..matrix.len() {
                    if norm_sq(&matrix[i]) == T::zero() {
                        continue; // constructor guaranteed the row is satisfiable
                    }
                    if upper[i].is_finite() {
                        out.push(Projector::Halfspace {
                            normal: matrix[i].clone(),
                            rhs: upper[i] - offset[i],
                        });
                    }
                    if lower[i].is_finite() {
                        out.push(Projector::Halfspace {
                            normal: matrix[i].iter().map(|&a| -a).collect(),
                            rhs: offset[i] - lower[i],
                        });
                    }
                }
            }
            FeasibleSet::FinitePoints { .. } => {
                return Err(GeometryError::InvalidSet(
                    "intersection members must be convex".into(),
                ))
            }
            other => out.push(Projector::Set(other)),
        }
    }
    Ok(())
}

/// Draws a vector uniformly from the ball of the given radius.
pub fn sample_uniform_ball<T: Real, R: Rng + ?Sized>(
    dimension: usize,
    radius: T,
    rng: &mut R,
) -> Vec<T> {
    if radius <= T::zero() || dimension == 0 {
        return vec![T::zero(); dimension];
    }
    // Gaussian direction (Box-Muller), then radius scaled by U^(1/d).
    let mut dir = Vec::with_capacity(dimension);
    while dir.len() < dimension {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        dir.push(r * (2.0 * std::f64::consts::PI * u2).cos());
        if dir.len() < dimension {
            dir.push(r * (2.0 * std::f64::consts::PI * u2).sin());
        }
    }
    let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        return vec![T::zero(); dimension];
    }
    let u: f64 = rng.gen();
    let scale = u.powf(1.0 / dimension as f64) / n;
    dir.into_iter()
        .map(|v| radius * lit::<T>(v * scale))
        .collect()
}
