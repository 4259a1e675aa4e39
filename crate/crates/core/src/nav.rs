//! Per-agent navigation: D-optimality cost, its analytic gradient in the own
//! position, active safety constraints and the projected, kinematically
//! clamped control step.

use nalgebra::{DMatrix, Matrix3, Matrix6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    clamp_kinematics, control_from_polar, polar_from_control, KinematicLimits, Polar, TargetState,
    Vec3,
};
use crate::infomat::{
    prior_information, sender_information, sender_information_gradient, FimSender, NoiseModel,
};
use crate::world::{inside_any, Obstacle};

/// `-ln det J`, or `+inf` when `J` is not positive definite.
pub fn cost(j: &Matrix3<f64>) -> Result<f64> {
    if !j.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("information matrix"));
    }
    let det = j.determinant();
    if det <= 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(-det.ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavConfig {
    /// Spatial step per unit normalised gradient, m.
    pub step: f64,
    /// Constraints within this margin above their threshold are kept active, m.
    pub band: f64,
    pub d_uav: f64,
    pub d_target: f64,
    pub d_obstacle: f64,
    pub limits: KinematicLimits,
    /// Altitude floor and ceiling, m.
    pub z_min: Option<f64>,
    pub z_max: Option<f64>,
    /// Halvings of the step tried before giving up on a move that would
    /// enter an obstacle.
    pub max_backtracks: u32,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            step: 8.0,
            band: 1.0,
            d_uav: 5.0,
            d_target: 5.0,
            d_obstacle: 5.0,
            limits: KinematicLimits::default(),
            z_min: Some(1.0),
            z_max: None,
            max_backtracks: 8,
        }
    }
}

impl NavConfig {
    pub fn is_valid(&self) -> bool {
        self.step > 0.0
            && self.band >= 0.0
            && self.d_uav >= 0.0
            && self.d_target >= 0.0
            && self.d_obstacle >= 0.0
            && self.limits.is_valid()
            && match (self.z_min, self.z_max) {
                (Some(lo), Some(hi)) => lo < hi,
                _ => true,
            }
    }
}

/// Everything an agent knows when planning its next move.
#[derive(Debug, Clone)]
pub struct PlanningView {
    /// Contributors to the information matrix; `senders[own]` is this agent.
    pub senders: Vec<FimSender>,
    pub own: usize,
    /// One-step-ahead predicted target state.
    pub target: TargetState,
    /// One-step-ahead predicted covariance.
    pub covariance: Matrix6<f64>,
    pub noise: NoiseModel,
}

impl PlanningView {
    pub fn own_position(&self) -> Vec3 {
        self.senders[self.own].position
    }

    fn with_own_position(&self, p: Vec3) -> Self {
        let mut v = self.clone();
        v.senders[v.own].position = p;
        v
    }

    /// Information about the predicted target position with this agent at `p`.
    pub fn information_at(&self, p: &Vec3) -> Result<Matrix3<f64>> {
        let view = self.with_own_position(*p);
        let mut j = prior_information(&view.covariance)?;
        for s in &view.senders {
            j += sender_information(&view.target, s, &view.noise)?;
        }
        Ok(j)
    }

    pub fn cost_at(&self, p: &Vec3) -> Result<f64> {
        cost(&self.information_at(p)?)
    }
}

/// Cofactors of a symmetric 3x3 matrix, as `(xx, yy, zz, xy, xz, yz)`.
fn cofactors(j: &Matrix3<f64>) -> [f64; 6] {
    let (xx, yy, zz) = (j[(0, 0)], j[(1, 1)], j[(2, 2)]);
    let (xy, xz, yz) = (j[(0, 1)], j[(0, 2)], j[(1, 2)]);
    [
        yy * zz - yz * yz,
        xx * zz - xz * xz,
        xx * yy - xy * xy,
        xz * yz - xy * zz,
        xy * yz - xz * yy,
        xz * xy - xx * yz,
    ]
}

/// Gradient of the cost in the agent's own position, holding the target
/// estimate and every other sender fixed.
///
/// The determinant is expanded along its first row and differentiated by
/// the product rule, entry by entry.
pub fn cost_gradient(view: &PlanningView) -> Result<Vec3> {
    cost_and_gradient(view).map(|(_, g)| g)
}

/// Cost at the own position together with [`cost_gradient`].
pub fn cost_and_gradient(view: &PlanningView) -> Result<(f64, Vec3)> {
    let j = view.information_at(&view.own_position())?;
    let [c_xx, _, _, c_xy, c_xz, _] = cofactors(&j);
    let det = j[(0, 0)] * c_xx + j[(0, 1)] * c_xy + j[(0, 2)] * c_xz;
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::Singular {
            what: "information matrix",
            rcond: 0.0,
        });
    }
    let dj = sender_information_gradient(&view.target, &view.senders[view.own], &view.noise)?;
    let (xx, yy, zz) = (j[(0, 0)], j[(1, 1)], j[(2, 2)]);
    let (xy, xz, yz) = (j[(0, 1)], j[(0, 2)], j[(1, 2)]);
    let mut grad = Vec3::zeros();
    for (k, d) in dj.iter().enumerate() {
        let (dxx, dyy, dzz) = (d[(0, 0)], d[(1, 1)], d[(2, 2)]);
        let (dxy, dxz, dyz) = (d[(0, 1)], d[(0, 2)], d[(1, 2)]);
        let dc_xx = dyy * zz + dzz * yy - 2.0 * yz * dyz;
        let dc_xy = dxz * yz + xz * dyz - dxy * zz - xy * dzz;
        let dc_xz = dxy * yz + xy * dyz - dxz * yy - xz * dyy;
        let d_det = dxx * c_xx + dc_xx * xx + dxy * c_xy + dc_xy * xy + dxz * c_xz + dc_xz * xz;
        grad[k] = -d_det / det;
    }
    Ok((-det.ln(), grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    Uav(usize),
    Target,
    Obstacle(usize),
}

/// Near-boundary or violated constraints `g >= 0` with unit gradients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSet {
    pub kinds: Vec<ConstraintKind>,
    pub residuals: Vec<f64>,
    pub normals: Vec<Vec3>,
}

impl ConstraintSet {
    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    /// Constraint gradients as columns of a 3 x m matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(3, self.len(), |r, c| self.normals[c][r])
    }

    fn push(&mut self, kind: ConstraintKind, residual: f64, normal: Vec3) {
        self.kinds.push(kind);
        self.residuals.push(residual);
        self.normals.push(normal);
    }

    fn subset(&self, keep: &[usize]) -> Self {
        Self {
            kinds: keep.iter().map(|&i| self.kinds[i]).collect(),
            residuals: keep.iter().map(|&i| self.residuals[i]).collect(),
            normals: keep.iter().map(|&i| self.normals[i]).collect(),
        }
    }
}

fn away(from: &Vec3, p: &Vec3) -> (f64, Vec3) {
    let r = p - from;
    let d = r.norm();
    // Coincident points: any direction is a valid separating normal.
    let n = if d > 0.0 { r / d } else { Vec3::z() };
    (d, n)
}

pub fn active_constraints(
    p: &Vec3,
    neighbors: &[(usize, Vec3)],
    target: &Vec3,
    obstacles: &[Obstacle],
    cfg: &NavConfig,
) -> ConstraintSet {
    let mut set = ConstraintSet::default();
    for &(id, q) in neighbors {
        let (d, n) = away(&q, p);
        if d < cfg.d_uav + cfg.band {
            set.push(ConstraintKind::Uav(id), d - cfg.d_uav, n);
        }
    }
    let (d, n) = away(target, p);
    if d < cfg.d_target + cfg.band {
        set.push(ConstraintKind::Target, d - cfg.d_target, n);
    }
    for (i, o) in obstacles.iter().enumerate() {
        let (d, n) = o.distance_and_normal(p);
        if d < cfg.d_obstacle + cfg.band {
            set.push(ConstraintKind::Obstacle(i), d - cfg.d_obstacle, n);
        }
    }
    set
}

/// Column-pivoted Gram-Schmidt: keeps a maximal linearly independent subset of
/// constraint normals, picking the largest remaining component each round.
fn independent_subset(normals: &[Vec3], tol: f64) -> Vec<usize> {
    let mut residual: Vec<Vec3> = normals.to_vec();
    let mut chosen = Vec::new();
    while chosen.len() < 3 {
        let best = (0..residual.len())
            .filter(|i| !chosen.contains(i))
            .map(|i| (i, residual[i].norm()))
            .fold(None, |acc: Option<(usize, f64)>, x| match acc {
                Some(a) if a.1 >= x.1 => Some(a),
                _ => Some(x),
            });
        let Some((i, norm)) = best else { break };
        if norm <= tol {
            break;
        }
        chosen.push(i);
        let q = residual[i] / norm;
        for r in residual.iter_mut() {
            *r -= q * q.dot(r);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// `P = I - N (N^T N)^-1 N^T`, formed from a QR basis of `N`, and `(N^T N)^-1` for full-column-rank `N`.
pub fn projection(n: &DMatrix<f64>) -> Result<(Matrix3<f64>, DMatrix<f64>)> {
    if n.ncols() == 0 {
        return Ok((Matrix3::identity(), DMatrix::zeros(0, 0)));
    }
    let gram = n.transpose() * n;
    let inv = gram.clone().try_inverse().ok_or(Error::Singular {
        what: "constraint Gram matrix",
        rcond: 0.0,
    })?;
    // Orthonormal basis of the normals: better conditioned than N G^-1 N^T.
    let q = n.clone().qr().q();
    let p = DMatrix::<f64>::identity(3, 3) - &q * q.transpose();
    Ok((Matrix3::from_column_slice(p.as_slice()), inv))
}

/// Result of one control computation.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutcome {
    /// Displacement applied over the step.
    pub control: Vec3,
    pub polar: Polar,
    pub constraints: ConstraintSet,
    /// Constraints removed as linearly dependent.
    pub dependent_dropped: usize,
    pub backtracks: u32,
    /// The obstacle check failed at every step size and the agent holds still.
    pub blocked: bool,
    /// The information gradient vanished and the pursuit fallback was used.
    pub fallback: bool,
    /// Cost at the position the step starts from (`+inf` if `J` is singular).
    pub cost: f64,
}

/// Projected step along `-direction` (a unit or zero vector) with constraint
/// restoration, kinematic clamping, altitude limits and obstacle backtracking.
pub fn plan_control(
    p: &Vec3,
    direction: &Vec3,
    constraints: &ConstraintSet,
    obstacles: &[Obstacle],
    cfg: &NavConfig,
    previous: Option<(f64, f64)>,
) -> Result<ControlOutcome> {
    let keep = independent_subset(&constraints.normals, 1e-9);
    let dependent_dropped = constraints.len() - keep.len();
    let mut active = constraints.subset(&keep);

    // Boundary constraints that the descent direction moves away from do not
    // restrict it; drop the most slack one at a time. Violated ones stay.
    loop {
        if active.is_empty() {
            break;
        }
        let n = active.matrix();
        let (_, inv) = projection(&n)?;
        let g = DMatrix::from_column_slice(3, 1, direction.as_slice());
        let lambda = &inv * n.transpose() * g;
        let worst = (0..active.len())
            .filter(|&i| active.residuals[i] >= 0.0 && lambda[i] < 0.0)
            .min_by(|&a, &b| lambda[a].total_cmp(&lambda[b]));
        match worst {
            Some(i) => {
                let keep: Vec<usize> = (0..active.len()).filter(|&j| j != i).collect();
                active = active.subset(&keep);
            }
            None => break,
        }
    }

    let n = active.matrix();
    let (proj, inv) = projection(&n)?;
    let restoration = if active.is_empty() {
        Vec3::zeros()
    } else {
        let violated =
            DMatrix::from_iterator(active.len(), 1, active.residuals.iter().map(|g| g.min(0.0)));
        let r = &n * &inv * violated;
        -Vec3::new(r[0], r[1], r[2])
    };
    let descent = -(proj * direction);

    let limits = &cfg.limits;
    let mut nu = cfg.step;
    let mut backtracks = 0;
    loop {
        // Backtracking shrinks the restoration push too, since it alone can
        // be what carries the agent into a box.
        let raw = descent * nu + restoration * (nu / cfg.step);
        let polar = clamp_kinematics(
            polar_from_control(&raw, limits.dt, previous),
            previous,
            limits,
        );
        let mut u = control_from_polar(polar, limits.dt);
        let mut polar = polar;
        let z_next = p.z + u.z;
        let z_clamped = z_next
            .max(cfg.z_min.unwrap_or(f64::NEG_INFINITY))
            .min(cfg.z_max.unwrap_or(f64::INFINITY));
        if z_clamped != z_next {
            u.z = z_clamped - p.z;
            polar = polar_from_control(&u, limits.dt, Some((polar.heading, polar.tilt)));
        }
        let next = p + u;
        let safe =
            !inside_any(&next, obstacles) && obstacles.iter().all(|o| !o.blocks_segment(p, &next));
        if safe {
            return Ok(ControlOutcome {
                control: u,
                polar,
                constraints: active,
                dependent_dropped,
                backtracks,
                blocked: false,
                fallback: false,
                cost: f64::NAN,
            });
        }
        if backtracks >= cfg.max_backtracks {
            let (heading, tilt) = previous.unwrap_or((polar.heading, polar.tilt));
            return Ok(ControlOutcome {
                control: Vec3::zeros(),
                polar: Polar {
                    speed: 0.0,
                    heading,
                    tilt,
                },
                constraints: active,
                dependent_dropped,
                backtracks,
                blocked: true,
                fallback: false,
                cost: f64::NAN,
            });
        }
        nu *= 0.5;
        backtracks += 1;
    }
}

/// One full navigation decision for the agent described by `view`.
///
/// When the own record carries no information (NLOS, or no capability) the
/// cost does not depend on the own position; the agent then flies toward the
/// predicted target position instead.
pub fn control_step(
    view: &PlanningView,
    neighbors: &[(usize, Vec3)],
    obstacles: &[Obstacle],
    cfg: &NavConfig,
    previous: Option<(f64, f64)>,
) -> Result<ControlOutcome> {
    let p = view.own_position();
    let constraints = active_constraints(&p, neighbors, &view.target.position, obstacles, cfg);
    let (cost, grad) = match cost_and_gradient(view) {
        Ok((c, g)) if g.iter().all(|v| v.is_finite()) => (c, g),
        Ok(_) => return Err(Error::NonFinite("cost gradient")),
        Err(Error::Singular { .. }) => (f64::INFINITY, Vec3::zeros()),
        Err(e) => return Err(e),
    };
    let norm = grad.norm();
    let own = &view.senders[view.own];
    let informative = own.los && own.caps.any();
    let (direction, fallback) = if informative && norm > 0.0 {
        (grad / norm, false)
    } else {
        let (d, towards) = away(&p, &view.target.position);
        if d > 0.0 {
            (-towards, true)
        } else {
            (Vec3::zeros(), true)
        }
    };
    let mut out = plan_control(&p, &direction, &constraints, obstacles, cfg, previous)?;
    out.fallback = fallback;
    out.cost = cost;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infomat::FixedVariances;
    use crate::radar::{CapabilitySet, RadarProfile};
    use approx::assert_relative_eq;
    use nalgebra::Vector6;
    use proptest::prelude::*;

    fn view(senders: Vec<FimSender>, target: TargetState, noise: NoiseModel) -> PlanningView {
        PlanningView {
            senders,
            own: 0,
            target,
            covariance: Matrix6::from_diagonal(&Vector6::new(4.0, 4.0, 4.0, 0.25, 0.25, 0.25)),
            noise,
        }
    }

    fn sender(p: Vec3, caps: CapabilitySet) -> FimSender {
        FimSender {
            position: p,
            velocity: Vec3::zeros(),
            caps,
            los: true,
        }
    }

    #[test]
    fn cost_examples() {
        assert_eq!(cost(&Matrix3::identity()).unwrap(), 0.0);
        assert_relative_eq!(
            cost(&(Matrix3::identity() * 2.0)).unwrap(),
            -3.0 * 2f64.ln(),
            epsilon = 1e-12
        );
        assert_eq!(cost(&Matrix3::zeros()).unwrap(), f64::INFINITY);
        let mut bad = Matrix3::identity();
        bad[(1, 2)] = f64::NAN;
        assert!(cost(&bad).is_err());
    }

    #[test]
    fn constraint_examples() {
        let cfg = NavConfig::default();
        let far = active_constraints(
            &Vec3::zeros(),
            &[(1, Vec3::new(100.0, 0.0, 0.0))],
            &Vec3::new(0.0, 100.0, 0.0),
            &[],
            &cfg,
        );
        assert!(far.is_empty() && far.matrix().ncols() == 0);

        let near = active_constraints(
            &Vec3::zeros(),
            &[(1, Vec3::new(4.0, 0.0, 0.0))],
            &Vec3::new(0.0, 100.0, 0.0),
            &[],
            &cfg,
        );
        assert_eq!(near.kinds, vec![ConstraintKind::Uav(1)]);
        assert_relative_eq!(near.residuals[0], -1.0);
        assert_relative_eq!(near.normals[0], Vec3::new(-1.0, 0.0, 0.0));

        let wall = Obstacle::new(Vec3::new(3.0, -10.0, -10.0), Vec3::new(10.0, 10.0, 10.0));
        let c = active_constraints(
            &Vec3::zeros(),
            &[],
            &Vec3::new(0.0, 100.0, 0.0),
            &[wall],
            &cfg,
        );
        assert_eq!(c.kinds, vec![ConstraintKind::Obstacle(0)]);
        assert_relative_eq!(c.residuals[0], -2.0);
        assert_relative_eq!(c.normals[0], Vec3::new(-1.0, 0.0, 0.0));
    }

    #[test]
    fn unconstrained_step_follows_negative_gradient() {
        let cfg = NavConfig {
            z_min: None,
            ..NavConfig::default()
        };
        let dir = Vec3::new(1.0, 2.0, -2.0).normalize();
        let out = plan_control(
            &Vec3::zeros(),
            &dir,
            &ConstraintSet::default(),
            &[],
            &cfg,
            None,
        )
        .unwrap();
        assert_relative_eq!(out.control, -dir * cfg.step, epsilon = 1e-12);
    }

    #[test]
    fn gradient_along_violated_normal_only_restores() {
        let cfg = NavConfig {
            z_min: None,
            ..NavConfig::default()
        };
        let mut set = ConstraintSet::default();
        set.push(ConstraintKind::Target, -1.5, Vec3::x());
        // Descent would push further into the constraint along -x.
        let out = plan_control(&Vec3::zeros(), &Vec3::x(), &set, &[], &cfg, None).unwrap();
        assert_relative_eq!(out.control, Vec3::new(1.5, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn boundary_constraint_is_released_when_moving_away() {
        let cfg = NavConfig {
            z_min: None,
            ..NavConfig::default()
        };
        let mut set = ConstraintSet::default();
        set.push(ConstraintKind::Uav(3), 0.5, Vec3::x());
        let out = plan_control(&Vec3::zeros(), &(-Vec3::x()), &set, &[], &cfg, None).unwrap();
        assert!(out.constraints.is_empty());
        assert_relative_eq!(out.control, Vec3::new(cfg.step, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn duplicate_constraints_are_dropped() {
        let cfg = NavConfig::default();
        let mut set = ConstraintSet::default();
        set.push(ConstraintKind::Uav(1), -0.5, Vec3::x());
        set.push(ConstraintKind::Uav(2), -0.5, Vec3::x());
        let out = plan_control(
            &Vec3::new(0.0, 0.0, 50.0),
            &Vec3::y(),
            &set,
            &[],
            &cfg,
            None,
        )
        .unwrap();
        assert_eq!(out.dependent_dropped, 1);
    }

    #[test]
    fn backtracking_avoids_thin_wall() {
        let cfg = NavConfig {
            z_min: None,
            ..NavConfig::default()
        };
        let wall = Obstacle::new(Vec3::new(6.0, -50.0, -50.0), Vec3::new(7.0, 50.0, 50.0));
        // Far enough that the wall is not an active constraint, close enough to cross it.
        let p = Vec3::zeros();
        let out = plan_control(
            &p,
            &(-Vec3::x()),
            &ConstraintSet::default(),
            &[wall],
            &cfg,
            None,
        )
        .unwrap();
        assert_eq!(out.backtracks, 1);
        assert!(!wall.blocks_segment(&p, &(p + out.control)));
        assert_relative_eq!(out.control.x, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn mirrored_pair_has_antisymmetric_tangential_gradient() {
        let noise = NoiseModel::new(RadarProfile::default(), 1.0);
        let target = TargetState::new(Vec3::new(0.0, 0.0, 50.0), Vec3::zeros());
        let a = Vec3::new(30.0, 40.0, 60.0);
        let b = Vec3::new(30.0, -40.0, 60.0);
        let g_a = cost_gradient(&view(
            vec![
                sender(a, CapabilitySet::RANGING),
                sender(b, CapabilitySet::RANGING),
            ],
            target,
            noise,
        ))
        .unwrap();
        let g_b = cost_gradient(&view(
            vec![
                sender(b, CapabilitySet::RANGING),
                sender(a, CapabilitySet::RANGING),
            ],
            target,
            noise,
        ))
        .unwrap();
        assert_relative_eq!(g_a.y, -g_b.y, max_relative = 1e-9);
        assert_relative_eq!(g_a.x, g_b.x, max_relative = 1e-9);
        assert_relative_eq!(g_a.z, g_b.z, max_relative = 1e-9);
    }

    #[test]
    fn range_only_gradient_has_no_radial_component_with_fixed_variance() {
        let noise = NoiseModel::new(RadarProfile::default(), 1.0).with_fixed(FixedVariances {
            range: 0.01,
            doppler: 1.0,
            bearing: 0.01,
        });
        let target = TargetState::new(Vec3::new(0.0, 0.0, 50.0), Vec3::zeros());
        let p = Vec3::new(30.0, 20.0, 70.0);
        let mut v = view(vec![sender(p, CapabilitySet::RANGING)], target, noise);
        v.covariance = Matrix6::from_diagonal(&Vector6::new(4.0, 9.0, 16.0, 0.25, 0.25, 0.25));
        let g = cost_gradient(&v).unwrap();
        let a = (target.position - p).normalize();
        assert!(g.dot(&a).abs() < 1e-8 * g.norm().max(1.0), "{g}");
        assert!(g.norm() > 1e-6);
    }

    #[test]
    fn restoration_recovers_feasibility() {
        let cfg = NavConfig {
            z_min: None,
            ..NavConfig::default()
        };
        let target = Vec3::new(0.0, 0.0, 0.0);
        let neighbors = [(1, Vec3::new(3.0, 0.0, 0.0)), (2, Vec3::new(0.0, 3.0, 0.5))];
        let mut p = Vec3::new(1.0, 1.0, 0.2);
        let mut prev = None;
        for _ in 0..50 {
            let set = active_constraints(&p, &neighbors, &target, &[], &cfg);
            let out = plan_control(&p, &Vec3::zeros(), &set, &[], &cfg, prev).unwrap();
            p += out.control;
            prev = Some((out.polar.heading, out.polar.tilt));
        }
        let set = active_constraints(&p, &neighbors, &target, &[], &cfg);
        assert!(
            set.residuals.iter().all(|g| *g >= -1e-3),
            "{:?}",
            set.residuals
        );
    }

    #[test]
    fn nlos_own_record_pursues_target() {
        let noise = NoiseModel::new(RadarProfile::default(), 1.0);
        let target = TargetState::new(Vec3::new(100.0, 0.0, 50.0), Vec3::zeros());
        let mut own = sender(Vec3::new(0.0, 0.0, 50.0), CapabilitySet::RANGING);
        own.los = false;
        let v = view(
            vec![
                own,
                sender(Vec3::new(100.0, 80.0, 60.0), CapabilitySet::RANGING),
            ],
            target,
            noise,
        );
        let out = control_step(&v, &[], &[], &NavConfig::default(), None).unwrap();
        assert!(out.fallback);
        assert!(out.control.x > 0.0);
    }

    fn arb_instance() -> impl Strategy<Value = PlanningView> {
        (
            prop::collection::vec(
                (
                    prop::array::uniform3(-150.0..150.0f64),
                    prop::array::uniform3(-10.0..10.0f64),
                    0usize..7,
                ),
                1..5,
            ),
            prop::array::uniform3(-2.0..2.0f64),
            -3.0..0.0f64,
        )
            .prop_map(|(raw, tv, log_r0)| {
                let senders = raw
                    .into_iter()
                    .map(|(p, v, c)| FimSender {
                        position: Vec3::new(p[0], p[1], p[2] + 100.0),
                        velocity: Vec3::from(v),
                        caps: CapabilitySet {
                            ranging: (c + 1) & 1 != 0,
                            bearing: (c + 1) & 2 != 0,
                            doppler: (c + 1) & 4 != 0,
                        },
                        los: true,
                    })
                    .collect();
                let profile = RadarProfile {
                    sigma_r0_sq: 10f64.powf(log_r0 * 2.0),
                    sigma_d0_sq: 0.1,
                    ..RadarProfile::default()
                };
                let mut v = view(
                    senders,
                    TargetState::new(Vec3::new(0.0, 0.0, 90.0), Vec3::from(tv)),
                    NoiseModel::new(profile, 0.1),
                );
                v.covariance =
                    Matrix6::from_diagonal(&Vector6::new(400.0, 400.0, 400.0, 0.25, 0.25, 0.25));
                v
            })
            .prop_filter("non-degenerate", |v| {
                v.senders.iter().all(|s| {
                    let r = v.target.position - s.position;
                    r.norm() > 10.0 && r.xy().norm() > 1e-2 * r.norm()
                })
            })
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(v in arb_instance()) {
            let g = cost_gradient(&v).unwrap();
            let p = v.own_position();
            let h = 1e-4;
            let mut fd = Vec3::zeros();
            for k in 0..3 {
                let mut hi = p; hi[k] += h;
                let mut lo = p; lo[k] -= h;
                fd[k] = (v.cost_at(&hi).unwrap() - v.cost_at(&lo).unwrap()) / (2.0 * h);
            }
            // Central differences of the cost resolve about 1e-10 in absolute terms.
            prop_assert!((g - fd).norm() < 1e-5 * g.norm().max(fd.norm()) + 1e-9, "{g} vs {fd}");
        }

        #[test]
        fn projection_is_idempotent_and_annihilates(normals in prop::collection::vec(prop::array::uniform3(-1.0..1.0f64), 1..4)) {
            let ns: Vec<Vec3> = normals.iter().map(|n| Vec3::from(*n)).filter(|n| n.norm() > 1e-3).map(|n| n.normalize()).collect();
            let keep = independent_subset(&ns, 1e-6);
            let set = ConstraintSet { kinds: vec![ConstraintKind::Target; keep.len()], residuals: vec![0.0; keep.len()], normals: keep.iter().map(|&i| ns[i]).collect() };
            let n = set.matrix();
            let (p, _) = projection(&n).unwrap();
            prop_assert!((p * p - p).norm() < 1e-10);
            let pn = DMatrix::from_column_slice(3, 3, p.as_slice()) * &n;
            prop_assert!(pn.norm() < 1e-10);
        }

        #[test]
        fn small_step_decreases_cost(v in arb_instance()) {
            let g = cost_gradient(&v).unwrap();
            prop_assume!(g.norm() > 1e-9);
            let p = v.own_position();
            let next = p - g.normalize() * 1e-3;
            prop_assert!(v.cost_at(&next).unwrap() < v.cost_at(&p).unwrap());
        }
    }
}
