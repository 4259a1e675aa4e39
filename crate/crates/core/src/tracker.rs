//! Per-agent extended Kalman filter over the stacked, possibly aged records
//! an agent holds at one step.

use nalgebra::{DMatrix, DVector, Matrix6, RowVector6, Vector6};

use crate::comms::InfoVector;
use crate::error::{Error, Result};
use crate::geometry::{relative_spherical, wrap_angle, Vec3, Vec6};
use crate::radar::{CapabilitySet, MeasurementRecord, RadarProfile};
use crate::world::MotionModel;

pub type Row6 = RowVector6<f64>;

/// Below this |sin(theta)| bearing rows are singular and are dropped.
pub const POLE_EPS: f64 = 1e-9;

/// Gaussian belief over the 6-state `(p0, v0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    pub mean: Vec6,
    pub cov: Matrix6<f64>,
}

impl Belief {
    pub fn new(mean: Vec6, cov: Matrix6<f64>) -> Self {
        Self { mean, cov }
    }

    /// Zero mean, 20 m position and 0.5 m/s velocity standard deviation.
    pub fn initial() -> Self {
        let diag = Vector6::new(400.0, 400.0, 400.0, 0.25, 0.25, 0.25);
        Self::new(Vec6::zeros(), Matrix6::from_diagonal(&diag))
    }

    pub fn position(&self) -> Vec3 {
        self.mean.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vec3 {
        self.mean.fixed_rows::<3>(3).into_owned()
    }
}

pub fn predict(belief: &Belief, model: &MotionModel) -> Belief {
    let a = &model.transition;
    let cov = a * belief.cov * a.transpose() + model.process_noise;
    Belief::new(a * belief.mean, symmetrize(&cov))
}

fn symmetrize(m: &Matrix6<f64>) -> Matrix6<f64> {
    (m + m.transpose()) * 0.5
}

/// `(p0 - p_i) x (v0 - v_i) / d^2`.
pub fn angular_velocity(p0: &Vec3, v0: &Vec3, p_i: &Vec3, v_i: &Vec3) -> Result<Vec3> {
    let r = p0 - p_i;
    let d_sq = r.norm_squared();
    if d_sq == 0.0 {
        return Err(Error::DegenerateGeometry("target coincides with sender"));
    }
    Ok(r.cross(&(v0 - v_i)) / d_sq)
}

/// Observation-model rows of one sender evaluated at a state estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JacobianRows {
    pub range: Option<Row6>,
    pub azimuth: Option<Row6>,
    pub elevation: Option<Row6>,
    pub doppler: Option<Row6>,
    /// Bearing was requested but the geometry is on the pole.
    pub bearing_dropped: bool,
}

/// Noise-free observables predicted from a state estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PredictedObservables {
    pub range: Option<f64>,
    pub azimuth: Option<f64>,
    pub elevation: Option<f64>,
    pub doppler: Option<f64>,
}

pub fn predict_observables(
    state: &Vec6,
    sender_position: &Vec3,
    sender_velocity: &Vec3,
    profile: &RadarProfile,
    caps: CapabilitySet,
) -> Result<PredictedObservables> {
    let p0 = state.fixed_rows::<3>(0).into_owned();
    let v0 = state.fixed_rows::<3>(3).into_owned();
    let rel = relative_spherical(sender_position, &p0)?;
    let a = rel.direction();
    Ok(PredictedObservables {
        range: caps.ranging.then(|| profile.gamma / 2.0 * rel.d),
        azimuth: caps.bearing.then_some(rel.phi),
        elevation: caps.bearing.then_some(rel.theta),
        doppler: caps
            .doppler
            .then(|| profile.doppler_scale() * a.dot(&(v0 - sender_velocity))),
    })
}

fn row(pos: &Vec3, vel: &Vec3) -> Row6 {
    Row6::new(pos.x, pos.y, pos.z, vel.x, vel.y, vel.z)
}

pub fn jacobian(
    state: &Vec6,
    sender_position: &Vec3,
    sender_velocity: &Vec3,
    profile: &RadarProfile,
    caps: CapabilitySet,
) -> Result<JacobianRows> {
    let p0 = state.fixed_rows::<3>(0).into_owned();
    let v0 = state.fixed_rows::<3>(3).into_owned();
    let rel = relative_spherical(sender_position, &p0)?;
    let (sp, cp) = rel.phi.sin_cos();
    let (st, ct) = rel.theta.sin_cos();
    let d = rel.d;
    let a = Vec3::new(cp * st, sp * st, ct);
    let zero = Vec3::zeros();
    let mut rows = JacobianRows::default();

    if caps.ranging {
        rows.range = Some(row(&(a * (profile.gamma / 2.0)), &zero));
    }
    if caps.bearing {
        if st.abs() < POLE_EPS {
            rows.bearing_dropped = true;
        } else {
            let az = Vec3::new(-sp, cp, 0.0) / (d * st);
            let el = Vec3::new(cp * ct, sp * ct, -st) / d;
            rows.azimuth = Some(row(&az, &zero));
            rows.elevation = Some(row(&el, &zero));
        }
    }
    if caps.doppler {
        let scale = profile.doppler_scale();
        let omega = angular_velocity(&p0, &v0, sender_position, sender_velocity)?;
        let dp = omega.cross(&a) * scale;
        rows.doppler = Some(row(&dp, &(a * scale)));
    }
    Ok(rows)
}

/// Stacked innovation, Jacobian and diagonal noise of all LOS records.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedObservation {
    /// Measurement minus prediction, azimuth wrapped.
    pub innovation: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    /// Diagonal of the block-diagonal noise covariance.
    pub noise: DVector<f64>,
    pub bearing_dropped: usize,
}

impl StackedObservation {
    pub fn rows(&self) -> usize {
        self.innovation.len()
    }
}

pub fn stack<'a>(
    state: &Vec6,
    records: impl IntoIterator<Item = &'a MeasurementRecord>,
    profile: &RadarProfile,
) -> Result<StackedObservation> {
    let mut innov = Vec::new();
    let mut rows: Vec<Row6> = Vec::new();
    let mut noise = Vec::new();
    let mut dropped = 0;
    for rec in records {
        if !rec.los {
            continue;
        }
        let h = predict_observables(
            state,
            &rec.sender_position,
            &rec.sender_velocity,
            profile,
            rec.caps,
        )?;
        let jac = jacobian(
            state,
            &rec.sender_position,
            &rec.sender_velocity,
            profile,
            rec.caps,
        )?;
        if jac.bearing_dropped {
            dropped += 1;
        }
        let mut push =
            |ch: Option<crate::radar::Channel>, pred: Option<f64>, r: Option<Row6>, wrap: bool| {
                if let (Some(ch), Some(pred), Some(r)) = (ch, pred, r) {
                    let e = ch.value - pred;
                    innov.push(if wrap { wrap_angle(e) } else { e });
                    rows.push(r);
                    noise.push(ch.variance);
                }
            };
        push(rec.range, h.range, jac.range, false);
        push(rec.azimuth, h.azimuth, jac.azimuth, true);
        push(rec.elevation, h.elevation, jac.elevation, false);
        push(rec.doppler, h.doppler, jac.doppler, false);
    }
    let m = rows.len();
    let jacobian = DMatrix::from_fn(m, 6, |i, j| rows[i][j]);
    Ok(StackedObservation {
        innovation: DVector::from_vec(innov),
        jacobian,
        noise: DVector::from_vec(noise),
        bearing_dropped: dropped,
    })
}

/// Joseph-form EKF update with an already-stacked observation. With no rows
/// the prior is returned unchanged.
pub fn update_stacked(prior: &Belief, obs: &StackedObservation) -> Result<Belief> {
    if obs.rows() == 0 {
        return Ok(prior.clone());
    }
    if obs.noise.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::NonFinite("measurement noise"));
    }
    let p = DMatrix::from_column_slice(6, 6, prior.cov.as_slice());
    let h = &obs.jacobian;
    let r = DMatrix::from_diagonal(&obs.noise);
    let ph_t = &p * h.transpose();
    let s = h * &ph_t + &r;
    let chol = s.clone().cholesky().ok_or_else(|| Error::Singular {
        what: "innovation covariance",
        rcond: rcond_estimate(&s),
    })?;
    // K = P H^T S^-1, solved as S K^T = H P.
    let k = chol.solve(&ph_t.transpose()).transpose();
    let ikh = DMatrix::<f64>::identity(6, 6) - &k * h;
    let cov = &ikh * &p * ikh.transpose() + &k * &r * k.transpose();
    let mean = prior.mean + Vec6::from_column_slice((&k * &obs.innovation).as_slice());
    let cov = Matrix6::from_column_slice(cov.as_slice());
    if !cov.iter().chain(mean.iter()).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("posterior belief"));
    }
    Ok(Belief::new(mean, symmetrize(&cov)))
}

fn rcond_estimate(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

/// Update with every LOS record in the info vector, linearised at the prior mean.
pub fn update(prior: &Belief, info: &InfoVector, profile: &RadarProfile) -> Result<Belief> {
    let obs = stack(&prior.mean, info.records(), profile)?;
    update_stacked(prior, &obs)
}
