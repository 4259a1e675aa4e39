//! Position information matrices: per-channel geometric matrices, the
//! measurement FIM, fusion with the predictive prior, and a closed-form
//! scalar expansion used as a cross-check.

use nalgebra::{Cholesky, DMatrix, Matrix3, Matrix6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{direction_vector, relative_spherical, TargetState, Vec3};
use crate::radar::{CapabilitySet, RadarProfile};
use crate::tracker::{angular_velocity, StackedObservation, POLE_EPS};

/// Outer products of the position gradients of each observable. The range
/// and Doppler matrices carry their channel scale; the bearing matrices carry
/// their `1/d` factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricMatrices {
    pub g_r: Matrix3<f64>,
    /// `None` on the pole, where azimuth is undefined.
    pub g_phi: Option<Matrix3<f64>>,
    pub g_theta: Option<Matrix3<f64>>,
    pub g_d: Matrix3<f64>,
}

/// Doppler cross-product entries `(g_xx, g_yy, g_zz, g_xy, g_xz, g_yz)`.
fn doppler_entries(phi: f64, theta: f64, omega: &Vec3) -> [f64; 6] {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let (wx, wy, wz) = (omega.x, omega.y, omega.z);
    let tx = -sp * st * wz + ct * wy;
    let ty = cp * st * wz - ct * wx;
    let tz = -cp * st * wy + sp * st * wx;
    [tx * tx, ty * ty, tz * tz, tx * ty, tx * tz, ty * tz]
}

fn symmetric_from_entries(e: [f64; 6]) -> Matrix3<f64> {
    let [xx, yy, zz, xy, xz, yz] = e;
    Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
}

pub fn geometric_matrices(
    phi: f64,
    theta: f64,
    d: f64,
    omega: &Vec3,
    profile: &RadarProfile,
) -> Result<GeometricMatrices> {
    if !(d > 0.0) {
        return Err(Error::DegenerateGeometry("zero sender-target distance"));
    }
    let a = direction_vector(phi, theta);
    let g_r = a * a.transpose() * (profile.gamma * profile.gamma / 4.0);
    let st = theta.sin();
    let (g_phi, g_theta) = if st.abs() < POLE_EPS {
        (None, None)
    } else {
        let u = direction_vector(
            phi + std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
        );
        let b = direction_vector(phi, theta + std::f64::consts::FRAC_PI_2);
        (
            Some(u * u.transpose() / (d * st).powi(2)),
            Some(b * b.transpose() / (d * d)),
        )
    };
    let g_d = symmetric_from_entries(doppler_entries(phi, theta, omega))
        * profile.doppler_scale().powi(2);
    Ok(GeometricMatrices {
        g_r,
        g_phi,
        g_theta,
        g_d,
    })
}

/// Constant per-channel variances that replace the distance-dependent model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedVariances {
    pub range: f64,
    pub doppler: f64,
    pub bearing: f64,
}

/// Variances used when predicting information for a candidate geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub profile: RadarProfile,
    /// Radar cross-section assumed for the target, m².
    pub rho: f64,
    pub fixed: Option<FixedVariances>,
}

impl NoiseModel {
    pub fn new(profile: RadarProfile, rho: f64) -> Self {
        Self {
            profile,
            rho,
            fixed: None,
        }
    }

    pub fn with_fixed(self, fixed: FixedVariances) -> Self {
        Self {
            fixed: Some(fixed),
            ..self
        }
    }

    pub fn range_variance(&self, d: f64) -> f64 {
        match self.fixed {
            Some(f) => f.range,
            None => self.profile.range_variance(d, self.rho),
        }
    }

    pub fn doppler_variance(&self, d: f64) -> f64 {
        match self.fixed {
            Some(f) => f.doppler,
            None => self.profile.doppler_variance(d, self.rho),
        }
    }

    pub fn bearing_variance(&self) -> f64 {
        match self.fixed {
            Some(f) => f.bearing,
            None => self.profile.bearing_variance(),
        }
    }

    /// `d ln(1/sigma^2) / d d` for the distance-dependent channels.
    fn weight_log_slope(&self, d: f64) -> f64 {
        match self.fixed {
            Some(_) => 0.0,
            None => -self.profile.gamma / d,
        }
    }
}

/// One contributor to an agent's information matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimSender {
    pub position: Vec3,
    pub velocity: Vec3,
    pub caps: CapabilitySet,
    pub los: bool,
}

/// Information one sender contributes about the target position.
pub fn sender_information(
    target: &TargetState,
    sender: &FimSender,
    noise: &NoiseModel,
) -> Result<Matrix3<f64>> {
    if !sender.los || !sender.caps.any() {
        return Ok(Matrix3::zeros());
    }
    let rel = relative_spherical(&sender.position, &target.position)?;
    let omega = angular_velocity(
        &target.position,
        &target.velocity,
        &sender.position,
        &sender.velocity,
    )?;
    let g = geometric_matrices(rel.phi, rel.theta, rel.d, &omega, &noise.profile)?;
    let mut j = Matrix3::zeros();
    if sender.caps.ranging {
        j += g.g_r / noise.range_variance(rel.d);
    }
    if sender.caps.doppler {
        j += g.g_d / noise.doppler_variance(rel.d);
    }
    if sender.caps.bearing {
        if let (Some(gp), Some(gt)) = (g.g_phi, g.g_theta) {
            j += (gp + gt) / noise.bearing_variance();
        }
    }
    Ok(j)
}

/// Sum of LOS sender contributions at the predicted target state.
pub fn measurement_fim(
    target: &TargetState,
    senders: &[FimSender],
    noise: &NoiseModel,
) -> Result<Matrix3<f64>> {
    senders.iter().try_fold(Matrix3::zeros(), |acc, s| {
        Ok(acc + sender_information(target, s, noise)?)
    })
}

fn invert_spd6(p: &Matrix6<f64>, what: &'static str) -> Result<Matrix6<f64>> {
    match Cholesky::new(*p) {
        Some(c) => Ok(c.inverse()),
        None => Err(Error::Singular {
            what,
            rcond: rcond6(p),
        }),
    }
}

fn rcond6(p: &Matrix6<f64>) -> f64 {
    let sv = p.singular_values();
    if sv.max() == 0.0 {
        0.0
    } else {
        sv.min() / sv.max()
    }
}

/// Position block of the inverse predictive covariance.
pub fn prior_information(p_pred: &Matrix6<f64>) -> Result<Matrix3<f64>> {
    let inv = invert_spd6(p_pred, "predictive covariance")?;
    let block = inv.fixed_view::<3, 3>(0, 0).into_owned();
    Ok((block + block.transpose()) * 0.5)
}

pub fn fuse_with_prior(p_pred: &Matrix6<f64>, j_meas: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    Ok(prior_information(p_pred)? + j_meas)
}

/// Position information of the EKF posterior computed through the innovation
/// covariance: the position block of `(P - P H^T S^-1 H P)^-1`. Independent
/// of `fuse_with_prior`, against which it is checked.
pub fn posterior_position_information(
    p_pred: &Matrix6<f64>,
    obs: &StackedObservation,
) -> Result<Matrix3<f64>> {
    let p = DMatrix::from_column_slice(6, 6, p_pred.as_slice());
    let post = if obs.rows() == 0 {
        p
    } else {
        let h = &obs.jacobian;
        let s = h * &p * h.transpose() + DMatrix::from_diagonal(&obs.noise);
        let s_inv = s.try_inverse().ok_or(Error::Singular {
            what: "innovation covariance",
            rcond: 0.0,
        })?;
        &p - &p * h.transpose() * s_inv * h * &p
    };
    let post = Matrix6::from_column_slice(post.as_slice());
    let inv = post.try_inverse().ok_or(Error::Singular {
        what: "posterior covariance",
        rcond: rcond6(&post),
    })?;
    Ok(inv.fixed_view::<3, 3>(0, 0).into_owned())
}

/// Which coefficient the closed-form expansion uses on the Doppler part of
/// the xz entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarVariant {
    /// `gamma^2 / (2 lambda^2)`, as the closed form is usually printed.
    AsPrinted,
    /// `gamma^2 / (4 lambda^2)`, consistent with the other five entries.
    Corrected,
}

/// The six unique entries of a symmetric 3x3 information matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScalarEntries {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl ScalarEntries {
    pub fn to_matrix(&self) -> Matrix3<f64> {
        symmetric_from_entries([self.xx, self.yy, self.zz, self.xy, self.xz, self.yz])
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Self {
            xx: m[(0, 0)],
            yy: m[(1, 1)],
            zz: m[(2, 2)],
            xy: m[(0, 1)],
            xz: m[(0, 2)],
            yz: m[(1, 2)],
        }
    }
}

/// Closed-form scalar expansion of prior plus measurement information,
/// written term by term in `(phi, theta, d)`.
pub fn scalar_fim_entries(
    target: &TargetState,
    senders: &[FimSender],
    noise: &NoiseModel,
    prior: &Matrix3<f64>,
    variant: ScalarVariant,
) -> Result<ScalarEntries> {
    let mut e = ScalarEntries::from_matrix(prior);
    let gamma = noise.profile.gamma;
    let lambda = noise.profile.wavelength;
    let xz_doppler_denominator = match variant {
        ScalarVariant::AsPrinted => 2.0,
        ScalarVariant::Corrected => 4.0,
    };
    for s in senders {
        if !s.los {
            continue;
        }
        let rel = relative_spherical(&s.position, &target.position)?;
        let omega = angular_velocity(&target.position, &target.velocity, &s.position, &s.velocity)?;
        let (sp, cp) = rel.phi.sin_cos();
        let (st, ct) = rel.theta.sin_cos();
        let d = rel.d;
        let kappa = f64::from(u8::from(s.caps.ranging));
        let xi = f64::from(u8::from(s.caps.doppler));
        let beta = f64::from(u8::from(s.caps.bearing && st.abs() >= POLE_EPS));

        let r = kappa * gamma * gamma / (4.0 * noise.range_variance(d));
        let dop = xi * gamma * gamma / (lambda * lambda * noise.doppler_variance(d));
        let b = if beta > 0.0 {
            beta / (noise.bearing_variance() * d * d)
        } else {
            0.0
        };
        let [gxx, gyy, gzz, gxy, gxz, gyz] = doppler_entries(rel.phi, rel.theta, &omega);
        // Guard the 1/sin(theta) terms when bearing is off.
        let inv_st2 = if beta > 0.0 { 1.0 / (st * st) } else { 0.0 };

        e.xx +=
            r * (cp * st).powi(2) + b * ((sp * sp) * inv_st2 + (cp * ct).powi(2)) + dop / 4.0 * gxx;
        e.xy +=
            r * sp * cp * st * st + dop / 4.0 * gxy - b * sp * cp * inv_st2 + b * sp * cp * ct * ct;
        e.xz += r * cp * st * ct - b * cp * st * ct + dop / xz_doppler_denominator * gxz;
        e.yy +=
            r * (sp * st).powi(2) + b * ((cp * cp) * inv_st2 + (sp * ct).powi(2)) + dop / 4.0 * gyy;
        e.zz += r * ct * ct + dop / 4.0 * gzz + b * st * st;
        e.yz += r * st * ct * sp + dop / 4.0 * gyz - b * sp * st * ct;
    }
    Ok(e)
}

/// Derivatives of one sender's information matrix with respect to that
/// sender's position, one matrix per coordinate, with the target fixed.
pub fn sender_information_gradient(
    target: &TargetState,
    sender: &FimSender,
    noise: &NoiseModel,
) -> Result<[Matrix3<f64>; 3]> {
    let mut out = [Matrix3::zeros(); 3];
    if !sender.los || !sender.caps.any() {
        return Ok(out);
    }
    let r = target.position - sender.position;
    let d = r.norm();
    if !(d > 0.0) {
        return Err(Error::DegenerateGeometry("zero sender-target distance"));
    }
    let a = r / d;
    let proj = Matrix3::identity() - a * a.transpose();
    let da = proj / d; // d a / d r
    let slope = noise.weight_log_slope(d);
    let profile = &noise.profile;

    // Each channel contributes w(d) g g^T with g = g(r); collect dM/dr_k.
    let mut add = |w: f64, dw_dr: Vec3, g: Vec3, dg_dr: Matrix3<f64>| {
        for (k, m) in out.iter_mut().enumerate() {
            let dg = dg_dr.column(k).into_owned();
            *m += g * g.transpose() * dw_dr[k] + (dg * g.transpose() + g * dg.transpose()) * w;
        }
    };

    if sender.caps.ranging {
        let w = 1.0 / noise.range_variance(d);
        let g = a * (profile.gamma / 2.0);
        add(w, a * (w * slope), g, da * (profile.gamma / 2.0));
    }
    if sender.caps.doppler {
        let w = 1.0 / noise.doppler_variance(d);
        let scale = profile.doppler_scale();
        let dv = target.velocity - sender.velocity;
        let adv = a.dot(&dv);
        let t = (dv - a * adv) / d;
        // t = (dv - a (a.dv)) / d
        let dt = (-(t * a.transpose()) - (da * adv + a * (dv.transpose() * da))) / d;
        add(w, a * (w * slope), t * scale, dt * scale);
    }
    if sender.caps.bearing {
        let (x, y, z) = (r.x, r.y, r.z);
        let rho_sq = x * x + y * y;
        let rho = rho_sq.sqrt();
        if rho >= POLE_EPS * d {
            let w = 1.0 / noise.bearing_variance();
            let zero = Vec3::zeros();

            let u = Vec3::new(-y, x, 0.0) / rho_sq;
            let du_dx = Vec3::new(0.0, 1.0, 0.0) / rho_sq - u * (2.0 * x / rho_sq);
            let du_dy = Vec3::new(-1.0, 0.0, 0.0) / rho_sq - u * (2.0 * y / rho_sq);
            add(w, zero, u, Matrix3::from_columns(&[du_dx, du_dy, zero]));

            let d_sq = d * d;
            let f = Vec3::new(x * z / rho, y * z / rho, -rho);
            let rho3 = rho_sq * rho;
            let df_dx = Vec3::new(z / rho - x * x * z / rho3, -x * y * z / rho3, -x / rho);
            let df_dy = Vec3::new(-x * y * z / rho3, z / rho - y * y * z / rho3, -y / rho);
            let df_dz = Vec3::new(x / rho, y / rho, 0.0);
            let df = Matrix3::from_columns(&[df_dx, df_dy, df_dz]);
            let b = f / d_sq;
            let db = df / d_sq - f * a.transpose() * (2.0 / (d_sq * d));
            add(w, zero, b, db);
        }
    }
    // Derivatives were taken in r = p0 - p_sender.
    for m in &mut out {
        *m = -*m;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::{jacobian, stack};
    use approx::assert_relative_eq;
    use nalgebra::Vector6;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn profile() -> RadarProfile {
        RadarProfile::default()
    }

    fn noise() -> NoiseModel {
        NoiseModel::new(profile(), 0.1)
    }

    #[test]
    fn range_matrix_along_x() {
        let g = geometric_matrices(0.0, FRAC_PI_2, 10.0, &Vec3::zeros(), &profile()).unwrap();
        let mut expected = Matrix3::zeros();
        expected[(0, 0)] = 4.0;
        assert_relative_eq!(g.g_r, expected, epsilon = 1e-14);
        assert_eq!(g.g_d, Matrix3::zeros());
    }

    #[test]
    fn pole_omits_bearing() {
        let g = geometric_matrices(0.3, 0.0, 10.0, &Vec3::zeros(), &profile()).unwrap();
        assert!(g.g_phi.is_none() && g.g_theta.is_none());
        assert!(geometric_matrices(0.3, 1.0, 0.0, &Vec3::zeros(), &profile()).is_err());
    }

    #[test]
    fn single_range_sender_fim() {
        let n = NoiseModel::new(profile(), 1.0).with_fixed(FixedVariances {
            range: 0.01,
            doppler: 1.0,
            bearing: 0.01,
        });
        let target = TargetState::new(Vec3::new(10.0, 0.0, 0.0), Vec3::zeros());
        let s = FimSender {
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            caps: CapabilitySet::RANGING,
            los: true,
        };
        let j = measurement_fim(&target, &[s], &n).unwrap();
        assert_relative_eq!(
            j,
            Matrix3::from_diagonal(&Vec3::new(400.0, 0.0, 0.0)),
            epsilon = 1e-10
        );

        let scalar = scalar_fim_entries(
            &target,
            &[s],
            &n,
            &Matrix3::zeros(),
            ScalarVariant::AsPrinted,
        )
        .unwrap();
        assert_relative_eq!(scalar.xx, 400.0, epsilon = 1e-10);
        for v in [scalar.yy, scalar.zz, scalar.xy, scalar.xz, scalar.yz] {
            assert!(v.abs() < 1e-10);
        }

        let nlos = FimSender { los: false, ..s };
        assert_eq!(
            measurement_fim(&target, &[nlos, nlos], &n).unwrap(),
            Matrix3::zeros()
        );
    }

    #[test]
    fn bearing_zz_term() {
        let n = NoiseModel::new(profile(), 1.0).with_fixed(FixedVariances {
            range: 1.0,
            doppler: 1.0,
            bearing: 0.01,
        });
        let target = TargetState::new(Vec3::new(10.0, 0.0, 0.0), Vec3::zeros());
        let s = FimSender {
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            caps: CapabilitySet::BEARING,
            los: true,
        };
        let e = scalar_fim_entries(
            &target,
            &[s],
            &n,
            &Matrix3::zeros(),
            ScalarVariant::AsPrinted,
        )
        .unwrap();
        assert_relative_eq!(e.zz, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fusion_examples() {
        let p = Matrix6::from_diagonal(&Vector6::new(4.0, 4.0, 4.0, 1.0, 1.0, 1.0));
        assert_relative_eq!(
            prior_information(&p).unwrap(),
            Matrix3::identity() * 0.25,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            fuse_with_prior(&p, &Matrix3::identity()).unwrap(),
            Matrix3::identity() * 1.25,
            epsilon = 1e-14
        );
        assert!(prior_information(&Matrix6::zeros()).is_err());
    }

    fn arb_sender() -> impl Strategy<Value = FimSender> {
        (
            prop::array::uniform3(-300.0..300.0f64),
            prop::array::uniform3(-20.0..20.0f64),
            0usize..7,
            prop::bool::weighted(0.85),
        )
            .prop_map(|(p, v, c, los)| FimSender {
                position: Vec3::from(p),
                velocity: Vec3::from(v),
                caps: CapabilitySet {
                    ranging: (c + 1) & 1 != 0,
                    bearing: (c + 1) & 2 != 0,
                    doppler: (c + 1) & 4 != 0,
                },
                los,
            })
    }

    fn arb_target() -> impl Strategy<Value = TargetState> {
        (
            prop::array::uniform3(-50.0..50.0f64),
            prop::array::uniform3(-2.0..2.0f64),
        )
            .prop_map(|(p, v)| TargetState::new(Vec3::new(p[0], p[1], p[2] + 80.0), Vec3::from(v)))
    }

    fn far_enough(t: &TargetState, s: &[FimSender]) -> bool {
        s.iter().all(|s| {
            let r = t.position - s.position;
            r.norm() > 5.0 && (r.x * r.x + r.y * r.y).sqrt() > 1e-3 * r.norm()
        })
    }

    proptest! {
        #[test]
        fn matrices_are_outer_products_of_rows(t in arb_target(), s in arb_sender()) {
            prop_assume!(far_enough(&t, &[s]));
            let p = profile();
            let rel = relative_spherical(&s.position, &t.position).unwrap();
            let omega = angular_velocity(&t.position, &t.velocity, &s.position, &s.velocity).unwrap();
            let g = geometric_matrices(rel.phi, rel.theta, rel.d, &omega, &p).unwrap();
            let rows = jacobian(&t.to_vector(), &s.position, &s.velocity, &p, CapabilitySet::FULL).unwrap();
            let outer = |r: crate::tracker::Row6| {
                let v = Vec3::new(r[0], r[1], r[2]);
                v * v.transpose()
            };
            let scale = |m: &Matrix3<f64>| 1e-10 * (1.0 + m.abs().max());
            let gr = outer(rows.range.unwrap());
            prop_assert!((g.g_r - gr).abs().max() < scale(&gr));
            let gp = outer(rows.azimuth.unwrap());
            prop_assert!((g.g_phi.unwrap() - gp).abs().max() < scale(&gp));
            let gt = outer(rows.elevation.unwrap());
            prop_assert!((g.g_theta.unwrap() - gt).abs().max() < scale(&gt));
            let gd = outer(rows.doppler.unwrap());
            prop_assert!((g.g_d - gd).abs().max() < scale(&gd));
        }

        #[test]
        fn fim_matches_matrix_product(t in arb_target(), senders in prop::collection::vec(arb_sender(), 1..6)) {
            prop_assume!(far_enough(&t, &senders));
            let n = noise();
            let j = measurement_fim(&t, &senders, &n).unwrap();
            // H^T R^-1 H restricted to position, from tracker rows.
            let mut oracle = Matrix3::zeros();
            for s in senders.iter().filter(|s| s.los) {
                let rows = jacobian(&t.to_vector(), &s.position, &s.velocity, &n.profile, s.caps).unwrap();
                let d = (t.position - s.position).norm();
                let chans = [
                    (rows.range, n.range_variance(d)),
                    (rows.azimuth, n.bearing_variance()),
                    (rows.elevation, n.bearing_variance()),
                    (rows.doppler, n.doppler_variance(d)),
                ];
                for (row, var) in chans {
                    if let Some(r) = row {
                        let v = Vec3::new(r[0], r[1], r[2]);
                        oracle += v * v.transpose() / var;
                    }
                }
            }
            prop_assert!((j - oracle).abs().max() <= 1e-9 * oracle.abs().max().max(1e-300));
        }

        #[test]
        fn fim_is_order_invariant(t in arb_target(), mut senders in prop::collection::vec(arb_sender(), 2..6)) {
            prop_assume!(far_enough(&t, &senders));
            let n = noise();
            let a = measurement_fim(&t, &senders, &n).unwrap();
            senders.reverse();
            let b = measurement_fim(&t, &senders, &n).unwrap();
            prop_assert!((a - b).abs().max() <= 1e-12 * a.abs().max().max(1e-300));
        }

        #[test]
        fn corrected_scalar_form_matches_matrix(t in arb_target(), senders in prop::collection::vec(arb_sender(), 1..6)) {
            prop_assume!(far_enough(&t, &senders));
            let n = noise();
            let prior = Matrix3::new(2.0, 0.1, 0.0, 0.1, 3.0, -0.2, 0.0, -0.2, 1.5);
            let m = measurement_fim(&t, &senders, &n).unwrap() + prior;
            let e = scalar_fim_entries(&t, &senders, &n, &prior, ScalarVariant::Corrected).unwrap().to_matrix();
            prop_assert!((m - e).abs().max() <= 1e-9 * m.abs().max());
        }

        #[test]
        fn sender_gradient_matches_finite_differences(t in arb_target(), s in arb_sender()) {
            prop_assume!(far_enough(&t, &[s]) && s.los);
            let n = noise();
            let grad = sender_information_gradient(&t, &s, &n).unwrap();
            for k in 0..3 {
                let h = 1e-4;
                let mut hi = s; hi.position[k] += h;
                let mut lo = s; lo.position[k] -= h;
                let fd = (sender_information(&t, &hi, &n).unwrap() - sender_information(&t, &lo, &n).unwrap()) / (2.0 * h);
                let scale = grad[k].abs().max().max(fd.abs().max()).max(1e-300);
                prop_assert!((fd - grad[k]).abs().max() / scale < 1e-5, "coord {k}: {fd} vs {}", grad[k]);
            }
        }

        #[test]
        fn innovation_form_matches_information_form(t in arb_target(), senders in prop::collection::vec(arb_sender(), 0..6)) {
            prop_assume!(far_enough(&t, &senders));
            let n = NoiseModel::new(RadarProfile { sigma_r0_sq: 1e-4, ..profile() }, 1.0);
            let p_pred = Matrix6::from_diagonal(&Vector6::new(9.0, 16.0, 25.0, 0.5, 0.4, 0.3));
            // Records whose stored variances match the model at the true distance.
            let recs: Vec<_> = senders.iter().enumerate().map(|(i, s)| {
                let d = (t.position - s.position).norm();
                let ch = |var: f64| Some(crate::radar::Channel { value: 0.0, variance: var });
                crate::radar::MeasurementRecord {
                    sender: i, sender_position: s.position, sender_velocity: s.velocity, emitted_at: 1,
                    los: s.los, caps: s.caps,
                    range: if s.caps.ranging { ch(n.range_variance(d)) } else { None },
                    azimuth: if s.caps.bearing { ch(n.bearing_variance()) } else { None },
                    elevation: if s.caps.bearing { ch(n.bearing_variance()) } else { None },
                    doppler: if s.caps.doppler { ch(n.doppler_variance(d)) } else { None },
                }
            }).collect();
            let obs = stack(&t.to_vector(), recs.iter(), &n.profile).unwrap();
            let eq_info = fuse_with_prior(&p_pred, &measurement_fim(&t, &senders, &n).unwrap()).unwrap();
            let eq_innov = posterior_position_information(&p_pred, &obs).unwrap();
            prop_assert!((eq_info - eq_innov).abs().max() <= 1e-8 * eq_info.abs().max());
        }
    }
}
