//! Scenario files: JSON with explicit units in field names, validated and
//! compiled into the runtime configuration used by the episode loop.

use serde::{Deserialize, Serialize};

use crate::comms::CommsConfig;
use crate::error::{Error, FieldError, Result};
use crate::geometry::{KinematicLimits, TargetState, Vec3};
use crate::nav::NavConfig;
use crate::radar::{
    reference_variances_from_physical, CapabilitySet, PhysicalRadar, RadarProfile, SPEED_OF_LIGHT,
};
use crate::world::{build_random_walk_model, MotionModel, Obstacle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Ranging,
    Bearing,
    Doppler,
}

pub fn capability_set(caps: &[Capability]) -> CapabilitySet {
    CapabilitySet {
        ranging: caps.contains(&Capability::Ranging),
        bearing: caps.contains(&Capability::Bearing),
        doppler: caps.contains(&Capability::Doppler),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Altitude {
    Fixed(f64),
    /// Drawn per episode, uniformly in `[lo, hi]`.
    Uniform([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetSpec {
    pub count: usize,
    /// Horizontal start positions. When `count` exceeds their number, extra
    /// agents are placed on the perimeter of their bounding rectangle.
    pub anchors_xy_m: Vec<[f64; 2]>,
    pub altitude_m: Altitude,
    pub caps: Vec<Capability>,
    /// Fixed (terrestrial) radars never move.
    #[serde(default = "default_true")]
    pub mobile: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpSpec {
    pub bandwidth_hz: f64,
    pub chirp_duration_s: f64,
    pub n_chirp: u32,
    pub snr0_db: f64,
}

impl Default for ChirpSpec {
    fn default() -> Self {
        Self {
            bandwidth_hz: 4e9,
            chirp_duration_s: 1e-4,
            n_chirp: 256,
            snr0_db: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarSpec {
    /// Ranging standard deviation at 1 m against 1 m².
    pub sigma_r0_m: f64,
    /// Bearing standard deviation (beamwidth), degrees.
    pub sigma_b0_deg: f64,
    /// Doppler standard deviation at 1 m against 1 m². Derived from `chirp`
    /// when absent.
    #[serde(default)]
    pub sigma_d0_hz: Option<f64>,
    #[serde(default)]
    pub chirp: ChirpSpec,
    #[serde(default = "default_carrier")]
    pub carrier_hz: f64,
    #[serde(default = "default_gamma")]
    pub path_loss_exponent: f64,
}

fn default_carrier() -> f64 {
    77e9
}

fn default_gamma() -> f64 {
    4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub position_m: [f64; 3],
    pub velocity_mps: [f64; 3],
    /// Diagonal of the velocity random-walk intensity.
    pub process_noise_m2ps3: [f64; 3],
    pub rcs_m2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub min_m: [f64; 3],
    pub max_m: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommsSpec {
    /// Single-hop radius; `null` means unlimited.
    pub r_max_m: Option<f64>,
    pub h_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NavSpec {
    pub step_m: f64,
    pub band_m: f64,
    pub d_uav_m: f64,
    pub d_target_m: f64,
    pub d_obstacle_m: f64,
    pub v_min_mps: f64,
    pub v_max_mps: f64,
    pub heading_rate_deg: f64,
    pub tilt_rate_deg: f64,
    #[serde(default)]
    pub z_min_m: Option<f64>,
    #[serde(default)]
    pub z_max_m: Option<f64>,
    #[serde(default = "default_backtracks")]
    pub max_backtracks: u32,
}

fn default_backtracks() -> u32 {
    8
}

impl Default for NavSpec {
    fn default() -> Self {
        let n = NavConfig::default();
        Self {
            step_m: n.step,
            band_m: n.band,
            d_uav_m: n.d_uav,
            d_target_m: n.d_target,
            d_obstacle_m: n.d_obstacle,
            v_min_mps: n.limits.v_min,
            v_max_mps: n.limits.v_max,
            heading_rate_deg: n.limits.psi_max.to_degrees(),
            tilt_rate_deg: n.limits.theta_max.to_degrees(),
            z_min_m: n.z_min,
            z_max_m: n.z_max,
            max_backtracks: n.max_backtracks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub steps: usize,
    pub monte_carlo: usize,
    pub seed: u64,
    pub dt_s: f64,
    pub fleet: FleetSpec,
    pub radar: RadarSpec,
    pub target: TargetSpec,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    pub comms: CommsSpec,
    #[serde(default)]
    pub nav: NavSpec,
    /// Thresholds at which the success-rate curve is reported, m.
    pub thresholds_m: Vec<f64>,
}

/// Everything the episode loop needs, in SI units and internal types.
#[derive(Debug, Clone)]
pub struct CompiledScenario {
    pub steps: usize,
    pub count: usize,
    pub anchors: Vec<[f64; 2]>,
    pub altitude: Altitude,
    pub caps: CapabilitySet,
    pub mobile: bool,
    pub profile: RadarProfile,
    pub rho: f64,
    pub target: TargetState,
    pub motion: MotionModel,
    pub obstacles: Vec<Obstacle>,
    pub comms: CommsConfig,
    pub nav: NavConfig,
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Every field-level problem, empty when the scenario is usable.
    pub fn problems(&self) -> Vec<FieldError> {
        let mut e = Vec::new();
        let mut check = |ok: bool, field: &str, msg: &str| {
            if !ok {
                e.push(FieldError::new(field, msg));
            }
        };
        check(self.steps >= 1, "steps", "must be at least 1");
        check(self.monte_carlo >= 1, "monte_carlo", "must be at least 1");
        check(
            self.dt_s > 0.0 && self.dt_s.is_finite(),
            "dt_s",
            "must be positive",
        );

        let f = &self.fleet;
        check(f.count >= 1, "fleet.count", "must be at least 1");
        check(
            !f.anchors_xy_m.is_empty(),
            "fleet.anchors_xy_m",
            "needs at least one anchor",
        );
        check(
            f.anchors_xy_m.iter().all(|a| finite(a)),
            "fleet.anchors_xy_m",
            "coordinates must be finite",
        );
        match f.altitude_m {
            Altitude::Fixed(z) => check(z.is_finite(), "fleet.altitude_m", "must be finite"),
            Altitude::Uniform([lo, hi]) => check(
                finite(&[lo, hi]) && lo <= hi,
                "fleet.altitude_m",
                "uniform range needs lo <= hi",
            ),
        }
        check(
            !f.caps.is_empty(),
            "fleet.caps",
            "needs at least one capability",
        );

        let r = &self.radar;
        check(
            r.sigma_r0_m > 0.0 && r.sigma_r0_m.is_finite(),
            "radar.sigma_r0_m",
            "must be positive",
        );
        check(
            r.sigma_b0_deg > 0.0 && r.sigma_b0_deg.is_finite(),
            "radar.sigma_b0_deg",
            "must be positive",
        );
        if let Some(s) = r.sigma_d0_hz {
            check(
                s > 0.0 && s.is_finite(),
                "radar.sigma_d0_hz",
                "must be positive",
            );
        }
        check(
            r.chirp.bandwidth_hz > 0.0,
            "radar.chirp.bandwidth_hz",
            "must be positive",
        );
        check(
            r.chirp.chirp_duration_s > 0.0,
            "radar.chirp.chirp_duration_s",
            "must be positive",
        );
        check(
            r.chirp.n_chirp >= 1,
            "radar.chirp.n_chirp",
            "must be at least 1",
        );
        check(
            r.chirp.snr0_db.is_finite(),
            "radar.chirp.snr0_db",
            "must be finite",
        );
        check(r.carrier_hz > 0.0, "radar.carrier_hz", "must be positive");
        check(
            r.path_loss_exponent > 0.0,
            "radar.path_loss_exponent",
            "must be positive",
        );

        let t = &self.target;
        check(finite(&t.position_m), "target.position_m", "must be finite");
        check(
            finite(&t.velocity_mps),
            "target.velocity_mps",
            "must be finite",
        );
        check(
            t.process_noise_m2ps3
                .iter()
                .all(|w| *w >= 0.0 && w.is_finite()),
            "target.process_noise_m2ps3",
            "entries must be non-negative",
        );
        check(
            t.rcs_m2 > 0.0 && t.rcs_m2.is_finite(),
            "target.rcs_m2",
            "must be positive",
        );

        for (i, o) in self.obstacles.iter().enumerate() {
            let ok = Obstacle::new(Vec3::from(o.min_m), Vec3::from(o.max_m)).is_valid();
            check(
                ok,
                &format!("obstacles[{i}]"),
                "min_m must not exceed max_m on any axis",
            );
        }

        let c = &self.comms;
        if let Some(r) = c.r_max_m {
            check(
                r > 0.0 && !r.is_nan(),
                "comms.r_max_m",
                "must be positive (null for unlimited)",
            );
        }
        check(c.h_max >= 1, "comms.h_max", "must be at least 1");

        let n = &self.nav;
        check(
            n.step_m >= 0.0 && n.step_m.is_finite(),
            "nav.step_m",
            "must be non-negative",
        );
        check(n.band_m >= 0.0, "nav.band_m", "must be non-negative");
        check(n.d_uav_m >= 0.0, "nav.d_uav_m", "must be non-negative");
        check(
            n.d_target_m >= 0.0,
            "nav.d_target_m",
            "must be non-negative",
        );
        check(
            n.d_obstacle_m >= 0.0,
            "nav.d_obstacle_m",
            "must be non-negative",
        );
        check(n.v_min_mps >= 0.0, "nav.v_min_mps", "must be non-negative");
        check(
            n.v_min_mps <= n.v_max_mps,
            "nav.v_min_mps",
            "must not exceed nav.v_max_mps",
        );
        check(
            n.heading_rate_deg > 0.0,
            "nav.heading_rate_deg",
            "must be positive",
        );
        check(
            n.tilt_rate_deg > 0.0,
            "nav.tilt_rate_deg",
            "must be positive",
        );
        if let (Some(lo), Some(hi)) = (n.z_min_m, n.z_max_m) {
            check(lo < hi, "nav.z_min_m", "must be below nav.z_max_m");
        }

        check(
            !self.thresholds_m.is_empty(),
            "thresholds_m",
            "needs at least one threshold",
        );
        check(
            self.thresholds_m.iter().all(|t| *t >= 0.0 && t.is_finite()),
            "thresholds_m",
            "entries must be non-negative",
        );
        e
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(problems))
        }
    }

    pub fn radar_profile(&self) -> RadarProfile {
        let r = &self.radar;
        let gamma = r.path_loss_exponent;
        let sigma_d0_sq = match r.sigma_d0_hz {
            Some(s) => s * s,
            None => {
                let phys = PhysicalRadar {
                    bandwidth_hz: r.chirp.bandwidth_hz,
                    chirp_duration_s: r.chirp.chirp_duration_s,
                    n_chirp: r.chirp.n_chirp,
                    snr0_db: r.chirp.snr0_db,
                };
                reference_variances_from_physical(&phys, gamma).1
            }
        };
        RadarProfile {
            sigma_r0_sq: r.sigma_r0_m * r.sigma_r0_m,
            sigma_d0_sq,
            sigma_b0: r.sigma_b0_deg.to_radians(),
            wavelength: SPEED_OF_LIGHT / r.carrier_hz,
            gamma,
        }
    }

    pub fn compile(&self) -> Result<CompiledScenario> {
        self.validate()?;
        let n = &self.nav;
        let limits = KinematicLimits {
            v_min: n.v_min_mps,
            v_max: n.v_max_mps,
            psi_max: n.heading_rate_deg.to_radians(),
            theta_max: n.tilt_rate_deg.to_radians(),
            dt: self.dt_s,
        };
        let t = &self.target;
        Ok(CompiledScenario {
            steps: self.steps,
            count: self.fleet.count,
            anchors: self.fleet.anchors_xy_m.clone(),
            altitude: self.fleet.altitude_m,
            caps: capability_set(&self.fleet.caps),
            mobile: self.fleet.mobile,
            profile: self.radar_profile(),
            rho: t.rcs_m2,
            target: TargetState::new(Vec3::from(t.position_m), Vec3::from(t.velocity_mps)),
            motion: build_random_walk_model(self.dt_s, Vec3::from(t.process_noise_m2ps3)),
            obstacles: self
                .obstacles
                .iter()
                .map(|o| Obstacle::new(Vec3::from(o.min_m), Vec3::from(o.max_m)))
                .collect(),
            comms: CommsConfig {
                r_max: self.comms.r_max_m.unwrap_or(f64::INFINITY),
                h_max: self.comms.h_max,
            },
            nav: NavConfig {
                step: n.step_m,
                band: n.band_m,
                d_uav: n.d_uav_m,
                d_target: n.d_target_m,
                d_obstacle: n.d_obstacle_m,
                limits,
                z_min: n.z_min_m,
                z_max: n.z_max_m,
                max_backtracks: n.max_backtracks,
            },
        })
    }
}

/// Horizontal start positions for `count` agents: the anchors first, then
/// points on the perimeter of the anchors' bounding rectangle, filling edge
/// midpoints, then quarter points, then eighths (bottom, left, top, right
/// edge in turn).
pub fn layout_positions(anchors: &[[f64; 2]], count: usize) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = anchors.iter().take(count).copied().collect();
    if out.len() == count {
        return out;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for a in anchors {
        x0 = x0.min(a[0]);
        x1 = x1.max(a[0]);
        y0 = y0.min(a[1]);
        y1 = y1.max(a[1]);
    }
    let mut level = 1u32;
    'fill: loop {
        let denom = f64::from(1u32 << level);
        for num in (1..(1u32 << level)).step_by(2) {
            let t = f64::from(num) / denom;
            let edges = [
                [x0 + t * (x1 - x0), y0],
                [x0, y0 + t * (y1 - y0)],
                [x0 + t * (x1 - x0), y1],
                [x1, y0 + t * (y1 - y0)],
            ];
            for p in edges {
                if out.len() == count {
                    break 'fill;
                }
                if !out.contains(&p) {
                    out.push(p);
                }
            }
        }
        level += 1;
        if level > 20 {
            // Degenerate rectangle: stack the remaining agents on the last anchor.
            while out.len() < count {
                out.push(*anchors.last().expect("validated non-empty"));
            }
            break;
        }
    }
    out
}
