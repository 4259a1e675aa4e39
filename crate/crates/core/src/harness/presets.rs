//! Built-in scenarios.

use super::scenario::{
    Altitude, Capability, ChirpSpec, CommsSpec, FleetSpec, NavSpec, ObstacleSpec, RadarSpec,
    Scenario, TargetSpec,
};

pub const NAMES: [&str; 7] = [
    "fig4_los_square",
    "fig6_doppler",
    "fig6_rcs_sweep",
    "fig7_multihop",
    "fig8_nlos",
    "fig8_terrestrial",
    "table1_sweep",
];

pub fn by_name(name: &str) -> Option<Scenario> {
    Some(match name {
        "fig4_los_square" => fig4_los_square(),
        "fig6_doppler" => fig6_doppler(),
        "fig6_rcs_sweep" => fig6_rcs_sweep(),
        "fig7_multihop" => fig7_multihop(),
        "fig8_nlos" => fig8_nlos(),
        "fig8_terrestrial" => fig8_terrestrial(),
        "table1_sweep" => table1_sweep(),
        _ => return None,
    })
}

fn thresholds() -> Vec<f64> {
    vec![0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]
}

/// Four ranging radars starting on the corners of a 550 m square around a
/// slowly moving target, all in line of sight.
pub fn fig4_los_square() -> Scenario {
    Scenario {
        name: "fig4_los_square".into(),
        steps: 3000,
        monte_carlo: 100,
        seed: 1,
        dt_s: 1.0,
        fleet: FleetSpec {
            count: 4,
            anchors_xy_m: vec![
                [-50.0, -50.0],
                [-50.0, 500.0],
                [500.0, -50.0],
                [500.0, 500.0],
            ],
            altitude_m: Altitude::Uniform([80.0, 150.0]),
            caps: vec![Capability::Ranging],
            mobile: true,
        },
        radar: RadarSpec {
            sigma_r0_m: 1e-2,
            sigma_b0_deg: 5.0,
            sigma_d0_hz: None,
            chirp: ChirpSpec::default(),
            carrier_hz: 77e9,
            path_loss_exponent: 4.0,
        },
        target: TargetSpec {
            position_m: [0.0, 0.0, 90.0],
            velocity_mps: [-0.3, 0.4, 0.0],
            process_noise_m2ps3: [1e-5, 1e-5, 0.0],
            rcs_m2: 0.1,
        },
        obstacles: Vec::new(),
        comms: CommsSpec {
            r_max_m: Some(900.0),
            h_max: 1,
        },
        nav: NavSpec::default(),
        thresholds_m: thresholds(),
    }
}

/// The square scenario at reduced Monte Carlo size, used as the base of the
/// fleet-size and accuracy sweeps.
pub fn table1_sweep() -> Scenario {
    Scenario {
        name: "table1_sweep".into(),
        monte_carlo: 20,
        ..fig4_los_square()
    }
}

/// Six ranging radars with Doppler extraction.
pub fn fig6_doppler() -> Scenario {
    let mut s = fig4_los_square();
    s.name = "fig6_doppler".into();
    s.monte_carlo = 20;
    s.fleet.count = 6;
    s.fleet.caps = vec![Capability::Ranging, Capability::Doppler];
    s.radar.sigma_r0_m = 1e-1;
    s
}

/// Six precise ranging radars against a small target; sweep `rho` from here.
pub fn fig6_rcs_sweep() -> Scenario {
    let mut s = fig4_los_square();
    s.name = "fig6_rcs_sweep".into();
    s.monte_carlo = 20;
    s.fleet.count = 6;
    s.radar.sigma_r0_m = 1e-3;
    s.target.rcs_m2 = 0.01;
    s
}

/// Short-range links so that some agents need relays early on.
pub fn fig7_multihop() -> Scenario {
    let mut s = fig4_los_square();
    s.name = "fig7_multihop".into();
    s.steps = 500;
    s.monte_carlo = 20;
    s.radar.sigma_r0_m = 1e-3;
    s.comms.r_max_m = Some(505.0);
    s
}

/// City blocks between four UAVs and a low-flying target.
fn city_blocks() -> Vec<ObstacleSpec> {
    let columns = [(150.0, 300.0), (350.0, 550.0), (600.0, 750.0)];
    let rows = [
        (-950.0, -725.0),
        (-675.0, -375.0),
        (-325.0, -25.0),
        (25.0, 250.0),
    ];
    let heights = [
        60.0, 45.0, 80.0, 50.0, 70.0, 40.0, 55.0, 75.0, 65.0, 50.0, 45.0, 70.0,
    ];
    let mut out = Vec::new();
    for (r, &(y0, y1)) in rows.iter().enumerate() {
        for (c, &(x0, x1)) in columns.iter().enumerate() {
            out.push(ObstacleSpec {
                min_m: [x0, y0, 0.0],
                max_m: [x1, y1, heights[r * columns.len() + c]],
            });
        }
    }
    out
}

/// Urban scene with obstacles: four ranging UAVs that can move.
pub fn fig8_nlos() -> Scenario {
    let mut s = fig4_los_square();
    s.name = "fig8_nlos".into();
    s.monte_carlo = 20;
    s.fleet.anchors_xy_m = vec![
        [100.0, -1000.0],
        [100.0, 300.0],
        [800.0, 300.0],
        [800.0, -1000.0],
    ];
    s.fleet.altitude_m = Altitude::Uniform([90.0, 150.0]);
    s.radar.sigma_r0_m = 1e-4;
    s.radar.sigma_b0_deg = 5.0;
    s.target.position_m = [325.0, -350.0, 30.0];
    s.target.velocity_mps = [0.0, 0.2, 0.0];
    s.obstacles = city_blocks();
    s
}

/// The urban scene observed by four fixed radars on masts.
pub fn fig8_terrestrial() -> Scenario {
    let mut s = fig8_nlos();
    s.name = "fig8_terrestrial".into();
    s.fleet.altitude_m = Altitude::Fixed(10.0);
    s.fleet.mobile = false;
    s
}
