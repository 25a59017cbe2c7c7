//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

mod common;

use std::cell::RefCell;
use std::rc::Rc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vss_core::adapters::{speed_curv_to_twist, SpeedCurvToTwist};
use vss_core::bus::Bus;
use vss_core::geodesy::{utm_to_wgs84, wgs84_to_utm, GeoPoint, Hemisphere, UtmPoint};
use vss_core::launcher::{
    replay_file, Action, Event, LaunchConfig, ObstacleSpec, Scenario, System,
};
use vss_core::messages::{topics, FixQuality, Message, SpeedCurvatureSetpoint, SteeringSense};
use vss_core::vehicle_sim::{GpsMode, OverrideKind, SimConfig, VehicleSim, VehicleState};

use common::{read_trace, request};

// Tolerances and bounds, fixed up front.
const SUMMON_DISTANCE: f64 = 100.0;
const ARRIVAL_TOLERANCE: f64 = 1.5;
const ARRIVAL_DEADLINE: f64 = 120.0;
const WALL_BUDGET_SECONDS: f64 = 5.0;
const ESTOP_CYCLES: u64 = 2;
const HEARTBEAT_TIMEOUT: f64 = 0.5;
const SPP_SWITCH_AT: f64 = 30.0;
const STALENESS_THRESHOLD: f64 = 1.0;
const ROUND_TRIP_SAMPLES: usize = 10_000;
const ROUND_TRIP_DEG: f64 = 1e-9;
const ORACLE_TOLERANCE_M: f64 = 1e-3;
const CIRCLE_RADIUS: f64 = 2.0;
const CIRCLE_REL_TOL: f64 = 0.01;
const OBSTACLE_AHEAD: f64 = 3.0;
const HTTP_POSTS: usize = 5;

type Outcome = Result<String, String>;
type EnvelopeTest = Box<dyn Fn(&vss_core::bus::Envelope) -> bool>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn logical(seed: u64) -> LaunchConfig {
    LaunchConfig {
        seed: Some(seed),
        http: vss_core::launcher::HttpConfig {
            enabled: false,
            ..Default::default()
        },
        ..LaunchConfig::default()
    }
}

/// Summon target 100 m from the origin, off the initial heading.
const GOAL_EAST: f64 = 60.0;
const GOAL_NORTH: f64 = 80.0;

fn goal_geo(origin: UtmPoint) -> GeoPoint {
    utm_to_wgs84(UtmPoint {
        easting: origin.easting + GOAL_EAST,
        northing: origin.northing + GOAL_NORTH,
        zone: origin.zone,
    })
    .unwrap()
}

/// Records (cycle, sim_time, linear_x) for every delivered cmd_vel.
fn record_cmd_vel(bus: &mut Bus) -> Rc<RefCell<Vec<(u64, f64, f64)>>> {
    let log = Rc::new(RefCell::new(Vec::new()));
    let l = log.clone();
    bus.subscribe(topics::CMD_VEL, false, move |env, out| {
        if let Message::Twist(t) = env.payload {
            l.borrow_mut().push((out.cycle(), env.sim_time, t.linear_x));
        }
    })
    .unwrap();
    log
}

/// Records (cycle, sim_time) of the first `estop_sense = true` delivery.
fn record_estop(bus: &mut Bus) -> Rc<RefCell<Option<(u64, f64)>>> {
    let first = Rc::new(RefCell::new(None));
    let f = first.clone();
    bus.subscribe(topics::ESTOP_SENSE, false, move |env, out| {
        if env.payload == Message::Bool(true) {
            f.borrow_mut().get_or_insert((out.cycle(), env.sim_time));
        }
    })
    .unwrap();
    first
}

fn record_ulc(bus: &mut Bus) -> Rc<RefCell<Vec<(f64, f64)>>> {
    let log = Rc::new(RefCell::new(Vec::new()));
    let l = log.clone();
    bus.subscribe(topics::ULC_REPORT, false, move |env, _| {
        if let Message::UlcReport(r) = env.payload {
            l.borrow_mut().push((env.sim_time, r.measured_speed));
        }
    })
    .unwrap();
    log
}

/// Every cmd_vel delivered `ESTOP_CYCLES` or more cycles after the estop,
/// and before `until`, must have zero speed. A zero command must arrive
/// exactly then.
fn zero_speed_after(
    cmds: &[(u64, f64, f64)],
    estop_cycle: u64,
    until: f64,
) -> Result<usize, String> {
    let mut checked = 0;
    for &(cycle, t, v) in cmds {
        if cycle >= estop_cycle + ESTOP_CYCLES && t < until {
            check(v == 0.0, format!("cmd_vel {v} at cycle {cycle} (t={t:.2})"))?;
            checked += 1;
        }
    }
    check(
        cmds.iter()
            .any(|&(c, _, v)| c == estop_cycle + ESTOP_CYCLES && v == 0.0),
        "no zero command delivered two cycles after the estop",
    )?;
    Ok(checked)
}

fn criterion_1() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.ndjson");
    let mut cfg = logical(7);
    cfg.http.enabled = true;
    cfg.http.port = 0;
    cfg.trace = Some(trace.clone());

    check(
        (GOAL_EAST.hypot(GOAL_NORTH) - SUMMON_DISTANCE).abs() < 1e-9,
        "goal is not 100 m away",
    )?;
    let started = Instant::now();
    let mut sys = System::launch(&cfg, None).map_err(|e| e.to_string())?;
    let goal = goal_geo(sys.origin());
    let body = format!(
        r#"{{"latitude":{},"longitude":{}}}"#,
        goal.latitude, goal.longitude
    );
    sys.step().map_err(|e| e.to_string())?;
    let reply = request(sys.http_addr().unwrap(), "POST", "/summon", &body);
    check(
        reply.status == 200,
        format!("POST /summon returned {}", reply.status),
    )?;
    check(
        reply.body == r#"{"status":"ok"}"#,
        format!("body {}", reply.body),
    )?;

    let mut arrived_at = None;
    while sys.now() <= ARRIVAL_DEADLINE {
        sys.step().map_err(|e| e.to_string())?;
        if sys
            .distance_to_goal()
            .is_some_and(|d| d <= ARRIVAL_TOLERANCE)
            && sys.planner().arrived()
        {
            arrived_at = Some(sys.now());
            break;
        }
    }
    let wall = started.elapsed().as_secs_f64();
    sys.flush().map_err(|e| e.to_string())?;
    let t = arrived_at.ok_or_else(|| {
        format!(
            "no arrival by {ARRIVAL_DEADLINE} s, distance {:?}",
            sys.distance_to_goal()
        )
    })?;

    let envs = read_trace(&trace);
    let find_after = |from: usize, pred: &dyn Fn(&vss_core::bus::Envelope) -> bool| {
        envs.iter().skip(from).position(pred).map(|i| i + from)
    };
    let steps: [(&str, EnvelopeTest); 6] = [
        (
            topics::POINT_AND_GO,
            Box::new(|e| e.topic.as_str() == topics::POINT_AND_GO),
        ),
        (
            topics::COMMAND_MOBILITY_MODE,
            Box::new(
                |e| matches!(e.payload, Message::MobilityMode(m) if m.mobility_mode == 14 && m.idle_reason == 0),
            ),
        ),
        (
            topics::POINT_AND_GO_WAYPOINT,
            Box::new(|e| e.topic.as_str() == topics::POINT_AND_GO_WAYPOINT),
        ),
        (
            topics::SPEED_SETPOINT,
            Box::new(|e| e.topic.as_str() == topics::SPEED_SETPOINT),
        ),
        (
            topics::CURVATURE_SETPOINT,
            Box::new(|e| e.topic.as_str() == topics::CURVATURE_SETPOINT),
        ),
        (
            topics::CMD_VEL,
            Box::new(|e| e.topic.as_str() == topics::CMD_VEL),
        ),
    ];
    let mut at = 0;
    for (name, pred) in &steps {
        at = find_after(at, pred.as_ref())
            .ok_or_else(|| format!("`{name}` missing or out of order"))?;
    }
    check(
        envs.iter()
            .filter(|e| e.topic.as_str() == topics::POINT_AND_GO)
            .count()
            == 1,
        "expected exactly one PointAndGo",
    )?;
    check(wall < WALL_BUDGET_SECONDS, format!("took {wall:.2} s wall"))?;
    Ok(format!("arrived at {t:.2} s, {wall:.2} s wall"))
}

/// Summon, run to `event_at`, apply `fault`, and collect what happened.
struct FaultRun {
    sys: System,
    cmds: Rc<RefCell<Vec<(u64, f64, f64)>>>,
    estop: Rc<RefCell<Option<(u64, f64)>>>,
    ulc: Rc<RefCell<Vec<(f64, f64)>>>,
}

fn fault_run(events: Vec<Event>, duration: f64) -> Result<FaultRun, String> {
    let mut ev = vec![Event {
        at: 0.0,
        action: Action::SummonOffset {
            east: GOAL_EAST,
            north: GOAL_NORTH,
        },
    }];
    ev.extend(events);
    let scenario = Scenario {
        name: "fault".into(),
        duration,
        origin: None,
        initial_yaw_deg: None,
        obstacles: vec![],
        events: ev,
        expect: Default::default(),
    };
    let mut sys = System::launch(&logical(11), Some(&scenario)).map_err(|e| e.to_string())?;
    let cmds = record_cmd_vel(sys.bus_mut());
    let estop = record_estop(sys.bus_mut());
    let ulc = record_ulc(sys.bus_mut());
    sys.run_scenario(&scenario).map_err(|e| e.to_string())?;
    Ok(FaultRun {
        sys,
        cmds,
        estop,
        ulc,
    })
}

fn criterion_2() -> Outcome {
    let cfg = SimConfig::default();
    let bound_ticks = (cfg.max_speed / (cfg.max_accel * cfg.dt())).ceil() as usize;
    let run = fault_run(
        vec![
            Event {
                at: 20.0,
                action: Action::Override {
                    kind: OverrideKind::Pedals,
                    on: true,
                },
            },
            Event {
                at: 25.0,
                action: Action::Override {
                    kind: OverrideKind::Pedals,
                    on: false,
                },
            },
            Event {
                at: 30.0,
                action: Action::Reset,
            },
        ],
        40.0,
    )?;
    let (cycle, t_e) = run.estop.borrow().ok_or("estop_sense never raised")?;
    check(
        (t_e - 20.0).abs() < 1e-9,
        format!("estop_sense raised at {t_e}"),
    )?;
    let cmds = run.cmds.borrow();
    let speed_before = run
        .ulc
        .borrow()
        .iter()
        .rev()
        .find(|(t, _)| *t < 20.0)
        .map(|x| x.1)
        .unwrap_or(0.0);
    check(
        speed_before > 1.0,
        format!("not driving at the override ({speed_before})"),
    )?;
    let checked = zero_speed_after(&cmds, cycle, 30.0)?;

    let ulc = run.ulc.borrow();
    let after: Vec<_> = ulc.iter().filter(|(t, _)| *t >= 20.0).collect();
    let stop_idx = after
        .iter()
        .position(|(_, v)| *v == 0.0)
        .ok_or("vehicle never stopped")?;
    check(
        stop_idx <= bound_ticks,
        format!("stopped after {stop_idx} ticks, bound {bound_ticks}"),
    )?;
    // latch: override released at 25, still stationary until the reset at 30
    check(
        ulc.iter()
            .filter(|(t, _)| *t > 20.0 + bound_ticks as f64 * cfg.dt() && *t <= 30.0)
            .all(|(_, v)| *v == 0.0),
        "moved before reset",
    )?;
    check(
        cmds.iter().any(|&(_, t, v)| t > 30.0 && v > 0.0),
        "no motion after reset",
    )?;
    check(
        run.sys.vehicle().state.dbw_enabled,
        "by-wire not re-enabled",
    )?;
    Ok(format!(
        "{checked} zero commands, stopped in {stop_idx}/{bound_ticks} ticks, resumed after reset"
    ))
}

fn criterion_3() -> Outcome {
    let run = fault_run(
        vec![Event {
            at: 20.0,
            action: Action::SuppressUlc { duration: 1.0 },
        }],
        30.0,
    )?;
    let (cycle, t_e) = run.estop.borrow().ok_or("estop_sense never raised")?;
    let last_report = run
        .ulc
        .borrow()
        .iter()
        .map(|x| x.0)
        .filter(|t| *t < t_e)
        .fold(f64::NEG_INFINITY, f64::max);
    let gap = t_e - last_report;
    let dt = SimConfig::default().dt();
    check(
        gap > HEARTBEAT_TIMEOUT && gap <= HEARTBEAT_TIMEOUT + dt + 1e-9,
        format!("estop raised after a {gap:.3} s gap"),
    )?;
    let cmds = run.cmds.borrow();
    let checked = zero_speed_after(&cmds, cycle, f64::INFINITY)?;
    check(
        run.sys.vehicle().state.speed == 0.0,
        "vehicle still moving at the end",
    )?;
    Ok(format!(
        "raised after {gap:.2} s gap at t={t_e:.2}, {checked} zero commands"
    ))
}

fn criterion_4() -> Outcome {
    let scenario = Scenario {
        name: "spp".into(),
        duration: ARRIVAL_DEADLINE,
        origin: None,
        initial_yaw_deg: None,
        obstacles: vec![],
        events: vec![
            Event {
                at: 0.0,
                action: Action::SummonOffset {
                    east: GOAL_EAST,
                    north: GOAL_NORTH,
                },
            },
            Event {
                at: SPP_SWITCH_AT,
                action: Action::GpsMode { mode: GpsMode::Spp },
            },
        ],
        expect: Default::default(),
    };
    let cfg = logical(5);
    let tolerance = ARRIVAL_TOLERANCE + 3.0 * cfg.sim.gps_sigma_spp;
    let mut sys = System::launch(&cfg, Some(&scenario)).map_err(|e| e.to_string())?;
    let status = Rc::new(RefCell::new(Vec::new()));
    let s = status.clone();
    sys.bus_mut()
        .subscribe(topics::LOCALIZATION_STATUS, false, move |env, _| {
            if let Message::LocalizationStatus(l) = env.payload {
                s.borrow_mut().push((env.sim_time, l));
            }
        })
        .unwrap();
    let mut arrived_at = None;
    while sys.now() <= ARRIVAL_DEADLINE {
        sys.step().map_err(|e| e.to_string())?;
        if arrived_at.is_none()
            && sys.planner().arrived()
            && sys.distance_to_goal().is_some_and(|d| d <= tolerance)
        {
            arrived_at = Some(sys.now());
        }
    }
    let status = status.borrow();
    let was_rtk = status
        .iter()
        .rfind(|(t, _)| *t < SPP_SWITCH_AT)
        .is_some_and(|(_, l)| l.active == FixQuality::Rtk);
    check(was_rtk, "RTK was not active before the switch")?;
    let t_spp = status
        .iter()
        .find(|(t, l)| *t >= SPP_SWITCH_AT && l.active == FixQuality::Spp)
        .map(|x| x.0)
        .ok_or("never switched to SPP")?;
    let lag = t_spp - SPP_SWITCH_AT;
    check(
        lag <= STALENESS_THRESHOLD,
        format!("switched after {lag:.2} s"),
    )?;
    check(
        !status
            .iter()
            .any(|(t, l)| *t > t_spp && l.active == FixQuality::Rtk),
        "returned to RTK while in SPP mode",
    )?;
    let t = arrived_at.ok_or_else(|| {
        format!(
            "did not arrive within {tolerance} m; distance {:?}",
            sys.distance_to_goal()
        )
    })?;
    let d = sys.distance_to_goal().unwrap_or(f64::NAN);
    check(d <= tolerance, format!("ended {d:.2} m from goal"))?;
    Ok(format!(
        "SPP active {lag:.2} s after switch, arrived at {t:.2} s, final {d:.2} m (tol {tolerance} m)"
    ))
}

/// Reference projections computed with PROJ 9.5.1 (`+proj=utm +ellps=WGS84`)
/// before the build: (lat, lon, zone, hemisphere, easting, northing).
const ORACLE: &[(f64, f64, u8, Hemisphere, f64, f64)] = &[
    (0.0, 3.0, 31, Hemisphere::N, 500000.0000, 0.0000),
    (0.0, 0.0, 31, Hemisphere::N, 166021.4431, 0.0000),
    (
        42.4734,
        -83.2486,
        17,
        Hemisphere::N,
        315158.6795,
        4704789.3082,
    ),
    (42.47, -83.25, 17, Hemisphere::N, 315033.5738, 4704414.8052),
    (42.58, -83.2, 17, Hemisphere::N, 319461.2990, 4716522.0574),
    (
        -33.92487,
        18.42406,
        34,
        Hemisphere::S,
        261877.8164,
        6243185.5892,
    ),
    (
        51.4778,
        -0.0015,
        30,
        Hemisphere::N,
        708213.9506,
        5707224.5426,
    ),
    (-45.0, 170.5, 59, Hemisphere::S, 460592.3510, 5016928.0124),
    (84.0, 0.0, 31, Hemisphere::N, 465005.3449, 9329005.1824),
    (-80.0, -179.9, 1, Hemisphere::S, 443803.9432, 1117013.3038),
    (60.0, 5.999999, 31, Hemisphere::N, 667294.7654, 6655205.4811),
    (10.0, -3.0, 30, Hemisphere::N, 500000.0000, 1105412.4913),
    (
        37.7749,
        -122.4194,
        10,
        Hemisphere::N,
        551130.7685,
        4180998.8815,
    ),
    (-23.5, -46.6, 23, Hemisphere::S, 336625.1319, 7400218.8602),
    (35.68, 139.77, 54, Hemisphere::N, 388694.1453, 3949153.6227),
];

fn criterion_5() -> Outcome {
    let mut worst_mm: f64 = 0.0;
    for &(lat, lon, zone, hemi, e, n) in ORACLE {
        let u = wgs84_to_utm(GeoPoint::new(lat, lon)).map_err(|e| e.to_string())?;
        check(
            u.zone.number == zone && u.zone.hemisphere == hemi,
            format!("({lat}, {lon}) landed in {}", u.zone),
        )?;
        let err = (u.easting - e).abs().max((u.northing - n).abs());
        check(
            err <= ORACLE_TOLERANCE_M,
            format!("({lat}, {lon}) off by {err} m"),
        )?;
        worst_mm = worst_mm.max(err * 1e3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..ROUND_TRIP_SAMPLES {
        let p = GeoPoint::new(
            rng.random_range(-80.0..84.0),
            rng.random_range(-180.0..180.0),
        );
        let back =
            utm_to_wgs84(wgs84_to_utm(p).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let err = (back.latitude - p.latitude)
            .abs()
            .max((back.longitude - p.longitude).abs());
        worst = worst.max(err);
    }
    check(
        worst < ROUND_TRIP_DEG,
        format!("round trip error {worst:e} deg"),
    )?;
    Ok(format!(
        "{} vectors within {worst_mm:.3} mm, {ROUND_TRIP_SAMPLES} round trips within {worst:.1e} deg",
        ORACLE.len()
    ))
}

/// Algebraic least-squares circle fit: returns (cx, cy, r).
fn fit_circle(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    // minimise Σ (x² + y² + D x + E y + F)²
    let mut m = [[0.0; 3]; 3];
    let mut v = [0.0; 3];
    for &(x, y) in pts {
        let row = [x, y, 1.0];
        let z = -(x * x + y * y);
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            v[i] += row[i] * z;
        }
    }
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    let solve = |k: usize| {
        let mut a = m;
        for i in 0..3 {
            a[i][k] = v[i];
        }
        det(a) / d
    };
    let (dd, ee, ff) = (solve(0), solve(1), solve(2));
    let (cx, cy) = (-dd / 2.0, -ee / 2.0);
    (cx, cy, (cx * cx + cy * cy - ff).sqrt())
}

fn circle_radius(cfg: &SimConfig, sp: SpeedCurvatureSetpoint) -> Result<(f64, f64), String> {
    let mut bus = Bus::with_vehicle_topics();
    let mut state = VehicleState::at(0.0, 0.0, 0.0);
    state.speed = sp.speed;
    let vehicle = VehicleSim::new(cfg.clone(), state, (0.0, 0.0), ChaCha8Rng::seed_from_u64(0))
        .attach(&mut bus)
        .unwrap();
    SpeedCurvToTwist::new(cfg.max_speed, cfg.max_curvature)
        .attach(&mut bus)
        .unwrap();
    let period = std::f64::consts::TAU / (sp.speed * sp.curvature);
    let ticks = (period * cfg.tick_hz).round() as u64;
    let mut path = Vec::new();
    for k in 0..=ticks {
        let now = k as f64 * cfg.dt();
        bus.set_time(now);
        bus.publish(topics::GATED_SETPOINT, sp, now).unwrap();
        bus.run_until_idle(8);
        vehicle.borrow_mut().step(&mut bus, now).unwrap();
        bus.run_until_idle(8);
        let s = vehicle.borrow().state;
        path.push((s.easting, s.northing));
    }
    let (cx, cy, r) = fit_circle(&path);
    let worst = path
        .iter()
        .map(|(x, y)| ((x - cx).hypot(y - cy) - r).abs())
        .fold(0.0, f64::max);
    Ok((r, worst))
}

fn criterion_6() -> Outcome {
    let sp = SpeedCurvatureSetpoint {
        speed: 1.0,
        curvature: 0.5,
        steering_sense: SteeringSense::Positive,
    };
    let twist = speed_curv_to_twist(&sp).ok_or("setpoint dropped")?;
    check(twist.angular_z == 0.5, format!("ω = {}", twist.angular_z))?;
    // the default curvature limit (0.35) would clamp κ = 0.5
    let cfg = SimConfig {
        max_curvature: 0.5,
        ..SimConfig::default()
    };
    check(cfg.tick_hz == 50.0, "not 50 Hz")?;
    let (r, spread) = circle_radius(&cfg, sp)?;
    let rel = (r - CIRCLE_RADIUS).abs() / CIRCLE_RADIUS;
    check(rel <= CIRCLE_REL_TOL, format!("radius {r:.4} m"))?;
    check(
        spread / CIRCLE_RADIUS <= CIRCLE_REL_TOL,
        format!("points stray {spread:.4} m from the fitted circle"),
    )?;
    Ok(format!(
        "radius {r:.5} m ({:.3}%), spread {spread:.1e} m",
        rel * 100.0
    ))
}

fn criterion_7() -> Outcome {
    // A: obstacle present from the start, removed at t = 10
    let scenario = Scenario {
        name: "obstacle".into(),
        duration: 25.0,
        origin: None,
        initial_yaw_deg: None,
        obstacles: vec![ObstacleSpec {
            id: Some("box".into()),
            east: 0.0,
            north: OBSTACLE_AHEAD,
            radius: 0.5,
        }],
        events: vec![
            Event {
                at: 0.0,
                action: Action::SummonOffset {
                    east: 0.0,
                    north: 100.0,
                },
            },
            Event {
                at: 10.0,
                action: Action::RemoveObstacle { id: "box".into() },
            },
        ],
        expect: Default::default(),
    };
    let mut sys = System::launch(&logical(3), Some(&scenario)).map_err(|e| e.to_string())?;
    let cmds = record_cmd_vel(sys.bus_mut());
    sys.run_scenario(&scenario).map_err(|e| e.to_string())?;
    let cmds = cmds.borrow();
    check(
        cmds.iter().filter(|c| c.1 < 10.0).count() > 0,
        "no commands while blocked",
    )?;
    check(
        cmds.iter().all(|&(_, t, v)| t >= 10.0 || v == 0.0),
        "positive speed while the obstacle was present",
    )?;
    check(
        cmds.iter().any(|&(_, t, v)| t > 10.0 && v > 0.0),
        "no motion after removal",
    )?;
    let moved = sys.offset().1;
    check(moved > 10.0, format!("only {moved:.1} m after removal"))?;

    // B: obstacle dropped 3 m ahead mid-drive
    let mut sys = System::launch(&logical(3), None).map_err(|e| e.to_string())?;
    let cmds = record_cmd_vel(sys.bus_mut());
    let first_seen = Rc::new(RefCell::new(None));
    let f = first_seen.clone();
    let cfg = sys.config().planner.clone();
    sys.bus_mut()
        .subscribe(topics::VELODYNE_POINTS, false, move |env, _| {
            if let Message::LidarScan(s) = &env.payload {
                if vss_core::planner::corridor_blocked(s, &cfg) {
                    f.borrow_mut().get_or_insert(env.sim_time);
                }
            }
        })
        .unwrap();
    sys.summon_offset(0.0, 100.0).map_err(|e| e.to_string())?;
    sys.run_until(15.0).map_err(|e| e.to_string())?;
    let (e, n) = sys.offset();
    let yaw = sys.vehicle().state.yaw;
    let at = sys.now();
    let obstacle = ObstacleSpec {
        id: Some("late".into()),
        east: e + OBSTACLE_AHEAD * yaw.sin(),
        north: n + OBSTACLE_AHEAD * yaw.cos(),
        radius: 0.5,
    };
    let origin = sys.origin();
    sys.vehicle_mut()
        .add_obstacle(vss_core::vehicle_sim::Obstacle {
            id: obstacle.id.clone(),
            easting: origin.easting + obstacle.east,
            northing: origin.northing + obstacle.north,
            radius: obstacle.radius,
        });
    sys.run_until(20.0).map_err(|e| e.to_string())?;
    let seen = first_seen.borrow().ok_or("obstacle never seen")?;
    let latency = seen - at;
    check(
        latency <= 0.1 + 1e-9,
        format!("seen {latency:.2} s after placement"),
    )?;
    check(
        cmds.borrow().iter().all(|&(_, t, v)| t < seen || v == 0.0),
        "positive speed after the obstacle was seen",
    )?;
    let s = sys.vehicle().state;
    let clearance = (s.easting - origin.easting - obstacle.east)
        .hypot(s.northing - origin.northing - obstacle.north)
        - obstacle.radius;
    check(
        s.speed == 0.0 && clearance > 0.0,
        format!("clearance {clearance:.2} m"),
    )?;
    sys.vehicle_mut().remove_obstacle("late");
    sys.run_until(25.0).map_err(|e| e.to_string())?;
    check(sys.vehicle().state.speed > 0.0, "no motion after removal")?;
    Ok(format!(
        "blocked from start: zero commands until removal; mid-drive: stopped {clearance:.2} m short, seen within {latency:.2} s"
    ))
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let scenario = Scenario {
        name: "determinism".into(),
        duration: 60.0,
        origin: None,
        initial_yaw_deg: None,
        obstacles: vec![],
        events: vec![
            Event {
                at: 0.0,
                action: Action::SummonOffset {
                    east: GOAL_EAST,
                    north: GOAL_NORTH,
                },
            },
            Event {
                at: 20.0,
                action: Action::GpsMode { mode: GpsMode::Spp },
            },
            Event {
                at: 25.0,
                action: Action::GpsMode { mode: GpsMode::Rtk },
            },
        ],
        expect: Default::default(),
    };
    let mut bytes = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("run{run}.ndjson"));
        let mut cfg = logical(42);
        cfg.trace = Some(path.clone());
        let mut sys = System::launch(&cfg, Some(&scenario)).map_err(|e| e.to_string())?;
        sys.run_scenario(&scenario).map_err(|e| e.to_string())?;
        drop(sys);
        let report = replay_file(&path).map_err(|e| e.to_string())?;
        check(report.ok(), format!("replay found violations:\n{report}"))?;
        bytes.push(std::fs::read(&path).unwrap());
    }
    check(!bytes[0].is_empty(), "empty trace")?;
    check(bytes[0] == bytes[1], "traces differ")?;
    Ok(format!(
        "two runs, {} identical bytes, replay clean",
        bytes[0].len()
    ))
}

fn criterion_9() -> Outcome {
    let mut cfg = logical(9);
    cfg.http.enabled = true;
    cfg.http.port = 0;
    let mut sys = System::launch(&cfg, None).map_err(|e| e.to_string())?;
    let addr = sys.http_addr().unwrap();
    let goals = Rc::new(RefCell::new([0usize; 3]));
    for (i, topic) in [
        topics::POINT_AND_GO,
        topics::COMMAND_MOBILITY_MODE,
        topics::POINT_AND_GO_WAYPOINT,
    ]
    .into_iter()
    .enumerate()
    {
        let g = goals.clone();
        sys.bus_mut()
            .subscribe(topic, false, move |_, _| g.borrow_mut()[i] += 1)
            .unwrap();
    }
    let valid = r#"{"latitude":42.4735,"longitude":-83.2486}"#;
    let matrix: &[(&str, &str, &str, u16)] = &[
        ("POST", "/summon", valid, 200),
        ("POST", "/summon", r#"{"latitude":"abc"}"#, 400),
        ("POST", "/summon", r#"{"latitude":91,"longitude":0}"#, 400),
        ("POST", "/summon", "{", 400),
        ("GET", "/summon", "", 405),
        ("GET", "/estop", "", 405),
        ("POST", "/telemetry", "", 405),
        ("POST", "/elsewhere", valid, 404),
        ("GET", "/", "", 404),
        ("POST", "/estop", r#"{"on":false}"#, 200),
        ("POST", "/estop", r#"{"on":"yes"}"#, 400),
    ];
    let mut accepted_summons = 0;
    for &(method, path, body, want) in matrix {
        let r = request(addr, method, path, body);
        check(
            r.status == want,
            format!("{method} {path} {body} -> {}, want {want}", r.status),
        )?;
        let json: serde_json::Value =
            serde_json::from_str(&r.body).map_err(|e| format!("{method} {path}: {e}"))?;
        match want {
            200 => check(json == serde_json::json!({"status":"ok"}), r.body.clone())?,
            _ => check(
                json["status"] == "error" && json["detail"].is_string(),
                r.body.clone(),
            )?,
        }
        if want == 405 {
            check(
                r.header("allow").is_some(),
                format!("{method} {path}: no Allow header"),
            )?;
        }
        if want == 200 && path == "/summon" {
            accepted_summons += 1;
        }
    }
    for _ in 0..HTTP_POSTS {
        let r = request(addr, "POST", "/summon", valid);
        check(r.status == 200, format!("status {}", r.status))?;
        accepted_summons += 1;
    }
    sys.step().map_err(|e| e.to_string())?;
    let counts = *goals.borrow();
    check(
        counts == [accepted_summons; 3],
        format!("{accepted_summons} accepted, goal publications {counts:?}"),
    )?;
    let seqs: Vec<u64> = {
        let last = sys
            .bus()
            .last(topics::POINT_AND_GO)
            .ok_or("no PointAndGo")?;
        vec![last.seq]
    };
    check(
        seqs[0] == accepted_summons as u64 - 1,
        format!("last PointAndGo seq {}", seqs[0]),
    )?;
    Ok(format!(
        "{} matrix cases, {accepted_summons} posts -> {accepted_summons} goal publications",
        matrix.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 end-to-end summon", criterion_1),
        ("2 e-stop override", criterion_2),
        ("3 heartbeat loss", criterion_3),
        ("4 SPP fallback", criterion_4),
        ("5 geodesy", criterion_5),
        ("6 kinematic consistency", criterion_6),
        ("7 obstacle stop", criterion_7),
        ("8 determinism", criterion_8),
        ("9 HTTP contract", criterion_9),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|w| name.contains(w.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail}) [{secs:.2}s]"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL ({why}) [{secs:.2}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
