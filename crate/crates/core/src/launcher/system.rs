use std::cell::{Ref, RefCell, RefMut};
use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::rc::Rc;
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tokio::sync::broadcast;

use crate::adapters::{
    ActorLocalization, EstopHeartbeat, LocalizationContext, LowLevelController, OdomRepub,
    PiksiOdomPub, SpeedCurvToTwist,
};
use crate::bus::Bus;
use crate::geodesy::{utm_to_wgs84, wgs84_to_utm, UtmPoint};
use crate::messages::{normalize_compass, topics, Clock, Message, PointAndGo};
use crate::planner::Planner;
use crate::summon::{
    Command, HttpServer, PointAndGoNode, SimClock, SummonService, TelemetryCollector,
    TelemetryFrame,
};
use crate::vehicle_sim::{Obstacle, OverrideKind, VehicleSim, VehicleState};

use super::scenario::{Action, Event, ObstacleSpec, Scenario};
use super::{ClockMode, LaunchConfig, LaunchError};

/// Dispatch cycles allowed per tick before the bus is considered stuck.
const CYCLES_PER_TICK: usize = 64;
const FRAME_BUFFER: usize = 256;

/// Facts about the run gathered from the bus.
#[derive(Debug, Default)]
struct Monitor {
    estop_at: Option<f64>,
    arrivals: Vec<f64>,
    arrived: bool,
}

/// A launched vehicle: bus, nodes, clock and (optionally) the HTTP service.
pub struct System {
    cfg: LaunchConfig,
    bus: Bus,
    vehicle: Rc<RefCell<VehicleSim>>,
    planner: Rc<RefCell<Planner>>,
    telemetry: Rc<RefCell<TelemetryCollector>>,
    point_and_go: Rc<RefCell<PointAndGoNode>>,
    monitor: Rc<RefCell<Monitor>>,
    commands: mpsc::Receiver<Command>,
    command_tx: mpsc::Sender<Command>,
    frames: broadcast::Sender<Arc<str>>,
    recorded: Option<Vec<TelemetryFrame>>,
    last_frame: Option<TelemetryFrame>,
    clock: SimClock,
    http: Option<HttpServer>,
    origin: UtmPoint,
    tick: u64,
    frame_every: u64,
    events: Vec<Event>,
    next_event: usize,
    seed: u64,
}

impl System {
    /// Build and wire every node. Nothing is dispatched until the first
    /// [`System::step`], so no subscriber can miss a message.
    pub fn launch(cfg: &LaunchConfig, scenario: Option<&Scenario>) -> Result<Self, LaunchError> {
        cfg.validate()?;
        if let Some(s) = scenario {
            s.validate()?;
        }
        let cfg = cfg.clone();
        let origin_geo = scenario.and_then(|s| s.origin).unwrap_or(cfg.origin);
        let origin = wgs84_to_utm(origin_geo)?;
        let yaw_deg = scenario
            .and_then(|s| s.initial_yaw_deg)
            .unwrap_or(cfg.initial_yaw_deg);

        let mut bus = Bus::with_vehicle_topics();
        bus.set_high_water(cfg.high_water);
        if let Some(path) = &cfg.trace {
            let f = File::create(path)
                .map_err(|e| LaunchError::Trace(format!("{}: {e}", path.display())))?;
            bus.set_trace(Box::new(BufWriter::new(f)));
        }

        let mut sim = cfg.sim.clone();
        if let Some(s) = scenario {
            sim.obstacles
                .extend(s.obstacles.iter().map(|o| absolute(&origin, o)));
        }
        let seed = cfg.seed.unwrap_or_else(rand::random);
        let initial = VehicleState::at(
            origin.easting,
            origin.northing,
            normalize_compass(yaw_deg.to_radians()),
        );
        let vehicle = VehicleSim::new(
            sim.clone(),
            initial,
            (origin.easting, origin.northing),
            ChaCha8Rng::seed_from_u64(seed),
        )
        .attach(&mut bus)?;

        let a = &cfg.adapters;
        PiksiOdomPub::new(origin, a.fix_preference_window).attach(&mut bus)?;
        if cfg.localization.actor_localization {
            ActorLocalization::new(a.staleness_threshold).attach(&mut bus)?;
        } else {
            OdomRepub::default().attach(&mut bus)?;
            LocalizationContext::new(a.localization_timeout).attach(&mut bus)?;
        }
        EstopHeartbeat::new(a).attach(&mut bus)?;
        LowLevelController::new(a).attach(&mut bus)?;
        SpeedCurvToTwist::new(sim.max_speed, sim.max_curvature).attach(&mut bus)?;

        let mut planner_cfg = cfg.planner.clone();
        planner_cfg.max_curvature = sim.max_curvature;
        let planner = Planner::new(planner_cfg, origin.zone).attach(&mut bus)?;
        let point_and_go = PointAndGoNode::default().attach(&mut bus)?;
        let telemetry = TelemetryCollector::default().attach(&mut bus)?;
        let monitor = attach_monitor(&mut bus)?;

        let (command_tx, commands) = mpsc::channel();
        let (frames, _) = broadcast::channel(FRAME_BUFFER);
        let clock = SimClock::default();
        let http = if cfg.http.enabled {
            let addr = cfg.http.address();
            let service = SummonService::new(command_tx.clone(), clock.clone());
            Some(
                HttpServer::start(&addr, service, frames.clone())
                    .map_err(|source| LaunchError::Http { addr, source })?,
            )
        } else {
            None
        };

        let frame_every = (sim.tick_hz / cfg.telemetry_hz).round().max(1.0) as u64;
        Ok(Self {
            events: scenario.map(|s| s.events.clone()).unwrap_or_default(),
            cfg,
            bus,
            vehicle,
            planner,
            telemetry,
            point_and_go,
            monitor,
            commands,
            command_tx,
            frames,
            recorded: None,
            last_frame: None,
            clock,
            http,
            origin,
            tick: 0,
            frame_every,
            next_event: 0,
            seed,
        })
    }

    pub fn config(&self) -> &LaunchConfig {
        &self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.cfg.sim.dt()
    }

    /// Time of the next tick.
    pub fn now(&self) -> f64 {
        self.tick as f64 * self.dt()
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    pub fn origin(&self) -> UtmPoint {
        self.origin
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn bus_mut(&mut self) -> &mut Bus {
        &mut self.bus
    }

    pub fn vehicle(&self) -> Ref<'_, VehicleSim> {
        self.vehicle.borrow()
    }

    pub fn vehicle_mut(&self) -> RefMut<'_, VehicleSim> {
        self.vehicle.borrow_mut()
    }

    pub fn planner(&self) -> Ref<'_, Planner> {
        self.planner.borrow()
    }

    pub fn http_addr(&self) -> Option<SocketAddr> {
        self.http.as_ref().map(HttpServer::local_addr)
    }

    /// Same channel the HTTP service uses.
    pub fn command_sender(&self) -> mpsc::Sender<Command> {
        self.command_tx.clone()
    }

    pub fn subscribe_telemetry(&self) -> broadcast::Receiver<Arc<str>> {
        self.frames.subscribe()
    }

    /// Keep every telemetry frame in memory from now on.
    pub fn record_frames(&mut self) {
        self.recorded.get_or_insert_with(Vec::new);
    }

    pub fn frames(&self) -> &[TelemetryFrame] {
        self.recorded.as_deref().unwrap_or(&[])
    }

    pub fn last_frame(&self) -> Option<&TelemetryFrame> {
        self.last_frame.as_ref()
    }

    /// Summons translated into goals so far.
    pub fn goals_published(&self) -> u64 {
        self.point_and_go.borrow().translated
    }

    pub fn estop_at(&self) -> Option<f64> {
        self.monitor.borrow().estop_at
    }

    /// Times at which the planner reported arrival.
    pub fn arrivals(&self) -> Vec<f64> {
        self.monitor.borrow().arrivals.clone()
    }

    /// Ground-truth distance from the vehicle to the planner's goal.
    pub fn distance_to_goal(&self) -> Option<f64> {
        let goal = *self.planner.borrow().goal()?;
        let s = self.vehicle.borrow().state;
        Some((goal.easting - s.easting).hypot(goal.northing - s.northing))
    }

    /// Vehicle position relative to the origin, m east and north.
    pub fn offset(&self) -> (f64, f64) {
        let s = self.vehicle.borrow().state;
        (
            s.easting - self.origin.easting,
            s.northing - self.origin.northing,
        )
    }

    /// Summon to a point given relative to the origin.
    pub fn summon_offset(&mut self, east: f64, north: f64) -> Result<(), LaunchError> {
        let p = utm_to_wgs84(UtmPoint {
            easting: self.origin.easting + east,
            northing: self.origin.northing + north,
            zone: self.origin.zone,
        })?;
        self.summon(p.latitude, p.longitude)
    }

    pub fn summon(&mut self, latitude: f64, longitude: f64) -> Result<(), LaunchError> {
        let p = PointAndGo::go_to_waypoint(latitude, longitude)
            .map_err(|e| LaunchError::Scenario(e.to_string()))?;
        let now = self.bus.now();
        self.bus.publish(topics::POINT_AND_GO, p, now)?;
        Ok(())
    }

    fn apply(&mut self, action: &Action) -> Result<(), LaunchError> {
        let now = self.now();
        tracing::debug!(t = now, ?action, "event");
        match action {
            Action::Summon {
                latitude,
                longitude,
            } => self.summon(*latitude, *longitude)?,
            Action::SummonOffset { east, north } => self.summon_offset(*east, *north)?,
            Action::GpsMode { mode } => self.vehicle_mut().set_gps_mode(*mode),
            Action::Override { kind, on } => self.vehicle_mut().inject_override(*kind, *on),
            Action::SuppressUlc { duration } => {
                self.vehicle_mut().suppress_ulc_until(now + duration)
            }
            Action::AddObstacle(o) => {
                let o = absolute(&self.origin, o);
                self.vehicle_mut().add_obstacle(o);
            }
            Action::RemoveObstacle { id } => {
                if self.vehicle_mut().remove_obstacle(id) == 0 {
                    tracing::warn!(%id, "no such obstacle");
                }
            }
            Action::Estop { on } => self
                .vehicle_mut()
                .inject_override(OverrideKind::PhysicalEstop, *on),
            Action::Reset => {
                self.bus.publish(topics::ESTOP_RESET, Message::Empty, now)?;
            }
        }
        Ok(())
    }

    fn execute(&mut self, cmd: Command) -> Result<(), LaunchError> {
        match cmd {
            Command::Summon(r) => {
                tracing::info!(client = %r.client_id, lat = r.latitude, lon = r.longitude, "summon");
                self.summon(r.latitude, r.longitude)
            }
            Command::Estop(on) => self.apply(&Action::Estop { on }),
            Command::Reset => self.apply(&Action::Reset),
        }
    }

    /// Advance one tick: scenario events, queued commands, `/clock`, vehicle
    /// step, dispatch until idle, telemetry.
    pub fn step(&mut self) -> Result<(), LaunchError> {
        let now = self.now();
        self.bus.set_time(now);
        self.clock.set(now);

        while let Some(e) = self.events.get(self.next_event) {
            if e.at > now + 1e-9 {
                break;
            }
            let action = e.action.clone();
            self.next_event += 1;
            self.apply(&action)?;
        }
        while let Ok(cmd) = self.commands.try_recv() {
            if let Err(e) = self.execute(cmd) {
                tracing::warn!(%e, "command failed");
            }
        }
        for r in self.bus.drain_injected() {
            if let Err(e) = r {
                tracing::warn!(%e, "injected publish rejected");
            }
        }

        self.bus
            .publish(topics::CLOCK, Clock { sim_time: now }, now)?;
        self.vehicle.borrow_mut().step(&mut self.bus, now)?;
        self.bus.run_until_idle(CYCLES_PER_TICK);

        if self.tick.is_multiple_of(self.frame_every) {
            self.emit_frame(now);
        }
        self.tick += 1;
        Ok(())
    }

    fn emit_frame(&mut self, now: f64) {
        let frame = self.telemetry.borrow().frame(now);
        let line: Arc<str> = serde_json::to_string(&frame)
            .expect("frames serialize")
            .into();
        // no receivers is fine
        let _ = self.frames.send(line);
        if let Some(r) = self.recorded.as_mut() {
            r.push(frame.clone());
        }
        self.last_frame = Some(frame);
    }

    /// Step until simulation time reaches `t` (inclusive).
    pub fn run_until(&mut self, t: f64) -> Result<(), LaunchError> {
        while self.now() <= t + 1e-9 {
            self.step()?;
        }
        Ok(())
    }

    /// Run with wall-clock pacing until `duration` (or forever).
    pub fn run_wall(&mut self, duration: Option<f64>) -> Result<(), LaunchError> {
        let start = Instant::now();
        let mut last_flush = Instant::now();
        loop {
            let now = self.now();
            if duration.is_some_and(|d| now > d + 1e-9) {
                return Ok(());
            }
            let due = start + Duration::from_secs_f64(now);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
            self.step()?;
            if last_flush.elapsed() > Duration::from_secs(1) {
                self.flush()?;
                last_flush = Instant::now();
            }
        }
    }

    /// Run the scenario this system was launched with and check its
    /// expectations.
    pub fn run_scenario(&mut self, scenario: &Scenario) -> Result<ScenarioReport, LaunchError> {
        let started = Instant::now();
        let mut arrived_at = None;
        let tolerance = scenario.expect.arrive.map(|a| a.tolerance);
        while self.now() <= scenario.duration + 1e-9 {
            let now = self.now();
            if self.cfg.clock == ClockMode::Wall {
                let due = started + Duration::from_secs_f64(now);
                if let Some(wait) = due.checked_duration_since(Instant::now()) {
                    std::thread::sleep(wait);
                }
            }
            self.step()?;
            if let (Some(tol), None) = (tolerance, arrived_at) {
                let near = self.distance_to_goal().is_some_and(|d| d <= tol);
                if near && self.planner.borrow().arrived() {
                    arrived_at = Some(now);
                }
            }
        }
        self.flush()?;

        let mut report = ScenarioReport {
            name: scenario.name.clone(),
            sim_time: self.now() - self.dt(),
            ticks: self.tick,
            arrived_at,
            final_distance: self.distance_to_goal(),
            estop_at: self.estop_at(),
            wall_seconds: started.elapsed().as_secs_f64(),
            failures: Vec::new(),
        };
        if let Some(a) = scenario.expect.arrive {
            match arrived_at {
                None => report.failures.push(format!(
                    "did not arrive within {} m of the goal",
                    a.tolerance
                )),
                Some(t) if t > a.within => report
                    .failures
                    .push(format!("arrived at {t:.2} s, later than {} s", a.within)),
                Some(_) => {}
            }
            if report.final_distance.is_some_and(|d| d > a.tolerance) {
                report.failures.push(format!(
                    "ended {:.2} m from the goal",
                    report.final_distance.unwrap_or(f64::NAN)
                ));
            }
        }
        if let Some(by) = scenario.expect.estop_by {
            match report.estop_at {
                Some(t) if t <= by => {}
                Some(t) => report
                    .failures
                    .push(format!("estop raised at {t:.2} s, later than {by} s")),
                None => report.failures.push(format!("estop not raised by {by} s")),
            }
        }
        Ok(report)
    }

    pub fn flush(&mut self) -> Result<(), LaunchError> {
        self.bus.flush_trace().map_err(LaunchError::Trace)
    }
}

impl Drop for System {
    fn drop(&mut self) {
        if let Err(e) = self.bus.flush_trace() {
            tracing::error!(%e, "trace not flushed");
        }
    }
}

fn absolute(origin: &UtmPoint, o: &ObstacleSpec) -> Obstacle {
    Obstacle {
        id: o.id.clone(),
        easting: origin.easting + o.east,
        northing: origin.northing + o.north,
        radius: o.radius,
    }
}

fn attach_monitor(bus: &mut Bus) -> Result<Rc<RefCell<Monitor>>, LaunchError> {
    let m = Rc::new(RefCell::new(Monitor::default()));
    let h = m.clone();
    bus.subscribe(topics::ESTOP_SENSE, false, move |env, _| {
        if env.payload == Message::Bool(true) {
            h.borrow_mut().estop_at.get_or_insert(env.sim_time);
        }
    })?;
    let h = m.clone();
    bus.subscribe(topics::PLANNER_STATUS, false, move |env, _| {
        if let Message::PlannerStatus(s) = env.payload {
            let mut mon = h.borrow_mut();
            if s.arrived && !mon.arrived {
                mon.arrivals.push(env.sim_time);
            }
            mon.arrived = s.arrived;
        }
    })?;
    Ok(m)
}

/// Outcome of [`System::run_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub name: String,
    pub sim_time: f64,
    pub ticks: u64,
    pub arrived_at: Option<f64>,
    pub final_distance: Option<f64>,
    pub estop_at: Option<f64>,
    pub wall_seconds: f64,
    pub failures: Vec<String>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
        writeln!(
            f,
            "scenario `{}`: {} ticks, {:.2} s simulated",
            self.name, self.ticks, self.sim_time
        )?;
        writeln!(
            f,
            "  arrived at {} s, final distance {} m, estop at {} s",
            opt(self.arrived_at),
            opt(self.final_distance),
            opt(self.estop_at)
        )?;
        if self.passed() {
            write!(f, "  PASS")
        } else {
            for fail in &self.failures {
                writeln!(f, "  FAIL: {fail}")?;
            }
            Ok(())
        }
    }
}
