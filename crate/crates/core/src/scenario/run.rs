//! The fixed-step, multi-rate run loop.
//!
//! Every simulation tick computes the contact force, advances drilling and
//! samples any sensor that is due. Every control tick additionally asks the
//! hand input for a command, steps the controller and solves for joint
//! rates. Joint rates are integrated every simulation tick and a log record
//! is written every control tick.

use nalgebra::DVector;

use super::config::{InputSource, Scenario};
use super::human::{
    check_reachable, generate_trajectory, HandCommand, HandForceTrajectory, HandInput, HandObservation,
};
use super::log::{LogEvent, LogHeader, LogRecord, RunLog, LOG_VERSION};
use crate::controller::{step_controller, ControllerInputs, ControllerState, Regime};
use crate::exec::{self, Execution};
use crate::geometry::{to_array, RigidTransform, Vec3};
use crate::interaction::{ablate, transform_wrench, ContactModel, ContactResult, SensorSuite, TipForceEstimate};
use crate::robot::{integrate_step, solve_admittance, Frame, KinematicChain, RobotState, Wrench};
use crate::twin::{AnatomyModel, DistanceQuery};
use crate::{Error, Result};

/// Live view of the simulation, for telemetry.
#[derive(Clone, Debug, PartialEq)]
pub struct SimSnapshot {
    pub t: f64,
    pub tip: Vec3,
    pub distances: Vec<f64>,
    /// True contact force, anatomy frame.
    pub contact_force: Vec3,
    /// Controller's force estimate magnitude; zero before the first control tick.
    pub estimated_force: f64,
    /// Hand force applied at the last control tick.
    pub hand_force: Vec3,
    pub sigma: f64,
    pub regime: Regime,
    pub structure: Option<u8>,
    pub carved_voxels: usize,
}

pub struct Simulation {
    scenario: Scenario,
    anatomy: AnatomyModel,
    chain: KinematicChain,
    anatomy_from_base: RigidTransform,
    robot: RobotState,
    qdot: Vec<f64>,
    contact_model: ContactModel,
    contact: ContactResult,
    query: DistanceQuery,
    tip_velocity: Vec3,
    sensors: SensorSuite,
    controller: ControllerState,
    command: HandCommand,
    estimate: Option<TipForceEstimate>,
    sigma: f64,
    tick: u64,
    control_div: u64,
    dt: f64,
    carved: usize,
    was_out_of_bounds: bool,
    was_fallback: bool,
    header: LogHeader,
    records: Vec<LogRecord>,
    events: Vec<LogEvent>,
}

impl Simulation {
    /// Builds the anatomy from the scenario (sequentially) and sets up a run.
    pub fn new(scenario: &Scenario, seed: u64) -> Result<Self> {
        let anatomy = scenario.build_anatomy(Execution::Sequential)?;
        Self::with_anatomy(scenario, seed, anatomy)
    }

    /// Uses a prebuilt anatomy, e.g. one shared by a batch of runs.
    pub fn with_anatomy(scenario: &Scenario, seed: u64, anatomy: AnatomyModel) -> Result<Self> {
        scenario.validate()?;
        let chain = scenario.build_chain()?;
        let q0 = scenario
            .robot
            .initial_q
            .clone()
            .unwrap_or_else(|| vec![0.0; chain.dof()]);
        let anatomy_from_base = match &scenario.robot.registration {
            Some(pose) => pose.to_transform(),
            None => {
                if q0.len() != chain.dof() {
                    return Err(Error::Validation(vec![format!(
                        "robot.initial_q has {} entries, chain has {} joints",
                        q0.len(),
                        chain.dof()
                    )]));
                }
                let home = chain.forward_kinematics(&q0);
                RigidTransform::from_translation(Vec3::from(scenario.robot.start_tip) - home.translation())
            }
        };
        let robot = RobotState::new(&chain, q0, &anatomy_from_base)?;
        let sensors = SensorSuite::new(scenario.sensors.drill, scenario.sensors.wrist, seed);
        let controller = ControllerState::new(&scenario.controller);
        let query = anatomy.query(robot.tip.translation());
        let header = LogHeader {
            version: LOG_VERSION,
            name: scenario.name.clone(),
            source: scenario.input.kind().into(),
            seed,
            config_hash: scenario.config_hash(),
            comparison_hash: scenario.comparison_hash(),
            controller_enabled: scenario.controller.enabled,
            record_dt: scenario.control_divisor() as f64 * scenario.sim_dt(),
            contact_threshold: scenario.controller.contact_threshold,
            safety_margin: scenario.controller.activation_margin,
            structures: anatomy.specs().to_vec(),
            dof: chain.dof(),
            scenario: Some(scenario.clone()),
        };
        let sigma = if scenario.controller.enabled {
            controller.sigma
        } else {
            scenario.controller.fixed_sigma
        };
        Ok(Simulation {
            contact_model: ContactModel::new(anatomy.specs().len()),
            contact: ContactResult::default(),
            query,
            tip_velocity: Vec3::zeros(),
            qdot: vec![0.0; chain.dof()],
            sensors,
            controller,
            command: HandCommand::idle(),
            estimate: None,
            sigma,
            tick: 0,
            control_div: scenario.control_divisor(),
            dt: scenario.sim_dt(),
            carved: 0,
            was_out_of_bounds: false,
            was_fallback: false,
            header,
            records: Vec::new(),
            events: Vec::new(),
            scenario: scenario.clone(),
            anatomy,
            chain,
            anatomy_from_base,
            robot,
        })
    }

    /// The scripted operator for this scenario, checked against the anatomy.
    pub fn scripted_input(&self, seed: u64) -> Result<HandForceTrajectory> {
        match &self.scenario.input {
            InputSource::Scripted {
                segments,
                tremor,
                human,
            } => {
                check_reachable(segments, &self.anatomy, &self.scenario.materials)?;
                generate_trajectory(segments, tremor.as_ref(), human, self.scenario.rates.control_hz, seed)
            }
            other => Err(Error::Config(format!(
                "scenario input is '{}', not scripted",
                other.kind()
            ))),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn anatomy(&self) -> &AnatomyModel {
        &self.anatomy
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn total_ticks(&self) -> u64 {
        self.scenario.total_ticks()
    }

    pub fn is_finished(&self) -> bool {
        self.tick >= self.total_ticks()
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn controller(&self) -> &ControllerState {
        &self.controller
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn events(&self) -> &[LogEvent] {
        &self.events
    }

    pub fn snapshot(&self) -> SimSnapshot {
        SimSnapshot {
            t: self.time(),
            tip: *self.robot.tip.translation(),
            distances: self.query.distances.clone(),
            contact_force: self.contact.force,
            estimated_force: self.estimate.map_or(0.0, |e| e.magnitude()),
            hand_force: self.command.wrench.force,
            sigma: self.sigma,
            regime: self.controller.regime,
            structure: self.controller.structure,
            carved_voxels: self.carved,
        }
    }

    /// Advances one simulation tick.
    pub fn step(&mut self, input: &mut dyn HandInput) -> Result<()> {
        let t = self.time();
        let tip = *self.robot.tip.translation();
        self.query = self.anatomy.query(&tip);
        if self.query.out_of_bounds && !self.was_out_of_bounds {
            self.events.push(LogEvent::OutOfBounds { t });
        }
        self.was_out_of_bounds = self.query.out_of_bounds;
        self.contact =
            self.contact_model
                .compute(&self.anatomy, &self.query, &self.tip_velocity, &self.scenario.materials)?;
        let fallback = self.contact.any_fallback();
        if fallback && !self.was_fallback {
            for c in self.contact.contacts.iter().filter(|c| c.normal_fallback) {
                self.events.push(LogEvent::NormalFallback {
                    t,
                    structure: self.anatomy.spec_at(c.structure).index,
                });
            }
        }
        self.was_fallback = fallback;

        let carves = ablate(
            &mut self.anatomy,
            &mut self.contact_model,
            &self.contact,
            &tip,
            &self.scenario.materials,
            self.command.power,
            self.dt,
        )?;
        for c in carves {
            self.carved += c.outcome.removed;
            self.events.push(LogEvent::Carve {
                t,
                structure: self.anatomy.spec_at(c.structure).index,
                removed: c.outcome.removed,
                critical_touched: c.outcome.critical_touched,
                breach: c.outcome.breach,
            });
        }

        let tip_from_anatomy = self.robot.tip.inverse();
        let contact_tip = transform_wrench(
            &Wrench::force_only(self.contact.force, Frame::World),
            &rotation_only(&tip_from_anatomy),
            Frame::Tip,
        );
        let hand_tip = transform_wrench(&self.command.wrench, &rotation_only(&tip_from_anatomy), Frame::Tip);
        self.sensors.simulate(t, &contact_tip, &hand_tip);

        if self.tick.is_multiple_of(self.control_div) {
            self.control(t, input)?;
        }

        let next = integrate_step(
            &self.chain,
            &self.anatomy_from_base,
            &self.robot,
            &self.qdot,
            self.dt,
            1.0,
        )?;
        self.tip_velocity = (next.tip.translation() - self.robot.tip.translation()) / self.dt;
        self.robot = next;
        self.tick += 1;
        Ok(())
    }

    fn control(&mut self, t: f64, input: &mut dyn HandInput) -> Result<()> {
        let obs = HandObservation {
            t,
            tip: *self.robot.tip.translation(),
            contact_force: self.contact.force,
        };
        let command = input.command(&obs)?;
        command.wrench.ensure_finite("hand wrench")?;
        self.command = HandCommand {
            wrench: Wrench::new(command.wrench.force, command.wrench.torque, Frame::World),
            power: command.power,
        };
        let estimate = self.sensors.estimate(t);
        let out = step_controller(
            &ControllerInputs {
                t,
                force: estimate.magnitude(),
                distances: &self.query.distances,
                stale: estimate.stale,
            },
            &mut self.controller,
            &self.scenario.controller,
            self.anatomy.specs(),
        )?;
        self.sigma = out.sigma;
        self.events.extend(out.events.into_iter().map(LogEvent::Controller));

        // The Jacobian is in the base frame about the tip; rotate the hand
        // wrench into base axes without moving its reference point.
        let base_from_anatomy = rotation_only(&self.anatomy_from_base.inverse());
        let hand_base = transform_wrench(&self.command.wrench, &base_from_anatomy, Frame::World);
        let j = self.chain.jacobian(&self.robot.q);
        let dq: DVector<f64> = solve_admittance(
            &j,
            self.chain.gains(),
            self.sigma,
            &hand_base,
            self.scenario.robot.damping,
        )?;
        self.qdot = dq.iter().copied().collect();
        self.estimate = Some(estimate);

        self.records.push(LogRecord {
            t,
            q: self.robot.q.clone(),
            tip: to_array(self.robot.tip.translation()),
            f_h: self.command.wrench.to_array(),
            f_t_true: to_array(&self.contact.force),
            f_t_est: to_array(&estimate.wrench.force),
            distances: self.query.distances.clone(),
            sigma: self.sigma,
            regime: self.controller.regime,
            structure: self.controller.structure,
            power: self.command.power,
            stale: estimate.stale,
            fallback: self.controller.structure_fallback,
            out_of_bounds: self.query.out_of_bounds,
        });
        Ok(())
    }

    /// Runs to the scenario duration.
    pub fn run_to_end(&mut self, input: &mut dyn HandInput) -> Result<()> {
        while !self.is_finished() {
            self.step(input)?;
        }
        Ok(())
    }

    pub fn into_log(mut self) -> RunLog {
        if let InputSource::Live { .. } = self.scenario.input {
            // A live session lasts as long as the client stayed.
            let mut scenario = self.scenario.clone();
            scenario.duration = self.tick as f64 * self.dt;
            self.header.config_hash = scenario.config_hash();
            self.header.comparison_hash = scenario.comparison_hash();
            self.header.scenario = Some(scenario);
        }
        RunLog {
            header: self.header,
            records: self.records,
            events: self.events,
        }
    }
}

fn rotation_only(t: &RigidTransform) -> RigidTransform {
    RigidTransform::from_parts_unchecked(*t.rotation(), Vec3::zeros())
}

/// Replays the hand force and drill power recorded in a log, one record per
/// control tick.
#[derive(Clone, Debug)]
pub struct ReplayInput {
    commands: Vec<(f64, HandCommand)>,
    next: usize,
}

impl ReplayInput {
    pub fn from_log(log: &RunLog) -> Self {
        ReplayInput {
            commands: log
                .records
                .iter()
                .map(|r| {
                    (
                        r.t,
                        HandCommand {
                            wrench: Wrench::from_array(r.f_h, Frame::World),
                            power: r.power,
                        },
                    )
                })
                .collect(),
            next: 0,
        }
    }
}

impl HandInput for ReplayInput {
    fn command(&mut self, obs: &HandObservation) -> Result<HandCommand> {
        let Some(&(t, cmd)) = self.commands.get(self.next) else {
            return Ok(HandCommand::idle());
        };
        if (t - obs.t).abs() > 1e-9 {
            return Err(Error::Mismatch(format!(
                "replay record at t = {t} does not line up with control tick t = {}",
                obs.t
            )));
        }
        self.next += 1;
        Ok(cmd)
    }
}

/// Runs a scenario with its own seed.
pub fn run_simulation(scenario: &Scenario) -> Result<RunLog> {
    run_seeded(scenario, scenario.seed)
}

/// Runs a scripted or replay scenario with an explicit seed.
pub fn run_seeded(scenario: &Scenario, seed: u64) -> Result<RunLog> {
    let sim = Simulation::new(scenario, seed)?;
    drive(sim, seed)
}

fn drive(mut sim: Simulation, seed: u64) -> Result<RunLog> {
    match sim.scenario.input.clone() {
        InputSource::Scripted { .. } => {
            let mut input = sim.scripted_input(seed)?;
            sim.run_to_end(&mut input)?;
        }
        InputSource::Replay { log } => {
            let recorded = RunLog::load(&sim.scenario.resolve(&log))?;
            let mut input = ReplayInput::from_log(&recorded);
            sim.run_to_end(&mut input)?;
        }
        InputSource::Live { .. } => {
            return Err(Error::Config("live scenarios need a session server".into()));
        }
    }
    Ok(sim.into_log())
}

/// Re-runs a log's scenario and seed with the log's own hand input.
pub fn replay_log(log: &RunLog) -> Result<RunLog> {
    let scenario = log
        .header
        .scenario
        .as_ref()
        .ok_or_else(|| Error::Config("log does not embed its scenario".into()))?;
    let mut sim = Simulation::new(scenario, log.header.seed)?;
    let mut input = ReplayInput::from_log(log);
    sim.run_to_end(&mut input)?;
    let mut out = sim.into_log();
    out.header.source = "replay".into();
    Ok(out)
}

/// Runs one scenario over many seeds, sharing a single anatomy build, and
/// maps each log through `f` as soon as it is finished.
pub fn run_batch<T, F>(scenario: &Scenario, seeds: &[u64], exec: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(RunLog) -> T + Sync,
{
    let anatomy = scenario.build_anatomy(exec)?;
    let results = exec::map_slice(exec, seeds, |&seed| -> Result<T> {
        let sim = Simulation::with_anatomy(scenario, seed, anatomy.clone())?;
        Ok(f(drive(sim, seed)?))
    });
    results.into_iter().collect()
}
