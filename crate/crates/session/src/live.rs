//! A live session without any transport: steer commands in, snapshots and
//! events out. The WebSocket server and the tests both drive this.

use drilltwin::geometry::Vec3;
use drilltwin::robot::{Frame, Wrench};
use drilltwin::scenario::{HandCommand, HandInput, HandObservation, InputSource, RunLog, Scenario, Simulation};

use crate::protocol::{Hello, ServerMessage, SessionSnapshot, SteerCommand};
use crate::{SessionError, SessionResult};

/// Hand input fed by the latest steer command.
///
/// A command is picked up at the next control tick (last writer wins) and
/// held. Once no command has arrived for longer than the dead-man timeout,
/// the hand force and drill power drop to zero.
#[derive(Clone, Debug)]
pub struct LiveInput {
    max_force: f64,
    deadman_timeout: f64,
    pending: Option<SteerCommand>,
    current: SteerCommand,
    last_received: Option<f64>,
}

impl LiveInput {
    pub fn new(max_force: f64, deadman_timeout: f64) -> Self {
        LiveInput {
            max_force,
            deadman_timeout,
            pending: None,
            current: SteerCommand::force([0.0; 3]),
            last_received: None,
        }
    }

    /// Queues a command, clamped per component. Non-finite commands are refused.
    pub fn submit(&mut self, cmd: SteerCommand) -> SessionResult<()> {
        if !cmd.is_finite() {
            return Err(SessionError::Rejected("steer command has non-finite values".into()));
        }
        self.pending = Some(cmd.clamped(self.max_force));
        Ok(())
    }
}

impl HandInput for LiveInput {
    fn command(&mut self, obs: &HandObservation) -> drilltwin::Result<HandCommand> {
        if let Some(cmd) = self.pending.take() {
            self.current = cmd;
            self.last_received = Some(obs.t);
        }
        let alive = self.last_received.is_some_and(|t| obs.t - t <= self.deadman_timeout);
        if !alive {
            return Ok(HandCommand::idle());
        }
        let c = &self.current;
        Ok(HandCommand {
            wrench: Wrench::new(Vec3::from(c.force), Vec3::from(c.torque), Frame::World),
            power: c.power,
        })
    }
}

pub struct LiveSession {
    sim: Simulation,
    input: LiveInput,
    hello: Hello,
    snapshot_period: f64,
    next_snapshot: f64,
    event_cursor: usize,
    last_snapshot_t: Option<f64>,
}

impl LiveSession {
    /// `snapshot_hz` overrides the scenario's snapshot rate.
    pub fn new(scenario: &Scenario, seed: u64, snapshot_hz: Option<f64>) -> SessionResult<Self> {
        let InputSource::Live {
            max_force,
            deadman_timeout,
            snapshot_hz: scenario_hz,
        } = scenario.input
        else {
            return Err(SessionError::Core(drilltwin::Error::Config(format!(
                "scenario input is '{}', a live session needs 'live'",
                scenario.input.kind()
            ))));
        };
        let hz = snapshot_hz.unwrap_or(scenario_hz);
        if !hz.is_finite() || hz <= 0.0 {
            return Err(SessionError::Core(drilltwin::Error::InvalidArgument(format!(
                "snapshot rate must be > 0, got {hz}"
            ))));
        }
        let sim = Simulation::new(scenario, seed)?;
        let volume = sim.anatomy().volume();
        let hello = Hello {
            scenario: scenario.name.clone(),
            seed,
            structures: sim.anatomy().specs().to_vec(),
            controller: scenario.controller,
            dims: volume.dims(),
            spacing: volume.spacing(),
            origin: volume.origin(),
            sim_hz: scenario.rates.sim_hz,
            control_hz: scenario.rates.control_hz,
            snapshot_hz: hz,
            max_force,
            deadman_timeout,
            duration: scenario.duration,
        };
        Ok(LiveSession {
            sim,
            input: LiveInput::new(max_force, deadman_timeout),
            hello,
            snapshot_period: 1.0 / hz,
            next_snapshot: 0.0,
            event_cursor: 0,
            last_snapshot_t: None,
        })
    }

    pub fn hello(&self) -> &Hello {
        &self.hello
    }

    pub fn time(&self) -> f64 {
        self.sim.time()
    }

    /// The scenario duration has elapsed (never, for open-ended sessions).
    pub fn is_finished(&self) -> bool {
        self.hello.duration > 0.0 && self.sim.is_finished()
    }

    pub fn submit(&mut self, cmd: SteerCommand) -> SessionResult<()> {
        self.input.submit(cmd)
    }

    /// Steps the simulation until its clock reaches `t` (or the session
    /// ends) and returns the snapshots and events produced on the way.
    pub fn advance_to(&mut self, t: f64) -> SessionResult<Vec<ServerMessage>> {
        let mut out = Vec::new();
        while self.sim.time() < t && !self.is_finished() {
            self.sim.step(&mut self.input)?;
            self.drain_events(&mut out);
            if self.sim.time() >= self.next_snapshot {
                out.push(self.snapshot_message());
                while self.next_snapshot <= self.sim.time() {
                    self.next_snapshot += self.snapshot_period;
                }
            }
        }
        Ok(out)
    }

    /// Advances by a whole number of simulation ticks.
    pub fn advance_ticks(&mut self, ticks: u64) -> SessionResult<Vec<ServerMessage>> {
        let target = (self.sim.tick() + ticks) as f64 / self.hello.sim_hz;
        self.advance_to(target - 0.5 / self.hello.sim_hz)
    }

    fn drain_events(&mut self, out: &mut Vec<ServerMessage>) {
        for e in &self.sim.events()[self.event_cursor..] {
            out.push(ServerMessage::Event {
                t: e.t(),
                event: e.clone(),
            });
        }
        self.event_cursor = self.sim.events().len();
    }

    fn snapshot_message(&mut self) -> ServerMessage {
        let s = self.sim.snapshot();
        debug_assert!(self.last_snapshot_t.is_none_or(|prev| s.t > prev));
        self.last_snapshot_t = Some(s.t);
        let h = &self.hello;
        ServerMessage::Snapshot(SessionSnapshot::from_sim(&s, h.dims, h.spacing, h.origin))
    }

    pub fn records(&self) -> usize {
        self.sim.records().len()
    }

    /// Ends the session and returns its log; the scenario embedded in the log
    /// carries the actual session length so it replays tick for tick.
    pub fn finish(self) -> RunLog {
        self.sim.into_log()
    }
}
