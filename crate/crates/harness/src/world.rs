//! One simulated hand with its tactile fingertip and controller, advanced in
//! fixed ticks.

use crate::scenario::{profile_at, ControlMode, Disturbance, DisturbanceKind, Scenario};
use crate::HarnessError;
use serde::Serialize;
use tendon_hand::controller::{
    deformation_servo, fsm_step, map_gesture, motor_targets, ControllerConfig, ControllerState, GestureInput, Mode,
};
use tendon_hand::geometry::Vec2;
use tendon_hand::hand::{step_hand, HandConfig, HandState, MotorSetpoints, ObjectShape, FINGER_COUNT};
use tendon_hand::tactile::{
    detect_slip, indentation_from_contact, FrameAnalysis, PipelineConfig, SlipState, TactileFrame, TactilePipeline,
};
use tendon_hand::Execution;

/// Operator angle used when neither a trace nor a live value is available.
const OPEN_ANGLE: f64 = 180.0;

/// Everything observable after one tick.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TickRecord {
    pub tick: u64,
    pub t: f64,
    pub encoders: MotorSetpoints,
    pub setpoints: MotorSetpoints,
    /// MCP, PIP, DIP per finger, radians.
    pub joints: [f64; 3 * FINGER_COUNT],
    /// Distal phalanx in contact, per finger.
    pub contact: [bool; FINGER_COUNT],
    pub fingertip_contacts: usize,
    pub marker_count: usize,
    pub center: Option<Vec2>,
    pub contact_area: f64,
    pub is_contact: bool,
    pub is_slip: bool,
    pub deformation: f64,
    pub force: f64,
    pub mode: Mode,
    pub gesture: f64,
}

#[derive(Clone, Debug)]
struct Active {
    disturbance: Disturbance,
    remaining: u64,
    per_tick: f64,
}

#[derive(Clone, Debug)]
pub struct World {
    scenario: Scenario,
    hand: HandConfig,
    control: ControllerConfig,
    pipeline: TactilePipeline,
    objects: ObjectShape,
    state: HandState,
    ctrl: ControllerState,
    slip: SlipState,
    slip_offset: Vec2,
    analysis: FrameAnalysis,
    frame: Option<TactileFrame>,
    servo_engaged: bool,
    next_disturbance: usize,
    injected: Vec<Disturbance>,
    active: Vec<Active>,
    live_closure: Option<f64>,
    tick: u64,
}

impl World {
    pub fn new(scenario: &Scenario, exec: Execution) -> Result<Self, HarnessError> {
        scenario.validate()?;
        let hand = scenario.resolve_hand()?;
        let control = scenario.controller.clone().unwrap_or_default();
        let tactile = scenario.tactile.clone().unwrap_or_default();
        let pipeline = TactilePipeline::new(tactile, exec)?;
        Ok(Self::assemble(scenario.clone(), hand, control, pipeline))
    }

    /// Same scenario from a pipeline that is already calibrated.
    pub fn with_pipeline(scenario: &Scenario, pipeline: TactilePipeline) -> Result<Self, HarnessError> {
        scenario.validate()?;
        let hand = scenario.resolve_hand()?;
        let control = scenario.controller.clone().unwrap_or_default();
        Ok(Self::assemble(scenario.clone(), hand, control, pipeline))
    }

    fn assemble(scenario: Scenario, hand: HandConfig, control: ControllerConfig, pipeline: TactilePipeline) -> Self {
        let state = HandState::open(&hand);
        let ctrl = ControllerState::new(&control);
        let (_, analysis) = pipeline.observe(0.0, 0.0).expect("rest analysis is cached");
        World {
            objects: scenario.object_shape(),
            scenario,
            hand,
            control,
            pipeline,
            state,
            ctrl,
            slip: SlipState::default(),
            slip_offset: Vec2::ZERO,
            analysis,
            frame: None,
            servo_engaged: false,
            next_disturbance: 0,
            injected: Vec::new(),
            active: Vec::new(),
            live_closure: None,
            tick: 0,
        }
    }

    /// Back to the open hand at t = 0 with the original objects.
    pub fn reset(&mut self) {
        let pipeline = self.pipeline.clone();
        let live = self.live_closure;
        *self = Self::assemble(self.scenario.clone(), self.hand.clone(), self.control.clone(), pipeline);
        self.live_closure = live;
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn hand_config(&self) -> &HandConfig {
        &self.hand
    }

    pub fn controller_config(&self) -> &ControllerConfig {
        &self.control
    }

    pub fn pipeline(&self) -> &TactilePipeline {
        &self.pipeline
    }

    pub fn state(&self) -> &HandState {
        &self.state
    }

    pub fn controller(&self) -> &ControllerState {
        &self.ctrl
    }

    pub fn objects(&self) -> &ObjectShape {
        &self.objects
    }

    pub fn analysis(&self) -> &FrameAnalysis {
        &self.analysis
    }

    pub fn slip(&self) -> &SlipState {
        &self.slip
    }

    /// Latest sensor image, `None` while the pad is unloaded.
    pub fn frame(&self) -> Option<&TactileFrame> {
        self.frame.as_ref()
    }

    pub fn tick_index(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.scenario.dt()
    }

    pub fn finished(&self) -> bool {
        self.tick >= self.scenario.ticks()
    }

    pub fn set_closure(&mut self, angle: f64) {
        self.live_closure = Some(angle);
    }

    pub fn live_closure(&self) -> Option<f64> {
        self.live_closure
    }

    /// Queues a disturbance that starts on the next tick.
    pub fn inject(&mut self, mut d: Disturbance) {
        d.time = self.time();
        self.injected.push(d);
    }

    fn gesture(&self, t: f64) -> f64 {
        self.live_closure
            .or_else(|| self.scenario.gesture_at(t))
            .unwrap_or(OPEN_ANGLE)
    }

    fn start_disturbances(&mut self, t: f64) {
        let dt = self.scenario.dt();
        let mut starting: Vec<Disturbance> = std::mem::take(&mut self.injected);
        while let Some(d) = self.scenario.disturbances.get(self.next_disturbance) {
            if d.time > t + 1e-9 {
                break;
            }
            starting.push(*d);
            self.next_disturbance += 1;
        }
        for d in starting {
            let ticks = ((d.duration / dt).round() as u64).max(1);
            self.active.push(Active {
                disturbance: d,
                remaining: ticks,
                per_tick: d.magnitude / ticks as f64,
            });
        }
    }

    fn apply_disturbances(&mut self) {
        let sensor = self.scenario.sensor_finger;
        for a in &mut self.active {
            let d = &a.disturbance;
            let step = d.direction * a.per_tick;
            match d.kind {
                DisturbanceKind::IndenterMove => {
                    if let Some(o) = self.objects.obstacles[d.finger.unwrap_or(sensor)].as_mut() {
                        o.translate(step);
                    }
                }
                DisturbanceKind::ObjectForce => {
                    for (i, o) in self.objects.obstacles.iter_mut().enumerate() {
                        if d.finger.is_none_or(|f| f == i) {
                            if let Some(o) = o.as_mut() {
                                o.translate(step);
                            }
                        }
                    }
                }
                DisturbanceKind::InducedSlip => self.slip_offset = self.slip_offset + step,
            }
            a.remaining -= 1;
        }
        self.active.retain(|a| a.remaining > 0);
    }

    fn sense(&mut self) -> Result<(), HarnessError> {
        let c = self.state.contacts.fingers[self.scenario.sensor_finger];
        let mapping = &self.pipeline.config.mapping;
        match c.pad_position {
            Some(pos) if c.pad_penetration > 0.0 => {
                let mut ind = indentation_from_contact(c.pad_penetration, pos, mapping);
                ind.center = ind.center + self.slip_offset;
                let frame = self.pipeline.render(&ind);
                self.analysis = self.pipeline.analyze(&frame)?;
                self.frame = Some(frame);
            }
            _ => {
                // an unloaded pad relaxes, so a later contact starts unshifted
                self.slip_offset = Vec2::ZERO;
                self.analysis = self.pipeline.observe(0.0, 0.0)?.1;
                self.frame = None;
            }
        }
        self.slip = detect_slip(&self.slip, &self.analysis.contact, self.pipeline.config.slip_threshold);
        Ok(())
    }

    fn measured(&self) -> MotorSetpoints {
        MotorSetpoints::new(self.state.motors.agonist_encoder, self.state.motors.antagonist_encoder)
    }

    fn command(&mut self, t: f64, g: f64) -> MotorSetpoints {
        let cfg = &self.control;
        let gesture = GestureInput::new(g);
        match self.scenario.control {
            ControlMode::OpenLoop => {
                let sp = match &self.scenario.motor_profile {
                    Some(p) if self.live_closure.is_none() => {
                        let (ag, an) = profile_at(p, t);
                        MotorSetpoints::new(ag, an)
                    }
                    _ => map_gesture(cfg, gesture),
                };
                self.ctrl.held = sp;
                sp
            }
            ControlMode::Feedback => {
                let (next, sp) = fsm_step(cfg, &self.ctrl, self.slip.is_contact, self.slip.is_slip, gesture);
                self.ctrl = next;
                sp
            }
            ControlMode::Servo => {
                if g > cfg.release_angle {
                    self.servo_engaged = false;
                    self.ctrl.servo = Default::default();
                }
                if !self.servo_engaged && self.slip.is_contact && g <= cfg.release_angle {
                    self.servo_engaged = true;
                    self.ctrl.held = self.measured();
                }
                if self.servo_engaged {
                    let dt = self.scenario.dt();
                    let (u, servo) = deformation_servo(
                        cfg.deformation_target,
                        self.analysis.deformation,
                        &cfg.servo,
                        dt,
                        &self.ctrl.servo,
                    );
                    self.ctrl.servo = servo;
                    let h = self.ctrl.held;
                    self.ctrl.held = MotorSetpoints::new(
                        self.hand.clamp_encoder(h.agonist + u * dt),
                        self.hand.clamp_encoder(h.antagonist + u * dt),
                    );
                    self.ctrl.mode = Mode::ContactHold;
                } else {
                    self.ctrl.held = map_gesture(cfg, gesture);
                    self.ctrl.mode = Mode::Sync;
                }
                self.ctrl.held
            }
        }
    }

    /// Disturbances, sensing, control and actuation for one tick.
    pub fn step(&mut self) -> Result<TickRecord, HarnessError> {
        let dt = self.scenario.dt();
        let t = self.time();
        self.start_disturbances(t);
        self.apply_disturbances();
        self.sense()?;
        let g = self.gesture(t);
        let sp = self.command(t, g);
        let (targets, pid) = motor_targets(&self.control, &self.ctrl, sp, self.measured(), dt);
        self.ctrl.motor_pid = pid;
        let (next, _) = step_hand(&self.hand, &self.state, targets, &self.objects, dt);
        self.state = next;
        self.tick += 1;

        let contacts = &self.state.contacts;
        Ok(TickRecord {
            tick: self.tick,
            t: self.time(),
            encoders: self.measured(),
            setpoints: sp,
            joints: self.state.joint_angles(),
            contact: std::array::from_fn(|i| contacts.fingers[i].distal()),
            fingertip_contacts: contacts.fingertip_contact_count,
            marker_count: self.analysis.marker_count,
            center: self.analysis.contact.center,
            contact_area: self.analysis.contact.contact_area,
            is_contact: self.slip.is_contact,
            is_slip: self.slip.is_slip,
            deformation: self.analysis.deformation,
            force: self.analysis.force,
            mode: self.ctrl.mode,
            gesture: g,
        })
    }

    /// Steps until the scenario duration is reached.
    pub fn run(&mut self) -> Result<Vec<TickRecord>, HarnessError> {
        let mut out = Vec::with_capacity(self.scenario.ticks() as usize);
        while !self.finished() {
            out.push(self.step()?);
        }
        Ok(out)
    }
}

/// Pipeline configured from the scenario, or the defaults.
pub fn pipeline_for(scenario: &Scenario, exec: Execution) -> Result<TactilePipeline, HarnessError> {
    let cfg: PipelineConfig = scenario.tactile.clone().unwrap_or_default();
    Ok(TactilePipeline::new(cfg, exec)?)
}
