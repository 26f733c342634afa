//! Live session service: a fixed-rate tick loop behind a newline-delimited
//! JSON protocol over TCP.
//!
//! The loop thread owns the world. Connection threads only parse and write
//! lines and talk to the loop through channels. The oldest connected client
//! controls the session; everyone else observes.

use crate::scenario::{Disturbance, DisturbanceKind, Scenario};
use crate::world::{TickRecord, World};
use crate::HarnessError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, SyncSender, TryRecvError, TrySendError};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};
use tendon_hand::controller::{ControllerConfig, Mode};
use tendon_hand::geometry::Vec2;
use tendon_hand::hand::{HandConfig, MotorSetpoints, FINGER_COUNT};
use tendon_hand::tactile::{DensityGrid, PipelineConfig};
use tendon_hand::Execution;

/// Heatmap resolution sent with every state message.
pub const HEATMAP_CELLS: usize = 25;
/// Outgoing messages buffered per client before snapshots are dropped.
const CLIENT_QUEUE: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello {
        #[serde(default)]
        name: Option<String>,
    },
    SetClosure {
        angle: f64,
    },
    Inject {
        #[serde(rename = "type")]
        disturbance: DisturbanceKind,
        magnitude: f64,
        #[serde(default)]
        finger: Option<usize>,
        #[serde(default)]
        duration: f64,
        #[serde(default)]
        direction: Option<Vec2>,
    },
    LoadScenario {
        scenario: Box<Scenario>,
    },
    Reset,
}

impl ClientMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ClientMessage::Hello { .. } => "hello",
            ClientMessage::SetClosure { .. } => "set_closure",
            ClientMessage::Inject { .. } => "inject",
            ClientMessage::LoadScenario { .. } => "load_scenario",
            ClientMessage::Reset => "reset",
        }
    }

    fn mutates(&self) -> bool {
        !matches!(self, ClientMessage::Hello { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Control,
    Observer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TactileSnapshot {
    pub marker_count: usize,
    pub center: Option<Vec2>,
    pub contact_area: f64,
    pub is_contact: bool,
    pub is_slip: bool,
    pub deformation: f64,
    pub force: f64,
    pub density: DensityGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub hand: HandConfig,
    pub controller: ControllerConfig,
    pub tactile: PipelineConfig,
    pub scenario: Scenario,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub tick: u64,
    pub t: f64,
    pub mode: Mode,
    pub closure: Option<f64>,
    pub encoders: MotorSetpoints,
    pub setpoints: MotorSetpoints,
    pub joints: Vec<f64>,
    pub contacts: [bool; FINGER_COUNT],
    pub fingertip_contacts: usize,
    pub tactile: TactileSnapshot,
    pub role: Role,
    /// Commands from this client applied since its previous state message.
    #[serde(default)]
    pub ack: Vec<String>,
    #[serde(default)]
    pub config: Option<ConfigSnapshot>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServerMessage {
    State(Box<StateSnapshot>),
    Error {
        message: String,
        #[serde(default)]
        request: Option<String>,
    },
}

impl ServerMessage {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("serialisable message");
        s.push('\n');
        s
    }
}

enum Event {
    Connected(u64, SyncSender<String>),
    Disconnected(u64),
    Command(u64, ClientMessage),
    Malformed(u64, String),
}

struct Client {
    out: SyncSender<String>,
    acks: Vec<String>,
    wants_config: bool,
}

/// Handle to a running session.
pub struct Session {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl Session {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops the loop and the listener and waits for both.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    /// Blocks until the session stops.
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

/// Binds `addr` and starts the tick loop.
pub fn serve(addr: &str, scenario: &Scenario, exec: Execution) -> Result<Session, HarnessError> {
    let world = World::new(scenario, exec)?;
    let listener = TcpListener::bind(addr).map_err(|e| HarnessError::Io(addr.into(), e))?;
    let local = listener.local_addr().map_err(|e| HarnessError::Io(addr.into(), e))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| HarnessError::Io(addr.into(), e))?;
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel();

    let accept = {
        let stop = stop.clone();
        std::thread::spawn(move || accept_loop(listener, tx, stop))
    };
    let ticker = {
        let stop = stop.clone();
        std::thread::spawn(move || tick_loop(world, rx, stop))
    };
    Ok(Session {
        addr: local,
        stop,
        threads: vec![accept, ticker],
    })
}

fn accept_loop(listener: TcpListener, events: Sender<Event>, stop: Arc<AtomicBool>) {
    let mut next_id = 0u64;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let id = next_id;
                next_id += 1;
                if stream.set_nonblocking(false).is_err() {
                    continue;
                }
                spawn_client(id, stream, events.clone());
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(5)),
            Err(_) => std::thread::sleep(Duration::from_millis(5)),
        }
    }
}

fn spawn_client(id: u64, stream: TcpStream, events: Sender<Event>) {
    let Ok(mut writer) = stream.try_clone() else {
        return;
    };
    let (out_tx, out_rx) = mpsc::sync_channel::<String>(CLIENT_QUEUE);
    if events.send(Event::Connected(id, out_tx)).is_err() {
        return;
    }
    std::thread::spawn(move || {
        for line in out_rx {
            if writer.write_all(line.as_bytes()).is_err() {
                break;
            }
        }
        let _ = writer.shutdown(std::net::Shutdown::Write);
    });
    std::thread::spawn(move || {
        let reader = BufReader::new(stream);
        for line in reader.lines() {
            let Ok(line) = line else { break };
            if line.trim().is_empty() {
                continue;
            }
            let ev = match serde_json::from_str::<ClientMessage>(&line) {
                Ok(m) => Event::Command(id, m),
                Err(e) => Event::Malformed(id, e.to_string()),
            };
            if events.send(ev).is_err() {
                return;
            }
        }
        let _ = events.send(Event::Disconnected(id));
    });
}

fn send(client: &Client, msg: &ServerMessage) {
    match client.out.try_send(msg.to_line()) {
        Ok(()) | Err(TrySendError::Disconnected(_)) => {}
        // a slow reader misses snapshots rather than stalling the loop
        Err(TrySendError::Full(_)) => {}
    }
}

fn snapshot(world: &World, last: Option<&TickRecord>, role: Role) -> StateSnapshot {
    let st = world.state();
    let a = world.analysis();
    let slip = world.slip();
    StateSnapshot {
        tick: world.tick_index(),
        t: world.time(),
        mode: world.controller().mode,
        closure: world.live_closure(),
        encoders: MotorSetpoints::new(st.motors.agonist_encoder, st.motors.antagonist_encoder),
        setpoints: last.map_or(world.controller().held, |r| r.setpoints),
        joints: st.joint_angles().to_vec(),
        contacts: std::array::from_fn(|i| st.contacts.fingers[i].distal()),
        fingertip_contacts: st.contacts.fingertip_contact_count,
        tactile: TactileSnapshot {
            marker_count: a.marker_count,
            center: a.contact.center,
            contact_area: a.contact.contact_area,
            is_contact: slip.is_contact,
            is_slip: slip.is_slip,
            deformation: a.deformation,
            force: a.force,
            density: a.density.downsample(HEATMAP_CELLS, HEATMAP_CELLS),
        },
        role,
        ack: Vec::new(),
        config: None,
    }
}

fn config_snapshot(world: &World) -> ConfigSnapshot {
    ConfigSnapshot {
        hand: world.hand_config().clone(),
        controller: world.controller_config().clone(),
        tactile: world.pipeline().config.clone(),
        scenario: world.scenario().clone(),
    }
}

fn apply(world: &mut World, msg: ClientMessage) -> Result<(), String> {
    match msg {
        ClientMessage::Hello { .. } => {}
        ClientMessage::SetClosure { angle } => {
            if !angle.is_finite() {
                return Err("closure angle must be finite".into());
            }
            world.set_closure(angle);
        }
        ClientMessage::Inject {
            disturbance,
            magnitude,
            finger,
            duration,
            direction,
        } => {
            if finger.is_some_and(|f| f >= FINGER_COUNT) || !(duration >= 0.0) || !magnitude.is_finite() {
                return Err("invalid disturbance".into());
            }
            world.inject(Disturbance {
                time: world.time(),
                kind: disturbance,
                magnitude,
                finger,
                duration,
                direction: direction.unwrap_or(Vec2::new(1.0, 0.0)),
            });
        }
        ClientMessage::LoadScenario { scenario } => {
            let exec = world.pipeline().exec;
            let live = world.live_closure();
            *world = World::new(&scenario, exec).map_err(|e| e.to_string())?;
            if let Some(a) = live {
                world.set_closure(a);
            }
        }
        ClientMessage::Reset => world.reset(),
    }
    Ok(())
}

fn tick_loop(mut world: World, events: Receiver<Event>, stop: Arc<AtomicBool>) {
    let period = Duration::from_secs_f64(world.scenario().dt());
    let mut clients: BTreeMap<u64, Client> = BTreeMap::new();
    let mut last: Option<TickRecord> = None;
    let mut deadline = Instant::now() + period;
    while !stop.load(Ordering::SeqCst) {
        // handle traffic until the tick is due
        loop {
            let now = Instant::now();
            if now >= deadline {
                break;
            }
            match events.recv_timeout(deadline - now) {
                Ok(ev) => handle(ev, &mut world, &mut clients),
                Err(RecvTimeoutError::Timeout) => break,
                Err(RecvTimeoutError::Disconnected) => return,
            }
        }
        loop {
            match events.try_recv() {
                Ok(ev) => handle(ev, &mut world, &mut clients),
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return,
            }
        }
        deadline += period;
        let now = Instant::now();
        if deadline < now {
            // behind schedule
            deadline = now;
        }
        match world.step() {
            Ok(r) => last = Some(r),
            Err(e) => {
                let msg = ServerMessage::Error {
                    message: e.to_string(),
                    request: None,
                };
                clients.values().for_each(|c| send(c, &msg));
            }
        }
        let controller = clients.keys().next().copied();
        let base = snapshot(&world, last.as_ref(), Role::Observer);
        for (&id, c) in clients.iter_mut() {
            let mut s = base.clone();
            s.role = if Some(id) == controller { Role::Control } else { Role::Observer };
            s.ack = std::mem::take(&mut c.acks);
            if std::mem::take(&mut c.wants_config) {
                s.config = Some(config_snapshot(&world));
            }
            send(c, &ServerMessage::State(Box::new(s)));
        }
    }
}

fn handle(ev: Event, world: &mut World, clients: &mut BTreeMap<u64, Client>) {
    match ev {
        Event::Connected(id, out) => {
            clients.insert(
                id,
                Client {
                    out,
                    acks: Vec::new(),
                    wants_config: false,
                },
            );
        }
        Event::Disconnected(id) => {
            clients.remove(&id);
        }
        Event::Malformed(id, message) => {
            if let Some(c) = clients.get(&id) {
                send(
                    c,
                    &ServerMessage::Error {
                        message: format!("malformed message: {message}"),
                        request: None,
                    },
                );
            }
        }
        Event::Command(id, msg) => {
            let controller = clients.keys().next().copied();
            let kind = msg.kind();
            let result = if msg.mutates() && controller != Some(id) {
                Err("read-only client".to_string())
            } else {
                if matches!(msg, ClientMessage::Hello { .. }) {
                    if let Some(c) = clients.get_mut(&id) {
                        c.wants_config = true;
                    }
                }
                apply(world, msg)
            };
            let Some(c) = clients.get_mut(&id) else { return };
            match result {
                Ok(()) => c.acks.push(kind.to_string()),
                Err(message) => send(
                    c,
                    &ServerMessage::Error {
                        message,
                        request: Some(kind.to_string()),
                    },
                ),
            }
        }
    }
}
