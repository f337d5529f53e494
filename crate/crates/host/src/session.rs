// SPDX-License-Identifier: Apache-2.0

//! A debug session over one ordered byte stream.
//!
//! A reader thread decodes every incoming frame. Register values go to the
//! control side ([`Control`]), trace events and malformed-frame reports to
//! the event side ([`EventStream`]). The two halves can be used from
//! different threads after [`Session::split`].
//!
//! Writes are acknowledged by reading the register back.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::event::TraceEvent;
use crate::frame::{packet_type, RawPacket, StreamDecoder};
use crate::transport::{self, TransportSpec, Writer};
use crate::trigger::{reg, TriggerSpec};
use crate::{Attachment, DebugModuleDescriptor, ModuleKind};

const EXTIF: u8 = 0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("connection refused: {0}")]
    ConnectionRefused(String),
    #[error("connection attempt timed out")]
    HandshakeTimeout,
    #[error("timed out waiting for the chip")]
    Timeout,
    #[error("no acknowledgement from module {module} for register {reg:#x}")]
    NackTimeout { module: u8, reg: u16 },
    #[error("module {module} register {reg:#x} reads {got:#x}, expected {expected:#x}")]
    AckMismatch {
        module: u8,
        reg: u16,
        expected: u32,
        got: u32,
    },
    #[error("no debug module {0}")]
    NoSuchModule(u8),
    #[error("condition {condition} cannot be used on module {module} ({kind:?})")]
    TypeMismatch {
        module: u8,
        kind: ModuleKind,
        condition: &'static str,
    },
    #[error("malformed frame at byte {offset}: {reason}")]
    MalformedFrame { offset: u64, reason: String },
    #[error("end of stream")]
    EndOfStream,
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionOptions {
    pub connect_timeout: Duration,
    pub event_timeout: Duration,
    pub control_timeout: Duration,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            connect_timeout: Duration::from_secs(5),
            event_timeout: Duration::from_secs(1),
            control_timeout: Duration::from_secs(5),
        }
    }
}

/// Target of a collection command. `All` means every module that produces
/// trace events, i.e. every module except the external interface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModuleSet {
    All,
    Some(Vec<u8>),
}

struct RegValue {
    module: u8,
    reg: u16,
    value: u32,
}

type EventItem = Result<TraceEvent, SessionError>;

fn reader_loop(
    mut input: Box<dyn Read + Send>,
    control: Sender<RegValue>,
    events: Sender<EventItem>,
) {
    let mut dec = StreamDecoder::new();
    let mut buf = vec![0u8; 64 * 1024];
    let mut offset = 0u64;
    loop {
        let n = match input.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => {
                let _ = events.send(Err(SessionError::Io(e.to_string())));
                break;
            }
        };
        dec.push(&buf[..n]);
        while let Some(item) = dec.next_packet() {
            match item {
                Ok(p) => {
                    let start = offset;
                    offset += 2 + 2 * (4 + p.body.len() as u64);
                    dispatch(p, start, &control, &events);
                }
                Err(m) => {
                    let _ = events.send(Err(SessionError::MalformedFrame {
                        offset: m.offset,
                        reason: m.reason,
                    }));
                }
            }
        }
        if dec.is_broken() {
            break;
        }
    }
    if let Some(m) = dec.finish() {
        let _ = events.send(Err(SessionError::MalformedFrame {
            offset: m.offset,
            reason: m.reason,
        }));
    }
}

fn dispatch(p: RawPacket, offset: u64, control: &Sender<RegValue>, events: &Sender<EventItem>) {
    if p.ptype == packet_type::REG_VALUE && p.body.len() == 3 {
        let _ = control.send(RegValue {
            module: p.src,
            reg: p.body[0],
            value: (p.body[1] as u32) << 16 | p.body[2] as u32,
        });
        return;
    }
    let item = TraceEvent::decode(p.src, p.ptype, p.timestamp, &p.body).ok_or_else(|| {
        SessionError::MalformedFrame {
            offset,
            reason: format!(
                "packet type {:#x} from module {} with {} body flits",
                p.ptype,
                p.src,
                p.body.len()
            ),
        }
    });
    let _ = events.send(item);
}

/// Request side of a session.
pub struct Control {
    out: Writer,
    replies: Receiver<RegValue>,
    timeout: Duration,
    modules: Vec<DebugModuleDescriptor>,
}

/// Event side of a session.
pub struct EventStream {
    events: Receiver<EventItem>,
    timeout: Duration,
    ended: bool,
}

pub struct Session {
    control: Control,
    events: EventStream,
}

impl Session {
    pub fn connect(spec: TransportSpec, opts: SessionOptions) -> Result<Session, SessionError> {
        let (input, output) = transport::open(spec, opts.connect_timeout)?;
        let (ctl_tx, ctl_rx) = mpsc::channel();
        let (ev_tx, ev_rx) = mpsc::channel();
        std::thread::Builder::new()
            .name("debug-session-reader".into())
            .spawn(move || reader_loop(input, ctl_tx, ev_tx))
            .map_err(|e| SessionError::Io(e.to_string()))?;
        Ok(Session {
            control: Control {
                out: output,
                replies: ctl_rx,
                timeout: opts.control_timeout,
                modules: Vec::new(),
            },
            events: EventStream {
                events: ev_rx,
                timeout: opts.event_timeout,
                ended: false,
            },
        })
    }

    pub fn split(self) -> (Control, EventStream) {
        (self.control, self.events)
    }

    pub fn control(&mut self) -> &mut Control {
        &mut self.control
    }

    pub fn events(&mut self) -> &mut EventStream {
        &mut self.events
    }

    pub fn enumerate(&mut self) -> Result<Vec<DebugModuleDescriptor>, SessionError> {
        self.control.enumerate()
    }

    pub fn set_trigger(&mut self, spec: &TriggerSpec) -> Result<(), SessionError> {
        self.control.set_trigger(spec)
    }

    pub fn start_collection(&mut self, set: &ModuleSet) -> Result<(), SessionError> {
        self.control.start_collection(set)
    }

    pub fn stop_collection(&mut self, set: &ModuleSet) -> Result<(), SessionError> {
        self.control.stop_collection(set)
    }

    pub fn run(&mut self) -> Result<(), SessionError> {
        self.control.run()
    }

    pub fn next_event(&mut self) -> Result<TraceEvent, SessionError> {
        self.events.next_event()
    }
}

impl Control {
    fn send(&mut self, p: RawPacket) -> Result<(), SessionError> {
        self.out
            .write_all(&p.encode())
            .and_then(|_| self.out.flush())
            .map_err(|e| SessionError::Io(e.to_string()))
    }

    fn drain_stale(&mut self) {
        while self.replies.try_recv().is_ok() {}
    }

    fn wait_for(&mut self, module: u8, r: u16, deadline: Instant) -> Result<u32, SessionError> {
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.replies.recv_timeout(left) {
                Ok(v) if v.module == module && v.reg == r => return Ok(v.value),
                Ok(_) => {}
                Err(RecvTimeoutError::Timeout) => {
                    return Err(SessionError::NackTimeout { module, reg: r })
                }
                Err(RecvTimeoutError::Disconnected) => return Err(SessionError::EndOfStream),
            }
        }
    }

    /// Modules found by the last [`enumerate`](Self::enumerate).
    pub fn modules(&self) -> &[DebugModuleDescriptor] {
        &self.modules
    }

    /// Discover every module on the ring, ordered by id.
    pub fn enumerate(&mut self) -> Result<Vec<DebugModuleDescriptor>, SessionError> {
        self.drain_stale();
        self.send(RawPacket::request(EXTIF, packet_type::DISCOVER, vec![]))?;
        let deadline = Instant::now() + self.timeout;
        let mut found: BTreeMap<u8, DebugModuleDescriptor> = BTreeMap::new();
        let mut expected: Option<usize> = None;
        while expected != Some(found.len()) {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.replies.recv_timeout(left) {
                Ok(v) if v.reg == reg::DESCRIPTOR => {
                    let Some(d) = DebugModuleDescriptor::from_word(v.module, v.value) else {
                        continue;
                    };
                    if let Attachment::Host { modules } = d.attach {
                        expected = Some(modules as usize);
                    }
                    found.insert(d.id, d);
                }
                Ok(_) => {}
                Err(RecvTimeoutError::Timeout) => return Err(SessionError::Timeout),
                Err(RecvTimeoutError::Disconnected) => return Err(SessionError::EndOfStream),
            }
        }
        self.modules = found.into_values().collect();
        Ok(self.modules.clone())
    }

    pub fn write_register(&mut self, module: u8, r: u16, value: u32) -> Result<(), SessionError> {
        self.send(RawPacket::request(
            module,
            packet_type::REG_WRITE,
            vec![r, (value >> 16) as u16, value as u16],
        ))
    }

    pub fn read_register(&mut self, module: u8, r: u16) -> Result<u32, SessionError> {
        self.send(RawPacket::request(module, packet_type::REG_READ, vec![r]))?;
        let deadline = Instant::now() + self.timeout;
        self.wait_for(module, r, deadline)
    }

    /// Write, then read back and compare against `expect`.
    pub fn write_checked(
        &mut self,
        module: u8,
        r: u16,
        value: u32,
        expect: u32,
    ) -> Result<(), SessionError> {
        self.write_register(module, r, value)?;
        let got = self.read_register(module, r)?;
        if got != expect {
            return Err(SessionError::AckMismatch {
                module,
                reg: r,
                expected: expect,
                got,
            });
        }
        Ok(())
    }

    fn descriptor(&mut self, module: u8) -> Result<DebugModuleDescriptor, SessionError> {
        if self.modules.is_empty() {
            self.enumerate()?;
        }
        self.modules
            .iter()
            .find(|d| d.id == module)
            .copied()
            .ok_or(SessionError::NoSuchModule(module))
    }

    pub fn set_trigger(&mut self, spec: &TriggerSpec) -> Result<(), SessionError> {
        let d = self.descriptor(spec.module)?;
        if !spec.condition.compatible_with(d.module_type) {
            return Err(SessionError::TypeMismatch {
                module: spec.module,
                kind: d.module_type,
                condition: spec.condition.name(),
            });
        }
        for (r, v) in spec.register_writes() {
            self.write_checked(spec.module, r, v, v)?;
        }
        Ok(())
    }

    fn resolve(&mut self, set: &ModuleSet) -> Result<Vec<u8>, SessionError> {
        if self.modules.is_empty() {
            self.enumerate()?;
        }
        match set {
            ModuleSet::All => Ok(self
                .modules
                .iter()
                .filter(|d| d.module_type != ModuleKind::Extif)
                .map(|d| d.id)
                .collect()),
            ModuleSet::Some(ids) => {
                for &id in ids {
                    self.descriptor(id)?;
                }
                Ok(ids.clone())
            }
        }
    }

    pub fn start_collection(&mut self, set: &ModuleSet) -> Result<(), SessionError> {
        for id in self.resolve(set)? {
            self.write_checked(id, reg::ENABLE, 1, 1)?;
        }
        Ok(())
    }

    pub fn stop_collection(&mut self, set: &ModuleSet) -> Result<(), SessionError> {
        for id in self.resolve(set)? {
            self.write_checked(id, reg::ENABLE, 0, 0)?;
        }
        Ok(())
    }

    /// Release a simulation that is waiting for its host.
    pub fn run(&mut self) -> Result<(), SessionError> {
        self.write_checked(EXTIF, reg::RUN, 1, 1)
    }

    /// The chip's current cycle.
    pub fn cycle(&mut self) -> Result<u64, SessionError> {
        let hi = self.read_register(EXTIF, reg::CYCLE_HI)? as u64;
        let lo = self.read_register(EXTIF, reg::CYCLE_LO)? as u64;
        Ok(hi << 32 | lo)
    }
}

impl EventStream {
    pub fn set_timeout(&mut self, t: Duration) {
        self.timeout = t;
    }

    /// Next decoded event. Malformed frames are returned as errors; after
    /// [`SessionError::EndOfStream`] every call returns it again.
    pub fn next_event(&mut self) -> Result<TraceEvent, SessionError> {
        self.next_event_timeout(self.timeout)
    }

    pub fn next_event_timeout(&mut self, timeout: Duration) -> Result<TraceEvent, SessionError> {
        if self.ended {
            return Err(SessionError::EndOfStream);
        }
        match self.events.recv_timeout(timeout) {
            Ok(item) => item,
            Err(RecvTimeoutError::Timeout) => Err(SessionError::Timeout),
            Err(RecvTimeoutError::Disconnected) => {
                self.ended = true;
                Err(SessionError::EndOfStream)
            }
        }
    }

    /// Read until the chip closes the stream. Timeouts are retried, so this
    /// only returns once the simulation has finished.
    pub fn collect_to_end(&mut self) -> (Vec<TraceEvent>, Vec<SessionError>) {
        let mut events = Vec::new();
        let mut errors = Vec::new();
        loop {
            match self.next_event() {
                Ok(e) => events.push(e),
                Err(SessionError::Timeout) => {}
                Err(SessionError::EndOfStream) => break,
                Err(e) => errors.push(e),
            }
        }
        (events, errors)
    }
}
