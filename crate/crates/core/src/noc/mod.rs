// SPDX-License-Identifier: Apache-2.0

//! Data network-on-chip and the debug ring.
//!
//! The data NoC is a 2D mesh of wormhole routers with per-VC input buffers,
//! credit-based flow control and XY dimension-order routing. Packets are
//! split into 32-bit flits; the header flit carries the routing information.
//!
//! Header flit payload layout (32 bits):
//!
//! ```text
//!  31      24 23      16 15   8 7        0
//! +----------+----------+------+----------+
//! |   dst    |   src    | class|    0     |
//! +----------+----------+------+----------+
//! ```

pub mod mesh;
pub mod ring;
pub mod router;

pub use mesh::MeshNetwork;
pub use ring::{RingDelivery, RingFlit, RingNetwork, RingTick};
pub use router::{Router, RouterConfig, RouterTick};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum number of body words in one NoC packet: 32 data words plus up to
/// two network-adapter protocol words.
pub const MAX_BODY_WORDS: usize = 34;

/// The only supported data NoC flit width, in bits.
pub const DATA_FLIT_WIDTH: u32 = 32;

/// Largest tile id that fits the header encoding.
pub const MAX_TILES: usize = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NocError {
    #[error("packet body of {0} words exceeds the {MAX_BODY_WORDS}-word limit")]
    BodyTooLong(usize),
    #[error("unsupported flit width {0} (only {DATA_FLIT_WIDTH} is supported)")]
    UnsupportedFlitWidth(u32),
    #[error("tile id {0} out of range")]
    BadTile(usize),
    #[error("buffer overflow at router ({x},{y}) input {port:?} vc {vc}")]
    BufferOverflow {
        x: usize,
        y: usize,
        port: Port,
        vc: u8,
    },
    #[error("injection at tile {tile} vc {vc} without a local credit")]
    NoCredit { tile: usize, vc: u8 },
    #[error("ring injection at node {node} vc {vc} without buffer space")]
    RingNoSpace { node: usize, vc: u8 },
}

/// Traffic class of a packet. Each class travels on its own virtual channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Class {
    Msg,
    Req,
    Resp,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::Msg, Class::Req, Class::Resp];

    pub fn vc(self) -> u8 {
        match self {
            Class::Msg => 0,
            Class::Req => 1,
            Class::Resp => 2,
        }
    }

    fn code(self) -> u32 {
        self.vc() as u32
    }

    fn from_code(code: u32) -> Option<Class> {
        match code {
            0 => Some(Class::Msg),
            1 => Some(Class::Req),
            2 => Some(Class::Resp),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlitKind {
    Header,
    Payload,
    Tail,
    Single,
}

impl FlitKind {
    pub fn is_head(self) -> bool {
        matches!(self, FlitKind::Header | FlitKind::Single)
    }

    pub fn is_last(self) -> bool {
        matches!(self, FlitKind::Tail | FlitKind::Single)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flit {
    pub kind: FlitKind,
    pub vc: u8,
    pub payload: u32,
}

/// Routing fields decoded from a header (or single) flit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeaderInfo {
    pub dst: usize,
    pub src: usize,
    pub class: Class,
}

pub fn encode_header(class: Class, src: usize, dst: usize) -> u32 {
    ((dst as u32 & 0xff) << 24) | ((src as u32 & 0xff) << 16) | (class.code() << 8)
}

pub fn decode_header(word: u32) -> Option<HeaderInfo> {
    Some(HeaderInfo {
        dst: (word >> 24) as usize,
        src: ((word >> 16) & 0xff) as usize,
        class: Class::from_code((word >> 8) & 0xff)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub class: Class,
    pub src: usize,
    pub dst: usize,
    pub body: Vec<u32>,
}

impl Packet {
    pub fn new(class: Class, src: usize, dst: usize, body: Vec<u32>) -> Self {
        Packet {
            class,
            src,
            dst,
            body,
        }
    }

    pub fn to_flits(&self) -> Result<Vec<Flit>, NocError> {
        packetize(self.class, self.src, self.dst, &self.body, DATA_FLIT_WIDTH)
    }
}

/// Expand a packet into its flit sequence: `Header, Payload*, Tail`, or a
/// lone `Single` flit when the body is empty. The last body word rides in
/// the tail flit.
pub fn packetize(
    class: Class,
    src: usize,
    dst: usize,
    body: &[u32],
    flit_width: u32,
) -> Result<Vec<Flit>, NocError> {
    if flit_width != DATA_FLIT_WIDTH {
        return Err(NocError::UnsupportedFlitWidth(flit_width));
    }
    if body.len() > MAX_BODY_WORDS {
        return Err(NocError::BodyTooLong(body.len()));
    }
    for tile in [src, dst] {
        if tile >= MAX_TILES {
            return Err(NocError::BadTile(tile));
        }
    }
    let vc = class.vc();
    let header = encode_header(class, src, dst);
    if body.is_empty() {
        return Ok(vec![Flit {
            kind: FlitKind::Single,
            vc,
            payload: header,
        }]);
    }
    let mut flits = Vec::with_capacity(body.len() + 1);
    flits.push(Flit {
        kind: FlitKind::Header,
        vc,
        payload: header,
    });
    let last = body.len() - 1;
    for (i, &word) in body.iter().enumerate() {
        flits.push(Flit {
            kind: if i == last {
                FlitKind::Tail
            } else {
                FlitKind::Payload
            },
            vc,
            payload: word,
        });
    }
    Ok(flits)
}

/// Reassembles packets from a flit stream of a single virtual channel.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PacketAssembler {
    current: Option<(HeaderInfo, Vec<u32>)>,
}

impl PacketAssembler {
    /// Feed one flit; returns the packet when its last flit arrives.
    /// Flits that do not fit the wormhole grammar are a protocol violation.
    pub fn push(&mut self, flit: Flit) -> Option<Packet> {
        match flit.kind {
            FlitKind::Single => {
                assert!(self.current.is_none(), "single flit inside a packet");
                let info = decode_header(flit.payload).expect("bad header class");
                Some(Packet::new(info.class, info.src, info.dst, Vec::new()))
            }
            FlitKind::Header => {
                assert!(self.current.is_none(), "header flit inside a packet");
                let info = decode_header(flit.payload).expect("bad header class");
                self.current = Some((info, Vec::new()));
                None
            }
            FlitKind::Payload => {
                let (_, body) = self.current.as_mut().expect("payload without header");
                body.push(flit.payload);
                None
            }
            FlitKind::Tail => {
                let (info, mut body) = self.current.take().expect("tail without header");
                body.push(flit.payload);
                Some(Packet::new(info.class, info.src, info.dst, body))
            }
        }
    }

    pub fn is_idle(&self) -> bool {
        self.current.is_none()
    }
}

/// Router port. `y` grows southward, so North is `y - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Port {
    North,
    East,
    South,
    West,
    Local,
}

impl Port {
    pub const ALL: [Port; 5] = [
        Port::North,
        Port::East,
        Port::South,
        Port::West,
        Port::Local,
    ];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Port {
        Port::ALL[i]
    }

    pub fn opposite(self) -> Port {
        match self {
            Port::North => Port::South,
            Port::South => Port::North,
            Port::East => Port::West,
            Port::West => Port::East,
            Port::Local => Port::Local,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Port::North => "north",
            Port::East => "east",
            Port::South => "south",
            Port::West => "west",
            Port::Local => "local",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub x: usize,
    pub y: usize,
}

impl Coord {
    pub fn new(x: usize, y: usize) -> Self {
        Coord { x, y }
    }

    pub fn of_tile(tile: usize, width: usize) -> Self {
        Coord::new(tile % width, tile / width)
    }

    pub fn tile(self, width: usize) -> usize {
        self.y * width + self.x
    }

    /// Neighbor through `port`, if it exists inside a `width` x `height` mesh.
    pub fn neighbor(self, port: Port, width: usize, height: usize) -> Option<Coord> {
        match port {
            Port::North if self.y > 0 => Some(Coord::new(self.x, self.y - 1)),
            Port::South if self.y + 1 < height => Some(Coord::new(self.x, self.y + 1)),
            Port::West if self.x > 0 => Some(Coord::new(self.x - 1, self.y)),
            Port::East if self.x + 1 < width => Some(Coord::new(self.x + 1, self.y)),
            _ => None,
        }
    }
}

/// XY dimension-order routing: resolve X first, then Y, then eject.
pub fn route_xy(current: Coord, dest: Coord) -> Port {
    use std::cmp::Ordering::*;
    match dest.x.cmp(&current.x) {
        Greater => Port::East,
        Less => Port::West,
        Equal => match dest.y.cmp(&current.y) {
            Greater => Port::South,
            Less => Port::North,
            Equal => Port::Local,
        },
    }
}
