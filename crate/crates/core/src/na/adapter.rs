// SPDX-License-Identifier: Apache-2.0

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use super::proto::{MsgHeader, Op, XferHeader};
use super::{
    lsu_translate, regs, Endpoint, Translation, DMA_MAX_WORDS, DMA_SEGMENT_WORDS, DMA_SLOTS,
    MAX_MSG_WORDS, PORTS, RECV_QUEUE_DEPTH,
};
use crate::mem::Memory;
use crate::noc::{Class, Flit, Packet, PacketAssembler};
use crate::pe::{is_mmio, Bus, BusResult, MMIO_BASE};

/// How a tile's data accesses reach memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TileOrg {
    /// Loads and stores address local memory only.
    Distributed,
    /// Loads and stores use global addresses, translated by the LSU.
    Pgas { partition_bytes: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SendError {
    #[error("previous message not yet injected")]
    Busy,
    #[error("payload length out of range")]
    LenRange,
    #[error("bad destination tile or port")]
    BadDest,
    #[error("payload address out of range")]
    BadAddr,
}

impl SendError {
    fn status_bit(self) -> u32 {
        match self {
            SendError::Busy => regs::STATUS_SEND_BUSY,
            SendError::LenRange => regs::STATUS_LEN,
            SendError::BadDest => regs::STATUS_BAD_DEST,
            SendError::BadAddr => regs::STATUS_BAD_ADDR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DmaError {
    #[error("all DMA transaction slots are in use")]
    NoFreeSlot,
    #[error("DMA length or address out of range")]
    RangeError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DmaDir {
    /// Copy remote memory into local memory.
    ReadRemote,
    /// Copy local memory into remote memory.
    WriteRemote,
}

/// Diagnostics the adapter reports to the debug fabric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NaEventKind {
    DmaDone = 1,
    RecvOverflow = 2,
    UnknownPort = 3,
    DmaFailed = 4,
}

impl NaEventKind {
    pub fn from_code(code: u16) -> Option<Self> {
        Some(match code {
            1 => NaEventKind::DmaDone,
            2 => NaEventKind::RecvOverflow,
            3 => NaEventKind::UnknownPort,
            4 => NaEventKind::DmaFailed,
            _ => return None,
        })
    }
}

/// `DmaDone`/`DmaFailed`: a = transaction id, b = length in words.
/// `RecvOverflow`/`UnknownPort`: a = destination port, b = source tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NaEvent {
    pub kind: NaEventKind,
    pub a: u16,
    pub b: u16,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NaStats {
    pub messages_sent: u64,
    pub messages_received: u64,
    pub messages_dropped: u64,
    pub dma_started: u64,
    pub dma_completed: u64,
    pub requests_served: u64,
    pub flits_injected: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct RecvMsg {
    /// Header word as seen through RECV_WORD, then the payload.
    words: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct DmaTxn {
    dir: DmaDir,
    local: u32,
    len: u32,
    segments: u32,
    segments_done: u32,
    failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LsuState {
    Waiting,
    Done(Option<u32>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LsuPending {
    addr: u32,
    write: Option<u32>,
    state: LsuState,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct SendRegs {
    dest_tile: u32,
    dest_port: u32,
    src_port: u32,
    len: u32,
    addr: u32,
    errors: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct DmaRegs {
    local: u32,
    remote_tile: u32,
    remote_addr: u32,
    len: u32,
    last_start: u32,
    done: u32,
    error: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkAdapter {
    tile: usize,
    num_tiles: usize,
    mem_bytes: u32,
    org: TileOrg,
    send: SendRegs,
    msg_in_flight: bool,
    outbox: [VecDeque<Flit>; 3],
    rr: usize,
    recv: Vec<VecDeque<RecvMsg>>,
    cursor: Vec<usize>,
    na_error: u32,
    dma: DmaRegs,
    txns: [Option<DmaTxn>; DMA_SLOTS],
    lsu: Option<LsuPending>,
    /// Ejected flits of different classes interleave, so one per vc.
    assemblers: [PacketAssembler; 3],
    events: Vec<NaEvent>,
    stats: NaStats,
}

fn class_index(class: Class) -> usize {
    class.vc() as usize
}

impl NetworkAdapter {
    /// `mem_bytes` is the local memory size, assumed equal on every tile.
    pub fn new(tile: usize, num_tiles: usize, mem_bytes: u32, org: TileOrg) -> Self {
        NetworkAdapter {
            tile,
            num_tiles,
            mem_bytes,
            org,
            send: SendRegs::default(),
            msg_in_flight: false,
            outbox: Default::default(),
            rr: 0,
            recv: vec![VecDeque::new(); PORTS],
            cursor: vec![0; PORTS],
            na_error: 0,
            dma: DmaRegs::default(),
            txns: [None; DMA_SLOTS],
            lsu: None,
            assemblers: Default::default(),
            events: Vec::new(),
            stats: NaStats::default(),
        }
    }

    pub fn tile(&self) -> usize {
        self.tile
    }

    pub fn org(&self) -> TileOrg {
        self.org
    }

    pub fn stats(&self) -> NaStats {
        self.stats
    }

    pub fn error_flags(&self) -> u32 {
        self.na_error
    }

    pub fn recv_pending(&self, port: u8) -> usize {
        self.recv[port as usize].len()
    }

    pub fn dma_done_mask(&self) -> u32 {
        self.dma.done
    }

    pub fn dma_in_flight(&self) -> usize {
        self.txns.iter().flatten().count()
    }

    /// No queued flits, partial packets, transactions or remote accesses.
    pub fn is_idle(&self) -> bool {
        self.outbox.iter().all(VecDeque::is_empty)
            && self.assemblers.iter().all(PacketAssembler::is_idle)
            && self.dma_in_flight() == 0
            && !matches!(
                self.lsu,
                Some(LsuPending {
                    state: LsuState::Waiting,
                    ..
                })
            )
    }

    pub fn drain_events(&mut self) -> Vec<NaEvent> {
        std::mem::take(&mut self.events)
    }

    fn enqueue(&mut self, class: Class, dst: usize, body: Vec<u32>) {
        let flits = Packet::new(class, self.tile, dst, body)
            .to_flits()
            .expect("adapter packets stay within the body limit");
        self.outbox[class_index(class)].extend(flits);
    }

    /// Queue a message whose payload is read from local memory.
    pub fn send(
        &mut self,
        mem: &Memory,
        src_port: u32,
        dst_tile: u32,
        dst_port: u32,
        addr: u32,
        len: u32,
    ) -> Result<(), SendError> {
        if self.msg_in_flight {
            return Err(SendError::Busy);
        }
        if len as usize > MAX_MSG_WORDS {
            return Err(SendError::LenRange);
        }
        if dst_tile as usize >= self.num_tiles
            || dst_port as usize >= PORTS
            || src_port as usize >= PORTS
        {
            return Err(SendError::BadDest);
        }
        if len > 0 && !mem.contains_range(addr, len) {
            return Err(SendError::BadAddr);
        }
        let payload = if len > 0 {
            mem.slice(addr, len as usize)
        } else {
            &[]
        };
        self.send_words(
            src_port as u8,
            Endpoint {
                tile: dst_tile as usize,
                port: dst_port as u8,
            },
            payload,
        )
    }

    /// Queue a message with an explicit payload.
    pub fn send_words(
        &mut self,
        src_port: u8,
        dst: Endpoint,
        payload: &[u32],
    ) -> Result<(), SendError> {
        if self.msg_in_flight {
            return Err(SendError::Busy);
        }
        if payload.len() > MAX_MSG_WORDS {
            return Err(SendError::LenRange);
        }
        if dst.tile >= self.num_tiles || dst.port as usize >= PORTS || src_port as usize >= PORTS {
            return Err(SendError::BadDest);
        }
        let hdr = MsgHeader {
            src_port,
            dst_port: dst.port,
            len: payload.len() as u8,
        };
        let mut body = Vec::with_capacity(payload.len() + 1);
        body.push(hdr.encode());
        body.extend_from_slice(payload);
        self.enqueue(Class::Msg, dst.tile, body);
        self.msg_in_flight = true;
        self.stats.messages_sent += 1;
        Ok(())
    }

    /// Dequeue the head message of `port` as (source endpoint, payload).
    pub fn take_message(&mut self, port: u8) -> Option<(Endpoint, Vec<u32>)> {
        let msg = self.recv[port as usize].pop_front()?;
        self.cursor[port as usize] = 0;
        let hdr = msg.words[0];
        let src = Endpoint {
            tile: (hdr >> 24) as usize,
            port: (hdr >> 16) as u8,
        };
        Some((src, msg.words[1..].to_vec()))
    }

    pub fn dma_start(
        &mut self,
        mem: &Memory,
        dir: DmaDir,
        local: u32,
        remote_tile: usize,
        remote_addr: u32,
        len: u32,
    ) -> Result<u8, DmaError> {
        if len > DMA_MAX_WORDS
            || remote_tile >= self.num_tiles
            || !mem.contains_range(local, len)
            || !remote_addr.is_multiple_of(4)
            || remote_addr as u64 + 4 * len as u64 > self.mem_bytes as u64
        {
            return Err(DmaError::RangeError);
        }
        let slot = self
            .txns
            .iter()
            .position(Option::is_none)
            .ok_or(DmaError::NoFreeSlot)?;
        let id = slot as u8;
        self.dma.done &= !(1 << slot);
        self.stats.dma_started += 1;
        if len == 0 {
            self.complete_dma(id, 0, false);
            return Ok(id);
        }
        let segments = len.div_ceil(DMA_SEGMENT_WORDS);
        self.txns[slot] = Some(DmaTxn {
            dir,
            local,
            len,
            segments,
            segments_done: 0,
            failed: false,
        });
        for seg in 0..segments {
            let first = seg * DMA_SEGMENT_WORDS;
            let n = (len - first).min(DMA_SEGMENT_WORDS);
            let raddr = remote_addr + 4 * first;
            let body = match dir {
                DmaDir::ReadRemote => {
                    vec![
                        XferHeader::new(Op::DmaRead, id, seg as u8, n as u16).encode(),
                        raddr,
                    ]
                }
                DmaDir::WriteRemote => {
                    let mut b = vec![
                        XferHeader::new(Op::DmaWrite, id, seg as u8, n as u16).encode(),
                        raddr,
                    ];
                    b.extend_from_slice(mem.slice(local + 4 * first, n as usize));
                    b
                }
            };
            self.enqueue(Class::Req, remote_tile, body);
        }
        Ok(id)
    }

    fn complete_dma(&mut self, id: u8, len: u32, failed: bool) {
        self.dma.done |= 1 << id;
        if failed {
            self.dma.error |= regs::DMA_ERR_REMOTE;
        }
        self.stats.dma_completed += 1;
        self.events.push(NaEvent {
            kind: if failed {
                NaEventKind::DmaFailed
            } else {
                NaEventKind::DmaDone
            },
            a: id as u16,
            b: len as u16,
        });
    }

    /// Pick the next flit to inject, round-robin over traffic classes that
    /// have a local credit.
    pub fn next_injection(&mut self, can_inject: impl Fn(u8) -> bool) -> Option<Flit> {
        for k in 0..3 {
            let c = (self.rr + k) % 3;
            let Some(&flit) = self.outbox[c].front() else {
                continue;
            };
            if !can_inject(flit.vc) {
                continue;
            }
            self.outbox[c].pop_front();
            self.rr = (c + 1) % 3;
            self.stats.flits_injected += 1;
            if c == class_index(Class::Msg) && self.outbox[c].is_empty() {
                self.msg_in_flight = false;
            }
            return Some(flit);
        }
        None
    }

    /// Accept one ejected flit; completed packets are delivered.
    pub fn receive_flit(&mut self, flit: Flit, mem: &mut Memory) {
        if let Some(pkt) = self.assemblers[flit.vc as usize].push(flit) {
            self.deliver(pkt, mem);
        }
    }

    pub fn deliver(&mut self, pkt: Packet, mem: &mut Memory) {
        debug_assert_eq!(pkt.dst, self.tile, "packet delivered to the wrong tile");
        match pkt.class {
            Class::Msg => self.deliver_msg(pkt),
            Class::Req => self.serve_request(pkt, mem),
            Class::Resp => self.accept_response(pkt, mem),
        }
    }

    fn deliver_msg(&mut self, pkt: Packet) {
        let hdr = MsgHeader::decode(pkt.body[0]);
        let port = hdr.dst_port as usize;
        let event = |kind| NaEvent {
            kind,
            a: hdr.dst_port as u16,
            b: pkt.src as u16,
        };
        if port >= PORTS {
            self.na_error |= regs::NA_ERR_UNKNOWN_PORT;
            self.stats.messages_dropped += 1;
            self.events.push(event(NaEventKind::UnknownPort));
            return;
        }
        if self.recv[port].len() >= RECV_QUEUE_DEPTH {
            self.na_error |= regs::NA_ERR_OVERFLOW;
            self.stats.messages_dropped += 1;
            self.events.push(event(NaEventKind::RecvOverflow));
            return;
        }
        debug_assert_eq!(hdr.len as usize, pkt.body.len() - 1);
        let mut words = Vec::with_capacity(pkt.body.len());
        words.push(
            (pkt.src as u32) << 24
                | (hdr.src_port as u32) << 16
                | (hdr.dst_port as u32) << 8
                | hdr.len as u32,
        );
        words.extend_from_slice(&pkt.body[1..]);
        self.recv[port].push_back(RecvMsg { words });
        self.stats.messages_received += 1;
    }

    fn serve_request(&mut self, pkt: Packet, mem: &mut Memory) {
        let Some(mut hdr) = XferHeader::decode(pkt.body[0]) else {
            debug_assert!(false, "malformed request header");
            return;
        };
        let addr = pkt.body.get(1).copied().unwrap_or(u32::MAX);
        let n = hdr.len as u32;
        self.stats.requests_served += 1;
        let mut reply = Vec::new();
        match hdr.op {
            Op::DmaRead | Op::LsuRead => {
                if mem.contains_range(addr, n) {
                    reply.push(hdr.encode());
                    reply.extend_from_slice(mem.slice(addr, n as usize));
                } else {
                    hdr.error = true;
                    reply.push(hdr.encode());
                }
            }
            Op::DmaWrite | Op::LsuWrite => {
                let data = &pkt.body[2..];
                if data.len() as u32 == n && mem.contains_range(addr, n) {
                    mem.write_slice(addr, data);
                } else {
                    hdr.error = true;
                }
                reply.push(hdr.encode());
            }
        }
        self.enqueue(Class::Resp, pkt.src, reply);
    }

    fn accept_response(&mut self, pkt: Packet, mem: &mut Memory) {
        let Some(hdr) = XferHeader::decode(pkt.body[0]) else {
            debug_assert!(false, "malformed response header");
            return;
        };
        match hdr.op {
            Op::LsuRead | Op::LsuWrite => {
                let Some(p) = self.lsu.as_mut() else {
                    debug_assert!(false, "response without a pending access");
                    return;
                };
                p.state = LsuState::Done(if hdr.error {
                    None
                } else {
                    Some(pkt.body.get(1).copied().unwrap_or(0))
                });
            }
            Op::DmaRead | Op::DmaWrite => {
                let id = hdr.tag;
                let Some(txn) = self.txns[id as usize].as_mut() else {
                    debug_assert!(false, "response for an idle DMA slot");
                    return;
                };
                if hdr.error {
                    txn.failed = true;
                } else if txn.dir == DmaDir::ReadRemote {
                    let at = txn.local + 4 * DMA_SEGMENT_WORDS * hdr.segment as u32;
                    mem.write_slice(at, &pkt.body[1..]);
                }
                txn.segments_done += 1;
                if txn.segments_done == txn.segments {
                    let txn = self.txns[id as usize].take().unwrap();
                    self.complete_dma(id, txn.len, txn.failed);
                }
            }
        }
    }

    /// A data access through the LSU of a partitioned-memory tile. Remote
    /// accesses stall until the response is back.
    fn lsu_access(&mut self, mem: &mut Memory, addr: u32, write: Option<u32>) -> BusResult {
        let TileOrg::Pgas { partition_bytes } = self.org else {
            unreachable!("LSU used on a distributed-memory tile");
        };
        if !addr.is_multiple_of(4) {
            return BusResult::Fault;
        }
        match lsu_translate(addr, self.tile, partition_bytes, self.num_tiles) {
            Translation::Fault => BusResult::Fault,
            Translation::Local(off) => match write {
                Some(v) => mem.store(off, v),
                None => mem.load(off),
            },
            Translation::Remote { tile, offset } => match self.lsu {
                Some(p) if p.addr == addr && p.write == write => match p.state {
                    LsuState::Waiting => BusResult::Stall,
                    LsuState::Done(v) => {
                        self.lsu = None;
                        v.map_or(BusResult::Fault, BusResult::Ok)
                    }
                },
                Some(_) => BusResult::Stall,
                None => {
                    let body = match write {
                        None => vec![XferHeader::new(Op::LsuRead, 0, 0, 1).encode(), offset],
                        Some(v) => vec![XferHeader::new(Op::LsuWrite, 0, 0, 1).encode(), offset, v],
                    };
                    self.enqueue(Class::Req, tile, body);
                    self.lsu = Some(LsuPending {
                        addr,
                        write,
                        state: LsuState::Waiting,
                    });
                    BusResult::Stall
                }
            },
        }
    }

    pub fn mmio_read(&mut self, offset: u32) -> BusResult {
        use regs::*;
        let v = match offset {
            SEND_DEST_TILE => self.send.dest_tile,
            SEND_DEST_PORT => self.send.dest_port,
            SEND_SRC_PORT => self.send.src_port,
            SEND_LEN => self.send.len,
            SEND_ADDR => self.send.addr,
            SEND_GO => self.send.errors | if self.msg_in_flight { STATUS_BUSY } else { 0 },
            o if (RECV_STATUS..RECV_STATUS + 4 * PORTS as u32).contains(&o) && o % 4 == 0 => {
                self.recv[((o - RECV_STATUS) / 4) as usize].len() as u32
            }
            o if (RECV_WORD..RECV_WORD + 4 * PORTS as u32).contains(&o) && o % 4 == 0 => {
                let p = ((o - RECV_WORD) / 4) as usize;
                let Some(msg) = self.recv[p].front() else {
                    return BusResult::Stall;
                };
                let word = msg.words[self.cursor[p]];
                self.cursor[p] += 1;
                if self.cursor[p] == msg.words.len() {
                    self.recv[p].pop_front();
                    self.cursor[p] = 0;
                }
                word
            }
            DMA_LOCAL_ADDR => self.dma.local,
            DMA_REMOTE_TILE => self.dma.remote_tile,
            DMA_REMOTE_ADDR => self.dma.remote_addr,
            DMA_LEN => self.dma.len,
            DMA_START => self.dma.last_start,
            DMA_DONE => self.dma.done,
            DMA_ERROR => self.dma.error,
            TILE_ID => self.tile as u32,
            NA_ERROR => self.na_error,
            TILE_COUNT => self.num_tiles as u32,
            _ => return BusResult::Fault,
        };
        BusResult::Ok(v)
    }

    pub fn mmio_write(&mut self, offset: u32, value: u32, mem: &Memory) -> BusResult {
        use regs::*;
        match offset {
            SEND_DEST_TILE => self.send.dest_tile = value,
            SEND_DEST_PORT => self.send.dest_port = value,
            SEND_SRC_PORT => self.send.src_port = value,
            SEND_LEN => self.send.len = value,
            SEND_ADDR => self.send.addr = value,
            SEND_GO => {
                let s = self.send.clone();
                self.send.errors =
                    match self.send(mem, s.src_port, s.dest_tile, s.dest_port, s.addr, s.len) {
                        Ok(()) => 0,
                        Err(e) => e.status_bit(),
                    };
            }
            DMA_LOCAL_ADDR => self.dma.local = value,
            DMA_REMOTE_TILE => self.dma.remote_tile = value,
            DMA_REMOTE_ADDR => self.dma.remote_addr = value,
            DMA_LEN => self.dma.len = value,
            DMA_START => {
                let d = self.dma.clone();
                let dir = match value {
                    0 => Some(DmaDir::ReadRemote),
                    1 => Some(DmaDir::WriteRemote),
                    _ => None,
                };
                let result = dir.ok_or(DmaError::RangeError).and_then(|dir| {
                    self.dma_start(
                        mem,
                        dir,
                        d.local,
                        d.remote_tile as usize,
                        d.remote_addr,
                        d.len,
                    )
                });
                match result {
                    Ok(id) => self.dma.last_start = id as u32,
                    Err(e) => {
                        self.dma.last_start = u32::MAX;
                        self.dma.error |= match e {
                            DmaError::NoFreeSlot => DMA_ERR_NO_SLOT,
                            DmaError::RangeError => DMA_ERR_RANGE,
                        };
                    }
                }
            }
            DMA_DONE => self.dma.done &= !value,
            DMA_ERROR => self.dma.error &= !value,
            NA_ERROR => self.na_error &= !value,
            _ => return BusResult::Fault,
        }
        BusResult::Ok(0)
    }
}

/// The bus a tile's core sees: local memory, the adapter registers and,
/// on partitioned tiles, remote memory through the LSU.
pub struct TileBus<'a> {
    pub mem: &'a mut Memory,
    pub na: &'a mut NetworkAdapter,
}

impl Bus for TileBus<'_> {
    fn fetch(&mut self, addr: u32) -> BusResult {
        self.mem.fetch(addr)
    }

    fn load(&mut self, addr: u32) -> BusResult {
        if is_mmio(addr) {
            return self.na.mmio_read(addr - MMIO_BASE);
        }
        match self.na.org {
            TileOrg::Distributed => self.mem.load(addr),
            TileOrg::Pgas { .. } => self.na.lsu_access(self.mem, addr, None),
        }
    }

    fn store(&mut self, addr: u32, value: u32) -> BusResult {
        if is_mmio(addr) {
            return self.na.mmio_write(addr - MMIO_BASE, value, self.mem);
        }
        match self.na.org {
            TileOrg::Distributed => self.mem.store(addr, value),
            TileOrg::Pgas { .. } => self.na.lsu_access(self.mem, addr, Some(value)),
        }
    }
}
