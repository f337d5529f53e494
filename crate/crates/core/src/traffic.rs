// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic traffic for the data NoC, with an end-to-end checker.
//!
//! Every tile generates packets of a uniformly random class to a uniformly
//! random destination. Each delivered REQ makes its destination send a
//! RESP back, so request/response dependencies cross the network as they
//! would with remote loads. The first body word is a per (src, dst, class)
//! sequence number; the checker compares every ejected packet against the
//! next expected packet of its stream, which covers delivery, payload
//! integrity and ordering at once.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, VecDeque};
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::noc::{Class, Flit, MeshNetwork, Packet, PacketAssembler, RouterConfig, MAX_BODY_WORDS};

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficConfig {
    pub width: usize,
    pub height: usize,
    pub router: RouterConfig,
    /// Packets generated in total, not counting RESP replies.
    pub packets: usize,
    /// Probability per tile and cycle of generating a packet.
    pub injection_rate: f64,
    /// Longest body in words, including the sequence word.
    pub max_body_words: usize,
    /// Packets a tile may have waiting before it stops generating.
    pub source_queue_limit: usize,
    pub seed: u64,
    /// Give up and report a stall after this many cycles without ejection.
    pub stall_limit: u64,
    /// Check the mesh's flit and credit conservation invariants after
    /// every cycle. On by default in debug builds.
    pub check_invariants: bool,
}

impl TrafficConfig {
    pub fn uniform(width: usize, height: usize, packets: usize, seed: u64) -> Self {
        TrafficConfig {
            width,
            height,
            router: RouterConfig::default(),
            packets,
            injection_rate: 0.1,
            max_body_words: MAX_BODY_WORDS,
            source_queue_limit: 8,
            seed,
            stall_limit: 10_000,
            check_invariants: cfg!(debug_assertions),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TrafficReport {
    pub generated: u64,
    pub replies: u64,
    pub delivered: u64,
    pub flits_injected: u64,
    pub flits_ejected: u64,
    pub cycles: u64,
    /// Cycles after which the invariants were checked.
    pub invariant_checks: u64,
    /// Hash of the full ejection log (cycle, tile, flit).
    pub digest: u64,
    pub errors: Vec<String>,
}

impl TrafficReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty() && self.delivered == self.generated + self.replies
    }
}

type Stream = (usize, usize, Class);

struct Source {
    /// Flits of queued packets, one queue per class.
    queues: [VecDeque<Flit>; 3],
    packets_waiting: usize,
    rr: usize,
}

struct Harness {
    rng: ChaCha8Rng,
    net: MeshNetwork,
    sources: Vec<Source>,
    assemblers: Vec<[PacketAssembler; 3]>,
    next_seq: HashMap<Stream, u32>,
    expected: HashMap<Stream, VecDeque<Vec<u32>>>,
    report: TrafficReport,
    hasher: DefaultHasher,
}

impl Harness {
    fn enqueue(&mut self, pkt: Packet) {
        let key = (pkt.src, pkt.dst, pkt.class);
        let flits = pkt.to_flits().expect("generated packets are valid");
        self.expected.entry(key).or_default().push_back(pkt.body);
        let src = &mut self.sources[pkt.src];
        src.queues[pkt.class.vc() as usize].extend(flits);
        src.packets_waiting += 1;
    }

    fn make_packet(&mut self, class: Class, src: usize, dst: usize, max_body: usize) -> Packet {
        let seq = self.next_seq.entry((src, dst, class)).or_insert(0);
        let mut body = vec![*seq];
        *seq += 1;
        let extra = self.rng.random_range(0..max_body);
        body.extend((0..extra).map(|_| self.rng.random::<u32>()));
        Packet::new(class, src, dst, body)
    }

    fn check(&mut self, tile: usize, pkt: Packet) {
        if pkt.dst != tile {
            self.report.errors.push(format!(
                "packet for tile {} ejected at tile {tile}",
                pkt.dst
            ));
        }
        let key = (pkt.src, pkt.dst, pkt.class);
        match self.expected.get_mut(&key).and_then(VecDeque::pop_front) {
            Some(body) if body == pkt.body => {}
            Some(body) => self.report.errors.push(format!(
                "stream {key:?}: expected seq {} got seq {:?} (payload or order mismatch)",
                body[0],
                pkt.body.first()
            )),
            None => self
                .report
                .errors
                .push(format!("unexpected packet on stream {key:?}")),
        }
        self.report.delivered += 1;
    }

    fn outstanding(&self) -> bool {
        self.expected.values().any(|q| !q.is_empty())
    }
}

/// Drive the mesh with random traffic until every generated packet and
/// reply is delivered, or no flit is ejected for `stall_limit` cycles.
pub fn run_traffic(cfg: &TrafficConfig) -> TrafficReport {
    assert!((1..=MAX_BODY_WORDS).contains(&cfg.max_body_words));
    let n = cfg.width * cfg.height;
    let mut h = Harness {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        net: MeshNetwork::new(cfg.width, cfg.height, cfg.router),
        sources: (0..n)
            .map(|_| Source {
                queues: Default::default(),
                packets_waiting: 0,
                rr: 0,
            })
            .collect(),
        assemblers: (0..n).map(|_| Default::default()).collect(),
        next_seq: HashMap::new(),
        expected: HashMap::new(),
        report: TrafficReport::default(),
        hasher: DefaultHasher::new(),
    };
    let mut last_progress = 0u64;

    loop {
        let cycle = h.net.cycle();
        for src in 0..n {
            if h.report.generated as usize >= cfg.packets
                || h.sources[src].packets_waiting >= cfg.source_queue_limit
                || !h.rng.random_bool(cfg.injection_rate)
            {
                continue;
            }
            let class = Class::ALL[h.rng.random_range(0..3)];
            let dst = h.rng.random_range(0..n);
            let pkt = h.make_packet(class, src, dst, cfg.max_body_words);
            h.enqueue(pkt);
            h.report.generated += 1;
        }

        let mut injections = vec![None; n];
        for (tile, inj) in injections.iter_mut().enumerate() {
            let s = &mut h.sources[tile];
            for k in 0..3 {
                let vc = (s.rr + k) % 3;
                let Some(f) = s.queues[vc].front() else {
                    continue;
                };
                if h.net.can_inject(tile, f.vc) {
                    let f = s.queues[vc].pop_front().unwrap();
                    if f.kind.is_last() {
                        s.packets_waiting -= 1;
                    }
                    s.rr = (vc + 1) % 3;
                    *inj = Some(f);
                    break;
                }
            }
        }

        let ejected = match h.net.tick(&injections) {
            Ok(e) => e,
            Err(e) => {
                h.report.errors.push(format!("cycle {cycle}: {e}"));
                break;
            }
        };
        if cfg.check_invariants {
            h.report.invariant_checks += 1;
            if let Err(e) = h.net.check_invariants() {
                h.report
                    .errors
                    .push(format!("cycle {cycle}: invariant violated: {e}"));
                break;
            }
        }

        for (tile, flit) in ejected.into_iter().enumerate() {
            let Some(f) = flit else { continue };
            last_progress = cycle;
            (cycle, tile, f).hash(&mut h.hasher);
            if let Some(pkt) = h.assemblers[tile][f.vc as usize].push(f) {
                let reply = (pkt.class == Class::Req).then_some((pkt.dst, pkt.src));
                h.check(tile, pkt);
                if let Some((from, to)) = reply {
                    let resp = h.make_packet(Class::Resp, from, to, cfg.max_body_words);
                    h.enqueue(resp);
                    h.report.replies += 1;
                }
            }
        }

        let done =
            h.report.generated as usize >= cfg.packets && !h.outstanding() && h.net.is_idle();
        if done {
            break;
        }
        if cycle - last_progress > cfg.stall_limit {
            h.report.errors.push(format!(
                "no ejection for {} cycles at cycle {cycle}; {} flits in flight",
                cfg.stall_limit,
                h.net.in_flight()
            ));
            break;
        }
    }

    h.report.flits_injected = h.net.injected();
    h.report.flits_ejected = h.net.ejected();
    h.report.cycles = h.net.cycle();
    h.report.digest = h.hasher.finish();
    h.report
}
