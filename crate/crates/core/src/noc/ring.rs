// SPDX-License-Identifier: Apache-2.0

//! Unidirectional 16-bit ring used as the debug interconnect.
//!
//! Node `i` owns one input FIFO per virtual channel, fed by node `i - 1`.
//! A node's output link carries one flit per cycle. VC 1 (control traffic)
//! has strict priority over VC 0 (trace traffic) on every link. Within a VC
//! a packet holds the link from its first flit to its `last` flit, so flits
//! of different packets never interleave on one VC.
//!
//! The first flit of every packet is `dest << 8 | src`. A packet is consumed
//! at its destination node. Broadcast packets (dest [`BROADCAST`]) are
//! delivered at every node they pass and consumed when they return to their
//! source. A packet addressed to its own source travels the full loop.

use std::collections::VecDeque;

use super::NocError;

pub const BROADCAST: u8 = 0xff;
pub const RING_VCS: usize = 2;
pub const TRACE_VC: u8 = 0;
pub const CONTROL_VC: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RingFlit {
    pub data: u16,
    pub last: bool,
    pub vc: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RingDelivery {
    pub node: usize,
    pub flit: RingFlit,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RingTick {
    pub deliveries: Vec<RingDelivery>,
    /// `accepted[i]` is true when node `i`'s injection entered the ring.
    pub accepted: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Holder {
    Through,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Route {
    dest: u8,
    src: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct NodeVc {
    fifo: VecDeque<RingFlit>,
    /// Route of the packet whose flits are at the FIFO head.
    head_route: Option<Route>,
    /// Who holds this node's output link on this vc.
    holder: Option<Holder>,
    /// Next packet-boundary winner when both sides want the link.
    prefer_local: bool,
    /// Whether the next locally injected flit starts a packet.
    local_at_start: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingNetwork {
    depth: usize,
    nodes: Vec<[NodeVc; RING_VCS]>,
    hops: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fate {
    /// Consumed at this node.
    Sink,
    /// Consumed here and forwarded (broadcast copy).
    DeliverAndForward,
    Forward,
    /// Broadcast back at its source.
    Drop,
}

impl RingNetwork {
    pub fn new(nodes: usize, depth: usize) -> Self {
        assert!(
            nodes >= 1 && nodes <= BROADCAST as usize,
            "ring size out of range"
        );
        let vc = || NodeVc {
            fifo: VecDeque::with_capacity(depth),
            head_route: None,
            holder: None,
            prefer_local: false,
            local_at_start: true,
        };
        RingNetwork {
            depth,
            nodes: (0..nodes).map(|_| [vc(), vc()]).collect(),
            hops: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.iter().flatten().all(|v| v.fifo.is_empty())
    }

    pub fn occupancy(&self, node: usize, vc: u8) -> usize {
        self.nodes[node][vc as usize].fifo.len()
    }

    /// Total link traversals since construction.
    pub fn hops(&self) -> u64 {
        self.hops
    }

    fn next(&self, node: usize) -> usize {
        (node + 1) % self.nodes.len()
    }

    /// Whether node `node` could start or continue a local injection on `vc`
    /// this cycle, judged on the current state (through traffic may still
    /// win arbitration).
    pub fn can_inject(&self, node: usize, vc: u8) -> bool {
        let down = self.next(node);
        let nv = &self.nodes[node][vc as usize];
        self.nodes[down][vc as usize].fifo.len() < self.depth && nv.holder != Some(Holder::Through)
    }

    fn fate(node: usize, route: Route) -> Fate {
        let node = node as u8;
        if route.dest == BROADCAST {
            if route.src == node {
                Fate::Drop
            } else {
                Fate::DeliverAndForward
            }
        } else if route.dest == node {
            Fate::Sink
        } else {
            Fate::Forward
        }
    }

    /// Advance one cycle. Injections are flits leaving node `i` toward
    /// `i + 1`; an injection not accepted must be offered again.
    pub fn tick(&mut self, injections: &[Option<RingFlit>]) -> Result<RingTick, NocError> {
        let n = self.nodes.len();
        assert_eq!(injections.len(), n, "one injection slot per node");

        // Resolve the route of each FIFO head that starts a packet.
        for node in self.nodes.iter_mut() {
            for vc in node.iter_mut() {
                if vc.head_route.is_none() {
                    if let Some(f) = vc.fifo.front() {
                        vc.head_route = Some(Route {
                            dest: (f.data >> 8) as u8,
                            src: (f.data & 0xff) as u8,
                        });
                    }
                }
            }
        }

        let mut result = RingTick {
            deliveries: Vec::new(),
            accepted: vec![false; n],
        };
        // Per node: which vc's head is popped this cycle, and what crosses
        // the output link.
        let mut pops: Vec<[bool; RING_VCS]> = vec![[false; RING_VCS]; n];
        let mut link: Vec<Option<RingFlit>> = vec![None; n];

        for i in 0..n {
            let down = self.next(i);
            // Heads that sink here need no link.
            for v in 0..RING_VCS {
                let nv = &self.nodes[i][v];
                if let (Some(f), Some(route)) = (nv.fifo.front(), nv.head_route) {
                    match Self::fate(i, route) {
                        Fate::Sink => {
                            pops[i][v] = true;
                            result.deliveries.push(RingDelivery { node: i, flit: *f });
                        }
                        Fate::Drop => pops[i][v] = true,
                        _ => {}
                    }
                }
            }

            for v in [CONTROL_VC as usize, TRACE_VC as usize] {
                let space = self.nodes[down][v].fifo.len() < self.depth;
                if !space {
                    continue;
                }
                let nv = &self.nodes[i][v];
                let through = match (nv.fifo.front(), nv.head_route) {
                    (Some(f), Some(route)) if !pops[i][v] => match Self::fate(i, route) {
                        Fate::Forward | Fate::DeliverAndForward => Some(*f),
                        _ => None,
                    },
                    _ => None,
                };
                let local = injections[i].filter(|f| f.vc as usize == v);
                let pick = match nv.holder {
                    Some(Holder::Through) => through.map(|_| Holder::Through),
                    Some(Holder::Local) => local.map(|_| Holder::Local),
                    None => match (through, local) {
                        (Some(_), Some(_)) if nv.prefer_local => Some(Holder::Local),
                        (Some(_), _) => Some(Holder::Through),
                        (None, Some(_)) if nv.local_at_start => Some(Holder::Local),
                        _ => None,
                    },
                };
                let Some(pick) = pick else { continue };
                let flit = match pick {
                    Holder::Through => {
                        let f = through.unwrap();
                        pops[i][v] = true;
                        let route = nv.head_route.unwrap();
                        if Self::fate(i, route) == Fate::DeliverAndForward {
                            result.deliveries.push(RingDelivery { node: i, flit: f });
                        }
                        f
                    }
                    Holder::Local => {
                        result.accepted[i] = true;
                        local.unwrap()
                    }
                };
                let nv = &mut self.nodes[i][v];
                if nv.holder.is_none() {
                    // Packet boundary: alternate between the two sides.
                    nv.prefer_local = pick == Holder::Through;
                }
                nv.holder = if flit.last { None } else { Some(pick) };
                if pick == Holder::Local {
                    nv.local_at_start = flit.last;
                }
                link[i] = Some(flit);
                break;
            }
        }

        for (i, popped) in pops.iter().enumerate() {
            for v in 0..RING_VCS {
                if popped[v] {
                    let nv = &mut self.nodes[i][v];
                    let f = nv.fifo.pop_front().unwrap();
                    if f.last {
                        nv.head_route = None;
                    }
                }
            }
        }
        for i in 0..n {
            if let Some(f) = link[i] {
                let down = self.next(i);
                let fifo = &mut self.nodes[down][f.vc as usize].fifo;
                if fifo.len() >= self.depth {
                    return Err(NocError::RingNoSpace { node: i, vc: f.vc });
                }
                fifo.push_back(f);
                self.hops += 1;
            }
        }
        Ok(result)
    }
}

/// Split a 16-bit packet into ring flits on `vc`.
pub fn ring_flits(words: &[u16], vc: u8) -> Vec<RingFlit> {
    let last = words.len().saturating_sub(1);
    words
        .iter()
        .enumerate()
        .map(|(i, &data)| RingFlit {
            data,
            last: i == last,
            vc,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Offer a packet at `src` until it is fully injected; return the tick
    /// index (relative to the first injection) at which each delivery at
    /// `watch` happened.
    fn run(
        ring: &mut RingNetwork,
        src: usize,
        words: &[u16],
        vc: u8,
        ticks: usize,
    ) -> Vec<(usize, RingDelivery)> {
        let mut pending: VecDeque<RingFlit> = ring_flits(words, vc).into();
        let mut out = Vec::new();
        for t in 0..ticks {
            let mut inj = vec![None; ring.len()];
            inj[src] = pending.front().copied();
            let r = ring.tick(&inj).unwrap();
            if r.accepted[src] {
                pending.pop_front();
            }
            out.extend(r.deliveries.into_iter().map(|d| (t, d)));
        }
        out
    }

    #[test]
    fn nine_node_ring_six_hops() {
        let mut ring = RingNetwork::new(9, 4);
        let out = run(&mut ring, 3, &[0x0003], TRACE_VC, 20);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, 6);
        assert_eq!(out[0].1.node, 0);
        assert_eq!(ring.hops(), 6);
    }

    #[test]
    fn self_addressed_takes_full_loop() {
        let mut ring = RingNetwork::new(9, 4);
        let out = run(&mut ring, 4, &[0x0404], TRACE_VC, 20);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, 9);
        assert_eq!(out[0].1.node, 4);
    }

    #[test]
    fn broadcast_reaches_everyone_once() {
        let mut ring = RingNetwork::new(5, 4);
        let out = run(&mut ring, 2, &[0xff02, 7], CONTROL_VC, 20);
        let mut nodes: Vec<usize> = out
            .iter()
            .filter(|(_, d)| d.flit.last)
            .map(|(_, d)| d.node)
            .collect();
        nodes.sort();
        assert_eq!(nodes, vec![0, 1, 3, 4]);
        assert!(ring.is_empty());
    }

    #[test]
    fn backpressure_never_loses_flits() {
        // Two nodes stream long packets to node 0 through shared links.
        let mut ring = RingNetwork::new(4, 4);
        let mut queues: Vec<VecDeque<RingFlit>> = vec![VecDeque::new(); 4];
        for src in [1usize, 2, 3] {
            for k in 0..20u16 {
                let words = [src as u16, k, k + 1, k + 2, k + 3];
                queues[src].extend(ring_flits(&words, TRACE_VC));
            }
        }
        let mut got: Vec<Vec<u16>> = vec![Vec::new(); 4];
        let mut cur: Vec<u16> = Vec::new();
        for _ in 0..2000 {
            let inj: Vec<_> = queues.iter().map(|q| q.front().copied()).collect();
            let r = ring.tick(&inj).unwrap();
            for (i, ok) in r.accepted.iter().enumerate() {
                if *ok {
                    queues[i].pop_front();
                }
            }
            for d in r.deliveries {
                assert_eq!(d.node, 0);
                cur.push(d.flit.data);
                if d.flit.last {
                    let src = (cur[0] & 0xff) as usize;
                    got[src].extend_from_slice(&cur[1..2]);
                    cur.clear();
                }
            }
        }
        for src in [1usize, 2, 3] {
            assert_eq!(got[src], (0..20).collect::<Vec<u16>>(), "src {src}");
        }
        assert!(ring.is_empty());
    }

    #[test]
    fn control_vc_overtakes_trace_traffic() {
        let mut ring = RingNetwork::new(3, 4);
        // Saturate node 1 -> node 0 with trace flits, then send control.
        let mut trace: VecDeque<RingFlit> = (0..40)
            .flat_map(|k| ring_flits(&[0x0001, k], TRACE_VC))
            .collect();
        for _ in 0..10 {
            let mut inj = vec![None; 3];
            inj[1] = trace.front().copied();
            if ring.tick(&inj).unwrap().accepted[1] {
                trace.pop_front();
            }
        }
        let mut ctrl: VecDeque<RingFlit> = ring_flits(&[0x0002, 0xabcd], CONTROL_VC).into();
        let mut arrival = None;
        for t in 0..20 {
            let mut inj = vec![None; 3];
            inj[1] = trace.front().copied();
            inj[2] = ctrl.front().copied();
            let r = ring.tick(&inj).unwrap();
            if r.accepted[1] {
                trace.pop_front();
            }
            if r.accepted[2] {
                ctrl.pop_front();
            }
            if r.deliveries
                .iter()
                .any(|d| d.flit.vc == CONTROL_VC && d.flit.last)
            {
                arrival = Some(t);
                break;
            }
        }
        // Two flits, one hop: head in at t=0, tail in at t=1, tail consumed at t=2.
        assert_eq!(arrival, Some(2));
    }
}
