// SPDX-License-Identifier: Apache-2.0

//! A five-port wormhole router with per-VC input FIFOs.

use std::collections::VecDeque;

use super::{route_xy, Coord, Flit, FlitKind, NocError, Port};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouterConfig {
    pub vcs: usize,
    pub depth: usize,
}

impl Default for RouterConfig {
    fn default() -> Self {
        RouterConfig { vcs: 3, depth: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct InputVc {
    fifo: VecDeque<Flit>,
    /// Output port of the packet currently at the head, fixed from its
    /// header until the tail leaves.
    route: Option<Port>,
}

/// Result of one router cycle.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RouterTick {
    /// At most one flit per output port.
    pub departures: [Option<Flit>; Port::COUNT],
    /// Input (port, vc) slots freed this cycle; each is one credit owed to
    /// the upstream sender.
    pub credits_granted: Vec<(Port, u8)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Router {
    coord: Coord,
    width: usize,
    height: usize,
    cfg: RouterConfig,
    inputs: Vec<Vec<InputVc>>,
    credits: Vec<Vec<usize>>,
    owner: Vec<Vec<Option<Port>>>,
    rr: [usize; Port::COUNT],
}

impl Router {
    pub fn new(coord: Coord, width: usize, height: usize, cfg: RouterConfig) -> Self {
        let inputs = (0..Port::COUNT)
            .map(|_| {
                (0..cfg.vcs)
                    .map(|_| InputVc {
                        fifo: VecDeque::with_capacity(cfg.depth),
                        route: None,
                    })
                    .collect()
            })
            .collect();
        let credits = Port::ALL
            .iter()
            .map(|&p| {
                let linked = p != Port::Local && coord.neighbor(p, width, height).is_some();
                vec![if linked { cfg.depth } else { 0 }; cfg.vcs]
            })
            .collect();
        Router {
            coord,
            width,
            height,
            cfg,
            inputs,
            credits,
            owner: vec![vec![None; cfg.vcs]; Port::COUNT],
            rr: [0; Port::COUNT],
        }
    }

    pub fn coord(&self) -> Coord {
        self.coord
    }

    pub fn config(&self) -> RouterConfig {
        self.cfg
    }

    pub fn occupancy(&self, port: Port, vc: usize) -> usize {
        self.inputs[port.index()][vc].fifo.len()
    }

    pub fn buffered_flits(&self) -> usize {
        self.inputs.iter().flatten().map(|ivc| ivc.fifo.len()).sum()
    }

    /// Credits held for output `port`, `vc`. Meaningless for `Local`, which
    /// always sinks.
    pub fn credits(&self, port: Port, vc: usize) -> usize {
        self.credits[port.index()][vc]
    }

    pub fn owner(&self, port: Port, vc: usize) -> Option<Port> {
        self.owner[port.index()][vc]
    }

    pub fn is_idle(&self) -> bool {
        self.buffered_flits() == 0 && self.owner.iter().flatten().all(Option::is_none)
    }

    /// Advance one cycle.
    ///
    /// Credit returns are applied first, then switch allocation runs on the
    /// buffered flits, then this cycle's arrivals are written into the input
    /// FIFOs (they become eligible next cycle).
    pub fn tick(
        &mut self,
        arrivals: &[Option<Flit>; Port::COUNT],
        credit_returns: &[(Port, u8)],
    ) -> Result<RouterTick, NocError> {
        for &(port, vc) in credit_returns {
            let c = &mut self.credits[port.index()][vc as usize];
            *c += 1;
            debug_assert!(*c <= self.cfg.depth, "credit above buffer depth");
        }

        self.compute_routes();

        let mut out = RouterTick::default();
        let vcs = self.cfg.vcs;
        let candidates = Port::COUNT * vcs;
        for out_port in Port::ALL {
            let o = out_port.index();
            let winner = (0..candidates)
                .map(|k| (self.rr[o] + k) % candidates)
                .find(|&idx| self.eligible(idx / vcs, idx % vcs, out_port));
            let Some(idx) = winner else { continue };
            let (p, v) = (idx / vcs, idx % vcs);
            self.rr[o] = (idx + 1) % candidates;

            let ivc = &mut self.inputs[p][v];
            let flit = ivc.fifo.pop_front().expect("eligible input is non-empty");
            match flit.kind {
                FlitKind::Header => self.owner[o][v] = Some(Port::from_index(p)),
                FlitKind::Tail => {
                    self.owner[o][v] = None;
                    ivc.route = None;
                }
                FlitKind::Single => ivc.route = None,
                FlitKind::Payload => {}
            }
            if out_port != Port::Local {
                self.credits[o][v] -= 1;
            }
            out.departures[o] = Some(flit);
            out.credits_granted.push((Port::from_index(p), v as u8));
        }

        for (p, arrival) in arrivals.iter().enumerate() {
            if let Some(flit) = arrival {
                let ivc = &mut self.inputs[p][flit.vc as usize];
                if ivc.fifo.len() >= self.cfg.depth {
                    return Err(NocError::BufferOverflow {
                        x: self.coord.x,
                        y: self.coord.y,
                        port: Port::from_index(p),
                        vc: flit.vc,
                    });
                }
                ivc.fifo.push_back(*flit);
            }
        }
        Ok(out)
    }

    fn compute_routes(&mut self) {
        let (coord, width) = (self.coord, self.width);
        for ivc in self.inputs.iter_mut().flatten() {
            if ivc.route.is_some() {
                continue;
            }
            if let Some(head) = ivc.fifo.front() {
                debug_assert!(head.kind.is_head(), "body flit without a route");
                let dst = (head.payload >> 24) as usize;
                debug_assert!(dst < self.width * self.height, "destination off mesh");
                ivc.route = Some(route_xy(coord, Coord::of_tile(dst, width)));
            }
        }
    }

    fn eligible(&self, p: usize, v: usize, out_port: Port) -> bool {
        let ivc = &self.inputs[p][v];
        let Some(head) = ivc.fifo.front() else {
            return false;
        };
        if ivc.route != Some(out_port) {
            return false;
        }
        let o = out_port.index();
        if out_port != Port::Local && self.credits[o][v] == 0 {
            return false;
        }
        match self.owner[o][v] {
            Some(owner) => owner.index() == p,
            None => head.kind.is_head(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noc::{packetize, Class};

    fn arrivals_at(port: Port, flit: Flit) -> [Option<Flit>; 5] {
        let mut a = [None; 5];
        a[port.index()] = Some(flit);
        a
    }

    #[test]
    fn uncontended_header_departs_next_cycle() {
        // 2x2 mesh, router (0,0), packet to tile 3 = (1,1): XY says East.
        let mut r = Router::new(Coord::new(0, 0), 2, 2, RouterConfig::default());
        let flits = packetize(Class::Msg, 0, 3, &[7], 32).unwrap();
        let t0 = r.tick(&arrivals_at(Port::Local, flits[0]), &[]).unwrap();
        assert!(t0.departures.iter().all(Option::is_none));
        let t1 = r.tick(&arrivals_at(Port::Local, flits[1]), &[]).unwrap();
        assert_eq!(t1.departures[Port::East.index()], Some(flits[0]));
        assert_eq!(t1.credits_granted, vec![(Port::Local, 0)]);
        assert_eq!(r.credits(Port::East, 0), 3);
        assert_eq!(r.owner(Port::East, 0), Some(Port::Local));
        let t2 = r.tick(&[None; 5], &[]).unwrap();
        assert_eq!(t2.departures[Port::East.index()], Some(flits[1]));
        assert_eq!(r.owner(Port::East, 0), None);
    }

    #[test]
    fn contending_headers_alternate() {
        // Router (1,0) in a 3x1 mesh; two packets from West and East both
        // eject locally on vc 0. Exactly one wins, the other follows.
        let mut r = Router::new(Coord::new(1, 0), 3, 1, RouterConfig::default());
        let a = packetize(Class::Msg, 0, 1, &[1, 2], 32).unwrap();
        let b = packetize(Class::Msg, 2, 1, &[3, 4], 32).unwrap();
        let mut arr = [None; 5];
        arr[Port::West.index()] = Some(a[0]);
        arr[Port::East.index()] = Some(b[0]);
        r.tick(&arr, &[]).unwrap();
        let mut arr = [None; 5];
        arr[Port::West.index()] = Some(a[1]);
        arr[Port::East.index()] = Some(b[1]);
        let t = r.tick(&arr, &[]).unwrap();
        // Pointers start at port 0, so East is scanned before West.
        assert_eq!(t.departures[Port::Local.index()], Some(b[0]));
        let mut arr = [None; 5];
        arr[Port::West.index()] = Some(a[2]);
        arr[Port::East.index()] = Some(b[2]);
        let mut out = vec![t.departures[Port::Local.index()].unwrap()];
        out.push(r.tick(&arr, &[]).unwrap().departures[4].unwrap());
        for _ in 0..6 {
            if let Some(f) = r.tick(&[None; 5], &[]).unwrap().departures[4] {
                out.push(f);
            }
        }
        let expect: Vec<Flit> = b.iter().chain(a.iter()).copied().collect();
        assert_eq!(out, expect);
    }

    #[test]
    fn no_credit_blocks_departure() {
        let cfg = RouterConfig { vcs: 3, depth: 1 };
        let mut r = Router::new(Coord::new(0, 0), 2, 1, cfg);
        let p1 = packetize(Class::Msg, 0, 1, &[], 32).unwrap()[0];
        r.tick(&arrivals_at(Port::Local, p1), &[]).unwrap();
        let t = r.tick(&arrivals_at(Port::Local, p1), &[]).unwrap();
        assert!(t.departures[Port::East.index()].is_some());
        // Credit is now 0, so the second single flit must wait.
        let t = r.tick(&[None; 5], &[]).unwrap();
        assert!(t.departures[Port::East.index()].is_none());
        let t = r.tick(&[None; 5], &[(Port::East, 0)]).unwrap();
        assert!(t.departures[Port::East.index()].is_some());
    }

    #[test]
    fn overflow_is_reported() {
        let cfg = RouterConfig { vcs: 3, depth: 1 };
        let mut r = Router::new(Coord::new(0, 0), 2, 1, cfg);
        let f = packetize(Class::Msg, 0, 1, &[1], 32).unwrap();
        r.tick(&arrivals_at(Port::Local, f[0]), &[]).unwrap();
        // Header leaves East and uses the only credit; the tail is stuck.
        r.tick(&arrivals_at(Port::Local, f[1]), &[]).unwrap();
        let err = r.tick(&arrivals_at(Port::Local, f[0]), &[]).unwrap_err();
        assert_eq!(
            err,
            NocError::BufferOverflow {
                x: 0,
                y: 0,
                port: Port::Local,
                vc: 0
            }
        );
    }
}
