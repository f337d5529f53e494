// SPDX-License-Identifier: Apache-2.0

//! Whole-mesh cycle advance.
//!
//! Every cycle all routers tick against the state left by the previous
//! cycle: link registers filled by last cycle's departures become this
//! cycle's arrivals, and credits granted last cycle are returned now. A hop
//! therefore costs two cycles (router, then link).

use super::router::{Router, RouterConfig};
use super::{Coord, Flit, NocError, Port};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshNetwork {
    width: usize,
    height: usize,
    cfg: RouterConfig,
    routers: Vec<Router>,
    /// Flit on the link into router `r`, input port `p` (N/E/S/W).
    links: Vec<[Option<Flit>; 4]>,
    /// Credits travelling back to router `r` for its output (port, vc).
    credit_links: Vec<Vec<(Port, u8)>>,
    /// Injection credits held by the network adapter of each tile, per vc.
    local_credits: Vec<Vec<usize>>,
    /// Flits that left router `r` through each port since reset.
    departures: Vec<[u64; Port::COUNT]>,
    /// Departures of the most recent cycle, per router and port.
    last_departures: Vec<[bool; Port::COUNT]>,
    injected: u64,
    ejected: u64,
    cycle: u64,
}

impl MeshNetwork {
    pub fn new(width: usize, height: usize, cfg: RouterConfig) -> Self {
        assert!(width >= 1 && height >= 1, "empty mesh");
        let n = width * height;
        let routers = (0..n)
            .map(|t| Router::new(Coord::of_tile(t, width), width, height, cfg))
            .collect();
        MeshNetwork {
            width,
            height,
            cfg,
            routers,
            links: vec![[None; 4]; n],
            credit_links: vec![Vec::new(); n],
            local_credits: vec![vec![cfg.depth; cfg.vcs]; n],
            departures: vec![[0; Port::COUNT]; n],
            last_departures: vec![[false; Port::COUNT]; n],
            injected: 0,
            ejected: 0,
            cycle: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn tiles(&self) -> usize {
        self.routers.len()
    }

    pub fn config(&self) -> RouterConfig {
        self.cfg
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn router(&self, tile: usize) -> &Router {
        &self.routers[tile]
    }

    pub fn can_inject(&self, tile: usize, vc: u8) -> bool {
        self.local_credits[tile][vc as usize] > 0
    }

    /// Total flits that left router `tile` through `port`.
    pub fn departures(&self, tile: usize, port: Port) -> u64 {
        self.departures[tile][port.index()]
    }

    /// Ports of router `tile` that forwarded a flit in the last cycle.
    pub fn last_departures(&self, tile: usize) -> [bool; Port::COUNT] {
        self.last_departures[tile]
    }

    pub fn injected(&self) -> u64 {
        self.injected
    }

    pub fn ejected(&self) -> u64 {
        self.ejected
    }

    pub fn in_flight(&self) -> u64 {
        let buffered: usize = self.routers.iter().map(Router::buffered_flits).sum();
        let on_links = self.links.iter().flatten().filter(|f| f.is_some()).count();
        (buffered + on_links) as u64
    }

    pub fn is_idle(&self) -> bool {
        self.in_flight() == 0
    }

    /// Advance the whole fabric one cycle. `injections[t]` enters tile `t`'s
    /// local input port and must be covered by a local credit.
    pub fn tick(&mut self, injections: &[Option<Flit>]) -> Result<Vec<Option<Flit>>, NocError> {
        let n = self.routers.len();
        assert_eq!(injections.len(), n, "one injection slot per tile");
        for (tile, inj) in injections.iter().enumerate() {
            if let Some(flit) = inj {
                let credit = &mut self.local_credits[tile][flit.vc as usize];
                if *credit == 0 {
                    return Err(NocError::NoCredit { tile, vc: flit.vc });
                }
                *credit -= 1;
                self.injected += 1;
            }
        }

        let links = std::mem::replace(&mut self.links, vec![[None; 4]; n]);
        let credit_links = std::mem::replace(&mut self.credit_links, vec![Vec::new(); n]);
        let mut ejections = vec![None; n];

        for r in 0..n {
            let mut arrivals = [None; Port::COUNT];
            arrivals[..4].copy_from_slice(&links[r]);
            arrivals[Port::Local.index()] = injections[r];
            let out = self.routers[r].tick(&arrivals, &credit_links[r])?;

            let coord = self.routers[r].coord();
            let mut fired = [false; Port::COUNT];
            for port in Port::ALL {
                let Some(flit) = out.departures[port.index()] else {
                    continue;
                };
                fired[port.index()] = true;
                self.departures[r][port.index()] += 1;
                if port == Port::Local {
                    ejections[r] = Some(flit);
                    self.ejected += 1;
                } else {
                    let next = coord
                        .neighbor(port, self.width, self.height)
                        .expect("departure toward a missing neighbor")
                        .tile(self.width);
                    self.links[next][port.opposite().index()] = Some(flit);
                }
            }
            self.last_departures[r] = fired;

            for (in_port, vc) in out.credits_granted {
                if in_port == Port::Local {
                    self.local_credits[r][vc as usize] += 1;
                } else {
                    let up = coord
                        .neighbor(in_port, self.width, self.height)
                        .expect("credit toward a missing neighbor")
                        .tile(self.width);
                    self.credit_links[up].push((in_port.opposite(), vc));
                }
            }
        }

        self.cycle += 1;
        #[cfg(debug_assertions)]
        self.check_invariants()
            .unwrap_or_else(|e| panic!("cycle {}: {e}", self.cycle));
        Ok(ejections)
    }

    /// Flit conservation and credit soundness.
    ///
    /// For every link and vc, the upstream credit counter plus the flits
    /// buffered downstream, the flit on the link and the credits still in
    /// flight back upstream always equal the buffer depth.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.injected != self.ejected + self.in_flight() {
            return Err(format!(
                "flit conservation: injected {} != ejected {} + in flight {}",
                self.injected,
                self.ejected,
                self.in_flight()
            ));
        }
        for (r, router) in self.routers.iter().enumerate() {
            let coord = router.coord();
            for vc in 0..self.cfg.vcs {
                let local = self.local_credits[r][vc] + router.occupancy(Port::Local, vc);
                if local != self.cfg.depth {
                    return Err(format!("local credit mismatch at tile {r} vc {vc}"));
                }
                for port in &Port::ALL[..4] {
                    let Some(nb) = coord.neighbor(*port, self.width, self.height) else {
                        continue;
                    };
                    let down = nb.tile(self.width);
                    let in_port = port.opposite();
                    let buffered = self.routers[down].occupancy(in_port, vc);
                    let on_link = self.links[down][in_port.index()]
                        .filter(|f| f.vc as usize == vc)
                        .is_some() as usize;
                    let returning = self.credit_links[r]
                        .iter()
                        .filter(|&&(p, v)| p == *port && v as usize == vc)
                        .count();
                    let total = router.credits(*port, vc) + buffered + on_link + returning;
                    if total != self.cfg.depth {
                        return Err(format!(
                            "credit soundness at router {r} port {port:?} vc {vc}: {total} != {}",
                            self.cfg.depth
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}
