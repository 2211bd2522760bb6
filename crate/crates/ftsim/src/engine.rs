//! Deterministic discrete-event simulation core.
//!
//! Time is integer nanoseconds. With a fixed packet size, serialization of
//! one packet takes `ser = mtu·8/bandwidth` ns (validated to be whole), and
//! every switch and NIC arbitrates on the shared grid of multiples of
//! `ser`. A forwarded packet reaches the next buffer `ser + prop` ns after
//! its epoch; a freed buffer's credit flies back in `prop` ns. With
//! `0 < prop < ser`, arrivals and credits land strictly between epochs, so
//! ordering events by `(time, insertion sequence)` makes the whole run a
//! pure function of the seed.
//!
//! Entities sleep when they can do no work: a switch schedules its next
//! epoch only while some head packet has a downstream credit, and is woken
//! by the arrival or credit event that changes that. Conservation of
//! packets and of per-link credit sums is audited while the run progresses,
//! and a global progress monitor turns silent deadlock into an error.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::queuing::{map_to_vc, QueueScheme};
use crate::routing::RoutingConfig;
use crate::switch::{Packet, SwitchParams, SwitchState};
use crate::topology::{Endpoint, NodeId, Rlft, SwitchPosition};
use crate::traffic::{self, Role, TrafficPattern};
use crate::{Error, Result};

/// RNG stream layout: every random decision in a run draws from a
/// ChaCha8 stream derived from the one seed, keyed by what the stream is
/// for, so runs are reproducible and entity streams never interleave.
const STREAM_NODES: u64 = 0x0000_0000;
const STREAM_SWITCHES: u64 = 0x4000_0000;
const STREAM_ROLES: u64 = 0x8000_0000;

/// Run-level knobs independent of topology, routing, queuing and traffic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub bandwidth_gbps: u64,
    pub propagation_ns: u64,
    pub duration_ns: u64,
    pub warmup_ns: u64,
    pub seed: u64,
    pub metrics_bin_ns: u64,
    pub audit_interval_ns: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            bandwidth_gbps: 100,
            propagation_ns: 6,
            duration_ns: 3_000_000,
            warmup_ns: 1_000_000,
            seed: 1,
            metrics_bin_ns: 10_000,
            audit_interval_ns: 100_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, mtu_bytes: u64) -> Result<()> {
        if self.bandwidth_gbps == 0 || mtu_bytes * 8 % self.bandwidth_gbps != 0 {
            return Err(Error::Config(format!(
                "{mtu_bytes}-byte packets do not serialize in whole ns at {} Gbps",
                self.bandwidth_gbps
            )));
        }
        let ser = mtu_bytes * 8 / self.bandwidth_gbps;
        if self.propagation_ns == 0 || self.propagation_ns >= ser {
            return Err(Error::Config(format!(
                "propagation ({} ns) must lie strictly between 0 and the \
                 serialization time ({ser} ns) to keep the event grid collision-free",
                self.propagation_ns
            )));
        }
        if self.warmup_ns >= self.duration_ns {
            return Err(Error::Config(format!(
                "warmup ({} ns) must be shorter than the run ({} ns)",
                self.warmup_ns, self.duration_ns
            )));
        }
        if self.metrics_bin_ns == 0
            || self.warmup_ns % self.metrics_bin_ns != 0
            || self.duration_ns % self.metrics_bin_ns != 0
        {
            return Err(Error::Config(format!(
                "metrics bin ({} ns) must divide warmup and duration",
                self.metrics_bin_ns
            )));
        }
        if self.audit_interval_ns == 0 {
            return Err(Error::Config("audit interval must be positive".into()));
        }
        Ok(())
    }

    fn stall_window_ns(&self, ser_ns: u64) -> u64 {
        10 * (2 * ser_ns + self.propagation_ns)
    }
}

/// Binned injection/delivery byte counts for one run, plus the totals the
/// conservation checks use.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsSeries {
    pub bin_ns: u64,
    pub duration_ns: u64,
    pub warmup_ns: u64,
    pub node_count: u32,
    pub bandwidth_gbps: u64,
    pub injected_bytes: Vec<u64>,
    pub delivered_bytes: Vec<u64>,
    pub injected_packets: u64,
    pub delivered_packets: u64,
}

impl MetricsSeries {
    fn new(sim: &SimConfig, node_count: u32) -> Self {
        let bins = (sim.duration_ns / sim.metrics_bin_ns) as usize;
        MetricsSeries {
            bin_ns: sim.metrics_bin_ns,
            duration_ns: sim.duration_ns,
            warmup_ns: sim.warmup_ns,
            node_count,
            bandwidth_gbps: sim.bandwidth_gbps,
            injected_bytes: vec![0; bins],
            delivered_bytes: vec![0; bins],
            injected_packets: 0,
            delivered_packets: 0,
        }
    }

    /// Bytes one node's link can carry in one bin.
    pub fn bin_capacity_bytes(&self) -> u64 {
        self.bin_ns * self.bandwidth_gbps / 8
    }

    fn frac_over(&self, bytes: &[u64]) -> f64 {
        let first = (self.warmup_ns / self.bin_ns) as usize;
        let total: u64 = bytes[first..].iter().sum();
        let capacity =
            (self.duration_ns - self.warmup_ns) * self.bandwidth_gbps / 8 * self.node_count as u64;
        total as f64 / capacity as f64
    }

    /// Delivered fraction of aggregate link bandwidth after warmup.
    pub fn delivered_frac(&self) -> f64 {
        self.frac_over(&self.delivered_bytes)
    }

    /// Injected fraction of aggregate link bandwidth after warmup.
    pub fn injected_frac(&self) -> f64 {
        self.frac_over(&self.injected_bytes)
    }
}

/// One end node: per-VC injection FIFOs with the same capacity and credit
/// protocol as a switch buffer, per-VC host-side backlogs holding drawn
/// packets whose injection FIFO is full (back-pressure blocks only that VC;
/// the other VCs keep injecting), and a round-robin pointer over sendable
/// VCs.
struct Nic {
    queues: Vec<VecDeque<Packet>>,
    credits: Vec<u32>,
    backlog: Vec<VecDeque<Packet>>,
    next_vc: usize,
    role: Role,
    rng: ChaCha8Rng,
    scheduled: bool,
}

impl Nic {
    fn sendable_vc(&self) -> Option<usize> {
        let vcs = self.queues.len();
        for r in 0..vcs {
            let vc = (self.next_vc + r) % vcs;
            if !self.queues[vc].is_empty() && self.credits[vc] > 0 {
                return Some(vc);
            }
        }
        None
    }
}

/// The far side of a duplex link attached to a switch port: packets sent
/// out the port arrive there, and it is also what feeds the port's input
/// buffer.
#[derive(Clone, Copy, Debug)]
enum Peer {
    Node(NodeId),
    Switch { flat: u32, port: u32 },
}

#[derive(Clone, Copy, Debug)]
enum EventKind {
    /// A source draws its next packet.
    Generate { node: NodeId },
    /// A NIC puts one packet on its injection link.
    NicEpoch { node: NodeId },
    /// A packet finishes crossing a link into a switch input buffer.
    Arrival { flat: u32, input: u32, pkt: Packet },
    /// A switch arbitrates its crossbar.
    SwitchEpoch { flat: u32 },
    /// A freed-buffer credit reaches the switch that sent the packet.
    CreditToSwitch { flat: u32, port: u32, vc: u8 },
    /// A freed-buffer credit reaches the injecting NIC.
    CreditToNic { node: NodeId, vc: u8 },
    /// A packet reaches its destination's ejection sink.
    Deliver { pkt: Packet },
    /// Periodic conservation checks.
    Audit,
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: u64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

struct Sim<'a> {
    rlft: &'a Rlft,
    cfg: &'a RoutingConfig,
    scheme: QueueScheme,
    params: &'a SwitchParams,
    sim: &'a SimConfig,
    ser_ns: u64,
    cap: u32,
    load: f64,
    switches: Vec<SwitchState>,
    sw_rngs: Vec<ChaCha8Rng>,
    nics: Vec<Nic>,
    peers: Vec<Vec<Peer>>,
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    next_pkt_id: u64,
    resident: u64,
    ejecting: u64,
    stall_start: u64,
    series: MetricsSeries,
}

/// Simulate one run to completion and return its metrics. The result is a
/// pure function of the arguments; the same seed gives the same series.
pub fn run(
    rlft: &Rlft,
    cfg: &RoutingConfig,
    scheme: QueueScheme,
    params: &SwitchParams,
    pattern: &TrafficPattern,
    sim: &SimConfig,
) -> Result<MetricsSeries> {
    pattern.validate(rlft)?;
    let mut role_rng = ChaCha8Rng::seed_from_u64(sim.seed);
    role_rng.set_stream(STREAM_ROLES);
    let roles = traffic::assign_roles(pattern, rlft, &mut role_rng)?;
    run_with_roles(rlft, cfg, scheme, params, roles, pattern.load, sim)
}

/// [`run`] with the per-node roles fixed by the caller instead of drawn
/// from a pattern — the seam controlled scenarios (e.g. a single flow in an
/// otherwise idle machine) are built on.
pub(crate) fn run_with_roles(
    rlft: &Rlft,
    cfg: &RoutingConfig,
    scheme: QueueScheme,
    params: &SwitchParams,
    roles: Vec<Role>,
    load: f64,
    sim: &SimConfig,
) -> Result<MetricsSeries> {
    scheme.validate()?;
    params.validate(scheme.vcs)?;
    let cap = params.vc_capacity(scheme.vcs);
    cfg.validate(rlft.arity(), rlft.stages(), cap)?;
    sim.validate(params.mtu_bytes)?;
    if roles.len() != rlft.node_count() as usize {
        return Err(Error::Config(format!(
            "{} roles for {} nodes",
            roles.len(),
            rlft.node_count()
        )));
    }

    let stream_rng = |stream: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(sim.seed);
        r.set_stream(stream);
        r
    };

    let mut roles = roles.into_iter();
    let nics = (0..rlft.node_count())
        .map(|node| Nic {
            queues: vec![VecDeque::new(); scheme.vcs],
            credits: vec![cap; scheme.vcs],
            backlog: vec![VecDeque::new(); scheme.vcs],
            next_vc: 0,
            role: roles.next().unwrap(),
            rng: stream_rng(STREAM_NODES + node as u64),
            scheduled: false,
        })
        .collect();

    let mut switches = Vec::with_capacity(rlft.switch_count() as usize);
    let mut sw_rngs = Vec::with_capacity(rlft.switch_count() as usize);
    let mut peers = Vec::with_capacity(rlft.switch_count() as usize);
    for pos in rlft.switch_positions() {
        let flat = rlft.flat_id(pos);
        let mut sw = SwitchState::new(rlft, pos, scheme.vcs, params);
        let ports = sw.ports();
        let mut port_peers = Vec::with_capacity(ports as usize);
        for port in 0..ports {
            match rlft.peer(pos, port) {
                (Endpoint::Node(n), _) => {
                    sw.set_infinite_output(port);
                    port_peers.push(Peer::Node(n));
                }
                (Endpoint::Switch(p), peer_port) => {
                    port_peers.push(Peer::Switch { flat: rlft.flat_id(p), port: peer_port });
                }
            }
        }
        debug_assert_eq!(flat as usize, switches.len());
        switches.push(sw);
        sw_rngs.push(stream_rng(STREAM_SWITCHES + flat as u64));
        peers.push(port_peers);
    }

    let ser_ns = traffic::serialization_ns(params.mtu_bytes, sim.bandwidth_gbps);
    let mut state = Sim {
        rlft,
        cfg,
        scheme,
        params,
        sim,
        ser_ns,
        cap,
        load,
        switches,
        sw_rngs,
        nics,
        peers,
        heap: BinaryHeap::new(),
        seq: 0,
        next_pkt_id: 0,
        resident: 0,
        ejecting: 0,
        stall_start: 0,
        series: MetricsSeries::new(sim, rlft.node_count()),
    };
    state.prime();
    state.drive()?;
    Ok(state.series)
}

impl Sim<'_> {
    fn push(&mut self, time: u64, kind: EventKind) {
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(Reverse(Event { time, seq, kind }));
    }

    /// First grid instant at or after `t`.
    fn grid_at_or_after(&self, t: u64) -> u64 {
        t.div_ceil(self.ser_ns) * self.ser_ns
    }

    /// First grid instant strictly after `t`.
    fn grid_after(&self, t: u64) -> u64 {
        (t / self.ser_ns + 1) * self.ser_ns
    }

    fn prime(&mut self) {
        if self.load > 0.0 {
            for node in 0..self.rlft.node_count() {
                if matches!(self.nics[node as usize].role, Role::Silent) {
                    continue;
                }
                let gap = traffic::interarrival_ns(
                    self.load,
                    self.ser_ns,
                    &mut self.nics[node as usize].rng,
                );
                self.push(gap, EventKind::Generate { node });
            }
        }
        self.push(self.sim.audit_interval_ns, EventKind::Audit);
    }

    fn drive(&mut self) -> Result<()> {
        let window = self.sim.stall_window_ns(self.ser_ns);
        while let Some(Reverse(ev)) = self.heap.pop() {
            if ev.time >= self.sim.duration_ns {
                break;
            }
            match ev.kind {
                EventKind::Generate { node } => self.on_generate(node, ev.time),
                EventKind::NicEpoch { node } => self.on_nic_epoch(node, ev.time),
                EventKind::Arrival { flat, input, pkt } => {
                    self.on_arrival(flat, input, pkt, ev.time)?
                }
                EventKind::SwitchEpoch { flat } => self.on_switch_epoch(flat, ev.time)?,
                EventKind::CreditToSwitch { flat, port, vc } => {
                    self.on_credit_to_switch(flat, port, vc as usize, ev.time)?
                }
                EventKind::CreditToNic { node, vc } => {
                    self.on_credit_to_nic(node, vc as usize, ev.time)?
                }
                EventKind::Deliver { pkt } => self.on_deliver(pkt, ev.time),
                EventKind::Audit => {
                    self.audit(ev.time)?;
                    self.push(ev.time + self.sim.audit_interval_ns, EventKind::Audit);
                }
            }
            if self.resident > 0 && ev.time > self.stall_start + window {
                return Err(Error::Stall {
                    time_ns: ev.time,
                    msg: format!(
                        "{} packets resident with no delivery since {} ns",
                        self.resident, self.stall_start
                    ),
                });
            }
        }
        self.audit(self.sim.duration_ns)
    }

    // --- sources and NICs -------------------------------------------------

    fn on_generate(&mut self, node: NodeId, now: u64) {
        let nic = &mut self.nics[node as usize];
        let dst = traffic::next_destination(&nic.role, node, self.rlft, &mut nic.rng);
        let vc = map_to_vc(self.scheme, node, dst, self.rlft);
        let pkt = Packet {
            id: self.next_pkt_id,
            src: node,
            dst,
            vc: vc as u8,
            size_bytes: self.params.mtu_bytes as u32,
            injected_at_ns: now,
        };
        self.next_pkt_id += 1;
        let nic = &mut self.nics[node as usize];
        if nic.backlog[vc].is_empty() && nic.queues[vc].len() < self.cap as usize {
            self.admit(node, pkt, now);
        } else {
            // This VC's injection FIFO is backed up: the packet waits host-
            // side behind its predecessors. Other VCs are unaffected.
            nic.backlog[vc].push_back(pkt);
        }
        let gap = traffic::interarrival_ns(
            self.load,
            self.ser_ns,
            &mut self.nics[node as usize].rng,
        );
        self.push(now + gap, EventKind::Generate { node });
    }

    /// Enqueue a drawn packet at its NIC: this is the instant it counts as
    /// injected.
    fn admit(&mut self, node: NodeId, pkt: Packet, now: u64) {
        let nic = &mut self.nics[node as usize];
        nic.queues[pkt.vc as usize].push_back(pkt);
        self.series.injected_packets += 1;
        let bin = (now / self.series.bin_ns) as usize;
        self.series.injected_bytes[bin] += pkt.size_bytes as u64;
        if self.resident == 0 {
            self.stall_start = now;
        }
        self.resident += 1;
        self.wake_nic(node, now);
    }

    fn wake_nic(&mut self, node: NodeId, now: u64) {
        let nic = &mut self.nics[node as usize];
        if !nic.scheduled && nic.sendable_vc().is_some() {
            nic.scheduled = true;
            let at = self.grid_at_or_after(now);
            self.push(at, EventKind::NicEpoch { node });
        }
    }

    fn on_nic_epoch(&mut self, node: NodeId, now: u64) {
        let nic = &mut self.nics[node as usize];
        nic.scheduled = false;
        if let Some(vc) = nic.sendable_vc() {
            let pkt = nic.queues[vc].pop_front().unwrap();
            nic.credits[vc] -= 1;
            nic.next_vc = (vc + 1) % self.scheme.vcs;
            let flat = self.rlft.flat_id(SwitchPosition {
                stage: 1,
                index: self.rlft.leaf_switch(node),
            });
            let input = self.rlft.attach_port(node);
            self.switches[flat as usize].input_mut(input).pkts_in_flight[vc] += 1;
            self.push(
                now + self.ser_ns + self.sim.propagation_ns,
                EventKind::Arrival { flat, input, pkt },
            );
            // The send freed one FIFO slot; the oldest blocked packet on
            // this VC (if any) moves from the host backlog into the FIFO.
            let nic = &mut self.nics[node as usize];
            if let Some(next) = nic.backlog[vc].pop_front() {
                self.admit(node, next, now);
            }
        }
        let nic = &mut self.nics[node as usize];
        if nic.sendable_vc().is_some() {
            nic.scheduled = true;
            self.push(now + self.ser_ns, EventKind::NicEpoch { node });
        }
    }

    fn on_credit_to_nic(&mut self, node: NodeId, vc: usize, now: u64) -> Result<()> {
        let nic = &mut self.nics[node as usize];
        if nic.credits[vc] >= self.cap {
            return Err(Error::FlowControl(format!(
                "credit overflow at node {node} vc {vc}"
            )));
        }
        nic.credits[vc] += 1;
        let flat = self.rlft.flat_id(SwitchPosition {
            stage: 1,
            index: self.rlft.leaf_switch(node),
        });
        let input = self.rlft.attach_port(node);
        self.switches[flat as usize]
            .input_mut(input)
            .credits_in_flight[vc] -= 1;
        self.wake_nic(node, now);
        Ok(())
    }

    // --- switches ---------------------------------------------------------

    fn wake_switch(&mut self, flat: u32, now: u64) {
        let sw = &mut self.switches[flat as usize];
        if !sw.scheduled && sw.has_eligible_head() {
            sw.scheduled = true;
            let at = self.grid_after(now);
            self.push(at, EventKind::SwitchEpoch { flat });
        }
    }

    fn on_arrival(&mut self, flat: u32, input: u32, pkt: Packet, now: u64) -> Result<()> {
        let vc = pkt.vc as usize;
        let fi = flat as usize;
        self.switches[fi].input_mut(input).pkts_in_flight[vc] -= 1;
        self.switches[fi].on_packet_arrival(
            self.rlft,
            self.cfg,
            &mut self.sw_rngs[fi],
            input,
            pkt,
        )?;
        self.switches[fi].route_head(self.rlft, self.cfg, &mut self.sw_rngs[fi], input, vc)?;
        self.wake_switch(flat, now);
        Ok(())
    }

    fn on_switch_epoch(&mut self, flat: u32, now: u64) -> Result<()> {
        let fi = flat as usize;
        self.switches[fi].scheduled = false;
        let matching = self.switches[fi].arbitrate();
        let moved = self.switches[fi].forward_matched(&matching)?;
        let arrive = now + self.ser_ns + self.sim.propagation_ns;
        let credit_back = now + self.sim.propagation_ns;
        for f in moved {
            let vc = f.packet.vc as usize;
            // Put the packet on the output link.
            match self.peers[fi][f.output as usize] {
                Peer::Node(_) => {
                    self.ejecting += 1;
                    self.push(arrive, EventKind::Deliver { pkt: f.packet });
                }
                Peer::Switch { flat: pf, port } => {
                    self.switches[pf as usize].input_mut(port).pkts_in_flight[vc] += 1;
                    self.push(arrive, EventKind::Arrival { flat: pf, input: port, pkt: f.packet });
                }
            }
            // Return the freed slot's credit to whoever feeds the input.
            self.switches[fi].input_mut(f.input).credits_in_flight[vc] += 1;
            match self.peers[fi][f.input as usize] {
                Peer::Node(n) => {
                    self.push(credit_back, EventKind::CreditToNic { node: n, vc: vc as u8 });
                }
                Peer::Switch { flat: uf, port } => {
                    self.push(
                        credit_back,
                        EventKind::CreditToSwitch { flat: uf, port, vc: vc as u8 },
                    );
                }
            }
            // The pop may have exposed a new, not-yet-routed head.
            self.switches[fi].route_head(
                self.rlft,
                self.cfg,
                &mut self.sw_rngs[fi],
                f.input,
                vc,
            )?;
        }
        if self.switches[fi].has_eligible_head() {
            self.switches[fi].scheduled = true;
            self.push(now + self.ser_ns, EventKind::SwitchEpoch { flat });
        }
        Ok(())
    }

    fn on_credit_to_switch(&mut self, flat: u32, port: u32, vc: usize, now: u64) -> Result<()> {
        self.switches[flat as usize].on_credit_return(port, vc)?;
        match self.peers[flat as usize][port as usize] {
            Peer::Switch { flat: rf, port: rp } => {
                self.switches[rf as usize].input_mut(rp).credits_in_flight[vc] -= 1;
            }
            Peer::Node(n) => {
                return Err(Error::FlowControl(format!(
                    "credit from node {n}, but node-facing outputs are uncredited sinks"
                )));
            }
        }
        self.wake_switch(flat, now);
        Ok(())
    }

    fn on_deliver(&mut self, pkt: Packet, now: u64) {
        self.ejecting -= 1;
        self.resident -= 1;
        self.stall_start = now;
        self.series.delivered_packets += 1;
        let bin = (now / self.series.bin_ns) as usize;
        self.series.delivered_bytes[bin] += pkt.size_bytes as u64;
    }

    // --- audits -----------------------------------------------------------

    /// Two families of checks: every packet admitted is somewhere (a NIC
    /// FIFO, a switch buffer, a link, or delivered), and on every link the
    /// sender's free credits plus committed packets plus buffered packets
    /// plus returning credits equal the buffer capacity.
    fn audit(&mut self, now: u64) -> Result<()> {
        let fail = |msg: String| Err(Error::Audit { time_ns: now, msg });
        let buffered_switch: u64 = self.switches.iter().map(|s| s.resident_packets()).sum();
        let buffered_nic: u64 = self
            .nics
            .iter()
            .map(|n| n.queues.iter().map(|q| q.len() as u64).sum::<u64>())
            .sum();
        let mut in_flight: u64 = self.ejecting;
        for sw in &self.switches {
            for input in 0..sw.ports() {
                for vc in 0..self.scheme.vcs {
                    in_flight += sw.input(input).pkts_in_flight[vc] as u64;
                }
            }
        }
        let accounted = self.series.delivered_packets + buffered_switch + buffered_nic + in_flight;
        if self.series.injected_packets != accounted {
            return fail(format!(
                "packet conservation broken: {} injected but {} accounted \
                 ({} delivered, {} in switches, {} in NICs, {} on links)",
                self.series.injected_packets,
                accounted,
                self.series.delivered_packets,
                buffered_switch,
                buffered_nic,
                in_flight
            ));
        }
        if self.resident != self.series.injected_packets - self.series.delivered_packets {
            return fail("resident counter out of sync".into());
        }
        for fi in 0..self.switches.len() {
            let sw = &self.switches[fi];
            for input in 0..sw.ports() {
                for vc in 0..self.scheme.vcs {
                    let sender_free = match self.peers[fi][input as usize] {
                        Peer::Node(n) => self.nics[n as usize].credits[vc],
                        Peer::Switch { flat, port } => {
                            self.switches[flat as usize].free_out_credits(port, vc)
                        }
                    };
                    let inp = sw.input(input);
                    let sum = sender_free
                        + inp.pkts_in_flight[vc]
                        + sw.occupancy(input, vc)
                        + inp.credits_in_flight[vc];
                    if sum != self.cap {
                        return fail(format!(
                            "credit conservation broken into {} input {input} vc {vc}: \
                             {sender_free} free + {} flying + {} buffered + {} returning \
                             = {sum}, capacity {}",
                            sw.pos,
                            inp.pkts_in_flight[vc],
                            sw.occupancy(input, vc),
                            inp.credits_in_flight[vc],
                            self.cap
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}
