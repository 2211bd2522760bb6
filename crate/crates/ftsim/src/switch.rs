//! Input-queued switch model: per-(input, VC) buffers with optional virtual
//! output queues, credit-based flow control toward each output, and iSLIP
//! crossbar arbitration.
//!
//! A switch owns, per input port, one FIFO per VC (or one per (VC, output)
//! when VOQs are on), and per output port a credit counter per VC mirroring
//! the free space of the downstream buffer. Each arbitration epoch moves at
//! most one packet per input and per output across the crossbar. Output
//! selection for a packet is computed once — at arrival when VOQs sort
//! packets by output, otherwise when the packet first reaches the head of
//! its FIFO — and never recomputed, so adaptivity acts on the credit state
//! visible at that instant.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;

use crate::routing::{
    self, CongestionFlags, CreditView, RoutingConfig, RoutingMode,
};
use crate::topology::{NodeId, Rlft, SwitchPosition};
use crate::{Error, Result};

/// A fixed-size packet in flight. `vc` is assigned at injection and never
/// changes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub vc: u8,
    pub size_bytes: u32,
    pub injected_at_ns: u64,
}

/// Per-switch structural parameters shared by every switch in a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SwitchParams {
    /// Virtual output queues at the inputs.
    pub voq: bool,
    /// Total buffer memory per input port, in bytes.
    pub buffer_bytes: u64,
    /// Fixed packet size, in bytes.
    pub mtu_bytes: u64,
}

impl Default for SwitchParams {
    fn default() -> Self {
        SwitchParams { voq: false, buffer_bytes: 192_000, mtu_bytes: 4_000 }
    }
}

impl SwitchParams {
    /// Whole packets a full input buffer holds.
    pub fn buffer_packets(&self) -> u32 {
        (self.buffer_bytes / self.mtu_bytes) as u32
    }

    /// Buffer space per VC, in packets, with the input buffer split evenly
    /// across `vcs` virtual channels.
    pub fn vc_capacity(&self, vcs: usize) -> u32 {
        self.buffer_packets() / vcs as u32
    }

    pub fn validate(&self, vcs: usize) -> Result<()> {
        if self.mtu_bytes == 0 || self.buffer_bytes == 0 {
            return Err(Error::FlowControl(
                "mtu_bytes and buffer_bytes must be positive".into(),
            ));
        }
        if self.vc_capacity(vcs) == 0 {
            return Err(Error::FlowControl(format!(
                "buffer of {} bytes cannot hold one {}-byte packet per VC for {} VCs",
                self.buffer_bytes, self.mtu_bytes, vcs
            )));
        }
        Ok(())
    }
}

/// One input port: FIFOs plus the flow-control bookkeeping for the upstream
/// link that feeds it.
#[derive(Clone, Debug)]
pub struct InputPort {
    /// FIFOs indexed `vc * lanes + lane`; `lanes` is the port count under
    /// VOQ, 1 otherwise.
    queues: Vec<VecDeque<Packet>>,
    /// Without VOQ: the chosen output of each VC's head packet, computed
    /// when it reached the head.
    routed: Vec<Option<u32>>,
    /// Buffer occupancy per VC, in packets (sum over lanes).
    occ: Vec<u32>,
    /// Packets the upstream sender has committed to this buffer that have
    /// not arrived yet (audit bookkeeping, owned by the engine).
    pub pkts_in_flight: Vec<u32>,
    /// Credits released by this buffer still travelling back upstream
    /// (audit bookkeeping, owned by the engine).
    pub credits_in_flight: Vec<u32>,
}

/// A packet the crossbar moved this epoch, to be put on the output link.
#[derive(Clone, Copy, Debug)]
pub struct Forwarded {
    pub input: u32,
    pub output: u32,
    pub packet: Packet,
}

/// Full state of one switch.
#[derive(Clone, Debug)]
pub struct SwitchState {
    pub pos: SwitchPosition,
    ports: u32,
    vcs: usize,
    lanes: u32,
    cap: u32,
    voq: bool,
    /// Up ports occupy the absolute range `[ports - up_ports, ports)`.
    up_ports: u32,
    inputs: Vec<InputPort>,
    /// Credits toward each downstream buffer, indexed `port * vcs + vc`.
    out_credits: Vec<u32>,
    /// Outputs that eject into a sink with unbounded acceptance (node-facing
    /// ports); credits are not tracked there.
    infinite_out: Vec<bool>,
    /// Congestion flags for the two-threshold trigger, per (up port, VC).
    pub flags: CongestionFlags,
    grant_ptr: Vec<u32>,
    accept_ptr: Vec<u32>,
    /// Per-input round-robin pointer over VCs for crossbar tie-breaks.
    vc_rr: Vec<u32>,
    /// Engine bookkeeping: an arbitration epoch is already on the event
    /// queue for this switch.
    pub scheduled: bool,
}

/// Borrowed view of one switch's upward credit counters, for the adaptive
/// selection function.
struct UpCreditView<'a> {
    credits: &'a [u32],
    vcs: usize,
    first_up_port: u32,
    capacity: u32,
}

impl CreditView for UpCreditView<'_> {
    fn free_credits(&self, up_port: u32, vc: usize) -> u32 {
        self.credits[(self.first_up_port + up_port) as usize * self.vcs + vc]
    }

    fn capacity(&self) -> u32 {
        self.capacity
    }
}

impl SwitchState {
    pub fn new(rlft: &Rlft, pos: SwitchPosition, vcs: usize, params: &SwitchParams) -> Self {
        let down = rlft.down_port_count(pos.stage);
        let up = rlft.up_port_count(pos.stage);
        let ports = down + up;
        let lanes = if params.voq { ports } else { 1 };
        let cap = params.vc_capacity(vcs);
        let input = InputPort {
            queues: vec![VecDeque::new(); vcs * lanes as usize],
            routed: vec![None; vcs],
            occ: vec![0; vcs],
            pkts_in_flight: vec![0; vcs],
            credits_in_flight: vec![0; vcs],
        };
        SwitchState {
            pos,
            ports,
            vcs,
            lanes,
            cap,
            voq: params.voq,
            up_ports: up,
            inputs: vec![input; ports as usize],
            out_credits: vec![cap; ports as usize * vcs],
            infinite_out: vec![false; ports as usize],
            flags: CongestionFlags::new(up, vcs),
            grant_ptr: vec![0; ports as usize],
            accept_ptr: vec![0; ports as usize],
            vc_rr: vec![0; ports as usize],
            scheduled: false,
        }
    }

    pub fn ports(&self) -> u32 {
        self.ports
    }

    pub fn vcs(&self) -> usize {
        self.vcs
    }

    pub fn vc_capacity(&self) -> u32 {
        self.cap
    }

    /// Index of the first up port (= number of down ports).
    pub fn first_up_port(&self) -> u32 {
        self.ports - self.up_ports
    }

    /// Mark an output as ejecting into an always-accepting sink.
    pub fn set_infinite_output(&mut self, port: u32) {
        self.infinite_out[port as usize] = true;
    }

    pub fn occupancy(&self, input: u32, vc: usize) -> u32 {
        self.inputs[input as usize].occ[vc]
    }

    pub fn free_out_credits(&self, port: u32, vc: usize) -> u32 {
        self.out_credits[port as usize * self.vcs + vc]
    }

    pub fn resident_packets(&self) -> u64 {
        self.inputs
            .iter()
            .map(|i| i.occ.iter().map(|&o| o as u64).sum::<u64>())
            .sum()
    }

    pub fn input_mut(&mut self, input: u32) -> &mut InputPort {
        &mut self.inputs[input as usize]
    }

    pub fn input(&self, input: u32) -> &InputPort {
        &self.inputs[input as usize]
    }

    fn has_credit(&self, port: u32, vc: usize) -> bool {
        self.infinite_out[port as usize] || self.out_credits[port as usize * self.vcs + vc] > 0
    }

    /// Choose the output port for `pkt` at this switch: the unique down port
    /// when the destination lies below (or this is a top switch), otherwise
    /// the routing policy's up port.
    fn choose_output(
        &mut self,
        rlft: &Rlft,
        cfg: &RoutingConfig,
        rng: &mut ChaCha8Rng,
        pkt: &Packet,
    ) -> Result<u32> {
        let top = self.pos.stage == rlft.stages();
        if top || rlft.span(self.pos).contains(&pkt.dst) {
            return routing::down_port(rlft, self.pos, pkt.dst);
        }
        let k = rlft.arity();
        let up = match cfg.mode {
            RoutingMode::Oblivious => routing::oblivious_port(k, rng),
            RoutingMode::Deterministic => routing::dmodk_up_port(rlft, self.pos, pkt.dst)?,
            RoutingMode::Adaptive => {
                let view = UpCreditView {
                    credits: &self.out_credits,
                    vcs: self.vcs,
                    first_up_port: self.first_up_port(),
                    capacity: self.cap,
                };
                routing::restricted_path_selection(
                    k,
                    self.pos,
                    pkt.dst,
                    pkt.vc as usize,
                    cfg,
                    &view,
                    &mut self.flags,
                )
            }
        };
        Ok(self.first_up_port() + up)
    }

    /// Accept a packet from the upstream link into input `input`. With VOQs
    /// the output is chosen here; otherwise it is deferred until the packet
    /// reaches its FIFO head. Overflowing the per-VC buffer share is a
    /// protocol violation.
    pub fn on_packet_arrival(
        &mut self,
        rlft: &Rlft,
        cfg: &RoutingConfig,
        rng: &mut ChaCha8Rng,
        input: u32,
        pkt: Packet,
    ) -> Result<()> {
        let vc = pkt.vc as usize;
        if self.inputs[input as usize].occ[vc] >= self.cap {
            return Err(Error::FlowControl(format!(
                "buffer overflow at {} input {input} vc {vc}: capacity {} exceeded",
                self.pos, self.cap
            )));
        }
        let lane = if self.voq { self.choose_output(rlft, cfg, rng, &pkt)? } else { 0 };
        let inp = &mut self.inputs[input as usize];
        inp.occ[vc] += 1;
        inp.queues[vc * self.lanes as usize + lane as usize].push_back(pkt);
        Ok(())
    }

    /// Without VOQ: if the FIFO at (input, vc) has an unrouted head packet,
    /// choose its output now. The engine calls this at the instants a packet
    /// becomes head — on arrival into an empty FIFO and right after a
    /// forward pops the previous head — so the decision sees the credit
    /// state of that moment and is then fixed. No-op under VOQ, where the
    /// choice was made at arrival.
    pub fn route_head(
        &mut self,
        rlft: &Rlft,
        cfg: &RoutingConfig,
        rng: &mut ChaCha8Rng,
        input: u32,
        vc: usize,
    ) -> Result<()> {
        if self.voq || self.inputs[input as usize].routed[vc].is_some() {
            return Ok(());
        }
        let head = self.inputs[input as usize].queues[vc].front().copied();
        if let Some(pkt) = head {
            let out = self.choose_output(rlft, cfg, rng, &pkt)?;
            self.inputs[input as usize].routed[vc] = Some(out);
        }
        Ok(())
    }

    /// Without VOQ: give every VC head that has no output yet one, scanning
    /// in ascending (input, vc) order. No-op under VOQ.
    pub fn route_pending_heads(
        &mut self,
        rlft: &Rlft,
        cfg: &RoutingConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        for input in 0..self.ports {
            for vc in 0..self.vcs {
                self.route_head(rlft, cfg, rng, input, vc)?;
            }
        }
        Ok(())
    }

    /// Per-input request bitmasks for the arbiter: input i requests output o
    /// iff some head packet at i wants o and the o-ward buffer for that
    /// packet's VC has a free credit.
    pub fn collect_requests(&self) -> Vec<u64> {
        let mut requests = vec![0u64; self.ports as usize];
        for input in 0..self.ports as usize {
            let inp = &self.inputs[input];
            let mut mask = 0u64;
            for vc in 0..self.vcs {
                if self.voq {
                    for out in 0..self.ports {
                        if !inp.queues[vc * self.lanes as usize + out as usize].is_empty()
                            && self.has_credit(out, vc)
                        {
                            mask |= 1 << out;
                        }
                    }
                } else if let Some(out) = inp.routed[vc] {
                    if self.has_credit(out, vc) {
                        mask |= 1 << out;
                    }
                }
            }
            requests[input] = mask;
        }
        requests
    }

    /// Run one arbitration epoch's matching over the current requests.
    pub fn arbitrate(&mut self) -> Vec<(u32, u32)> {
        let requests = self.collect_requests();
        islip_arbitrate(&requests, &mut self.grant_ptr, &mut self.accept_ptr, self.ports)
    }

    /// Dequeue the matched packets, consuming one downstream credit each.
    /// When several VC heads at one input want the matched output, a
    /// per-input round-robin pointer picks; it advances past the served VC.
    pub fn forward_matched(&mut self, matching: &[(u32, u32)]) -> Result<Vec<Forwarded>> {
        let mut moved = Vec::with_capacity(matching.len());
        for &(input, output) in matching {
            let vc = self.pick_vc(input, output)?;
            let lane = if self.voq { output } else { 0 };
            let inp = &mut self.inputs[input as usize];
            let packet = inp.queues[vc * self.lanes as usize + lane as usize]
                .pop_front()
                .ok_or_else(|| {
                    Error::FlowControl(format!(
                        "matched empty queue at {} input {input} output {output}",
                        self.pos
                    ))
                })?;
            inp.occ[vc] -= 1;
            if !self.voq {
                inp.routed[vc] = None;
            }
            if !self.infinite_out[output as usize] {
                let c = &mut self.out_credits[output as usize * self.vcs + vc];
                if *c == 0 {
                    return Err(Error::FlowControl(format!(
                        "forwarding without a credit at {} output {output} vc {vc}",
                        self.pos
                    )));
                }
                *c -= 1;
            }
            self.vc_rr[input as usize] = ((vc + 1) % self.vcs) as u32;
            moved.push(Forwarded { input, output, packet });
        }
        Ok(moved)
    }

    fn pick_vc(&self, input: u32, output: u32) -> Result<usize> {
        let inp = &self.inputs[input as usize];
        for r in 0..self.vcs {
            let vc = (self.vc_rr[input as usize] as usize + r) % self.vcs;
            let wants = if self.voq {
                !inp.queues[vc * self.lanes as usize + output as usize].is_empty()
            } else {
                inp.routed[vc] == Some(output)
            };
            if wants && self.has_credit(output, vc) {
                return Ok(vc);
            }
        }
        Err(Error::FlowControl(format!(
            "no eligible VC behind match at {} input {input} output {output}",
            self.pos
        )))
    }

    /// A credit released by the downstream buffer on `output` arrives back.
    /// Exceeding the buffer capacity is a protocol violation.
    pub fn on_credit_return(&mut self, output: u32, vc: usize) -> Result<()> {
        if self.infinite_out[output as usize] {
            return Err(Error::FlowControl(format!(
                "credit returned on sink output {output} of {}",
                self.pos
            )));
        }
        let c = &mut self.out_credits[output as usize * self.vcs + vc];
        if *c >= self.cap {
            return Err(Error::FlowControl(format!(
                "credit overflow at {} output {output} vc {vc}: already {} of {}",
                self.pos, *c, self.cap
            )));
        }
        *c += 1;
        Ok(())
    }

    /// True if any buffered head could be forwarded right now (some request
    /// bit would be set). When this is false an arbitration epoch would move
    /// nothing, so the engine lets the switch sleep; any event that could
    /// make a head eligible (arrival, credit return) reschedules it.
    /// Allocation-free: this runs on every arrival and credit event.
    pub fn has_eligible_head(&self) -> bool {
        for inp in &self.inputs {
            for vc in 0..self.vcs {
                if self.voq {
                    for out in 0..self.ports {
                        if !inp.queues[vc * self.lanes as usize + out as usize].is_empty()
                            && self.has_credit(out, vc)
                        {
                            return true;
                        }
                    }
                } else if let Some(out) = inp.routed[vc] {
                    if self.has_credit(out, vc) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// iSLIP matching over request bitmasks: bit o of `requests[i]` means input
/// i requests output o. Runs grant/accept rounds until one adds nothing
/// (equivalent to port-count iterations, since each round either grows the
/// matching or ends it). Grant pointers pick the first requesting unmatched
/// input at-or-after the pointer; accept pointers pick among granting
/// outputs the same way. Pointers advance — to one past the partner — only
/// for matches made in the first round, which is what desynchronizes the
/// pointers of contending ports.
pub fn islip_arbitrate(
    requests: &[u64],
    grant_ptr: &mut [u32],
    accept_ptr: &mut [u32],
    ports: u32,
) -> Vec<(u32, u32)> {
    let p = ports as usize;
    let mut in_matched = vec![false; p];
    let mut out_matched = vec![false; p];
    let mut matching = Vec::new();
    for round in 0..p {
        // Grant: each unmatched output picks one requesting unmatched input.
        let mut grant_to: Vec<Option<u32>> = vec![None; p];
        for out in 0..p {
            if out_matched[out] {
                continue;
            }
            for r in 0..p {
                let input = (grant_ptr[out] as usize + r) % p;
                if !in_matched[input] && requests[input] & (1 << out) != 0 {
                    grant_to[out] = Some(input as u32);
                    break;
                }
            }
        }
        // Accept: each input with grants takes the first from its pointer.
        let mut accepted = Vec::new();
        for input in 0..p {
            if in_matched[input] {
                continue;
            }
            for r in 0..p {
                let out = (accept_ptr[input] as usize + r) % p;
                if grant_to[out] == Some(input as u32) {
                    accepted.push((input as u32, out as u32));
                    break;
                }
            }
        }
        if accepted.is_empty() {
            break;
        }
        for &(input, out) in &accepted {
            in_matched[input as usize] = true;
            out_matched[out as usize] = true;
            if round == 0 {
                grant_ptr[out as usize] = (input + 1) % ports;
                accept_ptr[input as usize] = (out + 1) % ports;
            }
            matching.push((input, out));
        }
    }
    matching
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_rlft, RlftParams};
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn pkt(id: u64, dst: NodeId, vc: u8) -> Packet {
        Packet { id, src: 0, dst, vc, size_bytes: 4_000, injected_at_ns: 0 }
    }

    #[test]
    fn buffer_packet_arithmetic() {
        let p = SwitchParams::default();
        assert_eq!(p.buffer_packets(), 48);
        assert_eq!(p.vc_capacity(3), 16);
        assert_eq!(p.vc_capacity(1), 48);
        assert!(p.validate(3).is_ok());
        assert!(SwitchParams { mtu_bytes: 0, ..p }.validate(1).is_err());
        assert!(
            SwitchParams { buffer_bytes: 4_000, ..p }.validate(2).is_err(),
            "one packet cannot be split across two VCs"
        );
    }

    #[test]
    fn seventeenth_packet_overflows_vc_share() {
        let rlft = build_rlft(RlftParams { ports: 4, stages: 3 }).unwrap();
        let cfg = RoutingConfig::deterministic();
        let mut rng = rng();
        let mut sw = SwitchState::new(
            &rlft,
            SwitchPosition { stage: 1, index: 0 },
            3,
            &SwitchParams::default(),
        );
        assert_eq!(sw.vc_capacity(), 16);
        for i in 0..16 {
            sw.on_packet_arrival(&rlft, &cfg, &mut rng, 0, pkt(i, 9, 1)).unwrap();
        }
        assert_eq!(sw.occupancy(0, 1), 16);
        // Other VCs on the same input are unaffected...
        sw.on_packet_arrival(&rlft, &cfg, &mut rng, 0, pkt(90, 9, 0)).unwrap();
        // ...but a 17th packet on the full VC is a violation.
        let err = sw.on_packet_arrival(&rlft, &cfg, &mut rng, 0, pkt(91, 9, 1));
        assert!(matches!(err, Err(Error::FlowControl(_))));
    }

    #[test]
    fn credit_return_rails() {
        let rlft = build_rlft(RlftParams { ports: 4, stages: 3 }).unwrap();
        let mut sw = SwitchState::new(
            &rlft,
            SwitchPosition { stage: 1, index: 0 },
            3,
            &SwitchParams::default(),
        );
        // All counters start full, so an immediate return overflows.
        assert!(matches!(sw.on_credit_return(2, 0), Err(Error::FlowControl(_))));
        // Spend one, return one, return again → overflow.
        sw.out_credits[2 * 3] = 15;
        sw.on_credit_return(2, 0).unwrap();
        assert_eq!(sw.free_out_credits(2, 0), 16);
        assert!(matches!(sw.on_credit_return(2, 0), Err(Error::FlowControl(_))));
        // Sink outputs never see credit traffic.
        sw.set_infinite_output(0);
        assert!(sw.on_credit_return(0, 0).is_err());
    }

    #[test]
    fn forward_consumes_credit_and_clears_head_route() {
        let rlft = build_rlft(RlftParams { ports: 4, stages: 3 }).unwrap();
        let cfg = RoutingConfig::deterministic();
        let mut rng = rng();
        let mut sw = SwitchState::new(
            &rlft,
            SwitchPosition { stage: 1, index: 0 },
            1,
            &SwitchParams::default(),
        );
        // dst 9 from leaf 0: outside span {0,1} → up port; digit ⌊9/1⌋ mod 2
        // = 1 → absolute port 3.
        sw.on_packet_arrival(&rlft, &cfg, &mut rng, 0, pkt(1, 9, 0)).unwrap();
        sw.route_pending_heads(&rlft, &cfg, &mut rng).unwrap();
        assert_eq!(sw.collect_requests(), vec![0b1000, 0, 0, 0]);
        let matching = sw.arbitrate();
        assert_eq!(matching, vec![(0, 3)]);
        let moved = sw.forward_matched(&matching).unwrap();
        assert_eq!(moved.len(), 1);
        assert_eq!(moved[0].packet.id, 1);
        assert_eq!(sw.free_out_credits(3, 0), 47);
        assert_eq!(sw.occupancy(0, 0), 0);
        assert!(!sw.has_eligible_head());
    }

    #[test]
    fn requests_require_downstream_credit() {
        let rlft = build_rlft(RlftParams { ports: 4, stages: 3 }).unwrap();
        let cfg = RoutingConfig::deterministic();
        let mut rng = rng();
        let mut sw = SwitchState::new(
            &rlft,
            SwitchPosition { stage: 1, index: 0 },
            1,
            &SwitchParams::default(),
        );
        sw.on_packet_arrival(&rlft, &cfg, &mut rng, 0, pkt(1, 9, 0)).unwrap();
        sw.route_pending_heads(&rlft, &cfg, &mut rng).unwrap();
        sw.out_credits[3] = 0; // starve the chosen output
        assert_eq!(sw.collect_requests(), vec![0, 0, 0, 0]);
        assert!(!sw.has_eligible_head());
        assert!(sw.arbitrate().is_empty());
        sw.on_credit_return(3, 0).unwrap();
        assert!(sw.has_eligible_head());
        assert_eq!(sw.arbitrate(), vec![(0, 3)]);
    }

    // --- iSLIP unit tests -------------------------------------------------

    /// Check a matching is valid for the requests and maximal (no request
    /// pair with both sides unmatched remains).
    fn assert_valid_maximal(requests: &[u64], matching: &[(u32, u32)]) {
        let p = requests.len();
        let mut in_used = vec![false; p];
        let mut out_used = vec![false; p];
        for &(i, o) in matching {
            assert!(requests[i as usize] & (1 << o) != 0, "match without request");
            assert!(!in_used[i as usize] && !out_used[o as usize], "port reused");
            in_used[i as usize] = true;
            out_used[o as usize] = true;
        }
        for i in 0..p {
            for o in 0..p {
                if requests[i] & (1 << o) != 0 {
                    assert!(
                        in_used[i] || out_used[o],
                        "unmatched request pair ({i},{o}) left behind: {matching:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn islip_disjoint_requests_all_matched() {
        let mut g = vec![0; 2];
        let mut a = vec![0; 2];
        let m = islip_arbitrate(&[0b01, 0b10], &mut g, &mut a, 2);
        assert_eq!(m.len(), 2);
        assert_valid_maximal(&[0b01, 0b10], &m);
    }

    #[test]
    fn islip_contended_square_is_maximal_either_way() {
        // Inputs 0 and 1 both want output 0; input 0 also wants output 1.
        // Depending on where output 0's grant pointer sits, iSLIP finds
        // either the size-2 matching {(0,1),(1,0)} or the size-1 {(0,0)} —
        // both maximal (no request pair with both sides free remains).
        let requests = [0b11, 0b01];
        let m1 = islip_arbitrate(&requests, &mut vec![0; 2], &mut vec![0; 2], 2);
        assert_eq!(m1, vec![(0, 0)]);
        assert_valid_maximal(&requests, &m1);
        let m2 = islip_arbitrate(&requests, &mut vec![1, 0], &mut vec![0; 2], 2);
        assert_eq!(m2.len(), 2);
        assert!(m2.contains(&(0, 1)) && m2.contains(&(1, 0)));
        assert_valid_maximal(&requests, &m2);
    }

    #[test]
    fn islip_empty_requests_empty_matching() {
        let mut g = vec![0; 4];
        let mut a = vec![0; 4];
        assert!(islip_arbitrate(&[0; 4], &mut g, &mut a, 4).is_empty());
        assert_eq!(g, vec![0; 4]);
        assert_eq!(a, vec![0; 4]);
    }

    #[test]
    fn islip_pointer_updates_only_first_round() {
        // Both inputs request both outputs; pointers all start at 0.
        let requests = [0b11, 0b11];
        let mut g = vec![0; 2];
        let mut a = vec![0; 2];
        let m = islip_arbitrate(&requests, &mut g, &mut a, 2);
        // Round 1: both outputs grant input 0; it accepts output 0.
        // Round 2: output 1 grants input 1, which accepts — a second match,
        // but made after round 1, so only (0,0) moves pointers.
        assert_eq!(m.len(), 2);
        assert!(m.contains(&(0, 0)) && m.contains(&(1, 1)));
        assert_eq!(g, vec![1, 0]);
        assert_eq!(a, vec![1, 0]);
        // Next epoch, same full load: the moved pointers now pair the ports
        // the other way — desynchronization gives both outputs work again.
        let m2 = islip_arbitrate(&requests, &mut g, &mut a, 2);
        assert_eq!(m2.len(), 2);
        assert!(m2.contains(&(0, 1)) && m2.contains(&(1, 0)));
    }

    #[test]
    fn islip_exhaustive_small_validity() {
        // Every 3×3 request matrix from a few pointer postures: the matching
        // must always be valid and maximal.
        for bits in 0u32..512 {
            let requests = [
                (bits & 0b111) as u64,
                ((bits >> 3) & 0b111) as u64,
                ((bits >> 6) & 0b111) as u64,
            ];
            for posture in 0..3u32 {
                let mut g = vec![posture; 3];
                let mut a = vec![(posture + 1) % 3; 3];
                let m = islip_arbitrate(&requests, &mut g, &mut a, 3);
                assert_valid_maximal(&requests, &m);
            }
        }
    }

    #[test]
    fn voq_lifts_head_of_line_blocking() {
        // Two inputs; input 0 holds packets for two different up ports,
        // input 1 for the first of them. With VOQs both up links can be fed
        // in one epoch; without, input 0's second packet is stuck behind its
        // head and only one link moves.
        let rlft = build_rlft(RlftParams { ports: 4, stages: 2 }).unwrap();
        let cfg = RoutingConfig::deterministic();
        let pos = SwitchPosition { stage: 1, index: 0 };
        // dst 4 → up digit 0 → port 2; dst 5 → up digit 1 → port 3.
        let run = |voq: bool| {
            let mut rng = rng();
            let params = SwitchParams { voq, ..SwitchParams::default() };
            let mut sw = SwitchState::new(&rlft, pos, 1, &params);
            sw.on_packet_arrival(&rlft, &cfg, &mut rng, 0, pkt(1, 4, 0)).unwrap();
            sw.on_packet_arrival(&rlft, &cfg, &mut rng, 0, pkt(2, 5, 0)).unwrap();
            sw.on_packet_arrival(&rlft, &cfg, &mut rng, 1, pkt(3, 4, 0)).unwrap();
            sw.route_pending_heads(&rlft, &cfg, &mut rng).unwrap();
            // Point output 2's grant pointer at input 1 so the shared output
            // prefers the input that has no alternative.
            sw.grant_ptr[2] = 1;
            sw.arbitrate().len()
        };
        assert_eq!(run(true), 2);
        assert_eq!(run(false), 1);
    }

    #[test]
    fn voq_routes_at_arrival_not_at_head() {
        // Under VOQ the queue lane is fixed at arrival time, so two packets
        // to different outputs occupy different lanes immediately.
        let rlft = build_rlft(RlftParams { ports: 4, stages: 2 }).unwrap();
        let cfg = RoutingConfig::deterministic();
        let mut rng = rng();
        let params = SwitchParams { voq: true, ..SwitchParams::default() };
        let mut sw =
            SwitchState::new(&rlft, SwitchPosition { stage: 1, index: 0 }, 1, &params);
        sw.on_packet_arrival(&rlft, &cfg, &mut rng, 0, pkt(1, 4, 0)).unwrap();
        sw.on_packet_arrival(&rlft, &cfg, &mut rng, 0, pkt(2, 5, 0)).unwrap();
        assert_eq!(sw.collect_requests()[0], 0b1100);
        assert_eq!(sw.occupancy(0, 0), 2);
    }

    #[test]
    fn vc_round_robin_alternates_between_contending_heads() {
        // Two VCs at one input, both heads routed to the same output: the
        // round-robin pointer must alternate which VC gets served.
        let rlft = build_rlft(RlftParams { ports: 4, stages: 3 }).unwrap();
        let cfg = RoutingConfig::deterministic();
        let mut rng = rng();
        let mut sw = SwitchState::new(
            &rlft,
            SwitchPosition { stage: 1, index: 0 },
            2,
            &SwitchParams::default(),
        );
        for i in 0..2 {
            sw.on_packet_arrival(&rlft, &cfg, &mut rng, 0, pkt(10 + i, 9, 0)).unwrap();
            sw.on_packet_arrival(&rlft, &cfg, &mut rng, 0, pkt(20 + i, 9, 1)).unwrap();
        }
        let mut served = Vec::new();
        for _ in 0..4 {
            sw.route_pending_heads(&rlft, &cfg, &mut rng).unwrap();
            let m = sw.arbitrate();
            assert_eq!(m.len(), 1);
            let moved = sw.forward_matched(&m).unwrap();
            served.push(moved[0].packet.vc);
        }
        assert_eq!(served, vec![0, 1, 0, 1]);
    }
}
