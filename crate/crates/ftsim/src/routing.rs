//! Output-port computation: deterministic D-mod-K, oblivious random choice,
//! and the restricted adaptive path-selection function.
//!
//! Upward routing works on *upward-port indices* 0..K (the engine adds K to
//! get the absolute port number); downward routing returns absolute downward
//! ports directly, since those are already 0-based. The adaptive selection
//! starts from the D-mod-K port and may escape to a restricted candidate set:
//! only at permitted stages, and only to upward ports congruent to the
//! destination modulo Δ. Escape is gated by one of three credit-triggered
//! policies:
//!
//! * **NoTH** — always scan the candidates for the most free credits;
//! * **TH** — scan only when the D-mod-K port's free credits fall below a
//!   low threshold (LTTh), and only accept candidates strictly above it;
//! * **2TH** — like TH, plus hysteresis: once triggered, a per-(port, VC)
//!   congested flag keeps adaptation on until credits recover past a high
//!   threshold (HTTh).

use rand::Rng;

use crate::topology::{NodeId, Rlft, SwitchPosition};
use crate::{Error, Result};

/// Routing family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoutingMode {
    /// Always the D-mod-K port.
    Deterministic,
    /// Uniform random upward port, ignoring credits.
    Oblivious,
    /// Restricted adaptive selection (see module docs).
    Adaptive,
}

/// Credit-triggering policy for adaptive escape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Triggering {
    NoTh,
    Th,
    TwoTh,
}

/// Which upward stages may adapt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageRestriction {
    /// Every upward stage.
    All,
    /// Exactly one stage; all other stages stay on D-mod-K.
    Only(u32),
}

/// Full routing configuration. Threshold fields are free-credit *counts*
/// (the config file carries fractions of per-VC capacity; the harness
/// converts at load time).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoutingConfig {
    pub mode: RoutingMode,
    pub triggering: Triggering,
    /// Low triggering threshold (free credits). Used by TH and 2TH.
    pub ltth: u32,
    /// High (release) threshold. Used by 2TH only.
    pub htth: u32,
    pub stages: StageRestriction,
    /// Candidate filter modulus Δ: 1 disables the filter; otherwise only
    /// upward ports with index ≡ dst (mod Δ) are candidates.
    pub delta: u32,
}

impl RoutingConfig {
    /// D-mod-K only.
    pub fn deterministic() -> Self {
        RoutingConfig {
            mode: RoutingMode::Deterministic,
            triggering: Triggering::NoTh,
            ltth: 0,
            htth: 0,
            stages: StageRestriction::All,
            delta: 1,
        }
    }

    /// Uniform random upward port at every stage.
    pub fn oblivious() -> Self {
        RoutingConfig {
            mode: RoutingMode::Oblivious,
            ..Self::deterministic()
        }
    }

    /// Unrestricted fully-adaptive selection: NoTH, all stages, Δ = 1.
    pub fn fully_adaptive() -> Self {
        RoutingConfig {
            mode: RoutingMode::Adaptive,
            ..Self::deterministic()
        }
    }

    /// Adaptive at every stage with a Δ port restriction (NoTH).
    pub fn adaptive_delta(delta: u32) -> Self {
        RoutingConfig {
            delta,
            ..Self::fully_adaptive()
        }
    }

    /// Does the restriction permit adapting at `stage`?
    pub fn stage_permits(&self, stage: u32) -> bool {
        match self.stages {
            StageRestriction::All => true,
            StageRestriction::Only(s) => s == stage,
        }
    }

    /// Validate against a topology's arity/stage count and the per-VC credit
    /// capacity.
    pub fn validate(&self, k: u32, stages: u32, vc_capacity: u32) -> Result<()> {
        if self.delta < 1 || self.delta > k {
            return Err(Error::Routing(format!(
                "delta must be in 1..={k}, got {}",
                self.delta
            )));
        }
        if self.delta > 1 && k % self.delta != 0 {
            return Err(Error::Routing(format!(
                "delta {} must divide the arity {k}",
                self.delta
            )));
        }
        if let StageRestriction::Only(s) = self.stages {
            if s < 1 || s >= stages {
                return Err(Error::Routing(format!(
                    "stage restriction {s} is not an upward stage (1..{})",
                    stages
                )));
            }
        }
        if self.mode == RoutingMode::Adaptive {
            match self.triggering {
                Triggering::NoTh => {}
                Triggering::Th => {
                    if self.ltth == 0 || self.ltth > vc_capacity {
                        return Err(Error::Routing(format!(
                            "ltth must be in 1..={vc_capacity}, got {}",
                            self.ltth
                        )));
                    }
                }
                Triggering::TwoTh => {
                    if self.ltth == 0 || self.ltth > vc_capacity {
                        return Err(Error::Routing(format!(
                            "ltth must be in 1..={vc_capacity}, got {}",
                            self.ltth
                        )));
                    }
                    if self.htth <= self.ltth || self.htth > vc_capacity {
                        return Err(Error::Routing(format!(
                            "htth must be in {}..={vc_capacity}, got {}",
                            self.ltth + 1,
                            self.htth
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Read-only view of the free credits a switch holds toward the next-stage
/// input buffers, per upward port and VC.
pub trait CreditView {
    /// Free credits for upward-port index `up_port` (0..K) on `vc`.
    fn free_credits(&self, up_port: u32, vc: usize) -> u32;
    /// Per-VC buffer capacity (a queue with this many free credits is empty).
    fn capacity(&self) -> u32;
}

/// A flat credit matrix, handy for tests and for adapters.
#[derive(Clone, Debug)]
pub struct CreditMatrix {
    /// Row-major `[up_port][vc]`.
    pub credits: Vec<u32>,
    pub vcs: usize,
    pub capacity: u32,
}

impl CreditView for CreditMatrix {
    fn free_credits(&self, up_port: u32, vc: usize) -> u32 {
        self.credits[up_port as usize * self.vcs + vc]
    }
    fn capacity(&self) -> u32 {
        self.capacity
    }
}

/// Per-(upward port, VC) congested flags, owned by one switch. Only the 2TH
/// policy ever sets them.
#[derive(Clone, Debug)]
pub struct CongestionFlags {
    vcs: usize,
    bits: Vec<bool>,
}

impl CongestionFlags {
    pub fn new(up_ports: u32, vcs: usize) -> Self {
        CongestionFlags {
            vcs,
            bits: vec![false; up_ports as usize * vcs],
        }
    }

    pub fn get(&self, up_port: u32, vc: usize) -> bool {
        self.bits[up_port as usize * self.vcs + vc]
    }

    pub fn set(&mut self, up_port: u32, vc: usize, value: bool) {
        self.bits[up_port as usize * self.vcs + vc] = value;
    }

    pub fn any(&self) -> bool {
        self.bits.iter().any(|&b| b)
    }
}

/// D-mod-K upward-port index at `pos` for `dst`: destination digit
/// ⌊dst / K^(stage−1)⌋ mod K. Errors at the top stage (no upward phase).
pub fn dmodk_up_port(rlft: &Rlft, pos: SwitchPosition, dst: NodeId) -> Result<u32> {
    if pos.stage >= rlft.stages() {
        return Err(Error::Routing(format!(
            "{pos} is a top-stage switch; no upward port exists"
        )));
    }
    Ok(dmodk_digit(rlft.arity(), pos.stage, dst))
}

/// The digit form of D-mod-K, usable without a topology handle.
pub fn dmodk_digit(k: u32, stage: u32, dst: NodeId) -> u32 {
    ((dst as u64 / (k as u64).pow(stage - 1)) % k as u64) as u32
}

/// The unique downward output port toward `dst`. Errors if `dst` is not in
/// the switch's subtree.
pub fn down_port(rlft: &Rlft, pos: SwitchPosition, dst: NodeId) -> Result<u32> {
    rlft.down_port_toward(pos, dst)
}

/// The Δ-filtered candidate list: all K upward-port indices if `delta` = 1,
/// otherwise exactly those with index ≡ dst (mod delta), ascending.
pub fn candidate_ports(dst: NodeId, k: u32, delta: u32) -> Vec<u32> {
    assert!(delta >= 1 && delta <= k, "delta out of range");
    if delta == 1 {
        (0..k).collect()
    } else {
        (0..k).filter(|p| p % delta == dst % delta).collect()
    }
}

/// Every upward port the configured routing could ever select at `stage` for
/// `dst`, over all credit states: the candidate class united with the
/// D-mod-K port for adaptive modes at permitted stages, the D-mod-K port
/// alone otherwise, all K ports for oblivious. Ascending order.
pub fn selectable_up_ports(k: u32, stage: u32, dst: NodeId, cfg: &RoutingConfig) -> Vec<u32> {
    let dmodk = dmodk_digit(k, stage, dst);
    match cfg.mode {
        RoutingMode::Deterministic => vec![dmodk],
        RoutingMode::Oblivious => (0..k).collect(),
        RoutingMode::Adaptive => {
            if cfg.stage_permits(stage) {
                let mut ports = candidate_ports(dst, k, cfg.delta);
                if let Err(at) = ports.binary_search(&dmodk) {
                    ports.insert(at, dmodk);
                }
                ports
            } else {
                vec![dmodk]
            }
        }
    }
}

/// Scan the Δ-filtered candidates for the strictly greatest credit count
/// above `floor`, keeping the D-mod-K port on a tie or when nothing beats
/// the floor. The first maximum in ascending port order wins; a fully free
/// queue ends the scan early.
fn max_credit_scan(
    k: u32,
    dst: NodeId,
    vc: usize,
    delta: u32,
    credits: &impl CreditView,
    dmodk: u32,
    floor: u32,
) -> u32 {
    let mut best = dmodk;
    let mut max_credits = floor;
    for p in candidate_ports(dst, k, delta) {
        let c = credits.free_credits(p, vc);
        if c > max_credits {
            max_credits = c;
            best = p;
            if max_credits == credits.capacity() {
                break;
            }
        }
    }
    best
}

/// The restricted path-selection function: returns the upward-port index
/// (0..K) for a packet to `dst` on `vc`. Covers the deterministic and
/// adaptive modes; oblivious selection is a separate random draw
/// ([`oblivious_port`]). With 2TH triggering this may flip the D-mod-K
/// port's congested flag.
pub fn restricted_path_selection(
    k: u32,
    pos: SwitchPosition,
    dst: NodeId,
    vc: usize,
    cfg: &RoutingConfig,
    credits: &impl CreditView,
    flags: &mut CongestionFlags,
) -> u32 {
    let dmodk = dmodk_digit(k, pos.stage, dst);
    if cfg.mode != RoutingMode::Adaptive || !cfg.stage_permits(pos.stage) {
        return dmodk;
    }
    match cfg.triggering {
        Triggering::NoTh => max_credit_scan(k, dst, vc, cfg.delta, credits, dmodk, 0),
        Triggering::Th => {
            if credits.free_credits(dmodk, vc) >= cfg.ltth {
                dmodk
            } else {
                max_credit_scan(k, dst, vc, cfg.delta, credits, dmodk, cfg.ltth)
            }
        }
        Triggering::TwoTh => {
            let free = credits.free_credits(dmodk, vc);
            if free < cfg.ltth || flags.get(dmodk, vc) {
                if free < cfg.htth {
                    // Still congested: hold the flag and adapt.
                    flags.set(dmodk, vc, true);
                    max_credit_scan(k, dst, vc, cfg.delta, credits, dmodk, cfg.ltth)
                } else {
                    // Recovered past the high threshold: release.
                    flags.set(dmodk, vc, false);
                    dmodk
                }
            } else {
                dmodk
            }
        }
    }
}

/// Oblivious choice: uniform over the K upward ports, from the caller's
/// seeded stream.
pub fn oblivious_port(k: u32, rng: &mut impl Rng) -> u32 {
    if k == 1 {
        return 0;
    }
    rng.random_range(0..k)
}
