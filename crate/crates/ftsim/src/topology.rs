//! Real-life fat-tree (RLFT) topology: sizes, wiring, shortest-path
//! enumeration, and per-port reachable-destination sets.
//!
//! An RLFT(K, T) is built from switches with P = 2K ports arranged in T
//! stages. Stages 1..T−1 have 2K^(T−1) switches each with K downward ports
//! (0..K−1) and K upward ports (K..2K−1); the top stage T has K^(T−1)
//! switches whose 2K ports are all downward. N = 2K^T end-nodes hang off the
//! stage-1 switches, K per switch. Between consecutive stages the wiring is
//! butterfly-style: switches are grouped so that a group at stage t spans K^t
//! consecutive nodes, and the position of a switch within its group encodes
//! exactly the sequence of upward port choices that reaches it. That digit
//! structure is what gives D-mod-K routing its closed form and every
//! inter-group node pair exactly K^(T−1) shortest paths.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::routing::{self, RoutingConfig};
use crate::{Error, Result};

/// End-node identifier in `0..N`.
pub type NodeId = u32;

/// Default cap on `N` so accidental huge parameters fail fast.
pub const DEFAULT_NODE_LIMIT: u64 = 65536;

/// Construction parameters for an RLFT.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RlftParams {
    /// Ports per switch, P. Must be even and ≥ 2; the arity is K = P/2.
    pub ports: u32,
    /// Number of switch stages, T ≥ 1.
    pub stages: u32,
}

impl RlftParams {
    /// Arity K = P/2.
    pub fn arity(&self) -> u32 {
        self.ports / 2
    }
}

/// A switch's coordinates: stage in `1..=T`, index within the stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SwitchPosition {
    /// Stage, counted from 1 (leaf stage) to T (top stage).
    pub stage: u32,
    /// Index within the stage, 0-based, left to right.
    pub index: u32,
}

impl fmt::Display for SwitchPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sw({},{})", self.stage, self.index)
    }
}

/// Either side of a link: an end-node or a switch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Node(NodeId),
    Switch(SwitchPosition),
}

/// One full-duplex link. `lower` is the child side (closer to the nodes),
/// `upper` the parent side; packets moving `lower → upper` travel upward.
/// Each side is (endpoint, port index on that endpoint); end-nodes have a
/// single port 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Link {
    pub lower: (Endpoint, u32),
    pub upper: (Endpoint, u32),
}

/// A shortest path, as the sequence of (switch, output port) hops from the
/// source's leaf switch to the destination's leaf switch. The final hop's
/// output port is the destination's attachment port.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Path {
    pub hops: Vec<(SwitchPosition, u32)>,
}

/// An immutable RLFT instance.
#[derive(Clone, Debug)]
pub struct Rlft {
    params: RlftParams,
    k: u32,
    t: u32,
    n_nodes: u32,
    n_switches: u32,
    /// `kpow[i]` = K^i, for i in 0..=T.
    kpow: Vec<u64>,
    /// Switches per stage, index 0 = stage 1.
    stage_sizes: Vec<u32>,
    /// Flat-id offset of each stage (prefix sums of `stage_sizes`).
    stage_offsets: Vec<u32>,
    links: Vec<Link>,
}

/// Build an RLFT with the default node limit.
pub fn build_rlft(params: RlftParams) -> Result<Rlft> {
    build_rlft_with_limit(params, DEFAULT_NODE_LIMIT)
}

/// Build an RLFT, rejecting topologies with more than `node_limit` end-nodes.
pub fn build_rlft_with_limit(params: RlftParams, node_limit: u64) -> Result<Rlft> {
    if params.ports < 2 || params.ports % 2 != 0 {
        return Err(Error::Topology(format!(
            "ports must be even and >= 2, got {}",
            params.ports
        )));
    }
    if params.stages < 1 {
        return Err(Error::Topology("stages must be >= 1".into()));
    }
    let k = params.arity() as u64;
    let t = params.stages;
    let mut kpow = Vec::with_capacity(t as usize + 1);
    kpow.push(1u64);
    for _ in 0..t {
        let next = kpow.last().unwrap().checked_mul(k).ok_or_else(|| {
            Error::Topology(format!("K^T overflows for K={k}, T={t}"))
        })?;
        kpow.push(next);
    }
    let n_nodes = 2 * kpow[t as usize];
    if n_nodes > node_limit {
        return Err(Error::Topology(format!(
            "N = 2*{k}^{t} = {n_nodes} exceeds the node limit {node_limit}"
        )));
    }
    let per_mid_stage = 2 * kpow[(t - 1) as usize];
    let top_stage = kpow[(t - 1) as usize];
    let mut stage_sizes = Vec::with_capacity(t as usize);
    let mut stage_offsets = Vec::with_capacity(t as usize);
    let mut total = 0u32;
    for s in 1..=t {
        let size = if s < t { per_mid_stage } else { top_stage } as u32;
        stage_offsets.push(total);
        stage_sizes.push(size);
        total += size;
    }
    let mut rlft = Rlft {
        params,
        k: k as u32,
        t,
        n_nodes: n_nodes as u32,
        n_switches: total,
        kpow,
        stage_sizes,
        stage_offsets,
        links: Vec::new(),
    };
    rlft.links = rlft.build_links();
    Ok(rlft)
}

impl Rlft {
    fn build_links(&self) -> Vec<Link> {
        let mut links = Vec::new();
        // Node attachment links.
        for n in 0..self.n_nodes {
            links.push(Link {
                lower: (Endpoint::Node(n), 0),
                upper: (
                    Endpoint::Switch(SwitchPosition {
                        stage: 1,
                        index: self.leaf_switch(n),
                    }),
                    self.attach_port(n),
                ),
            });
        }
        // Inter-stage links, from each non-top switch's upward ports.
        for stage in 1..self.t {
            for index in 0..self.stage_size(stage) {
                let pos = SwitchPosition { stage, index };
                for u in 0..self.k {
                    let (parent, parent_port) = self.up_peer(pos, u);
                    links.push(Link {
                        lower: (Endpoint::Switch(pos), self.k + u),
                        upper: (Endpoint::Switch(parent), parent_port),
                    });
                }
            }
        }
        links
    }

    pub fn params(&self) -> RlftParams {
        self.params
    }

    /// Arity K (upward ports per non-top switch).
    pub fn arity(&self) -> u32 {
        self.k
    }

    /// Number of stages T.
    pub fn stages(&self) -> u32 {
        self.t
    }

    /// Ports per switch, P = 2K.
    pub fn ports_per_switch(&self) -> u32 {
        self.params.ports
    }

    /// Total end-nodes N = 2K^T.
    pub fn node_count(&self) -> u32 {
        self.n_nodes
    }

    /// Total switches S = K^(T−1)·(2T−1).
    pub fn switch_count(&self) -> u32 {
        self.n_switches
    }

    /// K^i for i ≤ T.
    pub fn kpow(&self, i: u32) -> u64 {
        self.kpow[i as usize]
    }

    /// Switches in `stage` (1-based).
    pub fn stage_size(&self, stage: u32) -> u32 {
        self.stage_sizes[(stage - 1) as usize]
    }

    /// Downward ports of a switch in `stage`: K below the top, 2K at the top.
    pub fn down_port_count(&self, stage: u32) -> u32 {
        if stage == self.t {
            2 * self.k
        } else {
            self.k
        }
    }

    /// Upward ports of a switch in `stage` (0 at the top).
    pub fn up_port_count(&self, stage: u32) -> u32 {
        self.params.ports - self.down_port_count(stage)
    }

    /// The full-duplex link table (node attachments first, then inter-stage
    /// links by stage, switch, upward port). Deterministic for fixed params.
    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// Flat switch id in `0..switch_count()`, ordered by (stage, index).
    pub fn flat_id(&self, pos: SwitchPosition) -> u32 {
        self.stage_offsets[(pos.stage - 1) as usize] + pos.index
    }

    /// Inverse of [`Rlft::flat_id`].
    pub fn position_of(&self, flat: u32) -> SwitchPosition {
        let mut stage = 1;
        for s in 1..=self.t {
            if flat >= self.stage_offsets[(s - 1) as usize] {
                stage = s;
            }
        }
        SwitchPosition {
            stage,
            index: flat - self.stage_offsets[(stage - 1) as usize],
        }
    }

    /// All switch positions, ordered by (stage, index).
    pub fn switch_positions(&self) -> impl Iterator<Item = SwitchPosition> + '_ {
        (1..=self.t).flat_map(move |stage| {
            (0..self.stage_size(stage)).map(move |index| SwitchPosition { stage, index })
        })
    }

    /// Stage-1 switch index hosting `node`. Leaves have K node-facing ports,
    /// except in the degenerate single-stage machine where the one switch is
    /// the top and all 2K ports face nodes.
    pub fn leaf_switch(&self, node: NodeId) -> u32 {
        node / self.down_port_count(1)
    }

    /// Downward port of `node`'s leaf switch that attaches it.
    pub fn attach_port(&self, node: NodeId) -> u32 {
        node % self.down_port_count(1)
    }

    /// The contiguous range of nodes reachable strictly downward from a
    /// switch. A stage-t switch (t < T) in group g spans nodes
    /// g·K^t .. (g+1)·K^t; top-stage switches span every node.
    pub fn span(&self, pos: SwitchPosition) -> std::ops::Range<NodeId> {
        if pos.stage == self.t {
            0..self.n_nodes
        } else {
            let group = pos.index as u64 / self.kpow(pos.stage - 1);
            let lo = group * self.kpow(pos.stage);
            (lo as NodeId)..((lo + self.kpow(pos.stage)) as NodeId)
        }
    }

    /// Parent of a non-top switch through upward-port index `u` (0..K):
    /// returns (parent position, parent's downward port). Panics if called on
    /// the top stage or with `u >= K`.
    pub fn up_peer(&self, pos: SwitchPosition, u: u32) -> (SwitchPosition, u32) {
        assert!(pos.stage < self.t, "top-stage switches have no upward ports");
        assert!(u < self.k, "upward-port index {u} out of range");
        let t = pos.stage;
        let kp = self.kpow(t - 1);
        let g = pos.index as u64 / kp;
        let j = pos.index as u64 % kp;
        if t + 1 < self.t {
            // Parent group ⌊g/K⌋; within it, the parent's position gains the
            // chosen digit u at place t−1.
            let parent_index = (g / self.k as u64) * self.kpow(t) + (u as u64 * kp + j);
            let parent_port = (g % self.k as u64) as u32;
            (
                SwitchPosition {
                    stage: t + 1,
                    index: parent_index as u32,
                },
                parent_port,
            )
        } else {
            // Top stage: one group; the 2K groups below map onto the 2K
            // downward ports directly.
            let parent_index = u as u64 * kp + j;
            (
                SwitchPosition {
                    stage: self.t,
                    index: parent_index as u32,
                },
                g as u32,
            )
        }
    }

    /// Child reached through downward port `c`: an end-node for stage-1
    /// switches (or a single-stage top), otherwise (child switch, child's
    /// absolute upward port). Panics on an out-of-range port.
    pub fn down_peer(&self, pos: SwitchPosition, c: u32) -> (Endpoint, u32) {
        assert!(c < self.down_port_count(pos.stage), "downward port {c} out of range");
        let t = pos.stage;
        if t == 1 && self.t == 1 {
            // Single-stage tree: the lone top switch attaches all 2K nodes.
            return (Endpoint::Node(c), 0);
        }
        if t == 1 {
            return (Endpoint::Node(pos.index * self.k + c), 0);
        }
        let (child_index, child_up) = if t == self.t {
            let kp = self.kpow(self.t - 2);
            let j_child = pos.index as u64 % kp;
            (c as u64 * kp + j_child, (pos.index as u64 / kp) as u32)
        } else {
            let kp = self.kpow(t - 2);
            let g = pos.index as u64 / self.kpow(t - 1);
            let j = pos.index as u64 % self.kpow(t - 1);
            let child_g = g * self.k as u64 + c as u64;
            (child_g * kp + j % kp, (j / kp) as u32)
        };
        (
            Endpoint::Switch(SwitchPosition {
                stage: t - 1,
                index: child_index as u32,
            }),
            self.k + child_up,
        )
    }

    /// Neighbor through any absolute port (downward ports first, then
    /// upward): returns (endpoint, port index on the neighbor).
    pub fn peer(&self, pos: SwitchPosition, port: u32) -> (Endpoint, u32) {
        let down = self.down_port_count(pos.stage);
        if port < down {
            self.down_peer(pos, port)
        } else {
            let (sw, p) = self.up_peer(pos, port - down);
            (Endpoint::Switch(sw), p)
        }
    }

    /// The stage of the nearest common ancestor switches of `src` and `dst`:
    /// the smallest stage whose spans contain both (top stage at worst).
    pub fn ancestor_stage(&self, src: NodeId, dst: NodeId) -> u32 {
        for s in 1..self.t {
            if src as u64 / self.kpow(s) == dst as u64 / self.kpow(s) {
                return s;
            }
        }
        self.t
    }

    /// The unique downward output port toward `dst` from a switch on its
    /// downward path. Errors if `dst` is not in the switch's span.
    pub fn down_port_toward(&self, pos: SwitchPosition, dst: NodeId) -> Result<u32> {
        if !self.span(pos).contains(&dst) {
            return Err(Error::Routing(format!(
                "destination {dst} is not below {pos}"
            )));
        }
        let t = pos.stage;
        let port = if t == self.t {
            // Top-stage downward ports select among the 2K top-level groups
            // (or among all nodes when T = 1).
            (dst as u64 / self.kpow(self.t - 1)) as u32
        } else {
            ((dst as u64 / self.kpow(t - 1)) % self.k as u64) as u32
        };
        Ok(port)
    }
}

/// Enumerate every shortest path from `src` to `dst`: all upward
/// port-choice sequences to the nearest-common-ancestor stage, then the
/// unique downward chain. Paths are returned in a fixed deterministic order.
pub fn enumerate_shortest_paths(rlft: &Rlft, src: NodeId, dst: NodeId) -> Result<Vec<Path>> {
    if src >= rlft.node_count() || dst >= rlft.node_count() {
        return Err(Error::Topology(format!(
            "node id out of range (src={src}, dst={dst}, N={})",
            rlft.node_count()
        )));
    }
    if src == dst {
        return Err(Error::Topology(format!(
            "degenerate pair: src = dst = {src}"
        )));
    }
    let s_star = rlft.ancestor_stage(src, dst);
    let ups = (s_star - 1) as usize;
    let count = rlft.kpow(s_star - 1);
    let mut paths = Vec::with_capacity(count as usize);
    for code in 0..count {
        let mut hops = Vec::with_capacity(2 * s_star as usize - 1);
        let mut pos = SwitchPosition {
            stage: 1,
            index: rlft.leaf_switch(src),
        };
        let mut rest = code;
        for _ in 0..ups {
            let u = (rest % rlft.arity() as u64) as u32;
            rest /= rlft.arity() as u64;
            hops.push((pos, rlft.arity() + u));
            let (parent, _) = rlft.up_peer(pos, u);
            pos = parent;
        }
        loop {
            let port = rlft.down_port_toward(pos, dst)?;
            hops.push((pos, port));
            if pos.stage == 1 {
                break;
            }
            match rlft.down_peer(pos, port) {
                (Endpoint::Switch(child), _) => pos = child,
                (Endpoint::Node(_), _) => break, // single-stage tree
            }
        }
        paths.push(Path { hops });
    }
    Ok(paths)
}

fn empty_port_map(rlft: &Rlft) -> BTreeMap<(SwitchPosition, u32), BTreeSet<NodeId>> {
    let mut map = BTreeMap::new();
    for pos in rlft.switch_positions() {
        for port in 0..rlft.ports_per_switch() {
            if port >= rlft.down_port_count(pos.stage) + rlft.up_port_count(pos.stage) {
                continue;
            }
            map.insert((pos, port), BTreeSet::new());
        }
    }
    map
}

/// Does the routing config allow upward-port index `p` at `stage` for `dst`?
/// This is the union over all credit states of what the selection function
/// can return: the D-mod-K port always, plus (for adaptive modes at permitted
/// stages) every port in the Δ-congruence class of the destination; oblivious
/// routing allows every port.
fn selection_allows(rlft: &Rlft, cfg: &RoutingConfig, stage: u32, dst: NodeId, p: u32) -> bool {
    let digit = ((dst as u64 / rlft.kpow(stage - 1)) % rlft.arity() as u64) as u32;
    match cfg.mode {
        routing::RoutingMode::Deterministic => p == digit,
        routing::RoutingMode::Oblivious => true,
        routing::RoutingMode::Adaptive => {
            p == digit
                || (cfg.stage_permits(stage) && p % cfg.delta == dst % cfg.delta)
        }
    }
}

/// For every switch output port, the set of destinations whose allowed
/// routes (union over all credit states) traverse that port — computed
/// analytically from the digit structure of the wiring, without enumerating
/// routes. Keys are (switch, absolute output port).
pub fn destinations_per_port(
    rlft: &Rlft,
    cfg: &RoutingConfig,
) -> BTreeMap<(SwitchPosition, u32), BTreeSet<NodeId>> {
    let mut map = empty_port_map(rlft);
    let k = rlft.arity();
    for pos in rlft.switch_positions() {
        let t = pos.stage;
        let kp = rlft.kpow(t - 1);
        let j = pos.index as u64 % kp;
        // A switch's within-group position j encodes the upward-port choices
        // that reached it: choice at stage s is digit s−1 of j (base K).
        let up_digit = |s: u32| ((j / rlft.kpow(s - 1)) % k as u64) as u32;
        // Upward ports: destinations outside the span whose selection sets
        // admit this switch's position digits below and port u here.
        for u in 0..rlft.up_port_count(t) {
            let set = map.get_mut(&(pos, k + u)).unwrap();
            let span = rlft.span(pos);
            for dst in 0..rlft.node_count() {
                if span.contains(&dst) {
                    continue;
                }
                let below_ok = (1..t).all(|s| selection_allows(rlft, cfg, s, dst, up_digit(s)));
                if below_ok && selection_allows(rlft, cfg, t, dst, u) {
                    set.insert(dst);
                }
            }
        }
        // Downward ports: destinations in the child's subtree whose selection
        // sets admit this switch's position digits; the descent itself is
        // unique, so only the upward half constrains membership.
        for c in 0..rlft.down_port_count(t) {
            let set = map.get_mut(&(pos, c)).unwrap();
            let child_range = match rlft.down_peer(pos, c) {
                (Endpoint::Node(n), _) => n..n + 1,
                (Endpoint::Switch(child), _) => rlft.span(child),
            };
            for dst in child_range {
                let ok = (1..t).all(|s| selection_allows(rlft, cfg, s, dst, up_digit(s)));
                if ok {
                    set.insert(dst);
                }
            }
        }
    }
    map
}

/// Brute-force counterpart of [`destinations_per_port`]: enumerate, for every
/// (src, dst) pair, every route the routing module's primitives allow, walk
/// it across the materialized wiring, and record each traversed output port.
/// Used as the independent oracle for the table checker.
pub fn destinations_per_port_bruteforce(
    rlft: &Rlft,
    cfg: &RoutingConfig,
) -> BTreeMap<(SwitchPosition, u32), BTreeSet<NodeId>> {
    let mut map = empty_port_map(rlft);
    let k = rlft.arity();
    for src in 0..rlft.node_count() {
        for dst in 0..rlft.node_count() {
            if src == dst {
                continue;
            }
            let s_star = rlft.ancestor_stage(src, dst);
            // Depth-first walk over the allowed upward choices; each stack
            // entry is (switch, index of the next upward choice to try).
            let mut stack = vec![(
                SwitchPosition {
                    stage: 1,
                    index: rlft.leaf_switch(src),
                },
                0usize,
            )];
            while let Some((pos, next_choice)) = stack.pop() {
                if pos.stage == s_star {
                    // Turnaround: record the unique downward chain from here.
                    let mut p = pos;
                    loop {
                        let port = routing::down_port(rlft, p, dst)
                            .expect("descent stays inside the span");
                        map.get_mut(&(p, port)).unwrap().insert(dst);
                        match rlft.down_peer(p, port) {
                            (Endpoint::Switch(child), _) => p = child,
                            (Endpoint::Node(_), _) => break,
                        }
                    }
                    continue;
                }
                let allowed = routing::selectable_up_ports(k, pos.stage, dst, cfg);
                if next_choice < allowed.len() {
                    let u = allowed[next_choice];
                    stack.push((pos, next_choice + 1));
                    map.get_mut(&(pos, k + u)).unwrap().insert(dst);
                    let (parent, _) = rlft.up_peer(pos, u);
                    stack.push((parent, 0));
                }
            }
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::RoutingConfig;
    use std::collections::BTreeSet;

    fn rlft(ports: u32, stages: u32) -> Rlft {
        build_rlft(RlftParams { ports, stages }).unwrap()
    }

    #[test]
    fn sizes_match_closed_forms() {
        // N = 2K^T with K = P/2; S = K^(T−1)·(2T−1).
        let big = rlft(36, 3);
        assert_eq!(big.node_count(), 11664);
        assert_eq!(big.switch_count(), 1620);
        let small = rlft(4, 2);
        assert_eq!(small.node_count(), 8);
        assert_eq!(small.switch_count(), 6);
        let tiny = rlft(2, 1);
        assert_eq!(tiny.node_count(), 2);
        assert_eq!(tiny.switch_count(), 1);
        let mid = rlft(8, 3);
        assert_eq!(mid.node_count(), 128);
        assert_eq!(mid.switch_count(), 80);
    }

    #[test]
    fn bad_params_rejected() {
        assert!(build_rlft(RlftParams { ports: 5, stages: 2 }).is_err());
        assert!(build_rlft(RlftParams { ports: 0, stages: 2 }).is_err());
        assert!(build_rlft(RlftParams { ports: 4, stages: 0 }).is_err());
        // 2·18^4 = 209952 exceeds the default 65536 node limit.
        assert!(build_rlft(RlftParams { ports: 36, stages: 4 }).is_err());
        assert!(build_rlft_with_limit(RlftParams { ports: 36, stages: 4 }, 1 << 20).is_ok());
    }

    #[test]
    fn build_is_deterministic() {
        let a = rlft(6, 3);
        let b = rlft(6, 3);
        assert_eq!(a.links(), b.links());
    }

    #[test]
    fn wiring_is_a_consistent_duplex_graph() {
        for (p, t) in [(2, 1), (2, 2), (4, 2), (4, 3), (6, 2), (6, 3), (8, 3)] {
            let r = rlft(p, t);
            // Every switch port appears in exactly one link, and the two
            // ends of each link agree on each other's identity.
            let mut seen: BTreeSet<(Endpoint, u32)> = BTreeSet::new();
            for link in r.links() {
                for side in [link.lower, link.upper] {
                    assert!(seen.insert(side), "port used twice: {side:?}");
                }
            }
            let expected_ports: usize = r.node_count() as usize
                + r.switch_positions()
                    .map(|pos| {
                        (r.down_port_count(pos.stage) + r.up_port_count(pos.stage)) as usize
                    })
                    .sum::<usize>();
            assert_eq!(seen.len(), expected_ports, "P={p} T={t}");
            // up_peer and down_peer are inverses.
            for pos in r.switch_positions() {
                if pos.stage < r.stages() {
                    for u in 0..r.arity() {
                        let (parent, parent_port) = r.up_peer(pos, u);
                        let (child, child_port) = r.down_peer(parent, parent_port);
                        assert_eq!(child, Endpoint::Switch(pos));
                        assert_eq!(child_port, r.arity() + u);
                    }
                }
                for c in 0..r.down_port_count(pos.stage) {
                    match r.down_peer(pos, c) {
                        (Endpoint::Node(n), _) => {
                            assert_eq!(r.leaf_switch(n), pos.index);
                            assert_eq!(r.attach_port(n), c);
                        }
                        (Endpoint::Switch(child), port) => {
                            let (back, back_port) = r.up_peer(child, port - r.arity());
                            assert_eq!(back, pos);
                            assert_eq!(back_port, c);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn spans_partition_each_stage() {
        let r = rlft(6, 3);
        for stage in 1..r.stages() {
            let mut covered = vec![0u32; r.node_count() as usize];
            for index in 0..r.stage_size(stage) {
                for n in r.span(SwitchPosition { stage, index }) {
                    covered[n as usize] += 1;
                }
            }
            // Each node sits under exactly K^(t−1) switches of stage t (its
            // ancestor group), since groups share their span.
            let per_node = r.kpow(stage - 1) as u32;
            assert!(covered.iter().all(|&c| c == per_node));
        }
    }

    #[test]
    fn flat_ids_round_trip() {
        let r = rlft(6, 3);
        for (i, pos) in r.switch_positions().enumerate() {
            assert_eq!(r.flat_id(pos), i as u32);
            assert_eq!(r.position_of(i as u32), pos);
        }
    }

    /// Independent graph-search oracle: all minimal-length simple switch
    /// paths, discovered from the materialized link table alone.
    fn oracle_paths(r: &Rlft, src: NodeId, dst: NodeId) -> BTreeSet<Vec<(SwitchPosition, u32)>> {
        use std::collections::HashMap;
        // adjacency[switch] = [(port, neighbor switch)]
        let mut adj: HashMap<SwitchPosition, Vec<(u32, SwitchPosition)>> = HashMap::new();
        for link in r.links() {
            if let ((Endpoint::Switch(a), pa), (Endpoint::Switch(b), pb)) = (link.lower, link.upper)
            {
                adj.entry(a).or_default().push((pa, b));
                adj.entry(b).or_default().push((pb, a));
            }
        }
        let start = SwitchPosition { stage: 1, index: r.leaf_switch(src) };
        let goal = SwitchPosition { stage: 1, index: r.leaf_switch(dst) };
        // BFS for the minimal switch count.
        let mut dist: HashMap<SwitchPosition, usize> = HashMap::new();
        dist.insert(start, 1);
        let mut frontier = vec![start];
        while !frontier.is_empty() && !dist.contains_key(&goal) {
            let mut next = Vec::new();
            for pos in frontier {
                let d = dist[&pos];
                for &(_, nb) in adj.get(&pos).into_iter().flatten() {
                    dist.entry(nb).or_insert_with(|| {
                        next.push(nb);
                        d + 1
                    });
                }
            }
            frontier = next;
        }
        let min_len = dist[&goal];
        // DFS enumerating all simple paths of exactly min_len switches.
        let mut out = BTreeSet::new();
        let mut hops: Vec<(SwitchPosition, u32)> = Vec::new();
        fn dfs(
            adj: &HashMap<SwitchPosition, Vec<(u32, SwitchPosition)>>,
            r: &Rlft,
            pos: SwitchPosition,
            goal: SwitchPosition,
            dst: NodeId,
            left: usize,
            hops: &mut Vec<(SwitchPosition, u32)>,
            out: &mut BTreeSet<Vec<(SwitchPosition, u32)>>,
        ) {
            if left == 1 {
                if pos == goal {
                    let mut full = hops.clone();
                    full.push((pos, r.attach_port(dst)));
                    out.insert(full);
                }
                return;
            }
            for &(port, nb) in adj.get(&pos).into_iter().flatten() {
                if hops.iter().any(|&(h, _)| h == nb) || nb == pos {
                    continue;
                }
                hops.push((pos, port));
                dfs(adj, r, nb, goal, dst, left - 1, hops, out);
                hops.pop();
            }
        }
        if min_len == 1 {
            out.insert(vec![(start, r.attach_port(dst))]);
        } else {
            dfs(&adj, r, start, goal, dst, min_len, &mut hops, &mut out);
        }
        out
    }

    #[test]
    fn paths_match_graph_search_oracle() {
        for (p, t) in [(4, 2), (4, 3), (6, 2)] {
            let r = rlft(p, t);
            for src in 0..r.node_count() {
                for dst in 0..r.node_count() {
                    if src == dst {
                        continue;
                    }
                    let got: BTreeSet<_> = enumerate_shortest_paths(&r, src, dst)
                        .unwrap()
                        .into_iter()
                        .map(|p| p.hops)
                        .collect();
                    assert_eq!(got, oracle_paths(&r, src, dst), "P={p} T={t} {src}->{dst}");
                }
            }
        }
    }

    #[test]
    fn path_counts_follow_ancestor_stage() {
        // Count = K^(s−1) for nearest-common-ancestor stage s.
        for (p, t) in [(4, 2), (4, 3), (6, 2), (6, 3)] {
            let r = rlft(p, t);
            for src in 0..r.node_count() {
                for dst in 0..r.node_count() {
                    if src == dst {
                        continue;
                    }
                    let s = r.ancestor_stage(src, dst);
                    let paths = enumerate_shortest_paths(&r, src, dst).unwrap();
                    assert_eq!(paths.len() as u64, r.kpow(s - 1));
                }
            }
        }
    }

    #[test]
    fn inter_group_pairs_have_full_diversity() {
        // K=2, T=3: nodes in different top-level halves → K^(T−1) = 4 paths.
        let r = rlft(4, 3);
        let paths = enumerate_shortest_paths(&r, 0, 15).unwrap();
        assert_eq!(paths.len(), 4);
        // K=3, T=2: different groups → 3 paths.
        let r2 = rlft(6, 2);
        let paths2 = enumerate_shortest_paths(&r2, 0, 17).unwrap();
        assert_eq!(paths2.len(), 3);
    }

    #[test]
    fn same_leaf_pair_has_single_single_switch_path() {
        let r = rlft(4, 3);
        let paths = enumerate_shortest_paths(&r, 0, 1).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(
            paths[0].hops,
            vec![(SwitchPosition { stage: 1, index: 0 }, 1)]
        );
    }

    #[test]
    fn paths_are_monotone_and_bounded() {
        let r = rlft(6, 3);
        for (src, dst) in [(0, 1), (0, 7), (0, 53), (10, 20), (5, 42)] {
            for path in enumerate_shortest_paths(&r, src, dst).unwrap() {
                assert!(path.hops.len() <= 2 * r.stages() as usize - 1);
                // Stages rise to a single peak, then fall back to 1.
                let stages: Vec<u32> = path.hops.iter().map(|&(p, _)| p.stage).collect();
                let peak = *stages.iter().max().unwrap();
                let peak_at = stages.iter().position(|&s| s == peak).unwrap();
                assert!(stages[..=peak_at].windows(2).all(|w| w[1] == w[0] + 1));
                assert!(stages[peak_at..].windows(2).all(|w| w[1] == w[0] - 1));
                assert_eq!(*stages.last().unwrap(), 1);
                assert_eq!(path.hops.last().unwrap().1, r.attach_port(dst));
            }
        }
    }

    #[test]
    fn degenerate_and_invalid_pairs_error() {
        let r = rlft(4, 2);
        assert!(enumerate_shortest_paths(&r, 3, 3).is_err());
        assert!(enumerate_shortest_paths(&r, 0, 99).is_err());
    }

    #[test]
    fn destination_sets_match_pinned_counts() {
        // K=2, T=3 (N=16): deterministic routing puts (N−K)/K = 7
        // destinations on each stage-1 upward port; fully adaptive puts
        // N−K = 14 there; downward stage-1 ports always carry exactly 1.
        let r = rlft(4, 3);
        let det = destinations_per_port(&r, &RoutingConfig::deterministic());
        let any_leaf_up = &det[&(SwitchPosition { stage: 1, index: 0 }, 2)];
        assert_eq!(any_leaf_up.len(), 7);
        let full = destinations_per_port(&r, &RoutingConfig::fully_adaptive());
        assert_eq!(full[&(SwitchPosition { stage: 1, index: 0 }, 2)].len(), 14);
        for cfg in [RoutingConfig::deterministic(), RoutingConfig::fully_adaptive()] {
            let map = destinations_per_port(&r, &cfg);
            for pos in r.switch_positions().filter(|p| p.stage == 1) {
                for c in 0..r.arity() {
                    assert_eq!(map[&(pos, c)].len(), 1, "stage-1 down port carries its node");
                }
            }
        }
    }

    #[test]
    fn analytic_and_bruteforce_destination_sets_agree() {
        // Full set equality (not just cardinality) across modes on a small
        // topology; the dedicated table checker covers the larger matrix.
        let r = rlft(4, 3);
        for cfg in [
            RoutingConfig::deterministic(),
            RoutingConfig::oblivious(),
            RoutingConfig::fully_adaptive(),
            RoutingConfig::adaptive_delta(2),
        ] {
            let analytic = destinations_per_port(&r, &cfg);
            let brute = destinations_per_port_bruteforce(&r, &cfg);
            assert_eq!(analytic, brute, "cfg={cfg:?}");
        }
    }
}
