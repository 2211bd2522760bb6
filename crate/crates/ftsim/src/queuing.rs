//! Static packet-to-VC mappings: single queue (1Q), destination-based (DBBM),
//! leaf-switch-relative (vFtree), and group-relative (Flow2SL).
//!
//! Every scheme assigns the VC once at injection from (src, dst) alone, and
//! the packet keeps it end to end — no remapping in flight. The
//! [`mapping_table`] operation projects a scheme through a routing config's
//! allowed route set to show, for every switch input buffer, which
//! destinations can occupy which VC; the congestion experiments' queue-
//! isolation arguments are all statements about that table.

use std::collections::{BTreeMap, BTreeSet};

use crate::routing::{self, RoutingConfig};
use crate::topology::{enumerate_shortest_paths, Endpoint, NodeId, Rlft, SwitchPosition};
use crate::{Error, Result};

/// Scheme family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    /// Everything in VC 0.
    OneQ,
    /// Destination modulo Q.
    Dbbm,
    /// Difference of destination and source leaf-switch indices, modulo Q.
    VFtree,
    /// Difference of destination and source node groups (N split into Q
    /// contiguous groups), modulo Q.
    Flow2Sl,
}

/// A queuing scheme: the mapping family plus the VC count Q.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueueScheme {
    pub kind: SchemeKind,
    pub vcs: usize,
}

impl QueueScheme {
    pub fn one_q() -> Self {
        QueueScheme { kind: SchemeKind::OneQ, vcs: 1 }
    }

    pub fn dbbm(vcs: usize) -> Self {
        QueueScheme { kind: SchemeKind::Dbbm, vcs }
    }

    pub fn vftree(vcs: usize) -> Self {
        QueueScheme { kind: SchemeKind::VFtree, vcs }
    }

    pub fn flow2sl(vcs: usize) -> Self {
        QueueScheme { kind: SchemeKind::Flow2Sl, vcs }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SchemeKind::OneQ if self.vcs != 1 => Err(Error::Queuing(format!(
                "the single-queue scheme requires vcs = 1, got {}",
                self.vcs
            ))),
            SchemeKind::OneQ => Ok(()),
            _ if self.vcs < 2 => Err(Error::Queuing(format!(
                "{:?} needs at least 2 VCs to be meaningful, got {}",
                self.kind, self.vcs
            ))),
            _ => Ok(()),
        }
    }
}

/// Node group index for Flow2SL: N nodes split into Q contiguous groups of
/// ⌈N/Q⌉ (the last possibly short).
fn flow_group(n_nodes: u32, vcs: usize, node: NodeId) -> u32 {
    let width = (n_nodes as u64).div_ceil(vcs as u64);
    (node as u64 / width) as u32
}

/// The VC a packet from `src` to `dst` occupies under `scheme`. Pure; in
/// `[0, Q)`.
pub fn map_to_vc(scheme: QueueScheme, src: NodeId, dst: NodeId, rlft: &Rlft) -> usize {
    let q = scheme.vcs as i64;
    match scheme.kind {
        SchemeKind::OneQ => 0,
        SchemeKind::Dbbm => (dst as i64).rem_euclid(q) as usize,
        SchemeKind::VFtree => {
            let diff = rlft.leaf_switch(dst) as i64 - rlft.leaf_switch(src) as i64;
            diff.rem_euclid(q) as usize
        }
        SchemeKind::Flow2Sl => {
            let n = rlft.node_count();
            let diff =
                flow_group(n, scheme.vcs, dst) as i64 - flow_group(n, scheme.vcs, src) as i64;
            diff.rem_euclid(q) as usize
        }
    }
}

/// For every switch input buffer (switch, input port, VC): the set of
/// destinations that can occupy it, over all (src, dst) pairs and every
/// route the routing config allows (union over credit states). Buffers no
/// allowed route crosses are present with empty sets.
pub fn mapping_table(
    scheme: QueueScheme,
    rlft: &Rlft,
    routing_cfg: &RoutingConfig,
) -> BTreeMap<(SwitchPosition, u32, usize), BTreeSet<NodeId>> {
    let mut table = BTreeMap::new();
    for pos in rlft.switch_positions() {
        let ports = rlft.down_port_count(pos.stage) + rlft.up_port_count(pos.stage);
        for port in 0..ports {
            for vc in 0..scheme.vcs {
                table.insert((pos, port, vc), BTreeSet::new());
            }
        }
    }
    let k = rlft.arity();
    for src in 0..rlft.node_count() {
        for dst in 0..rlft.node_count() {
            if src == dst {
                continue;
            }
            let vc = map_to_vc(scheme, src, dst, rlft);
            // The NIC-facing buffer at the source's leaf switch sees every
            // packet of the pair regardless of route choice.
            let leaf = SwitchPosition {
                stage: 1,
                index: rlft.leaf_switch(src),
            };
            table
                .get_mut(&(leaf, rlft.attach_port(src), vc))
                .unwrap()
                .insert(dst);
            for path in enumerate_shortest_paths(rlft, src, dst).unwrap() {
                // Keep only paths whose upward hops the routing could select.
                let allowed = path.hops.iter().all(|&(hop, port)| {
                    port < k
                        || routing::selectable_up_ports(k, hop.stage, dst, routing_cfg)
                            .contains(&(port - k))
                });
                if !allowed {
                    continue;
                }
                for &(hop, port) in &path.hops {
                    if let (Endpoint::Switch(next), in_port) = rlft.peer(hop, port) {
                        table.get_mut(&(next, in_port, vc)).unwrap().insert(dst);
                    }
                }
            }
        }
    }
    table
}
