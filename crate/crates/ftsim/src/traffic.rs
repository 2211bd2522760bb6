//! Traffic generation: uniform random, end-node hotspots, and hotspots
//! aimed at an interior upward link.
//!
//! A pattern splits the end nodes into roles once, up front: a sampled
//! fraction become focused senders — split evenly across the hotspot list,
//! each with one fixed target for the whole run (or, for interior
//! hotspots, drawing uniformly from one port's destination set) — and
//! everyone else sends uniform random background traffic. Packet spacing
//! is exponential with mean `serialization / load`, so `load` is the
//! injected fraction of link bandwidth.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::routing;
use crate::topology::{NodeId, Rlft, SwitchPosition};
use crate::{Error, Result};

/// What the focused fraction of nodes aims at.
#[derive(Clone, Debug, PartialEq)]
pub enum PatternKind {
    /// Every node sends uniform random traffic to the other nodes.
    Uniform,
    /// `⌊frac·N⌋` non-target nodes each send all their traffic to the
    /// target nodes, round-robin; the rest send uniform background.
    Hotspot { frac: f64, targets: Vec<NodeId> },
    /// `⌊frac·N⌋` nodes each aim at one configured middle-stage upward
    /// port, sending round-robin over the destinations whose minimal
    /// deterministic routes cross that port; the rest send uniform
    /// background. Ports are `(middle-stage switch index, absolute port)`.
    IntermediateHotspot { frac: f64, ports: Vec<(u32, u32)> },
}

/// A full workload: the role split plus the offered load per node, as a
/// fraction of link bandwidth.
#[derive(Clone, Debug, PartialEq)]
pub struct TrafficPattern {
    pub kind: PatternKind,
    pub load: f64,
}

impl TrafficPattern {
    pub fn validate(&self, rlft: &Rlft) -> Result<()> {
        if !self.load.is_finite() || self.load < 0.0 {
            return Err(Error::Config(format!("load must be ≥ 0, got {}", self.load)));
        }
        match &self.kind {
            PatternKind::Uniform => Ok(()),
            PatternKind::Hotspot { frac, targets } => {
                validate_frac(*frac)?;
                if targets.is_empty() {
                    return Err(Error::Config("hotspot needs at least one target".into()));
                }
                let mut seen = std::collections::BTreeSet::new();
                for &t in targets {
                    if t >= rlft.node_count() {
                        return Err(Error::Config(format!(
                            "hotspot target {t} out of range for {} nodes",
                            rlft.node_count()
                        )));
                    }
                    if !seen.insert(t) {
                        return Err(Error::Config(format!("duplicate hotspot target {t}")));
                    }
                }
                Ok(())
            }
            PatternKind::IntermediateHotspot { frac, ports } => {
                validate_frac(*frac)?;
                if ports.is_empty() {
                    return Err(Error::Config(
                        "intermediate hotspot needs at least one port".into(),
                    ));
                }
                for &(sw, port) in ports {
                    ihs_destination_set(rlft, sw, port)?;
                }
                Ok(())
            }
        }
    }
}

fn validate_frac(frac: f64) -> Result<()> {
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::Config(format!(
            "sender fraction must lie in (0, 1], got {frac}"
        )));
    }
    Ok(())
}

/// What one node does for the whole run.
#[derive(Clone, Debug, PartialEq)]
pub enum Role {
    /// Uniform random destinations over everyone else.
    Uniform,
    /// Every packet goes to the one assigned hotspot.
    FixedTarget { target: NodeId },
    /// Uniform random destinations over a fixed subset (interior-hotspot
    /// senders aiming at one port's destination set).
    UniformOver { targets: Vec<NodeId> },
    /// Sends nothing (used to keep parts of the machine idle in controlled
    /// scenarios).
    Silent,
}

/// The destinations whose minimal deterministic routes ascend through the
/// given absolute port of the given middle-stage (stage 2) switch. These
/// are the destinations outside the switch's span whose route digits select
/// first this switch, then this port.
pub fn ihs_destination_set(rlft: &Rlft, switch_index: u32, port: u32) -> Result<Vec<NodeId>> {
    if rlft.stages() < 3 {
        return Err(Error::Config(
            "interior-port hotspots need upward ports at stage 2, so at least 3 stages".into(),
        ));
    }
    if switch_index >= rlft.stage_size(2) {
        return Err(Error::Config(format!(
            "stage-2 switch index {switch_index} out of range ({} switches)",
            rlft.stage_size(2)
        )));
    }
    let k = rlft.arity();
    let down = rlft.down_port_count(2);
    if port < down {
        return Err(Error::Config(format!(
            "port {port} of stage-2 switch {switch_index} points downward; the \
             hotspot must sit on an upward port ({down}..{})",
            2 * k - 1
        )));
    }
    if port >= down + rlft.up_port_count(2) {
        return Err(Error::Config(format!(
            "port {port} out of range for a {}-port switch",
            2 * k
        )));
    }
    let pos = SwitchPosition { stage: 2, index: switch_index };
    let span = rlft.span(pos);
    let j = switch_index % k; // stage-1 up choice that leads to this switch
    let u = port - down;
    Ok((0..rlft.node_count())
        .filter(|&d| {
            !span.contains(&d)
                && routing::dmodk_digit(k, 1, d) == j
                && routing::dmodk_digit(k, 2, d) == u
        })
        .collect())
}

/// Map hotspot node ids quoted for a reference machine size onto this
/// machine: `⌊id · N / reference_nodes⌋`.
pub fn scaled_targets(rlft: &Rlft, reference_ids: &[NodeId], reference_nodes: u32) -> Vec<NodeId> {
    reference_ids
        .iter()
        .map(|&id| (id as u64 * rlft.node_count() as u64 / reference_nodes as u64) as NodeId)
        .collect()
}

/// Sample `count` distinct elements from `pool` (partial Fisher–Yates).
fn sample_distinct(pool: &mut Vec<NodeId>, count: usize, rng: &mut ChaCha8Rng) -> Vec<NodeId> {
    let count = count.min(pool.len());
    for i in 0..count {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool[..count].to_vec()
}

/// Fix every node's role for the run. Focused senders are sampled without
/// replacement from the eligible nodes and split evenly (round-robin in
/// sampled order) across the configured hotspot list; each keeps its
/// assignment for the whole run.
pub fn assign_roles(
    pattern: &TrafficPattern,
    rlft: &Rlft,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Role>> {
    pattern.validate(rlft)?;
    let n = rlft.node_count();
    let mut roles = vec![Role::Uniform; n as usize];
    match &pattern.kind {
        PatternKind::Uniform => {}
        PatternKind::Hotspot { frac, targets } => {
            let senders = (frac * n as f64).floor() as usize;
            let mut pool: Vec<NodeId> = (0..n).filter(|d| !targets.contains(d)).collect();
            for (i, node) in sample_distinct(&mut pool, senders, rng).into_iter().enumerate() {
                roles[node as usize] =
                    Role::FixedTarget { target: targets[i % targets.len()] };
            }
        }
        PatternKind::IntermediateHotspot { frac, ports } => {
            let senders = (frac * n as f64).floor() as usize;
            let sets: Vec<Vec<NodeId>> = ports
                .iter()
                .map(|&(sw, port)| ihs_destination_set(rlft, sw, port))
                .collect::<Result<_>>()?;
            for (i, set) in sets.iter().enumerate() {
                if set.is_empty() {
                    return Err(Error::Config(format!(
                        "no destination's route crosses configured port {:?}",
                        ports[i]
                    )));
                }
            }
            let mut pool: Vec<NodeId> = (0..n).collect();
            for (i, node) in sample_distinct(&mut pool, senders, rng).into_iter().enumerate() {
                let set = &sets[i % sets.len()];
                if set.iter().all(|&d| d == node) {
                    return Err(Error::Config(format!(
                        "node {node} has no destination besides itself behind its port"
                    )));
                }
                roles[node as usize] = Role::UniformOver { targets: set.clone() };
            }
        }
    }
    Ok(roles)
}

/// Draw the next destination for `src`. Never returns `src`; a focused
/// sender's target never varies within a run.
pub fn next_destination(
    role: &Role,
    src: NodeId,
    rlft: &Rlft,
    rng: &mut ChaCha8Rng,
) -> NodeId {
    match role {
        Role::Uniform => loop {
            let d = rng.random_range(0..rlft.node_count());
            if d != src {
                return d;
            }
        },
        Role::FixedTarget { target } => {
            debug_assert_ne!(*target, src, "targets are excluded from the sender pool");
            *target
        }
        Role::UniformOver { targets } => loop {
            let d = targets[rng.random_range(0..targets.len())];
            if d != src {
                return d;
            }
        },
        Role::Silent => unreachable!("silent sources draw no destinations"),
    }
}

/// Serialization time of one packet on one link, in ns (exact by
/// construction: bytes·8 must divide evenly by the bandwidth).
pub fn serialization_ns(mtu_bytes: u64, bandwidth_gbps: u64) -> u64 {
    mtu_bytes * 8 / bandwidth_gbps
}

/// Exponential inter-arrival gap in ns for a node offering `load` of its
/// link (mean `ser_ns / load`), rounded to the grid of whole ns. `load`
/// must be positive.
pub fn interarrival_ns(load: f64, ser_ns: u64, rng: &mut ChaCha8Rng) -> u64 {
    let exp = Exp::new(load / ser_ns as f64).expect("positive load");
    exp.sample(rng).round() as u64
}
