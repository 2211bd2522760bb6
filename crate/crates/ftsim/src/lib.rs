//! Deterministic discrete-event simulator for real-life fat-tree (RLFT)
//! interconnection networks.
//!
//! The crate models input-queued switches with credit-based virtual-channel
//! flow control and iSLIP crossbar arbitration, connected in an RLFT(K, T)
//! topology (P = 2K ports per switch, T stages, N = 2K^T end nodes). On top of
//! that it implements:
//!
//! * **Routing** ([`routing`]): deterministic D-mod-K routing, oblivious
//!   random routing, and restricted adaptive routing in which the adaptive
//!   escape set can be limited to one stage and to every Δ-th upward port,
//!   with three congestion-triggering policies (NoTH, TH, 2TH).
//! * **Queuing** ([`queuing`]): static packet-to-VC mappings (single queue,
//!   DBBM, vFtree, Flow2SL) assigned at injection and held end to end.
//! * **Switching** ([`switch`]): per-input per-VC buffers with optional
//!   virtual output queues, credit accounting, and iSLIP matching.
//! * **Traffic** ([`traffic`]): Poisson sources with uniform, end-node
//!   hotspot, and intermediate (switch-port) hotspot patterns.
//! * **Engine** ([`engine`]): the event loop — integer-nanosecond timestamps,
//!   deterministic (time, sequence) ordering, conservation audits, and a
//!   forward-progress monitor.
//! * **Harness** ([`harness`]): experiment configs (key=value files with
//!   environment overrides), load sweeps, and CSV export.
//! * **Topology verification** ([`table`]): per-port reachable-destination
//!   counts computed analytically and by brute-force route enumeration, with
//!   closed-form cross-checks for the unrestricted routing modes.
//!
//! All randomness flows from a single run seed through named ChaCha streams,
//! so every simulation is reproducible bit for bit.

pub mod engine;
pub mod harness;
pub mod queuing;
pub mod routing;
pub mod switch;
pub mod table;
pub mod topology;
pub mod traffic;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid topology parameters or out-of-range topology queries.
    #[error("topology: {0}")]
    Topology(String),
    /// Invalid routing configuration or an unroutable request.
    #[error("routing: {0}")]
    Routing(String),
    /// Invalid queuing configuration.
    #[error("queuing: {0}")]
    Queuing(String),
    /// Config-file parse or validation failure tied to a specific line.
    #[error("config line {line}: {msg}")]
    ConfigLine { line: usize, msg: String },
    /// Config validation failure not tied to a line (cross-field checks,
    /// environment overrides, missing required keys).
    #[error("config: {0}")]
    Config(String),
    /// A buffer exceeded its credit-advertised capacity, a credit counter
    /// overran the buffer size, or a send happened without a credit.
    #[error("flow control: {0}")]
    FlowControl(String),
    /// A conservation audit failed mid-run.
    #[error("audit at t={time_ns}ns: {msg}")]
    Audit { time_ns: u64, msg: String },
    /// The forward-progress monitor detected a stall (possible deadlock).
    #[error("stall at t={time_ns}ns: {msg}")]
    Stall { time_ns: u64, msg: String },
    /// Underlying I/O failure (CSV export, config reading).
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
