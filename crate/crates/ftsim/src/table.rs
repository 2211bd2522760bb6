//! Reachable-destination tables: for each routing configuration, the number
//! of distinct destinations whose minimal routes can traverse each switch
//! port, summarized per stage and direction and verified three ways:
//!
//! 1. The analytic per-port sets ([`crate::topology::destinations_per_port`])
//!    must equal brute-force route enumeration port for port, with zero
//!    tolerance. This is the authoritative check and applies to every row,
//!    including the Δ-restricted ones.
//! 2. For rows without a Δ restriction the per-port counts also follow
//!    closed forms. With A(s) = 1 when stage s selects upward ports
//!    adaptively and 0 otherwise, an upward port in stage t serves
//!    (N − K^t) / K^(#{s ≤ t : A(s)=0}) destinations and a downward port in
//!    stage t serves K^(#{s < t : A(s)=1}): each non-adaptive stage pins one
//!    base-K digit of the destination on the way up, and each adaptive stage
//!    below a switch multiplies the set of descent paths that can reach it.
//! 3. The upward end-node port trivially serves all N − 1 other nodes.
//!
//! Δ-restricted rows have no closed form here because the selectable set at
//! a permitted stage (the absolute class of every Δ-th port, plus the
//! deterministic port) varies per destination; for them check 1 alone
//! decides.

use std::collections::BTreeSet;
use std::fmt;

use crate::routing::{RoutingConfig, RoutingMode, StageRestriction};
use crate::topology::{
    build_rlft, destinations_per_port, destinations_per_port_bruteforce, Rlft, RlftParams,
};
use crate::Result;

/// Short routing-row label in the configuration-id taxonomy, without the
/// triggering policy (destination sets do not depend on it): `DET`, `OBL`,
/// or `ADAP-<*S|nS>-<K|Kd d>`.
pub fn routing_label(cfg: &RoutingConfig) -> String {
    match cfg.mode {
        RoutingMode::Deterministic => "DET".to_string(),
        RoutingMode::Oblivious => "OBL".to_string(),
        RoutingMode::Adaptive => {
            let stage = match cfg.stages {
                StageRestriction::All => "*S".to_string(),
                StageRestriction::Only(s) => format!("{s}S"),
            };
            let delta = if cfg.delta == 1 {
                "K".to_string()
            } else {
                format!("Kd{}", cfg.delta)
            };
            format!("ADAP-{stage}-{delta}")
        }
    }
}

/// The verification outcome for one routing row on one machine.
#[derive(Clone, Debug)]
pub struct RowCheck {
    pub label: String,
    pub config: RoutingConfig,
    /// Distinct per-port destination counts per column, in display order:
    /// `EU`, then `S1U`, `S1D`, `S2U`, … A uniform column holds one value.
    pub columns: Vec<(String, BTreeSet<u64>)>,
    /// Analytic sets equal brute-force sets on every port.
    pub bruteforce_match: bool,
    /// Closed-form counts hold on every port; `None` when the row has a Δ
    /// restriction and no closed form applies.
    pub closed_form_ok: Option<bool>,
    /// Human-readable details for the first few disagreements.
    pub mismatches: Vec<String>,
}

impl RowCheck {
    pub fn passed(&self) -> bool {
        self.bruteforce_match && self.closed_form_ok != Some(false)
    }
}

/// All verification rows for one machine.
#[derive(Clone, Debug)]
pub struct MachineReport {
    pub params: RlftParams,
    pub rows: Vec<RowCheck>,
}

impl MachineReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(RowCheck::passed)
    }
}

fn format_counts(counts: &BTreeSet<u64>) -> String {
    let items: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
    if items.len() == 1 {
        items.into_iter().next().unwrap()
    } else {
        format!("{{{}}}", items.join(","))
    }
}

impl fmt::Display for MachineReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "RLFT ports={} stages={} ({} nodes)",
            self.params.ports,
            self.params.stages,
            2u64 * (self.params.ports as u64 / 2).pow(self.params.stages)
        )?;
        let mut header = vec!["row".to_string()];
        if let Some(first) = self.rows.first() {
            header.extend(first.columns.iter().map(|(name, _)| name.clone()));
        }
        header.push("brute-force".into());
        header.push("closed-form".into());
        let mut table: Vec<Vec<String>> = vec![header];
        for row in &self.rows {
            let mut cells = vec![row.label.clone()];
            cells.extend(row.columns.iter().map(|(_, counts)| format_counts(counts)));
            cells.push(if row.bruteforce_match { "PASS" } else { "FAIL" }.into());
            cells.push(match row.closed_form_ok {
                None => "-".into(),
                Some(true) => "PASS".into(),
                Some(false) => "FAIL".into(),
            });
            table.push(cells);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|c| table.iter().map(|r| r[c].len()).max().unwrap())
            .collect();
        for row in &table {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:<w$}"))
                .collect();
            writeln!(f, "  {}", line.join("  ").trim_end())?;
        }
        for row in &self.rows {
            for m in &row.mismatches {
                writeln!(f, "  ! {}: {m}", row.label)?;
            }
        }
        Ok(())
    }
}

/// Whether upward-port selection at `stage` is adaptive (more than the one
/// deterministic port) under `cfg`, ignoring Δ (callers handle Δ != 1
/// separately).
fn stage_is_adaptive(cfg: &RoutingConfig, stage: u32) -> bool {
    match cfg.mode {
        RoutingMode::Deterministic => false,
        RoutingMode::Oblivious => true,
        RoutingMode::Adaptive => cfg.stage_permits(stage),
    }
}

/// Closed-form per-port destination count for Δ-free rows, or `None`.
fn closed_form(rlft: &Rlft, cfg: &RoutingConfig, stage: u32, down: bool) -> Option<u64> {
    if cfg.delta != 1 {
        return None;
    }
    let n = rlft.node_count() as u64;
    if down {
        let free = (1..stage).filter(|&s| stage_is_adaptive(cfg, s)).count() as u32;
        Some(rlft.kpow(free))
    } else {
        let pinned = (1..=stage).filter(|&s| !stage_is_adaptive(cfg, s)).count() as u32;
        Some((n - rlft.kpow(stage)) / rlft.kpow(pinned))
    }
}

/// Verify one routing row on one machine.
pub fn check_row(rlft: &Rlft, cfg: &RoutingConfig) -> RowCheck {
    let analytic = destinations_per_port(rlft, cfg);
    let brute = destinations_per_port_bruteforce(rlft, cfg);
    let mut mismatches = Vec::new();

    let mut bruteforce_match = true;
    for (key @ (pos, port), set) in &analytic {
        let other = &brute[key];
        if set != other {
            bruteforce_match = false;
            if mismatches.len() < 8 {
                mismatches.push(format!(
                    "{pos} port {port}: analytic {} dsts vs brute-force {}",
                    set.len(),
                    other.len()
                ));
            }
        }
    }

    let mut columns: Vec<(String, BTreeSet<u64>)> = vec![(
        "EU".to_string(),
        BTreeSet::from([rlft.node_count() as u64 - 1]),
    )];
    for t in 1..=rlft.stages() {
        if t < rlft.stages() {
            columns.push((format!("S{t}U"), BTreeSet::new()));
        }
        columns.push((format!("S{t}D"), BTreeSet::new()));
    }
    let mut closed_form_ok = cfg.delta.eq(&1).then_some(true);
    for ((pos, port), set) in &analytic {
        let down = *port < rlft.down_port_count(pos.stage);
        let name = format!("S{}{}", pos.stage, if down { 'D' } else { 'U' });
        columns
            .iter_mut()
            .find(|(col, _)| *col == name)
            .unwrap()
            .1
            .insert(set.len() as u64);
        if let Some(expected) = closed_form(rlft, cfg, pos.stage, down) {
            if set.len() as u64 != expected {
                closed_form_ok = Some(false);
                if mismatches.len() < 8 {
                    mismatches.push(format!(
                        "{pos} port {port}: {} dsts, closed form says {expected}",
                        set.len()
                    ));
                }
            }
        }
    }

    RowCheck {
        label: routing_label(cfg),
        config: *cfg,
        columns,
        bruteforce_match,
        closed_form_ok,
        mismatches,
    }
}

/// Divisors of `k` in ascending order.
pub fn divisors(k: u32) -> Vec<u32> {
    (1..=k).filter(|d| k % d == 0).collect()
}

/// The standard verification rows for a machine of arity `k`: D-mod-K,
/// fully adaptive, each single-stage restriction, and for every proper
/// divisor Δ > 1 of K the Δ-restricted variants of the adaptive rows.
pub fn standard_rows(k: u32, stages: u32) -> Vec<RoutingConfig> {
    let mut rows = vec![RoutingConfig::deterministic(), RoutingConfig::fully_adaptive()];
    for s in 1..stages {
        rows.push(RoutingConfig {
            stages: StageRestriction::Only(s),
            ..RoutingConfig::fully_adaptive()
        });
    }
    for d in divisors(k) {
        if d == 1 {
            continue;
        }
        rows.push(RoutingConfig::adaptive_delta(d));
        for s in 1..stages {
            rows.push(RoutingConfig {
                stages: StageRestriction::Only(s),
                ..RoutingConfig::adaptive_delta(d)
            });
        }
    }
    rows
}

/// Run every standard row against one machine.
pub fn check_machine(params: RlftParams) -> Result<MachineReport> {
    let rlft = build_rlft(params)?;
    let rows = standard_rows(rlft.arity(), rlft.stages())
        .iter()
        .map(|cfg| check_row(&rlft, cfg))
        .collect();
    Ok(MachineReport { params, rows })
}
