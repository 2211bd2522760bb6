//! Experiment harness: the key=value config dialect, environment
//! overrides, canonical configuration ids, load sweeps, and CSV export.
//!
//! A config file fixes one machine + routing + queuing + switch + traffic
//! combination, a list of sweep loads, and repetition seeds. Threshold keys
//! are given as fractions of the per-VC credit capacity and converted when
//! the routing config is materialized, so the same file scales with buffer
//! geometry. Rendering a spec back to text and reparsing it reproduces the
//! spec exactly, and all CSV output uses fixed 6-decimal formatting so
//! reruns are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::engine::{run, MetricsSeries, SimConfig};
use crate::queuing::{QueueScheme, SchemeKind};
use crate::routing::{RoutingConfig, RoutingMode, StageRestriction, Triggering};
use crate::switch::SwitchParams;
use crate::topology::{build_rlft, NodeId, Rlft, RlftParams};
use crate::traffic::{PatternKind, TrafficPattern};
use crate::{Error, Result};

/// Routing knobs as configured: thresholds as fractions of the per-VC
/// credit capacity, converted by [`RoutingSpec::to_config`].
#[derive(Clone, Debug, PartialEq)]
pub struct RoutingSpec {
    pub mode: RoutingMode,
    pub triggering: Triggering,
    pub ltth_frac: f64,
    pub htth_frac: f64,
    pub stage: StageRestriction,
    pub delta: u32,
}

impl Default for RoutingSpec {
    fn default() -> Self {
        RoutingSpec {
            mode: RoutingMode::Deterministic,
            triggering: Triggering::NoTh,
            ltth_frac: 0.25,
            htth_frac: 0.5,
            stage: StageRestriction::All,
            delta: 1,
        }
    }
}

impl RoutingSpec {
    /// Materialize for a machine whose VC buffers hold `vc_capacity`
    /// packets. Fractional thresholds round to the nearest whole credit.
    pub fn to_config(&self, vc_capacity: u32) -> RoutingConfig {
        let credits = |frac: f64| (frac * vc_capacity as f64).round() as u32;
        RoutingConfig {
            mode: self.mode,
            triggering: self.triggering,
            ltth: credits(self.ltth_frac),
            htth: credits(self.htth_frac),
            stages: self.stage,
            delta: self.delta,
        }
    }
}

/// Everything one experiment needs: sub-configs plus the sweep axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub topology: RlftParams,
    pub routing: RoutingSpec,
    pub scheme: QueueScheme,
    pub switch: SwitchParams,
    pub pattern: TrafficPattern,
    pub sim: SimConfig,
    /// Offered loads the sweep visits (the `run` command uses
    /// `pattern.load` instead).
    pub loads: Vec<f64>,
    /// Seeds each sweep point repeats over.
    pub seeds: Vec<u64>,
}

impl ExperimentSpec {
    pub fn vc_capacity(&self) -> u32 {
        self.switch.vc_capacity(self.scheme.vcs)
    }

    pub fn routing_config(&self) -> RoutingConfig {
        self.routing.to_config(self.vc_capacity())
    }

    pub fn build_topology(&self) -> Result<Rlft> {
        build_rlft(self.topology)
    }

    /// Validate every sub-config and their interactions.
    pub fn validate(&self) -> Result<()> {
        let rlft = self.build_topology()?;
        self.scheme.validate()?;
        self.switch.validate(self.scheme.vcs)?;
        self.routing_config()
            .validate(rlft.arity(), rlft.stages(), self.vc_capacity())?;
        for frac in [self.routing.ltth_frac, self.routing.htth_frac] {
            if !(0.0..=1.0).contains(&frac) {
                return Err(Error::Config(format!(
                    "threshold fractions must lie in [0, 1], got {frac}"
                )));
            }
        }
        self.pattern.validate(&rlft)?;
        self.sim.validate(self.switch.mtu_bytes)?;
        for &load in &self.loads {
            if !(load > 0.0 && load <= 1.0) {
                return Err(Error::Config(format!(
                    "sweep loads must lie in (0, 1], got {load}"
                )));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        Ok(())
    }

    /// Canonical short name of the configuration: routing, then scheme,
    /// then the VOQ marker, e.g. `ADAP-2TH-1S-Kd3+FLOW2SL3+VOQ`.
    pub fn config_id(&self) -> String {
        let mut id = match self.routing.mode {
            RoutingMode::Deterministic => "DET".to_string(),
            RoutingMode::Oblivious => "OBL".to_string(),
            RoutingMode::Adaptive => {
                let trig = match self.routing.triggering {
                    Triggering::NoTh => "NOTH",
                    Triggering::Th => "TH",
                    Triggering::TwoTh => "2TH",
                };
                let stage = match self.routing.stage {
                    StageRestriction::All => "*S".to_string(),
                    StageRestriction::Only(s) => format!("{s}S"),
                };
                let delta = if self.routing.delta == 1 {
                    "K".to_string()
                } else {
                    format!("Kd{}", self.routing.delta)
                };
                format!("ADAP-{trig}-{stage}-{delta}")
            }
        };
        id.push('+');
        id.push_str(&match self.scheme.kind {
            SchemeKind::OneQ => "1Q".to_string(),
            SchemeKind::Dbbm => format!("DBBM{}", self.scheme.vcs),
            SchemeKind::VFtree => format!("VFTREE{}", self.scheme.vcs),
            SchemeKind::Flow2Sl => format!("FLOW2SL{}", self.scheme.vcs),
        });
        if self.switch.voq {
            id.push_str("+VOQ");
        }
        id
    }

    /// Run once at the experiment's own pattern load and seed.
    pub fn run_once(&self) -> Result<MetricsSeries> {
        self.validate()?;
        let rlft = self.build_topology()?;
        run(
            &rlft,
            &self.routing_config(),
            self.scheme,
            &self.switch,
            &self.pattern,
            &self.sim,
        )
    }

    fn run_point(&self, load: f64, seed: u64) -> Result<MetricsSeries> {
        let rlft = self.build_topology()?;
        let pattern = TrafficPattern { kind: self.pattern.kind.clone(), load };
        let sim = SimConfig { seed, ..self.sim };
        run(
            &rlft,
            &self.routing_config(),
            self.scheme,
            &self.switch,
            &pattern,
            &sim,
        )
    }
}

// --- config text format ----------------------------------------------------

fn parse_kv_lines(text: &str) -> Result<BTreeMap<String, (String, usize)>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(cut) => &raw[..cut],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::ConfigLine {
                line: line_no,
                msg: format!("expected `section.key = value`, got `{line}`"),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !key.contains('.') {
            return Err(Error::ConfigLine {
                line: line_no,
                msg: format!("key `{key}` has no `section.` prefix"),
            });
        }
        if let Some((_, (_, first))) = map.get_key_value(&key) {
            return Err(Error::ConfigLine {
                line: line_no,
                msg: format!("key `{key}` already set on line {first}"),
            });
        }
        map.insert(key, (value, line_no));
    }
    Ok(map)
}

/// Every key the dialect understands, used to validate input and to apply
/// environment overrides.
const KNOWN_KEYS: &[&str] = &[
    "topology.ports",
    "topology.stages",
    "routing.mode",
    "routing.triggering",
    "routing.ltth_frac",
    "routing.htth_frac",
    "routing.stage",
    "routing.delta",
    "queuing.scheme",
    "queuing.vcs",
    "switch.voq",
    "switch.buffer_bytes",
    "switch.mtu_bytes",
    "link.bandwidth_gbps",
    "link.propagation_ns",
    "sim.duration_ns",
    "sim.warmup_ns",
    "sim.seed",
    "sim.metrics_bin_ns",
    "traffic.pattern",
    "traffic.load",
    "traffic.hotspot_frac",
    "traffic.hotspots",
    "traffic.ihs_ports",
    "sweep.loads",
    "sweep.seeds",
];

/// The environment variable that overrides `section.key`:
/// `FTSIM_<SECTION>_<KEY>`.
pub fn env_var_name(key: &str) -> String {
    format!("FTSIM_{}", key.replace('.', "_").to_uppercase())
}

struct Fields {
    map: BTreeMap<String, (String, usize)>,
}

impl Fields {
    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.map.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some((raw, line)) => raw.parse().map(Some).map_err(|_| Error::ConfigLine {
                line,
                msg: format!("invalid value `{raw}` for `{key}`"),
            }),
        }
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.parse(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    fn parse_list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(key) {
            None => Ok(None),
            Some((raw, line)) => raw
                .split(',')
                .map(|item| {
                    item.trim().parse().map_err(|_| Error::ConfigLine {
                        line,
                        msg: format!("invalid list element `{item}` for `{key}`"),
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

/// Parse the key=value dialect into a fully validated spec.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    parse_config_with_env(text, |_| None)
}

/// [`parse_config`] with overrides: for each known `section.key`,
/// `lookup(FTSIM_SECTION_KEY)` may replace (or supply) its value. The CLI
/// passes the process environment here.
pub fn parse_config_with_env(
    text: &str,
    lookup: impl Fn(&str) -> Option<String>,
) -> Result<ExperimentSpec> {
    let mut map = parse_kv_lines(text)?;
    for (key, (_, line)) in map.iter() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::ConfigLine {
                line: *line,
                msg: format!("unknown key `{key}`"),
            });
        }
    }
    for &key in KNOWN_KEYS {
        if let Some(value) = lookup(&env_var_name(key)) {
            map.insert(key.to_string(), (value, 0));
        }
    }
    let f = Fields { map };

    let topology = RlftParams {
        ports: f.require("topology.ports")?,
        stages: f.require("topology.stages")?,
    };

    let routing = {
        let mode = match f.get("routing.mode") {
            None => RoutingMode::Deterministic,
            Some(("det" | "deterministic", _)) => RoutingMode::Deterministic,
            Some(("obl" | "oblivious", _)) => RoutingMode::Oblivious,
            Some(("adap" | "adaptive", _)) => RoutingMode::Adaptive,
            Some((other, line)) => {
                return Err(Error::ConfigLine {
                    line,
                    msg: format!("routing.mode must be det|obl|adap, got `{other}`"),
                })
            }
        };
        let triggering = match f.get("routing.triggering") {
            None => Triggering::NoTh,
            Some(("noth", _)) => Triggering::NoTh,
            Some(("th", _)) => Triggering::Th,
            Some(("2th", _)) => Triggering::TwoTh,
            Some((other, line)) => {
                return Err(Error::ConfigLine {
                    line,
                    msg: format!("routing.triggering must be noth|th|2th, got `{other}`"),
                })
            }
        };
        let stage = match f.get("routing.stage") {
            None | Some(("all", _)) => StageRestriction::All,
            Some((raw, line)) => StageRestriction::Only(raw.parse().map_err(|_| {
                Error::ConfigLine {
                    line,
                    msg: format!("routing.stage must be `all` or a stage number, got `{raw}`"),
                }
            })?),
        };
        RoutingSpec {
            mode,
            triggering,
            ltth_frac: f.parse_or("routing.ltth_frac", 0.25)?,
            htth_frac: f.parse_or("routing.htth_frac", 0.5)?,
            stage,
            delta: f.parse_or("routing.delta", 1)?,
        }
    };

    let scheme = {
        let kind = match f.get("queuing.scheme") {
            None | Some(("1q", _)) => SchemeKind::OneQ,
            Some(("dbbm", _)) => SchemeKind::Dbbm,
            Some(("vftree", _)) => SchemeKind::VFtree,
            Some(("flow2sl", _)) => SchemeKind::Flow2Sl,
            Some((other, line)) => {
                return Err(Error::ConfigLine {
                    line,
                    msg: format!(
                        "queuing.scheme must be 1q|dbbm|vftree|flow2sl, got `{other}`"
                    ),
                })
            }
        };
        let default_vcs = if kind == SchemeKind::OneQ { 1 } else { 3 };
        QueueScheme { kind, vcs: f.parse_or("queuing.vcs", default_vcs)? }
    };

    let switch = SwitchParams {
        voq: f.parse_or("switch.voq", false)?,
        buffer_bytes: f.parse_or("switch.buffer_bytes", 192_000)?,
        mtu_bytes: f.parse_or("switch.mtu_bytes", 4_000)?,
    };

    let defaults = SimConfig::default();
    let sim = SimConfig {
        bandwidth_gbps: f.parse_or("link.bandwidth_gbps", defaults.bandwidth_gbps)?,
        propagation_ns: f.parse_or("link.propagation_ns", defaults.propagation_ns)?,
        duration_ns: f.parse_or("sim.duration_ns", defaults.duration_ns)?,
        warmup_ns: f.parse_or("sim.warmup_ns", defaults.warmup_ns)?,
        seed: f.parse_or("sim.seed", defaults.seed)?,
        metrics_bin_ns: f.parse_or("sim.metrics_bin_ns", defaults.metrics_bin_ns)?,
        audit_interval_ns: defaults.audit_interval_ns,
    };

    let pattern = {
        let load = f.parse_or("traffic.load", 1.0)?;
        let kind = match f.get("traffic.pattern") {
            None | Some(("uniform", _)) => PatternKind::Uniform,
            Some(("hs", _)) => {
                let targets: Vec<NodeId> = f
                    .parse_list("traffic.hotspots")?
                    .ok_or_else(|| {
                        Error::Config(
                            "traffic.pattern=hs requires traffic.hotspots".into(),
                        )
                    })?;
                PatternKind::Hotspot {
                    frac: f.parse_or("traffic.hotspot_frac", 0.1)?,
                    targets,
                }
            }
            Some(("ihs", _)) => {
                let (raw, line) = f.get("traffic.ihs_ports").ok_or_else(|| {
                    Error::Config("traffic.pattern=ihs requires traffic.ihs_ports".into())
                })?;
                let mut ports = Vec::new();
                for item in raw.split(',') {
                    let parts: Vec<&str> = item.trim().split(':').collect();
                    let parsed = if parts.len() == 2 {
                        parts[0].parse().ok().zip(parts[1].parse().ok())
                    } else {
                        None
                    };
                    match parsed {
                        Some(pair) => ports.push(pair),
                        None => {
                            return Err(Error::ConfigLine {
                                line,
                                msg: format!(
                                    "ihs port `{item}` is not `switchIndex:port`"
                                ),
                            })
                        }
                    }
                }
                PatternKind::IntermediateHotspot {
                    frac: f.parse_or("traffic.hotspot_frac", 0.2)?,
                    ports,
                }
            }
            Some((other, line)) => {
                return Err(Error::ConfigLine {
                    line,
                    msg: format!(
                        "traffic.pattern must be uniform|hs|ihs, got `{other}`"
                    ),
                })
            }
        };
        TrafficPattern { kind, load }
    };

    let loads = f.parse_list("sweep.loads")?.unwrap_or_default();
    let seeds = f.parse_list("sweep.seeds")?.unwrap_or_else(|| vec![sim.seed]);

    let spec = ExperimentSpec {
        topology,
        routing,
        scheme,
        switch,
        pattern,
        sim,
        loads,
        seeds,
    };
    spec.validate()?;
    Ok(spec)
}

/// Render a spec to config text such that reparsing reproduces it exactly.
pub fn render_config(spec: &ExperimentSpec) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
    kv("topology.ports", spec.topology.ports.to_string());
    kv("topology.stages", spec.topology.stages.to_string());
    kv(
        "routing.mode",
        match spec.routing.mode {
            RoutingMode::Deterministic => "det",
            RoutingMode::Oblivious => "obl",
            RoutingMode::Adaptive => "adap",
        }
        .to_string(),
    );
    kv(
        "routing.triggering",
        match spec.routing.triggering {
            Triggering::NoTh => "noth",
            Triggering::Th => "th",
            Triggering::TwoTh => "2th",
        }
        .to_string(),
    );
    kv("routing.ltth_frac", spec.routing.ltth_frac.to_string());
    kv("routing.htth_frac", spec.routing.htth_frac.to_string());
    kv(
        "routing.stage",
        match spec.routing.stage {
            StageRestriction::All => "all".to_string(),
            StageRestriction::Only(s) => s.to_string(),
        },
    );
    kv("routing.delta", spec.routing.delta.to_string());
    kv(
        "queuing.scheme",
        match spec.scheme.kind {
            SchemeKind::OneQ => "1q",
            SchemeKind::Dbbm => "dbbm",
            SchemeKind::VFtree => "vftree",
            SchemeKind::Flow2Sl => "flow2sl",
        }
        .to_string(),
    );
    kv("queuing.vcs", spec.scheme.vcs.to_string());
    kv("switch.voq", spec.switch.voq.to_string());
    kv("switch.buffer_bytes", spec.switch.buffer_bytes.to_string());
    kv("switch.mtu_bytes", spec.switch.mtu_bytes.to_string());
    kv("link.bandwidth_gbps", spec.sim.bandwidth_gbps.to_string());
    kv("link.propagation_ns", spec.sim.propagation_ns.to_string());
    kv("sim.duration_ns", spec.sim.duration_ns.to_string());
    kv("sim.warmup_ns", spec.sim.warmup_ns.to_string());
    kv("sim.seed", spec.sim.seed.to_string());
    kv("sim.metrics_bin_ns", spec.sim.metrics_bin_ns.to_string());
    kv("traffic.load", spec.pattern.load.to_string());
    match &spec.pattern.kind {
        PatternKind::Uniform => kv("traffic.pattern", "uniform".to_string()),
        PatternKind::Hotspot { frac, targets } => {
            kv("traffic.pattern", "hs".to_string());
            kv("traffic.hotspot_frac", frac.to_string());
            kv(
                "traffic.hotspots",
                targets.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","),
            );
        }
        PatternKind::IntermediateHotspot { frac, ports } => {
            kv("traffic.pattern", "ihs".to_string());
            kv("traffic.hotspot_frac", frac.to_string());
            kv(
                "traffic.ihs_ports",
                ports
                    .iter()
                    .map(|(s, p)| format!("{s}:{p}"))
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
    }
    if !spec.loads.is_empty() {
        kv(
            "sweep.loads",
            spec.loads.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(","),
        );
    }
    kv(
        "sweep.seeds",
        spec.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
    );
    out
}

// --- sweeps ----------------------------------------------------------------

/// One sweep table row: the seed-mean steady-state throughput at one load
/// of one configuration, with the min/max over seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub config_id: String,
    pub load_frac: f64,
    pub throughput_frac: f64,
    pub throughput_min: f64,
    pub throughput_max: f64,
}

/// Run every (config, load, seed) combination — in parallel, since runs
/// share nothing — and fold each (config, load) group into a row.
/// Rows come back sorted by (configuration, load).
pub fn sweep_many(specs: &[ExperimentSpec]) -> Result<Vec<SweepRow>> {
    for spec in specs {
        spec.validate()?;
        if spec.loads.is_empty() {
            return Err(Error::Config(format!(
                "sweep for {} has an empty load list",
                spec.config_id()
            )));
        }
    }
    let jobs: Vec<(usize, f64)> = specs
        .iter()
        .enumerate()
        .flat_map(|(i, spec)| spec.loads.iter().map(move |&load| (i, load)))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(i, load)| {
            let spec = &specs[i];
            let fracs = spec
                .seeds
                .par_iter()
                .map(|&seed| Ok(spec.run_point(load, seed)?.delivered_frac()))
                .collect::<Result<Vec<f64>>>()?;
            let mean = fracs.iter().sum::<f64>() / fracs.len() as f64;
            Ok(SweepRow {
                config_id: spec.config_id(),
                load_frac: load,
                throughput_frac: mean,
                throughput_min: fracs.iter().cloned().fold(f64::INFINITY, f64::min),
                throughput_max: fracs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            })
        })
        .collect::<Result<Vec<SweepRow>>>()?;
    rows.sort_by(|a, b| {
        (&a.config_id, a.load_frac)
            .partial_cmp(&(&b.config_id, b.load_frac))
            .unwrap()
    });
    Ok(rows)
}

/// [`sweep_many`] for a single configuration.
pub fn sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    sweep_many(std::slice::from_ref(spec))
}

// --- CSV -------------------------------------------------------------------

/// Per-bin delivered/injected fractions: `time_ns,delivered_frac,injected_frac`.
pub fn series_csv(series: &MetricsSeries) -> String {
    let mut out = String::from("time_ns,delivered_frac,injected_frac\n");
    let cap = (series.bin_capacity_bytes() * series.node_count as u64) as f64;
    for (bin, (&d, &i)) in series
        .delivered_bytes
        .iter()
        .zip(series.injected_bytes.iter())
        .enumerate()
    {
        writeln!(
            out,
            "{},{:.6},{:.6}",
            bin as u64 * series.bin_ns,
            d as f64 / cap,
            i as f64 / cap
        )
        .unwrap();
    }
    out
}

/// Sweep table: `config_id,load_frac,throughput_frac,throughput_min,throughput_max`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out =
        String::from("config_id,load_frac,throughput_frac,throughput_min,throughput_max\n");
    for r in rows {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6}",
            r.config_id, r.load_frac, r.throughput_frac, r.throughput_min, r.throughput_max
        )
        .unwrap();
    }
    out
}

pub fn export_series_csv(series: &MetricsSeries, path: &Path) -> Result<()> {
    std::fs::write(path, series_csv(series))?;
    Ok(())
}

pub fn export_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    std::fs::write(path, sweep_csv(rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
# A small machine under uniform traffic.
topology.ports = 4
topology.stages = 2
queuing.scheme = dbbm
queuing.vcs = 3
traffic.pattern = uniform
traffic.load = 0.5
sim.duration_ns = 200000
sim.warmup_ns = 50000
sweep.loads = 0.2,0.4
sweep.seeds = 1,2
";

    #[test]
    fn parse_applies_defaults_and_validates() {
        let spec = parse_config(BASE).unwrap();
        assert_eq!(spec.topology, RlftParams { ports: 4, stages: 2 });
        assert_eq!(spec.routing.mode, RoutingMode::Deterministic);
        assert_eq!(spec.scheme, QueueScheme::dbbm(3));
        assert!(!spec.switch.voq);
        assert_eq!(spec.sim.seed, 1);
        assert_eq!(spec.sim.bandwidth_gbps, 100);
        assert_eq!(spec.loads, vec![0.2, 0.4]);
        assert_eq!(spec.seeds, vec![1, 2]);
    }

    #[test]
    fn threshold_fractions_convert_to_credits() {
        let text = format!(
            "{BASE}routing.mode = adap\nrouting.triggering = 2th\n\
             routing.ltth_frac = 0.25\nrouting.htth_frac = 0.50\nrouting.delta = 2\n"
        );
        let spec = parse_config(&text).unwrap();
        // 192000 B / 4000 B = 48 packets, split 3 ways → 16 credits per VC.
        assert_eq!(spec.vc_capacity(), 16);
        let cfg = spec.routing_config();
        assert_eq!(cfg.ltth, 4);
        assert_eq!(cfg.htth, 8);
        assert_eq!(cfg.delta, 2);
    }

    #[test]
    fn line_numbered_errors() {
        let m = |text: &str| match parse_config(text) {
            Err(Error::ConfigLine { line, msg }) => (line, msg),
            other => panic!("expected a line error, got {other:?}"),
        };
        let (line, msg) = m("topology.ports = 4\nbogus.key = 1\n");
        assert_eq!(line, 2);
        assert!(msg.contains("unknown key"));
        let (line, _) = m("topology.ports = 4\ntopology.stages = zebra\n");
        assert_eq!(line, 2);
        let (line, msg) = m("no_dot_here = 5\n");
        assert_eq!(line, 1);
        assert!(msg.contains("section"));
        let (line, msg) = m("topology.ports = 4\ntopology.ports = 6\n");
        assert_eq!(line, 2);
        assert!(msg.contains("already set"));
    }

    #[test]
    fn cross_field_violations_are_rejected() {
        // Δ=3 does not divide K=2.
        let text = format!("{BASE}routing.mode = adap\nrouting.delta = 3\n");
        assert!(parse_config(&text).is_err());
        // Hotspot pattern without targets.
        let text = BASE.replace("traffic.pattern = uniform", "traffic.pattern = hs");
        assert!(parse_config(&text).is_err());
        // 1q with more than one VC.
        let text = BASE.replace("queuing.scheme = dbbm", "queuing.scheme = 1q");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn env_overrides_take_precedence() {
        let spec = parse_config_with_env(BASE, |name| {
            (name == "FTSIM_SIM_SEED").then(|| "99".to_string())
        })
        .unwrap();
        assert_eq!(spec.sim.seed, 99);
        // An env var can also supply a key absent from the file.
        let spec = parse_config_with_env(BASE, |name| {
            (name == "FTSIM_SWITCH_VOQ").then(|| "true".to_string())
        })
        .unwrap();
        assert!(spec.switch.voq);
        assert_eq!(env_var_name("routing.ltth_frac"), "FTSIM_ROUTING_LTTH_FRAC");
    }

    #[test]
    fn render_parse_round_trip() {
        let mut spec = parse_config(BASE).unwrap();
        assert_eq!(parse_config(&render_config(&spec)).unwrap(), spec);
        // A hairier spec: adaptive 2TH with restrictions, hotspots, VOQs.
        spec.routing = RoutingSpec {
            mode: RoutingMode::Adaptive,
            triggering: Triggering::TwoTh,
            ltth_frac: 0.25,
            htth_frac: 0.5,
            stage: StageRestriction::Only(1),
            delta: 2,
        };
        spec.switch.voq = true;
        spec.pattern = TrafficPattern {
            kind: PatternKind::Hotspot { frac: 0.25, targets: vec![1, 5] },
            load: 0.75,
        };
        assert_eq!(parse_config(&render_config(&spec)).unwrap(), spec);
        let ihs = ExperimentSpec {
            topology: RlftParams { ports: 4, stages: 3 },
            pattern: TrafficPattern {
                kind: PatternKind::IntermediateHotspot {
                    frac: 0.2,
                    ports: vec![(0, 2), (3, 3)],
                },
                load: 1.0,
            },
            ..spec
        };
        assert_eq!(parse_config(&render_config(&ihs)).unwrap(), ihs);
    }

    #[test]
    fn config_id_taxonomy() {
        let mut spec = parse_config(BASE).unwrap();
        assert_eq!(spec.config_id(), "DET+DBBM3");
        spec.routing.mode = RoutingMode::Adaptive;
        spec.routing.triggering = Triggering::TwoTh;
        spec.routing.stage = StageRestriction::Only(1);
        spec.routing.delta = 2;
        spec.scheme = QueueScheme::flow2sl(3);
        spec.switch.voq = true;
        assert_eq!(spec.config_id(), "ADAP-2TH-1S-Kd2+FLOW2SL3+VOQ");
        spec.routing.stage = StageRestriction::All;
        spec.routing.delta = 1;
        spec.routing.triggering = Triggering::NoTh;
        spec.switch.voq = false;
        spec.scheme = QueueScheme::one_q();
        assert_eq!(spec.config_id(), "ADAP-NOTH-*S-K+1Q");
        spec.routing.mode = RoutingMode::Oblivious;
        assert_eq!(spec.config_id(), "OBL+1Q");
    }

    #[test]
    fn sweep_produces_sorted_complete_rows() {
        let spec = parse_config(BASE).unwrap();
        let rows = sweep(&spec).unwrap();
        assert_eq!(rows.len(), 2, "one row per load");
        assert!(rows[0].load_frac < rows[1].load_frac);
        for row in &rows {
            assert_eq!(row.config_id, "DET+DBBM3");
            assert!(row.throughput_min <= row.throughput_frac);
            assert!(row.throughput_frac <= row.throughput_max);
            // Below saturation delivery tracks offered load (2 seeds of a
            // small machine: allow statistical slack).
            assert!((row.throughput_frac - row.load_frac).abs() < 0.05);
        }
    }

    #[test]
    fn sweep_rejects_empty_load_list() {
        let text = BASE.replace("sweep.loads = 0.2,0.4\n", "");
        let spec = parse_config(&text).unwrap();
        assert!(matches!(sweep(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_many_sorts_by_config_then_load() {
        let a = parse_config(BASE).unwrap();
        let mut b = a.clone();
        b.scheme = QueueScheme::one_q();
        let rows = sweep_many(&[a, b]).unwrap();
        assert_eq!(rows.len(), 4);
        let ids: Vec<&str> = rows.iter().map(|r| r.config_id.as_str()).collect();
        assert_eq!(ids, vec!["DET+1Q", "DET+1Q", "DET+DBBM3", "DET+DBBM3"]);
    }

    #[test]
    fn csv_formats_and_determinism() {
        let spec = parse_config(BASE).unwrap();
        let series = spec.run_once().unwrap();
        let a = series_csv(&series);
        let b = series_csv(&spec.run_once().unwrap());
        assert_eq!(a, b, "same seed, same bytes");
        let mut lines = a.lines();
        assert_eq!(
            lines.next().unwrap(),
            "time_ns,delivered_frac,injected_frac"
        );
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,"));
        assert_eq!(first.split(',').count(), 3);
        assert_eq!(a.lines().count(), 1 + 20, "one row per 10 µs bin");

        let rows = vec![SweepRow {
            config_id: "DET+1Q".into(),
            load_frac: 0.1,
            throughput_frac: 0.25,
            throughput_min: 0.2,
            throughput_max: 0.3,
        }];
        assert_eq!(
            sweep_csv(&rows),
            "config_id,load_frac,throughput_frac,throughput_min,throughput_max\n\
             DET+1Q,0.100000,0.250000,0.200000,0.300000\n"
        );
        assert_eq!(
            sweep_csv(&[]),
            "config_id,load_frac,throughput_frac,throughput_min,throughput_max\n"
        );
    }

    #[test]
    fn throughput_tracks_offered_load_within_one_bin() {
        let spec = parse_config(BASE).unwrap();
        let series = spec.run_once().unwrap();
        // Delivery can lag injection (packets still buffered) but never
        // beat it by more than one bin's quantization at the window edges.
        let bin_frac =
            series.bin_ns as f64 / (series.duration_ns - series.warmup_ns) as f64;
        assert!(series.delivered_frac() <= series.injected_frac() + bin_frac);
    }
}
