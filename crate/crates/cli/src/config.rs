//! TOML experiment configuration: sweep axes at the top level, engine knobs
//! in sections. Every field is optional; an empty file runs the defaults.

use serde::{Deserialize, Serialize};
use xrsched_core::engine::{QosConfig, SimConfig};
use xrsched_core::link::LinkConfig;
use xrsched_core::rng;
use xrsched_core::sched::SchedulerKind;
use xrsched_core::traffic::{TruncatedGaussianParams, XrTrafficConfig};

use crate::CliError;

/// A sweep axis that reads as either a scalar or an array.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(vs) => vs.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TgSpec {
    pub mean: f64,
    pub std: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TgSpec {
    fn from_core(p: TruncatedGaussianParams) -> Self {
        Self { mean: p.mean, std: p.std, lower: p.lower, upper: p.upper }
    }

    fn to_core(self) -> TruncatedGaussianParams {
        TruncatedGaussianParams {
            mean: self.mean,
            std: self.std,
            lower: self.lower,
            upper: self.upper,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub num_cells: u32,
    pub isd_m: f64,
    pub world_w_m: f64,
    pub world_h_m: f64,
    pub embb_per_cell: u32,
    pub slot_ms: f64,
    pub num_prbs: u32,
    pub duration_ms: f64,
    pub warmup_ms: f64,
    /// Run the per-slot scheduler-contract checks and report violations.
    pub validate: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            num_cells: d.num_cells,
            isd_m: d.isd_m,
            world_w_m: d.world_w_m,
            world_h_m: d.world_h_m,
            embb_per_cell: d.embb_per_cell,
            slot_ms: d.slot_ms,
            num_prbs: d.num_prbs,
            duration_ms: d.duration_ms,
            warmup_ms: d.warmup_ms,
            validate: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficSection {
    pub frame_rate_fps: f64,
    pub frame_size_kb: TgSpec,
    pub jitter_ms: TgSpec,
    pub pdu_payload_bytes: u32,
}

impl Default for TrafficSection {
    fn default() -> Self {
        let d = XrTrafficConfig::default();
        Self {
            frame_rate_fps: d.frame_rate_fps,
            frame_size_kb: TgSpec::from_core(d.frame_size_kb),
            jitter_ms: TgSpec::from_core(d.jitter_ms),
            pdu_payload_bytes: d.pdu_payload_bytes,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    pub tx_power_dbm: f64,
    pub pathloss_ref_db: f64,
    pub pathloss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub serving_gain_db: f64,
    pub noise_dbm: f64,
    pub bler_slope_db: f64,
    pub cbg_error_target: f64,
    pub olla_step_db: f64,
    pub olla_clamp_db: f64,
    pub cqi_period_slots: u64,
    pub cqi_delay_slots: u64,
    pub harq_rtt_slots: u64,
    pub max_harq_tx: u32,
}

impl Default for LinkSection {
    fn default() -> Self {
        let d = LinkConfig::default();
        Self {
            tx_power_dbm: d.tx_power_dbm,
            pathloss_ref_db: d.pathloss_ref_db,
            pathloss_exponent: d.pathloss_exponent,
            shadowing_sigma_db: d.shadowing_sigma_db,
            serving_gain_db: d.serving_gain_db,
            noise_dbm: d.noise_dbm,
            bler_slope_db: d.bler_slope_db,
            cbg_error_target: d.cbg_error_target,
            olla_step_db: d.olla_step_db,
            olla_clamp_db: d.olla_clamp_db,
            cqi_period_slots: d.cqi_period_slots,
            cqi_delay_slots: d.cqi_delay_slots,
            harq_rtt_slots: d.harq_rtt_slots,
            max_harq_tx: d.max_harq_tx,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QosSection {
    pub wpf_xr_weight: f64,
    pub wpf_embb_weight: f64,
    pub delta_xr: f64,
    pub delta_embb: f64,
    pub a_k: f64,
    pub tp_tau_ttis: f64,
    pub tp_floor_bps: f64,
    /// Per-UE in-time share needed for a UE to count as satisfied.
    pub satisfaction_threshold: f64,
    /// Fraction of satisfied UEs defining the capacity crossing.
    pub capacity_target: f64,
}

impl Default for QosSection {
    fn default() -> Self {
        let d = QosConfig::default();
        Self {
            wpf_xr_weight: d.wpf_xr_weight,
            wpf_embb_weight: d.wpf_embb_weight,
            delta_xr: d.delta_xr,
            delta_embb: d.delta_embb,
            a_k: d.a_k,
            tp_tau_ttis: d.tp_tau_ttis,
            tp_floor_bps: d.tp_floor_bps,
            satisfaction_threshold: 0.99,
            capacity_target: 0.90,
        }
    }
}

fn default_scheduler() -> OneOrMany<String> {
    OneOrMany::Many(vec!["proposed".into(), "wpf".into(), "mlwdf".into()])
}

fn default_xr_per_cell() -> OneOrMany<u32> {
    OneOrMany::Many(vec![3, 4, 5, 6, 7, 8])
}

fn default_psdb() -> OneOrMany<f64> {
    OneOrMany::Many(vec![10.0, 15.0, 20.0])
}

fn default_drops() -> u32 {
    10
}

fn default_seed() -> u64 {
    1
}

fn default_output_dir() -> String {
    "out".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub seed: u64,
    /// Scheduler name or list: proposed, wpf, mlwdf, pf.
    pub scheduler: OneOrMany<String>,
    pub xr_per_cell: OneOrMany<u32>,
    pub psdb_ms: OneOrMany<f64>,
    pub drops: u32,
    pub output_dir: String,
    /// 0 means one worker per available core.
    pub workers: u32,
    pub sim: SimSection,
    pub traffic: TrafficSection,
    pub link: LinkSection,
    pub qos: QosSection,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            scheduler: default_scheduler(),
            xr_per_cell: default_xr_per_cell(),
            psdb_ms: default_psdb(),
            drops: default_drops(),
            output_dir: default_output_dir(),
            workers: 0,
            sim: SimSection::default(),
            traffic: TrafficSection::default(),
            link: LinkSection::default(),
            qos: QosSection::default(),
        }
    }
}

pub fn scheduler_from_name(name: &str) -> Result<SchedulerKind, CliError> {
    match name {
        "proposed" => Ok(SchedulerKind::Proposed),
        "pf" => Ok(SchedulerKind::ProportionalFair),
        "wpf" => Ok(SchedulerKind::WeightedProportionalFair),
        "mlwdf" => Ok(SchedulerKind::MaxLwdf),
        other => Err(CliError::Config(format!(
            "scheduler: unknown value {other:?} (expected proposed, pf, wpf, or mlwdf)"
        ))),
    }
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// CI-scale profile: a small deployment with boosted serving links and
    /// lighter frames so the satisfaction knee stays inside the swept loads.
    pub fn apply_fast(&mut self) {
        self.sim.num_cells = 4;
        self.sim.duration_ms = 5_500.0;
        self.sim.warmup_ms = 500.0;
        self.drops = 3;
        self.link.pathloss_exponent = 3.5;
        self.link.serving_gain_db = 18.0;
        self.traffic.frame_size_kb =
            TgSpec { mean: 65.1, std: 7.0, lower: 32.2, upper: 98.7 };
    }

    pub fn schedulers(&self) -> Result<Vec<SchedulerKind>, CliError> {
        let names = self.scheduler.to_vec();
        if names.is_empty() {
            return Err(CliError::Config("scheduler list must be nonempty".into()));
        }
        names.iter().map(|n| scheduler_from_name(n)).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.schedulers()?;
        let loads = self.xr_per_cell.to_vec();
        if loads.is_empty() {
            return Err(CliError::Config("xr_per_cell list must be nonempty".into()));
        }
        if loads.iter().any(|&n| n == 0) {
            return Err(CliError::Config("xr_per_cell entries must be at least 1".into()));
        }
        let psdbs = self.psdb_ms.to_vec();
        if psdbs.is_empty() {
            return Err(CliError::Config("psdb_ms list must be nonempty".into()));
        }
        if self.drops == 0 {
            return Err(CliError::Config("drops must be at least 1".into()));
        }
        if !(self.qos.satisfaction_threshold > 0.0 && self.qos.satisfaction_threshold <= 1.0) {
            return Err(CliError::Config("satisfaction_threshold must lie in (0, 1]".into()));
        }
        if !(self.qos.capacity_target > 0.0 && self.qos.capacity_target <= 1.0) {
            return Err(CliError::Config("capacity_target must lie in (0, 1]".into()));
        }
        // Engine-level constraints, checked once per sweep point variant.
        for &psdb in &psdbs {
            for &n in &loads {
                let cfg = self.sim_config(SchedulerKind::Proposed, psdb, n);
                cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Engine configuration for one sweep point. World randomness is shared
    /// by every point (paired comparisons); the PHY stream is hashed per
    /// point so stochastic channel draws stay independent across the sweep.
    pub fn sim_config(&self, scheduler: SchedulerKind, psdb_ms: f64, xr_per_cell: u32) -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.scheduler = scheduler;
        cfg.num_cells = self.sim.num_cells;
        cfg.isd_m = self.sim.isd_m;
        cfg.world_w_m = self.sim.world_w_m;
        cfg.world_h_m = self.sim.world_h_m;
        cfg.xr_per_cell = xr_per_cell;
        cfg.embb_per_cell = self.sim.embb_per_cell;
        cfg.slot_ms = self.sim.slot_ms;
        cfg.num_prbs = self.sim.num_prbs;
        cfg.duration_ms = self.sim.duration_ms;
        cfg.warmup_ms = self.sim.warmup_ms;
        cfg.validate = self.sim.validate;

        cfg.traffic.frame_rate_fps = self.traffic.frame_rate_fps;
        cfg.traffic.frame_size_kb = self.traffic.frame_size_kb.to_core();
        cfg.traffic.jitter_ms = self.traffic.jitter_ms.to_core();
        cfg.traffic.pdu_payload_bytes = self.traffic.pdu_payload_bytes;
        cfg.traffic.psdb_ms = psdb_ms;

        cfg.link.tx_power_dbm = self.link.tx_power_dbm;
        cfg.link.pathloss_ref_db = self.link.pathloss_ref_db;
        cfg.link.pathloss_exponent = self.link.pathloss_exponent;
        cfg.link.shadowing_sigma_db = self.link.shadowing_sigma_db;
        cfg.link.serving_gain_db = self.link.serving_gain_db;
        cfg.link.noise_dbm = self.link.noise_dbm;
        cfg.link.bler_slope_db = self.link.bler_slope_db;
        cfg.link.cbg_error_target = self.link.cbg_error_target;
        cfg.link.olla_step_db = self.link.olla_step_db;
        cfg.link.olla_clamp_db = self.link.olla_clamp_db;
        cfg.link.cqi_period_slots = self.link.cqi_period_slots;
        cfg.link.cqi_delay_slots = self.link.cqi_delay_slots;
        cfg.link.harq_rtt_slots = self.link.harq_rtt_slots;
        cfg.link.max_harq_tx = self.link.max_harq_tx;

        cfg.qos.wpf_xr_weight = self.qos.wpf_xr_weight;
        cfg.qos.wpf_embb_weight = self.qos.wpf_embb_weight;
        cfg.qos.delta_xr = self.qos.delta_xr;
        cfg.qos.delta_embb = self.qos.delta_embb;
        cfg.qos.a_k = self.qos.a_k;
        cfg.qos.tp_tau_ttis = self.qos.tp_tau_ttis;
        cfg.qos.tp_floor_bps = self.qos.tp_floor_bps;

        cfg.world_seed = self.seed;
        cfg.seed = rng::derive_seed(
            self.seed,
            "phy-point",
            point_label_hash(scheduler, psdb_ms, xr_per_cell),
        );
        cfg
    }

    /// Stable fingerprint of the effective configuration; embedded in every
    /// output file so artifacts can be matched to the settings that made them.
    pub fn config_hash(&self) -> u64 {
        let canonical = toml::to_string(self).expect("config serializes");
        rng::fnv1a(canonical.as_bytes())
    }
}

fn point_label_hash(scheduler: SchedulerKind, psdb_ms: f64, xr_per_cell: u32) -> u64 {
    let label = format!("{}|{}|{}", scheduler.name(), psdb_ms, xr_per_cell);
    rng::fnv1a(label.as_bytes())
}

/// Unambiguous TOML float literal (always carries a decimal point).
fn tf(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

fn tf_list(vs: &[f64]) -> String {
    let parts: Vec<String> = vs.iter().map(|&v| tf(v)).collect();
    format!("[{}]", parts.join(", "))
}

fn tg(p: TgSpec) -> String {
    format!(
        "{{ mean = {}, std = {}, lower = {}, upper = {} }}",
        tf(p.mean),
        tf(p.std),
        tf(p.lower),
        tf(p.upper)
    )
}

/// Reference configuration file: every key with its default value and a
/// one-line description. Generated from the live defaults, so parsing it
/// back yields exactly `FileConfig::default()` (checked by a unit test).
pub fn reference_toml(hash: u64, seed: u64) -> String {
    let d = FileConfig::default();
    let scheds: Vec<String> = d.scheduler.to_vec().iter().map(|s| format!("{s:?}")).collect();
    let loads: Vec<String> = d.xr_per_cell.to_vec().iter().map(|n| n.to_string()).collect();
    format!(
        r#"# config_hash={hash:016x} seed={seed}
# Reference configuration: every key with its default value. An empty config
# file is equivalent to this one; any key may be omitted. Unknown keys are
# rejected. The sweep axes (scheduler, xr_per_cell, psdb_ms) accept either a
# single value or an array.

# Master seed. World randomness (drops, positions, traffic) is shared across
# sweep points for paired comparisons; channel randomness is derived per
# (scheduler, psdb, load) tuple.
seed = {seed_v}
# Schedulers to sweep: "proposed", "pf", "wpf", "mlwdf".
scheduler = [{scheds}]
# XR UEs per cell (load axis).
xr_per_cell = [{loads}]
# PDU-set delay budgets to sweep, in milliseconds.
psdb_ms = {psdbs}
# Independent drops per sweep point.
drops = {drops}
# Output directory (overridden by --out, which is overridden by XRSCHED_OUT).
output_dir = {outdir:?}
# Worker threads; 0 means one per available core.
workers = {workers}

[sim]
# Deployment: cells on a two-row grid with this inter-site distance.
num_cells = {num_cells}
isd_m = {isd}
# Bounding box UEs are dropped into; 0.0 sizes it from the cell grid.
world_w_m = {ww}
world_h_m = {wh}
# Full-buffer eMBB UEs per cell.
embb_per_cell = {embb}
# TDD slot length; the DDDSU pattern repeats every five slots.
slot_ms = {slot}
# Downlink PRBs per slot.
num_prbs = {prbs}
# Simulated time per drop, including warmup.
duration_ms = {dur}
# Leading interval excluded from every statistic.
warmup_ms = {warm}
# Run the per-slot scheduler-contract checks and record violations.
validate = {validate}

[traffic]
# XR video frames per second; one frame is one PDU-set.
frame_rate_fps = {fps}
# Truncated-Gaussian frame size, in kilobytes.
frame_size_kb = {fsz}
# Truncated-Gaussian network jitter added to each frame arrival, in ms.
jitter_ms = {jit}
# Frames are segmented into PDUs of this payload size.
pdu_payload_bytes = {pdu}

[link]
tx_power_dbm = {txp}
# Distance-based pathloss: ref + 10 * exponent * log10(distance).
pathloss_ref_db = {plref}
pathloss_exponent = {plexp}
# Log-normal shadowing, redrawn per drop.
shadowing_sigma_db = {shadow}
# Gain applied on the serving link only (beam pointing at the served UE).
serving_gain_db = {sgain}
# Thermal noise over the carrier bandwidth.
noise_dbm = {noise}
# Logistic CBG error curve steepness around the MCS threshold.
bler_slope_db = {bler}
# Outer-loop target for first-transmission CBG errors.
cbg_error_target = {cbgt}
olla_step_db = {ostep}
olla_clamp_db = {oclamp}
# CQI reporting period and report age, in slots.
cqi_period_slots = {cqip}
cqi_delay_slots = {cqid}
# Slots between a NACK and the retransmission grant.
harq_rtt_slots = {hrtt}
# Transmission attempts per CBG before the data is abandoned.
max_harq_tx = {hmax}

[qos]
# Weighted-PF scheduler weights.
wpf_xr_weight = {wxr}
wpf_embb_weight = {wembb}
# M-LWDF target delay-violation probabilities.
delta_xr = {dxr}
delta_embb = {dembb}
# Objective weight of one satisfied XR UE in the oracle comparison.
a_k = {ak}
# Exponential throughput-average time constant (TTIs) and rate floor (bps).
tp_tau_ttis = {tau}
tp_floor_bps = {floor}
# Per-UE in-time share required for the UE to count as satisfied.
satisfaction_threshold = {sat}
# Fraction of satisfied UEs defining the capacity crossing.
capacity_target = {cap}
"#,
        seed_v = d.seed,
        scheds = scheds.join(", "),
        loads = loads.join(", "),
        psdbs = tf_list(&d.psdb_ms.to_vec()),
        drops = d.drops,
        outdir = d.output_dir,
        workers = d.workers,
        num_cells = d.sim.num_cells,
        isd = tf(d.sim.isd_m),
        ww = tf(d.sim.world_w_m),
        wh = tf(d.sim.world_h_m),
        embb = d.sim.embb_per_cell,
        slot = tf(d.sim.slot_ms),
        prbs = d.sim.num_prbs,
        dur = tf(d.sim.duration_ms),
        warm = tf(d.sim.warmup_ms),
        validate = d.sim.validate,
        fps = tf(d.traffic.frame_rate_fps),
        fsz = tg(d.traffic.frame_size_kb),
        jit = tg(d.traffic.jitter_ms),
        pdu = d.traffic.pdu_payload_bytes,
        txp = tf(d.link.tx_power_dbm),
        plref = tf(d.link.pathloss_ref_db),
        plexp = tf(d.link.pathloss_exponent),
        shadow = tf(d.link.shadowing_sigma_db),
        sgain = tf(d.link.serving_gain_db),
        noise = tf(d.link.noise_dbm),
        bler = tf(d.link.bler_slope_db),
        cbgt = tf(d.link.cbg_error_target),
        ostep = tf(d.link.olla_step_db),
        oclamp = tf(d.link.olla_clamp_db),
        cqip = d.link.cqi_period_slots,
        cqid = d.link.cqi_delay_slots,
        hrtt = d.link.harq_rtt_slots,
        hmax = d.link.max_harq_tx,
        wxr = tf(d.qos.wpf_xr_weight),
        wembb = tf(d.qos.wpf_embb_weight),
        dxr = tf(d.qos.delta_xr),
        dembb = tf(d.qos.delta_embb),
        ak = tf(d.qos.a_k),
        tau = tf(d.qos.tp_tau_ttis),
        floor = tf(d.qos.tp_floor_bps),
        sat = tf(d.qos.satisfaction_threshold),
        cap = tf(d.qos.capacity_target),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = FileConfig::parse("").unwrap();
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.drops, 10);
        assert_eq!(cfg.sim.num_cells, 12);
        assert_eq!(cfg.sim.num_prbs, 272);
        assert_eq!(cfg.sim.embb_per_cell, 3);
        assert_eq!(cfg.traffic.frame_rate_fps, 60.0);
        let f = cfg.traffic.frame_size_kb;
        assert_eq!((f.mean, f.std, f.lower, f.upper), (93.0, 10.0, 46.0, 141.0));
        assert_eq!(cfg.psdb_ms.to_vec(), vec![10.0, 15.0, 20.0]);
        cfg.validate().unwrap();
    }

    #[test]
    fn scalar_axes_parse_like_singleton_lists() {
        let cfg = FileConfig::parse(
            "scheduler = \"proposed\"\nxr_per_cell = 6\npsdb_ms = 15.0\n",
        )
        .unwrap();
        assert_eq!(cfg.schedulers().unwrap(), vec![SchedulerKind::Proposed]);
        assert_eq!(cfg.xr_per_cell.to_vec(), vec![6]);
        assert_eq!(cfg.psdb_ms.to_vec(), vec![15.0]);
    }

    #[test]
    fn negative_psdb_is_rejected_by_name() {
        let cfg = FileConfig::parse("psdb_ms = -1.0").unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("psdb_ms"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = FileConfig::parse("frame_rate = 90\n").unwrap_err().to_string();
        assert!(err.contains("frame_rate"), "{err}");
        let err = FileConfig::parse("[sim]\nn_cells = 4\n").unwrap_err().to_string();
        assert!(err.contains("n_cells"), "{err}");
    }

    #[test]
    fn type_mismatch_points_at_the_line() {
        let err = FileConfig::parse("drops = \"ten\"\n").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn bad_scheduler_name_is_descriptive() {
        let cfg = FileConfig::parse("scheduler = \"edf\"").unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("edf") && err.contains("proposed"), "{err}");
    }

    #[test]
    fn world_randomness_is_shared_and_phy_streams_differ() {
        let cfg = FileConfig::default();
        let a = cfg.sim_config(SchedulerKind::Proposed, 15.0, 6);
        let b = cfg.sim_config(SchedulerKind::WeightedProportionalFair, 15.0, 6);
        assert_eq!(a.world_seed, b.world_seed);
        assert_ne!(a.seed, b.seed);
        let c = cfg.sim_config(SchedulerKind::Proposed, 10.0, 6);
        assert_ne!(a.seed, c.seed);
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = FileConfig::parse("").unwrap().config_hash();
        let b = FileConfig::parse("seed = 2").unwrap().config_hash();
        assert_ne!(a, b);
        assert_eq!(a, FileConfig::parse("seed = 1").unwrap().config_hash());
    }

    #[test]
    fn reference_file_round_trips_to_the_defaults() {
        let text = reference_toml(0xABCD, 7);
        let parsed = FileConfig::parse(&text).unwrap();
        assert_eq!(parsed.config_hash(), FileConfig::default().config_hash());
        assert!(text.contains("# config_hash=000000000000abcd seed=7"));
    }

    #[test]
    fn fast_profile_shrinks_the_deployment() {
        let mut cfg = FileConfig::default();
        cfg.apply_fast();
        assert_eq!(cfg.sim.num_cells, 4);
        assert_eq!(cfg.drops, 3);
        assert_eq!(cfg.sim.duration_ms, 5_500.0);
        cfg.validate().unwrap();
    }
}
