//! Configuration files and the commands of the `wcf` binary.
//!
//! A configuration is a TOML file. It may name a `preset` (`defaults` or
//! `ideal`); every other key is merged over that preset table by table, so a
//! file only needs the values it changes. `wcf show-config` prints the fully
//! resolved configuration, which is the canonical form of a file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::adversary::{alice_sweep, argmax_by, bob_optimal_attack, linspace, DeterrentFactor};
use crate::error::{check_unit, Error, Result};
use crate::montecarlo::{
    outcome_rates, simulate, simulate_records, standard_errors, z_scores, CampaignTally,
    CoincidenceCounts, McSetup, NoiseModel, Scenario,
};
use crate::optics::PathEfficiencies;
use crate::protocol::{
    apply_channel, correctness, fairness, honest_outcomes, honest_reflectivities, ChannelModel,
    OutcomeDistribution, VoaCounts, DEFAULT_ATTENUATION_PER_KM,
};
use crate::spdc::{compute_jsa, schmidt_analysis, spectral_summaries, SourceParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub distances_km: Vec<f64>,
    pub attenuation_per_km: f64,
    pub voa_counts: VoaCounts,
}

impl ChannelConfig {
    pub fn at(&self, distance_km: f64) -> ChannelModel {
        ChannelModel {
            distance_km,
            attenuation_per_km: self.attenuation_per_km,
            voa_counts: self.voa_counts,
        }
    }
}

/// Grid of Alice's reflectivity attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub x_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    /// Also evaluate the honest reflectivity `x_h` if it lies in range.
    pub include_honest_x: bool,
    pub deltas: Vec<f64>,
    pub distance_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    /// Heralded runs per scenario.
    pub runs: u64,
    pub scenarios: Vec<Scenario>,
    pub distance_km: f64,
    /// Keep only runs whose slow phase lies within this distance of 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_window: Option<f64>,
    /// Leading runs of each scenario written to the run log; 0 disables it.
    pub log_runs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsaConfig {
    pub grid_size: usize,
    pub window_sigmas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

/// Everything a command needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub visibility: f64,
    pub efficiencies: PathEfficiencies,
    pub noise: NoiseModel,
    pub channel: ChannelConfig,
    pub sweep: SweepConfig,
    pub mc: McConfig,
    pub source: SourceParams,
    pub jsa: JsaConfig,
    pub output: OutputConfig,
}

pub const PRESETS: [&str; 2] = ["defaults", "ideal"];

impl Default for ExperimentConfig {
    /// Reference efficiencies, `v = 0.96`, `p = 0.015` with the reference dark rates.
    fn default() -> Self {
        Self {
            seed: 1,
            visibility: 0.96,
            efficiencies: PathEfficiencies::REFERENCE,
            noise: NoiseModel::default(),
            channel: ChannelConfig {
                distances_km: (0..=5).map(|k| 5.0 * k as f64).collect(),
                attenuation_per_km: DEFAULT_ATTENUATION_PER_KM,
                voa_counts: VoaCounts::default(),
            },
            sweep: SweepConfig {
                x_points: crate::adversary::DEFAULT_X_POINTS,
                x_min: 0.0,
                x_max: 1.0,
                include_honest_x: true,
                deltas: vec![0.0, 0.5, 1.0, 2.0],
                distance_km: 0.0,
            },
            mc: McConfig {
                runs: 1_000_000,
                scenarios: vec![
                    Scenario::Honest,
                    Scenario::BobAttack,
                    Scenario::AliceAttack { x: 0.78 },
                ],
                distance_km: 0.0,
                phase_window: None,
                log_runs: 0,
            },
            source: SourceParams::default(),
            jsa: JsaConfig {
                grid_size: 512,
                window_sigmas: 4.0,
            },
            output: OutputConfig { dir: "out".into() },
        }
    }
}

fn field<T>(name: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::Config(msg) => Error::Config(msg),
        other => Error::Config(format!("{name}: {other}")),
    })
}

fn non_negative(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name}: {value} must be finite and non-negative"
        )))
    }
}

impl ExperimentConfig {
    /// Lossless, perfectly visible setup without noise.
    pub fn ideal() -> Self {
        let defaults = Self::default();
        Self {
            visibility: 1.0,
            efficiencies: PathEfficiencies::IDEAL,
            noise: NoiseModel::noiseless(defaults.noise.pair_prob),
            channel: ChannelConfig {
                distances_km: vec![0.0],
                ..defaults.channel.clone()
            },
            ..defaults
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "defaults" => Ok(Self::default()),
            "ideal" => Ok(Self::ideal()),
            other => Err(Error::Config(format!(
                "preset: unknown preset {other:?}, expected one of {PRESETS:?}"
            ))),
        }
    }

    /// Parses a configuration file body, merging it over its preset.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("parse: {e}")))?;
        let preset = match table.remove("preset") {
            None => "defaults".to_string(),
            Some(toml::Value::String(name)) => name,
            Some(other) => {
                return Err(Error::Config(format!(
                    "preset: expected a string, found {other}"
                )))
            }
        };
        let mut merged = Self::preset(&preset)?.to_toml_value()?;
        merge(&mut merged, toml::Value::Table(table));
        let config: Self = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_config(e))))
    }

    fn to_toml_value(&self) -> Result<toml::Value> {
        toml::Value::try_from(self).map_err(|e| Error::Config(format!("serialize: {e}")))
    }

    /// Canonical TOML form: every field explicit, no preset.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("serialize: {e}")))
    }

    /// Checks every field; the message names the offending one.
    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!(
                "seed: {} does not fit a TOML integer",
                self.seed
            )));
        }
        field("visibility", check_unit("visibility", self.visibility))?;
        field("efficiencies", self.efficiencies.validate())?;
        field("noise", self.noise.validate())?;

        let ch = &self.channel;
        if ch.distances_km.is_empty() {
            return Err(Error::Config("channel.distances_km: list is empty".into()));
        }
        non_negative("channel.attenuation_per_km", ch.attenuation_per_km)?;
        for &d in &ch.distances_km {
            non_negative("channel.distances_km", d)?;
        }

        let sw = &self.sweep;
        if sw.x_points == 0 {
            return Err(Error::Config("sweep.x_points: must be at least 1".into()));
        }
        field("sweep.x_min", check_unit("x_min", sw.x_min))?;
        field("sweep.x_max", check_unit("x_max", sw.x_max))?;
        if sw.x_min > sw.x_max {
            return Err(Error::Config(format!(
                "sweep: x_min {} exceeds x_max {}",
                sw.x_min, sw.x_max
            )));
        }
        for &d in &sw.deltas {
            field("sweep.deltas", DeterrentFactor::new(d))?;
        }
        non_negative("sweep.distance_km", sw.distance_km)?;

        let mc = &self.mc;
        non_negative("mc.distance_km", mc.distance_km)?;
        for s in &mc.scenarios {
            if let Scenario::AliceAttack { x } = s {
                field("mc.scenarios", check_unit("x", *x))?;
            }
        }
        if let Some(w) = mc.phase_window {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Config(format!(
                    "mc.phase_window: {w} must be positive"
                )));
            }
        }

        field("source", self.source.validate())?;
        if self.jsa.grid_size < 16 {
            return Err(Error::Config(format!(
                "jsa.grid_size: {} is below 16",
                self.jsa.grid_size
            )));
        }
        if !(self.jsa.window_sigmas.is_finite() && self.jsa.window_sigmas > 0.0) {
            return Err(Error::Config(format!(
                "jsa.window_sigmas: {} must be positive",
                self.jsa.window_sigmas
            )));
        }
        Ok(())
    }
}

fn strip_config(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}

/// Recursive table merge; anything that is not a pair of tables is replaced.
fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (key, value) in o {
                match b.get_mut(&key) {
                    Some(slot) => merge(slot, value),
                    None => {
                        b.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

/// Formats with nine significant digits.
pub fn format_sig9(value: f64) -> String {
    if value == 0.0 {
        return "0".into();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let exponent = value.abs().log10().floor() as i32;
    let decimals = 8 - exponent;
    if (0..=12).contains(&decimals) {
        format!("{value:.*}", decimals as usize)
    } else {
        format!("{value:.8e}")
    }
}

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(&self.header)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|&v| format_sig9(v)))?;
        }
        out.flush()?;
        Ok(())
    }
}

const OUTCOME_COLUMNS: [&str; 5] = [
    "p_alice_wins",
    "p_bob_wins",
    "p_alice_sanctioned",
    "p_bob_sanctioned",
    "p_abort",
];

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Honest protocol at every configured distance.
pub fn cmd_honest(config: &ExperimentConfig) -> Result<Table> {
    let mut head = header(&["L_km", "x_h", "y_h", "z_h"]);
    head.extend(header(&OUTCOME_COLUMNS));
    head.extend(header(&["fairness", "correctness"]));
    let rows = config
        .channel
        .distances_km
        .iter()
        .map(|&l| {
            let eff = apply_channel(&config.efficiencies, &config.channel.at(l))?;
            let refl = honest_reflectivities(&eff, config.visibility)?;
            let dist = honest_outcomes(&eff, config.visibility)?;
            let mut row = vec![l, refl.x, refl.y, refl.z];
            row.extend(dist.to_array());
            row.push(fairness(&dist)?);
            row.push(correctness(&dist)?);
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(Table { header: head, rows })
}

/// Bob's optimal attack at every configured distance.
pub fn cmd_cheat_bob(config: &ExperimentConfig) -> Result<Table> {
    let rows = config
        .channel
        .distances_km
        .iter()
        .map(|&l| {
            let eff = apply_channel(&config.efficiencies, &config.channel.at(l))?;
            let d = bob_optimal_attack(&eff, config.visibility)?;
            Ok(vec![l, d.p_bob_wins, d.p_bob_sanctioned])
        })
        .collect::<Result<_>>()?;
    Ok(Table {
        header: header(&["L_km", "p_bob_wins", "p_bob_sanctioned"]),
        rows,
    })
}

/// Column name of Alice's interest for deterrent factor `delta`.
pub fn interest_column(delta: f64) -> String {
    format!("interest_delta_{delta}")
}

/// Alice's reflectivity attack over the configured `x` grid.
pub fn cmd_cheat_alice(config: &ExperimentConfig) -> Result<Table> {
    let sw = &config.sweep;
    let eff = apply_channel(&config.efficiencies, &config.channel.at(sw.distance_km))?;
    let mut xs = linspace(sw.x_min, sw.x_max, sw.x_points);
    if sw.include_honest_x {
        let x_h = honest_reflectivities(&eff, config.visibility)?.x;
        if (sw.x_min..=sw.x_max).contains(&x_h) && !xs.contains(&x_h) {
            let at = xs.partition_point(|&x| x < x_h);
            xs.insert(at, x_h);
        }
    }
    let deltas = sw
        .deltas
        .iter()
        .map(|&d| DeterrentFactor::new(d))
        .collect::<Result<Vec<_>>>()?;
    let points = alice_sweep(&xs, &eff, config.visibility, &deltas)?;

    let mut head = header(&["x"]);
    head.extend(header(&OUTCOME_COLUMNS));
    head.extend(sw.deltas.iter().map(|&d| interest_column(d)));
    let rows = points
        .iter()
        .map(|p| {
            let mut row = vec![p.x];
            row.extend(p.outcomes.to_array());
            row.extend(&p.interest);
            row
        })
        .collect();
    Ok(Table { header: head, rows })
}

fn distribution_from(values: [f64; 5]) -> OutcomeDistribution {
    OutcomeDistribution {
        p_alice_wins: values[0],
        p_bob_wins: values[1],
        p_alice_sanctioned: values[2],
        p_bob_sanctioned: values[3],
        p_abort: values[4],
    }
}

/// Monte Carlo result of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McScenarioSummary {
    pub label: String,
    pub scenario: Scenario,
    pub seed: u64,
    /// Heralded runs inside the phase window.
    pub counted_runs: u64,
    pub counts: CoincidenceCounts,
    pub empirical: OutcomeDistribution,
    pub analytic: OutcomeDistribution,
    pub standard_errors: OutcomeDistribution,
    /// Infinite scores (zero standard error, nonzero deviation) serialise as null.
    pub z_scores: OutcomeDistribution,
    pub max_abs_z: f64,
    pub false_heralds: u64,
    pub false_herald_aborts: u64,
    pub false_herald_abort_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub seed: u64,
    pub runs: u64,
    pub visibility: f64,
    pub distance_km: f64,
    pub phase_window: Option<f64>,
    pub scenarios: Vec<McScenarioSummary>,
}

/// Seed of the `k`-th scenario of a campaign.
pub fn scenario_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add(k as u64)
}

fn mc_setup(config: &ExperimentConfig, scenario: &Scenario) -> Result<McSetup> {
    let eff = apply_channel(
        &config.efficiencies,
        &config.channel.at(config.mc.distance_km),
    )?;
    McSetup::for_scenario(scenario, &eff, config.visibility, &config.noise)
}

/// Runs every configured scenario and compares it with its analytic reference.
pub fn cmd_mc(config: &ExperimentConfig) -> Result<McSummary> {
    let mc = &config.mc;
    if mc.runs == 0 {
        return Err(Error::NoRuns("mc.runs is 0".into()));
    }
    let scenarios = mc
        .scenarios
        .iter()
        .enumerate()
        .map(|(k, scenario)| {
            let setup = mc_setup(config, scenario)?;
            let seed = scenario_seed(config.seed, k);
            let tally: CampaignTally = simulate(&setup, mc.runs, seed, mc.phase_window)?;
            let n = tally.counts.r_h;
            let empirical = outcome_rates(&tally.counts)?;
            let analytic = setup.analytic_reference()?;
            let z = z_scores(&empirical, &analytic, n);
            Ok(McScenarioSummary {
                label: scenario.label(),
                scenario: *scenario,
                seed,
                counted_runs: n,
                counts: tally.counts,
                empirical,
                analytic,
                standard_errors: distribution_from(standard_errors(&analytic, n)),
                z_scores: distribution_from(z),
                max_abs_z: z.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
                false_heralds: tally.false_heralds,
                false_herald_aborts: tally.false_herald_aborts,
                false_herald_abort_rate: tally.false_herald_abort_rate(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(McSummary {
        seed: config.seed,
        runs: mc.runs,
        visibility: config.visibility,
        distance_km: mc.distance_km,
        phase_window: mc.phase_window,
        scenarios,
    })
}

/// Writes the leading `mc.log_runs` runs of every scenario as JSON lines.
pub fn write_run_log<W: Write>(config: &ExperimentConfig, mut out: W) -> Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        scenario: &'a str,
        index: u64,
        #[serde(flatten)]
        run: &'a crate::montecarlo::RunRecord,
        outcome: &'static str,
    }
    let mc = &config.mc;
    let n = mc.log_runs.min(mc.runs);
    for (k, scenario) in mc.scenarios.iter().enumerate() {
        let setup = mc_setup(config, scenario)?;
        let label = scenario.label();
        let records = simulate_records(&setup, 0..n, scenario_seed(config.seed, k))?;
        for (index, run) in records.iter().enumerate() {
            let line = Line {
                scenario: &label,
                index: index as u64,
                run,
                outcome: run.outcome()?.name(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Scalar results of the source model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JsaSummary {
    pub grid_size: usize,
    pub window_sigmas: f64,
    pub source: SourceParams,
    pub schmidt_number: f64,
    pub purity: f64,
    /// Null when the marginal does not fall to half maximum inside the grid.
    pub signal_fwhm_nm: Option<f64>,
    pub coherence_length_mm: Option<f64>,
    pub leading_schmidt_weights: Vec<f64>,
}

/// Joint spectrum on the configured grid and its summary.
pub fn cmd_jsa(config: &ExperimentConfig) -> Result<(crate::spdc::JsaGrid, JsaSummary)> {
    let jsa = compute_jsa(
        &config.source,
        config.jsa.grid_size,
        config.jsa.window_sigmas,
    )?;
    let schmidt = schmidt_analysis(&jsa)?;
    let spectral = spectral_summaries(&jsa).ok();
    let summary = JsaSummary {
        grid_size: config.jsa.grid_size,
        window_sigmas: config.jsa.window_sigmas,
        source: config.source,
        schmidt_number: schmidt.schmidt_number,
        purity: schmidt.purity,
        signal_fwhm_nm: spectral.map(|s| s.signal_fwhm_nm),
        coherence_length_mm: spectral.map(|s| s.coherence_length_mm),
        leading_schmidt_weights: schmidt.weights.iter().take(10).copied().collect(),
    };
    Ok((jsa, summary))
}

/// Command line of the `wcf` binary.
#[derive(Debug, Parser)]
#[command(
    name = "wcf",
    version,
    about = "Weak coin flipping models, sweeps and Monte Carlo"
)]
pub struct Cli {
    /// TOML configuration; the `defaults` preset when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct DistanceArgs {
    /// Distances in km, comma separated or repeated.
    #[arg(long = "distance", value_delimiter = ',')]
    pub distance: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Honest outcome probabilities, fairness and correctness versus distance.
    Honest(DistanceArgs),
    /// Bob's optimal attack versus distance.
    CheatBob(DistanceArgs),
    /// Alice's reflectivity attack over an x grid.
    CheatAlice {
        /// Number of x points.
        #[arg(long = "x-grid")]
        x_grid: Option<usize>,
        /// Deterrent factors, comma separated or repeated.
        #[arg(long = "delta", value_delimiter = ',')]
        delta: Vec<f64>,
    },
    /// Monte Carlo campaign compared with the analytic model.
    Mc {
        /// Heralded runs per scenario.
        #[arg(long)]
        runs: Option<u64>,
    },
    /// Joint spectral amplitude, Schmidt number and bandwidth of the source.
    Jsa {
        /// Grid points per axis.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Prints the resolved configuration in canonical form.
    ShowConfig,
}

impl Cli {
    /// Loads the configuration and applies every command-line override.
    pub fn resolve_config(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output.dir = out.clone();
        }
        match &self.command {
            Command::Honest(d) | Command::CheatBob(d) if !d.distance.is_empty() => {
                config.channel.distances_km = d.distance.clone();
            }
            Command::CheatAlice { x_grid, delta } => {
                if let Some(n) = x_grid {
                    config.sweep.x_points = *n;
                }
                if !delta.is_empty() {
                    config.sweep.deltas = delta.clone();
                }
            }
            Command::Mc { runs: Some(n) } => config.mc.runs = *n,
            Command::Jsa { grid: Some(n) } => config.jsa.grid_size = *n,
            _ => {}
        }
        config.validate()?;
        Ok(config)
    }

    /// Runs the command and returns the paths it wrote.
    pub fn run(&self) -> Result<Vec<PathBuf>> {
        let config = self.resolve_config()?;
        let dir = &config.output.dir;
        let table_to = |name: &str, table: Table| -> Result<PathBuf> {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            table.write_csv(fs::File::create(&path)?)?;
            Ok(path)
        };
        match &self.command {
            Command::Honest(_) => Ok(vec![table_to("honest.csv", cmd_honest(&config)?)?]),
            Command::CheatBob(_) => Ok(vec![table_to("cheat_bob.csv", cmd_cheat_bob(&config)?)?]),
            Command::CheatAlice { .. } => Ok(vec![table_to(
                "cheat_alice.csv",
                cmd_cheat_alice(&config)?,
            )?]),
            Command::Mc { .. } => {
                let summary = cmd_mc(&config)?;
                fs::create_dir_all(dir)?;
                let path = dir.join("mc.json");
                write_json(&path, &summary)?;
                let mut written = vec![path];
                if config.mc.log_runs > 0 {
                    let log = dir.join("mc_runs.jsonl");
                    write_run_log(&config, std::io::BufWriter::new(fs::File::create(&log)?))?;
                    written.push(log);
                }
                Ok(written)
            }
            Command::Jsa { .. } => {
                let (jsa, summary) = cmd_jsa(&config)?;
                fs::create_dir_all(dir)?;
                let grid = dir.join("jsa.csv");
                jsa.write_intensity_csv(std::io::BufWriter::new(fs::File::create(&grid)?))?;
                let path = dir.join("jsa.json");
                write_json(&path, &summary)?;
                Ok(vec![grid, path])
            }
            Command::ShowConfig => {
                print!("{}", config.to_toml_string()?);
                Ok(Vec::new())
            }
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Argmax of a column together with the grid step of the `x` column.
pub fn argmax_x(table: &Table, column: &str) -> Option<(f64, f64)> {
    let xs = table.column("x")?;
    let values = table.column(column)?;
    let pairs: Vec<(f64, f64)> = xs.iter().copied().zip(values).collect();
    let best = argmax_by(&pairs, |p| p.1)?;
    let step = if xs.len() > 1 {
        (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64
    } else {
        0.0
    };
    Some((best.0, step))
}
