//! Run-by-run sampling of the protocol with source and detector noise.
//!
//! Every run draws from its own ChaCha stream keyed by `(seed, run index)`,
//! so a run's record does not depend on how the index range is split across
//! threads. Outcome probabilities are recovered the way a time tagger would
//! measure them, from heralded coincidence tallies and exclusive rates
//! `R_{u\v} = R_u - R_{uv}`.
//!
//! Fast phase noise is not sampled: it is already contained in the visibility.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::alice_x_attack;
use crate::adversary::bob_optimal_attack;
use crate::error::{check_unit, Error, Result, CLAMP_TOLERANCE};
use crate::optics::{InterferenceModel, InterferenceTerms, PathEfficiencies, Reflectivities};
use crate::protocol::{
    classify_outcome, honest_outcomes, honest_reflectivities, outcomes_from_optics, Outcome,
    OutcomeDistribution,
};

/// Pair emission probability per pump pulse of the reference source.
pub const DEFAULT_PAIR_PROB: f64 = 0.015;
/// Heralded run rate of the reference setup, Hz.
pub const REFERENCE_RUN_RATE_HZ: f64 = 51e3;
/// Runs triggered by herald dark counts on the reference setup, Hz.
pub const REFERENCE_FALSE_TRIGGER_HZ: f64 = 40.0;
/// Signal detector dark count rate (SNSPD upper bound), Hz.
pub const SNSPD_DARK_RATE_HZ: f64 = 100.0;
/// Coincidence gate width, s.
pub const GATE_WINDOW_S: f64 = 500e-12;
/// Default standard deviation of one random-walk step of the slow phase, rad.
pub const DEFAULT_PHASE_STEP_STD: f64 = 0.01;

const PHASE_STREAM_SALT: u64 = 0x5107_F1A5_E0DD_2C3B;

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_phase(phase: f64) -> f64 {
    (phase + PI).rem_euclid(2.0 * PI) - PI
}

/// Slow phase difference between the interferometer arms over the campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlowPhaseProcess {
    /// Phase held fixed, e.g. an ideally post-selected or locked interferometer.
    Constant { phase: f64 },
    /// Gaussian random walk with one step per heralded run, wrapped to `[-pi, pi)`.
    RandomWalk {
        #[serde(default)]
        start: f64,
        #[serde(default = "default_step_std")]
        step_std: f64,
    },
}

fn default_step_std() -> f64 {
    DEFAULT_PHASE_STEP_STD
}

impl Default for SlowPhaseProcess {
    fn default() -> Self {
        SlowPhaseProcess::Constant { phase: 0.0 }
    }
}

impl SlowPhaseProcess {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SlowPhaseProcess::Constant { phase } if phase.is_finite() => Ok(()),
            SlowPhaseProcess::RandomWalk { start, step_std }
                if start.is_finite() && step_std.is_finite() && step_std >= 0.0 =>
            {
                Ok(())
            }
            other => Err(Error::Domain(format!(
                "invalid slow phase process {other:?}"
            ))),
        }
    }

    /// Phase seen by runs `0..n`.
    pub fn trajectory(&self, seed: u64, n: usize) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(match *self {
            SlowPhaseProcess::Constant { phase } => vec![phase; n],
            SlowPhaseProcess::RandomWalk { start, step_std } => {
                let step = Normal::new(0.0, step_std)
                    .map_err(|e| Error::Domain(format!("phase step: {e}")))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ PHASE_STREAM_SALT);
                let mut phase = wrap_phase(start);
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    out.push(phase);
                    phase = wrap_phase(phase + step.sample(&mut rng));
                }
                out
            }
        })
    }
}

/// Source and detector imperfections, as probabilities per pump pulse or gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub pair_prob: f64,
    /// Herald clicks without an emitted pair.
    pub herald_dark_prob: f64,
    /// Dark click of each signal detector in one gate.
    pub signal_dark_prob: f64,
    #[serde(default)]
    pub double_pair: bool,
    #[serde(default)]
    pub slow_phase: SlowPhaseProcess,
}

impl Default for NoiseModel {
    /// Reference-setup noise: `p = 0.015`, 40 Hz of false triggers on a
    /// 51 kHz run rate, 100 Hz signal dark counts in a 500 ps gate.
    fn default() -> Self {
        Self {
            pair_prob: DEFAULT_PAIR_PROB,
            herald_dark_prob: herald_dark_prob_from_rates(
                DEFAULT_PAIR_PROB,
                REFERENCE_RUN_RATE_HZ,
                REFERENCE_FALSE_TRIGGER_HZ,
            ),
            signal_dark_prob: gate_dark_prob(SNSPD_DARK_RATE_HZ, GATE_WINDOW_S),
            double_pair: false,
            slow_phase: SlowPhaseProcess::default(),
        }
    }
}

impl NoiseModel {
    /// Pairs only: no dark counts of any kind, no double pairs, phase locked at 0.
    pub fn noiseless(pair_prob: f64) -> Self {
        Self {
            pair_prob,
            herald_dark_prob: 0.0,
            signal_dark_prob: 0.0,
            double_pair: false,
            slow_phase: SlowPhaseProcess::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("pair_prob", self.pair_prob)?;
        check_unit("herald_dark_prob", self.herald_dark_prob)?;
        check_unit("signal_dark_prob", self.signal_dark_prob)?;
        self.slow_phase.validate()
    }

    /// Probability that a heralded run carries no photon at all.
    pub fn false_herald_fraction(&self) -> f64 {
        let (p, d) = (self.pair_prob, self.herald_dark_prob);
        let herald = p + d - p * d;
        if herald > 0.0 {
            d * (1.0 - p) / herald
        } else {
            0.0
        }
    }

    /// Outcome distribution of heralded runs when a fraction of heralds
    /// carries no photon and therefore aborts. Signal dark counts and double
    /// pairs are ignored.
    pub fn with_false_heralds(&self, dist: &OutcomeDistribution) -> OutcomeDistribution {
        self.with_empty_runs(dist, Outcome::Abort)
    }

    /// Same mixture with an arbitrary outcome for photon-less runs.
    pub fn with_empty_runs(
        &self,
        dist: &OutcomeDistribution,
        empty: Outcome,
    ) -> OutcomeDistribution {
        let f = self.false_herald_fraction();
        let mut out = dist.to_array().map(|p| (1.0 - f) * p);
        out[Outcome::ALL.iter().position(|&o| o == empty).unwrap_or(4)] += f;
        OutcomeDistribution {
            p_alice_wins: out[0],
            p_bob_wins: out[1],
            p_alice_sanctioned: out[2],
            p_bob_sanctioned: out[3],
            p_abort: out[4],
        }
    }
}

/// Herald dark probability per pulse reproducing a false-trigger share of
/// `false_trigger_hz / run_rate_hz` among heralded runs.
pub fn herald_dark_prob_from_rates(pair_prob: f64, run_rate_hz: f64, false_trigger_hz: f64) -> f64 {
    let share = false_trigger_hz / run_rate_hz;
    pair_prob * share / ((1.0 - share) * (1.0 - pair_prob))
}

/// Probability of at least one Poissonian dark click in a gate.
pub fn gate_dark_prob(rate_hz: f64, window_s: f64) -> f64 {
    -(-rate_hz * window_s).exp_m1()
}

/// Detector record of one pump pulse.
///
/// `a` is present only when `b = 1`, `v1`/`v2` only when `b = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub herald: bool,
    pub b: bool,
    pub a: Option<bool>,
    pub v1: Option<bool>,
    pub v2: Option<bool>,
    pub slow_phase: f64,
    /// Signal photons actually emitted; 0 on a false herald.
    pub photons: u8,
}

impl RunRecord {
    pub fn outcome(&self) -> Result<Outcome> {
        classify_outcome(self.b, self.a, self.v1, self.v2)
    }
}

/// Where a photon not absorbed by `D_B` ends up once the switch has settled.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Landing {
    DecisionDetector,
    Elsewhere(f64),
}

/// Per-configuration sampler; cheap to share across threads.
#[derive(Debug, Clone)]
pub struct RunSampler {
    terms: InterferenceTerms,
    alice_check: f64,
    visibility: f64,
    noise: NoiseModel,
    bob_forces_win: bool,
}

impl RunSampler {
    /// `bob_forces_win` models Bob announcing `b = 1` on every run.
    pub fn new(
        refl: &Reflectivities,
        eff: &PathEfficiencies,
        visibility: f64,
        noise: &NoiseModel,
        bob_forces_win: bool,
    ) -> Result<Self> {
        refl.validate()?;
        eff.validate()?;
        check_unit("visibility", visibility)?;
        noise.validate()?;
        let terms = InterferenceTerms::new(refl, eff);
        let worst = terms.worst_case_total(visibility);
        if worst > 1.0 + CLAMP_TOLERANCE {
            return Err(Error::Domain(format!(
                "path efficiencies are not physically consistent: detection probabilities can reach {worst}"
            )));
        }
        Ok(Self {
            terms,
            alice_check: refl.x * eff.eta_a_s,
            visibility,
            noise: *noise,
            bob_forces_win,
        })
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// Samples one pump pulse, heralded or not.
    pub fn sample_pulse<R: Rng + ?Sized>(&self, rng: &mut R, slow_phase: f64) -> RunRecord {
        let pair = rng.random::<f64>() < self.noise.pair_prob;
        let dark = rng.random::<f64>() < self.noise.herald_dark_prob;
        if !(pair || dark) {
            return RunRecord {
                herald: false,
                b: false,
                a: None,
                v1: Some(false),
                v2: Some(false),
                slow_phase,
                photons: 0,
            };
        }
        let photons = if pair { self.extra_pair(rng) } else { 0 };
        self.detect(rng, slow_phase, photons)
    }

    /// Samples one run conditioned on the herald having fired.
    pub fn sample_heralded<R: Rng + ?Sized>(&self, rng: &mut R, slow_phase: f64) -> RunRecord {
        let (p, d) = (self.noise.pair_prob, self.noise.herald_dark_prob);
        let herald = p + d - p * d;
        let pair = herald > 0.0 && rng.random::<f64>() * herald < p;
        let photons = if pair { self.extra_pair(rng) } else { 0 };
        self.detect(rng, slow_phase, photons)
    }

    fn extra_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        if self.noise.double_pair && rng.random::<f64>() < self.noise.pair_prob {
            2
        } else {
            1
        }
    }

    fn detect<R: Rng + ?Sized>(&self, rng: &mut R, slow_phase: f64, photons: u8) -> RunRecord {
        let dark = self.noise.signal_dark_prob;
        let dark_b = rng.random::<f64>() < dark;
        let dark_a = rng.random::<f64>() < dark;
        let dark_v1 = rng.random::<f64>() < dark;
        let dark_v2 = rng.random::<f64>() < dark;

        // Each photon first meets D_B; what it does afterwards depends on the
        // switch, which in turn depends on every photon's D_B outcome.
        let p_db = self.terms.p_db;
        let mut landings = [Landing::Elsewhere(0.0); 2];
        let mut b_click = dark_b;
        for slot in landings.iter_mut().take(photons as usize) {
            let u: f64 = rng.random();
            *slot = if u < p_db {
                b_click = true;
                Landing::DecisionDetector
            } else {
                Landing::Elsewhere(u - p_db)
            };
        }
        let landings = &landings[..photons as usize];
        let b = b_click || self.bob_forces_win;

        if b {
            let hit_a = landings
                .iter()
                .any(|l| matches!(l, Landing::Elsewhere(r) if *r < self.alice_check));
            RunRecord {
                herald: true,
                b,
                a: Some(hit_a || dark_a),
                v1: None,
                v2: None,
                slow_phase,
                photons,
            }
        } else {
            let coherence = self.visibility * slow_phase.cos();
            let (p_v1, p_v2) = self.terms.verification(coherence);
            let (p_v1, p_v2) = (p_v1.max(0.0), p_v2.max(0.0));
            let (mut v1, mut v2) = (dark_v1, dark_v2);
            for l in landings {
                if let Landing::Elsewhere(r) = *l {
                    if r < p_v1 {
                        v1 = true;
                    } else if r < p_v1 + p_v2 {
                        v2 = true;
                    }
                }
            }
            RunRecord {
                herald: true,
                b,
                a: None,
                v1: Some(v1),
                v2: Some(v2),
                slow_phase,
                photons,
            }
        }
    }
}

/// Independent random stream of run `index` under `seed`.
pub fn run_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Samples one pump pulse with the slow phase taken from `interf`.
pub fn sample_run<R: Rng + ?Sized>(
    rng: &mut R,
    refl: &Reflectivities,
    eff: &PathEfficiencies,
    interf: &crate::optics::InterferenceModel,
    noise: &NoiseModel,
) -> Result<RunRecord> {
    interf.validate()?;
    let sampler = RunSampler::new(refl, eff, interf.visibility, noise, false)?;
    Ok(sampler.sample_pulse(rng, interf.slow_phase))
}

/// Heralded coincidence tallies. `r_hbv1` counts runs where the herald, `D_B`
/// and `D_V1` all clicked, and so on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceCounts {
    pub r_h: u64,
    pub r_hb: u64,
    pub r_ha: u64,
    pub r_hab: u64,
    pub r_hv1: u64,
    pub r_hv2: u64,
    pub r_hbv1: u64,
    pub r_hbv2: u64,
    pub r_hv1v2: u64,
    pub r_hbv1v2: u64,
}

impl CoincidenceCounts {
    /// Adds one record; unheralded pulses are ignored.
    pub fn record(&mut self, run: &RunRecord) {
        if !run.herald {
            return;
        }
        let b = run.b;
        let a = run.a == Some(true);
        let v1 = run.v1 == Some(true);
        let v2 = run.v2 == Some(true);
        self.r_h += 1;
        self.r_hb += b as u64;
        self.r_ha += a as u64;
        self.r_hab += (a && b) as u64;
        self.r_hv1 += v1 as u64;
        self.r_hv2 += v2 as u64;
        self.r_hbv1 += (b && v1) as u64;
        self.r_hbv2 += (b && v2) as u64;
        self.r_hv1v2 += (v1 && v2) as u64;
        self.r_hbv1v2 += (b && v1 && v2) as u64;
    }

    /// Checks that no coincidence exceeds any of the tallies it refines.
    pub fn validate(&self) -> Result<()> {
        let pairs = [
            ("r_hb", self.r_hb, "r_h", self.r_h),
            ("r_ha", self.r_ha, "r_h", self.r_h),
            ("r_hv1", self.r_hv1, "r_h", self.r_h),
            ("r_hv2", self.r_hv2, "r_h", self.r_h),
            ("r_hab", self.r_hab, "r_ha", self.r_ha),
            ("r_hab", self.r_hab, "r_hb", self.r_hb),
            ("r_hbv1", self.r_hbv1, "r_hb", self.r_hb),
            ("r_hbv1", self.r_hbv1, "r_hv1", self.r_hv1),
            ("r_hbv2", self.r_hbv2, "r_hb", self.r_hb),
            ("r_hbv2", self.r_hbv2, "r_hv2", self.r_hv2),
            ("r_hv1v2", self.r_hv1v2, "r_hv1", self.r_hv1),
            ("r_hv1v2", self.r_hv1v2, "r_hv2", self.r_hv2),
            ("r_hbv1v2", self.r_hbv1v2, "r_hbv1", self.r_hbv1),
            ("r_hbv1v2", self.r_hbv1v2, "r_hbv2", self.r_hbv2),
            ("r_hbv1v2", self.r_hbv1v2, "r_hv1v2", self.r_hv1v2),
        ];
        for (fine, f, coarse, c) in pairs {
            if f > c {
                return Err(Error::OutOfRange(format!(
                    "tally {fine} = {f} exceeds {coarse} = {c}"
                )));
            }
        }
        Ok(())
    }
}

impl AddAssign for CoincidenceCounts {
    fn add_assign(&mut self, o: Self) {
        self.r_h += o.r_h;
        self.r_hb += o.r_hb;
        self.r_ha += o.r_ha;
        self.r_hab += o.r_hab;
        self.r_hv1 += o.r_hv1;
        self.r_hv2 += o.r_hv2;
        self.r_hbv1 += o.r_hbv1;
        self.r_hbv2 += o.r_hbv2;
        self.r_hv1v2 += o.r_hv1v2;
        self.r_hbv1v2 += o.r_hbv1v2;
    }
}

impl Add for CoincidenceCounts {
    type Output = Self;

    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

fn in_window(phase: f64, window: Option<f64>) -> bool {
    window.is_none_or(|w| wrap_phase(phase).abs() <= w)
}

/// Tallies heralded runs, optionally keeping only those whose slow phase is
/// within `phase_window` radians of zero.
pub fn accumulate<'a, I>(records: I, phase_window: Option<f64>) -> CoincidenceCounts
where
    I: IntoIterator<Item = &'a RunRecord>,
{
    let mut counts = CoincidenceCounts::default();
    for run in records {
        if in_window(run.slow_phase, phase_window) {
            counts.record(run);
        }
    }
    counts
}

/// Integer numerators of the five outcome rates, in [`Outcome::ALL`] order.
///
/// A numerator of -1 is read as 0; anything more negative means corrupted
/// tallies.
pub fn outcome_counts(counts: &CoincidenceCounts) -> Result<[u64; 5]> {
    counts.validate()?;
    let c = |v: u64| v as i128;
    let decisive = [
        c(counts.r_hv1) - c(counts.r_hv1v2) - c(counts.r_hbv1) + c(counts.r_hbv1v2),
        c(counts.r_hb) - c(counts.r_hab),
        c(counts.r_hv2) - c(counts.r_hbv2),
        c(counts.r_hab),
    ];
    let mut out = [0u64; 5];
    for (k, &n) in decisive.iter().enumerate() {
        out[k] = nonnegative(Outcome::ALL[k], n)?;
    }
    let abort = c(counts.r_h) - out[..4].iter().map(|&n| n as i128).sum::<i128>();
    out[4] = nonnegative(Outcome::Abort, abort)?;
    Ok(out)
}

fn nonnegative(outcome: Outcome, n: i128) -> Result<u64> {
    match n {
        n if n >= 0 => Ok(n as u64),
        -1 => Ok(0),
        n => Err(Error::OutOfRange(format!(
            "negative {} count {n} from coincidence algebra",
            outcome.name()
        ))),
    }
}

/// Outcome frequencies from coincidence tallies, normalised by `R_h`.
pub fn outcome_rates(counts: &CoincidenceCounts) -> Result<OutcomeDistribution> {
    if counts.r_h == 0 {
        return Err(Error::NoRuns("no heralded runs were counted".into()));
    }
    let n = outcome_counts(counts)?;
    let total = counts.r_h as f64;
    Ok(OutcomeDistribution {
        p_alice_wins: n[0] as f64 / total,
        p_bob_wins: n[1] as f64 / total,
        p_alice_sanctioned: n[2] as f64 / total,
        p_bob_sanctioned: n[3] as f64 / total,
        p_abort: n[4] as f64 / total,
    })
}

/// Which party, if any, deviates from the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Honest,
    /// Bob announces `b = 1` on every run.
    BobAttack,
    /// Alice uses reflectivity `x` instead of the honest one.
    AliceAttack {
        x: f64,
    },
}

impl Scenario {
    pub fn label(&self) -> String {
        match self {
            Scenario::Honest => "honest".into(),
            Scenario::BobAttack => "bob_attack".into(),
            Scenario::AliceAttack { x } => format!("alice_attack_x{x}"),
        }
    }

    /// Analytic outcome distribution without any noise.
    pub fn analytic(&self, eff: &PathEfficiencies, visibility: f64) -> Result<OutcomeDistribution> {
        match *self {
            Scenario::Honest => honest_outcomes(eff, visibility),
            Scenario::BobAttack => bob_optimal_attack(eff, visibility),
            Scenario::AliceAttack { x } => alice_x_attack(x, eff, visibility),
        }
    }
}

/// Everything a campaign needs besides the seed and run count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSetup {
    pub refl: Reflectivities,
    pub eff: PathEfficiencies,
    pub visibility: f64,
    pub noise: NoiseModel,
    pub bob_forces_win: bool,
}

impl McSetup {
    pub fn for_scenario(
        scenario: &Scenario,
        eff: &PathEfficiencies,
        visibility: f64,
        noise: &NoiseModel,
    ) -> Result<Self> {
        let honest = honest_reflectivities(eff, visibility)?;
        let (refl, bob_forces_win) = match *scenario {
            Scenario::Honest => (honest, false),
            Scenario::BobAttack => (honest, true),
            Scenario::AliceAttack { x } => (Reflectivities::new(x, honest.y, honest.z)?, false),
        };
        Ok(Self {
            refl,
            eff: *eff,
            visibility,
            noise: *noise,
            bob_forces_win,
        })
    }

    /// Analytic distribution of the heralded runs this setup samples: the
    /// single-photon model at the constant slow phase (0 for a random walk),
    /// mixed with photon-less false heralds. Signal dark counts and double
    /// pairs are ignored.
    pub fn analytic_reference(&self) -> Result<OutcomeDistribution> {
        let phase = match self.noise.slow_phase {
            SlowPhaseProcess::Constant { phase } => phase,
            SlowPhaseProcess::RandomWalk { .. } => 0.0,
        };
        let (photon, empty) = if self.bob_forces_win {
            let caught = self.refl.x * self.eff.eta_a_s;
            (
                OutcomeDistribution::from_decisive(0.0, 1.0 - caught, 0.0, caught)?,
                Outcome::BobWins,
            )
        } else {
            let interf = InterferenceModel::new(self.visibility, phase)?;
            (
                outcomes_from_optics(&self.refl, &self.eff, &interf)?,
                Outcome::Abort,
            )
        };
        Ok(self.noise.with_empty_runs(&photon, empty))
    }

    pub fn sampler(&self) -> Result<RunSampler> {
        RunSampler::new(
            &self.refl,
            &self.eff,
            self.visibility,
            &self.noise,
            self.bob_forces_win,
        )
    }
}

/// Tallies of a heralded campaign.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignTally {
    pub counts: CoincidenceCounts,
    /// Counted runs whose herald carried no photon.
    pub false_heralds: u64,
    /// Counted false-herald runs that aborted.
    pub false_herald_aborts: u64,
}

impl CampaignTally {
    fn record(&mut self, run: &RunRecord) {
        self.counts.record(run);
        if run.herald && run.photons == 0 {
            self.false_heralds += 1;
            if run.outcome().ok() == Some(Outcome::Abort) {
                self.false_herald_aborts += 1;
            }
        }
    }

    /// Share of counted runs that aborted because a dark count fired the herald.
    pub fn false_herald_abort_rate(&self) -> f64 {
        if self.counts.r_h == 0 {
            0.0
        } else {
            self.false_herald_aborts as f64 / self.counts.r_h as f64
        }
    }
}

impl Add for CampaignTally {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            counts: self.counts + o.counts,
            false_heralds: self.false_heralds + o.false_heralds,
            false_herald_aborts: self.false_herald_aborts + o.false_herald_aborts,
        }
    }
}

fn heralded_setup(setup: &McSetup, n_runs: u64) -> Result<RunSampler> {
    if n_runs == 0 {
        return Err(Error::NoRuns("requested 0 runs".into()));
    }
    let sampler = setup.sampler()?;
    let noise = sampler.noise();
    if noise.pair_prob == 0.0 && noise.herald_dark_prob == 0.0 {
        return Err(Error::NoRuns("the herald can never fire".into()));
    }
    Ok(sampler)
}

/// Samples heralded runs `range` one by one.
pub fn simulate_records(
    setup: &McSetup,
    range: std::ops::Range<u64>,
    seed: u64,
) -> Result<Vec<RunRecord>> {
    let sampler = heralded_setup(setup, range.end.saturating_sub(range.start).max(1))?;
    let phases = setup
        .noise
        .slow_phase
        .trajectory(seed, range.end as usize)?;
    Ok(range
        .map(|i| sampler.sample_heralded(&mut run_stream(seed, i), phases[i as usize]))
        .collect())
}

/// Samples `n_runs` heralded runs in parallel and tallies those inside the
/// optional phase window. The result does not depend on the thread count.
pub fn simulate(
    setup: &McSetup,
    n_runs: u64,
    seed: u64,
    phase_window: Option<f64>,
) -> Result<CampaignTally> {
    let sampler = heralded_setup(setup, n_runs)?;
    let phases = match setup.noise.slow_phase {
        SlowPhaseProcess::Constant { .. } => None,
        process => Some(process.trajectory(seed, n_runs as usize)?),
    };
    let constant_phase = match setup.noise.slow_phase {
        SlowPhaseProcess::Constant { phase } => phase,
        _ => 0.0,
    };
    Ok((0..n_runs)
        .into_par_iter()
        .fold(CampaignTally::default, |mut tally, i| {
            let phase = phases.as_ref().map_or(constant_phase, |p| p[i as usize]);
            if in_window(phase, phase_window) {
                let run = sampler.sample_heralded(&mut run_stream(seed, i), phase);
                tally.record(&run);
            }
            tally
        })
        .reduce(CampaignTally::default, |a, b| a + b))
}

/// Visibility inferred from `D_V1` click rates with the slow phase held at 0
/// and at pi.
pub fn estimate_visibility_mc(setup: &McSetup, n_runs: u64, seed: u64) -> Result<f64> {
    let p_v1_at = |phase: f64, stream_seed: u64| -> Result<f64> {
        let mut fixed = *setup;
        fixed.noise.slow_phase = SlowPhaseProcess::Constant { phase };
        let tally = simulate(&fixed, n_runs, stream_seed, None)?;
        Ok(tally.counts.r_hv1 as f64 / tally.counts.r_h as f64)
    };
    let at_zero = p_v1_at(0.0, seed)?;
    let at_pi = p_v1_at(PI, seed.wrapping_add(1))?;
    crate::optics::visibility_from_probabilities(at_zero, at_pi)
}

/// Binomial standard errors of empirical frequencies around `reference`.
pub fn standard_errors(reference: &OutcomeDistribution, n: u64) -> [f64; 5] {
    reference
        .to_array()
        .map(|p| (p * (1.0 - p) / n as f64).max(0.0).sqrt())
}

/// Per-outcome z-scores. A zero standard error gives 0 on an exact match and
/// an infinite score otherwise.
pub fn z_scores(
    empirical: &OutcomeDistribution,
    reference: &OutcomeDistribution,
    n: u64,
) -> [f64; 5] {
    let se = standard_errors(reference, n);
    let emp = empirical.to_array();
    let refv = reference.to_array();
    std::array::from_fn(|k| {
        let diff = emp[k] - refv[k];
        if se[k] > 0.0 {
            diff / se[k]
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    })
}
