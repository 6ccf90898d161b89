//! Honest-party protocol logic.
//!
//! A run ends in one of five mutually exclusive outcomes. Bob's decision bit
//! `b` selects who verifies: on `b = 0` Bob checks Alice's photon with the
//! verification detectors, on `b = 1` Alice checks her own mode with `D_A`.
//!
//! The honest reflectivities make Alice's and Bob's winning probabilities
//! equal (fairness) and send equal power into both interferometer arms so the
//! sanction detector `D_V2` stays dark for perfect visibility (correctness).

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, clamp_probability, Error, Result};
use crate::optics::{detection_probabilities, InterferenceModel, PathEfficiencies, Reflectivities};

/// Attenuation of one VOA per kilometre of simulated fibre, natural-log units.
pub const DEFAULT_ATTENUATION_PER_KM: f64 = 0.02;

/// Tolerance on the sum of an [`OutcomeDistribution`].
pub const DISTRIBUTION_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    AliceWins,
    BobWins,
    AliceSanctioned,
    BobSanctioned,
    Abort,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::AliceWins,
        Outcome::BobWins,
        Outcome::AliceSanctioned,
        Outcome::BobSanctioned,
        Outcome::Abort,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::AliceWins => "alice_wins",
            Outcome::BobWins => "bob_wins",
            Outcome::AliceSanctioned => "alice_sanctioned",
            Outcome::BobSanctioned => "bob_sanctioned",
            Outcome::Abort => "abort",
        }
    }
}

/// Maps the broadcast bit and the detector clicks of one run to its outcome.
///
/// On `b = 0` only the verification flags `v1`, `v2` may be present, on
/// `b = 1` only Alice's flag `a`.
pub fn classify_outcome(
    b: bool,
    a: Option<bool>,
    v1: Option<bool>,
    v2: Option<bool>,
) -> Result<Outcome> {
    match (b, a, v1, v2) {
        (false, None, Some(v1), Some(v2)) => Ok(match (v1, v2) {
            (_, true) => Outcome::AliceSanctioned,
            (true, false) => Outcome::AliceWins,
            (false, false) => Outcome::Abort,
        }),
        (true, Some(a), None, None) => Ok(if a {
            Outcome::BobSanctioned
        } else {
            Outcome::BobWins
        }),
        _ => Err(Error::MalformedFlags(format!(
            "b={}, a={a:?}, v1={v1:?}, v2={v2:?}",
            b as u8
        ))),
    }
}

/// Probabilities of the five outcomes of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub p_alice_wins: f64,
    pub p_bob_wins: f64,
    pub p_alice_sanctioned: f64,
    pub p_bob_sanctioned: f64,
    pub p_abort: f64,
}

impl OutcomeDistribution {
    /// Builds a distribution from the four decisive outcomes; the abort
    /// probability is whatever remains.
    pub fn from_decisive(
        p_alice_wins: f64,
        p_bob_wins: f64,
        p_alice_sanctioned: f64,
        p_bob_sanctioned: f64,
    ) -> Result<Self> {
        let decisive = p_alice_wins + p_bob_wins + p_alice_sanctioned + p_bob_sanctioned;
        let dist = Self {
            p_alice_wins: clamp_probability("p_alice_wins", p_alice_wins)?,
            p_bob_wins: clamp_probability("p_bob_wins", p_bob_wins)?,
            p_alice_sanctioned: clamp_probability("p_alice_sanctioned", p_alice_sanctioned)?,
            p_bob_sanctioned: clamp_probability("p_bob_sanctioned", p_bob_sanctioned)?,
            p_abort: clamp_probability("p_abort", 1.0 - decisive)?,
        };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<()> {
        for outcome in Outcome::ALL {
            check_unit(outcome.name(), self.get(outcome))?;
        }
        let sum = self.sum();
        if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOLERANCE {
            return Err(Error::OutOfRange(format!(
                "outcome probabilities sum to {sum}"
            )));
        }
        Ok(())
    }

    pub fn get(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::AliceWins => self.p_alice_wins,
            Outcome::BobWins => self.p_bob_wins,
            Outcome::AliceSanctioned => self.p_alice_sanctioned,
            Outcome::BobSanctioned => self.p_bob_sanctioned,
            Outcome::Abort => self.p_abort,
        }
    }

    pub fn sum(&self) -> f64 {
        Outcome::ALL.iter().map(|&o| self.get(o)).sum()
    }

    pub fn to_array(&self) -> [f64; 5] {
        Outcome::ALL.map(|o| self.get(o))
    }
}

/// Number of VOAs crossed on each path; field names mirror [`PathEfficiencies`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoaCounts {
    pub eta_a_s: u32,
    pub eta_b_y: u32,
    pub eta_a_v1: u32,
    pub eta_a_v2: u32,
    pub eta_b_v1: u32,
    pub eta_b_v2: u32,
}

impl VoaCounts {
    pub const fn uniform(count: u32) -> Self {
        Self {
            eta_a_s: count,
            eta_b_y: count,
            eta_a_v1: count,
            eta_a_v2: count,
            eta_b_v1: count,
            eta_b_v2: count,
        }
    }
}

impl Default for VoaCounts {
    fn default() -> Self {
        Self::uniform(1)
    }
}

/// Simulated fibre distance between the parties, realised with VOAs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub distance_km: f64,
    #[serde(default = "default_attenuation")]
    pub attenuation_per_km: f64,
    #[serde(default)]
    pub voa_counts: VoaCounts,
}

fn default_attenuation() -> f64 {
    DEFAULT_ATTENUATION_PER_KM
}

impl ChannelModel {
    pub fn new(distance_km: f64) -> Self {
        Self {
            distance_km,
            attenuation_per_km: DEFAULT_ATTENUATION_PER_KM,
            voa_counts: VoaCounts::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance_km.is_finite() && self.distance_km >= 0.0) {
            return Err(Error::Domain(format!(
                "distance {} km must be finite and non-negative",
                self.distance_km
            )));
        }
        if !(self.attenuation_per_km.is_finite() && self.attenuation_per_km >= 0.0) {
            return Err(Error::Domain(format!(
                "attenuation {} per km must be finite and non-negative",
                self.attenuation_per_km
            )));
        }
        Ok(())
    }

    /// Transmission of a single VOA, `exp(-attenuation * L)`.
    pub fn voa_transmission(&self) -> f64 {
        (-self.attenuation_per_km * self.distance_km).exp()
    }
}

/// Multiplies every path by one VOA transmission per VOA it crosses.
pub fn apply_channel(eff: &PathEfficiencies, channel: &ChannelModel) -> Result<PathEfficiencies> {
    eff.validate()?;
    channel.validate()?;
    let t = channel.voa_transmission();
    let n = &channel.voa_counts;
    let scale = |eta: f64, count: u32| eta * t.powi(count as i32);
    Ok(PathEfficiencies {
        eta_a_s: scale(eff.eta_a_s, n.eta_a_s),
        eta_b_y: scale(eff.eta_b_y, n.eta_b_y),
        eta_a_v1: scale(eff.eta_a_v1, n.eta_a_v1),
        eta_a_v2: scale(eff.eta_a_v2, n.eta_a_v2),
        eta_b_v1: scale(eff.eta_b_v1, n.eta_b_v1),
        eta_b_v2: scale(eff.eta_b_v2, n.eta_b_v2),
    })
}

/// Reflectivities maximising fairness and correctness for honest parties.
///
/// Solves `x eta_A^V1 = (1-x) y eta_B^V1` (balanced arms, with `z = 1/2`)
/// together with `x eta_A^V1 (1+v) = (1-x)(1-y) eta_B^y` (equal wins).
pub fn honest_reflectivities(eff: &PathEfficiencies, visibility: f64) -> Result<Reflectivities> {
    eff.validate()?;
    check_unit("visibility", visibility)?;
    if eff.eta_b_v1 <= 0.0 || eff.eta_b_y <= 0.0 {
        return Err(Error::Degenerate(
            "honest reflectivities need eta_b_v1 > 0 and eta_b_y > 0".into(),
        ));
    }
    let x =
        1.0 / (1.0 + eff.eta_a_v1 / eff.eta_b_v1 + eff.eta_a_v1 / eff.eta_b_y * (1.0 + visibility));
    let y = 1.0 / (1.0 + eff.eta_b_v1 / eff.eta_b_y * (1.0 + visibility));
    Reflectivities::new(x, y, 0.5)
}

/// Outcome probabilities for honest parties at the honest reflectivities with
/// the slow phase locked to zero. Dark counts and double pairs are neglected.
pub fn honest_outcomes(eff: &PathEfficiencies, visibility: f64) -> Result<OutcomeDistribution> {
    let refl = honest_reflectivities(eff, visibility)?;
    let win = refl.x * eff.eta_a_v1 * (1.0 + visibility);
    let alice_sanctioned = refl.x * eff.eta_a_v2 * (1.0 - visibility);
    OutcomeDistribution::from_decisive(win, win, alice_sanctioned, 0.0)
}

/// Outcome distribution of an honest-protocol run for arbitrary reflectivities,
/// built from the generic detection model.
///
/// With no dark counts `D_B` and `D_A` never both fire, so Bob is never
/// sanctioned; every verification click on `D_V2` sanctions Alice.
pub fn outcomes_from_optics(
    refl: &Reflectivities,
    eff: &PathEfficiencies,
    interf: &InterferenceModel,
) -> Result<OutcomeDistribution> {
    let p = detection_probabilities(refl, eff, interf)?;
    OutcomeDistribution::from_decisive(p.p_v1, p.p_db, p.p_v2, 0.0)
}

fn win_sum(dist: &OutcomeDistribution) -> Result<f64> {
    let wins = dist.p_alice_wins + dist.p_bob_wins;
    if wins <= 0.0 {
        return Err(Error::Degenerate(
            "both winning probabilities are zero".into(),
        ));
    }
    Ok(wins)
}

/// `1 - |P(A wins) - P(B wins)| / (P(A wins) + P(B wins))`.
pub fn fairness(dist: &OutcomeDistribution) -> Result<f64> {
    let wins = win_sum(dist)?;
    Ok(1.0 - ((dist.p_alice_wins - dist.p_bob_wins) / wins).abs())
}

/// `1 - (P(A sanctioned) + P(B sanctioned)) / (P(A wins) + P(B wins))`.
///
/// Not clamped: negative values mean sanctions outnumber wins.
pub fn correctness(dist: &OutcomeDistribution) -> Result<f64> {
    let wins = win_sum(dist)?;
    Ok(1.0 - (dist.p_alice_sanctioned + dist.p_bob_sanctioned) / wins)
}

/// Lossless reflectivities that equalise both parties' optimal cheating gains
/// as well as their honest wins. They sanction honest Alice with probability
/// about 0.037 even for perfect visibility.
pub fn balanced_reflectivities() -> Reflectivities {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    Reflectivities {
        x: 1.0 - r,
        y: r,
        z: 2.0 - std::f64::consts::SQRT_2,
    }
}

/// Calibration measurements from which the reflectivities are recovered.
///
/// - `p_da`: click probability of `D_A` with the switch forced to state 1.
/// - `p_db`: click probability of `D_B`.
/// - `p_v1_blocked`, `p_v2_blocked`: verification clicks with the switch in
///   state 0 and Bob's arm blocked, so nothing interferes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProbabilities {
    pub p_da: f64,
    pub p_db: f64,
    pub p_v1_blocked: f64,
    pub p_v2_blocked: f64,
}

/// Predicts the calibration measurements for known reflectivities.
pub fn calibration_probabilities(
    refl: &Reflectivities,
    eff: &PathEfficiencies,
) -> Result<CalibrationProbabilities> {
    let blocked = PathEfficiencies {
        eta_b_v1: 0.0,
        eta_b_v2: 0.0,
        ..*eff
    };
    let p = detection_probabilities(refl, &blocked, &InterferenceModel::locked(1.0)?)?;
    Ok(CalibrationProbabilities {
        p_da: refl.x * eff.eta_a_s,
        p_db: p.p_db,
        p_v1_blocked: p.p_v1,
        p_v2_blocked: p.p_v2,
    })
}

fn checked_estimate(name: &str, value: f64) -> Result<f64> {
    clamp_probability(name, value)
        .map_err(|_| Error::OutOfRange(format!("estimated {name} = {value} is outside [0, 1]")))
}

/// Recovers `(x, y, z)` from calibration click probabilities, using the
/// `D_V1` measurement for `z`.
///
/// `D_B` sits on the transmitted port of `y`, so `p_db = (1-x)(1-y) eta_B^y`.
pub fn estimate_reflectivities(
    p_da: f64,
    p_db: f64,
    p_v1_blocked: f64,
    eff: &PathEfficiencies,
) -> Result<Reflectivities> {
    eff.validate()?;
    for (name, p) in [
        ("p_da", p_da),
        ("p_db", p_db),
        ("p_v1_blocked", p_v1_blocked),
    ] {
        check_unit(name, p)?;
    }
    if eff.eta_a_s <= 0.0 || eff.eta_b_y <= 0.0 || eff.eta_a_v1 <= 0.0 {
        return Err(Error::Degenerate(
            "estimation needs eta_a_s, eta_b_y and eta_a_v1 > 0".into(),
        ));
    }
    let x = checked_estimate("x", p_da / eff.eta_a_s)?;
    if x >= 1.0 {
        return Err(Error::Degenerate(
            "x = 1 leaves Bob's arm dark; y cannot be estimated".into(),
        ));
    }
    let y = checked_estimate("y", 1.0 - p_db / ((1.0 - x) * eff.eta_b_y))?;
    let z = if x > 0.0 {
        checked_estimate("z", p_v1_blocked / (x * eff.eta_a_v1))?
    } else {
        return Err(Error::Degenerate(
            "x = 0 leaves Alice's arm dark; z cannot be estimated".into(),
        ));
    };
    Ok(Reflectivities { x, y, z })
}

/// Estimates `z` from the blocked `D_V2` measurement instead of `D_V1`.
pub fn estimate_z_from_v2(x: f64, p_v2_blocked: f64, eff: &PathEfficiencies) -> Result<f64> {
    check_unit("x", x)?;
    check_unit("p_v2_blocked", p_v2_blocked)?;
    if x <= 0.0 || eff.eta_a_v2 <= 0.0 {
        return Err(Error::Degenerate(
            "z from D_V2 needs x > 0 and eta_a_v2 > 0".into(),
        ));
    }
    checked_estimate("z", 1.0 - p_v2_blocked / (x * eff.eta_a_v2))
}

/// Full estimate from all four calibration measurements. Fails when the two
/// `z` estimates disagree by more than `tolerance`.
pub fn estimate_from_calibration(
    cal: &CalibrationProbabilities,
    eff: &PathEfficiencies,
    tolerance: f64,
) -> Result<Reflectivities> {
    let refl = estimate_reflectivities(cal.p_da, cal.p_db, cal.p_v1_blocked, eff)?;
    let z_v2 = estimate_z_from_v2(refl.x, cal.p_v2_blocked, eff)?;
    if (z_v2 - refl.z).abs() > tolerance {
        return Err(Error::OutOfRange(format!(
            "inconsistent calibration: z from D_V1 = {}, from D_V2 = {z_v2}",
            refl.z
        )));
    }
    Ok(refl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    const TOL: f64 = 1e-12;
    const REF: PathEfficiencies = PathEfficiencies::REFERENCE;

    #[test]
    fn classification_table() {
        use Outcome::*;
        let t = Some(true);
        let f = Some(false);
        assert_eq!(classify_outcome(false, None, t, f).unwrap(), AliceWins);
        assert_eq!(
            classify_outcome(false, None, t, t).unwrap(),
            AliceSanctioned
        );
        assert_eq!(
            classify_outcome(false, None, f, t).unwrap(),
            AliceSanctioned
        );
        assert_eq!(classify_outcome(false, None, f, f).unwrap(), Abort);
        assert_eq!(classify_outcome(true, f, None, None).unwrap(), BobWins);
        assert_eq!(
            classify_outcome(true, t, None, None).unwrap(),
            BobSanctioned
        );
    }

    #[test]
    fn classification_rejects_malformed_flags() {
        let t = Some(true);
        for (b, a, v1, v2) in [
            (false, t, t, t),
            (false, None, None, t),
            (true, None, None, None),
            (true, t, t, None),
        ] {
            assert!(matches!(
                classify_outcome(b, a, v1, v2),
                Err(Error::MalformedFlags(_))
            ));
        }
    }

    #[test]
    fn ideal_honest_parameters() {
        let refl = honest_reflectivities(&PathEfficiencies::IDEAL, 1.0).unwrap();
        assert_abs_diff_eq!(refl.x, 0.25, epsilon = TOL);
        assert_abs_diff_eq!(refl.y, 1.0 / 3.0, epsilon = TOL);
        assert_eq!(refl.z, 0.5);

        let refl = honest_reflectivities(&PathEfficiencies::IDEAL, 0.0).unwrap();
        assert_abs_diff_eq!(refl.x, 1.0 / 3.0, epsilon = TOL);
        assert_abs_diff_eq!(refl.y, 0.5, epsilon = TOL);
    }

    #[test]
    fn reference_honest_parameters() {
        // 1/(1 + .231/.184 + .231/.303 * 1.96), 1/(1 + .184/.303 * 1.96)
        let refl = honest_reflectivities(&REF, 0.96).unwrap();
        assert_abs_diff_eq!(refl.x, 0.266_688_555_869_415_6, epsilon = TOL);
        assert_abs_diff_eq!(refl.y, 0.456_572_840_696_763_35, epsilon = TOL);
    }

    #[test]
    fn honest_singular_efficiencies() {
        let mut eff = REF;
        eff.eta_b_y = 0.0;
        assert!(matches!(
            honest_reflectivities(&eff, 0.9),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn ideal_honest_outcomes() {
        let d = honest_outcomes(&PathEfficiencies::IDEAL, 1.0).unwrap();
        assert_abs_diff_eq!(d.p_alice_wins, 0.5, epsilon = TOL);
        assert_abs_diff_eq!(d.p_bob_wins, 0.5, epsilon = TOL);
        assert_eq!(d.p_alice_sanctioned, 0.0);
        assert_eq!(d.p_bob_sanctioned, 0.0);
        assert_abs_diff_eq!(d.p_abort, 0.0, epsilon = TOL);
    }

    #[test]
    fn reference_honest_outcomes() {
        let x = honest_reflectivities(&REF, 0.96).unwrap().x;
        let d = honest_outcomes(&REF, 0.96).unwrap();
        assert_abs_diff_eq!(d.p_alice_wins, x * 0.231 * 1.96, epsilon = TOL);
        assert_abs_diff_eq!(d.p_alice_sanctioned, x * 0.219 * 0.04, epsilon = TOL);
        assert_eq!(fairness(&d).unwrap(), 1.0);
        let expected_c = 1.0 - 0.219 * 0.04 / (2.0 * 0.231 * 1.96);
        assert_abs_diff_eq!(correctness(&d).unwrap(), expected_c, epsilon = TOL);
        assert_abs_diff_eq!(expected_c, 0.990, epsilon = 0.002);
    }

    #[test]
    fn zero_visibility_sanction_ratio() {
        let d = honest_outcomes(&PathEfficiencies::IDEAL, 0.0).unwrap();
        assert_abs_diff_eq!(d.p_alice_sanctioned, d.p_alice_wins, epsilon = TOL);
        assert_abs_diff_eq!(d.p_alice_sanctioned, 1.0 / 3.0, epsilon = TOL);
    }

    #[test]
    fn channel_cases() {
        let same = apply_channel(&REF, &ChannelModel::new(0.0)).unwrap();
        assert_eq!(same, REF);

        let far = apply_channel(&REF, &ChannelModel::new(50.0)).unwrap();
        assert_abs_diff_eq!(far.eta_b_y, 0.303 * (-1.0f64).exp(), epsilon = TOL);
        assert_abs_diff_eq!(far.eta_b_y, 0.1115, epsilon = 1e-4);

        let mut channel = ChannelModel::new(50.0);
        channel.voa_counts.eta_a_s = 0;
        channel.voa_counts.eta_b_v2 = 2;
        let out = apply_channel(&REF, &channel).unwrap();
        assert_eq!(out.eta_a_s, REF.eta_a_s);
        assert_abs_diff_eq!(out.eta_b_v2, 0.175 * (-2.0f64).exp(), epsilon = TOL);

        assert!(apply_channel(&REF, &ChannelModel::new(-1.0)).is_err());
    }

    #[test]
    fn metric_cases() {
        let d = |aw, bw, as_, bs| OutcomeDistribution::from_decisive(aw, bw, as_, bs).unwrap();
        assert_eq!(fairness(&d(0.12, 0.12, 0.0, 0.0)).unwrap(), 1.0);
        assert_eq!(fairness(&d(0.2, 0.0, 0.0, 0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(
            fairness(&d(0.3, 0.1, 0.0, 0.0)).unwrap(),
            0.5,
            epsilon = TOL
        );
        assert_eq!(correctness(&d(0.3, 0.1, 0.0, 0.0)).unwrap(), 1.0);
        assert_abs_diff_eq!(
            correctness(&d(0.2, 0.2, 0.3, 0.1)).unwrap(),
            0.0,
            epsilon = TOL
        );
        assert!(correctness(&d(0.1, 0.1, 0.3, 0.2)).unwrap() < 0.0);
        assert!(matches!(
            fairness(&d(0.0, 0.0, 0.1, 0.0)),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            correctness(&d(0.0, 0.0, 0.1, 0.0)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn balanced_values() {
        let b = balanced_reflectivities();
        assert_abs_diff_eq!(b.x, 1.0 - FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(b.y, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(b.z, 2.0 - SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(b.x, 0.2929, epsilon = 1e-4);
    }

    #[test]
    fn estimation_cases() {
        let truth = Reflectivities::new(0.3, 0.4, 0.5).unwrap();
        let cal = calibration_probabilities(&truth, &REF).unwrap();
        let est = estimate_from_calibration(&cal, &REF, 1e-12).unwrap();
        assert_abs_diff_eq!(est.x, 0.3, epsilon = TOL);
        assert_abs_diff_eq!(est.y, 0.4, epsilon = TOL);
        assert_abs_diff_eq!(est.z, 0.5, epsilon = TOL);

        let x_h = honest_reflectivities(&REF, 0.96).unwrap().x;
        let est = estimate_reflectivities(REF.eta_a_s * x_h, 0.05, 0.02, &REF).unwrap();
        assert_abs_diff_eq!(est.x, x_h, epsilon = TOL);
        assert_abs_diff_eq!(est.x, 0.267, epsilon = 1e-3);

        // x = 0 is a valid estimate but leaves z unobservable.
        assert!(matches!(
            estimate_reflectivities(0.0, 0.1, 0.0, &REF),
            Err(Error::Degenerate(_))
        ));
        assert_eq!(checked_estimate("x", 0.0 / REF.eta_a_s).unwrap(), 0.0);

        assert!(matches!(
            estimate_reflectivities(0.31, 0.5, 0.01, &REF),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn inconsistent_calibration_is_rejected() {
        let truth = Reflectivities::new(0.3, 0.4, 0.5).unwrap();
        let mut cal = calibration_probabilities(&truth, &REF).unwrap();
        cal.p_v2_blocked *= 1.2;
        assert!(matches!(
            estimate_from_calibration(&cal, &REF, 1e-6),
            Err(Error::OutOfRange(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn honest_fairness_and_balance(
            eff in (0.01..=1.0f64, 0.01..=1.0f64, 0.01..=1.0f64, 0.01..=1.0f64, 0.01..=1.0f64, 0.01..=1.0f64)
                .prop_map(|(a, b, c, d, e, f)| PathEfficiencies {
                    eta_a_s: a, eta_b_y: b, eta_a_v1: c, eta_a_v2: d, eta_b_v1: e, eta_b_v2: f,
                }),
            v in 0.0..=1.0f64,
        ) {
            let d = honest_outcomes(&eff, v).unwrap();
            prop_assert_eq!(fairness(&d).unwrap(), 1.0);
            prop_assert_eq!(d.p_bob_sanctioned, 0.0);
            let refl = honest_reflectivities(&eff, v).unwrap();
            let (_, _, xi) = crate::optics::arm_powers(&refl, &eff).unwrap();
            prop_assert!((xi - 0.5).abs() < TOL);
            if d.p_alice_wins > 0.0 {
                let ratio = d.p_alice_sanctioned / d.p_alice_wins;
                let expected = eff.eta_a_v2 * (1.0 - v) / (eff.eta_a_v1 * (1.0 + v));
                prop_assert!((ratio - expected).abs() < 1e-12 * (1.0 + expected));
            }
        }

        // The closed form assumes the V2 arms are balanced whenever the V1 arms
        // are, which holds when each efficiency is an arm factor times a
        // detector factor.
        #[test]
        fn closed_form_matches_generic_model(
            eff in (0.01..=1.0f64, 0.01..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.01..=1.0f64, 0.01..=1.0f64)
                .prop_map(|(arm_a, arm_b, d1, d2, s, by)| PathEfficiencies {
                    eta_a_s: s, eta_b_y: by,
                    eta_a_v1: arm_a * d1.max(0.01), eta_a_v2: arm_a * d2,
                    eta_b_v1: arm_b * d1.max(0.01), eta_b_v2: arm_b * d2,
                }),
            v in 0.0..=1.0f64,
        ) {
            let refl = honest_reflectivities(&eff, v).unwrap();
            let generic = outcomes_from_optics(&refl, &eff, &InterferenceModel::locked(v).unwrap()).unwrap();
            let closed = honest_outcomes(&eff, v).unwrap();
            for (g, c) in generic.to_array().iter().zip(closed.to_array()) {
                prop_assert!((g - c).abs() < TOL);
            }
        }
    }

    #[test]
    fn reference_closed_form_deviation_is_small() {
        let refl = honest_reflectivities(&REF, 0.96).unwrap();
        let generic =
            outcomes_from_optics(&refl, &REF, &InterferenceModel::locked(0.96).unwrap()).unwrap();
        let closed = honest_outcomes(&REF, 0.96).unwrap();
        assert_abs_diff_eq!(generic.p_alice_wins, closed.p_alice_wins, epsilon = TOL);
        assert_abs_diff_eq!(generic.p_bob_wins, closed.p_bob_wins, epsilon = TOL);
        // The reference efficiencies are not exactly factorised: eta_a_v2/eta_b_v2 differs from
        // eta_a_v1/eta_b_v1 by 0.3 %.
        assert_abs_diff_eq!(
            generic.p_alice_sanctioned,
            0.002_340_002_898_631_566,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            generic.p_alice_sanctioned,
            closed.p_alice_sanctioned,
            epsilon = 5e-6
        );
    }
}
