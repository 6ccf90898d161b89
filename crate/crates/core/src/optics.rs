//! Single-photon propagation through the three-beam-splitter interferometer.
//!
//! Alice splits the photon on a beam splitter of power reflectivity `x` and
//! keeps the reflected mode. Bob splits the transmitted mode on `y`, sends
//! the transmitted part to his decision detector `D_B` and, during
//! verification, recombines his reflected mode with Alice's on `z` before the
//! detectors `D_V1` and `D_V2`.
//!
//! Losses are described only by the six composite path efficiencies (coupling,
//! fibre, components and detector lumped together). Phase noise faster than
//! the detector resolution is folded into the visibility `v`, and the slowly
//! drifting remainder is the scalar `slow_phase`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, clamp_probability, Error, Result};

/// Power reflectivities of Alice's (`x`) and Bob's (`y`, `z`) beam splitters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reflectivities {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Reflectivities {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let refl = Self { x, y, z };
        refl.validate()?;
        Ok(refl)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("x", self.x)?;
        check_unit("y", self.y)?;
        check_unit("z", self.z)
    }
}

/// Transmission of each complete optical path, detector efficiency included.
///
/// Naming follows `eta_<arm>_<detector>`: `eta_a_s` is Alice's arm through the
/// switch to `D_A`, `eta_b_y` Bob's arm to `D_B`, and the four `v1`/`v2`
/// entries are the two arms ending on the verification detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathEfficiencies {
    pub eta_a_s: f64,
    pub eta_b_y: f64,
    pub eta_a_v1: f64,
    pub eta_a_v2: f64,
    pub eta_b_v1: f64,
    pub eta_b_v2: f64,
}

impl PathEfficiencies {
    /// Efficiencies measured on the reference fibre setup with every VOA at 0 dB.
    pub const REFERENCE: PathEfficiencies = PathEfficiencies {
        eta_a_s: 0.315,
        eta_b_y: 0.303,
        eta_a_v1: 0.231,
        eta_a_v2: 0.219,
        eta_b_v1: 0.184,
        eta_b_v2: 0.175,
    };

    pub const IDEAL: PathEfficiencies = PathEfficiencies {
        eta_a_s: 1.0,
        eta_b_y: 1.0,
        eta_a_v1: 1.0,
        eta_a_v2: 1.0,
        eta_b_v1: 1.0,
        eta_b_v2: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.named() {
            check_unit(name, value)?;
        }
        Ok(())
    }

    /// `(field name, value)` pairs in declaration order.
    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("eta_a_s", self.eta_a_s),
            ("eta_b_y", self.eta_b_y),
            ("eta_a_v1", self.eta_a_v1),
            ("eta_a_v2", self.eta_a_v2),
            ("eta_b_v1", self.eta_b_v1),
            ("eta_b_v2", self.eta_b_v2),
        ]
    }
}

impl Default for PathEfficiencies {
    fn default() -> Self {
        Self::REFERENCE
    }
}

/// Visibility of the verification interference and the slow phase at which
/// it is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceModel {
    pub visibility: f64,
    pub slow_phase: f64,
}

impl InterferenceModel {
    pub fn new(visibility: f64, slow_phase: f64) -> Result<Self> {
        let model = Self {
            visibility,
            slow_phase,
        };
        model.validate()?;
        Ok(model)
    }

    /// Perfectly stabilised interferometer at the given visibility.
    pub fn locked(visibility: f64) -> Result<Self> {
        Self::new(visibility, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("visibility", self.visibility)?;
        if !self.slow_phase.is_finite() {
            return Err(Error::Domain(format!(
                "slow phase {} is not finite",
                self.slow_phase
            )));
        }
        Ok(())
    }
}

/// Click probabilities of `D_V1`, `D_V2` and `D_B` for one heralded photon.
/// Whatever is left over is lost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionProbabilities {
    pub p_v1: f64,
    pub p_v2: f64,
    pub p_db: f64,
}

impl DetectionProbabilities {
    pub fn loss(&self) -> f64 {
        1.0 - self.p_v1 - self.p_v2 - self.p_db
    }
}

/// Output amplitudes on `D_V1`, `D_V2` and `D_B`, up to a global phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeAmplitudes {
    pub a1: Complex64,
    pub a2: Complex64,
    pub a3: Complex64,
}

impl ModeAmplitudes {
    pub fn norm_sqr(&self) -> f64 {
        self.a1.norm_sqr() + self.a2.norm_sqr() + self.a3.norm_sqr()
    }
}

/// Propagates one photon with a fixed phase difference between the arms.
pub fn propagate_amplitudes(
    refl: &Reflectivities,
    eff: &PathEfficiencies,
    phase_difference: f64,
) -> Result<ModeAmplitudes> {
    refl.validate()?;
    eff.validate()?;
    if !phase_difference.is_finite() {
        return Err(Error::Domain(format!(
            "phase difference {phase_difference} is not finite"
        )));
    }
    let Reflectivities { x, y, z } = *refl;
    let bob = Complex64::from_polar(1.0, phase_difference);

    let a1 = Complex64::from((x * z * eff.eta_a_v1).sqrt())
        + bob * ((1.0 - x) * y * (1.0 - z) * eff.eta_b_v1).sqrt();
    let a2 = -(Complex64::from((x * (1.0 - z) * eff.eta_a_v2).sqrt())
        - bob * ((1.0 - x) * y * z * eff.eta_b_v2).sqrt());
    let a3 = bob * ((1.0 - x) * (1.0 - y) * eff.eta_b_y).sqrt();

    Ok(ModeAmplitudes { a1, a2, a3 })
}

/// Phase-independent pieces of the verification click probabilities.
///
/// `p_v1 = base_v1 + v cos(phase) cross_v1`, `p_v2 = base_v2 - v cos(phase) cross_v2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct InterferenceTerms {
    pub base_v1: f64,
    pub cross_v1: f64,
    pub base_v2: f64,
    pub cross_v2: f64,
    pub p_db: f64,
}

impl InterferenceTerms {
    pub fn new(refl: &Reflectivities, eff: &PathEfficiencies) -> Self {
        let Reflectivities { x, y, z } = *refl;
        let mix = x * (1.0 - x) * y * z * (1.0 - z);
        Self {
            base_v1: x * z * eff.eta_a_v1 + (1.0 - x) * y * (1.0 - z) * eff.eta_b_v1,
            cross_v1: 2.0 * (mix * eff.eta_a_v1 * eff.eta_b_v1).sqrt(),
            base_v2: x * (1.0 - z) * eff.eta_a_v2 + (1.0 - x) * y * z * eff.eta_b_v2,
            cross_v2: 2.0 * (mix * eff.eta_a_v2 * eff.eta_b_v2).sqrt(),
            p_db: (1.0 - x) * (1.0 - y) * eff.eta_b_y,
        }
    }

    /// Unclamped `(p_v1, p_v2)` for the given `v cos(phase)` factor.
    #[inline]
    pub fn verification(&self, coherence: f64) -> (f64, f64) {
        (
            self.base_v1 + coherence * self.cross_v1,
            self.base_v2 - coherence * self.cross_v2,
        )
    }

    /// Largest `p_v1 + p_v2 + p_db` over every slow phase.
    pub fn worst_case_total(&self, visibility: f64) -> f64 {
        let swing = visibility * (self.cross_v1 - self.cross_v2).abs();
        self.base_v1 + self.base_v2 + self.p_db + swing
    }
}

/// Phase-averaged detection probabilities.
///
/// Each value is clamped to [0, 1] when it overshoots by at most 1e-12;
/// anything further out is reported as [`Error::OutOfRange`].
pub fn detection_probabilities(
    refl: &Reflectivities,
    eff: &PathEfficiencies,
    interf: &InterferenceModel,
) -> Result<DetectionProbabilities> {
    refl.validate()?;
    eff.validate()?;
    interf.validate()?;
    let terms = InterferenceTerms::new(refl, eff);
    let (p_v1, p_v2) = terms.verification(interf.visibility * interf.slow_phase.cos());
    Ok(DetectionProbabilities {
        p_v1: clamp_probability("p_v1", p_v1)?,
        p_v2: clamp_probability("p_v2", p_v2)?,
        p_db: clamp_probability("p_db", terms.p_db)?,
    })
}

/// Light reaching the verification beam splitter from each arm, referenced to
/// the `D_V1` detector: `(pi_a, pi_b, xi)` with `xi = pi_a / (pi_a + pi_b)`.
///
/// The common `D_V1` detector efficiency multiplies both arm powers and drops
/// out of `xi`.
pub fn arm_powers(refl: &Reflectivities, eff: &PathEfficiencies) -> Result<(f64, f64, f64)> {
    refl.validate()?;
    eff.validate()?;
    let pi_a = refl.x * eff.eta_a_v1;
    let pi_b = (1.0 - refl.x) * refl.y * eff.eta_b_v1;
    let total = pi_a + pi_b;
    if total <= 0.0 {
        return Err(Error::Degenerate(
            "no light reaches the verification beam splitter from either arm".into(),
        ));
    }
    Ok((pi_a, pi_b, pi_a / total))
}

/// Visibility left after averaging over unresolved fast phase fluctuations:
/// the length of the mean phasor of the samples.
pub fn effective_visibility<I>(fast_phase_samples: I) -> Result<f64>
where
    I: IntoIterator<Item = f64>,
{
    let (mut cos_sum, mut sin_sum, mut n) = (0.0_f64, 0.0_f64, 0_u64);
    for phase in fast_phase_samples {
        cos_sum += phase.cos();
        sin_sum += phase.sin();
        n += 1;
    }
    if n == 0 {
        return Err(Error::NoRuns("no fast-phase samples".into()));
    }
    let n = n as f64;
    Ok((cos_sum / n).hypot(sin_sum / n).min(1.0))
}

/// Fringe contrast from one detector's click probability at slow phase 0 and pi.
pub fn visibility_from_probabilities(p_at_zero: f64, p_at_pi: f64) -> Result<f64> {
    check_unit("p_at_zero", p_at_zero)?;
    check_unit("p_at_pi", p_at_pi)?;
    let total = p_at_zero + p_at_pi;
    if total <= 0.0 {
        return Err(Error::Degenerate(
            "both probabilities are zero; contrast undefined".into(),
        ));
    }
    Ok(((p_at_zero - p_at_pi) / total).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

    const TOL: f64 = 1e-12;

    fn ideal_honest() -> Reflectivities {
        Reflectivities::new(0.25, 1.0 / 3.0, 0.5).unwrap()
    }

    #[test]
    fn full_reflection_goes_to_v1() {
        let refl = Reflectivities::new(1.0, 0.3, 1.0).unwrap();
        let amps = propagate_amplitudes(&refl, &PathEfficiencies::IDEAL, 0.0).unwrap();
        assert_abs_diff_eq!(amps.a1.re, 1.0, epsilon = TOL);
        assert_abs_diff_eq!(amps.a2.norm(), 0.0, epsilon = TOL);
        assert_abs_diff_eq!(amps.a3.norm(), 0.0, epsilon = TOL);
    }

    #[test]
    fn full_transmission_goes_to_bob() {
        let refl = Reflectivities::new(0.0, 0.0, 0.5).unwrap();
        let amps = propagate_amplitudes(&refl, &PathEfficiencies::IDEAL, 0.0).unwrap();
        assert_abs_diff_eq!(amps.a3.norm_sqr(), 1.0, epsilon = TOL);
        assert_abs_diff_eq!(amps.a1.norm(), 0.0, epsilon = TOL);
        assert_abs_diff_eq!(amps.a2.norm(), 0.0, epsilon = TOL);
    }

    #[test]
    fn ideal_honest_amplitudes() {
        let amps = propagate_amplitudes(&ideal_honest(), &PathEfficiencies::IDEAL, 0.0).unwrap();
        assert_abs_diff_eq!(amps.a1.norm_sqr(), 0.5, epsilon = TOL);
        assert_abs_diff_eq!(amps.a2.norm_sqr(), 0.0, epsilon = TOL);
        assert_abs_diff_eq!(amps.a3.norm_sqr(), 0.5, epsilon = TOL);
    }

    #[test]
    fn ideal_honest_probabilities() {
        let interf = InterferenceModel::locked(1.0).unwrap();
        let p =
            detection_probabilities(&ideal_honest(), &PathEfficiencies::IDEAL, &interf).unwrap();
        assert_abs_diff_eq!(p.p_v1, 0.5, epsilon = TOL);
        assert_abs_diff_eq!(p.p_v2, 0.0, epsilon = TOL);
        assert_abs_diff_eq!(p.p_db, 0.5, epsilon = TOL);
    }

    #[test]
    fn antiphase_swaps_ports() {
        // Cross terms flip sign: 1/8 + 1/8 -/+ 2 sqrt(1/4 * 3/4 * 1/3 * 1/4) swaps the ports.
        let interf = InterferenceModel::new(1.0, PI).unwrap();
        let p =
            detection_probabilities(&ideal_honest(), &PathEfficiencies::IDEAL, &interf).unwrap();
        assert_abs_diff_eq!(p.p_v1, 0.0, epsilon = TOL);
        assert_abs_diff_eq!(p.p_v2, 0.5, epsilon = TOL);
    }

    #[test]
    fn balanced_reflectivities_sanction_probability() {
        let refl = Reflectivities::new(1.0 - FRAC_1_SQRT_2, FRAC_1_SQRT_2, 2.0 - SQRT_2).unwrap();
        let interf = InterferenceModel::locked(1.0).unwrap();
        let p = detection_probabilities(&refl, &PathEfficiencies::IDEAL, &interf).unwrap();
        // Direct evaluation in extended precision gives 0.0372047777...
        assert_abs_diff_eq!(p.p_v2, 0.037_204_777_686_384, epsilon = 1e-12);
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        assert!(matches!(
            Reflectivities::new(1.2, 0.0, 0.0),
            Err(Error::Domain(_))
        ));
        let mut eff = PathEfficiencies::IDEAL;
        eff.eta_b_v2 = -0.1;
        let refl = ideal_honest();
        assert!(matches!(
            detection_probabilities(&refl, &eff, &InterferenceModel::locked(1.0).unwrap()),
            Err(Error::Domain(_))
        ));
        let bad_v = InterferenceModel {
            visibility: 1.5,
            slow_phase: 0.0,
        };
        assert!(detection_probabilities(&refl, &PathEfficiencies::IDEAL, &bad_v).is_err());
        assert!(InterferenceModel::new(0.5, f64::NAN).is_err());
    }

    #[test]
    fn arm_balance_cases() {
        let (_, _, xi) = arm_powers(
            &Reflectivities::new(1.0, 0.5, 0.5).unwrap(),
            &PathEfficiencies::REFERENCE,
        )
        .unwrap();
        assert_eq!(xi, 1.0);
        let (_, _, xi) = arm_powers(
            &Reflectivities::new(0.0, 0.5, 0.5).unwrap(),
            &PathEfficiencies::REFERENCE,
        )
        .unwrap();
        assert_eq!(xi, 0.0);
        assert!(matches!(
            arm_powers(
                &Reflectivities::new(0.0, 0.0, 0.5).unwrap(),
                &PathEfficiencies::REFERENCE
            ),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn effective_visibility_limits() {
        assert_eq!(effective_visibility(vec![0.0; 100]).unwrap(), 1.0);
        let n = 10_000;
        let uniform = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64);
        assert!(effective_visibility(uniform).unwrap() < 1e-9);
        assert!(matches!(
            effective_visibility(Vec::<f64>::new()),
            Err(Error::NoRuns(_))
        ));
    }

    #[test]
    fn contrast_ratio_cases() {
        assert_eq!(visibility_from_probabilities(0.5, 0.5).unwrap(), 0.0);
        assert_eq!(visibility_from_probabilities(1.0, 0.0).unwrap(), 1.0);
        assert!(matches!(
            visibility_from_probabilities(0.0, 0.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn contrast_recovers_configured_visibility() {
        let refl = ideal_honest();
        let at = |phase| {
            detection_probabilities(
                &refl,
                &PathEfficiencies::IDEAL,
                &InterferenceModel::new(0.96, phase).unwrap(),
            )
            .unwrap()
            .p_v1
        };
        let v = visibility_from_probabilities(at(0.0), at(PI)).unwrap();
        assert_abs_diff_eq!(v, 0.96, epsilon = TOL);
    }

    #[test]
    fn destructive_interference_when_arms_balance() {
        // z = 1/2 and x eta_A = (1-x) y eta_B with a shared detector factor.
        let eff = PathEfficiencies {
            eta_a_s: 0.4,
            eta_b_y: 0.6,
            eta_a_v1: 0.3 * 0.9,
            eta_a_v2: 0.3 * 0.8,
            eta_b_v1: 0.5 * 0.9,
            eta_b_v2: 0.5 * 0.8,
        };
        let x = 0.4;
        let y = x * 0.3 / ((1.0 - x) * 0.5);
        let refl = Reflectivities::new(x, y, 0.5).unwrap();
        let p =
            detection_probabilities(&refl, &eff, &InterferenceModel::locked(1.0).unwrap()).unwrap();
        assert!(p.p_v2.abs() < TOL);
    }

    /// Composite efficiencies built from per-segment transmissions, so that
    /// the two verification detectors see both arms with the same factor.
    fn physical_efficiencies() -> impl Strategy<Value = PathEfficiencies> {
        (
            0.0..=1.0f64,
            0.0..=1.0f64,
            0.0..=1.0f64,
            0.0..=1.0f64,
            0.0..=1.0f64,
            0.0..=1.0f64,
        )
            .prop_map(
                |(arm_a, arm_b, det_v1, det_v2, switch_a, det_b)| PathEfficiencies {
                    eta_a_s: switch_a,
                    eta_b_y: det_b,
                    eta_a_v1: arm_a * det_v1,
                    eta_a_v2: arm_a * det_v2,
                    eta_b_v1: arm_b * det_v1,
                    eta_b_v2: arm_b * det_v2,
                },
            )
    }

    fn reflectivities() -> impl Strategy<Value = Reflectivities> {
        (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(x, y, z)| Reflectivities { x, y, z })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn amplitudes_match_probabilities(
            refl in reflectivities(),
            eff in physical_efficiencies(),
            phase in -10.0..10.0f64,
        ) {
            let amps = propagate_amplitudes(&refl, &eff, phase).unwrap();
            let p = detection_probabilities(&refl, &eff, &InterferenceModel::new(1.0, phase).unwrap()).unwrap();
            prop_assert!((amps.a1.norm_sqr() - p.p_v1).abs() < TOL);
            prop_assert!((amps.a2.norm_sqr() - p.p_v2).abs() < TOL);
            prop_assert!((amps.a3.norm_sqr() - p.p_db).abs() < TOL);
            prop_assert!(amps.norm_sqr() <= 1.0 + TOL);
        }

        #[test]
        fn cosine_parity(
            refl in reflectivities(),
            eff in physical_efficiencies(),
            v in 0.0..=1.0f64,
            phase in -10.0..10.0f64,
        ) {
            let plus = detection_probabilities(&refl, &eff, &InterferenceModel::new(v, phase).unwrap()).unwrap();
            let minus = detection_probabilities(&refl, &eff, &InterferenceModel::new(v, -phase).unwrap()).unwrap();
            prop_assert_eq!(plus, minus);
        }

        #[test]
        fn constant_offset_leaves_visibility_unchanged(
            samples in prop::collection::vec(-4.0..4.0f64, 1..200),
            offset in -10.0..10.0f64,
        ) {
            let v = effective_visibility(samples.iter().copied()).unwrap();
            let shifted = effective_visibility(samples.iter().map(|s| s + offset)).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!((v - shifted).abs() < 1e-12);
        }
    }
}
