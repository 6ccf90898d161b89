//! Cheating strategies and the interest a cheater has in them.
//!
//! Bob's optimal attack is to announce `b = 1` on every run, which Alice
//! catches whenever her own detector `D_A` clicks. Alice is modelled with the
//! simple reflectivity attack: she raises `x` above the honest value while
//! Bob keeps his honest `y` and `z`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::optics::{InterferenceModel, PathEfficiencies, Reflectivities};
use crate::protocol::{fairness, honest_reflectivities, outcomes_from_optics, OutcomeDistribution};

/// Weight given to being sanctioned when judging whether cheating pays off.
///
/// Values above 1 stand for sanctions harsher than handing the win to the
/// opponent.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeterrentFactor(f64);

impl DeterrentFactor {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::Domain(format!(
                "deterrent factor {delta} must be finite and non-negative"
            )));
        }
        Ok(Self(delta))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Bob always claims the win against an honest Alice at `x_h`.
pub fn bob_optimal_attack(eff: &PathEfficiencies, visibility: f64) -> Result<OutcomeDistribution> {
    let x_h = honest_reflectivities(eff, visibility)?.x;
    let caught = x_h * eff.eta_a_s;
    OutcomeDistribution::from_decisive(0.0, 1.0 - caught, 0.0, caught)
}

/// Alice prepares with reflectivity `x` against an honest Bob using `y_h`
/// and `z = 1/2`, with the slow phase at zero.
pub fn alice_x_attack(
    x: f64,
    eff: &PathEfficiencies,
    visibility: f64,
) -> Result<OutcomeDistribution> {
    check_unit("x", x)?;
    let honest = honest_reflectivities(eff, visibility)?;
    let refl = Reflectivities { x, ..honest };
    outcomes_from_optics(&refl, eff, &InterferenceModel::locked(visibility)?)
}

fn interest_ratio(gain: f64, loss: f64, sanction: f64, delta: DeterrentFactor) -> Result<f64> {
    let weighted = delta.value() * sanction;
    let denominator = gain + loss + weighted;
    if denominator <= 0.0 {
        return Err(Error::Degenerate(
            "interest undefined: no wins and no weighted sanctions".into(),
        ));
    }
    Ok((gain - loss - weighted) / denominator)
}

/// Alice's interest in cheating,
/// `(P_Aw - P_Bw - delta P_As) / (P_Aw + P_Bw + delta P_As)`.
pub fn interest(dist: &OutcomeDistribution, delta: DeterrentFactor) -> Result<f64> {
    interest_ratio(
        dist.p_alice_wins,
        dist.p_bob_wins,
        dist.p_alice_sanctioned,
        delta,
    )
}

/// Bob's interest, the same ratio with the roles of the parties swapped.
pub fn bob_interest(dist: &OutcomeDistribution, delta: DeterrentFactor) -> Result<f64> {
    interest_ratio(
        dist.p_bob_wins,
        dist.p_alice_wins,
        dist.p_bob_sanctioned,
        delta,
    )
}

/// Resolves each caught Alice as a win for Bob with probability `delta` and
/// as an abort otherwise.
pub fn sanction_by_win_transfer(
    dist: &OutcomeDistribution,
    delta: f64,
) -> Result<OutcomeDistribution> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Domain(format!(
            "win-transfer probability {delta} is outside [0, 1]"
        )));
    }
    let moved = delta * dist.p_alice_sanctioned;
    Ok(OutcomeDistribution {
        p_bob_wins: dist.p_bob_wins + moved,
        p_alice_sanctioned: 0.0,
        p_abort: dist.p_abort + dist.p_alice_sanctioned - moved,
        ..*dist
    })
}

/// Fairness of the protocol once caught cheaters are handled by win transfer.
/// Equals `1 - |interest(dist, delta)|`.
pub fn fairness_under_sanction(dist: &OutcomeDistribution, delta: f64) -> Result<f64> {
    fairness(&sanction_by_win_transfer(dist, delta)?)
}

/// `n` evenly spaced points on `[start, end]`, both ends included.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (n - 1) as f64;
            (0..n)
                .map(|k| {
                    if k == n - 1 {
                        end
                    } else {
                        start + step * k as f64
                    }
                })
                .collect()
        }
    }
}

/// Default resolution of the `x` sweep over `[0, 1]`.
pub const DEFAULT_X_POINTS: usize = 200;

/// One point of Alice's reflectivity sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AliceSweepPoint {
    pub x: f64,
    pub outcomes: OutcomeDistribution,
    /// Interest for each requested deterrent factor, in request order.
    pub interest: Vec<f64>,
}

/// Evaluates the reflectivity attack on every grid point, in grid order.
pub fn alice_sweep(
    xs: &[f64],
    eff: &PathEfficiencies,
    visibility: f64,
    deltas: &[DeterrentFactor],
) -> Result<Vec<AliceSweepPoint>> {
    xs.par_iter()
        .map(|&x| {
            let outcomes = alice_x_attack(x, eff, visibility)?;
            let interest = deltas
                .iter()
                .map(|&d| interest(&outcomes, d))
                .collect::<Result<Vec<_>>>()?;
            Ok(AliceSweepPoint {
                x,
                outcomes,
                interest,
            })
        })
        .collect()
}

/// Grid point maximising `score`; the first one wins ties.
pub fn argmax_by<T>(points: &[T], score: impl Fn(&T) -> f64) -> Option<&T> {
    points.iter().fold(None, |best: Option<&T>, p| match best {
        Some(b) if score(b) >= score(p) => Some(b),
        _ => Some(p),
    })
}
