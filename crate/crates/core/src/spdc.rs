//! Spectral model of the heralded photon source.
//!
//! The joint spectral amplitude of a type-II down-converted pair is the pump
//! envelope evaluated at `w_s + w_i` times the phase-matching function
//! `sinc(dk L / 2)`. The heralded photon is pure only if that amplitude
//! factorises; its Schmidt number `K` measures how far it is from doing so
//! and the heralded purity is `1 / K`.
//!
//! Refractive indices are constants taken at the centre wavelengths, which
//! makes `dk` linear in the two frequencies. With constant phase indices the
//! nominal poling period does not phase-match exactly at the nominal
//! wavelengths, so by default the residual mismatch at the centre of the grid
//! is removed ([`PhaseReference::Centered`]): the grating is assumed to be
//! tuned to the stated wavelengths.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Shape of the joint spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralModel {
    /// Gaussian pump envelope times sinc phase matching.
    #[default]
    Spdc,
    /// Pump envelope only, phase matching set to 1.
    FlatPhaseMatching,
    /// Product of two Gaussian marginals with the pump bandwidth; rank one.
    SeparableGaussian,
}

/// Reference point of the phase mismatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseReference {
    /// `dk` measured relative to its value at the grid centre.
    #[default]
    Centered,
    /// `dk = k_p - k_s - k_i - 2 pi / period` as is.
    Absolute,
}

/// Source parameters. Lengths are in the units named by each field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceParams {
    pub pump_wavelength_nm: f64,
    /// Standard deviation of the Gaussian pump spectrum, in wavelength.
    pub pump_bandwidth_nm: f64,
    pub crystal_length_mm: f64,
    pub poling_period_um: f64,
    pub n_pump: f64,
    pub n_signal: f64,
    pub n_idler: f64,
    pub signal_wavelength_nm: f64,
    pub idler_wavelength_nm: f64,
    #[serde(default)]
    pub model: SpectralModel,
    #[serde(default)]
    pub phase_reference: PhaseReference,
    /// Beam waists in the crystal. Informational: they only justify treating
    /// the spectral and spatial degrees of freedom as uncorrelated.
    #[serde(default = "default_pump_waist")]
    pub pump_waist_um: f64,
    #[serde(default = "default_signal_waist")]
    pub signal_waist_um: f64,
    #[serde(default = "default_idler_waist")]
    pub idler_waist_um: f64,
}

fn default_pump_waist() -> f64 {
    315.0
}
fn default_signal_waist() -> f64 {
    190.0
}
fn default_idler_waist() -> f64 {
    218.0
}

impl Default for SourceParams {
    /// 30 mm ppKTP with a 46.2 um poling period pumped at 770 nm.
    fn default() -> Self {
        Self {
            pump_wavelength_nm: 770.0,
            pump_bandwidth_nm: 0.2,
            crystal_length_mm: 30.0,
            poling_period_um: 46.2,
            n_pump: 1.76,
            n_signal: 1.73,
            n_idler: 1.82,
            signal_wavelength_nm: 1541.5,
            idler_wavelength_nm: 1538.5,
            model: SpectralModel::Spdc,
            phase_reference: PhaseReference::Centered,
            pump_waist_um: default_pump_waist(),
            signal_waist_um: default_signal_waist(),
            idler_waist_um: default_idler_waist(),
        }
    }
}

impl SourceParams {
    pub fn separable_toy() -> Self {
        Self {
            model: SpectralModel::SeparableGaussian,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pump_wavelength_nm", self.pump_wavelength_nm),
            ("pump_bandwidth_nm", self.pump_bandwidth_nm),
            ("crystal_length_mm", self.crystal_length_mm),
            ("poling_period_um", self.poling_period_um),
            ("signal_wavelength_nm", self.signal_wavelength_nm),
            ("idler_wavelength_nm", self.idler_wavelength_nm),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Domain(format!("{name} = {value} must be positive")));
            }
        }
        for (name, value) in [
            ("n_pump", self.n_pump),
            ("n_signal", self.n_signal),
            ("n_idler", self.n_idler),
        ] {
            if !(value.is_finite() && value >= 1.0) {
                return Err(Error::Domain(format!("{name} = {value} must be >= 1")));
            }
        }
        Ok(())
    }

    /// Pump bandwidth converted to angular frequency, rad/s.
    pub fn pump_sigma_omega(&self) -> f64 {
        let lp = self.pump_wavelength_nm * 1e-9;
        2.0 * PI * SPEED_OF_LIGHT * self.pump_bandwidth_nm * 1e-9 / (lp * lp)
    }
}

fn omega_of(wavelength_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / (wavelength_nm * 1e-9)
}

fn wavelength_nm_of(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega * 1e9
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Joint spectral amplitude sampled on a square frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JsaGrid {
    /// Signal angular frequencies, rad/s, ascending.
    pub signal_omega: Vec<f64>,
    /// Idler angular frequencies, rad/s, ascending.
    pub idler_omega: Vec<f64>,
    /// `amplitude[(i, s)]` is the amplitude at idler `i`, signal `s`;
    /// `sum |amplitude|^2 = 1`.
    pub amplitude: DMatrix<Complex64>,
    /// Pump centre frequency, rad/s.
    pub pump_omega: f64,
}

impl JsaGrid {
    pub fn total_weight(&self) -> f64 {
        self.amplitude.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn signal_wavelengths_nm(&self) -> Vec<f64> {
        self.signal_omega
            .iter()
            .map(|&w| wavelength_nm_of(w))
            .collect()
    }

    pub fn idler_wavelengths_nm(&self) -> Vec<f64> {
        self.idler_omega
            .iter()
            .map(|&w| wavelength_nm_of(w))
            .collect()
    }

    /// Signal spectrum, the idler traced out.
    pub fn signal_marginal(&self) -> Vec<f64> {
        self.amplitude
            .column_iter()
            .map(|col| col.iter().map(|a| a.norm_sqr()).sum())
            .collect()
    }

    /// Writes `|amplitude|^2` as a CSV matrix: the header row holds the signal
    /// wavelengths (nm), each following row starts with its idler wavelength.
    pub fn write_intensity_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["idler_nm\\signal_nm".to_string()];
        header.extend(
            self.signal_wavelengths_nm()
                .iter()
                .map(|w| format!("{w:.6}")),
        );
        out.write_record(&header)?;
        for (i, idler) in self.idler_wavelengths_nm().iter().enumerate() {
            let mut row = vec![format!("{idler:.6}")];
            row.extend(
                self.amplitude
                    .row(i)
                    .iter()
                    .map(|a| format!("{:.9e}", a.norm_sqr())),
            );
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Samples the normalised joint spectral amplitude on an `n x n` grid spanning
/// `+- window_sigmas` pump bandwidths around the signal and idler centres.
///
/// The centres are shifted by half the energy mismatch of the nominal
/// wavelengths so that they add up to the pump frequency exactly.
pub fn compute_jsa(params: &SourceParams, grid_size: usize, window_sigmas: f64) -> Result<JsaGrid> {
    params.validate()?;
    if grid_size < 16 {
        return Err(Error::Domain(format!("grid size {grid_size} is below 16")));
    }
    if !(window_sigmas.is_finite() && window_sigmas > 0.0) {
        return Err(Error::Domain(format!(
            "window {window_sigmas} must be positive"
        )));
    }

    let sigma = params.pump_sigma_omega();
    let pump = omega_of(params.pump_wavelength_nm);
    let mismatch =
        omega_of(params.signal_wavelength_nm) + omega_of(params.idler_wavelength_nm) - pump;
    let signal_centre = omega_of(params.signal_wavelength_nm) - mismatch / 2.0;
    let idler_centre = omega_of(params.idler_wavelength_nm) - mismatch / 2.0;

    let offsets =
        crate::adversary::linspace(-window_sigmas * sigma, window_sigmas * sigma, grid_size);
    let signal_omega: Vec<f64> = offsets.iter().map(|d| signal_centre + d).collect();
    let idler_omega: Vec<f64> = offsets.iter().map(|d| idler_centre + d).collect();

    let grating = 2.0 * PI / (params.poling_period_um * 1e-6);
    let delta_k = |ws: f64, wi: f64| {
        (params.n_pump * (ws + wi) - params.n_signal * ws - params.n_idler * wi) / SPEED_OF_LIGHT
            - grating
    };
    let reference = match params.phase_reference {
        PhaseReference::Centered => delta_k(signal_centre, idler_centre),
        PhaseReference::Absolute => 0.0,
    };
    let half_length = params.crystal_length_mm * 1e-3 / 2.0;

    let value = |i: usize, s: usize| -> f64 {
        let (ws, wi) = (signal_omega[s], idler_omega[i]);
        let gauss = |d: f64| (-d * d / (2.0 * sigma * sigma)).exp();
        match params.model {
            SpectralModel::Spdc => {
                gauss(ws + wi - pump) * sinc((delta_k(ws, wi) - reference) * half_length)
            }
            SpectralModel::FlatPhaseMatching => gauss(ws + wi - pump),
            SpectralModel::SeparableGaussian => {
                gauss(ws - signal_centre) * gauss(wi - idler_centre)
            }
        }
    };
    let mut amplitude = DMatrix::from_fn(grid_size, grid_size, |i, s| Complex64::from(value(i, s)));

    let weight: f64 = amplitude.iter().map(|a| a.norm_sqr()).sum();
    if !(weight.is_finite() && weight > 0.0) {
        return Err(Error::Numerical(
            "joint spectral amplitude vanishes on the whole grid".into(),
        ));
    }
    amplitude /= Complex64::from(weight.sqrt());

    Ok(JsaGrid {
        signal_omega,
        idler_omega,
        amplitude,
        pump_omega: pump,
    })
}

/// Schmidt decomposition summary of a joint spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchmidtAnalysis {
    pub schmidt_number: f64,
    pub purity: f64,
    /// Normalised Schmidt weights in descending order.
    pub weights: Vec<f64>,
}

const SVD_MAX_ITERATIONS: usize = 10_000;

/// Schmidt weights from the singular values of the amplitude matrix.
pub fn schmidt_analysis(jsa: &JsaGrid) -> Result<SchmidtAnalysis> {
    let singular = if jsa.amplitude.iter().all(|a| a.im == 0.0) {
        let real = jsa.amplitude.map(|a| a.re);
        nalgebra::SVD::try_new(real, false, false, f64::EPSILON, SVD_MAX_ITERATIONS)
            .map(|svd| svd.singular_values.iter().copied().collect::<Vec<f64>>())
    } else {
        nalgebra::SVD::try_new(
            jsa.amplitude.clone(),
            false,
            false,
            f64::EPSILON,
            SVD_MAX_ITERATIONS,
        )
        .map(|svd| svd.singular_values.iter().copied().collect::<Vec<f64>>())
    }
    .ok_or_else(|| Error::Numerical("singular value decomposition did not converge".into()))?;

    schmidt_from_singular_values(&singular)
}

/// Schmidt number, purity and weights from raw singular values.
pub fn schmidt_from_singular_values(singular: &[f64]) -> Result<SchmidtAnalysis> {
    let mut weights: Vec<f64> = singular.iter().map(|s| s * s).collect();
    let total: f64 = weights.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Numerical("all singular values vanish".into()));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    weights.sort_by(|a, b| b.total_cmp(a));
    let participation: f64 = weights.iter().map(|w| w * w).sum();
    let schmidt_number = (1.0 / participation).max(1.0);
    Ok(SchmidtAnalysis {
        schmidt_number,
        purity: 1.0 / schmidt_number,
        weights,
    })
}

/// Bandwidth figures of the heralded signal photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralSummary {
    /// FWHM of the signal marginal spectrum, nm.
    pub signal_fwhm_nm: f64,
    /// `lambda_s^2 / fwhm`, mm.
    pub coherence_length_mm: f64,
}

/// Signal FWHM from the marginal spectrum, with linear interpolation of the
/// half-maximum crossings, and the matching coherence length
/// `lambda_s^2 / fwhm_lambda`.
pub fn spectral_summaries(jsa: &JsaGrid) -> Result<SpectralSummary> {
    let marginal = jsa.signal_marginal();
    let axis = &jsa.signal_omega;
    let (peak, max) = marginal
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Numerical("empty spectrum".into()))?;
    let half = max / 2.0;

    let crossing = |from: usize, to: usize| -> f64 {
        let t = (marginal[from] - half) / (marginal[from] - marginal[to]);
        axis[from] + t * (axis[to] - axis[from])
    };
    let left = (0..peak)
        .rev()
        .find(|&k| marginal[k] < half)
        .map(|k| crossing(k + 1, k));
    let right = (peak + 1..marginal.len())
        .find(|&k| marginal[k] < half)
        .map(|k| crossing(k - 1, k));
    let (left, right) = match (left, right) {
        (Some(l), Some(r)) => (l, r),
        _ => {
            return Err(Error::Numerical(
                "signal spectrum does not fall to half maximum inside the grid".into(),
            ))
        }
    };

    let centre = (axis[0] + axis[axis.len() - 1]) / 2.0;
    let lambda = 2.0 * PI * SPEED_OF_LIGHT / centre;
    let fwhm_m = lambda * lambda * (right - left) / (2.0 * PI * SPEED_OF_LIGHT);
    Ok(SpectralSummary {
        signal_fwhm_nm: fwhm_m * 1e9,
        coherence_length_mm: lambda * lambda / fwhm_m * 1e3,
    })
}
