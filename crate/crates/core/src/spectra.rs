//! Linear-response and harmonic spectra from recorded time series, plus the
//! charge-transfer profile of a cavity-induced density change.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Field, RealField};
use crate::potentials::Density;
use crate::tdprop::TimeSeries;

/// Speed of light in atomic units.
pub const SPEED_OF_LIGHT: f64 = 137.036;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumConfig {
    /// Gaussian damping e^{-η²t²}; `None` gives e^{-η²T²} = 1e-4 at the last sample.
    pub eta: Option<f64>,
    pub omega_min: f64,
    pub omega_max: f64,
    pub d_omega: f64,
    /// Overrides the kick strength stored with the time series.
    pub kick: Option<f64>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            eta: None,
            omega_min: 0.0,
            omega_max: 1.0,
            d_omega: 1e-3,
            kick: None,
        }
    }
}

impl SpectrumConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if let Some(eta) = self.eta {
            if !(eta >= 0.0 && eta.is_finite()) {
                errs.push("spectra.eta must be >= 0".to_string());
            }
        }
        if !(self.d_omega > 0.0) {
            errs.push("spectra.d_omega must be > 0".to_string());
        }
        if !(self.omega_max > self.omega_min) || self.omega_min < 0.0 {
            errs.push("spectra frequency window must satisfy 0 <= omega_min < omega_max".to_string());
        }
        if let Some(k) = self.kick {
            if k == 0.0 || !k.is_finite() {
                errs.push("spectra.kick must be finite and nonzero".to_string());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = ((self.omega_max - self.omega_min) / self.d_omega + 1e-9).floor() as usize;
        (0..=n).map(|i| self.omega_min + i as f64 * self.d_omega).collect()
    }

    pub fn eta_for(&self, duration: f64) -> f64 {
        self.eta.unwrap_or_else(|| default_eta(duration))
    }
}

/// η with e^{-η²T²} = 1e-4.
pub fn default_eta(duration: f64) -> f64 {
    (1e4f64).ln().sqrt() / duration
}

/// ∫ s(t) e^{iωt} e^{-η²(t-t₀)²} dt over the samples, trapezoid weights, time measured from t₀.
pub fn damped_transform(t: &[f64], signal: &[f64], omegas: &[f64], eta: f64) -> Result<Vec<C64>> {
    if t.len() != signal.len() {
        return Err(Error::Usage("time and signal lengths differ".into()));
    }
    if t.len() < 2 {
        return Err(Error::Usage("need at least two samples for a Fourier transform".into()));
    }
    let t0 = t[0];
    let n = t.len();
    let weighted: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let left = if i > 0 { t[i] - t[i - 1] } else { 0.0 };
            let right = if i + 1 < n { t[i + 1] - t[i] } else { 0.0 };
            let tau = t[i] - t0;
            (tau, 0.5 * (left + right) * signal[i] * (-eta * eta * tau * tau).exp())
        })
        .collect();
    Ok(omegas
        .par_iter()
        .map(|&w| {
            weighted
                .iter()
                .map(|&(tau, v)| C64::from_polar(v, w * tau))
                .sum()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub omega: f64,
    pub height: f64,
    /// Full width at half maximum from linear interpolation.
    pub width: f64,
    /// Integral between the neighbouring minima.
    pub area: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub alpha: Vec<C64>,
    pub sigma: Vec<f64>,
    pub peaks: Vec<Peak>,
    /// Per-sector σ_n when sector dipoles were recorded.
    pub sector_sigma: Vec<Vec<f64>>,
    pub eta: f64,
    pub axis: usize,
}

fn kick_of(ts: &TimeSeries, cfg: &SpectrumConfig) -> Result<(f64, usize)> {
    let (k, axis) = ts
        .kick()
        .ok_or_else(|| Error::Usage("time series carries no delta-kick metadata (kick_strength, kick_axis)".into()))?;
    let k = cfg.kick.unwrap_or(k);
    if k == 0.0 {
        return Err(Error::Usage("kick strength is zero".into()));
    }
    Ok((k, axis))
}

fn duration(ts: &TimeSeries) -> Result<f64> {
    if ts.len() < 2 {
        return Err(Error::Usage("time series too short".into()));
    }
    Ok(ts.t[ts.len() - 1] - ts.t[0])
}

/// α(ω) = (1/k) ∫ [D(t) - D(t₀)] e^{iωt} e^{-η²t²} dt.
pub fn response(t: &[f64], d: &[f64], k: f64, omegas: &[f64], eta: f64) -> Result<Vec<C64>> {
    let d0 = *d.first().ok_or_else(|| Error::Usage("empty dipole series".into()))?;
    let shifted: Vec<f64> = d.iter().map(|v| (v - d0) / k).collect();
    damped_transform(t, &shifted, omegas, eta)
}

/// α_jj(ω) along the kicked axis j.
pub fn polarizability(ts: &TimeSeries, cfg: &SpectrumConfig) -> Result<Vec<C64>> {
    cfg.validate()?;
    let (k, axis) = kick_of(ts, cfg)?;
    let eta = cfg.eta_for(duration(ts)?);
    response(&ts.t, &ts.dipole_axis(axis), k, &cfg.frequencies(), eta)
}

/// σ(ω) = (4πω/3c) Σ_j Im α_jj(ω) over the supplied diagonal components.
pub fn cross_section(omegas: &[f64], alphas: &[&[C64]]) -> Vec<f64> {
    omegas
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let tr: f64 = alphas.iter().map(|a| a[i].im).sum();
            4.0 * PI * w / (3.0 * SPEED_OF_LIGHT) * tr
        })
        .collect()
}

/// Local maxima above `rel_threshold` of the global maximum, refined by a parabola through three bins.
pub fn find_peaks(x: &[f64], y: &[f64], rel_threshold: f64) -> Vec<Peak> {
    let n = y.len();
    if n < 3 {
        return Vec::new();
    }
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(ymax > 0.0) {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        if !(y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] > rel_threshold * ymax) {
            continue;
        }
        let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
        let denom = a - 2.0 * b + c;
        let (offset, height) = if denom < 0.0 {
            let p = 0.5 * (a - c) / denom;
            (p, b - 0.25 * (a - c) * p)
        } else {
            (0.0, b)
        };
        let dx = x[i + 1] - x[i];
        let omega = x[i] + offset * dx;

        let mut lo = i;
        while lo > 0 && y[lo - 1] <= y[lo] {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < n && y[hi + 1] <= y[hi] {
            hi += 1;
        }
        let area: f64 = (lo..hi).map(|j| 0.5 * (y[j] + y[j + 1]) * (x[j + 1] - x[j])).sum();

        let half = 0.5 * height;
        let mut l = i;
        while l > lo && y[l] > half {
            l -= 1;
        }
        let mut r = i;
        while r < hi && y[r] > half {
            r += 1;
        }
        let cross = |j0: usize, j1: usize| {
            let (y0, y1) = (y[j0], y[j1]);
            if y1 == y0 {
                x[j0]
            } else {
                x[j0] + (half - y0) / (y1 - y0) * (x[j1] - x[j0])
            }
        };
        let left = if y[l] <= half { cross(l, l + 1) } else { x[l] };
        let right = if y[r] <= half { cross(r - 1, r) } else { x[r] };
        peaks.push(Peak {
            omega,
            height,
            width: right - left,
            area,
        });
    }
    peaks
}

pub const PEAK_THRESHOLD: f64 = 1e-3;

/// Absorption spectrum of a delta-kick run, including per-sector contributions when recorded.
pub fn absorption_spectrum(ts: &TimeSeries, cfg: &SpectrumConfig) -> Result<Spectrum> {
    cfg.validate()?;
    let (k, axis) = kick_of(ts, cfg)?;
    let eta = cfg.eta_for(duration(ts)?);
    let omega = cfg.frequencies();
    let alpha = response(&ts.t, &ts.dipole_axis(axis), k, &omega, eta)?;
    let sigma = cross_section(&omega, &[&alpha]);
    let sector_sigma = if ts.sector_dipoles.first().is_some_and(|d| !d.is_empty()) {
        sector_resolved_sigma(ts, cfg)?
    } else {
        Vec::new()
    };
    let peaks = find_peaks(&omega, &sigma, PEAK_THRESHOLD);
    Ok(Spectrum {
        omega,
        alpha,
        sigma,
        peaks,
        sector_sigma,
        eta,
        axis,
    })
}

/// σ_n(ω) from the sector dipoles D_n(t); Σ_n σ_n equals the total σ.
pub fn sector_resolved_sigma(ts: &TimeSeries, cfg: &SpectrumConfig) -> Result<Vec<Vec<f64>>> {
    let (k, axis) = kick_of(ts, cfg)?;
    let sectors = ts.sector_dipoles.first().map_or(0, |d| d.len());
    if sectors == 0 {
        return Err(Error::Usage("time series has no sector-resolved dipoles".into()));
    }
    let eta = cfg.eta_for(duration(ts)?);
    let omega = cfg.frequencies();
    (0..sectors)
        .map(|n| {
            let a = response(&ts.t, &ts.sector_dipole_axis(n, axis), k, &omega, eta)?;
            Ok(cross_section(&omega, &[&a]))
        })
        .collect()
}

impl Spectrum {
    /// Peaks inside [lo, hi] whose height is at least `rel` of the tallest one there.
    pub fn dominant_peaks(&self, lo: f64, hi: f64, rel: f64) -> Vec<Peak> {
        let inside: Vec<Peak> = self
            .peaks
            .iter()
            .copied()
            .filter(|p| p.omega >= lo && p.omega <= hi)
            .collect();
        let top = inside.iter().map(|p| p.height).fold(0.0, f64::max);
        inside.into_iter().filter(|p| p.height >= rel * top).collect()
    }

    /// Area of σ_n under the given peak, between the peak's neighbouring minima in the total σ.
    pub fn sector_area(&self, n: usize, peak: &Peak) -> Option<f64> {
        let s = self.sector_sigma.get(n)?;
        let i = self
            .omega
            .iter()
            .position(|&w| w >= peak.omega)?
            .min(self.omega.len() - 1);
        let y = &self.sigma;
        let mut lo = i.saturating_sub(1);
        while lo > 0 && y[lo - 1] <= y[lo] {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < y.len() && y[hi + 1] <= y[hi] {
            hi += 1;
        }
        Some(
            (lo..hi)
                .map(|j| 0.5 * (s[j] + s[j + 1]) * (self.omega[j + 1] - self.omega[j]))
                .sum(),
        )
    }

    pub fn write_tsv(&self, meta: &BTreeMap<String, String>, mut w: impl Write) -> Result<()> {
        let mut out = String::new();
        for (k, v) in meta {
            writeln!(out, "# {k} = {v}").expect("string write");
        }
        writeln!(out, "# eta = {}", self.eta).expect("string write");
        let mut cols = vec!["omega".to_string(), "re_alpha".into(), "im_alpha".into(), "sigma".into()];
        cols.extend((0..self.sector_sigma.len()).map(|n| format!("sigma_{n}")));
        out.push_str(&cols.join("\t"));
        out.push('\n');
        for i in 0..self.omega.len() {
            let mut row = vec![self.omega[i], self.alpha[i].re, self.alpha[i].im, self.sigma[i]];
            row.extend(self.sector_sigma.iter().map(|s| s[i]));
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        for p in &self.peaks {
            writeln!(
                out,
                "# peak omega = {:.8} height = {:.6e} width = {:.6e} area = {:.6e}",
                p.omega, p.height, p.width, p.area
            )
            .expect("string write");
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }
}

/// Upper minus lower of the two dominant peaks (≥ 10% of the tallest) in [lo, hi].
pub fn rabi_splitting(spec: &Spectrum, lo: f64, hi: f64) -> Result<f64> {
    let peaks = spec.dominant_peaks(lo, hi, 0.1);
    if peaks.len() != 2 {
        let list: Vec<String> = peaks
            .iter()
            .map(|p| format!("{:.5} (height {:.3e})", p.omega, p.height))
            .collect();
        return Err(Error::Analysis(format!(
            "expected two dominant peaks in [{lo}, {hi}], found {}: [{}]",
            peaks.len(),
            list.join(", ")
        )));
    }
    Ok(peaks[1].omega - peaks[0].omega)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    Hann,
    Blackman,
    None,
}

impl Window {
    fn weight(&self, i: usize, n: usize) -> f64 {
        if n < 2 {
            return 1.0;
        }
        let x = i as f64 / (n - 1) as f64;
        match self {
            Window::Hann => 0.5 - 0.5 * (2.0 * PI * x).cos(),
            Window::Blackman => 0.42 - 0.5 * (2.0 * PI * x).cos() + 0.08 * (4.0 * PI * x).cos(),
            Window::None => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HhgSpectrum {
    /// Harmonic order ω/ω_L.
    pub order: Vec<f64>,
    pub omega: Vec<f64>,
    pub intensity: Vec<f64>,
    pub laser_omega: f64,
}

/// Dipole acceleration by centered second differences; the two end samples are dropped.
pub fn dipole_acceleration(t: &[f64], d: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if t.len() < 5 || t.len() != d.len() {
        return Err(Error::Usage("series too short for a dipole acceleration".into()));
    }
    let dt = t[1] - t[0];
    let acc = (1..d.len() - 1)
        .map(|i| (d[i + 1] - 2.0 * d[i] + d[i - 1]) / (dt * dt))
        .collect();
    Ok((t[1..t.len() - 1].to_vec(), acc))
}

/// I(ω) = |∫ w(t) D̈(t) e^{iωt} dt|² on ω = ω_L · order.
pub fn hhg_spectrum(
    ts: &TimeSeries,
    axis: usize,
    laser_omega: f64,
    max_order: f64,
    d_order: f64,
    window: Window,
) -> Result<HhgSpectrum> {
    if !(laser_omega > 0.0 && d_order > 0.0 && max_order > 0.0) {
        return Err(Error::config("HHG spectrum needs positive laser frequency, order step and range"));
    }
    let (t, a) = dipole_acceleration(&ts.t, &ts.dipole_axis(axis))?;
    let n = a.len();
    let dt = t[1] - t[0];
    let windowed: Vec<(f64, f64)> = a
        .iter()
        .enumerate()
        .map(|(i, v)| (t[i] - t[0], v * window.weight(i, n) * dt))
        .collect();
    let m = (max_order / d_order).round() as usize;
    let order: Vec<f64> = (0..=m).map(|i| i as f64 * d_order).collect();
    let omega: Vec<f64> = order.iter().map(|o| o * laser_omega).collect();
    let intensity = omega
        .par_iter()
        .map(|&w| {
            windowed
                .iter()
                .map(|&(tau, v)| C64::from_polar(v, w * tau))
                .sum::<C64>()
                .norm_sqr()
        })
        .collect();
    Ok(HhgSpectrum {
        order,
        omega,
        intensity,
        laser_omega,
    })
}

impl HhgSpectrum {
    /// Largest intensity within ±`half_width` (in harmonic orders) of `order`.
    pub fn intensity_near(&self, order: f64, half_width: f64) -> f64 {
        self.order
            .iter()
            .zip(&self.intensity)
            .filter(|(o, _)| (**o - order).abs() <= half_width)
            .map(|(_, i)| *i)
            .fold(0.0, f64::max)
    }

    pub fn write_tsv(&self, meta: &BTreeMap<String, String>, mut w: impl Write) -> Result<()> {
        let mut out = String::new();
        for (k, v) in meta {
            writeln!(out, "# {k} = {v}").expect("string write");
        }
        writeln!(out, "# laser_omega = {}", self.laser_omega).expect("string write");
        out.push_str("order\tomega\tintensity\n");
        for i in 0..self.order.len() {
            writeln!(out, "{:.6}\t{:.10e}\t{:.10e}", self.order[i], self.omega[i], self.intensity[i]).expect("string write");
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChargeTransfer {
    pub x: Vec<f64>,
    /// Δq(x): charge of Δρ at or to the left of x.
    pub dq: Vec<f64>,
    pub delta_rho: RealField,
}

/// Δρ = ρ_cavity - ρ_free and its cumulative profile along x.
pub fn charge_transfer_profile(rho_cavity: &Density, rho_free: &Density) -> Result<ChargeTransfer> {
    rho_cavity.field().same_grid(rho_free.field())?;
    let grid = *rho_cavity.grid();
    let delta: Vec<f64> = rho_cavity
        .values()
        .iter()
        .zip(rho_free.values())
        .map(|(a, b)| a - b)
        .collect();
    let [nx, ny, nz] = grid.shape();
    let dv = grid.volume_element();
    let mut dq = Vec::with_capacity(nx);
    let mut acc = 0.0;
    for ix in 0..nx {
        let slab: f64 = delta[ix * ny * nz..(ix + 1) * ny * nz].iter().sum();
        acc += slab * dv;
        dq.push(acc);
    }
    Ok(ChargeTransfer {
        x: grid.axis_coords(0),
        dq,
        delta_rho: Field::from_vec(grid, delta)?,
    })
}

impl ChargeTransfer {
    /// Largest |Δq(x)|, the charge moved across any plane.
    pub fn transferred(&self) -> f64 {
        self.dq.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::tdprop::Sample;

    fn synthetic(d: impl Fn(f64) -> f64, dt: f64, n: usize, k: f64) -> TimeSeries {
        let mut ts = TimeSeries::default();
        ts.meta.insert("kick_strength".into(), format!("{k}"));
        ts.meta.insert("kick_axis".into(), "0".into());
        for i in 0..n {
            let t = i as f64 * dt;
            ts.push(Sample {
                t,
                dipole: [d(t), 0.0, 0.0],
                q: 0.0,
                photon: vec![1.0],
                energy: 0.0,
                norm: 1.0,
                sector_dipoles: vec![[d(t), 0.0, 0.0]],
            });
        }
        ts
    }

    #[test]
    fn constant_dipole_gives_zero_polarizability() {
        let ts = synthetic(|_| 0.3, 0.1, 500, 1e-3);
        let a = polarizability(&ts, &SpectrumConfig::default()).unwrap();
        assert!(a.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn sine_response_peak_weight() {
        let (amp, big_omega, k) = (2e-3, 0.3, 1e-3);
        let ts = synthetic(|t| 0.1 + amp * (big_omega * t).sin(), 0.05, 40001, k);
        let cfg = SpectrumConfig { omega_min: 0.0, omega_max: 0.6, d_omega: 2e-4, ..Default::default() };
        let alpha = polarizability(&ts, &cfg).unwrap();
        let w = cfg.frequencies();
        let weight: f64 = alpha.iter().map(|a| a.im * cfg.d_omega).sum();
        let expected = PI * amp / (2.0 * k);
        assert!((weight - expected).abs() < 1e-3 * expected, "{weight} vs {expected}");
        let imax = (0..w.len()).max_by(|&i, &j| alpha[i].im.total_cmp(&alpha[j].im)).unwrap();
        assert!((w[imax] - big_omega).abs() <= cfg.d_omega);
        // Residual truncation ripple is bounded by the 1e-4 damping left at the final time.
        let top = alpha.iter().map(|a| a.im).fold(0.0, f64::max);
        assert!(alpha.iter().all(|a| a.im > -2e-4 * top));
    }

    #[test]
    fn polarizability_is_linear_in_kick() {
        let a = synthetic(|t| 1e-3 * (0.2 * t).sin(), 0.1, 2000, 1e-3);
        let b = synthetic(|t| 0.5e-3 * (0.2 * t).sin(), 0.1, 2000, 0.5e-3);
        let cfg = SpectrumConfig::default();
        let pa = polarizability(&a, &cfg).unwrap();
        let pb = polarizability(&b, &cfg).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn missing_kick_metadata_is_a_usage_error() {
        let mut ts = synthetic(|t| t, 0.1, 10, 1e-3);
        ts.meta.clear();
        assert!(matches!(polarizability(&ts, &SpectrumConfig::default()), Err(Error::Usage(_))));
    }

    #[test]
    fn cross_section_formula() {
        let w = [0.0, 0.5, 1.0];
        let a = [C64::new(0.0, 2.0); 3];
        let s = cross_section(&w, &[&a]);
        assert_eq!(s[0], 0.0);
        assert!((s[2] - 2.0 * s[1]).abs() < 1e-15);
        assert!((s[1] - 4.0 * PI * 0.5 / (3.0 * SPEED_OF_LIGHT) * 2.0).abs() < 1e-15);
        assert!(cross_section(&w, &[&[C64::new(0.0, 0.0); 3]]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_synthetic_peaks_give_their_splitting() {
        let x: Vec<f64> = (0..2001).map(|i| i as f64 * 1e-4).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&w| (-(w - 0.10f64).powi(2) / 1e-5).exp() + 0.8 * (-(w - 0.14f64).powi(2) / 1e-5).exp())
            .collect();
        let spec = Spectrum {
            omega: x.clone(),
            alpha: vec![C64::new(0.0, 0.0); x.len()],
            sigma: y.clone(),
            peaks: find_peaks(&x, &y, PEAK_THRESHOLD),
            sector_sigma: Vec::new(),
            eta: 0.0,
            axis: 0,
        };
        let s = rabi_splitting(&spec, 0.0, 0.2).unwrap();
        assert!((s - 0.04).abs() < 1e-6, "{s}");
        match rabi_splitting(&spec, 0.0, 0.12) {
            Err(Error::Analysis(msg)) => assert!(msg.contains("found 1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parabolic_refinement_recovers_sub_bin_position() {
        let x: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = x.iter().map(|&w| 1.0 - (w - 1.0037f64).powi(2)).collect();
        let p = find_peaks(&x, &y, 1e-3);
        assert_eq!(p.len(), 1);
        assert!((p[0].omega - 1.0037).abs() < 1e-12);
        assert!((p[0].height - 1.0).abs() < 1e-12);
    }

    #[test]
    fn damping_broadens_without_shifting() {
        let ts = synthetic(|t| 1e-3 * (0.25 * t).sin(), 0.1, 6000, 1e-3);
        let cfg = SpectrumConfig { omega_min: 0.1, omega_max: 0.4, d_omega: 5e-4, ..Default::default() };
        for eta in [0.006, 0.01, 0.02] {
            let a = polarizability(&ts, &SpectrumConfig { eta: Some(eta), ..cfg }).unwrap();
            let im: Vec<f64> = a.iter().map(|v| v.im).collect();
            let p = find_peaks(&cfg.frequencies(), &im, 0.1);
            assert_eq!(p.len(), 1);
            assert!((p[0].omega - 0.25).abs() < cfg.d_omega, "{}", p[0].omega);
        }
    }

    #[test]
    fn sector_spectra_sum_to_total() {
        let mut ts = synthetic(|t| 1e-3 * (0.25 * t).sin(), 0.1, 3000, 1e-3);
        for (i, sd) in ts.sector_dipoles.iter_mut().enumerate() {
            let d = sd[0][0];
            let part = 0.3 * (i as f64 * 0.01).cos() * d;
            *sd = vec![[d - part, 0.0, 0.0], [part, 0.0, 0.0]];
        }
        let s = absorption_spectrum(&ts, &SpectrumConfig::default()).unwrap();
        for i in 0..s.omega.len() {
            let sum: f64 = s.sector_sigma.iter().map(|v| v[i]).sum();
            assert!((sum - s.sigma[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn cosine_acceleration_spectrum_height() {
        let w0 = 0.4;
        let dt = 0.05;
        let n = 20001;
        let ts = synthetic(|t| (w0 * t).cos(), dt, n, 1.0);
        let hhg = hhg_spectrum(&ts, 0, w0, 3.0, 0.001, Window::Hann).unwrap();
        let peak = hhg.intensity_near(1.0, 0.01);
        let t_eff = 0.5 * (n - 3) as f64 * dt;
        let expected = (w0 * w0 / 2.0 * t_eff).powi(2);
        assert!((peak / expected - 1.0).abs() < 1e-2, "{peak} vs {expected}");
        assert!(hhg.intensity_near(2.0, 0.05) < 1e-6 * peak);
    }

    #[test]
    fn short_series_is_rejected() {
        let ts = synthetic(|t| t, 0.1, 3, 1.0);
        assert!(matches!(hhg_spectrum(&ts, 0, 0.1, 5.0, 0.1, Window::Hann), Err(Error::Usage(_))));
    }

    fn gaussian_density(g: Grid, centers: &[(f64, f64)], n: f64) -> Density {
        let f = Field::from_fn(g, |r| {
            centers
                .iter()
                .map(|&(c, w)| w * (-(r[0] - c).powi(2)).exp() / PI.sqrt())
                .sum()
        });
        Density::new(f, n).unwrap()
    }

    #[test]
    fn charge_transfer_of_shifted_gaussian_pair() {
        let g = Grid::new_1d(401, 0.05).unwrap();
        let free = gaussian_density(g, &[(-5.0, 1.0), (5.0, 1.0)], 2.0);
        let delta = 0.1;
        let cav = gaussian_density(g, &[(-5.0, 1.0 - delta), (5.0, 1.0 + delta)], 2.0);
        let ct = charge_transfer_profile(&cav, &free).unwrap();
        assert!((ct.transferred() - delta).abs() < 1e-8, "{}", ct.transferred());
        assert!(ct.dq.last().unwrap().abs() < 1e-8);
        let same = charge_transfer_profile(&free, &free).unwrap();
        assert!(same.dq.iter().all(|&v| v == 0.0));
    }
}
