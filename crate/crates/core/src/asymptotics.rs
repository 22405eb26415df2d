//! Profiles, modified scattering, decay fits and related diagnostics.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{fft, ifft, spectral_derivative, weighted_l2_norm, weighted_sup_norm, ComplexField, FrequencyGrid};
use crate::io::{write_series, CsvTable};
use crate::spectral::{distorted_inverse, distorted_transform, SpectralCoefficients, SpectralDecomposition};

/// Default bootstrap exponent surrogate `α`.
pub const DEFAULT_ALPHA: f64 = 0.1;
/// Taper fraction of the Tukey window used before time-Fourier transforms.
pub const TUKEY_TAPER: f64 = 0.1;
pub const MIN_FIT_SAMPLES: usize = 8;

/// Least-squares fit of `log v = log c + p log t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r2: f64,
    pub samples: usize,
}

pub fn fit_power_law(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<PowerLawFit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::invalid(format!(
            "{} samples in [{}, {}], need {MIN_FIT_SAMPLES}",
            pts.len(),
            window.0,
            window.1
        )));
    }
    if pts.iter().any(|(t, v)| !(*v > 0.0) || !(*t > 0.0)) {
        return Err(Error::invalid("power-law fit needs positive times and values"));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let p = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    };
    Ok(PowerLawFit {
        exponent: p,
        prefactor: (my - p * mx).exp(),
        r2,
        samples: pts.len(),
    })
}

/// `f̃(t,k) = e^{-itk²} F̃[P_c η](k)`.
pub fn compute_profile(eta: &ComplexField, t: f64, dec: &SpectralDecomposition) -> Result<SpectralCoefficients> {
    let c = distorted_transform(&dec.project_continuous(eta), dec)?;
    Ok(c.multiply(|k| Complex64::from_polar(1.0, -t * k * k)))
}

/// Profiles at stored times with the accumulated phase and the modified profile.
#[derive(Debug, Clone)]
pub struct ProfileSeries {
    pub times: Vec<f64>,
    pub kgrid: FrequencyGrid,
    pub profiles: Vec<Vec<Complex64>>,
    /// `Φ(t,k) = ∫₀ᵗ |f̃(s,k)|² ds/(1+s)`.
    pub phase: Vec<Vec<f64>>,
    /// `w = e^{iΦ/2} f̃`.
    pub modified: Vec<Vec<Complex64>>,
}

impl ProfileSeries {
    /// Accumulates `Φ` by the trapezoid rule from the first stored time, with
    /// head `|f̃(t₀,k)|² log(1+t₀)`.
    pub fn new(times: Vec<f64>, profiles: Vec<SpectralCoefficients>) -> Result<Self> {
        if times.len() != profiles.len() || times.is_empty() {
            return Err(Error::invalid("profile series needs one profile per time"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("profile times must increase strictly"));
        }
        let kgrid = profiles[0].kgrid;
        let rows: Vec<Vec<Complex64>> = profiles.into_iter().map(|p| p.values).collect();
        let m = kgrid.len();
        let mut phase = Vec::with_capacity(rows.len());
        let mut acc: Vec<f64> = rows[0].iter().map(|f| f.norm_sqr() * (1.0 + times[0]).ln()).collect();
        phase.push(acc.clone());
        for i in 1..rows.len() {
            let (t0, t1) = (times[i - 1], times[i]);
            for j in 0..m {
                acc[j] +=
                    0.5 * (t1 - t0) * (rows[i - 1][j].norm_sqr() / (1.0 + t0) + rows[i][j].norm_sqr() / (1.0 + t1));
            }
            phase.push(acc.clone());
        }
        let modified = rows
            .iter()
            .zip(&phase)
            .map(|(r, p)| {
                r.iter()
                    .zip(p)
                    .map(|(f, ph)| f * Complex64::from_polar(1.0, 0.5 * ph))
                    .collect()
            })
            .collect();
        Ok(Self {
            times,
            kgrid,
            profiles: rows,
            phase,
            modified,
        })
    }

    /// Profiles of the given fields at the given times.
    pub fn from_fields(times: &[f64], fields: &[&ComplexField], dec: &SpectralDecomposition) -> Result<Self> {
        let profiles = times
            .par_iter()
            .zip(fields.par_iter())
            .map(|(t, f)| compute_profile(f, *t, dec))
            .collect::<Result<Vec<_>>>()?;
        Self::new(times.to_vec(), profiles)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn index_near(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }

    /// Index of the node closest to `k`.
    pub fn k_index(&self, k: f64) -> usize {
        let dk = self.kgrid.spacing();
        (((k + self.kgrid.band_limit()) / dk - 0.5).round().max(0.0) as usize).min(self.kgrid.len() - 1)
    }

    /// Node in `|k| ≥ k_min` where `|f̃|` is largest at the final time.
    pub fn peak_index(&self, k_min: f64) -> usize {
        let last = self.profiles.last().unwrap();
        (0..self.kgrid.len())
            .filter(|&j| self.kgrid.k(j).abs() >= k_min)
            .max_by(|&a, &b| last[a].norm().total_cmp(&last[b].norm()))
            .unwrap_or(0)
    }

    /// Fit of the unwrapped `arg f̃(t,k₀)` against `log t` on a time window,
    /// compared with `-(1/2)|W∞(k₀)|²`.
    pub fn phase_drift(&self, k_index: usize, window: (f64, f64)) -> Result<PhaseDrift> {
        let sel: Vec<usize> = (0..self.len())
            .filter(|&i| self.times[i] >= window.0 && self.times[i] <= window.1)
            .collect();
        if sel.len() < 3 {
            return Err(Error::invalid("phase drift needs at least 3 times in the window"));
        }
        let mut args = Vec::with_capacity(sel.len());
        let mut prev = f64::NAN;
        for &i in &sel {
            let mut a = self.profiles[i][k_index].arg();
            if prev.is_finite() {
                while a - prev > std::f64::consts::PI {
                    a -= 2.0 * std::f64::consts::PI;
                }
                while a - prev < -std::f64::consts::PI {
                    a += 2.0 * std::f64::consts::PI;
                }
            }
            args.push(a);
            prev = a;
        }
        let xs: Vec<f64> = sel.iter().map(|&i| self.times[i].ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = args.iter().sum::<f64>() / n;
        let slope = xs.iter().zip(&args).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
        let w_inf = self.modified.last().unwrap()[k_index];
        let predicted = -0.5 * w_inf.norm_sqr();
        let moduli: Vec<f64> = sel.iter().map(|&i| self.profiles[i][k_index].norm()).collect();
        let max = moduli.iter().cloned().fold(f64::MIN, f64::max);
        let min = moduli.iter().cloned().fold(f64::MAX, f64::min);
        Ok(PhaseDrift {
            k: self.kgrid.k(k_index),
            slope,
            predicted,
            relative_error: ((slope - predicted) / predicted).abs(),
            modulus_variation: (max - min) / max,
        })
    }

    fn matrix(&self, cols: &[usize], f: impl Fn(usize, usize) -> f64) -> CsvTable {
        let mut header = vec!["t".to_string()];
        header.extend(cols.iter().map(|&j| format!("k={:.6}", self.kgrid.k(j))));
        let mut t = CsvTable::new(&header);
        for i in 0..self.len() {
            let mut row = vec![self.times[i]];
            row.extend(cols.iter().map(|&j| f(i, j)));
            t.push(row);
        }
        t
    }

    /// Writes `|f̃|`, `arg f̃`, `|w|`, `arg w` as `t × k` matrices over `|k| ≤ k_max`.
    pub fn write_matrices(&self, dir: &Path, stem: &str, k_max: f64) -> Result<Vec<String>> {
        let cols: Vec<usize> = (0..self.kgrid.len())
            .filter(|&j| self.kgrid.k(j).abs() <= k_max)
            .collect();
        let tables = [
            ("profile_abs", self.matrix(&cols, |i, j| self.profiles[i][j].norm())),
            ("profile_arg", self.matrix(&cols, |i, j| self.profiles[i][j].arg())),
            ("modified_abs", self.matrix(&cols, |i, j| self.modified[i][j].norm())),
            ("modified_arg", self.matrix(&cols, |i, j| self.modified[i][j].arg())),
        ];
        let mut names = Vec::new();
        for (suffix, table) in tables {
            let name = format!("{stem}_{suffix}.csv");
            table.write(&dir.join(&name))?;
            names.push(name);
        }
        Ok(names)
    }
}

/// Phase-drift comparison at one wavenumber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseDrift {
    pub k: f64,
    /// `d arg f̃ / d log t`.
    pub slope: f64,
    /// `-(1/2)|W∞(k)|²`.
    pub predicted: f64,
    pub relative_error: f64,
    /// `(max - min)/max` of `|f̃(t,k)|` over the window.
    pub modulus_variation: f64,
}

/// Limit of the modified profile and its dyadic Cauchy gaps.
#[derive(Debug, Clone, Serialize)]
pub struct ModifiedProfile {
    pub w_inf: Vec<Complex64>,
    /// `(T, sup_{|k| ≥ T^{-3α}} |w(2T,k) - w(T,k)|)`.
    pub gaps: Vec<(f64, f64)>,
}

impl ModifiedProfile {
    pub fn gaps_decreasing(&self) -> bool {
        self.gaps.windows(2).all(|w| w[1].1 < w[0].1)
    }

    pub fn w_inf_coefficients(&self, kgrid: FrequencyGrid) -> SpectralCoefficients {
        SpectralCoefficients {
            kgrid,
            values: self.w_inf.clone(),
        }
    }
}

/// With `half_width = Some(L)` the gap at `T` is restricted to
/// `|k| ≤ (2L/3)/(4T)`, the wavenumbers still inside `|x| ≤ 2L/3` at `2T`.
pub fn modified_profile(
    series: &ProfileSeries,
    alpha: f64,
    dyadic: &[f64],
    half_width: Option<f64>,
) -> Result<ModifiedProfile> {
    if series.len() < 3 {
        return Err(Error::invalid("modified profile needs at least 3 stored times"));
    }
    let t_last = *series.times.last().unwrap();
    let mut gaps = Vec::new();
    for &t in dyadic {
        if 2.0 * t > t_last * (1.0 + 1e-9) {
            return Err(Error::invalid(format!("dyadic time {t} needs data up to {}", 2.0 * t)));
        }
        let (a, b) = (series.index_near(t), series.index_near(2.0 * t));
        let kmin = t.powf(-3.0 * alpha);
        let kmax = half_width.map_or(f64::INFINITY, |l| l / (6.0 * t));
        let gap = (0..series.kgrid.len())
            .filter(|&j| {
                let k = series.kgrid.k(j).abs();
                k >= kmin && k <= kmax
            })
            .map(|j| (series.modified[b][j] - series.modified[a][j]).norm())
            .fold(0.0, f64::max);
        gaps.push((t, gap));
    }
    Ok(ModifiedProfile {
        w_inf: series.modified.last().unwrap().clone(),
        gaps,
    })
}

/// Decay norms of a sequence of fields.
#[derive(Debug, Clone, Serialize)]
pub struct DecayDiagnostics {
    pub times: Vec<f64>,
    pub sup: Vec<f64>,
    /// `‖⟨x⟩^{-2} η‖∞`.
    pub weighted_sup: Vec<f64>,
    /// `‖⟨x⟩^{-1} ∂ₓη‖₂`.
    pub local_derivative: Vec<f64>,
    /// `sup_x ⟨x⟩^{-1} (∫₀ᵀ |η|² dt)^{1/2}`.
    pub smoothing: Vec<f64>,
}

/// Exponents of the three decay norms on a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayExponents {
    pub sup: PowerLawFit,
    pub weighted_sup: PowerLawFit,
    pub local_derivative: PowerLawFit,
}

pub fn decay_diagnostics(times: &[f64], fields: &[&ComplexField]) -> DecayDiagnostics {
    let per: Vec<(f64, f64, f64)> = fields
        .par_iter()
        .map(|f| {
            let d = spectral_derivative(f, 1);
            (f.norm_sup(), weighted_sup_norm(f, 2.0), weighted_l2_norm(&d, 1.0))
        })
        .collect();
    let grid = *fields[0].grid();
    let n = grid.len();
    let weight: Vec<f64> = (0..n).map(|j| 1.0 / (1.0 + grid.x(j).powi(2)).sqrt()).collect();
    let mut acc = vec![0.0; n];
    let mut smoothing = Vec::with_capacity(times.len());
    smoothing.push(0.0);
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        let (a, b) = (fields[i - 1].values(), fields[i].values());
        for j in 0..n {
            acc[j] += 0.5 * dt * (a[j].norm_sqr() + b[j].norm_sqr());
        }
        smoothing.push(acc.iter().zip(&weight).map(|(s, w)| w * s.sqrt()).fold(0.0, f64::max));
    }
    DecayDiagnostics {
        times: times.to_vec(),
        sup: per.iter().map(|p| p.0).collect(),
        weighted_sup: per.iter().map(|p| p.1).collect(),
        local_derivative: per.iter().map(|p| p.2).collect(),
        smoothing,
    }
}

impl DecayDiagnostics {
    pub fn exponents(&self, window: (f64, f64)) -> Result<DecayExponents> {
        Ok(DecayExponents {
            sup: fit_power_law(&self.times, &self.sup, window)?,
            weighted_sup: fit_power_law(&self.times, &self.weighted_sup, window)?,
            local_derivative: fit_power_law(&self.times, &self.local_derivative, window)?,
        })
    }

    /// `S(T₂)/S(T₁)` of the smoothing functional.
    pub fn smoothing_ratio(&self, t1: f64, t2: f64) -> f64 {
        let near = |t: f64| {
            let mut best = 0;
            for (i, s) in self.times.iter().enumerate() {
                if (s - t).abs() < (self.times[best] - t).abs() {
                    best = i;
                }
            }
            best
        };
        self.smoothing[near(t2)] / self.smoothing[near(t1)]
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["t", "sup", "weighted_sup", "local_derivative", "smoothing"]);
        for i in 0..self.times.len() {
            t.push(vec![
                self.times[i],
                self.sup[i],
                self.weighted_sup[i],
                self.local_derivative[i],
                self.smoothing[i],
            ]);
        }
        t
    }

    /// One two-column file per series.
    pub fn write_series(&self, dir: &Path, stem: &str) -> Result<Vec<String>> {
        let mut names = Vec::new();
        for (suffix, ys) in [
            ("sup", &self.sup),
            ("weighted_sup", &self.weighted_sup),
            ("local_derivative", &self.local_derivative),
            ("smoothing", &self.smoothing),
        ] {
            let name = format!("{stem}_{suffix}.dat");
            write_series(&dir.join(&name), &self.times, ys)?;
            names.push(name);
        }
        Ok(names)
    }
}

/// Smooth cutoff with `φ₁ = 1` on `|λ| ≤ c` and `φ₁ = 0` on `|λ| ≥ 2c`.
pub fn low_cutoff(lambda: f64, c: f64) -> f64 {
    let s = (lambda.abs() / c - 1.0).clamp(0.0, 1.0);
    if s <= 0.0 {
        return 1.0;
    }
    if s >= 1.0 {
        return 0.0;
    }
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    f(1.0 - s) / (f(1.0 - s) + f(s))
}

/// `‖⟨x⟩^{-2} t g(t)‖_{L∞_x L²_t}` over the given samples.
fn weighted_time_norm(times: &[f64], fields: &[ComplexField]) -> f64 {
    let grid = *fields[0].grid();
    let n = grid.len();
    let mut acc = vec![0.0; n];
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        let (a, b) = (fields[i - 1].values(), fields[i].values());
        for j in 0..n {
            acc[j] += 0.5 * dt * ((times[i - 1] * a[j].norm()).powi(2) + (times[i] * b[j].norm()).powi(2));
        }
    }
    (0..n)
        .map(|j| acc[j].sqrt() / (1.0 + grid.x(j).powi(2)))
        .fold(0.0, f64::max)
}

/// Low/high-frequency smoothing functionals of the homogeneous flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearSmoothing {
    pub horizon: f64,
    /// `j = 1, 2` time derivatives of the low-frequency part.
    pub low: [f64; 2],
    /// `j = 0, 1` space derivatives of the high-frequency part.
    pub high: [f64; 2],
}

/// Evaluates the `t`-weighted smoothing functionals of `e^{itH}φ_{1,2}(H)P_c h`
/// on `[0, T]`, with `φ₁(k²)` applied as a distorted multiplier.
pub fn linear_smoothing(
    h: &ComplexField,
    times: &[f64],
    cutoff: f64,
    dec: &SpectralDecomposition,
) -> Result<LinearSmoothing> {
    let hc = distorted_transform(&dec.project_continuous(h), dec)?;
    let low = |t: f64, j: i32| {
        hc.multiply(|k| {
            let l = k * k;
            Complex64::new(0.0, l).powi(j) * low_cutoff(l, cutoff) * Complex64::from_polar(1.0, t * l)
        })
    };
    let high = |t: f64| hc.multiply(|k| Complex64::from_polar(1.0 - low_cutoff(k * k, cutoff), t * k * k));
    let mut fields: [Vec<ComplexField>; 4] = Default::default();
    for &t in times {
        fields[0].push(distorted_inverse(&low(t, 1), dec)?);
        fields[1].push(distorted_inverse(&low(t, 2), dec)?);
        let hi = distorted_inverse(&high(t), dec)?;
        fields[3].push(spectral_derivative(&hi, 1));
        fields[2].push(hi);
    }
    Ok(LinearSmoothing {
        horizon: *times.last().unwrap_or(&0.0),
        low: [
            weighted_time_norm(times, &fields[0]),
            weighted_time_norm(times, &fields[1]),
        ],
        high: [
            weighted_time_norm(times, &fields[2]),
            weighted_time_norm(times, &fields[3]),
        ],
    })
}

/// Deviation of the cubic term from its resonant part over a band.
#[derive(Debug, Clone, Serialize)]
pub struct ResonanceSeries {
    pub band: (f64, f64),
    pub times: Vec<f64>,
    /// `sup_band |e^{-itk²}F̃[P_c(|u|²u)] - (1/2t)|f̃|²f̃|`.
    pub deviation: Vec<f64>,
    /// `sup_band (1/2t)|f̃|³`.
    pub main_term: Vec<f64>,
}

impl ResonanceSeries {
    pub fn fit(&self, window: (f64, f64)) -> Result<PowerLawFit> {
        fit_power_law(&self.times, &self.deviation, window)
    }
}

/// Compares `e^{-itk²}F̃[P_c(|u|²u)]` with `(1/2t)|f̃|²f̃` for `|k|` in `band`,
/// where `f̃` is the profile of `u` at the same time.
pub fn cubic_resonance_check(
    times: &[f64],
    fields: &[&ComplexField],
    band: (f64, f64),
    alpha: f64,
    dec: &SpectralDecomposition,
) -> Result<ResonanceSeries> {
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let k_floor = t_max.powf(-3.0 * alpha);
    if band.0 < k_floor {
        return Err(Error::Precondition(format!(
            "band starts at |k| = {} below the exclusion radius {k_floor:.4}",
            band.0
        )));
    }
    if band.1 > dec.kgrid().band_limit() || band.1 <= band.0 {
        return Err(Error::Precondition("band must lie inside the frequency grid".into()));
    }
    let kgrid = *dec.kgrid();
    let idx: Vec<usize> = (0..kgrid.len())
        .filter(|&j| {
            let k = kgrid.k(j).abs();
            k >= band.0 && k <= band.1
        })
        .collect();
    let rows = times
        .par_iter()
        .zip(fields.par_iter())
        .map(|(&t, u)| -> Result<(f64, f64)> {
            if t <= 0.0 {
                return Err(Error::invalid("resonance check needs t > 0"));
            }
            let f = compute_profile(u, t, dec)?;
            let cubic = u.map(|_, v| v * v.norm_sqr());
            let n = compute_profile(&cubic, t, dec)?;
            let mut dev: f64 = 0.0;
            let mut main: f64 = 0.0;
            for &j in &idx {
                let m = f.values[j] * f.values[j].norm_sqr() / (2.0 * t);
                dev = dev.max((n.values[j] - m).norm());
                main = main.max(m.norm());
            }
            Ok((dev, main))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResonanceSeries {
        band,
        times: times.to_vec(),
        deviation: rows.iter().map(|r| r.0).collect(),
        main_term: rows.iter().map(|r| r.1).collect(),
    })
}

/// Orientation of the stationary-phase map and sign of the quadratic phase in
/// `η ≈ e^{s_p i x²/4t}/√(-2it) W(s_m x/2t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FarFieldConvention {
    pub map_sign: f64,
    pub phase_sign: f64,
}

impl FarFieldConvention {
    pub const CANDIDATES: [FarFieldConvention; 4] = [
        FarFieldConvention {
            map_sign: -1.0,
            phase_sign: 1.0,
        },
        FarFieldConvention {
            map_sign: -1.0,
            phase_sign: -1.0,
        },
        FarFieldConvention {
            map_sign: 1.0,
            phase_sign: 1.0,
        },
        FarFieldConvention {
            map_sign: 1.0,
            phase_sign: -1.0,
        },
    ];
}

fn interpolate(c: &SpectralCoefficients, k: f64) -> Complex64 {
    let kg = c.kgrid;
    let s = (k + kg.band_limit()) / kg.spacing() - 0.5;
    if s < 0.0 || s > (kg.len() - 1) as f64 {
        return Complex64::new(0.0, 0.0);
    }
    let i = (s.floor() as usize).min(kg.len() - 2);
    let w = s - i as f64;
    c.values[i] * (1.0 - w) + c.values[i + 1] * w
}

/// Pointwise comparison of `η(t)` with the asymptotic formula.
#[derive(Debug, Clone, Serialize)]
pub struct FarFieldReport {
    pub t: f64,
    pub convention: FarFieldConvention,
    pub region: (f64, f64),
    pub sup_error: f64,
    pub sup_eta: f64,
    /// `sup_error / sup_eta`.
    pub relative: f64,
    /// `sup_error · √t`.
    pub scaled_error: f64,
}

/// Compares `η(t,x)` with `e^{s_p i x²/4t}/√(-2it)·e^{-(i/2)|W|² log t}·W(s_m x/2t)`
/// over `|x| ∈ [0.2 t k_min, min(2L/3, 2tK)]`; the logarithmic phase is
/// omitted when `nonlinear` is false.
pub fn far_field_check(
    eta: &ComplexField,
    w: &SpectralCoefficients,
    t: f64,
    convention: FarFieldConvention,
    alpha: f64,
    nonlinear: bool,
) -> Result<FarFieldReport> {
    let grid = *eta.grid();
    let kmin = t.powf(-3.0 * alpha);
    let lo = 0.2 * t * kmin;
    let hi = (2.0 * grid.half_width() / 3.0).min(2.0 * t * w.kgrid.band_limit());
    if !(t > 0.0) || hi <= lo {
        return Err(Error::Precondition(format!("empty far-field region at t = {t}")));
    }
    let pref = 1.0 / Complex64::new(0.0, -2.0 * t).sqrt();
    let mut err: f64 = 0.0;
    let mut sup: f64 = 0.0;
    for j in 0..grid.len() {
        let x = grid.x(j);
        if x.abs() < lo || x.abs() > hi {
            continue;
        }
        let k = convention.map_sign * x / (2.0 * t);
        let wk = interpolate(w, k);
        let log_phase = if nonlinear { -0.5 * wk.norm_sqr() * t.ln() } else { 0.0 };
        let f = pref * Complex64::from_polar(1.0, convention.phase_sign * x * x / (4.0 * t) + log_phase) * wk;
        let v = eta.values()[j];
        err = err.max((v - f).norm());
        sup = sup.max(v.norm());
    }
    Ok(FarFieldReport {
        t,
        convention,
        region: (lo, hi),
        sup_error: err,
        sup_eta: sup,
        relative: if sup > 0.0 { err / sup } else { 0.0 },
        scaled_error: err * t.sqrt(),
    })
}

/// Evaluates every candidate convention on the linear evolution of `h` and
/// returns them sorted by relative error, best first.
pub fn resolve_convention(
    h: &ComplexField,
    t: f64,
    alpha: f64,
    dec: &SpectralDecomposition,
) -> Result<Vec<FarFieldReport>> {
    let profile = compute_profile(h, 0.0, dec)?;
    let eta = crate::spectral::linear_propagator(&dec.project_continuous(h), t, dec)?;
    let mut out = FarFieldConvention::CANDIDATES
        .iter()
        .map(|c| far_field_check(&eta, &profile, t, *c, alpha, false))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.relative.total_cmp(&b.relative));
    Ok(out)
}

/// Time-frequency split of uniformly sampled fields.
#[derive(Debug, Clone)]
pub struct TimeFrequencySplit {
    pub times: Vec<f64>,
    pub low: Vec<ComplexField>,
    pub high: Vec<ComplexField>,
    /// Window values at each time.
    pub window: Vec<f64>,
}

/// Tukey window with the given taper fraction.
pub fn tukey(n: usize, taper: f64) -> Vec<f64> {
    if n < 2 {
        return vec![1.0; n];
    }
    let width = taper * (n - 1) as f64 / 2.0;
    (0..n)
        .map(|i| {
            let d = (i as f64).min((n - 1 - i) as f64);
            if width <= 0.0 || d >= width {
                1.0
            } else {
                0.5 * (1.0 - (std::f64::consts::PI * d / width).cos())
            }
        })
        .collect()
}

/// Splits `u(t)` by `φ₁(τ)`/`φ₂(τ)` in the time-frequency variable. The time
/// mean is removed before windowing and assigned to the low part, so
/// `low + high = u` wherever the window equals one.
pub fn time_frequency_split(times: &[f64], fields: &[&ComplexField], cutoff: f64) -> Result<TimeFrequencySplit> {
    let nt = times.len();
    if nt < 4 {
        return Err(Error::invalid("time-frequency split needs at least 4 samples"));
    }
    let dt = times[1] - times[0];
    if times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0))
    {
        return Err(Error::invalid("time-frequency split needs uniform sampling"));
    }
    let grid = *fields[0].grid();
    let n = grid.len();
    let window = tukey(nt, TUKEY_TAPER);
    let tau: Vec<f64> = (0..nt)
        .map(|m| {
            let mm = if m <= nt / 2 { m as f64 } else { m as f64 - nt as f64 };
            2.0 * std::f64::consts::PI * mm / (nt as f64 * dt)
        })
        .collect();
    let phi1: Vec<f64> = tau.iter().map(|t| low_cutoff(*t, cutoff)).collect();
    let columns: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let series: Vec<Complex64> = fields.iter().map(|f| f.values()[j]).collect();
            let mean = series.iter().sum::<Complex64>() / nt as f64;
            let windowed: Vec<Complex64> = series.iter().zip(&window).map(|(v, w)| (v - mean) * w).collect();
            let spec = fft(&windowed);
            let lo: Vec<Complex64> = spec.iter().zip(&phi1).map(|(s, p)| s * p).collect();
            let hi: Vec<Complex64> = spec.iter().zip(&phi1).map(|(s, p)| s * (1.0 - p)).collect();
            let lo = ifft(&lo).into_iter().map(|v| v + mean).collect();
            (lo, ifft(&hi))
        })
        .collect();
    let assemble = |pick: &dyn Fn(&(Vec<Complex64>, Vec<Complex64>)) -> &Vec<Complex64>| -> Vec<ComplexField> {
        (0..nt)
            .map(|i| ComplexField::from_vec_unchecked(grid, columns.iter().map(|c| pick(c)[i]).collect()))
            .collect()
    };
    Ok(TimeFrequencySplit {
        times: times.to_vec(),
        low: assemble(&|c| &c.0),
        high: assemble(&|c| &c.1),
        window,
    })
}

/// The two bootstrap functionals evaluated on a split trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootNorms {
    pub horizon: f64,
    /// `‖⟨x⟩^{-2} t(-2iE∂_t + ∂_t²)u_L‖_{L∞_x L²_t}`.
    pub boot3: f64,
    /// `‖⟨x⟩^{-2} ∂ₓ^j t u_H‖_{L∞_x L²_t}`, `j = 0, 1`.
    pub boot4: [f64; 2],
}

impl TimeFrequencySplit {
    /// Time derivatives are taken spectrally on the low part.
    pub fn boot_norms(&self, energy: f64) -> BootNorms {
        let nt = self.times.len();
        let dt = self.times[1] - self.times[0];
        let grid = *self.low[0].grid();
        let n = grid.len();
        let tau: Vec<f64> = (0..nt)
            .map(|m| {
                let mm = if m <= nt / 2 { m as f64 } else { m as f64 - nt as f64 };
                2.0 * std::f64::consts::PI * mm / (nt as f64 * dt)
            })
            .collect();
        let cols: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let s: Vec<Complex64> = self.low.iter().map(|f| f.values()[j]).collect();
                let spec = fft(&s);
                let d: Vec<Complex64> = spec
                    .iter()
                    .zip(&tau)
                    .map(|(v, t)| v * (2.0 * energy * t - t * t))
                    .collect();
                ifft(&d)
            })
            .collect();
        let op: Vec<ComplexField> = (0..nt)
            .map(|i| ComplexField::from_vec_unchecked(grid, cols.iter().map(|c| c[i]).collect()))
            .collect();
        let dh: Vec<ComplexField> = self.high.iter().map(|f| spectral_derivative(f, 1)).collect();
        BootNorms {
            horizon: *self.times.last().unwrap(),
            boot3: weighted_time_norm(&self.times, &op),
            boot4: [
                weighted_time_norm(&self.times, &self.high),
                weighted_time_norm(&self.times, &dh),
            ],
        }
    }
}
