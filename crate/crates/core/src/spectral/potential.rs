use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// Fraction of the box (on each side) that must be free of potential.
pub const DECAY_REGION_FRACTION: f64 = 0.1;
/// Largest admissible `|V|` inside the decay region.
pub const DECAY_TOLERANCE: f64 = 1e-12;
/// Values below this (relative to `max |V|`) are treated as outside the support.
const SUPPORT_TOLERANCE: f64 = 1e-18;

/// Analytic families plus tabulated samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PotentialFamily {
    /// `-V0 exp(-x^2 / (2 sigma^2))`.
    GaussianWell { depth: f64, width: f64 },
    /// `-V0 sech^2(x / sigma)`.
    Sech2 { depth: f64, width: f64 },
    /// Repulsive `+V0 exp(-x^2 / (2 sigma^2))`.
    Bump { depth: f64, width: f64 },
    /// Samples on the grid; evaluated off-grid by local cubic interpolation.
    Tabulated { values: Vec<f64> },
}

impl PotentialFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            PotentialFamily::GaussianWell { .. } => "gaussian_well",
            PotentialFamily::Sech2 { .. } => "sech2",
            PotentialFamily::Bump { .. } => "bump",
            PotentialFamily::Tabulated { .. } => "tabulated",
        }
    }

    /// Default parameters for a named preset.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "gaussian_well" => Ok(PotentialFamily::GaussianWell { depth: 1.0, width: 1.0 }),
            "sech2" => Ok(PotentialFamily::Sech2 { depth: 2.0, width: 1.0 }),
            "bump" => Ok(PotentialFamily::Bump { depth: 1.0, width: 1.0 }),
            other => Err(Error::invalid(format!("unknown potential preset `{other}`"))),
        }
    }

    pub fn with_params(name: &str, depth: f64, width: f64) -> Result<Self> {
        if !(depth > 0.0 && width > 0.0) {
            return Err(Error::invalid(format!(
                "depth and width must be positive, got {depth}, {width}"
            )));
        }
        match name {
            "gaussian_well" => Ok(PotentialFamily::GaussianWell { depth, width }),
            "sech2" => Ok(PotentialFamily::Sech2 { depth, width }),
            "bump" => Ok(PotentialFamily::Bump { depth, width }),
            other => Err(Error::invalid(format!("unknown potential preset `{other}`"))),
        }
    }
}

/// Real potential sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    family: PotentialFamily,
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl Potential {
    pub fn new(family: PotentialFamily, grid: SpatialGrid) -> Result<Self> {
        if let PotentialFamily::Tabulated { values } = &family {
            if values.len() != grid.len() {
                return Err(Error::invalid(format!(
                    "tabulated potential has {} samples, grid has {}",
                    values.len(),
                    grid.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("tabulated potential is not finite"));
            }
        }
        let mut pot = Self {
            family,
            grid,
            values: Vec::new(),
        };
        pot.values = match &pot.family {
            PotentialFamily::Tabulated { values } => values.clone(),
            _ => (0..grid.len()).map(|j| pot.eval(grid.x(j))).collect(),
        };
        Ok(pot)
    }

    pub fn preset(name: &str, grid: SpatialGrid) -> Result<Self> {
        Self::new(PotentialFamily::preset(name)?, grid)
    }

    /// `V ≡ 0` on the grid.
    pub fn zero(grid: SpatialGrid) -> Self {
        Self {
            family: PotentialFamily::Tabulated {
                values: vec![0.0; grid.len()],
            },
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn family(&self) -> &PotentialFamily {
        &self.family
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Evaluates the potential at an arbitrary point.
    pub fn eval(&self, x: f64) -> f64 {
        match &self.family {
            PotentialFamily::GaussianWell { depth, width } => -depth * (-x * x / (2.0 * width * width)).exp(),
            PotentialFamily::Bump { depth, width } => depth * (-x * x / (2.0 * width * width)).exp(),
            PotentialFamily::Sech2 { depth, width } => {
                let c = (x / width).cosh();
                if c.is_infinite() {
                    0.0
                } else {
                    -depth / (c * c)
                }
            }
            PotentialFamily::Tabulated { values } => self.interpolate(values, x),
        }
    }

    fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let n = values.len();
        let h = self.grid.spacing();
        let s = (x + self.grid.half_width()) / h;
        if s <= 0.0 || s >= (n - 1) as f64 {
            let j = if s <= 0.0 { 0 } else { n - 1 };
            return values[j];
        }
        let j = (s.floor() as usize).clamp(1, n - 3);
        let t = s - j as f64;
        let (p0, p1, p2, p3) = (values[j - 1], values[j], values[j + 1], values[j + 2]);
        // Cubic Lagrange through nodes j-1..j+2.
        let l0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let l1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let l2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let l3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        p0 * l0 + p1 * l1 + p2 * l2 + p3 * l3
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self.family, PotentialFamily::Tabulated { .. })
    }

    /// Checks `|V| < 1e-12` on the outer 10% of the box.
    pub fn check_decayed(&self) -> Result<()> {
        let worst = self
            .grid
            .outer_indices(DECAY_REGION_FRACTION)
            .map(|j| self.values[j].abs())
            .fold(0.0, f64::max);
        if worst >= DECAY_TOLERANCE {
            return Err(Error::Precondition(format!(
                "potential has not decayed at the boundary: max |V| = {worst:.3e} on the outer {}%",
                DECAY_REGION_FRACTION * 100.0
            )));
        }
        Ok(())
    }

    /// Node-aligned interval `[j_lo, j_hi]` outside which the potential is
    /// negligible, or `None` for `V ≡ 0`.
    pub fn support_nodes(&self) -> Option<(usize, usize)> {
        let vmax = self.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if vmax == 0.0 {
            return None;
        }
        let thr = vmax * SUPPORT_TOLERANCE;
        let lo = self.values.iter().position(|v| v.abs() > thr)?;
        let hi = self.values.iter().rposition(|v| v.abs() > thr)?;
        Some((lo.saturating_sub(1), (hi + 1).min(self.grid.len() - 1)))
    }

    /// `∫ |V| dx`.
    pub fn l1_norm(&self) -> f64 {
        self.grid.spacing() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// `W_+^s(x) = ∫_x^∞ <y>^s |V(y)| dy` at every node (right-to-left cumulative sum).
    pub fn tail_weight_plus(&self, s: f64) -> Vec<f64> {
        let n = self.grid.len();
        let h = self.grid.spacing();
        let mut out = vec![0.0; n];
        let mut acc = 0.0;
        for j in (0..n).rev() {
            let x = self.grid.x(j);
            acc += h * (1.0 + x * x).powf(0.5 * s) * self.values[j].abs();
            out[j] = acc;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_decay_on_large_boxes() {
        let grid = SpatialGrid::new(40.0, 512).unwrap();
        for name in ["gaussian_well", "sech2", "bump"] {
            let v = Potential::preset(name, grid).unwrap();
            v.check_decayed().unwrap();
        }
    }

    #[test]
    fn undecayed_potential_is_rejected() {
        let grid = SpatialGrid::new(5.0, 128).unwrap();
        let v = Potential::preset("sech2", grid).unwrap();
        assert!(matches!(v.check_decayed(), Err(Error::Precondition(_))));
    }

    #[test]
    fn signs_follow_family() {
        let grid = SpatialGrid::new(20.0, 256).unwrap();
        assert!(Potential::preset("gaussian_well", grid).unwrap().eval(0.0) < 0.0);
        assert!(Potential::preset("bump", grid).unwrap().eval(0.0) > 0.0);
        assert_eq!(Potential::preset("sech2", grid).unwrap().eval(0.0), -2.0);
        assert!(Potential::preset("nope", grid).is_err());
    }

    #[test]
    fn tabulated_interpolation_matches_smooth_source() {
        let grid = SpatialGrid::new(20.0, 512).unwrap();
        let g = Potential::preset("gaussian_well", grid).unwrap();
        let t = Potential::new(
            PotentialFamily::Tabulated {
                values: g.values().to_vec(),
            },
            grid,
        )
        .unwrap();
        for &x in &[-1.23, 0.011, 0.5, 2.2] {
            assert!((t.eval(x) - g.eval(x)).abs() < 1e-4);
        }
        assert!(!t.is_analytic());
    }

    #[test]
    fn support_is_bracketed() {
        let grid = SpatialGrid::new(40.0, 1024).unwrap();
        let v = Potential::preset("gaussian_well", grid).unwrap();
        let (lo, hi) = v.support_nodes().unwrap();
        assert!(grid.x(lo) < -8.0 && grid.x(lo) > -12.0);
        assert!(grid.x(hi) > 8.0 && grid.x(hi) < 12.0);
        assert!(Potential::zero(grid).support_nodes().is_none());
    }
}
