//! Generalized local Morrey norms and local Campanato norms, with the
//! supremum over radii discretized on log-spaced grids.

use crate::anisotropy::AnisotropicStructure;
use crate::error::{Error, Result};
use crate::field::{lp_norm_profile, ScalarField};
use crate::polar::{PolarQuad, QuadConfig};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// A positive radial weight `r -> phi(x0, r)` for a fixed center.
#[derive(Clone)]
pub enum RadialWeight {
    /// `phi(r) = r^((lambda - gamma) / p)`, the power-weight family that
    /// recovers the classical local Morrey scale.
    Power { lambda: f64, p: f64, gamma: f64 },
    /// Constant weight.
    Constant { value: f64 },
    /// Arbitrary positive function.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for RadialWeight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RadialWeight::Power { lambda, p, gamma } => {
                write!(f, "Power(lambda={lambda}, p={p}, gamma={gamma})")
            }
            RadialWeight::Constant { value } => write!(f, "Constant({value})"),
            RadialWeight::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl RadialWeight {
    pub fn power(lambda: f64, p: f64, gamma: f64) -> Result<Self> {
        if !(p >= 1.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!(
                "power weight needs p >= 1 and finite lambda, got p={p}, lambda={lambda}"
            )));
        }
        Ok(RadialWeight::Power { lambda, p, gamma })
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RadialWeight::Power { lambda, p, gamma } => r.powf((lambda - gamma) / p),
            RadialWeight::Constant { value } => *value,
            RadialWeight::Custom(f) => f(r),
        }
    }

    /// The exponent `e` with `phi(r) * r^(gamma/p_norm) = r^e`, when the
    /// weight is a power; used for exact tail arithmetic.
    pub fn as_power(&self) -> Option<(f64, f64)> {
        match self {
            RadialWeight::Power { lambda, p, gamma } => Some(((lambda - gamma) / p, 1.0)),
            _ => None,
        }
    }

    /// Power-law exponent of the weight itself, if it is one.
    pub fn power_exponent(&self) -> Option<f64> {
        match self {
            RadialWeight::Power { lambda, p, gamma } => Some((lambda - gamma) / p),
            RadialWeight::Constant { .. } => Some(0.0),
            RadialWeight::Custom(_) => None,
        }
    }

    pub fn scaled(self, c: f64) -> Self {
        let inner = self;
        RadialWeight::Custom(Arc::new(move |r| c * inner.eval(r)))
    }
}

/// JSON form of a weight.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum WeightSpec {
    Power { lambda: f64, p: f64 },
    Custom(CustomWeightSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum CustomWeightSpec {
    Constant { value: f64 },
}

impl WeightSpec {
    pub fn build(&self, gamma: f64) -> Result<RadialWeight> {
        match self {
            WeightSpec::Power { lambda, p } => RadialWeight::power(*lambda, *p, gamma),
            WeightSpec::Custom(CustomWeightSpec::Constant { value }) => {
                if !(*value > 0.0) {
                    return Err(Error::invalid("constant weight must be positive"));
                }
                Ok(RadialWeight::Constant { value: *value })
            }
        }
    }
}

/// Log-spaced radius grid discretizing `sup_{r > 0}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RadiusGrid {
    pub r_min: f64,
    pub r_max: f64,
    #[serde(rename = "ppd")]
    pub points_per_decade: usize,
}

impl RadiusGrid {
    pub fn new(r_min: f64, r_max: f64, points_per_decade: usize) -> Result<Self> {
        let g = RadiusGrid {
            r_min,
            r_max,
            points_per_decade,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0) || !(self.r_max > self.r_min) || self.points_per_decade == 0 {
            return Err(Error::invalid(format!(
                "invalid radius grid: r_min={}, r_max={}, ppd={}",
                self.r_min, self.r_max, self.points_per_decade
            )));
        }
        Ok(())
    }

    /// The grid radii, strictly increasing, endpoints included.
    pub fn values(&self) -> Vec<f64> {
        let decades = (self.r_max / self.r_min).log10();
        let n = (decades * self.points_per_decade as f64).ceil() as usize;
        let mut out: Vec<f64> = (0..=n)
            .map(|k| self.r_min * 10f64.powf(k as f64 / self.points_per_decade as f64))
            .take_while(|&r| r < self.r_max * (1.0 - 1e-12))
            .collect();
        out.push(self.r_max);
        out
    }

    /// Same span, twice the density.
    pub fn refined(self) -> Self {
        RadiusGrid {
            points_per_decade: self.points_per_decade * 2,
            ..self
        }
    }
}

/// Generalized local Morrey norm on the grid:
/// `max_r phi(r)^-1 |E(x0, r)|^(-1/p) ||f||_{L_p(E(x0, r))}`.
///
/// A lower bound of the true supremum, monotone under grid refinement.
pub fn morrey_norm(
    structure: &AnisotropicStructure,
    f: &ScalarField,
    p: f64,
    weight: &RadialWeight,
    x0: &[f64],
    grid: &RadiusGrid,
    cfg: QuadConfig,
) -> Result<f64> {
    grid.validate()?;
    let radii = grid.values();
    let norms = lp_norm_profile(structure, f, p, x0, &radii, cfg)?;
    Ok(morrey_from_profile(structure, p, weight, &radii, &norms))
}

/// Assemble the Morrey quantity from a precomputed norm profile.
pub fn morrey_from_profile(
    structure: &AnisotropicStructure,
    p: f64,
    weight: &RadialWeight,
    radii: &[f64],
    norms: &[f64],
) -> f64 {
    let upsilon = structure.unit_measure();
    let gamma = structure.gamma();
    radii
        .iter()
        .zip(norms)
        .map(|(&r, &nrm)| (upsilon * r.powf(gamma)).powf(-1.0 / p) * nrm / weight.eval(r))
        .fold(0.0, f64::max)
}

/// Mean of `b` over `E(x0, r)`.
pub fn ellipsoid_mean(
    structure: &AnisotropicStructure,
    b: &ScalarField,
    x0: &[f64],
    r: f64,
    cfg: QuadConfig,
) -> Result<f64> {
    let total = crate::field::integrate_ellipsoid(structure, b, x0, r, cfg)?;
    Ok(total / structure.ellipsoid_volume(r)?)
}

/// `(|E|^-(1 + lambda p) int_E |b - c|^p)^(1/p)` for one ellipsoid, with `c`
/// a given reference value (the mean at possibly another radius).
pub fn oscillation_about(
    structure: &AnisotropicStructure,
    b: &ScalarField,
    p: f64,
    lambda: f64,
    x0: &[f64],
    r: f64,
    reference: f64,
    cfg: QuadConfig,
) -> Result<f64> {
    if !(1.0..f64::INFINITY).contains(&p) {
        return Err(Error::invalid(format!("need p in [1, inf), got {p}")));
    }
    let quad = PolarQuad::new(structure, cfg);
    let graded = b.singular_at(structure, x0);
    let (breaks, hints) = b.edge_info(structure, x0);
    let run = |q: &PolarQuad| {
        q.integrate_shell(
            x0,
            0.0,
            r,
            graded,
            &breaks,
            &hints,
            |_| 1.0,
            |_, y| (b.eval(structure, y) - reference).abs().powf(p),
        )
    };
    let coarse = run(&quad);
    let quad_fine = PolarQuad::new(structure, cfg.refined());
    let fine = run(&quad_fine);
    if !crate::polar::refinement_converged(coarse.value, fine.value, fine.abs_mass, 1e-5) {
        return Err(Error::Accuracy {
            context: format!("oscillation integral at r = {r}"),
            coarse: coarse.value,
            fine: fine.value,
        });
    }
    let volume = structure.ellipsoid_volume(r)?;
    Ok((volume.powf(-(1.0 + lambda * p)) * fine.value).powf(1.0 / p))
}

/// Local Campanato norm on the grid:
/// `max_r (|E(x0,r)|^-(1+lambda p) int_{E(x0,r)} |b - b_{E(x0,r)}|^p)^(1/p)`.
pub fn campanato_norm(
    structure: &AnisotropicStructure,
    b: &ScalarField,
    p: f64,
    lambda: f64,
    x0: &[f64],
    grid: &RadiusGrid,
    cfg: QuadConfig,
) -> Result<f64> {
    if !(0.0..1.0 / structure.gamma()).contains(&lambda) {
        return Err(Error::invalid(format!(
            "campanato index must lie in [0, 1/gamma = {}), got {lambda}",
            1.0 / structure.gamma()
        )));
    }
    grid.validate()?;
    let mut best = 0.0f64;
    for r in grid.values() {
        let mean = ellipsoid_mean(structure, b, x0, r, cfg)?;
        let osc = oscillation_about(structure, b, p, lambda, x0, r, mean, cfg)?;
        best = best.max(osc);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parab2() -> AnisotropicStructure {
        AnisotropicStructure::new(vec![1.0, 2.0]).unwrap()
    }

    fn grid() -> RadiusGrid {
        RadiusGrid::new(1e-2, 1e2, 8).unwrap()
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let s = parab2();
        let f = ScalarField::bump(vec![0.0, 0.0], 1.0).unwrap().scaled(0.0);
        let w = RadialWeight::power(0.0, 2.0, s.gamma()).unwrap();
        let v = morrey_norm(&s, &f, 2.0, &w, &[0.0, 0.0], &grid(), QuadConfig::coarse()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn indicator_morrey_norm_peaks_at_support_radius() {
        // phi = power(lambda, p): value(r) = r^(-lambda/p) min(r, R)^(gamma/p),
        // maximized at r = R with value R^((gamma - lambda)/p).
        let s = parab2();
        let (lambda, p, big_r) = (1.0, 2.0, 1.0);
        let f = ScalarField::indicator_ellipsoid(vec![0.0, 0.0], big_r).unwrap();
        let w = RadialWeight::power(lambda, p, s.gamma()).unwrap();
        let v = morrey_norm(&s, &f, p, &w, &[0.0, 0.0], &grid(), QuadConfig::medium()).unwrap();
        let expected = big_r.powf((s.gamma() - lambda) / p);
        assert!((v - expected).abs() < 2e-3 * expected, "{v} vs {expected}");
    }

    #[test]
    fn morrey_norm_is_homogeneous() {
        let s = parab2();
        let f = ScalarField::bump(vec![0.0, 0.0], 1.0).unwrap();
        let w = RadialWeight::power(0.5, 2.0, s.gamma()).unwrap();
        let a = morrey_norm(&s, &f, 2.0, &w, &[0.0, 0.0], &grid(), QuadConfig::coarse()).unwrap();
        let b = morrey_norm(
            &s,
            &f.clone().scaled(-3.0),
            2.0,
            &w,
            &[0.0, 0.0],
            &grid(),
            QuadConfig::coarse(),
        )
        .unwrap();
        assert!((b - 3.0 * a).abs() < 1e-12 * b.max(1.0));
    }

    #[test]
    fn mean_examples() {
        let s = parab2();
        let c = ScalarField::constant(7.5, 2);
        let m = ellipsoid_mean(&s, &c, &[0.3, 0.1], 2.0, QuadConfig::coarse()).unwrap();
        assert!((m - 7.5).abs() < 1e-10);
        let coord = ScalarField::coordinate(1, vec![0.0, 0.0]).unwrap();
        let m = ellipsoid_mean(&s, &coord, &[0.0, 0.0], 1.5, QuadConfig::coarse()).unwrap();
        assert!(m.abs() < 1e-12);
        let rp = ScalarField::rho_power(vec![0.0, 0.0], 1.0).unwrap();
        let m = ellipsoid_mean(&s, &rp, &[0.0, 0.0], 1.0, QuadConfig::medium()).unwrap();
        assert!((m - 0.75).abs() < 1e-6, "got {m}");
    }

    #[test]
    fn constant_symbol_has_zero_campanato_norm() {
        let s = parab2();
        let b = ScalarField::constant(3.0, 2);
        let v = campanato_norm(&s, &b, 2.0, 0.0, &[0.0, 0.0], &grid(), QuadConfig::coarse()).unwrap();
        assert!(v < 1e-10, "got {v}");
    }

    #[test]
    fn log_symbol_is_bounded_oscillation() {
        // The grid max is stable as the grid widens: the discrete analogue of
        // ln rho having finite Campanato norm.
        let s = parab2();
        let b = ScalarField::log_rho(vec![0.0, 0.0]);
        let narrow = RadiusGrid::new(1e-2, 1e2, 8).unwrap();
        let wide = RadiusGrid::new(1e-3, 1e3, 8).unwrap();
        let v1 = campanato_norm(&s, &b, 2.0, 0.0, &[0.0, 0.0], &narrow, QuadConfig::medium()).unwrap();
        let v2 = campanato_norm(&s, &b, 2.0, 0.0, &[0.0, 0.0], &wide, QuadConfig::medium()).unwrap();
        assert!(v1.is_finite() && v2.is_finite());
        assert!((v2 - v1).abs() <= 0.02 * v1, "{v1} vs {v2}");
    }

    #[test]
    fn scaling_symbol_has_flat_profile() {
        // b = rho^(gamma lambda): the per-radius quantity is r-independent,
        // so widening the grid cannot grow the max.
        let s = parab2();
        let lambda = 0.1;
        let beta = s.gamma() * lambda;
        let b = ScalarField::rho_power(vec![0.0, 0.0], beta).unwrap();
        let v1 = campanato_norm(&s, &b, 2.0, lambda, &[0.0, 0.0], &grid(), QuadConfig::medium()).unwrap();
        assert!(v1.is_finite() && v1 > 0.0);
        let r_small = oscillation_about(
            &s,
            &b,
            2.0,
            lambda,
            &[0.0, 0.0],
            0.1,
            ellipsoid_mean(&s, &b, &[0.0, 0.0], 0.1, QuadConfig::medium()).unwrap(),
            QuadConfig::medium(),
        )
        .unwrap();
        let r_large = oscillation_about(
            &s,
            &b,
            2.0,
            lambda,
            &[0.0, 0.0],
            10.0,
            ellipsoid_mean(&s, &b, &[0.0, 0.0], 10.0, QuadConfig::medium()).unwrap(),
            QuadConfig::medium(),
        )
        .unwrap();
        assert!((r_small - r_large).abs() < 1e-3 * r_small, "{r_small} vs {r_large}");
    }

    #[test]
    fn campanato_rejects_bad_lambda() {
        let s = parab2();
        let b = ScalarField::log_rho(vec![0.0, 0.0]);
        assert!(campanato_norm(&s, &b, 2.0, 0.5, &[0.0, 0.0], &grid(), QuadConfig::coarse()).is_err());
    }

    #[test]
    fn grid_refinement_is_monotone() {
        let s = parab2();
        let f = ScalarField::bump(vec![0.4, 0.0], 1.0).unwrap();
        let w = RadialWeight::power(0.3, 2.0, s.gamma()).unwrap();
        let g = RadiusGrid::new(0.05, 20.0, 4).unwrap();
        let coarse = morrey_norm(&s, &f, 2.0, &w, &[0.0, 0.0], &g, QuadConfig::medium()).unwrap();
        let fine = morrey_norm(&s, &f, 2.0, &w, &[0.0, 0.0], &g.refined(), QuadConfig::medium()).unwrap();
        assert!(fine >= coarse * (1.0 - 1e-9), "{coarse} vs {fine}");
    }

    #[test]
    fn weight_spec_json() {
        let w: WeightSpec = serde_json::from_str(r#"{"power":{"lambda":0.0,"p":2.0}}"#).unwrap();
        assert_eq!(
            w,
            WeightSpec::Power {
                lambda: 0.0,
                p: 2.0
            }
        );
        let w: WeightSpec =
            serde_json::from_str(r#"{"custom":{"name":"constant","value":2.0}}"#).unwrap();
        let built = w.build(3.0).unwrap();
        assert_eq!(built.eval(5.0), 2.0);
        let g: RadiusGrid = serde_json::from_str(r#"{"r_min":0.01,"r_max":10.0,"ppd":16}"#).unwrap();
        assert_eq!(g.points_per_decade, 16);
    }
}
