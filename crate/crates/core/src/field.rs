//! Scalar fields (the densities and commutator symbols) and their quadrature
//! over ellipsoids in polar coordinates.

use crate::anisotropy::AnisotropicStructure;
use crate::error::{Error, Result};
use crate::polar::{refinement_converged, EllipsoidHint, PolarQuad, QuadConfig};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Regularity hint used to pick quadrature grading and to gate principal
/// values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    Indicator,
    Lipschitz,
    Smooth,
    LogSingular,
}

#[derive(Clone)]
enum FieldKind {
    Constant,
    /// Characteristic function of E(center, r).
    IndicatorEllipsoid { r: f64 },
    /// Smooth bump: `exp(1 - 1/(1 - u^2))` with `u = rho/r`, vanishing at the
    /// boundary.
    Bump { r: f64 },
    /// `ln rho(x - center)`.
    LogRho,
    /// `rho(x - center)^beta`.
    RhoPower { beta: f64 },
    /// `(x - center)_i`, 0-based.
    Coordinate { i: usize },
    Custom(Arc<dyn Fn(&AnisotropicStructure, &[f64]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for FieldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FieldKind::Constant => write!(f, "Constant"),
            FieldKind::IndicatorEllipsoid { r } => write!(f, "IndicatorEllipsoid(r={r})"),
            FieldKind::Bump { r } => write!(f, "Bump(r={r})"),
            FieldKind::LogRho => write!(f, "LogRho"),
            FieldKind::RhoPower { beta } => write!(f, "RhoPower(beta={beta})"),
            FieldKind::Coordinate { i } => write!(f, "Coordinate({i})"),
            FieldKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A real-valued function on R^n with declared support and regularity.
#[derive(Debug, Clone)]
pub struct ScalarField {
    kind: FieldKind,
    center: Vec<f64>,
    amplitude: f64,
    support_radius: f64,
    smoothness: Smoothness,
    /// Extra ellipsoid edges the field jumps across (restrictions).
    extra_edges: Vec<(Vec<f64>, f64)>,
}

impl ScalarField {
    pub fn constant(c: f64, dim: usize) -> Self {
        ScalarField {
            kind: FieldKind::Constant,
            center: vec![0.0; dim],
            amplitude: c,
            support_radius: f64::INFINITY,
            smoothness: Smoothness::Smooth,
            extra_edges: Vec::new(),
        }
    }

    pub fn indicator_ellipsoid(center: Vec<f64>, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::invalid(format!("indicator radius must be > 0, got {r}")));
        }
        Ok(ScalarField {
            kind: FieldKind::IndicatorEllipsoid { r },
            center,
            amplitude: 1.0,
            support_radius: r,
            smoothness: Smoothness::Indicator,
            extra_edges: Vec::new(),
        })
    }

    pub fn bump(center: Vec<f64>, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::invalid(format!("bump radius must be > 0, got {r}")));
        }
        Ok(ScalarField {
            kind: FieldKind::Bump { r },
            center,
            amplitude: 1.0,
            support_radius: r,
            smoothness: Smoothness::Smooth,
            extra_edges: Vec::new(),
        })
    }

    pub fn log_rho(center: Vec<f64>) -> Self {
        ScalarField {
            kind: FieldKind::LogRho,
            center,
            amplitude: 1.0,
            support_radius: f64::INFINITY,
            smoothness: Smoothness::LogSingular,
            extra_edges: Vec::new(),
        }
    }

    pub fn rho_power(center: Vec<f64>, beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::invalid("rho power exponent must be finite"));
        }
        let smoothness = if beta >= 1.0 {
            Smoothness::Lipschitz
        } else {
            Smoothness::LogSingular
        };
        Ok(ScalarField {
            kind: FieldKind::RhoPower { beta },
            center,
            amplitude: 1.0,
            support_radius: f64::INFINITY,
            smoothness,
            extra_edges: Vec::new(),
        })
    }

    /// Coordinate field `(x - center)_i` with a 1-based index.
    pub fn coordinate(i: usize, center: Vec<f64>) -> Result<Self> {
        if i == 0 || i > center.len() {
            return Err(Error::invalid(format!(
                "coordinate index {i} out of range 1..={}",
                center.len()
            )));
        }
        Ok(ScalarField {
            kind: FieldKind::Coordinate { i: i - 1 },
            center,
            amplitude: 1.0,
            support_radius: f64::INFINITY,
            smoothness: Smoothness::Smooth,
            extra_edges: Vec::new(),
        })
    }

    pub fn custom<F>(
        f: F,
        center: Vec<f64>,
        support_radius: f64,
        smoothness: Smoothness,
    ) -> Self
    where
        F: Fn(&AnisotropicStructure, &[f64]) -> f64 + Send + Sync + 'static,
    {
        ScalarField {
            kind: FieldKind::Custom(Arc::new(f)),
            center,
            amplitude: 1.0,
            support_radius,
            smoothness,
            extra_edges: Vec::new(),
        }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    /// Multiply by a constant.
    pub fn scaled(mut self, c: f64) -> Self {
        self.amplitude *= c;
        self
    }

    /// Translate by `z` (the center moves to center + z).
    pub fn translated(mut self, z: &[f64]) -> Self {
        for (ci, zi) in self.center.iter_mut().zip(z) {
            *ci += zi;
        }
        for (c, _) in &mut self.extra_edges {
            for (ci, zi) in c.iter_mut().zip(z) {
                *ci += zi;
            }
        }
        self
    }

    /// Declare an ellipsoid edge the values jump across (used by restricted
    /// fields so quadratures split panels there).
    pub fn with_extra_edge(mut self, center: Vec<f64>, radius: f64) -> Self {
        self.extra_edges.push((center, radius));
        self
    }

    /// True for the symbol builtins with known Campanato behavior.
    pub fn is_campanato_builtin(&self) -> bool {
        matches!(self.kind, FieldKind::LogRho | FieldKind::RhoPower { .. })
    }

    pub fn eval(&self, structure: &AnisotropicStructure, x: &[f64]) -> f64 {
        let a = self.amplitude;
        match &self.kind {
            FieldKind::Constant => a,
            FieldKind::IndicatorEllipsoid { r } => {
                if self.rho_to_center(structure, x) < *r {
                    a
                } else {
                    0.0
                }
            }
            FieldKind::Bump { r } => {
                let u = self.rho_to_center(structure, x) / r;
                if u < 1.0 {
                    a * (1.0 - 1.0 / (1.0 - u * u)).exp()
                } else {
                    0.0
                }
            }
            FieldKind::LogRho => a * self.rho_to_center(structure, x).ln(),
            FieldKind::RhoPower { beta } => a * self.rho_to_center(structure, x).powf(*beta),
            FieldKind::Coordinate { i } => a * (x[*i] - self.center[*i]),
            FieldKind::Custom(f) => {
                let d: Vec<f64> = x.iter().zip(&self.center).map(|(xi, ci)| xi - ci).collect();
                a * f(structure, &d)
            }
        }
    }

    fn rho_to_center(&self, structure: &AnisotropicStructure, x: &[f64]) -> f64 {
        let mut d = [0.0; 8];
        let dim = x.len();
        for i in 0..dim {
            d[i] = x[i] - self.center[i];
        }
        structure.rho_raw(&d[..dim])
    }

    /// Whether the field is regular enough near `x` for a product factor
    /// `f(x) - f(y)` to supply cancellation at `y = x` (continuous there and
    /// not separated from its value by a jump or a log pole). `scale` sets
    /// the margin for "at" comparisons.
    pub fn locally_regular_at(
        &self,
        structure: &AnisotropicStructure,
        x: &[f64],
        scale: f64,
    ) -> bool {
        let margin = 1e-9 * scale.max(1e-300);
        match &self.kind {
            FieldKind::Constant | FieldKind::Bump { .. } | FieldKind::Coordinate { .. } => true,
            FieldKind::IndicatorEllipsoid { r } => {
                (self.rho_to_center(structure, x) - r).abs() > margin
            }
            FieldKind::LogRho => self.rho_to_center(structure, x) > margin,
            FieldKind::RhoPower { beta } => {
                *beta >= 1.0 || self.rho_to_center(structure, x) > margin
            }
            FieldKind::Custom(_) => matches!(
                self.smoothness,
                Smoothness::Lipschitz | Smoothness::Smooth
            ),
        }
    }

    /// Hint/break metadata for quadratures centered at `x0`: a common break
    /// radius if the field edge is concentric, otherwise an ellipsoid hint.
    pub(crate) fn edge_info(
        &self,
        structure: &AnisotropicStructure,
        x0: &[f64],
    ) -> (Vec<f64>, Vec<EllipsoidHint>) {
        let mut breaks = Vec::new();
        let mut hints = Vec::new();
        let edge = match &self.kind {
            FieldKind::IndicatorEllipsoid { r } | FieldKind::Bump { r } => Some(*r),
            _ => None,
        };
        if let Some(r) = edge {
            let d = self.rho_to_center(structure, x0);
            if d <= 1e-13 * r {
                breaks.push(r);
            } else {
                hints.push(EllipsoidHint {
                    center: self.center.clone(),
                    radius: r,
                });
            }
        }
        for (c, r) in &self.extra_edges {
            let mut d = [0.0; 8];
            for i in 0..x0.len() {
                d[i] = x0[i] - c[i];
            }
            if structure.rho_raw(&d[..x0.len()]) <= 1e-13 * r {
                breaks.push(*r);
            } else {
                hints.push(EllipsoidHint {
                    center: c.clone(),
                    radius: *r,
                });
            }
        }
        (breaks, hints)
    }

    /// True when the field is singular at the quadrature center `x0`.
    pub(crate) fn singular_at(&self, structure: &AnisotropicStructure, x0: &[f64]) -> bool {
        match &self.kind {
            FieldKind::LogRho => true,
            FieldKind::RhoPower { beta } => *beta < 1.0,
            FieldKind::Custom(_) => self.smoothness == Smoothness::LogSingular,
            _ => false,
        }
        .then(|| self.rho_to_center(structure, x0))
        .map(|d| d < 1e-12)
        .unwrap_or(false)
    }
}

/// Builtin field description as it appears in config files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum FieldSpec {
    Constant {
        c: f64,
    },
    IndicatorEllipsoid {
        #[serde(rename = "R")]
        r: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    Bump {
        #[serde(rename = "R")]
        r: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    LogRho {
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    RhoPower {
        beta: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    Coordinate {
        i: usize,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
}

impl FieldSpec {
    /// Resolve the spec against a dimension; a missing center means the
    /// origin.
    pub fn build(&self, dim: usize) -> Result<ScalarField> {
        let center = |c: &Option<Vec<f64>>| -> Result<Vec<f64>> {
            match c {
                None => Ok(vec![0.0; dim]),
                Some(v) if v.len() == dim => Ok(v.clone()),
                Some(v) => Err(Error::invalid(format!(
                    "field center dimension {} does not match structure dimension {dim}",
                    v.len()
                ))),
            }
        };
        match self {
            FieldSpec::Constant { c } => Ok(ScalarField::constant(*c, dim)),
            FieldSpec::IndicatorEllipsoid { r, center: c } => {
                ScalarField::indicator_ellipsoid(center(c)?, *r)
            }
            FieldSpec::Bump { r, center: c } => ScalarField::bump(center(c)?, *r),
            FieldSpec::LogRho { center: c } => Ok(ScalarField::log_rho(center(c)?)),
            FieldSpec::RhoPower { beta, center: c } => ScalarField::rho_power(center(c)?, *beta),
            FieldSpec::Coordinate { i, center: c } => ScalarField::coordinate(*i, center(c)?),
        }
    }
}

/// Relative tolerance for one refinement step of a field quadrature.
pub const FIELD_QUAD_RTOL: f64 = 1e-5;

fn integrand_setup(
    structure: &AnisotropicStructure,
    field: &ScalarField,
    x0: &[f64],
) -> (Vec<f64>, Vec<EllipsoidHint>, bool) {
    let (breaks, hints) = field.edge_info(structure, x0);
    let graded = field.singular_at(structure, x0);
    (breaks, hints, graded)
}

fn integrate_once(
    structure: &AnisotropicStructure,
    field: &ScalarField,
    power: Option<f64>,
    x0: &[f64],
    r: f64,
    cfg: QuadConfig,
) -> crate::polar::PolarIntegral {
    let quad = PolarQuad::new(structure, cfg);
    let (breaks, hints, graded) = integrand_setup(structure, field, x0);
    quad.integrate_shell(
        x0,
        0.0,
        r,
        graded,
        &breaks,
        &hints,
        |_| 1.0,
        |_, y| match power {
            None => field.eval(structure, y),
            Some(p) => field.eval(structure, y).abs().powf(p),
        },
    )
}

/// `int_{E(x0, r)} f(y) dy` by polar quadrature, with one refinement as the
/// acceptance check.
pub fn integrate_ellipsoid(
    structure: &AnisotropicStructure,
    field: &ScalarField,
    x0: &[f64],
    r: f64,
    cfg: QuadConfig,
) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("radius must be positive, got {r}")));
    }
    if x0.len() != structure.dim() {
        return Err(Error::invalid("center dimension mismatch"));
    }
    let coarse = integrate_once(structure, field, None, x0, r, cfg);
    let fine = integrate_once(structure, field, None, x0, r, cfg.refined());
    if !refinement_converged(coarse.value, fine.value, fine.abs_mass, FIELD_QUAD_RTOL) {
        return Err(Error::Accuracy {
            context: format!("integral over E(x0, {r})"),
            coarse: coarse.value,
            fine: fine.value,
        });
    }
    Ok(fine.value)
}

/// `(int_{E(x0, r)} |f|^p dy)^(1/p)`.
pub fn lp_norm_ellipsoid(
    structure: &AnisotropicStructure,
    field: &ScalarField,
    p: f64,
    x0: &[f64],
    r: f64,
    cfg: QuadConfig,
) -> Result<f64> {
    if !(1.0..f64::INFINITY).contains(&p) {
        return Err(Error::invalid(format!("need p in [1, inf), got {p}")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("radius must be positive, got {r}")));
    }
    let coarse = integrate_once(structure, field, Some(p), x0, r, cfg);
    let fine = integrate_once(structure, field, Some(p), x0, r, cfg.refined());
    if !refinement_converged(coarse.value, fine.value, fine.abs_mass, FIELD_QUAD_RTOL) {
        return Err(Error::Accuracy {
            context: format!("L{p} norm over E(x0, {r})"),
            coarse: coarse.value,
            fine: fine.value,
        });
    }
    Ok(fine.value.max(0.0).powf(1.0 / p))
}

/// `||f||_{L_p(E(x0, r))}` for every radius of an increasing grid, via one
/// cumulative sweep. Monotone nondecreasing by construction.
pub fn lp_norm_profile(
    structure: &AnisotropicStructure,
    field: &ScalarField,
    p: f64,
    x0: &[f64],
    radii: &[f64],
    cfg: QuadConfig,
) -> Result<Vec<f64>> {
    if !(1.0..f64::INFINITY).contains(&p) {
        return Err(Error::invalid(format!("need p in [1, inf), got {p}")));
    }
    if radii.is_empty() || radii[0] <= 0.0 || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("radii must be positive and strictly increasing"));
    }
    let quad = PolarQuad::new(structure, cfg);
    let (breaks, hints, graded) = integrand_setup(structure, field, x0);
    let cum = quad.cumulative_shells(
        x0,
        radii,
        graded,
        &breaks,
        &hints,
        |_| 1.0,
        |_, y| field.eval(structure, y).abs().powf(p),
    );
    Ok(cum
        .iter()
        .map(|pi| pi.value.max(0.0).powf(1.0 / p))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn parab2() -> AnisotropicStructure {
        AnisotropicStructure::new(vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn builtin_values() {
        let s = parab2();
        let c = ScalarField::constant(5.0, 2);
        assert_eq!(c.eval(&s, &[11.0, -2.0]), 5.0);
        let rp = ScalarField::rho_power(vec![0.0, 0.0], 1.0).unwrap();
        let x = s.dilate(2.0, &[1.0, 0.0]).unwrap();
        assert!((rp.eval(&s, &x) - 2.0).abs() < 1e-12);
        let b = ScalarField::bump(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(b.eval(&s, &[1.0, 0.0]), 0.0);
        assert!((b.eval(&s, &[0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!(ScalarField::bump(vec![0.0, 0.0], -1.0).is_err());
        assert!(ScalarField::coordinate(5, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn volume_through_field_integral() {
        let s = parab2();
        let one = ScalarField::constant(1.0, 2);
        let v = integrate_ellipsoid(&s, &one, &[0.0, 0.0], 1.0, QuadConfig::medium()).unwrap();
        assert!((v - PI).abs() < 1e-9);
        let zero = ScalarField::constant(0.0, 2);
        let v0 = integrate_ellipsoid(&s, &zero, &[0.0, 0.0], 1.0, QuadConfig::medium()).unwrap();
        assert_eq!(v0, 0.0);
    }

    #[test]
    fn radial_field_matches_polar_reduction() {
        // rho integrated over the unit ellipsoid: (int J dsigma) * int_0^1
        // rho * rho^(gamma-1) = 3 pi / 4.
        let s = parab2();
        let f = ScalarField::rho_power(vec![0.0, 0.0], 1.0).unwrap();
        let v = integrate_ellipsoid(&s, &f, &[0.0, 0.0], 1.0, QuadConfig::medium()).unwrap();
        assert!((v - 3.0 * PI / 4.0).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn lp_norm_of_indicator() {
        let s = parab2();
        let f = ScalarField::indicator_ellipsoid(vec![0.0, 0.0], 0.7).unwrap();
        for (p, r) in [(1.0, 0.4), (2.0, 1.0), (3.0, 2.5)] {
            let got = lp_norm_ellipsoid(&s, &f, p, &[0.0, 0.0], r, QuadConfig::medium()).unwrap();
            let expected = PI.powf(1.0 / p) * r.min(0.7).powf(3.0 / p);
            assert!(
                (got - expected).abs() < 1e-3 * expected,
                "p={p}, r={r}: {got} vs {expected}"
            );
        }
        let one = ScalarField::constant(1.0, 2);
        let got = lp_norm_ellipsoid(&s, &one, 2.0, &[0.0, 0.0], 1.0, QuadConfig::medium()).unwrap();
        assert!((got - PI.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn scaling_is_homogeneous() {
        let s = parab2();
        let f = ScalarField::bump(vec![0.0, 0.0], 1.0).unwrap();
        let g = f.clone().scaled(-2.5);
        let nf = lp_norm_ellipsoid(&s, &f, 2.0, &[0.0, 0.0], 1.0, QuadConfig::medium()).unwrap();
        let ng = lp_norm_ellipsoid(&s, &g, 2.0, &[0.0, 0.0], 1.0, QuadConfig::medium()).unwrap();
        assert!((ng - 2.5 * nf).abs() < 1e-10 * ng.max(1.0));
    }

    #[test]
    fn profile_is_monotone_and_matches_single_norms() {
        let s = parab2();
        let f = ScalarField::bump(vec![0.3, 0.0], 1.0).unwrap();
        let radii = [0.25, 0.5, 1.0, 2.0, 4.0];
        let prof = lp_norm_profile(&s, &f, 2.0, &[0.0, 0.0], &radii, QuadConfig::medium()).unwrap();
        for w in prof.windows(2) {
            assert!(w[0] <= w[1] + 1e-15);
        }
        for (j, &r) in radii.iter().enumerate() {
            let single = lp_norm_ellipsoid(&s, &f, 2.0, &[0.0, 0.0], r, QuadConfig::medium()).unwrap();
            assert!(
                (prof[j] - single).abs() <= 2e-5 * single.max(1e-12),
                "r={r}: {} vs {single}",
                prof[j]
            );
        }
    }

    #[test]
    fn log_singular_field_integrates() {
        // ln(rho) over the unit ellipsoid: 3 pi int_0^1 ln(rho) rho^2 drho
        // = 3 pi * (-1/9) = -pi/3.
        let s = parab2();
        let f = ScalarField::log_rho(vec![0.0, 0.0]);
        let v = integrate_ellipsoid(&s, &f, &[0.0, 0.0], 1.0, QuadConfig::medium()).unwrap();
        assert!((v + PI / 3.0).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn translated_field_shifts_center() {
        let s = parab2();
        let f = ScalarField::indicator_ellipsoid(vec![0.0, 0.0], 1.0)
            .unwrap()
            .translated(&[0.5, 0.0]);
        assert_eq!(f.eval(&s, &[0.5, 0.0]), 1.0);
        assert_eq!(f.eval(&s, &[-0.6, 0.0]), 0.0);
    }

    #[test]
    fn field_spec_json() {
        let spec: FieldSpec =
            serde_json::from_str(r#"{"name":"bump","R":1.0,"center":[0,0]}"#).unwrap();
        let f = spec.build(2).unwrap();
        assert_eq!(f.support_radius(), 1.0);
        let spec: FieldSpec = serde_json::from_str(r#"{"name":"log_rho"}"#).unwrap();
        assert!(spec.build(2).is_ok());
        assert!(serde_json::from_str::<FieldSpec>(r#"{"name":"mystery"}"#).is_err());
        let spec: FieldSpec = serde_json::from_str(r#"{"name":"constant","c":5.0}"#).unwrap();
        assert_eq!(spec.build(3).unwrap().eval(
            &AnisotropicStructure::new(vec![1.0, 1.0, 2.0]).unwrap(),
            &[1.0, 2.0, 3.0]
        ), 5.0);
    }
}
