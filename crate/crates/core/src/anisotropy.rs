//! The metric core: anisotropic dilations, the root-defined quasi-metric,
//! ellipsoids, polar coordinates, the angular Jacobian, and volumes.
//!
//! The quasi-metric of a point `x` is the unique `rho > 0` solving
//! `F(x, rho) = sum_i x_i^2 / rho^(2 a_i) = 1`, where `a_i >= 1` are the
//! dilation exponents. `F(x, .)` is strictly decreasing, so the root exists
//! and is unique; it scales exactly linearly under the diagonal dilation
//! `A_t = diag[t^a_1, ..., t^a_n]`. The unit sphere of this metric is the
//! Euclidean unit sphere since `F(x, 1) = |x|^2`.

use crate::error::{Error, Result};
use crate::quad::pairwise_sum;
use serde::{Deserialize, Serialize};

/// How `rho` is computed for a given exponent vector.
#[derive(Debug, Clone, PartialEq)]
enum RhoSolver {
    /// All exponents equal 1: `rho` is the Euclidean norm.
    Euclidean,
    /// All exponents equal `a`: `rho = |x|^(1/a)`.
    Uniform { a: f64 },
    /// Exponents take exactly the two values `a` and `2a`: `u = rho^(2a)`
    /// solves the quadratic `u^2 - A u - B = 0`.
    TwoLevel { a: f64 },
    /// Bracketed bisection followed by Newton polish.
    General,
}

/// Dilation exponents, homogeneous dimension, and quasi-triangle constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StructureSpec", into = "StructureSpec")]
pub struct AnisotropicStructure {
    exponents: Vec<f64>,
    gamma: f64,
    quasi_triangle_k: f64,
    #[serde(skip)]
    solver: RhoSolver,
}

/// Serialized form: gamma is always recomputed, never read from file.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct StructureSpec {
    exponents: Vec<f64>,
    #[serde(default = "default_k")]
    k: f64,
}

fn default_k() -> f64 {
    1.0
}

impl TryFrom<StructureSpec> for AnisotropicStructure {
    type Error = Error;
    fn try_from(s: StructureSpec) -> Result<Self> {
        AnisotropicStructure::with_k(s.exponents, s.k)
    }
}

impl From<AnisotropicStructure> for StructureSpec {
    fn from(s: AnisotropicStructure) -> Self {
        StructureSpec {
            exponents: s.exponents,
            k: s.quasi_triangle_k,
        }
    }
}

impl Default for RhoSolver {
    fn default() -> Self {
        RhoSolver::General
    }
}

fn classify(exponents: &[f64]) -> RhoSolver {
    if exponents.iter().all(|&a| a == 1.0) {
        return RhoSolver::Euclidean;
    }
    let lo = exponents.iter().cloned().fold(f64::INFINITY, f64::min);
    if exponents.iter().all(|&a| a == lo) {
        return RhoSolver::Uniform { a: lo };
    }
    if exponents.iter().all(|&a| a == lo || a == 2.0 * lo) {
        return RhoSolver::TwoLevel { a: lo };
    }
    RhoSolver::General
}

impl AnisotropicStructure {
    /// Structure with the metric quasi-triangle constant k = 1.
    pub fn new(exponents: Vec<f64>) -> Result<Self> {
        Self::with_k(exponents, 1.0)
    }

    /// Structure with an explicit quasi-triangle constant (k >= 1).
    pub fn with_k(exponents: Vec<f64>, k: f64) -> Result<Self> {
        if exponents.len() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 exponents, got {}",
                exponents.len()
            )));
        }
        if exponents.iter().any(|a| !a.is_finite() || *a < 1.0) {
            return Err(Error::invalid(format!(
                "exponents must be finite and >= 1, got {exponents:?}"
            )));
        }
        if !k.is_finite() || k < 1.0 {
            return Err(Error::invalid(format!(
                "quasi-triangle constant must be >= 1, got {k}"
            )));
        }
        let gamma = pairwise_sum(&exponents);
        let solver = classify(&exponents);
        Ok(AnisotropicStructure {
            exponents,
            gamma,
            quasi_triangle_k: k,
            solver,
        })
    }

    /// The standard parabolic structure diag[1, ..., 1, 2] in dimension n.
    pub fn parabolic(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("parabolic structure needs n >= 2"));
        }
        let mut e = vec![1.0; n];
        e[n - 1] = 2.0;
        Self::new(e)
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    /// Homogeneous dimension: the sum of the exponents.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn quasi_triangle_k(&self) -> f64 {
        self.quasi_triangle_k
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point dimension {} does not match structure dimension {}",
                x.len(),
                self.dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite point {x:?}")));
        }
        Ok(())
    }

    /// `F(x, rho) = sum_i x_i^2 / rho^(2 a_i)`, strictly decreasing in rho.
    pub fn f_profile(&self, x: &[f64], rho: f64) -> f64 {
        let mut acc = 0.0;
        for (&xi, &ai) in x.iter().zip(&self.exponents) {
            let p = pow_exp(rho, ai);
            acc += xi * xi / (p * p);
        }
        acc
    }

    /// Quasi-metric of `x`: unique root of `F(x, rho) = 1` (0 for x = 0).
    pub fn rho(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.rho_raw(x))
    }

    /// Root solve without input validation; callers guarantee finite input of
    /// the right dimension.
    pub(crate) fn rho_raw(&self, x: &[f64]) -> f64 {
        match self.solver {
            RhoSolver::Euclidean => {
                let s: f64 = x.iter().map(|v| v * v).sum();
                s.sqrt()
            }
            RhoSolver::Uniform { a } => {
                let s: f64 = x.iter().map(|v| v * v).sum();
                s.sqrt().powf(1.0 / a)
            }
            RhoSolver::TwoLevel { a } => {
                let (mut low, mut high) = (0.0, 0.0);
                for (&xi, &ai) in x.iter().zip(&self.exponents) {
                    if ai == a {
                        low += xi * xi;
                    } else {
                        high += xi * xi;
                    }
                }
                if low == 0.0 && high == 0.0 {
                    return 0.0;
                }
                // u = rho^(2a) solves u^2 - low*u - high = 0.
                let u = 0.5 * (low + (low * low + 4.0 * high).sqrt());
                if a == 1.0 {
                    u.sqrt()
                } else {
                    u.powf(0.5 / a)
                }
            }
            RhoSolver::General => self.rho_general(x),
        }
    }

    fn rho_general(&self, x: &[f64]) -> f64 {
        // Scale bracket: at r0 = max_i |x_i|^(1/a_i) the largest term of F
        // equals 1, so F(r0) in [1, n]; each term at sqrt(n)*r0 is <= 1/n.
        let mut r0: f64 = 0.0;
        for (&xi, &ai) in x.iter().zip(&self.exponents) {
            if xi != 0.0 {
                r0 = r0.max(xi.abs().powf(1.0 / ai));
            }
        }
        if r0 == 0.0 {
            return 0.0;
        }
        let sqrt_n = (self.dim() as f64).sqrt();
        let mut lo = r0 * (1.0 - 1e-12);
        let mut hi = sqrt_n * r0 * (1.0 + 1e-12);
        // Guard the bracket against rounding in the scale estimate.
        let mut guard = 0;
        while self.f_profile(x, lo) < 1.0 {
            lo *= 0.5;
            guard += 1;
            assert!(guard < 64, "rho bracket failure at lower end");
        }
        guard = 0;
        while self.f_profile(x, hi) > 1.0 {
            hi *= 2.0;
            guard += 1;
            assert!(guard < 64, "rho bracket failure at upper end");
        }
        // Bisection to ~1e-6 relative, then Newton polish.
        while (hi - lo) > 1e-6 * hi {
            let mid = 0.5 * (lo + hi);
            if self.f_profile(x, mid) >= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut r = 0.5 * (lo + hi);
        for _ in 0..50 {
            let f = self.f_profile(x, r) - 1.0;
            if f.abs() <= 1e-15 {
                break;
            }
            let mut df = 0.0;
            for (&xi, &ai) in x.iter().zip(&self.exponents) {
                df -= 2.0 * ai * xi * xi / r.powf(2.0 * ai + 1.0);
            }
            let step = f / df;
            let next = r - step;
            if !next.is_finite() || next <= 0.0 {
                break;
            }
            r = next;
            if (step / r).abs() < 1e-16 {
                break;
            }
        }
        r
    }

    /// The paper-style closed-form parabolic gauge
    /// `sqrt((|x'|^2 + sqrt(|x'|^4 + x_n^2)) / 2)`.
    ///
    /// This is NOT the root of `F` for exponents (1, ..., 1, 2): the root
    /// carries `4 x_n^2` under the inner radical. It is exposed as an
    /// alternative gauge only and never substituted for [`Self::rho`].
    pub fn parabolic_gauge(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let n = self.dim();
        let head: Vec<f64> = x[..n - 1].iter().map(|v| v * v).collect();
        let h2 = pairwise_sum(&head);
        let xn2 = x[n - 1] * x[n - 1];
        Ok((0.5 * (h2 + (h2 * h2 + xn2).sqrt())).sqrt())
    }

    /// Apply the dilation `A_t`: component i is scaled by `t^a_i`.
    pub fn dilate(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("dilation parameter must be > 0, got {t}")));
        }
        self.check_dim(x)?;
        Ok(self.dilate_raw(t, x))
    }

    pub(crate) fn dilate_raw(&self, t: f64, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.exponents)
            .map(|(&xi, &ai)| pow_exp(t, ai) * xi)
            .collect()
    }

    /// Radial projection `w = A_{1/rho(x)} x` onto the unit sphere.
    pub fn project_to_sphere(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let r = self.rho_raw(x);
        if r == 0.0 {
            return Err(Error::invalid("cannot project the origin to the unit sphere"));
        }
        Ok(self.dilate_raw(1.0 / r, x))
    }

    /// Angular Jacobian `J(w) = sum_i a_i w_i^2` for `w` on the unit sphere.
    ///
    /// Always lies in `[min a_i, max a_i] ⊂ [1, M]`.
    pub fn jacobian(&self, w: &[f64]) -> Result<f64> {
        self.check_dim(w)?;
        let r = self.rho_raw(w);
        if (r - 1.0).abs() > 1e-8 {
            return Err(Error::invalid(format!(
                "jacobian expects a unit-sphere point, got rho = {r}"
            )));
        }
        Ok(self.jacobian_raw(w))
    }

    pub(crate) fn jacobian_raw(&self, w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (&wi, &ai) in w.iter().zip(&self.exponents) {
            acc += ai * wi * wi;
        }
        acc
    }

    /// Map polar coordinates `(rho, angles)` to a point.
    ///
    /// n = 2 uses one angle in [0, 2pi). For n = 3 the first angle is the
    /// latitude in [-pi/2, pi/2] and the second the azimuth in [0, 2pi);
    /// coordinates are `rho^a_i` times the Euclidean spherical factors.
    pub fn polar_to_point(&self, rho: f64, angles: &[f64]) -> Result<Vec<f64>> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::invalid(format!("polar radius must be > 0, got {rho}")));
        }
        if angles.len() != self.dim() - 1 {
            return Err(Error::invalid(format!(
                "need {} angles for dimension {}, got {}",
                self.dim() - 1,
                self.dim(),
                angles.len()
            )));
        }
        let w = self.angles_to_unit(angles)?;
        Ok(self.dilate_raw(rho, &w))
    }

    /// Inverse of [`Self::polar_to_point`]: returns `(rho, angles)`.
    pub fn point_to_polar(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let w = self.project_to_sphere(x)?;
        let r = self.rho_raw(x);
        let tau = 2.0 * std::f64::consts::PI;
        match self.dim() {
            2 => {
                let mut theta = w[1].atan2(w[0]);
                if theta < 0.0 {
                    theta += tau;
                }
                if theta >= tau {
                    theta = 0.0;
                }
                Ok((r, vec![theta]))
            }
            3 => {
                let lat = w[2].clamp(-1.0, 1.0).asin();
                let mut az = w[1].atan2(w[0]);
                if az < 0.0 {
                    az += tau;
                }
                if az >= tau {
                    az = 0.0;
                }
                Ok((r, vec![lat, az]))
            }
            n => Err(Error::invalid(format!(
                "polar coordinates implemented for n = 2 and n = 3, got n = {n}"
            ))),
        }
    }

    fn angles_to_unit(&self, angles: &[f64]) -> Result<Vec<f64>> {
        let tau = 2.0 * std::f64::consts::PI;
        match self.dim() {
            2 => {
                let theta = angles[0];
                if !(0.0..tau).contains(&theta) {
                    return Err(Error::invalid(format!(
                        "angle {theta} outside [0, 2pi)"
                    )));
                }
                Ok(vec![theta.cos(), theta.sin()])
            }
            3 => {
                let (lat, az) = (angles[0], angles[1]);
                let half_pi = 0.5 * std::f64::consts::PI;
                if !(-half_pi..=half_pi).contains(&lat) {
                    return Err(Error::invalid(format!(
                        "latitude {lat} outside [-pi/2, pi/2]"
                    )));
                }
                if !(0.0..tau).contains(&az) {
                    return Err(Error::invalid(format!("azimuth {az} outside [0, 2pi)")));
                }
                Ok(vec![lat.cos() * az.cos(), lat.cos() * az.sin(), lat.sin()])
            }
            n => Err(Error::invalid(format!(
                "polar coordinates implemented for n = 2 and n = 3, got n = {n}"
            ))),
        }
    }

    /// Volume of the unit ellipsoid: `(1/gamma) * integral of J over the
    /// unit sphere`, by angular quadrature.
    pub fn unit_measure(&self) -> f64 {
        let rule = AngularRule::for_structure(self, AngularResolution::default());
        let vals: Vec<f64> = rule.nodes.iter().map(|nd| nd.weight * nd.jac).collect();
        pairwise_sum(&vals) / self.gamma
    }

    /// `|E(x, r)| = unit_measure * r^gamma`.
    pub fn ellipsoid_volume(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!("radius must be > 0, got {r}")));
        }
        Ok(self.unit_measure() * r.powf(self.gamma))
    }

    /// Membership test for the ellipsoid E(center, r).
    pub fn in_ellipsoid(&self, center: &[f64], r: f64, y: &[f64]) -> bool {
        let d: Vec<f64> = y.iter().zip(center).map(|(a, b)| a - b).collect();
        self.rho_raw(&d) < r
    }
}

/// `t^a` with integer fast paths for the common parabolic exponents.
#[inline]
pub(crate) fn pow_exp(t: f64, a: f64) -> f64 {
    if a == 1.0 {
        t
    } else if a == 2.0 {
        t * t
    } else if a == 3.0 {
        t * t * t
    } else {
        t.powf(a)
    }
}

/// Node counts for the angular rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngularResolution {
    /// Nodes of the periodic trapezoid rule on the circle (n = 2).
    pub circle: usize,
    /// Gauss–Legendre nodes in the sine-latitude variable (n = 3).
    pub latitude: usize,
    /// Periodic trapezoid nodes in the azimuth (n = 3).
    pub azimuth: usize,
}

impl Default for AngularResolution {
    fn default() -> Self {
        AngularResolution {
            circle: 512,
            latitude: 64,
            azimuth: 128,
        }
    }
}

impl AngularResolution {
    pub fn new(circle: usize) -> Self {
        AngularResolution {
            circle,
            ..Default::default()
        }
    }

    /// Double every node count.
    pub fn refined(self) -> Self {
        AngularResolution {
            circle: self.circle * 2,
            latitude: self.latitude * 2,
            azimuth: self.azimuth * 2,
        }
    }

    /// Cheap preset for deeply nested quadratures.
    pub fn coarse() -> Self {
        AngularResolution {
            circle: 64,
            latitude: 16,
            azimuth: 32,
        }
    }
}

/// One node of a surface quadrature on the unit sphere.
#[derive(Debug, Clone)]
pub struct AngularNode {
    /// Unit-sphere point.
    pub w: Vec<f64>,
    /// Surface-measure weight (unnormalized).
    pub weight: f64,
    /// `J(w)` precomputed.
    pub jac: f64,
}

/// Surface quadrature over the unit sphere: periodic trapezoid on the circle
/// for n = 2, product Gauss–Legendre (in sine latitude) x trapezoid for n = 3.
#[derive(Debug, Clone)]
pub struct AngularRule {
    pub nodes: Vec<AngularNode>,
}

impl AngularRule {
    pub fn for_structure(structure: &AnisotropicStructure, res: AngularResolution) -> Self {
        let tau = 2.0 * std::f64::consts::PI;
        let mut nodes = Vec::new();
        match structure.dim() {
            2 => {
                let n = res.circle;
                let wq = tau / n as f64;
                for i in 0..n {
                    let theta = tau * i as f64 / n as f64;
                    let w = vec![theta.cos(), theta.sin()];
                    let jac = structure.jacobian_raw(&w);
                    nodes.push(AngularNode { w, weight: wq, jac });
                }
            }
            3 => {
                // dsigma = du dphi with u = sin(latitude).
                let (gl_nodes, gl_weights) = crate::quad::gauss_legendre(res.latitude);
                let wphi = tau / res.azimuth as f64;
                for (u, wu) in gl_nodes.iter().zip(&gl_weights) {
                    let c = (1.0 - u * u).max(0.0).sqrt();
                    for j in 0..res.azimuth {
                        let phi = tau * j as f64 / res.azimuth as f64;
                        let w = vec![c * phi.cos(), c * phi.sin(), *u];
                        let jac = structure.jacobian_raw(&w);
                        nodes.push(AngularNode {
                            w,
                            weight: wu * wphi,
                            jac,
                        });
                    }
                }
            }
            n => panic!("angular quadrature implemented for n = 2 and n = 3, got n = {n}"),
        }
        AngularRule { nodes }
    }

    /// Integral of `g` against the plain surface measure.
    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut g: F) -> f64 {
        let vals: Vec<f64> = self
            .nodes
            .iter()
            .map(|nd| nd.weight * g(&nd.w))
            .collect();
        pairwise_sum(&vals)
    }

    /// Integral of `g` against `J(w) dsigma(w)`.
    pub fn integrate_with_jacobian<F: FnMut(&[f64]) -> f64>(&self, mut g: F) -> f64 {
        let vals: Vec<f64> = self
            .nodes
            .iter()
            .map(|nd| nd.weight * nd.jac * g(&nd.w))
            .collect();
        pairwise_sum(&vals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn parab2() -> AnisotropicStructure {
        AnisotropicStructure::new(vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn euclidean_reduction() {
        let s = AnisotropicStructure::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(s.rho(&[3.0, 4.0]).unwrap(), 5.0);
    }

    #[test]
    fn axis_point_two_level() {
        let s = parab2();
        assert!((s.rho(&[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        // 256 / rho^4 = 1 forces rho = 4.
        assert!((s.rho(&[0.0, 16.0]).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn parabolic_closed_form_root() {
        let s = parab2();
        let expected = ((1.0 + 5.0f64.sqrt()) / 2.0).sqrt();
        assert!((s.rho(&[1.0, 1.0]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn general_solver_agrees_with_two_level() {
        // Exponents (1, 2, 4) force the general path; cross-check against
        // the profile equation directly.
        let s = AnisotropicStructure::new(vec![1.0, 2.0, 4.0]).unwrap();
        let x = [0.7, -1.3, 2.9];
        let r = s.rho(&x).unwrap();
        assert!((s.f_profile(&x, r) - 1.0).abs() < 1e-12);
        // And the two-level fast path satisfies its own equation.
        let s2 = parab2();
        let x2 = [0.3, -5.0];
        let r2 = s2.rho(&x2).unwrap();
        assert!((s2.f_profile(&x2, r2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rho_rejects_bad_input() {
        let s = parab2();
        assert!(s.rho(&[f64::NAN, 0.0]).is_err());
        assert!(s.rho(&[1.0, 2.0, 3.0]).is_err());
        assert!(AnisotropicStructure::new(vec![1.0]).is_err());
        assert!(AnisotropicStructure::new(vec![0.5, 1.0]).is_err());
        assert!(AnisotropicStructure::with_k(vec![1.0, 2.0], 0.5).is_err());
    }

    #[test]
    fn dilation_basics() {
        let s = parab2();
        assert_eq!(s.dilate(2.0, &[1.0, 1.0]).unwrap(), vec![2.0, 4.0]);
        assert_eq!(s.dilate(1.0, &[0.3, -0.7]).unwrap(), vec![0.3, -0.7]);
        assert!(s.dilate(0.0, &[1.0, 1.0]).is_err());
        assert!(s.dilate(-2.0, &[1.0, 1.0]).is_err());
        let iso = AnisotropicStructure::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(iso.dilate(3.0, &[1.0, 0.0]).unwrap(), vec![3.0, 0.0]);
    }

    #[test]
    fn dilation_composition() {
        let s = AnisotropicStructure::new(vec![1.0, 2.0, 3.0]).unwrap();
        let x = [0.4, -1.2, 2.0];
        let once = s.dilate(6.0, &x).unwrap();
        let twice = s.dilate(2.0, &s.dilate(3.0, &x).unwrap()).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn projection_lands_on_sphere() {
        let s = parab2();
        let w = s.project_to_sphere(&[0.0, 16.0]).unwrap();
        assert!((w[0]).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-12);
        let iso = AnisotropicStructure::new(vec![1.0, 1.0]).unwrap();
        let w = iso.project_to_sphere(&[3.0, 4.0]).unwrap();
        assert!((w[0] - 0.6).abs() < 1e-14 && (w[1] - 0.8).abs() < 1e-14);
        assert!(s.project_to_sphere(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn projection_reconstructs_point() {
        let s = AnisotropicStructure::new(vec![1.0, 2.0, 4.0]).unwrap();
        let x = [0.9, -2.3, 0.4];
        let r = s.rho(&x).unwrap();
        let w = s.project_to_sphere(&x).unwrap();
        let back = s.dilate(r, &w).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-10 * b.abs().max(1.0));
        }
    }

    #[test]
    fn jacobian_values() {
        let s = parab2();
        assert!((s.jacobian(&[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((s.jacobian(&[0.0, 1.0]).unwrap() - 2.0).abs() < 1e-15);
        let iso = AnisotropicStructure::new(vec![1.0, 1.0]).unwrap();
        let w = [0.6, 0.8];
        assert!((iso.jacobian(&w).unwrap() - 1.0).abs() < 1e-15);
        assert!(s.jacobian(&[2.0, 0.0]).is_err());
    }

    #[test]
    fn polar_round_trip_n2() {
        let s = parab2();
        let x = s.polar_to_point(1.0, &[0.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && x[1].abs() < 1e-15);
        let x = s.polar_to_point(2.0, &[PI / 2.0]).unwrap();
        assert!(x[0].abs() < 1e-12 && (x[1] - 4.0).abs() < 1e-12);
        let iso = AnisotropicStructure::new(vec![1.0, 1.0]).unwrap();
        let x = iso.polar_to_point(5.0, &[4.0f64.atan2(3.0)]).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] - 4.0).abs() < 1e-12);
        assert!(s.polar_to_point(1.0, &[7.0]).is_err());
        assert!(s.polar_to_point(-1.0, &[0.0]).is_err());
    }

    #[test]
    fn polar_round_trip_n3() {
        let s = AnisotropicStructure::new(vec![1.0, 1.0, 2.0]).unwrap();
        let (r, ang) = s.point_to_polar(&[0.3, -0.4, 1.7]).unwrap();
        let back = s.polar_to_point(r, &ang).unwrap();
        for (a, b) in back.iter().zip(&[0.3, -0.4, 1.7]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_measure_matches_known_values() {
        let s = parab2();
        assert!((s.unit_measure() - PI).abs() < 1e-10);
        let ball = AnisotropicStructure::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert!((ball.unit_measure() - 4.0 * PI / 3.0).abs() < 1e-8);
    }

    #[test]
    fn ellipsoid_volume_scales() {
        let s = parab2();
        assert!((s.ellipsoid_volume(1.0).unwrap() - PI).abs() < 1e-10);
        assert!((s.ellipsoid_volume(2.0).unwrap() - 8.0 * PI).abs() < 1e-9);
        let iso = AnisotropicStructure::new(vec![1.0, 1.0]).unwrap();
        assert!((iso.ellipsoid_volume(3.0).unwrap() - 9.0 * PI).abs() < 1e-9);
        assert!(s.ellipsoid_volume(0.0).is_err());
    }

    #[test]
    fn parabolic_gauge_differs_from_root() {
        // The closed-form gauge and the profile root are distinct functions;
        // at (1, 1) the root carries 4*x2^2 under the inner radical.
        let s = parab2();
        let gauge = s.parabolic_gauge(&[1.0, 1.0]).unwrap();
        let root = s.rho(&[1.0, 1.0]).unwrap();
        assert!((gauge - root).abs() > 1e-3);
        // Both agree on the x1 axis where the second coordinate vanishes.
        let gauge_axis = s.parabolic_gauge(&[2.0, 0.0]).unwrap();
        assert!((gauge_axis - 2.0).abs() < 1e-14);
    }

    #[test]
    fn structure_json_round_trip_recomputes_gamma() {
        let s: AnisotropicStructure =
            serde_json::from_str(r#"{"exponents":[1.0,2.0],"k":1.0}"#).unwrap();
        assert_eq!(s.gamma(), 3.0);
        let s: AnisotropicStructure = serde_json::from_str(r#"{"exponents":[1.0,2.0]}"#).unwrap();
        assert_eq!(s.quasi_triangle_k(), 1.0);
        assert!(serde_json::from_str::<AnisotropicStructure>(r#"{"exponents":[1.0]}"#).is_err());
    }
}
