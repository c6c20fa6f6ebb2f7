//! Polar quadrature over ellipsoids: angular rule x radial Gauss–Legendre
//! panels with the measure factor `rho^(gamma-1) J(w)`.
//!
//! Integrands are supplied in two parts: a per-ray factor (anything constant
//! along a ray, e.g. a degree-zero homogeneous kernel) and a radial part
//! evaluated at `y = x0 + A_rho w`. Per-ray panel splits may be requested at
//! the boundaries of known ellipsoids so indicators and restrictions do not
//! degrade the rule's order.

use crate::anisotropy::{pow_exp, AngularResolution, AngularRule, AnisotropicStructure};
use crate::quad::{gauss_legendre, pairwise_sum, radial_panels};

/// Quadrature resolution knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadConfig {
    pub angular: AngularResolution,
    /// Gauss–Legendre order per radial panel.
    pub gl_order: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            angular: AngularResolution::default(),
            gl_order: 64,
        }
    }
}

impl QuadConfig {
    /// Cheap preset for nested evaluations (operator values inside norm
    /// quadratures); pair with a stability check at the caller.
    pub fn coarse() -> Self {
        QuadConfig {
            angular: AngularResolution::coarse(),
            gl_order: 8,
        }
    }

    /// Mid preset for single operator evaluations.
    pub fn medium() -> Self {
        QuadConfig {
            angular: AngularResolution {
                circle: 256,
                latitude: 32,
                azimuth: 64,
            },
            gl_order: 24,
        }
    }

    pub fn refined(self) -> Self {
        QuadConfig {
            angular: self.angular.refined(),
            gl_order: self.gl_order * 2,
        }
    }
}

/// A known ellipsoid boundary the integrand jumps or kinks across.
#[derive(Debug, Clone)]
pub struct EllipsoidHint {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Integral value together with the mass of the absolute integrand, used to
/// set an absolute floor when judging refinement convergence.
#[derive(Debug, Clone, Copy)]
pub struct PolarIntegral {
    pub value: f64,
    pub abs_mass: f64,
}

/// Acceptance test for one refinement step: relative tolerance against the
/// finer value with an absolute floor taken from the integrand mass.
pub fn refinement_converged(coarse: f64, fine: f64, abs_mass: f64, rtol: f64) -> bool {
    let diff = (fine - coarse).abs();
    diff <= rtol * fine.abs().max(coarse.abs()) || diff <= 1e-11 * abs_mass + 1e-300
}

const MAX_DIM: usize = 8;

/// The polar integrator for one structure and resolution.
pub struct PolarQuad<'a> {
    structure: &'a AnisotropicStructure,
    rule: AngularRule,
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
}

impl<'a> PolarQuad<'a> {
    pub fn new(structure: &'a AnisotropicStructure, cfg: QuadConfig) -> Self {
        assert!(structure.dim() <= MAX_DIM);
        let rule = AngularRule::for_structure(structure, cfg.angular);
        let (gl_nodes, gl_weights) = gauss_legendre(cfg.gl_order);
        PolarQuad {
            structure,
            rule,
            gl_nodes,
            gl_weights,
        }
    }

    pub fn structure(&self) -> &AnisotropicStructure {
        self.structure
    }

    /// Crossing radii of the curve `rho -> x0 + A_rho w` with the boundary of
    /// `E(hint.center, hint.radius)`, appended to `out`.
    fn ray_crossings(
        &self,
        x0: &[f64],
        w: &[f64],
        lo: f64,
        hi: f64,
        hint: &EllipsoidHint,
        out: &mut Vec<f64>,
    ) {
        let dim = x0.len();
        let exps = self.structure.exponents();
        let profile = |rho: f64| -> f64 {
            let mut d = [0.0; MAX_DIM];
            for i in 0..dim {
                d[i] = x0[i] + pow_exp(rho, exps[i]) * w[i] - hint.center[i];
            }
            self.structure.f_profile(&d[..dim], hint.radius) - 1.0
        };
        const SAMPLES: usize = 96;
        let lo_s = if lo > 0.0 { lo } else { hi * 1e-9 };
        let log_lo = lo_s.ln();
        let log_hi = hi.ln();
        let mut prev_r = lo_s;
        let mut prev_v = profile(prev_r);
        for k in 1..=SAMPLES {
            let r = (log_lo + (log_hi - log_lo) * k as f64 / SAMPLES as f64).exp();
            let v = profile(r);
            if prev_v * v < 0.0 {
                let (mut a, mut b) = (prev_r, r);
                let mut fa = prev_v;
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    let fm = profile(m);
                    if fa * fm <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                        fa = fm;
                    }
                    if (b - a) <= 1e-14 * b {
                        break;
                    }
                }
                out.push(0.5 * (a + b));
            }
            prev_r = r;
            prev_v = v;
        }
    }

    /// One radial panel on one ray; returns `(signed, absolute)` node sums
    /// including the measure factor `rho^(gamma-1)` and the panel half-width.
    fn panel_sums<RD: Fn(f64, &[f64]) -> f64>(
        &self,
        x0: &[f64],
        w: &[f64],
        a: f64,
        b: f64,
        radial: &RD,
        y: &mut [f64],
    ) -> (f64, f64) {
        let gamma = self.structure.gamma();
        let exps = self.structure.exponents();
        let dim = x0.len();
        let mid = 0.5 * (a + b);
        let hw = 0.5 * (b - a);
        let mut val = 0.0;
        let mut mass = 0.0;
        for (&t, &wq) in self.gl_nodes.iter().zip(&self.gl_weights) {
            let rho = mid + hw * t;
            for i in 0..dim {
                y[i] = x0[i] + pow_exp(rho, exps[i]) * w[i];
            }
            let g = radial(rho, y) * rho.powf(gamma - 1.0);
            val += wq * g;
            mass += wq * g.abs();
        }
        (hw * val, hw * mass)
    }

    /// Integrate `ray_factor(w) * radial(rho, y)` against
    /// `rho^(gamma-1) J(w) drho dsigma(w)` over the shell `lo < rho < hi`
    /// centered at `x0`.
    ///
    /// `graded` inserts a geometric ladder toward `lo` for integrands that
    /// are singular there. `breaks` are radii (support edges) valid on every
    /// ray; `hints` generate per-ray panel splits.
    #[allow(clippy::too_many_arguments)]
    pub fn integrate_shell<RF, RD>(
        &self,
        x0: &[f64],
        lo: f64,
        hi: f64,
        graded: bool,
        breaks: &[f64],
        hints: &[EllipsoidHint],
        ray_factor: RF,
        radial: RD,
    ) -> PolarIntegral
    where
        RF: Fn(&[f64]) -> f64,
        RD: Fn(f64, &[f64]) -> f64,
    {
        if hi <= lo {
            return PolarIntegral {
                value: 0.0,
                abs_mass: 0.0,
            };
        }
        let dim = x0.len();
        let base_panels = radial_panels(lo, hi, graded, breaks);
        let mut y = vec![0.0; dim];
        let mut vals = Vec::with_capacity(self.rule.nodes.len());
        let mut masses = Vec::with_capacity(self.rule.nodes.len());
        let mut crossings: Vec<f64> = Vec::new();
        let mut panels: Vec<(f64, f64)> = Vec::new();

        for nd in &self.rule.nodes {
            let rf = ray_factor(&nd.w);
            if rf == 0.0 {
                vals.push(0.0);
                masses.push(0.0);
                continue;
            }
            let panel_list: &[(f64, f64)] = if hints.is_empty() {
                &base_panels
            } else {
                crossings.clear();
                for h in hints {
                    self.ray_crossings(x0, &nd.w, lo, hi, h, &mut crossings);
                }
                if crossings.is_empty() {
                    &base_panels
                } else {
                    panels.clear();
                    split_panels(&base_panels, &crossings, &mut panels);
                    &panels
                }
            };
            let mut ray_val = 0.0;
            let mut ray_mass = 0.0;
            for &(a, b) in panel_list {
                let (v, m) = self.panel_sums(x0, &nd.w, a, b, &radial, &mut y);
                ray_val += v;
                ray_mass += m;
            }
            vals.push(rf * nd.weight * nd.jac * ray_val);
            masses.push(rf.abs() * nd.weight * nd.jac * ray_mass);
        }
        PolarIntegral {
            value: pairwise_sum(&vals),
            abs_mass: pairwise_sum(&masses),
        }
    }

    /// Cumulative integrals over the nested ellipsoids `E(x0, radii[j])`.
    ///
    /// `radii` must be strictly increasing and positive. Returns one
    /// [`PolarIntegral`] per radius; entry `j` integrates over the full ball
    /// of radius `radii[j]`. The integrand is evaluated once per panel; the
    /// nesting is assembled by prefix summation, so refining `radii` never
    /// loses previously sampled panels.
    #[allow(clippy::too_many_arguments)]
    pub fn cumulative_shells<RF, RD>(
        &self,
        x0: &[f64],
        radii: &[f64],
        graded: bool,
        breaks: &[f64],
        hints: &[EllipsoidHint],
        ray_factor: RF,
        radial: RD,
    ) -> Vec<PolarIntegral>
    where
        RF: Fn(&[f64]) -> f64,
        RD: Fn(f64, &[f64]) -> f64,
    {
        assert!(!radii.is_empty());
        assert!(radii.windows(2).all(|p| p[0] < p[1]) && radii[0] > 0.0);
        let dim = x0.len();
        let nseg = radii.len();
        let r_max = *radii.last().unwrap();
        let nrays = self.rule.nodes.len();
        // seg-major accumulation: contributions[seg][ray]
        let mut contrib = vec![vec![0.0; nrays]; nseg];
        let mut contrib_mass = vec![vec![0.0; nrays]; nseg];
        let mut y = vec![0.0; dim];
        let mut crossings: Vec<f64> = Vec::new();

        for (ray, nd) in self.rule.nodes.iter().enumerate() {
            let rf = ray_factor(&nd.w);
            if rf == 0.0 {
                continue;
            }
            crossings.clear();
            for h in hints {
                self.ray_crossings(x0, &nd.w, 0.0, r_max, h, &mut crossings);
            }
            for seg in 0..nseg {
                let lo = if seg == 0 { 0.0 } else { radii[seg - 1] };
                let hi = radii[seg];
                if hi <= lo {
                    continue;
                }
                let mut seg_breaks: Vec<f64> = breaks
                    .iter()
                    .chain(crossings.iter())
                    .cloned()
                    .filter(|&c| c > lo && c < hi)
                    .collect();
                seg_breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let panels = radial_panels(lo, hi, graded && seg == 0, &seg_breaks);
                let w_scale = rf * nd.weight * nd.jac;
                for (a, b) in panels {
                    let (v, m) = self.panel_sums(x0, &nd.w, a, b, &radial, &mut y);
                    contrib[seg][ray] += w_scale * v;
                    contrib_mass[seg][ray] += w_scale.abs() * m;
                }
            }
        }
        let mut out = Vec::with_capacity(nseg);
        let mut acc = 0.0;
        let mut acc_mass = 0.0;
        for seg in 0..nseg {
            acc += pairwise_sum(&contrib[seg]);
            acc_mass += pairwise_sum(&contrib_mass[seg]);
            out.push(PolarIntegral {
                value: acc,
                abs_mass: acc_mass,
            });
        }
        out
    }
}

fn split_panels(base: &[(f64, f64)], cuts: &[f64], out: &mut Vec<(f64, f64)>) {
    let mut sorted: Vec<f64> = cuts.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &(a, b) in base {
        let mut left = a;
        for &c in sorted.iter() {
            if c > left * (1.0 + 1e-13) + 1e-300 && c < b * (1.0 - 1e-13) {
                out.push((left, c));
                left = c;
            }
        }
        out.push((left, b));
    }
}
