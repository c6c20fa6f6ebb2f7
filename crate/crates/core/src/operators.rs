//! The integral operators: maximal and fractional maximal averages,
//! fractional integrals, principal-value singular integrals, their
//! multilinear commutators, and the dominating operator that majorizes the
//! maximal family pointwise.
//!
//! All evaluations integrate in polar coordinates centered at the evaluation
//! point, where the kernel is constant along rays. Compactly supported
//! densities make the outer truncation exact; the singular case runs a
//! geometric-in-epsilon exclusion ladder with extrapolation.

use crate::anisotropy::AnisotropicStructure;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::kernel::RoughKernel;
use crate::polar::{EllipsoidHint, PolarQuad, QuadConfig};
use serde::{Deserialize, Serialize};

/// Kernel, fractional order, and commutator symbols.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub kernel: RoughKernel,
    /// Fractional order in `[0, gamma)`; 0 is the singular case.
    pub alpha: f64,
    /// Commutator symbols; empty means the plain operator.
    pub symbols: Vec<ScalarField>,
}

impl OperatorSpec {
    pub fn plain(kernel: RoughKernel, alpha: f64) -> Self {
        OperatorSpec {
            kernel,
            alpha,
            symbols: Vec::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.symbols.len()
    }

    pub fn validate(&self, structure: &AnisotropicStructure) -> Result<()> {
        if !(0.0..structure.gamma()).contains(&self.alpha) {
            return Err(Error::invalid(format!(
                "fractional order must lie in [0, gamma = {}), got {}",
                structure.gamma(),
                self.alpha
            )));
        }
        for b in &self.symbols {
            if b.center().len() != structure.dim() {
                return Err(Error::invalid("symbol dimension mismatch"));
            }
        }
        Ok(())
    }
}

/// JSON form of an operator spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorSpecConfig {
    pub kernel: crate::kernel::KernelSpec,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default, rename = "b")]
    pub symbols: Vec<crate::field::FieldSpec>,
}

impl OperatorSpecConfig {
    pub fn build(&self, structure: &AnisotropicStructure) -> Result<OperatorSpec> {
        let kernel = RoughKernel::builtin(&self.kernel, structure)?;
        let symbols = self
            .symbols
            .iter()
            .map(|s| s.build(structure.dim()))
            .collect::<Result<Vec<_>>>()?;
        let spec = OperatorSpec {
            kernel,
            alpha: self.alpha,
            symbols,
        };
        spec.validate(structure)?;
        Ok(spec)
    }
}

/// Values of the symbols at the evaluation point, precomputed.
fn symbol_values(
    structure: &AnisotropicStructure,
    symbols: &[ScalarField],
    x: &[f64],
) -> Result<Vec<f64>> {
    let vals: Vec<f64> = symbols.iter().map(|b| b.eval(structure, x)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(
            "a commutator symbol is singular at the evaluation point",
        ));
    }
    Ok(vals)
}

#[inline]
fn product_signed(
    structure: &AnisotropicStructure,
    symbols: &[ScalarField],
    bx: &[f64],
    y: &[f64],
) -> f64 {
    let mut p = 1.0;
    for (b, &bxi) in symbols.iter().zip(bx) {
        p *= bxi - b.eval(structure, y);
    }
    p
}

#[inline]
fn product_abs(
    structure: &AnisotropicStructure,
    symbols: &[ScalarField],
    bx: &[f64],
    y: &[f64],
) -> f64 {
    let mut p = 1.0;
    for (b, &bxi) in symbols.iter().zip(bx) {
        p *= (bxi - b.eval(structure, y)).abs();
    }
    p
}

/// Exact outer truncation radius: the density vanishes beyond it.
fn truncation_radius(
    structure: &AnisotropicStructure,
    f: &ScalarField,
    x: &[f64],
) -> Result<f64> {
    let r = f.support_radius();
    if !r.is_finite() {
        return Err(Error::Precondition(
            "operator evaluation needs a compactly supported density".into(),
        ));
    }
    let d: Vec<f64> = x.iter().zip(f.center()).map(|(a, b)| a - b).collect();
    let k = structure.quasi_triangle_k();
    Ok(k * (structure.rho_raw(&d) + r) * (1.0 + 1e-12))
}

/// Break radii and ellipsoid hints for all fields entering an integrand
/// centered at `x`.
fn collect_geometry(
    structure: &AnisotropicStructure,
    x: &[f64],
    fields: &[&ScalarField],
) -> (Vec<f64>, Vec<EllipsoidHint>) {
    let mut breaks = Vec::new();
    let mut hints = Vec::new();
    for f in fields {
        let (mut b, mut h) = f.edge_info(structure, x);
        breaks.append(&mut b);
        hints.append(&mut h);
    }
    (breaks, hints)
}

fn any_singular_at(structure: &AnisotropicStructure, x: &[f64], fields: &[&ScalarField]) -> bool {
    fields.iter().any(|f| f.singular_at(structure, x))
}

/// Maximal average: the grid surrogate of
/// `sup_t |E(x,t)|^(alpha/gamma - 1) * int_{E(x,t)} prod|b_i(x)-b_i(y)| |Omega(x-y)| |f(y)| dy`.
///
/// Returns a lower bound of the true supremum that converges as the grid
/// refines. Grids are clipped at the radius beyond which the average decays
/// monotonically (compact support), and that radius joins the grid.
pub fn maximal(
    structure: &AnisotropicStructure,
    spec: &OperatorSpec,
    f: &ScalarField,
    x: &[f64],
    t_grid: &[f64],
    cfg: QuadConfig,
) -> Result<f64> {
    spec.validate(structure)?;
    if t_grid.is_empty() || t_grid[0] <= 0.0 || t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(
            "t grid must be nonempty, positive, strictly increasing",
        ));
    }
    let bx = symbol_values(structure, &spec.symbols, x)?;
    let upsilon = structure.unit_measure();
    let gamma = structure.gamma();
    let prefactor = |t: f64| (upsilon * t.powf(gamma)).powf(spec.alpha / gamma - 1.0);
    if let Some(rho_xc) = far_support_distance(structure, f, x) {
        // Far field: averages over E(x, t) clip the small support; integrate
        // support-centered with the ball indicator expressed through the
        // distance to x (which is exactly the support-side radial variable).
        let r_f = f.support_radius();
        let k = structure.quasi_triangle_k();
        let t_empty = (rho_xc / k - r_f).max(0.0);
        let t_full = k * (rho_xc + r_f) * (1.0 + 1e-12);
        let mut cands: Vec<f64> = t_grid
            .iter()
            .cloned()
            .filter(|&t| t > t_empty && t < t_full)
            .collect();
        cands.push(t_full);
        let mut best = 0.0f64;
        for t in cands {
            let hint = EllipsoidHint {
                center: x.to_vec(),
                radius: t,
            };
            let out = convolve_support_centered(
                structure,
                spec,
                f,
                x,
                &bx,
                true,
                cfg,
                std::slice::from_ref(&hint),
                |rho_d| if rho_d < t { 1.0 } else { 0.0 },
            );
            best = best.max(prefactor(t) * out.value);
        }
        return Ok(best);
    }
    let mut grid: Vec<f64> = t_grid.to_vec();
    if f.support_radius().is_finite() {
        let t_star = truncation_radius(structure, f, x)?;
        grid.retain(|&t| t < t_star);
        grid.push(t_star);
    }
    let fields: Vec<&ScalarField> = std::iter::once(f).chain(spec.symbols.iter()).collect();
    let (breaks, hints) = collect_geometry(structure, x, &fields);
    let quad = PolarQuad::new(structure, cfg);
    let abs_kernel = spec.kernel.abs();
    let cum = quad.cumulative_shells(
        x,
        &grid,
        false,
        &breaks,
        &hints,
        |w| {
            let mut neg = [0.0; 8];
            for (i, &wi) in w.iter().enumerate() {
                neg[i] = -wi;
            }
            abs_kernel.eval_on_sphere(&neg[..w.len()])
        },
        |_, y| product_abs(structure, &spec.symbols, &bx, y) * f.eval(structure, y).abs(),
    );
    let mut best = 0.0f64;
    for (t, c) in grid.iter().zip(&cum) {
        best = best.max(prefactor(*t) * c.value);
    }
    Ok(best)
}

/// Shared direct (absolutely convergent) convolution:
/// `int prod(b_i(x)-b_i(y)) Omega(x-y) rho(x-y)^(alpha-gamma) f(y) dy`,
/// optionally with all factors replaced by absolute values.
#[allow(clippy::too_many_arguments)]
fn convolve_direct(
    structure: &AnisotropicStructure,
    spec: &OperatorSpec,
    f: &ScalarField,
    x: &[f64],
    bx: &[f64],
    lo: f64,
    hi: f64,
    absolute: bool,
    extra_hints: &[EllipsoidHint],
    cfg: QuadConfig,
) -> crate::polar::PolarIntegral {
    let fields: Vec<&ScalarField> = std::iter::once(f).chain(spec.symbols.iter()).collect();
    let (breaks, mut hints) = collect_geometry(structure, x, &fields);
    hints.extend_from_slice(extra_hints);
    let graded = spec.alpha < 1.0 || any_singular_at(structure, x, &fields);
    let quad = PolarQuad::new(structure, cfg);
    let kernel = if absolute {
        spec.kernel.abs()
    } else {
        spec.kernel.clone()
    };
    let alpha = spec.alpha;
    quad.integrate_shell(
        x,
        lo,
        hi,
        graded,
        &breaks,
        &hints,
        |w| {
            let mut neg = [0.0; 8];
            for (i, &wi) in w.iter().enumerate() {
                neg[i] = -wi;
            }
            kernel.eval_on_sphere(&neg[..w.len()])
        },
        |rho, y| {
            let fv = f.eval(structure, y);
            if fv == 0.0 {
                return 0.0;
            }
            let prod = if absolute {
                product_abs(structure, &spec.symbols, &bx, y)
            } else {
                product_signed(structure, &spec.symbols, &bx, y)
            };
            let fv = if absolute { fv.abs() } else { fv };
            prod * fv * rho.powf(alpha - structure.gamma())
        },
    )
}

/// Distance from `x` to the density's center when the evaluation point is
/// far enough that the support subtends a narrow cone from `x` (an
/// x-centered angular rule would under-resolve it).
fn far_support_distance(
    structure: &AnisotropicStructure,
    f: &ScalarField,
    x: &[f64],
) -> Option<f64> {
    let r = f.support_radius();
    if !r.is_finite() {
        return None;
    }
    let d: Vec<f64> = x.iter().zip(f.center()).map(|(a, b)| a - b).collect();
    let rho_xc = structure.rho_raw(&d);
    let k = structure.quasi_triangle_k();
    (rho_xc > 2.5 * k * r).then_some(rho_xc)
}

/// Convolution integrated in polar coordinates centered at the density's
/// support center: correct in the far field where the support subtends a
/// narrow cone from `x`. The kernel is evaluated per node (it is not
/// ray-constant in these coordinates); `x` must be outside the support.
#[allow(clippy::too_many_arguments)]
fn convolve_support_centered<G>(
    structure: &AnisotropicStructure,
    spec: &OperatorSpec,
    f: &ScalarField,
    x: &[f64],
    bx: &[f64],
    absolute: bool,
    cfg: QuadConfig,
    extra_hints: &[EllipsoidHint],
    radial_weight: G,
) -> crate::polar::PolarIntegral
where
    G: Fn(f64) -> f64,
{
    let center = f.center().to_vec();
    let fields: Vec<&ScalarField> = std::iter::once(f).chain(spec.symbols.iter()).collect();
    let (breaks, mut hints) = collect_geometry(structure, &center, &fields);
    hints.extend_from_slice(extra_hints);
    let graded = fields.iter().any(|g| g.singular_at(structure, &center));
    let quad = PolarQuad::new(structure, cfg);
    let kernel = if absolute {
        spec.kernel.abs()
    } else {
        spec.kernel.clone()
    };
    let dim = structure.dim();
    quad.integrate_shell(
        &center,
        0.0,
        f.support_radius() * (1.0 + 1e-12),
        graded,
        &breaks,
        &hints,
        |_| 1.0,
        |_, y| {
            let fv = f.eval(structure, y);
            if fv == 0.0 {
                return 0.0;
            }
            let mut d = [0.0; 8];
            for i in 0..dim {
                d[i] = x[i] - y[i];
            }
            let rho_d = structure.rho_raw(&d[..dim]);
            if rho_d == 0.0 {
                return 0.0;
            }
            let w = structure.dilate_raw(1.0 / rho_d, &d[..dim]);
            let mut kv = kernel.eval_on_sphere(&w);
            if absolute {
                kv = kv.abs();
            }
            let prod = if absolute {
                product_abs(structure, &spec.symbols, bx, y)
            } else {
                product_signed(structure, &spec.symbols, bx, y)
            };
            let fv = if absolute { fv.abs() } else { fv };
            prod * kv * fv * radial_weight(rho_d)
        },
    )
}

/// Direct convolution for densities known to vanish near the evaluation
/// point (restricted tails): no exclusion ladder, any alpha in `[0, gamma)`.
pub(crate) fn convolve_compact(
    structure: &AnisotropicStructure,
    spec: &OperatorSpec,
    f: &ScalarField,
    x: &[f64],
    cfg: QuadConfig,
) -> Result<f64> {
    spec.validate(structure)?;
    let bx = symbol_values(structure, &spec.symbols, x)?;
    let hi = truncation_radius(structure, f, x)?;
    Ok(convolve_direct(structure, spec, f, x, &bx, 0.0, hi, false, &[], cfg).value)
}

/// Fractional integral `T_{Omega, alpha} f(x)` for `alpha` in `(0, gamma)`;
/// the plain operator, independent of any commutator symbols in `spec`.
pub fn fractional_integral(
    structure: &AnisotropicStructure,
    spec: &OperatorSpec,
    f: &ScalarField,
    x: &[f64],
    cfg: QuadConfig,
) -> Result<f64> {
    spec.validate(structure)?;
    if spec.alpha <= 0.0 {
        return Err(Error::invalid(
            "fractional integral needs alpha > 0; use the singular integral at alpha = 0",
        ));
    }
    let plain = OperatorSpec::plain(spec.kernel.clone(), spec.alpha);
    let alpha = spec.alpha;
    let gamma = structure.gamma();
    if far_support_distance(structure, f, x).is_some() {
        let out = convolve_support_centered(structure, &plain, f, x, &[], false, cfg, &[], |d| {
            d.powf(alpha - gamma)
        });
        return Ok(out.value);
    }
    let hi = truncation_radius(structure, f, x)?;
    let out = convolve_direct(structure, &plain, f, x, &[], 0.0, hi, false, &[], cfg);
    Ok(out.value)
}

/// Outcome of the epsilon-exclusion ladder.
struct LadderResult {
    value: f64,
}

/// Run the exclusion ladder `eps_0, eps_0/2, ...` and extrapolate.
#[allow(clippy::too_many_arguments)]
fn pv_ladder(
    structure: &AnisotropicStructure,
    spec: &OperatorSpec,
    f: &ScalarField,
    x: &[f64],
    bx: &[f64],
    hi: f64,
    absolute: bool,
    cfg: QuadConfig,
) -> Result<LadderResult> {
    const MAX_HALVINGS: usize = 12;
    const ACCEPT_ABS: f64 = 1e-6;
    let eps0 = hi / 4.0;
    let outer = convolve_direct(structure, spec, f, x, bx, eps0, hi, absolute, &[], cfg);
    let mut partial = vec![outer.value];
    let mut increments = Vec::new();
    let mut eps_hi = eps0;
    for k in 1..=MAX_HALVINGS {
        let eps_lo = eps0 * 0.5f64.powi(k as i32);
        let ann = convolve_direct(
            structure, spec, f, x, bx, eps_lo, eps_hi, absolute, &[], cfg,
        );
        let prev = *partial.last().unwrap();
        partial.push(prev + ann.value);
        increments.push(ann.value);
        eps_hi = eps_lo;
        let m = increments.len();
        if m >= 2
            && increments[m - 1].abs() < ACCEPT_ABS
            && increments[m - 2].abs() < ACCEPT_ABS
        {
            // Aitken extrapolation over the last three partial sums.
            let n = partial.len();
            let (s0, s1, s2) = (partial[n - 3], partial[n - 2], partial[n - 1]);
            let d1 = s1 - s0;
            let d2 = s2 - s1;
            let denom = d2 - d1;
            let value = if denom.abs() > 1e-14 * s2.abs().max(1.0) {
                s2 - d2 * d2 / denom
            } else {
                s2
            };
            return Ok(LadderResult { value });
        }
    }
    // Ladder exhausted: decide between slow convergence and divergence from
    // the decay ratio of the last increments.
    let m = increments.len();
    let tail: Vec<f64> = increments[m - 4..].iter().map(|d| d.abs()).collect();
    let scale = partial.last().unwrap().abs().max(1.0);
    if tail[3] <= 1e-9 * scale {
        return Ok(LadderResult {
            value: *partial.last().unwrap(),
        });
    }
    let q = (tail[3] / tail[0].max(1e-300)).powf(1.0 / 3.0);
    if q >= 0.97 {
        return Err(Error::Divergence(format!(
            "exclusion ladder is not Cauchy after {MAX_HALVINGS} halvings \
             (increment decay ratio {q:.3})"
        )));
    }
    // Geometric tail estimate.
    let last = *partial.last().unwrap();
    let signed_tail = increments[m - 1] * q / (1.0 - q);
    Ok(LadderResult {
        value: last + signed_tail,
    })
}

/// Principal-value singular integral `T_Omega f(x)` (`alpha = 0`).
///
/// Requires kernel cancellation, and a density that is regular near `x` (an
/// indicator is accepted when `x` is strictly off its edge: the density is
/// locally constant there and annulus cancellation is exact).
pub fn singular_integral(
    structure: &AnisotropicStructure,
    spec: &OperatorSpec,
    f: &ScalarField,
    x: &[f64],
    cfg: QuadConfig,
) -> Result<f64> {
    spec.validate(structure)?;
    if spec.alpha != 0.0 {
        return Err(Error::invalid("singular integral is the alpha = 0 case"));
    }
    if !spec.kernel.mean_zero() {
        return Err(Error::Precondition(
            "principal value requires a mean-zero kernel".into(),
        ));
    }
    let hi = truncation_radius(structure, f, x)?;
    if !f.locally_regular_at(structure, x, hi) {
        return Err(Error::Precondition(
            "principal value needs a density that is regular near the evaluation point".into(),
        ));
    }
    let plain = OperatorSpec::plain(spec.kernel.clone(), 0.0);
    let gamma = structure.gamma();
    if far_support_distance(structure, f, x).is_some() {
        // No singularity reaches the support; the principal value is a
        // plain integral.
        let out = convolve_support_centered(structure, &plain, f, x, &[], false, cfg, &[], |d| {
            d.powf(-gamma)
        });
        return Ok(out.value);
    }
    let ladder = pv_ladder(structure, &plain, f, x, &[], hi, false, cfg)?;
    Ok(ladder.value)
}

/// Multilinear commutator `[b_vec, T_{Omega, alpha}] f(x)`; reduces to the
/// plain operator when there are no symbols.
///
/// At `alpha = 0` a non-mean-zero kernel is accepted when every symbol is
/// regular near `x`: the product `prod(b_i(x) - b_i(y))` then vanishes at
/// `y = x` and supplies the cancellation, with the ladder's Cauchy test as
/// the runtime guard.
pub fn commutator(
    structure: &AnisotropicStructure,
    spec: &OperatorSpec,
    f: &ScalarField,
    x: &[f64],
    cfg: QuadConfig,
) -> Result<f64> {
    spec.validate(structure)?;
    if spec.symbols.is_empty() {
        return if spec.alpha > 0.0 {
            fractional_integral(structure, spec, f, x, cfg)
        } else {
            singular_integral(structure, spec, f, x, cfg)
        };
    }
    let bx = symbol_values(structure, &spec.symbols, x)?;
    let hi = truncation_radius(structure, f, x)?;
    let gamma = structure.gamma();
    let alpha = spec.alpha;
    if far_support_distance(structure, f, x).is_some() {
        let out = convolve_support_centered(structure, spec, f, x, &bx, false, cfg, &[], |d| {
            d.powf(alpha - gamma)
        });
        return Ok(out.value);
    }
    if spec.alpha > 0.0 {
        let out = convolve_direct(structure, spec, f, x, &bx, 0.0, hi, false, &[], cfg);
        return Ok(out.value);
    }
    let symbols_regular = spec
        .symbols
        .iter()
        .all(|b| b.locally_regular_at(structure, x, hi));
    if !spec.kernel.mean_zero() && !symbols_regular {
        return Err(Error::Precondition(
            "alpha = 0 commutator needs a mean-zero kernel or symbols regular near the point"
                .into(),
        ));
    }
    if spec.kernel.mean_zero() && !f.locally_regular_at(structure, x, hi) && !symbols_regular {
        return Err(Error::Precondition(
            "density and symbols are both irregular at the evaluation point".into(),
        ));
    }
    let ladder = pv_ladder(structure, spec, f, x, &bx, hi, false, cfg)?;
    Ok(ladder.value)
}

/// The dominating operator
/// `int prod|b_i(x)-b_i(y)| |Omega(x-y)| rho(x-y)^(alpha-gamma) |f(y)| dy`.
///
/// Absolutely convergent for `alpha > 0`; at `alpha = 0` the ladder watches
/// its (nonnegative, monotone) increments and reports divergence when they
/// stop decaying, which is the log-divergent signature.
pub fn dominating(
    structure: &AnisotropicStructure,
    spec: &OperatorSpec,
    f: &ScalarField,
    x: &[f64],
    cfg: QuadConfig,
) -> Result<f64> {
    spec.validate(structure)?;
    let bx = symbol_values(structure, &spec.symbols, x)?;
    let hi = truncation_radius(structure, f, x)?;
    let gamma = structure.gamma();
    let alpha = spec.alpha;
    if far_support_distance(structure, f, x).is_some() {
        let out = convolve_support_centered(structure, spec, f, x, &bx, true, cfg, &[], |d| {
            d.powf(alpha - gamma)
        });
        return Ok(out.value);
    }
    if spec.alpha > 0.0 {
        let out = convolve_direct(structure, spec, f, x, &bx, 0.0, hi, true, &[], cfg);
        return Ok(out.value);
    }
    let ladder = pv_ladder(structure, spec, f, x, &bx, hi, true, cfg)?;
    Ok(ladder.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use std::f64::consts::PI;

    fn parab2() -> AnisotropicStructure {
        AnisotropicStructure::new(vec![1.0, 2.0]).unwrap()
    }

    fn one_kernel(s: &AnisotropicStructure) -> RoughKernel {
        RoughKernel::builtin(&KernelSpec::ConstantOne, s).unwrap()
    }

    fn t_grid() -> Vec<f64> {
        // log grid including t = 1 exactly
        let mut g = Vec::new();
        let ppd = 16;
        for k in -(2 * ppd)..=(2 * ppd) {
            g.push(10f64.powf(k as f64 / ppd as f64));
        }
        g
    }

    #[test]
    fn maximal_of_indicator_at_center() {
        // Average of the indicator over its own support is exactly 1.
        let s = parab2();
        let spec = OperatorSpec::plain(one_kernel(&s), 0.0);
        let f = ScalarField::indicator_ellipsoid(vec![0.0, 0.0], 1.0).unwrap();
        let v = maximal(&s, &spec, &f, &[0.0, 0.0], &t_grid(), QuadConfig::medium()).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn fractional_maximal_closed_form() {
        // alpha = 1, gamma = 3: sup_t (pi t^3)^(-2/3) pi min(t,1)^3 at t = 1.
        let s = parab2();
        let spec = OperatorSpec::plain(one_kernel(&s), 1.0);
        let f = ScalarField::indicator_ellipsoid(vec![0.0, 0.0], 1.0).unwrap();
        let v = maximal(&s, &spec, &f, &[0.0, 0.0], &t_grid(), QuadConfig::medium()).unwrap();
        let expected = PI.powf(1.0 / 3.0);
        assert!((v - expected).abs() < 1e-3 * expected, "got {v}");
    }

    #[test]
    fn maximal_commutator_closed_form() {
        // m = 1, b = rho, f = indicator: sup at t = 1 of
        // (pi t^3)^(-1) * 3 pi min(t,1)^4 / 4 = 3/4.
        let s = parab2();
        let spec = OperatorSpec {
            kernel: one_kernel(&s),
            alpha: 0.0,
            symbols: vec![ScalarField::rho_power(vec![0.0, 0.0], 1.0).unwrap()],
        };
        let f = ScalarField::indicator_ellipsoid(vec![0.0, 0.0], 1.0).unwrap();
        let v = maximal(&s, &spec, &f, &[0.0, 0.0], &t_grid(), QuadConfig::medium()).unwrap();
        assert!((v - 0.75).abs() < 1e-4, "got {v}");
    }

    #[test]
    fn fractional_integral_closed_form() {
        // 3 pi: polar reduction of rho^(alpha-gamma) over the unit ellipsoid.
        let s = parab2();
        let spec = OperatorSpec::plain(one_kernel(&s), 1.0);
        let f = ScalarField::indicator_ellipsoid(vec![0.0, 0.0], 1.0).unwrap();
        let v = fractional_integral(&s, &spec, &f, &[0.0, 0.0], QuadConfig::medium()).unwrap();
        assert!((v - 3.0 * PI).abs() < 1e-5 * 3.0 * PI, "got {v}");
        // zero density (compactly supported) maps to zero
        let z = ScalarField::bump(vec![0.0, 0.0], 1.0).unwrap().scaled(0.0);
        assert_eq!(
            fractional_integral(&s, &spec, &z, &[0.0, 0.0], QuadConfig::coarse()).unwrap(),
            0.0
        );
    }

    #[test]
    fn fractional_integral_is_linear() {
        let s = parab2();
        let spec = OperatorSpec::plain(one_kernel(&s), 1.5);
        let f = ScalarField::bump(vec![0.2, -0.1], 1.0).unwrap();
        let x = [0.4, 0.3];
        let v1 = fractional_integral(&s, &spec, &f, &x, QuadConfig::medium()).unwrap();
        let v2 =
            fractional_integral(&s, &spec, &f.clone().scaled(2.0), &x, QuadConfig::medium())
                .unwrap();
        assert!((v2 - 2.0 * v1).abs() < 1e-10 * v2.abs().max(1.0));
    }

    #[test]
    fn commutator_closed_form() {
        // m = 1, b = rho, alpha = 1: -3 pi / 2.
        let s = parab2();
        let spec = OperatorSpec {
            kernel: one_kernel(&s),
            alpha: 1.0,
            symbols: vec![ScalarField::rho_power(vec![0.0, 0.0], 1.0).unwrap()],
        };
        let f = ScalarField::indicator_ellipsoid(vec![0.0, 0.0], 1.0).unwrap();
        let v = commutator(&s, &spec, &f, &[0.0, 0.0], QuadConfig::medium()).unwrap();
        let expected = -1.5 * PI;
        assert!((v - expected).abs() < 1e-4 * expected.abs(), "got {v}");
    }

    #[test]
    fn constant_symbol_annihilates() {
        let s = parab2();
        let spec = OperatorSpec {
            kernel: one_kernel(&s),
            alpha: 1.0,
            symbols: vec![ScalarField::constant(4.2, 2)],
        };
        let f = ScalarField::bump(vec![0.0, 0.0], 1.0).unwrap();
        let v = commutator(&s, &spec, &f, &[0.3, 0.1], QuadConfig::coarse()).unwrap();
        assert!(v.abs() < 1e-12, "got {v}");
    }

    #[test]
    fn odd_kernel_pv_vanishes_at_symmetric_point() {
        let s = parab2();
        let kernel = RoughKernel::builtin(&KernelSpec::OddCoordinate { i: 1 }, &s).unwrap();
        let spec = OperatorSpec::plain(kernel, 0.0);
        let f = ScalarField::bump(vec![0.0, 0.0], 1.0).unwrap();
        let v = singular_integral(&s, &spec, &f, &[0.0, 0.0], QuadConfig::medium()).unwrap();
        assert!(v.abs() < 1e-8, "got {v}");
    }

    #[test]
    fn pv_requires_cancellation() {
        let s = parab2();
        let spec = OperatorSpec::plain(one_kernel(&s), 0.0);
        let f = ScalarField::bump(vec![0.0, 0.0], 1.0).unwrap();
        let err = singular_integral(&s, &spec, &f, &[0.0, 0.0], QuadConfig::coarse());
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn pv_on_locally_constant_indicator() {
        // Mean-zero kernel, f = indicator, x interior: annuli inside the
        // support cancel exactly; the value is finite and the far region
        // alone contributes.
        let s = parab2();
        let kernel = RoughKernel::builtin(&KernelSpec::OddCoordinate { i: 2 }, &s).unwrap();
        let spec = OperatorSpec::plain(kernel, 0.0);
        let f = ScalarField::indicator_ellipsoid(vec![0.0, 0.0], 1.0).unwrap();
        let v = singular_integral(&s, &spec, &f, &[0.1, 0.05], QuadConfig::medium()).unwrap();
        assert!(v.is_finite());
        // On the edge the precondition fails.
        let on_edge = [1.0, 0.0];
        assert!(matches!(
            singular_integral(&s, &spec, &f, &on_edge, QuadConfig::coarse()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn commutator_cancellation_without_mean_zero() {
        // alpha = 0, non-mean-zero kernel, Lipschitz symbol: the product
        // supplies the cancellation and the ladder converges.
        let s = parab2();
        let spec = OperatorSpec {
            kernel: one_kernel(&s),
            alpha: 0.0,
            symbols: vec![ScalarField::rho_power(vec![0.0, 0.0], 1.0).unwrap()],
        };
        let f = ScalarField::bump(vec![0.0, 0.0], 1.0).unwrap();
        let v = commutator(&s, &spec, &f, &[0.2, 0.1], QuadConfig::medium()).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn dominating_reduces_to_fractional_for_plain_abs() {
        let s = parab2();
        let spec = OperatorSpec::plain(one_kernel(&s), 1.0);
        let f = ScalarField::bump(vec![0.0, 0.0], 1.0).unwrap();
        let x = [0.3, -0.2];
        let dom = dominating(&s, &spec, &f, &x, QuadConfig::medium()).unwrap();
        let frac = fractional_integral(&s, &spec, &f, &x, QuadConfig::medium()).unwrap();
        assert!((dom - frac).abs() < 1e-9 * frac.abs().max(1.0));
    }

    #[test]
    fn dominating_detects_log_divergence() {
        // m = 0, alpha = 0, f positive near x: the tail test must fire.
        let s = parab2();
        let spec = OperatorSpec::plain(one_kernel(&s), 0.0);
        let f = ScalarField::bump(vec![0.0, 0.0], 1.0).unwrap();
        let err = dominating(&s, &spec, &f, &[0.0, 0.0], QuadConfig::coarse());
        assert!(matches!(err, Err(Error::Divergence(_))), "got {err:?}");
    }

    #[test]
    fn dominating_majorizes_maximal() {
        let s = parab2();
        let spec = OperatorSpec {
            kernel: one_kernel(&s),
            alpha: 1.0,
            symbols: vec![ScalarField::rho_power(vec![0.0, 0.0], 1.0).unwrap()],
        };
        let f = ScalarField::bump(vec![0.0, 0.0], 1.0).unwrap();
        for x in [[0.4, 0.2], [1.5, -0.3], [0.0, 2.0]] {
            let m = maximal(&s, &spec, &f, &x, &t_grid(), QuadConfig::coarse()).unwrap();
            let d = dominating(&s, &spec, &f, &x, QuadConfig::coarse()).unwrap();
            assert!(m <= d + 1e-6, "x={x:?}: {m} > {d}");
        }
    }

    #[test]
    fn translation_covariance() {
        let s = parab2();
        let spec = OperatorSpec {
            kernel: one_kernel(&s),
            alpha: 1.0,
            symbols: vec![],
        };
        let f = ScalarField::bump(vec![0.1, -0.2], 0.8).unwrap();
        let x = [0.5, 0.3];
        let z = [1.3, -0.7];
        let base = fractional_integral(&s, &spec, &f, &x, QuadConfig::medium()).unwrap();
        let shifted_f = f.clone().translated(&z);
        let xz = [x[0] + z[0], x[1] + z[1]];
        let shifted = fractional_integral(&s, &spec, &shifted_f, &xz, QuadConfig::medium()).unwrap();
        assert!(
            (base - shifted).abs() < 1e-8 * base.abs().max(1.0),
            "{base} vs {shifted}"
        );
    }

    #[test]
    fn dilation_scaling_law() {
        // T(f o A_{1/t})(A_t x) = t^alpha (T f)(x) for the plain operator.
        let s = parab2();
        let alpha = 1.0;
        let spec = OperatorSpec::plain(one_kernel(&s), alpha);
        let f = ScalarField::bump(vec![0.0, 0.0], 1.0).unwrap();
        let x = [0.4, 0.1];
        let t = 2.0;
        let base = fractional_integral(&s, &spec, &f, &x, QuadConfig::medium()).unwrap();
        // f o A_{1/t} is the bump with support radius t (its profile is
        // radial in rho, and rho(A_{1/t} y) = rho(y)/t).
        let f_dil = ScalarField::bump(vec![0.0, 0.0], t).unwrap();
        let xt = s.dilate(t, &x).unwrap();
        let scaled = fractional_integral(&s, &spec, &f_dil, &xt, QuadConfig::medium()).unwrap();
        assert!(
            (scaled - t.powf(alpha) * base).abs() < 1e-6 * scaled.abs(),
            "{scaled} vs {}",
            t.powf(alpha) * base
        );
    }

    #[test]
    fn size_condition_bound() {
        // |T f(x)| <= (1 + 1e-6) * dominating with the same resolution.
        let s = parab2();
        let kernel = RoughKernel::builtin(&KernelSpec::AngularHarmonic { freq: 1 }, &s).unwrap();
        let spec = OperatorSpec::plain(kernel, 1.0);
        let f = ScalarField::bump(vec![0.2, 0.0], 1.0).unwrap();
        for x in [[0.1, 0.4], [2.0, 0.0], [-0.5, 1.0]] {
            let t = fractional_integral(&s, &spec, &f, &x, QuadConfig::medium()).unwrap();
            let bound = dominating(&s, &spec, &f, &x, QuadConfig::medium()).unwrap();
            assert!(t.abs() <= (1.0 + 1e-6) * bound, "x={x:?}: |{t}| > {bound}");
        }
    }

    #[test]
    fn infinite_support_rejected() {
        let s = parab2();
        let spec = OperatorSpec::plain(one_kernel(&s), 1.0);
        let f = ScalarField::constant(1.0, 2);
        assert!(matches!(
            fractional_integral(&s, &spec, &f, &[0.0, 0.0], QuadConfig::coarse()),
            Err(Error::Precondition(_))
        ));
    }
}
