//! Numerical evaluation of the weight-pair admissibility conditions: the
//! tail integrals whose boundedness licenses the norm inequalities, their
//! essential-infimum numerators, and construction of admissible power pairs.

use crate::error::{Error, Result};
use crate::quad::gl_integrate;
use crate::spaces::RadialWeight;
use serde::{Deserialize, Serialize};

/// Which theorem hypothesis the tail integral instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionVariant {
    /// Singular family, `s' <= q`.
    Theorem1SmallS,
    /// Singular family, `p < s`; right side carries `r^(gamma/s)`.
    Theorem1LargeS,
    /// Fractional family, `s' <= q`.
    Theorem2SmallS,
    /// Fractional family, `q_1 < s`; right side carries `r^(gamma/s)`.
    Theorem2LargeS,
}

impl ConditionVariant {
    pub fn is_fractional(self) -> bool {
        matches!(
            self,
            ConditionVariant::Theorem2SmallS | ConditionVariant::Theorem2LargeS
        )
    }

    pub fn is_large_s(self) -> bool {
        matches!(
            self,
            ConditionVariant::Theorem1LargeS | ConditionVariant::Theorem2LargeS
        )
    }
}

/// Exponent bookkeeping of one admissibility check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionParams {
    pub p: f64,
    pub q: f64,
    /// Target index of the fractional family (`1/q1 = 1/q - alpha/gamma`);
    /// ignored by the singular variants.
    #[serde(default)]
    pub q1: f64,
    #[serde(default)]
    pub p_i: Vec<f64>,
    #[serde(default)]
    pub lambda_i: Vec<f64>,
    #[serde(default)]
    pub alpha: f64,
    /// Kernel integrability index; JSON accepts a number, "inf", or null.
    #[serde(default = "default_s", deserialize_with = "deserialize_s")]
    pub s: f64,
    pub gamma: f64,
    pub variant: ConditionVariant,
}

fn default_s() -> f64 {
    f64::INFINITY
}

fn deserialize_s<'de, D>(d: D) -> std::result::Result<f64, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
        Null(()),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(t)
            if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") =>
        {
            Ok(f64::INFINITY)
        }
        Raw::Text(t) => Err(serde::de::Error::custom(format!(
            "integrability index must be a number or \"inf\", got {t:?}"
        ))),
        Raw::Null(()) => Ok(f64::INFINITY),
    }
}

impl ConditionParams {
    pub fn order(&self) -> usize {
        self.p_i.len()
    }

    pub fn sum_lambda(&self) -> f64 {
        self.lambda_i.iter().sum()
    }

    pub fn sum_inv_p(&self) -> f64 {
        self.p_i.iter().map(|p| 1.0 / p).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.gamma;
        if !(g > 0.0) {
            return Err(Error::invalid("gamma must be positive"));
        }
        if self.p_i.len() != self.lambda_i.len() {
            return Err(Error::invalid(format!(
                "{} symbol integrability indices vs {} campanato indices",
                self.p_i.len(),
                self.lambda_i.len()
            )));
        }
        for &pi in &self.p_i {
            if !(pi > 1.0) || !pi.is_finite() {
                return Err(Error::invalid(format!("symbol index out of (1, inf): {pi}")));
            }
        }
        for &li in &self.lambda_i {
            if !(0.0..1.0 / g).contains(&li) {
                return Err(Error::invalid(format!(
                    "campanato index {li} outside [0, 1/gamma = {})",
                    1.0 / g
                )));
            }
        }
        if !(self.p > 1.0) || !self.p.is_finite() || !(self.q > 1.0) || !self.q.is_finite() {
            return Err(Error::invalid("need 1 < p, q < inf"));
        }
        let holder = (1.0 / self.q - self.sum_inv_p() - 1.0 / self.p).abs();
        if holder > 1e-9 {
            return Err(Error::invalid(format!(
                "Hoelder chain 1/q = sum 1/p_i + 1/p violated by {holder:.2e}"
            )));
        }
        if !(self.s > 1.0) {
            return Err(Error::invalid(format!("need s in (1, inf], got {}", self.s)));
        }
        let inv_s = if self.s.is_finite() { 1.0 / self.s } else { 0.0 };
        match self.variant {
            ConditionVariant::Theorem1SmallS | ConditionVariant::Theorem1LargeS => {
                if self.alpha != 0.0 {
                    return Err(Error::invalid("singular variants require alpha = 0"));
                }
            }
            ConditionVariant::Theorem2SmallS | ConditionVariant::Theorem2LargeS => {
                if !(self.alpha > 0.0 && self.alpha < g) {
                    return Err(Error::invalid(format!(
                        "fractional variants need alpha in (0, gamma), got {}",
                        self.alpha
                    )));
                }
                let q1_expected = 1.0 / (1.0 / self.q - self.alpha / g);
                if !(self.q1 > 1.0) || (1.0 / self.q1 - 1.0 / q1_expected).abs() > 1e-9 {
                    return Err(Error::invalid(format!(
                        "need 1/q1 = 1/q - alpha/gamma, got q1 = {}, expected {q1_expected}",
                        self.q1
                    )));
                }
            }
        }
        match self.variant {
            ConditionVariant::Theorem1SmallS | ConditionVariant::Theorem2SmallS => {
                let s_prime = if self.s.is_finite() {
                    self.s / (self.s - 1.0)
                } else {
                    1.0
                };
                if s_prime > self.q {
                    return Err(Error::invalid(format!(
                        "small-s variant needs s' <= q; s' = {s_prime}, q = {}",
                        self.q
                    )));
                }
            }
            ConditionVariant::Theorem1LargeS => {
                if !(self.p < self.s) {
                    return Err(Error::invalid("large-s singular variant needs p < s"));
                }
            }
            ConditionVariant::Theorem2LargeS => {
                if !(self.q1 < self.s) {
                    return Err(Error::invalid("large-s fractional variant needs q1 < s"));
                }
            }
        }
        let _ = inv_s;
        Ok(())
    }

    /// Power of `t` in the integrand denominator.
    pub fn denominator_exponent(&self) -> f64 {
        let g = self.gamma;
        let inv_s = if self.s.is_finite() { 1.0 / self.s } else { 0.0 };
        match self.variant {
            ConditionVariant::Theorem1SmallS => g * (1.0 / self.p - self.sum_lambda()) + 1.0,
            ConditionVariant::Theorem1LargeS => {
                g * (1.0 / self.p - inv_s - self.sum_lambda()) + 1.0
            }
            ConditionVariant::Theorem2SmallS => {
                g * (1.0 / self.q1 - (self.sum_lambda() + self.sum_inv_p())) + 1.0
            }
            ConditionVariant::Theorem2LargeS => {
                g * (1.0 / self.q1 - (inv_s + self.sum_lambda() + self.sum_inv_p())) + 1.0
            }
        }
    }

    /// Extra factor `r^(gamma/s)` on the right side (1 for small-s).
    pub fn rhs_extra(&self, r: f64) -> f64 {
        if self.variant.is_large_s() && self.s.is_finite() {
            r.powf(self.gamma / self.s)
        } else {
            1.0
        }
    }
}

/// Grid essential infimum: the minimum of a finite positive sample.
pub fn essinf_grid(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("essinf of an empty grid"));
    }
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("essinf needs strictly positive values"));
    }
    Ok(values.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Grid essential supremum.
pub fn esssup_grid(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("esssup of an empty grid"));
    }
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("esssup needs strictly positive values"));
    }
    Ok(values.iter().cloned().fold(0.0, f64::max))
}

/// `essinf_{t < tau} phi1(tau) tau^(gamma/p)` over a grid clipped to
/// `tau > t`; power weights take the exact one-sided limit.
pub fn tail_essinf(
    phi1: &RadialWeight,
    p: f64,
    gamma: f64,
    t: f64,
    tau_grid: &[f64],
) -> Result<f64> {
    if let Some(e1) = phi1.power_exponent() {
        let e = e1 + gamma / p;
        return Ok(if e >= 0.0 {
            phi1.eval(t) * t.powf(gamma / p)
        } else {
            0.0
        });
    }
    let vals: Vec<f64> = tau_grid
        .iter()
        .filter(|&&tau| tau > t)
        .map(|&tau| phi1.eval(tau) * tau.powf(gamma / p))
        .collect();
    essinf_grid(&vals)
}

/// Report of one admissibility check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub variant: ConditionVariant,
    pub sup_ratio: f64,
    pub divergent: bool,
    pub r_grid: Vec<f64>,
    #[serde(rename = "I")]
    pub integrals: Vec<f64>,
}

/// Net exponent `a` with integrand `~ t^(a-1)` for a power weight; the tail
/// converges exactly when `a < 0`.
fn power_net_exponent(params: &ConditionParams, phi1_exponent: f64) -> f64 {
    let e1 = phi1_exponent + params.gamma / params.p;
    e1 - params.denominator_exponent() + 1.0
}

/// `K_m(b) = int_0^inf (1+u)^m e^(-b u) du` for integer m >= 0, b > 0.
pub(crate) fn k_full(m: usize, b: f64) -> f64 {
    let mut sum = 0.0;
    let mut binom = 1.0;
    let mut fact = 1.0;
    for j in 0..=m {
        if j > 0 {
            binom *= (m - j + 1) as f64 / j as f64;
            fact *= j as f64;
        }
        sum += binom * fact / b.powi(j as i32 + 1);
    }
    sum
}

/// `int_U^inf (1+u)^m e^(-b u) du` for b > 0.
pub(crate) fn k_tail(m: usize, b: f64, u: f64) -> f64 {
    let mut sum = 0.0;
    let mut binom = 1.0;
    for j in 0..=m {
        if j > 0 {
            binom *= (m - j + 1) as f64 / j as f64;
        }
        let mut fact = 1.0;
        for k in 1..=j {
            fact *= k as f64;
        }
        sum += binom * (1.0 + u).powi((m - j) as i32) * fact / b.powi(j as i32 + 1);
    }
    sum * (-b * u).exp()
}

/// Evaluate the tail integral `I(r)` for every grid radius, compare with the
/// right side `phi2(r) * rhs_extra(r)`, and report the supremum ratio plus a
/// divergence flag.
///
/// The integral runs numerically (log substitution, Gauss–Legendre panels) up
/// to `t_max`; power weights get an exact analytic tail beyond, other weights
/// a doubling-based divergence probe.
pub fn check_condition(
    params: &ConditionParams,
    phi1: &RadialWeight,
    phi2: &RadialWeight,
    r_grid: &[f64],
    t_max: f64,
) -> Result<ConditionReport> {
    params.validate()?;
    if r_grid.is_empty() || r_grid.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::invalid("r grid must be nonempty and positive"));
    }
    if !(t_max > 0.0) {
        return Err(Error::invalid("t_max must be positive"));
    }
    let m = params.order();
    let a_den = params.denominator_exponent();
    let gamma = params.gamma;
    let p = params.p;

    let mut integrals = Vec::with_capacity(r_grid.len());
    let mut divergent = false;
    for &r in r_grid {
        let i_r = match phi1.power_exponent() {
            Some(e_phi) => {
                let a = power_net_exponent(params, e_phi);
                let e1 = e_phi + gamma / p;
                if e1 < 0.0 {
                    0.0
                } else if a >= 0.0 {
                    divergent = true;
                    f64::INFINITY
                } else {
                    r.powf(a) * k_full(m, -a)
                }
            }
            None => {
                // Numeric log-substitution integral with the same tau grid
                // for the essinf, plus a doubling probe for the tail.
                let numeric = |upper: f64| -> f64 {
                    if upper <= r {
                        return 0.0;
                    }
                    let u_max = (upper / r).ln();
                    let panels = (u_max / 0.5).ceil() as usize;
                    let tau_grid = log_grid(r, upper * 8.0, 32);
                    let mut total = 0.0;
                    for k in 0..panels {
                        let ua = u_max * k as f64 / panels as f64;
                        let ub = u_max * (k + 1) as f64 / panels as f64;
                        total += gl_integrate(ua, ub, 16, |u| {
                            let t = r * u.exp();
                            let num =
                                tail_essinf(phi1, p, gamma, t, &tau_grid).unwrap_or(f64::NAN);
                            (1.0 + u).powi(m as i32) * num * t.powf(1.0 - a_den)
                        });
                    }
                    total
                };
                let i1 = numeric(t_max);
                let i2 = numeric(2.0 * t_max);
                let i4 = numeric(4.0 * t_max);
                let d1 = i2 - i1;
                let d2 = i4 - i2;
                if d2 > 1e-12 * i4.abs().max(1.0) && d2 >= 0.8 * d1 {
                    divergent = true;
                    f64::INFINITY
                } else {
                    // Geometric extrapolation of the remaining tail.
                    let qr = if d1 > 0.0 { (d2 / d1).min(0.99) } else { 0.0 };
                    i4 + d2 * qr / (1.0 - qr)
                }
            }
        };
        integrals.push(i_r);
    }
    let mut sup_ratio = 0.0f64;
    for (&r, &i_r) in r_grid.iter().zip(&integrals) {
        let rhs = phi2.eval(r) * params.rhs_extra(r);
        if !(rhs > 0.0) {
            return Err(Error::invalid(format!("phi2 not positive at r = {r}")));
        }
        sup_ratio = sup_ratio.max(i_r / rhs);
    }
    Ok(ConditionReport {
        variant: params.variant,
        sup_ratio,
        divergent,
        r_grid: r_grid.to_vec(),
        integrals,
    })
}

pub(crate) fn log_grid(lo: f64, hi: f64, ppd: usize) -> Vec<f64> {
    let n = ((hi / lo).log10() * ppd as f64).ceil().max(1.0) as usize;
    (0..=n)
        .map(|k| lo * 10f64.powf(k as f64 * (hi / lo).log10() / n as f64))
        .collect()
}

/// Construct an admissible power pair: `phi1 = r^((lambda - gamma)/p)` and
/// the exact envelope `phi2` for which the checked ratio is identically 1.
///
/// Fails, naming the offending exponent, when the tail integral diverges for
/// this lambda (the boundary case included).
pub fn power_pair(params: &ConditionParams, lambda: f64) -> Result<(RadialWeight, RadialWeight)> {
    params.validate()?;
    let phi1 = RadialWeight::power(lambda, params.p, params.gamma)?;
    let e_phi = (lambda - params.gamma) / params.p;
    let a = power_net_exponent(params, e_phi);
    if a >= 0.0 {
        return Err(Error::invalid(format!(
            "tail integral diverges: net exponent a = {a:.6} >= 0 \
             (lambda = {lambda}, variant {:?})",
            params.variant
        )));
    }
    let scale = k_full(params.order(), -a);
    let inv_s = if params.s.is_finite() && params.variant.is_large_s() {
        1.0 / params.s
    } else {
        0.0
    };
    let exponent = a - params.gamma * inv_s;
    let phi2 = RadialWeight::Custom(std::sync::Arc::new(move |r: f64| {
        scale * r.powf(exponent)
    }));
    Ok((phi1, phi2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_params(m: usize, variant: ConditionVariant) -> ConditionParams {
        // q from the Hoelder chain with all p_i = 6 and p = 3.
        let p_i = vec![6.0; m];
        let inv_q = m as f64 / 6.0 + 1.0 / 3.0;
        let q = 1.0 / inv_q;
        ConditionParams {
            p: 3.0,
            q,
            q1: 0.0,
            p_i,
            lambda_i: vec![0.0; m],
            alpha: 0.0,
            s: f64::INFINITY,
            gamma: 3.0,
            variant,
        }
    }

    #[test]
    fn essinf_identity_exact() {
        let v = [2.0, 3.0, 5.0];
        let inf = essinf_grid(&v).unwrap();
        assert_eq!(inf, 2.0);
        let recip: Vec<f64> = v.iter().map(|x| 1.0 / x).collect();
        assert_eq!(1.0 / inf, esssup_grid(&recip).unwrap());
        assert_eq!(essinf_grid(&[4.0, 4.0]).unwrap(), 4.0);
        assert!(essinf_grid(&[]).is_err());
        assert!(essinf_grid(&[1.0, -2.0]).is_err());
    }

    #[test]
    fn tail_essinf_power_closed_form() {
        // phi1 tau^(gamma/p) = tau^(lambda/p): essinf over (t, inf) is
        // t^(lambda/p) for lambda >= 0.
        let gamma = 3.0;
        let (lambda, p) = (1.2, 2.0);
        let phi1 = RadialWeight::power(lambda, p, gamma).unwrap();
        let t = 0.7;
        let got = tail_essinf(&phi1, p, gamma, t, &[]).unwrap();
        assert!((got - t.powf(lambda / p)).abs() < 1e-14);
        // lambda = 0: the product is identically 1.
        let phi0 = RadialWeight::power(0.0, p, gamma).unwrap();
        assert!((tail_essinf(&phi0, p, gamma, 3.1, &[]).unwrap() - 1.0).abs() < 1e-14);
        // constant weight times tau^(-gamma/p) pattern via custom grid:
        let grid = log_grid(0.5, 100.0, 16);
        let w = RadialWeight::Custom(std::sync::Arc::new(move |r: f64| r.powf(-gamma / p)));
        let got = tail_essinf(&w, p, gamma, 0.5, &grid).unwrap();
        assert!((got - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_pair_reports_unit_ratio() {
        for m in [0usize, 1, 2] {
            let params = base_params(m, ConditionVariant::Theorem1SmallS);
            let (phi1, phi2) = power_pair(&params, 0.0).unwrap();
            let r_grid = log_grid(1e-2, 1e2, 4);
            let report = check_condition(&params, &phi1, &phi2, &r_grid, 1e4).unwrap();
            assert!(!report.divergent);
            assert!(
                (report.sup_ratio - 1.0).abs() < 1e-12,
                "m={m}: {}",
                report.sup_ratio
            );
        }
    }

    #[test]
    fn analytic_tail_matches_quadrature() {
        // Evaluate the m = 2 integrand numerically on a huge range and
        // compare with the closed form.
        let params = base_params(2, ConditionVariant::Theorem1SmallS);
        let (phi1, _) = power_pair(&params, 0.3).unwrap();
        let e_phi = phi1.power_exponent().unwrap();
        let a = power_net_exponent(&params, e_phi);
        let r: f64 = 0.37;
        let exact = r.powf(a) * k_full(2, -a);
        // brute-force log-substitution quadrature out to u = 60
        let mut numeric = 0.0;
        let panels = 240;
        for k in 0..panels {
            let ua = 60.0 * k as f64 / panels as f64;
            let ub = 60.0 * (k + 1) as f64 / panels as f64;
            numeric += gl_integrate(ua, ub, 16, |u| (1.0 + u).powi(2) * (a * u).exp());
        }
        numeric *= r.powf(a);
        assert!(
            (exact - numeric).abs() < 1e-9 * exact.abs(),
            "{exact} vs {numeric}"
        );
    }

    #[test]
    fn boundary_exponent_is_divergent() {
        // Choose lambda at the exact divergence boundary a = 0.
        let params = base_params(1, ConditionVariant::Theorem1SmallS);
        // a = lambda/p - gamma(1/p - lambda_1) with lambda_1 = 0:
        // a = (lambda - 3)/3 = 0 at lambda = 3.
        assert!(power_pair(&params, 3.0).is_err());
        let phi1 = RadialWeight::power(3.0, params.p, params.gamma).unwrap();
        let phi2 = RadialWeight::Constant { value: 1.0 };
        let report =
            check_condition(&params, &phi1, &phi2, &log_grid(0.1, 10.0, 2), 1e3).unwrap();
        assert!(report.divergent);
    }

    #[test]
    fn phi2_scaling_scales_ratio() {
        let params = base_params(1, ConditionVariant::Theorem1SmallS);
        let (phi1, phi2) = power_pair(&params, 0.2).unwrap();
        let grid = log_grid(0.1, 10.0, 4);
        let base = check_condition(&params, &phi1, &phi2, &grid, 1e4).unwrap();
        let phi2_scaled = phi2.scaled(4.0);
        let scaled = check_condition(&params, &phi1, &phi2_scaled, &grid, 1e4).unwrap();
        assert!((scaled.sup_ratio - base.sup_ratio / 4.0).abs() < 1e-12);
    }

    #[test]
    fn custom_weight_goes_through_numeric_path() {
        // A constant phi1 behaves like lambda = gamma... the product
        // phi1 tau^(gamma/p) is increasing, essinf at the left end; the
        // integral converges for the small-s denominator with lambda_i = 0.
        let params = base_params(1, ConditionVariant::Theorem1SmallS);
        let phi1 = RadialWeight::Constant { value: 1.0 };
        let phi2 = RadialWeight::Constant { value: 1.0 };
        let report =
            check_condition(&params, &phi1, &phi2, &log_grid(0.5, 2.0, 2), 1e3).unwrap();
        // The essinf numerator is t^(gamma/p) against the t^(gamma/p + 1)
        // denominator, so the integrand is (1 + u) du: log-divergent, and
        // the doubling probe must flag it.
        assert!(report.divergent);
    }

    #[test]
    fn fractional_variant_validates_q1() {
        let gamma = 3.0;
        let alpha = 1.0;
        let p_i = vec![8.0, 8.0];
        // 1/q = 1/8 + 1/8 + 1/2 = 3/4, q = 4/3; 1/q1 = 3/4 - 1/3 = 5/12.
        // Net exponent a = (lambda - gamma)/p + alpha + gamma sum(lambda_i)
        // = -1.5 + 1 + 0.3 < 0: convergent.
        let p = 2.0;
        let q = 4.0 / 3.0;
        let q1 = 1.0 / (3.0 / 4.0 - alpha / gamma);
        let params = ConditionParams {
            p,
            q,
            q1,
            p_i,
            lambda_i: vec![0.05, 0.05],
            alpha,
            s: f64::INFINITY,
            gamma,
            variant: ConditionVariant::Theorem2SmallS,
        };
        params.validate().unwrap();
        let (phi1, phi2) = power_pair(&params, 0.0).unwrap();
        let report =
            check_condition(&params, &phi1, &phi2, &log_grid(0.1, 10.0, 4), 1e4).unwrap();
        assert!(!report.divergent);
        assert!((report.sup_ratio - 1.0).abs() < 1e-12);
        // wrong q1 is rejected
        let bad = ConditionParams {
            q1: 2.0 * q1,
            ..params
        };
        assert!(bad.validate().is_err());
    }
}
