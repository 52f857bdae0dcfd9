//! Integrand families for the scalar variational problems: double phase,
//! borderline double phase, piecewise-constant and continuous variable
//! exponents.
//!
//! Every family evaluates pointwise as `phi(x, t)` with weight/exponent data
//! built from the cone indicator of the instance geometry, together with the
//! `t`-derivative and the convex conjugate `phi*(x, s)` (closed form for pure
//! powers, numeric Legendre transform otherwise). Power-log test functions
//! used by the higher-integrability experiments live here as well.

use crate::fields::{smoothstep5, ConeRamp, Fields, Regime};
use crate::{Error, Result};

const E: f64 = std::f64::consts::E;
/// e^3, the shift inside the double logarithm of the exponent modulus.
const E_CUBED: f64 = 20.085536923187668;
/// The exponent modulus must stay below `(p0 - 1) * XI_LEVEL` on the support
/// of the exponent localizer.
const XI_LEVEL: f64 = 0.1;
/// Outer radius of the block-distance cutoff factor of the localizer; the
/// inner radius is half of it. Keeps the localizer supported strictly inside
/// the domain while covering every early-generation neighborhood of the
/// contact set (generation-4 intervals are always shorter than 1/16).
const XI_BLOCK_OUTER: f64 = 0.4;

/// Modulus of continuity of the variable exponent:
/// `kappa * loglog(e^3 + 1/t) / log(e + 1/t)`, extended by its limit 0 at
/// `t = 0`. Increasing in `t`, with supremum `kappa * log 3` as `t -> inf`.
pub fn sigma(kappa: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let inv = 1.0 / t;
    if inv.is_finite() {
        kappa * (E_CUBED + inv).ln().ln() / (E + inv).ln()
    } else {
        // 1/t overflowed; both logs collapse to -ln t with negligible error.
        let l = -t.ln();
        kappa * l.ln() / l
    }
}

/// Conjugate exponent `p' = p / (p - 1)`.
pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

// --- pointwise family formulas (pure in t) ----------------------------------

fn power_value(p: f64, t: f64) -> f64 {
    t.powf(p) / p
}

fn phase_value(p: f64, q: f64, a: f64, t: f64) -> f64 {
    t.powf(p) / p + a * t.powf(q) / q
}

fn phase_slope(p: f64, q: f64, a: f64, t: f64) -> f64 {
    t.powf(p - 1.0) + a * t.powf(q - 1.0)
}

/// Power-log building block `t^{p0} log^{alpha}(e + t)`; shared by the
/// borderline family and the certificate search over its singular term.
pub(crate) fn power_log_value(p0: f64, alpha: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    t.powf(p0) * (E + t).ln().powf(alpha)
}

/// Derivative of [`power_log_value`] in `t`.
pub(crate) fn power_log_slope(p0: f64, alpha: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let l = (E + t).ln();
    t.powf(p0 - 1.0) * l.powf(alpha - 1.0) * (p0 * l + alpha * t / (E + t))
}

fn borderline_value(p0: f64, beta: f64, alpha: f64, eps: f64, a: f64, t: f64) -> f64 {
    power_log_value(p0, -beta, t) + a / eps * power_log_value(p0, alpha, t)
}

fn borderline_slope(p0: f64, beta: f64, alpha: f64, eps: f64, a: f64, t: f64) -> f64 {
    power_log_slope(p0, -beta, t) + a / eps * power_log_slope(p0, alpha, t)
}

/// Exact conjugate of `t^p / p`: value `s^{p'} / p'`, maximizer `s^{1/(p-1)}`.
fn power_conjugate(p: f64, s: f64) -> (f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    let pc = conjugate_exponent(p);
    (s.powf(pc) / pc, s.powf(1.0 / (p - 1.0)))
}

/// Numeric Legendre transform `sup_t (s t - value(t))` of a convex function
/// with `value(0) = 0` and nondecreasing `slope`. Returns the supremum and
/// its maximizer. `hi0` seeds the bracket; it is doubled until the slope
/// exceeds `s`.
pub fn legendre_transform(
    value: impl Fn(f64) -> f64,
    slope: impl Fn(f64) -> f64,
    s: f64,
    hi0: f64,
) -> Result<(f64, f64)> {
    if s <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let mut hi = hi0.max(f64::MIN_POSITIVE);
    let mut doublings = 0;
    while slope(hi) < s {
        hi *= 2.0;
        doublings += 1;
        if doublings > 240 || !hi.is_finite() {
            return Err(Error::Numeric(
                "conjugate bracket failed to enclose the maximizer".into(),
            ));
        }
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok(((s * t - value(t)).max(0.0), t))
}

/// Scan a slope function over a log grid and reject if it ever decreases
/// beyond rounding tolerance (non-convex integrand parameters).
fn validate_slope_monotone(label: &str, slope: impl Fn(f64) -> f64) -> Result<()> {
    let mut prev = 0.0f64;
    let steps = 480;
    for i in 0..=steps {
        let t = 10f64.powf(-8.0 + 16.0 * i as f64 / steps as f64);
        let sl = slope(t);
        if !sl.is_finite() || sl < prev - 1e-11 * (1.0 + sl.abs() + prev.abs()) {
            return Err(Error::InvalidParam(format!(
                "{label}: derivative decreases near t = {t:.6e}; non-convex parameters"
            )));
        }
        prev = prev.max(sl);
    }
    Ok(())
}

// --- integrand families ------------------------------------------------------

/// Family tag and parameters of an integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `t^p/p + a(x) t^q/q` with `a = c^alpha` on the weight-side cone.
    DoublePhase { p: f64, q: f64, alpha: f64 },
    /// `t^{p0} log^{-beta}(e+t) + eps^{-1} a(x) t^{p0} log^{alpha}(e+t)`
    /// with `a = log^{-kappa}(e + 1/c)` on the weight-side cone.
    BorderlineDoublePhase { p0: f64, alpha: f64, beta: f64, kappa: f64, epsilon: f64 },
    /// `t^{p(x)}/p(x)` with `p = p_minus` on the gradient-side region.
    PiecewiseVarExp { p_minus: f64, p_plus: f64 },
    /// `t^{p(x)}/p(x)` with `p` blending `p0 -+ sigma(c)` across the cone.
    ContinuousVarExp { p0: f64, kappa: f64 },
}

impl Family {
    /// Largest conjugate exponent among the family's power exponents; seeds
    /// the conjugate bracket.
    fn conjugate_seed_exponent(&self) -> f64 {
        match *self {
            Family::DoublePhase { p, q, .. } => {
                conjugate_exponent(p).max(conjugate_exponent(q))
            }
            Family::BorderlineDoublePhase { p0, .. } => conjugate_exponent(p0),
            Family::PiecewiseVarExp { p_minus, .. } => conjugate_exponent(p_minus),
            Family::ContinuousVarExp { p0, kappa } => {
                conjugate_exponent(p0 - (p0 - 1.0) * XI_LEVEL * kappa.signum())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::DoublePhase { .. } => "double-phase",
            Family::BorderlineDoublePhase { .. } => "borderline-double-phase",
            Family::PiecewiseVarExp { .. } => "piecewise-variable-exponent",
            Family::ContinuousVarExp { .. } => "continuous-variable-exponent",
        }
    }
}

/// Cutoff radii of the exponent localizer (continuous variable exponent).
#[derive(Debug, Clone, Copy)]
struct XiRadii {
    c_inner: f64,
    c_outer: f64,
    d_inner: f64,
    d_outer: f64,
}

/// An integrand family bound to an instance geometry.
#[derive(Debug, Clone)]
pub struct Integrand {
    pub fields: Fields,
    pub family: Family,
    ramp_a: ConeRamp,
    xi: Option<XiRadii>,
}

impl Integrand {
    pub fn new(fields: Fields, family: Family) -> Result<Integrand> {
        match family {
            Family::DoublePhase { p, q, alpha } => {
                if !(p > 1.0) || !(q > p) || !(alpha >= 0.0) {
                    return Err(Error::InvalidParam(format!(
                        "double phase needs 1 < p < q and alpha >= 0, got p = {p}, q = {q}, alpha = {alpha}"
                    )));
                }
            }
            Family::BorderlineDoublePhase { p0, alpha, beta, kappa, epsilon } => {
                if !(p0 > 1.0) || !(kappa >= 0.0) || !(epsilon > 0.0 && epsilon <= 1.0) {
                    return Err(Error::InvalidParam(format!(
                        "borderline double phase needs p0 > 1, kappa >= 0, epsilon in (0, 1], got p0 = {p0}, kappa = {kappa}, epsilon = {epsilon}"
                    )));
                }
                validate_slope_monotone("borderline base term", |t| {
                    borderline_slope(p0, beta, 0.0, 1.0, 0.0, t)
                })?;
                validate_slope_monotone("borderline weighted term", |t| {
                    borderline_slope(p0, 0.0, alpha, epsilon, 1.0, t) - borderline_slope(p0, 0.0, 0.0, 1.0, 0.0, t)
                })?;
            }
            Family::PiecewiseVarExp { p_minus, p_plus } => {
                if !(p_minus > 1.0) || !(p_plus >= p_minus) {
                    return Err(Error::InvalidParam(format!(
                        "piecewise exponent needs 1 < p_minus <= p_plus, got p_minus = {p_minus}, p_plus = {p_plus}"
                    )));
                }
            }
            Family::ContinuousVarExp { p0, kappa } => {
                if !(p0 > 1.0) || !(kappa > 0.0) {
                    return Err(Error::InvalidParam(format!(
                        "continuous exponent needs p0 > 1 and kappa > 0, got p0 = {p0}, kappa = {kappa}"
                    )));
                }
            }
        }
        let xi = match family {
            Family::ContinuousVarExp { p0, kappa } => {
                Some(Self::xi_radii(&fields, p0, kappa)?)
            }
            _ => None,
        };
        Ok(Integrand { fields, family, ramp_a: ConeRamp::new(0.5, 2.0)?, xi })
    }

    /// Solve `sigma(c) = (p0 - 1)/10` for the outer cutoff radius in the
    /// complement coordinate; the localizer must vanish beyond it.
    fn xi_radii(fields: &Fields, p0: f64, kappa: f64) -> Result<XiRadii> {
        let thresh = (p0 - 1.0) * XI_LEVEL;
        // Cap keeps the localizer compactly supported in the domain even
        // when the modulus never reaches the threshold.
        let cap = 0.45;
        let c_outer = if sigma(kappa, cap) <= thresh {
            cap
        } else if sigma(kappa, 1e-200) >= thresh {
            return Err(Error::InvalidParam(format!(
                "exponent localizer support underflows: sigma stays above {thresh:.3e} down to 1e-200 (kappa = {kappa})"
            )));
        } else {
            // Bisect in log space; sigma is increasing.
            let (mut lo, mut hi) = (1e-200f64, cap);
            for _ in 0..400 {
                let mid = (lo.ln() + hi.ln()).mul_add(0.5, 0.0).exp();
                if mid <= lo || mid >= hi {
                    break;
                }
                if sigma(kappa, mid) > thresh {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            lo
        };
        // One dyadic shell of transition; honor an early-generation inner
        // neighborhood only when it fits under the threshold radius.
        let mut c_inner = 0.5 * c_outer;
        if let Some(spec) = &fields.geo.cantor {
            let l4 = spec.len(4);
            if l4 < c_outer {
                c_inner = c_inner.max(l4);
            }
        }
        Ok(XiRadii {
            c_inner,
            c_outer,
            d_inner: 0.5 * XI_BLOCK_OUTER,
            d_outer: XI_BLOCK_OUTER,
        })
    }

    /// The pair every pointwise quantity depends on position through:
    /// block distance of the instance split and complement magnitude.
    fn dist_c(&self, x: &[f64]) -> (f64, f64) {
        (
            self.fields.geo.surrogate_dist(self.fields.m, x),
            self.fields.geo.complement_mag(x),
        )
    }

    /// Weight-side cone indicator: 1 on the side of the split carrying the
    /// weight `b`, 0 on the gradient side, ramped in between.
    pub fn weight_side(&self, x: &[f64]) -> f64 {
        let (dist, c) = self.dist_c(x);
        self.weight_side_dc(dist, c)
    }

    /// [`Self::weight_side`] from the block distance and complement
    /// magnitude alone; reduced integrators call these `_dc` variants on
    /// cross-section coordinates directly.
    pub fn weight_side_dc(&self, dist: f64, c: f64) -> f64 {
        let rho = self.fields.rho_dc(&self.ramp_a, dist, c);
        match self.fields.geo.regime {
            Regime::SubDimensional | Regime::Matching => rho,
            Regime::SuperDimensional => 1.0 - rho,
        }
    }

    /// Phase weight `a(x)`: `c^alpha` (double phase) or
    /// `log^{-kappa}(e + 1/c)` (borderline) on the weight-side cone, 0 on
    /// the gradient side; `c` is the complement coordinate magnitude.
    pub fn weight_a(&self, x: &[f64]) -> Result<f64> {
        let (dist, c) = self.dist_c(x);
        self.weight_a_dc(dist, c)
    }

    /// [`Self::weight_a`] from the block distance and complement magnitude.
    pub fn weight_a_dc(&self, dist: f64, c: f64) -> Result<f64> {
        match self.family {
            Family::DoublePhase { alpha, .. } => {
                Ok(c.powf(alpha) * self.weight_side_dc(dist, c))
            }
            Family::BorderlineDoublePhase { kappa, .. } => {
                let a0 = (E + 1.0 / c).ln().powf(-kappa);
                Ok(a0 * self.weight_side_dc(dist, c))
            }
            _ => Err(Error::InvalidParam(format!(
                "weight a is defined for the phase families, not {}",
                self.family.name()
            ))),
        }
    }

    /// Localizer of the exponent perturbation: 1 near the contact set,
    /// 0 where the modulus exceeds its admissible level or far from the
    /// set in the block direction. Identically 1 for families without one.
    pub fn exponent_localizer(&self, x: &[f64]) -> f64 {
        let (dist, c) = self.dist_c(x);
        self.exponent_localizer_dc(dist, c)
    }

    /// [`Self::exponent_localizer`] from the block distance and complement
    /// magnitude.
    pub fn exponent_localizer_dc(&self, dist: f64, c: f64) -> f64 {
        let Some(r) = self.xi else { return 1.0 };
        ramp_down(c, r.c_inner, r.c_outer) * ramp_down(dist, r.d_inner, r.d_outer)
    }

    /// Cutoff radii of the exponent localizer when the family carries one,
    /// as `(c_inner, c_outer, d_inner, d_outer)`; quadrature uses them as
    /// panel breakpoints.
    pub fn exponent_localizer_radii(&self) -> Option<(f64, f64, f64, f64)> {
        self.xi
            .map(|r| (r.c_inner, r.c_outer, r.d_inner, r.d_outer))
    }

    /// Variable exponent `p(x)`.
    pub fn exponent_p(&self, x: &[f64]) -> Result<f64> {
        let (dist, c) = self.dist_c(x);
        self.exponent_p_dc(dist, c)
    }

    /// [`Self::exponent_p`] from the block distance and complement
    /// magnitude.
    pub fn exponent_p_dc(&self, dist: f64, c: f64) -> Result<f64> {
        match self.family {
            Family::PiecewiseVarExp { p_minus, p_plus } => {
                let minus_side = match self.fields.geo.regime {
                    Regime::SubDimensional | Regime::Matching => c <= dist,
                    Regime::SuperDimensional => dist <= c,
                };
                Ok(if minus_side { p_minus } else { p_plus })
            }
            Family::ContinuousVarExp { p0, kappa } => {
                let s = sigma(kappa, c);
                let xi = self.exponent_localizer_dc(dist, c);
                let bside = self.weight_side_dc(dist, c);
                Ok(xi * ((p0 - s) * (1.0 - bside) + (p0 + s) * bside) + (1.0 - xi) * p0)
            }
            _ => Err(Error::InvalidParam(format!(
                "variable exponent is defined for the exponent families, not {}",
                self.family.name()
            ))),
        }
    }

    /// Integrand value `phi(x, t)`, `t >= 0`.
    pub fn phi(&self, x: &[f64], t: f64) -> f64 {
        let (dist, c) = self.dist_c(x);
        self.phi_dc(dist, c, t)
    }

    /// [`Self::phi`] from the block distance and complement magnitude.
    pub fn phi_dc(&self, dist: f64, c: f64, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match self.family {
            Family::DoublePhase { p, q, .. } => {
                phase_value(p, q, self.weight_a_dc(dist, c).expect("phase family"), t)
            }
            Family::BorderlineDoublePhase { p0, alpha, beta, epsilon, .. } => {
                let a = self.weight_a_dc(dist, c).expect("phase family");
                borderline_value(p0, beta, alpha, epsilon, a, t)
            }
            _ => power_value(self.exponent_p_dc(dist, c).expect("exponent family"), t),
        }
    }

    /// Derivative `d phi / dt`; nondecreasing in `t` by construction or by
    /// the convexity validation at build time.
    pub fn phi_t(&self, x: &[f64], t: f64) -> f64 {
        let (dist, c) = self.dist_c(x);
        self.phi_t_dc(dist, c, t)
    }

    /// [`Self::phi_t`] from the block distance and complement magnitude.
    pub fn phi_t_dc(&self, dist: f64, c: f64, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match self.family {
            Family::DoublePhase { p, q, .. } => {
                phase_slope(p, q, self.weight_a_dc(dist, c).expect("phase family"), t)
            }
            Family::BorderlineDoublePhase { p0, alpha, beta, epsilon, .. } => {
                let a = self.weight_a_dc(dist, c).expect("phase family");
                borderline_slope(p0, beta, alpha, epsilon, a, t)
            }
            _ => {
                let p = self.exponent_p_dc(dist, c).expect("exponent family");
                t.powf(p - 1.0)
            }
        }
    }

    /// Convex conjugate `phi*(x, s) = sup_t (s t - phi(x, t))`, `s >= 0`.
    pub fn phi_star(&self, x: &[f64], s: f64) -> Result<f64> {
        self.phi_star_argmax(x, s).map(|(v, _)| v)
    }

    /// Conjugate together with its maximizer (the derivative of `phi*`).
    pub fn phi_star_argmax(&self, x: &[f64], s: f64) -> Result<(f64, f64)> {
        let (dist, c) = self.dist_c(x);
        self.phi_star_argmax_dc(dist, c, s)
    }

    /// [`Self::phi_star`] from the block distance and complement magnitude.
    pub fn phi_star_dc(&self, dist: f64, c: f64, s: f64) -> Result<f64> {
        self.phi_star_argmax_dc(dist, c, s).map(|(v, _)| v)
    }

    /// [`Self::phi_star_argmax`] from the block distance and complement
    /// magnitude.
    pub fn phi_star_argmax_dc(&self, dist: f64, c: f64, s: f64) -> Result<(f64, f64)> {
        if s <= 0.0 {
            return Ok((0.0, 0.0));
        }
        let hi0 = s.max(1.0).powf(self.family.conjugate_seed_exponent());
        match self.family {
            Family::DoublePhase { p, q, .. } => {
                let a = self.weight_a_dc(dist, c)?;
                if a == 0.0 {
                    Ok(power_conjugate(p, s))
                } else {
                    legendre_transform(
                        |t| phase_value(p, q, a, t),
                        |t| phase_slope(p, q, a, t),
                        s,
                        hi0,
                    )
                }
            }
            Family::BorderlineDoublePhase { p0, alpha, beta, epsilon, .. } => {
                let a = self.weight_a_dc(dist, c)?;
                legendre_transform(
                    |t| borderline_value(p0, beta, alpha, epsilon, a, t),
                    |t| borderline_slope(p0, beta, alpha, epsilon, a, t),
                    s,
                    hi0,
                )
            }
            _ => Ok(power_conjugate(self.exponent_p_dc(dist, c)?, s)),
        }
    }

    /// Check the instance against the admissibility window of its family's
    /// irregularity theorem. Returns the satisfied inequalities, or an error
    /// naming the violated one.
    pub fn validate_thresholds(&self) -> Result<ThresholdReport> {
        let geo = &self.fields.geo;
        let d = geo.d as f64;
        let p0 = geo.p0;
        let nu = geo.nu;
        let gnu = geo.gamma * nu;
        let meager = geo.frac_dim == 0.0;
        let mut ok: Vec<String> = Vec::new();
        if geo.regime == Regime::Matching {
            return Err(Error::Unsupported(
                "threshold certification covers the sub/super constructions; the matching regime instance is illustrative only".into(),
            ));
        }
        let sub = geo.regime == Regime::SubDimensional;
        match self.family {
            Family::DoublePhase { p, q, alpha } => {
                if !(alpha > 0.0) {
                    return Err(Error::InvalidParam(format!(
                        "double phase window needs alpha > 0, got alpha = {alpha}"
                    )));
                }
                ok.push(format!("alpha > 0 (alpha = {alpha})"));
                if p > p0 + 1e-12 {
                    return Err(Error::InvalidParam(format!(
                        "double phase window needs p <= p0: p = {p}, p0 = {p0}"
                    )));
                }
                ok.push(format!("p <= p0 (p = {p}, p0 = {p0})"));
                let bound = if sub { p0 + alpha } else { p0 + alpha * (p0 - 1.0) / (d - 1.0) };
                if !(q > bound) {
                    return Err(Error::InvalidParam(format!(
                        "double phase window needs q > p + alpha * max(1, (p-1)/(d-1)) = {bound}, got q = {q}"
                    )));
                }
                ok.push(format!("q > p + alpha * max(1, (p-1)/(d-1)) = {bound} (q = {q})"));
                if (p - p0).abs() <= 1e-12 {
                    if sub {
                        if !(gnu < -1.0) {
                            return Err(Error::InvalidParam(format!(
                                "double phase with p = p0 needs gamma * nu < -1, got {gnu}"
                            )));
                        }
                        ok.push(format!("gamma * nu < -1 (gamma * nu = {gnu})"));
                    } else {
                        if !(gnu * (p0 - 1.0) > 1.0) {
                            return Err(Error::InvalidParam(format!(
                                "double phase with p = p0 needs gamma * nu * (p0 - 1) > 1, got {}",
                                gnu * (p0 - 1.0)
                            )));
                        }
                        ok.push(format!(
                            "gamma * nu * (p0 - 1) > 1 (value = {})",
                            gnu * (p0 - 1.0)
                        ));
                    }
                }
            }
            Family::BorderlineDoublePhase { p0: fp0, alpha, beta, kappa, .. } => {
                if (fp0 - p0).abs() > 1e-9 {
                    return Err(Error::InvalidParam(format!(
                        "borderline growth exponent must match the geometry: family p0 = {fp0}, geometry p0 = {p0}"
                    )));
                }
                if !(alpha + beta > p0 + kappa) {
                    return Err(Error::InvalidParam(format!(
                        "borderline window needs alpha + beta > p0 + kappa: {} vs {}",
                        alpha + beta,
                        p0 + kappa
                    )));
                }
                ok.push(format!(
                    "alpha + beta > p0 + kappa ({} > {})",
                    alpha + beta,
                    p0 + kappa
                ));
                if meager {
                    if sub && !(beta > 1.0) {
                        return Err(Error::InvalidParam(format!(
                            "borderline window at p0 = d needs beta > 1, got beta = {beta}"
                        )));
                    }
                    if !sub && !(alpha > p0 + kappa - 1.0) {
                        return Err(Error::InvalidParam(format!(
                            "borderline window at p0 = d needs alpha > p0 + kappa - 1, got alpha = {alpha}"
                        )));
                    }
                    if !(geo.gamma > 0.0) {
                        return Err(Error::InvalidParam(format!(
                            "borderline window at p0 = d needs gamma > 0, got gamma = {}",
                            geo.gamma
                        )));
                    }
                    ok.push("critical-growth side conditions (beta / alpha / gamma sign)".into());
                }
                let (lo, hi, val, label) = if sub {
                    (kappa - alpha + p0 - 1.0, beta - 1.0, gnu, "gamma * nu")
                } else {
                    (1.0 - beta, alpha + 1.0 - p0 - kappa, gnu * (p0 - 1.0), "gamma * nu * (p0 - 1)")
                };
                if !(val > lo && val < hi) {
                    return Err(Error::InvalidParam(format!(
                        "borderline window needs {label} in ({lo}, {hi}), got {val}"
                    )));
                }
                ok.push(format!("{label} in ({lo}, {hi}) (value = {val})"));
            }
            Family::PiecewiseVarExp { p_minus, p_plus } => {
                if !(p_minus > 1.0 && p_minus < p_plus) {
                    return Err(Error::InvalidParam(format!(
                        "piecewise window needs 1 < p_minus < p_plus, got {p_minus}, {p_plus}"
                    )));
                }
                ok.push(format!("1 < p_minus < p_plus ({p_minus} < {p_plus})"));
                if !(p_minus <= p0 + 1e-12 && p0 < p_plus) {
                    return Err(Error::InvalidParam(format!(
                        "piecewise window needs p_minus <= p0 < p_plus, got p_minus = {p_minus}, p0 = {p0}, p_plus = {p_plus}"
                    )));
                }
                ok.push(format!("p_minus <= p0 < p_plus (p0 = {p0})"));
                if (p_minus - p0).abs() <= 1e-12 {
                    if sub {
                        if !(gnu < -1.0) {
                            return Err(Error::InvalidParam(format!(
                                "piecewise with p_minus = p0 needs gamma * nu < -1, got {gnu}"
                            )));
                        }
                        ok.push(format!("gamma * nu < -1 (gamma * nu = {gnu})"));
                    } else {
                        if !(gnu * (p0 - 1.0) > 1.0) {
                            return Err(Error::InvalidParam(format!(
                                "piecewise with p_minus = p0 needs gamma * nu * (p0 - 1) > 1, got {}",
                                gnu * (p0 - 1.0)
                            )));
                        }
                        ok.push(format!(
                            "gamma * nu * (p0 - 1) > 1 (value = {})",
                            gnu * (p0 - 1.0)
                        ));
                    }
                }
            }
            Family::ContinuousVarExp { p0: fp0, kappa } => {
                if (fp0 - p0).abs() > 1e-9 {
                    return Err(Error::InvalidParam(format!(
                        "continuous-exponent growth must match the geometry: family p0 = {fp0}, geometry p0 = {p0}"
                    )));
                }
                if !(kappa > 0.5 * p0) {
                    return Err(Error::InvalidParam(format!(
                        "continuous-exponent window needs kappa > p0 / 2: kappa = {kappa}, p0/2 = {}",
                        0.5 * p0
                    )));
                }
                ok.push(format!("kappa > p0 / 2 ({kappa} > {})", 0.5 * p0));
                if meager && !sub && !(kappa > d - 1.0) {
                    return Err(Error::InvalidParam(format!(
                        "continuous-exponent window at p0 = d needs kappa > d - 1, got kappa = {kappa}"
                    )));
                }
                let (lo, hi) = if sub {
                    (p0 - 1.0 - kappa, kappa - 1.0)
                } else {
                    let frd = geo.frac_dim;
                    (
                        (1.0 - (1.0 - frd) * kappa) / (p0 - 1.0),
                        -1.0 + kappa * (d - 1.0) / ((p0 - 1.0) * (p0 - 1.0)),
                    )
                };
                if !(gnu > lo && gnu < hi) {
                    return Err(Error::InvalidParam(format!(
                        "continuous-exponent window needs gamma * nu in ({lo}, {hi}), got {gnu}"
                    )));
                }
                ok.push(format!("gamma * nu in ({lo}, {hi}) (value = {gnu})"));
                if meager && !(geo.gamma > 0.0) {
                    return Err(Error::InvalidParam(format!(
                        "continuous-exponent window at p0 = d needs gamma > 0, got gamma = {}",
                        geo.gamma
                    )));
                }
            }
        }
        Ok(ThresholdReport { family: self.family.name(), satisfied: ok })
    }
}

/// Outcome of `validate_thresholds`: the family tag and every inequality
/// that was checked and holds.
#[derive(Debug, Clone)]
pub struct ThresholdReport {
    pub family: &'static str,
    pub satisfied: Vec<String>,
}

fn ramp_down(v: f64, lo: f64, hi: f64) -> f64 {
    if v <= lo {
        1.0
    } else if v >= hi {
        0.0
    } else {
        1.0 - smoothstep5((v - lo) / (hi - lo))
    }
}

// --- power-log test functions -------------------------------------------------

/// Test function `Psi(t) = t^{p0} log^{delta}(e + t)` with its conjugate,
/// used to probe higher integrability of minimizers.
#[derive(Debug, Clone, Copy)]
pub struct TestOrlicz {
    pub p0: f64,
    pub delta: f64,
}

impl TestOrlicz {
    pub fn new(p0: f64, delta: f64) -> Result<TestOrlicz> {
        if !(p0 > 1.0) {
            return Err(Error::InvalidParam(format!(
                "test function needs p0 > 1, got {p0}"
            )));
        }
        validate_slope_monotone("power-log test function", |t| {
            TestOrlicz { p0, delta }.slope(t)
        })?;
        Ok(TestOrlicz { p0, delta })
    }

    pub fn value(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        t.powf(self.p0) * (E + t).ln().powf(self.delta)
    }

    pub fn slope(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let l = (E + t).ln();
        t.powf(self.p0 - 1.0) * l.powf(self.delta - 1.0) * (self.p0 * l + self.delta * t / (E + t))
    }

    pub fn conjugate(&self, s: f64) -> Result<f64> {
        let hi0 = s.max(1.0).powf(conjugate_exponent(self.p0));
        legendre_transform(|t| self.value(t), |t| self.slope(t), s, hi0).map(|(v, _)| v)
    }

    /// Closed-form comparison bound `s^{p0'} log^{delta/(1-p0)}(e + s)` for
    /// the conjugate's growth.
    pub fn conjugate_bound(&self, s: f64) -> f64 {
        let pc = conjugate_exponent(self.p0);
        s.powf(pc) * (E + s).ln().powf(self.delta / (1.0 - self.p0))
    }
}
