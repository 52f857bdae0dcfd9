//! Competitor fields: the bounded scalar `u` with a jump across the
//! contact set, its gradient, the singular weight `b`, smooth cone
//! indicators, and the geometric regime data tying ambient dimension and
//! growth exponent to a Cantor construction.
//!
//! All evaluators are pure functions of immutable data and safe to call
//! from parallel workers.

use crate::cantor::{CantorSpec, Norm, SetKind};
use crate::{Error, Result};

// --- smooth ramp -----------------------------------------------------------

// The ramp rises on [1/4, 1/2] with a trapezoidal derivative profile:
// theta' climbs to its plateau through a quintic smoothstep over a width
// RAMP_EDGE, stays flat, and descends symmetrically. The plateau height
// 1/(RAMP_WIDTH - RAMP_EDGE) = 16/3 keeps the derivative below 6 while
// integrating to exactly 1. (A plain quintic smoothstep across the whole
// window would peak at 7.5.) theta has three continuous derivatives,
// enough for the interpolation estimates used downstream.
const RAMP_LO: f64 = 0.25;
const RAMP_HI: f64 = 0.5;
const RAMP_EDGE: f64 = 1.0 / 16.0;
const RAMP_PLATEAU: f64 = 16.0 / 3.0;

/// Quintic smoothstep on [0, 1].
pub(crate) fn smoothstep5(y: f64) -> f64 {
    y * y * y * (10.0 - 15.0 * y + 6.0 * y * y)
}

/// Integral of the quintic smoothstep from 0 to `y`; equals 1/2 at 1.
fn smoothstep5_int(y: f64) -> f64 {
    let y4 = y * y * y * y;
    y4 * (2.5 - 3.0 * y + y * y)
}

/// Monotone ramp: 0 for `t <= 1/4`, 1 for `t >= 1/2`, `C^3` in between,
/// with `max |theta'| = 16/3 < 6`.
pub fn theta(t: f64) -> f64 {
    if t <= RAMP_LO {
        return 0.0;
    }
    if t >= RAMP_HI {
        return 1.0;
    }
    if t <= RAMP_LO + RAMP_EDGE {
        RAMP_PLATEAU * RAMP_EDGE * smoothstep5_int((t - RAMP_LO) / RAMP_EDGE)
    } else if t < RAMP_HI - RAMP_EDGE {
        RAMP_PLATEAU * RAMP_EDGE * 0.5 + RAMP_PLATEAU * (t - RAMP_LO - RAMP_EDGE)
    } else {
        1.0 - RAMP_PLATEAU * RAMP_EDGE * smoothstep5_int((RAMP_HI - t) / RAMP_EDGE)
    }
}

/// Derivative of `theta`; supported in [1/4, 1/2].
pub fn theta_prime(t: f64) -> f64 {
    if t <= RAMP_LO || t >= RAMP_HI {
        return 0.0;
    }
    if t <= RAMP_LO + RAMP_EDGE {
        RAMP_PLATEAU * smoothstep5((t - RAMP_LO) / RAMP_EDGE)
    } else if t < RAMP_HI - RAMP_EDGE {
        RAMP_PLATEAU
    } else {
        RAMP_PLATEAU * smoothstep5((RAMP_HI - t) / RAMP_EDGE)
    }
}

/// Largest value of `|theta'|`.
pub const THETA_PRIME_MAX: f64 = RAMP_PLATEAU;

// --- cone indicator --------------------------------------------------------

/// Smooth cone indicator in the ratio `zeta = D(x) / |x_hat|`: equals 1
/// where `zeta <= tau1`, 0 where `zeta >= tau2`. Realized as
/// `theta(a/zeta + c)`, the Moebius map taking `[tau1, tau2]` onto the
/// ramp window `[1/2, 1/4]`; for the pair (2, 4) this reduces to
/// `theta(1/zeta)`, the same profile the competitor itself uses.
#[derive(Debug, Clone, Copy)]
pub struct ConeRamp {
    pub tau1: f64,
    pub tau2: f64,
    coef_a: f64,
    coef_c: f64,
}

impl ConeRamp {
    pub fn new(tau1: f64, tau2: f64) -> Result<ConeRamp> {
        if !(0.25..=4.0).contains(&tau1)
            || !(0.25..=4.0).contains(&tau2)
            || tau1 >= tau2
            || tau2 - tau1 < 0.25
        {
            return Err(Error::InvalidParam(format!(
                "cone thresholds need 1/4 <= tau1 < tau2 <= 4 and tau2 - tau1 >= 1/4, got ({tau1}, {tau2})"
            )));
        }
        let coef_a = tau1 * tau2 / (4.0 * (tau2 - tau1));
        let coef_c = 0.25 - coef_a / tau2;
        Ok(ConeRamp { tau1, tau2, coef_a, coef_c })
    }

    /// Indicator value at ratio `zeta >= 0`.
    pub fn value(&self, zeta: f64) -> f64 {
        if zeta <= 0.0 {
            return 1.0;
        }
        theta(self.coef_a / zeta + self.coef_c)
    }

    /// d/d(zeta) of the indicator.
    pub fn dvalue(&self, zeta: f64) -> f64 {
        if zeta <= 0.0 {
            return 0.0;
        }
        -theta_prime(self.coef_a / zeta + self.coef_c) * self.coef_a / (zeta * zeta)
    }

    /// Reported Lipschitz scale: `|grad rho| <= c_rho / |x_hat|` on the
    /// transition shell (the ratio gradient satisfies
    /// `|grad zeta| <= sqrt(1 + zeta^2) / |x_hat|`).
    pub fn c_rho(&self) -> f64 {
        THETA_PRIME_MAX * self.coef_a / (self.tau1 * self.tau1)
            * (1.0 + self.tau1 * self.tau1).sqrt()
    }
}

// --- geometric regimes -----------------------------------------------------

/// How the growth exponent `p0` sits relative to the ambient dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `1 < p0 <= d`: contact set is a Cantor product in the hyperplane
    /// `x_d = 0`, dimension `d - p0`.
    SubDimensional,
    /// `p0 = d`: contact set degenerates to the origin.
    Matching,
    /// `p0 >= d`: contact set is a Cantor set on the `x_d`-axis,
    /// dimension `(p0 - d)/(p0 - 1)`.
    SuperDimensional,
}

/// Ambient data of an instance: dimension, growth exponent, the derived
/// fractal parameters, and the Cantor construction they select.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub regime: Regime,
    pub d: u32,
    pub p0: f64,
    /// Cantor length-law log correction (`gamma`).
    pub gamma: f64,
    /// Fractal dimension of the contact set.
    pub frac_dim: f64,
    /// Log-exponent scale entering the weight `b`.
    pub nu: f64,
    /// The one-dimensional construction (absent in the matching regime).
    pub cantor: Option<CantorSpec>,
    /// Norm used for distances to the Cantor block.
    pub norm: Norm,
}

impl Geometry {
    pub fn new(regime: Regime, d: u32, p0: f64, gamma: f64) -> Result<Geometry> {
        if d < 2 {
            return Err(Error::InvalidParam(format!("dimension must be >= 2, got {d}")));
        }
        if p0 <= 1.0 {
            return Err(Error::InvalidParam(format!("growth exponent must exceed 1, got {p0}")));
        }
        let df = d as f64;
        let (frac_dim, nu, cantor) = match regime {
            Regime::SubDimensional => {
                if p0 > df {
                    return Err(Error::InvalidParam(format!(
                        "sub-dimensional regime needs p0 <= d, got p0 = {p0}, d = {d}"
                    )));
                }
                let frd = df - p0;
                let power = d - 1;
                if frd > 0.0 {
                    let lambda = ((1.0 - df) / frd * 2f64.ln()).exp();
                    let spec = CantorSpec::build(SetKind::LambdaGamma, lambda, gamma, power)?;
                    (frd, frd, Some(spec))
                } else {
                    let spec = CantorSpec::build(SetKind::Meager, 0.0, gamma, power)?;
                    (0.0, df - 1.0, Some(spec))
                }
            }
            Regime::Matching => {
                if p0 != df {
                    return Err(Error::InvalidParam(format!(
                        "matching regime needs p0 = d, got p0 = {p0}, d = {d}"
                    )));
                }
                (0.0, 0.0, None)
            }
            Regime::SuperDimensional => {
                if p0 < df {
                    return Err(Error::InvalidParam(format!(
                        "super-dimensional regime needs p0 >= d, got p0 = {p0}, d = {d}"
                    )));
                }
                let frd = (p0 - df) / (p0 - 1.0);
                if frd > 0.0 {
                    let lambda = (-1.0 / frd * 2f64.ln()).exp();
                    let spec = CantorSpec::build(SetKind::LambdaGamma, lambda, gamma, 1)?;
                    (frd, frd, Some(spec))
                } else {
                    let spec = CantorSpec::build(SetKind::Meager, 0.0, gamma, 1)?;
                    (0.0, 1.0, Some(spec))
                }
            }
        };
        Ok(Geometry { regime, d, p0, gamma, frac_dim, nu, cantor, norm: Norm::Euclid })
    }

    /// Distance surrogate to the Cantor block at generation `m`:
    /// `D(x-bar)` for sub, `|x-bar|` for matching, `D(x_d)` for super.
    pub fn surrogate_dist(&self, m: u32, x: &[f64]) -> f64 {
        let d = self.d as usize;
        match self.regime {
            Regime::SubDimensional => self
                .cantor
                .as_ref()
                .expect("sub-dimensional geometry carries a construction")
                .dist(m, &x[..d - 1], self.norm),
            Regime::Matching => norm2(&x[..d - 1]),
            Regime::SuperDimensional => self
                .cantor
                .as_ref()
                .expect("super-dimensional geometry carries a construction")
                .dist1(m, x[d - 1]),
        }
    }

    /// Magnitude of the complementary coordinate block: `|x_d|` for
    /// sub/matching, `|x-bar|` for super.
    pub fn complement_mag(&self, x: &[f64]) -> f64 {
        let d = self.d as usize;
        match self.regime {
            Regime::SubDimensional | Regime::Matching => x[d - 1].abs(),
            Regime::SuperDimensional => norm2(&x[..d - 1]),
        }
    }

    /// True on the contact set (up to the generation-`m` surrogate).
    pub fn on_contact(&self, m: u32, x: &[f64]) -> bool {
        self.surrogate_dist(m, x) == 0.0 && self.complement_mag(x) == 0.0
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

// --- competitor fields -----------------------------------------------------

/// Support classification of a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportFlags {
    /// Inside the (closed) region that can carry `grad u`.
    pub in_supp_grad_u: bool,
    /// Inside the support of the weight `b`.
    pub in_supp_b: bool,
    /// Strictly inside the ramp transition shell.
    pub in_transition: bool,
}

/// Pointwise evaluators for the competitor and its companions at a fixed
/// construction generation.
#[derive(Debug, Clone)]
pub struct Fields {
    pub geo: Geometry,
    /// Construction generation used for all distance/measure surrogates.
    pub m: u32,
    /// Gauss order for the measure convolution in the super regime.
    pub conv_gauss: usize,
}

impl Fields {
    pub fn new(geo: Geometry, m: u32) -> Fields {
        Fields { geo, m, conv_gauss: 8 }
    }

    /// The matching-regime profile: `sgn(x_d) theta(|x_d| / r) / 2` for a
    /// complementary magnitude `r`. Shared by every regime: sub and
    /// matching compose it with their distance surrogate, super averages
    /// it against the construction measure.
    pub fn profile(&self, r: f64, xd: f64) -> f64 {
        0.5 * sign(xd) * theta(xd.abs() / r)
    }

    /// Competitor value; odd in `x_d`, bounded by 1/2. Defined a.e. --
    /// on the contact-set surrogate it returns 0 (the symmetric value).
    pub fn u(&self, x: &[f64]) -> f64 {
        let d = self.geo.d as usize;
        match self.geo.regime {
            Regime::SubDimensional | Regime::Matching => {
                let dist = self.geo.surrogate_dist(self.m, x);
                let w = x[d - 1];
                if w == 0.0 {
                    return 0.0;
                }
                if dist == 0.0 {
                    return 0.5 * sign(w);
                }
                self.profile(dist, w)
            }
            Regime::SuperDimensional => {
                let r = norm2(&x[..d - 1]);
                self.convolved_profile(r, x[d - 1])
            }
        }
    }

    /// Average of the profile against the 1D construction measure:
    /// saturated tails are exact ray masses, the two ramp windows are
    /// integrated by quadrature.
    fn convolved_profile(&self, r: f64, xd: f64) -> f64 {
        let spec = self.geo.cantor.as_ref().expect("super-dimensional construction");
        if r == 0.0 {
            // Profile degenerates to a sign step.
            return 0.5 * spec.measure_interval1(self.m, -1.0, xd)
                - 0.5 * spec.measure_interval1(self.m, xd, 1.0);
        }
        let plus = spec.measure_interval1(self.m, -1.0, xd - 0.5 * r);
        let minus = spec.measure_interval1(self.m, xd + 0.5 * r, 1.0);
        let window = |lo: f64, hi: f64| {
            spec.integrate_mu1(self.m, lo, hi, |y| self.profile(r, xd - y), self.conv_gauss)
        };
        0.5 * (plus - minus)
            + window(xd - 0.5 * r, xd - 0.25 * r)
            + window(xd + 0.25 * r, xd + 0.5 * r)
    }

    /// Gradient of the competitor (a.e.; zero vector returned at kink
    /// points of the distance surrogate outside the transition shell,
    /// where it is exact anyway).
    pub fn grad_u(&self, x: &[f64], out: &mut [f64]) {
        let d = self.geo.d as usize;
        out[..d].fill(0.0);
        match self.geo.regime {
            Regime::SubDimensional | Regime::Matching => {
                let dist = self.geo.surrogate_dist(self.m, x);
                let w = x[d - 1].abs();
                if dist <= 0.0 {
                    return;
                }
                let t = w / dist;
                let tp = theta_prime(t);
                if tp == 0.0 {
                    return;
                }
                let sgn = sign(x[d - 1]);
                // d(theta(w/D))/dx = theta' * (e_d sgn / D - w grad D / D^2)
                out[d - 1] = 0.5 * tp / dist;
                let scale = -0.5 * sgn * tp * w / (dist * dist);
                match self.geo.regime {
                    Regime::Matching => {
                        for i in 0..d - 1 {
                            out[i] = scale * x[i] / dist;
                        }
                    }
                    Regime::SubDimensional => {
                        let spec = self.geo.cantor.as_ref().unwrap();
                        let mut g = vec![0.0; d - 1];
                        spec.dist_grad(self.m, &x[..d - 1], self.geo.norm, &mut g);
                        for i in 0..d - 1 {
                            out[i] = scale * g[i];
                        }
                    }
                    Regime::SuperDimensional => unreachable!(),
                }
            }
            Regime::SuperDimensional => {
                let spec = self.geo.cantor.as_ref().unwrap();
                let r = norm2(&x[..d - 1]);
                if r == 0.0 {
                    return;
                }
                let xd = x[d - 1];
                // d/d(xd): average of theta'(|xd - y|/r)/(2r).
                // d/d(x_i): average of -sgn theta' |xd - y| x_i / (2 r^3).
                let mut dd = 0.0;
                let mut dr = 0.0;
                for (lo, hi) in [(xd - 0.5 * r, xd - 0.25 * r), (xd + 0.25 * r, xd + 0.5 * r)] {
                    dd += spec.integrate_mu1(
                        self.m,
                        lo,
                        hi,
                        |y| 0.5 * theta_prime((xd - y).abs() / r) / r,
                        self.conv_gauss,
                    );
                    dr += spec.integrate_mu1(
                        self.m,
                        lo,
                        hi,
                        |y| {
                            let z = xd - y;
                            -0.5 * sign(z) * theta_prime(z.abs() / r) * z.abs() / (r * r * r)
                        },
                        self.conv_gauss,
                    );
                }
                out[d - 1] = dd;
                for i in 0..d - 1 {
                    out[i] = dr * x[i];
                }
            }
        }
    }

    /// Singular weight: a power of the complementary magnitude with a log
    /// correction, cut to a cone hugging the contact set. Vanishes off
    /// its support; returns 0 on the (measure-zero) contact surrogate.
    pub fn b(&self, x: &[f64]) -> f64 {
        match self.geo.regime {
            Regime::SubDimensional | Regime::Matching => {
                let w = self.geo.complement_mag(x);
                if w == 0.0 {
                    return 0.0;
                }
                let dist = self.geo.surrogate_dist(self.m, x);
                if dist > 0.5 * w {
                    return 0.0;
                }
                self.b_magnitude(w)
            }
            Regime::SuperDimensional => {
                let r = self.geo.complement_mag(x);
                if r == 0.0 {
                    return 0.0;
                }
                let dist = self.geo.surrogate_dist(self.m, x);
                if dist < 2.0 * r || dist > 4.0 * r {
                    return 0.0;
                }
                self.b_magnitude(r)
            }
        }
    }

    /// Analytic magnitude of the weight `b` at complement magnitude
    /// `c > 0`, without the cone indicator: a power of `c` with a log
    /// correction (sub/matching) or the pure power `c^{1-d}` (super).
    /// Reduced integrators evaluate this directly on the cone.
    pub fn b_magnitude(&self, c: f64) -> f64 {
        let d = self.geo.d as f64;
        match self.geo.regime {
            Regime::SubDimensional | Regime::Matching => {
                let logf = (std::f64::consts::E + 1.0 / c).ln();
                c.powf(self.geo.frac_dim + 1.0 - d)
                    * logf.powf(-self.geo.gamma * self.geo.nu)
            }
            Regime::SuperDimensional => c.powf(1.0 - d),
        }
    }

    /// Magnitude of `grad u` for the sub/matching profile, expressed
    /// through the block distance `dist` and complement magnitude `c`
    /// alone -- exact wherever the block distance is differentiable
    /// (a.e., unit gradient). Vanishes off the gradient cone. The super
    /// profile admits no such reduction; it returns 0 there.
    pub fn cone_grad_mag(&self, dist: f64, c: f64) -> f64 {
        match self.geo.regime {
            Regime::SubDimensional | Regime::Matching => {
                if dist <= 0.0 {
                    return 0.0;
                }
                let t = c / dist;
                let tp = theta_prime(t);
                if tp == 0.0 {
                    return 0.0;
                }
                0.5 * tp / dist * (1.0 + t * t).sqrt()
            }
            Regime::SuperDimensional => 0.0,
        }
    }

    /// Spatial cone indicator: the ramp evaluated at
    /// `zeta = D(x) / complement magnitude` for this regime's block split.
    pub fn rho(&self, ramp: &ConeRamp, x: &[f64]) -> f64 {
        let c = self.geo.complement_mag(x);
        let dist = self.geo.surrogate_dist(self.m, x);
        self.rho_dc(ramp, dist, c)
    }

    /// The cone indicator from the block distance and complement
    /// magnitude alone.
    pub fn rho_dc(&self, ramp: &ConeRamp, dist: f64, c: f64) -> f64 {
        if c == 0.0 {
            // On the axis the cone degenerates: inside iff on the set.
            return if dist == 0.0 { 1.0 } else { 0.0 };
        }
        ramp.value(dist / c)
    }

    /// Spatial gradient of `rho` (a.e.; zero at ramp-flat points without
    /// touching distance kinks).
    pub fn grad_rho(&self, ramp: &ConeRamp, x: &[f64], out: &mut [f64]) {
        let d = self.geo.d as usize;
        out[..d].fill(0.0);
        let c = self.geo.complement_mag(x);
        if c == 0.0 {
            return;
        }
        let dist = self.geo.surrogate_dist(self.m, x);
        let zeta = dist / c;
        let dv = ramp.dvalue(zeta);
        if dv == 0.0 {
            return;
        }
        // grad zeta = grad D / c  on the block,  -zeta grad c / c  on the
        // complement.
        match self.geo.regime {
            Regime::SubDimensional => {
                let spec = self.geo.cantor.as_ref().unwrap();
                let mut g = vec![0.0; d - 1];
                spec.dist_grad(self.m, &x[..d - 1], self.geo.norm, &mut g);
                for i in 0..d - 1 {
                    out[i] = dv * g[i] / c;
                }
                out[d - 1] = -dv * zeta / c * sign(x[d - 1]);
            }
            Regime::Matching => {
                for i in 0..d - 1 {
                    out[i] = dv * x[i] / (dist * c);
                }
                out[d - 1] = -dv * zeta / c * sign(x[d - 1]);
            }
            Regime::SuperDimensional => {
                let spec = self.geo.cantor.as_ref().unwrap();
                let (_, s) = spec.dist1_grad(self.m, x[d - 1]);
                out[d - 1] = dv * s / c;
                for i in 0..d - 1 {
                    out[i] = -dv * zeta / c * x[i] / c;
                }
            }
        }
    }

    /// Support classification; `in_supp_grad_u` and `in_supp_b` are never
    /// both true off the contact set.
    pub fn predicates(&self, x: &[f64]) -> SupportFlags {
        let dist = self.geo.surrogate_dist(self.m, x);
        let c = self.geo.complement_mag(x);
        match self.geo.regime {
            Regime::SubDimensional | Regime::Matching => SupportFlags {
                in_supp_grad_u: c > 0.0 && dist >= 2.0 * c && dist <= 4.0 * c,
                in_supp_b: c > 0.0 && dist <= 0.5 * c,
                in_transition: c > 0.0 && dist > 2.0 * c && dist < 4.0 * c,
            },
            Regime::SuperDimensional => SupportFlags {
                in_supp_grad_u: c > 0.0 && dist <= 0.5 * c,
                in_supp_b: c > 0.0 && dist >= 2.0 * c && dist <= 4.0 * c,
                in_transition: c > 0.0 && dist > 0.25 * c && dist < 0.5 * c,
            },
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
