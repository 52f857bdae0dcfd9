//! Generalized Cantor sets on [-1/2, 1/2]: interval generations, distance
//! functions, the uniform pre-Cantor measures, neighborhood volumes, and a
//! box-counting dimension estimator.
//!
//! A set is described by the lengths `l_j` of its generation-`j` intervals.
//! Two length laws are supported: `lambda^j * j^gamma` (fractal dimension
//! `k ln 2 / ln(1/lambda)` for products of `k` copies) and the rapidly
//! vanishing `exp(-2^(j/gamma))` whose dimension is zero. Construction
//! keeps the two outer closed subintervals of each interval, so generation
//! `m` has `2^m` intervals of length `l_m`; the admissibility conditions
//! (`l_{j-1} > 2 l_j` and gap monotonicity) are restored, when necessary,
//! by re-indexing the sequence at a shift `j0` and renormalizing `l_{j0}`
//! to 1.

use crate::{Error, Result};
use crate::quad::linfit;

/// Length law of the interval sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    /// `l_j = lambda^j * j^gamma`, `lambda` in (0, 1/2), any real `gamma`.
    LambdaGamma,
    /// `l_j = exp(-2^(j/gamma))`, `gamma > 0`. Dimension zero.
    Meager,
}

/// Norm used for distances to product sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    Euclid,
    Max,
}

/// Maximal generation for materialized interval lists (memory bound;
/// use the lazy accessors beyond it).
pub const MATERIALIZE_CAP: u32 = 24;

/// Window of explicitly checked indices before the monotone tail bound
/// takes over during shift search.
const SHIFT_CHECK_WINDOW: u32 = 3;

/// A validated Cantor set description: all admissibility conditions hold
/// for every generation of the (shifted, renormalized) length sequence.
#[derive(Debug, Clone)]
pub struct CantorSpec {
    pub kind: SetKind,
    pub lambda: f64,
    pub gamma: f64,
    /// Number of factors in the product set (1 on an axis, `d-1` on a
    /// contact hyperplane).
    pub power: u32,
    /// Minimal re-indexing shift under which the conditions hold.
    pub shift: u32,
}

/// Raw (unshifted) length; `j = 0` is 1 by convention.
fn raw_log_len(kind: SetKind, lambda: f64, gamma: f64, j: u32) -> f64 {
    match kind {
        SetKind::LambdaGamma => {
            if j == 0 {
                0.0
            } else {
                j as f64 * lambda.ln() + gamma * (j as f64).ln()
            }
        }
        SetKind::Meager => -((j as f64 / gamma).exp2()),
    }
}

/// Ratio `l_j / l_{j-1}` of the raw sequence, `j >= 1`.
fn raw_ratio(kind: SetKind, lambda: f64, gamma: f64, j: u32) -> f64 {
    (raw_log_len(kind, lambda, gamma, j) - raw_log_len(kind, lambda, gamma, j - 1)).exp()
}

impl CantorSpec {
    /// Validate parameters and find the minimal shift under which the
    /// sequence is admissible at every index: strict halving
    /// `l_{j-1} > 2 l_j` and gap monotonicity
    /// `l_{j+1} > (3 l_j - l_{j-1}) / 2`. A finite window is checked
    /// explicitly; the tail follows from monotonicity of the ratio
    /// sequence, which converges to `lambda` (resp. 0), via an interval
    /// bound on `2 r_{j+1} + 1/r_j > 3`.
    pub fn build(kind: SetKind, lambda: f64, gamma: f64, power: u32) -> Result<CantorSpec> {
        match kind {
            SetKind::LambdaGamma => {
                if !(lambda > 0.0 && lambda < 0.5) {
                    return Err(Error::InvalidParam(format!(
                        "lambda must lie in (0, 1/2), got {lambda}"
                    )));
                }
            }
            SetKind::Meager => {
                if gamma <= 0.0 {
                    return Err(Error::InvalidParam(format!(
                        "meager law needs gamma > 0, got {gamma}"
                    )));
                }
                if lambda != 0.0 {
                    return Err(Error::InvalidParam(format!(
                        "meager law fixes lambda = 0, got {lambda}"
                    )));
                }
            }
        }
        if power == 0 {
            return Err(Error::InvalidParam("power must be >= 1".into()));
        }

        let ratio = |j: u32| raw_ratio(kind, lambda, gamma, j);
        'shift: for j0 in 0..=64u32 {
            // Explicit window: halving for j0+1 ..= j0+W+1, gap
            // monotonicity for m = j0+1 ..= j0+W.
            let hi = j0 + SHIFT_CHECK_WINDOW + 1;
            for j in j0 + 1..=hi {
                if !(ratio(j) < 0.5) {
                    continue 'shift;
                }
            }
            for m in j0 + 1..hi {
                if !(2.0 * ratio(m + 1) + 1.0 / ratio(m) > 3.0) {
                    continue 'shift;
                }
            }
            // Tail: ratios from index `hi` on stay inside [r_lo, r_hi].
            let (r_lo, r_hi) = match kind {
                SetKind::LambdaGamma => {
                    let r = ratio(hi);
                    (r.min(lambda), r.max(lambda))
                }
                SetKind::Meager => (0.0, ratio(hi)),
            };
            if r_hi < 0.5 && 2.0 * r_lo + 1.0 / r_hi > 3.0 {
                return Ok(CantorSpec { kind, lambda, gamma, power, shift: j0 });
            }
        }
        Err(Error::InvalidParam(
            "no admissible shift within 64 indices".into(),
        ))
    }

    /// Normalized interval length of generation `j` (so `len(0) = 1`).
    pub fn len(&self, j: u32) -> f64 {
        if self.shift == 0 && self.gamma == 0.0 && self.kind == SetKind::LambdaGamma {
            // Mantissa-exact for dyadic lambda.
            return self.lambda.powi(j as i32);
        }
        self.log_len(j).exp()
    }

    /// `ln len(j)`; safe where `len` itself would underflow.
    pub fn log_len(&self, j: u32) -> f64 {
        raw_log_len(self.kind, self.lambda, self.gamma, j + self.shift)
            - raw_log_len(self.kind, self.lambda, self.gamma, self.shift)
    }

    /// Gap opened inside a generation-`j` interval when it splits.
    pub fn gap(&self, j: u32) -> f64 {
        self.len(j) - 2.0 * self.len(j + 1)
    }

    /// Largest generation whose length is still a normal f64.
    pub fn max_generation(&self) -> u32 {
        let mut m = 0;
        while m < 200 && self.log_len(m + 1) > f64::MIN_POSITIVE.ln() + 2.0 {
            m += 1;
        }
        m
    }

    fn check_generation(&self, m: u32) -> Result<()> {
        if m > self.max_generation() {
            return Err(Error::Numeric(format!(
                "generation {m} underflows f64 for this length law (max {})",
                self.max_generation()
            )));
        }
        Ok(())
    }

    /// Fractal dimension of the `power`-fold product set: the solution of
    /// `lambda^D = 2^(-power)`. Zero for the meager law.
    pub fn fractal_dim(&self) -> f64 {
        match self.kind {
            SetKind::LambdaGamma => -(self.power as f64) * 2f64.ln() / self.lambda.ln(),
            SetKind::Meager => 0.0,
        }
    }

    /// The `j`-th interval (0-based, left to right) of generation `m`,
    /// computed by descending the construction tree in O(m).
    pub fn interval(&self, m: u32, j: u64) -> (f64, f64) {
        debug_assert!(m < 64 && j < (1u64 << m));
        let mut a = -0.5;
        let mut b = 0.5;
        for g in 0..m {
            let l = self.len(g + 1);
            if (j >> (m - 1 - g)) & 1 == 0 {
                b = a + l;
            } else {
                a = b - l;
            }
        }
        (a, b)
    }

    /// Materialized generation `m`, left to right.
    pub fn intervals(&self, m: u32) -> Result<Vec<(f64, f64)>> {
        self.check_generation(m)?;
        if m > MATERIALIZE_CAP {
            return Err(Error::InvalidParam(format!(
                "generation {m} exceeds materialize cap {MATERIALIZE_CAP}; use lazy access"
            )));
        }
        let lens: Vec<f64> = (0..=m).map(|g| self.len(g)).collect();
        let mut out = Vec::with_capacity(1usize << m);
        let mut stack = vec![(0u32, -0.5f64, 0.5f64)];
        while let Some((g, a, b)) = stack.pop() {
            if g == m {
                out.push((a, b));
                continue;
            }
            let l = lens[(g + 1) as usize];
            // Right child pushed first so intervals pop left-to-right.
            stack.push((g + 1, b - l, b));
            stack.push((g + 1, a, a + l));
        }
        Ok(out)
    }

    /// Distance from `x` to the generation-`m` set, one dimension.
    ///
    /// Descends toward the child whose side of the gap midpoint contains
    /// `x`; by symmetry of the construction the nearest point lies in that
    /// child.
    pub fn dist1(&self, m: u32, x: f64) -> f64 {
        self.dist1_grad(m, x).0
    }

    /// Distance and its derivative sign (-1/0/+1, one dimension).
    pub fn dist1_grad(&self, m: u32, x: f64) -> (f64, f64) {
        let mut a = -0.5;
        let mut b = 0.5;
        for g in 0..m {
            if x <= a {
                return (a - x, -1.0);
            }
            if x >= b {
                return (x - b, 1.0);
            }
            let l = self.len(g + 1);
            if x <= 0.5 * (a + b) {
                b = a + l;
            } else {
                a = b - l;
            }
        }
        if x < a {
            (a - x, -1.0)
        } else if x > b {
            (x - b, 1.0)
        } else {
            (0.0, 0.0)
        }
    }

    /// Distance from a point to the `power`-fold product of the
    /// generation-`m` set.
    pub fn dist(&self, m: u32, x: &[f64], norm: Norm) -> f64 {
        debug_assert_eq!(x.len(), self.power as usize);
        match norm {
            Norm::Max => x
                .iter()
                .map(|&xi| self.dist1(m, xi))
                .fold(0.0, f64::max),
            Norm::Euclid => x
                .iter()
                .map(|&xi| {
                    let d = self.dist1(m, xi);
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Distance and gradient to the product set. Off the medial axis the
    /// gradient is the unit direction away from the nearest point; on the
    /// set itself it is zero.
    pub fn dist_grad(&self, m: u32, x: &[f64], norm: Norm, grad: &mut [f64]) -> f64 {
        let k = x.len();
        match norm {
            Norm::Euclid => {
                let mut d2 = 0.0;
                for i in 0..k {
                    let (d, s) = self.dist1_grad(m, x[i]);
                    grad[i] = s * d;
                    d2 += d * d;
                }
                let d = d2.sqrt();
                if d > 0.0 {
                    for g in grad.iter_mut() {
                        *g /= d;
                    }
                }
                d
            }
            Norm::Max => {
                let mut best = 0.0;
                let mut arg = 0usize;
                let mut sign = 0.0;
                for i in 0..k {
                    let (d, s) = self.dist1_grad(m, x[i]);
                    grad[i] = 0.0;
                    if d > best {
                        best = d;
                        arg = i;
                        sign = s;
                    }
                }
                if best > 0.0 {
                    grad[arg] = sign;
                }
                best
            }
        }
    }

    /// Mass that the uniform generation-`m` measure (total mass 1, one
    /// dimension) gives to `[lo, hi]`. Exact: the recursion only opens
    /// nodes cut by the query boundary.
    pub fn measure_interval1(&self, m: u32, lo: f64, hi: f64) -> f64 {
        if lo >= hi {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut stack = vec![(0u32, -0.5f64, 0.5f64)];
        while let Some((g, a, b)) = stack.pop() {
            if hi <= a || lo >= b {
                continue;
            }
            if lo <= a && b <= hi {
                acc += (-(g as f64)).exp2();
                continue;
            }
            if g == m {
                let cut = (hi.min(b) - lo.max(a)).max(0.0);
                // Divide by the realized leaf width, not the analytic
                // generation length: descent rounding makes them differ
                // in the last few bits, and mass bookkeeping must stay
                // consistent with the constructed geometry.
                acc += cut / (b - a) * (-(m as f64)).exp2();
                continue;
            }
            let l = self.len(g + 1);
            stack.push((g + 1, a, a + l));
            stack.push((g + 1, b - l, b));
        }
        acc
    }

    /// Mass of an axis-aligned box under the `power`-fold product measure.
    pub fn measure_box(&self, m: u32, bounds: &[(f64, f64)]) -> f64 {
        bounds
            .iter()
            .map(|&(lo, hi)| self.measure_interval1(m, lo, hi))
            .product()
    }

    /// Mass of the ball `B_r(center)`: exact in one dimension and for the
    /// max norm; a (lower, upper) bracket from inscribed/circumscribed
    /// boxes for the Euclidean norm in higher powers.
    pub fn measure_ball(&self, m: u32, center: &[f64], r: f64, norm: Norm) -> (f64, f64) {
        let k = center.len();
        let outer: Vec<(f64, f64)> = center.iter().map(|&c| (c - r, c + r)).collect();
        let up = self.measure_box(m, &outer);
        if k == 1 || norm == Norm::Max {
            return (up, up);
        }
        let ri = r / (k as f64).sqrt();
        let inner: Vec<(f64, f64)> = center.iter().map(|&c| (c - ri, c + ri)).collect();
        (self.measure_box(m, &inner), up)
    }

    /// First generation whose splitting gap closes under expansion by `r`
    /// (gaps decrease in generation, so all deeper gaps close too).
    /// Returns `m` when no gap up to generation `m` closes.
    pub fn merge_level(&self, m: u32, r: f64) -> u32 {
        for g in 0..m {
            if self.gap(g) < 2.0 * r {
                return g;
            }
        }
        m
    }

    /// Length of the closed `r`-neighborhood of the generation-`m` set in
    /// one dimension, unclipped (as a subset of the line). Exact: the
    /// neighborhood is the disjoint union of the expanded generation-`t`
    /// intervals, `t` the merge level.
    pub fn neighborhood_len1(&self, m: u32, r: f64) -> f64 {
        let t = self.merge_level(m, r);
        (t as f64).exp2() * (self.len(t) + 2.0 * r)
    }

    /// Same, clipped to (-1, 1). Only the two outer overhangs can leave
    /// the box, each by `r - 1/2` once `r` exceeds 1/2.
    pub fn neighborhood_len1_clipped(&self, m: u32, r: f64) -> f64 {
        self.neighborhood_len1(m, r) - 2.0 * (r - 0.5).max(0.0)
    }

    /// Volume of the `r`-neighborhood of the `power`-fold product set
    /// inside the box (-1, 1)^power as a (lower, upper) pair: exact and
    /// equal for the max norm, bracketed by `r/sqrt(k)`- and
    /// `r`-neighborhoods for the Euclidean norm.
    pub fn neighborhood_vol(&self, m: u32, r: f64, norm: Norm) -> (f64, f64) {
        let k = self.power;
        let up = self.neighborhood_len1_clipped(m, r).powi(k as i32);
        match norm {
            Norm::Max => (up, up),
            Norm::Euclid => {
                if k == 1 {
                    (up, up)
                } else {
                    let lo = self
                        .neighborhood_len1_clipped(m, r / (k as f64).sqrt())
                        .powi(k as i32);
                    (lo, up)
                }
            }
        }
    }

    /// Connected components of the 1D `r`-neighborhood: the expanded
    /// generation-`t` intervals, left to right.
    pub fn neighborhood_components(&self, m: u32, r: f64) -> Result<Vec<(f64, f64)>> {
        let t = self.merge_level(m, r);
        let list = self.intervals(t)?;
        Ok(list.into_iter().map(|(a, b)| (a - r, b + r)).collect())
    }

    /// Integrate `f` against the generation-`m` measure over `[lo, hi]`
    /// (one dimension). Subtrees outside the window are pruned; inside a
    /// leaf the measure has uniform density `2^-m / l_m` and the clipped
    /// segment is handled by Gauss quadrature of order `gauss_n`.
    pub fn integrate_mu1<F: FnMut(f64) -> f64>(
        &self,
        m: u32,
        lo: f64,
        hi: f64,
        mut f: F,
        gauss_n: usize,
    ) -> f64 {
        if lo >= hi {
            return 0.0;
        }
        let rule = crate::quad::gauss(gauss_n);
        let leaf_mass = (-(m as f64)).exp2();
        let mut acc = 0.0;
        let mut stack = vec![(0u32, -0.5f64, 0.5f64)];
        while let Some((g, a, b)) = stack.pop() {
            if b <= lo || a >= hi {
                continue;
            }
            if g == m {
                let (ca, cb) = (a.max(lo), b.min(hi));
                if cb > ca {
                    // Density relative to the realized leaf width, for
                    // consistency with `measure_interval1`.
                    acc += leaf_mass / (b - a) * rule.integrate(ca, cb, &mut f);
                }
                continue;
            }
            let l = self.len(g + 1);
            stack.push((g + 1, a, a + l));
            stack.push((g + 1, b - l, b));
        }
        acc
    }

    /// Draw a point of the generation-`m` measure (one dimension):
    /// uniform interval index, uniform position inside it.
    pub fn sample_point1<R: rand::Rng>(&self, m: u32, rng: &mut R) -> f64 {
        let j = rng.gen_range(0..(1u64 << m.min(63)));
        let (a, b) = self.interval(m, j);
        a + rng.gen::<f64>() * (b - a)
    }

    /// Count grid cells of size `eps` meeting the generation-`m` set.
    /// Prunes once a subtree fits in a single cell, so the cost is
    /// proportional to the count, not to 2^m. Cell indices are i128 so
    /// scales down to 2^-120 stay representable; when two sibling
    /// subtrees are separated by a gap of at least `eps` they cannot
    /// share a cell, which avoids comparing indices at depths where f64
    /// positions no longer resolve individual cells.
    pub fn boxcount(&self, m: u32, eps: f64) -> u64 {
        fn go(spec: &CantorSpec, m: u32, eps: f64, g: u32, a: f64, b: f64) -> (u64, i128, i128) {
            let ia = (a / eps).floor() as i128;
            let ib = (b / eps).floor() as i128;
            if ia == ib {
                return (1, ia, ia);
            }
            if g == m {
                return ((ib - ia + 1) as u64, ia, ib);
            }
            let l = spec.len(g + 1);
            let (nl, fl, ll) = go(spec, m, eps, g + 1, a, a + l);
            let (nr, fr, lr) = go(spec, m, eps, g + 1, b - l, b);
            let gap = (b - a) - 2.0 * l;
            let dup = if gap >= eps { 0 } else { u64::from(ll == fr) };
            (nl + nr - dup, fl, lr)
        }
        go(self, m, eps, 0, -0.5, 0.5).0
    }

    /// Box-counting dimension estimate over dyadic scales `2^-i` down to
    /// the generation length `l_m` (capped at 2^-120; see `boxcount`),
    /// with the regression diagnostics.
    pub fn boxcount_dimension(&self, m_max: u32) -> Result<BoxCountReport> {
        self.check_generation(m_max)?;
        let i_max = ((-self.log_len(m_max) / 2f64.ln()).floor() as i32).min(120);
        let mut scales = Vec::new();
        let mut counts = Vec::new();
        for i in 1..=i_max.max(1) {
            let eps = (-(i as f64)).exp2();
            scales.push(eps);
            counts.push(self.boxcount(m_max, eps));
        }
        let xs: Vec<f64> = scales.iter().map(|e| -e.ln()).collect();
        let ys: Vec<f64> = counts.iter().map(|&n| (n as f64).ln()).collect();
        let (_, slope, resid) = linfit(&xs, &ys);
        let spread = xs.last().unwrap_or(&0.0) - xs.first().unwrap_or(&0.0);
        let ill_conditioned = xs.len() < 4 || spread < 1.0;
        Ok(BoxCountReport { dim: slope, scales, counts, residual: resid, ill_conditioned })
    }
}

/// Box-count regression outcome.
#[derive(Debug, Clone)]
pub struct BoxCountReport {
    /// Least-squares slope of `ln N(eps)` against `ln(1/eps)`.
    pub dim: f64,
    pub scales: Vec<f64>,
    pub counts: Vec<u64>,
    /// RMS regression residual.
    pub residual: f64,
    /// Too few scales or too little spread for the slope to mean much.
    pub ill_conditioned: bool,
}

/// The standard middle-thirds set: `lambda = 1/3`, `gamma = 0`.
pub fn third_set(power: u32) -> CantorSpec {
    CantorSpec::build(SetKind::LambdaGamma, 1.0 / 3.0, 0.0, power).expect("1/3 law is admissible")
}
