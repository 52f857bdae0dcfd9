//! Shell-summed modulars, divergence verdicts, certificate search, and the
//! vanishing criteria, exercised on the reference instances.

use fracmin::energy::{
    check_mc1, find_certificate, meyers_condition_sub, meyers_sub_exponent, meyers_sub_trend,
    meyers_super_exponent, meyers_super_trend, modular, modular_with, CertificateSchedule,
    CertificateSearch, ModularField, ShellDecomposition, Trend, Verdict,
};
use fracmin::fields::{Fields, Geometry, Regime};
use fracmin::models::{Family, Integrand, TestOrlicz};

fn sub_geometry(p0: f64, gamma: f64) -> Geometry {
    Geometry::new(Regime::SubDimensional, 2, p0, gamma).unwrap()
}

fn super_geometry(p0: f64, gamma: f64) -> Geometry {
    Geometry::new(Regime::SuperDimensional, 2, p0, gamma).unwrap()
}

fn instance(geo: Geometry, family: Family) -> Integrand {
    Integrand::new(Fields::new(geo, 12), family).unwrap()
}

/// The block-regime double-phase instance whose dual weight is summable:
/// the q-exponent sits above the matching threshold `p0 + alpha`.
fn dp_sub(q: f64) -> Integrand {
    instance(
        sub_geometry(1.5, -3.0),
        Family::DoublePhase { p: 1.5, q, alpha: 1.0 },
    )
}

#[test]
fn block_double_phase_bundle_holds() {
    let f = dp_sub(2.6);
    let report = check_mc1(&f, 1.0).unwrap();
    eprintln!(
        "grad: verdict {} value {:.6e} tail {:.3e} err {:.3e} fit {:?}",
        report.grad.verdict.name(),
        report.grad.value,
        report.grad.tail_bound,
        report.grad.error_estimate,
        report.grad.fit
    );
    eprintln!(
        "weight: verdict {} value {:.6e} tail {:.3e} err {:.3e} fit {:?}",
        report.weight.verdict.name(),
        report.weight.value,
        report.weight.tail_bound,
        report.weight.error_estimate,
        report.weight.fit
    );
    assert_eq!(report.grad.verdict, Verdict::Convergent);
    assert_eq!(report.weight.verdict, Verdict::Convergent);
    assert!(report.holds);
    assert_eq!(report.grad.axis, "|x_d|");
    assert_eq!(report.grad.shells.len(), 41);
}

#[test]
fn block_double_phase_small_q_weight_diverges() {
    let f = dp_sub(2.2);
    let report = modular(&f, ModularField::WeightB, 1.0, 1.0).unwrap();
    eprintln!(
        "weight q=2.2: verdict {} fit {:?}",
        report.verdict.name(),
        report.fit
    );
    assert_eq!(report.verdict, Verdict::Divergent);
    assert!(!report.tail_bound.is_finite());
}

#[test]
fn weight_verdict_flips_within_one_sweep_step() {
    let mut rows = Vec::new();
    for i in 0..=8 {
        let q = 2.30 + 0.05 * i as f64;
        let f = dp_sub(q);
        let report = modular(&f, ModularField::WeightB, 1.0, 1.0).unwrap();
        let rate = report.fit.map(|ft| ft.rate).unwrap_or(f64::NAN);
        eprintln!("q = {q:.2}: {} (rate {rate:+.4})", report.verdict.name());
        rows.push((q, report.verdict));
    }
    let last_div = rows.iter().rposition(|r| r.1 == Verdict::Divergent);
    let first_conv = rows.iter().position(|r| r.1 == Verdict::Convergent);
    let (Some(i_div), Some(i_conv)) = (last_div, first_conv) else {
        panic!("sweep must contain both verdicts");
    };
    assert!(
        i_conv == i_div + 1,
        "divergent and convergent runs must be adjacent: last divergent at q = {:.2}, first convergent at q = {:.2}",
        rows[i_div].0,
        rows[i_conv].0
    );
}

#[test]
fn grad_modular_scales_with_the_pure_power() {
    let f = dp_sub(2.6);
    let base = modular(&f, ModularField::GradU, 1.0, 1.0).unwrap();
    let doubled = modular(&f, ModularField::GradU, 2.0, 1.0).unwrap();
    let expected = 2.0f64.powf(1.5) * base.value;
    eprintln!("F(u) = {:.12e}, F(2u) = {:.12e}, 2^p F(u) = {:.12e}", base.value, doubled.value, expected);
    assert!(
        ((doubled.value - expected) / expected).abs() < 1e-10,
        "pure-power homogeneity must hold to 1e-10"
    );
}

#[test]
fn quadrature_order_stability() {
    let f = dp_sub(2.6);
    let sd8 = ShellDecomposition::default();
    let sd16 = ShellDecomposition { gauss_n: 16, ..ShellDecomposition::default() };
    for field in [ModularField::GradU, ModularField::WeightB] {
        let r8 = modular_with(&f, field, 1.0, 1.0, &sd8).unwrap();
        let r16 = modular_with(&f, field, 1.0, 1.0, &sd16).unwrap();
        let rel = ((r8.value - r16.value) / r16.value).abs();
        eprintln!("{}: gauss 8 {:.10e} vs 16 {:.10e} (rel {:.2e})", field.name(), r8.value, r16.value, rel);
        assert_eq!(r8.verdict, Verdict::Convergent);
        assert_eq!(r16.verdict, Verdict::Convergent);
        assert!(rel < 1e-3, "{}: quadrature refinement moved the value by {rel:.2e}", field.name());
    }
}

#[test]
fn generation_stability() {
    // The gradient value is resolved almost entirely within the shell
    // range, so refinement barely moves it; the weight value leans on the
    // fitted tail beyond the resolution floor, and refinement shifts that
    // extrapolation window, so its tolerance is looser.
    let f = dp_sub(2.6);
    for (field, tol) in [(ModularField::GradU, 0.05), (ModularField::WeightB, 0.3)] {
        let r = modular(&f, field, 1.0, 1.0).unwrap();
        let rel = r.error_estimate / r.value;
        eprintln!("{}: value {:.6e}, generation error {:.2e} (rel {:.2e})", field.name(), r.value, r.error_estimate, rel);
        assert_eq!(r.verdict, Verdict::Convergent);
        assert!(rel < tol, "{}: generation refinement moved the value by {rel:.2e}", field.name());
    }
}

#[test]
fn flat_exponent_block_gradient_diverges() {
    // p_minus equal to the base exponent with a slowly-varying weight:
    // the shell terms decay only logarithmically and the sum grows.
    let f = instance(
        sub_geometry(1.5, -1.0),
        Family::PiecewiseVarExp { p_minus: 1.5, p_plus: 2.5 },
    );
    let report = modular(&f, ModularField::GradU, 1.0, 1.0).unwrap();
    eprintln!("piecewise gamma=-1 grad: {} fit {:?}", report.verdict.name(), report.fit);
    assert_eq!(report.verdict, Verdict::Divergent);
}

#[test]
fn piecewise_reference_bundle_holds() {
    let f = instance(
        sub_geometry(1.5, -3.0),
        Family::PiecewiseVarExp { p_minus: 1.5, p_plus: 2.5 },
    );
    let report = check_mc1(&f, 1.0).unwrap();
    eprintln!(
        "piecewise gamma=-3: grad {} (fit {:?}), weight {} (fit {:?})",
        report.grad.verdict.name(),
        report.grad.fit,
        report.weight.verdict.name(),
        report.weight.fit
    );
    assert!(report.holds);
}

#[test]
fn matching_checkerboard_gradient_diverges() {
    // The classical planar checkerboard configuration: quadratic growth,
    // point contact set, gradient blowing up like 1/|x| near the origin.
    let geo = Geometry::new(Regime::Matching, 2, 2.0, 0.0).unwrap();
    let f = instance(geo, Family::PiecewiseVarExp { p_minus: 2.0, p_plus: 2.0 });
    let report = modular(&f, ModularField::GradU, 1.0, 1.0).unwrap();
    eprintln!("matching grad: {} fit {:?}", report.verdict.name(), report.fit);
    assert_eq!(report.verdict, Verdict::Divergent);
}

#[test]
fn tube_double_phase_bundle_holds() {
    let geo = super_geometry(3.0, 3.0);
    let f = Integrand::new(
        Fields::new(geo, 10),
        Family::DoublePhase { p: 3.0, q: 6.1, alpha: 1.5 },
    )
    .unwrap();
    let report = check_mc1(&f, 1.0).unwrap();
    eprintln!(
        "tube dp: grad {} value {:.4e} (fit {:?})",
        report.grad.verdict.name(),
        report.grad.value,
        report.grad.fit
    );
    eprintln!(
        "tube dp: weight {} value {:.4e} (fit {:?})",
        report.weight.verdict.name(),
        report.weight.value,
        report.weight.fit
    );
    assert_eq!(report.grad.axis, "|x'|");
    assert!(report.holds);
}

#[test]
fn modulars_need_the_planar_domain() {
    let geo = Geometry::new(Regime::SubDimensional, 3, 2.5, -3.0).unwrap();
    let f = Integrand::new(
        Fields::new(geo, 8),
        Family::DoublePhase { p: 1.5, q: 4.0, alpha: 1.0 },
    )
    .unwrap();
    assert!(modular(&f, ModularField::GradU, 1.0, 1.0).is_err());
}

#[test]
fn power_certificate_found_for_small_kappa() {
    let f = dp_sub(2.6);
    let schedule = CertificateSchedule::default_for(&f.family);
    let CertificateSchedule::PowerEta { p1 } = schedule else {
        panic!("double phase uses the power schedule")
    };
    assert!((p1 - 2.05).abs() < 1e-12);
    match find_certificate(&f, 0.01, schedule).unwrap() {
        CertificateSearch::Found(cert) => {
            eprintln!(
                "kappa=0.01: eta {:.3e} s {:.3e} slack {:.3e} steps {}",
                cert.eta, cert.s, cert.slack, cert.steps
            );
            assert!(cert.slack > 0.0);
            assert!(cert.eta > 1.0, "a small level needs large scales");
            // The dual scale follows the schedule.
            assert!((cert.s - cert.eta.powf(p1 - 1.0)).abs() <= 1e-9 * cert.s);
            assert!(cert.epsilon.is_none());
            assert!(
                cert.grad_modular + cert.weight_modular + cert.slack
                    <= 0.01 * cert.eta * cert.s * (1.0 + 1e-12)
            );
        }
        CertificateSearch::Exhausted { best_ratio, steps, .. } => {
            panic!("expected a certificate, best ratio {best_ratio:.3e} after {steps} steps")
        }
    }
}

#[test]
fn unit_scale_certificate_iff_level_exceeds_the_total() {
    let f = dp_sub(2.6);
    let g = modular(&f, ModularField::GradU, 1.0, 1.0).unwrap();
    let w = modular(&f, ModularField::WeightB, 1.0, 1.0).unwrap();
    let total = g.upper_value() + w.upper_value();
    eprintln!("unit-scale upper total: {total:.6e}");
    let schedule = CertificateSchedule::default_for(&f.family);
    // A level above the unit-scale total certifies immediately.
    match find_certificate(&f, 1.05 * total, schedule).unwrap() {
        CertificateSearch::Found(cert) => {
            assert_eq!(cert.steps, 1);
            assert_eq!(cert.eta, 1.0);
            assert_eq!(cert.s, 1.0);
            assert!(cert.slack > 0.0);
        }
        CertificateSearch::Exhausted { .. } => panic!("level above the total must certify"),
    }
    // A level below it cannot certify at unit scales.
    match find_certificate(&f, 0.5 * total, schedule).unwrap() {
        CertificateSearch::Found(cert) => {
            assert!(cert.steps > 1, "unit scales cannot certify below the total");
            assert!(cert.eta > 1.0);
        }
        CertificateSearch::Exhausted { steps, .. } => assert!(steps > 1),
    }
}

#[test]
fn borderline_certificate_balances_the_phase_division() {
    let f = instance(
        sub_geometry(1.5, -3.0),
        Family::BorderlineDoublePhase {
            p0: 1.5,
            alpha: 3.0,
            beta: 0.2,
            kappa: 0.2,
            epsilon: 1.0,
        },
    );
    match find_certificate(&f, 1.0, CertificateSchedule::BorderlineSigma).unwrap() {
        CertificateSearch::Found(cert) => {
            eprintln!(
                "borderline: s {:.3e} eps {:?} slack {:.3e} steps {}",
                cert.s, cert.epsilon, cert.slack, cert.steps
            );
            assert_eq!(cert.eta, 1.0, "the borderline schedule fixes the field scale");
            let eps = cert.epsilon.expect("borderline certificates record the division");
            assert!(eps > 0.0 && eps <= 1.0);
            assert!(cert.slack > 0.0);
            assert!(cert.grad_modular + cert.weight_modular < cert.kappa * cert.s);
        }
        CertificateSearch::Exhausted { best_ratio, steps, .. } => {
            panic!("expected a borderline certificate, best ratio {best_ratio:.3e} after {steps} steps")
        }
    }
}

#[test]
fn block_criterion_reference_grows() {
    // At the reference block geometry the criterion exponent is positive
    // (gamma nu = -1.5, p0 = 1.5 gives +3): the sequence must grow, which
    // is exactly the failure of the vanishing criterion.
    let geo = sub_geometry(1.5, -3.0);
    let fields = Fields::new(geo, 12);
    let psi = TestOrlicz::new(1.5, 0.0).unwrap();
    let trend = meyers_sub_trend(&fields, &psi, 4, 24).unwrap();
    let expected = meyers_sub_exponent(&fields.geo, 0.0).unwrap();
    eprintln!(
        "block delta=0: fitted {:.4} vs closed form {:.4} (residual {:.2e})",
        trend.fitted_exponent, expected, trend.residual
    );
    assert_eq!(trend.trend, Trend::Growing);
    assert!((trend.fitted_exponent - expected).abs() < 0.3 * expected);
}

#[test]
fn block_criterion_strong_conjugate_vanishes() {
    let geo = sub_geometry(1.5, -3.0);
    let fields = Fields::new(geo, 12);
    let psi = TestOrlicz::new(1.5, 2.0).unwrap();
    let trend = meyers_sub_trend(&fields, &psi, 4, 24).unwrap();
    let expected = meyers_sub_exponent(&fields.geo, 2.0).unwrap();
    eprintln!(
        "block delta=2: fitted {:.4} vs closed form {:.4}",
        trend.fitted_exponent, expected
    );
    assert_eq!(trend.trend, Trend::Vanishing);
    assert!((trend.fitted_exponent - expected).abs() < 0.3 * expected.abs());
}

#[test]
fn block_criterion_matching_sits_on_the_boundary() {
    let geo = Geometry::new(Regime::Matching, 2, 2.0, 0.0).unwrap();
    let fields = Fields::new(geo, 12);
    let psi = TestOrlicz::new(2.0, 0.0).unwrap();
    let trend = meyers_sub_trend(&fields, &psi, 4, 24).unwrap();
    eprintln!("matching delta=0: fitted {:.6}", trend.fitted_exponent);
    assert_eq!(trend.trend, Trend::Flat);
    // The rows themselves are constant up to the conjugate's constants.
    let first = trend.rows.first().unwrap();
    let last = trend.rows.last().unwrap();
    assert!((first.lo / last.lo).ln().abs() < 0.2);
}

#[test]
fn block_criterion_rows_are_exact_in_the_plane() {
    let geo = sub_geometry(1.5, -3.0);
    let fields = Fields::new(geo, 12);
    let psi = TestOrlicz::new(1.5, 0.0).unwrap();
    let (lo, hi) = meyers_condition_sub(&fields, &psi, 0.01).unwrap();
    assert!(lo > 0.0);
    assert!(lo <= hi);
    assert!((hi - lo) / hi < 1e-12, "planar volume brackets collapse");
}

#[test]
fn tube_criterion_scaling_matches_the_closed_form() {
    // Pure-power conjugate: the criterion is an exact power of the
    // generation length, so the fitted exponent matches the closed form
    // once the construction shift stops drifting.
    let geo = super_geometry(3.0, 3.0);
    let fields = Fields::new(geo, 10);
    let psi = TestOrlicz::new(3.0, 0.0).unwrap();
    let trend = meyers_super_trend(&fields, &psi, 40, 160).unwrap();
    let expected = meyers_super_exponent(&fields.geo, 0.0).unwrap();
    eprintln!(
        "tube delta=0: fitted {:.4} vs closed form {:.4}",
        trend.fitted_exponent, expected
    );
    assert_eq!(trend.trend, Trend::Growing);
    assert!(
        (trend.fitted_exponent - expected).abs() < 0.1 * expected.abs(),
        "pure-power scaling must match the closed form within 10%"
    );
}

#[test]
fn tube_criterion_strong_conjugate_vanishes() {
    let geo = super_geometry(3.0, 3.0);
    let fields = Fields::new(geo, 10);
    let psi = TestOrlicz::new(3.0, 4.0).unwrap();
    let trend = meyers_super_trend(&fields, &psi, 40, 160).unwrap();
    let expected = meyers_super_exponent(&fields.geo, 4.0).unwrap();
    eprintln!(
        "tube delta=4: fitted {:.4} vs asymptotic {:.4}",
        trend.fitted_exponent, expected
    );
    assert_eq!(trend.trend, Trend::Vanishing);
    assert!(trend.fitted_exponent < 0.0);
    let _ = expected;
}

#[test]
fn tube_criterion_critical_line_is_flat() {
    // gamma = 0 with a pure power conjugate sits exactly on the critical
    // line: every generation contributes the same mass.
    let geo = super_geometry(3.0, 0.0);
    let fields = Fields::new(geo, 10);
    let psi = TestOrlicz::new(3.0, 0.0).unwrap();
    let trend = meyers_super_trend(&fields, &psi, 4, 40).unwrap();
    eprintln!("tube gamma=0 delta=0: fitted {:.2e}", trend.fitted_exponent);
    assert_eq!(trend.trend, Trend::Flat);
    assert!(trend.fitted_exponent.abs() < 1e-9);
}

#[test]
fn tube_criterion_meager_construction_collapses() {
    // The doubling-exponent construction shrinks super-exponentially:
    // with a conjugate strong enough to beat the tube count the sequence
    // collapses to zero much faster than any power law.
    let geo = super_geometry(2.0, 3.0);
    assert_eq!(geo.frac_dim, 0.0);
    let fields = Fields::new(geo, 10);
    let psi = TestOrlicz::new(2.0, 6.0).unwrap();
    let trend = meyers_super_trend(&fields, &psi, 4, 18).unwrap();
    eprintln!(
        "meager tube: fitted {:.3}, first {:.3e}, last {:.3e}",
        trend.fitted_exponent,
        trend.rows.first().unwrap().lo,
        trend.rows.last().unwrap().lo
    );
    assert_eq!(trend.trend, Trend::Vanishing);
    let first = trend.rows.first().unwrap().lo;
    let last = trend.rows.last().unwrap().lo;
    assert!(last < 1e-3 * first, "the meager sequence must collapse rapidly");
    assert!(meyers_super_exponent(&fields.geo, 6.0).is_err());
}

#[test]
fn probe_bins() {
    let m = 16u32;
    let mk = |q: f64| {
        Integrand::new(
            Fields::new(sub_geometry(1.5, -3.0), m),
            Family::DoublePhase { p: 1.5, q, alpha: 1.0 },
        )
        .unwrap()
    };
    let spec = mk(2.6).fields.geo.cantor.as_ref().unwrap().clone();
    let marks: Vec<f64> =
        (0..=m).map(|j| -spec.log_len(j) / std::f64::consts::LN_2).collect();
    eprintln!("marks: {marks:.3?}");
    for q in [2.40, 2.45, 2.50, 2.55, 2.60] {
        let f = mk(q);
        let r = modular(&f, ModularField::WeightB, 1.0, 1.0).unwrap();
        let terms: Vec<f64> = r.shells.iter().map(|s| s.term).collect();
        let kres = r.resolved_k as f64;
        eprintln!("-- q {q} (resolved_k {} verdict {})", r.resolved_k, r.verdict.name());
        // Per-generation fractional bin densities and their log-ratios.
        let mut rows: Vec<(usize, f64)> = Vec::new();
        for j in 1..marks.len() as usize {
            let (lo, hi) = (marks[j - 1], marks[j]);
            if lo < 4.0 || hi > kres + 1.0 {
                continue;
            }
            let mut mass = 0.0;
            for k in lo.floor() as i64..hi.ceil() as i64 {
                let w = (hi.min((k + 1) as f64) - lo.max(k as f64)).max(0.0);
                if w > 0.0 && (k as usize) < terms.len() {
                    mass += w * terms[k as usize];
                }
            }
            rows.push((j, mass / (hi - lo)));
        }
        let ratios: Vec<String> = rows
            .windows(2)
            .map(|w| format!("{:+.4}", (w[1].1 / w[0].1).ln()))
            .collect();
        eprintln!("dens ratios j={}..: {}", rows[0].0, ratios.join(" "));

        // Candidate limit estimators for a = lim ln-ratio.
        let us: Vec<f64> = rows.windows(2).map(|w| ((w[0].0 as f64 + 1.0) / w[0].0 as f64).ln()).collect();
        let ys: Vec<f64> = rows.windows(2).map(|w| (w[1].1 / w[0].1).ln()).collect();
        // E1: linear in u.
        let lf = |us: &[f64], ys: &[f64]| -> (f64, f64) {
            let n = us.len() as f64;
            let (sx, sy): (f64, f64) = (us.iter().sum(), ys.iter().sum());
            let sxx: f64 = us.iter().map(|x| x * x).sum();
            let sxy: f64 = us.iter().zip(ys).map(|(x, y)| x * y).sum();
            let b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            ((sy - b * sx) / n, b)
        };
        let (a1, _) = lf(&us, &ys);
        // E2: quadratic in u.
        let u2: Vec<f64> = us.iter().map(|u| u * u).collect();
        // Normal equations for y = a + b u + c u^2.
        let n = us.len() as f64;
        let (s1, su, suu): (f64, f64, f64) = (n, us.iter().sum(), u2.iter().sum());
        let suuu: f64 = us.iter().map(|u| u.powi(3)).sum();
        let suuuu: f64 = us.iter().map(|u| u.powi(4)).sum();
        let sy: f64 = ys.iter().sum();
        let suy: f64 = us.iter().zip(&ys).map(|(u, y)| u * y).sum();
        let suuy: f64 = u2.iter().zip(&ys).map(|(u, y)| u * y).sum();
        let m = [[s1, su, suu], [su, suu, suuu], [suu, suuu, suuuu]];
        let rhs = [sy, suy, suuy];
        let det3 = |m: &[[f64; 3]; 3]| -> f64 {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d0 = det3(&m);
        let mut ma = m;
        ma[0][0] = rhs[0];
        ma[1][0] = rhs[1];
        ma[2][0] = rhs[2];
        let a2 = det3(&ma) / d0;
        // E3: linear in u on the deep half.
        let h = us.len() / 2;
        let (a3, _) = lf(&us[h..], &ys[h..]);
        // E4: quadratic skipping the first ratio row.
        let quad = |us: &[f64], ys: &[f64]| -> f64 {
            let n = us.len() as f64;
            let u2: Vec<f64> = us.iter().map(|u| u * u).collect();
            let (s1, su, suu): (f64, f64, f64) = (n, us.iter().sum(), u2.iter().sum());
            let suuu: f64 = us.iter().map(|u| u.powi(3)).sum();
            let suuuu: f64 = us.iter().map(|u| u.powi(4)).sum();
            let sy: f64 = ys.iter().sum();
            let suy: f64 = us.iter().zip(ys).map(|(u, y)| u * y).sum();
            let suuy: f64 = u2.iter().zip(ys).map(|(u, y)| u * y).sum();
            let m = [[s1, su, suu], [su, suu, suuu], [suu, suuu, suuuu]];
            let det3 = |m: &[[f64; 3]; 3]| -> f64 {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            };
            let d0 = det3(&m);
            let mut ma = m;
            ma[0][0] = sy;
            ma[1][0] = suy;
            ma[2][0] = suuy;
            det3(&ma) / d0
        };
        let a4 = quad(&us[1..], &ys[1..]);
        let a5 = quad(&us[2..], &ys[2..]);
        // E6: boost-subtracted level fit on the exact geometry regressors
        // {kbar, ln kbar}; the limit growth comes from the asymptotic mark
        // spacing.
        let ln2 = std::f64::consts::LN_2;
        let mut x1 = Vec::new();
        let mut x2 = Vec::new();
        let mut yy = Vec::new();
        for &(j, dens) in &rows {
            let kbar = 0.5 * (marks[j - 1] + marks[j]);
            x1.push(kbar);
            x2.push(kbar.ln());
            yy.push(dens.ln() - j as f64 * ln2);
        }
        let ([_, ce, csig], res6) = fracmin::quad::linfit2(&x1, &x2, &yy);
        // Far mark spacing stands in for the asymptotic step.
        let far = 300u32;
        let s300 = -(spec.log_len(far) - spec.log_len(far - 1)) / ln2;
        let s600 = -(spec.log_len(2 * far) - spec.log_len(2 * far - 1)) / ln2;
        let s_inf = 2.0 * s600 - s300;
        let a6 = ln2 + ce * s_inf;
        // E7: same level fit but against the exact gap scale (the kernels see
        // the gap, not the piece length) and ln(generation).
        let gap_mark = |j: u32| -> f64 {
            let (la, lb) = (spec.log_len(j - 1), spec.log_len(j));
            -(la.exp() - 2.0 * lb.exp()).ln() / ln2
        };
        let mut g1 = Vec::new();
        let mut g2 = Vec::new();
        for &(j, _) in &rows {
            g1.push(gap_mark(j as u32));
            g2.push((j as f64).ln());
        }
        let ([_, ce7, csig7], res7) = fracmin::quad::linfit2(&g1, &g2, &yy);
        let a7 = ln2 + ce7 * s_inf;
        eprintln!(
            "a-hat E1 {a1:+.4} E2 {a2:+.4} E3 {a3:+.4} E4 {a4:+.4} E5 {a5:+.4} E6 {a6:+.4} E7 {a7:+.4} (cE7 {ce7:+.4} csig7 {csig7:+.3} res {res7:.4} s_inf {s_inf:.4})"
        );
    }
}
