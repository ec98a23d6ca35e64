//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! with the measured residual and runtime, and exits non-zero on any FAIL.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robust_mv::calibration::{
    calibrate_theta, calibrate_theta_only, default_k_grid, default_rho_grid, entropy, entropy_at, frontier,
    inclusive_range, joint_theta_grid, optimal_portfolio, perturbation_scan, tilted_model, worst_case_bound,
    CalibrationRequest,
};
use robust_mv::market_model::{expand_symmetric, noisy_symmetric_model, DEFAULT_MEAN_NOISE_SEED};
use robust_mv::nominal::nominal_portfolio;
use robust_mv::oracle::{
    brute_force_portfolio, entropy_derivative_check, gaussian_kl, gd_trace, mc_worst_case_value,
    random_admissible_point, random_model, BruteForceOptions, Constraint, GDOptions, MCConfig, ModelFamily,
};
use robust_mv::robust::alternative_risk_value;
use robust_mv::{Direction, MarketModel, SymmetricModelSpec, Variant};

type Check = std::result::Result<String, String>;

const DIMS: [usize; 3] = [2, 5, 10];

fn reference() -> MarketModel {
    expand_symmetric(&SymmetricModelSpec::reference(), 1.0).unwrap()
}

fn models(seed: u64, count: usize) -> Vec<MarketModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| random_model(&mut rng, DIMS[i % 3], &ModelFamily::default())).collect()
}

/// Roots of `x − ln x = 1.5` on either side of 1, by plain bisection.
fn x_root(lo: f64, hi: f64) -> f64 {
    let f = |x: f64| x - x.ln() - 1.5;
    let (mut lo, mut hi) = (lo, hi);
    let up = f(hi) > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == up {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn err<E: std::fmt::Debug>(ctx: impl std::fmt::Display) -> impl FnOnce(E) -> String {
    move |e| format!("{ctx}: {e:?}")
}

fn ac1() -> Check {
    let m = reference();
    let k = m.constants();
    let g = m.gamma();
    let mut worst = 0.0f64;
    let mut count = 0;
    for variant in Variant::ALL {
        let upper = worst_case_bound(&m, variant);
        // Best-case limit: general needs Γ(1/C) > 0; the others are unbounded.
        let lower = match variant {
            Variant::General => g / (1.0 - g * g / k.c),
            _ => k.c,
        };
        for i in 1..=50 {
            let f = i as f64 / 51.0;
            for theta in [f * upper, -f * lower] {
                let robust = optimal_portfolio(&m, variant, theta).map_err(err(format!("{variant:?} θ={theta}")))?;
                let nominal = nominal_portfolio(&m);
                for w in robust.weights.iter().chain(nominal.weights.iter()) {
                    worst = worst.max((w - 0.1).abs());
                }
                count += 1;
            }
        }
    }
    if worst < 1e-10 {
        Ok(format!("{count} θ values, max |w − 0.1| = {worst:.2e}"))
    } else {
        Err(format!("max |w − 0.1| = {worst:.2e} ≥ 1e-10"))
    }
}

fn ac2() -> Check {
    let m = reference();
    let pts = frontier(&m, &[0.0, 0.25], Variant::FixedMean, &[Direction::Worst]).map_err(err("frontier"))?;
    let x = x_root(1.0, 10.0);
    let expect = x / (2.0 * m.constants().c) - 0.1;
    let e0 = (pts[0].risk_worst + 0.05125).abs();
    let e1 = (pts[1].risk_worst - expect).abs();
    let msg = format!("x = {x:.8}, |V(0) + 0.05125| = {e0:.2e}, |V(0.25) − x/2C + 0.1| = {e1:.2e}");
    if e0 < 1e-10 && e1 < 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac3() -> Check {
    let mut worst = 0.0f64;
    let mut n = 0;
    for (i, m) in models(3, 50).iter().enumerate() {
        for variant in [Variant::General, Variant::FixedMean] {
            for dir in [Direction::Worst, Direction::Best] {
                for eta in [0.01, 0.1, 0.25] {
                    let req = CalibrationRequest { model: m.clone(), eta, variant, direction: dir };
                    let sol = calibrate_theta(&req).map_err(err(format!("model {i} {variant:?} {dir:?} η={eta}")))?;
                    let r = entropy(m, variant, sol.theta_star).map_err(err("entropy"))?;
                    if (sol.theta_star > 0.0) != (dir == Direction::Worst) {
                        return Err(format!("model {i}: θ* = {} has the wrong sign", sol.theta_star));
                    }
                    worst = worst.max((r - eta).abs());
                    n += 1;
                }
            }
        }
    }
    if worst < 1e-10 {
        Ok(format!("{n} calibrations, max |R(θ*) − η| = {worst:.2e}"))
    } else {
        Err(format!("max |R(θ*) − η| = {worst:.2e}"))
    }
}

fn ac4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut n = 0;
    for variant in Variant::ALL {
        for (i, m) in models(40 + variant as u64, 50).iter().enumerate() {
            let theta = rng.random_range(0.1..0.8) * worst_case_bound(m, variant);
            let analytic = optimal_portfolio(m, variant, theta).map_err(err(format!("{variant:?} model {i}")))?;
            let brute = brute_force_portfolio(m, theta, variant, BruteForceOptions::default())
                .map_err(err(format!("brute force {variant:?} model {i}")))?;
            worst = worst.max((analytic.weights - brute.weights).amax());
            n += 1;
        }
    }
    if worst < 1e-6 {
        Ok(format!("{n} models, max weight gap = {worst:.2e}"))
    } else {
        Err(format!("max weight gap = {worst:.2e} ≥ 1e-6"))
    }
}

fn ac5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ms = models(50, 200);
    let mut worst = 0.0f64;
    for (i, m) in ms.iter().enumerate() {
        let variant = Variant::ALL[i % 3];
        let (theta, a) = random_admissible_point(&mut rng, m, variant, (-1.0, 0.9));
        let alt = tilted_model(m, variant, theta, &a).map_err(err("tilt"))?;
        let kl = gaussian_kl(&alt.mu_tilde, &alt.sigma_tilde, m.mu(), m.sigma()).map_err(err("kl"))?;
        let r = entropy_at(m, variant, theta, &a).map_err(err("entropy"))?;
        worst = worst.max((kl - r).abs());
    }
    if worst < 1e-10 {
        Ok(format!("200 points, max |R − KL| = {worst:.2e}"))
    } else {
        Err(format!("max |R − KL| = {worst:.2e}"))
    }
}

fn ac6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ms = models(60, 50);
    let mut worst = 0.0f64;
    for (i, m) in ms.iter().enumerate() {
        let variant = Variant::ALL[i % 3];
        let (mut theta, a) = random_admissible_point(&mut rng, m, variant, (0.05, 0.8));
        if rng.random_bool(0.5) {
            theta = -theta;
        }
        let scale = if variant == Variant::MinVariance { 1.0 } else { m.gamma() };
        let h = 1e-5 / (scale * a.variance);
        let (fd, analytic) = entropy_derivative_check(m, variant, theta, &a, h).map_err(err("derivative"))?;
        worst = worst.max(((fd - analytic) / analytic).abs());
    }
    if worst < 1e-5 {
        Ok(format!("50 points, max relative gap = {worst:.2e}"))
    } else {
        Err(format!("max relative gap = {worst:.2e} ≥ 1e-5"))
    }
}

fn ac7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ms = models(70, 20);
    let mut worst = 0.0f64;
    for (i, m) in ms.iter().enumerate() {
        let (mut theta, a) = random_admissible_point(&mut rng, m, Variant::General, (0.02, 0.3));
        if i % 2 == 1 {
            theta = -theta;
        }
        let cfg = MCConfig { n_samples: 1_000_000, seed: 1000 + i as u64, antithetic: false };
        let est = mc_worst_case_value(m, theta, &a, cfg).map_err(err(format!("case {i}")))?;
        let exact = alternative_risk_value(m, theta, &a).map_err(err("closed form"))?;
        worst = worst.max((est.estimate - exact).abs() / est.std_error);
    }
    if worst < 4.0 {
        Ok(format!("20 cases at 1e6 samples, max |MC − exact|/SE = {worst:.2}"))
    } else {
        Err(format!("max |MC − exact|/SE = {worst:.2} ≥ 4"))
    }
}

fn ac8() -> Check {
    let spec = SymmetricModelSpec::reference();
    let m = expand_symmetric(&spec, 1.0).unwrap();
    let etas = inclusive_range(0.0, 0.25, 0.01).unwrap();
    let thetas = joint_theta_grid(&m, &etas).map_err(err("θ grid"))?;
    let scan = perturbation_scan(&spec, 1.0, &thetas, &default_rho_grid(), &default_k_grid()).map_err(err("scan"))?;
    let min_gap = scan.endpoint_gaps.iter().map(|g| g.gap).fold(f64::INFINITY, f64::min);
    let msg = format!("joint gap = {:.2e}, smallest single-parameter endpoint gap = {min_gap:.3e}", scan.joint_max_gap);
    if scan.joint_max_gap < 1e-10 && min_gap > 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac9() -> Check {
    let m = noisy_symmetric_model(&SymmetricModelSpec::reference(), 1.0, DEFAULT_MEAN_NOISE_SEED).unwrap();
    let grid = inclusive_range(0.0, 0.25, 0.01).unwrap();
    let pts = frontier(&m, &grid, Variant::FixedMean, &[Direction::Worst]).map_err(err("frontier"))?;
    let mut min_a = f64::INFINITY;
    let mut min_b = f64::INFINITY;
    for p in &pts {
        min_a = min_a.min(p.risk_nominal_at_robust - p.risk_nominal);
        let gap = p.risk_alt_at_nominal_portfolio - p.risk_worst;
        if p.eta > 0.01 {
            min_b = min_b.min(gap);
        } else if gap < -1e-12 {
            return Err(format!("η = {}: robust portfolio worse in the alternative model by {:.2e}", p.eta, -gap));
        }
    }
    let msg =
        format!("26 η values, min nominal excess = {min_a:.3e}, min alternative advantage (η > 0.01) = {min_b:.3e}");
    if min_a >= -1e-12 && min_b > 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac10() -> Check {
    let m = reference();
    let theta_gx = calibrate_theta_only(&m, Variant::FixedMean, 0.25, Direction::Worst).map_err(err("θ*"))?;
    let mut ratios = Vec::new();
    for (variant, theta) in [(Variant::General, 0.0), (Variant::FixedMean, theta_gx)] {
        let opts = GDOptions { constraint: Constraint::FixedMultiplier, seed: 10, max_iter: 200, ..Default::default() };
        let trace = gd_trace(&m, theta, variant, &opts).map_err(err("gd"))?;
        let r1 = trace.rate_lambda1().ok_or("no λ₁ error component")?;
        let r2 = trace.rate_lambda2().ok_or("no λ₂ error component")?;
        ratios.push(r1 / r2);
    }
    let msg = format!("rate ratio λ₁/λ₂ = {:.2} (θ = 0), {:.2} (θ* at η = 0.25)", ratios[0], ratios[1]);
    if ratios.iter().all(|&r| r >= 2.0) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac11() -> Check {
    let mut worst = f64::INFINITY;
    for (i, m) in models(11, 20).iter().enumerate() {
        for variant in [Variant::General, Variant::FixedMean] {
            let ub = worst_case_bound(m, variant);
            let lb = calibrate_theta_only(m, variant, 0.25, Direction::Best).map_err(err(format!("model {i}")))?;
            for end in [ub * 100.0 / 101.0, lb] {
                let mut prev = 0.0;
                for j in 1..=100 {
                    let theta = end * j as f64 / 100.0;
                    let r = entropy(m, variant, theta).map_err(err(format!("model {i} θ={theta}")))?;
                    worst = worst.min(r - prev);
                    prev = r;
                }
            }
        }
    }
    if worst > 0.0 {
        Ok(format!("20 models × 2 variants × 2 branches, min step increase of R = {worst:.2e}"))
    } else {
        Err(format!("R not strictly monotone: min step = {worst:.2e}"))
    }
}

type Criterion = (&'static str, &'static str, Duration, fn() -> Check);

fn main() {
    let criteria: [Criterion; 11] = [
        ("AC1", "symmetric-case coincidence", Duration::from_secs(1), ac1),
        ("AC2", "fixed-mean frontier endpoints", Duration::from_secs(1), ac2),
        ("AC3", "ball-surface calibration", Duration::from_secs(30), ac3),
        ("AC4", "oracle equivalence", Duration::from_secs(120), ac4),
        ("AC5", "entropy vs Gaussian KL", Duration::from_secs(5), ac5),
        ("AC6", "entropy derivative identity", Duration::from_secs(5), ac6),
        ("AC7", "Monte Carlo consistency", Duration::from_secs(120), ac7),
        ("AC8", "estimation-risk collapse", Duration::from_secs(5), ac8),
        ("AC9", "non-symmetric structure", Duration::from_secs(10), ac9),
        ("AC10", "gradient-descent rates", Duration::from_secs(5), ac10),
        ("AC11", "entropy monotonicity", Duration::from_secs(10), ac11),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; too slow")),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{id:<5} {} {name}: {detail} [{:.3} s, budget {} s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
