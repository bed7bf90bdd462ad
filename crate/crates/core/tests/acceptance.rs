//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use betaplane::calculus::{
    differentiate, enforce_y_antisymmetry, hs_norm, inner_product, inv_laplacian, jacobian, l2_norm, project_high,
    project_low, Derivative,
};
use betaplane::dynamics::{integrate, IntegratorConfig, SimState, Stepper};
use betaplane::random::{random_field, with_rms, SpectrumProfile};
use betaplane::sync::{
    delta_consistency, eta, nodal_inequality_check, run_modes_sync, zonalization_check, Coupling, InitialSpec,
    ModesSyncConfig, NodeLattice, SyncCommon, Verdict,
};
use betaplane::thresholds::{
    f_alpha, f_alpha_forward, modes_threshold, nodes_threshold, Constants, Family, GrashofSet, ThresholdCase,
    ThresholdInputs,
};
use betaplane::{
    build_forcing, ForcingSpec, GridSpec, PhysicalField, PhysicalParams, SpectralField, ZonalClass,
};
use num_complex::Complex64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn band(kmin: f64, kmax: f64) -> SpectrumProfile {
    SpectrumProfile::band(kmin, kmax, -1.0)
}

fn c1_round_trip() -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, n) in [8usize, 16, 32, 64, 128, 256].into_iter().enumerate() {
        let grid = GridSpec::unit(n).unwrap();
        let w = random_field(100 + i as u64, &band(1.0, n as f64), &grid, false);
        let u = w.inverse();
        let back = u.forward();
        worst = worst.max(l2_norm(&(&back - &w)) / l2_norm(&w));
        let again = back.inverse();
        let num: f64 = u.values().iter().zip(again.values()).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = u.values().iter().map(|a| a * a).sum();
        worst = worst.max((num / den).sqrt());
    }
    outcome(worst <= 1e-12, format!("max relative error {worst:.2e}"))
}

fn c2_jacobian_oracle() -> Outcome {
    let grid = GridSpec::unit(8).unwrap();
    let cut = grid.dealias_cutoff();
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let a = random_field(seed, &SpectrumProfile::band(0.5, 8.0, 0.0), &grid, false);
        let b = random_field(seed + 50, &SpectrumProfile::band(0.5, 8.0, 0.0), &grid, false);
        let j = jacobian(&a, &b).unwrap();
        let modes: Vec<(i64, i64)> =
            (-cut..=cut).flat_map(|p1| (-cut..=cut).map(move |p2| (p1, p2))).collect();
        for &(k1, k2) in &modes {
            let mut direct = Complex64::new(0.0, 0.0);
            for &(p1, p2) in &modes {
                let (q1, q2) = (k1 - p1, k2 - p2);
                if q1.abs() > cut || q2.abs() > cut {
                    continue;
                }
                // ∂x a ∂y b - ∂y a ∂x b, κ0 = 1
                let w = -((p1 * q2 - p2 * q1) as f64);
                direct += w * a.coeff(p1, p2) * b.coeff(q1, q2);
            }
            if (k1, k2) == (0, 0) {
                continue;
            }
            worst = worst.max((j.coeff(k1, k2) - direct).norm());
        }
    }
    outcome(worst <= 1e-12, format!("max coefficient error {worst:.2e}"))
}

fn c3_skew_and_beta_neutrality() -> Outcome {
    let grid = GridSpec::unit(32).unwrap();
    let skew = |f: &SpectralField, g: &SpectralField| {
        let j = jacobian(f, g).unwrap();
        let scale = l2_norm(&j) * l2_norm(g);
        if scale == 0.0 {
            0.0
        } else {
            inner_product(&j, g).unwrap().abs() / scale
        }
    };
    let beta = |w: &SpectralField| {
        let psi = inv_laplacian(w).unwrap();
        let dx = differentiate(&psi, Derivative::Dx).unwrap();
        let scale = l2_norm(&dx) * l2_norm(w);
        inner_product(&dx, w).unwrap().abs() / scale
    };
    let mut worst_random: f64 = 0.0;
    for seed in 0..100 {
        let f = random_field(seed, &band(1.0, 10.0), &grid, false);
        let g = random_field(seed + 1000, &band(1.0, 10.0), &grid, false);
        worst_random = worst_random.max(skew(&f, &g)).max(beta(&g));
    }
    let p = PhysicalParams::for_grid(0.01, 0.3, &grid).unwrap();
    let spec = ForcingSpec::new(ZonalClass::Analytic { alpha: 1.0 }, 20.0)
        .with_nonzonal(SpectrumProfile::band(2.5, 3.5, 0.0), 200.0, 3);
    let forcing = build_forcing(&spec, &grid, &p).unwrap();
    let cfg = IntegratorConfig::fixed(0.01);
    let mut stepper = Stepper::new(&forcing, &p, &cfg).unwrap();
    let mut st = SimState::new(0.0, with_rms(&random_field(7, &band(1.0, 8.0), &grid, false), 1.0));
    let mut worst_run: f64 = 0.0;
    for _ in 0..1000 {
        st = stepper.advance(&st, cfg.dt).unwrap();
        let psi = inv_laplacian(&st.omega).unwrap();
        worst_run = worst_run.max(skew(&psi, &st.omega)).max(beta(&st.omega));
    }
    outcome(
        worst_random <= 1e-10 && worst_run <= 1e-10,
        format!("random fields {worst_random:.2e}, run {worst_run:.2e}"),
    )
}

fn c4_rossby_wave() -> Outcome {
    let grid = GridSpec::unit(64).unwrap();
    let p = PhysicalParams::for_grid(1e-3, 0.1, &grid).unwrap();
    let (l1, l2) = (2i64, 1i64);
    let k2 = (l1 * l1 + l2 * l2) as f64;
    let freq = (1.0 / p.epsilon) * l1 as f64 / k2;
    let period = 2.0 * PI / freq;
    let mut w = SpectralField::zeros(&grid);
    let c0 = Complex64::new(0.7, 0.2);
    w.set_mode(l1, l2, c0);
    let cfg = IntegratorConfig::fixed(period / 2000.0);
    let out = integrate(&SimState::new(0.0, w), &SpectralField::zeros(&grid), &p, &cfg, period, &mut []).unwrap();
    // ∂t c = (-μ|k|² + i β kx/|k|²) c: after one period the phase returns
    let exact = c0 * (-p.mu * k2 * period).exp();
    let got = out.omega.coeff(l1, l2);
    let amp = (got.norm() - exact.norm()).abs() / exact.norm();
    let phase = (got / exact).arg().abs();
    outcome(amp <= 1e-6 && phase <= 1e-6, format!("amplitude {amp:.2e}, phase {phase:.2e}"))
}

fn c5_integrator_order() -> Outcome {
    let grid = GridSpec::unit(32).unwrap();
    let p = PhysicalParams::for_grid(0.02, 0.3, &grid).unwrap();
    let spec = ForcingSpec::new(ZonalClass::Analytic { alpha: 1.0 }, 20.0)
        .with_nonzonal(SpectrumProfile::band(2.5, 3.5, 0.0), 10.0, 5);
    let forcing = build_forcing(&spec, &grid, &p).unwrap();
    let w0 = with_rms(&random_field(11, &band(1.0, 8.0), &grid, false), 1.0);
    let (h, t_end) = (0.1, 2.0);
    let run = |dt: f64| {
        integrate(&SimState::new(0.0, w0.clone()), &forcing, &p, &IntegratorConfig::fixed(dt), t_end, &mut [])
            .unwrap()
            .omega
    };
    let reference = run(h / 16.0);
    let pts: Vec<(f64, f64)> =
        [h, h / 2.0, h / 4.0].iter().map(|&dt| (dt.ln(), l2_norm(&(&run(dt) - &reference)).ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    outcome((slope - 4.0).abs() <= 0.5, format!("slope {slope:.3}"))
}

fn c6_poincare() -> Outcome {
    let grid = GridSpec::unit(64).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let f = random_field(seed, &band(1.0, 20.0), &grid, false);
        let kappa = 1.0 + (seed % 17) as f64;
        let hi = project_high(&f, kappa);
        let lo = project_low(&f, kappa);
        let k2 = kappa * kappa;
        // κ²|P>f|² <= |∇P>f|² and |∇P<f|² <= κ²|P<f|²
        let a = k2 * l2_norm(&hi).powi(2) - hs_norm(&hi, 1.0).unwrap().powi(2);
        let b = hs_norm(&lo, 1.0).unwrap().powi(2) - k2 * l2_norm(&lo).powi(2);
        let scale = k2 * l2_norm(&f).powi(2);
        worst = worst.max(a / scale).max(b / scale);
    }
    // equality on the shell |k| = κ
    let mut shell = SpectralField::zeros(&grid);
    shell.set_mode(3, 4, Complex64::new(0.3, 0.1));
    let lo = project_low(&shell, 5.0);
    let eq = (hs_norm(&lo, 1.0).unwrap().powi(2) - 25.0 * l2_norm(&lo).powi(2)).abs() / (25.0 * l2_norm(&lo).powi(2));
    outcome(worst <= 1e-12 && eq <= 1e-12, format!("max violation {worst:.2e}, shell equality {eq:.2e}"))
}

fn c7_f_alpha_and_monotonicity() -> Outcome {
    let mut worst: f64 = 0.0;
    for family in [Family::Modes, Family::Nodes] {
        for i in 0..=90 {
            let u = 10f64.powf(-3.0 + 9.0 * i as f64 / 90.0);
            let y = f_alpha(u, 1.0, 1.0, family).unwrap();
            worst = worst.max((f_alpha_forward(y, 1.0, 1.0, family) - u).abs() / u);
        }
    }
    let consts = Constants::default();
    let mut monotone = true;
    let g0s = [1.0, 5.0, 20.0, 100.0, 500.0];
    let eps = [0.0, 1e-4, 1e-3, 1e-2, 1e-1];
    for case in [
        ThresholdCase::BandLimited { kappa_f_over_kappa0: 4.0 },
        ThresholdCase::Algebraic { s: 3.0 },
        ThresholdCase::Analytic { alpha: 1.0 },
    ] {
        for eval in [modes_threshold, nodes_threshold] {
            let value = |g0: f64, e: f64| {
                let grashof = GrashofSet { g0, g1: 2.0 * g0, g2: 4.0 * g0, g3: 8.0 * g0 };
                eval(&ThresholdInputs { case, epsilon: e, nu0: 0.05, grashof }, &consts).unwrap().value()
            };
            let table: Vec<Vec<f64>> = g0s.iter().map(|&g| eps.iter().map(|&e| value(g, e)).collect()).collect();
            for i in 0..5 {
                for j in 0..5 {
                    if i + 1 < 5 && table[i + 1][j] < table[i][j] {
                        monotone = false;
                    }
                    if j + 1 < 5 && table[i][j + 1] < table[i][j] {
                        monotone = false;
                    }
                }
            }
        }
    }
    outcome(worst <= 1e-10 && monotone, format!("round trip {worst:.2e}, monotone {monotone}"))
}

fn desk_forcing(grid: &GridSpec, p: &PhysicalParams) -> SpectralField {
    let spec = ForcingSpec::new(ZonalClass::Analytic { alpha: 1.0 }, 20.0)
        .with_nonzonal(SpectrumProfile::band(3.5, 4.5, 0.0), 2000.0, 7);
    build_forcing(&spec, grid, p).unwrap()
}

fn adaptive() -> IntegratorConfig {
    IntegratorConfig { adaptive: true, ..IntegratorConfig::fixed(0.05) }
}

fn c8_modes_sync() -> Outcome {
    let grid = GridSpec::unit(64).unwrap();
    let p = PhysicalParams::for_grid(0.05, 0.2, &grid).unwrap();
    let f = desk_forcing(&grid, &p);
    let t_end = 50.0 / p.nu0();
    let cfg = |kappa: f64| ModesSyncConfig {
        kappa,
        coupling: Coupling::Replace,
        common: SyncCommon {
            t_end,
            burn_in: t_end / 5.0,
            cadence: t_end / 50.0,
            seed_master: 1,
            seed_slave: 2,
            initial: InitialSpec::default(),
            tol_converged: 1e-6,
            tol_diverged: 1e-1,
        },
    };
    let control = run_modes_sync(&cfg(0.0), &f, &p, &adaptive()).unwrap();
    let coupled = run_modes_sync(&cfg(20.0 * p.kappa0), &f, &p, &adaptive()).unwrap();
    let pass = control.verdict == Verdict::NotConverged
        && control.ratio > 1e-1
        && coupled.verdict == Verdict::Converged
        && coupled.ratio <= 1e-6;
    outcome(pass, format!("control ratio {:.3e}, kappa/kappa0 = 20 ratio {:.3e}", control.ratio, coupled.ratio))
}

fn c9_zonalization() -> Outcome {
    let grid = GridSpec::unit(64).unwrap();
    let p = PhysicalParams::for_grid(0.8, 0.2, &grid).unwrap();
    let mut f = build_forcing(&ForcingSpec::new(ZonalClass::Analytic { alpha: 1.0 }, 20.0), &grid, &p).unwrap();
    let mut wave = SpectralField::zeros(&grid);
    wave.set_mode(2, 1, Complex64::new(1.0, 0.0));
    f = &f + &enforce_y_antisymmetry(&wave);
    let w0 = with_rms(&random_field(3, &band(1.0, 8.0), &grid, true), 0.1);
    let burn_in = 20.0 / p.nu0();
    let rows = zonalization_check(
        &f,
        &p,
        &[0.2, 0.1, 0.05],
        2.0 * burn_in,
        burn_in,
        &w0,
        &adaptive(),
        &Constants::default(),
    )
    .unwrap();
    let ratios: Vec<f64> = rows.windows(2).map(|w| w[0].sup_nonzonal / w[1].sup_nonzonal).collect();
    let pass = ratios.iter().all(|r| (1.3..=3.1).contains(r)) && rows.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0);
    outcome(pass, format!("consecutive ratios {:.3}, {:.3}", ratios[0], ratios[1]))
}

fn c10_delta_consistency() -> Outcome {
    let grid = GridSpec::unit(64).unwrap();
    let p = PhysicalParams::for_grid(0.05, 0.2, &grid).unwrap();
    let f = desk_forcing(&grid, &p);
    let init = InitialSpec::default();
    let (a, b) = (init.build(1, &grid), init.build(2, &grid));
    let turnover = betaplane::dynamics::eddy_turnover(&a).unwrap();
    let t_end = 10.0 * turnover;
    let r = delta_consistency(&a, &b, &f, &p, &adaptive(), t_end, turnover / 4.0).unwrap();
    outcome(
        r.max_residual <= 1e-6,
        format!("max residual {:.2e} over {:.1} time units ({} ticks)", r.max_residual, t_end, r.ticks),
    )
}

fn c11_nodal_inequalities() -> Outcome {
    let grid = GridSpec::unit(64).unwrap();
    let lattice = NodeLattice::new(&grid, 64).unwrap();
    let profile = band(1.0, 4.0);
    let half = nodal_inequality_check(&lattice, &profile, 500, 9).unwrap();
    let full = nodal_inequality_check(&lattice, &profile, 1000, 9).unwrap();
    let positive = [half.l2, half.h1(), full.l2, full.h1()].iter().all(|v| v.is_finite() && *v > 0.0);
    let stable = (full.l2 / half.l2 - 1.0).abs() <= 0.2 && (full.h1() / half.h1() - 1.0).abs() <= 0.2;
    let pts = lattice.points();
    let dense = NodeLattice::new(&grid, 64 * 64).unwrap().points();
    let mut exact = true;
    for seed in 0..20 {
        let u = random_field(seed, &profile, &grid, false).inverse();
        let e = eta(&u, &pts).unwrap();
        let c = -3.25;
        let scaled = PhysicalField::new(&grid, u.values().iter().map(|v| c * v).collect()).unwrap();
        exact &= eta(&scaled, &pts).unwrap() == c.abs() * e;
        exact &= e <= u.max_abs();
        exact &= eta(&u, &dense).unwrap() == u.max_abs();
    }
    outcome(
        positive && stable && exact,
        format!(
            "c_eta L2 {:.3} -> {:.3}, H1 {:.3} -> {:.3} (500 -> 1000 trials), eta properties exact {exact}",
            half.l2,
            full.l2,
            half.h1(),
            full.h1()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome, u64);

fn main() {
    let criteria: [Criterion; 11] = [
        ("transform round trip", c1_round_trip, 1),
        ("jacobian oracle", c2_jacobian_oracle, 1),
        ("skew-symmetry and beta-neutrality", c3_skew_and_beta_neutrality, 30),
        ("Rossby-wave exactness", c4_rossby_wave, 30),
        ("integrator order", c5_integrator_order, 120),
        ("Poincare exactness", c6_poincare, 5),
        ("F_alpha round trip and threshold monotonicity", c7_f_alpha_and_monotonicity, 5),
        ("determining-modes synchronization", c8_modes_sync, 900),
        ("zonalization scaling", c9_zonalization, 900),
        ("delta-equation consistency", c10_delta_consistency, 300),
        ("nodal inequality estimates", c11_nodal_inequalities, 120),
    ];
    let only: Vec<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.into_iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let in_budget = elapsed <= Duration::from_secs(budget);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_budget, o.detail),
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {}: {name}: {detail} [{:.2} s of {budget} s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
