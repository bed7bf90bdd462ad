use betaplane::calculus::{hs_norm, inner_product, inv_laplacian, l2_norm, y_even_part, enforce_y_antisymmetry};
use betaplane::dynamics::{
    diagnostics, exp_weighted_integral, integrate, linear_symbol, step, ExpWeightedIntegral, FnObserver,
    IntegratorConfig, Observer, SimState, Stepper,
};
use betaplane::random::{random_field, with_rms, SpectrumProfile};
use betaplane::{build_forcing, ForcingSpec, GridSpec, PhysicalParams, SpectralField, ZonalClass};
use num_complex::Complex64;

fn unforced(grid: &GridSpec) -> SpectralField {
    SpectralField::zeros(grid)
}

#[test]
fn symbol_examples() {
    let p = PhysicalParams::new(0.01, 0.1, 1.0).unwrap();
    assert_eq!(linear_symbol((0.0, 1.0), &p).unwrap(), Complex64::new(-0.01, 0.0));
    let s = linear_symbol((1.0, 0.0), &p).unwrap();
    assert!((s - Complex64::new(-0.01, 10.0)).norm() < 1e-15);
    let free = PhysicalParams::new(0.01, f64::INFINITY, 1.0).unwrap();
    assert_eq!(linear_symbol((1.0, 0.0), &free).unwrap(), Complex64::new(-0.01, 0.0));
    assert!(linear_symbol((0.0, 0.0), &p).is_err());
}

#[test]
fn single_mode_rossby_wave() {
    let grid = GridSpec::unit(32).unwrap();
    let p = PhysicalParams::for_grid(1e-3, 0.1, &grid).unwrap();
    let mut w = SpectralField::zeros(&grid);
    let c0 = Complex64::new(0.3, -0.4);
    w.set_mode(1, 1, c0);
    let sym = linear_symbol((1.0, 1.0), &p).unwrap();
    let t_end = 3.0;
    let cfg = IntegratorConfig::fixed(0.01);
    let out = integrate(&SimState::new(0.0, w), &unforced(&grid), &p, &cfg, t_end, &mut []).unwrap();
    let exact = c0 * (sym * t_end).exp();
    assert!((out.omega.coeff(1, 1) - exact).norm() <= 1e-8 * exact.norm());
    assert!((out.t - t_end).abs() < 1e-12);
}

#[test]
fn unforced_enstrophy_decreases() {
    let grid = GridSpec::unit(32).unwrap();
    let p = PhysicalParams::for_grid(0.02, 0.5, &grid).unwrap();
    let w = with_rms(&random_field(1, &SpectrumProfile::band(1.0, 8.0, -1.0), &grid, false), 1.0);
    let cfg = IntegratorConfig::fixed(0.01);
    let mut st = SimState::new(0.0, w);
    let mut prev = l2_norm(&st.omega);
    let mut stepper = Stepper::new(&unforced(&grid), &p, &cfg).unwrap();
    for _ in 0..200 {
        st = stepper.advance(&st, cfg.dt).unwrap();
        let now = l2_norm(&st.omega);
        assert!(now < prev);
        prev = now;
    }
}

fn convergence_setup() -> (SimState, SpectralField, PhysicalParams) {
    let grid = GridSpec::unit(32).unwrap();
    let p = PhysicalParams::for_grid(0.02, 0.3, &grid).unwrap();
    let f = build_forcing(
        &ForcingSpec::new(ZonalClass::Analytic { alpha: 1.0 }, 20.0)
            .with_nonzonal(SpectrumProfile::band(2.5, 3.5, 0.0), 10.0, 5),
        &grid,
        &p,
    )
    .unwrap();
    let w = with_rms(&random_field(9, &SpectrumProfile::band(1.0, 6.0, -1.0), &grid, false), 1.0);
    (SimState::new(0.0, w), f, p)
}

pub fn self_convergence_slope(h: f64, t_end: f64) -> f64 {
    let (st, f, p) = convergence_setup();
    let run = |dt: f64| integrate(&st, &f, &p, &IntegratorConfig::fixed(dt), t_end, &mut []).unwrap().omega;
    let reference = run(h / 16.0);
    let errs: Vec<f64> = [h, h / 2.0, h / 4.0].iter().map(|&dt| l2_norm(&(&run(dt) - &reference))).collect();
    // least-squares slope of log err against log dt
    let xs: Vec<f64> = [h, h / 2.0, h / 4.0].iter().map(|v: &f64| v.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / 3.0;
    let my = ys.iter().sum::<f64>() / 3.0;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

#[test]
fn fourth_order_self_convergence() {
    let slope = self_convergence_slope(0.1, 2.0);
    assert!((slope - 4.0).abs() <= 0.5, "slope {slope}");
}

#[test]
fn trivial_integrate_and_split_runs() {
    let (st, f, p) = convergence_setup();
    let cfg = IntegratorConfig::fixed(0.03);
    let same = integrate(&st, &f, &p, &cfg, 0.0, &mut []).unwrap();
    assert_eq!(same.omega.coeffs(), st.omega.coeffs());
    assert_eq!(same.t, 0.0);

    let mut ticks = Vec::new();
    let mut obs = FnObserver::new(0.25, |s: &SimState| {
        ticks.push(s.t);
        Ok(())
    });
    let full = integrate(&st, &f, &p, &cfg, 1.0, &mut [&mut obs as &mut dyn Observer]).unwrap();
    assert_eq!(ticks, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    let tick = |t_end: f64, from: &SimState| {
        let mut obs = FnObserver::new(0.25, |_: &SimState| Ok(()));
        integrate(from, &f, &p, &cfg, t_end, &mut [&mut obs as &mut dyn Observer]).unwrap()
    };
    let mid = tick(0.5, &st);
    let halves = tick(1.0, &mid);
    assert_eq!(full.omega.coeffs(), halves.omega.coeffs());
    assert_eq!(full.t, halves.t);
    let again = tick(1.0, &st);
    assert_eq!(full.omega.coeffs(), again.omega.coeffs());
}

#[test]
fn poincare_decay() {
    let grid = GridSpec::unit(32).unwrap();
    let p = PhysicalParams::for_grid(0.05, 0.5, &grid).unwrap();
    let w = with_rms(&random_field(4, &SpectrumProfile::band(1.0, 3.0, 0.0), &grid, false), 0.5);
    let st = SimState::new(0.0, w);
    let n0 = l2_norm(&st.omega);
    let cfg = IntegratorConfig::fixed(0.02);
    let mut stepper = Stepper::new(&unforced(&grid), &p, &cfg).unwrap();
    let mut worst: f64 = 0.0;
    let mut obs = FnObserver::new(1.0, |s: &SimState| {
        worst = worst.max(l2_norm(&s.omega) / (n0 * (-p.nu0() * s.t).exp()));
        Ok(())
    });
    betaplane::dynamics::run(&mut stepper, &st, 40.0, &mut [&mut obs as &mut dyn Observer]).unwrap();
    assert!(worst <= 1.05, "{worst}");
}

#[test]
fn diagnostics_examples() {
    let grid = GridSpec::unit(16).unwrap();
    let k0 = grid.kappa0();
    let zonal = betaplane::PhysicalField::from_fn(&grid, |_, y| (k0 * y).sin() + 0.3 * (3.0 * k0 * y).sin()).forward();
    let d = diagnostics(&SimState::new(0.0, zonal.clone()), 2.0 * k0).unwrap();
    assert!(d.nonzonal_enstrophy.abs() < 1e-28);
    let expect_hp = 0.5 * 0.09 * grid.area() / 2.0;
    assert!((d.highpass_zonal_enstrophy - expect_hp).abs() < 1e-12 * expect_hp);

    let cosx = betaplane::PhysicalField::from_fn(&grid, |x, _| (k0 * x).cos()).forward();
    let d = diagnostics(&SimState::new(0.0, cosx.clone()), k0).unwrap();
    // two coefficients of ½, ψ̂ = -ω̂/κ0²
    let energy = 0.5 * grid.area() * 2.0 * 0.25 / (k0 * k0);
    assert!((d.energy - energy).abs() < 1e-12 * energy);
    assert!((d.enstrophy - 0.25 * grid.area()).abs() < 1e-12);

    for seed in 0..20 {
        let w = random_field(seed, &SpectrumProfile::band(1.0, 5.0, -1.0), &grid, false);
        let d = diagnostics(&SimState::new(0.0, w.clone()), k0).unwrap();
        let psi = inv_laplacian(&w).unwrap();
        let scale = hs_norm(&psi, 1.0).unwrap() * l2_norm(&w);
        assert!(d.beta_flux.abs() <= 1e-12 * scale);
    }
}

#[test]
fn exp_weighted_examples() {
    assert_eq!(exp_weighted_integral(0.0, 0.0, 0.1, 0.5), 0.0);
    let (dt, nu0) = (1e-3, 0.5);
    let mut acc = ExpWeightedIntegral::default();
    for _ in 0..100_000 {
        acc.update(1.0, dt, nu0);
    }
    assert!((acc.value - 1.0 / nu0).abs() <= dt);
    // window integral against the running integral
    let u = |t: f64| 1.0 + (3.0 * t).sin().powi(2) * (-0.1 * t).exp();
    let mut acc = ExpWeightedIntegral::default();
    let mut samples = Vec::new();
    let dt = 1e-3;
    for i in 0..20_000 {
        let t = i as f64 * dt;
        acc.update(u(t), dt, nu0);
        samples.push(u(t));
    }
    let per_unit = (1.0 / dt) as usize;
    let best_window = (0..samples.len() - per_unit)
        .step_by(100)
        .map(|s| samples[s..s + per_unit].iter().sum::<f64>() * dt)
        .fold(0.0, f64::max);
    assert!(best_window <= nu0.exp() * acc.sup);
    assert!(nu0.exp() * acc.sup <= 3.0 * acc.sup);
}

#[test]
fn energy_balance_fourth_order() {
    let (st, f, p) = convergence_setup();
    let st = SimState::new(0.0, with_rms(&st.omega, 2.5));
    let residual = |dt: f64| {
        let steps = (1.0 / dt).round() as usize;
        let mut e = Vec::new();
        let mut rhs = Vec::new();
        let mut obs = FnObserver::new(dt, |s: &SimState| {
            let psi = inv_laplacian(&s.omega).unwrap();
            e.push(0.5 * hs_norm(&s.omega, -1.0).unwrap().powi(2));
            rhs.push(-p.mu * l2_norm(&s.omega).powi(2) - inner_product(&f, &psi).unwrap());
            Ok(())
        });
        integrate(&st, &f, &p, &IntegratorConfig::fixed(dt), 1.0, &mut [&mut obs as &mut dyn Observer]).unwrap();
        assert_eq!(rhs.len(), steps + 1);
        let simpson: f64 = (0..steps / 2)
            .map(|i| dt / 3.0 * (rhs[2 * i] + 4.0 * rhs[2 * i + 1] + rhs[2 * i + 2]))
            .sum();
        (e[steps] - e[0] - simpson).abs()
    };
    // the quadrature and time-stepping errors share the leading order but
    // not the sign, so only a lower bound on the halving ratio is stable
    let r: Vec<f64> = [0.05, 0.025, 0.0125].iter().map(|&dt| residual(dt)).collect();
    for w in r.windows(2) {
        assert!(w[0] / w[1] >= 12.0, "residuals {r:?}");
    }
}

#[test]
fn invariants_over_many_steps() {
    let grid = GridSpec::unit(16).unwrap();
    let p = PhysicalParams::for_grid(0.05, 0.2, &grid).unwrap();
    let f = build_forcing(&ForcingSpec::new(ZonalClass::Analytic { alpha: 1.0 }, 10.0), &grid, &p).unwrap();
    let w = random_field(2, &SpectrumProfile::band(1.0, 4.0, -1.0), &grid, false);
    let mut st = SimState::new(0.0, w);
    let cfg = IntegratorConfig::fixed(0.01);
    let mut stepper = Stepper::new(&f, &p, &cfg).unwrap();
    for _ in 0..5_000 {
        st = stepper.advance(&st, cfg.dt).unwrap();
        assert_eq!(st.omega.coeffs()[0], Complex64::default());
        assert_eq!(st.omega.hermitian_defect(), 0.0);
    }
    assert!(st.omega.mean_zero());
}

#[test]
fn symmetry_is_invariant() {
    let grid = GridSpec::unit(32).unwrap();
    let p = PhysicalParams::for_grid(0.02, 0.2, &grid).unwrap();
    let f = build_forcing(
        &ForcingSpec::new(ZonalClass::Analytic { alpha: 1.0 }, 20.0)
            .with_nonzonal(SpectrumProfile::band(2.5, 3.5, 0.0), 10.0, 1),
        &grid,
        &p,
    )
    .unwrap();
    let w = with_rms(&random_field(3, &SpectrumProfile::band(1.0, 6.0, -1.0), &grid, true), 1.0);
    let mut st = SimState::new(0.0, w);
    let cfg = IntegratorConfig::fixed(0.01);
    let mut stepper = Stepper::new(&f, &p, &cfg).unwrap();
    for _ in 0..1_000 {
        st = stepper.advance(&st, cfg.dt).unwrap();
        assert!(l2_norm(&y_even_part(&st.omega)) <= 1e-10 * l2_norm(&st.omega));
    }
    let sym = IntegratorConfig { enforce_symmetry: true, ..cfg };
    let s2 = step(&st, &f, &p, &sym).unwrap();
    assert_eq!(enforce_y_antisymmetry(&s2.omega).coeffs(), s2.omega.coeffs());
}

#[test]
fn blow_up_is_reported() {
    let grid = GridSpec::unit(16).unwrap();
    let p = PhysicalParams::for_grid(1e-4, 1.0, &grid).unwrap();
    let w = with_rms(&random_field(2, &SpectrumProfile::band(1.0, 5.0, 0.0), &grid, false), 1e3);
    let err = integrate(&SimState::new(0.0, w), &unforced(&grid), &p, &IntegratorConfig::fixed(1.0), 200.0, &mut [])
        .unwrap_err();
    assert!(err.is_blow_up(), "{err}");
    assert!(err.to_string().contains("step"));
}

#[test]
fn adaptive_dt_respects_limits() {
    let grid = GridSpec::unit(32).unwrap();
    let p = PhysicalParams::for_grid(0.01, 0.01, &grid).unwrap();
    let w = with_rms(&random_field(2, &SpectrumProfile::band(1.0, 5.0, 0.0), &grid, false), 1.0);
    let cfg = IntegratorConfig { adaptive: true, ..IntegratorConfig::fixed(1.0) };
    let stepper = Stepper::new(&unforced(&grid), &p, &cfg).unwrap();
    let dt = stepper.suggest_dt(&[&w]).unwrap();
    // max Rossby frequency is κ0/ε / κ0 = 100
    assert!(dt <= 0.5 / 100.0 + 1e-15);
    let vmax = betaplane::dynamics::max_velocity(&w).unwrap();
    assert!(dt <= 0.5 * grid.dx() / vmax + 1e-15);
}
