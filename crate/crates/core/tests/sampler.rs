use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use trapwalk_core::field::sample_field;
use trapwalk_core::smc::tube_fraction;
use trapwalk_core::stats::{mean, std_dev};
use trapwalk_core::*;

fn params(lambda: f64) -> ModelParams {
    ModelParams::new(2, 2.2, 0.2, lambda).unwrap()
}

fn cfg(seed: u64) -> SmcConfig {
    SmcConfig { dt: 1e-2, n_particles: 2000, seed, ..Default::default() }
}

fn free(l: f64, lambda: f64) -> (TrapField, Geometry) {
    let g = Geometry::hyperplane(2, l).unwrap();
    (TrapField::empty(params(lambda), g.required_window(0.95)).unwrap(), g)
}

#[test]
fn free_log_z_matches_first_passage_transform() {
    for (l, lambda) in [(4.0, 0.5), (8.0, 1.0)] {
        let (f, g) = free(l, lambda);
        let r = smc_run(&f, &PotentialSpec::Raw, &g, &cfg(3)).unwrap();
        let exact = -l * (2.0f64 * lambda).sqrt();
        assert!((r.log_z_hat - exact).abs() < 0.03 * exact.abs(), "L={l}: {} vs {exact}", r.log_z_hat);
        assert!(r.escape_fraction < 0.01);
        assert!(!r.escape_warning);
    }
}

#[test]
fn no_killing_gives_log_z_zero() {
    let g = Geometry::hyperplane(2, 4.0).unwrap();
    let f = TrapField::empty(params(0.0), Window::centered(2, 1e4).unwrap()).unwrap();
    let c = SmcConfig { max_time: Some(2.0), ..cfg(1) };
    let r = smc_run(&f, &PotentialSpec::Raw, &g, &c).unwrap();
    assert_eq!(r.guide_rate, 0.0);
    assert_eq!(r.log_z_hat, 0.0);
    assert_eq!(r.escape_fraction, 0.0);
}

#[test]
fn constant_potential_shifts_the_rate() {
    let l = 6.0;
    let g = Geometry::hyperplane(2, l).unwrap();
    let w = g.required_window(0.95);
    let giant = Trap::new(vec![0.0, 0.0], 1000.0);
    let v0 = 1000f64.powf(-0.2);
    let f = TrapField::from_traps(params(0.5), w, 1024.0, 0, vec![giant]).unwrap();
    assert_eq!(f.potential(&PotentialSpec::Raw, &[l, 0.0]).unwrap(), v0);
    let r = smc_run(&f, &PotentialSpec::Raw, &g, &cfg(5)).unwrap();
    let exact = -l * (2.0 * (0.5 + v0)).sqrt();
    assert!((r.log_z_hat - exact).abs() < 0.03 * exact.abs(), "{} vs {exact}", r.log_z_hat);
}

#[test]
fn halving_dt_moves_log_z_by_under_one_percent() {
    let (f, g) = free(8.0, 0.5);
    let a = smc_run(&f, &PotentialSpec::Raw, &g, &SmcConfig { dt: 2e-3, ..cfg(9) }).unwrap();
    let b = smc_run(&f, &PotentialSpec::Raw, &g, &SmcConfig { dt: 1e-3, ..cfg(9) }).unwrap();
    assert!((a.log_z_hat - b.log_z_hat).abs() < 0.01 * b.log_z_hat.abs());
}

#[test]
fn doubling_particles_stays_within_three_standard_errors() {
    let p = params(0.5);
    let g = Geometry::hyperplane(2, 8.0).unwrap();
    let f = sample_field(p, g.required_window(0.95), 16.0, 77).unwrap();
    let spec = PotentialSpec::modified(&p, 8.0, 5.0 / 6.0).unwrap();
    // Replicate spread is the standard error here; the genealogy estimate
    // can collapse to zero after many resampling rounds.
    let runs = |n: usize| -> Vec<f64> {
        (0..6)
            .map(|s| {
                let c = SmcConfig { n_particles: n, ..cfg(100 + s) };
                smc_run(&f, &spec, &g, &c).unwrap().log_z_hat
            })
            .collect()
    };
    let (a, b) = (runs(1000), runs(2000));
    let se = |v: &[f64]| std_dev(v) / (v.len() as f64).sqrt();
    let diff = (mean(&a) - mean(&b)).abs();
    assert!(diff <= 3.0 * (se(&a).powi(2) + se(&b).powi(2)).sqrt(), "diff {diff}");
}

#[test]
fn identical_inputs_give_identical_results() {
    let p = params(0.5);
    let g = Geometry::ball(2, 6.0).unwrap();
    let f = sample_field(p, g.required_window(0.95), 16.0, 4).unwrap();
    let c = SmcConfig { cube_side: Some(2.0), ..cfg(11) };
    let a = smc_run(&f, &PotentialSpec::Raw, &g, &c).unwrap();
    let b = smc_run(&f, &PotentialSpec::Raw, &g, &c).unwrap();
    assert_eq!(a, b);
    let other = smc_run(&f, &PotentialSpec::Raw, &g, &SmcConfig { seed: 12, ..c }).unwrap();
    assert_ne!(a.log_z_hat, other.log_z_hat);
}

#[test]
fn tube_estimates_are_nested_and_bounded() {
    let p = params(0.5);
    let g = Geometry::hyperplane(2, 16.0).unwrap();
    let f = sample_field(p, g.required_window(0.95), 32.0, 8).unwrap();
    let spec = PotentialSpec::modified(&p, 16.0, 5.0 / 6.0).unwrap();
    let r = smc_run(&f, &spec, &g, &cfg(2)).unwrap();
    assert_eq!(r.mu_a.len(), DEFAULT_XI_GRID.len());
    for w in r.mu_a.windows(2) {
        assert!(w[0].value <= w[1].value);
    }
    assert!(r.mu_a.iter().all(|m| (0.0..=1.0).contains(&m.value)));
    let q = r.fluct_quantiles;
    assert!(q[0] <= q[1] && q[1] <= q[2]);
    let biggest = r.paths.iter().map(|p| p.max_dist).fold(0.0, f64::max);
    assert_eq!(tube_fraction(&r, biggest).unwrap(), 1.0);
    assert!(mu_event_estimates(&r, &[0.5]).is_err());
}

#[test]
fn tube_fraction_matches_drifted_brownian_oracle() {
    // Without traps the conditioned law is Brownian motion with drift
    // sqrt(2 lambda) along the axis, stopped at the plane.
    let (l, lambda, dt): (f64, f64, f64) = (64.0, 0.5, 1e-2);
    let radius = l.sqrt();
    let (f, g) = free(l, lambda);
    let r = smc_run(&f, &PotentialSpec::Raw, &g, &SmcConfig { n_particles: 4000, ..cfg(21) }).unwrap();
    let est = tube_fraction(&r, radius).unwrap();

    let kappa = (2.0f64 * lambda).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let paths = 20_000;
    let mut inside = 0;
    for _ in 0..paths {
        let (mut x, mut y, mut worst) = (0.0f64, 0.0f64, 0.0f64);
        while x < l {
            let zx: f64 = rng.sample(StandardNormal);
            let zy: f64 = rng.sample(StandardNormal);
            let (nx, ny) = (x + kappa * dt + dt.sqrt() * zx, y + dt.sqrt() * zy);
            let (px, py) = if nx >= l { (l, y + (l - x) / (nx - x) * (ny - y)) } else { (nx, ny) };
            let ax = px.clamp(0.0, l);
            worst = worst.max(((px - ax).powi(2) + py * py).sqrt());
            x = px;
            y = py;
        }
        if worst <= radius {
            inside += 1;
        }
    }
    let oracle = inside as f64 / paths as f64;
    assert!(est > 0.0 && est < 1.0);
    assert!((est - oracle).abs() <= 0.05, "smc {est} vs oracle {oracle}");
}

#[test]
fn lambda_increase_never_raises_log_z() {
    let p = params(0.5);
    let g = Geometry::hyperplane(2, 6.0).unwrap();
    let f = sample_field(p, g.required_window(0.95), 16.0, 13).unwrap();
    let c = SmcConfig { ess_fraction: 0.0, alive_tolerance: 0.0, guide: Guide::Rate(2.0), max_time: Some(40.0), ..cfg(6) };
    let mut last = f64::INFINITY;
    for lambda in [0.1, 0.5, 0.50001, 1.0, 2.0] {
        let r = smc_run(&f.with_lambda(lambda).unwrap(), &PotentialSpec::Raw, &g, &c).unwrap();
        assert!(r.log_z_hat <= last);
        last = r.log_z_hat;
    }
}

#[test]
fn adding_traps_never_raises_log_z() {
    let p = params(0.5);
    let g = Geometry::hyperplane(2, 6.0).unwrap();
    let mut f = sample_field(p, g.required_window(0.95), 16.0, 14).unwrap();
    let spec = PotentialSpec::modified(&p, 6.0, 0.9).unwrap();
    let c = SmcConfig { ess_fraction: 0.0, alive_tolerance: 0.0, guide: Guide::Rate(2.0), max_time: Some(40.0), ..cfg(7) };
    let mut last = smc_run(&f, &PotentialSpec::Raw, &g, &c).unwrap();
    let mut last_mod = smc_run(&f, &spec, &g, &c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let t = Trap::new(vec![rng.random_range(0.0..6.0), rng.random_range(-2.0..2.0)], rng.random_range(1.0..3.0));
        f = f.with_trap(t).unwrap();
        let r = smc_run(&f, &PotentialSpec::Raw, &g, &c).unwrap();
        let m = smc_run(&f, &spec, &g, &c).unwrap();
        assert!(r.log_z_hat <= last.log_z_hat);
        assert!(m.log_z_hat <= last_mod.log_z_hat);
        last = r;
        last_mod = m;
    }
}

#[test]
fn preconditions_are_enforced() {
    let (f, g) = free(8.0, 0.5);
    let raw = PotentialSpec::Raw;
    assert!(smc_run(&f, &raw, &g, &SmcConfig { dt: 0.2, ..cfg(0) }).is_err());
    assert!(smc_run(&f, &raw, &g, &SmcConfig { n_particles: 99, ..cfg(0) }).is_err());
    let small = TrapField::empty(params(0.5), Window::centered(2, 9.0).unwrap()).unwrap();
    assert!(smc_run(&small, &raw, &g, &cfg(0)).is_err());
    let g3 = Geometry::hyperplane(3, 8.0).unwrap();
    assert!(smc_run(&f, &raw, &g3, &cfg(0)).is_err());
}

#[test]
fn visited_cube_tail_is_a_survival_function() {
    let (f, g) = free(8.0, 0.5);
    let r = smc_run(&f, &PotentialSpec::Raw, &g, &SmcConfig { cube_side: Some(2.0), ..cfg(3) }).unwrap();
    let tail = &r.visited_cubes_tail;
    assert!(!tail.is_empty());
    assert_eq!(tail[0].1, 1.0);
    assert!(tail.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 >= w[1].1));
}
