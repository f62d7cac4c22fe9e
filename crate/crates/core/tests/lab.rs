use trapwalk_core::field::sample_field;
use trapwalk_core::geometry::GeometryKind;
use trapwalk_core::lab::*;
use trapwalk_core::stats::ols;
use trapwalk_core::*;

fn params() -> ModelParams {
    ModelParams::new(2, 2.2, 0.2, 0.5).unwrap()
}

fn smc(seed: u64) -> SmcConfig {
    SmcConfig { dt: 1e-2, n_particles: 1000, seed, ..Default::default() }
}

fn sweep(l_grid: Vec<f64>, replicas: usize, traps: bool) -> SweepConfig {
    SweepConfig {
        params: params(),
        l_grid,
        replicas,
        xi: 5.0 / 6.0,
        smc: smc(0),
        master_seed: 42,
        traps,
        geometry: GeometryKind::Hyperplane,
    }
}

#[test]
fn sweep_bookkeeping_and_determinism() {
    let cfg = sweep(vec![8.0, 16.0], 2, true);
    let a = run_sweep(&cfg).unwrap();
    assert_eq!(a.len(), 4);
    let mut seeds: Vec<u64> = a.iter().flat_map(|r| [r.field_seed, r.smc_seed]).collect();
    seeds.sort();
    seeds.dedup();
    assert_eq!(seeds.len(), 8);
    assert_eq!(
        a.iter().map(|r| (r.scale, r.replica)).collect::<Vec<_>>(),
        vec![(8.0, 0), (8.0, 1), (16.0, 0), (16.0, 1)]
    );
    assert!(a.iter().all(|r| r.ok() && r.traps > 0));
    assert_ne!(a[0].log_z, a[1].log_z);
    assert_eq!(a, run_sweep(&cfg).unwrap());
}

#[test]
fn failed_units_are_flagged_not_fatal() {
    let mut cfg = sweep(vec![8.0, 16.0], 1, false);
    cfg.smc.max_time = Some(0.05);
    let recs = run_sweep(&cfg).unwrap();
    assert_eq!(recs.len(), 2);
    assert!(recs.iter().all(|r| !r.ok()));
}

#[test]
fn band_with_no_traps_in_either_copy_gives_zero_delta() {
    let p = params();
    let g = Geometry::hyperplane(2, 6.0).unwrap();
    let f = sample_field(p, g.required_window(0.95), 2f64.powi(30), 3).unwrap();
    let band = 28;
    let res = band_resample_experiment(&f, &PotentialSpec::Raw, &g, Some(band), 6, &smc(1), 17).unwrap();
    let mut checked = 0;
    for k in 0..6 {
        let other = f.with_band_redrawn(band, band_resample_seed(17, Some(band), k)).unwrap();
        if f.band_range(band as usize).is_empty() && other.band_range(band as usize).is_empty() {
            assert_eq!(res.deltas[k], 0.0);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn redrawing_every_band_matches_independent_fields() {
    let p = params();
    let g = Geometry::hyperplane(2, 6.0).unwrap();
    let w = g.required_window(0.95);
    let f = sample_field(p, w.clone(), 16.0, 3).unwrap();
    let spec = PotentialSpec::modified(&p, 6.0, 0.9).unwrap();
    let res = band_resample_experiment(&f, &spec, &g, None, 3, &smc(1), 8).unwrap();
    for k in 0..3 {
        let fresh = sample_field(p, w.clone(), 16.0, band_resample_seed(8, None, k)).unwrap();
        let direct = smc_run(&fresh, &spec, &g, &smc(1)).unwrap().log_z_hat;
        assert_eq!(res.log_z[k], direct);
        assert_eq!(res.deltas[k], (direct - res.base_log_z).abs());
    }
}

#[test]
fn band_outside_range_is_rejected() {
    let p = params();
    let g = Geometry::hyperplane(2, 8.0).unwrap();
    let f = sample_field(p, g.required_window(0.95), 16.0, 3).unwrap();
    let spec = PotentialSpec::modified(&p, 8.0, 5.0 / 6.0).unwrap();
    assert!(band_resample_experiment(&f, &spec, &g, Some(3), 1, &smc(1), 0).is_err());
}

#[test]
fn coinciding_potentials_give_zero_gap() {
    let p = params();
    let g = Geometry::hyperplane(2, 8.0).unwrap();
    let w = g.required_window(0.95);
    let traps = (0..6).map(|k| Trap::new(vec![1.0 + 3.0 * k as f64, 0.5], 1.2)).collect();
    let f = TrapField::from_traps(p, w, 2.0, 0, traps).unwrap();
    let c = modified_vs_raw(&f, &g, 0.6, &smc(4)).unwrap();
    assert_eq!(c.gap, 0.0);
    assert_eq!(c.log_z_raw, c.log_z_modified);
}

#[test]
fn modified_and_raw_agree_on_tube_probability() {
    let p = params();
    let l = 32.0;
    let g = Geometry::hyperplane(2, l).unwrap();
    let w = g.required_window(0.95);
    let xi = 5.0 / 6.0;
    let r_max = raw_r_max(&p, &w, l, xi).unwrap();
    let mut small = 0;
    for k in 0..50 {
        let f = sample_field(p, w.clone(), r_max, 1000 + k).unwrap();
        let c = modified_vs_raw(&f, &g, xi, &SmcConfig { n_particles: 500, ..smc(k) }).unwrap();
        if c.gap < 0.05 {
            small += 1;
        }
    }
    assert!(small >= 45, "{small}/50");
}

// K0(z) = int_0^inf exp(-z cosh t) dt
fn bessel_k0(z: f64) -> f64 {
    let h = 1e-3;
    (0..20_000).map(|i| {
        let t = (i as f64 + 0.5) * h;
        (-z * t.cosh()).exp() * h
    }).sum()
}

#[test]
fn free_alpha_curve_follows_the_bessel_transform() {
    let lambda = 0.5;
    let kappa = (2.0f64 * lambda).sqrt();
    let cfg = AlphaConfig {
        params: params().with_lambda(lambda),
        r_grid: vec![8.0, 16.0, 24.0, 32.0],
        replicas: 2,
        xi: 0.8,
        smc: smc(0),
        master_seed: 5,
        traps: false,
    };
    let curve = alpha_curve(&cfg).unwrap();
    for pt in &curve.points {
        // E exp(-lambda T) from distance r to the unit disc
        let oracle = -(bessel_k0(kappa * pt.r) / bessel_k0(kappa)).ln();
        assert!((pt.mean - oracle).abs() < 0.03 * oracle, "r={}: {} vs {oracle}", pt.r, pt.mean);
        assert!(pt.mean >= 0.0);
    }
    let xs: Vec<f64> = curve.points.iter().map(|p| p.r).collect();
    let ys: Vec<f64> = curve.points.iter().map(|p| p.mean).collect();
    let slope = ols(&xs, &ys).unwrap().slope;
    assert!((slope - kappa).abs() < 0.05 * kappa, "{slope}");
}

#[test]
fn alpha_grows_with_distance_among_traps() {
    let cfg = AlphaConfig {
        params: params(),
        r_grid: vec![4.0, 8.0, 12.0],
        replicas: 8,
        xi: 5.0 / 6.0,
        smc: smc(0),
        master_seed: 6,
        traps: true,
    };
    let curve = alpha_curve(&cfg).unwrap();
    assert!(curve.points.iter().all(|p| p.values.iter().all(|&v| v >= 0.0)));
    assert!(curve.increase_fraction.iter().all(|&f| f >= 0.95), "{:?}", curve.increase_fraction);
}
