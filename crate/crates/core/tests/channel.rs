use std::f64::consts::{PI, SQRT_2};

use mumimo::channel::*;
use mumimo::linalg::CMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use statrs::distribution::{ContinuousCDF, Normal};

/// `J0(x) = (1/pi) * integral_0^pi cos(x sin t) dt`, trapezoid rule.
fn bessel_j0(x: f64) -> f64 {
    let n = 20_000;
    let h = PI / n as f64;
    let f = |t: f64| (x * t.sin()).cos();
    let inner: f64 = (1..n).map(|i| f(i as f64 * h)).sum();
    (inner + 0.5 * (f(0.0) + f(PI))) * h / PI
}

#[test]
fn uniform_limit_matches_bessel() {
    // a very wide Laplacian is flat over +-180 degrees
    let r = correlation_matrix(6, 0.0, 1e5).unwrap();
    for d in 1..6 {
        let want = bessel_j0(PI * d as f64);
        assert!((r[(d, 0)].re - want).abs() < 2e-3, "lag {d}: {} vs {want}", r[(d, 0)].re);
        assert!(r[(d, 0)].im.abs() < 2e-3);
    }
    assert!(r[(1, 0)].norm() < 0.6);
}

#[test]
fn correlation_matches_monte_carlo_laplacian() {
    let (mean_deg, spread_deg) = (20.0f64, 30.0f64);
    let r = correlation_matrix(4, mean_deg, spread_deg).unwrap();
    let sigma = spread_deg.to_radians();
    let exp = Exp::new(SQRT_2 / sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 200_000;
    let mut acc = [Complex64::new(0.0, 0.0); 4];
    let mut kept = 0usize;
    while kept < n {
        let mag: f64 = exp.sample(&mut rng);
        if mag > PI {
            continue;
        }
        let phi = if rng.random::<bool>() { mag } else { -mag };
        let s = (mean_deg.to_radians() + phi).sin();
        for (d, a) in acc.iter_mut().enumerate() {
            *a += Complex64::from_polar(1.0, PI * d as f64 * s);
        }
        kept += 1;
    }
    for d in 1..4 {
        let mc = acc[d] / n as f64;
        // the model stores R[p, q] = E[exp(i pi (p - q) sin)]
        assert!((r[(d, 0)] - mc).norm() < 0.01, "lag {d}: {} vs {mc}", r[(d, 0)]);
    }
}

/// Asymptotic Kolmogorov survival function.
fn kolmogorov_p(lambda: f64) -> f64 {
    let s: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            let sign = if k as i64 % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

fn ks_p_value(mut xs: Vec<f64>, dist: &Normal) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = dist.cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    kolmogorov_p((sqrt_n + 0.12 + 0.11 / sqrt_n) * d)
}

#[test]
fn nlos_entries_are_circular_gaussian() {
    let model = ChannelModel::default();
    let prepared = model.prepare(&[StaGeometry::new(20.0, 30.0, 2)], Regime::Nlos).unwrap();
    let (mut re, mut im) = (Vec::new(), Vec::new());
    for seed in 0..10_000u64 {
        let h = &prepared.draw_sta(0, seed, 0).tones[5];
        re.push(h[(1, 3)].re);
        im.push(h[(1, 3)].im);
    }
    let normal = Normal::new(0.0, (0.5f64).sqrt()).unwrap();
    let (p_re, p_im) = (ks_p_value(re, &normal), ks_p_value(im, &normal));
    assert!(p_re > 0.01 && p_im > 0.01, "KS p-values {p_re} {p_im}");
}

fn mean_power(regime: Regime, n_rx: usize, distance: f64) -> f64 {
    let model = ChannelModel::default();
    let prepared = model.prepare(&[StaGeometry::new(distance, 40.0, n_rx)], regime).unwrap();
    let draws = 2000;
    let mut total = 0.0;
    for seed in 0..draws {
        let ch = prepared.draw_sta(0, seed, 0);
        total += ch.tones.iter().map(|h| h.norm_squared()).sum::<f64>() / ch.tones.len() as f64;
    }
    total / draws as f64
}

#[test]
fn average_gain_is_antenna_count() {
    for (regime, distance) in [(Regime::Nlos, 20.0), (Regime::Los, 8.0)] {
        for n_rx in [1, 2] {
            let p = mean_power(regime, n_rx, distance);
            let want = (n_rx * 8) as f64;
            assert!((p / want - 1.0).abs() < 0.03, "{regime} {n_rx}x8: {p} vs {want}");
        }
    }
}

#[test]
fn draws_are_deterministic_and_seed_dependent() {
    let model = ChannelModel::default();
    let geoms = [StaGeometry::new(8.0, 0.0, 2), StaGeometry::new(8.0, 60.0, 1)];
    let a = model.draw_realization(&geoms, Regime::Los, 42).unwrap();
    let b = model.draw_realization(&geoms, Regime::Los, 42).unwrap();
    let c = model.draw_realization(&geoms, Regime::Los, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.stas[0].tones[0], c.stas[0].tones[0]);
    assert_eq!(a.stas[0].tones[0].shape(), (2, 8));
    assert_eq!(a.stas[1].tones[0].shape(), (1, 8));
    assert!(a.stas.iter().all(|s| s.tones.iter().all(|h| h.iter().all(|z| z.re.is_finite() && z.im.is_finite()))));
}

#[test]
fn swapping_geometries_permutes_stations() {
    let model = ChannelModel::default();
    let g1 = StaGeometry::new(6.0, 10.0, 2);
    let g2 = StaGeometry::new(9.0, 70.0, 2);
    let ab = model.prepare(&[g1.clone(), g2.clone()], Regime::Los).unwrap();
    let ba = model.prepare(&[g2, g1], Regime::Los).unwrap();
    for stream in [0, 1, 7] {
        assert_eq!(ab.draw_sta(0, 5, stream), ba.draw_sta(1, 5, stream));
        assert_eq!(ab.draw_sta(1, 5, stream), ba.draw_sta(0, 5, stream));
    }
}

fn single_tap(k_factor_db: f64) -> ChannelModel {
    ChannelModel {
        clusters: ClusterParam {
            tap_delays_ns: vec![0.0],
            tap_powers_db: vec![0.0],
            cluster_of_tap: vec![0],
            clusters: vec![ClusterAngles { anchor_sta: None, aod_offset_deg: 0.0, angular_spread_deg: 30.0 }],
        },
        k_factor_db,
        ..ChannelModel::default()
    }
}

#[test]
fn zero_delay_tap_is_flat_in_frequency() {
    let model = single_tap(3.0);
    let ch = model.prepare(&[StaGeometry::new(5.0, 20.0, 2)], Regime::Los).unwrap().draw_sta(0, 1, 0);
    for h in &ch.tones[1..] {
        assert!((h - &ch.tones[0]).norm() < 1e-12);
    }
}

#[test]
fn pure_los_is_rank_one_steering() {
    let model = single_tap(300.0);
    let aod = 35.0;
    let ch = model.prepare(&[StaGeometry::new(5.0, aod, 2)], Regime::Los).unwrap().draw_sta(0, 3, 0);
    let a_tx = ula_steering(8, aod);
    for h in &ch.tones {
        let sv = h.singular_values();
        assert!(sv[1] / sv[0] < 1e-9);
        // every row is a multiple of a_tx^H with unit-modulus entries
        let row: CMatrix = h.rows(0, 1).into_owned();
        let coef = row[(0, 0)] / a_tx[0].conj();
        assert!((row - a_tx.adjoint() * coef).norm() < 1e-9);
        assert!((coef.norm() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn los_beyond_breakpoint_is_rejected() {
    let model = ChannelModel::default();
    let far = [StaGeometry::new(20.0, 0.0, 1)];
    assert!(matches!(
        model.prepare(&far, Regime::Los),
        Err(mumimo::Error::RegimeViolation { .. })
    ));
    assert!(model.prepare(&far, Regime::Nlos).is_ok());
    assert!(model.prepare(&[StaGeometry::new(5.0, 200.0, 1)], Regime::Los).is_err());
}

#[test]
fn pathloss_closed_form_at_sixty_metres() {
    let pl = PathLoss::default();
    let want = pl.intercept_db + 20.0 + 35.0 * 6f64.log10();
    assert!((pl.loss_db(60.0).unwrap() - want).abs() < 1e-12);
}

#[test]
fn realization_csv_dump() {
    let model = ChannelModel::default();
    let real = model.draw_realization(&[StaGeometry::new(8.0, 0.0, 2)], Regime::Los, 1).unwrap();
    let mut buf = Vec::new();
    real.write_csv(&mut buf).unwrap();
    let n_tones = model.tones.tone_indices().len();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + n_tones * 2 * 8);
}
