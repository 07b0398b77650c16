//! Acquisition physics against analytic and Monte-Carlo oracles.

use ctdenoise::ctsim::{
    fbp, generate_pair, hu_to_mu, log_transform, mu_to_hu, project, simulate_dose, Dose, Ellipse, Geometry, Phantom,
    Sinogram, SinogramKind, EPS_COUNT, MU_WATER,
};
use ctdenoise::metrics::mse;
use ctdenoise::nsct::{forward, FilterBank};
use ctdenoise::Image;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit_disk_geometry() -> Geometry {
    Geometry::new(4, 11, 0.2, 8, 0.25).unwrap()
}

#[test]
fn disk_chords_are_exact() {
    let geom = unit_disk_geometry();
    let sino = project(&Phantom::disk(1.0, 1.0, 1.0).unwrap(), &geom).unwrap();
    for i in 0..geom.n_angles {
        for j in 0..geom.n_bins {
            let s: f64 = geom.bin_offset(j);
            let chord = if s.abs() < 1.0 { 2.0 * (1.0 - s * s).sqrt() } else { 0.0 };
            assert!((sino.view(i)[j] - chord).abs() <= 1e-12, "view {i} bin {j}");
        }
    }
    // centre ray and the s = 0.6 ray
    assert!((sino.view(0)[5] - 2.0).abs() <= 1e-12);
    assert!((sino.view(2)[8] - 1.6).abs() <= 1e-12);
}

/// Brute-force chord length by fine sampling along the ray.
fn sampled_integral(phantom: &Phantom, theta: f64, s: f64) -> f64 {
    let (sin_t, cos_t) = theta.sin_cos();
    let n = 200_000;
    let len = 2.0 * phantom.half_width * std::f64::consts::SQRT_2;
    let dt = len / n as f64;
    (0..n)
        .map(|k| {
            let t = -len / 2.0 + (k as f64 + 0.5) * dt;
            phantom.attenuation_at(s * cos_t - t * sin_t, s * sin_t + t * cos_t) * dt
        })
        .sum()
}

#[test]
fn rotated_offset_ellipses_match_ray_sampling() {
    let phantom = Phantom::new(
        vec![
            Ellipse { center: [1.5, -0.7], semi_axes: [2.0, 0.8], rotation: 0.6, mu: 0.3 },
            Ellipse { center: [-1.0, 1.2], semi_axes: [0.5, 1.4], rotation: -1.1, mu: 0.7 },
        ],
        5.0,
    )
    .unwrap();
    let geom = Geometry::new(7, 31, 0.3, 16, 0.5).unwrap();
    let sino = project(&phantom, &geom).unwrap();
    for i in 0..geom.n_angles {
        for j in (0..geom.n_bins).step_by(3) {
            let oracle = sampled_integral(&phantom, geom.angle(i), geom.bin_offset(j));
            assert!((sino.view(i)[j] - oracle).abs() < 2e-3, "view {i} bin {j}");
        }
    }
}

#[test]
fn empty_phantom_and_zero_sinogram() {
    let geom = Geometry::for_grid(32, 1.0, 16);
    let sino = project(&Phantom::empty(16.0), &geom).unwrap();
    assert!(sino.data.iter().all(|&v| v == 0.0));
    let img = fbp(&sino, &geom).unwrap();
    assert!(img.data().iter().all(|&v| v == 0.0));
}

#[test]
fn reconstructed_disk_interior_matches_attenuation() {
    let geom = Geometry::new(720, 729, 1.0, 512, 1.0).unwrap();
    let mu = 0.02;
    let sino = project(&Phantom::disk(100.0, mu, 256.0).unwrap(), &geom).unwrap();
    let img = fbp(&sino, &geom).unwrap();
    let (mut sum, mut count) = (0.0, 0);
    for r in 0..geom.side {
        for c in 0..geom.side {
            let (x, y) = geom.pixel_center(r, c);
            if x.hypot(y) < 80.0 {
                sum += img.get(r, c);
                count += 1;
            }
        }
    }
    let mean = sum / count as f64;
    assert!((mean - mu).abs() / mu <= 0.05, "interior mean {mean}");
}

#[test]
fn reconstruction_is_linear() {
    let geom = Geometry::for_grid(32, 1.0, 24);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let phantom = Phantom::random_body(&mut rng, 16.0, true).unwrap();
    let sino = project(&phantom, &geom).unwrap();
    let a = fbp(&sino, &geom).unwrap();
    let b = fbp(&sino.scale(-3.5), &geom).unwrap();
    let scale = a.norm();
    assert!(b.sub(&a.scale(-3.5)).unwrap().norm() / scale <= 1e-10);
}

fn flat_sinogram(n: usize, l: f64) -> Sinogram {
    Sinogram { n_angles: 1, n_bins: n, data: vec![l; n], kind: SinogramKind::LineIntegral, dose: None }
}

#[test]
fn poisson_mean_within_three_sigma() {
    let counts = simulate_dose(&flat_sinogram(100_000, 0.0), Dose { b: 1e5, r: 0.0 }, 7).unwrap();
    let mean = counts.data.iter().sum::<f64>() / 1e5;
    // σ of the sample mean is √(1e5 / 1e5) = 1
    assert!((mean - 1e5).abs() <= 3.0, "mean {mean}");
    assert!(counts.data.iter().all(|&v| v >= 0.0 && v.fract() == 0.0));

    let quarter = simulate_dose(&flat_sinogram(100_000, 4f64.ln()), Dose { b: 1e5, r: 0.0 }, 8).unwrap();
    let mean = quarter.data.iter().sum::<f64>() / 1e5;
    assert!((mean - 2.5e4).abs() <= 3.0 * (2.5e4f64 / 1e5).sqrt(), "mean {mean}");
}

#[test]
fn dose_simulation_is_seeded() {
    let sino = flat_sinogram(64, 1.0);
    let dose = Dose { b: 1e3, r: 5.0 };
    assert_eq!(simulate_dose(&sino, dose, 3).unwrap(), simulate_dose(&sino, dose, 3).unwrap());
    assert_ne!(simulate_dose(&sino, dose, 3).unwrap(), simulate_dose(&sino, dose, 4).unwrap());
}

#[test]
fn log_transform_inverts_the_noiseless_model() {
    let dose = Dose { b: 1e5, r: 10.0 };
    let l = [0.0, 0.5, 2.0, 6.0];
    let mut counts = flat_sinogram(4, 0.0);
    counts.kind = SinogramKind::PhotonCount;
    counts.data = l.iter().map(|v: &f64| dose.b * (-v).exp() + dose.r).collect();
    let y = log_transform(&counts, dose).unwrap();
    for (a, b) in y.data.iter().zip(l) {
        assert!((a - b).abs() < 1e-12);
    }
    counts.data = vec![3.0, 10.0, 10.4, 0.0];
    let y = log_transform(&counts, dose).unwrap();
    assert!(y.data.iter().all(|&v| v == (dose.b / EPS_COUNT).ln()));
    assert!(log_transform(&flat_sinogram(2, 0.0), dose).is_err());
}

fn log_variance(l: f64, dose: Dose, n: usize, seed: u64) -> (f64, f64) {
    let counts = simulate_dose(&flat_sinogram(n, l), dose, seed).unwrap();
    let y = log_transform(&counts, dose).unwrap();
    let mean = y.data.iter().sum::<f64>() / n as f64;
    let var = y.data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let i_bar = dose.b * (-l).exp() + dose.r;
    (var, i_bar / (i_bar - dose.r).powi(2))
}

#[test]
fn log_variance_follows_the_weighted_gaussian_model() {
    for (l, b) in [(2.0, 1e5), (4.0, 1e5), (3.0, 2.5e4)] {
        let (var, model) = log_variance(l, Dose { b, r: 10.0 }, 50_000, 11);
        assert!((var - model).abs() / model <= 0.1, "l {l} b {b}: {var:e} vs {model:e}");
    }
}

#[test]
fn log_variance_falls_with_dose() {
    let vars: Vec<f64> = [1e4, 2e4, 4e4].iter().map(|&b| log_variance(4.0, Dose { b, r: 10.0 }, 20_000, 5).0).collect();
    assert!(vars[0] > vars[1] && vars[1] > vars[2], "{vars:?}");
}

fn body_geometry() -> Geometry {
    Geometry::for_grid(128, 3.0, 180)
}

#[test]
fn very_high_dose_converges_to_truth() {
    let geom = body_geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let phantom = Phantom::random_body(&mut rng, 192.0, false).unwrap();
    let high = generate_pair(&phantom, &geom, Dose { b: 1e9, r: 0.0 }, 3).unwrap();
    let normal = generate_pair(&phantom, &geom, Dose { b: 1e5, r: 0.0 }, 3).unwrap();
    let high_err = mse(&high.truth, &high.routine).unwrap();
    let normal_err = mse(&normal.truth, &normal.routine).unwrap();
    // variance scales as 1/b, so 1e4 times more photons leave a tiny residual
    assert!(high_err < normal_err * 1e-3, "{high_err:e} vs {normal_err:e}");
}

#[test]
fn quarter_dose_is_noisier_for_every_seed() {
    let geom = body_geometry();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let phantom = Phantom::random_body(&mut rng, 192.0, true).unwrap();
        let pair = generate_pair(&phantom, &geom, Dose { b: 1e5, r: 10.0 }, seed).unwrap();
        let (q, r) = (mse(&pair.truth, &pair.quarter).unwrap(), mse(&pair.truth, &pair.routine).unwrap());
        assert!(q > r, "seed {seed}: {q:e} <= {r:e}");
    }
}

#[test]
fn pair_generation_is_reproducible() {
    let geom = body_geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let phantom = Phantom::random_body(&mut rng, 192.0, true).unwrap();
    let a = generate_pair(&phantom, &geom, Dose { b: 1e5, r: 10.0 }, 9).unwrap();
    let b = generate_pair(&phantom, &geom, Dose { b: 1e5, r: 10.0 }, 9).unwrap();
    assert_eq!(a.quarter, b.quarter);
    assert_eq!(a.routine, b.routine);
    assert_ne!(a.quarter, a.routine);
}

/// Ratio of the largest to the smallest level-1 directional energy.
fn level_one_anisotropy(image: &Image) -> f64 {
    let coeffs = forward(image, &FilterBank::standard()).unwrap();
    let energies: Vec<f64> = (0..8).map(|k| coeffs.band(k).energy()).collect();
    energies.iter().cloned().fold(0.0, f64::max) / energies.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[test]
fn opposed_bones_produce_directional_streaks() {
    let geom = Geometry::for_grid(128, 3.0, 360);
    let body = |bones: bool| {
        let mut ellipses = vec![
            Ellipse { center: [0.0, 0.0], semi_axes: [165.0, 120.0], rotation: 0.0, mu: MU_WATER },
        ];
        if bones {
            for x in [-110.0, 110.0] {
                ellipses.push(Ellipse { center: [x, 0.0], semi_axes: [14.0, 22.0], rotation: 0.0, mu: 0.028 });
            }
        }
        Phantom::new(ellipses, 192.0).unwrap()
    };
    let noise_anisotropy = |bones: bool| {
        let pair = generate_pair(&body(bones), &geom, Dose { b: 1e5, r: 10.0 }, 21).unwrap();
        level_one_anisotropy(&pair.quarter.sub(&pair.truth).unwrap())
    };
    let (with, without) = (noise_anisotropy(true), noise_anisotropy(false));
    assert!(with > 2.0 * without, "anisotropy with bones {with:.2}, without {without:.2}");
}

#[test]
fn phantom_json_round_trip_and_validation() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let phantom = Phantom::random_body(&mut rng, 192.0, true).unwrap();
    let text = serde_json::to_string(&phantom).unwrap();
    let back: Phantom = serde_json::from_str(&text).unwrap();
    assert_eq!(back, phantom);
    assert!(Phantom::new(vec![Ellipse::disk([0.0, 0.0], 0.0, 0.02)], 10.0).is_err());
    assert!(Phantom::new(vec![Ellipse::disk([0.0, 0.0], 5.0, -0.02)], 10.0).is_err());
    let tiny = Geometry::for_grid(8, 1.0, 4);
    assert!(project(&phantom, &tiny).is_err());
}

proptest! {
    #[test]
    fn hu_round_trip(mu in 0.0f64..0.1, water in 0.01f64..0.03) {
        prop_assert!((hu_to_mu(mu_to_hu(mu, water), water) - mu).abs() <= 1e-12);
        prop_assert_eq!(mu_to_hu(water, water), 0.0);
        prop_assert!((mu_to_hu(0.0, water) + 1000.0).abs() <= 1e-12);
    }
}
