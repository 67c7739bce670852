use std::f64::consts::PI;

use mm_core::chart::{Axis, ChartGrid};
use mm_core::geometry::{integrate_surface, GeometryState, TensorField};
use mm_core::shape::{GraphHeight, RadialHarmonic, ShapeSpec};
use mm_core::transport::{
    area_element_rate, check_space_transport, check_surface_transport, covariant_time_derivative, decompose_velocity,
    incompressibility_residual, mean_curvature_rate, metric_rate, time_christoffel, Motion, MovingSurface,
    TemporalSamples,
};
use mm_core::Error;
use nalgebra::{Matrix2, Vector3};
use proptest::prelude::*;

const EXPANDING: Motion = Motion::ExpandingSphere { r0: 1.0, rate: 0.1 };

fn sphere_surface(motion: Motion, n: usize) -> MovingSurface {
    MovingSurface::new(motion, ChartGrid::lat_long(n, 2 * n).unwrap(), 1e-4).unwrap()
}

#[test]
fn constant_velocity_decomposes_on_sphere() {
    let chart = ChartGrid::lat_long(32, 64).unwrap();
    let g = GeometryState::from_shape(&chart, &ShapeSpec::Sphere { radius: 1.0 }).unwrap();
    let v = vec![Vector3::new(1.0, 0.0, 0.0); g.len()];
    let vel = decompose_velocity(&v, &g).unwrap();
    assert!(vel.reconstruction_residual(&g) < 1e-12);
    for k in g.valid_nodes() {
        let (t, f) = chart.coords(k);
        assert!((vel.normal_speed[k] - t.sin() * f.cos()).abs() < 1e-5);
        // V_θ = cos θ cos φ, V^θ equal on the unit sphere
        assert!((vel.tangent_lower[k][0] - t.cos() * f.cos()).abs() < 1e-5);
        assert!((vel.tangent[k][0] - vel.tangent_lower[k][0]).abs() < 1e-4);
    }
}

#[test]
fn normal_velocity_has_no_tangent_part() {
    let chart = ChartGrid::doubly_periodic(32, 32).unwrap();
    let g = GeometryState::from_shape(&chart, &ShapeSpec::Torus { major: 2.0, minor: 0.5 }).unwrap();
    let v: Vec<Vector3<f64>> = g.normal.iter().map(|n| n * 3.0).collect();
    let vel = decompose_velocity(&v, &g).unwrap();
    for k in 0..g.len() {
        assert!((vel.normal_speed[k] - 3.0).abs() < 1e-12);
        assert!(vel.tangent[k].norm() < 1e-12);
    }
}

#[test]
fn expanding_sphere_rates() {
    let surface = sphere_surface(EXPANDING, 64);
    let snap = surface.snapshot(0.0).unwrap();
    let (g, vel) = (&snap.geometry, &snap.velocity);
    let gdot = time_christoffel(vel, g).unwrap();
    let sdot = metric_rate(vel, g).unwrap();
    let adot = area_element_rate(vel, g).unwrap();
    let hdot = mean_curvature_rate(vel, g).unwrap();
    for k in g.valid_nodes() {
        assert!((vel.normal_speed[k] - 0.1).abs() < 1e-9);
        // Γ̇ = (Ṙ/R) δ
        assert!((gdot.rate[k] - Matrix2::identity() * 0.1).amax() < 1e-5);
        // ∂_t S_ij = 2 Ṙ/R S_ij
        assert!((sdot[k] - g.metric[k] * 0.2).amax() < 1e-5);
        let (t, _) = g.chart.coords(k);
        assert!((adot[k] - 0.2 * t.sin()).abs() < 1e-5);
        // d/dt(−2/R) = 2Ṙ/R²
        assert!((hdot[k] - 0.2).abs() < 1e-5);
    }
}

#[test]
fn rigid_rotation_is_an_isometry() {
    let motion = Motion::RigidRotation {
        shape: ShapeSpec::Torus { major: 2.0, minor: 0.5 },
        axis: [0.3, -0.2, 1.0],
        omega: 0.7,
    };
    let surface = MovingSurface::new(motion, ChartGrid::doubly_periodic(48, 48).unwrap(), 1e-4).unwrap();
    let snap = surface.snapshot(0.3).unwrap();
    let sdot = metric_rate(&snap.velocity, &snap.geometry).unwrap();
    let hdot = mean_curvature_rate(&snap.velocity, &snap.geometry).unwrap();
    let g = &snap.geometry;
    let grad = g.gradient(&g.mean);
    for k in g.valid_nodes() {
        assert!(sdot[k].amax() < 1e-4, "{}", sdot[k].amax());
        // ∇̇H = ∂_tH − V^i∇_iH, and ∂_tH vanishes at fixed material points
        let observed = -snap.velocity.tangent[k].dot(&grad[k]);
        assert!((hdot[k] - observed).abs() < 1e-3, "{} {}", hdot[k], observed);
    }
}

#[test]
fn surface_and_space_transport_on_expanding_sphere() {
    let surface = sphere_surface(EXPANDING, 64);
    let one = |g: &GeometryState, _t: f64| vec![1.0; g.len()];
    let c = check_surface_transport(&one, &surface, 0.5, false).unwrap();
    let r = 1.05;
    assert!((c.lhs - 8.0 * PI * r * 0.1).abs() < 1e-5);
    assert!(c.relative < 1e-5, "{c:?}");
    let unit = |_x: &Vector3<f64>, _t: f64| 1.0;
    let v = check_space_transport(&unit, &surface, 0.5).unwrap();
    assert!((v.lhs - 4.0 * PI * r * r * 0.1).abs() < 1e-6);
    assert!(v.relative < 1e-6, "{v:?}");
}

#[test]
fn contour_term_closes_the_balance_on_open_patches() {
    let motion = Motion::TravellingGraph {
        height: GraphHeight::Waves { amplitude: 0.2, kx: 1.0, ky: 2.0 },
        cx: 0.3,
        cy: -0.1,
    };
    let chart = ChartGrid::new(Axis::open(64, -1.0, 1.0), Axis::open(64, -1.0, 1.0)).unwrap();
    let surface = MovingSurface::new(motion, chart, 1e-4).unwrap();
    let f = |g: &GeometryState, t: f64| g.position.iter().map(|p| 1.0 + p.x * p.y + t * p.z).collect::<Vec<_>>();
    let with = check_surface_transport(&f, &surface, 0.2, true).unwrap();
    assert!(with.relative < 1e-5, "{with:?}");
}

#[test]
fn contour_is_rejected_on_closed_surfaces() {
    let surface = sphere_surface(EXPANDING, 16);
    let one = |g: &GeometryState, _t: f64| vec![1.0; g.len()];
    assert!(matches!(check_surface_transport(&one, &surface, 0.0, true), Err(Error::ContourOnClosedSurface)));
}

#[test]
fn volume_operations_need_a_closed_surface() {
    let chart = ChartGrid::new(Axis::open(16, -1.0, 1.0), Axis::open(16, -1.0, 1.0)).unwrap();
    let motion = Motion::Static(ShapeSpec::Graph { height: GraphHeight::Flat });
    let surface = MovingSurface::new(motion, chart, 1e-3).unwrap();
    let unit = |_x: &Vector3<f64>, _t: f64| 1.0;
    assert!(matches!(check_space_transport(&unit, &surface, 0.0), Err(Error::OpenSurface)));
    let snap = surface.snapshot(0.0).unwrap();
    assert!(matches!(incompressibility_residual(&snap.velocity, &snap.geometry), Err(Error::OpenSurface)));
}

#[test]
fn isochoric_ellipsoid_has_zero_net_flux() {
    let motion =
        Motion::OscillatingEllipsoid { a: 1.0, b: 1.2, c: 0.8, amplitude: 0.2, omega: 1.3, isochoric: true };
    let surface = sphere_surface(motion, 64);
    let snap = surface.snapshot(0.4).unwrap();
    let flux = incompressibility_residual(&snap.velocity, &snap.geometry).unwrap();
    let abs: Vec<f64> = snap.velocity.normal_speed.iter().map(|c| if c.is_finite() { c.abs() } else { 0.0 }).collect();
    let scale = integrate_surface(&abs, &snap.geometry).unwrap();
    assert!(scale > 0.1);
    assert!(flux.abs() < 1e-6 * scale, "{flux} vs {scale}");
}

#[test]
fn metric_has_zero_covariant_time_derivative() {
    let motion = Motion::BreathingRadial { radius: 1.0, amplitude: 0.2, omega: 1.0, harmonic: RadialHarmonic::Sectoral2 };
    let surface = sphere_surface(motion, 64);
    let d = surface.dt_probe;
    let t = 0.7;
    let snap = surface.snapshot(t).unwrap();
    let g = &snap.geometry;
    let samples = TemporalSamples {
        prev: Some(TensorField::Lower(surface.geometry(t - d).unwrap().metric)),
        next: Some(TensorField::Lower(surface.geometry(t + d).unwrap().metric)),
        dt: d,
    };
    let gdot = time_christoffel(&snap.velocity, g).unwrap();
    let out = covariant_time_derivative(&TensorField::Lower(g.metric.clone()), &samples, &snap.velocity, &gdot, g)
        .unwrap();
    let TensorField::Lower(m) = out else { panic!("rank 2 lower expected") };
    let worst = g.valid_nodes().map(|k| m[k].amax()).fold(0.0, f64::max);
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn missing_samples_are_reported() {
    let surface = sphere_surface(EXPANDING, 16);
    let snap = surface.snapshot(0.0).unwrap();
    let g = &snap.geometry;
    let gdot = time_christoffel(&snap.velocity, g).unwrap();
    let f = TensorField::Scalar(vec![1.0; g.len()]);
    let samples = TemporalSamples { prev: None, next: Some(f.clone()), dt: 1e-3 };
    let err = covariant_time_derivative(&f, &samples, &snap.velocity, &gdot, g).unwrap_err();
    assert!(matches!(err, Error::MissingTemporalSamples(_)));
}

#[test]
fn probe_step_must_be_positive() {
    let chart = ChartGrid::lat_long(16, 32).unwrap();
    assert!(MovingSurface::new(EXPANDING, chart.clone(), 0.0).is_err());
    let torus_motion = Motion::Static(ShapeSpec::Torus { major: 2.0, minor: 0.5 });
    assert!(matches!(MovingSurface::new(torus_motion, chart, 1e-3), Err(Error::TopologyMismatch(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decomposition_reconstructs_any_velocity(
        vx in -5.0f64..5.0, vy in -5.0f64..5.0, vz in -5.0f64..5.0, w in -2.0f64..2.0,
    ) {
        let chart = ChartGrid::lat_long(24, 48).unwrap();
        let g = GeometryState::from_shape(&chart, &ShapeSpec::Ellipsoid { a: 1.0, b: 1.2, c: 0.8 }).unwrap();
        let v: Vec<Vector3<f64>> = g.position.iter().map(|p| Vector3::new(vx, vy, vz) + p.cross(&Vector3::z()) * w).collect();
        let vel = decompose_velocity(&v, &g).unwrap();
        prop_assert!(vel.reconstruction_residual(&g) < 1e-12);
    }

    #[test]
    fn area_rate_matches_expansion(rate in -0.5f64..0.5, t in 0.0f64..1.0) {
        let surface = sphere_surface(Motion::ExpandingSphere { r0: 1.0, rate }, 32);
        let one = |g: &GeometryState, _t: f64| vec![1.0; g.len()];
        let c = check_surface_transport(&one, &surface, t, false).unwrap();
        let r = 1.0 + rate * t;
        prop_assert!((c.lhs - 8.0 * PI * r * rate).abs() < 1e-4);
        prop_assert!(c.residual.abs() < 1e-4);
    }
}
