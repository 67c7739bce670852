use std::f64::consts::PI;

use mm_core::closed_form::{
    fluctuating_sphere, fluctuating_sphere_residual, position_wave_residual, radial_divergence_numeric,
    radial_velocity, rotor_pair_residual, AxisWaves, FluctuatingSphereParams, PlaneWaveL, PlaneWaveR, SampledField,
    SpaceTimeField, StandingWave, WaveProfile, WaveSpec,
};
use mm_core::Error;
use nalgebra::Vector3;
use proptest::prelude::*;

fn sine(mode: u32, l: f64, v0: f64, m_max: usize) -> StandingWave {
    StandingWave::new(WaveSpec { profile: WaveProfile::Sine { mode }, l, v0, m_max }).unwrap()
}

/// Field values only, so every derivative goes through the difference defaults.
struct ValuesOnly<F>(F);

impl<F: SpaceTimeField> SpaceTimeField for ValuesOnly<F> {
    fn value(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64> {
        self.0.value(x, t)
    }
}

#[test]
fn radial_field_values() {
    let f = radial_velocity(1.0, &[Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 2.0, 0.0)], 1e-6).unwrap();
    assert_eq!(f.velocity[0], Vector3::new(1.0, 0.0, 0.0));
    assert!((f.velocity[1] - Vector3::new(0.0, 0.25, 0.0)).norm() < 1e-16);
    assert!(f.divergence.iter().all(|d| d.abs() < 1e-15));
    let p = Vector3::new(0.3, -0.7, 1.1);
    assert!(radial_divergence_numeric(2.5, &p, 1e-3).abs() < 1e-9);
}

#[test]
fn radial_field_errors() {
    let err = radial_velocity(1.0, &[Vector3::new(1.0, 1.0, 1.0), Vector3::zeros()], 1e-6).unwrap_err();
    assert!(matches!(err, Error::Singularity { index: 1, .. }));
    assert!(matches!(radial_velocity(0.0, &[Vector3::x()], 1e-6), Err(Error::InvalidParameter(_))));
}

#[test]
fn single_mode_standing_wave() {
    let w = sine(2, 3.0, 1.5, 8);
    assert!((w.coefficients[1] - 1.0).abs() < 1e-12);
    assert!(w.coefficients.iter().enumerate().all(|(i, c)| i == 1 || c.abs() < 1e-12));
    for &(xi, t) in &[(0.4, 0.0), (1.1, 0.7), (2.9, 3.3)] {
        let k = 2.0 * PI / 3.0;
        let exact = (k * xi).sin() * (1.5 * k * t).cos();
        assert!((w.eval(xi, t) - exact).abs() < 1e-11);
    }
    assert!(w.reconstruction_error(200) < 1e-11);
}

#[test]
fn parabola_coefficients() {
    let l = 2.0;
    let w = StandingWave::new(WaveSpec { profile: WaveProfile::Parabola, l, v0: 1.0, m_max: 64 }).unwrap();
    for (i, c) in w.coefficients.iter().enumerate().take(16) {
        let m = (i + 1) as f64;
        // 4ξ(l−ξ)/l² has sine coefficients 32/(m³π³) on odd modes
        let exact = if (i + 1) % 2 == 1 { 32.0 / (m * PI).powi(3) } else { 0.0 };
        assert!((c - exact).abs() < 1e-8, "mode {m}: {c} vs {exact}");
    }
    // 1/m³ decay leaves a tail of order 1/m_max²
    assert!(w.tail > 0.0 && w.tail < 1e-4);
    assert!(w.reconstruction_error(400) < 1e-4);
}

#[test]
fn standing_wave_symmetries() {
    let w = StandingWave::new(WaveSpec {
        profile: WaveProfile::Gaussian { amplitude: 1.0, center: 0.6, width: 0.15 },
        l: 2.0,
        v0: 0.8,
        m_max: 40,
    })
    .unwrap();
    let period = 2.0 * 2.0 / 0.8;
    for &(xi, t) in &[(0.3, 0.1), (1.7, 2.2)] {
        assert!((w.eval(-xi, t) + w.eval(xi, t)).abs() < 1e-12);
        assert!((w.eval(xi + 4.0, t) - w.eval(xi, t)).abs() < 1e-11);
        assert!((w.eval(xi, t + period) - w.eval(xi, t)).abs() < 1e-11);
    }
    assert!(w.eval(0.0, 0.4).abs() < 1e-14 && w.eval(2.0, 0.4).abs() < 1e-12);
}

#[test]
fn standing_wave_finite_difference_residual() {
    let w = sine(3, 1.0, 2.0, 4);
    for &(xi, t) in &[(0.21, 0.0), (0.5, 0.33), (0.87, 1.4)] {
        let r = w.residual_fd(xi, t, 1e-3);
        assert!(r.abs() < 1e-5, "{r}");
    }
}

#[test]
fn invalid_wave_specs() {
    let ok = WaveSpec { profile: WaveProfile::Parabola, l: 1.0, v0: 1.0, m_max: 4 };
    for bad in [
        WaveSpec { l: 0.0, ..ok },
        WaveSpec { v0: -1.0, ..ok },
        WaveSpec { m_max: 0, ..ok },
        WaveSpec { profile: WaveProfile::Gaussian { amplitude: 1.0, center: 0.5, width: 0.0 }, ..ok },
    ] {
        assert!(matches!(StandingWave::new(bad), Err(Error::InvalidParameter(_))));
    }
}

#[test]
fn unresolved_profile_is_reported() {
    let spec = WaveSpec {
        profile: WaveProfile::Gaussian { amplitude: 1.0, center: 0.5, width: 0.01 },
        l: 1.0,
        v0: 1.0,
        m_max: 4,
    };
    assert!(matches!(StandingWave::new(spec), Err(Error::QuadratureNotConverged(_))));
}

fn sphere(a: f64, b: f64) -> FluctuatingSphereParams {
    FluctuatingSphereParams {
        r0: Vector3::new(0.7, -0.4, 1.2),
        omega: Vector3::new(0.3, -0.5, 0.2),
        a,
        b,
        theta: 0.8,
        phi: 1.1,
        wave: None,
    }
}

#[test]
fn exponential_branch_solves_the_ode() {
    let p = sphere(0.0, 1.0);
    let s = p.unit();
    // the printed direction is not normalised: |S|² = sin²φ + cos²θ
    assert!((s.norm_squared() - (p.phi.sin().powi(2) + p.theta.cos().powi(2))).abs() < 1e-15);
    for &t in &[0.0, 0.5, 2.0, 7.5] {
        let (r, _) = fluctuating_sphere(&p, t).unwrap();
        let exact = Vector3::from_fn(|a, _| p.r0[a] * (p.omega[a] * s[a] * t).exp());
        assert!((r - exact).norm() < 1e-12 * exact.norm());
        let res = fluctuating_sphere_residual(&p, t).unwrap();
        assert!(res.norm() < 1e-12, "{t}: {}", res.norm());
    }
}

#[test]
fn linear_branch_solves_the_ode_only_at_start() {
    let p = sphere(1.0, 0.0);
    assert!(fluctuating_sphere_residual(&p, 0.0).unwrap().norm() < 1e-15);
    // d/dt of the linear branch is constant while ω R S grows with t
    let late = fluctuating_sphere_residual(&p, 2.0).unwrap();
    let s = p.unit();
    let expected = Vector3::from_fn(|a, _| -(p.omega[a] * s[a]).powi(2) * p.r0[a] * 2.0);
    assert!((late - expected).norm() < 1e-14);
}

#[test]
fn nonfinite_sphere_parameters() {
    let mut p = sphere(1.0, 1.0);
    p.theta = f64::NAN;
    assert!(matches!(fluctuating_sphere(&p, 0.0), Err(Error::InvalidParameter(_))));
}

#[test]
fn plane_wave_pair() {
    let v0 = 1.7;
    let (r, l) = (PlaneWaveR { v0 }, PlaneWaveL { v0 });
    let (rn, ln) = (ValuesOnly(r), ValuesOnly(l));
    for &(x, t) in &[(Vector3::new(0.2, 0.3, -0.5), 0.0), (Vector3::new(-1.4, 2.0, 0.7), 1.3)] {
        let (a, b) = rotor_pair_residual(&r, &l, v0, &x, t);
        assert!(a.norm() < 1e-14 && b.norm() < 1e-14);
        assert!(position_wave_residual(&r, v0, &x, t).norm() < 1e-14);
        let (a, b) = rotor_pair_residual(&rn, &ln, v0, &x, t);
        assert!(a.norm() < 1e-10 && b.norm() < 1e-10, "{} {}", a.norm(), b.norm());
        assert!(position_wave_residual(&rn, v0, &x, t).norm() < 1e-6);
    }
}

#[test]
fn axis_waves_on_a_lattice() {
    let wave = sine(1, 2.0, 1.2, 4);
    let f = AxisWaves { r0: Vector3::new(1.0, 2.0, 3.0), s: Vector3::new(0.6, 0.0, 0.8), wave, step: 1e-3 };
    let h = 0.02;
    let grid = SampledField::sample([9, 9, 9, 9], [0.3, 0.2, 0.4, 0.6], [h / 1.2, h, h, h], &f);
    let r = grid.wave_residual(1.2).unwrap();
    assert!(r < 1e-5, "{r}");
    let x = Vector3::new(0.5, 0.5, 0.5);
    assert!(position_wave_residual(&f, 1.2, &x, 0.3).norm() < 1e-5);

    let thin = SampledField::sample([4, 9, 9, 9], [0.0; 4], [h; 4], &f);
    assert!(matches!(thin.wave_residual(1.2), Err(Error::InsufficientStencil { axis: "t", .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn series_satisfies_the_wave_equation(xi in 0.0f64..2.0, t in 0.0f64..10.0, v0 in 0.1f64..3.0) {
        let w = StandingWave::new(WaveSpec { profile: WaveProfile::Parabola, l: 2.0, v0, m_max: 64 }).unwrap();
        let r = w.dtt(xi, t) - v0 * v0 * w.dxx(xi, t);
        prop_assert!(r.abs() < 1e-12 * (1.0 + v0 * v0));
    }

    #[test]
    fn radial_field_scales_linearly(k in -5.0f64..5.0, x in 0.5f64..3.0, y in -2.0f64..2.0) {
        prop_assume!(k.abs() > 1e-3);
        let p = [Vector3::new(x, y, 0.3)];
        let one = radial_velocity(1.0, &p, 1e-9).unwrap();
        let scaled = radial_velocity(k, &p, 1e-9).unwrap();
        prop_assert!((scaled.velocity[0] - one.velocity[0] * k).norm() < 1e-14 * (1.0 + k.abs()));
    }

    #[test]
    fn linear_branch_is_linear_in_amplitude(a1 in -3.0f64..3.0, a2 in -3.0f64..3.0, t in 0.0f64..5.0) {
        let (r1, v1) = fluctuating_sphere(&sphere(a1, 0.0), t).unwrap();
        let (r2, v2) = fluctuating_sphere(&sphere(a2, 0.0), t).unwrap();
        let (r, v) = fluctuating_sphere(&sphere(a1 + a2, 0.0), t).unwrap();
        prop_assert!((r - r1 - r2).norm() < 1e-13 && (v - v1 - v2).norm() < 1e-13);
    }
}
