use std::f64::consts::TAU;

use mm_core::ns::{
    analytic_ns_residual, continuity_residual, energy_flux_divergence, momentum_flux, ns_residual, residual_error,
    stress_state, viscous_stress, viscous_stress_from_jacobian, AnalyticFlow, BoxGrid, FlowCase, FlowSamples,
};
use mm_core::Error;
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn arr() -> impl Strategy<Value = [f64; 3]> {
    [-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0]
}

#[test]
fn dilation_stress_is_isotropic() {
    let grid = BoxGrid::open_cube(9, 1.0).unwrap();
    let (alpha, mu, xi) = (0.4, 1.3, 0.7);
    let flow = FlowCase::Dilation { alpha, p0: 2.0 }.flow(&grid, 1.0, mu, xi);
    let sigma = viscous_stress(&flow).unwrap();
    // ∂_αV_β = α δ_αβ: the deviatoric part cancels and only 3ξα δ survives
    let expected = Matrix3::identity() * (3.0 * xi * alpha);
    for s in &sigma {
        assert!((s - expected).amax() < 1e-12);
        assert!((s.trace() - 3.0 * xi * 3.0 * alpha).abs() < 1e-12);
    }
}

#[test]
fn shear_stress_and_residual() {
    let grid = BoxGrid::periodic_cube(32, TAU).unwrap();
    let (amplitude, mu) = (0.8, 0.3);
    let flow = FlowCase::Shear { amplitude, p0: 1.0 }.flow(&grid, 1.2, mu, 0.1);
    let sigma = viscous_stress(&flow).unwrap();
    let r = ns_residual(&flow, &FlowSamples::steady(&flow.velocity)).unwrap();
    let h4 = grid.spacing().powi(4);
    for k in 0..grid.len() {
        let y = grid.point(k).y;
        // σ'_xy = μ A cos y, residual −μΔV = (μ A sin y, 0, 0)
        assert!((sigma[k][(0, 1)] - mu * amplitude * y.cos()).abs() < h4);
        assert_eq!(sigma[k][(0, 1)], sigma[k][(1, 0)]);
        assert!((r[k] - Vector3::new(mu * amplitude * y.sin(), 0.0, 0.0)).amax() < h4);
    }
    let (err, _) = residual_error(&FlowCase::Shear { amplitude, p0: 1.0 }, &grid, 1.2, mu, 0.1).unwrap();
    assert!(err < h4);
}

#[test]
fn rest_has_exactly_zero_residual() {
    let grid = BoxGrid::periodic_cube(8, 1.0).unwrap();
    let flow = FlowCase::Rest { p0: 101.3 }.flow(&grid, 1.0, 0.5, 0.5);
    let r = ns_residual(&flow, &FlowSamples::steady(&flow.velocity)).unwrap();
    assert!(r.iter().all(|v| *v == Vector3::zeros()));
    let state = stress_state(&flow).unwrap();
    for m in &state.momentum_flux {
        assert_eq!(*m, Matrix3::identity() * 101.3);
    }
}

#[test]
fn rotation_balances_centripetal_pressure() {
    let case = FlowCase::RigidRotation { omega: 0.9, rho: 1.4 };
    let exact = analytic_ns_residual(&case, 1.4, 0.2, 0.1, &Vector3::new(0.3, -0.2, 0.5), 0.0);
    assert!(exact.amax() < 1e-15);
    let grid = BoxGrid::open_cube(11, 1.0).unwrap();
    let flow = case.flow(&grid, 1.4, 0.2, 0.1);
    let r = ns_residual(&flow, &FlowSamples::steady(&flow.velocity)).unwrap();
    let h = grid.spacing();
    assert!(r.iter().all(|v| v.amax() < h * h));
}

#[test]
fn vortex_residual_converges() {
    let case = FlowCase::Vortex { omega: 1.0, width: 0.5, rho: 1.0 };
    // the pressure balances the centripetal term exactly
    let p = Vector3::new(0.31, -0.17, 0.4);
    assert!(analytic_ns_residual(&case, 1.0, 0.0, 0.0, &p, 0.0).amax() < 1e-15);
    let hd = 1e-5;
    let fd = (case.pressure(&(p + Vector3::x() * hd), 0.0) - case.pressure(&(p - Vector3::x() * hd), 0.0)) / (2.0 * hd);
    assert!((fd - case.pressure_gradient(&p, 0.0).x).abs() < 1e-8);

    let coarse = residual_error(&case, &BoxGrid::open_cube(17, 1.0).unwrap(), 1.0, 0.05, 0.0).unwrap().0;
    let fine = residual_error(&case, &BoxGrid::open_cube(33, 1.0).unwrap(), 1.0, 0.05, 0.0).unwrap().0;
    assert!((coarse / fine).log2() > 2.0, "{coarse} {fine}");
}

#[test]
fn momentum_flux_divergence_is_advection() {
    // with σ' = 0 and uniform p, ∂_β(ρ V_α V^β) = ρ (V·∇) V for a solenoidal V
    let grid = BoxGrid::open_cube(9, 1.0).unwrap();
    let mut flow = FlowCase::RigidMotion { a: [0.3, -0.1, 0.2], omega: [0.4, 0.5, -0.6], p0: 0.0 }.flow(&grid, 2.0, 0.0, 0.0);
    flow.pressure = vec![1.5; grid.len()];
    let state = stress_state(&flow).unwrap();
    let div_m = grid.tensor_divergence(&state.momentum_flux);
    let jac = grid.jacobian(&flow.velocity);
    for k in 0..grid.len() {
        let advect = jac[k] * flow.velocity[k] * 2.0;
        assert!((div_m[k] - advect).amax() < 1e-12);
    }
}

#[test]
fn energy_flux_and_continuity() {
    let grid = BoxGrid::periodic_cube(16, TAU).unwrap();
    let flow = FlowCase::Shear { amplitude: 1.0, p0: 0.0 }.flow(&grid, 1.0, 0.0, 0.0);
    assert!(energy_flux_divergence(&flow.energy, &flow).unwrap().iter().all(|x| *x == 0.0));
    let e = vec![2.5; grid.len()];
    assert!(energy_flux_divergence(&e, &flow).unwrap().iter().all(|x| x.abs() < 1e-12));
    let c = continuity_residual(&flow, &flow.rho, &flow.rho, 0.1).unwrap();
    assert!(c.iter().all(|x| x.abs() < 1e-12));

    // a dilating flow thins the density at rate 3α ρ
    let open = BoxGrid::open_cube(9, 1.0).unwrap();
    let alpha = 0.2;
    let flow = FlowCase::Dilation { alpha, p0: 0.0 }.flow(&open, 1.0, 0.0, 0.0);
    let dt = 1e-3;
    let prev: Vec<f64> = vec![(3.0 * alpha * dt).exp(); open.len()];
    let next: Vec<f64> = vec![(-3.0 * alpha * dt).exp(); open.len()];
    let c = continuity_residual(&flow, &prev, &next, dt).unwrap();
    assert!(c.iter().all(|x| x.abs() < 1e-6));
}

#[test]
fn missing_samples() {
    let grid = BoxGrid::periodic_cube(8, 1.0).unwrap();
    let flow = FlowCase::Rest { p0: 0.0 }.flow(&grid, 1.0, 0.0, 0.0);
    let samples = FlowSamples { prev: Some(flow.velocity.clone()), next: None, dt: 0.1 };
    assert!(matches!(ns_residual(&flow, &samples), Err(Error::MissingTemporalSamples(_))));
    assert!(matches!(ns_residual(&flow, &FlowSamples::default()), Err(Error::MissingTemporalSamples(_))));
}

#[test]
fn unsteady_samples_enter_the_residual() {
    let grid = BoxGrid::periodic_cube(8, 1.0).unwrap();
    let flow = FlowCase::Rest { p0: 0.0 }.flow(&grid, 2.0, 0.0, 0.0);
    let dt = 0.1;
    let prev = vec![Vector3::new(-0.1, 0.0, 0.0); grid.len()];
    let next = vec![Vector3::new(0.1, 0.0, 0.0); grid.len()];
    let r = ns_residual(&flow, &FlowSamples { prev: Some(prev), next: Some(next), dt }).unwrap();
    assert!(r.iter().all(|v| (v - Vector3::new(2.0, 0.0, 0.0)).amax() < 1e-14));
}

#[test]
fn invalid_flows() {
    let grid = BoxGrid::periodic_cube(8, 1.0).unwrap();
    let mut flow = FlowCase::Rest { p0: 0.0 }.flow(&grid, 1.0, 0.1, 0.1);
    flow.rho[3] = -1.0;
    assert!(matches!(viscous_stress(&flow), Err(Error::InvalidParameter(_))));
    let mut flow = FlowCase::Rest { p0: 0.0 }.flow(&grid, 1.0, 0.1, 0.1);
    flow.mu = -0.1;
    assert!(matches!(viscous_stress(&flow), Err(Error::InvalidParameter(_))));
    let mut flow = FlowCase::Rest { p0: 0.0 }.flow(&grid, 1.0, 0.1, 0.1);
    flow.pressure.pop();
    assert!(matches!(momentum_flux(&flow, &[]), Err(Error::LengthMismatch { .. })));
}

#[test]
fn grids_need_stencil_room() {
    assert!(matches!(BoxGrid::periodic_cube(4, 1.0), Err(Error::InsufficientStencil { axis: "x", .. })));
    assert!(matches!(BoxGrid::open_cube(3, 1.0), Err(Error::InsufficientStencil { .. })));
    assert!(BoxGrid::new([8, 8, 8], [0.1, 0.0, 0.1], [0.0; 3], [true; 3]).is_err());
    let g = BoxGrid::new([8, 9, 10], [0.1, 0.2, 0.3], [1.0, 2.0, 3.0], [true, false, true]).unwrap();
    let node = g.index([3, 4, 5]);
    assert_eq!(g.ijk(node), [3, 4, 5]);
    assert!((g.point(node) - Vector3::new(1.3, 2.8, 4.5)).amax() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stress_is_exactly_symmetric(
        entries in proptest::collection::vec(-10.0f64..10.0, 9), mu in 0.0f64..5.0, xi in 0.0f64..5.0,
    ) {
        let j = Matrix3::from_iterator(entries);
        let s = viscous_stress_from_jacobian(&j, mu, xi);
        prop_assert_eq!(s, s.transpose());
        prop_assert!((s.trace() - 3.0 * xi * j.trace()).abs() < 1e-12 * (1.0 + s.amax()));
    }

    #[test]
    fn rigid_motion_is_stress_free(a in arr(), omega in arr(), mu in 0.0f64..3.0, xi in 0.0f64..3.0) {
        let grid = BoxGrid::open_cube(9, 1.0).unwrap();
        let flow = FlowCase::RigidMotion { a, omega, p0: 0.0 }.flow(&grid, 1.0, mu, xi);
        let sigma = viscous_stress(&flow).unwrap();
        prop_assert!(sigma.iter().all(|s| s.amax() < 1e-12));
    }

    #[test]
    fn constant_shift_leaves_stress_unchanged(shift in arr(), omega in arr()) {
        // shifts and data on a dyadic lattice stay exact in floating point
        let q = |x: f64| (x * 8.0).round() / 8.0;
        let shift = Vector3::new(q(shift[0]), q(shift[1]), q(shift[2]));
        let omega = [q(omega[0]), q(omega[1]), q(omega[2])];
        let grid = BoxGrid::new([9; 3], [0.25; 3], [-1.0; 3], [false; 3]).unwrap();
        let base = FlowCase::RigidMotion { a: [0.0; 3], omega, p0: 0.0 }.flow(&grid, 1.0, 0.7, 0.3);
        let mut moved = base.clone();
        for v in &mut moved.velocity {
            *v += shift;
        }
        prop_assert_eq!(viscous_stress(&base).unwrap(), viscous_stress(&moved).unwrap());
    }
}
