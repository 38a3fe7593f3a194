mod common;

use common::*;
use placewise_core::scene::{generate_candidates, CandidateGrid, GridOptions, ZMode};
use placewise_core::stability::{
    builtin_backend, is_stable, simulate_placement, stable_set, sweep_stability, BackendError, OrientationTrace,
    PhysicsBackend, SigmaMode, SimConfig, StabilityError, Tilt,
};
use placewise_core::Vec3;
use proptest::prelude::*;
use serde_json::json;

fn quiet() -> SimConfig {
    SimConfig { perturbation_tilts: vec![], ..SimConfig::default() }
}

fn lean(w: f64) -> f64 {
    2.0 * w.min(1.0).acos()
}

#[test]
fn cube_on_flat_table_stays_put() {
    let scene = cube_on_table();
    let p = Vec3::new(0.0, 0.0, 0.05);
    let t = simulate_placement(&builtin_backend(), &scene, &p, &quiet()).unwrap();
    assert_eq!(t.samples.len(), 200);
    assert!(t.samples.iter().all(|&q| q == t.samples[0]));
    assert!(t.settled && !t.penetrated);

    let t = simulate_placement(&builtin_backend(), &scene, &p, &SimConfig::default()).unwrap();
    assert!((t.samples[199] - t.samples[0]).abs() < 1e-6);
    assert!(t.max_deviation() > 0.0, "tilt must be visible in the trace");
    assert!(t.settled && is_stable(&t, &SimConfig::default()));
}

#[test]
fn tilted_resting_cube_recovers_before_the_end() {
    let backend = builtin_backend();
    let scene = cube_on_table();
    let mut s = backend.place(&scene, &scene.placement_object, &Vec3::new(0.0, 0.0, 0.05)).unwrap();
    let q1 = backend.orientation(&s).w();
    s = backend.step(&s, 0.005).unwrap();
    s = backend.tilt(&s, &Vec3::x(), 0.05).unwrap();
    assert!(!backend.at_rest(&s));
    let mut recovered = None;
    for k in 0..200 {
        s = backend.step(&s, 0.005).unwrap();
        if (backend.orientation(&s).w() - q1).abs() < 1e-6 && recovered.is_none() {
            recovered = Some(k);
        }
    }
    assert!(recovered.is_some());
    assert!(backend.at_rest(&s));
}

/// Explicit-Euler pendulum of a cube rotating about the platform edge until its
/// far bottom edge meets the floor. Returns the scalar part at every sample.
fn pendulum_oracle(steps: usize, dt: f64, overhang: f64, height: f64) -> Vec<f64> {
    let g = 9.81;
    let (a, h) = (0.05, 0.05);
    let ell = overhang * 2.0 * a - a;
    let inertia = (2.0 * a * 2.0 * a) / 6.0 + ell * ell + h * h;
    let land = (height / (overhang * 2.0 * a)).asin();
    let (mut theta, mut omega) = (0.0f64, 0.0f64);
    let mut out = vec![1.0];
    while out.len() < steps {
        if theta < land {
            let lever = ell * theta.cos() + h * theta.sin();
            omega += g * lever / inertia * dt;
            theta = (theta + omega * dt).min(land);
        }
        out.push((theta / 2.0).cos());
    }
    out
}

#[test]
fn overhanging_cube_tips_like_a_pendulum() {
    let height = 0.04;
    let scene = step_scene(height, block([0.05, 0.05, 0.05]));
    // 60% of the cube hangs past the platform edge at x = 0.
    let p = Vec3::new(0.01, 0.0, height + 0.05);
    let t = simulate_placement(&builtin_backend(), &scene, &p, &quiet()).unwrap();
    let oracle = pendulum_oracle(200, 0.005, 0.6, height);
    let dev: Vec<f64> = t.samples.iter().map(|q| 1.0 - q).collect();
    assert!(dev.windows(2).all(|w| w[1] >= w[0] - 1e-12), "deviation grows monotonically");
    let land = oracle[199];
    for (k, (a, b)) in t.samples.iter().zip(&oracle).enumerate() {
        // Landing is resolved to within the penetration tolerance.
        let tol = if *b == land { 1e-5 } else { 1e-9 };
        assert!((a - b).abs() <= tol, "sample {k}: sim {a} oracle {b}");
    }
    assert!(t.settled);
    assert!(t.max_deviation() > 0.05);
    assert!(!is_stable(&t, &SimConfig::default()));
    let full = simulate_placement(&builtin_backend(), &scene, &p, &SimConfig::default()).unwrap();
    assert!(!is_stable(&full, &SimConfig::default()));
}

#[test]
fn cube_off_a_ledge_falls_out_of_the_workspace() {
    let scene = scene(vec![table()], block([0.05, 0.05, 0.05]), [0.3, -0.2, -0.5], [0.7, 0.2, 0.3]);
    let p = Vec3::new(0.53, 0.0, 0.05);
    let t = simulate_placement(&builtin_backend(), &scene, &p, &quiet()).unwrap();
    assert!(!t.settled);
    assert!(!is_stable(&t, &SimConfig::default()));
}

#[test]
fn sunk_point_is_penetrated() {
    let scene = cube_on_table();
    let t = simulate_placement(&builtin_backend(), &scene, &Vec3::new(0.0, 0.0, 0.0), &SimConfig::default()).unwrap();
    assert!(t.penetrated && !t.settled);
    assert_eq!(t.samples.len(), 200);
    assert!(!is_stable(&t, &SimConfig::default()));
}

#[test]
fn plate_in_slot_leans_no_further_than_the_rails_allow() {
    let gap = 0.015;
    let tilt = SimConfig { perturbation_tilts: vec![Tilt { axis: [0.0, 1.0, 0.0], angle: 0.2 }], ..quiet() };
    for half in [0.005, 0.001] {
        let scene = slot_scene(gap, plate(half));
        let t = simulate_placement(&builtin_backend(), &scene, &Vec3::new(0.0, 0.0, 0.05), &tilt).unwrap();
        let bound = ((gap - 2.0 * half) / RAIL_HEIGHT).asin();
        let final_lean = lean(*t.samples.last().unwrap());
        assert!(t.settled, "half thickness {half}");
        assert!(final_lean <= bound + 1e-9, "lean {final_lean} bound {bound}");
        if half == 0.001 {
            // Thin enough that it stays propped against the rail.
            assert!(final_lean > 0.05);
        }
    }
}

#[test]
fn spheres_are_rejected() {
    let ball = json!({"id": "ball", "label": "Ball", "mass": 0.1, "shapes": [{"kind": "sphere", "dims": [0.03]}]});
    let sc = scene(vec![table()], ball, [-0.2, -0.2, 0.0], [0.2, 0.2, 0.3]);
    let err = simulate_placement(&builtin_backend(), &sc, &Vec3::new(0.0, 0.0, 0.03), &quiet()).unwrap_err();
    assert!(matches!(err, StabilityError::Backend { source: BackendError::UnsupportedGeometry(_), .. }));

    let mut objs = vec![table()];
    objs.push(json!({"id": "ball", "label": "Ball", "static": true, "pose": {"position": [0.0, 0.0, 0.03]},
                     "shapes": [{"kind": "sphere", "dims": [0.03]}]}));
    let scene = scene(objs, block([0.05, 0.05, 0.05]), [-0.2, -0.2, 0.0], [0.2, 0.2, 0.3]);
    let err = simulate_placement(&builtin_backend(), &scene, &Vec3::new(0.0, 0.0, 0.12), &quiet()).unwrap_err();
    assert!(matches!(err, StabilityError::Backend { source: BackendError::UnsupportedGeometry(_), .. }));
    // A far-away sphere never forms a contact pair.
    let ok = simulate_placement(&builtin_backend(), &scene, &Vec3::new(0.15, 0.15, 0.05), &quiet());
    assert!(ok.is_ok());
}

#[test]
fn flat_table_sweep_is_fully_stable() {
    let scene = scene(vec![table()], block([0.02, 0.02, 0.02]), [0.0, 0.0, 0.0], [0.1, 0.1, 0.2]);
    let grid = generate_candidates(&scene, &GridOptions::new(0.05, ZMode::SurfaceSnap)).unwrap();
    assert_eq!(grid.len(), 9);
    let out = sweep_stability(&builtin_backend(), &scene, &grid, &SimConfig::default()).unwrap();
    assert_eq!(out.diagnostics.stable_fraction(), 1.0);
    assert_eq!(out.stable.len(), 9);
    let csv = out.diagnostics.to_csv();
    assert_eq!(csv.lines().count(), 10);
    assert!(csv.starts_with("x,y,z,included,"));
    let again = sweep_stability(&builtin_backend(), &scene, &grid, &SimConfig::default()).unwrap();
    assert_eq!(out.traces, again.traces);
}

#[test]
fn empty_grid_is_a_contract_violation() {
    let scene = cube_on_table();
    let grid = CandidateGrid::explicit(&scene, vec![]).unwrap();
    let err = sweep_stability(&builtin_backend(), &scene, &grid, &SimConfig::default()).unwrap_err();
    assert!(matches!(err, StabilityError::ContractViolation(_)));
}

/// Closed-form verdict for a box resting near a table edge: the centre of mass
/// must stay over the footprint both untilted and after each tilt.
fn box_oracle(half: [f64; 3], edge_distance: f64, tilt: f64) -> Option<bool> {
    let [hx, hy, h] = half;
    let margins = [
        edge_distance,
        hx.min(hy),
        edge_distance * tilt.cos() - h * tilt.sin(),
        hx * tilt.cos() - h * tilt.sin(),
        hy * tilt.cos() - h * tilt.sin(),
    ];
    if margins.iter().any(|m| (m - 1e-4).abs() < 2e-6) {
        return None;
    }
    Some(margins.iter().all(|m| *m >= 1e-4))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn box_near_edge_matches_closed_form(
        hx in 0.01f64..0.05, hy in 0.01f64..0.05, h in 0.01f64..0.12, frac in -0.3f64..0.95,
    ) {
        // The table edge is at x = 0.5; the centre of mass sits `d` inside it.
        let d = frac * hx;
        let half = [hx, hy, h];
        prop_assume!(box_oracle(half, d, 0.05).is_some());
        let expect = box_oracle(half, d, 0.05).unwrap();
        let scene = scene(vec![table()], block(half), [0.3, -0.2, -0.5], [0.7, 0.2, 0.3]);
        let t = simulate_placement(&builtin_backend(), &scene, &Vec3::new(0.5 - d, 0.0, h), &SimConfig::default()).unwrap();
        prop_assert_eq!(is_stable(&t, &SimConfig::default()), expect, "deviation {}", t.max_deviation());
    }

    #[test]
    fn larger_tolerance_never_shrinks_the_set(
        rows in proptest::collection::vec((proptest::collection::vec(0.8f64..1.0, 6), any::<bool>(), any::<bool>()), 1..12),
        s1 in 0.0f64..0.2, extra in 0.0f64..0.2,
    ) {
        let traces: Vec<OrientationTrace> = rows
            .iter()
            .enumerate()
            .map(|(i, (samples, settled, pen))| OrientationTrace {
                point: Vec3::new(i as f64, 0.0, 0.0),
                samples: samples.clone(),
                settled: *settled,
                penetrated: *pen,
            })
            .collect();
        let small = SimConfig { stability_tolerance: s1, ..SimConfig::default() };
        let large = SimConfig { stability_tolerance: s1 + extra, ..SimConfig::default() };
        let a = stable_set(&traces, &small).unwrap();
        let b = stable_set(&traces, &large).unwrap();
        for p in a.points() {
            prop_assert!(b.points().any(|q| q == p));
        }
        for e in &b.entries {
            prop_assert!((0.0..=1.0).contains(&e.reward_norm));
        }
        if let Some(best) = b.entries.iter().max_by(|x, y| x.reward_raw.total_cmp(&y.reward_raw)) {
            prop_assert_eq!(best.reward_norm, 1.0);
        }
        let var = SimConfig { sigma_mode: SigmaMode::SeriesVariance, ..SimConfig::default() };
        prop_assert!(stable_set(&traces, &var).is_ok());
    }
}
