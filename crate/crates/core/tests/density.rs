use placewise_core::density::{
    blend_weights, build_density, kde_evaluate, sample_candidates, BlendConfig, DensityField, DensityGrid, GridSpec,
    KdeConfig, WeightedPoints, GRID_HEADER_BYTES,
};
use placewise_core::reasoning::{ReceptacleEntry, ReceptacleSet};
use placewise_core::stability::{StableEntry, StableSet};
use placewise_core::{Aabb, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct summation written out coordinate by coordinate.
fn oracle(points: &[[f64; 3]], weights: &[f64], h: f64, q: [f64; 3]) -> f64 {
    let mut sum = 0.0;
    for (p, w) in points.iter().zip(weights) {
        let d2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) + (q[2] - p[2]).powi(2);
        sum += w * (-d2 / (2.0 * h * h)).exp();
    }
    sum / (points.len() as f64 * h)
}

fn random_support(rng: &mut ChaCha8Rng, n: usize) -> (Vec<[f64; 3]>, Vec<f64>) {
    let pts = (0..n).map(|_| [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(0.0..0.3)]).collect();
    let w = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    (pts, w)
}

fn support(pts: &[[f64; 3]], w: &[f64]) -> WeightedPoints {
    WeightedPoints::new(pts.iter().map(|p| Vec3::from(*p)).collect(), w.to_vec()).unwrap()
}

#[test]
fn kde_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (pts, w) = random_support(&mut rng, 50);
    let s = support(&pts, &w);
    let cfg = KdeConfig::default();
    for _ in 0..20 {
        let q = [rng.gen_range(-0.35..0.35), rng.gen_range(-0.35..0.35), rng.gen_range(-0.05..0.35)];
        let want = oracle(&pts, &w, 0.05, q);
        let got = kde_evaluate(&s, &cfg, &Vec3::from(q)).unwrap();
        assert!((got - want).abs() <= 1e-9 * want.abs().max(f64::MIN_POSITIVE), "{got} vs {want}");
    }
}

fn stable_of(pts: &[Vec3], norms: &[f64]) -> StableSet {
    StableSet {
        entries: pts.iter().zip(norms).map(|(p, r)| StableEntry { point: *p, reward_raw: *r, reward_norm: *r }).collect(),
    }
}

fn receptacle_of(pts: &[Vec3], rewards: &[f64]) -> ReceptacleSet {
    ReceptacleSet {
        entries: pts.iter().zip(rewards).map(|(p, r)| ReceptacleEntry { point: *p, reward: *r }).collect(),
        receptacle_ids: vec!["r".into()],
        radius: 0.1,
    }
}

fn line_points(n: usize) -> Vec<Vec3> {
    (0..n).map(|i| Vec3::new(-0.2 + 0.4 * i as f64 / (n - 1) as f64, 0.0, 0.05)).collect()
}

#[test]
fn beta_one_is_the_stability_only_field() {
    let pts = line_points(21);
    let norms: Vec<f64> = (0..21).map(|i| (i as f64 / 20.0).powi(2)).collect();
    let rr: Vec<f64> = (0..21).map(|i| if i < 5 { 1.0 } else { 0.0 }).collect();
    let spec = GridSpec::covering(&Aabb::new(Vec3::new(-0.25, -0.05, 0.0), Vec3::new(0.25, 0.05, 0.1)), 0.01).unwrap();
    let blended = build_density(
        &stable_of(&pts, &norms),
        &receptacle_of(&pts, &rr),
        &BlendConfig { beta: 1.0 },
        &KdeConfig::default(),
        Some(spec),
    )
    .unwrap();
    let only = DensityField::new(support(&pts.iter().map(|p| [p.x, p.y, p.z]).collect::<Vec<_>>(), &norms), KdeConfig::default())
        .unwrap()
        .with_grid(spec)
        .unwrap();
    let (a, b) = (blended.grid.unwrap(), only.grid.unwrap());
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn beta_zero_peaks_near_a_reasonable_point() {
    let pts = line_points(21);
    let norms: Vec<f64> = (0..21).map(|i| i as f64 / 20.0).collect();
    let rr: Vec<f64> = (0..21).map(|i| if i < 4 { 1.0 } else { 0.0 }).collect();
    let spec = GridSpec::covering(&Aabb::new(Vec3::new(-0.25, -0.05, 0.0), Vec3::new(0.25, 0.05, 0.1)), 0.01).unwrap();
    let field = build_density(
        &stable_of(&pts, &norms),
        &receptacle_of(&pts, &rr),
        &BlendConfig { beta: 0.0 },
        &KdeConfig::default(),
        Some(spec),
    )
    .unwrap();
    let (arg, _) = field.grid_argmax().unwrap();
    let nearest = pts[..4].iter().map(|p| (p - arg).norm()).fold(f64::INFINITY, f64::min);
    assert!(nearest <= 0.05, "argmax {arg:?} is {nearest} from the nearest reasonable point");
    assert_eq!(BlendConfig::default().beta, 0.1);
}

#[test]
fn blend_rejects_mismatched_sets() {
    let pts = line_points(3);
    let st = stable_of(&pts, &[0.0, 0.5, 1.0]);
    assert!(blend_weights(&st, &receptacle_of(&pts[..2], &[1.0, 0.0]), &BlendConfig::default()).is_err());
    let mut shifted = pts.clone();
    shifted[1].x += 1e-3;
    assert!(blend_weights(&st, &receptacle_of(&shifted, &[1.0, 0.0, 1.0]), &BlendConfig::default()).is_err());
    let w = blend_weights(&st, &receptacle_of(&pts, &[1.0, 0.0, 1.0]), &BlendConfig::default()).unwrap();
    let want = [0.9, 0.05, 1.0];
    for (a, b) in w.weights.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
}

fn field_on(n: usize, seed: u64) -> DensityField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (pts, w) = random_support(&mut rng, n);
    DensityField::new(support(&pts, &w), KdeConfig::default()).unwrap()
}

#[test]
fn sampling_is_seeded_separated_and_ranked() {
    let field = field_on(200, 3);
    let a = sample_candidates(&field, 10, 0.02, 42).unwrap();
    let b = sample_candidates(&field, 10, 0.02, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.candidates.len(), 10);
    assert!(!a.short);
    for (i, c) in a.candidates.iter().enumerate() {
        assert_eq!(c.rank, i + 1);
        assert!((c.density - field.evaluate(&c.point)).abs() < 1e-12);
        for d in &a.candidates[..i] {
            assert!((c.point - d.point).norm() >= 0.02);
            assert!(d.density >= c.density);
        }
    }
    let other = sample_candidates(&field, 10, 0.02, 43).unwrap();
    assert_ne!(a.candidates, other.candidates);
}

#[test]
fn asking_for_every_support_point_returns_them_all() {
    let field = field_on(30, 5);
    let mut got: Vec<[f64; 3]> =
        sample_candidates(&field, 30, 0.0, 9).unwrap().candidates.iter().map(|c| [c.point.x, c.point.y, c.point.z]).collect();
    let mut want: Vec<[f64; 3]> = field.support.points.iter().map(|p| [p.x, p.y, p.z]).collect();
    got.sort_by(|a, b| a.partial_cmp(b).unwrap());
    want.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(got, want);
    let wide = sample_candidates(&field, 30, 10.0, 9).unwrap();
    assert_eq!(wide.candidates.len(), 1);
    assert!(wide.short);
}

#[test]
fn grid_encodings_round_trip() {
    let spec = GridSpec { origin: [-0.1, 0.2, 0.0], spacing: [0.01, 0.02, 0.03], dims: [4, 3, 2] };
    let grid = field_on(20, 1).with_grid(spec).unwrap().grid.unwrap();
    let bytes = grid.to_binary();
    assert_eq!(bytes.len(), GRID_HEADER_BYTES + 8 * 24);
    assert_eq!(u64::from_le_bytes(bytes[0..8].try_into().unwrap()), 4);
    assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), 0.01);
    assert_eq!(f64::from_le_bytes(bytes[48..56].try_into().unwrap()), -0.1);
    let idx = spec.index(2, 1, 1);
    let at = GRID_HEADER_BYTES + 8 * idx;
    assert_eq!(f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()), grid.values[idx]);
    assert_eq!(DensityGrid::from_binary(&bytes).unwrap(), grid);
    assert!(DensityGrid::from_binary(&bytes[..bytes.len() - 1]).is_err());

    let text = grid.to_text();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rows.headers().unwrap(), vec!["x", "y", "z", "density"]);
    let parsed: Vec<Vec<f64>> =
        rows.records().map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(parsed.len(), 24);
    for (i, row) in parsed.iter().enumerate() {
        let p = spec.point(i);
        assert_eq!(row[..3], [p.x, p.y, p.z]);
        assert_eq!(row[3], grid.values[i]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kde_is_linear_in_weights(
        pts in proptest::collection::vec((-0.2f64..0.2, -0.2f64..0.2, 0.0f64..0.2), 1..20),
        seed in any::<u64>(), a in 0.0f64..3.0, b in 0.0f64..3.0,
        q in (-0.2f64..0.2, -0.2f64..0.2, 0.0f64..0.2),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<[f64; 3]> = pts.iter().map(|(x, y, z)| [*x, *y, *z]).collect();
        let w1: Vec<f64> = pts.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
        let w2: Vec<f64> = pts.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
        let mix: Vec<f64> = w1.iter().zip(&w2).map(|(x, y)| a * x + b * y).collect();
        let cfg = KdeConfig::default();
        let q = Vec3::new(q.0, q.1, q.2);
        let f = |w: &[f64]| kde_evaluate(&support(&pts, w), &cfg, &q).unwrap();
        let lhs = f(&mix);
        let rhs = a * f(&w1) + b * f(&w2);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn kde_is_translation_invariant(
        pts in proptest::collection::vec((-0.2f64..0.2, -0.2f64..0.2, 0.0f64..0.2, 0.0f64..1.0), 1..20),
        shift in (-0.5f64..0.5, -0.5f64..0.5, -0.5f64..0.5),
        q in (-0.2f64..0.2, -0.2f64..0.2, 0.0f64..0.2),
    ) {
        let s = Vec3::new(shift.0, shift.1, shift.2);
        let q = Vec3::new(q.0, q.1, q.2);
        let base: Vec<Vec3> = pts.iter().map(|p| Vec3::new(p.0, p.1, p.2)).collect();
        let w: Vec<f64> = pts.iter().map(|p| p.3).collect();
        let cfg = KdeConfig::default();
        let a = kde_evaluate(&WeightedPoints::new(base.clone(), w.clone()).unwrap(), &cfg, &q).unwrap();
        let moved = WeightedPoints::new(base.iter().map(|p| p + s).collect(), w).unwrap();
        let b = kde_evaluate(&moved, &cfg, &(q + s)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn tiny_bandwidth_is_dominated_by_the_nearest_point(
        pts in proptest::collection::vec((-0.2f64..0.2, -0.2f64..0.2, 0.0f64..0.2), 2..10),
        pick in any::<prop::sample::Index>(),
    ) {
        let pts: Vec<Vec3> = pts.iter().map(|p| Vec3::new(p.0, p.1, p.2)).collect();
        let i = pick.index(pts.len());
        let gap = pts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| (p - pts[i]).norm()).fold(f64::INFINITY, f64::min);
        prop_assume!(gap > 0.02);
        let h = 1e-3;
        let cfg = KdeConfig { bandwidth: h, ..KdeConfig::default() };
        let w = vec![1.0; pts.len()];
        let v = kde_evaluate(&WeightedPoints::new(pts.clone(), w).unwrap(), &cfg, &pts[i]).unwrap();
        let own = 1.0 / (pts.len() as f64 * h);
        prop_assert!((v - own).abs() <= 1e-9 * own);
    }
}
