//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use placewise_core::density::{build_density, BlendConfig, DensityField, GridSpec, KdeConfig, WeightedPoints};
use placewise_core::reasoning::{
    receptacle_points, rule_reason, summarize_scene, ChatCompletion, ChatRequest, ChatTransport, RemoteChatClient,
    SummaryOptions,
};
use placewise_core::scene::{parse_scene, CandidateGrid, ParseMode, Scene, TaskDescription};
use placewise_core::stability::{builtin_backend, is_stable, simulate_placement, sweep_stability, SimConfig};
use placewise_core::Vec3;
use placewise_service::bench::{load_scenario, load_suite, run_benchmark, BenchReport, DEFAULT_REPETITIONS};
use placewise_service::config::DEFAULT_SAMPLE_K;
use placewise_service::{PipelineConfig, Planner, ReasonerKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const REST_MARGIN: f64 = 1e-4;
const TILT: f64 = 0.05;

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load_scene(name: &str) -> Scene {
    let text = std::fs::read_to_string(scenarios().join("scenes").join(format!("{name}.json"))).unwrap();
    parse_scene(&text, ParseMode::Strict).unwrap().scene
}

fn doc_scene(objects: serde_json::Value, half: [f64; 3], min: [f64; 3], max: [f64; 3]) -> Scene {
    let doc = json!({
        "objects": objects,
        "placement_object": {"id": "box", "label": "Box", "mass": 0.4, "shapes": [{"kind": "box", "dims": half}]},
        "workspace": {"min": min, "max": max},
    });
    parse_scene(&doc.to_string(), ParseMode::Strict).unwrap().scene
}

struct Verdict {
    pass: bool,
    detail: String,
    /// Timed portion when setup is excluded from the budget.
    elapsed: Option<Duration>,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into(), elapsed: None }
}

/// Table whose top is z = 0 with edges at x = 0.5 and y = 0.05.
fn corner_table() -> serde_json::Value {
    json!([{"id": "table", "label": "Table", "static": true, "pose": {"position": [0.0, -0.45, -0.02]},
            "shapes": [{"kind": "box", "dims": [0.5, 0.5, 0.02]}]}])
}

/// Centre of mass over the support rectangle, untilted and under each of the
/// four tilts, with the rest margin.
fn support_polygon_oracle(half: [f64; 3], x: f64, y: f64) -> Option<bool> {
    let [hx, hy, h] = half;
    let sides = [hx.min(0.5 - x), hx, hy.min(0.05 - y), hy];
    let mut margins = sides.to_vec();
    margins.extend(sides.iter().map(|s| s * TILT.cos() - h * TILT.sin()));
    if margins.iter().any(|m| (m - REST_MARGIN).abs() < 2e-6) {
        return None;
    }
    Some(margins.iter().all(|m| *m >= REST_MARGIN))
}

fn stability_oracle() -> Verdict {
    let half = [0.03, 0.03, 0.03];
    let scene = doc_scene(corner_table(), half, [0.4, -0.05, -0.5], [0.6, 0.15, 0.3]);
    let mut pts = Vec::new();
    for i in 0..20 {
        for j in 0..20 {
            pts.push(Vec3::new(0.44 + 0.0075 * i as f64, -0.01 + 0.0075 * j as f64, half[2]));
        }
    }
    let grid = CandidateGrid::explicit(&scene, pts).unwrap();
    let cfg = SimConfig::default();
    let out = sweep_stability(&builtin_backend(), &scene, &grid, &cfg).unwrap();
    let (mut mismatches, mut ambiguous, mut stable) = (0, 0, 0);
    for row in &out.diagnostics.rows {
        match support_polygon_oracle(half, row.x, row.y) {
            None => ambiguous += 1,
            Some(want) => mismatches += usize::from(want != row.included),
        }
        stable += usize::from(row.included);
    }
    verdict(
        mismatches == 0 && stable > 0 && stable < 400,
        format!("400 points, {stable} stable, {mismatches} mismatches, {ambiguous} within the margin band"),
    )
}

fn tipping() -> Verdict {
    let half = [0.05, 0.05, 0.05];
    let scene = doc_scene(corner_table(), half, [-0.6, -0.5, -0.5], [0.7, 0.04, 0.3]);
    let cfg = SimConfig::default();
    let mut verdicts = Vec::new();
    // COM 0.01 past the edge (60% overhang), centred, and exactly on the edge.
    for (name, x, want) in [("60% overhang", 0.51, false), ("centred", 0.0, true), ("50% edge", 0.5, false)] {
        let t = simulate_placement(&builtin_backend(), &scene, &Vec3::new(x, -0.2, half[2]), &cfg).unwrap();
        let got = is_stable(&t, &cfg);
        verdicts.push((got == want, format!("{name}: {}", if got { "stable" } else { "unstable" })));
    }
    verdict(verdicts.iter().all(|v| v.0), verdicts.iter().map(|v| v.1.clone()).collect::<Vec<_>>().join(", "))
}

fn stable_fraction(planner: &Planner, name: &str) -> (f64, usize) {
    let (sweep, _) = planner.sweep(&load_scene(name), &PipelineConfig::default()).unwrap();
    (sweep.outcome.diagnostics.stable_fraction(), sweep.outcome.stable.len())
}

fn rack_fraction() -> Verdict {
    let planner = Planner::default();
    let (rack, _) = stable_fraction(&planner, "dish_rack_medium");
    let (flat, _) = stable_fraction(&planner, "flat_table");
    verdict(rack < 0.2 && flat > 0.9, format!("dish rack {rack:.4} (< 0.2), flat table {flat:.4} (> 0.9)"))
}

fn gap_monotonicity() -> Verdict {
    let planner = Planner::default();
    let n: Vec<usize> = ["dish_rack_small", "dish_rack_medium", "dish_rack_large"]
        .iter()
        .map(|s| stable_fraction(&planner, s).1)
        .collect();
    verdict(n[0] <= n[1] && n[1] <= n[2], format!("|P_s| small {} <= medium {} <= large {}", n[0], n[1], n[2]))
}

fn kde_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 0.05;
    let pts: Vec<[f64; 3]> =
        (0..50).map(|_| [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(0.0..0.3)]).collect();
    let w: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..1.0)).collect();
    let field = DensityField::new(
        WeightedPoints::new(pts.iter().map(|p| Vec3::from(*p)).collect(), w.clone()).unwrap(),
        KdeConfig::default(),
    )
    .unwrap();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let q = [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(0.0..0.3)];
        let mut sum = 0.0;
        for (p, wi) in pts.iter().zip(&w) {
            let d2: f64 = (0..3).map(|k| ((q[k] - p[k]) / h).powi(2)).sum();
            sum += wi * (-0.5 * d2).exp();
        }
        let want = sum / (50.0 * h);
        let got = field.evaluate(&Vec3::from(q));
        worst = worst.max((got - want).abs() / want.abs());
    }
    verdict(worst <= 1e-9, format!("max relative error {worst:.3e} over 20 queries"))
}

fn beta_endpoints() -> Verdict {
    let scene = load_scene("category_trays");
    let cfg = PipelineConfig::default();
    let (sweep, _) = Planner::default().sweep(&scene, &cfg).unwrap();
    let stable = &sweep.outcome.stable;
    let summary = summarize_scene(&scene, &SummaryOptions::default());
    let decision = rule_reason(&summary, &TaskDescription::new("sort objects based on colors")).unwrap();
    let recept = receptacle_points(stable, &decision, &scene, cfg.radius).unwrap();
    let spec = GridSpec::covering(&scene.workspace, 0.02).unwrap();

    let start = Instant::now();
    let one = build_density(stable, &recept, &BlendConfig { beta: 1.0 }, &cfg.kde, Some(spec)).unwrap();
    let norms: Vec<f64> = stable.entries.iter().map(|e| e.reward_norm).collect();
    let only = DensityField::new(WeightedPoints::new(stable.points().copied().collect(), norms).unwrap(), cfg.kde)
        .unwrap()
        .with_grid(spec)
        .unwrap();
    let a = &one.grid.as_ref().unwrap().values;
    let b = &only.grid.as_ref().unwrap().values;
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    let zero = build_density(stable, &recept, &BlendConfig { beta: 0.0 }, &cfg.kde, Some(spec)).unwrap();
    let (arg, _) = zero.grid_argmax().unwrap();
    let near = recept
        .entries
        .iter()
        .filter(|e| e.reward == 1.0)
        .map(|e| (e.point - arg).norm())
        .fold(f64::INFINITY, f64::min);
    let elapsed = start.elapsed();
    let default_beta = cfg.blend.beta;
    Verdict {
        pass: diff <= 1e-12 && near <= cfg.kde.bandwidth && default_beta == 0.1,
        detail: format!(
            "beta=1 max diff {diff:.1e}; beta=0 argmax {near:.4} m from an r_r=1 point; default beta {default_beta}"
        ),
        elapsed: Some(elapsed),
    }
}

fn category_report() -> BenchReport {
    let suite = vec![load_scenario(&scenarios().join("extra/category_trays.json")).unwrap()];
    run_benchmark(&Planner::default(), &suite, DEFAULT_REPETITIONS, &PipelineConfig::default()).unwrap()
}

fn category_success(report: &BenchReport) -> Verdict {
    let r = &report.rows[0];
    verdict(r.rea_sr == 1.0 && r.sta_sr == 1.0, format!("{} reps: Rea {:.3}, Sta {:.3}", r.repetitions, r.rea_sr, r.sta_sr))
}

fn protocol_defaults(report: &BenchReport) -> Verdict {
    let m = &report.metadata;
    let r = &report.rows[0];
    verdict(
        m.repetitions == 20 && m.sample_k == 10 && DEFAULT_SAMPLE_K == 10 && r.candidates_min == 10 && r.candidates_max == 10,
        format!(
            "repetitions {}, k {}, candidates per run {}..={}",
            m.repetitions, m.sample_k, r.candidates_min, r.candidates_max
        ),
    )
}

struct FixedUsage;

impl ChatTransport for FixedUsage {
    fn complete(&self, _: &ChatRequest, _: Duration) -> Result<ChatCompletion, String> {
        Ok(ChatCompletion { content: "tray_1".into(), prompt_tokens: 362, completion_tokens: 5 })
    }
}

fn token_accounting() -> Verdict {
    let suite = vec![load_scenario(&scenarios().join("extra/flat_table.json")).unwrap()];
    let cfg = PipelineConfig { reasoner: ReasonerKind::Llm, ..PipelineConfig::default() };
    let planner = Planner::default().with_chat_client(RemoteChatClient::new(Box::new(FixedUsage), "mock"));
    let report = run_benchmark(&planner, &suite, 3, &cfg).unwrap();
    let t = report.rows[0].tokens_mean;
    verdict(t == 367.0, format!("mean tokens {t} over 3 runs (362 prompt + 5 completion)"))
}

fn determinism() -> (Verdict, String) {
    let suite = load_suite(&scenarios().join("suite")).unwrap();
    let cfg = PipelineConfig { reasoner: ReasonerKind::Rule, seed: 0, ..PipelineConfig::default() };
    let a = run_benchmark(&Planner::default(), &suite, DEFAULT_REPETITIONS, &cfg).unwrap();
    let b = run_benchmark(&Planner::default(), &suite, DEFAULT_REPETITIONS, &cfg).unwrap();
    let same = a.deterministic_json() == b.deterministic_json();
    (
        verdict(same && a.rows.len() == 6, format!("{} scenarios, reports byte-identical: {same}", a.rows.len())),
        a.to_table(),
    )
}

struct Runner {
    failures: usize,
}

impl Runner {
    fn check(&mut self, name: &str, limit: Duration, f: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let v = f();
        let took = v.elapsed.unwrap_or_else(|| start.elapsed());
        let ok = v.pass && took < limit;
        self.failures += usize::from(!ok);
        let budget = if limit == Duration::MAX { String::new() } else { format!(" / {:.0}s", limit.as_secs_f64()) };
        println!("{} {name}: {} [{:.2}s{budget}]", if ok { "PASS" } else { "FAIL" }, v.detail, took.as_secs_f64());
    }
}

fn main() {
    let secs = Duration::from_secs_f64;
    let mut r = Runner { failures: 0 };
    r.check("stability_matches_support_polygon", secs(10.0), stability_oracle);
    r.check("overhang_tipping", secs(1.0), tipping);
    r.check("dish_rack_stable_fraction", secs(60.0), rack_fraction);
    r.check("stable_set_grows_with_slot_gap", secs(120.0), gap_monotonicity);
    r.check("kde_matches_direct_sum", secs(1.0), kde_oracle);
    r.check("blend_endpoints", secs(5.0), beta_endpoints);
    let start = Instant::now();
    let report = category_report();
    let took = start.elapsed();
    r.check("category_success_rates", secs(120.0), || Verdict { elapsed: Some(took), ..category_success(&report) });
    r.check("protocol_defaults", Duration::MAX, || protocol_defaults(&report));
    r.check("token_accounting", secs(1.0), token_accounting);
    let mut table = String::new();
    r.check("bench_determinism", Duration::MAX, || {
        let (v, t) = determinism();
        table = t;
        v
    });
    print!("{table}");
    if r.failures > 0 {
        println!("{} criteria failed", r.failures);
        std::process::exit(1);
    }
}
