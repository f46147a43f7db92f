//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints its PASS/FAIL line; exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::process::Command;
use std::time::{Duration, Instant};

use leafage::data::{generate_artificial, train_test_split, Dataset, SplitSpec, Standardizer};
use leafage::evaluation::{auc, run_setting, wilcoxon_signed_rank, EvaluationConfig, SettingKey, Strategy, WilcoxonOutcome};
use leafage::explainer::{
    dissimilarity, feature_importances, retrieve_examples, sample_local_training_set, Leafage, LeafageConfig, LocalSurrogate,
};
use leafage::models::{BlackBoxModel, ClassifierKind, ModelError};
use leafage::LimeConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const AD_N_PER_CLASS: usize = 250;
const SEEDS: u64 = 10;

const LINEAR_LEAFAGE_MIN: f64 = 0.95;
const LINEAR_LIME_MIN: f64 = 0.98;
const NONLINEAR_RANGE: (f64, f64) = (0.45, 0.85);
const AUC_TOL: f64 = 1e-12;
const WILCOXON_TOL: f64 = 0.01;
const ANGLE_MAX_DEG: f64 = 10.0;

type Check = Result<String, String>;

fn criterion(id: &str, title: &str, limit: Duration, check: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = check();
    let elapsed = start.elapsed();
    let (pass, detail) = match result {
        Ok(d) if elapsed <= limit => (true, d),
        Ok(d) => (false, format!("{d}; too slow")),
        Err(d) => (false, d),
    };
    println!(
        "{id} {} {title} [{:.1}s / {}s]: {detail}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn ad_split(seed: u64) -> (Dataset, Dataset) {
    let ad = generate_artificial(AD_N_PER_CLASS, seed).unwrap();
    train_test_split(&ad, &SplitSpec { seed, ..SplitSpec::default() }).unwrap()
}

fn seeded_cfg(seed: u64) -> EvaluationConfig {
    EvaluationConfig {
        classifier_seed: seed,
        leafage: LeafageConfig { seed, ..LeafageConfig::default() },
        lime: LimeConfig { seed, ..LimeConfig::default() },
        ..EvaluationConfig::default()
    }
}

fn setting(kind: ClassifierKind) -> SettingKey {
    SettingKey {
        dataset: "ad".into(),
        positive_class: "1".into(),
        classifier: kind.name().into(),
    }
}

/// Mean fidelity of LEAFAGE and LIME per seed.
fn fidelity_over_seeds(kind: ClassifierKind) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut leafage = Vec::new();
    let mut lime = Vec::new();
    for seed in 0..SEEDS {
        let (train, test) = ad_split(seed);
        let out = run_setting(&setting(kind), &train, &test, kind, &[Strategy::Leafage, Strategy::Lime], &seeded_cfg(seed))
            .map_err(|e| format!("{kind} seed {seed}: {e}"))?;
        leafage.push(out[0].mean.ok_or_else(|| format!("{kind} seed {seed}: no LEAFAGE scores"))?);
        lime.push(out[1].mean.ok_or_else(|| format!("{kind} seed {seed}: no LIME scores"))?);
    }
    Ok((leafage, lime))
}

fn ac1_baseline() -> Check {
    let mut settings = 0;
    for seed in 0..3 {
        let (train, test) = ad_split(seed);
        for kind in ClassifierKind::ALL {
            let s = &run_setting(&setting(kind), &train, &test, kind, &[Strategy::Baseline], &seeded_cfg(seed))
                .map_err(|e| e.to_string())?[0];
            ensure(s.mean == Some(0.5) && s.stddev == Some(0.0), || {
                format!("{kind} seed {seed}: {:?} ({:?})", s.mean, s.stddev)
            })?;
            settings += 1;
        }
    }
    Ok(format!("{settings} settings at 0.500 (0.000)"))
}

fn ac2_linear() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for kind in [ClassifierKind::Lr, ClassifierKind::Svm, ClassifierKind::Lda] {
        let (leafage, lime) = fidelity_over_seeds(kind)?;
        let (ml, mi) = (median(&leafage), median(&lime));
        ok &= ml >= LINEAR_LEAFAGE_MIN && mi >= LINEAR_LIME_MIN;
        parts.push(format!("{kind} leafage {ml:.4} lime {mi:.4}"));
    }
    let detail = format!("medians over {SEEDS} seeds: {}", parts.join(", "));
    if ok {
        Ok(detail)
    } else {
        Err(format!("{detail}; need leafage >= {LINEAR_LEAFAGE_MIN}, lime >= {LINEAR_LIME_MIN}"))
    }
}

fn ac3_nonlinear() -> Check {
    let in_range = |v: f64| (NONLINEAR_RANGE.0..=NONLINEAR_RANGE.1).contains(&v);
    let mut parts = Vec::new();
    let mut problems = Vec::new();
    for kind in [ClassifierKind::Dt, ClassifierKind::Rf] {
        let (leafage, lime) = fidelity_over_seeds(kind)?;
        for (name, values) in [("leafage", &leafage), ("lime", &lime)] {
            if let Some(bad) = values.iter().find(|v| !in_range(**v)) {
                problems.push(format!("{kind} {name} mean {bad:.4} outside {NONLINEAR_RANGE:?}"));
            }
        }
        let (ml, mi) = (median(&leafage), median(&lime));
        parts.push(format!("{kind} leafage {ml:.4} lime {mi:.4}"));
        if kind == ClassifierKind::Rf && ml < mi {
            problems.push(format!("rf median leafage {ml:.4} < lime {mi:.4}"));
        }
    }
    let detail = format!("medians over {SEEDS} seeds: {}", parts.join(", "));
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", problems.join("; ")))
    }
}

fn auc_oracle(labels: &[usize], scores: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li == 1 && lj == 0 {
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn ac4_auc() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let n = rng.random_range(2..=200);
        let levels = rng.random_range(1..=10);
        let continuous = case % 4 == 0;
        let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores: Vec<f64> = (0..n)
            .map(|_| if continuous { rng.random_range(-1.0..1.0) } else { rng.random_range(0..levels) as f64 * 0.1 })
            .collect();
        let fast = auc(&labels, &scores).map_err(|e| format!("case {case}: {e}"))?;
        let diff = (fast - auc_oracle(&labels, &scores)).abs();
        worst = worst.max(diff);
        ensure(diff <= AUC_TOL, || format!("case {case}: |diff| = {diff:e}"))?;
    }
    Ok(format!("1000 cases, max |diff| = {worst:e}"))
}

fn surrogate(weights: Vec<f64>) -> LocalSurrogate {
    let mut s = LocalSurrogate::constant(weights.len(), 0.0);
    s.degenerate = weights.iter().all(|x| *x == 0.0);
    s.weights = weights;
    s
}

fn argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

fn ac5_dissimilarity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let index_set = |v: &[leafage::explainer::Neighbour]| v.iter().map(|n| n.index).collect::<BTreeSet<_>>();
    for case in 0..10_000 {
        let d = rng.random_range(1..=6);
        let mut vec = |scale: f64| -> Vec<f64> { (0..d).map(|_| scale * rng.random::<f64>() * 2.0 - scale).collect() };
        let w = vec(3.0);
        let z = vec(2.0);
        let t = vec(2.0);
        let s = surrogate(w.clone());
        ensure(dissimilarity(&s, &z, &z).unwrap() == 0.0, || format!("case {case}: b(z, z) != 0"))?;
        let b = dissimilarity(&s, &z, &t).unwrap();
        ensure(b >= 0.0, || format!("case {case}: b = {b}"))?;

        let lambda = 10f64.powf(rng.random_range(-3.0..3.0));
        let scaled = surrogate(w.iter().map(|x| x * lambda).collect());
        let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let predicted: Vec<usize> = (0..20).map(|_| rng.random_range(0..2)).collect();
        let a = retrieve_examples(&rows, &predicted, &s, &z, 1, 3).unwrap();
        let c = retrieve_examples(&rows, &predicted, &scaled, &z, 1, 3).unwrap();
        ensure(index_set(&a.allies) == index_set(&c.allies) && index_set(&a.enemies) == index_set(&c.enemies), || {
            format!("case {case}: top-k sets changed under scaling by {lambda}")
        })?;
        let ia = argsort(&feature_importances(&s, &z).unwrap());
        let ic = argsort(&feature_importances(&scaled, &z).unwrap());
        ensure(ia == ic, || format!("case {case}: importance order changed under scaling by {lambda}"))?;
    }

    // Not a metric: distinct points on the surrogate's level set are at zero dissimilarity.
    let s = surrogate(vec![1.5, -2.0]);
    let z = [0.3, 0.7];
    let along = [z[0] + 4.0 * 0.5, z[1] + 3.0 * 0.5];
    let b_level = dissimilarity(&s, &z, &along).unwrap();
    ensure(along != z && b_level.abs() < 1e-12, || format!("level-set case gave b = {b_level}"))?;
    let s = surrogate(vec![2.0, 0.0]);
    let moved = [z[0], z[1] + 1.25];
    let b_orth = dissimilarity(&s, &z, &moved).unwrap();
    ensure(b_orth == 0.0, || format!("orthogonal case gave b = {b_orth}"))?;
    Ok(format!("10000 random cases; level-set b = {b_level:e}, orthogonal-displacement b = {b_orth}"))
}

fn ac6_sampler() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..100 {
        let n = rng.random_range(4..=200);
        let d = rng.random_range(1..=5);
        let i_small = rng.random_range(2..=6);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let share = rng.random_range(0.05..0.95);
        let mut predicted: Vec<usize> = (0..n).map(|_| usize::from(rng.random::<f64>() < share)).collect();
        predicted[0] = 0;
        predicted[1] = 1;
        let border = rng.random_range(0..n);
        let cfg = LeafageConfig { i_small, ..LeafageConfig::default() };
        let local = sample_local_training_set(&rows, &predicted, border, &cfg).map_err(|e| format!("case {case}: {e}"))?;
        let dist = |i: usize| -> f64 { rows[i].iter().zip(&rows[border]).map(|(a, b)| (a - b) * (a - b)).sum() };
        for class in 0..2 {
            let mut members: Vec<usize> = (0..n).filter(|&i| predicted[i] == class).collect();
            members.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)));
            let want = members.len().min(i_small * d);
            let got = &local.by_class[class];
            ensure(got.len() == want, || format!("case {case} class {class}: {} rows, expected {want}", got.len()))?;
            let chosen: BTreeSet<usize> = got.iter().copied().collect();
            ensure(chosen.len() == got.len() && got.iter().all(|&i| predicted[i] == class), || {
                format!("case {case} class {class}: duplicate or wrong-class row")
            })?;
            let farthest_in = got.iter().map(|&i| dist(i)).fold(f64::NEG_INFINITY, f64::max);
            let nearest_out = members.iter().filter(|i| !chosen.contains(i)).map(|&i| dist(i)).fold(f64::INFINITY, f64::min);
            ensure(farthest_in <= nearest_out, || format!("case {case} class {class}: a nearer row was left out"))?;
        }
    }
    Ok("100 configurations match exhaustive sort".into())
}

struct Halfspace {
    normal: Vec<f64>,
    offset: f64,
}

impl Halfspace {
    fn side(&self, row: &[f64]) -> usize {
        usize::from(self.normal.iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + self.offset > 0.0)
    }
}

impl BlackBoxModel for Halfspace {
    fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, ModelError> {
        Ok(rows.iter().map(|r| self.side(r)).collect())
    }

    fn descriptor(&self) -> String {
        "halfspace".into()
    }
}

fn ac7_linear_recovery() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let d = rng.random_range(2..=5);
        let raw: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let len = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let normal: Vec<f64> = raw.iter().map(|x| x / len).collect();
        let offset = rng.random_range(-0.5..0.5);
        let rows: Vec<Vec<f64>> = (0..400).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let labels = vec![0; rows.len()];
        let names = (0..d).map(|j| format!("f{j}")).collect();
        let raw_ds = Dataset::new(rows, labels, names, vec!["0".into(), "1".into()]).unwrap();
        let scaler = Standardizer::fit(&raw_ds);
        let train = scaler.transform(&raw_ds).unwrap();
        let model = Halfspace { normal, offset };
        let explainer = Leafage::new(&model, &train, &scaler).map_err(|e| e.to_string())?;
        let z = train.row(rng.random_range(0..train.n_rows())).to_vec();
        let expl = explainer.explain(&z, &LeafageConfig::default()).map_err(|e| format!("case {case}: {e}"))?;
        let w = &expl.surrogate.weights;
        let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        ensure(!expl.surrogate.degenerate && wn > 0.0, || format!("case {case}: degenerate surrogate"))?;
        let cos = w.iter().zip(&model.normal).map(|(a, b)| a * b).sum::<f64>() / wn;
        let angle = cos.clamp(-1.0, 1.0).acos().to_degrees();
        worst = worst.max(angle);
        ensure(angle <= ANGLE_MAX_DEG, || format!("case {case}: normal off by {angle:.2} degrees"))?;
        let c_z = model.side(&z);
        ensure(expl.allies.iter().all(|a| model.side(train.row(a.index)) == c_z), || format!("case {case}: ally across boundary"))?;
        ensure(expl.enemies.iter().all(|e| model.side(train.row(e.index)) != c_z), || format!("case {case}: enemy on own side"))?;
    }
    Ok(format!("50 boundaries, worst angle {worst:.2} degrees"))
}

/// Two-sided exact p-value by enumerating every sign assignment of the ranks.
fn wilcoxon_enumeration(diffs: &[f64]) -> f64 {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let ranks: Vec<f64> = nz
        .iter()
        .map(|d| {
            let below = nz.iter().filter(|e| e.abs() < d.abs()).count() as f64;
            let tied = nz.iter().filter(|e| e.abs() == d.abs()).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect();
    let total: f64 = ranks.iter().sum();
    let observed: f64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let extreme = (observed - total / 2.0).abs();
    let n = nz.len();
    let mut hits = 0u64;
    for mask in 0u32..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        if (w - total / 2.0).abs() >= extreme - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << n) as f64
}

fn ac8_wilcoxon() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let (mut tested, mut inconclusive) = (0, 0);
    for n in 1..=12 {
        for case in 0..300 {
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..20) as f64).collect();
            // Small integer offsets give ties and zero differences.
            let b: Vec<f64> = a.iter().map(|x| x - rng.random_range(-4..=4) as f64).collect();
            let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            let nonzero = diffs.iter().filter(|d| **d != 0.0).count();
            match wilcoxon_signed_rank(&a, &b).map_err(|e| e.to_string())? {
                WilcoxonOutcome::Inconclusive { n_nonzero } => {
                    ensure(nonzero < 6 && n_nonzero == nonzero, || format!("n={n} case {case}: unexpected inconclusive"))?;
                    inconclusive += 1;
                }
                WilcoxonOutcome::Tested(r) => {
                    ensure(nonzero >= 6, || format!("n={n} case {case}: tested with {nonzero} non-zero differences"))?;
                    let diff = (r.p_value - wilcoxon_enumeration(&diffs)).abs();
                    worst = worst.max(diff);
                    ensure(diff <= WILCOXON_TOL, || format!("n={n} case {case}: p differs by {diff}"))?;
                    tested += 1;
                }
            }
        }
    }
    Ok(format!("{tested} tested cases, max |diff| = {worst:e}; {inconclusive} cases under 6 non-zero differences inconclusive"))
}

fn run_bin(args: &[&str], threads: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_leafage"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads)
        .env_remove("LEAFAGE_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn ac9_determinism() -> Check {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).display().to_string();
    let data = p("ad.csv");
    run_bin(&["gen-ad", "--n-per-class", "80", "--seed", "9", "--out", &data], "1")?;
    let mut files = Vec::new();
    for (run, threads) in [("a", "1"), ("b", "3")] {
        let (csv, table, json, svg) = (p(&format!("{run}.csv")), p(&format!("{run}.txt")), p(&format!("{run}.json")), p(&format!("{run}.svg")));
        run_bin(
            &["evaluate", "--dataset", "ad", "--ad-n-per-class", "60", "--lime-samples", "1000", "--seed", "9", "--out", &csv, "--table", &table],
            threads,
        )?;
        run_bin(&["explain", "--data", &data, "--model", "rf", "--test-row", "5", "--seed", "9", "--out", &json, "--svg", &svg], threads)?;
        files.push([csv, table, json, svg]);
    }
    for (a, b) in files[0].iter().zip(&files[1]) {
        let (x, y) = (std::fs::read(a).map_err(|e| e.to_string())?, std::fs::read(b).map_err(|e| e.to_string())?);
        ensure(x == y, || format!("{a} and {b} differ"))?;
    }
    Ok("evaluate and explain outputs byte-identical across runs and thread counts".into())
}

fn main() {
    let min = |m: u64| Duration::from_secs(60 * m);
    let results = [
        criterion("AC1", "baseline exactness", min(1), ac1_baseline),
        criterion("AC2", "linear-setting fidelity", min(10), ac2_linear),
        criterion("AC3", "non-linear-setting ordering", min(15), ac3_nonlinear),
        criterion("AC4", "AUC oracle equivalence", min(1), ac4_auc),
        criterion("AC5", "dissimilarity properties", min(1), ac5_dissimilarity),
        criterion("AC6", "sampler contract", min(1), ac6_sampler),
        criterion("AC7", "linear black-box recovery", min(2), ac7_linear_recovery),
        criterion("AC8", "Wilcoxon oracle", min(1), ac8_wilcoxon),
        criterion("AC9", "determinism", min(1), ac9_determinism),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
