//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Tolerances and thresholds are fixed below.

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use htl_core::features::{subsample_regular, FeatureMatrix, Standardizer};
use htl_core::harness::{
    balanced_accuracy, enumerate_rep_subsets, original_sizes, prepare_subject, run_experiment, EvalRecord,
    ExperimentPlan, GridPoint, GridSpec, Method, Pairing, Setting, SizeAxis, SplitPlan,
};
use htl_core::kernels::gram;
use htl_core::lssvm::{train_binary, train_ova, HyperParams};
use htl_core::mkal::{block_entropy, build_kernel_bank, group_norms, objective, train_mkal, MkalConfig};
use htl_core::synth::{generate_synthetic_cohort, SynthConfig};
use htl_core::transfer::{
    beta_problems, optimize_beta, train_multikt, SourceHypothesis, TransferWeights, BETA_ITERATIONS,
};
use htl_core::Matrix;
use nalgebra::{DMatrix, DVector};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RESIDUAL_TOL: f64 = 1e-8;
const ALPHA_TOL: f64 = 1e-6;
const LOO_TOL: f64 = 1e-6;
const REDUCTION_TOL: f64 = 1e-8;
const METRIC_TOL: f64 = 1e-12;
const CLONE_WINS_MIN: usize = 95;
const ENTROPY_WINS_MIN: usize = 16;
const TUNED_GAP_MAX: f64 = 0.02;
const MISTUNED_LIFT_MIN: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_matrix(r: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    let data = (0..n * d).map(|_| r.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(n, d, data).unwrap()
}

fn signs(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 }).collect()
}

fn random_hp(r: &mut ChaCha8Rng) -> HyperParams {
    let grid = GridSpec::original();
    let c = *grid.c.choose(r).unwrap();
    let gamma = *grid.gamma.choose(r).unwrap();
    HyperParams::rbf(c, gamma).unwrap()
}

fn lssvm_correctness() -> Outcome {
    let mut r = rng(1);
    let (mut worst_res, mut worst_alpha) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let n = r.random_range(2..=50);
        let d = r.random_range(1..=10);
        let x = uniform_matrix(&mut r, n, d);
        let y = signs(&mut r, n);
        let hp = random_hp(&mut r);
        let m = train_binary(&x, &y, &hp).unwrap();
        let k = gram(&hp.kernel, &x).unwrap();
        let a = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i, j) {
            (0, 0) => 0.0,
            (0, _) | (_, 0) => 1.0,
            (i, j) => k[(i - 1, j - 1)] + if i == j { 1.0 / hp.c } else { 0.0 },
        });
        let mut s = DVector::zeros(n + 1);
        let mut rhs = DVector::zeros(n + 1);
        s[0] = m.bias;
        for i in 0..n {
            s[i + 1] = m.alpha[i];
            rhs[i + 1] = y[i];
        }
        worst_res = worst_res.max((&a * &s - &rhs).norm() / rhs.norm());
        // Slack of the equality constraints: xi_i = y_i - f(x_i).
        let f = m.predict_scores(&x).unwrap();
        for i in 0..n {
            let xi = y[i] - f[i];
            worst_alpha = worst_alpha.max((m.alpha[i] - hp.c * xi).abs() / (1.0 + m.alpha[i].abs()));
        }
    }
    outcome(
        worst_res <= RESIDUAL_TOL && worst_alpha <= ALPHA_TOL,
        format!("200 instances, max relative residual {worst_res:.2e}, max |alpha - C xi| {worst_alpha:.2e}"),
    )
}

fn loo_equivalence() -> Outcome {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = r.random_range(3..=40);
        let d = r.random_range(1..=10);
        let x = uniform_matrix(&mut r, n, d);
        let y = signs(&mut r, n);
        let hp = random_hp(&mut r);
        let loo = train_binary(&x, &y, &hp).unwrap().loo_scores().unwrap();
        for i in 0..n {
            let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let yk: Vec<f64> = keep.iter().map(|&j| y[j]).collect();
            let m = train_binary(&x.select_rows(&keep), &yk, &hp).unwrap();
            let pred = m.predict_scores(&x.select_rows(&[i])).unwrap()[0];
            worst = worst.max((pred - loo[i]).abs());
        }
    }
    outcome(worst <= LOO_TOL, format!("50 instances, max |closed form - retrained| {worst:.2e}"))
}

/// Target blobs, a source trained on more draws of the same distribution
/// and a source trained on shuffled labels.
struct BlobTask {
    x: Matrix,
    labels: Vec<u32>,
    sources: Vec<SourceHypothesis>,
    hp: HyperParams,
}

fn blobs(r: &mut ChaCha8Rng, per_class: usize, classes: u32, dim: usize) -> (Matrix, Vec<u32>) {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..per_class {
        for g in 0..classes {
            rows.push(
                (0..dim)
                    .map(|j| if j == g as usize % dim { 2.0 } else { 0.0 } + r.random_range(-1.2..1.2))
                    .collect::<Vec<f64>>(),
            );
            labels.push(g + 1);
        }
    }
    (Matrix::from_rows(&rows).unwrap(), labels)
}

fn blob_task(seed: u64) -> BlobTask {
    let mut r = rng(seed);
    let hp = random_hp(&mut r);
    let classes = r.random_range(2..=4);
    let dim = r.random_range(2..=5);
    let per_class = r.random_range(3..=8);
    let (x, labels) = blobs(&mut r, per_class, classes, dim);
    let (xc, yc) = blobs(&mut r, 20, classes, dim);
    let (xn, mut yn) = blobs(&mut r, 20, classes, dim);
    yn.shuffle(&mut r);
    let sources = vec![
        SourceHypothesis::new("clone", train_ova(&xc, &yc, &hp).unwrap()),
        SourceHypothesis::new("noise", train_ova(&xn, &yn, &hp).unwrap()),
    ];
    BlobTask { x, labels, sources, hp }
}

fn reduction_identity() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let t = blob_task(100 + seed);
        let z = uniform_matrix(&mut rng(200 + seed), 10, t.x.cols());
        let zero = TransferWeights::zeros(t.sources.len(), t.sources[0].model.n_classes());
        let mkt = train_multikt(&t.x, &t.labels, &t.sources, &t.hp, &zero).unwrap();
        let plain = train_ova(&t.x, &t.labels, &t.hp).unwrap();
        let a = mkt.predict_scores(&t.sources, &z).unwrap();
        worst = worst.max(a.max_abs_diff(&plain.predict_scores(&z).unwrap()));
    }
    outcome(worst <= REDUCTION_TOL, format!("20 tasks, max score difference {worst:.2e}"))
}

fn beta_feasibility() -> Outcome {
    let mut feasible = 0;
    let mut descends = 0;
    for seed in 0..50 {
        let t = blob_task(300 + seed);
        let w = optimize_beta(&t.x, &t.labels, &t.sources, &t.hp).unwrap();
        let ok = (0..w.classes()).all(|g| {
            let col = w.column(g);
            col.iter().all(|b| *b >= 0.0) && col.iter().map(|b| b * b).sum::<f64>() <= 1.0
        });
        feasible += usize::from(ok);
        let problems = beta_problems(&t.x, &t.labels, &t.sources, &t.hp).unwrap();
        let down = problems.iter().enumerate().all(|(g, p)| {
            let zero = vec![0.0; p.n_sources()];
            let col = w.column(g);
            p.objective(&col) <= p.objective(&zero) && p.minimize(BETA_ITERATIONS) == col
        });
        descends += usize::from(down);
    }
    outcome(
        feasible == 50 && descends == 50,
        format!("feasible {feasible}/50, objective <= objective at zero {descends}/50"),
    )
}

/// Standardized training pool of one synthetic subject.
fn pool(fm: &FeatureMatrix, reps: &[u32], factor: usize) -> FeatureMatrix {
    subsample_regular(&fm.filter(|_, r| reps.contains(&r)), factor, 0).unwrap()
}

fn relevant_source_selection() -> Outcome {
    let plan = ExperimentPlan::new(Setting::Optimized, Pairing::IntactIntact, vec![Method::MultiKt], 0);
    let hp = HyperParams::rbf(10.0, 0.1).unwrap();
    let mut wins = 0;
    for seed in 0..100u64 {
        // No inter-subject shift: the second subject is a clone of the first.
        let cfg = SynthConfig {
            intact: 2,
            amputee: 0,
            channels: 4,
            movements: 3,
            shift: 0.0,
            seed,
            ..SynthConfig::default()
        };
        let subjects: Vec<FeatureMatrix> = generate_synthetic_cohort(&cfg)
            .unwrap()
            .iter()
            .map(|rec| prepare_subject(rec, &plan).unwrap().features)
            .collect();
        let target = pool(&subjects[0], &[1], 5);
        let source = pool(&subjects[1], &plan.split.train_reps, 10);
        let z = |fm: &FeatureMatrix| Standardizer::fit(fm).unwrap().apply(fm).unwrap();
        let (target, source) = (z(&target), z(&source));
        let mut shuffled = source.labels.clone();
        shuffled.shuffle(&mut rng(seed));
        let sources = vec![
            SourceHypothesis::new("clone", train_ova(&source.features, &source.labels, &hp).unwrap()),
            SourceHypothesis::new("noise", train_ova(&source.features, &shuffled, &hp).unwrap()),
        ];
        let w = optimize_beta(&target.features, &target.labels, &sources, &hp).unwrap();
        wins += usize::from(w.total_weight(0) > w.total_weight(1));
    }
    outcome(wins >= CLONE_WINS_MIN, format!("clone outweighs noise in {wins}/100 seeds"))
}

fn mkal_contract() -> Outcome {
    let mut below_zero = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut sparser = 0;
    for seed in 0..20 {
        let t = blob_task(500 + seed);
        let gamma = t.hp.gamma().unwrap();
        let bank = build_kernel_bank(&t.x, &t.sources, gamma).unwrap();
        let lambda = 1.0 / (t.hp.c * t.labels.len() as f64);
        let fit = |p: f64| {
            let cfg = MkalConfig {
                p,
                ..MkalConfig::new(lambda, seed)
            };
            train_mkal(&bank, &t.labels, &cfg).unwrap()
        };
        let model = fit(MkalConfig::DEFAULT_P);
        // w = 0 has objective exactly 1.
        let obj = objective(&model, &bank, &t.labels).unwrap();
        worst = worst.max(obj);
        below_zero += usize::from(obj <= 1.0);
        let e_small = block_entropy(&group_norms(&model, &bank).unwrap());
        let e_two = block_entropy(&group_norms(&fit(2.0), &bank).unwrap());
        sparser += usize::from(e_small <= e_two);
    }
    outcome(
        MkalConfig::DEFAULT_P == 1.04 && MkalConfig::DEFAULT_EPOCHS == 300 && below_zero == 20 && sparser >= ENTROPY_WINS_MIN,
        format!("objective <= zero solution (= 1) {below_zero}/20, max objective {worst:.4}, entropy(p=1.04) <= entropy(p=2) {sparser}/20"),
    )
}

fn macro_recall(truth: &[u32], predicted: &[u32]) -> f64 {
    let mut classes = truth.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut total = 0.0;
    for &c in &classes {
        let (mut hit, mut n) = (0.0, 0.0);
        for (t, p) in truth.iter().zip(predicted) {
            if *t == c {
                n += 1.0;
                if p == t {
                    hit += 1.0;
                }
            }
        }
        total += hit / n;
    }
    total / classes.len() as f64
}

fn metric_oracle() -> Outcome {
    let mut r = rng(7);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let n = r.random_range(1..=40);
        let k = match i % 4 {
            0 => 1,
            _ => r.random_range(2..=6),
        };
        // Every fourth vector is single-class; others are skewed towards 0.
        let truth: Vec<u32> = (0..n).map(|_| if r.random_bool(0.6) { 0 } else { r.random_range(0..k) }).collect();
        let predicted: Vec<u32> = (0..n).map(|_| r.random_range(0..k + 1)).collect();
        worst = worst.max((balanced_accuracy(&truth, &predicted).unwrap() - macro_recall(&truth, &predicted)).abs());
    }
    let constant = balanced_accuracy(&[1, 1, 1, 2], &[1, 1, 1, 1]).unwrap();
    outcome(
        worst <= METRIC_TOL && constant == 0.5,
        format!("1000 vectors, max difference {worst:.1e}, {{a,a,a,b}} constant predictor {constant}"),
    )
}

fn combinatorics() -> Outcome {
    let split = SplitPlan::default();
    let subsets = enumerate_rep_subsets(&split.train_reps).unwrap();
    let expected_subsets = (1usize << split.train_reps.len()) - 1;
    let sizes = original_sizes();
    let expected_sizes: Vec<usize> = (120..=2160).step_by(120).collect();
    let plan = ExperimentPlan::new(Setting::Realistic, Pairing::IntactIntact, vec![Method::NoTransfer], 0);
    let axis_ok = matches!(&plan.sizes, SizeAxis::Repetitions(s) if s.len() == 15);
    let pass = subsets.len() == 15
        && subsets.len() == expected_subsets
        && sizes == expected_sizes
        && sizes.len() == 18
        && split.train_reps == [1, 3, 4, 6]
        && split.test_reps == [2, 5]
        && axis_ok;
    outcome(
        pass,
        format!(
            "{} repetition subsets, {} sample sizes {}..{}, split {:?}/{:?}",
            subsets.len(),
            sizes.len(),
            sizes[0],
            sizes[sizes.len() - 1],
            split.train_reps,
            split.test_reps
        ),
    )
}

fn mean_of(records: &[EvalRecord], method: Method, filter: impl Fn(&EvalRecord) -> bool) -> f64 {
    let v: Vec<f64> = records.iter().filter(|r| r.method == method && filter(r)).map(|r| r.value).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn central_finding() -> Outcome {
    let cohort = generate_synthetic_cohort(&SynthConfig {
        intact: 10,
        amputee: 0,
        seed: 11,
        ..SynthConfig::default()
    })
    .unwrap();
    let methods = vec![Method::NoTransfer, Method::MultiKt];

    let mut tuned = ExperimentPlan::new(Setting::Optimized, Pairing::IntactIntact, methods.clone(), 7);
    tuned.sizes = SizeAxis::Samples(vec![120, 240]);
    tuned.grid = GridSpec::new(vec![1.0, 16.0, 256.0, 4096.0], vec![0.0039, 0.0156, 0.0625, 0.25, 1.0]).unwrap();
    let records = run_experiment(&tuned, &cohort).unwrap();
    let (nt, mkt) = (mean_of(&records, Method::NoTransfer, |_| true), mean_of(&records, Method::MultiKt, |_| true));
    let gap = (nt - mkt).abs();

    let mut mistuned = ExperimentPlan::new(Setting::Original, Pairing::IntactIntact, methods, 7);
    mistuned.sizes = SizeAxis::Samples(vec![120]);
    mistuned.fixed_hp = Some(GridPoint { c: 0.01, gamma: 0.01 });
    let records = run_experiment(&mistuned, &cohort).unwrap();
    let smallest = |r: &EvalRecord| r.size.magnitude() == 120;
    let (nt_m, mkt_m) = (mean_of(&records, Method::NoTransfer, smallest), mean_of(&records, Method::MultiKt, smallest));
    let lift = mkt_m - nt_m;
    outcome(
        gap <= TUNED_GAP_MAX && lift >= MISTUNED_LIFT_MIN,
        format!(
            "(a) tuned: no-transfer {nt:.4}, multikt {mkt:.4}, gap {:.2}pp; (b) mistuned at n=120: no-transfer {nt_m:.4}, multikt {mkt_m:.4}, lift {:.2}pp",
            100.0 * gap,
            100.0 * lift
        ),
    )
}

fn run_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_htl"))
        .args(args)
        .env_remove("HTL_JOBS")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let d = data.to_str().unwrap();
    if !run_cli(&["synth", "--out", d, "--seed", "5", "--intact", "3", "--amputee", "1", "--channels", "4", "--movements", "3"]) {
        return outcome(false, "synth failed");
    }
    let runs: [&[&str]; 2] = [
        &["--setting", "realistic", "--pairing", "ii", "--methods", "notransfer,prior,multikt"],
        &["--setting", "optimized", "--pairing", "ai", "--methods", "notransfer,multikt,mkal", "--sizes", "60", "--mkal-epochs", "20"],
    ];
    let mut compared = 0;
    for (k, flags) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for (i, jobs) in ["1", "8", "1", "8"].iter().enumerate() {
            let out = dir.path().join(format!("r{k}-{i}.tsv"));
            let o = out.to_str().unwrap();
            let mut args = vec!["experiment", "--data", d, "--seed", "9", "--out", o, "--jobs", jobs];
            args.extend(["--grid-C", "1,100", "--grid-gamma", "0.01,0.3"]);
            args.extend(flags.iter());
            if !run_cli(&args) {
                return outcome(false, format!("experiment {k} failed at --jobs {jobs}"));
            }
            outputs.push(fs::read(&out).unwrap());
        }
        if outputs.iter().any(|o| *o != outputs[0]) {
            return outcome(false, format!("run {k}: record files differ"));
        }
        compared += outputs.len();
    }
    outcome(true, format!("{compared} record files over 2 invocations byte-identical at --jobs 1 and 8"))
}

/// Name, check and time budget.
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    // `cargo test` passes harness flags; a filter argument selects criteria.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 10] = [
        ("lssvm-correctness", lssvm_correctness, Duration::from_secs(10)),
        ("loo-oracle", loo_equivalence, Duration::from_secs(30)),
        ("reduction-identity", reduction_identity, Duration::MAX),
        ("beta-feasibility", beta_feasibility, Duration::MAX),
        ("relevant-source", relevant_source_selection, Duration::MAX),
        ("mkal-contract", mkal_contract, Duration::MAX),
        ("metric-oracle", metric_oracle, Duration::MAX),
        ("harness-combinatorics", combinatorics, Duration::MAX),
        ("central-finding", central_finding, Duration::from_secs(600)),
        ("determinism", determinism, Duration::MAX),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let pass = o.pass && in_time;
        failed += usize::from(!pass);
        let timing = if in_time {
            format!("{:.1}s", elapsed.as_secs_f64())
        } else {
            format!("{:.1}s over the {}s budget", elapsed.as_secs_f64(), budget.as_secs())
        };
        println!("criterion {:>2} {name}: {} ({}; {timing})", i + 1, if pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {}/{ran} passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

