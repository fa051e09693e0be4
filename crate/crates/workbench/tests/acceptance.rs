//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when
//! any hard criterion fails. Run with
//! `cargo test --release -p ctap-workbench --test acceptance`.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use ctap_core::agent::{
    evaluate, gaussian_kl, gaussian_log_prob, greedy_schedule, surrogate_grad, value_loss_grad, GaussianPolicy, Mlp,
    PolicySamples, ScheduleController, Smoothing,
};
use ctap_core::analysis::{
    base_name, build_2tbn, feature_importance, transition_layout, ForestConfig, TbnConfig, TransitionDataset,
};
use ctap_core::env::state_labels;
use ctap_core::linalg::{CMatrix, Complex64, Rng};
use ctap_core::pulses::{gaussian_ctap_pair, GaussianShape, PulseOrder, PulseSchedule};
use ctap_core::quantum::{
    dark_state, eigen_spectrum, evolve, ideal_hamiltonian, DensityMatrix, MasterEquationModel, Method, Trajectory,
};
use ctap_workbench::checkpoint::{load_checkpoint, save_checkpoint};
use ctap_workbench::commands::{
    baseline_schedule, cmd_analyze, cmd_baseline, cmd_train, AnalysisSource, AnalyzeArgs, BaselineArgs, TrainArgs,
};
use ctap_workbench::config::{load_scenario, load_training, Scenario};
use ctap_workbench::run_in_dir;
use serde_json::Value;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Pass,
    Fail,
    /// Soft criterion missed: reported, does not fail the suite.
    Warn,
}

struct Suite {
    failures: usize,
    warnings: usize,
}

impl Suite {
    fn report(&mut self, id: u32, name: &str, verdict: Verdict, detail: &str) {
        let tag = match verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                self.failures += 1;
                "FAIL"
            }
            Verdict::Warn => {
                self.warnings += 1;
                "WARN"
            }
        };
        println!("criterion {id:>2} {tag}  {name}: {detail}");
    }

    fn check(&mut self, id: u32, name: &str, ok: bool, detail: &str) {
        self.report(id, name, if ok { Verdict::Pass } else { Verdict::Fail }, detail);
    }
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name)
}

fn scenario(name: &str) -> Scenario {
    load_scenario(&preset(name)).expect("preset loads")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("file exists")).expect("valid JSON")
}

fn run_from_dot1(model: &MasterEquationModel, s: &PulseSchedule, method: Method) -> Trajectory {
    evolve(model, s, &DensityMatrix::localized(model, 1).unwrap(), method).unwrap()
}

fn max_state_gap(a: &Trajectory, b: &Trajectory) -> f64 {
    a.states.iter().zip(&b.states).map(|(x, y)| x.matrix().max_abs_diff(y.matrix())).fold(0.0, f64::max)
}

fn baseline_physics(suite: &mut Suite) {
    let ideal = scenario("ideal_12pi.toml");
    let started = Instant::now();
    let schedule = baseline_schedule(&ideal).unwrap();
    let e = evaluate(&ScheduleController(schedule), &ideal.config, Smoothing::None).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let m = &e.metrics;
    suite.check(
        1,
        "Gaussian baseline fidelity",
        m.final_fidelity >= 0.99 && m.trace_drift <= 1e-9 && secs < 1.0,
        &format!("rho33 {:.6} (>= 0.99), trace drift {:.1e} (<= 1e-9), runtime {secs:.3} s (< 1 s)", m.final_fidelity, m.trace_drift),
    );

    let c = &ideal.config;
    let swapped = gaussian_ctap_pair(c.t_max, c.n_steps, PulseOrder::Intuitive, ideal.shape).unwrap();
    let f = evaluate(&ScheduleController(swapped), c, Smoothing::None).unwrap().metrics.final_fidelity;
    suite.check(2, "counter-intuitive order is necessary", f <= 0.5, &format!("swapped order rho33 {f:.6} (<= 0.5)"));
}

fn propagator_equivalence(suite: &mut Suite) {
    let mut worst: f64 = 0.0;
    let mut min_ratio = f64::INFINITY;
    let mut parts = Vec::new();
    for name in ["ideal_12pi.toml", "dephasing_5pi.toml", "detuning_5pi.toml", "loss_10pi.toml", "sctap_21pi.toml"] {
        let s = scenario(name);
        let model = s.config.model().unwrap();
        let schedule = baseline_schedule(&s).unwrap();
        let exact = run_from_dot1(&model, &schedule, Method::Expm);
        let g20 = max_state_gap(&run_from_dot1(&model, &schedule, Method::Rk4 { substeps: 20 }), &exact);
        let g40 = max_state_gap(&run_from_dot1(&model, &schedule, Method::Rk4 { substeps: 40 }), &exact);
        worst = worst.max(g20);
        min_ratio = min_ratio.min(g20 / g40);
        parts.push(format!("{} {g20:.1e} (40 substeps {g40:.1e})", name.trim_end_matches(".toml")));
    }
    suite.check(
        3,
        "RK4 (20 substeps) vs exponential propagator",
        worst <= 1e-8 && min_ratio >= 12.0,
        &format!("max gap {worst:.2e} (<= 1e-8), min halving ratio {min_ratio:.1} (>= 12); {}", parts.join(", ")),
    );
}

fn dark_state_and_spectrum(suite: &mut Suite) {
    let (mut null_err, mut spec_err): (f64, f64) = (0.0, 0.0);
    let mut undefined = 0;
    for i in 0..20 {
        for j in 0..20 {
            let (a, b) = (i as f64 / 19.0, j as f64 / 19.0);
            let Ok(d) = dark_state(a, b) else {
                undefined += 1;
                continue;
            };
            let d: Vec<Complex64> = d.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            let h = ideal_hamiltonian(a, b);
            null_err = h.mul_vec(&d).iter().map(|z| z.norm()).fold(null_err, f64::max);
            let r = (a * a + b * b).sqrt();
            let spec = eigen_spectrum(&h).unwrap();
            spec_err = spec.iter().zip([-r, 0.0, r]).map(|(g, w)| (g - w).abs()).fold(spec_err, f64::max);
        }
    }
    suite.check(
        4,
        "dark-state nullity and spectrum",
        null_err <= 1e-12 && spec_err <= 1e-10 && undefined == 1,
        &format!(
            "max |H D0| {null_err:.1e} (<= 1e-12), max eigenvalue error {spec_err:.1e} (<= 1e-10) on a 20x20 grid over [0,1]^2; D0 undefined only at zero couplings"
        ),
    );
}

fn dephasing(suite: &mut Suite) {
    let m = MasterEquationModel::three_dot(0.0, 0.0, 0.01, 0.0).unwrap();
    let amps = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8), Complex64::new(0.0, 0.0)];
    let mut rho = CMatrix::zeros(3);
    for i in 0..3 {
        for j in 0..3 {
            rho[(i, j)] = amps[i] * amps[j].conj();
        }
    }
    let rho0 = DensityMatrix::from_matrix(&m, rho).unwrap();
    let idle = PulseSchedule::new(20.0, vec![vec![0.0; 50], vec![0.0; 50]]).unwrap();
    let t = evolve(&m, &idle, &rho0, Method::Expm).unwrap();
    let pop_drift = t
        .states
        .iter()
        .map(|s| (s.population(1) - 0.36).abs().max((s.population(2) - 0.64).abs()).max(s.population(3).abs()))
        .fold(0.0, f64::max);
    let decreasing = t.states.windows(2).all(|w| w[1].coherence(1, 2).norm() < w[0].coherence(1, 2).norm());

    let pulses = gaussian_ctap_pair(10.0 * PI, 50, PulseOrder::CounterIntuitive, GaussianShape::default()).unwrap();
    let ideal = run_from_dot1(&MasterEquationModel::ideal(3).unwrap(), &pulses, Method::Expm).final_fidelity();
    let noisy = run_from_dot1(&m, &pulses, Method::Expm).final_fidelity();
    suite.check(
        5,
        "dephasing",
        pop_drift <= 1e-10 && decreasing && noisy < ideal,
        &format!(
            "population drift {pop_drift:.1e} (<= 1e-10), |rho12| strictly decreasing: {decreasing}, 10pi rho33 {noisy:.6} < ideal {ideal:.6}"
        ),
    );
}

fn loss(suite: &mut Suite) {
    let s = scenario("loss_10pi.toml");
    let model = s.config.model().unwrap();
    let t = run_from_dot1(&model, &baseline_schedule(&s).unwrap(), s.config.method());
    let monotone = t.states.windows(2).all(|w| w[1].vacuum_population() >= w[0].vacuum_population());
    let drift = t.trace_drift();
    suite.check(
        6,
        "loss",
        monotone && drift <= 1e-9,
        &format!(
            "vacuum population non-decreasing: {monotone} (final {:.4}), trace drift {drift:.1e} (<= 1e-9)",
            t.final_state().vacuum_population()
        ),
    );
}

struct TrainingRun {
    seed: u64,
    dir: PathBuf,
    fidelity: f64,
    max_rho22: f64,
    time_to_09: Option<f64>,
    epochs: u64,
    secs: f64,
    kl_violations: usize,
    accepted: usize,
}

impl TrainingRun {
    fn passed(&self) -> bool {
        self.fidelity >= 0.95 && self.max_rho22 <= 0.3
    }
}

fn train_seed(root: &Path, seed: u64) -> TrainingRun {
    let dir = root.join(format!("train_seed{seed}"));
    let args = TrainArgs {
        config: preset("ideal_12pi_reduced.toml"),
        trpo_config: Some(preset("trpo_ideal_target.toml")),
        warm_start: None,
        max_wall_secs: None,
        out: dir.clone(),
        seed: Some(seed),
    };
    let started = Instant::now();
    run_in_dir("train", &dir, seed, |m| cmd_train(&args, m)).expect("training runs");
    let secs = started.elapsed().as_secs_f64();
    let report = json(&dir.join("metrics.json"));
    let best = &report["best"];
    let max_kl = load_training(&preset("trpo_ideal_target.toml")).unwrap().trpo.max_kl;
    let mut log = csv::Reader::from_path(dir.join("training_log.csv")).unwrap();
    let (mut accepted, mut kl_violations) = (0, 0);
    for row in log.records() {
        let row = row.unwrap();
        if &row[5] == "1" {
            accepted += 1;
            if row[4].parse::<f64>().unwrap() > max_kl {
                kl_violations += 1;
            }
        }
    }
    TrainingRun {
        seed,
        fidelity: best["final_fidelity"].as_f64().unwrap(),
        max_rho22: best["max_rho22"].as_f64().unwrap(),
        time_to_09: best["transfer_time_to_0.9"].as_f64(),
        epochs: report["epochs_run"].as_u64().unwrap(),
        dir,
        secs,
        kl_violations,
        accepted,
    }
}

fn learning(suite: &mut Suite, root: &Path) -> Vec<TrainingRun> {
    let runs: Vec<TrainingRun> = (1..=5).map(|seed| train_seed(root, seed)).collect();
    let passing = runs.iter().filter(|r| r.passed()).count();
    let per_seed: Vec<String> = runs
        .iter()
        .map(|r| format!("seed {} rho33 {:.4} max rho22 {:.3} in {} epochs/{:.1} s", r.seed, r.fidelity, r.max_rho22, r.epochs, r.secs))
        .collect();
    suite.check(
        7,
        "ideal-scenario training",
        passing >= 3,
        &format!("{passing}/5 seeds reach smoothed rho33 >= 0.95 with max rho22 <= 0.3; {}", per_seed.join("; ")),
    );

    let violations: usize = runs.iter().map(|r| r.kl_violations).sum();
    let accepted: usize = runs.iter().map(|r| r.accepted).sum();
    suite.check(8, "trust-region safety", violations == 0, &format!("{violations} of {accepted} accepted updates exceed max_kl"));
    runs
}

const H: f64 = 1e-6;
const TRIALS: u64 = 100;

fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max);
    let scale = analytic.iter().chain(numeric).map(|v| v.abs()).fold(0.0, f64::max).max(1e-8);
    diff / scale
}

fn central_diff(params: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let x = p[i];
            p[i] = x + H;
            let up = f(&p);
            p[i] = x - H;
            let down = f(&p);
            p[i] = x;
            (up - down) / (2.0 * H)
        })
        .collect()
}

/// Smallest |hidden pre-activation| for input `x`; central differences are
/// meaningless within `H` of a ReLU kink.
fn kink_margin(net: &Mlp, x: &[f64]) -> f64 {
    let mut a = x.to_vec();
    let mut margin = f64::INFINITY;
    for l in 0..net.n_layers() - 1 {
        let (w, b) = (net.layer_weights(l), net.layer_biases(l));
        let z: Vec<f64> = (0..b.len()).map(|o| b[o] + (0..a.len()).map(|i| w[o * a.len() + i] * a[i]).sum::<f64>()).collect();
        margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
        a = z.into_iter().map(|v| v.max(0.0)).collect();
    }
    margin
}

fn smooth_inputs(net: &Mlp, n: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x: Vec<f64> = (0..net.input_dim()).map(|_| rng.normal()).collect();
        if kink_margin(net, &x) > 1e-4 {
            out.push(x);
        }
    }
    out
}

/// Random (5, 8, 2) policy with weights large enough to leave the sigmoid's
/// linear regime.
fn random_policy(rng: &mut Rng) -> GaussianPolicy {
    let mut p = GaussianPolicy::random(5, &[8], 2, -0.5, rng).unwrap();
    let params: Vec<f64> = p.params().iter().map(|v| v * 3.0 + 0.05 * rng.normal()).collect();
    p.set_params(&params).unwrap();
    p
}

fn gradient_checks(suite: &mut Suite) {
    let (mut surrogate_worst, mut kl_worst, mut value_worst): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for trial in 0..TRIALS {
        let mut rng = Rng::seed_from_u64(7000 + trial);
        let policy = random_policy(&mut rng);
        let obs = smooth_inputs(policy.mean_net(), 4, &mut rng);
        let actions: Vec<Vec<f64>> = (0..4).map(|_| (0..2).map(|_| 0.5 + 0.3 * rng.normal()).collect()).collect();
        let advantages: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        // Old log-probabilities from a slightly different policy so the ratio is not 1.
        let old_lp: Vec<f64> = actions.iter().map(|a| gaussian_log_prob(&[0.5, 0.5], &[-0.4, -0.6], a)).collect();
        let samples = PolicySamples::new(&policy, obs.clone(), actions, old_lp, advantages).unwrap();
        let (_, grad) = surrogate_grad(&policy, &samples).unwrap();
        let mut probe = policy.clone();
        let numeric = central_diff(&policy.params(), |p| {
            probe.set_params(p).unwrap();
            ctap_core::agent::surrogate(&probe, &samples).unwrap()
        });
        surrogate_worst = surrogate_worst.max(rel_err(&grad, &numeric));

        // KL against a reference away from the current policy, where its gradient is non-zero.
        let old_mean: Vec<f64> = (0..2).map(|_| 0.5 + 0.3 * rng.normal()).collect();
        let old_ls: Vec<f64> = (0..2).map(|_| 0.3 * rng.normal()).collect();
        let eval = policy.eval(&obs[0]).unwrap();
        let mut grad = vec![0.0; policy.n_params()];
        policy.add_kl_grad(&eval, &old_mean, &old_ls, 1.0, &mut grad);
        let numeric = central_diff(&policy.params(), |p| {
            probe.set_params(p).unwrap();
            let (mean, ls) = probe.forward(&obs[0]).unwrap();
            gaussian_kl(&old_mean, &old_ls, &mean, ls)
        });
        kl_worst = kl_worst.max(rel_err(&grad, &numeric));

        let net = Mlp::random(&[5, 8, 1], 1.0, &mut rng).unwrap();
        let vobs = smooth_inputs(&net, 6, &mut rng);
        let targets: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let (_, grad) = value_loss_grad(&net, &vobs, &targets).unwrap();
        let mut vprobe = net.clone();
        let numeric = central_diff(&net.params(), |p| {
            vprobe.set_params(p).unwrap();
            value_loss_grad(&vprobe, &vobs, &targets).unwrap().0
        });
        value_worst = value_worst.max(rel_err(&grad, &numeric));
    }
    suite.check(
        9,
        "gradient checks",
        surrogate_worst <= 1e-4 && kl_worst <= 1e-4 && value_worst <= 1e-4,
        &format!(
            "worst relative error over {TRIALS} trials: surrogate {surrogate_worst:.1e}, KL {kl_worst:.1e}, value {value_worst:.1e} (<= 1e-4)"
        ),
    );
}

fn speed(suite: &mut Suite, root: &Path, runs: &[TrainingRun]) {
    let dir = root.join("baseline_reduced");
    let args = BaselineArgs { config: preset("ideal_12pi_reduced.toml"), out: dir.clone(), seed: 0 };
    run_in_dir("baseline", &dir, 0, |m| cmd_baseline(&args, m)).unwrap();
    let reference = json(&dir.join("metrics.json"))["transfer_time_to_0.9"].as_f64().unwrap();
    let faster: Vec<String> = runs
        .iter()
        .filter(|r| r.passed() && r.time_to_09.is_some_and(|t| t <= reference))
        .map(|r| format!("seed {} {:.2}", r.seed, r.time_to_09.unwrap()))
        .collect();
    let verdict = if faster.is_empty() { Verdict::Warn } else { Verdict::Pass };
    let listed = if faster.is_empty() { "none".to_string() } else { faster.join(", ") };
    suite.report(
        10,
        "faster transfer than the Gaussian baseline",
        verdict,
        &format!("baseline reaches rho33 0.9 at t = {reference:.2}; passing seeds at or before it: {listed}"),
    );
}

fn structure_on_trained_policy(suite: &mut Suite, root: &Path, runs: &[TrainingRun]) -> Option<PathBuf> {
    let Some(run) = runs.iter().filter(|r| r.passed()).max_by(|a, b| a.fidelity.total_cmp(&b.fidelity)) else {
        suite.check(11, "2TBN structure", false, "no criterion-7 checkpoint reached the target");
        return None;
    };
    let ck = run.dir.join("checkpoint.json");
    let dir = root.join("analyze");
    let args = AnalyzeArgs {
        source: AnalysisSource::Checkpoint(ck.clone()),
        config: None,
        n_samples: 100_000,
        epsilon: 0.05,
        exploration_std: 0.1,
        out: dir.clone(),
        seed: 0,
    };
    let started = Instant::now();
    let g = run_in_dir("analyze", &dir, 0, |m| cmd_analyze(&args, m)).expect("analysis runs");
    let secs = started.elapsed().as_secs_f64();

    let reward_parents: BTreeSet<&str> = g.parents("reward").into_iter().map(base_name).collect();
    let parents_ok = reward_parents.iter().all(|p| ["rho22", "rho33"].contains(p));
    let rho11_edges =
        g.edges.iter().filter(|e| base_name(&e.source) == "rho11" || base_name(&e.target) == "rho11").count();
    let prunable: BTreeSet<&str> = g.prunable().into_iter().collect();
    let coherences: Vec<String> = state_labels(3).into_iter().filter(|l| l.contains('_')).collect();
    let kept: Vec<&str> = coherences.iter().map(String::as_str).filter(|c| !prunable.contains(c)).collect();
    let fit = |t: &str| g.fit_quality.iter().find(|(n, _)| n == t).map_or(f64::NAN, |(_, r2)| *r2);
    suite.check(
        11,
        "2TBN structure on a trained policy",
        parents_ok && rho11_edges == 0 && kept.is_empty(),
        &format!(
            "seed {} checkpoint, 100000 samples, {secs:.0} s; reward parents {{{}}} within {{rho22, rho33}}: {parents_ok}; rho11 edges: {rho11_edges}; coherences not prunable: [{}] (rho22_next fit R2 {:.3})",
            run.seed,
            reward_parents.into_iter().collect::<Vec<_>>().join(", "),
            kept.join(", "),
            fit("rho22_next"),
        ),
    );
    Some(ck)
}

fn synthetic_oracle(suite: &mut Suite) {
    let mut rng = Rng::seed_from_u64(12);
    let n = 10_000;
    let x: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| rng.uniform()).collect()).collect();
    let y: Vec<f64> = (0..n).map(|i| x[0][i] + 0.05 * rng.normal()).collect();
    let mut cols = x;
    cols.push(y);
    let names = ["x1", "x2", "x3", "x4", "y"].map(String::from).to_vec();
    let d = TransitionDataset::from_columns(names, cols).unwrap();
    let importance = feature_importance(&d, 4, &[0, 1, 2, 3], &ForestConfig::default()).unwrap().scores[0];

    let rows: Vec<Vec<f64>> = (0..5000)
        .map(|_| {
            let s: Vec<f64> = (0..9).map(|_| rng.uniform()).collect();
            let mut row = s.clone();
            row.extend((0..4).map(|_| rng.uniform()));
            row.extend(&s);
            row.push(s[2]);
            row
        })
        .collect();
    let frozen = TransitionDataset::from_rows(transition_layout(3).into_iter().map(|(n, _)| n).collect(), &rows).unwrap();
    let g = build_2tbn(&frozen, &TbnConfig::default()).unwrap();
    let parents: BTreeSet<String> = g.parents("reward").into_iter().map(|p| base_name(p).to_string()).collect();
    let relevant: BTreeSet<String> = g.relevant.iter().cloned().collect();
    suite.check(
        12,
        "synthetic importance oracle",
        importance >= 0.95 && relevant == parents,
        &format!(
            "importance(x1) {importance:.4} (>= 0.95); frozen dynamics relevant {{{}}} vs reward parents {{{}}}",
            relevant.into_iter().collect::<Vec<_>>().join(", "),
            parents.into_iter().collect::<Vec<_>>().join(", ")
        ),
    );
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    files
}

/// trajectory and schedule from baseline, the training log, the dataset.
const EXPECTED_CSVS: usize = 4;

fn determinism(suite: &mut Suite, root: &Path, checkpoint: Option<&Path>) {
    let mut mismatches = Vec::new();
    let mut compared = 0;
    let trpo = root.join("trpo_short.toml");
    std::fs::write(&trpo, "total_epochs = 10\n").unwrap();
    for rerun in ["a", "b"] {
        let dir = root.join("rerun").join(rerun);
        let b = BaselineArgs { config: preset("ideal_12pi.toml"), out: dir.join("baseline"), seed: 0 };
        run_in_dir("baseline", &b.out, 0, |m| cmd_baseline(&b, m)).unwrap();
        let t = TrainArgs {
            config: preset("ideal_12pi_reduced.toml"),
            trpo_config: Some(trpo.clone()),
            warm_start: None,
            max_wall_secs: None,
            out: dir.join("train"),
            seed: Some(11),
        };
        run_in_dir("train", &t.out, 11, |m| cmd_train(&t, m)).unwrap();
        let a = AnalyzeArgs {
            source: AnalysisSource::Random,
            config: None,
            n_samples: 5000,
            epsilon: 0.05,
            exploration_std: 0.1,
            out: dir.join("analyze"),
            seed: 11,
        };
        run_in_dir("analyze", &a.out, 11, |m| cmd_analyze(&a, m)).unwrap();
    }
    for sub in ["baseline", "train", "analyze"] {
        let a = root.join("rerun/a").join(sub);
        for file in csv_files(&a) {
            let other = root.join("rerun/b").join(sub).join(file.file_name().unwrap());
            compared += 1;
            if std::fs::read(&file).unwrap() != std::fs::read(&other).unwrap() {
                mismatches.push(format!("{sub}/{}", file.file_name().unwrap().to_string_lossy()));
            }
        }
    }

    let ck_path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| root.join("rerun/a/train/checkpoint.json"));
    let original = load_checkpoint(&ck_path).unwrap();
    let copy = root.join("roundtrip.json");
    save_checkpoint(&copy, &original).unwrap();
    let loaded = load_checkpoint(&copy).unwrap();
    let bits = |p: &GaussianPolicy| {
        let s = greedy_schedule(p, &original.scenario).unwrap();
        s.channels().iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>()
    };
    let actions_equal = bits(&original.policy) == bits(&loaded.policy);
    suite.check(
        13,
        "determinism and persistence",
        mismatches.is_empty() && compared == EXPECTED_CSVS && actions_equal,
        &format!(
            "{compared} CSV payloads compared across fixed-seed reruns, {} differ{}; checkpoint round-trip greedy actions bitwise equal: {actions_equal}",
            mismatches.len(),
            if mismatches.is_empty() { String::new() } else { format!(" ({})", mismatches.join(", ")) }
        ),
    );
}

fn main() -> ExitCode {
    let workspace = tempfile::tempdir().expect("temporary directory");
    let root = workspace.path();
    let mut suite = Suite { failures: 0, warnings: 0 };
    let started = Instant::now();

    baseline_physics(&mut suite);
    propagator_equivalence(&mut suite);
    dark_state_and_spectrum(&mut suite);
    dephasing(&mut suite);
    loss(&mut suite);
    let runs = learning(&mut suite, root);
    gradient_checks(&mut suite);
    speed(&mut suite, root, &runs);
    let checkpoint = structure_on_trained_policy(&mut suite, root, &runs);
    synthetic_oracle(&mut suite);
    determinism(&mut suite, root, checkpoint.as_deref());

    println!(
        "acceptance: {} failed, {} warnings, {:.0} s",
        suite.failures,
        suite.warnings,
        started.elapsed().as_secs_f64()
    );
    if suite.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
