use std::fmt::Write as _;
use std::fs;
use std::time::Instant;

use mcscan::{
    auto_select, detect, detect_single, detector, estimate_all, evaluate_detection,
    evaluate_inference, infer_all, mad_standardize, solution_path, CrossProductSums, DiffMethod,
    InferenceOptions, LambdaCvOptions, RegressionDataset, ScenarioConfig, SegmentationResult,
    ThresholdKind, ThresholdPolicy, Trimming, Tuning, RNG_ALGORITHM,
};
use rayon::prelude::*;

use crate::args::*;
use crate::failure::Failure;
use crate::io::{read_dataset, write_dataset, write_text};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn header(out: &mut String, command: &str) {
    let _ = writeln!(out, "# mcscan {VERSION} {command}");
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn policy_name(policy: &ThresholdPolicy) -> String {
    match policy.kind {
        ThresholdKind::Fixed(v) => format!("fixed:{v}"),
        ThresholdKind::DefaultFixed { c_pi } => format!("default:{c_pi}"),
        ThresholdKind::Automatic => "auto".into(),
    }
}

fn tuning_name(t: Tuning) -> String {
    match t {
        Tuning::CrossValidated => "cv".into(),
        Tuning::Fixed(v) => v.to_string(),
    }
}

fn write_segmentation(out: &mut String, fit: &SegmentationResult) {
    let _ = writeln!(out, "threshold_used: {}", fit.threshold_used);
    let _ = writeln!(out, "trimming: {}", fit.trimming);
    let _ = writeln!(out, "standardized: {}", fit.standardized);
    if let Some(c) = fit.mad_constant {
        let _ = writeln!(out, "mad_constant: {c}");
    }
    let _ = writeln!(out, "change_points: {}", join(&fit.change_points));
    let _ = writeln!(out, "peaks:");
    let _ = writeln!(out, "a\tb\tk_star\tt_star\targmax_coord");
    for pk in &fit.peaks {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            pk.interval.a,
            pk.interval.b,
            pk.k_star,
            pk.t_star,
            pk.argmax_coord + 1
        );
    }
}

fn check_policy(policy: &ThresholdPolicy) -> Result<(), Failure> {
    if let ThresholdKind::DefaultFixed { c_pi } = policy.kind {
        if !(c_pi > 0.0) {
            return Err(Failure::Usage(format!("threshold constant must be positive, got {c_pi}")));
        }
    }
    Ok(())
}

fn run_detection(data: &RegressionDataset, opts: &DetectOpts) -> Result<SegmentationResult, Failure> {
    let policy = opts.policy();
    check_policy(&policy)?;
    Ok(detect(data, &policy, opts.standardize)?)
}

pub fn detect_cmd(args: &DetectArgs, out: &mut String) -> Result<(), Failure> {
    let data = read_dataset(&args.input)?;
    let fit = if args.single {
        detect_single(&data, args.detect.trim.0, args.detect.standardize)?
    } else {
        run_detection(&data, &args.detect)?
    };
    header(out, "detect");
    let _ = writeln!(out, "input: {}", args.input.display());
    let _ = writeln!(out, "n: {}", data.n());
    let _ = writeln!(out, "p: {}", data.p());
    let mode = if args.single { "single".to_string() } else { policy_name(&args.detect.policy()) };
    let _ = writeln!(out, "threshold_policy: {mode}");
    write_segmentation(out, &fit);

    if let Some(path) = &args.plot_data {
        let sums = if fit.standardized {
            CrossProductSums::new(&mad_standardize(&data).data)
        } else {
            CrossProductSums::new(&data)
        };
        let mut plot = String::from("series\tx\tvalue\n");
        for k in 1..data.n() {
            let _ = writeln!(plot, "detector\t{k}\t{}", detector(&sums, 0, k, data.n())?);
        }
        for pk in &fit.peaks {
            let _ = writeln!(plot, "change_point\t{}\t{}", pk.k_star, pk.t_star);
        }
        write_text(path, &plot)?;
    }
    Ok(())
}

pub fn path_cmd(args: &PathArgs, out: &mut String) -> Result<(), Failure> {
    let data = read_dataset(&args.input)?;
    let trim = args.trim.0.resolve(data.n(), data.p());
    let path = solution_path(&data, trim, args.standardize)?;
    let chosen = auto_select(&path)?;
    header(out, "path");
    let _ = writeln!(out, "input: {}", args.input.display());
    let _ = writeln!(out, "n: {}", data.n());
    let _ = writeln!(out, "p: {}", data.p());
    let _ = writeln!(out, "trimming: {}", path.trimming);
    let _ = writeln!(out, "standardized: {}", path.standardized);
    let _ = writeln!(out, "entries: {}", path.entries.len());
    let _ = writeln!(out, "num_cps\tthreshold_low\tthreshold_high\tscore\tchange_points");
    for e in &path.entries {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            e.num_cps(),
            e.threshold_low,
            e.threshold_high,
            e.score,
            join(&e.change_points)
        );
    }
    let _ = writeln!(out, "selected_threshold: {}", chosen.threshold_used);
    let _ = writeln!(out, "change_points: {}", join(&chosen.change_points));
    if let Some(p) = &args.plot_data {
        let mut plot = String::from("series\tx\tvalue\n");
        for e in &path.entries {
            let _ = writeln!(plot, "score\t{}\t{}", e.num_cps(), e.score);
        }
        write_text(p, &plot)?;
    }
    Ok(())
}

fn change_points_for(
    data: &RegressionDataset,
    given: &Option<IndexList>,
    opts: &DetectOpts,
    out: &mut String,
) -> Result<Vec<usize>, Failure> {
    match given {
        Some(list) => {
            let _ = writeln!(out, "change_points_source: given");
            Ok(list.0.clone())
        }
        None => {
            let fit = run_detection(data, opts)?;
            let _ = writeln!(out, "change_points_source: detect {}", policy_name(&opts.policy()));
            let _ = writeln!(out, "threshold_used: {}", fit.threshold_used);
            Ok(fit.change_points)
        }
    }
}

pub fn estimate_cmd(args: &EstimateArgs, out: &mut String) -> Result<(), Failure> {
    let method: DiffMethod = args.method.into();
    if method == DiffMethod::Naive && args.lambda.0 == Tuning::CrossValidated {
        return Err(Failure::Usage("the naive estimator needs a numeric --lambda".into()));
    }
    let data = read_dataset(&args.input)?;
    header(out, "estimate");
    let _ = writeln!(out, "input: {}", args.input.display());
    let _ = writeln!(out, "n: {}", data.n());
    let _ = writeln!(out, "p: {}", data.p());
    let cps = change_points_for(&data, &args.change_points, &args.detect, out)?;
    let _ = writeln!(out, "change_points: {}", join(&cps));
    let _ = writeln!(out, "method: {}", method.name());
    let _ = writeln!(out, "lambda_policy: {}", tuning_name(args.lambda.0));
    let estimates = estimate_all(&data, &cps, method, args.lambda.0, &LambdaCvOptions::default())?;
    for (anchor, est) in &estimates {
        let _ = writeln!(out, "change: {}", anchor.j + 1);
        let _ = writeln!(out, "change_point: {}", anchor.theta_hat);
        let _ = writeln!(out, "anchor: {},{}", anchor.a, anchor.b);
        let _ = writeln!(out, "lambda: {}", est.lambda);
        let _ = writeln!(out, "residual: {}", est.residual);
        let _ = writeln!(out, "converged: {}", est.converged);
        let _ = writeln!(out, "iterations: {}", est.iterations);
        let support: Vec<usize> = (0..est.delta.len()).filter(|&i| est.delta[i] != 0.0).collect();
        let _ = writeln!(out, "nonzero: {}", support.len());
        let _ = writeln!(out, "coord\tdelta_hat");
        for i in support {
            let _ = writeln!(out, "{}\t{}", i + 1, est.delta[i]);
        }
    }
    Ok(())
}

fn check_inference(alpha: f64, replicates: usize, eps: f64) -> Result<(), Failure> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Failure::Usage(format!("--alpha must lie in (0, 1), got {alpha}")));
    }
    if replicates == 0 {
        return Err(Failure::Usage("--B must be positive".into()));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Failure::Usage(format!("--eps must lie in [0, 1), got {eps}")));
    }
    Ok(())
}

pub fn infer_cmd(args: &InferArgs, out: &mut String) -> Result<(), Failure> {
    check_inference(args.alpha, args.replicates, args.eps)?;
    let data = read_dataset(&args.input)?;
    header(out, "infer");
    let _ = writeln!(out, "input: {}", args.input.display());
    let _ = writeln!(out, "n: {}", data.n());
    let _ = writeln!(out, "p: {}", data.p());
    let cps = change_points_for(&data, &args.change_points, &args.detect, out)?;
    let options = InferenceOptions {
        alpha: args.alpha,
        replicates: args.replicates,
        seed: args.seed,
        split: args.split,
        epsilon: args.eps,
        method: args.ci.into(),
        lambda: args.lambda.0,
        eta: args.eta.0,
        ..Default::default()
    };
    let _ = writeln!(out, "change_points: {}", join(&cps));
    let _ = writeln!(out, "alpha: {}", options.alpha);
    let _ = writeln!(out, "replicates: {}", options.replicates);
    let _ = writeln!(out, "seed: {}", options.seed);
    let _ = writeln!(out, "rng: {RNG_ALGORITHM}");
    let _ = writeln!(out, "split: {}", options.split);
    let _ = writeln!(out, "eps: {}", options.epsilon);
    let _ = writeln!(out, "ci: {}", options.method.name());
    let reports = infer_all(&data, &cps, &options)?;
    let _ = writeln!(out, "bands: {}", reports.len());
    let mut plot = String::from("change\tcoord\tcenter\tlower\tupper\n");
    for r in &reports {
        let b = &r.band;
        let _ = writeln!(out, "change: {}", r.j + 1);
        let _ = writeln!(out, "change_point: {}", r.change_point);
        let _ = writeln!(out, "segment: {},{},{}", r.a, r.theta, r.b);
        let _ = writeln!(out, "lambda: {}", r.estimate.lambda);
        let _ = writeln!(out, "eta: {}", r.eta);
        let _ = writeln!(out, "location_factor: {}", r.desparsified.location_factor);
        let _ = writeln!(out, "noise_clip: {}", r.noise_clip);
        let _ = writeln!(out, "band_seed: {}", r.seed);
        let _ = writeln!(out, "quantile: {}", b.quantile);
        let _ = writeln!(out, "quantile_source: {}", b.quantile_source);
        let _ = writeln!(out, "half_width: {}", b.half_width);
        let rejected: Vec<usize> = b.rejected.iter().map(|i| i + 1).collect();
        let _ = writeln!(out, "rejected: {}", join(&rejected));
        let _ = writeln!(out, "coord\tdelta_hat\tcenter\tlower\tupper");
        for i in 0..b.center.len() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                i + 1,
                r.estimate.delta[i],
                b.center[i],
                b.lower[i],
                b.upper[i]
            );
            let _ = writeln!(plot, "{}\t{}\t{}\t{}\t{}", r.j + 1, i + 1, b.center[i], b.lower[i], b.upper[i]);
        }
    }
    if let Some(p) = &args.plot_data {
        write_text(p, &plot)?;
    }
    Ok(())
}

fn scenario_config(args: &SimulateArgs) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
            ScenarioConfig::from_toml(&text).map_err(|e| Failure::Data(e.to_string()))?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(s) = args.scenario {
        cfg.scenario = s.into();
    }
    macro_rules! take {
        ($($field:ident),*) => { $(if let Some(v) = args.$field.clone() { cfg.$field = v.into(); })* };
    }
    take!(n, p, rho, sparsity, gamma, nu, seed);
    if let Some(list) = &args.change_points {
        cfg.change_points = list.0.clone();
    }
    if cfg.scenario == mcscan::Scenario::M3 {
        cfg.change_points = vec![cfg.n / 4, cfg.n / 2, 3 * cfg.n / 4];
        cfg.sparsity = 4;
    }
    Ok(cfg)
}

struct RepOutcome {
    rep: u64,
    seed: u64,
    truth: Vec<usize>,
    detected: Vec<usize>,
    hausdorff: f64,
    v_measure: f64,
    errors: Vec<usize>,
    inference: Vec<mcscan::InferenceReport>,
}

pub fn simulate_cmd(args: &SimulateArgs, out: &mut String) -> Result<(), Failure> {
    if args.infer {
        check_inference(args.alpha, args.replicates, 0.0)?;
    }
    check_policy(&args.detect.policy())?;
    let cfg = scenario_config(args)?;
    if let Some(dir) = &args.data_dir {
        fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("cannot create {}: {e}", dir.display())))?;
        write_text(&dir.join("scenario.toml"), &cfg.to_toml())?;
    }
    let outcomes: Vec<Result<RepOutcome, Failure>> = (0..args.reps)
        .into_par_iter()
        .map(|rep| {
            let rep_cfg = cfg.for_repetition(rep);
            let (data, truth) = rep_cfg.generate()?;
            if let Some(dir) = &args.data_dir {
                write_dataset(&dir.join(format!("rep_{rep}.csv")), &data)?;
                let mut t = format!("seed: {}\nchange_points: {}\n", rep_cfg.seed, join(&truth.change_points));
                for (j, d) in truth.deltas.iter().enumerate() {
                    let _ = writeln!(t, "delta_{}: {}", j + 1, join(d));
                }
                write_text(&dir.join(format!("rep_{rep}_truth.txt")), &t)?;
            }
            let fit = run_detection(&data, &args.detect)?;
            let eval = evaluate_detection(&fit.change_points, &truth.change_points, data.n());
            let inference = if args.infer && !truth.change_points.is_empty() {
                let opts = InferenceOptions {
                    alpha: args.alpha,
                    replicates: args.replicates,
                    seed: rep_cfg.seed,
                    split: args.split,
                    method: args.ci.into(),
                    ..Default::default()
                };
                let bands = infer_all(&data, &truth.change_points, &opts)?;
                bands
                    .iter()
                    .zip(&truth.deltas)
                    .map(|(b, d)| evaluate_inference(&b.band, d))
                    .collect::<Result<_, _>>()?
            } else {
                Vec::new()
            };
            Ok(RepOutcome {
                rep,
                seed: rep_cfg.seed,
                truth: truth.change_points,
                detected: fit.change_points,
                hausdorff: eval.hausdorff,
                v_measure: eval.v_measure,
                errors: eval.errors(),
                inference,
            })
        })
        .collect();
    let outcomes: Vec<RepOutcome> = outcomes.into_iter().collect::<Result<_, _>>()?;

    header(out, "simulate");
    for line in cfg.to_toml().lines() {
        let _ = writeln!(out, "config.{line}");
    }
    let _ = writeln!(out, "reps: {}", args.reps);
    let _ = writeln!(out, "rng: {RNG_ALGORITHM}");
    let _ = writeln!(out, "threshold_policy: {}", policy_name(&args.detect.policy()));
    let _ = writeln!(out, "hausdorff_convention: scaled sets augmented with 0 and 1");
    let _ = writeln!(out, "rep\tseed\tq\tq_hat\thausdorff\tv_measure\terrors\ttruth\tdetected");
    for o in &outcomes {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            o.rep,
            o.seed,
            o.truth.len(),
            o.detected.len(),
            o.hausdorff,
            o.v_measure,
            join(&o.errors),
            join(&o.truth),
            join(&o.detected)
        );
    }
    if args.infer {
        let _ = writeln!(out, "inference:");
        let _ = writeln!(out, "rep\tchange\tcoverage\tproportion\ttpr\tfdr\thalf_width");
        for o in &outcomes {
            for (j, r) in o.inference.iter().enumerate() {
                let tpr = r.tpr.map_or("NA".to_string(), |v| v.to_string());
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{tpr}\t{}\t{}",
                    o.rep,
                    j + 1,
                    r.coverage,
                    r.proportion,
                    r.fdr,
                    r.half_width
                );
            }
        }
    }
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn bench_cmd(args: &BenchArgs, out: &mut String) -> Result<(), Failure> {
    if args.reps == 0 || args.n.0.is_empty() || args.p.0.is_empty() {
        return Err(Failure::Usage("bench needs at least one n, one p and one repetition".into()));
    }
    header(out, "bench");
    let _ = writeln!(out, "threads: {}", rayon::current_num_threads());
    let _ = writeln!(out, "reps: {}", args.reps);
    let _ = writeln!(out, "n\tp\tdetect_secs\tpath_secs");
    for &n in &args.n.0 {
        for &p in &args.p.0 {
            let (mut det, mut path) = (Vec::new(), Vec::new());
            for rep in 0..args.reps as u64 {
                let cfg = ScenarioConfig {
                    scenario: mcscan::Scenario::Custom,
                    n,
                    p,
                    change_points: vec![n / 2],
                    rho: 0.5,
                    sparsity: p.min(5),
                    seed: args.seed,
                    ..Default::default()
                }
                .for_repetition(rep);
                let (data, _) = cfg.generate()?;
                let start = Instant::now();
                detect(&data, &ThresholdPolicy::default_fixed(), true)?;
                det.push(start.elapsed().as_secs_f64());
                let start = Instant::now();
                solution_path(&data, Trimming::Default.resolve(n, p), true)?;
                path.push(start.elapsed().as_secs_f64());
            }
            let _ = writeln!(out, "{n}\t{p}\t{:.6}\t{:.6}", median(det), median(path));
        }
    }
    Ok(())
}
