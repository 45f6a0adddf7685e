//! Deterministic checks shared by the property tests and the acceptance runner.
#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use blocksgd::{
    confidence_interval, plan_horizon, BlockPartitioner, BlockSchedule, BootstrapEnsemble, EstimatorState,
    LearningRateSchedule, LossFamily, LossModel, ModelSpec, ModelStream, Observation, ParamBox, VanillaState,
    WeightDistribution,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Observations whose response is their 1-based stream position.
pub fn indexed(n: usize) -> impl Iterator<Item = Observation<f64>> {
    (1..=n).map(|i| Observation::new(i as f64, vec![1.0]))
}

/// Every emitted index appears once, in order, and the plan accounts for all of `n`.
pub fn partition_exact(n: usize, b: f64, a: f64) -> Check {
    let sched = BlockSchedule::new(b, a).map_err(|e| e.to_string())?;
    let mut p = BlockPartitioner::new(indexed(n), sched);
    let mut next = 1usize;
    while let Some(pair) = p.try_next().map_err(|e| e.to_string())? {
        let size = sched.size(pair.t);
        ensure!(pair.batch_a.len() == size && pair.batch_b.len() == size, "t={} wrong batch sizes", pair.t);
        for z in pair.batch_a.iter().chain(&pair.batch_b) {
            ensure!(z.response as usize == next, "t={}: expected index {next}, got {}", pair.t, z.response);
            next += 1;
        }
    }
    let plan = p.plan();
    ensure!(plan.consumed == next - 1, "consumed {} but emitted {}", plan.consumed, next - 1);
    ensure!(plan.consumed + plan.leftover == n, "consumed + leftover != n for n={n}");
    ensure!(plan == plan_horizon(n, &sched), "streamed plan {plan:?} differs from plan_horizon");
    ensure!(n < plan.consumed + 2 * sched.size(plan.iterations + 1), "leftover could hold another pair");
    ensure!(
        plan_horizon(plan.consumed, &sched).iterations == plan.iterations,
        "plan_horizon round trip failed for n={n}"
    );
    Ok(())
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// The recursive average equals the batch mean of a recorded trajectory.
pub fn online_average_identity(model_id: u8, n: usize, seed: u64) -> Check {
    let spec = ModelSpec::new(model_id).map_err(|e| e.to_string())?;
    let m = LossModel::new(spec.family(), spec.dim());
    let bx = ParamBox::cube(spec.dim(), 10.0).unwrap();
    let lr = LearningRateSchedule::default();
    let data = ModelStream::<f64, _>::new(spec, ChaCha8Rng::seed_from_u64(seed)).unwrap().take(n);
    let mut p = BlockPartitioner::new(data, BlockSchedule::new(3.0, 0.3).unwrap());
    let mut state = EstimatorState::new(vec![0.1, -0.1, 0.2, 0.0], &bx).unwrap();
    let mut sum = vec![0.0; spec.dim()];
    while let Some(pair) = p.try_next().unwrap() {
        state.step(&pair, lr.rate(pair.t), &m, &bx).map_err(|e| e.to_string())?;
        for ((s, a), b) in sum.iter_mut().zip(state.theta_a()).zip(state.theta_b()) {
            *s += a + b;
        }
    }
    ensure!(state.t() > 0, "no iterations");
    let batch: Vec<f64> = sum.iter().map(|s| s / (2.0 * state.t() as f64)).collect();
    let err = rel_diff(state.theta_bar(), &batch);
    ensure!(err < 1e-10, "online average deviates from batch mean by {err:e}");
    Ok(())
}

/// Constant-one weights reproduce the unweighted trajectories bit for bit.
pub fn degenerate_weights(n: usize, seed: u64) -> Check {
    let spec = ModelSpec::new(5).unwrap();
    let m = LossModel::new(spec.family(), 4);
    let bx = ParamBox::cube(4, 10.0).unwrap();
    let lr = LearningRateSchedule::default();
    let theta0 = [0.3, -0.2, 0.1, 0.05];
    let data: Vec<_> = ModelStream::<f64, _>::new(spec, ChaCha8Rng::seed_from_u64(seed)).unwrap().take(n).collect();

    let mut base = EstimatorState::new(theta0.to_vec(), &bx).unwrap();
    let mut ens = BootstrapEnsemble::new(4, &theta0, &bx, WeightDistribution::ConstantOne, seed).unwrap();
    let mut p = BlockPartitioner::new(data.clone().into_iter(), BlockSchedule::new(3.0, 0.3).unwrap());
    while let Some(pair) = p.try_next().unwrap() {
        base.step(&pair, lr.rate(pair.t), &m, &bx).unwrap();
        ens.ensemble_step(&pair, lr.rate(pair.t), &m, &bx).unwrap();
    }
    for s in ens.states() {
        ensure!(s == &base, "weighted replicate differs from the unweighted estimator");
    }

    let mut plain = VanillaState::new(theta0.to_vec(), &bx).unwrap();
    let mut weighted = plain.clone();
    for (t, z) in data.iter().enumerate() {
        let g = lr.rate(t + 1);
        plain.vanilla_step(z, g, 1.0, &m, &bx).unwrap();
        let w: f64 = WeightDistribution::ConstantOne.draw(&mut rand::rng());
        weighted.vanilla_step(z, g, w, &m, &bx).unwrap();
    }
    ensure!(plain == weighted, "vanilla weight-1 trajectory differs");
    Ok(())
}

/// Idempotence and 1-Lipschitz projection on random inputs (no tolerance).
pub fn projection_properties(pairs: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bx = ParamBox::new(vec![-10.0, -1.0, 0.0, -3.0], vec![10.0, 1.0, 5.0, 3.0]).unwrap();
    for _ in 0..pairs {
        let a: Vec<f64> = (0..4).map(|_| rng.random_range(-40.0..40.0)).collect();
        let b: Vec<f64> = (0..4).map(|_| rng.random_range(-40.0..40.0)).collect();
        let pa = bx.project(&a).unwrap();
        ensure!(bx.project(&pa).unwrap() == pa, "projection not idempotent at {a:?}");
        let pb = bx.project(&b).unwrap();
        let d = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        ensure!(d(&pa, &pb) <= d(&a, &b), "projection expanded distance for {a:?}, {b:?}");
    }
    Ok(())
}

/// Central differences agree with the analytic gradient.
pub fn gradient_finite_difference(draws: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for family in [LossFamily::Linear, LossFamily::Logistic] {
        let m = LossModel::new(family, 4);
        for _ in 0..draws {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let theta: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
            let y = match family {
                LossFamily::Logistic => {
                    if rng.random_bool(0.5) {
                        1.0
                    } else {
                        -1.0
                    }
                }
                _ => rng.random_range(-3.0..3.0),
            };
            let err = m.finite_diff_check(&Observation::new(y, x), &theta, 1e-5).map_err(|e| e.to_string())?;
            ensure!(err < 1e-6, "{family} gradient differs from finite differences by {err:e}");
        }
    }
    Ok(())
}

pub fn quantile_examples() -> Check {
    let s: Vec<f64> = (1..=100).map(f64::from).collect();
    ensure!(confidence_interval(&s, 0.05).unwrap() == (3.0, 98.0), "alpha=0.05 example");
    ensure!(confidence_interval(&s, 0.5).unwrap() == (25.0, 75.0), "alpha=0.5 example");
    ensure!(confidence_interval(&[2.5; 10], 0.05).unwrap() == (2.5, 2.5), "constant sample example");
    ensure!(confidence_interval(&[1.0], 0.05).is_err(), "k=1 must be rejected");
    ensure!(confidence_interval(&s, 1.0).is_err(), "alpha=1 must be rejected");
    Ok(())
}

/// Runs the binary with `args`, substituting `{out}` by a fresh path, and returns the output bytes.
pub fn run_command(bin: &Path, dir: &Path, tag: &str, args: &[&str]) -> Result<(Vec<u8>, Vec<u8>), String> {
    let out = dir.join(format!("{tag}.csv"));
    let out_s = out.to_string_lossy().into_owned();
    let args: Vec<String> = args.iter().map(|a| a.replace("{out}", &out_s)).collect();
    let res = Command::new(bin).args(&args).output().map_err(|e| e.to_string())?;
    ensure!(res.status.success(), "{tag}: exit {:?}: {}", res.status, String::from_utf8_lossy(&res.stderr));
    let file = std::fs::read(&out).map_err(|e| format!("{tag}: {e}"))?;
    Ok((file, res.stdout))
}

/// Every command produces byte-identical output when replayed with the same flags.
pub fn command_replay(bin: &Path) -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("data.csv");
    let data_s = data.to_string_lossy().into_owned();
    let gen = ["generate", "--model", "4", "--n", "3000", "--seed", "11", "--out", "{out}"];
    let (bytes, _) = run_command(bin, dir.path(), "gen1", &gen)?;
    std::fs::write(&data, &bytes).map_err(|e| e.to_string())?;
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("generate", gen.to_vec()),
        (
            "simulate",
            vec![
                "simulate", "--model", "5", "--n", "2000", "--reps", "3", "--k", "20", "--seed", "4", "--baseline",
                "--out", "{out}",
            ],
        ),
        ("prop1", vec!["prop1", "--T", "1000", "--reps", "100", "--k", "5", "--seed", "2", "--out", "{out}"]),
        ("kappa", vec!["kappa", "--alphas", "0:0.9:0.3", "--T", "500", "--out", "{out}"]),
        (
            "fit",
            vec![
                "fit", "--input", &data_s, "--response", "y", "--features", "x1,x2,x3", "--intercept", "--k", "20",
                "--seed", "3", "--out", "{out}",
            ],
        ),
    ];
    for (name, args) in &commands {
        let first = run_command(bin, dir.path(), &format!("{name}_a"), args)?;
        let second = run_command(bin, dir.path(), &format!("{name}_b"), args)?;
        ensure!(!first.0.is_empty(), "{name} wrote nothing");
        ensure!(first == second, "{name} output differs between identical runs");
    }
    Ok(())
}
