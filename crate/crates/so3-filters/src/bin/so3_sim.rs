//! Command-line simulator for the SO(3) attitude filters.
//!
//! Subcommands:
//! - `simulate`   — run one scenario, writing per-(filter, seed) time-series
//!   CSVs, the paired metrics CSV, the summary report and the resolved
//!   scenario TOML into `--out`.
//! - `montecarlo` — seed sweep; writes the metrics CSV, summary report and
//!   scenario TOML (no per-step series).
//! - `preset-list` — list built-in presets (`--toml` prints their full config).
//! - `selftest`   — run the built-in verification battery; exits nonzero on
//!   any failure.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use so3_filters::filters::FilterKind;
use so3_filters::harness::{
    aggregate_metrics, compute_metrics, default_window, render_metrics_csv, render_report,
    render_series_csv, run_all_trials, run_monte_carlo, RunMetrics,
};
use so3_filters::scenario::{preset, Scenario, PRESET_NAMES};

#[derive(Parser)]
#[command(
    name = "so3-sim",
    about = "Stochastic and deterministic attitude filter simulator on SO(3)",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write time-series CSVs plus the summary report.
    Simulate(RunArgs),
    /// Run a seed sweep and write per-trial metrics plus the summary report.
    Montecarlo(RunArgs),
    /// List the built-in scenario presets.
    PresetList {
        /// Print each preset's full TOML configuration.
        #[arg(long)]
        toml: bool,
    },
    /// Run the built-in verification battery.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Built-in preset name (see `preset-list`). Default: paper-sV.
    #[arg(long)]
    preset: Option<String>,

    /// Scenario TOML file (mutually exclusive with --preset).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Comma-separated filter list (det,ito,strat,ito-quat,strat-quat);
    /// overrides the scenario's selection.
    #[arg(long, value_delimiter = ',')]
    filters: Vec<String>,

    /// Seed set: a single integer, a comma list, or an inclusive range like
    /// `0..19`; overrides the scenario's seeds.
    #[arg(long)]
    seeds: Option<String>,

    /// Single-seed shorthand for --seeds.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,

    /// Override the integration step (seconds).
    #[arg(long)]
    dt: Option<f64>,

    /// Override the end time (seconds).
    #[arg(long)]
    t_end: Option<f64>,

    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

fn parse_seeds(text: &str) -> anyhow::Result<Vec<u64>> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let start: u64 = a.trim().parse().context("bad range start")?;
        let end: u64 = b.trim().trim_start_matches('=').parse().context("bad range end")?;
        if end < start {
            bail!("seed range {text} is empty");
        }
        return Ok((start..=end).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|e| anyhow::anyhow!("bad seed '{s}': {e}")))
        .collect()
}

fn resolve_scenario(args: &RunArgs) -> anyhow::Result<Scenario> {
    let mut scenario = match (&args.preset, &args.config) {
        (Some(name), None) => preset(name)?,
        (None, Some(path)) => Scenario::from_toml_file(path)?,
        (None, None) => preset("paper-sV")?,
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    if !args.filters.is_empty() {
        scenario.filters = args
            .filters
            .iter()
            .map(|s| s.parse::<FilterKind>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(seed) = args.seed {
        scenario.seeds = vec![seed];
    } else if let Some(text) = &args.seeds {
        scenario.seeds = parse_seeds(text)?;
    }
    if let Some(dt) = args.dt {
        scenario.grid.dt = dt;
    }
    if let Some(t_end) = args.t_end {
        scenario.grid.t_end = t_end;
    }
    scenario.validate()?;
    Ok(scenario)
}

fn write_text(dir: &Path, name: &str, text: &str) -> anyhow::Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn print_summaries(report: &so3_filters::harness::MonteCarloReport) {
    for s in &report.summaries {
        println!(
            "{:>10}: mean|R~|_I over [{}, {}] s: mean {:.4e}, median {:.4e} | std: mean {:.4e} | reached 0.01 by 5 s: {}/{}",
            s.filter.to_string(),
            report.window.0,
            report.window.1,
            s.mean_of_means,
            s.median_of_means,
            s.mean_of_stds,
            s.reached_0p01_by_5s,
            s.n_seeds,
        );
    }
}

fn cmd_simulate(args: &RunArgs) -> anyhow::Result<()> {
    let scenario = resolve_scenario(args)?;
    std::fs::create_dir_all(&args.out)?;
    let window = default_window(&scenario);

    let series_list = run_all_trials(&scenario)?;
    let mut trials: Vec<Vec<RunMetrics>> = Vec::new();
    for (i, series) in series_list.iter().enumerate() {
        let name = format!("{}_seed{}.csv", series.filter, series.seed);
        write_text(&args.out, &name, &render_series_csv(series))?;
        let metrics = compute_metrics(series, window)?;
        if i % scenario.filters.len() == 0 {
            trials.push(Vec::new());
        }
        trials.last_mut().unwrap().push(metrics);
    }
    let report = aggregate_metrics(
        scenario.grid.t0,
        window,
        scenario.seeds.clone(),
        scenario.filters.clone(),
        trials,
    );
    write_text(&args.out, "metrics.csv", &render_metrics_csv(&report))?;
    write_text(&args.out, "summary.txt", &render_report(&report))?;
    write_text(&args.out, "scenario.toml", &scenario.to_toml_string())?;

    println!(
        "wrote {} trial series, metrics.csv, summary.txt, scenario.toml to {}",
        series_list.len(),
        args.out.display()
    );
    print_summaries(&report);
    Ok(())
}

fn cmd_montecarlo(args: &RunArgs) -> anyhow::Result<()> {
    let scenario = resolve_scenario(args)?;
    std::fs::create_dir_all(&args.out)?;
    let report = run_monte_carlo(&scenario, &scenario.filters.clone())?;
    write_text(&args.out, "metrics.csv", &render_metrics_csv(&report))?;
    write_text(&args.out, "summary.txt", &render_report(&report))?;
    write_text(&args.out, "scenario.toml", &scenario.to_toml_string())?;
    println!(
        "swept {} seeds x {} filters; wrote metrics.csv, summary.txt, scenario.toml to {}",
        report.seeds.len(),
        report.filters.len(),
        args.out.display()
    );
    print_summaries(&report);
    Ok(())
}

fn cmd_preset_list(toml: bool) {
    for (name, description) in PRESET_NAMES {
        println!("{name}: {description}");
        if toml {
            println!("---");
            print!("{}", preset(name).expect("built-in preset").to_toml_string());
            println!("---");
        }
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Montecarlo(args) => cmd_montecarlo(&args),
        Command::PresetList { toml } => {
            cmd_preset_list(toml);
            Ok(())
        }
        Command::Selftest => selftest::run(),
    }
}

/// Built-in verification battery: re-derives the key invariants with
/// independent oracles and checks them against the library.
mod selftest {
    use nalgebra::{Matrix3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    use so3_filters::filters::{
        ito_filter_step, ito_filter_step_quat, strat_filter_step, strat_filter_step_quat,
        FilterGains, FilterKind, FilterState, QuatFilterState,
    };
    use so3_filters::harness::{
        render_metrics_csv, render_report, run_monte_carlo, synthesize_stream,
        run_filter_over_stream,
    };
    use so3_filters::quat::UnitQuat;
    use so3_filters::scenario::reproduction_scenario;
    use so3_filters::sim::wong_zakai_correction;
    use so3_filters::so3::{
        exp_so3, hat, normalized_distance, upsilon_a, RodriguezVector, RotationMatrix,
    };
    use so3_filters::wahba::{svd_reconstruct, wahba_cost, VectorPairSet};

    fn rng() -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(0x5E1F)
    }

    fn rvec(rng: &mut ChaCha12Rng, s: f64) -> Vector3<f64> {
        Vector3::new(
            rng.random_range(-s..s),
            rng.random_range(-s..s),
            rng.random_range(-s..s),
        )
    }

    fn rrot(rng: &mut ChaCha12Rng) -> RotationMatrix {
        exp_so3(rvec(rng, 3.0), 1.0)
    }

    fn so3_identities() -> Result<(), String> {
        let mut rng = rng();
        for _ in 0..1000 {
            let a = rvec(&mut rng, 5.0);
            let b = rvec(&mut rng, 5.0);
            let lhs = -hat(b).matrix() * hat(a).matrix();
            let rhs = b.dot(&a) * Matrix3::identity() - a * b.transpose();
            if (lhs - rhs).norm() > 1e-12 * (1.0 + lhs.norm()) {
                return Err("identity -[b]x[a]x = (b.a)I - a b^T failed".into());
            }
            let r = rrot(&mut rng);
            let lhs = *hat(r.matrix() * a).matrix();
            let rhs = r.matrix() * hat(a).matrix() * r.matrix().transpose();
            if (lhs - rhs).norm() > 1e-12 * (1.0 + lhs.norm()) {
                return Err("identity [Ra]x = R[a]x R^T failed".into());
            }
            let rho = rvec(&mut rng, 5.0);
            let rot = RodriguezVector(rho).to_rotation();
            let n2 = rho.norm_squared();
            if (normalized_distance(&rot) - n2 / (1.0 + n2)).abs() > 1e-12 {
                return Err("normalized distance vs Rodriguez closed form failed".into());
            }
            if (upsilon_a(&rot) - 2.0 * rho / (1.0 + n2)).norm() > 1e-12 {
                return Err("Upsilon_a vs Rodriguez closed form failed".into());
            }
        }
        Ok(())
    }

    fn rodriguez_round_trip() -> Result<(), String> {
        let mut rng = rng();
        for _ in 0..500 {
            let rho = rvec(&mut rng, 25.0);
            let back = RodriguezVector::from_rotation(&RodriguezVector(rho).to_rotation())
                .map_err(|e| e.to_string())?;
            if (back.0 - rho).norm() > 1e-10 * (1.0 + rho.norm()) {
                return Err(format!("round trip drifted at rho = {rho:?}"));
            }
        }
        Ok(())
    }

    fn quat_algebra() -> Result<(), String> {
        let mut rng = rng();
        for _ in 0..500 {
            let a = UnitQuat::from_rotation(&rrot(&mut rng));
            let b = UnitQuat::from_rotation(&rrot(&mut rng));
            let lhs = (a * b).to_rotation();
            let rhs = a.to_rotation() * b.to_rotation();
            if (lhs.matrix() - rhs.matrix()).norm() > 1e-10 {
                return Err("quaternion product is not a homomorphism".into());
            }
            let v = rvec(&mut rng, 1.0).normalize();
            let s = a.inverse() * UnitQuat::from_parts_unchecked(0.0, v) * a;
            if s.w.abs() > 1e-10 || (s.v - a.to_rotation().transpose() * v).norm() > 1e-10 {
                return Err("quaternion sandwich does not match R^T v".into());
            }
        }
        Ok(())
    }

    fn wahba_reconstruction() -> Result<(), String> {
        let mut rng = rng();
        for _ in 0..200 {
            let r = rrot(&mut rng);
            let a1 = rvec(&mut rng, 1.0).normalize();
            let a2 = {
                let mut c = rvec(&mut rng, 1.0).normalize();
                while a1.cross(&c).norm() < 0.2 {
                    c = rvec(&mut rng, 1.0).normalize();
                }
                c
            };
            let a3 = a1.cross(&a2).normalize();
            let pairs: Vec<_> = [a1, a2, a3]
                .iter()
                .map(|a| (*a, r.transpose() * *a))
                .collect();
            let set = VectorPairSet::equal_weights(pairs).map_err(|e| e.to_string())?;
            let ry = svd_reconstruct(&set).map_err(|e| e.to_string())?;
            if (ry.matrix() - r.matrix()).norm() > 1e-9 {
                return Err("noise-free reconstruction missed the true attitude".into());
            }
        }
        // noisy minimality + reflection handling
        let r = rrot(&mut rng);
        let pairs: Vec<_> = (0..4)
            .map(|_| {
                let a = rvec(&mut rng, 1.0).normalize();
                let b = (r.transpose() * a + rvec(&mut rng, 0.3)).normalize();
                (a, b)
            })
            .collect();
        let set = VectorPairSet::equal_weights(pairs).map_err(|e| e.to_string())?;
        let ry = svd_reconstruct(&set).map_err(|e| e.to_string())?;
        let j = wahba_cost(&set, &ry);
        for _ in 0..2000 {
            if j > wahba_cost(&set, &rrot(&mut rng)) + 1e-12 {
                return Err("reconstruction is not the Wahba minimizer".into());
            }
        }
        let mirrored = VectorPairSet::equal_weights(vec![
            (Vector3::x(), Vector3::x()),
            (Vector3::y(), Vector3::y()),
            (Vector3::z(), -Vector3::z()),
        ])
        .map_err(|e| e.to_string())?;
        let ry = svd_reconstruct(&mirrored).map_err(|e| e.to_string())?;
        if (ry.matrix().determinant() - 1.0).abs() > 1e-12 {
            return Err("reflection-prone set produced det != +1".into());
        }
        Ok(())
    }

    fn wong_zakai_oracle() -> Result<(), String> {
        let g = |rho: Vector3<f64>| -> Matrix3<f64> {
            -0.5 * (Matrix3::identity() + *hat(rho).matrix() + rho * rho.transpose())
        };
        let mut rng = rng();
        for _ in 0..100 {
            let rho = rvec(&mut rng, 5.0);
            let q2 = rvec(&mut rng, 2.0).abs();
            let closed = wong_zakai_correction(&RodriguezVector(rho), q2);
            // central finite differences over the diffusion matrix
            let h = 1e-5;
            let mut fd = Vector3::zeros();
            for i in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    let (mut up, mut dn) = (rho, rho);
                    up[k] += h;
                    dn[k] -= h;
                    for j in 0..3 {
                        acc += 0.5
                            * q2[j]
                            * g(rho)[(k, j)]
                            * ((g(up)[(i, j)] - g(dn)[(i, j)]) / (2.0 * h));
                    }
                }
                fd[i] = acc;
            }
            if (closed - fd).norm() > 1e-6 * (1.0 + closed.norm()) {
                return Err("Wong-Zakai closed form disagrees with finite differences".into());
            }
            let first = 0.25
                * ((1.0 + rho.x * rho.x) * rho.x * q2.x
                    + (rho.x * rho.y - rho.z) * rho.y * q2.y
                    + (rho.y + rho.x * rho.z) * rho.z * q2.z);
            if (closed.x - first).abs() > 1e-12 * (1.0 + first.abs()) {
                return Err("Wong-Zakai first component expansion failed".into());
            }
        }
        Ok(())
    }

    fn filter_hand_values() -> Result<(), String> {
        let gains = FilterGains::reproduction();
        let state = FilterState::new(RodriguezVector(Vector3::x()).to_rotation());
        let dt = 1e-3;
        let next = ito_filter_step(&state, Vector3::zeros(), &RotationMatrix::identity(), &gains, dt)
            .map_err(|e| e.to_string())?;
        if (next.b_hat - Vector3::new(0.5 * dt, 0.0, 0.0)).norm() > 1e-12 {
            return Err("Ito bias rate differs from the worked value".into());
        }
        if (next.sigma_hat - Vector3::repeat(0.25 * dt)).norm() > 1e-12 {
            return Err("Ito noise-bound rate differs from the worked value".into());
        }
        let expected = state.r_hat * exp_so3(Vector3::new(-3.0, 0.0, 0.0), dt);
        if (next.r_hat.matrix() - expected.matrix()).norm() > 1e-12 {
            return Err("Ito correction W differs from the worked value".into());
        }
        let next =
            strat_filter_step(&state, Vector3::zeros(), &RotationMatrix::identity(), &gains, dt)
                .map_err(|e| e.to_string())?;
        if (next.sigma_hat - Vector3::new(0.75 * dt, 0.25 * dt, 0.25 * dt)).norm() > 1e-12 {
            return Err("Stratonovich noise-bound rate differs from the worked value".into());
        }
        Ok(())
    }

    fn representation_equivalence() -> Result<(), String> {
        let mut scenario = reproduction_scenario();
        scenario.grid.t_end = 3.0;
        let stream = synthesize_stream(&scenario, 42).map_err(|e| e.to_string())?;
        let r0 = scenario
            .initial_estimate
            .to_rotation()
            .map_err(|e| e.to_string())?;
        for strat in [false, true] {
            let mut m = FilterState::new(r0);
            let mut q = QuatFilterState::new(UnitQuat::from_rotation(&r0));
            for k in 0..scenario.grid.n_steps() {
                let q_y = UnitQuat::from_rotation(&stream.r_y[k]);
                if strat {
                    m = strat_filter_step(&m, stream.omega_m[k], &stream.r_y[k], &scenario.gains, scenario.grid.dt)
                        .map_err(|e| e.to_string())?;
                    q = strat_filter_step_quat(&q, stream.omega_m[k], &q_y, &scenario.gains, scenario.grid.dt)
                        .map_err(|e| e.to_string())?;
                } else {
                    m = ito_filter_step(&m, stream.omega_m[k], &stream.r_y[k], &scenario.gains, scenario.grid.dt)
                        .map_err(|e| e.to_string())?;
                    q = ito_filter_step_quat(&q, stream.omega_m[k], &q_y, &scenario.gains, scenario.grid.dt)
                        .map_err(|e| e.to_string())?;
                }
                let diff = (q.q_hat.to_rotation().matrix() - m.r_hat.matrix()).norm();
                if diff > 1e-6 {
                    return Err(format!(
                        "representations diverged to {diff:.3e} at step {k} (strat = {strat})"
                    ));
                }
            }
        }
        Ok(())
    }

    fn determinism() -> Result<(), String> {
        let mut scenario = reproduction_scenario();
        scenario.grid.t_end = 2.0;
        scenario.seeds = vec![0, 1];
        let filters = vec![FilterKind::Ito, FilterKind::Strat];
        let a = run_monte_carlo(&scenario, &filters).map_err(|e| e.to_string())?;
        let b = run_monte_carlo(&scenario, &filters).map_err(|e| e.to_string())?;
        if render_report(&a) != render_report(&b) || render_metrics_csv(&a) != render_metrics_csv(&b)
        {
            return Err("repeated runs are not byte-identical".into());
        }
        let s1 = synthesize_stream(&scenario, 0).map_err(|e| e.to_string())?;
        let t1 = run_filter_over_stream(&scenario, &s1, FilterKind::Ito).map_err(|e| e.to_string())?;
        let t2 = run_filter_over_stream(&scenario, &s1, FilterKind::Ito).map_err(|e| e.to_string())?;
        if so3_filters::harness::render_series_csv(&t1) != so3_filters::harness::render_series_csv(&t2) {
            return Err("series rendering is not deterministic".into());
        }
        Ok(())
    }

    pub fn run() -> anyhow::Result<()> {
        type Check = fn() -> Result<(), String>;
        let checks: Vec<(&str, Check)> = vec![
            ("so3-identities", so3_identities),
            ("rodriguez-round-trip", rodriguez_round_trip),
            ("quat-algebra", quat_algebra),
            ("wahba-reconstruction", wahba_reconstruction),
            ("wong-zakai-oracle", wong_zakai_oracle),
            ("filter-hand-values", filter_hand_values),
            ("representation-equivalence", representation_equivalence),
            ("determinism", determinism),
        ];
        let mut failures = 0;
        for (name, check) in checks {
            match check() {
                Ok(()) => println!("PASS {name}"),
                Err(msg) => {
                    failures += 1;
                    println!("FAIL {name}: {msg}");
                }
            }
        }
        if failures > 0 {
            anyhow::bail!("{failures} selftest check(s) failed");
        }
        println!("all selftest checks passed");
        Ok(())
    }
}
