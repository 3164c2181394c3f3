#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use localtime_lab::closedform::{
    exp_law_mean, k_limit, k_star, l_limit, l_star, mean_local_time, survival_expectation, LimitParams,
};
use localtime_lab::evolution::{
    block_semigroup, decay_rate, default_decay_times, discretize, evolve, evolve_at, longtime_blocks, GeneratorKind,
    Scheme,
};
use localtime_lab::experiment::{
    self, exit_code, fmt_float, BlocksArtifact, ExperimentConfig, FunctionSpec, EXIT_OK, EXIT_VALIDATION,
};
use localtime_lab::montecarlo::{
    compare_mechanisms, estimate_survival, exit_local_time_law, ks_band, LocalTimeEstimator, SimConfig,
};
use localtime_lab::picard::{solve_pair, DEFAULT_TOL};
use localtime_lab::resolvent::{resolvent_eps, resolvent_limit};
use localtime_lab::{Grid, KernelSpec, KillingKernel, LabError, Result, ScaledKernel};

const DEFAULT_H: f64 = 1e-3;
const DEFAULT_DT: f64 = 1e-3;
const DEFAULT_MC_DT: f64 = 1e-4;

#[derive(Parser)]
#[command(
    name = "labcli",
    version,
    about = "Brownian motion killed at rate c_ε and at the local time of 0"
)]
struct Cli {
    /// Write outputs into this directory instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; LAB_DETERMINISTIC=1 forces one.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Grid step.
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Time step.
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Copy)]
struct Interval {
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    a: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    b: f64,
    /// Killing mass γ.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    gamma: f64,
}

impl Interval {
    fn params(&self) -> Result<LimitParams> {
        LimitParams::new(self.a, self.b, self.gamma)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Box,
    Triangle,
    Gaussian,
}

impl KernelArg {
    /// The unit profile rescaled to mass `gamma`.
    fn kernel(self, gamma: f64) -> Result<KillingKernel> {
        let spec = match self {
            KernelArg::Box => KernelSpec::unit_box(),
            KernelArg::Triangle => KernelSpec::unit_triangle(),
            KernelArg::Gaussian => KernelSpec::unit_gaussian(),
        };
        KillingKernel::new(spec.with_mass(gamma)?)
    }

    fn scaled(self, gamma: f64, eps: f64) -> Result<ScaledKernel> {
        ScaledKernel::new(Arc::new(self.kernel(gamma)?), eps)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    K,
    L,
    Kstar,
    Lstar,
    Survival,
    Mean,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    AEps,
    ALimit,
    BDirichlet,
    G1,
    G2,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Cn,
    Dense,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Cn => Scheme::CrankNicolson,
            SchemeArg::Dense => Scheme::DenseExponential,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum McExperiment {
    Survival,
    Law,
    Mechanisms,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Bridge,
    Occupation,
}

#[derive(Subcommand)]
enum Cmd {
    /// Picard eigenpair `k`, `ℓ` of `A_ε`; CSV x,k,l.
    Fixedpoint {
        #[command(flatten)]
        iv: Interval,
        #[arg(long, value_enum, default_value = "box")]
        kernel: KernelArg,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Closed forms of the limit problem on the grid; CSV x,value.
    Closedform {
        #[command(flatten)]
        iv: Interval,
        #[arg(long, value_enum)]
        what: What,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// `R(λ) g` for `A_ε` or the limit generator; CSV x,f,residual.
    Resolvent {
        #[command(flatten)]
        iv: Interval,
        #[arg(long, value_enum, default_value = "box")]
        kernel: KernelArg,
        /// A value of ε, or `limit`.
        #[arg(long, default_value = "limit")]
        eps: String,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// one, cos, sin, x, bump, mode or const:<value>.
        #[arg(long, default_value = "cos")]
        g: String,
    },
    /// Time evolution under a discretized generator; CSV t,x,value.
    Evolve {
        #[command(flatten)]
        iv: Interval,
        #[arg(long, value_enum, default_value = "a-limit")]
        kind: KindArg,
        #[arg(long, value_enum, default_value = "box")]
        kernel: KernelArg,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum, default_value = "cn")]
        scheme: SchemeArg,
        #[arg(long, default_value = "cos")]
        f0: String,
        /// Number of equally spaced output times after 0.
        #[arg(long, default_value_t = 10)]
        snapshots: usize,
    },
    /// Exponential rate of `e^{tA} f0 → P f0`; JSON.
    Decay {
        #[command(flatten)]
        iv: Interval,
        #[arg(long, default_value = "mode")]
        f0: String,
        #[arg(long, value_enum, default_value = "cn")]
        scheme: SchemeArg,
    },
    /// Odd/even block evolution on `[-b, b]`; JSON.
    Blocks {
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value = "cos")]
        f0: String,
        #[arg(long, value_enum, default_value = "cn")]
        scheme: SchemeArg,
    },
    /// Monte Carlo experiments; JSON.
    Mc {
        #[command(flatten)]
        iv: Interval,
        #[arg(long, value_enum)]
        experiment: McExperiment,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        /// Starting points (survival) or the starting point (mechanisms).
        #[arg(long, value_delimiter = ',', default_value = "0", allow_negative_numbers = true)]
        x0: Vec<f64>,
        /// Horizon of the mechanism comparison.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// ε panel of the mechanism comparison.
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
        eps: Vec<f64>,
        #[arg(long, value_enum, default_value = "box")]
        kernel: KernelArg,
        #[arg(long, value_enum, default_value = "bridge")]
        estimator: EstimatorArg,
        /// Raw local-time samples of the law experiment as CSV.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Run an experiment config and write artifacts plus a manifest.
    Run { config: PathBuf },
    /// Render the tables of a manifest.
    Report { manifest: PathBuf },
}

struct Globals {
    out: Option<PathBuf>,
    seed: Option<u64>,
    h: f64,
    dt: Option<f64>,
}

impl Globals {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn dt(&self, default: f64) -> f64 {
        self.dt.unwrap_or(default)
    }

    fn sink(&self, name: &str) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Box::new(std::fs::File::create(dir.join(name))?)
            }
            None => Box::new(std::io::stdout().lock()),
        })
    }

    fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
        write_csv(self.sink(name)?, header, rows)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut w = self.sink(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        Ok(())
    }
}

fn write_csv(sink: impl Write, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(e) => LabError::Io(e),
            _ => unreachable!(),
        },
        _ => LabError::Io(std::io::Error::other(e)),
    };
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r.into_iter().map(fmt_float)).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f(s: &str) -> Result<FunctionSpec> {
    s.parse()
}

fn dispatch(cmd: Cmd, g: &Globals) -> Result<i32> {
    match cmd {
        Cmd::Fixedpoint {
            iv,
            kernel,
            eps,
            lambda,
        } => {
            let grid = Grid::new(iv.a, iv.b, g.h)?;
            let pair = solve_pair(&grid, &kernel.scaled(iv.gamma, eps)?, lambda, DEFAULT_TOL)?;
            let rows = grid
                .nodes()
                .enumerate()
                .map(|(i, x)| vec![x, pair.k.at(i), pair.l.at(i)]);
            g.csv("fixedpoint.csv", &["x", "k", "l"], rows)?;
            let d = &pair.diagnostics;
            eprintln!(
                "omega={} bound={:.6} max_step_ratio={:.6} W={} wronskian_spread={:.3e}",
                d.omega, d.contraction_bound, d.max_step_ratio, pair.wronskian, d.wronskian_spread
            );
        }
        Cmd::Closedform { iv, what, lambda } => {
            let p = iv.params()?.with_lambda(lambda)?;
            let grid = Grid::new(iv.a, iv.b, g.h)?;
            let f = |x: f64| match what {
                What::K => k_limit(x, &p),
                What::L => l_limit(x, &p),
                What::Kstar => k_star(x, &p),
                What::Lstar => l_star(x, &p),
                What::Survival => survival_expectation(x, &p),
                What::Mean => mean_local_time(x, p.a, p.b),
            };
            if matches!(what, What::Mean) {
                eprintln!("E_0 L_0(tau) = {}", exp_law_mean(p.a, p.b));
            }
            g.csv("closedform.csv", &["x", "value"], grid.nodes().map(|x| vec![x, f(x)]))?;
        }
        Cmd::Resolvent {
            iv,
            kernel,
            eps,
            lambda,
            g: data,
        } => {
            let grid = Grid::new(iv.a, iv.b, g.h)?;
            let data = parse_f(&data)?.sample(&grid);
            let r = if eps == "limit" {
                resolvent_limit(&data, &iv.params()?.with_lambda(lambda)?)?
            } else {
                let e: f64 = eps
                    .parse()
                    .map_err(|_| LabError::Config(format!("--eps: expected a number or `limit`, got `{eps}`")))?;
                resolvent_eps(&data, lambda, &kernel.scaled(iv.gamma, e)?)?
            };
            let rows = grid
                .nodes()
                .enumerate()
                .map(|(i, x)| vec![x, r.f.at(i), r.residuals[i]]);
            g.csv("resolvent.csv", &["x", "f", "residual"], rows)?;
            eprintln!("residual_sup={:.3e} C={:.3}", r.residual_sup, r.residual_constant);
        }
        Cmd::Evolve {
            iv,
            kind,
            kernel,
            eps,
            t,
            scheme,
            f0,
            snapshots,
        } => {
            let grid = match kind {
                KindArg::G1 | KindArg::G2 => Grid::half(iv.b, g.h)?,
                _ => Grid::new(iv.a, iv.b, g.h)?,
            };
            let kind = match kind {
                KindArg::AEps => GeneratorKind::AEps(kernel.scaled(iv.gamma, eps)?),
                KindArg::ALimit => GeneratorKind::ALimit { gamma: iv.gamma },
                KindArg::BDirichlet => GeneratorKind::BDirichlet,
                KindArg::G1 => GeneratorKind::G1,
                KindArg::G2 => GeneratorKind::G2 { gamma: iv.gamma },
            };
            if !(t > 0.0) || snapshots == 0 {
                return Err(LabError::Config(
                    "--t must be positive and --snapshots at least 1".into(),
                ));
            }
            let m = discretize(kind, &grid)?;
            let f0 = parse_f(&f0)?.sample(&grid);
            let times: Vec<f64> = (1..=snapshots).map(|i| t * i as f64 / snapshots as f64).collect();
            let run = evolve_at(&m, &f0, &times, g.dt(DEFAULT_DT), scheme.into())?;
            let rows = run
                .times
                .iter()
                .zip(&run.snapshots)
                .flat_map(|(&s, f)| grid.nodes().zip(f.values()).map(move |(x, &v)| vec![s, x, v]));
            g.csv("evolve.csv", &["t", "x", "value"], rows)?;
        }
        Cmd::Decay { iv, f0, scheme } => {
            let grid = Grid::new(iv.a, iv.b, g.h)?;
            let p = iv.params()?;
            let m = discretize(GeneratorKind::ALimit { gamma: iv.gamma }, &grid)?;
            let f0 = parse_f(&f0)?.sample(&grid);
            let fit = decay_rate(&m, &f0, &p, &default_decay_times(), g.dt(DEFAULT_DT), scheme.into())?;
            g.json("decay.json", &fit)?;
        }
        Cmd::Blocks {
            b,
            gamma,
            t,
            f0,
            scheme,
        } => {
            let grid = Grid::new(-b, b, g.h)?;
            let dt = g.dt(DEFAULT_DT);
            let f0 = parse_f(&f0)?.sample(&grid);
            let m = discretize(GeneratorKind::ALimit { gamma }, &grid)?;
            let direct = evolve(&m, &f0, t, dt, scheme.into())?.last().clone();
            let blocks = block_semigroup(&f0, t, gamma, dt, scheme.into())?;
            let long = longtime_blocks(b, gamma, g.h, t)?;
            let scale = f0.sup_norm().max(1.0) * t.max(1.0);
            g.json(
                "blocks.json",
                &BlocksArtifact {
                    t,
                    block_vs_direct: blocks.sup_distance(&direct),
                    tolerance: 5.0 * (g.h * g.h + dt * dt) * scale,
                    reconstruction_error: long.reconstruction_error,
                    g1_gap: long.g1_gap,
                    g2_gap: long.g2_gap,
                },
            )?;
        }
        Cmd::Mc {
            iv,
            experiment,
            paths,
            x0,
            t,
            eps,
            kernel,
            estimator,
            samples,
        } => {
            let dt = g.dt(DEFAULT_MC_DT);
            let estimator = match estimator {
                EstimatorArg::Bridge => LocalTimeEstimator::Bridge,
                EstimatorArg::Occupation => LocalTimeEstimator::occupation(dt),
            };
            let p = iv.params()?;
            let base = |x: f64| SimConfig {
                estimator,
                ..SimConfig::new(x, iv.a, iv.b, dt, iv.gamma, paths, g.seed())
            };
            match experiment {
                McExperiment::Survival => {
                    let est = x0
                        .iter()
                        .map(|&x| estimate_survival(x, &p, &base(x)))
                        .collect::<Result<Vec<_>>>()?;
                    g.json("mc_survival.json", &est)?;
                }
                McExperiment::Law => {
                    let r = exit_local_time_law(iv.a, iv.b, paths, g.seed(), dt, estimator)?;
                    if let Some(path) = samples {
                        write_csv(
                            std::fs::File::create(path)?,
                            &["local_time"],
                            r.samples.iter().map(|&s| vec![s]),
                        )?;
                    }
                    #[derive(Serialize)]
                    struct Law<'a> {
                        #[serde(flatten)]
                        report: &'a localtime_lab::montecarlo::ExitLawReport,
                        ks_band: f64,
                        ci_contains_expected: bool,
                    }
                    g.json(
                        "mc_law.json",
                        &Law {
                            report: &r,
                            ks_band: ks_band(r.n_paths),
                            ci_contains_expected: r.ci_contains_expected(),
                        },
                    )?;
                }
                McExperiment::Mechanisms => {
                    let x = x0[0];
                    let k = kernel.kernel(iv.gamma)?;
                    let table = compare_mechanisms(x, t, &p, &k, &eps, &base(x), g.h)?;
                    g.json("mc_mechanisms.json", &table)?;
                }
            }
        }
        Cmd::Run { config } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = g.seed {
                cfg.seed = seed;
            }
            let out = g
                .out
                .clone()
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| PathBuf::from(cfg.experiment.name()));
            let outcome = experiment::run(&cfg, &out)?;
            for c in outcome.manifest.checks.iter().filter(|c| !c.passed) {
                eprintln!(
                    "labcli: check failed: {} = {:e} (needs {} {:e})",
                    c.name, c.value, c.relation, c.threshold
                );
            }
            println!("{}", outcome.manifest_path.display());
            return Ok(outcome.exit_code);
        }
        Cmd::Report { manifest } => {
            print!("{}", experiment::report(&manifest)?);
        }
    }
    Ok(EXIT_OK)
}

fn threads(requested: Option<usize>) -> Option<usize> {
    match std::env::var("LAB_DETERMINISTIC") {
        Ok(v) if v == "1" => Some(1),
        _ => requested,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = threads(cli.threads) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("labcli: cannot start {n} workers: {e}");
            return ExitCode::from(1);
        }
    }
    let globals = Globals {
        out: cli.out,
        seed: cli.seed,
        h: cli.h.unwrap_or(DEFAULT_H),
        dt: cli.dt,
    };
    if !(globals.h > 0.0) || globals.dt.is_some_and(|dt| !(dt > 0.0)) {
        eprintln!("labcli: --h and --dt must be positive");
        return ExitCode::from(EXIT_VALIDATION as u8);
    }
    let code = match dispatch(cli.cmd, &globals) {
        Ok(code) => code,
        // reader went away (`labcli ... | head`)
        Err(LabError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            eprintln!("labcli: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
