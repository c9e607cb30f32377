use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use asyvr::bench::thread_sweep;
use asyvr::check::finite_difference_check;
use asyvr::io::{render_trace, write_trace, write_vector, FStar, RunSpec};
use asyvr::lipschitz::{estimate_closed_form, validate_by_sampling};
use asyvr::solver::{run, solve_high_accuracy, GammaSource};
use asyvr::theory::{gamma_bound, linear_rate, sublinear_bound, theta1, theta2, theta_prime, GammaBound, TheoryParams};

#[derive(Parser)]
#[command(name = "asyvr", version, about = "Asynchronous variance-reduced proximal block coordinate descent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver and write the trace and solution.
    Solve(SpecArgs),
    /// Sweep thread counts and report per-epoch wall time.
    Bench(SpecArgs),
    /// Evaluate step-size bounds and rate predictions.
    Theory(TheoryArgs),
    /// Check Lipschitz estimates and gradients by sampling.
    Validate(ValidateArgs),
}

/// Run specification flags. Each overrides the same key of `--config`.
#[derive(Args, Debug, Default)]
struct SpecArgs {
    /// key=value file applied before the flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// LIBSVM file, or `synthetic[:lasso|strongly_convex|logistic]`
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    l: Option<String>,
    #[arg(long)]
    density: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    sparsity: Option<String>,
    #[arg(long)]
    data_seed: Option<String>,
    #[arg(long)]
    ridge: Option<String>,
    /// squared | logistic
    #[arg(long)]
    loss: Option<String>,
    /// none | l1 | group | elastic
    #[arg(long)]
    reg: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    lambda2: Option<String>,
    #[arg(long)]
    blocks: Option<String>,
    /// one group of 0-based coordinates per line
    #[arg(long)]
    partition: Option<String>,
    /// worker count (`bench`: comma-separated list)
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    /// inner iterations per epoch, split across workers
    #[arg(long)]
    inner: Option<String>,
    /// run `--inner` iterations on every worker
    #[arg(long)]
    per_thread_m: bool,
    #[arg(long)]
    batch: Option<String>,
    /// step parameter or `auto`
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// maximum injected extra staleness
    #[arg(long)]
    delay: Option<String>,
    #[arg(long)]
    trace_every: Option<String>,
    /// trace CSV path (stdout when omitted)
    #[arg(long)]
    trace: Option<String>,
    /// solution vector path
    #[arg(long)]
    out: Option<String>,
    /// csv | csv-stable
    #[arg(long)]
    format: Option<String>,
    /// optimal value for the gap column, `auto` or `none`
    #[arg(long)]
    fstar: Option<String>,
}

impl SpecArgs {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let fields: [(&'static str, &Option<String>); 29] = [
            ("data", &self.data),
            ("dim", &self.dim),
            ("synthetic", &self.synthetic),
            ("n", &self.n),
            ("l", &self.l),
            ("density", &self.density),
            ("noise", &self.noise),
            ("sparsity", &self.sparsity),
            ("data-seed", &self.data_seed),
            ("ridge", &self.ridge),
            ("loss", &self.loss),
            ("reg", &self.reg),
            ("lambda", &self.lambda),
            ("lambda2", &self.lambda2),
            ("blocks", &self.blocks),
            ("partition", &self.partition),
            ("threads", &self.threads),
            ("epochs", &self.epochs),
            ("inner", &self.inner),
            ("batch", &self.batch),
            ("gamma", &self.gamma),
            ("rho", &self.rho),
            ("seed", &self.seed),
            ("delay", &self.delay),
            ("trace-every", &self.trace_every),
            ("trace", &self.trace),
            ("out", &self.out),
            ("format", &self.format),
            ("fstar", &self.fstar),
        ];
        let mut out: Vec<(&'static str, &str)> = fields
            .into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect();
        if self.per_thread_m {
            out.push(("per-thread-m", "true"));
        }
        out
    }

    /// Config file first, then flags. `skip` keys are left to the caller.
    fn resolve(&self, skip: &[&str]) -> Result<RunSpec> {
        let mut spec = RunSpec::default();
        if let Some(path) = &self.config {
            spec.apply_config_file(path)?;
        }
        for (k, v) in self.pairs() {
            if skip.contains(&k) {
                continue;
            }
            spec.set(k, v).with_context(|| format!("--{k}"))?;
        }
        Ok(spec)
    }
}

#[derive(Args, Debug)]
struct TheoryArgs {
    /// block count k
    #[arg(long)]
    blocks: usize,
    #[arg(long, default_value_t = 2.0)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    tau: usize,
    /// inner iterations per epoch m
    #[arg(long)]
    inner: usize,
    /// Λ_res
    #[arg(long, default_value_t = 1.0)]
    lres: f64,
    /// Λ_nor
    #[arg(long, default_value_t = 1.0)]
    lnor: f64,
    #[arg(long, default_value_t = 1.0)]
    lmax: f64,
    /// optimal strong convexity parameter (0 = general convex)
    #[arg(long, default_value_t = 0.0)]
    losc: f64,
    /// step for the rate predictions (default: the bound)
    #[arg(long)]
    gamma: Option<f64>,
    /// epoch at which to evaluate the sublinear bound
    #[arg(long, default_value_t = 10)]
    epoch: usize,
    /// ‖x⁰ − P_S(x⁰)‖²
    #[arg(long, default_value_t = 1.0)]
    x0_dist_sq: f64,
    /// F(x⁰) − F*
    #[arg(long, default_value_t = 1.0)]
    f0_gap: f64,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 200)]
    trials: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(&a),
        Command::Bench(a) => bench(&a),
        Command::Theory(a) => theory(&a),
        Command::Validate(a) => validate(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn solve(args: &SpecArgs) -> Result<ExitCode> {
    let spec = args.resolve(&[])?;
    let built = spec.build_problem()?;
    let problem = &built.problem;
    let config = spec.solver_config(problem);
    let result = run(problem, &config)?;
    if result.gamma.source == GammaSource::Fallback {
        eprintln!(
            "warning: step-size bound infeasible; using fallback gamma = {} without convergence guarantees",
            result.gamma.gamma
        );
    }
    let f_star = match spec.fstar {
        FStar::Unknown => None,
        FStar::Value(v) => Some(v),
        FStar::Auto => {
            let h = solve_high_accuracy(problem)?;
            if !h.converged {
                eprintln!("warning: high-accuracy solve hit its iteration cap; F* is best-so-far");
            }
            Some(h.f_star)
        }
    };

    let mut meta = spec.entries(problem);
    meta.push(("gamma-resolved".into(), format!("{:?}", result.gamma.gamma)));
    meta.push(("gamma-source".into(), format!("{:?}", result.gamma.source).to_lowercase()));
    meta.push(("l-max".into(), format!("{:?}", result.lipschitz.l_max)));
    meta.push(("l-res".into(), format!("{:?}", result.lipschitz.l_res)));
    meta.push(("l-nor".into(), format!("{:?}", result.lipschitz.l_nor)));
    if let Some(f) = f_star {
        meta.push(("fstar".into(), format!("{f:?}")));
    }

    match &spec.trace {
        Some(path) => write_trace(&result.trace, path, f_star, spec.format, &meta)
            .with_context(|| format!("writing trace {}", path.display()))?,
        None => {
            let text = render_trace(&result.trace, f_star, spec.format, &meta);
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    if let Some(path) = &spec.out {
        write_vector(&result.solution, path).with_context(|| format!("writing solution {}", path.display()))?;
    }
    eprintln!(
        "final objective {:.10e} after {} epochs; gamma {:e} ({:?}); max staleness {}",
        result.trace.last_objective().unwrap_or(f64::NAN),
        config.epochs,
        result.gamma.gamma,
        result.gamma.source,
        result.staleness.max_observed
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_thread_list(s: &str) -> Result<Vec<usize>> {
    let list = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("invalid thread count `{t}`")))
        .collect::<Result<Vec<_>>>()?;
    if list.is_empty() || list.contains(&0) {
        bail!("thread counts must be >= 1");
    }
    Ok(list)
}

fn bench(args: &SpecArgs) -> Result<ExitCode> {
    let spec = args.resolve(&["threads"])?;
    let threads = parse_thread_list(args.threads.as_deref().unwrap_or("1,2,4"))?;
    let built = spec.build_problem()?;
    let config = spec.solver_config(&built.problem);
    let rows = thread_sweep(&built.problem, &config, &threads)?;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    println!("# available cores: {cores}");
    println!("threads,epoch_ms,speedup,final_objective,max_staleness");
    for r in &rows {
        println!(
            "{},{:.3},{:.3},{:.10e},{}",
            r.threads, r.epoch_ms, r.speedup, r.final_objective, r.max_staleness
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn theory(a: &TheoryArgs) -> Result<ExitCode> {
    let params = TheoryParams {
        rho: a.rho,
        tau: a.tau,
        m: a.inner,
        k: a.blocks,
        lambda_res: a.lres,
        lambda_nor: a.lnor,
        l_osc: a.losc,
        l_max: a.lmax,
    };
    params.validate()?;
    println!("theta1 = {}", theta1(a.rho, a.tau)?);
    println!("theta2 = {}", theta2(a.rho, a.inner)?);
    println!("theta_prime = {}", theta_prime(a.rho, a.tau)?);
    let bound = gamma_bound(&params)?;
    let gamma = match bound {
        GammaBound::Feasible(d) => {
            println!("term1 = {}", d.term1);
            println!("term2 = {}", d.term2);
            println!("gamma_max = {}", d.gamma_max);
            println!("rate_condition_slack = {}", d.rate_condition_slack);
            a.gamma.unwrap_or(d.gamma_max)
        }
        GammaBound::Infeasible => {
            println!("gamma_max = infeasible");
            match a.gamma {
                Some(g) => g,
                None => return Ok(ExitCode::SUCCESS),
            }
        }
    };
    if a.losc > 0.0 {
        println!("linear_factor = {}", linear_rate(&params, gamma)?);
    }
    println!(
        "sublinear_bound(s={}) = {}",
        a.epoch,
        sublinear_bound(&params, gamma, a.epoch, a.x0_dist_sq, a.f0_gap)
    );
    Ok(ExitCode::SUCCESS)
}

fn validate(a: &ValidateArgs) -> Result<ExitCode> {
    let spec = a.spec.resolve(&[])?;
    let built = spec.build_problem()?;
    let problem = &built.problem;
    let est = estimate_closed_form(problem)?;
    let report = validate_by_sampling(problem, &est, a.trials, spec.seed);
    println!("{report}");
    let grad = finite_difference_check(problem, a.trials, spec.seed)?;
    println!(
        "gradient check: {} trials, max relative error {:.3e} ({})",
        grad.trials,
        grad.max_rel_error,
        if grad.passed() { "pass" } else { "FAIL" }
    );
    if report.passed && grad.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::FAILURE)
    }
}
