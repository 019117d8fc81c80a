use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use poolfund::approx::{approx_u, ApproxInputs};
use poolfund::artifacts::{csv_string, write_csv, ArtifactKind, Manifest};
use poolfund::experiments::{
    fund_path, run_figure1, run_sweep, run_table1, Figure1Config, HorizonMethod, SweepConfig,
    Table1Config,
};
use poolfund::pool_metrics::{
    best_prefix, cap_advise, implied_number, is_beneficial, optimal_extension_amount,
    SavingsHashMap, DEFAULT_CAP_SLACK,
};
use poolfund::stability::{estimate_max_stable_u, quantile_with_error, tau_samples};
use poolfund::{Error, GompertzMakeham, LifeTable, SavingsVector, StabilityEstimate, StabilityParams};

const SYNTHETIC_TABLE: &str = "synthetic-gompertz-makeham";
const SYNTHETIC_LIMITING_AGE: u32 = 121;

#[derive(Parser)]
#[command(name = "poolfund", version, about = "Pooled annuity fund stability and pool composition tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo stable horizon of a pool.
    Stability(StabilityArgs),
    /// Closed-form stable horizon from the implied number.
    Approx(ApproxArgs),
    /// Monte Carlo and closed-form horizons side by side, one row per pool.
    Compare(CompareArgs),
    /// Implied number of homogeneous members.
    Nu(SavingsArg),
    /// Whether no subgroup of the pool has a larger implied number.
    Beneficial(BeneficialArgs),
    /// Savings cap recommendation from the prefix scan.
    CapAdvise(CapArgs),
    /// Per-member wealth, income and credits along one seeded scenario.
    FundPath(FundPathArgs),
    /// Poor, rich and mixed pool horizons over savings ratios.
    Table1(Table1Args),
    /// Poor, rich and mixed horizon curves over the number of poor members.
    Sweep(SweepArgs),
    /// One income-ratio path with its band and the stable-horizon marker.
    Figure1(Figure1Args),
}

#[derive(Args, Clone)]
struct SavingsArg {
    /// CSV file with one amount per row, or inline `count@amount,...`.
    #[arg(long)]
    savings: String,
}

#[derive(Args, Clone)]
struct TableArgs {
    /// CSV life table with `age` and `qx` or `lx` columns. Without one a
    /// synthetic Gompertz-Makeham table is used where a table is required.
    #[arg(long, env = "POOLFUND_LIFE_TABLE")]
    life_table: Option<PathBuf>,
    #[arg(long, default_value_t = 70)]
    base_age: u32,
    /// Fixed yearly interest rate.
    #[arg(long, default_value_t = 0.0)]
    rate: f64,
}

impl TableArgs {
    fn explicit(&self) -> poolfund::Result<Option<(LifeTable, String)>> {
        self.life_table
            .as_ref()
            .map(|path| {
                let table = LifeTable::load(path, self.base_age, self.rate)?;
                Ok((table, path.display().to_string()))
            })
            .transpose()
    }

    fn required(&self) -> poolfund::Result<(LifeTable, String)> {
        if let Some(found) = self.explicit()? {
            return Ok(found);
        }
        eprintln!("note: no life table given, using the synthetic Gompertz-Makeham table");
        let table = LifeTable::gompertz_makeham(
            GompertzMakeham::SYNTHETIC_UK_LIKE,
            self.base_age,
            SYNTHETIC_LIMITING_AGE,
            self.rate,
        )?;
        Ok((table, SYNTHETIC_TABLE.to_string()))
    }
}

#[derive(Args, Clone)]
struct ToleranceArgs {
    #[arg(long, default_value_t = 0.1)]
    eps1: f64,
    /// Upper income tolerance. Omit for no upper bound.
    #[arg(long, conflicts_with = "eps2_inf")]
    eps2: Option<f64>,
    /// No upper bound (the default).
    #[arg(long)]
    eps2_inf: bool,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
}

impl ToleranceArgs {
    fn params(&self) -> poolfund::Result<StabilityParams> {
        StabilityParams::new(self.eps1, self.eps2.unwrap_or(f64::INFINITY), self.beta)
    }
}

#[derive(Args, Clone)]
struct MonteCarloArgs {
    /// Replications; defaults to 100000, or 1000000 with --paper-fidelity.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    paper_fidelity: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl MonteCarloArgs {
    fn replications(&self) -> usize {
        self.reps
            .unwrap_or(if self.paper_fidelity { 1_000_000 } else { 100_000 })
    }
}

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    savings: SavingsArg,
    #[command(flatten)]
    tolerance: ToleranceArgs,
    #[command(flatten)]
    mc: MonteCarloArgs,
    #[command(flatten)]
    table: TableArgs,
    /// Also write every exit time to this CSV.
    #[arg(long)]
    tau_csv: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Pool to evaluate; repeat for several pools.
    #[arg(long, required = true)]
    savings: Vec<String>,
    #[arg(long, default_value_t = 0.1)]
    eps1: f64,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[command(flatten)]
    mc: MonteCarloArgs,
    #[command(flatten)]
    table: TableArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ApproxArgs {
    #[arg(long, required_unless_present = "nu", conflicts_with = "nu")]
    savings: Option<String>,
    /// Implied number, instead of a roster.
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    eps1: f64,
    /// Only the unbounded case has a closed form; a finite value is rejected.
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[command(flatten)]
    table: TableArgs,
}

#[derive(Args)]
struct BeneficialArgs {
    #[command(flatten)]
    savings: SavingsArg,
    /// Write the prefix table (z, cumulative_count, cumulative_nu) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CapArgs {
    #[command(flatten)]
    savings: SavingsArg,
    /// Relative shortfall from the best implied number still inside the window.
    #[arg(long, default_value_t = DEFAULT_CAP_SLACK)]
    slack: f64,
    #[arg(long, default_value_t = 0.1)]
    eps1: f64,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[command(flatten)]
    table: TableArgs,
    /// Write the prefix table here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FundPathArgs {
    #[command(flatten)]
    savings: SavingsArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    table: TableArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Table1Args {
    #[arg(long, default_value_t = 800)]
    poor: usize,
    #[arg(long, default_value_t = 200)]
    rich: usize,
    /// Poor-to-rich savings ratios.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.7, 0.5, 0.3, 0.2, 0.1])]
    ratios: Vec<f64>,
    #[command(flatten)]
    tolerance: ToleranceArgs,
    #[command(flatten)]
    mc: MonteCarloArgs,
    #[command(flatten)]
    table: TableArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Mc,
    Approx,
}

#[derive(Args)]
struct SweepArgs {
    /// Members across both groups.
    #[arg(long, default_value_t = 1000)]
    total: usize,
    /// Poor member counts to evaluate.
    #[arg(long, value_delimiter = ',', default_values_t = (1..=19).map(|k| 50 * k).collect::<Vec<usize>>())]
    poor_counts: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.7, 0.5, 0.3, 0.2, 0.1])]
    ratios: Vec<f64>,
    #[arg(long, value_enum, default_value_t = MethodArg::Mc)]
    method: MethodArg,
    #[command(flatten)]
    tolerance: ToleranceArgs,
    #[command(flatten)]
    mc: MonteCarloArgs,
    #[command(flatten)]
    table: TableArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Figure1Args {
    #[arg(long, default_value = "900@1,100@10")]
    savings: String,
    #[arg(long, default_value_t = 0.1)]
    eps1: f64,
    #[arg(long, default_value_t = 0.1)]
    eps2: f64,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[command(flatten)]
    mc: MonteCarloArgs,
    #[arg(long, default_value_t = 12)]
    steps_per_year: u32,
    #[command(flatten)]
    table: TableArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn print_json(value: &impl Serialize) -> poolfund::Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidParams(format!("json: {e}")))?;
    println!("{text}");
    Ok(())
}

/// Writes rows to `out` with a manifest next to it, or prints them as CSV.
fn emit_rows<T: Serialize>(rows: &[T], out: Option<&Path>, manifest: Manifest) -> poolfund::Result<()> {
    match out {
        Some(path) => {
            write_csv(path, rows)?;
            let manifest = Manifest {
                csv: path.to_path_buf(),
                ..manifest
            };
            manifest.write(manifest.default_path())?;
            eprintln!("wrote {} and {}", path.display(), manifest.default_path().display());
            Ok(())
        }
        None => {
            print!("{}", csv_string(rows)?);
            Ok(())
        }
    }
}

fn run(cli: Cli) -> poolfund::Result<()> {
    match cli.command {
        Command::Stability(args) => stability(args),
        Command::Compare(args) => compare(args),
        Command::Approx(args) => {
            if let Some(eps2) = args.eps2.filter(|e| e.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "no closed form with an upper bound (eps2 = {eps2}); use `stability`"
                )));
            }
            let nu = match (&args.savings, args.nu) {
                (Some(spec), _) => implied_number(&SavingsVector::from_spec_or_path(spec)?),
                (None, Some(nu)) => nu,
                (None, None) => unreachable!("clap requires one of them"),
            };
            let approx = approx_u(&ApproxInputs::new(nu, args.eps1, args.beta)?);
            let years = args.table.explicit()?.map(|(t, _)| t.f_inverse(approx.u));
            print_json(&json!({
                "implied_number": nu,
                "u": approx.u,
                "boundary": approx.boundary,
                "years": years,
            }))
        }
        Command::Nu(args) => {
            let savings = SavingsVector::from_spec_or_path(&args.savings)?;
            print_json(&json!({
                "members": savings.len(),
                "implied_number": implied_number(&savings),
                "optimal_extension_amount": optimal_extension_amount(&savings),
            }))
        }
        Command::Beneficial(args) => {
            let savings = SavingsVector::from_spec_or_path(&args.savings.savings)?;
            let map = SavingsHashMap::from_savings(&savings);
            let best = best_prefix(&map);
            if let Some(out) = &args.out {
                let manifest = Manifest::new(
                    ArtifactKind::HistogramPrefix,
                    out,
                    json!({ "savings": args.savings.savings }),
                );
                emit_rows(&best.prefixes, Some(out), manifest)?;
            }
            print_json(&json!({
                "beneficial": is_beneficial(&map),
                "distinct_amounts": map.len(),
                "best_prefix_index": best.index,
                "best_prefix_amount": best.prefixes[best.index].z,
                "nu_max": best.nu_max,
                "nu_whole_pool": implied_number(&savings),
            }))
        }
        Command::CapAdvise(args) => {
            let savings = SavingsVector::from_spec_or_path(&args.savings.savings)?;
            let table = args.table.explicit()?;
            let params = StabilityParams::lower_only(args.eps1, args.beta)?;
            let advice = cap_advise(&savings, table.as_ref().map(|(t, _)| t), &params, args.slack)?;
            if let Some(out) = &args.out {
                let mut manifest = Manifest::new(
                    ArtifactKind::HistogramPrefix,
                    out,
                    json!({ "savings": args.savings.savings, "slack": args.slack, "params": params }),
                );
                manifest.life_table = table.as_ref().map(|(_, name)| name.clone());
                emit_rows(&advice.prefixes, Some(out), manifest)?;
            }
            print_json(&advice)
        }
        Command::FundPath(args) => {
            let savings = SavingsVector::from_spec_or_path(&args.savings.savings)?;
            let (table, name) = args.table.required()?;
            let rows = fund_path(&savings, &table, args.seed)?;
            let mut manifest = Manifest::new(
                ArtifactKind::FundPath,
                "",
                json!({ "savings": args.savings.savings, "rate": args.table.rate, "base_age": args.table.base_age }),
            );
            manifest.seed = Some(args.seed);
            manifest.life_table = Some(name);
            emit_rows(&rows, args.out.as_deref(), manifest)
        }
        Command::Table1(args) => {
            let (table, name) = args.table.required()?;
            let config = Table1Config {
                poor_count: args.poor,
                rich_count: args.rich,
                ratios: args.ratios,
                params: args.tolerance.params()?,
                replications: args.mc.replications(),
                seed: args.mc.seed,
            };
            let rows = run_table1(&config, &table)?;
            let mut manifest = Manifest::new(
                ArtifactKind::ErrorPanel,
                "",
                json!({ "poor": config.poor_count, "rich": config.rich_count, "ratios": config.ratios, "params": config.params }),
            );
            manifest.seed = Some(config.seed);
            manifest.replications = Some(config.replications);
            manifest.life_table = Some(name);
            emit_rows(&rows, args.out.as_deref(), manifest)
        }
        Command::Sweep(args) => {
            let (table, name) = args.table.required()?;
            let config = SweepConfig {
                total: args.total,
                poor_counts: args.poor_counts,
                ratios: args.ratios,
                params: args.tolerance.params()?,
                method: match args.method {
                    MethodArg::Mc => HorizonMethod::MonteCarlo,
                    MethodArg::Approx => HorizonMethod::Approximation,
                },
                replications: args.mc.replications(),
                seed: args.mc.seed,
            };
            let rows = run_sweep(&config, &table)?;
            let mut manifest = Manifest::new(
                ArtifactKind::SweepCurves,
                "",
                json!({ "total": config.total, "poor_counts": config.poor_counts, "ratios": config.ratios, "params": config.params, "method": config.method }),
            );
            manifest.seed = Some(config.seed);
            manifest.replications = Some(config.replications);
            manifest.life_table = Some(name);
            emit_rows(&rows, args.out.as_deref(), manifest)
        }
        Command::Figure1(args) => {
            let (table, name) = args.table.required()?;
            let config = Figure1Config {
                savings: SavingsVector::from_spec_or_path(&args.savings)?,
                params: StabilityParams::new(args.eps1, args.eps2, args.beta)?,
                replications: args.mc.replications(),
                seed: args.mc.seed,
                steps_per_year: args.steps_per_year,
            };
            let output = run_figure1(&config, &table)?;
            let mut manifest = Manifest::new(
                ArtifactKind::PathBand,
                "",
                json!({ "savings": args.savings, "params": config.params, "steps_per_year": config.steps_per_year, "stop_time": output.stop_time }),
            );
            manifest.seed = Some(config.seed);
            manifest.replications = Some(config.replications);
            manifest.life_table = Some(name);
            eprintln!(
                "stable horizon {:.2} years (u = {:.4})",
                output.stop_time.t_star.unwrap_or(f64::NAN),
                output.stop_time.u_star
            );
            emit_rows(&output.rows, args.out.as_deref(), manifest)
        }
    }
}

#[derive(Serialize)]
struct TauRow {
    replication: usize,
    tau_u: f64,
}

fn stability(args: StabilityArgs) -> poolfund::Result<()> {
    let savings = SavingsVector::from_spec_or_path(&args.savings.savings)?;
    let params = args.tolerance.params()?;
    let replications = args.mc.replications();
    let table = args.table.explicit()?;

    let samples = tau_samples(&savings, &params, replications, args.mc.seed);
    if let Some(path) = &args.tau_csv {
        let rows: Vec<TauRow> = samples
            .iter()
            .enumerate()
            .map(|(replication, &tau_u)| TauRow { replication, tau_u })
            .collect();
        let mut manifest = Manifest::new(
            ArtifactKind::TauSamples,
            path,
            json!({ "savings": args.savings.savings, "params": params }),
        );
        manifest.seed = Some(args.mc.seed);
        manifest.replications = Some(replications);
        emit_rows(&rows, Some(path), manifest)?;
    }
    let mut sorted = samples;
    sorted.sort_unstable_by(f64::total_cmp);
    let (u_star, std_error_u) = quantile_with_error(&sorted, params.beta)?;
    let estimate = StabilityEstimate {
        u_star,
        t_star: table.as_ref().map(|(t, _)| t.f_inverse(u_star)),
        replications,
        std_error_u,
    };
    print_json(&json!({
        "u_star": estimate.u_star,
        "t_star": estimate.t_star,
        "se": estimate.std_error_u,
        "reps": estimate.replications,
        "seed": args.mc.seed,
    }))
}

#[derive(Serialize)]
struct CompareRow {
    savings: String,
    implied_number: f64,
    mc_u: f64,
    mc_u_std_error: f64,
    approx_u: f64,
    difference_u: f64,
    mc_years: Option<f64>,
    approx_years: Option<f64>,
    difference_years: Option<f64>,
}

fn compare(args: CompareArgs) -> poolfund::Result<()> {
    let params = StabilityParams::lower_only(args.eps1, args.beta)?;
    let table = args.table.explicit()?;
    let replications = args.mc.replications();
    let mut rows = Vec::with_capacity(args.savings.len());
    for spec in &args.savings {
        let savings = SavingsVector::from_spec_or_path(spec)?;
        let mc = estimate_max_stable_u(&savings, &params, replications, args.mc.seed)?;
        let nu = implied_number(&savings);
        let approx = approx_u(&ApproxInputs::new(nu, params.eps_lower, params.beta)?).u;
        let years = |u: f64| table.as_ref().map(|(t, _)| t.f_inverse(u));
        let (mc_years, approx_years) = (years(mc.u_star), years(approx));
        rows.push(CompareRow {
            savings: spec.clone(),
            implied_number: nu,
            mc_u: mc.u_star,
            mc_u_std_error: mc.std_error_u,
            approx_u: approx,
            difference_u: mc.u_star - approx,
            mc_years,
            approx_years,
            difference_years: mc_years.zip(approx_years).map(|(a, b)| a - b),
        });
    }
    let mut manifest = Manifest::new(
        ArtifactKind::ErrorPanel,
        "",
        json!({ "savings": args.savings, "params": params }),
    );
    manifest.seed = Some(args.mc.seed);
    manifest.replications = Some(replications);
    manifest.life_table = table.map(|(_, name)| name);
    emit_rows(&rows, args.out.as_deref(), manifest)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_numerical_domain() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
