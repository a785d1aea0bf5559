#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mc2::bench::{
    describe_model, run_convergence, run_hagan_comparison, write_csv, write_csv_to, ConvergenceSettings, ResultTable,
    Row,
};
use mc2::{
    black_scholes_price, hagan_implied_vol, price, price_closed_form, Contract, Error, HestonParams, McConfig, Method,
    ModelSpec, OptionType, PayoffKind, Quote, SabrParams, Schedule, SchobelZhuParams,
};

#[derive(Parser, Debug)]
#[command(
    name = "mc2",
    version,
    about = "Conditional Monte-Carlo option pricing under stochastic volatility"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Price one option.
    Price(PriceArgs),
    /// Hagan, MC2 and MC1 prices of out-of-the-money vanillas across a strike range.
    CompareHagan(CompareArgs),
    /// MC1 and MC2 errors against a high-path MC2 reference.
    Convergence(ConvergenceArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ModelName {
    Sabr0,
    Sabr1,
    Heston0,
    Heston1,
    Sz0,
    Sz1,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Payoff {
    Vanilla,
    Asian,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum PriceMethod {
    Mc1,
    Mc2,
    Hagan,
    ClosedForm,
}

/// `v0` or `v0,v1@t1,v2@t2,...`
#[derive(Clone, Debug, PartialEq)]
struct ScheduleArg {
    values: Vec<f64>,
    knots: Vec<f64>,
}

fn parse_number(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("{s:?} is not a number"))
}

fn parse_schedule(s: &str) -> Result<ScheduleArg, String> {
    let mut parts = s.split(',');
    let first = parse_number(parts.next().unwrap_or(""))?;
    let mut arg = ScheduleArg {
        values: vec![first],
        knots: Vec::new(),
    };
    for part in parts {
        let (v, t) = part
            .split_once('@')
            .ok_or_else(|| format!("{part:?} should read value@time"))?;
        arg.values.push(parse_number(v)?);
        arg.knots.push(parse_number(t)?);
    }
    Ok(arg)
}

#[derive(Clone, Debug, PartialEq)]
enum FixingsArg {
    Monthly,
    Times(Vec<f64>),
}

fn parse_fixings(s: &str) -> Result<FixingsArg, String> {
    if s.trim() == "monthly" {
        return Ok(FixingsArg::Monthly);
    }
    s.split(',')
        .map(parse_number)
        .collect::<Result<_, _>>()
        .map(FixingsArg::Times)
}

#[derive(Clone, Debug, PartialEq)]
struct PathCounts(Vec<usize>);

fn parse_counts(s: &str) -> Result<PathCounts, String> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| format!("{p:?} is not a path count"))
        })
        .collect::<Result<_, _>>()
        .map(PathCounts)
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, value_enum)]
    model: ModelName,
    /// Overrides the backbone implied by --model; must be 0 or 1.
    #[arg(long)]
    beta: Option<f64>,
    /// Initial volatility (SABR).
    #[arg(long, default_value_t = 0.2)]
    sigma0: f64,
    /// Vol of vol; SABR accepts a schedule `v0,v1@t1,...`.
    #[arg(long, default_value = "0", value_parser = parse_schedule, allow_negative_numbers = true)]
    nu: ScheduleArg,
    /// Correlation; SABR accepts a schedule `r0,r1@t1,...`.
    #[arg(long, default_value = "0", value_parser = parse_schedule, allow_negative_numbers = true)]
    rho: ScheduleArg,
    /// Mean-reversion speed (Heston, Schobel-Zhu).
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Long-run variance (Heston).
    #[arg(long, default_value_t = 0.04)]
    wlong: f64,
    /// Long-run volatility (Schobel-Zhu).
    #[arg(long, default_value_t = 0.2)]
    zetalong: f64,
    /// Initial variance (Heston).
    #[arg(long, default_value_t = 0.04)]
    w0: f64,
    /// Initial volatility (Schobel-Zhu).
    #[arg(long, default_value_t = 0.2)]
    zeta0: f64,
    #[arg(long, default_value_t = 1.0)]
    s0: f64,
}

#[derive(Args, Debug)]
struct ContractArgs {
    #[arg(long, value_enum, default_value_t = Payoff::Vanilla)]
    payoff: Payoff,
    #[arg(long, conflicts_with = "put")]
    call: bool,
    #[arg(long)]
    put: bool,
    #[arg(long, default_value_t = 1.0)]
    strike: f64,
    #[arg(long, default_value_t = 1.0)]
    maturity: f64,
    /// Asian fixing times: a comma list or `monthly` (the default).
    #[arg(long, value_parser = parse_fixings)]
    fixings: Option<FixingsArg>,
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long, default_value_t = 256)]
    steps_per_year: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the CSV table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PriceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    contract: ContractArgs,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, value_enum, default_value_t = PriceMethod::Mc2)]
    method: PriceMethod,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1.0)]
    maturity: f64,
    #[arg(long, default_value_t = 0.5)]
    strike_min: f64,
    #[arg(long, default_value_t = 2.0)]
    strike_max: f64,
    #[arg(long, default_value_t = 16)]
    strike_count: usize,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    contract: ContractArgs,
    /// Comma-separated, increasing path counts.
    #[arg(long, value_parser = parse_counts, default_value = "128,256,512,1024,2048,4096,8192,16384,32768")]
    paths_list: PathCounts,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long, default_value_t = 1 << 20)]
    reference_paths: usize,
    #[command(flatten)]
    sim: SimArgs,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::Unsupported(_) => Failure::Usage(e.to_string()),
            Error::Domain(_) | Error::Io { .. } => Failure::Runtime(e.to_string()),
        }
    }
}

fn invalid(field: &'static str, reason: &str) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.to_string(),
    }
}

fn constant(arg: &ScheduleArg, field: &'static str) -> Result<f64, Error> {
    if arg.knots.is_empty() {
        Ok(arg.values[0])
    } else {
        Err(invalid(field, "term structure is only supported for SABR"))
    }
}

fn build_model(a: &ModelArgs) -> Result<ModelSpec<f64>, Error> {
    let implied = match a.model {
        ModelName::Sabr0 | ModelName::Heston0 | ModelName::Sz0 => 0.0,
        ModelName::Sabr1 | ModelName::Heston1 | ModelName::Sz1 => 1.0,
    };
    let beta = a.beta.unwrap_or(implied);
    let model: ModelSpec<f64> = match a.model {
        ModelName::Sabr0 | ModelName::Sabr1 => {
            let mut p = SabrParams::new(a.sigma0, a.nu.values[0], a.rho.values[0], beta, a.s0);
            p.nu = Schedule::piecewise(a.nu.values.clone(), a.nu.knots.clone())?;
            p.rho = Schedule::piecewise(a.rho.values.clone(), a.rho.knots.clone())?;
            p.into()
        }
        ModelName::Heston0 | ModelName::Heston1 => HestonParams {
            w0: a.w0,
            kappa: a.kappa,
            w_long: a.wlong,
            nu: constant(&a.nu, "nu")?,
            rho: constant(&a.rho, "rho")?,
            beta,
            s0: a.s0,
        }
        .into(),
        ModelName::Sz0 | ModelName::Sz1 => SchobelZhuParams {
            zeta0: a.zeta0,
            kappa: a.kappa,
            zeta_long: a.zetalong,
            nu: constant(&a.nu, "nu")?,
            rho: constant(&a.rho, "rho")?,
            beta,
            s0: a.s0,
        }
        .into(),
    };
    model.validate()?;
    Ok(model)
}

fn build_contract(a: &ContractArgs) -> Result<Contract<f64>, Error> {
    let option_type = if a.put { OptionType::Put } else { OptionType::Call };
    let contract = match a.payoff {
        Payoff::Vanilla => {
            if a.fixings.is_some() {
                return Err(invalid("fixings", "only apply to asian payoffs"));
            }
            Contract::vanilla(option_type, a.strike, a.maturity)
        }
        Payoff::Asian => {
            let fixings = match &a.fixings {
                None | Some(FixingsArg::Monthly) => Contract::regular_fixings(a.maturity, 12),
                Some(FixingsArg::Times(t)) => t.clone(),
            };
            Contract::asian(option_type, a.strike, a.maturity, fixings)
        }
    };
    contract.validate()?;
    Ok(contract)
}

fn command_line() -> String {
    std::env::args()
        .map(|a| {
            if !a.is_empty() && a.chars().all(|c| c.is_ascii_alphanumeric() || "-_.,@/=:+".contains(c)) {
                a
            } else {
                format!("'{}'", a.replace('\'', r"'\''"))
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn stamp(table: &mut ResultTable) {
    table.metadata.insert(0, ("command".to_string(), command_line()));
}

fn describe_contract(table: &mut ResultTable, c: &Contract<f64>) {
    table
        .meta("payoff", format!("{:?}", c.kind).to_lowercase())
        .meta("option_type", format!("{:?}", c.option_type).to_lowercase())
        .meta("strike", c.strike)
        .meta("maturity", c.maturity);
    if c.kind == PayoffKind::Asian {
        let f: Vec<String> = c.fixings.iter().map(f64::to_string).collect();
        table.meta("fixings", f.join(" "));
    }
}

fn emit(table: &ResultTable, out: &Option<PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => write_csv(table, path),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv_to(table, &mut lock, "stdout")?;
            lock.flush().map_err(|e| Error::Io {
                path: "stdout".into(),
                reason: e.to_string(),
            })
        }
    }
}

fn run_price(a: &PriceArgs) -> Result<(), Failure> {
    let model = build_model(&a.model)?;
    let contract = build_contract(&a.contract)?;
    let config = McConfig::new(a.paths, a.sim.steps_per_year, a.sim.seed, Method::Mc2);
    let analytic = |value: f64| Quote {
        price: value,
        stderr: 0.0,
        n_paths: 0,
        runtime: 0.0,
    };
    let (name, quote) = match a.method {
        PriceMethod::Mc1 => (
            "mc1",
            price(
                &model,
                &contract,
                &McConfig {
                    method: Method::Mc1,
                    ..config
                },
            )?,
        ),
        PriceMethod::Mc2 => ("mc2", price(&model, &contract, &config)?),
        PriceMethod::ClosedForm => ("closed-form", analytic(price_closed_form(&model, &contract)?)),
        PriceMethod::Hagan => {
            let ModelSpec::Sabr(p) = &model else {
                return Err(Error::Unsupported("the Hagan expansion is defined for SABR only".into()).into());
            };
            if contract.kind != PayoffKind::Vanilla {
                return Err(Error::Unsupported("the Hagan expansion prices vanillas only".into()).into());
            }
            let vol = hagan_implied_vol(p, contract.strike, contract.maturity)?;
            let value = black_scholes_price(
                p.s0,
                contract.strike,
                vol * contract.maturity.sqrt(),
                contract.option_type,
            )?;
            ("hagan", analytic(value))
        }
    };
    let mut table = ResultTable::new(&[]);
    describe_model(&mut table, &model);
    describe_contract(&mut table, &contract);
    table
        .meta("method", name)
        .meta("paths", a.paths)
        .meta("steps_per_year", a.sim.steps_per_year)
        .meta("seed", a.sim.seed);
    stamp(&mut table);
    table.push(Row::from_quote(name, contract.strike, contract.maturity, &quote))?;
    emit(&table, &a.sim.out)?;
    Ok(())
}

fn strike_range(a: &CompareArgs) -> Result<Vec<f64>, Error> {
    if !(a.strike_min > 0.0) || !(a.strike_max >= a.strike_min) {
        return Err(invalid("strike range", "needs 0 < strike-min <= strike-max"));
    }
    match a.strike_count {
        0 => Err(invalid("strike-count", "must be >= 1")),
        1 => Ok(vec![a.strike_min]),
        n => {
            let step = (a.strike_max - a.strike_min) / (n - 1) as f64;
            Ok((0..n)
                .map(|i| {
                    if i + 1 == n {
                        a.strike_max
                    } else {
                        a.strike_min + step * i as f64
                    }
                })
                .collect())
        }
    }
}

fn run_compare(a: &CompareArgs) -> Result<(), Failure> {
    let ModelSpec::Sabr(p) = build_model(&a.model)? else {
        return Err(Failure::Usage(
            "compare-hagan needs a SABR model (sabr0 or sabr1)".into(),
        ));
    };
    let strikes = strike_range(a)?;
    let config = McConfig::new(a.paths, a.sim.steps_per_year, a.sim.seed, Method::Mc2);
    let mut run = run_hagan_comparison(&p, &strikes, a.maturity, &config)?;
    stamp(&mut run.table);
    emit(&run.table, &a.sim.out)?;
    Ok(())
}

fn run_convergence_cmd(a: &ConvergenceArgs) -> Result<(), Failure> {
    let model = build_model(&a.model)?;
    let contract = build_contract(&a.contract)?;
    if a.paths_list.0.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("paths-list", "must be increasing").into());
    }
    let mut settings = ConvergenceSettings::new(a.paths_list.0.clone(), a.repeats, a.sim.seed);
    settings.reference_paths = a.reference_paths;
    settings.steps_per_year = a.sim.steps_per_year;
    let mut report = run_convergence(&model, &contract, &settings)?;
    report
        .table
        .meta("mc2_win_fraction", report.mc2_win_fraction)
        .meta("runtime_ratio", report.runtime_ratio);
    stamp(&mut report.table);
    emit(&report.table, &a.sim.out)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match &cli.command {
        Command::Price(a) => run_price(a),
        Command::CompareHagan(a) => run_compare(a),
        Command::Convergence(a) => run_convergence_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
