//! Benchmark harness: MC1/MC2 convergence studies, Hagan-vs-MC2 strike
//! sweeps, and the CSV format shared by all result tables.
//!
//! CSV layout: `# key=value` metadata lines, then a header row, then one
//! row per result. Floats are written with 17 significant digits so a
//! parse of the file reproduces every `f64` bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::closed_form::{black_scholes_price, hagan_implied_vol};
use crate::error::{Error, Result};
use crate::model::{Contract, McConfig, Method, ModelSpec, OptionType, Quote, SabrParams};
use crate::pricer::price_strikes;

pub const BASE_COLUMNS: [&str; 7] = [
    "method",
    "strike",
    "maturity",
    "price",
    "stderr",
    "n_paths",
    "runtime_seconds",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub method: String,
    pub strike: f64,
    pub maturity: f64,
    pub price: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub runtime_seconds: f64,
    /// Values of the table's extra columns, in order.
    pub extra: Vec<f64>,
}

impl Row {
    pub fn from_quote(method: &str, strike: f64, maturity: f64, q: &Quote<f64>) -> Self {
        Row {
            method: method.to_string(),
            strike,
            maturity,
            price: q.price,
            stderr: q.stderr,
            n_paths: q.n_paths,
            runtime_seconds: q.runtime,
            extra: Vec::new(),
        }
    }
}

/// Homogeneous result rows plus the metadata needed to reproduce them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub metadata: Vec<(String, String)>,
    pub extra_columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl ResultTable {
    pub fn new(extra_columns: &[&str]) -> Self {
        ResultTable {
            metadata: Vec::new(),
            extra_columns: extra_columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get_meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn push(&mut self, row: Row) -> Result<()> {
        if row.extra.len() != self.extra_columns.len() {
            return Err(Error::Domain(format!(
                "row has {} extra values, table has {} extra columns",
                row.extra.len(),
                self.extra_columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &str, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.to_string(),
        reason: e.to_string(),
    }
}

/// Serialises `table` to `out`; `label` names the destination in errors.
pub fn write_csv_to<W: Write>(table: &ResultTable, mut out: W, label: &str) -> Result<()> {
    for (k, v) in &table.metadata {
        if k.contains(['=', '\n']) || v.contains('\n') {
            return Err(Error::Domain(format!("metadata entry {k:?} cannot be serialised")));
        }
        writeln!(out, "# {k}={v}").map_err(|e| io_err(label, e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    let header = BASE_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(table.extra_columns.iter().cloned());
    w.write_record(header).map_err(|e| io_err(label, e))?;
    for r in &table.rows {
        let mut rec = vec![
            r.method.clone(),
            fmt_f64(r.strike),
            fmt_f64(r.maturity),
            fmt_f64(r.price),
            fmt_f64(r.stderr),
            r.n_paths.to_string(),
            fmt_f64(r.runtime_seconds),
        ];
        rec.extend(r.extra.iter().map(|&x| fmt_f64(x)));
        w.write_record(&rec).map_err(|e| io_err(label, e))?;
    }
    w.flush().map_err(|e| io_err(label, e))
}

/// Writes `table` to the file at `destination`.
pub fn write_csv(table: &ResultTable, destination: &Path) -> Result<()> {
    let label = destination.display().to_string();
    let file = std::fs::File::create(destination).map_err(|e| io_err(&label, e))?;
    write_csv_to(table, std::io::BufWriter::new(file), &label)
}

/// Parses a table written by [`write_csv_to`].
pub fn read_csv_from<R: Read>(mut input: R, label: &str) -> Result<ResultTable> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(|e| io_err(label, e))?;
    let mut metadata = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        if let Some(m) = line.strip_prefix('#') {
            let m = m.strip_prefix(' ').unwrap_or(m);
            let (k, v) = m
                .split_once('=')
                .ok_or_else(|| io_err(label, format!("bad metadata line {line:?}")))?;
            metadata.push((k.to_string(), v.to_string()));
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let headers = rdr.headers().map_err(|e| io_err(label, e))?.clone();
    if headers.len() < BASE_COLUMNS.len() || headers.iter().zip(BASE_COLUMNS).any(|(a, b)| a != b) {
        return Err(io_err(label, "unexpected header"));
    }
    let extra_columns: Vec<String> = headers.iter().skip(BASE_COLUMNS.len()).map(str::to_string).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|e| io_err(label, format!("{s:?}: {e}")));
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| io_err(label, e))?;
        rows.push(Row {
            method: rec[0].to_string(),
            strike: num(&rec[1])?,
            maturity: num(&rec[2])?,
            price: num(&rec[3])?,
            stderr: num(&rec[4])?,
            n_paths: rec[5]
                .parse()
                .map_err(|e| io_err(label, format!("{:?}: {e}", &rec[5])))?,
            runtime_seconds: num(&rec[6])?,
            extra: rec.iter().skip(BASE_COLUMNS.len()).map(num).collect::<Result<_>>()?,
        });
    }
    Ok(ResultTable {
        metadata,
        extra_columns,
        rows,
    })
}

pub fn read_csv(source: &Path) -> Result<ResultTable> {
    let label = source.display().to_string();
    let file = std::fs::File::open(source).map_err(|e| io_err(&label, e))?;
    read_csv_from(file, &label)
}

/// Records the model parameters as metadata.
pub fn describe_model(table: &mut ResultTable, model: &ModelSpec<f64>) {
    match model {
        ModelSpec::Sabr(p) => {
            table
                .meta("model", "sabr")
                .meta("sigma0", p.sigma0)
                .meta("beta", p.beta)
                .meta("s0", p.s0);
            table.meta("nu", schedule_string(p.nu.values(), p.nu.knots()));
            table.meta("rho", schedule_string(p.rho.values(), p.rho.knots()));
        }
        ModelSpec::Heston(p) => {
            table
                .meta("model", "heston")
                .meta("w0", p.w0)
                .meta("kappa", p.kappa)
                .meta("w_long", p.w_long)
                .meta("nu", p.nu)
                .meta("rho", p.rho)
                .meta("beta", p.beta)
                .meta("s0", p.s0);
        }
        ModelSpec::SchobelZhu(p) => {
            table
                .meta("model", "schobel-zhu")
                .meta("zeta0", p.zeta0)
                .meta("kappa", p.kappa)
                .meta("zeta_long", p.zeta_long)
                .meta("nu", p.nu)
                .meta("rho", p.rho)
                .meta("beta", p.beta)
                .meta("s0", p.s0);
        }
    }
}

/// `v0,v1@t1,v2@t2` notation for piecewise-constant schedules.
pub fn schedule_string(values: &[f64], knots: &[f64]) -> String {
    let mut s = values[0].to_string();
    for (v, t) in values[1..].iter().zip(knots) {
        s.push_str(&format!(",{v}@{t}"));
    }
    s
}

fn sub_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSettings {
    /// Increasing path counts, e.g. powers of two.
    pub path_counts: Vec<usize>,
    pub n_repeats: usize,
    pub seed: u64,
    pub reference_paths: usize,
    pub steps_per_year: usize,
    pub workers: Option<usize>,
}

impl ConvergenceSettings {
    pub fn new(path_counts: Vec<usize>, n_repeats: usize, seed: u64) -> Self {
        ConvergenceSettings {
            path_counts,
            n_repeats,
            seed,
            reference_paths: 1 << 20,
            steps_per_year: 64,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// One row per (method, path count) with the repeat-averaged price,
    /// stderr and runtime, plus the mean absolute error column.
    pub table: ResultTable,
    pub reference: Quote<f64>,
    /// Mean absolute error per path count.
    pub mc1_error: Vec<f64>,
    pub mc2_error: Vec<f64>,
    pub mc1_slope: f64,
    pub mc2_slope: f64,
    /// Share of (path count, repeat) runs where MC2 is closer to the
    /// reference than MC1.
    pub mc2_win_fraction: f64,
    /// Total MC2 wall time over total MC1 wall time.
    pub runtime_ratio: f64,
}

/// MC1 and MC2 error against a high-path MC2 reference as the path count
/// grows. Repeat `r` uses the same sub-seed for both methods and all path
/// counts.
pub fn run_convergence(
    model: &ModelSpec<f64>,
    contract: &Contract<f64>,
    settings: &ConvergenceSettings,
) -> Result<ConvergenceReport> {
    if settings.path_counts.is_empty() {
        return Err(Error::invalid("path_counts", "must not be empty"));
    }
    if settings.n_repeats == 0 {
        return Err(Error::invalid("repeats", "must be >= 1"));
    }
    let cfg = |n_paths, seed, method| McConfig {
        n_paths,
        steps_per_year: settings.steps_per_year,
        seed,
        method,
        workers: settings.workers,
    };
    let reference = price_strikes(
        model,
        contract,
        &[contract.strike],
        &cfg(settings.reference_paths, sub_seed(settings.seed, u64::MAX), Method::Mc2),
    )?[0];

    let mut table = ResultTable::new(&["mean_abs_error"]);
    describe_model(&mut table, model);
    table
        .meta("payoff", format!("{:?}", contract.kind).to_lowercase())
        .meta("option_type", format!("{:?}", contract.option_type).to_lowercase())
        .meta(
            "fixings",
            contract
                .fixings
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(" "),
        )
        .meta("seed", settings.seed)
        .meta("steps_per_year", settings.steps_per_year)
        .meta("repeats", settings.n_repeats)
        .meta("reference_paths", settings.reference_paths)
        .meta("reference_price", fmt_f64(reference.price))
        .meta("reference_stderr", fmt_f64(reference.stderr));

    let mut errors = [vec![], vec![]];
    let (mut wins, mut runs) = (0usize, 0usize);
    let mut time = [0.0f64; 2];
    for &m in &settings.path_counts {
        let mut acc = [(0.0, 0.0, 0.0, 0.0); 2];
        for r in 0..settings.n_repeats {
            let seed = sub_seed(settings.seed, r as u64);
            let mut err = [0.0; 2];
            for (i, method) in [Method::Mc1, Method::Mc2].into_iter().enumerate() {
                let q = price_strikes(model, contract, &[contract.strike], &cfg(m, seed, method))?[0];
                err[i] = (q.price - reference.price).abs();
                acc[i].0 += q.price;
                acc[i].1 += q.stderr;
                acc[i].2 += q.runtime;
                acc[i].3 += err[i];
                time[i] += q.runtime;
            }
            wins += usize::from(err[1] < err[0]);
            runs += 1;
        }
        let reps = settings.n_repeats as f64;
        for (i, name) in ["mc1", "mc2"].into_iter().enumerate() {
            let mean_err = acc[i].3 / reps;
            errors[i].push(mean_err);
            table.push(Row {
                method: name.to_string(),
                strike: contract.strike,
                maturity: contract.maturity,
                price: acc[i].0 / reps,
                stderr: acc[i].1 / reps,
                n_paths: m,
                runtime_seconds: acc[i].2 / reps,
                extra: vec![mean_err],
            })?;
        }
    }
    let counts: Vec<f64> = settings.path_counts.iter().map(|&m| m as f64).collect();
    let [mc1_error, mc2_error] = errors;
    let mc1_slope = log_log_slope(&counts, &mc1_error);
    let mc2_slope = log_log_slope(&counts, &mc2_error);
    table
        .meta("mc1_slope", fmt_f64(mc1_slope))
        .meta("mc2_slope", fmt_f64(mc2_slope));
    Ok(ConvergenceReport {
        table,
        reference,
        mc1_error,
        mc2_error,
        mc1_slope,
        mc2_slope,
        mc2_win_fraction: wins as f64 / runs as f64,
        runtime_ratio: time[1] / time[0],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HaganComparison {
    pub table: ResultTable,
    /// `∫ nu^2 dt` over the option life.
    pub theta: f64,
    pub strikes: Vec<f64>,
    pub hagan: Vec<f64>,
    pub mc2: Vec<Quote<f64>>,
    pub mc1: Vec<Quote<f64>>,
}

impl HaganComparison {
    /// Largest `|Hagan - MC2|` over strikes in `[lo, hi]`, with the MC2
    /// stderr at that strike.
    pub fn max_abs_diff(&self, lo: f64, hi: f64) -> (f64, f64) {
        self.strikes
            .iter()
            .enumerate()
            .filter(|(_, &k)| k >= lo && k <= hi)
            .map(|(i, _)| ((self.hagan[i] - self.mc2[i].price).abs(), self.mc2[i].stderr))
            .fold((0.0, 0.0), |best, cur| if cur.0 > best.0 { cur } else { best })
    }
}

/// Out-of-the-money option type at `strike`: puts below the forward,
/// calls at or above it.
pub fn otm_option_type(strike: f64, forward: f64) -> OptionType {
    if strike < forward {
        OptionType::Put
    } else {
        OptionType::Call
    }
}

/// Hagan, MC2 and MC1 prices of out-of-the-money vanillas across strikes.
pub fn run_hagan_comparison(
    params: &SabrParams<f64>,
    strikes: &[f64],
    maturity: f64,
    config: &McConfig,
) -> Result<HaganComparison> {
    params.validate()?;
    if params.has_term_structure() {
        return Err(Error::Unsupported(
            "Hagan comparison requires constant nu and rho".into(),
        ));
    }
    let model = ModelSpec::Sabr(params.clone());
    let s0 = params.s0;
    let mut hagan = Vec::with_capacity(strikes.len());
    for &k in strikes {
        let vol = hagan_implied_vol(params, k, maturity)?;
        hagan.push(black_scholes_price(
            s0,
            k,
            vol * maturity.sqrt(),
            otm_option_type(k, s0),
        )?);
    }

    // Puts and calls share the simulated paths through the strike grid.
    let mut mc = Vec::new();
    for method in [Method::Mc2, Method::Mc1] {
        let cfg = McConfig { method, ..*config };
        let puts: Vec<f64> = strikes.iter().copied().filter(|&k| k < s0).collect();
        let calls: Vec<f64> = strikes.iter().copied().filter(|&k| k >= s0).collect();
        let mut q_put = if puts.is_empty() {
            Vec::new()
        } else {
            price_strikes(
                &model,
                &Contract::vanilla(OptionType::Put, puts[0], maturity),
                &puts,
                &cfg,
            )?
        }
        .into_iter();
        let mut q_call = if calls.is_empty() {
            Vec::new()
        } else {
            price_strikes(
                &model,
                &Contract::vanilla(OptionType::Call, calls[0], maturity),
                &calls,
                &cfg,
            )?
        }
        .into_iter();
        let quotes: Vec<Quote<f64>> = strikes
            .iter()
            .map(|&k| if k < s0 { q_put.next() } else { q_call.next() }.expect("one quote per strike"))
            .collect();
        mc.push(quotes);
    }
    let mc1 = mc.pop().expect("mc1 quotes");
    let mc2 = mc.pop().expect("mc2 quotes");

    let theta = params.theta(maturity);
    let mut table = ResultTable::new(&["abs_hagan_minus_mc2", "mc2_stderr"]);
    describe_model(&mut table, &model);
    table
        .meta("theta", fmt_f64(theta))
        .meta("maturity", maturity)
        .meta("seed", config.seed)
        .meta("steps_per_year", config.steps_per_year)
        .meta("n_paths", config.n_paths)
        .meta("option_type", "otm (put below s0, call at or above)");
    for (i, &k) in strikes.iter().enumerate() {
        let diff = (hagan[i] - mc2[i].price).abs();
        let extra = vec![diff, mc2[i].stderr];
        table.push(Row {
            method: "hagan".into(),
            strike: k,
            maturity,
            price: hagan[i],
            stderr: 0.0,
            n_paths: 0,
            runtime_seconds: 0.0,
            extra: extra.clone(),
        })?;
        for (name, q) in [("mc2", &mc2[i]), ("mc1", &mc1[i])] {
            table.push(Row {
                extra: extra.clone(),
                ..Row::from_quote(name, k, maturity, q)
            })?;
        }
    }
    Ok(HaganComparison {
        table,
        theta,
        strikes: strikes.to_vec(),
        hagan,
        mc2,
        mc1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((log_log_slope(&x, &y) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn push_rejects_ragged_rows() {
        let mut t = ResultTable::new(&["a"]);
        let q = Quote {
            price: 1.0,
            stderr: 0.0,
            n_paths: 1,
            runtime: 0.0,
        };
        assert!(t.push(Row::from_quote("mc2", 1.0, 1.0, &q)).is_err());
    }

    #[test]
    fn empty_table_writes_header_and_metadata_only() {
        let mut t = ResultTable::new(&[]);
        t.meta("seed", 7);
        let mut buf = Vec::new();
        write_csv_to(&t, &mut buf, "mem").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# seed=7\nmethod,strike,maturity,price,stderr,n_paths,runtime_seconds\n"
        );
        assert_eq!(read_csv_from(text.as_bytes(), "mem").unwrap(), t);
    }

    #[test]
    fn write_failure_names_destination() {
        let err = write_csv(&ResultTable::new(&[]), Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().starts_with("/nonexistent-dir/x.csv"));
    }

    #[test]
    fn convergence_needs_path_counts() {
        let m = ModelSpec::Sabr(SabrParams::new(0.2, 0.3, 0.0, 0.0, 1.0));
        let c = Contract::vanilla(OptionType::Put, 0.8, 1.0);
        let err = run_convergence(&m, &c, &ConvergenceSettings::new(vec![], 2, 1)).unwrap_err();
        assert_eq!(err.field(), Some("path_counts"));
    }
}
