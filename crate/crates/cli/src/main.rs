use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fbct_core::closedform::{
    gamma_trace_class, nabla_inv01_even, nabla_inv01_odd, nabla_inv1g_p3_diagonal, nabla_inv_even,
    nabla_inv_odd, p3_conjecture, uniformity_inv1g_even, ClosedFormCase, GammaClassification,
    Prediction,
};
use fbct_core::experiments::{
    run_experiment, sweep_odd_p, ExperimentOptions, ExperimentRequest, VerificationReport,
    COVERAGE, EXPERIMENT_IDS,
};
use fbct_core::export::{
    ddt_json, fbct_json, spectrum_json, write_ddt_csv, write_fbct_csv, write_spectrum_csv,
};
use fbct_core::fbct::{ddt_table, fbct_spectrum, fbct_table, Engine, FbctOptions};
use fbct_core::functions::{canonical_form, identity_function};
use fbct_core::pool::run_with_workers;
use fbct_core::{
    inverse_function, nabla, second_order_uniformity, swapped_inverse, Elem, Error, Field,
    FunctionTable, Scope, Status, Transposition,
};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "fbct", version, about = "Feistel boomerang connectivity tables and second-order zero differential spectra over finite fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full FBCT of a function, with its second-order zero differential uniformity.
    Fbct {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        func: FunctionArgs,
        #[arg(long, value_enum, default_value_t = EngineArg::Direct)]
        engine: EngineArg,
        /// Disable the symmetry-orbit shortcut of the direct engine.
        #[arg(long)]
        no_orbit_reduction: bool,
        /// CSV output: only pairs whose entry is not forced to p^n.
        #[arg(long)]
        nontrivial_only: bool,
    },
    /// Value histogram of the FBCT.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        func: FunctionArgs,
        #[arg(long, default_value = "nontrivial")]
        scope: Scope,
    },
    /// Difference distribution table and differential uniformity.
    Ddt {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        func: FunctionArgs,
    },
    /// Closed-form entry for the inverse map and its swapped variants.
    Closedform {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        func: FunctionArgs,
        #[arg(long)]
        a: Option<u64>,
        #[arg(long)]
        b: Option<u64>,
        /// Print the classification of every gamma instead of one entry.
        #[arg(long)]
        list_gamma_classes: bool,
    },
    /// Run a named experiment and print its report.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        field: Option<String>,
        #[arg(long)]
        gamma: Option<u64>,
        /// Largest n for p3-conjecture, field-order bound for odd-p-sweep.
        #[arg(long)]
        limit: Option<u32>,
        #[arg(long)]
        all_counterexamples: bool,
        /// List experiment ids and the claims they cover.
        #[arg(long)]
        list: bool,
    },
    /// Uniformity of Inv∘(1,γ) for every γ over every field p^n < limit, p > 3.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        limit: u32,
        #[arg(long)]
        all_counterexamples: bool,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "FBCT_DEFAULT_WORKERS")]
    workers: Option<usize>,
    /// Run brute-force computations above the default budget.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Clone)]
struct FunctionArgs {
    /// Field as p^n or p^n:c0,c1,...,1 with an explicit modulus.
    #[arg(long)]
    field: Option<String>,
    /// inv | id | swap:A,B | table:PATH. In swap, `g` stands for --gamma.
    #[arg(long = "fn", default_value = "inv")]
    function: String,
    #[arg(long)]
    gamma: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Direct,
    Collision,
}

/// Failures mapped to the exit-code contract.
enum Failure {
    Core(Error),
    Usage(String),
    Claims(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::Usage(_) => 1,
        Failure::Claims(_) => 4,
        Failure::Core(e) => match e {
            Error::BudgetExceeded { .. } => 2,
            Error::Io(_) | Error::Export(_) => 3,
            _ => 1,
        },
    }
}

/// Parsed function selector.
enum Selector {
    Inverse,
    Identity,
    Swap(Transposition),
    Table(PathBuf),
}

fn parse_selector(field: Option<&Field>, s: &str, gamma: Option<u64>) -> CliResult<Selector> {
    match s {
        "inv" => return Ok(Selector::Inverse),
        "id" => return Ok(Selector::Identity),
        _ => {}
    }
    if let Some(path) = s.strip_prefix("table:") {
        return Ok(Selector::Table(PathBuf::from(path)));
    }
    let Some(args) = s.strip_prefix("swap:") else {
        return Err(Failure::Usage(format!(
            "unknown function `{s}` (expected inv, id, swap:A,B or table:PATH)"
        )));
    };
    let field = field.ok_or_else(|| Failure::Usage("swap needs --field".into()))?;
    let parts: Vec<&str> = args.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Failure::Usage(format!("`swap:{args}` needs exactly two codes")));
    }
    let mut codes = [0 as Elem; 2];
    for (slot, part) in codes.iter_mut().zip(&parts) {
        let raw = match *part {
            "g" | "gamma" | "γ" => gamma.ok_or_else(|| Failure::Usage(format!("`{part}` in --fn needs --gamma")))?,
            p => p
                .parse::<u64>()
                .map_err(|_| Failure::Usage(format!("`{p}` is not an element code")))?,
        };
        *slot = field.check(raw)?;
    }
    Ok(Selector::Swap(Transposition::new(codes[0], codes[1])?))
}

fn parse_field(s: Option<&str>) -> CliResult<Option<Arc<Field>>> {
    s.map(|s| Field::parse(s).map(Arc::new).map_err(Failure::from))
        .transpose()
}

fn load_function(func: &FunctionArgs) -> CliResult<(FunctionTable, Selector)> {
    let field = parse_field(func.field.as_deref())?;
    let sel = parse_selector(field.as_deref(), &func.function, func.gamma)?;
    let f = match (&sel, &field) {
        (Selector::Table(path), given) => {
            let f = FunctionTable::load(path).map_err(|e| match e {
                Error::Io(io) => Error::Io(io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
                e => e,
            })?;
            if let Some(k) = given {
                if k.spec() != f.field().spec() {
                    return Err(Failure::Usage(format!(
                        "--field {} does not match the table header {}",
                        k,
                        f.field()
                    )));
                }
            }
            f
        }
        (_, None) => return Err(Failure::Usage("--field is required".into())),
        (Selector::Inverse, Some(k)) => inverse_function(k),
        (Selector::Identity, Some(k)) => identity_function(k),
        (Selector::Swap(t), Some(k)) => swapped_inverse(k, *t)?,
    };
    Ok((f, sel))
}

fn describe(sel: &Selector) -> String {
    match sel {
        Selector::Inverse => "inv".into(),
        Selector::Identity => "id".into(),
        Selector::Swap(t) => format!("swap:{},{}", t.alpha(), t.beta()),
        Selector::Table(p) => format!("table:{}", p.display()),
    }
}

fn fbct_options(common: &Common) -> FbctOptions {
    FbctOptions {
        force: common.force,
        ..FbctOptions::default()
    }
}

/// Where the main payload goes; summary lines go to stderr when stdout carries data.
struct Output {
    sink: Box<dyn Write>,
    data_on_stdout: bool,
}

impl Output {
    fn open(common: &Common) -> CliResult<Self> {
        Ok(match &common.out {
            Some(path) => Output {
                sink: Box::new(BufWriter::new(File::create(path)?)),
                data_on_stdout: false,
            },
            None => Output {
                sink: Box::new(BufWriter::new(io::stdout())),
                data_on_stdout: common.format != Format::Text,
            },
        })
    }

    fn summary(&mut self, line: &str) -> CliResult {
        if self.data_on_stdout {
            eprintln!("{line}");
        } else {
            println!("{line}");
        }
        Ok(())
    }

    fn json(&mut self, v: &Value) -> CliResult {
        serde_json::to_writer_pretty(&mut self.sink, v).map_err(Error::from)?;
        writeln!(self.sink)?;
        Ok(())
    }

    fn finish(mut self) -> CliResult {
        self.sink.flush()?;
        Ok(())
    }
}

/// Grids are printed in text mode only up to this order unless `--out` is given.
const TEXT_GRID_MAX: u32 = 64;

fn write_grid(out: &mut dyn Write, q: u32, row: impl Fn(Elem) -> Vec<u32>) -> io::Result<()> {
    for a in 0..q {
        let cells: Vec<String> = row(a).iter().map(u32::to_string).collect();
        writeln!(out, "{}", cells.join(" "))?;
    }
    Ok(())
}

fn cmd_fbct(
    common: &Common,
    func: &FunctionArgs,
    engine: EngineArg,
    no_orbit_reduction: bool,
    nontrivial_only: bool,
) -> CliResult {
    let (f, sel) = load_function(func)?;
    let opts = FbctOptions {
        engine: match engine {
            EngineArg::Direct => Engine::Direct,
            EngineArg::Collision => Engine::Collision,
        },
        orbit_reduction: !no_orbit_reduction,
        ..fbct_options(common)
    };
    let m = fbct_table(&f, &opts)?;
    let u = second_order_uniformity(&m);
    let mut out = Output::open(common)?;
    out.summary(&format!("field: {}", f.field().spec()))?;
    out.summary(&format!("function: {}", describe(&sel)))?;
    match u {
        Some(u) => {
            out.summary(&format!("second_order_uniformity: {}", u.value))?;
            out.summary(&format!("attained_at: ({}, {})", u.a, u.b))?;
        }
        None => out.summary("second_order_uniformity: none (no nontrivial pairs)")?,
    }
    match common.format {
        Format::Csv => write_fbct_csv(&m, &mut out.sink, nontrivial_only)?,
        Format::Json => {
            let mut v = fbct_json(&m);
            v["function"] = json!(describe(&sel));
            v["second_order_uniformity"] = json!(u);
            out.json(&v)?;
        }
        Format::Text => {
            let q = f.field().order();
            if common.out.is_some() || q <= TEXT_GRID_MAX {
                write_grid(&mut out.sink, q, |a| m.row(a).to_vec())?;
            } else {
                out.summary(&format!("matrix omitted for order {q} > {TEXT_GRID_MAX}; use --out or --format csv"))?;
            }
        }
    }
    out.finish()
}

fn cmd_spectrum(common: &Common, func: &FunctionArgs, scope: Scope) -> CliResult {
    let (f, _) = load_function(func)?;
    let s = fbct_spectrum(&f, scope, &fbct_options(common))?;
    let mut out = Output::open(common)?;
    match common.format {
        Format::Text => writeln!(out.sink, "{}", s.counts_json())?,
        Format::Csv => write_spectrum_csv(&s, &mut out.sink)?,
        Format::Json => out.json(&spectrum_json(f.field(), &s))?,
    }
    out.finish()
}

fn cmd_ddt(common: &Common, func: &FunctionArgs) -> CliResult {
    let (f, sel) = load_function(func)?;
    let m = ddt_table(&f, &fbct_options(common))?;
    let mut out = Output::open(common)?;
    out.summary(&format!("field: {}", f.field().spec()))?;
    out.summary(&format!("function: {}", describe(&sel)))?;
    out.summary(&format!("differential_uniformity: {}", m.uniformity()))?;
    match common.format {
        Format::Csv => write_ddt_csv(&m, &mut out.sink)?,
        Format::Json => {
            let mut v = ddt_json(&m);
            v["function"] = json!(describe(&sel));
            v["differential_uniformity"] = json!(m.uniformity());
            out.json(&v)?;
        }
        Format::Text => {
            let q = f.field().order();
            if common.out.is_some() || q <= TEXT_GRID_MAX {
                write_grid(&mut out.sink, q, |a| m.row(a).to_vec())?;
            }
        }
    }
    out.finish()
}

/// The closed form that applies to `sel` at `(a, b)`, after scaling a general
/// transposition to its canonical `(1, γ)` or `(0, 1)` form.
fn closed_form_entry(k: &Field, sel: &Selector, a: Elem, b: Elem) -> CliResult<(ClosedFormCase, String)> {
    let family_err = || Failure::Usage("closedform supports --fn inv and --fn swap:A,B".into());
    match sel {
        Selector::Inverse => {
            let c = if k.is_binary() { nabla_inv_even(k, a, b)? } else { nabla_inv_odd(k, a, b)? };
            Ok((c, "inv".into()))
        }
        Selector::Swap(t) => {
            let (canon, scale) = canonical_form(k, *t)?;
            let (a, b) = (k.div(a, scale), k.div(b, scale));
            let gamma = canon.beta();
            if gamma == 0 {
                let c = if k.is_binary() { nabla_inv01_even(k, a, b)? } else { nabla_inv01_odd(k, a, b)? };
                return Ok((c, "inv01".into()));
            }
            let family = format!("inv1g gamma={gamma}");
            if k.is_binary() {
                Ok((GammaClassification::new(k, gamma)?.nabla(a, b), family))
            } else if k.p() == 3 && a == b && k.n() >= 2 {
                Ok((nabla_inv1g_p3_diagonal(k, gamma, a)?, family))
            } else {
                Err(Failure::Core(Error::Unsupported(format!(
                    "no closed form for Inv∘(1,γ) at ({a}, {b}) over {k}; only p = 2, or the diagonal for p = 3"
                ))))
            }
        }
        _ => Err(family_err()),
    }
}

fn cmd_closedform(common: &Common, func: &FunctionArgs, a: Option<u64>, b: Option<u64>, list: bool) -> CliResult {
    let k = parse_field(func.field.as_deref())?.ok_or_else(|| Failure::Usage("--field is required".into()))?;
    let mut out = Output::open(common)?;
    if list {
        return list_gamma_classes(&k, common, out);
    }
    let sel = parse_selector(Some(&k), &func.function, func.gamma)?;
    let (a, b) = match (a, b) {
        (Some(a), Some(b)) => (k.check(a)?, k.check(b)?),
        _ => return Err(Failure::Usage("closedform needs --a and --b (or --list-gamma-classes)".into())),
    };
    let (case, family) = closed_form_entry(&k, &sel, a, b)?;
    let f = match &sel {
        Selector::Swap(t) => swapped_inverse(&k, *t)?,
        _ => inverse_function(&k),
    };
    let oracle = nabla(&f, a, b);
    let (kind, value) = match case.prediction {
        Prediction::Exact(v) => ("exact", v),
        Prediction::AtMost(v) => ("at_most", v),
    };
    match common.format {
        Format::Json => out.json(&json!({
            "field": k.spec().to_string(),
            "function": describe(&sel),
            "family": family,
            "a": a,
            "b": b,
            "prediction": kind,
            "value": value,
            "case_label": case.label,
            "oracle": oracle,
            "consistent": case.admits(oracle),
        }))?,
        Format::Csv => {
            writeln!(out.sink, "a,b,prediction,value,case_label,oracle")?;
            writeln!(out.sink, "{a},{b},{kind},{value},{},{oracle}", case.label)?;
        }
        Format::Text => {
            writeln!(out.sink, "family: {family}")?;
            match case.prediction {
                Prediction::Exact(v) => writeln!(out.sink, "value: {v}")?,
                Prediction::AtMost(v) => writeln!(out.sink, "value: at most {v}")?,
            }
            writeln!(out.sink, "case_label: {}", case.label)?;
            writeln!(out.sink, "oracle: {oracle}")?;
        }
    }
    out.finish()?;
    if case.admits(oracle) {
        Ok(())
    } else {
        Err(Failure::Claims(format!("closed form {:?} disagrees with oracle {oracle}", case.prediction)))
    }
}

fn list_gamma_classes(k: &Field, common: &Common, mut out: Output) -> CliResult {
    let rows: Vec<Value> = if k.is_binary() {
        if k.n() < 3 {
            return Err(Failure::Core(Error::Unsupported("gamma classes need 2^n with n >= 3".into())));
        }
        (2..k.order())
            .map(|g| {
                let (t, ti) = gamma_trace_class(k, g);
                Ok(json!({
                    "gamma": g,
                    "trace": t,
                    "trace_inverse": ti,
                    "in_f8": k.n() % 3 == 0 && k.in_subfield(g, 3),
                    "uniformity": uniformity_inv1g_even(k, g)?,
                }))
            })
            .collect::<Result<_, Error>>()?
    } else if k.p() == 3 && k.n() >= 2 {
        (2..k.order())
            .map(|g| {
                let c = p3_conjecture(k, g)?;
                Ok(json!({ "gamma": g, "conjectured_uniformity": c.value(), "case_label": c.label }))
            })
            .collect::<Result<_, Error>>()?
    } else {
        return Err(Failure::Core(Error::Unsupported(format!(
            "gamma classes are defined for p = 2 and p = 3, got {k}"
        ))));
    };
    match common.format {
        Format::Json => out.json(&json!({ "field": k.spec().to_string(), "gammas": rows }))?,
        Format::Csv | Format::Text => {
            let keys: Vec<String> = rows[0].as_object().map(|o| o.keys().cloned().collect()).unwrap_or_default();
            let sep = if common.format == Format::Csv { "," } else { " " };
            writeln!(out.sink, "{}", keys.join(sep))?;
            for r in &rows {
                let cells: Vec<String> = keys
                    .iter()
                    .map(|key| match &r[key] {
                        Value::String(s) => s.clone(),
                        v => v.to_string(),
                    })
                    .collect();
                writeln!(out.sink, "{}", cells.join(sep))?;
            }
        }
    }
    out.finish()
}

fn emit_report(common: &Common, r: &VerificationReport) -> CliResult {
    let mut out = Output::open(common)?;
    match common.format {
        Format::Json | Format::Csv => out.json(&r.to_json())?,
        Format::Text => write!(out.sink, "{}", r.render_text())?,
    }
    out.finish()?;
    match r.status {
        Status::Fail => Err(Failure::Claims(format!("{}: claim failure", r.experiment))),
        Status::Warn => {
            eprintln!("warning: {} failed outside its established range", r.experiment);
            Ok(())
        }
        Status::Pass => Ok(()),
    }
}

fn experiment_options(common: &Common, all: bool) -> ExperimentOptions {
    ExperimentOptions {
        workers: None,
        fbct: fbct_options(common),
        all_counterexamples: all,
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Fbct { common, func, engine, no_orbit_reduction, nontrivial_only } => {
            with_workers(&common, || cmd_fbct(&common, &func, engine, no_orbit_reduction, nontrivial_only))
        }
        Command::Spectrum { common, func, scope } => with_workers(&common, || cmd_spectrum(&common, &func, scope)),
        Command::Ddt { common, func } => with_workers(&common, || cmd_ddt(&common, &func)),
        Command::Closedform { common, func, a, b, list_gamma_classes } => {
            cmd_closedform(&common, &func, a, b, list_gamma_classes)
        }
        Command::Verify { common, experiment, field, gamma, limit, all_counterexamples, list } => {
            if list {
                for id in EXPERIMENT_IDS {
                    println!("experiment: {id}");
                }
                for (claim, exp) in COVERAGE {
                    println!("covers: {claim} -> {exp}");
                }
                return Ok(());
            }
            let id = experiment.ok_or_else(|| Failure::Usage("verify needs --experiment (see --list)".into()))?;
            let req = ExperimentRequest {
                field: parse_field(field.as_deref())?,
                gamma: gamma.map(|g| g as Elem),
                limit,
            };
            let opts = experiment_options(&common, all_counterexamples);
            let r = with_workers(&common, || Ok(run_experiment(&id, &req, &opts)?))?;
            emit_report(&common, &r)
        }
        Command::Sweep { common, limit, all_counterexamples } => {
            let opts = experiment_options(&common, all_counterexamples);
            let r = with_workers(&common, || Ok(sweep_odd_p(limit, &opts)?))?;
            emit_report(&common, &r)
        }
    }
}

fn with_workers<T: Send>(common: &Common, op: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    run_with_workers(common.workers, op)?
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(Error::Io(e))) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Core(e) => eprintln!("error: {e}"),
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Claims(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(exit_code(&f))
        }
    }
}
