mod report;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{mpsc, Arc};
use std::time::Duration;

use clap::Parser;

use stormlet::bisimulation::check_minimized;
use stormlet::builder::{build_explicit, build_model, BuildError, BuildNumber, BuildOptions};
use stormlet::checker::{check, inline_program_identifiers, state_set, CheckError, CheckNumber, CheckResult, CheckSettings, SolverKind};
use stormlet::model::Model;
use stormlet::number::{parse_rational, Rational};
use stormlet::parametric::{instantiate, parse_point, region_lifting, solution_function, RationalFunction, Region};
use stormlet::prism::{parse_bindings, parse_explicit, parse_program, Program};
use stormlet::property::{desugar, parse_properties, Operator, PathFormula, Property};

use report::{Outcome, Report};

/// Explicit-state probabilistic model checker.
#[derive(Debug, Parser)]
#[command(name = "stormlet", version)]
struct Args {
    /// PRISM model file.
    #[arg(long, value_name = "FILE", conflicts_with = "explicit")]
    prism: Option<PathBuf>,
    /// Explicit transition and label files.
    #[arg(long, num_args = 2, value_names = ["TRA", "LAB"])]
    explicit: Option<Vec<PathBuf>>,
    /// State rewards for an explicit model.
    #[arg(long, value_name = "REW", requires = "explicit")]
    staterew: Option<PathBuf>,
    /// Property file, or properties given inline.
    #[arg(long, value_name = "FILE|TEXT")]
    prop: String,
    /// Values for undefined constants, e.g. `N=16,MAX=2`.
    #[arg(long, default_value = "")]
    constants: String,
    /// Equation solver: vi, ii, ovi, exact, elimination, pi or rs.
    #[arg(long, value_name = "SOLVER")]
    eqsolver: Option<String>,
    /// Use interval iteration instead of plain value iteration.
    #[arg(long)]
    sound: bool,
    /// Compute with exact rational numbers.
    #[arg(long)]
    exact: bool,
    /// Convergence precision of iterative solvers.
    #[arg(long, value_name = "EPS", default_value = "1e-6")]
    precision: String,
    /// Absolute instead of relative convergence criterion.
    #[arg(long)]
    absolute: bool,
    /// In-place value iteration updates.
    #[arg(long)]
    gauss_seidel: bool,
    /// Check on the bisimulation quotient.
    #[arg(long)]
    bisim: bool,
    /// Keep undefined constants as parameters and report solution functions.
    #[arg(long)]
    parametric: bool,
    /// Instantiate parameters at a point, e.g. `p=1/2,q=1/3`.
    #[arg(long, requires = "parametric", conflicts_with = "region")]
    point: Option<String>,
    /// Bound the result over a region, e.g. `0.3<=p<=0.6`.
    #[arg(long, requires = "parametric")]
    region: Option<String>,
    /// Per-property time limit in seconds.
    #[arg(long, value_name = "SECONDS")]
    timeout: Option<f64>,
    /// Add self-loops to deadlock states.
    #[arg(long)]
    fix_deadlocks: bool,
    /// Model representation; only `sparse` exists.
    #[arg(long, default_value = "sparse")]
    engine: String,
    /// Emit a JSON results object instead of the text report.
    #[arg(long)]
    json: bool,
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Failure {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }

    fn unsupported(message: impl ToString) -> Failure {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }

    fn timeout(seconds: f64) -> Failure {
        Failure {
            code: 3,
            message: format!("timeout after {seconds} s"),
        }
    }
}

impl From<CheckError> for Failure {
    fn from(e: CheckError) -> Failure {
        if e.is_unsupported() {
            Failure::unsupported(e)
        } else {
            Failure::input(e)
        }
    }
}

impl From<BuildError> for Failure {
    fn from(e: BuildError) -> Failure {
        Failure::input(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let mut report = Report::new(args.json);
    let code = match run(&args, &mut report) {
        Ok(()) => 0,
        Err(f) => {
            report.flush();
            eprintln!("error: {}", f.message);
            f.code
        }
    };
    report.finish();
    ExitCode::from(code)
}

fn settings(args: &Args) -> Result<CheckSettings, Failure> {
    let mut settings = if args.exact {
        CheckSettings::exact()
    } else {
        CheckSettings::default()
    };
    if let Some(name) = &args.eqsolver {
        settings.solver = SolverKind::from_name(name).ok_or_else(|| {
            Failure::input(format!(
                "unknown equation solver `{name}`; choose one of vi, ii, ovi, exact, elimination, pi, rs"
            ))
        })?;
    }
    settings.sound = args.sound;
    settings.relative = !args.absolute;
    settings.gauss_seidel = args.gauss_seidel;
    settings.precision = parse_rational(&args.precision)
        .map_err(|e| Failure::input(format!("invalid precision `{}`: {e}", args.precision)))?;
    settings.validate()?;
    Ok(settings)
}

enum Input {
    Prism(Program),
    Explicit(stormlet::prism::ExplicitModel),
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn load_input(args: &Args) -> Result<Input, Failure> {
    if let Some(path) = &args.prism {
        let program = parse_program(&read(path)?).map_err(|e| Failure::input(format!("{}:{e}", path.display())))?;
        Ok(Input::Prism(program))
    } else if let Some(files) = &args.explicit {
        let rew = args.staterew.as_deref().map(read).transpose()?;
        let explicit = parse_explicit(&read(&files[0])?, &read(&files[1])?, rew.as_deref()).map_err(Failure::input)?;
        Ok(Input::Explicit(explicit))
    } else {
        Err(Failure::input("no model given; use --prism or --explicit"))
    }
}

fn load_properties(args: &Args, program: Option<&Program>) -> Result<Vec<Property>, Failure> {
    let path = Path::new(&args.prop);
    let text = if path.is_file() { read(path)? } else { args.prop.clone() };
    let properties = parse_properties(&text).map_err(|e| {
        if e.is_unsupported() {
            Failure::unsupported(e)
        } else {
            Failure::input(format!("property {e}"))
        }
    })?;
    if properties.is_empty() {
        return Err(Failure::input("no properties given"));
    }
    Ok(match program {
        Some(p) => properties.iter().map(|q| inline_program_identifiers(q, p)).collect(),
        None => properties,
    })
}

fn run(args: &Args, report: &mut Report) -> Result<(), Failure> {
    if args.engine != "sparse" {
        return Err(Failure::unsupported(format!(
            "engine `{}` is not available; the only engine is `sparse`",
            args.engine
        )));
    }
    if let Some(t) = args.timeout {
        if !(t > 0.0) {
            return Err(Failure::input("--timeout must be positive"));
        }
    }
    let input = load_input(args)?;
    let program = match &input {
        Input::Prism(p) => Some(p),
        Input::Explicit(_) => None,
    };
    let properties = load_properties(args, program)?;
    if args.parametric {
        return run_parametric(args, &input, &properties, report);
    }
    let settings = settings(args)?;
    if settings.exact {
        let model: Model<Rational> = build(args, &input, BTreeSet::new())?;
        check_all(args, model, &properties, &settings, report)
    } else {
        let model: Model<f64> = build(args, &input, BTreeSet::new())?;
        check_all(args, model, &properties, &settings, report)
    }
}

fn build<N: BuildNumber>(args: &Args, input: &Input, parameters: BTreeSet<String>) -> Result<Model<N>, Failure> {
    match input {
        Input::Prism(program) => {
            let options = BuildOptions {
                fix_deadlocks: args.fix_deadlocks,
                constants: parse_bindings(&args.constants).map_err(Failure::input)?,
                parameters,
            };
            Ok(build_model(program, &options)?)
        }
        Input::Explicit(explicit) => {
            if !args.constants.is_empty() {
                log::warn!("--constants has no effect on explicit models");
            }
            Ok(build_explicit(explicit, args.fix_deadlocks)?)
        }
    }
}

/// Runs `job` on a worker thread, giving up after the configured timeout.
fn with_timeout<T: Send + 'static>(
    timeout: Option<f64>,
    job: impl FnOnce() -> T + Send + 'static,
) -> Result<T, Failure> {
    let Some(seconds) = timeout else { return Ok(job()) };
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let _ = tx.send(job());
    });
    rx.recv_timeout(Duration::from_secs_f64(seconds))
        .map_err(|_| Failure::timeout(seconds))
}

fn check_all<N: CheckNumber>(
    args: &Args,
    model: Model<N>,
    properties: &[Property],
    settings: &CheckSettings,
    report: &mut Report,
) -> Result<(), Failure> {
    report.model(&model);
    let model = Arc::new(model);
    for property in properties {
        report.start(property);
        let (m, p, s, bisim) = (model.clone(), property.clone(), settings.clone(), args.bisim);
        let result: CheckResult<N> = with_timeout(args.timeout, move || {
            if bisim {
                check_minimized(&m, &p, &s)
            } else {
                check(&m, &p, &s)
            }
        })??;
        report.result(property, Outcome::from_result(&result));
    }
    Ok(())
}

/// Probability of `φ1 U φ2` with an optional complement, as used by the
/// parametric analyses.
fn parametric_reachability(property: &Property) -> Result<(Property, bool), Failure> {
    let p = desugar(property);
    match (&p.operator, &p.path) {
        (Operator::Probability, PathFormula::Until { bound: None, .. }) if p.bound.is_none() => {
            let complement = p.complement;
            Ok((p, complement))
        }
        _ => Err(Failure::unsupported(
            "parametric analysis supports unbounded P=? reachability properties only",
        )),
    }
}

fn run_parametric(args: &Args, input: &Input, properties: &[Property], report: &mut Report) -> Result<(), Failure> {
    let Input::Prism(program) = input else {
        return Err(Failure::unsupported("parametric analysis needs a PRISM model"));
    };
    let bound = parse_bindings(&args.constants).map_err(Failure::input)?;
    let parameters: BTreeSet<String> = program
        .constants
        .iter()
        .filter(|c| c.value.is_none() && !bound.contains_key(&c.name))
        .map(|c| c.name.clone())
        .collect();
    let model: Model<RationalFunction> = build(args, input, parameters)?;
    report.model(&model);
    let point = args.point.as_deref().map(parse_point).transpose().map_err(Failure::input)?;
    let region = args.region.as_deref().map(Region::parse).transpose().map_err(Failure::input)?;
    let model = Arc::new(model);
    for property in properties {
        report.start(property);
        let (reach, complement) = parametric_reachability(property)?;
        let PathFormula::Until { left, right, .. } = &reach.path else { unreachable!() };
        let phi1 = state_set(&model, left)?;
        let phi2 = state_set(&model, right)?;
        let (m, point, region) = (model.clone(), point.clone(), region.clone());
        let outcome = with_timeout(args.timeout, move || -> Result<Outcome, Failure> {
            let one = <Rational as stormlet::number::Field>::one();
            if let Some(point) = point {
                let concrete = instantiate(&m, &point).map_err(Failure::input)?;
                let mut plain = reach.clone();
                plain.complement = false;
                let result = check(&concrete, &plain, &CheckSettings::exact())?;
                let value = result.value_at_initial().finite().expect("probability").clone();
                Ok(Outcome::exact(if complement { one - value } else { value }))
            } else if let Some(region) = region {
                let (lo, hi) = region_lifting(&m, &region, &phi1, &phi2).map_err(Failure::input)?;
                let (lo, hi) = if complement { (one.clone() - hi, one - lo) } else { (lo, hi) };
                Ok(Outcome::Bounds(lo, hi))
            } else {
                let f = solution_function(&m, &phi1, &phi2).map_err(Failure::input)?;
                let f = if complement { RationalFunction::constant(one) - f } else { f };
                Ok(Outcome::Function(f.canonical_text()))
            }
        })??;
        report.result(property, outcome);
    }
    Ok(())
}
