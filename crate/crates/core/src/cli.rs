//! The `mfair` command line.
//!
//! Exit codes: 0 when the command succeeds and every requested property
//! holds, 1 when a property fails, 2 on bad input, 3 when an enumeration
//! budget is exceeded.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::audits::{
    check_gradual, fuzz, run_impossibility_executor, ExecutorReport, FuzzConfig, CHAIN_BROKEN,
};
use crate::error::Error;
use crate::exchange::ExchangeGraph;
use crate::fairness::{
    classify_welfare, is_ef1, is_locally_efficient, is_mms, is_pareto_optimal_fast,
    is_pareto_optimal_oracle, mms_profile, FairnessVerdict,
};
use crate::fixtures::presets;
use crate::instances::{count_assignments, Allocation, Instance, DEFAULT_ENUMERATION_BUDGET};
use crate::mechanisms::{self, Mechanism};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY_FAILS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "mfair",
    version,
    about = "Fair allocation under matroid-rank valuations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a mechanism and print the allocation, values and Nash welfare.
    Solve {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "pe")]
        mechanism: String,
        #[arg(long)]
        json: bool,
    },
    /// Check fairness and efficiency of an allocation or a mechanism's output.
    Audit {
        #[command(flatten)]
        source: Source,
        /// Allocation file; when absent the mechanism's output is audited.
        #[arg(long)]
        allocation: Option<PathBuf>,
        #[arg(long, default_value = "pe")]
        mechanism: String,
        #[arg(
            long,
            value_enum,
            value_delimiter = ',',
            default_value = "ef1,mms,po,local"
        )]
        properties: Vec<Property>,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
        #[arg(long)]
        json: bool,
    },
    /// Search seeded random instances for deviations and audit failures.
    Fuzz {
        #[arg(long, default_value = "pe")]
        mechanism: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 3)]
        coalition: usize,
        #[arg(long)]
        json: bool,
    },
    /// Check the gradualness conditions at one profile.
    Gradual {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "pe")]
        mechanism: String,
        /// Largest number of supersets tried per agent.
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Replay the six-good impossibility argument against a mechanism.
    ReproImpossibility {
        #[arg(long, default_value = "pe")]
        mechanism: String,
        #[arg(long)]
        json: bool,
    },
    /// Print every agent's maximin share.
    Mms {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
        #[arg(long)]
        json: bool,
    },
    /// Print the exchange graph of an allocation as Graphviz DOT.
    Graph {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        allocation: Option<PathBuf>,
        #[arg(long, default_value = "pe")]
        mechanism: String,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Instance JSON file.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Built-in instance: thm4, thm4-wstar, triangle, uniform-pair, empty.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Property {
    Ef1,
    Mms,
    Po,
    Local,
    Welfare,
}

/// Failure that ends a command with a specific exit code.
struct Exit {
    code: i32,
    message: String,
}

impl From<Error> for Exit {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Capability { .. } => EXIT_BUDGET,
            Error::Internal(_) | Error::NotParetoEfficient { .. } => EXIT_PROPERTY_FAILS,
            Error::Input(_) | Error::Precondition(_) | Error::UnsupportedKind(_) => EXIT_INPUT,
        };
        Exit {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> Exit {
    Exit {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

type Outcome = Result<(i32, String), Exit>;

/// Parses `args` (including the program name), runs the command, and writes
/// its report to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_INPUT;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(cli.command) {
        Ok((code, text)) => {
            let _ = out.write_all(text.as_bytes());
            code
        }
        Err(Exit { code, message }) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

fn execute(command: Command) -> Outcome {
    match command {
        Command::Solve {
            source,
            mechanism,
            json,
        } => solve(&load(&source)?, &mechanism, json),
        Command::Audit {
            source,
            allocation,
            mechanism,
            properties,
            budget,
            json,
        } => {
            let inst = load(&source)?;
            let a = allocation_for(&inst, allocation.as_ref(), &mechanism)?;
            audit(&inst, &a, &properties, budget, json)
        }
        Command::Fuzz {
            mechanism,
            seed,
            trials,
            coalition,
            json,
        } => {
            let f = mechanisms::by_name(&mechanism, 4)?;
            let cfg = FuzzConfig {
                trials,
                seed,
                max_coalition: coalition,
                ..FuzzConfig::default()
            };
            let report = fuzz(&f, &cfg)?;
            let code = if report.finding.is_some() {
                EXIT_PROPERTY_FAILS
            } else {
                EXIT_OK
            };
            let text = if json {
                to_json(&report)
            } else {
                match &report.finding {
                    None => format!("no deviation in {trials} trials (seed {seed})\n"),
                    Some(found) => format!(
                        "{} fails {} in trial {} (seed {seed})\n{}\n",
                        report.mechanism,
                        found.check,
                        found.trial,
                        serde_json::to_string(found).expect("finding serializes")
                    ),
                }
            };
            Ok((code, text))
        }
        Command::Gradual {
            source,
            mechanism,
            budget,
            seed,
            json,
        } => {
            let inst = load(&source)?;
            let f = mechanisms::by_name(&mechanism, inst.n())?;
            let v = check_gradual(&f, &inst, budget, seed)?;
            let code = if v.holds {
                EXIT_OK
            } else {
                EXIT_PROPERTY_FAILS
            };
            Ok((code, if json { to_json(&v) } else { verdict_line(&v) }))
        }
        Command::ReproImpossibility { mechanism, json } => {
            let f = mechanisms::by_name(&mechanism, 2)?;
            let report = run_impossibility_executor(&f)?;
            let code = if report.violated == CHAIN_BROKEN {
                EXIT_PROPERTY_FAILS
            } else {
                EXIT_OK
            };
            Ok((
                code,
                if json {
                    to_json(&report)
                } else {
                    executor_text(&report)
                },
            ))
        }
        Command::Mms {
            source,
            budget,
            json,
        } => {
            let inst = load(&source)?;
            let p = mms_profile(&inst, budget)?;
            let text = if json {
                to_json(&p)
            } else {
                format!("mms shares: {}\n", tuple(&p.shares))
            };
            Ok((EXIT_OK, text))
        }
        Command::Graph {
            source,
            allocation,
            mechanism,
        } => {
            let inst = load(&source)?;
            let a = allocation_for(&inst, allocation.as_ref(), &mechanism)?;
            match ExchangeGraph::build(&inst, &a) {
                Ok(g) => Ok((EXIT_OK, g.to_dot())),
                Err(Error::Precondition(msg)) => Err(Exit {
                    code: EXIT_PROPERTY_FAILS,
                    message: msg,
                }),
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn load(source: &Source) -> Result<Instance, Exit> {
    match (&source.instance, &source.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))
        }
        (None, Some(name)) => presets::by_name(name).ok_or_else(|| {
            input_error(format!(
                "unknown preset {name:?}; expected one of {}",
                presets::NAMES.join(", ")
            ))
        }),
        (None, None) => Err(input_error("either --instance or --preset is required")),
    }
}

fn allocation_for(
    inst: &Instance,
    path: Option<&PathBuf>,
    mechanism: &str,
) -> Result<Allocation, Exit> {
    let a = match path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<Allocation>(&text)
                .map_err(|e| input_error(format!("{}: {e}", path.display())))?
        }
        None => mechanisms::by_name(mechanism, inst.n())?.allocate(inst)?,
    };
    a.check_for(inst)?;
    Allocation::new(a.bundles.clone())?;
    Ok(a)
}

fn solve(inst: &Instance, mechanism: &str, json: bool) -> Outcome {
    let f = mechanisms::by_name(mechanism, inst.n())?;
    let a = f.allocate(inst)?;
    let values = inst.values(&a)?;
    let text = if json {
        to_json(&json!({
            "mechanism": f.name(),
            "allocation": a,
            "values": values,
            "nsw": values.nsw(),
        }))
    } else {
        format!(
            "mechanism: {}\nallocation: {}\nvalues: {}\nnsw: {:.7}\n",
            f.name(),
            bundles(&a),
            tuple(&values.0),
            values.nsw()
        )
    };
    Ok((EXIT_OK, text))
}

fn audit(
    inst: &Instance,
    a: &Allocation,
    properties: &[Property],
    budget: u128,
    json: bool,
) -> Outcome {
    let mut verdicts = Vec::new();
    let mut welfare = None;
    for p in properties {
        match p {
            Property::Ef1 => verdicts.push(is_ef1(inst, a)?),
            Property::Mms => verdicts.push(is_mms(inst, a, budget)?),
            Property::Po => {
                let fits = count_assignments(inst.n() + 1, inst.m()).is_some_and(|c| c <= budget);
                if fits {
                    verdicts.push(is_pareto_optimal_oracle(inst, a, budget)?);
                } else {
                    let v = is_pareto_optimal_fast(inst, a)?;
                    verdicts.push(
                        v.with_note("decided by growth paths; enumeration exceeds the budget"),
                    );
                }
            }
            Property::Local => verdicts.push(is_locally_efficient(inst, a)?),
            Property::Welfare => {
                let c = classify_welfare(inst, a, budget)?;
                let mut v = FairnessVerdict::pass("Lorenz-dominating");
                v.holds = c.is_lorenz_dominating;
                welfare = Some(c);
                verdicts.push(v.with_note(format!(
                    "nash-optimal {}, leximin {}, Lorenz-dominating {}",
                    c.is_nash_optimal, c.is_leximin, c.is_lorenz_dominating
                )));
            }
        }
    }
    let all = verdicts.iter().all(|v| v.holds);
    let values = inst.values(a)?;
    let text = if json {
        to_json(&json!({
            "allocation": a,
            "values": values,
            "verdicts": verdicts,
            "welfare": welfare,
        }))
    } else {
        let mut s = format!("allocation: {}\nvalues: {}\n", bundles(a), tuple(&values.0));
        for v in &verdicts {
            s.push_str(&verdict_line(v));
        }
        s
    };
    Ok((if all { EXIT_OK } else { EXIT_PROPERTY_FAILS }, text))
}

fn verdict_line(v: &FairnessVerdict) -> String {
    let mut s = format!("{} {}", if v.holds { "✓" } else { "✗" }, v.property);
    if let Some(w) = &v.witness {
        let _ = write!(
            s,
            "  witness {}",
            serde_json::to_string(w).expect("witness serializes")
        );
    }
    if let Some(note) = &v.note {
        let _ = write!(s, "  ({note})");
    }
    s.push('\n');
    s
}

fn executor_text(r: &ExecutorReport) -> String {
    let mut s = format!("mechanism: {}\n", r.mechanism);
    for (k, step) in r.steps.iter().enumerate() {
        let values = step
            .profile
            .values(&step.allocation)
            .expect("recorded allocation fits its profile");
        let _ = writeln!(s, "step {}: {}", k + 1, step.label);
        let _ = writeln!(
            s,
            "  allocation {}  values {}",
            bundles(&step.allocation),
            tuple(&values.0)
        );
        for v in &step.checks {
            s.push_str("  ");
            s.push_str(&verdict_line(v));
        }
    }
    let _ = writeln!(s, "violated: {}", r.violated);
    let _ = writeln!(
        s,
        "witness: {}",
        serde_json::to_string(&r.witness).expect("witness serializes")
    );
    s
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn tuple(xs: &[usize]) -> String {
    format!(
        "({})",
        xs.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    )
}

fn bundles(a: &Allocation) -> String {
    format!(
        "[{}]",
        a.bundles
            .iter()
            .map(|b| b.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    )
}
