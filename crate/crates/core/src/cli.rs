//! Command-line front end.
//!
//! Exit codes: 0 success or positive verdict, 1 negative verdict (a witness
//! or counterexample was found, a check failed), 2 usage or input error,
//! 3 numerical failure.
//!
//! Subcommands that produce a field (`grad`, `div`, `canonicalize`,
//! `decompose`, `construct-potential`, `laplacian`, `curl`, `qstar`) always
//! write JSON documents so their output can be fed back as input. The other
//! subcommands print `key: value` lines by default and JSON with
//! `--format json`. Text numbers use 12 decimal places.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{
    check_conservative, check_curl_free, check_finitely_conservative, check_optimality_preserving,
    construct_potential_shortest_path, is_action_independent, q_star, ConservativeOptions,
    ConservativenessKind, OptimalityOptions, OptimalityOutcome, Witness, DEFAULT_FINITE_HORIZON,
    DEFAULT_GAP_TOLERANCE, DEFAULT_LASSO_CYCLE, DEFAULT_LASSO_PREFIX,
};
use crate::decompose::{Decomposer, Normalization};
use crate::error::Error;
use crate::fields::{Potential, Reward, Tolerance};
use crate::graph::{
    topology_report, validate, GraphSpec, TransitionGraph, DEFAULT_DIAMOND_CAP,
    DEFAULT_DYNAMICS_BUDGET,
};
use crate::io::{
    parse, to_json, DynamicsFile, GraphFile, LassoFile, PotentialFile, RewardFile, TrajectoryFile,
    TransitionRef,
};
use crate::operators::{
    divergence, grad, laplacian_apply, laplacian_matrix, line_integral_finite, line_integral_lasso,
    max_abs_curl,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "reward-calculus",
    version,
    about = "Discounted calculus on MDP transition graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Absolute comparison tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_abs: f64,

    /// Relative comparison tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_rel: f64,

    /// Output format for verdicts and scalars.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write output to this file instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Worker threads for the optimality search.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct GraphArg {
    #[arg(long)]
    graph: PathBuf,
}

#[derive(Debug, Args)]
struct GraphReward {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    reward: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Report every violated graph invariant.
    Validate(GraphArg),
    /// Completeness, distinguishing actions, diamond-completeness, loops and reachability.
    Topology(GraphArg),
    /// Gradient of a potential, as a reward file.
    Grad {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        potential: PathBuf,
    },
    /// Line integral over a finite trajectory or a lasso.
    Integrate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        reward: PathBuf,
        #[arg(long, conflicts_with = "lasso", required_unless_present = "lasso")]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        lasso: Option<PathBuf>,
    },
    /// Curl over every diamond.
    Curl {
        #[command(flatten)]
        input: GraphReward,
        /// Maximum number of diamonds to materialize.
        #[arg(long, default_value_t = DEFAULT_DIAMOND_CAP)]
        cap: u128,
        /// Only report the largest absolute curl (streaming, no cap).
        #[arg(long)]
        max_only: bool,
    },
    /// Divergence of a reward, as a potential file.
    Div(GraphReward),
    /// Laplacian matrix, or the Laplacian applied to `--potential`.
    Laplacian {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        potential: Option<PathBuf>,
    },
    /// Split a reward into divergence-free and gradient parts.
    Decompose {
        #[command(flatten)]
        input: GraphReward,
        /// Also write the potential as a potential file.
        #[arg(long)]
        potential_out: Option<PathBuf>,
        /// Also write the divergence-free part as a reward file.
        #[arg(long)]
        reward_out: Option<PathBuf>,
    },
    /// Divergence-free representative of a reward's shaping class.
    Canonicalize(GraphReward),
    /// Distance between the canonical forms of two rewards.
    Distance {
        #[arg(long)]
        graph: PathBuf,
        /// Exactly two reward files.
        #[arg(long, num_args = 1, required = true)]
        reward: Vec<PathBuf>,
        /// Scale each canonical reward to unit norm first.
        #[arg(long)]
        normalize: bool,
    },
    /// Verdict-style checks.
    Check {
        kind: CheckKind,
        #[command(flatten)]
        input: GraphReward,
        /// Horizon of the finite-trajectory comparison.
        #[arg(long, default_value_t = DEFAULT_FINITE_HORIZON)]
        max_len: usize,
        /// Number of dynamics to try in the optimality search.
        #[arg(long, default_value_t = DEFAULT_DYNAMICS_BUDGET)]
        budget: u128,
        #[arg(long, default_value_t = DEFAULT_LASSO_PREFIX)]
        max_prefix: usize,
        #[arg(long, default_value_t = DEFAULT_LASSO_CYCLE)]
        max_cycle: usize,
        /// Write a counterexample's dynamics to this file.
        #[arg(long)]
        dynamics_out: Option<PathBuf>,
        /// Write the certifying potential to this file.
        #[arg(long)]
        potential_out: Option<PathBuf>,
    },
    /// Potential built from shortest trajectories out of a state with a self-loop.
    ConstructPotential {
        #[command(flatten)]
        input: GraphReward,
        #[arg(long)]
        from: String,
    },
    /// Optimal action values under deterministic dynamics.
    Qstar {
        #[command(flatten)]
        input: GraphReward,
        #[arg(long)]
        dynamics: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckKind {
    Conservative,
    FinitelyConservative,
    CurlFree,
    ActionIndependent,
    Optimality,
}

/// Result of one CLI invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_) => Failure::Numerical(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type Outcome = std::result::Result<(i32, String), Failure>;

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run<I, T>(argv: I) -> CliOutput
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                CliOutput {
                    code: EXIT_USAGE,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                CliOutput {
                    code: EXIT_OK,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    let common = &cli.common;
    let result = if !(common.tol_abs > 0.0 && common.tol_rel > 0.0) {
        Err(Failure::Usage("tolerances must be positive".into()))
    } else if common.threads == 0 {
        Err(Failure::Usage("--threads must be positive".into()))
    } else {
        dispatch(&cli.command, common)
    };
    let warning = match (&cli.command, &result) {
        (Command::ConstructPotential { .. }, Ok((EXIT_NEGATIVE, _))) => {
            "warning: the gradient of the constructed potential does not reproduce the reward; \
             the reward is not finitely conservative\n"
                .to_string()
        }
        _ => String::new(),
    };
    match result {
        Ok((code, text)) => match &common.output {
            Some(path) => match fs::write(path, &text) {
                Ok(()) => CliOutput {
                    code,
                    stdout: String::new(),
                    stderr: warning,
                },
                Err(e) => CliOutput {
                    code: EXIT_USAGE,
                    stdout: String::new(),
                    stderr: format!("error: cannot write {}: {e}\n", path.display()),
                },
            },
            None => CliOutput {
                code,
                stdout: text,
                stderr: warning,
            },
        },
        Err(Failure::Usage(msg)) => CliOutput {
            code: EXIT_USAGE,
            stdout: String::new(),
            stderr: format!("error: {msg}\n"),
        },
        Err(Failure::Numerical(msg)) => CliOutput {
            code: EXIT_NUMERICAL,
            stdout: String::new(),
            stderr: format!("error: {msg}\n"),
        },
    }
}

/// Fixed 12-decimal rendering; negative zero prints as zero.
pub fn format_number(x: f64) -> String {
    let s = format!("{x:.12}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> std::result::Result<T, Failure> {
    parse(&read(path)?, &path.display().to_string()).map_err(Failure::Usage)
}

fn in_file(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| match e {
        Error::Numerical(_) => Failure::Numerical(e.to_string()),
        other => Failure::Usage(format!("{}: {other}", path.display())),
    }
}

fn load_graph(path: &Path) -> std::result::Result<TransitionGraph, Failure> {
    let file: GraphFile = load(path)?;
    GraphSpec::from(file).build().map_err(in_file(path))
}

fn load_reward(graph: &TransitionGraph, path: &Path) -> std::result::Result<Reward, Failure> {
    let file: RewardFile = load(path)?;
    file.to_reward(graph).map_err(in_file(path))
}

fn load_potential(graph: &TransitionGraph, path: &Path) -> std::result::Result<Potential, Failure> {
    let file: PotentialFile = load(path)?;
    file.to_potential(graph).map_err(in_file(path))
}

fn write_side_file(path: &Path, text: &str) -> std::result::Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Renders an ordered list of `(key, value)` pairs as text lines or a JSON object.
fn render(format: Format, entries: Vec<(&str, Value)>) -> String {
    match format {
        Format::Json => {
            let mut map = serde_json::Map::new();
            for (k, v) in entries {
                map.insert(k.to_string(), v);
            }
            to_json(&Value::Object(map))
        }
        Format::Text => {
            let mut out = String::new();
            for (k, v) in entries {
                text_value(&mut out, k, &v, 0);
            }
            out
        }
    }
}

fn text_scalar(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map_or_else(
            || n.to_string(),
            |x| {
                if n.is_f64() {
                    format_number(x)
                } else {
                    n.to_string()
                }
            },
        ),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Null => "none".to_string(),
        other => other.to_string(),
    }
}

fn text_value(out: &mut String, key: &str, v: &Value, depth: usize) {
    let indent = "  ".repeat(depth);
    match v {
        Value::Object(map) => {
            out.push_str(&format!("{indent}{key}:\n"));
            for (k, inner) in map {
                text_value(out, k, inner, depth + 1);
            }
        }
        Value::Array(items) => {
            out.push_str(&format!("{indent}{key}:\n"));
            for (i, inner) in items.iter().enumerate() {
                text_value(out, &i.to_string(), inner, depth + 1);
            }
        }
        scalar => out.push_str(&format!("{indent}{key}: {}\n", text_scalar(scalar))),
    }
}

fn json_of<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("documents serialize")
}

fn dispatch(command: &Command, common: &Common) -> Outcome {
    let tol = Tolerance::new(common.tol_abs, common.tol_rel);
    let format = common.format;
    match command {
        Command::Validate(GraphArg { graph }) => {
            let file: GraphFile = load(graph)?;
            let violations = validate(&GraphSpec::from(file));
            let code = if violations.is_empty() {
                EXIT_OK
            } else {
                EXIT_NEGATIVE
            };
            let listed: Vec<Value> = violations
                .iter()
                .map(|v| Value::String(v.to_string()))
                .collect();
            Ok((
                code,
                render(
                    format,
                    vec![
                        ("valid", Value::Bool(violations.is_empty())),
                        ("violations", Value::Array(listed)),
                    ],
                ),
            ))
        }
        Command::Topology(GraphArg { graph }) => {
            let g = load_graph(graph)?;
            let report = topology_report(&g);
            Ok((
                EXIT_OK,
                render(
                    format,
                    vec![
                        ("is_complete", Value::Bool(report.is_complete)),
                        (
                            "has_distinguishing_actions",
                            Value::Bool(report.has_distinguishing_actions),
                        ),
                        (
                            "is_diamond_complete",
                            Value::Bool(report.is_diamond_complete),
                        ),
                        (
                            "every_state_in_loop",
                            Value::Bool(report.every_state_in_loop),
                        ),
                        ("reachable_from", json_of(&report.reachable_from)),
                    ],
                ),
            ))
        }
        Command::Grad { graph, potential } => {
            let g = load_graph(graph)?;
            let p = load_potential(&g, potential)?;
            let r = grad(&g, &p)?;
            Ok((EXIT_OK, to_json(&RewardFile::from_reward(&g, &r))))
        }
        Command::Integrate {
            graph,
            reward,
            trajectory,
            lasso,
        } => {
            let g = load_graph(graph)?;
            let r = load_reward(&g, reward)?;
            let (kind, value) = match (trajectory, lasso) {
                (Some(path), _) => {
                    let file: TrajectoryFile = load(path)?;
                    let t = file.to_trajectory(&g).map_err(in_file(path))?;
                    ("finite", line_integral_finite(&g, &r, &t)?)
                }
                (None, Some(path)) => {
                    let file: LassoFile = load(path)?;
                    let l = file.to_lasso(&g).map_err(in_file(path))?;
                    ("lasso", line_integral_lasso(&g, &r, &l)?)
                }
                (None, None) => {
                    return Err(Failure::Usage(
                        "one of --trajectory or --lasso is required".into(),
                    ))
                }
            };
            Ok((
                EXIT_OK,
                render(
                    format,
                    vec![("kind", json!(kind)), ("integral", json!(value))],
                ),
            ))
        }
        Command::Curl {
            input,
            cap,
            max_only,
        } => {
            if *cap == 0 {
                return Err(Failure::Usage("--cap must be positive".into()));
            }
            let g = load_graph(&input.graph)?;
            let r = load_reward(&g, &input.reward)?;
            if *max_only {
                let (max, worst) = max_abs_curl(&g, &r)?;
                let worst = worst.map(|d| diamond_json(&g, &d.first, &d.second, None));
                return Ok((
                    EXIT_OK,
                    to_json(&json!({ "max_abs_curl": max, "diamond": worst })),
                ));
            }
            let field = crate::operators::curl(&g, &r, *cap)?;
            let entries: Vec<Value> = field
                .iter()
                .map(|(d, v)| diamond_json(&g, &d.first, &d.second, Some(v)))
                .collect();
            Ok((EXIT_OK, to_json(&entries)))
        }
        Command::Div(input) => {
            let g = load_graph(&input.graph)?;
            let r = load_reward(&g, &input.reward)?;
            let d = divergence(&g, &r)?;
            Ok((EXIT_OK, to_json(&PotentialFile::from_potential(&g, &d))))
        }
        Command::Laplacian { graph, potential } => {
            let g = load_graph(graph)?;
            if let Some(path) = potential {
                let p = load_potential(&g, path)?;
                let l = laplacian_apply(&g, &p)?;
                return Ok((EXIT_OK, to_json(&PotentialFile::from_potential(&g, &l))));
            }
            let m = laplacian_matrix(&g)?;
            let states: Vec<&str> = g.states().iter().map(|s| s.as_str()).collect();
            Ok((
                EXIT_OK,
                to_json(&json!({
                    "states": states,
                    "rows": m.rows(),
                    "rank": m.rank,
                    "smallest_singular_value": m.smallest_singular_value,
                    "largest_singular_value": m.largest_singular_value,
                    "invertible": m.invertible,
                })),
            ))
        }
        Command::Decompose {
            input,
            potential_out,
            reward_out,
        } => {
            let g = load_graph(&input.graph)?;
            let r = load_reward(&g, &input.reward)?;
            let d = Decomposer::new(&g)?.decompose(&r)?;
            let reward_file = RewardFile::from_reward(&g, &d.divergence_free);
            let potential_file = PotentialFile::from_potential(&g, &d.potential);
            if let Some(path) = potential_out {
                write_side_file(path, &to_json(&potential_file))?;
            }
            if let Some(path) = reward_out {
                write_side_file(path, &to_json(&reward_file))?;
            }
            Ok((
                EXIT_OK,
                to_json(&json!({
                    "divergence_free": reward_file,
                    "potential": potential_file,
                    "residuals": {
                        "reconstruction": d.reconstruction_residual,
                        "divergence": d.divergence_residual,
                    },
                    "laplacian_invertible": d.laplacian_invertible,
                })),
            ))
        }
        Command::Canonicalize(input) => {
            let g = load_graph(&input.graph)?;
            let r = load_reward(&g, &input.reward)?;
            let c = Decomposer::new(&g)?.canonicalize(&r)?;
            Ok((EXIT_OK, to_json(&RewardFile::from_reward(&g, &c))))
        }
        Command::Distance {
            graph,
            reward,
            normalize,
        } => {
            if reward.len() != 2 {
                return Err(Failure::Usage(format!(
                    "distance needs exactly two --reward files (got {})",
                    reward.len()
                )));
            }
            let g = load_graph(graph)?;
            let r1 = load_reward(&g, &reward[0])?;
            let r2 = load_reward(&g, &reward[1])?;
            let normalization = if *normalize {
                Normalization::UnitNorm
            } else {
                Normalization::None
            };
            let d = Decomposer::new(&g)?.shaping_distance(&r1, &r2, normalization)?;
            Ok((
                EXIT_OK,
                match format {
                    Format::Text => format!("{}\n", format_number(d)),
                    Format::Json => to_json(&json!({ "distance": d })),
                },
            ))
        }
        Command::Check {
            kind,
            input,
            max_len,
            budget,
            max_prefix,
            max_cycle,
            dynamics_out,
            potential_out,
        } => {
            if *max_len == 0 || *budget == 0 || *max_cycle == 0 {
                return Err(Failure::Usage(
                    "--max-len, --budget and --max-cycle must be positive".into(),
                ));
            }
            let g = load_graph(&input.graph)?;
            let r = load_reward(&g, &input.reward)?;
            run_check(
                &g,
                &r,
                *kind,
                CheckSettings {
                    tol,
                    max_len: *max_len,
                    budget: *budget,
                    max_prefix: *max_prefix,
                    max_cycle: *max_cycle,
                    threads: common.threads,
                    dynamics_out: dynamics_out.as_deref(),
                    potential_out: potential_out.as_deref(),
                },
                format,
            )
        }
        Command::ConstructPotential { input, from } => {
            let g = load_graph(&input.graph)?;
            let r = load_reward(&g, &input.reward)?;
            let root = g.require_state(from)?;
            let built = construct_potential_shortest_path(&g, &r, root, tol)?;
            let code = if built.reproduces_reward {
                EXIT_OK
            } else {
                EXIT_NEGATIVE
            };
            Ok((
                code,
                to_json(&PotentialFile::from_potential(&g, &built.potential)),
            ))
        }
        Command::Qstar { input, dynamics } => {
            let g = load_graph(&input.graph)?;
            let r = load_reward(&g, &input.reward)?;
            let file: DynamicsFile = load(dynamics)?;
            let d = file.to_dynamics(&g).map_err(in_file(dynamics))?;
            let q = q_star(&g, &d, &r)?;
            let mut values: Vec<Value> = Vec::new();
            for s in 0..g.num_states() {
                for (a, v) in q.available(s) {
                    values.push(json!({
                        "state": g.state(s).as_str(),
                        "action": g.action(a).as_str(),
                        "value": v,
                    }));
                }
            }
            Ok((
                EXIT_OK,
                to_json(&json!({ "q": values, "iterations": q.iterations })),
            ))
        }
    }
}

fn diamond_json(
    g: &TransitionGraph,
    first: &[usize; 2],
    second: &[usize; 2],
    value: Option<f64>,
) -> Value {
    let legs = |d: &[usize; 2]| -> Vec<TransitionRef> {
        d.iter().map(|&e| TransitionRef::of(g, e)).collect()
    };
    let mut obj = serde_json::Map::new();
    obj.insert("delta1".into(), json_of(&legs(first)));
    obj.insert("delta2".into(), json_of(&legs(second)));
    if let Some(v) = value {
        obj.insert("value".into(), json!(v));
    }
    Value::Object(obj)
}

struct CheckSettings<'a> {
    tol: Tolerance,
    max_len: usize,
    budget: u128,
    max_prefix: usize,
    max_cycle: usize,
    threads: usize,
    dynamics_out: Option<&'a Path>,
    potential_out: Option<&'a Path>,
}

fn witness_json(g: &TransitionGraph, witness: &Witness) -> Value {
    match witness {
        Witness::Finite(w) => json!({
            "kind": "finite",
            "first": TrajectoryFile::from_trajectory(g, &w.first),
            "second": TrajectoryFile::from_trajectory(g, &w.second),
            "first_integral": w.first_integral,
            "second_integral": w.second_integral,
        }),
        Witness::Lasso(w) => json!({
            "kind": "lasso",
            "first": LassoFile::from_lasso(g, &w.first),
            "second": LassoFile::from_lasso(g, &w.second),
            "first_integral": w.first_integral,
            "second_integral": w.second_integral,
        }),
    }
}

fn run_check(
    g: &TransitionGraph,
    r: &Reward,
    kind: CheckKind,
    settings: CheckSettings<'_>,
    format: Format,
) -> Outcome {
    let tol = settings.tol;
    match kind {
        CheckKind::Conservative => {
            let verdict = check_conservative(
                g,
                r,
                ConservativeOptions {
                    tolerance: tol,
                    max_prefix: settings.max_prefix,
                    max_cycle: settings.max_cycle,
                    finite_horizon: settings.max_len,
                    ..ConservativeOptions::default()
                },
            )?;
            let potential = verdict
                .potential
                .as_ref()
                .map(|p| PotentialFile::from_potential(g, p));
            if let (Some(path), Some(file)) = (settings.potential_out, &potential) {
                write_side_file(path, &to_json(file))?;
            }
            let code = if verdict.kind == ConservativenessKind::Conservative {
                EXIT_OK
            } else {
                EXIT_NEGATIVE
            };
            Ok((
                code,
                render(
                    format,
                    vec![
                        ("verdict", json!(verdict.kind.as_str())),
                        ("residual", json!(verdict.residual)),
                        ("finite_horizon", json!(verdict.finite_horizon)),
                        ("potential", json_of(&potential)),
                        (
                            "witness",
                            verdict
                                .witness
                                .as_ref()
                                .map_or(Value::Null, |w| witness_json(g, w)),
                        ),
                    ],
                ),
            ))
        }
        CheckKind::FinitelyConservative => {
            let check = check_finitely_conservative(g, r, settings.max_len, tol)?;
            let code = if check.holds { EXIT_OK } else { EXIT_NEGATIVE };
            let verdict = if check.holds {
                "finitely_conservative_within_horizon"
            } else {
                "not_finitely_conservative"
            };
            Ok((
                code,
                render(
                    format,
                    vec![
                        ("verdict", json!(verdict)),
                        ("horizon", json!(check.horizon)),
                        (
                            "witness",
                            check
                                .witness
                                .map_or(Value::Null, |w| witness_json(g, &Witness::Finite(w))),
                        ),
                    ],
                ),
            ))
        }
        CheckKind::CurlFree => {
            let check = check_curl_free(g, r, tol)?;
            let code = if check.curl_free {
                EXIT_OK
            } else {
                EXIT_NEGATIVE
            };
            Ok((
                code,
                render(
                    format,
                    vec![
                        (
                            "verdict",
                            json!(if check.curl_free {
                                "curl_free"
                            } else {
                                "not_curl_free"
                            }),
                        ),
                        ("max_abs_curl", json!(check.max_abs_curl)),
                        (
                            "diamond",
                            check.worst_diamond.map_or(Value::Null, |d| {
                                diamond_json(g, &d.first, &d.second, None)
                            }),
                        ),
                    ],
                ),
            ))
        }
        CheckKind::ActionIndependent => {
            let check = is_action_independent(g, r, tol)?;
            let code = if check.independent {
                EXIT_OK
            } else {
                EXIT_NEGATIVE
            };
            let witness = check.witness.map_or(Value::Null, |(a, b)| {
                json!([
                    { "transition": TransitionRef::of(g, a), "value": r.get(a) },
                    { "transition": TransitionRef::of(g, b), "value": r.get(b) },
                ])
            });
            Ok((
                code,
                render(
                    format,
                    vec![
                        (
                            "verdict",
                            json!(if check.independent {
                                "action_independent"
                            } else {
                                "action_dependent"
                            }),
                        ),
                        ("witness", witness),
                    ],
                ),
            ))
        }
        CheckKind::Optimality => {
            let verdict = check_optimality_preserving(
                g,
                r,
                OptimalityOptions {
                    budget: settings.budget,
                    gap_tolerance: DEFAULT_GAP_TOLERANCE.max(tol.abs),
                    threads: settings.threads,
                },
            )?;
            let counterexample = verdict.counterexample.as_ref().map(|c| {
                let dynamics = DynamicsFile::from_dynamics(g, &c.dynamics);
                (
                    dynamics.clone(),
                    json!({
                        "index": c.index as u64,
                        "state": g.state(c.state).as_str(),
                        "better_action": g.action(c.better_action).as_str(),
                        "worse_action": g.action(c.worse_action).as_str(),
                        "gap": c.gap,
                        "dynamics": dynamics,
                    }),
                )
            });
            if let (Some(path), Some((dynamics, _))) = (settings.dynamics_out, &counterexample) {
                write_side_file(path, &to_json(dynamics))?;
            }
            let code = match verdict.verdict {
                OptimalityOutcome::CounterexampleFound => EXIT_NEGATIVE,
                OptimalityOutcome::NoCounterexampleWithinBudget => EXIT_OK,
            };
            Ok((
                code,
                render(
                    format,
                    vec![
                        ("verdict", json!(verdict.verdict.as_str())),
                        ("dynamics_checked", json!(verdict.dynamics_checked as u64)),
                        ("total_dynamics", json!(saturate(verdict.total_dynamics))),
                        ("exhaustive", json!(verdict.exhaustive())),
                        ("max_gap", json!(verdict.max_gap)),
                        (
                            "counterexample",
                            counterexample.map_or(Value::Null, |(_, v)| v),
                        ),
                    ],
                ),
            ))
        }
    }
}

fn saturate(x: u128) -> u64 {
    u64::try_from(x).unwrap_or(u64::MAX)
}
