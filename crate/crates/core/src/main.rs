use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use infprod::expectation::{expect, ExpectOptions, Status};
use infprod::games::{
    best_response_value, naming_game_exploit, naming_game_value, naming_payoff, purify, purify_at,
    random_finitistic_profile, Profile, PurifyConfig,
};
use infprod::harness::{
    format_interval, verify_strong, verify_weak, CampaignMeta, REPORT_SCHEMA_VERSION,
};
use infprod::martingale::{find_strong_approx, trace, StrongOutcome};
use infprod::model::{EvalPolicy, HybridMeasure, PointSpec, TailFunction};
use infprod::scenario::{builtin_names, Scenario};
use infprod::seeds::substream_seed;
use infprod::tail_class::{weak_zero_from_sample, SampleConfig};

/// Certified expectations and point approximations for functions on
/// countable products of finite spaces.
#[derive(Parser)]
#[command(name = "infprod", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed for sampled points.
    #[arg(long, global = true, default_value_t = 20_261_019)]
    seed: u64,
    /// Target half-width of certified expectation intervals.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write `<command>.txt` and `<command>.json` here.
    #[arg(long, global = true)]
    report_dir: Option<PathBuf>,
    /// Format printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,
    /// Coordinates of a sampled point realized before tail bounds apply.
    #[arg(long, global = true, default_value_t = 60)]
    horizon: usize,
    /// Accepted probability that an assumed on-target tail is wrong.
    #[arg(long, global = true, default_value_t = 1e-6)]
    eta: f64,
    /// Node budget of the refinement engine.
    #[arg(long, global = true, default_value_t = 200_000)]
    budget: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Certified interval for E_σ[f].
    Expect { scenario: String },
    /// g_1, …, g_N at a point, as two columns.
    GnTrace {
        scenario: String,
        /// Named point, `head;tail` labels, or `sample`.
        #[arg(long, default_value = "sample")]
        point: String,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Smallest n with |g_n(x) − E_σ[f]| ≤ ε certified.
    StrongApprox {
        scenario: String,
        #[arg(long, default_value = "sample")]
        point: String,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Single-coordinate mixing certificate reaching r exactly.
    WeakApprox {
        scenario: String,
        /// Target value (defaults to the midpoint of E_σ[f]).
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        retries: Option<usize>,
    },
    /// Fraction of sampled points that are strong ε-approximations.
    VerifyStrong {
        scenario: String,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        /// Overrides the scenario's declared threshold.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Fraction of sampled points with a verified weak 0-certificate.
    VerifyWeak {
        scenario: String,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Games against countably many opponents.
    Game {
        #[command(subcommand)]
        verb: GameVerb,
    },
    /// List built-in scenarios.
    Scenarios,
}

#[derive(Subcommand)]
enum GameVerb {
    /// Best-response value against σ, or against the Dirac measure at --point.
    Value {
        scenario: String,
        #[arg(long)]
        point: Option<String>,
    },
    /// Eventually pure profile losing at most ε against every action.
    Purify {
        scenario: String,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        retries: Option<usize>,
        /// Purify at this point instead of sampling.
        #[arg(long)]
        point: Option<String>,
    },
    /// Naming-game value under σ and sure wins against random eventually pure profiles.
    NamingDemo {
        scenario: String,
        #[arg(long, default_value_t = 100)]
        profiles: usize,
    },
}

struct Outcome {
    name: &'static str,
    text: String,
    json: Value,
    success: bool,
}

type CliResult = Result<Outcome, Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli).and_then(|o| emit(&cli.global, o)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn emit(g: &Global, o: Outcome) -> Result<bool, Box<dyn std::error::Error>> {
    let mut json = o.json;
    if let Value::Object(map) = &mut json {
        map.insert("schema_version".into(), json!(REPORT_SCHEMA_VERSION));
        map.insert("command".into(), json!(o.name));
        map.insert("success".into(), json!(o.success));
    }
    let json_text = serde_json::to_string_pretty(&json)? + "\n";
    match g.report {
        ReportFormat::Text => print!("{}", o.text),
        ReportFormat::Json => print!("{json_text}"),
    }
    if let Some(dir) = &g.report_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.txt", o.name)), &o.text)?;
        std::fs::write(dir.join(format!("{}.json", o.name)), &json_text)?;
    }
    Ok(o.success)
}

fn options(g: &Global) -> ExpectOptions {
    ExpectOptions {
        tol: g.tol,
        node_budget: g.budget,
        use_oracles: true,
        policy: EvalPolicy {
            horizon: g.horizon,
            residual_limit: Some(g.eta),
        },
    }
}

fn function(s: &Scenario) -> Result<&TailFunction, Box<dyn std::error::Error>> {
    s.function
        .as_ref()
        .ok_or_else(|| format!("scenario {} declares no function", s.name).into())
}

fn point(s: &Scenario, spec: &str, seed: u64) -> Result<PointSpec, Box<dyn std::error::Error>> {
    if spec == "sample" {
        return Ok(PointSpec::lazy(
            substream_seed(seed, 0),
            Arc::clone(&s.measure),
        ));
    }
    Ok(s.point(spec)?)
}

fn need<T>(
    flag: Option<T>,
    default: Option<T>,
    name: &str,
) -> Result<T, Box<dyn std::error::Error>> {
    flag.or(default)
        .ok_or_else(|| format!("--{name} is required (the scenario declares no default)").into())
}

fn header(s: &Scenario) -> Value {
    json!({ "scenario": s.name, "scenario_digest": s.digest })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(a), Value::Object(b)) = (&mut base, extra) {
        a.extend(b);
    }
    base
}

fn run(cli: &Cli) -> CliResult {
    let g = &cli.global;
    let opts = options(g);
    match &cli.command {
        Command::Scenarios => {
            let names: Vec<&str> = builtin_names().collect();
            Ok(Outcome {
                name: "scenarios",
                text: names.iter().map(|n| format!("{n}\n")).collect(),
                json: json!({ "builtins": names }),
                success: true,
            })
        }
        Command::Expect { scenario } => {
            let s = Scenario::load(scenario)?;
            let f = function(&s)?;
            let r = expect(f, s.measure.as_ref(), &opts)?;
            let text = format!(
                "E[f] in {}\nmethod: {:?}, nodes expanded: {}, status: {:?}, residual: {:e}\n",
                format_interval(&r.interval),
                r.method,
                r.nodes_expanded,
                r.status,
                r.residual
            );
            Ok(Outcome {
                name: "expect",
                text,
                json: merge(header(&s), json!({ "result": r })),
                success: r.status == Status::Certified,
            })
        }
        Command::GnTrace {
            scenario,
            point: p,
            n_max,
        } => {
            let s = Scenario::load(scenario)?;
            let f = function(&s)?;
            let x = point(&s, p, g.seed)?;
            let n = need(*n_max, s.defaults.n_max, "n-max")?;
            let t = trace(f, &s.measure, &x, n, &opts)?;
            let text = format!(
                "# reference E[f] {}\n{}",
                format_interval(&t.reference),
                t.to_columns()
            );
            Ok(Outcome {
                name: "gn-trace",
                text,
                json: merge(header(&s), json!({ "point": p, "trace": t })),
                success: true,
            })
        }
        Command::StrongApprox {
            scenario,
            point: p,
            epsilon,
            n_max,
        } => {
            let s = Scenario::load(scenario)?;
            let f = function(&s)?;
            let x = point(&s, p, g.seed)?;
            let eps = need(*epsilon, s.defaults.epsilon, "epsilon")?;
            let n = need(*n_max, s.defaults.n_max, "n-max")?;
            let r = find_strong_approx(f, &s.measure, &x, eps, n, &opts)?;
            let verdict = match &r.outcome {
                StrongOutcome::Found { n } => format!("Found({n})"),
                StrongOutcome::Inconclusive {
                    undecided,
                    first_certified,
                } => format!(
                    "Inconclusive(undecided {undecided:?}, first certified {first_certified:?})"
                ),
                StrongOutcome::NotFoundUpTo { n_max } => format!("NotFoundUpTo({n_max})"),
            };
            let text = format!(
                "{verdict}\nepsilon: {eps}\nE[f] in {}\nresidual: {:e}\n",
                format_interval(&r.reference),
                r.residual
            );
            Ok(Outcome {
                name: "strong-approx",
                text,
                json: merge(header(&s), json!({ "point": p, "result": r })),
                success: r.certified_index().is_some(),
            })
        }
        Command::WeakApprox {
            scenario,
            r,
            depth,
            retries,
        } => {
            let s = Scenario::load(scenario)?;
            let f = function(&s)?;
            let cfg = SampleConfig {
                depth: need(*depth, s.defaults.depth, "depth")?,
                seed: g.seed,
                retries: retries.or(s.defaults.retries).unwrap_or(16),
                r: *r,
            };
            let out = weak_zero_from_sample(f, &s.spaces, &s.measure, cfg, &opts)?;
            let c = &out.certificate;
            let space = s.spaces.space(c.k);
            let (lx, ly) = (space.label(c.symbols.0), space.label(c.symbols.1));
            let shown = c.k.max(8);
            let text = format!(
                "coordinate k: {}\nalpha: {} ({})\nmix: {} w.p. {}, {} w.p. {}\nvalues f(z_k), f(z_k+1): {}, {}\nr: {}\nachieved: {}\nbase z (first {shown}): {}\nsample: {} of {}\n",
                c.k,
                c.alpha,
                c.alpha_rational.as_deref().unwrap_or("no small fraction"),
                lx,
                c.alpha,
                ly,
                1.0 - c.alpha,
                c.values.0,
                c.values.1,
                c.r,
                c.achieved,
                s.labels(&c.z, shown).join(","),
                out.sample_index + 1,
                out.samples_tried,
            );
            let json = merge(
                header(&s),
                json!({
                    "certificate": {
                        "k": c.k,
                        "alpha": c.alpha,
                        "alpha_rational": c.alpha_rational,
                        "mixed_symbols": [lx, ly],
                        "tau": c.tau.weights(),
                        "values": [c.values.0, c.values.1],
                        "r": c.r,
                        "achieved": c.achieved,
                        "base_head": s.labels(&c.z, shown),
                        "residual": c.residual,
                    },
                    "expectation": out.expectation,
                    "sample_index": out.sample_index,
                    "seed": g.seed,
                }),
            );
            Ok(Outcome {
                name: "weak-approx",
                text,
                json,
                success: true,
            })
        }
        Command::VerifyStrong {
            scenario,
            epsilon,
            n_max,
            samples,
            threshold,
        } => {
            let s = Scenario::load(scenario)?;
            let f = function(&s)?;
            let threshold = need(*threshold, s.thresholds.strong, "threshold")?;
            let meta = CampaignMeta {
                scenario: s.name.clone(),
                digest: s.digest.clone(),
                master_seed: g.seed,
            };
            let report = verify_strong(
                f,
                &s.measure,
                need(*epsilon, s.defaults.epsilon, "epsilon")?,
                need(*samples, s.defaults.samples, "samples")?,
                need(*n_max, s.defaults.n_max, "n-max")?,
                &opts,
                &meta,
            )?;
            let success = report.meets(threshold);
            Ok(Outcome {
                name: "verify-strong",
                text: format!(
                    "{}threshold:      {threshold} ({})\n",
                    report.to_text(),
                    pass(success)
                ),
                json: merge(
                    serde_json::to_value(&report)?,
                    json!({ "threshold": threshold }),
                ),
                success,
            })
        }
        Command::VerifyWeak {
            scenario,
            depth,
            samples,
            threshold,
        } => {
            let s = Scenario::load(scenario)?;
            let f = function(&s)?;
            let threshold = need(*threshold, s.thresholds.weak, "threshold")?;
            let meta = CampaignMeta {
                scenario: s.name.clone(),
                digest: s.digest.clone(),
                master_seed: g.seed,
            };
            let report = verify_weak(
                f,
                &s.spaces,
                &s.measure,
                need(*depth, s.defaults.depth, "depth")?,
                need(*samples, s.defaults.samples, "samples")?,
                &opts,
                &meta,
            )?;
            let success = report.meets(threshold);
            Ok(Outcome {
                name: "verify-weak",
                text: format!(
                    "{}threshold:      {threshold} ({})\n",
                    report.to_text(),
                    pass(success)
                ),
                json: merge(
                    serde_json::to_value(&report)?,
                    json!({ "threshold": threshold }),
                ),
                success,
            })
        }
        Command::Game { verb } => run_game(g, verb, &opts),
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "met"
    } else {
        "missed"
    }
}

fn run_game(g: &Global, verb: &GameVerb, opts: &ExpectOptions) -> CliResult {
    match verb {
        GameVerb::Value { scenario, point: p } => {
            let s = Scenario::load(scenario)?;
            let game = s.game.as_ref().ok_or("scenario declares no game")?;
            let br = match p {
                Some(p) => {
                    best_response_value(game, &HybridMeasure::dirac(point(&s, p, g.seed)?), opts)?
                }
                None => best_response_value(game, s.measure.as_ref(), opts)?,
            };
            let mut text = format!(
                "value: {}\nbest response: {}\n",
                format_interval(&br.value),
                game.actions()[br.argmax]
            );
            for (a, v) in game.actions().iter().zip(&br.per_action) {
                text.push_str(&format!("  {a}: {}\n", format_interval(v)));
            }
            Ok(Outcome {
                name: "game-value",
                text,
                json: merge(
                    header(&s),
                    json!({ "result": br, "argmax_action": game.actions()[br.argmax] }),
                ),
                success: true,
            })
        }
        GameVerb::Purify {
            scenario,
            epsilon,
            n_max,
            retries,
            point: p,
        } => {
            let s = Scenario::load(scenario)?;
            let game = s.game.as_ref().ok_or("scenario declares no game")?;
            let eps = need(*epsilon, s.defaults.epsilon, "epsilon")?;
            let n = need(*n_max, s.defaults.n_max, "n-max")?;
            let result = match p {
                Some(p) => purify_at(game, &s.measure, &point(&s, p, g.seed)?, eps, n, opts)?,
                None => purify(
                    game,
                    &s.measure,
                    PurifyConfig {
                        epsilon: eps,
                        n_max: n,
                        seed: g.seed,
                        retries: retries.or(s.defaults.retries).unwrap_or(8),
                    },
                    opts,
                )?,
            };
            let switch = result.profile.switch_index();
            let point_head = s.labels(result.profile.hybrid().point(), switch + 7);
            let mut text = format!(
                "switch index n: {}\nDirac from coordinate {switch}: {} ...\nmax_a E under purified profile: {}\nmax_a E under sigma:            {}\nepsilon: {eps}\nguarantee: {}\n",
                result.n,
                point_head[switch - 1..].join(","),
                format_interval(&result.purified_value),
                format_interval(&result.mixed_value),
                if result.guarantee_holds() { "certified" } else { "not certified" },
            );
            for a in &result.actions {
                text.push_str(&format!(
                    "  {}: found n = {}, purified {}, mixed {}\n",
                    a.action,
                    a.found,
                    format_interval(&a.purified),
                    format_interval(&a.mixed)
                ));
            }
            let json = merge(
                header(&s),
                json!({
                    "n": result.n,
                    "epsilon": eps,
                    "sample_index": result.sample_index,
                    "dirac_tail_head": point_head[switch - 1..],
                    "actions": result.actions,
                    "purified_value": result.purified_value,
                    "mixed_value": result.mixed_value,
                    "residual": result.residual,
                }),
            );
            Ok(Outcome {
                name: "game-purify",
                text,
                json,
                success: result.guarantee_holds(),
            })
        }
        GameVerb::NamingDemo { scenario, profiles } => {
            let s = Scenario::load(scenario)?;
            let v = naming_game_value(&s.measure)?;
            let mut payoffs = Vec::with_capacity(*profiles);
            let mut examples = Vec::new();
            for j in 0..*profiles {
                let tau =
                    random_finitistic_profile(substream_seed(g.seed, j as u64), &s.measure, 8);
                let action = naming_game_exploit(Profile::Finitistic(&tau))?;
                let payoff = naming_payoff(Profile::Finitistic(&tau), action);
                if examples.len() < 5 {
                    examples.push(json!({ "switch_index": tau.switch_index(), "action": [action.0, action.1], "payoff": payoff }));
                }
                payoffs.push(payoff);
            }
            let wins = payoffs.iter().filter(|&&p| p == 1.0).count();
            let text = format!(
                "value under sigma (sup over all namings): {}{}\nfinitistic profiles: {profiles}, exploited with payoff 1: {wins}\n",
                v.value,
                match v.attained_at {
                    Some((n, j)) => format!(" (attained by naming coordinate {n} as {j})"),
                    None => " (not attained)".into(),
                }
            );
            Ok(Outcome {
                name: "game-naming-demo",
                text,
                json: merge(
                    header(&s),
                    json!({ "value": v, "profiles": profiles, "exploited": wins, "examples": examples }),
                ),
                success: wins == *profiles,
            })
        }
    }
}
