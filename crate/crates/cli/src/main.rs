use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use ealab_core::registry::{catalog, find_example, find_suite, parse_spec, Context, Instance, RegistryError};
use ealab_core::scalars::set_max_conductor;

const SCHEMA: &str = "ealab-report/1";

#[derive(Parser)]
#[command(name = "ealab", version, about = "Build graded Lie algebras and run axiom suites on finite windows")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run suites on a catalog example or a JSON spec.
    Run(RunArgs),
    /// List catalog examples and suites.
    List,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    example: Option<String>,
    /// JSON file `{"L": ..., "D": ..., "tau": ...}`.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Comma-separated: jacobi, lie-torus, form, ears, eala, cocycle, centroid.
    #[arg(long, value_delimiter = ',', required = true)]
    suites: Vec<String>,
    #[arg(long, default_value_t = 2)]
    window: i64,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_conductor: Option<u32>,
    /// Include wall-clock timings in the report (makes it nondeterministic).
    #[arg(long)]
    timing: bool,
}

/// Input problems map to exit code 2.
struct Malformed(anyhow::Error);

fn load(args: &RunArgs) -> Result<Instance, Malformed> {
    if args.window < 1 {
        return Err(Malformed(anyhow::anyhow!("window: must be >= 1, got {}", args.window)));
    }
    if args.suites.is_empty() || args.suites.iter().any(|s| s.is_empty()) {
        return Err(Malformed(anyhow::anyhow!("suites: must be a nonempty list")));
    }
    if let Some(m) = args.max_conductor {
        set_max_conductor(m).map_err(|e| Malformed(anyhow::anyhow!("max-conductor: {e}")))?;
    }
    for s in &args.suites {
        find_suite(s).map_err(|e| Malformed(e.into()))?;
    }
    let built: Result<Instance, RegistryError> = match (&args.example, &args.spec) {
        (Some(name), _) => find_example(name).and_then(|e| e.build()),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Malformed)?;
            parse_spec(&text).and_then(|s| s.build())
        }
        (None, None) => return Err(Malformed(anyhow::anyhow!("one of --example or --spec is required"))),
    };
    built.map_err(|e| Malformed(e.into()))
}

fn run(args: RunArgs) -> anyhow::Result<bool> {
    let inst = match load(&args) {
        Ok(i) => i,
        Err(Malformed(e)) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    };
    let meta = inst.l.meta();
    let target = json!({
        "name": inst.name,
        "algebra": meta.name,
        "family": meta.family,
        "nullity_parameter": meta.n,
        "root_system": meta.system_id.map(|s| s.to_string()),
    });
    let mut ctx = Context::new(inst, args.window);
    let mut results = Map::new();
    let mut timings = Map::new();
    let mut all = true;
    for name in &args.suites {
        let suite = find_suite(name)?;
        let t0 = Instant::now();
        let r = suite.run(&mut ctx);
        let secs = t0.elapsed().as_secs_f64();
        eprintln!("{name}: {} in {secs:.2}s", if r.pass { "pass" } else { "FAIL" });
        all &= r.pass;
        timings.insert(name.clone(), json!(secs));
        results.insert(name.clone(), serde_json::to_value(&r)?);
    }
    let mut report = json!({
        "schema": SCHEMA,
        "target": target,
        "window": args.window,
        "suites": Value::Object(results),
        "pass": all,
    });
    if args.timing {
        report["timing_seconds"] = Value::Object(timings);
    }
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    match &args.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(all)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::List => {
            for e in catalog() {
                println!("{:20} {}", e.name(), e.summary());
            }
            println!();
            println!("suites: jacobi, lie-torus, form, ears, eala, cocycle, centroid");
            ExitCode::SUCCESS
        }
        Cmd::Run(args) => match run(args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}
