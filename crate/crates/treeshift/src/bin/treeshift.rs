use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use treeshift::shift::{SeparatedBasis, ShiftOperator};
use treeshift::suites::{self, parse_suites, RunConfig, Tolerances, TreeSource};
use treeshift::tree::{ExampleName, TreeSpec};
use treeshift::{Error, Result};

#[derive(Parser)]
#[command(name = "treeshift", version, about = "Weighted shifts on directed trees: model, multipliers and verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and write a JSON Lines report.
    Run(RunArgs),
    /// Print the JSON spec of a built-in example tree.
    Generate(GenerateArgs),
    /// Print the kernel basis and norm data of a tree.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct TreeArgs {
    /// Tree spec JSON file.
    #[arg(long, conflicts_with = "example")]
    tree: Option<PathBuf>,
    /// Built-in example: T2, T4, UNILATERAL or RAYS.
    #[arg(long)]
    example: Option<ExampleName>,
    /// Weight of the second ray of T2.
    #[arg(long)]
    alpha: Option<f64>,
    /// Example parameters (RAYS: branch count and optional growth; UNILATERAL: weights).
    #[arg(long = "param", value_delimiter = ',', allow_hyphen_values = true)]
    params: Vec<f64>,
    /// Truncation depth of a built-in example.
    #[arg(long, default_value_t = 8)]
    depth: usize,
}

impl TreeArgs {
    fn source(&self) -> Result<TreeSource> {
        if let Some(path) = &self.tree {
            return Ok(TreeSource::File { path: path.clone() });
        }
        let name = self.example.unwrap_or(ExampleName::T2);
        let params = match (name, self.alpha) {
            (ExampleName::T2, Some(alpha)) => vec![alpha],
            (_, Some(_)) => return Err(Error::Config("--alpha only applies to T2".into())),
            _ if !self.params.is_empty() => self.params.clone(),
            _ => RunConfig::default_params(name),
        };
        Ok(TreeSource::Example { name, params })
    }

    fn shift(&self) -> Result<ShiftOperator> {
        match self.source()? {
            TreeSource::File { path } => {
                ShiftOperator::from_spec(&TreeSpec::from_json(&std::fs::read_to_string(path)?)?)
            }
            TreeSource::Example { name, params } => ShiftOperator::from_example(name, self.depth, &params),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    tree: TreeArgs,
    /// Suites to run (repeatable or comma separated); `all` selects every suite.
    #[arg(long = "suite", value_delimiter = ',', default_value = "all")]
    suites: Vec<String>,
    #[arg(long, env = "TREESHIFT_SEED", default_value_t = 0)]
    seed: u64,
    /// Report path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tol_alg: Option<f64>,
    #[arg(long)]
    tol_power: Option<f64>,
    #[arg(long)]
    slope_threshold: Option<f64>,
    /// Run independent suites concurrently.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    example: ExampleName,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "param", value_delimiter = ',', allow_hyphen_values = true)]
    params: Vec<f64>,
    #[arg(long, default_value_t = 8)]
    depth: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    tree: TreeArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(args: RunArgs) -> Result<bool> {
    let defaults = Tolerances::default();
    let config = RunConfig {
        tree_source: args.tree.source()?,
        depth: args.tree.depth,
        suites: parse_suites(&args.suites)?,
        seed: args.seed,
        tolerances: Tolerances {
            alg: args.tol_alg.unwrap_or(defaults.alg),
            power: args.tol_power.unwrap_or(defaults.power),
            slope_threshold: args.slope_threshold.unwrap_or(defaults.slope_threshold),
        },
        parallel: args.parallel,
    };
    let report = suites::run(&config)?;
    let mut out = output(&args.out)?;
    report.write_jsonl(&mut out)?;
    out.flush()?;
    let summary = report.summary();
    eprintln!(
        "{} passed, {} failed, {} diagnostic",
        summary.pass, summary.fail, summary.diagnostic
    );
    Ok(report.succeeded())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let tree = TreeArgs {
        tree: None,
        example: Some(args.example),
        alpha: args.alpha,
        params: args.params,
        depth: args.depth,
    };
    let shift = tree.shift()?;
    let spec = TreeSpec::from_tree(shift.tree(), shift.weights());
    let mut out = output(&args.out)?;
    writeln!(out, "{}", spec.to_json()?)?;
    out.flush()?;
    Ok(())
}

fn inspect(args: InspectArgs) -> Result<()> {
    let shift = args.tree.shift()?;
    let tree = shift.tree();
    let basis = SeparatedBasis::new(&shift);
    let balance = shift.is_balanced();
    let vectors: Vec<_> = (0..basis.dim())
        .map(|j| {
            json!({
                "generation": basis.gen_index(j),
                "entries": basis
                    .sparse(j)
                    .iter()
                    .map(|&(v, x)| json!([tree.label(v), x]))
                    .collect::<Vec<_>>(),
            })
        })
        .collect();
    let info = json!({
        "vertices": tree.len(),
        "depth": tree.depth(),
        "root": tree.label(tree.root()),
        "norm": shift.norm(),
        "lower_bound": shift.lower_bound(),
        "balanced": balance.balanced,
        "generation_norm_squares": shift.generation_norm_squares(),
        "kernel_dim": basis.dim(),
        "kernel_basis": vectors,
    });
    let mut out = output(&args.out)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&info)?)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Generate(args) => generate(args).map(|_| true),
        Command::Inspect(args) => inspect(args).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
