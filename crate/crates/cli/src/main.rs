use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;
use treesmith::pipeline::{run_report, Config, Pipeline, StageRecord, StageState};
use treesmith::resolution::decompose;
use treesmith::splitting::CurveSpec;
use treesmith::stallings::intersect_conjugates;
use treesmith::twist::{default_test_set, fmt_rational, parse_rational, twist_converge, twist_of};
use treesmith::{Basis, ConjClass, Curve, SubgroupGraph, Word};

#[derive(Parser)]
#[command(name = "treesmith", about = "Exact finite-scale experiments with one-edge splittings of free groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Conjugacy classes of intersections of two finitely generated subgroups.
    Intersect {
        #[arg(long, default_value = "awtv")]
        basis: String,
        /// Generators of the first subgroup, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        left: Vec<String>,
        /// Generators of the second subgroup, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        right: Vec<String>,
    },
    /// Translation lengths of words on a curve.
    Lengths {
        #[arg(long)]
        curve: PathBuf,
        words: Vec<String>,
    },
    /// Projective distance trace of `S·τᵏ` to a target curve.
    TwistLab {
        /// Curve whose Dehn twist is iterated.
        #[arg(long)]
        source: PathBuf,
        /// Starting curve `S`.
        #[arg(long)]
        start: PathBuf,
        /// Target curve; defaults to the source.
        #[arg(long)]
        target: Option<PathBuf>,
        /// Longest class in the test set.
        #[arg(long, default_value_t = 4)]
        test_len: usize,
        #[arg(long, default_value_t = 20)]
        test_cap: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        k_max: usize,
        #[arg(long, default_value = "1/1000")]
        tol: String,
    },
    /// Family decomposition of a curve's chart at scale `n`.
    Resolve {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Runs the staged construction and writes a certificate report.
    Construct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Resume after stage `k` from its saved state.
        #[arg(long)]
        stage: Option<usize>,
        /// State file to resume from; defaults to the one saved beside `--out`.
        #[arg(long, requires = "stage")]
        state: Option<PathBuf>,
    },
}

fn read_curve(path: &Path) -> Result<Curve> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: CurveSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Curve::from_spec(&spec)?)
}

fn parse_all(basis: &Basis, words: &[String]) -> Result<Vec<Word>> {
    Ok(words.iter().map(|w| basis.parse(w)).collect::<treesmith::Result<_>>()?)
}

/// `<out>.stage-<k>.json`
fn state_path(out: &Path, k: usize) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(format!(".stage-{k}.json"));
    PathBuf::from(name)
}

fn construct(config: &Path, out: &Path, stage: Option<usize>, state: Option<PathBuf>) -> Result<bool> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let config = Config::from_toml(&text)?;
    let pipeline = Pipeline::new(config.clone())?;
    let start = match stage {
        None => StageState::initial(&config)?,
        Some(k) => {
            let path = state.unwrap_or_else(|| state_path(out, k));
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let record: StageRecord = serde_json::from_str(&text)?;
            if record.k != k {
                bail!("{} holds stage {}, not {k}", path.display(), record.k);
            }
            StageState::from_record(&record, &config)?
        }
    };
    let report = run_report(&pipeline, start, |s| {
        fs::write(state_path(out, s.k), serde_json::to_string_pretty(&s.to_record())?)?;
        Ok(())
    });
    fs::write(out, report.to_json()?).with_context(|| format!("writing {}", out.display()))?;
    if let Some(f) = &report.failure {
        eprintln!("construction stopped: {f}");
    }
    Ok(report.pass())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Intersect { basis, left, right } => {
            let basis = Basis::new(&basis)?;
            let h = SubgroupGraph::fold(basis.rank(), &parse_all(&basis, &left)?);
            let k = SubgroupGraph::fold(basis.rank(), &parse_all(&basis, &right)?);
            let report = intersect_conjugates(&h, &k);
            let summary = report.summarize(&basis);
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "components": summary.len(),
                    "ranks": report.ranks(),
                    "letters": summary.iter().map(|c| c.letters.clone()).collect::<Vec<_>>(),
                    "generators": summary.iter().map(|c| c.generators.clone()).collect::<Vec<_>>(),
                }))?
            );
            Ok(true)
        }
        Command::Lengths { curve, words } => {
            let t = read_curve(&curve)?;
            let lengths: Vec<usize> =
                parse_all(t.basis(), &words)?.iter().map(|w| t.translation_length(&ConjClass::new(w))).collect();
            println!("{}", serde_json::to_string(&lengths)?);
            Ok(true)
        }
        Command::TwistLab { source, start, target, test_len, test_cap, seed, k_max, tol } => {
            let source = read_curve(&source)?;
            let start = read_curve(&start)?;
            let target = match target {
                Some(p) => read_curve(&p)?,
                None => source.clone(),
            };
            let tol = parse_rational(&tol)?;
            let tests = default_test_set(source.rank(), test_len, test_cap, seed);
            let run = twist_converge(&start, &twist_of(&source), &target, &tests, k_max, tol)?;
            let pass = run.k_found.is_some();
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "k_found": run.k_found,
                    "tol": fmt_rational(&tol),
                    "test_set": tests.iter().map(|c| source.basis().format(c.representative())).collect::<Vec<_>>(),
                    "trace": run.trace,
                    "verdict": if pass { "converged" } else { "not converged" },
                }))?
            );
            Ok(pass)
        }
        Command::Resolve { curve, n } => {
            let t = read_curve(&curve)?;
            let d = decompose(&t, n)?;
            let families: Vec<_> = d
                .families
                .iter()
                .map(|f| json!({"width": fmt_rational(&f.width), "annular": f.annular, "leaf_count": f.leaf_count()}))
                .collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "families": families,
                    "singular_count": d.singular_points.len(),
                    "chart_volume": d.chart_volume,
                }))?
            );
            Ok(true)
        }
        Command::Construct { config, out, stage, state } => construct(&config, &out, stage, state),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
