//! Command-line driver and the end-to-end analysis pipeline.

mod synth;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::exec::WidenConfig;
use crate::frontend::{build_cfg, check_calls, parse_sources, Cfg, FrontendError, Program};
use crate::interproc::{analyze_program, AnalysisRun, DbError, SummaryDb};
use crate::report::{
    check_expectations, default_entries, derive_issues, parse_expectations, to_json, to_text,
    Issue, ModelError, ModelTable,
};

pub use synth::{synth_corpus, SynthConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Models(#[from] ModelError),
    #[error(transparent)]
    Db(#[from] DbError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

/// Settings for one analysis run.
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub config: WidenConfig,
    /// Empty means `main` if defined, else every function.
    pub entries: Vec<String>,
    pub jobs: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            config: WidenConfig::default(),
            entries: Vec::new(),
            jobs: 1,
        }
    }
}

#[derive(Debug)]
pub struct Analysis {
    pub run: AnalysisRun,
    pub issues: Vec<Issue>,
}

/// Check calls, lower every function and compute summaries and issues.
pub fn analyze(
    program: &Program,
    models: &ModelTable,
    opts: &AnalysisOptions,
    db: Option<&SummaryDb>,
) -> Result<Analysis, CliError> {
    check_calls(program, |n| models.contains(n))?;
    for e in &opts.entries {
        if program.function(e).is_none() {
            return Err(CliError::Usage(format!("entry `{e}` is not defined")));
        }
    }
    let cfgs: BTreeMap<String, Cfg> = program
        .functions
        .iter()
        .map(|f| (f.name.clone(), build_cfg(f)))
        .collect();
    let run = analyze_program(program, &cfgs, models, &opts.config, opts.jobs.max(1), db);
    let entries = default_entries(program, &opts.entries);
    let issues = derive_issues(program, &run.summaries, models, &entries);
    Ok(Analysis { run, issues })
}

/// Parse and analyze one in-memory source file.
pub fn analyze_source(
    src: &str,
    models: &ModelTable,
    opts: &AnalysisOptions,
) -> Result<Analysis, CliError> {
    let program = parse_sources(&[("input.mc".to_string(), src.to_string())])?;
    analyze(&program, models, opts, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

/// Find non-terminating loops, gotos and recursion in MiniC programs.
#[derive(Debug, Parser)]
#[command(name = "diverge", version)]
pub struct Args {
    /// Source files or directories of `.mc` files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Loop visits explored per path before unrolling stops.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub k: u32,
    /// Specs kept per procedure and kind.
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_disjuncts: u64,
    /// Entry procedure for reachability; repeatable.
    #[arg(long = "entry")]
    pub entries: Vec<String>,
    /// File of `<name> <kind>` lines describing functions without bodies.
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// Summary database, read if present and written after the run.
    #[arg(long)]
    pub db: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Worker threads.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: u64,
    /// Write the report here instead of stdout.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
    /// Compare the findings with `//@ expect:` comments instead of reporting them.
    #[arg(long)]
    pub check: bool,
}

/// Expand directories into their `.mc` files, sorted by path.
pub fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = walkdir::WalkDir::new(p)
                .sort_by_file_name()
                .into_iter()
                .filter_map(Result::ok)
                .filter(|e| {
                    e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "mc")
                })
                .map(|e| e.into_path())
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_program(paths: &[PathBuf]) -> Result<Program, CliError> {
    let mut files = Vec::with_capacity(paths.len());
    for p in paths {
        files.push((p.display().to_string(), read(p)?));
    }
    Ok(parse_sources(&files)?)
}

fn load_db(path: &Path, err: &mut dyn Write) -> Result<SummaryDb, CliError> {
    match SummaryDb::load(path) {
        Err(DbError::VersionMismatch { .. }) => {
            let _ = writeln!(
                err,
                "warning: {} is from another version; reanalysing",
                path.display()
            );
            Ok(SummaryDb::default())
        }
        other => Ok(other?),
    }
}

/// Exit status: 0 clean, 1 unintended issues (or failed check), 2 usage or input error.
pub fn run(args: &Args, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let models = match &args.models {
        Some(p) => ModelTable::parse(&read(p)?)?,
        None => ModelTable::new(),
    };
    let paths = collect_inputs(&args.inputs)?;
    if paths.is_empty() {
        return Err(CliError::Usage("no input files".into()));
    }
    let program = load_program(&paths)?;
    let opts = AnalysisOptions {
        config: WidenConfig {
            k: args.k,
            max_disjuncts: args.max_disjuncts as usize,
            ..WidenConfig::default()
        },
        entries: args.entries.clone(),
        jobs: args.jobs as usize,
    };
    let db = match &args.db {
        Some(p) => Some(load_db(p, err)?),
        None => None,
    };
    let analysis = analyze(&program, &models, &opts, db.as_ref())?;
    if let Some(p) = &args.db {
        analysis.run.to_db().save(p)?;
    }

    if args.check {
        let expectations = parse_expectations(&program).map_err(CliError::Usage)?;
        let mismatches = check_expectations(&expectations, &analysis.issues);
        for m in &mismatches {
            let _ = writeln!(out, "{m}");
        }
        let _ = writeln!(
            out,
            "{} expectation{} checked, {} mismatch{}",
            expectations.len(),
            if expectations.len() == 1 { "" } else { "s" },
            mismatches.len(),
            if mismatches.len() == 1 { "" } else { "es" }
        );
        return Ok(if mismatches.is_empty() { 0 } else { 1 });
    }

    let rendered = match args.format {
        Format::Text => to_text(&analysis.issues),
        Format::Json => to_json(&analysis.issues, args.k),
    };
    match &args.output {
        Some(p) => std::fs::write(p, rendered).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        })?,
        None => {
            let _ = out.write_all(rendered.as_bytes());
        }
    }
    Ok(if analysis.issues.iter().any(|i| !i.intended) {
        1
    } else {
        0
    })
}

/// Parse arguments and run, mapping every failure to an exit status.
pub fn main_with_args<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 2;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    match run(&args, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}
