use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use coverlab::catalog::{Catalog, CatalogEntry, Payload};
use coverlab::suite::{run_suite, SuiteName, SuiteResult};

#[derive(Parser)]
#[command(name = "coverlab", version, about = "Check coverings, reductions and Backlund transformations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite of checks.
    Verify {
        /// all, coverings, reductions, backlund, mutation or numeric
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Write numeric rows (test, h, delta, residual, slope) here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print every catalog id.
    List,
    /// Print one catalog entry.
    Show { id: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// What a command produced, before it reaches the terminal.
struct Outcome {
    code: u8,
    out: String,
    err: String,
}

impl Outcome {
    fn ok(out: String) -> Self {
        Outcome { code: 0, out, err: String::new() }
    }
}

fn write_csv(result: &SuiteResult, path: &Path) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    for row in result.numeric_rows() {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn show(e: &CatalogEntry) -> String {
    let mut out = format!("{} ({})\n{}\n", e.id, e.kind, e.label);
    if let Some(d) = &e.derived {
        out.push_str(&format!("derived: {d}\n"));
    }
    out.push('\n');
    match &e.payload {
        Payload::System(s) => out.push_str(&s.to_string()),
        Payload::Covering(c) => {
            let f = c.covering.fiber();
            out.push_str(&format!("over {}\n{f}_t = {}\n{f}_y = {}\n", c.system, c.covering.eq_t(), c.covering.eq_y()));
        }
        Payload::Reduction(r) => {
            out.push_str(&format!("{} -> {}\n", r.source, r.target));
            for (f, v) in r.bindings.fields() {
                out.push_str(&format!("{f} = {v}\n"));
            }
            for (j, v) in r.bindings.jets() {
                out.push_str(&format!("{j} = {v}\n"));
            }
            if let Some(rel) = &r.relation {
                out.push_str(&format!("relation {} = {}\n", rel.jet, rel.value));
            }
        }
        Payload::Transformation(t) => {
            out.push_str(&format!("modulo {}\n", t.modulo));
            for (j, v) in t.bindings.jets() {
                out.push_str(&format!("{j} = {v}\n"));
            }
        }
    }
    out
}

fn execute(cli: Cli, catalog: anyhow::Result<Catalog>) -> anyhow::Result<Outcome> {
    let catalog = catalog.context("catalog failed to load")?;
    match cli.command {
        Command::Verify { suite, format, parallel, csv } => {
            let Some(name) = SuiteName::parse(&suite) else {
                let names: Vec<&str> = SuiteName::ALL.iter().map(|s| s.as_str()).collect();
                return Ok(Outcome {
                    code: 2,
                    out: String::new(),
                    err: format!("unknown suite '{suite}'\nusage: coverlab verify --suite <{}>\n", names.join("|")),
                });
            };
            let result = run_suite(&catalog, name, parallel.max(1))?;
            let out = match format {
                Format::Text => result.to_text(),
                Format::Json => format!("{}\n", result.to_json()),
            };
            if let Some(path) = csv {
                write_csv(&result, &path)?;
            }
            Ok(Outcome { code: result.exit_code() as u8, out, err: String::new() })
        }
        Command::List => Ok(Outcome::ok(catalog.ids().map(|id| format!("{id}\n")).collect())),
        Command::Show { id } => Ok(Outcome::ok(show(catalog.get(&id)?))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli, Catalog::load().map_err(Into::into)) {
        Ok(o) => {
            let _ = std::io::stdout().lock().write_all(o.out.as_bytes());
            let _ = std::io::stderr().lock().write_all(o.err.as_bytes());
            ExitCode::from(o.code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
