use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use weave_core::compiler::{self, BindOptions, Mode, Scope};
use weave_core::runtime::{Engine, EngineOptions, SolveReport};
use weave_core::solver::{Budget, SolveOutcome};
use weave_core::{CompileError, Store};
use weave_sim::run::{run_scenario, Scenario, SimParams};

#[derive(Parser)]
#[command(name = "weave", version, about = "Compile SQL policies into constraint models and solve them")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a schema and report on the model it produces.
    Compile {
        schema: PathBuf,
        /// Directory of `<table>.csv` files to ground against.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Print every variable, domain, constraint and the objective.
        #[arg(long)]
        dump_model: bool,
        /// Use the naive encodings.
        #[arg(long)]
        no_rewrites: bool,
        /// Print variable and constraint counts as JSON.
        #[arg(long)]
        stats: bool,
        #[arg(long, value_enum, default_value = "pending")]
        scope: ScopeArg,
    },
    /// Solve against CSV data and write the changed cells.
    Solve {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Search time limit, e.g. `5s` or `500ms`.
        #[arg(long, default_value = "5s")]
        budget: String,
        /// Search node limit.
        #[arg(long)]
        nodes: Option<u64>,
        #[arg(long, value_enum, default_value = "pending")]
        scope: ScopeArg,
        /// On failure, allow pending rows to stay unset and lower-priority
        /// rows to be reset.
        #[arg(long)]
        escalate: bool,
        /// Schema used when escalating; defaults to `--schema`.
        #[arg(long)]
        reconfig: Option<PathBuf>,
        /// Write solve statistics here instead of stdout.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Directory for `<table>.delta.csv` files; defaults to `--data`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_rewrites: bool,
    },
    /// Run a scheduling scenario and write its traces and metrics.
    Sim {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long, default_value_t = 10)]
        nodes: usize,
        #[arg(long, default_value_t = 8)]
        apps: usize,
        #[arg(long, default_value_t = 50)]
        b: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// VMs in the rebalancing instance.
        #[arg(long, default_value_t = 40)]
        vms: usize,
        /// Migration budget for rebalancing.
        #[arg(long, default_value_t = 5)]
        k: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Pending,
    All,
}

impl From<ScopeArg> for Scope {
    fn from(s: ScopeArg) -> Scope {
        match s {
            ScopeArg::Pending => Scope::Pending,
            ScopeArg::All => Scope::All,
        }
    }
}

const EXIT_ERROR: u8 = 1;
const EXIT_UNSAT: u8 = 2;
const EXIT_UNKNOWN: u8 = 3;

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<u8, String> {
    match cli.cmd {
        Cmd::Compile {
            schema,
            data,
            dump_model,
            no_rewrites,
            stats,
            scope,
        } => {
            let engine = compile(&schema, None, !no_rewrites)?;
            let mut engine = engine;
            if let Some(dir) = &data {
                load_dir(engine.store_mut(), dir)?;
            }
            let opts = BindOptions {
                rewrites: !no_rewrites,
                scope: scope.into(),
                mode: Mode::Standard,
            };
            let g = engine.ground(&engine.template, &opts).map_err(|e| e.to_string())?;
            if dump_model {
                print!("{}", g.dump());
            }
            if stats {
                println!("{}", serde_json::to_string_pretty(&g.stats()).map_err(|e| e.to_string())?);
            }
            if !dump_model && !stats {
                for v in &engine.template.views {
                    println!("{:?} {}", v.class, v.name);
                }
                for vg in &engine.template.var_groups {
                    println!("variable {}.{}", vg.table, vg.column);
                }
            }
            Ok(0)
        }
        Cmd::Solve {
            schema,
            data,
            budget,
            nodes,
            scope,
            escalate,
            reconfig,
            stats,
            out,
            no_rewrites,
        } => {
            let time = humantime::parse_duration(&budget).map_err(|e| format!("bad --budget {budget}: {e}"))?;
            let budget = Budget { nodes, time: Some(time) };
            let mut engine = compile(&schema, reconfig.as_deref(), !no_rewrites)?;
            load_dir(engine.store_mut(), &data)?;
            let scope: Scope = scope.into();
            let report = if escalate {
                engine.solve_or_escalate(scope, budget)
            } else {
                engine.solve_once(scope, budget)
            }
            .map_err(|e| e.to_string())?;
            let json = serde_json::to_string_pretty(&report.stats_json()).map_err(|e| e.to_string())?;
            match &stats {
                Some(p) => fs::write(p, json).map_err(|e| format!("{}: {e}", p.display()))?,
                None => println!("{json}"),
            }
            match &report.outcome {
                SolveOutcome::Optimal { .. } | SolveOutcome::Feasible { .. } => {
                    write_deltas(&report, out.as_deref().unwrap_or(&data))?;
                    Ok(0)
                }
                SolveOutcome::Unsat { .. } => {
                    eprintln!("unsatisfiable");
                    match engine.explain_unsat(&report) {
                        Ok(x) => eprint!("{x}"),
                        Err(e) => eprintln!("no core: {e}"),
                    }
                    Ok(EXIT_UNSAT)
                }
                SolveOutcome::Unknown { .. } => {
                    eprintln!("no solution found within the budget");
                    Ok(EXIT_UNKNOWN)
                }
            }
        }
        Cmd::Sim {
            scenario,
            nodes,
            apps,
            b,
            seed,
            vms,
            k,
            out,
        } => {
            let params = SimParams {
                scenario,
                nodes,
                apps,
                b,
                seed,
                vms,
                k,
            };
            let m = run_scenario(&params, &out).map_err(|e| e.to_string())?;
            println!("{}", serde_json::to_string_pretty(&m).map_err(|e| e.to_string())?);
            Ok(0)
        }
    }
}

fn compile(schema: &Path, reconfig: Option<&Path>, rewrites: bool) -> Result<Engine, String> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
    let src = read(schema)?;
    let re = reconfig.map(read).transpose()?;
    let name = schema.display().to_string();
    // Surface positioned messages before building the engine.
    compiler::parse_schema(&src)
        .and_then(|s| compiler::synthesize(&s))
        .map_err(|e: CompileError| e.render(&name))?;
    let opts = EngineOptions {
        rewrites,
        ..EngineOptions::default()
    };
    Engine::compile_with(&src, re.as_deref(), opts).map_err(|e| e.to_string())
}

/// Loads `<table>.csv` for every table that has one.
fn load_dir(store: &mut Store, dir: &Path) -> Result<(), String> {
    let tables: Vec<String> = store.relations().map(|r| r.def.name.clone()).collect();
    for t in tables {
        let path = dir.join(format!("{t}.csv"));
        if path.exists() {
            let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            store.load_csv(&t, &text).map_err(|e| format!("{}: {e}", path.display()))?;
        }
    }
    Ok(())
}

/// One `<table>.delta.csv` per table with changes: key, column, value.
fn write_deltas(report: &SolveReport, dir: &Path) -> Result<(), String> {
    let mut by_table: std::collections::BTreeMap<&str, Vec<[String; 3]>> = Default::default();
    for d in &report.deltas {
        let value = if d.new_value.is_unset() { "?".to_string() } else { d.new_value.to_string() };
        by_table
            .entry(d.table.as_str())
            .or_default()
            .push([d.row_key.to_string(), d.column.clone(), value]);
    }
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    for (table, rows) in by_table {
        let path = dir.join(format!("{table}.delta.csv"));
        let err = |e: csv::Error| format!("{}: {e}", path.display());
        let mut w = csv::Writer::from_path(&path).map_err(err)?;
        w.write_record(["key", "column", "value"]).map_err(err)?;
        for r in rows {
            w.write_record(&r).map_err(err)?;
        }
        w.flush().map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}
