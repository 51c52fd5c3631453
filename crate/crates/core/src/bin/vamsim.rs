use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vamsim::harness::{self, output, HarnessError, RunOptions, Scenario, ScenarioConfig, Strategy};
use vamsim::network::{generate_grid, GridSpec};

#[derive(Parser)]
#[command(name = "vamsim", version, about = "Traffic management simulator with cooperative rerouting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write runs.csv and summary.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<u32>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write per-tick edge occupancy (edges.csv).
        #[arg(long)]
        edges: bool,
        /// Also write routing decisions (decisions.csv).
        #[arg(long)]
        decisions: bool,
        /// Also write signal and lane controller actions (control.csv).
        #[arg(long)]
        control: bool,
    },
    /// Run the same scenario under several strategies on identical seeds.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "vam,centralized,alert,none")]
        strategies: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Vary one parameter over a list of values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write a grid network file.
    GenNetwork {
        /// Rows and columns, e.g. 10x10.
        #[arg(long)]
        grid: String,
        #[arg(long = "block-m", default_value_t = 1500.0)]
        block_m: f64,
        #[arg(long, default_value_t = 2)]
        lanes: u32,
        #[arg(long, default_value_t = 13.9)]
        speed: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

const TRUNCATED: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(truncated) if truncated => {
            eprintln!("warning: some runs hit the tick limit before every vehicle arrived");
            ExitCode::from(TRUNCATED)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<bool, HarnessError> {
    match command {
        Command::Simulate { config, seed, runs, out, edges, decisions, control } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = runs {
                cfg.runs = r;
            }
            simulate(cfg, &out, RunOptions { edges, decisions, control, check_edges: false })
        }
        Command::Compare { config, strategies, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let strategies = strategies.iter().map(|s| s.parse()).collect::<Result<Vec<Strategy>, _>>()?;
            let cmp = harness::compare(&cfg, &strategies)?;
            let runs: Vec<_> = cmp.reports.iter().flat_map(|r| r.runs.iter().cloned()).collect();
            let aggregates: Vec<_> = cmp.reports.iter().map(|r| r.aggregate.clone()).collect();
            output::write_runs(output::create(&out, "runs.csv")?, &runs)?;
            output::write_summary(output::create(&out, "summary.csv")?, &aggregates)?;
            output::write_compare(output::create(&out, "compare.csv")?, &cmp.rows)?;
            for row in &cmp.rows {
                println!(
                    "{:<12} completion {:>9.1} ({:+.1}%)  travel {:>8.1} ({:+.1}%)  completed {}/{}",
                    row.strategy, row.completion_mean, row.completion_delta_pct, row.travel_mean, row.travel_delta_pct, row.completed_runs, cfg.runs
                );
            }
            Ok(runs.iter().any(|r| r.truncated))
        }
        Command::Sweep { config, param, values, out } => {
            if values.is_empty() {
                return Err(HarnessError::Config("--values is empty".into()));
            }
            let cfg = ScenarioConfig::load(&config)?;
            let points = harness::sweep(&cfg, &param, &values)?;
            output::write_sweep(output::create(&out, "sweep.csv")?, &param, &points)?;
            output::write_sweep_runs(output::create(&out, "sweep_runs.csv")?, &param, &points)?;
            for p in &points {
                let a = &p.report.aggregate;
                println!("{param}={:<6} completion {:>9.1}  travel {:>8.1}", p.value, a.completion_mean, a.travel_mean);
            }
            Ok(points.iter().any(|p| p.report.runs.iter().any(|r| r.truncated)))
        }
        Command::GenNetwork { grid, block_m, lanes, speed, out } => {
            let (rows, cols) = parse_grid(&grid)?;
            let net = generate_grid(&GridSpec::new(rows, cols, block_m, lanes, speed)).map_err(|e| HarnessError::Config(e.to_string()))?;
            write_file(&out, &net.to_toml_string())?;
            println!("{} intersections, {} edges -> {}", net.node_count(), net.edge_count(), out.display());
            Ok(false)
        }
    }
}

fn simulate(cfg: ScenarioConfig, out: &Path, options: RunOptions) -> Result<bool, HarnessError> {
    let scenario = Scenario::new(cfg)?;
    let outputs = scenario.run_all(options)?;
    let runs: Vec<_> = outputs.iter().map(|o| o.metrics.clone()).collect();
    let agg = harness::aggregate(&runs);
    output::write_runs(output::create(out, "runs.csv")?, &runs)?;
    output::write_summary(output::create(out, "summary.csv")?, std::slice::from_ref(&agg))?;
    if options.edges {
        let rows: Vec<_> = outputs.iter().flat_map(|o| o.edges.iter().cloned()).collect();
        output::write_edges(output::create(out, "edges.csv")?, &rows)?;
    }
    if options.decisions {
        let rows: Vec<_> = outputs
            .iter()
            .flat_map(|o| o.decisions.iter().map(move |d| (o.metrics.run_index, d.clone())))
            .collect();
        output::write_decisions(output::create(out, "decisions.csv")?, &rows)?;
    }
    if options.control {
        let rows: Vec<_> = outputs
            .iter()
            .flat_map(|o| o.control.iter().map(move |c| (o.metrics.run_index, c.clone())))
            .collect();
        output::write_control(output::create(out, "control.csv")?, &rows)?;
    }
    for r in &runs {
        let unfired = r.unfired_injections();
        if unfired > 0 {
            eprintln!("warning: run {}: {unfired} injection(s) never fired", r.run_index);
        }
    }
    println!(
        "{}: {} runs, {} completed, completion {:.1} (sd {:.1}), travel {:.1} (sd {:.1})",
        agg.strategy, agg.runs, agg.completed, agg.completion_mean, agg.completion_std, agg.travel_mean, agg.travel_std
    );
    Ok(runs.iter().any(|r| r.truncated))
}

fn parse_grid(s: &str) -> Result<(u32, u32), HarnessError> {
    let bad = || HarnessError::Config(format!("--grid expects RxC, got {s:?}"));
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?))
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}
