use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fleetsim::city::build_grid;
use fleetsim::demand::write_requests;
use fleetsim::dispatch::PolicyKind;
use fleetsim::sim::{self, build_workload, state_layout, write_jsonl, MetricsReport, ScenarioConfig, Variant};
use fleetsim::training::{train, write_loss_csv};

#[derive(Parser)]
#[command(name = "fleetsim", version, about = "Mixed passenger and parcel fleet simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the dispatch network and write a checkpoint and loss curve.
    Train(Common),
    /// Run one scenario with a fixed dispatch policy.
    Evaluate(Common),
    /// Run all four load and relay variants on the same demand.
    Compare(Common),
    /// Write the synthetic request stream as CSV.
    GenDemand(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML); defaults apply without one.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    days: Option<u32>,
    #[arg(long)]
    fleet_size: Option<usize>,
    /// `random`, `nearest-demand`, `dqn` or `dqn:<checkpoint>`.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long, default_value = "fleetsim-out")]
    out_dir: PathBuf,
    /// One of combined-hop, combined-direct, independent-hop, independent-direct.
    #[arg(long)]
    variant: Option<String>,
}

struct CliError {
    category: &'static str,
    message: String,
}

impl From<fleetsim::Error> for CliError {
    fn from(e: fleetsim::Error) -> Self {
        CliError {
            category: e.category(),
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        category: "usage",
        message: message.into(),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError {
        category: "io",
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                eprint!("{e}");
                return ExitCode::from(2);
            }
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::GenDemand(a) => cmd_gen_demand(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category, e.message.replace('\n', " "));
            ExitCode::from(if e.category == "usage" { 2 } else { 1 })
        }
    }
}

/// Config file, then flags on top; relative paths made absolute so the
/// snapshot written next to the results still resolves.
fn resolve(a: &Common) -> CliResult<ScenarioConfig> {
    let mut cfg = match &a.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(d) = a.days {
        cfg.days = d;
    }
    if let Some(n) = a.fleet_size {
        cfg.fleet.size = n;
    }
    if let Some(v) = &a.variant {
        cfg.variant = Variant::parse(v).ok_or_else(|| usage(format!("unknown variant `{v}`")))?;
    }
    if let Some(p) = &a.policy {
        let (kind, path) = match p.split_once(':') {
            Some((k, path)) => (k, Some(PathBuf::from(path))),
            None => (p.as_str(), None),
        };
        cfg.policy.kind = kind.parse::<PolicyKind>().map_err(usage)?;
        if path.is_some() && cfg.policy.kind != PolicyKind::Dqn {
            return Err(usage(format!("policy `{kind}` takes no checkpoint")));
        }
        if path.is_some() {
            cfg.policy.checkpoint = path;
        }
    }
    for p in [&mut cfg.trip_file, &mut cfg.hops.file, &mut cfg.policy.checkpoint].into_iter().flatten() {
        if let Ok(abs) = std::path::absolute(&*p) {
            *p = abs;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a ScenarioConfig,
    outputs: Vec<PathBuf>,
    /// Filled in once the run finishes.
    wall_clock_s: Option<f64>,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path, names: &[String]) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: names.iter().map(|n| dir.join(n)).collect(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn manifest_path(&self) -> PathBuf {
        self.dir.join("manifest.json")
    }

    fn write_manifest(&self, command: &str, cfg: &ScenarioConfig, elapsed: Option<f64>) -> CliResult<()> {
        let mut outputs = vec![self.manifest_path(), self.path("config.toml")];
        outputs.extend(self.files.iter().cloned());
        let m = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            config: cfg,
            outputs,
            wall_clock_s: elapsed,
        };
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        let path = self.manifest_path();
        std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
    }

    /// Create the directory and record the run before any result exists.
    fn begin(&self, command: &str, cfg: &ScenarioConfig) -> CliResult<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        let snap = self.path("config.toml");
        std::fs::write(&snap, cfg.to_toml()).map_err(|e| io_err(&snap, e))?;
        self.write_manifest(command, cfg, None)
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_metrics(path: &Path, report: &MetricsReport) -> CliResult<()> {
    report.write_csv(create(path)?)?;
    Ok(())
}

fn write_events(path: &Path, events: &[sim::Event]) -> CliResult<()> {
    let mut w = create(path)?;
    write_jsonl(&mut w, events).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

fn cmd_train(a: &Common) -> CliResult<()> {
    let start = Instant::now();
    let cfg = resolve(a)?;
    let names = ["checkpoint.json", "loss.csv", "metrics.csv"].map(String::from);
    let out = Outputs::new(&a.out_dir, &names);
    out.begin("train", &cfg)?;
    let t = train(&cfg)?;
    let ck = out.path("checkpoint.json");
    t.checkpoint.save(&ck)?;
    let loss = out.path("loss.csv");
    write_loss_csv(create(&loss)?, &t.losses)?;
    write_metrics(&out.path("metrics.csv"), &t.report)?;
    out.write_manifest("train", &cfg, Some(start.elapsed().as_secs_f64()))?;
    println!("checkpoint {}", ck.display());
    Ok(())
}

/// Everything that can fail on bad input is checked before any output is
/// written.
fn preflight(cfg: &ScenarioConfig) -> CliResult<()> {
    let (grid, _) = build_grid(&cfg.grid)?;
    sim::load_policy(cfg, &state_layout(cfg, &grid))?;
    Ok(())
}

fn cmd_evaluate(a: &Common) -> CliResult<()> {
    let start = Instant::now();
    let cfg = resolve(a)?;
    preflight(&cfg)?;
    let names = ["metrics.csv", "events.jsonl"].map(String::from);
    let out = Outputs::new(&a.out_dir, &names);
    out.begin("evaluate", &cfg)?;
    let run = sim::simulate(&cfg)?;
    write_metrics(&out.path("metrics.csv"), &run.report)?;
    write_events(&out.path("events.jsonl"), &run.events)?;
    out.write_manifest("evaluate", &cfg, Some(start.elapsed().as_secs_f64()))?;
    let s = &run.report.summary;
    println!(
        "accepted {} rejected {} profit/vehicle-day {:.2} occupancy {:.4}",
        s.accepted, s.rejected, s.profit_per_vehicle_day, s.occupancy_rate
    );
    Ok(())
}

const COMPARE_HEADER: [&str; 7] = [
    "variant",
    "accepted",
    "rejected",
    "profit_per_vehicle_day",
    "cruising_min_per_vehicle_day",
    "occupancy_rate",
    "hop_histogram",
];

fn cmd_compare(a: &Common) -> CliResult<()> {
    let start = Instant::now();
    let cfg = resolve(a)?;
    preflight(&cfg)?;
    let mut names: Vec<String> = Variant::ALL
        .iter()
        .flat_map(|v| [format!("metrics-{}.csv", v.name()), format!("events-{}.jsonl", v.name())])
        .collect();
    names.push("compare.csv".into());
    let out = Outputs::new(&a.out_dir, &names);
    out.begin("compare", &cfg)?;
    let runs = sim::run_baseline_matrix(&cfg, &Variant::ALL)?;
    let mut rows = Vec::new();
    for r in &runs {
        let name = r.variant.name();
        write_metrics(&out.path(&format!("metrics-{name}.csv")), &r.output.report)?;
        write_events(&out.path(&format!("events-{name}.jsonl")), &r.output.events)?;
        let s = &r.output.report.summary;
        rows.push([
            name.to_string(),
            s.accepted.to_string(),
            s.rejected.to_string(),
            format!("{:.4}", s.profit_per_vehicle_day),
            format!("{:.4}", s.cruising_min_per_vehicle_day),
            format!("{:.6}", s.occupancy_rate),
            s.hop_histogram.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
        ]);
    }
    let table = out.path("compare.csv");
    let mut w = csv::Writer::from_writer(create(&table)?);
    w.write_record(COMPARE_HEADER).map_err(|e| io_err(&table, e))?;
    for row in &rows {
        w.write_record(row).map_err(|e| io_err(&table, e))?;
    }
    w.flush().map_err(|e| io_err(&table, e))?;
    out.write_manifest("compare", &cfg, Some(start.elapsed().as_secs_f64()))?;
    print_table(&rows);
    Ok(())
}

fn print_table(rows: &[[String; 7]]) {
    let mut width = COMPARE_HEADER.map(str::len);
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells.iter().zip(width).map(|(c, w)| format!("{c:<w$}")).collect();
        println!("{}", parts.join("  ").trim_end());
    };
    line(COMPARE_HEADER.to_vec());
    for r in rows {
        line(r.iter().map(String::as_str).collect());
    }
}

fn cmd_gen_demand(a: &Common) -> CliResult<()> {
    let start = Instant::now();
    let cfg = resolve(a)?;
    let (grid, _) = build_grid(&cfg.grid)?;
    let out = Outputs::new(&a.out_dir, &["requests.csv".to_string()]);
    out.begin("gen-demand", &cfg)?;
    let reqs = build_workload(&cfg, &grid, cfg.seed, cfg.days)?;
    let path = out.path("requests.csv");
    write_requests(create(&path)?, &reqs)?;
    out.write_manifest("gen-demand", &cfg, Some(start.elapsed().as_secs_f64()))?;
    println!("{} requests -> {}", reqs.len(), path.display());
    Ok(())
}
