use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use poa_forge::choice::MechanismChoice;
use poa_forge::experiment::{
    run_simulation, run_sweep, write_simulation_csv, write_sweep_csv, MechanismSpec,
    SimulationFamily, SimulationSpec, SweepFamily, SweepSpec,
};
use poa_forge::game::{exhaustive_oracle, DynamicsOptions, GameInstance, Schedule};
use poa_forge::instance_gen::{
    gen_content_distribution, gen_vehicle_target, ContentDistributionConfig, VehicleTargetConfig,
};
use poa_forge::mechanisms::{gairing_optimal_covering, BasisFamily, Mechanism, WelfareBasis};
use poa_forge::poa_closed::{poa_covering, poa_submodular, poa_supermodular};
use poa_forge::poa_lp::{
    design_optimal_mechanism, design_optimal_mechanism_submodular, dual_program, poa_dual_lp,
    PoaReport,
};
use poa_forge::Error;

const AGREEMENT_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "poa-forge", version, about = "Price-of-anarchy analysis and design of utility mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price of anarchy of a mechanism on a welfare basis.
    Poa(PoaArgs),
    /// Optimal mechanism for a welfare basis.
    Design(DesignArgs),
    /// PoA over a grid of basis parameters, as CSV.
    Sweep(SweepArgs),
    /// Generate random instances and run best-response dynamics on each.
    Simulate(SimulateArgs),
    /// Exhaustive optimum and equilibrium search on one instance file.
    Oracle(OracleArgs),
    /// Write generated instances as JSON files plus a manifest.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PoaMethod {
    Lp,
    Closed,
    Both,
}

#[derive(Args)]
struct PoaArgs {
    /// `covering`, `power:d=<d>`, `vehicle:p=<p>` or `file:<path>`.
    #[arg(long)]
    basis: String,
    #[arg(long)]
    n: Option<usize>,
    /// `sv`, `mc`, `gairing`, `optimal`, `optimal_submodular` or `file:<path>`.
    #[arg(long, default_value = "sv")]
    mech: String,
    #[arg(long, value_enum, default_value = "lp")]
    method: PoaMethod,
    /// Write the PoA linear program in tableau form to this path.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DesignVariant {
    Lp,
    LpSubmodular,
    GairingCovering,
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long)]
    basis: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value = "lp")]
    variant: DesignVariant,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    Power,
    Vehicle,
    Covering,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    family: SweepKind,
    #[arg(long, default_value_t = 0.0)]
    from: f64,
    #[arg(long, default_value_t = 1.0)]
    to: f64,
    #[arg(long, default_value_t = 11)]
    steps: usize,
    #[arg(long)]
    n: usize,
    /// Comma-separated mechanism list.
    #[arg(long, value_delimiter = ',', default_value = "sv,mc,optimal")]
    mechs: Vec<String>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Vehicle,
    Content,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScheduleKind {
    RoundRobin,
    Random,
}

#[derive(Args)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Vehicle family: number of agents.
    #[arg(long, default_value_t = 10)]
    agents: usize,
    /// Vehicle family: detection probability.
    #[arg(long, default_value_t = 0.8)]
    p: f64,
    /// Vehicle family: number of targets, `agents + 1` when omitted.
    #[arg(long)]
    targets: Option<usize>,
    /// Content family: grid width and height.
    #[arg(long, default_value_t = 100)]
    grid: usize,
    #[arg(long, default_value_t = 20)]
    nodes: usize,
    #[arg(long, default_value_t = 100)]
    items: usize,
    #[arg(long, default_value_t = 0.7)]
    alpha: f64,
    #[arg(long, default_value_t = 25.0)]
    radius: f64,
    /// Content family: items stored per node.
    #[arg(long, default_value_t = 3)]
    cap: usize,
    /// Defaults to `sv` for vehicle and `gairing` for content.
    #[arg(long)]
    mech: Option<String>,
}

impl FamilyArgs {
    fn vehicle(&self) -> VehicleTargetConfig {
        VehicleTargetConfig {
            agents: self.agents,
            resources: self.targets,
            p: self.p,
            seed: self.seed,
            mechanism: self.mech.clone().unwrap_or_else(|| "sv".into()),
        }
    }

    fn content(&self) -> ContentDistributionConfig {
        ContentDistributionConfig {
            grid_x: self.grid,
            grid_y: self.grid,
            nodes: self.nodes,
            items: self.items,
            alpha: self.alpha,
            radius: self.radius,
            radii: None,
            cap: self.cap,
            seed: self.seed,
            mechanism: self.mech.clone().unwrap_or_else(|| "gairing".into()),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Run the exhaustive oracle on every vehicle instance.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    oracle_cap: Option<u128>,
    #[arg(long, value_enum, default_value = "round-robin")]
    schedule: ScheduleKind,
    #[arg(long, default_value_t = 10_000)]
    max_rounds: usize,
    /// Per-instance CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary JSON destination; standard error when omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    cap: Option<u128>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::CapExceeded { .. } => 3,
        Error::Solver(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Poa(args) => cmd_poa(&args),
        Command::Design(args) => cmd_design(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Oracle(args) => cmd_oracle(&args),
        Command::Generate(args) => cmd_generate(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("POA_FORGE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&k| k > 0)
        .ok_or_else(|| format!("POA_FORGE_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn read_file(path: &Path) -> poa_forge::Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::InvalidParameter(format!("cannot read {}: {e}", path.display()))
    })
}

fn load_basis(spec: &str, n: Option<usize>) -> poa_forge::Result<WelfareBasis> {
    if let Some(path) = spec.strip_prefix("file:") {
        let w: WelfareBasis = serde_json::from_str(&read_file(Path::new(path))?)?;
        if let Some(n) = n.filter(|&n| n != w.n()) {
            return Err(Error::InvalidParameter(format!(
                "basis file defines n = {} but --n {n} was given",
                w.n()
            )));
        }
        return Ok(w);
    }
    let n = n.ok_or_else(|| Error::InvalidParameter("--n is required for a named basis".into()))?;
    BasisFamily::parse(spec)?.build(n)
}

fn load_mechanism(spec: &str) -> poa_forge::Result<MechanismSpec> {
    match spec.strip_prefix("file:") {
        Some(path) => {
            let f: Mechanism = serde_json::from_str(&read_file(Path::new(path))?)?;
            Ok(MechanismSpec::Fixed(f))
        }
        None => Ok(MechanismSpec::Named(spec.parse::<MechanismChoice>()?)),
    }
}

fn print_json(value: &Value) -> poa_forge::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Picks the closed form whose hypotheses match the shape of `w`.
fn closed_form(f: &Mechanism, w: &WelfareBasis) -> poa_forge::Result<PoaReport> {
    let n = w.n();
    if w.is_covering() {
        poa_covering(f, n)
    } else if w.is_concave() {
        poa_submodular(f, w, n)
    } else if w.is_convex() {
        poa_supermodular(f, w, n)
    } else {
        Err(Error::Precondition {
            condition: "w is neither submodular, covering nor supermodular".into(),
            index: None,
        })
    }
}

fn cmd_poa(args: &PoaArgs) -> poa_forge::Result<u8> {
    let w = load_basis(&args.basis, args.n)?;
    let mech = load_mechanism(&args.mech)?;
    let f = mech.resolve(&w)?;
    let n = w.n();
    if let Some(path) = &args.dump_lp {
        let file = fs::File::create(path)?;
        dual_program(&f, &w, n)?.write_tableau(io::BufWriter::new(file))?;
    }
    let lp = match args.method {
        PoaMethod::Closed => None,
        _ => Some(poa_dual_lp(&f, &w, n)?),
    };
    let closed = match args.method {
        PoaMethod::Lp => None,
        _ => Some(closed_form(&f, &w)?),
    };
    let poa = lp.as_ref().or(closed.as_ref()).map(|r| r.poa).unwrap_or_default();
    let mut out = json!({
        "basis": w,
        "n": n,
        "mechanism": mech.label(),
        "f": f.values(),
        "poa": poa,
    });
    if let Some(r) = &lp {
        out["lp"] = serde_json::to_value(r)?;
    }
    if let Some(r) = &closed {
        out["closed"] = serde_json::to_value(r)?;
    }
    let mut code = 0;
    if let (Some(a), Some(b)) = (&lp, &closed) {
        let gap = (a.poa - b.poa).abs();
        out["agreement"] = json!({ "gap": gap, "ok": gap <= AGREEMENT_TOL });
        if gap > AGREEMENT_TOL {
            eprintln!("error: lp and closed form disagree by {gap:e}");
            code = 4;
        }
    }
    print_json(&out)?;
    Ok(code)
}

fn cmd_design(args: &DesignArgs) -> poa_forge::Result<u8> {
    let w = load_basis(&args.basis, args.n)?;
    let n = w.n();
    let (f, report) = match args.variant {
        DesignVariant::Lp => design_optimal_mechanism(&w, n)?,
        DesignVariant::LpSubmodular => design_optimal_mechanism_submodular(&w, n)?,
        DesignVariant::GairingCovering => {
            if !w.is_covering() {
                return Err(Error::Precondition {
                    condition: "gairing_covering requires the covering basis".into(),
                    index: None,
                });
            }
            let f = gairing_optimal_covering(n)?;
            let report = poa_dual_lp(&f, &w, n)?;
            (f, report)
        }
    };
    print_json(&json!({
        "basis": w,
        "n": n,
        "mechanism": f,
        "report": report,
    }))?;
    Ok(0)
}

fn cmd_sweep(args: &SweepArgs) -> poa_forge::Result<u8> {
    let family = match args.family {
        SweepKind::Power => SweepFamily::Power { from: args.from, to: args.to },
        SweepKind::Vehicle => SweepFamily::Vehicle { from: args.from, to: args.to },
        SweepKind::Covering => SweepFamily::Covering,
    };
    let mechanisms = args
        .mechs
        .iter()
        .map(|m| load_mechanism(m))
        .collect::<poa_forge::Result<Vec<_>>>()?;
    let spec = SweepSpec {
        family,
        steps: args.steps,
        n: args.n,
        mechanisms,
    };
    let rows = run_sweep(&spec)?;
    match &args.out {
        Some(path) => write_sweep_csv(&rows, io::BufWriter::new(fs::File::create(path)?))?,
        None => write_sweep_csv(&rows, io::stdout().lock())?,
    }
    Ok(0)
}

fn cmd_simulate(args: &SimulateArgs) -> poa_forge::Result<u8> {
    let fam = &args.family;
    let (family, w, mech) = match fam.family {
        Family::Vehicle => {
            let cfg = fam.vehicle();
            let w = cfg.basis()?;
            let mech = cfg.mechanism.clone();
            (SimulationFamily::Vehicle(cfg), w, mech)
        }
        Family::Content => {
            let cfg = fam.content();
            let w = cfg.basis()?;
            let mech = cfg.mechanism.clone();
            (SimulationFamily::Content(cfg), w, mech)
        }
    };
    let spec_mech = load_mechanism(&mech)?;
    let f = spec_mech.resolve(&w)?.with_label(spec_mech.label());
    let schedule = match args.schedule {
        ScheduleKind::RoundRobin => Schedule::RoundRobin,
        ScheduleKind::Random => Schedule::Random { seed: fam.seed },
    };
    let spec = SimulationSpec {
        family,
        count: fam.count,
        seed: fam.seed,
        oracle: args.oracle,
        oracle_cap: args.oracle_cap,
        dynamics: DynamicsOptions {
            schedule,
            epsilon: None,
            max_rounds: args.max_rounds,
        },
    };
    let (results, summary) = run_simulation(&spec, &f)?;
    match &args.out {
        Some(path) => write_simulation_csv(&results, io::BufWriter::new(fs::File::create(path)?))?,
        None => write_simulation_csv(&results, io::stdout().lock())?,
    }
    if summary.skipped > 0 {
        eprintln!("warning: {} instances exceeded the oracle cap and were skipped", summary.skipped);
    }
    let text = serde_json::to_string_pretty(&summary)?;
    match &args.summary {
        Some(path) => fs::write(path, text + "\n")?,
        None => eprintln!("{text}"),
    }
    Ok(0)
}

fn cmd_oracle(args: &OracleArgs) -> poa_forge::Result<u8> {
    let g = GameInstance::from_json(&read_file(&args.instance)?)?;
    let report = exhaustive_oracle(&g, args.cap)?;
    print_json(&serde_json::to_value(&report)?)?;
    Ok(0)
}

fn cmd_generate(args: &GenerateArgs) -> poa_forge::Result<u8> {
    let fam = &args.family;
    fs::create_dir_all(&args.out_dir)?;
    let mut manifest = Vec::with_capacity(fam.count);
    for i in 0..fam.count {
        let seed = fam.seed.wrapping_add(i as u64);
        let g = match fam.family {
            Family::Vehicle => gen_vehicle_target(&VehicleTargetConfig { seed, ..fam.vehicle() })?,
            Family::Content => {
                gen_content_distribution(&ContentDistributionConfig { seed, ..fam.content() })?
            }
        };
        let file = format!("instance_{i:05}.json");
        fs::write(args.out_dir.join(&file), g.to_json()? + "\n")?;
        manifest.push(json!({ "seed": seed, "file": file }));
    }
    let text = serde_json::to_string_pretty(&Value::Array(manifest))?;
    fs::write(args.out_dir.join("manifest.json"), text + "\n")?;
    Ok(0)
}
