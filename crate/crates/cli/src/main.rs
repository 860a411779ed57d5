use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anonq::election::{qle, qle_upper_bound, ElectionBranch};
use anonq::ghz::ghz_share;
use anonq::postelect::{compute_function, Builtin};
use anonq::qsim::{Mode, StateDump};
use anonq::runtime::CostReport;
use anonq::topology::{catalog, CatalogGraph, Topology};
use anonq::verify::{cost_row, CostRow, Suite, SuiteReport};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "anonq",
    version,
    about = "Quantum leader election and GHZ sharing on anonymous networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Elect a unique leader.
    Elect {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        measure: MeasureArgs,
        /// Run the variant that only knows an upper bound on n.
        #[arg(long, value_name = "N")]
        upper_bound: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Share the cat state over Z_k.
    Ghz {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        k: u32,
        #[command(flatten)]
        measure: MeasureArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Elect a leader, then evaluate a function of the graph and labels.
    Compute {
        #[command(flatten)]
        graph: GraphArgs,
        /// majority, parity, all-equal or labeled-cycle.
        #[arg(long)]
        function: Builtin,
        /// Comma-separated labels, one per node.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        labels: Vec<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run verification suites.
    Verify {
        /// A suite name or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measured H0, H1 and QLE costs per graph.
    CostTable {
        #[arg(long, default_value = "ring")]
        catalog: CatalogGraph,
        /// Comma-separated sizes.
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [3, 4, 5, 6])]
        n: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["graph", "catalog"])))]
struct GraphArgs {
    /// Edge-list file.
    #[arg(long, conflicts_with_all = ["catalog", "n"])]
    graph: Option<PathBuf>,
    /// ring, path, complete, star or torus2d.
    #[arg(long, requires = "n")]
    catalog: Option<CatalogGraph>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct MeasureArgs {
    /// Sample one outcome with this seed.
    #[arg(long, conflicts_with = "all_branches")]
    seed: Option<u64>,
    /// Follow every measurement outcome (the default).
    #[arg(long)]
    all_branches: bool,
}

impl MeasureArgs {
    fn mode(&self) -> Mode {
        match self.seed {
            Some(s) => Mode::Sample(s),
            None => Mode::AllBranches,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

enum Failure {
    Usage(String),
    Check(String),
}

impl From<anonq::Error> for Failure {
    fn from(e: anonq::Error) -> Self {
        Failure::Check(e.to_string())
    }
}

fn load(args: &GraphArgs) -> Result<(String, Topology), Failure> {
    match (&args.graph, args.catalog, args.n) {
        (Some(path), _, _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let g = Topology::parse(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            Ok((path.display().to_string(), g))
        }
        (None, Some(c), Some(n)) => {
            let g = catalog(c, n).map_err(|e| Failure::Usage(e.to_string()))?;
            Ok((format!("{c}-{n}"), g))
        }
        _ => Err(Failure::Usage(
            "give --graph FILE or --catalog NAME --n N".into(),
        )),
    }
}

/// A closed pipe is not an error worth reporting.
fn write_stdout(text: &str) {
    let _ = io::stdout().lock().write_all(text.as_bytes());
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::AllBranches => "all-branches",
        Mode::Sample(_) => "sample",
    }
}

fn emit<T: Serialize>(value: &T, out: &Option<PathBuf>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Check(e.to_string()))?;
    write_stdout(&(text.clone() + "\n"));
    if let Some(path) = out {
        fs::write(path, text + "\n")
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ElectReport {
    graph: String,
    n: usize,
    m: usize,
    mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    upper_bound: Option<usize>,
    exact: bool,
    total_probability: f64,
    branches: Vec<ElectionBranch>,
    cost: CostReport,
}

fn elect(
    graph: &GraphArgs,
    measure: &MeasureArgs,
    upper_bound: Option<usize>,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let (label, g) = load(graph)?;
    let mode = measure.mode();
    let result = match upper_bound {
        Some(bound) => {
            if bound < g.n() {
                return Err(Failure::Usage(format!(
                    "--upper-bound {bound} is below n = {}",
                    g.n()
                )));
            }
            qle_upper_bound(&g, bound, mode)?
        }
        None => qle(&g, g.n(), mode)?,
    };
    let report = ElectReport {
        graph: label,
        n: g.n(),
        m: g.m(),
        mode: mode_name(mode),
        seed: measure.seed,
        upper_bound,
        exact: result.is_exact(),
        total_probability: result.total_probability(),
        branches: result.branches.clone(),
        cost: result.cost.clone(),
    };
    emit(&report, out)?;
    if !report.exact || (report.total_probability - 1.0).abs() > 1e-9 {
        return Err(Failure::Check(
            "a branch does not have exactly one leader".into(),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct GhzBranchReport {
    s: Vec<u32>,
    kept: usize,
    partner: Option<usize>,
    r: Vec<u32>,
    probability: f64,
    fidelity: f64,
    state: StateDump,
}

#[derive(Serialize)]
struct GhzReport {
    graph: String,
    n: usize,
    k: u32,
    mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    worst_fidelity: f64,
    branches: Vec<GhzBranchReport>,
    gates: std::collections::BTreeMap<String, usize>,
    foreign_gates: Vec<String>,
    cost: CostReport,
}

fn ghz(
    graph: &GraphArgs,
    k: u32,
    measure: &MeasureArgs,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let (label, g) = load(graph)?;
    if k < 2 {
        return Err(Failure::Usage("--k needs to be at least 2".into()));
    }
    let mode = measure.mode();
    let result = ghz_share(&g, k, mode)?;
    let reference = anonq::ghz::cat_state(k, 0, g.n())?;
    let branches = result
        .branches
        .iter()
        .map(|b| {
            Ok(GhzBranchReport {
                s: b.s.clone(),
                kept: b.kept,
                partner: b.partner,
                r: b.r.clone(),
                probability: b.probability,
                fidelity: b.state.fidelity(&reference)?,
                state: b.state.dump(),
            })
        })
        .collect::<anonq::Result<Vec<_>>>()?;
    let report = GhzReport {
        graph: label,
        n: g.n(),
        k,
        mode: mode_name(mode),
        seed: measure.seed,
        worst_fidelity: result.worst_fidelity()?,
        branches,
        gates: result.gates.clone(),
        foreign_gates: result.foreign_gates(),
        cost: result.cost.clone(),
    };
    emit(&report, out)?;
    if report.worst_fidelity < 1.0 - 1e-9 || !report.foreign_gates.is_empty() {
        return Err(Failure::Check("shared state is not the cat state".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct ComputeReport {
    graph: String,
    function: Builtin,
    labels: Vec<u32>,
    seed: u64,
    leader: usize,
    ids: Vec<u32>,
    values: Vec<u32>,
    expected: u32,
    cost: CostReport,
}

fn compute(
    graph: &GraphArgs,
    function: Builtin,
    labels: &[u32],
    seed: u64,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let (label, g) = load(graph)?;
    if labels.len() != g.n() {
        return Err(Failure::Usage(format!(
            "--labels needs {} values, got {}",
            g.n(),
            labels.len()
        )));
    }
    let result = compute_function(&g, labels, |a, x| function.eval(a, x), seed)?;
    let expected = function.eval(&g.adjacency_matrix(), labels);
    let report = ComputeReport {
        graph: label,
        function,
        labels: labels.to_vec(),
        seed,
        leader: result.leader,
        ids: result.tree.ids.clone(),
        values: result.values.clone(),
        expected,
        cost: result.cost.clone(),
    };
    emit(&report, out)?;
    if report.values.iter().any(|&v| v != expected) {
        return Err(Failure::Check(
            "parties disagree with direct evaluation".into(),
        ));
    }
    Ok(())
}

fn verify(suite: &str, out: &Option<PathBuf>) -> Result<(), Failure> {
    let suites: Vec<Suite> = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![suite
            .parse()
            .map_err(|e: anonq::Error| Failure::Usage(e.to_string()))?]
    };
    let reports: Vec<SuiteReport> = suites
        .into_iter()
        .map(|s| {
            let r = s.run();
            eprintln!("{}", r.summary_line());
            r
        })
        .collect();
    emit(&reports, out)?;
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.suite.name())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "failing suites: {}",
            failed.join(", ")
        )))
    }
}

fn csv(rows: &[CostRow]) -> String {
    let mut out = String::from(
        "graph,n,m,h0_rounds,h0_qubits,h1_rounds,h1_qubits,qle_rounds,qle_qubits,qle_bits,identity_holds,rounds_per_n,qubits_per_mn2\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.graph,
            r.n,
            r.m,
            r.h0.rounds,
            r.h0.qubits_sent,
            r.h1.rounds,
            r.h1.qubits_sent,
            r.qle.rounds,
            r.qle.qubits_sent,
            r.qle.bits_sent,
            r.identity_holds,
            r.rounds_per_n,
            r.qubits_per_mn2,
        ));
    }
    out
}

fn cost_table(
    family: CatalogGraph,
    sizes: &[usize],
    format: Format,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let mut rows = Vec::new();
    for &n in sizes {
        let g = catalog(family, n).map_err(|e| Failure::Usage(e.to_string()))?;
        if n < 2 {
            return Err(Failure::Usage("cost rows need n >= 2".into()));
        }
        rows.push(cost_row(&format!("{family}-{n}"), &g)?);
    }
    match format {
        Format::Json => emit(&rows, out)?,
        Format::Csv => {
            let text = csv(&rows);
            write_stdout(&text);
            if let Some(path) = out {
                fs::write(path, text)
                    .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            }
        }
    }
    if rows.iter().all(|r| r.identity_holds) {
        Ok(())
    } else {
        Err(Failure::Check("cost identity violated".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Elect {
            graph,
            measure,
            upper_bound,
            out,
        } => elect(graph, measure, *upper_bound, out),
        Command::Ghz {
            graph,
            k,
            measure,
            out,
        } => ghz(graph, *k, measure, out),
        Command::Compute {
            graph,
            function,
            labels,
            seed,
            out,
        } => compute(graph, *function, labels, *seed, out),
        Command::Verify { suite, out } => verify(suite, out),
        Command::CostTable {
            catalog,
            n,
            format,
            out,
        } => cost_table(*catalog, n, *format, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("failed: {msg}");
            ExitCode::from(1)
        }
    }
}
