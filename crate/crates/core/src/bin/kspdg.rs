//! Command-line front end for the k-shortest-path engine: graph partitioning,
//! index construction dumps, workload generation, benchmark replay through
//! the cluster simulation, and oracle validation.
//!
//! Every output is CSV or line-delimited text. Exit codes: 0 on success, 1 on
//! usage errors, 2 on data errors (unreadable or malformed inputs), 3 when
//! the validation suite reports a failed check.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use kspdg::bounds::{estimate_epindex_elements, MbdTable, SubgraphBounds};
use kspdg::compact::{compact_subgraph_bounds, compaction_report};
use kspdg::fixed::fmt_milli;
use kspdg::graph::{parse_dimacs, Graph};
use kspdg::partition::{partition, write_partition_csv};
use kspdg::skeleton::build_skeleton;
use kspdg::workload::{
    emit_queries_csv, emit_trace, generate_queries, generate_weight_stream, interleave_queries,
    parse_counters_csv, parse_queries_csv, parse_trace, run_bench, validate, BenchConfig,
    BenchMode, CounterRow, FaultInjection,
};

#[derive(Parser)]
#[command(name = "kspdg", version, about = "k-shortest-path queries over dynamic weighted graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Partition a graph into bounded-size subgraphs and dump vertex ownership
    Partition(PartitionArgs),
    /// Build the lower-bound index and dump bounds, skeleton, trees, and stats
    BuildIndex(BuildIndexArgs),
    /// Generate a seeded dynamic edge-weight event trace
    GenStream(GenStreamArgs),
    /// Generate seeded random connected queries as CSV
    GenQueries(GenQueriesArgs),
    /// Replay a workload and write results, counters, message log, aggregates
    Run(RunArgs),
    /// Run the oracle-equivalence and invariant suite; exit 3 on any failure
    Validate(ValidateArgs),
    /// Aggregate per-query counter files into one summary CSV
    Report(ReportArgs),
}

/// Engine configuration. Defaults < `--config` file < explicit flags; the
/// flags mirror the file's `key=value` names.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// key=value config file; missing keys keep their defaults
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// max vertices per subgraph
    #[arg(long, value_name = "N")]
    z: Option<usize>,
    /// bounding paths kept per boundary pair
    #[arg(long, value_name = "N")]
    xi: Option<usize>,
    /// k used where a query source names no k
    #[arg(long, value_name = "N")]
    k_default: Option<usize>,
    /// MinHash rows per signature
    #[arg(long, value_name = "N")]
    h: Option<usize>,
    /// LSH bands (must divide h)
    #[arg(long, value_name = "N")]
    b: Option<usize>,
    /// seed for the simulation's message scheduler
    #[arg(long, value_name = "SEED")]
    scheduler_seed: Option<u64>,
    /// route partial-search requests only to owning workers
    #[arg(long, value_name = "BOOL")]
    targeted_routing: Option<bool>,
    /// pin every query to the weight snapshot at assignment
    #[arg(long, value_name = "BOOL")]
    strict_isolation: Option<bool>,
    /// drain worker queues in parallel (results stay identical; log order is
    /// its own deterministic order)
    #[arg(long, value_name = "BOOL")]
    parallel: Option<bool>,
    /// number of subgraph workers
    #[arg(long, value_name = "N")]
    subgraph_workers: Option<usize>,
    /// number of query workers
    #[arg(long, value_name = "N")]
    query_workers: Option<usize>,
    /// fraction of edges changing per snapshot, in [0,1]
    #[arg(long, value_name = "F")]
    alpha: Option<f64>,
    /// relative weight-variation bound, in [0,1)
    #[arg(long, value_name = "F")]
    tau: Option<f64>,
    /// update batches per generated stream
    #[arg(long, value_name = "N")]
    snapshots: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<BenchConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                BenchConfig::parse(&text, &p.display().to_string())?
            }
            None => BenchConfig::default(),
        };
        macro_rules! override_with {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field {
                    cfg.$field = v;
                })*
            };
        }
        override_with!(
            z, xi, k_default, h, b, scheduler_seed, targeted_routing, strict_isolation,
            parallel, subgraph_workers, query_workers, alpha, tau, snapshots
        );
        Ok(cfg)
    }
}

#[derive(Args)]
struct PartitionArgs {
    /// input graph (.gr, 9th-DIMACS-challenge format)
    #[arg(long, value_name = "FILE")]
    graph: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// accepted for interface uniformity; partitioning is deterministic
    #[arg(long, default_value_t = 0, value_name = "SEED")]
    seed: u64,
    /// output file (stdout if absent)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildIndexArgs {
    /// input graph (.gr, 9th-DIMACS-challenge format)
    #[arg(long, value_name = "FILE")]
    graph: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// accepted for interface uniformity; index construction is deterministic
    #[arg(long, default_value_t = 0, value_name = "SEED")]
    seed: u64,
    /// directory for bounds.csv, skeleton.csv, mptree.txt, compaction.csv
    #[arg(long, default_value = ".", value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GenStreamArgs {
    /// input graph (.gr, 9th-DIMACS-challenge format)
    #[arg(long, value_name = "FILE")]
    graph: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// stream seed; identical seed and config give a byte-identical trace
    #[arg(long, default_value_t = 0, value_name = "SEED")]
    seed: u64,
    /// output file (stdout if absent)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenQueriesArgs {
    /// input graph (.gr, 9th-DIMACS-challenge format)
    #[arg(long, value_name = "FILE")]
    graph: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// query seed
    #[arg(long, default_value_t = 0, value_name = "SEED")]
    seed: u64,
    /// number of queries
    #[arg(long, default_value_t = 50, value_name = "N")]
    count: usize,
    /// smallest k drawn (default 1)
    #[arg(long, value_name = "N")]
    k_min: Option<usize>,
    /// largest k drawn (default: the config's k_default)
    #[arg(long, value_name = "N")]
    k_max: Option<usize>,
    /// output file (stdout if absent)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// input graph (.gr, 9th-DIMACS-challenge format)
    #[arg(long, value_name = "FILE")]
    graph: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// scheduler seed; shorthand that overrides --scheduler-seed when given
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// event trace replayed against the graph (may itself contain queries)
    #[arg(long, value_name = "FILE")]
    stream: Option<PathBuf>,
    /// query CSV, spread evenly over the stream's tick range
    #[arg(long, value_name = "FILE")]
    queries: Option<PathBuf>,
    /// ksp-dg (cluster simulation), yen (oracle baseline), or pyen-only
    #[arg(long, default_value = "ksp-dg", value_parser = parse_bench_mode, value_name = "MODE")]
    mode: BenchMode,
    /// directory for results.csv, counters.csv, messages.csv, aggregate.csv;
    /// aggregate.csv carries wall-clock timing and is the only output that
    /// varies between identical runs
    #[arg(long, default_value = ".", value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// input graph (.gr, 9th-DIMACS-challenge format)
    #[arg(long, value_name = "FILE")]
    graph: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// workload seed for the generated update stream and queries
    #[arg(long, default_value_t = 0, value_name = "SEED")]
    seed: u64,
    /// number of random connected queries to interleave
    #[arg(long, default_value_t = 50, value_name = "N")]
    queries: usize,
    /// largest k drawn per query
    #[arg(long, default_value_t = 10, value_name = "N")]
    k_max: usize,
    /// self-test hook: corrupt state after setup and expect the suite to
    /// name the violated invariant
    #[arg(long, value_parser = parse_fault, value_name = "FAULT")]
    inject_fault: Option<FaultInjection>,
}

#[derive(Args)]
struct ReportArgs {
    /// per-query counter CSV files, one summary row each
    #[arg(required = true, value_name = "COUNTERS_CSV")]
    counters: Vec<PathBuf>,
    /// accepted for interface uniformity; aggregation is deterministic
    #[arg(long, default_value_t = 0, value_name = "SEED")]
    seed: u64,
    /// output file (stdout if absent)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn parse_bench_mode(s: &str) -> Result<BenchMode, String> {
    BenchMode::parse(s).ok_or_else(|| format!("unknown mode `{s}` (ksp-dg, yen, pyen-only)"))
}

fn parse_fault(s: &str) -> Result<FaultInjection, String> {
    match s {
        "corrupt-lbd" => Ok(FaultInjection::CorruptLbd),
        other => Err(format!("unknown fault `{other}` (corrupt-lbd)")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too; they are not usage errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.cmd {
        Cmd::Partition(a) => cmd_partition(a),
        Cmd::BuildIndex(a) => cmd_build_index(a),
        Cmd::GenStream(a) => cmd_gen_stream(a),
        Cmd::GenQueries(a) => cmd_gen_queries(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Validate(a) => cmd_validate(a),
        Cmd::Report(a) => cmd_report(a),
    }
}

fn load_graph(p: &Path) -> anyhow::Result<Graph> {
    let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
    let g = parse_dimacs(BufReader::new(f)).with_context(|| format!("{}", p.display()))?;
    Ok(g)
}

fn write_out(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
    let p = dir.join(name);
    fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))
}

fn cmd_partition(a: PartitionArgs) -> anyhow::Result<ExitCode> {
    let g = load_graph(&a.graph)?;
    let cfg = a.cfg.load()?;
    let parts = partition(&g, cfg.z)?;
    let mut csv = Vec::new();
    write_partition_csv(&parts, &mut csv)?;
    write_out(&a.out, std::str::from_utf8(&csv).expect("ascii csv"))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_build_index(a: BuildIndexArgs) -> anyhow::Result<ExitCode> {
    let g = load_graph(&a.graph)?;
    let cfg = a.cfg.load()?;
    let parts = partition(&g, cfg.z)?;

    let mut bounds_csv = String::from("sg,src,dst,phi,actual,bound\n");
    let mut compaction_csv = String::from("sg,node_count,element_count,ratio\n");
    let mut tree_txt = String::new();
    let mut all_bounds = Vec::with_capacity(parts.subgraphs.len());
    let mut stored_paths = 0usize;
    let (mut nodes, mut elements) = (0usize, 0usize);
    let mut estimate = 0u64;
    for sg in &parts.subgraphs {
        let b = SubgraphBounds::build(&g, sg, cfg.xi);
        for (u, v, phi, actual, bound) in b.dump_rows() {
            bounds_csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                sg.id,
                u,
                v,
                phi,
                fmt_milli(actual),
                fmt_milli(bound)
            ));
        }
        stored_paths += b.pairs.values().map(|pb| pb.paths.len()).sum::<usize>();
        let idx = compact_subgraph_bounds(&b, cfg.h, cfg.b)?;
        let rep = compaction_report(&idx.gmp, &idx.ebp);
        compaction_csv.push_str(&format!(
            "{},{},{},{:.6}\n",
            sg.id, rep.node_count, rep.element_count, rep.ratio
        ));
        tree_txt.push_str(&idx.gmp.dump_text());
        nodes += rep.node_count;
        elements += rep.element_count;
        estimate += estimate_epindex_elements(
            sg.boundary.len() as u64,
            cfg.xi as u64,
            sg.edges.len() as u64,
        );
        all_bounds.push(b);
    }
    let sk = build_skeleton(&MbdTable::from_bounds(&all_bounds));
    let mut sk_csv = Vec::new();
    sk.dump_csv(&mut sk_csv)?;

    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    write_file(&a.out_dir, "bounds.csv", bounds_csv.as_bytes())?;
    write_file(&a.out_dir, "skeleton.csv", &sk_csv)?;
    write_file(&a.out_dir, "mptree.txt", tree_txt.as_bytes())?;
    write_file(&a.out_dir, "compaction.csv", compaction_csv.as_bytes())?;

    let ratio = if elements == 0 {
        1.0
    } else {
        nodes as f64 / elements as f64
    };
    println!("subgraphs: {}", parts.subgraphs.len());
    println!("boundary vertices: {}", parts.boundary_vertices().len());
    println!("bounding paths stored: {stored_paths}");
    println!("tree nodes: {nodes}, index elements: {elements}, compaction ratio: {ratio:.6}");
    println!("estimated worst-case index elements: {estimate}");
    println!(
        "wrote bounds.csv, skeleton.csv, mptree.txt, compaction.csv to {}",
        a.out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen_stream(a: GenStreamArgs) -> anyhow::Result<ExitCode> {
    let g = load_graph(&a.graph)?;
    let cfg = a.cfg.load()?;
    let events = generate_weight_stream(&g, &cfg.dynamics(a.seed))?;
    write_out(&a.out, &emit_trace(&events))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen_queries(a: GenQueriesArgs) -> anyhow::Result<ExitCode> {
    let g = load_graph(&a.graph)?;
    let cfg = a.cfg.load()?;
    let k_range = (a.k_min.unwrap_or(1), a.k_max.unwrap_or(cfg.k_default));
    let rows = generate_queries(&g, a.count, k_range, a.seed)?;
    write_out(&a.out, &emit_queries_csv(&rows))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(a: RunArgs) -> anyhow::Result<ExitCode> {
    let g = load_graph(&a.graph)?;
    let mut cfg = a.cfg.load()?;
    if let Some(seed) = a.seed {
        cfg.scheduler_seed = seed;
    }
    let mut trace = match &a.stream {
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_trace(&text, &p.display().to_string())?
        }
        None => Vec::new(),
    };
    if let Some(p) = &a.queries {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let rows = parse_queries_csv(&text, &p.display().to_string())?;
        interleave_queries(&mut trace, &rows);
    }
    let out = run_bench(&g, &cfg, &trace, a.mode)?;

    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    write_file(&a.out_dir, "results.csv", out.results_text().as_bytes())?;
    write_file(&a.out_dir, "counters.csv", out.counters_csv().as_bytes())?;
    write_file(&a.out_dir, "messages.csv", out.log_csv.as_bytes())?;
    write_file(&a.out_dir, "aggregate.csv", out.aggregate_csv(&cfg).as_bytes())?;

    for r in &out.rejects {
        eprintln!("warning: rejected update: {r}");
    }
    println!("mode: {}", out.mode.name());
    println!("queries answered: {}", out.results.len());
    println!("elapsed: {} ms", out.elapsed_ms);
    println!(
        "wrote results.csv, counters.csv, messages.csv, aggregate.csv to {}",
        a.out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(a: ValidateArgs) -> anyhow::Result<ExitCode> {
    let g = load_graph(&a.graph)?;
    let cfg = a.cfg.load()?;
    let fault = a.inject_fault.unwrap_or(FaultInjection::None);
    let report = validate(&g, &cfg, a.seed, a.queries, a.k_max, fault)?;
    print!("{}", report.to_text());
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}

fn cmd_report(a: ReportArgs) -> anyhow::Result<ExitCode> {
    let mut out = String::from(
        "file,queries,mean_iterations,mean_reuse_hits,mean_pruned_tasks,mean_subgraph_invocations\n",
    );
    for p in &a.counters {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let rows = parse_counters_csv(&text, &p.display().to_string())?;
        let n = rows.len().max(1) as f64;
        let mean = |f: fn(&CounterRow) -> u64| rows.iter().map(f).sum::<u64>() as f64 / n;
        out.push_str(&format!(
            "{},{},{:.3},{:.3},{:.3},{:.3}\n",
            p.display(),
            rows.len(),
            mean(|c| c.iterations),
            mean(|c| c.reuse_hits),
            mean(|c| c.pruned_tasks),
            mean(|c| c.subgraph_invocations),
        ));
    }
    write_out(&a.out, &out)?;
    Ok(ExitCode::SUCCESS)
}
