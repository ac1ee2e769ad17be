//! `coast` command-line front end.
//!
//! [`dispatch`] parses an argument vector, runs one subcommand and returns
//! the process exit status: 0 on success, 1 on a failed run, 2 on a usage
//! error or a missing input file.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coast::analysis::{
    anomaly_scores, co_membership, ddplot_table, homogeneity_test, local_depths, mann_whitney_exact, smooth_cell,
    SmoothMethod,
};
use coast::coast::{crd_of, grow, prune_sequence, select_subtree, CoastTree, GrowConfig, SplitRule};
use coast::consensus::Aggregator;
use coast::io::{
    anomaly_csv, co_membership_csv, depth_csv, discrepancy_csv, distortion_csv, fmt_num, load_rankings,
    read_csv_column, smoothed_json, summarize, trace_csv, write_rankings, write_text, Delimiter, RankingFile,
    RankingFormat, RunManifest,
};
use coast::models::{mallows_mixture_preset, plackett_luce_mixture_preset, sample_mixture, MixtureSpec};
use coast::partition::VarianceEstimator;
use coast::transport::distortion_report_scaled;
use coast::{DiscreteRankingDistribution, Error, RankingSample, Result};

/// Environment variable supplying the default for `--threads`.
pub const THREADS_ENV: &str = "RANK_THREADS";

#[derive(Parser, Debug)]
#[command(name = "coast", version, about = "Consensus ranking trees and distributions")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Write a run manifest (argv, seed, input and output digests) here.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Input {
    /// Ranking file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "ordering")]
    format: RankingFormat,
}

impl Input {
    fn load(&self) -> Result<RankingSample> {
        load_rankings(&RankingFile::new(&self.input, self.format))
    }
}

#[derive(Args, Debug, Clone)]
struct FitQuery {
    #[arg(long)]
    tree: PathBuf,
    /// Ranking file the local conditionals are estimated from.
    #[arg(long)]
    fit: PathBuf,
    /// Ranking file to score.
    #[arg(long)]
    query: PathBuf,
    #[arg(long, default_value = "ordering")]
    format: RankingFormat,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Mallows,
    PlackettLuce,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a labeled ranking file from a mixture.
    Sample {
        /// Mixture JSON document.
        #[arg(long, required_unless_present = "preset")]
        spec: Option<PathBuf>,
        /// Equal-weight mixture with separated random centers.
        #[arg(long, conflicts_with = "spec", requires = "items")]
        preset: Option<Preset>,
        #[arg(long)]
        items: Option<usize>,
        #[arg(long, default_value_t = 1)]
        components: usize,
        /// Mallows dispersion, or the Plackett–Luce worth ratio.
        #[arg(long, default_value_t = 1.0)]
        phi: f64,
        /// Minimum Kendall tau distance between centers.
        #[arg(long)]
        separation: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value = "ordering")]
        format: RankingFormat,
        #[arg(long, default_value = "comma")]
        delimiter: Delimiter,
        #[arg(long)]
        out: PathBuf,
        /// Also write the mixture JSON actually sampled.
        #[arg(long)]
        spec_out: Option<PathBuf>,
    },
    /// Grow a tree on a ranking file.
    Fit {
        #[command(flatten)]
        input: Input,
        /// Tree JSON output.
        #[arg(long)]
        out: PathBuf,
        /// Growth trace CSV output.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Add a wall-time column to the trace.
        #[arg(long)]
        trace_times: bool,
        /// Consensus distribution JSON output.
        #[arg(long)]
        crd: Option<PathBuf>,
        /// Leaves with estimated variability at or below this are not split.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// min-distortion or balanced.
        #[arg(long, default_value = "min-distortion")]
        rule: SplitRule,
        /// Stop once the tree has this many leaves.
        #[arg(long)]
        max_leaves: Option<usize>,
        /// Stop after this many growth iterations.
        #[arg(long)]
        max_iterations: Option<usize>,
        /// Split only the best leaf in each iteration.
        #[arg(long)]
        one_split_per_iter: bool,
        /// exact, copeland, depth-climb or auto.
        #[arg(long, default_value = "auto")]
        aggregator: Aggregator,
        /// Within-cell variability estimator: unbiased or plug-in.
        #[arg(long, default_value = "unbiased")]
        estimator: VarianceEstimator,
        /// Seed of the randomized aggregators.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Select the pruned subtree minimizing criterion + lambda · leaves.
    Prune {
        #[arg(long)]
        tree: PathBuf,
        /// Sample the tree was grown on; checked against the tree when given.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "ordering")]
        format: RankingFormat,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        out: PathBuf,
        /// CSV of the criterion of every pruned subtree.
        #[arg(long)]
        path: Option<PathBuf>,
    },
    /// Distortion of every pruned subtree on a sample.
    Eval {
        #[arg(long)]
        tree: PathBuf,
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: PathBuf,
    },
    /// Local and global depths of query rankings.
    Depth(FitQuery),
    /// Anomaly scores (negated local depths) of query rankings.
    Anomaly(FitQuery),
    /// Depths against one reference leaf.
    Ddplot {
        #[command(flatten)]
        fq: FitQuery,
        #[arg(long)]
        reference_cell: usize,
    },
    /// Smoothed conditional distribution of one cell.
    Smooth {
        #[arg(long)]
        tree: PathBuf,
        #[command(flatten)]
        input: Input,
        /// Node id of the cell.
        #[arg(long)]
        cell: usize,
        /// enumeration, factorized (derived table) or factorized-appendix.
        #[arg(long, default_value = "enumeration")]
        method: SmoothMethod,
        #[arg(long)]
        out: PathBuf,
        /// Entry-table discrepancy CSV (factorized methods).
        #[arg(long)]
        discrepancies: Option<PathBuf>,
    },
    /// Rank-sum test between one column of two depth CSVs.
    HomTest {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value = "local_depth")]
        column: String,
        /// Exact enumeration instead of the normal approximation.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Leaf co-membership matrix of a sample.
    Comembership {
        #[arg(long)]
        tree: PathBuf,
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rerun the command recorded in a manifest and compare output digests.
    Replay { manifest: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample { .. } => "sample",
            Command::Fit { .. } => "fit",
            Command::Prune { .. } => "prune",
            Command::Eval { .. } => "eval",
            Command::Depth(_) => "depth",
            Command::Anomaly(_) => "anomaly",
            Command::Ddplot { .. } => "ddplot",
            Command::Smooth { .. } => "smooth",
            Command::HomTest { .. } => "hom-test",
            Command::Comembership { .. } => "comembership",
            Command::Replay { .. } => "replay",
        }
    }
}

/// What a run read and wrote, for the manifest.
#[derive(Default)]
struct Outcome {
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    timings: Vec<(String, f64)>,
    /// Exit status other than success without an error (replay mismatch).
    status: i32,
}

impl Outcome {
    fn write(&mut self, path: &Path, text: &str) -> Result<()> {
        write_text(path, text)?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    fn read(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }
}

fn load_tree(path: &Path, out: &mut Outcome) -> Result<CoastTree> {
    out.read(path);
    CoastTree::from_json(&fs::read_to_string(path)?)
}

fn load_sample(path: &Path, format: RankingFormat, out: &mut Outcome) -> Result<RankingSample> {
    out.read(path);
    load_rankings(&RankingFile::new(path, format))
}

fn run_sample(cmd: Command, out: &mut Outcome) -> Result<()> {
    let Command::Sample {
        spec,
        preset,
        items,
        components,
        phi,
        separation,
        seed,
        count,
        format,
        delimiter,
        out: path,
        spec_out,
    } = cmd
    else {
        unreachable!()
    };
    let spec = match (spec, preset) {
        (Some(p), _) => {
            out.read(&p);
            let spec: MixtureSpec = serde_json::from_str(&fs::read_to_string(&p)?)?;
            spec
        }
        (None, Some(preset)) => {
            let n = items.ok_or_else(|| Error::InvalidInput("--preset needs --items".into()))?;
            match preset {
                Preset::Mallows => mallows_mixture_preset(n, components, phi, separation, seed)?,
                Preset::PlackettLuce => plackett_luce_mixture_preset(n, components, phi, separation, seed)?,
            }
        }
        (None, None) => return Err(Error::InvalidInput("either --spec or --preset is required".into())),
    };
    out.seed = Some(spec.seed);
    let s = sample_mixture(&spec, count)?;
    out.write(&path, &write_rankings(&s, format, delimiter))?;
    if let Some(p) = spec_out {
        out.write(&p, &serde_json::to_string_pretty(&spec)?)?;
    }
    println!("sampled {} rankings of {} items", s.len(), s.n());
    Ok(())
}

fn run_fit(cmd: Command, out: &mut Outcome) -> Result<()> {
    let Command::Fit {
        input,
        out: path,
        trace,
        trace_times,
        crd,
        epsilon,
        rule,
        max_leaves,
        max_iterations,
        one_split_per_iter,
        aggregator,
        estimator,
        seed,
    } = cmd
    else {
        unreachable!()
    };
    out.read(&input.input);
    let s = input.load()?;
    out.seed = Some(seed);
    let config =
        GrowConfig { epsilon, rule, max_leaves, one_split_per_iter, max_iterations, aggregator, estimator, seed };
    let start = Instant::now();
    let (tree, tr) = grow(&s, &config)?;
    out.timings.push(("grow".into(), start.elapsed().as_secs_f64()));
    out.write(&path, &tree.to_json()?)?;
    if let Some(p) = trace {
        out.write(&p, &trace_csv(&tr, trace_times))?;
    }
    if let Some(p) = crd {
        out.write(&p, &serde_json::to_string_pretty(&crd_of(&tree)?)?)?;
    }
    println!("{}", summarize(&[("leaves", tree.leaf_count() as f64), ("criterion", tree.criterion())]));
    Ok(())
}

fn check_sample_against(tree: &CoastTree, s: &RankingSample) -> Result<()> {
    if s.n() != tree.n() {
        return Err(Error::DimensionMismatch { expected: tree.n(), found: s.n() });
    }
    if s.len() != tree.sample_size() {
        return Err(Error::InvalidInput(format!(
            "tree was grown on {} rankings, sample has {}",
            tree.sample_size(),
            s.len()
        )));
    }
    Ok(())
}

fn run_prune(cmd: Command, out: &mut Outcome) -> Result<()> {
    let Command::Prune { tree, input, format, lambda, out: path, path: criteria_path } = cmd else { unreachable!() };
    let tree = load_tree(&tree, out)?;
    if let Some(p) = input {
        let s = load_sample(&p, format, out)?;
        check_sample_against(&tree, &s)?;
    }
    let seq = prune_sequence(&tree);
    let chosen = select_subtree(&seq, lambda)?;
    out.write(&path, &chosen.to_json()?)?;
    if let Some(p) = criteria_path {
        let mut text = String::from("leaves,criterion,penalized\n");
        for (k, c) in seq.criteria().iter().enumerate() {
            let leaves = k + 1;
            text.push_str(&format!("{},{},{}\n", leaves, fmt_num(*c), fmt_num(c + lambda * leaves as f64)));
        }
        out.write(&p, &text)?;
    }
    println!("{}", summarize(&[("leaves", chosen.leaf_count() as f64), ("criterion", chosen.criterion())]));
    Ok(())
}

fn run_eval(cmd: Command, out: &mut Outcome) -> Result<()> {
    let Command::Eval { tree, input, out: path } = cmd else { unreachable!() };
    let tree = load_tree(&tree, out)?;
    out.read(&input.input);
    let s = input.load()?;
    let dist = DiscreteRankingDistribution::empirical(&s)?;
    let denominator = s.len() as i64;
    let mut rows = Vec::new();
    for t in prune_sequence(&tree).trees()? {
        let members = t.members(&s)?;
        let mut cells = Vec::new();
        let mut medians = Vec::new();
        for id in t.leaves() {
            if members[id].is_empty() {
                continue;
            }
            let node = t.node(id).expect("leaf id");
            let median = node
                .median
                .clone()
                .ok_or_else(|| Error::State(format!("leaf {} holds rankings but has no median", id)))?;
            cells.push(node.cell.clone());
            medians.push(median);
        }
        rows.push((t.leaf_count(), distortion_report_scaled(&dist, &cells, &medians, denominator)?));
    }
    out.write(&path, &distortion_csv(&rows))?;
    println!("evaluated {} subtrees", rows.len());
    Ok(())
}

fn run_fit_query(cmd: Command, out: &mut Outcome) -> Result<()> {
    let (fq, kind, reference) = match cmd {
        Command::Depth(fq) => (fq, "depth", None),
        Command::Anomaly(fq) => (fq, "anomaly", None),
        Command::Ddplot { fq, reference_cell } => (fq, "ddplot", Some(reference_cell)),
        _ => unreachable!(),
    };
    let tree = load_tree(&fq.tree, out)?;
    let fit = load_sample(&fq.fit, fq.format, out)?;
    let query = load_sample(&fq.query, fq.format, out)?;
    let text = match (kind, reference) {
        ("anomaly", _) => anomaly_csv(&anomaly_scores(&tree, &fit, &query)?),
        (_, Some(r)) => depth_csv(&ddplot_table(&tree, &fit, &query, r)?),
        _ => depth_csv(&local_depths(&tree, &fit, &query)?),
    };
    out.write(&fq.out, &text)?;
    println!("scored {} rankings", query.len());
    Ok(())
}

fn run_smooth(cmd: Command, out: &mut Outcome) -> Result<()> {
    let Command::Smooth { tree, input, cell, method, out: path, discrepancies } = cmd else { unreachable!() };
    let tree = load_tree(&tree, out)?;
    out.read(&input.input);
    let s = input.load()?;
    let node = tree.node(cell).ok_or_else(|| Error::InvalidInput(format!("unknown cell id {}", cell)))?;
    let sm = smooth_cell(&s, &node.cell, method)?;
    out.write(&path, &smoothed_json(&sm)?)?;
    if let Some(p) = discrepancies {
        out.write(&p, &discrepancy_csv(&sm.discrepancies))?;
    }
    println!("{}", summarize(&[("z", sm.z), ("appendix_z", sm.appendix_z), ("rankings", sm.scores.len() as f64)]));
    Ok(())
}

fn run_hom_test(cmd: Command, out: &mut Outcome) -> Result<()> {
    let Command::HomTest { a, b, column, exact, out: path } = cmd else { unreachable!() };
    out.read(&a);
    out.read(&b);
    let xa = read_csv_column(&fs::read_to_string(&a)?, &column)?;
    let xb = read_csv_column(&fs::read_to_string(&b)?, &column)?;
    let r = if exact { mann_whitney_exact(&xa, &xb)? } else { homogeneity_test(&xa, &xb)? };
    let text = format!("u_statistic,p_value\n{},{}\n", fmt_num(r.u_statistic), fmt_num(r.p_value));
    match path {
        Some(p) => out.write(&p, &text)?,
        None => print!("{}", text),
    }
    Ok(())
}

fn run_comembership(cmd: Command, out: &mut Outcome) -> Result<()> {
    let Command::Comembership { tree, input, out: path } = cmd else { unreachable!() };
    let tree = load_tree(&tree, out)?;
    out.read(&input.input);
    let s = input.load()?;
    out.write(&path, &co_membership_csv(&co_membership(&tree, &s)?))?;
    Ok(())
}

fn run_replay(manifest: &Path, out: &mut Outcome) -> Result<()> {
    let m = RunManifest::from_json(&fs::read_to_string(manifest)?)?;
    let argv: Vec<String> = serde_json::from_value(m.config["argv"].clone())?;
    for (path, digest) in &m.inputs {
        let now = coast::io::file_digest(Path::new(path))?;
        if &now != digest {
            return Err(Error::InvalidInput(format!("input {} changed since the recorded run", path)));
        }
    }
    let status = dispatch(std::iter::once("coast".to_string()).chain(argv));
    if status != 0 {
        out.status = status;
        return Ok(());
    }
    let mut mismatched = 0;
    for (path, digest) in &m.outputs {
        let now = coast::io::file_digest(Path::new(path))?;
        if &now != digest {
            eprintln!("output {} differs from the recorded run", path);
            mismatched += 1;
        }
    }
    if mismatched > 0 {
        out.status = 1;
    } else {
        println!("replay: {} outputs identical", m.outputs.len());
    }
    Ok(())
}

fn execute(cmd: Command, out: &mut Outcome) -> Result<()> {
    match cmd {
        c @ Command::Sample { .. } => run_sample(c, out),
        c @ Command::Fit { .. } => run_fit(c, out),
        c @ Command::Prune { .. } => run_prune(c, out),
        c @ Command::Eval { .. } => run_eval(c, out),
        c @ (Command::Depth(_) | Command::Anomaly(_) | Command::Ddplot { .. }) => run_fit_query(c, out),
        c @ Command::Smooth { .. } => run_smooth(c, out),
        c @ Command::HomTest { .. } => run_hom_test(c, out),
        c @ Command::Comembership { .. } => run_comembership(c, out),
        Command::Replay { manifest } => run_replay(&manifest, out),
    }
}

/// Arguments with `--manifest` and its value removed, as replayed later.
fn replayable_argv(args: &[OsString]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in args.iter().skip(1) {
        let a = a.to_string_lossy().into_owned();
        if skip {
            skip = false;
        } else if a == "--manifest" {
            skip = true;
        } else if !a.starts_with("--manifest=") {
            out.push(a);
        }
    }
    out
}

fn write_manifest(path: &Path, cli_args: &[OsString], name: &str, threads: Option<usize>, o: &Outcome) -> Result<()> {
    let config = serde_json::json!({ "argv": replayable_argv(cli_args), "threads": threads });
    let mut m = RunManifest::new(name, o.seed, config);
    for p in &o.inputs {
        m.add_input(p)?;
    }
    for p in &o.outputs {
        m.add_output(p)?;
    }
    m.wall_seconds.extend(o.timings.iter().cloned());
    write_text(path, &m.to_json()?)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 2,
        _ => 1,
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit status.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let name = cli.command.name();
    let threads = cli.threads;
    let mut outcome = Outcome::default();
    let start = Instant::now();
    let result = match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| execute(cli.command, &mut outcome)),
            Err(e) => Err(Error::InvalidInput(format!("thread pool: {}", e))),
        },
        None => execute(cli.command, &mut outcome),
    };
    outcome.timings.push(("total".into(), start.elapsed().as_secs_f64()));
    let result = result.and_then(|()| match &cli.manifest {
        Some(p) if name != "replay" => write_manifest(p, &args, name, threads, &outcome),
        _ => Ok(()),
    });
    match result {
        Ok(()) => outcome.status,
        Err(e) => {
            eprintln!("error: {}", e);
            exit_code(&e)
        }
    }
}
