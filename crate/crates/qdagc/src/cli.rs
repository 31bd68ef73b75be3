//! Subcommands of the `qdagc` binary.
//!
//! Exit codes: 0 success, 1 usage error (bad arguments, unknown variable or
//! value), 2 input-format error, 3 semantic error (e.g. zero-probability
//! evidence).

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use qdag_core::compiler::{compile_named, CompileError};
use qdag_core::jointree::JoinTree;
use qdag_core::oracle::{cluster_infer, OpCounter};
use qdag_core::reducer::apply_rule;
use qdag_core::voi::{value_of_information, VoiError};
use qdag_core::{
    reduce_fixpoint, BeliefNetwork, EvalState, Evidence, Instantiation, Output, QDag, QDagError,
    RewriteRule,
};

use crate::evidence::{build_evidence, parse_evidence_file, parse_setting, EvidenceError};
use crate::network_format::parse_network;
use crate::qdag_format::{deserialize, serialize};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_FORMAT: u8 = 2;
pub const EXIT_SEMANTIC: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "qdagc",
    version,
    about = "Compile belief networks into query DAGs, reduce and evaluate them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile a network into a serialized Q-DAG.
    Compile {
        network: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, value_name = "V[,V...]")]
        query: Vec<String>,
        #[arg(long, value_delimiter = ',', value_name = "V[,V...]")]
        evidence: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Write the dag as compiled, without reduction.
        #[arg(long)]
        no_reduce: bool,
    },
    /// Reduce a Q-DAG, to a fixpoint or with the given rules in order.
    Reduce {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long = "rule", value_name = "NAME")]
        rules: Vec<String>,
        /// Print rewrite counts and node counts to stderr.
        #[arg(long)]
        report: bool,
    },
    /// Evaluate a Q-DAG under evidence.
    Eval {
        dag: PathBuf,
        #[command(flatten)]
        evidence: EvidenceArgs,
        /// Also print Pr(V | e) for this query variable.
        #[arg(long, value_name = "V")]
        normalize: Vec<String>,
        /// Read `V=value` updates from stdin and re-evaluate incrementally.
        #[arg(long)]
        watch: bool,
    },
    /// Compute Pr(X, e) numerically with the join tree algorithm.
    Oracle {
        network: PathBuf,
        #[arg(long, value_name = "X")]
        query: String,
        #[arg(long = "set", value_name = "V=VALUE")]
        set: Vec<String>,
    },
    /// Print join tree statistics for a network.
    Stats { network: PathBuf },
    /// Expected utility of observing a variable.
    Voi {
        dag: PathBuf,
        variable: String,
        /// One utility per value of the variable.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true,
            value_name = "U[,U...]"
        )]
        utility: Vec<f64>,
        #[command(flatten)]
        evidence: EvidenceArgs,
    },
}

#[derive(Debug, Args)]
struct EvidenceArgs {
    #[arg(long = "set", value_name = "V=VALUE")]
    set: Vec<String>,
    /// File of `V=value` lines, applied before any --set.
    #[arg(long, value_name = "FILE")]
    evidence_file: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl ToString) -> Failure {
    Failure {
        code,
        message: message.to_string(),
    }
}

impl From<EvidenceError> for Failure {
    fn from(e: EvidenceError) -> Self {
        match e {
            EvidenceError::Syntax { .. } => fail(EXIT_FORMAT, e),
            _ => fail(EXIT_USAGE, e),
        }
    }
}

impl From<CompileError> for Failure {
    fn from(e: CompileError) -> Self {
        match e {
            CompileError::Dag(_) => fail(EXIT_SEMANTIC, e),
            _ => fail(EXIT_USAGE, e),
        }
    }
}

impl From<VoiError> for Failure {
    fn from(e: VoiError) -> Self {
        match e {
            VoiError::AlreadyObserved(_) | VoiError::ZeroProbability => fail(EXIT_SEMANTIC, e),
            _ => fail(EXIT_USAGE, e),
        }
    }
}

impl From<QDagError> for Failure {
    fn from(e: QDagError) -> Self {
        match e {
            QDagError::ZeroProbability => fail(EXIT_SEMANTIC, e),
            _ => fail(EXIT_USAGE, e),
        }
    }
}

fn io_failure(e: std::io::Error) -> Failure {
    fail(EXIT_USAGE, e)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<BeliefNetwork, Failure> {
    parse_network(&read(path)?).map_err(|e| fail(EXIT_FORMAT, format!("{}: {e}", path.display())))
}

fn load_dag(path: &Path) -> Result<QDag, Failure> {
    deserialize(&read(path)?).map_err(|e| fail(EXIT_FORMAT, format!("{}: {e}", path.display())))
}

fn write_dag(dag: &QDag, output: Option<&Path>, stdout: &mut dyn Write) -> Result<(), Failure> {
    let text = serialize(dag).map_err(|e| fail(EXIT_FORMAT, e))?;
    match output {
        Some(path) => {
            fs::write(path, text).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", path.display())))
        }
        None => stdout.write_all(text.as_bytes()).map_err(io_failure),
    }
}

fn settings(args: &EvidenceArgs) -> Result<Vec<(String, String)>, Failure> {
    let mut all = match &args.evidence_file {
        Some(path) => parse_evidence_file(&read(path)?)
            .map_err(|e| fail(EXIT_FORMAT, format!("{}: {e}", path.display())))?,
        None => Vec::new(),
    };
    for s in &args.set {
        let (v, x) =
            parse_setting(s).ok_or_else(|| Failure::from(EvidenceError::Setting(s.clone())))?;
        all.push((v.to_string(), x.to_string()));
    }
    Ok(all)
}

fn evidence(dag: &QDag, args: &EvidenceArgs) -> Result<Evidence, Failure> {
    let all = settings(args)?;
    Ok(build_evidence(
        dag,
        all.iter().map(|(v, x)| (v.as_str(), x.as_str())),
    )?)
}

fn print_output(out: &Output, normalize: &[String], stdout: &mut dyn Write) -> Result<(), Failure> {
    write!(stdout, "{out}").map_err(io_failure)?;
    for var in normalize {
        for (value, p) in out.conditional(var)? {
            writeln!(stdout, "{var}={value}|e {p}").map_err(io_failure)?;
        }
    }
    Ok(())
}

fn compile_cmd(
    network: &Path,
    query: &[String],
    evidence: &[String],
    output: Option<&Path>,
    no_reduce: bool,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let net = load_network(network)?;
    let query: Vec<&str> = query.iter().map(String::as_str).collect();
    let evidence: Vec<&str> = evidence.iter().map(String::as_str).collect();
    let dag = compile_named(&net, &query, &evidence)?;
    let dag = if no_reduce {
        dag
    } else {
        reduce_fixpoint(&dag).0
    };
    write_dag(&dag, output, stdout)
}

fn reduce_cmd(
    input: &Path,
    output: Option<&Path>,
    rules: &[String],
    report: bool,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), Failure> {
    let rules = rules
        .iter()
        .map(|r| {
            RewriteRule::from_name(r).ok_or_else(|| fail(EXIT_USAGE, format!("unknown rule {r:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let dag = load_dag(input)?;
    let before = dag.stats();
    let mut counts = Vec::new();
    let reduced = if rules.is_empty() {
        let (reduced, stats) = reduce_fixpoint(&dag);
        counts.extend(RewriteRule::ALL.map(|r| (r, stats.applied(r))));
        reduced
    } else {
        let mut current = dag;
        for rule in rules {
            let (next, applied) = apply_rule(&current, rule);
            counts.push((rule, applied));
            current = next;
        }
        current
    };
    if report {
        let after = reduced.stats();
        let mut text = format!("nodes {} -> {}\n", before.nodes, after.nodes);
        text += &format!("operands {} -> {}\n", before.operands, after.operands);
        for (rule, n) in counts {
            text += &format!("{rule} {n}\n");
        }
        stderr.write_all(text.as_bytes()).map_err(io_failure)?;
    }
    write_dag(&reduced, output, stdout)
}

fn eval_cmd(
    path: &Path,
    args: &EvidenceArgs,
    normalize: &[String],
    watch: bool,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let dag = load_dag(path)?;
    let e = evidence(&dag, args)?;
    if !watch {
        return print_output(&dag.evaluate(&e), normalize, stdout);
    }
    let mut state = EvalState::new(&dag, e);
    for line in stdin.lines() {
        let line = line.map_err(io_failure)?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (var, value) = parse_setting(line)
            .ok_or_else(|| Failure::from(EvidenceError::Setting(line.into())))?;
        let (out, recomputed) = state.update(var, value)?;
        print_output(&out, normalize, stdout)?;
        writeln!(stdout, "recomputed {recomputed}").map_err(io_failure)?;
        stdout.flush().map_err(io_failure)?;
    }
    Ok(())
}

fn oracle_cmd(
    network: &Path,
    query: &str,
    set: &[String],
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let net = load_network(network)?;
    let x = net
        .find(query)
        .ok_or_else(|| fail(EXIT_USAGE, format!("unknown variable {query}")))?;
    let mut inst = Instantiation::new();
    for s in set {
        let (v, value) =
            parse_setting(s).ok_or_else(|| Failure::from(EvidenceError::Setting(s.clone())))?;
        let var = net
            .find(v)
            .ok_or_else(|| fail(EXIT_USAGE, format!("unknown variable {v}")))?;
        if value == qdag_core::network::UNKNOWN_TOKEN {
            inst.unbind(var);
            continue;
        }
        let index = net
            .variable(var)
            .value_index(value)
            .ok_or_else(|| fail(EXIT_USAGE, format!("variable {v} has no value {value}")))?;
        inst.bind(var, index);
    }
    let jt = JoinTree::build(&net);
    let p = cluster_infer(&net, &jt, x, &inst, &mut OpCounter::new());
    for (value, prob) in net.variable(x).values.iter().zip(&p.table) {
        writeln!(stdout, "{query}={value} {prob}").map_err(io_failure)?;
    }
    Ok(())
}

fn stats_cmd(network: &Path, stdout: &mut dyn Write) -> Result<(), Failure> {
    let net = load_network(network)?;
    let jt = JoinTree::build(&net);
    writeln!(
        stdout,
        "clusters {}\nmax-cluster-size {}\ntotal-table-size {}",
        jt.len(),
        jt.max_cluster_size(),
        jt.total_table_size(&net)
    )
    .map_err(io_failure)
}

fn voi_cmd(
    path: &Path,
    variable: &str,
    utility: &[f64],
    args: &EvidenceArgs,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let dag = load_dag(path)?;
    let e = evidence(&dag, args)?;
    let v = value_of_information(&dag, &e, variable, utility)?;
    writeln!(stdout, "{v}").map_err(io_failure)
}

fn dispatch(
    command: Command,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), Failure> {
    match command {
        Command::Compile {
            network,
            query,
            evidence,
            output,
            no_reduce,
        } => compile_cmd(
            &network,
            &query,
            &evidence,
            output.as_deref(),
            no_reduce,
            stdout,
        ),
        Command::Reduce {
            input,
            output,
            rules,
            report,
        } => reduce_cmd(&input, output.as_deref(), &rules, report, stdout, stderr),
        Command::Eval {
            dag,
            evidence,
            normalize,
            watch,
        } => eval_cmd(&dag, &evidence, &normalize, watch, stdin, stdout),
        Command::Oracle {
            network,
            query,
            set,
        } => oracle_cmd(&network, &query, &set, stdout),
        Command::Stats { network } => stats_cmd(&network, stdout),
        Command::Voi {
            dag,
            variable,
            utility,
            evidence,
        } => voi_cmd(&dag, &variable, &utility, &evidence, stdout),
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(
    args: I,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
                EXIT_USAGE
            } else {
                let _ = stdout.write_all(text.as_bytes());
                0
            };
        }
    };
    match dispatch(cli.command, stdin, stdout, stderr) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "qdagc: {}", f.message);
            f.code
        }
    }
}
