use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use plp::ast::{Atom, PartialInterpretation, Program};
use plp::cnf::{assert_evidence, export_dimacs, export_mln, rules_to_formula};
use plp::compiler::{export_nnf, smooth, Compiler};
use plp::engine::Engine;
use plp::grounder::Grounding;
use plp::learner::{learn_em, learn_fully_observable, sample_dataset, Dataset, EmOptions};
use plp::metrics::{instance_counts, kl_divergence, mae};
use plp::numfmt::sig12;
use plp::parser::{format_dataset, parse_atom, parse_evidence, parse_program};
use plp::{oracle, Category, Error};
use serde_json::{json, Value};

const ORACLE_TOLERANCE: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "plp", version, about = "Probabilistic logic programs: inference and parameter learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the relevant ground program
    Ground {
        #[command(flatten)]
        input: Input,
        /// Print the full grounding instead
        #[arg(long)]
        full: bool,
    },
    /// Print the weighted CNF in DIMACS form
    Cnf {
        #[command(flatten)]
        input: Input,
        /// Print a ground Markov logic network instead
        #[arg(long)]
        mln: bool,
    },
    /// Print the smooth d-DNNF in NNF form
    Compile {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        no_smooth: bool,
    },
    /// Probability of the evidence
    Evid(Task),
    /// Conditional marginals of the queries
    Marg(Task),
    /// Most probable world given the evidence
    Mpe(Task),
    /// Brute-force answers by enumerating all total choices
    Oracle {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum)]
        task: OracleTask,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Learn the t(_) parameters from a dataset
    Learn {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Closed-form frequencies; every example must be complete
        #[arg(long)]
        fully_observable: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Sample partially observed examples from a program
    Sample {
        #[arg(long)]
        program: PathBuf,
        #[arg(long, short)]
        n: usize,
        /// Share of the non-deterministic atoms kept per example
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// KL divergence and mean absolute error between two parameterisations
    Kl {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        learned: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

#[derive(Args)]
struct Input {
    #[arg(long)]
    program: PathBuf,
    #[arg(long)]
    evidence: Option<PathBuf>,
    /// Query atom; may be repeated
    #[arg(long = "query")]
    queries: Vec<String>,
}

#[derive(Args)]
struct Task {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Also run the brute-force oracle and fail if the answers differ
    #[arg(long)]
    oracle_check: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleTask {
    Evid,
    Marg,
    Mpe,
}

enum Failure {
    Plp(Error),
    Io(PathBuf, std::io::Error),
    OracleMismatch(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Plp(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Plp(e) => match e.category() {
                Category::Input => 2,
                Category::Unsound => 3,
                Category::ZeroProbability => 4,
                Category::Resource => 5,
            },
            Failure::Io(..) => 2,
            Failure::OracleMismatch(_) => 6,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Plp(e) => e.to_string(),
            Failure::Io(path, e) => format!("{}: {e}", path.display()),
            Failure::OracleMismatch(m) => format!("oracle mismatch: {m}"),
        }
    }
}

type Outcome = std::result::Result<String, Failure>;

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

struct Loaded {
    program: Program,
    queries: Vec<Atom>,
    evidence: PartialInterpretation,
}

impl Input {
    fn load(&self) -> std::result::Result<Loaded, Failure> {
        let program = parse_program(&read(&self.program)?)?;
        let mut evidence = program.evidence.clone();
        if let Some(path) = &self.evidence {
            evidence = evidence.merged(&parse_evidence(&read(path)?)?)?;
        }
        let mut queries = program.queries.clone();
        for q in &self.queries {
            let a = parse_atom(q)?;
            if !queries.contains(&a) {
                queries.push(a);
            }
        }
        Ok(Loaded {
            program,
            queries,
            evidence,
        })
    }
}

fn render(format: Format, task: &str, text: Vec<(String, String)>, results: Vec<Value>, meta: Value) -> String {
    match format {
        Format::Text => text.into_iter().map(|(k, v)| format!("{k}\t{v}\n")).collect(),
        Format::Json => {
            let doc = json!({ "task": task, "results": results, "meta": meta });
            format!("{}\n", serde_json::to_string_pretty(&doc).expect("json values serialize"))
        }
    }
}

fn sorted_by_surface<T>(items: impl IntoIterator<Item = (Atom, T)>) -> Vec<(String, T)> {
    let mut out: Vec<(String, T)> = items.into_iter().map(|(a, v)| (a.to_string(), v)).collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn evid_output(format: Format, p: f64, input: &Loaded) -> String {
    render(
        format,
        "evid",
        vec![("p_evidence".into(), sig12(p))],
        vec![json!({ "p_evidence": p })],
        json!({ "evidence": input.evidence.summary() }),
    )
}

fn marg_output(format: Format, m: Vec<(String, f64)>, input: &Loaded) -> String {
    render(
        format,
        "marg",
        m.iter().map(|(a, p)| (a.clone(), sig12(*p))).collect(),
        m.iter().map(|(a, p)| json!({ "atom": a, "p": p })).collect(),
        json!({ "evidence": input.evidence.summary() }),
    )
}

fn mpe_output(format: Format, world: Vec<(String, bool)>, choice: &[String], p: f64) -> String {
    let mut text = vec![("mpe_probability".to_string(), sig12(p))];
    text.extend(world.iter().map(|(a, v)| (a.clone(), v.to_string())));
    render(
        format,
        "mpe",
        text,
        world.iter().map(|(a, v)| json!({ "atom": a, "value": v })).collect(),
        json!({ "probability": p, "choice": choice }),
    )
}

fn check(label: &str, engine: f64, brute: f64) -> std::result::Result<(), Failure> {
    if (engine - brute).abs() > ORACLE_TOLERANCE {
        return Err(Failure::OracleMismatch(format!("{label}: engine {engine}, oracle {brute}")));
    }
    Ok(())
}

fn evid(task: &Task) -> Outcome {
    let input = task.input.load()?;
    let p = Engine::new(&input.program)?.prob_evidence(&input.evidence)?;
    if task.oracle_check {
        let g = Grounding::new(&input.program)?;
        check("p_evidence", p, oracle::oracle_evid(g.full(), &input.evidence)?)?;
    }
    Ok(evid_output(task.format, p, &input))
}

fn marg(task: &Task) -> Outcome {
    let input = task.input.load()?;
    let m = Engine::new(&input.program)?.marginals(&input.queries, &input.evidence)?;
    if task.oracle_check {
        let g = Grounding::new(&input.program)?;
        let brute = oracle::oracle_marg(g.full(), &input.queries, &input.evidence)?;
        for (q, p) in &m {
            check(&q.to_string(), *p, brute[q])?;
        }
    }
    Ok(marg_output(task.format, sorted_by_surface(m), &input))
}

fn mpe(task: &Task) -> Outcome {
    let input = task.input.load()?;
    let r = Engine::new(&input.program)?.mpe(&input.evidence)?;
    if task.oracle_check {
        let g = Grounding::new(&input.program)?;
        check("mpe_probability", r.probability, oracle::oracle_mpe(g.full(), &input.evidence)?.prob)?;
    }
    let world = sorted_by_surface(r.world.iter().map(|(a, v)| (a.clone(), v)));
    let choice: Vec<String> = r.choice.iter().map(Atom::to_string).collect();
    Ok(mpe_output(task.format, world, &choice, r.probability))
}

fn run_oracle(input: &Input, task: OracleTask, format: Format) -> Outcome {
    let input = input.load()?;
    let grounding = Grounding::new(&input.program)?;
    let g = grounding.full();
    Ok(match task {
        OracleTask::Evid => evid_output(format, oracle::oracle_evid(g, &input.evidence)?, &input),
        OracleTask::Marg => {
            let m = oracle::oracle_marg(g, &input.queries, &input.evidence)?;
            marg_output(format, sorted_by_surface(m), &input)
        }
        OracleTask::Mpe => {
            let row = oracle::oracle_mpe(g, &input.evidence)?;
            let world = sorted_by_surface(
                g.atoms()
                    .iter()
                    .zip(&row.world)
                    .filter(|(a, _)| !input.evidence.contains(a))
                    .map(|(a, &v)| (a.clone(), v)),
            );
            let choice: Vec<String> = g
                .prob_facts
                .iter()
                .zip(&row.choice)
                .filter(|(_, &c)| c)
                .map(|(f, _)| g.atom(f.atom).to_string())
                .collect();
            mpe_output(format, world, &choice, row.prob)
        }
    })
}

fn ground(input: &Input, full: bool) -> Outcome {
    let input = input.load()?;
    let grounding = Grounding::new(&input.program)?;
    Ok(if full {
        grounding.full().to_string()
    } else {
        grounding.relevant(&input.queries, &input.evidence)?.to_string()
    })
}

fn cnf(input: &Input, mln: bool) -> Outcome {
    let input = input.load()?;
    let g = Grounding::new(&input.program)?.relevant(&input.queries, &input.evidence)?;
    let f = assert_evidence(&rules_to_formula(&g, None)?, &input.evidence)?;
    Ok(if mln { export_mln(&f) } else { export_dimacs(&f) })
}

fn compile(input: &Input, no_smooth: bool) -> Outcome {
    let input = input.load()?;
    let g = Grounding::new(&input.program)?.relevant(&input.queries, &input.evidence)?;
    let f = assert_evidence(&rules_to_formula(&g, None)?, &input.evidence)?;
    let d = Compiler::default().compile(&f)?;
    Ok(export_nnf(&if no_smooth { d } else { smooth(&d, f.num_vars) }))
}

fn learn(
    program: &Path,
    dataset: &Path,
    seed: u64,
    max_iters: usize,
    tol: f64,
    fully_observable: bool,
    format: Format,
) -> Outcome {
    let p = parse_program(&read(program)?)?;
    let d = Dataset::parse(&read(dataset)?)?;
    let (params, trace) = if fully_observable {
        (learn_fully_observable(&p, &d)?, Vec::new())
    } else {
        let opts = EmOptions {
            seed,
            max_iters,
            ll_tolerance: tol,
            init: None,
        };
        let r = learn_em(&p, &d, &opts)?;
        (r.params, r.ll_trace)
    };
    let learned = p.with_params(&params.values)?;
    Ok(match format {
        Format::Text => {
            let mut out = learned.to_string();
            for (i, ll) in trace.iter().enumerate() {
                out += &format!("% ll {i} {}\n", sig12(*ll));
            }
            out
        }
        Format::Json => {
            let results: Vec<Value> = params
                .values
                .iter()
                .zip(&params.estimated)
                .enumerate()
                .map(|(i, (v, e))| json!({ "param": i, "p": v, "estimated": e }))
                .collect();
            render(
                format,
                "learn",
                Vec::new(),
                results,
                json!({ "ll_trace": trace, "program": learned.to_string() }),
            )
        }
    })
}

fn fixed_probabilities(p: &Program) -> std::result::Result<Vec<f64>, Failure> {
    Ok(p.prob_facts
        .iter()
        .map(|f| f.prob.resolve(None))
        .collect::<plp::Result<_>>()?)
}

fn kl(truth: &Path, learned: &Path, format: Format) -> Outcome {
    let t = parse_program(&read(truth)?)?;
    let l = parse_program(&read(learned)?)?;
    let (tp, lp) = (fixed_probabilities(&t)?, fixed_probabilities(&l)?);
    if tp.len() != lp.len() {
        return Err(Error::Semantic(format!(
            "{} probabilistic facts in the truth, {} in the learned program",
            tp.len(),
            lp.len()
        ))
        .into());
    }
    let d = kl_divergence(&tp, &lp, &instance_counts(&t)?)?;
    let m = mae(&tp, &lp);
    Ok(render(
        format,
        "kl",
        vec![("kl".into(), sig12(d)), ("mae".into(), sig12(m))],
        vec![json!({ "kl": d, "mae": m })],
        json!({ "facts": tp.len() }),
    ))
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Ground { input, full } => ground(&input, full),
        Command::Cnf { input, mln } => cnf(&input, mln),
        Command::Compile { input, no_smooth } => compile(&input, no_smooth),
        Command::Evid(t) => evid(&t),
        Command::Marg(t) => marg(&t),
        Command::Mpe(t) => mpe(&t),
        Command::Oracle { input, task, format } => run_oracle(&input, task, format),
        Command::Learn {
            program,
            dataset,
            seed,
            max_iters,
            tol,
            fully_observable,
            format,
        } => learn(&program, &dataset, seed, max_iters, tol, fully_observable, format),
        Command::Sample {
            program,
            n,
            fraction,
            seed,
        } => {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::Semantic(format!("fraction {fraction} outside [0, 1]")).into());
            }
            let p = parse_program(&read(&program)?)?;
            Ok(format_dataset(&sample_dataset(&p, n, fraction, seed)?.examples))
        }
        Command::Kl { truth, learned, format } => kl(&truth, &learned, format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let worker = std::thread::Builder::new()
        .stack_size(512 << 20)
        .spawn(move || run(cli))
        .expect("spawn worker thread");
    match worker.join() {
        Ok(Ok(out)) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
        Err(_) => ExitCode::from(101),
    }
}
