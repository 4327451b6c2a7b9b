use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sqlfix::dataset::{
    build_dev_set, dataset_stats, query_text_to_sql, read_jsonl, split_folds, synthesize_output, write_jsonl, EditRep,
    ExampleRecord, ParserOutput, Policy, QueryRep, Rep, SynthReport,
};
use sqlfix::edits::{
    diff_clauses_pydict, diff_clauses_sql, diff_program, diff_tokens, parse_edits, parse_program, render_edits,
    render_program, EditProgram, EditScript, Granularity,
};
use sqlfix::editvm::{apply_clause_edits, apply_token_edits, exec_program};
use sqlfix::interact::{gold_actions, simulate, GeneratorAdapter, Noise, OracleGenerator, SessionLog, StreamGenerator};
use sqlfix::metrics::{evaluate, mcnemar, mcnemar_counts, ExecBackend, SqliteBackend};
use sqlfix::pydict::{decompose, parse_pydict, render_pydict, split_query, to_sql, ClauseMap};
use sqlfix::sql::{canonicalize, parse_normalized, parse_unchecked, render, tokenize, Query, SchemaInfo, SchemaStore};

#[derive(Parser)]
#[command(name = "sqlfix", version, about = "Text-to-SQL error correction toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct SchemaArgs {
    /// Spider-style tables.json
    #[arg(long, env = "SQLFIX_SCHEMA")]
    schema: Option<PathBuf>,
    /// Database id inside the schema file
    #[arg(long)]
    db: Option<String>,
}

#[derive(Args, Clone)]
struct RepArgs {
    #[arg(long, value_enum)]
    query_rep: Option<QueryRepArg>,
    #[arg(long, value_enum)]
    edit_rep: Option<EditRepArg>,
}

#[derive(Copy, Clone, ValueEnum)]
enum QueryRepArg {
    Sql,
    Pydict,
}

#[derive(Copy, Clone, ValueEnum)]
enum EditRepArg {
    Token,
    Clause,
    Program,
}

#[derive(Copy, Clone, ValueEnum)]
enum PolicyArg {
    Either,
    Both,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Gran {
    Token,
    ClauseSql,
    ClausePydict,
    Program,
}

impl Gran {
    fn script(self) -> Option<Granularity> {
        match self {
            Gran::Token => Some(Granularity::Token),
            Gran::ClauseSql => Some(Granularity::ClauseSql),
            Gran::ClausePydict => Some(Granularity::ClausePydict),
            Gran::Program => None,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse, validate and print the canonical form of a query.
    Normalize {
        #[command(flatten)]
        schema: SchemaArgs,
        input: Option<PathBuf>,
    },
    /// Print the clause mapping of a SQL query.
    Pydict {
        #[command(flatten)]
        schema: SchemaArgs,
        #[arg(long)]
        pretty: bool,
        input: Option<PathBuf>,
    },
    /// Rebuild SQL from a clause mapping.
    ToSql { input: Option<PathBuf> },
    /// Edits turning the wrong query into the gold one.
    Diff {
        #[arg(long, value_enum)]
        granularity: Gran,
        #[arg(long)]
        wrong: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Convert between a JSON edit script or program and its text form.
    RenderEdits {
        /// Read text and print JSON instead.
        #[arg(long)]
        parse: bool,
        #[arg(long, value_enum, default_value = "clause-pydict")]
        granularity: Gran,
        input: Option<PathBuf>,
    },
    /// Apply edits (read from INPUT or stdin) to a query.
    Apply {
        #[arg(long, value_enum)]
        granularity: Gran,
        /// Query to edit
        #[arg(long)]
        query: PathBuf,
        /// The query file holds a clause mapping, and so does the output.
        #[arg(long)]
        pydict: bool,
        input: Option<PathBuf>,
    },
    /// Run an edit program on a query.
    ExecProgram {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        pydict: bool,
        input: Option<PathBuf>,
    },
    /// Score predictions; input lines are {"db_id", "pred", "gold"}.
    Eval {
        #[arg(long, env = "SQLFIX_SCHEMA")]
        schema: PathBuf,
        #[arg(long, env = "SQLFIX_DB_DIR")]
        db_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        input: Option<PathBuf>,
    },
    /// Exact McNemar test; input lines are {"a": bool, "b": bool}.
    Mcnemar {
        /// Discordant count: first right, second wrong
        #[arg(long, requires = "c", conflicts_with = "input")]
        b: Option<u64>,
        /// Discordant count: first wrong, second right
        #[arg(long, requires = "b")]
        c: Option<u64>,
        input: Option<PathBuf>,
    },
    /// Build error-correction records from parser beam outputs.
    Synth {
        #[arg(long, env = "SQLFIX_SCHEMA")]
        schema: PathBuf,
        #[arg(long, env = "SQLFIX_DB_DIR")]
        db_dir: Option<PathBuf>,
        #[command(flatten)]
        rep: RepArgs,
        #[arg(long, value_enum, default_value = "either")]
        policy: PolicyArg,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        input: Option<PathBuf>,
    },
    /// Split parser outputs into database-disjoint folds.
    SplitFolds {
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Directory receiving fold0.jsonl, fold1.jsonl, ...
        #[arg(long)]
        out_dir: PathBuf,
        input: Option<PathBuf>,
    },
    /// Hold out sampled databases as a dev set.
    BuildDev {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        dev_dbs: usize,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        dev_out: PathBuf,
        input: Option<PathBuf>,
    },
    /// Record count and average edit count.
    Stats { input: Option<PathBuf> },
    /// Replay correction sessions over records.
    Simulate {
        #[arg(long, default_value_t = 3)]
        beam_size: usize,
        /// Distractor rate of the built-in oracle generator
        #[arg(long, default_value_t = 0.0)]
        distractor_rate: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// External generator program speaking JSON lines on stdio
        #[arg(long, conflicts_with = "connect")]
        generator_cmd: Option<String>,
        /// External generator listening on a TCP address
        #[arg(long)]
        connect: Option<String>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        input: Option<PathBuf>,
    },
}

fn usage_error(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::ArgumentConflict, msg).exit()
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) if p != Path::new("-") => fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        _ => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn read_records<T: serde::de::DeserializeOwned>(path: Option<&Path>) -> Result<Vec<T>> {
    Ok(match path {
        Some(p) if p != Path::new("-") => read_jsonl(BufReader::new(
            File::open(p).with_context(|| format!("opening {}", p.display()))?,
        ))?,
        _ => read_jsonl(io::stdin().lock())?,
    })
}

fn write_records<T: Serialize>(path: Option<&Path>, items: &[T]) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
            write_jsonl(&mut w, items)?;
            w.flush()?;
        }
        None => write_jsonl(io::stdout().lock(), items)?,
    }
    Ok(())
}

fn load_store(path: &Path) -> Result<SchemaStore> {
    Ok(SchemaStore::load(path)?)
}

fn schema_of(args: &SchemaArgs) -> Result<Option<SchemaInfo>> {
    match (&args.schema, &args.db) {
        (None, None) => Ok(None),
        (Some(path), Some(db)) => {
            let store = load_store(path)?;
            match store.get(db) {
                Some(s) => Ok(Some(s.clone())),
                None => bail!("database `{db}` not in {}", path.display()),
            }
        }
        (Some(_), None) => usage_error("--schema needs --db"),
        (None, Some(_)) => usage_error("--db needs --schema"),
    }
}

fn parse_query(sql: &str, schema: Option<&SchemaInfo>) -> Result<Query> {
    Ok(match schema {
        Some(s) => parse_normalized(sql, s)?,
        None => parse_unchecked(&tokenize(sql)?)?,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        usage_error("--workers must be at least 1");
    }
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
}

fn reps(args: &RepArgs) -> Vec<Rep> {
    let q = args.query_rep.map(|q| match q {
        QueryRepArg::Sql => QueryRep::Sql,
        QueryRepArg::Pydict => QueryRep::Pydict,
    });
    let e = args.edit_rep.map(|e| match e {
        EditRepArg::Token => EditRep::Token,
        EditRepArg::Clause => EditRep::Clause,
        EditRepArg::Program => EditRep::Program,
    });
    let chosen: Vec<Rep> = Rep::SUPPORTED
        .into_iter()
        .filter(|r| q.is_none_or(|q| r.query == q) && e.is_none_or(|e| r.edit == e))
        .collect();
    if chosen.is_empty() {
        usage_error(format!(
            "--query-rep {} cannot be combined with --edit-rep {}",
            q.map_or("?", |q| q.as_str()),
            e.map_or("?", |e| e.as_str())
        ));
    }
    chosen
}

fn query_map(text: &str, pydict: bool) -> Result<ClauseMap> {
    Ok(if pydict {
        parse_pydict(text)?
    } else {
        split_query(text)?
    })
}

fn show_map(map: &ClauseMap, pydict: bool) -> Result<String> {
    Ok(if pydict {
        render_pydict(map, false)
    } else {
        to_sql(map)?
    })
}

#[derive(Deserialize)]
struct EvalInput {
    db_id: String,
    pred: String,
    gold: String,
}

#[derive(Serialize)]
struct EvalLine {
    db_id: String,
    em: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    ex: Option<bool>,
}

#[derive(Deserialize)]
struct PairedOutcome {
    a: bool,
    b: bool,
}

#[derive(Serialize)]
struct FoldSummary {
    fold: usize,
    databases: Vec<String>,
    records: usize,
}

fn run(cli: Cli) -> Result<()> {
    let mut out = io::stdout().lock();
    match cli.cmd {
        Cmd::Normalize { schema, input } => {
            let sql = read_input(input.as_deref())?;
            let text = match schema_of(&schema)? {
                Some(s) => canonicalize(&sql, &s)?,
                None => render(&parse_query(&sql, None)?),
            };
            writeln!(out, "{text}")?;
        }
        Cmd::Pydict { schema, pretty, input } => {
            let s = schema_of(&schema)?;
            let q = parse_query(&read_input(input.as_deref())?, s.as_ref())?;
            writeln!(out, "{}", render_pydict(&decompose(&q), pretty))?;
        }
        Cmd::ToSql { input } => {
            writeln!(
                out,
                "{}",
                query_text_to_sql(&read_input(input.as_deref())?, QueryRep::Pydict)?
            )?;
        }
        Cmd::Diff {
            granularity,
            wrong,
            gold,
            schema,
        } => {
            let s = schema_of(&schema)?;
            let w = parse_query(&read_input(Some(&wrong))?, s.as_ref())?;
            let g = parse_query(&read_input(Some(&gold))?, s.as_ref())?;
            let text = match granularity {
                Gran::Token => render_edits(&diff_tokens(&w, &g)),
                Gran::ClauseSql => render_edits(&diff_clauses_sql(&w, &g)),
                Gran::ClausePydict => render_edits(&diff_clauses_pydict(&decompose(&w), &decompose(&g))?),
                Gran::Program => render_program(&diff_program(&decompose(&w), &decompose(&g))?),
            };
            writeln!(out, "{text}")?;
        }
        Cmd::RenderEdits {
            parse,
            granularity,
            input,
        } => {
            let text = read_input(input.as_deref())?;
            let rendered = match (parse, granularity.script()) {
                (false, Some(_)) => render_edits(&serde_json::from_str::<EditScript>(&text)?),
                (false, None) => render_program(&serde_json::from_str::<EditProgram>(&text)?),
                (true, Some(g)) => serde_json::to_string(&parse_edits(text.trim(), g)?)?,
                (true, None) => serde_json::to_string(&parse_program(&text)?)?,
            };
            writeln!(out, "{rendered}")?;
        }
        Cmd::Apply {
            granularity,
            query,
            pydict,
            input,
        } => {
            let q = read_input(Some(&query))?;
            let edits = read_input(input.as_deref())?;
            let edits = edits.trim();
            if edits.is_empty() {
                writeln!(out, "{}", q.trim_end_matches('\n'))?;
                return Ok(());
            }
            let text = match granularity.script() {
                Some(Granularity::Token) => {
                    if pydict {
                        usage_error("--pydict cannot be used with --granularity token");
                    }
                    let report = apply_token_edits(q.trim(), &parse_edits(edits, Granularity::Token)?);
                    if report.ambiguous_spans > 0 || report.skipped > 0 {
                        eprintln!(
                            "warning: {} ambiguous span(s), {} skipped action(s)",
                            report.ambiguous_spans, report.skipped
                        );
                    }
                    report.result
                }
                Some(g) => show_map(
                    &apply_clause_edits(&query_map(&q, pydict)?, &parse_edits(edits, g)?)?,
                    pydict,
                )?,
                None => show_map(&exec_program(&query_map(&q, pydict)?, &parse_program(edits)?)?, pydict)?,
            };
            writeln!(out, "{text}")?;
        }
        Cmd::ExecProgram { query, pydict, input } => {
            let map = query_map(&read_input(Some(&query))?, pydict)?;
            let program = parse_program(&read_input(input.as_deref())?)?;
            writeln!(out, "{}", show_map(&exec_program(&map, &program)?, pydict)?)?;
        }
        Cmd::Eval {
            schema,
            db_dir,
            workers,
            input,
        } => {
            let store = load_store(&schema)?;
            let backend = db_dir.map(SqliteBackend::new);
            let backend = backend.as_ref().map(|b| b as &dyn ExecBackend);
            let rows: Vec<EvalInput> = read_records(input.as_deref())?;
            let lines = pool(workers)?.install(|| {
                rows.par_iter()
                    .map(|r| {
                        let s = store
                            .get(&r.db_id)
                            .with_context(|| format!("database `{}` not in schema file", r.db_id))?;
                        let o = evaluate(&r.pred, &r.gold, s, backend)?;
                        Ok(EvalLine {
                            db_id: r.db_id.clone(),
                            em: o.em,
                            ex: o.ex,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            write_records(None, &lines)?;
            let n = lines.len().max(1) as f64;
            let em = lines.iter().filter(|l| l.em).count() as f64 / n;
            match backend {
                Some(_) => {
                    let ex = lines.iter().filter(|l| l.ex == Some(true)).count() as f64 / n;
                    eprintln!("{} queries, EM {:.4}, EX {:.4}", lines.len(), em, ex);
                }
                None => eprintln!("{} queries, EM {:.4}", lines.len(), em),
            }
        }
        Cmd::Mcnemar { b, c, input } => {
            let result = match (b, c) {
                (Some(b), Some(c)) => mcnemar_counts(b, c),
                _ => {
                    let rows: Vec<PairedOutcome> = read_records(input.as_deref())?;
                    mcnemar(&rows.iter().map(|r| (r.a, r.b)).collect::<Vec<_>>())?
                }
            };
            writeln!(out, "{}", serde_json::to_string(&result)?)?;
        }
        Cmd::Synth {
            schema,
            db_dir,
            rep,
            policy,
            workers,
            input,
        } => {
            let reps = reps(&rep);
            let policy = match policy {
                PolicyArg::Either => Policy::FailsEither,
                PolicyArg::Both => Policy::FailsBoth,
            };
            let store = load_store(&schema)?;
            let backend = db_dir.map(SqliteBackend::new);
            let backend = backend.as_ref().map(|b| b as &dyn ExecBackend);
            let outputs: Vec<ParserOutput> = read_records(input.as_deref())?;
            let parts = pool(workers)?.install(|| {
                outputs
                    .par_iter()
                    .map(|o| synthesize_output(o, &store, backend, policy, &reps))
                    .collect::<Result<Vec<_>, _>>()
            })?;
            let mut report = SynthReport::default();
            let mut records = Vec::new();
            for (r, rep) in parts {
                records.extend(r);
                report += rep;
            }
            write_records(None, &records)?;
            eprintln!("{}", serde_json::to_string(&report)?);
        }
        Cmd::SplitFolds { folds, out_dir, input } => {
            let outputs: Vec<ParserOutput> = read_records(input.as_deref())?;
            let split = split_folds(&outputs, folds)?;
            fs::create_dir_all(&out_dir)?;
            for (i, fold) in split.iter().enumerate() {
                write_records(Some(&out_dir.join(format!("fold{i}.jsonl"))), fold)?;
                let mut databases: Vec<String> = Vec::new();
                for o in fold {
                    if !databases.contains(&o.db_id) {
                        databases.push(o.db_id.clone());
                    }
                }
                let summary = FoldSummary {
                    fold: i,
                    databases,
                    records: fold.len(),
                };
                writeln!(out, "{}", serde_json::to_string(&summary)?)?;
            }
        }
        Cmd::BuildDev {
            seed,
            dev_dbs,
            train_out,
            dev_out,
            input,
        } => {
            let records: Vec<ExampleRecord> = read_records(input.as_deref())?;
            let (train, dev) = build_dev_set(&records, dev_dbs, seed)?;
            write_records(Some(&train_out), &train)?;
            write_records(Some(&dev_out), &dev)?;
            writeln!(out, "train {} dev {}", train.len(), dev.len())?;
        }
        Cmd::Stats { input } => {
            let records: Vec<ExampleRecord> = read_records(input.as_deref())?;
            writeln!(out, "{}", serde_json::to_string(&dataset_stats(&records))?)?;
        }
        Cmd::Simulate {
            beam_size,
            distractor_rate,
            seed,
            generator_cmd,
            connect,
            workers,
            input,
        } => {
            if beam_size == 0 {
                usage_error("--beam-size must be at least 1");
            }
            if !(0.0..=1.0).contains(&distractor_rate) {
                usage_error("--distractor-rate must lie in [0, 1]");
            }
            if distractor_rate > 0.0 && seed.is_none() {
                usage_error("--distractor-rate above 0 requires --seed");
            }
            let records: Vec<ExampleRecord> = read_records(input.as_deref())?;
            let session = |r: &ExampleRecord, g: &mut dyn GeneratorAdapter| -> Result<SessionLog> {
                let (_, gold) = gold_actions(r)?;
                Ok(simulate(r, &gold, g, beam_size)?)
            };
            let logs: Vec<SessionLog> = match (generator_cmd, connect) {
                (Some(cmd), _) => {
                    let mut parts = cmd.split_whitespace().map(str::to_string);
                    let program = parts.next().unwrap_or_else(|| usage_error("--generator-cmd is empty"));
                    let args: Vec<String> = parts.collect();
                    let mut g = StreamGenerator::spawn(&program, &args)?;
                    records.iter().map(|r| session(r, &mut g)).collect::<Result<_>>()?
                }
                (None, Some(addr)) => {
                    let mut g = StreamGenerator::connect(addr.as_str())?;
                    records.iter().map(|r| session(r, &mut g)).collect::<Result<_>>()?
                }
                (None, None) => {
                    let noise = Noise {
                        distractor_rate,
                        shuffle_seed: seed,
                    };
                    pool(workers)?.install(|| {
                        records
                            .par_iter()
                            .map(|r| {
                                let (form, gold) = gold_actions(r)?;
                                let mut g = OracleGenerator::new(gold.clone(), form, noise);
                                Ok(simulate(r, &gold, &mut g, beam_size)?)
                            })
                            .collect::<Result<Vec<_>>>()
                    })?
                }
            };
            write_records(None, &logs)?;
            let fixed = logs.iter().filter(|l| l.fully_corrected).count();
            eprintln!("{fixed}/{} sessions fully corrected", logs.len());
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
