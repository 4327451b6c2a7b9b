//! Training data synthesis from parser beams, fold splitting, dev-set
//! extraction and (x, y) serialization.

mod folds;

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edits::{
    diff_clauses_pydict, diff_clauses_sql, diff_program, diff_tokens, parse_edits, parse_program, render_edits,
    render_program, EditsError, Granularity,
};
use crate::editvm::{apply_clause_edits, apply_token_edits, exec_program};
use crate::metrics::{exact_set_match, execution_match, ExecBackend, ExecError, MetricsError};
use crate::pydict::{decompose, parse_pydict, render_pydict, split_query, to_sql, PyDictError};
use crate::sql::{parse_normalized, render, Query, SchemaInfo, SchemaStore, SqlError};

pub use folds::{build_dev_set, fold_assignment, split_folds};

/// Separates the utterance from the serialized schema in `x`.
pub const SCHEMA_SEP: &str = "<Schema>";
/// Separates the serialized schema from the wrong query in `x`.
pub const QUERY_SEP: &str = "<Query>";
/// Separates the edits from the corrected query in `y`.
pub const TARGET_SEP: &str = "<Target>";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no schema for database `{0}`")]
    MissingSchema(String),
    #[error("unsupported representation {0}")]
    UnsupportedRep(Rep),
    #[error("wrong and gold queries are identical")]
    NoEdits,
    #[error("k must be at least 2, got {0}")]
    BadFoldCount(usize),
    #[error("{dbs} databases cannot fill {k} folds")]
    TooFewDatabases { dbs: usize, k: usize },
    #[error("cannot sample {wanted} databases from {available}")]
    TooManyDevDatabases { wanted: usize, available: usize },
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error(transparent)]
    PyDict(#[from] PyDictError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Edits(#[from] EditsError),
}

type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamEntry {
    pub sql: String,
    pub score: f64,
}

/// One parser input with its gold query and decoded beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParserOutput {
    pub db_id: String,
    pub question: String,
    pub gold_sql: String,
    pub beam: Vec<BeamEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryRep {
    Sql,
    Pydict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditRep {
    Token,
    Clause,
    Program,
}

macro_rules! str_enum {
    ($t:ty { $($v:ident => $s:literal),* }) => {
        impl $t {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$v => $s),* }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s { $($s => Ok(Self::$v),)* _ => Err(format!("unknown value `{s}`")) }
            }
        }
    };
}

str_enum!(QueryRep { Sql => "sql", Pydict => "pydict" });
str_enum!(EditRep { Token => "token", Clause => "clause", Program => "program" });
str_enum!(Policy { FailsEither => "either", FailsBoth => "both" });

/// A query representation paired with an edit representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rep {
    pub query: QueryRep,
    pub edit: EditRep,
}

impl fmt::Display for Rep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.query, self.edit)
    }
}

impl Rep {
    pub const SUPPORTED: [Rep; 4] = [
        Rep {
            query: QueryRep::Sql,
            edit: EditRep::Token,
        },
        Rep {
            query: QueryRep::Sql,
            edit: EditRep::Clause,
        },
        Rep {
            query: QueryRep::Pydict,
            edit: EditRep::Clause,
        },
        Rep {
            query: QueryRep::Pydict,
            edit: EditRep::Program,
        },
    ];

    pub fn new(query: QueryRep, edit: EditRep) -> Result<Self> {
        let rep = Rep { query, edit };
        if Self::SUPPORTED.contains(&rep) {
            Ok(rep)
        } else {
            Err(DatasetError::UnsupportedRep(rep))
        }
    }

    /// Granularity of the embedded edit script, `None` for programs.
    pub fn granularity(self) -> Option<Granularity> {
        match (self.query, self.edit) {
            (_, EditRep::Program) => None,
            (_, EditRep::Token) => Some(Granularity::Token),
            (QueryRep::Sql, EditRep::Clause) => Some(Granularity::ClauseSql),
            (QueryRep::Pydict, EditRep::Clause) => Some(Granularity::ClausePydict),
        }
    }
}

/// When a beam parse counts as wrong.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Wrong when it fails EM or EX.
    #[default]
    FailsEither,
    /// Wrong only when it fails both (EM alone without a backend).
    FailsBoth,
}

impl Policy {
    pub fn is_wrong(self, em: bool, ex: Option<bool>) -> bool {
        match self {
            Policy::FailsEither => !em || ex == Some(false),
            Policy::FailsBoth => !em && ex != Some(true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub db_id: String,
    pub question: String,
    pub schema_serial: String,
    /// Canonical SQL of the wrong parse.
    pub wrong_sql: String,
    /// Canonical SQL of the gold query.
    pub gold_sql: String,
    pub query_rep: QueryRep,
    pub edit_rep: EditRep,
    pub x: String,
    pub y: String,
    pub n_edits: usize,
    pub beam_rank: usize,
    pub beam_score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Serialized {
    pub x: String,
    pub y: String,
    pub n_edits: usize,
}

fn render_query(q: &Query, rep: QueryRep) -> String {
    match rep {
        QueryRep::Sql => render(q),
        QueryRep::Pydict => render_pydict(&decompose(q), false),
    }
}

/// Builds `x = u <Schema> s <Query> q-` and `y = e <Target> q+` (or `e`
/// alone when `program_only`).
pub fn serialize_example(
    question: &str,
    schema_serial: &str,
    wrong: &Query,
    gold: &Query,
    rep: Rep,
    program_only: bool,
) -> Result<Serialized> {
    let rep = Rep::new(rep.query, rep.edit)?;
    if render(wrong) == render(gold) {
        return Err(DatasetError::NoEdits);
    }
    let (edits, n_edits) = match rep.granularity() {
        None => {
            let p = diff_program(&decompose(wrong), &decompose(gold))?;
            (render_program(&p), p.stmts.len())
        }
        Some(Granularity::Token) => {
            let s = diff_tokens(wrong, gold);
            (render_edits(&s), s.actions.len())
        }
        Some(Granularity::ClauseSql) => {
            let s = diff_clauses_sql(wrong, gold);
            (render_edits(&s), s.actions.len())
        }
        Some(Granularity::ClausePydict) => {
            let s = diff_clauses_pydict(&decompose(wrong), &decompose(gold))?;
            (render_edits(&s), s.actions.len())
        }
    };
    if n_edits == 0 {
        return Err(DatasetError::NoEdits);
    }
    let x = format!(
        "{question} {SCHEMA_SEP} {schema_serial} {QUERY_SEP} {}",
        render_query(wrong, rep.query)
    );
    let y = if program_only {
        edits
    } else {
        format!("{edits} {TARGET_SEP} {}", render_query(gold, rep.query))
    };
    Ok(Serialized { x, y, n_edits })
}

/// Edits part of a record's `y`.
pub fn edits_of(y: &str) -> &str {
    match y.find(&format!(" {TARGET_SEP} ")) {
        Some(i) => &y[..i],
        None => y,
    }
}

/// Applies the edits embedded in a record's `y` to its wrong query and
/// reports whether the gold query comes out.
pub fn verify_record(r: &ExampleRecord) -> Result<bool> {
    let rep = Rep::new(r.query_rep, r.edit_rep)?;
    let edits = edits_of(&r.y);
    let wrong = split_query(&r.wrong_sql)?;
    let result = match rep.granularity() {
        None => exec_program(&wrong, &parse_program(edits)?)
            .ok()
            .map(|m| to_sql(&m))
            .transpose()?,
        Some(Granularity::Token) => {
            let s = parse_edits(edits, Granularity::Token)?;
            Some(apply_token_edits(&r.wrong_sql, &s).result)
        }
        Some(g) => apply_clause_edits(&wrong, &parse_edits(edits, g)?)
            .ok()
            .map(|m| to_sql(&m))
            .transpose()?,
    };
    Ok(result.as_deref() == Some(r.gold_sql.as_str()))
}

/// Counts from one synthesis run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthReport {
    pub outputs: usize,
    pub beam_entries: usize,
    pub unparseable: usize,
    pub duplicates: usize,
    pub unexecutable: usize,
    pub correct: usize,
    pub wrong: usize,
    pub invalid_gold: usize,
    pub records: usize,
}

impl std::ops::AddAssign for SynthReport {
    fn add_assign(&mut self, o: Self) {
        self.outputs += o.outputs;
        self.beam_entries += o.beam_entries;
        self.unparseable += o.unparseable;
        self.duplicates += o.duplicates;
        self.unexecutable += o.unexecutable;
        self.correct += o.correct;
        self.wrong += o.wrong;
        self.invalid_gold += o.invalid_gold;
        self.records += o.records;
    }
}

/// Labels one parser output's beam and emits a record per wrong parse and
/// requested representation.
pub fn synthesize_output(
    out: &ParserOutput,
    store: &SchemaStore,
    backend: Option<&dyn ExecBackend>,
    policy: Policy,
    reps: &[Rep],
) -> Result<(Vec<ExampleRecord>, SynthReport)> {
    let mut report = SynthReport {
        outputs: 1,
        beam_entries: out.beam.len(),
        ..Default::default()
    };
    let schema: &SchemaInfo = store
        .get(&out.db_id)
        .ok_or_else(|| DatasetError::MissingSchema(out.db_id.clone()))?;
    let Ok(gold) = parse_normalized(&out.gold_sql, schema) else {
        report.invalid_gold = 1;
        return Ok((Vec::new(), report));
    };
    let gold_text = render(&gold);
    let schema_serial = schema.serialize();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (rank, entry) in out.beam.iter().enumerate() {
        let Ok(pred) = parse_normalized(&entry.sql, schema) else {
            report.unparseable += 1;
            continue;
        };
        let text = render(&pred);
        if !seen.insert(text.clone()) {
            report.duplicates += 1;
            continue;
        }
        let ex = match backend {
            None => None,
            Some(b) => match b.execute(&text, &out.db_id) {
                Err(ExecError::Query(_)) => {
                    report.unexecutable += 1;
                    continue;
                }
                Err(ExecError::Unavailable(m)) => return Err(MetricsError::Unavailable(m).into()),
                Ok(_) => Some(execution_match(&text, &gold_text, &out.db_id, b)?),
            },
        };
        let em = exact_set_match(&pred, &gold);
        if !policy.is_wrong(em, ex) || text == gold_text {
            report.correct += 1;
            continue;
        }
        report.wrong += 1;
        for &rep in reps {
            let s = serialize_example(&out.question, &schema_serial, &pred, &gold, rep, false)?;
            records.push(ExampleRecord {
                db_id: out.db_id.clone(),
                question: out.question.clone(),
                schema_serial: schema_serial.clone(),
                wrong_sql: text.clone(),
                gold_sql: gold_text.clone(),
                query_rep: rep.query,
                edit_rep: rep.edit,
                x: s.x,
                y: s.y,
                n_edits: s.n_edits,
                beam_rank: rank,
                beam_score: entry.score,
            });
        }
    }
    report.records = records.len();
    Ok((records, report))
}

/// [`synthesize_output`] over all outputs, in input order.
pub fn synthesize_train(
    outputs: &[ParserOutput],
    store: &SchemaStore,
    backend: Option<&dyn ExecBackend>,
    policy: Policy,
    reps: &[Rep],
) -> Result<(Vec<ExampleRecord>, SynthReport)> {
    let mut all = Vec::new();
    let mut report = SynthReport::default();
    for out in outputs {
        let (records, r) = synthesize_output(out, store, backend, policy, reps)?;
        all.extend(records);
        report += r;
    }
    Ok((all, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub count: usize,
    /// `None` for an empty set.
    pub avg_edits: Option<f64>,
}

pub fn dataset_stats(records: &[ExampleRecord]) -> DatasetStats {
    let count = records.len();
    let avg_edits = (count > 0).then(|| records.iter().map(|r| r.n_edits as f64).sum::<f64>() / count as f64);
    DatasetStats { count, avg_edits }
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DatasetError::Json {
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(mut w: impl Write, items: &[T]) -> Result<()> {
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| DatasetError::Json {
            line: 0,
            message: e.to_string(),
        })?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Parses a query given in either representation into canonical SQL.
pub fn query_text_to_sql(text: &str, rep: QueryRep) -> Result<String> {
    match rep {
        QueryRep::Sql => Ok(to_sql(&split_query(text)?)?),
        QueryRep::Pydict => Ok(to_sql(&parse_pydict(text)?)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::{parse_unchecked, tokenize};

    fn q(sql: &str) -> Query {
        parse_unchecked(&tokenize(sql).unwrap()).unwrap()
    }

    const T1_WRONG: &str = "select tweets.text from tweets order by tweets.text";
    const T1_GOLD: &str = "select tweets.text from tweets order by tweets.createdate";

    #[test]
    fn pydict_program_example() {
        let rep = Rep::new(QueryRep::Pydict, EditRep::Program).unwrap();
        let s = serialize_example("show texts", "d | tweets : text", &q(T1_WRONG), &q(T1_GOLD), rep, false).unwrap();
        assert!(
            s.y.starts_with("sql[\"orderBy\"] = \"order by tweets.createdate\" <Target> sql = {"),
            "{}",
            s.y
        );
        assert!(s
            .x
            .starts_with("show texts <Schema> d | tweets : text <Query> sql = {\"select\""));
        let only = serialize_example("u", "s", &q(T1_WRONG), &q(T1_GOLD), rep, true).unwrap();
        assert_eq!(only.y, "sql[\"orderBy\"] = \"order by tweets.createdate\"");
    }

    #[test]
    fn sql_token_a2() {
        let rep = Rep::new(QueryRep::Sql, EditRep::Token).unwrap();
        let s = serialize_example(
            "u",
            "s",
            &q("select employee.name from employee join evaluation on employee.employee_id = evaluation.employee_id group by evaluation.employee_id order by sum(evaluation.bonus) desc limit 1"),
            &q("select employee.name from employee join evaluation on employee.employee_id = evaluation.employee_id order by evaluation.bonus desc limit 1"),
            rep,
            false,
        )
        .unwrap();
        assert!(s.y.starts_with("<Delete> group by evaluation.employee_id <DeleteEnd>"));
        assert_eq!(s.n_edits, 3);
    }

    #[test]
    fn rejected_inputs() {
        assert!(matches!(
            Rep::new(QueryRep::Pydict, EditRep::Token),
            Err(DatasetError::UnsupportedRep(_))
        ));
        assert!(matches!(
            Rep::new(QueryRep::Sql, EditRep::Program),
            Err(DatasetError::UnsupportedRep(_))
        ));
        let rep = Rep::new(QueryRep::Sql, EditRep::Clause).unwrap();
        assert!(matches!(
            serialize_example("u", "s", &q(T1_WRONG), &q(T1_WRONG), rep, false),
            Err(DatasetError::NoEdits)
        ));
    }

    #[test]
    fn stats() {
        let mk = |n| ExampleRecord {
            db_id: "d".into(),
            question: "q".into(),
            schema_serial: String::new(),
            wrong_sql: String::new(),
            gold_sql: String::new(),
            query_rep: QueryRep::Sql,
            edit_rep: EditRep::Clause,
            x: String::new(),
            y: String::new(),
            n_edits: n,
            beam_rank: 0,
            beam_score: 0.0,
        };
        let r: Vec<_> = [1, 2, 3, 2].into_iter().map(mk).collect();
        assert_eq!(
            dataset_stats(&r),
            DatasetStats {
                count: 4,
                avg_edits: Some(2.0)
            }
        );
        assert_eq!(
            dataset_stats(&[]),
            DatasetStats {
                count: 0,
                avg_edits: None
            }
        );
    }

    #[test]
    fn policies() {
        assert!(Policy::FailsEither.is_wrong(true, Some(false)));
        assert!(!Policy::FailsBoth.is_wrong(true, Some(false)));
        assert!(Policy::FailsBoth.is_wrong(false, Some(false)));
        assert!(!Policy::FailsBoth.is_wrong(false, Some(true)));
        assert!(Policy::FailsBoth.is_wrong(false, None));
    }
}
