//! Simulated interactive correction: a user picks gold edit actions out of
//! a generator's beam, skipping steps where no candidate is right.

mod oracle;
mod stream;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{edits_of, ExampleRecord, Rep};
use crate::edits::{parse_edits, parse_program, render_edits, render_stmt, EditScript, Granularity};
use crate::editvm::{apply_clause_edits, apply_token_edits, exec_program};
use crate::pydict::{split_query, to_sql};

pub use oracle::{Noise, OracleGenerator};
pub use stream::StreamGenerator;

#[derive(Debug, Error)]
pub enum InteractError {
    #[error("generator failed: {0}")]
    Generator(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad generator message: {0}")]
    Protocol(String),
    #[error("beam size must be at least 1")]
    EmptyBeam,
    #[error("cannot read gold actions: {0}")]
    Gold(String),
}

/// One continuation proposed by a generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    /// Remaining edit actions, each rendered on its own.
    pub actions: Vec<String>,
    pub final_query: String,
}

pub trait GeneratorAdapter {
    /// At most `beam_size` continuations of `prefix` for input `x`.
    fn propose(&mut self, x: &str, prefix: &[String], beam_size: usize) -> Result<Vec<Candidate>, InteractError>;
}

/// How rendered actions are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionForm {
    Script(Granularity),
    Program,
}

impl ActionForm {
    pub fn of(rep: Rep) -> Self {
        match rep.granularity() {
            Some(g) => ActionForm::Script(g),
            None => ActionForm::Program,
        }
    }
}

/// Splits a record's edits into individually rendered actions.
pub fn gold_actions(record: &ExampleRecord) -> Result<(ActionForm, Vec<String>), InteractError> {
    let rep = Rep::new(record.query_rep, record.edit_rep).map_err(|e| InteractError::Gold(e.to_string()))?;
    let form = ActionForm::of(rep);
    let edits = edits_of(&record.y);
    let actions = match form {
        ActionForm::Program => parse_program(edits)
            .map_err(|e| InteractError::Gold(e.to_string()))?
            .stmts
            .iter()
            .map(render_stmt)
            .collect(),
        ActionForm::Script(g) => parse_edits(edits, g)
            .map_err(|e| InteractError::Gold(e.to_string()))?
            .actions
            .into_iter()
            .map(|a| {
                render_edits(&EditScript {
                    granularity: g,
                    actions: vec![a],
                })
            })
            .collect(),
    };
    Ok((form, actions))
}

fn try_execute(initial: &str, form: ActionForm, actions: &[String]) -> Option<String> {
    match form {
        ActionForm::Program => {
            let p = parse_program(&actions.join("\n")).ok()?;
            to_sql(&exec_program(&split_query(initial).ok()?, &p).ok()?).ok()
        }
        ActionForm::Script(Granularity::Token) => {
            let s = parse_edits(&actions.join(" "), Granularity::Token).ok()?;
            Some(apply_token_edits(initial, &s).result)
        }
        ActionForm::Script(g) => {
            let s = parse_edits(&actions.join(" "), g).ok()?;
            to_sql(&apply_clause_edits(&split_query(initial).ok()?, &s).ok()?).ok()
        }
    }
}

/// Executes actions in order on the initial query; an action that cannot
/// be applied on top of the ones before it is left out.
pub fn execute_actions(initial: &str, form: ActionForm, actions: &[String]) -> String {
    if let Some(r) = try_execute(initial, form, actions) {
        return r;
    }
    let mut kept: Vec<String> = Vec::new();
    for a in actions {
        kept.push(a.clone());
        if try_execute(initial, form, &kept).is_none() {
            kept.pop();
        }
    }
    try_execute(initial, form, &kept).unwrap_or_else(|| initial.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub candidates: Vec<Candidate>,
    /// The chosen action, or `None` when every probed action was wrong.
    pub selected: Option<String>,
    /// Position inside the candidates where the choice was found (or how
    /// deep the probe went before giving up).
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionLog {
    pub steps: Vec<Step>,
    pub selected: Vec<String>,
    pub result_sql: String,
    pub fully_corrected: bool,
}

#[derive(Debug, Error)]
#[error("{source}")]
pub struct SimulateError {
    #[source]
    pub source: InteractError,
    /// Session state up to the failure.
    pub partial: Box<SessionLog>,
}

/// Runs one correction session.
///
/// Each round asks the generator for continuations of the selected prefix
/// and probes them depth by depth for an action still in the gold set. The
/// session ends when the gold set is used up or a round finds nothing. The
/// final query comes from executing the selected actions, never from a
/// candidate's own final query.
pub fn simulate(
    record: &ExampleRecord,
    gold_script: &[String],
    generator: &mut dyn GeneratorAdapter,
    beam_size: usize,
) -> Result<SessionLog, SimulateError> {
    let fail = |source, log: SessionLog| SimulateError {
        source,
        partial: Box::new(log),
    };
    let mut log = SessionLog {
        steps: Vec::new(),
        selected: Vec::new(),
        result_sql: record.wrong_sql.clone(),
        fully_corrected: false,
    };
    if beam_size == 0 {
        return Err(fail(InteractError::EmptyBeam, log));
    }
    let form = match Rep::new(record.query_rep, record.edit_rep) {
        Ok(rep) => ActionForm::of(rep),
        Err(e) => return Err(fail(InteractError::Gold(e.to_string()), log)),
    };
    let mut remaining = gold_script.to_vec();
    while !remaining.is_empty() {
        let mut cands = match generator.propose(&record.x, &log.selected, beam_size) {
            Ok(c) => c,
            Err(e) => return Err(fail(e, log)),
        };
        cands.truncate(beam_size);
        let deepest = cands.iter().map(|c| c.actions.len()).max().unwrap_or(0);
        let hit = (0..deepest).find_map(|d| {
            cands.iter().find_map(|c| {
                let a = c.actions.get(d)?;
                remaining.iter().position(|g| g == a).map(|i| (d, i))
            })
        });
        match hit {
            Some((depth, i)) => {
                let action = remaining.remove(i);
                log.selected.push(action.clone());
                log.steps.push(Step {
                    candidates: cands,
                    selected: Some(action),
                    depth,
                });
            }
            None => {
                log.steps.push(Step {
                    candidates: cands,
                    selected: None,
                    depth: deepest,
                });
                break;
            }
        }
    }
    log.result_sql = execute_actions(&record.wrong_sql, form, &log.selected);
    log.fully_corrected = log.result_sql == record.gold_sql;
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{serialize_example, EditRep, QueryRep};
    use crate::sql::{parse_unchecked, render, tokenize};

    pub(crate) fn record(wrong: &str, gold: &str, rep: Rep) -> ExampleRecord {
        let p = |s: &str| parse_unchecked(&tokenize(s).unwrap()).unwrap();
        let (w, g) = (p(wrong), p(gold));
        let s = serialize_example("q", "s", &w, &g, rep, false).unwrap();
        ExampleRecord {
            db_id: "d".into(),
            question: "q".into(),
            schema_serial: "s".into(),
            wrong_sql: render(&w),
            gold_sql: render(&g),
            query_rep: rep.query,
            edit_rep: rep.edit,
            x: s.x,
            y: s.y,
            n_edits: s.n_edits,
            beam_rank: 0,
            beam_score: 0.0,
        }
    }

    const A1_WRONG: &str =
        "select count(*) from cars_data where cars_data.accelerate > (select max(cars_data.horsepower) from cars_data)";
    const A1_GOLD: &str = "select count(*) from cars_data where cars_data.accelerate > (select cars_data.accelerate from cars_data order by cars_data.horsepower desc limit 1)";

    #[test]
    fn oracle_and_adversary() {
        for rep in [
            Rep::new(QueryRep::Pydict, EditRep::Program).unwrap(),
            Rep::new(QueryRep::Pydict, EditRep::Clause).unwrap(),
            Rep::new(QueryRep::Sql, EditRep::Clause).unwrap(),
        ] {
            let r = record(A1_WRONG, A1_GOLD, rep);
            let (form, gold) = gold_actions(&r).unwrap();
            let mut oracle = OracleGenerator::new(gold.clone(), form, Noise::default());
            let log = simulate(&r, &gold, &mut oracle, 3).unwrap();
            assert!(log.fully_corrected, "{rep}: {log:?}");
            assert_eq!(log.selected, gold);

            let noise = Noise {
                distractor_rate: 1.0,
                shuffle_seed: Some(3),
            };
            let mut adversary = OracleGenerator::new(gold.clone(), form, noise);
            let log = simulate(&r, &gold, &mut adversary, 3).unwrap();
            assert!(log.selected.is_empty());
            assert_eq!(log.result_sql, r.wrong_sql);
        }
    }

    #[test]
    fn generator_failure_keeps_state() {
        struct Broken;
        impl GeneratorAdapter for Broken {
            fn propose(&mut self, _: &str, _: &[String], _: usize) -> Result<Vec<Candidate>, InteractError> {
                Err(InteractError::Generator("down".into()))
            }
        }
        let r = record(A1_WRONG, A1_GOLD, Rep::new(QueryRep::Pydict, EditRep::Program).unwrap());
        let err = simulate(&r, &["x".to_string()], &mut Broken, 3).unwrap_err();
        assert_eq!(err.partial.result_sql, r.wrong_sql);
    }
}
