mod common;

use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use rusqlite::Connection;

use common::fuzz::{self, Fuzzer};
use sqlfix::dataset::{
    build_dev_set, fold_assignment, serialize_example, verify_record, EditRep, ExampleRecord, ParserOutput, QueryRep,
    Rep,
};
use sqlfix::edits::{
    align_clauses, diff_clauses_pydict, diff_clauses_sql, diff_program, diff_tokens, parse_edits, parse_program,
    render_edits, render_program, EditStmt, Granularity, PathSeg,
};
use sqlfix::editvm::{apply_clause_edits, exec_program};
use sqlfix::interact::{execute_actions, gold_actions, simulate, Noise, OracleGenerator};
use sqlfix::metrics::{exact_set_match, execution_match, mcnemar_counts, ExecBackend, SqliteBackend};
use sqlfix::pydict::{decompose, parse_pydict, placeholder_id, render_pydict, to_sql, ClauseMap, ClauseValue};
use sqlfix::sql::{normalize, parse_normalized, render, tokenize, Cond, Expr, Predicate, Query, TokenKind};

fn gen(seed: u64) -> Query {
    let schema = fuzz::schema();
    parse_normalized(&render(&Fuzzer::new(seed).query(0)), &schema).unwrap()
}

fn pair(seed: u64) -> (Query, Query) {
    let schema = fuzz::schema();
    let mut f = Fuzzer::new(seed);
    let w = parse_normalized(&render(&f.query(0)), &schema).unwrap();
    let g = parse_normalized(&render(&f.perturb(&w)), &schema).unwrap();
    (w, g)
}

/// Uppercases everything outside string literals.
fn shout(sql: &str) -> String {
    let mut out = String::new();
    let mut quoted = false;
    for ch in sql.chars() {
        if ch == '\'' || ch == '"' {
            quoted = !quoted;
        }
        out.extend(if quoted { vec![ch] } else { ch.to_uppercase().collect() });
    }
    out
}

fn string_literals(sql: &str) -> Vec<String> {
    let mut v: Vec<String> = tokenize(sql)
        .unwrap()
        .into_iter()
        .filter(|t| t.kind == TokenKind::StringLiteral)
        .map(|t| t.text)
        .collect();
    v.sort();
    v
}

fn leaf_paths(program: &[EditStmt]) -> BTreeSet<Vec<PathSeg>> {
    program
        .iter()
        .map(|s| match s {
            EditStmt::Assign { path, .. } => path.clone(),
            EditStmt::Pop { path, key } => {
                let mut p = path.clone();
                p.push(*key);
                p
            }
        })
        .collect()
}

/// Placeholders of every composite appear densely, in order, in its text.
fn placeholders_dense(map: &ClauseMap) -> bool {
    map.iter().all(|(_, v)| match v {
        ClauseValue::Text(_) => true,
        ClauseValue::Query(m) => placeholders_dense(m),
        ClauseValue::Composite(c) => {
            let mut last = 0;
            (0..c.subqueries.len()).all(|n| match c.clause.find(&placeholder_id(n)) {
                Some(at) if at >= last => {
                    last = at;
                    true
                }
                _ => false,
            }) && c.subqueries.iter().all(placeholders_dense)
        }
    })
}

fn first_number(c: &mut Cond) -> Option<&mut String> {
    match c {
        Cond::Pred(Predicate::Compare {
            rhs: Expr::Number(n), ..
        }) => Some(n),
        Cond::Pred(Predicate::Between {
            low: Expr::Number(n), ..
        }) => Some(n),
        Cond::Pred(_) => None,
        Cond::And(cs) | Cond::Or(cs) => cs.iter_mut().find_map(first_number),
    }
}

fn record(w: &Query, g: &Query, rep: Rep) -> ExampleRecord {
    let s = serialize_example("q", "s", w, g, rep, false).unwrap();
    ExampleRecord {
        db_id: "d".into(),
        question: "q".into(),
        schema_serial: "s".into(),
        wrong_sql: render(w),
        gold_sql: render(g),
        query_rep: rep.query,
        edit_rep: rep.edit,
        x: s.x,
        y: s.y,
        n_edits: s.n_edits,
        beam_rank: 0,
        beam_score: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn render_parse_round_trip(seed in any::<u64>()) {
        let n = gen(seed);
        prop_assert_eq!(parse_normalized(&render(&n), &fuzz::schema()).unwrap(), n);
    }

    #[test]
    fn normalization_is_idempotent_and_keeps_values(seed in any::<u64>()) {
        let schema = fuzz::schema();
        let text = shout(&render(&Fuzzer::new(seed).query(0)));
        let once = parse_normalized(&text, &schema).unwrap();
        prop_assert_eq!(&normalize(&once, &schema).unwrap(), &once);
        prop_assert_eq!(string_literals(&text), string_literals(&render(&once)));
    }

    #[test]
    fn pydict_laws(seed in any::<u64>()) {
        let n = gen(seed);
        let m = decompose(&n);
        prop_assert_eq!(to_sql(&m).unwrap(), render(&n));
        prop_assert_eq!(&parse_pydict(&render_pydict(&m, false)).unwrap(), &m);
        prop_assert_eq!(&parse_pydict(&render_pydict(&m, true)).unwrap(), &m);
        prop_assert!(placeholders_dense(&m));
        let again = decompose(&parse_normalized(&to_sql(&m).unwrap(), &fuzz::schema()).unwrap());
        prop_assert_eq!(again, m);
    }

    #[test]
    fn edit_serialization_round_trips(seed in any::<u64>()) {
        let (w, g) = pair(seed);
        let (wm, gm) = (decompose(&w), decompose(&g));
        for s in [diff_tokens(&w, &g), diff_clauses_sql(&w, &g), diff_clauses_pydict(&wm, &gm).unwrap()] {
            prop_assert_eq!(&parse_edits(&render_edits(&s), s.granularity).unwrap(), &s);
        }
        let p = diff_program(&wm, &gm).unwrap();
        prop_assert_eq!(parse_program(&render_program(&p)).unwrap(), p);
    }

    #[test]
    fn diff_soundness_and_agreement(seed in any::<u64>()) {
        let (w, g) = pair(seed);
        let (wm, gm) = (decompose(&w), decompose(&g));
        let by_sql = apply_clause_edits(&wm, &diff_clauses_sql(&w, &g)).unwrap();
        let by_dict = apply_clause_edits(&wm, &diff_clauses_pydict(&wm, &gm).unwrap()).unwrap();
        let program = diff_program(&wm, &gm).unwrap();
        let by_prog = exec_program(&wm, &program).unwrap();
        prop_assert_eq!(&by_sql, &gm);
        prop_assert_eq!(&by_dict, &gm);
        prop_assert_eq!(&by_prog, &gm);
        prop_assert_eq!(to_sql(&by_prog).unwrap(), to_sql(&by_dict).unwrap());

        let touched: BTreeSet<_> = align_clauses(&wm, &gm, Granularity::ClausePydict)
            .unwrap()
            .ops
            .iter()
            .map(|op| op.path())
            .collect();
        prop_assert_eq!(touched, leaf_paths(&program.stmts));
    }

    #[test]
    fn self_diff_is_empty(seed in any::<u64>()) {
        let n = gen(seed);
        let m = decompose(&n);
        prop_assert!(diff_tokens(&n, &n).is_empty());
        prop_assert!(diff_clauses_sql(&n, &n).is_empty());
        prop_assert!(diff_clauses_pydict(&m, &m).unwrap().is_empty());
        prop_assert!(diff_program(&m, &m).unwrap().is_empty());
    }

    #[test]
    fn exact_match_laws(seed in any::<u64>()) {
        let (a, b) = pair(seed);
        prop_assert!(exact_set_match(&a, &a));
        prop_assert_eq!(exact_set_match(&a, &b), exact_set_match(&b, &a));

        let mut permuted = a.clone();
        permuted.select.items.reverse();
        if let Some(Cond::And(cs)) = &mut permuted.where_ {
            cs.reverse();
        }
        prop_assert!(exact_set_match(&permuted, &a));

        let mut changed = a.clone();
        if let Some(n) = changed.where_.as_mut().and_then(first_number) {
            *n = format!("{}0", n);
            prop_assert!(!exact_set_match(&changed, &a));
        }
    }

    #[test]
    fn mcnemar_symmetric_and_monotone(n in 1u64..200) {
        let mut prev = f64::INFINITY;
        for b in (0..=n / 2).rev() {
            let m = mcnemar_counts(b, n - b);
            prop_assert_eq!(m.p, mcnemar_counts(n - b, b).p);
            prop_assert!((0.0..=1.0).contains(&m.p));
            // b falls as |b - c| widens
            prop_assert!(m.p <= prev + 1e-12);
            prev = m.p;
        }
    }

    #[test]
    fn folds_partition_databases(sizes in prop::collection::vec(1usize..20, 2..12), k in 2usize..6) {
        let outputs: Vec<ParserOutput> = sizes
            .iter()
            .enumerate()
            .flat_map(|(d, &n)| (0..n).map(move |i| ParserOutput {
                db_id: format!("db{d}"),
                question: format!("q{i}"),
                gold_sql: String::new(),
                beam: Vec::new(),
            }))
            .collect();
        match fold_assignment(&outputs, k) {
            Err(_) => prop_assert!(sizes.len() < k),
            Ok(folds) => {
                let mut seen = HashMap::new();
                for (i, f) in folds.iter().enumerate() {
                    for db in f {
                        prop_assert!(seen.insert(db.clone(), i).is_none());
                    }
                }
                prop_assert_eq!(seen.len(), sizes.len());
                prop_assert_eq!(fold_assignment(&outputs, k).unwrap(), folds);
            }
        }
    }

    #[test]
    fn dev_set_never_leaks(n_dbs in 1usize..4, seed in any::<u64>(), scores in prop::collection::vec(0.0f64..1.0, 24)) {
        let rep = Rep::new(QueryRep::Pydict, EditRep::Program).unwrap();
        let (w, g) = pair(7);
        let base = record(&w, &g, rep);
        let records: Vec<ExampleRecord> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| ExampleRecord {
                db_id: format!("db{}", i % 4),
                question: format!("q{}", i % 3),
                beam_rank: i,
                beam_score: s,
                ..base.clone()
            })
            .collect();
        let (train, dev) = build_dev_set(&records, n_dbs, seed).unwrap();
        for d in &dev {
            prop_assert!(!train.iter().any(|t| t.db_id == d.db_id && t.question == d.question));
            let best = records
                .iter()
                .filter(|r| r.db_id == d.db_id && r.question == d.question)
                .map(|r| r.beam_score)
                .fold(f64::MIN, f64::max);
            prop_assert_eq!(d.beam_score, best);
        }
        let dev_dbs: BTreeSet<_> = dev.iter().map(|r| r.db_id.clone()).collect();
        prop_assert_eq!(dev_dbs.len(), n_dbs);
        prop_assert_eq!(dev.len(), n_dbs * 3);
        prop_assert_eq!(train.len(), records.len() - n_dbs * 6);
    }

    #[test]
    fn emitted_records_verify(seed in any::<u64>()) {
        let (w, g) = pair(seed);
        for rep in Rep::SUPPORTED {
            if rep.edit == EditRep::Token {
                continue;
            }
            prop_assert!(verify_record(&record(&w, &g, rep)).unwrap());
        }
    }

    #[test]
    fn sessions_progress_and_execute_selection(seed in any::<u64>(), rate in 0.0f64..=1.0, beam in 1usize..5) {
        let (w, g) = pair(seed);
        let r = record(&w, &g, Rep::new(QueryRep::Pydict, EditRep::Program).unwrap());
        let (form, gold) = gold_actions(&r).unwrap();
        let noise = Noise { distractor_rate: rate, shuffle_seed: Some(seed) };
        let log = simulate(&r, &gold, &mut OracleGenerator::new(gold.clone(), form, noise), beam).unwrap();
        prop_assert!(log.steps.len() <= gold.len() + 1);
        prop_assert!(log.selected.len() <= gold.len());
        prop_assert!(log.steps.iter().all(|s| s.candidates.len() <= beam));
        prop_assert_eq!(&log.result_sql, &execute_actions(&r.wrong_sql, form, &log.selected));
        let again = simulate(&r, &gold, &mut OracleGenerator::new(gold.clone(), form, noise), beam).unwrap();
        prop_assert_eq!(again, log);
    }
}

#[test]
fn execution_match_is_reflexive() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("concert_singer")).unwrap();
    let c = Connection::open(dir.path().join("concert_singer/concert_singer.sqlite")).unwrap();
    c.execute_batch(
        "create table singer (singer_id int, name text, country text, age int);
         create table concert (concert_id int, concert_name text, stadium_id int, year int);
         create table stadium (stadium_id int, location text, name text, capacity int);
         create table singer_in_concert (concert_id int, singer_id int);
         insert into singer values (1, 'Joe Sharp', 'Netherlands', 52), (2, 'Timbaland', 'USA', 32),
                                   (3, 'Justin Brown', 'France', 29), (4, 'Rose White', 'France', 41);
         insert into stadium values (1, 'Raith Rovers', 'Stark', 10104), (2, 'Ayr United', 'Somerset', 11998);
         insert into concert values (1, 'Auditions', 1, 2014), (2, 'Super bootcamp', 2, 2014), (3, 'Home Visits', 1, 2015);
         insert into singer_in_concert values (1, 2), (1, 3), (2, 3), (3, 1), (3, 4);",
    )
    .unwrap();
    drop(c);
    let backend = SqliteBackend::new(dir.path());
    let mut executed = 0;
    for seed in 0..200 {
        let sql = render(&gen(seed));
        if backend.execute(&sql, "concert_singer").is_ok() {
            executed += 1;
            assert!(
                execution_match(&sql, &sql, "concert_singer", &backend).unwrap(),
                "{sql}"
            );
        }
    }
    assert!(executed > 100, "only {executed} queries executed");
}
