use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, ExampleRecord, ParserOutput, Result};

/// Database ids per fold. Databases are taken largest first (ties in
/// first-appearance order) and each goes to the currently smallest fold
/// (ties to the lowest index).
pub fn fold_assignment(outputs: &[ParserOutput], k: usize) -> Result<Vec<Vec<String>>> {
    if k < 2 {
        return Err(DatasetError::BadFoldCount(k));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut sizes: HashMap<&str, usize> = HashMap::new();
    for o in outputs {
        let n = sizes.entry(&o.db_id).or_insert(0);
        if *n == 0 {
            order.push(&o.db_id);
        }
        *n += 1;
    }
    if order.len() < k {
        return Err(DatasetError::TooFewDatabases { dbs: order.len(), k });
    }
    // stable sort keeps first-appearance order among equal sizes
    order.sort_by(|a, b| sizes[b].cmp(&sizes[a]));
    let mut folds: Vec<Vec<String>> = vec![Vec::new(); k];
    let mut load = vec![0usize; k];
    for db in order {
        let f = (0..k).min_by_key(|&i| (load[i], i)).expect("k >= 2");
        folds[f].push(db.to_string());
        load[f] += sizes[db];
    }
    Ok(folds)
}

/// Splits outputs into `k` folds by database, keeping input order within
/// each fold.
pub fn split_folds(outputs: &[ParserOutput], k: usize) -> Result<Vec<Vec<ParserOutput>>> {
    let assignment = fold_assignment(outputs, k)?;
    let fold_of: HashMap<&str, usize> = assignment
        .iter()
        .enumerate()
        .flat_map(|(i, dbs)| dbs.iter().map(move |d| (d.as_str(), i)))
        .collect();
    let mut folds = vec![Vec::new(); k];
    for o in outputs {
        folds[fold_of[o.db_id.as_str()]].push(o.clone());
    }
    Ok(folds)
}

/// Samples `n_dbs` databases with a seeded generator and moves their
/// records out of the training set. Within each question (and
/// representation) only the record with the highest beam score is kept;
/// ties go to the lower beam rank. Returns `(train, dev)`.
pub fn build_dev_set(
    records: &[ExampleRecord],
    n_dbs: usize,
    seed: u64,
) -> Result<(Vec<ExampleRecord>, Vec<ExampleRecord>)> {
    let mut dbs: Vec<&str> = Vec::new();
    let mut seen = HashSet::new();
    for r in records {
        if seen.insert(r.db_id.as_str()) {
            dbs.push(&r.db_id);
        }
    }
    if n_dbs > dbs.len() {
        return Err(DatasetError::TooManyDevDatabases {
            wanted: n_dbs,
            available: dbs.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: HashSet<&str> = sample(&mut rng, dbs.len(), n_dbs).into_iter().map(|i| dbs[i]).collect();

    let mut train = Vec::new();
    // keyed by the first record index of each group, so dev keeps input order
    let mut best: BTreeMap<usize, usize> = BTreeMap::new();
    let mut first_seen: HashMap<(&str, &str, &str, &str), usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        if !chosen.contains(r.db_id.as_str()) {
            train.push(r.clone());
            continue;
        }
        let group = (
            r.db_id.as_str(),
            r.question.as_str(),
            r.query_rep.as_str(),
            r.edit_rep.as_str(),
        );
        let order = *first_seen.entry(group).or_insert(i);
        let slot = best.entry(order).or_insert(i);
        let cur = &records[*slot];
        if r.beam_score > cur.beam_score || (r.beam_score == cur.beam_score && r.beam_rank < cur.beam_rank) {
            *slot = i;
        }
    }
    let dev = best.into_values().map(|i| records[i].clone()).collect();
    Ok((train, dev))
}
