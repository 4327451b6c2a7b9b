use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActionForm, Candidate, GeneratorAdapter, InteractError};
use crate::edits::{parse_edits, parse_program, render_edits, render_stmt, EditKind, EditScript, EditStmt, PathSeg};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    /// Chance that a candidate carries a distractor in place of a gold
    /// action. Below 1 some candidate always keeps each gold action.
    pub distractor_rate: f64,
    /// Shuffles candidate order and drives the distractor draws.
    pub shuffle_seed: Option<u64>,
}

/// Test double that knows the gold actions and proposes them, optionally
/// mixed with distractors.
pub struct OracleGenerator {
    gold: Vec<String>,
    form: ActionForm,
    noise: Noise,
    rng: ChaCha8Rng,
}

impl OracleGenerator {
    pub fn new(gold: Vec<String>, form: ActionForm, noise: Noise) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(noise.shuffle_seed.unwrap_or(0));
        Self { gold, form, noise, rng }
    }

    /// A wrong variant of `action`, distinct from every gold action.
    fn distractor(&self, action: &str, n: usize) -> String {
        let mut k = n;
        loop {
            let tag = format!("alt{k}");
            let d = self.mutate(action, &tag).unwrap_or_else(|| format!("{action} {tag}"));
            if !self.gold.contains(&d) {
                return d;
            }
            k += 1;
        }
    }

    fn mutate(&self, action: &str, tag: &str) -> Option<String> {
        match self.form {
            ActionForm::Program => {
                let stmt = parse_program(action).ok()?.stmts.into_iter().next()?;
                Some(render_stmt(&match stmt {
                    EditStmt::Assign { path, value } => EditStmt::Assign {
                        path,
                        value: format!("{value} {tag}"),
                    },
                    EditStmt::Pop { mut path, key } => {
                        path.push(key);
                        path.push(PathSeg::Clause);
                        EditStmt::Assign {
                            path,
                            value: tag.to_string(),
                        }
                    }
                }))
            }
            ActionForm::Script(g) => {
                let mut s = parse_edits(action, g).ok()?;
                let a = s.actions.first_mut()?;
                match a.kind {
                    EditKind::Delete => a.old = format!("{} {tag}", a.old),
                    _ => a.new = format!("{} {tag}", a.new),
                }
                Some(render_edits(&EditScript {
                    granularity: g,
                    actions: s.actions,
                }))
            }
        }
    }
}

impl GeneratorAdapter for OracleGenerator {
    fn propose(&mut self, _x: &str, prefix: &[String], beam_size: usize) -> Result<Vec<Candidate>, InteractError> {
        let mut remaining = self.gold.clone();
        for p in prefix {
            if let Some(i) = remaining.iter().position(|g| g == p) {
                remaining.remove(i);
            }
        }
        let rate = self.noise.distractor_rate;
        let mut keep = vec![vec![true; remaining.len()]; beam_size];
        if rate > 0.0 {
            for j in 0..remaining.len() {
                for row in keep.iter_mut() {
                    row[j] = self.rng.gen::<f64>() >= rate;
                }
                if rate < 1.0 && keep.iter().all(|row| !row[j]) {
                    let keeper = self.rng.gen_range(0..beam_size);
                    keep[keeper][j] = true;
                }
            }
        }
        let mut cands: Vec<Candidate> = keep
            .iter()
            .enumerate()
            .map(|(i, row)| Candidate {
                actions: remaining
                    .iter()
                    .zip(row)
                    .map(|(a, &k)| if k { a.clone() } else { self.distractor(a, i) })
                    .collect(),
                final_query: String::new(),
            })
            .collect();
        if self.noise.shuffle_seed.is_some() {
            cands.shuffle(&mut self.rng);
        }
        Ok(cands)
    }
}
