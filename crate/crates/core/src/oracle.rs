//! Brute-force reference semantics: well-founded models, total-choice
//! enumeration, and exact EVID / MARG / MPE by summing over worlds.
//!
//! Everything here is deliberately naive. It shares no code with the
//! compilation pipeline beyond the ground program data type, so it can serve
//! as an independent check of that pipeline.

use std::collections::{BTreeMap, VecDeque};

use crate::ast::{Atom, PartialInterpretation};
use crate::error::{Error, Result};
use crate::grounder::{AtomId, GroundProgram, GroundRule};

/// Hard cap on the number of ground probabilistic facts we enumerate over.
pub const MAX_ENUMERATED_FACTS: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WfmResult {
    TwoValued(Vec<bool>),
    /// The well-founded model is three-valued; these atoms are undefined.
    Undefined(Vec<AtomId>),
}

/// Alternating-fixpoint evaluator for one ground rule set. Build it once and
/// call [`WfmSolver::solve`] per total choice.
pub struct WfmSolver {
    num_atoms: usize,
    heads: Vec<AtomId>,
    pos_count: Vec<usize>,
    neg_atoms: Vec<Vec<AtomId>>,
    /// atom -> rules where it occurs as a positive body literal
    watchers: Vec<Vec<usize>>,
}

impl WfmSolver {
    pub fn new(rules: &[GroundRule], num_atoms: usize) -> Self {
        let mut watchers = vec![Vec::new(); num_atoms];
        let mut pos_count = Vec::with_capacity(rules.len());
        let mut neg_atoms = Vec::with_capacity(rules.len());
        for (ri, r) in rules.iter().enumerate() {
            let mut count = 0;
            let mut negs = Vec::new();
            for l in &r.body {
                if l.positive {
                    watchers[l.atom].push(ri);
                    count += 1;
                } else {
                    negs.push(l.atom);
                }
            }
            pos_count.push(count);
            neg_atoms.push(negs);
        }
        WfmSolver {
            num_atoms,
            heads: rules.iter().map(|r| r.head).collect(),
            pos_count,
            neg_atoms,
            watchers,
        }
    }

    /// Least model of the program reduced by `assumed` (a negative literal
    /// holds iff its atom is false in `assumed`), with `facts` true.
    fn gamma(&self, facts: &[bool], assumed: &[bool]) -> Vec<bool> {
        let mut model = facts.to_vec();
        let mut remaining = self.pos_count.clone();
        let mut queue: VecDeque<AtomId> = (0..self.num_atoms).filter(|&a| model[a]).collect();
        let enabled = |ri: usize| self.neg_atoms[ri].iter().all(|&b| !assumed[b]);
        for ri in 0..self.heads.len() {
            if remaining[ri] == 0 && enabled(ri) && !model[self.heads[ri]] {
                model[self.heads[ri]] = true;
                queue.push_back(self.heads[ri]);
            }
        }
        while let Some(a) = queue.pop_front() {
            for &ri in &self.watchers[a] {
                remaining[ri] -= 1;
                if remaining[ri] == 0 && enabled(ri) && !model[self.heads[ri]] {
                    model[self.heads[ri]] = true;
                    queue.push_back(self.heads[ri]);
                }
            }
        }
        model
    }

    pub fn solve(&self, facts: &[bool]) -> WfmResult {
        let mut truth = vec![false; self.num_atoms];
        loop {
            let possible = self.gamma(facts, &truth);
            let next = self.gamma(facts, &possible);
            if next == truth {
                let undefined: Vec<AtomId> =
                    (0..self.num_atoms).filter(|&a| possible[a] && !truth[a]).collect();
                return if undefined.is_empty() {
                    WfmResult::TwoValued(truth)
                } else {
                    WfmResult::Undefined(undefined)
                };
            }
            truth = next;
        }
    }
}

/// Well-founded model of `rules` with the atoms in `facts` added as facts.
pub fn wfm(rules: &[GroundRule], num_atoms: usize, facts: &[AtomId]) -> WfmResult {
    let mut fact_mask = vec![false; num_atoms];
    for &f in facts {
        fact_mask[f] = true;
    }
    WfmSolver::new(rules, num_atoms).solve(&fact_mask)
}

/// One row of the total-choice table.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldRow {
    /// Truth value per ground probabilistic fact, in fact order.
    pub choice: Vec<bool>,
    /// Truth value per atom of the ground program.
    pub world: Vec<bool>,
    pub prob: f64,
}

/// Visits all `2^n` total choices. Row `i` sets fact `j` false iff bit
/// `n-1-j` of `i` is set, so the first row is the all-true choice and the
/// first fact varies slowest.
pub fn for_each_world(
    g: &GroundProgram,
    params: Option<&[f64]>,
    mut visit: impl FnMut(&[bool], &[bool], f64),
) -> Result<()> {
    let n = g.prob_facts.len();
    if n > MAX_ENUMERATED_FACTS {
        return Err(Error::ResourceLimit(format!(
            "oracle enumeration over {n} probabilistic facts (cap {MAX_ENUMERATED_FACTS})"
        )));
    }
    let probs: Vec<f64> = g
        .prob_facts
        .iter()
        .map(|f| f.prob.resolve(params))
        .collect::<Result<_>>()?;
    let solver = WfmSolver::new(&g.rules, g.num_atoms());
    let mut facts = vec![false; g.num_atoms()];
    let mut choice = vec![false; n];
    for row in 0u64..(1u64 << n) {
        let mut prob = 1.0;
        for j in 0..n {
            let value = (row >> (n - 1 - j)) & 1 == 0;
            choice[j] = value;
            facts[g.prob_facts[j].atom] = value;
            prob *= if value { probs[j] } else { 1.0 - probs[j] };
        }
        match solver.solve(&facts) {
            WfmResult::TwoValued(world) => visit(&choice, &world, prob),
            WfmResult::Undefined(atoms) => {
                return Err(Error::Unsound {
                    undefined: atoms.iter().map(|&a| g.atom(a).to_string()).collect(),
                })
            }
        }
    }
    Ok(())
}

pub fn enumerate(g: &GroundProgram) -> Result<Vec<WorldRow>> {
    enumerate_with(g, None)
}

pub fn enumerate_with(g: &GroundProgram, params: Option<&[f64]>) -> Result<Vec<WorldRow>> {
    let mut rows = Vec::new();
    for_each_world(g, params, |choice, world, prob| {
        rows.push(WorldRow {
            choice: choice.to_vec(),
            world: world.to_vec(),
            prob,
        })
    })?;
    Ok(rows)
}

/// Evidence resolved against a ground program. Atoms outside the program are
/// false in every world, so a `true` observation of one can never hold.
fn evidence_mask(g: &GroundProgram, e: &PartialInterpretation) -> Option<Vec<(AtomId, bool)>> {
    let mut out = Vec::new();
    for (atom, value) in e.iter() {
        match g.id_of(atom) {
            Some(id) => out.push((id, value)),
            None if value => return None,
            None => {}
        }
    }
    Some(out)
}

fn consistent(world: &[bool], ev: &[(AtomId, bool)]) -> bool {
    ev.iter().all(|&(a, v)| world[a] == v)
}

pub fn oracle_evid(g: &GroundProgram, e: &PartialInterpretation) -> Result<f64> {
    oracle_evid_with(g, None, e)
}

pub fn oracle_evid_with(
    g: &GroundProgram,
    params: Option<&[f64]>,
    e: &PartialInterpretation,
) -> Result<f64> {
    let Some(ev) = evidence_mask(g, e) else {
        return Ok(0.0);
    };
    let mut total = 0.0;
    for_each_world(g, params, |_, world, p| {
        if consistent(world, &ev) {
            total += p;
        }
    })?;
    Ok(total)
}

/// Conditional marginals `P(q | e)` for each query atom.
pub fn oracle_marg(
    g: &GroundProgram,
    queries: &[Atom],
    e: &PartialInterpretation,
) -> Result<BTreeMap<Atom, f64>> {
    let zero = || Error::ZeroProbability {
        evidence: e.summary(),
    };
    let ev = evidence_mask(g, e).ok_or_else(zero)?;
    let ids: Vec<Option<AtomId>> = queries.iter().map(|q| g.id_of(q)).collect();
    let mut evidence_mass = 0.0;
    let mut joint = vec![0.0; queries.len()];
    for_each_world(g, None, |_, world, p| {
        if consistent(world, &ev) {
            evidence_mass += p;
            for (k, id) in ids.iter().enumerate() {
                if id.is_some_and(|a| world[a]) {
                    joint[k] += p;
                }
            }
        }
    })?;
    if evidence_mass <= 0.0 {
        return Err(zero());
    }
    Ok(queries
        .iter()
        .cloned()
        .zip(joint.into_iter().map(|j| j / evidence_mass))
        .collect())
}

/// Most probable world consistent with the evidence, and its probability.
/// Ties go to the earliest row of [`for_each_world`].
pub fn oracle_mpe(g: &GroundProgram, e: &PartialInterpretation) -> Result<WorldRow> {
    let zero = || Error::ZeroProbability {
        evidence: e.summary(),
    };
    let ev = evidence_mask(g, e).ok_or_else(zero)?;
    let mut best: Option<WorldRow> = None;
    for_each_world(g, None, |choice, world, p| {
        if consistent(world, &ev) && p > 0.0 && best.as_ref().is_none_or(|b| p > b.prob) {
            best = Some(WorldRow {
                choice: choice.to_vec(),
                world: world.to_vec(),
                prob: p,
            });
        }
    })?;
    best.ok_or_else(zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grounder::GroundLit;

    fn rule(head: AtomId, body: &[(AtomId, bool)]) -> GroundRule {
        GroundRule {
            head,
            body: body
                .iter()
                .map(|&(atom, positive)| GroundLit { atom, positive })
                .collect(),
        }
    }

    #[test]
    fn definite_program_is_least_model() {
        // 0 = a (fact), 1 :- 0, 2 :- 1, 3 :- 4, 4 :- 3
        let rules = vec![rule(1, &[(0, true)]), rule(2, &[(1, true)]), rule(3, &[(4, true)]), rule(4, &[(3, true)])];
        assert_eq!(
            wfm(&rules, 5, &[0]),
            WfmResult::TwoValued(vec![true, true, true, false, false])
        );
    }

    #[test]
    fn self_negation_is_undefined() {
        let rules = vec![rule(0, &[(0, false)])];
        assert_eq!(wfm(&rules, 1, &[]), WfmResult::Undefined(vec![0]));
    }

    #[test]
    fn even_loop_through_negation_is_undefined() {
        let rules = vec![rule(0, &[(1, false)]), rule(1, &[(0, false)])];
        assert_eq!(wfm(&rules, 2, &[]), WfmResult::Undefined(vec![0, 1]));
    }

    #[test]
    fn stratified_negation() {
        // 1 :- \+0. 2 :- \+1. with 0 false
        let rules = vec![rule(1, &[(0, false)]), rule(2, &[(1, false)])];
        assert_eq!(wfm(&rules, 3, &[]), WfmResult::TwoValued(vec![false, true, false]));
        assert_eq!(wfm(&rules, 3, &[0]), WfmResult::TwoValued(vec![true, false, true]));
    }

    #[test]
    fn rule_order_does_not_matter() {
        let mut rules = vec![
            rule(2, &[(0, true), (1, false)]),
            rule(1, &[(3, true)]),
            rule(3, &[(0, true)]),
            rule(4, &[(2, false), (0, true)]),
        ];
        let a = wfm(&rules, 5, &[0]);
        rules.reverse();
        assert_eq!(a, wfm(&rules, 5, &[0]));
        rules.swap(0, 2);
        assert_eq!(a, wfm(&rules, 5, &[0]));
    }
}
