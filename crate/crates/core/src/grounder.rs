//! Grounding: the full grounding of a program, the relevant ground program
//! for a set of queries and evidence, and world sampling.
//!
//! Grounding first computes every ground rule instance whose positive body
//! atoms are all *possible* (derivable when every probabilistic fact is
//! assumed true and negation is ignored). The relevant ground program is then
//! found by backward chaining from the query and evidence atoms over those
//! instances, with a visited table so every atom is expanded once and cyclic
//! rules terminate. Rules made inactive by the evidence are dropped before
//! their bodies are explored.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ast::{
    Atom, PartialInterpretation, PredKey, ProbLabel, Program, Rule, Term,
};
use crate::error::{Error, Result};
use crate::oracle::{WfmResult, WfmSolver};

pub type AtomId = usize;

/// Default cap on the number of distinct ground atoms.
pub const DEFAULT_MAX_ATOMS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundLit {
    pub atom: AtomId,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroundRule {
    pub head: AtomId,
    pub body: Vec<GroundLit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundProbFact {
    pub atom: AtomId,
    pub prob: ProbLabel,
    /// Index of the source statement in `Program::prob_facts`.
    pub origin: usize,
}

#[derive(Debug, Clone, Default)]
pub struct GroundProgram {
    atoms: Vec<Atom>,
    index: HashMap<Atom, AtomId>,
    pub rules: Vec<GroundRule>,
    pub prob_facts: Vec<GroundProbFact>,
}

impl GroundProgram {
    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom(&self, id: AtomId) -> &Atom {
        &self.atoms[id]
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn id_of(&self, atom: &Atom) -> Option<AtomId> {
        self.index.get(atom).copied()
    }

    pub fn intern(&mut self, atom: &Atom) -> AtomId {
        if let Some(&id) = self.index.get(atom) {
            return id;
        }
        let id = self.atoms.len();
        self.atoms.push(atom.clone());
        self.index.insert(atom.clone(), id);
        id
    }

    /// For each atom, the index of its probabilistic fact if it has one.
    pub fn fact_index(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.atoms.len()];
        for (i, f) in self.prob_facts.iter().enumerate() {
            out[f.atom] = Some(i);
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.rules.is_empty()
    }

    /// Ground rules with an empty body.
    pub fn facts(&self) -> impl Iterator<Item = &GroundRule> {
        self.rules.iter().filter(|r| r.body.is_empty())
    }

    /// Ground rules with a non-empty body.
    pub fn proper_rules(&self) -> impl Iterator<Item = &GroundRule> {
        self.rules.iter().filter(|r| !r.body.is_empty())
    }

    /// Rules whose body contains a literal false under `evidence`.
    pub fn is_inactive(&self, rule: &GroundRule, evidence: &PartialInterpretation) -> bool {
        rule.body
            .iter()
            .any(|l| evidence.get(&self.atoms[l.atom]) == Some(!l.positive))
    }

    fn write_rule(&self, f: &mut fmt::Formatter<'_>, r: &GroundRule) -> fmt::Result {
        write!(f, "{}", self.atoms[r.head])?;
        for (i, l) in r.body.iter().enumerate() {
            f.write_str(if i == 0 { " :- " } else { ", " })?;
            if !l.positive {
                f.write_str("\\+")?;
            }
            write!(f, "{}", self.atoms[l.atom])?;
        }
        f.write_str(".")
    }
}

/// Dump format: one `p::atom.` line per probabilistic fact, then one line per
/// rule in surface syntax.
impl fmt::Display for GroundProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fact in &self.prob_facts {
            writeln!(f, "{}::{}.", fact.prob, self.atoms[fact.atom])?;
        }
        for r in &self.rules {
            self.write_rule(f, r)?;
            writeln!(f)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Unification against ground atoms

type Subst = Vec<(String, Term)>;

fn lookup<'a>(s: &'a Subst, v: &str) -> Option<&'a Term> {
    s.iter().find(|(k, _)| k == v).map(|(_, t)| t)
}

fn match_term(pattern: &Term, ground: &Term, s: &mut Subst) -> bool {
    match (pattern, ground) {
        (Term::Var(v), _) => match lookup(s, v) {
            Some(bound) => bound == ground,
            None => {
                s.push((v.clone(), ground.clone()));
                true
            }
        },
        (Term::Const(a), Term::Const(b)) => a == b,
        (Term::Compound(f, xs), Term::Compound(g, ys)) => {
            f == g
                && xs.len() == ys.len()
                && xs.iter().zip(ys).all(|(x, y)| match_term(x, y, s))
        }
        _ => false,
    }
}

fn match_atom(pattern: &Atom, ground: &Atom, s: &Subst) -> Option<Subst> {
    if pattern.predicate != ground.predicate || pattern.args.len() != ground.args.len() {
        return None;
    }
    let mut s = s.clone();
    pattern
        .args
        .iter()
        .zip(&ground.args)
        .all(|(p, g)| match_term(p, g, &mut s))
        .then_some(s)
}

fn apply_term(t: &Term, s: &Subst) -> Option<Term> {
    match t {
        Term::Var(v) => lookup(s, v).cloned(),
        Term::Const(_) => Some(t.clone()),
        Term::Compound(f, args) => Some(Term::Compound(
            f.clone(),
            args.iter().map(|a| apply_term(a, s)).collect::<Option<_>>()?,
        )),
    }
}

fn apply_atom(a: &Atom, s: &Subst) -> Option<Atom> {
    Some(Atom::new(
        a.predicate.clone(),
        a.args.iter().map(|t| apply_term(t, s)).collect::<Option<_>>()?,
    ))
}

// ---------------------------------------------------------------------------
// Relaxed bottom-up grounding

#[derive(Default)]
struct AtomStore {
    by_pred: HashMap<PredKey, Vec<Atom>>,
    set: HashSet<Atom>,
    order: Vec<Atom>,
}

impl AtomStore {
    fn insert(&mut self, a: Atom) -> bool {
        if self.set.contains(&a) {
            return false;
        }
        self.by_pred.entry(a.key()).or_default().push(a.clone());
        self.set.insert(a.clone());
        self.order.push(a);
        true
    }

    fn of(&self, key: &PredKey) -> &[Atom] {
        self.by_pred.get(key).map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct RuleInstance {
    head: Atom,
    body: Vec<(Atom, bool)>,
}

/// Enumerates substitutions satisfying `lits` (positive literals only), each
/// matched against the paired store.
fn join(lits: &[(&Atom, &AtomStore)], s: Subst, out: &mut Vec<Subst>) {
    let Some(((pattern, store), rest)) = lits.split_first() else {
        out.push(s);
        return;
    };
    for candidate in store.of(&pattern.key()) {
        if let Some(s2) = match_atom(pattern, candidate, &s) {
            join(rest, s2, out);
        }
    }
}

fn instantiate(rule: &Rule, s: &Subst) -> Result<RuleInstance> {
    let ground = |a: &Atom| {
        apply_atom(a, s).ok_or_else(|| Error::RangeRestriction {
            variable: a.variables().first().map_or(String::new(), |v| v.to_string()),
            clause: rule.to_string(),
        })
    };
    Ok(RuleInstance {
        head: ground(&rule.head)?,
        body: rule
            .body
            .iter()
            .map(|l| Ok((ground(&l.atom)?, l.positive)))
            .collect::<Result<_>>()?,
    })
}

/// Semi-naive fixpoint over `rules` starting from `base`. Returns all
/// possible atoms and every rule instance whose positive body holds in them.
fn relaxed_fixpoint(
    rules: &[Rule],
    base: &[Atom],
    max_atoms: usize,
) -> Result<(AtomStore, Vec<RuleInstance>)> {
    let mut all = AtomStore::default();
    let mut delta = AtomStore::default();
    for a in base {
        all.insert(a.clone());
        delta.insert(a.clone());
    }
    let mut instances = Vec::new();
    let mut seen = HashSet::new();
    let mut fresh: Vec<Atom> = Vec::new();

    let mut record = |inst: RuleInstance, all: &AtomStore, fresh: &mut Vec<Atom>| {
        if !all.set.contains(&inst.head) {
            fresh.push(inst.head.clone());
        }
        if seen.insert(inst.clone()) {
            instances.push(inst);
        }
    };

    for rule in rules.iter().filter(|r| r.body.iter().all(|l| !l.positive)) {
        record(instantiate(rule, &Vec::new())?, &all, &mut fresh);
    }

    loop {
        for a in fresh.drain(..) {
            if all.insert(a.clone()) {
                delta.insert(a);
            }
        }
        if all.set.len() > max_atoms {
            return Err(Error::ResourceLimit(format!(
                "grounding exceeded {max_atoms} atoms"
            )));
        }
        if delta.set.is_empty() {
            break;
        }
        let mut next_fresh = Vec::new();
        for rule in rules {
            let positives: Vec<&Atom> =
                rule.body.iter().filter(|l| l.positive).map(|l| &l.atom).collect();
            for (i, pivot) in positives.iter().enumerate() {
                if delta.of(&pivot.key()).is_empty() {
                    continue;
                }
                let mut plan: Vec<(&Atom, &AtomStore)> = vec![(pivot, &delta)];
                plan.extend(
                    positives
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, a)| (*a, &all)),
                );
                let mut substs = Vec::new();
                join(&plan, Vec::new(), &mut substs);
                for s in substs {
                    record(instantiate(rule, &s)?, &all, &mut next_fresh);
                }
            }
        }
        delta = AtomStore::default();
        fresh = next_fresh;
    }
    Ok((all, instances))
}

/// Full grounding of a program plus the indexes needed to extract relevant
/// ground programs and to sample worlds.
pub struct Grounding {
    full: GroundProgram,
    rules_by_head: Vec<Vec<usize>>,
    fact_of: Vec<Option<usize>>,
}

impl Grounding {
    pub fn new(program: &Program) -> Result<Self> {
        Self::with_limit(program, DEFAULT_MAX_ATOMS)
    }

    pub fn with_limit(program: &Program, max_atoms: usize) -> Result<Self> {
        program.validate()?;
        let deterministic = program.deterministic_predicates();

        // Truth of the deterministic part decides the domains of intensional facts.
        let det_rules: Vec<Rule> = program
            .rules
            .iter()
            .filter(|r| deterministic.contains(&r.head.key()))
            .cloned()
            .collect();
        let (_, det_instances) = relaxed_fixpoint(&det_rules, &[], max_atoms)?;
        let det_program = build_program(&[], &det_instances);
        let det_truth = match WfmSolver::new(&det_program.rules, det_program.num_atoms())
            .solve(&vec![false; det_program.num_atoms()])
        {
            WfmResult::TwoValued(m) => m,
            WfmResult::Undefined(atoms) => {
                return Err(Error::Unsound {
                    undefined: atoms.iter().map(|&a| det_program.atom(a).to_string()).collect(),
                })
            }
        };
        let mut true_atoms = AtomStore::default();
        for (id, atom) in det_program.atoms().iter().enumerate() {
            if det_truth[id] {
                true_atoms.insert(atom.clone());
            }
        }

        let mut fact_atoms: Vec<(Atom, ProbLabel, usize)> = Vec::new();
        let mut seen_facts: HashSet<Atom> = HashSet::new();
        for (origin, fact) in program.prob_facts.iter().enumerate() {
            let positives: Vec<(&Atom, &AtomStore)> = fact
                .domain_body
                .iter()
                .filter(|l| l.positive)
                .map(|l| (&l.atom, &true_atoms))
                .collect();
            let mut substs = Vec::new();
            join(&positives, Vec::new(), &mut substs);
            let mut heads = Vec::new();
            for s in substs {
                let negatives_hold = fact.domain_body.iter().filter(|l| !l.positive).all(|l| {
                    apply_atom(&l.atom, &s).is_some_and(|a| !true_atoms.set.contains(&a))
                });
                if !negatives_hold {
                    continue;
                }
                let head = apply_atom(&fact.atom, &s).ok_or_else(|| Error::RangeRestriction {
                    variable: fact.atom.variables().first().map_or(String::new(), |v| v.to_string()),
                    clause: fact.to_string(),
                })?;
                heads.push(head);
            }
            heads.sort();
            heads.dedup();
            for head in heads {
                if !seen_facts.insert(head.clone()) {
                    return Err(Error::Semantic(format!(
                        "ground probabilistic fact {head} is defined more than once"
                    )));
                }
                fact_atoms.push((head, fact.prob, origin));
            }
        }
        if fact_atoms.len() > max_atoms {
            return Err(Error::ResourceLimit(format!("grounding exceeded {max_atoms} atoms")));
        }

        let base: Vec<Atom> = fact_atoms.iter().map(|(a, _, _)| a.clone()).collect();
        let (_, instances) = relaxed_fixpoint(&program.rules, &base, max_atoms)?;
        let full = build_program(&fact_atoms, &instances);
        let mut rules_by_head = vec![Vec::new(); full.num_atoms()];
        for (i, r) in full.rules.iter().enumerate() {
            rules_by_head[r.head].push(i);
        }
        let fact_of = full.fact_index();
        Ok(Grounding {
            full,
            rules_by_head,
            fact_of,
        })
    }

    pub fn full(&self) -> &GroundProgram {
        &self.full
    }

    /// Relevant ground program for `queries` and `evidence`.
    pub fn relevant(
        &self,
        queries: &[Atom],
        evidence: &PartialInterpretation,
    ) -> Result<GroundProgram> {
        let full = &self.full;
        for atom in evidence.atoms() {
            if full.id_of(atom).is_none() {
                return Err(Error::UnknownEvidenceAtom(atom.to_string()));
            }
        }
        let mut out = GroundProgram::default();
        let mut visited: HashSet<Atom> = HashSet::new();
        let mut stack: Vec<Atom> = queries.iter().chain(evidence.atoms()).cloned().collect();
        stack.reverse();
        while let Some(atom) = stack.pop() {
            if !visited.insert(atom.clone()) {
                continue;
            }
            let id = out.intern(&atom);
            let Some(fid) = full.id_of(&atom) else {
                // not in the Herbrand base: kept as an atom without rules (always false)
                continue;
            };
            if let Some(fi) = self.fact_of[fid] {
                let fact = &full.prob_facts[fi];
                out.prob_facts.push(GroundProbFact {
                    atom: id,
                    prob: fact.prob,
                    origin: fact.origin,
                });
            }
            let mut pending = Vec::new();
            for &ri in &self.rules_by_head[fid] {
                let rule = &full.rules[ri];
                if full.is_inactive(rule, evidence) {
                    continue;
                }
                let body = rule
                    .body
                    .iter()
                    .map(|l| GroundLit {
                        atom: out.intern(full.atom(l.atom)),
                        positive: l.positive,
                    })
                    .collect();
                out.rules.push(GroundRule { head: id, body });
                pending.extend(rule.body.iter().map(|l| full.atom(l.atom).clone()));
            }
            stack.extend(pending.into_iter().rev());
        }
        Ok(out)
    }

    /// Draws one world: every ground probabilistic fact independently, then
    /// derived atoms from the well-founded model.
    pub fn sample<R: Rng>(
        &self,
        rng: &mut R,
        params: Option<&[f64]>,
    ) -> Result<PartialInterpretation> {
        let solver = WfmSolver::new(&self.full.rules, self.full.num_atoms());
        self.sample_with(&solver, rng, params)
    }

    pub fn solver(&self) -> WfmSolver {
        WfmSolver::new(&self.full.rules, self.full.num_atoms())
    }

    pub fn sample_with<R: Rng>(
        &self,
        solver: &WfmSolver,
        rng: &mut R,
        params: Option<&[f64]>,
    ) -> Result<PartialInterpretation> {
        let full = &self.full;
        let mut facts = vec![false; full.num_atoms()];
        for f in &full.prob_facts {
            let p = f.prob.resolve(params)?;
            facts[f.atom] = rng.gen::<f64>() < p;
        }
        match solver.solve(&facts) {
            WfmResult::TwoValued(world) => Ok(full
                .atoms()
                .iter()
                .cloned()
                .zip(world)
                .collect()),
            WfmResult::Undefined(atoms) => Err(Error::Unsound {
                undefined: atoms.iter().map(|&a| full.atom(a).to_string()).collect(),
            }),
        }
    }
}

fn build_program(facts: &[(Atom, ProbLabel, usize)], instances: &[RuleInstance]) -> GroundProgram {
    let mut g = GroundProgram::default();
    for (atom, prob, origin) in facts {
        let id = g.intern(atom);
        g.prob_facts.push(GroundProbFact {
            atom: id,
            prob: *prob,
            origin: *origin,
        });
    }
    for inst in instances {
        let head = g.intern(&inst.head);
        let body = inst
            .body
            .iter()
            .map(|(a, positive)| GroundLit {
                atom: g.intern(a),
                positive: *positive,
            })
            .collect();
        g.rules.push(GroundRule { head, body });
    }
    g
}

pub fn full_grounding(program: &Program) -> Result<GroundProgram> {
    Ok(Grounding::new(program)?.full)
}

pub fn relevant_ground_program(
    program: &Program,
    queries: &[Atom],
    evidence: &PartialInterpretation,
) -> Result<GroundProgram> {
    Grounding::new(program)?.relevant(queries, evidence)
}

/// Samples one complete world with a ChaCha8 generator seeded by `seed`.
pub fn sample_world(program: &Program, seed: u64) -> Result<PartialInterpretation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Grounding::new(program)?.sample(&mut rng, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::parser::{parse_atom, parse_evidence, parse_program};

    fn atom(s: &str) -> Atom {
        parse_atom(s).unwrap()
    }

    #[test]
    fn alarm_full_grounding() {
        let g = full_grounding(&parse_program(models::ALARM).unwrap()).unwrap();
        assert_eq!(g.prob_facts.len(), 4);
        assert_eq!(g.proper_rules().count(), 4);
        assert_eq!(g.facts().count(), 2);
        let names: Vec<String> =
            g.prob_facts.iter().map(|f| g.atom(f.atom).to_string()).collect();
        assert_eq!(names, ["burglary", "earthquake", "hears_alarm(john)", "hears_alarm(mary)"]);
    }

    #[test]
    fn alarm_relevant_program_skips_mary() {
        let p = parse_program(models::ALARM).unwrap();
        let e = parse_evidence("evidence(calls(john),true).").unwrap();
        let g = relevant_ground_program(&p, &[atom("burglary")], &e).unwrap();
        assert_eq!(g.prob_facts.len(), 3);
        assert_eq!(g.rules.len(), 3);
        assert!(g.atoms().iter().all(|a| !a.to_string().contains("mary")));
        let dump = g.to_string();
        assert!(dump.contains("0.7::hears_alarm(john)."), "{dump}");
        assert!(dump.contains("calls(john) :- alarm, hears_alarm(john)."), "{dump}");
    }

    #[test]
    fn empty_queries_give_empty_program() {
        let p = parse_program(models::ALARM).unwrap();
        let g = relevant_ground_program(&p, &[], &PartialInterpretation::new()).unwrap();
        assert!(g.is_empty());
        assert!(full_grounding(&Program::default()).unwrap().is_empty());
    }

    #[test]
    fn smokers_inactive_rule_pruned() {
        let p = parse_program(&models::smokers_example()).unwrap();
        let e = parse_evidence("evidence(smokes(p2),true). evidence(smokes(p3),false).").unwrap();
        let g = relevant_ground_program(&p, &[atom("smokes(p1)")], &e).unwrap();
        let facts: HashSet<String> =
            g.prob_facts.iter().map(|f| g.atom(f.atom).to_string()).collect();
        let expected: HashSet<String> = [
            "stress(p1)", "stress(p2)", "stress(p3)",
            "influences(p2,p1)", "influences(p1,p2)", "influences(p1,p3)",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        assert_eq!(facts, expected);
        assert_eq!(g.proper_rules().count(), 6);
        for r in &g.rules {
            assert!(!g.is_inactive(r, &e));
        }
    }

    #[test]
    fn grid_edge_count() {
        let g = full_grounding(&parse_program(&models::grid(3)).unwrap()).unwrap();
        assert_eq!(g.prob_facts.len(), 16);
        // 16 base path rules plus one recursive instance per (edge, reachable target)
        assert!(g.proper_rules().count() > 16);
    }

    #[test]
    fn unknown_evidence_atom_is_an_error() {
        let p = parse_program(models::ALARM).unwrap();
        let e = parse_evidence("evidence(calls(bob),true).").unwrap();
        assert_eq!(
            relevant_ground_program(&p, &[], &e).unwrap_err(),
            Error::UnknownEvidenceAtom("calls(bob)".into())
        );
    }

    #[test]
    fn atom_limit() {
        let p = parse_program("n(z).\nn(s(X)) :- n(X).").unwrap();
        assert!(matches!(
            Grounding::with_limit(&p, 50),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn domain_with_negation_and_rules() {
        let p = parse_program(
            "node(a). node(b). node(c). blocked(b).\nopen(X) :- node(X), \\+blocked(X).\n\
             0.5::up(X) :- open(X).\nok :- up(X).",
        )
        .unwrap();
        let g = full_grounding(&p).unwrap();
        let facts: Vec<String> = g.prob_facts.iter().map(|f| g.atom(f.atom).to_string()).collect();
        assert_eq!(facts, ["up(a)", "up(c)"]);
    }

    #[test]
    fn duplicate_ground_fact_rejected() {
        let p = parse_program("0.5::a.\n0.3::a.").unwrap();
        assert!(matches!(full_grounding(&p), Err(Error::Semantic(_))));
    }

    #[test]
    fn sampling_probability_one() {
        let p = parse_program("1.0::a.\nb :- a.").unwrap();
        for seed in 0..20 {
            let w = sample_world(&p, seed).unwrap();
            assert_eq!(w.get(&atom("a")), Some(true));
            assert_eq!(w.get(&atom("b")), Some(true));
        }
    }

    #[test]
    fn sampling_unsound_program() {
        let p = parse_program("0.5::a.\np :- a, \\+p.").unwrap();
        let results: Vec<_> = (0..10).map(|s| sample_world(&p, s)).collect();
        assert!(results.iter().any(|r| matches!(r, Err(Error::Unsound { .. }))));
    }
}
