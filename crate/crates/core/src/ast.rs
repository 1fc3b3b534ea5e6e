//! Surface-level program representation: terms, atoms, rules, probabilistic
//! facts and partial interpretations.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
    Compound(String, Vec<Term>),
}

impl Term {
    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Const(_) => true,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Term::Var(v) => out.push(v),
            Term::Const(_) => {}
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }
}

/// Predicate name plus arity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredKey {
    pub name: String,
    pub arity: usize,
}

impl fmt::Display for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    /// A zero-arity atom.
    pub fn prop(predicate: impl Into<String>) -> Self {
        Atom::new(predicate, Vec::new())
    }

    pub fn key(&self) -> PredKey {
        PredKey {
            name: self.predicate.clone(),
            arity: self.args.len(),
        }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    /// Variables in order of first occurrence.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.args.iter().for_each(|a| a.collect_vars(&mut out));
        let mut seen = HashSet::new();
        out.retain(|v| seen.insert(*v));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal {
            atom,
            positive: true,
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal {
            atom,
            positive: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Literal>,
}

impl Rule {
    pub fn fact(head: Atom) -> Self {
        Rule {
            head,
            body: Vec::new(),
        }
    }
}

/// Probability annotation of a probabilistic fact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbLabel {
    Fixed(f64),
    /// Learnable parameter, written `t(_)` in source; the index counts
    /// learnable facts in source order.
    Param(usize),
}

impl ProbLabel {
    /// Resolves the probability, looking learnable parameters up in `params`.
    pub fn resolve(&self, params: Option<&[f64]>) -> Result<f64> {
        match *self {
            ProbLabel::Fixed(p) => Ok(p),
            ProbLabel::Param(n) => params
                .and_then(|ps| ps.get(n).copied())
                .ok_or(Error::UnboundParameter(n)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilisticFact {
    pub prob: ProbLabel,
    pub atom: Atom,
    /// Domain-defining body of an intensional fact; empty for extensional ones.
    pub domain_body: Vec<Literal>,
}

/// Truth-value map over ground atoms.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct PartialInterpretation {
    assignment: BTreeMap<Atom, bool>,
}

impl PartialInterpretation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an observation. Repeating an identical observation is allowed;
    /// a contradicting one is an error.
    pub fn insert(&mut self, atom: Atom, value: bool) -> Result<()> {
        if !atom.is_ground() {
            return Err(Error::Semantic(format!(
                "interpretation atom {atom} is not ground"
            )));
        }
        match self.assignment.get(&atom) {
            Some(&old) if old != value => Err(Error::ConflictingEvidence(atom.to_string())),
            _ => {
                self.assignment.insert(atom, value);
                Ok(())
            }
        }
    }

    pub fn get(&self, atom: &Atom) -> Option<bool> {
        self.assignment.get(atom).copied()
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.assignment.contains_key(atom)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Atom, bool)> {
        self.assignment.iter().map(|(a, &v)| (a, v))
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.assignment.keys()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Union of two interpretations; fails on contradiction.
    pub fn merged(&self, other: &PartialInterpretation) -> Result<PartialInterpretation> {
        let mut out = self.clone();
        for (a, v) in other.iter() {
            out.insert(a.clone(), v)?;
        }
        Ok(out)
    }

    /// One-line rendering, used in error messages.
    pub fn summary(&self) -> String {
        let parts: Vec<String> = self
            .iter()
            .map(|(a, v)| if v { a.to_string() } else { format!("\\+{a}") })
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

impl FromIterator<(Atom, bool)> for PartialInterpretation {
    /// Later entries overwrite earlier ones; use [`PartialInterpretation::insert`]
    /// when conflicts must be detected.
    fn from_iter<I: IntoIterator<Item = (Atom, bool)>>(iter: I) -> Self {
        PartialInterpretation {
            assignment: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Program {
    pub prob_facts: Vec<ProbabilisticFact>,
    pub rules: Vec<Rule>,
    /// Query atoms, duplicates removed, in source order.
    pub queries: Vec<Atom>,
    pub evidence: PartialInterpretation,
}

impl Program {
    pub fn num_params(&self) -> usize {
        self.prob_facts
            .iter()
            .filter_map(|f| match f.prob {
                ProbLabel::Param(n) => Some(n + 1),
                ProbLabel::Fixed(_) => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Copy with every learnable label replaced by the matching entry of `params`.
    pub fn with_params(&self, params: &[f64]) -> Result<Program> {
        let mut out = self.clone();
        for fact in &mut out.prob_facts {
            fact.prob = ProbLabel::Fixed(fact.prob.resolve(Some(params))?);
        }
        Ok(out)
    }

    pub fn probabilistic_predicates(&self) -> BTreeSet<PredKey> {
        self.prob_facts.iter().map(|f| f.atom.key()).collect()
    }

    pub fn derived_predicates(&self) -> BTreeSet<PredKey> {
        self.rules.iter().map(|r| r.head.key()).collect()
    }

    /// Predicates whose truth does not (even transitively) depend on a
    /// probabilistic predicate.
    pub fn deterministic_predicates(&self) -> BTreeSet<PredKey> {
        let prob = self.probabilistic_predicates();
        let mut tainted: BTreeSet<PredKey> = prob.clone();
        loop {
            let mut changed = false;
            for r in &self.rules {
                let key = r.head.key();
                if !tainted.contains(&key) && r.body.iter().any(|l| tainted.contains(&l.atom.key()))
                {
                    tainted.insert(key);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        self.derived_predicates()
            .into_iter()
            .filter(|k| !tainted.contains(k))
            .collect()
    }

    /// Checks the structural invariants every program must satisfy.
    pub fn validate(&self) -> Result<()> {
        let prob = self.probabilistic_predicates();
        let derived = self.derived_predicates();
        if let Some(k) = prob.intersection(&derived).next() {
            return Err(Error::PredicateOverlap(k.to_string()));
        }
        for fact in &self.prob_facts {
            if let ProbLabel::Fixed(p) = fact.prob {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::ProbabilityRange(p));
                }
            }
            check_range_restricted(&fact.atom, &fact.domain_body, || {
                display_prob_fact(fact)
            })?;
        }
        let deterministic = self.deterministic_predicates();
        for fact in &self.prob_facts {
            for lit in &fact.domain_body {
                let key = lit.atom.key();
                if prob.contains(&key) || (derived.contains(&key) && !deterministic.contains(&key))
                {
                    return Err(Error::Semantic(format!(
                        "domain of `{}` refers to non-deterministic predicate {key}",
                        display_prob_fact(fact)
                    )));
                }
            }
        }
        for rule in &self.rules {
            check_range_restricted(&rule.head, &rule.body, || rule.to_string())?;
        }
        for q in &self.queries {
            if !q.is_ground() {
                return Err(Error::Semantic(format!("query {q} is not ground")));
            }
        }
        Ok(())
    }
}

fn check_range_restricted(
    head: &Atom,
    body: &[Literal],
    clause: impl Fn() -> String,
) -> Result<()> {
    let bound: HashSet<&str> = body
        .iter()
        .filter(|l| l.positive)
        .flat_map(|l| l.atom.variables())
        .collect();
    let negative = body.iter().filter(|l| !l.positive).map(|l| &l.atom);
    for atom in std::iter::once(head).chain(negative) {
        if let Some(v) = atom.variables().into_iter().find(|v| !bound.contains(v)) {
            return Err(Error::RangeRestriction {
                variable: v.to_string(),
                clause: clause(),
            });
        }
    }
    Ok(())
}

fn display_prob_fact(f: &ProbabilisticFact) -> String {
    let mut s = String::new();
    write_prob_fact(&mut s, f).expect("writing to a String cannot fail");
    s
}

// ---------------------------------------------------------------------------
// Pretty printing. The output re-parses to a structurally equal value.

fn needs_quotes(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        None => true,
        Some(c) if c.is_ascii_lowercase() => {
            !chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        }
        Some(c) if c.is_ascii_digit() => !name.chars().all(|c| c.is_ascii_digit()),
        Some(_) => true,
    }
}

fn write_name(f: &mut impl fmt::Write, name: &str) -> fmt::Result {
    write_quoted(f, name, needs_quotes(name))
}

/// Predicates and functors are never numbers.
fn write_functor(f: &mut impl fmt::Write, name: &str) -> fmt::Result {
    write_quoted(f, name, !name.starts_with(|c: char| c.is_ascii_lowercase()) || needs_quotes(name))
}

fn write_quoted(f: &mut impl fmt::Write, name: &str, quoted: bool) -> fmt::Result {
    if quoted {
        write!(f, "'{}'", name.replace('\'', "''"))
    } else {
        f.write_str(name)
    }
}

fn write_args(f: &mut impl fmt::Write, args: &[Term]) -> fmt::Result {
    if args.is_empty() {
        return Ok(());
    }
    f.write_char('(')?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_char(',')?;
        }
        write!(f, "{a}")?;
    }
    f.write_char(')')
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write_name(f, c),
            Term::Compound(func, args) => {
                write_functor(f, func)?;
                write_args(f, args)
            }
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_functor(f, &self.predicate)?;
        write_args(f, &self.args)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("\\+")?;
        }
        write!(f, "{}", self.atom)
    }
}

fn write_body(f: &mut impl fmt::Write, body: &[Literal]) -> fmt::Result {
    if body.is_empty() {
        return Ok(());
    }
    f.write_str(" :- ")?;
    for (i, l) in body.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{l}")?;
    }
    Ok(())
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        write_body(f, &self.body)?;
        f.write_str(".")
    }
}

impl fmt::Display for ProbLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbLabel::Fixed(p) => write!(f, "{p}"),
            ProbLabel::Param(_) => f.write_str("t(_)"),
        }
    }
}

fn write_prob_fact(f: &mut impl fmt::Write, fact: &ProbabilisticFact) -> fmt::Result {
    write!(f, "{}::{}", fact.prob, fact.atom)?;
    write_body(f, &fact.domain_body)?;
    f.write_str(".")
}

impl fmt::Display for ProbabilisticFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_prob_fact(f, self)
    }
}

impl fmt::Display for PartialInterpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (a, v) in self.iter() {
            writeln!(f, "evidence({a},{v}).")?;
        }
        Ok(())
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fact in &self.prob_facts {
            writeln!(f, "{fact}")?;
        }
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        for q in &self.queries {
            writeln!(f, "query({q}).")?;
        }
        write!(f, "{}", self.evidence)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> Term {
        Term::Const(s.into())
    }

    #[test]
    fn quoting() {
        assert_eq!(c("john").to_string(), "john");
        assert_eq!(c("42").to_string(), "42");
        assert_eq!(c("John").to_string(), "'John'");
        assert_eq!(c("it's").to_string(), "'it''s'");
        assert_eq!(c("").to_string(), "''");
        let a = Atom::new("edge", vec![c("n1"), Term::Compound("f".into(), vec![c("a")])]);
        assert_eq!(a.to_string(), "edge(n1,f(a))");
        assert_eq!(Atom::prop("9").to_string(), "'9'");
        assert_eq!(Atom::new("p", vec![Term::Compound("1".into(), vec![c("a")])]).to_string(), "p('1'(a))");
    }

    #[test]
    fn groundness() {
        let a = Atom::new("p", vec![Term::Compound("f".into(), vec![Term::Var("X".into())])]);
        assert!(!a.is_ground());
        assert_eq!(a.variables(), vec!["X"]);
        assert!(Atom::prop("q").is_ground());
    }

    #[test]
    fn interpretation_conflicts() {
        let mut i = PartialInterpretation::new();
        i.insert(Atom::prop("a"), true).unwrap();
        i.insert(Atom::prop("a"), true).unwrap();
        assert_eq!(
            i.insert(Atom::prop("a"), false),
            Err(Error::ConflictingEvidence("a".into()))
        );
        assert!(i.insert(Atom::new("p", vec![Term::Var("X".into())]), true).is_err());
    }

    #[test]
    fn deterministic_predicates_exclude_tainted() {
        let x = || Term::Var("X".into());
        let p = Program {
            prob_facts: vec![ProbabilisticFact {
                prob: ProbLabel::Fixed(0.5),
                atom: Atom::new("coin", vec![x()]),
                domain_body: vec![Literal::pos(Atom::new("person", vec![x()]))],
            }],
            rules: vec![
                Rule::fact(Atom::new("person", vec![c("a")])),
                Rule {
                    head: Atom::new("heads", vec![x()]),
                    body: vec![Literal::pos(Atom::new("coin", vec![x()]))],
                },
            ],
            ..Default::default()
        };
        let det = p.deterministic_predicates();
        assert!(det.contains(&PredKey { name: "person".into(), arity: 1 }));
        assert!(!det.contains(&PredKey { name: "heads".into(), arity: 1 }));
        p.validate().unwrap();
    }
}
