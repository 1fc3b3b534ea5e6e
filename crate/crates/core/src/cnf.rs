//! Ground program to weighted CNF.
//!
//! Acyclic atoms get Clark's completion directly. Every strongly connected
//! component of the positive dependency graph that contains a cycle is first
//! unfolded into level-indexed copies: copy `j` of an atom holds iff one of
//! its rules holds with the component's own atoms read at level `j - 1`,
//! level 0 is all false, and the original atom is the copy at level `k`
//! for a component of `k` atoms. The unfolded system is acyclic, so its
//! completion has exactly the least-fixpoint models.

use std::collections::HashMap;
use std::fmt::Write as _;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::ast::{Atom, PartialInterpretation, ProbLabel};
use crate::error::{Error, Result};
use crate::grounder::{AtomId, GroundProgram};
use crate::numfmt::sig12;
use crate::parser::parse_atom;

/// Signed variable index, DIMACS style.
pub type Lit = i32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarRole {
    Probabilistic(ProbLabel),
    Derived,
    Auxiliary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCNF {
    pub num_vars: usize,
    pub clauses: Vec<Vec<Lit>>,
    /// Indexed by `var - 1`.
    pub roles: Vec<VarRole>,
    /// `(weight(+v), weight(-v))`, indexed by `var - 1`.
    pub weights: Vec<(f64, f64)>,
    pub evidence_units: Vec<Lit>,
    /// Display name per variable; auxiliaries start with `#`.
    pub names: Vec<String>,
    /// Source atom per variable, `None` for auxiliaries.
    pub atoms: Vec<Option<Atom>>,
}

impl WeightedCNF {
    pub fn empty() -> Self {
        WeightedCNF {
            num_vars: 0,
            clauses: Vec::new(),
            roles: Vec::new(),
            weights: Vec::new(),
            evidence_units: Vec::new(),
            names: Vec::new(),
            atoms: Vec::new(),
        }
    }

    fn add_var(&mut self, role: VarRole, weights: (f64, f64), name: String, atom: Option<Atom>) -> Lit {
        self.num_vars += 1;
        self.roles.push(role);
        self.weights.push(weights);
        self.names.push(name);
        self.atoms.push(atom);
        self.num_vars as Lit
    }

    pub fn weight(&self, lit: Lit) -> f64 {
        let (pos, neg) = self.weights[lit.unsigned_abs() as usize - 1];
        if lit > 0 {
            pos
        } else {
            neg
        }
    }

    pub fn role(&self, var: usize) -> VarRole {
        self.roles[var - 1]
    }

    pub fn var_of(&self, atom: &Atom) -> Option<usize> {
        self.atoms
            .iter()
            .position(|a| a.as_ref() == Some(atom))
            .map(|i| i + 1)
    }

    /// Re-resolves the weights of learnable probabilistic variables.
    pub fn reweight(&mut self, params: &[f64]) -> Result<()> {
        for (role, w) in self.roles.iter().zip(self.weights.iter_mut()) {
            if let VarRole::Probabilistic(label) = role {
                let p = label.resolve(Some(params))?;
                *w = (p, 1.0 - p);
            }
        }
        Ok(())
    }

    /// Weighted model count by enumeration; for tests on small formulas.
    pub fn brute_force_wmc(&self) -> f64 {
        assert!(self.num_vars <= 24, "brute force over {} vars", self.num_vars);
        let mut total = 0.0;
        let mut value = vec![false; self.num_vars + 1];
        for bits in 0u64..(1u64 << self.num_vars) {
            for (v, slot) in value.iter_mut().enumerate().skip(1) {
                *slot = bits >> (v - 1) & 1 == 1;
            }
            let sat = |l: &Lit| value[l.unsigned_abs() as usize] == (*l > 0);
            if self.clauses.iter().all(|c| c.iter().any(sat)) {
                total += (1..=self.num_vars)
                    .map(|v| self.weight(if value[v] { v as Lit } else { -(v as Lit) }))
                    .product::<f64>();
            }
        }
        total
    }
}

/// Completion of a ground program, with probabilistic weights resolved
/// against `params` (needed only when the program has learnable facts).
pub fn rules_to_formula(g: &GroundProgram, params: Option<&[f64]>) -> Result<WeightedCNF> {
    let n = g.num_atoms();
    let fact_of = g.fact_index();
    let mut f = WeightedCNF::empty();
    for (id, fact) in fact_of.iter().enumerate() {
        let atom = g.atom(id).clone();
        let name = atom.to_string();
        match *fact {
            Some(fi) => {
                let label = g.prob_facts[fi].prob;
                let p = match (label, params) {
                    (ProbLabel::Param(_), None) => 0.5,
                    _ => label.resolve(params)?,
                };
                f.add_var(VarRole::Probabilistic(label), (p, 1.0 - p), name, Some(atom));
            }
            None => {
                f.add_var(VarRole::Derived, (1.0, 1.0), name, Some(atom));
            }
        }
    }

    let mut bodies: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut graph = DiGraph::<AtomId, bool>::with_capacity(n, g.rules.len());
    let nodes: Vec<_> = (0..n).map(|i| graph.add_node(i)).collect();
    for (ri, r) in g.rules.iter().enumerate() {
        if fact_of[r.head].is_some() {
            return Err(Error::Semantic(format!(
                "probabilistic fact {} occurs as a rule head",
                g.atom(r.head)
            )));
        }
        bodies[r.head].push(ri);
        for l in &r.body {
            graph.add_edge(nodes[r.head], nodes[l.atom], l.positive);
        }
    }

    let mut component = vec![usize::MAX; n];
    let sccs = tarjan_scc(&graph);
    for (c, scc) in sccs.iter().enumerate() {
        for &node in scc {
            component[graph[node]] = c;
        }
    }
    let mut cyclic = vec![false; sccs.len()];
    for r in &g.rules {
        for l in &r.body {
            if component[l.atom] == component[r.head] {
                if !l.positive {
                    return Err(Error::NotStratified(g.atom(l.atom).to_string()));
                }
                cyclic[component[r.head]] = true;
            }
        }
    }

    // Atoms of cyclic components, in atom order, with their position inside
    // the component.
    let mut members: Vec<Vec<AtomId>> = vec![Vec::new(); sccs.len()];
    for id in 0..n {
        if cyclic[component[id]] {
            members[component[id]].push(id);
        }
    }
    // level_var[id][j - 1] is the copy of `id` at level j (1..=k); level k is the atom itself.
    let mut level_var: Vec<Vec<Lit>> = vec![Vec::new(); n];
    for comp in members.iter().filter(|m| !m.is_empty()) {
        let k = comp.len();
        for j in 1..k {
            for &id in comp {
                let v = f.add_var(
                    VarRole::Auxiliary,
                    (1.0, 1.0),
                    format!("#{}@{j}", g.atom(id)),
                    None,
                );
                level_var[id].push(v);
            }
        }
        for &id in comp {
            level_var[id].push(id as Lit + 1);
        }
    }

    for head in 0..n {
        if fact_of[head].is_some() {
            continue;
        }
        let levels = if level_var[head].is_empty() { 1 } else { level_var[head].len() };
        for level in 1..=levels {
            let head_lit = if level_var[head].is_empty() {
                head as Lit + 1
            } else {
                level_var[head][level - 1]
            };
            let mut disjuncts: Vec<Vec<Lit>> = Vec::new();
            'rules: for &ri in &bodies[head] {
                let mut conj = Vec::with_capacity(g.rules[ri].body.len());
                for l in &g.rules[ri].body {
                    let lit = if component[l.atom] == component[head] && !level_var[head].is_empty() {
                        if level == 1 {
                            continue 'rules;
                        }
                        level_var[l.atom][level - 2]
                    } else {
                        l.atom as Lit + 1
                    };
                    conj.push(if l.positive { lit } else { -lit });
                }
                disjuncts.push(conj);
            }
            complete(&mut f, head_lit, disjuncts, g.atom(head));
        }
    }
    Ok(f)
}

/// Clausifies `head <-> OR(disjuncts)`. A head with a single rule is tied to
/// that rule's body directly; with several rules each multi-literal body
/// gets its own auxiliary variable.
fn complete(f: &mut WeightedCNF, head: Lit, disjuncts: Vec<Vec<Lit>>, atom: &Atom) {
    if disjuncts.iter().any(Vec::is_empty) {
        f.clauses.push(vec![head]);
        return;
    }
    match disjuncts.len() {
        0 => f.clauses.push(vec![-head]),
        1 => equiv_and(f, head, &disjuncts[0]),
        _ => {
            let mut long = vec![-head];
            for (i, conj) in disjuncts.iter().enumerate() {
                let lit = if conj.len() == 1 {
                    conj[0]
                } else {
                    let aux = f.add_var(
                        VarRole::Auxiliary,
                        (1.0, 1.0),
                        format!("#{atom}/{head}.{i}"),
                        None,
                    );
                    equiv_and(f, aux, conj);
                    aux
                };
                f.clauses.push(vec![head, -lit]);
                long.push(lit);
            }
            f.clauses.push(long);
        }
    }
}

fn equiv_and(f: &mut WeightedCNF, head: Lit, conj: &[Lit]) {
    let mut long = vec![head];
    for &l in conj {
        f.clauses.push(vec![-head, l]);
        long.push(-l);
    }
    f.clauses.push(long);
}

/// Adds one unit clause per evidence literal.
pub fn assert_evidence(f: &WeightedCNF, e: &PartialInterpretation) -> Result<WeightedCNF> {
    let index: HashMap<&Atom, usize> = f
        .atoms
        .iter()
        .enumerate()
        .filter_map(|(i, a)| a.as_ref().map(|a| (a, i + 1)))
        .collect();
    let mut out = f.clone();
    for (atom, value) in e.iter() {
        let var = *index
            .get(atom)
            .ok_or_else(|| Error::UnknownEvidenceAtom(atom.to_string()))? as Lit;
        let lit = if value { var } else { -var };
        out.clauses.push(vec![lit]);
        out.evidence_units.push(lit);
    }
    Ok(out)
}

/// Weighted DIMACS. Besides the `p cnf` header and clauses it carries
/// `c w <lit> <weight>` for both phases of every probabilistic variable,
/// `c a <var> <name>` for every variable, `c t <var> <param>` for learnable
/// facts and `c e <lit>` for the evidence units.
pub fn export_dimacs(f: &WeightedCNF) -> String {
    let mut out = format!("p cnf {} {}\n", f.num_vars, f.clauses.len());
    for v in 1..=f.num_vars {
        let _ = writeln!(out, "c a {v} {}", f.names[v - 1]);
    }
    for v in 1..=f.num_vars {
        if let VarRole::Probabilistic(label) = f.roles[v - 1] {
            let (pos, neg) = f.weights[v - 1];
            let _ = writeln!(out, "c w {v} {pos:?}");
            let _ = writeln!(out, "c w -{v} {neg:?}");
            if let ProbLabel::Param(i) = label {
                let _ = writeln!(out, "c t {v} {i}");
            }
        }
    }
    for l in &f.evidence_units {
        let _ = writeln!(out, "c e {l}");
    }
    for c in &f.clauses {
        for l in c {
            let _ = write!(out, "{l} ");
        }
        out.push_str("0\n");
    }
    out
}

fn dimacs_error(line: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column: 1,
        message: message.into(),
    }
}

/// Reads the format written by [`export_dimacs`]. Plain DIMACS without the
/// comment lines is accepted too; its variables become derived atoms named
/// `v<n>`.
pub fn import_dimacs(text: &str) -> Result<WeightedCNF> {
    let mut header: Option<(usize, usize)> = None;
    let mut names: HashMap<usize, String> = HashMap::new();
    let mut weights: HashMap<Lit, f64> = HashMap::new();
    let mut params: HashMap<usize, usize> = HashMap::new();
    let mut evidence = Vec::new();
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    let var_in_range = |lit: Lit, line: usize, header: Option<(usize, usize)>| -> Result<()> {
        let (nv, _) = header.ok_or_else(|| dimacs_error(line, "missing p cnf header"))?;
        if lit == 0 || lit.unsigned_abs() as usize > nv {
            return Err(dimacs_error(line, format!("literal {lit} out of range")));
        }
        Ok(())
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('c') {
            let mut parts = rest.split_whitespace();
            let tag = parts.next();
            let mut num = |what: &str| -> Result<i64> {
                parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| dimacs_error(line, format!("bad {what}")))
            };
            match tag {
                Some("a") => {
                    let v = num("variable")?;
                    var_in_range(v as Lit, line, header)?;
                    let name = rest.trim_start()[1..].trim_start();
                    let name = name.split_once(char::is_whitespace).map_or("", |x| x.1).trim();
                    if name.is_empty() {
                        return Err(dimacs_error(line, "missing name"));
                    }
                    names.insert(v as usize, name.to_string());
                }
                Some("w") => {
                    let l = num("literal")?;
                    var_in_range(l as Lit, line, header)?;
                    let w: f64 = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| dimacs_error(line, "bad weight"))?;
                    weights.insert(l as Lit, w);
                }
                Some("t") => {
                    let v = num("variable")?;
                    var_in_range(v as Lit, line, header)?;
                    let p = num("parameter")?;
                    if p < 0 {
                        return Err(dimacs_error(line, "bad parameter"));
                    }
                    params.insert(v as usize, p as usize);
                }
                Some("e") => {
                    let l = num("literal")?;
                    var_in_range(l as Lit, line, header)?;
                    evidence.push(l as Lit);
                }
                _ => {}
            }
            continue;
        }
        if let Some(rest) = t.strip_prefix('p') {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if header.is_some() || parts.len() != 3 || parts[0] != "cnf" {
                return Err(dimacs_error(line, "bad header"));
            }
            let nv: usize = parts[1].parse().map_err(|_| dimacs_error(line, "bad variable count"))?;
            let nc: usize = parts[2].parse().map_err(|_| dimacs_error(line, "bad clause count"))?;
            if nv > i32::MAX as usize / 2 {
                return Err(dimacs_error(line, "too many variables"));
            }
            header = Some((nv, nc));
            continue;
        }
        for tok in t.split_whitespace() {
            let l: Lit = tok.parse().map_err(|_| dimacs_error(line, format!("bad literal {tok}")))?;
            if l == 0 {
                clauses.push(std::mem::take(&mut current));
            } else {
                var_in_range(l, line, header)?;
                current.push(l);
            }
        }
    }
    let (nv, nc) = header.ok_or_else(|| dimacs_error(1, "missing p cnf header"))?;
    if !current.is_empty() {
        clauses.push(current);
    }
    if clauses.len() != nc {
        return Err(dimacs_error(1, format!("header declares {nc} clauses, found {}", clauses.len())));
    }
    let mut f = WeightedCNF::empty();
    for v in 1..=nv {
        let name = names.remove(&v).unwrap_or_else(|| format!("v{v}"));
        let vl = v as Lit;
        let (role, w, atom) = match (weights.get(&vl), weights.get(&-vl)) {
            (Some(&pos), Some(&neg)) => {
                let label = match params.get(&v) {
                    Some(&i) => ProbLabel::Param(i),
                    None => ProbLabel::Fixed(pos),
                };
                (VarRole::Probabilistic(label), (pos, neg), parse_atom(&name).ok())
            }
            (None, None) if name.starts_with('#') => (VarRole::Auxiliary, (1.0, 1.0), None),
            (None, None) => (VarRole::Derived, (1.0, 1.0), parse_atom(&name).ok()),
            _ => return Err(dimacs_error(1, format!("variable {v} has only one weighted phase"))),
        };
        if atom.is_none() && role != VarRole::Auxiliary {
            return Err(dimacs_error(1, format!("variable {v} has an unparsable name {name}")));
        }
        f.add_var(role, w, name, atom);
    }
    f.clauses = clauses;
    f.evidence_units = evidence;
    Ok(f)
}

/// Ground Markov logic network: every clause as a hard formula, plus the
/// soft units `ln(p) a` and `ln(1-p) !a` per probabilistic atom. Facts with
/// probability 0 or 1 become hard units.
pub fn export_mln(f: &WeightedCNF) -> String {
    let lit = |l: Lit| {
        let name = &f.names[l.unsigned_abs() as usize - 1];
        if l > 0 {
            name.clone()
        } else {
            format!("!{name}")
        }
    };
    let mut out = String::new();
    for c in &f.clauses {
        let parts: Vec<String> = c.iter().map(|&l| lit(l)).collect();
        let _ = writeln!(out, "{}.", parts.join(" v "));
    }
    for v in 1..=f.num_vars {
        if !matches!(f.roles[v - 1], VarRole::Probabilistic(_)) {
            continue;
        }
        let (pos, neg) = f.weights[v - 1];
        let v = v as Lit;
        if neg == 0.0 {
            let _ = writeln!(out, "{}.", lit(v));
        } else if pos == 0.0 {
            let _ = writeln!(out, "{}.", lit(-v));
        } else {
            let _ = writeln!(out, "{} {}", sig12(pos.ln()), lit(v));
            let _ = writeln!(out, "{} {}", sig12(neg.ln()), lit(-v));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grounder::relevant_ground_program;
    use crate::models;
    use crate::parser::{parse_evidence, parse_program};

    fn alarm_cnf() -> WeightedCNF {
        let p = parse_program(models::ALARM).unwrap();
        let e = parse_evidence("evidence(calls(john),true).").unwrap();
        let g = relevant_ground_program(&p, &[parse_atom("burglary").unwrap()], &e).unwrap();
        rules_to_formula(&g, None).unwrap()
    }

    fn named(f: &WeightedCNF, c: &[Lit]) -> Vec<String> {
        let mut v: Vec<String> = c
            .iter()
            .map(|&l| format!("{}{}", if l < 0 { "-" } else { "" }, f.names[l.unsigned_abs() as usize - 1]))
            .collect();
        v.sort();
        v
    }

    #[test]
    fn alarm_completion() {
        let f = alarm_cnf();
        assert_eq!(f.num_vars, 5);
        let clauses: Vec<Vec<String>> = f.clauses.iter().map(|c| named(&f, c)).collect();
        for want in [
            vec!["-burglary", "alarm"],
            vec!["-earthquake", "alarm"],
            vec!["-alarm", "burglary", "earthquake"],
        ] {
            assert!(clauses.contains(&want.iter().map(|s| s.to_string()).collect()), "{clauses:?}");
        }
        assert!(export_dimacs(&f).starts_with("p cnf 5 "));
    }

    #[test]
    fn evidence_units() {
        let p = parse_program(models::ALARM).unwrap();
        let e = parse_evidence("evidence(alarm,false).").unwrap();
        let g = relevant_ground_program(&p, &[], &e).unwrap();
        let f = assert_evidence(&rules_to_formula(&g, None).unwrap(), &e).unwrap();
        assert_eq!(f.evidence_units.len(), 1);
        assert!((f.brute_force_wmc() - 0.72).abs() < 1e-12);
        let unchanged = assert_evidence(&f, &PartialInterpretation::new()).unwrap();
        assert_eq!(unchanged, f);
    }

    #[test]
    fn single_fact() {
        let g = relevant_ground_program(
            &parse_program("0.5::a.").unwrap(),
            &[parse_atom("a").unwrap()],
            &PartialInterpretation::new(),
        )
        .unwrap();
        let f = rules_to_formula(&g, None).unwrap();
        assert!(f.clauses.is_empty());
        assert_eq!(f.weight(1), 0.5);
        assert_eq!(export_mln(&f).lines().count(), 2);
        assert!(export_mln(&f).lines().all(|l| l.starts_with("-0.693147180560 ")));
    }

    #[test]
    fn dimacs_round_trip() {
        let e = parse_evidence("evidence(calls(john),true).").unwrap();
        let f = assert_evidence(&alarm_cnf(), &e).unwrap();
        assert_eq!(import_dimacs(&export_dimacs(&f)).unwrap(), f);
        assert_eq!(export_dimacs(&WeightedCNF::empty()), "p cnf 0 0\n");
        assert_eq!(import_dimacs("p cnf 0 0\n").unwrap(), WeightedCNF::empty());
    }

    #[test]
    fn smokers_loop_is_unfolded() {
        let p = parse_program(
            "0.2::stress(P) :- person(P).\n0.3::influences(P1,P2) :- friend(P1,P2).\n\
             person(p1). person(p2). friend(p1,p2). friend(p2,p1).\n\
             smokes(X) :- stress(X).\nsmokes(X) :- smokes(Y), influences(Y,X).",
        )
        .unwrap();
        let q = [parse_atom("smokes(p1)").unwrap(), parse_atom("smokes(p2)").unwrap()];
        let g = relevant_ground_program(&p, &q, &PartialInterpretation::new()).unwrap();
        let f = rules_to_formula(&g, None).unwrap();
        assert!(f.roles.contains(&VarRole::Auxiliary));
        // both smokers false when nobody is stressed, whatever the influences
        let e: PartialInterpretation = [
            ("stress(p1)", false),
            ("stress(p2)", false),
            ("influences(p1,p2)", true),
            ("influences(p2,p1)", true),
            ("smokes(p1)", true),
        ]
        .iter()
        .map(|&(a, v)| (parse_atom(a).unwrap(), v))
        .collect();
        let f = assert_evidence(&f, &e).unwrap();
        assert_eq!(f.brute_force_wmc(), 0.0);
    }

    #[test]
    fn loop_through_negation_rejected() {
        let p = parse_program("0.5::a.\np :- a, \\+q.\nq :- \\+p.").unwrap();
        let g = relevant_ground_program(&p, &[parse_atom("p").unwrap()], &PartialInterpretation::new()).unwrap();
        assert!(matches!(rules_to_formula(&g, None), Err(Error::NotStratified(_))));
    }

    #[test]
    fn dimacs_rejects_garbage() {
        assert!(import_dimacs("1 2 0").is_err());
        assert!(import_dimacs("p cnf 1 1\n2 0\n").is_err());
        assert!(import_dimacs("p cnf 1 2\n1 0\n").is_err());
        assert!(import_dimacs("p cnf 2 1\nc w 1 0.5\n1 0\n").is_err());
    }
}
