//! Shared generators and brute-force references for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use plp::ast::{Atom, PartialInterpretation, Program};
use plp::grounder::{full_grounding, GroundProgram};
use plp::oracle;
use plp::parser::{parse_atom, parse_program};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn atom(s: &str) -> Atom {
    parse_atom(s).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// A random program together with queries and evidence over its base.
#[derive(Debug, Clone)]
pub struct Case {
    pub seed: u64,
    pub text: String,
    pub program: Program,
    pub queries: Vec<Atom>,
    pub evidence: PartialInterpretation,
}

fn prob(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..20) {
        0 => "0.0".into(),
        1 => "1.0".into(),
        _ => format!("{:.2}", rng.gen_range(0.05..0.95)),
    }
}

/// Strata of derived atoms over propositional facts. Positive literals may
/// point at the same stratum (so positive loops occur), negative literals
/// only at lower strata or facts.
fn propositional(rng: &mut ChaCha8Rng) -> String {
    let k = rng.gen_range(1..=7);
    let mut out = String::new();
    for i in 0..k {
        out += &format!("{}::f{i}.\n", prob(rng));
    }
    let levels = rng.gen_range(1..=3);
    let mut names: Vec<Vec<String>> = Vec::new();
    for level in 0..levels {
        let n = rng.gen_range(1..=3);
        names.push((0..n).map(|j| format!("d{level}_{j}")).collect());
    }
    for level in 0..levels {
        for head in names[level].clone() {
            for _ in 0..rng.gen_range(1..=3) {
                let mut body = Vec::new();
                for _ in 0..rng.gen_range(1..=3) {
                    let choice = rng.gen_range(0..10);
                    let lit = if choice < 4 || (level == 0 && choice < 8) {
                        let f = format!("f{}", rng.gen_range(0..k));
                        if rng.gen_bool(0.25) {
                            format!("\\+{f}")
                        } else {
                            f
                        }
                    } else if choice < 7 && level > 0 {
                        let lower = rng.gen_range(0..level);
                        let d = names[lower].choose(rng).unwrap().clone();
                        if rng.gen_bool(0.4) {
                            format!("\\+{d}")
                        } else {
                            d
                        }
                    } else {
                        names[level].choose(rng).unwrap().clone()
                    };
                    body.push(lit);
                }
                out += &format!("{head} :- {}.\n", body.join(", "));
            }
        }
    }
    out
}

/// Smokers over 2 or 3 persons with a random friendship relation and a
/// stratified negation on top of the recursive rule.
fn smokers(rng: &mut ChaCha8Rng) -> String {
    let persons: Vec<String> = (1..=rng.gen_range(2..=3)).map(|i| format!("p{i}")).collect();
    let mut out = format!(
        "{}::stress(P) :- person(P).\n{}::influences(A,B) :- friend(A,B).\n",
        prob(rng),
        prob(rng)
    );
    for p in &persons {
        out += &format!("person({p}).\n");
    }
    let mut friends = 0;
    for a in &persons {
        for b in &persons {
            if a != b && rng.gen_bool(0.6) {
                out += &format!("friend({a},{b}).\n");
                friends += 1;
            }
        }
    }
    if persons.len() + friends + persons.len() <= 12 && rng.gen_bool(0.5) {
        out += &format!("{}::cancer_smoke(P) :- person(P).\n", prob(rng));
        out += "cancer(P) :- smokes(P), cancer_smoke(P).\n";
    }
    out += "smokes(X) :- stress(X).\nsmokes(X) :- smokes(Y), influences(Y,X).\n";
    if rng.gen_bool(0.5) {
        out += "calm(X) :- person(X), \\+smokes(X).\n";
    }
    out
}

/// Probabilistic graph over up to four nodes (cycles allowed) with the
/// transitive path relation and its negation.
fn graph(rng: &mut ChaCha8Rng) -> String {
    let nodes = ["a", "b", "c", "d"];
    let n = rng.gen_range(2..=4);
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    pairs.shuffle(rng);
    let mut out = String::new();
    for &(i, j) in pairs.iter().take(rng.gen_range(1..=8)) {
        out += &format!("{}::edge({},{}).\n", prob(rng), nodes[i], nodes[j]);
    }
    for node in &nodes[..n] {
        out += &format!("node({node}).\n");
    }
    out += "path(X,Y) :- edge(X,Y).\npath(X,Y) :- edge(X,Z), path(Z,Y).\n";
    if rng.gen_bool(0.5) {
        out += "cut(X,Y) :- node(X), node(Y), \\+path(X,Y).\n";
    }
    out
}

pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let text = match seed % 3 {
        0 => propositional(&mut rng),
        1 => smokers(&mut rng),
        _ => graph(&mut rng),
    };
    let program = parse_program(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    let g = full_grounding(&program).unwrap();
    let deterministic = program.deterministic_predicates();
    let candidates: Vec<Atom> = g
        .atoms()
        .iter()
        .filter(|a| !deterministic.contains(&a.key()))
        .cloned()
        .collect();
    let nq = rng.gen_range(1..=3).min(candidates.len());
    let queries: Vec<Atom> = candidates.choose_multiple(&mut rng, nq).cloned().collect();
    // evidence values from a random world, occasionally flipped
    let rows = oracle::enumerate(&g).unwrap();
    let row = &rows[rng.gen_range(0..rows.len())];
    let ne = rng.gen_range(0..=3).min(candidates.len());
    let observed: Vec<Atom> = candidates.choose_multiple(&mut rng, ne).cloned().collect();
    let evidence: PartialInterpretation = observed
        .into_iter()
        .map(|a| {
            let value = row.world[g.id_of(&a).unwrap()];
            let flip = rng.gen_bool(0.1);
            (a, value != flip)
        })
        .collect();
    Case {
        seed,
        text,
        program,
        queries,
        evidence,
    }
}

/// Random program without rules over 2..=10 ground facts, some coming from
/// one intensional statement; `truth` and `other` give the probabilities.
pub fn kl_pair(seed: u64) -> (Program, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plain = rng.gen_range(1..=5);
    let domain = rng.gen_range(1..=5);
    let mut text = String::new();
    for i in 0..plain {
        text += &format!("t(_)::f{i}.\n");
    }
    text += "t(_)::g(X) :- dom(X).\n";
    for d in 0..domain {
        text += &format!("dom(x{d}).\n");
    }
    let p = parse_program(&text).unwrap();
    let n = p.num_params();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n)
            .map(|_| match rng.gen_range(0..10) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.gen_range(0.01..0.99),
            })
            .collect()
    };
    let truth = draw(&mut rng);
    let mut other: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
    for (o, t) in other.iter_mut().zip(&truth) {
        if rng.gen_bool(0.2) {
            *o = *t;
        }
    }
    (p, truth, other)
}

/// Partition function of a ground MLN in the text form written by the
/// exporter: hard clauses `l1 v l2 v ... .`, soft units `<w> <lit>`.
pub fn mln_partition_function(text: &str) -> f64 {
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut id = |name: &str, names: &mut Vec<String>| -> usize {
        *index.entry(name.to_string()).or_insert_with(|| {
            names.push(name.to_string());
            names.len() - 1
        })
    };
    let parse_lit = |s: &str| match s.strip_prefix('!') {
        Some(rest) => (rest.to_string(), false),
        None => (s.to_string(), true),
    };
    let mut hard: Vec<Vec<(usize, bool)>> = Vec::new();
    let mut soft: Vec<(f64, usize, bool)> = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(body) = line.strip_suffix('.') {
            let clause = body
                .split(" v ")
                .map(|l| {
                    let (n, s) = parse_lit(l.trim());
                    (id(&n, &mut names), s)
                })
                .collect();
            hard.push(clause);
        } else {
            let (w, l) = line.split_once(' ').unwrap();
            let (n, s) = parse_lit(l.trim());
            soft.push((w.parse().unwrap(), id(&n, &mut names), s));
        }
    }
    let n = names.len();
    assert!(n <= 24, "{n} ground atoms");
    let mut z = 0.0;
    for bits in 0u64..(1 << n) {
        let value = |i: usize| bits >> i & 1 == 1;
        if hard.iter().all(|c| c.iter().any(|&(a, s)| value(a) == s)) {
            let w: f64 = soft.iter().filter(|&&(_, a, s)| value(a) == s).map(|t| t.0).sum();
            z += w.exp();
        }
    }
    z
}

/// Atoms of `p` whose predicate is neither deterministic nor a fact domain.
pub fn non_deterministic_atoms(p: &Program) -> BTreeSet<Atom> {
    let det = p.deterministic_predicates();
    full_grounding(p)
        .unwrap()
        .atoms()
        .iter()
        .filter(|a| !det.contains(&a.key()))
        .cloned()
        .collect()
}

/// True if some atom depends positively on itself in the ground program.
pub fn has_positive_loop(g: &GroundProgram) -> bool {
    let n = g.num_atoms();
    let mut succ = vec![Vec::new(); n];
    for r in &g.rules {
        for l in r.body.iter().filter(|l| l.positive) {
            succ[r.head].push(l.atom);
        }
    }
    // 0 unvisited, 1 on stack, 2 done
    fn visit(a: usize, succ: &[Vec<usize>], state: &mut [u8]) -> bool {
        state[a] = 1;
        for &b in &succ[a] {
            if state[b] == 1 || (state[b] == 0 && visit(b, succ, state)) {
                return true;
            }
        }
        state[a] = 2;
        false
    }
    let mut state = vec![0u8; n];
    (0..n).any(|a| state[a] == 0 && visit(a, &succ, &mut state))
}
