//! CNF to d-DNNF by exhaustive DPLL search with unit propagation,
//! connected-component decomposition and caching of residual formulas.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::cnf::{Lit, WeightedCNF};
use crate::error::{Error, Result};

pub type NodeId = usize;

/// Default cap on cached residual formulas.
pub const DEFAULT_CACHE_CAP: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NnfNode {
    Lit(Lit),
    And(Vec<NodeId>),
    /// `decision` is the variable the children disagree on, 0 if unknown.
    Or { decision: u32, children: Vec<NodeId> },
}

/// A rooted NNF DAG. Children always have smaller ids than their parents.
/// `And([])` is true and `Or` without children is false.
#[derive(Debug, Clone, PartialEq)]
pub struct DdnnfGraph {
    pub nodes: Vec<NnfNode>,
    pub root: NodeId,
    pub num_vars: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompileStats {
    pub cache_hits: usize,
    pub cache_misses: usize,
    pub decisions: usize,
}

#[derive(Default)]
struct Builder {
    nodes: Vec<NnfNode>,
    index: HashMap<NnfNode, NodeId>,
}

impl Builder {
    fn add(&mut self, node: NnfNode) -> NodeId {
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(node.clone());
        self.index.insert(node, id);
        id
    }

    fn is_false(&self, id: NodeId) -> bool {
        matches!(&self.nodes[id], NnfNode::Or { children, .. } if children.is_empty())
    }

    fn is_true(&self, id: NodeId) -> bool {
        matches!(&self.nodes[id], NnfNode::And(children) if children.is_empty())
    }

    fn false_node(&mut self) -> NodeId {
        self.add(NnfNode::Or {
            decision: 0,
            children: Vec::new(),
        })
    }

    fn lit(&mut self, l: Lit) -> NodeId {
        self.add(NnfNode::Lit(l))
    }

    fn and(&mut self, children: Vec<NodeId>) -> NodeId {
        if children.iter().any(|&c| self.is_false(c)) {
            return self.false_node();
        }
        let mut kids: Vec<NodeId> = children.into_iter().filter(|&c| !self.is_true(c)).collect();
        if kids.len() == 1 {
            return kids[0];
        }
        kids.sort_unstable();
        self.add(NnfNode::And(kids))
    }

    fn or(&mut self, decision: u32, children: Vec<NodeId>) -> NodeId {
        let kids: Vec<NodeId> = children.into_iter().filter(|&c| !self.is_false(c)).collect();
        if kids.len() == 1 {
            return kids[0];
        }
        self.add(NnfNode::Or {
            decision,
            children: kids,
        })
    }

    fn finish(self, root: NodeId, num_vars: usize) -> DdnnfGraph {
        DdnnfGraph {
            nodes: self.nodes,
            root,
            num_vars,
        }
        .compact()
    }
}

type Clauses = Vec<Vec<Lit>>;

/// Sets `lit` true. `None` if a clause becomes empty.
fn condition(clauses: &[Vec<Lit>], lit: Lit) -> Option<Clauses> {
    let mut out = Vec::with_capacity(clauses.len());
    for c in clauses {
        if c.contains(&lit) {
            continue;
        }
        let reduced: Vec<Lit> = c.iter().copied().filter(|&l| l != -lit).collect();
        if reduced.is_empty() {
            return None;
        }
        out.push(reduced);
    }
    Some(out)
}

/// Exhaustive compiler; keeps its cache and statistics across calls only
/// for the duration of one [`Compiler::compile`].
pub struct Compiler {
    cache_cap: usize,
    stats: CompileStats,
}

impl Default for Compiler {
    fn default() -> Self {
        Compiler::new(DEFAULT_CACHE_CAP)
    }
}

struct Run<'a> {
    builder: Builder,
    cache: HashMap<Clauses, NodeId>,
    cache_cap: usize,
    stats: &'a mut CompileStats,
}

impl Compiler {
    pub fn new(cache_cap: usize) -> Self {
        Compiler {
            cache_cap,
            stats: CompileStats::default(),
        }
    }

    pub fn stats(&self) -> CompileStats {
        self.stats
    }

    pub fn compile(&mut self, f: &WeightedCNF) -> Result<DdnnfGraph> {
        self.stats = CompileStats::default();
        let mut run = Run {
            builder: Builder::default(),
            cache: HashMap::new(),
            cache_cap: self.cache_cap,
            stats: &mut self.stats,
        };
        let mut clauses: Clauses = Vec::with_capacity(f.clauses.len());
        for c in &f.clauses {
            let mut c = c.clone();
            c.sort_unstable();
            c.dedup();
            if c.iter().any(|&l| c.contains(&-l)) {
                continue;
            }
            clauses.push(c);
        }
        let root = if clauses.iter().any(Vec::is_empty) {
            run.builder.false_node()
        } else {
            run.formula(clauses)?
        };
        let Run { builder, .. } = run;
        Ok(builder.finish(root, f.num_vars))
    }
}

impl Run<'_> {
    fn formula(&mut self, mut clauses: Clauses) -> Result<NodeId> {
        let mut implied = Vec::new();
        while let Some(unit) = clauses.iter().find(|c| c.len() == 1).map(|c| c[0]) {
            implied.push(self.builder.lit(unit));
            match condition(&clauses, unit) {
                Some(next) => clauses = next,
                None => return Ok(self.builder.false_node()),
            }
        }
        if !clauses.is_empty() {
            for component in components(clauses) {
                let node = self.component(component)?;
                if self.builder.is_false(node) {
                    return Ok(node);
                }
                implied.push(node);
            }
        }
        Ok(self.builder.and(implied))
    }

    fn component(&mut self, mut clauses: Clauses) -> Result<NodeId> {
        for c in clauses.iter_mut() {
            c.sort_unstable();
        }
        clauses.sort_unstable();
        if let Some(&hit) = self.cache.get(&clauses) {
            self.stats.cache_hits += 1;
            return Ok(hit);
        }
        self.stats.cache_misses += 1;
        self.stats.decisions += 1;
        let var = decision_var(&clauses);
        let mut branches = Vec::with_capacity(2);
        for lit in [var as Lit, -(var as Lit)] {
            if let Some(rest) = condition(&clauses, lit) {
                let sub = self.formula(rest)?;
                let l = self.builder.lit(lit);
                branches.push(self.builder.and(vec![l, sub]));
            }
        }
        let node = self.builder.or(var, branches);
        if self.cache.len() >= self.cache_cap {
            return Err(Error::ResourceLimit(format!(
                "compiler cache exceeded {} entries",
                self.cache_cap
            )));
        }
        self.cache.insert(clauses, node);
        Ok(node)
    }
}

/// Most frequent variable, ties to the smallest id.
fn decision_var(clauses: &[Vec<Lit>]) -> u32 {
    let mut count: HashMap<u32, usize> = HashMap::new();
    for c in clauses {
        for l in c {
            *count.entry(l.unsigned_abs()).or_default() += 1;
        }
    }
    count
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(v, _)| v)
        .expect("non-empty clause set")
}

/// Splits clauses into groups sharing no variable, ordered by smallest variable.
fn components(clauses: Clauses) -> Vec<Clauses> {
    let mut parent: HashMap<u32, u32> = HashMap::new();
    fn find(parent: &mut HashMap<u32, u32>, x: u32) -> u32 {
        let p = *parent.entry(x).or_insert(x);
        if p == x {
            return x;
        }
        let r = find(parent, p);
        parent.insert(x, r);
        r
    }
    for c in &clauses {
        for l in &c[1..] {
            let a = find(&mut parent, c[0].unsigned_abs());
            let b = find(&mut parent, l.unsigned_abs());
            if a != b {
                parent.insert(a.max(b), a.min(b));
            }
        }
    }
    let mut groups: Vec<(u32, Clauses)> = Vec::new();
    let mut slot: HashMap<u32, usize> = HashMap::new();
    for c in clauses {
        let root = find(&mut parent, c[0].unsigned_abs());
        let i = *slot.entry(root).or_insert_with(|| {
            groups.push((root, Vec::new()));
            groups.len() - 1
        });
        groups[i].1.push(c);
    }
    groups.sort_by_key(|g| g.0);
    groups.into_iter().map(|g| g.1).collect()
}

pub fn compile(f: &WeightedCNF) -> Result<DdnnfGraph> {
    Compiler::default().compile(f)
}

impl DdnnfGraph {
    pub fn is_false(&self) -> bool {
        matches!(&self.nodes[self.root], NnfNode::Or { children, .. } if children.is_empty())
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        match &self.nodes[id] {
            NnfNode::Lit(_) => &[],
            NnfNode::And(c) => c,
            NnfNode::Or { children, .. } => children,
        }
    }

    pub fn num_edges(&self) -> usize {
        (0..self.nodes.len()).map(|i| self.children(i).len()).sum()
    }

    /// Keeps only nodes reachable from the root, renumbered in order.
    pub fn compact(self) -> DdnnfGraph {
        let mut reachable = vec![false; self.nodes.len()];
        reachable[self.root] = true;
        for id in (0..self.nodes.len()).rev() {
            if reachable[id] {
                for &c in self.children(id) {
                    reachable[c] = true;
                }
            }
        }
        let mut new_id = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (id, node) in self.nodes.into_iter().enumerate() {
            if !reachable[id] {
                continue;
            }
            new_id[id] = nodes.len();
            nodes.push(match node {
                NnfNode::Lit(l) => NnfNode::Lit(l),
                NnfNode::And(c) => NnfNode::And(c.iter().map(|&x| new_id[x]).collect()),
                NnfNode::Or { decision, children } => NnfNode::Or {
                    decision,
                    children: children.iter().map(|&x| new_id[x]).collect(),
                },
            });
        }
        DdnnfGraph {
            root: new_id[self.root],
            nodes,
            num_vars: self.num_vars,
        }
    }

    /// Sorted variable set mentioned below each node.
    pub fn var_sets(&self) -> Vec<Vec<u32>> {
        let mut sets: Vec<Vec<u32>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let set = match node {
                NnfNode::Lit(l) => vec![l.unsigned_abs()],
                NnfNode::And(c) | NnfNode::Or { children: c, .. } => {
                    let mut s: Vec<u32> = c.iter().flat_map(|&x| sets[x].iter().copied()).collect();
                    s.sort_unstable();
                    s.dedup();
                    s
                }
            };
            sets.push(set);
        }
        sets
    }

    /// Truth value under a total assignment indexed by variable.
    pub fn satisfied_by(&self, value: &[bool]) -> bool {
        let mut v = vec![false; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            v[i] = match node {
                NnfNode::Lit(l) => value[l.unsigned_abs() as usize] == (*l > 0),
                NnfNode::And(c) => c.iter().all(|&x| v[x]),
                NnfNode::Or { children, .. } => children.iter().any(|&x| v[x]),
            };
        }
        v[self.root]
    }

    /// Weighted count treating every Or as a sum and every And as a product.
    /// Equals the weighted model count only on smooth graphs.
    pub fn weighted_count(&self, weight: impl Fn(Lit) -> f64) -> f64 {
        let mut v = vec![0.0; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            v[i] = match node {
                NnfNode::Lit(l) => weight(*l),
                NnfNode::And(c) => c.iter().map(|&x| v[x]).product(),
                NnfNode::Or { children, .. } => children.iter().map(|&x| v[x]).sum(),
            };
        }
        v[self.root]
    }

    pub fn is_decomposable(&self) -> bool {
        let sets = self.var_sets();
        self.nodes.iter().all(|node| match node {
            NnfNode::And(c) => {
                let total: usize = c.iter().map(|&x| sets[x].len()).sum();
                let mut all: Vec<u32> = c.iter().flat_map(|&x| sets[x].iter().copied()).collect();
                all.sort_unstable();
                all.dedup();
                all.len() == total
            }
            _ => true,
        })
    }

    /// Every Or node's children fix its decision variable to distinct values.
    pub fn is_deterministic(&self) -> bool {
        let fixes = |id: NodeId, lit: Lit| self.fixes(id, lit);
        self.nodes.iter().all(|node| match node {
            NnfNode::Or { decision, children } if children.len() > 1 => {
                let d = *decision as Lit;
                d != 0
                    && children.len() == 2
                    && ((fixes(children[0], d) && fixes(children[1], -d))
                        || (fixes(children[0], -d) && fixes(children[1], d)))
            }
            _ => true,
        })
    }

    fn fixes(&self, id: NodeId, lit: Lit) -> bool {
        match &self.nodes[id] {
            NnfNode::Lit(l) => *l == lit,
            NnfNode::And(c) => {
                c.iter().any(|&x| self.nodes[x] == NnfNode::Lit(lit))
                    || c.iter().any(|&x| self.fixes(x, lit))
            }
            NnfNode::Or { children, .. } => {
                !children.is_empty() && children.iter().all(|&x| self.fixes(x, lit))
            }
        }
    }

    pub fn is_smooth(&self) -> bool {
        let sets = self.var_sets();
        self.nodes.iter().all(|node| match node {
            NnfNode::Or { children, .. } => children.windows(2).all(|w| sets[w[0]] == sets[w[1]]),
            _ => true,
        })
    }

    fn check_invariants(&self) {
        debug_assert!(self
            .nodes
            .iter()
            .enumerate()
            .all(|(i, _)| self.children(i).iter().all(|&c| c < i)));
        debug_assert!(self.is_decomposable(), "And node with shared variables");
        debug_assert!(self.is_deterministic(), "Or node without a distinguishing decision");
    }
}

/// Makes every Or node's children mention the same variables by conjoining
/// `(v ∨ ¬v)` gadgets, and pads the root to mention `1..=all_vars`.
pub fn smooth(g: &DdnnfGraph, all_vars: usize) -> DdnnfGraph {
    g.check_invariants();
    let sets = g.var_sets();
    let mut b = Builder::default();
    let mut map = vec![0; g.nodes.len()];
    let gadget = |b: &mut Builder, v: u32| {
        let pos = b.lit(v as Lit);
        let neg = b.lit(-(v as Lit));
        b.add(NnfNode::Or {
            decision: v,
            children: vec![pos, neg],
        })
    };
    for (id, node) in g.nodes.iter().enumerate() {
        map[id] = match node {
            NnfNode::Lit(l) => b.lit(*l),
            NnfNode::And(c) => b.and(c.iter().map(|&x| map[x]).collect()),
            NnfNode::Or { decision, children } => {
                let mut union: Vec<u32> = children.iter().flat_map(|&x| sets[x].iter().copied()).collect();
                union.sort_unstable();
                union.dedup();
                let kids = children
                    .iter()
                    .map(|&x| {
                        let missing: Vec<u32> =
                            union.iter().copied().filter(|v| sets[x].binary_search(v).is_err()).collect();
                        if missing.is_empty() {
                            map[x]
                        } else {
                            let mut parts = vec![map[x]];
                            parts.extend(missing.into_iter().map(|v| gadget(&mut b, v)));
                            b.and(parts)
                        }
                    })
                    .collect();
                b.add(NnfNode::Or {
                    decision: *decision,
                    children: kids,
                })
            }
        };
    }
    let mut root = map[g.root];
    if !g.is_false() {
        let missing: Vec<u32> = (1..=all_vars as u32)
            .filter(|v| sets[g.root].binary_search(v).is_err())
            .collect();
        if !missing.is_empty() {
            let mut parts = vec![root];
            parts.extend(missing.into_iter().map(|v| gadget(&mut b, v)));
            root = b.and(parts);
        }
    }
    let out = b.finish(root, g.num_vars.max(all_vars));
    debug_assert!(out.is_smooth());
    out
}

/// c2d-style NNF text: `nnf <nodes> <edges> <vars>` then one line per node.
pub fn export_nnf(g: &DdnnfGraph) -> String {
    let g = g.clone().compact();
    let mut out = format!("nnf {} {} {}\n", g.nodes.len(), g.num_edges(), g.num_vars);
    for node in &g.nodes {
        let ids = |c: &[NodeId]| c.iter().map(|x| format!(" {x}")).collect::<String>();
        let _ = match node {
            NnfNode::Lit(l) => writeln!(out, "L {l}"),
            NnfNode::And(c) => writeln!(out, "A {}{}", c.len(), ids(c)),
            NnfNode::Or { decision, children } => {
                writeln!(out, "O {decision} {}{}", children.len(), ids(children))
            }
        };
    }
    out
}

fn nnf_error(line: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column: 1,
        message: message.into(),
    }
}

/// Parses [`export_nnf`] output. The last node is the root.
pub fn import_nnf(text: &str) -> Result<DdnnfGraph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('c'));
    let (hl, header) = lines.next().ok_or_else(|| nnf_error(1, "missing nnf header"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let num = |s: &str, line: usize| -> Result<usize> {
        s.parse().map_err(|_| nnf_error(line, format!("bad number {s}")))
    };
    if h.len() != 4 || h[0] != "nnf" {
        return Err(nnf_error(hl, "bad nnf header"));
    }
    let (n, e, v) = (num(h[1], hl)?, num(h[2], hl)?, num(h[3], hl)?);
    if v > i32::MAX as usize / 2 {
        return Err(nnf_error(hl, "too many variables"));
    }
    let mut nodes = Vec::with_capacity(n.min(1 << 20));
    let mut edges = 0;
    for (line, text) in lines {
        let t: Vec<&str> = text.split_whitespace().collect();
        let children = |k: usize, start: usize| -> Result<Vec<NodeId>> {
            if t.len() != start + k {
                return Err(nnf_error(line, "child count mismatch"));
            }
            t[start..]
                .iter()
                .map(|s| {
                    let c = num(s, line)?;
                    if c >= nodes.len() {
                        return Err(nnf_error(line, format!("child {c} is not an earlier node")));
                    }
                    Ok(c)
                })
                .collect()
        };
        let node = match t[0] {
            "L" if t.len() == 2 => {
                let l: Lit = t[1].parse().map_err(|_| nnf_error(line, "bad literal"))?;
                if l == 0 || l.unsigned_abs() as usize > v {
                    return Err(nnf_error(line, format!("literal {l} out of range")));
                }
                NnfNode::Lit(l)
            }
            "A" if t.len() >= 2 => NnfNode::And(children(num(t[1], line)?, 2)?),
            "O" if t.len() >= 3 => {
                let decision = num(t[1], line)?;
                if decision > v {
                    return Err(nnf_error(line, "decision variable out of range"));
                }
                NnfNode::Or {
                    decision: decision as u32,
                    children: children(num(t[2], line)?, 3)?,
                }
            }
            _ => return Err(nnf_error(line, format!("bad node line `{text}`"))),
        };
        edges += match &node {
            NnfNode::Lit(_) => 0,
            NnfNode::And(c) | NnfNode::Or { children: c, .. } => c.len(),
        };
        nodes.push(node);
        if nodes.len() > n {
            return Err(nnf_error(line, "more nodes than declared"));
        }
    }
    if nodes.len() != n || n == 0 {
        return Err(nnf_error(hl, format!("header declares {n} nodes, found {}", nodes.len())));
    }
    if edges != e {
        return Err(nnf_error(hl, format!("header declares {e} edges, found {edges}")));
    }
    Ok(DdnnfGraph {
        root: nodes.len() - 1,
        nodes,
        num_vars: v,
    })
}
