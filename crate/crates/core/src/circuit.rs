//! Arithmetic circuits over indicator and weight leaves: evaluation,
//! all marginals by one upward and one downward pass, and MPE by a max pass
//! followed by a trace.

use crate::cnf::{Lit, WeightedCNF};
use crate::compiler::{DdnnfGraph, NnfNode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum AcNode {
    Sum(Vec<usize>),
    Product(Vec<usize>),
    Weight { lit: Lit, w: f64 },
    Indicator(Lit),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArithmeticCircuit {
    pub nodes: Vec<AcNode>,
    pub root: usize,
    pub num_vars: usize,
    /// Indicator node per literal: `[var][0]` for `+var`, `[var][1]` for `-var`.
    indicator: Vec<[Option<usize>; 2]>,
}

/// λ values per literal, all 1 by default.
#[derive(Debug, Clone, PartialEq)]
pub struct Indicators {
    values: Vec<[f64; 2]>,
}

impl Indicators {
    pub fn ones(num_vars: usize) -> Self {
        Indicators {
            values: vec![[1.0, 1.0]; num_vars + 1],
        }
    }

    pub fn get(&self, lit: Lit) -> f64 {
        self.values[lit.unsigned_abs() as usize][usize::from(lit < 0)]
    }

    pub fn set(&mut self, lit: Lit, value: f64) {
        self.values[lit.unsigned_abs() as usize][usize::from(lit < 0)] = value;
    }

    /// Conditions on `var = value`: λ of the opposite literal becomes 0.
    pub fn observe(&mut self, var: usize, value: bool) {
        let v = var as Lit;
        self.set(if value { v } else { -v }, 1.0);
        self.set(if value { -v } else { v }, 0.0);
    }
}

fn slot(lit: Lit) -> usize {
    usize::from(lit < 0)
}

/// Replaces Or by sum, And by product and every literal `l` by
/// `λ[l] · w(l)`.
pub fn to_arithmetic_circuit(g: &DdnnfGraph, f: &WeightedCNF) -> Result<ArithmeticCircuit> {
    let num_vars = g.num_vars.max(f.num_vars);
    let mut nodes = Vec::with_capacity(g.nodes.len() * 2);
    let mut indicator = vec![[None, None]; num_vars + 1];
    let mut map = Vec::with_capacity(g.nodes.len());
    for node in &g.nodes {
        let id = match node {
            NnfNode::Lit(l) => {
                let var = l.unsigned_abs() as usize;
                if var > f.num_vars {
                    return Err(Error::Semantic(format!("no weight for literal {l}")));
                }
                nodes.push(AcNode::Indicator(*l));
                let ind = nodes.len() - 1;
                indicator[var][slot(*l)] = Some(ind);
                nodes.push(AcNode::Weight { lit: *l, w: f.weight(*l) });
                nodes.push(AcNode::Product(vec![ind, ind + 1]));
                nodes.len() - 1
            }
            NnfNode::And(c) => {
                nodes.push(AcNode::Product(c.iter().map(|&x| map[x]).collect()));
                nodes.len() - 1
            }
            NnfNode::Or { children, .. } => {
                nodes.push(AcNode::Sum(children.iter().map(|&x| map[x]).collect()));
                nodes.len() - 1
            }
        };
        map.push(id);
    }
    Ok(ArithmeticCircuit {
        root: map[g.root],
        nodes,
        num_vars,
        indicator,
    })
}

/// Per-literal `P(l ∧ e)` together with the circuit value `P(e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub value: f64,
    pos: Vec<Option<f64>>,
    neg: Vec<Option<f64>>,
}

impl Marginals {
    /// `None` if the literal has no indicator in the circuit.
    pub fn of(&self, lit: Lit) -> Option<f64> {
        let v = lit.unsigned_abs() as usize;
        if lit > 0 {
            self.pos.get(v).copied().flatten()
        } else {
            self.neg.get(v).copied().flatten()
        }
    }
}

impl ArithmeticCircuit {
    pub fn has_indicator(&self, lit: Lit) -> bool {
        self.indicator
            .get(lit.unsigned_abs() as usize)
            .is_some_and(|s| s[slot(lit)].is_some())
    }

    /// Sets every weight leaf to `weight(lit)`.
    pub fn reweight(&mut self, weight: impl Fn(Lit) -> f64) {
        for node in &mut self.nodes {
            if let AcNode::Weight { lit, w } = node {
                *w = weight(*lit);
            }
        }
    }

    fn upward(&self, ind: &Indicators, max: bool) -> Vec<f64> {
        let mut v = vec![0.0; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            v[i] = match node {
                AcNode::Sum(c) if max => c.iter().map(|&x| v[x]).fold(0.0, f64::max),
                AcNode::Sum(c) => c.iter().map(|&x| v[x]).sum(),
                AcNode::Product(c) => c.iter().map(|&x| v[x]).product(),
                AcNode::Weight { w, .. } => *w,
                AcNode::Indicator(l) => ind.get(*l),
            };
        }
        v
    }

    pub fn evaluate(&self, ind: &Indicators) -> f64 {
        self.upward(ind, false)[self.root]
    }

    /// Natural log of [`ArithmeticCircuit::evaluate`], computed in log space.
    pub fn evaluate_log(&self, ind: &Indicators) -> f64 {
        let mut v = vec![0.0; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            v[i] = match node {
                AcNode::Sum(c) => {
                    let m = c.iter().map(|&x| v[x]).fold(f64::NEG_INFINITY, f64::max);
                    if m == f64::NEG_INFINITY {
                        m
                    } else {
                        m + c.iter().map(|&x| (v[x] - m).exp()).sum::<f64>().ln()
                    }
                }
                AcNode::Product(c) => c.iter().map(|&x| v[x]).sum(),
                AcNode::Weight { w, .. } => w.ln(),
                AcNode::Indicator(l) => ind.get(*l).ln(),
            };
        }
        v[self.root]
    }

    /// Upward pass, then a downward pass accumulating ∂root/∂node. The
    /// marginal of literal `l` is `λ[l] · ∂root/∂λ[l]`.
    pub fn all_marginals(&self, ind: &Indicators) -> Marginals {
        let value = self.upward(ind, false);
        let mut d = vec![0.0; self.nodes.len()];
        d[self.root] = 1.0;
        for i in (0..self.nodes.len()).rev() {
            if d[i] == 0.0 {
                continue;
            }
            match &self.nodes[i] {
                AcNode::Sum(c) => {
                    for &x in c {
                        d[x] += d[i];
                    }
                }
                AcNode::Product(c) => {
                    // prefix/suffix products so zero-valued siblings are handled exactly
                    let n = c.len();
                    let mut suffix = vec![1.0; n + 1];
                    for k in (0..n).rev() {
                        suffix[k] = suffix[k + 1] * value[c[k]];
                    }
                    let mut prefix = 1.0;
                    for k in 0..n {
                        d[c[k]] += d[i] * prefix * suffix[k + 1];
                        prefix *= value[c[k]];
                    }
                }
                _ => {}
            }
        }
        let marginal = |entry: Option<usize>, lit: Lit| entry.map(|node| ind.get(lit) * d[node]);
        let mut pos = vec![None; self.num_vars + 1];
        let mut neg = vec![None; self.num_vars + 1];
        for v in 1..=self.num_vars {
            pos[v] = marginal(self.indicator[v][0], v as Lit);
            neg[v] = marginal(self.indicator[v][1], -(v as Lit));
        }
        Marginals {
            value: value[self.root],
            pos,
            neg,
        }
    }

    /// Max-product pass and trace. Returns the value per variable reached by
    /// the trace and the maximal weight. Ties go to the lowest node id.
    pub fn mpe(&self, ind: &Indicators) -> Result<(Vec<Option<bool>>, f64)> {
        let value = self.upward(ind, true);
        let best = value[self.root];
        if best <= 0.0 {
            return Err(Error::ZeroProbability {
                evidence: "circuit value is zero".into(),
            });
        }
        let mut assignment = vec![None; self.num_vars + 1];
        let mut visited = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut visited[i], true) {
                continue;
            }
            match &self.nodes[i] {
                AcNode::Sum(c) => {
                    let m = c.iter().map(|&x| value[x]).fold(0.0, f64::max);
                    let pick = c
                        .iter()
                        .copied()
                        .filter(|&x| value[x] == m)
                        .min()
                        .expect("sum with positive value has children");
                    stack.push(pick);
                }
                AcNode::Product(c) => stack.extend(c.iter().copied()),
                AcNode::Indicator(l) => assignment[l.unsigned_abs() as usize] = Some(*l > 0),
                AcNode::Weight { .. } => {}
            }
        }
        Ok((assignment, best))
    }

    /// Weight of a total assignment: the circuit evaluated with the
    /// indicators of the opposite literals set to 0.
    pub fn weight_of(&self, assignment: &[Option<bool>]) -> f64 {
        let mut ind = Indicators::ones(self.num_vars);
        for (v, value) in assignment.iter().enumerate().skip(1) {
            if let Some(b) = value {
                ind.observe(v, *b);
            }
        }
        self.evaluate(&ind)
    }
}
