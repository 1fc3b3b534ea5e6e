//! End-to-end inference: ground, convert, compile, evaluate.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use crate::ast::{Atom, PartialInterpretation, Program};
use crate::circuit::{to_arithmetic_circuit, ArithmeticCircuit, Indicators};
use crate::cnf::{assert_evidence, rules_to_formula, Lit, VarRole, WeightedCNF};
use crate::compiler::{smooth, Compiler, DdnnfGraph};
use crate::error::{Error, Result};
use crate::grounder::{GroundProgram, Grounding};
use crate::oracle::{WfmResult, WfmSolver};

/// Every stage's output for one (queries, evidence) pair.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub ground: GroundProgram,
    pub cnf: WeightedCNF,
    pub ddnnf: DdnnfGraph,
    pub circuit: ArithmeticCircuit,
}

impl Compiled {
    /// Runs conversion and compilation on a relevant ground program.
    pub fn build(
        ground: GroundProgram,
        evidence: &PartialInterpretation,
        params: Option<&[f64]>,
    ) -> Result<Self> {
        let cnf = assert_evidence(&rules_to_formula(&ground, params)?, evidence)?;
        let ddnnf = smooth(&Compiler::default().compile(&cnf)?, cnf.num_vars);
        let circuit = to_arithmetic_circuit(&ddnnf, &cnf)?;
        Ok(Compiled {
            ground,
            cnf,
            ddnnf,
            circuit,
        })
    }

    /// Evaluates with all indicators at 1: the probability of the evidence.
    pub fn probability(&self) -> f64 {
        self.circuit.evaluate(&Indicators::ones(self.cnf.num_vars))
    }

    /// Swaps in new values for the learnable parameters; the structure is kept.
    pub fn reweight(&mut self, params: &[f64]) -> Result<()> {
        self.cnf.reweight(params)?;
        let cnf = &self.cnf;
        self.circuit.reweight(|l| cnf.weight(l));
        Ok(())
    }

    /// `P(atom ∧ e)` for each original atom of the ground program.
    pub fn joint_marginals(&self) -> (f64, Vec<(Atom, f64)>) {
        let m = self.circuit.all_marginals(&Indicators::ones(self.cnf.num_vars));
        let out = (1..=self.cnf.num_vars)
            .filter(|&v| self.cnf.roles[v - 1] != VarRole::Auxiliary)
            .filter_map(|v| {
                let atom = self.cnf.atoms[v - 1].clone()?;
                Some((atom, m.of(v as Lit).unwrap_or(0.0)))
            })
            .collect();
        (m.value, out)
    }
}

/// Result of the MPE task.
#[derive(Debug, Clone, PartialEq)]
pub struct Mpe {
    /// Truth value of every unobserved atom of the full grounding.
    pub world: PartialInterpretation,
    /// Ground probabilistic facts chosen true.
    pub choice: Vec<Atom>,
    pub probability: f64,
}

type CacheKey = (Vec<Atom>, PartialInterpretation);

/// Inference over one program, caching a compiled circuit per
/// (queries, evidence) pair.
pub struct Engine {
    program: Program,
    grounding: Grounding,
    cache: Mutex<HashMap<CacheKey, Arc<Compiled>>>,
}

impl Engine {
    pub fn new(program: &Program) -> Result<Self> {
        Ok(Engine {
            grounding: Grounding::new(program)?,
            program: program.clone(),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn grounding(&self) -> &Grounding {
        &self.grounding
    }

    pub fn compiled(&self, queries: &[Atom], evidence: &PartialInterpretation) -> Result<Arc<Compiled>> {
        let mut q = queries.to_vec();
        q.sort();
        q.dedup();
        let key = (q, evidence.clone());
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let ground = self.grounding.relevant(&key.0, evidence)?;
        let compiled = Arc::new(Compiled::build(ground, evidence, None)?);
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, Arc::clone(&compiled));
        Ok(compiled)
    }

    pub fn prob_evidence(&self, evidence: &PartialInterpretation) -> Result<f64> {
        Ok(self.compiled(&[], evidence)?.probability())
    }

    /// Conditional marginals `P(q | e)`.
    pub fn marginals(
        &self,
        queries: &[Atom],
        evidence: &PartialInterpretation,
    ) -> Result<BTreeMap<Atom, f64>> {
        let c = self.compiled(queries, evidence)?;
        let m = c.circuit.all_marginals(&Indicators::ones(c.cnf.num_vars));
        if m.value <= 0.0 {
            return Err(Error::ZeroProbability {
                evidence: evidence.summary(),
            });
        }
        queries
            .iter()
            .map(|q| {
                let var = c.cnf.var_of(q).expect("query atoms are in the relevant program");
                Ok((q.clone(), m.of(var as Lit).unwrap_or(0.0) / m.value))
            })
            .collect()
    }

    /// Most probable world given the evidence. Facts outside the relevant
    /// program take their more likely value (true on ties); derived atoms
    /// follow from the well-founded model of the resulting total choice.
    pub fn mpe(&self, evidence: &PartialInterpretation) -> Result<Mpe> {
        let c = self.compiled(&[], evidence)?;
        let zero = || Error::ZeroProbability {
            evidence: evidence.summary(),
        };
        let (assignment, mut probability) = c
            .circuit
            .mpe(&Indicators::ones(c.cnf.num_vars))
            .map_err(|e| if matches!(e, Error::ZeroProbability { .. }) { zero() } else { e })?;
        let full = self.grounding.full();
        let mut facts = vec![false; full.num_atoms()];
        for f in &full.prob_facts {
            let atom = full.atom(f.atom);
            facts[f.atom] = match c.cnf.var_of(atom) {
                Some(v) => assignment[v].unwrap_or(true),
                None => {
                    let p = f.prob.resolve(None)?;
                    probability *= p.max(1.0 - p);
                    p >= 0.5
                }
            };
        }
        let world = match WfmSolver::new(&full.rules, full.num_atoms()).solve(&facts) {
            WfmResult::TwoValued(w) => w,
            WfmResult::Undefined(atoms) => {
                return Err(Error::Unsound {
                    undefined: atoms.iter().map(|&a| full.atom(a).to_string()).collect(),
                })
            }
        };
        let choice = full
            .prob_facts
            .iter()
            .filter(|f| facts[f.atom])
            .map(|f| full.atom(f.atom).clone())
            .collect();
        let world = full
            .atoms()
            .iter()
            .zip(world)
            .filter(|(a, _)| !evidence.contains(a))
            .map(|(a, v)| (a.clone(), v))
            .collect();
        Ok(Mpe {
            world,
            choice,
            probability,
        })
    }
}

pub fn prob_evidence(p: &Program, e: &PartialInterpretation) -> Result<f64> {
    Engine::new(p)?.prob_evidence(e)
}

pub fn marginals(p: &Program, q: &[Atom], e: &PartialInterpretation) -> Result<BTreeMap<Atom, f64>> {
    Engine::new(p)?.marginals(q, e)
}

pub fn mpe_task(p: &Program, e: &PartialInterpretation) -> Result<Mpe> {
    Engine::new(p)?.mpe(e)
}
