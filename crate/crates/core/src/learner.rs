//! Maximum-likelihood estimation of learnable fact probabilities from
//! (partial) interpretations.
//!
//! With complete examples the estimate is a frequency count over the ground
//! instances of each learnable fact. Otherwise EM is run on one compiled
//! circuit per example: the E-step reads the instance marginals off the
//! circuit, the M-step averages them over the instances present in each
//! example's relevant ground program.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ast::{PartialInterpretation, PredKey, ProbLabel, Program};
use crate::circuit::Indicators;
use crate::cnf::{Lit, VarRole};
use crate::engine::Compiled;
use crate::error::{Error, Result};
use crate::grounder::Grounding;
use crate::parser::parse_dataset;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub examples: Vec<PartialInterpretation>,
}

impl Dataset {
    pub fn new(examples: Vec<PartialInterpretation>) -> Self {
        Dataset { examples }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(Dataset::new(parse_dataset(text)?))
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    /// Z_n: number of ground instances the estimate of parameter n averages over.
    pub normalizers: Vec<f64>,
    /// False for parameters without any instance to learn from; their value is 0.
    pub estimated: Vec<bool>,
}

impl ParamVector {
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len();
        ParamVector {
            values,
            normalizers: vec![0.0; n],
            estimated: vec![true; n],
        }
    }

    fn from_counts(sums: &[f64], counts: &[f64]) -> Self {
        let values = sums
            .iter()
            .zip(counts)
            .map(|(&s, &z)| if z > 0.0 { (s / z).clamp(0.0, 1.0) } else { 0.0 })
            .collect();
        ParamVector {
            values,
            normalizers: counts.to_vec(),
            estimated: counts.iter().map(|&z| z > 0.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmOptions {
    pub seed: u64,
    pub max_iters: usize,
    pub ll_tolerance: f64,
    /// Starting point; drawn uniformly from (0.05, 0.95) when absent.
    pub init: Option<Vec<f64>>,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            seed: 0,
            max_iters: 100,
            ll_tolerance: 1e-6,
            init: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmResult {
    pub params: ParamVector,
    /// Log-likelihood of the parameters entering each iteration.
    pub ll_trace: Vec<f64>,
}

fn check_examples(grounding: &Grounding, d: &Dataset) -> Result<()> {
    for e in &d.examples {
        for atom in e.atoms() {
            if grounding.full().id_of(atom).is_none() {
                return Err(Error::UnknownEvidenceAtom(atom.to_string()));
            }
        }
    }
    Ok(())
}

/// Closed-form estimate from complete examples.
pub fn learn_fully_observable(p: &Program, d: &Dataset) -> Result<ParamVector> {
    let grounding = Grounding::new(p)?;
    check_examples(&grounding, d)?;
    let full = grounding.full();
    let n = p.num_params();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0.0; n];
    for (m, e) in d.examples.iter().enumerate() {
        for f in &full.prob_facts {
            let ProbLabel::Param(i) = f.prob else { continue };
            let atom = full.atom(f.atom);
            let value = e.get(atom).ok_or_else(|| Error::NotFullyObservable {
                example: m,
                atom: atom.to_string(),
            })?;
            sums[i] += f64::from(u8::from(value));
            counts[i] += 1.0;
        }
    }
    Ok(ParamVector::from_counts(&sums, &counts))
}

/// Per-example compiled circuits, built once and reweighted per iteration.
pub struct Learner {
    num_params: usize,
    examples: Vec<PartialInterpretation>,
    circuits: Vec<Compiled>,
}

impl Learner {
    pub fn new(p: &Program, d: &Dataset) -> Result<Self> {
        let grounding = Grounding::new(p)?;
        check_examples(&grounding, d)?;
        let num_params = p.num_params();
        let placeholder = vec![0.5; num_params];
        let circuits = d
            .examples
            .iter()
            .map(|e| Compiled::build(grounding.relevant(&[], e)?, e, Some(&placeholder)))
            .collect::<Result<_>>()?;
        Ok(Learner {
            num_params,
            examples: d.examples.clone(),
            circuits,
        })
    }

    /// One E-step at `params`: log-likelihood, expected true counts and
    /// instance counts per parameter.
    pub fn expectation(&mut self, params: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let mut ll = 0.0;
        let mut sums = vec![0.0; self.num_params];
        let mut counts = vec![0.0; self.num_params];
        for (m, (c, e)) in self.circuits.iter_mut().zip(&self.examples).enumerate() {
            c.reweight(params)?;
            let marg = c.circuit.all_marginals(&Indicators::ones(c.cnf.num_vars));
            if marg.value <= 0.0 {
                return Err(Error::ZeroProbability {
                    evidence: format!("example {m}: {}", e.summary()),
                });
            }
            ll += marg.value.ln();
            for v in 1..=c.cnf.num_vars {
                let VarRole::Probabilistic(ProbLabel::Param(i)) = c.cnf.roles[v - 1] else {
                    continue;
                };
                let atom = c.cnf.atoms[v - 1].as_ref().expect("probabilistic vars have atoms");
                let expected = match e.get(atom) {
                    Some(observed) => f64::from(u8::from(observed)),
                    None => marg.of(v as Lit).unwrap_or(0.0) / marg.value,
                };
                sums[i] += expected;
                counts[i] += 1.0;
            }
        }
        Ok((ll, sums, counts))
    }

    pub fn log_likelihood(&mut self, params: &[f64]) -> Result<f64> {
        Ok(self.expectation(params)?.0)
    }

    pub fn em(&mut self, opts: &EmOptions) -> Result<EmResult> {
        let mut params = match &opts.init {
            Some(init) => {
                if init.len() != self.num_params {
                    return Err(Error::Semantic(format!(
                        "{} initial values for {} parameters",
                        init.len(),
                        self.num_params
                    )));
                }
                ParamVector::from_values(init.clone())
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                ParamVector::from_values((0..self.num_params).map(|_| rng.gen_range(0.05..0.95)).collect())
            }
        };
        let mut trace: Vec<f64> = Vec::new();
        for _ in 0..opts.max_iters {
            let (ll, sums, counts) = self.expectation(&params.values)?;
            let converged = trace.last().is_some_and(|prev| (ll - prev).abs() < opts.ll_tolerance);
            trace.push(ll);
            if converged {
                break;
            }
            params = ParamVector::from_counts(&sums, &counts);
        }
        Ok(EmResult {
            params,
            ll_trace: trace,
        })
    }
}

pub fn learn_em(p: &Program, d: &Dataset, opts: &EmOptions) -> Result<EmResult> {
    Learner::new(p, d)?.em(opts)
}

/// Σ_m ln P(E_m = e_m) under `params`.
pub fn log_likelihood(p: &Program, params: &ParamVector, d: &Dataset) -> Result<f64> {
    if d.is_empty() {
        return Ok(0.0);
    }
    Learner::new(p, d)?.log_likelihood(&params.values)
}

/// Samples `n` complete worlds of `truth` and keeps a random `fraction` of
/// the atoms of each, skipping atoms of purely deterministic predicates.
pub fn sample_dataset(truth: &Program, n: usize, fraction: f64, seed: u64) -> Result<Dataset> {
    let grounding = Grounding::new(truth)?;
    let solver = grounding.solver();
    let deterministic: Vec<PredKey> = truth.deterministic_predicates().into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = Vec::with_capacity(n);
    for _ in 0..n {
        let world = grounding.sample_with(&solver, &mut rng, None)?;
        let candidates: Vec<_> = world
            .iter()
            .filter(|(a, _)| !deterministic.contains(&a.key()))
            .map(|(a, v)| (a.clone(), v))
            .collect();
        let keep = (fraction * candidates.len() as f64).round() as usize;
        let chosen = rand::seq::index::sample(&mut rng, candidates.len(), keep.min(candidates.len()));
        let mut picked: Vec<usize> = chosen.into_vec();
        picked.sort_unstable();
        examples.push(picked.into_iter().map(|i| candidates[i].clone()).collect());
    }
    Ok(Dataset::new(examples))
}
