mod common;

use common::close;
use plp::ast::PartialInterpretation;
use plp::engine::Compiled;
use plp::grounder::{relevant_ground_program, Grounding};
use plp::learner::{learn_em, learn_fully_observable, log_likelihood, sample_dataset, Dataset, EmOptions, Learner, ParamVector};
use plp::metrics::{instance_counts, kl_divergence};
use plp::models;
use plp::oracle;
use plp::parser::parse_program;

const ALARM_LEARNABLE: &str = "\
t(_)::burglary.
t(_)::earthquake.
t(_)::hears_alarm(X) :- person(X).
person(mary).
person(john).
alarm :- burglary.
alarm :- earthquake.
calls(X) :- alarm, hears_alarm(X).
";

fn partial_alarm_data() -> Dataset {
    Dataset::parse(
        "alarm,true\nearthquake,true\n---\ncalls(mary),true\ncalls(john),true\n---\n\
         burglary,false\ncalls(john),false\n---\nhears_alarm(mary),true\nalarm,false\n",
    )
    .unwrap()
}

#[test]
fn log_likelihood_matches_enumeration() {
    let p = parse_program(ALARM_LEARNABLE).unwrap();
    let d = partial_alarm_data();
    let params = [0.3, 0.15, 0.6];
    let g = Grounding::new(&p).unwrap();
    let expected: f64 = d
        .examples
        .iter()
        .map(|e| oracle::oracle_evid_with(g.full(), Some(&params), e).unwrap().ln())
        .sum();
    let got = log_likelihood(&p, &ParamVector::from_values(params.to_vec()), &d).unwrap();
    assert!(close(got, expected, 1e-12), "{got} vs {expected}");
}

#[test]
fn expected_counts_match_enumeration() {
    let p = parse_program(ALARM_LEARNABLE).unwrap();
    let d = partial_alarm_data();
    let params = [0.3, 0.15, 0.6];
    let mut sums = vec![0.0; 3];
    let mut counts = vec![0.0; 3];
    for e in &d.examples {
        let g = relevant_ground_program(&p, &[], e).unwrap();
        let mut mass = 0.0;
        let mut joint = vec![0.0; g.prob_facts.len()];
        oracle::for_each_world(&g, Some(&params), |choice, world, pr| {
            if e.iter().all(|(a, v)| world[g.id_of(a).unwrap()] == v) {
                mass += pr;
                for (j, &c) in choice.iter().enumerate() {
                    if c {
                        joint[j] += pr;
                    }
                }
            }
        })
        .unwrap();
        for (j, f) in g.prob_facts.iter().enumerate() {
            let plp::ProbLabel::Param(i) = f.prob else { continue };
            sums[i] += joint[j] / mass;
            counts[i] += 1.0;
        }
    }
    let (_, got_sums, got_counts) = Learner::new(&p, &d).unwrap().expectation(&params).unwrap();
    assert_eq!(got_counts, counts);
    for (a, b) in got_sums.iter().zip(&sums) {
        assert!(close(*a, *b, 1e-12), "{got_sums:?} vs {sums:?}");
    }
}

#[test]
fn reweighting_matches_recompiling() {
    let p = parse_program(ALARM_LEARNABLE).unwrap();
    let d = partial_alarm_data();
    let init = vec![0.4, 0.2, 0.7];
    let opts = EmOptions {
        seed: 0,
        max_iters: 15,
        ll_tolerance: 0.0,
        init: Some(init.clone()),
    };
    let r = learn_em(&p, &d, &opts).unwrap();
    assert_eq!(r.ll_trace.len(), 15);
    let g = Grounding::new(&p).unwrap();
    let mut replay = Vec::new();
    let mut current = init;
    for _ in 0..r.ll_trace.len() {
        let mut ll = 0.0;
        let mut sums = [0.0; 3];
        let mut counts = [0.0; 3];
        for e in &d.examples {
            let c = Compiled::build(g.relevant(&[], e).unwrap(), e, Some(&current)).unwrap();
            let (value, joint) = c.joint_marginals();
            ll += value.ln();
            for f in &c.ground.prob_facts {
                let plp::ProbLabel::Param(i) = f.prob else { continue };
                let atom = c.ground.atom(f.atom);
                let m = joint.iter().find(|(a, _)| a == atom).unwrap().1 / value;
                sums[i] += e.get(atom).map_or(m, |v| f64::from(u8::from(v)));
                counts[i] += 1.0;
            }
        }
        replay.push(ll);
        current = sums.iter().zip(&counts).map(|(s, c)| s / c).collect();
    }
    for (a, b) in replay.iter().zip(&r.ll_trace) {
        assert!(close(*a, *b, 1e-10), "{replay:?} vs {:?}", r.ll_trace);
    }
}

#[test]
fn complete_smokers_data_recovers_parameters() {
    let truth = parse_program(&models::smokers3(false)).unwrap();
    let d = sample_dataset(&truth, 10_000, 1.0, 99).unwrap();
    let p = parse_program(&models::smokers3(true)).unwrap();
    let learned = learn_fully_observable(&p, &d).unwrap();
    for (l, t) in learned.values.iter().zip(models::SMOKERS_TRUTH) {
        assert!((l - t).abs() < 0.02, "{:?}", learned.values);
    }
    let em = learn_em(&p, &Dataset::new(d.examples[..500].to_vec()), &EmOptions::default());
    assert!(em.is_ok());
}

#[test]
fn em_improves_divergence_on_partial_smokers() {
    let truth = parse_program(&models::smokers3(false)).unwrap();
    let d = sample_dataset(&truth, 200, 0.5, 4).unwrap();
    let p = parse_program(&models::smokers3(true)).unwrap();
    let counts = instance_counts(&p).unwrap();
    let r = learn_em(&p, &d, &EmOptions { seed: 1, ..EmOptions::default() }).unwrap();
    assert!(r.ll_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    let init = learn_em(&p, &d, &EmOptions { seed: 1, max_iters: 1, ..EmOptions::default() }).unwrap();
    let before = kl_divergence(&models::SMOKERS_TRUTH, &init.params.values, &counts).unwrap();
    let after = kl_divergence(&models::SMOKERS_TRUTH, &r.params.values, &counts).unwrap();
    assert!(after < before, "{before} -> {after}");
}

#[test]
fn empty_examples_are_harmless() {
    let p = parse_program(ALARM_LEARNABLE).unwrap();
    let d = Dataset::new(vec![PartialInterpretation::new(); 3]);
    let r = learn_em(&p, &d, &EmOptions::default()).unwrap();
    assert!(r.ll_trace.iter().all(|&ll| ll == 0.0));
}
