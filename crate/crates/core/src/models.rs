//! Benchmark programs used by tests, examples and the command line.

/// The Alarm program.
pub const ALARM: &str = "\
0.1::burglary.
0.2::earthquake.
0.7::hears_alarm(X) :- person(X).
person(mary).
person(john).
alarm :- burglary.
alarm :- earthquake.
calls(X) :- alarm, hears_alarm(X).
";

/// Smokers with stress and influence only, over the three-person network
/// used in the grounding example.
pub fn smokers_example() -> String {
    "\
0.2::stress(P) :- person(P).
0.3::influences(P1,P2) :- friend(P1,P2).
person(p1). person(p2). person(p3).
friend(p1,p2). friend(p1,p3).
friend(p2,p1). friend(p3,p1).
smokes(X) :- stress(X).
smokes(X) :- smokes(Y), influences(Y,X).
"
    .to_string()
}

/// Ground-truth parameters of the full Smokers program, in declaration
/// order: stress, influences, cancer_spont, cancer_smoke.
pub const SMOKERS_TRUTH: [f64; 4] = [0.2, 0.3, 0.1, 0.3];

/// Full Smokers program with cancer rules over `persons` and the directed
/// `friends` pairs. With `learnable` the four probabilities become `t(_)`.
pub fn smokers(persons: &[&str], friends: &[(&str, &str)], learnable: bool) -> String {
    let label = |p: f64| if learnable { "t(_)".to_string() } else { p.to_string() };
    let [stress, infl, spont, smoke] = SMOKERS_TRUTH;
    let mut out = format!(
        "{}::stress(P) :- person(P).\n\
         {}::influences(P1,P2) :- friend(P1,P2).\n\
         {}::cancer_spont(P) :- person(P).\n\
         {}::cancer_smoke(P) :- person(P).\n",
        label(stress),
        label(infl),
        label(spont),
        label(smoke)
    );
    for p in persons {
        out += &format!("person({p}).\n");
    }
    for (a, b) in friends {
        out += &format!("friend({a},{b}).\n");
    }
    out += "smokes(X) :- stress(X).\n\
            smokes(X) :- smokes(Y), influences(Y,X).\n\
            cancer(P) :- cancer_spont(P).\n\
            cancer(P) :- smokes(P), cancer_smoke(P).\n";
    out
}

/// Three persons with the friendship network of the grounding example.
pub fn smokers3(learnable: bool) -> String {
    smokers(
        &["p1", "p2", "p3"],
        &[("p1", "p2"), ("p1", "p3"), ("p2", "p1"), ("p3", "p1")],
        learnable,
    )
}

/// `n`×`n` grid with horizontal, vertical and diagonal edges of
/// probability 0.5 and the usual transitive `path/2`.
pub fn grid(n: usize) -> String {
    let mut out = String::new();
    let node = |x: usize, y: usize| format!("n_{x}_{y}");
    for x in 1..=n {
        for y in 1..=n {
            if x < n {
                out += &format!("0.5::edge({},{}).\n", node(x, y), node(x + 1, y));
            }
            if y < n {
                out += &format!("0.5::edge({},{}).\n", node(x, y), node(x, y + 1));
            }
            if x < n && y < n {
                out += &format!("0.5::edge({},{}).\n", node(x, y), node(x + 1, y + 1));
            }
        }
    }
    out += "path(X,Y) :- edge(X,Y).\npath(X,Y) :- edge(X,Z), path(Z,Y).\n";
    out
}
