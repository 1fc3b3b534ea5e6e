//! Text parser for the input language.
//!
//! ```text
//! 0.1::burglary.
//! 0.7::hears_alarm(X) :- person(X).
//! t(_)::stress(P) :- person(P).
//! alarm :- burglary.
//! calls(X) :- alarm, hears_alarm(X), \+ asleep(X).
//! query(alarm).
//! evidence(calls(john),true).
//! % comment
//! ```

use std::collections::HashSet;

use crate::ast::{
    Atom, Literal, PartialInterpretation, ProbLabel, ProbabilisticFact, Program, Rule, Term,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    /// Lower-case identifier or quoted atom.
    Name(String),
    Var(String),
    Number(String),
    LParen,
    RParen,
    Comma,
    Dot,
    DoubleColon,
    Neck,
    Naf,
    /// A line consisting of `---`; separates dataset examples.
    Separator,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Name(n) => format!("`{n}`"),
            Tok::Var(v) => format!("variable `{v}`"),
            Tok::Number(n) => format!("number `{n}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::DoubleColon => "`::`".into(),
            Tok::Neck => "`:-`".into(),
            Tok::Naf => "`\\+`".into(),
            Tok::Separator => "`---`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut at_line_start = true;

    macro_rules! advance {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
                at_line_start = true;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if at_line_start {
            // dataset separator line
            let end = chars[i..].iter().position(|&c| c == '\n').map_or(chars.len(), |p| i + p);
            let content: String = chars[i..end].iter().collect();
            if content.trim() == "---" {
                out.push(Token { tok: Tok::Separator, line, column: col });
                while i < end {
                    advance!();
                }
                continue;
            }
            at_line_start = false;
        }
        if c.is_whitespace() {
            advance!();
            continue;
        }
        let (tl, tc) = (line, col);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: tl, column: tc });
        match c {
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    advance!();
                }
            }
            '/' if chars.get(i + 1) == Some(&'*') => {
                advance!();
                advance!();
                loop {
                    if i >= chars.len() {
                        return Err(syntax(tl, tc, "unterminated block comment"));
                    }
                    if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                        advance!();
                        advance!();
                        break;
                    }
                    advance!();
                }
            }
            '(' => {
                push(&mut out, Tok::LParen);
                advance!();
            }
            ')' => {
                push(&mut out, Tok::RParen);
                advance!();
            }
            ',' => {
                push(&mut out, Tok::Comma);
                advance!();
            }
            '.' => {
                push(&mut out, Tok::Dot);
                advance!();
            }
            ':' => match chars.get(i + 1) {
                Some(':') => {
                    push(&mut out, Tok::DoubleColon);
                    advance!();
                    advance!();
                }
                Some('-') => {
                    push(&mut out, Tok::Neck);
                    advance!();
                    advance!();
                }
                _ => return Err(syntax(tl, tc, "expected `::` or `:-`")),
            },
            '\\' => {
                if chars.get(i + 1) == Some(&'+') {
                    push(&mut out, Tok::Naf);
                    advance!();
                    advance!();
                } else {
                    return Err(syntax(tl, tc, "expected `\\+`"));
                }
            }
            '\'' => {
                advance!();
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None | Some('\n') => {
                            return Err(syntax(tl, tc, "unterminated quoted atom"))
                        }
                        Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                            s.push('\'');
                            advance!();
                            advance!();
                        }
                        Some('\'') => {
                            advance!();
                            break;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            advance!();
                        }
                    }
                }
                push(&mut out, Tok::Name(s));
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance!();
                }
                if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                    advance!();
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance!();
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while i < j {
                            advance!();
                        }
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            advance!();
                        }
                    }
                }
                push(&mut out, Tok::Number(chars[start..i].iter().collect()));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    advance!();
                }
                let word: String = chars[start..i].iter().collect();
                let tok = if c.is_ascii_lowercase() {
                    Tok::Name(word)
                } else {
                    Tok::Var(word)
                };
                push(&mut out, tok);
            }
            other => return Err(syntax(tl, tc, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    anon: usize,
    /// Variable names written in the source; fresh names avoid them.
    named: HashSet<String>,
}

enum Clause {
    ProbFact(ProbabilisticFact),
    Rule(Rule),
    Query(Atom),
    Evidence(Atom, bool),
}

impl Parser {
    fn new(text: &str) -> Result<Self> {
        let tokens = lex(text)?;
        let named = tokens
            .iter()
            .filter_map(|t| match &t.tok {
                Tok::Var(v) if v != "_" => Some(v.clone()),
                _ => None,
            })
            .collect();
        Ok(Parser {
            tokens,
            pos: 0,
            anon: 0,
            named,
        })
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let idx = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> Error {
        let t = &self.tokens[self.pos];
        syntax(t.line, t.column, message)
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            Err(self.error_here(format!(
                "expected {}, found {}",
                want.describe(),
                self.peek().describe()
            )))
        }
    }

    fn term(&mut self) -> Result<Term> {
        let t = self.next();
        match t.tok {
            Tok::Var(v) if v == "_" => loop {
                self.anon += 1;
                let fresh = format!("_{}", self.anon);
                if !self.named.contains(&fresh) {
                    break Ok(Term::Var(fresh));
                }
            },
            Tok::Var(v) => Ok(Term::Var(v)),
            Tok::Number(n) => Ok(Term::Const(n)),
            Tok::Name(n) => {
                if *self.peek() == Tok::LParen {
                    Ok(Term::Compound(n, self.args()?))
                } else {
                    Ok(Term::Const(n))
                }
            }
            other => Err(syntax(
                t.line,
                t.column,
                format!("expected a term, found {}", other.describe()),
            )),
        }
    }

    fn args(&mut self) -> Result<Vec<Term>> {
        self.expect(Tok::LParen)?;
        let mut args = vec![self.term()?];
        while *self.peek() == Tok::Comma {
            self.next();
            args.push(self.term()?);
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn atom(&mut self) -> Result<Atom> {
        match self.peek().clone() {
            Tok::Name(n) => {
                self.next();
                let args = if *self.peek() == Tok::LParen {
                    self.args()?
                } else {
                    Vec::new()
                };
                Ok(Atom::new(n, args))
            }
            other => Err(self.error_here(format!("expected an atom, found {}", other.describe()))),
        }
    }

    fn literal(&mut self) -> Result<Literal> {
        if let Tok::Var(v) = self.peek() {
            let t = &self.tokens[self.pos];
            return Err(Error::RangeRestriction {
                variable: v.clone(),
                clause: format!("body literal at {}:{}", t.line, t.column),
            });
        }
        if *self.peek() == Tok::Naf {
            self.next();
            Ok(Literal::neg(self.atom()?))
        } else {
            Ok(Literal::pos(self.atom()?))
        }
    }

    fn body(&mut self) -> Result<Vec<Literal>> {
        if *self.peek() != Tok::Neck {
            return Ok(Vec::new());
        }
        self.next();
        let mut body = vec![self.literal()?];
        while *self.peek() == Tok::Comma {
            self.next();
            body.push(self.literal()?);
        }
        Ok(body)
    }

    fn probability(&mut self) -> Result<f64> {
        let t = self.next();
        match t.tok {
            Tok::Number(n) => n
                .parse::<f64>()
                .map_err(|_| syntax(t.line, t.column, format!("invalid number `{n}`"))),
            other => Err(syntax(
                t.line,
                t.column,
                format!("expected a probability, found {}", other.describe()),
            )),
        }
    }

    fn truth_value(term: &Term) -> Option<bool> {
        match term {
            Term::Const(c) if c == "true" => Some(true),
            Term::Const(c) if c == "false" => Some(false),
            _ => None,
        }
    }

    fn term_to_atom(term: Term) -> Option<Atom> {
        match term {
            Term::Const(c) => Some(Atom::prop(c)),
            Term::Compound(f, args) => Some(Atom::new(f, args)),
            Term::Var(_) => None,
        }
    }

    fn directive_atom(&self, term: Term, line: usize, column: usize) -> Result<Atom> {
        let atom = Self::term_to_atom(term)
            .ok_or_else(|| syntax(line, column, "expected an atom in directive"))?;
        if !atom.is_ground() {
            return Err(syntax(line, column, format!("directive atom {atom} is not ground")));
        }
        Ok(atom)
    }

    /// Parses one clause terminated by `.`; `next_param` numbers learnable facts.
    fn clause(&mut self, next_param: &mut usize) -> Result<Clause> {
        let start = self.tokens[self.pos].clone();
        if let Tok::Number(_) = start.tok {
            let p = self.probability()?;
            self.expect(Tok::DoubleColon)?;
            return self.prob_fact_tail(ProbLabel::Fixed(p));
        }
        let head = self.atom()?;
        if *self.peek() == Tok::DoubleColon {
            let marker_ok = head.predicate == "t"
                && head.args.len() == 1
                && matches!(&head.args[0], Term::Var(v) if v.starts_with('_'));
            if !marker_ok {
                return Err(syntax(
                    start.line,
                    start.column,
                    format!("expected a probability or `t(_)` before `::`, found {head}"),
                ));
            }
            self.next();
            let label = ProbLabel::Param(*next_param);
            *next_param += 1;
            return self.prob_fact_tail(label);
        }
        if *self.peek() == Tok::Dot {
            match (head.predicate.as_str(), head.args.len()) {
                ("query", 1) => {
                    self.next();
                    let atom = self.directive_atom(head.args[0].clone(), start.line, start.column)?;
                    return Ok(Clause::Query(atom));
                }
                ("evidence", 1 | 2) => {
                    self.next();
                    let value = match head.args.get(1) {
                        None => true,
                        Some(t) => Self::truth_value(t).ok_or_else(|| {
                            syntax(start.line, start.column, "evidence value must be true or false")
                        })?,
                    };
                    let atom = self.directive_atom(head.args[0].clone(), start.line, start.column)?;
                    return Ok(Clause::Evidence(atom, value));
                }
                _ => {}
            }
        }
        let body = self.body()?;
        self.expect(Tok::Dot)?;
        Ok(Clause::Rule(Rule { head, body }))
    }

    fn prob_fact_tail(&mut self, prob: ProbLabel) -> Result<Clause> {
        let atom = self.atom()?;
        let domain_body = self.body()?;
        self.expect(Tok::Dot)?;
        Ok(Clause::ProbFact(ProbabilisticFact {
            prob,
            atom,
            domain_body,
        }))
    }

    /// `atom,true` / `atom,false`, optional trailing `.`, or an evidence directive.
    fn observation(&mut self) -> Result<(Atom, bool)> {
        let start = self.tokens[self.pos].clone();
        if matches!(self.peek(), Tok::Name(n) if n == "evidence") && *self.peek_at(1) == Tok::LParen
        {
            let mut unused = 0;
            return match self.clause(&mut unused)? {
                Clause::Evidence(a, v) => Ok((a, v)),
                _ => Err(syntax(start.line, start.column, "expected an evidence directive")),
            };
        }
        let atom = self.atom()?;
        if !atom.is_ground() {
            return Err(syntax(start.line, start.column, format!("atom {atom} is not ground")));
        }
        self.expect(Tok::Comma)?;
        let t = self.next();
        let value = match &t.tok {
            Tok::Name(n) if n == "true" => true,
            Tok::Name(n) if n == "false" => false,
            other => {
                return Err(syntax(
                    t.line,
                    t.column,
                    format!("expected true or false, found {}", other.describe()),
                ))
            }
        };
        if *self.peek() == Tok::Dot {
            self.next();
        }
        Ok((atom, value))
    }
}

/// Parses a program, collecting inline `query/1` and `evidence/2` directives,
/// and validates it.
pub fn parse_program(text: &str) -> Result<Program> {
    let mut parser = Parser::new(text)?;
    let mut program = Program::default();
    let mut next_param = 0;
    loop {
        match parser.peek() {
            Tok::Eof => break,
            Tok::Separator => return Err(parser.error_here("unexpected `---` in program")),
            _ => {}
        }
        match parser.clause(&mut next_param)? {
            Clause::ProbFact(f) => program.prob_facts.push(f),
            Clause::Rule(r) => program.rules.push(r),
            Clause::Query(q) => {
                if !program.queries.contains(&q) {
                    program.queries.push(q);
                }
            }
            Clause::Evidence(a, v) => program.evidence.insert(a, v)?,
        }
    }
    program.validate()?;
    Ok(program)
}

/// Parses a file of `evidence(atom,true|false).` directives.
pub fn parse_evidence(text: &str) -> Result<PartialInterpretation> {
    let mut parser = Parser::new(text)?;
    let mut out = PartialInterpretation::new();
    let mut unused = 0;
    loop {
        let t = parser.tokens[parser.pos].clone();
        if t.tok == Tok::Eof {
            break;
        }
        match parser.clause(&mut unused)? {
            Clause::Evidence(a, v) => out.insert(a, v)?,
            _ => return Err(syntax(t.line, t.column, "expected an evidence directive")),
        }
    }
    Ok(out)
}

/// Parses `query(atom).` directives (other clauses are rejected).
pub fn parse_queries(text: &str) -> Result<Vec<Atom>> {
    let mut parser = Parser::new(text)?;
    let mut out: Vec<Atom> = Vec::new();
    let mut unused = 0;
    loop {
        let t = parser.tokens[parser.pos].clone();
        if t.tok == Tok::Eof {
            break;
        }
        match parser.clause(&mut unused)? {
            Clause::Query(q) => {
                if !out.contains(&q) {
                    out.push(q)
                }
            }
            _ => return Err(syntax(t.line, t.column, "expected a query directive")),
        }
    }
    Ok(out)
}

/// Parses a dataset: examples separated by `---` lines, one observation per
/// line written `atom,true|false` or as an evidence directive.
pub fn parse_dataset(text: &str) -> Result<Vec<PartialInterpretation>> {
    let mut parser = Parser::new(text)?;
    let mut examples = vec![PartialInterpretation::new()];
    loop {
        match parser.peek() {
            Tok::Eof => break,
            Tok::Separator => {
                parser.next();
                examples.push(PartialInterpretation::new());
            }
            _ => {
                let (a, v) = parser.observation()?;
                examples.last_mut().expect("non-empty").insert(a, v)?;
            }
        }
    }
    if examples.len() == 1 && examples[0].is_empty() {
        examples.clear();
    }
    Ok(examples)
}

/// Renders a dataset in the format read by [`parse_dataset`].
pub fn format_dataset(examples: &[PartialInterpretation]) -> String {
    let mut out = String::new();
    for (i, ex) in examples.iter().enumerate() {
        if i > 0 {
            out.push_str("---\n");
        }
        for (a, v) in ex.iter() {
            out.push_str(&format!("{a},{v}\n"));
        }
    }
    out
}

/// Parses a single ground atom, e.g. `path(n_1_1,n_3_3)`.
pub fn parse_atom(text: &str) -> Result<Atom> {
    let mut parser = Parser::new(text)?;
    let atom = parser.atom()?;
    if *parser.peek() != Tok::Eof {
        return Err(parser.error_here("trailing input after atom"));
    }
    Ok(atom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::PredKey;

    const ALARM: &str = "0.1::burglary.\n0.2::earthquake.\n0.7::hears_alarm(X) :- person(X).\n\
        person(mary).\nperson(john).\nalarm :- burglary.\nalarm :- earthquake.\n\
        calls(X) :- alarm, hears_alarm(X).\n";

    #[test]
    fn burglary_alarm_pair() {
        let p = parse_program("0.1::burglary.\nalarm :- burglary.").unwrap();
        assert_eq!(p.prob_facts.len(), 1);
        assert_eq!(p.prob_facts[0].prob, ProbLabel::Fixed(0.1));
        assert_eq!(p.rules.len(), 1);
    }

    #[test]
    fn empty_input() {
        let p = parse_program("").unwrap();
        assert_eq!(p, Program::default());
        assert!(parse_program("% only a comment\n").unwrap().rules.is_empty());
    }

    #[test]
    fn unbound_body_variable_is_rejected() {
        let err = parse_program("alarm :- X.").unwrap_err();
        assert!(matches!(err, Error::RangeRestriction { .. }), "{err:?}");
        let err = parse_program("alarm(X) :- \\+ b(X).").unwrap_err();
        assert!(matches!(err, Error::RangeRestriction { .. }), "{err:?}");
        let err = parse_program("p(X).").unwrap_err();
        assert!(matches!(err, Error::RangeRestriction { .. }), "{err:?}");
    }

    #[test]
    fn alarm_program() {
        let p = parse_program(ALARM).unwrap();
        assert_eq!(p.prob_facts.len(), 3);
        assert_eq!(p.rules.len(), 5);
        assert_eq!(p.prob_facts[2].domain_body.len(), 1);
        assert_eq!(
            p.probabilistic_predicates().into_iter().collect::<Vec<_>>(),
            vec![
                PredKey { name: "burglary".into(), arity: 0 },
                PredKey { name: "earthquake".into(), arity: 0 },
                PredKey { name: "hears_alarm".into(), arity: 1 },
            ]
        );
    }

    #[test]
    fn directives_and_params() {
        let text = "t(_)::a.\nt(_)::b(X) :- d(X).\n0.5::c.\nd(1).\nquery(a).\nquery(a).\n\
                    evidence(b(1),false).\nevidence(c).";
        let p = parse_program(text).unwrap();
        assert_eq!(p.prob_facts[0].prob, ProbLabel::Param(0));
        assert_eq!(p.prob_facts[1].prob, ProbLabel::Param(1));
        assert_eq!(p.num_params(), 2);
        assert_eq!(p.queries, vec![Atom::prop("a")]);
        assert_eq!(p.evidence.get(&parse_atom("b(1)").unwrap()), Some(false));
        assert_eq!(p.evidence.get(&Atom::prop("c")), Some(true));
    }

    #[test]
    fn semantic_errors() {
        assert!(matches!(parse_program("1.5::a."), Err(Error::ProbabilityRange(_))));
        assert!(matches!(parse_program("0.5::a.\na :- b.\nb."), Err(Error::PredicateOverlap(_))));
        assert!(matches!(
            parse_program("0.5::a.\n0.5::b(X) :- a, c(X).\nc(1)."),
            Err(Error::Semantic(_))
        ));
        assert!(matches!(parse_program("query(p(X))."), Err(Error::Syntax { .. })));
    }

    #[test]
    fn syntax_error_location() {
        match parse_program("a.\nb :- c,\n  d e.") {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (3, 5)),
            other => panic!("{other:?}"),
        }
        assert!(parse_program("0.1:: .").is_err());
        assert!(parse_program("foo(::").is_err());
        assert!(parse_program("'unterminated").is_err());
    }

    #[test]
    fn evidence_file() {
        let e = parse_evidence("evidence(calls(john),true).").unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e.get(&parse_atom("calls(john)").unwrap()), Some(true));
        assert!(parse_evidence("").unwrap().is_empty());
        assert_eq!(
            parse_evidence("evidence(a,true). evidence(a,false)."),
            Err(Error::ConflictingEvidence("a".into()))
        );
        assert!(parse_evidence("a :- b.").is_err());
        assert!(parse_evidence("evidence(a,maybe).").is_err());
    }

    #[test]
    fn dataset_blocks() {
        let text = "a,true\nb(1),false.\n---\nevidence(a,false).\n---\n";
        let d = parse_dataset(text).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d[0].len(), 2);
        assert_eq!(d[1].get(&Atom::prop("a")), Some(false));
        assert!(d[2].is_empty());
        assert_eq!(parse_dataset(&format_dataset(&d)).unwrap(), d);
        assert!(parse_dataset("").unwrap().is_empty());
        assert!(parse_dataset("a,perhaps").is_err());
    }

    #[test]
    fn quoted_and_numeric_terms() {
        let p = parse_program("e('Node A', 12).\nf(g(h)).").unwrap();
        assert_eq!(p.rules[0].head.args[0], Term::Const("Node A".into()));
        assert_eq!(p.rules[0].head.args[1], Term::Const("12".into()));
        assert_eq!(parse_program(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn anonymous_variables_are_distinct() {
        let p = parse_program("p(X) :- q(X, _), r(_, X).\nq(1,2).\nr(3,1).").unwrap();
        let vars: Vec<_> = p.rules[0].body.iter().flat_map(|l| l.atom.variables()).collect();
        assert_eq!(vars, vec!["X", "_1", "_2", "X"]);
        assert_eq!(parse_program(&p.to_string()).unwrap(), p);
        let p = parse_program("p(X) :- q(X, _1), r(_).\nq(1,2).\nr(3).").unwrap();
        assert_ne!(p.rules[0].body[0].atom.args[1], p.rules[0].body[1].atom.args[0]);
    }
}
