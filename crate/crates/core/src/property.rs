//! Probability and reward properties in PRISM style.
//!
//! ```text
//! file      := (line '\n')*             one property per line, `//` comments
//! line      := ('"' name '"' ':')? ('1' '-')? op ';'?
//! op        := P dir? query '[' path ']'
//!            | R ('{' '"' reward '"' '}')? dir? query '[' 'F' state ']'
//! dir       := min | max                written as Pmin, Rmax, R{"r"}min, ...
//! query     := '=?' | ('<' | '<=' | '>' | '>=') number
//! path      := 'X' state | 'F' bound? state | 'G' bound? state
//!            | state 'U' bound? state
//! bound     := '<=' number
//! state     := expression over variables, constants and "label" atoms
//! ```
//!
//! A `1 -` prefix marks the complement produced when `G` is rewritten into
//! `F`; it only appears in printed desugared properties.

use std::fmt;

use crate::lexer::{tokenize, TokenKind};
use crate::number::{format_rational, Rational};
use crate::prism::parser::{ParseError, Parser};
use crate::prism::{BinOp, Expr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Min,
    Max,
}

impl Direction {
    pub fn flipped(self) -> Direction {
        match self {
            Direction::Min => Direction::Max,
            Direction::Max => Direction::Min,
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Direction::Min => "min",
            Direction::Max => "max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparison {
    Less,
    LessEqual,
    Greater,
    GreaterEqual,
}

impl Comparison {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Less => "<",
            Comparison::LessEqual => "<=",
            Comparison::Greater => ">",
            Comparison::GreaterEqual => ">=",
        }
    }

    pub fn holds<T: PartialOrd>(self, value: &T, threshold: &T) -> bool {
        match self {
            Comparison::Less => value < threshold,
            Comparison::LessEqual => value <= threshold,
            Comparison::Greater => value > threshold,
            Comparison::GreaterEqual => value >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bound {
    pub comparison: Comparison,
    pub threshold: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operator {
    Probability,
    /// Expected reward; `None` selects the model's only reward structure.
    Reward(Option<String>),
}

/// Path formulas. `bound` is a step bound on discrete-time models and a time
/// bound on CTMCs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PathFormula {
    Next(Expr),
    Until { left: Expr, right: Expr, bound: Option<Rational> },
    Eventually { target: Expr, bound: Option<Rational> },
    Globally { target: Expr, bound: Option<Rational> },
    /// Indicator of the state formula at the evaluated state.
    Holds(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Property {
    pub name: Option<String>,
    pub operator: Operator,
    pub direction: Option<Direction>,
    pub bound: Option<Bound>,
    pub path: PathFormula,
    /// The reported value is one minus the value of the formula.
    pub complement: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PropertyError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: ParseError },
}

impl PropertyError {
    pub fn parse_error(&self) -> &ParseError {
        match self {
            PropertyError::Parse { source, .. } => source,
        }
    }

    pub fn is_unsupported(&self) -> bool {
        matches!(self.parse_error(), ParseError::Unsupported { .. })
    }
}

const UNSUPPORTED_OPERATORS: &[(&str, &str)] = &[
    ("multi", "multi-objective queries"),
    ("S", "steady-state operator S"),
    ("LRA", "long-run average operator LRA"),
    ("quantile", "quantile queries"),
    ("T", "time operator T"),
];

/// Parses one property per non-empty line.
pub fn parse_properties(text: &str) -> Result<Vec<Property>, PropertyError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let tokens = tokenize(line).map_err(|e| PropertyError::Parse {
            line: i + 1,
            source: e.into(),
        })?;
        if tokens.len() == 1 {
            continue;
        }
        let mut p = Parser::new(tokens);
        p.allow_labels = true;
        while !p.at_eof() {
            let property = parse_line(&mut p).map_err(|source| PropertyError::Parse { line: i + 1, source })?;
            out.push(property);
        }
    }
    Ok(out)
}

/// Parses a single property.
pub fn parse_property(text: &str) -> Result<Property, PropertyError> {
    let mut all = parse_properties(&text.replace('\n', " "))?;
    match all.len() {
        1 => Ok(all.remove(0)),
        _ => Err(PropertyError::Parse {
            line: 1,
            source: ParseError::Syntax {
                line: 1,
                column: 1,
                expected: vec!["property".into()],
                found: "end of input".into(),
            },
        }),
    }
}

fn parse_line(p: &mut Parser) -> Result<Property, ParseError> {
    let mut name = None;
    if matches!(p.peek().kind, TokenKind::Str(_)) && p.peek_at(1).kind == TokenKind::Sym(":") {
        name = Some(p.expect_string()?.0);
        p.advance();
    }
    let mut complement = false;
    if p.peek().kind == TokenKind::Int("1".into()) && p.peek_at(1).kind == TokenKind::Sym("-") {
        p.advance();
        p.advance();
        complement = true;
    }
    let mut property = parse_operator(p)?;
    property.name = name;
    property.complement = complement;
    if !p.eat_sym(";") && !p.at_eof() {
        if p.is_sym("|") && p.peek_at(1).kind == TokenKind::Sym("|") {
            return Err(p.unsupported("conditional probabilities"));
        }
        return Err(p.error(&["end of property"]));
    }
    Ok(property)
}

fn parse_operator(p: &mut Parser) -> Result<Property, ParseError> {
    let TokenKind::Ident(head) = p.peek().kind.clone() else {
        return Err(p.error(&["`P`", "`R`"]));
    };
    if let Some((_, feature)) = UNSUPPORTED_OPERATORS.iter().find(|(k, _)| head == *k || head.starts_with(&format!("{k}m"))) {
        return Err(p.unsupported(*feature));
    }
    let (operator, mut direction) = match head.as_str() {
        "P" => (Operator::Probability, None),
        "Pmin" => (Operator::Probability, Some(Direction::Min)),
        "Pmax" => (Operator::Probability, Some(Direction::Max)),
        "R" => (Operator::Reward(None), None),
        "Rmin" => (Operator::Reward(None), Some(Direction::Min)),
        "Rmax" => (Operator::Reward(None), Some(Direction::Max)),
        _ => return Err(p.error(&["`P`", "`R`"])),
    };
    p.advance();
    let operator = match operator {
        Operator::Reward(_) if direction.is_none() && p.eat_sym("{") => {
            let (reward, _) = p.expect_string()?;
            p.expect_sym("}")?;
            if p.eat_keyword("min") {
                direction = Some(Direction::Min);
            } else if p.eat_keyword("max") {
                direction = Some(Direction::Max);
            }
            Operator::Reward(Some(reward))
        }
        other => other,
    };
    let bound = if p.eat_sym("=?") {
        None
    } else {
        let comparison = match &p.peek().kind {
            TokenKind::Sym("<") => Comparison::Less,
            TokenKind::Sym("<=") => Comparison::LessEqual,
            TokenKind::Sym(">") => Comparison::Greater,
            TokenKind::Sym(">=") => Comparison::GreaterEqual,
            _ => return Err(p.error(&["`=?`", "comparison"])),
        };
        p.advance();
        Some(Bound {
            comparison,
            threshold: parse_number(p)?,
        })
    };
    p.expect_sym("[")?;
    let path = if operator == Operator::Probability {
        parse_path(p)?
    } else {
        parse_reward_path(p)?
    };
    p.expect_sym("]")?;
    Ok(Property {
        name: None,
        operator,
        direction,
        bound,
        path,
        complement: false,
    })
}

fn parse_number(p: &mut Parser) -> Result<Rational, ParseError> {
    let token = p.peek().clone();
    match &token.kind {
        TokenKind::Int(text) | TokenKind::Real(text) => {
            p.advance();
            let mut value = crate::number::parse_rational(text).map_err(|e| p.invalid(&token, e.to_string()))?;
            if p.is_sym("/") && matches!(p.peek_at(1).kind, TokenKind::Int(_)) {
                p.advance();
                let denominator = parse_number(p)?;
                if crate::number::Field::is_zero(&denominator) {
                    return Err(p.invalid(&token, "division by zero in threshold"));
                }
                value /= denominator;
            }
            Ok(value)
        }
        _ => Err(p.error(&["number"])),
    }
}

fn parse_bound(p: &mut Parser) -> Result<Option<Rational>, ParseError> {
    if p.is_sym("[") {
        return Err(p.unsupported("interval bounds"));
    }
    if p.is_sym("{") {
        return Err(p.unsupported("cost-bounded path formulas"));
    }
    if p.eat_sym("<=") {
        return Ok(Some(parse_number(p)?));
    }
    if p.is_sym("<") || p.is_sym(">") || p.is_sym(">=") {
        return Err(p.error(&["`<=`"]));
    }
    Ok(None)
}

fn parse_path(p: &mut Parser) -> Result<PathFormula, ParseError> {
    if p.is_keyword("X") {
        p.advance();
        return Ok(PathFormula::Next(parse_state(p)?));
    }
    if p.is_keyword("F") || p.is_keyword("G") {
        let globally = p.is_keyword("G");
        p.advance();
        let bound = parse_bound(p)?;
        let target = parse_state(p)?;
        return Ok(if globally {
            PathFormula::Globally { target, bound }
        } else {
            PathFormula::Eventually { target, bound }
        });
    }
    if p.is_keyword("C") || p.is_keyword("I") {
        return Err(p.unsupported("cumulative and instantaneous reward formulas"));
    }
    let left = parse_state(p)?;
    if p.eat_keyword("U") {
        let bound = parse_bound(p)?;
        let right = parse_state(p)?;
        return Ok(PathFormula::Until { left, right, bound });
    }
    if p.is_keyword("W") || p.is_keyword("R") {
        return Err(p.unsupported("weak until and release"));
    }
    Err(p.error(&["`U`"]))
}

fn parse_reward_path(p: &mut Parser) -> Result<PathFormula, ParseError> {
    if p.is_keyword("F") {
        p.advance();
        if p.is_sym("<=") || p.is_sym("[") || p.is_sym("{") {
            return Err(p.unsupported("bounded reachability rewards"));
        }
        return Ok(PathFormula::Eventually {
            target: parse_state(p)?,
            bound: None,
        });
    }
    if p.is_keyword("C") || p.is_keyword("I") || p.is_keyword("S") || p.is_keyword("LRA") {
        return Err(p.unsupported("cumulative, instantaneous and long-run reward formulas"));
    }
    Err(p.error(&["`F`"]))
}

fn starts_nested_operator(p: &Parser, at: usize) -> bool {
    let TokenKind::Ident(head) = &p.peek_at(at).kind else {
        return false;
    };
    if !matches!(head.as_str(), "P" | "Pmin" | "Pmax" | "R" | "Rmin" | "Rmax" | "S" | "LRA") {
        return false;
    }
    match &p.peek_at(at + 1).kind {
        TokenKind::Sym("=?") | TokenKind::Sym("{") => true,
        TokenKind::Sym("<") | TokenKind::Sym("<=") | TokenKind::Sym(">") | TokenKind::Sym(">=") => {
            p.peek_at(at + 3).kind == TokenKind::Sym("[")
        }
        _ => false,
    }
}

fn parse_state(p: &mut Parser) -> Result<Expr, ParseError> {
    let mut i = 0;
    loop {
        match &p.peek_at(i).kind {
            TokenKind::Eof | TokenKind::Sym("]") => break,
            TokenKind::Sym("|") if p.peek_at(i + 1).kind == TokenKind::Sym("|") => {
                return Err(p.unsupported("conditional probabilities"));
            }
            _ if starts_nested_operator(p, i) => {
                return Err(p.unsupported("nested probability or reward operators"));
            }
            _ => i += 1,
        }
    }
    let e = p.parse_expression()?;
    let mut ids = Vec::new();
    e.identifiers(&mut ids);
    if ids.iter().any(|i| matches!(i.as_str(), "U" | "F" | "G" | "X")) {
        return Err(p.error(&["state formula"]));
    }
    Ok(e)
}

/// Rewrites `F` into `true U`, `G` into the complement of `F !`, and zero
/// bounds into state indicators; folds literal `true`/`false` atoms.
pub fn desugar(property: &Property) -> Property {
    let mut out = property.clone();
    out.path = match &property.path {
        PathFormula::Next(e) => PathFormula::Next(simplify(e)),
        PathFormula::Holds(e) => PathFormula::Holds(simplify(e)),
        PathFormula::Until { left, right, bound } => until(simplify(left), simplify(right), bound.clone()),
        PathFormula::Eventually { target, bound } => {
            if matches!(property.operator, Operator::Reward(_)) {
                PathFormula::Eventually {
                    target: simplify(target),
                    bound: bound.clone(),
                }
            } else {
                until(Expr::Bool(true), simplify(target), bound.clone())
            }
        }
        PathFormula::Globally { target, bound } => {
            out.complement = !out.complement;
            out.direction = out.direction.map(Direction::flipped);
            until(Expr::Bool(true), simplify(&Expr::not(target.clone())), bound.clone())
        }
    };
    out
}

fn until(left: Expr, right: Expr, bound: Option<Rational>) -> PathFormula {
    match bound {
        Some(b) if crate::number::Field::is_zero(&b) => PathFormula::Holds(right),
        bound => PathFormula::Until { left, right, bound },
    }
}

/// Folds boolean literals out of connectives.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Not(inner) => match simplify(inner) {
            Expr::Bool(b) => Expr::Bool(!b),
            Expr::Not(x) => *x,
            other => Expr::not(other),
        },
        Expr::Binary(op @ (BinOp::And | BinOp::Or), a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            match (op, &a, &b) {
                (BinOp::And, Expr::Bool(true), _) => b,
                (BinOp::And, _, Expr::Bool(true)) => a,
                (BinOp::And, Expr::Bool(false), _) | (BinOp::And, _, Expr::Bool(false)) => Expr::Bool(false),
                (BinOp::Or, Expr::Bool(false), _) => b,
                (BinOp::Or, _, Expr::Bool(false)) => a,
                (BinOp::Or, Expr::Bool(true), _) | (BinOp::Or, _, Expr::Bool(true)) => Expr::Bool(true),
                _ => Expr::binary(*op, a, b),
            }
        }
        Expr::Binary(op, a, b) => Expr::binary(*op, simplify(a), simplify(b)),
        other => other.clone(),
    }
}

fn write_bound(f: &mut fmt::Formatter<'_>, bound: &Option<Rational>) -> fmt::Result {
    match bound {
        Some(b) => write!(f, "<={}", number_text(b)),
        None => Ok(()),
    }
}

fn number_text(r: &Rational) -> String {
    crate::prism::expr::decimal_text(r)
        .map(|t| t.strip_suffix(".0").map(str::to_string).unwrap_or(t))
        .unwrap_or_else(|| format_rational(r))
}

/// Wraps formulas that would otherwise swallow a following `U`.
struct Operand<'a>(&'a Expr);

impl fmt::Display for Operand<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Expr::Ite(..) => write!(f, "({})", self.0),
            e => write!(f, "{e}"),
        }
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFormula::Next(e) => write!(f, "X {}", Operand(e)),
            PathFormula::Until { left, right, bound } => {
                write!(f, "{} U", Operand(left))?;
                write_bound(f, bound)?;
                write!(f, " {}", Operand(right))
            }
            PathFormula::Eventually { target, bound } => {
                f.write_str("F")?;
                write_bound(f, bound)?;
                write!(f, " {}", Operand(target))
            }
            PathFormula::Globally { target, bound } => {
                f.write_str("G")?;
                write_bound(f, bound)?;
                write!(f, " {}", Operand(target))
            }
            PathFormula::Holds(e) => write!(f, "F<=0 {}", Operand(e)),
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = &self.name {
            write!(f, "\"{n}\": ")?;
        }
        if self.complement {
            f.write_str("1 - ")?;
        }
        match &self.operator {
            Operator::Probability => f.write_str("P")?,
            Operator::Reward(None) => f.write_str("R")?,
            Operator::Reward(Some(r)) => write!(f, "R{{\"{r}\"}}")?,
        }
        if let Some(d) = self.direction {
            f.write_str(d.suffix())?;
        }
        match &self.bound {
            None => f.write_str("=?")?,
            Some(b) => write!(f, "{}{}", b.comparison.symbol(), number_text(&b.threshold))?,
        }
        write!(f, " [ {} ]", self.path)
    }
}

impl Property {
    /// Text identifying the property in reports: its name or its formula.
    pub fn display_name(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => self.to_string(),
        }
    }

    /// The state formulas of the path formula.
    pub fn state_formulas(&self) -> Vec<&Expr> {
        match &self.path {
            PathFormula::Next(e) | PathFormula::Holds(e) => vec![e],
            PathFormula::Until { left, right, .. } => vec![left, right],
            PathFormula::Eventually { target, .. } | PathFormula::Globally { target, .. } => vec![target],
        }
    }

    /// Applies `f` to every state formula.
    pub fn map_state_formulas(&self, mut f: impl FnMut(&Expr) -> Expr) -> Property {
        let mut out = self.clone();
        out.path = match &self.path {
            PathFormula::Next(e) => PathFormula::Next(f(e)),
            PathFormula::Holds(e) => PathFormula::Holds(f(e)),
            PathFormula::Until { left, right, bound } => PathFormula::Until {
                left: f(left),
                right: f(right),
                bound: bound.clone(),
            },
            PathFormula::Eventually { target, bound } => PathFormula::Eventually {
                target: f(target),
                bound: bound.clone(),
            },
            PathFormula::Globally { target, bound } => PathFormula::Globally {
                target: f(target),
                bound: bound.clone(),
            },
        };
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::rational;
    use proptest::prelude::*;

    fn one(text: &str) -> Property {
        parse_property(text).unwrap()
    }

    #[test]
    fn eventually() {
        let p = one(r#"P=? [ F "target" ]"#);
        assert_eq!(p.operator, Operator::Probability);
        assert_eq!(p.bound, None);
        assert_eq!(
            p.path,
            PathFormula::Eventually {
                target: Expr::Label("target".into()),
                bound: None
            }
        );
    }

    #[test]
    fn bounded_until_with_direction() {
        let p = one(r#"Pmax=? [ "a" U<=20 "b" ]"#);
        assert_eq!(p.direction, Some(Direction::Max));
        assert_eq!(
            p.path,
            PathFormula::Until {
                left: Expr::Label("a".into()),
                right: Expr::Label("b".into()),
                bound: Some(rational(20, 1))
            }
        );
    }

    #[test]
    fn semicolons_separate() {
        let all = parse_properties("P=?[F \"a\"]; R=?[F \"b\"];\nP>0.5[X \"a\"]").unwrap();
        assert_eq!(all.len(), 3);
        assert!(parse_properties("P=?[F \"a\"] P=?[F \"b\"]").is_err());
    }

    #[test]
    fn named_reward() {
        let p = one(r#"R{"coins"}min=? [ F "done" ]"#);
        assert_eq!(p.operator, Operator::Reward(Some("coins".into())));
        assert_eq!(p.direction, Some(Direction::Min));
        let p = one(r#"Rmax=? [ F "done" ]"#);
        assert_eq!(p.operator, Operator::Reward(None));
        assert_eq!(p.direction, Some(Direction::Max));
    }

    #[test]
    fn threshold_is_exact() {
        let p = one(r#"P<0.1 [ F "unsafe" ]"#);
        assert_eq!(
            p.bound,
            Some(Bound {
                comparison: Comparison::Less,
                threshold: rational(1, 10)
            })
        );
    }

    #[test]
    fn file_with_names_and_comments() {
        let text = "// header\n\"one\": P=? [ F \"one\" ];\n\n  // between\nPmin=? [ X s=1 & !\"done\" ]\n";
        let props = parse_properties(text).unwrap();
        assert_eq!(props.len(), 2);
        assert_eq!(props[0].name.as_deref(), Some("one"));
        assert_eq!(props[0].display_name(), "one");
        assert!(matches!(props[1].path, PathFormula::Next(_)));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_properties("P=? [ F \"a\" ]\nP=? [ F \"a\" ").unwrap_err();
        let PropertyError::Parse { line, source } = err;
        assert_eq!(line, 2);
        assert!(matches!(source, ParseError::Syntax { column: 13, .. }));
        assert!(parse_property(r#"P=?<0.5 [ F "a" ]"#).is_err());
        assert!(parse_property(r#"P [ F "a" ]"#).is_err());
        assert!(parse_property(r#"P=? [ "a" ]"#).is_err());
        assert!(parse_property(r#"Q=? [ F "a" ]"#).is_err());
    }

    #[test]
    fn unsupported_constructs_are_named() {
        for (text, needle) in [
            (r#"multi(Pmax=? [ F "a" ], Pmax=? [ F "b" ])"#, "multi-objective"),
            (r#"S=? [ "a" ]"#, "steady-state"),
            (r#"LRA=? [ "a" ]"#, "long-run"),
            (r#"P=? [ F "a" || F "b" ]"#, "conditional"),
            (r#"R=? [ C<=5 ]"#, "cumulative"),
            (r#"P=? [ F{"cost"}<=5 "a" ]"#, "cost-bounded"),
            (r#"P=? [ F P>0.5 [ F "a" ] ]"#, "nested"),
            (r#"P=? [ F[1,2] "a" ]"#, "interval"),
        ] {
            let err = parse_property(text).unwrap_err();
            assert!(err.is_unsupported(), "{text}: {err}");
            assert!(err.to_string().contains(needle), "{text}: {err}");
        }
    }

    #[test]
    fn desugaring() {
        let p = desugar(&one(r#"P=? [ F "t" ]"#));
        assert_eq!(
            p.path,
            PathFormula::Until {
                left: Expr::Bool(true),
                right: Expr::Label("t".into()),
                bound: None
            }
        );
        let g = desugar(&one(r#"Pmin=? [ G "safe" ]"#));
        assert!(g.complement);
        assert_eq!(g.direction, Some(Direction::Max));
        assert_eq!(
            g.path,
            PathFormula::Until {
                left: Expr::Bool(true),
                right: Expr::not(Expr::Label("safe".into())),
                bound: None
            }
        );
        let z = desugar(&one(r#"P=? [ F<=0 "t" ]"#));
        assert_eq!(z.path, PathFormula::Holds(Expr::Label("t".into())));
        let folded = desugar(&one(r#"P=? [ true & "a" U false | "b" ]"#));
        assert_eq!(
            folded.path,
            PathFormula::Until {
                left: Expr::Label("a".into()),
                right: Expr::Label("b".into()),
                bound: None
            }
        );
    }

    #[test]
    fn printed_desugared_form_reparses() {
        let g = desugar(&one(r#""s": Pmin>=0.9 [ G<=4 "safe" ]"#));
        assert_eq!(one(&g.to_string()), g);
    }

    fn label() -> impl Strategy<Value = Expr> {
        prop_oneof![
            Just(Expr::Label("a".into())),
            Just(Expr::Label("b".into())),
            Just(Expr::Bool(true)),
            Just(Expr::Bool(false)),
            (0i64..4).prop_map(|k| Expr::binary(BinOp::Eq, Expr::Ident("x".into()), Expr::Int(k))),
        ]
    }

    fn state_formula() -> impl Strategy<Value = Expr> {
        label().prop_recursive(3, 12, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Expr::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::binary(BinOp::And, a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::binary(BinOp::Or, a, b)),
            ]
        })
    }

    fn property() -> impl Strategy<Value = Property> {
        let path = prop_oneof![
            state_formula().prop_map(PathFormula::Next),
            (state_formula(), proptest::option::of(0i64..30)).prop_map(|(t, b)| PathFormula::Eventually {
                target: t,
                bound: b.map(|b| rational(b, 1))
            }),
            (state_formula(), proptest::option::of(0i64..30)).prop_map(|(t, b)| PathFormula::Globally {
                target: t,
                bound: b.map(|b| rational(b, 1))
            }),
            (state_formula(), state_formula(), proptest::option::of(0i64..30)).prop_map(|(l, r, b)| PathFormula::Until {
                left: l,
                right: r,
                bound: b.map(|b| rational(b, 1))
            }),
        ];
        let direction = proptest::option::of(prop_oneof![Just(Direction::Min), Just(Direction::Max)]);
        let bound = proptest::option::of((0i64..4, 1i64..9).prop_map(|(n, d)| Bound {
            comparison: Comparison::GreaterEqual,
            threshold: rational(n.min(d), d),
        }));
        (path, direction, bound, proptest::option::of("[a-z]{1,5}")).prop_map(|(path, direction, bound, name)| Property {
            name,
            operator: Operator::Probability,
            direction,
            bound,
            path,
            complement: false,
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn print_parse_roundtrip(p in property()) {
            let text = p.to_string();
            let reparsed = parse_property(&text);
            prop_assert!(reparsed.is_ok(), "{}: {:?}", text, reparsed);
            prop_assert_eq!(reparsed.unwrap(), p);
        }

        #[test]
        fn desugar_is_idempotent(p in property()) {
            let once = desugar(&p);
            prop_assert_eq!(desugar(&once), once);
        }
    }
}
