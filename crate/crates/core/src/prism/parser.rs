//! Recursive-descent parser for the PRISM subset. The expression grammar is
//! shared with the property parser.

use std::collections::{BTreeMap, HashMap};

use super::ast::*;
use super::expr::{BinOp, Expr, Func, ValueType};
use crate::lexer::{tokenize, LexError, Token, TokenKind};
use crate::model::ModelKind;
use crate::number::parse_rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("{line}:{column}: syntax error: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        line: usize,
        column: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("{line}:{column}: duplicate identifier `{name}`")]
    DuplicateIdentifier {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("{line}:{column}: unknown model kind `{found}`")]
    UnknownModelKind {
        found: String,
        line: usize,
        column: usize,
    },
    #[error("{line}:{column}: unsupported feature: {feature}")]
    Unsupported {
        feature: String,
        line: usize,
        column: usize,
    },
    #[error("{line}:{column}: {message}")]
    Invalid {
        message: String,
        line: usize,
        column: usize,
    },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Lex(e) => (e.line, e.column),
            ParseError::Syntax { line, column, .. }
            | ParseError::DuplicateIdentifier { line, column, .. }
            | ParseError::UnknownModelKind { line, column, .. }
            | ParseError::Unsupported { line, column, .. }
            | ParseError::Invalid { line, column, .. } => (*line, *column),
        }
    }
}

const RESERVED: &[&str] = &[
    "const", "int", "double", "bool", "formula", "label", "module", "endmodule", "rewards",
    "endrewards", "init", "endinit", "true", "false", "global", "system", "endsystem", "dtmc",
    "ctmc", "mdp", "ma",
];

pub(crate) struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    /// Whether `"label"` atoms are accepted inside expressions.
    pub(crate) allow_labels: bool,
}

impl Parser {
    pub(crate) fn new(tokens: Vec<Token>) -> Self {
        Parser {
            tokens,
            pos: 0,
            allow_labels: false,
        }
    }

    pub(crate) fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    pub(crate) fn peek_at(&self, offset: usize) -> &Token {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i]
    }

    pub(crate) fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    pub(crate) fn is_sym(&self, sym: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Sym(s) if *s == sym)
    }

    pub(crate) fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(s) if s == kw)
    }

    pub(crate) fn eat_sym(&mut self, sym: &str) -> bool {
        if self.is_sym(sym) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub(crate) fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub(crate) fn error(&self, expected: &[&str]) -> ParseError {
        let t = self.peek();
        ParseError::Syntax {
            line: t.line,
            column: t.column,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.kind.to_string(),
        }
    }

    pub(crate) fn invalid(&self, token: &Token, message: impl Into<String>) -> ParseError {
        ParseError::Invalid {
            message: message.into(),
            line: token.line,
            column: token.column,
        }
    }

    pub(crate) fn unsupported(&self, feature: impl Into<String>) -> ParseError {
        let t = self.peek();
        ParseError::Unsupported {
            feature: feature.into(),
            line: t.line,
            column: t.column,
        }
    }

    pub(crate) fn expect_sym(&mut self, sym: &str) -> Result<Token, ParseError> {
        if self.is_sym(sym) {
            Ok(self.advance())
        } else {
            Err(self.error(&[&format!("`{sym}`")]))
        }
    }

    pub(crate) fn expect_keyword(&mut self, kw: &str) -> Result<Token, ParseError> {
        if self.is_keyword(kw) {
            Ok(self.advance())
        } else {
            Err(self.error(&[&format!("`{kw}`")]))
        }
    }

    pub(crate) fn expect_ident(&mut self) -> Result<(String, Token), ParseError> {
        match &self.peek().kind {
            TokenKind::Ident(name) if !RESERVED.contains(&name.as_str()) => {
                let name = name.clone();
                Ok((name, self.advance()))
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    pub(crate) fn expect_string(&mut self) -> Result<(String, Token), ParseError> {
        match &self.peek().kind {
            TokenKind::Str(s) => {
                let s = s.clone();
                Ok((s, self.advance()))
            }
            _ => Err(self.error(&["quoted name"])),
        }
    }

    pub(crate) fn parse_expression(&mut self) -> Result<Expr, ParseError> {
        let cond = self.parse_iff()?;
        if self.eat_sym("?") {
            let then = self.parse_expression()?;
            self.expect_sym(":")?;
            let otherwise = self.parse_expression()?;
            return Ok(Expr::Ite(Box::new(cond), Box::new(then), Box::new(otherwise)));
        }
        Ok(cond)
    }

    fn parse_iff(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_implies()?;
        while self.eat_sym("<=>") {
            let rhs = self.parse_implies()?;
            lhs = Expr::binary(BinOp::Iff, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_implies(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.parse_or()?;
        if self.eat_sym("=>") {
            let rhs = self.parse_implies()?;
            return Ok(Expr::binary(BinOp::Implies, lhs, rhs));
        }
        Ok(lhs)
    }

    fn parse_or(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_and()?;
        while self.is_sym("|") {
            self.advance();
            let rhs = self.parse_and()?;
            lhs = Expr::binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_not()?;
        while self.eat_sym("&") {
            let rhs = self.parse_not()?;
            lhs = Expr::binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_not(&mut self) -> Result<Expr, ParseError> {
        if self.eat_sym("!") {
            return Ok(Expr::not(self.parse_not()?));
        }
        self.parse_relation()
    }

    fn parse_relation(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.parse_additive()?;
        let op = match &self.peek().kind {
            TokenKind::Sym("=") => BinOp::Eq,
            TokenKind::Sym("!=") => BinOp::Ne,
            TokenKind::Sym("<") => BinOp::Lt,
            TokenKind::Sym("<=") => BinOp::Le,
            TokenKind::Sym(">") => BinOp::Gt,
            TokenKind::Sym(">=") => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.advance();
        let rhs = self.parse_additive()?;
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn parse_additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_multiplicative()?;
        loop {
            let op = if self.is_sym("+") {
                BinOp::Add
            } else if self.is_sym("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            self.advance();
            let rhs = self.parse_multiplicative()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn parse_multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = if self.is_sym("*") {
                BinOp::Mul
            } else if self.is_sym("/") {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            self.advance();
            let rhs = self.parse_unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_sym("-") {
            return Ok(Expr::Neg(Box::new(self.parse_unary()?)));
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<Expr, ParseError> {
        let token = self.peek().clone();
        match &token.kind {
            TokenKind::Int(text) => {
                self.advance();
                text.parse::<i64>()
                    .map(Expr::Int)
                    .map_err(|_| self.invalid(&token, format!("integer literal `{text}` out of range")))
            }
            TokenKind::Real(text) => {
                self.advance();
                parse_rational(text)
                    .map(Expr::Real)
                    .map_err(|e| self.invalid(&token, e.to_string()))
            }
            TokenKind::Str(name) if self.allow_labels => {
                self.advance();
                Ok(Expr::Label(name.clone()))
            }
            TokenKind::Sym("(") => {
                self.advance();
                let e = self.parse_expression()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            TokenKind::Ident(name) if name == "true" => {
                self.advance();
                Ok(Expr::Bool(true))
            }
            TokenKind::Ident(name) if name == "false" => {
                self.advance();
                Ok(Expr::Bool(false))
            }
            TokenKind::Ident(name) if Func::from_name(name).is_some() && self.peek_at(1).kind == TokenKind::Sym("(") => {
                let func = Func::from_name(name).unwrap();
                self.advance();
                self.advance();
                let mut args = vec![self.parse_expression()?];
                while self.eat_sym(",") {
                    args.push(self.parse_expression()?);
                }
                self.expect_sym(")")?;
                let (lo, hi) = func.arity();
                if args.len() < lo || args.len() > hi {
                    return Err(self.invalid(
                        &token,
                        format!("{} takes {} argument(s), got {}", func.name(), lo, args.len()),
                    ));
                }
                Ok(Expr::Call(func, args))
            }
            TokenKind::Ident(name) if !RESERVED.contains(&name.as_str()) => {
                self.advance();
                Ok(Expr::Ident(name.clone()))
            }
            _ => Err(self.error(&["expression"])),
        }
    }
}

/// Parses a PRISM program. Module renamings are expanded by substituting
/// identifier tokens of the renamed module's body.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(text)?;
    ProgramParser::new(tokens).parse()
}

struct ProgramParser {
    p: Parser,
    /// Token bodies of parsed modules, for renaming.
    bodies: HashMap<String, Vec<Token>>,
    /// Declaration sites per identifier namespace.
    identifiers: HashMap<String, (usize, usize)>,
    module_names: HashMap<String, (usize, usize)>,
    label_names: HashMap<String, (usize, usize)>,
    reward_names: HashMap<String, (usize, usize)>,
}

fn declare(
    table: &mut HashMap<String, (usize, usize)>,
    name: &str,
    token: &Token,
) -> Result<(), ParseError> {
    if table.contains_key(name) {
        return Err(ParseError::DuplicateIdentifier {
            name: name.to_string(),
            line: token.line,
            column: token.column,
        });
    }
    table.insert(name.to_string(), (token.line, token.column));
    Ok(())
}

impl ProgramParser {
    fn new(tokens: Vec<Token>) -> Self {
        ProgramParser {
            p: Parser::new(tokens),
            bodies: HashMap::new(),
            identifiers: HashMap::new(),
            module_names: HashMap::new(),
            label_names: HashMap::new(),
            reward_names: HashMap::new(),
        }
    }

    fn parse(mut self) -> Result<Program, ParseError> {
        let model_kind = self.parse_model_kind()?;
        let mut program = Program {
            model_kind,
            constants: Vec::new(),
            formulas: Vec::new(),
            modules: Vec::new(),
            init: None,
            labels: Vec::new(),
            reward_structs: Vec::new(),
        };
        while !self.p.at_eof() {
            if self.p.is_keyword("const") {
                program.constants.push(self.parse_constant()?);
            } else if self.p.is_keyword("formula") {
                program.formulas.push(self.parse_formula()?);
            } else if self.p.is_keyword("label") {
                program.labels.push(self.parse_label()?);
            } else if self.p.is_keyword("module") {
                program.modules.push(self.parse_module()?);
            } else if self.p.is_keyword("rewards") {
                program.reward_structs.push(self.parse_rewards()?);
            } else if self.p.is_keyword("init") {
                let token = self.p.advance();
                if program.init.is_some() {
                    return Err(self.p.invalid(&token, "more than one init block"));
                }
                let e = self.p.parse_expression()?;
                self.p.expect_keyword("endinit")?;
                program.init = Some(e);
            } else if self.p.is_keyword("global") {
                return Err(self.p.unsupported("global variables"));
            } else if self.p.is_keyword("system") {
                return Err(self.p.unsupported("system ... endsystem composition"));
            } else {
                return Err(self.p.error(&["`const`", "`formula`", "`label`", "`module`", "`rewards`", "`init`"]));
            }
        }
        if program.init.is_some() {
            if let Some(v) = program.variables().find(|v| v.init.is_some()) {
                return Err(ParseError::Invalid {
                    message: format!("variable `{}` has an init value although an init block is present", v.name),
                    line: 0,
                    column: 0,
                });
            }
        }
        Ok(program)
    }

    fn parse_model_kind(&mut self) -> Result<ModelKind, ParseError> {
        let token = self.p.peek().clone();
        let kind = match &token.kind {
            TokenKind::Ident(k) => match k.as_str() {
                "dtmc" | "probabilistic" => ModelKind::Dtmc,
                "ctmc" | "stochastic" => ModelKind::Ctmc,
                "mdp" | "nondeterministic" => ModelKind::Mdp,
                "ma" | "markovautomaton" => ModelKind::Ma,
                "const" | "module" | "formula" | "label" | "rewards" | "init" => {
                    return Err(self.p.error(&["model kind"]))
                }
                other => {
                    return Err(ParseError::UnknownModelKind {
                        found: other.to_string(),
                        line: token.line,
                        column: token.column,
                    })
                }
            },
            _ => return Err(self.p.error(&["model kind"])),
        };
        self.p.advance();
        Ok(kind)
    }

    fn parse_constant(&mut self) -> Result<Constant, ParseError> {
        self.p.expect_keyword("const")?;
        let ty = if self.p.eat_keyword("int") {
            ValueType::Int
        } else if self.p.eat_keyword("double") {
            ValueType::Double
        } else if self.p.eat_keyword("bool") {
            ValueType::Bool
        } else {
            ValueType::Int
        };
        let (name, token) = self.p.expect_ident()?;
        declare(&mut self.identifiers, &name, &token)?;
        let value = if self.p.eat_sym("=") {
            Some(self.p.parse_expression()?)
        } else {
            None
        };
        self.p.expect_sym(";")?;
        Ok(Constant { name, ty, value })
    }

    fn parse_formula(&mut self) -> Result<Formula, ParseError> {
        self.p.expect_keyword("formula")?;
        let (name, token) = self.p.expect_ident()?;
        declare(&mut self.identifiers, &name, &token)?;
        self.p.expect_sym("=")?;
        let body = self.p.parse_expression()?;
        self.p.expect_sym(";")?;
        Ok(Formula { name, body })
    }

    fn parse_label(&mut self) -> Result<LabelDef, ParseError> {
        self.p.expect_keyword("label")?;
        let (name, token) = self.p.expect_string()?;
        declare(&mut self.label_names, &name, &token)?;
        self.p.expect_sym("=")?;
        let body = self.p.parse_expression()?;
        self.p.expect_sym(";")?;
        Ok(LabelDef { name, body })
    }

    fn parse_module(&mut self) -> Result<Module, ParseError> {
        self.p.expect_keyword("module")?;
        let (name, name_token) = self.p.expect_ident()?;
        declare(&mut self.module_names, &name, &name_token)?;
        if self.p.eat_sym("=") {
            return self.parse_renamed_module(name);
        }
        let start = self.p.pos;
        let mut depth_guard = 0usize;
        while !self.p.is_keyword("endmodule") {
            if self.p.at_eof() || self.p.is_keyword("module") {
                return Err(self.p.error(&["`endmodule`"]));
            }
            self.p.advance();
            depth_guard += 1;
        }
        let mut body: Vec<Token> = self.p.tokens[start..start + depth_guard].to_vec();
        body.push(self.p.expect_keyword("endmodule")?);
        let eof = self.p.tokens.last().unwrap().clone();
        self.bodies.insert(name.clone(), body[..body.len() - 1].to_vec());
        body.push(Token {
            kind: TokenKind::Eof,
            ..eof
        });
        self.parse_module_body(name, body)
    }

    fn parse_renamed_module(&mut self, name: String) -> Result<Module, ParseError> {
        let (source, source_token) = self.p.expect_ident()?;
        let body = self
            .bodies
            .get(&source)
            .cloned()
            .ok_or_else(|| self.p.invalid(&source_token, format!("unknown module `{source}`")))?;
        self.p.expect_sym("[")?;
        let mut renaming: BTreeMap<String, String> = BTreeMap::new();
        loop {
            let (from, from_token) = self.p.expect_ident()?;
            self.p.expect_sym("=")?;
            let (to, _) = self.p.expect_ident()?;
            if renaming.insert(from.clone(), to).is_some() {
                return Err(self.p.invalid(&from_token, format!("`{from}` renamed twice")));
            }
            if !self.p.eat_sym(",") {
                break;
            }
        }
        self.p.expect_sym("]")?;
        let end = self.p.expect_keyword("endmodule")?;
        let eof = self.p.tokens.last().unwrap().clone();
        let mut renamed: Vec<Token> = body
            .iter()
            .map(|t| match &t.kind {
                TokenKind::Ident(id) => match renaming.get(id) {
                    Some(new) => Token {
                        kind: TokenKind::Ident(new.clone()),
                        ..t.clone()
                    },
                    None => t.clone(),
                },
                _ => t.clone(),
            })
            .collect();
        self.bodies.insert(name.clone(), renamed.clone());
        renamed.push(end);
        renamed.push(Token {
            kind: TokenKind::Eof,
            ..eof
        });
        self.parse_module_body(name, renamed)
    }

    fn parse_module_body(&mut self, name: String, tokens: Vec<Token>) -> Result<Module, ParseError> {
        let outer = std::mem::replace(&mut self.p, Parser::new(tokens));
        let result = self.parse_module_items(name);
        self.p = outer;
        result
    }

    fn parse_module_items(&mut self, name: String) -> Result<Module, ParseError> {
        let mut module = Module {
            name,
            variables: Vec::new(),
            commands: Vec::new(),
        };
        while !self.p.is_keyword("endmodule") {
            let is_var = matches!(self.p.peek().kind, TokenKind::Ident(_))
                && self.p.peek_at(1).kind == TokenKind::Sym(":");
            if is_var {
                let var = self.parse_variable()?;
                module.variables.push(var);
            } else {
                let cmd = self.parse_command()?;
                module.commands.push(cmd);
            }
        }
        Ok(module)
    }

    fn parse_variable(&mut self) -> Result<Variable, ParseError> {
        let (name, token) = self.p.expect_ident()?;
        declare(&mut self.identifiers, &name, &token)?;
        self.p.expect_sym(":")?;
        let ty = if self.p.eat_keyword("bool") {
            VariableType::Bool
        } else if self.p.eat_sym("[") {
            let low = self.p.parse_expression()?;
            self.p.expect_sym("..")?;
            let high = self.p.parse_expression()?;
            self.p.expect_sym("]")?;
            VariableType::Range { low, high }
        } else if self.p.is_keyword("int") || self.p.is_keyword("clock") {
            return Err(self.p.unsupported("unbounded integer and clock variables"));
        } else {
            return Err(self.p.error(&["`bool`", "`[`"]));
        };
        let init = if self.p.eat_keyword("init") {
            Some(self.p.parse_expression()?)
        } else {
            None
        };
        self.p.expect_sym(";")?;
        Ok(Variable { name, ty, init })
    }

    fn parse_command(&mut self) -> Result<Command, ParseError> {
        let action = if self.p.eat_sym("[") {
            if self.p.eat_sym("]") {
                CommandAction::Silent
            } else {
                let (a, _) = self.p.expect_ident()?;
                self.p.expect_sym("]")?;
                CommandAction::Named(a)
            }
        } else if self.p.eat_sym("<") {
            self.p.expect_sym(">")?;
            CommandAction::Markovian
        } else {
            return Err(self.p.error(&["variable declaration", "`[`", "`<>`"]));
        };
        let guard = self.p.parse_expression()?;
        self.p.expect_sym("->")?;
        let mut updates = vec![self.parse_update()?];
        while self.p.eat_sym("+") {
            updates.push(self.parse_update()?);
        }
        self.p.expect_sym(";")?;
        if updates.len() > 1 && updates.iter().any(|u| u.weight.is_none()) {
            return Err(self.p.error(&["probability for every update"]));
        }
        Ok(Command {
            action,
            guard,
            updates,
        })
    }

    fn starts_assignments(&self) -> bool {
        (self.p.is_sym("(")
            && matches!(self.p.peek_at(1).kind, TokenKind::Ident(_))
            && self.p.peek_at(2).kind == TokenKind::Sym("'"))
            || (self.p.is_keyword("true")
                && matches!(self.p.peek_at(1).kind, TokenKind::Sym(";") | TokenKind::Sym("+")))
    }

    fn parse_update(&mut self) -> Result<Update, ParseError> {
        let weight = if self.starts_assignments() {
            None
        } else {
            let w = self.p.parse_expression()?;
            self.p.expect_sym(":")?;
            Some(w)
        };
        let mut assignments = Vec::new();
        if !self.p.eat_keyword("true") {
            loop {
                self.p.expect_sym("(")?;
                let (variable, token) = self.p.expect_ident()?;
                self.p.expect_sym("'")?;
                self.p.expect_sym("=")?;
                let value = self.p.parse_expression()?;
                self.p.expect_sym(")")?;
                if assignments.iter().any(|a: &Assignment| a.variable == variable) {
                    return Err(self.p.invalid(&token, format!("`{variable}` assigned twice in one update")));
                }
                assignments.push(Assignment { variable, value });
                if !self.p.eat_sym("&") {
                    break;
                }
            }
        }
        Ok(Update {
            weight,
            assignments,
        })
    }

    fn parse_rewards(&mut self) -> Result<RewardStruct, ParseError> {
        self.p.expect_keyword("rewards")?;
        let name = match &self.p.peek().kind {
            TokenKind::Str(_) => {
                let (n, token) = self.p.expect_string()?;
                declare(&mut self.reward_names, &n, &token)?;
                Some(n)
            }
            _ => None,
        };
        let mut items = Vec::new();
        while !self.p.eat_keyword("endrewards") {
            if self.p.at_eof() {
                return Err(self.p.error(&["`endrewards`"]));
            }
            let action = if self.p.eat_sym("[") {
                if self.p.eat_sym("]") {
                    Some(String::new())
                } else {
                    let (a, _) = self.p.expect_ident()?;
                    self.p.expect_sym("]")?;
                    Some(a)
                }
            } else {
                None
            };
            let guard = self.p.parse_expression()?;
            self.p.expect_sym(":")?;
            let value = self.p.parse_expression()?;
            self.p.expect_sym(";")?;
            items.push(RewardItem {
                action,
                guard,
                value,
            });
        }
        Ok(RewardStruct { name, items })
    }
}

/// Parses a standalone expression, e.g. a constant definition on the
/// command line.
pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(tokenize(text)?);
    let e = p.parse_expression()?;
    if !p.at_eof() {
        return Err(p.error(&["end of expression"]));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::rational;

    const MINIMAL: &str = "dtmc module m x:[0..1] init 0; [] x=0 -> 1:(x'=1); endmodule";

    #[test]
    fn minimal_program() {
        let p = parse_program(MINIMAL).unwrap();
        assert_eq!(p.model_kind, ModelKind::Dtmc);
        assert_eq!(p.modules.len(), 1);
        assert_eq!(p.modules[0].commands.len(), 1);
        assert_eq!(p.modules[0].variables[0].name, "x");
    }

    #[test]
    fn unknown_model_kind() {
        let err = parse_program("pta module m endmodule").unwrap_err();
        assert!(matches!(err, ParseError::UnknownModelKind { ref found, .. } if found == "pta"));
    }

    #[test]
    fn syntax_error_reports_position_and_expectation() {
        let err = parse_program("dtmc\nmodule m\n x:[0..1] init 0;\n [] x=0 -> 1:(x'=1)\nendmodule").unwrap_err();
        match err {
            ParseError::Syntax {
                line,
                column,
                expected,
                found,
            } => {
                assert_eq!((line, column), (5, 1));
                assert_eq!(expected, vec!["`;`".to_string()]);
                assert!(found.contains("endmodule"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn renaming_substitutes_identifiers_simultaneously() {
        let text = "dtmc
            module p1 x1:[0..1]; [step] x1=x3 -> 0.5:(x1'=0) + 0.5:(x1'=1); endmodule
            module p2 = p1 [x1=x2, x3=x1] endmodule
            module p3 = p1 [x1=x3, x3=x2] endmodule";
        let p = parse_program(text).unwrap();
        assert_eq!(p.modules.len(), 3);
        assert_eq!(p.modules[1].variables[0].name, "x2");
        assert_eq!(p.modules[1].commands[0].guard.to_string(), "x2 = x1");
        assert_eq!(p.modules[2].commands[0].guard.to_string(), "x3 = x2");
        assert_eq!(p.modules[2].commands[0].updates[0].assignments[0].variable, "x3");
    }

    #[test]
    fn renaming_clash_is_duplicate_identifier() {
        let text = "dtmc
            module a x:[0..1]; endmodule
            module b y:[0..1]; endmodule
            module c = a [x=y] endmodule";
        let err = parse_program(text).unwrap_err();
        assert!(matches!(err, ParseError::DuplicateIdentifier { ref name, .. } if name == "y"));
    }

    #[test]
    fn renaming_unknown_module() {
        let err = parse_program("dtmc module c = a [x=y] endmodule").unwrap_err();
        assert!(err.to_string().contains("unknown module `a`"));
    }

    #[test]
    fn duplicate_constant() {
        let err = parse_program("dtmc const int N = 1; const double N; module m endmodule").unwrap_err();
        assert!(matches!(err, ParseError::DuplicateIdentifier { .. }));
    }

    #[test]
    fn undefined_constant_parses() {
        let p = parse_program("dtmc const int N; module m x:[0..N] init 0; [] x<N -> (x'=x+1); endmodule").unwrap();
        assert_eq!(p.undefined_constants().len(), 1);
    }

    #[test]
    fn constants_formulas_labels_rewards_init() {
        let text = r#"mdp
            const double p = 1/10;
            const bool flag = true;
            formula done = x=2;
            module m
                x : [0..2];
                b : bool;
                [go] !done -> p : (x'=x+1) + 1-p : true;
                [] done -> true;
            endmodule
            init x=0 | x=2 endinit
            rewards "steps"
                [go] true : 1;
                x=1 : 2.5;
            endrewards
            label "end" = done;
        "#;
        let p = parse_program(text).unwrap();
        assert_eq!(p.constants.len(), 2);
        assert_eq!(p.formulas.len(), 1);
        assert!(p.init.is_some());
        let r = p.reward_struct("steps").unwrap();
        assert_eq!(r.items[0].action.as_deref(), Some("go"));
        assert_eq!(r.items[1].action, None);
        assert_eq!(r.items[1].value, Expr::Real(rational(5, 2)));
        let cmd = &p.modules[0].commands[0];
        assert_eq!(cmd.updates.len(), 2);
        assert!(cmd.updates[1].assignments.is_empty());
        assert_eq!(p.modules[0].commands[1].updates[0].weight, None);
    }

    #[test]
    fn markovian_commands() {
        let p = parse_program("ma module m x:[0..1] init 0; <> x=0 -> 3 : (x'=1); [a] x=1 -> (x'=0); endmodule").unwrap();
        assert_eq!(p.modules[0].commands[0].action, CommandAction::Markovian);
    }

    #[test]
    fn grammar_rejections() {
        let rejects = [
            ("dtmc module m x:[0..1] init 0; [] x=0 -> 0.5:(x'=1) + (x'=0); endmodule", "missing weight"),
            ("dtmc module m x:[0..1] init 0; [] x=0 -> (x'=1) & (x'=0); endmodule", "double assignment"),
            ("dtmc module m x:int init 0; endmodule", "unbounded int"),
            ("dtmc global g:[0..1]; module m endmodule", "global"),
            ("dtmc module m x:[0..1]; [] x=0 -> (x'=1) endmodule", "missing semicolon"),
            ("dtmc const int N = ; module m endmodule", "empty constant"),
            ("dtmc label done = true;", "unquoted label"),
            ("dtmc rewards true : 1;", "unterminated rewards"),
            ("dtmc module m x:[0..1]; [] min(x) = 0 -> true; endmodule", "min arity"),
            ("dtmc init true endinit init true endinit module m endmodule", "two init blocks"),
            ("dtmc module m x:[0..1] init 0; endmodule init x=0 endinit", "init with variable init"),
            ("dtmc module m", "unterminated module"),
        ];
        for (text, why) in rejects {
            assert!(parse_program(text).is_err(), "{why} should be rejected");
        }
    }

    #[test]
    fn expression_precedence() {
        let e = parse_expression("a | b & !c = 1 + 2 * 3").unwrap();
        assert_eq!(e.to_string(), "a | b & !c = 1 + 2 * 3");
        let e = parse_expression("(a | b) & c").unwrap();
        assert_eq!(e.to_string(), "(a | b) & c");
        let e = parse_expression("1 - (2 - 3)").unwrap();
        assert_eq!(e.to_string(), "1 - (2 - 3)");
        let e = parse_expression("x > 0 ? 1 : y < 2 ? 3 : 4").unwrap();
        assert!(matches!(e, Expr::Ite(..)));
        assert_eq!(parse_expression(&e.to_string()).unwrap(), e);
        let e = parse_expression("a => b => c").unwrap();
        assert_eq!(parse_expression(&e.to_string()).unwrap(), e);
        assert!(parse_expression("1 +").is_err());
        assert!(parse_expression("1 2").is_err());
    }

    #[test]
    fn printed_program_reparses_identically() {
        let text = r#"mdp
            const double p = 0.25;
            const int N;
            formula f = x + 1;
            module m
                x : [0..N] init 0;
                [a] x < N & !(x = 1) -> p : (x'=x+1) + 1-p : (x'=max(0, x-1));
                [] x = N -> true;
            endmodule
            module n = m [x=y, a=b] endmodule
            rewards "r" [b] true : 1; x > 0 : x / 2; endrewards
            label "top" = x = N;
        "#;
        let p = parse_program(text).unwrap();
        let printed = p.to_string();
        let reparsed = parse_program(&printed).unwrap();
        assert_eq!(reparsed, p, "{printed}");
    }
}
