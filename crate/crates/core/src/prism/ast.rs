//! Abstract syntax of the supported PRISM subset, with a pretty-printer whose
//! output parses back to the same tree.

use std::fmt;

use super::expr::{Expr, ValueType};
use crate::model::ModelKind;

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub model_kind: ModelKind,
    pub constants: Vec<Constant>,
    pub formulas: Vec<Formula>,
    pub modules: Vec<Module>,
    /// `init … endinit` predicate over all variables.
    pub init: Option<Expr>,
    pub labels: Vec<LabelDef>,
    pub reward_structs: Vec<RewardStruct>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constant {
    pub name: String,
    pub ty: ValueType,
    pub value: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    pub name: String,
    pub body: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelDef {
    pub name: String,
    pub body: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub name: String,
    pub variables: Vec<Variable>,
    pub commands: Vec<Command>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VariableType {
    Bool,
    Range { low: Expr, high: Expr },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub ty: VariableType,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CommandAction {
    /// `[]`
    Silent,
    /// `[name]`
    Named(String),
    /// `<>`: a rate command of a Markov automaton.
    Markovian,
}

impl CommandAction {
    pub fn name(&self) -> Option<&str> {
        match self {
            CommandAction::Named(n) => Some(n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub action: CommandAction,
    pub guard: Expr,
    pub updates: Vec<Update>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    /// Probability or rate; `None` when written without `p :`.
    pub weight: Option<Expr>,
    pub assignments: Vec<Assignment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub variable: String,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardStruct {
    pub name: Option<String>,
    pub items: Vec<RewardItem>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardItem {
    /// `None` for state rewards; `Some("")` for `[]`, `Some(a)` for `[a]`.
    pub action: Option<String>,
    pub guard: Expr,
    pub value: Expr,
}

impl Program {
    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.modules.iter().flat_map(|m| m.variables.iter())
    }

    pub fn constant(&self, name: &str) -> Option<&Constant> {
        self.constants.iter().find(|c| c.name == name)
    }

    /// Constants without a value in the file.
    pub fn undefined_constants(&self) -> Vec<&Constant> {
        self.constants.iter().filter(|c| c.value.is_none()).collect()
    }

    pub fn reward_struct(&self, name: &str) -> Option<&RewardStruct> {
        self.reward_structs
            .iter()
            .find(|r| r.name.as_deref() == Some(name))
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.model_kind.keyword())?;
        if !self.constants.is_empty() {
            writeln!(f)?;
        }
        for c in &self.constants {
            match &c.value {
                Some(v) => writeln!(f, "const {} {} = {};", c.ty.keyword(), c.name, v)?,
                None => writeln!(f, "const {} {};", c.ty.keyword(), c.name)?,
            }
        }
        if !self.formulas.is_empty() {
            writeln!(f)?;
        }
        for formula in &self.formulas {
            writeln!(f, "formula {} = {};", formula.name, formula.body)?;
        }
        for m in &self.modules {
            writeln!(f)?;
            write!(f, "{m}")?;
        }
        if let Some(init) = &self.init {
            writeln!(f)?;
            writeln!(f, "init {init} endinit")?;
        }
        for r in &self.reward_structs {
            writeln!(f)?;
            write!(f, "{r}")?;
        }
        if !self.labels.is_empty() {
            writeln!(f)?;
        }
        for l in &self.labels {
            writeln!(f, "label \"{}\" = {};", l.name, l.body)?;
        }
        Ok(())
    }
}

impl fmt::Display for Module {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "module {}", self.name)?;
        for v in &self.variables {
            match &v.ty {
                VariableType::Bool => write!(f, "    {} : bool", v.name)?,
                VariableType::Range { low, high } => write!(f, "    {} : [{}..{}]", v.name, low, high)?,
            }
            match &v.init {
                Some(init) => writeln!(f, " init {init};")?,
                None => writeln!(f, ";")?,
            }
        }
        if !self.variables.is_empty() && !self.commands.is_empty() {
            writeln!(f)?;
        }
        for c in &self.commands {
            writeln!(f, "    {c}")?;
        }
        writeln!(f, "endmodule")
    }
}

impl fmt::Display for CommandAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommandAction::Silent => f.write_str("[]"),
            CommandAction::Named(n) => write!(f, "[{n}]"),
            CommandAction::Markovian => f.write_str("<>"),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} -> ", self.action, self.guard)?;
        for (i, u) in self.updates.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{u}")?;
        }
        f.write_str(";")
    }
}

impl fmt::Display for Update {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.weight {
            Some(w @ Expr::Ite(..)) => write!(f, "({w}) : ")?,
            Some(w) => write!(f, "{w} : ")?,
            None => {}
        }
        if self.assignments.is_empty() {
            return f.write_str("true");
        }
        let parts: Vec<String> = self
            .assignments
            .iter()
            .map(|a| format!("({}'={})", a.variable, a.value))
            .collect();
        f.write_str(&parts.join(" & "))
    }
}

impl fmt::Display for RewardStruct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.name {
            Some(n) => writeln!(f, "rewards \"{n}\"")?,
            None => writeln!(f, "rewards")?,
        }
        for item in &self.items {
            match &item.action {
                None => writeln!(f, "    {} : {};", item.guard, item.value)?,
                Some(a) => writeln!(f, "    [{a}] {} : {};", item.guard, item.value)?,
            }
        }
        writeln!(f, "endrewards")
    }
}
