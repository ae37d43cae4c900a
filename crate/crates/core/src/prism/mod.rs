//! PRISM-language frontend and explicit model files.

pub mod ast;
pub mod explicit;
pub mod expr;
pub mod parser;

use std::collections::{BTreeMap, BTreeSet, HashMap};

pub use ast::*;
pub use explicit::{parse_explicit, ExplicitError, ExplicitModel, ExplicitTransition};
pub use expr::{BinOp, EvalError, Expr, Func, Value, ValueType};
pub use parser::{parse_expression, parse_program, ParseError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConstantError {
    #[error("constant `{0}` is not defined; supply a value with --constants")]
    Missing(String),
    #[error("`{0}` is not a constant of the model")]
    Unknown(String),
    #[error("constant `{0}` already has a value in the model")]
    AlreadyDefined(String),
    #[error("constant `{name}`: {message}")]
    TypeMismatch { name: String, message: String },
    #[error("constant `{name}`: {source}")]
    Evaluation { name: String, source: EvalError },
    #[error("formula `{0}` refers to itself")]
    CyclicFormula(String),
    #[error("malformed binding `{0}`; expected name=value")]
    MalformedBinding(String),
}

/// Parses `N=3,p=0.1` style bindings. Values may be constant expressions
/// such as `1/3`.
pub fn parse_bindings(text: &str) -> Result<BTreeMap<String, Value>, ConstantError> {
    let mut out = BTreeMap::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| ConstantError::MalformedBinding(part.to_string()))?;
        let name = name.trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ConstantError::MalformedBinding(part.to_string()));
        }
        let expr = parse_expression(value).map_err(|_| ConstantError::MalformedBinding(part.to_string()))?;
        let value = expr
            .evaluate(&|_: &str| None)
            .map_err(|source| ConstantError::Evaluation {
                name: name.to_string(),
                source,
            })?;
        out.insert(name.to_string(), value);
    }
    Ok(out)
}

/// Replaces every constant by its literal value and inlines formulas, then
/// folds constant subexpressions. Undefined constants listed in `parameters`
/// stay symbolic; they must be of type double.
pub fn substitute_constants(
    program: &Program,
    bindings: &BTreeMap<String, Value>,
    parameters: &BTreeSet<String>,
) -> Result<Program, ConstantError> {
    for name in bindings.keys().chain(parameters.iter()) {
        if program.constant(name).is_none() {
            return Err(ConstantError::Unknown(name.clone()));
        }
    }
    let mut values: HashMap<String, Value> = HashMap::new();
    let mut constants = Vec::with_capacity(program.constants.len());
    for c in &program.constants {
        let mismatch = |e: EvalError| match e {
            EvalError::TypeMismatch(message) => ConstantError::TypeMismatch {
                name: c.name.clone(),
                message,
            },
            source => ConstantError::Evaluation {
                name: c.name.clone(),
                source,
            },
        };
        let value = match (&c.value, bindings.get(&c.name)) {
            (Some(_), Some(_)) => return Err(ConstantError::AlreadyDefined(c.name.clone())),
            (None, Some(v)) => c.ty.coerce(v.clone()).map_err(mismatch)?,
            (Some(e), None) => {
                let v = e.evaluate(&|n: &str| values.get(n).cloned()).map_err(|err| match err {
                    EvalError::UnknownIdentifier(n) if parameters.contains(&n) => ConstantError::TypeMismatch {
                        name: c.name.clone(),
                        message: format!("depends on parameter `{n}`"),
                    },
                    other => mismatch(other),
                })?;
                c.ty.coerce(v).map_err(mismatch)?
            }
            (None, None) if parameters.contains(&c.name) => {
                if c.ty != ValueType::Double {
                    return Err(ConstantError::TypeMismatch {
                        name: c.name.clone(),
                        message: format!("parameters must be of type double, found {}", c.ty.keyword()),
                    });
                }
                constants.push(c.clone());
                continue;
            }
            (None, None) => return Err(ConstantError::Missing(c.name.clone())),
        };
        constants.push(Constant {
            name: c.name.clone(),
            ty: c.ty,
            value: Some(Expr::from_value(&value)),
        });
        values.insert(c.name.clone(), value);
    }

    let mut resolved: HashMap<String, Expr> = values
        .iter()
        .map(|(k, v)| (k.clone(), Expr::from_value(v)))
        .collect();
    let bodies: HashMap<&str, &Expr> = program.formulas.iter().map(|f| (f.name.as_str(), &f.body)).collect();
    for f in &program.formulas {
        resolve_formula(&f.name, &bodies, &mut resolved, &mut Vec::new())?;
    }
    let subst = |e: &Expr| e.map_identifiers(&mut |n: &str| resolved.get(n).cloned()).fold();

    let modules = program
        .modules
        .iter()
        .map(|m| Module {
            name: m.name.clone(),
            variables: m
                .variables
                .iter()
                .map(|v| Variable {
                    name: v.name.clone(),
                    ty: match &v.ty {
                        VariableType::Bool => VariableType::Bool,
                        VariableType::Range { low, high } => VariableType::Range {
                            low: subst(low),
                            high: subst(high),
                        },
                    },
                    init: v.init.as_ref().map(&subst),
                })
                .collect(),
            commands: m
                .commands
                .iter()
                .map(|c| Command {
                    action: c.action.clone(),
                    guard: subst(&c.guard),
                    updates: c
                        .updates
                        .iter()
                        .map(|u| Update {
                            weight: u.weight.as_ref().map(&subst),
                            assignments: u
                                .assignments
                                .iter()
                                .map(|a| Assignment {
                                    variable: a.variable.clone(),
                                    value: subst(&a.value),
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        })
        .collect();
    Ok(Program {
        model_kind: program.model_kind,
        constants,
        formulas: program
            .formulas
            .iter()
            .map(|f| Formula {
                name: f.name.clone(),
                body: resolved[&f.name].clone(),
            })
            .collect(),
        modules,
        init: program.init.as_ref().map(&subst),
        labels: program
            .labels
            .iter()
            .map(|l| LabelDef {
                name: l.name.clone(),
                body: subst(&l.body),
            })
            .collect(),
        reward_structs: program
            .reward_structs
            .iter()
            .map(|r| RewardStruct {
                name: r.name.clone(),
                items: r
                    .items
                    .iter()
                    .map(|i| RewardItem {
                        action: i.action.clone(),
                        guard: subst(&i.guard),
                        value: subst(&i.value),
                    })
                    .collect(),
            })
            .collect(),
    })
}

fn resolve_formula(
    name: &str,
    bodies: &HashMap<&str, &Expr>,
    resolved: &mut HashMap<String, Expr>,
    stack: &mut Vec<String>,
) -> Result<Expr, ConstantError> {
    if let Some(e) = resolved.get(name) {
        return Ok(e.clone());
    }
    if stack.iter().any(|s| s == name) {
        return Err(ConstantError::CyclicFormula(name.to_string()));
    }
    stack.push(name.to_string());
    let body = bodies[name];
    let mut referenced = Vec::new();
    body.identifiers(&mut referenced);
    for r in referenced {
        if bodies.contains_key(r.as_str()) {
            resolve_formula(&r, bodies, resolved, stack)?;
        }
    }
    let e = body.map_identifiers(&mut |n: &str| resolved.get(n).cloned()).fold();
    stack.pop();
    resolved.insert(name.to_string(), e.clone());
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::rational;

    fn program(text: &str) -> Program {
        parse_program(text).unwrap()
    }

    #[test]
    fn external_binding_is_folded() {
        let p = program("dtmc const int N; module m x:[0..N] init 0; [] x<N -> (x'=x+1); endmodule");
        let bound = substitute_constants(&p, &[("N".to_string(), Value::Int(3))].into(), &BTreeSet::new()).unwrap();
        let VariableType::Range { high, .. } = &bound.modules[0].variables[0].ty else {
            panic!()
        };
        assert_eq!(high, &Expr::Int(3));
        assert_eq!(bound.modules[0].commands[0].guard.to_string(), "x < 3");
    }

    #[test]
    fn decimal_constant_is_exact() {
        let p = program("dtmc const double p = 1/10; const double q = 0.1; module m x:[0..1] init 0; [] true -> p:(x'=0) + 1-p:(x'=1); endmodule");
        let bound = substitute_constants(&p, &BTreeMap::new(), &BTreeSet::new()).unwrap();
        assert_eq!(bound.constants[0].value, Some(Expr::Real(rational(1, 10))));
        assert_eq!(bound.constants[1].value, Some(Expr::Real(rational(1, 10))));
        let weights: Vec<_> = bound.modules[0].commands[0].updates.iter().map(|u| u.weight.clone().unwrap()).collect();
        assert_eq!(weights, vec![Expr::Real(rational(1, 10)), Expr::Real(rational(9, 10))]);
    }

    #[test]
    fn type_errors() {
        let p = program("dtmc const int N; module m endmodule");
        let err = substitute_constants(&p, &[("N".to_string(), Value::Bool(true))].into(), &BTreeSet::new()).unwrap_err();
        assert!(matches!(err, ConstantError::TypeMismatch { .. }));
        let err = substitute_constants(&p, &[("N".to_string(), Value::Real(rational(1, 2)))].into(), &BTreeSet::new()).unwrap_err();
        assert!(matches!(err, ConstantError::TypeMismatch { .. }));
        let p = program("dtmc const bool b = 3; module m endmodule");
        assert!(matches!(
            substitute_constants(&p, &BTreeMap::new(), &BTreeSet::new()),
            Err(ConstantError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn missing_unknown_and_redefined() {
        let p = program("dtmc const int N; const int M = 2; module m endmodule");
        assert_eq!(
            substitute_constants(&p, &BTreeMap::new(), &BTreeSet::new()),
            Err(ConstantError::Missing("N".into()))
        );
        assert_eq!(
            substitute_constants(&p, &[("K".to_string(), Value::Int(1))].into(), &BTreeSet::new()),
            Err(ConstantError::Unknown("K".into()))
        );
        assert_eq!(
            substitute_constants(
                &p,
                &[("N".to_string(), Value::Int(1)), ("M".to_string(), Value::Int(1))].into(),
                &BTreeSet::new()
            ),
            Err(ConstantError::AlreadyDefined("M".into()))
        );
    }

    #[test]
    fn formulas_are_inlined_transitively() {
        let p = program("dtmc const int K = 2; formula b = a + 1; formula a = K * 2; module m x:[0..9] init 0; [] x < b -> (x'=x+1); endmodule");
        let bound = substitute_constants(&p, &BTreeMap::new(), &BTreeSet::new()).unwrap();
        assert_eq!(bound.modules[0].commands[0].guard.to_string(), "x < 5");
        let cyclic = program("dtmc formula a = b; formula b = a; module m endmodule");
        assert!(matches!(
            substitute_constants(&cyclic, &BTreeMap::new(), &BTreeSet::new()),
            Err(ConstantError::CyclicFormula(_))
        ));
    }

    #[test]
    fn parameters_stay_symbolic() {
        let p = program("dtmc const double p; module m x:[0..1] init 0; [] x=0 -> p:(x'=1) + 1-p:(x'=0); endmodule");
        let params: BTreeSet<String> = ["p".to_string()].into();
        let bound = substitute_constants(&p, &BTreeMap::new(), &params).unwrap();
        assert_eq!(bound.modules[0].commands[0].updates[0].weight, Some(Expr::Ident("p".into())));
        let p = program("dtmc const int n; module m endmodule");
        let params: BTreeSet<String> = ["n".to_string()].into();
        assert!(substitute_constants(&p, &BTreeMap::new(), &params).is_err());
    }

    #[test]
    fn binding_text() {
        let b = parse_bindings("N=16, MAX=2,p=1/3,flag=true").unwrap();
        assert_eq!(b["N"], Value::Int(16));
        assert_eq!(b["p"], Value::Real(rational(1, 3)));
        assert_eq!(b["flag"], Value::Bool(true));
        assert!(parse_bindings("N").is_err());
        assert!(parse_bindings("N=").is_err());
    }
}
