//! User-defined problems written as expressions in the run configuration.
//!
//! Expressions see `t`, every state name and every control name as float
//! variables, e.g.
//!
//! ```toml
//! [problem.inline]
//! states = ["x"]
//! controls = ["u"]
//! y0 = [1.0]
//! t_span = [0.0, 1.0]
//! rhs = ["-x + u"]
//! nodes = [2]
//! lower = [0.0, 0.0]
//! upper = [1.0, 1.0]
//!
//! [problem.inline.criterion]
//! integrand = "x * x + u * u"
//! ```

use std::sync::Arc;

use evalexpr::{
    build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value,
};
use serde::{Deserialize, Serialize};

use podrbf_core::problem::{Bounds, ControlKind, ControlParam, Functional, ProblemDef, Sense};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalExpr {
    #[serde(default)]
    pub name: Option<String>,
    /// Integrated over the time span.
    #[serde(default)]
    pub integrand: Option<String>,
    /// Evaluated on the final state only.
    #[serde(default)]
    pub terminal: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProblem {
    #[serde(default = "default_name")]
    pub name: String,
    pub states: Vec<String>,
    pub controls: Vec<String>,
    pub y0: Vec<f64>,
    pub t_span: [f64; 2],
    /// One right-hand side expression per state.
    pub rhs: Vec<String>,
    #[serde(default = "default_kind")]
    pub control_kind: ControlKind,
    /// Nodes per control.
    pub nodes: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Starting point; defaults to the box center.
    #[serde(default)]
    pub nominal: Option<Vec<f64>>,
    #[serde(default = "default_sense")]
    pub sense: Sense,
    pub criterion: FunctionalExpr,
    #[serde(default)]
    pub constraints: Vec<FunctionalExpr>,
}

fn default_name() -> String {
    "inline".into()
}

fn default_kind() -> ControlKind {
    ControlKind::PiecewiseLinear
}

fn default_sense() -> Sense {
    Sense::Minimize
}

/// A compiled expression bound to the variable names it may read.
#[derive(Debug)]
struct Compiled {
    node: Node<DefaultNumericTypes>,
    names: Arc<Vec<String>>,
}

impl Compiled {
    fn new(source: &str, names: &Arc<Vec<String>>) -> Result<Self, CliError> {
        let node = build_operator_tree::<DefaultNumericTypes>(source)
            .map_err(|e| CliError::Config(format!("cannot parse `{source}`: {e}")))?;
        if let Some(unknown) = node.iter_variable_identifiers().find(|v| !names.iter().any(|n| n == v)) {
            return Err(CliError::Config(format!("unknown variable `{unknown}` in `{source}`")));
        }
        Ok(Self {
            node,
            names: Arc::clone(names),
        })
    }

    /// Evaluates with `values` bound to `names` in order; failures give NaN.
    fn eval<'a>(&self, values: impl IntoIterator<Item = &'a f64>) -> f64 {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        for (name, v) in self.names.iter().zip(values) {
            if ctx.set_value(name.clone(), Value::Float(*v)).is_err() {
                return f64::NAN;
            }
        }
        self.node.eval_number_with_context(&ctx).unwrap_or(f64::NAN)
    }
}

impl InlineProblem {
    fn check_names(&self) -> Result<(), CliError> {
        let mut all: Vec<&str> = vec!["t"];
        for n in self.states.iter().chain(&self.controls) {
            if all.contains(&n.as_str()) {
                return Err(CliError::Config(format!("variable name `{n}` used twice")));
            }
            all.push(n);
        }
        if self.rhs.len() != self.states.len() {
            return Err(CliError::Config(format!(
                "{} right-hand sides for {} states",
                self.rhs.len(),
                self.states.len()
            )));
        }
        Ok(())
    }

    fn functional(&self, f: &FunctionalExpr, default: &str, full: &Arc<Vec<String>>) -> Result<Functional, CliError> {
        let name = f.name.clone().unwrap_or_else(|| default.to_string());
        let states = Arc::new(self.states.clone());
        let terminal = f.terminal.as_deref().map(|s| Compiled::new(s, &states)).transpose()?;
        let integrand = f.integrand.as_deref().map(|s| Compiled::new(s, full)).transpose()?;
        let out = match (integrand, terminal) {
            (Some(i), term) => {
                let base = Functional::integral(name, move |t, y: &[f64], u: &[f64]| {
                    i.eval(std::iter::once(&t).chain(y).chain(u))
                });
                match term {
                    Some(term) => base.with_terminal(move |y: &[f64]| term.eval(y)),
                    None => base,
                }
            }
            (None, Some(term)) => Functional::terminal(name, move |y: &[f64]| term.eval(y)),
            (None, None) => return Err(CliError::Config(format!("functional `{name}` has no terms"))),
        };
        Ok(out)
    }

    pub fn build(&self) -> Result<ProblemDef, CliError> {
        self.check_names()?;
        let full: Arc<Vec<String>> = Arc::new(
            std::iter::once("t".to_string())
                .chain(self.states.iter().cloned())
                .chain(self.controls.iter().cloned())
                .collect(),
        );
        let rhs: Vec<Compiled> = self.rhs.iter().map(|s| Compiled::new(s, &full)).collect::<Result<_, _>>()?;
        let span = (self.t_span[0], self.t_span[1]);
        let config = |e: podrbf_core::Error| CliError::Config(e.to_string());
        let bounds = Bounds::new(self.lower.clone(), self.upper.clone()).map_err(config)?;
        let nominal = self.nominal.clone().unwrap_or_else(|| bounds.center());
        let constraints = self
            .constraints
            .iter()
            .enumerate()
            .map(|(j, c)| self.functional(c, &format!("constraint_{}", j + 1), &full))
            .collect::<Result<_, _>>()?;
        ProblemDef {
            name: self.name.clone(),
            n_y: self.states.len(),
            rhs: Arc::new(move |t, y: &[f64], u: &[f64], dy: &mut [f64]| {
                for (d, f) in dy.iter_mut().zip(&rhs) {
                    *d = f.eval(std::iter::once(&t).chain(y).chain(u));
                }
            }),
            y0: self.y0.clone(),
            t_span: span,
            control: ControlParam::new(self.control_kind, self.nodes.clone(), span).map_err(config)?,
            criterion: self.functional(&self.criterion, "criterion", &full)?,
            eq_constraints: constraints,
            bounds,
            sense: self.sense,
            nominal,
        }
        .validate()
        .map_err(config)
    }
}
