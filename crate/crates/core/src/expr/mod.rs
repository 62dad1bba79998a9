//! Scalar expressions over named coordinates.
//!
//! Expressions are parsed once into an immutable tree, then bound against an
//! ordered list of coordinate names to obtain a [`BoundExpr`] that evaluates
//! on coordinate slices, either on plain `f64` or on [`Dual`] numbers for exact
//! directional derivatives.

mod dual;
mod parse;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

pub use dual::{Dual, Scalar};

use crate::error::{Error, Result, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Num(f64),
    Var(String),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
}

/// Syntax tree node with the byte span it was parsed from.
///
/// Nodes built programmatically carry the span `(0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub span: Span,
}

impl Node {
    pub fn new(kind: NodeKind, span: Span) -> Self {
        Self { kind, span }
    }

    fn synthetic(kind: NodeKind) -> Self {
        Self { kind, span: (0, 0) }
    }

    fn precedence(&self) -> u8 {
        match &self.kind {
            NodeKind::Add(..) | NodeKind::Sub(..) => 1,
            NodeKind::Mul(..) | NodeKind::Div(..) => 2,
            NodeKind::Neg(..) => 3,
            NodeKind::Pow(..) => 4,
            NodeKind::Num(v) if *v < 0.0 || v.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

/// Parsed scalar formula.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    source: String,
}

impl Expression {
    pub fn parse(text: &str) -> Result<Self> {
        let root = parse::parse(text)?;
        Ok(Self {
            root,
            source: text.to_string(),
        })
    }

    pub fn constant(v: f64) -> Self {
        Self::from_node(Node::synthetic(NodeKind::Num(v)))
    }

    pub fn var(name: &str) -> Self {
        Self::from_node(Node::synthetic(NodeKind::Var(name.to_string())))
    }

    fn from_node(root: Node) -> Self {
        let source = Printer(&root).to_string();
        Self { root, source }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Text the expression was parsed from (or its printed form when built programmatically).
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Free coordinate names, sorted.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        collect_vars(&self.root, &mut out);
        out
    }

    pub fn is_constant(&self) -> bool {
        self.variables().is_empty()
    }

    pub fn add(&self, other: &Expression) -> Expression {
        self.binary(other, NodeKind::Add)
    }

    pub fn sub(&self, other: &Expression) -> Expression {
        self.binary(other, NodeKind::Sub)
    }

    pub fn mul(&self, other: &Expression) -> Expression {
        self.binary(other, NodeKind::Mul)
    }

    pub fn div(&self, other: &Expression) -> Expression {
        self.binary(other, NodeKind::Div)
    }

    pub fn scale(&self, c: f64) -> Expression {
        Expression::constant(c).mul(self)
    }

    fn binary(&self, other: &Expression, op: fn(Box<Node>, Box<Node>) -> NodeKind) -> Expression {
        Self::from_node(Node::synthetic(op(
            Box::new(strip_spans(&self.root)),
            Box::new(strip_spans(&other.root)),
        )))
    }

    /// Replaces every occurrence of variable `from` by `to`.
    pub fn rename(&self, from: &str, to: &str) -> Expression {
        fn go(n: &Node, from: &str, to: &str) -> Node {
            let kind = match &n.kind {
                NodeKind::Var(v) if v == from => NodeKind::Var(to.to_string()),
                other => map_children(other, |c| go(c, from, to)),
            };
            Node::synthetic(kind)
        }
        Self::from_node(go(&self.root, from, to))
    }

    pub fn eval(&self, bindings: &HashMap<String, f64>) -> Result<f64> {
        let (names, values) = split_bindings(bindings);
        self.bind(&names)?.eval(&values)
    }

    /// Value and directional derivative along `seed` (missing seed entries are zero).
    pub fn eval_dual(&self, bindings: &HashMap<String, f64>, seed: &HashMap<String, f64>) -> Result<(f64, f64)> {
        let (names, values) = split_bindings(bindings);
        let dir: Vec<f64> = names.iter().map(|n| seed.get(n).copied().unwrap_or(0.0)).collect();
        self.bind(&names)?.eval_dual(&values, &dir)
    }

    /// Compiles against an ordered coordinate list.
    pub fn bind<S: AsRef<str>>(&self, names: &[S]) -> Result<BoundExpr> {
        let mut program = Vec::new();
        compile(&self.root, names, &mut program)?;
        Ok(BoundExpr {
            program,
            arity: names.len(),
            expr: self.clone(),
        })
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", Printer(&self.root))
    }
}

impl std::str::FromStr for Expression {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Expression::parse(s)
    }
}

fn split_bindings(bindings: &HashMap<String, f64>) -> (Vec<String>, Vec<f64>) {
    let mut names: Vec<String> = bindings.keys().cloned().collect();
    names.sort();
    let values = names.iter().map(|n| bindings[n]).collect();
    (names, values)
}

fn collect_vars(n: &Node, out: &mut BTreeSet<String>) {
    match &n.kind {
        NodeKind::Num(_) => {}
        NodeKind::Var(v) => {
            out.insert(v.clone());
        }
        NodeKind::Neg(a) | NodeKind::Pow(a, _) | NodeKind::Call(_, a) => collect_vars(a, out),
        NodeKind::Add(a, b) | NodeKind::Sub(a, b) | NodeKind::Mul(a, b) | NodeKind::Div(a, b) => {
            collect_vars(a, out);
            collect_vars(b, out);
        }
    }
}

fn map_children(kind: &NodeKind, f: impl Fn(&Node) -> Node) -> NodeKind {
    let b = |n: &Node| Box::new(f(n));
    match kind {
        NodeKind::Num(v) => NodeKind::Num(*v),
        NodeKind::Var(v) => NodeKind::Var(v.clone()),
        NodeKind::Neg(a) => NodeKind::Neg(b(a)),
        NodeKind::Add(x, y) => NodeKind::Add(b(x), b(y)),
        NodeKind::Sub(x, y) => NodeKind::Sub(b(x), b(y)),
        NodeKind::Mul(x, y) => NodeKind::Mul(b(x), b(y)),
        NodeKind::Div(x, y) => NodeKind::Div(b(x), b(y)),
        NodeKind::Pow(a, k) => NodeKind::Pow(b(a), *k),
        NodeKind::Call(func, a) => NodeKind::Call(*func, b(a)),
    }
}

fn strip_spans(n: &Node) -> Node {
    Node::synthetic(map_children(&n.kind, strip_spans))
}

struct Printer<'a>(&'a Node);

impl Printer<'_> {
    fn child(f: &mut fmt::Formatter<'_>, n: &Node, min_prec: u8) -> fmt::Result {
        if n.precedence() < min_prec {
            write!(f, "({})", Printer(n))
        } else {
            write!(f, "{}", Printer(n))
        }
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.0;
        match &n.kind {
            NodeKind::Num(v) => {
                if v.is_sign_negative() {
                    write!(f, "-{}", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            NodeKind::Var(name) => f.write_str(name),
            NodeKind::Neg(a) => {
                f.write_str("-")?;
                Self::child(f, a, 3)
            }
            NodeKind::Add(a, b) => {
                Self::child(f, a, 1)?;
                f.write_str(" + ")?;
                Self::child(f, b, 2)
            }
            NodeKind::Sub(a, b) => {
                Self::child(f, a, 1)?;
                f.write_str(" - ")?;
                Self::child(f, b, 2)
            }
            NodeKind::Mul(a, b) => {
                Self::child(f, a, 2)?;
                f.write_str("*")?;
                Self::child(f, b, 3)
            }
            NodeKind::Div(a, b) => {
                Self::child(f, a, 2)?;
                f.write_str("/")?;
                Self::child(f, b, 3)
            }
            NodeKind::Pow(a, k) => {
                Self::child(f, a, 5)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            NodeKind::Call(func, a) => write!(f, "{}({})", func.name(), Printer(a)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum OpKind {
    Const(f64),
    Var(usize),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Powi(i32),
    Call(Func),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Op {
    kind: OpKind,
    span: Span,
}

fn compile<S: AsRef<str>>(n: &Node, names: &[S], out: &mut Vec<Op>) -> Result<()> {
    let kind = match &n.kind {
        NodeKind::Num(v) => OpKind::Const(*v),
        NodeKind::Var(v) => {
            let idx = names
                .iter()
                .position(|s| s.as_ref() == v)
                .ok_or_else(|| Error::UnboundName(v.clone()))?;
            OpKind::Var(idx)
        }
        NodeKind::Neg(a) => {
            compile(a, names, out)?;
            OpKind::Neg
        }
        NodeKind::Pow(a, k) => {
            compile(a, names, out)?;
            OpKind::Powi(*k)
        }
        NodeKind::Call(func, a) => {
            compile(a, names, out)?;
            OpKind::Call(*func)
        }
        NodeKind::Add(a, b) | NodeKind::Sub(a, b) | NodeKind::Mul(a, b) | NodeKind::Div(a, b) => {
            compile(a, names, out)?;
            compile(b, names, out)?;
            match &n.kind {
                NodeKind::Add(..) => OpKind::Add,
                NodeKind::Sub(..) => OpKind::Sub,
                NodeKind::Mul(..) => OpKind::Mul,
                _ => OpKind::Div,
            }
        }
    };
    out.push(Op { kind, span: n.span });
    Ok(())
}

fn domain(message: &str, span: Span) -> Error {
    Error::Domain {
        message: message.to_string(),
        span,
    }
}

/// An expression compiled against a fixed coordinate ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundExpr {
    program: Vec<Op>,
    arity: usize,
    expr: Expression,
}

impl BoundExpr {
    pub fn expression(&self) -> &Expression {
        &self.expr
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Evaluates over any [`Scalar`]; domain violations are reported eagerly.
    pub fn eval_generic<T: Scalar>(&self, x: &[T]) -> Result<T> {
        if x.len() != self.arity {
            return Err(Error::DimensionMismatch {
                expected: self.arity,
                got: x.len(),
            });
        }
        let mut stack: Vec<T> = Vec::with_capacity(self.program.len());
        for op in &self.program {
            let v = match op.kind {
                OpKind::Const(c) => T::from_f64(c),
                OpKind::Var(i) => x[i],
                OpKind::Neg => -stack.pop().unwrap(),
                OpKind::Powi(k) => {
                    let a = stack.pop().unwrap();
                    if k < 0 && a.re() == 0.0 {
                        return Err(domain("division by zero in negative power", op.span));
                    }
                    a.powi(k)
                }
                OpKind::Call(func) => {
                    let a = stack.pop().unwrap();
                    match func {
                        Func::Sin => a.sin(),
                        Func::Cos => a.cos(),
                        Func::Tan => a.tan(),
                        Func::Exp => a.exp(),
                        Func::Log => {
                            if a.re() <= 0.0 {
                                return Err(domain("log of non-positive value", op.span));
                            }
                            a.ln()
                        }
                        Func::Sqrt => {
                            if a.re() < 0.0 {
                                return Err(domain("sqrt of negative value", op.span));
                            }
                            if a.re() == 0.0 && a.tangent() != 0.0 {
                                return Err(domain("sqrt is not differentiable at 0", op.span));
                            }
                            if a.re() == 0.0 {
                                T::from_f64(0.0)
                            } else {
                                a.sqrt()
                            }
                        }
                        Func::Abs => a.abs(),
                    }
                }
                OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Div => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    match op.kind {
                        OpKind::Add => a + b,
                        OpKind::Sub => a - b,
                        OpKind::Mul => a * b,
                        _ => {
                            if b.re() == 0.0 {
                                return Err(domain("division by zero", op.span));
                            }
                            a / b
                        }
                    }
                }
            };
            stack.push(v);
        }
        let out = stack.pop().unwrap();
        if !out.re().is_finite() {
            return Err(domain("non-finite result", self.expr.root.span));
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.eval_generic(x)
    }

    /// `(value, derivative along dir)`.
    pub fn eval_dual(&self, x: &[f64], dir: &[f64]) -> Result<(f64, f64)> {
        if dir.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: dir.len(),
            });
        }
        let xs: Vec<Dual> = x.iter().zip(dir).map(|(&a, &d)| Dual::new(a, d)).collect();
        let v = self.eval_generic(&xs)?;
        Ok((v.re, v.eps))
    }

    /// Exact gradient, one dual pass per coordinate.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut xs: Vec<Dual> = x.iter().map(|&a| Dual::constant(a)).collect();
        let mut g = vec![0.0; x.len()];
        let used = self.used_slots();
        for (i, gi) in g.iter_mut().enumerate() {
            if !used[i] {
                continue;
            }
            xs[i].eps = 1.0;
            *gi = self.eval_generic(&xs)?.eps;
            xs[i].eps = 0.0;
        }
        Ok(g)
    }

    fn used_slots(&self) -> Vec<bool> {
        let mut used = vec![false; self.arity];
        for op in &self.program {
            if let OpKind::Var(i) = op.kind {
                used[i] = true;
            }
        }
        used
    }
}
