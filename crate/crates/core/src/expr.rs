//! Expression AST for transition conditions, action conditions, and stored
//! values, plus the purely syntactic utilities the analysis needs
//! (free-variable collection, negation pushing, sort checking, concrete
//! evaluation).
//!
//! Booleans are encoded as integers with 0 = false and 1 = true, so a single
//! integer-valued evaluation covers both sorts.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::model::StepId;

/// Variable / expression sort. Boolean values are restricted to {0, 1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Sort {
    Bool,
    Int,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Bool => write!(f, "bool"),
            Sort::Int => write!(f, "int"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeDir {
    Rising,
    Falling,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    /// The comparison that holds exactly when `self` does not.
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    /// The comparison with operands swapped: `a op b` iff `b op.swap() a`.
    pub fn swap(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ne => CmpOp::Ne,
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
        }
    }

    pub fn eval(self, l: i64, r: i64) -> bool {
        match self {
            CmpOp::Eq => l == r,
            CmpOp::Ne => l != r,
            CmpOp::Lt => l < r,
            CmpOp::Le => l <= r,
            CmpOp::Gt => l > r,
            CmpOp::Ge => l >= r,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        };
        write!(f, "{s}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

impl fmt::Display for ArithOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
        };
        write!(f, "{s}")
    }
}

/// Condition / value expression. Step activity atoms (`step(P, n)`) and edge
/// atoms (`rising(x)` / `falling(x)`) are first-class so the analysis can give
/// them dedicated abstract semantics.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(String),
    StepRef { partial: String, step: StepId },
    Edge { dir: EdgeDir, operand: Box<Expr> },
    Compare { op: CmpOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Arith { op: ArithOp, lhs: Box<Expr>, rhs: Box<Expr> },
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn step_ref(partial: impl Into<String>, step: StepId) -> Expr {
        Expr::StepRef {
            partial: partial.into(),
            step,
        }
    }

    pub fn rising(operand: Expr) -> Expr {
        Expr::Edge {
            dir: EdgeDir::Rising,
            operand: Box::new(operand),
        }
    }

    pub fn falling(operand: Expr) -> Expr {
        Expr::Edge {
            dir: EdgeDir::Falling,
            operand: Box::new(operand),
        }
    }

    pub fn cmp(op: CmpOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Compare {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn and(l: Expr, r: Expr) -> Expr {
        Expr::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Expr, r: Expr) -> Expr {
        Expr::Or(Box::new(l), Box::new(r))
    }

    pub fn arith(op: ArithOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Arith {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn add(l: Expr, r: Expr) -> Expr {
        Expr::arith(ArithOp::Add, l, r)
    }

    pub fn sub(l: Expr, r: Expr) -> Expr {
        Expr::arith(ArithOp::Sub, l, r)
    }

    /// True for the expressions `filter` treats as indivisible.
    pub fn is_atom(&self) -> bool {
        matches!(
            self,
            Expr::Int(_)
                | Expr::Bool(_)
                | Expr::Var(_)
                | Expr::StepRef { .. }
                | Expr::Edge { .. }
                | Expr::Compare { .. }
        )
    }

    /// True if any edge atom occurs anywhere in the expression.
    pub fn contains_edge(&self) -> bool {
        match self {
            Expr::Edge { .. } => true,
            Expr::Not(e) => e.contains_edge(),
            Expr::And(l, r) | Expr::Or(l, r) => l.contains_edge() || r.contains_edge(),
            Expr::Compare { lhs, rhs, .. } | Expr::Arith { lhs, rhs, .. } => {
                lhs.contains_edge() || rhs.contains_edge()
            }
            _ => false,
        }
    }
}

/// Identifiers occurring syntactically in an expression, split into plain
/// variables and step activity references.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FreeVars {
    pub vars: BTreeSet<String>,
    pub steps: BTreeSet<(String, StepId)>,
}

pub fn free_vars(e: &Expr) -> FreeVars {
    let mut out = FreeVars::default();
    collect_free(e, &mut out);
    out
}

fn collect_free(e: &Expr, out: &mut FreeVars) {
    match e {
        Expr::Int(_) | Expr::Bool(_) => {}
        Expr::Var(v) => {
            out.vars.insert(v.clone());
        }
        Expr::StepRef { partial, step } => {
            out.steps.insert((partial.clone(), *step));
        }
        Expr::Edge { operand, .. } => collect_free(operand, out),
        Expr::Not(inner) => collect_free(inner, out),
        Expr::And(l, r) | Expr::Or(l, r) => {
            collect_free(l, out);
            collect_free(r, out);
        }
        Expr::Compare { lhs, rhs, .. } | Expr::Arith { lhs, rhs, .. } => {
            collect_free(lhs, out);
            collect_free(rhs, out);
        }
    }
}

/// Push negations down to atoms. Comparisons under a negation are flipped,
/// boolean variable atoms are rewritten to `v = 1` (positive) or `v = 0`
/// (negated), and edge / step atoms keep an explicit `Not` since they have no
/// complemented form.
pub fn push_negations(e: &Expr) -> Expr {
    push(e, false)
}

fn push(e: &Expr, neg: bool) -> Expr {
    match e {
        Expr::Not(inner) => push(inner, !neg),
        Expr::And(l, r) => {
            if neg {
                Expr::or(push(l, true), push(r, true))
            } else {
                Expr::and(push(l, false), push(r, false))
            }
        }
        Expr::Or(l, r) => {
            if neg {
                Expr::and(push(l, true), push(r, true))
            } else {
                Expr::or(push(l, false), push(r, false))
            }
        }
        Expr::Compare { op, lhs, rhs } => {
            let op = if neg { op.negate() } else { *op };
            Expr::cmp(op, (**lhs).clone(), (**rhs).clone())
        }
        Expr::Var(v) => {
            let rhs = if neg { 0 } else { 1 };
            Expr::cmp(CmpOp::Eq, Expr::Var(v.clone()), Expr::Int(rhs))
        }
        Expr::Bool(b) => Expr::Bool(*b != neg),
        // Integer constant in a boolean position: nonzero means true.
        Expr::Int(c) => Expr::Bool((*c != 0) != neg),
        Expr::Edge { .. } | Expr::StepRef { .. } => {
            if neg {
                Expr::not(e.clone())
            } else {
                e.clone()
            }
        }
        // Not boolean-sorted; leave untouched.
        Expr::Arith { .. } => e.clone(),
    }
}

/// True if no `Not` wraps anything other than an atom.
pub fn negations_at_atoms(e: &Expr) -> bool {
    match e {
        Expr::Not(inner) => inner.is_atom(),
        Expr::And(l, r) | Expr::Or(l, r) => negations_at_atoms(l) && negations_at_atoms(r),
        _ => true,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SortError {
    #[error("undeclared variable `{0}`")]
    UndeclaredVar(String),
    #[error("expected a boolean expression, found `{0}`")]
    ExpectedBool(String),
    #[error("expected an integer expression, found `{0}`")]
    ExpectedInt(String),
}

/// Infer the sort of `e`, checking operand sorts along the way. Booleans
/// coerce freely to integers ({0,1} ⊂ Z); integer literals 0 and 1 coerce to
/// booleans, other integer expressions do not.
pub fn sort_of(e: &Expr, lookup: &dyn Fn(&str) -> Option<Sort>) -> Result<Sort, SortError> {
    match e {
        Expr::Int(_) => Ok(Sort::Int),
        Expr::Bool(_) => Ok(Sort::Bool),
        Expr::Var(v) => lookup(v).ok_or_else(|| SortError::UndeclaredVar(v.clone())),
        Expr::StepRef { .. } => Ok(Sort::Bool),
        Expr::Edge { operand, .. } => {
            require_bool(operand, lookup)?;
            Ok(Sort::Bool)
        }
        Expr::Not(inner) => {
            require_bool(inner, lookup)?;
            Ok(Sort::Bool)
        }
        Expr::And(l, r) | Expr::Or(l, r) => {
            require_bool(l, lookup)?;
            require_bool(r, lookup)?;
            Ok(Sort::Bool)
        }
        Expr::Compare { lhs, rhs, .. } => {
            // Both operands are integers or boolean values encoded as {0,1}.
            sort_of(lhs, lookup)?;
            sort_of(rhs, lookup)?;
            Ok(Sort::Bool)
        }
        Expr::Arith { lhs, rhs, .. } => {
            sort_of(lhs, lookup)?;
            sort_of(rhs, lookup)?;
            Ok(Sort::Int)
        }
    }
}

/// Check that `e` can stand in a boolean position.
pub fn require_bool(e: &Expr, lookup: &dyn Fn(&str) -> Option<Sort>) -> Result<(), SortError> {
    match sort_of(e, lookup)? {
        Sort::Bool => Ok(()),
        Sort::Int => match e {
            Expr::Int(0) | Expr::Int(1) => Ok(()),
            _ => Err(SortError::ExpectedBool(e.to_string())),
        },
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("variable `{0}` has no value")]
    UndefinedVar(String),
    #[error("step `{0}.{1}` has no activity value")]
    UndefinedStep(String, StepId),
    #[error("arithmetic overflow while evaluating")]
    Overflow,
}

/// Concrete valuation: variable values plus step activity.
pub trait EvalEnv {
    fn var(&self, name: &str) -> Option<i64>;
    fn step_active(&self, partial: &str, step: StepId) -> Option<bool>;
}

/// Evaluate `e` over concrete values. Boolean results are 0/1. Edge atoms
/// compare the operand's truth between `prev` and `cur`; with no previous
/// valuation every edge is false.
pub fn eval(e: &Expr, cur: &dyn EvalEnv, prev: Option<&dyn EvalEnv>) -> Result<i64, EvalError> {
    match e {
        Expr::Int(c) => Ok(*c),
        Expr::Bool(b) => Ok(i64::from(*b)),
        Expr::Var(v) => cur.var(v).ok_or_else(|| EvalError::UndefinedVar(v.clone())),
        Expr::StepRef { partial, step } => cur
            .step_active(partial, *step)
            .map(i64::from)
            .ok_or_else(|| EvalError::UndefinedStep(partial.clone(), *step)),
        Expr::Edge { dir, operand } => {
            let now = eval(operand, cur, None)? != 0;
            let before = match prev {
                Some(p) => eval(operand, p, None)? != 0,
                None => return Ok(0),
            };
            let fired = match dir {
                EdgeDir::Rising => !before && now,
                EdgeDir::Falling => before && !now,
            };
            Ok(i64::from(fired))
        }
        Expr::Not(inner) => Ok(i64::from(eval(inner, cur, prev)? == 0)),
        Expr::And(l, r) => {
            let lv = eval(l, cur, prev)? != 0;
            let rv = eval(r, cur, prev)? != 0;
            Ok(i64::from(lv && rv))
        }
        Expr::Or(l, r) => {
            let lv = eval(l, cur, prev)? != 0;
            let rv = eval(r, cur, prev)? != 0;
            Ok(i64::from(lv || rv))
        }
        Expr::Compare { op, lhs, rhs } => {
            let lv = eval(lhs, cur, prev)?;
            let rv = eval(rhs, cur, prev)?;
            Ok(i64::from(op.eval(lv, rv)))
        }
        Expr::Arith { op, lhs, rhs } => {
            let lv = eval(lhs, cur, prev)?;
            let rv = eval(rhs, cur, prev)?;
            let out = match op {
                ArithOp::Add => lv.checked_add(rv),
                ArithOp::Sub => lv.checked_sub(rv),
                ArithOp::Mul => lv.checked_mul(rv),
            };
            out.ok_or(EvalError::Overflow)
        }
    }
}

// Precedence levels used by the printer: or < and < compare < add < mul < unary.
fn level(e: &Expr) -> u8 {
    match e {
        Expr::Or(..) => 0,
        Expr::And(..) => 1,
        Expr::Compare { .. } => 2,
        Expr::Arith { op, .. } => match op {
            ArithOp::Add | ArithOp::Sub => 3,
            ArithOp::Mul => 4,
        },
        _ => 5,
    }
}

fn fmt_child(e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if level(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(c) => write!(f, "{c}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::StepRef { partial, step } => write!(f, "step({partial}, {step})"),
            Expr::Edge { dir, operand } => {
                let name = match dir {
                    EdgeDir::Rising => "rising",
                    EdgeDir::Falling => "falling",
                };
                write!(f, "{name}({operand})")
            }
            Expr::Not(inner) => {
                write!(f, "!")?;
                fmt_child(inner, 5, f)
            }
            Expr::And(l, r) => {
                fmt_child(l, 1, f)?;
                write!(f, " & ")?;
                fmt_child(r, 2, f)
            }
            Expr::Or(l, r) => {
                fmt_child(l, 0, f)?;
                write!(f, " | ")?;
                fmt_child(r, 1, f)
            }
            Expr::Compare { op, lhs, rhs } => {
                fmt_child(lhs, 3, f)?;
                write!(f, " {op} ")?;
                fmt_child(rhs, 3, f)
            }
            Expr::Arith { op, lhs, rhs } => {
                let lvl = level(self);
                fmt_child(lhs, lvl, f)?;
                write!(f, " {op} ")?;
                fmt_child(rhs, lvl + 1, f)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    struct MapEnv(BTreeMap<String, i64>);

    impl EvalEnv for MapEnv {
        fn var(&self, name: &str) -> Option<i64> {
            self.0.get(name).copied()
        }
        fn step_active(&self, _: &str, _: StepId) -> Option<bool> {
            None
        }
    }

    fn k() -> Expr {
        Expr::var("k")
    }

    #[test]
    fn free_vars_of_edge() {
        let fv = free_vars(&Expr::rising(Expr::var("x")));
        assert_eq!(fv.vars.into_iter().collect::<Vec<_>>(), ["x"]);
        assert!(fv.steps.is_empty());
    }

    #[test]
    fn free_vars_of_conjunction() {
        let e = Expr::and(
            Expr::cmp(CmpOp::Eq, Expr::var("k2"), Expr::Int(3)),
            Expr::not(Expr::var("fault")),
        );
        let fv = free_vars(&e);
        assert_eq!(fv.vars.into_iter().collect::<Vec<_>>(), ["fault", "k2"]);
    }

    #[test]
    fn free_vars_of_constant() {
        assert_eq!(free_vars(&Expr::Int(0)), FreeVars::default());
    }

    #[test]
    fn push_negations_demorgan() {
        // !(X & !Y)  ==>  (X = 0) | (Y = 1)
        let e = Expr::not(Expr::and(Expr::var("X"), Expr::not(Expr::var("Y"))));
        let expected = Expr::or(
            Expr::cmp(CmpOp::Eq, Expr::var("X"), Expr::Int(0)),
            Expr::cmp(CmpOp::Eq, Expr::var("Y"), Expr::Int(1)),
        );
        assert_eq!(push_negations(&e), expected);
    }

    #[test]
    fn push_negations_flips_comparison() {
        let e = Expr::not(Expr::cmp(CmpOp::Le, k(), Expr::Int(2)));
        assert_eq!(push_negations(&e), Expr::cmp(CmpOp::Gt, k(), Expr::Int(2)));
    }

    #[test]
    fn push_negations_keeps_negated_edge_atom() {
        let e = Expr::not(Expr::rising(Expr::var("x")));
        assert_eq!(push_negations(&e), e);
    }

    #[test]
    fn push_negations_output_shape() {
        let e = Expr::not(Expr::or(
            Expr::and(Expr::var("a"), Expr::var("b")),
            Expr::not(Expr::cmp(CmpOp::Lt, k(), Expr::var("m"))),
        ));
        let pushed = push_negations(&e);
        assert!(negations_at_atoms(&pushed));
    }

    /// Semantic preservation, exhaustively over all {0,1} assignments to up
    /// to four boolean variables plus small integer ranges.
    #[test]
    fn push_negations_preserves_semantics() {
        let bools = ["a", "b", "c", "d"];
        let cases = vec![
            Expr::not(Expr::and(Expr::var("a"), Expr::not(Expr::var("b")))),
            Expr::not(Expr::or(
                Expr::var("a"),
                Expr::and(Expr::var("b"), Expr::var("c")),
            )),
            Expr::not(Expr::not(Expr::var("a"))),
            Expr::not(Expr::and(
                Expr::or(Expr::var("a"), Expr::not(Expr::var("b"))),
                Expr::or(Expr::not(Expr::var("c")), Expr::var("d")),
            )),
            Expr::not(Expr::cmp(CmpOp::Ne, k(), Expr::Int(2))),
            Expr::not(Expr::and(
                Expr::cmp(CmpOp::Le, k(), Expr::Int(1)),
                Expr::not(Expr::var("a")),
            )),
            Expr::not(Expr::or(
                Expr::not(Expr::cmp(CmpOp::Gt, k(), Expr::var("m"))),
                Expr::not(Expr::var("d")),
            )),
        ];
        for e in cases {
            let pushed = push_negations(&e);
            assert!(negations_at_atoms(&pushed), "not pushed: {pushed}");
            for bits in 0..16u32 {
                for kv in 0..4i64 {
                    for mv in 0..4i64 {
                        let mut m = BTreeMap::new();
                        for (i, name) in bools.iter().enumerate() {
                            m.insert((*name).to_string(), i64::from(bits >> i & 1));
                        }
                        m.insert("k".into(), kv);
                        m.insert("m".into(), mv);
                        let env = MapEnv(m);
                        let a = eval(&e, &env, None).unwrap();
                        let b = eval(&pushed, &env, None).unwrap();
                        assert_eq!(a != 0, b != 0, "{e} vs {pushed} at bits={bits} k={kv}");
                    }
                }
            }
        }
    }

    #[test]
    fn sort_checking() {
        let lookup = |name: &str| match name {
            "b" => Some(Sort::Bool),
            "k" => Some(Sort::Int),
            _ => None,
        };
        assert_eq!(
            sort_of(&Expr::and(Expr::var("b"), Expr::Bool(true)), &lookup),
            Ok(Sort::Bool)
        );
        // Booleans coerce to integers inside comparisons and arithmetic.
        assert_eq!(
            sort_of(
                &Expr::cmp(CmpOp::Eq, Expr::var("b"), Expr::Int(1)),
                &lookup
            ),
            Ok(Sort::Bool)
        );
        assert_eq!(
            sort_of(&Expr::add(Expr::var("b"), Expr::var("k")), &lookup),
            Ok(Sort::Int)
        );
        // An integer variable is not a boolean atom.
        assert!(require_bool(&Expr::var("k"), &lookup).is_err());
        // Integer literals 0/1 are.
        assert!(require_bool(&Expr::Int(1), &lookup).is_ok());
        assert!(require_bool(&Expr::Int(2), &lookup).is_err());
        assert_eq!(
            sort_of(&Expr::var("zz"), &lookup),
            Err(SortError::UndeclaredVar("zz".into()))
        );
    }

    #[test]
    fn display_round_trips_precedence() {
        let e = Expr::or(
            Expr::and(
                Expr::var("a"),
                Expr::cmp(
                    CmpOp::Le,
                    Expr::add(k(), Expr::Int(1)),
                    Expr::arith(ArithOp::Mul, Expr::Int(2), Expr::var("m")),
                ),
            ),
            Expr::not(Expr::var("b")),
        );
        assert_eq!(e.to_string(), "a & k + 1 <= 2 * m | !b");
        let nested = Expr::arith(
            ArithOp::Mul,
            Expr::add(k(), Expr::Int(1)),
            Expr::sub(Expr::Int(4), k()),
        );
        assert_eq!(nested.to_string(), "(k + 1) * (4 - k)");
        let assoc = Expr::sub(Expr::sub(k(), Expr::Int(1)), Expr::Int(2));
        assert_eq!(assoc.to_string(), "k - 1 - 2");
        let right = Expr::sub(k(), Expr::sub(Expr::Int(1), Expr::Int(2)));
        assert_eq!(right.to_string(), "k - (1 - 2)");
    }
}
