//! Abstract environments: one interval per tracked variable, plus the
//! transfer primitives (expression evaluation, condition filtering, and
//! assignment) the worklist analysis is built from.
//!
//! Tracked variables are the internal and output variables written by stored
//! actions of the analyzed partial chart. Everything else (inputs, variables
//! owned by other charts) evaluates to ⊤, or [0, 1] when boolean-sorted, so
//! the sort information is never lost.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::domain::interval::Interval;
use crate::expr::{CmpOp, Expr, Sort};
use crate::model::{Grafcet, PartialGrafcet, StepId};

/// Truth of a step activity atom at a particular flow node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Unknown,
}

/// Resolves `step(P, n)` atoms during filtering. The analysis provides a
/// node-specific resolver; everything else can use [`NondetSteps`].
pub trait StepRefResolver {
    fn resolve(&self, partial: &str, step: StepId) -> Truth;
}

/// Treats every step atom as unconstrained.
pub struct NondetSteps;

impl StepRefResolver for NondetSteps {
    fn resolve(&self, _: &str, _: StepId) -> Truth {
        Truth::Unknown
    }
}

/// The set of tracked variables of one partial chart, with the sorts of every
/// declared variable for evaluating untracked reads.
#[derive(Debug, PartialEq, Eq)]
pub struct VarSchema {
    tracked: Vec<(String, Sort)>,
    index: BTreeMap<String, usize>,
    all_sorts: BTreeMap<String, Sort>,
}

impl VarSchema {
    pub fn new(
        tracked: impl IntoIterator<Item = (String, Sort)>,
        all_sorts: BTreeMap<String, Sort>,
    ) -> Arc<VarSchema> {
        let mut tracked: Vec<(String, Sort)> = tracked.into_iter().collect();
        tracked.sort();
        tracked.dedup();
        let index = tracked
            .iter()
            .enumerate()
            .map(|(i, (name, _))| (name.clone(), i))
            .collect();
        Arc::new(VarSchema { tracked, index, all_sorts })
    }

    pub fn for_partial(g: &Grafcet, p: &PartialGrafcet) -> Arc<VarSchema> {
        let all_sorts: BTreeMap<String, Sort> =
            g.variables.iter().map(|v| (v.name.clone(), v.sort)).collect();
        let tracked = g
            .tracked_vars(p)
            .into_iter()
            .map(|name| {
                let sort = all_sorts.get(&name).copied().unwrap_or(Sort::Int);
                (name, sort)
            })
            .collect::<Vec<_>>();
        VarSchema::new(tracked, all_sorts)
    }

    pub fn is_tracked(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn tracked(&self) -> impl Iterator<Item = (&str, Sort)> {
        self.tracked.iter().map(|(n, s)| (n.as_str(), *s))
    }

    pub fn len(&self) -> usize {
        self.tracked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracked.is_empty()
    }

    pub fn sort_of(&self, name: &str) -> Option<Sort> {
        self.all_sorts.get(name).copied()
    }

    /// The widest interval a variable of this sort may take.
    pub fn sort_top(&self, sort: Sort) -> Interval {
        match sort {
            Sort::Bool => Interval::BOOL,
            Sort::Int => Interval::TOP,
        }
    }
}

/// Lattice element attached to each flow node: an interval per tracked
/// variable, normalized so that any empty component collapses the whole
/// environment to ⊥.
#[derive(Clone, PartialEq, Eq)]
pub struct AbstractEnv {
    schema: Arc<VarSchema>,
    vals: Option<Vec<Interval>>,
}

impl AbstractEnv {
    pub fn bottom(schema: Arc<VarSchema>) -> AbstractEnv {
        AbstractEnv { schema, vals: None }
    }

    /// Every tracked variable at [0, 0]: the declared initial values.
    pub fn init_zero(schema: Arc<VarSchema>) -> AbstractEnv {
        let vals = vec![Interval::constant(0); schema.len()];
        AbstractEnv { schema, vals: Some(vals) }
    }

    /// Every tracked variable unconstrained within its sort.
    pub fn top(schema: Arc<VarSchema>) -> AbstractEnv {
        let vals = schema
            .tracked
            .iter()
            .map(|(_, sort)| schema.sort_top(*sort))
            .collect();
        AbstractEnv { schema, vals: Some(vals) }
    }

    fn with_vals(schema: Arc<VarSchema>, vals: Vec<Interval>) -> AbstractEnv {
        if vals.iter().any(Interval::is_bottom) {
            AbstractEnv { schema, vals: None }
        } else {
            AbstractEnv { schema, vals: Some(vals) }
        }
    }

    pub fn schema(&self) -> &Arc<VarSchema> {
        &self.schema
    }

    pub fn is_bottom(&self) -> bool {
        self.vals.is_none()
    }

    /// Interval of a tracked variable; `None` when untracked or env is ⊥.
    pub fn get(&self, name: &str) -> Option<Interval> {
        let idx = *self.schema.index.get(name)?;
        self.vals.as_ref().map(|v| v[idx])
    }

    /// Bindings in schema order (empty iterator when ⊥).
    pub fn bindings(&self) -> impl Iterator<Item = (&str, Interval)> {
        self.vals
            .iter()
            .flat_map(move |vals| {
                self.schema
                    .tracked
                    .iter()
                    .zip(vals.iter())
                    .map(|((name, _), iv)| (name.as_str(), *iv))
            })
    }

    pub fn join(&self, other: &AbstractEnv) -> AbstractEnv {
        debug_assert!(Arc::ptr_eq(&self.schema, &other.schema));
        match (&self.vals, &other.vals) {
            (None, _) => other.clone(),
            (_, None) => self.clone(),
            (Some(a), Some(b)) => {
                let vals = a.iter().zip(b.iter()).map(|(x, y)| x.join(*y)).collect();
                AbstractEnv::with_vals(self.schema.clone(), vals)
            }
        }
    }

    pub fn meet(&self, other: &AbstractEnv) -> AbstractEnv {
        debug_assert!(Arc::ptr_eq(&self.schema, &other.schema));
        match (&self.vals, &other.vals) {
            (None, _) | (_, None) => AbstractEnv::bottom(self.schema.clone()),
            (Some(a), Some(b)) => {
                let vals = a.iter().zip(b.iter()).map(|(x, y)| x.meet(*y)).collect();
                AbstractEnv::with_vals(self.schema.clone(), vals)
            }
        }
    }

    pub fn leq(&self, other: &AbstractEnv) -> bool {
        debug_assert!(Arc::ptr_eq(&self.schema, &other.schema));
        match (&self.vals, &other.vals) {
            (None, _) => true,
            (_, None) => false,
            (Some(a), Some(b)) => a.iter().zip(b.iter()).all(|(x, y)| x.leq(*y)),
        }
    }

    /// Pointwise widening, clamped back into each variable's sort range so
    /// boolean variables never leave [0, 1].
    pub fn widen(&self, new: &AbstractEnv) -> AbstractEnv {
        debug_assert!(Arc::ptr_eq(&self.schema, &new.schema));
        match (&self.vals, &new.vals) {
            (None, _) => new.clone(),
            (_, None) => self.clone(),
            (Some(a), Some(b)) => {
                let vals = a
                    .iter()
                    .zip(b.iter())
                    .zip(self.schema.tracked.iter())
                    .map(|((x, y), (_, sort))| x.widen(*y).meet(self.schema.sort_top(*sort)))
                    .collect();
                AbstractEnv::with_vals(self.schema.clone(), vals)
            }
        }
    }

    fn set(&self, idx: usize, iv: Interval) -> AbstractEnv {
        match &self.vals {
            None => self.clone(),
            Some(vals) => {
                let mut vals = vals.clone();
                vals[idx] = iv;
                AbstractEnv::with_vals(self.schema.clone(), vals)
            }
        }
    }
}

impl fmt::Debug for AbstractEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.vals {
            None => write!(f, "bottom"),
            Some(_) => {
                let mut map = f.debug_map();
                for (name, iv) in self.bindings() {
                    map.entry(&name, &format_args!("{iv}"));
                }
                map.finish()
            }
        }
    }
}

/// Sound interval for an integer-sorted expression (booleans are {0,1}).
/// Untracked variables evaluate to the top of their sort; edge and step atoms
/// to [0, 1].
pub fn eval_arith(e: &Expr, env: &AbstractEnv) -> Interval {
    if env.is_bottom() {
        return Interval::Bottom;
    }
    match e {
        Expr::Int(c) => Interval::constant(*c),
        Expr::Bool(b) => Interval::constant(i64::from(*b)),
        Expr::Var(name) => match env.get(name) {
            Some(iv) => iv,
            None => match env.schema.sort_of(name) {
                Some(sort) => env.schema.sort_top(sort),
                None => Interval::TOP,
            },
        },
        Expr::StepRef { .. } | Expr::Edge { .. } => Interval::BOOL,
        Expr::Arith { op, lhs, rhs } => {
            let l = eval_arith(lhs, env);
            let r = eval_arith(rhs, env);
            match op {
                crate::expr::ArithOp::Add => l.add(r),
                crate::expr::ArithOp::Sub => l.sub(r),
                crate::expr::ArithOp::Mul => l.mul(r),
            }
        }
        Expr::Compare { op, lhs, rhs } => {
            let l = eval_arith(lhs, env);
            let r = eval_arith(rhs, env);
            match cmp_certain(*op, l, r) {
                Some(true) => Interval::constant(1),
                Some(false) => Interval::constant(0),
                None => Interval::BOOL,
            }
        }
        Expr::Not(inner) => match truth_of(inner, env) {
            Some(true) => Interval::constant(0),
            Some(false) => Interval::constant(1),
            None => Interval::BOOL,
        },
        Expr::And(l, r) => match (truth_of(l, env), truth_of(r, env)) {
            (Some(false), _) | (_, Some(false)) => Interval::constant(0),
            (Some(true), Some(true)) => Interval::constant(1),
            _ => Interval::BOOL,
        },
        Expr::Or(l, r) => match (truth_of(l, env), truth_of(r, env)) {
            (Some(true), _) | (_, Some(true)) => Interval::constant(1),
            (Some(false), Some(false)) => Interval::constant(0),
            _ => Interval::BOOL,
        },
    }
}

fn truth_of(e: &Expr, env: &AbstractEnv) -> Option<bool> {
    let iv = eval_arith(e, env);
    if iv == Interval::constant(0) {
        Some(false)
    } else if iv.leq(Interval::TOP) && !iv.contains(0) && !iv.is_bottom() {
        Some(true)
    } else {
        None
    }
}

/// Definite outcome of `l op r` over intervals, if one exists.
fn cmp_certain(op: CmpOp, l: Interval, r: Interval) -> Option<bool> {
    let (llo, lhi) = (l.lo()?, l.hi()?);
    let (rlo, rhi) = (r.lo()?, r.hi()?);
    match op {
        CmpOp::Lt => {
            if lhi < rlo {
                Some(true)
            } else if llo >= rhi {
                Some(false)
            } else {
                None
            }
        }
        CmpOp::Le => {
            if lhi <= rlo {
                Some(true)
            } else if llo > rhi {
                Some(false)
            } else {
                None
            }
        }
        CmpOp::Gt => cmp_certain(CmpOp::Lt, r, l),
        CmpOp::Ge => cmp_certain(CmpOp::Le, r, l),
        CmpOp::Eq => {
            if llo == lhi && rlo == rhi && llo == rlo {
                Some(true)
            } else if l.meet(r).is_bottom() {
                Some(false)
            } else {
                None
            }
        }
        CmpOp::Ne => cmp_certain(CmpOp::Eq, l, r).map(|b| !b),
    }
}

/// Restrict `env` to the states where `cond` may hold. Conjunction maps to
/// meet, disjunction to join, comparisons refine the compared variable, and
/// atoms the domain cannot see through (edges, untracked variables) leave the
/// environment unchanged.
///
/// `cond` is expected to have negations pushed to atoms; anything else is
/// normalized on the fly.
pub fn filter(env: &AbstractEnv, cond: &Expr, steps: &dyn StepRefResolver) -> AbstractEnv {
    if env.is_bottom() {
        return env.clone();
    }
    match cond {
        Expr::Bool(true) => env.clone(),
        Expr::Bool(false) => AbstractEnv::bottom(env.schema.clone()),
        Expr::Int(c) => {
            if *c != 0 {
                env.clone()
            } else {
                AbstractEnv::bottom(env.schema.clone())
            }
        }
        Expr::And(l, r) => filter(env, l, steps).meet(&filter(env, r, steps)),
        Expr::Or(l, r) => filter(env, l, steps).join(&filter(env, r, steps)),
        Expr::Compare { op, lhs, rhs } => refine_compare(env, *op, lhs, rhs),
        Expr::Var(name) => refine_var(env, name, CmpOp::Eq, Interval::constant(1)),
        Expr::StepRef { partial, step } => match steps.resolve(partial, *step) {
            Truth::False => AbstractEnv::bottom(env.schema.clone()),
            Truth::True | Truth::Unknown => env.clone(),
        },
        Expr::Edge { .. } => env.clone(),
        Expr::Not(inner) => match &**inner {
            Expr::Edge { .. } => env.clone(),
            Expr::StepRef { partial, step } => match steps.resolve(partial, *step) {
                Truth::True => AbstractEnv::bottom(env.schema.clone()),
                Truth::False | Truth::Unknown => env.clone(),
            },
            other => filter(env, &crate::expr::push_negations(&Expr::not(other.clone())), steps),
        },
        // Not boolean-sorted; treat as unconstrained.
        Expr::Arith { .. } => env.clone(),
    }
}

fn refine_compare(env: &AbstractEnv, op: CmpOp, lhs: &Expr, rhs: &Expr) -> AbstractEnv {
    let mut out = env.clone();
    let mut refined = false;
    if let Expr::Var(name) = lhs {
        if env.schema.is_tracked(name) {
            let other = eval_arith(rhs, &out);
            out = refine_var(&out, name, op, other);
            refined = true;
        }
    }
    if let Expr::Var(name) = rhs {
        if env.schema.is_tracked(name) && !out.is_bottom() {
            let other = eval_arith(lhs, &out);
            out = refine_var(&out, name, op.swap(), other);
            refined = true;
        }
    }
    if refined {
        return out;
    }
    // No tracked variable on either side: keep the environment unless the
    // atom is definitely unsatisfiable.
    let l = eval_arith(lhs, env);
    let r = eval_arith(rhs, env);
    if cmp_certain(op, l, r) == Some(false) {
        AbstractEnv::bottom(env.schema.clone())
    } else {
        env.clone()
    }
}

fn refine_var(env: &AbstractEnv, name: &str, op: CmpOp, other: Interval) -> AbstractEnv {
    let idx = match env.schema.index.get(name) {
        Some(i) => *i,
        None => return env.clone(),
    };
    let cur = match &env.vals {
        Some(vals) => vals[idx],
        None => return env.clone(),
    };
    let refined = match op {
        CmpOp::Eq => cur.refine_eq(other),
        CmpOp::Ne => cur.refine_ne(other),
        CmpOp::Lt => cur.refine_lt(other),
        CmpOp::Le => cur.refine_le(other),
        CmpOp::Gt => cur.refine_gt(other),
        CmpOp::Ge => cur.refine_ge(other),
    };
    env.set(idx, refined)
}

/// Rebinds `target` to the value of `value`, clamped into the target's sort
/// range. Returns the new environment and whether the clamp emptied a
/// non-empty value (a sort conflict the caller reports).
pub fn assign_checked(env: &AbstractEnv, target: &str, value: &Expr) -> (AbstractEnv, bool) {
    if env.is_bottom() {
        return (env.clone(), false);
    }
    let idx = match env.schema.index.get(target) {
        Some(i) => *i,
        // Untracked target: nothing to rebind.
        None => return (env.clone(), false),
    };
    let raw = eval_arith(value, env);
    let sort = env.schema.tracked[idx].1;
    let clamped = raw.meet(env.schema.sort_top(sort));
    let conflict = clamped.is_bottom() && !raw.is_bottom();
    (env.set(idx, clamped), conflict)
}

pub fn assign(env: &AbstractEnv, target: &str, value: &Expr) -> AbstractEnv {
    assign_checked(env, target, value).0
}
