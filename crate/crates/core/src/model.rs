//! In-memory representation and structural validation of a hierarchical
//! GRAFCET specification: partial charts made of steps and transitions, with
//! continuous / stored / forcing actions and global variable declarations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::expr::{self, Expr, FreeVars, Sort};

/// Step identifier, unique within its partial chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StepId(pub u32);

impl fmt::Display for StepId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarKind {
    Input,
    Internal,
    Output,
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarKind::Input => write!(f, "input"),
            VarKind::Internal => write!(f, "internal"),
            VarKind::Output => write!(f, "output"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableDecl {
    pub name: String,
    pub kind: VarKind,
    pub sort: Sort,
}

/// When a stored action executes relative to its owning step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Trigger {
    OnActivation,
    OnDeactivation,
    OnEvent(Expr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ForcedSituation {
    /// Retain the current situation of the forced chart.
    Star,
    /// Force the chart into its initial situation.
    Init,
    /// Force the chart into exactly these steps.
    Explicit(BTreeSet<StepId>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    /// Drives a boolean output while the step is active and the condition
    /// holds; multiple writers combine by disjunction.
    Continuous { target: String, condition: Option<Expr> },
    /// Assigns `value` to `target` when the trigger occurs.
    Stored {
        target: String,
        value: Expr,
        trigger: Trigger,
    },
    /// Forces another partial chart into a given situation while active.
    Forcing {
        target_partial: String,
        situation: ForcedSituation,
    },
}

impl Action {
    /// The variable this action writes, if any.
    pub fn written_var(&self) -> Option<&str> {
        match self {
            Action::Continuous { target, .. } | Action::Stored { target, .. } => Some(target),
            Action::Forcing { .. } => None,
        }
    }

    /// Variables read by the action's value and condition expressions.
    pub fn read_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut add = |fv: FreeVars| out.extend(fv.vars);
        match self {
            Action::Continuous { condition, .. } => {
                if let Some(c) = condition {
                    add(expr::free_vars(c));
                }
            }
            Action::Stored { value, trigger, .. } => {
                add(expr::free_vars(value));
                if let Trigger::OnEvent(c) = trigger {
                    add(expr::free_vars(c));
                }
            }
            Action::Forcing { .. } => {}
        }
        out
    }

    pub fn is_stored(&self) -> bool {
        matches!(self, Action::Stored { .. })
    }
}

/// Two actions depend on each other when they write the same variable or one
/// reads a variable the other writes. Exactly the races that make execution
/// order observable.
pub fn depends_on(a: &Action, b: &Action) -> bool {
    let wa = a.written_var();
    let wb = b.written_var();
    if let (Some(x), Some(y)) = (wa, wb) {
        if x == y {
            return true;
        }
    }
    if let Some(x) = wa {
        if b.read_vars().contains(x) {
            return true;
        }
    }
    if let Some(y) = wb {
        if a.read_vars().contains(y) {
            return true;
        }
    }
    false
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub id: StepId,
    pub initial: bool,
    pub marked: bool,
    /// Name of the partial chart this step encloses, if any.
    pub encloses: Option<String>,
    pub actions: Vec<Action>,
}

impl Step {
    pub fn new(id: u32) -> Step {
        Step {
            id: StepId(id),
            initial: false,
            marked: false,
            encloses: None,
            actions: Vec::new(),
        }
    }

    pub fn initial(mut self) -> Step {
        self.initial = true;
        self
    }

    pub fn marked(mut self) -> Step {
        self.marked = true;
        self
    }

    pub fn with_action(mut self, a: Action) -> Step {
        self.actions.push(a);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub id: String,
    pub upstream: BTreeSet<StepId>,
    pub downstream: BTreeSet<StepId>,
    pub condition: Expr,
}

impl Transition {
    pub fn new(
        id: impl Into<String>,
        upstream: impl IntoIterator<Item = u32>,
        downstream: impl IntoIterator<Item = u32>,
        condition: Expr,
    ) -> Transition {
        Transition {
            id: id.into(),
            upstream: upstream.into_iter().map(StepId).collect(),
            downstream: downstream.into_iter().map(StepId).collect(),
            condition,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialGrafcet {
    pub name: String,
    pub steps: Vec<Step>,
    pub transitions: Vec<Transition>,
}

impl PartialGrafcet {
    pub fn step(&self, id: StepId) -> Option<&Step> {
        self.steps.iter().find(|s| s.id == id)
    }

    pub fn transition(&self, id: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.id == id)
    }

    pub fn initial_steps(&self) -> BTreeSet<StepId> {
        self.steps.iter().filter(|s| s.initial).map(|s| s.id).collect()
    }

    pub fn marked_steps(&self) -> BTreeSet<StepId> {
        self.steps.iter().filter(|s| s.marked).map(|s| s.id).collect()
    }

    /// A chart is enclosed iff it has marked steps.
    pub fn is_enclosed(&self) -> bool {
        self.steps.iter().any(|s| s.marked)
    }

    /// Transitions leaving step `s` (those with `s` in their upstream).
    pub fn downstream_transitions(&self, s: StepId) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.upstream.contains(&s))
    }

    /// Transitions entering step `s` (those with `s` in their downstream).
    pub fn upstream_transitions(&self, s: StepId) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.downstream.contains(&s))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grafcet {
    pub variables: Vec<VariableDecl>,
    pub partials: Vec<PartialGrafcet>,
}

impl Grafcet {
    pub fn partial(&self, name: &str) -> Option<&PartialGrafcet> {
        self.partials.iter().find(|p| p.name == name)
    }

    pub fn var(&self, name: &str) -> Option<&VariableDecl> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn sort_lookup(&self) -> impl Fn(&str) -> Option<Sort> + '_ {
        move |name| self.var(name).map(|v| v.sort)
    }

    /// Internal and output variables written by stored actions of `p`; these
    /// are the variables the per-partial analysis tracks.
    pub fn tracked_vars(&self, p: &PartialGrafcet) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for step in &p.steps {
            for action in &step.actions {
                if let Action::Stored { target, .. } = action {
                    if let Some(decl) = self.var(target) {
                        if decl.kind != VarKind::Input {
                            out.insert(target.clone());
                        }
                    }
                }
            }
        }
        out
    }
}

/// A step or transition of one partial chart.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeRef {
    Step(StepId),
    Transition(String),
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Step(id) => write!(f, "step {id}"),
            NodeRef::Transition(id) => write!(f, "transition {id}"),
        }
    }
}

/// Successor relation over the arc structure: a step leads to the transitions
/// it enables, a transition leads to its downstream steps.
pub fn successors(p: &PartialGrafcet, n: &NodeRef) -> Result<BTreeSet<NodeRef>, UnknownNode> {
    match n {
        NodeRef::Step(id) => {
            if p.step(*id).is_none() {
                return Err(UnknownNode(n.clone()));
            }
            Ok(p.downstream_transitions(*id)
                .map(|t| NodeRef::Transition(t.id.clone()))
                .collect())
        }
        NodeRef::Transition(id) => {
            let t = p.transition(id).ok_or_else(|| UnknownNode(n.clone()))?;
            Ok(t.downstream.iter().map(|s| NodeRef::Step(*s)).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown node: {0}")]
pub struct UnknownNode(pub NodeRef);

/// Where the analysis of a partial chart begins.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntryNodes {
    /// Initial steps, or marked steps when the chart is enclosed.
    pub normal: BTreeSet<StepId>,
    /// Steps named in explicit forcing orders targeting this chart; analyzed
    /// with all tracked variables unconstrained, since a forcing order can
    /// occur at any time with any accumulated values.
    pub forced: BTreeSet<StepId>,
}

pub fn entry_nodes(g: &Grafcet, p: &PartialGrafcet) -> EntryNodes {
    let marked = p.marked_steps();
    let normal = if marked.is_empty() {
        p.initial_steps()
    } else {
        marked
    };
    let mut forced = BTreeSet::new();
    for other in &g.partials {
        for step in &other.steps {
            for action in &step.actions {
                if let Action::Forcing {
                    target_partial,
                    situation: ForcedSituation::Explicit(set),
                } = action
                {
                    if target_partial == &p.name {
                        forced.extend(set.iter().copied());
                    }
                }
            }
        }
    }
    EntryNodes { normal, forced }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelRule {
    NoPartials,
    DuplicateVar,
    DuplicatePartial,
    DuplicateStep,
    DuplicateTransition,
    EmptyTransition,
    UnknownStep,
    UnknownPartial,
    SelfEnclosure,
    UndeclaredVar,
    ContStoredOverlap,
    ContTargetInvalid,
    StoredTargetInvalid,
    SortError,
    InitialAndMarked,
}

impl fmt::Display for ModelRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelRule::NoPartials => "NO_PARTIALS",
            ModelRule::DuplicateVar => "DUPLICATE_VAR",
            ModelRule::DuplicatePartial => "DUPLICATE_PARTIAL",
            ModelRule::DuplicateStep => "DUPLICATE_STEP",
            ModelRule::DuplicateTransition => "DUPLICATE_TRANSITION",
            ModelRule::EmptyTransition => "EMPTY_TRANSITION",
            ModelRule::UnknownStep => "UNKNOWN_STEP",
            ModelRule::UnknownPartial => "UNKNOWN_PARTIAL",
            ModelRule::SelfEnclosure => "SELF_ENCLOSURE",
            ModelRule::UndeclaredVar => "UNDECLARED_VAR",
            ModelRule::ContStoredOverlap => "CONT_STORED_OVERLAP",
            ModelRule::ContTargetInvalid => "CONT_TARGET_INVALID",
            ModelRule::StoredTargetInvalid => "STORED_TARGET_INVALID",
            ModelRule::SortError => "SORT_ERROR",
            ModelRule::InitialAndMarked => "INITIAL_AND_MARKED",
        };
        write!(f, "{s}")
    }
}

/// A structural rule violation, tagged with the rule and the offending
/// element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelError {
    pub rule: ModelRule,
    pub severity: Severity,
    /// Owning partial chart, when the element belongs to one.
    pub partial: Option<String>,
    /// Identifier of the offending element (step, transition, variable, ...).
    pub element: String,
    pub message: String,
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match &self.partial {
            Some(p) => write!(f, "{sev}[{}] {p}/{}: {}", self.rule, self.element, self.message),
            None => write!(f, "{sev}[{}] {}: {}", self.rule, self.element, self.message),
        }
    }
}

/// True when the list carries no errors (warnings are acceptable).
pub fn is_admissible(errors: &[ModelError]) -> bool {
    errors.iter().all(|e| e.severity == Severity::Warning)
}

fn err(
    out: &mut Vec<ModelError>,
    rule: ModelRule,
    partial: Option<&str>,
    element: &str,
    message: String,
) {
    out.push(ModelError {
        rule,
        severity: Severity::Error,
        partial: partial.map(str::to_owned),
        element: element.to_owned(),
        message,
    });
}

fn check_expr(
    g: &Grafcet,
    e: &Expr,
    want_bool: bool,
    partial: &str,
    element: &str,
    out: &mut Vec<ModelError>,
) {
    let fv = expr::free_vars(e);
    for name in &fv.vars {
        if g.var(name).is_none() {
            err(
                out,
                ModelRule::UndeclaredVar,
                Some(partial),
                element,
                format!("reference to undeclared variable `{name}`"),
            );
        }
    }
    for (pname, sid) in &fv.steps {
        match g.partial(pname) {
            None => err(
                out,
                ModelRule::UnknownPartial,
                Some(partial),
                element,
                format!("step reference into unknown partial chart `{pname}`"),
            ),
            Some(target) if target.step(*sid).is_none() => err(
                out,
                ModelRule::UnknownStep,
                Some(partial),
                element,
                format!("step reference `step({pname}, {sid})` names a missing step"),
            ),
            _ => {}
        }
    }
    // Sort checking is only meaningful once every variable resolves.
    if fv.vars.iter().all(|name| g.var(name).is_some()) {
        let sorts = g.sort_lookup();
        let result = if want_bool {
            expr::require_bool(e, &sorts)
        } else {
            expr::sort_of(e, &sorts).map(|_| ())
        };
        if let Err(se) = result {
            err(out, ModelRule::SortError, Some(partial), element, se.to_string());
        }
    }
}

/// Check every structural invariant of the model. The returned list is
/// order-normalized; an empty list (or warnings only) means the model is
/// admissible for analysis.
pub fn validate(g: &Grafcet) -> Vec<ModelError> {
    let mut out = Vec::new();

    if g.partials.is_empty() {
        err(
            &mut out,
            ModelRule::NoPartials,
            None,
            "<model>",
            "a specification must contain at least one partial chart".into(),
        );
    }

    // Variable declarations: unique names across all kinds.
    let mut seen_vars = BTreeSet::new();
    for v in &g.variables {
        if !seen_vars.insert(v.name.clone()) {
            err(
                &mut out,
                ModelRule::DuplicateVar,
                None,
                &v.name,
                format!("variable `{}` declared more than once", v.name),
            );
        }
    }

    let mut seen_partials = BTreeSet::new();
    for p in &g.partials {
        if !seen_partials.insert(p.name.clone()) {
            err(
                &mut out,
                ModelRule::DuplicatePartial,
                None,
                &p.name,
                format!("partial chart `{}` declared more than once", p.name),
            );
        }
    }

    for p in &g.partials {
        let mut step_ids = BTreeSet::new();
        for s in &p.steps {
            let elem = format!("step {}", s.id);
            if !step_ids.insert(s.id) {
                err(
                    &mut out,
                    ModelRule::DuplicateStep,
                    Some(&p.name),
                    &elem,
                    format!("step id {} used more than once", s.id),
                );
            }
            if s.initial && s.marked {
                out.push(ModelError {
                    rule: ModelRule::InitialAndMarked,
                    severity: Severity::Warning,
                    partial: Some(p.name.clone()),
                    element: elem.clone(),
                    message: "step is both initial and marked; entry via marking wins".into(),
                });
            }
            match &s.encloses {
                Some(target) if target == &p.name => err(
                    &mut out,
                    ModelRule::SelfEnclosure,
                    Some(&p.name),
                    &elem,
                    "a step cannot enclose its own partial chart".into(),
                ),
                Some(target) if g.partial(target).is_none() => err(
                    &mut out,
                    ModelRule::UnknownPartial,
                    Some(&p.name),
                    &elem,
                    format!("enclosed partial chart `{target}` does not exist"),
                ),
                _ => {}
            }

            for a in &s.actions {
                match a {
                    Action::Continuous { target, condition } => {
                        match g.var(target) {
                            None => err(
                                &mut out,
                                ModelRule::UndeclaredVar,
                                Some(&p.name),
                                &elem,
                                format!("continuous action targets undeclared variable `{target}`"),
                            ),
                            Some(decl)
                                if decl.kind != VarKind::Output || decl.sort != Sort::Bool =>
                            {
                                err(
                                    &mut out,
                                    ModelRule::ContTargetInvalid,
                                    Some(&p.name),
                                    &elem,
                                    format!(
                                        "continuous action target `{target}` must be a boolean output"
                                    ),
                                )
                            }
                            _ => {}
                        }
                        if let Some(c) = condition {
                            check_expr(g, c, true, &p.name, &elem, &mut out);
                        }
                    }
                    Action::Stored { target, value, trigger } => {
                        match g.var(target) {
                            None => err(
                                &mut out,
                                ModelRule::UndeclaredVar,
                                Some(&p.name),
                                &elem,
                                format!("stored action targets undeclared variable `{target}`"),
                            ),
                            Some(decl) if decl.kind == VarKind::Input => err(
                                &mut out,
                                ModelRule::StoredTargetInvalid,
                                Some(&p.name),
                                &elem,
                                format!("stored action target `{target}` is an input variable"),
                            ),
                            _ => {}
                        }
                        check_expr(g, value, false, &p.name, &elem, &mut out);
                        if let Trigger::OnEvent(c) = trigger {
                            check_expr(g, c, true, &p.name, &elem, &mut out);
                        }
                    }
                    Action::Forcing { target_partial, situation } => {
                        match g.partial(target_partial) {
                            None => err(
                                &mut out,
                                ModelRule::UnknownPartial,
                                Some(&p.name),
                                &elem,
                                format!("forcing targets unknown partial chart `{target_partial}`"),
                            ),
                            Some(target) => {
                                if let ForcedSituation::Explicit(set) = situation {
                                    for sid in set {
                                        if target.step(*sid).is_none() {
                                            err(
                                                &mut out,
                                                ModelRule::UnknownStep,
                                                Some(&p.name),
                                                &elem,
                                                format!(
                                                    "forced situation names missing step {sid} of `{target_partial}`"
                                                ),
                                            );
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }

        let mut trans_ids = BTreeSet::new();
        for t in &p.transitions {
            let elem = format!("transition {}", t.id);
            if !trans_ids.insert(t.id.clone()) {
                err(
                    &mut out,
                    ModelRule::DuplicateTransition,
                    Some(&p.name),
                    &elem,
                    format!("transition id `{}` used more than once", t.id),
                );
            }
            if t.upstream.is_empty() && t.downstream.is_empty() {
                err(
                    &mut out,
                    ModelRule::EmptyTransition,
                    Some(&p.name),
                    &elem,
                    "transition has neither upstream nor downstream steps".into(),
                );
            }
            for sid in t.upstream.iter().chain(t.downstream.iter()) {
                if p.step(*sid).is_none() {
                    err(
                        &mut out,
                        ModelRule::UnknownStep,
                        Some(&p.name),
                        &elem,
                        format!("transition references missing step {sid}"),
                    );
                }
            }
            check_expr(g, &t.condition, true, &p.name, &elem, &mut out);
        }
    }

    // A variable written by both a continuous and a stored action anywhere in
    // the model breaks the disjointness the action semantics relies on.
    let mut cont_writers: BTreeMap<&str, String> = BTreeMap::new();
    let mut stored_writers: BTreeMap<&str, String> = BTreeMap::new();
    for p in &g.partials {
        for s in &p.steps {
            for a in &s.actions {
                let place = format!("{}/step {}", p.name, s.id);
                match a {
                    Action::Continuous { target, .. } => {
                        cont_writers.entry(target).or_insert(place);
                    }
                    Action::Stored { target, .. } => {
                        stored_writers.entry(target).or_insert(place);
                    }
                    Action::Forcing { .. } => {}
                }
            }
        }
    }
    for (var, cont_place) in &cont_writers {
        if let Some(stored_place) = stored_writers.get(var) {
            err(
                &mut out,
                ModelRule::ContStoredOverlap,
                None,
                var,
                format!(
                    "`{var}` is written by a continuous action ({cont_place}) and a stored action ({stored_place})"
                ),
            );
        }
    }

    out.sort_by(|a, b| {
        (&a.partial, &a.element, a.rule, &a.message).cmp(&(&b.partial, &b.element, b.rule, &b.message))
    });
    out.dedup();
    out
}
