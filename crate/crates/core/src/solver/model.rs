use std::fmt;

use super::domain::Domain;
use crate::value::Value;

pub type VarId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum VarKind {
    /// One per in-scope variable cell.
    Decision,
    /// 0/1 literal equivalent to an atom.
    Reified,
    /// Optional-value auxiliary of the naive sum encoding: 0 or the term.
    Option,
    /// Defined by an equality (aggregates, min/max, objective).
    Defined,
    /// 0/1 literal standing for a conjunction or disjunction.
    Tseitin,
}

#[derive(Clone, Debug)]
pub struct VarInfo {
    pub domain: Domain,
    pub kind: VarKind,
    pub name: String,
}

/// `var = 1` when positive, `var = 0` otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit {
    pub var: VarId,
    pub positive: bool,
}

impl Lit {
    pub fn pos(var: VarId) -> Lit {
        Lit { var, positive: true }
    }

    pub fn neg(var: VarId) -> Lit {
        Lit { var, positive: false }
    }

    pub fn negate(self) -> Lit {
        Lit {
            var: self.var,
            positive: !self.positive,
        }
    }

    pub fn value(self) -> i64 {
        self.positive as i64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinOp {
    Le,
    Eq,
    Ge,
    Ne,
}

impl LinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            LinOp::Le => "<=",
            LinOp::Eq => "=",
            LinOp::Ge => ">=",
            LinOp::Ne => "!=",
        }
    }

    pub fn holds(self, lhs: i128, rhs: i128) -> bool {
        match self {
            LinOp::Le => lhs <= rhs,
            LinOp::Eq => lhs == rhs,
            LinOp::Ge => lhs >= rhs,
            LinOp::Ne => lhs != rhs,
        }
    }
}

/// `Σ coef·var op rhs`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Linear {
    pub terms: Vec<(i64, VarId)>,
    pub op: LinOp,
    pub rhs: i64,
}

impl Linear {
    /// Merges repeated variables and drops zero coefficients.
    pub fn new(mut terms: Vec<(i64, VarId)>, op: LinOp, rhs: i64) -> Linear {
        terms.sort_by_key(|t| t.1);
        let mut merged: Vec<(i64, VarId)> = Vec::with_capacity(terms.len());
        for (a, x) in terms {
            match merged.last_mut() {
                Some(last) if last.1 == x => last.0 += a,
                _ => merged.push((a, x)),
            }
        }
        merged.retain(|t| t.0 != 0);
        Linear { terms: merged, op, rhs }
    }

    /// The complementary constraint over integers.
    pub fn negated(&self) -> Linear {
        let (op, rhs) = match self.op {
            LinOp::Le => (LinOp::Ge, self.rhs.saturating_add(1)),
            LinOp::Ge => (LinOp::Le, self.rhs.saturating_sub(1)),
            LinOp::Eq => (LinOp::Ne, self.rhs),
            LinOp::Ne => (LinOp::Eq, self.rhs),
        };
        Linear {
            terms: self.terms.clone(),
            op,
            rhs,
        }
    }

    pub fn holds(&self, assignment: &[i64]) -> bool {
        let lhs: i128 = self.terms.iter().map(|&(a, x)| a as i128 * assignment[x] as i128).sum();
        self.op.holds(lhs, self.rhs as i128)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Atom {
    Lin(Linear),
    /// `x ∈ set`.
    In { x: VarId, set: Domain },
}

impl Atom {
    pub fn holds(&self, assignment: &[i64]) -> bool {
        match self {
            Atom::Lin(l) => l.holds(assignment),
            Atom::In { x, set } => set.contains(assignment[*x]),
        }
    }

    pub fn vars(&self) -> Vec<VarId> {
        match self {
            Atom::Lin(l) => l.terms.iter().map(|t| t.1).collect(),
            Atom::In { x, .. } => vec![*x],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Constraint {
    Linear(Linear),
    /// `b ⇔ atom` for a 0/1 variable `b`.
    Reified { b: VarId, atom: Atom },
    /// At least one literal holds.
    Clause(Vec<Lit>),
    AllDifferent(Vec<VarId>),
    /// `x ∈ set`, or `x ∉ set` when negated.
    Membership { x: VarId, set: Domain, negated: bool },
    MinOf { y: VarId, xs: Vec<VarId> },
    MaxOf { y: VarId, xs: Vec<VarId> },
}

impl Constraint {
    pub fn vars(&self) -> Vec<VarId> {
        let mut v = match self {
            Constraint::Linear(l) => l.terms.iter().map(|t| t.1).collect(),
            Constraint::Reified { b, atom } => {
                let mut v = atom.vars();
                v.push(*b);
                v
            }
            Constraint::Clause(lits) => lits.iter().map(|l| l.var).collect(),
            Constraint::AllDifferent(xs) => xs.clone(),
            Constraint::Membership { x, .. } => vec![*x],
            Constraint::MinOf { y, xs } | Constraint::MaxOf { y, xs } => {
                let mut v = xs.clone();
                v.push(*y);
                v
            }
        };
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Evaluates the constraint on a full assignment.
    pub fn holds(&self, a: &[i64]) -> bool {
        match self {
            Constraint::Linear(l) => l.holds(a),
            Constraint::Reified { b, atom } => (a[*b] == 1) == atom.holds(a) && (a[*b] == 0 || a[*b] == 1),
            Constraint::Clause(lits) => lits.iter().any(|l| a[l.var] == l.value()),
            Constraint::AllDifferent(xs) => {
                let mut seen = std::collections::HashSet::new();
                xs.iter().all(|&x| seen.insert(a[x]))
            }
            Constraint::Membership { x, set, negated } => set.contains(a[*x]) != *negated,
            Constraint::MinOf { y, xs } => xs.iter().map(|&x| a[x]).min() == Some(a[*y]),
            Constraint::MaxOf { y, xs } => xs.iter().map(|&x| a[x]).max() == Some(a[*y]),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Constraint::Linear(_) => "linear",
            Constraint::Reified { .. } => "reified",
            Constraint::Clause(_) => "clause",
            Constraint::AllDifferent(_) => "all_different",
            Constraint::Membership { .. } => "membership",
            Constraint::MinOf { .. } => "min_of",
            Constraint::MaxOf { .. } => "max_of",
        }
    }
}

pub type GroupId = usize;

/// One constraint instance at the SQL level: a view and the keys of the
/// rows (or group) it was grounded for.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Group {
    pub view: String,
    pub keys: Vec<Value>,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[", self.view)?;
        for (i, k) in self.keys.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}")?;
        }
        f.write_str("]")
    }
}

/// Where a constraint came from. Definitional constraints (reification,
/// auxiliary definitions) have no group and are never dropped from cores.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Origin {
    pub view: String,
    pub group: Option<GroupId>,
}

/// A grounded constraint program. The objective, when present, is
/// maximised.
#[derive(Clone, Debug, Default)]
pub struct Model {
    pub vars: Vec<VarInfo>,
    pub constraints: Vec<Constraint>,
    pub origins: Vec<Origin>,
    pub groups: Vec<Group>,
    pub objective: Option<VarId>,
}

impl Model {
    pub fn new() -> Model {
        Model::default()
    }

    pub fn new_var(&mut self, domain: Domain, kind: VarKind, name: impl Into<String>) -> VarId {
        self.vars.push(VarInfo {
            domain,
            kind,
            name: name.into(),
        });
        self.vars.len() - 1
    }

    pub fn post(&mut self, c: Constraint, origin: Origin) -> usize {
        self.constraints.push(c);
        self.origins.push(origin);
        self.constraints.len() - 1
    }

    /// Posts with a throwaway origin; handy for hand-built models.
    pub fn add(&mut self, c: Constraint) -> usize {
        self.post(
            c,
            Origin {
                view: "model".into(),
                group: None,
            },
        )
    }

    pub fn group(&mut self, view: &str, keys: Vec<Value>) -> GroupId {
        let g = Group {
            view: view.to_string(),
            keys,
        };
        if let Some(i) = self.groups.iter().rposition(|x| *x == g) {
            return i;
        }
        self.groups.push(g);
        self.groups.len() - 1
    }

    pub fn count_kind(&self, kind: VarKind) -> usize {
        self.vars.iter().filter(|v| v.kind == kind).count()
    }

    /// Indices of constraints violated by a full assignment, including
    /// values outside a variable's declared domain (reported as `None`).
    pub fn violations(&self, assignment: &[i64]) -> Vec<Option<usize>> {
        let mut out = Vec::new();
        for (i, v) in self.vars.iter().enumerate() {
            if !v.domain.contains(assignment[i]) {
                out.push(None);
                break;
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.holds(assignment) {
                out.push(Some(i));
            }
        }
        out
    }
}
