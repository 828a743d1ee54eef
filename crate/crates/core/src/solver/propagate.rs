//! Propagation engine: trailed domains, watch lists and a two-priority
//! queue of constraint propagators.

use std::collections::VecDeque;

use super::alldiff;
use super::domain::Domain;
use super::model::{Atom, Constraint, LinOp, Model, VarId};

pub struct Engine<'m> {
    model: &'m Model,
    /// Constraints posted during search (objective bound) live past the
    /// model's own constraint list.
    pub doms: Vec<Domain>,
    trail: Vec<(VarId, Domain)>,
    watch: Vec<Vec<usize>>,
    expensive: Vec<bool>,
    cheap_q: VecDeque<usize>,
    exp_q: VecDeque<usize>,
    queued: Vec<bool>,
    active: Vec<bool>,
    pub propagations: u64,
}

type Fail = ();

impl<'m> Engine<'m> {
    pub fn new(model: &'m Model) -> Engine<'m> {
        Engine::with_active(model, vec![true; model.constraints.len()])
    }

    /// Engine over the subset of constraints flagged in `active`.
    pub fn with_active(model: &'m Model, active: Vec<bool>) -> Engine<'m> {
        let mut watch = vec![Vec::new(); model.vars.len()];
        let mut expensive = vec![false; model.constraints.len()];
        for (i, c) in model.constraints.iter().enumerate() {
            if !active[i] {
                continue;
            }
            for v in c.vars() {
                watch[v].push(i);
            }
            expensive[i] = matches!(c, Constraint::AllDifferent(_));
        }
        let mut e = Engine {
            model,
            doms: model.vars.iter().map(|v| v.domain.clone()).collect(),
            trail: Vec::new(),
            watch,
            expensive,
            cheap_q: VecDeque::new(),
            exp_q: VecDeque::new(),
            queued: vec![false; model.constraints.len()],
            active,
            propagations: 0,
        };
        for i in 0..model.constraints.len() {
            if e.active[i] {
                e.enqueue(i);
            }
        }
        e
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    pub fn checkpoint(&self) -> usize {
        self.trail.len()
    }

    pub fn restore(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (v, d) = self.trail.pop().unwrap();
            self.doms[v] = d;
        }
        self.clear_queue();
    }

    fn clear_queue(&mut self) {
        for c in self.cheap_q.drain(..).chain(self.exp_q.drain(..)) {
            self.queued[c] = false;
        }
    }

    fn enqueue(&mut self, c: usize) {
        if !self.queued[c] {
            self.queued[c] = true;
            if self.expensive[c] {
                self.exp_q.push_back(c);
            } else {
                self.cheap_q.push_back(c);
            }
        }
    }

    /// Replaces a domain by a subset of it. Returns whether it changed.
    pub fn set(&mut self, v: VarId, d: Domain) -> Result<bool, Fail> {
        if d.is_empty() {
            return Err(());
        }
        if d == self.doms[v] {
            return Ok(false);
        }
        let old = std::mem::replace(&mut self.doms[v], d);
        self.trail.push((v, old));
        for i in 0..self.watch[v].len() {
            let c = self.watch[v][i];
            self.enqueue(c);
        }
        Ok(true)
    }

    pub fn fix(&mut self, v: VarId, val: i64) -> Result<bool, Fail> {
        if !self.doms[v].contains(val) {
            return Err(());
        }
        self.set(v, Domain::singleton(val))
    }

    pub fn remove(&mut self, v: VarId, val: i64) -> Result<bool, Fail> {
        if !self.doms[v].contains(val) {
            return Ok(false);
        }
        let d = self.doms[v].remove(val);
        self.set(v, d)
    }

    pub fn set_min(&mut self, v: VarId, lo: i64) -> Result<bool, Fail> {
        if self.doms[v].lb() >= lo {
            return Ok(false);
        }
        let d = self.doms[v].with_min(lo);
        self.set(v, d)
    }

    pub fn set_max(&mut self, v: VarId, hi: i64) -> Result<bool, Fail> {
        if self.doms[v].ub() <= hi {
            return Ok(false);
        }
        let d = self.doms[v].with_max(hi);
        self.set(v, d)
    }

    pub fn is_fixed(&self, v: VarId) -> bool {
        self.doms[v].fixed().is_some()
    }

    /// Runs propagators to a fixpoint. On failure returns the constraint
    /// that emptied a domain or found a contradiction.
    pub fn propagate(&mut self) -> Result<(), usize> {
        loop {
            let c = if let Some(c) = self.cheap_q.pop_front() {
                c
            } else if let Some(c) = self.exp_q.pop_front() {
                c
            } else {
                return Ok(());
            };
            self.queued[c] = false;
            self.propagations += 1;
            if self.run(c).is_err() {
                self.clear_queue();
                return Err(c);
            }
        }
    }

    fn run(&mut self, cid: usize) -> Result<(), Fail> {
        let model = self.model;
        match &model.constraints[cid] {
            Constraint::Linear(l) => self.linear(&l.terms, l.op, l.rhs),
            Constraint::Reified { b, atom } => self.reified(*b, atom),
            Constraint::Clause(lits) => {
                let mut open = None;
                for l in lits {
                    let d = &self.doms[l.var];
                    match d.fixed() {
                        Some(v) if v == l.value() => return Ok(()),
                        Some(_) => {}
                        None => {
                            if !d.contains(l.value()) {
                                continue;
                            }
                            if open.is_some() {
                                return Ok(());
                            }
                            open = Some(*l);
                        }
                    }
                }
                match open {
                    None => Err(()),
                    Some(l) => self.fix(l.var, l.value()).map(|_| ()),
                }
            }
            Constraint::Membership { x, set, negated } => {
                let d = if *negated {
                    self.doms[*x].subtract(set)
                } else {
                    self.doms[*x].intersect(set)
                };
                self.set(*x, d).map(|_| ())
            }
            Constraint::AllDifferent(xs) => self.alldiff(xs),
            Constraint::MinOf { y, xs } => self.min_of(*y, xs, false),
            Constraint::MaxOf { y, xs } => self.min_of(*y, xs, true),
        }
    }

    fn bounds(&self, terms: &[(i64, VarId)]) -> (i128, i128) {
        let mut lo: i128 = 0;
        let mut hi: i128 = 0;
        for &(a, x) in terms {
            let d = &self.doms[x];
            let (l, h) = (a as i128 * d.lb() as i128, a as i128 * d.ub() as i128);
            lo += l.min(h);
            hi += l.max(h);
        }
        (lo, hi)
    }

    fn linear(&mut self, terms: &[(i64, VarId)], op: LinOp, rhs: i64) -> Result<(), Fail> {
        match op {
            LinOp::Le => self.lin_le(terms, rhs as i128, 1),
            LinOp::Ge => self.lin_le(terms, -(rhs as i128), -1),
            LinOp::Eq => {
                self.lin_le(terms, rhs as i128, 1)?;
                self.lin_le(terms, -(rhs as i128), -1)
            }
            LinOp::Ne => {
                let mut open = None;
                let mut sum: i128 = 0;
                for &(a, x) in terms {
                    match self.doms[x].fixed() {
                        Some(v) => sum += a as i128 * v as i128,
                        None => {
                            if open.is_some() {
                                return Ok(());
                            }
                            open = Some((a, x));
                        }
                    }
                }
                let rest = rhs as i128 - sum;
                match open {
                    None if rest == 0 => Err(()),
                    None => Ok(()),
                    Some((a, x)) => {
                        if rest % a as i128 == 0 {
                            let v = rest / a as i128;
                            if let Ok(v) = i64::try_from(v) {
                                self.remove(x, v)?;
                            }
                        }
                        Ok(())
                    }
                }
            }
        }
    }

    /// `Σ sign·a·x ≤ rhs`.
    fn lin_le(&mut self, terms: &[(i64, VarId)], rhs: i128, sign: i128) -> Result<(), Fail> {
        let mut total: i128 = 0;
        for &(a, x) in terms {
            let c = sign * a as i128;
            let d = &self.doms[x];
            total += if c > 0 { c * d.lb() as i128 } else { c * d.ub() as i128 };
        }
        if total > rhs {
            return Err(());
        }
        for &(a, x) in terms {
            let c = sign * a as i128;
            if c == 0 {
                continue;
            }
            let d = &self.doms[x];
            let own = if c > 0 { c * d.lb() as i128 } else { c * d.ub() as i128 };
            let slack = rhs - (total - own);
            if c > 0 {
                let hi = div_floor(slack, c);
                if hi < d.ub() as i128 {
                    self.set_max(x, clamp(hi))?;
                }
            } else {
                let lo = div_ceil(slack, c);
                if lo > d.lb() as i128 {
                    self.set_min(x, clamp(lo))?;
                }
            }
        }
        Ok(())
    }

    /// `Some(true)` when the atom holds for every value in the current
    /// domains, `Some(false)` when it holds for none.
    pub fn entailed(&self, atom: &Atom) -> Option<bool> {
        match atom {
            Atom::In { x, set } => {
                let d = &self.doms[*x];
                if d.is_subset(set) {
                    Some(true)
                } else if d.is_disjoint(set) {
                    Some(false)
                } else {
                    None
                }
            }
            Atom::Lin(l) => self.lin_status(&l.terms, l.op, l.rhs),
        }
    }

    fn lin_status(&self, terms: &[(i64, VarId)], op: LinOp, rhs: i64) -> Option<bool> {
        let rhs128 = rhs as i128;
        let (lo, hi) = self.bounds(terms);
        match op {
            LinOp::Le => {
                if hi <= rhs128 {
                    Some(true)
                } else if lo > rhs128 {
                    Some(false)
                } else {
                    None
                }
            }
            LinOp::Ge => {
                if lo >= rhs128 {
                    Some(true)
                } else if hi < rhs128 {
                    Some(false)
                } else {
                    None
                }
            }
            LinOp::Eq | LinOp::Ne => {
                let eq = self.eq_status(terms, rhs128, lo, hi);
                if op == LinOp::Eq {
                    eq
                } else {
                    eq.map(|b| !b)
                }
            }
        }
    }

    fn eq_status(&self, terms: &[(i64, VarId)], rhs: i128, lo: i128, hi: i128) -> Option<bool> {
        if rhs < lo || rhs > hi {
            return Some(false);
        }
        if lo == hi {
            return Some(lo == rhs);
        }
        let mut open: Vec<(i64, VarId)> = Vec::with_capacity(2);
        let mut sum: i128 = 0;
        for &(a, x) in terms {
            match self.doms[x].fixed() {
                Some(v) => sum += a as i128 * v as i128,
                None => {
                    if open.len() == 2 {
                        return None;
                    }
                    open.push((a, x));
                }
            }
        }
        let rest = rhs - sum;
        match open.as_slice() {
            [(a, x)] => {
                if rest % *a as i128 != 0 {
                    return Some(false);
                }
                match i64::try_from(rest / *a as i128) {
                    Ok(v) if self.doms[*x].contains(v) => None,
                    _ => Some(false),
                }
            }
            [(a, x), (b, y)] if rest == 0 && *a == -*b => {
                if self.doms[*x].is_disjoint(&self.doms[*y]) {
                    Some(false)
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    fn reified(&mut self, b: VarId, atom: &Atom) -> Result<(), Fail> {
        match self.doms[b].fixed() {
            Some(1) => self.post_atom(atom, true),
            Some(0) => self.post_atom(atom, false),
            Some(_) => Err(()),
            None => match self.entailed(atom) {
                Some(t) => self.fix(b, t as i64).map(|_| ()),
                None => Ok(()),
            },
        }
    }

    fn post_atom(&mut self, atom: &Atom, positive: bool) -> Result<(), Fail> {
        match atom {
            Atom::In { x, set } => {
                let d = if positive {
                    self.doms[*x].intersect(set)
                } else {
                    self.doms[*x].subtract(set)
                };
                self.set(*x, d).map(|_| ())
            }
            Atom::Lin(l) => {
                if positive {
                    self.linear(&l.terms, l.op, l.rhs)
                } else {
                    let (op, rhs) = match l.op {
                        LinOp::Le => (LinOp::Ge, l.rhs.checked_add(1).ok_or(())?),
                        LinOp::Ge => (LinOp::Le, l.rhs.checked_sub(1).ok_or(())?),
                        LinOp::Eq => (LinOp::Ne, l.rhs),
                        LinOp::Ne => (LinOp::Eq, l.rhs),
                    };
                    self.linear(&l.terms, op, rhs)
                }
            }
        }
    }

    fn alldiff(&mut self, xs: &[VarId]) -> Result<(), Fail> {
        // Value elimination first; cheap and often enough.
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..xs.len() {
                if let Some(v) = self.doms[xs[i]].fixed() {
                    for j in 0..xs.len() {
                        if j != i && self.doms[xs[j]].contains(v) {
                            if xs[j] == xs[i] {
                                continue;
                            }
                            self.remove(xs[j], v)?;
                            changed = true;
                        }
                    }
                }
            }
        }
        if xs.iter().all(|&x| self.is_fixed(x)) {
            return Ok(());
        }
        let removals = {
            let doms: Vec<&Domain> = xs.iter().map(|&x| &self.doms[x]).collect();
            alldiff::filter(&doms)?
        };
        for (i, vals) in removals.into_iter().enumerate() {
            if !vals.is_empty() {
                let d = self.doms[xs[i]].subtract(&Domain::from_values(vals));
                self.set(xs[i], d)?;
            }
        }
        Ok(())
    }

    /// `y = min(xs)`, or `y = max(xs)` when `max` is set (by negation).
    fn min_of(&mut self, y: VarId, xs: &[VarId], max: bool) -> Result<(), Fail> {
        if xs.is_empty() {
            return Err(());
        }
        let lb = |e: &Self, v: VarId| if max { -(e.doms[v].ub() as i128) } else { e.doms[v].lb() as i128 };
        let ub = |e: &Self, v: VarId| if max { -(e.doms[v].lb() as i128) } else { e.doms[v].ub() as i128 };
        let min_lb = xs.iter().map(|&x| lb(self, x)).min().unwrap();
        let min_ub = xs.iter().map(|&x| ub(self, x)).min().unwrap();
        self.tighten(y, min_lb, min_ub, max)?;
        let ylb = lb(self, y);
        let yub = ub(self, y);
        let mut support = None;
        let mut count = 0;
        for &x in xs {
            self.tighten(x, ylb, i128::MAX, max)?;
            if lb(self, x) <= yub {
                count += 1;
                support = Some(x);
            }
        }
        match (count, support) {
            (0, _) => Err(()),
            (1, Some(x)) => self.tighten(x, i128::MIN, yub, max),
            _ => Ok(()),
        }
    }

    /// Restricts `v` to [lo, hi] in the possibly negated view.
    fn tighten(&mut self, v: VarId, lo: i128, hi: i128, negated: bool) -> Result<(), Fail> {
        let (lo, hi) = if negated { (neg(hi), neg(lo)) } else { (lo, hi) };
        if lo > i64::MIN as i128 {
            self.set_min(v, clamp(lo))?;
        }
        if hi < i64::MAX as i128 {
            self.set_max(v, clamp(hi))?;
        }
        Ok(())
    }
}

fn neg(v: i128) -> i128 {
    if v == i128::MAX {
        i128::MIN
    } else if v == i128::MIN {
        i128::MAX
    } else {
        -v
    }
}

fn clamp(v: i128) -> i64 {
    v.clamp(i64::MIN as i128, i64::MAX as i128) as i64
}

fn div_floor(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) == (b < 0)) {
        q + 1
    } else {
        q
    }
}
