//! Symbolic values produced while grounding: constants, linear expressions
//! over solver variables, and boolean formulas over reified atoms.

use crate::solver::VarId;
use crate::value::{DataType, Value};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
#[error("integer overflow")]
pub struct Overflow;

/// `Σ coef·var + constant`, terms sorted by variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct LinExpr {
    pub terms: Vec<(i64, VarId)>,
    pub constant: i64,
}

impl LinExpr {
    pub fn constant(c: i64) -> LinExpr {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(x: VarId) -> LinExpr {
        LinExpr {
            terms: vec![(1, x)],
            constant: 0,
        }
    }

    pub fn single_var(&self) -> Option<VarId> {
        match self.terms.as_slice() {
            [(1, x)] if self.constant == 0 => Some(*x),
            _ => None,
        }
    }

    pub fn add(&self, other: &LinExpr) -> Result<LinExpr, Overflow> {
        self.combine(other, 1)
    }

    pub fn sub(&self, other: &LinExpr) -> Result<LinExpr, Overflow> {
        self.combine(other, -1)
    }

    fn combine(&self, other: &LinExpr, sign: i64) -> Result<LinExpr, Overflow> {
        let mut terms = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() || j < other.terms.len() {
            let a = self.terms.get(i);
            let b = other.terms.get(j);
            match (a, b) {
                (Some(&(ca, xa)), Some(&(cb, xb))) if xa == xb => {
                    let c = ca.checked_add(cb.checked_mul(sign).ok_or(Overflow)?).ok_or(Overflow)?;
                    if c != 0 {
                        terms.push((c, xa));
                    }
                    i += 1;
                    j += 1;
                }
                (Some(&(ca, xa)), Some(&(_, xb))) if xa < xb => {
                    terms.push((ca, xa));
                    i += 1;
                }
                (Some(&(ca, xa)), None) => {
                    terms.push((ca, xa));
                    i += 1;
                }
                (_, Some(&(cb, xb))) => {
                    terms.push((cb.checked_mul(sign).ok_or(Overflow)?, xb));
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        let constant = self
            .constant
            .checked_add(other.constant.checked_mul(sign).ok_or(Overflow)?)
            .ok_or(Overflow)?;
        Ok(LinExpr { terms, constant })
    }

    pub fn scale(&self, k: i64) -> Result<LinExpr, Overflow> {
        if k == 0 {
            return Ok(LinExpr::constant(0));
        }
        let terms = self
            .terms
            .iter()
            .map(|&(c, x)| c.checked_mul(k).map(|c| (c, x)).ok_or(Overflow))
            .collect::<Result<_, _>>()?;
        Ok(LinExpr {
            terms,
            constant: self.constant.checked_mul(k).ok_or(Overflow)?,
        })
    }

    pub fn add_term(&mut self, c: i64, x: VarId) -> Result<(), Overflow> {
        *self = self.add(&LinExpr {
            terms: vec![(c, x)],
            constant: 0,
        })?;
        Ok(())
    }

    pub fn add_constant(&mut self, c: i64) -> Result<(), Overflow> {
        self.constant = self.constant.checked_add(c).ok_or(Overflow)?;
        Ok(())
    }
}

/// Boolean formula in negation normal form over atom ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Const(bool),
    /// Atom id and polarity.
    Atom(usize, bool),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn not(self) -> Formula {
        match self {
            Formula::Const(b) => Formula::Const(!b),
            Formula::Atom(a, p) => Formula::Atom(a, !p),
            Formula::And(fs) => Formula::Or(fs.into_iter().map(Formula::not).collect()),
            Formula::Or(fs) => Formula::And(fs.into_iter().map(Formula::not).collect()),
        }
    }

    pub fn and(items: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for f in items {
            match f {
                Formula::Const(true) => {}
                Formula::Const(false) => return Formula::Const(false),
                Formula::And(fs) => out.extend(fs),
                f => out.push(f),
            }
        }
        match out.len() {
            0 => Formula::Const(true),
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    pub fn or(items: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for f in items {
            match f {
                Formula::Const(false) => {}
                Formula::Const(true) => return Formula::Const(true),
                Formula::Or(fs) => out.extend(fs),
                f => out.push(f),
            }
        }
        match out.len() {
            0 => Formula::Const(false),
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    pub fn is_const(&self) -> Option<bool> {
        match self {
            Formula::Const(b) => Some(*b),
            _ => None,
        }
    }
}

/// A value during grounding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sym {
    Val(Value),
    /// Integer-valued expression; for text columns always a single variable
    /// holding an interned id.
    Lin(LinExpr, DataType),
    Bool(Formula),
    /// Result of an `all_different` aggregate over variables and constants;
    /// may only be asserted.
    AllDiff { vars: Vec<VarId>, consts: Vec<i64> },
}

impl Sym {
    pub fn is_static(&self) -> bool {
        matches!(self, Sym::Val(_))
    }

    pub fn value(&self) -> Option<&Value> {
        match self {
            Sym::Val(v) => Some(v),
            _ => None,
        }
    }
}
