use std::fmt;

use serde::{Deserialize, Serialize};

use super::StlError;

/// Closed time interval `[lower, upper]`; `upper` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lower: f64,
    upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self, StlError> {
        if !lower.is_finite() || lower < 0.0 || upper.is_nan() || upper < lower {
            return Err(StlError::InvalidInterval { lower, upper });
        }
        Ok(Interval { lower, upper })
    }

    /// `[0, ∞)`.
    pub fn unbounded() -> Self {
        Interval {
            lower: 0.0,
            upper: f64::INFINITY,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn is_bounded(&self) -> bool {
        self.upper.is_finite()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.upper.is_finite() {
            write!(f, "[{}, {}]", self.lower, self.upper)
        } else {
            write!(f, "[{}, inf]", self.lower)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `value[channel] >= threshold`
    AtLeast,
    /// `value[channel] <= threshold`
    AtMost,
}

/// Affine predicate on one signal channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub channel: usize,
    pub threshold: f64,
    pub direction: Direction,
}

impl Predicate {
    /// Margin `μ(x)`: nonnegative exactly when the predicate holds.
    pub fn margin(&self, x: f64) -> f64 {
        match self.direction {
            Direction::AtLeast => x - self.threshold,
            Direction::AtMost => self.threshold - x,
        }
    }
}

/// STL formula over the core connectives. Derived operators are expanded
/// by their constructors.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    Predicate(Predicate),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn truth() -> Self {
        Formula::True
    }

    pub fn falsity() -> Self {
        Formula::not(Formula::True)
    }

    pub fn ge(channel: usize, threshold: f64) -> Self {
        Formula::Predicate(Predicate {
            channel,
            threshold,
            direction: Direction::AtLeast,
        })
    }

    pub fn le(channel: usize, threshold: f64) -> Self {
        Formula::Predicate(Predicate {
            channel,
            threshold,
            direction: Direction::AtMost,
        })
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    /// `a ∨ b = ¬(¬a ∧ ¬b)`
    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::not(Formula::and(Formula::not(a), Formula::not(b)))
    }

    /// `a ⇒ b = ¬a ∨ b`
    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::or(Formula::not(a), b)
    }

    pub fn until(interval: Interval, a: Formula, b: Formula) -> Self {
        Formula::Until(interval, Box::new(a), Box::new(b))
    }

    /// `◇_I φ = true U_I φ`
    pub fn eventually(interval: Interval, f: Formula) -> Self {
        Formula::until(interval, Formula::True, f)
    }

    /// `□_I φ = ¬◇_I ¬φ`
    pub fn always(interval: Interval, f: Formula) -> Self {
        Formula::not(Formula::eventually(interval, Formula::not(f)))
    }

    /// Conjunction of a nonempty list, folded to the right.
    pub fn all(mut parts: Vec<Formula>) -> Self {
        let mut acc = parts.pop().expect("conjunction of an empty list");
        while let Some(f) = parts.pop() {
            acc = Formula::and(f, acc);
        }
        acc
    }

    /// Nesting depth, counting every node.
    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::Predicate(_) => 1,
            Formula::Not(f) => 1 + f.depth(),
            Formula::And(a, b) | Formula::Until(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Largest channel index referenced, if any predicate is present.
    pub fn max_channel(&self) -> Option<usize> {
        match self {
            Formula::True => None,
            Formula::Predicate(p) => Some(p.channel),
            Formula::Not(f) => f.max_channel(),
            Formula::And(a, b) | Formula::Until(_, a, b) => {
                match (a.max_channel(), b.max_channel()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
        }
    }

    /// Textual form using the given channel names (`x0, x1, ...` when absent).
    pub fn display_with<'a>(&'a self, names: &'a [&'a str]) -> impl fmt::Display + 'a {
        Named {
            formula: self,
            names,
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self, &[])
    }
}

struct Named<'a> {
    formula: &'a Formula,
    names: &'a [&'a str],
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self.formula, self.names)
    }
}

fn write_interval(f: &mut fmt::Formatter<'_>, i: &Interval) -> fmt::Result {
    if *i == Interval::unbounded() {
        Ok(())
    } else {
        write!(f, "{i} ")
    }
}

fn write_formula(f: &mut fmt::Formatter<'_>, phi: &Formula, names: &[&str]) -> fmt::Result {
    match phi {
        Formula::True => f.write_str("true"),
        Formula::Predicate(p) => {
            match names.get(p.channel) {
                Some(n) => f.write_str(n)?,
                None => write!(f, "x{}", p.channel)?,
            }
            let op = match p.direction {
                Direction::AtLeast => ">=",
                Direction::AtMost => "<=",
            };
            write!(f, " {op} {:?}", p.threshold)
        }
        Formula::Not(inner) => match inner.as_ref() {
            Formula::True => f.write_str("false"),
            Formula::Until(i, a, b) if **a == Formula::True => match b.as_ref() {
                Formula::Not(body) => {
                    f.write_str("G ")?;
                    write_interval(f, i)?;
                    write_formula(f, body, names)
                }
                _ => {
                    f.write_str("!")?;
                    write_formula(f, inner, names)
                }
            },
            Formula::And(a, b) => match (a.as_ref(), b.as_ref()) {
                (Formula::Not(x), Formula::Not(y)) => {
                    f.write_str("(")?;
                    write_formula(f, x, names)?;
                    f.write_str(" | ")?;
                    write_formula(f, y, names)?;
                    f.write_str(")")
                }
                _ => {
                    f.write_str("!")?;
                    write_formula(f, inner, names)
                }
            },
            _ => {
                f.write_str("!(")?;
                write_formula(f, inner, names)?;
                f.write_str(")")
            }
        },
        Formula::And(a, b) => {
            f.write_str("(")?;
            write_formula(f, a, names)?;
            f.write_str(" & ")?;
            write_formula(f, b, names)?;
            f.write_str(")")
        }
        Formula::Until(i, a, b) if **a == Formula::True => {
            f.write_str("F ")?;
            write_interval(f, i)?;
            write_formula(f, b, names)
        }
        Formula::Until(i, a, b) => {
            f.write_str("(")?;
            write_formula(f, a, names)?;
            f.write_str(" U ")?;
            write_interval(f, i)?;
            write_formula(f, b, names)?;
            f.write_str(")")
        }
    }
}
