//! Tape-based reverse-mode automatic differentiation over scalar expressions.
//!
//! A [`Tape`] records every elementary operation performed on [`Var`]s during
//! a forward pass. [`Tape::gradient`] then walks the tape once in reverse to
//! accumulate adjoints for every node.
//!
//! ```
//! use stlplan::autodiff::grad;
//!
//! let (value, g) = grad(|x| x[0] * x[1], &[2.0, 3.0]).unwrap();
//! assert_eq!(value, 6.0);
//! assert_eq!(g, vec![3.0, 2.0]);
//! ```
//!
//! Numeric code that must run both on plain `f64` and on `Var` is written
//! against the [`Scalar`] trait.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

/// Elementary operations that can appear on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Input,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Power,
    Sum,
    Dot,
    Custom,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Op::Input => "input",
            Op::Const => "const",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Neg => "neg",
            Op::Exp => "exp",
            Op::Log => "log",
            Op::Sqrt => "sqrt",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Power => "power",
            Op::Sum => "sum",
            Op::Dot => "dot",
            Op::Custom => "custom",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    /// A value or local partial became NaN or infinite.
    #[error("non-finite {what} produced by `{op}` at tape node {node}")]
    NonFinite {
        op: Op,
        node: usize,
        what: &'static str,
    },
    #[error("variable belongs to a different tape")]
    ForeignVar,
}

#[derive(Default)]
struct TapeInner {
    values: Vec<f64>,
    // edges of node i live in edges[offsets[i]..offsets[i + 1]]
    offsets: Vec<u32>,
    edges: Vec<(u32, f64)>,
    fault: Option<AdError>,
}

impl TapeInner {
    fn push<I: IntoIterator<Item = (u32, f64)>>(&mut self, op: Op, value: f64, edges: I) -> u32 {
        let node = self.values.len();
        let first_edge = self.edges.len();
        self.edges.extend(edges);
        if self.fault.is_none() {
            if !value.is_finite() {
                self.fault = Some(AdError::NonFinite {
                    op,
                    node,
                    what: "value",
                });
            } else if self.edges[first_edge..].iter().any(|(_, w)| !w.is_finite()) {
                self.fault = Some(AdError::NonFinite {
                    op,
                    node,
                    what: "partial derivative",
                });
            }
        }
        self.values.push(value);
        self.offsets.push(self.edges.len() as u32);
        node as u32
    }
}

/// Append-only record of a forward computation.
pub struct Tape {
    inner: RefCell<TapeInner>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        let inner = TapeInner {
            offsets: vec![0],
            ..Default::default()
        };
        Tape {
            inner: RefCell::new(inner),
        }
    }

    pub fn with_capacity(nodes: usize) -> Self {
        let mut inner = TapeInner {
            values: Vec::with_capacity(nodes),
            offsets: Vec::with_capacity(nodes + 1),
            edges: Vec::with_capacity(2 * nodes),
            fault: None,
        };
        inner.offsets.push(0);
        Tape {
            inner: RefCell::new(inner),
        }
    }

    /// Independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        self.push(Op::Input, value, [])
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    /// Node with no parents; its adjoint is computed but never propagated.
    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push(Op::Const, value, [])
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First non-finite value or partial seen during the forward pass.
    pub fn fault(&self) -> Option<AdError> {
        self.inner.borrow().fault.clone()
    }

    fn push<I: IntoIterator<Item = (u32, f64)>>(&self, op: Op, value: f64, edges: I) -> Var<'_> {
        let idx = self.inner.borrow_mut().push(op, value, edges);
        Var {
            tape: self,
            idx,
            val: value,
        }
    }

    /// `offset + Σ coeff·term`, recorded as a single `sum` node.
    pub fn linear_combination<'t>(&'t self, terms: &[(Var<'t>, f64)], offset: f64) -> Var<'t> {
        let value = terms.iter().fold(offset, |acc, (v, c)| acc + c * v.val);
        self.push(Op::Sum, value, terms.iter().map(|(v, c)| (v.idx, *c)))
    }

    pub fn sum<'t>(&'t self, terms: &[Var<'t>]) -> Var<'t> {
        let value = terms.iter().fold(0.0, |acc, v| acc + v.val);
        self.push(Op::Sum, value, terms.iter().map(|v| (v.idx, 1.0)))
    }

    /// `offset + Σ c·x + Σ c·a·b`, recorded as a single `dot` node.
    pub fn affine<'t>(
        &'t self,
        linear: &[(Var<'t>, f64)],
        products: &[(Var<'t>, Var<'t>, f64)],
        offset: f64,
    ) -> Var<'t> {
        let value = linear.iter().fold(offset, |acc, (v, c)| acc + c * v.val)
            + products
                .iter()
                .fold(0.0, |acc, (a, b, c)| acc + c * a.val * b.val);
        let edges = linear.iter().map(|(v, c)| (v.idx, *c)).chain(
            products
                .iter()
                .flat_map(|(a, b, c)| [(a.idx, c * b.val), (b.idx, c * a.val)]),
        );
        self.push(Op::Dot, value, edges)
    }

    /// One reverse sweep from `output`, returning the adjoint of every node.
    pub fn gradient(&self, output: Var<'_>) -> Result<Gradients, AdError> {
        if !std::ptr::eq(output.tape, self) {
            return Err(AdError::ForeignVar);
        }
        let inner = self.inner.borrow();
        if let Some(fault) = &inner.fault {
            return Err(fault.clone());
        }
        let n = output.idx as usize + 1;
        let mut adjoints = vec![0.0; n];
        adjoints[n - 1] = 1.0;
        for i in (0..n).rev() {
            let a = adjoints[i];
            if a == 0.0 {
                continue;
            }
            let (lo, hi) = (inner.offsets[i] as usize, inner.offsets[i + 1] as usize);
            for &(p, w) in &inner.edges[lo..hi] {
                adjoints[p as usize] += w * a;
            }
        }
        Ok(Gradients { adjoints })
    }
}

/// Adjoints from one reverse sweep.
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<f64>,
}

impl Gradients {
    pub fn get(&self, v: Var<'_>) -> f64 {
        self.adjoints.get(v.idx as usize).copied().unwrap_or(0.0)
    }

    pub fn wrt(&self, vars: &[Var<'_>]) -> Vec<f64> {
        vars.iter().map(|&v| self.get(v)).collect()
    }
}

/// A scalar recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}({})", self.idx, self.val)
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.val
    }

    pub fn index(&self) -> usize {
        self.idx as usize
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn unary(self, op: Op, value: f64, partial: f64) -> Var<'t> {
        self.tape.push(op, value, [(self.idx, partial)])
    }

    fn binary(self, other: Var<'t>, op: Op, value: f64, da: f64, db: f64) -> Var<'t> {
        debug_assert!(std::ptr::eq(self.tape, other.tape));
        self.tape.push(op, value, [(self.idx, da), (other.idx, db)])
    }

    /// Elementary function with a caller-supplied value and derivative.
    pub fn custom_unary(self, value: f64, partial: f64) -> Var<'t> {
        self.unary(Op::Custom, value, partial)
    }

    pub fn exp(self) -> Var<'t> {
        let e = self.val.exp();
        self.unary(Op::Exp, e, e)
    }

    pub fn ln(self) -> Var<'t> {
        self.unary(Op::Log, self.val.ln(), 1.0 / self.val)
    }

    /// The partial at 0 is infinite, which is reported as a numeric fault.
    pub fn sqrt(self) -> Var<'t> {
        let s = self.val.sqrt();
        self.unary(Op::Sqrt, s, 0.5 / s)
    }

    pub fn sin(self) -> Var<'t> {
        self.unary(Op::Sin, self.val.sin(), self.val.cos())
    }

    pub fn cos(self) -> Var<'t> {
        self.unary(Op::Cos, self.val.cos(), -self.val.sin())
    }

    pub fn powf(self, p: f64) -> Var<'t> {
        self.unary(Op::Power, self.val.powf(p), p * self.val.powf(p - 1.0))
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, Op::Add, self.val + rhs.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, Op::Sub, self.val - rhs.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, Op::Mul, self.val * rhs.val, rhs.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let q = self.val / rhs.val;
        self.binary(rhs, Op::Div, q, 1.0 / rhs.val, -q / rhs.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(Op::Neg, -self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.unary(Op::Add, self.val + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.unary(Op::Sub, self.val - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.unary(Op::Mul, self.val * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Var<'t> {
        self.unary(Op::Div, self.val / rhs, 1.0 / rhs)
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        rhs + self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        rhs.unary(Op::Sub, self - rhs.val, -1.0)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs * self
    }
}

impl<'t> Div<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let q = self / rhs.val;
        rhs.unary(Op::Div, q, -q / rhs.val)
    }
}

/// Arithmetic shared by plain floats and tape variables.
pub trait Scalar:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    /// A constant living in the same context as `self`.
    fn lift(&self, v: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn powf(self, p: f64) -> Self;
    /// `offset + Σ coeff·term`; `terms` must be nonempty.
    fn linear_combination(terms: &[(Self, f64)], offset: f64) -> Self;
    /// Σ terms; `terms` must be nonempty.
    fn sum(terms: &[Self]) -> Self;
    /// `offset + Σ c·x + Σ c·a·b`; at least one term must be given.
    fn affine(linear: &[(Self, f64)], products: &[(Self, Self, f64)], offset: f64) -> Self;
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, v: f64) -> f64 {
        v
    }
    fn exp(self) -> f64 {
        f64::exp(self)
    }
    fn ln(self) -> f64 {
        f64::ln(self)
    }
    fn sqrt(self) -> f64 {
        f64::sqrt(self)
    }
    fn sin(self) -> f64 {
        f64::sin(self)
    }
    fn cos(self) -> f64 {
        f64::cos(self)
    }
    fn powf(self, p: f64) -> f64 {
        f64::powf(self, p)
    }
    fn linear_combination(terms: &[(f64, f64)], offset: f64) -> f64 {
        terms.iter().fold(offset, |acc, (t, c)| acc + c * t)
    }
    fn affine(linear: &[(f64, f64)], products: &[(f64, f64, f64)], offset: f64) -> f64 {
        linear.iter().fold(offset, |acc, (v, c)| acc + c * v)
            + products.iter().fold(0.0, |acc, (a, b, c)| acc + c * a * b)
    }
    fn sum(terms: &[f64]) -> f64 {
        terms.iter().sum()
    }
}

impl<'t> Scalar for Var<'t> {
    fn value(&self) -> f64 {
        self.val
    }
    fn lift(&self, v: f64) -> Var<'t> {
        self.tape.constant(v)
    }
    fn exp(self) -> Self {
        Var::exp(self)
    }
    fn ln(self) -> Self {
        Var::ln(self)
    }
    fn sqrt(self) -> Self {
        Var::sqrt(self)
    }
    fn sin(self) -> Self {
        Var::sin(self)
    }
    fn cos(self) -> Self {
        Var::cos(self)
    }
    fn powf(self, p: f64) -> Self {
        Var::powf(self, p)
    }
    fn linear_combination(terms: &[(Var<'t>, f64)], offset: f64) -> Var<'t> {
        terms[0].0.tape.linear_combination(terms, offset)
    }
    fn sum(terms: &[Var<'t>]) -> Var<'t> {
        terms[0].tape.sum(terms)
    }
    fn affine(
        linear: &[(Var<'t>, f64)],
        products: &[(Var<'t>, Var<'t>, f64)],
        offset: f64,
    ) -> Var<'t> {
        let tape = linear
            .first()
            .map(|(v, _)| v.tape)
            .or_else(|| products.first().map(|(a, _, _)| a.tape))
            .expect("affine needs at least one term");
        tape.affine(linear, products, offset)
    }
}

/// Value and gradient of `f` at `x` from a single reverse sweep.
pub fn grad<F>(f: F, x: &[f64]) -> Result<(f64, Vec<f64>), AdError>
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let inputs = tape.vars(x);
    let out = f(&inputs);
    let g = tape.gradient(out)?;
    Ok((out.value(), g.wrt(&inputs)))
}

/// Per-coordinate comparison of a reverse-mode gradient with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub value: f64,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `|analytic - numeric| / max(|analytic|, |numeric|, floor)` per coordinate.
    pub errors: Vec<f64>,
    pub tolerance: f64,
    pub worst_coordinate: usize,
    pub passed: bool,
}

impl GradientReport {
    pub fn max_error(&self) -> f64 {
        self.errors
            .get(self.worst_coordinate)
            .copied()
            .unwrap_or(0.0)
    }

    pub fn failing(&self) -> Vec<usize> {
        self.errors
            .iter()
            .enumerate()
            .filter(|(_, &e)| !(e <= self.tolerance))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Absolute floor in the relative-error denominator of [`check_gradient`],
/// so that coordinates with a vanishing derivative are compared absolutely.
pub const GRADIENT_CHECK_FLOOR: f64 = 1e-6;

/// Compare the reverse-mode gradient of `f` at `x` with central differences
/// of step `step`. A failed reverse sweep marks every coordinate as failing.
pub fn check_gradient<F>(f: F, x: &[f64], step: f64, tol: f64) -> GradientReport
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    let (value, analytic) = match grad(&f, x) {
        Ok(vg) => vg,
        Err(_) => (f64::NAN, vec![f64::NAN; x.len()]),
    };
    let eval = |point: &[f64]| {
        let tape = Tape::new();
        let inputs = tape.vars(point);
        f(&inputs).value()
    };
    let mut numeric = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = eval(&probe);
        probe[i] = x[i] - step;
        let down = eval(&probe);
        probe[i] = x[i];
        numeric.push((up - down) / (2.0 * step));
    }
    let errors: Vec<f64> = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| {
            let denom = a.abs().max(n.abs()).max(GRADIENT_CHECK_FLOOR);
            let e = (a - n).abs() / denom;
            if e.is_nan() {
                f64::INFINITY
            } else {
                e
            }
        })
        .collect();
    let worst_coordinate = errors
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, be), (i, &e)| {
            if e > be {
                (i, e)
            } else {
                (bi, be)
            }
        })
        .0;
    let passed = errors.iter().all(|&e| e <= tol);
    GradientReport {
        value,
        analytic,
        numeric,
        errors,
        tolerance: tol,
        worst_coordinate,
        passed,
    }
}
