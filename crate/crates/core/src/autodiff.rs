//! Tape-based reverse-mode automatic differentiation over scalars.
//!
//! Every differentiable quantity of the pipeline (site coordinates,
//! circumcenters, edge lengths, cell areas, transmissibilities, pressures and
//! the loss) is a [`Var`] recorded on a [`Tape`]. A node stores its value and
//! the local partial derivatives with respect to its parents; parents always
//! precede children, so one reverse sweep from the root yields all adjoints.
//!
//! ```
//! use diffcoarsen::autodiff::Tape;
//!
//! let tape = Tape::<f64>::new();
//! let x = tape.var(2.0);
//! let y = tape.var(3.0);
//! let f = x * y + y;
//! let grads = tape.backward(f);
//! assert_eq!(grads.wrt(x), 3.0);
//! assert_eq!(grads.wrt(y), 3.0);
//! ```
//!
//! Besides the elementwise operators, the tape supports two bulk node kinds
//! used by the solver: [`Tape::custom`] records an n-ary node from
//! caller-supplied partials, and [`Tape::block`] records a multi-output
//! operation whose vector-Jacobian product is supplied as a closure. The
//! latter backs gradient checkpointing of long time integrations.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum AutodiffError {
    #[error("division by zero (denominator {0:e})")]
    DivisionByZero(f64),
    #[error("square root of negative value {0:e}")]
    NegativeSqrt(f64),
}

type VjpFn<T> = Box<dyn Fn(&[T]) -> Vec<T>>;

struct Block<T> {
    inputs: Vec<u32>,
    first_output: u32,
    n_outputs: u32,
    vjp: VjpFn<T>,
}

struct Nodes<T> {
    values: Vec<T>,
    // CSR layout: parents of node k live in parents[offsets[k]..offsets[k + 1]].
    offsets: Vec<usize>,
    parents: Vec<u32>,
    partials: Vec<T>,
    blocks: Vec<Block<T>>,
}

impl<T: Scalar> Nodes<T> {
    #[inline]
    fn push(&mut self, value: T, parents: impl IntoIterator<Item = (u32, T)>) -> u32 {
        let index = self.values.len();
        assert!(index < u32::MAX as usize, "tape exceeded u32 node capacity");
        for (p, d) in parents {
            debug_assert!((p as usize) < index, "parent must precede child");
            self.parents.push(p);
            self.partials.push(d);
        }
        self.values.push(value);
        self.offsets.push(self.parents.len());
        index as u32
    }
}

/// Append-only record of scalar operations.
///
/// A tape is single-threaded; one optimization pass owns one tape.
pub struct Tape<T: Scalar = f64> {
    nodes: RefCell<Nodes<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> fmt::Debug for Tape<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nodes = self.nodes.borrow();
        f.debug_struct("Tape")
            .field("nodes", &nodes.values.len())
            .field("edges", &nodes.parents.len())
            .field("blocks", &nodes.blocks.len())
            .finish()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self::with_capacity(0, 0)
    }

    pub fn with_capacity(nodes: usize, edges: usize) -> Self {
        let mut offsets = Vec::with_capacity(nodes + 1);
        offsets.push(0);
        Tape {
            nodes: RefCell::new(Nodes {
                values: Vec::with_capacity(nodes),
                offsets,
                parents: Vec::with_capacity(edges),
                partials: Vec::with_capacity(edges),
                blocks: Vec::new(),
            }),
        }
    }

    /// Creates an independent variable (a leaf).
    pub fn var(&self, value: T) -> Var<'_, T> {
        let index = self.nodes.borrow_mut().push(value, std::iter::empty());
        Var {
            tape: self,
            index,
            value,
        }
    }

    /// Creates a leaf that the caller does not intend to differentiate with
    /// respect to. Identical to [`Tape::var`] on the tape; the distinction is
    /// documentary.
    pub fn constant(&self, value: T) -> Var<'_, T> {
        self.var(value)
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of recorded parent links (a proxy for tape memory).
    pub fn edge_count(&self) -> usize {
        self.nodes.borrow().parents.len()
    }

    /// Records a node with an arbitrary number of parents and caller-supplied
    /// local partial derivatives `d value / d parent`.
    pub fn custom(&self, value: T, parents: &[(Var<'_, T>, T)]) -> Var<'_, T> {
        for (p, _) in parents {
            self.check_owner(p);
        }
        let index = self
            .nodes
            .borrow_mut()
            .push(value, parents.iter().map(|(p, d)| (p.index, *d)));
        Var {
            tape: self,
            index,
            value,
        }
    }

    /// Raw n-ary push by node index, used by the solver's fused kernels.
    pub(crate) fn push_indexed(&self, value: T, parents: impl IntoIterator<Item = (u32, T)>) -> Var<'_, T> {
        let index = self.nodes.borrow_mut().push(value, parents);
        Var {
            tape: self,
            index,
            value,
        }
    }

    /// Sum of a sequence of variables as a single node. An empty sequence
    /// yields a constant zero.
    pub fn sum<'a, I>(&'a self, terms: I) -> Var<'a, T>
    where
        I: IntoIterator<Item = Var<'a, T>>,
    {
        let terms: Vec<Var<'a, T>> = terms.into_iter().collect();
        let mut value = T::zero();
        for t in &terms {
            self.check_owner(t);
            value = value + t.value;
        }
        self.push_indexed(value, terms.iter().map(|t| (t.index, T::one())))
    }

    /// Records a multi-output operation.
    ///
    /// `outputs` are the forward values; `vjp` receives the adjoints of the
    /// outputs during [`Tape::backward`] and must return one adjoint
    /// contribution per input, in input order.
    pub fn block<'a, F>(&'a self, inputs: &[Var<'a, T>], outputs: Vec<T>, vjp: F) -> Vec<Var<'a, T>>
    where
        F: Fn(&[T]) -> Vec<T> + 'static,
    {
        for v in inputs {
            self.check_owner(v);
        }
        let mut nodes = self.nodes.borrow_mut();
        let first = nodes.values.len() as u32;
        let vars: Vec<Var<'a, T>> = outputs
            .iter()
            .map(|&value| {
                let index = nodes.push(value, std::iter::empty());
                Var {
                    tape: self,
                    index,
                    value,
                }
            })
            .collect();
        if !vars.is_empty() {
            nodes.blocks.push(Block {
                inputs: inputs.iter().map(|v| v.index).collect(),
                first_output: first,
                n_outputs: vars.len() as u32,
                vjp: Box::new(vjp),
            });
        }
        vars
    }

    /// Reverse sweep from `root`; returns the adjoint of every node recorded
    /// up to and including `root`.
    pub fn backward(&self, root: Var<'_, T>) -> Gradients<T> {
        self.check_owner(&root);
        let nodes = self.nodes.borrow();
        let end = root.index as usize + 1;
        let mut adjoints = vec![T::zero(); end];
        adjoints[root.index as usize] = T::one();

        let mut blocks = nodes
            .blocks
            .iter()
            .rev()
            .skip_while(|b| b.first_output as usize >= end)
            .peekable();

        for k in (0..end).rev() {
            let a = adjoints[k];
            if a != T::zero() {
                let (lo, hi) = (nodes.offsets[k], nodes.offsets[k + 1]);
                for e in lo..hi {
                    let p = nodes.parents[e] as usize;
                    adjoints[p] = adjoints[p] + a * nodes.partials[e];
                }
            }
            while let Some(block) = blocks.peek() {
                if block.first_output as usize != k {
                    break;
                }
                let lo = block.first_output as usize;
                let hi = (lo + block.n_outputs as usize).min(end);
                let out = &adjoints[lo..hi];
                if out.iter().any(|&g| g != T::zero()) {
                    let mut padded;
                    let out = if hi - lo < block.n_outputs as usize {
                        padded = out.to_vec();
                        padded.resize(block.n_outputs as usize, T::zero());
                        &padded[..]
                    } else {
                        out
                    };
                    let contributions = (block.vjp)(out);
                    assert_eq!(
                        contributions.len(),
                        block.inputs.len(),
                        "block vjp must return one adjoint per input"
                    );
                    for (&i, g) in block.inputs.iter().zip(contributions) {
                        adjoints[i as usize] = adjoints[i as usize] + g;
                    }
                }
                blocks.next();
            }
        }
        Gradients { adjoints }
    }

    #[inline]
    fn check_owner(&self, v: &Var<'_, T>) {
        assert!(std::ptr::eq(self, v.tape), "variable belongs to a different tape");
    }

    #[inline]
    fn unary<'a>(&'a self, value: T, a: Var<'a, T>, da: T) -> Var<'a, T> {
        self.push_indexed(value, [(a.index, da)])
    }

    #[inline]
    fn binary<'a>(&'a self, value: T, a: Var<'a, T>, da: T, b: Var<'a, T>, db: T) -> Var<'a, T> {
        self.push_indexed(value, [(a.index, da), (b.index, db)])
    }
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    adjoints: Vec<T>,
}

impl<T: Scalar> Gradients<T> {
    /// `d root / d v`. Variables recorded after the root have zero adjoint.
    pub fn wrt(&self, v: Var<'_, T>) -> T {
        self.get(v.index as usize)
    }

    pub fn get(&self, index: usize) -> T {
        self.adjoints.get(index).copied().unwrap_or_else(T::zero)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.adjoints
    }
}

/// A scalar value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T: Scalar = f64> {
    tape: &'t Tape<T>,
    index: u32,
    value: T,
}

impl<T: Scalar> fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}({:?})", self.index, self.value)
    }
}

impl<'t, T: Scalar> Var<'t, T> {
    #[inline]
    pub fn value(self) -> T {
        self.value
    }

    #[inline]
    pub fn index(self) -> u32 {
        self.index
    }

    #[inline]
    pub fn tape(self) -> &'t Tape<T> {
        self.tape
    }

    #[inline]
    fn same_tape(self, other: Var<'t, T>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "variables belong to different tapes"
        );
    }

    pub fn square(self) -> Self {
        let two = T::one() + T::one();
        self.tape.unary(self.value * self.value, self, two * self.value)
    }

    /// Square root; the derivative at zero is infinite, so callers measuring
    /// lengths should prefer [`Var::hypot`].
    pub fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        let two = T::one() + T::one();
        self.tape.unary(s, self, T::one() / (two * s))
    }

    pub fn checked_sqrt(self) -> Result<Self, AutodiffError> {
        if self.value < T::zero() {
            return Err(AutodiffError::NegativeSqrt(self.value.as_f64()));
        }
        Ok(self.sqrt())
    }

    pub fn checked_div(self, rhs: Self) -> Result<Self, AutodiffError> {
        if rhs.value == T::zero() {
            return Err(AutodiffError::DivisionByZero(rhs.value.as_f64()));
        }
        Ok(self / rhs)
    }

    pub fn recip(self) -> Self {
        let r = T::one() / self.value;
        self.tape.unary(r, self, -r * r)
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.tape.unary(e, self, e)
    }

    /// Absolute value; the subgradient at zero is +1.
    pub fn abs(self) -> Self {
        let d = if self.value < T::zero() { -T::one() } else { T::one() };
        self.tape.unary(self.value.abs(), self, d)
    }

    /// Minimum; ties select `self`.
    pub fn min(self, other: Self) -> Self {
        self.same_tape(other);
        if other.value < self.value {
            self.tape.binary(other.value, self, T::zero(), other, T::one())
        } else {
            self.tape.binary(self.value, self, T::one(), other, T::zero())
        }
    }

    /// Maximum; ties select `self`.
    pub fn max(self, other: Self) -> Self {
        self.same_tape(other);
        if other.value > self.value {
            self.tape.binary(other.value, self, T::zero(), other, T::one())
        } else {
            self.tape.binary(self.value, self, T::one(), other, T::zero())
        }
    }

    /// Euclidean norm `sqrt(self² + other²)`, with zero subgradient at the
    /// origin.
    pub fn hypot(self, other: Self) -> Self {
        self.same_tape(other);
        let r = self.value.hypot(other.value);
        if r == T::zero() {
            self.tape.binary(r, self, T::zero(), other, T::zero())
        } else {
            self.tape.binary(r, self, self.value / r, other, other.value / r)
        }
    }
}

impl<'t, T: Scalar> Add for Var<'t, T> {
    type Output = Var<'t, T>;
    fn add(self, rhs: Self) -> Self {
        self.same_tape(rhs);
        self.tape.binary(self.value + rhs.value, self, T::one(), rhs, T::one())
    }
}

impl<'t, T: Scalar> Sub for Var<'t, T> {
    type Output = Var<'t, T>;
    fn sub(self, rhs: Self) -> Self {
        self.same_tape(rhs);
        self.tape.binary(self.value - rhs.value, self, T::one(), rhs, -T::one())
    }
}

impl<'t, T: Scalar> Mul for Var<'t, T> {
    type Output = Var<'t, T>;
    fn mul(self, rhs: Self) -> Self {
        self.same_tape(rhs);
        self.tape
            .binary(self.value * rhs.value, self, rhs.value, rhs, self.value)
    }
}

impl<'t, T: Scalar> Div for Var<'t, T> {
    type Output = Var<'t, T>;
    fn div(self, rhs: Self) -> Self {
        self.same_tape(rhs);
        let inv = T::one() / rhs.value;
        let q = self.value * inv;
        self.tape.binary(q, self, inv, rhs, -q * inv)
    }
}

impl<'t, T: Scalar> Neg for Var<'t, T> {
    type Output = Var<'t, T>;
    fn neg(self) -> Self {
        self.tape.unary(-self.value, self, -T::one())
    }
}

impl<'t, T: Scalar> Add<T> for Var<'t, T> {
    type Output = Var<'t, T>;
    fn add(self, rhs: T) -> Self {
        self.tape.unary(self.value + rhs, self, T::one())
    }
}

impl<'t, T: Scalar> Sub<T> for Var<'t, T> {
    type Output = Var<'t, T>;
    fn sub(self, rhs: T) -> Self {
        self.tape.unary(self.value - rhs, self, T::one())
    }
}

impl<'t, T: Scalar> Mul<T> for Var<'t, T> {
    type Output = Var<'t, T>;
    fn mul(self, rhs: T) -> Self {
        self.tape.unary(self.value * rhs, self, rhs)
    }
}

impl<'t, T: Scalar> Div<T> for Var<'t, T> {
    type Output = Var<'t, T>;
    fn div(self, rhs: T) -> Self {
        let inv = T::one() / rhs;
        self.tape.unary(self.value * inv, self, inv)
    }
}

impl<'t, T: Scalar> AddAssign for Var<'t, T> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<'t, T: Scalar> SubAssign for Var<'t, T> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<'t, T: Scalar> MulAssign for Var<'t, T> {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

macro_rules! scalar_lhs_ops {
    ($($t:ty),*) => {$(
        impl<'t> Add<Var<'t, $t>> for $t {
            type Output = Var<'t, $t>;
            fn add(self, rhs: Var<'t, $t>) -> Var<'t, $t> {
                rhs + self
            }
        }
        impl<'t> Sub<Var<'t, $t>> for $t {
            type Output = Var<'t, $t>;
            fn sub(self, rhs: Var<'t, $t>) -> Var<'t, $t> {
                rhs.tape.unary(self - rhs.value, rhs, -1.0)
            }
        }
        impl<'t> Mul<Var<'t, $t>> for $t {
            type Output = Var<'t, $t>;
            fn mul(self, rhs: Var<'t, $t>) -> Var<'t, $t> {
                rhs * self
            }
        }
        impl<'t> Div<Var<'t, $t>> for $t {
            type Output = Var<'t, $t>;
            fn div(self, rhs: Var<'t, $t>) -> Var<'t, $t> {
                let inv = 1.0 / rhs.value;
                let q = self * inv;
                rhs.tape.unary(q, rhs, -q * inv)
            }
        }
    )*};
}

scalar_lhs_ops!(f32, f64);
