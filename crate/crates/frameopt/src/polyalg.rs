//! Multivariate polynomial algebra and graded-lexicographic monomial
//! indexing.
//!
//! Everything downstream (stiffness polynomials, scaled programs, moment and
//! localizing matrices) indexes monomials through [`monomial_basis`], so the
//! ordering defined by [`MultiIndex`]'s `Ord` implementation is load-bearing:
//! degree first, then descending lexicographic within a degree. For two
//! variables `(x1, x2)` this lists `1, x1, x2, x1^2, x1*x2, x2^2, ...`.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use crate::scalar::Scalar;

/// Errors from polynomial operations.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected} variables, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Exponent vector of a monomial; one entry per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zeros(n_vars: usize) -> Self {
        MultiIndex(vec![0; n_vars])
    }

    /// Monomial `x_i`.
    pub fn unit(n_vars: usize, var: usize) -> Self {
        let mut e = vec![0; n_vars];
        e[var] = 1;
        MultiIndex(e)
    }

    pub fn n_vars(&self) -> usize {
        self.0.len()
    }

    /// Total degree, the sum of all exponents.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Exponent-wise sum (monomial product).
    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.0.len(), other.0.len());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Graded order: lower total degree first. Within a degree the
        // monomial with the larger exponent on the earliest variable comes
        // first, hence the flipped lexicographic comparison.
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// All multi-indices with total degree at most `degree`, in graded
/// lexicographic order. The length is `C(n_vars + degree, degree)`.
pub fn monomial_basis(n_vars: usize, degree: u32) -> Vec<MultiIndex> {
    assert!(n_vars >= 1, "monomial basis needs at least one variable");
    let mut basis = Vec::with_capacity(basis_len(n_vars, degree));
    let mut current = vec![0u32; n_vars];
    for d in 0..=degree {
        push_degree(&mut basis, &mut current, 0, d);
    }
    basis
}

fn push_degree(out: &mut Vec<MultiIndex>, current: &mut Vec<u32>, var: usize, remaining: u32) {
    if var + 1 == current.len() {
        current[var] = remaining;
        out.push(MultiIndex(current.clone()));
        current[var] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[var] = e;
        push_degree(out, current, var + 1, remaining - e);
    }
    current[var] = 0;
}

/// `C(n_vars + degree, degree)`, the size of [`monomial_basis`].
pub fn basis_len(n_vars: usize, degree: u32) -> usize {
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for k in 1..=degree as u128 {
        num *= n_vars as u128 + k;
        den *= k;
    }
    (num / den) as usize
}

/// Sparse multivariate polynomial with real coefficients.
///
/// Terms are kept in a `BTreeMap` ordered by [`MultiIndex`], which makes
/// iteration deterministic. Exactly-zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T: Scalar> {
    n_vars: usize,
    terms: BTreeMap<MultiIndex, T>,
}

impl<T: Scalar> Polynomial<T> {
    pub fn zero(n_vars: usize) -> Self {
        Polynomial { n_vars, terms: BTreeMap::new() }
    }

    pub fn constant(n_vars: usize, value: T) -> Self {
        let mut p = Self::zero(n_vars);
        p.add_term(MultiIndex::zeros(n_vars), value);
        p
    }

    /// The monomial `x_var`.
    pub fn variable(n_vars: usize, var: usize) -> Self {
        assert!(var < n_vars);
        let mut p = Self::zero(n_vars);
        p.add_term(MultiIndex::unit(n_vars, var), T::one());
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (MultiIndex, T)>>(n_vars: usize, terms: I) -> Self {
        let mut p = Self::zero(n_vars);
        for (idx, c) in terms {
            assert_eq!(idx.n_vars(), n_vars);
            p.add_term(idx, c);
        }
        p
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Max total degree over the stored terms; zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &T)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, idx: &MultiIndex) -> T {
        self.terms.get(idx).copied().unwrap_or_else(T::zero)
    }

    /// Accumulate `coeff` on monomial `idx`, pruning exact zeros.
    pub fn add_term(&mut self, idx: MultiIndex, coeff: T) {
        debug_assert_eq!(idx.n_vars(), self.n_vars);
        if coeff == T::zero() {
            return;
        }
        let entry = self.terms.entry(idx);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let new = *o.get() + coeff;
                if new == T::zero() {
                    o.remove();
                } else {
                    *o.get_mut() = new;
                }
            }
        }
    }

    pub fn scale(&self, factor: T) -> Self {
        let mut p = Self::zero(self.n_vars);
        for (idx, c) in &self.terms {
            p.add_term(idx.clone(), *c * factor);
        }
        p
    }

    /// Exact coefficient convolution; errors on mismatched variable counts.
    pub fn checked_mul(&self, other: &Self) -> Result<Self, PolyError> {
        if self.n_vars != other.n_vars {
            return Err(PolyError::DimensionMismatch {
                expected: self.n_vars,
                got: other.n_vars,
            });
        }
        let mut p = Self::zero(self.n_vars);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                p.add_term(a.plus(b), *ca * *cb);
            }
        }
        Ok(p)
    }

    /// Evaluate at a point; errors on mismatched point length.
    pub fn eval(&self, point: &[T]) -> Result<T, PolyError> {
        if point.len() != self.n_vars {
            return Err(PolyError::DimensionMismatch {
                expected: self.n_vars,
                got: point.len(),
            });
        }
        let mut acc = T::zero();
        for (idx, c) in &self.terms {
            let mut m = *c;
            for (v, &e) in idx.0.iter().enumerate() {
                if e > 0 {
                    m *= point[v].powi(e as i32);
                }
            }
            acc += m;
        }
        Ok(acc)
    }

    /// Substitute `x_i -> scale_i * x_i + shift_i` for every variable.
    pub fn affine_substitute(&self, maps: &[(T, T)]) -> Self {
        assert_eq!(maps.len(), self.n_vars);
        let mut out = Self::zero(self.n_vars);
        for (idx, c) in &self.terms {
            let mut term = Self::constant(self.n_vars, *c);
            for (v, &e) in idx.0.iter().enumerate() {
                let (alpha, beta) = maps[v];
                let mut lin = Self::constant(self.n_vars, beta);
                lin.add_term(MultiIndex::unit(self.n_vars, v), alpha);
                for _ in 0..e {
                    term = term.checked_mul(&lin).expect("same n_vars");
                }
            }
            out = &out + &term;
        }
        out
    }
}

impl<T: Scalar> Add for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn add(self, rhs: Self) -> Polynomial<T> {
        assert_eq!(self.n_vars, rhs.n_vars, "polynomial variable counts differ");
        let mut p = self.clone();
        for (idx, c) in &rhs.terms {
            p.add_term(idx.clone(), *c);
        }
        p
    }
}

impl<T: Scalar> Sub for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn sub(self, rhs: Self) -> Polynomial<T> {
        assert_eq!(self.n_vars, rhs.n_vars, "polynomial variable counts differ");
        let mut p = self.clone();
        for (idx, c) in &rhs.terms {
            p.add_term(idx.clone(), -*c);
        }
        p
    }
}

impl<T: Scalar> Neg for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn neg(self) -> Polynomial<T> {
        self.scale(-T::one())
    }
}

impl<T: Scalar> Mul for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn mul(self, rhs: Self) -> Polynomial<T> {
        self.checked_mul(rhs).expect("polynomial variable counts differ")
    }
}

/// Symmetric matrix with polynomial entries, stored as the upper triangle.
#[derive(Debug, Clone)]
pub struct PolyMatrix<T: Scalar> {
    n_vars: usize,
    size: usize,
    entries: BTreeMap<(usize, usize), Polynomial<T>>,
}

impl<T: Scalar> PolyMatrix<T> {
    pub fn zero(n_vars: usize, size: usize) -> Self {
        PolyMatrix { n_vars, size, entries: BTreeMap::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn key(i: usize, j: usize) -> (usize, usize) {
        if i <= j {
            (i, j)
        } else {
            (j, i)
        }
    }

    /// Entry `(i, j)`; symmetry is fulfilled by construction.
    pub fn get(&self, i: usize, j: usize) -> Option<&Polynomial<T>> {
        self.entries.get(&Self::key(i, j))
    }

    pub fn set(&mut self, i: usize, j: usize, p: Polynomial<T>) {
        assert!(i < self.size && j < self.size);
        assert_eq!(p.n_vars(), self.n_vars);
        if p.is_zero() {
            self.entries.remove(&Self::key(i, j));
        } else {
            self.entries.insert(Self::key(i, j), p);
        }
    }

    pub fn add_to(&mut self, i: usize, j: usize, p: &Polynomial<T>) {
        let cur = match self.get(i, j) {
            Some(q) => q + p,
            None => p.clone(),
        };
        self.set(i, j, cur);
    }

    /// Upper-triangle entries `(i, j, polynomial)` with `i <= j`.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, &Polynomial<T>)> {
        self.entries.iter().map(|(&(i, j), p)| (i, j, p))
    }

    pub fn degree(&self) -> u32 {
        self.entries.values().map(|p| p.degree()).max().unwrap_or(0)
    }

    /// Dense symmetric evaluation at a point.
    pub fn eval(&self, point: &[T]) -> Result<nalgebra::DMatrix<T>, PolyError> {
        let mut m = nalgebra::DMatrix::<T>::zeros(self.size, self.size);
        for (&(i, j), p) in &self.entries {
            let v = p.eval(point)?;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex(e.to_vec())
    }

    #[test]
    fn basis_two_vars_degree_one() {
        let b = monomial_basis(2, 1);
        assert_eq!(b, vec![mi(&[0, 0]), mi(&[1, 0]), mi(&[0, 1])]);
    }

    #[test]
    fn basis_two_vars_degree_two_matches_listing() {
        // (1, x1, x2, x1^2, x1 x2, x2^2)
        let b = monomial_basis(2, 2);
        let expected = vec![
            mi(&[0, 0]),
            mi(&[1, 0]),
            mi(&[0, 1]),
            mi(&[2, 0]),
            mi(&[1, 1]),
            mi(&[0, 2]),
        ];
        assert_eq!(b, expected);
    }

    #[test]
    fn basis_count_three_vars_degree_four() {
        let b = monomial_basis(3, 4);
        assert_eq!(b.len(), 35);
        assert_eq!(basis_len(3, 4), 35);
    }

    #[test]
    fn multiply_difference_of_squares() {
        // (1 + a)(1 - a) = 1 - a^2
        let one = Polynomial::<f64>::constant(1, 1.0);
        let a = Polynomial::<f64>::variable(1, 0);
        let p = &one + &a;
        let q = &one - &a;
        let prod = p.checked_mul(&q).unwrap();
        let mut expected = Polynomial::constant(1, 1.0);
        expected.add_term(mi(&[2]), -1.0);
        assert_eq!(prod, expected);
    }

    #[test]
    fn multiply_monomials_adds_degrees() {
        let a = Polynomial::<f64>::variable(1, 0);
        let a2 = a.checked_mul(&a).unwrap();
        let a3 = a.checked_mul(&a2).unwrap();
        assert_eq!(a3.degree(), 3);
        assert_eq!(a3.coefficient(&mi(&[3])), 1.0);
    }

    #[test]
    fn multiply_inertia_law_by_one() {
        // (c2*a^2 + c3*a^3) * 1 with c2 = 41/54, c3 = 0
        let c2 = 41.0 / 54.0;
        let p = Polynomial::<f64>::from_terms(1, [(mi(&[2]), c2), (mi(&[3]), 0.0)]);
        let one = Polynomial::constant(1, 1.0);
        let prod = p.checked_mul(&one).unwrap();
        assert_eq!(prod.degree(), 2);
        assert_eq!(prod.coefficient(&mi(&[2])), c2);
        assert_eq!(prod.coefficient(&mi(&[3])), 0.0);
    }

    #[test]
    fn multiply_rejects_mismatched_vars() {
        let p = Polynomial::<f64>::variable(1, 0);
        let q = Polynomial::<f64>::variable(2, 0);
        assert_eq!(
            p.checked_mul(&q),
            Err(PolyError::DimensionMismatch { expected: 1, got: 2 })
        );
    }

    #[test]
    fn eval_square() {
        let a = Polynomial::<f64>::variable(1, 0);
        let a2 = a.checked_mul(&a).unwrap();
        assert_eq!(a2.eval(&[3.0]).unwrap(), 9.0);
    }

    #[test]
    fn eval_cubic_inertia() {
        // I(a) = 25/27 a^3 at a = vbar / sqrt(2), vbar = 0.816597322
        let vbar = 0.816597322_f64;
        let a_val = vbar / 2.0_f64.sqrt();
        let p = Polynomial::<f64>::from_terms(1, [(mi(&[3]), 25.0 / 27.0)]);
        let got = p.eval(&[a_val]).unwrap();
        let expected = 25.0 / 27.0 * a_val * a_val * a_val;
        assert!((got - expected).abs() <= 1e-15 * expected.abs());
    }

    #[test]
    fn eval_constant_ignores_point() {
        let p = Polynomial::<f64>::constant(3, 7.738);
        assert_eq!(p.eval(&[1.0, -2.0, 0.5]).unwrap(), 7.738);
    }

    #[test]
    fn eval_rejects_wrong_point_length() {
        let p = Polynomial::<f64>::variable(2, 0);
        assert_eq!(
            p.eval(&[1.0]),
            Err(PolyError::DimensionMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn affine_substitution_matches_direct_eval() {
        // p(x, y) = 3x^2 y - y + 2, substitute x -> 2x + 1, y -> -y + 0.5
        let p = Polynomial::<f64>::from_terms(
            2,
            [(mi(&[2, 1]), 3.0), (mi(&[0, 1]), -1.0), (mi(&[0, 0]), 2.0)],
        );
        let sub = p.affine_substitute(&[(2.0, 1.0), (-1.0, 0.5)]);
        for &(x, y) in &[(0.3, -0.7), (1.1, 0.25), (-0.9, 2.0)] {
            let direct = p.eval(&[2.0 * x + 1.0, -y + 0.5]).unwrap();
            let via_sub = sub.eval(&[x, y]).unwrap();
            assert!((direct - via_sub).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn poly_matrix_symmetry_and_degree() {
        let mut g = PolyMatrix::<f64>::zero(2, 2);
        let a = Polynomial::variable(2, 1);
        let a2 = a.checked_mul(&a).unwrap();
        g.set(0, 1, Polynomial::constant(2, 1.0));
        g.set(1, 1, a2);
        assert_eq!(g.degree(), 2);
        let m = g.eval(&[0.0, 3.0]).unwrap();
        assert_eq!(m[(0, 1)], 1.0);
        assert_eq!(m[(1, 0)], 1.0);
        assert_eq!(m[(1, 1)], 9.0);
    }

    fn arb_multi_index(n: usize, max_e: u32) -> impl Strategy<Value = MultiIndex> {
        prop::collection::vec(0..=max_e, n).prop_map(MultiIndex)
    }

    fn arb_poly(n: usize) -> impl Strategy<Value = Polynomial<f64>> {
        prop::collection::vec((arb_multi_index(n, 2), -1.0..1.0f64), 0..6)
            .prop_map(move |terms| Polynomial::from_terms(n, terms))
    }

    /// Small-integer coefficients keep float products exact, so the ring
    /// axioms can be asserted as coefficient equality.
    fn arb_int_poly(n: usize) -> impl Strategy<Value = Polynomial<f64>> {
        prop::collection::vec((arb_multi_index(n, 2), -3..=3i32), 0..6)
            .prop_map(move |terms| {
                Polynomial::from_terms(n, terms.into_iter().map(|(m, c)| (m, c as f64)))
            })
    }

    proptest! {
        #[test]
        fn order_is_total(a in arb_multi_index(3, 4), b in arb_multi_index(3, 4)) {
            let lt = a < b;
            let gt = a > b;
            let eq = a == b;
            prop_assert_eq!(u8::from(lt) + u8::from(gt) + u8::from(eq), 1);
        }

        #[test]
        fn basis_prefix_property(n in 1usize..4, k in 0u32..4) {
            let small = monomial_basis(n, k);
            let big = monomial_basis(n, k + 1);
            prop_assert_eq!(&big[..small.len()], &small[..]);
        }

        #[test]
        fn ring_axioms(p in arb_int_poly(2), q in arb_int_poly(2), r in arb_int_poly(2)) {
            // associativity of multiplication, exact coefficient equality
            let lhs = p.checked_mul(&q).unwrap().checked_mul(&r).unwrap();
            let rhs = p.checked_mul(&q.checked_mul(&r).unwrap()).unwrap();
            prop_assert_eq!(&lhs, &rhs);
            // distributivity
            let d1 = p.checked_mul(&(&q + &r)).unwrap();
            let d2 = &p.checked_mul(&q).unwrap() + &p.checked_mul(&r).unwrap();
            prop_assert_eq!(&d1, &d2);
        }

        #[test]
        fn eval_is_ring_homomorphism(
            p in arb_poly(2),
            q in arb_poly(2),
            x in -1.0..1.0f64,
            y in -1.0..1.0f64,
        ) {
            let pt = [x, y];
            let prod = p.checked_mul(&q).unwrap().eval(&pt).unwrap();
            let sep = p.eval(&pt).unwrap() * q.eval(&pt).unwrap();
            prop_assert!((prod - sep).abs() <= 1e-12 * (1.0 + sep.abs()));
        }
    }
}
