//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] stores the Taylor monomial coefficients of a smooth function at a
//! base point, up to a fixed total degree (`order`, at most [`MAX_ORDER`]).
//! Coefficients are monomial coefficients, i.e. `∂^α f / α!`, so that
//! multiplication is a plain truncated Cauchy product. Differentiation
//! consumes order: `partial` returns a jet of order one less, and it is an
//! error to differentiate an order-0 jet.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Highest supported truncation order. Fourth-order operators need four
/// derivatives; nothing in this crate needs more.
pub const MAX_ORDER: usize = 4;

/// Exponent vector of a Taylor monomial, one entry per coordinate.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u8>);

impl MultiIndex {
    pub fn new(exponents: Vec<u8>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// The index with a single 1 on `axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        assert!(axis < dim, "axis {axis} out of range for dimension {dim}");
        let mut e = vec![0; dim];
        e[axis] = 1;
        MultiIndex(e)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponent(&self, axis: usize) -> usize {
        self.0[axis] as usize
    }

    pub fn exponents(&self) -> &[u8] {
        &self.0
    }

    /// Total degree `|α|`.
    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// `α!`, the product of factorials of the entries.
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&e| (1..=e as u64).product::<u64>() as f64)
            .product()
    }

    fn sum(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// All exponent vectors of length `dim` with total degree exactly `degree`,
/// in lexicographic order (leading exponent descending).
pub fn multi_indices_of_degree(dim: usize, degree: usize) -> Vec<MultiIndex> {
    fn fill(out: &mut Vec<MultiIndex>, prefix: &mut Vec<u8>, axes_left: usize, deg_left: usize) {
        if axes_left == 1 {
            prefix.push(deg_left as u8);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in (0..=deg_left).rev() {
            prefix.push(e as u8);
            fill(out, prefix, axes_left - 1, deg_left - e);
            prefix.pop();
        }
    }
    assert!(dim >= 1, "dimension must be positive");
    let mut out = Vec::new();
    fill(&mut out, &mut Vec::new(), dim, degree);
    out
}

/// All exponent vectors of total degree at most `order`, graded by degree.
pub fn multi_indices_up_to(dim: usize, order: usize) -> Vec<MultiIndex> {
    (0..=order)
        .flat_map(|d| multi_indices_of_degree(dim, d))
        .collect()
}

/// Shared per-(dim, order) tables: the graded basis, position lookup, the
/// truncated Cauchy-product pair table, and prefix lengths for truncation.
struct Basis {
    dim: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    position: HashMap<Vec<u8>, usize>,
    // (i, j, k) triples: out[k] += a[i] * b[j]. Enumerated i-major then
    // j-major so that lower-order tables are subsequences of higher-order
    // ones; truncation then commutes bit-exactly with arithmetic.
    mul_table: Vec<(u32, u32, u32)>,
    // prefix_len[d] = number of indices of degree <= d.
    prefix_len: Vec<usize>,
}

impl Basis {
    fn build(dim: usize, order: usize) -> Basis {
        let indices = multi_indices_up_to(dim, order);
        let position: HashMap<Vec<u8>, usize> = indices
            .iter()
            .enumerate()
            .map(|(k, mi)| (mi.0.clone(), k))
            .collect();
        let degrees: Vec<usize> = indices.iter().map(|mi| mi.degree()).collect();
        let mut mul_table = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            for (j, b) in indices.iter().enumerate() {
                if degrees[i] + degrees[j] <= order {
                    let k = position[&a.sum(b).0];
                    mul_table.push((i as u32, j as u32, k as u32));
                }
            }
        }
        let prefix_len = (0..=order)
            .map(|d| degrees.iter().filter(|&&g| g <= d).count())
            .collect();
        Basis {
            dim,
            order,
            indices,
            position,
            mul_table,
            prefix_len,
        }
    }
}

fn basis(dim: usize, order: usize) -> Arc<Basis> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Basis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("basis cache poisoned");
    map.entry((dim, order))
        .or_insert_with(|| Arc::new(Basis::build(dim, order)))
        .clone()
}

/// Truncated Taylor expansion of a function at a point: `dim` variables,
/// total degree at most `order`, dense coefficient storage.
#[derive(Clone)]
pub struct Jet {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl Jet {
    /// Constant jet: value with all derivatives zero.
    pub fn constant(dim: usize, order: usize, value: f64) -> Jet {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let basis = basis(dim, order);
        let mut coeffs = vec![0.0; basis.indices.len()];
        coeffs[0] = value;
        Jet { basis, coeffs }
    }

    /// Jet of the coordinate function `x_axis` at a point where it takes
    /// `value`: constant term plus a unit first-order monomial (when the
    /// order allows one).
    pub fn variable(dim: usize, order: usize, axis: usize, value: f64) -> Jet {
        assert!(axis < dim, "axis {axis} out of range for dimension {dim}");
        let mut jet = Jet::constant(dim, order, value);
        if order >= 1 {
            let pos = jet.basis.position[&MultiIndex::unit(dim, axis).0];
            jet.coeffs[pos] = 1.0;
        }
        jet
    }

    /// Build a jet from explicit monomial coefficients in graded order
    /// (matching [`multi_indices_up_to`]).
    pub fn from_coeffs(dim: usize, order: usize, coeffs: Vec<f64>) -> Jet {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let basis = basis(dim, order);
        assert_eq!(
            coeffs.len(),
            basis.indices.len(),
            "coefficient vector length does not match basis size"
        );
        Jet { basis, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim
    }

    pub fn order(&self) -> usize {
        self.basis.order
    }

    /// The constant term, i.e. the value of the function at the base point.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Monomial coefficient of `index` (`∂^α f / α!`); zero if the degree
    /// exceeds the order.
    pub fn coeff(&self, index: &MultiIndex) -> f64 {
        assert_eq!(index.len(), self.dim(), "multi-index length != dimension");
        match self.basis.position.get(index.exponents()) {
            Some(&k) => self.coeffs[k],
            None => 0.0,
        }
    }

    /// The partial derivative `∂^α f` at the base point (coefficient times `α!`).
    pub fn derivative(&self, index: &MultiIndex) -> f64 {
        self.coeff(index) * index.factorial()
    }

    /// Iterate over `(multi-index, coefficient)` pairs in graded order.
    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.basis.indices.iter().zip(self.coeffs.iter().copied())
    }

    /// Discard all monomials of degree above `new_order`.
    pub fn truncate(&self, new_order: usize) -> Jet {
        assert!(
            new_order <= self.order(),
            "cannot truncate order {} up to {}",
            self.order(),
            new_order
        );
        let len = self.basis.prefix_len[new_order];
        Jet {
            basis: basis(self.dim(), new_order),
            coeffs: self.coeffs[..len].to_vec(),
        }
    }

    fn assert_same_shape(&self, other: &Jet) {
        assert_eq!(
            self.dim(),
            other.dim(),
            "jet dimension mismatch: {} vs {}",
            self.dim(),
            other.dim()
        );
        assert_eq!(
            self.order(),
            other.order(),
            "jet order mismatch: {} vs {}",
            self.order(),
            other.order()
        );
    }

    /// Multiply every coefficient by a scalar.
    pub fn scale(&self, factor: f64) -> Jet {
        Jet {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Partial derivative along `axis`; the result has one order less.
    pub fn partial(&self, axis: usize) -> Result<Jet> {
        assert!(axis < self.dim(), "axis {axis} out of range");
        if self.order() == 0 {
            return Err(Error::OrderExhausted);
        }
        let out_basis = basis(self.dim(), self.order() - 1);
        let mut coeffs = vec![0.0; out_basis.indices.len()];
        for (k, mi) in out_basis.indices.iter().enumerate() {
            let mut bumped = mi.0.clone();
            bumped[axis] += 1;
            let factor = bumped[axis] as f64;
            let src = self.basis.position[&bumped];
            coeffs[k] = factor * self.coeffs[src];
        }
        Ok(Jet {
            basis: out_basis,
            coeffs,
        })
    }

    /// Compose a univariate Taylor series around this jet's constant term:
    /// `series[m]` is `f^(m)(value)/m!`. Horner evaluation in the shifted
    /// jet `self - value`, which has no constant term, so truncation at
    /// `order` is exact.
    fn compose(&self, series: &[f64]) -> Jet {
        debug_assert_eq!(series.len(), self.order() + 1);
        let mut shifted = self.clone();
        shifted.coeffs[0] = 0.0;
        let mut result = Jet::constant(self.dim(), self.order(), series[self.order()]);
        for m in (0..self.order()).rev() {
            result = &result * &shifted;
            result.coeffs[0] += series[m];
        }
        result
    }

    pub fn sin(&self) -> Jet {
        let v = self.value();
        let cycle = [v.sin(), v.cos(), -v.sin(), -v.cos()];
        let series = taylor_from_cycle(&cycle, self.order());
        self.compose(&series)
    }

    pub fn cos(&self) -> Jet {
        let v = self.value();
        let cycle = [v.cos(), -v.sin(), -v.cos(), v.sin()];
        let series = taylor_from_cycle(&cycle, self.order());
        self.compose(&series)
    }

    pub fn exp(&self) -> Jet {
        let ev = self.value().exp();
        let mut series = vec![0.0; self.order() + 1];
        let mut fact = 1.0;
        for (m, s) in series.iter_mut().enumerate() {
            if m > 0 {
                fact *= m as f64;
            }
            *s = ev / fact;
        }
        self.compose(&series)
    }

    /// Square root; the constant term must be strictly positive.
    pub fn sqrt(&self) -> Result<Jet> {
        let v = self.value();
        if v <= 0.0 {
            return Err(Error::Domain {
                func: "sqrt",
                value: v,
            });
        }
        // Binomial series: c_{m+1} = c_m (1/2 - m) / ((m + 1) v).
        let mut series = vec![0.0; self.order() + 1];
        series[0] = v.sqrt();
        for m in 0..self.order() {
            series[m + 1] = series[m] * (0.5 - m as f64) / ((m as f64 + 1.0) * v);
        }
        Ok(self.compose(&series))
    }

    /// Natural logarithm; the constant term must be strictly positive.
    pub fn log(&self) -> Result<Jet> {
        let v = self.value();
        if v <= 0.0 {
            return Err(Error::Domain {
                func: "log",
                value: v,
            });
        }
        let mut series = vec![0.0; self.order() + 1];
        series[0] = v.ln();
        let mut pow = 1.0;
        for (m, s) in series.iter_mut().enumerate().skip(1) {
            pow *= v;
            *s = -(-1.0f64).powi(m as i32) / (m as f64 * pow);
        }
        Ok(self.compose(&series))
    }

    /// Reciprocal; the constant term must be nonzero.
    pub fn recip(&self) -> Result<Jet> {
        let v = self.value();
        if v == 0.0 || !v.is_finite() {
            return Err(Error::Domain {
                func: "recip",
                value: v,
            });
        }
        let mut series = vec![0.0; self.order() + 1];
        let mut pow = v;
        for (m, s) in series.iter_mut().enumerate() {
            *s = (-1.0f64).powi(m as i32) / pow;
            pow *= v;
        }
        Ok(self.compose(&series))
    }

    /// Integer power by binary exponentiation. Truncation is an algebra
    /// quotient, so repeated truncated products equal the truncated Taylor
    /// composition exactly.
    pub fn powi(&self, exponent: u32) -> Jet {
        let mut result = Jet::constant(self.dim(), self.order(), 1.0);
        let mut square = self.clone();
        let mut e = exponent;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &square;
            }
            e >>= 1;
            if e > 0 {
                square = &square * &square;
            }
        }
        result
    }
}

fn taylor_from_cycle(cycle: &[f64; 4], order: usize) -> Vec<f64> {
    let mut series = vec![0.0; order + 1];
    let mut fact = 1.0;
    for (m, s) in series.iter_mut().enumerate() {
        if m > 0 {
            fact *= m as f64;
        }
        *s = cycle[m % 4] / fact;
    }
    series
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet(dim={}, order={}, [", self.dim(), self.order())?;
        let mut first = true;
        for (mi, c) in self.iter() {
            if c != 0.0 {
                if !first {
                    write!(f, ", ")?;
                }
                write!(f, "{:?}: {c}", mi)?;
                first = false;
            }
        }
        write!(f, "])")
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.assert_same_shape(rhs);
        Jet {
            basis: self.basis.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.assert_same_shape(rhs);
        Jet {
            basis: self.basis.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.assert_same_shape(rhs);
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.basis.mul_table {
            coeffs[k as usize] += self.coeffs[i as usize] * rhs.coeffs[j as usize];
        }
        Jet {
            basis: self.basis.clone(),
            coeffs,
        }
    }
}

/// Invert the constant part of a square matrix by Gauss-Jordan elimination
/// with partial pivoting. Returns the inverse and the determinant.
fn invert_constant_matrix(m: &[Vec<f64>]) -> (Option<Vec<Vec<f64>>>, f64) {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut det = 1.0;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        if a[pivot_row][col] == 0.0 {
            return (None, 0.0);
        }
        if pivot_row != col {
            a.swap(pivot_row, col);
            inv.swap(pivot_row, col);
            det = -det;
        }
        let pivot = a[col][col];
        det *= pivot;
        for j in 0..n {
            a[col][j] /= pivot;
            inv[col][j] /= pivot;
        }
        for row in 0..n {
            if row != col {
                let factor = a[row][col];
                if factor != 0.0 {
                    for j in 0..n {
                        a[row][j] -= factor * a[col][j];
                        inv[row][j] -= factor * inv[col][j];
                    }
                }
            }
        }
    }
    (Some(inv), det)
}

/// Inverse of a square jet matrix whose constant part is invertible
/// (|det| above `eps_det`).
///
/// With `N = M0⁻¹ M − I` (no constant term), the inverse is the finite
/// geometric series `(I − N + N² − …) M0⁻¹`, exact at the truncation order.
pub fn jet_matrix_inverse(m: &[Vec<Jet>], eps_det: f64) -> Result<Vec<Vec<Jet>>> {
    let n = m.len();
    assert!(n > 0, "empty matrix");
    let dim = m[0][0].dim();
    let order = m[0][0].order();
    let constant: Vec<Vec<f64>> = m
        .iter()
        .map(|row| {
            assert_eq!(row.len(), n, "matrix is not square");
            row.iter().map(|j| j.value()).collect()
        })
        .collect();
    let (inv0, det) = invert_constant_matrix(&constant);
    let inv0 = match inv0 {
        Some(inv0) if det.abs() > eps_det => inv0,
        _ => return Err(Error::SingularMatrix { det, eps: eps_det }),
    };

    // N = M0⁻¹ M − I.
    let mut nil: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut acc = Jet::constant(dim, order, 0.0);
                    for k in 0..n {
                        acc = &acc + &m[k][j].scale(inv0[i][k]);
                    }
                    if i == j {
                        acc.coeffs[0] -= 1.0;
                    }
                    acc
                })
                .collect()
        })
        .collect();
    for row in nil.iter_mut() {
        for entry in row.iter_mut() {
            entry.coeffs[0] = 0.0; // exact: constant part of N vanishes by construction
        }
    }

    // series = I − N + N² − N³ + N⁴ (up to the truncation order).
    let identity: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Jet::constant(dim, order, if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    let mut series = identity.clone();
    let mut power = identity;
    let mut sign = 1.0;
    for _ in 0..order {
        power = mat_mul(&power, &nil);
        sign = -sign;
        for i in 0..n {
            for j in 0..n {
                series[i][j] = &series[i][j] + &power[i][j].scale(sign);
            }
        }
    }

    // result = series · M0⁻¹.
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut acc = Jet::constant(dim, order, 0.0);
                    for k in 0..n {
                        acc = &acc + &series[i][k].scale(inv0[k][j]);
                    }
                    acc
                })
                .collect()
        })
        .collect())
}

fn mat_mul(a: &[Vec<Jet>], b: &[Vec<Jet>]) -> Vec<Vec<Jet>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut acc = &a[i][0] * &b[0][j];
                    for k in 1..n {
                        acc = &acc + &(&a[i][k] * &b[k][j]);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Determinant of a square jet matrix by LU elimination with partial
/// pivoting on constant terms, falling back to Laplace expansion when no
/// usable pivot exists (e.g. a nilpotent constant part).
pub fn jet_det(m: &[Vec<Jet>]) -> Result<Jet> {
    let n = m.len();
    assert!(n > 0, "empty matrix");
    for row in m {
        assert_eq!(row.len(), n, "matrix is not square");
    }
    if n == 1 {
        return Ok(m[0][0].clone());
    }
    let dim = m[0][0].dim();
    let order = m[0][0].order();
    let mut a: Vec<Vec<Jet>> = m.to_vec();
    let mut det = Jet::constant(dim, order, 1.0);
    let mut sign = 1.0;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r][col].value().abs().total_cmp(&a[s][col].value().abs()))
            .unwrap();
        if a[pivot_row][col].value() == 0.0 {
            return laplace_det(m);
        }
        if pivot_row != col {
            a.swap(pivot_row, col);
            sign = -sign;
        }
        let pivot = a[col][col].clone();
        let pivot_inv = pivot.recip()?;
        det = &det * &pivot;
        for row in col + 1..n {
            let factor = &a[row][col] * &pivot_inv;
            for j in col..n {
                let delta = &factor * &a[col][j];
                a[row][j] = &a[row][j] - &delta;
            }
        }
    }
    Ok(det.scale(sign))
}

fn laplace_det(m: &[Vec<Jet>]) -> Result<Jet> {
    let n = m.len();
    if n == 1 {
        return Ok(m[0][0].clone());
    }
    let dim = m[0][0].dim();
    let order = m[0][0].order();
    let mut acc = Jet::constant(dim, order, 0.0);
    for col in 0..n {
        let minor: Vec<Vec<Jet>> = (1..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != col)
                    .map(|j| m[i][j].clone())
                    .collect()
            })
            .collect();
        let cofactor = &m[0][col] * &laplace_det(&minor)?;
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        acc = &acc + &cofactor.scale(sign);
    }
    Ok(acc)
}
