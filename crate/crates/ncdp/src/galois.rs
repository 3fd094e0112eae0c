//! GF(2^n) arithmetic and finite-field linear algebra.
//!
//! Elements are bit strings of length `n` interpreted as polynomials over
//! GF(2); addition is bitwise XOR, multiplication is carry-less
//! multiplication reduced by an irreducible polynomial. Multiplication and
//! inversion go through log/antilog tables built at `Field` construction,
//! which keeps Gaussian elimination cheap inside Monte Carlo loops.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GaloisError {
    #[error("field exponent n={0} out of range (1..=16)")]
    ExponentOutOfRange(u8),
    #[error("reduction polynomial {poly:#x} invalid for GF(2^{n}): {reason}")]
    BadPolynomial { poly: u32, n: u8, reason: &'static str },
    #[error("element value {value:#x} out of range for GF(2^{n})")]
    ValueOutOfRange { value: u32, n: u8 },
    #[error("operands belong to different field specs")]
    SpecMismatch,
    #[error("division by zero in GF(2^n)")]
    DivisionByZero,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Degree of a GF(2) polynomial given as a bitmask (-1 for the zero poly).
fn degree(p: u32) -> i32 {
    31 - p.leading_zeros() as i32
}

/// Remainder of carry-less division of `a` by `b` over GF(2).
fn poly_mod(mut a: u32, b: u32) -> u32 {
    let db = degree(b);
    while degree(a) >= db {
        a ^= b << (degree(a) - db);
    }
    a
}

/// Exhaustive irreducibility check for polynomials of degree up to 16.
fn is_irreducible(poly: u32, n: u8) -> bool {
    if poly & 1 == 0 {
        // divisible by x
        return n == 0;
    }
    // trial division by every polynomial of degree 1..=n/2
    for d in 1..=(n as u32 / 2) {
        for low in 0..(1u32 << d) {
            let divisor = (1u32 << d) | low;
            if poly_mod(poly, divisor) == 0 {
                return false;
            }
        }
    }
    true
}

/// Parameters of a GF(2^n) field: exponent and reduction polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldSpec {
    n: u8,
    poly: u32,
}

impl FieldSpec {
    pub fn new(n: u8, poly: u32) -> Result<Self, GaloisError> {
        if n == 0 || n > 16 {
            return Err(GaloisError::ExponentOutOfRange(n));
        }
        if poly >> n != 1 {
            return Err(GaloisError::BadPolynomial {
                poly,
                n,
                reason: "bit n must be the leading bit",
            });
        }
        if !is_irreducible(poly, n) {
            return Err(GaloisError::BadPolynomial {
                poly,
                n,
                reason: "polynomial is reducible over GF(2)",
            });
        }
        Ok(Self { n, poly })
    }

    /// Default reduction polynomial: 0x11B for GF(2^8), otherwise the
    /// lexicographically smallest irreducible polynomial of degree n.
    pub fn with_default_poly(n: u8) -> Result<Self, GaloisError> {
        if n == 0 || n > 16 {
            return Err(GaloisError::ExponentOutOfRange(n));
        }
        if n == 8 {
            return Self::new(8, 0x11B);
        }
        let base = 1u32 << n;
        for low in 0..(1u32 << n) {
            let cand = base | low;
            if is_irreducible(cand, n) {
                return Self::new(n, cand);
            }
        }
        unreachable!("an irreducible polynomial of each degree exists")
    }

    pub fn n(&self) -> u8 {
        self.n
    }

    pub fn poly(&self) -> u32 {
        self.poly
    }

    /// Number of field elements, 2^n.
    pub fn order(&self) -> u32 {
        1 << self.n
    }
}

/// A scalar in GF(2^n), tagged with its field spec so cross-field
/// operations can be rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u16,
    spec: FieldSpec,
}

impl FieldElement {
    pub fn value(&self) -> u16 {
        self.value
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }
}

/// A GF(2^n) field with precomputed log/antilog tables.
#[derive(Clone)]
pub struct Field {
    spec: FieldSpec,
    exp: Arc<Vec<u16>>,
    log: Arc<Vec<u16>>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field").field("spec", &self.spec).finish()
    }
}

/// Carry-less multiply modulo the reduction polynomial, table-free.
fn clmul_mod(a: u16, b: u16, spec: FieldSpec) -> u16 {
    let mut acc: u32 = 0;
    let mut a = a as u32;
    let mut b = b as u32;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        a <<= 1;
        b >>= 1;
    }
    // reduce
    while degree(acc) >= spec.n as i32 {
        acc ^= spec.poly << (degree(acc) - spec.n as i32);
    }
    acc as u16
}

impl Field {
    pub fn new(spec: FieldSpec) -> Self {
        let order = spec.order() as usize;
        let group = order - 1;
        // find a primitive element and fill the tables from its powers
        let mut exp = vec![0u16; 2 * group];
        let mut log = vec![0u16; order];
        'outer: for g in 2..order as u16 {
            let mut x = 1u16;
            for (i, slot) in exp.iter_mut().take(group).enumerate() {
                *slot = x;
                if x == 1 && i > 0 {
                    continue 'outer; // order of g divides i < group
                }
                x = clmul_mod(x, g, spec);
            }
            if x != 1 {
                continue; // not a generator (should not happen)
            }
            for i in 0..group {
                log[exp[i] as usize] = i as u16;
                exp[group + i] = exp[i];
            }
            return Self {
                spec,
                exp: Arc::new(exp),
                log: Arc::new(log),
            };
        }
        // GF(2): the only unit is 1
        debug_assert_eq!(order, 2);
        Self {
            spec,
            exp: Arc::new(vec![1, 1]),
            log: Arc::new(vec![0, 0]),
        }
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn element(&self, value: u16) -> Result<FieldElement, GaloisError> {
        if (value as u32) >= self.spec.order() {
            return Err(GaloisError::ValueOutOfRange {
                value: value as u32,
                n: self.spec.n,
            });
        }
        Ok(FieldElement {
            value,
            spec: self.spec,
        })
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement {
            value: 0,
            spec: self.spec,
        }
    }

    pub fn one(&self) -> FieldElement {
        FieldElement {
            value: 1,
            spec: self.spec,
        }
    }

    fn check(&self, a: FieldElement) -> Result<(), GaloisError> {
        if a.spec != self.spec {
            return Err(GaloisError::SpecMismatch);
        }
        Ok(())
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, GaloisError> {
        self.check(a)?;
        self.check(b)?;
        Ok(FieldElement {
            value: a.value ^ b.value,
            spec: self.spec,
        })
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, GaloisError> {
        self.check(a)?;
        self.check(b)?;
        Ok(FieldElement {
            value: self.mul_raw(a.value, b.value),
            spec: self.spec,
        })
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, GaloisError> {
        self.check(a)?;
        if a.value == 0 {
            return Err(GaloisError::DivisionByZero);
        }
        Ok(FieldElement {
            value: self.inv_raw(a.value),
            spec: self.spec,
        })
    }

    /// Table multiply on raw values (caller guarantees range).
    #[inline]
    pub fn mul_raw(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
    }

    #[inline]
    pub fn inv_raw(&self, a: u16) -> u16 {
        debug_assert!(a != 0);
        let group = self.spec.order() as usize - 1;
        self.exp[(group - self.log[a as usize] as usize) % group]
    }
}

/// Dense matrix over GF(2^n); entry (j, i) is the coefficient of
/// terminal i in slot j.
#[derive(Clone, Debug)]
pub struct FieldMatrix {
    field: Field,
    rows: usize,
    cols: usize,
    data: Vec<u16>,
}

impl FieldMatrix {
    pub fn zeros(field: Field, rows: usize, cols: usize) -> Self {
        Self {
            field,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(field: Field, size: usize) -> Self {
        let mut m = Self::zeros(field, size, size);
        for i in 0..size {
            m.data[i * size + i] = 1;
        }
        m
    }

    /// Build from raw row-major values; every value must be in range.
    pub fn from_rows(field: Field, rows: &[Vec<u16>]) -> Result<Self, GaloisError> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(GaloisError::Dimension("ragged rows".into()));
            }
            for &v in row {
                if (v as u32) >= field.spec().order() {
                    return Err(GaloisError::ValueOutOfRange {
                        value: v as u32,
                        n: field.spec().n(),
                    });
                }
                data.push(v);
            }
        }
        Ok(Self {
            field,
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u16) {
        debug_assert!((value as u32) < self.field.spec().order());
        self.data[row * self.cols + col] = value;
    }

    pub fn entry(&self, row: usize, col: usize) -> FieldElement {
        FieldElement {
            value: self.get(row, col),
            spec: self.field.spec(),
        }
    }

    /// Rank over GF(2^n) by row reduction.
    pub fn rank(&self) -> usize {
        let mut m = self.data.clone();
        let f = &self.field;
        let (rows, cols) = (self.rows, self.cols);
        let mut rank = 0;
        for col in 0..cols {
            if rank == rows {
                break;
            }
            let pivot = match (rank..rows).find(|&r| m[r * cols + col] != 0) {
                Some(r) => r,
                None => continue,
            };
            for c in 0..cols {
                m.swap(rank * cols + c, pivot * cols + c);
            }
            let pinv = f.inv_raw(m[rank * cols + col]);
            for r in rank + 1..rows {
                let factor = f.mul_raw(m[r * cols + col], pinv);
                if factor != 0 {
                    for c in col..cols {
                        let v = f.mul_raw(factor, m[rank * cols + c]);
                        m[r * cols + c] ^= v;
                    }
                }
            }
            rank += 1;
        }
        rank
    }
}

/// Outcome of reducing a frame's equation system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    /// Column index (terminal) -> recovered message vector over GF(2^n).
    pub recovered: BTreeMap<usize, Vec<u16>>,
    /// Columns whose value is not uniquely determined.
    pub unresolved: BTreeSet<usize>,
}

/// Reduce the system `m * x = rhs` to reduced row echelon form and return
/// every variable whose value is uniquely determined. A full-rank system
/// recovers everything; rank-deficient systems still yield the variables
/// pinned down by the echelon structure, which subsumes iterative
/// clean-burst peeling.
pub fn solve_or_reduce(
    m: &FieldMatrix,
    rhs: &[Vec<u16>],
) -> Result<SolveOutcome, GaloisError> {
    if rhs.len() != m.rows() {
        return Err(GaloisError::Dimension(format!(
            "matrix has {} rows but rhs has {} vectors",
            m.rows(),
            rhs.len()
        )));
    }
    let msg_len = rhs.first().map_or(0, |v| v.len());
    if rhs.iter().any(|v| v.len() != msg_len) {
        return Err(GaloisError::Dimension("ragged rhs vectors".into()));
    }
    let f = m.field().clone();
    let order = f.spec().order();
    for v in rhs.iter().flat_map(|v| v.iter()) {
        if (*v as u32) >= order {
            return Err(GaloisError::ValueOutOfRange {
                value: *v as u32,
                n: f.spec().n(),
            });
        }
    }

    let (rows, cols) = (m.rows(), m.cols());
    let mut a: Vec<u16> = (0..rows * cols).map(|i| m.data[i]).collect();
    let mut b: Vec<Vec<u16>> = rhs.to_vec();

    // full RREF with the same row operations applied to the rhs
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; cols];
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let pivot = match (rank..rows).find(|&r| a[r * cols + col] != 0) {
            Some(r) => r,
            None => continue,
        };
        if pivot != rank {
            for c in 0..cols {
                a.swap(rank * cols + c, pivot * cols + c);
            }
            b.swap(rank, pivot);
        }
        let pinv = f.inv_raw(a[rank * cols + col]);
        if pinv != 1 {
            for c in col..cols {
                a[rank * cols + c] = f.mul_raw(a[rank * cols + c], pinv);
            }
            for v in b[rank].iter_mut() {
                *v = f.mul_raw(*v, pinv);
            }
        }
        for r in 0..rows {
            if r == rank {
                continue;
            }
            let factor = a[r * cols + col];
            if factor != 0 {
                for c in col..cols {
                    let v = f.mul_raw(factor, a[rank * cols + c]);
                    a[r * cols + c] ^= v;
                }
                for i in 0..msg_len {
                    let v = f.mul_raw(factor, b[rank][i]);
                    b[r][i] ^= v;
                }
            }
        }
        pivot_of_col[col] = Some(rank);
        rank += 1;
    }

    // a pivot variable is determined iff its row touches no other column
    let mut recovered = BTreeMap::new();
    let mut unresolved = BTreeSet::new();
    for col in 0..cols {
        match pivot_of_col[col] {
            Some(row) => {
                let clean = (0..cols).all(|c| c == col || a[row * cols + c] == 0);
                if clean {
                    recovered.insert(col, b[row].clone());
                } else {
                    unresolved.insert(col);
                }
            }
            None => {
                unresolved.insert(col);
            }
        }
    }
    Ok(SolveOutcome {
        recovered,
        unresolved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gf256() -> Field {
        Field::new(FieldSpec::with_default_poly(8).unwrap())
    }

    #[test]
    fn default_polys() {
        assert_eq!(FieldSpec::with_default_poly(8).unwrap().poly(), 0x11B);
        assert_eq!(FieldSpec::with_default_poly(1).unwrap().poly(), 0x3);
        // x^4 + x + 1 is the smallest irreducible quartic
        assert_eq!(FieldSpec::with_default_poly(4).unwrap().poly(), 0x13);
    }

    #[test]
    fn rejects_reducible_poly() {
        // x^8 + 1 = (x+1)^8 over GF(2)
        assert!(matches!(
            FieldSpec::new(8, 0x101),
            Err(GaloisError::BadPolynomial { .. })
        ));
    }

    #[test]
    fn add_examples() {
        let f = gf256();
        let a = f.element(0x53).unwrap();
        assert_eq!(f.add(a, a).unwrap().value(), 0x00);
        assert_eq!(f.add(a, f.zero()).unwrap(), a);
        let b = f.element(0xCA).unwrap();
        assert_eq!(f.add(a, b).unwrap().value(), 0x53 ^ 0xCA);
        assert_eq!(0x53 ^ 0xCA, 0x99);
    }

    #[test]
    fn mul_examples() {
        let f = gf256();
        let a = f.element(0xB7).unwrap();
        assert_eq!(f.mul(a, f.one()).unwrap(), a);
        // 0x02 * 0x80 = x * x^7 = x^8 = 0x11B ^ 0x100 = 0x1B
        let x = f.element(0x02).unwrap();
        let y = f.element(0x80).unwrap();
        assert_eq!(f.mul(x, y).unwrap().value(), 0x1B);
    }

    #[test]
    fn inv_examples() {
        let f = gf256();
        assert_eq!(f.inv(f.one()).unwrap(), f.one());
        assert!(matches!(f.inv(f.zero()), Err(GaloisError::DivisionByZero)));
        for v in 1..=255u16 {
            let a = f.element(v).unwrap();
            let ai = f.inv(a).unwrap();
            assert_eq!(f.mul(a, ai).unwrap(), f.one());
            assert_eq!(f.inv(ai).unwrap(), a);
        }
        let gf2 = Field::new(FieldSpec::with_default_poly(1).unwrap());
        assert_eq!(gf2.inv(gf2.one()).unwrap(), gf2.one());
    }

    #[test]
    fn spec_mismatch_rejected() {
        let f8 = gf256();
        let f4 = Field::new(FieldSpec::with_default_poly(4).unwrap());
        let a = f8.element(3).unwrap();
        let b = f4.element(3).unwrap();
        assert_eq!(f8.add(a, b), Err(GaloisError::SpecMismatch));
        assert_eq!(f8.mul(a, b), Err(GaloisError::SpecMismatch));
    }

    #[test]
    fn table_mul_matches_clmul() {
        for n in [1u8, 4, 8] {
            let spec = FieldSpec::with_default_poly(n).unwrap();
            let f = Field::new(spec);
            let order = spec.order() as u16;
            for a in 0..order.min(64) {
                for b in 0..order.min(64) {
                    assert_eq!(f.mul_raw(a, b), clmul_mod(a, b, spec));
                }
            }
        }
    }

    #[test]
    fn rank_small_cases() {
        let f = gf256();
        assert_eq!(FieldMatrix::identity(f.clone(), 3).rank(), 3);
        let m = FieldMatrix::from_rows(f.clone(), &[vec![5, 7], vec![5, 7]]).unwrap();
        assert_eq!(m.rank(), 1);
        assert_eq!(FieldMatrix::zeros(f, 4, 4).rank(), 0);
    }

    /// Brute-force rank over GF(2): dimension of the row span by
    /// enumerating all linear combinations.
    fn rank_bruteforce_gf2(rows: &[Vec<u16>]) -> usize {
        let cols = rows.first().map_or(0, |r| r.len());
        let pack = |r: &Vec<u16>| -> u32 {
            r.iter().enumerate().map(|(i, &v)| (v as u32) << i).sum()
        };
        let mut span = std::collections::BTreeSet::new();
        let n = rows.len();
        for mask in 0u32..(1 << n) {
            let mut acc = 0u32;
            for (i, r) in rows.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    acc ^= pack(r);
                }
            }
            span.insert(acc);
        }
        let _ = cols;
        (span.len() as f64).log2().round() as usize
    }

    #[test]
    fn rank_matches_bruteforce_gf2() {
        let f = Field::new(FieldSpec::with_default_poly(1).unwrap());
        // all 2x2 matrices over GF(2)
        let mut full_rank = 0;
        for bits in 0u8..16 {
            let rows = vec![
                vec![(bits & 1) as u16, (bits >> 1 & 1) as u16],
                vec![(bits >> 2 & 1) as u16, (bits >> 3 & 1) as u16],
            ];
            let m = FieldMatrix::from_rows(f.clone(), &rows).unwrap();
            assert_eq!(m.rank(), rank_bruteforce_gf2(&rows));
            if m.rank() == 2 {
                full_rank += 1;
            }
        }
        assert_eq!(full_rank, 6); // 6/16 = 0.375
    }

    #[test]
    fn rank_matches_bruteforce_gf4_random() {
        let f = Field::new(FieldSpec::with_default_poly(2).unwrap());
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let rows: Vec<Vec<u16>> = (0..rng.gen_range(1..=4))
                .map(|_| (0..3).map(|_| rng.gen_range(0..4u16)).collect())
                .collect();
            let m = FieldMatrix::from_rows(f.clone(), &rows).unwrap();
            // brute force over GF(4): enumerate row combinations with scalars
            let mut span = std::collections::BTreeSet::new();
            let n = rows.len();
            let mut coeffs = vec![0u16; n];
            loop {
                let mut acc = vec![0u16; 3];
                for (i, r) in rows.iter().enumerate() {
                    for c in 0..3 {
                        acc[c] ^= f.mul_raw(coeffs[i], r[c]);
                    }
                }
                span.insert(acc);
                let mut i = 0;
                while i < n {
                    coeffs[i] += 1;
                    if coeffs[i] < 4 {
                        break;
                    }
                    coeffs[i] = 0;
                    i += 1;
                }
                if i == n {
                    break;
                }
            }
            let brute = (span.len() as f64).log(4.0).round() as usize;
            assert_eq!(m.rank(), brute);
        }
    }

    #[test]
    fn solve_full_rank_recovers_planted() {
        let f = gf256();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(1..=5);
            let s = n + rng.gen_range(0..3);
            // keep drawing until full rank
            let (m, x) = loop {
                let rows: Vec<Vec<u16>> = (0..s)
                    .map(|_| (0..n).map(|_| rng.gen_range(0..256u16)).collect())
                    .collect();
                let m = FieldMatrix::from_rows(f.clone(), &rows).unwrap();
                if m.rank() == n {
                    let x: Vec<Vec<u16>> = (0..n)
                        .map(|_| (0..4).map(|_| rng.gen_range(0..256u16)).collect())
                        .collect();
                    break (m, x);
                }
            };
            let rhs: Vec<Vec<u16>> = (0..s)
                .map(|r| {
                    let mut acc = vec![0u16; 4];
                    for (c, xv) in x.iter().enumerate() {
                        for (i, &v) in xv.iter().enumerate() {
                            acc[i] ^= f.mul_raw(m.get(r, c), v);
                        }
                    }
                    acc
                })
                .collect();
            let out = solve_or_reduce(&m, &rhs).unwrap();
            assert!(out.unresolved.is_empty());
            for (c, xv) in x.iter().enumerate() {
                assert_eq!(&out.recovered[&c], xv);
            }
        }
    }

    #[test]
    fn solve_peeling_example() {
        // rows [(a,0,0), (a,b,0)]: row 1 clean -> terminal 0; substitute
        // into row 2 -> terminal 1; terminal 2 unresolved
        let f = gf256();
        let a = 0x35u16;
        let b = 0x9Du16;
        let m = FieldMatrix::from_rows(f.clone(), &[vec![a, 0, 0], vec![a, b, 0]]).unwrap();
        let x0 = vec![0x10u16, 0x20];
        let x1 = vec![0x42u16, 0x99];
        let rhs = vec![
            vec![f.mul_raw(a, x0[0]), f.mul_raw(a, x0[1])],
            vec![
                f.mul_raw(a, x0[0]) ^ f.mul_raw(b, x1[0]),
                f.mul_raw(a, x0[1]) ^ f.mul_raw(b, x1[1]),
            ],
        ];
        let out = solve_or_reduce(&m, &rhs).unwrap();
        assert_eq!(out.recovered[&0], x0);
        assert_eq!(out.recovered[&1], x1);
        assert_eq!(out.unresolved, BTreeSet::from([2]));
    }

    #[test]
    fn solve_all_zero_matrix() {
        let f = gf256();
        let m = FieldMatrix::zeros(f, 3, 3);
        let rhs = vec![vec![0u16; 2]; 3];
        let out = solve_or_reduce(&m, &rhs).unwrap();
        assert!(out.recovered.is_empty());
        assert_eq!(out.unresolved, BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn solve_dimension_mismatch() {
        let f = gf256();
        let m = FieldMatrix::zeros(f, 3, 3);
        assert!(matches!(
            solve_or_reduce(&m, &vec![vec![0u16; 2]; 2]),
            Err(GaloisError::Dimension(_))
        ));
    }

    /// Iterative clean-burst peeling: repeatedly find a row with exactly
    /// one unknown, solve it, substitute everywhere.
    fn peel(m: &FieldMatrix, rhs: &[Vec<u16>]) -> BTreeMap<usize, Vec<u16>> {
        let f = m.field().clone();
        let mut a: Vec<Vec<u16>> = (0..m.rows())
            .map(|r| (0..m.cols()).map(|c| m.get(r, c)).collect())
            .collect();
        let mut b = rhs.to_vec();
        let mut known: BTreeMap<usize, Vec<u16>> = BTreeMap::new();
        loop {
            let mut progressed = false;
            for r in 0..a.len() {
                let nz: Vec<usize> = (0..m.cols()).filter(|&c| a[r][c] != 0).collect();
                if nz.len() == 1 {
                    let c = nz[0];
                    let coef_inv = f.inv_raw(a[r][c]);
                    let x: Vec<u16> = b[r].iter().map(|&v| f.mul_raw(coef_inv, v)).collect();
                    known.entry(c).or_insert_with(|| x.clone());
                    // cancel column c from all rows
                    for rr in 0..a.len() {
                        let coef = a[rr][c];
                        if coef != 0 {
                            for (i, &xv) in x.iter().enumerate() {
                                b[rr][i] ^= f.mul_raw(coef, xv);
                            }
                            a[rr][c] = 0;
                        }
                    }
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        known
    }

    #[test]
    fn peeling_subset_of_elimination() {
        use rand::{Rng, SeedableRng};
        let f = gf256();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let n = rng.gen_range(1..=5);
            let s = rng.gen_range(1..=6);
            // sparse-ish matrix so peeling has work to do
            let rows: Vec<Vec<u16>> = (0..s)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            if rng.gen_bool(0.45) {
                                rng.gen_range(1..256u16)
                            } else {
                                0
                            }
                        })
                        .collect()
                })
                .collect();
            let m = FieldMatrix::from_rows(f.clone(), &rows).unwrap();
            let x: Vec<Vec<u16>> = (0..n)
                .map(|_| (0..2).map(|_| rng.gen_range(0..256u16)).collect())
                .collect();
            let rhs: Vec<Vec<u16>> = (0..s)
                .map(|r| {
                    let mut acc = vec![0u16; 2];
                    for (c, xv) in x.iter().enumerate() {
                        for (i, &v) in xv.iter().enumerate() {
                            acc[i] ^= f.mul_raw(m.get(r, c), v);
                        }
                    }
                    acc
                })
                .collect();
            let peeled = peel(&m, &rhs);
            let out = solve_or_reduce(&m, &rhs).unwrap();
            for (c, xv) in &peeled {
                assert_eq!(out.recovered.get(c), Some(xv), "peeled var missing");
            }
        }
    }

    proptest! {
        #[test]
        fn field_axioms(n in prop::sample::select(vec![1u8, 4, 8]),
                        a in 0u16..256, b in 0u16..256, c in 0u16..256) {
            let spec = FieldSpec::with_default_poly(n).unwrap();
            let f = Field::new(spec);
            let mask = (spec.order() - 1) as u16;
            let (a, b, c) = (a & mask, b & mask, c & mask);
            // commutativity
            prop_assert_eq!(f.mul_raw(a, b), f.mul_raw(b, a));
            // associativity
            prop_assert_eq!(f.mul_raw(f.mul_raw(a, b), c), f.mul_raw(a, f.mul_raw(b, c)));
            // distributivity
            prop_assert_eq!(f.mul_raw(a, b ^ c), f.mul_raw(a, b) ^ f.mul_raw(a, c));
            // inverses
            if a != 0 {
                prop_assert_eq!(f.mul_raw(a, f.inv_raw(a)), 1);
            }
        }
    }
}
