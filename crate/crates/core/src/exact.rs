//! Exact scalars: big rationals, the quadratic field `Q(√3)`, and small fixed-size
//! rational matrices.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serializer;

pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// `q^e` for a possibly negative exponent.
pub fn powi(q: &Rational, e: i32) -> Rational {
    if e >= 0 {
        num_traits::pow(q.clone(), e as usize)
    } else {
        num_traits::pow(q.recip(), (-e) as usize)
    }
}

/// Formats as `"num/den"`, or `"num"` for integers.
pub fn fmt_rational(q: &Rational) -> String {
    q.to_string()
}

pub fn serialize_rational<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

pub fn serialize_rational_slice<S: Serializer>(qs: &[Rational], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(qs.iter().map(|q| q.to_string()))
}

pub fn serialize_mat3<S: Serializer>(m: &Mat3, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(
        m.0.iter()
            .map(|row| row.iter().map(|q| q.to_string()).collect::<Vec<_>>()),
    )
}

/// Square root of a non-negative rational when it is itself rational.
pub fn rational_sqrt(q: &Rational) -> Option<Rational> {
    if q.is_negative() {
        return None;
    }
    let n = q.numer().sqrt();
    let d = q.denom().sqrt();
    if &(&n * &n) == q.numer() && &(&d * &d) == q.denom() {
        Some(Rational::new(n, d))
    } else {
        None
    }
}

/// An element `a + b√3` of `Q(√3)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct QSqrt3 {
    pub a: Rational,
    pub b: Rational,
}

impl QSqrt3 {
    pub fn new(a: Rational, b: Rational) -> Self {
        QSqrt3 { a, b }
    }

    pub fn rational(a: Rational) -> Self {
        QSqrt3 { a, b: Rational::zero() }
    }

    pub fn sqrt3_multiple(b: Rational) -> Self {
        QSqrt3 { a: Rational::zero(), b }
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn scale(&self, q: &Rational) -> Self {
        QSqrt3 {
            a: &self.a * q,
            b: &self.b * q,
        }
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.a) + to_f64(&self.b) * 3f64.sqrt()
    }
}

impl Zero for QSqrt3 {
    fn zero() -> Self {
        QSqrt3::default()
    }

    fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }
}

impl Add for &QSqrt3 {
    type Output = QSqrt3;
    fn add(self, o: &QSqrt3) -> QSqrt3 {
        QSqrt3::new(&self.a + &o.a, &self.b + &o.b)
    }
}

impl Add for QSqrt3 {
    type Output = QSqrt3;
    fn add(self, o: QSqrt3) -> QSqrt3 {
        &self + &o
    }
}

impl Sub for &QSqrt3 {
    type Output = QSqrt3;
    fn sub(self, o: &QSqrt3) -> QSqrt3 {
        QSqrt3::new(&self.a - &o.a, &self.b - &o.b)
    }
}

impl Neg for &QSqrt3 {
    type Output = QSqrt3;
    fn neg(self) -> QSqrt3 {
        QSqrt3::new(-&self.a, -&self.b)
    }
}

impl Mul for &QSqrt3 {
    type Output = QSqrt3;
    fn mul(self, o: &QSqrt3) -> QSqrt3 {
        let three = int(3);
        QSqrt3::new(&self.a * &o.a + &self.b * &o.b * three, &self.a * &o.b + &self.b * &o.a)
    }
}

impl fmt::Display for QSqrt3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a.is_zero(), self.b.is_zero()) {
            (_, true) => write!(f, "{}", self.a),
            (true, false) => write!(f, "({})√3", self.b),
            (false, false) => write!(f, "{} + ({})√3", self.a, self.b),
        }
    }
}

pub type Vec3 = [Rational; 3];

pub fn vec3(a: Rational, b: Rational, c: Rational) -> Vec3 {
    [a, b, c]
}

pub fn vec3_sum(v: &Vec3) -> Rational {
    &v[0] + &v[1] + &v[2]
}

pub fn vec3_add(u: &Vec3, v: &Vec3) -> Vec3 {
    [&u[0] + &v[0], &u[1] + &v[1], &u[2] + &v[2]]
}

pub fn vec3_scale(v: &Vec3, q: &Rational) -> Vec3 {
    [&v[0] * q, &v[1] * q, &v[2] * q]
}

pub fn vec3_dot(u: &Vec3, v: &Vec3) -> Rational {
    &u[0] * &v[0] + &u[1] * &v[1] + &u[2] * &v[2]
}

pub fn unit3(j: usize) -> Vec3 {
    let mut v = [Rational::zero(), Rational::zero(), Rational::zero()];
    v[j] = Rational::one();
    v
}

/// A 3×3 matrix of exact rationals, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mat3(pub [[Rational; 3]; 3]);

impl Mat3 {
    pub fn zero() -> Self {
        Mat3(std::array::from_fn(|_| std::array::from_fn(|_| Rational::zero())))
    }

    pub fn identity() -> Self {
        Mat3(std::array::from_fn(|i| {
            std::array::from_fn(|j| if i == j { Rational::one() } else { Rational::zero() })
        }))
    }

    pub fn from_fn(f: impl Fn(usize, usize) -> Rational) -> Self {
        Mat3(std::array::from_fn(|i| std::array::from_fn(|j| f(i, j))))
    }

    pub fn from_ints(rows: [[i64; 3]; 3], den: i64) -> Self {
        Mat3::from_fn(|i, j| rat(rows[i][j], den))
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.0[i][j]
    }

    pub fn transpose(&self) -> Self {
        Mat3::from_fn(|i, j| self.0[j][i].clone())
    }

    pub fn mul(&self, o: &Mat3) -> Mat3 {
        Mat3::from_fn(|i, j| &self.0[i][0] * &o.0[0][j] + &self.0[i][1] * &o.0[1][j] + &self.0[i][2] * &o.0[2][j])
    }

    pub fn mul_vec(&self, v: &Vec3) -> Vec3 {
        std::array::from_fn(|i| vec3_dot(&self.0[i], v))
    }

    pub fn add(&self, o: &Mat3) -> Mat3 {
        Mat3::from_fn(|i, j| &self.0[i][j] + &o.0[i][j])
    }

    pub fn scale(&self, q: &Rational) -> Mat3 {
        Mat3::from_fn(|i, j| &self.0[i][j] * q)
    }

    pub fn column(&self, j: usize) -> Vec3 {
        std::array::from_fn(|i| self.0[i][j].clone())
    }

    pub fn row_sums(&self) -> Vec3 {
        std::array::from_fn(|i| vec3_sum(&self.0[i]))
    }

    pub fn column_sums(&self) -> Vec3 {
        std::array::from_fn(|j| &self.0[0][j] + &self.0[1][j] + &self.0[2][j])
    }

    pub fn trace(&self) -> Rational {
        &self.0[0][0] + &self.0[1][1] + &self.0[2][2]
    }

    pub fn det(&self) -> Rational {
        let m = &self.0;
        &m[0][0] * (&m[1][1] * &m[2][2] - &m[1][2] * &m[2][1]) - &m[0][1] * (&m[1][0] * &m[2][2] - &m[1][2] * &m[2][0])
            + &m[0][2] * (&m[1][0] * &m[2][1] - &m[1][1] * &m[2][0])
    }

    /// Sum of the principal 2×2 minors (the `λ` coefficient of the characteristic polynomial).
    pub fn principal_minor_sum(&self) -> Rational {
        let m = &self.0;
        (&m[0][0] * &m[1][1] - &m[0][1] * &m[1][0])
            + (&m[0][0] * &m[2][2] - &m[0][2] * &m[2][0])
            + (&m[1][1] * &m[2][2] - &m[1][2] * &m[2][1])
    }

    pub fn to_f64(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| to_f64(&self.0[i][j])))
    }

    /// Applies `perm` to both row and column indices: `out[i][j] = self[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: [usize; 3]) -> Mat3 {
        Mat3::from_fn(|i, j| self.0[perm[i]][perm[j]].clone())
    }
}

impl fmt::Display for Mat3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let cells: Vec<String> = row.iter().map(|q| q.to_string()).collect();
            write!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

/// Exact roots of the monic cubic characteristic polynomial of `m`, when all are rational.
///
/// Candidate roots are found among the eigenvalues `1` (checked first) and the roots of
/// the deflated quadratic; returns `None` if any root is irrational.
pub fn rational_spectrum(m: &Mat3) -> Option<Vec<Rational>> {
    let c2 = -m.trace();
    let c1 = m.principal_minor_sum();
    let c0 = -m.det();
    let eval = |x: &Rational| x * x * x + &c2 * x * x + &c1 * x + &c0;
    let one = Rational::one();
    if !eval(&one).is_zero() {
        return None;
    }
    // Synthetic division by (λ - 1): λ² + b λ + c.
    let b = &c2 + &one;
    let c = &c1 + &b;
    let disc = &b * &b - int(4) * &c;
    let root = rational_sqrt(&disc)?;
    let two = int(2);
    let mut roots = vec![one, (-&b + &root) / &two, (-&b - &root) / &two];
    roots.sort_by(|x, y| y.abs().cmp(&x.abs()).then(y.cmp(x)));
    Some(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qsqrt3_arithmetic() {
        let x = QSqrt3::new(int(1), int(2));
        let y = QSqrt3::new(int(3), rat(-1, 2));
        let p = &x * &y;
        // (1 + 2√3)(3 − √3/2) = 3 − √3/2 + 6√3 − 3 = (11/2)√3
        assert_eq!(p, QSqrt3::sqrt3_multiple(rat(11, 2)));
        assert!((p.to_f64() - x.to_f64() * y.to_f64()).abs() < 1e-12);
        let s = QSqrt3::sqrt3_multiple(int(1));
        assert_eq!(&s * &s, QSqrt3::rational(int(3)));
    }

    #[test]
    fn mat3_basics() {
        let a = Mat3::from_ints([[1, 2, 0], [0, 1, 0], [3, 0, 1]], 1);
        assert_eq!(a.mul(&Mat3::identity()), a);
        assert_eq!(a.det(), int(1));
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.mul_vec(&unit3(0)), a.column(0));
    }

    #[test]
    fn spectrum_of_known_operator() {
        let m = Mat3::from_ints([[9, 0, 1], [0, 8, 0], [1, 0, 9]], 10);
        let s = rational_spectrum(&m).unwrap();
        assert_eq!(s, vec![int(1), rat(4, 5), rat(4, 5)]);
        let irr = Mat3::from_ints([[1, 0, 0], [0, 0, 1], [0, 2, 0]], 1);
        assert!(rational_spectrum(&irr).is_none());
    }

    #[test]
    fn rational_sqrt_detects_squares() {
        assert_eq!(rational_sqrt(&rat(9, 25)), Some(rat(3, 5)));
        assert_eq!(rational_sqrt(&rat(2, 1)), None);
        assert_eq!(rational_sqrt(&rat(-1, 4)), None);
    }
}
