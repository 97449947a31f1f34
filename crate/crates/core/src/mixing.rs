//! Symbolic dynamics of the Kusuoka measure: products `A_w`, SVD tails, the g-function,
//! the operator `M(B) = Σ_s A_s B A_s^T` on symmetric matrices, and decay of correlations.

use nalgebra::{Matrix2, Matrix3, Vector3};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{powi, rational_spectrum, serialize_mat3, to_f64, Mat3, QSqrt3, Rational};
use crate::measures::{exact_mat2_mul, exact_mat2_transpose, EnergyCoordinates, ExactMat2};
use crate::word::Word;

pub fn word_matrix(ec: &EnergyCoordinates, w: &Word) -> Result<Matrix2<f64>> {
    w.validate(ec.d())?;
    Ok(ec.word_matrix(w))
}

/// Coordinates `(a, b, c)` of `[[a, b], [b, c]]`.
pub fn sym_coords(m: &Matrix2<f64>) -> Vector3<f64> {
    Vector3::new(m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)])
}

pub fn sym_matrix(v: &Vector3<f64>) -> Matrix2<f64> {
    Matrix2::new(v[0], v[1], v[1], v[2])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymOperator {
    pub k: u32,
    /// Exact matrix of `M` on `(a, b, c)`.
    #[serde(serialize_with = "serialize_mat3")]
    pub rep_exact: Mat3,
    pub rep: [[f64; 3]; 3],
    /// Eigenvalues sorted by decreasing modulus.
    pub spectrum: Vec<f64>,
    /// The same eigenvalues as exact rationals, when they are rational.
    #[serde(skip)]
    pub spectrum_exact: Option<Vec<Rational>>,
}

impl SymOperator {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.rep[i][j])
    }

    pub fn apply(&self, b: &Matrix2<f64>) -> Matrix2<f64> {
        sym_matrix(&(self.matrix() * sym_coords(b)))
    }

    pub fn apply_power(&self, b: &Matrix2<f64>, g: usize) -> Matrix2<f64> {
        let m = self.matrix();
        let mut v = sym_coords(b);
        for _ in 0..g {
            v = m * v;
        }
        sym_matrix(&v)
    }

    /// Modulus of the second eigenvalue, the predicted mixing rate.
    pub fn second_eigenvalue(&self) -> f64 {
        self.spectrum.get(1).copied().unwrap_or(0.0).abs()
    }

    /// Exact `M^g` on an exact symmetric matrix given in `(a, b, c)` coordinates.
    fn apply_power_exact(&self, v: [QSqrt3; 3], g: usize) -> [QSqrt3; 3] {
        let mut v = v;
        for _ in 0..g {
            v = std::array::from_fn(|i| {
                (0..3).fold(QSqrt3::zero(), |acc, j| acc + v[j].scale(self.rep_exact.get(i, j)))
            });
        }
        v
    }
}

/// Builds `M` exactly from `P_s = √r A_s`: each `A_s B A_s^T = P_s B P_s^T / r`.
pub fn transfer_operator_matrix(ec: &EnergyCoordinates) -> Result<SymOperator> {
    let zero = || QSqrt3::zero();
    let mut rows: [[QSqrt3; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| zero()));
    for p in &ec.p_exact {
        let (a11, a12, a21, a22) = (&p[0][0], &p[0][1], &p[1][0], &p[1][1]);
        let two = Rational::from_integer(2.into());
        let contrib = [
            [a11 * a11, (a11 * a12).scale(&two), a12 * a12],
            [a11 * a21, &(a11 * a22) + &(a12 * a21), a12 * a22],
            [a21 * a21, (a21 * a22).scale(&two), a22 * a22],
        ];
        for i in 0..3 {
            for j in 0..3 {
                rows[i][j] = &rows[i][j] + &contrib[i][j];
            }
        }
    }
    let inv_r = ec.r.recip();
    let mut rep_exact = Mat3::zero();
    for i in 0..3 {
        for j in 0..3 {
            let e = rows[i][j].scale(&inv_r);
            if !e.is_rational() {
                return Err(Error::verification(
                    format!("k={} entry ({i},{j})", ec.k),
                    "operator entry has a nonzero √3 part",
                ));
            }
            rep_exact.0[i][j] = e.a;
        }
    }
    let rep = rep_exact.to_f64();
    let spectrum_exact = rational_spectrum(&rep_exact);
    let spectrum = match &spectrum_exact {
        Some(s) => s.iter().map(to_f64).collect(),
        None => {
            let mut ev: Vec<f64> = Matrix3::from_fn(|i, j| rep[i][j])
                .complex_eigenvalues()
                .iter()
                .map(|z| z.norm())
                .collect();
            ev.sort_by(|a, b| b.total_cmp(a));
            ev
        }
    };
    Ok(SymOperator {
        k: ec.k,
        rep_exact,
        rep,
        spectrum,
        spectrum_exact,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SvdRow {
    pub n: usize,
    /// Singular values of `A_{[x]_n}`, largest first.
    pub singular_values: [f64; 2],
    /// `Q_n^T Q_n` with `Q_n = E_n V_n^T` and `E_n = D_n / ‖D_n‖_F`.
    pub projector: [[f64; 2]; 2],
    /// `‖Q_n^T Q_n − Q_N^T Q_N‖_F` for the terminal `N = |x|`.
    pub distance_to_terminal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SvdTail {
    pub prefix: Word,
    pub rows: Vec<SvdRow>,
}

/// SVD of `A_{[x]_n}` for `n = 1..=|x|`. The factor `Q_n` is only defined up to signs and
/// column order, so convergence is measured on the projector `Q_n^T Q_n`.
pub fn svd_tail(ec: &EnergyCoordinates, x: &Word) -> Result<SvdTail> {
    if x.is_empty() {
        return Err(Error::domain("svd tail needs a nonempty prefix"));
    }
    x.validate(ec.d())?;
    let mut rows = Vec::with_capacity(x.len());
    let mut projectors: Vec<Matrix2<f64>> = Vec::with_capacity(x.len());
    let mut aw = Matrix2::identity();
    for (i, &s) in x.symbols().iter().enumerate() {
        aw = ec.a[s] * aw;
        let svd = aw.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let sv = svd.singular_values;
        let norm = sv.norm();
        let e = Matrix2::from_diagonal(&(sv / norm));
        let q = e * v_t;
        let proj = q.transpose() * q;
        projectors.push(proj);
        let (hi, lo) = if sv[0] >= sv[1] { (sv[0], sv[1]) } else { (sv[1], sv[0]) };
        rows.push(SvdRow {
            n: i + 1,
            singular_values: [hi, lo],
            projector: [[proj[(0, 0)], proj[(0, 1)]], [proj[(1, 0)], proj[(1, 1)]]],
            distance_to_terminal: 0.0,
        });
    }
    let terminal = *projectors.last().expect("prefix is nonempty");
    for (row, p) in rows.iter_mut().zip(&projectors) {
        row.distance_to_terminal = (*p - terminal).norm();
    }
    Ok(SvdTail {
        prefix: x.clone(),
        rows,
    })
}

/// `n ↦ ν(s | [x]_n) = ‖A_{[x]_n} A_s‖² / ‖A_{[x]_n}‖²` for `n = 0..=|x|`.
pub fn g_function_estimate(ec: &EnergyCoordinates, s: usize, x: &Word) -> Result<Vec<f64>> {
    if s >= ec.d() {
        return Err(Error::domain(format!("symbol {s} out of range")));
    }
    x.validate(ec.d())?;
    let mut aw: Matrix2<f64> = Matrix2::identity();
    let mut out = Vec::with_capacity(x.len() + 1);
    out.push((aw * ec.a[s]).norm_squared() / aw.norm_squared());
    for &t in x.symbols() {
        aw = ec.a[t] * aw;
        out.push((aw * ec.a[s]).norm_squared() / aw.norm_squared());
    }
    Ok(out)
}

/// A seeded uniformly random word, for convergence reports.
pub fn random_word(len: usize, d: usize, seed: u64) -> Word {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Word::new((0..len).map(|_| rng.random_range(0..d)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationMethod {
    /// Sum `‖A_{b·u·a}‖² / 2` over every gap word `u`.
    Brute,
    /// `Tr(A_a M^g(A_b A_b^T) A_a^T) / 2`.
    Operator,
}

impl std::str::FromStr for CorrelationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brute" => Ok(CorrelationMethod::Brute),
            "operator" => Ok(CorrelationMethod::Operator),
            _ => Err(Error::UnknownMethod(s.to_string())),
        }
    }
}

/// Gap length `n + |a| − |b|` between the cylinders.
pub fn correlation_gap(a: &Word, b: &Word, n: usize) -> Result<usize> {
    (n + a.len())
        .checked_sub(b.len())
        .ok_or_else(|| Error::domain("negative gap: need |b| ≤ n + |a|"))
}

/// `ν(T^{-(n+|a|)}[a] ∩ [b]) − ν([a]) ν([b])`.
pub fn correlation_exact(
    ec: &EnergyCoordinates,
    op: &SymOperator,
    a: &Word,
    b: &Word,
    n: usize,
    method: CorrelationMethod,
) -> Result<f64> {
    a.validate(ec.d())?;
    b.validate(ec.d())?;
    let gap = correlation_gap(a, b, n)?;
    let aa = ec.word_matrix(a);
    let ab = ec.word_matrix(b);
    let product = ec.cylinder(a) * ec.cylinder(b);
    let joint = match method {
        CorrelationMethod::Brute => {
            let d = ec.d();
            let count = d
                .checked_pow(gap as u32)
                .filter(|&c| c <= 50_000_000)
                .ok_or(Error::DepthCap {
                    k: ec.k,
                    requested: gap,
                    cap: 16,
                })?;
            let terms: Vec<f64> = (0..count)
                .into_par_iter()
                .map(|rank| {
                    let u = Word::from_rank(rank, gap, d);
                    (aa * ec.word_matrix(&u) * ab).norm_squared() / 2.0
                })
                .collect();
            terms.iter().sum::<f64>()
        }
        CorrelationMethod::Operator => {
            let mb = op.apply_power(&(ab * ab.transpose()), gap);
            (aa * mb * aa.transpose()).trace() / 2.0
        }
    };
    Ok(joint - product)
}

fn exact_word_matrix(ec: &EnergyCoordinates, w: &Word) -> ExactMat2 {
    let id: ExactMat2 = [
        [QSqrt3::rational(Rational::one()), QSqrt3::zero()],
        [QSqrt3::zero(), QSqrt3::rational(Rational::one())],
    ];
    w.symbols()
        .iter()
        .fold(id, |acc, &s| exact_mat2_mul(&ec.p_exact[s], &acc))
}

fn exact_norm_sq(m: &ExactMat2) -> QSqrt3 {
    let t = exact_mat2_mul(&exact_mat2_transpose(m), m);
    &t[0][0] + &t[1][1]
}

/// Exact operator-method correlation, carried out in `Q(√3)`.
pub fn correlation_operator_exact(
    ec: &EnergyCoordinates,
    op: &SymOperator,
    a: &Word,
    b: &Word,
    n: usize,
) -> Result<Rational> {
    a.validate(ec.d())?;
    b.validate(ec.d())?;
    let gap = correlation_gap(a, b, n)?;
    let pa = exact_word_matrix(ec, a);
    let pb = exact_word_matrix(ec, b);
    let bb = exact_mat2_mul(&pb, &exact_mat2_transpose(&pb));
    let v = op.apply_power_exact([bb[0][0].clone(), bb[0][1].clone(), bb[1][1].clone()], gap);
    let mg: ExactMat2 = [[v[0].clone(), v[1].clone()], [v[1].clone(), v[2].clone()]];
    let t = exact_mat2_mul(&exact_mat2_mul(&pa, &mg), &exact_mat2_transpose(&pa));
    let two = Rational::from_integer(2.into());
    // P_w = r^{|w|/2} A_w
    let joint = (&t[0][0] + &t[1][1]).scale(&(powi(&ec.r, -((a.len() + b.len()) as i32)) / &two));
    let nu_a = exact_norm_sq(&pa).scale(&(powi(&ec.r, -(a.len() as i32)) / &two));
    let nu_b = exact_norm_sq(&pb).scale(&(powi(&ec.r, -(b.len() as i32)) / &two));
    let value = &joint - &(&nu_a * &nu_b);
    if !value.is_rational() {
        return Err(Error::verification("correlation", "exact correlation has a √3 part"));
    }
    Ok(value.a)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingFit {
    pub k: u32,
    pub n_from: usize,
    pub n_to: usize,
    /// `exp` of the least-squares slope of `log|corr_n|` against `n`.
    pub rate: f64,
    /// Rate predicted by the operator: its second eigenvalue modulus.
    pub reference_rate: f64,
    /// `sup_n |corr_n| / reference_rate^n`.
    pub constant: f64,
    pub exactly_mixing: bool,
    pub exploratory: bool,
    pub correlations: Vec<(usize, f64)>,
}

pub fn mixing_rate_fit(
    ec: &EnergyCoordinates,
    op: &SymOperator,
    a: &Word,
    b: &Word,
    n_range: std::ops::RangeInclusive<usize>,
    method: CorrelationMethod,
) -> Result<MixingFit> {
    let (n_from, n_to) = (*n_range.start(), *n_range.end());
    if n_to <= n_from {
        return Err(Error::domain("fit range needs at least two points"));
    }
    let correlations: Vec<(usize, f64)> = n_range
        .map(|n| Ok((n, correlation_exact(ec, op, a, b, n, method)?)))
        .collect::<Result<_>>()?;
    let reference_rate = op.second_eigenvalue();
    let tiny = 1e-15;
    let exactly_mixing = correlations.iter().all(|(_, c)| c.abs() < tiny);
    let (rate, constant) = if exactly_mixing {
        (0.0, 0.0)
    } else {
        if correlations.iter().any(|(_, c)| c.abs() < tiny) {
            return Err(Error::domain("correlations vanish inside the fit range"));
        }
        let pts: Vec<(f64, f64)> = correlations.iter().map(|&(n, c)| (n as f64, c.abs().ln())).collect();
        let len = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let constant = correlations
            .iter()
            .map(|&(n, c)| c.abs() / reference_rate.powi(n as i32))
            .fold(0.0, f64::max);
        ((sxy / sxx).exp(), constant)
    };
    Ok(MixingFit {
        k: ec.k,
        n_from,
        n_to,
        rate,
        reference_rate,
        constant,
        exactly_mixing,
        exploratory: ec.k != 2,
        correlations,
    })
}

/// `max |tr M(B) − tr B|` over `count` seeded random symmetric matrices with entries in `[-1, 1]`.
pub fn trace_preservation_defect(op: &SymOperator, count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (a, b, c) = (
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
            );
            let m = Matrix2::new(a, b, b, c);
            (op.apply(&m).trace() - m.trace()).abs()
        })
        .fold(0.0, f64::max)
}

/// Whether the exact rep maps `I` to `I` and preserves traces.
pub fn exact_invariants_hold(op: &SymOperator) -> bool {
    let r = &op.rep_exact;
    let one = Rational::one();
    let fixes_identity = (0..3).all(|i| {
        let img = r.get(i, 0) + r.get(i, 2);
        img == if i == 1 { Rational::zero() } else { one.clone() }
    });
    // tr = a + c: rows 0 and 2 must sum to (1, 0, 1).
    let traces = (0..3).all(|j| {
        let s = r.get(0, j) + r.get(2, j);
        s == if j == 1 { Rational::zero() } else { one.clone() }
    });
    fixes_identity && traces
}
