//! Kusuoka measure: exact energy-measure vectors on cells, energy coordinates `A_n`,
//! cylinder measures, Radon–Nikodym approximants and decay scans.
//!
//! Three normalizations appear throughout: `ν_std = ν_0 + ν_1 + ν_2` (mass 6),
//! `ν′ = ν_std / 3` (mass 2) and `ν_prob = ν_std / 6` (mass 1).

use std::io::Write;

use nalgebra::Matrix2;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{int, powi, serialize_rational, serialize_rational_slice, vec3_sum, Mat3, QSqrt3, Rational, Vec3};
use crate::harmonic::{boundary_energy, boundary_form, HarmonicStructure};
use crate::word::Word;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureVector {
    pub word: Word,
    /// `(ν_0, ν_1, ν_2)(F_w K)` for the standard harmonic basis.
    #[serde(serialize_with = "serialize_rational_slice")]
    pub nu: Vec3,
    #[serde(serialize_with = "serialize_rational")]
    pub total_std: Rational,
    #[serde(serialize_with = "serialize_rational")]
    pub total_prime: Rational,
    #[serde(serialize_with = "serialize_rational")]
    pub prob: Rational,
}

impl MeasureVector {
    pub fn new(word: Word, nu: Vec3) -> Self {
        let total_std = vec3_sum(&nu);
        MeasureVector {
            word,
            total_prime: &total_std / int(3),
            prob: &total_std / int(6),
            total_std,
            nu,
        }
    }

    /// `R_i = ν_i / ν_std` on this cell.
    pub fn radon_nikodym(&self) -> Vec3 {
        self.nu.clone().map(|v| v / &self.total_std)
    }
}

/// `r^{-m} (E_0(B_w e_0), E_0(B_w e_1), E_0(B_w e_2))`.
pub fn energy_vector_of_restriction(bw: &Mat3, energy_scale: &Rational) -> Vec3 {
    std::array::from_fn(|j| boundary_energy(&bw.column(j)) * energy_scale)
}

pub fn energy_cell_vector(hs: &HarmonicStructure, w: &Word) -> Result<MeasureVector> {
    hs.params.check_word_depth(w.len())?;
    let bw = hs.restriction(w)?;
    let nu = energy_vector_of_restriction(&bw, &hs.energy_scale(w.len()));
    Ok(MeasureVector::new(w.clone(), nu))
}

pub fn radon_nikodym_approx(hs: &HarmonicStructure, w: &Word) -> Result<Vec3> {
    Ok(energy_cell_vector(hs, w)?.radon_nikodym())
}

/// Measure vectors of all `d^m` cells of level `m`, in lexicographic word order.
pub fn measure_table(hs: &HarmonicStructure, m: usize) -> Result<Vec<MeasureVector>> {
    hs.params.check_word_depth(m)?;
    let scale = hs.energy_scale(m);
    let d = hs.d();
    let count = d.pow(m as u32);
    Ok((0..count)
        .into_par_iter()
        .map(|rank| {
            let w = Word::from_rank(rank, m, d);
            let bw = hs.restriction(&w).expect("word symbols are in range");
            MeasureVector::new(w, energy_vector_of_restriction(&bw, &scale))
        })
        .collect())
}

/// Writes `word,nu0,nu1,nu2,prob` rows with rationals as `num/den`.
pub fn write_measure_csv<W: Write>(rows: &[MeasureVector], d: usize, out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::domain(format!("csv output failed: {e}"));
    wr.write_record(["word", "nu0", "nu1", "nu2", "prob"]).map_err(io)?;
    for r in rows {
        wr.write_record([
            r.word.format(d),
            r.nu[0].to_string(),
            r.nu[1].to_string(),
            r.nu[2].to_string(),
            r.prob.to_string(),
        ])
        .map_err(io)?;
    }
    wr.flush()
        .map_err(|e| Error::domain(format!("csv output failed: {e}")))?;
    Ok(())
}

/// `h ↦ h ∘ F_n` on harmonic functions modulo constants, in energy-orthonormal
/// coordinates. Entries on the diagonal are rational and off-diagonal entries are
/// rational multiples of `√3`.
pub type ExactMat2 = [[QSqrt3; 2]; 2];

pub fn exact_mat2_mul(a: &ExactMat2, b: &ExactMat2) -> ExactMat2 {
    std::array::from_fn(|i| std::array::from_fn(|j| &(&a[i][0] * &b[0][j]) + &(&a[i][1] * &b[1][j])))
}

pub fn exact_mat2_transpose(a: &ExactMat2) -> ExactMat2 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i].clone()))
}

#[derive(Debug, Clone)]
pub struct EnergyCoordinates {
    pub k: u32,
    pub r: Rational,
    /// Unnormalized basis vectors `v_1 = h_1 − h_2`, `v_2 = h_1 + h_2 − 2h_0` as boundary data;
    /// `u_i = v_i / |v_i|` with `|v_1|² = 6`, `|v_2|² = 18`.
    pub basis: [Vec3; 2],
    /// `P_n = √r A_n`, exact.
    pub p_exact: Vec<ExactMat2>,
    /// `A_n`.
    pub a: Vec<Matrix2<f64>>,
}

impl EnergyCoordinates {
    pub fn d(&self) -> usize {
        self.a.len()
    }

    /// `A_w = A_{w_m} ⋯ A_{w_1}`.
    pub fn word_matrix(&self, w: &Word) -> Matrix2<f64> {
        w.symbols().iter().fold(Matrix2::identity(), |acc, &s| self.a[s] * acc)
    }

    /// `‖A_w‖_F² / 2`, the probability-normalized cylinder measure.
    pub fn cylinder(&self, w: &Word) -> f64 {
        self.word_matrix(w).norm_squared() / 2.0
    }
}

pub fn energy_orthobasis(hs: &HarmonicStructure) -> Result<EnergyCoordinates> {
    let v1: Vec3 = [int(0), int(1), int(-1)];
    let v2: Vec3 = [int(-2), int(1), int(1)];
    let basis = [v1, v2];
    let norms_sq = [boundary_energy(&basis[0]), boundary_energy(&basis[1])];
    debug_assert_eq!(norms_sq, [int(6), int(18)]);
    debug_assert!(boundary_form(&basis[0], &basis[1]).is_zero());
    let entry = |bn: &Mat3, i: usize, j: usize| -> QSqrt3 {
        let num = boundary_form(&bn.mul_vec(&basis[j]), &basis[i]);
        if i == j {
            QSqrt3::rational(num / &norms_sq[i])
        } else {
            // 1/(|v_1||v_2|) = 1/(6√3) = √3/18
            QSqrt3::sqrt3_multiple(num / int(18))
        }
    };
    let p_exact: Vec<ExactMat2> =
        hs.b.iter()
            .map(|bn| std::array::from_fn(|i| std::array::from_fn(|j| entry(bn, i, j))))
            .collect();

    // Σ P_n^T P_n = r I exactly.
    let mut sum: ExactMat2 = Default::default();
    for p in &p_exact {
        let t = exact_mat2_mul(&exact_mat2_transpose(p), p);
        for i in 0..2 {
            for j in 0..2 {
                sum[i][j] = &sum[i][j] + &t[i][j];
            }
        }
    }
    for (i, row) in sum.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let want = if i == j { hs.r.clone() } else { Rational::zero() };
            if *v != QSqrt3::rational(want) {
                return Err(Error::verification(
                    format!("k={} entry ({i},{j})", hs.k()),
                    "energy coordinates do not satisfy Σ A_n^T A_n = I",
                ));
            }
        }
    }

    let inv_sqrt_r = 1.0 / crate::exact::to_f64(&hs.r).sqrt();
    let a = p_exact
        .iter()
        .map(|p| Matrix2::from_fn(|i, j| p[i][j].to_f64() * inv_sqrt_r))
        .collect();
    Ok(EnergyCoordinates {
        k: hs.k(),
        r: hs.r.clone(),
        basis,
        p_exact,
        a,
    })
}

pub fn kusuoka_cylinder(ec: &EnergyCoordinates, w: &Word) -> Result<f64> {
    w.validate(ec.d())?;
    Ok(ec.cylinder(w))
}

/// `‖Σ_{|w|=m} A_w^T A_w − I‖_F`.
pub fn partition_identity_check(ec: &EnergyCoordinates, m: usize) -> f64 {
    fn walk(ec: &EnergyCoordinates, aw: Matrix2<f64>, depth: usize, acc: &mut Matrix2<f64>) {
        if depth == 0 {
            *acc += aw.transpose() * aw;
            return;
        }
        for a in &ec.a {
            walk(ec, a * aw, depth - 1, acc);
        }
    }
    let mut acc = Matrix2::zeros();
    walk(ec, Matrix2::identity(), m, &mut acc);
    (acc - Matrix2::identity()).norm()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRow {
    pub m: usize,
    /// `max_{|w|=m} ν_prob(F_w K)`.
    #[serde(serialize_with = "serialize_rational")]
    pub max_prob: Rational,
    /// `max_prob · r^{-m}`; `(5/3)^m` for `k = 2`.
    #[serde(serialize_with = "serialize_rational")]
    pub scaled: Rational,
    /// First maximizing word in lexicographic order.
    pub argmax: Word,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayScan {
    pub k: u32,
    /// The decay claim is made for the classical gasket only.
    pub exploratory: bool,
    pub rows: Vec<DecayRow>,
}

impl DecayScan {
    /// `sup_m` of the scaled column, an empirical decay constant.
    pub fn empirical_constant(&self) -> Option<&Rational> {
        self.rows.iter().map(|r| &r.scaled).max()
    }
}

type IMat = [[i128; 3]; 3];

fn imat_mul(a: &IMat, b: &IMat) -> Option<IMat> {
    let mut out = [[0i128; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0i128;
            for l in 0..3 {
                s = s.checked_add(a[i][l].checked_mul(b[l][j])?)?;
            }
            out[i][j] = s;
        }
    }
    Some(out)
}

/// `Σ_j E_0(column j)` for an integer matrix.
fn imat_energy(b: &IMat) -> Option<i128> {
    let mut total = 0i128;
    for j in 0..3 {
        for (x, y) in [(0, 1), (0, 2), (1, 2)] {
            let diff = b[x][j].checked_sub(b[y][j])?;
            total = total.checked_add(diff.checked_mul(diff)?)?;
        }
    }
    Some(total)
}

#[derive(Clone, Copy)]
struct Best {
    value: i128,
    rank: usize,
}

fn better(a: Best, b: Best) -> Best {
    if b.value > a.value || (b.value == a.value && b.rank < a.rank) {
        b
    } else {
        a
    }
}

/// Exhaustive scan of `max_{|w|=m} ν_prob(F_w K)` for `m = 1..=m_max`.
///
/// Uses integer-scaled restriction matrices `D·B_n` in `i128`, with checked arithmetic.
pub fn decay_scan(hs: &HarmonicStructure, m_max: usize) -> Result<DecayScan> {
    hs.params.check_word_depth(m_max)?;
    let d = hs.d();
    let den =
        hs.b.iter()
            .flat_map(|b| b.0.iter().flatten())
            .fold(num_bigint::BigInt::one(), |acc, q| {
                num_integer::Integer::lcm(&acc, q.denom())
            });
    let to_i = |q: &Rational| -> Result<i128> {
        let v = q * Rational::from_integer(den.clone());
        i128::try_from(v.to_integer()).map_err(|_| Error::Overflow("decay scan scaling"))
    };
    let bint: Vec<IMat> =
        hs.b.iter()
            .map(|b| {
                let mut m = [[0i128; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        m[i][j] = to_i(&b.0[i][j])?;
                    }
                }
                Ok(m)
            })
            .collect::<Result<_>>()?;

    fn dfs(bint: &[IMat], bw: &IMat, rank: usize, depth: usize, m_max: usize, best: &mut [Best]) -> Option<()> {
        if depth > 0 {
            let cand = Best {
                value: imat_energy(bw)?,
                rank,
            };
            best[depth - 1] = better(best[depth - 1], cand);
        }
        if depth == m_max {
            return Some(());
        }
        for (s, bs) in bint.iter().enumerate() {
            let next = imat_mul(bs, bw)?;
            dfs(bint, &next, rank * bint.len() + s, depth + 1, m_max, best)?;
        }
        Some(())
    }

    let empty = Best {
        value: -1,
        rank: usize::MAX,
    };
    let best = if m_max == 0 {
        Vec::new()
    } else {
        let partial: Vec<Option<Vec<Best>>> = (0..d)
            .into_par_iter()
            .map(|s| {
                let mut best = vec![empty; m_max];
                dfs(&bint, &bint[s], s, 1, m_max, &mut best)?;
                Some(best)
            })
            .collect();
        let mut best = vec![empty; m_max];
        for p in partial {
            let p = p.ok_or(Error::Overflow("decay scan"))?;
            for (b, c) in best.iter_mut().zip(p) {
                *b = better(*b, c);
            }
        }
        best
    };

    let den_q = Rational::from_integer(den);
    let rows = best
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let m = i + 1;
            // ν_prob = r^{-m} T / (6 D^{2m})
            let raw = Rational::from_integer(b.value.into()) / (int(6) * powi(&den_q, 2 * m as i32));
            let max_prob = &raw * hs.energy_scale(m);
            let scaled = &max_prob * hs.energy_scale(m);
            DecayRow {
                m,
                max_prob,
                scaled,
                argmax: Word::from_rank(b.rank, m, d),
            }
        })
        .collect();
    Ok(DecayScan {
        k: hs.k(),
        exploratory: hs.k() != 2,
        rows,
    })
}
