//! The matrices `M_n` carrying energy-measure vectors through the cell maps, the weights
//! `Q_j = Σ_i S_i^j R_i`, and exact cylinder-resolution checks of the self-similar
//! identities for `ν` and for the energy Laplacian.

use nalgebra::Matrix2;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{int, serialize_rational, to_f64, vec3_dot, vec3_sum, Mat3, Rational, Vec3};
use crate::harmonic::{boundary_energy, HarmonicStructure};
use crate::measures::{energy_cell_vector, EnergyCoordinates};
use crate::topology::{build_level_graph, GasketParams, VertexAddress};
use crate::word::Word;

#[derive(Debug, Clone, PartialEq)]
pub struct MMatrixFamily {
    pub k: u32,
    /// `M_n[j][i] = μ_{ji}^n`.
    pub m: Vec<Mat3>,
    /// `S[n][i] = Σ_j μ_{ji}^n`, the column sums.
    pub s: Vec<Vec3>,
}

impl MMatrixFamily {
    pub fn d(&self) -> usize {
        self.m.len()
    }

    /// `(Σ_n M_n)(1,1,1)^T`, which must be `(1,1,1)^T`.
    pub fn row_sum_vector(&self) -> Vec3 {
        let total = self.m.iter().fold(Mat3::zero(), |acc, m| acc.add(m));
        total.row_sums()
    }

    /// The family listed in rotation-grouped order: entry `p` is our `M_{order[p]}`.
    pub fn relabeled(&self, order: &[usize]) -> Vec<Mat3> {
        order.iter().map(|&n| self.m[n].clone()).collect()
    }
}

pub fn m_matrices(hs: &HarmonicStructure) -> MMatrixFamily {
    let inv_r = hs.r.recip();
    let m: Vec<Mat3> =
        hs.p.iter()
            .map(|pn| {
                Mat3::from_fn(|j, i| {
                    let (a, b, c) = (&pn[0][j], &pn[1][j], &pn[2][j]);
                    let ab = a * b;
                    let ac = a * c;
                    let bc = b * c;
                    let raw = match i {
                        0 => a * a - &ab - &ac + &bc,
                        1 => b * b - &ab + &ac - &bc,
                        _ => c * c + &ab - &ac - &bc,
                    };
                    raw * &inv_r
                })
            })
            .collect();
    let s = m.iter().map(|mn| mn.column_sums()).collect();
    MMatrixFamily { k: hs.k(), m, s }
}

/// `Q_j = Σ_i S_i^j R_i` for every cell `j`.
pub fn weights_q(mm: &MMatrixFamily, rn: &Vec3) -> Result<Vec<Rational>> {
    if vec3_sum(rn) != Rational::one() {
        return Err(Error::domain("Radon–Nikodym vector must sum to 1"));
    }
    Ok(mm.s.iter().map(|s| vec3_dot(s, rn)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub identity: &'static str,
    pub k: u32,
    pub depth: usize,
    pub checks: usize,
    /// Largest absolute deviation seen; zero whenever the identity holds exactly.
    #[serde(serialize_with = "serialize_rational")]
    pub max_deviation: Rational,
}

fn words_up_to(depth: usize, d: usize) -> Vec<Word> {
    (0..=depth).flat_map(|m| Word::all(m, d)).collect()
}

/// Checks `ν(F_i F_w K) = M_i ν(F_w K)` exactly for all `|w| ≤ depth` and all cells `i`.
pub fn verify_vector_identity(hs: &HarmonicStructure, mm: &MMatrixFamily, depth: usize) -> Result<IdentityReport> {
    hs.params.check_word_depth(depth + 1)?;
    let d = hs.d();
    let words = words_up_to(depth, d);
    let checks = words
        .par_iter()
        .map(|w| -> Result<usize> {
            let parent = energy_cell_vector(hs, w)?;
            for i in 0..d {
                let child = energy_cell_vector(hs, &w.prepend(i))?;
                if child.nu != mm.m[i].mul_vec(&parent.nu) {
                    return Err(Error::verification(
                        format!("i={i}, w={}", w.format(d)),
                        "ν(i·w) differs from M_i ν(w)",
                    ));
                }
            }
            Ok(d)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(IdentityReport {
        identity: "vector",
        k: hs.k(),
        depth,
        checks,
        max_deviation: Rational::zero(),
    })
}

/// Checks `ν_std(F_n F_u K) = Q_n(R(u)) ν_std(F_u K)` exactly for all `|u| ≤ depth`.
pub fn weighted_identity_check(hs: &HarmonicStructure, mm: &MMatrixFamily, depth: usize) -> Result<IdentityReport> {
    hs.params.check_word_depth(depth + 1)?;
    let d = hs.d();
    let words = words_up_to(depth, d);
    let checks = words
        .par_iter()
        .map(|u| -> Result<usize> {
            let cell = energy_cell_vector(hs, u)?;
            let q = weights_q(mm, &cell.radon_nikodym())?;
            for (n, qn) in q.iter().enumerate() {
                let child = energy_cell_vector(hs, &u.prepend(n))?;
                if child.total_std != qn * &cell.total_std {
                    return Err(Error::verification(
                        format!("n={n}, u={}", u.format(d)),
                        "ν(n·u) differs from Q_n(u) ν(u)",
                    ));
                }
            }
            Ok(d)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(IdentityReport {
        identity: "weighted",
        k: hs.k(),
        depth,
        checks,
        max_deviation: Rational::zero(),
    })
}

/// `Q_w` at the cell `u`, built from single-letter weights by the composition rule
/// `Q_w = Q_{w_m} · (Q_{w_{m−1}} ∘ F_{w_m}) ⋯`; telescopes to `ν_std(F_w F_u K) / ν_std(F_u K)`.
pub fn q_word_product(hs: &HarmonicStructure, mm: &MMatrixFamily, w: &Word, u: &Word) -> Result<Rational> {
    if w.is_empty() {
        return Err(Error::domain("q_word_product needs a nonempty word"));
    }
    w.validate(hs.d())?;
    let mut cell = u.clone();
    let mut product = Rational::one();
    for &s in w.symbols().iter().rev() {
        let rn = energy_cell_vector(hs, &cell)?.radon_nikodym();
        product *= vec3_dot(&mm.s[s], &rn);
        cell = cell.prepend(s);
    }
    Ok(product)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub level: usize,
    /// Pointwise energy-Laplacian estimate of `u ∘ F_j` at the junction.
    pub estimate: f64,
    /// `2 r Q_j` with `Q_j` evaluated on the level-`L` cells at the junction.
    pub reference: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub k: u32,
    pub cell: usize,
    pub point: String,
    /// Set when `cell` is the rotation-invariant middle cell, where the reference is the
    /// constant `E(h_1 ∘ F_c)`.
    pub middle_cell: bool,
    #[serde(serialize_with = "serialize_rational")]
    pub middle_constant: Rational,
    pub rows: Vec<ScalingRow>,
}

/// Compares the pointwise energy Laplacian of `u ∘ F_j` with `r Q_j (Δ_ν u) ∘ F_j` for
/// `u = h_1² + h_2²` (so `Δ_ν u = 2`) at a junction, for levels `L = |x.word| ..= max_level`.
///
/// For harmonic `g` and a level-`L` cell `c` at the junction `y` with corner `i`, the edge
/// differences `g(F_c q_a) − g(y)` are `δ_a^T P_c x_g` in energy coordinates. Both sides
/// therefore reduce to quadratic forms of `A_j A_j^T`: the estimate weighs them by
/// `Σ_c A_c^T (Σ_a δ_a δ_a^T) A_c`, the reference by `Σ_c A_c^T A_c`.
pub fn laplacian_scaling_experiment(
    hs: &HarmonicStructure,
    ec: &EnergyCoordinates,
    j: usize,
    x: &VertexAddress,
    max_level: usize,
) -> Result<ScalingReport> {
    let d = hs.d();
    if j >= d {
        return Err(Error::domain(format!("cell {j} out of range for d={d}")));
    }
    let m0 = x.word.len().max(1);
    if max_level < m0 {
        return Err(Error::domain("max level is below the level of the junction"));
    }
    hs.params.check_word_depth(max_level)?;
    let g = build_level_graph(&hs.params.clone().with_graph_cap(m0), m0)?;
    let y = x.resolve(&g)?;
    if g.is_boundary(y) {
        return Err(Error::domain(
            "the scaling experiment needs a junction, not a point of V_0",
        ));
    }
    let incident = g.cells_containing(y);

    // δ_a = u(q_a) − u(q_i) in the orthonormal energy basis.
    let unit: [[f64; 3]; 2] = std::array::from_fn(|b| {
        let norm = to_f64(&boundary_energy(&ec.basis[b])).sqrt();
        std::array::from_fn(|q| to_f64(&ec.basis[b][q]) / norm)
    });
    let delta = |i: usize, a: usize| nalgebra::Vector2::new(unit[0][a] - unit[0][i], unit[1][a] - unit[1][i]);
    let aj = ec.a[j] * ec.a[j].transpose();
    let r = to_f64(&hs.r);

    let middle = hs.params.middle_cell() == Some(j);
    let middle_constant = if middle {
        boundary_energy(&hs.b[j].column(1))
    } else {
        Rational::zero()
    };

    let rows = (m0..=max_level)
        .map(|level| {
            let mut weighted = Matrix2::zeros();
            let mut frob = Matrix2::zeros();
            for (w0, i) in &incident {
                let cell = w0.concat(&Word::repeat(*i, level - m0));
                let ac = ec.word_matrix(&cell);
                let edges: Matrix2<f64> = (0..3)
                    .filter(|&a| a != *i)
                    .map(|a| {
                        let dv = delta(*i, a);
                        dv * dv.transpose()
                    })
                    .sum();
                weighted += ac.transpose() * edges * ac;
                frob += ac.transpose() * ac;
            }
            let estimate = 2.0 * r * (weighted * aj).trace() / weighted.trace();
            let reference = if middle {
                to_f64(&middle_constant)
            } else {
                2.0 * r * (frob * aj).trace() / frob.trace()
            };
            ScalingRow {
                level,
                estimate,
                reference,
                deviation: (estimate - reference).abs(),
            }
        })
        .collect();
    Ok(ScalingReport {
        k: hs.k(),
        cell: j,
        point: x.format(d),
        middle_cell: middle,
        middle_constant,
        rows,
    })
}

/// Rotation-grouped cell order: corner cells first, then the inner
/// rotation orbit. Entry `p` is our row-major index of the grouped-order cell `p`.
pub fn grouped_cell_order(params: &GasketParams) -> Vec<usize> {
    params.rotation_grouped_order()
}

/// Constant used by the middle-cell scaling formula, `½ E(h_1 ∘ F_c)`, if a middle cell exists.
pub fn middle_cell_factor(hs: &HarmonicStructure) -> Option<Rational> {
    hs.params
        .middle_cell()
        .map(|c| boundary_energy(&hs.b[c].column(1)) / int(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use crate::measures::energy_orthobasis;
    use crate::topology::gasket_params;

    fn hs(k: u32) -> HarmonicStructure {
        HarmonicStructure::new(&gasket_params(k).unwrap()).unwrap()
    }

    #[test]
    fn sg2_m0_and_column_sums() {
        let mm = m_matrices(&hs(2));
        let expect = Mat3::from_ints([[9, 0, 0], [2, 2, -1], [2, -1, 2]], 15);
        assert_eq!(mm.m[0], expect);
        assert_eq!(mm.s[0], [rat(13, 15), rat(1, 15), rat(1, 15)]);
        let q = weights_q(&mm, &[rat(3, 5), rat(1, 5), rat(1, 5)]).unwrap();
        assert_eq!(q[0], rat(41, 75));
        let sym = weights_q(&mm, &[rat(1, 3), rat(1, 3), rat(1, 3)]).unwrap();
        assert!(sym.iter().all(|v| v == &rat(1, 3)));
        assert!(weights_q(&mm, &[rat(1, 2), rat(1, 3), rat(1, 3)]).is_err());
    }

    #[test]
    fn sg3_against_printed_family() {
        let h = hs(3);
        let mm = m_matrices(&h);
        let order = grouped_cell_order(&h.params);
        assert_eq!(order, vec![0, 2, 5, 4, 3, 1]);
        let printed = [
            [[49, 0, 0], [12, 4, -3], [12, -3, 4]],
            [[4, 12, -3], [0, 49, 0], [-3, 12, 4]],
            [[4, -3, 12], [-3, 4, 12], [0, 0, 49]],
            [[4, 0, 0], [-3, 12, 4], [-3, 4, 12]],
            [[12, -3, 4], [0, 4, 0], [4, -3, 12]],
            [[12, 4, -3], [4, 12, -3], [0, 0, 4]],
        ];
        for (p, ours) in mm.relabeled(&order).iter().enumerate() {
            assert_eq!(ours, &Mat3::from_ints(printed[p], 105), "listed M_{p}");
        }
    }

    #[test]
    fn sg3_q_weights() {
        let h = hs(3);
        let mm = m_matrices(&h);
        let order = grouped_cell_order(&h.params);
        let rn = [rat(1, 2), rat(1, 3), rat(1, 6)];
        let q = weights_q(&mm, &rn).unwrap();
        for p in 0..3 {
            assert_eq!(q[order[p]], (int(1) + int(72) * &rn[p]) / int(105));
            assert_eq!(q[order[p + 3]], (int(16) - int(18) * &rn[p]) / int(105));
        }
    }

    #[test]
    fn row_sum_eigenvector_and_covariance() {
        for k in 2..=6 {
            let h = hs(k);
            let mm = m_matrices(&h);
            assert_eq!(mm.row_sum_vector(), [int(1), int(1), int(1)], "k={k}");
            for n in 0..h.d() {
                let rn = h.params.rotate_cell(n);
                for i in 0..3 {
                    for jj in 0..3 {
                        assert_eq!(mm.m[rn].get(i, jj), mm.m[n].get((i + 2) % 3, (jj + 2) % 3));
                    }
                }
            }
        }
    }

    #[test]
    fn identities_hold() {
        for (k, depth) in [(2, 3), (3, 2), (4, 1)] {
            let h = hs(k);
            let mm = m_matrices(&h);
            let v = verify_vector_identity(&h, &mm, depth).unwrap();
            assert!(v.max_deviation.is_zero() && v.checks > 0);
            weighted_identity_check(&h, &mm, depth).unwrap();
        }
    }

    #[test]
    fn word_products_telescope() {
        let h = hs(2);
        let mm = m_matrices(&h);
        let w00 = Word::parse("00", 3).unwrap();
        assert_eq!(q_word_product(&h, &mm, &w00, &Word::empty()).unwrap(), rat(41, 225));
        for lw in 1..=2 {
            for lv in 1..=2 {
                for w in Word::all(lw, 3) {
                    for v in Word::all(lv, 3) {
                        let u = Word::parse("1", 3).unwrap();
                        let joint = q_word_product(&h, &mm, &w.concat(&v), &u).unwrap();
                        let inner = q_word_product(&h, &mm, &v, &u).unwrap();
                        let outer = q_word_product(&h, &mm, &w, &v.concat(&u)).unwrap();
                        assert_eq!(joint, inner * outer);
                    }
                }
            }
        }
        assert!(q_word_product(&h, &mm, &Word::empty(), &Word::empty()).is_err());
    }

    #[test]
    fn middle_cell_constant() {
        let h = hs(4);
        let mm = m_matrices(&h);
        let c = h.params.middle_cell().unwrap();
        let s = &mm.s[c];
        assert!(s[0] == s[1] && s[1] == s[2]);
        assert_eq!(middle_cell_factor(&h).unwrap(), &h.r * &s[0]);
        let ec = energy_orthobasis(&h).unwrap();
        let x = VertexAddress::parse("0:1", 10).unwrap();
        let rep = laplacian_scaling_experiment(&h, &ec, c, &x, 4).unwrap();
        assert!(rep.middle_cell);
        for row in &rep.rows {
            assert!(row.deviation < 1e-12, "{row:?}");
        }
        assert!(middle_cell_factor(&hs(3)).is_none());
    }

    #[test]
    fn scaling_experiment_converges() {
        let h = hs(2);
        let ec = energy_orthobasis(&h).unwrap();
        let x = VertexAddress::parse("0:1", 3).unwrap();
        let rep = laplacian_scaling_experiment(&h, &ec, 0, &x, 12).unwrap();
        let first = rep.rows.first().unwrap().deviation;
        let last = rep.rows.last().unwrap().deviation;
        assert!(last < first && last < 1e-3, "{first} {last}");
        assert!(laplacian_scaling_experiment(&h, &ec, 3, &x, 4).is_err());
        let corner = VertexAddress::parse("0:0", 3).unwrap();
        assert!(laplacian_scaling_experiment(&h, &ec, 0, &corner, 4).is_err());
    }
}
