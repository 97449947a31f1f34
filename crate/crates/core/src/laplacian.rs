//! Graph Laplacians on `Γ_m`, spline integrals against `μ` and `ν′`, and the pointwise
//! estimators of the standard Laplacian `Δ_μ` and the energy Laplacian `Δ_ν`.
//!
//! `Δ_ν` is taken with respect to `ν′ = ν_{h_1} + ν_{h_2}` (mass 2) for an
//! energy-orthonormal pair `h_1, h_2`, so `Δ_ν(h_1² + h_2²) = 2`. For another
//! normalization use `Δ_{cν} = c^{-1} Δ_ν`.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{int, powi, serialize_rational, unit3, Rational};
use crate::harmonic::{expected_hitting_time, extend_harmonic, solve_graph_system, HarmonicStructure};
use crate::linalg::Scalar;
use crate::measures::energy_cell_vector;
use crate::topology::{build_hierarchy, GasketParams, LevelGraph, VertexAddress};
use crate::word::Word;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    HarmonicExtension,
    ExplicitFormula,
    DiscreteSolve,
}

/// A function on `V_m`. Vertex indices are nested across levels, so the first
/// `|V_j|` values are its restriction to `V_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    pub level: usize,
    pub values: Vec<T>,
    pub provenance: Provenance,
}

impl<T: Scalar> GridFunction<T> {
    pub fn new(level: usize, values: Vec<T>, provenance: Provenance) -> Self {
        GridFunction {
            level,
            values,
            provenance,
        }
    }

    pub fn constant(g: &LevelGraph, c: T) -> Self {
        GridFunction::new(g.level, vec![c; g.vertex_count()], Provenance::ExplicitFormula)
    }

    pub fn restrict(&self, g: &LevelGraph) -> Result<GridFunction<T>> {
        if g.level > self.level {
            return Err(Error::domain(format!(
                "cannot restrict a level-{} function to level {}",
                self.level, g.level
            )));
        }
        Ok(GridFunction::new(
            g.level,
            self.values[..g.vertex_count()].to_vec(),
            self.provenance,
        ))
    }

    pub fn to_f64(&self) -> GridFunction<f64> {
        GridFunction::new(
            self.level,
            self.values.iter().map(Scalar::to_f64).collect(),
            self.provenance,
        )
    }
}

fn check_on_graph<T>(g: &LevelGraph, u: &GridFunction<T>) -> Result<()> {
    if u.values.len() < g.vertex_count() {
        return Err(Error::domain("grid function does not cover the graph"));
    }
    Ok(())
}

/// `Δ_m u(x) = (1/deg x) Σ_{y∼x} (u(y) − u(x))` at a junction `x`.
pub fn graph_laplacian_value<T: Scalar>(g: &LevelGraph, u: &GridFunction<T>, x: usize) -> Result<T> {
    check_on_graph(g, u)?;
    if x >= g.vertex_count() {
        return Err(Error::domain(format!("vertex {x} is not in the graph")));
    }
    if g.is_boundary(x) {
        return Err(Error::domain("graph Laplacian is only taken at junctions, not on V_0"));
    }
    let ux = &u.values[x];
    let sum = g
        .neighbors(x)
        .iter()
        .fold(T::zero(), |acc, &y| acc + (u.values[y].clone() - ux.clone()));
    Ok(sum / T::from_rational(&int(g.degree(x) as i64)))
}

/// `∫ ψ_x^{(m)} dμ = (1/3)(deg x / 2) d^{-m}` for the standard self-similar measure.
pub fn spline_integral_mu(params: &GasketParams, g: &LevelGraph, x: usize) -> Rational {
    let d = int(params.d as i64);
    int(g.degree(x) as i64) / int(6) * powi(&d, -(g.level as i32))
}

/// Values of the energy-orthonormal pair on `V_m`, unnormalized: `v_1 = h_1 − h_2` and
/// `v_2 = h_1 + h_2 − 2 h_0` with `E(v_1) = 6`, `E(v_2) = 18`.
fn orthogonal_pair(hs: &HarmonicStructure, g: &LevelGraph) -> [Vec<Rational>; 2] {
    [
        extend_harmonic(hs, g, &[int(0), int(1), int(-1)]),
        extend_harmonic(hs, g, &[int(-2), int(1), int(1)]),
    ]
}

/// `∫ ψ_x^{(m)} dν′ = ½ r^{-m} Σ_{y∼x} Σ_i (u_i(y) − u_i(x))²` for the orthonormal pair
/// `u_1, u_2`. Exact, and valid at every vertex of `V_m` including `V_0`, so the values
/// over `V_m` sum to `ν′(K) = 2`.
pub fn spline_integral_nu(hs: &HarmonicStructure, g: &LevelGraph, x: usize) -> Rational {
    spline_integrals_nu(hs, g).swap_remove(x)
}

/// [`spline_integral_nu`] at every vertex of `g`.
pub fn spline_integrals_nu(hs: &HarmonicStructure, g: &LevelGraph) -> Vec<Rational> {
    let [v1, v2] = orthogonal_pair(hs, g);
    let scale = hs.energy_scale(g.level) / int(2);
    (0..g.vertex_count())
        .map(|x| {
            let s = g.neighbors(x).iter().fold(Rational::zero(), |acc, &y| {
                let a = &v1[y] - &v1[x];
                let b = &v2[y] - &v2[x];
                acc + &a * &a / int(6) + &b * &b / int(18)
            });
            s * &scale
        })
        .collect()
}

/// `h_1² + h_2²` for an energy-orthonormal pair, exactly: `v_1²/6 + v_2²/18`.
pub fn kusuoka_square(hs: &HarmonicStructure, g: &LevelGraph) -> GridFunction<Rational> {
    let [v1, v2] = orthogonal_pair(hs, g);
    let values = v1
        .iter()
        .zip(&v2)
        .map(|(a, b)| a * a / int(6) + b * b / int(18))
        .collect();
    GridFunction::new(g.level, values, Provenance::ExplicitFormula)
}

/// The standard harmonic function `h_j` on `V_m`.
pub fn standard_harmonic(hs: &HarmonicStructure, g: &LevelGraph, j: usize) -> GridFunction<Rational> {
    GridFunction::new(
        g.level,
        extend_harmonic(hs, g, &unit3(j)),
        Provenance::HarmonicExtension,
    )
}

/// `h_j²` for the standard harmonic function `h_j`.
pub fn standard_harmonic_square(hs: &HarmonicStructure, g: &LevelGraph, j: usize) -> GridFunction<Rational> {
    let h = standard_harmonic(hs, g, j);
    GridFunction::new(
        g.level,
        h.values.iter().map(|v| v * v).collect(),
        Provenance::ExplicitFormula,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianMethod {
    /// `Δ_μ u(x) ≈ 6 (H/2)^m Δ_m u(x)`.
    Standard,
    /// `Δ_ν u(x) ≈ 2 Δ_m u(x) / Δ_m (h_1² + h_2²)(x)`.
    Energy,
}

impl std::str::FromStr for LaplacianMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(LaplacianMethod::Standard),
            "energy" => Ok(LaplacianMethod::Energy),
            _ => Err(Error::UnknownMethod(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplacianRow {
    pub level: usize,
    /// `Δ_m u(x)`.
    pub raw: f64,
    /// The prefactored estimate.
    pub estimate: f64,
    /// Exact value of the estimate when the input is exact.
    #[serde(serialize_with = "serialize_opt_rational")]
    pub exact: Option<Rational>,
    /// `estimate(m) − estimate(m − 1)`.
    pub difference: Option<f64>,
}

fn serialize_opt_rational<S: serde::Serializer>(q: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match q {
        Some(q) => serialize_rational(q, s),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplacianSequence {
    pub k: u32,
    pub point: String,
    pub method: LaplacianMethod,
    pub rows: Vec<LaplacianRow>,
}

impl LaplacianSequence {
    pub fn estimates(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.estimate).collect()
    }

    pub fn last(&self) -> Option<&LaplacianRow> {
        self.rows.last()
    }
}

fn junction_levels(x: &VertexAddress, u_level: usize) -> Result<usize> {
    let m0 = x.word.len();
    if m0 == 0 {
        return Err(Error::domain("points of V_0 are not junctions"));
    }
    if u_level < m0 {
        return Err(Error::domain("grid function is coarser than the junction"));
    }
    Ok(m0)
}

fn build_rows<T: Scalar>(
    graphs: &[LevelGraph],
    m0: usize,
    x: &VertexAddress,
    mut per_level: impl FnMut(&LevelGraph, usize) -> Result<(T, T)>,
) -> Result<Vec<LaplacianRow>> {
    let mut rows: Vec<LaplacianRow> = Vec::new();
    for g in &graphs[m0..] {
        let xi = x.resolve(g)?;
        let (raw, est) = per_level(g, xi)?;
        let estimate = est.to_f64();
        let difference = rows.last().map(|p| estimate - p.estimate);
        rows.push(LaplacianRow {
            level: g.level,
            raw: raw.to_f64(),
            estimate,
            exact: est.as_rational(),
            difference,
        });
    }
    Ok(rows)
}

/// `6 (H/2)^m Δ_m u(x)` for `m = |x.word| ..= u.level`, with `H = H(q_1, q_2)` on `Γ_1`.
pub fn delta_mu_estimate<T: Scalar>(
    hs: &HarmonicStructure,
    u: &GridFunction<T>,
    x: &VertexAddress,
) -> Result<LaplacianSequence> {
    let m0 = junction_levels(x, u.level)?;
    let graphs = build_hierarchy(&hs.params, u.level)?;
    let base = expected_hitting_time(&hs.params, 1)? / int(2);
    let rows = build_rows(&graphs, m0, x, |g, xi| {
        let raw = graph_laplacian_value(g, u, xi)?;
        let pref = T::from_rational(&(int(6) * powi(&base, g.level as i32)));
        Ok((raw.clone(), pref * raw))
    })?;
    Ok(LaplacianSequence {
        k: hs.k(),
        point: x.format(hs.d()),
        method: LaplacianMethod::Standard,
        rows,
    })
}

/// `2 Δ_m u(x) / Δ_m (h_1² + h_2²)(x)` for `m = |x.word| ..= u.level`.
pub fn delta_nu_estimate<T: Scalar>(
    hs: &HarmonicStructure,
    u: &GridFunction<T>,
    x: &VertexAddress,
) -> Result<LaplacianSequence> {
    let m0 = junction_levels(x, u.level)?;
    let graphs = build_hierarchy(&hs.params, u.level)?;
    let top = graphs.last().expect("hierarchy is nonempty");
    let w = kusuoka_square(hs, top);
    let w = GridFunction::new(w.level, w.values.iter().map(T::from_rational).collect(), w.provenance);
    let rows = build_rows(&graphs, m0, x, |g, xi| {
        let raw = graph_laplacian_value(g, u, xi)?;
        let den = graph_laplacian_value(g, &w, xi)?;
        if den.is_zero() {
            return Err(Error::domain(format!(
                "Δ_m(h_1² + h_2²) vanishes at level {} (it should be positive)",
                g.level
            )));
        }
        Ok((raw.clone(), T::from_rational(&int(2)) * raw / den))
    })?;
    Ok(LaplacianSequence {
        k: hs.k(),
        point: x.format(hs.d()),
        method: LaplacianMethod::Energy,
        rows,
    })
}

/// `Δ_ν u(x) − 2 Δ_m u(x) / Δ_m (h_1² + h_2²)(x)` given a reference value `Δ_ν u(x)`.
pub fn energy_estimate_remainder<T: Scalar>(
    hs: &HarmonicStructure,
    u: &GridFunction<T>,
    x: &VertexAddress,
    reference: &T,
) -> Result<T> {
    junction_levels(x, u.level)?;
    let graphs = build_hierarchy(&hs.params, u.level)?;
    let g = graphs.last().expect("hierarchy is nonempty");
    let xi = x.resolve(g)?;
    let w = kusuoka_square(hs, g);
    let w = GridFunction::new(w.level, w.values.iter().map(T::from_rational).collect(), w.provenance);
    let raw = graph_laplacian_value(g, u, xi)?;
    let den = graph_laplacian_value(g, &w, xi)?;
    Ok(reference.clone() - T::from_rational(&int(2)) * raw / den)
}

/// Cell-resolution value of `Δ_ν(h_0²) = 2 dν_{h_0}/dν′ = 6 R_0` at the junction `x`,
/// averaging `R_0` over the level-`level` cells that contain `x`.
pub fn h0_square_reference(hs: &HarmonicStructure, x: &VertexAddress, level: usize) -> Result<Rational> {
    let m0 = junction_levels(x, level)?;
    let graphs = build_hierarchy(&hs.params.clone().with_graph_cap(m0), m0)?;
    let g = &graphs[m0];
    let xi = x.resolve(g)?;
    let (mut nu0, mut total) = (Rational::zero(), Rational::zero());
    for (w0, i) in g.cells_containing(xi) {
        let cell = w0.concat(&Word::repeat(i, level - m0));
        let v = energy_cell_vector(hs, &cell)?;
        nu0 += &v.nu[0];
        total += &v.total_std;
    }
    Ok(int(6) * nu0 / total)
}

/// Solves `Δ_m u = scaling · f` at the junctions of `g`, with `u` fixed on `V_0`.
pub fn discrete_poisson_solve<T: Scalar>(
    g: &LevelGraph,
    f: &GridFunction<T>,
    scaling: &T,
    boundary: &[T; 3],
) -> Result<GridFunction<T>> {
    check_on_graph(g, f)?;
    let fixed: BTreeMap<usize, T> = boundary.iter().cloned().enumerate().collect();
    // Σ_{y∼x} (u(y) − u(x)) = deg(x) · scaling · f(x)
    let values = solve_graph_system(g, &fixed, |x| {
        T::from_rational(&int(g.degree(x) as i64)) * scaling.clone() * f.values[x].clone()
    })?;
    Ok(GridFunction::new(g.level, values, Provenance::DiscreteSolve))
}

/// The Dirichlet solution of `Δ_μ u = 1`, built as the level-`m` Poisson solve with
/// right side `1 / (6 (H/2)^m)`.
pub fn unit_poisson_solution<T: Scalar>(hs: &HarmonicStructure, m: usize) -> Result<GridFunction<T>> {
    let graphs = build_hierarchy(&hs.params, m)?;
    let g = graphs.last().expect("hierarchy is nonempty");
    let base = expected_hitting_time(&hs.params, 1)? / int(2);
    let scaling = T::from_rational(&(int(6) * powi(&base, m as i32)).recip());
    discrete_poisson_solve(
        g,
        &GridFunction::constant(g, T::one()),
        &scaling,
        &[T::zero(), T::zero(), T::zero()],
    )
}

/// Energy-Laplacian sequence of the `Δ_μ u = 1` solution at `x`. A function in both
/// Laplacian domains would have to be harmonic, so this sequence is expected to blow up
/// or collapse rather than settle; it is reported, never asserted.
pub fn poisson_energy_sequence(hs: &HarmonicStructure, x: &VertexAddress, m: usize) -> Result<LaplacianSequence> {
    let u = unit_poisson_solution::<f64>(hs, m)?;
    delta_nu_estimate(hs, &u, x)
}
