//! Harmonic structure of `SG_k`: Dirichlet solves on `Γ_m`, the extension tensor
//! `p_{ni}^j`, and the renormalization constant `r_k` computed four independent ways.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{int, powi, unit3, vec3_sum, Mat3, Rational, Vec3};
use crate::linalg::{schur_complement, solve, DenseMatrix, Scalar};
use crate::topology::{build_hierarchy, build_level_graph, GasketParams, LevelGraph};
use crate::word::Word;

/// Solves `Σ_{y∼x} (u(y) − u(x)) = rhs(x)` at every vertex not in `fixed`, with `u`
/// prescribed on `fixed`.
pub fn solve_graph_system<T: Scalar>(
    g: &LevelGraph,
    fixed: &BTreeMap<usize, T>,
    rhs: impl Fn(usize) -> T,
) -> Result<Vec<T>> {
    if fixed.is_empty() {
        return Err(Error::domain("boundary set must be nonempty"));
    }
    if let Some((&v, _)) = fixed.iter().find(|(&v, _)| v >= g.vertex_count()) {
        return Err(Error::domain(format!("boundary vertex {v} is not in the graph")));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    solve_adjacency(g.vertex_count(), |x| g.neighbors(x), fixed, rhs)
}

fn solve_adjacency<'a, T: Scalar>(
    n: usize,
    neighbors: impl Fn(usize) -> &'a [usize],
    fixed: &BTreeMap<usize, T>,
    rhs: impl Fn(usize) -> T,
) -> Result<Vec<T>> {
    let mut slot = vec![usize::MAX; n];
    let free: Vec<usize> = (0..n).filter(|v| !fixed.contains_key(v)).collect();
    if free.len() > T::SOLVE_CAP {
        return Err(Error::TooLarge {
            unknowns: free.len(),
            cap: T::SOLVE_CAP,
        });
    }
    for (i, &v) in free.iter().enumerate() {
        slot[v] = i;
    }
    let mut a = DenseMatrix::<T>::zeros(free.len(), free.len());
    let mut b = DenseMatrix::<T>::zeros(free.len(), 1);
    for (i, &x) in free.iter().enumerate() {
        // deg(x) u(x) − Σ_{free y} u(y) = Σ_{fixed y} u(y) − rhs(x)
        let nbrs = neighbors(x);
        a.set(i, i, T::from_rational(&int(nbrs.len() as i64)));
        let mut acc = T::zero() - rhs(x);
        for &y in nbrs {
            match fixed.get(&y) {
                Some(val) => acc = acc + val.clone(),
                None => a.add_to(i, slot[y], -T::one()),
            }
        }
        b.set(i, 0, acc);
    }
    let sol = if free.is_empty() {
        DenseMatrix::zeros(0, 1)
    } else {
        solve(&a, &b)?
    };
    Ok((0..n)
        .map(|v| match fixed.get(&v) {
            Some(val) => val.clone(),
            None => sol.get(slot[v], 0).clone(),
        })
        .collect())
}

/// Graph-harmonic function on `g` with the given boundary values (exact).
pub fn solve_dirichlet(g: &LevelGraph, boundary_values: &BTreeMap<usize, Rational>) -> Result<Vec<Rational>> {
    solve_graph_system(g, boundary_values, |_| Rational::zero())
}

pub fn boundary_map(values: &Vec3) -> BTreeMap<usize, Rational> {
    values.iter().cloned().enumerate().collect()
}

/// `Σ_{x∼y} (u(x) − u(y))²` over the edges of `g`.
pub fn raw_energy<T: Scalar>(g: &LevelGraph, u: &[T]) -> T {
    g.edges().fold(T::zero(), |acc, (a, b)| {
        let diff = u[a].clone() - u[b].clone();
        acc + diff.clone() * diff
    })
}

/// The `Γ_0` energy `E_0(h) = Σ_{i<j} (h_i − h_j)²` of boundary data.
pub fn boundary_energy(h: &Vec3) -> Rational {
    let d01 = &h[0] - &h[1];
    let d02 = &h[0] - &h[2];
    let d12 = &h[1] - &h[2];
    &d01 * &d01 + &d02 * &d02 + &d12 * &d12
}

/// Bilinear form `E_0(f, g)` of the unit-conductance triangle.
pub fn boundary_form(f: &Vec3, g: &Vec3) -> Rational {
    let pairs = [(0, 1), (0, 2), (1, 2)];
    pairs
        .iter()
        .fold(Rational::zero(), |acc, &(a, b)| acc + (&f[a] - &f[b]) * (&g[a] - &g[b]))
}

/// The exact harmonic structure of `SG_k`.
#[derive(Debug, Clone)]
pub struct HarmonicStructure {
    pub params: GasketParams,
    /// Renormalization constant `r_k`.
    pub r: Rational,
    /// `p[n][i][j] = h_j(F_n(q_i))`.
    pub p: Vec<[[Rational; 3]; 3]>,
    /// Restriction matrices: `(B_n h)(q_i) = h(F_n(q_i))` for boundary data `h`.
    pub b: Vec<Mat3>,
    /// Gram matrix of `E_0` on boundary data.
    pub gram0: Mat3,
}

impl HarmonicStructure {
    pub fn new(params: &GasketParams) -> Result<Self> {
        extension_tensor(params)
    }

    pub fn k(&self) -> u32 {
        self.params.k
    }

    pub fn d(&self) -> usize {
        self.params.d
    }

    /// `B_w = B_{w_m} ⋯ B_{w_1}`, the boundary data of `h ∘ F_w` is `B_w h`.
    pub fn restriction(&self, w: &Word) -> Result<Mat3> {
        w.validate(self.d())?;
        Ok(w.symbols().iter().fold(Mat3::identity(), |acc, &s| self.b[s].mul(&acc)))
    }

    /// `r^{-m}`.
    pub fn energy_scale(&self, m: usize) -> Rational {
        powi(&self.r, -(m as i32))
    }

    /// Renormalized level energy `r^{-m} Σ_{x∼y} (u(x) − u(y))²`.
    pub fn renormalized_energy(&self, g: &LevelGraph, u: &[Rational]) -> Rational {
        raw_energy(g, u) * self.energy_scale(g.level)
    }
}

/// Builds `p_{ni}^j` from three Dirichlet solves on `Γ_1`, one per boundary basis vector.
pub fn extension_tensor(params: &GasketParams) -> Result<HarmonicStructure> {
    let g = build_level_graph(params, 1)?;
    let solutions: Vec<Vec<Rational>> = (0..3)
        .map(|j| solve_dirichlet(&g, &boundary_map(&unit3(j))))
        .collect::<Result<_>>()?;
    let p: Vec<[[Rational; 3]; 3]> = g
        .cells()
        .iter()
        .map(|tri| std::array::from_fn(|i| std::array::from_fn(|j| solutions[j][tri[i]].clone())))
        .collect();
    for (n, pn) in p.iter().enumerate() {
        for (i, row) in pn.iter().enumerate() {
            if vec3_sum(row) != Rational::one() || row.iter().any(|q| q < &Rational::zero()) {
                return Err(Error::verification(
                    format!("cell {n}, vertex {i}"),
                    "extension row is not a probability vector",
                ));
            }
        }
    }
    let b = p.iter().map(|pn| Mat3(pn.clone())).collect();
    let r = energy_ratio_on(&g, &unit3(0))?;
    Ok(HarmonicStructure {
        params: params.clone(),
        r,
        p,
        b,
        gram0: Mat3::from_ints([[2, -1, -1], [-1, 2, -1], [-1, -1, 2]], 1),
    })
}

/// Independent routes to `r_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenormMethod {
    /// `E_1^raw(h̃) / E_0^raw(h)` for the harmonic extension `h̃` of `h`.
    EnergyRatio,
    /// `p_{xq_1} + p_{xq_2}` at `x = F_0(q_1)`: the second eigenvalue of the corner-cell
    /// extension matrix.
    CornerEigenvalue,
    /// `2 / (3 R(q_1, q_2))` with `R` the effective resistance of `Γ_1`.
    Resistance,
    /// `2d / H(q_1, q_2)` with `H` the expected hitting time on `Γ_1`.
    HittingTime,
}

impl RenormMethod {
    pub const ALL: [RenormMethod; 4] = [
        RenormMethod::EnergyRatio,
        RenormMethod::CornerEigenvalue,
        RenormMethod::Resistance,
        RenormMethod::HittingTime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RenormMethod::EnergyRatio => "energy-ratio",
            RenormMethod::CornerEigenvalue => "corner-eigenvalue",
            RenormMethod::Resistance => "resistance",
            RenormMethod::HittingTime => "hitting-time",
        }
    }
}

impl fmt::Display for RenormMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RenormMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RenormMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

pub fn renormalization_constant(params: &GasketParams, method: RenormMethod) -> Result<Rational> {
    let g = build_level_graph(params, 1)?;
    match method {
        RenormMethod::EnergyRatio => energy_ratio_on(&g, &unit3(0)),
        RenormMethod::CornerEigenvalue => Ok(corner_eigenvalues_on(&g)?.0),
        RenormMethod::Resistance => {
            let res = effective_resistance(&g, 1, 2)?;
            Ok(int(2) / (int(3) * res))
        }
        RenormMethod::HittingTime => {
            let h = hitting_time_on(&g, 1, 2)?;
            Ok(int(2 * params.d as i64) / h)
        }
    }
}

/// `E_1^raw(h̃) / E_0^raw(h)` for non-constant boundary data `h`.
pub fn energy_ratio(params: &GasketParams, boundary: &Vec3) -> Result<Rational> {
    let g = build_level_graph(params, 1)?;
    energy_ratio_on(&g, boundary)
}

fn energy_ratio_on(g1: &LevelGraph, boundary: &Vec3) -> Result<Rational> {
    let e0 = boundary_energy(boundary);
    if e0.is_zero() {
        return Err(Error::domain("energy ratio needs non-constant boundary data"));
    }
    let ext = solve_dirichlet(g1, &boundary_map(boundary))?;
    Ok(raw_energy(g1, &ext) / e0)
}

/// Eigenvalues `(p_{xq_1} + p_{xq_2}, p_{xq_1} − p_{xq_2})` of the corner-cell extension
/// matrix, besides the eigenvalue `1` of the constants.
pub fn corner_eigenvalues(params: &GasketParams) -> Result<(Rational, Rational)> {
    let g = build_level_graph(params, 1)?;
    corner_eigenvalues_on(&g)
}

fn corner_eigenvalues_on(g1: &LevelGraph) -> Result<(Rational, Rational)> {
    let x = g1.cells()[0][1];
    let p1 = solve_dirichlet(g1, &boundary_map(&unit3(1)))?[x].clone();
    let p2 = solve_dirichlet(g1, &boundary_map(&unit3(2)))?[x].clone();
    Ok((&p1 + &p2, p1 - p2))
}

/// Effective resistance between `a` and `b` with unit resistors on every edge, via the
/// Schur complement of the graph Laplacian onto `{a, b}`.
pub fn effective_resistance(g: &LevelGraph, a: usize, b: usize) -> Result<Rational> {
    if a == b {
        return Ok(Rational::zero());
    }
    let n = g.vertex_count();
    if n > Rational::SOLVE_CAP {
        return Err(Error::TooLarge {
            unknowns: n,
            cap: Rational::SOLVE_CAP,
        });
    }
    let mut lap = DenseMatrix::<Rational>::zeros(n, n);
    for x in 0..n {
        lap.set(x, x, int(g.degree(x) as i64));
        for &y in g.neighbors(x) {
            lap.set(x, y, int(-1));
        }
    }
    let reduced = schur_complement(&lap, &[a, b])?;
    let conductance = reduced.get(0, 0).clone();
    if conductance.is_zero() {
        return Err(Error::Disconnected);
    }
    Ok(conductance.recip())
}

/// Probability that the simple random walk on `Γ_1` started at `q_0` returns to `q_0`
/// before reaching `q_1` or `q_2`.
pub fn return_probability(params: &GasketParams) -> Result<Rational> {
    let g = build_level_graph(params, 1)?;
    let absorb = solve_dirichlet(&g, &boundary_map(&unit3(0)))?;
    let nbrs = g.neighbors(0);
    let total = nbrs.iter().fold(Rational::zero(), |acc, &y| acc + &absorb[y]);
    Ok(total / int(nbrs.len() as i64))
}

/// Expected number of steps for the simple random walk on `Γ_m` from `q_1` to reach `q_2`.
pub fn expected_hitting_time(params: &GasketParams, m: usize) -> Result<Rational> {
    let g = build_level_graph(params, m)?;
    hitting_time_on(&g, 1, 2)
}

fn hitting_time_on(g: &LevelGraph, from: usize, to: usize) -> Result<Rational> {
    let fixed = BTreeMap::from([(to, Rational::zero())]);
    // t(x) = 1 + mean t(y)  ⇔  Σ_{y∼x} (t(y) − t(x)) = −deg(x)
    let t = solve_graph_system(g, &fixed, |x| int(-(g.degree(x) as i64)))?;
    Ok(t[from].clone())
}

/// Harmonic extension of boundary data to `V_m` (`m = g.level`) by iterating the
/// restriction matrices cell by cell.
pub fn extend_harmonic(hs: &HarmonicStructure, g: &LevelGraph, boundary: &Vec3) -> Vec<Rational> {
    let d = hs.d();
    let mut triples: Vec<Vec3> = vec![boundary.clone()];
    for _ in 0..g.level {
        triples = triples
            .iter()
            .flat_map(|t| hs.b.iter().map(move |bn| bn.mul_vec(t)))
            .collect();
    }
    debug_assert_eq!(triples.len(), d.pow(g.level as u32));
    let mut values = vec![Rational::zero(); g.vertex_count()];
    for (tri, vals) in g.cells().iter().zip(triples) {
        for (v, val) in tri.iter().zip(vals) {
            values[*v] = val;
        }
    }
    values
}

/// Harmonic extension of boundary data to `V_m` by solving a local Dirichlet problem in
/// every cell of every level. Independent of the restriction matrices, so it serves as an
/// oracle for [`extend_harmonic`].
pub fn extend_harmonic_by_solves(params: &GasketParams, m: usize, boundary: &Vec3) -> Result<Vec<Rational>> {
    let graphs = build_hierarchy(params, m)?;
    let d = params.d;
    let mut values: Vec<Rational> = boundary.to_vec();
    for j in 0..m {
        let (coarse, fine) = (&graphs[j], &graphs[j + 1]);
        values.resize(fine.vertex_count(), Rational::zero());
        for (c, corners) in coarse.cells().iter().enumerate() {
            let children = &fine.cells()[c * d..(c + 1) * d];
            let mut local: BTreeMap<usize, usize> = BTreeMap::new();
            for tri in children {
                for &v in tri {
                    let next = local.len();
                    local.entry(v).or_insert(next);
                }
            }
            let mut adj = vec![Vec::new(); local.len()];
            for tri in children {
                for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                    let (la, lb) = (local[&tri[a]], local[&tri[b]]);
                    adj[la].push(lb);
                    adj[lb].push(la);
                }
            }
            let fixed: BTreeMap<usize, Rational> = corners.iter().map(|&v| (local[&v], values[v].clone())).collect();
            let sol = solve_adjacency(local.len(), |x| &adj[x], &fixed, |_| Rational::zero())?;
            for (&v, &l) in &local {
                values[v] = sol[l].clone();
            }
        }
    }
    Ok(values)
}

/// Whether `u` has the mean-value property at every junction of `g`.
pub fn is_graph_harmonic(g: &LevelGraph, u: &[Rational]) -> bool {
    g.junctions().all(|x| {
        let sum = g.neighbors(x).iter().fold(Rational::zero(), |acc, &y| acc + &u[y]);
        sum == &u[x] * int(g.degree(x) as i64)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use crate::topology::gasket_params;

    fn params(k: u32) -> GasketParams {
        gasket_params(k).unwrap()
    }

    #[test]
    fn sg2_one_fifth_two_fifths_rule() {
        let p = params(2);
        let g = build_level_graph(&p, 1).unwrap();
        let u = solve_dirichlet(&g, &boundary_map(&unit3(0))).unwrap();
        let cell0 = g.cells()[0];
        assert_eq!(u[cell0[1]], rat(2, 5));
        assert_eq!(u[cell0[2]], rat(2, 5));
        // midpoint of q_1 q_2
        let opposite = g.cells()[1][2];
        assert_eq!(u[opposite], rat(1, 5));
    }

    #[test]
    fn sg3_rule_values() {
        let p = params(3);
        let g = build_level_graph(&p, 1).unwrap();
        let u = solve_dirichlet(&g, &boundary_map(&unit3(0))).unwrap();
        let cell0 = g.cells()[0];
        assert_eq!(u[cell0[1]], rat(8, 15));
        assert_eq!(u[cell0[2]], rat(8, 15));
        let at = |x: i64, y3: i64, den: i64| {
            let v = g
                .find_point(&crate::topology::Point::new(rat(x, den), rat(y3, den)))
                .unwrap();
            u[v].clone()
        };
        assert_eq!(at(2, 0, 3), rat(4, 15));
        assert_eq!(
            u[g.find_point(&crate::topology::Point::new(rat(1, 2), rat(1, 6)))
                .unwrap()],
            rat(1, 3)
        );
        // far vertices on the q_1 q_2 side
        assert_eq!(at(5, 1, 6), rat(1, 5));
    }

    #[test]
    fn constant_boundary_gives_constant() {
        let g = build_level_graph(&params(4), 1).unwrap();
        let c = rat(7, 3);
        let u = solve_dirichlet(&g, &boundary_map(&[c.clone(), c.clone(), c.clone()])).unwrap();
        assert!(u.iter().all(|v| v == &c));
    }

    #[test]
    fn extension_tensor_rows() {
        let hs = extension_tensor(&params(2)).unwrap();
        assert_eq!(hs.p[0][0], [int(1), int(0), int(0)]);
        assert_eq!(hs.p[0][1], [rat(2, 5), rat(2, 5), rat(1, 5)]);
        assert_eq!(hs.p[0][2], [rat(2, 5), rat(1, 5), rat(2, 5)]);
        let hs3 = extension_tensor(&params(3)).unwrap();
        assert_eq!(hs3.p[0][1], [rat(8, 15), rat(4, 15), rat(3, 15)]);
        for k in 2..=6 {
            let hs = extension_tensor(&params(k)).unwrap();
            assert_eq!(hs.p[0][0], [int(1), int(0), int(0)]);
        }
    }

    #[test]
    fn renormalization_known_values() {
        for (k, r) in [(2, rat(3, 5)), (3, rat(7, 15))] {
            for m in RenormMethod::ALL {
                assert_eq!(renormalization_constant(&params(k), m).unwrap(), r, "k={k} {m}");
            }
        }
        let p4 = params(4);
        let r4 = renormalization_constant(&p4, RenormMethod::EnergyRatio).unwrap();
        for m in RenormMethod::ALL {
            assert_eq!(renormalization_constant(&p4, m).unwrap(), r4);
        }
        assert!(r4 > rat(2, 12) && r4 < int(1));
    }

    #[test]
    fn method_names_parse() {
        for m in RenormMethod::ALL {
            assert_eq!(m.name().parse::<RenormMethod>().unwrap(), m);
        }
        assert_eq!(
            "spectral".parse::<RenormMethod>(),
            Err(Error::UnknownMethod("spectral".into()))
        );
    }

    #[test]
    fn return_probability_complements_r() {
        assert_eq!(return_probability(&params(2)).unwrap(), rat(2, 5));
        assert_eq!(return_probability(&params(3)).unwrap(), rat(8, 15));
        for k in 2..=6 {
            let p = params(k);
            let r = renormalization_constant(&p, RenormMethod::EnergyRatio).unwrap();
            assert_eq!(return_probability(&p).unwrap() + r, int(1));
        }
    }

    #[test]
    fn hitting_times() {
        assert_eq!(expected_hitting_time(&params(2), 0).unwrap(), int(2));
        assert_eq!(expected_hitting_time(&params(2), 1).unwrap(), int(10));
        assert_eq!(expected_hitting_time(&params(3), 1).unwrap(), rat(180, 7));
    }

    #[test]
    fn commute_time_identity() {
        // K = 2H = 2|E| R on Γ_m for the corner pair.
        for (k, m) in [(2, 1), (2, 2), (3, 1), (4, 1)] {
            let p = params(k);
            let g = build_level_graph(&p, m).unwrap();
            let h = expected_hitting_time(&p, m).unwrap();
            let r = effective_resistance(&g, 1, 2).unwrap();
            assert_eq!(h, int(g.edge_count() as i64) * r, "k={k} m={m}");
        }
    }

    #[test]
    fn extend_harmonic_matches_dirichlet_and_conserves_energy() {
        let p = params(2);
        let hs = extension_tensor(&p).unwrap();
        let g1 = build_level_graph(&p, 1).unwrap();
        let h = unit3(0);
        assert_eq!(
            extend_harmonic(&hs, &g1, &h),
            solve_dirichlet(&g1, &boundary_map(&h)).unwrap()
        );
        let g2 = build_level_graph(&p, 2).unwrap();
        let u2 = extend_harmonic(&hs, &g2, &h);
        assert!(is_graph_harmonic(&g2, &u2));
        assert_eq!(hs.renormalized_energy(&g2, &u2), int(2));
        let ones = extend_harmonic(&hs, &g2, &[int(1), int(1), int(1)]);
        assert!(ones.iter().all(|v| v == &int(1)));
    }

    #[test]
    fn local_solve_oracle_agrees() {
        for (k, m) in [(2, 3), (3, 2), (4, 2)] {
            let p = params(k);
            let hs = extension_tensor(&p).unwrap();
            let g = build_level_graph(&p, m).unwrap();
            let h = [rat(3, 7), int(-1), rat(5, 2)];
            assert_eq!(
                extend_harmonic(&hs, &g, &h),
                extend_harmonic_by_solves(&p, m, &h).unwrap()
            );
        }
    }

    #[test]
    fn disconnected_and_empty_boundary_rejected() {
        let g = build_level_graph(&params(2), 1).unwrap();
        assert!(solve_dirichlet(&g, &BTreeMap::new()).is_err());
    }
}
