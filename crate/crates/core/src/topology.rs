//! Addressing, cell maps and graph approximations `Γ_m` of the level-k gasket `SG_k`.
//!
//! Points are stored exactly: the abscissa is rational and the ordinate is a rational
//! multiple of `√3`. Internally every level-`m` vertex is a point of the triangular
//! lattice of mesh `1/k^m`, addressed by integer coordinates `(i, j)` with position
//! `i·q_1/k^m + j·q_2/k^m`.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{int, Rational};
use crate::word::Word;

const DEFAULT_CELL_BUDGET: usize = 200_000;
const DEFAULT_WORD_BUDGET: usize = 2_000_000;

/// Exact point `(x, y_sqrt3·√3)` of the plane.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub x: Rational,
    pub y_sqrt3: Rational,
}

impl Point {
    pub fn new(x: Rational, y_sqrt3: Rational) -> Self {
        Point { x, y_sqrt3 }
    }

    pub fn origin() -> Self {
        Point::new(Rational::zero(), Rational::zero())
    }

    /// The boundary vertex `q_i` of the unit triangle.
    pub fn corner(i: usize) -> Self {
        match i {
            0 => Point::origin(),
            1 => Point::new(Rational::one(), Rational::zero()),
            2 => Point::new(Rational::new(1.into(), 2.into()), Rational::new(1.into(), 2.into())),
            _ => panic!("corner index {i} out of range"),
        }
    }

    pub fn y(&self) -> f64 {
        crate::exact::to_f64(&self.y_sqrt3) * 3f64.sqrt()
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (crate::exact::to_f64(&self.x), self.y())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.y_sqrt3.is_zero() {
            write!(f, "({}, 0)", self.x)
        } else {
            write!(f, "({}, ({})√3)", self.x, self.y_sqrt3)
        }
    }
}

/// `x ↦ scale·x + translation`; every map generated by the gasket has a scalar linear part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineMap {
    pub scale: Rational,
    pub translation: Point,
}

impl AffineMap {
    pub fn identity() -> Self {
        AffineMap {
            scale: Rational::one(),
            translation: Point::origin(),
        }
    }

    pub fn apply(&self, p: &Point) -> Point {
        Point::new(
            &self.scale * &p.x + &self.translation.x,
            &self.scale * &p.y_sqrt3 + &self.translation.y_sqrt3,
        )
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        AffineMap {
            scale: &self.scale * &other.scale,
            translation: self.apply(&other.translation),
        }
    }
}

/// Parameters of `SG_k`: the `d = k(k+1)/2` contractions `F_i(x) = x/k + b_i`.
///
/// Cells are enumerated row by row from the bottom, left to right, so cell `0`
/// contains `q_0`, cell `k-1` contains `q_1` and cell `d-1` contains `q_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GasketParams {
    pub k: u32,
    pub d: usize,
    /// Lattice offsets `(col, row)` of the cells, in units of `1/k`.
    pub offsets: Vec<(u64, u64)>,
    pub translations: Vec<Point>,
    pub hausdorff_dim: f64,
    /// Largest graph level `m` that [`build_level_graph`] will construct.
    pub graph_cap: usize,
    /// Largest word length enumerated exhaustively.
    pub word_cap: usize,
}

impl GasketParams {
    pub fn new(k: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::domain(format!("level k must be at least 2, got {k}")));
        }
        let d = (k as usize) * (k as usize + 1) / 2;
        let kq = int(k as i64);
        let mut offsets = Vec::with_capacity(d);
        let mut translations = Vec::with_capacity(d);
        for row in 0..k as u64 {
            for col in 0..(k as u64 - row) {
                offsets.push((col, row));
                let x = (int(col as i64) + Rational::new(BigInt::from(row), 2.into())) / &kq;
                let y3 = Rational::new(BigInt::from(row), 2.into()) / &kq;
                translations.push(Point::new(x, y3));
            }
        }
        let kf = k as f64;
        let hausdorff_dim = 1.0 + ((kf + 1.0).ln() - 2f64.ln()) / kf.ln();
        let graph_cap = match k {
            2 => 10,
            3 => 6,
            _ => budget_depth(d, DEFAULT_CELL_BUDGET),
        };
        Ok(GasketParams {
            k,
            d,
            offsets,
            translations,
            hausdorff_dim,
            graph_cap,
            word_cap: budget_depth(d, DEFAULT_WORD_BUDGET),
        })
    }

    pub fn with_graph_cap(mut self, cap: usize) -> Self {
        self.graph_cap = cap;
        self
    }

    pub fn with_word_cap(mut self, cap: usize) -> Self {
        self.word_cap = cap;
        self
    }

    pub fn check_word_depth(&self, m: usize) -> Result<()> {
        if m > self.word_cap {
            return Err(Error::DepthCap {
                k: self.k,
                requested: m,
                cap: self.word_cap,
            });
        }
        Ok(())
    }

    pub fn cell_map(&self, n: usize) -> AffineMap {
        AffineMap {
            scale: Rational::new(1.into(), BigInt::from(self.k)),
            translation: self.translations[n].clone(),
        }
    }

    /// Index of the cell obtained by rotating cell `n` through `2π/3` about the centroid,
    /// the rotation sending `q_0 → q_1 → q_2 → q_0`.
    pub fn rotate_cell(&self, n: usize) -> usize {
        let (c, r) = self.offsets[n];
        let k = self.k as u64;
        // F_{ρn}(q_0) = ρ(F_n(q_2)); ρ acts on lattice coordinates as (i, j) ↦ (k - i - j, i).
        self.cell_at((k - c - r - 1, c))
    }

    /// The rotation-invariant middle cell, present exactly when `k ≡ 1 (mod 3)`.
    pub fn middle_cell(&self) -> Option<usize> {
        (0..self.d).find(|&n| n == self.rotate_cell(n))
    }

    /// Cell order grouping rotation orbits: the corner cells `0, ρ0, ρ²0` first, then each
    /// remaining orbit starting from its member farthest from `q_0`, followed by its
    /// rotations. Entry `p` of the result is the row-major index of grouped cell `p`.
    pub fn rotation_grouped_order(&self) -> Vec<usize> {
        let mut seen = vec![false; self.d];
        let mut order = Vec::with_capacity(self.d);
        let push_orbit = |start: usize, order: &mut Vec<usize>, seen: &mut Vec<bool>| {
            let mut n = start;
            while !seen[n] {
                seen[n] = true;
                order.push(n);
                n = self.rotate_cell(n);
            }
        };
        push_orbit(0, &mut order, &mut seen);
        // Remaining cells by decreasing distance of the centroid from q_0.
        let mut rest: Vec<usize> = (0..self.d).filter(|&n| !seen[n]).collect();
        let dist2 = |n: usize| {
            // Centroid in lattice units times 3: (3c + 1, 3r + 1); |x|² ∝ i² + ij + j².
            let (c, r) = self.offsets[n];
            let (i, j) = (3 * c + 1, 3 * r + 1);
            i * i + i * j + j * j
        };
        rest.sort_by(|&a, &b| dist2(b).cmp(&dist2(a)).then(a.cmp(&b)));
        for n in rest {
            if !seen[n] {
                push_orbit(n, &mut order, &mut seen);
            }
        }
        order
    }

    fn cell_at(&self, offset: (u64, u64)) -> usize {
        self.offsets
            .iter()
            .position(|&o| o == offset)
            .expect("rotated cell offset is always a cell")
    }
}

fn budget_depth(d: usize, budget: usize) -> usize {
    let mut m = 0;
    let mut count = 1usize;
    while count.saturating_mul(d) <= budget {
        count *= d;
        m += 1;
    }
    m
}

/// The point `F_w(q_corner)`, written `"<word>:<corner>"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VertexAddress {
    pub word: Word,
    pub corner: usize,
}

impl VertexAddress {
    pub fn new(word: Word, corner: usize) -> Self {
        VertexAddress { word, corner }
    }

    pub fn parse(s: &str, d: usize) -> Result<Self> {
        let (w, c) = s
            .rsplit_once(':')
            .ok_or_else(|| Error::domain(format!("vertex address `{s}` must look like <word>:<corner>")))?;
        let corner: usize = c
            .trim()
            .parse()
            .ok()
            .filter(|&c| c < 3)
            .ok_or_else(|| Error::domain(format!("corner in `{s}` must be 0, 1 or 2")))?;
        Ok(VertexAddress {
            word: Word::parse(w, d)?,
            corner,
        })
    }

    pub fn format(&self, d: usize) -> String {
        format!("{}:{}", self.word.format(d), self.corner)
    }

    pub fn point(&self, params: &GasketParams) -> Result<Point> {
        Ok(affine_map_of_word(params, &self.word)?.apply(&Point::corner(self.corner)))
    }

    /// Vertex index in `g`, which must have level at least `|word|`.
    pub fn resolve(&self, g: &LevelGraph) -> Result<usize> {
        if self.word.len() > g.level {
            return Err(Error::domain(format!(
                "vertex address has level {} beyond the graph level {}",
                self.word.len(),
                g.level
            )));
        }
        let p = self.point(&GasketParams::new(g.k)?)?;
        g.find_point(&p)
            .ok_or_else(|| Error::domain(format!("point {p} is not a vertex of the graph")))
    }
}

pub fn gasket_params(k: u32) -> Result<GasketParams> {
    GasketParams::new(k)
}

/// `F_w = F_{w_1} ∘ ⋯ ∘ F_{w_m}`.
pub fn affine_map_of_word(params: &GasketParams, w: &Word) -> Result<AffineMap> {
    w.validate(params.d)?;
    Ok(w.symbols()
        .iter()
        .fold(AffineMap::identity(), |acc, &s| acc.compose(&params.cell_map(s))))
}

/// Closed-form `|V_m| = (d^m (k+4) + 2(k+1)) / (k+2)`.
pub fn vertex_census(params: &GasketParams, m: usize) -> BigInt {
    let k = BigInt::from(params.k);
    let dm = num_traits::pow(BigInt::from(params.d), m);
    (dm * (&k + 4) + (&k + 1) * 2) / (&k + 2)
}

/// The graph `Γ_m`.
///
/// Vertex indices are nested across levels: the vertices of `V_j` carry the same indices
/// `0..|V_j|` at every level `m ≥ j`, with `q_0, q_1, q_2` at `0, 1, 2`.
#[derive(Debug, Clone)]
pub struct LevelGraph {
    pub k: u32,
    pub d: usize,
    pub level: usize,
    lattice: Vec<(u64, u64)>,
    adjacency: Vec<Vec<usize>>,
    /// Vertex triples `(F_w(q_0), F_w(q_1), F_w(q_2))` indexed by the rank of `w`.
    cells: Vec<[usize; 3]>,
    origins: Vec<(u64, u64)>,
    index: HashMap<(u64, u64), usize>,
}

impl LevelGraph {
    fn base(params: &GasketParams) -> Self {
        let lattice = vec![(0, 0), (1, 0), (0, 1)];
        let index = lattice.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        LevelGraph {
            k: params.k,
            d: params.d,
            level: 0,
            lattice,
            adjacency: vec![vec![1, 2], vec![0, 2], vec![0, 1]],
            cells: vec![[0, 1, 2]],
            origins: vec![(0, 0)],
            index,
        }
    }

    fn refine(&self, params: &GasketParams) -> Self {
        let k = params.k as u64;
        let mut lattice: Vec<(u64, u64)> = self.lattice.iter().map(|&(i, j)| (i * k, j * k)).collect();
        let mut index: HashMap<(u64, u64), usize> = lattice.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let ncells = self.cells.len() * params.d;
        let mut cells = Vec::with_capacity(ncells);
        let mut origins = Vec::with_capacity(ncells);
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(3 * ncells);
        for &(oi, oj) in &self.origins {
            for &(c, r) in &params.offsets {
                let o = (oi * k + c, oj * k + r);
                let corners = [o, (o.0 + 1, o.1), (o.0, o.1 + 1)];
                let tri = corners.map(|p| {
                    *index.entry(p).or_insert_with(|| {
                        lattice.push(p);
                        lattice.len() - 1
                    })
                });
                edges.push((tri[0], tri[1]));
                edges.push((tri[0], tri[2]));
                edges.push((tri[1], tri[2]));
                cells.push(tri);
                origins.push(o);
            }
        }
        let mut adjacency = vec![Vec::new(); lattice.len()];
        for (a, b) in edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for adj in adjacency.iter_mut() {
            adj.sort_unstable();
            adj.dedup();
        }
        LevelGraph {
            k: params.k,
            d: params.d,
            level: self.level + 1,
            lattice,
            adjacency,
            cells,
            origins,
            index,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.lattice.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adjacency[x].len()
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adjacency[x]
    }

    pub fn is_boundary(&self, x: usize) -> bool {
        x < 3
    }

    /// Vertices of `V_m \ V_0`.
    pub fn junctions(&self) -> std::ops::Range<usize> {
        3..self.vertex_count()
    }

    /// Unordered edges `(a, b)` with `a < b`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, adj)| adj.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn lattice_coords(&self, x: usize) -> (u64, u64) {
        self.lattice[x]
    }

    /// Mesh denominator `k^m` of the lattice coordinates.
    pub fn mesh(&self) -> u64 {
        (self.k as u64).pow(self.level as u32)
    }

    pub fn vertex_at(&self, lattice: (u64, u64)) -> Option<usize> {
        self.index.get(&lattice).copied()
    }

    pub fn point(&self, x: usize) -> Point {
        let (i, j) = self.lattice[x];
        let mesh = BigInt::from(self.mesh());
        let x = Rational::new(BigInt::from(2 * i + j), &mesh * 2);
        let y3 = Rational::new(BigInt::from(j), &mesh * 2);
        Point::new(x, y3)
    }

    /// Looks a point up exactly; `None` when the point is not a vertex of `V_m`.
    pub fn find_point(&self, p: &Point) -> Option<usize> {
        let mesh = BigInt::from(self.mesh());
        let j = &p.y_sqrt3 * Rational::from_integer(&mesh * 2);
        let i2 = &p.x * Rational::from_integer(&mesh * 2) - &j;
        if !j.is_integer() || !i2.is_integer() {
            return None;
        }
        let j: u64 = j.to_integer().try_into().ok()?;
        let i2: u64 = i2.to_integer().try_into().ok()?;
        if i2 % 2 != 0 {
            return None;
        }
        self.vertex_at((i2 / 2, j))
    }

    pub fn cell_vertex_triple(&self, w: &Word) -> Result<[usize; 3]> {
        if w.len() != self.level {
            return Err(Error::domain(format!(
                "word `{w}` has length {} but the graph has level {}",
                w.len(),
                self.level
            )));
        }
        w.validate(self.d)?;
        Ok(self.cells[w.rank(self.d)])
    }

    /// Level-`m` cells containing vertex `x`, with the corner of each cell at `x`.
    pub fn cells_containing(&self, x: usize) -> Vec<(Word, usize)> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(c, tri)| {
                tri.iter()
                    .position(|&v| v == x)
                    .map(|i| (Word::from_rank(c, self.level, self.d), i))
            })
            .collect()
    }

    /// For every vertex, the ranks of the level-`m` cells containing it.
    pub fn vertex_cells(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.vertex_count()];
        for (c, tri) in self.cells.iter().enumerate() {
            for &v in tri {
                inc[v].push(c);
            }
        }
        inc
    }

    pub fn is_connected(&self) -> bool {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in &self.adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == n
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            schema: 1,
            k: self.k,
            level: self.level,
            vertices: (0..self.vertex_count())
                .map(|v| {
                    let p = self.point(v);
                    VertexJson {
                        x: p.x.to_string(),
                        y_sqrt3: p.y_sqrt3.to_string(),
                        degree: self.degree(v),
                        boundary: self.is_boundary(v),
                    }
                })
                .collect(),
            edges: self.edges().map(|(a, b)| [a, b]).collect(),
            cells: self.cells.clone(),
        }
    }
}

/// JSON form of a level graph: rational coordinates as `"p/q"` strings, the ordinate
/// given by its `√3` coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct GraphJson {
    pub schema: u32,
    pub k: u32,
    pub level: usize,
    pub vertices: Vec<VertexJson>,
    pub edges: Vec<[usize; 2]>,
    pub cells: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexJson {
    pub x: String,
    pub y_sqrt3: String,
    pub degree: usize,
    pub boundary: bool,
}

fn check_graph_depth(params: &GasketParams, m: usize) -> Result<()> {
    if m > params.graph_cap {
        return Err(Error::DepthCap {
            k: params.k,
            requested: m,
            cap: params.graph_cap,
        });
    }
    Ok(())
}

pub fn build_level_graph(params: &GasketParams, m: usize) -> Result<LevelGraph> {
    check_graph_depth(params, m)?;
    let mut g = LevelGraph::base(params);
    for _ in 0..m {
        g = g.refine(params);
    }
    Ok(g)
}

/// `Γ_0, …, Γ_m` with consistent (nested) vertex indices.
pub fn build_hierarchy(params: &GasketParams, m: usize) -> Result<Vec<LevelGraph>> {
    check_graph_depth(params, m)?;
    let mut levels = vec![LevelGraph::base(params)];
    for j in 0..m {
        let next = levels[j].refine(params);
        levels.push(next);
    }
    Ok(levels)
}

pub fn cell_vertex_triple(g: &LevelGraph, w: &Word) -> Result<[usize; 3]> {
    g.cell_vertex_triple(w)
}
