//! Invariant suites run by `kusuoka verify`.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{int, rat, to_f64, Rational};
use crate::harmonic::{
    effective_resistance, energy_ratio, expected_hitting_time, renormalization_constant, return_probability,
    HarmonicStructure, RenormMethod,
};
use crate::laplacian::{
    graph_laplacian_value, kusuoka_square, spline_integral_mu, spline_integrals_nu, standard_harmonic,
};
use crate::measures::{decay_scan, energy_cell_vector, energy_orthobasis, measure_table, partition_identity_check};
use crate::mixing::{
    correlation_exact, mixing_rate_fit, trace_preservation_defect, transfer_operator_matrix, CorrelationMethod,
};
use crate::selfsim::{m_matrices, verify_vector_identity, weighted_identity_check};
use crate::topology::{build_level_graph, vertex_census, GasketParams};
use crate::word::Word;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Harmonic,
    Selfsim,
    Measures,
    Laplacian,
    Mixing,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = ["all", "harmonic", "selfsim", "measures", "laplacian", "mixing"];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "harmonic" => Suite::Harmonic,
            "selfsim" => Suite::Selfsim,
            "measures" => Suite::Measures,
            "laplacian" => Suite::Laplacian,
            "mixing" => Suite::Mixing,
            _ => return Err(Error::UnknownMethod(s.to_string())),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = [
            Suite::All,
            Suite::Harmonic,
            Suite::Selfsim,
            Suite::Measures,
            Suite::Laplacian,
            Suite::Mixing,
        ]
        .iter()
        .position(|s| s == self)
        .expect("listed");
        f.write_str(Suite::NAMES[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub k: u32,
    pub depth: usize,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Recorder {
    suite: &'static str,
    checks: Vec<Check>,
}

impl Recorder {
    fn new(suite: &'static str) -> Self {
        Recorder {
            suite,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            suite: self.suite,
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    /// Records an `Ok` as a pass and an error (with its witness) as a failure.
    fn result<T>(&mut self, name: impl Into<String>, r: Result<T>, detail: impl FnOnce(&T) -> String) {
        match r {
            Ok(v) => {
                let d = detail(&v);
                self.check(name, true, d)
            }
            Err(e) => self.check(name, false, e.to_string()),
        }
    }
}

pub fn run_suite(params: &GasketParams, suite: Suite, depth: usize, seed: u64) -> Result<VerifyReport> {
    let hs = HarmonicStructure::new(params)?;
    let mut checks = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Harmonic {
        checks.extend(harmonic_suite(&hs, seed)?);
    }
    if all || suite == Suite::Measures {
        checks.extend(measures_suite(&hs, depth)?);
    }
    if all || suite == Suite::Selfsim {
        checks.extend(selfsim_suite(&hs, depth));
    }
    if all || suite == Suite::Laplacian {
        checks.extend(laplacian_suite(&hs, depth)?);
    }
    if all || suite == Suite::Mixing {
        checks.extend(mixing_suite(&hs, seed)?);
    }
    Ok(VerifyReport {
        k: params.k,
        depth,
        checks,
    })
}

fn harmonic_suite(hs: &HarmonicStructure, seed: u64) -> Result<Vec<Check>> {
    let p = &hs.params;
    let mut rec = Recorder::new("harmonic");
    let values: Vec<(RenormMethod, Rational)> = RenormMethod::ALL
        .iter()
        .map(|&m| Ok((m, renormalization_constant(p, m)?)))
        .collect::<Result<_>>()?;
    let agree = values.iter().all(|(_, v)| v == &hs.r);
    let listing: Vec<String> = values.iter().map(|(m, v)| format!("{m}={v}")).collect();
    rec.check("renormalization-four-way", agree, listing.join(" "));
    let bound = rat(2, 3 * p.k as i64);
    rec.check(
        "lower-bound",
        hs.r > bound && hs.r < int(1),
        format!("r={} > {bound}", hs.r),
    );
    let pk = return_probability(p)?;
    rec.check("return-probability", &pk + &hs.r == int(1), format!("p={pk}"));
    let rows_ok = hs.p.iter().flatten().all(|row| {
        row.iter().fold(Rational::zero(), |a, b| a + b) == Rational::one() && row.iter().all(|q| q >= &Rational::zero())
    });
    rec.check("tensor-row-stochastic", rows_ok, "");
    let covariant = (0..p.d).all(|n| {
        let rn = p.rotate_cell(n);
        (0..3).all(|i| (0..3).all(|j| hs.p[rn][(i + 1) % 3][(j + 1) % 3] == hs.p[n][i][j]))
    });
    rec.check("tensor-rotation", covariant, "");
    let g1 = build_level_graph(p, 1)?;
    let h = expected_hitting_time(p, 1)?;
    let res = effective_resistance(&g1, 1, 2)?;
    rec.check(
        "commute-time",
        h == int(g1.edge_count() as i64) * &res,
        format!("H={h} R={res}"),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratio_ok = true;
    for _ in 0..20 {
        let b: [Rational; 3] = std::array::from_fn(|_| rat(rng.random_range(-50..=50), rng.random_range(1..=20)));
        match energy_ratio(p, &b) {
            Ok(v) => ratio_ok &= v == hs.r,
            Err(Error::Domain(_)) => {}
            Err(e) => return Err(e),
        }
    }
    rec.check(
        "energy-ratio-boundary-independent",
        ratio_ok,
        "20 seeded boundary triples",
    );
    Ok(rec.checks)
}

fn measures_suite(hs: &HarmonicStructure, depth: usize) -> Result<Vec<Check>> {
    let d = hs.d();
    let mut rec = Recorder::new("measures");
    let ec = energy_orthobasis(hs)?;
    let mut additive = true;
    let mut max_dev = 0f64;
    for m in 0..=depth {
        let parents = measure_table(hs, m)?;
        let children = measure_table(hs, m + 1)?;
        for (i, parent) in parents.iter().enumerate() {
            let mut sum = [Rational::zero(), Rational::zero(), Rational::zero()];
            for c in &children[i * d..(i + 1) * d] {
                for j in 0..3 {
                    sum[j] += &c.nu[j];
                }
                max_dev = max_dev.max((ec.cylinder(&c.word) - to_f64(&c.prob)).abs());
            }
            additive &= sum == parent.nu;
        }
    }
    rec.check("additivity", additive, format!("all |w| ≤ {depth}"));
    rec.check("float-route", max_dev < 1e-10, format!("max deviation {max_dev:.3e}"));
    let part = partition_identity_check(&ec, depth.max(1));
    rec.check("partition-identity", part < 1e-12, format!("deviation {part:.3e}"));
    let root = energy_cell_vector(hs, &Word::empty())?;
    rec.check("root-vector", root.nu == [int(2), int(2), int(2)], "");
    if hs.k() == 2 {
        let scan = decay_scan(hs, depth.max(1))?;
        let ok = scan
            .rows
            .iter()
            .all(|r| r.scaled >= rat(1, 2) && r.scaled <= rat(5, 9) && r.argmax.is_constant());
        rec.check(
            "decay",
            ok,
            format!(
                "sup scaled = {}",
                scan.empirical_constant().cloned().unwrap_or_default()
            ),
        );
    }
    Ok(rec.checks)
}

fn selfsim_suite(hs: &HarmonicStructure, depth: usize) -> Vec<Check> {
    let mut rec = Recorder::new("selfsim");
    let mm = m_matrices(hs);
    rec.check(
        "row-sum-eigenvector",
        mm.row_sum_vector() == [int(1), int(1), int(1)],
        "",
    );
    let covariant = (0..hs.d()).all(|n| {
        let rn = hs.params.rotate_cell(n);
        (0..3).all(|i| (0..3).all(|j| mm.m[rn].get((i + 1) % 3, (j + 1) % 3) == mm.m[n].get(i, j)))
    });
    rec.check("rotational-covariance", covariant, "");
    rec.result("vector-identity", verify_vector_identity(hs, &mm, depth), |r| {
        format!("{} exact checks", r.checks)
    });
    rec.result("weighted-identity", weighted_identity_check(hs, &mm, depth), |r| {
        format!("{} exact checks", r.checks)
    });
    rec.checks
}

fn laplacian_suite(hs: &HarmonicStructure, depth: usize) -> Result<Vec<Check>> {
    let mut rec = Recorder::new("laplacian");
    let level = depth.clamp(1, hs.params.graph_cap);
    for m in 0..=level {
        let g = build_level_graph(&hs.params, m)?;
        let mu: Rational = (0..g.vertex_count())
            .map(|x| spline_integral_mu(&hs.params, &g, x))
            .sum();
        let nu: Rational = spline_integrals_nu(hs, &g).into_iter().sum();
        rec.check(
            format!("spline-mass-m{m}"),
            mu == int(1) && nu == int(2),
            format!("μ={mu} ν′={nu}"),
        );
    }
    let g = build_level_graph(&hs.params, level)?;
    let w = kusuoka_square(hs, &g);
    let harm = standard_harmonic(hs, &g, 0);
    let mut positive = true;
    let mut harmonic_zero = true;
    for x in g.junctions() {
        positive &= graph_laplacian_value(&g, &w, x)? > Rational::zero();
        harmonic_zero &= graph_laplacian_value(&g, &harm, x)?.is_zero();
    }
    rec.check("denominator-positive", positive, format!("all junctions of V_{level}"));
    rec.check("harmonic-zero", harmonic_zero, format!("all junctions of V_{level}"));
    let census = vertex_census(&hs.params, level);
    rec.check(
        "vertex-census",
        census == g.vertex_count().into(),
        format!("|V_{level}| = {census}"),
    );
    Ok(rec.checks)
}

fn mixing_suite(hs: &HarmonicStructure, seed: u64) -> Result<Vec<Check>> {
    let mut rec = Recorder::new("mixing");
    let ec = energy_orthobasis(hs)?;
    let op = transfer_operator_matrix(&ec)?;
    let fixed = crate::mixing::exact_invariants_hold(&op);
    rec.check("identity-fixed-trace-preserved", fixed, format!("rep = {:?}", op.rep));
    let defect = trace_preservation_defect(&op, 100, seed);
    rec.check("trace-preservation", defect < 1e-12, format!("max defect {defect:.3e}"));
    if hs.k() == 2 {
        let want = vec![int(1), rat(4, 5), rat(4, 5)];
        rec.check(
            "spectrum",
            op.spectrum_exact.as_ref() == Some(&want),
            format!("{:?}", op.spectrum),
        );
    }
    let a = Word::new(vec![0]);
    let max_gap = if hs.d() <= 3 { 8 } else { 4 };
    let mut worst = 0f64;
    for n in 0..=max_gap {
        let b = correlation_exact(&ec, &op, &a, &a, n, CorrelationMethod::Brute)?;
        let o = correlation_exact(&ec, &op, &a, &a, n, CorrelationMethod::Operator)?;
        worst = worst.max((b - o).abs());
    }
    rec.check(
        "brute-vs-operator",
        worst < 1e-12,
        format!("max difference {worst:.3e} for n ≤ {max_gap}"),
    );
    let fit = mixing_rate_fit(&ec, &op, &a, &a, 5..=25, CorrelationMethod::Operator)?;
    let rel = (fit.rate - fit.reference_rate).abs() / fit.reference_rate;
    rec.check(
        "mixing-rate",
        rel < 0.02,
        format!(
            "fitted rate {:.6}, operator rate {:.6}, constant {:.4}",
            fit.rate, fit.reference_rate, fit.constant
        ),
    );
    Ok(rec.checks)
}
