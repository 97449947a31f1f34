mod output;

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kusuoka_core::exact::{int, vec3_add};
use kusuoka_core::harmonic::{expected_hitting_time, renormalization_constant, return_probability};
use kusuoka_core::laplacian::{
    delta_mu_estimate, delta_nu_estimate, h0_square_reference, kusuoka_square, standard_harmonic,
    standard_harmonic_square, unit_poisson_solution, LaplacianMethod,
};
use kusuoka_core::linalg::Scalar;
use kusuoka_core::measures::{energy_cell_vector, energy_orthobasis, measure_table, write_measure_csv};
use kusuoka_core::mixing::{
    correlation_exact, correlation_operator_exact, mixing_rate_fit, transfer_operator_matrix, CorrelationMethod,
};
use kusuoka_core::selfsim::{
    grouped_cell_order, laplacian_scaling_experiment, m_matrices, verify_vector_identity, weighted_identity_check,
};
use kusuoka_core::topology::{build_level_graph, vertex_census};
use kusuoka_core::verify::{run_suite, Suite};
use kusuoka_core::walk::{monte_carlo_walk, WalkTarget};
use kusuoka_core::{
    Error, GasketParams, GridFunction, HarmonicStructure, LaplacianSequence, RenormMethod, VertexAddress, Word,
};
use serde_json::{json, Value};

use output::{mat, q, qs, Format, Sink};

#[derive(Parser)]
#[command(name = "kusuoka", version, about = "Harmonic analysis on level-k Sierpinski gaskets")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Gasket level: each cell splits into k(k+1)/2 subcells.
    #[arg(long, global = true, default_value_t = 2, value_parser = clap::value_parser!(u32).range(2..=64))]
    k: u32,
    /// Word length or graph level; each subcommand has its own default.
    #[arg(long, global = true)]
    depth: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: logical cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Dimension, renormalization constant, walk quantities and vertex counts.
    Info {
        /// Report a single renormalization method instead of all four.
        #[arg(long)]
        method: Option<RenormMethod>,
        /// Also estimate the walk quantities by Monte Carlo with this many samples.
        #[arg(long)]
        samples: Option<u64>,
    },
    /// The level graph Γ_m with m = --depth (default 1).
    Graph,
    /// Energy measure of a cell, or the whole level-m table when --word is omitted.
    Measure {
        #[arg(long)]
        word: Option<String>,
    },
    /// The M_n family and its identities.
    Selfsim {
        #[arg(long)]
        print_matrices: bool,
        /// Exhaustive exact identity checks up to --depth (default 3).
        #[arg(long)]
        verify: bool,
        /// List the matrices with corner cells first, then rotation orbits of inner cells.
        #[arg(long)]
        grouped_order: bool,
        /// Run the scaling experiment at this junction, e.g. `0:1`.
        #[arg(long)]
        scaling: Option<String>,
        /// Cell j for the scaling experiment.
        #[arg(long, default_value_t = 0)]
        cell: usize,
        #[arg(long, default_value_t = 8)]
        levels: usize,
    },
    /// Pointwise Laplacian estimates at a junction.
    Laplacian {
        /// Junction address `<word>:<corner>`, e.g. `0:1`.
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = 6)]
        levels: usize,
        #[arg(long, default_value = "energy")]
        method: LaplacianMethod,
        #[arg(long, value_enum, default_value_t = TestFunction::H0Square)]
        function: TestFunction,
    },
    /// Correlations ν(T^{-(n+|a|)}[a] ∩ [b]) − ν[a]ν[b] under the shift.
    Mixing {
        #[arg(long, default_value = "0")]
        a: String,
        #[arg(long, default_value = "0")]
        b: String,
        #[arg(long, default_value_t = 25)]
        n: usize,
        #[arg(long, default_value = "operator")]
        method: CorrelationMethod,
        /// Fit the exponential rate and constant.
        #[arg(long)]
        fit: bool,
    },
    /// Run an invariant suite; exit code 1 if any check fails.
    Verify {
        #[arg(long, default_value = "all")]
        suite: Suite,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TestFunction {
    /// h_0², with h_0 the harmonic function with boundary values (1, 0, 0).
    H0Square,
    /// h_1² + h_2² for an energy-orthonormal pair.
    KusuokaSquare,
    /// The harmonic function with boundary values (0, 1, 0).
    Harmonic,
    /// Dirichlet solution of Δ_μ u = 1 (floating point).
    Poisson,
}

enum Failure {
    Usage(String),
    Verification(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::UnknownMethod(_) | Error::DepthCap { .. } | Error::TooLarge { .. } => {
                Failure::Usage(e.to_string())
            }
            Error::Verification { .. } => Failure::Verification(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Other(format!("i/o error: {e}"))
    }
}

type CmdResult = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(msg)) | Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> CmdResult {
    let c = &cli.common;
    let params = GasketParams::new(c.k)?;
    let default_format = match cli.command {
        Command::Laplacian { .. } | Command::Mixing { .. } => Format::Csv,
        Command::Verify { .. } => Format::Pretty,
        _ => Format::Json,
    };
    let mut sink = Sink::open(c.format.unwrap_or(default_format), c.out.as_ref())?;
    let ok = match &cli.command {
        Command::Info { method, samples } => cmd_info(&params, c, *method, *samples, &mut sink)?,
        Command::Graph => cmd_graph(&params, c.depth.unwrap_or(1), &mut sink)?,
        Command::Measure { word } => cmd_measure(&params, c, word.as_deref(), &mut sink)?,
        Command::Selfsim {
            print_matrices,
            verify,
            grouped_order,
            scaling,
            cell,
            levels,
        } => {
            let hs = HarmonicStructure::new(&params)?;
            let mut ok = true;
            if *verify {
                ok = selfsim_verify(&hs, c.depth.unwrap_or(3), &mut sink)?;
            }
            if let Some(point) = scaling {
                selfsim_scaling(&hs, point, *cell, *levels, &mut sink)?;
            }
            if *print_matrices || (!*verify && scaling.is_none()) {
                selfsim_print(&hs, *grouped_order, &mut sink)?;
            }
            ok
        }
        Command::Laplacian {
            point,
            levels,
            method,
            function,
        } => cmd_laplacian(&params, point, *levels, *method, *function, &mut sink)?,
        Command::Mixing { a, b, n, method, fit } => cmd_mixing(&params, a, b, *n, *method, *fit, &mut sink)?,
        Command::Verify { suite } => cmd_verify(&params, *suite, c.depth.unwrap_or(2), c.seed, &mut sink)?,
    };
    sink.finish()?;
    Ok(ok)
}

fn cmd_info(
    params: &GasketParams,
    c: &Common,
    method: Option<RenormMethod>,
    samples: Option<u64>,
    sink: &mut Sink,
) -> CmdResult {
    let hs = HarmonicStructure::new(params)?;
    let methods: Vec<RenormMethod> = match method {
        Some(m) => vec![m],
        None => RenormMethod::ALL.to_vec(),
    };
    let mut by_method = serde_json::Map::new();
    for m in &methods {
        by_method.insert(m.name().into(), q(&renormalization_constant(params, *m)?));
    }
    let p = return_probability(params)?;
    let h = expected_hitting_time(params, 1)?;
    let depth = c.depth.unwrap_or(4);
    let census: Vec<(usize, String)> = (0..=depth).map(|m| (m, vertex_census(params, m).to_string())).collect();
    let walk = match samples {
        Some(n) => {
            let exact = [("return-prob", p.clone()), ("hitting-time", h.clone())];
            let mut out = serde_json::Map::new();
            for (target, (name, value)) in [WalkTarget::ReturnProb, WalkTarget::HittingTime].into_iter().zip(exact) {
                let stats = monte_carlo_walk(params, target, n, c.seed)?;
                let z = stats.z_score(kusuoka_core::exact::to_f64(&value));
                let mut v = serde_json::to_value(stats).expect("plain data");
                v["z_score"] = json!(z);
                out.insert(name.into(), v);
            }
            Some(Value::Object(out))
        }
        None => None,
    };
    match sink.format {
        Format::Json => {
            let tensor: Vec<Value> = hs.b.iter().map(mat).collect();
            let mut body = json!({
                "k": params.k,
                "d": params.d,
                "hausdorff_dim": params.hausdorff_dim,
                "r": q(&hs.r),
                "r_by_method": by_method,
                "p": q(&p),
                "H": q(&h),
                "extension_tensor": tensor,
                "vertex_counts": census.iter().map(|(m, n)| json!({"m": m, "vertices": n})).collect::<Vec<_>>(),
            });
            if let Some(w) = walk {
                body["monte_carlo"] = w;
            }
            sink.json(body)?;
        }
        Format::Csv => sink.csv(&["m", "vertices"], census)?,
        Format::Pretty => {
            sink.line(format!(
                "k = {}, d = {}, s = {:.6}",
                params.k, params.d, params.hausdorff_dim
            ))?;
            for (name, v) in &by_method {
                sink.line(format!("r = {} ({name})", v.as_str().unwrap_or_default()))?;
            }
            sink.line(format!("p = {p}"))?;
            sink.line(format!("H = {h}"))?;
            for (m, n) in &census {
                sink.line(format!("|V_{m}| = {n}"))?;
            }
            if let Some(Value::Object(w)) = walk {
                for (name, v) in w {
                    sink.line(format!("monte carlo {name}: {v}"))?;
                }
            }
        }
    }
    Ok(true)
}

fn cmd_graph(params: &GasketParams, level: usize, sink: &mut Sink) -> CmdResult {
    let g = build_level_graph(params, level)?;
    match sink.format {
        Format::Json => sink.json(serde_json::to_value(g.to_json()).expect("plain data"))?,
        Format::Csv => {
            let rows = g
                .to_json()
                .vertices
                .into_iter()
                .enumerate()
                .map(|(i, v)| (i, v.x, v.y_sqrt3, v.degree, v.boundary));
            sink.csv(&["index", "x", "y_sqrt3", "degree", "boundary"], rows)?
        }
        Format::Pretty => sink.line(format!(
            "Γ_{level} of SG_{}: {} vertices, {} edges, {} cells",
            params.k,
            g.vertex_count(),
            g.edge_count(),
            g.cell_count()
        ))?,
    }
    Ok(true)
}

fn cmd_measure(params: &GasketParams, c: &Common, word: Option<&str>, sink: &mut Sink) -> CmdResult {
    let hs = HarmonicStructure::new(params)?;
    let d = params.d;
    let Some(word) = word else {
        let rows = measure_table(&hs, c.depth.unwrap_or(2))?;
        match sink.format {
            Format::Csv => write_measure_csv(&rows, d, sink.raw())?,
            Format::Json => sink.json(json!({ "k": params.k, "cells": rows }))?,
            Format::Pretty => {
                for r in &rows {
                    sink.line(format!("[{}] prob = {}", r.word.format(d), r.prob))?;
                }
            }
        }
        return Ok(true);
    };
    let w = Word::parse(word, d)?;
    let mv = energy_cell_vector(&hs, &w)?;
    let children = (0..d).try_fold([int(0), int(0), int(0)], |acc, s| {
        energy_cell_vector(&hs, &w.append(s)).map(|ch| vec3_add(&acc, &ch.nu))
    });
    let additive = match children {
        Ok(sum) => sum == mv.nu,
        // The children lie beyond the word cap; nothing to compare.
        Err(Error::DepthCap { .. }) => true,
        Err(e) => return Err(e.into()),
    };
    let approximants: Vec<(String, Vec<String>)> = (0..=w.len())
        .map(|n| {
            let v = energy_cell_vector(&hs, &w.prefix(n)).expect("prefix of a valid word");
            (
                w.prefix(n).format(d),
                v.radon_nikodym().iter().map(|x| x.to_string()).collect(),
            )
        })
        .collect();
    let status = if additive { "ok" } else { "failed" };
    match sink.format {
        Format::Json => {
            let mut body = serde_json::to_value(&mv).expect("plain data");
            body["word"] = json!(w.format(d));
            body["k"] = json!(params.k);
            body["radon_nikodym"] = qs(&mv.radon_nikodym());
            body["approximants"] =
                Value::Array(approximants.iter().map(|(p, r)| json!({"prefix": p, "R": r})).collect());
            body["additivity"] = json!(status);
            sink.json(body)?
        }
        Format::Csv => write_measure_csv(std::slice::from_ref(&mv), d, sink.raw())?,
        Format::Pretty => {
            sink.line(format!("cell [{}] of SG_{}", w.format(d), params.k))?;
            sink.line(format!("nu = ({}, {}, {})", mv.nu[0], mv.nu[1], mv.nu[2]))?;
            sink.line(format!("prob = {}", mv.prob))?;
            for (p, r) in &approximants {
                sink.line(format!("R[{p}] = ({})", r.join(", ")))?;
            }
            sink.line(format!("additivity: {status}"))?;
        }
    }
    Ok(additive)
}

fn selfsim_print(hs: &HarmonicStructure, grouped_order: bool, sink: &mut Sink) -> io::Result<()> {
    let mm = m_matrices(hs);
    let order: Vec<usize> = if grouped_order {
        grouped_cell_order(&hs.params)
    } else {
        (0..hs.d()).collect()
    };
    match sink.format {
        Format::Json => sink.json(json!({
            "k": hs.k(),
            "cell_order": order,
            "matrices": order.iter().map(|&n| mat(&mm.m[n])).collect::<Vec<_>>(),
            "column_sums": order.iter().map(|&n| qs(&mm.s[n])).collect::<Vec<_>>(),
            "row_sum_vector": qs(&mm.row_sum_vector()),
        })),
        Format::Csv => {
            let mut rows = Vec::new();
            for &n in &order {
                for i in 0..3 {
                    for j in 0..3 {
                        rows.push((n, i, j, mm.m[n].get(i, j).to_string()));
                    }
                }
            }
            sink.csv(&["cell", "row", "col", "value"], rows)
        }
        Format::Pretty => {
            for &n in &order {
                sink.line(format!("M_{n} = {}", mm.m[n]))?;
            }
            Ok(())
        }
    }
}

fn selfsim_verify(hs: &HarmonicStructure, depth: usize, sink: &mut Sink) -> CmdResult {
    let mm = m_matrices(hs);
    let mut reports = Vec::new();
    let mut ok = true;
    for (name, r) in [
        ("vector", verify_vector_identity(hs, &mm, depth)),
        ("weighted", weighted_identity_check(hs, &mm, depth)),
    ] {
        match r {
            Ok(rep) => reports.push(json!({"identity": name, "passed": true, "checks": rep.checks})),
            Err(e @ Error::Verification { .. }) => {
                ok = false;
                reports.push(json!({"identity": name, "passed": false, "witness": e.to_string()}));
            }
            Err(e) => return Err(e.into()),
        }
    }
    match sink.format {
        Format::Json => sink.json(json!({"k": hs.k(), "depth": depth, "passed": ok, "reports": reports}))?,
        _ => {
            for r in &reports {
                let verdict = if r["passed"] == json!(true) { "PASS" } else { "FAIL" };
                let detail = r.get("witness").or(r.get("checks")).cloned().unwrap_or_default();
                sink.line(format!(
                    "{verdict} {} identity, depth {depth}: {detail}",
                    r["identity"].as_str().unwrap_or("")
                ))?;
            }
        }
    }
    Ok(ok)
}

fn selfsim_scaling(hs: &HarmonicStructure, point: &str, cell: usize, levels: usize, sink: &mut Sink) -> CmdResult {
    let x = VertexAddress::parse(point, hs.d())?;
    let ec = energy_orthobasis(hs)?;
    let report = laplacian_scaling_experiment(hs, &ec, cell, &x, levels)?;
    match sink.format {
        Format::Json => sink.json(serde_json::to_value(&report).expect("plain data"))?,
        Format::Csv => sink.csv(
            &["level", "estimate", "reference", "deviation"],
            report
                .rows
                .iter()
                .map(|r| (r.level, r.estimate, r.reference, r.deviation)),
        )?,
        Format::Pretty => {
            for r in &report.rows {
                sink.line(format!(
                    "L = {:>2}: estimate {:.12} reference {:.12} deviation {:.3e}",
                    r.level, r.estimate, r.reference, r.deviation
                ))?;
            }
        }
    }
    Ok(true)
}

fn estimate<T: Scalar>(
    hs: &HarmonicStructure,
    u: &GridFunction<T>,
    x: &VertexAddress,
    method: LaplacianMethod,
) -> kusuoka_core::Result<LaplacianSequence> {
    match method {
        LaplacianMethod::Standard => delta_mu_estimate(hs, u, x),
        LaplacianMethod::Energy => delta_nu_estimate(hs, u, x),
    }
}

fn cmd_laplacian(
    params: &GasketParams,
    point: &str,
    levels: usize,
    method: LaplacianMethod,
    function: TestFunction,
    sink: &mut Sink,
) -> CmdResult {
    let hs = HarmonicStructure::new(params)?;
    let x = VertexAddress::parse(point, hs.d())?;
    let g = build_level_graph(params, levels)?;
    let seq = match function {
        TestFunction::H0Square => estimate(&hs, &standard_harmonic_square(&hs, &g, 0), &x, method)?,
        TestFunction::KusuokaSquare => estimate(&hs, &kusuoka_square(&hs, &g), &x, method)?,
        TestFunction::Harmonic => estimate(&hs, &standard_harmonic(&hs, &g, 1), &x, method)?,
        TestFunction::Poisson => estimate(&hs, &unit_poisson_solution::<f64>(&hs, levels)?, &x, method)?,
    };
    match sink.format {
        Format::Csv => sink.csv(
            &["level", "raw", "estimate", "difference"],
            seq.rows.iter().map(|r| (r.level, r.raw, r.estimate, r.difference)),
        )?,
        Format::Json => {
            let mut body = serde_json::to_value(&seq).expect("plain data");
            if function == TestFunction::H0Square && method == LaplacianMethod::Energy {
                body["reference"] = q(&h0_square_reference(&hs, &x, levels)?);
            }
            sink.json(body)?
        }
        Format::Pretty => {
            for r in &seq.rows {
                let exact = r.exact.as_ref().map(|e| format!(" = {e}")).unwrap_or_default();
                sink.line(format!(
                    "m = {:>2}: raw {:.6e} estimate {:.12}{exact}",
                    r.level, r.raw, r.estimate
                ))?;
            }
        }
    }
    Ok(true)
}

fn cmd_mixing(
    params: &GasketParams,
    a: &str,
    b: &str,
    n: usize,
    method: CorrelationMethod,
    fit: bool,
    sink: &mut Sink,
) -> CmdResult {
    let hs = HarmonicStructure::new(params)?;
    let (a, b) = (Word::parse(a, params.d)?, Word::parse(b, params.d)?);
    let ec = energy_orthobasis(&hs)?;
    let op = transfer_operator_matrix(&ec)?;
    let n_min = b.len().saturating_sub(a.len());
    if n < n_min {
        return Err(Failure::Usage(format!("--n must be at least |b| − |a| = {n_min}")));
    }
    let mut rows: Vec<(usize, f64, Option<f64>)> = Vec::new();
    for m in n_min..=n {
        let c = correlation_exact(&ec, &op, &a, &b, m, method)?;
        let ratio = rows
            .last()
            .filter(|p| p.1 != 0.0 && c != 0.0)
            .map(|p| (c.abs() / p.1.abs()).ln());
        rows.push((m, c, ratio));
    }
    let fitted = if fit {
        let from = n_min.max(5.min(n / 2));
        if n <= from {
            return Err(Failure::Usage(format!("--fit needs --n above {from}")));
        }
        Some(mixing_rate_fit(&ec, &op, &a, &b, from..=n, method)?)
    } else {
        None
    };
    match sink.format {
        Format::Csv => match &fitted {
            Some(f) => sink.csv(
                &["n", "correlation", "log_ratio", "rate", "constant"],
                rows.iter().map(|r| (r.0, r.1, r.2, f.rate, f.constant)),
            )?,
            None => sink.csv(&["n", "correlation", "log_ratio"], rows.iter().copied())?,
        },
        Format::Json => {
            let exact: Vec<Value> = match method {
                CorrelationMethod::Operator => rows
                    .iter()
                    .map(|r| {
                        correlation_operator_exact(&ec, &op, &a, &b, r.0)
                            .map(|v| q(&v))
                            .unwrap_or(Value::Null)
                    })
                    .collect(),
                CorrelationMethod::Brute => vec![Value::Null; rows.len()],
            };
            let mut body = json!({
                "k": params.k,
                "a": a.format(params.d),
                "b": b.format(params.d),
                "method": serde_json::to_value(method).expect("plain data"),
                "exploratory": params.k != 2,
                "rows": rows.iter().zip(exact).map(|(r, e)| json!({
                    "n": r.0, "correlation": r.1, "log_ratio": r.2, "exact": e,
                })).collect::<Vec<_>>(),
            });
            if let Some(mut f) = fitted {
                f.correlations.clear();
                body["fit"] = serde_json::to_value(f).expect("plain data");
            }
            sink.json(body)?
        }
        Format::Pretty => {
            for r in &rows {
                sink.line(format!("n = {:>3}: {:+.6e}", r.0, r.1))?;
            }
            if let Some(f) = fitted {
                sink.line(format!(
                    "fitted rate {:.6} (operator {:.6}), constant {:.4} over n = {}..={}",
                    f.rate, f.reference_rate, f.constant, f.n_from, f.n_to
                ))?;
            }
        }
    }
    Ok(true)
}

fn cmd_verify(params: &GasketParams, suite: Suite, depth: usize, seed: u64, sink: &mut Sink) -> CmdResult {
    let report = run_suite(params, suite, depth, seed)?;
    match sink.format {
        Format::Json => sink.json(serde_json::to_value(&report).expect("plain data"))?,
        Format::Csv => sink.csv(
            &["suite", "name", "passed", "detail"],
            report.checks.iter().map(|c| (c.suite, &c.name, c.passed, &c.detail)),
        )?,
        Format::Pretty => {
            for c in &report.checks {
                let verdict = if c.passed { "PASS" } else { "FAIL" };
                sink.line(format!("{verdict} {}/{}: {}", c.suite, c.name, c.detail))?;
            }
            let failed = report.failures().count();
            sink.line(format!("{} checks, {failed} failed", report.checks.len()))?;
        }
    }
    Ok(report.passed())
}
