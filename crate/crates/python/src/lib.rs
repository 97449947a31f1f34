//! Python bindings. Rationals cross the boundary as `"num/den"` strings, which
//! `fractions.Fraction` parses directly.

use kusuoka_core::harmonic::{expected_hitting_time, renormalization_constant as renorm, return_probability};
use kusuoka_core::laplacian::{
    delta_mu_estimate, delta_nu_estimate, kusuoka_square, standard_harmonic, standard_harmonic_square,
    unit_poisson_solution, LaplacianMethod,
};
use kusuoka_core::measures::{energy_cell_vector, energy_orthobasis, measure_table};
use kusuoka_core::mixing::{correlation_exact, mixing_rate_fit, transfer_operator_matrix, CorrelationMethod};
use kusuoka_core::selfsim::m_matrices;
use kusuoka_core::topology::{build_level_graph, vertex_census};
use kusuoka_core::verify::{run_suite, Suite};
use kusuoka_core::walk::{monte_carlo_walk, WalkTarget};
use kusuoka_core::{
    EnergyCoordinates, Error, HarmonicStructure, Mat3, MeasureVector, RenormMethod, SymOperator, VertexAddress, Word,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn mat_strings(m: &Mat3) -> Vec<Vec<String>> {
    (0..3)
        .map(|i| (0..3).map(|j| m.get(i, j).to_string()).collect())
        .collect()
}

fn measure_dict<'py>(py: Python<'py>, mv: &MeasureVector, d: usize) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("word", mv.word.format(d))?;
    out.set_item("nu", mv.nu.iter().map(|q| q.to_string()).collect::<Vec<_>>())?;
    out.set_item("total_std", mv.total_std.to_string())?;
    out.set_item("prob", mv.prob.to_string())?;
    out.set_item(
        "radon_nikodym",
        mv.radon_nikodym().iter().map(|q| q.to_string()).collect::<Vec<_>>(),
    )?;
    Ok(out)
}

/// The level-`k` gasket with its harmonic structure and energy coordinates.
#[pyclass(name = "Gasket", frozen)]
struct PyGasket {
    hs: HarmonicStructure,
    ec: EnergyCoordinates,
    op: SymOperator,
}

impl PyGasket {
    fn word(&self, s: &str) -> PyResult<Word> {
        Word::parse(s, self.hs.d()).map_err(py_err)
    }
}

#[pymethods]
impl PyGasket {
    #[new]
    fn new(k: u32) -> PyResult<Self> {
        let params = kusuoka_core::GasketParams::new(k).map_err(py_err)?;
        let hs = HarmonicStructure::new(&params).map_err(py_err)?;
        let ec = energy_orthobasis(&hs).map_err(py_err)?;
        let op = transfer_operator_matrix(&ec).map_err(py_err)?;
        Ok(PyGasket { hs, ec, op })
    }

    #[getter]
    fn k(&self) -> u32 {
        self.hs.k()
    }

    #[getter]
    fn d(&self) -> usize {
        self.hs.d()
    }

    #[getter]
    fn hausdorff_dim(&self) -> f64 {
        self.hs.params.hausdorff_dim
    }

    /// Renormalization constant `r_k`.
    #[getter]
    fn r(&self) -> String {
        self.hs.r.to_string()
    }

    /// Return probability `1 − r_k` of the walk on Γ_1.
    #[getter]
    fn p(&self) -> PyResult<String> {
        Ok(return_probability(&self.hs.params).map_err(py_err)?.to_string())
    }

    /// Expected hitting time `H(q_1, q_2)` on Γ_m.
    #[pyo3(signature = (m = 1))]
    fn hitting_time(&self, m: usize) -> PyResult<String> {
        Ok(expected_hitting_time(&self.hs.params, m).map_err(py_err)?.to_string())
    }

    fn vertex_count(&self, m: usize) -> String {
        vertex_census(&self.hs.params, m).to_string()
    }

    /// `B_n` for every cell: boundary data of `h ∘ F_n` is `B_n h`.
    fn restriction_matrices(&self) -> Vec<Vec<Vec<String>>> {
        self.hs.b.iter().map(mat_strings).collect()
    }

    fn m_matrices(&self) -> Vec<Vec<Vec<String>>> {
        m_matrices(&self.hs).m.iter().map(mat_strings).collect()
    }

    fn measure<'py>(&self, py: Python<'py>, word: &str) -> PyResult<Bound<'py, PyDict>> {
        let mv = energy_cell_vector(&self.hs, &self.word(word)?).map_err(py_err)?;
        measure_dict(py, &mv, self.d())
    }

    fn measure_table<'py>(&self, py: Python<'py>, m: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let rows = measure_table(&self.hs, m).map_err(py_err)?;
        rows.iter().map(|mv| measure_dict(py, mv, self.d())).collect()
    }

    /// Floating-point cylinder measure from the energy-coordinate matrices.
    fn cylinder(&self, word: &str) -> PyResult<f64> {
        Ok(self.ec.cylinder(&self.word(word)?))
    }

    /// Estimates along the refinement chain of a junction `"<word>:<corner>"`.
    #[pyo3(signature = (point, levels = 6, method = "energy", function = "h0-square"))]
    fn laplacian(&self, point: &str, levels: usize, method: &str, function: &str) -> PyResult<Vec<(usize, f64)>> {
        let x = VertexAddress::parse(point, self.d()).map_err(py_err)?;
        let method: LaplacianMethod = parse(method)?;
        let g = build_level_graph(&self.hs.params, levels).map_err(py_err)?;
        let seq = match (function, method) {
            ("poisson", LaplacianMethod::Standard) => delta_mu_estimate(
                &self.hs,
                &unit_poisson_solution::<f64>(&self.hs, levels).map_err(py_err)?,
                &x,
            ),
            ("poisson", LaplacianMethod::Energy) => delta_nu_estimate(
                &self.hs,
                &unit_poisson_solution::<f64>(&self.hs, levels).map_err(py_err)?,
                &x,
            ),
            (f, method) => {
                let u = match f {
                    "h0-square" => standard_harmonic_square(&self.hs, &g, 0),
                    "kusuoka-square" => kusuoka_square(&self.hs, &g),
                    "harmonic" => standard_harmonic(&self.hs, &g, 1),
                    other => return Err(PyValueError::new_err(format!("unknown test function `{other}`"))),
                };
                match method {
                    LaplacianMethod::Standard => delta_mu_estimate(&self.hs, &u, &x),
                    LaplacianMethod::Energy => delta_nu_estimate(&self.hs, &u, &x),
                }
            }
        }
        .map_err(py_err)?;
        Ok(seq.rows.iter().map(|r| (r.level, r.estimate)).collect())
    }

    /// Spectrum of the transfer operator on symmetric 2×2 matrices, largest first.
    fn transfer_spectrum(&self) -> Vec<f64> {
        self.op.spectrum.clone()
    }

    #[pyo3(signature = (a, b, n, method = "operator"))]
    fn correlation(&self, a: &str, b: &str, n: usize, method: &str) -> PyResult<f64> {
        let method: CorrelationMethod = parse(method)?;
        correlation_exact(&self.ec, &self.op, &self.word(a)?, &self.word(b)?, n, method).map_err(py_err)
    }

    /// Returns `(rate, constant)` from a log-linear fit over `n_from..=n_to`.
    #[pyo3(signature = (a = "0", b = "0", n_from = 5, n_to = 25))]
    fn mixing_fit(&self, a: &str, b: &str, n_from: usize, n_to: usize) -> PyResult<(f64, f64)> {
        let fit = mixing_rate_fit(
            &self.ec,
            &self.op,
            &self.word(a)?,
            &self.word(b)?,
            n_from..=n_to,
            CorrelationMethod::Operator,
        )
        .map_err(py_err)?;
        Ok((fit.rate, fit.constant))
    }

    /// Returns `(estimate, standard_error)`.
    #[pyo3(signature = (target = "return-prob", samples = 100_000, seed = 0))]
    fn monte_carlo(&self, py: Python<'_>, target: &str, samples: u64, seed: u64) -> PyResult<(f64, f64)> {
        let target: WalkTarget = parse(target)?;
        let params = self.hs.params.clone();
        let stats = py
            .detach(move || monte_carlo_walk(&params, target, samples, seed))
            .map_err(py_err)?;
        Ok((stats.estimate, stats.standard_error))
    }

    /// Runs an invariant suite; returns `(passed, [(suite, name, passed, detail)])`.
    #[pyo3(signature = (suite = "all", depth = 2, seed = 0))]
    fn verify(
        &self,
        py: Python<'_>,
        suite: &str,
        depth: usize,
        seed: u64,
    ) -> PyResult<(bool, Vec<(String, String, bool, String)>)> {
        let suite: Suite = parse(suite)?;
        let params = self.hs.params.clone();
        let report = py
            .detach(move || run_suite(&params, suite, depth, seed))
            .map_err(py_err)?;
        let checks = report
            .checks
            .iter()
            .map(|c| (c.suite.to_string(), c.name.clone(), c.passed, c.detail.clone()))
            .collect();
        Ok((report.passed(), checks))
    }

    fn __repr__(&self) -> String {
        format!("Gasket(k={})", self.hs.k())
    }
}

/// `r_k` by one of `energy-ratio`, `corner-eigenvalue`, `resistance`, `hitting-time`.
#[pyfunction]
#[pyo3(signature = (k, method = "energy-ratio"))]
fn renormalization_constant(k: u32, method: &str) -> PyResult<String> {
    let method: RenormMethod = parse(method)?;
    let params = kusuoka_core::GasketParams::new(k).map_err(py_err)?;
    Ok(renorm(&params, method).map_err(py_err)?.to_string())
}

#[pymodule]
#[pyo3(name = "kusuoka")]
fn kusuoka_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGasket>()?;
    m.add_function(wrap_pyfunction!(renormalization_constant, m)?)?;
    Ok(())
}
