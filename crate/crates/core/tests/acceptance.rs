//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the test fails if any
//! criterion fails.

use kusuoka_core::exact::{int, powi, rat, to_f64, Mat3, Rational};
use kusuoka_core::harmonic::{
    boundary_energy, boundary_map, expected_hitting_time, extend_harmonic_by_solves, renormalization_constant,
    return_probability, solve_dirichlet, HarmonicStructure, RenormMethod,
};
use kusuoka_core::laplacian::{
    delta_nu_estimate, graph_laplacian_value, kusuoka_square, spline_integral_mu, spline_integrals_nu,
    standard_harmonic, GridFunction, Provenance,
};
use kusuoka_core::measures::{
    decay_scan, energy_cell_vector, energy_orthobasis, kusuoka_cylinder, measure_table, partition_identity_check,
};
use kusuoka_core::mixing::{
    correlation_exact, g_function_estimate, mixing_rate_fit, random_word, trace_preservation_defect,
    transfer_operator_matrix, CorrelationMethod,
};
use kusuoka_core::selfsim::{
    grouped_cell_order, m_matrices, verify_vector_identity, weighted_identity_check, weights_q,
};
use kusuoka_core::topology::{build_level_graph, gasket_params, vertex_census};
use kusuoka_core::walk::{monte_carlo_walk, WalkTarget};
use kusuoka_core::{VertexAddress, Word};
use num_traits::Zero;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn hs(k: u32) -> HarmonicStructure {
    HarmonicStructure::new(&gasket_params(k).unwrap()).unwrap()
}

fn word(s: &str) -> Word {
    Word::parse(s, 3).unwrap()
}

fn c01_renormalization() -> Outcome {
    for (k, want) in [
        (2, Some(rat(3, 5))),
        (3, Some(rat(7, 15))),
        (4, None),
        (5, None),
        (6, None),
    ] {
        let p = gasket_params(k).unwrap();
        let vals: Vec<Rational> = RenormMethod::ALL
            .iter()
            .map(|&m| renormalization_constant(&p, m).unwrap())
            .collect();
        ensure(
            vals.iter().all(|v| v == &vals[0]),
            format!("k={k}: methods disagree {vals:?}"),
        )?;
        if let Some(w) = want {
            ensure(vals[0] == w, format!("k={k}: r={} expected {w}", vals[0]))?;
        }
    }
    Ok("r_2 = 3/5, r_3 = 7/15; four-way agreement for k = 2..6".into())
}

fn c02_lower_bound() -> Outcome {
    for k in 2..=8u32 {
        let r = renormalization_constant(&gasket_params(k).unwrap(), RenormMethod::EnergyRatio).unwrap();
        ensure(r > rat(2, 3 * k as i64), format!("k={k}: r={r}"))?;
    }
    Ok("r_k > 2/(3k) for k = 2..8".into())
}

fn c03_monte_carlo() -> Outcome {
    let mut detail = Vec::new();
    for k in [2, 3] {
        let p = gasket_params(k).unwrap();
        let exact = to_f64(&(int(1) - renormalization_constant(&p, RenormMethod::EnergyRatio).unwrap()));
        let stats = monte_carlo_walk(&p, WalkTarget::ReturnProb, 1_000_000, 20240601 + k as u64).unwrap();
        let z = stats.z_score(exact);
        ensure(
            z < 4.0,
            format!("k={k}: estimate {} vs {exact}, z={z:.2}", stats.estimate),
        )?;
        detail.push(format!("k={k} z={z:.2}"));
    }
    Ok(detail.join(", "))
}

fn c04_prefactor_constants() -> Outcome {
    for (k, base) in [(2, int(5)), (3, rat(90, 7))] {
        let p = gasket_params(k).unwrap();
        let half_h = expected_hitting_time(&p, 1).unwrap() / int(2);
        ensure(half_h == base, format!("k={k}: H/2 = {half_h}"))?;
        for m in 0..=4 {
            ensure(
                int(6) * powi(&half_h, m) == int(6) * powi(&base, m),
                format!("k={k} m={m}: prefactor mismatch"),
            )?;
        }
    }
    Ok("6(H/2)^m with H/2 = 5 (k=2) and 90/7 (k=3)".into())
}

fn c05_extension_rules() -> Outcome {
    let p2 = gasket_params(2).unwrap();
    let g = build_level_graph(&p2, 1).unwrap();
    let u = solve_dirichlet(&g, &boundary_map(&[int(1), int(0), int(0)])).unwrap();
    let junction_vals: Vec<&Rational> = g.junctions().map(|x| &u[x]).collect();
    ensure(
        junction_vals.iter().filter(|v| ***v == rat(2, 5)).count() == 2
            && junction_vals.iter().filter(|v| ***v == rat(1, 5)).count() == 1,
        format!("k=2 values {junction_vals:?}"),
    )?;
    let p3 = gasket_params(3).unwrap();
    let g3 = build_level_graph(&p3, 1).unwrap();
    let u3 = solve_dirichlet(&g3, &boundary_map(&[int(1), int(0), int(0)])).unwrap();
    for v in [rat(1, 3), rat(4, 15), rat(8, 15)] {
        ensure(g3.junctions().any(|x| u3[x] == v), format!("k=3 value {v} missing"))?;
    }
    Ok("1/5-2/5 (k=2) and 1/3-4/15-8/15 (k=3) present".into())
}

fn c06_vector_identity() -> Outcome {
    let mut checks = 0;
    for k in [2, 3, 4] {
        let h = hs(k);
        let mm = m_matrices(&h);
        checks += verify_vector_identity(&h, &mm, 3)
            .map_err(|e| format!("k={k}: {e}"))?
            .checks;
    }
    let h3 = hs(3);
    let fam = m_matrices(&h3).relabeled(&grouped_cell_order(&h3.params));
    let printed = [
        [[49, 0, 0], [12, 4, -3], [12, -3, 4]],
        [[4, 12, -3], [0, 49, 0], [-3, 12, 4]],
        [[4, -3, 12], [-3, 4, 12], [0, 0, 49]],
        [[4, 0, 0], [-3, 12, 4], [-3, 4, 12]],
        [[12, -3, 4], [0, 4, 0], [4, -3, 12]],
        [[12, 4, -3], [4, 12, -3], [0, 0, 4]],
    ];
    for (i, m) in fam.iter().enumerate() {
        ensure(
            *m == Mat3::from_ints(printed[i], 105),
            format!("SG_3 M_{i} differs: {m}"),
        )?;
    }
    Ok(format!("{checks} exact vector identities; six SG_3 matrices match"))
}

fn c07_weighted_identity() -> Outcome {
    for k in [2, 3] {
        let h = hs(k);
        weighted_identity_check(&h, &m_matrices(&h), 3).map_err(|e| format!("k={k}: {e}"))?;
    }
    let h = hs(2);
    let mm = m_matrices(&h);
    ensure(mm.s[0] == [rat(13, 15), rat(1, 15), rat(1, 15)], "k=2 column sums")?;
    let r0 = rat(3, 10);
    let q = weights_q(&mm, &[r0.clone(), rat(1, 2), rat(1, 5)]).unwrap();
    ensure(q[0] == rat(1, 15) + rat(12, 15) * r0, "p_0 = 1/15 + 12/15 R_0")?;
    let ratio = energy_cell_vector(&h, &word("00")).unwrap().prob / energy_cell_vector(&h, &word("0")).unwrap().prob;
    ensure(ratio == rat(41, 75), format!("ν[00]/ν[0] = {ratio}"))?;
    Ok("exact for |u| ≤ 3, k ∈ {2,3}; ν[00]/ν[0] = 41/75".into())
}

fn c08_cylinder_table() -> Outcome {
    let h = hs(2);
    let ec = energy_orthobasis(&h).unwrap();
    for (w, want) in [
        ("0", rat(1, 3)),
        ("00", rat(41, 225)),
        ("01", rat(17, 225)),
        ("02", rat(17, 225)),
    ] {
        let exact = energy_cell_vector(&h, &word(w)).unwrap().prob;
        ensure(exact == want, format!("ν[{w}] = {exact}"))?;
        let float = kusuoka_cylinder(&ec, &word(w)).unwrap();
        ensure((float - to_f64(&want)).abs() < 1e-10, format!("float ν[{w}] = {float}"))?;
    }
    Ok("1/3, 41/225, 17/225, 17/225".into())
}

fn c09_decay() -> Outcome {
    let scan = decay_scan(&hs(2), 12).unwrap();
    for row in &scan.rows {
        ensure(
            row.scaled >= rat(1, 2) && row.scaled <= rat(5, 9),
            format!("m={}: scaled {}", row.m, row.scaled),
        )?;
        ensure(row.argmax.is_constant(), format!("m={}: argmax {}", row.m, row.argmax))?;
    }
    Ok(format!("m ≤ 12, sup scaled = {}", scan.empirical_constant().unwrap()))
}

fn c10_partition_identity() -> Outcome {
    let mut worst = 0f64;
    for (k, m_max) in [(2, 6), (3, 3)] {
        let ec = energy_orthobasis(&hs(k)).unwrap();
        for m in 1..=m_max {
            let dev = partition_identity_check(&ec, m);
            ensure(dev < 1e-12, format!("k={k} m={m}: {dev:e}"))?;
            worst = worst.max(dev);
        }
    }
    Ok(format!("max deviation {worst:.2e}"))
}

fn c11_energy_laplacian() -> Outcome {
    let mut junctions = 0;
    for k in [2, 3] {
        let h = hs(k);
        let g = build_level_graph(&h.params, 6).unwrap();
        // h_1² + h_2² from a second orthonormal pair, extended by local Dirichlet solves.
        let pair = [[int(1), int(-1), int(0)], [int(1), int(1), int(-2)]];
        let mut values = vec![int(0); g.vertex_count()];
        for v in &pair {
            let ext = extend_harmonic_by_solves(&h.params, 6, v).map_err(|e| e.to_string())?;
            let e = boundary_energy(v);
            for (acc, x) in values.iter_mut().zip(&ext) {
                *acc += x * x / &e;
            }
        }
        let u = GridFunction::new(6, values, Provenance::HarmonicExtension);
        let w = kusuoka_square(&h, &g);
        let harm = standard_harmonic(&h, &g, 1);
        for m in 1..=6 {
            let gm = build_level_graph(&h.params, m).unwrap();
            let (um, wm, hm) = (
                u.restrict(&gm).unwrap(),
                w.restrict(&gm).unwrap(),
                harm.restrict(&gm).unwrap(),
            );
            for x in gm.junctions() {
                let den = graph_laplacian_value(&gm, &wm, x).unwrap();
                ensure(den > Rational::zero(), format!("k={k} m={m} x={x}: Δ_m w = {den}"))?;
                let est = int(2) * graph_laplacian_value(&gm, &um, x).unwrap() / &den;
                ensure(est == int(2), format!("k={k} m={m} x={x}: estimate {est}"))?;
                let zero = int(2) * graph_laplacian_value(&gm, &hm, x).unwrap() / &den;
                ensure(zero.is_zero(), format!("k={k} m={m} x={x}: harmonic estimate {zero}"))?;
                junctions += 1;
            }
        }
        // The library estimator along one refinement chain, on the independent input.
        let x = VertexAddress::parse("0:1", h.d()).unwrap();
        let seq = delta_nu_estimate(&h, &u, &x).unwrap();
        ensure(
            seq.rows.len() == 6 && seq.rows.iter().all(|r| r.exact == Some(int(2))),
            "delta_nu_estimate sequence",
        )?;
        let seq = delta_nu_estimate(&h, &harm, &x).unwrap();
        ensure(seq.rows.iter().all(|r| r.exact == Some(int(0))), "harmonic sequence")?;
    }
    Ok(format!(
        "{junctions} junction evaluations exact, numerator from an independent pair"
    ))
}

fn c12_spline_integrals() -> Outcome {
    for k in 2..=4 {
        let p = gasket_params(k).unwrap();
        for m in 0..=4 {
            let g = build_level_graph(&p, m).unwrap();
            let total: Rational = (0..g.vertex_count()).map(|x| spline_integral_mu(&p, &g, x)).sum();
            ensure(total == int(1), format!("k={k} m={m}: Σ∫ψ dμ = {total}"))?;
        }
    }
    let h = hs(2);
    let mut worst = 0f64;
    for m in 0..=5 {
        let g = build_level_graph(&h.params, m).unwrap();
        let total: Rational = spline_integrals_nu(&h, &g).into_iter().sum();
        let dev = (to_f64(&total) - 2.0).abs();
        ensure(dev < 1e-10, format!("m={m}: Σ∫ψ dν′ = {total}"))?;
        worst = worst.max(dev);
    }
    Ok(format!("μ-mass 1 exact; ν′-mass 2 within {worst:.1e}"))
}

fn c13_transfer_operator() -> Outcome {
    let ec = energy_orthobasis(&hs(2)).unwrap();
    let op = transfer_operator_matrix(&ec).unwrap();
    ensure(
        op.rep_exact == Mat3::from_ints([[9, 0, 1], [0, 8, 0], [1, 0, 9]], 10),
        format!("rep = {}", op.rep_exact),
    )?;
    ensure(
        op.spectrum_exact == Some(vec![int(1), rat(4, 5), rat(4, 5)]),
        format!("spectrum {:?}", op.spectrum),
    )?;
    let defect = trace_preservation_defect(&op, 100, 7);
    ensure(defect < 1e-12, format!("trace defect {defect:e}"))?;
    Ok(format!("exact rep and spectrum; trace defect {defect:.1e}"))
}

fn c14_mixing_rate() -> Outcome {
    let ec = energy_orthobasis(&hs(2)).unwrap();
    let op = transfer_operator_matrix(&ec).unwrap();
    let a = word("0");
    let fit = mixing_rate_fit(&ec, &op, &a, &a, 5..=25, CorrelationMethod::Operator).unwrap();
    ensure((fit.rate - 0.8).abs() / 0.8 < 0.02, format!("rate {}", fit.rate))?;
    ensure(fit.constant <= 2.0, format!("constant {}", fit.constant))?;
    let mut worst = 0f64;
    for n in 0..=8 {
        let b = correlation_exact(&ec, &op, &a, &a, n, CorrelationMethod::Brute).unwrap();
        let o = correlation_exact(&ec, &op, &a, &a, n, CorrelationMethod::Operator).unwrap();
        worst = worst.max((b - o).abs());
    }
    ensure(worst < 1e-12, format!("brute vs operator {worst:e}"))?;
    Ok(format!(
        "rate {:.6}, constant {:.4}, brute/operator gap {worst:.1e}",
        fit.rate, fit.constant
    ))
}

fn c15_properties() -> Outcome {
    // Additivity, exact.
    for k in [2, 3] {
        let h = hs(k);
        let d = h.d();
        for m in 0..=3 {
            let parents = measure_table(&h, m).unwrap();
            let children = measure_table(&h, m + 1).unwrap();
            for (i, p) in parents.iter().enumerate() {
                let mut s = [int(0), int(0), int(0)];
                for c in &children[i * d..(i + 1) * d] {
                    for j in 0..3 {
                        s[j] += &c.nu[j];
                    }
                }
                ensure(s == p.nu, format!("k={k}: additivity fails at {}", p.word))?;
            }
        }
    }
    // Float vs rational cylinder measures to depth 8.
    let h = hs(2);
    let ec = energy_orthobasis(&h).unwrap();
    let mut worst = 0f64;
    for m in 0..=8 {
        for v in measure_table(&h, m).unwrap() {
            worst = worst.max((ec.cylinder(&v.word) - to_f64(&v.prob)).abs());
        }
    }
    ensure(worst < 1e-10, format!("float route {worst:e}"))?;
    // g-estimates are probability vectors.
    for seed in 0..10 {
        let x = random_word(25, 3, seed);
        let g: Vec<Vec<f64>> = (0..3).map(|s| g_function_estimate(&ec, s, &x).unwrap()).collect();
        for n in 0..=x.len() {
            let total: f64 = (0..3).map(|s| g[s][n]).sum();
            ensure(
                (total - 1.0).abs() < 1e-12 && (0..3).all(|s| g[s][n] >= 0.0),
                "g-estimate",
            )?;
        }
    }
    // Census formula vs constructed graphs.
    for k in 2..=6 {
        let p = gasket_params(k).unwrap();
        for m in 0..=4 {
            let g = build_level_graph(&p, m).unwrap();
            ensure(
                vertex_census(&p, m) == g.vertex_count().into(),
                format!("census k={k} m={m}"),
            )?;
        }
    }
    let _ = return_probability(&h.params).unwrap();
    Ok(format!(
        "additivity exact, float route {worst:.1e}, g-vectors, census k ≤ 6 m ≤ 4"
    ))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 15] = [
        ("renormalization constants", c01_renormalization),
        ("lower bound on r_k", c02_lower_bound),
        ("monte carlo return probability", c03_monte_carlo),
        ("standard laplacian prefactors", c04_prefactor_constants),
        ("harmonic extension rules", c05_extension_rules),
        ("M_n vector identity", c06_vector_identity),
        ("weighted identity", c07_weighted_identity),
        ("kusuoka cylinder table", c08_cylinder_table),
        ("decay of cell measures", c09_decay),
        ("partition identity", c10_partition_identity),
        ("energy laplacian formula", c11_energy_laplacian),
        ("spline integrals", c12_spline_integrals),
        ("transfer operator", c13_transfer_operator),
        ("mixing rate", c14_mixing_rate),
        ("property suite", c15_properties),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let started = std::time::Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                println!("FAIL {:>2} {name}: {detail} ({secs:.1}s)", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
