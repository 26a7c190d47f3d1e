//! Python bindings: the reference machine, circuit synthesis, counting and
//! the resource estimator, exposed for notebook-style exploration.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use revinv::estimate;
use revinv::ir::CountSink;
use revinv::model;
use revinv::synth::{self, SynthTarget, Synthesizer};
use std::collections::HashMap;

fn to_value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Modular inverse from the step machine (runs the full schedule and the
/// reverse pass, asserting the machine returns to its initial state).
#[pyfunction]
fn mod_inverse(p: u64, x: u64) -> PyResult<u64> {
    let inst = model::ProblemInstance::new(p, x).map_err(to_value_err)?;
    Ok(model::run_inversion(&inst))
}

/// The step-by-step execution trace as a TSV string.
#[pyfunction]
fn trace_tsv(p: u64, x: u64) -> PyResult<String> {
    let inst = model::ProblemInstance::new(p, x).map_err(to_value_err)?;
    Ok(model::trace_tsv(&model::classical_trace(&inst)))
}

/// Active step count 4*sum(bitlen(q_i)) for the instance.
#[pyfunction]
fn active_steps(p: u64, x: u64) -> PyResult<u32> {
    let inst = model::ProblemInstance::new(p, x).map_err(to_value_err)?;
    Ok(model::active_step_count(&inst))
}

/// Schedule length used for circuits of this modulus.
#[pyfunction]
fn schedule_steps(p: u64) -> PyResult<u32> {
    if !model::is_odd_prime(p) {
        return Err(PyValueError::new_err(format!("{p} is not an odd prime")));
    }
    Ok(model::schedule_steps(p))
}

/// Simulate the synthesized inversion circuit for one input.
#[pyfunction]
fn simulate_inversion(p: u64, x: u64) -> PyResult<u64> {
    if !model::is_odd_prime(p) || model::bitlen(p) < 3 {
        return Err(PyValueError::new_err(format!(
            "{p} is not a usable odd prime"
        )));
    }
    if x == 0 || x >= p {
        return Err(PyValueError::new_err(format!("x = {x} out of range")));
    }
    let s = Synthesizer::new(SynthTarget::Modulus(p));
    let circuit = s.inversion_circuit();
    let (result, out) = synth::simulate_inversion(&s, &circuit, x);
    for (i, &wire) in s.layout.input.iter().enumerate() {
        if out.get(wire) != (x >> i & 1 == 1) {
            return Err(PyRuntimeError::new_err("input register not preserved"));
        }
    }
    Ok(result)
}

/// Toffoli/CNOT/X counts of the lowered inversion circuit for size n
/// (streamed; nothing is materialized).
#[pyfunction]
fn gate_counts(n: u32) -> PyResult<HashMap<String, u64>> {
    if n < 3 {
        return Err(PyValueError::new_err("need n >= 3"));
    }
    let s = Synthesizer::new(SynthTarget::Size(n));
    let mut sink = CountSink::new();
    s.emit_inversion(&mut sink);
    let r = sink.into_report(s.layout.total_width());
    let mut m = HashMap::new();
    m.insert("toffoli".into(), r.toffoli);
    m.insert("cnot".into(), r.cnot);
    m.insert("x".into(), r.x);
    m.insert("width".into(), r.width as u64);
    Ok(m)
}

/// Width of the inversion machinery: 3n + 4*floor(log2 n) + 20.
#[pyfunction]
fn inversion_width(n: u32) -> PyResult<u64> {
    if n < 3 {
        return Err(PyValueError::new_err("need n >= 3"));
    }
    Ok(estimate::inversion_width(n))
}

/// Full-algorithm qubit count: 5n + 4*floor(log2 n) + 21.
#[pyfunction]
fn ecdlp_width(n: u32) -> PyResult<u64> {
    if n < 3 {
        return Err(PyValueError::new_err("need n >= 3"));
    }
    Ok(estimate::ecdlp_width(n))
}

/// Leading-order Toffoli estimate 2(80c-13) n^2 log2 n.
#[pyfunction]
fn toffoli_leading(n: u32) -> PyResult<f64> {
    if n < 8 {
        return Err(PyValueError::new_err("need n >= 8"));
    }
    Ok(estimate::inversion_toffoli_leading(n))
}

/// Per-step active windows (paper formulas and synthesized envelopes).
#[pyfunction]
fn active_windows(n: u32, t: u32) -> PyResult<HashMap<String, u32>> {
    if n < 3 || t < 1 {
        return Err(PyValueError::new_err("need n >= 3 and t >= 1"));
    }
    let w = synth::active_windows(n, t);
    let mut m = HashMap::new();
    for (k, v) in [
        ("k1", w.k1),
        ("K1", w.kk1),
        ("k2", w.k2),
        ("K2", w.kk2),
        ("k3", w.k3),
        ("K3", w.kk3),
        ("k4", w.k4),
        ("K4", w.kk4),
        ("k5", w.k5),
        ("K5", w.kk5),
        ("k1_emitted", w.k1e),
        ("k2_emitted", w.k2e),
        ("k4_emitted", w.k4e),
        ("k5_emitted", w.k5e),
        ("K3_wide", w.kk3_wide),
        ("K5_wide", w.kk5_wide),
    ] {
        m.insert(k.to_string(), v);
    }
    Ok(m)
}

/// The serialized (text-format) inversion circuit for a small modulus.
#[pyfunction]
fn synthesize_text(p: u64) -> PyResult<String> {
    if !model::is_odd_prime(p) || model::bitlen(p) < 3 {
        return Err(PyValueError::new_err(format!(
            "{p} is not a usable odd prime"
        )));
    }
    if p >= 1 << 13 {
        return Err(PyValueError::new_err("text synthesis capped at p < 2^13"));
    }
    let s = Synthesizer::new(SynthTarget::Modulus(p));
    s.inversion_circuit().serialize_text().map_err(to_value_err)
}

#[pymodule]
fn revinv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(mod_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(trace_tsv, m)?)?;
    m.add_function(wrap_pyfunction!(active_steps, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_steps, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_inversion, m)?)?;
    m.add_function(wrap_pyfunction!(gate_counts, m)?)?;
    m.add_function(wrap_pyfunction!(inversion_width, m)?)?;
    m.add_function(wrap_pyfunction!(ecdlp_width, m)?)?;
    m.add_function(wrap_pyfunction!(toffoli_leading, m)?)?;
    m.add_function(wrap_pyfunction!(active_windows, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_text, m)?)?;
    Ok(())
}
