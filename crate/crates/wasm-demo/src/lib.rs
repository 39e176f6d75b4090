//! Browser bindings: Λ-scan, weighted-norm band and q-band for built-in or user-supplied families.
//!
//! Every export takes a family argument that is either a fixture name or a JSON family object, and
//! returns a JSON string.

use blockjacobi::coeffs::CoefficientFamily;
use blockjacobi::error::Error;
use blockjacobi::opcore::DEFAULT_DEFINITENESS_EPS;
use blockjacobi::pipeline::{fixture, parse_family, FamilySpec, FIXTURES};
use blockjacobi::sampling::unit_sphere_samples;
use blockjacobi::turan::{
    asymptotic_band, extract_periodic_limits, lambda_scan_window, q_scan, PeriodicLimitData, DEFAULT_BURN_IN,
};
use num_complex::Complex64;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest horizon accepted from the page, to keep the tab responsive.
pub const MAX_HORIZON: usize = 50_000;
/// Largest number of points returned per plotted trace.
const MAX_TRACE_POINTS: usize = 2_000;

fn js_error(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn resolve(family: &str) -> Result<(FamilySpec, usize), Error> {
    match fixture(family.trim()) {
        Some(config) => Ok((config.family, config.horizon)),
        None => Ok((parse_family(family.as_bytes())?, blockjacobi::coeffs::DEFAULT_HORIZON)),
    }
}

fn horizon_or(default: usize, requested: usize) -> Result<usize, Error> {
    let h = if requested == 0 { default } else { requested };
    if h > MAX_HORIZON {
        return Err(Error::InvalidInput(format!("horizon {h} exceeds the demo limit {MAX_HORIZON}")));
    }
    Ok(h)
}

fn limits(family: &str, horizon: usize) -> Result<(PeriodicLimitData, usize), Error> {
    let (spec, default) = resolve(family)?;
    let horizon = horizon_or(default, horizon)?;
    let fam = spec.build()?;
    let lim = extract_periodic_limits(&fam, spec.period, horizon)?;
    lim.require_converged()?;
    Ok((lim, horizon))
}

/// Evenly thinned `(n, value)` pairs of a trace.
fn thin(start: usize, values: &[f64]) -> Vec<(usize, f64)> {
    let step = values.len().div_ceil(MAX_TRACE_POINTS).max(1);
    values.iter().enumerate().step_by(step).map(|(i, v)| (start + i, *v)).collect()
}

/// Fixture names and summaries as a JSON array.
#[wasm_bindgen]
pub fn fixtures() -> String {
    let list: Vec<_> = FIXTURES.iter().map(|(name, summary)| json!({"name": name, "summary": summary})).collect();
    serde_json::Value::Array(list).to_string()
}

/// Λ-scan of the limit form over `[lo, hi]`; `horizon = 0` uses the fixture default.
#[wasm_bindgen]
pub fn lambda_scan(family: &str, lo: f64, hi: f64, grid: usize, horizon: usize) -> Result<String, JsError> {
    let (lim, horizon) = limits(family, horizon).map_err(js_error)?;
    let set = lambda_scan_window(&lim, 0, (lo, hi), grid, DEFAULT_DEFINITENESS_EPS).map_err(js_error)?;
    Ok(json!({"horizon": horizon, "set": set}).to_string())
}

/// Positivity region in the potential multiplier `q` at fixed `λ`.
#[wasm_bindgen]
pub fn q_band(
    family: &str,
    q_ref: f64,
    lambda: f64,
    lo: f64,
    hi: f64,
    grid: usize,
    horizon: usize,
) -> Result<String, JsError> {
    let (lim, horizon) = limits(family, horizon).map_err(js_error)?;
    let set = q_scan(&lim, q_ref, lambda, (lo, hi), grid, DEFAULT_DEFINITENESS_EPS).map_err(js_error)?;
    Ok(json!({"horizon": horizon, "set": set}).to_string())
}

/// Band constants of `‖a_n‖(‖u_{n−1}‖² + ‖u_n‖²)` over `count` random unit initial conditions,
/// with thinned traces for plotting.
#[wasm_bindgen]
pub fn band(family: &str, re: f64, im: f64, count: usize, seed: u64, horizon: usize) -> Result<String, JsError> {
    let run = || -> Result<String, Error> {
        let (spec, default) = resolve(family)?;
        let horizon = horizon_or(default, horizon)?;
        if count == 0 || count > 100 {
            return Err(Error::InvalidInput("count must be between 1 and 100".into()));
        }
        let fam: CoefficientFamily = spec.build()?;
        let alphas = unit_sphere_samples(2 * fam.dim(), count, seed);
        let report = asymptotic_band(&fam, Complex64::new(re, im), &alphas, horizon, DEFAULT_BURN_IN)?;
        let traces: Vec<_> = report.traces.iter().map(|t| thin(t.start, &t.values)).collect();
        Ok(json!({
            "horizon": horizon,
            "c1": report.c1,
            "c2": report.c2,
            "ratio": report.ratio,
            "overflow": report.overflow,
            "traces": traces,
        })
        .to_string())
    };
    run().map_err(js_error)
}
