//! Tables and JSON documents written by the runner. Floats are printed with
//! 12 significant digits so repeated runs are byte-identical.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::circuit::DerivedParams;
use crate::config::Format;
use crate::error::{Error, Result};
use crate::gate::{GateResult, LeakageBudget};
use crate::pulse::{GapProfile, PulseSchedule};
use crate::spectrum::{format_label, LabeledSpectrum, T2Estimate, ZZSweep};
use crate::stc::StcMap;
use crate::units::{to_ghz, to_mhz, to_ns, to_pi_units, FEMTO};

/// `x` with 12 significant digits, trailing zeros trimmed; scientific
/// notation outside 1e-5 ≤ |x| < 1e12.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mant));
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_sig(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => {
                // Round through the printed form so CSV and JSON agree.
                Value::from(fmt_sig(*x).parse::<f64>().expect("formatted float parses"))
            }
            Cell::Num(x) => Value::String(fmt_sig(*x)),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

/// Column-named rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.iter().map(Cell::render).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let mut m = Map::new();
                    for (c, v) in self.columns.iter().zip(r) {
                        m.insert(c.clone(), v.to_json());
                    }
                    Value::Object(m)
                })
                .collect(),
        )
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => pretty(&self.to_json()),
        }
    }
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

/// File contents to be written under the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn table(stem: &str, table: &Table, format: Format) -> Self {
        let ext = match format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        Self {
            name: format!("{stem}.{ext}"),
            contents: table.render(format),
        }
    }

    pub fn json(name: &str, value: &Value) -> Self {
        Self {
            name: name.into(),
            contents: pretty(value),
        }
    }
}

/// Writes through a temporary file and rename so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    artifacts
        .iter()
        .map(|a| {
            let p = dir.join(&a.name);
            write_atomic(&p, &a.contents)?;
            Ok(p)
        })
        .collect()
}

/// Rounds every float in a serializable value through [`fmt_sig`].
pub fn rounded_json<T: Serialize>(value: &T) -> Result<Value> {
    fn walk(v: Value) -> Value {
        match v {
            Value::Number(n) if n.is_f64() => {
                let x = n.as_f64().expect("f64 number");
                Value::from(fmt_sig(x).parse::<f64>().expect("formatted float parses"))
            }
            Value::Array(a) => Value::Array(a.into_iter().map(walk).collect()),
            Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, walk(v))).collect()),
            other => other,
        }
    }
    let v = serde_json::to_value(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(walk(v))
}

pub fn derived_params_table(d: &DerivedParams) -> Table {
    let mut t = Table::new(&["quantity", "value", "unit"]);
    for i in 0..4 {
        for j in i..4 {
            t.push(vec![
                format!("C{}{}", i + 1, j + 1).into(),
                (d.m[(i, j)] / FEMTO).into(),
                "fF".into(),
            ]);
        }
    }
    for i in 0..4 {
        t.push(vec![
            format!("omega{}/2pi", i + 1).into(),
            to_ghz(d.omega_design[i]).into(),
            "GHz".into(),
        ]);
    }
    for i in 0..4 {
        for j in i..4 {
            t.push(vec![
                format!("W{}{}/2pi", i + 1, j + 1).into(),
                to_mhz(d.w[(i, j)]).into(),
                "MHz".into(),
            ]);
        }
    }
    t.push(vec![
        "omega_C34/2pi".into(),
        to_ghz(d.omega_c34).into(),
        "GHz".into(),
    ]);
    for k in 0..5 {
        t.push(vec![
            format!("omega_J{}/2pi", k + 1).into(),
            to_ghz(d.omega_j[k]).into(),
            "GHz".into(),
        ]);
    }
    for k in 0..5 {
        t.push(vec![
            format!("I_c{}", k + 1).into(),
            (d.critical_current[k] * 1e9).into(),
            "nA".into(),
        ]);
    }
    for i in 0..4 {
        for j in i + 1..4 {
            t.push(vec![
                format!("g{}{}/2pi", i + 1, j + 1).into(),
                to_mhz(d.g[(i, j)]).into(),
                "MHz".into(),
            ]);
        }
    }
    t
}

pub fn zz_table(s: &ZZSweep) -> Table {
    let mut t = Table::new(&["theta_ex_over_pi", "omega4_GHz", "zeta_zz_over_2pi_MHz"]);
    for (row, &w4) in s.omega4.iter().enumerate() {
        for (i, &th) in s.thetas.iter().enumerate() {
            t.push(vec![
                to_pi_units(th).into(),
                to_ghz(w4).into(),
                to_mhz(s.zeta[row][i]).into(),
            ]);
        }
    }
    t
}

/// One row per refined zero; `None` marks a row where ζ vanishes identically.
pub fn zz_zero_table(rows: &[(f64, Option<Vec<f64>>)]) -> Table {
    let mut t = Table::new(&["omega4_GHz", "theta_zero_over_pi", "degenerate"]);
    for (w4, roots) in rows {
        match roots {
            Some(r) => {
                for &x in r {
                    t.push(vec![
                        to_ghz(*w4).into(),
                        to_pi_units(x).into(),
                        Cell::Int(0),
                    ]);
                }
            }
            None => t.push(vec![to_ghz(*w4).into(), f64::NAN.into(), Cell::Int(1)]),
        }
    }
    t
}

pub fn levels_table(spectra: &[LabeledSpectrum]) -> Table {
    let mut t = Table::new(&["theta_ex_over_pi", "label", "energy_over_h_GHz"]);
    for s in spectra {
        for l in &s.levels {
            t.push(vec![
                to_pi_units(s.theta_ex).into(),
                format_label(&l.label).into(),
                to_ghz(l.energy).into(),
            ]);
        }
    }
    t
}

pub fn t2_table(estimates: &[T2Estimate]) -> Table {
    let mut t = Table::new(&["theta_ex_over_pi", "T2_q1_us", "T2_q2_us"]);
    for e in estimates {
        t.push(vec![
            to_pi_units(e.theta_ex).into(),
            (e.t2[0] * 1e6).into(),
            (e.t2[1] * 1e6).into(),
        ]);
    }
    t
}

pub fn gap_profile_table(p: &GapProfile) -> Table {
    let mut t = Table::new(&[
        "theta_ex_over_pi",
        "omega_gap_over_2pi_GHz",
        "time_gap_over_2pi_GHz",
        "theta_mix_rad",
    ]);
    for k in 0..p.len() {
        t.push(vec![
            to_pi_units(p.theta[k]).into(),
            to_ghz(p.omega_gap[k]).into(),
            to_ghz(p.time_gap[k]).into(),
            p.theta_mix[k].into(),
        ]);
    }
    t
}

pub fn pulse_table(s: &PulseSchedule) -> Table {
    let mut t = Table::new(&["t_ns", "theta_ex_over_pi", "theta_dot_ex_rad_per_ns"]);
    for p in &s.samples {
        t.push(vec![
            to_ns(p.t).into(),
            to_pi_units(p.theta_ex).into(),
            (p.theta_dot_ex * 1e-9).into(),
        ]);
    }
    t
}

pub fn pulse_header(s: &PulseSchedule, p_e: f64) -> Value {
    let r = |x: f64| Value::from(fmt_sig(x).parse::<f64>().expect("formatted float parses"));
    json!({
        "A": r(s.shape_a),
        "s_f": r(s.s_f),
        "T_g_ns": r(to_ns(s.gate_time)),
        "g_over_2pi_MHz": r(to_mhz(s.g)),
        "theta_ex_g_over_pi": r(s.theta_ex_g / PI),
        "theta0_rad": r(s.theta0),
        "theta1_rad": r(s.theta1),
        "P_e": r(p_e),
    })
}

/// `theta_unwrapped` is θ_CPHASE continued across the sweep.
pub fn gate_table(results: &[GateResult], theta_unwrapped: &[f64]) -> Table {
    let mut t = Table::new(&[
        "T_g_ns",
        "theta_cphase_rad",
        "avg_infidelity",
        "leak_00",
        "leak_01",
        "leak_10",
        "leak_11",
    ]);
    for (r, &th) in results.iter().zip(theta_unwrapped) {
        let mut row: Vec<Cell> = vec![
            to_ns(r.gate_time).into(),
            th.into(),
            (1.0 - r.avg_fidelity).into(),
        ];
        row.extend(r.leakage.total.iter().map(|&l| Cell::Num(l)));
        t.push(row);
    }
    t
}

fn leakage_json(l: &LeakageBudget) -> Value {
    let names = ["00", "01", "10", "11"];
    let inputs: Vec<Value> = (0..4)
        .map(|b| {
            let channels: Map<String, Value> = l
                .channel_labels
                .iter()
                .zip(&l.channels[b])
                .map(|(lab, &p)| (format_label(lab), Cell::Num(p).to_json()))
                .collect();
            json!({
                "input": names[b],
                "total": Cell::Num(l.total[b]).to_json(),
                "channels": channels,
                "remainder": Cell::Num(l.remainder[b]).to_json(),
            })
        })
        .collect();
    Value::Array(inputs)
}

pub fn gate_json(r: &GateResult) -> Value {
    let c = |x: f64| Cell::Num(x).to_json();
    let mat = |m: &nalgebra::Matrix4<crate::C64>| -> Value {
        Value::Array(
            (0..4)
                .map(|a| {
                    Value::Array(
                        (0..4)
                            .map(|b| json!([c(m[(a, b)].re), c(m[(a, b)].im)]))
                            .collect(),
                    )
                })
                .collect(),
        )
    };
    json!({
        "T_g_ns": c(to_ns(r.gate_time)),
        "theta_cphase_rad": c(r.theta_cphase),
        "avg_fidelity": c(r.avg_fidelity),
        "avg_infidelity": c(1.0 - r.avg_fidelity),
        "leakage_fraction_of_infidelity": r.leakage_fractions().iter().map(|&x| c(x)).collect::<Vec<_>>(),
        "u_prime_re_im": mat(&r.u_prime),
        "u_id_re_im": mat(&r.u_id),
        "leakage": leakage_json(&r.leakage),
        "dt_ns": c(to_ns(r.dt)),
        "certificate": r.certificate.map(c),
    })
}

pub fn stc_table(m: &StcMap) -> Table {
    let mut t = Table::new(&[
        "omega2_GHz",
        "omega3_GHz",
        "zeta_zz_over_2pi_MHz",
        "in_straddling_band",
    ]);
    for (i, &w2) in m.omega2.iter().enumerate() {
        for (j, &w3) in m.omega3.iter().enumerate() {
            t.push(vec![
                to_ghz(w2).into(),
                to_ghz(w3).into(),
                to_mhz(m.zeta(i, j)).into(),
                Cell::Int(m.in_straddling_band(i) as i64),
            ]);
        }
    }
    t
}
