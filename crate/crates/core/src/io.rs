//! File formats: model JSON, frequency-response CSV, simulation traces and
//! Bode tables.
//!
//! Model files hold `{n, m, p, A, B, C, D, input_labels, output_labels, ts}`
//! with matrices flattened row-major and every number written with 17
//! significant digits, so a write/read cycle reproduces the model exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::analysis::BodeData;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::linsys::{DiscreteStateSpace, FrequencyResponse, StateSpace};
use crate::sim::SimTrace;

/// JSON formatter writing every float in scientific notation with 17
/// significant digits.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullPrecision;

impl Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serialize to pretty-ish JSON (one field per line) with full precision.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PrettyFull::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

/// Pretty printer that also keeps 17 significant digits.
#[derive(Debug, Default)]
struct PrettyFull<'a> {
    inner: serde_json::ser::PrettyFormatter<'a>,
}

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> std::io::Result<()> {
            self.inner.$name(w $(, $arg)*)
        })*
    };
}

impl Formatter for PrettyFull<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        FullPrecision.write_f64(writer, value)
    }

    forward!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        begin_object_value(),
        end_object_value(),
    );
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    n: usize,
    m: usize,
    p: usize,
    #[serde(rename = "A")]
    a: Vec<f64>,
    #[serde(rename = "B")]
    b: Vec<f64>,
    #[serde(rename = "C")]
    c: Vec<f64>,
    #[serde(rename = "D")]
    d: Vec<f64>,
    input_labels: Vec<String>,
    output_labels: Vec<String>,
    ts: Option<f64>,
}

/// A model read from disk: continuous (`ts` null) or discrete.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Continuous(StateSpace),
    Discrete(DiscreteStateSpace),
}

impl AnyModel {
    pub fn into_continuous(self) -> Result<StateSpace> {
        match self {
            AnyModel::Continuous(m) => Ok(m),
            AnyModel::Discrete(_) => Err(Error::Format("expected a continuous-time model (ts = null)".into())),
        }
    }

    pub fn into_discrete(self) -> Result<DiscreteStateSpace> {
        match self {
            AnyModel::Discrete(m) => Ok(m),
            AnyModel::Continuous(_) => Err(Error::Format("expected a discrete-time model (ts set)".into())),
        }
    }
}

fn flat(m: &Mat) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Format(format!("matrix {name} contains non-finite entries")));
    }
    Ok(())
}

fn model_file(a: &Mat, b: &Mat, c: &Mat, d: &Mat, inputs: &[String], outputs: &[String], ts: Option<f64>) -> Result<ModelFile> {
    let f = ModelFile {
        n: a.nrows(),
        m: b.ncols(),
        p: c.nrows(),
        a: flat(a),
        b: flat(b),
        c: flat(c),
        d: flat(d),
        input_labels: inputs.to_vec(),
        output_labels: outputs.to_vec(),
        ts,
    };
    for (name, v) in [("A", &f.a), ("B", &f.b), ("C", &f.c), ("D", &f.d)] {
        check_finite(name, v)?;
    }
    Ok(f)
}

pub fn model_to_json(model: &StateSpace) -> Result<String> {
    let f = model_file(model.a(), model.b(), model.c(), model.d(), model.input_labels(), model.output_labels(), None)?;
    to_json_string(&f)
}

pub fn discrete_model_to_json(model: &DiscreteStateSpace) -> Result<String> {
    let f = model_file(
        model.a(),
        model.b(),
        model.c(),
        model.d(),
        model.input_labels(),
        model.output_labels(),
        Some(model.ts()),
    )?;
    to_json_string(&f)
}

pub fn model_from_json(text: &str) -> Result<AnyModel> {
    let f: ModelFile = serde_json::from_str(text)?;
    let mat = |name: &str, rows: usize, cols: usize, v: &[f64]| -> Result<Mat> {
        if v.len() != rows * cols {
            return Err(Error::Format(format!("{name} has {} entries, expected {rows}x{cols}", v.len())));
        }
        Ok(Mat::from_row_slice(rows, cols, v))
    };
    let a = mat("A", f.n, f.n, &f.a)?;
    let b = mat("B", f.n, f.m, &f.b)?;
    let c = mat("C", f.p, f.n, &f.c)?;
    let d = mat("D", f.p, f.m, &f.d)?;
    match f.ts {
        None => Ok(AnyModel::Continuous(StateSpace::with_labels(a, b, c, d, f.input_labels, f.output_labels)?)),
        Some(ts) => Ok(AnyModel::Discrete(
            DiscreteStateSpace::new(a, b, c, d, ts)?.with_labels(f.input_labels, f.output_labels)?,
        )),
    }
}

pub fn write_model(path: &Path, model: &StateSpace) -> Result<()> {
    write_text(path, &model_to_json(model)?)
}

pub fn write_discrete_model(path: &Path, model: &DiscreteStateSpace) -> Result<()> {
    write_text(path, &discrete_model_to_json(model)?)
}

pub fn read_model(path: &Path) -> Result<AnyModel> {
    let text = fs::read_to_string(path).map_err(|e| io_context(path, e))?;
    model_from_json(&text).map_err(|e| match e {
        Error::Json(j) => Error::Parse { path: path.display().to_string(), line: j.line(), msg: j.to_string() },
        other => other,
    })
}

fn io_context(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Column layout of a frequency-response CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyLayout {
    RealImag,
    MagPhase,
}

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_string(), line, msg: msg.into() }
}

/// Parse frequency data; the header row selects the layout:
/// `freq_hz,real,imag` or `freq_hz,mag_db,phase_deg`.
pub fn frequency_from_csv(text: &str, path: &str) -> Result<FrequencyResponse> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = rdr.records();
    let header = loop {
        match records.next() {
            None => return Err(parse_err(path, 1, "empty file: expected a header row")),
            Some(rec) => {
                let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
                if rec.iter().all(|f| f.is_empty()) {
                    continue;
                }
                break rec;
            }
        }
    };
    let header_line = header.position().map_or(1, |p| p.line() as usize);
    let cols: Vec<String> = header.iter().map(|s| s.to_ascii_lowercase()).collect();
    let layout = match cols.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["freq_hz", "real", "imag"] => FrequencyLayout::RealImag,
        ["freq_hz", "mag_db", "phase_deg"] => FrequencyLayout::MagPhase,
        _ => {
            return Err(parse_err(
                path,
                header_line,
                format!("unrecognized header {:?}; expected freq_hz,real,imag or freq_hz,mag_db,phase_deg", header.iter().collect::<Vec<_>>()),
            ))
        }
    };
    let mut freqs = Vec::new();
    let mut vals = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rec.len() != 3 {
            return Err(parse_err(path, line, format!("expected 3 fields, found {}", rec.len())));
        }
        let mut nums = [0.0; 3];
        for (k, field) in rec.iter().enumerate() {
            nums[k] = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, line, format!("field {} ({field:?}) is not a finite number", k + 1)))?;
        }
        let f = nums[0];
        if !(f > 0.0) {
            return Err(parse_err(path, line, format!("frequency must be positive, got {f}")));
        }
        if let Some(&last) = freqs.last() {
            if !(f > last) {
                return Err(parse_err(path, line, format!("frequencies must be strictly increasing ({f} after {last})")));
            }
        }
        let z = match layout {
            FrequencyLayout::RealImag => Complex64::new(nums[1], nums[2]),
            FrequencyLayout::MagPhase => Complex64::from_polar(10f64.powf(nums[1] / 20.0), nums[2].to_radians()),
        };
        freqs.push(f);
        vals.push(z);
    }
    if freqs.is_empty() {
        return Err(parse_err(path, header_line, "no data rows after the header"));
    }
    FrequencyResponse::from_siso(freqs, vals)
}

pub fn read_frequency_csv(path: &Path) -> Result<FrequencyResponse> {
    let text = fs::read_to_string(path).map_err(|e| io_context(path, e))?;
    frequency_from_csv(&text, &path.display().to_string())
}

/// SISO data as `freq_hz,real,imag` with 17 significant digits.
pub fn frequency_to_csv(data: &FrequencyResponse) -> Result<String> {
    let vals = data.siso_values()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["freq_hz", "real", "imag"]).map_err(csv_err)?;
    for (f, z) in data.freqs_hz().iter().zip(vals) {
        w.write_record([format!("{f:.16e}"), format!("{:.16e}", z.re), format!("{:.16e}", z.im)]).map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_frequency_csv(path: &Path, data: &FrequencyResponse) -> Result<()> {
    write_text(path, &frequency_to_csv(data)?)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// `t_s,r,u,y,z` rows with 12 significant digits.
pub fn trace_to_csv(trace: &SimTrace) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t_s", "r", "u", "y", "z"]).map_err(csv_err)?;
    for k in 0..trace.len() {
        w.write_record(
            [trace.t[k], trace.r[k], trace.u[k], trace.y[k], trace.z[k]].map(|v| format!("{v:.11e}")),
        )
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn trace_from_csv(text: &str, path: &str) -> Result<SimTrace> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != ["t_s", "r", "u", "y", "z"] {
        return Err(parse_err(path, 1, "expected header t_s,r,u,y,z"));
    }
    let mut tr = SimTrace::default();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let v: Vec<f64> = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| parse_err(path, line, format!("bad number {f:?}"))))
            .collect::<Result<_>>()?;
        tr.t.push(v[0]);
        tr.r.push(v[1]);
        tr.u.push(v[2]);
        tr.y.push(v[3]);
        tr.z.push(v[4]);
    }
    if tr.t.len() >= 2 {
        tr.ts = tr.t[1] - tr.t[0];
    }
    Ok(tr)
}

/// `freq_hz,mag_db,phase_deg` rows with 12 significant digits.
pub fn bode_to_csv(bode: &BodeData) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["freq_hz", "mag_db", "phase_deg"]).map_err(csv_err)?;
    for ((f, m), p) in bode.freqs_hz().iter().zip(&bode.mag_db).zip(&bode.phase_deg) {
        w.write_record([f, m, p].map(|v| format!("{v:.11e}"))).map_err(csv_err)?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::logspace;

    fn model() -> StateSpace {
        StateSpace::with_labels(
            Mat::from_row_slice(2, 2, &[-0.1, 1.0 / 3.0, -7.0, -2.0e-9]),
            Mat::from_row_slice(2, 1, &[0.0, std::f64::consts::PI]),
            Mat::from_row_slice(1, 2, &[1.0e300, -1.0e-300]),
            Mat::from_element(1, 1, 0.1 + 0.2),
            vec!["u".into()],
            vec!["y".into()],
        )
        .unwrap()
    }

    #[test]
    fn model_round_trip_is_exact() {
        let m = model();
        let text = model_to_json(&m).unwrap();
        assert!(text.contains("\"ts\": null"));
        assert!(text.contains("3.3333333333333331e-1"));
        let back = model_from_json(&text).unwrap().into_continuous().unwrap();
        assert_eq!(back, m);
        let d = DiscreteStateSpace::new(m.a().clone(), m.b().clone(), m.c().clone(), m.d().clone(), 2e-5)
            .unwrap()
            .with_labels_of(&m);
        let back = model_from_json(&discrete_model_to_json(&d).unwrap()).unwrap().into_discrete().unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn model_rejects_wrong_sizes() {
        let text = r#"{"n":2,"m":1,"p":1,"A":[1,2,3],"B":[0,1],"C":[1,0],"D":[0],
            "input_labels":["u"],"output_labels":["y"],"ts":null}"#;
        assert!(matches!(model_from_json(text), Err(Error::Format(_))));
        assert!(model_to_json(&StateSpace::static_gain(Mat::from_element(1, 1, f64::NAN))).is_err());
    }

    #[test]
    fn frequency_csv_both_layouts() {
        let f = logspace(1.0, 100.0, 5);
        let vals: Vec<Complex64> = f.iter().map(|f| Complex64::new(1.0, 0.0) / Complex64::new(1.0, f / 10.0)).collect();
        let data = FrequencyResponse::from_siso(f.clone(), vals.clone()).unwrap();
        let text = frequency_to_csv(&data).unwrap();
        assert!(text.starts_with("freq_hz,real,imag\n"));
        assert_eq!(frequency_from_csv(&text, "x").unwrap(), data);

        let mut mp = String::from("# comment\nfreq_hz, mag_db, phase_deg\n");
        for (f, z) in f.iter().zip(&vals) {
            mp.push_str(&format!("{f},{},{}\n", 20.0 * z.norm().log10(), z.arg().to_degrees()));
        }
        let back = frequency_from_csv(&mp, "x").unwrap().siso_values().unwrap();
        for (a, b) in back.iter().zip(&vals) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn frequency_csv_errors_carry_lines() {
        let err = |t: &str| match frequency_from_csv(t, "d.csv") {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(err(""), 1);
        assert_eq!(err("freq_hz,real,imag\n"), 1);
        assert_eq!(err("freq,real,imag\n1,2,3\n"), 1);
        assert_eq!(err("freq_hz,real,imag\n1,0,0\n2,x,0\n"), 3);
        assert_eq!(err("freq_hz,real,imag\n1,0,0\n1,0,0\n"), 3);
        assert_eq!(err("freq_hz,real,imag\n1,0\n"), 2);
    }

    #[test]
    fn trace_csv_round_trip() {
        let tr = SimTrace {
            ts: 0.5,
            t: vec![0.0, 0.5],
            r: vec![0.1, 0.1],
            u: vec![0.0, -0.123456789012],
            y: vec![0.0, 1.0 / 3.0],
            z: vec![0.0, 2e-9],
            noise: None,
        };
        let text = trace_to_csv(&tr).unwrap();
        assert!(text.starts_with("t_s,r,u,y,z\n"));
        let back = trace_from_csv(&text, "t").unwrap();
        assert!((back.y[1] - 1.0 / 3.0).abs() < 1e-11);
        assert_eq!(back.len(), 2);
    }

    proptest::proptest! {
        #[test]
        fn any_finite_model_round_trips_bit_exactly(
            vals in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 9),
            ts in proptest::option::of(1e-9f64..1.0),
        ) {
            let a = Mat::from_row_slice(2, 2, &vals[0..4]);
            let b = Mat::from_row_slice(2, 1, &vals[4..6]);
            let c = Mat::from_row_slice(1, 2, &vals[6..8]);
            let d = Mat::from_element(1, 1, vals[8]);
            match ts {
                None => {
                    let m = StateSpace::new(a, b, c, d).unwrap();
                    let back = model_from_json(&model_to_json(&m).unwrap()).unwrap().into_continuous().unwrap();
                    proptest::prop_assert_eq!(back, m);
                }
                Some(ts) => {
                    let m = DiscreteStateSpace::new(a, b, c, d, ts).unwrap();
                    let back = model_from_json(&discrete_model_to_json(&m).unwrap()).unwrap().into_discrete().unwrap();
                    proptest::prop_assert_eq!(back, m);
                }
            }
        }
    }
}
