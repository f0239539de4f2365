//! JSON (`openext/v1`) and CSV encodings.
//!
//! Complex scalars are `[re, im]` pairs (plain numbers are accepted on
//! input), matrices are arrays of rows. Floats are written in shortest
//! round-trip form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extension::KernelSamples;
use crate::hamiltonian::ScanRow;
use crate::model::{ConservativeSystem, OpenSystem, PointMeasure};
use crate::numerics::{c64, CMatrix, CVector, HermitianOperator, Subspace, ToleranceConfig, C64};
use crate::simulate::Trajectory;

pub const SCHEMA: &str = "openext/v1";

/// A complex entry: `[re, im]` or a bare real number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Complex([f64; 2]),
    Real(f64),
}

impl Scalar {
    fn value(self) -> C64 {
        match self {
            Scalar::Complex([re, im]) => c64(re, im),
            Scalar::Real(re) => c64(re, 0.0),
        }
    }
}

pub type MatrixJson = Vec<Vec<Scalar>>;

pub fn complex_to_json(z: C64) -> Scalar {
    Scalar::Complex([z.re, z.im])
}

pub fn matrix_to_json(m: &CMatrix) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| complex_to_json(m[(i, j)])).collect())
        .collect()
}

/// Parses nested rows; `cols` fixes the width of an empty-row matrix.
pub fn matrix_from_json(rows: &MatrixJson, cols_if_empty: usize) -> Result<CMatrix> {
    let r = rows.len();
    let c = rows.first().map(|row| row.len()).unwrap_or(cols_if_empty);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Validation("matrix rows have different lengths".into()));
    }
    let m = CMatrix::from_fn(r, c, |i, j| rows[i][j].value());
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Validation("matrix contains non-finite entries".into()));
    }
    Ok(m)
}

pub fn vector_to_json(v: &CVector) -> Vec<Scalar> {
    v.iter().map(|&z| complex_to_json(z)).collect()
}

pub fn vector_from_json(v: &[Scalar]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|s| s.value()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceJson {
    pub ambient_dim: usize,
    pub dim: usize,
    /// Columns of the orthonormal frame, one array per basis vector.
    pub basis: Vec<Vec<Scalar>>,
}

pub fn subspace_to_json(s: &Subspace) -> SubspaceJson {
    SubspaceJson {
        ambient_dim: s.ambient_dim(),
        dim: s.dim(),
        basis: (0..s.dim())
            .map(|j| vector_to_json(&s.frame().column(j).clone_owned()))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemJson {
    #[serde(default = "schema_name")]
    pub schema: String,
    pub n1: usize,
    pub n2: usize,
    pub omega: MatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomJson {
    pub omega: f64,
    pub mass: MatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureJson {
    #[serde(default = "schema_name")]
    pub schema: String,
    pub dim: usize,
    pub atoms: Vec<AtomJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenSystemJson {
    #[serde(default = "schema_name")]
    pub schema: String,
    pub omega1: MatrixJson,
    pub kernel: MeasureJson,
}

fn schema_name() -> String {
    SCHEMA.to_string()
}

fn check_schema(name: &str) -> Result<()> {
    if name != SCHEMA {
        return Err(Error::Validation(format!("unsupported schema `{name}`, expected `{SCHEMA}`")));
    }
    Ok(())
}

impl SystemJson {
    pub fn from_system(s: &ConservativeSystem) -> Self {
        Self {
            schema: schema_name(),
            n1: s.n1(),
            n2: s.n2(),
            omega: matrix_to_json(s.omega().matrix()),
        }
    }

    /// Raw `(n1, n2, Ω)` without Hermiticity checks, for validation reports.
    pub fn raw(&self) -> Result<(usize, usize, CMatrix)> {
        check_schema(&self.schema)?;
        Ok((self.n1, self.n2, matrix_from_json(&self.omega, self.n1 + self.n2)?))
    }

    pub fn to_system(&self, tol: &ToleranceConfig) -> Result<ConservativeSystem> {
        let (n1, n2, omega) = self.raw()?;
        if omega.nrows() != n1 + n2 {
            return Err(Error::Validation(format!(
                "n1 + n2 = {} but Ω has {} rows",
                n1 + n2,
                omega.nrows()
            )));
        }
        ConservativeSystem::from_omega(n1, omega, tol)
    }
}

impl MeasureJson {
    pub fn from_measure(m: &PointMeasure) -> Self {
        Self {
            schema: schema_name(),
            dim: m.dim(),
            atoms: m
                .atoms()
                .iter()
                .map(|a| AtomJson {
                    omega: a.omega,
                    mass: matrix_to_json(a.mass.matrix()),
                })
                .collect(),
        }
    }

    pub fn raw(&self) -> Result<Vec<(f64, CMatrix)>> {
        check_schema(&self.schema)?;
        self.atoms
            .iter()
            .map(|a| Ok((a.omega, matrix_from_json(&a.mass, self.dim)?)))
            .collect()
    }

    /// Measure with the positivity (dissipation) check.
    pub fn to_measure(&self, tol: &ToleranceConfig) -> Result<PointMeasure> {
        PointMeasure::new(self.dim, self.raw()?, tol)
    }

    /// Measure without the positivity check.
    pub fn to_measure_unchecked(&self, tol: &ToleranceConfig) -> Result<PointMeasure> {
        PointMeasure::from_atoms(self.dim, self.raw()?, tol)
    }
}

impl OpenSystemJson {
    pub fn from_open(o: &OpenSystem) -> Self {
        Self {
            schema: schema_name(),
            omega1: matrix_to_json(o.omega1().matrix()),
            kernel: MeasureJson::from_measure(o.kernel()),
        }
    }

    pub fn to_open(&self, tol: &ToleranceConfig) -> Result<OpenSystem> {
        check_schema(&self.schema)?;
        let omega1 = HermitianOperator::new(matrix_from_json(&self.omega1, self.kernel.dim)?, tol)?;
        OpenSystem::new(omega1, self.kernel.to_measure(tol)?)
    }
}

/// Any of the three input documents, recognized by its keys.
#[derive(Debug, Clone, PartialEq)]
pub enum Document {
    System(SystemJson),
    Measure(MeasureJson),
    Open(OpenSystemJson),
}

pub fn parse_document(text: &str) -> Result<Document> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let object = value
        .as_object()
        .ok_or_else(|| Error::Validation("top-level JSON value must be an object".into()))?;
    if object.contains_key("omega1") {
        Ok(Document::Open(serde_json::from_value(value)?))
    } else if object.contains_key("atoms") {
        Ok(Document::Measure(serde_json::from_value(value)?))
    } else if object.contains_key("omega") {
        Ok(Document::System(serde_json::from_value(value)?))
    } else {
        Err(Error::Validation(
            "unrecognized document: expected a system (omega), measure (atoms) or open system (omega1)".into(),
        ))
    }
}

pub fn parse_system(text: &str, tol: &ToleranceConfig) -> Result<ConservativeSystem> {
    match parse_document(text)? {
        Document::System(s) => s.to_system(tol),
        _ => Err(Error::Validation("expected a conservative system document".into())),
    }
}

pub fn parse_measure(text: &str, tol: &ToleranceConfig) -> Result<PointMeasure> {
    match parse_document(text)? {
        Document::Measure(m) => m.to_measure(tol),
        _ => Err(Error::Validation("expected a measure document".into())),
    }
}

pub fn system_to_string(s: &ConservativeSystem) -> String {
    serde_json::to_string_pretty(&SystemJson::from_system(s)).expect("serializable")
}

pub fn measure_to_string(m: &PointMeasure) -> String {
    serde_json::to_string_pretty(&MeasureJson::from_measure(m)).expect("serializable")
}

fn csv_error(e: csv::Error) -> Error {
    Error::Validation(format!("csv: {e}"))
}

fn write_rows(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(&header).map_err(csv_error)?;
    for row in rows {
        writer.write_record(&row).map_err(csv_error)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Validation(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("ascii output"))
}

/// Header `t,re_00,im_00,re_01,…` in row-major order.
pub fn kernel_to_csv(samples: &KernelSamples) -> Result<String> {
    let n = samples.dim();
    let mut header = vec!["t".to_string()];
    for i in 0..n {
        for j in 0..n {
            header.push(format!("re_{i}{j}"));
            header.push(format!("im_{i}{j}"));
        }
    }
    let rows = samples.times().iter().zip(samples.values()).map(|(t, a)| {
        let mut row = vec![t.to_string()];
        for i in 0..n {
            for j in 0..n {
                row.push(a[(i, j)].re.to_string());
                row.push(a[(i, j)].im.to_string());
            }
        }
        row
    });
    write_rows(header, rows)
}

pub fn kernel_from_csv(text: &str) -> Result<KernelSamples> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let width = reader.headers().map_err(csv_error)?.len();
    if width < 3 || (width - 1) % 2 != 0 {
        return Err(Error::Validation(format!("kernel CSV has {width} columns")));
    }
    let entries = (width - 1) / 2;
    let n = (entries as f64).sqrt().round() as usize;
    if n * n != entries {
        return Err(Error::Validation(format!("{entries} complex columns do not form a square matrix")));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let parsed: Vec<f64> = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Validation(format!("row {}: `{field}` is not a number", line + 1)))
            })
            .collect::<Result<_>>()?;
        times.push(parsed[0]);
        values.push(CMatrix::from_fn(n, n, |i, j| {
            let k = 1 + 2 * (i * n + j);
            c64(parsed[k], parsed[k + 1])
        }));
    }
    KernelSamples::new(times, values)
}

/// Header `t,re_1,im_1,…` with 1-based component indices.
pub fn trajectory_to_csv(trajectory: &Trajectory) -> Result<String> {
    let n = trajectory.states.first().map(|v| v.len()).unwrap_or(0);
    let mut header = vec!["t".to_string()];
    for i in 1..=n {
        header.push(format!("re_{i}"));
        header.push(format!("im_{i}"));
    }
    let rows = trajectory.times.iter().zip(&trajectory.states).map(|(t, v)| {
        let mut row = vec![t.to_string()];
        for z in v.iter() {
            row.push(z.re.to_string());
            row.push(z.im.to_string());
        }
        row
    });
    write_rows(header, rows)
}

/// Header `L,volume,max_mult,ratio`.
pub fn scan_to_csv(rows: &[ScanRow]) -> Result<String> {
    let header = ["L", "volume", "max_mult", "ratio"].iter().map(|s| s.to_string()).collect();
    write_rows(
        header,
        rows.iter().map(|r| {
            vec![
                r.l.to_string(),
                r.volume.to_string(),
                r.max_mult.to_string(),
                r.ratio.to_string(),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::kernel_eval;
    use nalgebra::DMatrix;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn one_channel() -> ConservativeSystem {
        ConservativeSystem::from_real_blocks(
            &DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 3.0]),
            &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
            &DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]),
            &tol(),
        )
        .unwrap()
    }

    #[test]
    fn system_round_trip() {
        let s = one_channel();
        let text = system_to_string(&s);
        assert_eq!(parse_system(&text, &tol()).unwrap(), s);
        assert!(text.contains("\"schema\": \"openext/v1\""));
    }

    #[test]
    fn real_entries_accepted() {
        let text = r#"{"n1":1,"n2":1,"omega":[[0,1],[1,2]]}"#;
        let s = parse_system(text, &tol()).unwrap();
        assert_eq!(s.gamma()[(0, 0)], c64(1.0, 0.0));
        let bad = r#"{"schema":"other","n1":1,"n2":1,"omega":[[0,1],[1,2]]}"#;
        assert!(parse_system(bad, &tol()).is_err());
        assert!(parse_document(r#"{"foo": 1}"#).is_err());
    }

    #[test]
    fn floats_round_trip_exactly() {
        let m = CMatrix::from_element(1, 1, c64(0.1 + 0.2, -1.0 / 3.0));
        let json = serde_json::to_string(&matrix_to_json(&m)).unwrap();
        let back: MatrixJson = serde_json::from_str(&json).unwrap();
        assert_eq!(matrix_from_json(&back, 1).unwrap(), m);
    }

    #[test]
    fn kernel_csv_round_trip() {
        let samples = kernel_eval(&one_channel(), &[0.0, 0.5, 1.0]).unwrap();
        let text = kernel_to_csv(&samples).unwrap();
        assert!(text.starts_with("t,re_00,im_00,re_01,im_01,re_10,im_10,re_11,im_11\n"));
        let back = kernel_from_csv(&text).unwrap();
        assert_eq!(back, samples);
    }

    #[test]
    fn measure_round_trip() {
        let m = PointMeasure::new(1, vec![(2.0, CMatrix::identity(1, 1))], &tol()).unwrap();
        assert_eq!(parse_measure(&measure_to_string(&m), &tol()).unwrap(), m);
    }
}
