//! File formats shared by the library and the command-line tool.
//!
//! * Trajectory: CSV with header `t,u_1..u_m,x_1..x_n`, one row per sample,
//!   plus a JSON sidecar `{"m":..,"n":..,"T":..}` next to it (same stem,
//!   `.json` extension).
//! * System: `{"A": [[..]], "B": [[..]]}`, row-major.
//! * Pole spec: `{"poles": [{"re":..,"im":..}], "X": [[{"re":..,"im":..}]]}`
//!   with `X` optional and row-major.
//!
//! All readers reject dimension mismatches.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::baselines::IdentifiedModel;
use crate::error::{Error, Result};
use crate::plant::LtiSystem;
use crate::signals::Trajectory;
use crate::synthesis::{GainResult, PoleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexDto {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexDto {
    fn from(z: Complex64) -> Self {
        ComplexDto { re: z.re, im: z.im }
    }
}

impl From<ComplexDto> for Complex64 {
    fn from(z: ComplexDto) -> Self {
        Complex64::new(z.re, z.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub m: usize,
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
}

/// Sidecar path for a trajectory CSV: the same path with a `.json` extension.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Row-major nested lists to a matrix; `what` names the matrix in errors.
pub fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(Error::InvalidInput(format!("{what} is empty")));
    }
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::InvalidInput(format!("{what} has ragged rows")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn complex_matrix_from_rows(
    rows: &[Vec<ComplexDto>],
    what: &str,
) -> Result<DMatrix<Complex64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(Error::InvalidInput(format!("{what} is empty")));
    }
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::InvalidInput(format!("{what} has ragged rows")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j].into()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory<f64>> {
    let meta: TrajectoryMeta = read_json(&sidecar_path(path))?;
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let expected: Vec<String> = std::iter::once("t".to_owned())
        .chain((1..=meta.m).map(|i| format!("u_{i}")))
        .chain((1..=meta.n).map(|i| format!("x_{i}")))
        .collect();
    if header != expected {
        return Err(Error::InvalidInput(format!(
            "trajectory header {:?} does not match m={}, n={} (expected {:?})",
            header, meta.m, meta.n, expected
        )));
    }
    let mut inputs = DMatrix::zeros(meta.m, meta.t);
    let mut states = DMatrix::zeros(meta.n, meta.t);
    let mut count = 0;
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        if k >= meta.t {
            return Err(Error::InvalidInput(format!(
                "trajectory has more than T={} rows",
                meta.t
            )));
        }
        let values: Vec<f64> = record
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("row {k}: bad number {s:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if values[0] != k as f64 {
            return Err(Error::InvalidInput(format!(
                "row {k} has time index {}, expected {k}",
                values[0]
            )));
        }
        for i in 0..meta.m {
            inputs[(i, k)] = values[1 + i];
        }
        for i in 0..meta.n {
            states[(i, k)] = values[1 + meta.m + i];
        }
        count += 1;
    }
    if count != meta.t {
        return Err(Error::InvalidInput(format!(
            "trajectory has {count} rows, sidecar says T={}",
            meta.t
        )));
    }
    Trajectory::new(inputs, states)
}

/// Writes the CSV and its sidecar.
pub fn write_trajectory(path: &Path, traj: &Trajectory<f64>) -> Result<()> {
    let (m, n, t) = (traj.input_dim(), traj.state_dim(), traj.len());
    let mut writer = csv::Writer::from_path(path)?;
    let header: Vec<String> = std::iter::once("t".to_owned())
        .chain((1..=m).map(|i| format!("u_{i}")))
        .chain((1..=n).map(|i| format!("x_{i}")))
        .collect();
    writer.write_record(&header)?;
    for k in 0..t {
        let row: Vec<String> = std::iter::once(k.to_string())
            .chain(traj.inputs().column(k).iter().map(|v| v.to_string()))
            .chain(traj.states().column(k).iter().map(|v| v.to_string()))
            .collect();
        writer.write_record(&row)?;
    }
    writer.flush()?;
    write_json(&sidecar_path(path), &TrajectoryMeta { m, n, t })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SystemDto {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
}

pub fn read_system(path: &Path) -> Result<LtiSystem<f64>> {
    let dto: SystemDto = read_json(path)?;
    LtiSystem::new(matrix_from_rows(&dto.a, "A")?, matrix_from_rows(&dto.b, "B")?)
}

pub fn write_system(path: &Path, sys: &LtiSystem<f64>) -> Result<()> {
    write_json(
        path,
        &SystemDto {
            a: rows_of(sys.a()),
            b: rows_of(sys.b()),
        },
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PoleSpecDto {
    poles: Vec<ComplexDto>,
    #[serde(rename = "X", default, skip_serializing_if = "Option::is_none")]
    x: Option<Vec<Vec<ComplexDto>>>,
}

/// Eigenvector file for `--eigvecs`: either `{"X": [[..]]}` or a bare matrix.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum EigvecsDto {
    Wrapped {
        #[serde(rename = "X")]
        x: Vec<Vec<ComplexDto>>,
    },
    Bare(Vec<Vec<ComplexDto>>),
}

/// Reads a pole spec, taking the eigenvector matrix from `eigvecs` when given
/// (it overrides any `X` in the pole file).
pub fn read_pole_spec(path: &Path, eigvecs: Option<&Path>) -> Result<PoleSpec<f64>> {
    let dto: PoleSpecDto = read_json(path)?;
    let poles: Vec<Complex64> = dto.poles.into_iter().map(Into::into).collect();
    let x = match eigvecs {
        Some(p) => Some(match read_json::<EigvecsDto>(p)? {
            EigvecsDto::Wrapped { x } | EigvecsDto::Bare(x) => x,
        }),
        None => dto.x,
    };
    match x {
        Some(rows) => {
            let x = complex_matrix_from_rows(&rows, "X")?;
            PoleSpec::with_eigenvectors(poles, x)
        }
        None => PoleSpec::new(poles),
    }
}

pub fn write_pole_spec(path: &Path, spec: &PoleSpec<f64>) -> Result<()> {
    let dto = PoleSpecDto {
        poles: spec.poles().iter().map(|&z| z.into()).collect(),
        x: spec.eigenvectors().map(|x| {
            x.row_iter()
                .map(|r| r.iter().map(|&z| z.into()).collect())
                .collect()
        }),
    };
    write_json(path, &dto)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoleErrorDto {
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsDto {
    pub eigenvalues: Vec<ComplexDto>,
    pub eigvec_condition: f64,
    pub per_pole_condition: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainResultDto {
    #[serde(rename = "K")]
    pub gain: Vec<Vec<f64>>,
    pub achieved_spectrum: Vec<ComplexDto>,
    pub placement_error: PoleErrorDto,
    pub rank_m: usize,
    pub rank_x0m: usize,
    pub imag_residual: f64,
    pub consistency_residual: f64,
    pub eigenvector_residual: Option<f64>,
    pub diagnostics: Option<DiagnosticsDto>,
}

impl From<&GainResult<f64>> for GainResultDto {
    fn from(r: &GainResult<f64>) -> Self {
        GainResultDto {
            gain: rows_of(&r.gain),
            achieved_spectrum: r.achieved_spectrum.iter().map(|&z| z.into()).collect(),
            placement_error: PoleErrorDto {
                max: r.placement_error.max,
                mean: r.placement_error.mean,
            },
            rank_m: r.rank_m,
            rank_x0m: r.rank_x0m,
            imag_residual: r.imag_residual,
            consistency_residual: r.consistency_residual,
            eigenvector_residual: r.eigenvector_residual,
            diagnostics: r.diagnostics.as_ref().map(|d| DiagnosticsDto {
                eigenvalues: d.eigenvalues.iter().map(|&z| z.into()).collect(),
                eigvec_condition: d.eigvec_condition,
                per_pole_condition: d.per_pole_condition.clone(),
            }),
        }
    }
}

pub fn write_gain_result(path: &Path, result: &GainResult<f64>) -> Result<()> {
    write_json(path, &GainResultDto::from(result))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentifiedModelDto {
    #[serde(rename = "A_hat")]
    pub a_hat: Vec<Vec<f64>>,
    #[serde(rename = "B_hat")]
    pub b_hat: Vec<Vec<f64>>,
    pub residual: f64,
}

pub fn write_identified_model(path: &Path, model: &IdentifiedModel<f64>) -> Result<()> {
    write_json(
        path,
        &IdentifiedModelDto {
            a_hat: rows_of(&model.a_hat),
            b_hat: rows_of(&model.b_hat),
            residual: model.residual,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{random_controllable, simulate, SimulationConfig};

    #[test]
    fn trajectory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let sys = random_controllable::<f64>(4, 1).unwrap();
        let traj = simulate(&sys, &SimulationConfig::gaussian(4, 12, 3)).unwrap();
        write_trajectory(&path, &traj).unwrap();
        let back = read_trajectory(&path).unwrap();
        assert_eq!(back, traj);
        let meta: TrajectoryMeta = read_json(&dir.path().join("traj.json")).unwrap();
        assert_eq!(meta, TrajectoryMeta { m: 2, n: 4, t: 12 });
    }

    #[test]
    fn trajectory_dimension_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        fs::write(&path, "t,u_1,x_1\n0,1,2\n1,3,4\n").unwrap();
        fs::write(dir.path().join("traj.json"), r#"{"m":1,"n":2,"T":2}"#).unwrap();
        assert!(matches!(read_trajectory(&path), Err(Error::InvalidInput(_))));
        fs::write(dir.path().join("traj.json"), r#"{"m":1,"n":1,"T":3}"#).unwrap();
        assert!(matches!(read_trajectory(&path), Err(Error::InvalidInput(_))));
        fs::write(dir.path().join("traj.json"), r#"{"m":1,"n":1,"T":2}"#).unwrap();
        assert!(read_trajectory(&path).is_ok());
    }

    #[test]
    fn system_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sys.json");
        let sys = random_controllable::<f64>(3, 2).unwrap();
        write_system(&path, &sys).unwrap();
        assert_eq!(read_system(&path).unwrap(), sys);
        fs::write(&path, r#"{"A":[[1,0],[0,1]],"B":[[1]]}"#).unwrap();
        assert!(read_system(&path).is_err());
    }

    #[test]
    fn pole_spec_with_separate_eigvecs() {
        let dir = tempfile::tempdir().unwrap();
        let poles = dir.path().join("poles.json");
        fs::write(
            &poles,
            r#"{"poles":[{"re":0.5,"im":0.0},{"re":0.1,"im":0.0}]}"#,
        )
        .unwrap();
        let spec = read_pole_spec(&poles, None).unwrap();
        assert!(spec.eigenvectors().is_none());

        let x = dir.path().join("x.json");
        fs::write(
            &x,
            r#"[[{"re":1,"im":0},{"re":0,"im":0}],[{"re":0,"im":0},{"re":1,"im":0}]]"#,
        )
        .unwrap();
        let spec = read_pole_spec(&poles, Some(&x)).unwrap();
        assert_eq!(spec.eigenvectors().unwrap().nrows(), 2);

        let out = dir.path().join("round.json");
        write_pole_spec(&out, &spec).unwrap();
        let back = read_pole_spec(&out, None).unwrap();
        assert_eq!(back, spec);
    }
}
