//! File schemas and atomic persistence.
//!
//! Everything is UTF-8 JSON: complex scalars as `[re, im]` pairs, matrices
//! as row-major arrays of rows, coefficient sequences as arrays of
//! `{k, a, b}` records. The encoding is exact for binary64, so load(save(x))
//! reproduces x bitwise.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::continuum::{DiracModel, Grid, SchrodingerModel};
use crate::error::{Error, Result};
use crate::jacobi::{GreensSample, JacobiCoeffs, ReconstructionReport};
use crate::linalg::CMatrix;

pub type MatrixRows = Vec<Vec<Complex64>>;

pub fn matrix_to_rows(m: &CMatrix) -> MatrixRows {
    (0..m.dim())
        .map(|i| (0..m.dim()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn matrix_from_rows(rows: &MatrixRows) -> Result<CMatrix> {
    CMatrix::from_rows(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    pub x_lo: f64,
    pub step: f64,
    pub len: usize,
}

impl GridSpec {
    pub fn to_grid(&self) -> Result<Grid> {
        Grid::new(self.x_lo, self.step, self.len)
    }

    pub fn from_grid(g: &Grid) -> Self {
        GridSpec {
            x_lo: g.x_lo,
            step: g.h,
            len: g.len,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct JacobiSite {
    pub k: i64,
    pub a: MatrixRows,
    pub b: MatrixRows,
}

/// On-disk operator description. The payload must satisfy the target type's
/// invariants (Hermiticity, positivity, edge decay) or loading fails.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorFile {
    Jacobi {
        dim: usize,
        /// uniform coefficient bound, `max_k(||A(k)|| + ||B(k)||)`
        bound: f64,
        coeffs: Vec<JacobiSite>,
    },
    Schrodinger {
        dim: usize,
        grid: GridSpec,
        q: Vec<MatrixRows>,
    },
    Dirac {
        dim: usize,
        grid: GridSpec,
        b11: Vec<MatrixRows>,
        b12: Vec<MatrixRows>,
    },
}

/// A parsed, validated operator.
#[derive(Debug, Clone)]
pub enum Operator {
    Jacobi(JacobiCoeffs),
    Schrodinger(SchrodingerModel),
    Dirac(DiracModel),
}

impl OperatorFile {
    pub fn from_jacobi(c: &JacobiCoeffs) -> Self {
        let coeffs = (c.k_min()..=c.k_max())
            .map(|k| JacobiSite {
                k,
                a: matrix_to_rows(&c.a(k)),
                b: matrix_to_rows(&c.b(k)),
            })
            .collect();
        OperatorFile::Jacobi {
            dim: c.dim(),
            bound: c.bound(),
            coeffs,
        }
    }

    pub fn from_schrodinger(mdl: &SchrodingerModel) -> Self {
        OperatorFile::Schrodinger {
            dim: mdl.m,
            grid: GridSpec::from_grid(&mdl.grid),
            q: mdl.q.iter().map(matrix_to_rows).collect(),
        }
    }

    pub fn from_dirac(mdl: &DiracModel) -> Self {
        OperatorFile::Dirac {
            dim: mdl.m,
            grid: GridSpec::from_grid(&mdl.grid),
            b11: mdl.b11.iter().map(matrix_to_rows).collect(),
            b12: mdl.b12.iter().map(matrix_to_rows).collect(),
        }
    }

    /// Validate the payload into the corresponding model type.
    pub fn parse(&self) -> Result<Operator> {
        match self {
            OperatorFile::Jacobi { dim, bound, coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::validation("jacobi operator needs at least one site"));
                }
                let k_min = coeffs.iter().map(|s| s.k).min().unwrap();
                let k_max = coeffs.iter().map(|s| s.k).max().unwrap();
                let n = (k_max - k_min + 1) as usize;
                if coeffs.len() != n {
                    return Err(Error::validation(
                        "jacobi coefficient records must cover a contiguous window",
                    ));
                }
                let mut a = vec![None; n];
                let mut b = vec![None; n];
                for site in coeffs {
                    let idx = (site.k - k_min) as usize;
                    if a[idx].is_some() {
                        return Err(Error::validation(format!(
                            "duplicate coefficient record at k = {}",
                            site.k
                        )));
                    }
                    a[idx] = Some(matrix_from_rows(&site.a)?);
                    b[idx] = Some(matrix_from_rows(&site.b)?);
                }
                let a: Vec<CMatrix> = a.into_iter().map(Option::unwrap).collect();
                let b: Vec<CMatrix> = b.into_iter().map(Option::unwrap).collect();
                let c = JacobiCoeffs::new(*dim, k_min, a, b)?;
                if c.bound() > bound + 1e-9 * (1.0 + bound) {
                    return Err(Error::validation(format!(
                        "declared bound {bound} below the computed coefficient bound {}",
                        c.bound()
                    )));
                }
                Ok(Operator::Jacobi(c))
            }
            OperatorFile::Schrodinger { dim, grid, q } => {
                let g = grid.to_grid()?;
                let q = q.iter().map(matrix_from_rows).collect::<Result<Vec<_>>>()?;
                Ok(Operator::Schrodinger(SchrodingerModel::new(*dim, g, q)?))
            }
            OperatorFile::Dirac {
                dim,
                grid,
                b11,
                b12,
            } => {
                let g = grid.to_grid()?;
                let b11 = b11.iter().map(matrix_from_rows).collect::<Result<Vec<_>>>()?;
                let b12 = b12.iter().map(matrix_from_rows).collect::<Result<Vec<_>>>()?;
                Ok(Operator::Dirac(DiracModel::new(*dim, g, b11, b12)?))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct JacobiSampleRecord {
    pub z: Complex64,
    pub g0: MatrixRows,
    pub g1: MatrixRows,
    pub g01: MatrixRows,
    pub g10: MatrixRows,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ContinuumSampleRecord {
    pub z: Complex64,
    pub g: MatrixRows,
    pub gprime: MatrixRows,
}

/// Green's-data samples along one ray.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleFile {
    Jacobi {
        dim: usize,
        k0: i64,
        /// `arg z` of the ray and its complement `pi - arg z`
        ray_angle: f64,
        epsilon: f64,
        samples: Vec<JacobiSampleRecord>,
    },
    Continuum {
        dim: usize,
        family: String,
        x0: f64,
        ray_angle: f64,
        epsilon: f64,
        samples: Vec<ContinuumSampleRecord>,
    },
}

impl SampleFile {
    pub fn from_jacobi_samples(dim: usize, ray_angle: f64, samples: &[GreensSample]) -> Self {
        SampleFile::Jacobi {
            dim,
            k0: samples.first().map(|s| s.k0).unwrap_or(0),
            ray_angle,
            epsilon: std::f64::consts::PI - ray_angle,
            samples: samples
                .iter()
                .map(|s| JacobiSampleRecord {
                    z: s.z,
                    g0: matrix_to_rows(&s.g0),
                    g1: matrix_to_rows(&s.g1),
                    g01: matrix_to_rows(&s.g01),
                    g10: matrix_to_rows(&s.g10),
                })
                .collect(),
        }
    }

    pub fn to_jacobi_samples(&self) -> Result<Vec<GreensSample>> {
        match self {
            SampleFile::Jacobi { k0, samples, .. } => {
                let mut seen: Vec<Complex64> = Vec::new();
                samples
                    .iter()
                    .map(|r| {
                        if !(r.z.re.is_finite() && r.z.im.is_finite()) {
                            return Err(Error::validation("non-finite spectral point"));
                        }
                        if seen.iter().any(|&z| z == r.z) {
                            return Err(Error::validation(format!(
                                "duplicate spectral point {}",
                                r.z
                            )));
                        }
                        seen.push(r.z);
                        Ok(GreensSample {
                            z: r.z,
                            k0: *k0,
                            g0: matrix_from_rows(&r.g0)?,
                            g1: matrix_from_rows(&r.g1)?,
                            g01: matrix_from_rows(&r.g01)?,
                            g10: matrix_from_rows(&r.g10)?,
                        })
                    })
                    .collect()
            }
            _ => Err(Error::validation("not a jacobi sample file")),
        }
    }
}

/// Full provenance so a reconstruction can be re-run deterministically.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportMetadata {
    pub case: String,
    pub ray_angle: f64,
    pub moduli: Vec<f64>,
    pub sqrt_branch: String,
    pub riccati_tol: f64,
    pub contour_nodes: usize,
    pub peel_quality_cutoff: f64,
    pub polish_iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CoeffRecord {
    pub k: i64,
    pub m: MatrixRows,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportFile {
    pub dim: usize,
    pub k0: i64,
    pub a: Vec<CoeffRecord>,
    pub b: Vec<CoeffRecord>,
    pub valid_a_range: (i64, i64),
    pub valid_b_range: (i64, i64),
    pub metadata: ReportMetadata,
}

impl ReportFile {
    pub fn from_report(rep: &ReconstructionReport, metadata: ReportMetadata) -> Self {
        let res = |list: &[(i64, f64)], k: i64| {
            list.iter()
                .find(|(kk, _)| *kk == k)
                .map(|(_, r)| *r)
                .unwrap_or(f64::NAN)
        };
        ReportFile {
            dim: rep.m,
            k0: rep.k0,
            a: rep
                .a_rec
                .iter()
                .map(|(k, m)| CoeffRecord {
                    k: *k,
                    m: matrix_to_rows(m),
                    residual: res(&rep.a_residuals, *k),
                })
                .collect(),
            b: rep
                .b_rec
                .iter()
                .map(|(k, m)| CoeffRecord {
                    k: *k,
                    m: matrix_to_rows(m),
                    residual: res(&rep.b_residuals, *k),
                })
                .collect(),
            valid_a_range: rep.valid_a_range,
            valid_b_range: rep.valid_b_range,
            metadata,
        }
    }
}

/// Serialize to pretty JSON and write atomically (temp file + rename in the
/// target directory).
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Io(format!("serialize: {e}")))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).ok();
    let mut tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into())
    ));
    let mut counter = 0u32;
    while tmp.exists() {
        counter += 1;
        tmp = dir.join(format!(".tmp{counter}.{}", std::process::id()));
    }
    fs::write(&tmp, body.as_bytes())?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let body = fs::read_to_string(path)?;
    serde_json::from_str(&body).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
