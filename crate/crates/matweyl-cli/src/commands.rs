//! Command implementations behind the CLI surface.

use std::path::{Path, PathBuf};

use num_complex::Complex64;

use matweyl::continuum::{
    diag_green_dirac, diag_green_schrodinger, local_closeness_probe, recover_m_dirac,
    recover_m_schrodinger, riccati_evolve_dirac, riccati_evolve_schrodinger, ProbePair,
};
use matweyl::io::{
    load_json, matrix_from_rows, matrix_to_rows, save_json, ContinuumSampleRecord, MatrixRows,
    Operator, OperatorFile, ReportFile, ReportMetadata, SampleFile,
};
use matweyl::jacobi::inverse::{invert_from_greens, InvertCase, InvertOptions};
use matweyl::par::par_map;
use matweyl::sampling;
use matweyl::verify::{all_passed, verify_dirac, verify_jacobi, verify_schrodinger, CheckResult};
use matweyl::{c64, Error};

/// Exit classification: usage and parse problems exit 2, computational
/// failures exit 1.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Parse(_) | Error::Validation(_) | Error::Io(_) => 2,
        _ => 1,
    }
}

pub fn emit_error(err: &Error) {
    let kind = match err {
        Error::Parse(_) => "parse",
        Error::Validation(_) => "validation",
        Error::Io(_) => "io",
        _ => "computation",
    };
    eprintln!(
        "{}",
        serde_json::json!({ "error": { "kind": kind, "message": err.to_string() } })
    );
}

#[derive(Debug, Clone, Copy)]
pub struct GlobalOpts {
    pub tol_scale: f64,
    pub nodes: usize,
    pub ray_angle: f64,
    pub seed: u64,
}

/// Spectral points: an explicit list wins over the (moduli, ray) grid.
pub fn resolve_points(
    explicit: &Option<String>,
    zmin: f64,
    zmax: f64,
    count: usize,
    ray_angle: f64,
) -> Result<Vec<Complex64>, Error> {
    if let Some(spec) = explicit {
        let mut out = Vec::new();
        for part in spec.split(';') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let mut it = part.split(',');
            let re: f64 = it
                .next()
                .ok_or_else(|| Error::Parse(format!("bad point '{part}'")))?
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("bad point '{part}': {e}")))?;
            let im: f64 = it
                .next()
                .ok_or_else(|| Error::Parse(format!("bad point '{part}' (need re,im)")))?
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("bad point '{part}': {e}")))?;
            if it.next().is_some() {
                return Err(Error::Parse(format!("bad point '{part}' (need re,im)")));
            }
            out.push(c64(re, im));
        }
        if out.is_empty() {
            return Err(Error::Parse("empty point list".into()));
        }
        Ok(out)
    } else {
        if !(zmin > 0.0 && zmax > zmin && count >= 2) {
            return Err(Error::validation(
                "need 0 < zmin < zmax and at least 2 points",
            ));
        }
        let dir = c64(ray_angle.cos(), ray_angle.sin());
        Ok(sampling::log_moduli(zmin, zmax, count)
            .into_iter()
            .map(|r| dir * r)
            .collect())
    }
}

fn load_operator(path: &Path) -> Result<Operator, Error> {
    let file: OperatorFile = load_json(path)?;
    file.parse()
}

pub fn cmd_forward(
    opts: &GlobalOpts,
    operator: &Path,
    site: i64,
    points: Vec<Complex64>,
    out: &Path,
) -> Result<(), Error> {
    let op = load_operator(operator)?;
    match op {
        Operator::Jacobi(c) => {
            let samples: Vec<_> = par_map(&points, |&z| {
                matweyl::jacobi::forward::greens_sample(&c, z, site)
            })
            .into_iter()
            .collect::<Result<_, _>>()?;
            let file = SampleFile::from_jacobi_samples(c.dim(), opts.ray_angle, &samples);
            save_json(&file, out)?;
            println!("wrote {} jacobi samples to {}", samples.len(), out.display());
            Ok(())
        }
        _ => Err(Error::validation(
            "forward expects a jacobi operator; use continuum-forward for grid models",
        )),
    }
}

pub fn cmd_continuum_forward(
    opts: &GlobalOpts,
    operator: &Path,
    x0: f64,
    points: Vec<Complex64>,
    out: &Path,
) -> Result<(), Error> {
    let op = load_operator(operator)?;
    let (family, dim, records) = match &op {
        Operator::Schrodinger(mdl) => {
            let idx = mdl
                .grid
                .index_of(x0)
                .ok_or_else(|| Error::validation("x0 must be a gridpoint"))?;
            let recs: Vec<ContinuumSampleRecord> = par_map(&points, |&z| {
                let field = riccati_evolve_schrodinger(mdl, z)?;
                let dg = diag_green_schrodinger(&field)?;
                Ok::<_, Error>(ContinuumSampleRecord {
                    z,
                    g: matrix_to_rows(&dg[idx].g),
                    gprime: matrix_to_rows(&dg[idx].gprime),
                })
            })
            .into_iter()
            .collect::<Result<_, _>>()?;
            ("schrodinger", mdl.m, recs)
        }
        Operator::Dirac(mdl) => {
            let idx = mdl
                .grid
                .index_of(x0)
                .ok_or_else(|| Error::validation("x0 must be a gridpoint"))?;
            let recs: Vec<ContinuumSampleRecord> = par_map(&points, |&z| {
                let field = riccati_evolve_dirac(mdl, z)?;
                let dg = diag_green_dirac(mdl, &field)?;
                Ok::<_, Error>(ContinuumSampleRecord {
                    z,
                    g: matrix_to_rows(&dg[idx].g),
                    gprime: matrix_to_rows(&dg[idx].gprime),
                })
            })
            .into_iter()
            .collect::<Result<_, _>>()?;
            ("dirac", mdl.m, recs)
        }
        Operator::Jacobi(_) => {
            return Err(Error::validation(
                "continuum-forward expects a schrodinger or dirac operator",
            ))
        }
    };
    let n = records.len();
    let file = SampleFile::Continuum {
        dim,
        family: family.into(),
        x0,
        ray_angle: opts.ray_angle,
        epsilon: std::f64::consts::PI - opts.ray_angle,
        samples: records,
    };
    save_json(&file, out)?;
    println!("wrote {} {} samples to {}", n, family, out.display());
    Ok(())
}

#[derive(serde::Serialize, serde::Deserialize)]
pub struct HintsFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a0: Option<MatrixRows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b11: Option<MatrixRows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b12: Option<MatrixRows>,
}

pub fn cmd_invert(
    opts: &GlobalOpts,
    samples_path: &Path,
    case: &str,
    hints: Option<&Path>,
    out: &Path,
) -> Result<(), Error> {
    let file: SampleFile = load_json(samples_path)?;
    let samples = file.to_jacobi_samples()?;
    let case = match case {
        "i" => InvertCase::I,
        "ii" => InvertCase::II,
        "iii" => InvertCase::III,
        other => {
            return Err(Error::validation(format!(
                "unknown case '{other}' (expected i, ii, or iii)"
            )))
        }
    };
    let a0 = match (case, hints) {
        (InvertCase::III, Some(p)) => {
            let h: HintsFile = load_json(p)?;
            let rows = h.a0.ok_or_else(|| {
                Error::validation("hints file lacks the 'a0' entry required by case iii")
            })?;
            Some(matrix_from_rows(&rows)?)
        }
        (InvertCase::III, None) => {
            return Err(Error::validation(
                "case iii requires --hints with the A(k0) matrix: the theorem takes A(k0) as data",
            ))
        }
        _ => None,
    };
    let mut invert_opts = InvertOptions::default();
    invert_opts.contour_nodes = opts.nodes;
    let rep = invert_from_greens(&samples, case, a0.as_ref(), &invert_opts)?;
    let (ray_angle, moduli) = match &file {
        SampleFile::Jacobi {
            ray_angle, samples, ..
        } => (*ray_angle, samples.iter().map(|s| s.z.norm()).collect()),
        _ => (opts.ray_angle, vec![]),
    };
    let metadata = ReportMetadata {
        case: format!("{case:?}").to_lowercase(),
        ray_angle,
        moduli,
        sqrt_branch: "principal, Im sqrt(z) > 0 on the upper half-plane".into(),
        riccati_tol: 1e-12,
        contour_nodes: opts.nodes,
        peel_quality_cutoff: 3.0e-4,
        polish_iterations: invert_opts.polish_iters,
    };
    let report = ReportFile::from_report(&rep, metadata);
    save_json(&report, out)?;
    println!(
        "recovered A on [{}, {}], B on [{}, {}]; report at {}",
        report.valid_a_range.0,
        report.valid_a_range.1,
        report.valid_b_range.0,
        report.valid_b_range.1,
        out.display()
    );
    Ok(())
}

pub fn cmd_continuum_invert(
    _opts: &GlobalOpts,
    samples_path: &Path,
    hints: Option<&Path>,
    out: &Path,
) -> Result<(), Error> {
    let file: SampleFile = load_json(samples_path)?;
    let (family, x0, records) = match &file {
        SampleFile::Continuum {
            family,
            x0,
            samples,
            ..
        } => (family.clone(), *x0, samples.clone()),
        _ => {
            return Err(Error::validation(
                "continuum-invert expects a continuum sample file",
            ))
        }
    };
    let hints: Option<HintsFile> = match hints {
        Some(p) => Some(load_json(p)?),
        None => None,
    };
    #[derive(serde::Serialize)]
    struct Entry {
        z: Complex64,
        m_plus: MatrixRows,
        m_minus: MatrixRows,
    }
    let mut entries = Vec::new();
    let mut skipped = 0usize;
    for rec in &records {
        let g = matrix_from_rows(&rec.g)?;
        let gp = matrix_from_rows(&rec.gprime)?;
        let result = match family.as_str() {
            "schrodinger" => recover_m_schrodinger(&g, &gp, rec.z),
            "dirac" => {
                let h = hints.as_ref().ok_or_else(|| {
                    Error::validation(
                        "dirac recovery requires --hints with b11 and b12 at x0",
                    )
                })?;
                let b11 = matrix_from_rows(h.b11.as_ref().ok_or_else(|| {
                    Error::validation("hints file lacks 'b11'")
                })?)?;
                let b12 = matrix_from_rows(h.b12.as_ref().ok_or_else(|| {
                    Error::validation("hints file lacks 'b12'")
                })?)?;
                recover_m_dirac(&g, &gp, &b11, &b12, rec.z)
            }
            other => return Err(Error::validation(format!("unknown family '{other}'"))),
        };
        match result {
            Ok((mp, mm)) => entries.push(Entry {
                z: rec.z,
                m_plus: matrix_to_rows(&mp),
                m_minus: matrix_to_rows(&mm),
            }),
            Err(Error::SeparationFailed { .. }) | Err(Error::SpectraOverlap { .. }) => {
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if entries.is_empty() {
        return Err(Error::SeparationFailed {
            detail: "no sample admitted the recovery (Im z too small throughout)".into(),
        });
    }
    let doc = serde_json::json!({
        "kind": "continuum_weyl",
        "family": family,
        "x0": x0,
        "recovered": entries,
        "skipped_points": skipped,
    });
    save_json(&doc, out)?;
    println!(
        "recovered Weyl pairs at {} of {} points; output at {}",
        entries.len(),
        records.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_verify(opts: &GlobalOpts, operator: &Path, quick: bool) -> Result<bool, Error> {
    let op = load_operator(operator)?;
    let checks: Vec<CheckResult> = match &op {
        Operator::Jacobi(c) => {
            let mut all = verify_jacobi(c, opts.seed, quick)?;
            if let Some(declared) = declared_bound(operator)? {
                all.push(CheckResult {
                    name: "jacobi.bound_metadata".into(),
                    measured: c.bound(),
                    tolerance: declared * (1.0 + 1e-12),
                    passed: c.bound() <= declared * (1.0 + 1e-12),
                });
            }
            all
        }
        Operator::Schrodinger(mdl) => verify_schrodinger(mdl, opts.seed, quick)?,
        Operator::Dirac(mdl) => verify_dirac(mdl, opts.seed, quick)?,
    };
    let mut ok = true;
    for ch in &checks {
        let scaled_tol = ch.tolerance * opts.tol_scale;
        let passed = ch.measured.is_finite() && ch.measured <= scaled_tol;
        ok &= passed;
        println!(
            "{:<44} {}  measured {:.3e}  tolerance {:.3e}",
            ch.name,
            if passed { "PASS" } else { "FAIL" },
            ch.measured,
            scaled_tol
        );
    }
    let _ = all_passed(&checks);
    Ok(ok)
}

fn declared_bound(path: &Path) -> Result<Option<f64>, Error> {
    let file: OperatorFile = load_json(path)?;
    Ok(match file {
        OperatorFile::Jacobi { bound, .. } => Some(bound),
        _ => None,
    })
}

pub fn cmd_probe_local(
    opts: &GlobalOpts,
    op1: &Path,
    op2: &Path,
    x0: f64,
    zmin: f64,
    zmax: f64,
    count: usize,
    out: Option<&Path>,
) -> Result<(), Error> {
    let a = load_operator(op1)?;
    let b = load_operator(op2)?;
    let moduli = sampling::log_moduli(zmin, zmax, count);
    let results: Vec<(String, f64)> = match (&a, &b) {
        (Operator::Schrodinger(m1), Operator::Schrodinger(m2)) => {
            let fitted = local_closeness_probe(
                &ProbePair::Schrodinger(m1, m2),
                x0,
                opts.ray_angle,
                &moduli,
            )?;
            vec![(format!("ray {:.4}", opts.ray_angle), fitted)]
        }
        (Operator::Dirac(m1), Operator::Dirac(m2)) => {
            // both Dirac sectors
            let mut out = Vec::new();
            for angle in [std::f64::consts::FRAC_PI_4, 3.0 * std::f64::consts::FRAC_PI_4] {
                let fitted =
                    local_closeness_probe(&ProbePair::Dirac(m1, m2), x0, angle, &moduli)?;
                out.push((format!("ray {:.4}", angle), fitted));
            }
            out
        }
        _ => {
            return Err(Error::validation(
                "probe-local needs two operators of the same continuum family",
            ))
        }
    };
    for (ray, fitted) in &results {
        println!("{ray}: fitted agreement radius {fitted:.4}");
    }
    if let Some(path) = out {
        let doc = serde_json::json!({
            "kind": "probe_local",
            "x0": x0,
            "moduli": moduli,
            "fitted": results.iter().map(|(r, f)| serde_json::json!({"ray": r, "a": f})).collect::<Vec<_>>(),
        });
        save_json(&doc, path)?;
    }
    Ok(())
}

/// Deterministic demo-model generation, so the bundled files can be rebuilt.
pub fn cmd_make_demo(opts: &GlobalOpts, kind: &str, m: usize, out: &Path) -> Result<(), Error> {
    let mut r = sampling::rng(opts.seed);
    let file = match kind {
        "jacobi-free" => {
            // free operator with a trivial one-site window so the file
            // format has something to carry
            let c = matweyl::jacobi::JacobiCoeffs::new(
                m,
                0,
                vec![matweyl::CMatrix::identity(m)],
                vec![matweyl::CMatrix::zeros(m)],
            )?;
            OperatorFile::from_jacobi(&c)
        }
        "jacobi" => {
            let c = sampling::random_jacobi(&mut r, m, 3, 0, 0.3, 0.3);
            OperatorFile::from_jacobi(&c)
        }
        "schrodinger" => {
            let mdl = sampling::random_schrodinger(&mut r, m, 1.5, 0.005, 0.8);
            OperatorFile::from_schrodinger(&mdl)
        }
        "dirac" => {
            let mdl = sampling::random_dirac(&mut r, m, 1.5, 0.005, 0.6);
            OperatorFile::from_dirac(&mdl)
        }
        other => {
            return Err(Error::validation(format!(
                "unknown demo kind '{other}' (jacobi-free, jacobi, schrodinger, dirac)"
            )))
        }
    };
    save_json(&file, out)?;
    println!("wrote {kind} demo (m = {m}, seed {}) to {}", opts.seed, out.display());
    Ok(())
}

pub fn default_out(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}.{suffix}.json"))
}

