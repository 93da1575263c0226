//! Error norms, convergence rates and the refinement study driver.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::assembly::{assemble_system, LinearSystem};
use crate::basis::{assemble_space, GlobalBasis};
use crate::error::{Error, Result};
use crate::multipatch::{load_domain, MultiPatchDomain};
use crate::par;
use crate::physical::{physical_derivatives, PhysicalDerivatives};
use crate::poly2d::{builtin_factored, triharmonic_rhs, Polynomial2D, SolutionId};
use crate::quadrature::quadrature_rule;
use crate::solver::{condition_number, solve_spd, ConditionMode, SolveReport};

/// Dense `d × d` coefficient grid of `Σ c_f φ_f` on `patch`, row-major in
/// `(i, j)`.
pub fn patch_coefficients(basis: &GlobalBasis, coeffs: &[f64], patch: usize) -> Vec<f64> {
    let d = basis.space.dim();
    let mut out = vec![0.0; d * d];
    for (f, c) in basis.functions.iter().zip(coeffs) {
        if let Some(g) = f.grid(patch) {
            for (i, j, v) in g.entries() {
                out[i * d + j] += c * v;
            }
        }
    }
    out
}

/// Parametric derivative table of a dense coefficient grid.
fn grid_table(basis: &GlobalBasis, grid: &[f64], xi1: f64, xi2: f64, order: usize) -> Vec<Vec<f64>> {
    let d = basis.space.dim();
    let (f1, u) = basis.space.eval_local(xi1, order);
    let (f2, v) = basis.space.eval_local(xi2, order);
    let mut t = vec![vec![0.0; order + 1]; order + 1];
    for (ii, row) in u[0].iter().enumerate().map(|(ii, _)| (ii, f1 + ii)) {
        for jj in 0..v[0].len() {
            let c = grid[row * d + f2 + jj];
            if c == 0.0 {
                continue;
            }
            for a in 0..=order {
                for b in 0..=order - a {
                    t[a][b] += c * u[a][ii] * v[b][jj];
                }
            }
        }
    }
    t
}

/// Physical derivatives of `u_h` on `patch` at `(xi1, xi2)`.
pub fn discrete_derivatives(
    domain: &MultiPatchDomain,
    basis: &GlobalBasis,
    grid: &[f64],
    patch: usize,
    xi1: f64,
    xi2: f64,
) -> Result<PhysicalDerivatives> {
    let t = grid_table(basis, grid, xi1, xi2, 3);
    physical_derivatives(&domain.patches[patch], xi1, xi2, &t, 3)
}

/// Value of `u_h` at the physical point `x`.
pub fn evaluate_at(
    domain: &MultiPatchDomain,
    basis: &GlobalBasis,
    coeffs: &[f64],
    x: [f64; 2],
) -> Result<f64> {
    for (l, patch) in domain.patches.iter().enumerate() {
        if let Ok((a, b)) = patch.inverse_map(x) {
            let eps = 1e-12;
            if (-eps..=1.0 + eps).contains(&a) && (-eps..=1.0 + eps).contains(&b) {
                let grid = patch_coefficients(basis, coeffs, l);
                let t = grid_table(basis, &grid, a.clamp(0.0, 1.0), b.clamp(0.0, 1.0), 0);
                return Ok(t[0][0]);
            }
        }
    }
    Err(Error::NotFound(x[0], x[1]))
}

/// Relative errors `‖u_h - u‖ / ‖u‖` in the full `H^i` norms and the
/// `∇Δ` seminorm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ErrorNorms {
    pub h: [f64; 4],
    pub grad_laplacian: f64,
}

/// Squared seminorms `|·|_{H^o}`, `o = 0..=3`, and `‖∇Δ·‖²`.
type Parts = ([f64; 4], f64);

fn seminorm_parts(d: &[[f64; 4]; 4]) -> Parts {
    // d[o][b]: derivative of order o with b derivatives in x2.
    let mut s = [0.0; 4];
    for o in 0..4 {
        s[o] = (0..=o).map(|b| d[o][b] * d[o][b]).sum();
    }
    let g1 = d[3][0] + d[3][2];
    let g2 = d[3][1] + d[3][3];
    (s, g1 * g1 + g2 * g2)
}

fn derivative_array(p: &PhysicalDerivatives) -> [[f64; 4]; 4] {
    let mut d = [[0.0; 4]; 4];
    d[0][0] = p.value;
    d[1][0] = p.grad[0];
    d[1][1] = p.grad[1];
    d[2][0] = p.hess[0][0];
    d[2][1] = p.hess[0][1];
    d[2][2] = p.hess[1][1];
    d[3][0] = p.third[0][0][0];
    d[3][1] = p.third[0][0][1];
    d[3][2] = p.third[0][1][1];
    d[3][3] = p.third[1][1][1];
    d
}

/// Error norms of the discrete solution `coeffs` against the exact `u`.
pub fn error_norms(
    domain: &MultiPatchDomain,
    basis: &GlobalBasis,
    coeffs: &[f64],
    u: &Polynomial2D,
) -> Result<ErrorNorms> {
    let rule = quadrature_rule(&basis.space);
    let exact: Vec<Vec<Polynomial2D>> = (0..4).map(|o| u.derivatives_of_order(o)).collect();
    let grids: Vec<Vec<f64>> = (0..domain.patch_count())
        .map(|l| patch_coefficients(basis, coeffs, l))
        .collect();
    let ne = rule.elements.len();
    let jobs = domain.patch_count() * ne;
    let parts: Vec<Result<(Parts, Parts)>> = par::map_range(jobs, |job| {
        let (l, e1) = (job / ne, job % ne);
        let mut err: Parts = ([0.0; 4], 0.0);
        let mut nrm: Parts = ([0.0; 4], 0.0);
        for e2 in 0..ne {
            for (x1, w1) in rule.points[e1].iter().zip(&rule.weights[e1]) {
                for (x2, w2) in rule.points[e2].iter().zip(&rule.weights[e2]) {
                    let ph = discrete_derivatives(domain, basis, &grids[l], l, *x1, *x2)?;
                    let det = domain.patches[l].det(*x1, *x2);
                    if det <= 0.0 {
                        return Err(Error::QuadratureDegeneracy { patch: l, det });
                    }
                    let x = domain.patches[l].eval(*x1, *x2);
                    let w = w1 * w2 * det;
                    let dh = derivative_array(&ph);
                    let mut de = [[0.0; 4]; 4];
                    let mut du = [[0.0; 4]; 4];
                    for o in 0..4 {
                        for b in 0..=o {
                            du[o][b] = exact[o][b].eval(x.x, x.y);
                            de[o][b] = dh[o][b] - du[o][b];
                        }
                    }
                    let (se, ge) = seminorm_parts(&de);
                    let (su, gu) = seminorm_parts(&du);
                    for o in 0..4 {
                        err.0[o] += w * se[o];
                        nrm.0[o] += w * su[o];
                    }
                    err.1 += w * ge;
                    nrm.1 += w * gu;
                }
            }
        }
        Ok((err, nrm))
    });
    let mut err: Parts = ([0.0; 4], 0.0);
    let mut nrm: Parts = ([0.0; 4], 0.0);
    for part in parts {
        let (e, n) = part?;
        for o in 0..4 {
            err.0[o] += e.0[o];
            nrm.0[o] += n.0[o];
        }
        err.1 += e.1;
        nrm.1 += n.1;
    }
    let mut out = ErrorNorms::default();
    let (mut ce, mut cn) = (0.0, 0.0);
    for i in 0..4 {
        ce += err.0[i];
        cn += nrm.0[i];
        if cn <= 0.0 {
            return Err(Error::UndefinedRelativeError(i));
        }
        out.h[i] = (ce / cn).sqrt();
    }
    out.grad_laplacian = if nrm.1 > 0.0 { (err.1 / nrm.1).sqrt() } else { f64::NAN };
    Ok(out)
}

/// Observed order between two refinements.
pub fn rate(e_prev: f64, e_curr: f64, h_prev: f64, h_curr: f64) -> f64 {
    (e_prev / e_curr).ln() / (h_prev / h_curr).ln()
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// Exact solution of a study.
#[derive(Clone, Debug)]
pub enum SolutionSpec {
    Builtin(SolutionId),
    Custom(Polynomial2D),
}

impl SolutionSpec {
    /// `(u, f)` with `f = -Δ³u`.
    pub fn polynomials(&self) -> (Polynomial2D, Polynomial2D) {
        match self {
            Self::Builtin(id) => {
                let fac = builtin_factored(*id);
                (fac.expand(), fac.triharmonic_rhs())
            }
            Self::Custom(u) => (u.clone(), triharmonic_rhs(u)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub domain: PathBuf,
    pub p: usize,
    pub r: usize,
    pub ks: Vec<usize>,
    pub solution: SolutionSpec,
    pub output: Option<PathBuf>,
    pub condition_numbers: bool,
    pub export_basis: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct StudyRow {
    pub k: usize,
    pub h: f64,
    pub dim: usize,
    pub err: [f64; 4],
    pub err_grad_laplacian: f64,
    pub rate: [Option<f64>; 4],
    pub kappa_raw: Option<f64>,
    pub kappa_jacobi: Option<f64>,
    pub seconds: f64,
    pub asymmetry: f64,
    pub residual: f64,
    pub iterations: usize,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct StudyReport {
    pub p: usize,
    pub r: usize,
    pub rows: Vec<StudyRow>,
}

/// Everything produced for one `k`.
pub struct StudyRun {
    pub basis: GlobalBasis,
    pub system: LinearSystem,
    pub solve: SolveReport,
    pub errors: ErrorNorms,
}

/// Assembles, solves and measures one refinement level.
pub fn run_level(
    domain: &MultiPatchDomain,
    p: usize,
    r: usize,
    k: usize,
    u: &Polynomial2D,
    f: &Polynomial2D,
    condition_numbers: bool,
) -> Result<StudyRun> {
    let basis = assemble_space(domain, p, r, k)?;
    let system = assemble_system(domain, &basis, f)?;
    let mut solve = solve_spd(&system.matrix, &system.rhs)?;
    if condition_numbers {
        solve.kappa_raw = Some(condition_number(&system.matrix, ConditionMode::Raw)?);
        solve.kappa_jacobi = Some(condition_number(&system.matrix, ConditionMode::Jacobi)?);
    }
    let errors = error_norms(domain, &basis, &solve.coefficients, u)?;
    Ok(StudyRun {
        basis,
        system,
        solve,
        errors,
    })
}

/// Runs the refinement study. Failures of single levels are recorded in
/// their rows and do not stop the remaining levels.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    if cfg.ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("k values must be ascending".into()));
    }
    let domain = load_domain(&cfg.domain)?;
    let (u, f) = cfg.solution.polynomials();
    let mut report = StudyReport {
        p: cfg.p,
        r: cfg.r,
        rows: Vec::new(),
    };
    for &k in &cfg.ks {
        let start = Instant::now();
        let h = 1.0 / (k as f64 + 1.0);
        let mut row = StudyRow {
            k,
            h,
            ..Default::default()
        };
        match run_level(&domain, cfg.p, cfg.r, k, &u, &f, cfg.condition_numbers) {
            Ok(run) => {
                row.dim = run.basis.dim();
                row.err = run.errors.h;
                row.err_grad_laplacian = run.errors.grad_laplacian;
                row.kappa_raw = run.solve.kappa_raw;
                row.kappa_jacobi = run.solve.kappa_jacobi;
                row.asymmetry = run.system.asymmetry;
                row.residual = run.solve.residual;
                row.iterations = run.solve.iterations;
                if let Some(path) = &cfg.export_basis {
                    let name = format!("{}_k{k}.json", path.display());
                    std::fs::write(name, run.basis.export_json()?)?;
                }
            }
            Err(e) => row.failure = Some(e.to_string()),
        }
        row.seconds = start.elapsed().as_secs_f64();
        report.rows.push(row);
    }
    fill_rates(&mut report.rows);
    if let Some(out) = &cfg.output {
        write_report(&report, out)?;
    }
    Ok(report)
}

/// Rates between consecutive successful rows.
pub fn fill_rates(rows: &mut [StudyRow]) {
    let mut prev: Option<(f64, [f64; 4])> = None;
    for row in rows.iter_mut() {
        if row.failure.is_some() {
            prev = None;
            continue;
        }
        if let Some((h0, e0)) = prev {
            for i in 0..4 {
                row.rate[i] = Some(rate(e0[i], row.err[i], h0, row.h));
            }
        }
        prev = Some((row.h, row.err));
    }
}

/// Least-squares slope of `κ` against `h` over the successful rows.
pub fn kappa_slope(rows: &[StudyRow], mode: ConditionMode) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            let k = match mode {
                ConditionMode::Raw => r.kappa_raw,
                ConditionMode::Jacobi => r.kappa_jacobi,
            }?;
            Some((r.h, k))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Some(log_slope(&x, &y))
}

#[derive(Serialize)]
struct CsvRow {
    k: usize,
    h: f64,
    dim: usize,
    err_h0: f64,
    err_h1: f64,
    err_h2: f64,
    err_h3: f64,
    rate_h0: Option<f64>,
    rate_h1: Option<f64>,
    rate_h2: Option<f64>,
    rate_h3: Option<f64>,
    kappa_raw: Option<f64>,
    kappa_jacobi: Option<f64>,
    seconds: f64,
}

impl From<&StudyRow> for CsvRow {
    fn from(r: &StudyRow) -> Self {
        Self {
            k: r.k,
            h: r.h,
            dim: r.dim,
            err_h0: r.err[0],
            err_h1: r.err[1],
            err_h2: r.err[2],
            err_h3: r.err[3],
            rate_h0: r.rate[0],
            rate_h1: r.rate[1],
            rate_h2: r.rate[2],
            rate_h3: r.rate[3],
            kappa_raw: r.kappa_raw,
            kappa_jacobi: r.kappa_jacobi,
            seconds: r.seconds,
        }
    }
}

/// Writes the CSV report and its JSON mirror (same stem, `.json`).
pub fn write_report(report: &StudyReport, path: &Path) -> Result<()> {
    let rows: Vec<CsvRow> = report.rows.iter().map(CsvRow::from).collect();
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in &rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    std::fs::write(path.with_extension("json"), serde_json::to_string_pretty(&rows)?)?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_pure_power() {
        assert!((rate(1.0, 1.0 / 64.0, 0.25, 0.125) - 6.0).abs() < 1e-12);
        let h = [0.25, 0.125, 0.0625];
        let k: Vec<f64> = h.iter().map(|h: &f64| 3.0 * h.powi(-6)).collect();
        assert!((log_slope(&h, &k) + 6.0).abs() < 1e-12);
    }

    #[test]
    fn rates_skip_failed_rows() {
        let mut rows = vec![
            StudyRow { h: 0.25, err: [1.0; 4], ..Default::default() },
            StudyRow { h: 0.125, failure: Some("x".into()), ..Default::default() },
            StudyRow { h: 0.0625, err: [0.5; 4], ..Default::default() },
        ];
        fill_rates(&mut rows);
        assert!(rows.iter().all(|r| r.rate[0].is_none()));
    }

    #[test]
    fn report_columns_and_json_mirror() {
        let mut rows = vec![
            StudyRow { k: 3, h: 0.25, dim: 10, err: [1.0, 2.0, 3.0, 4.0], ..Default::default() },
            StudyRow { k: 7, h: 0.125, dim: 40, err: [0.5, 1.0, 1.5, 2.0], ..Default::default() },
        ];
        fill_rates(&mut rows);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("study.csv");
        write_report(&StudyReport { p: 5, r: 2, rows }, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,h,dim,err_h0,err_h1,err_h2,err_h3,rate_h0,rate_h1,rate_h2,rate_h3,kappa_raw,kappa_jacobi,seconds"
        );
        assert!(lines.next().unwrap().starts_with("3,0.25,10,1.0,2.0,3.0,4.0,,,,,,,"));
        assert!(lines.next().unwrap().starts_with("7,0.125,40,0.5,1.0,1.5,2.0,1.0,1.0,1.0,1.0,"));
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(path.with_extension("json")).unwrap()).unwrap();
        assert_eq!(json[1]["rate_h0"], 1.0);
        assert!(json[0]["rate_h0"].is_null());
    }
}
