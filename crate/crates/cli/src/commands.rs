use nalgebra::Vector3;
use rayon::prelude::*;

use phonomog::homogenize::{
    bounds as compute_bounds, convergence_study, effective_moduli, principal_gammas, speeds_from_gamma, Method, Options,
};
use phonomog::tensor::{christoffel, Mat3};
use phonomog::units::{to_mm_per_us, GPA};
use phonomog::UnitCell;

use crate::config::{RunConfig, SweepParameter};
use crate::CliError;

const VOIGT_NAMES: [&str; 6] = ["1", "2", "3", "4", "5", "6"];

struct Table {
    out: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[String]) -> Self {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(header).expect("in-memory write");
        Self { out }
    }

    fn row(&mut self, fields: &[String]) {
        self.out.write_record(fields).expect("in-memory write");
    }

    fn finish(self) -> String {
        String::from_utf8(self.out.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn speed_fields(s: &[f64; 3]) -> [String; 3] {
    s.map(|v| num(to_mm_per_us(v)))
}

fn speed_header(prefix: &str) -> [String; 3] {
    [1, 2, 3].map(|k| format!("{prefix}_c{k}"))
}

fn jobs(cfg: &RunConfig) -> Vec<(Method, usize)> {
    let mut v: Vec<(Method, usize)> = cfg
        .solver
        .method
        .methods()
        .into_iter()
        .flat_map(|m| cfg.solver.n.iter().map(move |&n| (m, n)))
        .collect();
    v.sort();
    v.dedup();
    v
}

/// One row per (method, N): the 21 constants c_ij (i ≤ j) in GPa, then
/// ascending speeds per direction.
pub fn moduli(cfg: &RunConfig, opts: &Options) -> Result<String, CliError> {
    let cell = cfg.cell_at(None)?;
    let dirs = cfg.directions()?;
    let mut header = vec!["method".to_string(), "n".to_string()];
    for i in 0..6 {
        for j in i..6 {
            header.push(format!("c{}{}", VOIGT_NAMES[i], VOIGT_NAMES[j]));
        }
    }
    for k in 0..dirs.len() {
        header.extend(speed_header(&format!("d{}", k + 1)));
    }
    header.extend(["d_asymmetry".into(), "elapsed_s".into()]);
    let results = jobs(cfg)
        .par_iter()
        .map(|&(m, n)| effective_moduli(&cell, m, n, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&header);
    for r in results {
        let v = r.c_eff.voigt()?;
        let mut row = vec![r.method.to_string(), r.n.to_string()];
        for i in 0..6 {
            for j in i..6 {
                row.push(num(v[(i, j)].re / GPA));
            }
        }
        for k in &dirs {
            let g = christoffel(&r.form, k, opts.strict)?;
            row.extend(speed_fields(&speeds_from_gamma(&g.gamma, r.mean_rho)?));
        }
        row.push(num(r.diagnostics.d_asymmetry));
        row.push(num(r.diagnostics.elapsed.as_secs_f64()));
        t.row(&row);
    }
    Ok(t.finish())
}

/// Γ(e₁) of a cell: principal run on cubic lattices, full recovery otherwise.
fn gamma_e1(cell: &UnitCell, method: Method, n: usize, opts: &Options) -> Result<Mat3, CliError> {
    if cell.is_cubic() {
        Ok(principal_gammas(cell, method, n, &[0], opts)?.0[0])
    } else {
        let r = effective_moduli(cell, method, n, opts)?;
        Ok(christoffel(&r.form, &Vector3::x(), true)?.gamma)
    }
}

/// One row per grid value: c_l, c_t (mm/µs), c11 and c66 (GPa) along x₁ for
/// every (method, N), then the closed-form MM N = 0 bound, Voigt and
/// Hashin–Shtrikman lower
/// speeds.
pub fn sweep(cfg: &RunConfig, opts: &Options) -> Result<String, CliError> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs a [sweep] section".into()))?;
    let name = match spec.parameter {
        SweepParameter::Fraction => "fraction",
        SweepParameter::Aspect => "aspect",
    };
    let cells = spec
        .values
        .iter()
        .map(|&v| cfg.cell_at(Some(v)))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs = jobs(cfg);
    let mut header = vec![name.to_string()];
    for (m, n) in &jobs {
        for q in ["cl", "ct", "c11", "c66"] {
            header.push(format!("{m}{n}_{q}"));
        }
    }
    for q in [
        "bound_cl",
        "bound_ct",
        "voigt_cl",
        "voigt_ct",
        "hs_lower_cl",
        "hs_lower_ct",
    ] {
        header.push(q.into());
    }
    let e1 = Vector3::x();
    let rows = cells
        .par_iter()
        .zip(&spec.values)
        .map(|(cell, &v)| -> Result<Vec<String>, CliError> {
            let rho = cell.mean_density();
            let mut row = vec![num(v)];
            for &(m, n) in &jobs {
                let g = gamma_e1(cell, m, n, opts)?;
                let s = speeds_from_gamma(&g, rho)?;
                row.extend([
                    num(to_mm_per_us(s[2])),
                    num(to_mm_per_us(s[0])),
                    num(g[(0, 0)].re / GPA),
                    num(g[(1, 1)].re / GPA),
                ]);
            }
            let b = compute_bounds(cell, opts.formulation)?;
            let mm0 = b.speed_bounds(&e1)?;
            let voigt = b.voigt_speeds(&e1)?;
            row.extend([num(to_mm_per_us(mm0[2])), num(to_mm_per_us(mm0[0]))]);
            row.extend([num(to_mm_per_us(voigt[2])), num(to_mm_per_us(voigt[0]))]);
            match b.hs {
                Some(hs) => row.extend([
                    num(to_mm_per_us(hs.lower_speeds.0)),
                    num(to_mm_per_us(hs.lower_speeds.1)),
                ]),
                None => row.extend([String::new(), String::new()]),
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&header);
    for r in rows {
        t.row(&r);
    }
    Ok(t.finish())
}

/// One row per (method, N) with the system side, timing, solver diagnostics
/// and ascending speeds per direction.
pub fn convergence(cfg: &RunConfig, opts: &Options) -> Result<String, CliError> {
    let cell = cfg.cell_at(None)?;
    let dirs = cfg.directions()?;
    let methods = cfg.solver.method.methods();
    let rows = convergence_study(&cell, &methods, &cfg.solver.n, &dirs, opts)?;
    let mut header: Vec<String> = [
        "method",
        "n",
        "matrix_side",
        "elapsed_s",
        "max_steps",
        "max_pruning_residual",
        "redraws",
        "d_asymmetry",
    ]
    .map(String::from)
    .to_vec();
    for k in 0..dirs.len() {
        header.extend(speed_header(&format!("d{}", k + 1)));
    }
    let mut t = Table::new(&header);
    for r in rows {
        let mut row = vec![
            r.method.to_string(),
            r.n.to_string(),
            r.matrix_side.to_string(),
            num(r.elapsed.as_secs_f64()),
            r.max_steps.map_or(String::new(), |s| s.to_string()),
            num(r.max_pruning_residual),
            r.redraws.to_string(),
            r.d_asymmetry.map_or(String::new(), num),
        ];
        for s in &r.speeds {
            row.extend(speed_fields(s));
        }
        t.row(&row);
    }
    Ok(t.finish())
}

/// One row per direction: ascending Voigt and MM N = 0 bound speeds, then
/// the Hashin–Shtrikman speeds where they apply. Bound speeds are left empty
/// where Γ_B is indefinite.
pub fn bounds(cfg: &RunConfig, opts: &Options) -> Result<String, CliError> {
    let cell = cfg.cell_at(None)?;
    let dirs = cfg.directions()?;
    let b = compute_bounds(&cell, opts.formulation)?;
    let mut header: Vec<String> = ["k1", "k2", "k3"].map(String::from).to_vec();
    header.extend(speed_header("voigt"));
    header.extend(speed_header("mm0"));
    for q in ["hs_lower_cl", "hs_lower_ct", "hs_upper_cl", "hs_upper_ct"] {
        header.push(q.into());
    }
    let mut t = Table::new(&header);
    for k in &dirs {
        let mut row: Vec<String> = k.iter().map(|&v| num(v)).collect();
        row.extend(speed_fields(&b.voigt_speeds(k)?));
        match b.speed_bounds(k) {
            Ok(s) => row.extend(speed_fields(&s)),
            // Γ_B mixes Voigt cross terms with reduced principal blocks and can
            // lose definiteness off the axes of high-contrast cells.
            Err(phonomog::Error::NegativeEigenvalue(m)) if !opts.strict => {
                log::warn!("Γ_B indefinite at κ = {:?}: {m}", k.as_slice());
                row.extend(std::iter::repeat_n(String::new(), 3));
            }
            Err(e) => return Err(e.into()),
        }
        match b.hs {
            Some(hs) => row.extend(
                [
                    hs.lower_speeds.0,
                    hs.lower_speeds.1,
                    hs.upper_speeds.0,
                    hs.upper_speeds.1,
                ]
                .map(|v| num(to_mm_per_us(v))),
            ),
            None => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        t.row(&row);
    }
    Ok(t.finish())
}
