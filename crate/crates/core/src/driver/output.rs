use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::compare::ComparisonReport;
use super::run::RunReport;
use crate::error::{Error, Result};

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Element index of grid position `(i, j, l)` in the mesh ordering (`y`
/// fastest, then `x`, then `z`).
fn element_index(dims: [usize; 3], i: usize, j: usize, l: usize) -> usize {
    (l * dims[0] + i) * dims[1] + j
}

/// Six significant digits in positional notation.
fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let decimals = (5 - v.abs().log10().floor() as i32).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Text grid: a header `nelx nely [nelz]`, then one line per row from the
/// top row down (per layer for 3D), 6 significant digits.
pub fn density_grid_text(dims: [usize; 3], values: &[f64]) -> String {
    let mut out = if dims[2] > 1 {
        format!("{} {} {}\n", dims[0], dims[1], dims[2])
    } else {
        format!("{} {}\n", dims[0], dims[1])
    };
    for l in 0..dims[2] {
        for j in (0..dims[1]).rev() {
            let row: Vec<String> = (0..dims[0])
                .map(|i| sig6(values[element_index(dims, i, j, l)]))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

pub fn write_density_grid(path: &Path, dims: [usize; 3], values: &[f64]) -> Result<()> {
    write_file(path, &density_grid_text(dims, values))
}

/// Inverse of [`density_grid_text`]; returns `([nelx, nely, nelz], values)`
/// in mesh element order.
pub fn parse_density_grid(text: &str) -> Result<([usize; 3], Vec<f64>)> {
    let bad = |m: &str| Error::Parse {
        what: "density grid".into(),
        msg: m.to_string(),
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<usize> = lines
        .next()
        .ok_or_else(|| bad("empty file"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("header must hold 2 or 3 integers")))
        .collect::<Result<_>>()?;
    let dims = match header[..] {
        [x, y] => [x, y, 1],
        [x, y, z] => [x, y, z],
        _ => return Err(bad("header must hold 2 or 3 integers")),
    };
    let n = dims.iter().product::<usize>();
    let mut values = vec![0.0; n];
    let mut count = 0;
    for (row, line) in lines.enumerate() {
        let l = row / dims[1];
        let j = dims[1] - 1 - row % dims[1];
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(&format!("bad number '{t}'"))))
            .collect::<Result<_>>()?;
        if nums.len() != dims[0] || l >= dims[2] {
            return Err(bad("row count or length does not match the header"));
        }
        for (i, v) in nums.into_iter().enumerate() {
            values[element_index(dims, i, j, l)] = v;
            count += 1;
        }
    }
    if count != n {
        return Err(bad("row count or length does not match the header"));
    }
    Ok((dims, values))
}

pub fn read_density_grid(path: &Path) -> Result<([usize; 3], Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_density_grid(&text)
}

/// Binary PGM of a 2D field, top row first, density mapped linearly to
/// 0–255.
pub fn pgm_bytes(dims: [usize; 3], values: &[f64]) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", dims[0], dims[1]).into_bytes();
    for j in (0..dims[1]).rev() {
        for i in 0..dims[0] {
            let v = values[element_index(dims, i, j, 0)].clamp(0.0, 1.0);
            out.push((v * 255.0).round() as u8);
        }
    }
    out
}

/// Legacy VTK structured points with the density as cell data.
pub fn vtk_text(dims: [usize; 3], spacing: [f64; 3], values: &[f64]) -> String {
    let n = dims.iter().product::<usize>();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# vtk DataFile Version 3.0\ndensity\nASCII\nDATASET STRUCTURED_POINTS"
    );
    let _ = writeln!(out, "DIMENSIONS {} {} {}", dims[0] + 1, dims[1] + 1, dims[2] + 1);
    let _ = writeln!(out, "ORIGIN 0 0 0");
    let _ = writeln!(out, "SPACING {} {} {}", spacing[0], spacing[1], spacing[2]);
    let _ = writeln!(out, "CELL_DATA {n}\nSCALARS density double 1\nLOOKUP_TABLE default");
    // VTK order: x fastest, then y, then z
    for l in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let _ = writeln!(out, "{}", sig6(values[element_index(dims, i, j, l)]));
            }
        }
    }
    out
}

pub fn iterations_csv(report: &RunReport) -> String {
    let mut out = String::from("k,compliance,volume,max_change,m_esl,rebuilds,refresh,t_dyn_s,t_pod_s,t_opt_s\n");
    for r in &report.records {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{},{},{},{:e},{:e},{:e}",
            r.k,
            r.compliance,
            r.volume,
            r.max_change,
            r.m_esl,
            r.rebuilds,
            u8::from(r.refresh),
            r.t_dyn_s,
            r.t_pod_s,
            r.t_opt_s
        );
    }
    out
}

pub fn spectrum_csv(report: &RunReport) -> String {
    let mut out = String::from("k,j,S_j\n");
    for r in &report.records {
        for (j, s) in r.singular_values.iter().enumerate() {
            let _ = writeln!(out, "{},{},{:e}", r.k, j + 1, s);
        }
    }
    out
}

pub fn inner_csv(report: &RunReport) -> String {
    let mut out = String::from("k,inner,objective,volume,max_change,p,p0\n");
    for (k, r) in &report.inner {
        let _ = writeln!(
            out,
            "{},{},{:e},{:e},{:e},{},{}",
            k, r.iteration, r.objective, r.volume, r.max_change, r.p, r.p0
        );
    }
    out
}

pub fn osdca_csv(report: &RunReport) -> String {
    let mut out = String::from("k,rebuilds,guard_rebuilds,structural_change,refresh,frequency_hz\n");
    for r in &report.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.k,
            r.rebuilds,
            r.guard_rebuilds,
            r.structural_change.map_or(String::new(), |c| format!("{c:e}")),
            u8::from(r.refresh),
            r.frequency_hz.map_or(String::new(), |f| format!("{f:e}"))
        );
    }
    out
}

pub fn comparison_csv(report: &ComparisonReport) -> String {
    let mut out = String::from(
        "k,max_nodal_error,max_column_error,refresh,structural_change,rebuilds,guard_rebuilds,t_full_s,t_reduced_s\n",
    );
    for r in &report.records {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{},{},{},{},{:e},{:e}",
            r.k,
            r.max_nodal_error,
            r.max_column_error,
            u8::from(r.refresh),
            r.structural_change.map_or(String::new(), |c| format!("{c:e}")),
            r.rebuilds,
            r.guard_rebuilds,
            r.full_time_s,
            r.reduced_time_s
        );
    }
    out
}

pub fn ladder_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("nelx,nely,dofs,t_full_s,t_reduced_s,t_baseline_s,speedup,max_nodal_error\n");
    for r in &report.ladder {
        let _ = writeln!(
            out,
            "{},{},{},{:e},{:e},{:e},{:e},{:e}",
            r.nelx,
            r.nely,
            r.dofs,
            r.full_time_s,
            r.reduced_time_s,
            r.baseline_time_s,
            r.speedup(),
            r.max_nodal_error
        );
    }
    out
}

pub fn summary_text(report: &RunReport) -> String {
    let mut s = String::new();
    let f = &report.factorizations;
    let _ = writeln!(s, "case: {}", report.case);
    let _ = writeln!(s, "iterations: {}", report.iterations());
    let _ = writeln!(s, "converged: {}", report.converged);
    if let Some(r) = report.records.last() {
        let _ = writeln!(s, "final volume: {:.6}", r.volume);
        let _ = writeln!(s, "final max change: {:.6e}", r.max_change);
    }
    let _ = writeln!(s, "baseline refreshes: {}", report.total_refreshes());
    let _ = writeln!(
        s,
        "factorizations: total {} (dynamic {}, refresh {}, mass {}, static {}, eigen {}, evaluation {}); counted {}",
        f.total(),
        f.dynamic,
        f.refresh,
        f.mass,
        f.static_opt,
        f.eigen,
        f.evaluation,
        report.factorizations_counted
    );
    let t = &report.times;
    let _ = writeln!(
        s,
        "time [s]: dynamic {:.3}, pod+esl {:.3}, static {:.3}, eigen {:.3}, evaluation {:.3}, total {:.3}",
        t.dynamic, t.pod, t.opt, t.eigen, t.evaluation, t.total
    );
    for (label, e) in [("initial", &report.initial), ("optimized", &report.optimized)] {
        if let Some(e) = e {
            let _ = writeln!(
                s,
                "{label} design: dynamic compliance {:.6e}, first frequency {:.4} Hz, volume {:.6}",
                e.compliance, e.frequency_hz, e.volume
            );
        }
    }
    s
}

/// Writes every CSV log, the density grids (text and PGM for 2D, VTK for
/// 3D) and the summary into `dir`. Returns the paths written.
pub fn export_outputs(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(())
    };
    put("iterations.csv", iterations_csv(report).as_bytes())?;
    put("spectrum.csv", spectrum_csv(report).as_bytes())?;
    put("inner.csv", inner_csv(report).as_bytes())?;
    put("osdca.csv", osdca_csv(report).as_bytes())?;
    put("summary.txt", summary_text(report).as_bytes())?;
    let dims = report.mesh_dims;
    let mut fields: Vec<(String, &[f64])> = report
        .snapshots
        .iter()
        .map(|(k, d)| (format!("density_k{k:03}"), d.values()))
        .collect();
    fields.push(("density_final".into(), report.final_density.values()));
    for (stem, values) in fields {
        put(&format!("{stem}.txt"), density_grid_text(dims, values).as_bytes())?;
        if dims[2] > 1 {
            put(
                &format!("{stem}.vtk"),
                vtk_text(dims, report.element_size, values).as_bytes(),
            )?;
        } else {
            put(&format!("{stem}.pgm"), &pgm_bytes(dims, values))?;
        }
    }
    Ok(written)
}
