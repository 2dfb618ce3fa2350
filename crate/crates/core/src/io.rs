//! File formats: mesh export, configuration and settings files, field and
//! history tables, verification reports, and run manifests.
//!
//! All writers are deterministic: identical inputs produce byte-identical
//! files. Floats use Rust's shortest round-trip formatting, so a field CSV
//! read back reproduces the exact bits that were written.

use crate::analysis::{ConeProfile, EndModulusRow, VerificationReport};
use crate::config::{SingularityConfig, SingularPoint};
use crate::error::{MgError, Result};
use crate::mesh::{SurfaceKind, SurfaceMesh};
use crate::moduli::ContinuityTable;
use crate::solver::{LevelRecord, SolverSettings};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

fn format_err(path: &Path, what: impl std::fmt::Display) -> MgError {
    MgError::Format(format!("{}: {what}", path.display()))
}

// ---------------------------------------------------------------------------
// mesh export
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshSidecar {
    pub topology_tag: String,
    pub subdivision_level: u32,
    pub grid: (u32, u32),
    pub extent: (f64, f64),
    pub vertex_count: usize,
    pub triangle_count: usize,
}

/// Writes Wavefront OBJ (`v` lines in vertex order, 1-based `f` lines) plus
/// a JSON sidecar describing the topology; edge lengths are recomputable
/// and deliberately omitted.
pub fn write_mesh_obj(mesh: &SurfaceMesh, obj_path: &Path, sidecar_path: &Path) -> Result<()> {
    let mut obj = String::new();
    for p in &mesh.vertices {
        writeln!(obj, "v {} {} {}", p[0], p[1], p[2]).unwrap();
    }
    for t in &mesh.triangles {
        writeln!(obj, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    fs::write(obj_path, obj)?;

    let sidecar = MeshSidecar {
        topology_tag: match mesh.kind {
            SurfaceKind::Sphere => "sphere".into(),
            SurfaceKind::Torus => "torus".into(),
        },
        subdivision_level: mesh.level,
        grid: mesh.grid,
        extent: mesh.extent,
        vertex_count: mesh.vertex_count(),
        triangle_count: mesh.triangle_count(),
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| format_err(sidecar_path, e))?;
    fs::write(sidecar_path, json + "\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// configuration and settings files
// ---------------------------------------------------------------------------

/// Reads a singularity configuration. Two layouts are accepted: a bare JSON
/// array `[{"vertex": 0, "t": 0.0}, …]`, or an object
/// `{"points": […], "mark": [ints]}` when an ordering matters.
pub fn load_config(path: &Path) -> Result<SingularityConfig> {
    let text = fs::read_to_string(path)?;
    if let Ok(points) = serde_json::from_str::<Vec<SingularPoint>>(&text) {
        return Ok(SingularityConfig { points, mark: None });
    }
    serde_json::from_str::<SingularityConfig>(&text).map_err(|e| format_err(path, e))
}

/// Writes a configuration, using the bare-array layout unless a mark is
/// present.
pub fn save_config(config: &SingularityConfig, path: &Path) -> Result<()> {
    let json = if config.mark.is_none() {
        serde_json::to_string_pretty(&config.points)
    } else {
        serde_json::to_string_pretty(config)
    }
    .map_err(|e| format_err(path, e))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

/// Reads solver settings; absent keys take their defaults.
pub fn load_settings(path: &Path) -> Result<SolverSettings> {
    let text = fs::read_to_string(path)?;
    let settings: SolverSettings =
        serde_json::from_str(&text).map_err(|e| format_err(path, e))?;
    settings.check()?;
    Ok(settings)
}

// ---------------------------------------------------------------------------
// field and history tables
// ---------------------------------------------------------------------------

/// Per-vertex solution CSV with header `vertex_id,u`.
pub fn write_field_csv(values: &[f64], path: &Path) -> Result<()> {
    let mut out = String::from("vertex_id,u\n");
    for (v, x) in values.iter().enumerate() {
        writeln!(out, "{v},{x}").unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a field CSV back; every vertex id in 0..expected must appear
/// exactly once.
pub fn read_field_csv(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut values = vec![f64::NAN; expected];
    let mut seen = vec![false; expected];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("vertex_id")) {
            continue;
        }
        let (id_s, val_s) = line
            .split_once(',')
            .ok_or_else(|| format_err(path, format!("line {}: expected id,value", lineno + 1)))?;
        let id: usize = id_s
            .trim()
            .parse()
            .map_err(|e| format_err(path, format!("line {}: {e}", lineno + 1)))?;
        let val: f64 = val_s
            .trim()
            .parse()
            .map_err(|e| format_err(path, format!("line {}: {e}", lineno + 1)))?;
        if id >= expected {
            return Err(format_err(
                path,
                format!("vertex id {id} out of range (mesh has {expected})"),
            ));
        }
        if seen[id] {
            return Err(format_err(path, format!("vertex id {id} repeated")));
        }
        seen[id] = true;
        values[id] = val;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(format_err(path, format!("vertex id {missing} missing")));
    }
    Ok(values)
}

/// Convergence history CSV with columns `level,sup_diff,iters,residual`;
/// the first solved level has no predecessor, so its sup_diff is empty.
pub fn write_history_csv(history: &[LevelRecord], path: &Path) -> Result<()> {
    let mut out = String::from("level,sup_diff,iters,residual\n");
    for rec in history {
        let sup = rec.sup_diff.map(|d| d.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", rec.level, sup, rec.newton_iters, rec.residual_sup)
            .unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Legacy-VTK unstructured grid with one point scalar, for viewers.
pub fn write_vtk(mesh: &SurfaceMesh, values: &[f64], name: &str, path: &Path) -> Result<()> {
    if values.len() != mesh.vertex_count() {
        return Err(MgError::InvalidConfig("field length mismatch".into()));
    }
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    writeln!(out, "{name}").unwrap();
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(out, "POINTS {} double", mesh.vertex_count()).unwrap();
    for p in &mesh.vertices {
        writeln!(out, "{} {} {}", p[0], p[1], p[2]).unwrap();
    }
    let nt = mesh.triangle_count();
    writeln!(out, "CELLS {nt} {}", 4 * nt).unwrap();
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(out, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        out.push_str("5\n");
    }
    writeln!(out, "POINT_DATA {}", mesh.vertex_count()).unwrap();
    writeln!(out, "SCALARS {name} double 1").unwrap();
    out.push_str("LOOKUP_TABLE default\n");
    for x in values {
        writeln!(out, "{x}").unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// verification artifacts
// ---------------------------------------------------------------------------

pub fn write_report_json(report: &VerificationReport, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report).map_err(|e| format_err(path, e))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

/// Cone profiles as CSV: one row per (singularity, ring).
pub fn write_cone_csv(profiles: &[ConeProfile], path: &Path) -> Result<()> {
    let mut out = String::from("singularity,ring,outer_radius,ring_max,local_extremum\n");
    for (i, prof) in profiles.iter().enumerate() {
        for (k, (&r, &g)) in prof.radii.iter().zip(&prof.ring_max).enumerate() {
            writeln!(out, "{i},{k},{r},{g},{}", prof.local_extremum).unwrap();
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Nested-annulus moduli as CSV: one row per (singularity, halving).
pub fn write_moduli_csv(end_moduli: &[Vec<EndModulusRow>], path: &Path) -> Result<()> {
    let mut out =
        String::from("singularity,halving,r_inner,r_outer,modulus_base,modulus_induced\n");
    for (i, rows) in end_moduli.iter().enumerate() {
        for row in rows {
            writeln!(
                out,
                "{i},{},{},{},{},{}",
                row.halving, row.r_inner, row.r_outer, row.modulus_base, row.modulus_induced
            )
            .unwrap();
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Continuity-probe table as CSV; skipped rows keep empty numeric fields.
pub fn write_continuity_csv(table: &ContinuityTable, path: &Path) -> Result<()> {
    let mut out = String::from("delta,change,ratio,skipped\n");
    for row in &table.rows {
        let change = row.change.map(|c| c.to_string()).unwrap_or_default();
        let ratio = row.ratio.map(|r| r.to_string()).unwrap_or_default();
        writeln!(out, "{},{change},{ratio},{}", row.delta, row.skipped).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// run manifests
// ---------------------------------------------------------------------------

/// Echo of a CLI invocation, written into the output directory so any run
/// can be reproduced from its artifacts alone.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub surface: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub settings_path: Option<String>,
    pub out_dir: String,
    pub seed: u64,
    pub threads: usize,
    pub tool_version: String,
}

pub fn write_run_manifest(manifest: &RunManifest, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest).map_err(|e| format_err(path, e))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

/// Input manifest for a moduli experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModuliManifest {
    pub m: usize,
    pub count: usize,
    pub seed: u64,
    pub deltas: Vec<f64>,
}

pub fn load_moduli_manifest(path: &Path) -> Result<ModuliManifest> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_sphere, build_torus};
    use tempfile::tempdir;

    #[test]
    fn config_round_trip_accepts_both_layouts() {
        let dir = tempdir().unwrap();
        let bare = dir.path().join("bare.json");
        fs::write(&bare, r#"[{"vertex": 3, "t": 0.5}, {"vertex": 7, "t": -0.25}]"#).unwrap();
        let cfg = load_config(&bare).unwrap();
        assert_eq!(cfg.vertices(), vec![3, 7]);
        assert_eq!(cfg.heights(), vec![0.5, -0.25]);
        assert!(cfg.mark.is_none());

        let marked = dir.path().join("marked.json");
        fs::write(
            &marked,
            r#"{"points": [{"vertex": 1, "t": 0.0}, {"vertex": 2, "t": 0.1}], "mark": [1, 0]}"#,
        )
        .unwrap();
        let cfg2 = load_config(&marked).unwrap();
        assert_eq!(cfg2.mark, Some(vec![1, 0]));

        let out = dir.path().join("copy.json");
        save_config(&cfg2, &out).unwrap();
        let back = load_config(&out).unwrap();
        assert_eq!(back, cfg2);
    }

    #[test]
    fn field_csv_round_trips_exact_bits() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let values = vec![0.1, -2.5e-17, 3.0, std::f64::consts::PI];
        write_field_csv(&values, &path).unwrap();
        let back = read_field_csv(&path, values.len()).unwrap();
        assert_eq!(values, back);
    }

    #[test]
    fn field_csv_rejects_missing_and_duplicate_ids() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "vertex_id,u\n0,1.0\n0,2.0\n").unwrap();
        assert!(matches!(read_field_csv(&path, 2), Err(MgError::Format(_))));
        fs::write(&path, "vertex_id,u\n0,1.0\n").unwrap();
        assert!(matches!(read_field_csv(&path, 2), Err(MgError::Format(_))));
    }

    #[test]
    fn obj_export_matches_mesh_counts() {
        let mesh = build_sphere(1).unwrap();
        let dir = tempdir().unwrap();
        let obj = dir.path().join("m.obj");
        let side = dir.path().join("m.json");
        write_mesh_obj(&mesh, &obj, &side).unwrap();
        let text = fs::read_to_string(&obj).unwrap();
        let v = text.lines().filter(|l| l.starts_with("v ")).count();
        let f = text.lines().filter(|l| l.starts_with("f ")).count();
        assert_eq!(v, mesh.vertex_count());
        assert_eq!(f, mesh.triangle_count());
        // 1-based face indices
        assert!(!text.lines().any(|l| l.starts_with("f 0 ")));
        let sc: MeshSidecar =
            serde_json::from_str(&fs::read_to_string(&side).unwrap()).unwrap();
        assert_eq!(sc.topology_tag, "sphere");
        assert_eq!(sc.subdivision_level, 1);
    }

    #[test]
    fn vtk_layout_is_well_formed() {
        let mesh = build_torus(4, 4, 1.0, 1.0).unwrap();
        let values: Vec<f64> = (0..mesh.vertex_count()).map(|i| i as f64).collect();
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.vtk");
        write_vtk(&mesh, &values, "u", &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains(&format!("POINTS {} double", mesh.vertex_count())));
        assert!(text.contains(&format!("POINT_DATA {}", mesh.vertex_count())));
        assert!(text.contains("SCALARS u double 1"));
    }

    #[test]
    fn settings_defaults_fill_missing_keys() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.json");
        fs::write(&path, r#"{"newton_tol": 1e-9}"#).unwrap();
        let s = load_settings(&path).unwrap();
        assert_eq!(s.newton_tol, 1e-9);
        assert_eq!(s.max_iters, SolverSettings::default().max_iters);
        fs::write(&path, "not json").unwrap();
        assert!(matches!(load_settings(&path), Err(MgError::Format(_))));
    }

    #[test]
    fn history_csv_has_one_row_per_level() {
        let recs = vec![
            LevelRecord {
                level: 0,
                sup_diff: None,
                newton_iters: 5,
                residual_sup: 1e-11,
                max_gradient: 0.5,
                area: 12.0,
            },
            LevelRecord {
                level: 1,
                sup_diff: Some(0.01),
                newton_iters: 4,
                residual_sup: 2e-11,
                max_gradient: 0.6,
                area: 12.1,
            },
        ];
        let dir = tempdir().unwrap();
        let path = dir.path().join("h.csv");
        write_history_csv(&recs, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "level,sup_diff,iters,residual");
        assert!(lines[1].starts_with("0,,5,"));
        assert!(lines[2].starts_with("1,0.01,4,"));
    }
}
