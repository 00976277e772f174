//! File outputs: the time-series CSV, legacy-ASCII VTK snapshots of the
//! magnetization, and the nodal field format used for initial conditions.
//! All floating-point values are written with 17 significant digits, so
//! reruns produce byte-identical files and round trips are exact.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::assembly::NodalVectorField;
use crate::diagnostics::TimeSeries;
use crate::mesh::Mesh;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("time series has no samples")]
    EmptySeries,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
}

fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

pub const CSV_HEADER: &str = "t,E_total,E_exchange,E_dmi,mx,my,mz,v_l2,constraint_l1,stability_ok";

/// Serializes the recorded samples; one row per sample.
pub fn timeseries_to_csv(series: &TimeSeries) -> Result<String, OutputError> {
    if series.samples.is_empty() {
        return Err(OutputError::EmptySeries);
    }
    let mut s = String::new();
    let _ = writeln!(s, "{CSV_HEADER}");
    for sample in &series.samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            g17(sample.t),
            g17(sample.e_total),
            g17(sample.e_exchange),
            g17(sample.e_dmi),
            g17(sample.avg_m[0]),
            g17(sample.avg_m[1]),
            g17(sample.avg_m[2]),
            g17(sample.v_norm_l2),
            g17(sample.constraint_l1),
            if sample.stability_ok { 1 } else { 0 }
        );
    }
    Ok(s)
}

pub fn write_timeseries_csv<P: AsRef<Path>>(
    series: &TimeSeries,
    path: P,
) -> Result<(), OutputError> {
    let text = timeseries_to_csv(series)?;
    std::fs::write(path.as_ref(), text).map_err(|source| OutputError::Io {
        path: path.as_ref().display().to_string(),
        source,
    })
}

/// Legacy ASCII unstructured-grid VTK file with the magnetization as point
/// vector data named "m"; loadable by standard viewers.
pub fn vtk_to_string(mesh: &Mesh, m: &NodalVectorField) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 2.0");
    let _ = writeln!(s, "tangent-llg magnetization");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.vertex_count());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", g17(v[0]), g17(v[1]), g17(v[2]));
    }
    let _ = writeln!(s, "CELLS {} {}", mesh.cell_count(), 5 * mesh.cell_count());
    for c in mesh.cells() {
        let _ = writeln!(s, "4 {} {} {} {}", c[0], c[1], c[2], c[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.cell_count());
    for _ in 0..mesh.cell_count() {
        let _ = writeln!(s, "10");
    }
    let _ = writeln!(s, "POINT_DATA {}", mesh.vertex_count());
    let _ = writeln!(s, "VECTORS m double");
    for z in 0..m.vertex_count() {
        let v = m.get(z);
        let _ = writeln!(s, "{} {} {}", g17(v[0]), g17(v[1]), g17(v[2]));
    }
    s
}

pub fn write_vtk<P: AsRef<Path>>(
    mesh: &Mesh,
    m: &NodalVectorField,
    path: P,
) -> Result<(), OutputError> {
    std::fs::write(path.as_ref(), vtk_to_string(mesh, m)).map_err(|source| OutputError::Io {
        path: path.as_ref().display().to_string(),
        source,
    })
}

const FIELD_MAGIC: &str = "nodalfield 1";

pub fn field_to_string(m: &NodalVectorField) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{FIELD_MAGIC}");
    let _ = writeln!(s, "{}", m.vertex_count());
    for z in 0..m.vertex_count() {
        let v = m.get(z);
        let _ = writeln!(s, "{} {} {}", g17(v[0]), g17(v[1]), g17(v[2]));
    }
    s
}

pub fn save_field<P: AsRef<Path>>(m: &NodalVectorField, path: P) -> Result<(), OutputError> {
    std::fs::write(path.as_ref(), field_to_string(m)).map_err(|source| OutputError::Io {
        path: path.as_ref().display().to_string(),
        source,
    })
}

pub fn load_field<P: AsRef<Path>>(path: P) -> Result<NodalVectorField, OutputError> {
    let origin = path.as_ref().display().to_string();
    let text = std::fs::read_to_string(path.as_ref()).map_err(|source| OutputError::Io {
        path: origin.clone(),
        source,
    })?;
    parse_field(&text, &origin)
}

pub fn parse_field(text: &str, origin: &str) -> Result<NodalVectorField, OutputError> {
    let err = |line: usize, msg: String| OutputError::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));
    let (ln, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    if header.trim() != FIELD_MAGIC {
        return Err(err(ln, format!("expected header '{FIELD_MAGIC}'")));
    }
    let (ln, count) = lines
        .next()
        .ok_or_else(|| err(2, "missing vertex count".into()))?;
    let n: usize = count
        .trim()
        .parse()
        .map_err(|_| err(ln, "bad vertex count".into()))?;
    let mut field = NodalVectorField::zeros(n);
    for z in 0..n {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| err(2 + n, "unexpected end of file".into()))?;
        let mut v = [0.0; 3];
        let mut it = line.split_whitespace();
        for o in &mut v {
            *o = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err(ln, "expected three components".into()))?;
        }
        field.set(z, v);
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::Sample;
    use crate::integrators::SchemeKind;
    use crate::mesh::{generate_type1, Mesh};

    fn single_sample_series() -> TimeSeries {
        TimeSeries {
            scheme: SchemeKind::Tps1,
            samples: vec![Sample {
                t: 0.0,
                e_total: 1.5,
                e_exchange: 1.0,
                e_dmi: 0.5,
                e_lower: 0.0,
                avg_m: [0.01, -0.01, 0.9999],
                v_norm_l2: 0.0,
                constraint_l1: 0.0,
                stability_ok: true,
            }],
            steps: Vec::new(),
            initial_exchange: 1.0,
            initial_dmi: 0.5,
        }
    }

    #[test]
    fn single_sample_gives_two_lines() {
        let csv = timeseries_to_csv(&single_sample_series()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].ends_with(",1"));
    }

    #[test]
    fn empty_series_is_an_error() {
        let mut series = single_sample_series();
        series.samples.clear();
        assert!(matches!(
            timeseries_to_csv(&series),
            Err(OutputError::EmptySeries)
        ));
    }

    #[test]
    fn csv_is_deterministic() {
        let a = timeseries_to_csv(&single_sample_series()).unwrap();
        let b = timeseries_to_csv(&single_sample_series()).unwrap();
        assert_eq!(a, b);
    }

    type ParsedVtk = (Vec<[f64; 3]>, Vec<[usize; 4]>, Vec<[f64; 3]>);

    fn parse_vtk(text: &str) -> ParsedVtk {
        let mut lines = text.lines();
        for _ in 0..4 {
            lines.next().unwrap();
        }
        let np: usize = lines
            .next()
            .unwrap()
            .split_whitespace()
            .nth(1)
            .unwrap()
            .parse()
            .unwrap();
        let mut points = Vec::new();
        for _ in 0..np {
            let vals: Vec<f64> = lines
                .next()
                .unwrap()
                .split_whitespace()
                .map(|s| s.parse().unwrap())
                .collect();
            points.push([vals[0], vals[1], vals[2]]);
        }
        let nc: usize = lines
            .next()
            .unwrap()
            .split_whitespace()
            .nth(1)
            .unwrap()
            .parse()
            .unwrap();
        let mut cells = Vec::new();
        for _ in 0..nc {
            let vals: Vec<usize> = lines
                .next()
                .unwrap()
                .split_whitespace()
                .map(|s| s.parse().unwrap())
                .collect();
            assert_eq!(vals[0], 4);
            cells.push([vals[1], vals[2], vals[3], vals[4]]);
        }
        lines.next().unwrap(); // CELL_TYPES
        for _ in 0..nc {
            assert_eq!(lines.next().unwrap().trim(), "10");
        }
        lines.next().unwrap(); // POINT_DATA
        lines.next().unwrap(); // VECTORS
        let mut vecs = Vec::new();
        for _ in 0..np {
            let vals: Vec<f64> = lines
                .next()
                .unwrap()
                .split_whitespace()
                .map(|s| s.parse().unwrap())
                .collect();
            vecs.push([vals[0], vals[1], vals[2]]);
        }
        (points, cells, vecs)
    }

    #[test]
    fn vtk_skeleton_for_single_tet() {
        let mesh = Mesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap();
        let m = NodalVectorField::constant(4, [0.0, 0.0, 1.0]);
        let text = vtk_to_string(&mesh, &m);
        assert!(text.contains("POINTS 4 double"));
        assert!(text.contains("CELLS 1 5"));
        assert!(text.contains("CELL_TYPES 1"));
        assert!(text.contains("VECTORS m double"));
        let (points, cells, vecs) = parse_vtk(&text);
        assert_eq!(points.len(), 4);
        assert_eq!(cells, vec![[0, 1, 2, 3]]);
        assert_eq!(vecs[2], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn vtk_roundtrip_recovers_values() {
        let mesh = generate_type1([2, 2, 1], [2.0, 2.0, 1.0]).unwrap();
        let m = crate::assembly::interpolate_nodal(
            |x| [x[0].sin(), (x[1] * 3.0).cos(), x[2] - 0.37],
            &mesh,
        );
        let (points, cells, vecs) = parse_vtk(&vtk_to_string(&mesh, &m));
        assert_eq!(cells.len(), 24);
        for z in 0..mesh.vertex_count() {
            let p = mesh.vertex(z);
            let v = m.get(z);
            for d in 0..3 {
                assert!((points[z][d] - p[d]).abs() < 1e-15);
                assert!((vecs[z][d] - v[d]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn field_file_roundtrip() {
        let m = crate::assembly::interpolate_nodal(
            |x| [x[0], -x[1], 0.25],
            &generate_type1([2, 1, 1], [1.0, 1.0, 1.0]).unwrap(),
        );
        let back = parse_field(&field_to_string(&m), "inline").unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn field_parse_reports_line() {
        let e = parse_field("nodalfield 1\n2\n0 0 1\n", "inline").unwrap_err();
        assert!(e.to_string().contains(":4:"), "{e}");
    }
}
