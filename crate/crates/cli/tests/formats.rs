use proptest::prelude::*;
use thermo_enclosure::meshio::{format_mesh, parse_mesh};
use thermo_enclosure::output::{self, num};
use thermo_enclosure_core::enclosure::{enclose, DistanceEstimate, FitMode};
use thermo_enclosure_core::geometry::{generate_benchmark_mesh, Scene};
use thermo_enclosure_core::indicator::IndicatorPoint;
use thermo_enclosure_core::Ball;

fn scene(cavity: bool) -> Scene {
    Scene {
        outer: Ball::new([0.0; 3], 1.0),
        cavity: cavity.then(|| Ball::new([0.0; 3], 0.3)),
        probe_ball: Ball::new([2.0, 0.0, 0.0], 0.2),
    }
}

#[test]
fn mesh_round_trip_is_exact() {
    for cavity in [true, false] {
        let mesh = generate_benchmark_mesh(&scene(cavity), 1).unwrap();
        let text = format_mesh(&mesh);
        assert!(text.starts_with("tetmesh 1\n"));
        let back = parse_mesh(&text).unwrap();
        assert_eq!(back, mesh);
        assert_eq!(format_mesh(&back), text);
    }
}

const CUBE_TET: &str = "tetmesh 1
4 1 4
0 0 0
1 0 0
0 1 0
0 0 1
0 1 2 3
0 2 1 1
0 1 3 1
0 3 2 1
1 2 3 1
";

#[test]
fn single_tet_parses() {
    let m = parse_mesh(CUBE_TET).unwrap();
    assert_eq!((m.nodes.len(), m.tets.len(), m.facets.len()), (4, 1, 4));
}

#[test]
fn malformed_meshes_are_rejected() {
    let cases = [
        ("tetmesh 2\n", "header"),
        (&CUBE_TET.replace("4 1 4", "4 1"), "counts"),
        (&CUBE_TET.replace("4 1 4", "4 x 4"), "count"),
        (&CUBE_TET.replace("0 1 2 3\n", "0 1 2 7\n"), "out of range"),
        (&CUBE_TET.replace("1 2 3 1\n", "1 2 3\n"), "tag"),
        (&CUBE_TET.replace("1 2 3 1\n", "1 2 3 5\n"), "tag"),
        (&CUBE_TET.replace("4 1 4", "4 1 3"), "trailing"),
        (&CUBE_TET.replace("4 1 4", "4 1 5"), "end of file"),
        (&CUBE_TET.replace("0 0 1\n", "0 0 nan\n"), "coordinate"),
    ];
    for (text, what) in cases {
        let e = parse_mesh(text).unwrap_err().to_string();
        assert!(e.contains(what), "{what}: {e}");
    }
    // a boundary face left out of the facet list
    let text = CUBE_TET.replace("4 1 4", "4 1 3").replace("1 2 3 1\n", "");
    let e = parse_mesh(&text).unwrap_err().to_string();
    assert!(e.contains("untagged"), "{e}");
    // inverted facet orientation
    let text = CUBE_TET.replace("0 2 1 1", "0 1 2 1");
    assert!(parse_mesh(&text).is_err());
}

proptest! {
    #[test]
    fn seventeen_digits_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let s = num(v);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
    }
}

#[test]
fn non_finite_values_are_written_and_read() {
    assert_eq!(num(f64::NAN), "NaN");
    assert!(num(f64::NAN).parse::<f64>().unwrap().is_nan());
    assert_eq!(num(f64::INFINITY).parse::<f64>().unwrap(), f64::INFINITY);
}

#[test]
fn sweep_csv_has_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let pts: Vec<IndicatorPoint> = (0..3)
        .map(|i| IndicatorPoint { tau: 1.0 + i as f64, i1: 0.1 / (i + 1) as f64, i2: 0.5, is: 0.3, is_localized: (i == 1).then_some((1.6, 0.25)), ..Default::default() })
        .collect();
    output::write_sweep(&path, &pts).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "tau,I1,I2,Is,Is_localized,J,j,E,e,decomp_residual1,decomp_residual_combined,solver_residual");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 12);
    assert_eq!(row[4], "NaN");
    let t = output::read_sweep(&path).unwrap();
    assert_eq!(t.tau, vec![1.0, 2.0, 3.0]);
    assert_eq!(t.i1[2], 0.1 / 3.0);
    assert_eq!(t.is, vec![0.3; 3]);
}

fn estimate(id: &str, d: f64) -> DistanceEstimate {
    DistanceEstimate {
        probe_id: id.into(),
        mode: FitMode::Heat,
        p: [2.0, 0.0, 0.0],
        eta: 0.2,
        alpha: -2.0 * d,
        beta: 1.25,
        gamma: -3.0,
        d_hat: d,
        stderr: 1e-3,
        window: (4.0, 10.0),
        n_used: 12,
        n_skipped: 1,
    }
}

#[test]
fn estimates_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.csv");
    let ests = vec![estimate("a", 1.5), estimate("b-2", 0.7)];
    output::write_estimates(&path, &ests).unwrap();
    let back = output::read_estimates(&path).unwrap();
    assert_eq!(back.len(), 2);
    for (a, b) in ests.iter().zip(&back) {
        assert_eq!((&a.probe_id, a.mode, a.alpha, a.beta, a.gamma, a.d_hat, a.stderr, a.n_used, a.n_skipped), (&b.probe_id, b.mode, b.alpha, b.beta, b.gamma, b.d_hat, b.stderr, b.n_used, b.n_skipped));
    }
    std::fs::write(&path, "probe_id,mode\n").unwrap();
    assert!(output::read_estimates(&path).is_err());
}

#[test]
fn enclosure_vtk_layout() {
    let r = enclose(&[estimate("a", 1.5)], [-1.0; 3], [1.0; 3], 16).unwrap();
    let text = output::format_enclosure_vtk(&r);
    assert!(text.contains("DATASET STRUCTURED_POINTS\nDIMENSIONS 16 16 16\n"));
    assert!(text.contains("POINT_DATA 4096\nSCALARS excluded int 1\n"));
    let values: Vec<&str> = text.lines().skip_while(|l| !l.starts_with("LOOKUP_TABLE")).skip(1).flat_map(|l| l.split(' ')).collect();
    assert_eq!(values.len(), 4096);
    let ones = values.iter().filter(|v| **v == "1").count();
    assert_eq!(ones, 4096 - r.possible_count());
}

#[test]
fn field_vtk_layout() {
    let mesh = generate_benchmark_mesh(&scene(true), 0).unwrap();
    let n = mesh.nodes.len();
    let w = vec![[1.0, 2.0, 3.0]; n];
    let xi = vec![0.5; n];
    let text = output::format_field_vtk(&mesh, &w, &xi, "t");
    assert!(text.contains(&format!("POINTS {n} double")));
    assert!(text.contains(&format!("CELLS {} {}", mesh.tets.len(), 5 * mesh.tets.len())));
    assert!(text.contains(&format!("POINT_DATA {n}\nVECTORS w double")));
    assert!(text.contains("SCALARS Xi double 1"));
    assert_eq!(text.lines().filter(|l| *l == "10").count(), mesh.tets.len());
}
