mod common;

use std::process::Command;

use phasefield_core::lscheme::StepReport;
use phasefield_core::mesh::{generate_unit_square_mesh, insert_slit, parse_mesh, write_mesh, write_mesh_to, load_mesh, SlitSpec};
use phasefield_core::output::{write_series_csv, write_vtk, write_vtk_to, CSV_HEADER};
use phasefield_core::subsolvers::{FeSystem, FieldState};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mesh_round_trip_is_bit_exact(r in 0u32..4, frac in 1u32..8, vertical in any::<bool>()) {
        let n = 2 * (1u32 << r);
        let k = (frac % n).max(1) as f64 / n as f64;
        let slit = if vertical { SlitSpec::new([k, 0.0], [k, 0.5]) } else { SlitSpec::new([0.0, k], [0.5, k]) };
        let mesh = insert_slit(&generate_unit_square_mesh(r), &slit).unwrap();
        let mut a = Vec::new();
        write_mesh_to(&mesh, &mut a).unwrap();
        let back = parse_mesh(std::str::from_utf8(&a).unwrap()).unwrap();
        prop_assert_eq!(&back, &mesh);
        let mut b = Vec::new();
        write_mesh_to(&back, &mut b).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn mesh_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mesh");
    let mesh = generate_unit_square_mesh(2);
    write_mesh(&mesh, &path).unwrap();
    let back = load_mesh(&path).unwrap();
    assert_eq!(back, mesh);
    for (p, q) in back.nodes().iter().zip(mesh.nodes()) {
        assert_eq!(p[0].to_bits(), q[0].to_bits());
        assert_eq!(p[1].to_bits(), q[1].to_bits());
    }
}

#[test]
fn vtk_passes_independent_reader() {
    let sys = FeSystem::new(generate_unit_square_mesh(0)).unwrap();
    let state = FieldState::initial(&sys);
    let mut buf = Vec::new();
    write_vtk_to(&state, sys.mesh(), &mut buf).unwrap();
    let s = common::check_vtk(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!((s.points, s.cells), (9, 4));
    assert_eq!(s.scalars, ["phi", "Xi", "L"]);
    assert_eq!(s.vectors, ["u"]);
}

#[test]
fn vtk_of_slit_mesh_keeps_duplicated_points() {
    let sys = common::sen_shear_system(2);
    let mut state = FieldState::initial(&sys);
    state.u.iter_mut().enumerate().for_each(|(k, v)| *v = 1e-3 * k as f64);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.vtk");
    write_vtk(&state, sys.mesh(), &path).unwrap();
    let s = common::check_vtk(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(s.points, 81 + 4);
    assert_eq!(s.cells, 64);
}

#[test]
fn vtk_checker_rejects_broken_files() {
    let sys = FeSystem::new(generate_unit_square_mesh(0)).unwrap();
    let mut buf = Vec::new();
    write_vtk_to(&FieldState::initial(&sys), sys.mesh(), &mut buf).unwrap();
    let good = String::from_utf8(buf).unwrap();
    assert!(common::check_vtk(&good.replace("CELLS 4 20", "CELLS 4 21")).is_err());
    assert!(common::check_vtk(&good.replace("\n9\n", "\n5\n")).is_err());
    assert!(common::check_vtk(&good.replace("4 0 1", "4 0 99")).is_err());
    let truncated = &good[..good.len() - 20];
    assert!(common::check_vtk(truncated).is_err());
}

#[test]
fn csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let r = StepReport {
        step: 1,
        t: 1e-4,
        u_top: 1e-4,
        outer_iterations: 2,
        converged: true,
        residual_u: 0.0,
        residual_phi: 0.0,
        max_l: 5e-10,
        fx: 6.424159123456789e-3,
        fy: 0.0,
        min_phi: 0.999999,
    };
    write_series_csv(&[r.clone(), StepReport { t: 2e-4, ..r }], &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines[0], "t,u_top,Fx,Fy,outer_iters,converged,maxL,min_phi");
    assert_eq!(lines.len(), 3);
    let fx: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(fx, 6.424159123456789e-3);
}

fn pfl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pfl"))
}

#[test]
fn cli_check_reports_pass_count() {
    let out = pfl().arg("check").output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("5/5 checks passed"), "{stdout}");
}

#[test]
fn cli_missing_config_names_the_path() {
    let out = pfl().args(["run", "/no/such/file.cfg"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/file.cfg"));
}

#[test]
fn cli_usage_error() {
    let out = pfl().arg("frobnicate").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn cli_run_and_mesh_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let preset = concat!(env!("CARGO_MANIFEST_DIR"), "/presets/example1.cfg");
    let out = pfl()
        .env("PFL_OUTPUT_DIR", dir.path())
        .args(["run", preset, "--mesh.refinements=1", "--loading.steps=3", "--lscheme.strategy=dynamic", "--output.vtk_every=2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sen_shear.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    for step in [2, 3] {
        let vtk = std::fs::read_to_string(dir.path().join(format!("sen_shear_{step:05}.vtk"))).unwrap();
        common::check_vtk(&vtk).unwrap();
    }
    let out = pfl()
        .env("PFL_OUTPUT_DIR", dir.path())
        .args(["mesh", preset, "--mesh.refinements=1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let mesh = load_mesh(&dir.path().join("sen_shear.mesh")).unwrap();
    assert_eq!(mesh.num_cells(), 16);

    let out = pfl().args(["run", preset, "--lscheme.alpha=3"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("lscheme.alpha"));
}
