use std::ffi::{CStr, CString};
use std::ptr;

use surfvort_ffi::*;

fn last_error() -> String {
    let p = sv_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn octahedron() -> (Vec<f64>, Vec<u32>) {
    let v = vec![
        1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0,
    ];
    let f = vec![
        0, 2, 4, 2, 1, 4, 1, 3, 4, 3, 0, 4, 2, 0, 5, 1, 2, 5, 3, 1, 5, 0, 3, 5,
    ];
    (v, f)
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(sv_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn mesh_from_arrays_and_atlas() {
    let (v, f) = octahedron();
    let mut mesh = ptr::null_mut();
    unsafe {
        assert_eq!(
            sv_mesh_from_arrays(v.as_ptr(), 6, f.as_ptr(), 8, &mut mesh),
            SvStatus::Ok
        );
        assert_eq!(sv_mesh_vertex_count(mesh), 6);
        assert_eq!(sv_mesh_triangle_count(mesh), 8);
        let params = SvCmcfParams {
            tol: 1e-9,
            ..sv_cmcf_default_params()
        };
        let mut atlas = ptr::null_mut();
        assert_eq!(sv_atlas_build(mesh, &params, &mut atlas), SvStatus::Ok);
        assert_eq!(sv_atlas_vertex_count(atlas), 6);
        assert!(sv_atlas_residual(atlas) < 1e-9);
        let mut h = [0.0; 6];
        assert_eq!(
            sv_atlas_factors(atlas, h.as_mut_ptr(), h.len()),
            SvStatus::Ok
        );
        for x in h {
            assert!((x - 1.0).abs() < 1e-9, "{x}");
        }
        let mut small = [0.0; 5];
        assert_eq!(
            sv_atlas_sphere_positions(atlas, small.as_mut_ptr(), small.len()),
            SvStatus::InvalidArgument
        );
        assert!(last_error().contains("18 needed"));
        sv_atlas_free(atlas);
        sv_mesh_free(mesh);
    }
}

#[test]
fn open_mesh_is_a_topology_error() {
    let (v, f) = octahedron();
    let mut mesh = ptr::null_mut();
    let mut atlas = ptr::null_mut();
    unsafe {
        assert_eq!(
            sv_mesh_from_arrays(v.as_ptr(), 6, f.as_ptr(), 7, &mut mesh),
            SvStatus::Ok
        );
        assert_eq!(
            sv_atlas_build(mesh, ptr::null(), &mut atlas),
            SvStatus::Topology
        );
        assert!(atlas.is_null());
        assert!(!last_error().is_empty());
        sv_mesh_free(mesh);
    }
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        assert_eq!(
            sv_mesh_load_obj(ptr::null(), ptr::null_mut()),
            SvStatus::InvalidArgument
        );
        let mut sim = ptr::null_mut();
        assert_eq!(
            sv_simulation_from_json(ptr::null(), &mut sim),
            SvStatus::InvalidArgument
        );
        assert_eq!(
            sv_simulation_step(ptr::null_mut(), 1),
            SvStatus::InvalidArgument
        );
        assert_eq!(sv_mesh_vertex_count(ptr::null()), 0);
        sv_mesh_free(ptr::null_mut());
        sv_simulation_free(ptr::null_mut());
    }
}

#[test]
fn missing_obj_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("none.obj").to_str().unwrap()).unwrap();
    let mut mesh = ptr::null_mut();
    unsafe {
        assert_eq!(sv_mesh_load_obj(path.as_ptr(), &mut mesh), SvStatus::Config);
    }
    assert!(mesh.is_null());
}

#[test]
fn error_is_cleared_by_next_success() {
    let mut sim = ptr::null_mut();
    let bad = CString::new("{").unwrap();
    let good = CString::new("kimura_plane").unwrap();
    unsafe {
        assert_eq!(
            sv_simulation_from_json(bad.as_ptr(), &mut sim),
            SvStatus::Config
        );
        assert!(!sv_last_error().is_null());
        assert_eq!(
            sv_simulation_from_preset(good.as_ptr(), &mut sim),
            SvStatus::Ok
        );
        assert!(sv_last_error().is_null());
        sv_simulation_free(sim);
    }
}

#[test]
fn planar_pair_translates() {
    let json = CString::new(
        r#"{
            "name": "pair",
            "geometry": { "kind": "plane" },
            "vortices": [
                { "position": [1.0, 0.0], "strength": -1.0 },
                { "position": [-1.0, 0.0], "strength": 1.0 }
            ],
            "integrator": { "dt": 0.01, "steps": 100 }
        }"#,
    )
    .unwrap();
    let mut sim = ptr::null_mut();
    unsafe {
        assert_eq!(
            sv_simulation_from_json(json.as_ptr(), &mut sim),
            SvStatus::Ok
        );
        assert_eq!(sv_simulation_vortex_count(sim), 2);
        let (mut e0, mut m0) = (0.0, 0.0);
        assert_eq!(sv_simulation_energy(sim, &mut e0, &mut m0), SvStatus::Ok);
        assert!(m0.is_nan());
        assert_eq!(sv_simulation_step(sim, 100), SvStatus::Ok);
        assert_eq!(sv_simulation_steps_taken(sim), 100);
        assert!((sv_simulation_time(sim) - 1.0).abs() < 1e-12);
        let mut p = [0.0; 6];
        assert_eq!(
            sv_simulation_positions(sim, p.as_mut_ptr(), 6),
            SvStatus::Ok
        );
        let expected = 1.0 / (4.0 * std::f64::consts::PI);
        assert!((p[0] - 1.0).abs() < 1e-12 && (p[1] - expected).abs() < 1e-12);
        let mut e1 = 0.0;
        assert_eq!(
            sv_simulation_energy(sim, &mut e1, ptr::null_mut()),
            SvStatus::Ok
        );
        assert!(((e1 - e0) / e0).abs() < 1e-12);
        sv_simulation_free(sim);
    }
}

#[test]
fn mesh_simulation_reports_metric_hamiltonian() {
    let json = CString::new(
        r#"{
            "name": "mesh",
            "geometry": { "kind": "mesh", "builtin": { "shape": "ellipsoid", "subdivisions": 3, "axes": [1.0, 1.0, 1.5] } },
            "conformal": { "tol": 2e-2 },
            "vortices": [
                { "position": [1.0, 0.0, 0.3], "strength": 1.0 },
                { "position": [-1.0, 0.0, -0.3], "strength": -1.0 }
            ],
            "integrator": { "dt": 0.01, "steps": 10 }
        }"#,
    )
    .unwrap();
    let mut sim = ptr::null_mut();
    unsafe {
        assert_eq!(
            sv_simulation_from_json(json.as_ptr(), &mut sim),
            SvStatus::Ok,
            "{}",
            last_error()
        );
        let (mut e, mut h0) = (0.0, 0.0);
        assert_eq!(sv_simulation_energy(sim, &mut e, &mut h0), SvStatus::Ok);
        assert!(h0.is_finite());
        assert_eq!(sv_simulation_step(sim, 10), SvStatus::Ok);
        let mut h1 = 0.0;
        assert_eq!(
            sv_simulation_energy(sim, ptr::null_mut(), &mut h1),
            SvStatus::Ok
        );
        assert!(((h1 - h0) / h0).abs() < 1e-3);
        let (mut s, mut m) = ([0.0; 6], [0.0; 6]);
        assert_eq!(
            sv_simulation_positions(sim, s.as_mut_ptr(), 6),
            SvStatus::Ok
        );
        assert_eq!(
            sv_simulation_surface_positions(sim, m.as_mut_ptr(), 6),
            SvStatus::Ok
        );
        let norm = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        // On the ellipsoid, x² + y² + (z/1.5)² ≈ 1 up to faceting.
        let q = m[0] * m[0] + m[1] * m[1] + (m[2] / 1.5).powi(2);
        assert!((q - 1.0).abs() < 0.05, "{q}");
        sv_simulation_free(sim);
    }
}

#[test]
fn unknown_preset() {
    let name = CString::new("nope").unwrap();
    let mut sim = ptr::null_mut();
    unsafe {
        assert_eq!(
            sv_simulation_from_preset(name.as_ptr(), &mut sim),
            SvStatus::Config
        );
    }
    assert!(last_error().contains("nope"));
}

/// The generated header must compile as C.
#[test]
fn header_compiles() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/surfvort.h");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{header}\"\nint main(void) {{ SvStatus s = SV_STATUS_OK; SvCmcfParams p = sv_cmcf_default_params(); return (int)s + (int)p.max_iters * 0; }}\n"
        ),
    )
    .unwrap();
    let status = match std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(&src)
        .status()
    {
        Ok(s) => s,
        Err(_) => {
            eprintln!("no C compiler; skipping");
            return;
        }
    };
    assert!(status.success());
}
