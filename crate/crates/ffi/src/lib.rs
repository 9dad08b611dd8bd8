//! C interface. Every object crosses the boundary as an opaque pointer;
//! every fallible call returns an `SvStatus` and leaves a message for
//! `sv_last_error` on the calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use surfvort::conformal::{
    CmcfParams, ConformalAtlas, DEFAULT_DELTA, DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE,
};
use surfvort::dynamics::{
    energy_diagnostics, planar_vortex_velocities, sphere_vortex_velocities,
    surface_vortex_velocities_with_hints, ConformalFactor, Geometry, VortexSystem,
};
use surfvort::geom::Vec3;
use surfvort::integrator::rk4_step;
use surfvort::mesh::TriangleMesh;
use surfvort::pipeline::{self, Prepared};
use surfvort::scenario::Scenario;
use surfvort::Error;

/// Result of every fallible call. Codes 1 to 4 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvStatus {
    Ok = 0,
    Config = 1,
    Topology = 2,
    NotConverged = 3,
    Collision = 4,
    InvalidArgument = 5,
    Panic = 6,
}

/// Parameters of the flow to the sphere.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SvCmcfParams {
    pub delta: f64,
    pub tol: f64,
    pub max_iters: usize,
}

/// A triangle mesh.
pub struct SvMesh(TriangleMesh);

/// A mesh together with its conformal sphere image and factors.
pub struct SvAtlas(ConformalAtlas);

/// A prepared scenario and its current state.
pub struct SvSimulation {
    prepared: Prepared,
    state: VortexSystem,
    time: f64,
    steps: usize,
    hints: Vec<usize>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: SvStatus, message: impl Into<String>) -> SvStatus {
    set_error(message.into());
    status
}

fn from_error(e: Error) -> SvStatus {
    let status = match e.exit_code() {
        2 => SvStatus::Topology,
        3 => SvStatus::NotConverged,
        4 => SvStatus::Collision,
        _ => SvStatus::Config,
    };
    fail(status, e.to_string())
}

/// Runs `body`, turning panics into `SvStatus::Panic`.
fn guard(body: impl FnOnce() -> SvStatus) -> SvStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(SvStatus::Panic, format!("internal panic: {message}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SvStatus> {
    if p.is_null() {
        return Err(fail(SvStatus::InvalidArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SvStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> SvStatus {
    *out = Box::into_raw(Box::new(value));
    SvStatus::Ok
}

unsafe fn write_points(points: &[Vec3], out: *mut f64, len: usize) -> SvStatus {
    if out.is_null() {
        return fail(SvStatus::InvalidArgument, "output buffer is null");
    }
    if len < 3 * points.len() {
        return fail(
            SvStatus::InvalidArgument,
            format!(
                "output buffer holds {len} values, {} needed",
                3 * points.len()
            ),
        );
    }
    let buf = std::slice::from_raw_parts_mut(out, 3 * points.len());
    for (chunk, p) in buf.chunks_exact_mut(3).zip(points) {
        chunk.copy_from_slice(&[p.x, p.y, p.z]);
    }
    SvStatus::Ok
}

unsafe fn write_values(values: &[f64], out: *mut f64, len: usize) -> SvStatus {
    if out.is_null() {
        return fail(SvStatus::InvalidArgument, "output buffer is null");
    }
    if len < values.len() {
        return fail(
            SvStatus::InvalidArgument,
            format!("output buffer holds {len} values, {} needed", values.len()),
        );
    }
    std::slice::from_raw_parts_mut(out, values.len()).copy_from_slice(values);
    SvStatus::Ok
}

macro_rules! require {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(SvStatus::InvalidArgument, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn sv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn sv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads an OBJ file.
#[no_mangle]
pub unsafe extern "C" fn sv_mesh_load_obj(path: *const c_char, out: *mut *mut SvMesh) -> SvStatus {
    guard(|| {
        require!(out);
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match TriangleMesh::load_obj(path) {
            Ok(mesh) => write_out(out, SvMesh(mesh)),
            Err(e) => from_error(e.into()),
        }
    })
}

/// Builds a mesh from `3 * vertex_count` coordinates and
/// `3 * triangle_count` zero-based vertex indices.
#[no_mangle]
pub unsafe extern "C" fn sv_mesh_from_arrays(
    vertices: *const f64,
    vertex_count: usize,
    triangles: *const u32,
    triangle_count: usize,
    out: *mut *mut SvMesh,
) -> SvStatus {
    guard(|| {
        require!(vertices, triangles, out);
        let coords = std::slice::from_raw_parts(vertices, 3 * vertex_count);
        let indices = std::slice::from_raw_parts(triangles, 3 * triangle_count);
        let verts = coords
            .chunks_exact(3)
            .map(|c| Vec3::new(c[0], c[1], c[2]))
            .collect();
        let tris = indices
            .chunks_exact(3)
            .map(|c| [c[0] as usize, c[1] as usize, c[2] as usize])
            .collect();
        match TriangleMesh::new(verts, tris) {
            Ok(mesh) => write_out(out, SvMesh(mesh)),
            Err(e) => from_error(e.into()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn sv_mesh_vertex_count(mesh: *const SvMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.vertex_count())
}

#[no_mangle]
pub unsafe extern "C" fn sv_mesh_triangle_count(mesh: *const SvMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.triangle_count())
}

/// Null is accepted.
#[no_mangle]
pub unsafe extern "C" fn sv_mesh_free(mesh: *mut SvMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

#[no_mangle]
pub extern "C" fn sv_cmcf_default_params() -> SvCmcfParams {
    SvCmcfParams {
        delta: DEFAULT_DELTA,
        tol: DEFAULT_TOLERANCE,
        max_iters: DEFAULT_MAX_ITERS,
    }
}

/// Maps a closed genus-zero mesh to the sphere. `params` may be null for
/// the defaults. The mesh is copied.
#[no_mangle]
pub unsafe extern "C" fn sv_atlas_build(
    mesh: *const SvMesh,
    params: *const SvCmcfParams,
    out: *mut *mut SvAtlas,
) -> SvStatus {
    guard(|| {
        require!(mesh, out);
        let p = params
            .as_ref()
            .copied()
            .unwrap_or_else(|| sv_cmcf_default_params());
        let params = CmcfParams {
            delta: p.delta,
            tol: p.tol,
            max_iters: p.max_iters,
            min_iters: 0,
        };
        let mesh = &(*mesh).0;
        if let Some(reason) = mesh.validate_closed_genus0().rejection_reason() {
            return from_error(Error::Topology(reason));
        }
        match ConformalAtlas::build(mesh.clone(), &params) {
            Ok(atlas) => write_out(out, SvAtlas(atlas)),
            Err(e) => from_error(e.into()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn sv_atlas_vertex_count(atlas: *const SvAtlas) -> usize {
    atlas
        .as_ref()
        .map_or(0, |a| a.0.source_mesh().vertex_count())
}

#[no_mangle]
pub unsafe extern "C" fn sv_atlas_iterations(atlas: *const SvAtlas) -> usize {
    atlas.as_ref().map_or(0, |a| a.0.iterations_used())
}

/// Sphericity residual of the final flow iterate; NaN for a null atlas.
#[no_mangle]
pub unsafe extern "C" fn sv_atlas_residual(atlas: *const SvAtlas) -> f64 {
    atlas
        .as_ref()
        .map_or(f64::NAN, |a| a.0.sphericity_residual())
}

/// Writes `3 * vertex_count` sphere coordinates.
#[no_mangle]
pub unsafe extern "C" fn sv_atlas_sphere_positions(
    atlas: *const SvAtlas,
    out: *mut f64,
    len: usize,
) -> SvStatus {
    guard(|| {
        require!(atlas);
        write_points((*atlas).0.sphere_positions(), out, len)
    })
}

/// Writes one conformal factor `h` per vertex.
#[no_mangle]
pub unsafe extern "C" fn sv_atlas_factors(
    atlas: *const SvAtlas,
    out: *mut f64,
    len: usize,
) -> SvStatus {
    guard(|| {
        require!(atlas);
        write_values((*atlas).0.factors(), out, len)
    })
}

#[no_mangle]
pub unsafe extern "C" fn sv_atlas_free(atlas: *mut SvAtlas) {
    if !atlas.is_null() {
        drop(Box::from_raw(atlas));
    }
}

unsafe fn new_simulation(scenario: &Scenario, out: *mut *mut SvSimulation) -> SvStatus {
    let prepared = match pipeline::prepare(scenario, None) {
        Ok(p) => p,
        Err(e) => return from_error(e),
    };
    let state = prepared.system.clone();
    let hints = vec![0; state.len()];
    write_out(
        out,
        SvSimulation {
            prepared,
            state,
            time: 0.0,
            steps: 0,
            hints,
        },
    )
}

/// Prepares a scenario given as JSON text. Relative mesh paths resolve
/// against the working directory.
#[no_mangle]
pub unsafe extern "C" fn sv_simulation_from_json(
    json: *const c_char,
    out: *mut *mut SvSimulation,
) -> SvStatus {
    guard(|| {
        require!(out);
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Scenario::from_json(text) {
            Ok(scenario) => new_simulation(&scenario, out),
            Err(e) => from_error(e),
        }
    })
}

/// Prepares a bundled preset by name.
#[no_mangle]
pub unsafe extern "C" fn sv_simulation_from_preset(
    name: *const c_char,
    out: *mut *mut SvSimulation,
) -> SvStatus {
    guard(|| {
        require!(out);
        let name = match str_arg(name, "name") {
            Ok(n) => n,
            Err(s) => return s,
        };
        match Scenario::preset(name) {
            Some(scenario) => new_simulation(&scenario, out),
            None => fail(SvStatus::Config, format!("unknown preset `{name}`")),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn sv_simulation_vortex_count(sim: *const SvSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.state.len())
}

#[no_mangle]
pub unsafe extern "C" fn sv_simulation_time(sim: *const SvSimulation) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.time)
}

#[no_mangle]
pub unsafe extern "C" fn sv_simulation_steps_taken(sim: *const SvSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.steps)
}

/// Advances `steps` RK4 steps of the scenario's `dt`. On failure the state
/// stays at the last completed step.
#[no_mangle]
pub unsafe extern "C" fn sv_simulation_step(sim: *mut SvSimulation, steps: usize) -> SvStatus {
    guard(|| {
        require!(sim);
        let sim = &mut *sim;
        let cfg = sim.prepared.scenario.integrator_config();
        for _ in 0..steps {
            let next = match (&sim.prepared.atlas, sim.state.geometry()) {
                (Some(atlas), _) => {
                    let sign = sim.prepared.self_term_sign;
                    let hints = &mut sim.hints;
                    let mut rhs = |s: &VortexSystem| {
                        surface_vortex_velocities_with_hints(s, atlas, sign, hints)
                    };
                    rk4_step(&sim.state, &mut rhs, cfg.dt, cfg.advection)
                }
                (None, Geometry::Plane) => rk4_step(
                    &sim.state,
                    &mut planar_vortex_velocities,
                    cfg.dt,
                    cfg.advection,
                ),
                (None, _) => rk4_step(
                    &sim.state,
                    &mut sphere_vortex_velocities,
                    cfg.dt,
                    cfg.advection,
                ),
            };
            match next {
                Ok(state) => {
                    sim.state = state;
                    sim.steps += 1;
                    sim.time = sim.steps as f64 * cfg.dt;
                }
                Err(e) => return from_error(e.into()),
            }
        }
        SvStatus::Ok
    })
}

/// Writes `3 * vortex_count` coordinates: planar points with z = 0, or
/// unit vectors for the sphere and for meshes (their sphere images).
#[no_mangle]
pub unsafe extern "C" fn sv_simulation_positions(
    sim: *const SvSimulation,
    out: *mut f64,
    len: usize,
) -> SvStatus {
    guard(|| {
        require!(sim);
        write_points((*sim).state.positions(), out, len)
    })
}

/// Like `sv_simulation_positions`, but mesh scenarios report points on
/// the mesh.
#[no_mangle]
pub unsafe extern "C" fn sv_simulation_surface_positions(
    sim: *mut SvSimulation,
    out: *mut f64,
    len: usize,
) -> SvStatus {
    guard(|| {
        require!(sim);
        let sim = &mut *sim;
        let Some(atlas) = &sim.prepared.atlas else {
            return write_points(sim.state.positions(), out, len);
        };
        let mut points = Vec::with_capacity(sim.state.len());
        for (p, hint) in sim.state.positions().iter().zip(sim.hints.iter_mut()) {
            let loc = match atlas.locator().locate(p, *hint) {
                Ok(l) => l,
                Err(e) => return fail(SvStatus::Config, e.to_string()),
            };
            *hint = loc.triangle();
            points.push(atlas.to_surface(&loc).expect("located triangle exists"));
        }
        write_points(&points, out, len)
    })
}

/// Kinetic energy of the current state and, on meshes, the metric
/// Hamiltonian `H̃` (NaN elsewhere). Either output may be null.
#[no_mangle]
pub unsafe extern "C" fn sv_simulation_energy(
    sim: *mut SvSimulation,
    kinetic: *mut f64,
    metric: *mut f64,
) -> SvStatus {
    guard(|| {
        require!(sim);
        let sim = &mut *sim;
        let factor = sim
            .prepared
            .atlas
            .as_ref()
            .map(|a| a as &dyn ConformalFactor);
        match energy_diagnostics(&sim.state, factor, &mut sim.hints) {
            Ok(d) => {
                if !kinetic.is_null() {
                    *kinetic = d.kinetic_excess;
                }
                if !metric.is_null() {
                    *metric = d.metric_hamiltonian.unwrap_or(f64::NAN);
                }
                SvStatus::Ok
            }
            Err(e) => from_error(e.into()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn sv_simulation_free(sim: *mut SvSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
