//! Scenario execution and file outputs.
//!
//! Plane and sphere scenarios integrate directly. Mesh scenarios first
//! build the conformal atlas, move the vortices to the sphere image, run
//! the modified sphere dynamics there and map every recorded state back to
//! the mesh.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha1::{Digest, Sha1};

use crate::conformal::{CmcfParams, ConformalAtlas};
use crate::dynamics::{
    balance_vorticity, energy_diagnostics, planar_field_velocity, planar_vortex_velocities,
    sphere_field_velocity, sphere_vortex_velocities, stream_function, surface_field_velocity,
    surface_vortex_velocities_with_hints, BalanceMode, DynamicsError, Geometry, PointVortex,
    SelfTermSign, VortexSystem,
};
use crate::error::{Error, EXIT_COLLISION, EXIT_OK};
use crate::geom::Vec3;
use crate::integrator::{self, EnergyObserver, Observer, RunOutcome, TrajectoryRecord};
use crate::kernels::{PlanePoint, SpherePoint};
use crate::mesh::TriangleMesh;
use crate::scenario::{draw_samples, to_vec3, BalanceSpec, Scenario};
use crate::transport::{self, SurfaceLocation};

/// Git-style content hash: SHA-1 of `"blob <len>\0"` followed by the bytes.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha1::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .fold(String::with_capacity(40), |mut s, b| {
            write!(s, "{b:02x}").expect("writing to a string");
            s
        })
}

/// A scenario with its geometry built and its vortices placed.
#[derive(Debug)]
pub struct Prepared {
    pub scenario: Scenario,
    /// Vortices on the plane, the sphere, or the sphere image of the mesh.
    pub system: VortexSystem,
    pub atlas: Option<ConformalAtlas>,
    pub mesh_hash: Option<String>,
    pub self_term_sign: SelfTermSign,
}

fn snap_to_sphere(atlas: &ConformalAtlas, p: &Vec3) -> Result<Vec3, Error> {
    let loc = transport::closest_location(atlas.source_mesh(), p);
    atlas
        .to_sphere(&loc)
        .map_err(|e| Error::Config(format!("cannot map {p:?} to the sphere: {e}")))
}

fn config_from_dynamics(e: DynamicsError) -> Error {
    Error::Config(format!("initial vortices: {e}"))
}

/// Builds geometry and initial vortices. `sign` overrides the scenario's
/// self-term sign.
pub fn prepare(scenario: &Scenario, sign: Option<SelfTermSign>) -> Result<Prepared, Error> {
    scenario.validate()?;
    let geometry = scenario.geometry();
    let (atlas, mesh_hash) = match scenario.load_mesh()? {
        Some((mesh, bytes)) => {
            let hash = git_blob_hash(&bytes);
            let report = mesh.validate_closed_genus0();
            if let Some(reason) = report.rejection_reason() {
                return Err(Error::Topology(reason));
            }
            log::info!(
                "mesh: {} vertices, {} triangles; building conformal map",
                mesh.vertex_count(),
                mesh.triangle_count()
            );
            let atlas = ConformalAtlas::build(mesh, &scenario.conformal)?;
            log::info!(
                "conformal map: {} iterations, sphericity residual {:e}",
                atlas.iterations_used(),
                atlas.sphericity_residual()
            );
            (Some(atlas), Some(hash))
        }
        None => (None, None),
    };

    let place = |p: &Vec3| -> Result<Vec3, Error> {
        match &atlas {
            Some(a) => snap_to_sphere(a, p),
            None => Ok(*p),
        }
    };

    let mut vortices = Vec::new();
    for v in &scenario.vortices {
        vortices.push(PointVortex::new(
            place(&to_vec3(&v.position, geometry))?,
            v.strength,
        ));
    }
    for spec in &scenario.samplers {
        let existing: Vec<Vec3> = vortices.iter().map(|v| v.position).collect();
        let drawn = match &atlas {
            Some(a) => {
                let weights: Vec<f64> = (0..a.source_mesh().triangle_count())
                    .map(|t| a.source_mesh().face_area(t).unwrap_or(0.0))
                    .collect();
                let mut draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec3 {
                    let loc = transport::sample_points_with(a.source_mesh(), &weights, 1, rng)
                        .expect("weights match triangles")[0];
                    transport::position_of(a.source_mesh(), &loc).expect("sampled triangle exists")
                };
                // Separation is measured on the mesh, so compare mesh points.
                let on_mesh: Vec<Vec3> = existing
                    .iter()
                    .map(|p| sphere_to_surface(a, p, &mut 0))
                    .collect::<Result<_, _>>()?;
                draw_samples(spec, geometry, &on_mesh, Some(&mut draw))?
                    .into_iter()
                    .map(|(p, w)| Ok((place(&p)?, w)))
                    .collect::<Result<Vec<_>, Error>>()?
            }
            None => draw_samples(spec, geometry, &existing, None)?,
        };
        vortices.extend(drawn.into_iter().map(|(p, w)| PointVortex::new(p, w)));
    }

    let system = VortexSystem::new(geometry, &vortices).map_err(config_from_dynamics)?;
    let system = match (&scenario.balance, geometry) {
        (BalanceSpec::CounterVortex(p), _) => {
            let position = place(&to_vec3(p, geometry))?;
            balance_vorticity(&system, BalanceMode::CounterVortex(position))
                .map_err(config_from_dynamics)?
        }
        (BalanceSpec::Reject, Geometry::ClosedSurface) => {
            balance_vorticity(&system, BalanceMode::Reject).map_err(config_from_dynamics)?
        }
        (BalanceSpec::Reject, _) => system,
    };
    Ok(Prepared {
        scenario: scenario.clone(),
        system,
        atlas,
        mesh_hash,
        self_term_sign: sign.unwrap_or(scenario.self_term_sign),
    })
}

fn sphere_to_surface(atlas: &ConformalAtlas, p: &Vec3, hint: &mut usize) -> Result<Vec3, Error> {
    let loc = atlas
        .locator()
        .locate(p, *hint)
        .map_err(|e| Error::Dynamics(DynamicsError::Factor(e)))?;
    *hint = loc.triangle();
    Ok(atlas.to_surface(&loc).expect("located triangle exists"))
}

/// Records sphere positions, their images on the mesh and `H̃`.
pub struct SurfaceObserver<'a> {
    atlas: &'a ConformalAtlas,
    hints: Vec<usize>,
}

impl<'a> SurfaceObserver<'a> {
    pub fn new(atlas: &'a ConformalAtlas) -> Self {
        Self {
            atlas,
            hints: Vec::new(),
        }
    }
}

impl Observer for SurfaceObserver<'_> {
    fn observe(
        &mut self,
        step: usize,
        time: f64,
        sys: &VortexSystem,
        with_diagnostics: bool,
    ) -> Result<TrajectoryRecord, DynamicsError> {
        self.hints.resize(sys.len(), 0);
        let mut surface = Vec::with_capacity(sys.len());
        for (p, hint) in sys.positions().iter().zip(self.hints.iter_mut()) {
            let loc = self.atlas.locator().locate(p, *hint)?;
            *hint = loc.triangle();
            surface.push(self.atlas.to_surface(&loc)?);
        }
        let diagnostics = if with_diagnostics {
            Some(energy_diagnostics(sys, Some(self.atlas), &mut self.hints)?)
        } else {
            None
        };
        Ok(TrajectoryRecord {
            step,
            time,
            positions: sys.positions().to_vec(),
            surface_positions: Some(surface),
            diagnostics,
        })
    }
}

/// Integrates a prepared scenario without touching the file system.
pub fn simulate(prepared: &Prepared) -> RunOutcome {
    let cfg = prepared.scenario.integrator_config();
    let sys = &prepared.system;
    match (&prepared.atlas, sys.geometry()) {
        (Some(atlas), _) => {
            let mut hints = vec![0; sys.len()];
            let sign = prepared.self_term_sign;
            let mut rhs =
                |s: &VortexSystem| surface_vortex_velocities_with_hints(s, atlas, sign, &mut hints);
            integrator::run(sys, &mut rhs, &cfg, &mut SurfaceObserver::new(atlas))
        }
        (None, Geometry::Plane) => integrator::run(
            sys,
            &mut planar_vortex_velocities,
            &cfg,
            &mut EnergyObserver::new(None),
        ),
        (None, _) => integrator::run(
            sys,
            &mut sphere_vortex_velocities,
            &cfg,
            &mut EnergyObserver::new(None),
        ),
    }
}

/// Conserved quantity used for drift reporting: `H̃` on meshes, `E`
/// otherwise.
pub fn conserved(record: &TrajectoryRecord) -> Option<f64> {
    record
        .diagnostics
        .map(|d| d.metric_hamiltonian.unwrap_or(d.kinetic_excess))
}

/// `|X_last − X_0| / |X_0|` over the records carrying diagnostics.
pub fn relative_drift(records: &[TrajectoryRecord]) -> Option<f64> {
    let mut values = records.iter().filter_map(conserved);
    let first = values.next()?;
    let last = values.next_back().unwrap_or(first);
    Some((last - first).abs() / first.abs().max(f64::MIN_POSITIVE))
}

/// Largest `|X_k − X_0| / |X_0|` over the records carrying diagnostics.
pub fn max_relative_drift(records: &[TrajectoryRecord]) -> Option<f64> {
    let mut values = records.iter().filter_map(conserved);
    let first = values.next()?;
    Some(values.fold(0.0, |m, x| {
        f64::max(m, (x - first).abs() / first.abs().max(f64::MIN_POSITIVE))
    }))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

/// `step,time,id,mx,my,mz,sx,sy,sz`; `m` is the simulated surface, `s`
/// the sphere image (empty on the plane).
pub fn trajectories_csv(records: &[TrajectoryRecord], geometry: Geometry, every: usize) -> String {
    let mut out = String::from("step,time,id,mx,my,mz,sx,sy,sz\n");
    let last = records.last().map(|r| r.step);
    for r in records
        .iter()
        .filter(|r| r.step % every.max(1) == 0 || Some(r.step) == last)
    {
        for (id, p) in r.positions.iter().enumerate() {
            let m = r.surface_positions.as_ref().map_or(p, |s| &s[id]);
            let s = match geometry {
                Geometry::Plane => String::from(",,"),
                _ => format!("{:?},{:?},{:?}", p.x, p.y, p.z),
            };
            writeln!(
                out,
                "{},{:?},{id},{:?},{:?},{:?},{s}",
                r.step, r.time, m.x, m.y, m.z
            )
            .expect("string write");
        }
    }
    out
}

/// `step,time,E,H_tilde,total_vorticity`; `H_tilde` is empty except on
/// meshes.
pub fn energy_csv(records: &[TrajectoryRecord]) -> String {
    let mut out = String::from("step,time,E,H_tilde,total_vorticity\n");
    for r in records {
        if let Some(d) = r.diagnostics {
            writeln!(
                out,
                "{},{:?},{:?},{},{:?}",
                r.step,
                r.time,
                d.kinetic_excess,
                opt(d.metric_hamiltonian),
                d.total_vorticity
            )
            .expect("string write");
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub geometry: Geometry,
    pub dt: f64,
    pub steps: usize,
    pub advection: integrator::Advection,
    pub diagnostics_every: usize,
    pub self_term_sign: SelfTermSign,
    pub vortex_count: usize,
    pub total_vorticity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conformal: Option<ConformalSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh_hash: Option<String>,
    pub status: String,
    pub exit_code: i32,
    pub completed_steps: usize,
    pub energy_quantity: &'static str,
    pub initial_energy: Option<f64>,
    pub final_energy: Option<f64>,
    pub final_energy_drift: Option<f64>,
    pub max_energy_drift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformalSummary {
    pub delta: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub iterations_used: usize,
    pub sphericity_residual: f64,
    pub median_edge_residual: f64,
    pub median_angle_distortion_deg: f64,
}

impl ConformalSummary {
    fn new(params: &CmcfParams, atlas: &ConformalAtlas) -> Self {
        Self {
            delta: params.delta,
            tol: params.tol,
            max_iters: params.max_iters,
            iterations_used: atlas.iterations_used(),
            sphericity_residual: atlas.sphericity_residual(),
            median_edge_residual: atlas.median_edge_residual(),
            median_angle_distortion_deg: atlas.median_angle_distortion_deg(),
        }
    }
}

fn write_file(
    dir: &Path,
    name: &str,
    contents: &str,
    written: &mut Vec<String>,
) -> Result<(), Error> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(name.to_string());
    Ok(())
}

/// Result of [`run`]: the manifest plus the in-memory trajectory.
#[derive(Debug)]
pub struct RunReport {
    pub manifest: Manifest,
    pub outcome: RunOutcome,
    pub out_dir: PathBuf,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        self.manifest.exit_code
    }
}

/// Runs a scenario end to end and writes every enabled output into
/// `out_dir` (or the scenario's output directory). A collision keeps the
/// partial outputs and sets exit code 4 in the manifest.
pub fn run(
    scenario: &Scenario,
    out_dir: Option<&Path>,
    sign: Option<SelfTermSign>,
) -> Result<RunReport, Error> {
    let prepared = prepare(scenario, sign)?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| scenario.outputs.directory.clone());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut written = Vec::new();
    let outputs = &scenario.outputs;

    if let Some(atlas) = &prepared.atlas {
        if outputs.sphere_map {
            write_file(
                &dir,
                "sphere.obj",
                &atlas.sphere_mesh().to_obj_string(),
                &mut written,
            )?;
        }
        if outputs.factors {
            write_file(&dir, "factors.csv", &atlas.factors_csv(), &mut written)?;
            write_file(&dir, "grad_h.csv", &atlas.grad_h_csv(), &mut written)?;
        }
    }
    if let Some(grid) = &outputs.field {
        let spec = GridSpec::parse(grid)?;
        write_file(
            &dir,
            "field.csv",
            &field_csv(&prepared, &spec)?,
            &mut written,
        )?;
    }

    let outcome = simulate(&prepared);
    let geometry = prepared.system.geometry();
    if outputs.trajectories {
        let csv = trajectories_csv(&outcome.records, geometry, scenario.diagnostics_every);
        write_file(&dir, "trajectories.csv", &csv, &mut written)?;
    }
    if outputs.energy {
        write_file(
            &dir,
            "energy.csv",
            &energy_csv(&outcome.records),
            &mut written,
        )?;
    }

    let (status, exit_code, error) = match &outcome.abort {
        None => ("completed".to_string(), EXIT_OK, None),
        Some(abort) => {
            let e = Error::from(abort.error.clone());
            let status = if e.exit_code() == EXIT_COLLISION {
                "collision"
            } else {
                "aborted"
            };
            (
                status.to_string(),
                e.exit_code(),
                Some(format!("step {}: {}", abort.step, abort.error)),
            )
        }
    };
    let energies: Vec<f64> = outcome.records.iter().filter_map(conserved).collect();
    written.push("manifest.json".into());
    let cfg = scenario.integrator_config();
    let manifest = Manifest {
        scenario: scenario.name.clone(),
        geometry,
        dt: cfg.dt,
        steps: cfg.steps,
        advection: cfg.advection,
        diagnostics_every: cfg.diagnostics_every,
        self_term_sign: prepared.self_term_sign,
        vortex_count: prepared.system.len(),
        total_vorticity: prepared.system.total_vorticity(),
        conformal: prepared
            .atlas
            .as_ref()
            .map(|a| ConformalSummary::new(&scenario.conformal, a)),
        mesh_hash: prepared.mesh_hash.clone(),
        status,
        exit_code,
        completed_steps: outcome.records.last().map_or(0, |r| r.step),
        energy_quantity: if geometry == Geometry::ClosedSurface {
            "H_tilde"
        } else {
            "E"
        },
        initial_energy: energies.first().copied(),
        final_energy: energies.last().copied(),
        final_energy_drift: relative_drift(&outcome.records),
        max_energy_drift: max_relative_drift(&outcome.records),
        error,
        outputs: written,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let path = dir.join("manifest.json");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(RunReport {
        manifest,
        outcome,
        out_dir: dir,
    })
}

/// Evaluation points for `field`.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// `ring:R:N[:cx:cy[:cz]]`: a circle of radius `R` around a center on
    /// the plane, or of geodesic radius `R` around an axis on the sphere
    /// (default axis `+z`).
    Ring {
        radius: f64,
        count: usize,
        center: Option<Vec<f64>>,
    },
    /// `rect:x0:x1:y0:y1:nx:ny`, plane only.
    Rect {
        x: (f64, f64),
        y: (f64, f64),
        nx: usize,
        ny: usize,
    },
    /// `latlon:NLAT:NLON`, cell-centered latitudes.
    LatLon { nlat: usize, nlon: usize },
    /// `fibonacci:N`, near-uniform sphere points.
    Fibonacci { count: usize },
}

impl GridSpec {
    pub fn parse(spec: &str) -> Result<Self, Error> {
        let bad = || Error::Config(format!("invalid grid spec `{spec}`"));
        let mut parts = spec.split(':');
        let kind = parts.next().ok_or_else(bad)?;
        let rest: Vec<&str> = parts.collect();
        let f = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(bad)
        };
        let n = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
        match (kind, rest.len()) {
            ("ring", 2 | 4 | 5) => Ok(GridSpec::Ring {
                radius: f(rest[0])?,
                count: n(rest[1])?,
                center: if rest.len() > 2 {
                    Some(rest[2..].iter().map(|s| f(s)).collect::<Result<_, _>>()?)
                } else {
                    None
                },
            }),
            ("rect", 6) => Ok(GridSpec::Rect {
                x: (f(rest[0])?, f(rest[1])?),
                y: (f(rest[2])?, f(rest[3])?),
                nx: n(rest[4])?,
                ny: n(rest[5])?,
            }),
            ("latlon", 2) => Ok(GridSpec::LatLon {
                nlat: n(rest[0])?,
                nlon: n(rest[1])?,
            }),
            ("fibonacci", 1) => Ok(GridSpec::Fibonacci { count: n(rest[0])? }),
            _ => Err(bad()),
        }
    }

    /// Points on the plane (z = 0) or the unit sphere.
    pub fn points(&self, geometry: Geometry) -> Result<Vec<Vec3>, Error> {
        let planar = geometry == Geometry::Plane;
        let wrong = || {
            Err(Error::Config(format!(
                "grid {self:?} does not fit {geometry} geometry"
            )))
        };
        use std::f64::consts::{PI, TAU};
        Ok(match self {
            GridSpec::Ring {
                radius,
                count,
                center,
            } => {
                if planar {
                    let c = match center.as_deref() {
                        None => Vec3::zeros(),
                        Some([x, y]) | Some([x, y, _]) => Vec3::new(*x, *y, 0.0),
                        Some(_) => return wrong(),
                    };
                    (0..*count)
                        .map(|k| {
                            let a = TAU * k as f64 / *count as f64;
                            c + Vec3::new(radius * a.cos(), radius * a.sin(), 0.0)
                        })
                        .collect()
                } else {
                    let axis = match center.as_deref() {
                        None => Vec3::z(),
                        Some([x, y, z]) => Vec3::new(*x, *y, *z),
                        Some(_) => return wrong(),
                    };
                    let axis = SpherePoint::new(axis)
                        .ok_or_else(|| Error::Config("zero ring axis".into()))?;
                    let a = *axis.vec();
                    let helper = if a.x.abs() < 0.9 {
                        Vec3::x()
                    } else {
                        Vec3::y()
                    };
                    let e1 = a.cross(&helper).normalize();
                    let e2 = a.cross(&e1);
                    (0..*count)
                        .map(|k| {
                            let phi = TAU * k as f64 / *count as f64;
                            a * radius.cos() + (e1 * phi.cos() + e2 * phi.sin()) * radius.sin()
                        })
                        .collect()
                }
            }
            GridSpec::Rect { x, y, nx, ny } => {
                if !planar {
                    return wrong();
                }
                let lerp = |(a, b): (f64, f64), i: usize, n: usize| {
                    if n <= 1 {
                        a
                    } else {
                        a + (b - a) * i as f64 / (n - 1) as f64
                    }
                };
                (0..*ny)
                    .flat_map(|j| {
                        (0..*nx).map(move |i| Vec3::new(lerp(*x, i, *nx), lerp(*y, j, *ny), 0.0))
                    })
                    .collect()
            }
            GridSpec::LatLon { nlat, nlon } => {
                if planar {
                    return wrong();
                }
                (0..*nlat)
                    .flat_map(|i| {
                        let theta = PI * (i as f64 + 0.5) / *nlat as f64;
                        (0..*nlon).map(move |j| {
                            let phi = TAU * j as f64 / *nlon as f64;
                            Vec3::new(
                                theta.sin() * phi.cos(),
                                theta.sin() * phi.sin(),
                                theta.cos(),
                            )
                        })
                    })
                    .collect()
            }
            GridSpec::Fibonacci { count } => {
                if planar {
                    return wrong();
                }
                let golden = PI * (3.0 - 5f64.sqrt());
                (0..*count)
                    .map(|k| {
                        let z = 1.0 - (2.0 * k as f64 + 1.0) / *count as f64;
                        let r = (1.0 - z * z).sqrt();
                        let phi = golden * k as f64;
                        Vec3::new(r * phi.cos(), r * phi.sin(), z)
                    })
                    .collect()
            }
        })
    }
}

/// Pushes a sphere tangent vector at `p` forward to the mesh through the
/// piecewise-linear correspondence of triangle `t`.
fn push_forward(atlas: &ConformalAtlas, loc: &SurfaceLocation, p: &Vec3, u: &Vec3) -> Vec3 {
    let t = loc.triangle();
    let [a, b, c] = atlas.sphere_mesh().corners(t);
    let normals = [b.cross(&c), c.cross(&a), a.cross(&b)];
    let volumes: Vec<f64> = normals.iter().map(|n| p.dot(n)).collect();
    let rates: Vec<f64> = normals.iter().map(|n| u.dot(n)).collect();
    let total: f64 = volumes.iter().sum();
    let total_rate: f64 = rates.iter().sum();
    let m = atlas.source_mesh().corners(t);
    (0..3)
        .map(|k| m[k] * (rates[k] / total - volumes[k] * total_rate / (total * total)))
        .sum()
}

/// `index,x,y,z,ux,uy,uz,psi,status`. On meshes positions and velocities
/// are given on the mesh and the stream column is flagged unsupported.
pub fn field_csv(prepared: &Prepared, grid: &GridSpec) -> Result<String, Error> {
    let sys = &prepared.system;
    let geometry = sys.geometry();
    let points = grid.points(geometry)?;
    let stream_header = if geometry == Geometry::ClosedSurface {
        "stream=unsupported"
    } else {
        "psi"
    };
    let mut out = format!("index,x,y,z,ux,uy,uz,{stream_header},status\n");
    let mut hint = 0;
    for (k, x) in points.iter().enumerate() {
        let evaluated: Result<(Vec3, Vec3, Option<f64>), DynamicsError> =
            match (&prepared.atlas, geometry) {
                (None, Geometry::Plane) => {
                    planar_field_velocity(&PlanePoint::from_embedded(x), sys)
                        .and_then(|u| Ok((*x, u, Some(stream_function(x, sys)?))))
                }
                (None, _) => {
                    sphere_field_velocity(&SpherePoint::new(*x).expect("unit grid point"), sys)
                        .and_then(|u| Ok((*x, u, Some(stream_function(x, sys)?))))
                }
                (Some(atlas), _) => {
                    let sp = SpherePoint::new(*x).expect("unit grid point");
                    surface_field_velocity(&sp, sys, atlas).and_then(|u| {
                        let loc = atlas.locator().locate(x, hint)?;
                        hint = loc.triangle();
                        let m = atlas.to_surface(&loc)?;
                        Ok((m, push_forward(atlas, &loc, x, &u), None))
                    })
                }
            };
        match evaluated {
            Ok((m, u, psi)) => writeln!(
                out,
                "{k},{:?},{:?},{:?},{:?},{:?},{:?},{},ok",
                m.x,
                m.y,
                m.z,
                u.x,
                u.y,
                u.z,
                opt(psi)
            ),
            Err(DynamicsError::FieldSingularity { .. }) => {
                let m = match &prepared.atlas {
                    Some(atlas) => sphere_to_surface(atlas, x, &mut hint)?,
                    None => *x,
                };
                writeln!(out, "{k},{:?},{:?},{:?},,,,,singular", m.x, m.y, m.z)
            }
            Err(e) => return Err(e.into()),
        }
        .expect("string write");
    }
    Ok(out)
}

/// Field of a scenario's initial configuration.
pub fn field(scenario: &Scenario, grid: &str) -> Result<String, Error> {
    let spec = GridSpec::parse(grid)?;
    let prepared = prepare(scenario, None)?;
    field_csv(&prepared, &spec)
}

fn load_genus0(path: &Path) -> Result<TriangleMesh, Error> {
    let mesh = TriangleMesh::load_obj(path).map_err(|e| match e {
        crate::mesh::MeshError::Io(source) => Error::io(path, source),
        other => Error::from(other),
    })?;
    if let Some(reason) = mesh.validate_closed_genus0().rejection_reason() {
        return Err(Error::Topology(reason));
    }
    Ok(mesh)
}

/// `index,triangle,s,t,mx,my,mz,sx,sy,sz` for `count` area-weighted draws,
/// with positions on the mesh and on its sphere image.
pub fn sample_csv(atlas: &ConformalAtlas, count: usize, seed: u64) -> Result<String, Error> {
    let source = atlas.source_mesh();
    let weights: Vec<f64> = (0..source.triangle_count())
        .map(|t| source.face_area(t))
        .collect::<Result<_, _>>()?;
    let locations = transport::sample_points(atlas.sphere_mesh(), &weights, count, seed)
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut out = String::from("index,triangle,s,t,mx,my,mz,sx,sy,sz\n");
    for (k, loc) in locations.iter().enumerate() {
        let m = atlas.to_surface(loc).expect("sampled triangle exists");
        let s = atlas.to_sphere(loc).expect("sampled triangle exists");
        let (bs, bt) = loc.bary();
        writeln!(
            out,
            "{k},{},{bs:?},{bt:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            loc.triangle(),
            m.x,
            m.y,
            m.z,
            s.x,
            s.y,
            s.z
        )
        .expect("string write");
    }
    Ok(out)
}

pub fn sample(
    mesh_path: &Path,
    count: usize,
    seed: u64,
    params: &CmcfParams,
) -> Result<String, Error> {
    let atlas = ConformalAtlas::build(load_genus0(mesh_path)?, params)?;
    sample_csv(&atlas, count, seed)
}

/// Summary of a standalone conformal map.
#[derive(Debug, Clone, Serialize)]
pub struct ConformalReport {
    pub mesh: String,
    pub mesh_hash: String,
    pub vertices: usize,
    pub triangles: usize,
    #[serde(flatten)]
    pub summary: ConformalSummary,
    pub h_min: f64,
    pub h_max: f64,
}

impl ConformalReport {
    pub fn to_text(&self) -> String {
        let s = &self.summary;
        format!(
            "mesh: {}\nmesh_hash: {}\nvertices: {}\ntriangles: {}\ndelta: {}\ntol: {}\nmax_iters: {}\n\
             iterations: {}\nsphericity_residual: {:e}\nmedian_edge_residual: {:e}\n\
             median_angle_distortion_deg: {:e}\nh_min: {}\nh_max: {}\n",
            self.mesh,
            self.mesh_hash,
            self.vertices,
            self.triangles,
            s.delta,
            s.tol,
            s.max_iters,
            s.iterations_used,
            s.sphericity_residual,
            s.median_edge_residual,
            s.median_angle_distortion_deg,
            self.h_min,
            self.h_max
        )
    }
}

/// Maps a mesh to the sphere and writes `sphere.obj`, `factors.csv`,
/// `grad_h.csv` and `report.txt` into `out_dir`.
pub fn conformal_map(
    mesh_path: &Path,
    params: &CmcfParams,
    out_dir: &Path,
) -> Result<ConformalReport, Error> {
    params
        .validate()
        .map_err(|e| Error::Config(e.to_string()))?;
    let bytes = fs::read(mesh_path).map_err(|e| Error::io(mesh_path, e))?;
    let mesh = load_genus0(mesh_path)?;
    let atlas = ConformalAtlas::build(mesh, params)?;
    let h = atlas.factors();
    let report = ConformalReport {
        mesh: mesh_path.display().to_string(),
        mesh_hash: git_blob_hash(&bytes),
        vertices: atlas.source_mesh().vertex_count(),
        triangles: atlas.source_mesh().triangle_count(),
        summary: ConformalSummary::new(params, &atlas),
        h_min: h.iter().copied().fold(f64::INFINITY, f64::min),
        h_max: h.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    write_file(
        out_dir,
        "sphere.obj",
        &atlas.sphere_mesh().to_obj_string(),
        &mut written,
    )?;
    write_file(out_dir, "factors.csv", &atlas.factors_csv(), &mut written)?;
    write_file(out_dir, "grad_h.csv", &atlas.grad_h_csv(), &mut written)?;
    write_file(out_dir, "report.txt", &report.to_text(), &mut written)?;
    Ok(report)
}
