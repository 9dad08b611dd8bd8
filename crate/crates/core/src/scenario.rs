//! JSON run descriptions and the bundled presets.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conformal::CmcfParams;
use crate::dynamics::{Geometry, SelfTermSign};
use crate::error::Error;
use crate::geom::Vec3;
use crate::integrator::{Advection, IntegratorConfig};
use crate::mesh::TriangleMesh;
use crate::shapes;

/// Procedurally generated meshes usable in place of an OBJ file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum BuiltinMesh {
    Icosphere {
        subdivisions: u32,
        #[serde(default = "one")]
        radius: f64,
    },
    Ellipsoid {
        subdivisions: u32,
        axes: [f64; 3],
    },
    Blob {
        subdivisions: u32,
    },
    Torus {
        major: f64,
        minor: f64,
        segments: usize,
        rings: usize,
    },
}

fn one() -> f64 {
    1.0
}

impl BuiltinMesh {
    pub fn generate(&self) -> Result<TriangleMesh, Error> {
        let bad = |what: &str| Err(Error::Config(format!("builtin mesh: {what}")));
        match *self {
            BuiltinMesh::Icosphere {
                subdivisions,
                radius,
            } => {
                if subdivisions > 7 || !(radius > 0.0 && radius.is_finite()) {
                    return bad("icosphere needs subdivisions <= 7 and a positive radius");
                }
                Ok(shapes::icosphere(subdivisions, radius))
            }
            BuiltinMesh::Ellipsoid { subdivisions, axes } => {
                if subdivisions > 7 || axes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                    return bad("ellipsoid needs subdivisions <= 7 and positive axes");
                }
                Ok(shapes::ellipsoid(subdivisions, axes[0], axes[1], axes[2]))
            }
            BuiltinMesh::Blob { subdivisions } => {
                if subdivisions > 7 {
                    return bad("blob needs subdivisions <= 7");
                }
                Ok(shapes::blob(subdivisions))
            }
            BuiltinMesh::Torus {
                major,
                minor,
                segments,
                rings,
            } => {
                if !(major > minor && minor > 0.0) || segments < 3 || rings < 3 {
                    return bad("torus needs major > minor > 0 and at least 3 segments and rings");
                }
                Ok(shapes::torus(major, minor, segments, rings))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    Plane,
    Sphere,
    /// A closed genus-zero mesh, from an OBJ file (relative paths resolve
    /// against the scenario file) or a builtin generator.
    Mesh {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        builtin: Option<BuiltinMesh>,
    },
}

impl GeometrySpec {
    pub fn geometry(&self) -> Geometry {
        match self {
            GeometrySpec::Plane => Geometry::Plane,
            GeometrySpec::Sphere => Geometry::Sphere,
            GeometrySpec::Mesh { .. } => Geometry::ClosedSurface,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexSpec {
    /// `[x, y]` or `[x, y, z]`. Sphere positions are normalized; mesh
    /// positions snap to the closest surface point.
    pub position: Vec<f64>,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrengthLaw {
    Constant {
        value: f64,
    },
    Uniform {
        min: f64,
        max: f64,
    },
    /// `+value, −value, +value, …`
    Alternating {
        value: f64,
    },
}

/// Ball restricting sampled positions: a disc on the plane, a cap of the
/// given chordal radius on the sphere, a Euclidean ball around a point on
/// meshes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub count: usize,
    pub strength: StrengthLaw,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
    /// Rejects draws closer than this to any vortex placed before.
    #[serde(default)]
    pub min_separation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BalanceSpec {
    #[default]
    Reject,
    CounterVortex(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub dt: f64,
    pub steps: usize,
    /// Defaults to the geometry's natural scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advection: Option<Advection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "yes")]
    pub trajectories: bool,
    #[serde(default = "yes")]
    pub energy: bool,
    #[serde(default = "yes")]
    pub sphere_map: bool,
    #[serde(default = "yes")]
    pub factors: bool,
    /// Grid specification for `field.csv`, written after the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            trajectories: true,
            energy: true,
            sphere_map: true,
            factors: true,
            field: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub vortices: Vec<VortexSpec>,
    #[serde(default)]
    pub samplers: Vec<SamplerSpec>,
    #[serde(default)]
    pub balance: BalanceSpec,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub conformal: CmcfParams,
    #[serde(default)]
    pub self_term_sign: SelfTermSign,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default = "one_step")]
    pub diagnostics_every: usize,
}

fn one_step() -> usize {
    1
}

/// Bundled presets as `(name, JSON)`.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "kimura_plane",
        include_str!("../scenarios/kimura_plane.json"),
    ),
    (
        "leapfrog_plane",
        include_str!("../scenarios/leapfrog_plane.json"),
    ),
    (
        "random_cloud",
        include_str!("../scenarios/random_cloud.json"),
    ),
    ("taylor", include_str!("../scenarios/taylor.json")),
    (
        "kimura_sphere",
        include_str!("../scenarios/kimura_sphere.json"),
    ),
    (
        "leapfrog_sphere",
        include_str!("../scenarios/leapfrog_sphere.json"),
    ),
    (
        "taylor_sphere",
        include_str!("../scenarios/taylor_sphere.json"),
    ),
    (
        "leapfrog_mesh",
        include_str!("../scenarios/leapfrog_mesh.json"),
    ),
    ("taylor_mesh", include_str!("../scenarios/taylor_mesh.json")),
];

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut scenario = Self::from_json(&text)?;
        if let GeometrySpec::Mesh {
            path: Some(mesh), ..
        } = &mut scenario.geometry
        {
            if mesh.is_relative() {
                if let Some(dir) = path.parent() {
                    *mesh = dir.join(&*mesh);
                }
            }
        }
        Ok(scenario)
    }

    pub fn preset(name: &str) -> Option<Self> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, json)| Self::from_json(json).expect("bundled presets parse"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry.geometry()
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        IntegratorConfig {
            dt: self.integrator.dt,
            steps: self.integrator.steps,
            advection: self
                .integrator
                .advection
                .unwrap_or_else(|| Advection::for_geometry(self.geometry())),
            diagnostics_every: self.diagnostics_every,
        }
    }

    /// Static checks; referenced files must exist.
    pub fn validate(&self) -> Result<(), Error> {
        let config = |m: String| Err(Error::Config(m));
        self.integrator_config().validate().map_err(Error::Config)?;
        let advection = self.integrator_config().advection;
        match (self.geometry(), advection) {
            (Geometry::Plane, Advection::Planar) => {}
            (Geometry::Plane, _) | (_, Advection::Planar) => {
                return config(format!(
                    "advection {advection:?} does not fit {} geometry",
                    self.geometry()
                ))
            }
            _ => {}
        }
        if let GeometrySpec::Mesh { path, builtin } = &self.geometry {
            match (path, builtin) {
                (Some(p), None) => {
                    if !p.is_file() {
                        return config(format!("mesh file {} does not exist", p.display()));
                    }
                }
                (None, Some(_)) => {}
                _ => {
                    return config("mesh geometry needs exactly one of `path` or `builtin`".into())
                }
            }
            self.conformal
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        for (i, v) in self.vortices.iter().enumerate() {
            if !v.strength.is_finite() {
                return config(format!("vortex {i}: strength must be finite"));
            }
            check_point(&v.position, self.geometry())
                .map_err(|m| Error::Config(format!("vortex {i}: {m}")))?;
        }
        for (k, s) in self.samplers.iter().enumerate() {
            let law_ok = match s.strength {
                StrengthLaw::Constant { value } | StrengthLaw::Alternating { value } => {
                    value.is_finite()
                }
                StrengthLaw::Uniform { min, max } => {
                    min.is_finite() && max.is_finite() && min < max
                }
            };
            if !law_ok {
                return config(format!("sampler {k}: invalid strength law"));
            }
            if let Some(r) = &s.region {
                if !(r.radius > 0.0 && r.radius.is_finite()) {
                    return config(format!("sampler {k}: region radius must be positive"));
                }
                check_point(&r.center, self.geometry())
                    .map_err(|m| Error::Config(format!("sampler {k}: {m}")))?;
            }
            if !(s.min_separation >= 0.0 && s.min_separation.is_finite()) {
                return config(format!("sampler {k}: min_separation must be non-negative"));
            }
        }
        if self.vortices.is_empty() && self.samplers.iter().all(|s| s.count == 0) {
            return config("scenario has no vortices".into());
        }
        if let BalanceSpec::CounterVortex(p) = &self.balance {
            check_point(p, self.geometry())
                .map_err(|m| Error::Config(format!("counter vortex: {m}")))?;
        }
        Ok(())
    }

    /// Loads or generates the mesh of a mesh scenario, with the bytes its
    /// content hash is computed from.
    pub fn load_mesh(&self) -> Result<Option<(TriangleMesh, Vec<u8>)>, Error> {
        match &self.geometry {
            GeometrySpec::Mesh { path: Some(p), .. } => {
                let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
                let mesh = TriangleMesh::read_obj(bytes.as_slice())?;
                Ok(Some((mesh, bytes)))
            }
            GeometrySpec::Mesh {
                builtin: Some(b), ..
            } => {
                let mesh = b.generate()?;
                let bytes = mesh.to_obj_string().into_bytes();
                Ok(Some((mesh, bytes)))
            }
            GeometrySpec::Mesh { .. } => {
                Err(Error::Config("mesh geometry without a source".into()))
            }
            _ => Ok(None),
        }
    }
}

fn check_point(p: &[f64], geometry: Geometry) -> Result<(), String> {
    if p.iter().any(|x| !x.is_finite()) {
        return Err("position must be finite".into());
    }
    match (geometry, p.len()) {
        (Geometry::Plane, 2 | 3) => Ok(()),
        (Geometry::Sphere, 3) => {
            if p.iter().all(|x| *x == 0.0) {
                Err("sphere position must be nonzero".into())
            } else {
                Ok(())
            }
        }
        (Geometry::ClosedSurface, 3) => Ok(()),
        (g, n) => Err(format!("{n}-component position on {g} geometry")),
    }
}

/// `[x, y]` or `[x, y, z]` as a vector; the plane drops `z`.
pub fn to_vec3(p: &[f64], geometry: Geometry) -> Vec3 {
    match geometry {
        Geometry::Plane => Vec3::new(p[0], p[1], 0.0),
        _ => Vec3::new(p[0], p[1], p.get(2).copied().unwrap_or(0.0)),
    }
}

/// Draws sampler positions. `surface` supplies uniform points of a mesh
/// (by area) for closed-surface scenarios.
pub fn draw_samples(
    spec: &SamplerSpec,
    geometry: Geometry,
    existing: &[Vec3],
    mut surface: Option<&mut dyn FnMut(&mut ChaCha8Rng) -> Vec3>,
) -> Result<Vec<(Vec3, f64)>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let center = spec
        .region
        .as_ref()
        .map(|r| (to_vec3(&r.center, geometry), r.radius));
    let mut placed: Vec<Vec3> = existing.to_vec();
    let mut out = Vec::with_capacity(spec.count);
    let max_attempts = 10_000 * spec.count.max(1);
    let mut attempts = 0;
    while out.len() < spec.count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Config(format!(
                "sampler could not place {} vortices with the given region and separation",
                spec.count
            )));
        }
        let p = match geometry {
            Geometry::Plane => {
                let (c, r) = center.unwrap_or((Vec3::zeros(), 1.0));
                let radius = r * rng.gen::<f64>().sqrt();
                let angle = std::f64::consts::TAU * rng.gen::<f64>();
                c + Vec3::new(radius * angle.cos(), radius * angle.sin(), 0.0)
            }
            Geometry::Sphere => {
                let z = 2.0 * rng.gen::<f64>() - 1.0;
                let phi = std::f64::consts::TAU * rng.gen::<f64>();
                let r = (1.0 - z * z).sqrt();
                Vec3::new(r * phi.cos(), r * phi.sin(), z)
            }
            Geometry::ClosedSurface => match surface.as_mut() {
                Some(draw) => draw(&mut rng),
                None => return Err(Error::Config("mesh sampler without a surface".into())),
            },
        };
        if geometry != Geometry::Plane {
            if let Some((c, r)) = center {
                let c = if geometry == Geometry::Sphere {
                    c.normalize()
                } else {
                    c
                };
                if (p - c).norm() > r {
                    continue;
                }
            }
        }
        if spec.min_separation > 0.0 && placed.iter().any(|q| (p - q).norm() < spec.min_separation)
        {
            continue;
        }
        let k = out.len();
        let strength = match spec.strength {
            StrengthLaw::Constant { value } => value,
            StrengthLaw::Uniform { min, max } => rng.gen_range(min..max),
            StrengthLaw::Alternating { value } => {
                if k % 2 == 0 {
                    value
                } else {
                    -value
                }
            }
        };
        placed.push(p);
        out.push((p, strength));
    }
    Ok(out)
}
