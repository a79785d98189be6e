//! Scene ingestion: JSON config, OBJ meshes, per-mesh minimal bounding
//! spheres, and cheap bound updates under rigid transforms.

mod obj;

use crate::math::{minimal_enclosing_sphere, Aabb, Mat4, Rgb, Sphere, Triangle, Vec3};
use crate::{Error, Real, Result};
use serde::Deserialize;
use std::path::Path;

/// Lights are capped to keep the index inside the default 4-bit hash field.
pub const MAX_LIGHTS: usize = 16;

pub const MAX_TRIANGLE_BATCH: usize = 1 << 14;

#[derive(Clone, Debug)]
pub struct Mesh<S> {
    /// World-space triangles (the config transform is baked in at load).
    pub triangles: Vec<Triangle<S>>,
    pub material_id: u32,
    pub bound: Sphere<S>,
    pub transform: Mat4<S>,
}

#[derive(Clone, Copy, Debug)]
pub struct Material<S> {
    pub diffuse: Rgb<S>,
    pub specular: Rgb<S>,
    pub shininess: S,
    pub reflectivity: S,
    pub transmissivity: S,
    pub ior: S,
}

#[derive(Clone, Copy, Debug)]
pub struct LightSource<S> {
    pub position: Vec3<S>,
    pub intensity: Rgb<S>,
    pub index: u32,
}

#[derive(Clone, Copy, Debug)]
pub struct CameraDesc<S> {
    pub eye: Vec3<S>,
    pub look_at: Vec3<S>,
    pub up: Vec3<S>,
    pub vfov_deg: S,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Copy, Debug)]
pub struct Settings {
    pub bounce_depth: u32,
    pub hierarchy_levels: u32,
    pub branching: u32,
    pub triangle_batch_size: u32,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { bounce_depth: 2, hierarchy_levels: 2, branching: 8, triangle_batch_size: 1 << 14 }
    }
}

#[derive(Clone, Debug)]
pub struct SceneDesc<S> {
    pub meshes: Vec<Mesh<S>>,
    pub materials: Vec<Material<S>>,
    pub lights: Vec<LightSource<S>>,
    pub camera: CameraDesc<S>,
    pub settings: Settings,
    /// Box around all world-space vertices; quantizes bounce-ray origins.
    pub scene_box: Aabb<S>,
}

impl<S: Real> SceneDesc<S> {
    pub fn triangle_count(&self) -> usize {
        self.meshes.iter().map(|m| m.triangles.len()).sum()
    }

    /// Recomputes triangle ids, per-mesh bounds, and the scene box.
    /// Programmatic scenes (tests, fixtures) call this after construction.
    pub fn finalize(&mut self) -> Result<()> {
        let mut scene_box = Aabb::empty();
        for (mesh_id, mesh) in self.meshes.iter_mut().enumerate() {
            let mut pts = Vec::with_capacity(mesh.triangles.len() * 3);
            for (local, t) in mesh.triangles.iter_mut().enumerate() {
                t.mesh_id = mesh_id as u32;
                t.local_id = local as u32;
                for v in [t.v0, t.v1, t.v2] {
                    pts.push(v);
                    scene_box.grow(v);
                }
            }
            mesh.bound = minimal_enclosing_sphere(&pts)?;
        }
        if scene_box.is_empty() {
            scene_box = Aabb { min: Vec3::zero(), max: Vec3::zero() };
        }
        self.scene_box = scene_box;
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lights.len() > MAX_LIGHTS {
            return Err(Error::TooManyLights { count: self.lights.len(), max: MAX_LIGHTS });
        }
        for (i, light) in self.lights.iter().enumerate() {
            if light.index as usize != i {
                return Err(Error::InvalidScene(format!(
                    "light {} carries index {}, expected dense indices",
                    i, light.index
                )));
            }
        }
        for (i, mesh) in self.meshes.iter().enumerate() {
            if mesh.material_id as usize >= self.materials.len() {
                return Err(Error::InvalidScene(format!("mesh {} references missing material", i)));
            }
        }
        for (i, m) in self.materials.iter().enumerate() {
            if m.reflectivity + m.transmissivity > S::one() + S::of(1e-9) {
                return Err(Error::InvalidScene(format!(
                    "material {}: reflectivity + transmissivity exceeds 1",
                    i
                )));
            }
            if m.ior < S::one() {
                return Err(Error::InvalidScene(format!("material {}: ior below 1", i)));
            }
        }
        let cam = &self.camera;
        if cam.width == 0 || cam.height == 0 {
            return Err(Error::InvalidScene("camera resolution must be positive".into()));
        }
        let fov = cam.vfov_deg.to_f64_lossy();
        if !(fov > 0.0 && fov < 180.0) {
            return Err(Error::InvalidScene("vertical fov must lie in (0, 180)".into()));
        }
        let forward = cam.look_at - cam.eye;
        if forward.norm_sq() == S::zero() {
            return Err(Error::InvalidScene("camera eye equals lookAt".into()));
        }
        if forward.normalized().cross(cam.up.normalized()).norm_sq() < S::of(1e-12) {
            return Err(Error::InvalidScene("camera up is parallel to the view direction".into()));
        }
        Ok(())
    }
}

/// Conservative bound update under an affine transform: the center moves
/// with the transform and the radius scales by the largest singular value
/// of the linear part, so rigid motions keep the radius. O(1) in triangle
/// count by construction.
pub fn update_mesh_bound<S: Real>(bound: &Sphere<S>, transform: &Mat4<S>) -> Sphere<S> {
    Sphere::new(transform.transform_point(bound.center), bound.radius * transform.linear_max_singular_value())
}

// ---------------------------------------------------------------------------
// JSON config schema
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ConfigRoot {
    camera: ConfigCamera,
    #[serde(default)]
    lights: Vec<ConfigLight>,
    meshes: Vec<ConfigMesh>,
    #[serde(default)]
    settings: ConfigSettings,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ConfigCamera {
    eye: [f64; 3],
    look_at: [f64; 3],
    up: [f64; 3],
    vfov_deg: f64,
    width: u32,
    height: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigLight {
    position: [f64; 3],
    intensity: [f64; 3],
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ConfigMesh {
    obj_path: String,
    #[serde(default = "identity_transform")]
    transform: Vec<f64>,
    material: ConfigMaterial,
}

fn identity_transform() -> Vec<f64> {
    vec![
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    ]
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ConfigMaterial {
    diffuse: [f64; 3],
    specular: [f64; 3],
    #[serde(default)]
    shininess: f64,
    #[serde(default)]
    reflectivity: f64,
    #[serde(default)]
    transmissivity: f64,
    #[serde(default = "one")]
    ior: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ConfigSettings {
    bounce_depth: Option<u32>,
    hierarchy_levels: Option<u32>,
    branching: Option<u32>,
    triangle_batch_size: Option<u32>,
}

fn vec3_of<S: Real>(v: [f64; 3]) -> Vec3<S> {
    Vec3::new(S::of(v[0]), S::of(v[1]), S::of(v[2]))
}

/// Loads a scene config and all meshes it references. Mesh paths are
/// resolved relative to the config file. Every vertex is transformed into
/// world space and per-mesh bounds are minimal enclosing spheres.
pub fn load_scene<S: Real>(config_path: &Path) -> Result<SceneDesc<S>> {
    let text = std::fs::read_to_string(config_path).map_err(|e| Error::io(config_path, e))?;
    let root: ConfigRoot =
        serde_json::from_str(&text).map_err(|e| Error::malformed(config_path, e.to_string()))?;
    let base = config_path.parent().unwrap_or_else(|| Path::new("."));

    if root.lights.len() > MAX_LIGHTS {
        return Err(Error::TooManyLights { count: root.lights.len(), max: MAX_LIGHTS });
    }

    let mut meshes = Vec::with_capacity(root.meshes.len());
    let mut materials = Vec::with_capacity(root.meshes.len());
    for (mesh_id, cfg) in root.meshes.iter().enumerate() {
        if cfg.transform.len() != 16 {
            return Err(Error::malformed(
                config_path,
                format!("mesh {}: transform needs 16 entries, got {}", mesh_id, cfg.transform.len()),
            ));
        }
        let mut row = [S::zero(); 16];
        for (dst, src) in row.iter_mut().zip(cfg.transform.iter()) {
            *dst = S::of(*src);
        }
        let transform = Mat4::from_row_major(&row);

        let obj_path = base.join(&cfg.obj_path);
        let obj_text = std::fs::read_to_string(&obj_path).map_err(|e| Error::io(&obj_path, e))?;
        let geometry = obj::parse_obj(&obj_text).map_err(|msg| Error::malformed(&obj_path, msg))?;

        let vertices: Vec<Vec3<S>> = geometry
            .vertices
            .iter()
            .map(|v| transform.transform_point(Vec3::from_f64(*v)))
            .collect();
        let mut triangles = Vec::with_capacity(geometry.triangles.len());
        for (local, idx) in geometry.triangles.iter().enumerate() {
            let mut tri = Triangle::new(vertices[idx[0]], vertices[idx[1]], vertices[idx[2]]);
            tri.mesh_id = mesh_id as u32;
            tri.local_id = local as u32;
            triangles.push(tri);
        }

        materials.push(Material {
            diffuse: vec3_of(cfg.material.diffuse),
            specular: vec3_of(cfg.material.specular),
            shininess: S::of(cfg.material.shininess),
            reflectivity: S::of(cfg.material.reflectivity),
            transmissivity: S::of(cfg.material.transmissivity),
            ior: S::of(cfg.material.ior),
        });
        meshes.push(Mesh {
            triangles,
            material_id: mesh_id as u32,
            bound: Sphere::point(Vec3::zero()),
            transform,
        });
    }

    let lights = root
        .lights
        .iter()
        .enumerate()
        .map(|(i, l)| LightSource {
            position: vec3_of(l.position),
            intensity: vec3_of(l.intensity),
            index: i as u32,
        })
        .collect();

    let defaults = Settings::default();
    let settings = Settings {
        bounce_depth: root.settings.bounce_depth.unwrap_or(defaults.bounce_depth),
        hierarchy_levels: root.settings.hierarchy_levels.unwrap_or(defaults.hierarchy_levels),
        branching: root.settings.branching.unwrap_or(defaults.branching),
        triangle_batch_size: root.settings.triangle_batch_size.unwrap_or(defaults.triangle_batch_size),
    };

    let mut scene = SceneDesc {
        meshes,
        materials,
        lights,
        camera: CameraDesc {
            eye: vec3_of(root.camera.eye),
            look_at: vec3_of(root.camera.look_at),
            up: vec3_of(root.camera.up),
            vfov_deg: S::of(root.camera.vfov_deg),
            width: root.camera.width,
            height: root.camera.height,
        },
        settings,
        scene_box: Aabb::empty(),
    };
    scene.finalize()?;
    Ok(scene)
}
