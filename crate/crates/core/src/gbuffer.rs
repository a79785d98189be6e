//! Primary-ray pass. Produces the same four per-pixel records a rasterizer
//! would (diffuse+specular terms, position, normal) by casting one ray
//! through each pixel center; everything downstream treats it as opaque
//! input, so all engine differences stay in the secondary stage.

use crate::math::{ray_triangle_intersect, Rgb, Sphere, Vec3};
use crate::scene::{CameraDesc, SceneDesc};
use crate::{Real, Result};
use rayon::prelude::*;
use std::path::Path;

#[derive(Clone, Copy, Debug)]
pub struct GBufferPixel<S> {
    pub valid: bool,
    pub position: Vec3<S>,
    /// Unit geometric normal, flipped to face the camera.
    pub normal: Vec3<S>,
    /// Whether the winding-order normal already faced the camera.
    pub front: bool,
    pub diffuse: Rgb<S>,
    pub specular: Rgb<S>,
    pub material_id: u32,
    pub mesh_id: u32,
}

impl<S: Real> GBufferPixel<S> {
    fn invalid() -> Self {
        GBufferPixel {
            valid: false,
            position: Vec3::zero(),
            normal: Vec3::new(S::zero(), S::zero(), S::one()),
            front: true,
            diffuse: Vec3::zero(),
            specular: Vec3::zero(),
            material_id: 0,
            mesh_id: 0,
        }
    }
}

pub struct GBuffer<S> {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<GBufferPixel<S>>,
}

/// Ray through the center of pixel (px, py); py = 0 is the top row.
pub fn camera_ray<S: Real>(cam: &CameraDesc<S>, px: u32, py: u32) -> (Vec3<S>, Vec3<S>) {
    let forward = (cam.look_at - cam.eye).normalized();
    let right = forward.cross(cam.up.normalized()).normalized();
    let up = right.cross(forward);
    let half = S::of(0.5);
    let tan_half = (cam.vfov_deg.to_radians() * half).tan();
    let aspect = S::of(cam.width as f64 / cam.height as f64);
    let ndc_x = (S::of(px as f64) + half) / S::of(cam.width as f64) * S::of(2.0) - S::one();
    let ndc_y = S::one() - (S::of(py as f64) + half) / S::of(cam.height as f64) * S::of(2.0);
    let dir = (forward + right * (ndc_x * tan_half * aspect) + up * (ndc_y * tan_half)).normalized();
    (cam.eye, dir)
}

/// Conservative forward-ray vs sphere overlap; used to pre-cull meshes.
fn ray_touches_sphere<S: Real>(origin: Vec3<S>, dir: Vec3<S>, sphere: &Sphere<S>) -> bool {
    let oc = sphere.center - origin;
    let t = oc.dot(dir).max(S::zero());
    (oc - dir * t).norm_sq() <= sphere.radius * sphere.radius + S::of(1e-9)
}

/// Nearest hit per pixel center, ties broken by lowest global triangle
/// index. Pixels are independent, so the pass parallelizes freely and the
/// output does not depend on the partitioning.
pub fn render_gbuffer<S: Real>(scene: &SceneDesc<S>) -> GBuffer<S> {
    let cam = &scene.camera;
    let (width, height) = (cam.width, cam.height);
    // global triangle indexing follows mesh order
    let mesh_offsets: Vec<u32> = {
        let mut offsets = Vec::with_capacity(scene.meshes.len());
        let mut acc = 0u32;
        for mesh in &scene.meshes {
            offsets.push(acc);
            acc += mesh.triangles.len() as u32;
        }
        offsets
    };

    let pixels: Vec<GBufferPixel<S>> = (0..(width * height) as usize)
        .into_par_iter()
        .map(|i| {
            let px = i as u32 % width;
            let py = i as u32 / width;
            let (origin, dir) = camera_ray(cam, px, py);
            let mut best_t = S::infinity();
            let mut best: Option<(u32, u32)> = None; // (mesh, global tri)
            for (mesh_id, mesh) in scene.meshes.iter().enumerate() {
                if !ray_touches_sphere(origin, dir, &mesh.bound) {
                    continue;
                }
                for (local, tri) in mesh.triangles.iter().enumerate() {
                    if let Some(hit) = ray_triangle_intersect(origin, dir, best_t, tri) {
                        let global = mesh_offsets[mesh_id] + local as u32;
                        if hit.t < best_t || (hit.t == best_t && best.map_or(true, |b| global < b.1)) {
                            best_t = hit.t;
                            best = Some((mesh_id as u32, global));
                        }
                    }
                }
            }
            match best {
                None => GBufferPixel::invalid(),
                Some((mesh_id, global)) => {
                    let mesh = &scene.meshes[mesh_id as usize];
                    let tri = &mesh.triangles[(global - mesh_offsets[mesh_id as usize]) as usize];
                    let material = &scene.materials[mesh.material_id as usize];
                    let gn = tri.geometric_normal();
                    let front = gn.dot(dir) < S::zero();
                    GBufferPixel {
                        valid: true,
                        position: origin + dir * best_t,
                        normal: if front { gn } else { -gn },
                        front,
                        diffuse: material.diffuse,
                        specular: material.specular,
                        material_id: mesh.material_id,
                        mesh_id,
                    }
                }
            }
        })
        .collect();

    GBuffer { width, height, pixels }
}

/// Debug dump as four PPM images: albedo, specular, position normalized
/// into the scene box, and normals remapped into [0,1].
pub fn dump_gbuffer<S: Real>(gb: &GBuffer<S>, scene: &SceneDesc<S>, prefix: &Path) -> Result<()> {
    let half = S::of(0.5);
    let extent = scene.scene_box.max - scene.scene_box.min;
    let safe = |v: S| if v > S::zero() { v } else { S::one() };
    let channels: [(&str, Box<dyn Fn(&GBufferPixel<S>) -> Rgb<S>>); 4] = [
        ("albedo", Box::new(|p| p.diffuse)),
        ("specular", Box::new(|p| p.specular)),
        (
            "position",
            Box::new(move |p| {
                let rel = p.position - scene.scene_box.min;
                Vec3::new(rel.x / safe(extent.x), rel.y / safe(extent.y), rel.z / safe(extent.z))
            }),
        ),
        ("normal", Box::new(move |p| p.normal * half + Vec3::splat(half))),
    ];
    for (name, project) in channels {
        let pixels: Vec<Rgb<S>> =
            gb.pixels.iter().map(|p| if p.valid { project(p) } else { Vec3::zero() }).collect();
        let path = prefix.with_file_name(format!(
            "{}_{name}.ppm",
            prefix.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "gbuffer".into())
        ));
        crate::ppm::write_image(&path, gb.width, gb.height, &pixels)?;
    }
    Ok(())
}
