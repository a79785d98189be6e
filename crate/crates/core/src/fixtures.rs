//! Procedural benchmark scenes: BOX (Cornell-style closed box with a
//! mirror-wall variant), ROOMS (disjoint submeshes that reward whole-mesh
//! culling), and SLAB (one undivided mesh). Deterministic for a given seed.

use crate::{Error, Result};
use serde_json::json;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub struct FixturePaths {
    pub box_diffuse: PathBuf,
    pub box_mirror: PathBuf,
    pub rooms: PathBuf,
    pub slab: PathBuf,
}

struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}

type P = [f64; 3];

fn add(a: P, b: P) -> P {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: P, s: f64) -> P {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[derive(Default)]
struct ObjBuilder {
    text: String,
    vertex_count: usize,
    face_count: usize,
}

impl ObjBuilder {
    fn vertex(&mut self, p: P) -> usize {
        writeln!(self.text, "v {} {} {}", p[0], p[1], p[2]).unwrap();
        self.vertex_count += 1;
        self.vertex_count
    }

    fn quad(&mut self, a: usize, b: usize, c: usize, d: usize) {
        writeln!(self.text, "f {a} {b} {c} {d}").unwrap();
        self.face_count += 2;
    }

    fn tri(&mut self, a: usize, b: usize, c: usize) {
        writeln!(self.text, "f {a} {b} {c}").unwrap();
        self.face_count += 1;
    }

    /// nu x nv lattice of quads spanning origin + u*du + v*dv.
    fn grid(&mut self, origin: P, du: P, dv: P, nu: usize, nv: usize) {
        let mut ids = vec![0usize; (nu + 1) * (nv + 1)];
        for j in 0..=nv {
            for i in 0..=nu {
                let p = add(origin, add(scale(du, i as f64), scale(dv, j as f64)));
                ids[j * (nu + 1) + i] = self.vertex(p);
            }
        }
        for j in 0..nv {
            for i in 0..nu {
                let a = ids[j * (nu + 1) + i];
                let b = ids[j * (nu + 1) + i + 1];
                let c = ids[(j + 1) * (nu + 1) + i + 1];
                let d = ids[(j + 1) * (nu + 1) + i];
                self.quad(a, b, c, d);
            }
        }
    }

    /// Axis-aligned box with each face a sub x sub grid.
    fn box_mesh(&mut self, min: P, max: P, sub: usize) {
        let d = [max[0] - min[0], max[1] - min[1], max[2] - min[2]];
        let s = sub as f64;
        // -z, +z, -x, +x, -y, +y
        self.grid(min, [d[0] / s, 0.0, 0.0], [0.0, d[1] / s, 0.0], sub, sub);
        self.grid([min[0], min[1], max[2]], [d[0] / s, 0.0, 0.0], [0.0, d[1] / s, 0.0], sub, sub);
        self.grid(min, [0.0, d[1] / s, 0.0], [0.0, 0.0, d[2] / s], sub, sub);
        self.grid([max[0], min[1], min[2]], [0.0, d[1] / s, 0.0], [0.0, 0.0, d[2] / s], sub, sub);
        self.grid(min, [0.0, 0.0, d[2] / s], [d[0] / s, 0.0, 0.0], sub, sub);
        self.grid([min[0], max[1], min[2]], [0.0, 0.0, d[2] / s], [d[0] / s, 0.0, 0.0], sub, sub);
    }

    /// Octahedron refined `level` times and projected onto the sphere.
    fn sphere_mesh(&mut self, center: P, radius: f64, level: usize) {
        fn refine(tris: Vec<[P; 3]>) -> Vec<[P; 3]> {
            let mut out = Vec::with_capacity(tris.len() * 4);
            for [a, b, c] in tris {
                let norm = |p: P| {
                    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                    scale(p, 1.0 / n)
                };
                let ab = norm(scale(add(a, b), 0.5));
                let bc = norm(scale(add(b, c), 0.5));
                let ca = norm(scale(add(c, a), 0.5));
                out.push([a, ab, ca]);
                out.push([ab, b, bc]);
                out.push([ca, bc, c]);
                out.push([ab, bc, ca]);
            }
            out
        }
        let px: P = [1.0, 0.0, 0.0];
        let nx: P = [-1.0, 0.0, 0.0];
        let py: P = [0.0, 1.0, 0.0];
        let ny: P = [0.0, -1.0, 0.0];
        let pz: P = [0.0, 0.0, 1.0];
        let nz: P = [0.0, 0.0, -1.0];
        let mut tris = vec![
            [py, px, pz],
            [py, pz, nx],
            [py, nx, nz],
            [py, nz, px],
            [ny, pz, px],
            [ny, nx, pz],
            [ny, nz, nx],
            [ny, px, nz],
        ];
        for _ in 0..level {
            tris = refine(tris);
        }
        for [a, b, c] in tris {
            let ia = self.vertex(add(center, scale(a, radius)));
            let ib = self.vertex(add(center, scale(b, radius)));
            let ic = self.vertex(add(center, scale(c, radius)));
            self.tri(ia, ib, ic);
        }
    }

    fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.text).map_err(|e| Error::io(path, e))
    }
}

fn material(kd: [f64; 3], ks: [f64; 3], shininess: f64, reflectivity: f64) -> serde_json::Value {
    json!({
        "diffuse": kd,
        "specular": ks,
        "shininess": shininess,
        "reflectivity": reflectivity,
        "transmissivity": 0.0,
        "ior": 1.0,
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("fixture config serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Cornell-style closed box: five walls, a tall block, and a sphere, one
/// light under the ceiling. `box.json` keeps the walls diffuse;
/// `box_mirror.json` makes them mirrors so reflection batches dominate.
fn build_box(dir: &Path, rng: &mut SplitMix) -> Result<(PathBuf, PathBuf)> {
    let mut walls = ObjBuilder::default();
    let sub = 4usize;
    let (lo, hi) = (-2.0, 2.0);
    let step = (hi - lo) / sub as f64;
    // floor, ceiling, back, left, right; front stays open toward the camera
    walls.grid([lo, lo, lo], [step, 0.0, 0.0], [0.0, 0.0, step], sub, sub);
    walls.grid([lo, hi, lo], [step, 0.0, 0.0], [0.0, 0.0, step], sub, sub);
    walls.grid([lo, lo, hi], [step, 0.0, 0.0], [0.0, step, 0.0], sub, sub);
    walls.grid([lo, lo, lo], [0.0, step, 0.0], [0.0, 0.0, step], sub, sub);
    walls.grid([hi, lo, lo], [0.0, step, 0.0], [0.0, 0.0, step], sub, sub);
    walls.write(&dir.join("box_walls.obj"))?;

    let mut tall = ObjBuilder::default();
    let jx = rng.range(-0.1, 0.1);
    tall.box_mesh([-1.3 + jx, -2.0, -0.2], [-0.3 + jx, 0.2, 0.8], 2);
    tall.write(&dir.join("box_tall.obj"))?;

    let mut ball = ObjBuilder::default();
    ball.sphere_mesh([0.9, -1.15, -0.4], 0.85, 3);
    ball.write(&dir.join("box_sphere.obj"))?;

    let total = walls.face_count + tall.face_count + ball.face_count;
    assert!((100..=800).contains(&total), "box triangle budget: {total}");

    let camera = json!({
        "eye": [0.0, 0.0, -6.5],
        "lookAt": [0.0, 0.0, 0.0],
        "up": [0.0, 1.0, 0.0],
        "vfovDeg": 42.0,
        "width": 256,
        "height": 256,
    });
    let lights = json!([{ "position": [0.0, 1.6, -0.4], "intensity": [1.0, 1.0, 1.0] }]);
    let settings = json!({
        "bounceDepth": 2, "hierarchyLevels": 2, "branching": 8, "triangleBatchSize": 16384,
    });
    let objects = |wall_material: serde_json::Value, sphere_material: serde_json::Value| {
        json!([
            { "objPath": "box_walls.obj", "material": wall_material },
            { "objPath": "box_tall.obj", "material": material([0.65, 0.3, 0.25], [0.2, 0.2, 0.2], 16.0, 0.0) },
            { "objPath": "box_sphere.obj", "material": sphere_material },
        ])
    };

    let diffuse_path = dir.join("box.json");
    write_json(
        &diffuse_path,
        &json!({
            "camera": camera,
            "lights": lights,
            "meshes": objects(
                material([0.75, 0.73, 0.7], [0.0, 0.0, 0.0], 1.0, 0.0),
                material([0.25, 0.35, 0.7], [0.3, 0.3, 0.3], 32.0, 0.0),
            ),
            "settings": settings,
        }),
    )?;

    // mirror walls around a curved mirror: reflection batches dominate and
    // the sphere scatters them
    let mirror_path = dir.join("box_mirror.json");
    write_json(
        &mirror_path,
        &json!({
            "camera": camera,
            "lights": lights,
            "meshes": objects(
                material([0.05, 0.05, 0.05], [0.0, 0.0, 0.0], 1.0, 0.9),
                material([0.08, 0.08, 0.1], [0.2, 0.2, 0.2], 32.0, 0.85),
            ),
            "settings": settings,
        }),
    )?;
    Ok((diffuse_path, mirror_path))
}

/// Four open-front rooms in a 2x2 grid, each its own mesh with clutter
/// inside, two lights in front. Bounds are pairwise disjoint, so shadow
/// bundles aimed at one room cull the other three.
fn build_rooms(dir: &Path, rng: &mut SplitMix) -> Result<PathBuf> {
    let centers = [[-4.0, -4.0], [4.0, -4.0], [-4.0, 4.0], [4.0, 4.0]];
    let half = 1.6;
    let sub = 7usize;
    let mut meshes = Vec::new();
    for (i, [cx, cy]) in centers.iter().enumerate() {
        let mut room = ObjBuilder::default();
        let (lo_x, hi_x) = (cx - half, cx + half);
        let (lo_y, hi_y) = (cy - half, cy + half);
        let (lo_z, hi_z) = (-half, half);
        let s = 2.0 * half / sub as f64;
        // back wall and the four side walls; the +z face stays open
        room.grid([lo_x, lo_y, lo_z], [s, 0.0, 0.0], [0.0, s, 0.0], sub, sub);
        room.grid([lo_x, lo_y, lo_z], [s, 0.0, 0.0], [0.0, 0.0, s], sub, sub);
        room.grid([lo_x, hi_y, lo_z], [s, 0.0, 0.0], [0.0, 0.0, s], sub, sub);
        room.grid([lo_x, lo_y, lo_z], [0.0, s, 0.0], [0.0, 0.0, s], sub, sub);
        room.grid([hi_x, lo_y, lo_z], [0.0, s, 0.0], [0.0, 0.0, s], sub, sub);
        // dense interior clutter: many small boxes, so depth discontinuities
        // dominate the view of each room
        for _ in 0..24 {
            let w = rng.range(0.12, 0.28);
            let h = rng.range(0.15, 0.5);
            let bx = rng.range(lo_x + 0.2, hi_x - 0.2 - w);
            let by = rng.range(lo_y + 0.2, hi_y - 0.2 - h);
            let bz = rng.range(lo_z + 0.2, hi_z - 0.3 - w);
            room.box_mesh([bx, by, bz], [bx + w, by + h, bz + w], 2);
        }
        let name = format!("rooms_room{i}.obj");
        room.write(&dir.join(&name))?;
        let tint = [
            [0.75, 0.4, 0.35],
            [0.4, 0.7, 0.35],
            [0.4, 0.45, 0.75],
            [0.7, 0.65, 0.3],
        ][i];
        meshes.push(json!({
            "objPath": name,
            "material": material(tint, [0.0, 0.0, 0.0], 1.0, 0.0),
        }));
    }
    let path = dir.join("rooms.json");
    write_json(
        &path,
        &json!({
            "camera": {
                "eye": [0.0, 0.0, 13.5],
                "lookAt": [0.0, 0.0, 0.0],
                "up": [0.0, 1.0, 0.0],
                "vfovDeg": 50.0,
                "width": 256,
                "height": 256,
            },
            "lights": [
                { "position": [-5.5, 6.5, 7.0], "intensity": [1.0, 0.95, 0.9] },
                { "position": [6.0, -5.0, 8.0], "intensity": [0.9, 0.95, 1.0] },
            ],
            "meshes": meshes,
            "settings": { "bounceDepth": 2, "hierarchyLevels": 2, "branching": 8, "triangleBatchSize": 16384 },
        }),
    )?;
    Ok(path)
}

/// A single undivided mesh: a ground slab under a jittered field of
/// pillars. No submeshes, so only ray sorting can help here.
fn build_slab(dir: &Path, rng: &mut SplitMix) -> Result<PathBuf> {
    let mut slab = ObjBuilder::default();
    let half = 8.0;
    let sub = 20usize;
    let s = 2.0 * half / sub as f64;
    slab.grid([-half, 0.0, -half], [s, 0.0, 0.0], [0.0, 0.0, s], sub, sub);
    // a dense jittered field of thin pillars; silhouettes break up nearly
    // every scanline
    for gx in 0..13 {
        for gz in 0..13 {
            let cx = -6.6 + 1.1 * gx as f64 + rng.range(-0.35, 0.35);
            let cz = -6.6 + 1.1 * gz as f64 + rng.range(-0.35, 0.35);
            let w = rng.range(0.1, 0.28);
            let h = rng.range(0.6, 3.0);
            slab.box_mesh([cx - w, 0.0, cz - w], [cx + w, h, cz + w], 1);
        }
    }
    slab.write(&dir.join("slab.obj"))?;

    let path = dir.join("slab.json");
    write_json(
        &path,
        &json!({
            "camera": {
                "eye": [0.0, 10.0, 15.0],
                "lookAt": [0.0, 0.0, 0.0],
                "up": [0.0, 1.0, 0.0],
                "vfovDeg": 55.0,
                "width": 256,
                "height": 256,
            },
            "lights": [
                { "position": [-9.0, 9.0, 8.0], "intensity": [1.0, 1.0, 0.95] },
                { "position": [10.0, 7.0, -7.0], "intensity": [0.9, 0.9, 1.0] },
            ],
            "meshes": [
                { "objPath": "slab.obj", "material": material([0.6, 0.55, 0.5], [0.0, 0.0, 0.0], 1.0, 0.0) },
            ],
            "settings": { "bounceDepth": 2, "hierarchyLevels": 2, "branching": 8, "triangleBatchSize": 16384 },
        }),
    )?;
    Ok(path)
}

/// Writes all fixture scenes into `dir` and returns their config paths.
pub fn build_fixture_scenes(dir: &Path, seed: u64) -> Result<FixturePaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = SplitMix(seed.wrapping_add(0x1234_5678_9abc_def0));
    let (box_diffuse, box_mirror) = build_box(dir, &mut rng)?;
    let rooms = build_rooms(dir, &mut rng)?;
    let slab = build_slab(dir, &mut rng)?;
    Ok(FixturePaths { box_diffuse, box_mirror, rooms, slab })
}
