//! Secondary-ray pipeline: generate rays from shading points, hash them per
//! ray type, trim empty slots, then compress runs of equal hashes into
//! chunks, radix sort the chunks, and decompress back into a coherently
//! ordered ray array.

use crate::math::{refract, spherical_from_direction, Aabb, Ray, RayKind, Rgb, Vec3};
use crate::prims::{exclusive_scan, inclusive_scan, radix_sort_pairs, trim_compact};
use crate::scene::SceneDesc;
use crate::{Error, Real, Result};
use std::io::Write;
use std::path::Path;

/// Bit budget of the two 32-bit ray hashes. Shadow keys place the light
/// index in the highest bits so sorting groups rays by light a priori;
/// bounce keys place the quantized origin cell above the direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashLayout {
    pub light_bits: u32,
    pub theta_bits: u32,
    pub phi_bits: u32,
    pub origin_bits_per_axis: u32,
    pub bounce_theta_bits: u32,
    pub bounce_phi_bits: u32,
}

impl Default for HashLayout {
    fn default() -> Self {
        HashLayout {
            light_bits: 4,
            theta_bits: 14,
            phi_bits: 14,
            origin_bits_per_axis: 5,
            bounce_theta_bits: 8,
            bounce_phi_bits: 9,
        }
    }
}

impl HashLayout {
    pub fn validate(&self) -> Result<()> {
        let shadow = self.light_bits + self.theta_bits + self.phi_bits;
        if shadow > 32 {
            return Err(Error::HashLayout(format!("shadow fields need {shadow} bits")));
        }
        let bounce = 3 * self.origin_bits_per_axis + self.bounce_theta_bits + self.bounce_phi_bits;
        if bounce > 32 {
            return Err(Error::HashLayout(format!("bounce fields need {bounce} bits")));
        }
        if self.theta_bits == 0 || self.phi_bits == 0 || self.bounce_theta_bits == 0 || self.bounce_phi_bits == 0 {
            return Err(Error::HashLayout("direction fields need at least one bit".into()));
        }
        Ok(())
    }

    pub fn max_lights(&self) -> usize {
        1usize << self.light_bits
    }
}

/// floor(unit * (2^bits - 1)), clamped into the field.
fn quantize_unit<S: Real>(unit: S, bits: u32) -> u32 {
    let levels = ((1u64 << bits) - 1) as f64;
    let q = (unit.to_f64_lossy() * levels).floor();
    (q.max(0.0) as u64).min(levels as u64) as u32
}

/// floor(frac * 2^bits) over 2^bits cells, clamped into the field.
fn quantize_cell<S: Real>(frac: S, bits: u32) -> u32 {
    let cells = (1u64 << bits) as f64;
    let q = (frac.to_f64_lossy() * cells).floor();
    (q.max(0.0) as u64).min(cells as u64 - 1) as u32
}

fn quantized_direction<S: Real>(dir: Vec3<S>, theta_bits: u32, phi_bits: u32) -> (u32, u32) {
    let (theta, phi) = spherical_from_direction(dir);
    let q_theta = quantize_unit(theta / S::PI(), theta_bits);
    let q_phi = quantize_unit((phi + S::PI()) / (S::of(2.0) * S::PI()), phi_bits);
    (q_theta, q_phi)
}

/// (lightIndex | qθ | qφ); strictly monotone in the light index.
pub fn hash_shadow_ray<S: Real>(light_index: u32, dir: Vec3<S>, layout: &HashLayout) -> Result<u32> {
    if light_index >= (1u32 << layout.light_bits) {
        return Err(Error::LightIndexRange { index: light_index, bits: layout.light_bits });
    }
    let (q_theta, q_phi) = quantized_direction(dir, layout.theta_bits, layout.phi_bits);
    Ok((light_index << (layout.theta_bits + layout.phi_bits)) | (q_theta << layout.phi_bits) | q_phi)
}

/// (qx | qy | qz | qθ | qφ) with origin cells in the high bits. Origins are
/// clamped into the scene box; zero-extent axes quantize to cell 0.
pub fn hash_bounce_ray<S: Real>(origin: Vec3<S>, dir: Vec3<S>, scene_box: &Aabb<S>, layout: &HashLayout) -> u32 {
    let ob = layout.origin_bits_per_axis;
    let axis_cell = |lo: S, hi: S, v: S| -> u32 {
        let extent = hi - lo;
        if extent <= S::zero() {
            return 0;
        }
        let frac = ((v - lo) / extent).max(S::zero()).min(S::one());
        quantize_cell(frac, ob)
    };
    let qx = axis_cell(scene_box.min.x, scene_box.max.x, origin.x);
    let qy = axis_cell(scene_box.min.y, scene_box.max.y, origin.y);
    let qz = axis_cell(scene_box.min.z, scene_box.max.z, origin.z);
    let (q_theta, q_phi) = quantized_direction(dir, layout.bounce_theta_bits, layout.bounce_phi_bits);

    let phi_shift = 0;
    let theta_shift = layout.bounce_phi_bits;
    let z_shift = theta_shift + layout.bounce_theta_bits;
    let y_shift = z_shift + ob;
    let x_shift = y_shift + ob;
    (qx << x_shift) | (qy << y_shift) | (qz << z_shift) | (q_theta << theta_shift) | (q_phi << phi_shift)
}

/// Surface point awaiting direct lighting and possible respawn.
#[derive(Clone, Copy, Debug)]
pub struct ShadePoint<S> {
    pub pixel: u32,
    pub position: Vec3<S>,
    /// Unit normal, flipped toward the incoming ray.
    pub normal: Vec3<S>,
    /// Unit direction the generating ray traveled (origin -> point).
    pub incoming: Vec3<S>,
    /// Whether the winding-order normal faced the incoming ray.
    pub front: bool,
    pub material_id: u32,
    pub throughput: Rgb<S>,
}

/// Slot-aligned generation output; `empty_flags[i] = 1` marks slots that
/// hold no ray (invalid pixel, non-emitting material, total internal
/// reflection).
pub struct GenSlots<S> {
    pub rays: Vec<Ray<S>>,
    pub keys: Vec<u32>,
    pub empty_flags: Vec<u32>,
}

/// Trimmed ray batch. `values` starts as the identity permutation and, after
/// sorting, maps each slot back to its generation-order index.
#[derive(Clone)]
pub struct RayBatch<S> {
    pub rays: Vec<Ray<S>>,
    pub keys: Vec<u32>,
    pub values: Vec<u32>,
}

impl<S> RayBatch<S> {
    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }
}

/// Emits one ray per slot for the requested kind. Shadow rays are inverted:
/// they originate at the light and point toward the fragment, one slot per
/// (light, point) in light-major order so every batch processes one light's
/// bundle at a time. Reflection/refraction rays exist per point when the
/// material emits them.
pub fn generate_secondary_rays<S: Real>(
    points: &[Option<ShadePoint<S>>],
    scene: &SceneDesc<S>,
    kind: RayKind,
    layout: &HashLayout,
) -> Result<GenSlots<S>> {
    match kind {
        RayKind::Shadow => generate_shadow(points, scene, layout),
        RayKind::Reflection | RayKind::Refraction => generate_bounce(points, scene, kind, layout),
    }
}

fn generate_shadow<S: Real>(
    points: &[Option<ShadePoint<S>>],
    scene: &SceneDesc<S>,
    layout: &HashLayout,
) -> Result<GenSlots<S>> {
    let count = scene.lights.len() * points.len();
    let mut out = GenSlots {
        rays: vec![Ray::placeholder(); count],
        keys: vec![0; count],
        empty_flags: vec![1; count],
    };
    for light in &scene.lights {
        let base = light.index as usize * points.len();
        for (p, point) in points.iter().enumerate() {
            let Some(point) = point else { continue };
            let to_fragment = point.position - light.position;
            let dist = to_fragment.norm();
            if dist <= S::zero() {
                continue;
            }
            let dir = to_fragment / dist;
            let slot = base + p;
            out.keys[slot] = hash_shadow_ray(light.index, dir, layout)?;
            out.empty_flags[slot] = 0;
            out.rays[slot] = Ray {
                origin: light.position,
                dir,
                kind: RayKind::Shadow,
                pixel: point.pixel,
                source: p as u32,
                light: light.index,
                max_t: dist,
                throughput: point.throughput,
            };
        }
    }
    Ok(out)
}

fn generate_bounce<S: Real>(
    points: &[Option<ShadePoint<S>>],
    scene: &SceneDesc<S>,
    kind: RayKind,
    layout: &HashLayout,
) -> Result<GenSlots<S>> {
    let mut out = GenSlots {
        rays: vec![Ray::placeholder(); points.len()],
        keys: vec![0; points.len()],
        empty_flags: vec![1; points.len()],
    };
    for (p, point) in points.iter().enumerate() {
        let Some(point) = point else { continue };
        let material = &scene.materials[point.material_id as usize];
        let (dir, weight) = match kind {
            RayKind::Reflection => {
                if material.reflectivity <= S::zero() {
                    continue;
                }
                (point.incoming.reflect(point.normal), material.reflectivity)
            }
            RayKind::Refraction => {
                if material.transmissivity <= S::zero() {
                    continue;
                }
                let eta = if point.front { S::one() / material.ior } else { material.ior };
                match refract(point.incoming, point.normal, eta) {
                    Some(dir) => (dir, material.transmissivity),
                    None => continue, // total internal reflection
                }
            }
            RayKind::Shadow => unreachable!(),
        };
        out.keys[p] = hash_bounce_ray(point.position, dir, &scene.scene_box, layout);
        out.empty_flags[p] = 0;
        out.rays[p] = Ray {
            origin: point.position,
            dir,
            kind,
            pixel: point.pixel,
            source: p as u32,
            light: 0,
            max_t: S::infinity(),
            throughput: point.throughput * weight,
        };
    }
    Ok(out)
}

/// Drops empty slots; the surviving rays keep generation order and `values`
/// becomes the identity over the compacted batch.
pub fn trim_batch<S: Real>(slots: GenSlots<S>) -> Result<RayBatch<S>> {
    let idx: Vec<u32> = (0..slots.keys.len() as u32).collect();
    let (keys, survivors) = trim_compact(&slots.empty_flags, &slots.keys, &idx)?;
    let rays = survivors.iter().map(|s| slots.rays[*s as usize]).collect();
    let values = (0..keys.len() as u32).collect();
    Ok(RayBatch { rays, keys, values })
}

/// Maximal runs of equal adjacent hashes: (key, first index, length).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chunks {
    pub keys: Vec<u32>,
    pub base: Vec<u32>,
    pub size: Vec<u32>,
}

/// Head flags mark index 0 and every position whose key differs from its
/// predecessor; their inclusive scan numbers the chunks.
pub fn compress_chunks(keys: &[u32]) -> Chunks {
    if keys.is_empty() {
        return Chunks { keys: Vec::new(), base: Vec::new(), size: Vec::new() };
    }
    let head_flags: Vec<u32> =
        (0..keys.len()).map(|i| u32::from(i == 0 || keys[i] != keys[i - 1])).collect();
    let ids = inclusive_scan(&head_flags);
    let count = *ids.last().unwrap() as usize;
    let mut chunk_keys = vec![0u32; count];
    let mut base = vec![0u32; count];
    for i in 0..keys.len() {
        if head_flags[i] == 1 {
            let c = (ids[i] - 1) as usize;
            chunk_keys[c] = keys[i];
            base[c] = i as u32;
        }
    }
    let mut size = vec![0u32; count];
    for c in 0..count {
        let end = if c + 1 < count { base[c + 1] } else { keys.len() as u32 };
        size[c] = end - base[c];
    }
    Chunks { keys: chunk_keys, base, size }
}

/// Stable-sorts the chunks by key, then decompresses through a skeleton
/// array: the exclusive scan of the sorted sizes gives each chunk its output
/// base, and every chunk replays its key and original values. The result
/// equals a stable sort of the original (key, value) pairs.
pub fn sort_and_decompress(chunks: &Chunks, original_values: &[u32]) -> Result<(Vec<u32>, Vec<u32>)> {
    let ids: Vec<u32> = (0..chunks.keys.len() as u32).collect();
    let (sorted_keys, sorted_ids) = radix_sort_pairs(&chunks.keys, &ids)?;
    Ok(decompress(chunks, &sorted_keys, &sorted_ids, original_values))
}

/// out[i] = rays[sorted_values[i]]; provenance travels inside each ray.
pub fn reorder_rays<S: Real>(rays: &[Ray<S>], sorted_values: &[u32]) -> Vec<Ray<S>> {
    sorted_values.iter().map(|v| rays[*v as usize]).collect()
}

#[derive(Default, Clone, Copy, Debug)]
pub struct SortTimings {
    pub compression_ms: f64,
    pub sorting_ms: f64,
    pub decompression_ms: f64,
}

/// compress -> radix sort -> decompress -> reorder.
pub fn sort_batch<S: Real>(batch: &RayBatch<S>, timings: &mut SortTimings) -> Result<RayBatch<S>> {
    let t0 = std::time::Instant::now();
    let chunks = compress_chunks(&batch.keys);
    let t1 = std::time::Instant::now();
    let ids: Vec<u32> = (0..chunks.keys.len() as u32).collect();
    let sorted_chunks = radix_sort_pairs(&chunks.keys, &ids)?;
    let t2 = std::time::Instant::now();
    let (sorted_keys, sorted_values) = decompress(&chunks, &sorted_chunks.0, &sorted_chunks.1, &batch.values);
    let rays = reorder_rays(&batch.rays, &sorted_values);
    let t3 = std::time::Instant::now();
    timings.compression_ms += (t1 - t0).as_secs_f64() * 1e3;
    timings.sorting_ms += (t2 - t1).as_secs_f64() * 1e3;
    timings.decompression_ms += (t3 - t2).as_secs_f64() * 1e3;
    Ok(RayBatch { rays, keys: sorted_keys, values: sorted_values })
}

fn decompress(chunks: &Chunks, sorted_keys: &[u32], sorted_ids: &[u32], original_values: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let skeleton: Vec<u32> = sorted_ids.iter().map(|id| chunks.size[*id as usize]).collect();
    let out_base = exclusive_scan(&skeleton);
    let total: usize = skeleton.iter().map(|s| *s as usize).sum();
    let mut out_keys = vec![0u32; total];
    let mut out_values = vec![0u32; total];
    for j in 0..sorted_ids.len() {
        let id = sorted_ids[j] as usize;
        let src = chunks.base[id] as usize;
        let dst = out_base[j] as usize;
        for k in 0..chunks.size[id] as usize {
            out_keys[dst + k] = sorted_keys[j];
            out_values[dst + k] = original_values[src + k];
        }
    }
    (out_keys, out_values)
}

/// Debug dump of a (key, value) stage as CSV for golden tests.
pub fn dump_key_value_csv(path: &Path, keys: &[u32], values: &[u32]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from("index,key,value\n");
    for (i, (k, v)) in keys.iter().zip(values.iter()).enumerate() {
        text.push_str(&format!("{i},{k},{v}\n"));
    }
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
