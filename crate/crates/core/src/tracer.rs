//! Whitted tracing loop and the three engines. `brute` tests every ray
//! against every triangle; `rah` builds the hierarchy over unsorted rays
//! with no mesh culling; `crsh` sorts the rays first and culls whole meshes
//! at the top level. All engines resolve identical nearest hits (ties break
//! to the lowest global triangle index), so their images match and only the
//! intersection counters differ.

use crate::gbuffer::{render_gbuffer, GBuffer};
use crate::math::{ray_triangle_intersect, Ray, RayKind, Rgb, Sphere, Triangle, Vec3};
use crate::pipeline::{
    generate_secondary_rays, sort_batch, trim_batch, HashLayout, RayBatch, ShadePoint, SortTimings,
};
use crate::rsh::{build_hierarchy, traverse, unpack_hit, Hierarchy, TraversalCounters, TriangleBatch};
use crate::scene::SceneDesc;
use crate::stats::{Counter, LevelRow, PhaseRow, RayCounts, StatsReport};
use crate::{Error, Real, Result};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Brute,
    Rah,
    Crsh,
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Brute => "brute",
            Engine::Rah => "rah",
            Engine::Crsh => "crsh",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RenderOptions {
    pub bounces: Option<u32>,
    pub levels: Option<u32>,
    pub branching: Option<u32>,
    pub layout: Option<HashLayout>,
    /// Run the literal published cone-sphere inequality instead of the
    /// axis-distance form; for comparison runs only.
    pub literal_cone_test: bool,
    /// Attach wall-clock stage timings to the report. Off by default so
    /// repeated runs stay byte-identical.
    pub collect_timings: bool,
    /// Write the first batch's hierarchy node bounds as CSV.
    pub dump_hierarchy: Option<std::path::PathBuf>,
    /// Write the first sorted batch's key/value arrays as CSV
    /// (PREFIX_unsorted.csv and PREFIX_sorted.csv).
    pub dump_pipeline: Option<std::path::PathBuf>,
}

#[derive(Clone, Debug)]
pub struct FrameImage<S> {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<Rgb<S>>,
}

impl<S: Real> FrameImage<S> {
    pub fn black(width: u32, height: u32) -> Self {
        FrameImage { width, height, pixels: vec![Vec3::zero(); (width * height) as usize] }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::ppm::write_image(path, self.width, self.height, &self.pixels)
    }

    pub fn max_channel_diff(&self, other: &FrameImage<S>) -> f64 {
        assert_eq!(self.pixels.len(), other.pixels.len());
        let mut max = 0.0f64;
        for (a, b) in self.pixels.iter().zip(other.pixels.iter()) {
            let d = *a - *b;
            for c in [d.x, d.y, d.z] {
                max = max.max(c.to_f64_lossy().abs());
            }
        }
        max
    }
}

pub const NO_TRIANGLE: u32 = u32::MAX;

/// Nearest-hit record per ray; `tri` is the global triangle index or
/// `NO_TRIANGLE`.
#[derive(Clone, Copy, Debug)]
pub struct HitRecord<S> {
    pub t: S,
    pub tri: u32,
}

impl<S: Real> HitRecord<S> {
    pub fn none() -> Self {
        HitRecord { t: S::infinity(), tri: NO_TRIANGLE }
    }

    fn offer(&mut self, t: S, tri: u32) {
        if t < self.t || (t == self.t && tri < self.tri) {
            self.t = t;
            self.tri = tri;
        }
    }
}

#[derive(Default)]
struct Tallies {
    mesh: Counter,
    levels: Vec<Counter>,
    final_tests: Counter,
    brute_equivalent: u64,
    rays: RayCounts,
}

#[derive(Default)]
struct StageClock {
    millis: BTreeMap<&'static str, f64>,
}

impl StageClock {
    fn add(&mut self, stage: &'static str, since: Instant) {
        *self.millis.entry(stage).or_insert(0.0) += since.elapsed().as_secs_f64() * 1e3;
    }

    fn add_ms(&mut self, stage: &'static str, ms: f64) {
        *self.millis.entry(stage).or_insert(0.0) += ms;
    }
}

struct EngineCtx<'a, S> {
    scene: &'a SceneDesc<S>,
    engine: Engine,
    batches: &'a [TriangleBatch<S>],
    mesh_bounds: Vec<Sphere<S>>,
    batch_size: usize,
    branching: usize,
    depth: usize,
    literal_cone_test: bool,
    total_triangles: u64,
    dump_hierarchy: Option<&'a Path>,
    dump_pipeline: Option<&'a Path>,
    dumped: std::sync::atomic::AtomicBool,
    dumped_hier: std::sync::atomic::AtomicBool,
}

fn dump_pipeline_stages<S: Real>(prefix: &Path, unsorted: &RayBatch<S>, sorted: &RayBatch<S>) -> Result<()> {
    let named = |suffix: &str| {
        let stem = prefix
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "pipeline".into());
        prefix.with_file_name(format!("{stem}_{suffix}.csv"))
    };
    crate::pipeline::dump_key_value_csv(&named("unsorted"), &unsorted.keys, &unsorted.values)?;
    crate::pipeline::dump_key_value_csv(&named("sorted"), &sorted.keys, &sorted.values)
}

/// Splits the concatenated scene triangles (mesh order) into bounded
/// batches with precomputed bounding spheres.
pub fn build_triangle_batches<S: Real>(scene: &SceneDesc<S>, batch_size: usize) -> Result<Vec<TriangleBatch<S>>> {
    if batch_size == 0 || batch_size > crate::scene::MAX_TRIANGLE_BATCH {
        return Err(Error::BatchTooLarge { size: batch_size, max: crate::scene::MAX_TRIANGLE_BATCH });
    }
    let all: Vec<Triangle<S>> = scene.meshes.iter().flat_map(|m| m.triangles.iter().copied()).collect();
    let mut batches = Vec::new();
    let mut start = 0usize;
    while start < all.len() {
        let end = (start + batch_size).min(all.len());
        batches.push(TriangleBatch::new(all[start..end].to_vec(), start as u32)?);
        start = end;
    }
    Ok(batches)
}

fn lookup_triangle<'a, S>(ctx: &'a EngineCtx<'_, S>, global: u32) -> &'a Triangle<S> {
    let batch = &ctx.batches[global as usize / ctx.batch_size];
    &batch.triangles[global as usize % ctx.batch_size]
}

/// Every ray of each surviving leaf-group pair is tested against the pair's
/// triangle; the per-ray minimum (t, lowest global index) is retained. No
/// early-out anywhere so the counters are exact and order-free.
pub fn final_intersections<S: Real>(
    pairs: &[u32],
    hier: &Hierarchy<S>,
    rays: &[Ray<S>],
    batch: &TriangleBatch<S>,
    records: &mut [HitRecord<S>],
) -> Counter {
    let per_chunk: Vec<(Vec<(u32, S, u32)>, Counter)> = pairs
        .par_chunks(1024)
        .map(|chunk| {
            let mut hits = Vec::new();
            let mut tally = Counter::default();
            for &packed in chunk {
                let (node, tri_local) = unpack_hit(packed);
                let tri = &batch.triangles[tri_local as usize];
                let global = batch.global_start + tri_local;
                for ray_idx in hier.leaf_range(node as usize) {
                    let ray = &rays[ray_idx];
                    tally.tests += 1;
                    if let Some(hit) = ray_triangle_intersect(ray.origin, ray.dir, ray.max_t, tri) {
                        tally.hits += 1;
                        hits.push((ray_idx as u32, hit.t, global));
                    }
                }
            }
            (hits, tally)
        })
        .collect();
    let mut total = Counter::default();
    for (hits, tally) in per_chunk {
        total.add(tally);
        for (ray_idx, t, global) in hits {
            records[ray_idx as usize].offer(t, global);
        }
    }
    total
}

/// Hit records in the batch's generation order, resolved by the engine.
fn resolve_batch<S: Real>(
    ctx: &EngineCtx<'_, S>,
    batch: &RayBatch<S>,
    tallies: &mut Tallies,
    clock: &mut StageClock,
) -> Result<Vec<HitRecord<S>>> {
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    match ctx.engine {
        Engine::Brute => Ok(resolve_brute(ctx, batch, tallies, clock)),
        Engine::Rah => resolve_hierarchical(ctx, batch, false, tallies, clock),
        Engine::Crsh => {
            let mut sort_timings = SortTimings::default();
            let sorted = sort_batch(batch, &mut sort_timings)?;
            clock.add_ms("rayCompression", sort_timings.compression_ms);
            clock.add_ms("raySorting", sort_timings.sorting_ms);
            clock.add_ms("rayDecompression", sort_timings.decompression_ms);
            if let Some(prefix) = ctx.dump_pipeline {
                if !ctx.dumped.swap(true, std::sync::atomic::Ordering::SeqCst) {
                    dump_pipeline_stages(prefix, batch, &sorted)?;
                }
            }
            let sorted_records = resolve_hierarchical(ctx, &sorted, true, tallies, clock)?;
            // scatter back to generation order via the sort permutation
            let mut records = vec![HitRecord::none(); sorted_records.len()];
            for (i, rec) in sorted_records.into_iter().enumerate() {
                records[sorted.values[i] as usize] = rec;
            }
            Ok(records)
        }
    }
}

fn resolve_brute<S: Real>(
    ctx: &EngineCtx<'_, S>,
    batch: &RayBatch<S>,
    tallies: &mut Tallies,
    clock: &mut StageClock,
) -> Vec<HitRecord<S>> {
    let t0 = Instant::now();
    let results: Vec<(HitRecord<S>, u64)> = batch
        .rays
        .par_iter()
        .map(|ray| {
            let mut rec = HitRecord::none();
            let mut hits = 0u64;
            for tb in ctx.batches {
                for (local, tri) in tb.triangles.iter().enumerate() {
                    if let Some(hit) = ray_triangle_intersect(ray.origin, ray.dir, ray.max_t, tri) {
                        hits += 1;
                        rec.offer(hit.t, tb.global_start + local as u32);
                    }
                }
            }
            (rec, hits)
        })
        .collect();
    tallies.final_tests.tests += batch.len() as u64 * ctx.total_triangles;
    let mut records = Vec::with_capacity(results.len());
    for (rec, hits) in results {
        tallies.final_tests.hits += hits;
        records.push(rec);
    }
    clock.add(
        "finalIntersectionTests",
        t0,
    );
    records
}

fn resolve_hierarchical<S: Real>(
    ctx: &EngineCtx<'_, S>,
    batch: &RayBatch<S>,
    mesh_culling: bool,
    tallies: &mut Tallies,
    clock: &mut StageClock,
) -> Result<Vec<HitRecord<S>>> {
    let t0 = Instant::now();
    let hier = build_hierarchy(&batch.rays, ctx.branching, ctx.depth);
    clock.add("hierarchyCreation", t0);
    if let Some(path) = ctx.dump_hierarchy {
        if !ctx.dumped_hier.swap(true, std::sync::atomic::Ordering::SeqCst) {
            hier.dump_csv(path)?;
        }
    }

    let mut records = vec![HitRecord::none(); batch.len()];
    let mut counters = TraversalCounters::with_depth(ctx.depth);
    for tb in ctx.batches {
        let t1 = Instant::now();
        let bounds = mesh_culling.then_some(ctx.mesh_bounds.as_slice());
        let pairs = traverse(&hier, bounds, tb, ctx.literal_cone_test, &mut counters)?;
        clock.add("hierarchyTraversal", t1);

        let t2 = Instant::now();
        let final_counter = final_intersections(&pairs, &hier, &batch.rays, tb, &mut records);
        tallies.final_tests.add(final_counter);
        clock.add("finalIntersectionTests", t2);
    }
    tallies.mesh.add(counters.mesh);
    for (dst, src) in tallies.levels.iter_mut().zip(counters.levels.iter()) {
        dst.add(*src);
    }
    Ok(records)
}

/// Light-major occlusion table: entry [light * points + source] is true
/// when the shadow ray from that light to that shading point is blocked
/// strictly before the fragment (epsilon guard excludes the fragment's own
/// surface).
pub fn occlusion_table<S: Real>(
    batch: &RayBatch<S>,
    records: &[HitRecord<S>],
    light_count: usize,
    point_count: usize,
) -> Vec<bool> {
    let mut occluded = vec![false; light_count * point_count];
    for (ray, rec) in batch.rays.iter().zip(records.iter()) {
        if rec.tri != NO_TRIANGLE && rec.t < ray.max_t - S::of(1e-4) {
            occluded[ray.light as usize * point_count + ray.source as usize] = true;
        }
    }
    occluded
}

/// Blinn-Phong direct lighting, accumulated per pixel in slot-then-light
/// order so the sum is identical for every engine and worker count.
pub fn shade_direct<S: Real>(
    points: &[Option<ShadePoint<S>>],
    occluded: &[bool],
    scene: &SceneDesc<S>,
    image: &mut FrameImage<S>,
) {
    let point_count = points.len();
    for (slot, point) in points.iter().enumerate() {
        let Some(point) = point else { continue };
        let material = &scene.materials[point.material_id as usize];
        let view = -point.incoming;
        let mut total = Vec3::zero();
        for light in &scene.lights {
            if occluded[light.index as usize * point_count + slot] {
                continue;
            }
            let to_light = light.position - point.position;
            let dist = to_light.norm();
            if dist <= S::zero() {
                continue;
            }
            let l = to_light / dist;
            let n_dot_l = point.normal.dot(l);
            if n_dot_l <= S::zero() {
                continue; // grazing or facing away
            }
            let mut color = material.diffuse * n_dot_l;
            let half = (l + view).normalized();
            let n_dot_h = point.normal.dot(half);
            if n_dot_h > S::zero() {
                color += material.specular * n_dot_h.powf(material.shininess);
            }
            total += color.mul_elem(light.intensity);
        }
        image.pixels[point.pixel as usize] += total.mul_elem(point.throughput);
    }
}

/// Converts resolved bounce hits into next-generation shading points, in the
/// batch's generation order (engine-independent).
fn points_from_hits<S: Real>(
    ctx: &EngineCtx<'_, S>,
    batch: &RayBatch<S>,
    records: &[HitRecord<S>],
) -> Vec<Option<ShadePoint<S>>> {
    batch
        .rays
        .iter()
        .zip(records.iter())
        .map(|(ray, rec)| {
            if rec.tri == NO_TRIANGLE {
                return None;
            }
            let tri = lookup_triangle(ctx, rec.tri);
            let gn = tri.geometric_normal();
            let front = gn.dot(ray.dir) < S::zero();
            Some(ShadePoint {
                pixel: ray.pixel,
                position: ray.origin + ray.dir * rec.t,
                normal: if front { gn } else { -gn },
                incoming: ray.dir,
                front,
                material_id: ctx.scene.meshes[tri.mesh_id as usize].material_id,
                throughput: ray.throughput,
            })
        })
        .collect()
}

fn points_from_gbuffer<S: Real>(gb: &GBuffer<S>, scene: &SceneDesc<S>) -> Vec<Option<ShadePoint<S>>> {
    let eye = scene.camera.eye;
    gb.pixels
        .iter()
        .enumerate()
        .map(|(i, px)| {
            if !px.valid {
                return None;
            }
            Some(ShadePoint {
                pixel: i as u32,
                position: px.position,
                normal: px.normal,
                incoming: (px.position - eye).normalized(),
                front: px.front,
                material_id: px.material_id,
                throughput: Vec3::splat(S::one()),
            })
        })
        .collect()
}

/// Renders the scene with the selected engine and reports the intersection
/// counters. The G-buffer pass is shared verbatim across engines.
pub fn render<S: Real>(
    scene: &SceneDesc<S>,
    engine: Engine,
    opts: &RenderOptions,
) -> Result<(FrameImage<S>, StatsReport)> {
    scene.validate()?;
    let layout = opts.layout.unwrap_or_default();
    layout.validate()?;
    if scene.lights.len() > layout.max_lights() {
        return Err(Error::TooManyLights { count: scene.lights.len(), max: layout.max_lights() });
    }
    let depth = opts.levels.unwrap_or(scene.settings.hierarchy_levels).max(1) as usize;
    let branching = opts.branching.unwrap_or(scene.settings.branching).max(2) as usize;
    let bounces = opts.bounces.unwrap_or(scene.settings.bounce_depth);
    let batch_size = scene.settings.triangle_batch_size as usize;
    let batches = build_triangle_batches(scene, batch_size)?;
    let ctx = EngineCtx {
        scene,
        engine,
        batches: &batches,
        mesh_bounds: scene.meshes.iter().map(|m| m.bound).collect(),
        batch_size,
        branching,
        depth,
        literal_cone_test: opts.literal_cone_test,
        total_triangles: scene.triangle_count() as u64,
        dump_hierarchy: opts.dump_hierarchy.as_deref(),
        dump_pipeline: opts.dump_pipeline.as_deref(),
        dumped: std::sync::atomic::AtomicBool::new(false),
        dumped_hier: std::sync::atomic::AtomicBool::new(false),
    };

    let mut clock = StageClock::default();
    let mut tallies = Tallies { levels: vec![Counter::default(); depth], ..Default::default() };

    let t0 = Instant::now();
    let gbuffer = render_gbuffer(scene);
    clock.add("gBuffer", t0);
    log::info!("g-buffer pass done ({}x{})", gbuffer.width, gbuffer.height);

    let mut image = FrameImage::black(gbuffer.width, gbuffer.height);
    let mut points = points_from_gbuffer(&gbuffer, scene);

    for bounce in 0..=bounces {
        if points.iter().all(Option::is_none) {
            break;
        }
        // shadow pass
        let t1 = Instant::now();
        let slots = generate_secondary_rays(&points, scene, RayKind::Shadow, &layout)?;
        let shadow = trim_batch(slots)?;
        clock.add("rayCreation", t1);
        tallies.rays.shadow += shadow.len() as u64;
        tallies.brute_equivalent += shadow.len() as u64 * ctx.total_triangles;
        let records = resolve_batch(&ctx, &shadow, &mut tallies, &mut clock)?;
        let occluded = occlusion_table(&shadow, &records, scene.lights.len(), points.len());
        shade_direct(&points, &occluded, scene, &mut image);
        log::info!("bounce {bounce}: {} shadow rays", shadow.len());

        if bounce == bounces {
            break;
        }

        // spawn the next generation from reflection and refraction hits
        let mut next: Vec<Option<ShadePoint<S>>> = Vec::new();
        for kind in [RayKind::Reflection, RayKind::Refraction] {
            let t2 = Instant::now();
            let slots = generate_secondary_rays(&points, scene, kind, &layout)?;
            let batch = trim_batch(slots)?;
            clock.add("rayCreation", t2);
            match kind {
                RayKind::Reflection => tallies.rays.reflection += batch.len() as u64,
                RayKind::Refraction => tallies.rays.refraction += batch.len() as u64,
                RayKind::Shadow => unreachable!(),
            }
            tallies.brute_equivalent += batch.len() as u64 * ctx.total_triangles;
            let records = resolve_batch(&ctx, &batch, &mut tallies, &mut clock)?;
            next.extend(points_from_hits(&ctx, &batch, &records));
            log::info!("bounce {bounce}: {} {:?} rays", batch.len(), kind);
        }
        points = next;
    }

    let mut report = StatsReport {
        engine: engine.name().to_string(),
        width: gbuffer.width,
        height: gbuffer.height,
        bounces,
        levels: depth as u32,
        branching: branching as u32,
        ray_counts: tallies.rays,
        mesh_cull: PhaseRow::from_counter(tallies.mesh),
        per_level: (0..depth)
            .rev()
            .map(|k| LevelRow::from_counter(k as u32 + 1, tallies.levels[k]))
            .collect(),
        final_ray_tri_tests: tallies.final_tests.tests,
        final_hits: tallies.final_tests.hits,
        total_tests: 0,
        brute_force_equivalent: tallies.brute_equivalent,
        relative_percent: 0.0,
        per_stage_millis: opts.collect_timings.then(|| {
            clock.millis.iter().map(|(k, v)| (k.to_string(), *v)).collect()
        }),
    };
    report.compute_totals();
    Ok((image, report))
}

#[cfg(test)]
mod tests;
