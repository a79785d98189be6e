//! Sphere-cone hierarchy over a ray array: bottom-up construction from
//! leaf groups, whole-mesh culling at the top level, and conservative
//! top-down traversal against triangle bounding spheres emitting packed
//! (node, triangle) candidate pairs.

use crate::math::{
    cone_sphere_test, cone_sphere_test_literal, triangle_bounding_sphere, Cone, Ray, Sphere,
    Triangle, Vec3,
};
use crate::prims::{radix_sort_pairs, trim_compact};
use crate::stats::Counter;
use crate::{Error, Real, Result};
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

pub const NODE_ID_BITS: u32 = 18;
pub const TRIANGLE_ID_BITS: u32 = 14;
pub const MAX_NODE_ID: u32 = (1 << NODE_ID_BITS) - 1;
pub const MAX_TRIANGLE_ID: u32 = (1 << TRIANGLE_ID_BITS) - 1;

/// Bounds one group of rays: origins inside the sphere, directions inside
/// the cone. Eight scalars total.
#[derive(Clone, Copy, Debug)]
pub struct RshNode<S> {
    pub sphere: Sphere<S>,
    pub cone: Cone<S>,
}

/// Grows a cone to admit one more unit direction. The new axis bisects the
/// incoming direction and the boundary direction farthest from it, which is
/// the tightest enclosing cone in their common plane.
pub fn cone_grow<S: Real>(cone: &Cone<S>, r: Vec3<S>) -> Cone<S> {
    let dot = cone.axis.dot(r);
    if dot >= cone.half_angle.cos() {
        return *cone;
    }
    if cone.half_angle >= S::PI() {
        return Cone::full();
    }
    let rejected = r - cone.axis * dot;
    let rej_norm = rejected.norm();
    if rej_norm < S::of(1e-6) {
        // r is (anti)parallel to the axis yet outside the cone
        return Cone::full();
    }
    let q = rejected / rej_norm;
    let theta = dot.max(-S::one()).min(S::one()).acos();
    if theta + cone.half_angle >= S::PI() - S::of(1e-9) {
        // the span [-half_angle, theta] exceeds a half turn, so the bisector
        // of r and the far boundary direction would pick the wrong arc;
        // rotate the axis toward r explicitly instead
        let half = (theta + cone.half_angle) * S::of(0.5);
        if half >= S::PI() {
            return Cone::full();
        }
        let rot = (theta - cone.half_angle) * S::of(0.5);
        let axis = cone.axis * rot.cos() + q * rot.sin();
        return Cone::new(axis.normalized(), half);
    }
    let (sin_phi, cos_phi) = cone.half_angle.sin_cos();
    let e = -cone.axis * cos_phi + q * sin_phi;
    let new_axis_raw = -e + r;
    if new_axis_raw.norm() < S::of(1e-6) {
        return Cone::full();
    }
    let new_axis = new_axis_raw.normalized();
    let new_half_angle = new_axis.dot(r).max(-S::one()).min(S::one()).acos();
    Cone::new(new_axis, new_half_angle)
}

/// Union of two cones: the axis bisects the two input axes and the spread
/// covers the wider input plus half the angle between the axes.
pub fn cone_union<S: Real>(c1: &Cone<S>, c2: &Cone<S>) -> Cone<S> {
    let sum = c1.axis + c2.axis;
    if sum.norm() < S::of(1e-6) {
        return Cone::full();
    }
    let axis = sum.normalized();
    let between = c1.axis.dot(c2.axis).max(-S::one()).min(S::one()).acos();
    let half_angle = (between * S::of(0.5) + c1.half_angle.max(c2.half_angle)).min(S::PI());
    Cone::new(axis, half_angle)
}

/// Union of two spheres: midpoint center, radius = half the center distance
/// plus the larger input radius.
pub fn sphere_union<S: Real>(s1: &Sphere<S>, s2: &Sphere<S>) -> Sphere<S> {
    let center = (s1.center + s2.center) * S::of(0.5);
    let radius = s1.center.distance(s2.center) * S::of(0.5) + s1.radius.max(s2.radius);
    Sphere::new(center, radius)
}

#[derive(Clone, Debug)]
pub struct Hierarchy<S> {
    /// levels[0] holds the leaf-group nodes; levels[D-1] is traversed first.
    pub levels: Vec<Vec<RshNode<S>>>,
    pub branching: usize,
    pub ray_count: usize,
}

impl<S: Real> Hierarchy<S> {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn top(&self) -> &[RshNode<S>] {
        self.levels.last().map(|l| l.as_slice()).unwrap_or(&[])
    }

    /// Rays covered by leaf-group node `g`.
    pub fn leaf_range(&self, g: usize) -> std::ops::Range<usize> {
        let start = g * self.branching;
        start..((g + 1) * self.branching).min(self.ray_count)
    }

    /// CSV dump of the node bounds, one row per node.
    pub fn dump_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("level,nodeId,cx,cy,cz,radius,ax,ay,az,halfAngle\n");
        for (level, nodes) in self.levels.iter().enumerate() {
            for (id, n) in nodes.iter().enumerate() {
                text.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    level,
                    id,
                    n.sphere.center.x.to_f64_lossy(),
                    n.sphere.center.y.to_f64_lossy(),
                    n.sphere.center.z.to_f64_lossy(),
                    n.sphere.radius.to_f64_lossy(),
                    n.cone.axis.x.to_f64_lossy(),
                    n.cone.axis.y.to_f64_lossy(),
                    n.cone.axis.z.to_f64_lossy(),
                    n.cone.half_angle.to_f64_lossy(),
                ));
            }
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Absorbs per-node accumulated rounding so the containment invariants hold
/// for 32-bit scalars too; the inflation is far below any culling margin.
fn pad_node<S: Real>(node: RshNode<S>) -> RshNode<S> {
    let eps = S::epsilon();
    let radius_pad = eps * S::of(8.0) * (S::one() + node.sphere.center.norm() + node.sphere.radius);
    let angle_pad = eps * S::of(16.0);
    RshNode {
        sphere: Sphere::new(node.sphere.center, node.sphere.radius + radius_pad),
        cone: Cone::new(node.cone.axis, (node.cone.half_angle + angle_pad).min(S::PI())),
    }
}

/// Bottom-up construction: leaves are the rays themselves (radius-0 spheres,
/// spread-0 cones); leaf groups of `branching` rays fold via incremental
/// cone growth, upper levels fold node pairs via cone/sphere unions. Exactly
/// `depth` levels are built, never a full root beyond that.
pub fn build_hierarchy<S: Real>(rays: &[Ray<S>], branching: usize, depth: usize) -> Hierarchy<S> {
    assert!(branching >= 2, "branching must be at least 2");
    assert!(depth >= 1, "at least one level");
    if rays.is_empty() {
        return Hierarchy { levels: vec![Vec::new(); depth], branching, ray_count: 0 };
    }

    let leaf_nodes = rays.len().div_ceil(branching);
    let level0: Vec<RshNode<S>> = (0..leaf_nodes)
        .into_par_iter()
        .map(|g| {
            let range = (g * branching)..((g + 1) * branching).min(rays.len());
            let first = &rays[range.start];
            let mut sphere = Sphere::point(first.origin);
            let mut cone = Cone::new(first.dir, S::zero());
            for ray in &rays[range.start + 1..range.end] {
                sphere = sphere_union(&sphere, &Sphere::point(ray.origin));
                cone = cone_grow(&cone, ray.dir);
            }
            pad_node(RshNode { sphere, cone })
        })
        .collect();

    let mut levels = vec![level0];
    for _ in 1..depth {
        let prev = levels.last().unwrap();
        let count = prev.len().div_ceil(branching);
        let next: Vec<RshNode<S>> = (0..count)
            .into_par_iter()
            .map(|g| {
                let range = (g * branching)..((g + 1) * branching).min(prev.len());
                let mut node = prev[range.start];
                for child in &prev[range.start + 1..range.end] {
                    node = RshNode {
                        sphere: sphere_union(&node.sphere, &child.sphere),
                        cone: cone_union(&node.cone, &child.cone),
                    };
                }
                pad_node(node)
            })
            .collect();
        levels.push(next);
    }

    Hierarchy { levels, branching, ray_count: rays.len() }
}

/// (nodeId << 14) | triangleId.
pub fn pack_hit(node_id: u32, tri_id: u32) -> Result<u32> {
    if node_id > MAX_NODE_ID {
        return Err(Error::NodeIdRange(node_id));
    }
    if tri_id > MAX_TRIANGLE_ID {
        return Err(Error::TriangleIdRange(tri_id));
    }
    Ok((node_id << TRIANGLE_ID_BITS) | tri_id)
}

pub fn unpack_hit(packed: u32) -> (u32, u32) {
    (packed >> TRIANGLE_ID_BITS, packed & MAX_TRIANGLE_ID)
}

/// A contiguous slice of the scene's triangles, at most 2^14 of them, with
/// precomputed bounding spheres. `global_start` keeps triangle ids globally
/// comparable for tie-breaking.
#[derive(Clone, Debug)]
pub struct TriangleBatch<S> {
    pub triangles: Vec<Triangle<S>>,
    pub spheres: Vec<Sphere<S>>,
    pub global_start: u32,
}

impl<S: Real> TriangleBatch<S> {
    pub fn new(mut triangles: Vec<Triangle<S>>, global_start: u32) -> Result<Self> {
        if triangles.len() > MAX_TRIANGLE_ID as usize + 1 {
            return Err(Error::BatchTooLarge {
                size: triangles.len(),
                max: MAX_TRIANGLE_ID as usize + 1,
            });
        }
        for (local, tri) in triangles.iter_mut().enumerate() {
            tri.local_id = local as u32;
        }
        let spheres = triangles.iter().map(|t| triangle_bounding_sphere(t, S::zero())).collect();
        Ok(TriangleBatch { triangles, spheres, global_start })
    }
}

/// Per-traversal tallies; `levels[k]` counts node-vs-triangle-sphere tests
/// at hierarchy level k.
#[derive(Clone, Debug, Default)]
pub struct TraversalCounters {
    pub mesh: Counter,
    pub levels: Vec<Counter>,
}

impl TraversalCounters {
    pub fn with_depth(depth: usize) -> Self {
        TraversalCounters { mesh: Counter::default(), levels: vec![Counter::default(); depth] }
    }
}

fn node_test<S: Real>(node: &RshNode<S>, target: &Sphere<S>, literal: bool) -> bool {
    if literal {
        cone_sphere_test_literal(&node.sphere, &node.cone, target)
    } else {
        cone_sphere_test(&node.sphere, &node.cone, target)
    }
}

/// Top-down traversal. Phase 1 (when `mesh_bounds` is given) culls whole
/// meshes per top node; phase 2 tests the surviving triangles' bounding
/// spheres against the top nodes; each further level expands surviving
/// pairs to child nodes, retests, trims, and re-sorts by (node, triangle).
/// Returns the packed leaf-level pairs.
pub fn traverse<S: Real>(
    hier: &Hierarchy<S>,
    mesh_bounds: Option<&[Sphere<S>]>,
    batch: &TriangleBatch<S>,
    literal_cone_test: bool,
    counters: &mut TraversalCounters,
) -> Result<Vec<u32>> {
    assert_eq!(counters.levels.len(), hier.depth());
    if batch.triangles.len() > MAX_TRIANGLE_ID as usize + 1 {
        return Err(Error::BatchTooLarge { size: batch.triangles.len(), max: MAX_TRIANGLE_ID as usize + 1 });
    }
    if let Some(first) = hier.levels.first() {
        if first.len() > MAX_NODE_ID as usize + 1 {
            return Err(Error::NodeCountOverflow { nodes: first.len() });
        }
    }
    let top_level = hier.depth() - 1;
    let top = hier.top();
    if top.is_empty() || batch.triangles.is_empty() {
        return Ok(Vec::new());
    }

    // Phase 1: whole-mesh culling per top node.
    let mesh_pass: Option<Vec<Vec<bool>>> = mesh_bounds.map(|bounds| {
        let (pass, tallies): (Vec<Vec<bool>>, Vec<Counter>) = top
            .par_iter()
            .map(|node| {
                let mut tally = Counter::default();
                let row: Vec<bool> = bounds
                    .iter()
                    .map(|b| {
                        tally.tests += 1;
                        let hit = node_test(node, b, literal_cone_test);
                        tally.hits += u64::from(hit);
                        hit
                    })
                    .collect();
                (row, tally)
            })
            .unzip();
        for t in tallies {
            counters.mesh.add(t);
        }
        pass
    });

    // Phase 2: top nodes against the batch triangles' bounding spheres.
    let (top_pairs, tallies): (Vec<Vec<u32>>, Vec<Counter>) = (0..top.len())
        .into_par_iter()
        .map(|node_id| {
            let node = &top[node_id];
            let mut tally = Counter::default();
            let mut pairs = Vec::new();
            let pass_row = mesh_pass.as_ref().map(|rows| &rows[node_id]);
            for (tri_id, sphere) in batch.spheres.iter().enumerate() {
                if let Some(row) = pass_row {
                    if !row[batch.triangles[tri_id].mesh_id as usize] {
                        continue; // whole mesh culled for this node
                    }
                }
                tally.tests += 1;
                if node_test(node, sphere, literal_cone_test) {
                    tally.hits += 1;
                    pairs.push(pack_hit(node_id as u32, tri_id as u32).expect("checked bounds"));
                }
            }
            (pairs, tally)
        })
        .unzip();
    for t in tallies {
        counters.levels[top_level].add(t);
    }
    // node-major, triangle-minor emission is already (node, tri) sorted
    let mut pairs: Vec<u32> = top_pairs.into_iter().flatten().collect();

    // Phase 3: expand each level's survivors down to its children.
    const PAIR_CHUNK: usize = 4096;
    for level in (0..top_level).rev() {
        let nodes = &hier.levels[level];
        let branching = hier.branching;
        // fixed contiguous chunks keep the expansion order independent of
        // the worker count
        let per_chunk: Vec<(Vec<u32>, Vec<u32>, Counter)> = pairs
            .par_chunks(PAIR_CHUNK)
            .map(|chunk| {
                let mut cand = Vec::with_capacity(chunk.len() * branching);
                let mut empty = Vec::with_capacity(chunk.len() * branching);
                let mut tally = Counter::default();
                for &packed in chunk {
                    let (parent, tri_id) = unpack_hit(packed);
                    let sphere = &batch.spheres[tri_id as usize];
                    for j in 0..branching {
                        let child = parent as usize * branching + j;
                        if child < nodes.len() {
                            tally.tests += 1;
                            if node_test(&nodes[child], sphere, literal_cone_test) {
                                tally.hits += 1;
                                cand.push(pack_hit(child as u32, tri_id).expect("checked bounds"));
                                empty.push(0);
                                continue;
                            }
                        }
                        cand.push(0);
                        empty.push(1);
                    }
                }
                (cand, empty, tally)
            })
            .collect();
        let mut candidates = Vec::with_capacity(pairs.len() * branching);
        let mut flags = Vec::with_capacity(pairs.len() * branching);
        for (cand, empty, tally) in per_chunk {
            candidates.extend_from_slice(&cand);
            flags.extend_from_slice(&empty);
            counters.levels[level].add(tally);
        }
        let idx: Vec<u32> = (0..candidates.len() as u32).collect();
        let (survivors, _) = trim_compact(&flags, &candidates, &idx)?;
        // deterministic (node, tri) order for the next phase
        let order: Vec<u32> = (0..survivors.len() as u32).collect();
        let (sorted, _) = radix_sort_pairs(&survivors, &order)?;
        pairs = sorted;
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests;
