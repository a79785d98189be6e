use super::*;
use crate::math::{ray_triangle_intersect, RayKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type V = Vec3<f64>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_vec(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> V {
    Vec3::new(rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi))
}

fn rand_unit(rng: &mut ChaCha8Rng) -> V {
    loop {
        let v = rand_vec(rng, -1.0, 1.0);
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn ray_at(origin: V, dir: V) -> Ray<f64> {
    let mut r = Ray::placeholder();
    r.origin = origin;
    r.dir = dir;
    r.kind = RayKind::Reflection;
    r
}

/// 64 directions on the boundary circle of a cone (or its axis for
/// degenerate spread).
fn cone_boundary_samples(cone: &Cone<f64>) -> Vec<V> {
    if cone.half_angle <= 0.0 {
        return vec![cone.axis];
    }
    let helper = if cone.axis.x.abs() < 0.9 { V::new(1.0, 0.0, 0.0) } else { V::new(0.0, 1.0, 0.0) };
    let u = cone.axis.cross(helper).normalized();
    let v = cone.axis.cross(u);
    let (sin_a, cos_a) = cone.half_angle.sin_cos();
    (0..64)
        .map(|i| {
            let phi = i as f64 / 64.0 * std::f64::consts::TAU;
            (u * (sin_a * phi.cos()) + v * (sin_a * phi.sin()) + cone.axis * cos_a).normalized()
        })
        .collect()
}

#[test]
fn cone_grow_inside_is_identity() {
    let cone = Cone::new(V::new(0.0, 0.0, 1.0), 0.0);
    let grown = cone_grow(&cone, V::new(0.0, 0.0, 1.0));
    assert_eq!(grown.axis, cone.axis);
    assert_eq!(grown.half_angle, 0.0);
}

#[test]
fn cone_grow_bisects_when_degenerate() {
    let cone = Cone::new(V::new(0.0, 0.0, 1.0), 0.0);
    let grown = cone_grow(&cone, V::new(1.0, 0.0, 0.0));
    let expect = V::new(1.0, 0.0, 1.0).normalized();
    assert!(grown.axis.distance(expect) < 1e-12);
    assert!((grown.half_angle - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
}

#[test]
fn cone_grow_antiparallel_returns_full() {
    let cone = Cone::new(V::new(0.0, 0.0, 1.0), 0.1);
    let grown = cone_grow(&cone, V::new(0.0, 0.0, -1.0));
    assert_eq!(grown.half_angle, std::f64::consts::PI);
}

#[test]
fn cone_grow_contains_old_cone_and_new_direction() {
    let mut r = rng(31);
    for _ in 0..10_000 {
        let cone = Cone::new(rand_unit(&mut r), r.random_range(0.0..2.5));
        let dir = rand_unit(&mut r);
        let grown = cone_grow(&cone, dir);
        let cos_new = grown.half_angle.cos();
        assert!(grown.axis.dot(dir) >= cos_new - 1e-5, "r outside: {cone:?} {dir:?} {grown:?}");
        for b in cone_boundary_samples(&cone) {
            assert!(grown.axis.dot(b) >= cos_new - 1e-5, "boundary escaped: {cone:?} {dir:?} {grown:?}");
        }
    }
}

#[test]
fn cone_union_identical_is_identity() {
    let cone = Cone::new(V::new(0.0, 1.0, 0.0), 0.3);
    let u = cone_union(&cone, &cone);
    assert!(u.axis.distance(cone.axis) < 1e-12);
    assert!((u.half_angle - 0.3).abs() < 1e-12);
}

#[test]
fn cone_union_orthogonal_degenerate_cones() {
    let a = Cone::new(V::new(0.0, 0.0, 1.0), 0.0);
    let b = Cone::new(V::new(1.0, 0.0, 0.0), 0.0);
    let u = cone_union(&a, &b);
    assert!(u.axis.distance(V::new(1.0, 0.0, 1.0).normalized()) < 1e-12);
    assert!((u.half_angle - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
}

#[test]
fn cone_union_opposed_axes_is_full() {
    let a = Cone::new(V::new(0.0, 0.0, 1.0), 0.2);
    let b = Cone::new(V::new(0.0, 0.0, -1.0), 0.2);
    assert_eq!(cone_union(&a, &b).half_angle, std::f64::consts::PI);
}

#[test]
fn cone_union_contains_both_inputs() {
    let mut r = rng(32);
    for _ in 0..10_000 {
        let c1 = Cone::new(rand_unit(&mut r), r.random_range(0.0..1.5));
        let c2 = Cone::new(rand_unit(&mut r), r.random_range(0.0..1.5));
        let u = cone_union(&c1, &c2);
        if u.half_angle >= std::f64::consts::PI {
            continue;
        }
        let cos_u = u.half_angle.cos();
        for c in [&c1, &c2] {
            for b in cone_boundary_samples(c) {
                assert!(u.axis.dot(b) >= cos_u - 1e-5, "{c1:?} {c2:?} -> {u:?}");
            }
        }
    }
}

#[test]
fn sphere_union_direct_evaluation() {
    let s1 = Sphere::new(V::zero(), 1.0);
    let s2 = Sphere::new(V::new(4.0, 0.0, 0.0), 1.0);
    let u = sphere_union(&s1, &s2);
    assert_eq!(u.center, V::new(2.0, 0.0, 0.0));
    assert_eq!(u.radius, 3.0);
}

#[test]
fn sphere_union_concentric_keeps_larger() {
    let c = V::new(1.0, 2.0, 3.0);
    let u = sphere_union(&Sphere::new(c, 3.0), &Sphere::new(c, 1.0));
    assert_eq!(u.center, c);
    assert_eq!(u.radius, 3.0);
}

#[test]
fn sphere_union_contains_both_surfaces() {
    let mut r = rng(33);
    for _ in 0..10_000 {
        let s1 = Sphere::new(rand_vec(&mut r, -5.0, 5.0), r.random_range(0.0..3.0));
        let s2 = Sphere::new(rand_vec(&mut r, -5.0, 5.0), r.random_range(0.0..3.0));
        let u = sphere_union(&s1, &s2);
        for s in [&s1, &s2] {
            for _ in 0..64 {
                let p = s.center + rand_unit(&mut r) * s.radius;
                assert!(u.contains(p, 1e-5), "{s1:?} {s2:?} -> {u:?}");
            }
        }
    }
}

#[test]
fn identical_rays_collapse_to_degenerate_node() {
    let rays: Vec<Ray<f64>> = (0..8).map(|_| ray_at(V::new(1.0, 2.0, 3.0), V::new(0.0, 0.0, 1.0))).collect();
    let hier = build_hierarchy(&rays, 8, 2);
    assert_eq!(hier.levels[0].len(), 1);
    assert_eq!(hier.levels[1].len(), 1);
    for level in &hier.levels {
        assert!(level[0].sphere.radius < 1e-6);
        assert!(level[0].cone.half_angle < 1e-6);
        assert!(level[0].sphere.center.distance(V::new(1.0, 2.0, 3.0)) < 1e-9);
    }
}

#[test]
fn level_sizes_follow_ceiling_arithmetic() {
    let mut r = rng(34);
    let rays: Vec<Ray<f64>> = (0..100).map(|_| ray_at(rand_vec(&mut r, -1.0, 1.0), rand_unit(&mut r))).collect();
    let hier = build_hierarchy(&rays, 8, 2);
    assert_eq!(hier.levels[0].len(), 13);
    assert_eq!(hier.levels[1].len(), 2);
    let empty = build_hierarchy::<f64>(&[], 8, 2);
    assert_eq!(empty.levels.len(), 2);
    assert!(empty.levels[0].is_empty() && empty.levels[1].is_empty());
}

#[test]
fn every_ray_is_inside_its_ancestors() {
    let mut r = rng(35);
    let rays: Vec<Ray<f64>> = (0..1_000).map(|_| ray_at(rand_vec(&mut r, -10.0, 10.0), rand_unit(&mut r))).collect();
    let hier = build_hierarchy(&rays, 8, 3);
    for (i, ray) in rays.iter().enumerate() {
        let mut node_idx = i / 8;
        for level in &hier.levels {
            let node = &level[node_idx];
            assert!(node.sphere.contains(ray.origin, 1e-5), "origin escaped at {i}");
            assert!(node.cone.contains_dir(ray.dir, 1e-6), "direction escaped at {i}");
            node_idx /= 8;
        }
    }
    // parents contain child bounds (sampled)
    for k in 1..hier.levels.len() {
        for (g, parent) in hier.levels[k].iter().enumerate() {
            for j in 0..8usize {
                let c = g * 8 + j;
                if c >= hier.levels[k - 1].len() {
                    break;
                }
                let child = &hier.levels[k - 1][c];
                assert!(
                    parent.sphere.radius + 1e-9
                        >= child.sphere.center.distance(parent.sphere.center) + child.sphere.radius - 1e-5
                );
                for b in cone_boundary_samples(&child.cone) {
                    assert!(parent.cone.contains_dir(b, 1e-5));
                }
            }
        }
    }
}

#[test]
fn sorted_input_tightens_level0_cones() {
    // direction-sorted rays vs the same rays shuffled
    let mut r = rng(36);
    let mut dirs: Vec<V> = (0..4_096).map(|_| rand_unit(&mut r)).collect();
    let shuffled: Vec<Ray<f64>> = dirs.iter().map(|d| ray_at(V::zero(), *d)).collect();
    dirs.sort_by(|a, b| {
        let (ta, pa) = crate::math::spherical_from_direction(*a);
        let (tb, pb) = crate::math::spherical_from_direction(*b);
        (ta, pa).partial_cmp(&(tb, pb)).unwrap()
    });
    let sorted: Vec<Ray<f64>> = dirs.iter().map(|d| ray_at(V::zero(), *d)).collect();
    let mean = |rays: &[Ray<f64>]| {
        let h = build_hierarchy(rays, 8, 2);
        h.levels[0].iter().map(|n| n.cone.half_angle).sum::<f64>() / h.levels[0].len() as f64
    };
    assert!(mean(&sorted) <= mean(&shuffled));
}

#[test]
fn pack_unpack_examples_and_errors() {
    assert_eq!(pack_hit(5, 9).unwrap(), 81_929);
    assert_eq!(pack_hit(MAX_NODE_ID, MAX_TRIANGLE_ID).unwrap(), u32::MAX);
    assert_eq!(unpack_hit(81_929), (5, 9));
    assert_eq!(unpack_hit(u32::MAX), (MAX_NODE_ID, MAX_TRIANGLE_ID));
    assert!(matches!(pack_hit(1 << 18, 0), Err(Error::NodeIdRange(_))));
    assert!(matches!(pack_hit(0, 1 << 14), Err(Error::TriangleIdRange(_))));
    let mut r = rng(37);
    for _ in 0..100_000 {
        let node = r.random_range(0..=MAX_NODE_ID);
        let tri = r.random_range(0..=MAX_TRIANGLE_ID);
        assert_eq!(unpack_hit(pack_hit(node, tri).unwrap()), (node, tri));
    }
}

#[test]
fn oversized_batch_is_rejected() {
    let tris: Vec<Triangle<f64>> = (0..(MAX_TRIANGLE_ID as usize + 2))
        .map(|_| Triangle::new(V::zero(), V::new(1.0, 0.0, 0.0), V::new(0.0, 1.0, 0.0)))
        .collect();
    let err = TriangleBatch::new(tris, 0).unwrap_err();
    assert!(matches!(err, Error::BatchTooLarge { size, max } if size == 16_385 && max == 16_384));
}

#[test]
fn oversized_hierarchy_is_rejected() {
    let node = RshNode {
        sphere: Sphere::point(V::zero()),
        cone: Cone::new(V::new(0.0, 0.0, 1.0), 0.0),
    };
    let hier = Hierarchy::<f64> {
        levels: vec![vec![node; MAX_NODE_ID as usize + 2], vec![node]],
        branching: 8,
        ray_count: (MAX_NODE_ID as usize + 2) * 8,
    };
    let batch =
        TriangleBatch::new(vec![Triangle::new(V::zero(), V::new(1.0, 0.0, 0.0), V::new(0.0, 1.0, 0.0))], 0)
            .unwrap();
    let mut counters = TraversalCounters::with_depth(2);
    let err = traverse(&hier, None, &batch, false, &mut counters).unwrap_err();
    assert!(matches!(err, Error::NodeCountOverflow { .. }));
}

#[test]
fn single_ray_single_triangle_survives() {
    let rays = vec![ray_at(V::new(0.0, 0.0, -2.0), V::new(0.0, 0.0, 1.0))];
    let hier = build_hierarchy(&rays, 8, 2);
    let tri = Triangle::new(V::new(-1.0, -1.0, 0.0), V::new(1.0, -1.0, 0.0), V::new(0.0, 1.0, 0.0));
    let batch = TriangleBatch::new(vec![tri], 0).unwrap();
    let mut counters = TraversalCounters::with_depth(2);
    let pairs = traverse(&hier, None, &batch, false, &mut counters).unwrap();
    assert_eq!(pairs.len(), 1);
    assert_eq!(unpack_hit(pairs[0]), (0, 0));
    assert_eq!(counters.levels[1].tests, 1);
    assert_eq!(counters.levels[1].hits, 1);
}

#[test]
fn triangle_behind_rays_counts_one_top_miss_per_node() {
    let mut r = rng(38);
    // 64 rays all pointing +z, far from a triangle behind them
    let rays: Vec<Ray<f64>> = (0..64)
        .map(|_| ray_at(rand_vec(&mut r, -0.5, 0.5), V::new(0.0, 0.0, 1.0)))
        .collect();
    let hier = build_hierarchy(&rays, 8, 2);
    let top_nodes = hier.top().len();
    let tri = Triangle::new(
        V::new(-0.5, -0.5, -500.0),
        V::new(0.5, -0.5, -500.0),
        V::new(0.0, 0.5, -500.0),
    );
    let batch = TriangleBatch::new(vec![tri], 0).unwrap();
    let mut counters = TraversalCounters::with_depth(2);
    let pairs = traverse(&hier, None, &batch, false, &mut counters).unwrap();
    assert!(pairs.is_empty());
    assert_eq!(counters.levels[1].tests, top_nodes as u64);
    assert_eq!(counters.levels[1].hits, 0);
    assert_eq!(counters.levels[0].tests, 0, "nothing survives to expand");
}

#[test]
fn traversal_keeps_every_exact_hit() {
    let mut r = rng(39);
    for _ in 0..50 {
        let rays: Vec<Ray<f64>> = (0..128)
            .map(|_| ray_at(rand_vec(&mut r, -4.0, 4.0), rand_unit(&mut r)))
            .collect();
        let tris: Vec<Triangle<f64>> = (0..48)
            .map(|_| {
                let base = rand_vec(&mut r, -4.0, 4.0);
                Triangle::new(
                    base,
                    base + rand_vec(&mut r, -1.5, 1.5),
                    base + rand_vec(&mut r, -1.5, 1.5),
                )
            })
            .collect();
        let hier = build_hierarchy(&rays, 8, 2);
        let batch = TriangleBatch::new(tris.clone(), 0).unwrap();
        let mut counters = TraversalCounters::with_depth(2);
        let pairs = traverse(&hier, None, &batch, false, &mut counters).unwrap();
        let surviving: std::collections::HashSet<(u32, u32)> =
            pairs.iter().map(|p| unpack_hit(*p)).collect();
        for (i, ray) in rays.iter().enumerate() {
            let node = (i / 8) as u32;
            for (t, tri) in tris.iter().enumerate() {
                if ray_triangle_intersect(ray.origin, ray.dir, f64::INFINITY, tri).is_some() {
                    assert!(
                        surviving.contains(&(node, t as u32)),
                        "culled a true hit: ray {i} tri {t}"
                    );
                }
            }
        }
        // monotone culling: pairs at level k-1 never exceed B x pairs at k
        assert!(counters.levels[0].tests <= counters.levels[1].hits * 8);
    }
}

#[test]
fn mesh_culling_skips_triangles_of_culled_meshes() {
    // rays aimed at mesh 0; mesh 1 far behind the rays
    let rays: Vec<Ray<f64>> = (0..8).map(|i| {
        ray_at(V::new(i as f64 * 0.01, 0.0, -2.0), V::new(0.0, 0.0, 1.0))
    }).collect();
    let hier = build_hierarchy(&rays, 8, 2);
    let mut front = Triangle::new(V::new(-1.0, -1.0, 0.0), V::new(1.0, -1.0, 0.0), V::new(0.0, 1.0, 0.0));
    front.mesh_id = 0;
    let mut behind = Triangle::new(
        V::new(-1.0, -1.0, -900.0),
        V::new(1.0, -1.0, -900.0),
        V::new(0.0, 1.0, -900.0),
    );
    behind.mesh_id = 1;
    let bounds = vec![
        triangle_bounding_sphere(&front, 0.0),
        triangle_bounding_sphere(&behind, 0.0),
    ];
    let batch = TriangleBatch::new(vec![front, behind], 0).unwrap();
    let mut counters = TraversalCounters::with_depth(2);
    let pairs = traverse(&hier, Some(&bounds), &batch, false, &mut counters).unwrap();
    assert_eq!(pairs.len(), 1);
    assert_eq!(counters.mesh.tests, 2);
    assert_eq!(counters.mesh.hits, 1);
    // the culled mesh's triangle was never tested at the top level
    assert_eq!(counters.levels[1].tests, 1);
}

#[test]
fn hierarchy_csv_dump_has_schema() {
    let rays = vec![ray_at(V::zero(), V::new(0.0, 0.0, 1.0))];
    let hier = build_hierarchy(&rays, 8, 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nodes.csv");
    hier.dump_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "level,nodeId,cx,cy,cz,radius,ax,ay,az,halfAngle");
    assert_eq!(lines.count(), 2);
}
