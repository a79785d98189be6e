//! Minimal enclosing sphere of a point set (randomized incremental, the
//! unrolled Welzl formulation with at most four support points).

use super::{Sphere, Vec3};
use crate::{Error, Real, Result};

type V = Vec3<f64>;

#[derive(Clone, Copy)]
struct Ball {
    center: V,
    radius_sq: f64,
}

impl Ball {
    fn contains(&self, p: V) -> bool {
        (p - self.center).norm_sq() <= self.radius_sq * (1.0 + 1e-10) + 1e-30
    }
}

/// Smallest sphere containing all points. The returned radius is the exact
/// max distance from the solved center, so containment holds in the caller's
/// scalar type without slack.
pub fn minimal_enclosing_sphere<S: Real>(points: &[Vec3<S>]) -> Result<Sphere<S>> {
    if points.is_empty() {
        return Err(Error::NoPoints);
    }
    let mut pts: Vec<V> = points.iter().map(|p| p.to_f64()).collect();
    shuffle(&mut pts);
    let ball = welzl(&pts);
    let center = Vec3::from_f64(ball.center);
    let mut radius = S::zero();
    for p in points {
        radius = radius.max(p.distance(center));
    }
    Ok(Sphere::new(center, radius))
}

/// Deterministic splitmix64-driven Fisher-Yates; the algorithm's expected
/// linear running time needs a random insertion order.
fn shuffle(pts: &mut [V]) {
    let mut state: u64 = 0x243f_6a88_85a3_08d3;
    let mut next = || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    for i in (1..pts.len()).rev() {
        let j = (next() % (i as u64 + 1)) as usize;
        pts.swap(i, j);
    }
}

fn welzl(pts: &[V]) -> Ball {
    let mut ball = Ball { center: pts[0], radius_sq: 0.0 };
    for i in 1..pts.len() {
        if !ball.contains(pts[i]) {
            ball = with_one(&pts[..i], pts[i]);
        }
    }
    ball
}

fn with_one(pts: &[V], q: V) -> Ball {
    let mut ball = Ball { center: q, radius_sq: 0.0 };
    for j in 0..pts.len() {
        if !ball.contains(pts[j]) {
            ball = with_two(&pts[..j], pts[j], q);
        }
    }
    ball
}

fn with_two(pts: &[V], q1: V, q2: V) -> Ball {
    let mut ball = diameter_ball(q1, q2);
    for k in 0..pts.len() {
        if !ball.contains(pts[k]) {
            ball = with_three(&pts[..k], pts[k], q1, q2);
        }
    }
    ball
}

fn with_three(pts: &[V], q1: V, q2: V, q3: V) -> Ball {
    let mut ball = circumball3(q1, q2, q3);
    for l in 0..pts.len() {
        if !ball.contains(pts[l]) {
            ball = circumball4(pts[l], q1, q2, q3);
        }
    }
    ball
}

fn diameter_ball(a: V, b: V) -> Ball {
    let center = (a + b) * 0.5;
    Ball { center, radius_sq: (a - center).norm_sq() }
}

/// Sphere through three points with center in their plane. Collinear inputs
/// fall back to the widest pair's diameter ball.
fn circumball3(a: V, b: V, c: V) -> Ball {
    let ab = b - a;
    let ac = c - a;
    let n = ab.cross(ac);
    let n_sq = n.norm_sq();
    if n_sq <= 1e-28 * ab.norm_sq() * ac.norm_sq() {
        let candidates = [diameter_ball(a, b), diameter_ball(a, c), diameter_ball(b, c)];
        let mut best = candidates[0];
        for cand in &candidates[1..] {
            if cand.radius_sq > best.radius_sq {
                best = *cand;
            }
        }
        return best;
    }
    let rel = (n.cross(ab) * ac.norm_sq() + ac.cross(n) * ab.norm_sq()) / (2.0 * n_sq);
    let center = a + rel;
    Ball { center, radius_sq: rel.norm_sq() }
}

/// Sphere through four points. Coplanar inputs (support is really ≤ 3) fall
/// back to the smallest lower-order candidate covering all four.
fn circumball4(a: V, b: V, c: V, d: V) -> Ball {
    let rows = [b - a, c - a, d - a];
    let rhs = [rows[0].norm_sq() * 0.5, rows[1].norm_sq() * 0.5, rows[2].norm_sq() * 0.5];
    let det = rows[0].dot(rows[1].cross(rows[2]));
    let scale = rows[0].norm() * rows[1].norm() * rows[2].norm();
    if det.abs() <= 1e-12 * (scale + 1e-300) {
        return fallback4(a, b, c, d);
    }
    // Cramer on the 2(p_i - a)·x = |p_i - a|² system.
    let inv = 1.0 / det;
    let col = |k: usize| -> f64 {
        let mut m = rows;
        m[0] = replace_col(m[0], k, rhs[0]);
        m[1] = replace_col(m[1], k, rhs[1]);
        m[2] = replace_col(m[2], k, rhs[2]);
        m[0].dot(m[1].cross(m[2])) * inv
    };
    let rel = Vec3::new(col(0), col(1), col(2));
    Ball { center: a + rel, radius_sq: rel.norm_sq() }
}

fn replace_col(mut v: V, k: usize, value: f64) -> V {
    match k {
        0 => v.x = value,
        1 => v.y = value,
        _ => v.z = value,
    }
    v
}

fn fallback4(a: V, b: V, c: V, d: V) -> Ball {
    let quad = [a, b, c, d];
    let mut best: Option<Ball> = None;
    let mut consider = |ball: Ball| {
        if quad.iter().all(|p| ball.contains(*p)) {
            match best {
                Some(cur) if cur.radius_sq <= ball.radius_sq => {}
                _ => best = Some(ball),
            }
        }
    };
    for i in 0..4 {
        for j in i + 1..4 {
            consider(diameter_ball(quad[i], quad[j]));
            for k in j + 1..4 {
                consider(circumball3(quad[i], quad[j], quad[k]));
            }
        }
    }
    best.unwrap_or_else(|| {
        // numerically ugly input: grow from the centroid
        let center = (a + b + c + d) * 0.25;
        let radius_sq = quad.iter().map(|p| (*p - center).norm_sq()).fold(0.0, f64::max);
        Ball { center, radius_sq }
    })
}
