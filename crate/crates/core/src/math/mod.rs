//! Scalar/vector geometry kernels: ray-triangle intersection, bounding
//! spheres, spherical coordinates, and the conservative cone-sphere test.

mod mes;

pub use mes::minimal_enclosing_sphere;

use crate::Real;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

/// Linear RGB triple; shares all vector arithmetic.
pub type Rgb<S> = Vec3<S>;

impl<S: Real> Vec3<S> {
    pub fn new(x: S, y: S, z: S) -> Self {
        Vec3 { x, y, z }
    }

    pub fn zero() -> Self {
        Vec3::new(S::zero(), S::zero(), S::zero())
    }

    pub fn splat(v: S) -> Self {
        Vec3::new(v, v, v)
    }

    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(self) -> S {
        self.dot(self)
    }

    pub fn norm(self) -> S {
        self.norm_sq().sqrt()
    }

    /// Unit vector, or zero when the input is (numerically) zero.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > S::zero() {
            self / n
        } else {
            Vec3::zero()
        }
    }

    pub fn distance(self, o: Self) -> S {
        (self - o).norm()
    }

    /// Component-wise product (color modulation).
    pub fn mul_elem(self, o: Self) -> Self {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn min_elem(self, o: Self) -> Self {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max_elem(self, o: Self) -> Self {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    /// Mirror of an incident direction about a normal (both unit).
    pub fn reflect(self, n: Self) -> Self {
        self - n * (S::of(2.0) * self.dot(n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_f64(self) -> Vec3<f64> {
        Vec3::new(self.x.to_f64_lossy(), self.y.to_f64_lossy(), self.z.to_f64_lossy())
    }

    pub fn from_f64(v: Vec3<f64>) -> Self {
        Vec3::new(S::of(v.x), S::of(v.y), S::of(v.z))
    }
}

impl<S: Real> Add for Vec3<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<S: Real> AddAssign for Vec3<S> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<S: Real> Sub for Vec3<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<S: Real> Neg for Vec3<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl<S: Real> Mul<S> for Vec3<S> {
    type Output = Self;
    fn mul(self, s: S) -> Self {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<S: Real> Div<S> for Vec3<S> {
    type Output = Self;
    fn div(self, s: S) -> Self {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Row-major 4x4 affine transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat4<S> {
    pub m: [[S; 4]; 4],
}

impl<S: Real> Mat4<S> {
    pub fn identity() -> Self {
        let mut m = [[S::zero(); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = S::one();
        }
        Mat4 { m }
    }

    pub fn from_row_major(v: &[S; 16]) -> Self {
        let mut m = [[S::zero(); 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                m[r][c] = v[r * 4 + c];
            }
        }
        Mat4 { m }
    }

    pub fn transform_point(&self, p: Vec3<S>) -> Vec3<S> {
        let m = &self.m;
        Vec3::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + m[0][3],
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + m[1][3],
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + m[2][3],
        )
    }

    /// Largest singular value of the upper-left 3x3 block, computed via the
    /// closed-form eigenvalues of Aᵀ·A. Exactly 1 for rigid transforms.
    pub fn linear_max_singular_value(&self) -> S {
        let a: [[f64; 3]; 3] = {
            let mut a = [[0.0; 3]; 3];
            for r in 0..3 {
                for c in 0..3 {
                    a[r][c] = self.m[r][c].to_f64_lossy();
                }
            }
            a
        };
        // b = aᵀ a (symmetric, positive semi-definite)
        let mut b = [[0.0f64; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                b[r][c] = (0..3).map(|k| a[k][r] * a[k][c]).sum();
            }
        }
        let p1 = b[0][1] * b[0][1] + b[0][2] * b[0][2] + b[1][2] * b[1][2];
        let lambda_max = if p1 <= 1e-24 * (1.0 + b[0][0] + b[1][1] + b[2][2]).powi(2) {
            b[0][0].max(b[1][1]).max(b[2][2])
        } else {
            let q = (b[0][0] + b[1][1] + b[2][2]) / 3.0;
            let p2 = (b[0][0] - q).powi(2) + (b[1][1] - q).powi(2) + (b[2][2] - q).powi(2) + 2.0 * p1;
            let p = (p2 / 6.0).sqrt();
            // det((b - q I) / p)
            let mut c = [[0.0f64; 3]; 3];
            for r in 0..3 {
                for s in 0..3 {
                    c[r][s] = (b[r][s] - if r == s { q } else { 0.0 }) / p;
                }
            }
            let det = c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1])
                - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0])
                + c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0]);
            let r = (det / 2.0).clamp(-1.0, 1.0);
            let phi = r.acos() / 3.0;
            q + 2.0 * p * phi.cos()
        };
        S::of(lambda_max.max(0.0).sqrt())
    }
}

/// Axis-aligned box; used only to quantize ray origins.
#[derive(Clone, Copy, Debug)]
pub struct Aabb<S> {
    pub min: Vec3<S>,
    pub max: Vec3<S>,
}

impl<S: Real> Aabb<S> {
    pub fn empty() -> Self {
        Aabb { min: Vec3::splat(S::infinity()), max: Vec3::splat(S::neg_infinity()) }
    }

    pub fn grow(&mut self, p: Vec3<S>) {
        self.min = self.min.min_elem(p);
        self.max = self.max.max_elem(p);
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sphere<S> {
    pub center: Vec3<S>,
    pub radius: S,
}

impl<S: Real> Sphere<S> {
    pub fn new(center: Vec3<S>, radius: S) -> Self {
        Sphere { center, radius }
    }

    pub fn point(center: Vec3<S>) -> Self {
        Sphere { center, radius: S::zero() }
    }

    pub fn contains(&self, p: Vec3<S>, tol: S) -> bool {
        p.distance(self.center) <= self.radius + tol
    }
}

/// Direction bound: unit axis plus spread half-angle in [0, π].
/// A half-angle of π is the degenerate "all directions" cone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cone<S> {
    pub axis: Vec3<S>,
    pub half_angle: S,
}

impl<S: Real> Cone<S> {
    pub fn new(axis: Vec3<S>, half_angle: S) -> Self {
        Cone { axis, half_angle }
    }

    pub fn full() -> Self {
        Cone { axis: Vec3::new(S::zero(), S::zero(), S::one()), half_angle: S::PI() }
    }

    /// Containment of a unit direction, with slack on the cosine.
    pub fn contains_dir(&self, d: Vec3<S>, cos_tol: S) -> bool {
        self.axis.dot(d) >= self.half_angle.cos() - cos_tol
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Triangle<S> {
    pub v0: Vec3<S>,
    pub v1: Vec3<S>,
    pub v2: Vec3<S>,
    pub mesh_id: u32,
    pub local_id: u32,
}

impl<S: Real> Triangle<S> {
    pub fn new(v0: Vec3<S>, v1: Vec3<S>, v2: Vec3<S>) -> Self {
        Triangle { v0, v1, v2, mesh_id: 0, local_id: 0 }
    }

    /// Unit normal from the winding order; zero for degenerate triangles.
    pub fn geometric_normal(&self) -> Vec3<S> {
        (self.v1 - self.v0).cross(self.v2 - self.v0).normalized()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RayKind {
    Shadow,
    Reflection,
    Refraction,
}

/// Secondary ray with its provenance. Shadow rays originate at the light
/// and point toward the fragment, so rays of one light share an origin.
#[derive(Clone, Copy, Debug)]
pub struct Ray<S> {
    pub origin: Vec3<S>,
    pub dir: Vec3<S>,
    pub kind: RayKind,
    /// Screen pixel the ray's contribution belongs to.
    pub pixel: u32,
    /// Shading-point slot the ray was generated from.
    pub source: u32,
    /// Light index; meaningful for shadow rays only.
    pub light: u32,
    /// Shadow rays: distance light→fragment. Otherwise +infinity.
    pub max_t: S,
    /// Product of reflect/refract weights along the path so far.
    pub throughput: Rgb<S>,
}

impl<S: Real> Ray<S> {
    /// Filler for empty generation slots; consumers never read it.
    pub fn placeholder() -> Self {
        Ray {
            origin: Vec3::zero(),
            dir: Vec3::new(S::zero(), S::zero(), S::one()),
            kind: RayKind::Shadow,
            pixel: 0,
            source: 0,
            light: 0,
            max_t: S::infinity(),
            throughput: Vec3::zero(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit<S> {
    pub t: S,
    pub u: S,
    pub v: S,
}

/// Self-intersection guard: hits closer than this are ignored.
pub fn t_min<S: Real>() -> S {
    S::of(1e-4)
}

/// Möller-Trumbore, two-sided. Returns the parametric distance and
/// barycentrics iff the ray meets the triangle in (t_min, max_t).
/// Degenerate triangles always miss.
pub fn ray_triangle_intersect<S: Real>(
    origin: Vec3<S>,
    dir: Vec3<S>,
    max_t: S,
    tri: &Triangle<S>,
) -> Option<RayHit<S>> {
    let e1 = tri.v1 - tri.v0;
    let e2 = tri.v2 - tri.v0;
    let pvec = dir.cross(e2);
    let det = e1.dot(pvec);
    if det.abs() < S::of(1e-12) {
        return None;
    }
    let inv_det = S::one() / det;
    let tvec = origin - tri.v0;
    let u = tvec.dot(pvec) * inv_det;
    if u < S::zero() || u > S::one() {
        return None;
    }
    let qvec = tvec.cross(e1);
    let v = dir.dot(qvec) * inv_det;
    if v < S::zero() || u + v > S::one() {
        return None;
    }
    let t = e2.dot(qvec) * inv_det;
    if t <= t_min::<S>() || t >= max_t {
        return None;
    }
    Some(RayHit { t, u, v })
}

/// Minimal enclosing sphere of the three vertices (not the circumsphere:
/// obtuse triangles take the longest-edge diameter sphere), grown by
/// `enlarge`.
pub fn triangle_bounding_sphere<S: Real>(tri: &Triangle<S>, enlarge: S) -> Sphere<S> {
    let (a, b, c) = (tri.v0, tri.v1, tri.v2);
    let half = S::of(0.5);
    // Diameter sphere of the longest edge covers the third point for
    // obtuse/right/degenerate triangles.
    let edges = [(a, b, c), (a, c, b), (b, c, a)];
    let mut best: Option<Sphere<S>> = None;
    for (p, q, other) in edges {
        let center = (p + q) * half;
        let radius = p.distance(q) * half;
        if other.distance(center) <= radius * (S::one() + S::of(1e-12)) + S::of(1e-30) {
            match best {
                Some(s) if s.radius <= radius => {}
                _ => best = Some(Sphere::new(center, radius)),
            }
        }
    }
    let sphere = best.unwrap_or_else(|| {
        // Acute triangle: circumcenter lies inside, solve in the plane.
        let ab = b - a;
        let ac = c - a;
        let n = ab.cross(ac);
        let n_sq = n.norm_sq();
        if n_sq <= S::zero() {
            // fully degenerate fallback: centroid bound
            let center = (a + b + c) / S::of(3.0);
            let radius = center.distance(a).max(center.distance(b)).max(center.distance(c));
            return Sphere::new(center, radius + enlarge);
        }
        let two = S::of(2.0);
        let rel = (n.cross(ab) * ac.norm_sq() + ac.cross(n) * ab.norm_sq()) / (two * n_sq);
        let center = a + rel;
        let radius = center.distance(a).max(center.distance(b)).max(center.distance(c));
        Sphere::new(center, radius)
    });
    Sphere::new(sphere.center, sphere.radius + enlarge)
}

/// Conservative test: can any ray starting inside `node_sphere` with
/// direction inside `node_cone` reach `target`? The target radius is
/// enlarged by the node sphere radius, the apex sits at the node sphere
/// center, and the target center is compared against the cone cross
/// section at its axial projection. Half-angles ≥ π/2 accept everything.
pub fn cone_sphere_test<S: Real>(node_sphere: &Sphere<S>, node_cone: &Cone<S>, target: &Sphere<S>) -> bool {
    let alpha = node_cone.half_angle;
    if alpha >= S::FRAC_PI_2() {
        return true;
    }
    let expanded = target.radius + node_sphere.radius;
    let to_center = target.center - node_sphere.center;
    let t = to_center.dot(node_cone.axis);
    if t < -expanded {
        return false;
    }
    let axis_dist = (to_center - node_cone.axis * t).norm();
    let limit = t.max(S::zero()) * alpha.tan() + expanded / alpha.cos();
    axis_dist <= limit
}

/// Literal form of the published cone-sphere inequality, which compares the
/// cross-section radius against the full apex→center distance instead of the
/// axis distance. Rejects on-axis targets; kept for comparison runs only.
pub fn cone_sphere_test_literal<S: Real>(
    node_sphere: &Sphere<S>,
    node_cone: &Cone<S>,
    target: &Sphere<S>,
) -> bool {
    let alpha = node_cone.half_angle;
    if alpha >= S::FRAC_PI_2() {
        return true;
    }
    let expanded = target.radius + node_sphere.radius;
    let to_center = target.center - node_sphere.center;
    let t = to_center.dot(node_cone.axis);
    let limit = t.max(S::zero()) * alpha.tan() + expanded / alpha.cos();
    to_center.norm() <= limit
}

/// (θ, φ) with θ ∈ [0, π] from +z and φ ∈ [−π, π] from +x toward +y.
/// Poles map to φ = 0.
pub fn spherical_from_direction<S: Real>(dir: Vec3<S>) -> (S, S) {
    let theta = dir.z.max(-S::one()).min(S::one()).acos();
    let phi = if dir.x == S::zero() && dir.y == S::zero() {
        S::zero()
    } else {
        dir.y.atan2(dir.x)
    };
    (theta, phi)
}

pub fn direction_from_spherical<S: Real>(theta: S, phi: S) -> Vec3<S> {
    let st = theta.sin();
    Vec3::new(st * phi.cos(), st * phi.sin(), theta.cos())
}

/// Snell refraction of unit incident `incident` (pointing into the surface)
/// about unit `normal` with `normal`·`incident` < 0. `eta` is n_from/n_to.
/// None on total internal reflection.
pub fn refract<S: Real>(incident: Vec3<S>, normal: Vec3<S>, eta: S) -> Option<Vec3<S>> {
    let cos_i = -normal.dot(incident);
    let sin2_t = eta * eta * (S::one() - cos_i * cos_i);
    if sin2_t > S::one() {
        return None;
    }
    let cos_t = (S::one() - sin2_t).sqrt();
    Some((incident * eta + normal * (eta * cos_i - cos_t)).normalized())
}
