//! CPU Whitted ray tracer whose secondary rays are organized into a coherent
//! ray-space hierarchy: rays are hashed, compressed into chunks, radix sorted,
//! decompressed, bounded by a sphere-cone tree, and traversed conservatively
//! against triangle bounding spheres. Brute-force and unsorted-hierarchy
//! baselines share every other stage so that intersection-count differences
//! are attributable to sorting and mesh culling alone.

pub mod error;
pub mod fixtures;
pub mod gbuffer;
pub mod math;
pub mod pipeline;
pub mod ppm;
pub mod prims;
pub mod rsh;
pub mod scene;
pub mod stats;
pub mod tracer;

pub use error::{Error, Result};

use num_traits::{Float, FloatConst, FromPrimitive};
use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, SubAssign};

/// Scalar type for all geometry kernels: f32 or f64.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Debug
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an f64 literal; panics only on non-finite input.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Vec3f = math::Vec3<f32>;
pub type Vec3d = math::Vec3<f64>;
pub type Spheref = math::Sphere<f32>;
pub type Sphered = math::Sphere<f64>;
pub type SceneF = scene::SceneDesc<f32>;
pub type SceneD = scene::SceneDesc<f64>;
