//! Shared fixtures for the criterion benches.

use pansharp_core::{generate_scene, DegradeConfig, Scene, SceneSpec};

/// A 4-band synthetic scene at `size x size` PAN pixels.
pub fn scene(size: usize, seed: u64) -> Scene {
    generate_scene(&SceneSpec::new(seed, size, size, 4), &DegradeConfig::default()).expect("valid scene")
}
