//! On-disk model formats and the deterministic fixture network.

mod container;
pub mod fixture;
mod manifest;

use std::path::Path;

pub use container::TensorContainer;
pub use fixture::{gen_fixture, FixtureFiles, FixtureLayout};
pub use manifest::{InputSpec, LayerSpec, NetworkManifest, TapSpec};

use crate::error::Result;
use crate::inference::NetworkModel;

/// Reads a manifest and its weight container and links them into a model.
/// All manifest invariants are checked before this returns.
pub fn load_model(manifest_path: impl AsRef<Path>, container_path: impl AsRef<Path>) -> Result<NetworkModel> {
    let manifest = NetworkManifest::read(manifest_path)?;
    let container = TensorContainer::read(container_path)?;
    NetworkModel::link(manifest, &container)
}
