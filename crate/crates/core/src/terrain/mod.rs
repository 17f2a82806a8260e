//! Procedural terrains and the heightfield they are stored in.

mod generate;
mod heightfield;

pub use generate::{
    generate_terrain, generate_terrain_with, stones_params, AtomicKind, Ramp, StoneParams,
    TerrainConfig, TerrainKind, TerrainSpec, GENERATION_RESOLUTION, MAX_LEVEL, STONES_EASIEST,
    STONES_HARDEST,
};
pub use heightfield::{CellKind, Height, Heightfield};
