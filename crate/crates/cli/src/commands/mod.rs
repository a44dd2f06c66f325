pub mod benchmark;
pub mod evaluate;
pub mod scene_export;
pub mod synthesize;
pub mod train;
pub mod video;
