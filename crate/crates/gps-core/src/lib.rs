//! Gait Parsing Sequence (GPS) data model: per-frame body-part label maps,
//! the bit-exact GPSQ container format, label-map transforms, pixel-level
//! entropy, dataset manifests, and dataset statistics.

mod codec;
mod frame;
mod manifest;
mod render;
mod stats;

pub use codec::{decode_gps, encode_gps, read_gpsq, write_gpsq, CodecError};
pub use frame::{
    entropy_bits, label_histogram, one_hot, scalar_encode, FrameError, GaitParsingSequence,
    LabelHistogram, ParsingFrame,
};
pub use manifest::{DatasetManifest, ManifestEntry, ManifestError, Split};
pub use render::{default_palette, render_ppm, Palette, RenderError};
pub use stats::{dataset_stats, DatasetStats, StatsError};

/// Number of label classes: 11 body parts plus background.
pub const NUM_CLASSES: usize = 12;
/// Number of body-part classes (background excluded).
pub const NUM_PARTS: usize = 11;

/// Fixed label code assignment.
pub mod labels {
    pub const BACKGROUND: u8 = 0;
    pub const HEAD: u8 = 1;
    pub const TORSO: u8 = 2;
    pub const LEFT_ARM: u8 = 3;
    pub const RIGHT_ARM: u8 = 4;
    pub const LEFT_HAND: u8 = 5;
    pub const RIGHT_HAND: u8 = 6;
    pub const LEFT_LEG: u8 = 7;
    pub const RIGHT_LEG: u8 = 8;
    pub const LEFT_FOOT: u8 = 9;
    pub const RIGHT_FOOT: u8 = 10;
    pub const DRESS: u8 = 11;

    pub const NAMES: [&str; 12] = [
        "background",
        "head",
        "torso",
        "left-arm",
        "right-arm",
        "left-hand",
        "right-hand",
        "left-leg",
        "right-leg",
        "left-foot",
        "right-foot",
        "dress",
    ];
}
