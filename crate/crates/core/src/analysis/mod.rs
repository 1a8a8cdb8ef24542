//! Image-based measurement pipeline: angle recognition, fidelities and
//! cross-talk, vortex cores, and tip-tilt.

pub mod crosstalk;
pub mod fidelity;
pub mod image;
pub mod petals;
pub mod tiptilt;
pub mod tracking;
pub mod vortex;

pub use crosstalk::{crosstalk, crosstalk_averaged, CrosstalkMatrix};
pub use fidelity::{fidelity_series, FidelitySeries, FrameFidelity, SeriesStats};
pub use petals::{
    angle_deviation, orientation, segment_petals, segment_petals_with, OrientationResult, PetalSet,
    SegmentError, SegmentOptions,
};
pub use tiptilt::{frame_centroid, tip_tilt, tilt_angle, TipTilt};
pub use tracking::{track_cores, TrackSet, Trajectory};
pub use vortex::{find_vortices_field, find_vortices_frame, find_vortices_frame_with, total_charge, VortexCore};
