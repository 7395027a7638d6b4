//! Capture scoring and the closing mechanisms.

pub mod closing;
pub mod hull;
pub mod metrics;

pub use closing::{
    closing_positions, docking_params, engage_docking_joints, engage_winch, perimeter_order,
    winch_closing,
};
pub use hull::{convex_hull, convex_hull_metrics, ConvexHull, HullMetrics};
pub use metrics::{
    closing_trigger, cqi, cqi_from_terms, cqi_of_state, evaluate_capture, locked_pairs,
    mouth_area, mouth_area_of_state, winch_locked_pairs, CaptureLog, CaptureMetrics, CqiSample,
    FailureReason, TargetGeometry, TriggerLatch,
};
