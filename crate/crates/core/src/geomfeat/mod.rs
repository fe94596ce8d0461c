//! Depth-to-RGB registration, label-aware hole filling, HVA channels, Sobel
//! gradients and strand direction classes.

mod camera;
mod direction;
mod fill;
mod hva;
mod register;
mod sobel;

pub use camera::{CameraModel, Intrinsics, IDENTITY, SYNTHETIC_BASELINE, SYNTHETIC_FOCAL};
pub use direction::{direction_map, quantize_direction, DirectionClass, NO_DIRECTION};
pub use fill::fill_holes;
pub use hva::{build_hva, horizontal_disparity, normal_gravity_angle, HvaChannels};
pub use register::register_depth_to_rgb;
pub use sobel::{grayscale, sobel_gradients, sobel_gray, GradientPair, RgbImage, LUMA_WEIGHTS};
