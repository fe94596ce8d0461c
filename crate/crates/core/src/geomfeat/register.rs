use crate::error::{Error, Result};
use crate::frame::DepthFrame;
use crate::geomfeat::CameraModel;

/// Forward-projects every valid depth pixel into the RGB image grid.
///
/// Points are back-projected with the depth intrinsics, moved by (R, t) and
/// projected with the RGB intrinsics onto the nearest target pixel. When
/// several points land on one pixel the closest wins; ties keep the first in
/// scan order. Target pixels that receive nothing are holes.
pub fn register_depth_to_rgb(
    depth: &DepthFrame,
    cam: &CameraModel,
    target_size: (usize, usize),
) -> Result<DepthFrame> {
    cam.validate()?;
    let (tw, th) = target_size;
    if tw == 0 || th == 0 {
        return Err(Error::invalid("registration target must be non-empty"));
    }
    let mut out = DepthFrame::empty(tw, th);
    for y in 0..depth.height() {
        for x in 0..depth.width() {
            let Some(z) = depth.at(x, y) else { continue };
            if z <= 0.0 {
                continue;
            }
            let p = cam.depth_to_rgb(cam.depth.back_project(x as f64, y as f64, z));
            if !(p[2] > 0.0) {
                continue;
            }
            let (u, v) = cam.rgb.project(p);
            let (u, v) = (u.round(), v.round());
            if u < 0.0 || v < 0.0 || u >= tw as f64 || v >= th as f64 {
                continue;
            }
            let (u, v) = (u as usize, v as usize);
            match out.at(u, v) {
                Some(existing) if existing <= p[2] => {}
                _ => out.set(u, v, Some(p[2])),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomfeat::Intrinsics;
    use crate::grid::Grid;

    fn ramp(w: usize, h: usize) -> DepthFrame {
        let mut f = DepthFrame::from_depth(Grid::from_fn(w, h, |x, y| {
            1.0 + 0.01 * x as f64 + 0.02 * y as f64
        }));
        f.set(3, 2, None);
        f
    }

    #[test]
    fn identity_model_preserves_depth() {
        let depth = ramp(20, 15);
        let cam = CameraModel::synthetic((20, 15), (20, 15));
        let out = register_depth_to_rgb(&depth, &cam, (20, 15)).unwrap();
        assert_eq!(out, depth);
        // idempotent on valid pixels
        let again = register_depth_to_rgb(&out, &cam, (20, 15)).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn z_translation_shifts_plane() {
        let depth = DepthFrame::from_depth(Grid::filled(32, 24, 1.0));
        let mut cam = CameraModel::synthetic((32, 24), (32, 24));
        cam.translation = [0.0, 0.0, 0.5];
        let out = register_depth_to_rgb(&depth, &cam, (32, 24)).unwrap();
        assert!(out.valid_count() > 0);
        for y in 0..24 {
            for x in 0..32 {
                if let Some(z) = out.at(x, y) {
                    assert!((z - 1.5).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn upsampling_leaves_holes() {
        let depth = DepthFrame::from_depth(Grid::filled(64, 48, 1.2));
        let mut cam = CameraModel::synthetic((64, 48), (102, 204));
        cam.rgb = Intrinsics::centered(1600.0, 102, 204);
        let out = register_depth_to_rgb(&depth, &cam, (102, 204)).unwrap();
        assert!(out.valid_count() <= 64 * 48);
        assert!(out.valid_count() < 102 * 204);
        assert!(out.valid_count() > 0);
    }

    #[test]
    fn z_buffer_keeps_nearest() {
        // two depth pixels mapped onto the same target by a squashed rgb focal
        let depth = DepthFrame::from_depth(Grid::from_vec(2, 1, vec![2.0, 1.0]).unwrap());
        let mut cam = CameraModel::synthetic((2, 1), (1, 1));
        cam.rgb.fx = 1e-6;
        let out = register_depth_to_rgb(&depth, &cam, (1, 1)).unwrap();
        assert_eq!(out.at(0, 0), Some(1.0));
    }

    #[test]
    fn degenerate_intrinsics_rejected() {
        let depth = ramp(4, 4);
        let mut cam = CameraModel::synthetic((4, 4), (4, 4));
        cam.rgb.fy = -1.0;
        assert!(matches!(
            register_depth_to_rgb(&depth, &cam, (4, 4)),
            Err(Error::InvalidArgument(_))
        ));
    }
}
