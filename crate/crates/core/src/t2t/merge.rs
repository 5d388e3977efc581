use nalgebra::Vector4;

use super::{Cov4, TrackState, Vec2};
use crate::error::{Error, Result};
use crate::fusion::{fuse_weighted, AngularEstimate};

fn information(cov: &Cov4) -> Result<Cov4> {
    cov.cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::DegenerateCovariance("track covariance not invertible"))
}

/// Merges associated tracks of independent sensors.
///
/// Position/velocity use the information-weighted average
/// `P_f = (Σ P_i⁻¹)⁻¹`, `x_f = P_f Σ P_i⁻¹ x_i`; the heading uses the
/// weighted circular mean with its matching dispersion. A single state is
/// returned unchanged.
pub fn merge_states(states: &[TrackState]) -> Result<TrackState> {
    match states {
        [] => Err(Error::EmptySample),
        [one] => Ok(*one),
        _ => {
            let mut info = Cov4::zeros();
            let mut info_x = Vector4::zeros();
            for s in states {
                let y = information(&s.cov)?;
                info_x += y * s.kinematic_vector();
                info += y;
            }
            let cov = information(&info)?;
            let cov = 0.5 * (cov + cov.transpose());
            let x = cov * info_x;
            let headings: Vec<AngularEstimate> = states
                .iter()
                .map(|s| AngularEstimate {
                    angle: s.heading,
                    dispersion: s.heading_dispersion,
                })
                .collect();
            let h = fuse_weighted(&headings)?;
            Ok(TrackState {
                pos: Vec2::new(x[0], x[1]),
                vel: Vec2::new(x[2], x[3]),
                heading: h.angle,
                cov,
                heading_dispersion: h.dispersion,
            })
        }
    }
}

/// Two-track form of [`merge_states`].
pub fn merge_tracks(a: &TrackState, b: &TrackState) -> Result<TrackState> {
    merge_states(&[*a, *b])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circstats::Angle;
    use crate::fusion::DispersionValue;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn state(pos: (f64, f64), heading_deg: f64, cov: Cov4, var: f64) -> TrackState {
        TrackState::new(
            Vec2::new(pos.0, pos.1),
            Vec2::new(1.0, -1.0),
            Angle::from_degrees(heading_deg).unwrap(),
            cov,
            DispersionValue::WnVariance(var),
        )
        .unwrap()
    }

    #[test]
    fn equal_covariances_average() {
        let cov = Cov4::identity() * 0.4;
        let m = merge_tracks(&state((0.0, 2.0), 350.0, cov, 0.2), &state((2.0, 4.0), 10.0, cov, 0.2)).unwrap();
        assert_abs_diff_eq!(m.pos, Vec2::new(1.0, 3.0), epsilon = 1e-12);
        assert_abs_diff_eq!(m.cov, cov * 0.5, epsilon = 1e-12);
        assert!(m.heading.radians().abs() < 1e-12);
        assert_abs_diff_eq!(m.heading_dispersion.value(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn single_state_is_identity() {
        let s = state((3.0, 1.0), 45.0, Cov4::identity(), 0.3);
        assert_eq!(merge_states(&[s]).unwrap(), s);
        assert_eq!(merge_states(&[]), Err(Error::EmptySample));
    }

    #[test]
    fn singular_covariance_is_rejected() {
        let s = state((3.0, 1.0), 45.0, Cov4::zeros(), 0.3);
        assert!(matches!(merge_tracks(&s, &s), Err(Error::DegenerateCovariance(_))));
    }

    #[test]
    fn mixed_dispersions_are_rejected() {
        let a = state((0.0, 0.0), 0.0, Cov4::identity(), 0.3);
        let b = TrackState {
            heading_dispersion: DispersionValue::VmKappa(3.0),
            ..a
        };
        assert!(matches!(merge_tracks(&a, &b), Err(Error::MixedDispersion(..))));
    }

    fn spd() -> impl Strategy<Value = Cov4> {
        prop::array::uniform16(-1.0..1.0f64).prop_map(|a| {
            let l = Cov4::from_row_slice(&a);
            l * l.transpose() + Cov4::identity() * 0.05
        })
    }

    fn arb_state() -> impl Strategy<Value = TrackState> {
        (-50.0..50.0f64, -50.0..50.0f64, -180.0..180.0f64, spd(), 0.01..2.0f64)
            .prop_map(|(x, y, h, cov, v)| state((x, y), h, cov, v))
    }

    proptest! {
        #[test]
        fn merge_is_symmetric(a in arb_state(), b in arb_state()) {
            prop_assert_eq!(merge_tracks(&a, &b).unwrap(), merge_tracks(&b, &a).unwrap());
        }

        #[test]
        fn fused_covariance_is_dominated(a in arb_state(), b in arb_state()) {
            let m = merge_tracks(&a, &b).unwrap();
            for input in [&a, &b] {
                let diff = input.cov - m.cov;
                let scale = input.cov.amax();
                prop_assert!(diff.symmetric_eigenvalues().min() >= -1e-9 * scale);
            }
            prop_assert!(m.heading_dispersion.value() < a.heading_dispersion.value().min(b.heading_dispersion.value()));
        }
    }
}
