//! Event functions, regions bounded by them, exit classification and
//! surface-of-section crossings.

use serde::{Deserialize, Serialize};

use super::{integrate_until_event, Direction, Event, EventOptions, IntegratorConfig, OdeSystem, Outcome};
use crate::error::{Error, Result};
use crate::state::{Frame, PhaseState};

/// Tolerance under which a starting point counts as on the boundary.
pub const START_TOL: f64 = 1e-10;

/// Which side of a cylinder is the region's interior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Interior is `r >= radius`.
    Outside,
    /// Interior is `r <= radius`.
    Inside,
}

/// Geometric event function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// `(x - base) . normal` over the leading `base.len()` state components;
    /// the interior is where this is non-negative.
    HalfSpacePlane { base: Vec<f64>, normal: Vec<f64> },
    /// Vertical cylinder about the axis through `(center[0], center[1])`.
    CylinderRadial { center: [f64; 2], radius: f64, side: Side },
    /// `x[coord] - value`.
    SectionPlane { coord: usize, value: f64, direction: Direction },
}

/// Boundary label of a region face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    Left,
    Right,
    Up,
    Down,
    Index(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    pub face: Face,
}

impl EventSpec {
    pub fn plane(base: Vec<f64>, normal: Vec<f64>, face: Face) -> Result<Self> {
        if base.len() != normal.len() || base.is_empty() {
            return Err(Error::InvalidInput("plane base and normal must have equal, nonzero length".into()));
        }
        let n: f64 = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(n.is_finite() && (n - 1.0).abs() <= 1e-14) {
            return Err(Error::InvalidInput(format!("plane normal has length {n}, expected 1")));
        }
        Ok(Self { kind: EventKind::HalfSpacePlane { base, normal }, face })
    }

    pub fn cylinder(center: [f64; 2], radius: f64, side: Side, face: Face) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("cylinder radius {radius} must be positive")));
        }
        Ok(Self { kind: EventKind::CylinderRadial { center, radius, side }, face })
    }

    /// Raw event value.
    pub fn value(&self, x: &[f64]) -> f64 {
        event_value(&self.kind, x)
    }

    /// Signed distance-like margin, non-negative inside the region.
    pub fn margin(&self, x: &[f64]) -> f64 {
        match &self.kind {
            EventKind::CylinderRadial { side: Side::Inside, .. } => -self.value(x),
            _ => self.value(x),
        }
    }
}

/// Value of an event function at state `x`.
pub fn event_value(kind: &EventKind, x: &[f64]) -> f64 {
    match kind {
        EventKind::HalfSpacePlane { base, normal } => {
            base.iter().zip(normal).zip(x).map(|((b, u), xi)| (xi - b) * u).sum()
        }
        EventKind::CylinderRadial { center, radius, .. } => (x[0] - center[0]).hypot(x[1] - center[1]) - radius,
        EventKind::SectionPlane { coord, value, .. } => x[*coord] - value,
    }
}

/// Intersection of the interiors of several event functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub events: Vec<EventSpec>,
}

impl RegionSpec {
    pub fn new(events: Vec<EventSpec>) -> Result<Self> {
        if events.is_empty() {
            return Err(Error::InvalidInput("region needs at least one face".into()));
        }
        if events.iter().any(|e| matches!(e.kind, EventKind::SectionPlane { .. })) {
            return Err(Error::InvalidInput("section planes cannot bound a region".into()));
        }
        Ok(Self { events })
    }

    /// Smallest face margin and the face attaining it.
    pub fn min_margin(&self, x: &[f64]) -> (f64, Face) {
        self.events
            .iter()
            .map(|e| (e.margin(x), e.face))
            .fold((f64::INFINITY, Face::Index(0)), |acc, m| if m.0 < acc.0 { m } else { acc })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.min_margin(x).0 >= -START_TOL
    }
}

/// Exit verdict of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Left,
    Right,
    Remains,
    OtherFace,
}

impl Classification {
    pub fn from_face(face: Face) -> Self {
        match face {
            Face::Left => Classification::Left,
            Face::Right => Classification::Right,
            _ => Classification::OtherFace,
        }
    }
}

/// Outcome of [`propagate_until_exit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub classification: Classification,
    /// Face crossed, `None` for [`Classification::Remains`].
    pub face: Option<Face>,
    /// Independent variable at the exit, or at the end of the budget.
    pub exit_s: f64,
    pub exit_state: Vec<f64>,
}

impl ExitRecord {
    /// Elapsed independent variable from `s0` to the exit.
    pub fn dwell(&self, s0: f64) -> f64 {
        (self.exit_s - s0).abs()
    }

    pub fn exit_phase_state(&self, frame: Frame) -> Result<PhaseState> {
        let y: [f64; 6] = self
            .exit_state
            .as_slice()
            .try_into()
            .map_err(|_| Error::InvalidInput(format!("exit state has {} components", self.exit_state.len())))?;
        Ok(PhaseState::from_array(self.exit_s, &y, frame))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeDirection {
    Forward,
    Backward,
}

impl TimeDirection {
    pub fn sign(self) -> f64 {
        match self {
            TimeDirection::Forward => 1.0,
            TimeDirection::Backward => -1.0,
        }
    }
}

/// Integrates until the trajectory leaves `region` or the budget is spent.
///
/// A start on the boundary (margin within `[-1e-10, 0]`) counts as interior,
/// so a tangent trajectory that bends outward exits at `s0` through that face,
/// while one that bends inward continues.
#[allow(clippy::too_many_arguments)]
pub fn propagate_until_exit<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    s0: f64,
    y0: [f64; N],
    region: &RegionSpec,
    budget: f64,
    direction: TimeDirection,
    cfg: IntegratorConfig,
) -> Result<ExitRecord> {
    let (margin, face) = region.min_margin(&y0);
    if margin < -START_TOL {
        return Err(Error::StartOutside { face: format!("{face:?}"), margin });
    }
    if !(budget > 0.0) {
        return Err(Error::InvalidInput(format!("exit budget {budget} must be positive")));
    }
    let closures: Vec<_> = region.events.iter().map(|e| move |_s: f64, y: &[f64; N]| e.margin(y)).collect();
    let events: Vec<Event<'_, N>> = closures
        .iter()
        .map(|g| Event { g, direction: Direction::Falling, start_tol: START_TOL, skip_start: false })
        .collect();
    let s_end = s0 + direction.sign() * budget;
    let (out, _) = integrate_until_event(sys, s0, y0, s_end, cfg, &events, EventOptions::default())?;
    Ok(match out {
        Outcome::Event(hit) => {
            let face = region.events[hit.index].face;
            ExitRecord {
                classification: Classification::from_face(face),
                face: Some(face),
                exit_s: hit.s,
                exit_state: hit.y.to_vec(),
            }
        }
        Outcome::Reached { s, y } => {
            ExitRecord { classification: Classification::Remains, face: None, exit_s: s, exit_state: y.to_vec() }
        }
    })
}

/// A located section crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing<const N: usize> {
    pub s: f64,
    pub y: [f64; N],
    /// Sign of the section coordinate's rate at the crossing.
    pub sign: f64,
}

/// Next transversal crossing of `x[coord] = value`, excluding the start.
#[allow(clippy::too_many_arguments)]
pub fn next_section_crossing<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    s0: f64,
    y0: [f64; N],
    section: &EventKind,
    budget: f64,
    time: TimeDirection,
    cfg: IntegratorConfig,
) -> Result<Crossing<N>> {
    let EventKind::SectionPlane { coord, direction, .. } = section else {
        return Err(Error::InvalidInput("next_section_crossing needs a section plane".into()));
    };
    if *coord >= N {
        return Err(Error::InvalidInput(format!("section coordinate {coord} out of range")));
    }
    let g = |_s: f64, y: &[f64; N]| event_value(section, y);
    let events = [Event { g: &g, direction: *direction, start_tol: 0.0, skip_start: true }];
    let (out, _) =
        integrate_until_event(sys, s0, y0, s0 + time.sign() * budget, cfg, &events, EventOptions::default())?;
    match out {
        Outcome::Event(hit) => {
            let mut dy = [0.0; N];
            sys.rhs(hit.s, &hit.y, &mut dy)?;
            Ok(Crossing { s: hit.s, y: hit.y, sign: (dy[*coord] * time.sign()).signum() })
        }
        Outcome::Reached { .. } => Err(Error::NoCrossing { budget }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> RegionSpec {
        RegionSpec::new(vec![
            EventSpec::plane(vec![1.0, 0.0], vec![-1.0, 0.0], Face::Right).unwrap(),
            EventSpec::plane(vec![-1.0, 0.0], vec![1.0, 0.0], Face::Left).unwrap(),
            EventSpec::plane(vec![0.0, 1.0], vec![0.0, -1.0], Face::Up).unwrap(),
            EventSpec::plane(vec![0.0, -1.0], vec![0.0, 1.0], Face::Down).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn plane_values() {
        let e = EventSpec::plane(vec![0.5, 0.5], vec![0.6, 0.8], Face::Index(0)).unwrap();
        assert_eq!(e.value(&[0.5, 0.5]), 0.0);
        assert!((e.value(&[1.1, 1.3]) - 1.0).abs() < 1e-15);
        // right face of the square: 1 - x1
        assert_eq!(unit_square().events[0].value(&[0.25, 0.0]), 0.75);
        assert!(EventSpec::plane(vec![0.0], vec![2.0], Face::Up).is_err());
    }

    #[test]
    fn cylinder_and_section_values() {
        let c = EventSpec::cylinder([1.0, 0.0], 0.5, Side::Inside, Face::Right).unwrap();
        assert!((c.value(&[1.0, 0.8, 3.0]) - 0.3).abs() < 1e-15);
        assert!((c.margin(&[1.0, 0.8, 3.0]) + 0.3).abs() < 1e-15);
        assert!(EventSpec::cylinder([0.0, 0.0], 0.0, Side::Outside, Face::Left).is_err());
        let s = EventKind::SectionPlane { coord: 1, value: 0.25, direction: Direction::Either };
        assert_eq!(event_value(&s, &[0.0, 1.0]), 0.75);
    }

    #[test]
    fn zero_field_remains() {
        let zero = |_s: f64, _y: &[f64; 2], dy: &mut [f64; 2]| -> Result<()> {
            *dy = [0.0; 2];
            Ok(())
        };
        let rec = propagate_until_exit(
            &zero,
            0.0,
            [0.1, 0.2],
            &unit_square(),
            5.0,
            TimeDirection::Forward,
            IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(rec.classification, Classification::Remains);
        assert_eq!(rec.exit_s, 5.0);
        assert_eq!(rec.exit_state, vec![0.1, 0.2]);
    }

    #[test]
    fn saddle_exits_and_backward_direction() {
        let saddle = |_s: f64, y: &[f64; 2], dy: &mut [f64; 2]| -> Result<()> {
            *dy = [y[0], -y[1]];
            Ok(())
        };
        let cfg = IntegratorConfig::default();
        let rec = propagate_until_exit(&saddle, 0.0, [0.5, 0.5], &unit_square(), 10.0, TimeDirection::Forward, cfg)
            .unwrap();
        assert_eq!(rec.classification, Classification::Right);
        assert!((rec.exit_s - 2.0_f64.ln()).abs() < 1e-12);
        assert!(unit_square().events[0].value(&rec.exit_state).abs() < 1e-10);
        let rec = propagate_until_exit(&saddle, 0.0, [0.5, 0.5], &unit_square(), 10.0, TimeDirection::Backward, cfg)
            .unwrap();
        assert_eq!(rec.face, Some(Face::Up));
        assert!((rec.exit_s + 2.0_f64.ln()).abs() < 1e-12);
        assert!(matches!(
            propagate_until_exit(&saddle, 0.0, [1.5, 0.0], &unit_square(), 1.0, TimeDirection::Forward, cfg),
            Err(Error::StartOutside { .. })
        ));
    }

    #[test]
    fn section_crossing_of_a_circle() {
        let rot = |_s: f64, y: &[f64; 2], dy: &mut [f64; 2]| -> Result<()> {
            *dy = [-y[1], y[0]];
            Ok(())
        };
        let cfg = IntegratorConfig::default();
        let either = EventKind::SectionPlane { coord: 1, value: 0.0, direction: Direction::Either };
        let c = next_section_crossing(&rot, 0.0, [1.0, 0.0], &either, 10.0, TimeDirection::Forward, cfg).unwrap();
        assert!((c.s - std::f64::consts::PI).abs() < 1e-12);
        assert!(c.y[1].abs() < 1e-11);
        assert_eq!(c.sign, -1.0);
        let rising = EventKind::SectionPlane { coord: 1, value: 0.0, direction: Direction::Rising };
        let c = next_section_crossing(&rot, 0.0, [1.0, 0.0], &rising, 10.0, TimeDirection::Forward, cfg).unwrap();
        assert!((c.s - std::f64::consts::TAU).abs() < 1e-11);
        assert!(matches!(
            next_section_crossing(&rot, 0.0, [1.0, 0.0], &rising, 1.0, TimeDirection::Forward, cfg),
            Err(Error::NoCrossing { .. })
        ));
    }
}
