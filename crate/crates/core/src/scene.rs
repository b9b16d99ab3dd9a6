//! Scene description: slider geometry, table, obstacle, goal and start state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SceneViolation};
use crate::geometry::{self, PENETRATION_TOLERANCE};
use crate::scalar::Scalar;
use crate::state::State;
use crate::vec2::Vec2;

/// Convex slider footprint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Scalar")]
pub enum SliderShape<T> {
    Box { half_extents: Vec2<T> },
    Disc { radius: T },
}

impl<T: Scalar> SliderShape<T> {
    /// Uniform-density moment of inertia about the centroid, kg mm^2.
    pub fn inertia(&self, mass: T) -> T {
        match *self {
            SliderShape::Box { half_extents } => {
                let w = half_extents.x + half_extents.x;
                let h = half_extents.y + half_extents.y;
                mass * (w * w + h * h) / T::lit(12.0)
            }
            SliderShape::Disc { radius } => mass * radius * radius / T::lit(2.0),
        }
    }

    /// Mean half-extent; the disc radius for discs.
    pub fn characteristic_length(&self) -> T {
        match *self {
            SliderShape::Box { half_extents } => (half_extents.x + half_extents.y) / T::lit(2.0),
            SliderShape::Disc { radius } => radius,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        match *self {
            SliderShape::Box { half_extents } => {
                !(half_extents.x > T::zero() && half_extents.y > T::zero())
                    || !half_extents.is_finite()
            }
            SliderShape::Disc { radius } => !(radius > T::zero()) || !radius.is_finite(),
        }
    }
}

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Rect<T> {
    pub min: Vec2<T>,
    pub max: Vec2<T>,
}

impl<T: Scalar> Rect<T> {
    pub fn new(min: Vec2<T>, max: Vec2<T>) -> Self {
        Rect { min, max }
    }

    pub fn contains(&self, p: Vec2<T>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn center(&self) -> Vec2<T> {
        (self.min + self.max) * T::lit(0.5)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Circle<T> {
    pub center: Vec2<T>,
    pub radius: T,
}

impl<T: Scalar> Circle<T> {
    pub fn new(center: Vec2<T>, radius: T) -> Self {
        Circle { center, radius }
    }

    pub fn contains(&self, p: Vec2<T>) -> bool {
        (p - self.center).norm() <= self.radius
    }
}

fn default_max_push_speed<T: Scalar>() -> T {
    T::lit(100.0)
}

fn default_support_mu<T: Scalar>() -> T {
    T::lit(0.35)
}

fn default_contact_mu<T: Scalar>() -> T {
    T::lit(0.3)
}

/// Everything about the physical task that is not a solver parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SceneSpec<T> {
    pub slider_shape: SliderShape<T>,
    /// kg
    pub slider_mass: T,
    /// kg mm^2; derived from the shape when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slider_inertia: Option<T>,
    /// mm
    pub pusher_radius: T,
    #[serde(default = "default_support_mu")]
    pub support_friction_mu: T,
    #[serde(default = "default_contact_mu")]
    pub contact_friction_mu: T,
    pub table_bounds: Rect<T>,
    pub obstacle: Circle<T>,
    pub goal: Circle<T>,
    pub start_state: State<T>,
    /// mm/s
    #[serde(default = "default_max_push_speed")]
    pub max_push_speed: T,
}

impl<T: Scalar> SceneSpec<T> {
    /// Moment of inertia, falling back to the uniform-density value.
    pub fn inertia(&self) -> T {
        self.slider_inertia
            .unwrap_or_else(|| self.slider_shape.inertia(self.slider_mass))
    }
}

/// Checks every scene invariant and fills in a missing inertia.
///
/// All violations are collected rather than stopping at the first one.
pub fn validate_scene<T: Scalar>(spec: SceneSpec<T>) -> Result<SceneSpec<T>> {
    let mut bad = Vec::new();
    let mut flag = |field: &str, message: String| {
        bad.push(SceneViolation {
            field: field.to_owned(),
            message,
        })
    };
    let positive = |x: T| x > T::zero() && x.is_finite();

    match spec.slider_shape {
        SliderShape::Box { half_extents } => {
            if !positive(half_extents.x) || !positive(half_extents.y) {
                flag(
                    "slider_shape.box.half_extents",
                    format!("must be positive, got {half_extents:?}"),
                );
            }
        }
        SliderShape::Disc { radius } => {
            if !positive(radius) {
                flag("slider_shape.disc.radius", format!("must be positive, got {radius}"));
            }
        }
    }
    if !positive(spec.slider_mass) {
        flag("slider_mass", format!("must be positive, got {}", spec.slider_mass));
    }
    if let Some(i) = spec.slider_inertia {
        if !positive(i) {
            flag("slider_inertia", format!("must be positive, got {i}"));
        }
    }
    if !positive(spec.pusher_radius) {
        flag("pusher_radius", format!("must be positive, got {}", spec.pusher_radius));
    }
    for (name, mu) in [
        ("support_friction_mu", spec.support_friction_mu),
        ("contact_friction_mu", spec.contact_friction_mu),
    ] {
        if !(mu >= T::zero()) || !mu.is_finite() {
            flag(name, format!("must be non-negative, got {mu}"));
        }
    }
    if !positive(spec.max_push_speed) {
        flag("max_push_speed", format!("must be positive, got {}", spec.max_push_speed));
    }
    let table = spec.table_bounds;
    let table_ok = table.min.is_finite()
        && table.max.is_finite()
        && table.min.x < table.max.x
        && table.min.y < table.max.y;
    if !table_ok {
        flag("table_bounds", format!("min must be below max, got {table:?}"));
    }
    for (name, c) in [("obstacle", spec.obstacle), ("goal", spec.goal)] {
        if !positive(c.radius) {
            flag(&format!("{name}.radius"), format!("must be positive, got {}", c.radius));
        }
        if table_ok && !table.contains(c.center) {
            flag(&format!("{name}.center"), "must lie inside table_bounds".to_owned());
        }
    }
    let start = spec.start_state;
    if !start.is_finite() {
        flag("start_state", "has non-finite components".to_owned());
    } else {
        if table_ok && !table.contains(start.slider_pose.position()) {
            flag("start_state.slider_pose", "must lie inside table_bounds".to_owned());
        }
        if !spec.slider_shape.is_degenerate() && positive(spec.pusher_radius) {
            let q = geometry::penetration(
                start.pusher_pos,
                spec.pusher_radius,
                &spec.slider_shape,
                &start.slider_pose,
            )?;
            if q.penetration_depth > T::lit(PENETRATION_TOLERANCE) {
                flag(
                    "start_state",
                    format!(
                        "pusher penetrates slider by {} mm (tolerance {PENETRATION_TOLERANCE} mm)",
                        q.penetration_depth
                    ),
                );
            }
        }
    }

    if !bad.is_empty() {
        return Err(Error::InvalidScene(bad));
    }
    let mut spec = spec;
    if spec.slider_inertia.is_none() {
        spec.slider_inertia = Some(spec.slider_shape.inertia(spec.slider_mass));
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::Pose;

    fn box_scene() -> SceneSpec<f64> {
        SceneSpec {
            slider_shape: SliderShape::Box {
                half_extents: Vec2::new(50.0, 30.0),
            },
            slider_mass: 0.5,
            slider_inertia: Some(566.0),
            pusher_radius: 10.0,
            support_friction_mu: 0.35,
            contact_friction_mu: 0.3,
            table_bounds: Rect::new(Vec2::new(-300.0, -300.0), Vec2::new(300.0, 300.0)),
            obstacle: Circle::new(Vec2::new(0.0, 150.0), 40.0),
            goal: Circle::new(Vec2::new(200.0, 0.0), 30.0),
            start_state: State::at_rest(Vec2::new(-65.0, 0.0), Pose::new(0.0, 0.0, 0.0)),
            max_push_speed: 100.0,
        }
    }

    #[test]
    fn valid_scene_is_returned_unchanged() {
        let s = box_scene();
        assert_eq!(validate_scene(s.clone()).unwrap(), s);
    }

    #[test]
    fn validation_is_idempotent() {
        let mut s = box_scene();
        s.slider_inertia = None;
        let once = validate_scene(s).unwrap();
        let twice = validate_scene(once.clone()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn zero_obstacle_radius_names_field() {
        let mut s = box_scene();
        s.obstacle.radius = 0.0;
        match validate_scene(s) {
            Err(Error::InvalidScene(v)) => {
                assert_eq!(v.len(), 1);
                assert_eq!(v[0].field, "obstacle.radius");
            }
            other => panic!("expected scene error, got {other:?}"),
        }
    }

    #[test]
    fn all_violations_reported() {
        let mut s = box_scene();
        s.slider_mass = -1.0;
        s.goal.center = Vec2::new(1e4, 0.0);
        s.pusher_radius = 0.0;
        let Err(Error::InvalidScene(v)) = validate_scene(s) else {
            panic!("expected failure")
        };
        let fields: Vec<_> = v.iter().map(|x| x.field.as_str()).collect();
        assert!(fields.contains(&"slider_mass"));
        assert!(fields.contains(&"goal.center"));
        assert!(fields.contains(&"pusher_radius"));
    }

    #[test]
    fn start_penetration_reports_depth() {
        let mut s = box_scene();
        s.start_state.pusher_pos = Vec2::new(-55.0, 0.0);
        let err = validate_scene(s).unwrap_err().to_string();
        assert!(err.contains("start_state"), "{err}");
        assert!(err.contains("penetrates slider by 5"), "{err}");
    }

    #[test]
    fn box_inertia_matches_formula_and_monte_carlo() {
        let mut s = box_scene();
        s.slider_shape = SliderShape::Box {
            half_extents: Vec2::new(50.0, 30.0),
        };
        s.slider_inertia = None;
        let v = validate_scene(s).unwrap();
        let inertia = v.slider_inertia.unwrap();
        assert!((inertia - 0.5 * (100.0f64.powi(2) + 60.0f64.powi(2)) / 12.0).abs() < 1e-9);

        // Midpoint-rule integration of r^2 dm over the rectangle.
        let n = 400;
        let (w, h) = (100.0, 60.0);
        let dm = 0.5 / (n * n) as f64;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = -w / 2.0 + (i as f64 + 0.5) * w / n as f64;
                let y = -h / 2.0 + (j as f64 + 0.5) * h / n as f64;
                acc += (x * x + y * y) * dm;
            }
        }
        assert!((acc - inertia).abs() / inertia < 1e-4);
        assert!((inertia - 566.6666666).abs() < 1e-3);
    }
}
