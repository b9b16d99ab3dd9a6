//! Disc pusher versus slider contact queries, swept contact along a push,
//! and projection of penetrating states back to the feasible set.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scene::{SceneSpec, SliderShape};
use crate::state::{Control, Pose, State};
use crate::vec2::Vec2;

/// Penetration (mm) below which a state counts as resting contact rather
/// than infeasible.
pub const PENETRATION_TOLERANCE: f64 = 0.1;

/// Closest-feature contact between the pusher disc and the slider.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactQuery<T> {
    /// Positive when overlapping; negative values are the clearance.
    pub penetration_depth: T,
    /// Unit vector pointing from the pusher into the slider.
    pub normal: Vec2<T>,
    /// Closest point on the slider boundary, world frame.
    pub contact_point: Vec2<T>,
}

/// Pusher disc vs slider shape at `pose`.
pub fn penetration<T: Scalar>(
    pusher_pos: Vec2<T>,
    pusher_radius: T,
    shape: &SliderShape<T>,
    pose: &Pose<T>,
) -> Result<ContactQuery<T>> {
    if shape.is_degenerate() {
        return Err(Error::invalid(format!("degenerate slider shape {shape:?}")));
    }
    let center = pose.position();
    Ok(match *shape {
        SliderShape::Disc { radius } => {
            let delta = center - pusher_pos;
            let dist = delta.norm();
            let normal = if dist > T::zero() {
                delta * dist.recip()
            } else {
                Vec2::new(T::one(), T::zero())
            };
            ContactQuery {
                penetration_depth: pusher_radius + radius - dist,
                normal,
                contact_point: center - normal * radius,
            }
        }
        SliderShape::Box { half_extents: h } => {
            let local = (pusher_pos - center).rotate(-pose.theta);
            let clamped = Vec2::new(local.x.max(-h.x).min(h.x), local.y.max(-h.y).min(h.y));
            let gap = clamped - local;
            let dist = gap.norm();
            let (depth, normal_local, point_local) = if dist > T::zero() {
                (pusher_radius - dist, gap * dist.recip(), clamped)
            } else {
                // Centre on or inside the box: leave through the nearest face.
                let dx = h.x - local.x.abs();
                let dy = h.y - local.y.abs();
                if dx <= dy {
                    let s = if local.x < T::zero() { -T::one() } else { T::one() };
                    (
                        pusher_radius + dx,
                        Vec2::new(-s, T::zero()),
                        Vec2::new(s * h.x, local.y),
                    )
                } else {
                    let s = if local.y < T::zero() { -T::one() } else { T::one() };
                    (
                        pusher_radius + dy,
                        Vec2::new(T::zero(), -s),
                        Vec2::new(local.x, s * h.y),
                    )
                }
            };
            ContactQuery {
                penetration_depth: depth,
                normal: normal_local.rotate(pose.theta),
                contact_point: center + point_local.rotate(pose.theta),
            }
        }
    })
}

/// Split of one pusher sweep into free travel and travel in contact, with
/// the slider held at its pose at the start of the sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepResult<T> {
    pub d_contact: T,
    pub d_free: T,
    pub first_contact_point: Option<Vec2<T>>,
    /// Contact point to slider centre.
    pub r_c: Option<Vec2<T>>,
    /// Unsigned angle between the push direction and `r_c`.
    pub theta_push: Option<T>,
}

impl<T: Scalar> SweepResult<T> {
    fn free(length: T) -> Self {
        SweepResult {
            d_contact: T::zero(),
            d_free: length,
            first_contact_point: None,
            r_c: None,
            theta_push: None,
        }
    }

    /// Fraction of the sweep spent in contact; zero for an empty sweep.
    pub fn contact_fraction(&self) -> T {
        let total = self.d_contact + self.d_free;
        if total > T::zero() {
            (self.d_contact / total).min(T::one()).max(T::zero())
        } else {
            T::zero()
        }
    }
}

/// Parameter interval `[lo, hi]` on the line `p + t d` inside a closed set.
type Span<T> = Option<(T, T)>;

fn slab<T: Scalar>(p: T, d: T, lo: T, hi: T) -> Span<T> {
    if d == T::zero() {
        return if p >= lo && p <= hi {
            Some((T::neg_infinity(), T::infinity()))
        } else {
            None
        };
    }
    let a = (lo - p) / d;
    let b = (hi - p) / d;
    Some((a.min(b), a.max(b)))
}

fn aabb_span<T: Scalar>(p: Vec2<T>, d: Vec2<T>, half: Vec2<T>) -> Span<T> {
    let (ax, bx) = slab(p.x, d.x, -half.x, half.x)?;
    let (ay, by) = slab(p.y, d.y, -half.y, half.y)?;
    let lo = ax.max(ay);
    let hi = bx.min(by);
    (lo <= hi).then_some((lo, hi))
}

fn circle_span<T: Scalar>(p: Vec2<T>, d: Vec2<T>, center: Vec2<T>, radius: T) -> Span<T> {
    let m = p - center;
    let a = d.norm_squared();
    let c = m.norm_squared() - radius * radius;
    if a == T::zero() {
        return (c <= T::zero()).then_some((T::neg_infinity(), T::infinity()));
    }
    let b = m.dot(d);
    let disc = b * b - a * c;
    if disc < T::zero() {
        return None;
    }
    let root = disc.sqrt();
    // Numerically stable pair of roots.
    let q = if b > T::zero() { -(b + root) } else { -(b - root) };
    if q == T::zero() {
        return Some((T::zero(), T::zero()));
    }
    let t1 = q / a;
    let t2 = c / q;
    Some((t1.min(t2), t1.max(t2)))
}

fn merge<T: Scalar>(acc: Span<T>, next: Span<T>) -> Span<T> {
    match (acc, next) {
        (None, x) | (x, None) => x,
        (Some((a, b)), Some((c, d))) => Some((a.min(c), b.max(d))),
    }
}

/// Span of the line inside the slider inflated by the pusher radius, in the
/// slider frame. The inflated shapes are convex, so the union of the pieces'
/// spans is itself one interval.
fn inflated_span<T: Scalar>(p: Vec2<T>, d: Vec2<T>, r: T, shape: &SliderShape<T>) -> Span<T> {
    match *shape {
        SliderShape::Disc { radius } => circle_span(p, d, Vec2::zero(), radius + r),
        SliderShape::Box { half_extents: h } => {
            let mut span = aabb_span(p, d, Vec2::new(h.x + r, h.y));
            span = merge(span, aabb_span(p, d, Vec2::new(h.x, h.y + r)));
            for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
                let corner = Vec2::new(h.x * T::lit(sx), h.y * T::lit(sy));
                span = merge(span, circle_span(p, d, corner, r));
            }
            span
        }
    }
}

/// Sweeps the pusher centre from `pusher_pos` by `displacement` against a
/// slider frozen at `pose`.
///
/// Contact starts at the first point of the sweep where the pusher is inside
/// the inflated slider and moving into it; from there the pusher is taken to
/// stay in contact for the rest of the sweep.
pub fn sweep_contact<T: Scalar>(
    pusher_pos: Vec2<T>,
    displacement: Vec2<T>,
    pusher_radius: T,
    shape: &SliderShape<T>,
    pose: &Pose<T>,
) -> Result<SweepResult<T>> {
    if shape.is_degenerate() {
        return Err(Error::invalid(format!("degenerate slider shape {shape:?}")));
    }
    let length = displacement.norm();
    if !(length > T::zero()) {
        return Ok(SweepResult::free(T::zero()));
    }
    let p = (pusher_pos - pose.position()).rotate(-pose.theta);
    let d = displacement.rotate(-pose.theta);
    let Some((lo, hi)) = inflated_span(p, d, pusher_radius, shape) else {
        return Ok(SweepResult::free(length));
    };
    if lo > T::one() || hi < T::zero() {
        return Ok(SweepResult::free(length));
    }
    let t_in = lo.max(T::zero());
    if lo >= T::zero() && !(hi > lo) {
        // Tangent touch.
        return Ok(SweepResult::free(length));
    }
    let entry = pusher_pos + displacement * t_in;
    let q = penetration(entry, pusher_radius, shape, pose)?;
    if !(q.normal.dot(displacement) > T::zero()) {
        // Starting in contact but moving away or sliding along the surface.
        return Ok(SweepResult::free(length));
    }
    let d_free = (length * t_in).min(length);
    let d_contact = length - d_free;
    let r_c = pose.position() - q.contact_point;
    let theta_push = displacement.cross(r_c).abs().atan2(displacement.dot(r_c));
    Ok(SweepResult {
        d_contact,
        d_free,
        first_contact_point: Some(q.contact_point),
        r_c: Some(r_c),
        theta_push: Some(theta_push),
    })
}

/// [`sweep_contact`] for one control applied from `state`.
pub fn sweep_state<T: Scalar>(
    state: &State<T>,
    control: &Control<T>,
    scene: &SceneSpec<T>,
) -> Result<SweepResult<T>> {
    sweep_contact(
        state.pusher_pos,
        control.displacement(),
        scene.pusher_radius,
        &scene.slider_shape,
        &state.slider_pose,
    )
}

/// Pushes the slider out of the pusher along the contact normal when the
/// penetration exceeds [`PENETRATION_TOLERANCE`]; identity otherwise.
pub fn project_feasible<T: Scalar>(state: &State<T>, scene: &SceneSpec<T>) -> State<T> {
    project_feasible_with_tolerance(state, scene, T::lit(PENETRATION_TOLERANCE))
}

/// [`project_feasible`] with an explicit tolerance. With `tolerance = 0`
/// every penetrating state is moved onto the constraint boundary.
pub fn project_feasible_with_tolerance<T: Scalar>(
    state: &State<T>,
    scene: &SceneSpec<T>,
    tolerance: T,
) -> State<T> {
    let Ok(q) = penetration(
        state.pusher_pos,
        scene.pusher_radius,
        &scene.slider_shape,
        &state.slider_pose,
    ) else {
        return *state;
    };
    if !(q.penetration_depth > tolerance) {
        return *state;
    }
    let mut out = *state;
    let shift = q.normal * q.penetration_depth;
    out.slider_pose.x = out.slider_pose.x + shift.x;
    out.slider_pose.y = out.slider_pose.y + shift.y;
    out
}
