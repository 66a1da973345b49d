use serde::{Deserialize, Serialize};

use crate::linalg::{self, Point};
use crate::potential::PotentialSpec;
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayState {
    pub x: Point,
    pub p: Point,
    pub t: f64,
}

impl RayState {
    pub fn new(x: Point, p: Point) -> Self {
        RayState { x, p, t: 0.0 }
    }

    fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.p).all(|v| v.is_finite())
    }
}

/// `H = |p|² + V(x)`
pub fn hamiltonian(spec: &PotentialSpec, s: &RayState) -> f64 {
    linalg::dot(&s.p, &s.p) + spec.value(&s.x)
}

/// One kick-drift-kick step of `ẋ = 2p`, `ṗ = -∇V`.
fn leapfrog(spec: &PotentialSpec, s: &mut RayState, dt: f64) {
    let g = spec.gradient(&s.x);
    s.p = linalg::axpy(&s.p, -0.5 * dt, &g);
    s.x = linalg::axpy(&s.x, 2.0 * dt, &s.p);
    let g = spec.gradient(&s.x);
    s.p = linalg::axpy(&s.p, -0.5 * dt, &g);
}

fn check_step(dt: f64, t_final: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::precondition(format!("need dt > 0 and t_final >= 0, got dt = {dt}, t_final = {t_final}")));
    }
    Ok((t_final / dt).round() as usize)
}

/// Leapfrog trajectory from `(x0, p0)`, one state per step including the
/// initial one. The final time is rounded to a whole number of steps.
pub fn hamiltonian_flow(spec: &PotentialSpec, x0: Point, p0: Point, t_final: f64, dt: f64) -> Result<Vec<RayState>> {
    let steps = check_step(dt, t_final)?;
    let mut s = RayState::new(x0, p0);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(s);
    for k in 1..=steps {
        leapfrog(spec, &mut s, dt);
        s.t = k as f64 * dt;
        if !s.is_finite() {
            return Err(Error::NonFinite("hamiltonian flow"));
        }
        out.push(s);
    }
    Ok(out)
}

/// First time `|x(t)| > radius`, or `None` if the ray stays inside up to `t_max`.
pub fn escape_time(spec: &PotentialSpec, x0: Point, p0: Point, radius: f64, t_max: f64, dt: f64) -> Result<Option<f64>> {
    let steps = check_step(dt, t_max)?;
    let mut s = RayState::new(x0, p0);
    for k in 1..=steps {
        leapfrog(spec, &mut s, dt);
        if !s.is_finite() {
            return Err(Error::NonFinite("hamiltonian flow"));
        }
        if linalg::norm(&s.x) > radius {
            return Ok(Some(k as f64 * dt));
        }
    }
    Ok(None)
}

/// The trapped set of a two-center potential: the segment between the
/// centers, with the saddle point where the axial force vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrappedRay {
    /// Segment endpoints (the two centers).
    pub segment: [Point; 2],
    pub direction: Point,
    /// Equilibrium on the axis, found by bisection.
    pub saddle: Point,
    pub bisection_steps: usize,
    /// `max |x(t) - saddle|` for a launch at rest at the saddle.
    pub equilibrium_drift: f64,
    /// Largest distance from the axis line over the on-axis launches.
    pub transverse_deviation: f64,
    /// Axial momenta used for the on-axis launches.
    pub launch_momenta: Vec<f64>,
    pub t_max: f64,
    pub dt: f64,
}

/// Distance of `x` from the line through `base` along the unit vector `e`.
fn axis_distance(x: &Point, base: &Point, e: &Point) -> f64 {
    let r = linalg::sub(x, base);
    linalg::norm(&linalg::axpy(&r, -linalg::dot(&r, e), e))
}

/// Locates the axial equilibrium by bisecting `e·∇V` on the open segment
/// between the two centers, then launches on-axis rays from it with kinetic
/// energy below the axial barrier and records how far they leave the axis.
pub fn find_trapped_ray(spec: &PotentialSpec, tolerance: f64, t_max: f64, dt: f64) -> Result<TrappedRay> {
    if spec.terms().len() != 2 {
        return Err(Error::precondition(format!(
            "trapped-ray search needs exactly two terms, got {}",
            spec.terms().len()
        )));
    }
    if !(tolerance > 0.0) {
        return Err(Error::precondition("bisection tolerance must be positive"));
    }
    let a = spec.terms()[0].center;
    let b = spec.terms()[1].center;
    let span = linalg::norm(&linalg::sub(&b, &a));
    let e = linalg::unit(&linalg::sub(&b, &a)).ok_or_else(|| Error::precondition("coincident centers"))?;
    let f = |s: f64| linalg::dot(&e, &spec.gradient(&linalg::axpy(&a, s, &e)));

    // Scan the open segment for the first sign change of the axial force,
    // then bisect inside that cell.
    const SCAN: usize = 64;
    let nodes: Vec<f64> = (1..SCAN).map(|k| span * k as f64 / SCAN as f64).collect();
    let values: Vec<f64> = nodes.iter().map(|&s| f(s)).collect();
    let Some(k) = (0..nodes.len() - 1).find(|&k| values[k] <= 0.0 && values[k + 1] >= 0.0) else {
        return Err(Error::NoBoundedTrajectory(
            "axial force has no inward sign change between the centers".into(),
        ));
    };
    let (mut lo, mut hi) = (nodes[k], nodes[k + 1]);
    if values[k] == 0.0 {
        hi = lo;
    } else if values[k + 1] == 0.0 {
        lo = hi;
    }
    let mut steps = 0;
    while hi - lo > tolerance && steps < 200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    let s_star = 0.5 * (lo + hi);
    let saddle = linalg::axpy(&a, s_star, &e);

    let rest = hamiltonian_flow(spec, saddle, linalg::ZERO, t_max, dt)?;
    let equilibrium_drift = rest
        .iter()
        .map(|s| linalg::norm(&linalg::sub(&s.x, &saddle)))
        .fold(0.0, f64::max);

    // Axial barrier: the smaller of the two potential maxima along the segment.
    let v0 = spec.value(&saddle);
    let barrier = spec.value(&a).min(spec.value(&b)) - v0;
    if !(barrier > 0.0) {
        return Err(Error::NoBoundedTrajectory("saddle is not below the axial barrier".into()));
    }
    let launch_momenta: Vec<f64> = [0.25, 0.5, 0.75].iter().map(|f| (f * barrier).sqrt()).collect();
    let runs = par::map_slice(&launch_momenta, |&p| -> Result<(f64, f64)> {
        let traj = hamiltonian_flow(spec, saddle, linalg::scale(&e, p), t_max, dt)?;
        let dev = traj.iter().map(|s| axis_distance(&s.x, &a, &e)).fold(0.0, f64::max);
        let reach = traj.iter().map(|s| linalg::norm(&linalg::sub(&s.x, &saddle))).fold(0.0, f64::max);
        Ok((dev, reach))
    });
    let mut transverse_deviation: f64 = 0.0;
    for r in runs {
        let (dev, reach) = r?;
        if reach > span {
            return Err(Error::NoBoundedTrajectory(format!("on-axis launch left the segment (reach {reach})")));
        }
        transverse_deviation = transverse_deviation.max(dev);
    }

    Ok(TrappedRay {
        segment: [a, b],
        direction: e,
        saddle,
        bisection_steps: steps,
        equilibrium_drift,
        transverse_deviation,
        launch_momenta,
        t_max,
        dt,
    })
}

/// Escape times from `B(0, radius)` for rays launched at rest at the saddle
/// displaced by each offset in a direction normal to the axis.
pub fn off_axis_escapes(
    spec: &PotentialSpec,
    ray: &TrappedRay,
    offsets: &[f64],
    radius: f64,
    t_max: f64,
    dt: f64,
) -> Result<Vec<Option<f64>>> {
    let dim = spec.dim();
    if dim < 2 {
        return Err(Error::precondition("off-axis launches need d >= 2"));
    }
    let normal = linalg::tangent_basis(&ray.direction, dim)[0];
    par::map_slice(offsets, |&h| {
        escape_time(spec, linalg::axpy(&ray.saddle, h, &normal), linalg::ZERO, radius, t_max, dt)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::GaussianTerm;

    fn pair() -> PotentialSpec {
        PotentialSpec::symmetric_pair(3, 3.0, 1.0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn free_motion_is_straight() {
        let spec = PotentialSpec::zero(3);
        let traj = hamiltonian_flow(&spec, linalg::ZERO, [1.0, 0.0, 0.0], 1.0, 0.125).unwrap();
        for s in &traj {
            assert_eq!(s.x, [2.0 * s.t, 0.0, 0.0]);
        }
        assert_eq!(traj.last().unwrap().t, 1.0);
    }

    #[test]
    fn symmetric_equilibrium_is_stationary() {
        let traj = hamiltonian_flow(&pair(), linalg::ZERO, linalg::ZERO, 20.0, 0.01).unwrap();
        for s in &traj {
            assert_eq!(s.x, linalg::ZERO);
        }
    }

    #[test]
    fn radial_momentum_grows_for_single_repulsive_term() {
        let a = [1.0, -0.5, 0.0];
        let spec = PotentialSpec::new(3, vec![GaussianTerm::new(a, 2.0, 1.0)], 2.0).unwrap();
        let traj = hamiltonian_flow(&spec, [1.5, 0.0, 0.3], [-0.7, 0.2, 0.0], 5.0, 1e-3).unwrap();
        let q: Vec<f64> = traj.iter().map(|s| linalg::dot(&linalg::sub(&s.x, &a), &s.p)).collect();
        // leapfrog is not exactly monotone; allow step-size noise
        for w in q.windows(2) {
            assert!(w[1] >= w[0] - 1e-6, "{} -> {}", w[0], w[1]);
        }
        assert!(q.last().unwrap() > &q[0]);
    }

    #[test]
    fn energy_drift_is_second_order() {
        let spec = pair();
        let drift = |dt: f64| {
            let traj = hamiltonian_flow(&spec, [0.5, 0.4, 0.0], [0.3, 0.0, 0.2], 4.0, dt).unwrap();
            let h0 = hamiltonian(&spec, &traj[0]);
            traj.iter().map(|s| (hamiltonian(&spec, s) - h0).abs()).fold(0.0, f64::max) / h0
        };
        let (d1, d2) = (drift(0.02), drift(0.01));
        let ratio = d1 / d2;
        assert!(ratio > 3.5 && ratio < 4.5, "{d1} {d2}");
    }

    #[test]
    fn symmetric_pair_traps_on_axis() {
        let spec = pair();
        let ray = find_trapped_ray(&spec, 1e-12, 20.0, 0.01).unwrap();
        assert!(linalg::norm(&ray.saddle) < 1e-11);
        assert_eq!(ray.transverse_deviation, 0.0);
        assert!(ray.equilibrium_drift < 1e-10);
        assert_eq!(ray.direction[0].abs(), 1.0);
        assert_eq!(ray.saddle, linalg::ZERO);
    }

    #[test]
    fn rotated_pair_traps_on_rotated_axis() {
        let (c, s) = (0.6_f64, 0.8_f64);
        let d = [3.0 * c, 3.0 * s, 0.0];
        let spec = PotentialSpec::new(
            3,
            vec![GaussianTerm::new(linalg::scale(&d, -1.0), 1.0, 1.0), GaussianTerm::new(d, 1.0, 1.0)],
            2.0,
        )
        .unwrap();
        let ray = find_trapped_ray(&spec, 1e-12, 5.0, 0.01).unwrap();
        assert!((ray.direction[0] - c).abs() < 1e-15 && (ray.direction[1] - s).abs() < 1e-15);
        assert!(linalg::norm(&ray.saddle) < 1e-11);
        assert!(ray.transverse_deviation < 1e-8, "{}", ray.transverse_deviation);
    }

    #[test]
    fn off_axis_launches_escape() {
        let spec = PotentialSpec::symmetric_pair(3, 1.5, 1.0, 1.0, 2.0).unwrap();
        let ray = find_trapped_ray(&spec, 1e-12, 5.0, 0.01).unwrap();
        let r = 2.5;
        let esc = off_axis_escapes(&spec, &ray, &[1e-3, 1e-2, 0.1], 2.0 * r, 200.0, 0.01).unwrap();
        assert!(esc.iter().all(Option::is_some), "{esc:?}");
        // smaller displacement takes longer to leave
        assert!(esc[0].unwrap() > esc[2].unwrap());
    }

    #[test]
    fn single_term_is_rejected() {
        let spec = PotentialSpec::new(2, vec![GaussianTerm::new(linalg::ZERO, 1.0, 1.0)], 2.0).unwrap();
        assert!(matches!(find_trapped_ray(&spec, 1e-9, 1.0, 0.1), Err(Error::Precondition(_))));
    }

    #[test]
    fn bad_step_rejected() {
        assert!(hamiltonian_flow(&pair(), linalg::ZERO, linalg::ZERO, 1.0, 0.0).is_err());
    }
}
