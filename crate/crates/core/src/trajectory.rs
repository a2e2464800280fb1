//! Inference paths `t -> (r(t), g(t))` through the `(r, g)` rectangle.
//!
//! Every path starts at `r = phi` (where `alpha = 0`, so the state carries
//! only `x1` and noise) and ends at `(-phi, 0)`, where the state is `x0`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryKind {
    /// `r = phi sin t`, `g = delta cos t`, `t` from `pi/2` down to `-pi/2`.
    Elliptical { delta: f64 },
    /// `r = 2 phi t - phi`, `g = delta t`, `t` from 1 down to 0.
    Linear { delta: f64 },
    /// `r = phi (1 - 2t)`, `g = 0`, `t` from 0 up to 1.
    Regression,
    /// `r = phi t`, `g = delta (1 - |t|^p)`, `t` from 1 down to -1.
    VPath { delta: f64, p: f64 },
    /// Quadratic Bezier through `(phi, 0)`, control `(0, delta)`, `(-phi, 0)`;
    /// `t` from 0 up to 1, peak `g = delta / 2`.
    QuadBezier { delta: f64 },
}

impl TrajectoryKind {
    pub fn name(&self) -> &'static str {
        match self {
            TrajectoryKind::Elliptical { .. } => "elliptical",
            TrajectoryKind::Linear { .. } => "linear",
            TrajectoryKind::Regression => "regression",
            TrajectoryKind::VPath { .. } => "vpath",
            TrajectoryKind::QuadBezier { .. } => "bezier",
        }
    }

    pub fn delta(&self) -> f64 {
        match *self {
            TrajectoryKind::Elliptical { delta }
            | TrajectoryKind::Linear { delta }
            | TrajectoryKind::VPath { delta, .. }
            | TrajectoryKind::QuadBezier { delta } => delta,
            TrajectoryKind::Regression => 0.0,
        }
    }
}

/// Differentiability class of `g(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Continuity {
    C(u32),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    kind: TrajectoryKind,
    phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub t: f64,
    pub r: f64,
    pub g: f64,
}

/// Discretized path, ordered from the path start to the path end.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub points: Vec<GridPoint>,
}

impl TimeGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn steps(&self) -> impl Iterator<Item = (GridPoint, GridPoint)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }
}

impl Trajectory {
    pub fn new(kind: TrajectoryKind, phi: f64) -> Result<Self> {
        if !(phi.is_finite() && phi > 0.0) {
            return Err(Error::Domain(format!("phi must be positive, got {phi}")));
        }
        let max_delta = match kind {
            TrajectoryKind::QuadBezier { .. } => PI,
            _ => FRAC_PI_2,
        };
        let delta = kind.delta();
        if !(0.0..=max_delta).contains(&delta) {
            return Err(Error::Domain(format!(
                "delta must lie in [0, {max_delta}] for {} paths, got {delta}",
                kind.name()
            )));
        }
        if let TrajectoryKind::VPath { p, .. } = kind {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::Domain(format!("V-path exponent must be positive, got {p}")));
            }
        }
        Ok(Self { kind, phi })
    }

    pub fn elliptical(phi: f64, delta: f64) -> Result<Self> {
        Self::new(TrajectoryKind::Elliptical { delta }, phi)
    }

    pub fn linear(phi: f64, delta: f64) -> Result<Self> {
        Self::new(TrajectoryKind::Linear { delta }, phi)
    }

    pub fn regression(phi: f64) -> Result<Self> {
        Self::new(TrajectoryKind::Regression, phi)
    }

    pub fn vpath(phi: f64, delta: f64, p: f64) -> Result<Self> {
        Self::new(TrajectoryKind::VPath { delta, p }, phi)
    }

    pub fn quad_bezier(phi: f64, delta: f64) -> Result<Self> {
        Self::new(TrajectoryKind::QuadBezier { delta }, phi)
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Parameter values at the path start and end.
    pub fn t_range(&self) -> (f64, f64) {
        match self.kind {
            TrajectoryKind::Elliptical { .. } => (FRAC_PI_2, -FRAC_PI_2),
            TrajectoryKind::Linear { .. } => (1.0, 0.0),
            TrajectoryKind::Regression => (0.0, 1.0),
            TrajectoryKind::VPath { .. } => (1.0, -1.0),
            TrajectoryKind::QuadBezier { .. } => (0.0, 1.0),
        }
    }

    /// `+1.0` if `t` increases from start to end, `-1.0` otherwise.
    pub fn direction(&self) -> f64 {
        let (a, b) = self.t_range();
        (b - a).signum()
    }

    /// Noise level at the path start.
    pub fn g_start(&self) -> f64 {
        match self.kind {
            TrajectoryKind::Linear { delta } => delta,
            _ => 0.0,
        }
    }

    /// True when the first sampler step must be a booting step.
    pub fn starts_noiseless(&self) -> bool {
        self.g_start() == 0.0
    }

    /// Paths with no noise anywhere; the sampler routes these to the
    /// deterministic regression update.
    pub fn is_pure_regression(&self) -> bool {
        self.kind.delta() == 0.0
    }

    fn in_domain(&self, t: f64) -> bool {
        let (a, b) = self.t_range();
        t >= a.min(b) && t <= a.max(b)
    }

    pub fn point(&self, t: f64) -> Result<(f64, f64)> {
        if !self.in_domain(t) {
            let (a, b) = self.t_range();
            return Err(Error::Domain(format!(
                "t = {t} outside the {} domain [{}, {}]",
                self.kind.name(),
                a.min(b),
                a.max(b)
            )));
        }
        let phi = self.phi;
        let (r, g) = match self.kind {
            TrajectoryKind::Elliptical { delta } => {
                if t.abs() == FRAC_PI_2 {
                    (phi * t.signum(), 0.0)
                } else {
                    (phi * t.sin(), delta * t.cos())
                }
            }
            TrajectoryKind::Linear { delta } => (2.0 * phi * t - phi, delta * t),
            TrajectoryKind::Regression => (phi * (1.0 - 2.0 * t), 0.0),
            TrajectoryKind::VPath { delta, p } => (phi * t, delta * (1.0 - t.abs().powf(p))),
            TrajectoryKind::QuadBezier { delta } => {
                (phi * (1.0 - 2.0 * t), 2.0 * delta * t * (1.0 - t))
            }
        };
        Ok((r, g))
    }

    /// Uniform-in-`t` grid with `n_steps + 1` points from start to end.
    pub fn discretize(&self, n_steps: usize) -> Result<TimeGrid> {
        let (a, b) = self.t_range();
        self.discretize_between(a, b, n_steps)
    }

    /// Uniform grid over a sub-interval `[t_from, t_to]` of the domain; the
    /// two end parameters are hit exactly.
    pub fn discretize_between(&self, t_from: f64, t_to: f64, n_steps: usize) -> Result<TimeGrid> {
        if n_steps == 0 {
            return Err(Error::Domain("n_steps must be at least 1".into()));
        }
        let points = (0..=n_steps)
            .map(|i| {
                let t = if i == 0 {
                    t_from
                } else if i == n_steps {
                    t_to
                } else {
                    t_from + (t_to - t_from) * (i as f64 / n_steps as f64)
                };
                let (r, g) = self.point(t)?;
                Ok(GridPoint { t, r, g })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TimeGrid { points })
    }

    pub fn continuity(&self) -> Continuity {
        match self.kind {
            TrajectoryKind::VPath { p, .. } => vpath_continuity(p),
            _ => Continuity::Infinite,
        }
    }
}

/// Class of `t -> 1 - |t|^p` at `t = 0`.
fn vpath_continuity(p: f64) -> Continuity {
    if p <= 1.0 {
        return Continuity::C(0);
    }
    if p.fract() == 0.0 {
        // |t|^p is the polynomial t^p for even p; odd p loses smoothness at order p.
        if (p as u64).is_multiple_of(2) {
            Continuity::Infinite
        } else {
            Continuity::C(p as u32 - 1)
        }
    } else {
        Continuity::C(p.floor() as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

    const PHI: f64 = 0.6;

    #[test]
    fn elliptical_points() {
        let tr = Trajectory::elliptical(PHI, FRAC_PI_4).unwrap();
        assert_eq!(tr.point(FRAC_PI_2).unwrap(), (PHI, 0.0));
        assert_eq!(tr.point(0.0).unwrap(), (0.0, FRAC_PI_4));
        assert_eq!(tr.point(-FRAC_PI_2).unwrap(), (-PHI, 0.0));
        assert!(tr.point(2.0).is_err());
    }

    #[test]
    fn linear_points() {
        let tr = Trajectory::linear(PHI, FRAC_PI_8).unwrap();
        assert_eq!(tr.point(1.0).unwrap(), (PHI, FRAC_PI_8));
        assert_eq!(tr.point(0.0).unwrap(), (-PHI, 0.0));
    }

    #[test]
    fn elliptical_two_step_grid() {
        let delta = 0.3;
        let grid = Trajectory::elliptical(PHI, delta).unwrap().discretize(2).unwrap();
        let ts: Vec<f64> = grid.points.iter().map(|p| p.t).collect();
        assert_eq!(ts, vec![FRAC_PI_2, 0.0, -FRAC_PI_2]);
        assert_eq!((grid.points[0].r, grid.points[0].g), (PHI, 0.0));
        assert_eq!((grid.points[1].r, grid.points[1].g), (0.0, delta));
        assert_eq!((grid.points[2].r, grid.points[2].g), (-PHI, 0.0));
    }

    #[test]
    fn regression_one_step_grid() {
        let grid = Trajectory::regression(PHI).unwrap().discretize(1).unwrap();
        assert_eq!(grid.len(), 2);
        assert_eq!((grid.points[0].r, grid.points[0].g), (PHI, 0.0));
        assert_eq!((grid.points[1].r, grid.points[1].g), (-PHI, 0.0));
    }

    #[test]
    fn linear_four_step_g_values() {
        let grid = Trajectory::linear(PHI, FRAC_PI_8).unwrap().discretize(4).unwrap();
        let gs: Vec<f64> = grid.points.iter().map(|p| p.g).collect();
        let want = [FRAC_PI_8, 3.0 * PI / 32.0, PI / 16.0, PI / 32.0, 0.0];
        for (g, w) in gs.iter().zip(want) {
            assert!((g - w).abs() < 1e-15, "{g} vs {w}");
        }
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(Trajectory::elliptical(PHI, 0.2).unwrap().discretize(0).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Trajectory::elliptical(PHI, 2.0).is_err());
        assert!(Trajectory::linear(PHI, -0.1).is_err());
        assert!(Trajectory::vpath(PHI, 0.3, 0.0).is_err());
        assert!(Trajectory::regression(0.0).is_err());
        assert!(Trajectory::quad_bezier(PHI, 3.0).is_ok());
    }

    #[test]
    fn continuity_classes() {
        let c = |p| Trajectory::vpath(PHI, 0.4, p).unwrap().continuity();
        assert_eq!(c(1.0), Continuity::C(0));
        assert_eq!(c(1.5), Continuity::C(1));
        assert_eq!(c(2.5), Continuity::C(2));
        assert_eq!(c(3.0), Continuity::C(2));
        assert_eq!(c(0.5), Continuity::C(0));
        assert_eq!(c(2.0), Continuity::Infinite);
        assert_eq!(Trajectory::elliptical(PHI, 0.4).unwrap().continuity(), Continuity::Infinite);
        assert_eq!(Trajectory::linear(PHI, 0.4).unwrap().continuity(), Continuity::Infinite);
        assert_eq!(Trajectory::quad_bezier(PHI, 0.4).unwrap().continuity(), Continuity::Infinite);
    }

    #[test]
    fn vpath_one_sided_derivatives_at_kink() {
        let h = 1e-7;
        for &(p, smooth) in &[(1.0, false), (1.5, true), (2.5, true)] {
            let tr = Trajectory::vpath(PHI, 0.5, p).unwrap();
            let g = |t: f64| tr.point(t).unwrap().1;
            let right = (g(h) - g(0.0)) / h;
            let left = (g(0.0) - g(-h)) / h;
            assert_eq!((right - left).abs() < 1e-3, smooth, "p = {p}: {left} vs {right}");
        }
    }

    #[test]
    fn bezier_boundaries_and_peak() {
        let delta = 0.9;
        let tr = Trajectory::quad_bezier(PHI, delta).unwrap();
        assert_eq!(tr.point(0.0).unwrap(), (PHI, 0.0));
        assert_eq!(tr.point(1.0).unwrap(), (-PHI, 0.0));
        let (r, g) = tr.point(0.5).unwrap();
        assert!(r.abs() < 1e-12 && (g - delta / 2.0).abs() < 1e-12);
        // midpoint is the maximum of g
        for i in 0..=100 {
            assert!(tr.point(i as f64 / 100.0).unwrap().1 <= delta / 2.0 + 1e-15);
        }
    }

    #[test]
    fn every_path_starts_at_phi_and_ends_at_x0() {
        let paths = [
            Trajectory::elliptical(PHI, 0.7).unwrap(),
            Trajectory::linear(PHI, 0.7).unwrap(),
            Trajectory::regression(PHI).unwrap(),
            Trajectory::vpath(PHI, 0.7, 1.5).unwrap(),
            Trajectory::quad_bezier(PHI, 0.7).unwrap(),
        ];
        for tr in paths {
            for n in [1, 2, 7, 50] {
                let grid = tr.discretize(n).unwrap();
                let first = grid.points[0];
                let last = *grid.points.last().unwrap();
                assert_eq!((first.r, first.g), (PHI, tr.g_start()));
                assert_eq!((last.r, last.g), (-PHI, 0.0));
                // strictly monotone in t
                let d = tr.direction();
                assert!(grid.points.windows(2).all(|w| (w[1].t - w[0].t) * d > 0.0));
            }
        }
    }

    proptest! {
        #[test]
        fn elliptical_implicit_equation(t in -FRAC_PI_2..=FRAC_PI_2, delta in 0.01f64..FRAC_PI_2) {
            let (r, g) = Trajectory::elliptical(PHI, delta).unwrap().point(t).unwrap();
            prop_assert!((r * r / (PHI * PHI) + g * g / (delta * delta) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn linear_implicit_equation(t in 0.0f64..=1.0, delta in 0.01f64..FRAC_PI_2) {
            let (r, g) = Trajectory::linear(PHI, delta).unwrap().point(t).unwrap();
            prop_assert!((r / -PHI + g / (delta / 2.0) - 1.0).abs() < 1e-12);
        }
    }
}
