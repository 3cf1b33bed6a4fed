//! Joint-space geometric path through waypoints.
//!
//! Each joint is a natural cubic spline over cumulative chord-length knots, so
//! the path passes through every waypoint and is C² everywhere. Per-segment
//! derivative extrema are computed exactly and cached; they drive the scalar
//! limits and the occupancy travel bounds.

use crate::chunk::WaypointPath;
use crate::error::{Error, Result};
use crate::model::{JointVector, KinematicLimits};

/// Waypoints closer than this (max norm) are merged.
pub const DUPLICATE_TOL: f64 = 1e-9;

/// Exact extrema of one joint's cubic on one segment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DerivBounds {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricPath {
    n: usize,
    knots: Vec<f64>,
    /// `coeffs[seg * n + j] = [c0, c1, c2, c3]` for γ_j(s) = Σ c_k (s - s_seg)^k.
    coeffs: Vec<[f64; 4]>,
    bounds: Vec<DerivBounds>,
    waypoints: Vec<JointVector>,
}

/// Value and first three derivatives of the path at one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub q: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
}

fn merge_duplicates(waypoints: &[JointVector]) -> Vec<JointVector> {
    let mut out: Vec<JointVector> = Vec::with_capacity(waypoints.len());
    for w in waypoints {
        match out.last() {
            Some(prev) if prev.sub(w).norm_inf() < DUPLICATE_TOL => {}
            _ => out.push(w.clone()),
        }
    }
    out
}

fn chord_knots(points: &[JointVector]) -> Vec<f64> {
    let mut knots = Vec::with_capacity(points.len());
    let mut s = 0.0;
    knots.push(0.0);
    for w in points.windows(2) {
        s += w[1].sub(&w[0]).norm();
        knots.push(s);
    }
    knots
}

/// Second derivatives of the natural spline at the knots (Thomas algorithm).
fn natural_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut moments = vec![0.0; m];
    if m < 3 {
        return moments;
    }
    let k = m - 2;
    let mut diag = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    for i in 0..k {
        diag[i] = 2.0 * (h[i] + h[i + 1]);
        rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
    }
    // forward sweep; sub- and super-diagonal entries are h[i+1]
    for i in 1..k {
        let w = h[i] / diag[i - 1];
        diag[i] -= w * h[i];
        rhs[i] -= w * rhs[i - 1];
    }
    moments[k] = rhs[k - 1] / diag[k - 1];
    for i in (0..k - 1).rev() {
        moments[i + 1] = (rhs[i] - h[i + 1] * moments[i + 2]) / diag[i];
    }
    moments
}

fn cubic_bounds(c: &[f64; 4], h: f64) -> DerivBounds {
    let eval = |u: f64| c[0] + u * (c[1] + u * (c[2] + u * c[3]));
    let d1 = |u: f64| c[1] + u * (2.0 * c[2] + 3.0 * u * c[3]);
    let mut lo = eval(0.0).min(eval(h));
    let mut hi = eval(0.0).max(eval(h));
    // stationary points of the cubic: roots of 3c3 u² + 2c2 u + c1
    let (qa, qb, qc) = (3.0 * c[3], 2.0 * c[2], c[1]);
    let mut roots = [f64::NAN; 2];
    if qa.abs() > 1e-300 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            roots = [(-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa)];
        }
    } else if qb.abs() > 1e-300 {
        roots[0] = -qc / qb;
    }
    for r in roots {
        if r > 0.0 && r < h {
            lo = lo.min(eval(r));
            hi = hi.max(eval(r));
        }
    }
    let mut m1 = d1(0.0).abs().max(d1(h).abs());
    if c[3].abs() > 1e-300 {
        let v = -c[2] / (3.0 * c[3]);
        if v > 0.0 && v < h {
            m1 = m1.max(d1(v).abs());
        }
    }
    let m2 = (2.0 * c[2]).abs().max((2.0 * c[2] + 6.0 * c[3] * h).abs());
    DerivBounds { d1: m1, d2: m2, d3: (6.0 * c[3]).abs(), min: lo, max: hi }
}

impl GeometricPath {
    /// Natural cubic spline through `points` at the given strictly increasing knots.
    pub fn from_knots(knots: Vec<f64>, points: Vec<JointVector>) -> Result<Self> {
        if points.len() < 2 || knots.len() != points.len() {
            return Err(Error::DegeneratePath);
        }
        let n = points[0].len();
        for p in &points {
            p.check_len(n)?;
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::NonFinite("path knots"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::DegeneratePath);
        }
        let segs = knots.len() - 1;
        let mut coeffs = vec![[0.0; 4]; segs * n];
        let mut y = vec![0.0; knots.len()];
        for j in 0..n {
            for (k, p) in points.iter().enumerate() {
                y[k] = p[j];
            }
            let mom = natural_moments(&knots, &y);
            for s in 0..segs {
                let h = knots[s + 1] - knots[s];
                coeffs[s * n + j] = [
                    y[s],
                    (y[s + 1] - y[s]) / h - h * (2.0 * mom[s] + mom[s + 1]) / 6.0,
                    mom[s] / 2.0,
                    (mom[s + 1] - mom[s]) / (6.0 * h),
                ];
            }
        }
        let bounds = (0..segs)
            .flat_map(|s| {
                let h = knots[s + 1] - knots[s];
                let coeffs = &coeffs;
                (0..n).map(move |j| cubic_bounds(&coeffs[s * n + j], h))
            })
            .collect();
        Ok(Self { n, knots, coeffs, bounds, waypoints: points })
    }

    /// Zero-length path that stays at `q`.
    pub fn stationary(q: JointVector) -> Self {
        let n = q.len();
        let c: Vec<[f64; 4]> = q.iter().map(|v| [*v, 0.0, 0.0, 0.0]).collect();
        let bounds = q.iter().map(|v| DerivBounds { min: *v, max: *v, ..Default::default() }).collect();
        Self { n, knots: vec![0.0, 0.0], coeffs: c, bounds, waypoints: vec![q] }
    }

    pub fn is_stationary(&self) -> bool {
        self.length() == 0.0
    }

    pub fn dof(&self) -> usize {
        self.n
    }

    /// Total parameter length S.
    pub fn length(&self) -> f64 {
        *self.knots.last().expect("knots")
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn waypoints(&self) -> &[JointVector] {
        &self.waypoints
    }

    pub fn segment_count(&self) -> usize {
        self.knots.len() - 1
    }

    /// Cached extrema for segment `seg`, one entry per joint.
    pub fn segment_bounds(&self, seg: usize) -> &[DerivBounds] {
        &self.bounds[seg * self.n..(seg + 1) * self.n]
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let s = s.clamp(0.0, self.length());
        let segs = self.segment_count();
        let idx = self.knots[1..segs].partition_point(|k| *k <= s);
        (idx, s - self.knots[idx])
    }

    /// γ(s), clamped to [0, S].
    pub fn position_into(&self, s: f64, out: &mut Vec<f64>) {
        let (seg, u) = self.locate(s);
        out.clear();
        out.extend(self.coeffs[seg * self.n..(seg + 1) * self.n].iter().map(|c| c[0] + u * (c[1] + u * (c[2] + u * c[3]))));
    }

    pub fn position(&self, s: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n);
        self.position_into(s, &mut out);
        out
    }

    pub fn tangent(&self, s: f64) -> Vec<f64> {
        let (seg, u) = self.locate(s);
        self.coeffs[seg * self.n..(seg + 1) * self.n].iter().map(|c| c[1] + u * (2.0 * c[2] + 3.0 * u * c[3])).collect()
    }

    pub fn point(&self, s: f64) -> PathPoint {
        let (seg, u) = self.locate(s);
        let cs = &self.coeffs[seg * self.n..(seg + 1) * self.n];
        PathPoint {
            q: cs.iter().map(|c| c[0] + u * (c[1] + u * (c[2] + u * c[3]))).collect(),
            d1: cs.iter().map(|c| c[1] + u * (2.0 * c[2] + 3.0 * u * c[3])).collect(),
            d2: cs.iter().map(|c| 2.0 * c[2] + 6.0 * c[3] * u).collect(),
            d3: cs.iter().map(|c| 6.0 * c[3]).collect(),
        }
    }

    /// Upper bound on max_j ∫|γ'_j| ds over [s_a, s_b]: the largest joint travel.
    pub fn travel_bound(&self, s_a: f64, s_b: f64) -> f64 {
        if self.is_stationary() {
            return 0.0;
        }
        let (lo, hi) = if s_a <= s_b { (s_a, s_b) } else { (s_b, s_a) };
        let lo = lo.clamp(0.0, self.length());
        let hi = hi.clamp(0.0, self.length());
        let (first, _) = self.locate(lo);
        let mut travel = [0.0f64; 16];
        let mut heap;
        let acc: &mut [f64] = if self.n <= 16 {
            &mut travel[..self.n]
        } else {
            heap = vec![0.0; self.n];
            &mut heap
        };
        for seg in first..self.segment_count() {
            let a = self.knots[seg].max(lo);
            let b = self.knots[seg + 1].min(hi);
            if b > a {
                for (j, bd) in self.segment_bounds(seg).iter().enumerate() {
                    acc[j] += (b - a) * bd.d1;
                }
            }
            if self.knots[seg + 1] >= hi {
                break;
            }
        }
        acc.iter().cloned().fold(0.0, f64::max)
    }

    /// Exact range of each joint over the whole path.
    pub fn joint_ranges(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); self.n];
        for seg in 0..self.segment_count() {
            for (j, b) in self.segment_bounds(seg).iter().enumerate() {
                out[j].0 = out[j].0.min(b.min);
                out[j].1 = out[j].1.max(b.max);
            }
        }
        out
    }

    /// Distance from `q` to the path, by coarse sampling then Newton refinement.
    pub fn distance_to(&self, q: &[f64]) -> f64 {
        if self.is_stationary() {
            return dist(&self.position(0.0), q);
        }
        const PER_SEG: usize = 16;
        let mut best_s = 0.0;
        let mut best = f64::INFINITY;
        let mut buf = Vec::with_capacity(self.n);
        for seg in 0..self.segment_count() {
            let (a, b) = (self.knots[seg], self.knots[seg + 1]);
            for i in 0..=PER_SEG {
                let s = a + (b - a) * i as f64 / PER_SEG as f64;
                self.position_into(s, &mut buf);
                let d = dist2(&buf, q);
                if d < best {
                    best = d;
                    best_s = s;
                }
            }
        }
        // golden-section on the bracketing cells, then Newton on <γ-q, γ'> = 0
        let span = self.knots.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max) / PER_SEG as f64;
        let (mut lo, mut hi) = ((best_s - span).max(0.0), (best_s + span).min(self.length()));
        let f = |s: f64, buf: &mut Vec<f64>| {
            self.position_into(s, buf);
            dist2(buf, q)
        };
        let g = 0.618_033_988_749_895;
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let mut f1 = f(x1, &mut buf);
        let mut f2 = f(x2, &mut buf);
        for _ in 0..60 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = f(x1, &mut buf);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = f(x2, &mut buf);
            }
        }
        let mut s = 0.5 * (lo + hi);
        for _ in 0..4 {
            let p = self.point(s);
            let r: Vec<f64> = p.q.iter().zip(q).map(|(a, b)| a - b).collect();
            let grad: f64 = r.iter().zip(&p.d1).map(|(a, b)| a * b).sum();
            let hess: f64 = p.d1.iter().map(|v| v * v).sum::<f64>() + r.iter().zip(&p.d2).map(|(a, b)| a * b).sum::<f64>();
            if hess <= 0.0 {
                break;
            }
            let next = (s - grad / hess).clamp(0.0, self.length());
            if f(next, &mut buf) > f(s, &mut buf) {
                break;
            }
            s = next;
        }
        f(s, &mut buf).min(best).sqrt()
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// Builds the path through `waypoints`, merging duplicates and subdividing any
/// segment whose interpolant leaves the joint limits.
pub fn build_path(waypoints: &WaypointPath, limits: &KinematicLimits) -> Result<GeometricPath> {
    let n = limits.len();
    for w in waypoints.waypoints() {
        w.check_len(n)?;
    }
    let mut points = merge_duplicates(waypoints.waypoints());
    if points.len() < 2 {
        return Err(Error::DegeneratePath);
    }
    for attempt in 0..2 {
        let knots = chord_knots(&points);
        let path = GeometricPath::from_knots(knots, points.clone())?;
        let mut offending = Vec::new();
        for seg in 0..path.segment_count() {
            let bad = path
                .segment_bounds(seg)
                .iter()
                .enumerate()
                .any(|(j, b)| b.min < limits.q_min[j] || b.max > limits.q_max[j]);
            if bad {
                offending.push(seg);
            }
        }
        if offending.is_empty() {
            return Ok(path);
        }
        if attempt == 1 {
            break;
        }
        for &seg in offending.iter().rev() {
            let mid = 0.5 * (path.knots[seg] + path.knots[seg + 1]);
            let mut q = path.position(mid);
            limits.clamp(&mut q);
            points.insert(seg + 1, JointVector::from_vec_unchecked(q));
        }
        points = merge_duplicates(&points);
    }
    Err(Error::PathOutsideLimits)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn jv(v: &[f64]) -> JointVector {
        JointVector::new(v.to_vec()).unwrap()
    }

    fn limits(n: usize, q: f64) -> KinematicLimits {
        let c = |v: f64| JointVector::new(vec![v; n]).unwrap();
        KinematicLimits::new(c(-q), c(q), c(2.0), c(10.0), c(400.0)).unwrap()
    }

    fn path_through(points: &[&[f64]], q_lim: f64) -> Result<GeometricPath> {
        let n = points[0].len();
        build_path(&WaypointPath::new(points.iter().map(|p| jv(p)).collect(), 0.0), &limits(n, q_lim))
    }

    #[test]
    fn two_waypoints_give_a_straight_segment() {
        let p = path_through(&[&[0.0], &[1.0]], 3.0).unwrap();
        assert_eq!(p.length(), 1.0);
        for i in 0..=10 {
            let s = i as f64 / 10.0;
            assert!((p.position(s)[0] - s).abs() < 1e-15);
        }
    }

    #[test]
    fn collinear_waypoints_give_a_line() {
        let p = path_through(&[&[0.0], &[1.0], &[2.0]], 3.0).unwrap();
        assert_eq!(p.knots(), &[0.0, 1.0, 2.0]);
        for i in 0..=20 {
            let pt = p.point(i as f64 / 10.0);
            assert!(pt.d2[0].abs() < 1e-12);
            assert!((pt.q[0] - i as f64 / 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spline_interpolates_and_is_twice_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let pts: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
            let p = path_through(&refs, 3.0).unwrap();
            for (k, s) in p.knots().iter().enumerate() {
                let q = p.position(*s);
                for j in 0..3 {
                    assert!((q[j] - pts[k][j]).abs() < 1e-10);
                }
            }
            let e = 1e-6;
            for &s in &p.knots()[1..4] {
                let (l, r) = (p.point(s - e), p.point(s + e));
                for j in 0..3 {
                    // one-sided difference quotients from each side agree
                    let d1l = (p.position(s)[j] - p.position(s - e)[j]) / e;
                    let d1r = (p.position(s + e)[j] - p.position(s)[j]) / e;
                    assert!((d1l - d1r).abs() < 1e-4);
                    assert!((l.d1[j] - r.d1[j]).abs() < 1e-4);
                    assert!((l.d2[j] - r.d2[j]).abs() < 1e-3 * (1.0 + l.d2[j].abs()));
                }
            }
            let ends = [p.point(0.0), p.point(p.length())];
            assert!(ends.iter().all(|pt| pt.d2.iter().all(|v| v.abs() < 1e-9)));
        }
    }

    #[test]
    fn duplicates_are_merged() {
        let p = path_through(&[&[0.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], &[1.0, 1e-12]], 3.0).unwrap();
        assert_eq!(p.waypoints().len(), 2);
        assert!(matches!(path_through(&[&[0.5, 0.5], &[0.5, 0.5]], 3.0), Err(Error::DegeneratePath)));
    }

    #[test]
    fn overshooting_segments_are_subdivided_into_limits() {
        // the natural spline through these bulges past 1.0 near the second waypoint
        let p = path_through(&[&[0.0], &[0.97], &[0.9], &[0.0]], 1.0).unwrap();
        assert!(p.waypoints().len() > 4);
        for i in 0..=1000 {
            let q = p.position(p.length() * i as f64 / 1000.0);
            assert!(q[0] <= 1.0 && q[0] >= -1.0);
        }
    }

    #[test]
    fn waypoint_on_the_limit_with_a_bulge_is_rejected() {
        let r = path_through(&[&[0.0], &[0.9], &[1.0], &[0.2]], 1.0);
        assert!(matches!(r, Err(Error::PathOutsideLimits)));
    }

    #[test]
    fn exact_bounds_dominate_dense_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Vec<f64>> = (0..6).map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let p = path_through(&refs, 3.0).unwrap();
        let ranges = p.joint_ranges();
        for i in 0..=10_000 {
            let s = p.length() * i as f64 / 10_000.0;
            let pt = p.point(s);
            let seg = p.knots()[1..p.segment_count()].partition_point(|k| *k <= s);
            for (j, b) in p.segment_bounds(seg).iter().enumerate() {
                assert!(pt.d1[j].abs() <= b.d1 + 1e-12);
                assert!(pt.d2[j].abs() <= b.d2 + 1e-12);
                assert!(pt.q[j] >= ranges[j].0 - 1e-12 && pt.q[j] <= ranges[j].1 + 1e-12);
            }
        }
    }

    #[test]
    fn travel_bound_dominates_sampled_travel() {
        let p = path_through(&[&[0.0, 0.0], &[0.5, 0.2], &[0.1, 0.9], &[-0.4, 0.3]], 3.0).unwrap();
        let (a, b) = (0.3, 1.4);
        let mut travel = [0.0f64; 2];
        let n = 10_000;
        let mut prev = p.position(a);
        for i in 1..=n {
            let q = p.position(a + (b - a) * i as f64 / n as f64);
            for j in 0..2 {
                travel[j] += (q[j] - prev[j]).abs();
            }
            prev = q;
        }
        let bound = p.travel_bound(a, b);
        assert!(bound >= travel[0].max(travel[1]));
        assert_eq!(p.travel_bound(b, a), bound);
    }

    #[test]
    fn distance_matches_dense_sampling() {
        let p = path_through(&[&[0.0, 0.0], &[0.5, 0.2], &[0.1, 0.9]], 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = [rng.random_range(-0.5..1.0), rng.random_range(-0.5..1.2)];
            let mut best = f64::INFINITY;
            for i in 0..=20_000 {
                let x = p.position(p.length() * i as f64 / 20_000.0);
                best = best.min(((x[0] - q[0]).powi(2) + (x[1] - q[1]).powi(2)).sqrt());
            }
            let d = p.distance_to(&q);
            assert!(d <= best + 1e-12 && d >= best - 1e-6);
        }
        let on = p.position(0.77);
        assert!(p.distance_to(&on) < 1e-9);
    }

    #[test]
    fn stationary_path_is_a_point() {
        let p = GeometricPath::stationary(jv(&[0.1, 0.2]));
        assert!(p.is_stationary());
        assert_eq!(p.position(5.0), vec![0.1, 0.2]);
        assert_eq!(p.travel_bound(0.0, 1.0), 0.0);
        assert!((p.distance_to(&[0.1, 1.2]) - 1.0).abs() < 1e-15);
    }
}
