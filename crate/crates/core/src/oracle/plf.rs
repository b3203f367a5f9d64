//! Continuous piecewise-linear functions of one variable on a closed interval.

/// Slack allowed when evaluating just outside the domain.
pub const DOMAIN_EPS: f64 = 1e-12;

/// Vertex representation; `xs` strictly increasing, at least one vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Plf {
    xs: Vec<f64>,
    vs: Vec<f64>,
}

impl Plf {
    /// Builds from vertices sorted by `x`. Points closer than 1e-15 collapse
    /// into one, keeping the lower value.
    pub fn from_vertices(pts: &[(f64, f64)]) -> Plf {
        assert!(!pts.is_empty(), "piecewise-linear function needs a vertex");
        let mut xs: Vec<f64> = Vec::with_capacity(pts.len());
        let mut vs: Vec<f64> = Vec::with_capacity(pts.len());
        for &(x, v) in pts {
            match xs.last() {
                Some(&last) if x - last <= 1e-15 => {
                    let i = vs.len() - 1;
                    vs[i] = vs[i].min(v);
                }
                _ => {
                    xs.push(x);
                    vs.push(v);
                }
            }
        }
        Plf { xs, vs }
    }

    pub fn constant(lo: f64, hi: f64, value: f64) -> Plf {
        Plf::from_vertices(&[(lo, value), (hi, value)])
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn vertices(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.vs.iter().copied())
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Value at `x`, or infinity outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        if x < lo - DOMAIN_EPS || x > hi + DOMAIN_EPS {
            return f64::INFINITY;
        }
        let x = x.clamp(lo, hi);
        let j = self.xs.partition_point(|&xi| xi < x);
        if j == 0 {
            return self.vs[0];
        }
        if j == self.xs.len() {
            return self.vs[j - 1];
        }
        let (x0, x1) = (self.xs[j - 1], self.xs[j]);
        let (v0, v1) = (self.vs[j - 1], self.vs[j]);
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }

    pub fn min_value(&self) -> f64 {
        self.vs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_convex(&self, tol: f64) -> bool {
        let slopes: Vec<f64> = self.segments().map(|(_, s)| s).collect();
        slopes.windows(2).all(|w| w[1] >= w[0] - tol * (1.0 + w[0].abs()))
    }

    /// `(length, slope)` of each segment.
    fn segments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.windows(2).zip(self.vs.windows(2)).map(|(x, v)| {
            let dx = x[1] - x[0];
            (dx, (v[1] - v[0]) / dx)
        })
    }

    /// Largest convex function below this one on the same domain.
    pub fn lower_hull(&self) -> Plf {
        let mut hull: Vec<(f64, f64)> = Vec::with_capacity(self.xs.len());
        for p in self.vertices() {
            while hull.len() >= 2 {
                let o = hull[hull.len() - 2];
                let a = hull[hull.len() - 1];
                let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
                if cross <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        Plf::from_vertices(&hull)
    }

    /// Infimal convolution `(f □ g)(x) = min_{y} f(y) + g(x - y)` of two
    /// convex functions: slopes merge in increasing order.
    pub fn inf_conv(&self, other: &Plf) -> Plf {
        let mut a = self.segments().peekable();
        let mut b = other.segments().peekable();
        let mut x = self.xs[0] + other.xs[0];
        let mut v = self.vs[0] + other.vs[0];
        let mut pts = Vec::with_capacity(self.len() + other.len());
        pts.push((x, v));
        let mut last_slope = f64::NEG_INFINITY;
        loop {
            let take_a = match (a.peek(), b.peek()) {
                (Some(sa), Some(sb)) => sa.1 <= sb.1,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            let (dx, slope) = if take_a { a.next() } else { b.next() }.unwrap();
            x += dx;
            v += dx * slope;
            // Fold equal slopes into one segment to keep vertex counts small.
            if pts.len() >= 2 && (slope - last_slope).abs() <= 1e-12 * (1.0 + slope.abs()) {
                *pts.last_mut().unwrap() = (x, v);
            } else {
                pts.push((x, v));
            }
            last_slope = slope;
        }
        Plf::from_vertices(&pts)
    }

    /// Restriction to `[lo, hi]`; `None` when the intervals do not meet.
    pub fn restrict(&self, lo: f64, hi: f64) -> Option<Plf> {
        let (dlo, dhi) = self.domain();
        let lo = lo.max(dlo);
        let hi = hi.min(dhi);
        if lo > hi + DOMAIN_EPS {
            return None;
        }
        let hi = hi.max(lo);
        let mut pts = vec![(lo, self.eval(lo))];
        pts.extend(self.vertices().filter(|&(x, _)| x > lo && x < hi));
        if hi > lo {
            pts.push((hi, self.eval(hi)));
        }
        Some(Plf::from_vertices(&pts))
    }
}
