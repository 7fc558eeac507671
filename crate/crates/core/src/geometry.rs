//! Charts for the underlying spaces and discrete fundamental-domain grids.
//!
//! The Heisenberg group is R^3 with product
//! (x, y, z) * (x', y', z') = (x + x', y + y', z + z' + x'y).
//! Left-invariant horizontal frame X = d/dx + y d/dz, Y = d/dy, vertical
//! Z = d/dz, so [X, Y] = -Z. The scale-k lattice Gamma_k is generated by
//! (k, 0, 0), (0, 1, 0), (0, 0, 1) acting on the left; the quotient
//! identifies (x, y, z) ~ (x + k, y, z) ~ (x, y + 1, z + x) ~ (x, y, z + 1)
//! and has volume k.

use std::fmt;

/// The circle R / (circumference Z) carrying a constant magnetic potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircleChart {
    pub circumference: f64,
}

impl CircleChart {
    pub fn new(circumference: f64) -> Result<Self, GeometryError> {
        if !(circumference > 0.0) || !circumference.is_finite() {
            return Err(GeometryError::BadCircumference { circumference });
        }
        Ok(CircleChart { circumference })
    }
}

impl Default for CircleChart {
    fn default() -> Self {
        CircleChart {
            circumference: 2.0 * std::f64::consts::PI,
        }
    }
}

/// The scaled flat torus: v has period k, w has period 1, area form dv^dw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusChart {
    pub k: u32,
}

impl TorusChart {
    pub fn new(k: u32) -> Result<Self, GeometryError> {
        if k == 0 {
            return Err(GeometryError::ZeroScale);
        }
        Ok(TorusChart { k })
    }

    pub fn volume(&self) -> f64 {
        self.k as f64
    }

    /// Reduce (v, w) into the fundamental domain [0, k) x [0, 1).
    pub fn reduce(&self, v: f64, w: f64) -> (f64, f64) {
        let k = self.k as f64;
        (v.rem_euclid(k), w.rem_euclid(1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NilmanifoldChart {
    pub k: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GeometryError {
    ZeroScale,
    BadCircumference { circumference: f64 },
    GridTooLarge { points: u64, limit: u64 },
    SeamMisaligned { nx: u32, k: u32, nz: u32 },
    ZeroResolution,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::ZeroScale => write!(f, "scale k must be positive"),
            GeometryError::BadCircumference { circumference } => {
                write!(f, "circle circumference must be positive, got {circumference}")
            }
            GeometryError::GridTooLarge { points, limit } => {
                write!(f, "grid has {points} points, exceeding the limit {limit}")
            }
            GeometryError::SeamMisaligned { nx, k, nz } => write!(
                f,
                "y-seam shear needs nx | k*nz: got nx = {nx}, k = {k}, nz = {nz}"
            ),
            GeometryError::ZeroResolution => write!(f, "grid resolution must be positive"),
        }
    }
}

impl std::error::Error for GeometryError {}

impl NilmanifoldChart {
    pub fn new(k: u32) -> Result<Self, GeometryError> {
        if k == 0 {
            return Err(GeometryError::ZeroScale);
        }
        Ok(NilmanifoldChart { k })
    }

    pub fn volume(&self) -> f64 {
        self.k as f64
    }

    /// Group product. The twist sits on the second factor's x.
    pub fn mul(p: [f64; 3], q: [f64; 3]) -> [f64; 3] {
        [p[0] + q[0], p[1] + q[1], p[2] + q[2] + q[0] * p[1]]
    }

    /// Group inverse: (x, y, z)^-1 = (-x, -y, xy - z).
    pub fn inv(p: [f64; 3]) -> [f64; 3] {
        [-p[0], -p[1], p[0] * p[1] - p[2]]
    }

    /// Reduce a point to the fundamental domain [0, k) x [0, 1) x [0, 1)
    /// by left multiplication with lattice elements.
    pub fn reduce(&self, p: [f64; 3]) -> [f64; 3] {
        let k = self.k as f64;
        let [mut x, mut y, mut z] = p;
        // (-k n1, 0, 0) on the left shifts x alone. (0, -n2, 0) shifts y
        // and drags z by -n2 x, x already reduced. (0, 0, -n3) shifts z
        // alone. The order x, y, z makes each step final.
        let n1 = (x / k).floor();
        x -= n1 * k;
        let n2 = y.floor();
        y -= n2;
        z -= n2 * x;
        let n3 = z.floor();
        z -= n3;
        [x, y, z]
    }

    /// Distance of q * p^-1 from the nearest lattice element, measured as
    /// the largest coordinate deviation (x deviation in units of k).
    /// Working on the group element avoids comparing fundamental-domain
    /// representatives, which can straddle the boundary.
    pub fn lattice_defect(&self, p: [f64; 3], q: [f64; 3]) -> f64 {
        let g = Self::mul(q, Self::inv(p));
        let k = self.k as f64;
        let frac = |t: f64| (t - t.round()).abs();
        frac(g[0] / k).max(frac(g[1])).max(frac(g[2]))
    }

    /// Whether q = gamma * p for some lattice element gamma, within tol.
    pub fn same_point(&self, p: [f64; 3], q: [f64; 3], tol: f64) -> bool {
        self.lattice_defect(p, q) <= tol
    }
}

/// One straight segment of a horizontal path: flow along the frame field
/// X or Y for a signed time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Leg {
    X(f64),
    Y(f64),
}

/// A piecewise horizontal path, started at a base point.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalLoop {
    pub base: [f64; 3],
    pub legs: Vec<Leg>,
}

impl HorizontalLoop {
    pub fn new(base: [f64; 3], legs: Vec<Leg>) -> Self {
        HorizontalLoop { base, legs }
    }

    /// Endpoint of the time-t flow of X from p: (x + t, y, z + ty).
    /// Y-flow: (x, y + t, z). Exact, the frame flows being affine.
    pub fn flow(p: [f64; 3], leg: Leg) -> [f64; 3] {
        match leg {
            Leg::X(t) => [p[0] + t, p[1], p[2] + t * p[1]],
            Leg::Y(t) => [p[0], p[1] + t, p[2]],
        }
    }

    pub fn endpoint(&self) -> [f64; 3] {
        self.legs.iter().fold(self.base, |p, &l| Self::flow(p, l))
    }

    /// Sample the path at `per_leg` points per leg, including both ends.
    /// Used by quadrature over loops.
    pub fn sample(&self, per_leg: usize) -> Vec<[f64; 3]> {
        let mut pts = vec![self.base];
        let mut p = self.base;
        for &leg in &self.legs {
            for s in 1..=per_leg {
                let frac = s as f64 / per_leg as f64;
                let partial = match leg {
                    Leg::X(t) => Leg::X(t * frac),
                    Leg::Y(t) => Leg::Y(t * frac),
                };
                pts.push(Self::flow(p, partial));
            }
            p = Self::flow(p, leg);
        }
        pts
    }

    /// Closed in the quotient: endpoint and base differ by a lattice element.
    pub fn is_closed(&self, chart: &NilmanifoldChart, tol: f64) -> bool {
        chart.same_point(self.base, self.endpoint(), tol)
    }
}

/// The two generator loops of the base-torus fundamental group, lifted
/// horizontally from the origin: flow X for time k, flow Y for time 1.
/// Both close (from the origin the lifts have no holonomy defect).
pub fn standard_generators(chart: &NilmanifoldChart) -> [HorizontalLoop; 2] {
    let o = [0.0; 3];
    [
        HorizontalLoop::new(o, vec![Leg::X(chart.k as f64)]),
        HorizontalLoop::new(o, vec![Leg::Y(1.0)]),
    ]
}

/// The square path [X-flow t, Y-flow t, X-flow -t, Y-flow -t]. Its endpoint
/// is (x, y, z - t^2): horizontal motion alone generates vertical
/// displacement. Closed in the quotient exactly when t^2 is an integer.
pub fn commutator_loop(base: [f64; 3], t: f64) -> HorizontalLoop {
    HorizontalLoop::new(base, vec![Leg::X(t), Leg::Y(t), Leg::X(-t), Leg::Y(-t)])
}

/// Refusal threshold on grid sizes; past this the sparse operator and the
/// eigensolver workspace stop fitting comfortably in memory.
pub const MAX_GRID_POINTS: u64 = 2_000_000;

/// Uniform grid over the fundamental domain of the scale-k nilmanifold:
/// nx * ny * nz points at (i hx, j hy, l hz), hx = k/nx, hy = 1/ny,
/// hz = 1/nz. Index layout: l fastest, then j, then i.
#[derive(Clone, Debug)]
pub struct FundamentalDomainGrid {
    pub chart: NilmanifoldChart,
    pub nx: u32,
    pub ny: u32,
    pub nz: u32,
}

impl FundamentalDomainGrid {
    pub fn new(chart: NilmanifoldChart, nx: u32, ny: u32, nz: u32) -> Result<Self, GeometryError> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(GeometryError::ZeroResolution);
        }
        let points = nx as u64 * ny as u64 * nz as u64;
        if points > MAX_GRID_POINTS {
            return Err(GeometryError::GridTooLarge {
                points,
                limit: MAX_GRID_POINTS,
            });
        }
        // The y-seam identification (x, y+1, z+x) shifts z by x, which at
        // x-index i is i*k/nx in length units and i*k*nz/nx in z-cells.
        // Integer for every i exactly when nx | k*nz.
        if (chart.k as u64 * nz as u64) % nx as u64 != 0 {
            return Err(GeometryError::SeamMisaligned {
                nx,
                k: chart.k,
                nz,
            });
        }
        Ok(FundamentalDomainGrid { chart, nx, ny, nz })
    }

    pub fn len(&self) -> usize {
        self.nx as usize * self.ny as usize * self.nz as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hx(&self) -> f64 {
        self.chart.k as f64 / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        1.0 / self.ny as f64
    }

    pub fn hz(&self) -> f64 {
        1.0 / self.nz as f64
    }

    /// z-cells the seam shear moves per unit x-index. Exact by the
    /// constructor check.
    pub fn shear_units(&self) -> i64 {
        self.chart.k as i64 * self.nz as i64 / self.nx as i64
    }

    pub fn index(&self, i: u32, j: u32, l: u32) -> usize {
        ((i as usize * self.ny as usize) + j as usize) * self.nz as usize + l as usize
    }

    pub fn point(&self, i: u32, j: u32, l: u32) -> [f64; 3] {
        [
            i as f64 * self.hx(),
            j as f64 * self.hy(),
            l as f64 * self.hz(),
        ]
    }

    /// Index of the grid point identified with logical position
    /// (i + di, j + dj, l + dl). Crossing the y-boundary upward once maps
    /// (x, y+1, z) to (x, y, z-x), a z-index shift of -i * shear_units;
    /// x and z boundaries wrap plainly. Shifting i by nx changes the shear
    /// by a multiple of k*nz, invisible mod nz, so the wrapped i serves.
    pub fn wrap3(&self, i: i64, j: i64, l: i64) -> usize {
        let nx = self.nx as i64;
        let ny = self.ny as i64;
        let nz = self.nz as i64;
        let iw = i.rem_euclid(nx);
        let jq = j.div_euclid(ny);
        let jw = j.rem_euclid(ny);
        let lw = (l - jq * iw * self.shear_units()).rem_euclid(nz);
        self.index(iw as u32, jw as u32, lw as u32)
    }
}

/// Uniform grid over the scale-k torus fundamental domain [0, k) x [0, 1):
/// nv * nw points, w-index fastest.
#[derive(Clone, Copy, Debug)]
pub struct TorusGrid {
    pub chart: TorusChart,
    pub nv: u32,
    pub nw: u32,
}

impl TorusGrid {
    pub fn new(chart: TorusChart, nv: u32, nw: u32) -> Result<Self, GeometryError> {
        if nv == 0 || nw == 0 {
            return Err(GeometryError::ZeroResolution);
        }
        let points = nv as u64 * nw as u64;
        if points > MAX_GRID_POINTS {
            return Err(GeometryError::GridTooLarge {
                points,
                limit: MAX_GRID_POINTS,
            });
        }
        Ok(TorusGrid { chart, nv, nw })
    }

    pub fn len(&self) -> usize {
        self.nv as usize * self.nw as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hv(&self) -> f64 {
        self.chart.k as f64 / self.nv as f64
    }

    pub fn hw(&self) -> f64 {
        1.0 / self.nw as f64
    }

    pub fn index(&self, i: u32, j: u32) -> usize {
        i as usize * self.nw as usize + j as usize
    }

    pub fn point(&self, i: u32, j: u32) -> (f64, f64) {
        (i as f64 * self.hv(), j as f64 * self.hw())
    }

    pub fn wrap(&self, i: i64, j: i64) -> usize {
        let iw = i.rem_euclid(self.nv as i64) as u32;
        let jw = j.rem_euclid(self.nw as i64) as u32;
        self.index(iw, jw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_axioms_spot_checks() {
        let p = [1.5, -0.3, 2.0];
        let q = [0.7, 1.1, -0.4];
        let r = [-2.0, 0.5, 0.9];
        let assoc_l = NilmanifoldChart::mul(NilmanifoldChart::mul(p, q), r);
        let assoc_r = NilmanifoldChart::mul(p, NilmanifoldChart::mul(q, r));
        for c in 0..3 {
            assert!((assoc_l[c] - assoc_r[c]).abs() < 1e-12);
        }
        for e in [
            NilmanifoldChart::mul(p, NilmanifoldChart::inv(p)),
            NilmanifoldChart::mul(NilmanifoldChart::inv(p), p),
        ] {
            for c in 0..3 {
                assert!(e[c].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lattice_identifications_match_left_action() {
        // gamma = (0,1,0): (x, y+1, z+x). gamma = (k,0,0): (x+k, y, z).
        let y_wrap = NilmanifoldChart::mul([0.0, 1.0, 0.0], [0.3, 0.2, 0.9]);
        assert_eq!(y_wrap, [0.3, 1.2, 1.2]);
        let x_wrap = NilmanifoldChart::mul([2.0, 0.0, 0.0], [0.3, 0.25, 0.1]);
        assert_eq!(x_wrap, [2.3, 0.25, 0.1]);
    }

    #[test]
    fn commutator_endpoint_is_vertical() {
        let lp = commutator_loop([0.2, 0.4, 0.1], 0.5);
        let end = lp.endpoint();
        assert!((end[0] - 0.2).abs() < 1e-15);
        assert!((end[1] - 0.4).abs() < 1e-15);
        assert!((end[2] - (0.1 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn commutator_endpoint_matches_group_commutator() {
        // Flowing X then Y then back is right multiplication by
        // a c a^-1 c^-1 with a = exp(tX) = (t,0,0), c = exp(tY) = (0,t,0).
        let t = 0.37;
        let a = [t, 0.0, 0.0];
        let c = [0.0, t, 0.0];
        let m = NilmanifoldChart::mul;
        let comm = m(
            m(m(a, c), NilmanifoldChart::inv(a)),
            NilmanifoldChart::inv(c),
        );
        assert!(comm[0].abs() < 1e-15 && comm[1].abs() < 1e-15);
        assert!((comm[2] + t * t).abs() < 1e-15);
        let base = [0.9, -0.2, 0.5];
        let end = commutator_loop(base, t).endpoint();
        let expect = m(base, comm);
        for i in 0..3 {
            assert!((end[i] - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_flow_is_right_exp_translation() {
        let p = [0.8, -1.4, 0.3];
        let t = 0.61;
        let via_flow = HorizontalLoop::flow(p, Leg::X(t));
        let via_group = NilmanifoldChart::mul(p, [t, 0.0, 0.0]);
        for i in 0..3 {
            assert!((via_flow[i] - via_group[i]).abs() < 1e-15);
        }
        let via_flow = HorizontalLoop::flow(p, Leg::Y(t));
        let via_group = NilmanifoldChart::mul(p, [0.0, t, 0.0]);
        for i in 0..3 {
            assert!((via_flow[i] - via_group[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn generator_loops_close() {
        for k in [1u32, 3] {
            let chart = NilmanifoldChart::new(k).unwrap();
            let [g1, g2] = standard_generators(&chart);
            assert_eq!(g1.endpoint(), [k as f64, 0.0, 0.0]);
            assert!(g1.is_closed(&chart, 1e-12));
            assert!(g2.is_closed(&chart, 1e-12));
        }
    }

    #[test]
    fn half_x_loop_open_commutator_closure_depends_on_height() {
        let chart = NilmanifoldChart::new(2).unwrap();
        let half = HorizontalLoop::new([0.0; 3], vec![Leg::X(1.0)]);
        assert!(!half.is_closed(&chart, 1e-9));
        // t^2 = 1/2: vertical drop not a lattice translation.
        assert!(!commutator_loop([0.4, 0.7, 0.2], 0.5_f64.sqrt()).is_closed(&chart, 1e-9));
        // t = 1: drop of exactly one z-period.
        assert!(commutator_loop([0.4, 0.7, 0.2], 1.0).is_closed(&chart, 1e-12));
    }

    #[test]
    fn off_origin_lifts_feel_holonomy() {
        // The y-circle lift from x0 = 1.3 ends a nonintegral z-shift away.
        let chart = NilmanifoldChart::new(2).unwrap();
        let lp = HorizontalLoop::new([1.3, 0.0, 0.4], vec![Leg::Y(1.0)]);
        assert!(!lp.is_closed(&chart, 1e-6));
        // From integer x0 the shift is a whole z-period.
        let lp = HorizontalLoop::new([1.0, 0.0, 0.4], vec![Leg::Y(1.0)]);
        assert!(lp.is_closed(&chart, 1e-12));
        // The x-circle lift from y0 = 1/4 with k = 2 climbs by k y0 = 1/2.
        let lp = HorizontalLoop::new([0.0, 0.25, 0.0], vec![Leg::X(2.0)]);
        assert!(!lp.is_closed(&chart, 1e-6));
        // k y0 = 1 at y0 = 1/2: closed.
        let lp = HorizontalLoop::new([0.0, 0.5, 0.0], vec![Leg::X(2.0)]);
        assert!(lp.is_closed(&chart, 1e-12));
    }

    #[test]
    fn reduce_lands_in_fundamental_domain() {
        let chart = NilmanifoldChart::new(4).unwrap();
        let p = [9.5, -1.25, 7.75];
        let r = chart.reduce(p);
        assert!((0.0..4.0).contains(&r[0]));
        assert!((0.0..1.0).contains(&r[1]));
        assert!((0.0..1.0).contains(&r[2]));
        assert!(chart.same_point(p, r, 1e-12));
        // x reduces first, so the y-step shear uses the reduced x = 1.5:
        // z goes 7.75 - (-2)(1.5) = 10.75, then drops to 0.75.
        assert_eq!(r, [1.5, 0.75, 0.75]);
    }

    #[test]
    fn same_point_respects_shear_identification() {
        let chart = NilmanifoldChart::new(2).unwrap();
        assert!(chart.same_point([0.3, 0.2, 0.9], [0.3, 1.2, 1.2], 1e-12));
        assert!(!chart.same_point([0.3, 0.2, 0.9], [0.3, 1.2, 0.9], 1e-6));
        assert!(chart.same_point([0.3, 0.25, 0.1], [2.3, 0.25, 0.1], 1e-12));
        // Boundary straddle: near-identical points on either side of y = 0.
        assert!(chart.same_point([0.5, -1e-13, 0.3], [0.5, 1e-13, 0.3], 1e-9));
    }

    #[test]
    fn grid_wrap_plain_directions() {
        let chart = NilmanifoldChart::new(2).unwrap();
        let g = FundamentalDomainGrid::new(chart, 8, 4, 4).unwrap();
        assert_eq!(g.wrap3(8, 1, 2), g.index(0, 1, 2));
        assert_eq!(g.wrap3(-1, 0, 0), g.index(7, 0, 0));
        assert_eq!(g.wrap3(3, 1, -1), g.index(3, 1, 3));
    }

    #[test]
    fn grid_wrap_y_seam_shears_z() {
        // k = 2, nx = 8, nz = 4: shear is 1 z-cell per x-index.
        let chart = NilmanifoldChart::new(2).unwrap();
        let g = FundamentalDomainGrid::new(chart, 8, 4, 4).unwrap();
        assert_eq!(g.shear_units(), 1);
        assert_eq!(g.wrap3(3, 4, 2), g.index(3, 0, 3));
        assert_eq!(g.wrap3(3, -1, 0), g.index(3, 3, 3));
        // Two full wraps shear twice.
        assert_eq!(g.wrap3(2, 8, 0), g.index(2, 0, 0));
    }

    #[test]
    fn grid_wrap_round_trip_through_seam() {
        let chart = NilmanifoldChart::new(2).unwrap();
        let g = FundamentalDomainGrid::new(chart, 4, 3, 4).unwrap();
        let s = g.shear_units();
        for i in 0..4u32 {
            for j in 0..3u32 {
                for l in 0..4u32 {
                    // Crossing the seam upward and compensating the shear
                    // restores the index.
                    let up = g.wrap3(i as i64, j as i64 + 3, l as i64 + i as i64 * s);
                    assert_eq!(up, g.index(i, j, l));
                }
            }
        }
    }

    #[test]
    fn grid_point_identification_consistency() {
        // wrap3 and the chart agree: the wrapped index addresses a point
        // identified with the logical one.
        let chart = NilmanifoldChart::new(2).unwrap();
        let g = FundamentalDomainGrid::new(chart, 8, 4, 4).unwrap();
        let logical = |i: i64, j: i64, l: i64| {
            [
                i as f64 * g.hx(),
                j as f64 * g.hy(),
                l as f64 * g.hz(),
            ]
        };
        for (i, j, l) in [(3, 4, 2), (7, -2, 0), (-3, 9, -5)] {
            let wrapped = g.wrap3(i, j, l);
            let (iw, jw, lw) = (
                wrapped / (g.ny as usize * g.nz as usize),
                (wrapped / g.nz as usize) % g.ny as usize,
                wrapped % g.nz as usize,
            );
            let p = g.point(iw as u32, jw as u32, lw as u32);
            assert!(chart.same_point(logical(i, j, l), p, 1e-12));
        }
    }

    #[test]
    fn grid_seam_check_rejects_misaligned() {
        let chart = NilmanifoldChart::new(3).unwrap();
        // k*nz = 12, nx = 8 does not divide it.
        assert!(matches!(
            FundamentalDomainGrid::new(chart, 8, 4, 4),
            Err(GeometryError::SeamMisaligned { .. })
        ));
        assert!(FundamentalDomainGrid::new(chart, 12, 4, 4).is_ok());
    }

    #[test]
    fn grid_size_guard() {
        let chart = NilmanifoldChart::new(1).unwrap();
        assert!(matches!(
            FundamentalDomainGrid::new(chart, 200, 200, 200),
            Err(GeometryError::GridTooLarge { .. })
        ));
    }

    #[test]
    fn circle_chart_validation() {
        assert!(CircleChart::new(1.0).is_ok());
        assert!(CircleChart::new(0.0).is_err());
        assert!(CircleChart::new(-2.0).is_err());
        let d = CircleChart::default();
        assert!((d.circumference - 2.0 * std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn torus_grid_layout() {
        let chart = TorusChart::new(3).unwrap();
        let g = TorusGrid::new(chart, 6, 4).unwrap();
        assert_eq!(g.len(), 24);
        assert!((g.hv() - 0.5).abs() < 1e-15);
        assert_eq!(g.wrap(6, 0), g.index(0, 0));
        assert_eq!(g.wrap(-1, 5), g.index(5, 1));
        let (v, w) = g.point(3, 2);
        assert!((v - 1.5).abs() < 1e-15 && (w - 0.5).abs() < 1e-15);
    }
}
