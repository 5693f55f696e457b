//! Structured 1D/2D grids with node classification, boundary components,
//! outward normals and distance-to-boundary fields.
//!
//! Curved shapes are realized on a masked square lattice. A lattice node is
//! interior when its signed distance to the continuous boundary exceeds
//! `h/2`; non-interior nodes touching an interior node through the
//! 8-neighbourhood are boundary nodes; everything else is exterior.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Boundary,
    Exterior,
}

/// Explicit node classes on a rectangular lattice, as read from a mask file.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSpec {
    pub nx: usize,
    pub ny: usize,
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    /// Row-major, 0 = exterior, 1 = interior, 2 = boundary.
    pub classes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Interval { x0: f64, length: f64 },
    Rectangle { origin: [f64; 2], lx: f64, ly: f64 },
    Disk { center: [f64; 2], radius: f64 },
    Annulus { center: [f64; 2], r_inner: f64, r_outer: f64 },
    Mask(MaskSpec),
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::Interval { .. } => "interval",
            Shape::Rectangle { .. } => "rectangle",
            Shape::Disk { .. } => "disk",
            Shape::Annulus { .. } => "annulus",
            Shape::Mask(_) => "mask",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub shape: Shape,
    /// Multiplies every length of the shape, including its position.
    pub scale: f64,
}

impl DomainSpec {
    pub fn new(shape: Shape) -> Self {
        DomainSpec { shape, scale: 1.0 }
    }

    pub fn interval(length: f64) -> Self {
        Self::new(Shape::Interval { x0: 0.0, length })
    }

    pub fn rectangle(lx: f64, ly: f64) -> Self {
        Self::new(Shape::Rectangle { origin: [0.0, 0.0], lx, ly })
    }

    pub fn square(side: f64) -> Self {
        Self::rectangle(side, side)
    }

    pub fn disk(radius: f64) -> Self {
        Self::new(Shape::Disk { center: [0.0, 0.0], radius })
    }

    pub fn annulus(r_inner: f64, r_outer: f64) -> Self {
        Self::new(Shape::Annulus { center: [0.0, 0.0], r_inner, r_outer })
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn dimension(&self) -> usize {
        match self.shape {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidDomain(m.into()));
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad("scale must be positive");
        }
        match &self.shape {
            Shape::Interval { x0, length } => {
                if !(*length > 0.0 && length.is_finite() && x0.is_finite()) {
                    return bad("interval length must be positive");
                }
            }
            Shape::Rectangle { origin, lx, ly } => {
                if !(*lx > 0.0 && *ly > 0.0 && lx.is_finite() && ly.is_finite()) {
                    return bad("rectangle side lengths must be positive");
                }
                if !(origin[0].is_finite() && origin[1].is_finite()) {
                    return bad("rectangle origin must be finite");
                }
            }
            Shape::Disk { center, radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return bad("disk radius must be positive");
                }
                if !(center[0].is_finite() && center[1].is_finite()) {
                    return bad("disk center must be finite");
                }
            }
            Shape::Annulus { center, r_inner, r_outer } => {
                if !(*r_inner > 0.0 && r_inner < r_outer && r_outer.is_finite()) {
                    return bad("annulus requires 0 < r_inner < r_outer");
                }
                if !(center[0].is_finite() && center[1].is_finite()) {
                    return bad("annulus center must be finite");
                }
            }
            Shape::Mask(m) => {
                if m.nx < 3 || m.ny < 1 {
                    return bad("mask needs at least 3 columns");
                }
                if m.classes.len() != m.nx * m.ny {
                    return bad("mask class count does not match nx*ny");
                }
                if m.classes.iter().any(|&c| c > 2) {
                    return bad("mask classes must be 0, 1 or 2");
                }
                if !(m.xmax > m.xmin) || (m.ny > 1 && !(m.ymax > m.ymin)) {
                    return bad("mask bounds must be increasing");
                }
            }
        }
        Ok(())
    }

    /// The shape with `scale` folded into every length.
    pub fn scaled_shape(&self) -> Shape {
        let t = self.scale;
        match &self.shape {
            Shape::Interval { x0, length } => Shape::Interval { x0: t * x0, length: t * length },
            Shape::Rectangle { origin, lx, ly } => Shape::Rectangle {
                origin: [t * origin[0], t * origin[1]],
                lx: t * lx,
                ly: t * ly,
            },
            Shape::Disk { center, radius } => Shape::Disk {
                center: [t * center[0], t * center[1]],
                radius: t * radius,
            },
            Shape::Annulus { center, r_inner, r_outer } => Shape::Annulus {
                center: [t * center[0], t * center[1]],
                r_inner: t * r_inner,
                r_outer: t * r_outer,
            },
            Shape::Mask(m) => Shape::Mask(MaskSpec {
                xmin: t * m.xmin,
                xmax: t * m.xmax,
                ymin: t * m.ymin,
                ymax: t * m.ymax,
                ..m.clone()
            }),
        }
    }
}

/// Immutable discrete domain.
#[derive(Debug, Clone)]
pub struct Grid {
    nx: usize,
    ny: usize,
    origin: [f64; 2],
    h: f64,
    shape: Shape,
    class: Vec<NodeClass>,
    interior: Vec<usize>,
    compact: Vec<usize>,
    labels: Vec<i32>,
    components: usize,
    normals: Vec<[f64; 2]>,
    distance: Vec<f64>,
    diameter: f64,
    tag: u64,
}

/// Marker for nodes without a compact interior index.
pub const NOT_INTERIOR: usize = usize::MAX;

/// Builds the grid for `spec` at resolution `n`.
///
/// `n` counts intervals across the characteristic length: the interval
/// length, the longer rectangle side, or the outer diameter of a disk or
/// annulus. Mask domains carry their own lattice and ignore `n`.
pub fn build_domain(spec: &DomainSpec, n: usize) -> Result<Grid> {
    spec.validate()?;
    if n < 4 {
        return Err(Error::InvalidDomain(format!("resolution n = {n} is below 4")));
    }
    // Built at unit scale and rescaled, so that classification does not
    // depend on the scale and h, d and the diameter scale exactly.
    let shape = spec.shape.clone();
    let g = match &shape {
        Shape::Interval { x0, length } => {
            let h = length / n as f64;
            let (x0, l) = (*x0, *length);
            Grid::from_signed_distance(shape.clone(), n + 1, 1, [x0, 0.0], h, |p| {
                (p[0] - x0).min(x0 + l - p[0])
            })
        }
        Shape::Rectangle { origin, lx, ly } => {
            let h = lx.max(*ly) / n as f64;
            let ix = (math::round(lx / h) as usize).max(2);
            let iy = (math::round(ly / h) as usize).max(2);
            let (x0, y0) = (origin[0], origin[1]);
            let (x1, y1) = (x0 + ix as f64 * h, y0 + iy as f64 * h);
            Grid::from_signed_distance(shape.clone(), ix + 1, iy + 1, *origin, h, |p| {
                (p[0] - x0).min(x1 - p[0]).min(p[1] - y0).min(y1 - p[1])
            })
        }
        Shape::Disk { center, radius } => {
            let (c, r) = (*center, *radius);
            let h = 2.0 * r / n as f64;
            let origin = [c[0] - r - h, c[1] - r - h];
            Grid::from_signed_distance(shape.clone(), n + 3, n + 3, origin, h, |p| {
                r - math::hypot(p[0] - c[0], p[1] - c[1])
            })
        }
        Shape::Annulus { center, r_inner, r_outer } => {
            let (c, ri, ro) = (*center, *r_inner, *r_outer);
            let h = 2.0 * ro / n as f64;
            let origin = [c[0] - ro - h, c[1] - ro - h];
            Grid::from_signed_distance(shape.clone(), n + 3, n + 3, origin, h, |p| {
                let r = math::hypot(p[0] - c[0], p[1] - c[1]);
                (r - ri).min(ro - r)
            })
        }
        Shape::Mask(m) => Grid::from_mask(shape.clone(), m),
    }?;
    Ok(if spec.scale == 1.0 { g } else { g.rescaled(spec.scale, spec.scaled_shape()) })
}

/// Distance to the boundary: exact for analytic shapes, brute force to the
/// boundary nodes for masks. Zero on boundary nodes, sentinel outside.
pub fn distance_field(g: &Grid) -> ScalarField {
    ScalarField { values: g.distance.clone(), tag: g.tag }
}

impl Grid {
    fn from_signed_distance(
        shape: Shape,
        nx: usize,
        ny: usize,
        origin: [f64; 2],
        h: f64,
        sd: impl Fn([f64; 2]) -> f64,
    ) -> Result<Grid> {
        let total = nx * ny;
        let coord = |i: usize| [origin[0] + (i % nx) as f64 * h, origin[1] + (i / nx) as f64 * h];
        let signed: Vec<f64> = (0..total).map(|i| sd(coord(i))).collect();
        let interior_flag: Vec<bool> = signed.iter().map(|&s| s > 0.5 * h).collect();
        let mut class = vec![NodeClass::Exterior; total];
        for i in 0..total {
            if interior_flag[i] {
                class[i] = NodeClass::Interior;
            }
        }
        let mut g = Grid::skeleton(shape, nx, ny, origin, h, class);
        for i in 0..total {
            if g.class[i] != NodeClass::Interior
                && g.neighbourhood(i).any(|j| g.class[j] == NodeClass::Interior)
            {
                g.class[i] = NodeClass::Boundary;
            }
        }
        g.check_stencil_closure()?;
        g.distance = (0..total)
            .map(|i| match g.class[i] {
                NodeClass::Interior => signed[i],
                NodeClass::Boundary => 0.0,
                NodeClass::Exterior => f64::NAN,
            })
            .collect();
        g.finish()
    }

    fn from_mask(shape: Shape, m: &MaskSpec) -> Result<Grid> {
        let h = (m.xmax - m.xmin) / (m.nx - 1) as f64;
        if m.ny > 1 {
            let hy = (m.ymax - m.ymin) / (m.ny - 1) as f64;
            if math::abs(hy - h) > 1e-9 * h {
                return Err(Error::InvalidDomain(format!(
                    "mask spacing must be square (hx = {h}, hy = {hy})"
                )));
            }
        }
        let class = m
            .classes
            .iter()
            .map(|&c| match c {
                1 => NodeClass::Interior,
                2 => NodeClass::Boundary,
                _ => NodeClass::Exterior,
            })
            .collect();
        let mut g = Grid::skeleton(shape, m.nx, m.ny, [m.xmin, m.ymin], h, class);
        g.check_stencil_closure()?;
        let boundary: Vec<usize> = g.boundary_nodes().collect();
        g.distance = (0..g.len())
            .map(|i| match g.class[i] {
                NodeClass::Interior => boundary
                    .iter()
                    .map(|&b| g.dist(i, b))
                    .fold(f64::INFINITY, f64::min),
                NodeClass::Boundary => 0.0,
                NodeClass::Exterior => f64::NAN,
            })
            .collect();
        g.finish()
    }

    fn skeleton(
        shape: Shape,
        nx: usize,
        ny: usize,
        origin: [f64; 2],
        h: f64,
        class: Vec<NodeClass>,
    ) -> Grid {
        let total = nx * ny;
        Grid {
            nx,
            ny,
            origin,
            h,
            shape,
            class,
            interior: Vec::new(),
            compact: vec![NOT_INTERIOR; total],
            labels: vec![-1; total],
            components: 0,
            normals: vec![[0.0, 0.0]; total],
            distance: Vec::new(),
            diameter: 0.0,
            tag: 0,
        }
    }

    fn check_stencil_closure(&self) -> Result<()> {
        for i in 0..self.len() {
            if self.class[i] != NodeClass::Interior {
                continue;
            }
            let (ix, iy) = (i % self.nx, i / self.nx);
            let on_edge = ix == 0 || ix + 1 == self.nx || (self.ny > 1 && (iy == 0 || iy + 1 == self.ny));
            if on_edge || self.neighbourhood(i).any(|j| self.class[j] == NodeClass::Exterior) {
                return Err(Error::InvalidDomain(format!(
                    "interior node {i} has a stencil neighbour outside the domain"
                )));
            }
        }
        Ok(())
    }

    fn rescaled(mut self, t: f64, shape: Shape) -> Grid {
        self.h *= t;
        self.origin = [t * self.origin[0], t * self.origin[1]];
        for d in &mut self.distance {
            *d *= t;
        }
        self.diameter *= t;
        self.shape = shape;
        self.tag = self.fingerprint();
        self
    }

    fn finish(mut self) -> Result<Grid> {
        self.interior = (0..self.len()).filter(|&i| self.class[i] == NodeClass::Interior).collect();
        if self.interior.is_empty() {
            return Err(Error::InvalidDomain("domain has no interior nodes at this resolution".into()));
        }
        for (k, &i) in self.interior.iter().enumerate() {
            self.compact[i] = k;
        }
        let (labels, count) = self.label_boundary(0..self.len());
        self.labels = labels;
        self.components = count;
        self.normals = self.compute_normals();
        let boundary: Vec<usize> = self.boundary_nodes().collect();
        let mut diam: f64 = 0.0;
        for (k, &a) in boundary.iter().enumerate() {
            for &b in &boundary[k + 1..] {
                diam = diam.max(self.dist(a, b));
            }
        }
        self.diameter = diam;
        self.tag = self.fingerprint();
        Ok(self)
    }

    /// Labels boundary components, visiting start nodes in `order`. Labels
    /// are renumbered by the smallest node index in each component, so the
    /// result does not depend on the visiting order.
    pub(crate) fn label_boundary(&self, order: impl Iterator<Item = usize>) -> (Vec<i32>, usize) {
        let mut labels = vec![-1i32; self.len()];
        let mut first_node = Vec::new();
        let mut queue = VecDeque::new();
        for start in order {
            if self.class[start] != NodeClass::Boundary || labels[start] >= 0 {
                continue;
            }
            let label = first_node.len() as i32;
            let mut min_node = start;
            labels[start] = label;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                min_node = min_node.min(i);
                for j in self.neighbourhood(i) {
                    if self.class[j] == NodeClass::Boundary && labels[j] < 0 {
                        labels[j] = label;
                        queue.push_back(j);
                    }
                }
            }
            first_node.push(min_node);
        }
        let mut rank: Vec<usize> = (0..first_node.len()).collect();
        rank.sort_by_key(|&k| first_node[k]);
        let mut remap = vec![0i32; first_node.len()];
        for (new, &old) in rank.iter().enumerate() {
            remap[old] = new as i32;
        }
        for l in labels.iter_mut() {
            if *l >= 0 {
                *l = remap[*l as usize];
            }
        }
        (labels, first_node.len())
    }

    fn compute_normals(&self) -> Vec<[f64; 2]> {
        let mut normals = vec![[0.0, 0.0]; self.len()];
        let h = self.h;
        for i in self.boundary_nodes() {
            let p = self.coord(i);
            let n = match &self.shape {
                Shape::Interval { x0, length } => {
                    if p[0] - x0 <= x0 + length - p[0] {
                        [-1.0, 0.0]
                    } else {
                        [1.0, 0.0]
                    }
                }
                Shape::Rectangle { origin, .. } => {
                    let x1 = origin[0] + (self.nx - 1) as f64 * h;
                    let y1 = origin[1] + (self.ny - 1) as f64 * h;
                    let tol = 0.5 * h;
                    let mut n = [0.0, 0.0];
                    if p[0] - origin[0] <= tol {
                        n[0] -= 1.0;
                    }
                    if x1 - p[0] <= tol {
                        n[0] += 1.0;
                    }
                    if p[1] - origin[1] <= tol {
                        n[1] -= 1.0;
                    }
                    if y1 - p[1] <= tol {
                        n[1] += 1.0;
                    }
                    n
                }
                Shape::Disk { center, .. } => [p[0] - center[0], p[1] - center[1]],
                Shape::Annulus { center, r_inner, r_outer } => {
                    let v = [p[0] - center[0], p[1] - center[1]];
                    let r = math::hypot(v[0], v[1]);
                    if r - r_inner < r_outer - r {
                        [-v[0], -v[1]]
                    } else {
                        v
                    }
                }
                Shape::Mask(_) => self.mask_normal(i),
            };
            let len = math::hypot(n[0], n[1]);
            normals[i] = if len > 0.0 { [n[0] / len, n[1] / len] } else { [0.0, 0.0] };
        }
        normals
    }

    /// Minus the central-difference gradient of the distance field, falling
    /// back to one-sided differences next to exterior nodes.
    fn mask_normal(&self, i: usize) -> [f64; 2] {
        let d = &self.distance;
        let mut g = [0.0; 2];
        for (axis, (dx, dy)) in [(1isize, 0isize), (0, 1)].into_iter().enumerate() {
            let fwd = self.neighbor(i, dx, dy).map(|j| d[j]).filter(|v| !v.is_nan());
            let bwd = self.neighbor(i, -dx, -dy).map(|j| d[j]).filter(|v| !v.is_nan());
            g[axis] = match (fwd, bwd) {
                (Some(f), Some(b)) => (f - b) / (2.0 * self.h),
                (Some(f), None) => (f - d[i]) / self.h,
                (None, Some(b)) => (d[i] - b) / self.h,
                (None, None) => 0.0,
            };
        }
        if g[0] == 0.0 && g[1] == 0.0 {
            let mut n = [0.0, 0.0];
            for j in self.neighbourhood(i) {
                if self.class[j] == NodeClass::Interior {
                    let (p, q) = (self.coord(i), self.coord(j));
                    n[0] += p[0] - q[0];
                    n[1] += p[1] - q[1];
                }
            }
            return n;
        }
        [-g[0], -g[1]]
    }

    fn fingerprint(&self) -> u64 {
        const PRIME: u64 = 0x100_0000_01b3;
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                hash ^= b as u64;
                hash = hash.wrapping_mul(PRIME);
            }
        };
        eat(self.nx as u64);
        eat(self.ny as u64);
        eat(self.origin[0].to_bits());
        eat(self.origin[1].to_bits());
        eat(self.h.to_bits());
        for c in &self.class {
            eat(*c as u64);
        }
        hash
    }

    fn dist(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.coord(a), self.coord(b));
        math::hypot(p[0] - q[0], p[1] - q[1])
    }

    /// Existing lattice neighbours within the 8-neighbourhood (2 in 1D).
    pub(crate) fn neighbourhood(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        const OFFSETS: [(isize, isize); 8] =
            [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
        let one_d = self.ny == 1;
        OFFSETS
            .iter()
            .filter(move |(_, dy)| !one_d || *dy == 0)
            .filter_map(move |&(dx, dy)| self.neighbor(i, dx, dy))
    }

    /// Node index at lattice offset `(dx, dy)` from `i`, if it exists.
    #[inline]
    pub fn neighbor(&self, i: usize, dx: isize, dy: isize) -> Option<usize> {
        let ix = (i % self.nx) as isize + dx;
        let iy = (i / self.nx) as isize + dy;
        if ix < 0 || iy < 0 || ix >= self.nx as isize || iy >= self.ny as isize {
            None
        } else {
            Some(iy as usize * self.nx + ix as usize)
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dimension(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Lattice bounding box `[xmin, xmax, ymin, ymax]`.
    pub fn bounds(&self) -> [f64; 4] {
        let o = self.origin;
        [o[0], o[0] + (self.nx - 1) as f64 * self.h, o[1], o[1] + (self.ny - 1) as f64 * self.h]
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    #[inline]
    pub fn coord(&self, i: usize) -> [f64; 2] {
        [
            self.origin[0] + (i % self.nx) as f64 * self.h,
            self.origin[1] + (i / self.nx) as f64 * self.h,
        ]
    }

    #[inline]
    pub fn class(&self, i: usize) -> NodeClass {
        self.class[i]
    }

    #[inline]
    pub fn is_interior(&self, i: usize) -> bool {
        self.class[i] == NodeClass::Interior
    }

    /// Interior node indices in row-major order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Position of node `i` in [`Grid::interior`], or [`NOT_INTERIOR`].
    #[inline]
    pub fn compact_index(&self, i: usize) -> usize {
        self.compact[i]
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.class[i] == NodeClass::Boundary)
    }

    /// Boundary component label of node `i` (`None` off the boundary).
    pub fn label(&self, i: usize) -> Option<usize> {
        let l = self.labels[i];
        (l >= 0).then_some(l as usize)
    }

    pub fn boundary_components(&self) -> usize {
        self.components
    }

    /// Outward unit normal at a boundary node; zero elsewhere.
    pub fn normal(&self, i: usize) -> [f64; 2] {
        self.normals[i]
    }

    /// Maximum pairwise distance between boundary nodes.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn tag(&self) -> u64 {
        self.tag
    }
}

/// One value per grid node; exterior nodes hold `NaN`, which every
/// reduction skips.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
    tag: u64,
}

impl ScalarField {
    /// Zero on interior and boundary nodes.
    pub fn zeros(g: &Grid) -> Self {
        Self::constant(g, 0.0)
    }

    pub fn constant(g: &Grid, v: f64) -> Self {
        Self::from_fn(g, |_| v)
    }

    /// Samples `f` on interior and boundary nodes.
    pub fn from_fn(g: &Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..g.len())
            .map(|i| if g.class[i] == NodeClass::Exterior { f64::NAN } else { f(g.coord(i)) })
            .collect();
        ScalarField { values, tag: g.tag }
    }

    /// Wraps raw node values; exterior entries are overwritten with the
    /// sentinel.
    pub fn from_values(g: &Grid, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != g.len() {
            return Err(Error::GridMismatch);
        }
        for (v, c) in values.iter_mut().zip(&g.class) {
            if *c == NodeClass::Exterior {
                *v = f64::NAN;
            }
        }
        Ok(ScalarField { values, tag: g.tag })
    }

    pub fn belongs_to(&self, g: &Grid) -> bool {
        self.tag == g.tag && self.values.len() == g.len()
    }

    pub(crate) fn check(&self, g: &Grid) -> Result<()> {
        if self.belongs_to(g) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn tag(&self) -> u64 {
        self.tag
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Writes a value; ignored on exterior nodes so the sentinel survives.
    #[inline]
    pub fn set(&mut self, i: usize, v: f64) {
        if !self.values[i].is_nan() || v.is_nan() {
            self.values[i] = v;
        }
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().filter(|v| !v.is_nan()).fold(0.0, |m, v| m.max(math::abs(*v)))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().filter(|v| !v.is_nan()).fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Sup-norm of `self - other` over nodes where both are defined.
    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| !a.is_nan() && !b.is_nan())
            .fold(0.0, |m, (a, b)| m.max(math::abs(a - b)))
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.values.iter_mut() {
            *v *= s;
        }
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// Applies `f` to every defined value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        let values = self.values.iter().map(|&v| if v.is_nan() { v } else { f(v) }).collect();
        ScalarField { values, tag: self.tag }
    }

    /// Divides by the sup-norm. Returns the norm that was removed.
    pub fn normalize(&mut self) -> f64 {
        let n = self.sup_norm();
        if n > 0.0 {
            self.scale(1.0 / n);
        }
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_counts() {
        let g = build_domain(&DomainSpec::interval(1.0), 4).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.interior().len(), 3);
        assert_eq!(g.boundary_components(), 2);
        assert_eq!(g.normal(0), [-1.0, 0.0]);
        assert_eq!(g.normal(4), [1.0, 0.0]);
        let d = distance_field(&g);
        assert_eq!(d.get(1), 0.25);
    }

    #[test]
    fn component_counts() {
        let cases = [
            (DomainSpec::square(1.0), 1),
            (DomainSpec::rectangle(1.0, 0.5), 1),
            (DomainSpec::disk(1.0), 1),
            (DomainSpec::annulus(0.5, 1.0), 2),
        ];
        for (spec, want) in cases {
            let g = build_domain(&spec, 64).unwrap();
            assert_eq!(g.boundary_components(), want, "{spec:?}");
        }
    }

    #[test]
    fn disk_area_by_counting() {
        let g = build_domain(&DomainSpec::disk(1.0), 64).unwrap();
        let ratio = g.interior().len() as f64 / (64.0 * 64.0);
        let quarter_pi = core::f64::consts::FRAC_PI_4;
        assert!(math::abs(ratio / quarter_pi - 1.0) < 0.05, "{ratio}");
    }

    #[test]
    fn distance_examples() {
        let g = build_domain(&DomainSpec::disk(1.0), 64).unwrap();
        let d = distance_field(&g);
        let centre = (0..g.len()).find(|&i| g.coord(i) == [0.0, 0.0]).unwrap();
        assert!(math::abs(d.get(centre) - 1.0) < 1e-15);

        let g = build_domain(&DomainSpec::annulus(0.5, 1.0), 64).unwrap();
        let d = distance_field(&g);
        let i = (0..g.len())
            .find(|&i| {
                let p = g.coord(i);
                math::abs(p[0] - 0.75) < 1e-12 && math::abs(p[1]) < 1e-12
            })
            .unwrap();
        assert!(math::abs(d.get(i) - 0.25) < 1e-12);
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(build_domain(&DomainSpec::disk(0.0), 8).is_err());
        assert!(build_domain(&DomainSpec::annulus(1.0, 1.0), 8).is_err());
        assert!(build_domain(&DomainSpec::rectangle(1.0, -1.0), 8).is_err());
        assert!(build_domain(&DomainSpec::interval(1.0), 3).is_err());
        assert!(build_domain(&DomainSpec::interval(1.0).with_scale(0.0), 8).is_err());
    }

    #[test]
    fn labels_do_not_depend_on_visit_order() {
        let g = build_domain(&DomainSpec::annulus(0.4, 1.0), 40).unwrap();
        let (fwd, k1) = g.label_boundary(0..g.len());
        let (rev, k2) = g.label_boundary((0..g.len()).rev());
        assert_eq!(k1, 2);
        assert_eq!(k1, k2);
        assert_eq!(fwd, rev);
    }

    #[test]
    fn disk_normals_point_outward() {
        let g = build_domain(&DomainSpec::disk(1.0), 32).unwrap();
        for i in g.boundary_nodes() {
            let p = g.coord(i);
            let n = g.normal(i);
            assert!(p[0] * n[0] + p[1] * n[1] > 0.0);
            assert!(math::abs(math::hypot(n[0], n[1]) - 1.0) < 1e-14);
        }
    }

    #[test]
    fn mask_round_trip_of_square() {
        let g0 = build_domain(&DomainSpec::square(1.0), 8).unwrap();
        let classes = (0..g0.len())
            .map(|i| match g0.class(i) {
                NodeClass::Interior => 1,
                NodeClass::Boundary => 2,
                NodeClass::Exterior => 0,
            })
            .collect();
        let m = MaskSpec { nx: 9, ny: 9, xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0, classes };
        let g = build_domain(&DomainSpec::new(Shape::Mask(m)), 8).unwrap();
        assert_eq!(g.interior(), g0.interior());
        assert_eq!(g.boundary_components(), 1);
        let (d0, d) = (distance_field(&g0), distance_field(&g));
        assert!(d0.max_abs_diff(&d) < 1e-12);
        // Edge midpoint normal from the distance gradient.
        assert_eq!(g.normal(4), [0.0, -1.0]);
    }

    #[test]
    fn mask_with_open_stencil_rejected() {
        let mut classes = vec![1u8; 25];
        classes[0] = 0;
        let m = MaskSpec { nx: 5, ny: 5, xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0, classes };
        assert!(build_domain(&DomainSpec::new(Shape::Mask(m)), 4).is_err());
    }

    #[test]
    fn sentinel_is_ignored_by_norms() {
        let g = build_domain(&DomainSpec::disk(1.0), 16).unwrap();
        let mut u = ScalarField::constant(&g, -2.0);
        assert_eq!(u.sup_norm(), 2.0);
        assert!(u.values().iter().any(|v| v.is_nan()));
        u.set(0, 5.0);
        assert!(u.get(0).is_nan());
    }
}
