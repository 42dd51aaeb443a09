//! Box geometry under the ∞-norm.
//!
//! Compact sets are finite unions of axis-aligned boxes. Under the ∞-norm a
//! ball `B(x, r)` is itself a box, so neighborhoods, point-to-set distances,
//! grid covers and Lebesgue measure all have exact closed forms here.
//!
//! Grid covers enumerate their centers lexicographically (axis 0 slowest,
//! last axis fastest, ascending along each axis). Sensor and controller both
//! rely on this order to agree on what an index means, so every center is
//! produced by the single formula in [`GridCover::axis_center`].

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Relative slack absorbed when taking `ceil(half_width / delta)`, so that a
/// ratio which is an integer up to rounding does not gain a spurious cell.
const CEIL_SLACK: f64 = 1e-12;

/// Closed ∞-norm ball with per-axis radii: `{ x : |x_i - c_i| <= r_i }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperrect {
    pub center: Vec<f64>,
    pub radius: Vec<f64>,
}

impl Hyperrect {
    pub fn new(center: Vec<f64>, radius: Vec<f64>) -> Result<Self> {
        check_dim(center.len(), radius.len())?;
        if center.is_empty() {
            return Err(Error::Argument("box must have dimension >= 1".into()));
        }
        if radius.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::Argument(format!("box radii must be finite and >= 0, got {radius:?}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Argument(format!("box center must be finite, got {center:?}")));
        }
        Ok(Self { center, radius })
    }

    /// Ball `B(center, r)` with the same radius on every axis.
    pub fn ball(center: Vec<f64>, r: f64) -> Result<Self> {
        let radius = vec![r; center.len()];
        Self::new(center, radius)
    }

    pub fn from_bounds(lower: &[f64], upper: &[f64]) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.iter().zip(upper).any(|(l, u)| l > u) {
            return Err(Error::Argument(format!("lower bound exceeds upper: {lower:?} > {upper:?}")));
        }
        let center = lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect();
        let radius = lower.iter().zip(upper).map(|(l, u)| 0.5 * (u - l)).collect();
        Self::new(center, radius)
    }

    /// `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::from_bounds(&vec![lo; n], &vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.center.iter().zip(&self.radius).map(|(c, r)| c - r).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.center.iter().zip(&self.radius).map(|(c, r)| c + r).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_with_slack(x, 0.0)
    }

    pub fn contains_with_slack(&self, x: &[f64], slack: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.center.iter().zip(&self.radius))
                .all(|(xi, (c, r))| (xi - c).abs() <= r + slack)
    }

    /// Exact ∞-norm distance from `y` to the box.
    pub fn distance(&self, y: &[f64]) -> f64 {
        y.iter()
            .zip(self.center.iter().zip(&self.radius))
            .map(|(yi, (c, r))| ((yi - c).abs() - r).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn inflate(&self, eps: f64) -> Self {
        Self {
            center: self.center.clone(),
            radius: self.radius.iter().map(|r| r + eps).collect(),
        }
    }

    pub fn volume(&self) -> f64 {
        self.radius.iter().map(|r| 2.0 * r).product()
    }

    /// Number of axes with positive extent.
    pub fn active_axes(&self) -> usize {
        self.radius.iter().filter(|r| **r > 0.0).count()
    }

    /// Corner points. Bit `k` of the enumeration counter selects the lower
    /// face on axis `n-1-k`, so the all-upper corner comes first.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| {
                        let lower = mask >> (n - 1 - i) & 1 == 1;
                        if lower {
                            self.center[i] - self.radius[i]
                        } else {
                            self.center[i] + self.radius[i]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// True when the interiors intersect (shared faces do not count).
    pub fn overlaps(&self, other: &Hyperrect) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| {
                (self.center[i] - other.center[i]).abs() < self.radius[i] + other.radius[i]
            })
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &Hyperrect) -> Hyperrect {
        let lo: Vec<f64> = self.lower().iter().zip(other.lower()).map(|(a, b)| a.min(b)).collect();
        let hi: Vec<f64> = self.upper().iter().zip(other.upper()).map(|(a, b)| a.max(b)).collect();
        Hyperrect::from_bounds(&lo, &hi).expect("hull of valid boxes")
    }

    /// Tensor grid with `k` evenly spaced points per positive-extent axis
    /// (endpoints included) and a single point on degenerate axes.
    pub fn tensor_grid(&self, k: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|i| linspace(self.center[i] - self.radius[i], self.center[i] + self.radius[i], k))
            .collect();
        cartesian(&axes)
    }
}

/// `k` evenly spaced points on `[lo, hi]`; a single point when the interval
/// is degenerate or `k <= 1`.
pub fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k <= 1 || lo == hi {
        return vec![if k <= 1 { 0.5 * (lo + hi) } else { lo }];
    }
    let step = (hi - lo) / (k - 1) as f64;
    (0..k)
        .map(|j| if j + 1 == k { hi } else { lo + step * j as f64 })
        .collect()
}

/// Cartesian product, first axis slowest.
pub fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Nonempty finite union of boxes of a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Hyperrect>", into = "Vec<Hyperrect>")]
pub struct CompactSet {
    boxes: Vec<Hyperrect>,
}

impl TryFrom<Vec<Hyperrect>> for CompactSet {
    type Error = Error;
    fn try_from(boxes: Vec<Hyperrect>) -> Result<Self> {
        Self::new(boxes)
    }
}

impl From<CompactSet> for Vec<Hyperrect> {
    fn from(set: CompactSet) -> Self {
        set.boxes
    }
}

impl From<Hyperrect> for CompactSet {
    fn from(b: Hyperrect) -> Self {
        Self { boxes: vec![b] }
    }
}

impl CompactSet {
    pub fn new(boxes: Vec<Hyperrect>) -> Result<Self> {
        let first = boxes
            .first()
            .ok_or_else(|| Error::Argument("compact set needs at least one box".into()))?;
        let n = first.dim();
        for b in &boxes {
            check_dim(n, b.dim())?;
        }
        Ok(Self { boxes })
    }

    pub fn boxes(&self) -> &[Hyperrect] {
        &self.boxes
    }

    pub fn dim(&self) -> usize {
        self.boxes[0].dim()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(x))
    }

    /// `d(y, Q) = min over boxes` of the per-box closed form.
    pub fn distance(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.dim(), y.len())?;
        Ok(self.distance_unchecked(y))
    }

    pub(crate) fn distance_unchecked(&self, y: &[f64]) -> f64 {
        self.boxes.iter().map(|b| b.distance(y)).fold(f64::INFINITY, f64::min)
    }

    /// `N_eps(Q)`: every box inflated by `eps`. Overlaps are kept as-is.
    pub fn neighborhood(&self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(Error::Argument(format!("neighborhood radius must be >= 0, got {eps}")));
        }
        Ok(Self {
            boxes: self.boxes.iter().map(|b| b.inflate(eps)).collect(),
        })
    }

    pub fn bounding_box(&self) -> Hyperrect {
        self.boxes[1..].iter().fold(self.boxes[0].clone(), |acc, b| acc.hull(b))
    }

    /// Lebesgue measure; requires interiors to be pairwise disjoint.
    pub fn lebesgue(&self) -> Result<f64> {
        for (i, a) in self.boxes.iter().enumerate() {
            for b in &self.boxes[i + 1..] {
                if a.overlaps(b) {
                    return Err(Error::UnsupportedInput(
                        "Lebesgue measure of overlapping box unions is not supported".into(),
                    ));
                }
            }
        }
        Ok(self.boxes.iter().map(Hyperrect::volume).sum())
    }

    /// Box-counting dimension: the number of positive-extent axes.
    pub fn box_counting_dim(&self) -> usize {
        self.boxes.iter().map(Hyperrect::active_axes).max().unwrap_or(0)
    }
}

/// The δ-grid of a box: centers `2δ` apart on axis-parallel lines whose
/// δ-balls cover the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCover {
    pub region: Hyperrect,
    pub delta: f64,
    pub counts: Vec<u64>,
    pub origin: Vec<f64>,
}

/// Result of snapping a point to a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub center: Vec<f64>,
    pub index: u64,
    /// ∞-norm distance from the point to `center`.
    pub distance: f64,
    /// False when the point lies farther than `delta` from every center.
    pub in_cell: bool,
}

fn axis_count(half_width: f64, delta: f64) -> u64 {
    if half_width <= 0.0 {
        return 1;
    }
    let ratio = half_width / delta;
    ((ratio - ratio * CEIL_SLACK).ceil() as u64).max(1)
}

/// `grid(S, δ)`.
pub fn grid(region: &Hyperrect, delta: f64) -> Result<GridCover> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Argument(format!("grid spacing must be positive, got {delta}")));
    }
    let counts: Vec<u64> = region.radius.iter().map(|r| axis_count(*r, delta)).collect();
    let origin = region
        .center
        .iter()
        .zip(&counts)
        .map(|(c, k)| c - (*k as f64 - 1.0) * delta)
        .collect();
    let cover = GridCover {
        region: region.clone(),
        delta,
        counts,
        origin,
    };
    cover.len()?;
    Ok(cover)
}

/// `b(δ, Q)` in closed form; for unions, the sum of per-box counts (an upper
/// bound on the true minimum).
pub fn min_cover_size(q: &CompactSet, delta: f64) -> Result<u64> {
    let mut total = 0u64;
    for b in q.boxes() {
        total = total
            .checked_add(grid(b, delta)?.len()?)
            .ok_or_else(|| Error::Numerical("cover size overflows u64".into()))?;
    }
    Ok(total)
}

impl GridCover {
    /// Number of centers.
    pub fn len(&self) -> Result<u64> {
        self.counts.iter().try_fold(1u64, |acc, k| {
            acc.checked_mul(*k)
                .ok_or_else(|| Error::Numerical(format!("grid with counts {:?} overflows u64", self.counts)))
        })
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    #[inline]
    pub fn axis_center(&self, axis: usize, k: u64) -> f64 {
        self.origin[axis] + (2.0 * self.delta) * k as f64
    }

    pub fn center_of(&self, multi: &[u64]) -> Vec<f64> {
        multi.iter().enumerate().map(|(i, k)| self.axis_center(i, *k)).collect()
    }

    pub fn index_of(&self, multi: &[u64]) -> u64 {
        multi.iter().zip(&self.counts).fold(0u64, |acc, (k, c)| acc * c + k)
    }

    pub fn multi_index(&self, mut index: u64) -> Vec<u64> {
        let mut multi = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            multi[i] = index % self.counts[i];
            index /= self.counts[i];
        }
        multi
    }

    /// Center at an enumeration index.
    pub fn center(&self, index: u64) -> Result<Vec<f64>> {
        if index >= self.len()? {
            return Err(Error::Argument(format!("grid index {index} out of range")));
        }
        Ok(self.center_of(&self.multi_index(index)))
    }

    /// All centers in enumeration order.
    pub fn centers(&self) -> Result<Vec<Vec<f64>>> {
        let len = self.len()?;
        Ok((0..len).map(|i| self.center_of(&self.multi_index(i))).collect())
    }

    /// Nearest center in the ∞-norm. Among centers at the minimal distance
    /// the lexicographically smallest (hence smallest index) wins.
    pub fn quantize(&self, x: &[f64]) -> Result<Quantized> {
        check_dim(self.dim(), x.len())?;
        let step = 2.0 * self.delta;
        let nearest: Vec<u64> = (0..self.dim())
            .map(|i| {
                let last = self.counts[i] - 1;
                let raw = ((x[i] - self.origin[i]) / step).round();
                let mut k = if raw <= 0.0 { 0 } else { (raw as u64).min(last) };
                // Correct rounding at cell boundaries.
                while k > 0 && (x[i] - self.axis_center(i, k - 1)).abs() < (x[i] - self.axis_center(i, k)).abs() {
                    k -= 1;
                }
                while k < last && (x[i] - self.axis_center(i, k + 1)).abs() < (x[i] - self.axis_center(i, k)).abs() {
                    k += 1;
                }
                k
            })
            .collect();
        let dist = nearest
            .iter()
            .enumerate()
            .map(|(i, k)| (x[i] - self.axis_center(i, *k)).abs())
            .fold(0.0, f64::max);
        // Per axis, move to the smallest index still within `dist`.
        let chosen: Vec<u64> = nearest
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let mut k = k;
                while k > 0 && (x[i] - self.axis_center(i, k - 1)).abs() <= dist {
                    k -= 1;
                }
                k
            })
            .collect();
        Ok(Quantized {
            center: self.center_of(&chosen),
            index: self.index_of(&chosen),
            distance: dist,
            in_cell: dist <= self.delta * (1.0 + CEIL_SLACK),
        })
    }
}
