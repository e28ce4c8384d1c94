//! Representations of the front set `G_t`: merged intervals (n = 1),
//! convex polygons (n = 2) or a boolean mask on a rectangular grid.

/// Boolean mask on a tensor grid; axis 0 varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMask {
    pub axes: Vec<Vec<f64>>,
    pub cells: Vec<bool>,
}

impl GridMask {
    pub fn new(axes: Vec<Vec<f64>>) -> Self {
        let len = axes.iter().map(Vec::len).product();
        Self {
            axes,
            cells: vec![false; len],
        }
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (ax, &i) in multi.iter().enumerate() {
            idx += i * stride;
            stride *= self.axes[ax].len();
        }
        idx
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        self.axes
            .iter()
            .map(|a| {
                let i = idx % a.len();
                idx /= a.len();
                i
            })
            .collect()
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(ax, &i)| self.axes[ax][i])
            .collect()
    }

    /// Index of the grid node nearest to `x`, if `x` lies within the grid.
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        let mut multi = Vec::with_capacity(self.axes.len());
        for (ax, a) in self.axes.iter().enumerate() {
            let (lo, hi) = (a[0], a[a.len() - 1]);
            if x[ax] < lo || x[ax] > hi {
                return None;
            }
            let i = a.partition_point(|&v| v < x[ax]);
            let i = if i == 0 {
                0
            } else if i == a.len() || (x[ax] - a[i - 1]) <= (a[i] - x[ax]) {
                i - 1
            } else {
                i
            };
            multi.push(i);
        }
        Some(self.index(&multi))
    }

    /// Indices of the axis-neighbours of `idx`.
    pub fn neighbours(&self, idx: usize) -> Vec<usize> {
        let multi = self.multi_index(idx);
        let mut out = Vec::with_capacity(2 * multi.len());
        let mut stride = 1;
        for (ax, &i) in multi.iter().enumerate() {
            if i > 0 {
                out.push(idx - stride);
            }
            if i + 1 < self.axes[ax].len() {
                out.push(idx + stride);
            }
            stride *= self.axes[ax].len();
        }
        out
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrontSet {
    /// Disjoint closed intervals sorted by their left end.
    Intervals(Vec<(f64, f64)>),
    /// Convex polygons, vertices counter-clockwise.
    Polygons(Vec<Vec<[f64; 2]>>),
    Mask(GridMask),
}

impl FrontSet {
    /// Membership test with an absolute slack `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            FrontSet::Intervals(iv) => iv.iter().any(|&(a, b)| x[0] >= a - tol && x[0] <= b + tol),
            FrontSet::Polygons(polys) => polys.iter().any(|p| polygon_contains(p, [x[0], x[1]], tol)),
            FrontSet::Mask(mask) => mask.nearest(x).is_some_and(|i| mask.cells[i]),
        }
    }
}

/// Sorts and merges overlapping intervals.
pub fn merge_intervals(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull by the monotone chain; counter-clockwise, no repeated vertex.
pub fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Point-in-convex-polygon test with slack `tol`.
pub fn polygon_contains(poly: &[[f64; 2]], x: [f64; 2], tol: f64) -> bool {
    match poly.len() {
        0 => false,
        1 => ((x[0] - poly[0][0]).powi(2) + (x[1] - poly[0][1]).powi(2)).sqrt() <= tol,
        n => (0..n).all(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            if len == 0.0 {
                return true;
            }
            cross(a, b, x) / len >= -tol
        }),
    }
}

/// Whether a closed polygon is convex (all turns left within `tol`).
pub fn is_convex(poly: &[[f64; 2]], tol: f64) -> bool {
    let n = poly.len();
    (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]) >= -tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_square_with_interior_points() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5], [0.2, 0.7]];
        let h = convex_hull(pts);
        assert_eq!(h.len(), 4);
        assert!(is_convex(&h, 0.0));
        assert!(polygon_contains(&h, [0.5, 0.5], 0.0));
        assert!(!polygon_contains(&h, [1.5, 0.5], 1e-9));
    }

    #[test]
    fn merging() {
        let m = merge_intervals(vec![(2.0, 3.0), (0.0, 1.0), (0.5, 2.0), (5.0, 6.0)]);
        assert_eq!(m, vec![(0.0, 3.0), (5.0, 6.0)]);
    }

    #[test]
    fn mask_indexing() {
        let mut g = GridMask::new(vec![vec![0.0, 1.0, 2.0], vec![0.0, 1.0]]);
        let i = g.index(&[2, 1]);
        assert_eq!(g.multi_index(i), vec![2, 1]);
        assert_eq!(g.point(i), vec![2.0, 1.0]);
        assert_eq!(g.nearest(&[1.6, 0.2]), Some(g.index(&[2, 0])));
        assert_eq!(g.nearest(&[3.0, 0.0]), None);
        let mut nb = g.neighbours(g.index(&[1, 0]));
        nb.sort();
        assert_eq!(nb, vec![0, 2, 4]);
        g.cells[i] = true;
        assert!(FrontSet::Mask(g).contains(&[2.1 - 0.2, 0.9], 0.0));
    }
}
