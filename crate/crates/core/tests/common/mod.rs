//! Test-side geometry oracles, independent of the production QP path:
//! exact convex hulls by facet enumeration in two and three dimensions.

/// Signed tolerance for oracle side tests.
pub const ORACLE_EPS: f64 = 1e-9;

/// Convex hull of 2-D points by Andrew's monotone chain; returns the hull
/// vertices in counter-clockwise order.
pub fn hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
    pts.dedup_by(|a, b| a[0] == b[0] && a[1] == b[1]);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Signed distance of a point to the 2-D hull: negative inside, positive
/// outside, magnitude = Euclidean distance to the boundary.
pub fn signed_distance_2d(hull: &[[f64; 2]], p: [f64; 2]) -> f64 {
    if hull.len() == 1 {
        let d = ((p[0] - hull[0][0]).powi(2) + (p[1] - hull[0][1]).powi(2)).sqrt();
        return d;
    }
    if hull.len() == 2 {
        return segment_distance(hull[0], hull[1], p);
    }
    let mut inside = true;
    let mut boundary = f64::INFINITY;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        if cross < 0.0 {
            inside = false;
        }
        boundary = boundary.min(segment_distance(a, b, p));
    }
    if inside {
        -boundary
    } else {
        boundary
    }
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Exact 3-D membership oracle by brute-force facet enumeration. Returns the
/// maximum signed facet distance: negative strictly inside, positive outside.
/// Assumes the cloud is in general position (full-dimensional).
pub struct FacetOracle3d {
    facets: Vec<([f64; 3], f64)>, // outward unit normal, offset: n.x <= d
}

impl FacetOracle3d {
    pub fn build(points: &[[f64; 3]]) -> Self {
        let n = points.len();
        let centroid = {
            let mut c = [0.0; 3];
            for p in points {
                for k in 0..3 {
                    c[k] += p[k];
                }
            }
            [c[0] / n as f64, c[1] / n as f64, c[2] / n as f64]
        };
        let mut facets: Vec<([f64; 3], f64)> = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let a = points[i];
                    let b = points[j];
                    let c = points[k];
                    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
                    let mut normal = [
                        u[1] * v[2] - u[2] * v[1],
                        u[2] * v[0] - u[0] * v[2],
                        u[0] * v[1] - u[1] * v[0],
                    ];
                    let norm = (normal[0].powi(2) + normal[1].powi(2) + normal[2].powi(2)).sqrt();
                    if norm < 1e-12 {
                        continue;
                    }
                    for t in normal.iter_mut() {
                        *t /= norm;
                    }
                    let mut offset = normal[0] * a[0] + normal[1] * a[1] + normal[2] * a[2];
                    // orient outward (away from the centroid)
                    if normal[0] * centroid[0] + normal[1] * centroid[1] + normal[2] * centroid[2]
                        > offset
                    {
                        for t in normal.iter_mut() {
                            *t = -*t;
                        }
                        offset = -offset;
                    }
                    // a facet supports every point on its inner side
                    let mut supporting = true;
                    for p in points {
                        if normal[0] * p[0] + normal[1] * p[1] + normal[2] * p[2]
                            > offset + ORACLE_EPS
                        {
                            supporting = false;
                            break;
                        }
                    }
                    if supporting {
                        facets.push((normal, offset));
                    }
                }
            }
        }
        FacetOracle3d { facets }
    }

    /// Maximum signed facet distance of `p` (positive means outside).
    pub fn margin(&self, p: [f64; 3]) -> f64 {
        self.facets
            .iter()
            .map(|(n, d)| n[0] * p[0] + n[1] * p[1] + n[2] * p[2] - d)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
