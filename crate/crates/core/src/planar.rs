//! Planar convex routines: hulls, convex-feature intersection and
//! point-versus-polygon queries used for contact manifolds and support polygons.

use crate::geometry::Vec2;

const DUP_EPS: f64 = 1e-12;

fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Convex hull by monotone chain. Returns indices into `points`, counter-clockwise,
/// with collinear and duplicate points removed. Degenerate input yields one index
/// (all points coincide) or two (all points collinear).
pub fn convex_hull(points: &[Vec2], eps: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        let (p, q) = (points[a], points[b]);
        p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y))
    });
    idx.dedup_by(|a, b| (points[*a] - points[*b]).norm() <= eps.max(DUP_EPS));
    if idx.len() <= 2 {
        return idx;
    }
    let turn = |o: usize, a: usize, b: usize| cross(&(points[a] - points[o]), &(points[b] - points[o]));
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], i) <= eps * eps {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], i) <= eps * eps {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        // Collinear set: keep the two extremes.
        return vec![idx[0], idx[idx.len() - 1]];
    }
    lower
}

fn hull_points(points: &[Vec2], eps: f64) -> Vec<Vec2> {
    convex_hull(points, eps).into_iter().map(|i| points[i]).collect()
}

/// Intersection of the convex hulls of two planar point sets. Either set may
/// be degenerate (a point or a segment). Returns the vertices of the overlap.
pub fn intersect_convex(a: &[Vec2], b: &[Vec2], tol: f64) -> Vec<Vec2> {
    let ha = hull_points(a, tol * 1e-3);
    let hb = hull_points(b, tol * 1e-3);
    if ha.is_empty() || hb.is_empty() {
        return Vec::new();
    }
    let (big, small) = if ha.len() >= hb.len() { (&ha, &hb) } else { (&hb, &ha) };
    match (big.len(), small.len()) {
        (n, m) if n >= 3 && m >= 3 => clip_polygon(big, small, tol),
        (n, 2) if n >= 3 => clip_segment(big, small[0], small[1], tol),
        (n, 1) if n >= 3 => {
            if inside_polygon(big, &small[0], tol) {
                vec![small[0]]
            } else {
                Vec::new()
            }
        }
        (2, 2) => segment_segment(big[0], big[1], small[0], small[1], tol),
        (2, 1) => {
            let (q, _) = nearest_on_segment(&big[0], &big[1], &small[0]);
            if (q - small[0]).norm() <= tol {
                vec![small[0]]
            } else {
                Vec::new()
            }
        }
        _ => {
            if (big[0] - small[0]).norm() <= tol {
                vec![(big[0] + small[0]) * 0.5]
            } else {
                Vec::new()
            }
        }
    }
}

fn inside_polygon(poly: &[Vec2], p: &Vec2, tol: f64) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let e = b - a;
        cross(&e, &(p - a)) >= -tol * e.norm()
    })
}

/// Sutherland-Hodgman: `subject` clipped by convex CCW `clip`.
fn clip_polygon(subject: &[Vec2], clip: &[Vec2], tol: f64) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % n]);
        let e = b - a;
        let len = e.norm();
        let side = |p: &Vec2| cross(&e, &(p - a)) / len;
        let input = std::mem::take(&mut out);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let (sc, sp) = (side(&cur), side(&prev));
            let cur_in = sc >= -tol;
            let prev_in = sp >= -tol;
            if cur_in {
                if !prev_in {
                    out.push(prev + (cur - prev) * (sp / (sp - sc)));
                }
                out.push(cur);
            } else if prev_in {
                out.push(prev + (cur - prev) * (sp / (sp - sc)));
            }
        }
    }
    out.dedup_by(|a, b| (*a - *b).norm() <= DUP_EPS);
    out
}

/// Clips segment `s0..s1` to convex CCW polygon `poly`.
fn clip_segment(poly: &[Vec2], s0: Vec2, s1: Vec2, tol: f64) -> Vec<Vec2> {
    let d = s1 - s0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let e = b - a;
        let len = e.norm();
        // f(t) = f0 + t * df must stay >= -tol
        let f0 = cross(&e, &(s0 - a)) / len + tol;
        let df = cross(&e, &d) / len;
        if df.abs() < 1e-15 {
            if f0 < 0.0 {
                return Vec::new();
            }
            continue;
        }
        let t = -f0 / df;
        if df > 0.0 {
            lo = lo.max(t);
        } else {
            hi = hi.min(t);
        }
        if lo > hi {
            return Vec::new();
        }
    }
    let p = s0 + d * lo;
    let q = s0 + d * hi;
    if (q - p).norm() <= DUP_EPS {
        vec![p]
    } else {
        vec![p, q]
    }
}

fn segment_segment(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2, tol: f64) -> Vec<Vec2> {
    let da = a1 - a0;
    let db = b1 - b0;
    let la = da.norm();
    let lb = db.norm();
    let denom = cross(&da, &db);
    if denom.abs() <= 1e-12 * la * lb {
        // Parallel: overlap only when collinear.
        if cross(&da, &(b0 - a0)).abs() / la > tol {
            return Vec::new();
        }
        let t0 = (b0 - a0).dot(&da) / (la * la);
        let t1 = (b1 - a0).dot(&da) / (la * la);
        let lo = t0.min(t1).max(0.0);
        let hi = t0.max(t1).min(1.0);
        let slack = tol / la;
        if lo > hi + slack {
            return Vec::new();
        }
        let (lo, hi) = (lo.min(hi), hi.max(lo));
        let p = a0 + da * lo;
        let q = a0 + da * hi;
        return if (q - p).norm() <= DUP_EPS { vec![p] } else { vec![p, q] };
    }
    let w = b0 - a0;
    let t = cross(&w, &db) / denom;
    let u = cross(&w, &da) / denom;
    if t < -tol / la || t > 1.0 + tol / la || u < -tol / lb || u > 1.0 + tol / lb {
        return Vec::new();
    }
    vec![a0 + da * t.clamp(0.0, 1.0)]
}

/// Closest point on segment `a..b` to `p` and its parameter along the segment.
pub fn nearest_on_segment(a: &Vec2, b: &Vec2, p: &Vec2) -> (Vec2, f64) {
    let d = b - a;
    let l2 = d.norm_squared();
    if l2 <= DUP_EPS * DUP_EPS {
        return (*a, 0.0);
    }
    let t = ((p - a).dot(&d) / l2).clamp(0.0, 1.0);
    (a + d * t, t)
}

/// Where a query point sits relative to a support hull.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryQuery {
    /// Signed distance to the boundary; positive strictly inside an area hull.
    /// Degenerate hulls (point, segment) have no interior, so this is `-distance`.
    pub depth: f64,
    /// Closest boundary point.
    pub nearest: Vec2,
    /// Hull vertex indices `(i, j)` and parameter `t` with `nearest = lerp(v_i, v_j, t)`.
    pub feature: (usize, usize, f64),
    /// Unit direction from the boundary out past the query point. `None` when the
    /// query lies on a degenerate hull and no side is preferred.
    pub outward: Option<Vec2>,
}

/// `hull` must be the output vertex list (not indices) of [`convex_hull`], CCW.
pub fn query_boundary(hull: &[Vec2], c: &Vec2) -> BoundaryQuery {
    match hull.len() {
        0 => panic!("query on empty hull"),
        1 => {
            let d = c - hull[0];
            let n = d.norm();
            BoundaryQuery {
                depth: -n,
                nearest: hull[0],
                feature: (0, 0, 0.0),
                outward: (n > 1e-12).then(|| d / n),
            }
        }
        2 => {
            let (q, t) = nearest_on_segment(&hull[0], &hull[1], c);
            let d = c - q;
            let n = d.norm();
            BoundaryQuery { depth: -n, nearest: q, feature: (0, 1, t), outward: (n > 1e-12).then(|| d / n) }
        }
        n => {
            let mut inside = true;
            let mut best_inside = f64::INFINITY;
            let mut best_inside_edge = 0;
            let mut best_out = f64::INFINITY;
            let mut best_out_feature = (0, 1, 0.0, hull[0]);
            for i in 0..n {
                let (a, b) = (hull[i], hull[(i + 1) % n]);
                let e = b - a;
                let s = cross(&e, &(c - a)) / e.norm();
                if s < 0.0 {
                    inside = false;
                }
                if s < best_inside {
                    best_inside = s;
                    best_inside_edge = i;
                }
                let (q, t) = nearest_on_segment(&a, &b, c);
                let dist = (c - q).norm();
                if dist < best_out {
                    best_out = dist;
                    best_out_feature = (i, (i + 1) % n, t, q);
                }
            }
            if inside {
                let i = best_inside_edge;
                let (a, b) = (hull[i], hull[(i + 1) % n]);
                let (q, t) = nearest_on_segment(&a, &b, c);
                let e = (b - a).normalize();
                let outward = Vec2::new(e.y, -e.x);
                BoundaryQuery { depth: best_inside, nearest: q, feature: (i, (i + 1) % n, t), outward: Some(outward) }
            } else {
                let (i, j, t, q) = best_out_feature;
                let d = c - q;
                let nrm = d.norm();
                let outward = if nrm > 1e-12 {
                    d / nrm
                } else {
                    let e = (hull[j] - hull[i]).normalize();
                    Vec2::new(e.y, -e.x)
                };
                BoundaryQuery { depth: -best_out, nearest: q, feature: (i, j, t), outward: Some(outward) }
            }
        }
    }
}
