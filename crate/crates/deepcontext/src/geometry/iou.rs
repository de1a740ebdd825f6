//! Exact IoU for gravity-upright oriented boxes.
//!
//! Upright boxes decompose into a yawed 2D footprint times a z interval, so
//! the intersection volume is (convex polygon intersection area) x (vertical
//! overlap), both exact.

use super::OrientedBox3;

/// Shoelace area of a simple polygon (positive for counterclockwise).
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % poly.len()];
        acc += x0 * y1 - x1 * y0;
    }
    acc / 2.0
}

/// Sutherland–Hodgman clip of `subject` against a convex, counterclockwise
/// `clip` polygon.
pub fn clip_convex_polygon(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut output: Vec<[f64; 2]> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let p = input[j];
            let q = input[(j + 1) % input.len()];
            let p_in = inside(p, a, b);
            let q_in = inside(q, a, b);
            if p_in {
                output.push(p);
                if !q_in {
                    output.push(intersect(p, q, a, b));
                }
            } else if q_in {
                output.push(intersect(p, q, a, b));
            }
        }
    }
    output
}

#[inline]
fn inside(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    // left of (or on) the directed edge a->b of a CCW polygon
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0
}

fn intersect(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let r = [q[0] - p[0], q[1] - p[1]];
    let s = [b[0] - a[0], b[1] - a[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    let t = ((a[0] - p[0]) * s[1] - (a[1] - p[1]) * s[0]) / denom;
    [p[0] + t * r[0], p[1] + t * r[1]]
}

/// Exact intersection-over-union of two upright oriented boxes.
pub fn box_iou_3d(a: &OrientedBox3, b: &OrientedBox3) -> f64 {
    let (za0, za1) = a.z_interval();
    let (zb0, zb1) = b.z_interval();
    let dz = (za1.min(zb1) - za0.max(zb0)).max(0.0);
    if dz == 0.0 {
        return 0.0;
    }
    let clipped = clip_convex_polygon(&a.footprint(), &b.footprint());
    let inter_area = polygon_area(&clipped).abs();
    let inter = inter_area * dz;
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use glam::DVec3;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bx(cx: f64, cy: f64, cz: f64, sx: f64, sy: f64, sz: f64, yaw: f64) -> OrientedBox3 {
        OrientedBox3::new(DVec3::new(cx, cy, cz), DVec3::new(sx, sy, sz), yaw).unwrap()
    }

    #[test]
    fn identical_boxes_iou_one() {
        let a = bx(0.3, -0.2, 0.5, 1.0, 2.0, 0.7, 0.4);
        assert!((box_iou_3d(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_boxes_iou_zero() {
        let a = bx(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0);
        let b = bx(5.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.3);
        assert_eq!(box_iou_3d(&a, &b), 0.0);
    }

    #[test]
    fn unit_cubes_offset_half() {
        let a = bx(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0);
        let b = bx(0.5, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0);
        // intersection 0.5, union 1.5
        assert!((box_iou_3d(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn iou_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = random_box(&mut rng);
            let b = random_box(&mut rng);
            let ab = box_iou_3d(&a, &b);
            let ba = box_iou_3d(&b, &a);
            assert!((ab - ba).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&ab));
        }
    }

    fn random_box(rng: &mut ChaCha8Rng) -> OrientedBox3 {
        bx(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-0.5..0.5),
            rng.random_range(0.3..2.0),
            rng.random_range(0.3..2.0),
            rng.random_range(0.3..2.0),
            rng.random_range(0.0..super::super::TAU),
        )
    }

    /// Rejection-sampling IoU estimate, independent of the clipping path.
    fn monte_carlo_iou(a: &OrientedBox3, b: &OrientedBox3, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for bxx in [a, b] {
            for [x, y] in bxx.footprint() {
                lo[0] = lo[0].min(x);
                hi[0] = hi[0].max(x);
                lo[1] = lo[1].min(y);
                hi[1] = hi[1].max(y);
            }
            let (z0, z1) = bxx.z_interval();
            lo[2] = lo[2].min(z0);
            hi[2] = hi[2].max(z1);
        }
        let (mut na, mut nb, mut nboth) = (0u64, 0u64, 0u64);
        for _ in 0..samples {
            let p = DVec3::new(
                rng.random_range(lo[0]..hi[0]),
                rng.random_range(lo[1]..hi[1]),
                rng.random_range(lo[2]..hi[2]),
            );
            let ia = a.contains(p);
            let ib = b.contains(p);
            if ia {
                na += 1;
            }
            if ib {
                nb += 1;
            }
            if ia && ib {
                nboth += 1;
            }
        }
        let union = na + nb - nboth;
        if union == 0 {
            return 0.0;
        }
        nboth as f64 / union as f64
    }

    #[test]
    fn yawed_pair_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in 0..5 {
            let a = random_box(&mut rng);
            let mut b = random_box(&mut rng);
            // pull b toward a so intersections actually happen
            b.center = a.center + (b.center - a.center) * 0.3;
            let exact = box_iou_3d(&a, &b);
            let mc = monte_carlo_iou(&a, &b, 1_000_000, 1000 + case);
            assert!(
                (exact - mc).abs() < 5e-3,
                "case {case}: exact {exact} vs mc {mc}"
            );
        }
    }
}
