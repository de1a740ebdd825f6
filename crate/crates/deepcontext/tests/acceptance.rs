//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them stream).
//!
//! Criteria 1-6 check operations against independent oracles written in this
//! file. Criteria 7-9 share one full desk-scale pipeline run (generate,
//! synthesize, train, evaluate); criterion 9 performs a second run and
//! compares weight digests and report JSON byte for byte.

mod pipeline_run;

use deepcontext::geometry::{
    backproject_depth, box_iou_3d, render_mesh_depth, CameraIntrinsics, OrientedBox3, TriMesh,
};
use deepcontext::hybrid::shape_distance;
use deepcontext::nn::ops::{self, RoiBox};
use deepcontext::nn::{grad_check_net, LayerSpec, Net, Tensor};
use deepcontext::pipeline::{bin_to_yaw, cell_to_offset, offset_to_cell, yaw_to_bin};
use deepcontext::templates::{assign_min_cost, assignment_cost};
use deepcontext::tsdf::{compute_tsdf, default_grid};
use glam::DVec3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn verdict(ok: bool, n: usize, detail: &str) {
    println!("[{}] criterion {n}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

// ---------------------------------------------------------------------------
// Criterion 1: layer forward passes match brute-force loop oracles.

fn oracle_conv3d(
    x: &Tensor<f64>,
    w: &Tensor<f64>,
    b: &Tensor<f64>,
    stride: [usize; 3],
    pad: [usize; 3],
) -> Option<Tensor<f64>> {
    let (c_in, d, h, wd) = {
        let s = x.shape();
        (s[0], s[1], s[2], s[3])
    };
    let (k_out, kd, kh, kw) = {
        let s = w.shape();
        (s[0], s[2], s[3], s[4])
    };
    let fits = |n: usize, k: usize, s: usize, p: usize| {
        let padded = n + 2 * p;
        (padded >= k && (padded - k) % s == 0).then(|| (padded - k) / s + 1)
    };
    let od = fits(d, kd, stride[0], pad[0])?;
    let oh = fits(h, kh, stride[1], pad[1])?;
    let ow = fits(wd, kw, stride[2], pad[2])?;
    let mut out = Tensor::zeros(&[k_out, od, oh, ow]);
    for k in 0..k_out {
        for oz in 0..od {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b.data()[k];
                    for c in 0..c_in {
                        for dz in 0..kd {
                            for dy in 0..kh {
                                for dx in 0..kw {
                                    let iz = (oz * stride[0] + dz) as isize - pad[0] as isize;
                                    let iy = (oy * stride[1] + dy) as isize - pad[1] as isize;
                                    let ix = (ox * stride[2] + dx) as isize - pad[2] as isize;
                                    if iz < 0
                                        || iy < 0
                                        || ix < 0
                                        || iz >= d as isize
                                        || iy >= h as isize
                                        || ix >= wd as isize
                                    {
                                        continue;
                                    }
                                    acc += x.data()
                                        [((c * d + iz as usize) * h + iy as usize) * wd
                                            + ix as usize]
                                        * w.data()
                                            [(((k * c_in + c) * kd + dz) * kh + dy) * kw + dx];
                                }
                            }
                        }
                    }
                    out.data_mut()[((k * od + oz) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    Some(out)
}

#[test]
fn criterion_1_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut max_err = 0.0f64;
    let mut cases = 0;

    // conv3d: 100 random shape/stride/pad draws
    while cases < 100 {
        let c_in = rng.random_range(1..3);
        let k_out = rng.random_range(1..4);
        let d = rng.random_range(3..6);
        let h = rng.random_range(3..7);
        let w = rng.random_range(3..7);
        let k = rng.random_range(1..4).min(d).min(h).min(w);
        let stride = [rng.random_range(1..3), rng.random_range(1..3), rng.random_range(1..3)];
        let pad = [rng.random_range(0..2), rng.random_range(0..2), rng.random_range(0..2)];
        let x = rand_tensor(&[c_in, d, h, w], &mut rng);
        let wt = rand_tensor(&[k_out, c_in, k, k, k], &mut rng);
        let b = rand_tensor(&[k_out], &mut rng);
        let Some(expect) = oracle_conv3d(&x, &wt, &b, stride, pad) else {
            continue;
        };
        let got = match ops::conv3d(&x, &wt, &b, stride, pad) {
            Ok(g) => g,
            Err(_) => continue,
        };
        assert_eq!(got.shape(), expect.shape());
        for (a, e) in got.data().iter().zip(expect.data()) {
            max_err = max_err.max((a - e).abs());
        }
        cases += 1;
    }

    // maxpool3d
    for _ in 0..100 {
        let c = rng.random_range(1..3);
        let d = rng.random_range(2..6);
        let h = rng.random_range(2..6);
        let w = rng.random_range(2..6);
        let win = [
            rng.random_range(1..=d),
            rng.random_range(1..=h),
            rng.random_range(1..=w),
        ];
        let x = rand_tensor(&[c, d, h, w], &mut rng);
        let Ok((got, _)) = ops::maxpool3d(&x, win, win) else {
            continue;
        };
        let od = (d - win[0]) / win[0] + 1;
        let oh = (h - win[1]) / win[1] + 1;
        let ow = (w - win[2]) / win[2] + 1;
        for cc in 0..c {
            for oz in 0..od {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = f64::NEG_INFINITY;
                        for dz in 0..win[0] {
                            for dy in 0..win[1] {
                                for dx in 0..win[2] {
                                    best = best.max(
                                        x.data()[((cc * d + oz * win[0] + dz) * h
                                            + oy * win[1]
                                            + dy)
                                            * w
                                            + ox * win[2]
                                            + dx],
                                    );
                                }
                            }
                        }
                        let g = got.data()[((cc * od + oz) * oh + oy) * ow + ox];
                        max_err = max_err.max((g - best).abs());
                    }
                }
            }
        }
    }

    // roi_maxpool3d: per-cell scan oracle
    for _ in 0..100 {
        let c = rng.random_range(1..3);
        let dims = [
            rng.random_range(2..7),
            rng.random_range(2..7),
            rng.random_range(2..7),
        ];
        let x = rand_tensor(&[c, dims[0], dims[1], dims[2]], &mut rng);
        let lo = [
            rng.random_range(-1.0..dims[0] as f64 - 0.5),
            rng.random_range(-1.0..dims[1] as f64 - 0.5),
            rng.random_range(-1.0..dims[2] as f64 - 0.5),
        ];
        let roi = RoiBox {
            min: lo,
            max: [
                lo[0] + rng.random_range(0.5..4.0),
                lo[1] + rng.random_range(0.5..4.0),
                lo[2] + rng.random_range(0.5..4.0),
            ],
        };
        let pooled = ops::roi_maxpool3d(&x, &roi).unwrap();
        for cc in 0..c {
            for bz in 0..6 {
                for by in 0..6 {
                    for bx in 0..6 {
                        let cell = |axis: usize, bin: usize| -> (usize, usize) {
                            let span = roi.max[axis] - roi.min[axis];
                            let e0 = roi.min[axis] + span * bin as f64 / 6.0;
                            let e1 = roi.min[axis] + span * (bin + 1) as f64 / 6.0;
                            let s = e0.floor().max(0.0) as usize;
                            let e = (e1.ceil().min(dims[axis] as f64)).max(0.0) as usize;
                            (s.min(e), e)
                        };
                        let (z0, z1) = cell(0, bz);
                        let (y0, y1) = cell(1, by);
                        let (x0, x1) = cell(2, bx);
                        let mut best: Option<f64> = None;
                        for iz in z0..z1 {
                            for iy in y0..y1 {
                                for ix in x0..x1 {
                                    let v = x.data()
                                        [((cc * dims[0] + iz) * dims[1] + iy) * dims[2] + ix];
                                    best = Some(best.map_or(v, |b: f64| b.max(v)));
                                }
                            }
                        }
                        let g = pooled.output.data()[((cc * 6 + bz) * 6 + by) * 6 + bx];
                        max_err = max_err.max((g - best.unwrap_or(0.0)).abs());
                    }
                }
            }
        }
    }

    // dense: double-loop oracle
    for _ in 0..100 {
        let n = rng.random_range(1..20);
        let m = rng.random_range(1..16);
        let x = rand_tensor(&[n], &mut rng);
        let w = rand_tensor(&[m, n], &mut rng);
        let b = rand_tensor(&[m], &mut rng);
        let got = ops::dense(&x, &w, &b).unwrap();
        for i in 0..m {
            let mut acc = b.data()[i];
            for j in 0..n {
                acc += w.data()[i * n + j] * x.data()[j];
            }
            max_err = max_err.max((got.data()[i] - acc).abs());
        }
    }

    let elapsed = started.elapsed();
    let ok = max_err < 1e-10 && elapsed.as_secs() < 60;
    verdict(
        ok,
        1,
        &format!("conv/pool/roi/dense vs loop oracles: max |err| {max_err:.2e} in {elapsed:.1?}"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: gradient checks.

#[test]
fn criterion_2_gradient_checks() {
    let mut worst = 0.0f64;

    // every trainable layer kind, alone and in small stacks
    let cases: Vec<(Vec<LayerSpec>, Vec<usize>)> = vec![
        (
            vec![LayerSpec::Dense {
                in_dim: 9,
                out_dim: 5,
            }],
            vec![9],
        ),
        (
            vec![
                LayerSpec::Conv3d {
                    in_channels: 1,
                    out_channels: 2,
                    kernel: [3, 3, 3],
                    stride: [1, 1, 1],
                    pad: [1, 1, 1],
                },
                LayerSpec::Relu,
                LayerSpec::Conv3d {
                    in_channels: 2,
                    out_channels: 2,
                    kernel: [3, 3, 3],
                    stride: [1, 1, 1],
                    pad: [0, 0, 0],
                },
            ],
            vec![1, 4, 4, 4],
        ),
        (
            vec![
                LayerSpec::MaxPool3d {
                    window: [2, 2, 2],
                    stride: [2, 2, 2],
                },
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    in_dim: 8,
                    out_dim: 4,
                },
            ],
            vec![1, 4, 4, 4],
        ),
        (
            vec![
                LayerSpec::Conv3d {
                    in_channels: 2,
                    out_channels: 3,
                    kernel: [2, 2, 2],
                    stride: [2, 2, 2],
                    pad: [0, 0, 0],
                },
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    in_dim: 3 * 8,
                    out_dim: 3,
                },
                LayerSpec::Relu,
                LayerSpec::Dense {
                    in_dim: 3,
                    out_dim: 2,
                },
            ],
            vec![2, 4, 4, 4],
        ),
    ];
    for (i, (specs, in_shape)) in cases.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + i as u64);
        let mut net: Net<f64> = Net::from_specs(specs, &mut rng);
        let x = rand_tensor(in_shape, &mut rng);
        let report = grad_check_net(&mut net, &x, 1e-3, 300 + i as u64).unwrap();
        assert!(
            report.checked > 4 * report.tied,
            "case {i}: too many tied probes ({}/{})",
            report.tied,
            report.checked
        );
        worst = worst.max(report.max_error());
    }

    // the composed two-pathway context network
    let ctx_err = pipeline_run::context_net_grad_check();
    worst = worst.max(ctx_err);

    let ok = worst < 1e-4;
    verdict(
        ok,
        2,
        &format!("layer + composed-network gradient checks: worst relative error {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: matching equals the exhaustive-permutation minimum.

fn brute_force_best(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let m = if n == 0 { 0 } else { cost[0].len() };
    let assign_count = n.min(m);
    let mut best = f64::INFINITY;
    let mut used = vec![false; m];
    fn rec(
        cost: &[Vec<f64>],
        row: usize,
        left: usize,
        acc: f64,
        used: &mut [bool],
        best: &mut f64,
    ) {
        let n = cost.len();
        if row == n {
            if left == 0 && acc < *best {
                *best = acc;
            }
            return;
        }
        if n - row > left {
            rec(cost, row + 1, left, acc, used, best);
        }
        if left > 0 {
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    rec(cost, row + 1, left - 1, acc + cost[row][j], used, best);
                    used[j] = false;
                }
            }
        }
    }
    rec(cost, 0, assign_count, 0.0, &mut used, &mut best);
    best
}

#[test]
fn criterion_3_matching_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut exact = 0;
    const CASES: usize = 500;
    for _ in 0..CASES {
        let n = rng.random_range(1..=7);
        let m = rng.random_range(1..=7);
        let cost: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.random_range(0.0..10.0)).collect())
            .collect();
        let assign = assign_min_cost(&cost);
        let total = assignment_cost(&cost, &assign);
        // brute force sums the chosen entries in the same row order, so equal
        // assignments produce bit-identical totals
        let best = brute_force_best(&cost);
        if total == best {
            exact += 1;
        }
    }
    let ok = exact == CASES;
    verdict(
        ok,
        3,
        &format!("assignment total equals exhaustive minimum on {exact}/{CASES} random instances"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: geometry oracles.

fn mc_iou(a: &OrientedBox3, b: &OrientedBox3, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut lo = DVec3::splat(f64::INFINITY);
    let mut hi = DVec3::splat(f64::NEG_INFINITY);
    for bx in [a, b] {
        for [x, y] in bx.footprint() {
            lo.x = lo.x.min(x);
            hi.x = hi.x.max(x);
            lo.y = lo.y.min(y);
            hi.y = hi.y.max(y);
        }
        let (z0, z1) = bx.z_interval();
        lo.z = lo.z.min(z0);
        hi.z = hi.z.max(z1);
    }
    let (mut na, mut nb, mut nab) = (0u64, 0u64, 0u64);
    for _ in 0..samples {
        let p = DVec3::new(
            rng.random_range(lo.x..hi.x),
            rng.random_range(lo.y..hi.y),
            rng.random_range(lo.z..hi.z),
        );
        let ia = a.contains(p);
        let ib = b.contains(p);
        na += ia as u64;
        nb += ib as u64;
        nab += (ia && ib) as u64;
    }
    if na + nb - nab == 0 {
        0.0
    } else {
        nab as f64 / (na + nb - nab) as f64
    }
}

#[test]
fn criterion_4_geometry_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);

    // IoU vs Monte Carlo on 50 random yawed pairs
    let mut max_iou_err = 0.0f64;
    for _ in 0..50 {
        let mk = |rng: &mut ChaCha8Rng, center: DVec3| {
            OrientedBox3::new(
                center,
                DVec3::new(
                    rng.random_range(0.4..2.0),
                    rng.random_range(0.4..2.0),
                    rng.random_range(0.4..2.0),
                ),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
            .unwrap()
        };
        let a = mk(&mut rng, DVec3::ZERO);
        let offset = DVec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-0.6..0.6),
        );
        let b = mk(&mut rng, offset);
        let exact = box_iou_3d(&a, &b);
        let mc = mc_iou(&a, &b, 1_000_000, &mut rng);
        max_iou_err = max_iou_err.max((exact - mc).abs());
    }

    // shape_distance vs an independent double loop, exact equality
    let mut shape_exact = true;
    for _ in 0..100 {
        let n = rng.random_range(1..=50);
        let m = rng.random_range(1..=50);
        let mk_cloud = |rng: &mut ChaCha8Rng, n: usize| {
            deepcontext::geometry::PointCloud::new(
                (0..n)
                    .map(|_| {
                        DVec3::new(
                            rng.random_range(-2.0..2.0),
                            rng.random_range(-2.0..2.0),
                            rng.random_range(-2.0..2.0),
                        )
                    })
                    .collect(),
                deepcontext::geometry::Frame::Gravity,
            )
        };
        let p = mk_cloud(&mut rng, n);
        let v = mk_cloud(&mut rng, m);
        let got = shape_distance(&p, &v).unwrap();
        let term = |xs: &deepcontext::geometry::PointCloud,
                    ys: &deepcontext::geometry::PointCloud| {
            let mut total = 0.0;
            for a in &xs.points {
                let mut best = f64::INFINITY;
                for b in &ys.points {
                    best = best.min((*a - *b).length());
                }
                total += best;
            }
            total / xs.points.len() as f64
        };
        if got != term(&p, &v) + term(&v, &p) {
            shape_exact = false;
        }
    }

    // render / back-project round trip within 1e-6 m of the surface
    let cam = CameraIntrinsics::new(90.0, 90.0, 48.0, 36.0, 96, 72).unwrap();
    let mut max_surface_err = 0.0f64;
    for case in 0..5 {
        // a slab with a known front plane at depth z0
        let z0 = 1.2 + 0.45 * case as f64;
        let quad = TriMesh::new(
            vec![
                DVec3::new(-1.5, -1.2, z0),
                DVec3::new(1.5, -1.2, z0),
                DVec3::new(1.5, 1.2, z0),
                DVec3::new(-1.5, 1.2, z0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let depth = render_mesh_depth(&quad, &cam);
        let cloud = backproject_depth(&depth, &cam).unwrap();
        assert!(!cloud.is_empty());
        for p in &cloud.points {
            max_surface_err = max_surface_err.max((p.z - z0).abs());
        }
    }

    let ok = max_iou_err < 5e-3 && shape_exact && max_surface_err < 1e-6;
    verdict(
        ok,
        4,
        &format!(
            "IoU vs MC max |err| {max_iou_err:.2e}; shape_distance exact: {shape_exact}; \
             render/backproject max surface err {max_surface_err:.2e} m"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: encoder round trips.

#[test]
fn criterion_5_encoder_roundtrips() {
    // all yaws at 0.05 degree resolution
    let mut max_yaw_err = 0.0f64;
    let mut i = 0;
    while (i as f64) * 0.05 < 360.0 {
        let yaw = ((i as f64) * 0.05).to_radians();
        let back = bin_to_yaw(yaw_to_bin(yaw));
        max_yaw_err = max_yaw_err.max(deepcontext::geometry::yaw_difference(yaw, back).to_degrees());
        i += 1;
    }

    // translations across the full in-range box
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut max_axis_err = 0.0f64;
    for _ in 0..5000 {
        let off = DVec3::new(
            rng.random_range(-2.5..2.5),
            rng.random_range(-2.5..2.5),
            rng.random_range(-1.5..1.0),
        );
        let back = cell_to_offset(offset_to_cell(off));
        for a in 0..3 {
            max_axis_err = max_axis_err.max((back[a] - off[a]).abs());
        }
    }

    let zero_cell = offset_to_cell(DVec3::ZERO);
    let mut distinct = std::collections::BTreeSet::new();
    for cell in 0..726 {
        distinct.insert(format!("{:?}", cell_to_offset(cell)));
        assert_eq!(offset_to_cell(cell_to_offset(cell)), cell);
    }

    let ok = max_yaw_err <= 5.0 + 1e-9
        && max_axis_err <= 0.25 + 1e-9
        && zero_cell == 363
        && distinct.len() == 726;
    verdict(
        ok,
        5,
        &format!(
            "yaw roundtrip <= {max_yaw_err:.3} deg; translation <= {max_axis_err:.3} m/axis; \
             zero offset cell {zero_cell}; {} distinct cells",
            distinct.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: TSDF properties on the paper grid.

#[test]
fn criterion_6_tsdf_properties() {
    let cam = CameraIntrinsics::new(300.0, 300.0, 160.0, 120.0, 320, 240).unwrap();
    let grid = default_grid();
    let mut all_bounded = true;
    let mut saturation_exact = true;
    let mut max_crossing_err = 0.0f64;

    for case in 0..3 {
        let wall_z = 2.0 + 0.8 * case as f64;
        let depth = deepcontext::geometry::DepthImage::from_values(
            320,
            240,
            vec![wall_z as f32; 320 * 240],
        )
        .unwrap();
        // grid frame = camera frame here (x right, y down, z forward)
        let vol = compute_tsdf(
            &depth,
            &cam,
            &deepcontext::geometry::RigidTransform::IDENTITY,
            &grid,
        )
        .unwrap();
        all_bounded &= vol.values.iter().all(|v| (-1.0..=1.0).contains(v));

        // voxels more than 0.15 m from the wall along their rays saturate
        let [nx, ny, nz] = grid.dims;
        for iz in 0..nz {
            for iy in (0..ny).step_by(7) {
                for ix in (0..nx).step_by(7) {
                    let p = grid.voxel_center(ix, iy, iz);
                    if p.z <= 0.0 {
                        continue;
                    }
                    let u = (cam.fx * p.x / p.z + cam.cx).round();
                    let v = (cam.fy * p.y / p.z + cam.cy).round();
                    if u < 0.0 || v < 0.0 || u >= 320.0 || v >= 240.0 {
                        continue;
                    }
                    let sd = wall_z - p.z;
                    let val = vol.get(ix, iy, iz);
                    if sd > 0.15 + 1e-9 && val != 1.0 {
                        saturation_exact = false;
                    }
                    if sd < -0.15 - 1e-9 && val != -1.0 {
                        saturation_exact = false;
                    }
                }
            }
        }

        // zero crossing along central columns within one voxel of the wall
        for (ix, iy) in [(64, 64), (70, 60), (60, 70)] {
            let mut crossing = None;
            for iz in 1..nz {
                let a = vol.get(ix, iy, iz - 1);
                let b = vol.get(ix, iy, iz);
                if a > 0.0 && b <= 0.0 {
                    crossing = Some(grid.voxel_center(ix, iy, iz).z);
                    break;
                }
            }
            // the signed distance is wall_z - voxel depth, so the crossing
            // sits at z = wall_z exactly; require it within one voxel
            if let Some(z) = crossing {
                max_crossing_err = max_crossing_err.max((z - wall_z).abs());
            } else if wall_z < grid.origin.z + grid.extent().z {
                max_crossing_err = f64::INFINITY;
            }
        }
    }

    let ok = all_bounded && saturation_exact && max_crossing_err <= grid.voxel_size + 1e-9;
    verdict(
        ok,
        6,
        &format!(
            "values bounded: {all_bounded}; truncation saturation exact: {saturation_exact}; \
             zero crossing within {max_crossing_err:.3} m (voxel {})",
            grid.voxel_size
        ),
    );
}

// ---------------------------------------------------------------------------
// Criteria 7-9: the desk-scale end-to-end run.

#[test]
fn criterion_7_desk_scale_end_to_end() {
    let run = pipeline_run::first_run();
    let m = &run.metrics;
    let ok = m.classification_accuracy >= 0.95
        && m.rotation_accuracy_symmetric >= 0.90
        && m.translation_mean_error <= 0.5
        && m.mean_ap >= 0.70
        && m.rr_le_rg
        && run.wall_clock.as_secs() <= 30 * 60;
    verdict(
        ok,
        7,
        &format!(
            "classification {:.3} (>=0.95), rotation sym {:.3} (>=0.90), translation {:.3} m \
             (<=0.5), mAP {:.3} (>=0.70), Rr<=Rg {}, wall clock {:.0?} (<=30 min)",
            m.classification_accuracy,
            m.rotation_accuracy_symmetric,
            m.translation_mean_error,
            m.mean_ap,
            m.rr_le_rg,
            run.wall_clock
        ),
    );
}

#[test]
fn criterion_8_inference_latency() {
    let run = pipeline_run::first_run();
    let ok = run.single_scene_latency.as_secs_f64() <= 2.0;
    verdict(
        ok,
        8,
        &format!(
            "parse_depth_image single-threaded latency {:.3} s (<= 2 s)",
            run.single_scene_latency.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_9_determinism() {
    let run1 = pipeline_run::first_run();
    let run2 = pipeline_run::second_run();
    let digests_equal = run1.digest == run2.digest;
    let reports_equal = run1.report_json == run2.report_json;
    let ok = digests_equal && reports_equal;
    verdict(
        ok,
        9,
        &format!(
            "weight digests equal: {digests_equal} ({}); report JSON identical: {reports_equal}",
            run1.digest
        ),
    );
}
