//! Projective truncated signed distance volumes from single depth images.

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthImage, RigidTransform};
use glam::DVec3;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Voxel grid layout in a gravity-aligned working frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub dims: [usize; 3],
    pub voxel_size: f64,
    pub truncation: f64,
    /// Position of the (0,0,0) voxel corner.
    pub origin: DVec3,
}

impl GridConfig {
    pub fn new(dims: [usize; 3], voxel_size: f64, truncation: f64, origin: DVec3) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidGrid(format!("dims must be positive, got {dims:?}")));
        }
        if voxel_size <= 0.0 || truncation <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "voxel_size {voxel_size} and truncation {truncation} must be positive"
            )));
        }
        Ok(Self {
            dims,
            voxel_size,
            truncation,
            origin,
        })
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Physical size of the grid in meters.
    pub fn extent(&self) -> DVec3 {
        DVec3::new(
            self.dims[0] as f64 * self.voxel_size,
            self.dims[1] as f64 * self.voxel_size,
            self.dims[2] as f64 * self.voxel_size,
        )
    }

    #[inline]
    pub fn voxel_center(&self, ix: usize, iy: usize, iz: usize) -> DVec3 {
        self.origin
            + DVec3::new(
                (ix as f64 + 0.5) * self.voxel_size,
                (iy as f64 + 0.5) * self.voxel_size,
                (iz as f64 + 0.5) * self.voxel_size,
            )
    }

    /// x-fastest flat index.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.dims[1] + iy) * self.dims[0] + ix
    }

    pub fn with_origin(mut self, origin: DVec3) -> Self {
        self.origin = origin;
        self
    }
}

/// Full-resolution grid: 128x128x64 voxels of 0.05 m, 0.15 m truncation,
/// centered on the working-frame origin (6.4 x 6.4 x 3.2 m coverage).
pub fn default_grid() -> GridConfig {
    GridConfig {
        dims: [128, 128, 64],
        voxel_size: 0.05,
        truncation: 0.15,
        origin: DVec3::new(-3.2, -3.2, -1.6),
    }
}

/// Coarse grid covering the same volume at 0.2 m voxels; keeps CPU training
/// runs in the minutes range.
pub fn desk_grid() -> GridConfig {
    GridConfig {
        dims: [32, 32, 16],
        voxel_size: 0.2,
        truncation: 0.3,
        origin: DVec3::new(-3.2, -3.2, -1.6),
    }
}

/// Signed distances normalized to [-1, 1], x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TsdfVolume {
    pub config: GridConfig,
    pub values: Vec<f32>,
}

impl TsdfVolume {
    #[inline]
    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> f32 {
        self.values[self.config.index(ix, iy, iz)]
    }
}

/// Computes a projective TSDF: each voxel center is transformed into the
/// camera, projected to its nearest pixel, and scored by
/// `(measured depth - voxel ray depth)` clamped to the truncation band and
/// normalized. Voxels outside the frustum or seeing missing depth read +1
/// (treated as free/unobserved, keeping the volume single-channel).
pub fn compute_tsdf(
    depth: &DepthImage,
    cam: &CameraIntrinsics,
    world_from_camera: &RigidTransform,
    cfg: &GridConfig,
) -> Result<TsdfVolume> {
    if !depth.matches(cam) {
        return Err(Error::DimensionMismatch {
            got: (depth.width, depth.height),
            expected: (cam.width, cam.height),
        });
    }
    let cam_from_world = world_from_camera.inverse();
    let [nx, ny, nz] = cfg.dims;
    let mut values = vec![1.0f32; cfg.voxel_count()];
    let inv_trunc = 1.0 / cfg.truncation;

    for iz in 0..nz {
        for iy in 0..ny {
            let row_base = (iz * ny + iy) * nx;
            for ix in 0..nx {
                let p_cam = cam_from_world.apply(cfg.voxel_center(ix, iy, iz));
                if p_cam.z <= 0.0 {
                    continue; // stays +1
                }
                let u = (cam.fx * p_cam.x / p_cam.z + cam.cx).round();
                let v = (cam.fy * p_cam.y / p_cam.z + cam.cy).round();
                if u < 0.0 || v < 0.0 || u >= cam.width as f64 || v >= cam.height as f64 {
                    continue;
                }
                let measured = depth.get(u as usize, v as usize) as f64;
                if measured <= 0.0 {
                    continue;
                }
                let sd = (measured - p_cam.z).clamp(-cfg.truncation, cfg.truncation);
                values[row_base + ix] = (sd * inv_trunc) as f32;
            }
        }
    }
    Ok(TsdfVolume {
        config: *cfg,
        values,
    })
}

/// Binary format: three little-endian u32 dims, then f32 values x-fastest.
pub fn save_volume(volume: &TsdfVolume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    for d in volume.config.dims {
        out.write_all(&(d as u32).to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    for v in &volume.values {
        out.write_all(&v.to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a volume written by [`save_volume`]; grid metadata beyond dims is
/// not stored in the file, so the caller supplies the config it expects.
pub fn load_volume(path: impl AsRef<Path>, cfg: &GridConfig) -> Result<TsdfVolume> {
    let path = path.as_ref();
    let mut file = std::io::BufReader::new(
        std::fs::File::open(path).map_err(|e| Error::io(path, e))?,
    );
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let mut b = [0u8; 4];
        file.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
        *d = u32::from_le_bytes(b) as usize;
    }
    if dims != cfg.dims {
        return Err(Error::GridMismatch {
            got: dims,
            expected: cfg.dims,
        });
    }
    let mut values = Vec::with_capacity(cfg.voxel_count());
    let mut b = [0u8; 4];
    for _ in 0..cfg.voxel_count() {
        file.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
        values.push(f32::from_le_bytes(b));
    }
    Ok(TsdfVolume {
        config: *cfg,
        values,
    })
}
