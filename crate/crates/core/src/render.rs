//! Gaussian splats and a small software renderer.
//!
//! Camera space follows the pinhole convention: x right, y down, z forward.
//! Pixel `(i, j)` is centered at `(i, j)` and the principal point sits at
//! `((W - 1) / 2, (H - 1) / 2)`, so an odd-sized image has a pixel exactly on
//! the optical axis.

use std::io::Write;
use std::path::Path;

use image::ImageEncoder;
use nalgebra::{Matrix2, Matrix3, Quaternion, UnitQuaternion, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{vec3, Vec3};

const UNIT_TOLERANCE: f64 = 1e-6;
/// Splats closer to the camera plane than this are skipped.
const NEAR: f64 = 1e-3;
/// Footprint radius in standard deviations.
const FOOTPRINT_SIGMAS: f64 = 3.0;

/// One splat. `rotation` is a unit quaternion `[w, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub center: [f64; 3],
    pub scale: [f64; 3],
    pub rotation: [f64; 4],
    pub opacity: f64,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GaussianCloud {
    pub gaussians: Vec<Gaussian>,
}

fn check_quaternion(q: &[f64; 4]) -> Result<UnitQuaternion<f64>> {
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::InvalidQuaternion(format!("norm {norm} is not 1")));
    }
    Ok(UnitQuaternion::new_unchecked(Quaternion::new(q[0], q[1], q[2], q[3])))
}

/// `R S S^T R^T` for scales `s` and unit quaternion `q = [w, x, y, z]`.
pub fn gaussian_covariance(s: [f64; 3], q: [f64; 4]) -> Result<Matrix3<f64>> {
    if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidConfig(format!("scales must be > 0, got {s:?}")));
    }
    let r = *check_quaternion(&q)?.to_rotation_matrix().matrix();
    let rs = r * Matrix3::from_diagonal(&vec3(s));
    Ok(rs * rs.transpose())
}

/// Unnormalized density `exp(-(x - mu)^T Sigma^-1 (x - mu) / 2)`.
pub fn gaussian_density(x: [f64; 3], mu: [f64; 3], sigma: &Matrix3<f64>) -> Result<f64> {
    let chol = sigma.cholesky().ok_or(Error::SingularCovariance)?;
    let d = vec3(x) - vec3(mu);
    let y = chol.l().solve_lower_triangular(&d).ok_or(Error::SingularCovariance)?;
    Ok((-0.5 * y.norm_squared()).exp())
}

impl GaussianCloud {
    pub fn validate(&self) -> Result<()> {
        for (i, g) in self.gaussians.iter().enumerate() {
            check_quaternion(&g.rotation).map_err(|e| Error::InvalidQuaternion(format!("gaussian {i}: {e}")))?;
            if g.scale.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidConfig(format!("gaussian {i}: scales must be > 0")));
            }
            if !(0.0..=1.0).contains(&g.opacity) {
                return Err(Error::InvalidConfig(format!("gaussian {i}: opacity must be in [0, 1]")));
            }
            if g.center.iter().chain(&g.color).any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("gaussian {i}: non-finite center or color")));
            }
        }
        Ok(())
    }

    /// Isotropic splats of one color at `points`.
    pub fn from_points(points: &[Vec3], radius: f64, opacity: f64, color: [f64; 3]) -> Self {
        GaussianCloud {
            gaussians: points
                .iter()
                .map(|p| Gaussian {
                    center: [p.x, p.y, p.z],
                    scale: [radius; 3],
                    rotation: [1.0, 0.0, 0.0, 0.0],
                    opacity,
                    color,
                })
                .collect(),
        }
    }

    pub fn extend(&mut self, other: GaussianCloud) {
        self.gaussians.extend(other.gaussians);
    }
}

/// Pinhole camera. `rotation` maps camera axes to world axes (its columns
/// are the camera's right, down and forward directions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: [f64; 3],
    pub rotation: [[f64; 3]; 3],
    pub focal: f64,
    pub width: usize,
    pub height: usize,
    pub background: [f64; 3],
}

impl Camera {
    /// Camera at `eye` looking at `target`, with `up` pointing up in the image.
    pub fn look_at(eye: [f64; 3], target: [f64; 3], up: [f64; 3], focal: f64, width: usize, height: usize) -> Result<Self> {
        let forward = (vec3(target) - vec3(eye)).try_normalize(1e-12);
        let (Some(forward), Some(right)) = (
            forward,
            forward.and_then(|f| f.cross(&vec3(up)).try_normalize(1e-12)),
        ) else {
            return Err(Error::InvalidConfig("degenerate look-at direction".into()));
        };
        let down = forward.cross(&right);
        let m = Matrix3::from_columns(&[right, down, forward]);
        let cam = Camera {
            position: eye,
            rotation: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])),
            focal,
            width,
            height,
            background: [1.0; 3],
        };
        cam.validate()?;
        Ok(cam)
    }

    fn world_from_camera(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.rotation[r][c])
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig("resolution must be at least 1x1".into()));
        }
        if !(self.focal.is_finite() && self.focal > 0.0) {
            return Err(Error::InvalidConfig(format!("focal must be > 0, got {}", self.focal)));
        }
        let r = self.world_from_camera();
        let err = (r.transpose() * r - Matrix3::identity()).amax();
        if !(err <= UNIT_TOLERANCE) || r.determinant() <= 0.0 {
            return Err(Error::InvalidConfig("camera rotation is not a rotation".into()));
        }
        if self.position.iter().chain(&self.background).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("camera has non-finite entries".into()));
        }
        Ok(())
    }
}

/// Linear RGB image with the accumulated opacity of every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major.
    pub pixels: Vec<[f64; 3]>,
    pub alpha: Vec<f64>,
}

impl Image {
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    /// 8-bit RGB, row-major.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|p| p.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect()
    }

    pub fn write_ppm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.to_rgb8())
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut bytes = Vec::new();
        image::codecs::png::PngEncoder::new(&mut bytes)
            .write_image(
                &self.to_rgb8(),
                self.width as u32,
                self.height as u32,
                image::ExtendedColorType::Rgb8,
            )
            .map_err(|e| Error::Image(e.to_string()))?;
        Ok(bytes)
    }

    /// Write as PPM if the extension is `.ppm`, PNG otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |source| Error::Io {
            path: path.display().to_string(),
            source,
        };
        let bytes = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm")) {
            let mut b = Vec::new();
            self.write_ppm(&mut b).map_err(io)?;
            b
        } else {
            self.encode_png()?
        };
        std::fs::write(path, bytes).map_err(io)
    }
}

/// A splat after projection to the image plane.
struct Splat {
    depth: f64,
    index: usize,
    mean: Vector2<f64>,
    conic: Matrix2<f64>,
    radius: f64,
    opacity: f64,
    color: [f64; 3],
}

fn project(g: &Gaussian, index: usize, camera: &Camera, r_cw: &Matrix3<f64>) -> Result<Option<Splat>> {
    let p = r_cw * (vec3(g.center) - vec3(camera.position));
    if p.z <= NEAR {
        return Ok(None);
    }
    let f = camera.focal;
    let cx = (camera.width as f64 - 1.0) / 2.0;
    let cy = (camera.height as f64 - 1.0) / 2.0;
    let mean = Vector2::new(f * p.x / p.z + cx, f * p.y / p.z + cy);
    // Jacobian of the perspective map at the center
    let j = nalgebra::Matrix2x3::new(
        f / p.z,
        0.0,
        -f * p.x / (p.z * p.z),
        0.0,
        f / p.z,
        -f * p.y / (p.z * p.z),
    );
    let sigma = r_cw * gaussian_covariance(g.scale, g.rotation)? * r_cw.transpose();
    let cov2 = j * sigma * j.transpose();
    let Some(conic) = cov2.try_inverse() else {
        return Ok(None);
    };
    let largest = cov2.symmetric_eigenvalues().max();
    if !(largest > 0.0) {
        return Ok(None);
    }
    Ok(Some(Splat {
        depth: p.z,
        index,
        mean,
        conic,
        radius: FOOTPRINT_SIGMAS * largest.sqrt(),
        opacity: g.opacity,
        color: g.color,
    }))
}

/// Front-to-back alpha compositing of the depth-sorted, projected splats
/// over the camera background. Each splat contributes `opacity * G` inside a
/// three-sigma footprint.
pub fn render_frame(cloud: &GaussianCloud, camera: &Camera) -> Result<Image> {
    camera.validate()?;
    cloud.validate()?;
    let r_cw = camera.world_from_camera().transpose();
    let mut splats: Vec<Splat> = Vec::with_capacity(cloud.gaussians.len());
    for (i, g) in cloud.gaussians.iter().enumerate() {
        if let Some(s) = project(g, i, camera, &r_cw)? {
            splats.push(s);
        }
    }
    splats.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));

    let (w, h) = (camera.width, camera.height);
    let rows: Vec<(Vec<[f64; 3]>, Vec<f64>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let py = y as f64;
            let mut color = vec![[0.0; 3]; w];
            let mut transmittance = vec![1.0; w];
            for s in &splats {
                if (py - s.mean.y).abs() > s.radius {
                    continue;
                }
                let x0 = (s.mean.x - s.radius).ceil().max(0.0);
                let x1 = (s.mean.x + s.radius).floor().min(w as f64 - 1.0);
                if x0 > x1 {
                    continue;
                }
                for x in x0 as usize..=x1 as usize {
                    let d = Vector2::new(x as f64 - s.mean.x, py - s.mean.y);
                    let g = (-0.5 * d.dot(&(s.conic * d))).exp();
                    let alpha = s.opacity * g;
                    if alpha <= 0.0 {
                        continue;
                    }
                    let t = transmittance[x];
                    for (acc, c) in color[x].iter_mut().zip(s.color) {
                        *acc += t * alpha * c;
                    }
                    transmittance[x] = t * (1.0 - alpha);
                }
            }
            let alpha = transmittance.iter().map(|t| 1.0 - t).collect();
            for (c, t) in color.iter_mut().zip(&transmittance) {
                for (acc, b) in c.iter_mut().zip(camera.background) {
                    *acc += t * b;
                }
            }
            (color, alpha)
        })
        .collect();

    let mut pixels = Vec::with_capacity(w * h);
    let mut alpha = Vec::with_capacity(w * h);
    for (c, a) in rows {
        pixels.extend(c);
        alpha.extend(a);
    }
    Ok(Image {
        width: w,
        height: h,
        pixels,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    const IDENTITY_Q: [f64; 4] = [1.0, 0.0, 0.0, 0.0];

    #[test]
    fn covariance_examples() {
        assert_abs_diff_eq!(gaussian_covariance([1.0; 3], IDENTITY_Q).unwrap(), Matrix3::identity());
        assert_abs_diff_eq!(
            gaussian_covariance([2.0, 1.0, 1.0], IDENTITY_Q).unwrap(),
            Matrix3::from_diagonal(&Vec3::new(4.0, 1.0, 1.0))
        );
        let z90 = [FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2];
        assert_abs_diff_eq!(
            gaussian_covariance([2.0, 1.0, 1.0], z90).unwrap(),
            Matrix3::from_diagonal(&Vec3::new(1.0, 4.0, 1.0)),
            epsilon = 1e-12
        );
        assert!(matches!(
            gaussian_covariance([1.0; 3], [1.0, 1.0, 0.0, 0.0]),
            Err(Error::InvalidQuaternion(_))
        ));
    }

    #[test]
    fn density_examples() {
        let i = Matrix3::identity();
        assert_eq!(gaussian_density([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], &i).unwrap(), 1.0);
        let v = gaussian_density([1.0, 0.0, 0.0], [0.0; 3], &i).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
        assert!(matches!(
            gaussian_density([0.0; 3], [0.0; 3], &Matrix3::zeros()),
            Err(Error::SingularCovariance)
        ));
    }

    fn axis_camera(size: usize) -> Camera {
        Camera {
            position: [0.0; 3],
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            focal: 50.0,
            width: size,
            height: size,
            background: [0.0; 3],
        }
    }

    fn splat(z: f64, color: [f64; 3], opacity: f64) -> Gaussian {
        Gaussian {
            center: [0.0, 0.0, z],
            scale: [0.1; 3],
            rotation: IDENTITY_Q,
            opacity,
            color,
        }
    }

    #[test]
    fn empty_cloud_is_background() {
        let mut cam = axis_camera(5);
        cam.background = [0.2, 0.4, 0.6];
        let img = render_frame(&GaussianCloud::default(), &cam).unwrap();
        assert!(img.pixels.iter().all(|p| *p == [0.2, 0.4, 0.6]));
        assert!(img.alpha.iter().all(|a| *a == 0.0));
    }

    #[test]
    fn opaque_splat_on_axis() {
        let cloud = GaussianCloud {
            gaussians: vec![splat(2.0, [1.0, 0.0, 0.0], 1.0)],
        };
        let img = render_frame(&cloud, &axis_camera(9)).unwrap();
        assert!(img.pixel(4, 4)[0] > 0.9);
        assert_eq!(img.pixel(4, 4), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn opaque_front_splat_hides_the_back() {
        let cloud = GaussianCloud {
            gaussians: vec![splat(4.0, [0.0, 0.0, 1.0], 1.0), splat(2.0, [0.0, 1.0, 0.0], 1.0)],
        };
        let img = render_frame(&cloud, &axis_camera(9)).unwrap();
        assert_eq!(img.pixel(4, 4), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn behind_camera_is_ignored() {
        let cloud = GaussianCloud {
            gaussians: vec![splat(-2.0, [1.0, 0.0, 0.0], 1.0)],
        };
        let img = render_frame(&cloud, &axis_camera(5)).unwrap();
        assert!(img.alpha.iter().all(|a| *a == 0.0));
    }

    #[test]
    fn look_at_orientation() {
        let cam = Camera::look_at([0.0, 3.0, 1.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0], 100.0, 11, 11).unwrap();
        let r = cam.world_from_camera();
        assert_abs_diff_eq!(r.column(0).into_owned(), Vec3::new(-1.0, 0.0, 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(r.column(1).into_owned(), Vec3::new(0.0, 0.0, -1.0), epsilon = 1e-12);
    }

    #[test]
    fn ppm_header() {
        let img = render_frame(&GaussianCloud::default(), &axis_camera(3)).unwrap();
        let mut out = Vec::new();
        img.write_ppm(&mut out).unwrap();
        assert!(out.starts_with(b"P6\n3 3\n255\n"));
        assert_eq!(out.len(), 11 + 27);
        assert!(img.encode_png().unwrap().starts_with(b"\x89PNG"));
    }
}
