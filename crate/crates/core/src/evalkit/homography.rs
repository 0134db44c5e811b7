use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Planar projective map, stored with `h33 = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography {
    m: [[f64; 3]; 3],
}

const DET_EPS: f64 = 1e-12;
const W_EPS: f64 = 1e-12;

impl Homography {
    /// Normalizes `m` so that `h33 = 1` and checks invertibility.
    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Homography("entries must be finite".into()));
        }
        let h33 = m[2][2];
        if h33.abs() < W_EPS {
            return Err(Error::Homography("h33 is zero, cannot normalize".into()));
        }
        let mut n = m;
        if h33 != 1.0 {
            for v in n.iter_mut().flatten() {
                *v /= h33;
            }
        }
        let h = Self { m: n };
        let det = h.det();
        if det.is_nan() || det.abs() <= DET_EPS {
            return Err(Error::Homography(format!(
                "singular matrix (det = {det:e})"
            )));
        }
        Ok(h)
    }

    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]],
        }
    }

    /// Axis-aligned scaling `diag(sx, sy, 1)`.
    pub fn scaling(sx: f64, sy: f64) -> Result<Self> {
        Self::new([[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// `self · other` (apply `other` first).
    pub fn compose(&self, other: &Homography) -> Result<Homography> {
        let (a, b) = (&self.m, &other.m);
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        Homography::new(m)
    }

    /// Inverse via the adjugate.
    pub fn inverse(&self) -> Result<Homography> {
        let m = &self.m;
        let det = self.det();
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
            m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
        };
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        let mut inv = adj;
        for v in inv.iter_mut().flatten() {
            *v /= det;
        }
        Homography::new(inv)
    }

    /// Maps `(x, y)`; `None` when the homogeneous coordinate vanishes.
    pub fn apply(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let m = &self.m;
        let w = m[2][0] * x + m[2][1] * y + m[2][2];
        if w.abs() < W_EPS {
            return None;
        }
        let u = m[0][0] * x + m[0][1] * y + m[0][2];
        let v = m[1][0] * x + m[1][1] * y + m[1][2];
        if w == 1.0 {
            Some((u, v))
        } else {
            Some((u / w, v / w))
        }
    }

    /// Nine whitespace-separated floats, row-major, one row per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.m {
            let _ = writeln!(out, "{} {} {}", row[0], row[1], row[2]);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let vals: Vec<f64> = text
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Homography(format!("bad number `{t}`")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 9 {
            return Err(Error::Homography(format!(
                "expected 9 values, found {}",
                vals.len()
            )));
        }
        Self::new([
            [vals[0], vals[1], vals[2]],
            [vals[3], vals[4], vals[5]],
            [vals[6], vals[7], vals[8]],
        ])
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Self::parse(&text).map_err(|e| Error::File {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Warps points; entries are `None` where the projection is undefined.
pub fn warp_points(h: &Homography, points: &[(f64, f64)]) -> Vec<Option<(f64, f64)>> {
    points.iter().map(|&(x, y)| h.apply(x, y)).collect()
}
