//! Built-in argument-computation rules for dictionary entries.

use super::{GeometryError, GeometrySignature};
use crate::graph::PropertyValue;
use crate::math::Vec3;

/// Parameter cells per direction when a Bézier patch is tessellated.
pub const BEZIER_TESSELLATION_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgRule {
    /// Parallelogram → two triangles over its four corners.
    ParallelogramTri2,
    /// Parallelogram → four triangles fanning its centroid.
    ParallelogramTri4,
    /// Cylinder{radius, length} → Cylinder{radius, height}.
    CylinderLengthToHeight,
    CylinderHeightToLength,
    /// Control grid copied unchanged.
    BezierPassthrough,
    /// Bézier patch sampled on a fixed grid into a triangle set.
    BezierTessellate,
    /// Arguments copied unchanged under the target type name.
    Passthrough,
}

impl ArgRule {
    const ALL: [ArgRule; 7] = [
        ArgRule::ParallelogramTri2,
        ArgRule::ParallelogramTri4,
        ArgRule::CylinderLengthToHeight,
        ArgRule::CylinderHeightToLength,
        ArgRule::BezierPassthrough,
        ArgRule::BezierTessellate,
        ArgRule::Passthrough,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArgRule::ParallelogramTri2 => "parallelogram_tri2",
            ArgRule::ParallelogramTri4 => "parallelogram_tri4",
            ArgRule::CylinderLengthToHeight => "cylinder_length_to_height",
            ArgRule::CylinderHeightToLength => "cylinder_height_to_length",
            ArgRule::BezierPassthrough => "bezier_passthrough",
            ArgRule::BezierTessellate => "bezier_tessellate",
            ArgRule::Passthrough => "passthrough",
        }
    }

    pub fn from_name(name: &str) -> Option<ArgRule> {
        Self::ALL.into_iter().find(|r| r.name() == name)
    }

    pub fn apply(self, sig: &GeometrySignature, target: &str) -> Result<Vec<GeometrySignature>, GeometryError> {
        let out = match self {
            ArgRule::ParallelogramTri2 | ArgRule::ParallelogramTri4 => {
                let [o, u, v] = [sig.vec3("origin")?, sig.vec3("u")?, sig.vec3("v")?].map(Vec3::from_array);
                let corners = [o, o + u, o + u + v, o + v];
                let mut vertices: Vec<f64> = corners.iter().flat_map(|c| c.to_array()).collect();
                let indices: Vec<f64> = if self == ArgRule::ParallelogramTri2 {
                    vec![0., 1., 2., 0., 2., 3.]
                } else {
                    let sum = corners.iter().fold(Vec3::zero(), |a, c| a + *c);
                    vertices.extend(sum.scale(0.25).to_array());
                    vec![0., 1., 4., 1., 2., 4., 2., 3., 4., 3., 0., 4.]
                };
                GeometrySignature::new(
                    target,
                    vec![
                        ("vertices", PropertyValue::DoubleList(vertices)),
                        ("indices", PropertyValue::DoubleList(indices)),
                    ],
                )
            }
            ArgRule::CylinderLengthToHeight | ArgRule::CylinderHeightToLength => {
                let (from, to) = if self == ArgRule::CylinderLengthToHeight {
                    ("length", "height")
                } else {
                    ("height", "length")
                };
                let radius = sig.arg("radius").filter(|v| v.as_f64().is_some()).ok_or_else(|| sig.bad("radius must be numeric"))?;
                let axis = sig.arg(from).filter(|v| v.as_f64().is_some()).ok_or_else(|| sig.bad(format!("{from} must be numeric")))?;
                if sig.args.len() != 2 {
                    return Err(sig.bad(format!("expected exactly radius and {from}")));
                }
                GeometrySignature::new(target, vec![("radius", radius.clone()), (to, axis.clone())])
            }
            ArgRule::BezierPassthrough => {
                BezierGrid::from_signature(sig)?;
                GeometrySignature { type_name: target.to_string(), args: sig.args.clone() }
            }
            ArgRule::BezierTessellate => BezierGrid::from_signature(sig)?.tessellate(target, BEZIER_TESSELLATION_CELLS),
            ArgRule::Passthrough => GeometrySignature { type_name: target.to_string(), args: sig.args.clone() },
        };
        Ok(vec![out])
    }
}

/// Tensor-product Bézier control grid, `rows × cols` points stored row by row.
pub(crate) struct BezierGrid {
    pub rows: usize,
    pub cols: usize,
    pub points: Vec<Vec3<f64>>,
}

impl BezierGrid {
    pub fn from_signature(sig: &GeometrySignature) -> Result<Self, GeometryError> {
        let dim = |name: &str| -> Result<usize, GeometryError> {
            match sig.arg(name) {
                Some(PropertyValue::Int(n)) if *n >= 2 => Ok(*n as usize),
                _ => Err(sig.bad(format!("{name} must be an int >= 2"))),
            }
        };
        let (rows, cols) = (dim("rows")?, dim("cols")?);
        let flat = sig.list("control_points")?;
        if flat.len() != rows * cols * 3 {
            return Err(sig.bad(format!("control_points needs {} numbers, found {}", rows * cols * 3, flat.len())));
        }
        let points = flat.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        Ok(BezierGrid { rows, cols, points })
    }

    fn point(&self, i: usize, j: usize) -> Vec3<f64> {
        self.points[i * self.cols + j]
    }

    fn bernstein(n: usize, i: usize, t: f64) -> f64 {
        let mut binom = 1.0;
        for k in 0..i {
            binom = binom * (n - k) as f64 / (k + 1) as f64;
        }
        binom * t.powi(i as i32) * (1.0 - t).powi((n - i) as i32)
    }

    pub fn eval(&self, u: f64, v: f64) -> Vec3<f64> {
        let mut p = Vec3::zero();
        for i in 0..self.rows {
            let bu = Self::bernstein(self.rows - 1, i, u);
            for j in 0..self.cols {
                p = p + self.point(i, j).scale(bu * Self::bernstein(self.cols - 1, j, v));
            }
        }
        p
    }

    /// Triangles of the control net itself, two per cell.
    pub fn control_triangles(&self) -> impl Iterator<Item = [Vec3<f64>; 3]> + '_ {
        (0..self.rows - 1).flat_map(move |i| {
            (0..self.cols - 1).flat_map(move |j| {
                let (a, b, c, d) = (self.point(i, j), self.point(i + 1, j), self.point(i + 1, j + 1), self.point(i, j + 1));
                [[a, b, c], [a, c, d]]
            })
        })
    }

    fn tessellate(&self, target: &str, cells: usize) -> GeometrySignature {
        let n = cells + 1;
        let mut vertices = Vec::with_capacity(n * n * 3);
        for i in 0..n {
            for j in 0..n {
                let p = self.eval(i as f64 / cells as f64, j as f64 / cells as f64);
                vertices.extend(p.to_array());
            }
        }
        let mut indices = Vec::with_capacity(cells * cells * 6);
        for i in 0..cells {
            for j in 0..cells {
                let k = (i * n + j) as f64;
                let n = n as f64;
                indices.extend([k, k + n, k + n + 1.0, k, k + n + 1.0, k + 1.0]);
            }
        }
        GeometrySignature::new(
            target,
            vec![("vertices", PropertyValue::DoubleList(vertices)), ("indices", PropertyValue::DoubleList(indices))],
        )
    }
}
