use super::rules::BezierGrid;
use super::{GeometryError, GeometrySignature};
use crate::math::Vec3;
use crate::scalar::Scalar;

pub fn triangle_area<T: Scalar>(a: Vec3<T>, b: Vec3<T>, c: Vec3<T>) -> T {
    (b - a).cross(c - a).norm() * T::lit(0.5)
}

pub fn parallelogram_area<T: Scalar>(u: Vec3<T>, v: Vec3<T>) -> T {
    u.cross(v).norm()
}

fn triangle_set_area(sig: &GeometrySignature) -> Result<f64, GeometryError> {
    let verts = sig.list("vertices")?;
    let idx = sig.list("indices")?;
    if verts.len() % 3 != 0 || idx.len() % 3 != 0 {
        return Err(sig.bad("vertices and indices must come in triples"));
    }
    let n = verts.len() / 3;
    let vertex = |i: f64| -> Result<Vec3<f64>, GeometryError> {
        if i < 0.0 || i.fract() != 0.0 || i as usize >= n {
            return Err(sig.bad(format!("index {i} out of range")));
        }
        let k = i as usize * 3;
        Ok(Vec3::new(verts[k], verts[k + 1], verts[k + 2]))
    };
    idx.chunks(3).try_fold(0.0, |acc, t| {
        Ok(acc + triangle_area(vertex(t[0])?, vertex(t[1])?, vertex(t[2])?))
    })
}

/// Surface area of a signature. Cylinders report their lateral area; Bézier
/// patches are approximated by their control net.
pub fn surface_area(sig: &GeometrySignature) -> Result<f64, GeometryError> {
    match sig.type_name.as_str() {
        "Parallelogram" => Ok(parallelogram_area(Vec3::from_array(sig.vec3("u")?), Vec3::from_array(sig.vec3("v")?))),
        "TriangleSet" => triangle_set_area(sig),
        "Cylinder" => {
            let r = sig.number("radius")?;
            let h = sig.number("height").or_else(|_| sig.number("length"))?;
            Ok(2.0 * std::f64::consts::PI * r * h)
        }
        "BezierPatch" => {
            let grid = BezierGrid::from_signature(sig)?;
            Ok(grid.control_triangles().map(|[a, b, c]| triangle_area(a, b, c)).sum())
        }
        other => Err(GeometryError::UnsupportedType(other.to_string())),
    }
}
