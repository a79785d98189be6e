//! Minimal OBJ subset: `v` and `f` statements. Polygonal faces are
//! fan-triangulated; negative (relative) indices are supported; everything
//! else is ignored.

use crate::math::Vec3;

pub struct ObjGeometry {
    pub vertices: Vec<Vec3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

pub fn parse_obj(text: &str) -> Result<ObjGeometry, String> {
    let mut vertices: Vec<Vec3<f64>> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in &mut coords {
                    let tok = parts
                        .next()
                        .ok_or_else(|| format!("line {}: vertex needs 3 coordinates", lineno + 1))?;
                    *c = tok
                        .parse()
                        .map_err(|_| format!("line {}: bad vertex coordinate {:?}", lineno + 1, tok))?;
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut idx: Vec<usize> = Vec::new();
                for tok in parts {
                    let first = tok.split('/').next().unwrap_or("");
                    let raw: i64 = first
                        .parse()
                        .map_err(|_| format!("line {}: bad face index {:?}", lineno + 1, tok))?;
                    let resolved = if raw > 0 {
                        raw as usize - 1
                    } else if raw < 0 {
                        let back = (-raw) as usize;
                        if back > vertices.len() {
                            return Err(format!("line {}: relative index {} out of range", lineno + 1, raw));
                        }
                        vertices.len() - back
                    } else {
                        return Err(format!("line {}: face index 0 is invalid", lineno + 1));
                    };
                    if resolved >= vertices.len() {
                        return Err(format!("line {}: face index {} out of range", lineno + 1, raw));
                    }
                    idx.push(resolved);
                }
                if idx.len() < 3 {
                    return Err(format!("line {}: face needs at least 3 vertices", lineno + 1));
                }
                for i in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[i], idx[i + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(ObjGeometry { vertices, triangles })
}
