//! Whitespace-delimited mesh text format with 1-based contiguous ids.
//!
//! ```text
//! thickness 1
//! node 1 0.0 0.0
//! elem 1 1 2 3 4
//! fix 1 2 0.0
//! load 3 1 250.0
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{Dof, Mesh, MeshError, NodalValue};
use crate::Real;

impl<T: Real> Mesh<T> {
    pub fn parse(text: &str) -> Result<Self, MeshError> {
        let mut nodes = Vec::new();
        let mut elements = Vec::new();
        let mut dirichlet = Vec::new();
        let mut neumann = Vec::new();
        let mut thickness = None;

        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let err = |message: String| MeshError::Parse { line, message };
            let expect = |n: usize| {
                if fields.len() == n {
                    Ok(())
                } else {
                    Err(err(format!(
                        "`{}` expects {} fields, found {}",
                        fields[0],
                        n - 1,
                        fields.len() - 1
                    )))
                }
            };
            match fields[0] {
                "thickness" => {
                    expect(2)?;
                    thickness = Some(real::<T>(fields[1], line)?);
                }
                "node" => {
                    expect(4)?;
                    let id = index(fields[1], line)?;
                    if id != nodes.len() + 1 {
                        return Err(err(format!(
                            "node id {id} is not contiguous, expected {}",
                            nodes.len() + 1
                        )));
                    }
                    nodes.push([real(fields[2], line)?, real(fields[3], line)?]);
                }
                "elem" => {
                    expect(6)?;
                    let id = index(fields[1], line)?;
                    if id != elements.len() + 1 {
                        return Err(err(format!(
                            "element id {id} is not contiguous, expected {}",
                            elements.len() + 1
                        )));
                    }
                    let mut conn = [0usize; 4];
                    for (slot, f) in conn.iter_mut().zip(&fields[2..]) {
                        *slot = index(f, line)? - 1;
                    }
                    elements.push(conn);
                }
                "fix" | "load" => {
                    expect(4)?;
                    let node = index(fields[1], line)? - 1;
                    let dof_n = index(fields[2], line)?;
                    let dof = Dof::from_number(dof_n)
                        .ok_or_else(|| err(format!("dof must be 1 or 2, found {dof_n}")))?;
                    let entry = NodalValue {
                        node,
                        dof,
                        value: real(fields[3], line)?,
                    };
                    if fields[0] == "fix" {
                        dirichlet.push(entry);
                    } else {
                        neumann.push(entry);
                    }
                }
                other => return Err(err(format!("unknown record `{other}`"))),
            }
        }
        let thickness = thickness.ok_or(MeshError::Parse {
            line: 0,
            message: "missing `thickness` record".into(),
        })?;
        Mesh::new(nodes, elements, thickness, dirichlet, neumann)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "thickness {}", self.thickness).unwrap();
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(s, "node {} {} {}", i + 1, p[0], p[1]).unwrap();
        }
        for (e, c) in self.elements.iter().enumerate() {
            writeln!(
                s,
                "elem {} {} {} {} {}",
                e + 1,
                c[0] + 1,
                c[1] + 1,
                c[2] + 1,
                c[3] + 1
            )
            .unwrap();
        }
        for (tag, set) in [("fix", &self.dirichlet), ("load", &self.neumann)] {
            for c in set {
                writeln!(s, "{tag} {} {} {}", c.node + 1, c.dof.number(), c.value).unwrap();
            }
        }
        s
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|source| MeshError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

impl<T: Real> FromStr for Mesh<T> {
    type Err = MeshError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

fn index(field: &str, line: usize) -> Result<usize, MeshError> {
    match field.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(MeshError::Parse {
            line,
            message: format!("expected a positive integer id, found `{field}`"),
        }),
    }
}

fn real<T: Real>(field: &str, line: usize) -> Result<T, MeshError> {
    field
        .parse::<f64>()
        .ok()
        .and_then(T::from_f64)
        .filter(|v| v.is_finite())
        .ok_or_else(|| MeshError::Parse {
            line,
            message: format!("expected a finite number, found `{field}`"),
        })
}
