//! Data CSV: `exp,step,point,x,y,comp,value,weight`, one row per scalar.

use std::io::{Read, Write};
use std::path::Path;

use super::{Component, DataError, ObservationKey, ObservationSet};

pub const HEADER: [&str; 8] = ["exp", "step", "point", "x", "y", "comp", "value", "weight"];

impl ObservationSet {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| DataError::Csv(e.to_string());
        w.write_record(HEADER).map_err(err)?;
        for ((k, v), wt) in self.keys.iter().zip(&self.values).zip(&self.weights) {
            w.write_record([
                k.exp.to_string(),
                k.step.to_string(),
                k.point.to_string(),
                k.x.to_string(),
                k.y.to_string(),
                k.comp.to_string(),
                v.to_string(),
                wt.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| DataError::Csv(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory csv");
        String::from_utf8(buf).expect("ascii csv")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, DataError> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(|e| DataError::Csv(e.to_string()))?;
        if header.iter().collect::<Vec<_>>() != HEADER {
            return Err(DataError::Csv(format!(
                "header must be `{}`, found `{}`",
                HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut keys = Vec::new();
        let mut values = Vec::new();
        let mut weights = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
            let line = row + 2;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let int = |i: usize| {
                field(i).parse::<usize>().map_err(|_| {
                    DataError::Csv(format!(
                        "line {line}: `{}` is not an integer {}",
                        field(i),
                        HEADER[i]
                    ))
                })
            };
            let real = |i: usize| {
                field(i).parse::<f64>().map_err(|_| {
                    DataError::Csv(format!(
                        "line {line}: `{}` is not a number {}",
                        field(i),
                        HEADER[i]
                    ))
                })
            };
            keys.push(ObservationKey {
                exp: int(0)?,
                step: int(1)?,
                point: int(2)?,
                x: real(3)?,
                y: real(4)?,
                comp: field(5).parse::<Component>()?,
            });
            values.push(real(6)?);
            weights.push(real(7)?);
        }
        ObservationSet::new(keys, values, weights)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| DataError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| DataError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::read_csv(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let keys = vec![
            ObservationKey {
                exp: 1,
                step: 1,
                point: 3,
                x: 0.1,
                y: 2.0 / 3.0,
                comp: Component::U1,
            },
            ObservationKey {
                exp: 1,
                step: 1,
                point: 0,
                x: 0.0,
                y: 0.0,
                comp: Component::F1,
            },
        ];
        let set =
            ObservationSet::new(keys, vec![1e-3 / 7.0, -1500.0], vec![41.3, 1.0 / 1500.0]).unwrap();
        let text = set.to_csv_string();
        assert!(text.starts_with("exp,step,point,x,y,comp,value,weight\n"));
        let back = ObservationSet::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.keys(), set.keys());
        assert_eq!(back.values(), set.values());
        assert_eq!(back.weights(), set.weights());
    }

    #[test]
    fn wrong_header_is_rejected() {
        let r = ObservationSet::read_csv("exp,step,point,x,y,value,comp,weight\n".as_bytes());
        assert!(r.is_err());
    }
}
