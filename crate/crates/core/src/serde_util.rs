//! Serde adapters: row-major nested arrays for matrices, flat arrays for
//! vectors, and 1-based node ids on the wire.

use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Converts row-major rows into a matrix; `None` when rows are ragged.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        matrix_from_rows(&rows).ok_or_else(|| D::Error::custom("matrix rows have unequal lengths"))
    }
}

pub mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

pub mod opt_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(matrix_to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
        match Option::<Vec<Vec<f64>>>::deserialize(d)? {
            None => Ok(None),
            Some(rows) => matrix_from_rows(&rows)
                .map(Some)
                .ok_or_else(|| D::Error::custom("matrix rows have unequal lengths")),
        }
    }
}

pub mod vectors {
    use super::*;

    pub fn serialize<S: Serializer>(vs: &[DVector<f64>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DVector<f64>>, D::Error> {
        Ok(Vec::<Vec<f64>>::deserialize(d)?
            .into_iter()
            .map(DVector::from_vec)
            .collect())
    }
}

/// A 0-based index that is written and read as a 1-based id.
pub mod one_based {
    use super::*;

    pub fn serialize<S: Serializer>(i: &usize, s: S) -> Result<S::Ok, S::Error> {
        (i + 1).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
        let id = usize::deserialize(d)?;
        id.checked_sub(1)
            .ok_or_else(|| D::Error::custom("node ids are 1-based; got 0"))
    }
}

pub mod one_based_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[usize], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|i| i + 1).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
        Vec::<usize>::deserialize(d)?
            .into_iter()
            .map(|id| {
                id.checked_sub(1)
                    .ok_or_else(|| D::Error::custom("node ids are 1-based; got 0"))
            })
            .collect()
    }
}

pub mod one_based_nested {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vec<usize>], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|l| l.iter().map(|i| i + 1).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<usize>>, D::Error> {
        Vec::<Vec<usize>>::deserialize(d)?
            .into_iter()
            .map(|l| {
                l.into_iter()
                    .map(|id| {
                        id.checked_sub(1)
                            .ok_or_else(|| D::Error::custom("node ids are 1-based; got 0"))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Edge endpoints `(from, to)`, written 1-based. Serialization only.
pub mod one_based_pairs {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[(usize, usize)], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&(a, b)| (a + 1, b + 1)).collect::<Vec<_>>().serialize(s)
    }
}
