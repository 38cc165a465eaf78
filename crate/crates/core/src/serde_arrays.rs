//! `Array1` as a plain JSON sequence, and row-list to `Array2` conversion.

pub mod array1 {
    use ndarray::Array1;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Array1<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array1<f64>, D::Error> {
        Vec::<f64>::deserialize(d).map(Array1::from)
    }
}

pub mod array2 {
    use ndarray::Array2;

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Array2<f64>, String> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
            return Err(format!(
                "ragged matrix: row {i} has {} entries, row 0 has {ncols}",
                rows[i].len()
            ));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Array2::from_shape_vec((nrows, ncols), flat).map_err(|e| e.to_string())
    }
}
