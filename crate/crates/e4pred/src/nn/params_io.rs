//! Model parameters on disk: JSON with the scalar name and an
//! architecture fingerprint so a file trained under one build cannot be
//! silently loaded into an incompatible one.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::ModelParams;
use super::NnError;
use crate::scalar::Real;

#[derive(Serialize, Deserialize)]
struct ParamsFile<T: Real> {
    scalar: String,
    arch_hash: String,
    architecture: String,
    params: ModelParams<T>,
}

pub fn save_params<T: Real + Serialize>(
    params: &ModelParams<T>,
    path: &Path,
) -> Result<(), NnError> {
    let file = ParamsFile {
        scalar: T::NAME.to_string(),
        arch_hash: params.arch_hash(),
        architecture: params.architecture(),
        params: params.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|source| NnError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| NnError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_params<T: Real + for<'de> Deserialize<'de>>(
    path: &Path,
) -> Result<ModelParams<T>, NnError> {
    let text = fs::read_to_string(path).map_err(|source| NnError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ParamsFile<T> = serde_json::from_str(&text).map_err(|source| NnError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if file.scalar != T::NAME {
        return Err(NnError::ScalarMismatch {
            expected: T::NAME,
            found: file.scalar,
        });
    }
    let expected = file.params.arch_hash();
    if file.arch_hash != expected {
        return Err(NnError::ArchMismatch {
            expected,
            found: file.arch_hash,
        });
    }
    file.params.validate()?;
    Ok(file.params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn parameters_roundtrip_bit_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        let params = ModelParams::<f64>::init(7);
        save_params(&params, &path).unwrap();
        let loaded = load_params::<f64>(&path).unwrap();
        assert_eq!(params, loaded);
    }

    #[test]
    fn scalar_name_is_checked() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_params(&ModelParams::<f32>::init(7), &path).unwrap();
        let err = load_params::<f64>(&path).unwrap_err();
        assert!(matches!(err, NnError::ScalarMismatch { .. }));
    }

    #[test]
    fn tampered_hash_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        let params = ModelParams::<f64>::init(7);
        save_params(&params, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let tampered = text.replacen(&params.arch_hash(), "0000000000000000", 1);
        std::fs::write(&path, tampered).unwrap();
        let err = load_params::<f64>(&path).unwrap_err();
        assert!(matches!(err, NnError::ArchMismatch { .. }));
    }

    #[test]
    fn file_ends_with_a_newline() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_params(&ModelParams::<f64>::init(0), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.ends_with('\n'));
    }
}
