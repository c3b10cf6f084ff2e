use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use fedte_core::data::{load_cifar10, load_idx, Dataset};

use crate::settings::DatasetName;

/// Directory under the data root holding a dataset's files.
pub fn dataset_dir(root: &Path, name: DatasetName) -> PathBuf {
    let dir = root.join(name.as_str());
    match name {
        DatasetName::Cifar10 if dir.join("cifar-10-batches-bin").is_dir() => dir.join("cifar-10-batches-bin"),
        _ => dir,
    }
}

/// Loads `(train, test)`, optionally truncated to the first `limit` examples.
pub fn load(
    root: &Path,
    name: DatasetName,
    train_limit: Option<usize>,
    test_limit: Option<usize>,
) -> Result<(Dataset, Dataset)> {
    let dir = dataset_dir(root, name);
    let (train, test) = match name {
        DatasetName::Mnist | DatasetName::Fashion => (
            load_idx(dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte"))?,
            load_idx(dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte"))?,
        ),
        DatasetName::Cifar10 => {
            let batches: Vec<PathBuf> = (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect();
            (load_cifar10(&batches)?, load_cifar10(&[dir.join("test_batch.bin")])?)
        }
    };
    let cut = |ds: Dataset, limit: Option<usize>| -> Result<Dataset> {
        match limit {
            Some(0) => bail!("dataset limits must be >= 1"),
            Some(n) => Ok(ds.take(n)),
            None => Ok(ds),
        }
    };
    Ok((cut(train, train_limit)?, cut(test, test_limit)?))
}
