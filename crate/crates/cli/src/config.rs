//! JSON run configs: flags override file values, unknown keys are rejected.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::error::{usage, CliError, CliResult};

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

/// Parses `path` as a JSON object and splits it into the keys listed in
/// `keys` and the rest, each deserialized into its own record.
pub fn load_split<A, B>(path: &Path, keys: &[&str]) -> CliResult<(A, B)>
where
    A: DeserializeOwned,
    B: DeserializeOwned,
{
    let text = read(path)?;
    let Value::Object(all) = serde_json::from_str::<Value>(&text)? else {
        return usage(format!("{}: config must be a JSON object", path.display()));
    };
    let (mut picked, mut rest) = (Map::new(), Map::new());
    for (k, v) in all {
        if keys.contains(&k.as_str()) {
            picked.insert(k, v);
        } else {
            rest.insert(k, v);
        }
    }
    Ok((serde_json::from_value(Value::Object(picked))?, serde_json::from_value(Value::Object(rest))?))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    Ok(serde_json::from_str(&read(path)?)?)
}

/// A buffered writer on `path`, or on stdout when no path is given.
pub fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|source| CliError::File { path: p.to_path_buf(), source })?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}
