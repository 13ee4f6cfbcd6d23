//! Flag resolution: a JSON config file overrides flags, and `RSVDLAB_SEED`
//! overrides both for the seed.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "RSVDLAB_SEED";

/// Replaces every field of `args` named by a key of the config object.
/// Unknown keys are a usage error.
pub fn overlay<T: Serialize + DeserializeOwned>(args: T, config: Option<&Path>) -> CliResult<T> {
    let Some(path) = config else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let Value::Object(overrides) = serde_json::from_str(&text)? else {
        return Err(CliError::usage("config file must hold a JSON object"));
    };
    let Value::Object(mut fields) = serde_json::to_value(&args)? else {
        unreachable!("argument structs serialize to objects");
    };
    for (key, value) in overrides {
        if !fields.contains_key(&key) {
            return Err(CliError::usage(format!("unknown config key `{key}`")));
        }
        fields.insert(key, value);
    }
    serde_json::from_value(Value::Object(fields)).map_err(|e| CliError::usage(format!("bad config value: {e}")))
}

/// The seed from the environment, if set.
pub fn env_seed() -> CliResult<Option<u64>> {
    env_seed_from(std::env::var(SEED_ENV).ok().as_deref())
}

fn env_seed_from(raw: Option<&str>) -> CliResult<Option<u64>> {
    raw.map(|s| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| CliError::usage(format!("{SEED_ENV} must be an unsigned integer, got `{s}`")))
    })
    .transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Flags {
        k: usize,
        g: Option<usize>,
        name: String,
    }

    fn write(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn config_keys_override_flags() {
        let flags = Flags { k: 2, g: None, name: "a".into() };
        let f = write(r#"{"g": 4, "name": "b"}"#);
        let got = overlay(flags, Some(f.path())).unwrap();
        assert_eq!(got, Flags { k: 2, g: Some(4), name: "b".into() });
    }

    #[test]
    fn unknown_or_mistyped_keys_are_usage_errors() {
        let flags = || Flags { k: 2, g: None, name: "a".into() };
        for text in [r#"{"kk": 1}"#, r#"{"k": "two"}"#, "[1]", "{"] {
            let err = overlay(flags(), Some(write(text).path())).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
        assert_eq!(overlay(flags(), None).unwrap(), flags());
    }

    #[test]
    fn seed_parsing() {
        assert_eq!(env_seed_from(None).unwrap(), None);
        assert_eq!(env_seed_from(Some(" 42 ")).unwrap(), Some(42));
        assert!(env_seed_from(Some("-1")).is_err());
    }
}
