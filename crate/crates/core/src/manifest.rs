//! Run manifests: enough to rerun a command and check its outputs.
//!
//! ```text
//! # sdass run manifest
//! tool_version=0.1.0
//! command=describe
//! arg=describe
//! arg=/data/model.ply
//! arg=--sample
//! arg=500
//! input=<sha256> /data/model.ply
//! param.seed=7
//! output=<sha256> features.feat
//! ```
//!
//! `arg` lines are the command line minus `--out`, with input paths made
//! absolute. Values run to the end of the line.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub args: Vec<String>,
    /// `(path, sha256)`.
    pub inputs: Vec<(String, String)>,
    /// Every resolved parameter and seed, including defaults.
    pub params: Vec<(String, String)>,
    /// `(file name, sha256)`.
    pub outputs: Vec<(String, String)>,
}

fn check_line(what: &str, value: &str) -> Result<()> {
    if value.contains('\n') || value.contains('\r') {
        return Err(Error::Manifest(format!("{what} contains a line break: {value:?}")));
    }
    Ok(())
}

impl RunManifest {
    pub fn to_text(&self) -> Result<String> {
        let mut out = String::from("# sdass run manifest\n");
        let mut line = |key: &str, value: &str| -> Result<()> {
            check_line(key, value)?;
            out.push_str(key);
            out.push('=');
            out.push_str(value);
            out.push('\n');
            Ok(())
        };
        line("tool_version", &self.tool_version)?;
        line("command", &self.command)?;
        for a in &self.args {
            line("arg", a)?;
        }
        for (path, sha) in &self.inputs {
            line("input", &format!("{sha} {path}"))?;
        }
        for (k, v) in &self.params {
            if k.contains('=') {
                return Err(Error::Manifest(format!("parameter name {k:?} contains '='")));
            }
            line(&format!("param.{k}"), v)?;
        }
        for (name, sha) in &self.outputs {
            line("output", &format!("{sha} {name}"))?;
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = RunManifest::default();
        let (mut version, mut command) = (None, None);
        for (n, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| Error::Manifest(format!("line {}: expected key=value", n + 1)))?;
            let hashed = |v: &str| -> Result<(String, String)> {
                let (sha, rest) = v
                    .split_once(' ')
                    .ok_or_else(|| Error::Manifest(format!("line {}: expected '<sha256> <name>'", n + 1)))?;
                Ok((rest.to_string(), sha.to_string()))
            };
            match key {
                "tool_version" => version = Some(value.to_string()),
                "command" => command = Some(value.to_string()),
                "arg" => m.args.push(value.to_string()),
                "input" => m.inputs.push(hashed(value)?),
                "output" => m.outputs.push(hashed(value)?),
                k => match k.strip_prefix("param.") {
                    Some(name) => m.params.push((name.to_string(), value.to_string())),
                    None => return Err(Error::Manifest(format!("line {}: unknown key {k:?}", n + 1))),
                },
            }
        }
        m.tool_version = version.ok_or_else(|| Error::Manifest("missing tool_version".into()))?;
        m.command = command.ok_or_else(|| Error::Manifest("missing command".into()))?;
        Ok(m)
    }

    pub fn param(&self, name: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunManifest {
        RunManifest {
            tool_version: "0.1.0".into(),
            command: "match".into(),
            args: vec!["match".into(), "/tmp/a b.feat".into(), "--geo-tol-mr=2".into()],
            inputs: vec![("/tmp/a b.feat".into(), "ab12".into())],
            params: vec![("seed".into(), "7".into()), ("mr_source".into(), "model".into())],
            outputs: vec![("rpc.csv".into(), "ff00".into())],
        }
    }

    #[test]
    fn round_trip() {
        let m = sample();
        assert_eq!(RunManifest::parse(&m.to_text().unwrap()).unwrap(), m);
        assert_eq!(m.param("seed"), Some("7"));
    }

    #[test]
    fn rejects_bad_text() {
        assert!(RunManifest::parse("command=x\n").is_err());
        assert!(RunManifest::parse("tool_version=1\ncommand=x\nnonsense\n").is_err());
        assert!(RunManifest::parse("tool_version=1\ncommand=x\nbogus=1\n").is_err());
        let mut m = sample();
        m.args.push("two\nlines".into());
        assert!(m.to_text().is_err());
    }
}
