use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use visc_core::Result;

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct Entry {
    path: String,
    bytes: usize,
    sha256: String,
}

/// Files written by one command. Every write goes through here so the
/// manifest lists all of them.
pub struct Artifacts {
    dir: PathBuf,
    command: String,
    config: Value,
    seed: u64,
    entries: Vec<Entry>,
}

impl Artifacts {
    /// `config` holds the arguments and the contents of every input file;
    /// its hash identifies the run.
    pub fn new(dir: &Path, command: &str, config: Value, seed: u64) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), command: command.to_string(), config, seed, entries: Vec::new() })
    }

    pub fn config_hash(&self) -> String {
        sha256_hex(self.config.to_string().as_bytes())
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.entries.push(Entry { path: name.to_string(), bytes: contents.len(), sha256: sha256_hex(contents.as_bytes()) });
        Ok(())
    }

    /// CSV with a leading `# seed: …` comment line.
    pub fn csv(&mut self, name: &str, body: &str) -> Result<()> {
        self.write(name, &format!("# seed: {}\n{body}", self.seed))
    }

    /// JSON object with `seed` and `config_hash` added.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value)?;
        if let Value::Object(map) = &mut v {
            map.insert("seed".into(), json!(self.seed));
            map.insert("config_hash".into(), json!(self.config_hash()));
        }
        self.write(name, &(serde_json::to_string_pretty(&v)? + "\n"))
    }

    /// Write `manifest.json` listing every file above.
    pub fn finish(self, pass: bool) -> Result<bool> {
        let manifest = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "config_hash": self.config_hash(),
            "config": self.config,
            "pass": pass,
            "files": self.entries,
        });
        fs::write(self.dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(pass)
    }
}

/// Input file text and its digest. The digest goes into the config, so the
/// hash follows the contents and not the path.
pub fn read_input(path: &Path) -> Result<(String, Value)> {
    let text = fs::read_to_string(path)?;
    let digest = json!(sha256_hex(text.as_bytes()));
    Ok((text, digest))
}
